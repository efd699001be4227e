//! Flux insertion, Fermi projection and the bulk ℤ₂ index
//! `dim ker(U P_F U* − P_F − 1) mod 2`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{count_near, CountingConfig, DefectWindow, IndexReport};
use crate::lattice::{
    build_bulk_hamiltonian, build_time_reversal, gap_from_eigenvalues, verify_trs, Boundary, Gap,
    LatticeGeometry, ModelSpec,
};
use crate::operator::{
    antiunitary::reversal_residual, c, linalg, AntiUnitary, CMat, HermitianOperator, ProjectionOperator,
    SpectralDecomposition, C64, ZERO,
};

/// Diagonal phases `e^{i arg(x − c)}`, equal on every orbital of a site.
#[derive(Debug, Clone)]
pub struct FluxUnitary {
    pub center: (f64, f64),
    pub phases: Vec<C64>,
}

impl FluxUnitary {
    pub fn matrix(&self) -> CMat {
        Array2::from_diag(&Array1::from(self.phases.clone()))
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }
}

/// Torus midpoint shifted by half a lattice spacing off the sites.
pub fn default_center(g: &LatticeGeometry) -> (f64, f64) {
    ((g.lx / 2) as f64 - 0.5, (g.ly / 2) as f64 - 0.5)
}

/// Full planar angle of `x − center` in `[0, 2π)`, in plain lattice
/// coordinates; on a torus the branch cut therefore also meets the seams.
pub fn flux_unitary(g: &LatticeGeometry, center: (f64, f64)) -> Result<FluxUnitary> {
    let mut phases = Vec::with_capacity(g.dim());
    for site in 0..g.sites() {
        let (x1, x2) = g.position(site);
        let (dx, dy) = (x1 as f64 - center.0, x2 as f64 - center.1);
        if dx.hypot(dy) < 1e-12 {
            return Err(Error::Geometry(format!("flux center {center:?} sits on site ({x1}, {x2})")));
        }
        let angle = dy.atan2(dx).rem_euclid(2.0 * PI);
        let phase = C64::from_polar(1.0, angle);
        phases.extend(std::iter::repeat(phase).take(g.orbitals));
    }
    Ok(FluxUnitary { center, phases })
}

/// Spectral projection onto eigenvalues `≤ mu`.
pub fn fermi_projection(h: &HermitianOperator, mu: f64) -> Result<ProjectionOperator> {
    let dec = h.spectral_decomposition()?;
    fermi_projection_from(&dec, mu)
}

pub fn fermi_projection_from(dec: &SpectralDecomposition, mu: f64) -> Result<ProjectionOperator> {
    let values = dec.eigenvalues.as_slice().unwrap();
    if gap_from_eigenvalues(values, mu).is_none() {
        return Err(Error::NoGap { mu, tol: 1e-9 });
    }
    let occupied: Vec<usize> = (0..values.len()).filter(|&i| values[i] <= mu).collect();
    Ok(ProjectionOperator::from_columns(&dec.columns(&occupied).view()))
}

/// `A = U P U* − P` for a unitary `U`.
pub fn defect_difference(u: &CMat, p: &CMat) -> CMat {
    let q = linalg::mm_nh(&linalg::mm(&u.view(), &p.view()).view(), &u.view());
    q - p
}

/// `A = U P U* − P` with `U` diagonal.
pub fn defect_difference_diagonal(phases: &[C64], p: &CMat) -> CMat {
    let mut a = p.clone();
    for ((i, j), z) in a.indexed_iter_mut() {
        *z = phases[i] * *z * phases[j].conj() - p[[i, j]];
    }
    a
}

/// Eigendecomposition of the self-adjoint `A_B = U P U* − P`.
pub fn bulk_kernel_spectrum(u: &CMat, p: &ProjectionOperator) -> Result<SpectralDecomposition> {
    let a = defect_difference(u, p.matrix());
    HermitianOperator::with_tolerance(a, "A", 1e-10)?.spectral_decomposition()
}

/// Everything the bulk index needs, kept for downstream checks.
#[derive(Debug, Clone)]
pub struct BulkSetup {
    pub geometry: LatticeGeometry,
    pub tau: AntiUnitary,
    pub hamiltonian: HermitianOperator,
    pub gap: Gap,
    pub fermi: ProjectionOperator,
    pub flux: FluxUnitary,
    pub a_spectrum: SpectralDecomposition,
}

pub fn bulk_setup(spec: &ModelSpec, mu: f64, center: Option<(f64, f64)>) -> Result<BulkSetup> {
    let g = spec.geometry()?;
    if g.boundary_x != Boundary::Periodic || g.boundary_y != Boundary::Periodic {
        return Err(Error::Geometry("bulk index needs a torus".into()));
    }
    let tau = build_time_reversal(&g)?;
    let h = build_bulk_hamiltonian(spec)?;
    let trs = verify_trs(h.matrix(), &tau)?;
    if !trs.pass {
        return Err(Error::Invariant {
            what: "time-reversal symmetry of H",
            residual: trs.residual,
            tol: 1e-10,
        });
    }
    let dec = h.spectral_decomposition()?;
    let gap = gap_from_eigenvalues(dec.eigenvalues.as_slice().unwrap(), mu).ok_or(Error::NoGap { mu, tol: 1e-9 })?;
    let fermi = fermi_projection_from(&dec, mu)?;
    let flux = flux_unitary(&g, center.unwrap_or_else(|| default_center(&g)))?;
    let a = defect_difference_diagonal(&flux.phases, fermi.matrix());
    let a_spectrum = HermitianOperator::with_tolerance(a, "A_B", 1e-10)?.spectral_decomposition()?;
    Ok(BulkSetup {
        geometry: g,
        tau,
        hamiltonian: h,
        gap,
        fermi,
        flux,
        a_spectrum,
    })
}

/// Bulk index report plus the symmetry residuals that justify it.
#[derive(Debug, Clone, Serialize)]
pub struct BulkIndex {
    #[serde(flatten)]
    pub report: IndexReport,
    pub gap: (f64, f64),
    pub fermi_rank: usize,
    /// `‖τ U τ* − U*‖`.
    pub flux_reversal_residual: f64,
    /// `‖τ P_F τ* − P_F‖`.
    pub fermi_symmetry_residual: f64,
}

pub fn bulk_index(spec: &ModelSpec, mu: f64, cfg: &CountingConfig) -> Result<BulkIndex> {
    bulk_index_at(spec, mu, cfg, None)
}

pub fn bulk_index_at(spec: &ModelSpec, mu: f64, cfg: &CountingConfig, center: Option<(f64, f64)>) -> Result<BulkIndex> {
    cfg.validate()?;
    let s = bulk_setup(spec, mu, center)?;
    bulk_index_from(&s, cfg)
}

pub fn bulk_index_from(s: &BulkSetup, cfg: &CountingConfig) -> Result<BulkIndex> {
    let window = DefectWindow::new(&s.geometry, s.flux.center, cfg.radius_for(&s.geometry));
    let report = count_near(&s.a_spectrum, 1.0, &window, cfg)?;
    let flux_reversal_residual = reversal_residual(&s.tau, &s.flux.matrix())?;
    let fermi_symmetry_residual =
        crate::operator::antiunitary::covariance_residual(&s.tau, s.fermi.matrix(), s.fermi.matrix())?;
    Ok(BulkIndex {
        report,
        gap: (s.gap.lower, s.gap.upper),
        fermi_rank: s.fermi.rank(),
        flux_reversal_residual,
        fermi_symmetry_residual,
    })
}

/// Real-space Bott index of each spin block's Fermi projection; requires
/// `λ_R = 0` so that the spin blocks decouple.
pub fn chern_block_oracle(spec: &ModelSpec, mu: f64) -> Result<(i64, i64)> {
    let g = spec.geometry()?;
    if g.boundary_x != Boundary::Periodic || g.boundary_y != Boundary::Periodic {
        return Err(Error::Geometry("Bott index needs a torus".into()));
    }
    let h = build_bulk_hamiltonian(spec)?;
    let n = g.dim();
    let up: Vec<usize> = (0..n).filter(|i| i % 2 == 0).collect();
    let dn: Vec<usize> = (0..n).filter(|i| i % 2 == 1).collect();
    let cross = h.matrix().select(Axis(0), &up).select(Axis(1), &dn);
    if cross.iter().any(|z| *z != ZERO) {
        return Err(Error::InvalidArgument("spin blocks are coupled (λ_R ≠ 0)".into()));
    }
    let mut out = [0i64; 2];
    for (slot, idx) in [&up, &dn].into_iter().enumerate() {
        let block = h.matrix().select(Axis(0), idx).select(Axis(1), idx);
        let hb = HermitianOperator::new(block, "block")?;
        let p = fermi_projection(&hb, mu)?;
        let x: Vec<f64> = idx.iter().map(|&i| g.position(i / g.orbitals).0 as f64).collect();
        let y: Vec<f64> = idx.iter().map(|&i| g.position(i / g.orbitals).1 as f64).collect();
        out[slot] = bott_index(p.matrix(), &x, g.lx, &y, g.ly)?;
    }
    Ok((out[0], out[1]))
}

/// `(1/2π) Im tr log(P e^{2πiX/Lx} P e^{2πiY/Ly} P e^{−2πiX/Lx} P e^{−2πiY/Ly} P + 1 − P)`.
pub fn bott_index(p: &CMat, x: &[f64], lx: usize, y: &[f64], ly: usize) -> Result<i64> {
    let n = p.nrows();
    let ux: Vec<C64> = x.iter().map(|&v| C64::from_polar(1.0, 2.0 * PI * v / lx as f64)).collect();
    let uy: Vec<C64> = y.iter().map(|&v| C64::from_polar(1.0, 2.0 * PI * v / ly as f64)).collect();
    // P D P as a dense product with diagonal D
    let sandwich = |d: &[C64], conj: bool| -> CMat {
        let mut m = p.clone();
        for ((i, _), z) in m.indexed_iter_mut() {
            let f = if conj { d[i].conj() } else { d[i] };
            *z *= f;
        }
        linalg::mm(&p.view(), &m.view())
    };
    let a = sandwich(&ux, false);
    let b = sandwich(&uy, false);
    let ad = sandwich(&ux, true);
    let bd = sandwich(&uy, true);
    let mut w = linalg::mm(&linalg::mm(&a.view(), &b.view()).view(), &linalg::mm(&ad.view(), &bd.view()).view());
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { c(1.0, 0.0) } else { ZERO };
            w[[i, j]] += id - p[[i, j]];
        }
    }
    let ev = linalg::eigvals_general(&w.view())?;
    let total: f64 = ev.iter().map(|z| z.arg()).sum();
    let bott = total / (2.0 * PI);
    let rounded = bott.round();
    if (bott - rounded).abs() > 1e-6 {
        return Err(Error::Invariant {
            what: "integrality of the Bott index",
            residual: (bott - rounded).abs(),
            tol: 1e-6,
        });
    }
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{distance, identity};
    use ndarray::arr1;

    #[test]
    fn flux_phase_examples() {
        let g = LatticeGeometry::torus(4, 4);
        let f = flux_unitary(&g, (-1.0, 0.0)).unwrap();
        // site (0,0) is displaced (1, 0)
        assert!((f.phases[g.flat(0, 0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let f = flux_unitary(&g, (1.0, -1.0)).unwrap();
        assert!((f.phases[g.flat(1, 0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
        let f = flux_unitary(&g, (4.0, 1.0)).unwrap();
        assert!((f.phases[g.flat(3, 1, 3)] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn flux_center_on_site_rejected() {
        let g = LatticeGeometry::torus(4, 4);
        assert!(flux_unitary(&g, (1.0, 2.0)).is_err());
        assert!(flux_unitary(&g, default_center(&g)).is_ok());
    }

    #[test]
    fn fermi_projection_examples() {
        let h = HermitianOperator::new(Array2::from_diag(&arr1(&[c(-1.0, 0.0), c(1.0, 0.0)])), "h").unwrap();
        let p = fermi_projection(&h, 0.0).unwrap();
        assert_eq!(p.rank(), 1);
        let want = Array2::from_diag(&arr1(&[c(1.0, 0.0), ZERO]));
        assert!(distance(&p.matrix().view(), &want.view()) < 1e-15);
        assert!(fermi_projection(&h, 1.0).is_err());
    }

    #[test]
    fn trivial_flux_gives_zero_difference() {
        let p = ProjectionOperator::from_mask(&[true, false, true, false]);
        let dec = bulk_kernel_spectrum(&identity(4), &p).unwrap();
        assert!(dec.eigenvalues.iter().all(|v| v.abs() < 1e-15));
        let d = Array2::from_diag(&arr1(&[c(0.0, 1.0), c(-1.0, 0.0), c(0.6, 0.8), c(1.0, 0.0)]));
        let dec = bulk_kernel_spectrum(&d, &p).unwrap();
        assert!(dec.eigenvalues.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn half_filling_rank() {
        let spec = ModelSpec::torus(1.0, 4);
        let h = build_bulk_hamiltonian(&spec).unwrap();
        assert_eq!(fermi_projection(&h, 0.0).unwrap().rank(), 2 * 16);
    }

    #[test]
    fn flux_is_time_reversal_compatible() {
        let g = LatticeGeometry::torus(6, 6);
        let f = flux_unitary(&g, default_center(&g)).unwrap();
        let tau = build_time_reversal(&g).unwrap();
        assert!(reversal_residual(&tau, &f.matrix()).unwrap() == 0.0);
    }

    #[test]
    fn bott_of_small_blocks() {
        let (a, b) = chern_block_oracle(&ModelSpec::torus(1.0, 8), 0.0).unwrap();
        assert_eq!(a.abs(), 1);
        assert_eq!(a + b, 0);
        assert_eq!(chern_block_oracle(&ModelSpec::torus(3.0, 8), 0.0).unwrap(), (0, 0));
        assert!(chern_block_oracle(&ModelSpec::torus(1.0, 6).with_disorder(0.3, 0.0, 0), 0.0).is_err());
    }
}
