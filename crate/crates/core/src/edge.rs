//! Edge unitary `U_E = W_g(Ĥ)`, half-ring projection and the edge ℤ₂ index
//! `dim ker(U_E Π̂₁ U_E* − Π̂₁ − 1) mod 2`, with a Fredholm cross-check.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::bulk::{bulk_index_from, bulk_setup};
use crate::error::{Error, Result};
use crate::index::{count_near, plateau, CountingConfig, DefectWindow, IndexReport, SweepRow, Z2};
use crate::lattice::{
    build_half_space_hamiltonian, build_time_reversal, gap_from_eigenvalues, verify_trs, Boundary,
    LatticeGeometry, ModelSpec,
};
use crate::operator::{
    antiunitary::reversal_residual, distance, linalg, schatten_norm, AntiUnitary, CMat,
    HermitianOperator, ProjectionOperator, SpectralDecomposition, UnitaryOperator, C64, ONE, ZERO,
};
use crate::operator::orthonormalize;

/// Cosine ramp from 1 on `(−∞, a]` to 0 on `[b, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapFunction {
    pub a: f64,
    pub b: f64,
}

pub fn make_gap_function(a: f64, b: f64) -> Result<GapFunction> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("gap interval ({a}, {b}) is empty")));
    }
    Ok(GapFunction { a, b })
}

impl GapFunction {
    pub fn g(&self, x: f64) -> f64 {
        if x <= self.a {
            1.0
        } else if x >= self.b {
            0.0
        } else {
            0.5 * (1.0 + (PI * (x - self.a) / (self.b - self.a)).cos())
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            0.0
        } else {
            let h = self.b - self.a;
            -0.5 * PI / h * (PI * (x - self.a) / h).sin()
        }
    }

    /// `e^{2πi g(x)}`, exactly 1 where `g ∈ {0, 1}`.
    pub fn w(&self, x: f64) -> C64 {
        let g = self.g(x);
        if g == 0.0 || g == 1.0 {
            ONE
        } else {
            C64::from_polar(1.0, 2.0 * PI * g)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
}

/// `W_g(Ĥ)` from a spectral decomposition of `Ĥ`.
pub fn edge_unitary_from(dec: &SpectralDecomposition, g: &GapFunction) -> Result<UnitaryOperator> {
    let u = dec.apply(|x| g.w(x))?;
    UnitaryOperator::with_tolerance(u, 1e-9)
}

pub fn edge_unitary(h: &HermitianOperator, g: &GapFunction) -> Result<UnitaryOperator> {
    edge_unitary_from(&h.spectral_decomposition()?, g)
}

/// `U_E = 1 + V (W_g(Λ) − 1) V†` over the eigenpairs `(Λ, V)` of `Ĥ` inside
/// `Δ`. Exact, since `W_g = 1` off `Δ`.
#[derive(Debug, Clone)]
pub struct GapUnitary {
    pub energies: Vec<f64>,
    /// Orthonormal columns.
    pub vectors: CMat,
    /// `W_g(λ) − 1` per column.
    pub shifts: Vec<C64>,
}

impl GapUnitary {
    pub fn from_hamiltonian(h: &HermitianOperator, g: &GapFunction) -> Result<Self> {
        let (w, v) = linalg::eigh_window(&h.matrix().view(), g.a, g.b)?;
        Self::new(w.to_vec(), v, g)
    }

    pub fn new(energies: Vec<f64>, vectors: CMat, g: &GapFunction) -> Result<Self> {
        if vectors.ncols() != energies.len() {
            return Err(Error::Dimension("one energy per vector".into()));
        }
        let gram = linalg::mm_hn(&vectors.view(), &vectors.view());
        let residual = crate::operator::distance_to_identity(&gram.view());
        if residual > 1e-9 {
            return Err(Error::Invariant {
                what: "orthonormal gap eigenvectors",
                residual,
                tol: 1e-9,
            });
        }
        let shifts = energies.iter().map(|&e| g.w(e) - ONE).collect();
        Ok(Self {
            energies,
            vectors,
            shifts,
        })
    }

    pub fn rank(&self) -> usize {
        self.energies.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    fn low_rank_apply(&self, x: &CMat, adjoint: bool) -> CMat {
        let mut coef = linalg::mm_hn(&self.vectors.view(), &x.view());
        for (mut row, d) in coef.axis_iter_mut(Axis(0)).zip(&self.shifts) {
            let d = if adjoint { d.conj() } else { *d };
            row.mapv_inplace(|z| z * d);
        }
        x + &linalg::mm(&self.vectors.view(), &coef.view())
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        self.low_rank_apply(x, false)
    }

    pub fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.low_rank_apply(x, true)
    }

    /// Dense `U_E`; unitary to the orthonormality residual of `V`, which
    /// `new` bounds.
    pub fn dense(&self) -> UnitaryOperator {
        let mut scaled = self.vectors.clone();
        for (mut col, d) in scaled.axis_iter_mut(Axis(1)).zip(&self.shifts) {
            col.mapv_inplace(|z| z * d);
        }
        let mut u = linalg::mm_nh(&scaled.view(), &self.vectors.view());
        for i in 0..u.nrows() {
            u[[i, i]] += ONE;
        }
        UnitaryOperator::from_certified(u)
    }

    /// `‖Ĥ V − V Λ‖`.
    pub fn eigen_residual(&self, h: &CMat) -> f64 {
        let mut r = linalg::mm(&h.view(), &self.vectors.view());
        for (j, mut col) in r.axis_iter_mut(Axis(1)).enumerate() {
            col.zip_mut_with(&self.vectors.column(j), |x, v| *x -= v * self.energies[j]);
        }
        crate::operator::fro_norm(&r.view())
    }

    /// `‖(U_E − 1)(1 − V V†)‖ = ‖D (V† − V†V V†)‖`.
    pub fn off_gap_residual(&self) -> f64 {
        let vh = self.vectors.t().mapv(|z| z.conj());
        let gram = linalg::mm_hn(&self.vectors.view(), &self.vectors.view());
        let mut e = &vh - &linalg::mm(&gram.view(), &vh.view());
        for (mut row, d) in e.axis_iter_mut(Axis(0)).zip(&self.shifts) {
            row.mapv_inplace(|z| z * d);
        }
        crate::operator::fro_norm(&e.view())
    }
}

fn mask_rows(x: &CMat, mask: &[bool]) -> CMat {
    let mut out = x.clone();
    for (mut row, &keep) in out.axis_iter_mut(Axis(0)).zip(mask) {
        if !keep {
            row.fill(ZERO);
        }
    }
    out
}

/// Nonzero spectrum of `A_E = U Π U* − Π` for a diagonal projection `Π`
/// given by `mask`. `A_E` vanishes on the complement of `span{V, ΠV}`, so
/// the compression to that span carries every nonzero eigenpair; the zero
/// eigenspace is omitted.
pub fn edge_difference_spectrum(u: &GapUnitary, mask: &[bool]) -> Result<SpectralDecomposition> {
    if mask.len() != u.dim() {
        return Err(Error::Dimension("mask and unitary sizes differ".into()));
    }
    let pv = mask_rows(&u.vectors, mask);
    let q = orthonormalize(&ndarray::concatenate![Axis(1), u.vectors, pv], 1e-10);
    let pu = mask_rows(&u.apply_adjoint(&q), mask);
    let aq = u.apply(&pu) - mask_rows(&q, mask);
    let m = linalg::mm_hn(&q.view(), &aq.view());
    let dec = HermitianOperator::with_tolerance(m, "A_E", 1e-10)?.spectral_decomposition()?;
    Ok(SpectralDecomposition {
        eigenvectors: linalg::mm(&q.view(), &dec.eigenvectors.view()),
        eigenvalues: dec.eigenvalues,
    })
}

/// Columns `x₁ ≥ cut` (all rows and orbitals).
pub fn quadrant_projection(geom: &LatticeGeometry, cut: usize) -> Result<ProjectionOperator> {
    if cut == 0 || cut >= geom.lx {
        return Err(Error::Geometry(format!("cut column {cut} outside 1..{}", geom.lx)));
    }
    let mask: Vec<bool> = (0..geom.dim())
        .map(|i| geom.position(i / geom.orbitals).0 >= cut)
        .collect();
    Ok(ProjectionOperator::from_mask(&mask))
}

pub fn default_cut(geom: &LatticeGeometry) -> usize {
    geom.lx / 2
}

/// The kept corner: the cut between columns `cut − 1` and `cut` on the
/// open edge `x₂ = 0`.
pub fn default_corner(cut: usize) -> (f64, f64) {
    (cut as f64 - 0.5, 0.0)
}

/// `A = U Π U* − Π` for a diagonal 0/1 projection.
pub fn edge_difference(u: &CMat, p: &ProjectionOperator) -> CMat {
    let sel: Vec<usize> = (0..p.dim()).filter(|&i| p.matrix()[[i, i]].re > 0.5).collect();
    let us = u.select(Axis(1), &sel);
    linalg::mm_nh(&us.view(), &us.view()) - p.matrix()
}

fn is_diagonal(m: &CMat) -> bool {
    m.indexed_iter().all(|((i, j), z)| i == j || *z == ZERO)
}

/// Orthonormal basis of `Ran P`.
pub fn range_basis(p: &ProjectionOperator) -> Result<CMat> {
    let m = p.matrix();
    if is_diagonal(m) {
        let sel: Vec<usize> = (0..p.dim()).filter(|&i| m[[i, i]].re > 0.5).collect();
        let mut k = Array2::zeros((p.dim(), sel.len()));
        for (col, &i) in sel.iter().enumerate() {
            k[[i, col]] = ONE;
        }
        return Ok(k);
    }
    let dec = HermitianOperator::with_tolerance(m.clone(), "P", 1e-9)?.spectral_decomposition()?;
    let idx: Vec<usize> = (0..p.dim()).filter(|&i| dec.eigenvalues[i] > 0.5).collect();
    Ok(dec.columns(&idx))
}

/// One distance bucket of the commutator decay table.
#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub distance: f64,
    /// Largest Frobenius norm of a site row-block at this distance.
    pub max_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub decay_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// `‖P_x [U_E, Π̂₁]‖` against distance of `x` from the nearest cut.
    pub from_cut: Vec<DecayRow>,
    /// The same against distance from the nearest open edge.
    pub from_edge: Vec<DecayRow>,
    pub fit_cut: Option<ExpFit>,
    pub fit_edge: Option<ExpFit>,
    /// `‖P_x (U_E − 1)‖` against distance from the nearest open edge.
    pub unitary_from_edge: Vec<DecayRow>,
    pub fit_unitary_edge: Option<ExpFit>,
    pub trace_norm: f64,
    pub hilbert_schmidt_norm: f64,
    /// `‖(U_E Π̂₁ U_E* − Π̂₁) − [U_E, Π̂₁] U_E*‖`.
    pub commutator_identity_residual: f64,
}

fn fit_decay(rows: &[DecayRow]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_norm > 1e-300)
        .map(|r| (r.distance, r.max_norm.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(ExpFit {
        amplitude: (my - slope * mx).exp(),
        decay_length: if slope < 0.0 { -1.0 / slope } else { f64::INFINITY },
    })
}

fn bucket(values: impl Iterator<Item = (f64, f64)>) -> Vec<DecayRow> {
    let mut rows: Vec<DecayRow> = Vec::new();
    for (d, v) in values {
        match rows.iter_mut().find(|r| (r.distance - d).abs() < 1e-9) {
            Some(r) => r.max_norm = r.max_norm.max(v),
            None => rows.push(DecayRow { distance: d, max_norm: v }),
        }
    }
    rows.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap());
    rows
}

fn site_row_norms(m: &CMat, geom: &LatticeGeometry) -> Vec<f64> {
    let n = geom.orbitals;
    (0..geom.sites())
        .map(|s| {
            m.slice(ndarray::s![s * n..(s + 1) * n, ..])
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

pub fn commutator_decay_report(
    u: &CMat,
    p: &ProjectionOperator,
    geom: &LatticeGeometry,
    cut: usize,
) -> Result<DecayReport> {
    let comm = crate::operator::commutator(u, p.matrix());
    let a = edge_difference(u, p);
    let via_comm = linalg::mm_nh(&comm.view(), &u.view());
    let commutator_identity_residual = distance(&a.view(), &via_comm.view());
    let rows = site_row_norms(&comm, geom);
    let cuts = [cut as f64 - 0.5, -0.5];
    let d_cut = |x1: usize| {
        cuts.iter()
            .map(|&cpos| {
                let d = x1 as f64 - cpos;
                let l = geom.lx as f64;
                (d - l * (d / l).round()).abs()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let d_edge = |x2: usize| x2.min(geom.ly - 1 - x2) as f64;
    let from_cut = bucket((0..geom.sites()).map(|s| (d_cut(geom.position(s).0), rows[s])));
    let from_edge = bucket((0..geom.sites()).map(|s| (d_edge(geom.position(s).1), rows[s])));
    let mut u1 = u.clone();
    for i in 0..u1.nrows() {
        u1[[i, i]] -= ONE;
    }
    let urows = site_row_norms(&u1, geom);
    let unitary_from_edge = bucket((0..geom.sites()).map(|s| (d_edge(geom.position(s).1), urows[s])));
    Ok(DecayReport {
        fit_cut: fit_decay(&from_cut),
        fit_edge: fit_decay(&from_edge),
        fit_unitary_edge: fit_decay(&unitary_from_edge),
        from_cut,
        from_edge,
        unitary_from_edge,
        trace_norm: schatten_norm(&comm.view(), 1.0)?,
        hilbert_schmidt_norm: crate::operator::fro_norm(&comm.view()),
        commutator_identity_residual,
    })
}

/// Gap interval and cylinder choices for the edge index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    /// Explicit `Δ = (a, b)`; otherwise `μ ± fraction · (bulk gap half-width)`.
    pub delta: Option<(f64, f64)>,
    pub delta_fraction: f64,
    /// Cut column; `None` means half the circumference.
    pub cut: Option<usize>,
    /// Circumference of the edge cylinder as a multiple of the model's `Lx`.
    pub circumference_factor: usize,
    /// Height of the edge cylinder as a multiple of the model's `Ly`.
    pub height_factor: usize,
    /// Window radius around the corner; see [`EdgeConfig::radius_for`].
    pub filter_radius: Option<f64>,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            delta: None,
            delta_fraction: 0.9,
            cut: None,
            circumference_factor: 3,
            height_factor: 1,
            filter_radius: None,
        }
    }
}

impl EdgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_fraction > 0.0 && self.delta_fraction <= 1.0) {
            return Err(Error::InvalidArgument("delta_fraction must lie in (0, 1]".into()));
        }
        if let Some((a, b)) = self.delta {
            make_gap_function(a, b)?;
        }
        if self.circumference_factor == 0 || self.height_factor == 0 {
            return Err(Error::InvalidArgument("cylinder factors must be positive".into()));
        }
        if let Some(r) = self.filter_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("edge filter_radius must be positive".into()));
            }
        }
        Ok(())
    }

    /// `Δ` around `mu` inside the bulk gap of the torus with the same model.
    pub fn resolve_delta(&self, spec: &ModelSpec, mu: f64) -> Result<GapFunction> {
        if let Some((a, b)) = self.delta {
            return make_gap_function(a, b);
        }
        let h = crate::lattice::build_bulk_hamiltonian(&spec.as_torus())?;
        let w = h.eigenvalues()?;
        let gap = gap_from_eigenvalues(w.as_slice().unwrap(), mu).ok_or(Error::NoGap { mu, tol: 1e-9 })?;
        let half = gap.half_width_around(mu) * self.delta_fraction;
        make_gap_function(mu - half, mu + half)
    }

    /// The model on the edge cylinder: periodic `x₁` of length
    /// `circumference_factor · Lx`, open `x₂` of length `height_factor · Ly`.
    pub fn cylinder(&self, spec: &ModelSpec) -> ModelSpec {
        let mut c = spec.as_cylinder();
        c.lx = spec.lx * self.circumference_factor;
        c.ly = spec.ly * self.height_factor;
        c
    }

    /// Default: 0.6 of the distance from the kept corner to the nearest
    /// other one (across the strip or along the edge to the second cut).
    pub fn radius_for(&self, geom: &LatticeGeometry) -> f64 {
        self.filter_radius
            .unwrap_or_else(|| 0.6 * (geom.lx as f64 / 2.0).min(geom.ly as f64))
    }
}

/// Edge index report plus the residuals that justify it.
#[derive(Debug, Clone, Serialize)]
pub struct EdgeIndex {
    #[serde(flatten)]
    pub report: IndexReport,
    pub delta: (f64, f64),
    pub cut: usize,
    pub circumference: usize,
    /// Eigenvalues of `Ĥ` inside `Δ`.
    pub gap_states: usize,
    /// `‖Ĥ V − V Λ‖` for the eigenpairs inside `Δ`.
    pub gap_eigen_residual: f64,
    /// `‖τ U_E τ* − U_E*‖`.
    pub unitary_reversal_residual: f64,
    /// `‖(U_E − 1)(1 − P_Δ)‖`.
    pub off_gap_residual: f64,
    /// Largest `|λ + λ'|` over paired eigenvalues of `A_E` away from `{−1, 0, 1}`.
    pub pairing_residual: f64,
    pub fredholm: FredholmReport,
}

/// Everything the edge index needs.
#[derive(Debug, Clone)]
pub struct EdgeSetup {
    pub geometry: LatticeGeometry,
    pub tau: AntiUnitary,
    pub gap_function: GapFunction,
    pub gap_unitary: GapUnitary,
    pub gap_eigen_residual: f64,
    pub quadrant_mask: Vec<bool>,
    pub cut: usize,
    /// Nonzero spectrum of `A_E`.
    pub a_spectrum: SpectralDecomposition,
}

impl EdgeSetup {
    pub fn unitary(&self) -> UnitaryOperator {
        self.gap_unitary.dense()
    }

    pub fn quadrant(&self) -> ProjectionOperator {
        ProjectionOperator::from_mask(&self.quadrant_mask)
    }
}

/// Edge cylinder for `spec` (see [`EdgeConfig::cylinder`]), `Δ` from the
/// torus of `spec` itself.
pub fn edge_setup(spec: &ModelSpec, mu: f64, ecfg: &EdgeConfig) -> Result<EdgeSetup> {
    ecfg.validate()?;
    let gf = ecfg.resolve_delta(spec, mu)?;
    edge_setup_on(&ecfg.cylinder(spec), gf, ecfg.cut)
}

/// Edge setup on exactly the given cylinder and gap function.
pub fn edge_setup_on(cyl: &ModelSpec, gf: GapFunction, cut: Option<usize>) -> Result<EdgeSetup> {
    let geom = cyl.geometry()?;
    if geom.boundary_x != Boundary::Periodic || geom.boundary_y != Boundary::Open {
        return Err(Error::Geometry("edge index needs a cylinder (periodic x₁, open x₂)".into()));
    }
    let tau = build_time_reversal(&geom)?;
    let h = build_half_space_hamiltonian(cyl)?;
    let trs = verify_trs(h.matrix(), &tau)?;
    if !trs.pass {
        return Err(Error::Invariant {
            what: "time-reversal symmetry of Ĥ",
            residual: trs.residual,
            tol: 1e-10,
        });
    }
    let gap_unitary = GapUnitary::from_hamiltonian(&h, &gf)?;
    let gap_eigen_residual = gap_unitary.eigen_residual(h.matrix());
    let cut = cut.unwrap_or_else(|| default_cut(&geom));
    quadrant_projection(&geom, cut)?;
    let quadrant_mask: Vec<bool> = (0..geom.dim())
        .map(|i| geom.position(i / geom.orbitals).0 >= cut)
        .collect();
    let a_spectrum = edge_difference_spectrum(&gap_unitary, &quadrant_mask)?;
    Ok(EdgeSetup {
        geometry: geom,
        tau,
        gap_function: gf,
        gap_unitary,
        gap_eigen_residual,
        quadrant_mask,
        cut,
        a_spectrum,
    })
}

pub fn edge_index(spec: &ModelSpec, mu: f64, cfg: &CountingConfig, ecfg: &EdgeConfig) -> Result<EdgeIndex> {
    cfg.validate()?;
    let s = edge_setup(spec, mu, ecfg)?;
    edge_index_from(&s, cfg, ecfg.radius_for(&s.geometry))
}

pub fn edge_index_from(s: &EdgeSetup, cfg: &CountingConfig, radius: f64) -> Result<EdgeIndex> {
    let corner = default_corner(s.cut);
    let window = DefectWindow::new(&s.geometry, corner, radius);
    let report = count_near(&s.a_spectrum, 1.0, &window, cfg)?;
    let u = s.unitary();
    let unitary_reversal_residual = reversal_residual(&s.tau, u.matrix())?;
    let fredholm = fredholm_low_rank(&s.gap_unitary, &s.quadrant_mask, Some(&window), cfg)?;
    Ok(EdgeIndex {
        report,
        delta: (s.gap_function.a, s.gap_function.b),
        cut: s.cut,
        circumference: s.geometry.lx,
        gap_states: s.gap_unitary.rank(),
        gap_eigen_residual: s.gap_eigen_residual,
        unitary_reversal_residual,
        off_gap_residual: s.gap_unitary.off_gap_residual(),
        pairing_residual: pairing_residual(s.a_spectrum.eigenvalues.as_slice().unwrap(), 1e-6),
        fredholm,
    })
}

/// Largest mismatch between the sorted spectrum and its negative, ignoring
/// eigenvalues within `exclude` of `{−1, 0, 1}`.
pub fn pairing_residual(values: &[f64], exclude: f64) -> f64 {
    let mid: Vec<f64> = values
        .iter()
        .copied()
        .filter(|&v| v.abs() > exclude && (v.abs() - 1.0).abs() > exclude)
        .collect();
    let mut neg: Vec<f64> = mid.iter().map(|v| -v).collect();
    neg.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if neg.len() != mid.len() {
        return f64::INFINITY;
    }
    mid.iter().zip(&neg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Sweep row of the Fredholm count.
#[derive(Debug, Clone, Serialize)]
pub struct FredholmReport {
    pub z2: Z2,
    pub plateau: Option<(f64, f64)>,
    /// `tol` is the A-side distance from +1; the singular threshold is
    /// `√(1 − (1 − tol)²)`.
    pub sweep: Vec<SweepRow>,
    /// Smallest singular values of `P U P` on `Ran P`, ascending.
    pub smallest_singular_values: Vec<f64>,
    /// Largest `‖(A − 1)Uψ‖ − σ_ψ` over kernel candidates `ψ`.
    pub correspondence_residual: f64,
    pub correspondence_holds: bool,
}

pub fn singular_threshold(tol: f64) -> f64 {
    (1.0 - (1.0 - tol).powi(2)).max(0.0).sqrt()
}

/// Kernel of `F = P U P + P^⊥` from the singular values of `P U P` on
/// `Ran P`, filtered like the index itself. Each candidate `ψ` must obey
/// `‖(A − 1)Uψ‖ ≤ σ_ψ + 1e−6`, the identity `(A − 1)Uψ = −PUψ` for
/// `ψ ∈ Ran P`.
pub fn fredholm_cross_check(
    u: &CMat,
    p: &ProjectionOperator,
    window: Option<&DefectWindow>,
    cfg: &CountingConfig,
) -> Result<FredholmReport> {
    if u.dim() != p.matrix().dim() {
        return Err(Error::Dimension("unitary and projection sizes differ".into()));
    }
    let k = range_basis(p)?;
    let uk = linalg::mm(&u.view(), &k.view());
    let compressed = linalg::mm_hn(&k.view(), &uk.view());
    let (sv_asc, right) = ascending_svd(&compressed)?;
    let psi_all = linalg::mm(&k.view(), &right.view());
    let pm = p.matrix();
    fredholm_finish(
        &sv_asc,
        &psi_all,
        |x| linalg::mm(&u.view(), &x.view()),
        |x| linalg::mm(&pm.view(), &x.view()),
        window,
        cfg,
    )
}

/// [`fredholm_cross_check`] for a [`GapUnitary`] and a diagonal projection.
/// With `B = V` restricted to `Ran P`, the compression `1 + B D B†` is the
/// identity off `span B`, so only that block is decomposed.
pub fn fredholm_low_rank(
    u: &GapUnitary,
    mask: &[bool],
    window: Option<&DefectWindow>,
    cfg: &CountingConfig,
) -> Result<FredholmReport> {
    if mask.len() != u.dim() {
        return Err(Error::Dimension("mask and unitary sizes differ".into()));
    }
    let sel: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let b = u.vectors.select(Axis(0), &sel);
    let qb = orthonormalize(&b, 1e-10);
    let qbb = linalg::mm_hn(&qb.view(), &b.view());
    let mut scaled = qbb.clone();
    for (mut col, d) in scaled.axis_iter_mut(Axis(1)).zip(&u.shifts) {
        col.mapv_inplace(|z| z * d);
    }
    let mut block = linalg::mm_nh(&scaled.view(), &qbb.view());
    for i in 0..block.nrows() {
        block[[i, i]] += ONE;
    }
    let (sv_asc, right) = ascending_svd(&block)?;
    let local = linalg::mm(&qb.view(), &right.view());
    let mut psi_all = Array2::zeros((u.dim(), local.ncols()));
    for (r, &i) in sel.iter().enumerate() {
        psi_all.row_mut(i).assign(&local.row(r));
    }
    fredholm_finish(&sv_asc, &psi_all, |x| u.apply(x), |x| mask_rows(x, mask), window, cfg)
}

/// Singular values ascending with the matching right singular vectors as
/// columns.
fn ascending_svd(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (sv, vecs) = linalg::svd(&m.view(), true)?;
    let (_, vh) = vecs.expect("vectors requested");
    let order: Vec<usize> = (0..sv.len()).rev().collect();
    let sv_asc = order.iter().map(|&i| sv[i]).collect();
    let right = vh.select(Axis(0), &order).t().mapv(|z| z.conj());
    Ok((sv_asc, right))
}

fn fredholm_finish(
    sv_asc: &[f64],
    psi_all: &CMat,
    apply_u: impl Fn(&CMat) -> CMat,
    apply_p: impl Fn(&CMat) -> CMat,
    window: Option<&DefectWindow>,
    cfg: &CountingConfig,
) -> Result<FredholmReport> {
    let r = sv_asc.len();
    let mut sweep = Vec::with_capacity(cfg.tol_sweep.len());
    for &tol in &cfg.tol_sweep {
        let thr = singular_threshold(tol);
        let idx: Vec<usize> = (0..r).filter(|&i| sv_asc[i] < thr).collect();
        let cluster = idx.len();
        let row = match window {
            Some(w) => {
                let psi = psi_all.select(Axis(1), &idx);
                let weights = w.localized_weights(&psi.view())?;
                SweepRow::classify(tol, cluster, &weights, cfg.localization_threshold)
            }
            None => SweepRow::classify(tol, cluster, &vec![1.0; cluster], cfg.localization_threshold),
        };
        sweep.push(row);
    }
    let (z2, plat) = plateau(&sweep, cfg.plateau_points);
    let loosest = singular_threshold(cfg.tol_sweep.iter().cloned().fold(0.0, f64::max));
    let cand: Vec<usize> = (0..r).filter(|&i| sv_asc[i] < loosest).collect();
    let mut worst = 0.0f64;
    if !cand.is_empty() {
        let psi = psi_all.select(Axis(1), &cand);
        let upsi = apply_u(&psi);
        // (A − 1)Uψ = U P ψ − P U ψ − U ψ
        let v = apply_u(&apply_p(&psi)) - apply_p(&upsi) - &upsi;
        for (j, &i) in cand.iter().enumerate() {
            let nrm = v.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(nrm - sv_asc[i]);
        }
    }
    Ok(FredholmReport {
        z2,
        plateau: plat,
        sweep,
        smallest_singular_values: sv_asc.iter().copied().take(8).collect(),
        correspondence_residual: worst,
        correspondence_holds: worst <= 1e-6,
    })
}

/// One row of the bulk-edge comparison.
#[derive(Debug, Clone, Serialize)]
pub struct BulkEdgeRow {
    pub m: f64,
    pub lambda_r: f64,
    pub w: f64,
    pub seed: u64,
    pub z2_bulk: Z2,
    pub z2_edge: Z2,
    pub z2_fredholm: Z2,
    /// `agree`, `disagree`, or `inconclusive`.
    pub status: String,
    pub note: String,
}

impl BulkEdgeRow {
    fn inconclusive(spec: &ModelSpec, note: String) -> Self {
        Self {
            m: spec.m,
            lambda_r: spec.lambda_r,
            w: spec.w,
            seed: spec.seed,
            z2_bulk: Z2::Undetermined,
            z2_edge: Z2::Undetermined,
            z2_fredholm: Z2::Undetermined,
            status: "inconclusive".into(),
            note,
        }
    }
}

/// Bulk index on the torus and edge index on the cylinder of the same
/// model. A closed gap or missing plateau makes the row inconclusive.
pub fn bulk_edge_check(spec: &ModelSpec, mu: f64, cfg: &CountingConfig, ecfg: &EdgeConfig) -> Result<BulkEdgeRow> {
    cfg.validate()?;
    ecfg.validate()?;
    let torus = spec.as_torus();
    let bulk = match bulk_setup(&torus, mu, None) {
        Ok(s) => bulk_index_from(&s, cfg)?,
        Err(Error::NoGap { .. }) => return Ok(BulkEdgeRow::inconclusive(spec, "no bulk gap".into())),
        Err(e) => return Err(e),
    };
    let edge = match edge_setup(spec, mu, ecfg) {
        Ok(s) => edge_index_from(&s, cfg, ecfg.radius_for(&s.geometry))?,
        Err(Error::NoGap { .. }) => return Ok(BulkEdgeRow::inconclusive(spec, "no bulk gap".into())),
        Err(e) => return Err(e),
    };
    let (zb, ze) = (bulk.report.z2, edge.report.z2);
    let (status, note) = if !zb.is_determined() || !ze.is_determined() {
        ("inconclusive", "no parity plateau".to_string())
    } else if zb == ze {
        ("agree", String::new())
    } else {
        ("disagree", String::new())
    };
    Ok(BulkEdgeRow {
        m: spec.m,
        lambda_r: spec.lambda_r,
        w: spec.w,
        seed: spec.seed,
        z2_bulk: zb,
        z2_edge: ze,
        z2_fredholm: edge.fredholm.z2,
        status: status.into(),
        note,
    })
}
