//! Spin-doubled Chern insulator on finite tori and cylinders.
//!
//! Site-local ordering is `2·orbital + spin`, so each consecutive pair of
//! indices is one Kramers doublet and the on-site time reversal is
//! `⊕ [[0, −1], [1, 0]] K`. The spin-up block carries
//! `h(k) = sin k₁ σ₁ + sin k₂ σ₂ + (m + cos k₁ + cos k₂) σ₃` in the orbital
//! index, the spin-down block its complex conjugate.

use ndarray::{s, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    antiunitary::covariance_residual, c, fro_norm, linalg, AntiUnitary, CMat, HermitianOperator, C64,
    ONE, ZERO,
};

/// Orbitals per site of the doubled model: two orbitals times two spins.
pub const ORBITALS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeGeometry {
    pub lx: usize,
    pub ly: usize,
    pub boundary_x: Boundary,
    pub boundary_y: Boundary,
    pub orbitals: usize,
}

impl LatticeGeometry {
    pub fn new(lx: usize, ly: usize, boundary_x: Boundary, boundary_y: Boundary, orbitals: usize) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::Geometry(format!("empty lattice {lx}x{ly}")));
        }
        if orbitals == 0 || orbitals % 2 == 1 {
            return Err(Error::Geometry(format!(
                "{orbitals} orbitals per site; odd time reversal needs an even fiber"
            )));
        }
        Ok(Self {
            lx,
            ly,
            boundary_x,
            boundary_y,
            orbitals,
        })
    }

    pub fn torus(lx: usize, ly: usize) -> Self {
        Self::new(lx, ly, Boundary::Periodic, Boundary::Periodic, ORBITALS).unwrap()
    }

    pub fn cylinder(lx: usize, ly: usize) -> Self {
        Self::new(lx, ly, Boundary::Periodic, Boundary::Open, ORBITALS).unwrap()
    }

    pub fn sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn dim(&self) -> usize {
        self.sites() * self.orbitals
    }

    /// Site index `x₁ + Lx·x₂`.
    pub fn site(&self, x1: usize, x2: usize) -> usize {
        debug_assert!(x1 < self.lx && x2 < self.ly);
        x1 + self.lx * x2
    }

    pub fn position(&self, site: usize) -> (usize, usize) {
        (site % self.lx, site / self.lx)
    }

    pub fn flat(&self, x1: usize, x2: usize, orbital: usize) -> usize {
        self.site(x1, x2) * self.orbitals + orbital
    }

    /// `(site, orbital)` of a flat index.
    pub fn unflatten(&self, index: usize) -> (usize, usize) {
        (index / self.orbitals, index % self.orbitals)
    }

    /// Displacement `y − x` along one axis, minimal image if periodic.
    pub fn displacement(&self, from: usize, to: usize, len: usize, boundary: Boundary) -> f64 {
        let d = to as f64 - from as f64;
        match boundary {
            Boundary::Open => d,
            Boundary::Periodic => {
                let l = len as f64;
                d - l * (d / l).round()
            }
        }
    }

    /// Euclidean distance between sites, minimal image along periodic axes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.position(a);
        let (bx, by) = self.position(b);
        let dx = self.displacement(ax, bx, self.lx, self.boundary_x);
        let dy = self.displacement(ay, by, self.ly, self.boundary_y);
        dx.hypot(dy)
    }

    /// Diagonal of the position operator `X₁` (or `X₂` for `axis = 1`).
    pub fn position_diagonal(&self, axis: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (x1, x2) = self.position(i / self.orbitals);
                if axis == 0 {
                    x1 as f64
                } else {
                    x2 as f64
                }
            })
            .collect()
    }
}

fn default_seed() -> u64 {
    0
}

/// Model parameters and truncation, as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub m: f64,
    #[serde(default)]
    pub lambda_r: f64,
    #[serde(default)]
    pub w: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(rename = "Lx")]
    pub lx: usize,
    #[serde(rename = "Ly")]
    pub ly: usize,
    pub boundary_x: Boundary,
    pub boundary_y: Boundary,
}

impl ModelSpec {
    pub fn torus(m: f64, l: usize) -> Self {
        Self {
            m,
            lambda_r: 0.0,
            w: 0.0,
            seed: 0,
            lx: l,
            ly: l,
            boundary_x: Boundary::Periodic,
            boundary_y: Boundary::Periodic,
        }
    }

    pub fn cylinder(m: f64, lx: usize, ly: usize) -> Self {
        Self {
            boundary_y: Boundary::Open,
            ly,
            ..Self::torus(m, lx)
        }
    }

    pub fn with_disorder(mut self, lambda_r: f64, w: f64, seed: u64) -> Self {
        self.lambda_r = lambda_r;
        self.w = w;
        self.seed = seed;
        self
    }

    /// The same model on the other truncation.
    pub fn as_cylinder(&self) -> Self {
        Self {
            boundary_x: Boundary::Periodic,
            boundary_y: Boundary::Open,
            ..self.clone()
        }
    }

    pub fn as_torus(&self) -> Self {
        Self {
            boundary_x: Boundary::Periodic,
            boundary_y: Boundary::Periodic,
            ..self.clone()
        }
    }

    pub fn geometry(&self) -> Result<LatticeGeometry> {
        LatticeGeometry::new(self.lx, self.ly, self.boundary_x, self.boundary_y, ORBITALS)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        if !(self.w >= 0.0) || !self.w.is_finite() {
            return Err(Error::InvalidArgument(format!("disorder strength w = {} must be ≥ 0", self.w)));
        }
        if !self.m.is_finite() || !self.lambda_r.is_finite() {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Translation-invariant site blocks: on-site term and hoppings
/// `H[x, x+e₁]`, `H[x, x+e₂]` (each `ORBITALS × ORBITALS`).
#[derive(Debug, Clone)]
pub struct HoppingBlocks {
    pub onsite: CMat,
    pub hop_x: CMat,
    pub hop_y: CMat,
}

fn pauli(k: usize) -> CMat {
    match k {
        0 => ndarray::array![[ONE, ZERO], [ZERO, ONE]],
        1 => ndarray::array![[ZERO, ONE], [ONE, ZERO]],
        2 => ndarray::array![[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]],
        3 => ndarray::array![[ONE, ZERO], [ZERO, -ONE]],
        _ => unreachable!(),
    }
}

/// Places an orbital-space 2×2 matrix into one spin sector of the fiber.
fn in_spin(orb: &CMat, spin: usize, out: &mut CMat) {
    for a in 0..2 {
        for b in 0..2 {
            out[[2 * a + spin, 2 * b + spin]] += orb[[a, b]];
        }
    }
}

/// Spin-space 2×2 matrix times the orbital identity.
fn spin_only(sp: &CMat) -> CMat {
    let mut out = Array2::zeros((ORBITALS, ORBITALS));
    for o in 0..2 {
        for s1 in 0..2 {
            for s2 in 0..2 {
                out[[2 * o + s1, 2 * o + s2]] = sp[[s1, s2]];
            }
        }
    }
    out
}

pub fn hopping_blocks(m: f64, lambda_r: f64) -> HoppingBlocks {
    let half = c(0.5, 0.0);
    let mi = c(0.0, -0.5);
    let up_x = pauli(3).mapv(|z| z * half) + pauli(1).mapv(|z| z * mi);
    let up_y = pauli(3).mapv(|z| z * half) + pauli(2).mapv(|z| z * mi);
    let up_on = pauli(3).mapv(|z| z * m);
    let mut onsite = Array2::zeros((ORBITALS, ORBITALS));
    let mut hop_x = Array2::zeros((ORBITALS, ORBITALS));
    let mut hop_y = Array2::zeros((ORBITALS, ORBITALS));
    in_spin(&up_on, 0, &mut onsite);
    in_spin(&up_on, 1, &mut onsite);
    in_spin(&up_x, 0, &mut hop_x);
    in_spin(&up_x.mapv(|z| z.conj()), 1, &mut hop_x);
    in_spin(&up_y, 0, &mut hop_y);
    in_spin(&up_y.mapv(|z| z.conj()), 1, &mut hop_y);
    if lambda_r != 0.0 {
        // i λ s_y along e₁, −i λ s_x along e₂; both commute with the on-site τ.
        hop_x += &spin_only(&pauli(2).mapv(|z| z * c(0.0, lambda_r)));
        hop_y += &spin_only(&pauli(1).mapv(|z| z * c(0.0, -lambda_r)));
    }
    HoppingBlocks { onsite, hop_x, hop_y }
}

/// On-site potentials `V_x ∈ [−w, w]`, drawn from ChaCha20 seeded with
/// `seed`, one draw per site in flat site order.
pub fn disorder_potential(spec: &ModelSpec, sites: usize) -> Vec<f64> {
    if spec.w == 0.0 {
        return vec![0.0; sites];
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let dist = Uniform::new_inclusive(-spec.w, spec.w);
    (0..sites).map(|_| dist.sample(&mut rng)).collect()
}

fn add_block(h: &mut CMat, i: usize, j: usize, block: &CMat) {
    let n = block.nrows();
    let mut view = h.slice_mut(s![i * n..(i + 1) * n, j * n..(j + 1) * n]);
    view += block;
}

fn assemble(spec: &ModelSpec) -> Result<CMat> {
    spec.validate()?;
    let g = spec.geometry()?;
    let blocks = hopping_blocks(spec.m, spec.lambda_r);
    let pot = disorder_potential(spec, g.sites());
    let n = g.dim();
    let mut h = Array2::<C64>::zeros((n, n));
    let hx_dag = blocks.hop_x.t().mapv(|z| z.conj());
    let hy_dag = blocks.hop_y.t().mapv(|z| z.conj());
    for x2 in 0..g.ly {
        for x1 in 0..g.lx {
            let here = g.site(x1, x2);
            let mut onsite = blocks.onsite.clone();
            for o in 0..ORBITALS {
                onsite[[o, o]] += pot[here];
            }
            add_block(&mut h, here, here, &onsite);
            let next_x = if x1 + 1 < g.lx {
                Some(x1 + 1)
            } else if g.boundary_x == Boundary::Periodic {
                Some(0)
            } else {
                None
            };
            if let Some(nx) = next_x {
                let there = g.site(nx, x2);
                add_block(&mut h, here, there, &blocks.hop_x);
                add_block(&mut h, there, here, &hx_dag);
            }
            let next_y = if x2 + 1 < g.ly {
                Some(x2 + 1)
            } else if g.boundary_y == Boundary::Periodic {
                Some(0)
            } else {
                None
            };
            if let Some(ny) = next_y {
                let there = g.site(x1, ny);
                add_block(&mut h, here, there, &blocks.hop_y);
                add_block(&mut h, there, here, &hy_dag);
            }
        }
    }
    Ok(h)
}

/// Torus Hamiltonian; both directions must be periodic.
pub fn build_bulk_hamiltonian(spec: &ModelSpec) -> Result<HermitianOperator> {
    if spec.boundary_x != Boundary::Periodic || spec.boundary_y != Boundary::Periodic {
        return Err(Error::Geometry("bulk Hamiltonian needs a torus".into()));
    }
    HermitianOperator::new(assemble(spec)?, "H")
}

/// Cylinder Hamiltonian, periodic in x₁ and open in x₂: the torus model
/// with every hopping across the x₂ seam deleted.
pub fn build_half_space_hamiltonian(spec: &ModelSpec) -> Result<HermitianOperator> {
    if spec.boundary_x != Boundary::Periodic || spec.boundary_y != Boundary::Open {
        return Err(Error::Geometry("half-space Hamiltonian needs periodic x₁ and open x₂".into()));
    }
    HermitianOperator::new(assemble(spec)?, "Ĥ")
}

/// `⊕_sites ⊕_pairs [[0, −1], [1, 0]] K`.
pub fn build_time_reversal(g: &LatticeGeometry) -> Result<AntiUnitary> {
    if g.orbitals % 2 == 1 {
        return Err(Error::Geometry("odd fiber dimension".into()));
    }
    Ok(AntiUnitary::standard_odd(g.dim() / 2))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrsCheck {
    pub pass: bool,
    pub residual: f64,
}

/// `‖τHτ* − H‖ ≤ 1e−10·‖H‖`.
pub fn verify_trs(h: &CMat, tau: &AntiUnitary) -> Result<TrsCheck> {
    let residual = covariance_residual(tau, h, h)?;
    let scale = fro_norm(&h.view());
    Ok(TrsCheck {
        pass: residual <= 1e-10 * scale,
        residual,
    })
}

/// Fitted bound `‖P_x H P_y‖ ≤ C e^{−‖x−y‖/ξ}` over sampled site pairs.
#[derive(Debug, Clone, Serialize)]
pub struct LocalityCertificate {
    pub c: f64,
    /// Zero when the sampled blocks vanish exactly beyond `range`.
    pub xi: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// Largest distance with a nonzero block, when all farther samples are exactly zero.
    pub range: Option<f64>,
}

/// All `(a, b)` with `a` in `sources` and `b` any site.
pub fn pairs_from(g: &LatticeGeometry, sources: &[usize]) -> Vec<(usize, usize)> {
    sources
        .iter()
        .flat_map(|&a| (0..g.sites()).map(move |b| (a, b)))
        .collect()
}

pub fn verify_locality(h: &CMat, g: &LatticeGeometry, pairs: &[(usize, usize)]) -> Result<LocalityCertificate> {
    if h.nrows() != g.dim() {
        return Err(Error::Dimension("Hamiltonian does not match the geometry".into()));
    }
    let n = g.orbitals;
    let mut samples = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let block = h.slice(s![a * n..(a + 1) * n, b * n..(b + 1) * n]);
        let norm = if block.iter().all(|z| *z == ZERO) {
            0.0
        } else {
            linalg::svd(&block, false)?.0[0]
        };
        samples.push((g.distance(a, b), norm));
    }
    let nonzero: Vec<(f64, f64)> = samples.iter().copied().filter(|&(_, v)| v > 0.0).collect();
    if nonzero.is_empty() {
        return Ok(LocalityCertificate {
            c: 0.0,
            xi: 0.0,
            residual: 0.0,
            range: Some(0.0),
        });
    }
    let reach = nonzero.iter().map(|&(d, _)| d).fold(0.0, f64::max);
    let zero_beyond = samples.iter().any(|&(d, v)| v == 0.0 && d > reach);
    if zero_beyond {
        return Ok(LocalityCertificate {
            c: nonzero.iter().map(|&(_, v)| v).fold(0.0, f64::max),
            xi: 0.0,
            residual: 0.0,
            range: Some(reach),
        });
    }
    // least squares for log v = log C − d/ξ
    let k = nonzero.len() as f64;
    let (sd, sl) = nonzero.iter().fold((0.0, 0.0), |(a, b), &(d, v)| (a + d, b + v.ln()));
    let (md, ml) = (sd / k, sl / k);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(d, v) in &nonzero {
        sxx += (d - md) * (d - md);
        sxy += (d - md) * (v.ln() - ml);
    }
    if sxx == 0.0 || sxy >= 0.0 {
        return Ok(LocalityCertificate {
            c: nonzero.iter().map(|&(_, v)| v).fold(0.0, f64::max),
            xi: f64::INFINITY,
            residual: 0.0,
            range: None,
        });
    }
    let slope = sxy / sxx;
    let xi = -1.0 / slope;
    let intercept = ml - slope * md;
    let residual = (nonzero
        .iter()
        .map(|&(d, v)| (v.ln() - intercept - slope * d).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    // raise C until the bound covers every sample
    let c = nonzero
        .iter()
        .map(|&(d, v)| v * (d / xi).exp())
        .fold(intercept.exp(), f64::max);
    Ok(LocalityCertificate {
        c,
        xi,
        residual,
        range: None,
    })
}

/// Open spectral gap around `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub lower: f64,
    pub upper: f64,
}

impl Gap {
    pub fn half_width_around(&self, mu: f64) -> f64 {
        (mu - self.lower).min(self.upper - mu)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Largest open interval around `mu` free of eigenvalues; `None` if `mu` is
/// within 1e−9 of one. Missing neighbours give infinite endpoints.
pub fn gap_from_eigenvalues(values: &[f64], mu: f64) -> Option<Gap> {
    if values.iter().any(|&e| (e - mu).abs() <= 1e-9) {
        return None;
    }
    let lower = values.iter().copied().filter(|&e| e < mu).fold(f64::NEG_INFINITY, f64::max);
    let upper = values.iter().copied().filter(|&e| e > mu).fold(f64::INFINITY, f64::min);
    Some(Gap { lower, upper })
}

pub fn spectral_gap(h: &HermitianOperator, mu: f64) -> Result<Option<Gap>> {
    let w = h.eigenvalues()?;
    Ok(gap_from_eigenvalues(w.as_slice().unwrap(), mu))
}

/// Bloch Hamiltonian of the upper spin block at momentum `(k₁, k₂)`.
pub fn bloch_upper(m: f64, k1: f64, k2: f64) -> [[C64; 2]; 2] {
    let dx = k1.sin();
    let dy = k2.sin();
    let dz = m + k1.cos() + k2.cos();
    [[c(dz, 0.0), c(dx, -dy)], [c(dx, dy), c(-dz, 0.0)]]
}
