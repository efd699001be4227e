//! Time-reversal symmetric Wold decomposition of a unitary/projection pair
//! `(U, P, τ)`: defect operators, the decoupler `W = VU`, and the shift
//! chains left over when decoupling is obstructed.
//!
//! Conventions: `Q = UPU*`, `A = Q − P`, `B = 1 − P − Q`, `τ̃ = Uτ`,
//! `E = E₊₁ ⊕ E₋₁` the `±1` eigenspaces of `A`, `E⊥` its complement.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::antiunitary::{covariance_residual, reversal_residual};
use crate::operator::linalg::{self, eigvals_general};
use crate::operator::{
    c, commutator, dagger, distance, distance_to_identity, eigen_cluster, fro_norm, functional_calculus,
    group_clusters, identity, io, kramers_basis, mm, orthonormalize, schatten_norm, subspace_leakage,
    AntiUnitary, CMat, HermitianOperator, ProjectionOperator, SpectralDecomposition, Tolerances,
    UnitaryOperator, C64, ONE,
};

/// Symmetry constraints on the input pair.
pub const PAIR_TOL: f64 = 1e-9;
/// `A² + B² = 1`, `AB + BA = 0`; larger residuals mean corrupted input.
pub const DEFECT_TOL: f64 = 1e-8;
/// The three expressions for `X` and the intertwining `PX = XQ = PQ`.
pub const X_ALGEBRA_TOL: f64 = 1e-10;
pub const X_NORMAL_TOL: f64 = 1e-9;
pub const CIRCLE_TOL: f64 = 1e-7;
/// Subspace angles and restricted identities.
pub const SUBSPACE_TOL: f64 = 1e-8;
/// Contract of the decoupler and symmetry propagation to `W` and `V`.
pub const CONTRACT_TOL: f64 = 1e-8;
pub const CHAIN_TOL: f64 = 1e-8;
/// Defect dimension counted "exactly", for the parity theorem.
pub const EXACT_KERNEL_TOL: f64 = 1e-10;
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-7;

fn check(residual: f64, tol: f64, what: &'static str) -> Result<f64> {
    if residual <= tol {
        Ok(residual)
    } else {
        Err(Error::Invariant { what, residual, tol })
    }
}

fn loose() -> Tolerances {
    Tolerances {
        unitary: 1e-8,
        parity: 1e-8,
        ..Tolerances::default()
    }
}

fn vec_norm(v: &ArrayView1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn rank_one(v: &ArrayView1<C64>) -> CMat {
    Array2::from_shape_fn((v.len(), v.len()), |(i, j)| v[i] * v[j].conj())
}

/// `‖|a⟩⟨a| − |b⟩⟨b|‖` evaluated entrywise, without the square root of a
/// small difference that `2 − 2|⟨a, b⟩|²` would need.
fn rank_one_distance(a: &ArrayView1<C64>, b: &ArrayView1<C64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            sum += (a[i] * a[j].conj() - b[i] * b[j].conj()).norm_sqr();
        }
    }
    sum.sqrt()
}

fn embed(basis: &CMat, block: &CMat) -> CMat {
    let left = linalg::mm(&basis.view(), &block.view());
    linalg::mm_nh(&left.view(), &basis.view())
}

fn compress(basis: &CMat, m: &CMat) -> CMat {
    linalg::mm_hn(&basis.view(), &linalg::mm(&m.view(), &basis.view()).view())
}

fn hermitize(m: &CMat) -> CMat {
    (m + &dagger(&m.view())).mapv(|z| z * 0.5)
}

// ---------------------------------------------------------------------------
// Pairs

/// `(U, P, τ)` with `τ` odd, `τUτ* = U*` and `τPτ* = P`.
#[derive(Debug, Clone)]
pub struct SymmetricPair {
    u: UnitaryOperator,
    p: ProjectionOperator,
    tau: AntiUnitary,
}

impl SymmetricPair {
    pub fn new(u: UnitaryOperator, p: ProjectionOperator, tau: AntiUnitary) -> Result<Self> {
        let n = u.dim();
        if p.dim() != n || tau.dim() != n {
            return Err(Error::Dimension(format!(
                "U is {n}x{n}, P is {0}x{0}, τ acts on C^{1}",
                p.dim(),
                tau.dim()
            )));
        }
        if !tau.is_odd() {
            return Err(Error::InvalidArgument("τ must be odd (τ² = −1)".into()));
        }
        check(reversal_residual(&tau, u.matrix())?, PAIR_TOL, "τUτ* = U*")?;
        check(covariance_residual(&tau, p.matrix(), p.matrix())?, PAIR_TOL, "τPτ* = P")?;
        Ok(Self { u, p, tau })
    }

    /// Validates raw matrices; `tau` is the unitary part of τ.
    pub fn from_matrices(u: CMat, p: CMat, tau: CMat) -> Result<Self> {
        Self::new(UnitaryOperator::new(u)?, ProjectionOperator::new(p)?, AntiUnitary::new(tau)?)
    }

    pub fn u(&self) -> &UnitaryOperator {
        &self.u
    }

    pub fn p(&self) -> &ProjectionOperator {
        &self.p
    }

    pub fn tau(&self) -> &AntiUnitary {
        &self.tau
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// `Q = UPU*`, symmetrized against rounding.
    pub fn q(&self) -> CMat {
        hermitize(&crate::operator::conjugate(self.u.matrix(), self.p.matrix()))
    }

    /// `A = UPU* − P`.
    pub fn difference(&self) -> CMat {
        self.q() - self.p.matrix()
    }

    /// Pair file: labelled matrix blocks `U`, `P`, `tau`.
    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_file(
            path,
            &[("U", self.u.matrix()), ("P", self.p.matrix()), ("tau", self.tau.unitary_part())],
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let blocks = io::read_file(path)?;
        Self::from_matrices(
            io::take_block(&blocks, "U")?,
            io::take_block(&blocks, "P")?,
            io::take_block(&blocks, "tau")?,
        )
    }
}

// ---------------------------------------------------------------------------
// Defect operators

#[derive(Debug, Clone)]
pub struct DefectOperators {
    pub p: CMat,
    pub q: CMat,
    pub a: CMat,
    pub b: CMat,
    pub spectrum: SpectralDecomposition,
    /// `‖A² + B² − 1‖`
    pub square_residual: f64,
    /// `‖AB + BA‖`
    pub anticommutator_residual: f64,
}

impl DefectOperators {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.eigenvalues.as_slice().expect("contiguous eigenvalues")
    }

    /// Indices of eigenvalues within `tol` of `target`.
    pub fn cluster(&self, target: f64, tol: f64) -> Vec<usize> {
        eigen_cluster(self.eigenvalues(), target, tol)
    }
}

pub fn defect_operators(pair: &SymmetricPair) -> Result<DefectOperators> {
    let n = pair.dim();
    let p = pair.p().matrix().clone();
    let q = pair.q();
    let a = &q - &p;
    let b = identity(n) - &p - &q;
    let ab = mm(&a, &b);
    let ba = mm(&b, &a);
    let square_residual = distance_to_identity(&(mm(&a, &a) + mm(&b, &b)).view());
    let anticommutator_residual = fro_norm(&(ab + ba).view());
    check(square_residual, DEFECT_TOL, "A² + B² = 1")?;
    check(anticommutator_residual, DEFECT_TOL, "AB + BA = 0")?;
    let spectrum = HermitianOperator::with_tolerance(hermitize(&a), "A", 1e-10)?.spectral_decomposition()?;
    Ok(DefectOperators {
        p,
        q,
        a,
        b,
        spectrum,
        square_residual,
        anticommutator_residual,
    })
}

/// Number of eigenvalues of `A` within [`EXACT_KERNEL_TOL`] of `+1`. Even
/// for every symmetric pair on a finite space.
pub fn exact_defect_dimension(defects: &DefectOperators) -> usize {
    defects.cluster(1.0, EXACT_KERNEL_TOL).len()
}

// ---------------------------------------------------------------------------
// τ̃ and the symmetry lemmas

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TildeTauReport {
    /// `‖τ̃Pτ̃* − Q‖`
    pub p_to_q: f64,
    /// `‖τ̃Bτ̃* − B‖`, equivalently `‖Bτ̃ − τ̃B‖`
    pub b_invariance: f64,
    /// `‖τ̃Aτ̃* + A‖`
    pub a_reversal: f64,
}

#[derive(Debug, Clone)]
pub struct TildeTau {
    pub theta: AntiUnitary,
    pub report: TildeTauReport,
}

/// `τ̃ = Uτ`, odd because `τ̃² = Uτ Uτ = U U* τ² = −1`.
pub fn tilde_tau(pair: &SymmetricPair, defects: &DefectOperators) -> Result<TildeTau> {
    let theta = AntiUnitary::with_tolerances(mm(pair.u().matrix(), pair.tau().unitary_part()), &loose())?;
    if !theta.is_odd() {
        return Err(Error::Invariant {
            what: "τ̃² = −1",
            residual: 2.0,
            tol: 0.0,
        });
    }
    let p_to_q = check(covariance_residual(&theta, &defects.p, &defects.q)?, PAIR_TOL, "τ̃Pτ̃* = Q")?;
    let b_invariance = check(covariance_residual(&theta, &defects.b, &defects.b)?, PAIR_TOL, "τ̃Bτ̃* = B")?;
    let minus_a = defects.a.mapv(|z| -z);
    let a_reversal = check(covariance_residual(&theta, &defects.a, &minus_a)?, PAIR_TOL, "τ̃Aτ̃* = −A")?;
    Ok(TildeTau {
        theta,
        report: TildeTauReport {
            p_to_q,
            b_invariance,
            a_reversal,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterCheck {
    pub lambda: f64,
    pub dim: usize,
    pub partner_dim: usize,
    /// angle between `B·E_λ` and `E_{−λ}`
    pub b_leakage: f64,
    /// angle between `τ̃·E_λ` and `E_{−λ}`
    pub tilde_tau_leakage: f64,
    /// `‖B²|E_λ − (1 − λ²)‖`
    pub b_square_residual: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SymmetryReport {
    pub clusters: Vec<ClusterCheck>,
}

impl SymmetryReport {
    pub fn worst_leakage(&self) -> f64 {
        self.clusters
            .iter()
            .map(|c| c.b_leakage.max(c.tilde_tau_leakage))
            .fold(0.0, f64::max)
    }

    pub fn worst_square_residual(&self) -> f64 {
        self.clusters.iter().map(|c| c.b_square_residual).fold(0.0, f64::max)
    }
}

/// Eigenvalue clusters of `A`: runs separated by more than `cluster_tol`.
pub fn defect_clusters(defects: &DefectOperators, cluster_tol: f64) -> Vec<Vec<usize>> {
    group_clusters(defects.eigenvalues(), cluster_tol)
}

fn cluster_mean(values: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
}

fn is_mid(lambda: f64, cluster_tol: f64) -> bool {
    lambda.abs() >= cluster_tol && 1.0 - lambda.abs() >= cluster_tol
}

/// `B` and `τ̃` map `E_λ` onto `E_{−λ}`, `B² = 1 − λ²` on `E_λ`, and the
/// mid-spectrum clusters have even dimension.
pub fn spectral_symmetry_check(
    defects: &DefectOperators,
    tilde: &AntiUnitary,
    cluster_tol: f64,
) -> Result<SymmetryReport> {
    let values = defects.eigenvalues();
    let clusters = defect_clusters(defects, cluster_tol);
    let b2 = mm(&defects.b, &defects.b);
    let mut report = SymmetryReport::default();
    for idx in &clusters {
        let lambda = cluster_mean(values, idx);
        if !is_mid(lambda, cluster_tol) {
            continue;
        }
        let partner = clusters
            .iter()
            .filter(|other| (cluster_mean(values, other) + lambda).abs() <= cluster_tol)
            .min_by(|x, y| {
                let dx = (cluster_mean(values, x) + lambda).abs();
                let dy = (cluster_mean(values, y) + lambda).abs();
                dx.total_cmp(&dy)
            });
        let partner_dim = partner.map_or(0, |p| p.len());
        if partner_dim != idx.len() {
            let (plus, minus) = if lambda > 0.0 { (idx.len(), partner_dim) } else { (partner_dim, idx.len()) };
            return Err(Error::DefectMismatch { plus, minus });
        }
        if idx.len() % 2 == 1 {
            return Err(Error::OddDimension(idx.len()));
        }
        let k = defects.spectrum.columns(idx);
        let k_partner = defects.spectrum.columns(partner.expect("partner found"));
        let bk = orthonormalize(&linalg::mm(&defects.b.view(), &k.view()), 1e-10);
        let b_leakage = if bk.ncols() == idx.len() {
            subspace_leakage(&bk.view(), &k_partner.view())
        } else {
            f64::INFINITY
        };
        let tk = tilde.apply(&k.view());
        let tilde_tau_leakage = subspace_leakage(&tk.view(), &k_partner.view());
        let mut target = k.clone();
        for (j, mut col) in target.axis_iter_mut(Axis(1)).enumerate() {
            let l = values[idx[j]];
            col.mapv_inplace(|z| z * (1.0 - l * l));
        }
        let b_square_residual = distance(&linalg::mm(&b2.view(), &k.view()).view(), &target.view());
        check(b_leakage, SUBSPACE_TOL, "B·E_λ = E_{−λ}")?;
        check(tilde_tau_leakage, SUBSPACE_TOL, "τ̃·E_λ = E_{−λ}")?;
        check(b_square_residual, SUBSPACE_TOL, "B² = 1 − λ² on E_λ")?;
        report.clusters.push(ClusterCheck {
            lambda,
            dim: idx.len(),
            partner_dim,
            b_leakage,
            tilde_tau_leakage,
            b_square_residual,
        });
    }
    Ok(report)
}

/// `θ = (B*B)^{-1/2} B τ̃` restricted to `E_λ`, in the coordinates of the
/// eigenvector columns `cluster`. Odd, which forces `dim E_λ` even.
pub fn kramers_theta(defects: &DefectOperators, tilde: &AntiUnitary, cluster: &[usize]) -> Result<AntiUnitary> {
    if cluster.is_empty() {
        return Err(Error::InvalidArgument("empty eigenvalue cluster".into()));
    }
    let values = defects.eigenvalues();
    let lambda = cluster_mean(values, cluster);
    if !is_mid(lambda, 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "θ is defined only for λ ∉ {{−1, 0, 1}}, got λ = {lambda}"
        )));
    }
    let k = defects.spectrum.columns(cluster);
    let bt = linalg::mm(&defects.b.view(), &tilde.apply(&k.view()).view());
    let mut t = linalg::mm_hn(&k.view(), &bt.view());
    for (i, mut row) in t.axis_iter_mut(Axis(0)).enumerate() {
        let l = values[cluster[i]];
        let scale = 1.0 / (1.0 - l * l).sqrt();
        row.mapv_inplace(|z| z * scale);
    }
    let theta = AntiUnitary::with_tolerances(t, &loose())?;
    if !theta.is_odd() {
        return Err(Error::Invariant {
            what: "θ² = −1 on E_λ",
            residual: 2.0,
            tol: SUBSPACE_TOL,
        });
    }
    Ok(theta)
}

/// Kramers basis of every mid-spectrum cluster; fails if one is odd.
pub fn mid_spectrum_kramers(defects: &DefectOperators, tilde: &AntiUnitary, cluster_tol: f64) -> Result<usize> {
    let values = defects.eigenvalues();
    let mut checked = 0;
    for idx in defect_clusters(defects, cluster_tol) {
        if !is_mid(cluster_mean(values, &idx), cluster_tol) {
            continue;
        }
        let theta = kramers_theta(defects, tilde, &idx)?;
        kramers_basis(&theta, &identity(idx.len()).view())?;
        checked += 1;
    }
    Ok(checked)
}

// ---------------------------------------------------------------------------
// X and the off-defect decoupler

#[derive(Debug, Clone, Copy, Serialize)]
pub struct XReport {
    /// spread of `B(1 − 2Q)`, `(1 − 2P)B`, `1 − P − Q + 2PQ`
    pub expression_residual: f64,
    /// `‖PX − PQ‖ + ‖XQ − PQ‖`
    pub intertwining_residual: f64,
    /// largest of `XX* − X*X`, `XX* − B²`, `(X + X*)/2 − B²`
    pub normality_residual: f64,
    /// `max |(Im z)² + (Re z − 1/2)² − 1/4|` over the spectrum of `X`
    pub circle_residual: f64,
    /// `‖X|E‖`
    pub kernel_residual: f64,
}

/// `X = 1 − P − Q + 2PQ` with its algebraic identities verified; `defect`
/// holds an orthonormal basis of `E`.
pub fn build_x(defects: &DefectOperators, defect: &CMat) -> Result<(CMat, XReport)> {
    let n = defects.dim();
    let one = identity(n);
    let (p, q, b) = (&defects.p, &defects.q, &defects.b);
    let pq = mm(p, q);
    let x = &one - p - q + pq.mapv(|z| 2.0 * z);
    let x1 = mm(b, &(&one - q.mapv(|z| 2.0 * z)));
    let x2 = mm(&(&one - p.mapv(|z| 2.0 * z)), b);
    let expression_residual = distance(&x.view(), &x1.view()).max(distance(&x.view(), &x2.view()));
    let intertwining_residual =
        distance(&mm(p, &x).view(), &pq.view()) + distance(&mm(&x, q).view(), &pq.view());
    let xh = dagger(&x.view());
    let xxh = mm(&x, &xh);
    let xhx = mm(&xh, &x);
    let b2 = mm(b, b);
    let half = (&x + &xh).mapv(|z| 0.5 * z);
    let normality_residual = distance(&xxh.view(), &xhx.view())
        .max(distance(&xxh.view(), &b2.view()))
        .max(distance(&half.view(), &b2.view()));
    let circle_residual = eigvals_general(&x.view())?
        .iter()
        .map(|z| (z.im * z.im + (z.re - 0.5) * (z.re - 0.5) - 0.25).abs())
        .fold(0.0, f64::max);
    let kernel_residual = fro_norm(&linalg::mm(&x.view(), &defect.view()).view());
    check(expression_residual, X_ALGEBRA_TOL, "X = B(1 − 2Q) = (1 − 2P)B = 1 − P − Q + 2PQ")?;
    check(intertwining_residual, X_ALGEBRA_TOL, "PX = XQ = PQ")?;
    check(normality_residual, X_NORMAL_TOL, "XX* = X*X = (X + X*)/2 = B²")?;
    check(circle_residual, CIRCLE_TOL, "spectrum of X on the circle |z − 1/2| = 1/2")?;
    check(kernel_residual, SUBSPACE_TOL, "ker X = E")?;
    Ok((
        x,
        XReport {
            expression_residual,
            intertwining_residual,
            normality_residual,
            circle_residual,
            kernel_residual,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct OffDefect {
    /// orthonormal basis of `E⊥`
    pub basis: CMat,
    /// `Ṽ` in the coordinates of `basis`
    pub unitary: CMat,
    pub min_singular: f64,
    pub report: OffDefectReport,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OffDefectReport {
    pub unitarity: f64,
    /// `‖PṼ − ṼQ‖` on `E⊥`
    pub intertwining: f64,
    /// `‖τ̃Ṽτ̃* − Ṽ*‖` on `E⊥`
    pub reversal: f64,
}

impl OffDefect {
    /// `Ṽ` on the full space, zero on `E`.
    pub fn embedded(&self) -> CMat {
        embed(&self.basis, &self.unitary)
    }
}

/// Smallest singular value `X` may have on `E⊥` when `E⊥` keeps only
/// `|λ| < 1 − cluster_tol`.
pub fn kernel_floor(cluster_tol: f64) -> f64 {
    (1.0 - (1.0 - cluster_tol).powi(2)).sqrt()
}

/// `Ṽ = (X*X)^{-1/2} X` on `E⊥`.
pub fn decoupler_offdefect(
    x: &CMat,
    perp: &CMat,
    defects: &DefectOperators,
    tilde: &AntiUnitary,
    cluster_tol: f64,
) -> Result<OffDefect> {
    let d = perp.ncols();
    if d == 0 {
        return Ok(OffDefect {
            basis: perp.clone(),
            unitary: Array2::zeros((0, 0)),
            min_singular: 1.0,
            report: OffDefectReport {
                unitarity: 0.0,
                intertwining: 0.0,
                reversal: 0.0,
            },
        });
    }
    let xr = compress(perp, x);
    let gram = HermitianOperator::with_tolerance(hermitize(&linalg::mm_hn(&xr.view(), &xr.view())), "X*X", 1e-10)?;
    let dec = gram.spectral_decomposition()?;
    let floor = kernel_floor(cluster_tol);
    let min_singular = dec.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).fold(f64::INFINITY, f64::min);
    if min_singular < floor {
        return Err(Error::KernelLeakage { min_singular, floor });
    }
    let inv_sqrt = dec.apply(|e| c(1.0 / e.sqrt(), 0.0))?;
    let unitary = mm(&inv_sqrt, &xr);
    let out = OffDefect {
        basis: perp.clone(),
        unitary,
        min_singular,
        report: OffDefectReport {
            unitarity: 0.0,
            intertwining: 0.0,
            reversal: 0.0,
        },
    };
    let full = out.embedded();
    let unitarity = crate::operator::unitarity_residual(&out.unitary);
    let intertwining = distance(&mm(&defects.p, &full).view(), &mm(&full, &defects.q).view());
    let reversal = reversal_residual(tilde, &full)?;
    check(unitarity, PAIR_TOL, "unitarity of Ṽ on E⊥")?;
    check(intertwining, PAIR_TOL, "PṼ = ṼQ on E⊥")?;
    check(reversal, CONTRACT_TOL, "τ̃Ṽτ̃* = Ṽ* on E⊥")?;
    Ok(OffDefect {
        report: OffDefectReport {
            unitarity,
            intertwining,
            reversal,
        },
        ..out
    })
}

// ---------------------------------------------------------------------------
// The defect space

/// Orthonormal basis of `span(k)` ordered by localization: each vector is
/// the normalized projection of the coordinate vector with the largest
/// remaining weight, ties to the lower index.
pub fn pivoted_basis(k: &CMat) -> CMat {
    let n = k.nrows();
    let d = k.ncols();
    let mut rest = k.clone();
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let mut best = (0usize, -1.0f64);
        for (i, row) in rest.axis_iter(Axis(0)).enumerate() {
            let w: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            if w > best.1 + 1e-12 {
                best = (i, w);
            }
        }
        let coeffs = rest.row(best.0).mapv(|z| z.conj());
        let mut phi = rest.dot(&coeffs);
        let nrm = vec_norm(&phi.view());
        phi.mapv_inplace(|z| z / nrm);
        out.column_mut(j).assign(&phi);
        if j + 1 < d {
            let overlap = phi.mapv(|z| z.conj()).dot(&rest);
            let mut next = rest.clone();
            for (col, ov) in next.axis_iter_mut(Axis(1)).zip(overlap.iter()) {
                let mut col = col;
                col.zip_mut_with(&phi, |x, y| *x -= ov * y);
            }
            rest = orthonormalize(&next, 1e-8);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DefectPart {
    /// `v` on the full space, zero on `E⊥`
    pub v: CMat,
    /// `φ₁ … φ_d`, a basis of `E₊₁`
    pub phi: CMat,
    /// `(φ_{2m+1}, τ̃φ_{2m+1})` when `dim E₊₁` is odd
    pub rest: Option<(Array1<C64>, Array1<C64>)>,
    /// `‖τ̃vτ̃* − v*‖`
    pub reversal: f64,
    /// angle between `τ̃E₊₁` and `E₋₁`
    pub image_leakage: f64,
}

/// `J = [[0, −1], [1, 0]] ⊗ 1_m`.
fn symplectic(m: usize) -> CMat {
    let mut j = Array2::zeros((2 * m, 2 * m));
    for i in 0..m {
        j[[i, m + i]] = -ONE;
        j[[m + i, i]] = ONE;
    }
    j
}

/// `v` on `E`: swaps `F₊₁ = span{φ₁ … φ_{2m}}` with `τ̃F₊₁` through
/// `[[0, J], [J, 0]]`, identity on `F_rest`.
pub fn decoupler_defect(phi: &CMat, e_minus: &CMat, tilde: &AntiUnitary) -> Result<DefectPart> {
    let n = tilde.dim();
    let d = phi.ncols();
    if d != e_minus.ncols() {
        return Err(Error::DefectMismatch {
            plus: d,
            minus: e_minus.ncols(),
        });
    }
    if phi.nrows() != n || e_minus.nrows() != n {
        return Err(Error::Dimension("defect bases do not live on the pair's space".into()));
    }
    let psi = tilde.apply(&phi.view());
    let image_leakage = check(subspace_leakage(&psi.view(), &e_minus.view()), SUBSPACE_TOL, "τ̃E₊₁ = E₋₁")?;
    let m = d / 2;
    let mut v: CMat = Array2::zeros((n, n));
    if m > 0 {
        let mut g = Array2::zeros((n, 4 * m));
        g.slice_mut(s![.., ..2 * m]).assign(&phi.slice(s![.., ..2 * m]));
        g.slice_mut(s![.., 2 * m..]).assign(&psi.slice(s![.., ..2 * m]));
        let j = symplectic(m);
        let mut blk = Array2::zeros((4 * m, 4 * m));
        blk.slice_mut(s![..2 * m, 2 * m..]).assign(&j);
        blk.slice_mut(s![2 * m.., ..2 * m]).assign(&j);
        v = embed(&g, &blk);
    }
    let rest = if d % 2 == 1 {
        let a = phi.column(d - 1).to_owned();
        let b = psi.column(d - 1).to_owned();
        v = v + rank_one(&a.view()) + rank_one(&b.view());
        Some((a, b))
    } else {
        None
    };
    let reversal = check(reversal_residual(tilde, &v)?, PAIR_TOL, "τ̃vτ̃* = v*")?;
    Ok(DefectPart {
        v,
        phi: phi.clone(),
        rest,
        reversal,
        image_leakage,
    })
}

// ---------------------------------------------------------------------------
// Decoupling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Even,
    OddResidual,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SchattenRow {
    pub p: f64,
    /// `‖[U, P]‖_p`
    pub commutator_up: f64,
    /// `‖U − W‖_p`
    pub u_minus_w: f64,
    /// `‖[W, P]‖_p`
    pub commutator_wp: f64,
    /// `‖[W − U, P]‖_p + ‖[U, P]‖_p`, which bounds `‖[W, P]‖_p`
    pub triangle_bound: f64,
    /// `‖Ṽ − 1‖_p` on `E⊥`
    pub v_tilde_minus_one: f64,
    /// `‖X − 1‖_p` on `E⊥`
    pub x_minus_one: f64,
    /// `‖Ṽ − 1‖_p / ‖X − 1‖_p`, absent when `X = 1` on `E⊥`
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub dim: usize,
    pub cluster_tol: f64,
    pub dim_e_plus: usize,
    pub dim_e_minus: usize,
    pub dim_e_perp: usize,
    /// `dim E₊₁` at `tol/10, tol, 10·tol`
    pub cluster_counts: Vec<usize>,
    /// `dim ker(A − 1)` at machine tolerance
    pub exact_defect_dim: usize,
    pub square_residual: f64,
    pub anticommutator_residual: f64,
    pub tilde_tau: TildeTauReport,
    pub symmetry: SymmetryReport,
    pub x: XReport,
    pub off_defect: OffDefectReport,
    pub min_singular: f64,
    pub v_defect_reversal: f64,
    /// `‖τWτ* − W*‖`
    pub w_reversal: f64,
    /// `‖τ̃Vτ̃* − V*‖`
    pub v_reversal: f64,
    /// even: `‖[W, P]‖`; odd: `‖WPW* − P − Π₊ + Π₋‖`
    pub contract_residual: f64,
    /// `‖PV − VQ‖`; zero in the even case
    pub intertwining: f64,
}

/// The rank-one leftovers `Π± = |φ±⟩⟨φ±|` of the odd case.
#[derive(Debug, Clone)]
pub struct ResidualStates {
    pub plus: Array1<C64>,
    pub minus: Array1<C64>,
}

impl ResidualStates {
    pub fn plus_projection(&self) -> CMat {
        rank_one(&self.plus.view())
    }

    pub fn minus_projection(&self) -> CMat {
        rank_one(&self.minus.view())
    }
}

#[derive(Debug, Clone)]
pub struct DecouplingResult {
    pub w: UnitaryOperator,
    pub v: UnitaryOperator,
    pub classification: Classification,
    pub residual: Option<ResidualStates>,
    pub chains: Option<ChainProjections>,
    pub shift: Option<ShiftChains>,
    pub schatten_report: Vec<SchattenRow>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecouplingSummary {
    pub classification: Classification,
    pub diagnostics: Diagnostics,
    pub schatten_report: Vec<SchattenRow>,
    pub chains: Option<ChainCheck>,
    pub shift: Option<ShiftReport>,
}

impl DecouplingResult {
    pub fn summary(&self) -> DecouplingSummary {
        DecouplingSummary {
            classification: self.classification,
            diagnostics: self.diagnostics.clone(),
            schatten_report: self.schatten_report.clone(),
            chains: self.chains.as_ref().map(|c| c.check),
            shift: self.shift.as_ref().map(|s| s.report),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecoupleOptions {
    pub cluster_tol: f64,
    /// Chain depth for the odd case; `None` skips chain construction.
    pub depth: Option<usize>,
}

impl Default for DecoupleOptions {
    fn default() -> Self {
        Self {
            cluster_tol: DEFAULT_CLUSTER_TOL,
            depth: None,
        }
    }
}

/// The pair identities alone, without the decoupler's cluster-stability
/// requirement.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub square_residual: f64,
    pub anticommutator_residual: f64,
    pub tilde_tau: TildeTauReport,
    pub symmetry: SymmetryReport,
    pub x: XReport,
    /// mid-spectrum clusters given a Kramers basis
    pub kramers_clusters: usize,
}

pub fn identity_suite(pair: &SymmetricPair, cluster_tol: f64) -> Result<IdentityReport> {
    let defects = defect_operators(pair)?;
    let idx: Vec<usize> = defects
        .cluster(1.0, cluster_tol)
        .into_iter()
        .chain(defects.cluster(-1.0, cluster_tol))
        .collect();
    let basis = defects.spectrum.columns(&idx);
    let tilde = tilde_tau(pair, &defects)?;
    let symmetry = spectral_symmetry_check(&defects, &tilde.theta, cluster_tol)?;
    let kramers_clusters = mid_spectrum_kramers(&defects, &tilde.theta, cluster_tol)?;
    let (_, x) = build_x(&defects, &basis)?;
    Ok(IdentityReport {
        square_residual: defects.square_residual,
        anticommutator_residual: defects.anticommutator_residual,
        tilde_tau: tilde.report,
        symmetry,
        x,
        kramers_clusters,
    })
}

/// Dimension of the `target` cluster at `tol/10`, `tol`, `10·tol`; refuses
/// when the count moves within that decade.
pub fn stable_cluster(defects: &DefectOperators, target: f64, tol: f64) -> Result<Vec<usize>> {
    let counts: Vec<usize> = [0.1, 1.0, 10.0]
        .iter()
        .map(|f| defects.cluster(target, tol * f).len())
        .collect();
    if counts.iter().any(|&k| k != counts[0]) {
        return Err(Error::ClusterUnstable { target, counts });
    }
    Ok(counts)
}

pub fn decouple(pair: &SymmetricPair, cluster_tol: f64) -> Result<DecouplingResult> {
    decouple_with(
        pair,
        &DecoupleOptions {
            cluster_tol,
            depth: None,
        },
    )
}

pub fn decouple_with(pair: &SymmetricPair, opts: &DecoupleOptions) -> Result<DecouplingResult> {
    let tol = opts.cluster_tol;
    if !(tol > 0.0 && tol < 0.5) {
        return Err(Error::InvalidArgument(format!("cluster_tol {tol} outside (0, 0.5)")));
    }
    let n = pair.dim();
    let defects = defect_operators(pair)?;
    let cluster_counts = stable_cluster(&defects, 1.0, tol)?;
    stable_cluster(&defects, -1.0, tol)?;
    let plus_idx = defects.cluster(1.0, tol);
    let minus_idx = defects.cluster(-1.0, tol);
    if plus_idx.len() != minus_idx.len() {
        return Err(Error::DefectMismatch {
            plus: plus_idx.len(),
            minus: minus_idx.len(),
        });
    }
    let perp_idx: Vec<usize> = (0..n).filter(|i| !plus_idx.contains(i) && !minus_idx.contains(i)).collect();
    let e_plus = defects.spectrum.columns(&plus_idx);
    let e_minus = defects.spectrum.columns(&minus_idx);
    let perp = defects.spectrum.columns(&perp_idx);
    let defect_basis = ndarray::concatenate(Axis(1), &[e_plus.view(), e_minus.view()])
        .map_err(|e| Error::Dimension(e.to_string()))?;

    let tilde = tilde_tau(pair, &defects)?;
    let symmetry = spectral_symmetry_check(&defects, &tilde.theta, tol)?;
    mid_spectrum_kramers(&defects, &tilde.theta, tol)?;
    let (x, x_report) = build_x(&defects, &defect_basis)?;
    let off = decoupler_offdefect(&x, &perp, &defects, &tilde.theta, tol)?;
    let phi = pivoted_basis(&e_plus);
    let part = decoupler_defect(&phi, &e_minus, &tilde.theta)?;

    let v = UnitaryOperator::with_tolerance(&part.v + &off.embedded(), CONTRACT_TOL)?;
    let w = UnitaryOperator::with_tolerance(mm(v.matrix(), pair.u().matrix()), CONTRACT_TOL)?;
    let (p, q) = (&defects.p, &defects.q);
    let w_reversal = check(reversal_residual(pair.tau(), w.matrix())?, CONTRACT_TOL, "τWτ* = W*")?;
    let v_reversal = check(reversal_residual(&tilde.theta, v.matrix())?, CONTRACT_TOL, "τ̃Vτ̃* = V*")?;
    let intertwining = distance(&mm(p, v.matrix()).view(), &mm(v.matrix(), q).view());
    let (classification, residual, contract_residual) = match &part.rest {
        None => {
            let r = fro_norm(&commutator(w.matrix(), p).view());
            (Classification::Even, None, check(r, CONTRACT_TOL, "[W, P] = 0")?)
        }
        Some((a, b)) => {
            let states = ResidualStates {
                plus: a.clone(),
                minus: b.clone(),
            };
            let wpw = crate::operator::conjugate(w.matrix(), p);
            let r = fro_norm(&(wpw - p - states.plus_projection() + states.minus_projection()).view());
            let r = check(r, CONTRACT_TOL, "WPW* − P = Π₊ − Π₋")?;
            (Classification::OddResidual, Some(states), r)
        }
    };

    let schatten_report = schatten_rows(pair, &w, &x, &off)?;
    let (chains, shift) = match (&residual, opts.depth) {
        (Some(states), Some(depth)) => {
            let chains = chain_projections(
                w.matrix(),
                p,
                &states.plus.view(),
                &states.minus.view(),
                pair.tau(),
                depth,
            )?;
            let shift = shift_extraction(w.matrix(), p, pair.tau(), &states.plus.view(), depth)?;
            (Some(chains), Some(shift))
        }
        _ => (None, None),
    };

    let diagnostics = Diagnostics {
        dim: n,
        cluster_tol: tol,
        dim_e_plus: plus_idx.len(),
        dim_e_minus: minus_idx.len(),
        dim_e_perp: perp_idx.len(),
        cluster_counts,
        exact_defect_dim: exact_defect_dimension(&defects),
        square_residual: defects.square_residual,
        anticommutator_residual: defects.anticommutator_residual,
        tilde_tau: tilde.report,
        symmetry,
        x: x_report,
        off_defect: off.report,
        min_singular: off.min_singular,
        v_defect_reversal: part.reversal,
        w_reversal,
        v_reversal,
        contract_residual,
        intertwining,
    };
    Ok(DecouplingResult {
        w,
        v,
        classification,
        residual,
        chains,
        shift,
        schatten_report,
        diagnostics,
    })
}

fn schatten_rows(pair: &SymmetricPair, w: &UnitaryOperator, x: &CMat, off: &OffDefect) -> Result<Vec<SchattenRow>> {
    let u = pair.u().matrix();
    let p = pair.p().matrix();
    let cup = commutator(u, p);
    let w_minus_u = w.matrix() - u;
    let cwp = commutator(w.matrix(), p);
    let cdiff = commutator(&w_minus_u, p);
    let d = off.basis.ncols();
    let v1 = &off.unitary - &identity(d);
    let x1 = compress(&off.basis, x) - identity(d);
    let mut rows = Vec::new();
    for p_exp in [1.0, 2.0] {
        let commutator_up = schatten_norm(&cup.view(), p_exp)?;
        let u_minus_w = schatten_norm(&w_minus_u.view(), p_exp)?;
        let commutator_wp = schatten_norm(&cwp.view(), p_exp)?;
        let triangle_bound = schatten_norm(&cdiff.view(), p_exp)? + commutator_up;
        let v_tilde_minus_one = schatten_norm(&v1.view(), p_exp)?;
        let x_minus_one = schatten_norm(&x1.view(), p_exp)?;
        let ratio = (x_minus_one > 1e-14).then(|| v_tilde_minus_one / x_minus_one);
        rows.push(SchattenRow {
            p: p_exp,
            commutator_up,
            u_minus_w,
            commutator_wp,
            triangle_bound,
            v_tilde_minus_one,
            x_minus_one,
            ratio,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Chains

fn power_apply(w: &CMat, wh: &CMat, v: &Array1<C64>, k: i64) -> Array1<C64> {
    let mut out = v.clone();
    let m = if k >= 0 { w } else { wh };
    for _ in 0..k.unsigned_abs() {
        out = m.dot(&out);
    }
    out
}

/// Columns `ψ^{(k)}`, `k = −depth … depth + 1`, where `ψ^{(k)} = A^{k+shift} ψ`.
fn orbit(w: &CMat, v: &ArrayView1<C64>, depth: usize, shift: i64) -> CMat {
    let wh = dagger(&w.view());
    let count = 2 * depth + 2;
    let mut out = Array2::zeros((v.len(), count));
    let start = -(depth as i64);
    let mut cur = power_apply(w, &wh, &v.to_owned(), start + shift);
    for j in 0..count {
        out.column_mut(j).assign(&cur);
        cur = w.dot(&cur);
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainCheck {
    pub depth: usize,
    /// largest `|⟨ψ, ψ′⟩|` over distinct chain vectors, and `|‖ψ‖ − 1|`
    pub orthogonality: f64,
    /// largest `‖P⊥ψ^{(k)}‖` for `k ≤ 0`, `‖Pψ^{(k)}‖` for `k ≥ 1`
    pub inclusion: f64,
    /// largest `‖τΠ₊^{(k)}τ* − Π₋^{(k)}‖`
    pub kramers: f64,
}

/// `Π₊^{(k)} = Ad_W^{k−1}(Π₊)` and `Π₋^{(k)} = Ad_{W*}^k(Π₋)`, stored by
/// their unit vectors. Column `j` holds `k = j − depth`.
#[derive(Debug, Clone)]
pub struct ChainProjections {
    pub depth: usize,
    pub plus: CMat,
    pub minus: CMat,
    pub check: ChainCheck,
}

impl ChainProjections {
    pub fn column(&self, k: i64) -> Option<usize> {
        let j = k + self.depth as i64;
        (j >= 0 && j < self.plus.ncols() as i64).then_some(j as usize)
    }

    pub fn projection(&self, plus: bool, k: i64) -> Option<CMat> {
        let j = self.column(k)?;
        let m = if plus { &self.plus } else { &self.minus };
        Some(rank_one(&m.column(j)))
    }
}

fn window(m: &CMat, full: usize, depth: usize) -> ArrayView2<'_, C64> {
    m.slice(s![.., full - depth..full + depth + 2])
}

fn chain_check(p: &CMat, tau: &AntiUnitary, plus: &ArrayView2<C64>, minus: &ArrayView2<C64>, depth: usize) -> ChainCheck {
    let all = ndarray::concatenate(Axis(1), &[plus.view(), minus.view()]).expect("equal rows");
    let gram = linalg::mm_hn(&all.view(), &all.view());
    let orthogonality = gram
        .indexed_iter()
        .map(|((i, j), z)| if i == j { (z.re - 1.0).abs().max(z.im.abs()) } else { z.norm() })
        .fold(0.0, f64::max);
    let pp = linalg::mm(&p.view(), &all.view());
    let count = 2 * depth + 2;
    let mut inclusion = 0.0f64;
    for (j, col) in all.axis_iter(Axis(1)).enumerate() {
        let k = (j % count) as i64 - depth as i64;
        let pcol = pp.column(j);
        let r = if k <= 0 {
            col.iter().zip(pcol.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
        } else {
            vec_norm(&pcol)
        };
        inclusion = inclusion.max(r);
    }
    let tp = tau.apply(plus);
    let kramers = (0..count)
        .map(|j| rank_one_distance(&tp.column(j), &minus.column(j)))
        .fold(0.0, f64::max);
    ChainCheck {
        depth,
        orthogonality,
        inclusion,
        kramers,
    }
}

fn passes(c: &ChainCheck) -> bool {
    c.orthogonality <= CHAIN_TOL && c.inclusion <= CHAIN_TOL && c.kramers <= CHAIN_TOL
}

fn unit(v: &ArrayView1<C64>, what: &str) -> Result<Array1<C64>> {
    let nrm = vec_norm(v);
    if nrm < 1e-12 {
        return Err(Error::InvalidArgument(format!("{what} is the zero vector")));
    }
    Ok(v.mapv(|z| z / nrm))
}

/// Builds the chains to `depth` and verifies orthogonality, inclusion and
/// Kramers pairing window by window; the first failing window bounds the
/// clean depth.
pub fn chain_projections(
    w: &CMat,
    p: &CMat,
    plus: &ArrayView1<C64>,
    minus: &ArrayView1<C64>,
    tau: &AntiUnitary,
    depth: usize,
) -> Result<ChainProjections> {
    let n = w.nrows();
    if w.ncols() != n || p.dim() != (n, n) || plus.len() != n || minus.len() != n || tau.dim() != n {
        return Err(Error::Dimension("chain inputs disagree in size".into()));
    }
    let plus = unit(plus, "Π₊ vector")?;
    let minus = unit(minus, "Π₋ vector")?;
    let chain_plus = orbit(w, &plus.view(), depth, -1);
    let wh = dagger(&w.view());
    // Π₋^{(k)} = W*^k Π₋ W^k has vector W*^k ψ₋; start at k = −depth.
    let mut chain_minus = Array2::zeros((n, 2 * depth + 2));
    let mut cur = power_apply(w, &wh, &minus, depth as i64);
    for j in 0..2 * depth + 2 {
        chain_minus.column_mut(j).assign(&cur);
        cur = wh.dot(&cur);
    }
    let mut last = None;
    for d in 0..=depth {
        let c = chain_check(
            p,
            tau,
            &window(&chain_plus, depth, d),
            &window(&chain_minus, depth, d),
            d,
        );
        if !passes(&c) {
            if d == 0 {
                let residual = c.orthogonality.max(c.inclusion).max(c.kramers);
                return Err(Error::Invariant {
                    what: "base case Π₊^{(1)} ⊥ Π₋^{(0)} with Π₋ ⪯ P, Π₊ ⪯ P⊥",
                    residual,
                    tol: CHAIN_TOL,
                });
            }
            return Err(Error::TruncationDepth {
                requested: depth,
                clean: d - 1,
            });
        }
        last = Some(c);
    }
    Ok(ChainProjections {
        depth,
        plus: chain_plus,
        minus: chain_minus,
        check: last.expect("depth 0 checked"),
    })
}

/// Largest depth `≤ limit` at which [`chain_projections`] succeeds; `None`
/// if even the base case fails.
pub fn max_clean_depth(
    w: &CMat,
    p: &CMat,
    plus: &ArrayView1<C64>,
    minus: &ArrayView1<C64>,
    tau: &AntiUnitary,
    limit: usize,
) -> Result<Option<usize>> {
    match chain_projections(w, p, plus, minus, tau, limit) {
        Ok(_) => Ok(Some(limit)),
        Err(Error::TruncationDepth { clean, .. }) => Ok(Some(clean)),
        Err(Error::Invariant { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShiftReport {
    pub depth: usize,
    /// largest `‖Wφ_k − φ_{k+1}‖`
    pub forward_shift: f64,
    /// largest `‖Wφ̄_k − φ̄_{k−1}‖`
    pub backward_shift: f64,
    /// largest `|⟨φ_k, φ̄_l⟩|`
    pub cross_orthogonality: f64,
    /// `‖H′*H′ − 1‖`
    pub chain_orthonormality: f64,
    /// `‖W′ − S‖` over the window columns that stay inside it
    pub window_residual: f64,
    /// dimension of `H″`
    pub complement_dim: usize,
    /// `‖(1 − Π_{H″}) W|H″‖`; nonzero until the chains exhaust the shift part
    pub complement_leakage: f64,
    /// `‖[W″, P″]‖`
    pub commutator_residual: f64,
}

/// `φ_k = W^{k−1}φ₁`, `φ̄_k = τφ_k` for `k = −depth … depth + 1`, and the
/// compression `W″` of `W` to the complement `H″` of the chains.
#[derive(Debug, Clone)]
pub struct ShiftChains {
    pub depth: usize,
    pub phi: CMat,
    pub phi_bar: CMat,
    /// orthonormal basis of `H″`
    pub complement: CMat,
    /// `W″` in the coordinates of `complement`
    pub w_rest: CMat,
    /// `P″` in the coordinates of `complement`
    pub p_rest: CMat,
    pub report: ShiftReport,
}

impl ShiftChains {
    /// Basis of `H′` ordered `φ_{−K} … φ_{K+1}, φ̄_{−K} … φ̄_{K+1}`, under
    /// which `W` is the window of `S`.
    pub fn chain_basis(&self) -> CMat {
        ndarray::concatenate(Axis(1), &[self.phi.view(), self.phi_bar.view()]).expect("equal rows")
    }
}

fn orthonormality(b: &ArrayView2<C64>) -> f64 {
    distance_to_identity(&linalg::mm_hn(b, b).view())
}

pub fn shift_extraction(
    w: &CMat,
    p: &CMat,
    tau: &AntiUnitary,
    phi1: &ArrayView1<C64>,
    depth: usize,
) -> Result<ShiftChains> {
    let n = w.nrows();
    if w.ncols() != n || p.dim() != (n, n) || phi1.len() != n || tau.dim() != n {
        return Err(Error::Dimension("shift inputs disagree in size".into()));
    }
    let phi1 = unit(phi1, "φ₁")?;
    let phi = orbit(w, &phi1.view(), depth, -1);
    let phi_bar = tau.apply(&phi.view());
    for d in 0..=depth {
        let basis = ndarray::concatenate(
            Axis(1),
            &[window(&phi, depth, d), window(&phi_bar, depth, d)],
        )
        .expect("equal rows");
        let r = orthonormality(&basis.view());
        if r > CHAIN_TOL {
            if d == 0 {
                return Err(Error::Invariant {
                    what: "φ₀, φ₁, φ̄₀, φ̄₁ orthonormal",
                    residual: r,
                    tol: CHAIN_TOL,
                });
            }
            return Err(Error::TruncationDepth {
                requested: depth,
                clean: d - 1,
            });
        }
    }
    let count = 2 * depth + 2;
    let wphi = linalg::mm(&w.view(), &phi.view());
    let wbar = linalg::mm(&w.view(), &phi_bar.view());
    let col_dist = |a: ArrayView1<C64>, b: ArrayView1<C64>| {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    };
    let mut forward_shift = 0.0f64;
    let mut backward_shift = 0.0f64;
    for j in 0..count - 1 {
        forward_shift = forward_shift.max(col_dist(wphi.column(j), phi.column(j + 1)));
        backward_shift = backward_shift.max(col_dist(wbar.column(j + 1), phi_bar.column(j)));
    }
    let cross = linalg::mm_hn(&phi.view(), &phi_bar.view());
    let cross_orthogonality = cross.iter().map(|z| z.norm()).fold(0.0, f64::max);
    check(forward_shift, CHAIN_TOL, "Wφ_k = φ_{k+1}")?;
    check(backward_shift, CHAIN_TOL, "Wφ̄_k = φ̄_{k−1}")?;
    check(cross_orthogonality, CHAIN_TOL, "⟨φ_k, φ̄_l⟩ = 0")?;

    let h = ndarray::concatenate(Axis(1), &[phi.view(), phi_bar.view()]).expect("equal rows");
    let chain_orthonormality = orthonormality(&h.view());
    let w_chain = compress(&h, w);
    let mut window_residual = 0.0f64;
    for j in 0..2 * count {
        let target = if j < count {
            (j + 1 < count).then_some(j + 1)
        } else {
            (j > count).then(|| j - 1)
        };
        if let Some(t) = target {
            let mut e = Array1::<C64>::zeros(2 * count);
            e[t] = ONE;
            window_residual = window_residual.max(col_dist(w_chain.column(j), e.view()));
        }
    }

    let proj = linalg::mm_nh(&h.view(), &h.view());
    let rest = HermitianOperator::with_tolerance(hermitize(&(identity(n) - proj)), "1 − Π_{H′}", 1e-8)?
        .spectral_decomposition()?;
    let keep: Vec<usize> = (0..n).filter(|&i| rest.eigenvalues[i] > 0.5).collect();
    let complement = rest.columns(&keep);
    let w_rest = compress(&complement, w);
    let p_rest = compress(&complement, p);
    let wk = linalg::mm(&w.view(), &complement.view());
    let back = linalg::mm(&complement.view(), &w_rest.view());
    let complement_leakage = distance(&wk.view(), &back.view());
    let commutator_residual = fro_norm(&commutator(&w_rest, &p_rest).view());
    Ok(ShiftChains {
        depth,
        phi,
        phi_bar,
        complement,
        w_rest,
        p_rest,
        report: ShiftReport {
            depth,
            forward_shift,
            backward_shift,
            cross_orthogonality,
            chain_orthonormality,
            window_residual,
            complement_dim: keep.len(),
            complement_leakage,
            commutator_residual,
        },
    })
}

// ---------------------------------------------------------------------------
// Test pairs

/// `S|x,±⟩ = |x ± 1, ±⟩` on a ring of `l` sites, flat index `2x + spin`
/// with spin 0 the `+` component.
pub fn ring_shift(l: usize) -> CMat {
    let mut s = Array2::zeros((2 * l, 2 * l));
    for x in 0..l {
        s[[2 * ((x + 1) % l), 2 * x]] = ONE;
        s[[2 * ((x + l - 1) % l) + 1, 2 * x + 1]] = ONE;
    }
    s
}

/// Both spin components of the sites `0 … m` of a ring of `l` sites.
pub fn arc_projection(l: usize, m: usize) -> ProjectionOperator {
    let mask: Vec<bool> = (0..2 * l).map(|i| i / 2 <= m).collect();
    ProjectionOperator::from_mask(&mask)
}

/// The ring shift-pair `(S, arc, τ)`: `A` has eigenvalue `+1` on
/// `|m+1,+⟩, |l−1,−⟩`, `−1` on `|0,+⟩, |m,−⟩` and `0` elsewhere.
pub fn ring_shift_pair(l: usize, m: usize) -> Result<SymmetricPair> {
    if l < 3 || m + 1 >= l {
        return Err(Error::InvalidArgument(format!("arc 0..={m} must be a proper arc of a ring of {l} sites")));
    }
    SymmetricPair::new(
        UnitaryOperator::new(ring_shift(l))?,
        arc_projection(l, m),
        AntiUnitary::standard_odd(l),
    )
}

/// `(U_a, P_F, τ)` of a lattice model on its torus: flux insertion at the
/// default center and the Fermi projection at `mu`.
pub fn model_pair(spec: &crate::lattice::ModelSpec, mu: f64) -> Result<SymmetricPair> {
    let setup = crate::bulk::bulk_setup(&spec.as_torus(), mu, None)?;
    SymmetricPair::new(UnitaryOperator::new(setup.flux.matrix())?, setup.fermi, setup.tau)
}

fn uniform_hermitian(n: usize, rng: &mut ChaCha20Rng) -> CMat {
    let dist = Uniform::new(-1.0, 1.0);
    let m = Array2::from_shape_fn((n, n), |_| c(dist.sample(rng), dist.sample(rng)));
    hermitize(&m).mapv(|z| z / (n as f64).sqrt())
}

/// `(M + τMτ*)/2` for a random Hermitian `M`.
fn symmetric_hermitian(n: usize, tau: &AntiUnitary, rng: &mut ChaCha20Rng) -> Result<CMat> {
    let m = uniform_hermitian(n, rng);
    let tm = tau.conjugate(&m)?;
    Ok(hermitize(&((m + tm).mapv(|z| 0.5 * z))))
}

/// Random pair on `C^n`: `τ` standard odd, `U = exp(iM)` with `τMτ* = M`,
/// `P` the spectral projection onto the lowest `2⌊n/4⌋` levels of an
/// independent `τ`-invariant Hermitian, so no Kramers pair is split.
pub fn random_symmetric_pair(n: usize, seed: u64) -> Result<SymmetricPair> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidArgument(format!("pair dimension {n} must be even and positive")));
    }
    let tau = AntiUnitary::standard_odd(n / 2);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = HermitianOperator::new(symmetric_hermitian(n, &tau, &mut rng)?, "M")?;
    let u = functional_calculus(&m, |x| C64::from_polar(1.0, x))?;
    let h = HermitianOperator::new(symmetric_hermitian(n, &tau, &mut rng)?, "H")?;
    let dec = h.spectral_decomposition()?;
    let rank = 2 * (n / 4);
    let cols = dec.eigenvectors.slice(s![.., ..rank]).to_owned();
    let p = ProjectionOperator::from_columns(&cols.view());
    SymmetricPair::new(UnitaryOperator::new(u)?, p, tau)
}

/// A synthetic odd-case input: `W = S ⊕ W_triv` on a ring of `sites`
/// sites plus `trivial_pairs` Kramers pairs, `P = arc(0 … arc) ⊕ P_triv`,
/// `Π₊ = |arc+1, +⟩`, `Π₋ = |arc, −⟩`. The chains run cleanly to depth
/// `min(arc, sites − 2 − arc)`.
#[derive(Debug, Clone)]
pub struct SyntheticChain {
    pub w: CMat,
    pub p: CMat,
    pub tau: AntiUnitary,
    pub plus: Array1<C64>,
    pub minus: Array1<C64>,
    pub sites: usize,
    pub arc: usize,
    /// `W_triv` embedded on the full space
    pub w_trivial: CMat,
}

pub fn synthetic_shift_chain(sites: usize, arc: usize, trivial_pairs: usize) -> Result<SyntheticChain> {
    if sites < 3 || arc + 1 >= sites {
        return Err(Error::InvalidArgument(format!("arc 0..={arc} must be a proper arc of a ring of {sites} sites")));
    }
    let ring = 2 * sites;
    let n = ring + 2 * trivial_pairs;
    let mut w = Array2::zeros((n, n));
    w.slice_mut(s![..ring, ..ring]).assign(&ring_shift(sites));
    let mut w_trivial = Array2::zeros((n, n));
    let mut p = Array2::zeros((n, n));
    for i in 0..ring {
        if i / 2 <= arc {
            p[[i, i]] = ONE;
        }
    }
    for j in 0..trivial_pairs {
        let phase = C64::from_polar(1.0, 0.3 * (j + 1) as f64);
        for k in [ring + 2 * j, ring + 2 * j + 1] {
            w[[k, k]] = phase;
            w_trivial[[k, k]] = phase;
            if j % 2 == 0 {
                p[[k, k]] = ONE;
            }
        }
    }
    let mut plus = Array1::zeros(n);
    plus[2 * (arc + 1)] = ONE;
    let mut minus = Array1::zeros(n);
    minus[2 * arc + 1] = ONE;
    Ok(SyntheticChain {
        w,
        p,
        tau: AntiUnitary::standard_odd(n / 2),
        plus,
        minus,
        sites,
        arc,
        w_trivial,
    })
}
