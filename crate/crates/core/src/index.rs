//! Defect-localized counting of near-+1 eigenvectors and the tolerance-sweep
//! plateau shared by the bulk and edge indices.

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::LatticeGeometry;
use crate::operator::{linalg, HermitianOperator, SpectralDecomposition};

/// A ℤ₂ value, or `undetermined` when no stable plateau exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Z2 {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    Undetermined,
}

impl Z2 {
    pub fn from_parity(count: usize) -> Self {
        if count % 2 == 0 {
            Z2::Zero
        } else {
            Z2::One
        }
    }

    pub fn is_determined(self) -> bool {
        self != Z2::Undetermined
    }

    pub fn label(self) -> &'static str {
        match self {
            Z2::Zero => "0",
            Z2::One => "1",
            Z2::Undetermined => "undetermined",
        }
    }
}

/// Counting parameters shared by every index evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountingConfig {
    /// Radius around the defect; `None` means a quarter of the shorter side.
    pub filter_radius: Option<f64>,
    /// Minimal weight inside the radius for a mode to count.
    pub localization_threshold: f64,
    /// Distances `|λ − 1|` swept, loosest first.
    pub tol_sweep: Vec<f64>,
    /// Consecutive sweep points that must share a parity.
    pub plateau_points: usize,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            filter_radius: None,
            localization_threshold: 0.9,
            tol_sweep: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            plateau_points: 2,
        }
    }
}

impl CountingConfig {
    pub fn radius_for(&self, g: &LatticeGeometry) -> f64 {
        self.filter_radius
            .unwrap_or_else(|| g.lx.min(g.ly) as f64 / 4.0)
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error::InvalidArgument;
        if self.tol_sweep.is_empty() || self.tol_sweep.iter().any(|&t| !(t > 0.0)) {
            return Err(InvalidArgument("tol_sweep must be a nonempty list of positive values".into()));
        }
        if !(self.localization_threshold > 0.0 && self.localization_threshold <= 1.0) {
            return Err(InvalidArgument("localization_threshold must lie in (0, 1]".into()));
        }
        if let Some(r) = self.filter_radius {
            if !(r > 0.0) {
                return Err(InvalidArgument("filter_radius must be positive".into()));
            }
        }
        if self.plateau_points < 2 {
            return Err(InvalidArgument("plateau_points must be at least 2".into()));
        }
        Ok(())
    }
}

/// One eigenvalue near +1 with its localization data.
#[derive(Debug, Clone, Serialize)]
pub struct ModeRow {
    pub eigenvalue: f64,
    /// Weight within `filter_radius` of the defect.
    pub weight: f64,
    /// `√⟨r²⟩` measured from the defect.
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub tol: f64,
    /// Eigenvalues within `tol` of the target.
    pub cluster: usize,
    /// Of those, the number of defect-localized directions.
    pub filtered: usize,
    /// Directions with weight strictly between `1 − threshold` and
    /// `threshold`: neither localized nor absent. Such a row has no parity.
    pub ambiguous: usize,
}

impl SweepRow {
    /// Classify the localized weights of one cluster.
    pub fn classify(tol: f64, cluster: usize, weights: &[f64], threshold: f64) -> Self {
        let filtered = weights.iter().filter(|&&w| w >= threshold).count();
        let ambiguous = weights
            .iter()
            .filter(|&&w| w < threshold && w > 1.0 - threshold)
            .count();
        Self {
            tol,
            cluster,
            filtered,
            ambiguous,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub z2: Z2,
    pub filter_radius: f64,
    pub localization_threshold: f64,
    pub defect: (f64, f64),
    pub sweep: Vec<SweepRow>,
    /// The sweep points forming the plateau, if any.
    pub plateau: Option<(f64, f64)>,
    /// Unfiltered `dim ker(A − 1)` at tolerance 1e−10.
    pub exact_kernel: usize,
    pub modes: Vec<ModeRow>,
}

/// Spatial weights of every flat index relative to a defect point.
#[derive(Debug, Clone)]
pub struct DefectWindow {
    /// 1 inside the radius, 0 outside, per flat index.
    pub mask: Vec<f64>,
    /// Squared distance to the defect per flat index.
    pub r2: Vec<f64>,
    pub radius: f64,
    pub center: (f64, f64),
}

impl DefectWindow {
    /// Minimal-image distance along periodic directions, plain otherwise.
    pub fn new(g: &LatticeGeometry, center: (f64, f64), radius: f64) -> Self {
        let mut mask = Vec::with_capacity(g.dim());
        let mut r2 = Vec::with_capacity(g.dim());
        for i in 0..g.dim() {
            let (x1, x2) = g.position(i / g.orbitals);
            let dx = wrap(x1 as f64 - center.0, g.lx, g.boundary_x);
            let dy = wrap(x2 as f64 - center.1, g.ly, g.boundary_y);
            let d2 = dx * dx + dy * dy;
            r2.push(d2);
            mask.push(if d2 <= radius * radius { 1.0 } else { 0.0 });
        }
        Self {
            mask,
            r2,
            radius,
            center,
        }
    }

    /// Eigenvalues of `K† Π_R K` for orthonormal columns `K`: the weights of
    /// the best-localized orthonormal directions in `span K`, descending.
    pub fn localized_weights(&self, k: &ArrayView2<crate::operator::C64>) -> Result<Vec<f64>> {
        if k.ncols() == 0 {
            return Ok(Vec::new());
        }
        let mut weighted = k.to_owned();
        for (mut row, &w) in weighted.axis_iter_mut(Axis(0)).zip(&self.mask) {
            if w == 0.0 {
                row.fill(crate::operator::ZERO);
            }
        }
        let gram = linalg::mm_hn(k, &weighted.view());
        let mut w = HermitianOperator::with_tolerance(gram, "K†ΠK", 1e-8)?
            .eigenvalues()?
            .to_vec();
        w.reverse();
        Ok(w)
    }

    pub fn weight(&self, v: &ndarray::ArrayView1<crate::operator::C64>) -> f64 {
        v.iter().zip(&self.mask).map(|(z, m)| z.norm_sqr() * m).sum()
    }

    pub fn rms_radius(&self, v: &ndarray::ArrayView1<crate::operator::C64>) -> f64 {
        v.iter().zip(&self.r2).map(|(z, r)| z.norm_sqr() * r).sum::<f64>().sqrt()
    }
}

fn wrap(d: f64, len: usize, b: crate::lattice::Boundary) -> f64 {
    match b {
        crate::lattice::Boundary::Open => d,
        crate::lattice::Boundary::Periodic => {
            let l = len as f64;
            d - l * (d / l).round()
        }
    }
}

/// Parity plateau over a sweep ordered loosest first: the first run of
/// `points` consecutive rows with equal filtered parity, searched only among
/// rows looser than the first ambiguous one. Tighter tolerances merely drop
/// the unresolved modes, which certifies nothing.
pub fn plateau(sweep: &[SweepRow], points: usize) -> (Z2, Option<(f64, f64)>) {
    let usable = sweep.iter().position(|r| r.ambiguous > 0).unwrap_or(sweep.len());
    let sweep = &sweep[..usable];
    let mut start = 0;
    for i in 1..=sweep.len() {
        let breaks = i == sweep.len() || sweep[i].filtered % 2 != sweep[start].filtered % 2;
        if breaks {
            if i - start >= points {
                return (
                    Z2::from_parity(sweep[start].filtered),
                    Some((sweep[start].tol, sweep[i - 1].tol)),
                );
            }
            start = i;
        }
    }
    (Z2::Undetermined, None)
}

/// Defect-localized counting on the spectrum of a self-adjoint `A`.
pub fn count_near(
    dec: &SpectralDecomposition,
    target: f64,
    window: &DefectWindow,
    cfg: &CountingConfig,
) -> Result<IndexReport> {
    let values = dec.eigenvalues.as_slice().unwrap();
    let mut sweep = Vec::with_capacity(cfg.tol_sweep.len());
    for &tol in &cfg.tol_sweep {
        let idx = crate::operator::eigen_cluster(values, target, tol);
        let k = dec.columns(&idx);
        let weights = window.localized_weights(&k.view())?;
        sweep.push(SweepRow::classify(tol, idx.len(), &weights, cfg.localization_threshold));
    }
    let (z2, plateau) = plateau(&sweep, cfg.plateau_points);
    let exact_kernel = crate::operator::eigen_cluster(values, target, 1e-10).len();
    let loosest = cfg.tol_sweep.iter().cloned().fold(0.0, f64::max);
    let modes = crate::operator::eigen_cluster(values, target, loosest)
        .into_iter()
        .map(|i| {
            let v = dec.eigenvectors.column(i);
            ModeRow {
                eigenvalue: values[i],
                weight: window.weight(&v),
                radius: window.rms_radius(&v),
            }
        })
        .collect();
    Ok(IndexReport {
        z2,
        filter_radius: window.radius,
        localization_threshold: cfg.localization_threshold,
        defect: window.center,
        sweep,
        plateau,
        exact_kernel,
        modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(counts: &[usize]) -> Vec<SweepRow> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| SweepRow {
                tol: 10f64.powi(-(i as i32) - 1),
                cluster: c,
                filtered: c,
                ambiguous: 0,
            })
            .collect()
    }

    #[test]
    fn plateau_needs_two_points() {
        assert_eq!(plateau(&rows(&[1, 1, 0, 0]), 2).0, Z2::One);
        assert_eq!(plateau(&rows(&[3, 1, 0]), 2).0, Z2::One);
        assert_eq!(plateau(&rows(&[2, 1, 0, 1]), 2).0, Z2::Undetermined);
        assert_eq!(plateau(&rows(&[2, 1, 0, 0]), 2).0, Z2::Zero);
        assert_eq!(plateau(&rows(&[0, 0, 0]), 2), (Z2::Zero, Some((1e-1, 1e-3))));
    }

    #[test]
    fn ambiguous_rows_break_plateaus() {
        let mut r = rows(&[1, 1, 0, 0, 0]);
        r[2].ambiguous = 1;
        assert_eq!(plateau(&r, 2), (Z2::One, Some((1e-1, 1e-2))));
        r[1].ambiguous = 1;
        assert_eq!(plateau(&r, 2).0, Z2::Undetermined);
        let row = SweepRow::classify(0.1, 3, &[0.95, 0.5, 0.02], 0.9);
        assert_eq!((row.filtered, row.ambiguous), (1, 1));
    }

    #[test]
    fn window_weights_are_rotation_invariant() {
        use crate::operator::{c, orthonormalize};
        let g = LatticeGeometry::torus(4, 4);
        let win = DefectWindow::new(&g, (1.5, 1.5), 1.0);
        let n = g.dim();
        let inside = (0..n).find(|&i| win.mask[i] == 1.0).unwrap();
        let outside = (0..n).find(|&i| win.mask[i] == 0.0).unwrap();
        let mut k = ndarray::Array2::zeros((n, 2));
        k[[inside, 0]] = c(0.6, 0.0);
        k[[outside, 0]] = c(0.8, 0.0);
        k[[inside, 1]] = c(0.8, 0.0);
        k[[outside, 1]] = c(-0.6, 0.0);
        let k = orthonormalize(&k, 1e-12);
        let w = win.localized_weights(&k.view()).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(CountingConfig::default().validate().is_ok());
        let bad = CountingConfig {
            tol_sweep: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
