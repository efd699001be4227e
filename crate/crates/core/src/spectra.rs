//! Finite-size proxies for edge spectrum filling the bulk gap: cylinder
//! bands resolved in the periodic momentum, gap-filling statistics, and
//! wave-packet spreading along the edge. None of these decides absolute
//! continuity; they are labelled proxies throughout.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::edge::{EdgeConfig, GapFunction};
use crate::error::{Error, Result};
use crate::lattice::{build_half_space_hamiltonian, build_time_reversal, hopping_blocks, Boundary, ModelSpec, ORBITALS};
use crate::operator::linalg::{eigh, eigh_window};
use crate::operator::{dagger, CMat, HermitianOperator, C64};

/// Tuning of the spectral proxies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraConfig {
    /// Explicit gap window `(a, b)`; otherwise a fraction of the torus gap.
    pub delta: Option<(f64, f64)>,
    pub delta_fraction: f64,
    pub k_points: usize,
    /// Gap-filling bins per `|Δ|`.
    pub bins: usize,
    /// Rows next to each open edge counted as edge.
    pub edge_rows: usize,
    /// Edge weight above which a state is edge-tagged.
    pub edge_threshold: f64,
    /// Lattice site of the transport seed; default `(Lx/2, 0)`.
    pub edge_site: Option<usize>,
    pub time_steps: usize,
    /// Last recorded time as a multiple of the wrap time `Lx/(2 v_max)`.
    pub time_span: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self {
            delta: None,
            delta_fraction: 0.9,
            k_points: 128,
            bins: 50,
            edge_rows: 2,
            edge_threshold: 0.5,
            edge_site: None,
            time_steps: 40,
            time_span: 1.5,
        }
    }
}

impl SpectraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_points < 2 || self.bins == 0 || self.edge_rows == 0 || self.time_steps < 3 {
            return Err(Error::InvalidArgument(
                "k_points ≥ 2, bins ≥ 1, edge_rows ≥ 1, time_steps ≥ 3 required".into(),
            ));
        }
        if !(self.edge_threshold > 0.0 && self.edge_threshold < 1.0) || !(self.time_span > 0.0) {
            return Err(Error::InvalidArgument("edge_threshold in (0, 1), time_span > 0 required".into()));
        }
        Ok(())
    }

    pub fn resolve_delta(&self, spec: &ModelSpec, mu: f64) -> Result<GapFunction> {
        let ecfg = EdgeConfig {
            delta: self.delta,
            delta_fraction: self.delta_fraction,
            ..EdgeConfig::default()
        };
        ecfg.validate()?;
        ecfg.resolve_delta(spec, mu)
    }
}

fn clean_cylinder(spec: &ModelSpec) -> Result<ModelSpec> {
    spec.validate()?;
    if spec.w != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "band structure needs translation invariance along x₁, got disorder w = {}",
            spec.w
        )));
    }
    Ok(spec.as_cylinder())
}

/// `H(k)` on the `Ly·ORBITALS`-dimensional fiber of the clean cylinder.
pub fn fiber_hamiltonian(spec: &ModelSpec, k: f64) -> Result<CMat> {
    let cyl = clean_cylinder(spec)?;
    let blocks = hopping_blocks(cyl.m, cyl.lambda_r);
    let phase = C64::from_polar(1.0, k);
    let hx = &blocks.hop_x.mapv(|z| z * phase);
    let diag = &blocks.onsite + hx + &dagger(&hx.view());
    let hy_dag = dagger(&blocks.hop_y.view());
    let n = cyl.ly * ORBITALS;
    let mut h = Array2::<C64>::zeros((n, n));
    for r in 0..cyl.ly {
        let o = r * ORBITALS;
        h.slice_mut(ndarray::s![o..o + ORBITALS, o..o + ORBITALS]).assign(&diag);
        if r + 1 < cyl.ly {
            let p = o + ORBITALS;
            h.slice_mut(ndarray::s![o..o + ORBITALS, p..p + ORBITALS]).assign(&blocks.hop_y);
            h.slice_mut(ndarray::s![p..p + ORBITALS, o..o + ORBITALS]).assign(&hy_dag);
        }
    }
    Ok(h)
}

/// Bands `E_j(k)` of the clean cylinder on `k = 2πi/N`, ascending per `k`,
/// with the weight of each state within `edge_rows` rows of an open edge.
#[derive(Debug, Clone, Serialize)]
pub struct BandStructure {
    pub k: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
    pub edge_weight: Vec<Vec<f64>>,
    pub ly: usize,
    pub edge_rows: usize,
    pub delta: (f64, f64),
}

pub fn cylinder_bands(spec: &ModelSpec, k_points: usize, edge_rows: usize, delta: (f64, f64)) -> Result<BandStructure> {
    if k_points < 2 {
        return Err(Error::InvalidArgument("need at least two k points".into()));
    }
    let ly = spec.ly;
    let mut k = Vec::with_capacity(k_points);
    let mut energies = Vec::with_capacity(k_points);
    let mut edge_weight = Vec::with_capacity(k_points);
    for i in 0..k_points {
        let kk = 2.0 * PI * i as f64 / k_points as f64;
        let h = fiber_hamiltonian(spec, kk)?;
        let (w, v) = eigh(&h.view(), true)?;
        let v = v.expect("eigenvectors requested");
        let weights = v
            .axis_iter(Axis(1))
            .map(|col| {
                col.iter()
                    .enumerate()
                    .filter(|(idx, _)| {
                        let row = idx / ORBITALS;
                        row < edge_rows || row + edge_rows >= ly
                    })
                    .map(|(_, z)| z.norm_sqr())
                    .sum()
            })
            .collect();
        k.push(kk);
        energies.push(w.to_vec());
        edge_weight.push(weights);
    }
    Ok(BandStructure {
        k,
        energies,
        edge_weight,
        ly,
        edge_rows,
        delta,
    })
}

impl BandStructure {
    pub fn bands(&self) -> usize {
        self.energies.first().map_or(0, |e| e.len())
    }

    /// `max |E_j(k) − E_j(2π − k)|` over the sorted levels.
    pub fn reflection_residual(&self) -> f64 {
        let n = self.k.len();
        (0..n)
            .flat_map(|i| {
                let j = (n - i) % n;
                self.energies[i].iter().zip(&self.energies[j]).map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Largest splitting within consecutive level pairs at `k = 0` and,
    /// when on the grid, `k = π`; zero for exact Kramers doublets.
    pub fn kramers_residual(&self) -> f64 {
        let n = self.k.len();
        let mut trims = vec![0];
        if n % 2 == 0 {
            trims.push(n / 2);
        }
        trims
            .into_iter()
            .flat_map(|i| self.energies[i].chunks(2).map(|p| if p.len() == 2 { (p[1] - p[0]).abs() } else { 0.0 }))
            .fold(0.0, f64::max)
    }

    /// The same at the time-reversal momenta, restricted to edge-tagged
    /// levels inside `Δ`.
    pub fn edge_kramers_residual(&self, threshold: f64) -> f64 {
        let n = self.k.len();
        let mut trims = vec![0];
        if n % 2 == 0 {
            trims.push(n / 2);
        }
        let (a, b) = self.delta;
        let mut worst = 0.0f64;
        for i in trims {
            let e = &self.energies[i];
            for p in (0..e.len() - 1).step_by(2) {
                let tagged = self.edge_weight[i][p] >= threshold || self.edge_weight[i][p + 1] >= threshold;
                if tagged && e[p] > a && e[p] < b {
                    worst = worst.max((e[p + 1] - e[p]).abs());
                }
            }
        }
        worst
    }

    /// Levels inside `Δ` over the whole `k` grid.
    pub fn states_in_delta(&self) -> usize {
        let (a, b) = self.delta;
        self.energies.iter().flatten().filter(|&&e| e > a && e < b).count()
    }

    /// Fraction of `Δ` swept by edge-tagged branches: the union over bands
    /// and neighbouring grid momenta of `[E_j(k_i), E_j(k_{i+1})]` with both
    /// ends tagged.
    pub fn edge_coverage(&self, threshold: f64) -> f64 {
        let (a, b) = self.delta;
        let n = self.k.len();
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            for band in 0..self.bands() {
                if self.edge_weight[i][band] < threshold || self.edge_weight[j][band] < threshold {
                    continue;
                }
                let (lo, hi) = {
                    let (x, y) = (self.energies[i][band], self.energies[j][band]);
                    (x.min(y).max(a), x.max(y).min(b))
                };
                if hi > lo {
                    pieces.push((lo, hi));
                }
            }
        }
        union_length(&mut pieces) / (b - a)
    }

    /// `max |∂E/∂k|` by forward differences over all bands.
    pub fn max_velocity(&self) -> f64 {
        let n = self.k.len();
        let dk = 2.0 * PI / n as f64;
        let mut v = 0.0f64;
        for i in 0..n {
            let j = (i + 1) % n;
            for band in 0..self.bands() {
                v = v.max((self.energies[j][band] - self.energies[i][band]).abs() / dk);
            }
        }
        v
    }
}

fn union_length(pieces: &mut [(f64, f64)]) -> f64 {
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for &(lo, hi) in pieces.iter() {
        current = match current {
            Some((a, b)) if lo <= b => Some((a, b.max(hi))),
            Some((a, b)) => {
                total += b - a;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a, b)) = current {
        total += b - a;
    }
    total
}

/// Fraction of the `bins` equal bins of `Δ = (a, b)` holding at least one
/// eigenvalue.
pub fn gap_filling_from_eigenvalues(values: &[f64], delta: (f64, f64), bins: usize) -> f64 {
    let (a, b) = delta;
    if bins == 0 || !(b > a) {
        return 0.0;
    }
    let width = (b - a) / bins as f64;
    let mut hit = vec![false; bins];
    for &e in values {
        if e >= a && e < b {
            let i = (((e - a) / width) as usize).min(bins - 1);
            hit[i] = true;
        }
    }
    hit.iter().filter(|&&h| h).count() as f64 / bins as f64
}

/// Fraction of resolution-width bins of `Δ` that contain an eigenvalue of
/// `h`; the bin count is `⌈|Δ|/resolution⌉`.
pub fn gap_filling_fraction(h: &HermitianOperator, delta: (f64, f64), resolution: f64) -> Result<f64> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution {resolution} must be positive")));
    }
    let (a, b) = delta;
    if !(b > a) {
        return Err(Error::InvalidArgument(format!("empty window ({a}, {b})")));
    }
    let bins = ((b - a) / resolution).round().max(1.0) as usize;
    let (w, _) = eigh_window(&h.matrix().view(), a - 1e-12, b)?;
    Ok(gap_filling_from_eigenvalues(w.as_slice().unwrap(), delta, bins))
}

// ---------------------------------------------------------------------------
// Transport

/// Least-squares slope of `ln y` against `ln t` with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerFit {
    pub alpha: f64,
    pub stderr: f64,
    /// `alpha ± 2·stderr`
    pub band: (f64, f64),
    pub points: usize,
}

pub fn power_fit(t: &[f64], y: &[f64]) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&t, &y)| t > 0.0 && y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::EmptyWindow(t.last().copied().unwrap_or(0.0)));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = sxy / sxx;
    let icept = my - alpha * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icept - alpha * p.0).powi(2)).sum();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(PowerFit {
        alpha,
        stderr,
        band: (alpha - 2.0 * stderr, alpha + 2.0 * stderr),
        points: n,
    })
}

/// Spreading of a gap-filtered edge state along the periodic direction.
#[derive(Debug, Clone, Serialize)]
pub struct TransportTrace {
    pub times: Vec<f64>,
    /// `⟨(X₁ − ⟨X₁⟩)²⟩(t)` with `X₁` the minimal-image displacement from the seed column
    pub spread: Vec<f64>,
    /// `⟨X₁⟩(t)` in the same displacement coordinate
    pub mean: Vec<f64>,
    pub edge_site: usize,
    pub filtered_norm: f64,
    pub v_max: f64,
    /// `Lx / (2 v_max)`
    pub wrap_time: f64,
    /// growth exponent of `spread(t) − spread(0)` over `0 < t ≤ wrap_time`
    pub fit: PowerFit,
    /// `max_t |‖ψ(t)‖ − 1|`
    pub norm_drift: f64,
    /// `max_t |⟨ψ(t), Ĥψ(t)⟩ − ⟨ψ(0), Ĥψ(0)⟩|`
    pub energy_drift: f64,
}

/// Gap eigenpairs of the cylinder Hamiltonian together with its matrix.
#[derive(Debug, Clone)]
pub struct GapStates {
    pub spec: ModelSpec,
    pub h: CMat,
    pub energies: Array1<f64>,
    pub vectors: CMat,
    pub delta: (f64, f64),
}

pub fn gap_states(spec: &ModelSpec, delta: (f64, f64)) -> Result<GapStates> {
    let cyl = spec.as_cylinder();
    let h = build_half_space_hamiltonian(&cyl)?.into_matrix();
    let (energies, vectors) = eigh_window(&h.view(), delta.0, delta.1)?;
    Ok(GapStates {
        spec: cyl,
        h,
        energies,
        vectors,
        delta,
    })
}

impl GapStates {
    pub fn default_edge_site(&self) -> usize {
        self.spec.lx / 2
    }

    /// `P_Δ e` renormalized, with `e` the spin-balanced unit vector on
    /// orbital 0 of `site`, and the norm before renormalizing. Both spins
    /// are seeded so the packet splits into the two helical movers.
    pub fn filtered_seed(&self, site: usize) -> Result<(Array1<C64>, f64)> {
        let sites = self.h.nrows() / ORBITALS;
        if site >= sites {
            return Err(Error::InvalidArgument(format!("edge site {site} outside {sites} sites")));
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let up = self.vectors.row(site * ORBITALS);
        let down = self.vectors.row(site * ORBITALS + 1);
        let coeffs = (&up + &down).mapv(|z| z.conj() * r);
        let psi = self.vectors.dot(&coeffs);
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 0.1 {
            return Err(Error::NoGapStates(norm));
        }
        Ok((psi.mapv(|z| z / norm), norm))
    }
}

fn column_of(index: usize, lx: usize) -> usize {
    (index / ORBITALS) % lx
}

fn displacement(col: usize, origin: usize, lx: usize) -> f64 {
    let d = (col + lx - origin) % lx;
    if 2 * d > lx {
        d as f64 - lx as f64
    } else {
        d as f64
    }
}

/// `(⟨X₁⟩, ⟨(X₁ − ⟨X₁⟩)²⟩)` with minimal-image displacement from `origin`.
fn moments(psi: &Array1<C64>, origin: usize, lx: usize) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut tot = 0.0;
    for (i, z) in psi.iter().enumerate() {
        let p = z.norm_sqr();
        let x = displacement(column_of(i, lx), origin, lx);
        m1 += p * x;
        m2 += p * x * x;
        tot += p;
    }
    let mean = m1 / tot;
    (mean, (m2 / tot - mean * mean).max(0.0))
}

/// Moments of `e^{−iĤt}ψ₀` for `ψ₀ ∈ Ran P_Δ`, evolved in the gap
/// eigenbasis, with the norm and energy drifts.
#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub spread: Vec<f64>,
    pub norm_drift: f64,
    pub energy_drift: f64,
}

pub fn evolve_moments(states: &GapStates, psi0: &Array1<C64>, site: usize, times: &[f64]) -> Moments {
    let lx = states.spec.lx;
    let origin = site % lx;
    let coeffs = states.vectors.t().mapv(|z| z.conj()).dot(psi0);
    let e0 = expectation(&states.h, psi0);
    let mut out = Moments {
        mean: Vec::with_capacity(times.len()),
        spread: Vec::with_capacity(times.len()),
        norm_drift: 0.0,
        energy_drift: 0.0,
    };
    for &t in times {
        let phased: Array1<C64> = coeffs
            .iter()
            .zip(states.energies.iter())
            .map(|(cf, &e)| cf * C64::from_polar(1.0, -e * t))
            .collect();
        let psi = states.vectors.dot(&phased);
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        out.norm_drift = out.norm_drift.max((norm - 1.0).abs());
        out.energy_drift = out.energy_drift.max((expectation(&states.h, &psi) - e0).abs());
        let (m, s) = moments(&psi, origin, lx);
        out.mean.push(m);
        out.spread.push(s);
    }
    out
}

/// Trace of the seed at `site`; the exponent is fitted to
/// `spread(t) − spread(0)` over `0 < t ≤ Lx/(2 v_max)`, before the two
/// movers meet again across the circumference.
pub fn evolve_trace(
    states: &GapStates,
    psi0: &Array1<C64>,
    edge_site: usize,
    filtered_norm: f64,
    times: &[f64],
    v_max: f64,
) -> Result<TransportTrace> {
    let mo = evolve_moments(states, psi0, edge_site, times);
    let wrap_time = states.spec.lx as f64 / (2.0 * v_max);
    let s0 = mo.spread.first().copied().unwrap_or(0.0);
    let (ft, fy): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&mo.spread)
        .filter(|(&t, _)| t > 0.0 && t <= wrap_time)
        .map(|(&t, &s)| (t, s - s0))
        .unzip();
    if ft.len() < 3 {
        return Err(Error::EmptyWindow(wrap_time));
    }
    let fit = power_fit(&ft, &fy)?;
    Ok(TransportTrace {
        times: times.to_vec(),
        spread: mo.spread,
        mean: mo.mean,
        edge_site,
        filtered_norm,
        v_max,
        wrap_time,
        fit,
        norm_drift: mo.norm_drift,
        energy_drift: mo.energy_drift,
    })
}

fn expectation(h: &CMat, psi: &Array1<C64>) -> f64 {
    let hp = h.dot(psi);
    psi.iter().zip(hp.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re
}

/// Equally spaced times from 0 to `span · wrap_time`.
pub fn default_times(wrap_time: f64, steps: usize, span: f64) -> Vec<f64> {
    (0..=steps).map(|i| span * wrap_time * i as f64 / steps as f64).collect()
}

/// Transport from the gap-filtered seed at `edge_site`; `v_max` comes from
/// the clean bands of the same cylinder (for disordered specs, of its
/// clean counterpart).
pub fn ballistic_transport(
    spec: &ModelSpec,
    mu: f64,
    cfg: &SpectraConfig,
    times: Option<&[f64]>,
) -> Result<(TransportTrace, GapStates)> {
    cfg.validate()?;
    let gf = cfg.resolve_delta(spec, mu)?;
    let delta = (gf.a, gf.b);
    let states = gap_states(spec, delta)?;
    let site = cfg.edge_site.unwrap_or_else(|| states.default_edge_site());
    let (psi0, norm) = states.filtered_seed(site)?;
    let v_max = clean_velocity(spec, cfg)?;
    let owned;
    let times = match times {
        Some(t) => t,
        None => {
            owned = default_times(spec.lx as f64 / (2.0 * v_max), cfg.time_steps, cfg.time_span);
            &owned
        }
    };
    let trace = evolve_trace(&states, &psi0, site, norm, times, v_max)?;
    Ok((trace, states))
}

fn clean_velocity(spec: &ModelSpec, cfg: &SpectraConfig) -> Result<f64> {
    let clean = ModelSpec { w: 0.0, ..spec.clone() };
    let bands = cylinder_bands(&clean, cfg.k_points, cfg.edge_rows, (0.0, 0.0))?;
    Ok(bands.max_velocity())
}

/// Time-reversal covariance of the dynamics: `e^{−iĤt}τψ₀ = τe^{iĤt}ψ₀`,
/// so the trace of `τψ₀` at `t` is the trace of `ψ₀` at `−t`. Returns
/// `max_t (|spread′(t) − spread(−t)| + |mean′(t) − mean(−t)|)`.
pub fn time_reversal_pairing(states: &GapStates, trace: &TransportTrace) -> Result<f64> {
    let (psi0, _) = states.filtered_seed(trace.edge_site)?;
    let tau = build_time_reversal(&states.spec.geometry()?)?;
    let reversed = tau.apply_vec(&psi0.view());
    let forward = evolve_moments(states, &reversed, trace.edge_site, &trace.times);
    let back_times: Vec<f64> = trace.times.iter().map(|t| -t).collect();
    let backward = evolve_moments(states, &psi0, trace.edge_site, &back_times);
    Ok(forward
        .spread
        .iter()
        .zip(&backward.spread)
        .zip(forward.mean.iter().zip(&backward.mean))
        .map(|((s, s2), (m, m2))| (s - s2).abs() + (m - m2).abs())
        .fold(0.0, f64::max))
}

/// Summary of the band and gap-filling proxies on one clean cylinder.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub delta: (f64, f64),
    pub k_points: usize,
    pub states_in_delta: usize,
    pub edge_coverage: f64,
    pub kramers_residual: f64,
    pub edge_kramers_residual: f64,
    pub reflection_residual: f64,
    pub max_velocity: f64,
    /// gap filling of the real-space cylinder at resolution `|Δ|/bins`
    pub gap_filling: f64,
    pub bins: usize,
}

pub fn spectrum_report(spec: &ModelSpec, mu: f64, cfg: &SpectraConfig) -> Result<(SpectrumReport, BandStructure)> {
    cfg.validate()?;
    if spec.boundary_x != Boundary::Periodic {
        return Err(Error::Geometry("cylinder bands need periodic x₁".into()));
    }
    let gf = cfg.resolve_delta(spec, mu)?;
    let delta = (gf.a, gf.b);
    let bands = cylinder_bands(spec, cfg.k_points, cfg.edge_rows, delta)?;
    let h = build_half_space_hamiltonian(&spec.as_cylinder())?;
    let gap_filling = gap_filling_fraction(&h, delta, (delta.1 - delta.0) / cfg.bins as f64)?;
    Ok((
        SpectrumReport {
            delta,
            k_points: cfg.k_points,
            states_in_delta: bands.states_in_delta(),
            edge_coverage: bands.edge_coverage(cfg.edge_threshold),
            kramers_residual: bands.kramers_residual(),
            edge_kramers_residual: bands.edge_kramers_residual(cfg.edge_threshold),
            reflection_residual: bands.reflection_residual(),
            max_velocity: bands.max_velocity(),
            gap_filling,
            bins: cfg.bins,
        },
        bands,
    ))
}
