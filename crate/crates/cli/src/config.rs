//! Run configuration: one TOML file resolves every command.

use std::path::{Path, PathBuf};

use kramers_core::edge::EdgeConfig;
use kramers_core::index::CountingConfig;
use kramers_core::lattice::ModelSpec;
use kramers_core::spectra::SpectraConfig;
use kramers_core::wold::DEFAULT_CLUSTER_TOL;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Fermi level.
    pub mu: f64,
    pub model: Option<ModelSpec>,
    pub tolerance: ToleranceBlock,
    pub edge: EdgeConfig,
    pub spectra: SpectraConfig,
    pub wold: WoldBlock,
    pub scan: ScanBlock,
    pub output: OutputBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            model: None,
            tolerance: ToleranceBlock::default(),
            edge: EdgeConfig::default(),
            spectra: SpectraConfig::default(),
            wold: WoldBlock::default(),
            scan: ScanBlock::default(),
            output: OutputBlock::default(),
        }
    }
}

/// Counting and clustering tolerances shared by the bulk and edge indices
/// and the decoupler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceBlock {
    pub cluster_tol: f64,
    pub tol_sweep: Vec<f64>,
    pub plateau_points: usize,
    pub filter_radius: Option<f64>,
    pub localization_threshold: f64,
}

impl Default for ToleranceBlock {
    fn default() -> Self {
        let c = CountingConfig::default();
        Self {
            cluster_tol: DEFAULT_CLUSTER_TOL,
            tol_sweep: c.tol_sweep,
            plateau_points: c.plateau_points,
            filter_radius: c.filter_radius,
            localization_threshold: c.localization_threshold,
        }
    }
}

impl ToleranceBlock {
    pub fn counting(&self) -> CountingConfig {
        CountingConfig {
            filter_radius: self.filter_radius,
            localization_threshold: self.localization_threshold,
            tol_sweep: self.tol_sweep.clone(),
            plateau_points: self.plateau_points,
        }
    }
}

/// Source of the `(U, P, τ)` pair for `wold run`. A pair file wins over
/// the fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WoldBlock {
    pub input: Option<PathBuf>,
    pub fixture: Fixture,
    /// Chain depth for an odd pair; `None` stops after classification.
    pub depth: Option<usize>,
}

impl Default for WoldBlock {
    fn default() -> Self {
        Self {
            input: None,
            fixture: Fixture::Model,
            depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Fixture {
    /// Flux insertion and Fermi projection of the configured model's torus.
    Model,
    /// Spin-doubled ring shift with the arc `0..=arc` as projection.
    Ring { sites: usize, arc: usize },
    Random { dim: usize, seed: u64 },
    /// Ring shift chain plus `trivial_pairs` commuting Kramers pairs.
    Synthetic {
        sites: usize,
        arc: usize,
        #[serde(default)]
        trivial_pairs: usize,
    },
}

/// Parameter grid of `index compare`. Each `m` yields one clean row (when
/// `include_clean`) and one row per disorder setting and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanBlock {
    /// Empty means the model's own `m`.
    pub m: Vec<f64>,
    pub include_clean: bool,
    pub disorder: Vec<Disorder>,
    pub seeds: Vec<u64>,
}

impl Default for ScanBlock {
    fn default() -> Self {
        Self {
            m: Vec::new(),
            include_clean: true,
            disorder: Vec::new(),
            seeds: vec![1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disorder {
    pub lambda_r: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: kramers_core::Error| CliError::Config(e.to_string());
        if !self.mu.is_finite() {
            return Err(CliError::Config("mu must be finite".into()));
        }
        if let Some(m) = &self.model {
            m.validate().map_err(bad)?;
        }
        self.tolerance.counting().validate().map_err(bad)?;
        if !(self.tolerance.cluster_tol > 0.0 && self.tolerance.cluster_tol < 0.5) {
            return Err(CliError::Config("cluster_tol must lie in (0, 0.5)".into()));
        }
        self.edge.validate().map_err(bad)?;
        self.spectra.validate().map_err(bad)?;
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats must not be empty".into()));
        }
        if self.scan.seeds.is_empty() && !self.scan.disorder.is_empty() {
            return Err(CliError::Config("scan.disorder needs at least one seed".into()));
        }
        if self.scan.m.iter().any(|m| !m.is_finite()) {
            return Err(CliError::Config("scan.m must be finite".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [model] block".into()))
    }

    /// Scan rows in emission order.
    pub fn scan_specs(&self) -> Result<Vec<ModelSpec>, CliError> {
        let base = self.model()?;
        let ms = if self.scan.m.is_empty() { vec![base.m] } else { self.scan.m.clone() };
        let mut rows = Vec::new();
        for m in ms {
            let clean = ModelSpec {
                m,
                lambda_r: 0.0,
                w: 0.0,
                seed: 0,
                ..base.clone()
            };
            if self.scan.include_clean {
                rows.push(clean.clone());
            }
            for d in &self.scan.disorder {
                for &seed in &self.scan.seeds {
                    rows.push(clean.clone().with_disorder(d.lambda_r, d.w, seed));
                }
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, toml::de::Error> {
        toml::from_str(text)
    }

    const SAMPLE: &str = r#"
mu = 0.0

[model]
m = 1.0
Lx = 8
Ly = 8
boundary_x = "periodic"
boundary_y = "periodic"

[tolerance]
tol_sweep = [0.1, 0.01]

[wold]
fixture = { kind = "ring", sites = 12, arc = 5 }

[scan]
m = [0.5, 3.0]
disorder = [{ lambda_r = 0.3, w = 0.5 }]
seeds = [1, 2]
"#;

    #[test]
    fn sample_parses_and_round_trips() {
        let cfg = parse(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.wold.fixture, Fixture::Ring { sites: 12, arc: 5 });
        let again = parse(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn scan_rows_are_ordered() {
        let cfg = parse(SAMPLE).unwrap();
        let rows = cfg.scan_specs().unwrap();
        let keys: Vec<(f64, u64, f64)> = rows.iter().map(|r| (r.m, r.seed, r.w)).collect();
        assert_eq!(keys, vec![(0.5, 0, 0.0), (0.5, 1, 0.5), (0.5, 2, 0.5), (3.0, 0, 0.0), (3.0, 1, 0.5), (3.0, 2, 0.5)]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[model]\nm = 1.0\nLx = 4\nLy = 4\nboundary_x = \"periodic\"\nboundary_y = \"open\"\nbogus = 1\n").is_err());
        assert!(parse("typo = 3\n").is_err());
    }
}
