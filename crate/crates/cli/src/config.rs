//! Run configuration: TOML sections with every key optional and unknown keys rejected.

use crate::error::CliError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scri_core::coefficients::CartesianCoeffs;
use scri_core::evolution::{EvolveOptions, Grid};
use scri_core::initial_data::{DataTransform, PhysicalData};
use scri_core::symmetrizer::{ChiParams, ConstantsConfig, RunConstants, Transcription};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub constants: ConstantsSection,
    pub coefficients: CoefficientsSection,
    pub data: DataSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    pub flow: FlowSection,
    pub mms: MmsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub m: u32,
    pub rho0: f64,
    pub rho1: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    pub t_min: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        let c = ConstantsConfig::default();
        Self { m: c.m, rho0: c.chi.rho0, rho1: c.chi.rho1, alpha: c.chi.alpha, t0: None, t_min: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptionName {
    #[default]
    Displayed,
    ChainConsistent,
}

impl From<TranscriptionName> for Transcription {
    fn from(t: TranscriptionName) -> Self {
        match t {
            TranscriptionName::Displayed => Transcription::Displayed,
            TranscriptionName::ChainConsistent => Transcription::ChainConsistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    pub kappa: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub transcription: TranscriptionName,
    pub samples_per_axis: usize,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let c = ConstantsConfig::default();
        Self {
            kappa: c.kappa,
            nu: c.nu,
            epsilon: c.epsilon,
            zeta: c.zeta,
            transcription: TranscriptionName::Displayed,
            samples_per_axis: c.samples_per_axis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Zero,
    MinkowskiNull,
    Random,
    RandomNull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientsSection {
    pub n: usize,
    /// Lines `K I J mu nu value`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub scale: f64,
}

impl Default for CoefficientsSection {
    fn default() -> Self {
        Self { n: 1, entries: None, file: None, preset: None, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformName {
    #[default]
    General,
    Displayed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// One expression per unknown; empty means zero data.
    pub vbar: Vec<String>,
    pub wbar: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zbar: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    pub transform: TransformName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Spherical,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub mode: ModeName,
    pub n_rho: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { mode: ModeName::Spherical, n_rho: 128, n_theta: 9, n_phi: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub ds: f64,
    pub cfl_safety: f64,
    pub min_ds: f64,
    pub ko_eps: f64,
    pub blowup_threshold: f64,
    /// Energy record cadence in accepted steps.
    pub energy_every: usize,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let e = EvolveOptions::default();
        Self {
            ds: e.ds,
            cfl_safety: e.cfl_safety,
            min_ds: e.min_ds,
            ko_eps: 0.5,
            blowup_threshold: e.blowup_threshold,
            energy_every: 1,
            snapshot_times: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    /// Spatial point of the asymptotic equation.
    pub rho: f64,
    pub radius: f64,
    pub samples: usize,
    pub t_min: f64,
    pub positive_cone: bool,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self { rho: 0.997, radius: 0.01, samples: 16, t_min: 1e-6, positive_cone: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsSection {
    pub levels: Vec<usize>,
}

impl Default for MmsSection {
    fn default() -> Self {
        Self { levels: vec![64, 128, 256] }
    }
}

/// A parsed configuration together with the directory relative paths refer to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub cfg: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn from_str(text: &str, base: &Path) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { cfg, base: base.to_path_buf() })
    }

    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self { cfg: RunConfig::default(), base: PathBuf::from(".") }),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Self::from_str(&text, &base)
            }
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn read(&self, p: &Path) -> Result<String, CliError> {
        let full = self.resolve(p);
        std::fs::read_to_string(&full).map_err(|e| CliError::Config(format!("{}: {e}", full.display())))
    }

    pub fn seed(&self) -> u64 {
        self.cfg.solver.seed
    }

    pub fn chi(&self) -> ChiParams {
        let d = &self.cfg.domain;
        ChiParams { rho0: d.rho0, rho1: d.rho1, alpha: d.alpha }
    }

    pub fn transcription(&self) -> Transcription {
        self.cfg.constants.transcription.into()
    }

    /// Derived constants; every inequality is checked here.
    pub fn constants(&self) -> Result<RunConstants, CliError> {
        let d = &self.cfg.domain;
        let k = &self.cfg.constants;
        Ok(RunConstants::new(&ConstantsConfig {
            m: d.m,
            chi: self.chi(),
            t0: d.t0,
            kappa: k.kappa,
            nu: k.nu,
            epsilon: k.epsilon,
            zeta: k.zeta,
            transcription: self.transcription(),
            samples_per_axis: k.samples_per_axis,
        })?)
    }

    pub fn coefficients(&self) -> Result<CartesianCoeffs, CliError> {
        let c = &self.cfg.coefficients;
        let sources = [c.entries.is_some(), c.file.is_some(), c.preset.is_some()].iter().filter(|b| **b).count();
        if sources > 1 {
            return Err(CliError::Config("[coefficients] takes at most one of entries, file, preset".into()));
        }
        if c.n == 0 {
            return Err(CliError::Config("[coefficients] n must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        Ok(if let Some(text) = &c.entries {
            CartesianCoeffs::parse(text, c.n)?
        } else if let Some(f) = &c.file {
            CartesianCoeffs::parse(&self.read(f)?, c.n)?
        } else {
            match c.preset.unwrap_or_default() {
                Preset::Zero => CartesianCoeffs::zeros(c.n),
                Preset::MinkowskiNull => {
                    if c.n != 1 {
                        return Err(CliError::Config("minkowski_null preset has n = 1".into()));
                    }
                    CartesianCoeffs::minkowski_null()
                }
                Preset::Random => CartesianCoeffs::random(c.n, c.scale, &mut rng),
                Preset::RandomNull => CartesianCoeffs::random_null(c.n, c.scale, &mut rng),
            }
        })
    }

    pub fn data(&self) -> Result<PhysicalData, CliError> {
        let d = &self.cfg.data;
        let n = self.cfg.coefficients.n;
        let data = if let Some(f) = &d.csv {
            if !d.vbar.is_empty() || !d.wbar.is_empty() || d.zbar.is_some() {
                return Err(CliError::Config("[data] takes either expressions or csv".into()));
            }
            PhysicalData::from_csv(&self.read(f)?)?
        } else if d.vbar.is_empty() && d.wbar.is_empty() && d.zbar.is_none() {
            PhysicalData::zeros(n)
        } else {
            let v: Vec<&str> = d.vbar.iter().map(String::as_str).collect();
            let w: Vec<&str> = d.wbar.iter().map(String::as_str).collect();
            let z: Option<Vec<&str>> = d.zbar.as_ref().map(|z| z.iter().map(String::as_str).collect());
            PhysicalData::from_exprs(&v, &w, z.as_deref())?
        };
        if data.n_unknowns() != n {
            return Err(CliError::Config(format!("[data] has {} unknowns, [coefficients] n = {n}", data.n_unknowns())));
        }
        Ok(data)
    }

    pub fn transform(&self) -> DataTransform {
        match self.cfg.data.transform {
            TransformName::General => DataTransform::General,
            TransformName::Displayed => DataTransform::Displayed,
        }
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = &self.cfg.grid;
        Ok(match g.mode {
            ModeName::Spherical => Grid::spherical(&self.chi(), g.n_rho)?,
            ModeName::Full => Grid::full(&self.chi(), g.n_rho, g.n_theta, g.n_phi)?,
        })
    }

    pub fn evolve_options(&self, keep_tail: usize) -> EvolveOptions {
        let s = &self.cfg.solver;
        EvolveOptions {
            t_min: self.cfg.domain.t_min,
            ds: s.ds,
            cfl_safety: s.cfl_safety,
            min_ds: s.min_ds,
            snapshot_times: s.snapshot_times.clone(),
            store_every: 0,
            keep_tail,
            blowup_threshold: s.blowup_threshold,
        }
    }

    /// The configuration with relative input paths made absolute, for the run-directory copy.
    pub fn effective(&self) -> RunConfig {
        let mut cfg = self.cfg.clone();
        let abs = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                let full = self.resolve(x);
                *x = std::fs::canonicalize(&full).unwrap_or(full);
            }
        };
        abs(&mut cfg.coefficients.file);
        abs(&mut cfg.data.csv);
        cfg
    }

    pub fn is_spherical(&self) -> bool {
        self.cfg.grid.mode == ModeName::Spherical
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Loaded::from_str("[domain]\nbogus = 1\n", Path::new(".")).is_err());
        assert!(Loaded::from_str("[nonsense]\n", Path::new(".")).is_err());
    }

    #[test]
    fn constraint_violations_are_config_errors() {
        let l = Loaded::from_str("[constants]\nkappa = 0.3\n", Path::new(".")).unwrap();
        assert!(matches!(l.constants(), Err(CliError::Config(_))));
    }

    #[test]
    fn coefficient_sources_are_exclusive() {
        let l = Loaded::from_str("[coefficients]\npreset = \"zero\"\nentries = \"0 0 0 0 0 1\"\n", Path::new(".")).unwrap();
        assert!(l.coefficients().is_err());
        let l = Loaded::from_str("[coefficients]\nentries = \"0 0 0 0 0 1\"\n", Path::new(".")).unwrap();
        assert!(!l.coefficients().unwrap().is_zero());
    }

    #[test]
    fn data_count_must_match_coefficients() {
        let l = Loaded::from_str("[coefficients]\nn = 2\n[data]\nvbar = [\"0\"]\nwbar = [\"0\"]\n", Path::new(".")).unwrap();
        assert!(l.data().is_err());
    }
}
