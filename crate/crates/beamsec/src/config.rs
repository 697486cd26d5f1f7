//! Scenario configuration: one JSON document drives every command.

use std::path::{Path, PathBuf};

use beamsec_core::channel::{synth_coupling, CouplingMatrix, ProfileSpec, SystemDims};
use beamsec_core::optimizer::SolverConfig;
use beamsec_core::trace::LoopId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;

/// Monte-Carlo samples below this are too noisy for the statistical checks.
pub const MIN_MC_SAMPLES: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub m: usize,
    pub k: usize,
    pub n_r: usize,
    pub n_e: usize,
}

impl Dims {
    pub fn with_power(&self, p: f64) -> Result<SystemDims, RunError> {
        SystemDims::new(self.m, self.k, self.n_r, self.n_e, p).map_err(|e| RunError::config("dims", e))
    }
}

/// Where the coupling matrices come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingSource {
    /// A synthetic family.
    Profile(ProfileSpec),
    /// JSON files in the `{rows, cols, entries}` layout, one per user plus the
    /// eavesdropper's. Relative paths resolve against the config file.
    Files { users: Vec<PathBuf>, eve: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceOptions {
    /// Loops whose rows are written.
    pub loops: Vec<LoopId>,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            loops: vec![LoopId::Cccp, LoopId::Iwfa],
        }
    }
}

/// Sizes of the verification suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// SNR at which the solver-based suites run.
    pub snr_db: f64,
    pub lemma_samples: usize,
    /// `(a, b)` pairs for the ratio inequality.
    pub lemma_params: Vec<(f64, f64)>,
    pub rotation_m: usize,
    pub rotation_k: usize,
    pub rotation_trials: usize,
    pub rotation_samples: u64,
    pub exclusion_instances: usize,
    pub exclusion_m: usize,
    pub exclusion_k: usize,
    pub oracle_instances: usize,
    pub oracle_iters: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            snr_db: 10.0,
            lemma_samples: 200_000,
            lemma_params: vec![(1.0, 1.0), (0.2, 3.0), (5.0, 0.5)],
            rotation_m: 8,
            rotation_k: 2,
            rotation_trials: 50,
            rotation_samples: 400,
            exclusion_instances: 20,
            exclusion_m: 32,
            exclusion_k: 4,
            oracle_instances: 20,
            oracle_iters: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchOptions {
    pub ms: Vec<usize>,
    pub ks: Vec<usize>,
    pub snr_db: f64,
    /// Each cell is timed this many times; the fastest run is kept.
    pub repeats: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            ms: vec![32, 64, 128, 256],
            ks: vec![2, 4, 8],
            snr_db: 10.0,
            repeats: 3,
        }
    }
}

fn default_mc_samples() -> u64 {
    2000
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dims: Dims,
    pub coupling: CouplingSource,
    /// Transmit SNRs in dB; `P = 10^(snr/10)` against unit noise.
    pub snr_grid: Vec<f64>,
    /// Solver settings; `p` is overwritten at every SNR point.
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    #[serde(default)]
    pub seed: u64,
    /// Also estimate the eavesdropper's exact ergodic rate (for `R_sec`).
    #[serde(default = "yes")]
    pub eve_mc: bool,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub convergence: ConvergenceOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub bench: BenchOptions,
}

/// Linear power for an SNR in dB.
pub fn power_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    /// Parses and validates; errors carry the JSON path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            RunError::Config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let CouplingSource::Files { users, eve } = &mut cfg.coupling {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in users.iter_mut().chain(std::iter::once(eve)) {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.dims.with_power(0.0)?;
        if self.snr_grid.is_empty() {
            return Err(RunError::Config("snr_grid: must contain at least one SNR point".into()));
        }
        if let Some(i) = self.snr_grid.iter().position(|v| !v.is_finite()) {
            return Err(RunError::Config(format!("snr_grid[{i}]: SNR must be finite")));
        }
        if self.mc_samples < MIN_MC_SAMPLES {
            return Err(RunError::Config(format!(
                "mc_samples: {} is below the minimum of {MIN_MC_SAMPLES}",
                self.mc_samples
            )));
        }
        self.solver.validate().map_err(|e| RunError::config("solver", e))?;
        if let CouplingSource::Files { users, .. } = &self.coupling {
            if users.len() != self.dims.k {
                return Err(RunError::Config(format!(
                    "coupling.files.users: {} files given for K = {}",
                    users.len(),
                    self.dims.k
                )));
            }
        }
        if self.bench.ms.is_empty() || self.bench.ks.is_empty() || self.bench.repeats == 0 {
            return Err(RunError::Config("bench: ms, ks and repeats must be nonempty/positive".into()));
        }
        if self.bench.ms.contains(&0) || self.bench.ks.contains(&0) {
            return Err(RunError::Config("bench: grid sizes must be positive".into()));
        }
        Ok(())
    }

    /// Coupling matrices for the configured dimensions.
    pub fn coupling(&self) -> Result<(Vec<CouplingMatrix>, CouplingMatrix), RunError> {
        let dims = self.dims.with_power(1.0)?;
        match &self.coupling {
            CouplingSource::Profile(spec) => synth_coupling(&dims, spec).map_err(|e| RunError::config("coupling.profile", e)),
            CouplingSource::Files { users, eve } => {
                let mut out = Vec::with_capacity(users.len());
                for (k, path) in users.iter().enumerate() {
                    let o = crate::io::read_coupling(path).map_err(|e| RunError::Config(format!("coupling.files.users[{k}]: {e}")))?;
                    o.check_shape(self.dims.n_r, self.dims.m, "user coupling")
                        .map_err(|e| RunError::config(&format!("coupling.files.users[{k}]"), e))?;
                    out.push(o);
                }
                let e = crate::io::read_coupling(eve).map_err(|e| RunError::Config(format!("coupling.files.eve: {e}")))?;
                e.check_shape(self.dims.n_e, self.dims.m, "eavesdropper coupling")
                    .map_err(|e| RunError::config("coupling.files.eve", e))?;
                Ok((out, e))
            }
        }
    }

    /// Solver settings at one SNR point.
    pub fn solver_at(&self, snr_db: f64) -> SolverConfig {
        self.solver.clone().with_power(power_from_db(snr_db))
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }
}
