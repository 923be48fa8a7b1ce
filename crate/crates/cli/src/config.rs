use std::path::{Path, PathBuf};

use choquard::solve::SolveOptions;
use choquard::{Grid, KernelMode, Mode, Params};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Truncated,
    Spectral,
}

impl From<KernelChoice> for KernelMode {
    fn from(k: KernelChoice) -> Self {
        match k {
            KernelChoice::Truncated => KernelMode::TruncatedKernel,
            KernelChoice::Spectral => KernelMode::Spectral,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// Box length `L`.
    pub extent: f64,
}

/// One experiment, as read from `--config` and patched by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    pub grid: GridConfig,
    pub kernel: KernelChoice,
    pub solver: SolveOptions,
    /// Subcommand this file was written for, checked when present.
    pub experiment: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    /// Separations for `strict-gap`.
    pub r_list: Vec<f64>,
    /// Exponents for `sweep-p`.
    pub p_list: Vec<f64>,
    /// Refinement factor applied to the groundstate before `degeneracy`.
    pub refine: usize,
    /// Random fields for `gradcheck`.
    pub gradcheck_fields: usize,
    /// Dump minimizers next to the reports.
    pub dump_fields: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: Params {
                dim: 2,
                alpha: 1.0,
                p: 2.5,
                mode: Mode::Choquard,
            },
            grid: GridConfig {
                n: 256,
                extent: 40.0,
            },
            kernel: KernelChoice::Truncated,
            solver: SolveOptions::default(),
            experiment: None,
            out: PathBuf::from("out"),
            seed: 0,
            r_list: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            p_list: vec![1.8, 2.0, 2.5],
            refine: 1,
            gradcheck_fields: 20,
            dump_fields: false,
        }
    }
}

/// Machine-readable rejection of a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationError {
    pub error: String,
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: &str, message: impl ToString) -> Self {
        ValidationError {
            error: "validation".into(),
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub kernel: Option<KernelChoice>,
    pub grid: Option<usize>,
    pub extent: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ValidationError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationError::new("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ValidationError::new("config", e))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(k) = o.kernel {
            self.kernel = k;
        }
        if let Some(n) = o.grid {
            self.grid.n = n;
        }
        if let Some(l) = o.extent {
            self.grid.extent = l;
        }
        self.solver.seed = self.seed;
    }

    pub fn grid(&self) -> Result<Grid, ValidationError> {
        Grid::new(self.params.dim, self.grid.n, self.grid.extent)
            .map_err(|e| ValidationError::new("grid", e))
    }

    /// Checks everything a run needs before any compute starts.
    pub fn validate(&self, command: &str) -> Result<(), ValidationError> {
        if let Some(exp) = &self.experiment {
            if exp != command {
                return Err(ValidationError::new(
                    "experiment",
                    format!("config is for `{exp}`, not `{command}`"),
                ));
            }
        }
        self.params
            .validate()
            .map_err(|e| ValidationError::new("params", e))?;
        self.grid()?;
        self.solver
            .validate()
            .map_err(|e| ValidationError::new("solver", e))?;
        match command {
            "strict-gap" if self.r_list.is_empty() || self.r_list.iter().any(|r| !(*r > 0.0)) => {
                Err(ValidationError::new(
                    "r_list",
                    "separations must be positive and non-empty",
                ))
            }
            "sweep-p" => {
                if self.p_list.is_empty() {
                    return Err(ValidationError::new("p_list", "no exponents"));
                }
                for &p in &self.p_list {
                    Params { p, ..self.params }
                        .validate()
                        .map_err(|e| ValidationError::new("p_list", e))?;
                }
                Ok(())
            }
            "degeneracy" if self.params.p >= 2.0 => Err(ValidationError::new(
                "params.p",
                "the degeneracy family needs p < 2",
            )),
            "degeneracy" if !(self.refine >= 1 && self.refine.is_power_of_two()) => Err(
                ValidationError::new("refine", "refinement must be a power of two"),
            ),
            "gradcheck" if self.gradcheck_fields == 0 => {
                Err(ValidationError::new("gradcheck_fields", "zero fields"))
            }
            _ => Ok(()),
        }
    }
}
