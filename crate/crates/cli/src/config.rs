//! JSON experiment configuration.

use qrw_core::linalg::{c64, diag};
use qrw_core::walk::step_count;
use qrw_core::{CMatrix, CVector, GkslModel, TestFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

/// A complex number written as `[re, im]`.
pub type Complex = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset {
        preset: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norm: Option<f64>,
    },
    Random {
        random: RandomModel,
    },
    Explicit {
        d: usize,
        m: usize,
        /// `R[a*m + i, b]`, row-major.
        r: Vec<Complex>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norm: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomModel {
    pub d: usize,
    pub m: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Preset(String),
    Matrix(Vec<Vec<Complex>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub knots: Vec<f64>,
    /// One list of knot values per channel.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    pub pairs: usize,
    pub walk_instances: usize,
    pub max_walk_steps: usize,
    pub h_values: Vec<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            pairs: 20,
            walk_instances: 10,
            max_walk_steps: 4,
            h_values: vec![1.0, 0.1, 0.01, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LemmaConfig {
    pub samples: usize,
    pub cells: usize,
    pub cutoff: usize,
    pub h_values: Vec<f64>,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            samples: 6,
            cells: 8,
            cutoff: 4,
            h_values: vec![0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestHooks {
    /// Perturbs the vacuum block of `β` in the homomorphism suite.
    pub corrupt_beta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub observable: ObservableSpec,
    pub u: Vec<Complex>,
    pub v: Vec<Complex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<FunctionSpec>,
    pub t: f64,
    pub h_list: Vec<f64>,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub lemmas: LemmaConfig,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

fn default_dense_cap() -> usize {
    qrw_core::walk::DEFAULT_DENSE_CAP
}

/// Everything a run needs, with shapes checked against each other.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: GkslModel,
    pub x: CMatrix,
    pub u: CVector,
    pub v: CVector,
    pub f: TestFunction,
    pub g: TestFunction,
    pub t: f64,
    pub h_list: Vec<f64>,
    pub steps: Vec<usize>,
    pub config: ExperimentConfig,
}

fn parse_preset_model(name: &str) -> Result<GkslModel, CliError> {
    let name = name.trim();
    let bad = || CliError::Config(format!("unknown model preset {name:?}"));
    let arg = name
        .strip_prefix("amplitude_damping")
        .ok_or_else(bad)?
        .trim();
    let gamma = if arg.is_empty() {
        1.0
    } else {
        arg.strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(bad)?
            .trim()
            .parse::<f64>()
            .map_err(|_| bad())?
    };
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(CliError::Config(format!("decay rate must be non-negative, got {gamma}")));
    }
    Ok(GkslModel::amplitude_damping(gamma))
}

fn complex_vec(entries: &[Complex]) -> Vec<qrw_core::C64> {
    entries.iter().map(|z| c64(z[0], z[1])).collect()
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> Result<GkslModel, CliError> {
        let (model, norm) = match self {
            ModelSpec::Preset { preset, norm } => (parse_preset_model(preset)?, *norm),
            ModelSpec::Random { random } => {
                if random.d == 0 || random.m == 0 {
                    return Err(CliError::Config("random model needs d, m ≥ 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (GkslModel::random(&mut rng, random.d, random.m, random.norm), None)
            }
            ModelSpec::Explicit { d, m, r, norm } => {
                if r.len() != d * m * d {
                    return Err(CliError::Config(format!(
                        "R needs {} entries for d={d}, m={m}, got {}",
                        d * m * d,
                        r.len()
                    )));
                }
                let mat = CMatrix::from_row_slice(d * m, *d, &complex_vec(r));
                (GkslModel::new(*d, *m, mat)?, *norm)
            }
        };
        Ok(match norm {
            Some(n) if n >= 0.0 => model.rescaled(n),
            Some(n) => return Err(CliError::Config(format!("norm must be non-negative, got {n}"))),
            None => model,
        })
    }
}

impl ObservableSpec {
    pub fn build(&self, d: usize) -> Result<CMatrix, CliError> {
        match self {
            ObservableSpec::Preset(name) => {
                if d != 2 {
                    return Err(CliError::Config(format!("observable preset {name:?} needs d = 2")));
                }
                let one = c64(1.0, 0.0);
                let zero = c64(0.0, 0.0);
                match name.as_str() {
                    "sigma_x" => Ok(CMatrix::from_row_slice(2, 2, &[zero, one, one, zero])),
                    "sigma_z" => Ok(diag(&[1.0, -1.0])),
                    "projector_1" => Ok(diag(&[0.0, 1.0])),
                    _ => Err(CliError::Config(format!("unknown observable preset {name:?}"))),
                }
            }
            ObservableSpec::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(CliError::Config(format!("observable must be {d}x{d}")));
                }
                let flat: Vec<Complex> = rows.iter().flatten().copied().collect();
                Ok(CMatrix::from_row_slice(d, d, &complex_vec(&flat)))
            }
        }
    }
}

impl FunctionSpec {
    pub fn build(&self) -> Result<TestFunction, CliError> {
        Ok(TestFunction::new(self.knots.clone(), self.values.clone())?)
    }

    pub fn from_function(f: &TestFunction) -> Self {
        Self {
            knots: f.knots().to_vec(),
            values: f.values().to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Amplitude damping with `x = |1><1|`, `u = v = (1,1)/√2` and a bump of height 0.5
    /// on `[0, 1]` for both test functions, `t = 1`, `h = 2^-2 .. 2^-7`.
    pub fn reference() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bump = FunctionSpec {
            knots: vec![0.0, 0.5, 1.0],
            values: vec![vec![0.0, 0.5, 0.0]],
        };
        Self {
            model: ModelSpec::Preset {
                preset: "amplitude_damping(1)".into(),
                norm: None,
            },
            observable: ObservableSpec::Preset("projector_1".into()),
            u: vec![[s, 0.0], [s, 0.0]],
            v: vec![[s, 0.0], [s, 0.0]],
            f: Some(bump.clone()),
            g: Some(bump),
            t: 1.0,
            h_list: (2..=7).map(|k| 0.5f64.powi(k)).collect(),
            dense_cap: default_dense_cap(),
            seed: 0,
            out: None,
            validate: ValidateConfig::default(),
            lemmas: LemmaConfig::default(),
            test_hooks: TestHooks::default(),
        }
    }

    /// Checks shapes and the integer-step guard, and builds the numerical objects.
    pub fn experiment(&self) -> Result<Experiment, CliError> {
        let model = self.model.build(self.seed)?;
        let d = model.d();
        let m = model.m();
        let x = self.observable.build(d)?;
        if self.u.len() != d || self.v.len() != d {
            return Err(CliError::Config(format!("u and v must have length {d}")));
        }
        let u = CVector::from_vec(complex_vec(&self.u));
        let v = CVector::from_vec(complex_vec(&self.v));
        let load = |spec: &Option<FunctionSpec>| -> Result<TestFunction, CliError> {
            let f = match spec {
                Some(s) => s.build()?,
                None => TestFunction::zero(m),
            };
            if f.channels() != m {
                return Err(CliError::Config(format!("test function has {} channels, model has {m}", f.channels())));
            }
            Ok(f)
        };
        let f = load(&self.f)?;
        let g = load(&self.g)?;
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(CliError::Config(format!("t must be positive, got {}", self.t)));
        }
        if self.h_list.is_empty() {
            return Err(CliError::Config("h_list is empty".into()));
        }
        let steps = self
            .h_list
            .iter()
            .map(|&h| step_count(self.t, h))
            .collect::<Result<Vec<_>, _>>()?;
        if steps.contains(&0) {
            return Err(CliError::Config("every h must be at most t".into()));
        }
        Ok(Experiment {
            model,
            x,
            u,
            v,
            f,
            g,
            t: self.t,
            h_list: self.h_list.clone(),
            steps,
            config: self.clone(),
        })
    }
}
