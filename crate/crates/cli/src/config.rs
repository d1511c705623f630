//! Experiment configuration, merged from a JSON file and command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use dss_sync::schemes::SchemeKind;
use dss_sync::simnet::SystemParams;
use dss_sync::EditModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    T,
    P,
    V,
    C,
    H,
}

impl From<Scheme> for SchemeKind {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::T => SchemeKind::T,
            Scheme::P => SchemeKind::P,
            Scheme::V => SchemeKind::V,
            Scheme::C => SchemeKind::C,
            Scheme::H => SchemeKind::H,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ud,
    Cnd,
    Pnd,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Ud => "ud",
            Model::Cnd => "cnd",
            Model::Pnd => "pnd",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every experiment setting, all optional so that a file and the flags can be
/// layered.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    /// Number of storage nodes (default k + 1).
    #[arg(long)]
    pub n: Option<usize>,
    /// Message symbols per node column (default B).
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of users (default k).
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<usize>,
    /// Block lengths; analyze accepts a comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    pub ell: Option<Vec<usize>>,
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Total deletions for the cnd model.
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub d: Option<usize>,
    /// Per-symbol deletion probability for the pnd model (default 1/ell).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Head fraction of the hybrid scheme.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Storage budget in bits per block.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl ExperimentArgs {
    /// Fields set here replace those of `base`.
    pub fn over(self, base: Self) -> Self {
        Self {
            scheme: self.scheme.or(base.scheme),
            n: self.n.or(base.n),
            k: self.k.or(base.k),
            b: self.b.or(base.b),
            ell: self.ell.or(base.ell),
            q: self.q.or(base.q),
            model: self.model.or(base.model),
            d: self.d.or(base.d),
            p: self.p.or(base.p),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            gamma: self.gamma.or(base.gamma),
            budget: self.budget.or(base.budget),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
        }
    }
}

pub fn load_file(path: &Path) -> Result<ExperimentArgs, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Resolved settings with defaults filled in.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scheme: SchemeKind,
    pub n: usize,
    pub k: usize,
    pub users: usize,
    pub ells: Vec<usize>,
    pub q: u64,
    pub model: Model,
    pub d: Option<usize>,
    pub p: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub gamma: Option<f64>,
    pub budget: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub const DEFAULT_ELL: usize = 16;
pub const DEFAULT_Q: u64 = 17;
pub const DEFAULT_USERS: usize = 2;
pub const DEFAULT_TRIALS: usize = 1000;

impl ExperimentConfig {
    pub fn resolve(a: ExperimentArgs) -> Result<Self, String> {
        let k = a.k.or(a.b).unwrap_or(DEFAULT_USERS);
        let users = a.b.unwrap_or(k);
        let ells = a.ell.unwrap_or_else(|| vec![DEFAULT_ELL]);
        if ells.is_empty() {
            return Err("--ell needs at least one value".into());
        }
        if let Some(g) = a.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(format!("gamma must lie in [0, 1], got {g}"));
            }
        }
        Ok(Self {
            scheme: a.scheme.unwrap_or(Scheme::V).into(),
            n: a.n.unwrap_or(k + 1),
            k,
            users,
            ells,
            q: a.q.unwrap_or(DEFAULT_Q),
            model: a.model.unwrap_or(Model::Ud),
            d: a.d,
            p: a.p,
            trials: a.trials.unwrap_or(DEFAULT_TRIALS),
            seed: a.seed.unwrap_or(0),
            gamma: a.gamma,
            budget: a.budget,
            out: a.out,
            format: a.format.unwrap_or_default(),
        })
    }

    pub fn single_ell(&self) -> Result<usize, String> {
        match self.ells[..] {
            [ell] => Ok(ell),
            _ => Err("this command takes a single --ell value".into()),
        }
    }

    pub fn edit_model(&self, ell: usize) -> Result<EditModel, String> {
        let users = self.users;
        let m = match self.model {
            Model::Ud => EditModel::Uniform { ell, users },
            Model::Cnd => EditModel::Combinatorial {
                ell,
                users,
                deletions: self.d.ok_or("the cnd model needs --D")?,
            },
            Model::Pnd => EditModel::Bernoulli {
                ell,
                users,
                p: self.p.unwrap_or(1.0 / ell as f64),
            },
        };
        m.validate().map_err(|e| e.to_string())?;
        Ok(m)
    }

    /// Identity tail length for the hybrid scheme: from `gamma` if given,
    /// else from the storage budget, else no tail.
    pub fn ell_star(&self, ell: usize) -> Result<usize, String> {
        let gamma = match (self.gamma, self.budget) {
            (Some(g), _) => g,
            (None, Some(b)) => {
                dss_sync::schemes::choose_gamma(ell, self.q, b)
                    .map_err(|e| e.to_string())?
                    .gamma
            }
            (None, None) => 1.0,
        };
        let head = (gamma * ell as f64).round() as usize;
        Ok(ell - head.min(ell))
    }

    pub fn system_params(&self, ell: usize) -> Result<SystemParams, String> {
        let params = SystemParams::new(self.scheme, self.n, self.k, self.users, ell, self.q);
        Ok(if self.scheme == SchemeKind::H {
            params.with_ell_star(self.ell_star(ell)?)
        } else {
            params
        })
    }
}
