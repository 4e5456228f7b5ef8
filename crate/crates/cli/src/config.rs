//! Run configuration: command-line flags layered over an optional JSON file,
//! the `TAMED_TAYLOR_SEED` variable and built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tamed_taylor::experiments::{DEFAULT_N_LIST, DEFAULT_N_REF, DEFAULT_PATHS, DEFAULT_SEED};
use tamed_taylor::model::{builtin_problem, user::UserProblemFile};
use tamed_taylor::output::Format;
use tamed_taylor::{BuiltinKind, Problem, Scheme, SchemeKind};

pub const SEED_ENV: &str = "TAMED_TAYLOR_SEED";
pub const DEFAULT_XI: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Euler,
    Milstein,
    Taylor15,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => SchemeKind::TamedEuler,
            SchemeArg::Milstein => SchemeKind::TamedMilstein,
            SchemeArg::Taylor15 => SchemeKind::Taylor15,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Built-in problem: ginzburg, holder or ou.
    #[arg(long)]
    pub problem: Option<String>,
    /// JSON problem definition (replaces --problem).
    #[arg(long, conflicts_with = "problem")]
    pub problem_file: Option<PathBuf>,
    /// Noise intensity ξ of a built-in problem.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<f64>,
    /// Initial value x₀.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Scheme (defaults to taylor15)
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Run the scheme without taming.
    #[arg(long)]
    pub no_taming: bool,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Reference step count.
    #[arg(long)]
    pub n_ref: Option<usize>,
    /// Monte Carlo sample paths
    #[arg(long)]
    pub paths: Option<usize>,
    /// Master seed (falls back to $TAMED_TAYLOR_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file stem; extensions are appended.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write only this format
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// JSON file with any of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Accept ξ outside the admissible range.
    #[arg(long = "override")]
    pub allow_out_of_range: bool,
}

/// Settings accepted in a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<String>,
    pub problem_file: Option<PathBuf>,
    pub xi: Option<f64>,
    pub x0: Option<f64>,
    pub scheme: Option<SchemeKind>,
    pub taming: Option<bool>,
    pub n_list: Option<Vec<usize>>,
    pub n_ref: Option<usize>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(rename = "override")]
    pub allow_out_of_range: Option<bool>,
    pub p: Option<u32>,
    pub p0: Option<f64>,
    pub p1: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved settings. Everything serialized here is echoed into the
/// outputs; the thread count, destination and format do not affect results
/// and are left out so that outputs are byte-identical across them.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub problem: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    pub scheme: SchemeKind,
    pub taming: bool,
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(rename = "override")]
    pub allow_out_of_range: bool,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub format: Option<Format>,
    #[serde(skip)]
    pub file: ConfigFile,
}

/// Per-command fallbacks for settings the user left unset.
pub struct CommandDefaults {
    pub name: &'static str,
    pub n_list: Vec<usize>,
    pub paths: usize,
}

impl RunConfig {
    pub fn resolve(
        args: &CommonArgs,
        threads: Option<usize>,
        defaults: CommandDefaults,
    ) -> Result<Self> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .with_context(|| format!("{SEED_ENV}={v} is not an unsigned integer"))?,
            ),
            Err(_) => None,
        };
        let problem_file = args.problem_file.clone().or_else(|| {
            if args.problem.is_some() {
                None
            } else {
                file.problem_file.clone()
            }
        });
        let problem = match &problem_file {
            Some(_) => "file".to_string(),
            None => args
                .problem
                .clone()
                .or_else(|| file.problem.clone())
                .unwrap_or_else(|| BuiltinKind::Ginzburg.as_str().to_string()),
        };
        let xi = match problem_file {
            Some(_) => None,
            None => Some(args.xi.or(file.xi).unwrap_or(DEFAULT_XI)),
        };
        let taming = if args.no_taming {
            false
        } else {
            file.taming.unwrap_or(true)
        };
        let cfg = RunConfig {
            command: defaults.name.to_string(),
            problem,
            problem_file,
            xi,
            x0: args.x0.or(file.x0),
            scheme: args
                .scheme
                .map(SchemeKind::from)
                .or(file.scheme)
                .unwrap_or(SchemeKind::Taylor15),
            taming,
            n_list: args
                .n_list
                .clone()
                .or_else(|| file.n_list.clone())
                .unwrap_or(defaults.n_list),
            n_ref: args.n_ref.or(file.n_ref).unwrap_or(DEFAULT_N_REF),
            paths: args.paths.or(file.paths).unwrap_or(defaults.paths),
            seed: args.seed.or(file.seed).or(env_seed).unwrap_or(DEFAULT_SEED),
            allow_out_of_range: args.allow_out_of_range || file.allow_out_of_range.unwrap_or(false),
            threads: threads.or(file.threads),
            out: args
                .out
                .clone()
                .or_else(|| file.out.clone())
                .unwrap_or_else(|| PathBuf::from(defaults.name)),
            format: args.format.map(Format::from).or(file.format),
            file,
        };
        if cfg.n_list.contains(&0) {
            bail!("--n-list entries must be positive");
        }
        if cfg.threads == Some(0) {
            bail!("--threads must be positive");
        }
        Ok(cfg)
    }

    pub fn scheme(&self) -> Scheme {
        if self.taming {
            Scheme::tamed(self.scheme)
        } else {
            Scheme::untamed(self.scheme)
        }
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let problem = match &self.problem_file {
            Some(path) => UserProblemFile::load(path)?.into_problem()?,
            None => {
                let kind: BuiltinKind = self.problem.parse()?;
                builtin_problem(kind, self.xi.unwrap_or(DEFAULT_XI), self.allow_out_of_range)?
            }
        };
        match self.x0 {
            Some(x0) => {
                let d = problem.dim();
                Ok(problem.with_x0(vec![x0; d])?)
            }
            None => Ok(problem),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    /// `# config: {…}` metadata for CSV outputs.
    pub fn metadata(&self) -> Vec<(String, String)> {
        vec![("config".into(), self.to_json().to_string())]
    }

    /// `out` with `ext` appended to the file name.
    pub fn out_path(&self, ext: &str) -> PathBuf {
        let mut name = self.out.clone().into_os_string();
        name.push(".");
        name.push(ext);
        PathBuf::from(name)
    }
}

pub fn default_n_list() -> Vec<usize> {
    DEFAULT_N_LIST.to_vec()
}

pub const DEFAULT_PATHS_RATE: usize = DEFAULT_PATHS;
