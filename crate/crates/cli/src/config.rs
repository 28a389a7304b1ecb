//! Run configuration: command-line flags layered over an optional flat
//! `key = value` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use hetcycle::linalg::Mat3;
use hetcycle::{KolmogorovModel, StateVector, Tolerances};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Ricker3,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Options shared by every subcommand. All are optional here so that file
/// values can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` file; flags take precedence over its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Model family.
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelName>,
    /// Ricker growth rate `u`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub u: Option<f64>,
    /// Ricker competition strength `α`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// General model rates `u1,u2,u3`.
    #[arg(long, global = true, value_name = "U1,U2,U3")]
    pub rates: Option<String>,
    /// General model interaction matrix, nine values row by row.
    #[arg(long, global = true, value_name = "A11,..,A33")]
    pub interaction: Option<String>,
    /// Box corner `r1,r2,r3` (defaults to 1.5 / A_ii).
    #[arg(long = "box", global = true, value_name = "R1,R2,R3")]
    pub box_r: Option<String>,

    /// Grid points per axis for verification.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Iteration cap for orbits.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    #[arg(long, global = true)]
    pub eps_strict: Option<f64>,
    #[arg(long, global = true)]
    pub eps_hyp: Option<f64>,
    #[arg(long, global = true)]
    pub eps_q: Option<f64>,
    #[arg(long, global = true)]
    pub v_tol: Option<f64>,
    #[arg(long, global = true)]
    pub ratio_min: Option<f64>,
    #[arg(long, global = true)]
    pub min_cycles: Option<usize>,

    /// Report format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Report destination; standard output when absent.
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Worker threads for grid and sweep work.
    #[arg(long, global = true, env = "HETCYCLE_WORKERS")]
    pub workers: Option<usize>,
}

/// Keys a config file may set. Dashes and underscores are interchangeable.
const KNOWN_KEYS: &[&str] = &[
    "model", "u", "alpha", "rates", "interaction", "box", "grid", "max_iter", "eps_strict",
    "eps_hyp", "eps_q", "v_tol", "ratio_min", "min_cycles", "format", "output", "workers", "x0",
    "steps", "trace", "theta", "alpha_min", "alpha_max", "alpha_steps", "u_min", "u_max",
    "u_steps", "sample_interior",
];

#[derive(Debug, Clone, Default)]
pub struct FileValues(BTreeMap<String, String>);

impl FileValues {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected `key = value`", origin.display(), lineno + 1))
            })?;
            let key = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown key `{}`",
                    origin.display(),
                    lineno + 1,
                    k.trim()
                )));
            }
            map.insert(key, v.trim().trim_matches('"').to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Flag value if given, else the file value parsed with `parse`.
    pub fn pick<T>(
        &self,
        flag: Option<T>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => parse(raw)
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }

    pub fn pick_str<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key, |s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
    }
}

pub fn parse_list(s: &str, len: usize) -> Result<Vec<f64>, String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", t.trim())))
        .collect::<Result<_, _>>()?;
    if vals.len() != len {
        return Err(format!("expected {len} comma-separated values, got {}", vals.len()));
    }
    Ok(vals)
}

pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v = parse_list(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_matrix(s: &str) -> Result<Mat3, String> {
    let v = parse_list(s, 9)?;
    Ok([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
}

fn parse_model_name(s: &str) -> Result<ModelName, String> {
    ModelName::from_str(s, true)
}

fn parse_format(s: &str) -> Result<Format, String> {
    Format::from_str(s, true)
}

/// Resolved configuration shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: Option<KolmogorovModel>,
    pub grid_n: usize,
    /// The grid size was set explicitly rather than defaulted.
    pub grid_given: Option<usize>,
    pub max_iter: usize,
    pub tolerances: Tolerances,
    pub format: Format,
    pub format_given: Option<Format>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub file: FileValues,
}

pub const DEFAULT_GRID: usize = 21;
pub const DEFAULT_MAX_ITER: usize = 5000;

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileValues::load(p)?,
            None => FileValues::default(),
        };
        let defaults = Tolerances::default();
        let tolerances = Tolerances {
            eps_strict: file.pick_str(args.eps_strict, "eps_strict")?.unwrap_or(defaults.eps_strict),
            eps_hyp: file.pick_str(args.eps_hyp, "eps_hyp")?.unwrap_or(defaults.eps_hyp),
            eps_q: file.pick_str(args.eps_q, "eps_q")?.unwrap_or(defaults.eps_q),
            v_tol: file.pick_str(args.v_tol, "v_tol")?.unwrap_or(defaults.v_tol),
            ratio_min: file.pick_str(args.ratio_min, "ratio_min")?.unwrap_or(defaults.ratio_min),
            min_cycles: file.pick_str(args.min_cycles, "min_cycles")?.unwrap_or(defaults.min_cycles),
        };
        tolerances.validate().map_err(CliError::Usage)?;

        let grid_given = file.pick_str(args.grid, "grid")?;
        let grid_n = grid_given.unwrap_or(DEFAULT_GRID);
        if grid_n < 2 {
            return Err(CliError::Usage(format!("grid must be at least 2, got {grid_n}")));
        }
        let workers = file.pick_str(args.workers, "workers")?;
        if workers == Some(0) {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        let format_given = file.pick(args.format, "format", parse_format)?;
        let format = format_given.unwrap_or(Format::Json);
        let output = file.pick(args.output.clone(), "output", |s| Ok(PathBuf::from(s)))?;
        let max_iter = file.pick_str(args.max_iter, "max_iter")?.unwrap_or(DEFAULT_MAX_ITER);

        let model = Self::model(args, &file)?;
        Ok(Self { model, grid_n, grid_given, max_iter, tolerances, format, format_given, output, workers, file })
    }

    fn model(args: &CommonArgs, file: &FileValues) -> Result<Option<KolmogorovModel>, CliError> {
        let name = file.pick(args.model, "model", parse_model_name)?;
        let u = file.pick_str(args.u, "u")?;
        let alpha = file.pick_str(args.alpha, "alpha")?;
        let rates = file.pick(args.rates.clone(), "rates", |s| Ok(s.to_string()))?;
        let interaction = file.pick(args.interaction.clone(), "interaction", |s| Ok(s.to_string()))?;
        let box_r = file.pick(args.box_r.clone(), "box", |s| Ok(s.to_string()))?;

        let name = match name {
            Some(n) => n,
            None if rates.is_some() || interaction.is_some() => ModelName::General,
            None if u.is_some() || alpha.is_some() => ModelName::Ricker3,
            None => return Ok(None),
        };
        let model = match name {
            ModelName::Ricker3 => {
                let u = u.ok_or_else(|| CliError::Usage("ricker3 needs --u".into()))?;
                let alpha = alpha.ok_or_else(|| CliError::Usage("ricker3 needs --alpha".into()))?;
                KolmogorovModel::ricker3(u, alpha).map_err(CliError::usage)?
            }
            ModelName::General => {
                let rates = rates.ok_or_else(|| CliError::Usage("general needs --rates".into()))?;
                let a = interaction
                    .ok_or_else(|| CliError::Usage("general needs --interaction".into()))?;
                let rates = parse_triple(&rates).map_err(|e| CliError::Usage(format!("--rates: {e}")))?;
                let a = parse_matrix(&a).map_err(|e| CliError::Usage(format!("--interaction: {e}")))?;
                KolmogorovModel::general_exp(rates, a).map_err(CliError::usage)?
            }
        };
        match box_r {
            None => Ok(Some(model)),
            Some(s) => {
                let r = parse_triple(&s).map_err(|e| CliError::Usage(format!("--box: {e}")))?;
                let r = StateVector::new(r).map_err(CliError::usage)?;
                Ok(Some(model.with_box(r).map_err(CliError::usage)?))
            }
        }
    }

    pub fn require_model(&self) -> Result<&KolmogorovModel, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Usage("no model given (use --model with its parameters)".into()))
    }

    /// `(α, u)` from flags or file, for commands that take bare parameters.
    pub fn ricker_params(&self) -> Result<(f64, f64), CliError> {
        match self.model.as_ref().and_then(|m| m.ricker_params()) {
            Some((u, alpha)) => Ok((alpha, u)),
            None => Err(CliError::Usage("needs --alpha and --u".into())),
        }
    }
}
