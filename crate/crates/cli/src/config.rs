//! Resolved run configuration and the `key = value` config file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, CommandFactory};
use qggm_core::{Error, GibbsConfig};
use serde::{Deserialize, Serialize};

use crate::args::{
    BenchArgs, CheckPriorArgs, Cli, Command, DiagnoseArgs, EvaluateArgs, FitArgs, GibbsArgs, RocArgs, SimulateArgs,
};

/// Every parameter that shaped a run. Embedded in each output so that a
/// result file alone is enough to reproduce it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_diag: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetrize: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_samples: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truth: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn check_level(level: f64) -> Result<(), Error> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("credible level must lie in (0, 1), got {level}")))
    }
}

impl RunConfig {
    fn with_gibbs(mut self, g: &GibbsArgs) -> Self {
        self.iters = Some(g.iters);
        self.burn_in = Some(g.burn_in);
        self.thin = Some(g.thin);
        self.chains = Some(g.chains);
        self.seed = Some(g.seed);
        self.known_diag = Some(g.known_diag);
        self.symmetrize = Some(g.symmetrize.name().to_string());
        self.folds = Some(g.folds);
        self
    }

    pub fn from_command(cmd: &Command) -> Self {
        match cmd {
            Command::Simulate(a) => Self::simulate(a),
            Command::Fit(a) => Self::fit(a),
            Command::Evaluate(a) => Self::evaluate(a),
            Command::Roc(a) => Self::roc(a),
            Command::Diagnose(a) => Self::diagnose(a),
            Command::CheckPrior(a) => Self::check_prior(a),
            Command::Bench(a) => Self::bench(a),
        }
    }

    pub fn simulate(a: &SimulateArgs) -> Self {
        RunConfig {
            command: "simulate".into(),
            pattern: Some(a.pattern.name().into()),
            p: Some(a.p),
            n: Some(a.n),
            reps: Some(a.reps),
            seed: Some(a.seed),
            out: Some(a.out.clone()),
            ..Default::default()
        }
    }

    pub fn fit(a: &FitArgs) -> Self {
        RunConfig {
            command: "fit".into(),
            level: Some(a.level),
            write_samples: Some(!a.no_samples),
            out: Some(a.out.clone()),
            inputs: a.inputs.clone(),
            truth: a.truth.iter().cloned().collect(),
            ..Default::default()
        }
        .with_gibbs(&a.gibbs)
    }

    pub fn evaluate(a: &EvaluateArgs) -> Self {
        RunConfig {
            command: "evaluate".into(),
            level: Some(a.level),
            out: Some(a.out.clone()),
            inputs: a.fits.clone(),
            truth: a.truths.clone(),
            estimates: a.estimates.clone(),
            method: (!a.estimates.is_empty()).then(|| a.method.clone()),
            ..Default::default()
        }
    }

    pub fn roc(a: &RocArgs) -> Self {
        RunConfig {
            command: "roc".into(),
            out: Some(a.out.clone()),
            inputs: a.fits.clone(),
            truth: a.truths.clone(),
            roc_points: Some(a.points),
            ..Default::default()
        }
    }

    pub fn diagnose(a: &DiagnoseArgs) -> Self {
        RunConfig {
            command: "diagnose".into(),
            out: Some(a.out.clone()),
            inputs: vec![a.fit.clone()],
            window: Some(a.window),
            ..Default::default()
        }
    }

    pub fn check_prior(a: &CheckPriorArgs) -> Self {
        let alpha = a.alpha.unwrap_or(a.a_n * a.a_n / (a.p as f64 * a.p as f64));
        RunConfig {
            command: "check-prior".into(),
            p: Some(a.p),
            out: a.out.clone(),
            alpha: Some(alpha),
            a_n: Some(a.a_n),
            e_n: Some(a.e_n),
            u: Some(a.u),
            c: Some(a.c),
            ..Default::default()
        }
    }

    pub fn bench(a: &BenchArgs) -> Self {
        RunConfig {
            command: "bench".into(),
            pattern: Some(a.pattern.name().into()),
            p: Some(a.p),
            n: Some(a.n),
            out: Some(a.out.clone()),
            ..Default::default()
        }
        .with_gibbs(&a.gibbs)
    }

    /// Sampler settings. Column updates run in parallel once p is large
    /// enough to pay for the fan-out; results do not depend on it.
    pub fn gibbs_config(&self, p: usize) -> GibbsConfig {
        let d = GibbsConfig::default();
        GibbsConfig {
            n_iter: self.iters.unwrap_or(d.n_iter),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thin: self.thin.unwrap_or(d.thin),
            seed: self.seed.unwrap_or(d.seed),
            n_chains: self.chains.unwrap_or(d.n_chains),
            column_parallel: p >= 50,
        }
    }

    /// Checks that need no file access.
    pub fn validate(&self) -> Result<(), Error> {
        if self.reps == Some(0) {
            return Err(invalid("replicate count must be at least 1"));
        }
        if let Some(p) = self.p {
            if p < 2 {
                return Err(invalid(format!("p must be at least 2, got {p}")));
            }
        }
        if let Some(n) = self.n {
            if n < 2 {
                return Err(invalid(format!("n must be at least 2, got {n}")));
            }
        }
        if self.iters.is_some() {
            self.gibbs_config(0).validate()?;
        }
        if let Some(level) = self.level {
            check_level(level)?;
        }
        if let Some(f) = self.folds {
            if !self.known_diag.unwrap_or(false) && f < 2 {
                return Err(invalid(format!("fold count must be at least 2, got {f}")));
            }
        }
        if self.roc_points == Some(0) || self.roc_points == Some(1) {
            return Err(invalid("at least 2 ROC points are required"));
        }
        if matches!(self.window, Some(w) if w < 2) {
            return Err(invalid("trace window must be at least 2"));
        }
        Ok(())
    }
}

/// Reads `--config FILE` and splices its entries into `argv` right after
/// the subcommand name, skipping any flag also given on the command line.
/// Returns the expanded arguments and the file's `jobs` entry, which ranks
/// below both the flag and the environment variable.
pub fn expand_config_file(argv: Vec<OsString>) -> Result<(Vec<OsString>, Option<usize>), Error> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config_path = None;
    let mut sub_idx = None;
    let mut k = 1;
    while k < strs.len() {
        let a = &strs[k];
        if a == "--config" {
            config_path = strs.get(k + 1).cloned();
            k += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config_path = Some(v.to_string());
        } else if a == "--jobs" && sub_idx.is_none() {
            k += 2;
            continue;
        } else if sub_idx.is_none() && !a.starts_with('-') {
            sub_idx = Some(k);
        }
        k += 1;
    }
    let (Some(path), Some(sub_idx)) = (config_path, sub_idx) else {
        return Ok((argv, None));
    };
    let path = PathBuf::from(path);
    let entries = parse_config_file(&path)?;

    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&strs[sub_idx]) else {
        return Ok((argv, None));
    };
    let given: Vec<&str> = strs[sub_idx + 1..]
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();

    let mut jobs = None;
    let mut injected: Vec<OsString> = Vec::new();
    for (line, key, value) in entries {
        let at = |message: String| Error::Parse { path: path.display().to_string(), line, column: 1, message };
        if key == "jobs" {
            jobs = Some(value.parse().map_err(|_| at(format!("jobs must be a non-negative integer, got '{value}'")))?);
            continue;
        }
        if key == "config" {
            return Err(at("a config file cannot name another config file".into()));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| at(format!("unknown key '{key}' for subcommand {}", sub.get_name())))?;
        if given.contains(&key.as_str()) {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" | "yes" | "1" => injected.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                _ => return Err(at(format!("'{key}' takes true or false, got '{value}'"))),
            }
        } else {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        }
    }
    let mut out = argv;
    out.splice(sub_idx + 1..sub_idx + 1, injected);
    Ok((out, jobs))
}

/// `(line, key, value)` triples. Keys use the long flag names; underscores
/// are accepted for hyphens. `#` starts a comment.
pub fn parse_config_file(path: &Path) -> Result<Vec<(usize, String, String)>, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: ln + 1,
                column: 1,
                message: "expected 'key = value'".into(),
            });
        };
        let key = k.trim().replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: ln + 1,
                column: 1,
                message: "empty key".into(),
            });
        }
        out.push((ln + 1, key, value));
    }
    Ok(out)
}
