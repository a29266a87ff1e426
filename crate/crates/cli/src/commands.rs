//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qggm_core::diagonal::{estimate_diagonal_with, DiagonalConfig};
use qggm_core::gibbs::SortedSamples;
use qggm_core::io::{read_matrix_csv, read_samples, write_matrix_csv, write_samples};
use qggm_core::metrics::{
    default_roc_levels, evaluate as evaluate_fit, log_spaced, monitored_rhat, roc_sweep, trace_relative_sd,
    DEFAULT_ROC_MAX, DEFAULT_ROC_MIN, RHAT_THRESHOLD,
};
use qggm_core::prior::{check_concentration, check_thickness};
use qggm_core::simgen::{generate_pattern, sample_mvn, GroundTruth, PatternSpec};
use qggm_core::symmetrize::{spectral_norm, symmetrize_l1, SymmetrizeMode};
use qggm_core::{run_chain, DenseMatrix, Error, PosteriorSummary, PriorConditionSpec, RngStream, SampleStack};
use rayon::prelude::*;

use crate::args::{BenchArgs, CheckPriorArgs, DiagnoseArgs, EvaluateArgs, FitArgs, RocArgs, SimulateArgs, VERSION};
use crate::artifacts::*;
use crate::config::RunConfig;

/// Stream id of replicate data draws; replicate r seeds it with seed + r.
pub const DATA_STREAM: u64 = 0xDA7A;

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance { version: VERSION.to_string(), config: cfg.clone() }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub fn replicate_file(r: usize) -> String {
    format!("y_{r:03}.csv")
}

pub fn simulate(a: &SimulateArgs, cfg: &RunConfig) -> Result<Vec<PathBuf>, Error> {
    cfg.validate()?;
    let spec = PatternSpec::new(a.pattern, a.p, a.seed);
    spec.validate()?;
    if !a.force && dir_non_empty(&a.out)? {
        return Err(invalid(format!("output directory {} is not empty; pass --force to write into it", a.out.display())));
    }
    let truth = generate_pattern(&spec)?;
    let data: Vec<DenseMatrix> = (0..a.reps)
        .into_par_iter()
        .map(|r| sample_mvn(&truth, a.n, &mut RngStream::new(a.seed.wrapping_add(r as u64), DATA_STREAM)))
        .collect::<Result<_, _>>()?;

    create_dir(&a.out)?;
    let prov = provenance(cfg);
    let truth_file = TruthFile {
        provenance: prov.clone(),
        spec: Some(spec.clone()),
        support_size: truth.support_size(),
        d_star: truth.max_degree(),
        truth: truth.clone(),
    };
    write_json(&a.out.join(TRUTH_FILE), &truth_file)?;
    let mut written = vec![a.out.join(TRUTH_FILE)];
    let mut replicates = Vec::with_capacity(a.reps);
    for (r, y) in data.iter().enumerate() {
        let name = replicate_file(r);
        write_matrix_csv(&a.out.join(&name), y)?;
        written.push(a.out.join(&name));
        replicates.push(ReplicateEntry { file: name, seed: a.seed.wrapping_add(r as u64), n: a.n });
    }
    let manifest = Manifest {
        provenance: prov.clone(),
        spec,
        min_eig: truth.min_eig,
        attempts: truth.attempts,
        support_size: truth.support_size(),
        truth_file: TRUTH_FILE.into(),
        replicates: replicates.clone(),
    };
    write_json(&a.out.join(MANIFEST_FILE), &manifest)?;
    let run = RunRecord {
        provenance: prov,
        files: replicates.iter().map(|r| r.file.clone()).collect(),
        description: format!("headerless {}x{} data matrices, one row per observation", a.n, a.p),
    };
    write_json(&a.out.join(RUN_FILE), &run)?;
    written.push(a.out.join(MANIFEST_FILE));
    Ok(written)
}

/// Everything one fit produces before it is written out.
pub struct FitOutput {
    pub artifact: FitArtifact,
    pub samples: SampleStack,
    pub timing: Timing,
}

impl FitOutput {
    /// The summary with its draws restored.
    pub fn summary(&self) -> PosteriorSummary {
        let mut s = self.artifact.summary.clone();
        s.samples = self.samples.clone();
        s
    }
}

/// Diagonal estimation, Gibbs sampling and symmetrization on one data matrix.
pub fn fit_matrix(y: &DenseMatrix, input: &Path, cfg: &RunConfig, truth: Option<&GroundTruth>) -> Result<FitOutput, Error> {
    let (n, p) = (y.rows(), y.cols());
    if p < 2 || n < 2 {
        return Err(invalid(format!("{}: need at least 2 rows and 2 columns, found {n}x{p}", input.display())));
    }
    if let Some(t) = truth {
        if t.p() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("{p}x{p} truth for {}", input.display()),
                found: format!("{0}x{0}", t.p()),
            });
        }
    }
    let gibbs = cfg.gibbs_config(p);
    gibbs.validate()?;
    let level = cfg.level.unwrap_or(0.5);
    let known = cfg.known_diag.unwrap_or(false);
    let mode: SymmetrizeMode = cfg.symmetrize.as_deref().unwrap_or("auto").parse()?;

    let start = Instant::now();
    let (diag, diag_estimates) = if known {
        (truth.map_or_else(|| vec![1.0; p], |t| t.omega_star.diag()), None)
    } else {
        let dc = DiagonalConfig { folds: cfg.folds.unwrap_or(5), seed: gibbs.seed, ..DiagonalConfig::default() };
        let est = estimate_diagonal_with(y, &dc)?;
        (est.omega_hat.clone(), Some(est))
    };
    let t_diag = start.elapsed().as_secs_f64();

    let reference = truth.map(|t| &t.omega_star);
    let mut summary = run_chain(y, &diag, &gibbs, &[level], reference)?;
    let t_gibbs = start.elapsed().as_secs_f64() - t_diag;

    let sym = symmetrize_l1(&summary.mean, mode)?;
    let rhat = if gibbs.n_chains > 1 { monitored_rhat(&summary)? } else { Vec::new() };
    let total = start.elapsed().as_secs_f64();

    let samples = std::mem::replace(&mut summary.samples, SampleStack::new(p));
    let artifact = FitArtifact {
        provenance: provenance(cfg),
        input: input.to_path_buf(),
        n,
        p,
        method: if known { "quasiGHS-diag" } else { "quasiGHS" }.into(),
        diag_source: if known { "known" } else { "estimated" }.into(),
        diag_estimates,
        reference: if truth.is_some() { "truth" } else { "diagonal" }.into(),
        symmetrize: SymmetrizeRecord { requested: mode.name().into(), mode: sym.mode.name().into(), objective: sym.objective },
        estimate: sym.matrix,
        summary,
        rhat,
        rhat_variant: "classic".into(),
        samples_file: cfg.write_samples.unwrap_or(true).then(|| SAMPLES_FILE.to_string()),
    };
    let timing = Timing {
        diagonal_seconds: t_diag,
        gibbs_seconds: t_gibbs,
        symmetrize_seconds: total - t_diag - t_gibbs,
        total_seconds: total,
        minutes: total / 60.0,
    };
    Ok(FitOutput { artifact, samples, timing })
}

fn trace_csv(summary: &PosteriorSummary) -> String {
    let mut s = String::from("chain,iteration,frob,norm,tau2\n");
    for (c, ch) in summary.chains.iter().enumerate() {
        for t in 0..ch.frob.len() {
            s.push_str(&format!("{c},{},{},{},{}\n", t + 1, ch.frob[t], ch.norm[t], ch.tau2[t]));
        }
    }
    s
}

pub fn write_fit(dir: &Path, out: &FitOutput) -> Result<(), Error> {
    create_dir(dir)?;
    if out.artifact.samples_file.is_some() {
        write_samples(&dir.join(SAMPLES_FILE), &out.samples)?;
    }
    write_text(&dir.join(TRACE_FILE), &trace_csv(&out.artifact.summary))?;
    write_json(&dir.join(FIT_FILE), &out.artifact)?;
    write_json(&dir.join(TIMING_FILE), &out.timing)?;
    let run = RunRecord {
        provenance: out.artifact.provenance.clone(),
        files: vec![TRACE_FILE.into()],
        description: "trace.csv: per-iteration Frobenius distance to the reference, Frobenius norm and global scale".into(),
    };
    write_json(&dir.join(RUN_FILE), &run)
}

pub fn read_truth(path: &Path) -> Result<TruthFile, Error> {
    read_json(path)
}

/// Fit directories, one per input: the output directory itself for a
/// single input, `fit_000`, `fit_001`, ... below it otherwise.
pub fn fit_dirs(out: &Path, inputs: usize) -> Vec<PathBuf> {
    if inputs == 1 {
        vec![out.to_path_buf()]
    } else {
        (0..inputs).map(|k| out.join(format!("fit_{k:03}"))).collect()
    }
}

pub fn fit(a: &FitArgs, cfg: &RunConfig) -> Result<Vec<PathBuf>, Error> {
    cfg.validate()?;
    let truth = a.truth.as_deref().map(read_truth).transpose()?;
    let data: Vec<DenseMatrix> = a.inputs.iter().map(|p| read_matrix_csv(p)).collect::<Result<_, _>>()?;
    if let Some(t) = &truth {
        for (path, y) in a.inputs.iter().zip(&data) {
            if y.cols() != t.truth.p() {
                return Err(Error::DimensionMismatch {
                    expected: format!("{} columns in {}", t.truth.p(), path.display()),
                    found: y.cols().to_string(),
                });
            }
        }
    }
    let dirs = fit_dirs(&a.out, a.inputs.len());
    let truth_ref = truth.as_ref().map(|t| &t.truth);
    dirs.par_iter()
        .zip(a.inputs.par_iter().zip(data.par_iter()))
        .map(|(dir, (input, y))| {
            let out = fit_matrix(y, input, cfg, truth_ref)?;
            write_fit(dir, &out)
        })
        .collect::<Result<Vec<()>, _>>()?;
    Ok(dirs)
}

/// A fit read back from disk with its draws.
pub struct LoadedFit {
    pub dir: PathBuf,
    pub artifact: FitArtifact,
    pub summary: PosteriorSummary,
}

pub fn load_fit(dir: &Path, with_samples: bool) -> Result<LoadedFit, Error> {
    let artifact: FitArtifact = read_json(&dir.join(FIT_FILE))?;
    let mut summary = artifact.summary.clone();
    if with_samples {
        let path = dir.join(SAMPLES_FILE);
        if artifact.samples_file.is_none() {
            return Err(Error::Io {
                path: path.display().to_string(),
                message: "the fit was written without samples; rerun fit without --no-samples".into(),
            });
        }
        summary.samples = read_samples(&path)?;
    }
    Ok(LoadedFit { dir: dir.to_path_buf(), artifact, summary })
}

fn pair_truths(truths: &[PathBuf], count: usize) -> Result<Vec<PathBuf>, Error> {
    match truths.len() {
        1 => Ok(vec![truths[0].clone(); count]),
        k if k == count => Ok(truths.to_vec()),
        k => Err(invalid(format!("{k} truth files for {count} fits; give one shared truth or one per fit"))),
    }
}

fn mean_sd(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.len() > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, sd)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// One row of the summary table before aggregation.
struct Row {
    pattern: String,
    method: String,
    frob: f64,
    tpr: Option<f64>,
    fpr: Option<f64>,
    minutes: Option<f64>,
}

pub const TABLE_FILE: &str = "table.csv";
pub const TABLE_HEADER: &str = "pattern,method,fits,frob_mean,frob_sd,tpr_pct,fpr_pct,minutes";

pub fn report_file(k: usize) -> String {
    format!("report_{k:03}.json")
}

pub fn roc_file(k: usize) -> String {
    format!("roc_{k:03}.csv")
}

pub fn evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> Result<Vec<PathBuf>, Error> {
    cfg.validate()?;
    let total = a.fits.len() + a.estimates.len();
    let truth_paths = pair_truths(&a.truths, total)?;
    let mut truths = BTreeMap::new();
    for p in &truth_paths {
        if !truths.contains_key(p) {
            truths.insert(p.clone(), read_truth(p)?);
        }
    }
    create_dir(&a.out)?;
    let prov = provenance(cfg);
    let levels = default_roc_levels();

    let rows: Vec<(Row, Vec<PathBuf>)> = a
        .fits
        .par_iter()
        .enumerate()
        .map(|(k, dir)| -> Result<_, Error> {
            let tp = &truth_paths[k];
            let tf = &truths[tp];
            let fit = load_fit(dir, true)?;
            let timing: Timing = read_json(&dir.join(TIMING_FILE))?;
            let report =
                evaluate_fit(&fit.summary, &fit.artifact.estimate, &tf.truth, fit.artifact.n, a.level, &levels)?;
            let rep_path = a.out.join(report_file(k));
            let roc_path = a.out.join(roc_file(k));
            write_text(&roc_path, &roc_csv(&report.roc))?;
            let row = Row {
                pattern: tf.pattern(),
                method: fit.artifact.method.clone(),
                frob: report.frob_error,
                tpr: report.tpr,
                fpr: report.fpr,
                minutes: Some(timing.minutes),
            };
            let file = ReportFile {
                provenance: prov.clone(),
                source: dir.clone(),
                truth: tp.clone(),
                pattern: row.pattern.clone(),
                method: row.method.clone(),
                report,
            };
            write_json(&rep_path, &file)?;
            Ok((row, vec![rep_path, roc_path]))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = rows;

    for (k, path) in a.estimates.iter().enumerate() {
        let idx = a.fits.len() + k;
        let tp = &truth_paths[idx];
        let tf = &truths[tp];
        let est = read_matrix_csv(path)?;
        let diff = est.sub(&tf.truth.omega_star)?;
        let rep = ExternalReport {
            provenance: prov.clone(),
            source: path.clone(),
            truth: tp.clone(),
            pattern: tf.pattern(),
            method: a.method.clone(),
            frob_error: diff.frobenius_norm(),
            spectral_error: spectral_norm(&diff)?,
        };
        let rep_path = a.out.join(report_file(idx));
        write_json(&rep_path, &rep)?;
        let row = Row { pattern: rep.pattern, method: rep.method, frob: rep.frob_error, tpr: None, fpr: None, minutes: None };
        rows.push((row, vec![rep_path]));
    }

    // Group by (pattern, method) in order of first appearance.
    let mut order: Vec<(String, String)> = Vec::new();
    for (r, _) in &rows {
        let key = (r.pattern.clone(), r.method.clone());
        if !order.contains(&key) {
            order.push(key);
        }
    }
    let mut table = format!("{TABLE_HEADER}\n");
    for (pattern, method) in &order {
        let group: Vec<&Row> = rows.iter().map(|(r, _)| r).filter(|r| &r.pattern == pattern && &r.method == method).collect();
        let frob: Vec<f64> = group.iter().map(|r| r.frob).collect();
        let (fm, fsd) = mean_sd(&frob);
        let avg = |f: &dyn Fn(&Row) -> Option<f64>| -> Option<f64> {
            let v: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        table.push_str(&format!(
            "{pattern},{method},{},{fm},{},{},{},{}\n",
            group.len(),
            fmt_opt(fsd),
            fmt_opt(avg(&|r| r.tpr.map(|x| 100.0 * x))),
            fmt_opt(avg(&|r| r.fpr.map(|x| 100.0 * x))),
            fmt_opt(avg(&|r| r.minutes)),
        ));
    }
    let table_path = a.out.join(TABLE_FILE);
    write_text(&table_path, &table)?;
    let mut files: Vec<String> = (0..a.fits.len()).map(roc_file).collect();
    files.push(TABLE_FILE.into());
    let run = RunRecord {
        provenance: prov,
        files,
        description: "roc_k.csv: (fpr, tpr) per credible level for fit k. table.csv: per pattern and method, \
                      Frobenius error mean/sd, mean TPR and FPR in percent, mean wall-clock minutes per fit"
            .into(),
    };
    write_json(&a.out.join(RUN_FILE), &run)?;
    let mut written: Vec<PathBuf> = rows.into_iter().flat_map(|(_, p)| p).collect();
    written.push(table_path);
    Ok(written)
}

pub fn roc(a: &RocArgs, cfg: &RunConfig) -> Result<Vec<PathBuf>, Error> {
    cfg.validate()?;
    let truth_paths = pair_truths(&a.truths, a.fits.len())?;
    let levels = log_spaced(DEFAULT_ROC_MIN, DEFAULT_ROC_MAX, a.points);
    create_dir(&a.out)?;
    let written = a
        .fits
        .par_iter()
        .zip(truth_paths.par_iter())
        .enumerate()
        .map(|(k, (dir, tp))| {
            let truth = read_truth(tp)?;
            let fit = load_fit(dir, true)?;
            let pts = roc_sweep(&SortedSamples::new(&fit.summary.samples), &truth.truth.support, &levels)?;
            let path = a.out.join(roc_file(k));
            write_text(&path, &roc_csv(&pts))?;
            Ok(path)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let run = RunRecord {
        provenance: provenance(cfg),
        files: (0..a.fits.len()).map(roc_file).collect(),
        description: format!("(fpr, tpr) at {} log-spaced credible levels, one file per fit", a.points),
    };
    write_json(&a.out.join(RUN_FILE), &run)?;
    Ok(written)
}

pub const RHAT_FILE: &str = "rhat.json";

pub fn trace_chain_file(c: usize) -> String {
    format!("trace_chain{c}.csv")
}

pub fn diagnose(a: &DiagnoseArgs, cfg: &RunConfig) -> Result<Vec<PathBuf>, Error> {
    cfg.validate()?;
    let fit = load_fit(&a.fit, false)?;
    let summary = &fit.summary;
    create_dir(&a.out)?;
    let mut written = Vec::new();
    for (c, ch) in summary.chains.iter().enumerate() {
        let mut s = String::from("iteration,frob,norm,tau2");
        for &(j, i) in &ch.entries {
            s.push_str(&format!(",omega_{j}_{i}"));
        }
        s.push('\n');
        for t in 0..ch.frob.len() {
            s.push_str(&format!("{},{},{},{}", t + 1, ch.frob[t], ch.norm[t], ch.tau2[t]));
            for e in &ch.entry_traces {
                s.push_str(&format!(",{}", e[t]));
            }
            s.push('\n');
        }
        let path = a.out.join(trace_chain_file(c));
        write_text(&path, &s)?;
        written.push(path);
    }
    let entries = if summary.chains.len() > 1 { monitored_rhat(summary)? } else { Vec::new() };
    let converged = (!entries.is_empty()).then(|| entries.iter().all(|e| e.value < RHAT_THRESHOLD));
    let relative_sd: Vec<f64> =
        summary.chains.iter().map(|c| trace_relative_sd(&c.frob, a.window)).collect::<Result<_, _>>()?;
    let stable = relative_sd.iter().all(|&r| r < 0.1);
    let prov = provenance(cfg);
    let rhat = RhatFile {
        provenance: prov.clone(),
        variant: "classic".into(),
        threshold: RHAT_THRESHOLD,
        entries,
        converged,
        window: a.window,
        relative_sd,
        stable,
    };
    let path = a.out.join(RHAT_FILE);
    write_json(&path, &rhat)?;
    written.push(path);
    let run = RunRecord {
        provenance: prov,
        files: (0..summary.chains.len()).map(trace_chain_file).collect(),
        description: "per-iteration Frobenius distance to the reference, Frobenius norm, global scale and monitored entries".into(),
    };
    write_json(&a.out.join(RUN_FILE), &run)?;
    Ok(written)
}

pub fn check_prior(a: &CheckPriorArgs, cfg: &RunConfig) -> Result<PriorCheckRecord, Error> {
    let spec = PriorConditionSpec {
        a_n: a.a_n,
        e_n: a.e_n,
        p: a.p,
        u: a.u,
        c: a.c,
        alpha: cfg.alpha.expect("alpha is resolved when the config is built"),
    };
    spec.validate()?;
    let conc = check_concentration(&spec)?;
    let thick = check_thickness(&spec)?;
    let record = PriorCheckRecord {
        alpha: spec.alpha,
        a_n: spec.a_n,
        e_n: spec.e_n,
        p: spec.p,
        u: spec.u,
        c: spec.c,
        mass_outside: conc.mass_outside,
        inf_density: thick.inf_density,
        passes_7a: conc.passes,
        passes_7b: thick.passes,
    };
    if let Some(out) = &a.out {
        #[derive(serde::Serialize)]
        struct WithProvenance<'a> {
            #[serde(flatten)]
            provenance: Provenance,
            #[serde(flatten)]
            record: &'a PriorCheckRecord,
        }
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        write_json(out, &WithProvenance { provenance: provenance(cfg), record: &record })?;
    }
    Ok(record)
}

pub const BENCH_FILE: &str = "bench.json";

pub fn bench(a: &BenchArgs, cfg: &RunConfig) -> Result<BenchRecord, Error> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = PatternSpec::new(a.pattern, a.p, a.gibbs.seed);
    let truth = generate_pattern(&spec)?;
    let y = sample_mvn(&truth, a.n, &mut RngStream::new(a.gibbs.seed, DATA_STREAM))?;
    let simulate_seconds = start.elapsed().as_secs_f64();
    let out = fit_matrix(&y, Path::new("<simulated>"), cfg, Some(&truth))?;
    let gibbs = cfg.gibbs_config(a.p);
    let record = BenchRecord {
        provenance: provenance(cfg),
        p: a.p,
        n: a.n,
        iterations: gibbs.n_iter,
        retained: gibbs.retained() * gibbs.n_chains,
        simulate_seconds,
        timing: out.timing,
    };
    create_dir(&a.out)?;
    write_json(&a.out.join(BENCH_FILE), &record)?;
    Ok(record)
}
