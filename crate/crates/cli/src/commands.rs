use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dpv_core::validation::run_validation;
use dpv_core::valuation::global_comparison;
use dpv_core::{
    chronological_split, discretize, fit_model, generate_synthetic, ingest_csv, read_model, score_dataset,
    search_all, write_csv, write_model, ExperimentDataset,
};
use serde::Serialize;
use serde_json::json;

use crate::{CliError, RunConfig};

/// How a successful command ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    /// Text for standard output.
    pub stdout: String,
}

impl Outcome {
    fn done(stdout: String) -> Self {
        Self { code: 0, stdout }
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Reads and discretizes the input file as the config describes.
fn load(cfg: &RunConfig, input: &Path) -> Result<(ExperimentDataset, Vec<String>), CliError> {
    let file = File::open(input).map_err(|e| CliError::io(input, e))?;
    let raw = ingest_csv(file, &cfg.schema)?;
    let d = discretize(&raw, &cfg.discretization)?;
    let warnings = d
        .warnings
        .into_iter()
        .map(|w| format!("{}: {}", w.feature, w.message))
        .collect();
    Ok((d.dataset, warnings))
}

#[derive(Serialize)]
struct TruthRecord<'a> {
    id: &'a str,
    effect: f64,
}

/// Writes a synthetic experiment to `out` and its true effects to
/// `<out>.truth.json`.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let synthetic = generate_synthetic(&cfg.synthetic)?;
    let mut w = create(out)?;
    write_csv(&synthetic.dataset, &mut w)?;
    w.flush().map_err(|e| CliError::io(out, e))?;

    let truth: Vec<TruthRecord> = synthetic
        .dataset
        .instances()
        .iter()
        .zip(&synthetic.true_effects)
        .map(|(inst, &effect)| TruthRecord { id: &inst.id, effect })
        .collect();
    let path = sidecar(out, ".truth.json");
    write_json(&path, &json!({ "config": cfg.echo(), "seed": cfg.seed, "true_effects": truth }))?;
    Ok(Outcome::done(format!(
        "wrote {} instances to {}\n",
        synthetic.dataset.len(),
        out.display()
    )))
}

/// Discovers representations and eligible subpopulations on the training
/// split. Writes the model to `out` and a log to `<out>.log.json`; exits 3
/// when nothing is eligible.
pub fn discover(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Outcome, CliError> {
    let (dataset, warnings) = load(cfg, input)?;
    let (train, test) = chronological_split(&dataset, cfg.train_fraction)?;
    let report = search_all(&train, &cfg.search)?;
    let model = fit_model(&train, report.accepted.clone(), &cfg.eligibility, cfg.quantization)?;

    let mut w = create(out)?;
    write_model(&model, Some(cfg.echo()), &mut w)?;
    w.flush().map_err(|e| CliError::io(out, e))?;

    let accepted: Vec<_> = report
        .accepted
        .iter()
        .map(|a| {
            let members = model.subpops.iter().filter(|s| s.rep_index == a.order_index).count();
            json!({
                "order_index": a.order_index,
                "K": a.representation.k(),
                "objective": a.objective,
                "eligible_subpops": members,
            })
        })
        .collect();
    let log = json!({
        "config": cfg.echo(),
        "seed": cfg.seed,
        "train_size": train.len(),
        "test_size": test.len(),
        "columns": report.columns,
        "total_pairs": report.total_pairs,
        "sampled": report.sampled,
        "representations": accepted,
        "searches": report.traces,
        "max_orthonormality_error": report.max_orthonormality_error(),
        "eligible_subpops": model.subpops.len(),
        "global_train": global_comparison(&train, &cfg.eligibility),
        "warnings": warnings,
    });
    write_json(&sidecar(out, ".log.json"), &log)?;

    let summary = format!(
        "{} representations, {} eligible subpopulations\n",
        report.accepted.len(),
        model.subpops.len()
    );
    Ok(Outcome {
        code: if model.is_empty() { 3 } else { 0 },
        stdout: summary,
    })
}

/// Scores every instance of `input` with the model, writing `id,dpv` rows.
pub fn score(cfg: &RunConfig, input: &Path, model_path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let file = File::open(model_path).map_err(|e| CliError::io(model_path, e))?;
    let model = read_model(file)?;
    let (dataset, _) = load(cfg, input)?;
    let scores = score_dataset(&dataset, &model)?;
    let mut w = create(out)?;
    writeln!(w, "id,dpv").map_err(|e| CliError::io(out, e))?;
    for (id, v) in &scores {
        writeln!(w, "{},{v}", csv_field(id)).map_err(|e| CliError::io(out, e))?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    Ok(Outcome::done(format!("scored {} instances\n", scores.len())))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs the held-out quartile validation and writes the report JSON; the
/// text table goes to standard output.
pub fn validate(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Outcome, CliError> {
    let (dataset, _) = load(cfg, input)?;
    let (train, test) = chronological_split(&dataset, cfg.train_fraction)?;
    let run = run_validation(&train, &test, &cfg.search, &cfg.eligibility, cfg.quantization)?;
    let doc = json!({
        "config": cfg.echo(),
        "seed": cfg.seed,
        "train_size": train.len(),
        "test_size": test.len(),
        "representations": run.search.accepted.len(),
        "max_orthonormality_error": run.search.max_orthonormality_error(),
        "report": run.report,
    });
    write_json(out, &doc)?;
    Ok(Outcome::done(run.report.table(&cfg.schema.metric)))
}
