//! The subcommands: load inputs, call [`crate::experiment`], write outputs.
//!
//! Every command computes all of its results in memory first, writes each
//! file to a temporary name in the output directory and renames them into
//! place only after all writes succeeded.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sspca_core::ufs::{self, LabelVector};
use sspca_core::Matrix;

use crate::config::RunConfig;
use crate::experiment;
use crate::io::{encode_matrix, load_labels, load_matrix, MatrixFormat};
use crate::model_io::model_to_string;
use crate::report;
use crate::synth::{synth, SynthParams};

pub const PROJECTION_FILE: &str = "projection.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const MODEL_FILE: &str = "model.txt";
pub const TRAIN_HISTORY_FILE: &str = "train_history.csv";
pub const GRID_FILE: &str = "grid.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const LABELS_FILE: &str = "labels.txt";
pub const INFORMATIVE_FILE: &str = "informative.txt";

/// Writes `files` into `dir` all-or-nothing (up to the final renames) and
/// returns their paths.
pub fn commit(dir: &Path, files: Vec<(String, Vec<u8>)>) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
        if let Err(e) = fs::write(&tmp, bytes) {
            let _ = fs::remove_file(&tmp);
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        fs::rename(&tmp, &path)
            .with_context(|| format!("moving {} to {}", tmp.display(), path.display()))?;
        written.push(path);
    }
    Ok(written)
}

fn load_inputs(cfg: &RunConfig) -> anyhow::Result<(Matrix, Option<LabelVector>)> {
    let data = load_matrix(&cfg.data_path).context("loading data")?;
    let labels = cfg
        .labels_path
        .as_deref()
        .map(|p| load_labels(p).context("loading labels"))
        .transpose()?;
    Ok((data, labels))
}

fn text(name: &str, body: String) -> (String, Vec<u8>) {
    (name.to_string(), body.into_bytes())
}

/// `run`: solve, train or grid-search per `cfg.mode`.
pub fn cmd_run(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = cfg.output_dir()?.to_path_buf();
    let (data, labels) = load_inputs(cfg)?;
    let out = experiment::run(cfg, data, labels.as_ref())?;
    let mut files = vec![
        (
            PROJECTION_FILE.to_string(),
            encode_matrix(&out.projection, MatrixFormat::Csv),
        ),
        text(HISTORY_FILE, report::history_csv(&out.history)),
    ];
    if let Some(model) = &out.model {
        files.push(text(MODEL_FILE, model_to_string(model)));
    }
    if let Some(h) = &out.train_history {
        files.push(text(TRAIN_HISTORY_FILE, report::train_history_csv(h)));
    }
    if let Some(g) = &out.grid {
        files.push(text(GRID_FILE, report::grid_csv(g)));
    }
    if let Some(e) = &out.eval {
        files.push(text(EVAL_FILE, report::eval_csv(e)));
    }
    files.push(text(CONFIG_FILE, out.effective.to_json()));
    commit(&dir, files)
}

/// `ablate`: grid search, untrained, tied and untied networks side by side.
pub fn cmd_ablate(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = cfg.output_dir()?.to_path_buf();
    let (data, labels) = load_inputs(cfg)?;
    let (rows, effective) = experiment::ablate(cfg, data, labels.as_ref())?;
    commit(
        &dir,
        vec![
            text(ABLATION_FILE, report::ablation_csv(&rows)),
            text(CONFIG_FILE, effective.to_json()),
        ],
    )
}

/// `sweep`: trained loss for depths `1..=max_depth`.
pub fn cmd_sweep(cfg: &RunConfig, max_depth: usize) -> anyhow::Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = cfg.output_dir()?.to_path_buf();
    let (data, labels) = load_inputs(cfg)?;
    let (rows, effective) = experiment::sweep(cfg, data, labels.as_ref(), max_depth)?;
    commit(
        &dir,
        vec![
            text(SWEEP_FILE, report::sweep_csv(&rows)),
            text(CONFIG_FILE, effective.to_json()),
        ],
    )
}

/// `synth`: a planted instance as `data.{csv,bin}`, `labels.txt` and
/// `informative.txt` (planted row indices, one per line).
pub fn cmd_synth(
    params: &SynthParams,
    dir: &Path,
    format: MatrixFormat,
) -> anyhow::Result<Vec<PathBuf>> {
    let s = synth(params).context("generating synthetic data")?;
    let data_name = match format {
        MatrixFormat::Csv => "data.csv",
        MatrixFormat::Binary => "data.bin",
    };
    let labels: String = s
        .labels
        .assignments()
        .iter()
        .map(|l| format!("{l}\n"))
        .collect();
    let informative: String = s.informative.iter().map(|i| format!("{i}\n")).collect();
    commit(
        dir,
        vec![
            (data_name.to_string(), encode_matrix(&s.data, format)),
            text(LABELS_FILE, labels),
            text(INFORMATIVE_FILE, informative),
        ],
    )
}

/// Inputs of the `eval` command.
#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub data_path: PathBuf,
    pub labels_path: PathBuf,
    pub projection_path: PathBuf,
    pub feature_counts: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// `eval`: score an existing projection against labels.
pub fn cmd_eval(req: &EvalRequest) -> anyhow::Result<Vec<PathBuf>> {
    let data = load_matrix(&req.data_path).context("loading data")?;
    let labels = load_labels(&req.labels_path).context("loading labels")?;
    let x = load_matrix(&req.projection_path).context("loading projection")?;
    let report = ufs::evaluate(
        &data,
        &labels,
        &x,
        &req.feature_counts,
        req.repeats,
        req.seed,
    )
    .context("evaluating feature selection")?;
    commit(
        &req.output_dir,
        vec![text(EVAL_FILE, report::eval_csv(&report))],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_every_file_and_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested/out");
        let written = commit(
            &out,
            vec![text("a.txt", "1\n".into()), text("b.txt", "2\n".into())],
        )
        .unwrap();
        assert_eq!(written, vec![out.join("a.txt"), out.join("b.txt")]);
        let mut names: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["a.txt", "b.txt"]);
        assert_eq!(fs::read_to_string(out.join("b.txt")).unwrap(), "2\n");
    }

    #[test]
    fn commit_cleans_up_after_a_failed_write() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![text("a.txt", "1".into()), text("missing/b.txt", "2".into())];
        assert!(commit(dir.path(), files).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
