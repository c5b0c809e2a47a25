//! Command implementations. Each takes a validated [`RunConfig`] and
//! returns a serialisable summary; argument parsing lives in the parent
//! module.

use std::ops::Range;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use super::config::RunConfig;
use crate::cube_pipeline::{detect_snapshots, make_training_pairs, read_cube, TrainingPair};
use crate::dataset::{read_dataset, read_truth, truth_path, write_dataset, ARDS_MAGIC};
use crate::evaluation::{read_summary, run_study, write_report, StudyScene};
use crate::extrapolator::{
    extend_apertures, init_model, load_model, save_model, train_with, ExtrapolatorModel, PairSet,
};
use crate::scene_sim::{generate_dataset, DatasetSummary};
use crate::{Error, Result};

pub fn cmd_simulate(cfg: &RunConfig, count: usize, out: &Path) -> Result<DatasetSummary> {
    cfg.validate()?;
    generate_dataset(&cfg.sim, &cfg.large_array()?, count, cfg.master_seed, cfg.split, out)
}

/// Training log next to a model file: `model.afrx` -> `model.log.csv`.
pub fn log_path(model: &Path) -> PathBuf {
    model.with_extension("log.csv")
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub model: PathBuf,
    pub log: PathBuf,
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub parameters: usize,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

fn pairs_of(records: &[Vec<Complex64>], range: Range<usize>, cfg: &RunConfig) -> Result<Vec<TrainingPair>> {
    let split = cfg.aperture_split()?;
    let mut out = Vec::with_capacity(2 * range.len());
    for snap in &records[range] {
        let (right, left) = make_training_pairs(snap, split.small(), split.outer())?;
        out.push(right);
        out.push(left);
    }
    Ok(out)
}

fn check_elements(found: usize, cfg: &RunConfig, path: &Path) -> Result<()> {
    if found != cfg.large_elements {
        return Err(Error::Config(format!(
            "{} holds {found}-element snapshots but the configuration expects M = {}",
            path.display(),
            cfg.large_elements
        )));
    }
    Ok(())
}

/// Train on the dataset's train split, early-stop on its validation split.
pub fn cmd_train(cfg: &RunConfig, dataset: &Path, out_model: &Path) -> Result<TrainSummary> {
    cfg.validate()?;
    let data = read_dataset(dataset)?;
    check_elements(data.num_elements, cfg, dataset)?;
    let (train_range, val_range, _) = cfg.split.ranges(data.len());
    let train_set = PairSet::<f32>::from_pairs(&pairs_of(&data.records, train_range, cfg)?)?;
    let val_set = PairSet::<f32>::from_pairs(&pairs_of(&data.records, val_range, cfg)?)?;
    let init = init_model::<f32>(cfg.hidden_size, cfg.master_seed)?;
    let parameters = init.num_params();
    let (model, log) = train_with(init, &train_set, &val_set, &cfg.train, |e| {
        eprintln!("epoch {:>4}  train {:.6e}  val {:.6e}", e.epoch, e.train_loss, e.val_loss);
    })?;
    save_model(&model, out_model)?;
    let log_file = log_path(out_model);
    log.write_csv(&log_file)?;
    Ok(TrainSummary {
        model: out_model.to_path_buf(),
        log: log_file,
        train_pairs: train_set.len(),
        validation_pairs: val_set.len(),
        parameters,
        initial_val_loss: log.initial_val_loss,
        best_val_loss: log.best_val_loss,
        best_epoch: log.best_epoch,
        epochs_run: log.epochs.len(),
        stopped_early: log.stopped_early,
    })
}

/// Which dataset records `evaluate` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RecordSelection {
    /// The test split of the configured split fractions.
    Test,
    /// Every record, for a dataset simulated only for evaluation.
    All,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateSummary {
    pub scenes: usize,
    pub files: Vec<PathBuf>,
    pub arms: Vec<ArmLine>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmLine {
    pub aperture: String,
    pub estimator: String,
    pub resolution_rate: f64,
    pub pd: f64,
    pub pfa: f64,
}

fn load_checked_model(cfg: &RunConfig, path: &Path) -> Result<ExtrapolatorModel<f32>> {
    let model = load_model(path)?;
    if model.hidden_size() != cfg.hidden_size {
        return Err(Error::Config(format!(
            "{} has hidden size {} but the configuration expects {}",
            path.display(),
            model.hidden_size(),
            cfg.hidden_size
        )));
    }
    Ok(model)
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    dataset: &Path,
    model: Option<&Path>,
    records: RecordSelection,
    report_dir: &Path,
) -> Result<EvaluateSummary> {
    cfg.validate()?;
    let model = model.map(|p| load_checked_model(cfg, p)).transpose()?;
    let data = read_dataset(dataset)?;
    check_elements(data.num_elements, cfg, dataset)?;
    let truth_file = truth_path(dataset);
    let truth = read_truth(&truth_file)?;
    if truth.len() != data.len() {
        return Err(Error::format(
            &truth_file,
            format!("{} truth records for {} snapshots", truth.len(), data.len()),
        ));
    }
    let range = match records {
        RecordSelection::All => 0..data.len(),
        RecordSelection::Test => cfg.split.ranges(data.len()).2,
    };
    if range.is_empty() {
        return Err(Error::Config(format!("no {records:?} records to evaluate in {}", dataset.display())));
    }
    let scenes: Vec<StudyScene> = range
        .map(|i| StudyScene {
            samples: data.records[i].clone(),
            truth: truth[i].scene.clone(),
        })
        .collect();
    let report = run_study(
        &scenes,
        cfg.aperture_split()?,
        cfg.spacing_wavelengths,
        model.as_ref(),
        &cfg.study,
    )?;
    let files = write_report(&report, report_dir)?;
    Ok(EvaluateSummary {
        scenes: report.scenes,
        files,
        arms: report
            .arms
            .iter()
            .map(|a| ArmLine {
                aperture: a.aperture.to_string(),
                estimator: a.estimator.to_string(),
                resolution_rate: a.resolution_rate(),
                pd: a.operating.pd,
                pfa: a.operating.pfa,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtrapolateSummary {
    pub input: PathBuf,
    pub output: PathBuf,
    pub snapshots: usize,
    pub elements: usize,
}

/// Small-array snapshots: an ARDS dataset of `L`- or `M`-element records
/// (the inner `L` are used), or a radar cube run through range-Doppler
/// processing and CFAR.
fn small_snapshots(cfg: &RunConfig, input: &Path) -> Result<Vec<Vec<Complex64>>> {
    let split = cfg.aperture_split()?;
    let mut magic = [0u8; 4];
    let mut file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let is_ards = std::io::Read::read_exact(&mut file, &mut magic).is_ok() && &magic == ARDS_MAGIC;
    if is_ards {
        let data = read_dataset(input)?;
        return match data.num_elements {
            n if n == split.small() => Ok(data.records),
            n if n == split.large() => Ok(data.records.iter().map(|r| split.inner(r).to_vec()).collect()),
            n => Err(Error::Config(format!(
                "{} holds {n}-element snapshots; expected L = {} or M = {}",
                input.display(),
                split.small(),
                split.large()
            ))),
        };
    }
    let cube = read_cube(input)?;
    if cube.array.num_elements() != split.small() {
        return Err(Error::Config(format!(
            "cube has {} antennas; expected L = {}",
            cube.array.num_elements(),
            split.small()
        )));
    }
    Ok(detect_snapshots(&cube, &cfg.cfar)?.into_iter().map(|s| s.samples).collect())
}

pub fn cmd_extrapolate(cfg: &RunConfig, input: &Path, model: &Path, out: &Path) -> Result<ExtrapolateSummary> {
    cfg.validate()?;
    let model = load_checked_model(cfg, model)?;
    let split = cfg.aperture_split()?;
    let small = small_snapshots(cfg, input)?;
    let mut full = Vec::with_capacity(small.len());
    for chunk in small.chunks(cfg.study.chunk_size) {
        full.extend(extend_apertures(&model, chunk, split.half())?);
    }
    write_dataset(out, split.large(), &full)?;
    Ok(ExtrapolateSummary {
        input: input.to_path_buf(),
        output: out.to_path_buf(),
        snapshots: full.len(),
        elements: split.large(),
    })
}

/// Re-render the CSVs and SVGs of a previous `evaluate` run.
pub fn cmd_report(summary: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let report = read_summary(summary)?;
    write_report(&report, out_dir)
}
