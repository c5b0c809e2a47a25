//! Three-aperture comparison over a scene set: the full `M`-element array,
//! its inner `L` elements, and the inner elements extended back to `M` by
//! the extrapolator.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crb::crb;
use super::matching::{default_tolerance, match_detections};
use super::metrics::{
    angular_cells, doa_mse, histogram, min_angular_separation, roc_counts, validate_thresholds, Histogram,
    MseBucket, RocCounts, RocPoint,
};
use crate::array_model::{AngleDeg, ArrayConfig};
use crate::cube_pipeline::ApertureSplit;
use crate::doa::{
    detect_peaks, hankel_columns, ss_music_spectrum_with, AngularSpectrum, Estimator, FourierBeamformer,
    HankelMode, DEFAULT_FFT_GRID, DEFAULT_MUSIC_GRID,
};
use crate::extrapolator::{extend_apertures, ExtrapolatorModel, Scalar};
use crate::scene_sim::Scene;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aperture {
    Large,
    Small,
    Artificial,
}

impl fmt::Display for Aperture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aperture::Large => "large",
            Aperture::Small => "small",
            Aperture::Artificial => "artificial",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub estimators: Vec<Estimator>,
    /// ROC thresholds as fractions of the spectrum maximum, descending.
    pub thresholds: Vec<f64>,
    /// Threshold for the separation histogram, MSE and resolution rate.
    pub operating_threshold: f64,
    /// Matching tolerance; half the large-array beamwidth when unset.
    pub match_tolerance_deg: Option<f64>,
    pub histogram_bin_deg: f64,
    pub fft_grid: usize,
    pub music_grid: usize,
    pub hankel_mode: HankelMode,
    /// Scenes per work unit (and per batched extrapolator rollout).
    pub chunk_size: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            estimators: vec![Estimator::Fourier],
            thresholds: (1..=20).rev().map(|k| k as f64 / 20.0).collect(),
            operating_threshold: 0.25,
            match_tolerance_deg: None,
            histogram_bin_deg: 0.25,
            fft_grid: DEFAULT_FFT_GRID,
            music_grid: DEFAULT_MUSIC_GRID,
            hankel_mode: HankelMode::Forward,
            chunk_size: 256,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimator selected".into()));
        }
        validate_thresholds(&self.thresholds)?;
        if !(self.operating_threshold > 0.0 && self.operating_threshold <= 1.0) {
            return Err(Error::Config(format!("operating threshold {}", self.operating_threshold)));
        }
        if let Some(t) = self.match_tolerance_deg {
            if !(t > 0.0) {
                return Err(Error::Config(format!("match tolerance {t}")));
            }
        }
        if !(self.histogram_bin_deg > 0.0) {
            return Err(Error::Config(format!("histogram bin width {}", self.histogram_bin_deg)));
        }
        if self.chunk_size == 0 || self.music_grid == 0 {
            return Err(Error::Config("chunk size and MUSIC grid must be positive".into()));
        }
        Ok(())
    }
}

/// One evaluation scene: the full-array snapshot and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyScene {
    pub samples: Vec<Complex64>,
    pub truth: Scene,
}

/// Results of one aperture under one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub aperture: Aperture,
    pub estimator: Estimator,
    pub elements: usize,
    pub scenes: usize,
    pub roc: Vec<RocPoint>,
    /// Totals at the operating threshold.
    pub operating: RocCountsSummary,
    /// Scenes in which every target was matched at the operating threshold.
    pub resolved_scenes: usize,
    pub min_separations_deg: Vec<f64>,
    pub histogram: Histogram,
    pub mse: Vec<MseBucket>,
    /// Mean CRB diagonal per SNR bucket, deg^2, aligned with `mse`.
    pub crb_deg2: Vec<Option<f64>>,
    /// Scenes where MUSIC had to use fewer sources than the truth because
    /// the aperture cannot hold more.
    pub clamped_order: usize,
    /// Scenes whose spectrum could not be computed; scored as all misses.
    pub failed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RocCountsSummary {
    pub true_positives: usize,
    pub false_alarms: usize,
    pub truths: usize,
    pub cells: usize,
    pub pfa: f64,
    pub pd: f64,
}

impl ArmStats {
    pub fn resolution_rate(&self) -> f64 {
        self.resolved_scenes as f64 / self.scenes.max(1) as f64
    }

    pub fn false_alarms_per_scene(&self) -> f64 {
        self.operating.false_alarms as f64 / self.scenes.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub large_elements: usize,
    pub small_elements: usize,
    pub scenes: usize,
    pub match_tolerance_deg: f64,
    pub operating_threshold: f64,
    pub arms: Vec<ArmStats>,
}

impl StudyReport {
    pub fn arm(&self, aperture: Aperture, estimator: Estimator) -> Option<&ArmStats> {
        self.arms
            .iter()
            .find(|a| a.aperture == aperture && a.estimator == estimator)
    }
}

/// Everything one (scene, aperture, estimator) contributes.
#[derive(Debug, Clone, Default)]
struct Outcome {
    roc: Vec<RocCounts>,
    operating: RocCounts,
    resolved: bool,
    min_sep: Option<f64>,
    errors_deg: Vec<f64>,
    clamped: bool,
    failed: bool,
}

struct Arms<'a> {
    split: ApertureSplit,
    spacing: f64,
    cfg: &'a StudyConfig,
    tol: f64,
    fourier: FourierBeamformer,
}

impl Arms<'_> {
    fn spectrum(&self, samples: &[Complex64], estimator: Estimator, targets: usize) -> Result<(AngularSpectrum, bool)> {
        match estimator {
            Estimator::Fourier => Ok((self.fourier.spectrum(samples)?, false)),
            Estimator::Music => {
                let rows = samples.len() + 1 - hankel_columns(samples.len());
                let p = targets.min(rows - 1).max(1);
                let spec = ss_music_spectrum_with(samples, self.spacing, p, self.cfg.music_grid, self.cfg.hankel_mode)?;
                Ok((spec, p < targets))
            }
        }
    }

    fn score(&self, samples: &[Complex64], estimator: Estimator, truths: &[AngleDeg]) -> Outcome {
        let cells = angular_cells(&ArrayConfig::new(samples.len(), self.spacing).expect("validated array"));
        let miss_all = || RocCounts {
            true_positives: 0,
            false_alarms: 0,
            truths: truths.len(),
            cells,
        };
        let scored = self.spectrum(samples, estimator, truths.len()).and_then(|(spec, clamped)| {
            let roc = roc_counts(&spec, truths, &self.cfg.thresholds, self.tol, cells)?;
            let dets = detect_peaks(&spec, self.cfg.operating_threshold)?;
            let m = match_detections(&dets.angles_deg, truths, self.tol);
            Ok(Outcome {
                roc,
                operating: RocCounts {
                    true_positives: m.true_positives,
                    false_alarms: m.false_alarms,
                    truths: truths.len(),
                    cells,
                },
                resolved: m.all_resolved(),
                min_sep: min_angular_separation(&dets.angles_deg),
                errors_deg: m.pairings.iter().map(|p| p.error_deg).collect(),
                clamped,
                failed: false,
            })
        });
        scored.unwrap_or_else(|_| Outcome {
            roc: vec![miss_all(); self.cfg.thresholds.len()],
            operating: miss_all(),
            failed: true,
            ..Outcome::default()
        })
    }
}

/// Per-scene results for every `(aperture, estimator)` arm, plus the mean
/// CRB per aperture size.
struct SceneResult {
    snr_db: f64,
    outcomes: Vec<Outcome>,
    crb_large: Option<f64>,
    crb_small: Option<f64>,
}

fn mean_crb_deg2(scene: &Scene, cfg: &ArrayConfig) -> Option<f64> {
    let d = crb(scene, cfg).ok()?.diagonal_deg2();
    Some(d.iter().sum::<f64>() / d.len() as f64)
}

/// Score every scene on the large, small and (with a model) artificial
/// apertures for each configured estimator.
pub fn run_study<T: Scalar>(
    scenes: &[StudyScene],
    split: ApertureSplit,
    spacing_wavelengths: f64,
    model: Option<&ExtrapolatorModel<T>>,
    cfg: &StudyConfig,
) -> Result<StudyReport> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::Degenerate("empty scene set".into()));
    }
    let large_cfg = ArrayConfig::new(split.large(), spacing_wavelengths)?;
    let small_cfg = ArrayConfig::new(split.small(), spacing_wavelengths)?;
    for (i, s) in scenes.iter().enumerate() {
        if s.samples.len() != split.large() {
            return Err(Error::Config(format!(
                "scene {i} has {} elements, expected {}",
                s.samples.len(),
                split.large()
            )));
        }
        if s.truth.targets.is_empty() {
            return Err(Error::Config(format!("scene {i} has no targets")));
        }
    }
    let tol = cfg.match_tolerance_deg.unwrap_or_else(|| default_tolerance(&large_cfg));
    let arms = Arms {
        split,
        spacing: spacing_wavelengths,
        cfg,
        tol,
        fourier: FourierBeamformer::new(cfg.fft_grid, spacing_wavelengths)?,
    };
    let mut apertures = vec![Aperture::Large, Aperture::Small];
    if model.is_some() {
        apertures.push(Aperture::Artificial);
    }
    let combos: Vec<(Aperture, Estimator)> = apertures
        .iter()
        .flat_map(|a| cfg.estimators.iter().map(move |e| (*a, *e)))
        .collect();

    let chunks: Vec<Vec<SceneResult>> = scenes
        .par_chunks(cfg.chunk_size)
        .map(|chunk| -> Result<Vec<SceneResult>> {
            let inners: Vec<Vec<Complex64>> = chunk
                .iter()
                .map(|s| arms.split.inner(&s.samples).to_vec())
                .collect();
            let artificial = match model {
                Some(m) => Some(extend_apertures(m, &inners, arms.split.half())?),
                None => None,
            };
            Ok(chunk
                .iter()
                .enumerate()
                .map(|(i, scene)| {
                    let truths = scene.truth.angles();
                    let outcomes = combos
                        .iter()
                        .map(|(aperture, estimator)| {
                            let samples: &[Complex64] = match aperture {
                                Aperture::Large => &scene.samples,
                                Aperture::Small => &inners[i],
                                Aperture::Artificial => &artificial.as_ref().expect("model present")[i],
                            };
                            arms.score(samples, *estimator, &truths)
                        })
                        .collect();
                    SceneResult {
                        snr_db: scene.truth.snr_db,
                        outcomes,
                        crb_large: mean_crb_deg2(&scene.truth, &large_cfg),
                        crb_small: mean_crb_deg2(&scene.truth, &small_cfg),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let results: Vec<SceneResult> = chunks.into_iter().flatten().collect();

    let buckets: Vec<f64> = {
        let set: BTreeSet<u64> = results.iter().map(|r| r.snr_db.to_bits()).collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    };

    let mut out = Vec::with_capacity(combos.len());
    for (k, (aperture, estimator)) in combos.iter().enumerate() {
        let mut roc = vec![RocCounts::default(); cfg.thresholds.len()];
        let mut operating = RocCounts::default();
        let mut resolved = 0;
        let mut seps = Vec::new();
        let mut errors = Vec::new();
        let mut crbs = Vec::new();
        let (mut clamped, mut failed) = (0, 0);
        for r in &results {
            let o = &r.outcomes[k];
            for (tot, c) in roc.iter_mut().zip(&o.roc) {
                tot.add(c);
            }
            operating.add(&o.operating);
            resolved += usize::from(o.resolved);
            seps.extend(o.min_sep);
            errors.extend(o.errors_deg.iter().map(|e| (r.snr_db, *e)));
            let bound = match aperture {
                Aperture::Small => r.crb_small,
                _ => r.crb_large,
            };
            crbs.extend(bound.map(|b| (r.snr_db, b)));
            clamped += usize::from(o.clamped);
            failed += usize::from(o.failed);
        }
        let mse = doa_mse(&errors, &buckets);
        let crb_deg2 = buckets
            .iter()
            .map(|snr| {
                let v: Vec<f64> = crbs.iter().filter(|(s, _)| s == snr).map(|(_, b)| *b).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        let op = operating.point(cfg.operating_threshold);
        out.push(ArmStats {
            aperture: *aperture,
            estimator: *estimator,
            elements: match aperture {
                Aperture::Small => split.small(),
                _ => split.large(),
            },
            scenes: results.len(),
            roc: roc.iter().zip(&cfg.thresholds).map(|(c, t)| c.point(*t)).collect(),
            operating: RocCountsSummary {
                true_positives: operating.true_positives,
                false_alarms: operating.false_alarms,
                truths: operating.truths,
                cells: operating.cells,
                pfa: op.pfa,
                pd: op.pd,
            },
            resolved_scenes: resolved,
            histogram: histogram(&seps, cfg.histogram_bin_deg)?,
            min_separations_deg: seps,
            mse,
            crb_deg2,
            clamped_order: clamped,
            failed,
        });
    }
    Ok(StudyReport {
        large_elements: split.large(),
        small_elements: split.small(),
        scenes: results.len(),
        match_tolerance_deg: tol,
        operating_threshold: cfg.operating_threshold,
        arms: out,
    })
}
