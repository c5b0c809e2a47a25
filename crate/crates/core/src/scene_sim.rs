//! Monte-Carlo scene generation and antenna-snapshot synthesis.
//!
//! All targets of a scene share one range-Doppler cell, so a snapshot is the
//! superposition of scaled steering vectors plus unit-variance circular
//! complex Gaussian noise. A target with `rcs_db = 0` in a scene with
//! `snr_db = S` has per-element amplitude `10^(S/20)`; RCS adds on top in
//! amplitude dB.
//!
//! Every scene draws from its own ChaCha stream derived from
//! `(master_seed, scene_index)`, so generation order and worker count do not
//! change the output.

use std::f64::consts::PI;
use std::ops::Range;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{steering_vector, AngleDeg, ArrayConfig};
use crate::dataset::{truth_path, DatasetWriter, TruthWriter};
use crate::{Error, Result};

/// Sampling ranges of the Monte-Carlo scene generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Inclusive range for the number of targets per scene.
    pub target_count: (usize, usize),
    pub angle_range_deg: (f64, f64),
    pub rcs_range_db: (f64, f64),
    /// Scene SNR is drawn uniformly from this set.
    pub snr_set_db: Vec<f64>,
    /// Resolution-study mode: exactly two targets whose separation is drawn
    /// uniformly from this range, centred uniformly inside `angle_range_deg`.
    /// Overrides `target_count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_separation_deg: Option<(f64, f64)>,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            target_count: (1, 10),
            angle_range_deg: (-70.0, 70.0),
            rcs_range_db: (0.0, 10.0),
            snr_set_db: vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            pair_separation_deg: None,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.target_count;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid target count range [{lo}, {hi}]")));
        }
        let (a, b) = self.angle_range_deg;
        if !(a <= b) || a <= -90.0 || b >= 90.0 {
            return Err(Error::Config(format!("invalid angle range [{a}, {b}] deg")));
        }
        let (r0, r1) = self.rcs_range_db;
        if !(r0 <= r1) || !r0.is_finite() || !r1.is_finite() {
            return Err(Error::Config(format!("invalid RCS range [{r0}, {r1}] dB")));
        }
        if self.snr_set_db.is_empty() {
            return Err(Error::Config("empty SNR set".into()));
        }
        if self.snr_set_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("non-finite SNR in SNR set".into()));
        }
        if let Some((s0, s1)) = self.pair_separation_deg {
            if !(s0 > 0.0 && s0 <= s1 && s1 < b - a) {
                return Err(Error::Config(format!(
                    "pair separation [{s0}, {s1}] deg must be positive and fit in [{a}, {b}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    #[serde(rename = "angle_deg")]
    pub angle: AngleDeg,
    pub rcs_db: f64,
    pub phase_rad: f64,
}

impl Target {
    /// Complex amplitude `a e^{j phi}` of the target at element 0.
    pub fn amplitude(&self, snr_db: f64) -> Complex64 {
        let a = 10f64.powf((self.rcs_db + snr_db) / 20.0);
        Complex64::from_polar(a, self.phase_rad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub targets: Vec<Target>,
    pub snr_db: f64,
    pub seed: u64,
}

impl Scene {
    pub fn angles(&self) -> Vec<AngleDeg> {
        self.targets.iter().map(|t| t.angle).collect()
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.targets.iter().map(|t| t.amplitude(self.snr_db)).collect()
    }
}

/// Complex antenna vector of one range-Doppler cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub samples: Vec<Complex64>,
    pub array: ArrayConfig,
    pub truth: Option<Scene>,
    /// `(doppler, range)` bin the vector was extracted from, if any.
    pub cell: Option<(usize, usize)>,
}

impl Snapshot {
    pub fn new(samples: Vec<Complex64>, array: ArrayConfig) -> Result<Self> {
        if samples.len() != array.num_elements() {
            return Err(Error::Config(format!(
                "snapshot has {} samples but the array has {} elements",
                samples.len(),
                array.num_elements()
            )));
        }
        Ok(Self {
            samples,
            array,
            truth: None,
            cell: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Seed for scene `index` under `master_seed`. Independent of how many
/// scenes are generated or in which order.
pub fn scene_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draw a random scene. Deterministic in `seed`.
pub fn sample_scene(params: &SimParams, seed: u64) -> Result<Scene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles: Vec<f64> = match params.pair_separation_deg {
        None => {
            let (lo, hi) = params.target_count;
            let count = rng.random_range(lo..=hi);
            (0..count).map(|_| f64::NAN).collect()
        }
        Some(range) => {
            let sep = uniform(&mut rng, range);
            let (a, b) = params.angle_range_deg;
            let centre = uniform(&mut rng, (a + sep / 2.0, b - sep / 2.0));
            vec![centre - sep / 2.0, centre + sep / 2.0]
        }
    };
    let snr_db = params.snr_set_db[rng.random_range(0..params.snr_set_db.len())];
    let targets = angles
        .into_iter()
        .map(|fixed| {
            let deg = if fixed.is_nan() {
                uniform(&mut rng, params.angle_range_deg)
            } else {
                fixed
            };
            let angle = AngleDeg::new(deg)?;
            let rcs_db = uniform(&mut rng, params.rcs_range_db);
            let phase_rad = rng.random_range(0.0..2.0 * PI);
            Ok(Target {
                angle,
                rcs_db,
                phase_rad,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene {
        targets,
        snr_db,
        seed,
    })
}

/// `count` samples of unit-variance circular complex Gaussian noise.
pub fn complex_noise(count: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// Noiseless superposition of the scene's targets on `cfg`.
pub fn noiseless_samples(scene: &Scene, cfg: &ArrayConfig) -> Result<Vec<Complex64>> {
    if scene.targets.is_empty() {
        return Err(Error::Config("scene has no targets".into()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.num_elements()];
    for t in &scene.targets {
        let amp = t.amplitude(scene.snr_db);
        for (o, v) in out.iter_mut().zip(steering_vector(cfg, t.angle)) {
            *o += amp * v;
        }
    }
    Ok(out)
}

/// Snapshot of `scene` on `cfg`. `noise_seed = None` gives the noiseless
/// signal; otherwise unit-variance noise drawn from that seed is added.
pub fn synthesize_snapshot(scene: &Scene, cfg: &ArrayConfig, noise_seed: Option<u64>) -> Result<Snapshot> {
    let mut samples = noiseless_samples(scene, cfg)?;
    if let Some(seed) = noise_seed {
        for (s, n) in samples.iter_mut().zip(complex_noise(cfg.num_elements(), seed)) {
            *s += n;
        }
    }
    let mut snap = Snapshot::new(samples, *cfg)?;
    snap.truth = Some(scene.clone());
    Ok(snap)
}

/// Scene `index` of the dataset under `master_seed`, with its noisy snapshot.
pub fn dataset_record(params: &SimParams, cfg: &ArrayConfig, master_seed: u64, index: u64) -> Result<Snapshot> {
    let scene = sample_scene(params, scene_seed(master_seed, index))?;
    synthesize_snapshot(&scene, cfg, Some(scene.seed))
}

/// Train / validation / test fractions of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.9,
            validation: 0.05,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.train >= 0.0
            && self.validation >= 0.0
            && self.train + self.validation <= 1.0 + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid split fractions {self:?}")))
        }
    }

    /// Contiguous record ranges `(train, validation, test)` for `count` records.
    pub fn ranges(&self, count: usize) -> (Range<usize>, Range<usize>, Range<usize>) {
        let n_train = ((count as f64) * self.train).round() as usize;
        let n_train = n_train.min(count);
        let n_val = (((count as f64) * self.validation).round() as usize).min(count - n_train);
        (0..n_train, n_train..n_train + n_val, n_train + n_val..count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub path: PathBuf,
    pub truth_path: PathBuf,
    pub records: usize,
    pub num_elements: usize,
    pub master_seed: u64,
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

const GENERATION_CHUNK: usize = 4096;

/// Simulate `count` scenes and write them as an ARDS dataset at `out_path`
/// with a JSON-lines truth sidecar next to it.
pub fn generate_dataset(
    params: &SimParams,
    cfg: &ArrayConfig,
    count: usize,
    master_seed: u64,
    split: SplitFractions,
    out_path: &Path,
) -> Result<DatasetSummary> {
    params.validate()?;
    split.validate()?;
    let truth = truth_path(out_path);
    let mut writer = DatasetWriter::create(out_path, cfg.num_elements())?;
    let mut truth_writer = TruthWriter::create(&truth)?;

    let mut start = 0usize;
    while start < count {
        let end = (start + GENERATION_CHUNK).min(count);
        let chunk: Vec<Snapshot> = (start..end)
            .into_par_iter()
            .map(|i| dataset_record(params, cfg, master_seed, i as u64))
            .collect::<Result<_>>()?;
        for (offset, snap) in chunk.iter().enumerate() {
            writer.push(&snap.samples)?;
            let scene = snap.truth.as_ref().expect("synthesized snapshots carry truth");
            truth_writer.push((start + offset) as u64, scene)?;
        }
        start = end;
    }
    let records = writer.finish()?;
    truth_writer.finish()?;

    let (train, validation, test) = split.ranges(records);
    Ok(DatasetSummary {
        path: out_path.to_path_buf(),
        truth_path: truth,
        records,
        num_elements: cfg.num_elements(),
        master_seed,
        train,
        validation,
        test,
    })
}
