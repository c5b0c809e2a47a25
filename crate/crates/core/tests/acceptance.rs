//! Acceptance suite. Every criterion is its own test and writes one
//! `PASS`/`FAIL` line to stderr (bypassing the test harness capture) before
//! asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use aperture_forge::array_model::{rayleigh_beamwidth, steering_from_sine, AngleDeg, ArrayConfig};
use aperture_forge::cube_pipeline::{
    ca_cfar_2d, make_training_pairs, stitch_labels, unnormalize, ApertureSplit, CfarParams, TrainingPair,
};
use aperture_forge::dataset::{read_dataset, write_dataset};
use aperture_forge::doa::{detect_peaks, ss_music_spectrum, strongest_peaks, FourierBeamformer};
use aperture_forge::evaluation::{crb, match_detections, run_study, Aperture, StudyConfig, StudyScene};
use aperture_forge::extrapolator::{batch_gradient, init_model, train_with, PairSet, TrainConfig};
use aperture_forge::scene_sim::{complex_noise, dataset_record, noiseless_samples, sample_scene, scene_seed};
use aperture_forge::{Complex64, Scene, SimParams, Target};
use nalgebra::DMatrix;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] criterion {n} {verdict}: {name} ({detail})");
}

fn boresight() -> AngleDeg {
    AngleDeg::new(0.0).unwrap()
}

// Criterion 1 -------------------------------------------------------------

/// Two equal targets at `+-sep/2` around boresight, in quadrature at the
/// array phase centre so the beamformer sees them as incoherent sources.
fn quadrature_pair(m: usize, sep_deg: f64, snr_db: f64, noise_seed: u64) -> (Vec<Complex64>, Vec<AngleDeg>) {
    let centre = (m as f64 - 1.0) / 2.0;
    let amp = 10f64.powf(snr_db / 20.0);
    let angles = [-sep_deg / 2.0, sep_deg / 2.0];
    let mut x = complex_noise(m, noise_seed);
    for (k, a) in angles.iter().enumerate() {
        let u = a.to_radians().sin();
        let phase = -std::f64::consts::PI * centre * u + k as f64 * std::f64::consts::FRAC_PI_2;
        let s = Complex64::from_polar(amp, phase);
        for (xi, v) in x.iter_mut().zip(steering_from_sine(m, 0.5, u)) {
            *xi += s * v;
        }
    }
    (x, angles.iter().map(|a| AngleDeg::new(*a).unwrap()).collect())
}

fn two_peak_rate(fb: &FourierBeamformer, m: usize, sep: f64, draws: u64, random_phase: bool) -> f64 {
    let mut hits = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(m as u64 * 7919 + (sep * 1e4) as u64);
    for d in 0..draws {
        let (x, truths) = if random_phase {
            let scene = Scene {
                targets: [-sep / 2.0, sep / 2.0]
                    .iter()
                    .map(|a| Target {
                        angle: AngleDeg::new(*a).unwrap(),
                        rcs_db: 0.0,
                        phase_rad: rng.random_range(0.0..std::f64::consts::TAU),
                    })
                    .collect(),
                snr_db: 25.0,
                seed: 0,
            };
            let mut x = noiseless_samples(&scene, &ArrayConfig::half_wavelength(m).unwrap()).unwrap();
            for (xi, n) in x.iter_mut().zip(complex_noise(m, 1_000_000 + d)) {
                *xi += n;
            }
            (x, scene.angles())
        } else {
            quadrature_pair(m, sep, 25.0, d)
        };
        let dets = detect_peaks(&fb.spectrum(&x).unwrap(), 0.5).unwrap();
        if match_detections(&dets.angles_deg, &truths, sep / 2.0).all_resolved() {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

fn smallest_resolved(m: usize, random_phase: bool) -> Option<f64> {
    let fb = FourierBeamformer::new(4096, 0.5).unwrap();
    (20..=400)
        .map(|i| i as f64 * 0.01)
        .find(|sep| two_peak_rate(&fb, m, *sep, 100, random_phase) >= 0.9)
}

#[test]
fn criterion_1_beamwidth_law() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (m, expected) in [(86usize, 1.33), (44, 2.6)] {
        let found = smallest_resolved(m, false);
        let pass = found.is_some_and(|f| (f / expected - 1.0).abs() <= 0.2);
        ok &= pass;
        let diag = smallest_resolved(m, true).map_or("none".into(), |v| format!("{v:.2}"));
        detail.push(format!(
            "M={m}: {} deg vs {expected} (random-phase pairs: {diag})",
            found.map_or("none".into(), |v| format!("{v:.2}"))
        ));
    }
    report(1, "Fourier resolution follows the beamwidth law", ok, &detail.join("; "));
    assert!(ok, "{}", detail.join("; "));
}

// Criterion 2 -------------------------------------------------------------

fn log_likelihood(m: usize, x0: &[Complex64], eta: &[f64]) -> f64 {
    let p = eta.len() / 3;
    let mut mu = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..p {
        let amp = Complex64::new(eta[p + k], eta[2 * p + k]);
        for (mi, v) in mu.iter_mut().zip(steering_from_sine(m, 0.5, eta[k].sin())) {
            *mi += amp * v;
        }
    }
    -x0.iter().zip(&mu).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
}

/// Angle block of the inverse finite-difference Fisher matrix over all
/// angles, real parts and imaginary parts, at unit noise variance.
fn fisher_oracle(scene: &Scene, cfg: &ArrayConfig) -> DMatrix<f64> {
    let m = cfg.num_elements();
    let p = scene.targets.len();
    let x0 = noiseless_samples(scene, cfg).unwrap();
    let mut eta: Vec<f64> = scene.targets.iter().map(|t| t.angle.rad()).collect();
    eta.extend(scene.amplitudes().iter().map(|a| a.re));
    eta.extend(scene.amplitudes().iter().map(|a| a.im));
    let n = eta.len();
    let step: Vec<f64> = (0..n)
        .map(|i| 1e-6 * if i < p { 1.0 } else { eta[i].abs().max(1.0) })
        .collect();
    let mut fim = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let at = |si: f64, sj: f64| {
                let mut e = eta.clone();
                e[i] += si * step[i];
                e[j] += sj * step[j];
                log_likelihood(m, &x0, &e)
            };
            let d2 = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * step[i] * step[j]);
            fim[(i, j)] = -d2;
        }
    }
    fim.try_inverse().unwrap().view((0, 0), (p, p)).into_owned()
}

#[test]
fn criterion_2_crb_matches_fisher_oracle() {
    let cfg = ArrayConfig::half_wavelength(16).unwrap();
    let params = SimParams {
        target_count: (1, 2),
        ..SimParams::default()
    };
    let (mut worst, mut worst_asym, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..100 {
        let scene = sample_scene(&params, scene_seed(2, i)).unwrap();
        let got = crb(&scene, &cfg).unwrap();
        let want = fisher_oracle(&scene, &cfg);
        worst = worst.max((&got.matrix - &want).abs().max() / want.abs().max());
        worst_asym = worst_asym.max(got.max_asymmetry() / got.matrix.abs().max());
        min_eig = min_eig.min(got.min_eigenvalue());
    }
    let ok = worst < 1e-6 && worst_asym < 1e-12 && min_eig > 0.0;
    report(
        2,
        "CRB equals the finite-difference Fisher bound",
        ok,
        &format!("max rel err {worst:.2e}, asymmetry {worst_asym:.1e}, min eigenvalue {min_eig:.2e}"),
    );
    assert!(ok);
}

// Criterion 3 -------------------------------------------------------------

/// The single-target beamformer is the maximum-likelihood estimator and
/// sits on the bound, so the comparison is statistical: mean squared error
/// against mean bound over the same scenes, with 5% slack for the small
/// bias of sub-grid peak refinement.
const EFFICIENCY_SLACK: f64 = 0.95;

#[test]
fn criterion_3_beamformer_efficiency() {
    let fb = FourierBeamformer::new(4096, 0.5).unwrap();
    let n = 20_000u64;
    let mut ok = true;
    let mut detail = Vec::new();
    for snr in [0.0, 10.0, 20.0] {
        let params = SimParams {
            target_count: (1, 1),
            snr_set_db: vec![snr],
            ..SimParams::default()
        };
        let mut mse = [0.0; 2];
        let mut bound = [0.0; 2];
        for i in 0..n {
            let scene = sample_scene(&params, scene_seed(100 + snr as u64, i)).unwrap();
            let truth = scene.targets[0].angle.deg();
            for (k, m) in [86usize, 44].into_iter().enumerate() {
                let cfg = ArrayConfig::half_wavelength(m).unwrap();
                let mut x = noiseless_samples(&scene, &cfg).unwrap();
                for (xi, e) in x.iter_mut().zip(complex_noise(m, scene.seed)) {
                    *xi += e;
                }
                let est = strongest_peaks(&fb.spectrum(&x).unwrap(), 1).angles_deg[0];
                mse[k] += (est - truth).powi(2) / n as f64;
                bound[k] += crb(&scene, &cfg).unwrap().diagonal_deg2()[0] / n as f64;
            }
        }
        let pass = mse[0] >= EFFICIENCY_SLACK * bound[0] && mse[1] >= EFFICIENCY_SLACK * bound[1] && mse[0] < mse[1];
        ok &= pass;
        detail.push(format!(
            "{snr} dB: M=86 mse/crb {:.2e}/{:.2e} = {:.3}, M=44 {:.2e}/{:.2e} = {:.3}",
            mse[0],
            bound[0],
            mse[0] / bound[0],
            mse[1],
            bound[1],
            mse[1] / bound[1]
        ));
    }
    report(
        3,
        "beamformer MSE at or above CRB (5% slack) and falling with aperture",
        ok,
        &format!("{n} scenes per SNR; {}", detail.join("; ")),
    );
    assert!(ok, "{}", detail.join("; "));
}

// Criterion 4 -------------------------------------------------------------

#[test]
fn criterion_4_bptt_gradient() {
    let model = init_model::<f64>(4, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (batch, warmup, steps) = (3, 5, 4);
    let inputs = Array3::from_shape_fn((batch, warmup, 2), |_| rng.random_range(-1.0..1.0));
    let labels = Array3::from_shape_fn((batch, steps, 2), |_| rng.random_range(-1.0..1.0));
    let (_, grad) = batch_gradient(&model, inputs.view(), labels.view(), 2);
    let analytic: Vec<f64> = grad.params().iter().flat_map(|p| p.iter().copied()).collect();
    let loss_at = |m: &aperture_forge::extrapolator::ExtrapolatorModel<f64>| {
        batch_gradient(m, inputs.view(), labels.view(), 2).0
    };
    // Five-point stencil: truncation error ~h^4, round-off ~1e-16 / h.
    let h = 1e-4;
    let mut worst = (0.0f64, 0.0, 0.0);
    let mut flat = 0;
    for tensor in 0..8 {
        let len = model.params()[tensor].len();
        for i in 0..len {
            let shifted = |d: f64| {
                let mut m = model.clone();
                m.params_mut()[tensor][i] += d;
                loss_at(&m)
            };
            let fd = (8.0 * (shifted(h) - shifted(-h)) - (shifted(2.0 * h) - shifted(-2.0 * h))) / (12.0 * h);
            let a = analytic[flat];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-7);
            if rel > worst.0 {
                worst = (rel, a, fd);
            }
            flat += 1;
        }
    }
    let ok = worst.0 < 1e-4;
    report(
        4,
        "BPTT gradient matches central differences",
        ok,
        &format!(
            "{flat} parameters, {steps} fed-back steps, max rel err {:.2e} (analytic {:.3e}, numeric {:.3e})",
            worst.0, worst.1, worst.2
        ),
    );
    assert!(ok);
}

// Criterion 5 -------------------------------------------------------------

#[test]
fn criterion_5_oracle_stitching() {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut checked = 0;
    for (m, l) in [(86usize, 44usize), (32, 16)] {
        let cfg = ArrayConfig::half_wavelength(m).unwrap();
        let records: Vec<Vec<Complex64>> = (0..100)
            .map(|i| dataset_record(&SimParams::default(), &cfg, 5, i).unwrap().samples)
            .collect();
        let path = dir.path().join(format!("d{m}.ards"));
        write_dataset(&path, m, &records).unwrap();
        let data = read_dataset(&path).unwrap();
        let fb = FourierBeamformer::new(4096, 0.5).unwrap();
        for snap in &data.records {
            let (right, left): (TrainingPair, TrainingPair) = make_training_pairs(snap, l, m - l).unwrap();
            let rebuilt: Vec<Complex64> = unnormalize(&stitch_labels(&right, &left), right.norm_scale)
                .iter()
                .map(|z| Complex64::new(z.re as f32 as f64, z.im as f32 as f64))
                .collect();
            ok &= rebuilt == *snap;
            ok &= fb.spectrum(&rebuilt).unwrap().power == fb.spectrum(snap).unwrap().power;
            checked += 1;
        }
    }
    report(
        5,
        "true outer samples stitch back to the stored snapshot",
        ok,
        &format!("{checked} snapshots, bit-exact at dataset (f32) precision"),
    );
    assert!(ok);
}

// Criterion 6 -------------------------------------------------------------

fn pairs_for(records: Vec<Vec<Complex64>>, split: ApertureSplit) -> PairSet<f32> {
    let mut pairs = Vec::new();
    for snap in records {
        let (r, l) = make_training_pairs(&snap, split.small(), split.outer()).unwrap();
        pairs.push(r);
        pairs.push(l);
    }
    PairSet::from_pairs(&pairs).unwrap()
}

#[test]
fn criterion_6_self_supervised_gain() {
    let (m, l, hidden) = (32usize, 16usize, 64usize);
    let cfg = ArrayConfig::half_wavelength(m).unwrap();
    let split = ApertureSplit::new(m, l).unwrap();
    let sim = SimParams::default();
    let gen = |seed: u64, count: u64| -> Vec<Vec<Complex64>> {
        (0..count).map(|i| dataset_record(&sim, &cfg, seed, i).unwrap().samples).collect()
    };
    let train_set = pairs_for(gen(60, 20_000), split);
    let val_set = pairs_for(gen(61, 1_000), split);
    let tc = TrainConfig {
        max_epochs: 20,
        patience: 5,
        master_seed: 6,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let (model, log) = train_with(init_model::<f32>(hidden, 6).unwrap(), &train_set, &val_set, &tc, |e| {
        let _ = writeln!(
            std::io::stderr(),
            "[acceptance] criterion 6 training epoch {:>2}: train {:.5} val {:.5}",
            e.epoch,
            e.train_loss,
            e.val_loss
        );
    })
    .unwrap();
    let trained = start.elapsed().as_secs();

    let bw = |n: usize| rayleigh_beamwidth(&ArrayConfig::half_wavelength(n).unwrap(), boresight());
    let test_params = SimParams {
        pair_separation_deg: Some((bw(m), bw(l))),
        snr_set_db: vec![10.0, 15.0, 20.0, 25.0],
        ..SimParams::default()
    };
    let scenes: Vec<StudyScene> = (0..2_000)
        .map(|i| {
            let snap = dataset_record(&test_params, &cfg, 62, i).unwrap();
            StudyScene {
                samples: snap.samples,
                truth: snap.truth.unwrap(),
            }
        })
        .collect();
    let rep = run_study(&scenes, split, 0.5, Some(&model), &StudyConfig::default()).unwrap();
    let arm = |a| rep.arm(a, aperture_forge::doa::Estimator::Fourier).unwrap();
    let (large, small, art) = (arm(Aperture::Large), arm(Aperture::Small), arm(Aperture::Artificial));
    let gain = art.resolved_scenes as f64 / small.resolved_scenes.max(1) as f64;
    let pfa_ratio = art.operating.pfa / small.operating.pfa;
    let fa_ratio = art.false_alarms_per_scene() / small.false_alarms_per_scene();
    let ok = gain >= 1.3 && pfa_ratio <= 1.5 && fa_ratio <= 1.5;
    report(
        6,
        "artificial aperture resolves more pairs than the small one without more false alarms",
        ok,
        &format!(
            "resolved large/small/artificial {}/{}/{} of {}, gain {gain:.2}; Pfa ratio {pfa_ratio:.2}; \
             false alarms per scene {:.3}/{:.3}/{:.3}, ratio {fa_ratio:.2}; val loss {:.4} -> {:.4} \
             after {} epochs, {trained} s",
            large.resolved_scenes,
            small.resolved_scenes,
            art.resolved_scenes,
            rep.scenes,
            large.false_alarms_per_scene(),
            small.false_alarms_per_scene(),
            art.false_alarms_per_scene(),
            log.initial_val_loss,
            log.best_val_loss,
            log.epochs.len()
        ),
    );
    assert!(ok);
    // Pinned regression bound for this seeded desk run (measured 0.1288).
    assert!(log.best_val_loss < 0.14, "validation loss regressed: {}", log.best_val_loss);
}

// Criterion 7 -------------------------------------------------------------

#[test]
fn criterion_7_cfar_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let map = ndarray::Array2::from_shape_fn((512, 512), |_| rng.sample::<f64, _>(rand_distr::Exp1));
    let params = CfarParams {
        guard_cells: 2,
        training_cells: 16,
        pfa: 1e-3,
    };
    let det = ca_cfar_2d(&map, &params).unwrap();
    let rate = det.count() as f64 / (512.0 * 512.0);
    let ok = (0.5e-3..=2e-3).contains(&rate);
    report(7, "CA-CFAR false-alarm rate on exponential noise", ok, &format!("{rate:.2e} vs 1e-3 design"));
    assert!(ok);
}

// Criterion 8 -------------------------------------------------------------

#[test]
fn criterion_8_music_super_resolution() {
    let cfg = ArrayConfig::half_wavelength(86).unwrap();
    let truths = [9.5, 10.5];
    let scene = Scene {
        targets: truths
            .iter()
            .enumerate()
            .map(|(i, a)| Target {
                angle: AngleDeg::new(*a).unwrap(),
                rcs_db: 0.0,
                phase_rad: 0.9 * i as f64,
            })
            .collect(),
        snr_db: 0.0,
        seed: 0,
    };
    let x = noiseless_samples(&scene, &cfg).unwrap();
    let spec = ss_music_spectrum(&x, 0.5, 2, 3599).unwrap();
    let peaks = strongest_peaks(&spec, 2).angles_deg;
    let errs: Vec<f64> = peaks.iter().zip(truths).map(|(p, t)| (p - t).abs()).collect();
    let ok = peaks.len() == 2 && errs.iter().all(|e| *e <= 0.1);
    report(
        8,
        "single-snapshot MUSIC resolves 1 deg at M=86",
        ok,
        &format!("peaks {peaks:.3?}, errors {errs:.3?}"),
    );
    assert!(ok);
}

// Criterion 9 -------------------------------------------------------------

fn cli(args: &[&str], dir: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_aperture-forge"))
        .args(args)
        .current_dir(dir)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} failed with {status}");
}

fn pipeline_run(dir: &Path) {
    std::fs::write(
        dir.join("run.json"),
        r#"{"hidden_size": 16, "train": {"max_epochs": 2, "batch_size": 64},
            "study": {"estimators": ["fourier", "music"]}}"#,
    )
    .unwrap();
    let common = ["--preset", "desk", "--config", "run.json", "--seed", "9", "--jobs", "1"];
    let with = |extra: &[&str]| -> Vec<String> {
        extra.iter().chain(common.iter()).map(|s| s.to_string()).collect()
    };
    let run = |extra: &[&str]| {
        let args = with(extra);
        cli(&args.iter().map(String::as_str).collect::<Vec<_>>(), dir)
    };
    run(&["simulate", "--count", "400", "-o", "data.ards"]);
    run(&["train", "--dataset", "data.ards", "-o", "model.afrx"]);
    run(&["evaluate", "--dataset", "data.ards", "--model", "model.afrx", "--records", "all", "-o", "report"]);
}

#[test]
fn criterion_9_reproducibility() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline_run(a.path());
    pipeline_run(b.path());
    let files = [
        "data.ards",
        "data.truth.jsonl",
        "model.afrx",
        "model.log.csv",
        "report/roc.csv",
        "report/minsep_hist.csv",
        "report/mse_vs_snr.csv",
        "report/summary.json",
    ];
    let mut differing = Vec::new();
    for f in files {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        if x != y || x.is_empty() {
            differing.push(f);
        }
    }
    let ok = differing.is_empty();
    report(
        9,
        "simulate, train and evaluate are byte-reproducible",
        ok,
        &format!("{} files compared, differing: {differing:?}", files.len()),
    );
    assert!(ok);
}
