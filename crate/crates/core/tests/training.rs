//! Two-stage overfit run on the synthetic two-image corpus.

use odisal::data::{build_patch_dataset, load_pairs, synth_corpus, write_corpus, FrustumMode, PatchDatasetConfig, SamplePair};
use odisal::geometry::PitchSampling;
use odisal::model::{build_network, load_weights, save_weights, train_stage1, train_stage2, TrainConfig, TrainLog, TrainSample};
use odisal::nn::SgdConfig;

fn config(lr: f64, iterations: usize) -> TrainConfig {
    TrainConfig {
        sgd: SgdConfig {
            base_lr: lr,
            weight_decay: 0.0,
            iterations,
            ..SgdConfig::default()
        },
        test_fraction: 0.5,
        seed: 0,
        ..TrainConfig::default()
    }
}

/// Means over windows of `w` consecutive iterations never increase:
/// equivalently `curve[t + w] <= curve[t]`.
fn moving_average_violations(curve: &[f64], w: usize) -> Vec<usize> {
    (0..curve.len().saturating_sub(w)).filter(|&t| curve[t + w] > curve[t]).collect()
}

fn check_log(log: &TrainLog, iterations: usize) {
    let its: Vec<usize> = log.records.iter().map(|r| r.iteration).collect();
    let expected: Vec<usize> = (0..=iterations).step_by(100).collect();
    assert_eq!(its, expected);
    assert_eq!(log.train_curve.len(), iterations);
}

#[test]
fn two_stage_overfit() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(dir.path().join("corpus"), &synth_corpus(2, 128, 64, 0)).unwrap();
    let pairs = load_pairs(&manifest).unwrap();

    let mut net = build_network(0);
    let small: Vec<TrainSample> = pairs
        .iter()
        .map(|p| {
            let p = SamplePair::new(
                p.id.clone(),
                p.image.resize_bilinear(32, 16),
                p.saliency.resize_bilinear(32, 16).map(|v| v.max(0.0)),
            )
            .unwrap();
            TrainSample::from_pair(&p, &net.norm_mean)
        })
        .collect();
    let log1 = train_stage1(&mut net, &small, &config(1.0, 500)).unwrap();
    let ratio1 = log1.initial_train_loss / log1.final_train_loss;
    println!("stage 1: {:.4e} -> {:.4e} ({ratio1:.1}x)", log1.initial_train_loss, log1.final_train_loss);
    check_log(&log1, 500);
    assert!(ratio1 >= 10.0);
    let v1 = moving_average_violations(&log1.train_curve, 100);
    assert!(v1.is_empty(), "stage 1 moving average rises after {v1:?}");

    save_weights(&net, dir.path().join("w1")).unwrap();
    let mut net = load_weights(dir.path().join("w1")).unwrap();
    let pcfg = PatchDatasetConfig {
        n_per_odi: 2,
        out_w: 16,
        out_h: 16,
        seed: 5,
        mode: FrustumMode::Random(PitchSampling::SphereUniform),
        mean: net.norm_mean.clone(),
        ..PatchDatasetConfig::default()
    };
    let patches: Vec<TrainSample> = build_patch_dataset(&pairs, &pcfg)
        .unwrap()
        .iter()
        .map(TrainSample::from_patch)
        .collect();
    assert_eq!(patches.len(), 4);
    let log2 = train_stage2(&mut net, &patches, &config(0.15, 1000)).unwrap();
    let ratio2 = log2.initial_train_loss / log2.final_train_loss;
    println!("stage 2: {:.4e} -> {:.4e} ({ratio2:.1}x)", log2.initial_train_loss, log2.final_train_loss);
    check_log(&log2, 1000);
    assert!(ratio2 >= 10.0);
    let v2 = moving_average_violations(&log2.train_curve, 100);
    assert!(v2.is_empty(), "stage 2 moving average rises after {v2:?}");
}
