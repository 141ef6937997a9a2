use cyclevc_core::baselines::{
    train_gan_baseline, train_mse_baseline, GanBaselineConfig, MseBaselineConfig, ParallelTrainSet,
};
use cyclevc_core::features::{FeatureKind, FeatureSequence};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_task(frames: usize, seed: u64) -> ParallelTrainSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = array![
        [0.8, -0.3, 0.0, 0.2],
        [0.1, 0.9, 0.4, 0.0],
        [-0.5, 0.0, 0.7, 0.3],
        [0.0, 0.2, -0.1, 1.1]
    ];
    let b = array![0.5, -1.0, 0.25, 0.0];
    let x = Array2::from_shape_fn((frames, 4), |_| rng.random_range(-1.7..1.7));
    pair(x.clone(), x.dot(&a.t()) + &b)
}

fn pair(x: Array2<f64>, y: Array2<f64>) -> ParallelTrainSet {
    ParallelTrainSet::new(
        FeatureSequence::new(FeatureKind::Generic, x).unwrap(),
        FeatureSequence::new(FeatureKind::Generic, y).unwrap(),
    )
    .unwrap()
}

/// 25-dim `y = Ax + b`. Low-dimensional tasks reach the mini-batch noise
/// floor well before epoch 60, after which epoch means jitter.
fn wide_linear_task(seed: u64) -> ParallelTrainSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((25, 25), |_| rng.random_range(-0.5..0.5)) + Array2::<f64>::eye(25) * 0.5;
    let x = Array2::from_shape_fn((2000, 25), |_| rng.random_range(-1.7..1.7));
    pair(x.clone(), x.dot(&a.t()) + 0.3)
}

#[test]
fn mse_history_is_essentially_monotone() {
    let data = wide_linear_task(1);
    let (_, history) = train_mse_baseline(&data, &MseBaselineConfig::default()).unwrap();
    assert_eq!(history.len(), 60);
    let rises = history.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 2, "{rises} non-decreasing epochs: {history:?}");
    assert!(history[59] < 0.1 * history[0]);
}

#[test]
fn mse_training_is_deterministic() {
    let data = linear_task(300, 2);
    let config = MseBaselineConfig {
        epochs: 5,
        hidden: vec![16],
        seed: 4,
        ..Default::default()
    };
    let (a, ha) = train_mse_baseline(&data, &config).unwrap();
    let (b, hb) = train_mse_baseline(&data, &config).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a.flat_params(), b.flat_params());
    let (c, _) = train_mse_baseline(&data, &MseBaselineConfig { seed: 5, ..config }).unwrap();
    assert_ne!(a.flat_params(), c.flat_params());
}

#[test]
fn gan_baseline_reports_finite_losses_per_epoch() {
    let data = linear_task(256, 3);
    let config = GanBaselineConfig {
        epochs: 4,
        hidden: vec![16, 16],
        ..Default::default()
    };
    let (g, d, history) = train_gan_baseline(&data, &config).unwrap();
    assert_eq!(history.len(), 4);
    assert_eq!((g.input_dim(), g.output_dim()), (4, 4));
    assert_eq!((d.input_dim(), d.output_dim()), (4, 1));
    for r in &history {
        assert!(r.adv.is_finite() && r.disc.is_finite() && r.mse.is_finite());
        assert!((r.total - (r.adv + config.mse_weight * r.mse)).abs() < 1e-9);
    }
}

#[test]
fn baselines_reject_bad_schedules() {
    let data = linear_task(64, 4);
    assert!(train_mse_baseline(
        &data,
        &MseBaselineConfig {
            epochs: 0,
            ..Default::default()
        }
    )
    .is_err());
    assert!(train_mse_baseline(
        &data,
        &MseBaselineConfig {
            batch_frames: 0,
            ..Default::default()
        }
    )
    .is_err());
    let gan = GanBaselineConfig {
        mse_weight: -1.0,
        epochs: 1,
        ..Default::default()
    };
    assert!(train_gan_baseline(&data, &gan).is_err());
}
