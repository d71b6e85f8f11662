//! Desk-scale training behaviour.

use abcgan::data::Dataset;
use abcgan::experiments::{
    run_single, Cell, DatasetId, ExperimentSpec, PreparedCell, ResponseNoise,
};
use abcgan::gan::{build_gan, GanConfig, GanVariant};
use abcgan::misspec::{NoiseSpec, PriorSampler};
use abcgan::neural::Matrix;
use abcgan::priors::{fit_ols, GbtConfig, PriorKind, PriorModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn discriminator_loss_falls_on_separable_fixture() {
    let config = GanConfig {
        epochs: 50,
        batch_size: 32,
        learning_rate: 0.01,
        ..Default::default()
    };
    let mut falls = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..32).map(|i| -1.0 + 2.0 * i as f64 / 31.0).collect();
        let x = Matrix::from_vec(32, 1, xs.clone()).unwrap();
        let mut model = build_gan::<f64, _>(GanVariant::CGan, 1, &config, &mut rng).unwrap();
        model.train(&x, &xs, None, &config, &mut rng).unwrap();
        let h = &model.history;
        let first = h[..5].iter().map(|s| s.d_loss).sum::<f64>() / 5.0;
        let last = h[h.len() - 5..].iter().map(|s| s.d_loss).sum::<f64>() / 5.0;
        eprintln!("seed {seed}: d_loss {first:.4} -> {last:.4}");
        if last < first {
            falls += 1;
        }
    }
    assert!(falls >= 8, "D-loss fell in {falls}/10 seeds");
}

/// `y = 0.5 + 2x + N(0, 1)`: the OLS fit with unit response noise is the
/// data-generating model.
fn linear_fixture(n: usize, rng: &mut ChaCha8Rng) -> (Matrix<f64>, Vec<f64>) {
    let xs = gaussian(n, rng);
    let noise = gaussian(n, rng);
    let y = xs.iter().zip(&noise).map(|(x, e)| 0.5 + 2.0 * x + e).collect();
    (Matrix::from_vec(n, 1, xs).unwrap(), y)
}

#[test]
fn skip_weight_falls_below_half_with_a_perfect_prior() {
    let config = GanConfig {
        epochs: 200,
        learning_rate: 0.01,
        ..Default::default()
    };
    let mut below = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (x, y) = linear_fixture(128, &mut rng);
        let fit = fit_ols(&x, &y).unwrap();
        let sampler = PriorSampler::new(PriorModel::Linear(fit), NoiseSpec::new(0.0, 1e-6).unwrap());
        let mut model = build_gan::<f64, _>(GanVariant::SkipGan, 1, &config, &mut rng).unwrap();
        model.train(&x, &y, Some(&sampler), &config, &mut rng).unwrap();
        let w = model.w_gan().unwrap();
        eprintln!("seed {seed}: w_gan {w:.4}");
        if w < 0.5 {
            below += 1;
        }
    }
    assert!(below >= 8, "w_gan < 0.5 in {below}/10 seeds");
}

#[test]
fn exact_linear_prior_scores_at_the_unit_noise_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 500;
    let a = gaussian(n, &mut rng);
    let b = gaussian(n, &mut rng);
    let y: Vec<f64> = a.iter().zip(&b).map(|(a, b)| 1.0 + 3.0 * a - 2.0 * b).collect();
    let xs: Vec<f64> = a.iter().zip(&b).flat_map(|(a, b)| [*a, *b]).collect();
    let raw = Dataset::new("noiseless", Matrix::from_vec(n, 2, xs).unwrap(), y).unwrap();
    let spec = ExperimentSpec {
        gan: GanConfig {
            epochs: 0,
            ..Default::default()
        },
        master_seed: 4,
        response_noise: ResponseNoise::Unit,
        ..Default::default()
    };
    let prepared =
        PreparedCell::new(DatasetId::Friedman3, &raw, PriorKind::Linear, &GbtConfig::default(), 4).unwrap();
    let cell = Cell {
        dataset: DatasetId::Friedman3,
        prior: PriorKind::Linear,
        variant: GanVariant::MGan,
        variance: 0.0,
        bias: 0.0,
    };
    let run = run_single(&spec, &prepared, &cell, 0).unwrap();
    // E|N(0, 1)| for the injected unit response noise.
    let floor = (2.0 / std::f64::consts::PI).sqrt();
    let ratio = run.mae_prior / floor;
    assert!((0.5..=2.0).contains(&ratio), "prior MAE {} vs floor {floor}", run.mae_prior);
    assert!(run.skip_weight.is_none());
    assert_eq!(run, run_single(&spec, &prepared, &cell, 0).unwrap());
}
