//! Analytic gradients against central finite differences.

use abcgan::gan::{build_gan, GanConfig, GanVariant, Trainer};
use abcgan::neural::{init_network, Activation, Matrix, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const ABS_TOL: f64 = 1e-7;

fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= ABS_TOL || diff <= REL_TOL * analytic.abs().max(numeric.abs())
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let v = (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

fn random_network(rng: &mut ChaCha8Rng) -> Network<f64> {
    let depth = rng.random_range(1..=5);
    let mut dims = vec![rng.random_range(1..=8)];
    dims.extend((0..depth).map(|_| rng.random_range(1..=50)));
    let acts: Vec<Activation> = (0..depth)
        .map(|_| match rng.random_range(0..3) {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            _ => Activation::Identity,
        })
        .collect();
    let mut net = init_network(&dims, &acts, rng).unwrap();
    for p in net.param_slices_mut() {
        for v in p.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    net
}

/// `L = Σ upstream ⊙ f(x)`, so `∂L/∂f = upstream`.
fn weighted_output(net: &Network<f64>, x: &Matrix<f64>, upstream: &Matrix<f64>) -> f64 {
    let out = net.forward(x).unwrap();
    out.values().iter().zip(upstream.values()).map(|(a, b)| a * b).sum()
}

#[test]
fn network_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    for net_idx in 0..50 {
        let mut net = random_network(&mut rng);
        let rows = rng.random_range(1..=4);
        let x = random_matrix(rows, net.input_dim(), &mut rng);
        let upstream = random_matrix(rows, net.output_dim(), &mut rng);
        let grads = net.backward(&x, &upstream).unwrap();
        let analytic: Vec<Vec<f64>> = grads.param_slices().iter().map(|s| s.to_vec()).collect();

        for (t, tensor) in analytic.iter().enumerate() {
            for (i, &a) in tensor.iter().enumerate() {
                let orig = net.param_slices_mut()[t][i];
                net.param_slices_mut()[t][i] = orig + H;
                let up = weighted_output(&net, &x, &upstream);
                net.param_slices_mut()[t][i] = orig - H;
                let down = weighted_output(&net, &x, &upstream);
                net.param_slices_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * H);
                assert!(
                    close(a, numeric),
                    "net {net_idx} dims {:?} tensor {t} index {i}: analytic {a} vs numeric {numeric}",
                    net.dims()
                );
                checked += 1;
            }
        }
        for r in 0..rows {
            for c in 0..net.input_dim() {
                let mut xp = x.clone();
                xp.set(r, c, x.get(r, c) + H);
                let mut xm = x.clone();
                xm.set(r, c, x.get(r, c) - H);
                let numeric = (weighted_output(&net, &xp, &upstream)
                    - weighted_output(&net, &xm, &upstream))
                    / (2.0 * H);
                let a = grads.input.get(r, c);
                assert!(close(a, numeric), "net {net_idx} input ({r},{c}): {a} vs {numeric}");
            }
        }
    }
    assert!(checked > 1000);
}

fn generator_loss(
    model: &abcgan::GanModel,
    x: &Matrix<f64>,
    latent: &Matrix<f64>,
) -> f64 {
    Trainer::generator_gradients(model, x, latent).unwrap().loss
}

#[test]
fn generator_and_skip_gradients_match_finite_differences() {
    let cfg = GanConfig::default();
    for (seed, variant) in [
        (1, GanVariant::SkipGan),
        (2, GanVariant::SkipGan),
        (3, GanVariant::MGan),
        (4, GanVariant::CGan),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 3;
        let mut model = build_gan::<f64, _>(variant, p, &cfg, &mut rng).unwrap();
        if let Some(s) = model.skip.as_mut() {
            s.theta_w = rng.random_range(-1.0..1.0);
        }
        let x = random_matrix(6, p, &mut rng);
        let latent = random_matrix(6, model.noise_dim, &mut rng);
        let gg = Trainer::generator_gradients(&model, &x, &latent).unwrap();

        if let Some(a) = gg.grads.skip {
            let orig = model.skip.unwrap().theta_w;
            model.skip.as_mut().unwrap().theta_w = orig + H;
            let up = generator_loss(&model, &x, &latent);
            model.skip.as_mut().unwrap().theta_w = orig - H;
            let down = generator_loss(&model, &x, &latent);
            model.skip.as_mut().unwrap().theta_w = orig;
            let numeric = (up - down) / (2.0 * H);
            assert!(close(a, numeric), "{variant} theta_w: {a} vs {numeric}");
        } else {
            assert_ne!(variant, GanVariant::SkipGan);
        }

        let analytic: Vec<Vec<f64>> = gg.grads.param_slices().iter().map(|s| s.to_vec()).collect();
        // Every weight of the first and last generator layers plus a stride
        // through the hidden ones.
        let last = analytic.len() - 1;
        for (t, tensor) in analytic.iter().enumerate() {
            let stride = if t < 2 || t + 1 >= last { 1 } else { 37 };
            for i in (0..tensor.len()).step_by(stride) {
                let orig = model.generator.param_slices_mut()[t][i];
                model.generator.param_slices_mut()[t][i] = orig + H;
                let up = generator_loss(&model, &x, &latent);
                model.generator.param_slices_mut()[t][i] = orig - H;
                let down = generator_loss(&model, &x, &latent);
                model.generator.param_slices_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * H);
                let a = tensor[i];
                assert!(close(a, numeric), "{variant} tensor {t} index {i}: {a} vs {numeric}");
            }
        }
    }
}
