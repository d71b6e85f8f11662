//! Minimal dense feed-forward engine: forward evaluation, exact reverse-mode
//! gradients, binary cross-entropy and an adaptive-moment optimizer.

mod adam;
mod loss;
mod matrix;
mod network;

pub use adam::{AdamConfig, OptimizerState};
pub use loss::{bce_loss, BCE_EPS};
pub use matrix::Matrix;
pub use network::{
    init_network, Activation, DenseLayer, ForwardCache, GradientSet, LayerGrad, Network,
};

pub(crate) use matrix::dot;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(weights: Matrix<f64>, act: Activation) -> Network<f64> {
        let out = weights.rows();
        Network::new(vec![DenseLayer::new(weights, vec![0.0; out], act).unwrap()]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input() {
        let net = single(Matrix::identity(2), Activation::Identity);
        let out = net.forward(&Matrix::from_rows(&[[1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = single(Matrix::identity(3), Activation::Relu);
        let out = net
            .forward(&Matrix::from_rows(&[[-1.0, 0.0, 2.0]]).unwrap())
            .unwrap();
        assert_eq!(out.values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn two_layer_hand_evaluation() {
        // h = relu([[1, -2], [0.5, 1]]·x + [0.5, -1]) on x = (1, 1) gives (0, 0.5);
        // y = [3, -1]·h + 0.25 = -0.25.
        let l1 = DenseLayer::new(
            Matrix::from_rows(&[[1.0, -2.0], [0.5, 1.0]]).unwrap(),
            vec![0.5, -1.0],
            Activation::Relu,
        )
        .unwrap();
        let l2 = DenseLayer::new(
            Matrix::from_rows(&[[3.0, -1.0]]).unwrap(),
            vec![0.25],
            Activation::Identity,
        )
        .unwrap();
        let net = Network::new(vec![l1, l2]).unwrap();
        let out = net.forward(&Matrix::from_rows(&[[1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(out.values(), &[-0.25]);
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let net = single(Matrix::identity(2), Activation::Identity);
        let err = net.forward(&Matrix::zeros(1, 3)).unwrap_err();
        assert!(matches!(
            err,
            Error::LayerDimension {
                layer: 0,
                expected: 2,
                got: 3
            }
        ));
        let bad = Network::new(vec![
            DenseLayer::new(Matrix::<f64>::zeros(4, 2), vec![0.0; 4], Activation::Relu).unwrap(),
            DenseLayer::new(Matrix::zeros(1, 5), vec![0.0], Activation::Identity).unwrap(),
        ]);
        assert!(matches!(bad, Err(Error::LayerDimension { layer: 1, .. })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: Network<f64> = init_network(
            &[3, 5, 1],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let batch = Matrix::from_rows(&[[1.0, -0.5, 2.0], [0.1, 0.2, 0.3]]).unwrap();
        let g = net.backward(&batch, &Matrix::zeros(2, 1)).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn single_linear_neuron_weight_gradient() {
        let net = single(Matrix::from_rows(&[[0.7]]).unwrap(), Activation::Identity);
        let g = net
            .backward(&Matrix::from_rows(&[[3.0]]).unwrap(), &Matrix::column(&[1.0]))
            .unwrap();
        assert_eq!(g.layers[0].weights.values(), &[3.0]);
        assert_eq!(g.layers[0].bias, vec![1.0]);
        assert_eq!(g.input.values(), &[0.7]);
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let acts = [Activation::Relu, Activation::Identity];
        let a: Network<f64> =
            init_network(&[4, 50, 1], &acts, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b: Network<f64> =
            init_network(&[4, 50, 1], &acts, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers[0].weights.shape(), (50, 4));
        assert_eq!(a.layers[1].weights.shape(), (1, 50));
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn init_spread_matches_uniform_target() {
        let net: Network<f64> = init_network(
            &[50, 50],
            &[Activation::Identity],
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let w = net.layers[0].weights.values();
        let n = w.len() as f64;
        let m = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        // Uniform on ±sqrt(6/100) has standard deviation sqrt(6/100)/sqrt(3).
        let target = (6.0f64 / 100.0).sqrt() / 3f64.sqrt();
        assert!((sd / target - 1.0).abs() < 0.2, "sd {sd} vs {target}");
    }

    #[test]
    fn init_rejects_empty() {
        let r: Result<Network<f64>, _> =
            init_network(&[3], &[], &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::EmptyNetwork)));
    }

    #[test]
    fn generic_over_f32() {
        let net: Network<f32> = init_network(
            &[2, 8, 1],
            &[Activation::Relu, Activation::Sigmoid],
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let out = net.forward(&Matrix::from_rows(&[[0.5f32, -1.0]]).unwrap()).unwrap();
        assert!(out.values()[0] > 0.0 && out.values()[0] < 1.0);
    }

    fn random_net(seed: u64, depth: usize, width: usize, sigmoid_out: bool) -> Network<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![3];
        dims.extend(std::iter::repeat_n(width, depth - 1));
        dims.push(1);
        let mut acts = vec![Activation::Relu; depth - 1];
        acts.push(if sigmoid_out {
            Activation::Sigmoid
        } else {
            Activation::Identity
        });
        init_network(&dims, &acts, &mut rng).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn activations_respect_ranges(seed in 0u64..1000, x in prop::collection::vec(-50.0f64..50.0, 3)) {
            let net = random_net(seed, 3, 8, true);
            let batch = Matrix::from_vec(1, 3, x).unwrap();
            let cache = net.forward_cached(&batch).unwrap();
            let p = cache.output().values()[0];
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert!(cache.layer_inputs()[1].values().iter().all(|&v| v >= 0.0));
            // Pure function: repeated evaluation is bit-identical.
            prop_assert_eq!(net.forward(&batch).unwrap(), net.forward(&batch).unwrap());
        }
    }
}
