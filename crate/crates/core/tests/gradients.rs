use fanet_ids::nn::{sgd_epoch, ArchSpec, ConvSpec, Mode, ModelParams, Sample, TrainConfig};
use fanet_ids::rng;
use rand::Rng;

const H: f64 = 1e-5;

fn batch(seed: u64, n: usize, dim: usize, nonneg: bool) -> Vec<Sample> {
    let mut r = rng::stream(seed, "fd-batch", 0);
    (0..n)
        .map(|i| Sample {
            x: (0..dim)
                .map(|_| if nonneg { r.random_range(0.0..2.0) } else { r.random_range(-2.0..2.0) })
                .collect(),
            y: (i % 2) as f64,
        })
        .collect()
}

/// Largest relative error between the analytic gradient and central
/// differences. Coordinates whose perturbation flips a ReLU or moves a
/// pooling winner sit on a kink and are skipped; the fraction skipped is
/// returned alongside.
fn fd_check(params: &ModelParams, data: &[Sample]) -> (f64, f64) {
    let (_, grad) = params.loss_and_grad(data, None).unwrap();
    let pattern = |p: &ModelParams| -> Vec<Vec<usize>> { data.iter().map(|s| p.activation_pattern(&s.x)).collect() };
    let base = pattern(params);
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.weights[i] += H;
        let mut minus = params.clone();
        minus.weights[i] -= H;
        if pattern(&plus) != base || pattern(&minus) != base {
            skipped += 1;
            continue;
        }
        let lp = plus.loss_and_grad(data, None).unwrap().0;
        let lm = minus.loss_and_grad(data, None).unwrap().0;
        let numeric = (lp - lm) / (2.0 * H);
        let denom = grad[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((grad[i] - numeric).abs() / denom);
    }
    (worst, skipped as f64 / params.len() as f64)
}

#[test]
fn dnn_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let p = ModelParams::init(&ArchSpec::dnn(&[16, 8]), seed).unwrap();
        let (err, skipped) = fd_check(&p, &batch(seed, 8, 31, false));
        eprintln!("seed {seed}: max rel err {err:.3e}, skipped {skipped:.4}");
        assert!(err < 1e-4, "seed {seed}: {err}");
        assert!(skipped < 0.05, "seed {seed}: skipped {skipped}");
    }
}

#[test]
fn cnn_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let p = ModelParams::init(&ArchSpec::cnn(&[16, 8]), seed).unwrap();
        let (err, skipped) = fd_check(&p, &batch(seed, 4, 31, false));
        eprintln!("seed {seed}: max rel err {err:.3e}, skipped {skipped:.4}");
        assert!(err < 1e-4, "seed {seed}: {err}");
        assert!(skipped < 0.05, "seed {seed}: skipped {skipped}");
    }
}

#[test]
fn identity_convolution_reduces_to_dense_network() {
    let hidden = [16, 8];
    let mut cnn = ArchSpec::cnn(&hidden);
    cnn.conv = Some(ConvSpec {
        filters: 1,
        kernel: 1,
        pool: 1,
        dropout: 0.0,
    });
    let dnn = ArchSpec::dnn(&hidden);
    let d = ModelParams::init(&dnn, 4).unwrap();
    // conv weight 1, conv bias 0, then the dense weights unchanged
    let mut w = vec![1.0, 0.0];
    w.extend(&d.weights);
    let c = ModelParams::from_weights(&cnn, w).unwrap();
    let data = batch(7, 20, 31, true);
    for s in &data {
        assert_eq!(c.forward(&s.x, Mode::Eval).unwrap(), d.forward(&s.x, Mode::Eval).unwrap());
    }
    let (lc, gc) = c.loss_and_grad(&data, None).unwrap();
    let (ld, gd) = d.loss_and_grad(&data, None).unwrap();
    assert_eq!(lc, ld);
    assert_eq!(&gc[2..], &gd[..]);
    let tc = sgd_epoch(&c, &data, &TrainConfig::default()).unwrap();
    let td = sgd_epoch(&d, &data, &TrainConfig::default()).unwrap();
    assert_eq!(&tc.weights[2..], &td.weights[..]);
}

#[test]
fn dropout_mask_is_consistent_with_gradient() {
    // With a fixed mask stream the loss/gradient pair must be reproducible.
    let p = ModelParams::init(&ArchSpec::cnn(&[16, 8]), 2).unwrap();
    let data = batch(2, 6, 31, false);
    let mut a = rng::stream(5, "dropout", 0);
    let mut b = rng::stream(5, "dropout", 0);
    let ga = p.loss_and_grad(&data, Some(&mut a)).unwrap();
    let gb = p.loss_and_grad(&data, Some(&mut b)).unwrap();
    assert_eq!(ga, gb);
    let eval = p.loss_and_grad(&data, None).unwrap();
    assert_ne!(ga.1, eval.1);
}
