use kaf::experiments::generators::{Generator, StreamConfig};
use kaf::oracle::feature_lms_predictions;
use kaf::verify::klms_feature_deviations;
use kaf::{KernelSpec, Klms, KlmsConfig, LinearConfig, LinearFilter};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let targets = inputs
        .iter()
        .map(|u| u.iter().map(|x| x.sin()).sum::<f64>() + 0.05 * rng.random_range(-1.0..1.0))
        .collect();
    (inputs, targets)
}

fn klms_predictions(cfg: KlmsConfig, inputs: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
    let mut f = Klms::new(cfg, &inputs[0], targets[0]).unwrap();
    let mut ys = vec![0.0];
    for (u, &d) in inputs.iter().zip(targets).skip(1) {
        ys.push(f.step(u, d).unwrap().y);
    }
    ys
}

#[test]
fn quadratic_kernel_equals_feature_lms() {
    let devs = klms_feature_deviations(2, 2, 0.1, 200, 7).unwrap();
    let worst = devs.iter().cloned().fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn linear_kernel_equals_affine_lms() {
    for dim in 1..=4 {
        let (inputs, targets) = stream(300, dim, dim as u64);
        let eta = 0.05;
        let ys = klms_predictions(KlmsConfig::new(KernelSpec::polynomial(1), eta), &inputs, &targets);
        let mut lms = LinearFilter::new(LinearConfig::Lms { eta, affine: true }, dim).unwrap();
        for (i, (u, &d)) in inputs.iter().zip(&targets).enumerate() {
            let y = lms.step(u, d).unwrap().y;
            assert!((y - ys[i]).abs() <= 1e-10, "dim {dim} step {}: {y} vs {}", i + 1, ys[i]);
        }
    }
}

#[test]
fn network_grows_by_one_per_step_and_is_deterministic() {
    let s = StreamConfig::new(Generator::NoisySinc, 250, 0.1, 1, 2).generate().unwrap();
    let run = || {
        let mut f = Klms::new(KlmsConfig::default(), &s.inputs[0], s.targets[0]).unwrap();
        for (i, (u, &d)) in s.inputs.iter().zip(&s.targets).enumerate().skip(1) {
            let out = f.step(u, d).unwrap();
            assert_eq!(out.dict_size, i + 1);
            assert_eq!(f.n(), i + 1);
        }
        f.coeffs().iter().map(|c| c.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn descends_on_noiseless_sinc() {
    let s = StreamConfig::new(Generator::NoisySinc, 1000, 0.0, 3, 1).generate().unwrap();
    let cfg = KlmsConfig::new(KernelSpec::gaussian(0.5), 0.5);
    let mut f = Klms::new(cfg, &s.inputs[0], s.targets[0]).unwrap();
    let mut e2 = vec![s.targets[0].powi(2)];
    for (u, &d) in s.inputs.iter().zip(&s.targets).skip(1) {
        e2.push(f.step(u, d).unwrap().e.powi(2));
    }
    let head = e2[..100].iter().sum::<f64>() / 100.0;
    let tail = e2[900..].iter().sum::<f64>() / 100.0;
    assert!(tail < head, "head {head:e}, tail {tail:e}");
    assert!(tail < 1e-3, "tail {tail:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn polynomial_kernel_matches_explicit_features(
        seed in any::<u64>(),
        dim in 1usize..=3,
        degree in 1u32..=2,
        eta in 0.01f64..0.1,
    ) {
        let (inputs, targets) = stream(120, dim, seed);
        let oracle = feature_lms_predictions(&inputs, &targets, degree, eta).unwrap();
        let ys = klms_predictions(KlmsConfig::new(KernelSpec::polynomial(degree), eta), &inputs, &targets);
        for (i, (a, b)) in ys.iter().zip(&oracle).enumerate() {
            prop_assert!((a - b).abs() <= 1e-10, "step {}: {} vs {}", i + 1, a, b);
        }
    }
}
