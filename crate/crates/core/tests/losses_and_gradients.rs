mod common;

use common::{central_diff, mmd_oracle, mmd_oracle_gaussian, random_dataset, relative_error};
use fairlab::losses::{
    bce_loss, flood_transform, mindiff_loss, mmd_squared, total_loss_and_gradient, weight_decay_gradient,
    weight_decay_penalty, LossConfig,
};
use fairlab::model::{head_gradient_from_outputs, RandomFeatureModel};
use fairlab::{Error, GroupedDataset, KernelSpec};
use ndarray::{array, Array1, ArrayView1};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(width: usize, dim: usize, seed: u64, rng: &mut ChaCha8Rng) -> RandomFeatureModel {
    let mut model = RandomFeatureModel::new(width, dim, seed).unwrap();
    let params: Vec<f64> = (0..=width).map(|_| rng.random_range(-0.5..0.5)).collect();
    model.set_head_params(&params).unwrap();
    model
}

fn total_at(model: &RandomFeatureModel, params: &[f64], primary: &GroupedDataset, md: &GroupedDataset, cfg: &LossConfig) -> f64 {
    let mut m = model.clone();
    m.set_head_params(params).unwrap();
    total_loss_and_gradient(&m, primary, md, cfg).unwrap().0.total
}

fn analytic(model: &RandomFeatureModel, primary: &GroupedDataset, md: &GroupedDataset, cfg: &LossConfig) -> Vec<f64> {
    let (_, gw, gb) = total_loss_and_gradient(model, primary, md, cfg).unwrap();
    let mut g = gw.to_vec();
    g.push(gb);
    g
}

#[test]
fn mmd_hand_values() {
    let k1 = KernelSpec::gaussian(1.0);
    let v = mmd_squared(array![0.0].view(), array![1.0].view(), &k1).unwrap();
    assert!((v - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-15);
    assert!((v - 0.786_939).abs() < 1e-6);

    let k = KernelSpec::default();
    let out = array![0.9, 0.1];
    let v = mindiff_loss(out.view(), &[1, 1], &[0, 1], &k).unwrap();
    let oracle = 2.0 - 2.0 * (-(0.8f64 * 0.8) / (2.0 * 0.25)).exp();
    assert!((v - oracle).abs() < 1e-15);

    let flat = Array1::from_elem(6, 0.5);
    assert_eq!(mindiff_loss(flat.view(), &[1, 1, 0, 1, 0, 1], &[0, 1, 0, 0, 1, 1], &k).unwrap(), 0.0);
    let err = mindiff_loss(array![0.2, 0.7].view(), &[1, 1], &[0, 0], &k).unwrap_err();
    assert!(matches!(err, Error::MissingSubgroup { attr: 1 }));
    assert!(mmd_squared(array![].view(), array![1.0].view(), &k).is_err());
}

#[test]
fn laplace_kernel_matches_oracle() {
    let k = KernelSpec::laplace(0.3);
    let s = [0.1, 0.4, 0.45];
    let t = [0.9, 0.2];
    let oracle = mmd_oracle(&s, &t, |a, b| (-(a - b).abs() / 0.3).exp());
    let v = mmd_squared(ArrayView1::from(&s), ArrayView1::from(&t), &k).unwrap();
    assert!((v - oracle).abs() < 1e-12);
}

#[test]
fn flooding_values() {
    assert_eq!(flood_transform(0.2, 0.1), 0.2);
    assert!((flood_transform(0.05, 0.1) - 0.15).abs() < 1e-15);
    assert_eq!(flood_transform(0.1, 0.1), 0.1);
}

#[test]
fn weight_decay_values_and_gradient() {
    let mut model = RandomFeatureModel::new(2, 3, 0).unwrap();
    model.set_head_params(&[3.0, 4.0, 0.0]).unwrap();
    assert_eq!(weight_decay_penalty(&model, 1.0), 12.5);
    assert_eq!(weight_decay_penalty(&model, 0.0), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = random_model(7, 3, 1, &mut rng);
    let strength = 0.37;
    let (gw, gb) = weight_decay_gradient(&model, strength);
    let mut analytic = gw.to_vec();
    analytic.push(gb);
    let numeric = central_diff(
        |p| {
            let mut m = model.clone();
            m.set_head_params(p).unwrap();
            weight_decay_penalty(&m, strength)
        },
        &model.head_params(),
        1e-6,
    );
    for (a, n) in analytic.iter().zip(&numeric) {
        assert!((a - n).abs() < 1e-8, "{a} vs {n}");
    }
}

#[test]
fn degenerate_config_is_plain_bce_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = random_dataset(12, 4, 9);
    let model = random_model(6, 4, 2, &mut rng);
    let cfg = LossConfig::default();
    let empty = data.select(&[]);
    let (breakdown, gw, gb) = total_loss_and_gradient(&model, &data, &empty, &cfg).unwrap();

    // dL/dp of mean BCE, chained through the model's own head gradient
    let out = model.forward(data.features().view()).unwrap();
    let n = data.len() as f64;
    let upstream: Array1<f64> = out
        .probabilities
        .iter()
        .zip(data.labels())
        .map(|(&p, &y)| if y == 1 { -1.0 / (p * n) } else { 1.0 / ((1.0 - p) * n) })
        .collect();
    let (ow, ob) = head_gradient_from_outputs(&out, upstream.view()).unwrap();
    for (a, b) in gw.iter().zip(ow.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((gb - ob).abs() < 1e-12);
    let direct = bce_loss(out.probabilities.view(), data.labels()).unwrap();
    assert!((breakdown.primary - direct).abs() < 1e-12);
    assert_eq!(breakdown.total, breakdown.primary);
}

#[test]
fn below_flood_level_the_primary_gradient_flips() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = random_dataset(10, 3, 4);
    let model = random_model(5, 3, 3, &mut rng);
    let empty = data.select(&[]);
    let plain = total_loss_and_gradient(&model, &data, &empty, &LossConfig::default()).unwrap();
    let b = plain.0.primary + 0.5;
    let flooded = total_loss_and_gradient(
        &model,
        &data,
        &empty,
        &LossConfig {
            flood_level: Some(b),
            ..LossConfig::default()
        },
    )
    .unwrap();
    for (a, p) in flooded.1.iter().zip(plain.1.iter()) {
        assert_eq!(*a, -*p);
    }
    assert_eq!(flooded.2, -plain.2);
    assert!((flooded.0.total - (2.0 * b - plain.0.primary)).abs() < 1e-12);
}

#[test]
fn full_objective_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = LossConfig {
        lambda: 1.5,
        flood_level: Some(0.3),
        weight_decay: 0.01,
        kernel: KernelSpec::default(),
    };
    let primary = random_dataset(16, 5, 1);
    let md = random_dataset(8, 5, 2);
    let model = random_model(9, 5, 7, &mut rng);
    let a = analytic(&model, &primary, &md, &cfg);
    let n = central_diff(|p| total_at(&model, p, &primary, &md, &cfg), &model.head_params(), 1e-6);
    assert!(relative_error(&a, &n) < 1e-5);
}

#[test]
fn breakdown_total_recomputes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let primary = random_dataset(16, 3, 5);
    let md = random_dataset(6, 3, 6);
    let model = random_model(4, 3, 1, &mut rng);
    for cfg in [
        LossConfig::default(),
        LossConfig {
            lambda: 0.5,
            flood_level: Some(2.0),
            weight_decay: 0.3,
            kernel: KernelSpec::laplace(0.2),
        },
    ] {
        let (b, _, _) = total_loss_and_gradient(&model, &primary, &md, &cfg).unwrap();
        assert!((b.total - b.recompute_total()).abs() < 1e-12);
    }
}

fn small_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..7)
}

proptest! {
    #[test]
    fn mmd_matches_double_sum_oracle(s in small_vec(), t in small_vec(), bw in 0.05f64..2.0) {
        let v = mmd_squared(ArrayView1::from(&s), ArrayView1::from(&t), &KernelSpec::gaussian(bw)).unwrap();
        let oracle = mmd_oracle_gaussian(&s, &t, bw).max(0.0);
        prop_assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn mmd_is_symmetric_and_zero_on_self(s in small_vec(), t in small_vec()) {
        let k = KernelSpec::default();
        let st = mmd_squared(ArrayView1::from(&s), ArrayView1::from(&t), &k).unwrap();
        let ts = mmd_squared(ArrayView1::from(&t), ArrayView1::from(&s), &k).unwrap();
        prop_assert!((st - ts).abs() < 1e-14);
        prop_assert!(st >= 0.0);
        prop_assert_eq!(mmd_squared(ArrayView1::from(&s), ArrayView1::from(&s), &k).unwrap(), 0.0);
    }

    #[test]
    fn mmd_is_permutation_invariant(s in small_vec(), t in small_vec(), rot in 0usize..6) {
        let k = KernelSpec::default();
        let mut s2 = s.clone();
        s2.reverse();
        let mut t2 = t.clone();
        let r = rot % t2.len();
        t2.rotate_left(r);
        let a = mmd_squared(ArrayView1::from(&s), ArrayView1::from(&t), &k).unwrap();
        let b = mmd_squared(ArrayView1::from(&s2), ArrayView1::from(&t2), &k).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn bce_is_invariant_under_joint_permutation(
        rows in prop::collection::vec((0.001f64..0.999, 0u8..2), 1..20),
        rot in 0usize..20,
    ) {
        let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let y: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let a = bce_loss(ArrayView1::from(&p), &y).unwrap();
        let r = rot % p.len();
        let (mut p2, mut y2) = (p.clone(), y.clone());
        p2.rotate_left(r);
        y2.rotate_left(r);
        let b = bce_loss(ArrayView1::from(&p2), &y2).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert!(a >= 0.0 && a.is_finite());
    }

    #[test]
    fn flood_output_is_at_least_b(primary in 0.0f64..5.0, b in 0.0f64..2.0) {
        let f = flood_transform(primary, b);
        prop_assert!(f >= b);
        if primary >= b {
            prop_assert!((f - primary).abs() <= 4.0 * f64::EPSILON * primary.max(1.0));
        }
    }
}
