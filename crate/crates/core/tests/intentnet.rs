mod oracles;

use gil_core::actions::{valid_intents, ActionType};
use gil_core::datasetgen::{generate_dataset, split};
use gil_core::intentnet::{
    elbo_step, rank, select, train, Adam, Head, ModelVariant, TrainConfig, VariationalMLP,
};
use gil_core::rng::seeded;
use gil_core::usersim::TableLevel;
use gil_core::world::{sample_scene, MAX_OBJECTS};
use oracles::{random_model, reference_elbo};
use proptest::prelude::*;
use rand::Rng as _;

#[test]
fn elbo_gradient_matches_central_differences() {
    for (dims, seed) in [
        (vec![1, 1, 2], 1u64),
        (vec![2, 3, 2], 2),
        (vec![3, 2, 2, 2], 3),
        (vec![2, 2, 2, 3], 4),
    ] {
        let (m, eps, batch) = random_model(&dims, seed);
        assert!(m.params_flat().len() <= 50);
        let refs: Vec<(&[f64], usize)> = batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let scale = 2.5;
        let (e, g) = m.elbo_and_grad(&refs, &eps, scale);
        let p = m.params_flat();
        assert!((e - reference_elbo(&dims, &p, 1.3, &batch, &eps, scale)).abs() < 1e-10);
        let h = 1e-5;
        for (i, ga) in g.flat().iter().enumerate() {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (reference_elbo(&dims, &hi, 1.3, &batch, &eps, scale)
                - reference_elbo(&dims, &lo, 1.3, &batch, &eps, scale))
                / (2.0 * h);
            let denom = ga.abs().max(fd.abs()).max(1e-6);
            assert!(
                (ga - fd).abs() / denom < 1e-4,
                "dims {dims:?} param {i}: analytic {ga}, numeric {fd}"
            );
        }
    }
}

#[test]
fn elbo_gain_arrives_early_on_separable_toy() {
    let mut r = seeded(11);
    let data: Vec<(Vec<f64>, usize)> = (0..64)
        .map(|i| {
            let y = i % 2;
            let x0 = if y == 1 {
                r.random_range(0.5..2.0)
            } else {
                r.random_range(-2.0..-0.5)
            };
            (vec![x0, r.random_range(-1.0..1.0)], y)
        })
        .collect();
    let batch: Vec<(&[f64], usize)> = data.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    let mut m = VariationalMLP::new(2, &[4], 2, 1.0, 0.1);
    let mut opt = Adam::new(2 * m.n_weights(), 0.01);
    let steps = 2000;
    let trace: Vec<f64> = (0..steps)
        .map(|_| elbo_step(&mut m, &mut opt, &batch, 1.0, 1, &mut r).unwrap())
        .collect();
    let window = |end: usize| trace[end - 100..end].iter().sum::<f64>() / 100.0;
    let start = trace[..10].iter().sum::<f64>() / 10.0;
    let (half, end) = (window(steps / 2), window(steps));
    assert!(end > start);
    assert!(
        half - start >= 0.9 * (end - start),
        "start {start}, half {half}, end {end}"
    );
}

#[test]
fn kl_vanishes_at_prior() {
    let m = VariationalMLP::new(5, &[4, 3], 2, 0.7, 0.7);
    assert!(m.kl().abs() < 1e-12);
}

#[test]
fn posterior_predictive_is_stable() {
    let d = generate_dataset(TableLevel::D1, 1100, 3).unwrap();
    let (tr, te) = split(&d, 1000, 100).unwrap();
    let cfg = TrainConfig::default().with_epochs(3000).with_seed(3);
    let m = train(&tr, ModelVariant::M1, Head::Action, &cfg)
        .unwrap()
        .model;
    for r in te.records.iter().take(20) {
        let maxes: Vec<f64> = (0..10)
            .map(|k| {
                m.predict(r, 100, k)
                    .unwrap()
                    .into_iter()
                    .fold(0.0, f64::max)
            })
            .collect();
        let mean = maxes.iter().sum::<f64>() / 10.0;
        let var = maxes.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
        assert!(var <= 0.02, "variance {var}");
    }
}

#[test]
fn zero_threshold_always_answers() {
    let pa = vec![1.0 / 11.0; ActionType::COUNT];
    let po = vec![1.0 / 8.0; MAX_OBJECTS + 1];
    for seed in 0..500 {
        let s = sample_scene(seed, None).unwrap();
        let c = select(&pa, &po, valid_intents(&s), 0.0).unwrap();
        assert!(valid_intents(&s).contains(&c.key));
    }
}

fn weights_strategy(
    dims: Vec<usize>,
) -> impl Strategy<Value = (Vec<usize>, Vec<Vec<f64>>, Vec<f64>)> {
    let sizes: Vec<usize> = dims.windows(2).map(|w| w[0] * w[1]).collect();
    let ws = sizes
        .into_iter()
        .map(|n| prop::collection::vec(-6.0f64..6.0, n))
        .collect::<Vec<_>>();
    let x = prop::collection::vec(-50.0f64..50.0, dims[0]);
    (Just(dims), ws, x)
}

proptest! {
    #[test]
    fn forward_is_a_distribution(
        (dims, w, x) in (1usize..6, 1usize..6, prop::option::of(1usize..6), 2usize..12)
            .prop_map(|(i, h, h2, o)| {
                let mut d = vec![i, h];
                d.extend(h2);
                d.push(o);
                d
            })
            .prop_flat_map(weights_strategy)
    ) {
        let m = VariationalMLP::new(dims[0], &dims[1..dims.len() - 1], dims[dims.len() - 1], 1.0, 0.1);
        let p = m.forward(&x, &w).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn kl_is_nonnegative(mu in prop::collection::vec(-5.0f64..5.0, 12), ls in prop::collection::vec(-6.0f64..2.0, 12), prior in 0.1f64..5.0) {
        let mut m = VariationalMLP::new(3, &[2], 2, prior, 0.1);
        let mut p = Vec::new();
        p.extend_from_slice(&mu[..6]);
        p.extend_from_slice(&ls[..6]);
        p.extend_from_slice(&mu[6..10]);
        p.extend_from_slice(&ls[6..10]);
        m.set_params_flat(&p);
        prop_assert!(m.kl() >= 0.0);
    }

    #[test]
    fn positive_rescaling_keeps_the_choice(
        seed in 0u64..5000,
        pa in prop::collection::vec(0.0f64..1.0, ActionType::COUNT),
        po in prop::collection::vec(0.0f64..1.0, MAX_OBJECTS + 1),
        c in 0.01f64..100.0,
    ) {
        let s = sample_scene(seed, None).unwrap();
        let scaled: Vec<f64> = pa.iter().map(|v| v * c).collect();
        let a = rank(&pa, &po, valid_intents(&s));
        let b = rank(&scaled, &po, valid_intents(&s));
        prop_assert_eq!(a.first().map(|x| x.key), b.first().map(|x| x.key));
    }
}
