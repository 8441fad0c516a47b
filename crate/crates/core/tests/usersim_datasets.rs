use gil_core::actions::{preconditions, ActionType};
use gil_core::datasetgen::{generate_dataset, load, save, write_dataset};
use gil_core::rng::derive_seed;
use gil_core::usersim::{
    build_table, build_table_with_mass, choose_gesture, gesture_vector_for, sample_focus,
    FocusAnchor, TableLevel, FOCUS_SIGMA, MIN_PERTURBATION, N_USERS,
};
use gil_core::world::{distances_to_focus, sample_scene, ObjectType};

#[test]
fn every_context_has_a_distribution() {
    for level in TableLevel::ALL {
        let t = build_table(level, 4);
        for ta in ActionType::ALL {
            let types: Vec<Option<ObjectType>> = if ta.requires_object() {
                ObjectType::ALL.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for ty in types {
                for state in [false, true] {
                    for user in 0..N_USERS {
                        let d = t.distribution(ta, ty, state, user).unwrap();
                        assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn levels_differ_enough_from_their_base() {
    for seed in 0..20 {
        let tables: Vec<_> = TableLevel::ALL
            .iter()
            .map(|l| build_table(*l, seed))
            .collect();
        for w in tables.windows(2) {
            let rate = w[1].perturbation_rate(&w[0]);
            assert!(
                rate >= MIN_PERTURBATION,
                "{} over {}: {rate}",
                w[1].level,
                w[0].level
            );
        }
    }
}

#[test]
fn chosen_gesture_frequency_matches_its_mass() {
    let t = build_table_with_mass(TableLevel::D1, 0, 0.9);
    let chosen = t
        .preferred_code(ActionType::Open, Some(ObjectType::Drawer), false, 0)
        .unwrap();
    let n = 10_000;
    let hits = (0..n)
        .filter(|&k| {
            choose_gesture(
                &t,
                ActionType::Open,
                Some(ObjectType::Drawer),
                false,
                0,
                derive_seed(1, k),
            )
            .unwrap()
                == chosen
        })
        .count();
    let f = hits as f64 / n as f64;
    assert!((0.88..=0.92).contains(&f), "{f}");
}

#[test]
fn focus_spread_per_axis() {
    let scene = sample_scene(17, Some(3)).unwrap();
    let c = scene.objects[1].center();
    let n = 10_000;
    let pts: Vec<_> = (0..n)
        .map(|k| sample_focus(&scene, FocusAnchor::Object(1), FOCUS_SIGMA, k).unwrap())
        .collect();
    for axis in 0..3 {
        let mean = pts.iter().map(|p| p[axis]).sum::<f64>() / n as f64;
        let sd =
            (pts.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((0.38..=0.42).contains(&sd), "axis {axis}: {sd}");
        assert!((mean - c[axis]).abs() < 0.02);
    }
}

#[test]
fn target_is_usually_nearest_on_spread_scenes() {
    let (mut trials, mut hits) = (0, 0);
    let mut seed = 0;
    while trials < 10_000 {
        seed += 1;
        let s = sample_scene(seed, None).unwrap();
        let cells: Vec<_> = s.objects.iter().map(|o| o.pos).collect();
        let spread = cells
            .iter()
            .enumerate()
            .all(|(i, a)| cells[i + 1..].iter().all(|b| a != b));
        if s.objects.len() < 2 || !spread {
            continue;
        }
        let target = (seed as usize) % s.objects.len();
        let f = sample_focus(&s, FocusAnchor::Object(target), FOCUS_SIGMA, seed ^ 0xf0c5).unwrap();
        let d = distances_to_focus(&s, &f);
        let nearest = (0..s.objects.len())
            .min_by(|a, b| d[*a].total_cmp(&d[*b]))
            .unwrap();
        hits += usize::from(nearest == target);
        trials += 1;
    }
    let rate = hits as f64 / trials as f64;
    assert!(rate >= 0.85, "{rate}");
}

#[test]
fn gesture_vectors_center_where_expected() {
    let n = 1000;
    let mut chosen = 0.0;
    for k in 0..n {
        let v = gesture_vector_for(4, k).unwrap();
        let best = (0..v.len()).max_by(|a, b| v[*a].total_cmp(&v[*b])).unwrap();
        assert_eq!(best, 4);
        chosen += v[4];
    }
    let mean = chosen / n as f64;
    assert!((0.86..=0.89).contains(&mean), "{mean}");
}

#[test]
fn generated_labels_are_executable_and_spread() {
    let d = generate_dataset(TableLevel::D1, 10_000, 21).unwrap();
    let mut counts = [0usize; ActionType::COUNT];
    for (i, r) in d.records.iter().enumerate() {
        assert!(r.check().is_empty(), "record {i}: {:?}", r.check());
        assert!(
            preconditions(r.action(), r.object(), &r.scene)
                .unwrap()
                .is_empty(),
            "record {i}"
        );
        counts[r.label_action] += 1;
    }
    let mean = d.len() as f64 / counts.len() as f64;
    for (a, c) in counts.iter().enumerate() {
        let rel = (*c as f64 - mean).abs() / mean;
        assert!(
            rel <= 0.30,
            "{}: {c} vs mean {mean}",
            ActionType::from_index(a).unwrap()
        );
    }
}

#[test]
fn files_are_byte_identical_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = |seed| {
        let mut buf = Vec::new();
        write_dataset(
            &generate_dataset(TableLevel::D4, 300, seed).unwrap(),
            &mut buf,
        )
        .unwrap();
        buf
    };
    assert_eq!(bytes(5), bytes(5));
    assert_ne!(bytes(5), bytes(6));
    let d = generate_dataset(TableLevel::D3, 200, 9).unwrap();
    let path = dir.path().join("d3.jsonl");
    save(&d, &path).unwrap();
    assert_eq!(load(&path).unwrap(), d);
}
