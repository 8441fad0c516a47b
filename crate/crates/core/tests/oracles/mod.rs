//! Reference implementations shared by the test suites. Each is written
//! from the definitions alone and shares no code with the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use gil_core::actions::ActionType;
use gil_core::gestures::Vec3;
use gil_core::intentnet::{VariationalMLP, Weights};
use gil_core::rng::seeded;
use gil_core::world::{GridPos, ObjectId, ObjectType, Scene, GRID_SIZE};
use rand::Rng as _;

/// Directly executable `(action, object)` pairs.
pub fn feasible_intents(scene: &Scene) -> BTreeSet<(ActionType, Option<ObjectId>)> {
    let objs = &scene.objects;
    let held = scene.gripper.holding;
    let on_top = |id: ObjectId| objs.iter().any(|o| o.on_top_of == Some(id));
    let drawer_open = |d: Option<ObjectId>| d.is_none_or(|d| objs[d].state);
    let mut out = BTreeSet::new();

    for o in objs {
        let id = o.id;
        let below_ceiling = o.pos.z + 1 < GRID_SIZE;
        let ok = |ta: ActionType| match ta {
            ActionType::PutInto => o.kind == ObjectType::Drawer && o.state && held.is_some(),
            ActionType::PutOnTarget => {
                o.kind == ObjectType::Cube
                    && held.is_some()
                    && held != Some(id)
                    && !on_top(id)
                    && o.inside_of.is_none()
                    && below_ceiling
            }
            ActionType::Pour => {
                o.kind == ObjectType::Cup
                    && held.is_some_and(|h| objs[h].kind == ObjectType::Cup && objs[h].state)
                    && held != Some(id)
                    && drawer_open(o.inside_of)
                    && below_ceiling
            }
            ActionType::PickUp => {
                o.kind != ObjectType::Drawer
                    && held.is_none()
                    && !on_top(id)
                    && drawer_open(o.inside_of)
            }
            ActionType::Open => o.kind == ObjectType::Drawer && !o.state,
            ActionType::Close => o.kind == ObjectType::Drawer && o.state,
            _ => false,
        };
        for ta in ActionType::ALL {
            if ok(ta) {
                out.insert((ta, Some(id)));
            }
        }
    }

    if let Some(h) = held {
        let free = (0..GRID_SIZE)
            .flat_map(|x| (0..GRID_SIZE).map(move |y| (x, y)))
            .any(|(x, y)| {
                !objs
                    .iter()
                    .any(|o| o.id != h && o.pos.x == x && o.pos.y == y)
            });
        if free {
            out.insert((ActionType::Place, None));
        }
    }
    let eef = scene.gripper.eef_pos;
    for (ta, d) in [
        (ActionType::MoveRight, (1, 0, 0)),
        (ActionType::MoveLeft, (-1, 0, 0)),
        (ActionType::MoveUp, (0, 0, 1)),
        (ActionType::MoveDown, (0, 0, -1)),
    ] {
        let p = GridPos::new(eef.x + d.0, eef.y + d.1, eef.z + d.2);
        let inside = (0..GRID_SIZE).contains(&p.x)
            && (0..GRID_SIZE).contains(&p.y)
            && (0..GRID_SIZE).contains(&p.z);
        let blocked = held.is_some()
            && objs
                .iter()
                .any(|o| Some(o.id) != held && o.inside_of.is_none() && o.pos == p);
        if inside && !blocked {
            out.insert((ta, None));
        }
    }
    out
}

// Exhaustive search over monotone alignments: the cheapest path, ties broken
// by the fewest aligned pairs, normalized by its length.
pub fn brute_dtw(a: &[Vec3], b: &[Vec3]) -> f64 {
    fn walk(
        a: &[Vec3],
        b: &[Vec3],
        i: usize,
        j: usize,
        cost: f64,
        len: usize,
        best: &mut (f64, usize),
    ) {
        let d = a[i]
            .iter()
            .zip(&b[j])
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let (cost, len) = (cost + d, len + 1);
        if i + 1 == a.len() && j + 1 == b.len() {
            if cost < best.0 - 1e-9 || (cost <= best.0 + 1e-9 && len < best.1) {
                *best = (cost, len);
            }
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, cost, len, best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, cost, len, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, cost, len, best);
        }
    }
    let mut best = (f64::INFINITY, usize::MAX);
    walk(a, b, 0, 0, 0.0, 0, &mut best);
    best.0 / best.1 as f64
}

pub fn all_sequences(alphabet: &[Vec3], max_len: usize) -> Vec<Vec<Vec3>> {
    let mut out: Vec<Vec<Vec3>> = Vec::new();
    let mut layer: Vec<Vec<Vec3>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                alphabet.iter().map(move |p| {
                    let mut t = s.clone();
                    t.push(*p);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// ELBO estimate from flat parameters, written independently of the library.
pub fn reference_elbo(
    dims: &[usize],
    params: &[f64],
    prior: f64,
    batch: &[(Vec<f64>, usize)],
    eps: &Weights,
    scale: f64,
) -> f64 {
    let mut off = 0;
    let mut ws = Vec::new();
    let mut kl = 0.0;
    for (k, pair) in dims.windows(2).enumerate() {
        let n = pair[0] * pair[1];
        let mu = &params[off..off + n];
        let ls = &params[off + n..off + 2 * n];
        off += 2 * n;
        let mut w = vec![0.0; n];
        for j in 0..n {
            let s = ls[j].exp();
            w[j] = mu[j] + s * eps[k][j];
            kl += (prior / s).ln() + (s * s + mu[j] * mu[j]) / (2.0 * prior * prior) - 0.5;
        }
        ws.push(w);
    }
    let mut ll = 0.0;
    for (x, y) in batch {
        let mut h = x.clone();
        for (k, pair) in dims.windows(2).enumerate() {
            let (r, c) = (pair[0], pair[1]);
            let last = k == dims.len() - 2;
            h = (0..c)
                .map(|j| {
                    let z: f64 = (0..r).map(|i| h[i] * ws[k][i * c + j]).sum();
                    if last {
                        1.0 / (1.0 + (-z).exp())
                    } else {
                        z.tanh()
                    }
                })
                .collect();
        }
        ll += (h[*y] / h.iter().sum::<f64>()).ln();
    }
    scale * ll - kl
}

/// Small network with random means, stddevs, noise and a 4-sample batch.
pub fn random_model(
    dims: &[usize],
    seed: u64,
) -> (VariationalMLP, Weights, Vec<(Vec<f64>, usize)>) {
    let mut r = seeded(seed);
    let mut m = VariationalMLP::new(
        dims[0],
        &dims[1..dims.len() - 1],
        dims[dims.len() - 1],
        1.3,
        0.1,
    );
    let mut p: Vec<f64> = (0..m.params_flat().len())
        .map(|_| r.random_range(-1.0..1.0))
        .collect();
    // Keep the stddevs in a sensible range.
    let mut off = 0;
    for pair in dims.windows(2) {
        let n = pair[0] * pair[1];
        for v in &mut p[off + n..off + 2 * n] {
            *v = r.random_range(0.05f64..0.5).ln();
        }
        off += 2 * n;
    }
    m.set_params_flat(&p);
    let eps = m.draw_noise(&mut r);
    let out = dims[dims.len() - 1];
    let batch = (0..4)
        .map(|_| {
            (
                (0..dims[0]).map(|_| r.random_range(-2.0..2.0)).collect(),
                r.random_range(0..out),
            )
        })
        .collect();
    (m, eps, batch)
}
