//! From gesture evidence and context to one feasible intent.

use super::features::encode;
use super::model::IntentModel;
use super::IntentNetError;
use crate::actions::{valid_intents, ActionType, Intent, IntentKey, MetricParams};
use crate::rng;
use crate::usersim::UserId;
use crate::world::{FocusPoint, ObjectId, Scene, MAX_OBJECTS};

pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// The two heads used together.
#[derive(Debug, Clone)]
pub struct IntentModels {
    pub action: IntentModel,
    pub object: IntentModel,
}

/// Scored candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub key: IntentKey,
    pub score: f64,
    pub action_prob: f64,
}

fn object_class(o: Option<ObjectId>) -> usize {
    o.unwrap_or(MAX_OBJECTS)
}

/// Feasible `(action, object)` pairs scored by the product of the head
/// probabilities, best first. Ties keep the order of `feasible`.
pub fn rank(
    action_probs: &[f64],
    object_probs: &[f64],
    feasible: impl IntoIterator<Item = IntentKey>,
) -> Vec<Candidate> {
    let mut c: Vec<Candidate> = feasible
        .into_iter()
        .map(|key| {
            let pa = action_probs.get(key.0.index()).copied().unwrap_or(0.0);
            let po = object_probs
                .get(object_class(key.1))
                .copied()
                .unwrap_or(0.0);
            Candidate {
                key,
                score: pa * po,
                action_prob: pa,
            }
        })
        .collect();
    c.sort_by(|a, b| b.score.total_cmp(&a.score));
    c
}

/// Best feasible pair, provided its action probability reaches `theta`.
pub fn select(
    action_probs: &[f64],
    object_probs: &[f64],
    feasible: impl IntoIterator<Item = IntentKey>,
    theta: f64,
) -> Result<Candidate, IntentNetError> {
    match rank(action_probs, object_probs, feasible).first() {
        Some(best) if best.action_prob >= theta => Ok(*best),
        _ => Err(IntentNetError::NoConfidentIntent),
    }
}

/// Most probable feasible intent for one observation. The metric is the
/// action default; callers with hand frames overwrite it.
#[allow(clippy::too_many_arguments)]
pub fn infer_intent(
    gesture: &[f64],
    scene: &Scene,
    focus: &FocusPoint,
    user: UserId,
    models: &IntentModels,
    theta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Intent, IntentNetError> {
    infer_intent_among(
        gesture,
        scene,
        focus,
        user,
        models,
        theta,
        n_samples,
        seed,
        valid_intents(scene),
    )
}

/// [`infer_intent`] over an explicit candidate set, e.g. everything the
/// planner can recover into.
#[allow(clippy::too_many_arguments)]
pub fn infer_intent_among(
    gesture: &[f64],
    scene: &Scene,
    focus: &FocusPoint,
    user: UserId,
    models: &IntentModels,
    theta: f64,
    n_samples: usize,
    seed: u64,
    candidates: impl IntoIterator<Item = IntentKey>,
) -> Result<Intent, IntentNetError> {
    let predict = |m: &IntentModel, label: &str| {
        let x = encode(m.config.variant, gesture, scene, focus, user);
        let mut g = rng::seeded(rng::derive_seed_str(seed, label));
        m.net.predict(&x, n_samples.max(1), &mut g)
    };
    let pa = predict(&models.action, "action")?;
    let po = predict(&models.object, "object")?;
    let best = select(&pa, &po, candidates, theta)?;
    let (ta, to): (ActionType, Option<ObjectId>) = best.key;
    let mut intent = Intent::new(ta, to).with_focus(*focus);
    intent.metric = MetricParams::defaults_for(ta);
    Ok(intent)
}
