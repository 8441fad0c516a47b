//! Simulated users. A decision table maps the context of an intent (object
//! state, user, object type, action) to a categorical distribution over
//! gesture codes; the user then performs the drawn code.
//!
//! A gesture code is a set of one or two gestures performed within one
//! episode. Nine single-gesture codes cover nine actions; the two remaining
//! actions are expressed as two-gesture combinations, so every action owns a
//! distinct code in the context-free table.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actions::ActionType;
use crate::gestures::N_GESTURES;
use crate::rng;
use crate::world::{FocusPoint, GridPos, ObjectId, ObjectType, Scene, WorldError};

pub const N_USERS: usize = 2;
pub const N_TYPES: usize = 3;
pub const N_STATES: usize = 2;
pub const N_ACTIONS: usize = ActionType::COUNT;
/// Mass the table puts on the user's preferred code.
pub const DEFAULT_CHOSEN_MASS: f64 = 0.99;
pub const FOCUS_SIGMA: f64 = 0.4;
/// Minimum fraction of a level's entries whose preferred code differs from
/// the level below.
pub const MIN_PERTURBATION: f64 = 0.30;
/// Object actions whose codes get reshuffled per added context value.
pub const PERTURBED_PER_CONTEXT: usize = 4;

pub type UserId = usize;
pub type GestureVector = [f64; N_GESTURES];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UserSimError {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableLevel {
    D1,
    D2,
    D3,
    D4,
}

impl TableLevel {
    pub const ALL: [TableLevel; 4] = [
        TableLevel::D1,
        TableLevel::D2,
        TableLevel::D3,
        TableLevel::D4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableLevel::D1 => "D1",
            TableLevel::D2 => "D2",
            TableLevel::D3 => "D3",
            TableLevel::D4 => "D4",
        }
    }

    pub fn parse(s: &str) -> Option<TableLevel> {
        TableLevel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
    }

    pub fn uses_type(self) -> bool {
        self >= TableLevel::D2
    }

    pub fn uses_user(self) -> bool {
        self >= TableLevel::D3
    }

    pub fn uses_state(self) -> bool {
        self >= TableLevel::D4
    }
}

impl std::fmt::Display for TableLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Gesture code vocabulary, by gesture index (see
/// [`crate::gestures::DEFAULT_GESTURES`]).
pub fn code_vocabulary() -> Vec<Vec<usize>> {
    let mut codes: Vec<Vec<usize>> = (0..N_GESTURES).map(|g| vec![g]).collect();
    codes.push(vec![2, 6]); // point + swipe_down
    codes.push(vec![1, 5]); // pinch + swipe_up
    codes
}

/// Context-free preferred code of every action.
pub fn base_assignment() -> [usize; N_ACTIONS] {
    let mut a = [0; N_ACTIONS];
    for ta in ActionType::ALL {
        a[ta.index()] = match ta {
            ActionType::PutInto => 9,
            ActionType::PutOnTarget => 10,
            ActionType::Place => 2,
            ActionType::Pour => 1,
            ActionType::PickUp => 0,
            ActionType::Open => 3,
            ActionType::Close => 4,
            ActionType::MoveRight => 8,
            ActionType::MoveLeft => 7,
            ActionType::MoveUp => 5,
            ActionType::MoveDown => 6,
        };
    }
    a
}

/// A multi-dimensional user model. Storage always spans the full
/// `[S × U × T × I]` context; lower levels repeat entries along the
/// dimensions they ignore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub level: TableLevel,
    pub seed: u64,
    pub chosen_mass: f64,
    pub codes: Vec<Vec<usize>>,
    /// `preferred[s][u][t][a]`: index into `codes`.
    pub preferred: Vec<Vec<Vec<Vec<usize>>>>,
}

fn derangement(items: &[usize], rng: &mut rng::Rng) -> Vec<usize> {
    let mut out = items.to_vec();
    loop {
        out.shuffle(rng);
        if out.iter().zip(items).all(|(a, b)| a != b) {
            return out;
        }
    }
}

/// Replaces the codes of `actions` in `row` by a derangement of themselves.
fn perturb(row: &mut [usize], actions: &[ActionType], rng: &mut rng::Rng) {
    let current: Vec<usize> = actions.iter().map(|a| row[a.index()]).collect();
    let shuffled = derangement(&current, rng);
    for (a, c) in actions.iter().zip(shuffled) {
        row[a.index()] = c;
    }
}

/// Deranges the codes of a random subset of `size` object actions.
fn perturb_some(row: &mut [usize], actions: &[ActionType], size: usize, rng: &mut rng::Rng) {
    let mut chosen = actions.to_vec();
    chosen.shuffle(rng);
    chosen.truncate(size.min(actions.len()));
    chosen.sort();
    perturb(row, &chosen, rng);
}

fn object_actions() -> Vec<ActionType> {
    ActionType::ALL
        .into_iter()
        .filter(|a| a.requires_object())
        .collect()
}

fn objectless_actions() -> Vec<ActionType> {
    ActionType::ALL
        .into_iter()
        .filter(|a| !a.requires_object())
        .collect()
}

/// Builds the user model of `level`. Each level starts from the one below
/// and reshuffles the preferred codes along its added dimension; actions
/// without a target object only vary with the user.
pub fn build_table(level: TableLevel, seed: u64) -> DecisionTable {
    build_table_with_mass(level, seed, DEFAULT_CHOSEN_MASS)
}

pub fn build_table_with_mass(level: TableLevel, seed: u64, chosen_mass: f64) -> DecisionTable {
    let base = base_assignment().to_vec();
    let objs = object_actions();
    let free = objectless_actions();
    let mut r = rng::seeded(rng::derive_seed_str(seed, "decision-table"));

    // [T][I]
    let by_type: Vec<Vec<usize>> = (0..N_TYPES)
        .map(|_| {
            let mut row = base.clone();
            if level.uses_type() {
                perturb_some(&mut row, &objs, PERTURBED_PER_CONTEXT, &mut r);
            }
            row
        })
        .collect();
    // [U][T][I]
    let user_free: Vec<Vec<usize>> = (0..N_USERS)
        .map(|_| {
            let mut row = base.clone();
            if level.uses_user() {
                perturb(&mut row, &free, &mut r);
            }
            row
        })
        .collect();
    let by_user: Vec<Vec<Vec<usize>>> = (0..N_USERS)
        .map(|u| {
            by_type
                .iter()
                .map(|t_row| {
                    let mut row = t_row.clone();
                    if level.uses_user() {
                        perturb_some(&mut row, &objs, PERTURBED_PER_CONTEXT, &mut r);
                        for a in &free {
                            row[a.index()] = user_free[u][a.index()];
                        }
                    }
                    row
                })
                .collect()
        })
        .collect();
    // [S][U][T][I]
    let preferred: Vec<Vec<Vec<Vec<usize>>>> = (0..N_STATES)
        .map(|_| {
            by_user
                .iter()
                .map(|u_rows| {
                    u_rows
                        .iter()
                        .map(|row| {
                            let mut row = row.clone();
                            if level.uses_state() {
                                perturb_some(&mut row, &objs, PERTURBED_PER_CONTEXT, &mut r);
                            }
                            row
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    DecisionTable {
        level,
        seed,
        chosen_mass,
        codes: code_vocabulary(),
        preferred,
    }
}

impl DecisionTable {
    pub fn n_codes(&self) -> usize {
        self.codes.len()
    }

    /// Context indices actually consulted at this level.
    pub fn context_index(
        &self,
        ta: ActionType,
        object_type: Option<ObjectType>,
        object_state: bool,
        user: UserId,
    ) -> Result<(usize, usize, usize), UserSimError> {
        if user >= N_USERS {
            return Err(UserSimError::IndexOutOfRange(format!("user {user}")));
        }
        if ta.requires_object() && object_type.is_none() {
            return Err(UserSimError::IndexOutOfRange(format!(
                "{ta} without object type"
            )));
        }
        let s = if self.level.uses_state() && ta.requires_object() {
            usize::from(object_state)
        } else {
            0
        };
        let u = if self.level.uses_user() { user } else { 0 };
        let t = match object_type {
            Some(k) if self.level.uses_type() && ta.requires_object() => k.index(),
            _ => 0,
        };
        Ok((s, u, t))
    }

    pub fn preferred_code(
        &self,
        ta: ActionType,
        object_type: Option<ObjectType>,
        object_state: bool,
        user: UserId,
    ) -> Result<usize, UserSimError> {
        let (s, u, t) = self.context_index(ta, object_type, object_state, user)?;
        Ok(self.preferred[s][u][t][ta.index()])
    }

    /// Categorical distribution over codes for the given context.
    pub fn distribution(
        &self,
        ta: ActionType,
        object_type: Option<ObjectType>,
        object_state: bool,
        user: UserId,
    ) -> Result<Vec<f64>, UserSimError> {
        let chosen = self.preferred_code(ta, object_type, object_state, user)?;
        let k = self.n_codes();
        let rest = (1.0 - self.chosen_mass) / (k - 1) as f64;
        Ok((0..k)
            .map(|c| if c == chosen { self.chosen_mass } else { rest })
            .collect())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("table serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Fraction of full-context entries whose preferred code differs from
    /// `lower`'s at the projected context.
    pub fn perturbation_rate(&self, lower: &DecisionTable) -> f64 {
        let mut changed = 0usize;
        let mut total = 0usize;
        for s in 0..N_STATES {
            for u in 0..N_USERS {
                for t in 0..N_TYPES {
                    for a in 0..N_ACTIONS {
                        total += 1;
                        let ls = if lower.level.uses_state() { s } else { 0 };
                        let lu = if lower.level.uses_user() { u } else { 0 };
                        let lt = if lower.level.uses_type() { t } else { 0 };
                        if self.preferred[s][u][t][a] != lower.preferred[ls][lu][lt][a] {
                            changed += 1;
                        }
                    }
                }
            }
        }
        changed as f64 / total as f64
    }
}

/// Draws the code the user performs for this intent context.
pub fn choose_gesture(
    table: &DecisionTable,
    ta: ActionType,
    object_type: Option<ObjectType>,
    object_state: bool,
    user: UserId,
    seed: u64,
) -> Result<usize, UserSimError> {
    let dist = table.distribution(ta, object_type, object_state, user)?;
    let mut r = rng::seeded(seed);
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(dist.len() - 1)
}

/// What the user looks at: an object or an empty cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FocusAnchor {
    Object(ObjectId),
    Cell(GridPos),
}

/// Isotropic Gaussian around the anchor's center.
pub fn sample_focus(
    scene: &Scene,
    anchor: FocusAnchor,
    sigma: f64,
    seed: u64,
) -> Result<FocusPoint, UserSimError> {
    let center = match anchor {
        FocusAnchor::Object(id) => scene.object(id)?.center(),
        FocusAnchor::Cell(c) => c.as_f64(),
    };
    let normal =
        Normal::new(0.0, sigma).map_err(|e| UserSimError::IndexOutOfRange(e.to_string()))?;
    let mut r = rng::seeded(seed);
    Ok([
        center[0] + normal.sample(&mut r),
        center[1] + normal.sample(&mut r),
        center[2] + normal.sample(&mut r),
    ])
}

/// Episode gesture vector for a code: performed gestures score in
/// `[0.75, 1]`, all others in `[0, 0.25]`.
pub fn gesture_vector_for_code(code: &[usize], seed: u64) -> Result<GestureVector, UserSimError> {
    if let Some(&g) = code.iter().find(|&&g| g >= N_GESTURES) {
        return Err(UserSimError::IndexOutOfRange(format!("gesture {g}")));
    }
    let mut r = rng::seeded(seed);
    let mut v = [0.0; N_GESTURES];
    for (i, e) in v.iter_mut().enumerate() {
        *e = if code.contains(&i) {
            r.random_range(0.75..=1.0)
        } else {
            r.random_range(0.0..=0.25)
        };
    }
    Ok(v)
}

pub fn gesture_vector_for(gesture: usize, seed: u64) -> Result<GestureVector, UserSimError> {
    gesture_vector_for_code(&[gesture], seed)
}
