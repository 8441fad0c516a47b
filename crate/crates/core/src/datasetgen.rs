//! Synthetic observation datasets: sample a scene, pick a feasible intent,
//! place the user's focus, pick the user, and let the user's decision table
//! produce a gesture vector.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{preconditions, valid_intents, ActionType, MetricParams};
use crate::gestures::N_GESTURES;
use crate::rng;
use crate::usersim::{
    build_table, choose_gesture, gesture_vector_for_code, sample_focus, DecisionTable, FocusAnchor,
    GestureVector, TableLevel, UserId, UserSimError, FOCUS_SIGMA, N_USERS,
};
use crate::world::{
    sample_scene, FocusPoint, GridPos, GripperState, ObjectId, ObjectType, Scene, SceneObject,
    WorldError,
};

pub const DEFAULT_TRAIN: usize = 4000;
pub const DEFAULT_TEST: usize = 500;
/// Scene redraws allowed while looking for one that affords the drawn
/// action.
pub const MAX_SCENE_DRAWS: u64 = 10_000;
/// Object-head label for intents without a target object.
pub const NO_OBJECT: i64 = -1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least {needed} records, have {have}")]
    TooFewRecords { needed: usize, have: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema mismatch at line {line}: {reason}")]
    SchemaMismatch { line: usize, reason: String },
    #[error("no scene affording {0} after {MAX_SCENE_DRAWS} draws")]
    NoFeasibleScene(ActionType),
    #[error(transparent)]
    User(#[from] UserSimError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// One observation with its ground-truth intent.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub gesture_vector: GestureVector,
    pub scene: Scene,
    pub focus: FocusPoint,
    pub user: UserId,
    pub label_action: usize,
    /// Slot of the target object, or [`NO_OBJECT`].
    pub label_object: i64,
    pub metric: MetricParams,
}

impl ObservationRecord {
    pub fn action(&self) -> ActionType {
        ActionType::from_index(self.label_action).expect("label in range")
    }

    pub fn object(&self) -> Option<ObjectId> {
        usize::try_from(self.label_object).ok()
    }

    /// Broken record invariants, if any.
    pub fn check(&self) -> Vec<String> {
        let mut v = Vec::new();
        let Some(ta) = ActionType::from_index(self.label_action) else {
            return vec![format!("action label {} out of range", self.label_action)];
        };
        if !valid_intents(&self.scene).contains(&(ta, self.object())) {
            v.push(format!(
                "({ta}, {}) is not a valid intent",
                self.label_object
            ));
        }
        if self.gesture_vector.iter().any(|g| !(0.0..=1.0).contains(g)) {
            v.push("gesture entry outside [0, 1]".into());
        }
        if self.user >= N_USERS {
            v.push(format!("user {} out of range", self.user));
        }
        if !self.metric.is_valid_for(ta) {
            v.push("metric does not fit the action".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub level: TableLevel,
    pub seed: u64,
    pub table_hash: String,
    pub records: Vec<ObservationRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn with_records(&self, records: Vec<ObservationRecord>) -> Dataset {
        Dataset {
            level: self.level,
            seed: self.seed,
            table_hash: self.table_hash.clone(),
            records,
        }
    }
}

fn focus_anchor(
    scene: &Scene,
    ta: ActionType,
    to: Option<ObjectId>,
    r: &mut rng::Rng,
) -> FocusAnchor {
    if let Some(id) = to {
        return FocusAnchor::Object(id);
    }
    if ta == ActionType::Place {
        let cells = scene.free_ground_cells();
        if !cells.is_empty() {
            return FocusAnchor::Cell(cells[r.random_range(0..cells.len())]);
        }
    }
    FocusAnchor::Cell(scene.gripper.eef_pos)
}

/// One record. The action is drawn uniformly, then scenes are redrawn until
/// one affords it, then the target is drawn uniformly among the feasible
/// ones.
pub fn generate_record(
    table: &DecisionTable,
    seed: u64,
) -> Result<ObservationRecord, DatasetError> {
    let mut r = rng::seeded(seed);
    let ta = ActionType::ALL[r.random_range(0..ActionType::COUNT)];
    let mut found = None;
    for attempt in 0..MAX_SCENE_DRAWS {
        let scene = match sample_scene(rng::derive_seed(seed, attempt), None) {
            Ok(s) => s,
            Err(WorldError::PlacementExhausted(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let targets: Vec<Option<ObjectId>> = valid_intents(&scene)
            .into_iter()
            .filter(|(a, _)| *a == ta)
            .map(|(_, o)| o)
            .collect();
        if !targets.is_empty() {
            found = Some((scene, targets));
            break;
        }
    }
    let (scene, targets) = found.ok_or(DatasetError::NoFeasibleScene(ta))?;
    let to = targets[r.random_range(0..targets.len())];
    debug_assert!(preconditions(ta, to, &scene)
        .map(|p| p.is_empty())
        .unwrap_or(false));

    let anchor = focus_anchor(&scene, ta, to, &mut r);
    let focus = sample_focus(&scene, anchor, FOCUS_SIGMA, r.random())?;
    let user = r.random_range(0..N_USERS);
    let (kind, state) = match to {
        Some(id) => {
            let o = scene.object(id)?;
            (Some(o.kind), o.state)
        }
        None => (None, false),
    };
    let code = choose_gesture(table, ta, kind, state, user, r.random())?;
    let gesture_vector = gesture_vector_for_code(&table.codes[code], r.random())?;
    Ok(ObservationRecord {
        gesture_vector,
        scene,
        focus,
        user,
        label_action: ta.index(),
        label_object: to.map_or(NO_OBJECT, |o| o as i64),
        metric: MetricParams::defaults_for(ta),
    })
}

/// `n` records from the `level` table built with `seed`. Record `i` uses a
/// seed derived from `(seed, i)`, so the output does not depend on thread
/// scheduling.
pub fn generate_dataset(level: TableLevel, n: usize, seed: u64) -> Result<Dataset, DatasetError> {
    let table = build_table(level, seed);
    generate_with_table(&table, n, seed)
}

pub fn generate_with_table(
    table: &DecisionTable,
    n: usize,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    let base = rng::derive_seed_str(seed, "records");
    let records = (0..n)
        .into_par_iter()
        .map(|i| generate_record(table, rng::derive_seed(base, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        level: table.level,
        seed,
        table_hash: table.hash(),
        records,
    })
}

/// Leading `n_train` records for training, the next `n_test` for testing.
pub fn split(
    d: &Dataset,
    n_train: usize,
    n_test: usize,
) -> Result<(Dataset, Dataset), DatasetError> {
    let needed = n_train + n_test;
    if d.len() < needed {
        return Err(DatasetError::TooFewRecords {
            needed,
            have: d.len(),
        });
    }
    Ok((
        d.with_records(d.records[..n_train].to_vec()),
        d.with_records(d.records[n_train..needed].to_vec()),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    level: TableLevel,
    seed: u64,
    table_hash: String,
    #[serde(rename = "G")]
    g: usize,
    #[serde(rename = "I")]
    i: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectLine {
    slot: usize,
    #[serde(rename = "type")]
    kind: ObjectType,
    pos: [i32; 3],
    jitter: [f64; 3],
    state: u8,
    on: i64,
    #[serde(rename = "in")]
    inside: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GripperLine {
    holding: i64,
    eef: [i32; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    g: Vec<f64>,
    focus: [f64; 3],
    user: usize,
    objects: Vec<ObjectLine>,
    gripper: GripperLine,
    ta: usize,
    to: i64,
    metric: MetricParams,
}

fn opt_id(o: Option<ObjectId>) -> i64 {
    o.map_or(-1, |v| v as i64)
}

fn id_opt(v: i64) -> Option<ObjectId> {
    usize::try_from(v).ok()
}

fn to_line(r: &ObservationRecord) -> RecordLine {
    RecordLine {
        g: r.gesture_vector.to_vec(),
        focus: r.focus,
        user: r.user,
        objects: r
            .scene
            .objects
            .iter()
            .map(|o| ObjectLine {
                slot: o.id,
                kind: o.kind,
                pos: [o.pos.x, o.pos.y, o.pos.z],
                jitter: o.jitter,
                state: u8::from(o.state),
                on: opt_id(o.on_top_of),
                inside: opt_id(o.inside_of),
            })
            .collect(),
        gripper: GripperLine {
            holding: opt_id(r.scene.gripper.holding),
            eef: [
                r.scene.gripper.eef_pos.x,
                r.scene.gripper.eef_pos.y,
                r.scene.gripper.eef_pos.z,
            ],
        },
        ta: r.label_action,
        to: r.label_object,
        metric: r.metric,
    }
}

fn from_line(l: RecordLine, line: usize) -> Result<ObservationRecord, DatasetError> {
    let bad = |reason: String| DatasetError::SchemaMismatch { line, reason };
    let gesture_vector: GestureVector = l.g.as_slice().try_into().map_err(|_| {
        bad(format!(
            "g has {} entries, expected {N_GESTURES}",
            l.g.len()
        ))
    })?;
    if l.ta >= ActionType::COUNT {
        return Err(bad(format!("ta {} out of range", l.ta)));
    }
    let objects = l
        .objects
        .into_iter()
        .map(|o| {
            if o.state > 1 {
                return Err(bad(format!("state {} is not 0 or 1", o.state)));
            }
            Ok(SceneObject {
                id: o.slot,
                kind: o.kind,
                pos: GridPos::new(o.pos[0], o.pos[1], o.pos[2]),
                jitter: o.jitter,
                state: o.state == 1,
                on_top_of: id_opt(o.on),
                inside_of: id_opt(o.inside),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let e = l.gripper.eef;
    let scene = Scene {
        objects,
        gripper: GripperState {
            holding: id_opt(l.gripper.holding),
            eef_pos: GridPos::new(e[0], e[1], e[2]),
        },
    };
    Ok(ObservationRecord {
        gesture_vector,
        scene,
        focus: l.focus,
        user: l.user,
        label_action: l.ta,
        label_object: l.to,
        metric: l.metric,
    })
}

/// Writes the dataset as JSON Lines: a header object, then one record per
/// line.
pub fn write_dataset<W: Write>(d: &Dataset, mut w: W) -> Result<(), DatasetError> {
    let header = Header {
        level: d.level,
        seed: d.seed,
        table_hash: d.table_hash.clone(),
        g: N_GESTURES,
        i: ActionType::COUNT,
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for r in &d.records {
        serde_json::to_writer(&mut w, &to_line(r)).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset, DatasetError> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or(DatasetError::SchemaMismatch {
        line: 1,
        reason: "empty file".into(),
    })?;
    let header: Header =
        serde_json::from_str(&first?).map_err(|e| DatasetError::SchemaMismatch {
            line: 1,
            reason: e.to_string(),
        })?;
    if header.g != N_GESTURES || header.i != ActionType::COUNT {
        return Err(DatasetError::SchemaMismatch {
            line: 1,
            reason: format!(
                "G={} I={}, expected G={N_GESTURES} I={}",
                header.g,
                header.i,
                ActionType::COUNT
            ),
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine =
            serde_json::from_str(&line).map_err(|e| DatasetError::SchemaMismatch {
                line: i + 1,
                reason: e.to_string(),
            })?;
        records.push(from_line(parsed, i + 1)?);
    }
    Ok(Dataset {
        level: header.level,
        seed: header.seed,
        table_hash: header.table_hash,
        records,
    })
}

pub fn save(d: &Dataset, path: &Path) -> Result<(), DatasetError> {
    write_dataset(d, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
    read_dataset(std::io::BufReader::new(std::fs::File::open(path)?))
}
