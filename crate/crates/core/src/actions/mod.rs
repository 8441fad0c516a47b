//! Intent-level actions: schemas with preconditions, the set of valid intents
//! for a scene, and the intent postconditions the planner must reach.
//!
//! Planning lives in [`bt`], primitive execution in [`exec`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{
    object_graspable, FocusPoint, GridPos, ObjectId, ObjectType, Scene, WorldError,
};

pub mod bt;
pub mod exec;

pub use bt::{opened_drawer, plan, plannable_intents, ActionStep, Plan, ReleaseTarget};
pub use exec::{apply_step, execute};

pub const DEFAULT_POUR_ANGLE: f64 = 90.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("unplannable intent: {0}")]
    Unplannable(String),
    #[error("step {index} ({step}) failed: {reason}")]
    ExecutionFault {
        index: usize,
        step: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    PutInto,
    PutOnTarget,
    Place,
    Pour,
    PickUp,
    Open,
    Close,
    MoveRight,
    MoveLeft,
    MoveUp,
    MoveDown,
}

impl ActionType {
    pub const COUNT: usize = 11;
    pub const ALL: [ActionType; 11] = [
        ActionType::PutInto,
        ActionType::PutOnTarget,
        ActionType::Place,
        ActionType::Pour,
        ActionType::PickUp,
        ActionType::Open,
        ActionType::Close,
        ActionType::MoveRight,
        ActionType::MoveLeft,
        ActionType::MoveUp,
        ActionType::MoveDown,
    ];

    pub fn index(self) -> usize {
        ActionType::ALL
            .iter()
            .position(|&a| a == self)
            .expect("listed")
    }

    pub fn from_index(i: usize) -> Option<ActionType> {
        ActionType::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionType::PutInto => "put_into",
            ActionType::PutOnTarget => "put_on_target",
            ActionType::Place => "place",
            ActionType::Pour => "pour",
            ActionType::PickUp => "pick_up",
            ActionType::Open => "open",
            ActionType::Close => "close",
            ActionType::MoveRight => "move_right",
            ActionType::MoveLeft => "move_left",
            ActionType::MoveUp => "move_up",
            ActionType::MoveDown => "move_down",
        }
    }

    /// Whether the intent names a target object. `place` and the moves don't.
    pub fn requires_object(self) -> bool {
        !matches!(
            self,
            ActionType::Place
                | ActionType::MoveRight
                | ActionType::MoveLeft
                | ActionType::MoveUp
                | ActionType::MoveDown
        )
    }

    /// End-effector displacement of a move action.
    pub fn move_delta(self) -> Option<(i32, i32, i32)> {
        match self {
            ActionType::MoveRight => Some((1, 0, 0)),
            ActionType::MoveLeft => Some((-1, 0, 0)),
            ActionType::MoveUp => Some((0, 0, 1)),
            ActionType::MoveDown => Some((0, 0, -1)),
            _ => None,
        }
    }

    /// Object types the action can ever target, regardless of state.
    pub fn compatible_type(self, kind: ObjectType) -> bool {
        match self {
            ActionType::PutInto | ActionType::Open | ActionType::Close => {
                kind == ObjectType::Drawer
            }
            ActionType::PutOnTarget => kind == ObjectType::Cube,
            ActionType::Pour => kind == ObjectType::Cup,
            ActionType::PickUp => kind.graspable_type(),
            _ => false,
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Metric parameters of an intent. Only `pour` carries one (its angle).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
}

impl MetricParams {
    pub fn defaults_for(ta: ActionType) -> MetricParams {
        match ta {
            ActionType::Pour => MetricParams {
                angle_deg: Some(DEFAULT_POUR_ANGLE),
            },
            _ => MetricParams::default(),
        }
    }

    pub fn is_valid_for(&self, ta: ActionType) -> bool {
        match (ta, self.angle_deg) {
            (ActionType::Pour, Some(a)) => a > 0.0 && a <= 180.0,
            (ActionType::Pour, None) => false,
            (_, a) => a.is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub action: ActionType,
    pub object: Option<ObjectId>,
    pub metric: MetricParams,
    /// Where the user looked; `place` drops at the free cell nearest to it.
    pub focus: Option<FocusPoint>,
}

impl Intent {
    pub fn new(action: ActionType, object: Option<ObjectId>) -> Intent {
        Intent {
            action,
            object,
            metric: MetricParams::defaults_for(action),
            focus: None,
        }
    }

    pub fn with_focus(mut self, focus: FocusPoint) -> Intent {
        self.focus = Some(focus);
        self
    }
}

/// A single precondition of an action schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    TargetGiven,
    NoTargetExpected,
    TargetIsDrawer,
    TargetIsCube,
    TargetIsCup,
    TargetIsGraspableType,
    DrawerOpen,
    DrawerClosed,
    GripperHolding,
    GripperEmpty,
    HoldingFullCup,
    TargetNotHeld,
    NothingOnTarget,
    TargetNotContained,
    TargetReachable,
    SpaceAboveTarget,
    TargetGraspable,
    FreeCellAvailable,
    DestinationInGrid,
    DestinationClear,
}

impl Condition {
    pub fn describe(self) -> &'static str {
        match self {
            Condition::TargetGiven => "target object given",
            Condition::NoTargetExpected => "no target object expected",
            Condition::TargetIsDrawer => "target is a drawer",
            Condition::TargetIsCube => "target is a cube",
            Condition::TargetIsCup => "target is a cup",
            Condition::TargetIsGraspableType => "target is a cup or cube",
            Condition::DrawerOpen => "drawer open",
            Condition::DrawerClosed => "drawer closed",
            Condition::GripperHolding => "gripper holding",
            Condition::GripperEmpty => "gripper empty",
            Condition::HoldingFullCup => "gripper holds a full cup",
            Condition::TargetNotHeld => "target not held",
            Condition::NothingOnTarget => "nothing on target",
            Condition::TargetNotContained => "target not inside a drawer",
            Condition::TargetReachable => "target not inside a closed drawer",
            Condition::SpaceAboveTarget => "free grid cell above target",
            Condition::TargetGraspable => "target graspable",
            Condition::FreeCellAvailable => "free cell available",
            Condition::DestinationInGrid => "destination in grid",
            Condition::DestinationClear => "destination clear",
        }
    }

    /// Evaluates the condition for `(ta, to)` on `scene`.
    pub fn holds(
        self,
        ta: ActionType,
        to: Option<ObjectId>,
        scene: &Scene,
    ) -> Result<bool, WorldError> {
        let target = match to {
            Some(id) => Some(scene.object(id)?),
            None => None,
        };
        let held = scene.gripper.holding.map(|h| scene.object(h)).transpose()?;
        let t = || target.expect("target checked by TargetGiven");
        Ok(match self {
            Condition::TargetGiven => target.is_some(),
            Condition::NoTargetExpected => target.is_none(),
            Condition::TargetIsDrawer => t().kind == ObjectType::Drawer,
            Condition::TargetIsCube => t().kind == ObjectType::Cube,
            Condition::TargetIsCup => t().kind == ObjectType::Cup,
            Condition::TargetIsGraspableType => t().kind.graspable_type(),
            Condition::DrawerOpen => t().state,
            Condition::DrawerClosed => !t().state,
            Condition::GripperHolding => held.is_some(),
            Condition::GripperEmpty => held.is_none(),
            Condition::HoldingFullCup => held.is_some_and(|h| h.kind == ObjectType::Cup && h.state),
            Condition::TargetNotHeld => !scene.is_held(t().id),
            Condition::NothingOnTarget => scene.object_on(t().id).is_none(),
            Condition::TargetNotContained => t().inside_of.is_none(),
            Condition::TargetReachable => match t().inside_of {
                Some(d) => scene.object(d)?.state,
                None => true,
            },
            Condition::SpaceAboveTarget => t().pos.offset(0, 0, 1).in_grid(),
            Condition::TargetGraspable => object_graspable(scene, t().id)?,
            Condition::FreeCellAvailable => !scene.free_ground_cells().is_empty(),
            Condition::DestinationInGrid => {
                move_destination(ta, scene).is_some_and(|p| p.in_grid())
            }
            Condition::DestinationClear => match (move_destination(ta, scene), held) {
                (Some(p), Some(h)) => !scene.occupying().any(|o| o.id != h.id && o.pos == p),
                _ => true,
            },
        })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

pub(crate) fn move_destination(ta: ActionType, scene: &Scene) -> Option<GridPos> {
    ta.move_delta()
        .map(|(dx, dy, dz)| scene.gripper.eef_pos.offset(dx, dy, dz))
}

/// The condition table of every action, in evaluation order. Later entries
/// may assume earlier type checks passed.
pub fn schema(ta: ActionType) -> &'static [Condition] {
    use Condition::*;
    match ta {
        ActionType::PutInto => &[TargetGiven, TargetIsDrawer, DrawerOpen, GripperHolding],
        ActionType::PutOnTarget => &[
            TargetGiven,
            TargetIsCube,
            GripperHolding,
            TargetNotHeld,
            NothingOnTarget,
            TargetNotContained,
            SpaceAboveTarget,
        ],
        ActionType::Place => &[NoTargetExpected, GripperHolding, FreeCellAvailable],
        ActionType::Pour => &[
            TargetGiven,
            TargetIsCup,
            HoldingFullCup,
            TargetNotHeld,
            TargetReachable,
            SpaceAboveTarget,
        ],
        ActionType::PickUp => &[
            TargetGiven,
            TargetIsGraspableType,
            GripperEmpty,
            TargetGraspable,
        ],
        ActionType::Open => &[TargetGiven, TargetIsDrawer, DrawerClosed],
        ActionType::Close => &[TargetGiven, TargetIsDrawer, DrawerOpen],
        ActionType::MoveRight
        | ActionType::MoveLeft
        | ActionType::MoveUp
        | ActionType::MoveDown => &[NoTargetExpected, DestinationInGrid, DestinationClear],
    }
}

/// Unsatisfied preconditions of `(ta, to)`. Empty iff the intent is directly
/// executable in `scene`. A failed type check short-circuits the
/// state checks that depend on it.
pub fn preconditions(
    ta: ActionType,
    to: Option<ObjectId>,
    scene: &Scene,
) -> Result<Vec<Condition>, ActionError> {
    if let Some(id) = to {
        scene.object(id)?;
    }
    let mut unmet = Vec::new();
    for &c in schema(ta) {
        if !c.holds(ta, to, scene)? {
            unmet.push(c);
            if matches!(
                c,
                Condition::TargetGiven
                    | Condition::NoTargetExpected
                    | Condition::TargetIsDrawer
                    | Condition::TargetIsCube
                    | Condition::TargetIsCup
                    | Condition::TargetIsGraspableType
                    | Condition::DestinationInGrid
            ) {
                break;
            }
        }
    }
    Ok(unmet)
}

pub type IntentKey = (ActionType, Option<ObjectId>);

/// Every `(action, object)` pair whose preconditions all hold.
pub fn valid_intents(scene: &Scene) -> BTreeSet<IntentKey> {
    let mut out = BTreeSet::new();
    for ta in ActionType::ALL {
        let candidates: Vec<Option<ObjectId>> = if ta.requires_object() {
            (0..scene.objects.len()).map(Some).collect()
        } else {
            vec![None]
        };
        for to in candidates {
            if preconditions(ta, to, scene)
                .map(|u| u.is_empty())
                .unwrap_or(false)
            {
                out.insert((ta, to));
            }
        }
    }
    out
}

/// Free ground cell nearest to `focus`; ties go to the lexicographically
/// smallest cell.
pub fn place_cell(scene: &Scene, focus: Option<&FocusPoint>) -> Option<GridPos> {
    let f = focus
        .copied()
        .unwrap_or_else(|| scene.gripper.eef_pos.as_f64());
    let mut best: Option<(f64, GridPos)> = None;
    for c in scene.free_ground_cells() {
        let p = c.as_f64();
        let d = (p[0] - f[0]).powi(2) + (p[1] - f[1]).powi(2) + (p[2] - f[2]).powi(2);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Whether `after` realizes `intent` relative to `before`.
pub fn postcondition_holds(intent: &Intent, before: &Scene, after: &Scene) -> bool {
    let held_before = before.gripper.holding;
    let obj = |s: &Scene, id: Option<ObjectId>| id.and_then(|i| s.objects.get(i).cloned());
    match intent.action {
        ActionType::PutInto => match (held_before, intent.object) {
            (Some(h), Some(d)) => {
                after.gripper.holding.is_none()
                    && obj(after, Some(h)).is_some_and(|o| o.inside_of == Some(d))
            }
            _ => false,
        },
        ActionType::PutOnTarget => match (held_before, intent.object) {
            (Some(h), Some(c)) => {
                after.gripper.holding.is_none()
                    && obj(after, Some(h)).is_some_and(|o| o.on_top_of == Some(c))
            }
            _ => false,
        },
        ActionType::Place => match (held_before, place_cell(before, intent.focus.as_ref())) {
            (Some(h), Some(cell)) => {
                after.gripper.holding.is_none()
                    && obj(after, Some(h)).is_some_and(|o| {
                        o.pos == cell && o.on_top_of.is_none() && o.inside_of.is_none()
                    })
            }
            _ => false,
        },
        ActionType::Pour => match (held_before, intent.object) {
            (Some(h), Some(c)) => {
                obj(after, Some(h)).is_some_and(|o| !o.state)
                    && obj(after, Some(c)).is_some_and(|o| o.state)
            }
            _ => false,
        },
        ActionType::PickUp => intent.object.is_some() && after.gripper.holding == intent.object,
        ActionType::Open => {
            obj(after, intent.object).is_some_and(|o| o.kind == ObjectType::Drawer && o.state)
        }
        ActionType::Close => {
            obj(after, intent.object).is_some_and(|o| o.kind == ObjectType::Drawer && !o.state)
        }
        ActionType::MoveRight
        | ActionType::MoveLeft
        | ActionType::MoveUp
        | ActionType::MoveDown => {
            move_destination(intent.action, before) == Some(after.gripper.eef_pos)
        }
    }
}
