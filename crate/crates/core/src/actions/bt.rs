//! Behavior-tree expansion of an intent into primitive steps.
//!
//! Each action type owns a static tree of sequence/fallback nodes. Planning
//! ticks the tree once against a simulated copy of the scene: conditions are
//! re-evaluated on the evolving state, and every executed leaf appends its
//! concrete primitive to the plan. Fallback nodes carry the recovery steps
//! (e.g. opening a closed drawer before putting something into it).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::{GridPos, ObjectId, Scene};

use super::exec::{apply_step, approach_cell, grasp_cell};
use super::{
    place_cell, postcondition_holds, ActionError, ActionType, Condition, Intent, IntentKey,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReleaseTarget {
    Into(ObjectId),
    Onto(ObjectId),
    Cell(GridPos),
}

/// One robot primitive. Serialized as `{"primitive": …, "args": {…}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "primitive", content = "args", rename_all = "snake_case")]
pub enum ActionStep {
    OpenDrawer { target: ObjectId },
    CloseDrawer { target: ObjectId },
    Grasp { target: ObjectId },
    ReleaseAt { place: ReleaseTarget },
    MoveEef { pos: GridPos },
    RotateHeld { angle_deg: f64, target: ObjectId },
}

impl ActionStep {
    pub fn primitive(&self) -> &'static str {
        match self {
            ActionStep::OpenDrawer { .. } => "open_drawer",
            ActionStep::CloseDrawer { .. } => "close_drawer",
            ActionStep::Grasp { .. } => "grasp",
            ActionStep::ReleaseAt { .. } => "release_at",
            ActionStep::MoveEef { .. } => "move_eef",
            ActionStep::RotateHeld { .. } => "rotate_held",
        }
    }
}

impl fmt::Display for ActionStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionStep::OpenDrawer { target } => write!(f, "open_drawer({target})"),
            ActionStep::CloseDrawer { target } => write!(f, "close_drawer({target})"),
            ActionStep::Grasp { target } => write!(f, "grasp({target})"),
            ActionStep::ReleaseAt {
                place: ReleaseTarget::Into(d),
            } => write!(f, "release_at(into {d})"),
            ActionStep::ReleaseAt {
                place: ReleaseTarget::Onto(c),
            } => write!(f, "release_at(onto {c})"),
            ActionStep::ReleaseAt {
                place: ReleaseTarget::Cell(p),
            } => write!(f, "release_at({},{},{})", p.x, p.y, p.z),
            ActionStep::MoveEef { pos } => write!(f, "move_eef({},{},{})", pos.x, pos.y, pos.z),
            ActionStep::RotateHeld { angle_deg, target } => {
                write!(f, "rotate_held({angle_deg}, {target})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub intent: Intent,
    pub steps: Vec<ActionStep>,
}

/// Leaf actions; each resolves to a concrete step on the current state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Leaf {
    OpenTarget,
    CloseTarget,
    OpenContainer,
    MoveAboveTarget,
    MoveToTarget,
    MoveToPlaceCell,
    ReleaseInto,
    ReleaseOnto,
    ReleaseAtPlaceCell,
    Retreat,
    Grasp,
    Pour,
    Shift,
}

#[derive(Debug, Clone)]
enum Node {
    Sequence(Vec<Node>),
    Fallback(Vec<Node>),
    Check(Condition),
    Do(Leaf),
}

use Condition as C;
use Leaf as L;
use Node::{Check, Do, Fallback, Sequence};

fn tree(ta: ActionType) -> Node {
    match ta {
        ActionType::PutInto => Sequence(vec![
            Check(C::GripperHolding),
            Fallback(vec![Check(C::DrawerOpen), Do(L::OpenTarget)]),
            Do(L::MoveAboveTarget),
            Do(L::ReleaseInto),
            Do(L::Retreat),
        ]),
        ActionType::PutOnTarget => Sequence(vec![
            Check(C::GripperHolding),
            Check(C::TargetNotHeld),
            Check(C::NothingOnTarget),
            Check(C::TargetNotContained),
            Check(C::SpaceAboveTarget),
            Do(L::MoveAboveTarget),
            Do(L::ReleaseOnto),
            Do(L::Retreat),
        ]),
        ActionType::Place => Sequence(vec![
            Check(C::GripperHolding),
            Check(C::FreeCellAvailable),
            Do(L::MoveToPlaceCell),
            Do(L::ReleaseAtPlaceCell),
            Do(L::Retreat),
        ]),
        ActionType::Pour => Sequence(vec![
            Check(C::HoldingFullCup),
            Check(C::TargetNotHeld),
            Check(C::TargetReachable),
            Check(C::SpaceAboveTarget),
            Do(L::MoveAboveTarget),
            Do(L::Pour),
        ]),
        ActionType::PickUp => Sequence(vec![
            Check(C::GripperEmpty),
            Check(C::NothingOnTarget),
            Fallback(vec![Check(C::TargetReachable), Do(L::OpenContainer)]),
            Do(L::MoveToTarget),
            Do(L::Grasp),
        ]),
        ActionType::Open => Sequence(vec![Check(C::DrawerClosed), Do(L::OpenTarget)]),
        ActionType::Close => Sequence(vec![Check(C::DrawerOpen), Do(L::CloseTarget)]),
        ActionType::MoveRight
        | ActionType::MoveLeft
        | ActionType::MoveUp
        | ActionType::MoveDown => Sequence(vec![
            Check(C::DestinationInGrid),
            Check(C::DestinationClear),
            Do(L::Shift),
        ]),
    }
}

struct Ticker<'a> {
    intent: &'a Intent,
    /// Resolved once on the initial scene so later ticks agree on the cell.
    place: Option<GridPos>,
    scene: Scene,
    steps: Vec<ActionStep>,
    failure: Option<String>,
}

impl Ticker<'_> {
    fn tick(&mut self, node: &Node) -> bool {
        match node {
            Sequence(children) => children.iter().all(|c| self.tick(c)),
            Fallback(children) => {
                // A fallback succeeds on its first succeeding child; earlier
                // failures are recoverable and must not be reported.
                let saved = self.failure.clone();
                let ok = children.iter().any(|c| self.tick(c));
                if ok {
                    self.failure = saved;
                }
                ok
            }
            Check(c) => match c.holds(self.intent.action, self.intent.object, &self.scene) {
                Ok(true) => true,
                Ok(false) => {
                    self.failure = Some(format!("condition failed: {c}"));
                    false
                }
                Err(e) => {
                    self.failure = Some(e.to_string());
                    false
                }
            },
            Do(leaf) => {
                let step = match self.resolve(*leaf) {
                    Some(Some(s)) => s,
                    // Nothing to do, e.g. a retreat from the top layer.
                    Some(None) => return true,
                    None => {
                        self.failure = Some(format!("cannot instantiate {leaf:?}"));
                        return false;
                    }
                };
                match apply_step(&self.scene, &step) {
                    Ok(next) => {
                        self.scene = next;
                        self.steps.push(step);
                        true
                    }
                    Err(e) => {
                        self.failure = Some(format!("{step}: {e}"));
                        false
                    }
                }
            }
        }
    }

    fn resolve(&self, leaf: Leaf) -> Option<Option<ActionStep>> {
        let target = self.intent.object;
        let tpos = || {
            target
                .and_then(|t| self.scene.objects.get(t))
                .map(|o| o.pos)
        };
        let step = match leaf {
            L::OpenTarget => ActionStep::OpenDrawer { target: target? },
            L::CloseTarget => ActionStep::CloseDrawer { target: target? },
            L::OpenContainer => {
                let d = self.scene.objects.get(target?)?.inside_of?;
                ActionStep::OpenDrawer { target: d }
            }
            L::MoveAboveTarget => ActionStep::MoveEef {
                pos: approach_cell(tpos()?),
            },
            L::MoveToTarget => ActionStep::MoveEef {
                pos: grasp_cell(&self.scene, target?)?,
            },
            L::MoveToPlaceCell => ActionStep::MoveEef { pos: self.place? },
            L::ReleaseInto => ActionStep::ReleaseAt {
                place: ReleaseTarget::Into(target?),
            },
            L::ReleaseOnto => ActionStep::ReleaseAt {
                place: ReleaseTarget::Onto(target?),
            },
            L::ReleaseAtPlaceCell => ActionStep::ReleaseAt {
                place: ReleaseTarget::Cell(self.place?),
            },
            L::Retreat => {
                let up = self.scene.gripper.eef_pos.offset(0, 0, 1);
                if !up.in_grid() {
                    return Some(None);
                }
                ActionStep::MoveEef { pos: up }
            }
            L::Grasp => ActionStep::Grasp { target: target? },
            L::Pour => ActionStep::RotateHeld {
                angle_deg: self
                    .intent
                    .metric
                    .angle_deg
                    .unwrap_or(super::DEFAULT_POUR_ANGLE),
                target: target?,
            },
            L::Shift => {
                let (dx, dy, dz) = self.intent.action.move_delta()?;
                ActionStep::MoveEef {
                    pos: self.scene.gripper.eef_pos.offset(dx, dy, dz),
                }
            }
        };
        Some(Some(step))
    }
}

/// Expands `intent` into a primitive plan for `scene`.
///
/// Fails with [`ActionError::Unplannable`] when the target type does not fit
/// the action, when a precondition fails that no fallback can recover, or
/// when the intent's postcondition already holds.
pub fn plan(intent: &Intent, scene: &Scene) -> Result<Plan, ActionError> {
    let ta = intent.action;
    match (ta.requires_object(), intent.object) {
        (true, None) => {
            return Err(ActionError::Unplannable(format!(
                "{ta} needs a target object"
            )))
        }
        (false, Some(o)) => {
            return Err(ActionError::Unplannable(format!(
                "{ta} takes no target (got {o})"
            )))
        }
        (true, Some(o)) => {
            let kind = scene.object(o)?.kind;
            if !ta.compatible_type(kind) {
                return Err(ActionError::Unplannable(format!(
                    "{ta} cannot target a {}",
                    kind.name()
                )));
            }
        }
        (false, None) => {}
    }
    if ta == ActionType::Pour && !intent.metric.is_valid_for(ta) {
        return Err(ActionError::Unplannable("pour angle out of range".into()));
    }
    if postcondition_holds(intent, scene, scene) {
        return Err(ActionError::Unplannable(format!("{ta} already satisfied")));
    }

    let mut ticker = Ticker {
        intent,
        place: (ta == ActionType::Place)
            .then(|| place_cell(scene, intent.focus.as_ref()))
            .flatten(),
        scene: scene.clone(),
        steps: Vec::new(),
        failure: None,
    };
    if !ticker.tick(&tree(ta)) {
        return Err(ActionError::Unplannable(
            ticker.failure.unwrap_or_else(|| "tree failed".into()),
        ));
    }
    if ticker.steps.is_empty() || !postcondition_holds(intent, scene, &ticker.scene) {
        return Err(ActionError::Unplannable(format!(
            "{ta} plan misses its goal"
        )));
    }
    Ok(Plan {
        intent: intent.clone(),
        steps: ticker.steps,
    })
}

/// Every `(action, object)` pair the planner accepts, including those that
/// need a recovery step first (a closed drawer to open). A superset of
/// [`super::valid_intents`].
pub fn plannable_intents(scene: &Scene) -> BTreeSet<IntentKey> {
    let mut out = BTreeSet::new();
    for ta in ActionType::ALL {
        let targets: Vec<Option<ObjectId>> = if ta.requires_object() {
            (0..scene.objects.len()).map(Some).collect()
        } else {
            vec![None]
        };
        for to in targets {
            if plan(&Intent::new(ta, to), scene).is_ok() {
                out.insert((ta, to));
            }
        }
    }
    out
}

/// The drawer a plan opened on the way, if it had to recover one.
pub fn opened_drawer(plan: &Plan) -> Option<ObjectId> {
    plan.steps.iter().find_map(|s| match s {
        ActionStep::OpenDrawer { target } if plan.intent.action != ActionType::Open => {
            Some(*target)
        }
        _ => None,
    })
}
