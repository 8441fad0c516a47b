//! Primitive step semantics on the grid world.

use crate::world::{GridPos, ObjectType, Scene};

use super::bt::{ActionStep, Plan, ReleaseTarget};
use super::ActionError;

/// Cell the gripper approaches an object from: directly above it.
pub fn approach_cell(pos: GridPos) -> GridPos {
    pos.offset(0, 0, 1)
}

/// Cell the gripper grasps an object from. Objects inside a drawer are
/// lifted out from above; everything else is grasped in place.
pub fn grasp_cell(scene: &Scene, id: crate::world::ObjectId) -> Option<GridPos> {
    let o = scene.objects.get(id)?;
    Some(if o.inside_of.is_some() {
        approach_cell(o.pos)
    } else {
        o.pos
    })
}

/// Applies one primitive, returning the successor scene or the reason the
/// primitive's own preconditions fail.
pub fn apply_step(scene: &Scene, step: &ActionStep) -> Result<Scene, String> {
    let mut s = scene.clone();
    match *step {
        ActionStep::OpenDrawer { target } | ActionStep::CloseDrawer { target } => {
            let opening = matches!(step, ActionStep::OpenDrawer { .. });
            let d = s.object_mut(target).map_err(|e| e.to_string())?;
            if d.kind != ObjectType::Drawer {
                return Err(format!("object {target} is not a drawer"));
            }
            if d.state == opening {
                return Err(format!(
                    "drawer {target} already {}",
                    if opening { "open" } else { "closed" }
                ));
            }
            d.state = opening;
        }
        ActionStep::Grasp { target } => {
            if s.gripper.holding.is_some() {
                return Err("gripper not empty".into());
            }
            if !crate::world::object_graspable(&s, target).map_err(|e| e.to_string())? {
                return Err(format!("object {target} not graspable"));
            }
            if grasp_cell(&s, target) != Some(s.gripper.eef_pos) {
                return Err("end effector not at object".into());
            }
            let eef = s.gripper.eef_pos;
            let o = &mut s.objects[target];
            o.pos = eef;
            o.on_top_of = None;
            o.inside_of = None;
            s.gripper.holding = Some(target);
        }
        ActionStep::MoveEef { pos } => {
            if !pos.in_grid() {
                return Err("destination off grid".into());
            }
            if let Some(h) = s.gripper.holding {
                if s.occupying().any(|o| o.id != h && o.pos == pos) {
                    return Err("held object would collide".into());
                }
                s.objects[h].pos = pos;
            }
            s.gripper.eef_pos = pos;
        }
        ActionStep::ReleaseAt { place } => {
            let h = s.gripper.holding.ok_or("gripper empty")?;
            match place {
                ReleaseTarget::Into(d) => {
                    let dr = s.object(d).map_err(|e| e.to_string())?;
                    if dr.kind != ObjectType::Drawer || !dr.state {
                        return Err(format!("object {d} is not an open drawer"));
                    }
                    if s.gripper.eef_pos != approach_cell(dr.pos) {
                        return Err("end effector not above drawer".into());
                    }
                    let dpos = dr.pos;
                    let o = &mut s.objects[h];
                    o.pos = dpos;
                    o.inside_of = Some(d);
                }
                ReleaseTarget::Onto(c) => {
                    let base = s.object(c).map_err(|e| e.to_string())?;
                    if base.kind != ObjectType::Cube || c == h || base.inside_of.is_some() {
                        return Err(format!("object {c} cannot carry objects"));
                    }
                    if s.object_on(c).is_some() {
                        return Err(format!("object {c} already carries an object"));
                    }
                    let above = approach_cell(base.pos);
                    if !above.in_grid() || s.gripper.eef_pos != above {
                        return Err("end effector not above cube".into());
                    }
                    let o = &mut s.objects[h];
                    o.pos = above;
                    o.on_top_of = Some(c);
                }
                ReleaseTarget::Cell(cell) => {
                    if cell.z != 0 || !cell.in_grid() || s.column_occupied(cell.x, cell.y) {
                        return Err("cell not free".into());
                    }
                    if s.gripper.eef_pos != cell {
                        return Err("end effector not at cell".into());
                    }
                    s.objects[h].pos = cell;
                }
            }
            s.gripper.holding = None;
        }
        ActionStep::RotateHeld { angle_deg, target } => {
            if !(angle_deg > 0.0 && angle_deg <= 180.0) {
                return Err("angle out of range".into());
            }
            let h = s.gripper.holding.ok_or("gripper empty")?;
            if s.objects[h].kind != ObjectType::Cup || !s.objects[h].state {
                return Err("held object is not a full cup".into());
            }
            let t = s.object(target).map_err(|e| e.to_string())?;
            if t.kind != ObjectType::Cup || target == h {
                return Err(format!("object {target} cannot receive liquid"));
            }
            if s.gripper.eef_pos != approach_cell(t.pos) {
                return Err("end effector not above target".into());
            }
            s.objects[h].state = false;
            s.objects[target].state = true;
        }
    }
    Ok(s)
}

/// Runs every step of `plan` in order.
pub fn execute(scene: &Scene, plan: &Plan) -> Result<Scene, ActionError> {
    let mut cur = scene.clone();
    for (index, step) in plan.steps.iter().enumerate() {
        cur = apply_step(&cur, step).map_err(|reason| ActionError::ExecutionFault {
            index,
            step: step.to_string(),
            reason,
        })?;
    }
    Ok(cur)
}
