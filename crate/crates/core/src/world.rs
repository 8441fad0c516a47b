//! Discrete table-top world: a 4×4×4 grid holding cups, drawers and cubes,
//! plus the gripper. Scenes are immutable values; the planner produces new
//! scenes instead of mutating shared ones.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub const GRID_SIZE: i32 = 4;
pub const MAX_OBJECTS: usize = 7;
pub const JITTER_BOUND: f64 = 0.2;
/// Distance reported for empty slots; larger than any in-grid distance.
pub const MISSING_DISTANCE: f64 = 10.0;
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;

/// Object types in slot order. A scene with `n` objects holds the first `n`.
pub const LEADING_OBJECTS: [ObjectType; MAX_OBJECTS] = [
    ObjectType::Cup,
    ObjectType::Drawer,
    ObjectType::Cube,
    ObjectType::Cup,
    ObjectType::Drawer,
    ObjectType::Cube,
    ObjectType::Cup,
];

pub type ObjectId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("object placement failed after {0} attempts")]
    PlacementExhausted(usize),
    #[error("unknown object id {0}")]
    UnknownObject(ObjectId),
    #[error("object count {0} outside 1..=7")]
    BadObjectCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPos {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl GridPos {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        GridPos { x, y, z }
    }

    pub fn in_grid(&self) -> bool {
        [self.x, self.y, self.z]
            .iter()
            .all(|c| (0..GRID_SIZE).contains(c))
    }

    pub fn offset(&self, dx: i32, dy: i32, dz: i32) -> GridPos {
        GridPos::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    /// Every cell of the grid in lexicographic `(x, y, z)` order.
    pub fn all() -> impl Iterator<Item = GridPos> {
        (0..GRID_SIZE).flat_map(|x| {
            (0..GRID_SIZE).flat_map(move |y| (0..GRID_SIZE).map(move |z| GridPos::new(x, y, z)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectType {
    Cup,
    Drawer,
    Cube,
}

impl ObjectType {
    pub const ALL: [ObjectType; 3] = [ObjectType::Cup, ObjectType::Drawer, ObjectType::Cube];

    pub fn index(self) -> usize {
        match self {
            ObjectType::Cup => 0,
            ObjectType::Drawer => 1,
            ObjectType::Cube => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectType::Cup => "cup",
            ObjectType::Drawer => "drawer",
            ObjectType::Cube => "cube",
        }
    }

    pub fn parse(s: &str) -> Option<ObjectType> {
        match s {
            "cup" => Some(ObjectType::Cup),
            "drawer" => Some(ObjectType::Drawer),
            // "box" is used interchangeably with "cube".
            "cube" | "box" => Some(ObjectType::Cube),
            _ => None,
        }
    }

    pub fn graspable_type(self) -> bool {
        matches!(self, ObjectType::Cup | ObjectType::Cube)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub kind: ObjectType,
    pub pos: GridPos,
    pub jitter: [f64; 3],
    /// Drawer: open. Cup: full. Cube: always false.
    pub state: bool,
    pub on_top_of: Option<ObjectId>,
    pub inside_of: Option<ObjectId>,
}

impl SceneObject {
    pub fn center(&self) -> [f64; 3] {
        let p = self.pos.as_f64();
        [
            p[0] + self.jitter[0],
            p[1] + self.jitter[1],
            p[2] + self.jitter[2],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub holding: Option<ObjectId>,
    pub eef_pos: GridPos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub gripper: GripperState,
}

pub type FocusPoint = [f64; 3];

impl Scene {
    pub fn empty(eef_pos: GridPos) -> Scene {
        Scene {
            objects: Vec::new(),
            gripper: GripperState {
                holding: None,
                eef_pos,
            },
        }
    }

    pub fn object(&self, id: ObjectId) -> Result<&SceneObject, WorldError> {
        self.objects.get(id).ok_or(WorldError::UnknownObject(id))
    }

    pub fn object_mut(&mut self, id: ObjectId) -> Result<&mut SceneObject, WorldError> {
        self.objects
            .get_mut(id)
            .ok_or(WorldError::UnknownObject(id))
    }

    /// Object stacked directly on `id`, if any.
    pub fn object_on(&self, id: ObjectId) -> Option<ObjectId> {
        self.objects
            .iter()
            .find(|o| o.on_top_of == Some(id))
            .map(|o| o.id)
    }

    pub fn contents_of(&self, drawer: ObjectId) -> impl Iterator<Item = &SceneObject> {
        self.objects
            .iter()
            .filter(move |o| o.inside_of == Some(drawer))
    }

    pub fn is_held(&self, id: ObjectId) -> bool {
        self.gripper.holding == Some(id)
    }

    /// Objects that occupy a cell of their own: everything not inside a drawer.
    pub fn occupying(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.iter().filter(|o| o.inside_of.is_none())
    }

    pub fn cell_occupied(&self, cell: GridPos) -> bool {
        self.occupying().any(|o| o.pos == cell)
    }

    pub fn column_occupied(&self, x: i32, y: i32) -> bool {
        self.objects
            .iter()
            .any(|o| !self.is_held(o.id) && o.pos.x == x && o.pos.y == y)
    }

    /// Ground cells whose column holds nothing except possibly the held object.
    pub fn free_ground_cells(&self) -> Vec<GridPos> {
        GridPos::all()
            .filter(|c| c.z == 0 && !self.column_occupied(c.x, c.y))
            .collect()
    }
}

/// Distance from every slot's center to `focus`; empty slots report
/// [`MISSING_DISTANCE`].
pub fn distances_to_focus(scene: &Scene, focus: &FocusPoint) -> [f64; MAX_OBJECTS] {
    let mut out = [MISSING_DISTANCE; MAX_OBJECTS];
    for (slot, obj) in scene.objects.iter().enumerate().take(MAX_OBJECTS) {
        let c = obj.center();
        out[slot] =
            ((c[0] - focus[0]).powi(2) + (c[1] - focus[1]).powi(2) + (c[2] - focus[2]).powi(2))
                .sqrt();
    }
    out
}

/// A cup or cube with nothing on top that is not shut inside a closed drawer.
pub fn object_graspable(scene: &Scene, id: ObjectId) -> Result<bool, WorldError> {
    let obj = scene.object(id)?;
    if !obj.kind.graspable_type() || scene.object_on(id).is_some() {
        return Ok(false);
    }
    match obj.inside_of {
        Some(d) => Ok(scene.object(d)?.state),
        None => Ok(true),
    }
}

/// Samples a random valid scene. `n` defaults to a uniform draw from 1..=7.
pub fn sample_scene(seed: u64, n: Option<usize>) -> Result<Scene, WorldError> {
    let mut rng = rng::seeded(seed);
    let n = match n {
        Some(n) if (1..=MAX_OBJECTS).contains(&n) => n,
        Some(n) => return Err(WorldError::BadObjectCount(n)),
        None => rng.random_range(1..=MAX_OBJECTS),
    };

    let mut objects: Vec<SceneObject> = LEADING_OBJECTS[..n]
        .iter()
        .enumerate()
        .map(|(id, &kind)| SceneObject {
            id,
            kind,
            pos: GridPos::new(0, 0, 0),
            jitter: [0.0; 3],
            state: false,
            on_top_of: None,
            inside_of: None,
        })
        .collect();

    // Drawers first, then cubes, then cups.
    let mut order: Vec<ObjectId> = Vec::with_capacity(n);
    for kind in [ObjectType::Drawer, ObjectType::Cube, ObjectType::Cup] {
        order.extend(objects.iter().filter(|o| o.kind == kind).map(|o| o.id));
    }

    let mut placed: Vec<ObjectId> = Vec::with_capacity(n);
    for &id in &order {
        let kind = objects[id].kind;
        let mut attempts = 0;
        loop {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(WorldError::PlacementExhausted(attempts));
            }
            attempts += 1;
            let x = rng.random_range(0..GRID_SIZE);
            let y = rng.random_range(0..GRID_SIZE);
            let top = placed
                .iter()
                .map(|&p| &objects[p])
                .filter(|o| o.inside_of.is_none() && o.pos.x == x && o.pos.y == y)
                .max_by_key(|o| o.pos.z)
                .map(|o| (o.id, o.kind, o.pos));
            let landing = match (kind, top) {
                (_, None) => Some((GridPos::new(x, y, 0), None, None)),
                (ObjectType::Drawer, Some(_)) => None,
                (_, Some((d, ObjectType::Drawer, dpos))) => {
                    let occupied = placed.iter().any(|&p| objects[p].inside_of == Some(d));
                    (!occupied).then_some((dpos, None, Some(d)))
                }
                (_, Some((c, ObjectType::Cube, cpos))) if cpos.z + 1 < GRID_SIZE => {
                    Some((cpos.offset(0, 0, 1), Some(c), None))
                }
                _ => None,
            };
            if let Some((pos, on, inside)) = landing {
                let obj = &mut objects[id];
                obj.pos = pos;
                obj.on_top_of = on;
                obj.inside_of = inside;
                placed.push(id);
                break;
            }
        }
    }

    for obj in objects.iter_mut() {
        for j in obj.jitter.iter_mut() {
            *j = rng.random_range(-JITTER_BOUND..=JITTER_BOUND);
        }
    }
    for obj in objects.iter_mut() {
        obj.state = match obj.kind {
            ObjectType::Cube => false,
            _ => rng.random_bool(0.5),
        };
    }

    let mut scene = Scene {
        objects,
        gripper: GripperState {
            holding: None,
            eef_pos: GridPos::new(0, 0, 0),
        },
    };

    if rng.random_bool(0.5) {
        let candidates: Vec<ObjectId> = (0..n)
            .filter(|&id| object_graspable(&scene, id).unwrap_or(false))
            .collect();
        if let Some(&held) = candidates.choose(&mut rng) {
            let obj = &mut scene.objects[held];
            obj.on_top_of = None;
            obj.inside_of = None;
            scene.gripper.holding = Some(held);
        }
    }

    let free: Vec<GridPos> = GridPos::all()
        .filter(|c| {
            !scene
                .occupying()
                .any(|o| !scene.is_held(o.id) && o.pos == *c)
        })
        .collect();
    let eef = *free
        .choose(&mut rng)
        .ok_or(WorldError::PlacementExhausted(0))?;
    scene.gripper.eef_pos = eef;
    if let Some(h) = scene.gripper.holding {
        scene.objects[h].pos = eef;
    }
    Ok(scene)
}

/// Lists every violated scene invariant; empty when the scene is valid.
pub fn scene_check(scene: &Scene) -> Vec<String> {
    let mut v = Vec::new();
    let n = scene.objects.len();
    if n > MAX_OBJECTS {
        v.push("too many objects".to_string());
    }
    if !scene.gripper.eef_pos.in_grid() {
        v.push("end effector off grid".to_string());
    }
    for (slot, o) in scene.objects.iter().enumerate() {
        if o.id != slot {
            v.push(format!("object {slot} has id {}", o.id));
        }
        if slot < MAX_OBJECTS && o.kind != LEADING_OBJECTS[slot] {
            v.push(format!("object {slot} type out of slot order"));
        }
        if !o.pos.in_grid() {
            v.push(format!("object {slot} off grid"));
        }
        if o.kind == ObjectType::Drawer && o.pos.z != 0 {
            v.push("drawer off ground".to_string());
        }
        if o.jitter
            .iter()
            .any(|j| !j.is_finite() || j.abs() > JITTER_BOUND)
        {
            v.push(format!("object {slot} jitter out of range"));
        }
        if o.kind == ObjectType::Cube && o.state {
            v.push(format!("cube {slot} has state set"));
        }
        if o.on_top_of.is_some() && o.inside_of.is_some() {
            v.push(format!("object {slot} both stacked and contained"));
        }
        if let Some(b) = o.on_top_of {
            match scene.objects.get(b) {
                None => v.push(format!("object {slot} stacked on missing object")),
                Some(base) if base.kind != ObjectType::Cube => {
                    v.push(format!("object {slot} stacked on non-cube"))
                }
                Some(base) if base.pos.offset(0, 0, 1) != o.pos => {
                    v.push(format!("object {slot} not directly above its base"))
                }
                _ => {}
            }
        }
        if scene
            .objects
            .iter()
            .filter(|x| x.on_top_of == Some(slot))
            .count()
            > 1
        {
            v.push(format!("object {slot} carries more than one object"));
        }
        if let Some(d) = o.inside_of {
            match scene.objects.get(d) {
                None => v.push(format!("object {slot} inside missing object")),
                Some(dr) if dr.kind != ObjectType::Drawer => {
                    v.push(format!("object {slot} inside non-drawer"))
                }
                Some(dr) if dr.pos != o.pos => v.push(format!("object {slot} not at its drawer")),
                _ => {}
            }
            if o.kind == ObjectType::Drawer {
                v.push(format!("drawer {slot} inside another object"));
            }
        }
        let held = scene.is_held(slot);
        if o.on_top_of.is_none() && o.inside_of.is_none() && !held && o.pos.z != 0 {
            v.push(format!("object {slot} floating"));
        }
    }
    if let Some(h) = scene.gripper.holding {
        match scene.objects.get(h) {
            None => v.push("gripper holds missing object".to_string()),
            Some(o) => {
                if !o.kind.graspable_type() {
                    v.push("gripper holds a drawer".to_string());
                }
                if o.pos != scene.gripper.eef_pos {
                    v.push("held object not at end effector".to_string());
                }
                if o.on_top_of.is_some() || o.inside_of.is_some() {
                    v.push("held object still attached".to_string());
                }
                if scene.object_on(h).is_some() {
                    v.push("held object carries another object".to_string());
                }
            }
        }
    }
    // Stacking cycles.
    for o in &scene.objects {
        let mut cur = o.on_top_of;
        let mut steps = 0;
        while let Some(b) = cur {
            steps += 1;
            if steps > n {
                v.push(format!("stacking cycle through object {}", o.id));
                break;
            }
            cur = scene.objects.get(b).and_then(|x| x.on_top_of);
        }
    }
    // Cell collisions among objects that occupy their own cell.
    let occ: Vec<&SceneObject> = scene.occupying().collect();
    for (i, a) in occ.iter().enumerate() {
        for b in &occ[i + 1..] {
            if a.pos == b.pos {
                v.push(format!("objects {} and {} share a cell", a.id, b.id));
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: ObjectId, kind: ObjectType, pos: GridPos) -> SceneObject {
        SceneObject {
            id,
            kind,
            pos,
            jitter: [0.0; 3],
            state: false,
            on_top_of: None,
            inside_of: None,
        }
    }

    #[test]
    fn three_objects_follow_leading_vector() {
        for seed in 0..50 {
            let s = sample_scene(seed, Some(3)).unwrap();
            let kinds: Vec<_> = s.objects.iter().map(|o| o.kind).collect();
            assert_eq!(
                kinds,
                vec![ObjectType::Cup, ObjectType::Drawer, ObjectType::Cube]
            );
            assert!(scene_check(&s).is_empty());
        }
    }

    #[test]
    fn single_object_is_lone_cup() {
        for seed in 0..50 {
            let s = sample_scene(seed, Some(1)).unwrap();
            assert_eq!(s.objects.len(), 1);
            assert_eq!(s.objects[0].kind, ObjectType::Cup);
            assert!(s.objects[0].on_top_of.is_none() && s.objects[0].inside_of.is_none());
            assert!(scene_check(&s).is_empty());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(
            sample_scene(42, Some(7)).unwrap(),
            sample_scene(42, Some(7)).unwrap()
        );
        assert_eq!(
            sample_scene(9, None).unwrap(),
            sample_scene(9, None).unwrap()
        );
    }

    #[test]
    fn bad_count_rejected() {
        assert_eq!(sample_scene(1, Some(0)), Err(WorldError::BadObjectCount(0)));
        assert_eq!(sample_scene(1, Some(8)), Err(WorldError::BadObjectCount(8)));
    }

    #[test]
    fn focus_distances() {
        let mut s = Scene::empty(GridPos::new(3, 3, 3));
        assert_eq!(distances_to_focus(&s, &[0.0, 0.0, 0.0]), [10.0; 7]);
        s.objects
            .push(obj(0, ObjectType::Cup, GridPos::new(0, 0, 0)));
        assert_eq!(distances_to_focus(&s, &[0.0, 0.0, 0.0])[0], 0.0);
        s.objects[0].pos = GridPos::new(3, 0, 0);
        let d = distances_to_focus(&s, &[0.0, 4.0, 0.0]);
        assert!((d[0] - 5.0).abs() < 1e-12);
        assert_eq!(d[1], MISSING_DISTANCE);
    }

    #[test]
    fn graspability() {
        let mut s = Scene::empty(GridPos::new(3, 3, 3));
        s.objects
            .push(obj(0, ObjectType::Cup, GridPos::new(1, 1, 0)));
        s.objects
            .push(obj(1, ObjectType::Drawer, GridPos::new(1, 1, 0)));
        s.objects
            .push(obj(2, ObjectType::Cube, GridPos::new(2, 2, 0)));
        s.objects[0].inside_of = Some(1);
        assert!(object_graspable(&s, 2).unwrap());
        assert!(!object_graspable(&s, 0).unwrap());
        s.objects[1].state = true;
        assert!(object_graspable(&s, 0).unwrap());
        assert!(!object_graspable(&s, 1).unwrap());
        assert_eq!(object_graspable(&s, 5), Err(WorldError::UnknownObject(5)));
        assert!(scene_check(&s).is_empty(), "{:?}", scene_check(&s));
    }

    #[test]
    fn stacked_cube_is_not_graspable() {
        // Every stacking relation over {cup, drawer, cube}: only the cube can
        // carry something and only the cup can be carried by it here.
        let mut s = Scene::empty(GridPos::new(3, 3, 3));
        s.objects
            .push(obj(0, ObjectType::Cup, GridPos::new(0, 0, 1)));
        s.objects
            .push(obj(1, ObjectType::Drawer, GridPos::new(2, 0, 0)));
        s.objects
            .push(obj(2, ObjectType::Cube, GridPos::new(0, 0, 0)));
        s.objects[0].on_top_of = Some(2);
        assert!(scene_check(&s).is_empty(), "{:?}", scene_check(&s));
        assert!(!object_graspable(&s, 2).unwrap());
        assert!(object_graspable(&s, 0).unwrap());
    }

    #[test]
    fn check_flags_raised_drawer() {
        let mut s = Scene::empty(GridPos::new(3, 3, 3));
        s.objects
            .push(obj(0, ObjectType::Cup, GridPos::new(0, 0, 0)));
        s.objects
            .push(obj(1, ObjectType::Drawer, GridPos::new(1, 1, 0)));
        s.objects[1].pos.z = 2;
        let v = scene_check(&s);
        assert!(v.contains(&"drawer off ground".to_string()), "{v:?}");
    }

    #[test]
    fn check_flags_shared_cell_once() {
        let mut s = Scene::empty(GridPos::new(3, 3, 3));
        s.objects
            .push(obj(0, ObjectType::Cup, GridPos::new(1, 2, 0)));
        s.objects
            .push(obj(1, ObjectType::Drawer, GridPos::new(1, 2, 0)));
        assert_eq!(scene_check(&s).len(), 1);
    }

    #[test]
    fn free_ground_cells_skip_columns() {
        let mut s = Scene::empty(GridPos::new(3, 3, 3));
        assert_eq!(s.free_ground_cells().len(), 16);
        s.objects
            .push(obj(0, ObjectType::Cup, GridPos::new(1, 2, 0)));
        assert_eq!(s.free_ground_cells().len(), 15);
    }
}
