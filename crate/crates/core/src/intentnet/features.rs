//! Input encodings of the five model variants.

use serde::{Deserialize, Serialize};

use crate::datasetgen::ObservationRecord;
use crate::gestures::N_GESTURES;
use crate::usersim::{UserId, N_USERS};
use crate::world::{
    distances_to_focus, FocusPoint, ObjectType, Scene, MAX_OBJECTS, MISSING_DISTANCE,
};

pub const HIDDEN_WIDTH: usize = 25;

/// Which context blocks a model sees besides the gesture vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Gestures only.
    M1,
    /// Gestures and object distances to the focus point.
    M2,
    /// Gestures and user.
    M3,
    /// Gestures, distances and user.
    M4,
    /// Everything, including per-slot object state and type.
    M5,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::M1,
        ModelVariant::M2,
        ModelVariant::M3,
        ModelVariant::M4,
        ModelVariant::M5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::M1 => "M1",
            ModelVariant::M2 => "M2",
            ModelVariant::M3 => "M3",
            ModelVariant::M4 => "M4",
            ModelVariant::M5 => "M5",
        }
    }

    pub fn parse(s: &str) -> Option<ModelVariant> {
        ModelVariant::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }

    pub fn uses_distances(self) -> bool {
        matches!(self, ModelVariant::M2 | ModelVariant::M4 | ModelVariant::M5)
    }

    pub fn uses_user(self) -> bool {
        matches!(self, ModelVariant::M3 | ModelVariant::M4 | ModelVariant::M5)
    }

    pub fn uses_scene(self) -> bool {
        self == ModelVariant::M5
    }

    pub fn input_width(self) -> usize {
        let mut w = N_GESTURES;
        if self.uses_distances() {
            w += MAX_OBJECTS;
        }
        if self.uses_user() {
            w += N_USERS;
        }
        if self.uses_scene() {
            w += MAX_OBJECTS + MAX_OBJECTS * ObjectType::ALL.len();
        }
        w
    }

    pub fn hidden(self) -> Vec<usize> {
        if self == ModelVariant::M1 {
            vec![HIDDEN_WIDTH]
        } else {
            vec![HIDDEN_WIDTH, HIDDEN_WIDTH]
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Encodes one observation. Blocks, in order: gesture vector, focus
/// distances divided by 10, user one-hot, per-slot state bits, per-slot type
/// one-hot. Empty slots read as distance 1 and all-zero state and type.
pub fn encode(
    variant: ModelVariant,
    gesture: &[f64],
    scene: &Scene,
    focus: &FocusPoint,
    user: UserId,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(variant.input_width());
    x.extend_from_slice(gesture);
    if variant.uses_distances() {
        x.extend(
            distances_to_focus(scene, focus)
                .iter()
                .map(|d| d / MISSING_DISTANCE),
        );
    }
    if variant.uses_user() {
        x.extend((0..N_USERS).map(|u| if u == user { 1.0 } else { 0.0 }));
    }
    if variant.uses_scene() {
        let mut states = [0.0; MAX_OBJECTS];
        let mut types = [0.0; MAX_OBJECTS * 3];
        for (slot, o) in scene.objects.iter().enumerate().take(MAX_OBJECTS) {
            states[slot] = if o.state { 1.0 } else { 0.0 };
            types[slot * 3 + o.kind.index()] = 1.0;
        }
        x.extend_from_slice(&states);
        x.extend_from_slice(&types);
    }
    x
}

pub fn assemble_input(r: &ObservationRecord, variant: ModelVariant) -> Vec<f64> {
    encode(variant, &r.gesture_vector, &r.scene, &r.focus, r.user)
}
