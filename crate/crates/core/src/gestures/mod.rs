//! Gesture recognition: synthetic hands and swipes, static and dynamic
//! classifiers, stroke segmentation and per-episode evidence pooling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intentnet::IntentNetError;

pub mod dynamic;
pub mod episode;
pub mod hand;
pub mod library;

pub use dynamic::{
    basis_matrix, classify_dynamic, default_width, dtw_distance, fit_promp, resample, synth_swipe,
    ProMP, Trajectory, SWIPE_LENGTH_MM,
};
pub use episode::{
    accumulate, detect_stroke, extract_metrics, read_replay, run_episode, synth_episode, trace_csv,
    write_replay, EpisodeBuffer, EpisodeConfig, EpisodeOutcome, EpisodeStep, Frame, ReplayFrame,
    StrokeSegment, TraceRow,
};
pub use hand::{
    extract_static_features, synth_hand, HandSkeleton, StaticFeatures, N_STATIC_FEATURES,
};
pub use library::{classify_static, static_dataset, static_input, GestureLibrary, LibraryConfig};

/// Number of gestures in the default library.
pub const N_GESTURES: usize = 9;

/// Default library, in gesture-vector order.
pub const DEFAULT_GESTURES: [&str; N_GESTURES] = [
    "grab",
    "pinch",
    "point",
    "two",
    "three",
    "swipe_up",
    "swipe_down",
    "swipe_left",
    "swipe_right",
];

/// Every static hand pose the synthesizer knows.
pub const STATIC_CLASSES: [&str; 8] = [
    "grab",
    "pinch",
    "point",
    "two",
    "three",
    "four",
    "five",
    "thumbs_up",
];

/// Every swipe the synthesizer knows.
pub const DYNAMIC_CLASSES: [&str; 5] = [
    "swipe_up",
    "swipe_down",
    "swipe_left",
    "swipe_right",
    "swipe_forward",
];

/// Default minimum class probability for a detection to count.
pub const EVIDENCE_THRESHOLD: f64 = 0.9;
/// Radius of the neutral zone around the workspace center, in mm.
pub const CENTER_RADIUS_MM: f64 = 50.0;
/// Temperature turning DTW distances into probabilities.
pub const DTW_TAU: f64 = 25.0;
/// Where the user's hand rests between gestures (mm, sensor frame).
pub const WORKSPACE_CENTER: [f64; 3] = [0.0, 0.0, 200.0];

#[derive(Debug, Error)]
pub enum GestureError {
    #[error("degenerate skeleton: {0}")]
    DegenerateSkeleton(String),
    #[error("trajectory too short: {0} samples")]
    TooShort(usize),
    #[error("need at least 2 demonstrations, got {0}")]
    InsufficientDemos(usize),
    #[error("unknown gesture class {0:?}")]
    UnknownClass(String),
    #[error("gesture library has no trained {0} model")]
    UntrainedModel(&'static str),
    #[error("invalid noise scale {0}")]
    InvalidNoise(f64),
    #[error("duplicate gesture class {0:?}")]
    DuplicateClass(String),
    #[error(transparent)]
    Net(#[from] IntentNetError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GestureClass {
    pub name: String,
    pub kind: GestureKind,
}

impl GestureClass {
    /// Looks a class up by name among the synthesizable poses and swipes.
    pub fn named(name: &str) -> Result<GestureClass, GestureError> {
        if STATIC_CLASSES.contains(&name) {
            Ok(GestureClass {
                name: name.to_string(),
                kind: GestureKind::Static,
            })
        } else if DYNAMIC_CLASSES.contains(&name) {
            Ok(GestureClass {
                name: name.to_string(),
                kind: GestureKind::Dynamic,
            })
        } else {
            Err(GestureError::UnknownClass(name.to_string()))
        }
    }
}

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

pub(crate) fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    if n == 0.0 {
        a
    } else {
        scale(a, 1.0 / n)
    }
}
