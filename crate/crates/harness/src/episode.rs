//! End-to-end demo: hand frames in, executed plan out.

use std::fmt::Write as _;
use std::path::PathBuf;

use gil_core::actions::{execute, plan, plannable_intents, ActionError, Intent, Plan};
use gil_core::datasetgen::{generate_dataset, DatasetError, DEFAULT_TRAIN};
use gil_core::gestures::{
    extract_metrics, read_replay, run_episode, synth_episode, trace_csv, EpisodeConfig,
    EpisodeStep, Frame, GestureError, GestureLibrary, LibraryConfig,
};
use gil_core::intentnet::{
    infer_intent_among, train, Head, IntentModel, IntentModels, IntentNetError, ModelVariant,
    TrainConfig, DEFAULT_POSTERIOR_SAMPLES, DEFAULT_THRESHOLD,
};
use gil_core::rng::derive_seed_str;
use gil_core::usersim::{TableLevel, UserId};
use gil_core::world::{
    sample_scene, FocusPoint, GridPos, GripperState, ObjectType, Scene, SceneObject, WorldError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Gesture(#[from] GestureError),
    #[error(transparent)]
    Net(#[from] IntentNetError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl EpisodeError {
    pub fn is_no_confident_intent(&self) -> bool {
        matches!(self, EpisodeError::Net(IntentNetError::NoConfidentIntent))
    }
}

/// Where the hand frames come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GestureSource {
    Synthetic {
        steps: Vec<EpisodeStep>,
        noise_mm: f64,
        seed: u64,
    },
    Replay(PathBuf),
}

/// Where the intent heads come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Files {
        action: PathBuf,
        object: PathBuf,
    },
    /// Train both heads of `variant` on a fresh `level` dataset.
    Train {
        variant: ModelVariant,
        level: TableLevel,
        train_size: usize,
        train: TrainConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub gestures: GestureSource,
    /// `None` selects [`demo_scene`].
    pub scene_seed: Option<u64>,
    /// `None` looks at the demo drawer, or at the end effector of a sampled
    /// scene.
    pub focus: Option<FocusPoint>,
    pub user: UserId,
    pub models: ModelSource,
    pub theta: f64,
    pub posterior_samples: usize,
    pub seed: u64,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        EpisodeSpec {
            gestures: GestureSource::Synthetic {
                steps: demo_steps(),
                noise_mm: 2.0,
                seed: 0,
            },
            scene_seed: None,
            focus: None,
            user: 0,
            models: ModelSource::Train {
                variant: ModelVariant::M5,
                level: TableLevel::D1,
                train_size: DEFAULT_TRAIN,
                train: TrainConfig::default(),
            },
            theta: DEFAULT_THRESHOLD,
            posterior_samples: DEFAULT_POSTERIOR_SAMPLES,
            seed: 0,
        }
    }
}

/// Point at the workspace center, then swipe down.
pub fn demo_steps() -> Vec<EpisodeStep> {
    vec![
        EpisodeStep::Hold {
            class: "point".into(),
            frames: 40,
        },
        EpisodeStep::Swipe {
            class: "swipe_down".into(),
        },
    ]
}

/// A held cup and a closed drawer. Putting the cup away needs the drawer
/// opened first.
pub fn demo_scene() -> Scene {
    let eef = GridPos::new(1, 1, 2);
    let object = |id, kind, pos| SceneObject {
        id,
        kind,
        pos,
        jitter: [0.0; 3],
        state: false,
        on_top_of: None,
        inside_of: None,
    };
    Scene {
        objects: vec![
            object(0, ObjectType::Cup, eef),
            object(1, ObjectType::Drawer, GridPos::new(2, 2, 0)),
        ],
        gripper: GripperState {
            holding: Some(0),
            eef_pos: eef,
        },
    }
}

/// One hand appearance that produced an intent.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStepReport {
    pub frames: (usize, usize),
    pub gesture_vector: Vec<f64>,
    pub intent: Intent,
    pub plan: Plan,
    pub before: Scene,
    pub after: Scene,
}

#[derive(Debug, Clone)]
pub struct EpisodeReport {
    pub gesture_names: Vec<String>,
    pub trace_csv: String,
    pub focus: FocusPoint,
    pub steps: Vec<EpisodeStepReport>,
}

impl EpisodeReport {
    pub fn final_scene(&self) -> Option<&Scene> {
        self.steps.last().map(|s| &s.after)
    }
}

pub fn load_models(source: &ModelSource, seed: u64) -> Result<IntentModels, EpisodeError> {
    match source {
        ModelSource::Files { action, object } => Ok(IntentModels {
            action: IntentModel::load(action)?,
            object: IntentModel::load(object)?,
        }),
        ModelSource::Train {
            variant,
            level,
            train_size,
            train: cfg,
        } => {
            let d = generate_dataset(
                *level,
                *train_size,
                derive_seed_str(seed, "episode-dataset"),
            )?;
            let head = |h: Head, label: &str| {
                train(
                    &d,
                    *variant,
                    h,
                    &cfg.clone().with_seed(derive_seed_str(seed, label)),
                )
            };
            Ok(IntentModels {
                action: head(Head::Action, "action-head")?.model,
                object: head(Head::Object, "object-head")?.model,
            })
        }
    }
}

fn frames(source: &GestureSource) -> Result<Vec<Frame>, GestureError> {
    match source {
        GestureSource::Synthetic {
            steps,
            noise_mm,
            seed,
        } => synth_episode(steps, *seed, *noise_mm),
        GestureSource::Replay(path) => read_replay(path),
    }
}

/// Runs every hand appearance through gesture recognition, intent inference
/// and the planner, executing each plan on the scene left by the previous
/// one. Appearances without confident gesture evidence are skipped; a replay
/// with none at all ends in `NoConfidentIntent`.
pub fn run_demo(
    spec: &EpisodeSpec,
    lib: &GestureLibrary,
    models: &IntentModels,
) -> Result<EpisodeReport, EpisodeError> {
    let frames = frames(&spec.gestures)?;
    let mut scene = match spec.scene_seed {
        Some(s) => sample_scene(s, None)?,
        None => demo_scene(),
    };
    let focus = spec.focus.unwrap_or_else(|| match spec.scene_seed {
        Some(_) => scene.gripper.eef_pos.as_f64(),
        None => scene.objects[1].center(),
    });
    let outcomes = run_episode(&frames, lib, &EpisodeConfig::default())?;
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    for (k, o) in outcomes.iter().enumerate() {
        rows.extend(o.trace.iter().cloned());
        if o.detections.is_empty() {
            continue;
        }
        let candidates = plannable_intents(&scene);
        let seed = derive_seed_str(spec.seed, &format!("episode-{k}"));
        let mut intent = infer_intent_among(
            &o.gesture_vector,
            &scene,
            &focus,
            spec.user,
            models,
            spec.theta,
            spec.posterior_samples,
            seed,
            candidates,
        )?;
        intent.metric = extract_metrics(&frames[o.start_frame..o.end_frame], intent.action);
        let p = plan(&intent, &scene)?;
        let after = execute(&scene, &p)?;
        steps.push(EpisodeStepReport {
            frames: (o.start_frame, o.end_frame),
            gesture_vector: o.gesture_vector.clone(),
            intent,
            plan: p,
            before: scene.clone(),
            after: after.clone(),
        });
        scene = after;
    }
    if steps.is_empty() {
        return Err(IntentNetError::NoConfidentIntent.into());
    }
    Ok(EpisodeReport {
        gesture_names: lib.classes.iter().map(|c| c.name.clone()).collect(),
        trace_csv: trace_csv(&rows, lib),
        focus,
        steps,
    })
}

/// Builds the default gesture library and the heads, then runs the demo.
pub fn run(spec: &EpisodeSpec) -> Result<EpisodeReport, EpisodeError> {
    let lib = GestureLibrary::trained_default(&LibraryConfig::default())?;
    let models = load_models(&spec.models, spec.seed)?;
    run_demo(spec, &lib, &models)
}

/// Human-readable list of what changed between two scenes.
pub fn scene_diff(before: &Scene, after: &Scene) -> Vec<String> {
    let mut out = Vec::new();
    let opt = |o: Option<usize>| o.map_or("-".to_string(), |v| v.to_string());
    let pos = |p: GridPos| format!("({},{},{})", p.x, p.y, p.z);
    if before.gripper.holding != after.gripper.holding {
        out.push(format!(
            "gripper holding: {} -> {}",
            opt(before.gripper.holding),
            opt(after.gripper.holding)
        ));
    }
    if before.gripper.eef_pos != after.gripper.eef_pos {
        out.push(format!(
            "gripper at: {} -> {}",
            pos(before.gripper.eef_pos),
            pos(after.gripper.eef_pos)
        ));
    }
    for (b, a) in before.objects.iter().zip(&after.objects) {
        let name = format!("{} {}", a.kind.name(), a.id);
        if b.pos != a.pos {
            out.push(format!("{name} at: {} -> {}", pos(b.pos), pos(a.pos)));
        }
        if b.state != a.state {
            let word = if a.kind == ObjectType::Drawer {
                "open"
            } else {
                "full"
            };
            out.push(format!("{name} {word}: {} -> {}", b.state, a.state));
        }
        if b.on_top_of != a.on_top_of {
            out.push(format!(
                "{name} on top of: {} -> {}",
                opt(b.on_top_of),
                opt(a.on_top_of)
            ));
        }
        if b.inside_of != a.inside_of {
            out.push(format!(
                "{name} inside: {} -> {}",
                opt(b.inside_of),
                opt(a.inside_of)
            ));
        }
    }
    out
}

/// The printed trace: classifier rows, then per appearance the gesture
/// vector, intent, plan and scene diff.
pub fn render(report: &EpisodeReport) -> String {
    let mut s = String::new();
    s.push_str("## detections\n");
    s.push_str(&report.trace_csv);
    for st in &report.steps {
        let _ = writeln!(s, "## episode frames {}..{}", st.frames.0, st.frames.1);
        let gv: Vec<String> = report
            .gesture_names
            .iter()
            .zip(&st.gesture_vector)
            .map(|(n, v)| format!("{n}={v:.3}"))
            .collect();
        let _ = writeln!(s, "gesture vector: {}", gv.join(" "));
        let object = st.intent.object.map_or("-".to_string(), |o| o.to_string());
        let _ = writeln!(s, "intent: {} {}", st.intent.action, object);
        let _ = writeln!(
            s,
            "plan: {}",
            serde_json::to_string(&st.plan.steps).unwrap_or_default()
        );
        for step in &st.plan.steps {
            let _ = writeln!(s, "  {step}");
        }
        let _ = writeln!(s, "scene diff:");
        for line in scene_diff(&st.before, &st.after) {
            let _ = writeln!(s, "  {line}");
        }
    }
    s
}
