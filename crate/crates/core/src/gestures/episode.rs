//! Episodes: everything between the hand appearing and disappearing.
//! Static poses are read while the hand rests near the workspace center;
//! swipes are read from strokes that leave it. Confident detections are
//! max-pooled into one gesture vector per episode.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dynamic::{synth_swipe, Trajectory, SENSOR_RATE_HZ};
use super::hand::{extract_static_features, synth_hand, HandSkeleton};
use super::library::{classify_dynamic, classify_static, GestureLibrary};
use super::{
    dist, GestureError, GestureKind, Vec3, CENTER_RADIUS_MM, EVIDENCE_THRESHOLD, WORKSPACE_CENTER,
};
use crate::actions::{ActionType, MetricParams};
use crate::rng;

/// Palm speed (mm/s) under which the hand counts as holding a pose.
pub const STILL_SPEED_MM_S: f64 = 100.0;
pub const PINCH_RANGE_MM: (f64, f64) = (20.0, 120.0);
pub const POUR_RANGE_DEG: (f64, f64) = (10.0, 180.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub hand: HandSkeleton,
    pub visible: bool,
}

impl Frame {
    pub fn t(&self) -> f64 {
        self.hand.timestamp
    }
}

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayFrame {
    pub t: f64,
    pub palm: Vec3,
    pub fingertips: [Vec3; 5],
    pub bone_dirs: Vec<Vec3>,
    pub visible: bool,
}

impl From<&Frame> for ReplayFrame {
    fn from(f: &Frame) -> Self {
        ReplayFrame {
            t: f.hand.timestamp,
            palm: f.hand.palm_center,
            fingertips: f.hand.fingertips,
            bone_dirs: f.hand.bone_dirs.clone(),
            visible: f.visible,
        }
    }
}

impl From<ReplayFrame> for Frame {
    fn from(r: ReplayFrame) -> Self {
        Frame {
            hand: HandSkeleton {
                palm_center: r.palm,
                fingertips: r.fingertips,
                bone_dirs: r.bone_dirs,
                timestamp: r.t,
            },
            visible: r.visible,
        }
    }
}

pub fn write_replay(path: &Path, frames: &[Frame]) -> Result<(), GestureError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for f in frames {
        serde_json::to_writer(&mut w, &ReplayFrame::from(f))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_replay(path: &Path) -> Result<Vec<Frame>, GestureError> {
    let r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut frames = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(serde_json::from_str::<ReplayFrame>(&line)?.into());
    }
    Ok(frames)
}

/// Frame indices `[start, end)` of one excursion out of the center zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrokeSegment {
    pub start: usize,
    pub end: usize,
}

fn outside(f: &Frame, center: Vec3, radius: f64) -> bool {
    dist(f.hand.palm_center, center) > radius
}

/// Segments start when a visible palm leaves the sphere of `center_radius`
/// around the workspace center and end when it re-enters or the hand
/// disappears.
pub fn detect_stroke(frames: &[Frame], center_radius: f64) -> Vec<StrokeSegment> {
    detect_stroke_around(frames, WORKSPACE_CENTER, center_radius)
}

pub fn detect_stroke_around(frames: &[Frame], center: Vec3, radius: f64) -> Vec<StrokeSegment> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, f) in frames.iter().enumerate() {
        let out_now = f.visible && outside(f, center, radius);
        match (open, out_now) {
            (None, true) => open = Some(i),
            (Some(s), false) => {
                out.push(StrokeSegment { start: s, end: i });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push(StrokeSegment {
            start: s,
            end: frames.len(),
        });
    }
    out
}

/// Element-wise maximum of the detections; zeros when there are none.
pub fn accumulate(detections: &[Vec<f64>], n_gestures: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_gestures];
    for d in detections {
        for (acc, p) in v.iter_mut().zip(d) {
            *acc = f64::max(*acc, *p);
        }
    }
    v
}

/// Confident detections of the current episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeBuffer {
    pub threshold: f64,
    pub n_gestures: usize,
    pub frames: Vec<HandSkeleton>,
    pub detections: Vec<Vec<f64>>,
    pub visible: bool,
}

impl EpisodeBuffer {
    pub fn new(n_gestures: usize, threshold: f64) -> EpisodeBuffer {
        EpisodeBuffer {
            threshold,
            n_gestures,
            frames: Vec::new(),
            detections: Vec::new(),
            visible: false,
        }
    }

    /// Keeps `probs` only if some class reaches the evidence threshold.
    pub fn offer(&mut self, probs: Vec<f64>) -> bool {
        if probs.iter().any(|p| *p >= self.threshold) {
            self.detections.push(probs);
            true
        } else {
            false
        }
    }

    pub fn accumulate(&self) -> Vec<f64> {
        accumulate(&self.detections, self.n_gestures)
    }

    pub fn clear(&mut self) {
        self.frames.clear();
        self.detections.clear();
        self.visible = false;
    }
}

/// Parameters the action signature asks for, read from the episode.
/// Pouring reads its angle from the median thumb-index gap.
pub fn extract_metrics(frames: &[Frame], ta: ActionType) -> MetricParams {
    let mut m = MetricParams::defaults_for(ta);
    if ta == ActionType::Pour {
        let mut gaps: Vec<f64> = frames
            .iter()
            .filter(|f| f.visible)
            .map(|f| dist(f.hand.fingertips[0], f.hand.fingertips[1]))
            .collect();
        if !gaps.is_empty() {
            gaps.sort_by(f64::total_cmp);
            let n = gaps.len();
            let median = if n % 2 == 1 {
                gaps[n / 2]
            } else {
                0.5 * (gaps[n / 2 - 1] + gaps[n / 2])
            };
            m.angle_deg = Some(gap_to_angle(median));
        }
    }
    m
}

pub fn gap_to_angle(gap_mm: f64) -> f64 {
    let (g0, g1) = PINCH_RANGE_MM;
    let (a0, a1) = POUR_RANGE_DEG;
    (a0 + (gap_mm - g0) * (a1 - a0) / (g1 - g0)).clamp(a0, a1)
}

/// Classifier output at one point of the replay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub kind: GestureKind,
    pub probs: Vec<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub start_frame: usize,
    pub end_frame: usize,
    pub detections: Vec<Vec<f64>>,
    pub gesture_vector: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub threshold: f64,
    pub center: Vec3,
    pub center_radius: f64,
    pub still_speed: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            threshold: EVIDENCE_THRESHOLD,
            center: WORKSPACE_CENTER,
            center_radius: CENTER_RADIUS_MM,
            still_speed: STILL_SPEED_MM_S,
        }
    }
}

/// Outward part of a stroke: from the last frame inside the zone to the
/// point farthest from the center. The way back is retraction and is
/// dropped.
fn stroke_trajectory(frames: &[Frame], seg: StrokeSegment, center: Vec3) -> Option<Trajectory> {
    let first = seg.start.saturating_sub(1);
    let from = if first < seg.start && frames[first].visible {
        first
    } else {
        seg.start
    };
    let far = (seg.start..seg.end).max_by(|&a, &b| {
        dist(frames[a].hand.palm_center, center)
            .total_cmp(&dist(frames[b].hand.palm_center, center))
    })?;
    if far <= from {
        return None;
    }
    let span = &frames[from..=far];
    let dt = (span.last()?.t() - span[0].t()) / (span.len() - 1) as f64;
    let dt = if dt > 0.0 { dt } else { 1.0 / SENSOR_RATE_HZ };
    Some(Trajectory::new(
        dt,
        span.iter().map(|f| f.hand.palm_center).collect(),
    ))
}

/// Splits a replay into episodes at hand disappearance and pools the
/// confident static and dynamic detections of each.
pub fn run_episode(
    frames: &[Frame],
    lib: &GestureLibrary,
    cfg: &EpisodeConfig,
) -> Result<Vec<EpisodeOutcome>, GestureError> {
    let mut outcomes = Vec::new();
    let mut i = 0;
    while i < frames.len() {
        if !frames[i].visible {
            i += 1;
            continue;
        }
        let start = i;
        while i < frames.len() && frames[i].visible {
            i += 1;
        }
        outcomes.push(process_episode(frames, start, i, lib, cfg)?);
    }
    Ok(outcomes)
}

fn process_episode(
    frames: &[Frame],
    start: usize,
    end: usize,
    lib: &GestureLibrary,
    cfg: &EpisodeConfig,
) -> Result<EpisodeOutcome, GestureError> {
    let span = &frames[start..end];
    let mut buffer = EpisodeBuffer::new(lib.len(), cfg.threshold);
    buffer.visible = true;
    let mut trace = Vec::new();
    let has_static = !lib.static_indices().is_empty();
    let has_dynamic = !lib.dynamic_indices().is_empty();
    let strokes = detect_stroke_around(span, cfg.center, cfg.center_radius);
    let stroke_ends: std::collections::HashMap<usize, StrokeSegment> =
        strokes.iter().map(|s| (s.end - 1, *s)).collect();

    for (k, f) in span.iter().enumerate() {
        buffer.frames.push(f.hand.clone());
        let inside = !outside(f, cfg.center, cfg.center_radius);
        let still = k > 0 && {
            let prev = &span[k - 1];
            let dt = f.t() - prev.t();
            dt > 0.0 && dist(f.hand.palm_center, prev.hand.palm_center) / dt < cfg.still_speed
        };
        if has_static && inside && still {
            let probs =
                lib.embed_static(&classify_static(&extract_static_features(&f.hand)?, lib)?);
            let accepted = buffer.offer(probs.clone());
            trace.push(TraceRow {
                t: f.t(),
                kind: GestureKind::Static,
                probs,
                accepted,
            });
        }
        if let Some(seg) = stroke_ends.get(&k) {
            if has_dynamic {
                if let Some(t) = stroke_trajectory(span, *seg, cfg.center) {
                    let probs = lib.embed_dynamic(&classify_dynamic(&t, lib)?);
                    let accepted = buffer.offer(probs.clone());
                    trace.push(TraceRow {
                        t: f.t(),
                        kind: GestureKind::Dynamic,
                        probs,
                        accepted,
                    });
                }
            }
        }
    }
    let gesture_vector = buffer.accumulate();
    Ok(EpisodeOutcome {
        start_frame: start,
        end_frame: end,
        detections: buffer.detections,
        gesture_vector,
        trace,
    })
}

/// Classification trace as CSV: time, kind, accepted flag, one column per
/// gesture.
pub fn trace_csv(rows: &[TraceRow], lib: &GestureLibrary) -> String {
    let mut s = String::from("t,kind,accepted");
    for c in &lib.classes {
        s.push(',');
        s.push_str(&c.name);
    }
    s.push('\n');
    for r in rows {
        let kind = match r.kind {
            GestureKind::Static => "static",
            GestureKind::Dynamic => "dynamic",
        };
        s.push_str(&format!("{:.3},{},{}", r.t, kind, u8::from(r.accepted)));
        for p in &r.probs {
            s.push_str(&format!(",{p:.6}"));
        }
        s.push('\n');
    }
    s
}

/// One element of a scripted synthetic episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStep {
    /// Hold a static pose at the workspace center.
    Hold { class: String, frames: usize },
    /// Swipe out of the center with an open hand and come back.
    Swipe { class: String },
    /// Rest the open hand at the center.
    Rest { frames: usize },
}

const RETRACT_FRAMES: usize = 50;
const SWIPE_POSE: &str = "five";

/// Renders a scripted episode at the sensor rate. The hand appears at the
/// first frame and disappears after the last step.
pub fn synth_episode(
    steps: &[EpisodeStep],
    seed: u64,
    noise_mm: f64,
) -> Result<Vec<Frame>, GestureError> {
    let dt = 1.0 / SENSOR_RATE_HZ;
    let mut frames: Vec<Frame> = Vec::new();
    let mut k = 0u64;
    let mut push = |frames: &mut Vec<Frame>, pose: &str, palm: Vec3| -> Result<(), GestureError> {
        let mut hand = synth_hand(pose, rng::derive_seed(seed, k), noise_mm)?.moved_to(palm);
        hand.timestamp = frames.len() as f64 * dt;
        frames.push(Frame {
            hand,
            visible: true,
        });
        k += 1;
        Ok(())
    };
    for (n, step) in steps.iter().enumerate() {
        match step {
            EpisodeStep::Hold {
                class,
                frames: count,
            } => {
                for _ in 0..*count {
                    push(&mut frames, class, WORKSPACE_CENTER)?;
                }
            }
            EpisodeStep::Rest { frames: count } => {
                for _ in 0..*count {
                    push(&mut frames, SWIPE_POSE, WORKSPACE_CENTER)?;
                }
            }
            EpisodeStep::Swipe { class } => {
                let path = synth_swipe(
                    class,
                    rng::derive_seed_str(seed, &format!("swipe-{n}")),
                    noise_mm,
                )?;
                for p in &path.points {
                    push(&mut frames, SWIPE_POSE, *p)?;
                }
                let last = *path.points.last().expect("swipe has samples");
                for r in 1..=RETRACT_FRAMES {
                    let a = r as f64 / RETRACT_FRAMES as f64;
                    let p = [0, 1, 2].map(|c| last[c] + a * (WORKSPACE_CENTER[c] - last[c]));
                    push(&mut frames, SWIPE_POSE, p)?;
                }
            }
        }
    }
    if let Some(last) = frames.last().cloned() {
        let mut hand = last.hand;
        hand.timestamp += dt;
        frames.push(Frame {
            hand,
            visible: false,
        });
    }
    Ok(frames)
}
