//! Hand skeletons, the 57 static features, and a forward-kinematics hand
//! synthesizer standing in for a depth sensor.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    add, cross, dist, dot, norm, normalize, scale, sub, GestureError, Vec3, STATIC_CLASSES,
};
use crate::rng;

pub const N_ANGLES: usize = 42;
pub const N_DISTANCES: usize = 15;
pub const N_STATIC_FEATURES: usize = N_ANGLES + N_DISTANCES;
/// Palm normal, palm direction, wrist direction, then four bones per finger.
pub const N_BONE_DIRS: usize = 3 + 4 * 5;

pub const PALM_NORMAL: usize = 0;
pub const PALM_DIRECTION: usize = 1;
pub const WRIST_DIRECTION: usize = 2;

/// Index of bone `bone` (0 metacarpal .. 3 distal) of finger `finger`
/// (0 thumb .. 4 pinky) in `bone_dirs`.
pub const fn bone_index(finger: usize, bone: usize) -> usize {
    3 + 4 * finger + bone
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandSkeleton {
    pub palm_center: Vec3,
    pub fingertips: [Vec3; 5],
    pub bone_dirs: Vec<Vec3>,
    pub timestamp: f64,
}

impl HandSkeleton {
    pub fn translated(&self, offset: Vec3) -> HandSkeleton {
        HandSkeleton {
            palm_center: add(self.palm_center, offset),
            fingertips: self.fingertips.map(|f| add(f, offset)),
            bone_dirs: self.bone_dirs.clone(),
            timestamp: self.timestamp,
        }
    }

    /// Same pose with the palm moved to `palm`.
    pub fn moved_to(&self, palm: Vec3) -> HandSkeleton {
        self.translated(sub(palm, self.palm_center))
    }
}

pub type StaticFeatures = [f64; N_STATIC_FEATURES];

fn angle(a: Vec3, b: Vec3) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos()
}

/// 42 bone angles (radians) followed by 15 fingertip distances (mm).
///
/// Angle order: for each finger, the three angles between consecutive
/// bones, palm direction to metacarpal, palm normal to proximal, palm
/// direction to proximal; then the four angles between adjacent proximal
/// bones; palm normal to each distal bone; palm normal and palm direction to
/// the wrist; thumb distal to index proximal. Distances: each fingertip to
/// the palm, then every fingertip pair `(i, j)` with `i < j`.
pub fn extract_static_features(h: &HandSkeleton) -> Result<StaticFeatures, GestureError> {
    if h.bone_dirs.len() != N_BONE_DIRS {
        return Err(GestureError::DegenerateSkeleton(format!(
            "{} bone directions",
            h.bone_dirs.len()
        )));
    }
    if let Some(i) = h
        .bone_dirs
        .iter()
        .position(|d| d.iter().any(|v| !v.is_finite()) || norm(*d) <= 1e-12)
    {
        return Err(GestureError::DegenerateSkeleton(format!(
            "bone direction {i} has zero length"
        )));
    }
    let d = |i: usize| h.bone_dirs[i];
    let mut f = [0.0; N_STATIC_FEATURES];
    let mut k = 0;
    let mut push = |v: f64| {
        f[k] = v;
        k += 1;
    };
    for finger in 0..5 {
        for b in 0..3 {
            push(angle(
                d(bone_index(finger, b)),
                d(bone_index(finger, b + 1)),
            ));
        }
        push(angle(d(PALM_DIRECTION), d(bone_index(finger, 0))));
        push(angle(d(PALM_NORMAL), d(bone_index(finger, 1))));
        push(angle(d(PALM_DIRECTION), d(bone_index(finger, 1))));
    }
    for finger in 0..4 {
        push(angle(
            d(bone_index(finger, 1)),
            d(bone_index(finger + 1, 1)),
        ));
    }
    for finger in 0..5 {
        push(angle(d(PALM_NORMAL), d(bone_index(finger, 3))));
    }
    push(angle(d(PALM_NORMAL), d(WRIST_DIRECTION)));
    push(angle(d(PALM_DIRECTION), d(WRIST_DIRECTION)));
    push(angle(d(bone_index(0, 3)), d(bone_index(1, 1))));
    for tip in &h.fingertips {
        push(dist(*tip, h.palm_center));
    }
    for i in 0..5 {
        for j in i + 1..5 {
            push(dist(h.fingertips[i], h.fingertips[j]));
        }
    }
    debug_assert_eq!(k, N_STATIC_FEATURES);
    Ok(f)
}

// Hand model, right hand, palm facing down, fingers along +y, mm.
const PALM: Vec3 = [0.0, 0.0, 0.0];
const WRIST: Vec3 = [0.0, -45.0, 0.0];
const FOREARM: Vec3 = [0.0, -105.0, -8.0];
const CARPALS: [Vec3; 5] = [
    [-15.0, -35.0, -5.0],
    [-12.0, -40.0, 0.0],
    [-3.0, -40.0, 0.0],
    [6.0, -40.0, 0.0],
    [14.0, -38.0, 0.0],
];
const KNUCKLES: [Vec3; 5] = [
    [-42.0, -8.0, -12.0],
    [-25.0, 25.0, 0.0],
    [-5.0, 28.0, 0.0],
    [13.0, 25.0, 0.0],
    [30.0, 18.0, 0.0],
];
const PHALANGES: [[f64; 3]; 5] = [
    [30.0, 25.0, 20.0],
    [40.0, 25.0, 18.0],
    [45.0, 28.0, 19.0],
    [42.0, 27.0, 18.0],
    [33.0, 19.0, 17.0],
];

const EXT: [f64; 3] = [0.05, 0.05, 0.03];
const CURL: [f64; 3] = [1.45, 1.55, 1.0];
const THUMB_EXT: [f64; 3] = [0.0, 0.05, 0.05];
const THUMB_CURL: [f64; 3] = [0.9, 0.8, 0.6];

struct Pose {
    flex: [[f64; 3]; 5],
    spread: [f64; 5],
}

fn pose(class: &str) -> Option<Pose> {
    let narrow = [0.0, -0.05, 0.0, 0.05, 0.12];
    let p = match class {
        "grab" => Pose {
            flex: [THUMB_CURL, CURL, CURL, CURL, CURL],
            spread: narrow,
        },
        "pinch" => Pose {
            flex: [[0.5, 0.45, 0.35], [0.75, 0.8, 0.5], EXT, EXT, EXT],
            spread: narrow,
        },
        "point" => Pose {
            flex: [THUMB_CURL, EXT, CURL, CURL, CURL],
            spread: narrow,
        },
        "two" => Pose {
            flex: [THUMB_CURL, EXT, EXT, CURL, CURL],
            spread: [0.0, -0.15, 0.1, 0.05, 0.12],
        },
        "three" => Pose {
            flex: [THUMB_CURL, EXT, EXT, EXT, CURL],
            spread: [0.0, -0.15, 0.0, 0.15, 0.12],
        },
        "four" => Pose {
            flex: [THUMB_CURL, EXT, EXT, EXT, EXT],
            spread: [0.0, -0.12, 0.0, 0.1, 0.2],
        },
        "five" => Pose {
            flex: [THUMB_EXT, EXT, EXT, EXT, EXT],
            spread: [-0.4, -0.2, 0.0, 0.15, 0.3],
        },
        "thumbs_up" => Pose {
            flex: [THUMB_EXT, CURL, CURL, CURL, CURL],
            spread: [-0.3, -0.05, 0.0, 0.05, 0.12],
        },
        _ => return None,
    };
    Some(p)
}

/// Joint chain of one finger: carpal, knuckle, two inner joints, tip.
fn finger_joints(finger: usize, flex: [f64; 3], spread: f64) -> [Vec3; 5] {
    let j0 = CARPALS[finger];
    let j1 = KNUCKLES[finger];
    let base = normalize(sub(j1, j0));
    let curl_toward = if finger == 0 {
        normalize([1.0, 0.3, -1.0])
    } else {
        [0.0, 0.0, -1.0]
    };
    // Make the curl axis orthogonal to the chain's base direction.
    let n = normalize(sub(curl_toward, scale(base, dot(curl_toward, base))));
    let lateral = normalize(cross(n, base));
    let along = add(scale(base, spread.cos()), scale(lateral, spread.sin()));
    let mut joints = [j0, j1, j1, j1, j1];
    let mut bend = 0.0;
    for b in 0..3 {
        bend += flex[b];
        let dir = add(scale(along, bend.cos()), scale(n, bend.sin()));
        joints[b + 2] = add(joints[b + 1], scale(dir, PHALANGES[finger][b]));
    }
    joints
}

fn skeleton_from_points(
    palm: Vec3,
    wrist: Vec3,
    forearm: Vec3,
    fingers: &[[Vec3; 5]; 5],
) -> HandSkeleton {
    let palm_dir = normalize(sub(fingers[2][1], wrist));
    let across = sub(fingers[1][1], fingers[4][1]);
    let raw_normal = cross(across, palm_dir);
    let palm_normal = normalize(sub(raw_normal, scale(palm_dir, dot(raw_normal, palm_dir))));
    let mut bone_dirs = vec![palm_normal, palm_dir, normalize(sub(wrist, forearm))];
    for joints in fingers {
        for b in 0..4 {
            bone_dirs.push(normalize(sub(joints[b + 1], joints[b])));
        }
    }
    HandSkeleton {
        palm_center: palm,
        fingertips: fingers.map(|j| j[4]),
        bone_dirs,
        timestamp: 0.0,
    }
}

/// Canonical skeleton of a static class plus Gaussian noise of `noise_mm`
/// on every joint position. Bone directions follow from the noisy joints.
/// The palm sits at the origin of the hand frame.
pub fn synth_hand(class: &str, seed: u64, noise_mm: f64) -> Result<HandSkeleton, GestureError> {
    let p = pose(class).ok_or_else(|| GestureError::UnknownClass(class.to_string()))?;
    let mut fingers: [[Vec3; 5]; 5] =
        std::array::from_fn(|f| finger_joints(f, p.flex[f], p.spread[f]));
    let (mut palm, mut wrist, mut forearm) = (PALM, WRIST, FOREARM);
    if noise_mm > 0.0 {
        let normal =
            Normal::new(0.0, noise_mm).map_err(|_| GestureError::InvalidNoise(noise_mm))?;
        let mut r = rng::seeded(seed);
        let mut jitter = |v: &mut Vec3| {
            for c in v.iter_mut() {
                *c += normal.sample(&mut r);
            }
        };
        jitter(&mut palm);
        jitter(&mut wrist);
        jitter(&mut forearm);
        for joints in fingers.iter_mut() {
            for j in joints.iter_mut() {
                jitter(j);
            }
        }
    }
    Ok(skeleton_from_points(palm, wrist, forearm, &fingers))
}

/// True when `class` names a pose [`synth_hand`] can produce.
pub fn is_static_class(class: &str) -> bool {
    STATIC_CLASSES.contains(&class)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_bones_give_zero_angles() {
        let h = HandSkeleton {
            palm_center: [0.0; 3],
            fingertips: [
                [10.0, 0.0, 0.0],
                [0.0, 10.0, 0.0],
                [0.0, 0.0, 10.0],
                [5.0, 5.0, 0.0],
                [0.0, 5.0, 5.0],
            ],
            bone_dirs: vec![[0.0, 1.0, 0.0]; N_BONE_DIRS],
            timestamp: 0.0,
        };
        let f = extract_static_features(&h).unwrap();
        assert!(f[..N_ANGLES].iter().all(|&a| a == 0.0));
    }

    #[test]
    fn fingertip_palm_distance() {
        let mut h = synth_hand("five", 0, 0.0).unwrap();
        h.fingertips[2] = add(h.palm_center, [30.0, 0.0, 0.0]);
        let f = extract_static_features(&h).unwrap();
        assert!((f[N_ANGLES + 2] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_direction() {
        let mut h = synth_hand("five", 0, 0.0).unwrap();
        h.bone_dirs[7] = [0.0; 3];
        assert!(matches!(
            extract_static_features(&h),
            Err(GestureError::DegenerateSkeleton(_))
        ));
    }

    #[test]
    fn templates_are_unit_and_noise_free() {
        for c in STATIC_CLASSES {
            let h = synth_hand(c, 9, 0.0).unwrap();
            assert_eq!(h, synth_hand(c, 123, 0.0).unwrap());
            for d in &h.bone_dirs {
                assert!((norm(*d) - 1.0).abs() < 1e-9);
            }
            for t in &h.fingertips {
                assert!(dist(*t, h.palm_center) > 1.0);
            }
            let f = extract_static_features(&h).unwrap();
            assert!(f[..N_ANGLES]
                .iter()
                .all(|a| (0.0..=std::f64::consts::PI).contains(a)));
        }
        assert!(matches!(
            synth_hand("wave", 0, 0.0),
            Err(GestureError::UnknownClass(_))
        ));
    }

    #[test]
    fn templates_are_pairwise_distinct() {
        let feats: Vec<_> = STATIC_CLASSES
            .iter()
            .map(|c| extract_static_features(&synth_hand(c, 0, 0.0).unwrap()).unwrap())
            .collect();
        for i in 0..feats.len() {
            for j in i + 1..feats.len() {
                let d: f64 = feats[i]
                    .iter()
                    .zip(&feats[j])
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                assert!(d > 1.0, "{} vs {}", STATIC_CLASSES[i], STATIC_CLASSES[j]);
            }
        }
    }
}
