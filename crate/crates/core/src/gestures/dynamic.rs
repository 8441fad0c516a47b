//! Palm trajectories: resampling, dynamic time warping and probabilistic
//! movement primitives.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{add, dist, scale, GestureError, Vec3, DYNAMIC_CLASSES, WORKSPACE_CENTER};
use crate::rng;

pub use super::library::classify_dynamic;

pub const SWIPE_LENGTH_MM: f64 = 300.0;
pub const SWIPE_DURATION_S: f64 = 1.0;
pub const SENSOR_RATE_HZ: f64 = 100.0;
pub const CLASSIFY_RATE_HZ: f64 = 20.0;
pub const DEFAULT_N_BASIS: usize = 15;
const RIDGE: f64 = 1e-8;
const DTW_TIE_TOLERANCE: f64 = 1e-9;

/// Palm positions (mm) sampled with a uniform timestep (s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<Vec3>,
}

impl Trajectory {
    pub fn new(dt: f64, points: Vec<Vec3>) -> Trajectory {
        Trajectory { dt, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.points.len().saturating_sub(1)) as f64
    }

    /// Same samples shifted so the first one sits at the origin.
    pub fn relative(&self) -> Trajectory {
        let origin = self.points.first().copied().unwrap_or([0.0; 3]);
        Trajectory {
            dt: self.dt,
            points: self.points.iter().map(|p| super::sub(*p, origin)).collect(),
        }
    }
}

/// Linear-interpolation resampling to `rate_hz`, keeping both endpoints.
pub fn resample(t: &Trajectory, rate_hz: f64) -> Result<Trajectory, GestureError> {
    let n = t.points.len();
    if n < 2 {
        return Err(GestureError::TooShort(n));
    }
    let total = t.duration();
    let m = ((total * rate_hz).round() as usize + 1).max(2);
    let new_dt = total / (m - 1) as f64;
    let points = (0..m)
        .map(|k| {
            if k == m - 1 {
                return t.points[n - 1];
            }
            let pos = k as f64 * new_dt / t.dt;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            let (a, b) = (t.points[i], t.points[i + 1]);
            [
                a[0] + frac * (b[0] - a[0]),
                a[1] + frac * (b[1] - a[1]),
                a[2] + frac * (b[2] - a[2]),
            ]
        })
        .collect();
    Ok(Trajectory { dt: new_dt, points })
}

#[derive(Clone, Copy)]
struct Cell {
    cost: f64,
    len: usize,
}

fn better(a: Cell, b: Cell) -> bool {
    let tol = DTW_TIE_TOLERANCE * a.cost.abs().max(b.cost.abs()).max(1.0);
    if a.cost < b.cost - tol {
        true
    } else if a.cost > b.cost + tol {
        false
    } else {
        a.len < b.len
    }
}

/// DTW alignment cost with Euclidean local cost and match/insert/delete
/// steps, divided by the number of aligned pairs on the optimal path. Among
/// equally cheap paths the shortest one is used.
pub fn dtw_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let m = b.len();
    let mut prev: Vec<Cell> = Vec::with_capacity(m);
    let mut cur: Vec<Cell> = vec![Cell { cost: 0.0, len: 0 }; m];
    for (i, pa) in a.iter().enumerate() {
        for j in 0..m {
            let local = dist(*pa, b[j]);
            let best = if i == 0 && j == 0 {
                Cell { cost: 0.0, len: 0 }
            } else {
                let mut best: Option<Cell> = None;
                let mut consider = |c: Cell| {
                    if best.is_none_or(|b| better(c, b)) {
                        best = Some(c);
                    }
                };
                if i > 0 && j > 0 {
                    consider(prev[j - 1]);
                }
                if i > 0 {
                    consider(prev[j]);
                }
                if j > 0 {
                    consider(cur[j - 1]);
                }
                best.expect("a predecessor exists")
            };
            cur[j] = Cell {
                cost: best.cost + local,
                len: best.len + 1,
            };
        }
        prev.clone_from(&cur);
    }
    let end = prev[m - 1];
    end.cost / end.len as f64
}

/// Gaussian distribution over radial-basis weights, one independent block
/// per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProMP {
    pub n_basis: usize,
    pub width: f64,
    pub mean_weights: [Vec<f64>; 3],
    pub var_weights: [Vec<f64>; 3],
    pub mean_trajectory: Trajectory,
}

/// Normalized Gaussian radial bases evenly spaced over phase `[0, 1]`.
pub fn basis_matrix(n_samples: usize, n_basis: usize, width: f64) -> DMatrix<f64> {
    let centers: Vec<f64> = (0..n_basis)
        .map(|j| {
            if n_basis == 1 {
                0.5
            } else {
                j as f64 / (n_basis - 1) as f64
            }
        })
        .collect();
    let mut phi = DMatrix::zeros(n_samples, n_basis);
    for k in 0..n_samples {
        let z = if n_samples == 1 {
            0.0
        } else {
            k as f64 / (n_samples - 1) as f64
        };
        let raw: Vec<f64> = centers
            .iter()
            .map(|c| (-(z - c).powi(2) / (2.0 * width * width)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        for (j, v) in raw.iter().enumerate() {
            phi[(k, j)] = v / total;
        }
    }
    phi
}

pub fn default_width(n_basis: usize) -> f64 {
    if n_basis <= 1 {
        1.0
    } else {
        1.0 / (n_basis - 1) as f64
    }
}

fn ridge_fit(phi: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let k = phi.ncols();
    let gram = phi.transpose() * phi + DMatrix::identity(k, k) * RIDGE;
    let rhs = phi.transpose() * y;
    match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(k)),
    }
}

/// Per-demo basis weights (per axis) for a trajectory in phase `[0, 1]`.
pub fn project_weights(t: &Trajectory, n_basis: usize, width: f64) -> [Vec<f64>; 3] {
    let phi = basis_matrix(t.len(), n_basis, width);
    std::array::from_fn(|axis| {
        let y = DVector::from_iterator(t.len(), t.points.iter().map(|p| p[axis]));
        ridge_fit(&phi, &y).iter().copied().collect()
    })
}

/// Expands per-axis basis weights into `n_samples` points.
pub fn expand_weights(
    weights: &[Vec<f64>; 3],
    n_samples: usize,
    width: f64,
    dt: f64,
) -> Trajectory {
    let n_basis = weights[0].len();
    let phi = basis_matrix(n_samples, n_basis, width);
    let cols: [DVector<f64>; 3] =
        std::array::from_fn(|a| &phi * DVector::from_column_slice(&weights[a]));
    let points = (0..n_samples)
        .map(|k| [cols[0][k], cols[1][k], cols[2][k]])
        .collect();
    Trajectory { dt, points }
}

/// Fits a movement primitive to demonstrations already resampled to the
/// classification rate. Each demo is mapped onto phase `[0, 1]`; the mean
/// trajectory uses the mean demo length.
pub fn fit_promp(demos: &[Trajectory], n_basis: usize) -> Result<ProMP, GestureError> {
    if demos.len() < 2 {
        return Err(GestureError::InsufficientDemos(demos.len()));
    }
    if let Some(d) = demos.iter().find(|d| d.len() < 2) {
        return Err(GestureError::TooShort(d.len()));
    }
    let width = default_width(n_basis);
    let all: Vec<[Vec<f64>; 3]> = demos
        .iter()
        .map(|d| project_weights(d, n_basis, width))
        .collect();
    let n = all.len() as f64;
    let mean_weights: [Vec<f64>; 3] = std::array::from_fn(|a| {
        (0..n_basis)
            .map(|j| all.iter().map(|w| w[a][j]).sum::<f64>() / n)
            .collect()
    });
    let var_weights: [Vec<f64>; 3] = std::array::from_fn(|a| {
        (0..n_basis)
            .map(|j| {
                all.iter()
                    .map(|w| (w[a][j] - mean_weights[a][j]).powi(2))
                    .sum::<f64>()
                    / (n - 1.0)
            })
            .collect()
    });
    let n_samples = (demos.iter().map(|d| d.len()).sum::<usize>() as f64 / n).round() as usize;
    let dt = demos.iter().map(|d| d.dt).sum::<f64>() / n;
    let mean_trajectory = expand_weights(&mean_weights, n_samples, width, dt);
    Ok(ProMP {
        n_basis,
        width,
        mean_weights,
        var_weights,
        mean_trajectory,
    })
}

pub fn swipe_direction(class: &str) -> Option<Vec3> {
    match class {
        "swipe_up" => Some([0.0, 0.0, 1.0]),
        "swipe_down" => Some([0.0, 0.0, -1.0]),
        "swipe_left" => Some([-1.0, 0.0, 0.0]),
        "swipe_right" => Some([1.0, 0.0, 0.0]),
        "swipe_forward" => Some([0.0, 1.0, 0.0]),
        _ => None,
    }
}

/// A straight 300 mm palm stroke from the workspace center at the sensor
/// rate, plus independent Gaussian noise of `noise_mm` on every coordinate.
pub fn synth_swipe(class: &str, seed: u64, noise_mm: f64) -> Result<Trajectory, GestureError> {
    debug_assert!(DYNAMIC_CLASSES.iter().all(|c| swipe_direction(c).is_some()));
    let dir =
        swipe_direction(class).ok_or_else(|| GestureError::UnknownClass(class.to_string()))?;
    let n = (SWIPE_DURATION_S * SENSOR_RATE_HZ).round() as usize + 1;
    let mut points: Vec<Vec3> = (0..n)
        .map(|k| {
            add(
                WORKSPACE_CENTER,
                scale(dir, SWIPE_LENGTH_MM * k as f64 / (n - 1) as f64),
            )
        })
        .collect();
    if noise_mm > 0.0 {
        let normal =
            Normal::new(0.0, noise_mm).map_err(|_| GestureError::InvalidNoise(noise_mm))?;
        let mut r = rng::seeded(seed);
        for p in points.iter_mut() {
            for c in p.iter_mut() {
                *c += normal.sample(&mut r);
            }
        }
    }
    Ok(Trajectory {
        dt: 1.0 / SENSOR_RATE_HZ,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory {
            dt,
            points: (0..n).map(|k| [f(k as f64 * dt), 0.0, 0.0]).collect(),
        }
    }

    #[test]
    fn resample_constant_and_ramp() {
        let c = Trajectory {
            dt: 0.01,
            points: vec![[1.0, 2.0, 3.0]; 101],
        };
        let r = resample(&c, 20.0).unwrap();
        assert_eq!(r.len(), 21);
        assert!(r.points.iter().all(|p| *p == [1.0, 2.0, 3.0]));

        let ramp = line(100, 1.0 / 99.0, |t| 99.0 * t);
        let r = resample(&ramp, 20.0).unwrap();
        assert_eq!(r.points.first().unwrap()[0], 0.0);
        assert_eq!(r.points.last().unwrap()[0], 99.0);
        for (k, p) in r.points.iter().enumerate() {
            assert!((p[0] - 99.0 * k as f64 * r.dt).abs() < 1e-9);
        }
        assert!(matches!(
            resample(&line(1, 0.01, |t| t), 20.0),
            Err(GestureError::TooShort(1))
        ));
    }

    #[test]
    fn resample_sine() {
        let s = line(101, 0.01, |t| (2.0 * std::f64::consts::PI * t).sin());
        let r = resample(&s, 20.0).unwrap();
        assert_eq!(r.len(), 21);
        // Samples at multiples of 0.05 s coincide with source samples.
        for (k, p) in r.points.iter().enumerate() {
            let t = k as f64 * 0.05;
            assert!((p[0] - (2.0 * std::f64::consts::PI * t).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn dtw_basics() {
        let t: Vec<Vec3> = (0..10).map(|k| [k as f64, (k * k) as f64, 0.0]).collect();
        assert_eq!(dtw_distance(&t, &t), 0.0);
        let doubled: Vec<Vec3> = t.iter().flat_map(|p| [*p, *p]).collect();
        assert_eq!(dtw_distance(&t, &doubled), 0.0);
        let a = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let b = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert_eq!(dtw_distance(&a, &b), 0.0);
        let c = [[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]];
        assert!(
            (dtw_distance(&a, &c) - (0.0 + (4.0f64 * 4.0 + 2.0 * 2.0).sqrt()) / 2.0).abs() < 1e-12
        );
    }

    #[test]
    fn promp_identical_demos() {
        let demo = resample(
            &synth_swipe("swipe_right", 0, 0.0).unwrap(),
            CLASSIFY_RATE_HZ,
        )
        .unwrap();
        let p = fit_promp(&[demo.clone(), demo.clone(), demo.clone()], DEFAULT_N_BASIS).unwrap();
        assert!(p.var_weights.iter().flatten().all(|v| v.abs() < 1e-12));
        let rms = (demo
            .points
            .iter()
            .zip(&p.mean_trajectory.points)
            .map(|(a, b)| dist(*a, *b).powi(2))
            .sum::<f64>()
            / demo.len() as f64)
            .sqrt();
        assert!(rms <= 1.0, "rms {rms}");
        assert!(matches!(
            fit_promp(&[demo], 5),
            Err(GestureError::InsufficientDemos(1))
        ));
    }

    #[test]
    fn promp_midline() {
        let a = resample(&synth_swipe("swipe_up", 0, 0.0).unwrap(), CLASSIFY_RATE_HZ).unwrap();
        let b = Trajectory {
            dt: a.dt,
            points: a.points.iter().map(|p| add(*p, [0.0, 10.0, 0.0])).collect(),
        };
        let mid = Trajectory {
            dt: a.dt,
            points: a.points.iter().map(|p| add(*p, [0.0, 5.0, 0.0])).collect(),
        };
        let p = fit_promp(&[a, b], DEFAULT_N_BASIS).unwrap();
        let fit_mid = expand_weights(
            &project_weights(&mid, DEFAULT_N_BASIS, p.width),
            mid.len(),
            p.width,
            mid.dt,
        );
        for ((m, f), raw) in p
            .mean_trajectory
            .points
            .iter()
            .zip(&fit_mid.points)
            .zip(&mid.points)
        {
            assert!(dist(*m, *f) < 1e-6);
            assert!((m[1] - raw[1]).abs() < 1e-6);
        }
    }
}
