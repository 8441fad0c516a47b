//! A trained gesture library: a Bayesian MLP over static features and one
//! movement primitive per swipe class.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dynamic::{
    fit_promp, resample, synth_swipe, ProMP, Trajectory, CLASSIFY_RATE_HZ, DEFAULT_N_BASIS,
};
use super::hand::{
    extract_static_features, synth_hand, StaticFeatures, N_ANGLES, N_STATIC_FEATURES,
};
use super::{dtw_distance, GestureClass, GestureError, GestureKind, DEFAULT_GESTURES, DTW_TAU};
use crate::intentnet::{fit, Architecture, TrainConfig, VariationalMLP};
use crate::rng;

/// Fingertip distances enter the network in decimeters so every input is
/// of order one.
pub const DISTANCE_SCALE: f64 = 0.01;
pub const STATIC_HIDDEN: usize = 25;

/// Network input for one feature vector.
pub fn static_input(f: &StaticFeatures) -> Vec<f64> {
    f.iter()
        .enumerate()
        .map(|(i, v)| if i < N_ANGLES { *v } else { v * DISTANCE_SCALE })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryConfig {
    /// Synthetic training hands per static class.
    pub static_per_class: usize,
    /// Training hands draw their noise scale uniformly from `[0, max]`.
    pub static_noise_max_mm: f64,
    pub demos_per_class: usize,
    pub demo_noise_mm: f64,
    pub n_basis: usize,
    pub tau: f64,
    pub posterior_samples: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            static_per_class: 400,
            static_noise_max_mm: 10.0,
            demos_per_class: 10,
            demo_noise_mm: 5.0,
            n_basis: DEFAULT_N_BASIS,
            tau: DTW_TAU,
            posterior_samples: 20,
            train: TrainConfig {
                epochs: 4000,
                callback_every: 500,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GestureLibrary {
    pub classes: Vec<GestureClass>,
    pub static_model: Option<VariationalMLP>,
    /// One entry per class; `Some` only for fitted dynamic classes.
    pub exemplars: Vec<Option<ProMP>>,
    pub tau: f64,
    pub posterior_samples: usize,
}

/// Labelled static training data: `per_class` noisy hands of every class.
pub fn static_dataset(
    classes: &[&str],
    per_class: usize,
    noise: impl Fn(&mut rng::Rng) -> f64,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<usize>), GestureError> {
    let mut xs = Vec::with_capacity(classes.len() * per_class);
    let mut ys = Vec::with_capacity(classes.len() * per_class);
    let mut r = rng::seeded(seed);
    // Interleave classes so prefix/suffix splits stay balanced.
    for i in 0..per_class {
        for (c, name) in classes.iter().enumerate() {
            let sigma = noise(&mut r);
            let h = synth_hand(
                name,
                rng::derive_seed(seed, (i * classes.len() + c) as u64),
                sigma,
            )?;
            xs.push(static_input(&extract_static_features(&h)?));
            ys.push(c);
        }
    }
    Ok((xs, ys))
}

impl GestureLibrary {
    pub fn new(classes: Vec<GestureClass>) -> Result<GestureLibrary, GestureError> {
        let mut seen = std::collections::HashSet::new();
        for c in &classes {
            if !seen.insert(c.name.as_str()) {
                return Err(GestureError::DuplicateClass(c.name.clone()));
            }
        }
        let n = classes.len();
        Ok(GestureLibrary {
            classes,
            static_model: None,
            exemplars: vec![None; n],
            tau: DTW_TAU,
            posterior_samples: 20,
        })
    }

    pub fn from_names(names: &[&str]) -> Result<GestureLibrary, GestureError> {
        GestureLibrary::new(
            names
                .iter()
                .map(|n| GestureClass::named(n))
                .collect::<Result<_, _>>()?,
        )
    }

    /// The nine-gesture library, untrained.
    pub fn default_classes() -> GestureLibrary {
        GestureLibrary::from_names(&DEFAULT_GESTURES).expect("default gestures are known")
    }

    /// The nine-gesture library trained on synthetic data.
    pub fn trained_default(cfg: &LibraryConfig) -> Result<GestureLibrary, GestureError> {
        let mut lib = GestureLibrary::default_classes();
        lib.train(cfg)?;
        Ok(lib)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    fn indices_of(&self, kind: GestureKind) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Library indices of the static classes, in classifier output order.
    pub fn static_indices(&self) -> Vec<usize> {
        self.indices_of(GestureKind::Static)
    }

    /// Library indices of the dynamic classes, in classifier output order.
    pub fn dynamic_indices(&self) -> Vec<usize> {
        self.indices_of(GestureKind::Dynamic)
    }

    pub fn train(&mut self, cfg: &LibraryConfig) -> Result<(), GestureError> {
        self.tau = cfg.tau;
        self.posterior_samples = cfg.posterior_samples;
        let static_names: Vec<&str> = self
            .static_indices()
            .iter()
            .map(|&i| self.classes[i].name.as_str())
            .collect();
        if !static_names.is_empty() {
            let max = cfg.static_noise_max_mm;
            let (xs, ys) = static_dataset(
                &static_names,
                cfg.static_per_class,
                |r| {
                    if max > 0.0 {
                        r.random_range(0.0..=max)
                    } else {
                        0.0
                    }
                },
                rng::derive_seed_str(cfg.seed, "static-data"),
            )?;
            let arch = Architecture {
                input: N_STATIC_FEATURES,
                hidden: vec![STATIC_HIDDEN],
                output: static_names.len(),
            };
            let tcfg = cfg
                .train
                .clone()
                .with_seed(rng::derive_seed_str(cfg.seed, "static-train"));
            self.static_model = Some(fit(&arch, &xs, &ys, &tcfg)?.model);
        }
        for i in self.dynamic_indices() {
            let name = self.classes[i].name.clone();
            let demos = (0..cfg.demos_per_class)
                .map(|k| {
                    let seed = rng::derive_seed_str(rng::derive_seed(cfg.seed, k as u64), &name);
                    resample(
                        &synth_swipe(&name, seed, cfg.demo_noise_mm)?,
                        CLASSIFY_RATE_HZ,
                    )
                    .map(|t| t.relative())
                })
                .collect::<Result<Vec<_>, _>>()?;
            self.exemplars[i] = Some(fit_promp(&demos, cfg.n_basis)?);
        }
        Ok(())
    }

    /// Spreads static-classifier output over a library-length vector.
    pub fn embed_static(&self, probs: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for (p, i) in probs.iter().zip(self.static_indices()) {
            v[i] = *p;
        }
        v
    }

    /// Spreads dynamic-classifier output over a library-length vector.
    pub fn embed_dynamic(&self, probs: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for (p, i) in probs.iter().zip(self.dynamic_indices()) {
            v[i] = *p;
        }
        v
    }

    pub fn save(&self, path: &Path) -> Result<(), GestureError> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<GestureLibrary, GestureError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Posterior-predictive distribution over the library's static classes.
pub fn classify_static(f: &StaticFeatures, lib: &GestureLibrary) -> Result<Vec<f64>, GestureError> {
    let model = lib
        .static_model
        .as_ref()
        .ok_or(GestureError::UntrainedModel("static"))?;
    let mut r = rng::seeded(0);
    Ok(model.predict(&static_input(f), lib.posterior_samples.max(1), &mut r)?)
}

/// Softmax of negative DTW distances (start-aligned, at the classification
/// rate) to each dynamic class's mean trajectory.
pub fn classify_dynamic(t: &Trajectory, lib: &GestureLibrary) -> Result<Vec<f64>, GestureError> {
    let idx = lib.dynamic_indices();
    if idx.is_empty() || idx.iter().any(|&i| lib.exemplars[i].is_none()) {
        return Err(GestureError::UntrainedModel("dynamic"));
    }
    let query = resample(t, CLASSIFY_RATE_HZ)?.relative();
    let d: Vec<f64> = idx
        .iter()
        .map(|&i| {
            dtw_distance(
                &query.points,
                &lib.exemplars[i]
                    .as_ref()
                    .expect("checked")
                    .mean_trajectory
                    .points,
            )
        })
        .collect();
    Ok(softmin(&d, lib.tau))
}

pub(crate) fn softmin(d: &[f64], tau: f64) -> Vec<f64> {
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d.iter().map(|x| (-(x - lo) / tau).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_library_refuses() {
        let lib = GestureLibrary::default_classes();
        let f = extract_static_features(&synth_hand("grab", 0, 0.0).unwrap()).unwrap();
        assert!(matches!(
            classify_static(&f, &lib),
            Err(GestureError::UntrainedModel(_))
        ));
        let t = synth_swipe("swipe_up", 0, 0.0).unwrap();
        assert!(matches!(
            classify_dynamic(&t, &lib),
            Err(GestureError::UntrainedModel(_))
        ));
    }

    #[test]
    fn duplicate_classes_rejected() {
        assert!(matches!(
            GestureLibrary::from_names(&["grab", "grab"]),
            Err(GestureError::DuplicateClass(_))
        ));
        assert!(matches!(
            GestureLibrary::from_names(&["wave"]),
            Err(GestureError::UnknownClass(_))
        ));
    }

    #[test]
    fn softmin_equal_distances() {
        let p = softmin(&[3.0, 3.0, 50.0], 25.0);
        assert!((p[0] - p[1]).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
