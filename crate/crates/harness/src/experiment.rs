//! Training grids and learning curves over generated datasets.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::Instant;

use gil_core::actions::valid_intents;
use gil_core::datasetgen::{generate_dataset, Dataset, DatasetError, DEFAULT_TEST, DEFAULT_TRAIN};
use gil_core::intentnet::{
    rank, train, Head, IntentModel, IntentNetError, ModelVariant, TrainConfig,
    DEFAULT_POSTERIOR_SAMPLES,
};
use gil_core::rng::derive_seed_str;
use gil_core::usersim::TableLevel;
use rayon::prelude::*;
use thiserror::Error;

use crate::provenance::Provenance;

/// Sample counts of the default learning curve.
pub const CURVE_COUNTS: [usize; 5] = [100, 300, 1000, 2000, 4000];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Net(#[from] IntentNetError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// What to train and how.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub models: Vec<ModelVariant>,
    pub datasets: Vec<TableLevel>,
    pub seeds: Vec<u64>,
    pub train_size: usize,
    pub test_size: usize,
    pub train: TrainConfig,
    pub posterior_samples: usize,
    /// Also train the object head and score exact `(action, object)` matches.
    pub joint: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            models: ModelVariant::ALL.to_vec(),
            datasets: TableLevel::ALL.to_vec(),
            seeds: vec![0],
            train_size: DEFAULT_TRAIN,
            test_size: DEFAULT_TEST,
            train: TrainConfig::default(),
            posterior_samples: DEFAULT_POSTERIOR_SAMPLES,
            joint: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSpec(m.to_string()));
        if self.models.is_empty() {
            return bad("no models selected");
        }
        if self.datasets.is_empty() {
            return bad("no datasets selected");
        }
        if self.seeds.is_empty() {
            return bad("no seeds selected");
        }
        if self.train_size == 0 || self.test_size == 0 {
            return bad("train and test sizes must be at least 1");
        }
        if self.train.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        Ok(())
    }

    /// Header lines shared by every artifact of this spec.
    pub fn provenance(&self, command: &str) -> Provenance {
        let names = |v: Vec<&str>| v.join(" ");
        Provenance::new(command)
            .with(
                "models",
                names(self.models.iter().map(|m| m.name()).collect()),
            )
            .with(
                "datasets",
                names(self.datasets.iter().map(|d| d.name()).collect()),
            )
            .with(
                "seeds",
                self.seeds
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            )
            .with("train_size", self.train_size)
            .with("test_size", self.test_size)
            .with(
                "train_config",
                serde_json::to_string(&self.train).unwrap_or_default(),
            )
            .with("posterior_samples", self.posterior_samples)
    }
}

/// Outcome of one `(model, dataset, seed)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub model: ModelVariant,
    pub dataset: TableLevel,
    pub seed: u64,
    pub table_hash: String,
    pub balanced_accuracy: f64,
    pub joint_accuracy: Option<f64>,
    /// Seconds spent training and evaluating.
    pub wall_time: f64,
}

/// A cell that may have failed; failures do not stop the grid.
#[derive(Debug)]
pub struct CellOutcome {
    pub model: ModelVariant,
    pub dataset: TableLevel,
    pub seed: u64,
    pub result: Result<CellResult, ExperimentError>,
}

fn head_config(spec: &ExperimentSpec, seed: u64, head: Head) -> TrainConfig {
    let label = match head {
        Head::Action => "action-head",
        Head::Object => "object-head",
    };
    spec.train.clone().with_seed(derive_seed_str(seed, label))
}

/// The dataset a cell trains on: `train_size` leading records, then
/// `test_size` test records.
pub fn cell_data(
    level: TableLevel,
    seed: u64,
    spec: &ExperimentSpec,
) -> Result<(Dataset, Dataset), ExperimentError> {
    let d = generate_dataset(level, spec.train_size + spec.test_size, seed)?;
    Ok(gil_core::datasetgen::split(
        &d,
        spec.train_size,
        spec.test_size,
    )?)
}

/// Balanced accuracy, over action labels, of getting the whole
/// `(action, object)` pair right when ranking the valid intents of each
/// test scene.
pub fn joint_accuracy(
    action: &IntentModel,
    object: &IntentModel,
    test: &Dataset,
    n_samples: usize,
    seed: u64,
) -> Result<f64, ExperimentError> {
    let pa = action.predict_all(test, n_samples, derive_seed_str(seed, "joint-action"))?;
    let po = object.predict_all(test, n_samples, derive_seed_str(seed, "joint-object"))?;
    let mut hits: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for ((r, a), o) in test.records.iter().zip(&pa).zip(&po) {
        let best = rank(a, o, valid_intents(&r.scene)).first().map(|c| c.key);
        let e = hits.entry(r.label_action).or_default();
        e.0 += usize::from(best == Some((r.action(), r.object())));
        e.1 += 1;
    }
    if hits.is_empty() {
        return Err(IntentNetError::EmptyInput.into());
    }
    Ok(hits
        .values()
        .map(|(h, n)| *h as f64 / *n as f64)
        .sum::<f64>()
        / hits.len() as f64)
}

fn run_on(
    model: ModelVariant,
    train_set: &Dataset,
    test: &Dataset,
    seed: u64,
    spec: &ExperimentSpec,
) -> Result<CellResult, ExperimentError> {
    let started = Instant::now();
    let action = train(
        train_set,
        model,
        Head::Action,
        &head_config(spec, seed, Head::Action),
    )?
    .model;
    let eval_seed = derive_seed_str(seed, "evaluate");
    let balanced_accuracy = action.evaluate(test, spec.posterior_samples, eval_seed)?;
    let joint_accuracy = if spec.joint {
        let object = train(
            train_set,
            model,
            Head::Object,
            &head_config(spec, seed, Head::Object),
        )?
        .model;
        Some(joint_accuracy(
            &action,
            &object,
            test,
            spec.posterior_samples,
            eval_seed,
        )?)
    } else {
        None
    };
    Ok(CellResult {
        model,
        dataset: train_set.level,
        seed,
        table_hash: train_set.table_hash.clone(),
        balanced_accuracy,
        joint_accuracy,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Trains and scores one cell from scratch.
pub fn run_cell(
    model: ModelVariant,
    level: TableLevel,
    seed: u64,
    spec: &ExperimentSpec,
) -> Result<CellResult, ExperimentError> {
    spec.validate()?;
    let (tr, te) = cell_data(level, seed, spec)?;
    run_on(model, &tr, &te, seed, spec)
}

/// Every `(model, dataset, seed)` cell, in that nesting order. Each dataset is
/// generated once and shared by the models.
pub fn run_grid(spec: &ExperimentSpec) -> Result<Vec<CellOutcome>, ExperimentError> {
    spec.validate()?;
    let keys: Vec<(TableLevel, u64)> = spec
        .datasets
        .iter()
        .flat_map(|&d| spec.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let data: BTreeMap<(TableLevel, u64), Result<(Dataset, Dataset), String>> = keys
        .par_iter()
        .map(|&(d, s)| ((d, s), cell_data(d, s, spec).map_err(|e| e.to_string())))
        .collect();
    let cells: Vec<(ModelVariant, TableLevel, u64)> = spec
        .models
        .iter()
        .flat_map(|&m| keys.iter().map(move |&(d, s)| (m, d, s)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(model, dataset, seed)| {
            let result = match &data[&(dataset, seed)] {
                Ok((tr, te)) => run_on(model, tr, te, seed, spec),
                Err(e) => Err(ExperimentError::InvalidSpec(format!(
                    "dataset {dataset} seed {seed}: {e}"
                ))),
            };
            CellOutcome {
                model,
                dataset,
                seed,
                result,
            }
        })
        .collect())
}

/// Mean accuracy per `(model, dataset)` over the cells that succeeded.
pub fn cell_means(cells: &[CellOutcome]) -> BTreeMap<(ModelVariant, TableLevel), f64> {
    let mut acc: BTreeMap<(ModelVariant, TableLevel), Vec<f64>> = BTreeMap::new();
    for c in cells {
        if let Ok(r) = &c.result {
            acc.entry((c.model, c.dataset))
                .or_default()
                .push(r.balanced_accuracy);
        }
    }
    acc.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Grid results as CSV: provenance header, one row per cell, then one
/// `mean` row per `(model, dataset)`. Failed cells leave their metric
/// columns empty and are explained in trailing comments.
pub fn write_grid_csv<W: Write>(
    cells: &[CellOutcome],
    prov: &Provenance,
    mut w: W,
) -> io::Result<()> {
    let mut prov = prov.clone();
    let mut hashes: BTreeMap<(TableLevel, u64), &str> = BTreeMap::new();
    for c in cells {
        if let Ok(r) = &c.result {
            hashes.insert((c.dataset, c.seed), &r.table_hash);
        }
    }
    for ((d, s), h) in hashes {
        prov.push(&format!("table_hash {d} seed {s}"), h);
    }
    prov.write(&mut w)?;
    writeln!(
        w,
        "model,dataset,seed,balanced_accuracy,joint_accuracy,wall_time"
    )?;
    for c in cells {
        match &c.result {
            Ok(r) => writeln!(
                w,
                "{},{},{},{:.6},{},{:.3}",
                c.model.name(),
                c.dataset,
                c.seed,
                r.balanced_accuracy,
                fmt_opt(r.joint_accuracy),
                r.wall_time
            )?,
            Err(_) => writeln!(w, "{},{},{},,,", c.model.name(), c.dataset, c.seed)?,
        }
    }
    let mut groups: BTreeMap<(ModelVariant, TableLevel), Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        if let Ok(r) = &c.result {
            groups.entry((c.model, c.dataset)).or_default().push(r);
        }
    }
    for ((m, d), rs) in groups {
        let acc = mean(&rs.iter().map(|r| r.balanced_accuracy).collect::<Vec<_>>());
        let joint: Option<Vec<f64>> = rs.iter().map(|r| r.joint_accuracy).collect();
        let time = mean(&rs.iter().map(|r| r.wall_time).collect::<Vec<_>>());
        writeln!(
            w,
            "{},{},mean,{acc:.6},{},{time:.3}",
            m.name(),
            d,
            fmt_opt(joint.map(|j| mean(&j)))
        )?;
    }
    for c in cells {
        if let Err(e) = &c.result {
            writeln!(
                w,
                "# error {} {} {}: {e}",
                c.model.name(),
                c.dataset,
                c.seed
            )?;
        }
    }
    Ok(())
}

/// One point of a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub count: usize,
    pub seed: u64,
    pub balanced_accuracy: f64,
    pub wall_time: f64,
}

/// Accuracy of `model` on `level` after training on the leading `count`
/// records, for every count and seed. All counts of one seed share the
/// same test records, drawn after the largest training prefix.
pub fn run_curve(
    model: ModelVariant,
    level: TableLevel,
    counts: &[usize],
    spec: &ExperimentSpec,
) -> Result<Vec<CurvePoint>, ExperimentError> {
    if counts.is_empty() {
        return Err(ExperimentError::InvalidSpec("no sample counts".into()));
    }
    if counts.contains(&0) {
        return Err(ExperimentError::InvalidSpec("sample count 0".into()));
    }
    spec.validate()?;
    let largest = counts.iter().copied().max().unwrap_or(0);
    let datasets: Vec<(u64, Dataset)> = spec
        .seeds
        .par_iter()
        .map(|&s| generate_dataset(level, largest + spec.test_size, s).map(|d| (s, d)))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, &(u64, Dataset))> = counts
        .iter()
        .flat_map(|&c| datasets.iter().map(move |d| (c, d)))
        .collect();
    jobs.into_par_iter()
        .map(|(count, (seed, d))| {
            let tr = d.with_records(d.records[..count].to_vec());
            let te = d.with_records(d.records[largest..].to_vec());
            let r = run_on(model, &tr, &te, *seed, spec)?;
            Ok(CurvePoint {
                count,
                seed: *seed,
                balanced_accuracy: r.balanced_accuracy,
                wall_time: r.wall_time,
            })
        })
        .collect()
}

/// Mean accuracy per sample count.
pub fn curve_means(points: &[CurvePoint]) -> BTreeMap<usize, f64> {
    let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for p in points {
        by.entry(p.count).or_default().push(p.balanced_accuracy);
    }
    by.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

pub fn write_curve_csv<W: Write>(
    points: &[CurvePoint],
    prov: &Provenance,
    mut w: W,
) -> io::Result<()> {
    prov.write(&mut w)?;
    writeln!(w, "count,seed,balanced_accuracy,wall_time")?;
    for p in points {
        writeln!(
            w,
            "{},{},{:.6},{:.3}",
            p.count, p.seed, p.balanced_accuracy, p.wall_time
        )?;
    }
    for (count, m) in curve_means(points) {
        writeln!(w, "{count},mean,{m:.6},")?;
    }
    Ok(())
}
