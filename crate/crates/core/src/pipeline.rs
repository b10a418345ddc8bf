//! BFA-ELM: min-max normalization, train/test splitting, the encoding of
//! bacterium positions as ELM hidden layers, the validation-error fitness,
//! the hidden-node sweep and the paired ELM vs BFA-ELM comparison.
//!
//! A bacterium position of dimension `L*n + L` encodes the input weights
//! (row-major per hidden node) followed by the offsets, each mapped from
//! `[0, 1]` to `[-1, 1]` as `2p - 1`. Output weights are never searched; they
//! are always the least-squares solution for the decoded hidden layer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bfa::{self, BfaConfig, Fitness};
use crate::data::{Dataset, Record, FEATURE_NAMES};
use crate::elm::{self, ElmModel, ElmParams};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::numerics::{Activation, Matrix, RandomStream};

pub fn normalize(x: f64, min: f64, max: f64) -> Result<f64> {
    if !(min < max) {
        return Err(Error::DegenerateFeature(format!("range [{min}, {max}]")));
    }
    Ok((x - min) / (max - min))
}

pub fn denormalize(x_norm: f64, min: f64, max: f64) -> Result<f64> {
    if !(min < max) {
        return Err(Error::DegenerateFeature(format!("range [{min}, {max}]")));
    }
    Ok(x_norm * (max - min) + min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>) -> Range {
        values.into_iter().fold(
            Range {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |r, v| Range {
                min: r.min.min(v),
                max: r.max.max(v),
            },
        )
    }

    fn contains(&self, other: &Range) -> bool {
        self.min <= other.min && other.max <= self.max
    }
}

/// Per-column min/max of a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    /// In `HR, RA, RR, BI, FT` order.
    pub features: Vec<Range>,
    pub target: Range,
}

impl NormStats {
    /// Statistics of `data`. Fails on a constant feature column; a constant
    /// target is allowed and normalized with a unit span.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let stats = NormStats::observe(data)?;
        for (range, name) in stats.features.iter().zip(FEATURE_NAMES) {
            if !(range.min < range.max) {
                return Err(Error::DegenerateFeature(name.into()));
            }
        }
        Ok(stats)
    }

    /// Statistics without the degeneracy check.
    pub fn observe(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("no records to normalize".into()));
        }
        let features = (0..FEATURE_NAMES.len())
            .map(|i| Range::of(data.records.iter().map(|r| r.features()[i])))
            .collect();
        Ok(NormStats {
            features,
            target: Range::of(data.records.iter().map(|r| r.fpi)),
        })
    }

    /// Whether every column of `other` lies inside these ranges.
    pub fn covers(&self, other: &NormStats) -> bool {
        self.features
            .iter()
            .zip(&other.features)
            .all(|(a, b)| a.contains(b))
            && self.target.contains(&other.target)
    }

    fn target_span(&self) -> f64 {
        let span = self.target.max - self.target.min;
        if span > 0.0 {
            span
        } else {
            1.0
        }
    }

    pub fn normalize_features(&self, record: &Record) -> [f64; 5] {
        let mut out = record.features();
        for (v, r) in out.iter_mut().zip(&self.features) {
            *v = (*v - r.min) / (r.max - r.min);
        }
        out
    }

    pub fn normalize_target(&self, fpi: f64) -> f64 {
        (fpi - self.target.min) / self.target_span()
    }

    pub fn denormalize_target(&self, value: f64) -> f64 {
        value * self.target_span() + self.target.min
    }

    /// Normalized feature matrix and target vector.
    pub fn transform(&self, data: &Dataset) -> Result<(Matrix, Vec<f64>)> {
        let rows: Vec<[f64; 5]> = data
            .records
            .iter()
            .map(|r| self.normalize_features(r))
            .collect();
        let targets = data.records.iter().map(|r| self.normalize_target(r.fpi)).collect();
        Ok((Matrix::from_rows(&rows)?, targets))
    }
}

fn checked_split_sizes(n: usize, ratio: f64) -> Result<(usize, usize)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train ratio must be in (0, 1), got {ratio}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 records to split, got {n}"
        )));
    }
    let train = (ratio * n as f64).round() as usize;
    if train == 0 || train >= n {
        return Err(Error::InvalidArgument(format!(
            "train ratio {ratio} leaves an empty split of {n} records"
        )));
    }
    Ok((train, n - train))
}

/// Random partition into `round(ratio * n)` training and the remaining test records.
/// Each part keeps the original record order.
pub fn split(dataset: &Dataset, train_ratio: f64, stream: &mut RandomStream) -> Result<(Dataset, Dataset)> {
    let (n_train, _) = checked_split_sizes(dataset.len(), train_ratio)?;
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    stream.shuffle(&mut idx);
    let (train, test) = idx.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(train), dataset.subset(test)))
}

/// Position length for `hidden` nodes over `inputs` features.
pub fn position_dim(inputs: usize, hidden: usize) -> usize {
    hidden * inputs + hidden
}

pub fn decode_position(
    position: &[f64],
    inputs: usize,
    hidden: usize,
    activation: Activation,
) -> Result<ElmParams> {
    let dim = position_dim(inputs, hidden);
    if position.len() != dim || inputs == 0 || hidden == 0 {
        return Err(Error::DimensionMismatch(format!(
            "position has {} components, n={inputs} L={hidden} needs {dim}",
            position.len()
        )));
    }
    let affine = |p: &f64| 2.0 * p - 1.0;
    let (w, b) = position.split_at(hidden * inputs);
    let weights = Matrix::new(hidden, inputs, w.iter().map(affine).collect())?;
    ElmParams::new(weights, b.iter().map(affine).collect(), activation)
}

fn mean_squared_error(model: &ElmModel, x: &Matrix, t: &[f64]) -> Result<f64> {
    Ok(model.loss(x, t)? / t.len() as f64)
}

/// Validation MSE of the hidden layer encoded by `position`, with output
/// weights fitted on the training portion.
#[allow(clippy::too_many_arguments)]
pub fn fitness_of_position(
    position: &[f64],
    train_x: &Matrix,
    train_t: &[f64],
    val_x: &Matrix,
    val_t: &[f64],
    inputs: usize,
    hidden: usize,
    activation: Activation,
) -> Result<f64> {
    if val_t.is_empty() {
        return Err(Error::InvalidArgument("validation set is empty".into()));
    }
    let params = decode_position(position, inputs, hidden, activation)?;
    let model = elm::train_with_params(params, train_x, train_t)?;
    mean_squared_error(&model, val_x, val_t)
}

/// Fitness callback handed to the optimizer for one hidden-node count.
struct PositionFitness<'a> {
    holdout: &'a Holdout,
    hidden: usize,
    activation: Activation,
}

impl Fitness for PositionFitness<'_> {
    fn evaluate(&self, position: &[f64]) -> Result<f64> {
        let h = self.holdout;
        fitness_of_position(
            position,
            &h.fit_x,
            &h.fit_t,
            &h.val_x,
            &h.val_t,
            h.fit_x.cols(),
            self.hidden,
            self.activation,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub l_candidates: Vec<usize>,
    pub activation: Activation,
    pub train_ratio: f64,
    pub validation_ratio: f64,
    /// `dim` is ignored; it is set per hidden-node candidate.
    pub bfa: BfaConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            l_candidates: vec![5, 10, 15, 20],
            activation: Activation::Sigmoid,
            train_ratio: 0.75,
            validation_ratio: 0.2,
            bfa: BfaConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_candidates.is_empty() || self.l_candidates.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden-node candidates must be non-empty and all ≥ 1".into(),
            ));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train ratio must be in (0, 1), got {}",
                self.train_ratio
            )));
        }
        if !(0.0..1.0).contains(&self.validation_ratio) {
            return Err(Error::InvalidArgument(format!(
                "validation ratio must be in [0, 1), got {}",
                self.validation_ratio
            )));
        }
        BfaConfig {
            dim: 1,
            ..self.bfa.clone()
        }
        .validate()
    }

    fn sorted_candidates(&self) -> Vec<usize> {
        let mut c = self.l_candidates.clone();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Normalized training data split into a fitting part and a validation part.
///
/// When the validation part would be empty both parts hold the whole split.
#[derive(Clone, Debug)]
pub struct Holdout {
    pub fit_x: Matrix,
    pub fit_t: Vec<f64>,
    pub val_x: Matrix,
    pub val_t: Vec<f64>,
    pub all_x: Matrix,
    pub all_t: Vec<f64>,
}

impl Holdout {
    fn new(x: Matrix, t: Vec<f64>, validation_ratio: f64, stream: &mut RandomStream) -> Result<Self> {
        let n = t.len();
        let n_val = (validation_ratio * n as f64).round() as usize;
        if n_val == 0 || n_val >= n {
            // no usable validation part: score on the training data itself
            return Ok(Holdout {
                fit_x: x.clone(),
                fit_t: t.clone(),
                val_x: x.clone(),
                val_t: t.clone(),
                all_x: x,
                all_t: t,
            });
        }
        let mut idx: Vec<usize> = (0..n).collect();
        stream.shuffle(&mut idx);
        let (val, fit) = idx.split_at_mut(n_val);
        fit.sort_unstable();
        val.sort_unstable();
        let pick = |ids: &[usize]| ids.iter().map(|&i| t[i]).collect::<Vec<_>>();
        Ok(Holdout {
            fit_x: x.select_rows(fit)?,
            fit_t: pick(fit),
            val_x: x.select_rows(val)?,
            val_t: pick(val),
            all_x: x,
            all_t: t,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Random hidden layer per candidate.
    Elm,
    /// Hidden layer searched by bacterial foraging.
    BfaElm,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Elm => "elm",
            Mode::BfaElm => "bfa-elm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub hidden_nodes: usize,
    pub best_fitness: f64,
    pub evaluations: usize,
}

/// Trained model plus the statistics needed to predict in target units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub norm_stats: NormStats,
    pub model: ElmModel,
}

impl Predictor {
    pub fn predict(&self, record: &Record) -> Result<f64> {
        let x = self.norm_stats.normalize_features(record);
        Ok(self.norm_stats.denormalize_target(self.model.predict(&x)?))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.records.iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks that the statistics and the model agree on the five features.
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Predictor = serde_json::from_str(text)?;
        let inputs = p.model.params().inputs();
        if p.norm_stats.features.len() != FEATURE_NAMES.len() || inputs != FEATURE_NAMES.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {inputs} inputs and {} feature ranges, data has {} features",
                p.norm_stats.features.len(),
                FEATURE_NAMES.len()
            )));
        }
        if let Some((i, _)) = p.norm_stats.features.iter().enumerate().find(|(_, r)| !(r.min < r.max)) {
            return Err(Error::DegenerateFeature(FEATURE_NAMES[i].into()));
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: Mode,
    pub config: PipelineConfig,
    pub chosen_l: usize,
    /// Fitness (validation MSE, normalized units) of the chosen hidden layer.
    pub best_fitness: f64,
    /// Encoded hidden layer of the winner; empty for plain ELM.
    pub best_position: Vec<f64>,
    /// Best-so-far trace of the winning optimizer run; empty for plain ELM.
    pub bfa_trace: Vec<f64>,
    pub evaluations: usize,
    pub candidates: Vec<CandidateSummary>,
    pub norm_stats: NormStats,
    /// Refitted on the whole training split, in normalized units.
    pub model: ElmModel,
}

impl FitReport {
    pub fn predictor(&self) -> Predictor {
        Predictor {
            norm_stats: self.norm_stats.clone(),
            model: self.model.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Smallest fitness wins; ties go to the smaller hidden-node count.
fn pick_best<T>(results: Vec<(usize, f64, T)>) -> (usize, f64, T) {
    results
        .into_iter()
        .reduce(|best, cand| {
            if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                cand
            } else {
                best
            }
        })
        .expect("at least one candidate")
}

/// The exact fitting/validation data the fitness of `fit_bfa_elm` and
/// `fit_plain_elm` is computed on for this training set and config.
pub fn validation_holdout(train_set: &Dataset, cfg: &PipelineConfig) -> Result<Holdout> {
    Ok(prepare(train_set, cfg)?.holdout)
}

struct Prepared {
    stats: NormStats,
    holdout: Holdout,
    root: RandomStream,
}

fn prepare(train_set: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let stats = NormStats::fit(train_set)?;
    let (x, t) = stats.transform(train_set)?;
    let root = RandomStream::new(cfg.seed);
    let holdout = Holdout::new(x, t, cfg.validation_ratio, &mut root.child_named("validation"))?;
    Ok(Prepared {
        stats,
        holdout,
        root,
    })
}

/// Searches the hidden layer with bacterial foraging for every candidate `L`
/// and refits the winner's output weights on the whole training split.
pub fn fit_bfa_elm(train_set: &Dataset, cfg: &PipelineConfig) -> Result<FitReport> {
    let Prepared {
        stats,
        holdout,
        root,
    } = prepare(train_set, cfg)?;
    let inputs = holdout.all_x.cols();
    let bfa_root = root.child_named("bfa");

    let runs: Vec<Result<(usize, f64, bfa::BfaResult)>> = cfg
        .sorted_candidates()
        .into_par_iter()
        .map(|hidden| {
            let fitness = PositionFitness {
                holdout: &holdout,
                hidden,
                activation: cfg.activation,
            };
            let bfa_cfg = BfaConfig {
                dim: position_dim(inputs, hidden),
                ..cfg.bfa.clone()
            };
            let result = bfa::optimize(&fitness, &bfa_cfg, &bfa_root.child(hidden as u64))?;
            Ok((hidden, result.best_fitness, result))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let candidates = runs
        .iter()
        .map(|(l, f, r)| CandidateSummary {
            hidden_nodes: *l,
            best_fitness: *f,
            evaluations: r.evaluations,
        })
        .collect::<Vec<_>>();
    let evaluations = candidates.iter().map(|c| c.evaluations).sum();
    let (chosen_l, best_fitness, result) = pick_best(runs);

    let params = decode_position(&result.best_position, inputs, chosen_l, cfg.activation)?;
    let model = elm::train_with_params(params, &holdout.all_x, &holdout.all_t)?;
    Ok(FitReport {
        mode: Mode::BfaElm,
        config: cfg.clone(),
        chosen_l,
        best_fitness,
        best_position: result.best_position,
        bfa_trace: result.trace,
        evaluations,
        candidates,
        norm_stats: stats,
        model,
    })
}

/// Baseline: one random hidden layer per candidate `L`, the candidate with
/// the lowest validation MSE refitted on the whole training split.
pub fn fit_plain_elm(train_set: &Dataset, cfg: &PipelineConfig) -> Result<FitReport> {
    let Prepared {
        stats,
        holdout,
        root,
    } = prepare(train_set, cfg)?;
    let inputs = holdout.all_x.cols();
    let elm_root = root.child_named("elm");

    let mut runs = Vec::new();
    for hidden in cfg.sorted_candidates() {
        let mut s = elm_root.child(hidden as u64);
        let params = elm::init_params(inputs, hidden, cfg.activation, &mut s)?;
        let model = elm::train_with_params(params.clone(), &holdout.fit_x, &holdout.fit_t)?;
        let fitness = mean_squared_error(&model, &holdout.val_x, &holdout.val_t)?;
        runs.push((hidden, fitness, params));
    }
    let candidates = runs
        .iter()
        .map(|(l, f, _)| CandidateSummary {
            hidden_nodes: *l,
            best_fitness: *f,
            evaluations: 1,
        })
        .collect::<Vec<_>>();
    let evaluations = candidates.len();
    let (chosen_l, best_fitness, params) = pick_best(runs);
    let model = elm::train_with_params(params, &holdout.all_x, &holdout.all_t)?;
    Ok(FitReport {
        mode: Mode::Elm,
        config: cfg.clone(),
        chosen_l,
        best_fitness,
        best_position: Vec::new(),
        bfa_trace: Vec::new(),
        evaluations,
        candidates,
        norm_stats: stats,
        model,
    })
}

pub fn fit(train_set: &Dataset, cfg: &PipelineConfig, mode: Mode) -> Result<FitReport> {
    match mode {
        Mode::Elm => fit_plain_elm(train_set, cfg),
        Mode::BfaElm => fit_bfa_elm(train_set, cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed_index: usize,
    pub seed: u64,
    pub elm_chosen_l: usize,
    pub bfa_elm_chosen_l: usize,
    pub elm: MetricsReport,
    pub bfa_elm: MetricsReport,
    /// Statistics recomputed on the test split, for drift inspection only.
    pub test_norm_stats: NormStats,
    /// Set when some test column leaves the training min/max range.
    pub test_outside_train_range: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianMetrics {
    pub mae: f64,
    pub mse: f64,
    pub mape: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Medians {
    pub elm: MedianMetrics,
    pub bfa_elm: MedianMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: PipelineConfig,
    pub n_seeds: usize,
    pub dataset_size: usize,
    pub rows: Vec<SeedRow>,
    pub medians: Medians,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn medians_of<'a>(reports: impl Iterator<Item = &'a MetricsReport> + Clone) -> MedianMetrics {
    let col = |f: fn(&MetricsReport) -> f64| median(&reports.clone().map(f).collect::<Vec<_>>());
    MedianMetrics {
        mae: col(|r| r.mae),
        mse: col(|r| r.mse),
        mape: col(|r| r.mape),
        accuracy: col(|r| r.accuracy),
    }
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One paired row per seed: both models' MAE, MSE and MAPE side by side.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "seed_index,seed,elm_MAE,elm_MSE,elm_MAPE,bfa_elm_MAE,bfa_elm_MSE,bfa_elm_MAPE\n",
        );
        for row in &self.rows {
            let (e, b) = (&row.elm, &row.bfa_elm);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.seed_index, row.seed, e.mae, e.mse, e.mape, b.mae, b.mse, b.mape
            ));
        }
        out
    }
}

fn compare_one(dataset: &Dataset, cfg: &PipelineConfig, seed_index: usize, seed: u64) -> Result<SeedRow> {
    let root = RandomStream::new(seed);
    let (train, test) = split(dataset, cfg.train_ratio, &mut root.child_named("split"))?;
    let seed_cfg = PipelineConfig {
        seed,
        ..cfg.clone()
    };
    let elm_fit = fit_plain_elm(&train, &seed_cfg)?;
    let bfa_fit = fit_bfa_elm(&train, &seed_cfg)?;
    let truth = test.targets();
    let elm_pred = elm_fit.predictor().predict_dataset(&test)?;
    let bfa_pred = bfa_fit.predictor().predict_dataset(&test)?;
    let test_norm_stats = NormStats::observe(&test)?;
    Ok(SeedRow {
        seed_index,
        seed,
        elm_chosen_l: elm_fit.chosen_l,
        bfa_elm_chosen_l: bfa_fit.chosen_l,
        elm: metrics::report(&truth, &elm_pred)?,
        bfa_elm: metrics::report(&truth, &bfa_pred)?,
        test_outside_train_range: !elm_fit.norm_stats.covers(&test_norm_stats),
        test_norm_stats,
    })
}

/// Paired comparison over `n_seeds` independent splits. Metrics are computed
/// on each test split in original target units.
pub fn compare_models(dataset: &Dataset, cfg: &PipelineConfig, n_seeds: usize) -> Result<ComparisonReport> {
    cfg.validate()?;
    if n_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    checked_split_sizes(dataset.len(), cfg.train_ratio)?;
    let seeds = RandomStream::new(cfg.seed).child_named("compare");
    let rows: Vec<Result<SeedRow>> = (0..n_seeds)
        .into_par_iter()
        .map(|i| compare_one(dataset, cfg, i, seeds.child_seed(i as u64)))
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let medians = Medians {
        elm: medians_of(rows.iter().map(|r| &r.elm)),
        bfa_elm: medians_of(rows.iter().map(|r| &r.bfa_elm)),
    };
    Ok(ComparisonReport {
        config: cfg.clone(),
        n_seeds,
        dataset_size: dataset.len(),
        rows,
        medians,
    })
}
