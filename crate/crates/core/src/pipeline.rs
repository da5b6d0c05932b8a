//! In-memory stages shared by the command line and the tests: descriptor
//! fitting over splits, feature extraction and model fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stage_seed, LabeledInstance, Split, SplitSet};
use crate::descriptor::{
    compute_hks, fit_stats, histogram_descriptor, DescriptorConfig, DescriptorStats, GraphDescriptor, HksMatrix,
    PixelStats,
};
use crate::error::{Error, Result};
use crate::features::{default_l2_grid, extract_features, ridge_select, RidgeModel};
use crate::nn::{train, Init, McMrConvModel, ModelSpec, TrainConfig, TrainOutcome};
use crate::nn::train::Dataset;

/// Fixed stage numbers for [`stage_seed`].
pub mod stage {
    pub const GENERATE: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const DOWNSAMPLE: u64 = 2;
    pub const FEATURES: u64 = 3;
    pub const INIT: u64 = 4;
    pub const TRAIN: u64 = 5;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Deepgraph,
    GdLinear,
    GdMlp,
    GdCnn,
    FeaturesLinear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Deepgraph, ModelKind::GdLinear, ModelKind::GdMlp, ModelKind::GdCnn, ModelKind::FeaturesLinear];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Deepgraph => "deepgraph",
            ModelKind::GdLinear => "gd-linear",
            ModelKind::GdMlp => "gd-mlp",
            ModelKind::GdCnn => "gd-cnn",
            ModelKind::FeaturesLinear => "features-linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }

    /// Network architecture, or `None` for the ridge models.
    pub fn spec(self, n_bins: usize, n_steps: usize) -> Option<ModelSpec> {
        match self {
            ModelKind::Deepgraph => Some(ModelSpec::deepgraph(n_bins, n_steps)),
            ModelKind::GdMlp => Some(ModelSpec::gd_mlp(n_bins, n_steps)),
            ModelKind::GdCnn => Some(ModelSpec::gd_cnn(n_bins, n_steps)),
            ModelKind::GdLinear | ModelKind::FeaturesLinear => None,
        }
    }

    pub fn uses_features(self) -> bool {
        self == ModelKind::FeaturesLinear
    }
}

pub fn split_index(s: Split) -> usize {
    match s {
        Split::Train => 0,
        Split::Val => 1,
        Split::Test => 2,
    }
}

/// Descriptors of every split, binned and normalized with statistics
/// fitted on the training split alone.
#[derive(Clone, Debug)]
pub struct DescribedSplits {
    pub config: DescriptorConfig,
    pub stats: DescriptorStats,
    pub pixel: PixelStats,
    pub descriptors: [Vec<GraphDescriptor>; 3],
    pub normalized: [Vec<Vec<f64>>; 3],
}

pub fn hks_all(instances: &[LabeledInstance], config: &DescriptorConfig) -> Result<Vec<HksMatrix>> {
    let steps = config.steps()?;
    instances
        .par_iter()
        .map(|inst| compute_hks(&inst.graph, &steps, config.max_eigenpairs))
        .collect()
}

pub fn describe_splits(splits: &SplitSet, config: &DescriptorConfig) -> Result<DescribedSplits> {
    config.validate()?;
    if splits.train.is_empty() {
        return Err(Error::InvalidArgument("the training split is empty".into()));
    }
    let hks: Vec<Vec<HksMatrix>> = Split::ALL.iter().map(|&s| hks_all(splits.get(s), config)).collect::<Result<_>>()?;
    let stats = fit_stats(&hks[0])?;
    let descriptors: Vec<Vec<GraphDescriptor>> = hks
        .iter()
        .map(|hs| hs.par_iter().map(|h| histogram_descriptor(h, &stats, config.n_bins)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let pixel = PixelStats::fit(&descriptors[0])?;
    let normalized: Vec<Vec<Vec<f64>>> = descriptors
        .iter()
        .map(|ds| ds.iter().map(|d| pixel.normalize(d)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let [d0, d1, d2]: [Vec<GraphDescriptor>; 3] = descriptors.try_into().expect("three splits");
    let [n0, n1, n2]: [Vec<Vec<f64>>; 3] = normalized.try_into().expect("three splits");
    Ok(DescribedSplits { config: config.clone(), stats, pixel, descriptors: [d0, d1, d2], normalized: [n0, n1, n2] })
}

/// Structural feature vectors for one split, in instance order.
pub fn features_of(instances: &[LabeledInstance], root_seed: u64) -> Vec<Vec<f64>> {
    let seed = stage_seed(root_seed, stage::FEATURES);
    instances
        .par_iter()
        .map(|inst| extract_features(&inst.graph, seed ^ inst.origin).to_vec())
        .collect()
}

pub fn labels_of(instances: &[LabeledInstance]) -> Vec<f64> {
    instances.iter().map(|i| i.scaled_label).collect()
}

#[derive(Clone, Debug)]
pub enum FittedModel {
    Net { kind: ModelKind, outcome: TrainOutcome },
    Ridge { kind: ModelKind, model: RidgeModel, val_mse: f64 },
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Net { kind, .. } | FittedModel::Ridge { kind, .. } => *kind,
        }
    }

    pub fn val_mse(&self) -> f64 {
        match self {
            FittedModel::Net { outcome, .. } => outcome.best_val_mse,
            FittedModel::Ridge { val_mse, .. } => *val_mse,
        }
    }

    pub fn predict_many(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        match self {
            FittedModel::Net { outcome, .. } => outcome.model.predict_many(inputs),
            FittedModel::Ridge { model, .. } => model.predict_many(inputs),
        }
    }
}

/// Everything a model fit needs besides the data.
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub train: TrainConfig,
    pub init: Init,
    pub root_seed: u64,
    pub n_bins: usize,
    pub n_steps: usize,
    pub l2_grid: Vec<f64>,
}

impl FitOptions {
    pub fn new(train: TrainConfig, init: Init, root_seed: u64, n_bins: usize, n_steps: usize) -> Self {
        Self { train, init, root_seed, n_bins, n_steps, l2_grid: default_l2_grid() }
    }
}

/// Fits `kind` on the training inputs, selecting on the validation inputs
/// (early stopping for networks, penalty for ridge).
pub fn fit_model(
    kind: ModelKind,
    train_x: &[Vec<f64>],
    train_y: &[f64],
    val_x: &[Vec<f64>],
    val_y: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    match kind.spec(opts.n_bins, opts.n_steps) {
        Some(spec) => {
            let model = McMrConvModel::new(spec, opts.init, stage_seed(opts.root_seed, stage::INIT))?;
            let train_set = Dataset::new(train_x.to_vec(), train_y.to_vec())?;
            let val_set = Dataset::new(val_x.to_vec(), val_y.to_vec())?;
            let outcome = train(model, &train_set, &val_set, &opts.train)?;
            Ok(FittedModel::Net { kind, outcome })
        }
        None => {
            let tx: Vec<&[f64]> = train_x.iter().map(Vec::as_slice).collect();
            let vx: Vec<&[f64]> = val_x.iter().map(Vec::as_slice).collect();
            let (model, val_mse) = ridge_select(&tx, train_y, &vx, val_y, &opts.l2_grid)?;
            Ok(FittedModel::Ridge { kind, model, val_mse })
        }
    }
}
