use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::model::{loss, loss_and_gradient, McMrConvModel, Mode};
use crate::error::{Error, Result};

/// Inputs (row-major descriptors) with their regression targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_refs(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(Vec::as_slice).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Set from the run's root seed, never read from config files.
    #[serde(skip)]
    pub seed: u64,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            l2: 1e-5,
            batch_size: 64,
            max_epochs: 500,
            patience: 20,
            seed: 0,
            dropout: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean squared error over the epoch's mini-batches, in training mode.
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: McMrConvModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

pub fn mse_of(model: &McMrConvModel, data: &Dataset) -> Result<f64> {
    let preds = model.predict_many(&data.input_refs())?;
    crate::data::mse(&preds, &data.targets)
}

/// Mini-batch Adam with per-epoch shuffling and early stopping on
/// validation MSE. Deterministic for a fixed seed.
pub fn train(initial: McMrConvModel, train_set: &Dataset, val_set: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    let mut model = initial;
    let shapes: Vec<usize> = model.tensors().iter().map(|(_, t)| t.len()).collect();
    let mut adam = AdamState::new(config.learning_rate, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = (model.clone(), f64::INFINITY, 0);
    let mut history = Vec::new();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sum_sq = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let inputs: Vec<&[f64]> = chunk.iter().map(|&i| train_set.inputs[i].as_slice()).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| train_set.targets[i]).collect();
            let mode = if config.dropout > 0.0 {
                Mode::Train { dropout: config.dropout, rng: &mut rng }
            } else {
                Mode::Eval
            };
            let (total, mse, grad) = loss_and_gradient(&model, &inputs, &targets, config.l2, mode)?;
            if !total.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite training loss at epoch {epoch}, batch {b} (mse {mse}, penalty {})",
                    total - mse
                )));
            }
            sum_sq += mse * chunk.len() as f64;
            let grads: Vec<&[f64]> = grad.tensors().into_iter().map(|(_, t)| t).collect();
            let params: Vec<&mut [f64]> = model.tensors_mut().into_iter().map(|(_, t)| t).collect();
            adam.update(params, grads)?;
        }
        let val_mse = mse_of(&model, val_set)?;
        if !val_mse.is_finite() {
            return Err(Error::Numerical(format!("non-finite validation MSE at epoch {epoch}")));
        }
        history.push(EpochStats { epoch, train_mse: sum_sq / train_set.len() as f64, val_mse });
        if val_mse < best.1 {
            best = (model.clone(), val_mse, epoch);
        } else if epoch - best.2 >= config.patience {
            break;
        }
    }
    let (model, best_val_mse, best_epoch) = best;
    Ok(TrainOutcome { model, history, best_epoch, best_val_mse })
}

/// `epoch,train_mse,val_mse` with round-trip float formatting.
pub fn write_history_csv<W: Write>(mut w: W, history: &[EpochStats]) -> Result<()> {
    writeln!(w, "epoch,train_mse,val_mse")?;
    for h in history {
        writeln!(w, "{},{:e},{:e}", h.epoch, h.train_mse, h.val_mse)?;
    }
    Ok(())
}

/// Per-tensor worst relative error between analytic and central-difference
/// gradients.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub per_tensor: Vec<(String, f64)>,
    pub checked: usize,
}

/// Relative error below this magnitude of both gradients is measured
/// against the floor instead.
pub const GRAD_CHECK_FLOOR: f64 = 1e-7;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Compares every parameter's analytic gradient with a central difference
/// of step `h`. Dropout masks are redrawn from `seed` for every evaluation
/// so all evaluations see the same masks.
pub fn check_gradients(
    model: &McMrConvModel,
    data: &Dataset,
    l2: f64,
    dropout: f64,
    seed: u64,
    h: f64,
) -> Result<GradCheckReport> {
    let inputs = data.input_refs();
    let eval = |m: &McMrConvModel| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mode = if dropout > 0.0 { Mode::Train { dropout, rng: &mut rng } } else { Mode::Eval };
        loss(m, &inputs, &data.targets, l2, mode)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode = if dropout > 0.0 { Mode::Train { dropout, rng: &mut rng } } else { Mode::Eval };
    let (_, _, grad) = loss_and_gradient(model, &inputs, &data.targets, l2, mode)?;

    let names = model.tensor_names();
    let analytic: Vec<Vec<f64>> = grad.tensors().into_iter().map(|(_, t)| t.to_vec()).collect();
    let mut probe = model.clone();
    let mut per_tensor = Vec::with_capacity(names.len());
    let mut checked = 0;
    for (t, name) in names.into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..analytic[t].len() {
            let original = probe.tensors()[t].1[i];
            probe.tensors_mut()[t].1[i] = original + h;
            let up = eval(&probe)?;
            probe.tensors_mut()[t].1[i] = original - h;
            let down = eval(&probe)?;
            probe.tensors_mut()[t].1[i] = original;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic[t][i], numeric));
            checked += 1;
        }
        per_tensor.push((name, worst));
    }
    let max_rel_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, per_tensor, checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{ColumnSpec, ConvSpec, Init, ModelSpec, Orientation};
    use rand::Rng;

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            n_bins: 6,
            n_steps: 4,
            columns: vec![
                ColumnSpec {
                    orientation: Orientation::Bins,
                    layers: vec![
                        ConvSpec { filter_sizes: vec![2, 3], filters: 3 },
                        ConvSpec { filter_sizes: vec![1, 2], filters: 2 },
                    ],
                },
                ColumnSpec {
                    orientation: Orientation::Steps,
                    layers: vec![
                        ConvSpec { filter_sizes: vec![2], filters: 2 },
                        ConvSpec { filter_sizes: vec![1, 2], filters: 2 },
                    ],
                },
            ],
            hidden: vec![6, 5],
        }
    }

    fn random_data(n: usize, len: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let targets = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
        Dataset::new(inputs, targets).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = McMrConvModel::new(tiny_spec(), Init::Scaled, 1).unwrap();
        let data = random_data(3, 24, 2);
        let report = check_gradients(&model, &data, 1e-3, 0.5, 3, 1e-5).unwrap();
        assert_eq!(report.checked, model.param_count());
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let model = McMrConvModel::new(ModelSpec { hidden: vec![4], ..ModelSpec::gd_mlp(3, 3) }, Init::UnitGaussian, 4).unwrap();
        let data = random_data(4, 9, 5);
        let report = check_gradients(&model, &data, 0.0, 0.0, 0, 1e-5).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn full_batch_descent_is_monotone() {
        let mut model = McMrConvModel::new(tiny_spec(), Init::Scaled, 8).unwrap();
        let data = random_data(8, 24, 9);
        let inputs = data.input_refs();
        let lr = 1e-3;
        let mut previous = f64::INFINITY;
        for _ in 0..100 {
            let (total, _, grad) = loss_and_gradient(&model, &inputs, &data.targets, 1e-4, Mode::Eval).unwrap();
            assert!(total <= previous + 1e-15, "{total} > {previous}");
            previous = total;
            for ((_, p), (_, g)) in model.tensors_mut().into_iter().zip(grad.tensors()) {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= lr * gi;
                }
            }
        }
    }

    #[test]
    fn constant_labels_are_learned() {
        let spec = ModelSpec { hidden: vec![8], ..ModelSpec::gd_mlp(2, 3) };
        let model = McMrConvModel::new(spec, Init::Scaled, 0).unwrap();
        let mut data = random_data(40, 6, 1);
        data.targets.iter_mut().for_each(|y| *y = 1.5);
        let val = data.clone();
        let config = TrainConfig { max_epochs: 300, batch_size: 8, learning_rate: 0.01, dropout: 0.0, l2: 0.0, ..Default::default() };
        let out = train(model, &data, &val, &config).unwrap();
        // label variance is zero; the bias alone reaches it
        assert!(mse_of(&out.model, &data).unwrap() < 1e-3);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let model = McMrConvModel::new(tiny_spec(), Init::Scaled, 2).unwrap();
        let data = random_data(20, 24, 3);
        let val = random_data(5, 24, 4);
        let config = TrainConfig { max_epochs: 5, batch_size: 6, ..Default::default() };
        let a = train(model.clone(), &data, &val, &config).unwrap();
        let b = train(model, &data, &val, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let mut csv_a = Vec::new();
        write_history_csv(&mut csv_a, &a.history).unwrap();
        assert!(String::from_utf8(csv_a).unwrap().starts_with("epoch,train_mse,val_mse\n1,"));
    }

    #[test]
    fn early_stopping_returns_best_snapshot() {
        let model = McMrConvModel::new(tiny_spec(), Init::Scaled, 2).unwrap();
        let data = random_data(20, 24, 3);
        let val = random_data(5, 24, 4);
        let config = TrainConfig { max_epochs: 40, patience: 3, batch_size: 4, learning_rate: 0.05, ..Default::default() };
        let out = train(model, &data, &val, &config).unwrap();
        let best = out.history.iter().map(|h| h.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(best, out.best_val_mse);
        assert_eq!(mse_of(&out.model, &val).unwrap(), best);
        assert!(out.history.len() <= 40);
    }

    #[test]
    fn divergence_is_reported() {
        let model = McMrConvModel::new(tiny_spec(), Init::Scaled, 2).unwrap();
        let mut data = random_data(4, 24, 3);
        data.targets[0] = f64::INFINITY;
        let config = TrainConfig { max_epochs: 1, ..Default::default() };
        let err = train(model, &data, &data.clone(), &config).unwrap_err();
        assert!(err.is_numerical());
    }
}
