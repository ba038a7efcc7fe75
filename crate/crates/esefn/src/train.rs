//! SGD training loop, metrics, and the gradient-check driver.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DataSplit, MultiModalFeature};
use crate::error::{Error, Result};
use crate::loss::{BatchObjective, LossWeights};
use crate::tensor::{finite_diff_grad, max_rel_error, Graph, Tensor};

/// Anything the trainer can optimize: a parameterized classifier over
/// paired-modality samples.
pub trait Model {
    /// All trainable tensors, named, in a stable order.
    fn named_params(&self) -> Vec<(String, Tensor)>;
    /// Expected feature widths `(dim_r, dim_s)`.
    fn feature_dims(&self) -> (usize, usize);
    /// Forward pass over a batch, ready for one backward call.
    fn batch_objective(
        &self,
        batch: &[MultiModalFeature],
        weights: &LossWeights,
    ) -> Result<BatchObjective>;
    /// Logits of the head whose accuracy the model reports.
    fn primary_logits(&self, g: &Graph, sample: &MultiModalFeature) -> Result<Tensor>;
    /// Final per-head test accuracies. Heads a model does not have stay
    /// `None`; the default reports the primary head as the fused one.
    fn test_accuracies(&self, data: &[MultiModalFeature]) -> Result<TestAccuracies> {
        if data.is_empty() {
            return Ok(TestAccuracies::default());
        }
        Ok(TestAccuracies {
            rgb: None,
            skeleton: None,
            fused: Some(primary_accuracy(self, data)?),
        })
    }
}

/// Optimizer settings. The stock protocol is momentum 0.9, learning rate
/// 0.1, weight decay 1e-4, batch size 32, 30 epochs.
#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl OptimConfig {
    /// The stock protocol with a chosen seed.
    pub fn protocol(seed: u64) -> OptimConfig {
        OptimConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 32,
            epochs: 30,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight decay must be finite and >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".to_string()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// SGD with momentum and coupled weight decay.
///
/// Per parameter: `v <- momentum * v + grad + weight_decay * param`,
/// then `param <- param - lr * v`. Velocity starts at zero; gradients are
/// zeroed after every step.
pub struct Sgd {
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(config: &OptimConfig) -> Sgd {
        Sgd {
            learning_rate: config.learning_rate,
            momentum: config.momentum,
            weight_decay: config.weight_decay,
            velocity: Vec::new(),
        }
    }

    /// One update step over `params`, consuming and zeroing their grads.
    pub fn step(&mut self, params: &[(String, Tensor)]) -> Result<()> {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(Error::Usage(format!(
                "optimizer was built for {} parameter groups, got {}",
                self.velocity.len(),
                params.len()
            )));
        }
        for ((name, param), vel) in params.iter().zip(&mut self.velocity) {
            let grad = param.grad().ok_or_else(|| {
                Error::Usage(format!("parameter '{name}' has no gradient buffer"))
            })?;
            if !grad.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    op: format!("gradient of '{name}'"),
                });
            }
            let mut values = param.values();
            for i in 0..values.len() {
                vel[i] = self.momentum * vel[i] + grad[i] + self.weight_decay * values[i];
                values[i] -= self.learning_rate * vel[i];
            }
            param.set_values(&values).map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFinite {
                    op: format!("update of '{name}'"),
                },
                other => other,
            })?;
            param.zero_grad();
        }
        Ok(())
    }
}

/// Final per-head test accuracies; `None` where a model has no such head.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TestAccuracies {
    pub rgb: Option<f64>,
    pub skeleton: Option<f64>,
    pub fused: Option<f64>,
}

/// Loss means and training accuracy for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub l_total: f64,
    pub l_r: f64,
    pub l_s: f64,
    pub l_rs: f64,
    pub train_acc: f64,
}

/// Everything `train` records: one row per epoch plus final test accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub final_test: TestAccuracies,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "epoch,l_total,l_r,l_s,l_rs,train_acc";

    /// Per-epoch rows as CSV, including the header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, e) in self.epochs.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                e.l_total,
                e.l_r,
                e.l_s,
                e.l_rs,
                e.train_acc
            ));
        }
        out
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose primary-head argmax matches the label.
pub fn primary_accuracy<M: Model + ?Sized>(model: &M, data: &[MultiModalFeature]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("cannot score an empty dataset".to_string()));
    }
    let mut correct = 0;
    for sample in data {
        let g = Graph::new();
        let logits = model.primary_logits(&g, sample)?;
        if argmax_lowest(&logits.values()) == sample.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn check_dims(model: &dyn Model, data: &[MultiModalFeature], what: &str) -> Result<()> {
    let (dim_r, dim_s) = model.feature_dims();
    for sample in data {
        if sample.f_r.len() != dim_r || sample.f_s.len() != dim_s {
            return Err(Error::Input(format!(
                "{what} sample {} has dims ({}, {}), model expects ({dim_r}, {dim_s})",
                sample.sample_id,
                sample.f_r.len(),
                sample.f_s.len()
            )));
        }
    }
    Ok(())
}

/// Trains `model` on the split with seeded-shuffle SGD.
///
/// Deterministic: the same seed, config, data, and initial parameters
/// produce an identical report and identical final parameters. Each epoch
/// reshuffles the training set with the run's generator and keeps the last
/// partial batch.
pub fn train(
    model: &dyn Model,
    data: &DataSplit,
    optim: &OptimConfig,
    weights: &LossWeights,
) -> Result<TrainReport> {
    optim.validate()?;
    if data.train.is_empty() {
        return Err(Error::Input("training split is empty".to_string()));
    }
    check_dims(model, &data.train, "train")?;
    check_dims(model, &data.test, "test")?;

    let params = model.named_params();
    let mut sgd = Sgd::new(optim);
    let mut rng = ChaCha8Rng::seed_from_u64(optim.seed);
    let mut epochs = Vec::with_capacity(optim.epochs);
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for _ in 0..optim.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        let mut seen = 0.0;
        for chunk in order.chunks(optim.batch_size) {
            let batch: Vec<MultiModalFeature> =
                chunk.iter().map(|&i| data.train[i].clone()).collect();
            let obj = model.batch_objective(&batch, weights)?;
            obj.graph.backward(&obj.total)?;
            sgd.step(&params)?;
            let w = batch.len() as f64;
            sums[0] += obj.breakdown.l_total * w;
            sums[1] += obj.breakdown.l_r * w;
            sums[2] += obj.breakdown.l_s * w;
            sums[3] += obj.breakdown.l_rs * w;
            seen += w;
        }
        epochs.push(EpochStats {
            l_total: sums[0] / seen,
            l_r: sums[1] / seen,
            l_s: sums[2] / seen,
            l_rs: sums[3] / seen,
            train_acc: primary_accuracy(model, &data.train)?,
        });
    }

    Ok(TrainReport {
        epochs,
        final_test: model.test_accuracies(&data.test)?,
    })
}

/// One parameter group's worst analytic-vs-numeric gradient disagreement.
#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub name: String,
    pub max_err: f64,
}

impl GroupCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_err < tolerance
    }
}

/// Compares every parameter group's backward gradient against central
/// finite differences of the batch objective.
///
/// Gradients are zeroed before and after, so the model can go straight
/// back to training.
pub fn check_model_gradients(
    model: &dyn Model,
    batch: &[MultiModalFeature],
    weights: &LossWeights,
    eps: f64,
) -> Result<Vec<GroupCheck>> {
    let params = model.named_params();
    for (_, p) in &params {
        p.zero_grad();
    }
    let obj = model.batch_objective(batch, weights)?;
    obj.graph.backward(&obj.total)?;

    let mut checks = Vec::with_capacity(params.len());
    for (name, param) in &params {
        let analytic = param
            .grad()
            .ok_or_else(|| Error::Usage(format!("parameter '{name}' has no gradient buffer")))?;
        let numeric = finite_diff_grad(
            |_| Ok(model.batch_objective(batch, weights)?.breakdown.l_total),
            param,
            eps,
        )?;
        checks.push(GroupCheck {
            name: name.clone(),
            max_err: max_rel_error(&analytic, &numeric.values()),
        });
    }
    for (_, p) in &params {
        p.zero_grad();
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f64]) -> (String, Tensor) {
        (
            "w".to_string(),
            Tensor::from_vec(&[values.len()], values.to_vec())
                .unwrap()
                .with_grad(),
        )
    }

    fn sgd_with(lr: f64, momentum: f64, decay: f64) -> Sgd {
        Sgd::new(&OptimConfig {
            learning_rate: lr,
            momentum,
            weight_decay: decay,
            batch_size: 1,
            epochs: 1,
            seed: 0,
        })
    }

    #[test]
    fn plain_step() {
        let p = param(&[1.0]);
        p.1.accumulate_grad(&[1.0]);
        let mut sgd = sgd_with(0.1, 0.0, 0.0);
        sgd.step(std::slice::from_ref(&p)).unwrap();
        assert_eq!(p.1.values(), vec![0.9]);
        assert_eq!(p.1.grad().unwrap(), vec![0.0]); // zeroed by the step
    }

    #[test]
    fn momentum_velocity_recurrence() {
        // Constant gradient g: first update lr*g, second lr*(1.9*g).
        let p = param(&[0.0]);
        let mut sgd = sgd_with(0.1, 0.9, 0.0);

        p.1.accumulate_grad(&[2.0]);
        sgd.step(std::slice::from_ref(&p)).unwrap();
        let after_first = p.1.values()[0];
        assert!((after_first - (-0.1 * 2.0)).abs() < 1e-15);

        p.1.accumulate_grad(&[2.0]);
        sgd.step(std::slice::from_ref(&p)).unwrap();
        let second_update = p.1.values()[0] - after_first;
        assert!((second_update - (-0.1 * 1.9 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn decay_only_step() {
        let p = param(&[1.0]);
        p.1.accumulate_grad(&[0.0]);
        let mut sgd = sgd_with(0.1, 0.0, 1e-4);
        sgd.step(std::slice::from_ref(&p)).unwrap();
        assert!((p.1.values()[0] - (1.0 - 1e-5)).abs() < 1e-18);
    }

    #[test]
    fn missing_grad_is_a_usage_error() {
        let p = ("w".to_string(), Tensor::scalar(1.0).unwrap()); // untracked
        let mut sgd = sgd_with(0.1, 0.0, 0.0);
        assert!(matches!(
            sgd.step(std::slice::from_ref(&p)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::protocol(0).validate().is_ok());
        let mut c = OptimConfig::protocol(0);
        c.epochs = 0;
        assert!(c.validate().is_err());
        let mut c = OptimConfig::protocol(0);
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        let mut c = OptimConfig::protocol(0);
        c.learning_rate = 0.0; // allowed: a no-op training run
        assert!(c.validate().is_ok());
        c.learning_rate = f64::NAN;
        assert!(c.validate().is_err());
    }

    #[test]
    fn argmax_ties_to_lowest_index() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_lowest(&[5.0]), 0);
        assert_eq!(argmax_lowest(&[2.0, 2.0]), 0);
    }

    #[test]
    fn csv_header_is_pinned() {
        assert_eq!(TrainReport::CSV_HEADER, "epoch,l_total,l_r,l_s,l_rs,train_acc");
    }
}
