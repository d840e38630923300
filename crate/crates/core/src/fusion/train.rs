//! Mini-batch training with AdamW (decoupled weight decay).

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{DropoutKey, FusionModel, Mode, Prepared};
use super::params::ParamSet;
use crate::domain::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Seeds batch shuffling and the dropout stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 32,
            epochs: 20,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("lr and weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    /// Training accuracy of the predictions made during the epoch's steps.
    pub accuracy: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FusionModel,
    pub epochs: Vec<EpochMetrics>,
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: ParamSet,
    v: ParamSet,
    t: i32,
}

impl AdamW {
    pub fn new(params: &ParamSet) -> Self {
        AdamW {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for (k, param) in params.params.iter_mut().enumerate() {
            let g = &grads.params[k].value;
            let m = &mut self.m.params[k].value;
            let v = &mut self.v.params[k].value;
            ndarray::Zip::from(&mut param.value)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    let update = (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
                    *w -= cfg.lr * (update + cfg.weight_decay * *w);
                });
        }
    }
}

/// Fixed seeded shuffle per epoch, sequential
/// gradient accumulation within a batch, one AdamW step per batch.
pub fn train(model: FusionModel, dataset: &[Document], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    let prepared = dataset.iter().map(|d| model.prepare(d)).collect::<Result<Vec<_>>>()?;
    if let Some(p) = prepared.iter().find(|p| p.label.is_none()) {
        return Err(Error::Contract(format!("{}: unlabeled document in training set", p.seq.doc_id)));
    }
    train_prepared(model, &prepared, cfg)
}

pub fn train_prepared(mut model: FusionModel, prepared: &[Prepared], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(&model.params);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step: u64 = 0;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.params.zeros_like();
            let weight = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for (slot, &idx) in batch.iter().enumerate() {
                let key = DropoutKey {
                    seed: cfg.seed,
                    epoch: epoch as u64,
                    step,
                    slot: slot as u64,
                };
                let (loss, out) = model.accumulate(&prepared[idx], Mode::Train(key), weight, &mut grads)?;
                batch_loss += loss;
                if Some(out.predicted()) == prepared[idx].label {
                    correct += 1;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: step as usize,
                    loss: batch_loss * weight,
                });
            }
            total_loss += batch_loss;
            opt.step(&mut model.params, &grads, cfg);
            if !model.params.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: step as usize,
                    loss: batch_loss * weight,
                });
            }
            step += 1;
        }
        history.push(EpochMetrics {
            epoch,
            loss: total_loss / prepared.len() as f64,
            accuracy: correct as f64 / prepared.len() as f64,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(TrainOutcome { model, epochs: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::CoherenceLabel::*;
    use crate::fusion::ModelConfig;
    use crate::testutil::{airport, small};

    fn data() -> Vec<Document> {
        vec![
            airport(Some(High)),
            small("a", Low, &["cat", "home", "dog"]),
            small("b", Medium, &["bird", "away", "tree"]),
            small("c", Low, &["fish", "home", "dog"]),
        ]
    }

    fn model() -> FusionModel {
        FusionModel::new(ModelConfig::toy(16, 2, 1)).unwrap()
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = TrainConfig { epochs: 3, batch_size: 2, ..Default::default() };
        let a = train(model(), &data(), &cfg).unwrap();
        let b = train(model(), &data(), &cfg).unwrap();
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.epochs.last().unwrap().loss.to_bits(), b.epochs.last().unwrap().loss.to_bits());
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let cfg = TrainConfig { epochs: 2, lr: 0.0, weight_decay: 0.0, ..Default::default() };
        let before = model();
        let after = train(before.clone(), &data(), &cfg).unwrap();
        assert_eq!(before.params, after.model.params);
    }

    #[test]
    fn memorizes_a_tiny_set() {
        let cfg = TrainConfig { epochs: 40, batch_size: 4, lr: 1e-2, ..Default::default() };
        let out = train(model(), &data(), &cfg).unwrap();
        let first = out.epochs.first().unwrap().loss;
        let last = out.epochs.last().unwrap().loss;
        assert!(last < first * 0.5, "{first} -> {last}");
    }

    #[test]
    fn rejects_unlabeled_documents() {
        let mut docs = data();
        docs[1].label = None;
        assert!(matches!(train(model(), &docs, &TrainConfig::default()), Err(Error::Contract(_))));
    }
}
