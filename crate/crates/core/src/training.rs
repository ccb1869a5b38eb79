//! Bag-level training with negative log-likelihood, mini-batch optimizer
//! steps and early stopping on validation accuracy.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Bag, BagSet, DatasetError, FeatureStore, LabelPolicy, SegmentTable, Split};
use crate::evaluation::argmax;
use crate::model::{BagPrediction, MattModel, ModelConfig, ModelError};
use crate::numeric::{Algorithm, NumericError, Optimizer};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("diverged: {0}")]
    Diverged(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

impl From<NumericError> for TrainError {
    fn from(e: NumericError) -> Self {
        match e {
            NumericError::Diverged(msg) => TrainError::Diverged(msg),
            other => TrainError::Model(ModelError::Numeric(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub bags_per_batch: usize,
    pub optimizer: Algorithm,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    pub label_policy: LabelPolicy,
    pub feature_set: String,
    /// Weight each bag's loss by inverse genre frequency. Off by default.
    pub class_reweighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            bags_per_batch: 32,
            optimizer: Algorithm::Adam,
            learning_rate: 1e-3,
            seed: 0,
            early_stop_patience: 10,
            label_policy: LabelPolicy::Majority,
            feature_set: "1to9".into(),
            class_reweighting: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.bags_per_batch == 0 {
            return Err(TrainError::InvalidConfig("bags_per_batch must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    /// `None` when there are no validation bags.
    pub val_accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
}

/// `−log p_gold` and its gradient with respect to the genre scores, `p − onehot(gold)`.
pub fn nll_loss(prediction: &BagPrediction, gold: usize) -> (f64, Vec<f64>) {
    let p = &prediction.probabilities;
    let loss = -p[gold].max(1e-300).ln();
    let mut grad = p.clone();
    grad[gold] -= 1.0;
    (loss, grad)
}

struct PreparedBag {
    members: Vec<Vec<f64>>,
    genre: usize,
}

fn prepare<'a>(
    bags: impl Iterator<Item = &'a Bag>,
    features: &FeatureStore,
) -> Result<Vec<PreparedBag>, DatasetError> {
    bags.map(|b| {
        Ok(PreparedBag {
            members: features.bag_vectors(b)?,
            genre: b.genre_id,
        })
    })
    .collect()
}

fn bag_accuracy(model: &MattModel, bags: &[PreparedBag]) -> Result<f64, ModelError> {
    let mut correct = 0usize;
    for b in bags {
        if argmax(&model.forward_bag(&b.members)?.probabilities) == b.genre {
            correct += 1;
        }
    }
    Ok(correct as f64 / bags.len() as f64)
}

/// Trains on the training bags of `bags`, selecting the parameters with the
/// best validation bag accuracy.
///
/// Results depend only on (bags, features, configs): bag order is shuffled by
/// a PRNG seeded from `cfg.seed` and gradients are summed in batch order.
pub fn train(
    bags: &BagSet,
    features: &FeatureStore,
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(MattModel, TrainLog), TrainError> {
    cfg.validate()?;
    if features.dim() != model_cfg.encoder.input_dim {
        return Err(DatasetError::FeatureDim(format!(
            "feature set has {} columns, encoder expects {}",
            features.dim(),
            model_cfg.encoder.input_dim
        ))
        .into());
    }
    let train_bags = prepare(bags.split(Split::Train), features)?;
    let val_bags = prepare(bags.split(Split::Validation), features)?;
    let n_genres = model_cfg.n_genres;
    let mut model = MattModel::new(model_cfg, cfg.seed)?;
    let mut log = TrainLog::default();
    if cfg.epochs == 0 || train_bags.is_empty() {
        return Ok((model, log));
    }

    let class_weight: Vec<f64> = if cfg.class_reweighting {
        let mut counts = vec![0usize; n_genres];
        train_bags.iter().for_each(|b| counts[b.genre] += 1);
        let present = counts.iter().filter(|&&c| c > 0).count() as f64;
        counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { train_bags.len() as f64 / (present * c as f64) })
            .collect()
    } else {
        vec![1.0; n_genres]
    };

    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.params());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..train_bags.len()).collect();
    let mut scratch = model.params().zeroed_clone();
    let mut best: Option<(f64, MattModel)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.bags_per_batch) {
            scratch.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let bag = &train_bags[i];
                let forward = model.forward_traced(&bag.members)?;
                let (loss, mut d_scores) = nll_loss(&forward.prediction, bag.genre);
                if !loss.is_finite() {
                    return Err(TrainError::Diverged(format!("non-finite loss at epoch {epoch}")));
                }
                let w = class_weight[bag.genre];
                loss_sum += loss;
                d_scores.iter_mut().for_each(|d| *d *= w * scale);
                model.backward(&forward, &d_scores, &mut scratch)?;
            }
            model.params_mut().accumulate_grads(&scratch, 1.0)?;
            optimizer.step(model.params_mut())?;
        }
        let mean_loss = loss_sum / train_bags.len() as f64;
        let val_accuracy = if val_bags.is_empty() {
            None
        } else {
            Some(bag_accuracy(&model, &val_bags)?)
        };
        log.epochs.push(EpochLog {
            epoch,
            loss: mean_loss,
            val_accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });
        log::debug!("epoch {epoch}: loss {mean_loss:.6} val {val_accuracy:?}");

        let Some(acc) = val_accuracy else {
            log.best_epoch = epoch;
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, model.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
                log::info!("early stop at epoch {epoch}; best epoch {}", log.best_epoch);
                break;
            }
        }
    }
    let model = best.map_or(model, |(_, m)| m);
    Ok((model, log))
}

/// Every segment as its own bag, in track id order.
pub fn segment_bags(table: &SegmentTable) -> BagSet {
    let mut records: Vec<_> = table.records.iter().collect();
    records.sort_by(|a, b| a.track_id.cmp(&b.track_id));
    BagSet {
        bags: records
            .into_iter()
            .map(|r| Bag {
                artist_id: r.artist_id.clone(),
                album_id: r.album_id.clone(),
                split: r.split,
                segment_ids: vec![r.track_id.clone()],
                genre_id: r.genre_id,
            })
            .collect(),
        vocabulary: table.vocabulary.clone(),
        provenance: format!("{} segments as singleton bags", table.len()),
    }
}

/// Segment-level baseline: plain softmax classification of single segments,
/// sharing all other machinery with [`train`].
pub fn train_segment_baseline(
    table: &SegmentTable,
    features: &FeatureStore,
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(MattModel, TrainLog), TrainError> {
    train(&segment_bags(table), features, model_cfg, cfg)
}
