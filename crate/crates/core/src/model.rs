//! Multi-instance attention classifier.
//!
//! A bag of segment feature vectors is encoded segment by segment, the
//! embeddings are pooled by a single learned attention query into one bag
//! representation, and a discriminative matrix scores the genres:
//!
//! ```text
//! s_k = encoder(x_k)
//! e_k = tanh(w · [s_k; q]) + b          (scalar per segment)
//! a   = softmax(e)
//! g   = Σ_k a_k s_k
//! o   = M g,   p = softmax(o)
//! ```
//!
//! With [`Aggregator::Mean`] the weights are fixed at `1/m`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numeric::{ops, xavier_uniform_with, Matrix, NumericError, ParamStore};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("empty bag")]
    EmptyBag,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    /// Unweighted mean of the member embeddings.
    Mean,
    /// Learned selective attention.
    #[default]
    Matt,
}

impl std::str::FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "matt" => Ok(Self::Matt),
            other => Err(format!("unknown aggregator `{other}` (expected mean or matt)")),
        }
    }
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Matt => "matt",
        })
    }
}

/// Segment encoder shape: affine layers with tanh between them and no
/// activation after the last one. No hidden layers gives a linear encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl EncoderConfig {
    fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    pub fn depth(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub n_genres: usize,
    pub aggregator: Aggregator,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.encoder.layer_dims().contains(&0) {
            return Err(ModelError::InvalidConfig("all layer sizes must be positive".into()));
        }
        if self.n_genres < 2 {
            return Err(ModelError::InvalidConfig("need at least two genres".into()));
        }
        Ok(())
    }
}

pub const QUERY: &str = "attention.query";
pub const ATTENTION_WEIGHT: &str = "attention.weight";
pub const ATTENTION_BIAS: &str = "attention.bias";
pub const DISCRIMINATIVE: &str = "discriminative";

pub fn layer_weight_name(layer: usize) -> String {
    format!("encoder.{layer}.weight")
}

pub fn layer_bias_name(layer: usize) -> String {
    format!("encoder.{layer}.bias")
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    layers: Vec<(usize, usize)>,
    query: usize,
    attention_weight: usize,
    attention_bias: usize,
    discriminative: usize,
}

/// Prediction for one bag.
#[derive(Debug, Clone, PartialEq)]
pub struct BagPrediction {
    pub probabilities: Vec<f64>,
    pub attention_weights: Vec<f64>,
    pub bag_representation: Vec<f64>,
}

impl BagPrediction {
    /// Highest-probability genre; ties go to the lowest genre id.
    pub fn argmax(&self) -> usize {
        crate::evaluation::argmax(&self.probabilities)
    }
}

/// Per-segment activations kept for the backward pass.
#[derive(Debug, Clone)]
struct SegmentTrace {
    /// Input of every layer; `inputs[0]` is the raw feature vector.
    inputs: Vec<Vec<f64>>,
    embedding: Vec<f64>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct BagForward {
    traces: Vec<SegmentTrace>,
    /// `tanh(w · [s_k; q])` per segment.
    squashed: Vec<f64>,
    pub prediction: BagPrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MattModel {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl MattModel {
    /// Xavier-uniform weights (including the attention query), zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let dims = config.encoder.layer_dims();
        for (l, pair) in dims.windows(2).enumerate() {
            params.insert(layer_weight_name(l), xavier_uniform_with(pair[1], pair[0], &mut rng))?;
            params.insert(layer_bias_name(l), Matrix::zeros(pair[1], 1))?;
        }
        let d = config.encoder.output_dim;
        params.insert(QUERY, xavier_uniform_with(d, 1, &mut rng))?;
        params.insert(ATTENTION_WEIGHT, xavier_uniform_with(1, 2 * d, &mut rng))?;
        params.insert(ATTENTION_BIAS, Matrix::zeros(1, 1))?;
        params.insert(DISCRIMINATIVE, xavier_uniform_with(config.n_genres, d, &mut rng))?;
        Self::from_params(config, params)
    }

    /// Wraps existing parameters, checking every name and shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        let lookup = |name: &str, shape: (usize, usize)| -> Result<usize, ModelError> {
            let idx = params
                .index_of(name)
                .ok_or_else(|| ModelError::InvalidConfig(format!("missing parameter `{name}`")))?;
            let got = params.value(idx).shape();
            if got != shape {
                return Err(ModelError::Numeric(NumericError::Shape(format!(
                    "`{name}` is {}x{}, expected {}x{}",
                    got.0, got.1, shape.0, shape.1
                ))));
            }
            Ok(idx)
        };
        let dims = config.encoder.layer_dims();
        let mut layers = Vec::new();
        for (l, pair) in dims.windows(2).enumerate() {
            layers.push((
                lookup(&layer_weight_name(l), (pair[1], pair[0]))?,
                lookup(&layer_bias_name(l), (pair[1], 1))?,
            ));
        }
        let d = config.encoder.output_dim;
        let layout = Layout {
            layers,
            query: lookup(QUERY, (d, 1))?,
            attention_weight: lookup(ATTENTION_WEIGHT, (1, 2 * d))?,
            attention_bias: lookup(ATTENTION_BIAS, (1, 1))?,
            discriminative: lookup(DISCRIMINATIVE, (config.n_genres, d))?,
        };
        let expected = 2 * layout.layers.len() + 4;
        if params.len() != expected {
            return Err(ModelError::InvalidConfig(format!(
                "expected {expected} parameters, found {}",
                params.len()
            )));
        }
        Ok(Self {
            config,
            params,
            layout,
        })
    }

    /// Recovers the model configuration from parameter shapes alone.
    pub fn infer_config(params: &ParamStore, aggregator: Aggregator) -> Result<ModelConfig, ModelError> {
        let mut dims = Vec::new();
        let mut layer = 0;
        while let Some(w) = params.get(&layer_weight_name(layer)) {
            if layer == 0 {
                dims.push(w.value.cols());
            }
            dims.push(w.value.rows());
            layer += 1;
        }
        if dims.len() < 2 {
            return Err(ModelError::InvalidConfig("no encoder layers found".into()));
        }
        let m = params
            .get(DISCRIMINATIVE)
            .ok_or_else(|| ModelError::InvalidConfig(format!("missing parameter `{DISCRIMINATIVE}`")))?;
        let output_dim = dims[dims.len() - 1];
        Ok(ModelConfig {
            encoder: EncoderConfig {
                input_dim: dims[0],
                hidden_dims: dims[1..dims.len() - 1].to_vec(),
                output_dim,
            },
            n_genres: m.value.rows(),
            aggregator,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    pub fn n_genres(&self) -> usize {
        self.config.n_genres
    }

    pub fn set_aggregator(&mut self, aggregator: Aggregator) {
        self.config.aggregator = aggregator;
    }

    fn encode_traced(&self, features: &[f64]) -> Result<SegmentTrace, ModelError> {
        if features.len() != self.config.encoder.input_dim {
            return Err(NumericError::Shape(format!(
                "feature vector has length {}, encoder expects {}",
                features.len(),
                self.config.encoder.input_dim
            ))
            .into());
        }
        let last = self.layout.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layout.layers.len());
        let mut h = features.to_vec();
        for (l, &(w, b)) in self.layout.layers.iter().enumerate() {
            let z = ops::affine(self.params.value(w), &h, self.params.value(b).as_slice())?;
            inputs.push(h);
            h = if l == last { z } else { ops::tanh(&z) };
        }
        Ok(SegmentTrace {
            inputs,
            embedding: h,
        })
    }

    /// Embedding of one segment.
    pub fn encode_segment(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.encode_traced(features)?.embedding)
    }

    /// Attention logits squashed by tanh, before the bias: `tanh(w · [s_k; q])`.
    fn squashed_scores(&self, embeddings: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let w = self.params.value(self.layout.attention_weight);
        let q = self.params.value(self.layout.query).as_slice();
        embeddings
            .iter()
            .map(|s| {
                let score = w.matvec(&ops::vconcat(s, q))?;
                Ok(score[0].tanh())
            })
            .collect()
    }

    /// Attention weights over the given embeddings.
    pub fn attention_weights(&self, embeddings: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        if embeddings.is_empty() {
            return Err(ModelError::EmptyBag);
        }
        Ok(self.weights_from_squashed(&self.squashed_scores(embeddings)?, embeddings.len()))
    }

    fn weights_from_squashed(&self, squashed: &[f64], m: usize) -> Vec<f64> {
        match self.config.aggregator {
            Aggregator::Mean => vec![1.0 / m as f64; m],
            // The bias b_s shifts every logit t_k + b_s equally, so it cancels
            // in the softmax; leaving it out keeps the cancellation exact in
            // floating point.
            Aggregator::Matt => ops::softmax(squashed),
        }
    }

    /// Convex combination `Σ_k a_k s_k`.
    pub fn bag_representation(weights: &[f64], embeddings: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        Ok(ops::weighted_sum(weights, embeddings)?)
    }

    /// Genre scores `o = M g` and their softmax.
    pub fn genre_scores(&self, representation: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let scores = self.params.value(self.layout.discriminative).matvec(representation)?;
        let probs = ops::softmax(&scores);
        Ok((scores, probs))
    }

    /// Full forward pass keeping the intermediate values for [`Self::backward`].
    pub fn forward_traced<F: AsRef<[f64]>>(&self, bag: &[F]) -> Result<BagForward, ModelError> {
        if bag.is_empty() {
            return Err(ModelError::EmptyBag);
        }
        let traces = bag
            .iter()
            .map(|x| self.encode_traced(x.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let embeddings: Vec<Vec<f64>> = traces.iter().map(|t| t.embedding.clone()).collect();
        let squashed = match self.config.aggregator {
            Aggregator::Matt => self.squashed_scores(&embeddings)?,
            Aggregator::Mean => Vec::new(),
        };
        let weights = self.weights_from_squashed(&squashed, embeddings.len());
        let representation = Self::bag_representation(&weights, &embeddings)?;
        let (_, probabilities) = self.genre_scores(&representation)?;
        Ok(BagForward {
            traces,
            squashed,
            prediction: BagPrediction {
                probabilities,
                attention_weights: weights,
                bag_representation: representation,
            },
        })
    }

    pub fn forward_bag<F: AsRef<[f64]>>(&self, bag: &[F]) -> Result<BagPrediction, ModelError> {
        Ok(self.forward_traced(bag)?.prediction)
    }

    /// Segment-level inference: the segment is scored as a singleton bag, so
    /// no album or artist information is needed.
    pub fn predict_segment(&self, features: &[f64]) -> Result<BagPrediction, ModelError> {
        self.forward_bag(&[features])
    }

    /// Back-propagates `d_scores = ∂loss/∂o` and adds the parameter gradients
    /// into `grads`, which must share this model's parameter layout.
    pub fn backward(
        &self,
        forward: &BagForward,
        d_scores: &[f64],
        grads: &mut ParamStore,
    ) -> Result<(), ModelError> {
        let layout = &self.layout;
        let pred = &forward.prediction;
        let g = &pred.bag_representation;
        let weights = &pred.attention_weights;
        let m_idx = layout.discriminative;

        // o = M g
        grads.grad_mut(m_idx).add_outer(d_scores, g, 1.0);
        let d_rep = self.params.value(m_idx).matvec_transposed(d_scores)?;

        // g = Σ a_k s_k
        let embeddings: Vec<Vec<f64>> = forward.traces.iter().map(|t| t.embedding.clone()).collect();
        let (d_weights, mut d_embeddings) = ops::weighted_sum_backward(weights, &embeddings, &d_rep)?;

        if self.config.aggregator == Aggregator::Matt {
            // a = softmax(t + b), t_k = tanh(w · [s_k; q])
            let d_logits = ops::softmax_backward(weights, &d_weights)?;
            grads.grad_mut(layout.attention_bias).as_mut_slice()[0] += d_logits.iter().sum::<f64>();
            let d = self.config.encoder.output_dim;
            let w = self.params.value(layout.attention_weight).as_slice();
            let q = self.params.value(layout.query).as_slice();
            let (w_s, w_q) = w.split_at(d);
            let mut d_w = vec![0.0; 2 * d];
            let mut d_q = vec![0.0; d];
            for (k, (&dl, &t)) in d_logits.iter().zip(&forward.squashed).enumerate() {
                let dz = dl * (1.0 - t * t);
                if dz == 0.0 {
                    continue;
                }
                let s = &embeddings[k];
                for i in 0..d {
                    d_w[i] += dz * s[i];
                    d_w[d + i] += dz * q[i];
                    d_q[i] += dz * w_q[i];
                    d_embeddings[k][i] += dz * w_s[i];
                }
            }
            add_into(grads.grad_mut(layout.attention_weight).as_mut_slice(), &d_w);
            add_into(grads.grad_mut(layout.query).as_mut_slice(), &d_q);
        }

        let last = layout.layers.len() - 1;
        for (trace, d_emb) in forward.traces.iter().zip(d_embeddings) {
            let mut dy = d_emb;
            for l in (0..layout.layers.len()).rev() {
                let (w_idx, b_idx) = layout.layers[l];
                if l != last {
                    // output of hidden layer l is the input of layer l + 1
                    dy = ops::tanh_backward(&trace.inputs[l + 1], &dy)?;
                }
                let w = self.params.value(w_idx);
                let x = &trace.inputs[l];
                grads.grad_mut(w_idx).add_outer(&dy, x, 1.0);
                add_into(grads.grad_mut(b_idx).as_mut_slice(), &dy);
                if l > 0 {
                    dy = w.matvec_transposed(&dy)?;
                }
            }
        }
        Ok(())
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}
