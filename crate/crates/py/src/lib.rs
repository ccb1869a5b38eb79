//! Python bindings: feature extraction, synthetic data, the attention model,
//! training and evaluation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use matt_core::dataset::{generate_synthetic, SynthConfig, SyntheticData};
use matt_core::dsp::{self, AudioSignal, FeatureConfig};
use matt_core::evaluation::{self, EvalMode};
use matt_core::formats;
use matt_core::model::{Aggregator, EncoderConfig, MattModel, ModelConfig};
use matt_core::numeric::{finite_difference_check, ops, Algorithm, ParamStore};
use matt_core::training::{self, nll_loss, TrainConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

/// Audio feature extractor with the default 44.1 kHz configuration.
#[pyclass(name = "FeatureExtractor")]
struct PyFeatureExtractor {
    inner: dsp::FeatureExtractor,
}

#[pymethods]
impl PyFeatureExtractor {
    #[new]
    #[pyo3(signature = (sample_rate=44_100, n_mels=96, mel_frames=1360))]
    fn new(sample_rate: u32, n_mels: usize, mel_frames: usize) -> PyResult<Self> {
        let config = FeatureConfig {
            sample_rate_hz: sample_rate,
            n_mels,
            mel_frames,
            ..FeatureConfig::default()
        };
        Ok(Self {
            inner: dsp::FeatureExtractor::new(config).map_err(value_error)?,
        })
    }

    /// Summary vector of every feature set, keyed by set name.
    fn extract(&self, samples: Vec<f32>, sample_rate: u32) -> PyResult<BTreeMap<String, Vec<f64>>> {
        let signal = AudioSignal::new(samples, sample_rate).map_err(value_error)?;
        let features = self.inner.extract(&signal).map_err(value_error)?;
        dsp::all_feature_set_names()
            .into_iter()
            .map(|name| Ok((name.clone(), features.feature_set(&name).map_err(value_error)?)))
            .collect()
    }

    /// Log-mel spectrogram as a list of mel-band rows.
    fn log_mel(&self, samples: Vec<f32>, sample_rate: u32) -> PyResult<Vec<Vec<f32>>> {
        let signal = AudioSignal::new(samples, sample_rate).map_err(value_error)?;
        let mel = self.inner.log_mel_spectrogram(&signal).map_err(value_error)?;
        Ok(mel.values.chunks(mel.n_frames).map(<[f32]>::to_vec).collect())
    }
}

/// Seeded long-tail dataset with its Bayes oracle.
#[pyclass(name = "SyntheticDataset")]
struct PySyntheticDataset {
    inner: SyntheticData,
}

#[pymethods]
impl PySyntheticDataset {
    #[new]
    #[pyo3(signature = (n_genres=16, zipf_exponent=1.2, head_count=400, feature_dim=32, noise_rate=0.4, seed=0))]
    fn new(
        n_genres: usize,
        zipf_exponent: f64,
        head_count: usize,
        feature_dim: usize,
        noise_rate: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = SynthConfig {
            n_genres,
            zipf_exponent,
            head_count,
            feature_dim,
            noise_rate,
            seed,
            ..SynthConfig::default()
        };
        Ok(Self {
            inner: generate_synthetic(&cfg).map_err(value_error)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.table.len()
    }

    #[getter]
    fn genres(&self) -> Vec<String> {
        self.inner.table.vocabulary.names.clone()
    }

    #[getter]
    fn train_counts(&self) -> Vec<usize> {
        self.inner.table.vocabulary.train_counts.clone()
    }

    /// `(segment ids, genre id)` of every bag in `split`.
    fn bags(&self, split: &str) -> PyResult<Vec<(Vec<String>, usize)>> {
        let split = matt_core::dataset::Split::parse(split)
            .ok_or_else(|| PyValueError::new_err(format!("unknown split `{split}`")))?;
        Ok(self
            .inner
            .bags
            .split(split)
            .map(|b| (b.segment_ids.clone(), b.genre_id))
            .collect())
    }

    fn features(&self, track_id: &str) -> PyResult<Vec<f64>> {
        self.inner.features.vector(track_id).map_err(value_error)
    }

    fn oracle_posterior(&self, bag: Vec<Vec<f64>>) -> Vec<f64> {
        self.inner.oracle.posterior(&bag)
    }

    fn metadata_csv(&self) -> PyResult<String> {
        let mut out = Vec::new();
        matt_core::dataset::write_metadata(&self.inner.table, &mut out).map_err(value_error)?;
        String::from_utf8(out).map_err(value_error)
    }
}

/// Multi-instance attention classifier.
#[pyclass(name = "Model")]
struct PyModel {
    inner: MattModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (input_dim, n_genres, hidden=Vec::new(), embedding_dim=32, aggregator="matt", seed=0))]
    fn new(
        input_dim: usize,
        n_genres: usize,
        hidden: Vec<usize>,
        embedding_dim: usize,
        aggregator: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let config = ModelConfig {
            encoder: EncoderConfig {
                input_dim,
                hidden_dims: hidden,
                output_dim: embedding_dim,
            },
            n_genres,
            aggregator: parse(aggregator)?,
        };
        Ok(Self {
            inner: MattModel::new(config, seed).map_err(value_error)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, aggregator="matt"))]
    fn load(path: PathBuf, aggregator: &str) -> PyResult<Self> {
        let params = formats::load_checkpoint(&path).map_err(value_error)?;
        let config = MattModel::infer_config(&params, parse(aggregator)?).map_err(value_error)?;
        Ok(Self {
            inner: MattModel::from_params(config, params).map_err(value_error)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        formats::save_checkpoint(&path, self.inner.params()).map_err(value_error)
    }

    #[getter]
    fn aggregator(&self) -> String {
        self.inner.config().aggregator.to_string()
    }

    #[getter]
    fn n_genres(&self) -> usize {
        self.inner.n_genres()
    }

    /// `(probabilities, attention weights)` for one bag.
    fn forward_bag(&self, bag: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let p = self.inner.forward_bag(&bag).map_err(value_error)?;
        Ok((p.probabilities, p.attention_weights))
    }

    fn predict_segment(&self, features: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.predict_segment(&features).map_err(value_error)?.probabilities)
    }

    /// Largest relative error between analytic and central-difference
    /// gradients of the loss on one bag.
    #[pyo3(signature = (bag, gold, seed=0))]
    fn grad_check(&self, bag: Vec<Vec<f64>>, gold: usize, seed: u64) -> PyResult<f64> {
        if gold >= self.inner.n_genres() {
            return Err(PyValueError::new_err("gold genre out of range"));
        }
        let forward = self.inner.forward_traced(&bag).map_err(value_error)?;
        let (_, d_scores) = nll_loss(&forward.prediction, gold);
        let mut grads = self.inner.params().zeroed_clone();
        self.inner.backward(&forward, &d_scores, &mut grads).map_err(value_error)?;
        let mut analytic = self.inner.params().clone();
        for (p, g) in analytic.params_mut().iter_mut().zip(grads.params()) {
            p.grad = g.grad.clone();
        }
        let config = self.inner.config().clone();
        let loss = |p: &ParamStore| {
            let probe = MattModel::from_params(config.clone(), p.clone()).expect("same layout");
            nll_loss(&probe.forward_bag(&bag).expect("valid bag"), gold).0
        };
        Ok(finite_difference_check(loss, &analytic, 1e-5, 1e-4, seed).max_rel_error())
    }
}

/// Trains a model on a synthetic dataset; returns the model and per-epoch losses.
#[pyfunction]
#[pyo3(signature = (data, hidden=Vec::new(), embedding_dim=32, aggregator="matt", epochs=50, batch_size=16,
                    learning_rate=3e-3, optimizer="adam", patience=10, segment_level=false, seed=0))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    data: &PySyntheticDataset,
    hidden: Vec<usize>,
    embedding_dim: usize,
    aggregator: &str,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    optimizer: &str,
    patience: usize,
    segment_level: bool,
    seed: u64,
) -> PyResult<(PyModel, Vec<f64>)> {
    let data = &data.inner;
    let model_cfg = ModelConfig {
        encoder: EncoderConfig {
            input_dim: data.features.dim(),
            hidden_dims: hidden,
            output_dim: embedding_dim,
        },
        n_genres: data.table.vocabulary.len(),
        aggregator: parse::<Aggregator>(aggregator)?,
    };
    let cfg = TrainConfig {
        epochs,
        bags_per_batch: batch_size,
        optimizer: parse::<Algorithm>(optimizer)?,
        learning_rate,
        seed,
        early_stop_patience: patience,
        feature_set: matt_core::dataset::SYNTH_FAMILY.into(),
        ..TrainConfig::default()
    };
    let (model, log) = py
        .detach(|| {
            if segment_level {
                training::train_segment_baseline(&data.table, &data.features, model_cfg, &cfg)
            } else {
                training::train(&data.bags, &data.features, model_cfg, &cfg)
            }
        })
        .map_err(value_error)?;
    Ok((PyModel { inner: model }, log.epochs.iter().map(|e| e.loss).collect()))
}

/// Test-split report as a dict: overall accuracy, average precision and
/// `top_k[(subset, k)]`.
#[pyfunction]
#[pyo3(signature = (model, data, mode="bag", oracle=false))]
fn evaluate<'py>(
    py: Python<'py>,
    model: &PyModel,
    data: &PySyntheticDataset,
    mode: &str,
    oracle: bool,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let mode: EvalMode = parse(mode)?;
    let d = &data.inner;
    let (subsets, ks) = (evaluation::DEFAULT_SUBSETS, evaluation::DEFAULT_KS);
    let report = if oracle {
        evaluation::evaluate_oracle(&d.oracle, &d.bags, &d.features, mode, &subsets, &ks)
    } else {
        evaluation::evaluate(&model.inner, &d.bags, &d.features, mode, &subsets, &ks)
    }
    .map_err(value_error)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("units", report.units)?;
    out.set_item("accuracy", report.overall_accuracy)?;
    out.set_item("average_precision", report.pr.average_precision)?;
    let top_k = pyo3::types::PyDict::new(py);
    for e in &report.top_k {
        top_k.set_item((e.max_train_count, e.k), e.accuracy)?;
    }
    out.set_item("top_k", top_k)?;
    Ok(out)
}

#[pyfunction]
fn softmax(x: Vec<f64>) -> Vec<f64> {
    ops::softmax(&x)
}

/// Mean, std, skewness, excess kurtosis, median, min and max.
#[pyfunction]
fn describe(values: Vec<f64>) -> PyResult<Vec<f64>> {
    if values.is_empty() {
        return Err(PyValueError::new_err("empty sequence"));
    }
    Ok(dsp::describe(&values).to_vec())
}

#[pyfunction]
fn feature_set_columns(name: &str) -> PyResult<Vec<String>> {
    dsp::feature_set_columns(name).map_err(value_error)
}

#[pyfunction]
fn top_k_accuracy(predictions: Vec<Vec<f64>>, golds: Vec<usize>, k: usize) -> PyResult<f64> {
    evaluation::top_k_accuracy(&predictions, &golds, k).map_err(value_error)
}

#[pymodule]
fn matt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFeatureExtractor>()?;
    m.add_class::<PySyntheticDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(feature_set_columns, m)?)?;
    m.add_function(wrap_pyfunction!(top_k_accuracy, m)?)?;
    Ok(())
}
