//! Seeded long-tail bag generator with a closed-form Bayes oracle.
//!
//! Genre `g` (0-based rank) receives `round(head_count · (g+1)^(−zipf_exponent))`
//! training bags whose sizes are uniform on `bag_size_range`. Validation and
//! test splits are balanced across genres.
//!
//! Centroids are unit vectors `c_g = α u + β v_g` built on a random orthonormal
//! frame `{u, v_0, …}`, with `β = separation / √2` so every pair of centroids is
//! exactly `separation` apart. A genuine segment is `c_g + N(0, I)`; with
//! probability `noise_rate` it is replaced by a background draw `N(0, I)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{build_bags, BagSet, DatasetError, FeatureStore, LabelPolicy, SegmentRecord, SegmentTable, Split};
use crate::numeric::{dot, ops};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_genres: usize,
    pub zipf_exponent: f64,
    /// Number of training bags of the head genre.
    pub head_count: usize,
    /// Inclusive range of bag sizes.
    pub bag_size_range: (usize, usize),
    pub feature_dim: usize,
    /// Euclidean distance between any two genre centroids (at most √2).
    pub centroid_separation: f64,
    /// Probability that a segment is a background distractor.
    pub noise_rate: f64,
    pub validation_bags_per_genre: usize,
    pub test_bags_per_genre: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_genres: 16,
            zipf_exponent: 1.2,
            head_count: 400,
            bag_size_range: (3, 10),
            feature_dim: 32,
            centroid_separation: std::f64::consts::SQRT_2,
            noise_rate: 0.4,
            validation_bags_per_genre: 20,
            test_bags_per_genre: 100,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |msg: String| Err(DatasetError::InfeasibleConfig(msg));
        if self.n_genres < 2 {
            return bad("need at least two genres".into());
        }
        if self.head_count == 0 || self.feature_dim == 0 {
            return bad("head_count and feature_dim must be positive".into());
        }
        let (lo, hi) = self.bag_size_range;
        if lo == 0 || lo > hi {
            return bad(format!("bag size range {lo}..={hi} is empty or contains 0"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad(format!("noise_rate {} outside [0, 1)", self.noise_rate));
        }
        if !self.zipf_exponent.is_finite() || self.zipf_exponent < 0.0 {
            return bad("zipf_exponent must be finite and non-negative".into());
        }
        if !(self.centroid_separation > 0.0 && self.centroid_separation <= std::f64::consts::SQRT_2) {
            return bad(format!(
                "unit-norm centroids cannot be {} apart (must be in (0, √2])",
                self.centroid_separation
            ));
        }
        if self.n_genres + 1 > self.feature_dim {
            return bad(format!(
                "{} genres need a feature dimension of at least {}",
                self.n_genres,
                self.n_genres + 1
            ));
        }
        Ok(())
    }

    /// Training bag count per genre.
    pub fn train_bag_counts(&self) -> Vec<usize> {
        (0..self.n_genres)
            .map(|g| {
                let bags = self.head_count as f64 * ((g + 1) as f64).powf(-self.zipf_exponent);
                (bags.round() as usize).max(1)
            })
            .collect()
    }
}

/// Exact genre posterior of the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesOracle {
    pub centroids: Vec<Vec<f64>>,
    pub noise_rate: f64,
    /// Prior used by [`BayesOracle::posterior`]; uniform, matching the balanced
    /// evaluation splits.
    pub log_prior: Vec<f64>,
}

impl BayesOracle {
    /// `P(g | bag) ∝ π_g Π_k [(1−ρ) N(x_k; c_g, I) + ρ N(x_k; 0, I)]`.
    pub fn posterior<F: AsRef<[f64]>>(&self, bag: &[F]) -> Vec<f64> {
        let rho = self.noise_rate;
        let log_scores: Vec<f64> = self
            .centroids
            .iter()
            .zip(&self.log_prior)
            .map(|(c, &prior)| {
                let half_norm = 0.5 * dot(c, c);
                prior
                    + bag
                        .iter()
                        .map(|x| {
                            // log of the likelihood ratio against the background density
                            let genuine = dot(c, x.as_ref()) - half_norm;
                            if rho == 0.0 {
                                genuine
                            } else {
                                log_add_exp((1.0 - rho).ln() + genuine, rho.ln())
                            }
                        })
                        .sum::<f64>()
            })
            .collect();
        ops::softmax(&log_scores)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub table: SegmentTable,
    pub bags: BagSet,
    pub features: FeatureStore,
    pub oracle: BayesOracle,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `count` orthonormal vectors by Gram–Schmidt on Gaussian draws.
fn orthonormal_frame(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(count);
    while frame.len() < count {
        let mut v = gaussian(rng, dim);
        for b in &frame {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            frame.push(v);
        }
    }
    frame
}

pub const SYNTH_FAMILY: &str = "synth";

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData, DatasetError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.feature_dim;
    let frame = orthonormal_frame(&mut rng, cfg.n_genres + 1, dim);
    let beta = cfg.centroid_separation / std::f64::consts::SQRT_2;
    let alpha = (1.0 - beta * beta).max(0.0).sqrt();
    let centroids: Vec<Vec<f64>> = (0..cfg.n_genres)
        .map(|g| {
            frame[0]
                .iter()
                .zip(&frame[g + 1])
                .map(|(u, v)| alpha * u + beta * v)
                .collect()
        })
        .collect();

    let columns = (0..dim).map(|i| format!("{SYNTH_FAMILY}_raw_{i:02}")).collect();
    let mut features = FeatureStore::new(columns);
    let mut records = Vec::new();
    let train_counts = cfg.train_bag_counts();
    let mut bag_no = 0usize;
    for split in Split::ALL {
        for (g, centroid) in centroids.iter().enumerate() {
            let n_bags = match split {
                Split::Train => train_counts[g],
                Split::Validation => cfg.validation_bags_per_genre,
                Split::Test => cfg.test_bags_per_genre,
            };
            for _ in 0..n_bags {
                let size = rng.random_range(cfg.bag_size_range.0..=cfg.bag_size_range.1);
                let album = format!("album{bag_no:05}");
                let artist = format!("artist{bag_no:05}");
                for k in 0..size {
                    let track_id = format!("b{bag_no:05}s{k:02}");
                    let distractor = rng.random::<f64>() < cfg.noise_rate;
                    let mut x = gaussian(&mut rng, dim);
                    if !distractor {
                        x.iter_mut().zip(centroid).for_each(|(v, c)| *v += c);
                    }
                    features.insert(track_id.clone(), x.iter().map(|&v| v as f32).collect())?;
                    records.push(SegmentRecord {
                        track_id,
                        album_id: album.clone(),
                        artist_id: artist.clone(),
                        genre_id: g,
                        split,
                    });
                }
                bag_no += 1;
            }
        }
    }
    let names = (0..cfg.n_genres).map(|g| format!("genre{g:02}")).collect();
    let table = SegmentTable::new(records, names)?;
    let mut bags = build_bags(&table, LabelPolicy::Strict)?;
    bags.provenance = format!("synthetic long-tail bags, seed {}", cfg.seed);
    let oracle = BayesOracle {
        centroids,
        noise_rate: cfg.noise_rate,
        log_prior: vec![-(cfg.n_genres as f64).ln(); cfg.n_genres],
    };
    Ok(SyntheticData {
        table,
        bags,
        features,
        oracle,
    })
}
