use super::{DspError, FeatureFamily, FrameFeatureMatrix};

pub const STATISTICS: [&str; 7] = ["mean", "std", "skew", "kurtosis", "median", "min", "max"];

/// Seven statistics per base dimension, statistic-major: all means, then all
/// standard deviations, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryFeatureVector {
    pub family: FeatureFamily,
    pub values: Vec<f64>,
}

impl SummaryFeatureVector {
    pub fn d_base(&self) -> usize {
        self.values.len() / STATISTICS.len()
    }

    /// Value of `stat` (index into [`STATISTICS`]) for base dimension `dim`.
    pub fn stat(&self, stat: usize, dim: usize) -> f64 {
        self.values[stat * self.d_base() + dim]
    }

    /// Column names `<family>_<stat>_<index>` in value order.
    pub fn column_names(family: FeatureFamily) -> Vec<String> {
        STATISTICS
            .iter()
            .flat_map(|s| (0..family.d_base()).map(move |i| format!("{}_{s}_{i:02}", family.name())))
            .collect()
    }
}

/// Mean, population std, skewness `m3/m2^1.5`, excess kurtosis `m4/m2² − 3`,
/// lower median, min and max of one sequence. Zero-variance input has zero
/// skewness and kurtosis.
pub fn describe(values: &[f64]) -> [f64; 7] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let degenerate = m2 <= 1e-24 * mean.abs().max(1.0).powi(2);
    let (skew, kurt) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(sorted.len() - 1) / 2];
    [
        mean,
        if degenerate { 0.0 } else { m2.sqrt() },
        skew,
        kurt,
        median,
        sorted[0],
        sorted[sorted.len() - 1],
    ]
}

pub fn summarize(frames: &FrameFeatureMatrix) -> Result<SummaryFeatureVector, DspError> {
    let d = frames.values.rows();
    if frames.values.cols() == 0 {
        return Err(DspError::EmptyFeature);
    }
    let mut values = vec![0.0; STATISTICS.len() * d];
    for dim in 0..d {
        for (s, v) in describe(frames.values.row(dim)).into_iter().enumerate() {
            values[s * d + dim] = v;
        }
    }
    Ok(SummaryFeatureVector {
        family: frames.family,
        values,
    })
}
