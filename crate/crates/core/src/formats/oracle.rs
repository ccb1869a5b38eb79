use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, FormatError};
use crate::dataset::BayesOracle;

/// First line `noise_rate,<ρ>`, then `genre,log_prior,c_00,…` with one row per
/// genre. Values use the shortest representation that round-trips.
pub fn write_oracle(path: &Path, oracle: &BayesOracle) -> Result<(), FormatError> {
    let dim = oracle.centroids.first().map_or(0, Vec::len);
    let mut out = format!("noise_rate,{}\ngenre,log_prior", oracle.noise_rate);
    for i in 0..dim {
        write!(out, ",c_{i:02}").expect("writing to a String");
    }
    out.push('\n');
    for (g, (c, lp)) in oracle.centroids.iter().zip(&oracle.log_prior).enumerate() {
        write!(out, "{g},{lp}").expect("writing to a String");
        for v in c {
            write!(out, ",{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_oracle(path: &Path) -> Result<BayesOracle, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let bad = |reason: String| FormatError::malformed(path, reason);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let noise_rate = lines
        .next()
        .and_then(|l| l.strip_prefix("noise_rate,"))
        .ok_or_else(|| bad("missing noise_rate line".into()))?
        .trim()
        .parse::<f64>()
        .map_err(|e| bad(format!("noise_rate: {e}")))?;
    let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
    if !header.starts_with("genre,log_prior") {
        return Err(bad("header must start with genre,log_prior".into()));
    }
    let dim = header.split(',').count() - 2;
    let mut centroids = Vec::new();
    let mut log_prior = Vec::new();
    for (n, line) in lines.enumerate() {
        let values = line
            .split(',')
            .skip(1)
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {n}: {e}")))?;
        if values.len() != dim + 1 {
            return Err(bad(format!("row {n}: expected {} values, found {}", dim + 1, values.len())));
        }
        log_prior.push(values[0]);
        centroids.push(values[1..].to_vec());
    }
    if centroids.len() < 2 {
        return Err(bad("need at least two genres".into()));
    }
    Ok(BayesOracle {
        centroids,
        noise_rate,
        log_prior,
    })
}
