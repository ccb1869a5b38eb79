use std::collections::BTreeMap;

use super::{Bag, DatasetError};

/// Per-track feature vectors of one named feature set, in single precision.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureStore {
    columns: Vec<String>,
    rows: BTreeMap<String, Vec<f32>>,
}

impl FeatureStore {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn insert(&mut self, track_id: impl Into<String>, values: Vec<f32>) -> Result<(), DatasetError> {
        let track_id = track_id.into();
        if values.len() != self.dim() {
            return Err(DatasetError::FeatureDim(format!(
                "track {track_id} has {} values, store has {} columns",
                values.len(),
                self.dim()
            )));
        }
        self.rows.insert(track_id, values);
        Ok(())
    }

    pub fn get(&self, track_id: &str) -> Option<&[f32]> {
        self.rows.get(track_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in ascending track id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// A segment's features widened to double precision.
    pub fn vector(&self, track_id: &str) -> Result<Vec<f64>, DatasetError> {
        self.get(track_id)
            .map(|v| v.iter().map(|&x| x as f64).collect())
            .ok_or_else(|| DatasetError::MissingFeature(track_id.to_string()))
    }

    /// Member feature vectors of a bag, in member order.
    pub fn bag_vectors(&self, bag: &Bag) -> Result<Vec<Vec<f64>>, DatasetError> {
        bag.segment_ids.iter().map(|id| self.vector(id)).collect()
    }
}
