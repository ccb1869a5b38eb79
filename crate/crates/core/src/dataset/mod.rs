//! Segment metadata, album-artist bags, long-tail subsets and the synthetic
//! long-tail generator.

mod bags;
mod features;
mod metadata;
mod synth;

pub use bags::{build_bags, long_tail_subset, Bag, BagSet, LabelPolicy};
pub use features::FeatureStore;
pub use metadata::{load_metadata, parse_metadata, write_metadata, METADATA_HEADER};
pub use synth::{generate_synthetic, BayesOracle, SynthConfig, SyntheticData, SYNTH_FAMILY};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad metadata header: {0}")]
    BadHeader(String),
    #[error("line {line}: unknown split `{token}`")]
    BadSplit { line: usize, token: String },
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("duplicate track id `{0}`")]
    DuplicateTrack(String),
    #[error("bag {key} mixes genres {genres:?}")]
    InconsistentBagLabel { key: String, genres: Vec<usize> },
    #[error("infeasible synthetic config: {0}")]
    InfeasibleConfig(String),
    #[error("missing feature vector for track `{0}`")]
    MissingFeature(String),
    #[error("feature dimension mismatch: {0}")]
    FeatureDim(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    /// Accepts the FMA spellings (`training`, `validation`, `test`) and short forms.
    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "train" | "training" => Some(Split::Train),
            "validation" | "val" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One music segment's identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRecord {
    pub track_id: String,
    /// Empty when unknown.
    pub album_id: String,
    /// Empty when unknown.
    pub artist_id: String,
    pub genre_id: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenreVocabulary {
    pub names: Vec<String>,
    /// Number of training segments per genre.
    pub train_counts: Vec<usize>,
}

impl GenreVocabulary {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Genres with fewer than `max_train_count` training segments.
    pub fn tail_genres(&self, max_train_count: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&g| self.train_counts[g] < max_train_count)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentTable {
    pub records: Vec<SegmentRecord>,
    pub vocabulary: GenreVocabulary,
}

impl SegmentTable {
    /// Validates uniqueness and genre ids, and recomputes the training counts.
    pub fn new(records: Vec<SegmentRecord>, names: Vec<String>) -> Result<Self, DatasetError> {
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        let mut train_counts = vec![0; names.len()];
        for (i, r) in records.iter().enumerate() {
            if r.track_id.is_empty() {
                return Err(DatasetError::BadRow {
                    line: i + 2,
                    reason: "empty track id".into(),
                });
            }
            if !seen.insert(r.track_id.as_str()) {
                return Err(DatasetError::DuplicateTrack(r.track_id.clone()));
            }
            if r.genre_id >= names.len() {
                return Err(DatasetError::BadRow {
                    line: i + 2,
                    reason: format!("genre id {} outside vocabulary", r.genre_id),
                });
            }
            if r.split == Split::Train {
                train_counts[r.genre_id] += 1;
            }
        }
        Ok(Self {
            records,
            vocabulary: GenreVocabulary {
                names,
                train_counts,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, track_id: &str) -> Option<&SegmentRecord> {
        self.records.iter().find(|r| r.track_id == track_id)
    }
}
