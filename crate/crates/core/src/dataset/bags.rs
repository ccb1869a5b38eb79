use std::collections::BTreeMap;

use super::{DatasetError, GenreVocabulary, SegmentTable, Split};

/// How to label a bag whose members disagree on genre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    /// Disagreement is an error.
    Strict,
    /// Most frequent genre, ties to the lowest genre id, with a warning.
    #[default]
    Majority,
}

impl std::str::FromStr for LabelPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Self::Strict),
            "majority" => Ok(Self::Majority),
            other => Err(format!("unknown label policy `{other}` (expected strict or majority)")),
        }
    }
}

/// All segments sharing one (artist, album, split) key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bag {
    pub artist_id: String,
    pub album_id: String,
    pub split: Split,
    /// Sorted ascending, no duplicates.
    pub segment_ids: Vec<String>,
    pub genre_id: usize,
}

impl Bag {
    pub fn len(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segment_ids.is_empty()
    }

    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.artist_id, self.album_id, self.split)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagSet {
    pub bags: Vec<Bag>,
    pub vocabulary: GenreVocabulary,
    pub provenance: String,
}

impl BagSet {
    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Bag> {
        self.bags.iter().filter(move |b| b.split == split)
    }

    /// Same vocabulary, only the bags of one split.
    pub fn only(&self, split: Split) -> BagSet {
        BagSet {
            bags: self.split(split).cloned().collect(),
            vocabulary: self.vocabulary.clone(),
            provenance: format!("{} [{split}]", self.provenance),
        }
    }

    pub fn segment_count(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    /// Every segment as its own bag, keeping order.
    pub fn singletons(&self) -> BagSet {
        let bags = self
            .bags
            .iter()
            .flat_map(|b| {
                b.segment_ids.iter().map(move |id| Bag {
                    artist_id: b.artist_id.clone(),
                    album_id: b.album_id.clone(),
                    split: b.split,
                    segment_ids: vec![id.clone()],
                    genre_id: b.genre_id,
                })
            })
            .collect();
        BagSet {
            bags,
            vocabulary: self.vocabulary.clone(),
            provenance: format!("{} [singletons]", self.provenance),
        }
    }
}

/// Groups segments into album-artist bags.
///
/// Segments without an album or artist id become singleton bags. Bags are
/// ordered by (artist, album, split, first member) and members by track id,
/// so the result depends only on the table's content.
pub fn build_bags(table: &SegmentTable, policy: LabelPolicy) -> Result<BagSet, DatasetError> {
    type Key = (String, String, Split, String);
    let mut groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, r) in table.records.iter().enumerate() {
        let singleton = r.album_id.is_empty() || r.artist_id.is_empty();
        let discriminator = if singleton { r.track_id.clone() } else { String::new() };
        groups
            .entry((r.artist_id.clone(), r.album_id.clone(), r.split, discriminator))
            .or_default()
            .push(i);
    }
    let n_genres = table.vocabulary.len();
    let mut bags = Vec::with_capacity(groups.len());
    for ((artist_id, album_id, split, _), members) in groups {
        let mut counts = vec![0usize; n_genres];
        for &i in &members {
            counts[table.records[i].genre_id] += 1;
        }
        let present: Vec<usize> = (0..n_genres).filter(|&g| counts[g] > 0).collect();
        let mut segment_ids: Vec<String> = members
            .iter()
            .map(|&i| table.records[i].track_id.clone())
            .collect();
        segment_ids.sort();
        let genre_id = if present.len() == 1 {
            present[0]
        } else {
            let key = format!("{artist_id}/{album_id}/{split}");
            match policy {
                LabelPolicy::Strict => {
                    return Err(DatasetError::InconsistentBagLabel { key, genres: present })
                }
                LabelPolicy::Majority => {
                    let best = present
                        .iter()
                        .copied()
                        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                        .expect("bag is non-empty");
                    log::warn!(
                        "bag {key} mixes genres {present:?}; labelled {} by majority",
                        table.vocabulary.names[best]
                    );
                    best
                }
            }
        };
        bags.push(Bag {
            artist_id,
            album_id,
            split,
            segment_ids,
            genre_id,
        });
    }
    Ok(BagSet {
        bags,
        vocabulary: table.vocabulary.clone(),
        provenance: format!("{} segments grouped by artist/album/split", table.len()),
    })
}

/// Bags whose genre has fewer than `max_train_count` training segments.
pub fn long_tail_subset(bags: &BagSet, max_train_count: usize) -> BagSet {
    let counts = &bags.vocabulary.train_counts;
    BagSet {
        bags: bags
            .bags
            .iter()
            .filter(|b| counts[b.genre_id] < max_train_count)
            .cloned()
            .collect(),
        vocabulary: bags.vocabulary.clone(),
        provenance: format!("{} [<{max_train_count} training segments]", bags.provenance),
    }
}
