use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{DatasetError, SegmentRecord, SegmentTable, Split};

pub const METADATA_HEADER: &str = "track_id,album_id,artist_id,genre,split";

/// Reads a metadata table. Genre ids follow the order of first appearance.
pub fn load_metadata(path: impl AsRef<Path>) -> Result<SegmentTable, DatasetError> {
    parse_metadata(std::fs::File::open(path)?)
}

pub fn parse_metadata<R: Read>(reader: R) -> Result<SegmentTable, DatasetError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| DatasetError::BadHeader("empty file".into()))?;
    let header = header.trim_start_matches('\u{feff}').trim_end();
    if header != METADATA_HEADER {
        return Err(DatasetError::BadHeader(format!(
            "expected `{METADATA_HEADER}`, found `{header}`"
        )));
    }
    let mut names: Vec<String> = Vec::new();
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(DatasetError::BadRow {
                line: line_no,
                reason: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let split = Split::parse(fields[4]).ok_or_else(|| DatasetError::BadSplit {
            line: line_no,
            token: fields[4].to_string(),
        })?;
        if fields[3].is_empty() {
            return Err(DatasetError::BadRow {
                line: line_no,
                reason: "empty genre".into(),
            });
        }
        let genre_id = match names.iter().position(|n| n == fields[3]) {
            Some(id) => id,
            None => {
                names.push(fields[3].to_string());
                names.len() - 1
            }
        };
        records.push(SegmentRecord {
            track_id: fields[0].to_string(),
            album_id: fields[1].to_string(),
            artist_id: fields[2].to_string(),
            genre_id,
            split,
        });
    }
    SegmentTable::new(records, names)
}

pub fn write_metadata<W: Write>(table: &SegmentTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METADATA_HEADER}")?;
    for r in &table.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.track_id,
            r.album_id,
            r.artist_id,
            table.vocabulary.names[r.genre_id],
            r.split
        )?;
    }
    Ok(())
}
