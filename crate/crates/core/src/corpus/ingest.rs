use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::{tokenize, ScoreRange, ScoreRanges, ScoreScaling};
use crate::error::{Error, Result};

/// One tokenised row of an ASAP-style file, before vocabulary encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EssayRecord {
    pub essay_id: u64,
    pub set_id: u32,
    pub tokens: Vec<String>,
    pub raw_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the source file.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<EssayRecord>,
    pub ranges: ScoreRanges,
    /// Rows that could not be parsed; the rest of the file is still ingested.
    pub errors: Vec<RowError>,
}

const REQUIRED: [&str; 4] = ["essay_id", "essay_set", "essay", "domain1_score"];

/// Reads a tab-separated ASAP file. `domain1_score` becomes the raw score.
///
/// Per-set ranges come from `supplied` when it has an entry for the set,
/// otherwise from the observed per-set extremes.
pub fn ingest_asap_tsv(
    path: &Path,
    supplied: Option<&BTreeMap<u32, ScoreRange>>,
    scaling: ScoreScaling,
) -> Result<Ingested> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut lines = text.lines().enumerate();

    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r'),
        None => return Err(Error::format(path, "empty file (no header row)")),
    };
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })?;
    }
    let [id_col, set_col, essay_col, score_col] = idx;

    let mut out = Ingested::default();
    for (i, raw_line) in lines {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let field = |col: usize| fields.get(col).map(|f| f.trim()).unwrap_or("");
        let row = (|| -> std::result::Result<EssayRecord, String> {
            let essay_id = field(id_col)
                .parse::<u64>()
                .map_err(|_| format!("invalid essay_id `{}`", field(id_col)))?;
            let set_id = field(set_col)
                .parse::<u32>()
                .map_err(|_| format!("invalid essay_set `{}`", field(set_col)))?;
            let raw_score = field(score_col)
                .parse::<f64>()
                .ok()
                .filter(|s| s.is_finite())
                .ok_or_else(|| format!("non-numeric domain1_score `{}`", field(score_col)))?;
            let tokens = tokenize(field(essay_col));
            if tokens.is_empty() {
                return Err("essay text has no tokens".to_string());
            }
            Ok(EssayRecord {
                essay_id,
                set_id,
                tokens,
                raw_score,
            })
        })();
        match row {
            Ok(rec) => out.records.push(rec),
            Err(message) => out.errors.push(RowError {
                line: line_no,
                message,
            }),
        }
    }

    let mut observed: BTreeMap<u32, ScoreRange> = BTreeMap::new();
    for r in &out.records {
        observed
            .entry(r.set_id)
            .and_modify(|e| {
                e.min = e.min.min(r.raw_score);
                e.max = e.max.max(r.raw_score);
            })
            .or_insert(ScoreRange {
                min: r.raw_score,
                max: r.raw_score,
            });
    }
    if let Some(table) = supplied {
        for (set, range) in observed.iter_mut() {
            if let Some(given) = table.get(set) {
                if range.min < given.min || range.max > given.max {
                    return Err(Error::Data(format!(
                        "{}: essay set {set} has scores in [{}, {}] outside the supplied range [{}, {}]",
                        path.display(),
                        range.min,
                        range.max,
                        given.min,
                        given.max
                    )));
                }
                *range = *given;
            }
        }
    }
    out.ranges = ScoreRanges {
        ranges: observed,
        scaling,
    };
    Ok(out)
}

/// Parses a score-range table: `set_id<TAB>min<TAB>max` per line, `#` comments.
pub fn read_score_ranges(path: &Path) -> Result<BTreeMap<u32, ScoreRange>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::format(path, format!("line {}: expected `set_id<TAB>min<TAB>max`", i + 1));
        let parts: Vec<&str> = line.split('\t').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let set: u32 = parts[0].parse().map_err(|_| bad())?;
        let min: f64 = parts[1].parse().map_err(|_| bad())?;
        let max: f64 = parts[2].parse().map_err(|_| bad())?;
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(bad());
        }
        out.insert(set, ScoreRange { min, max });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "essay_id\tessay_set\tessay\trater1_domain1\tdomain1_score\n";

    #[test]
    fn maps_fields() {
        let f = write(&format!(
            "{HEADER}1\t1\tDear local newspaper, I think\t4\t8\n\
             2\t1\tComputers are good .\t2\t3\n\
             3\t2\tThe @CAPS1 went home\t1\t1\n"
        ));
        let got = ingest_asap_tsv(f.path(), None, ScoreScaling::Normalized).unwrap();
        assert!(got.errors.is_empty());
        assert_eq!(got.records.len(), 3);
        let first = &got.records[0];
        assert_eq!(first.essay_id, 1);
        assert_eq!(first.set_id, 1);
        assert_eq!(first.raw_score, 8.0);
        assert_eq!(first.tokens[..3], ["dear", "local", "newspaper"]);
        assert_eq!(got.records[2].tokens[1], "@CAPS1");
        assert_eq!(got.ranges.get(1).unwrap(), ScoreRange { min: 3.0, max: 8.0 });
        assert_eq!(got.ranges.get(2).unwrap(), ScoreRange { min: 1.0, max: 1.0 });
    }

    #[test]
    fn header_only_is_empty() {
        let f = write(HEADER);
        let got = ingest_asap_tsv(f.path(), None, ScoreScaling::Normalized).unwrap();
        assert!(got.records.is_empty());
        assert!(got.errors.is_empty());
    }

    #[test]
    fn bad_score_is_a_row_error() {
        let f = write(&format!("{HEADER}1\t1\tfine text\t1\t2\n2\t1\tother\t1\tN/A\n3\t1\tmore\t1\t4\n"));
        let got = ingest_asap_tsv(f.path(), None, ScoreScaling::Normalized).unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.errors.len(), 1);
        assert_eq!(got.errors[0].line, 3);
        assert!(got.errors[0].message.contains("N/A"));
    }

    #[test]
    fn missing_column_is_named() {
        let f = write("essay_id\tessay_set\tessay\n1\t1\ttext\n");
        let err = ingest_asap_tsv(f.path(), None, ScoreScaling::Normalized).unwrap_err();
        assert!(err.to_string().contains("domain1_score"), "{err}");
    }

    #[test]
    fn supplied_ranges_override_observed() {
        let f = write(&format!("{HEADER}1\t1\ta b\t1\t2\n2\t1\tc d\t1\t4\n"));
        let table = BTreeMap::from([(1, ScoreRange { min: 0.0, max: 10.0 })]);
        let got = ingest_asap_tsv(f.path(), Some(&table), ScoreScaling::Normalized).unwrap();
        assert_eq!(got.ranges.get(1).unwrap(), ScoreRange { min: 0.0, max: 10.0 });

        let tight = BTreeMap::from([(1, ScoreRange { min: 3.0, max: 10.0 })]);
        assert!(ingest_asap_tsv(f.path(), Some(&tight), ScoreScaling::Normalized).is_err());
    }

    #[test]
    fn range_table_parsing() {
        let f = write("# set min max\n1\t2\t12\n8\t0\t60\n");
        let t = read_score_ranges(f.path()).unwrap();
        assert_eq!(t[&1], ScoreRange { min: 2.0, max: 12.0 });
        assert_eq!(t[&8], ScoreRange { min: 0.0, max: 60.0 });
        let bad = write("1 2 12\n");
        assert!(read_score_ranges(bad.path()).is_err());
    }
}
