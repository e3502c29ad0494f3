//! Subject-level deduplication of a train/val/test cohort manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::StatsError;

pub const COHORT_HEADER: [&str; 4] = ["image_id", "base_id", "split", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortRow {
    pub image_id: String,
    pub base_id: String,
    pub split: Split,
    pub label: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupeReport {
    pub input_rows: usize,
    /// Train rows whose subject also appears in test.
    pub anti_leakage: usize,
    /// Extra copies of a subject within val.
    pub val_collapsed: usize,
    /// Extra copies of a subject within test.
    pub test_collapsed: usize,
    pub output_rows: usize,
}

impl DedupeReport {
    pub fn removed(&self) -> usize {
        self.anti_leakage + self.val_collapsed + self.test_collapsed
    }
}

/// Drops train rows whose `base_id` occurs in test, then keeps one row per
/// `base_id` within val and within test: the smallest `image_id`. Input
/// order is otherwise preserved.
pub fn dedupe_cohort(rows: &[CohortRow]) -> (Vec<CohortRow>, DedupeReport) {
    let test_subjects: BTreeSet<&str> = rows.iter().filter(|r| r.split == Split::Test).map(|r| r.base_id.as_str()).collect();
    let mut keep_id: BTreeMap<(Split, &str), &str> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.split != Split::Train) {
        keep_id
            .entry((r.split, r.base_id.as_str()))
            .and_modify(|id| {
                if r.image_id.as_str() < *id {
                    *id = r.image_id.as_str();
                }
            })
            .or_insert(r.image_id.as_str());
    }
    let mut report = DedupeReport {
        input_rows: rows.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for r in rows {
        match r.split {
            Split::Train if test_subjects.contains(r.base_id.as_str()) => report.anti_leakage += 1,
            Split::Train => out.push(r.clone()),
            s => {
                if keep_id[&(s, r.base_id.as_str())] == r.image_id {
                    out.push(r.clone());
                } else if s == Split::Val {
                    report.val_collapsed += 1;
                } else {
                    report.test_collapsed += 1;
                }
            }
        }
    }
    report.output_rows = out.len();
    (out, report)
}

pub fn read_cohort_csv<R: Read>(input: R) -> Result<Vec<CohortRow>, StatsError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header != COHORT_HEADER {
        return Err(StatsError::Parse {
            line: 1,
            message: format!("expected header {}", COHORT_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    let mut ids = BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| StatsError::Parse { line, message };
        let image_id = rec[0].trim().to_owned();
        if !ids.insert(image_id.clone()) {
            return Err(err(format!("duplicate image_id {image_id:?}")));
        }
        let label = match rec[3].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("label must be 0 or 1, got {other:?}"))),
        };
        rows.push(CohortRow {
            image_id,
            base_id: rec[1].trim().to_owned(),
            split: rec[2].trim().parse().map_err(err)?,
            label,
        });
    }
    Ok(rows)
}

pub fn write_cohort_csv<W: Write>(mut out: W, rows: &[CohortRow], comments: &[String]) -> Result<(), StatsError> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COHORT_HEADER)?;
    for r in rows {
        w.write_record([r.image_id.as_str(), r.base_id.as_str(), r.split.as_str(), &r.label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
