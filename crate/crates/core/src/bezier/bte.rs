//! The BTE text format.
//!
//! ```text
//! BTE 1
//! # source <identifier>
//! # dims <width> <height>
//! id parent x0 y0 x1 y1 x2 y2 x3 y3 radius
//! ```
//!
//! Records carry 11 whitespace-separated fields. `parent` is `-1` for roots.
//! Coordinates and radius are written with 6 decimals. Other `#` lines are
//! free-form comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{BezierTree, CubicBezier, Segment};
use crate::geom::Vec2;

pub const BTE_VERSION: u32 = 1;
const FIELDS: usize = 11;

#[derive(Debug, Error, PartialEq)]
pub enum BteError {
    #[error("line 1: missing `BTE <version>` header")]
    MissingHeader,
    #[error("line 1: unsupported BTE version {0:?}")]
    UnknownVersion(String),
    #[error("line {line}: expected {FIELDS} fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: field {field} ({token:?}) is not a number")]
    NotNumeric { line: usize, field: usize, token: String },
    #[error("line {line}: field {field} is not finite")]
    NonFinite { line: usize, field: usize },
    #[error("line {line}: segment id {token:?} must be a positive integer")]
    InvalidId { line: usize, token: String },
    #[error("line {line}: parent {token:?} must be -1 or a positive integer")]
    InvalidParent { line: usize, token: String },
    #[error("line {line}: radius {radius} is negative")]
    NegativeRadius { line: usize, radius: f64 },
    #[error("line {line}: segment id {id} already defined on line {first}")]
    DuplicateId { line: usize, id: u32, first: usize },
    #[error("line {line}: parent {parent} does not exist")]
    DanglingParent { line: usize, parent: u32 },
    #[error("line {line}: parent chain of segment {id} is cyclic")]
    Cycle { line: usize, id: u32 },
    #[error("line {line}: malformed dims comment")]
    BadDims { line: usize },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

impl BteError {
    /// 1-based line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            BteError::MissingHeader | BteError::UnknownVersion(_) => Some(1),
            BteError::FieldCount { line, .. }
            | BteError::NotNumeric { line, .. }
            | BteError::NonFinite { line, .. }
            | BteError::InvalidId { line, .. }
            | BteError::InvalidParent { line, .. }
            | BteError::NegativeRadius { line, .. }
            | BteError::DuplicateId { line, .. }
            | BteError::DanglingParent { line, .. }
            | BteError::Cycle { line, .. }
            | BteError::BadDims { line } => Some(*line),
            BteError::Io { .. } => None,
        }
    }
}

/// Serialises a tree. `comments` are emitted as `# ` lines after the header.
pub fn to_bte_string(tree: &BezierTree, comments: &[String]) -> String {
    let mut out = format!("BTE {BTE_VERSION}\n");
    if !tree.provenance.is_empty() {
        let _ = writeln!(out, "# source {}", tree.provenance.replace('\n', " "));
    }
    if let Some((w, h)) = tree.source_dims {
        let _ = writeln!(out, "# dims {w} {h}");
    }
    for c in comments {
        let _ = writeln!(out, "# {}", c.replace('\n', " "));
    }
    for s in &tree.segments {
        let parent = s.parent.map_or(-1, i64::from);
        let _ = write!(out, "{} {}", s.id, parent);
        for p in s.curve.control_points() {
            let _ = write!(out, " {:.6} {:.6}", p.x, p.y);
        }
        let _ = writeln!(out, " {:.6}", s.radius);
    }
    out
}

pub fn write_bte(tree: &BezierTree, path: impl AsRef<Path>, comments: &[String]) -> Result<(), BteError> {
    let path = path.as_ref();
    std::fs::write(path, to_bte_string(tree, comments)).map_err(|e| BteError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_bte(path: impl AsRef<Path>) -> Result<BezierTree, BteError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| BteError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_bte(&text)
}

pub fn parse_bte(text: &str) -> Result<BezierTree, BteError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let header = lines.next().map(|(_, l)| l.trim()).ok_or(BteError::MissingHeader)?;
    let mut head = header.split_whitespace();
    if head.next() != Some("BTE") {
        return Err(BteError::MissingHeader);
    }
    let version = head.collect::<Vec<_>>().join(" ");
    if version != BTE_VERSION.to_string() {
        return Err(BteError::UnknownVersion(version));
    }

    let mut tree = BezierTree::default();
    let mut first_line: BTreeMap<u32, usize> = BTreeMap::new();
    for (line, raw) in lines {
        let content = raw.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(comment) = content.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(src) = comment.strip_prefix("source ") {
                tree.provenance = src.trim().to_string();
            } else if let Some(dims) = comment.strip_prefix("dims") {
                let parts: Vec<usize> = dims
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| BteError::BadDims { line })?;
                match parts[..] {
                    [w, h] if w > 0 && h > 0 => tree.source_dims = Some((w, h)),
                    _ => return Err(BteError::BadDims { line }),
                }
            }
            continue;
        }
        let seg = parse_record(line, content)?;
        if let Some(&first) = first_line.get(&seg.id) {
            return Err(BteError::DuplicateId {
                line,
                id: seg.id,
                first,
            });
        }
        first_line.insert(seg.id, line);
        tree.segments.push(seg);
    }

    for s in &tree.segments {
        if let Some(p) = s.parent {
            if !first_line.contains_key(&p) {
                return Err(BteError::DanglingParent {
                    line: first_line[&s.id],
                    parent: p,
                });
            }
        }
    }
    if let Err(super::TreeError::Cycle(id)) = tree.validate() {
        return Err(BteError::Cycle {
            line: first_line[&id],
            id,
        });
    }
    Ok(tree)
}

fn parse_record(line: usize, content: &str) -> Result<Segment, BteError> {
    let tokens: Vec<&str> = content.split_whitespace().collect();
    if tokens.len() != FIELDS {
        return Err(BteError::FieldCount {
            line,
            found: tokens.len(),
        });
    }
    let id = match tokens[0].parse::<u32>() {
        Ok(id) if id > 0 => id,
        _ => {
            return Err(BteError::InvalidId {
                line,
                token: tokens[0].to_string(),
            })
        }
    };
    let parent = match tokens[1].parse::<i64>() {
        Ok(-1) => None,
        Ok(p) if p > 0 && p <= i64::from(u32::MAX) => Some(p as u32),
        _ => {
            return Err(BteError::InvalidParent {
                line,
                token: tokens[1].to_string(),
            })
        }
    };
    let mut nums = [0.0; 9];
    for (k, tok) in tokens[2..].iter().enumerate() {
        let field = k + 3;
        let value: f64 = tok.parse().map_err(|_| BteError::NotNumeric {
            line,
            field,
            token: tok.to_string(),
        })?;
        if !value.is_finite() {
            return Err(BteError::NonFinite { line, field });
        }
        nums[k] = value;
    }
    let radius = nums[8];
    if radius < 0.0 {
        return Err(BteError::NegativeRadius { line, radius });
    }
    let p = |i: usize| Vec2::new(nums[2 * i], nums[2 * i + 1]);
    Ok(Segment {
        id,
        parent,
        curve: CubicBezier::new(p(0), p(1), p(2), p(3)).snapped(),
        radius,
    })
}
