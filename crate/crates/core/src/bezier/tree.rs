use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::CubicBezier;

/// Endpoint distance (px) under which two segments are considered joined.
pub const LINK_TOLERANCE: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("segment id {0} is used twice")]
    DuplicateId(u32),
    #[error("segment ids must be positive")]
    ZeroId,
    #[error("segment {id} names missing parent {parent}")]
    DanglingParent { id: u32, parent: u32 },
    #[error("parent links of segment {0} form a cycle")]
    Cycle(u32),
}

/// One fitted cubic and its place in the tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub id: u32,
    pub parent: Option<u32>,
    pub curve: CubicBezier,
    /// Mean local radius (px) sampled along the curve.
    pub radius: f64,
}

/// Connected cubic segments of one vessel network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BezierTree {
    pub segments: Vec<Segment>,
    /// `(width, height)` of the raster the segments live on.
    pub source_dims: Option<(usize, usize)>,
    /// Identifier of the source mask.
    pub provenance: String,
}

impl BezierTree {
    pub fn new(source_dims: Option<(usize, usize)>, provenance: impl Into<String>) -> Self {
        Self {
            segments: Vec::new(),
            source_dims,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn next_id(&self) -> u32 {
        self.segments.iter().map(|s| s.id).max().unwrap_or(0) + 1
    }

    pub fn get(&self, id: u32) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }

    /// Checks id uniqueness, parent existence and acyclicity.
    pub fn validate(&self) -> Result<(), TreeError> {
        let mut parents = BTreeMap::new();
        for s in &self.segments {
            if s.id == 0 {
                return Err(TreeError::ZeroId);
            }
            if parents.insert(s.id, s.parent).is_some() {
                return Err(TreeError::DuplicateId(s.id));
            }
        }
        for s in &self.segments {
            if let Some(p) = s.parent {
                if !parents.contains_key(&p) {
                    return Err(TreeError::DanglingParent { id: s.id, parent: p });
                }
            }
        }
        if let Some(id) = first_cycle(&parents) {
            return Err(TreeError::Cycle(id));
        }
        Ok(())
    }

    /// Links every parentless segment whose `P0` lies within `tolerance` of an
    /// endpoint of another segment. Nearest candidate wins, ties go to the
    /// lower id, and links that would close a cycle are skipped.
    pub fn link_by_endpoints(&mut self, tolerance: f64) {
        let mut parents: BTreeMap<u32, Option<u32>> = self.segments.iter().map(|s| (s.id, s.parent)).collect();
        let mut order: Vec<usize> = (0..self.segments.len()).collect();
        order.sort_by_key(|&i| self.segments[i].id);
        for &i in &order {
            let seg = self.segments[i];
            if seg.parent.is_some() {
                continue;
            }
            let mut candidates: Vec<(f64, u32)> = self
                .segments
                .iter()
                .filter(|o| o.id != seg.id)
                .map(|o| {
                    let d = seg.curve.p0.distance(o.curve.p0).min(seg.curve.p0.distance(o.curve.p3));
                    (d, o.id)
                })
                .filter(|&(d, _)| d <= tolerance)
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (_, cand) in candidates {
                if !is_ancestor_or_self(&parents, seg.id, cand) {
                    parents.insert(seg.id, Some(cand));
                    self.segments[i].parent = Some(cand);
                    break;
                }
            }
        }
    }

    /// Drops the given segments; children of dropped segments become roots.
    pub fn without(&self, removed: &BTreeSet<u32>) -> BezierTree {
        let segments = self
            .segments
            .iter()
            .filter(|s| !removed.contains(&s.id))
            .map(|s| Segment {
                parent: s.parent.filter(|p| !removed.contains(p)),
                ..*s
            })
            .collect();
        BezierTree {
            segments,
            source_dims: self.source_dims,
            provenance: self.provenance.clone(),
        }
    }
}

/// Walks up from `start`; true if `target` is reached.
fn is_ancestor_or_self(parents: &BTreeMap<u32, Option<u32>>, target: u32, start: u32) -> bool {
    let mut cur = Some(start);
    let mut steps = 0;
    while let Some(id) = cur {
        if id == target {
            return true;
        }
        steps += 1;
        if steps > parents.len() {
            return true;
        }
        cur = parents.get(&id).copied().flatten();
    }
    false
}

fn first_cycle(parents: &BTreeMap<u32, Option<u32>>) -> Option<u32> {
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state: BTreeMap<u32, u8> = parents.keys().map(|&k| (k, 0)).collect();
    for &start in parents.keys() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(id) = cur {
            match state.get(&id).copied() {
                Some(0) => {
                    state.insert(id, 1);
                    path.push(id);
                    cur = parents.get(&id).copied().flatten();
                }
                Some(1) => return Some(id),
                _ => break,
            }
        }
        for id in path {
            state.insert(id, 2);
        }
    }
    None
}
