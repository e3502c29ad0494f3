//! One-pixel skeletons, node classification and polyline tracing.

use std::collections::{BTreeSet, HashSet};

use crate::geom::Vec2;
use crate::mask::VesselMask;

/// Neighbour offsets `(d_row, d_col)`, clockwise from north.
pub const CLOCKWISE: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

pub type Pixel = (usize, usize);

/// Thinned raster. Pixels are `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl Skeleton {
    /// Wraps an already-thin raster, e.g. a hand-drawn test fixture.
    pub fn from_mask(mask: &VesselMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            bits: mask.bits().to_vec(),
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: impl IntoIterator<Item = Pixel>) -> Self {
        let mut bits = vec![0; width * height];
        for (r, c) in pixels {
            bits[r * width + c] = 1;
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, (r, c): Pixel) -> bool {
        r < self.height && c < self.width && self.bits[r * self.width + c] == 1
    }

    /// Skeleton pixels in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// Skeleton neighbours of `p`, clockwise from north.
    pub fn neighbors(&self, p: Pixel) -> impl Iterator<Item = Pixel> + '_ {
        CLOCKWISE.iter().filter_map(move |&(dr, dc)| {
            let r = p.0.checked_add_signed(dr)?;
            let c = p.1.checked_add_signed(dc)?;
            (r < self.height && c < self.width && self.bits[r * self.width + c] == 1).then_some((r, c))
        })
    }

    pub fn degree(&self, p: Pixel) -> usize {
        self.neighbors(p).count()
    }

    pub fn to_mask(&self) -> VesselMask {
        VesselMask::new(self.width, self.height, self.bits.clone()).expect("skeleton is binary")
    }

    /// Removing `p` leaves its neighbours 8-connected among themselves, so the
    /// pixel is redundant for connectivity.
    pub fn is_simple(&self, p: Pixel) -> bool {
        let nbrs: Vec<Pixel> = self.neighbors(p).collect();
        neighbor_components(&nbrs) == 1
    }
}

impl Skeleton {
    fn is_staircase_corner(&self, (r, c): Pixel) -> bool {
        let on = |dr: isize, dc: isize| {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            rr >= 0 && cc >= 0 && self.contains((rr as usize, cc as usize))
        };
        let (n, e, s, w) = (on(-1, 0), on(0, 1), on(1, 0), on(0, -1));
        (n && e) || (e && s) || (s && w) || (w && n)
    }
}

fn neighbor_components(nbrs: &[Pixel]) -> usize {
    let adjacent = |a: Pixel, b: Pixel| a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1;
    let mut seen = vec![false; nbrs.len()];
    let mut components = 0;
    for start in 0..nbrs.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..nbrs.len() {
                if !seen[j] && adjacent(nbrs[i], nbrs[j]) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    components
}

/// Zhang–Suen thinning (with the Lü–Wang lower bound of three neighbours,
/// which keeps two-pixel-thick diagonals from vanishing) followed by removal of the staircase pixels it leaves
/// behind, so that every non-endpoint pixel is needed for 8-connectivity.
pub fn skeletonize(mask: &VesselMask) -> Skeleton {
    let (w, h) = (mask.width(), mask.height());
    let mut bits = mask.bits().to_vec();
    let at = |bits: &[u8], r: isize, c: isize| -> u8 {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0
        } else {
            bits[r as usize * w + c as usize]
        }
    };
    let mut to_clear = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            to_clear.clear();
            for r in 0..h as isize {
                for c in 0..w as isize {
                    if at(&bits, r, c) == 0 {
                        continue;
                    }
                    // p2..p9: N, NE, E, SE, S, SW, W, NW
                    let p: [u8; 8] = std::array::from_fn(|i| {
                        let (dr, dc) = CLOCKWISE[i];
                        at(&bits, r + dr, c + dc)
                    });
                    let count: u8 = p.iter().sum();
                    if !(3..=6).contains(&count) {
                        continue;
                    }
                    let transitions = (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count();
                    if transitions != 1 {
                        continue;
                    }
                    let (n, e, s, west) = (p[0], p[2], p[4], p[6]);
                    let keep = if step == 0 {
                        n * e * s != 0 || e * s * west != 0
                    } else {
                        n * e * west != 0 || n * s * west != 0
                    };
                    if !keep {
                        to_clear.push(r as usize * w + c as usize);
                    }
                }
            }
            if !to_clear.is_empty() {
                changed = true;
                for &i in &to_clear {
                    bits[i] = 0;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut skeleton = Skeleton {
        width: w,
        height: h,
        bits,
    };
    remove_redundant(&mut skeleton);
    skeleton
}

/// Removes simple pixels that are either staircase corners (two
/// perpendicular 4-neighbours, which stay diagonally joined without it) or
/// have three or more neighbours. A degree-2 pixel whose neighbours merely
/// touch is the end of a two-pixel-thick run; removing those would eat the
/// run from its tip inward.
fn remove_redundant(skeleton: &mut Skeleton) {
    loop {
        let mut changed = false;
        for i in 0..skeleton.bits.len() {
            if skeleton.bits[i] == 0 {
                continue;
            }
            let p = (i / skeleton.width, i % skeleton.width);
            let degree = skeleton.degree(p);
            if degree >= 2 && (degree >= 3 || skeleton.is_staircase_corner(p)) && skeleton.is_simple(p) {
                skeleton.bits[i] = 0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Degree-1 endpoints and degree-≥3 branch pixels, both in raster order.
pub fn classify_nodes(skeleton: &Skeleton) -> (Vec<Pixel>, Vec<Pixel>) {
    let mut endpoints = Vec::new();
    let mut branches = Vec::new();
    for p in skeleton.pixels() {
        match skeleton.degree(p) {
            1 => endpoints.push(p),
            d if d >= 3 => branches.push(p),
            _ => {}
        }
    }
    (endpoints, branches)
}

/// Number of junctions: 8-connected clusters of branch pixels. A junction
/// that thins to two touching degree-3 pixels counts once.
pub fn junction_count(skeleton: &Skeleton) -> usize {
    let (_, branches) = classify_nodes(skeleton);
    let set: HashSet<Pixel> = branches.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut clusters = 0;
    for &b in &branches {
        if !seen.insert(b) {
            continue;
        }
        clusters += 1;
        let mut stack = vec![b];
        while let Some(p) = stack.pop() {
            for q in skeleton.neighbors(p) {
                if set.contains(&q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
    }
    clusters
}

/// Ordered run of 8-adjacent skeleton pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyline {
    pub points: Vec<Pixel>,
}

impl Polyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pixel centers as `(x = col, y = row)`.
    pub fn to_points(&self) -> Vec<Vec2> {
        self.points.iter().map(|&(r, c)| Vec2::from_pixel(r, c)).collect()
    }

    /// `id: (r,c) (r,c) ...`
    pub fn debug_line(&self, id: usize) -> String {
        let body: Vec<String> = self.points.iter().map(|(r, c)| format!("({r},{c})")).collect();
        format!("{id}: {}", body.join(" "))
    }
}

/// Splits the skeleton into open polylines at endpoints and branch pixels.
///
/// Walks start from terminal pixels (degree ≠ 2) in raster order and leave
/// through neighbours in clockwise order from north. Pure cycles are opened
/// at their raster-first pixel.
pub fn extract_polylines(skeleton: &Skeleton) -> Vec<Polyline> {
    let w = skeleton.width;
    let is_terminal = |p: Pixel| skeleton.degree(p) != 2;
    let mut visited = vec![false; skeleton.bits.len()];
    let mut direct: BTreeSet<(Pixel, Pixel)> = BTreeSet::new();
    let mut out = Vec::new();

    let terminals: Vec<Pixel> = skeleton.pixels().filter(|&p| is_terminal(p)).collect();
    for &t in &terminals {
        let first_steps: Vec<Pixel> = skeleton.neighbors(t).collect();
        for n in first_steps {
            if is_terminal(n) {
                let key = if t < n { (t, n) } else { (n, t) };
                if direct.insert(key) {
                    out.push(Polyline { points: vec![t, n] });
                }
                continue;
            }
            if visited[n.0 * w + n.1] {
                continue;
            }
            visited[n.0 * w + n.1] = true;
            let mut points = vec![t, n];
            let (mut prev, mut cur) = (t, n);
            loop {
                let next = skeleton
                    .neighbors(cur)
                    .find(|&q| q != prev)
                    .expect("degree-2 pixel has a second neighbour");
                points.push(next);
                if is_terminal(next) {
                    break;
                }
                visited[next.0 * w + next.1] = true;
                prev = cur;
                cur = next;
            }
            out.push(Polyline { points });
        }
    }

    for start in skeleton.pixels().collect::<Vec<_>>() {
        if is_terminal(start) || visited[start.0 * w + start.1] {
            continue;
        }
        visited[start.0 * w + start.1] = true;
        let mut points = vec![start];
        let mut prev = start;
        let mut cur = skeleton.neighbors(start).next().expect("cycle pixel has neighbours");
        while cur != start {
            visited[cur.0 * w + cur.1] = true;
            points.push(cur);
            let next = skeleton
                .neighbors(cur)
                .find(|&q| q != prev)
                .expect("degree-2 pixel has a second neighbour");
            prev = cur;
            cur = next;
        }
        out.push(Polyline { points });
    }
    out
}
