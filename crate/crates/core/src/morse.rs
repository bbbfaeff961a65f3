//! Discrete gradient vector fields on image complexes and the Morse chain
//! complex they induce.
//!
//! The field is built one vertex lower star at a time. The lower star of a
//! vertex `v` is every cell whose maximal vertex is `v`, where vertices are
//! totally ordered by `(pixel value, tie-break rank)`. Inside a lower star,
//! cells are visited in increasing order of their vertex keys sorted
//! descending; the first edge pairs with `v`, and squares with exactly one
//! unclassified face are paired with it greedily. Whatever cannot be paired
//! is critical. Every pair lies inside one lower star, so paired cells share
//! a filtration value and sublevel sets are unions of whole pairs.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::cubical::{Cell, CubicalComplex};
use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorseError {
    #[error("closed V-path through cell {0}")]
    AcyclicityViolation(Cell),
    #[error("cell {0} is not critical")]
    NotCritical(Cell),
    #[error("invalid pairing at cell {cell}: {reason}")]
    InvalidPairing { cell: Cell, reason: String },
    #[error("invalid Morse complex: {0}")]
    InvalidComplex(String),
}

/// How vertices with equal pixel values are ordered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TieBreak {
    /// Earlier in row-major pixel order is lower.
    #[default]
    RowMajor,
    /// Later in row-major pixel order is lower.
    ReverseRowMajor,
}

/// Total order key of a vertex, never zero.
fn vertex_key(k: &CubicalComplex, tie: TieBreak, px: u32, py: u32) -> u64 {
    let idx = u64::from(py) * u64::from(k.width()) + u64::from(px);
    let rank = match tie {
        TieBreak::RowMajor => idx,
        TieBreak::ReverseRowMajor => k.num_vertices() as u64 - 1 - idx,
    };
    (u64::from(k.pixel(px, py)) << 40) | (rank + 1)
}

const UNSET: u8 = 0;
const CRITICAL: u8 = 1;
// Partner direction codes on the doubled grid.
const PX: u8 = 2;
const NX: u8 = 3;
const PY: u8 = 4;
const NY: u8 = 5;

fn dir_code(dx: i32, dy: i32) -> u8 {
    match (dx, dy) {
        (1, 0) => PX,
        (-1, 0) => NX,
        (0, 1) => PY,
        (0, -1) => NY,
        _ => unreachable!("partners are adjacent on the doubled grid"),
    }
}

fn apply_dir(c: Cell, code: u8) -> Cell {
    match code {
        PX => Cell::new(c.x + 1, c.y),
        NX => Cell::new(c.x - 1, c.y),
        PY => Cell::new(c.x, c.y + 1),
        NY => Cell::new(c.x, c.y - 1),
        _ => unreachable!("not a partner code"),
    }
}

/// Local 3x3 neighbourhood of a vertex: slot `(dy + 1) * 3 + (dx + 1)`.
const CENTER: usize = 4;
const EDGE_SLOTS: [usize; 4] = [1, 3, 5, 7];
const SQUARE_SLOTS: [usize; 4] = [0, 2, 6, 8];

fn slot_offset(slot: usize) -> (i32, i32) {
    (slot as i32 % 3 - 1, slot as i32 / 3 - 1)
}

/// The two lower-star edges bounding a square slot.
fn square_edges(slot: usize) -> [usize; 2] {
    let (dx, dy) = slot_offset(slot);
    [
        (CENTER as i32 + dx) as usize,
        (CENTER as i32 + 3 * dy) as usize,
    ]
}

/// The (up to two) square slots having an edge slot as a face.
fn edge_squares(slot: usize) -> [usize; 2] {
    match slot {
        1 => [0, 2],
        3 => [0, 6],
        5 => [2, 8],
        7 => [6, 8],
        _ => unreachable!("not an edge slot"),
    }
}

/// Classify the lower star of pixel `(px, py)`; returns a partner/critical
/// code per local slot, `UNSET` for slots outside the lower star.
fn process_lower_star(k: &CubicalComplex, tie: TieBreak, px: u32, py: u32) -> [u8; 9] {
    let (w, h) = (k.width() as i32, k.height() as i32);
    let center_key = vertex_key(k, tie, px, py);
    // neighbouring vertex keys, 0 where off-grid
    let mut vkeys = [0u64; 9];
    for (slot, key) in vkeys.iter_mut().enumerate() {
        let (dx, dy) = slot_offset(slot);
        let (qx, qy) = (px as i32 + dx, py as i32 + dy);
        if (0..w).contains(&qx) && (0..h).contains(&qy) {
            *key = vertex_key(k, tie, qx as u32, qy as u32);
        }
    }

    // Sorting keys of lower-star cells: other vertex keys, descending,
    // zero-padded. The shared centre vertex is omitted.
    let mut in_star = [false; 9];
    let mut gkey = [[0u64; 3]; 9];
    for &e in &EDGE_SLOTS {
        let k2 = vkeys[e];
        if k2 != 0 && k2 < center_key {
            in_star[e] = true;
            gkey[e] = [k2, 0, 0];
        }
    }
    for &s in &SQUARE_SLOTS {
        let [e1, e2] = square_edges(s);
        let ks = [vkeys[s], vkeys[e1], vkeys[e2]];
        if ks.iter().all(|&q| q != 0 && q < center_key) {
            in_star[s] = true;
            let mut g = ks;
            g.sort_unstable_by(|a, b| b.cmp(a));
            gkey[s] = g;
        }
    }

    let mut out = [UNSET; 9];
    let first_edge = EDGE_SLOTS
        .iter()
        .copied()
        .filter(|&e| in_star[e])
        .min_by_key(|&e| gkey[e]);
    let Some(delta) = first_edge else {
        out[CENTER] = CRITICAL;
        return out;
    };

    let pair = |out: &mut [u8; 9], lo: usize, hi: usize| {
        let (lx, ly) = slot_offset(lo);
        let (hx, hy) = slot_offset(hi);
        out[lo] = dir_code(hx - lx, hy - ly);
        out[hi] = dir_code(lx - hx, ly - hy);
    };
    pair(&mut out, CENTER, delta);

    let unpaired_faces = |out: &[u8; 9], s: usize| -> (usize, usize) {
        let [a, b] = square_edges(s);
        match (out[a] == UNSET, out[b] == UNSET) {
            (true, true) => (2, a),
            (true, false) => (1, a),
            (false, true) => (1, b),
            (false, false) => (0, usize::MAX),
        }
    };

    let mut pq_zero: Vec<usize> = EDGE_SLOTS
        .iter()
        .copied()
        .filter(|&e| in_star[e] && e != delta)
        .collect();
    let mut pq_one: Vec<usize> = Vec::with_capacity(8);
    let push_cofaces = |out: &[u8; 9], pq_one: &mut Vec<usize>, e: usize| {
        for s in edge_squares(e) {
            if in_star[s] && out[s] == UNSET && unpaired_faces(out, s).0 == 1 {
                pq_one.push(s);
            }
        }
    };
    let pop_min = |q: &mut Vec<usize>| -> Option<usize> {
        let (i, _) = q.iter().enumerate().min_by_key(|(_, &c)| gkey[c])?;
        Some(q.swap_remove(i))
    };
    push_cofaces(&out, &mut pq_one, delta);

    loop {
        while let Some(alpha) = pop_min(&mut pq_one) {
            if out[alpha] != UNSET {
                continue;
            }
            let (n, face) = unpaired_faces(&out, alpha);
            if n == 0 {
                pq_zero.push(alpha);
            } else {
                pair(&mut out, face, alpha);
                pq_zero.retain(|&c| c != face);
                // squares have no cofaces in 2D
                push_cofaces(&out, &mut pq_one, face);
            }
        }
        match pop_min(&mut pq_zero) {
            Some(gamma) if out[gamma] != UNSET => continue,
            Some(gamma) => {
                out[gamma] = CRITICAL;
                if gamma % 2 == 1 {
                    push_cofaces(&out, &mut pq_one, gamma);
                }
            }
            None => break,
        }
    }
    debug_assert!((0..9).all(|s| !in_star[s] || out[s] != UNSET));
    out
}

/// A discrete gradient: a partial matching of cells with dimension
/// difference one, plus the set of unmatched (critical) cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradientField {
    width: u32,
    height: u32,
    tie: TieBreak,
    codes: Vec<u8>,
}

pub fn build_gradient(k: &CubicalComplex) -> GradientField {
    build_gradient_with(k, TieBreak::default(), Execution::default())
}

pub fn build_gradient_with(k: &CubicalComplex, tie: TieBreak, exec: Execution) -> GradientField {
    let w = k.width();
    let stars = par::map_range(exec, k.num_vertices(), |i| {
        let (px, py) = (i as u32 % w, i as u32 / w);
        process_lower_star(k, tie, px, py)
    });
    let mut codes = vec![UNSET; k.num_cells()];
    for (i, star) in stars.iter().enumerate() {
        let (px, py) = (i as u32 % w, i as u32 / w);
        for (slot, &code) in star.iter().enumerate() {
            if code != UNSET {
                let (dx, dy) = slot_offset(slot);
                let c = Cell::new((2 * px as i32 + dx) as u32, (2 * py as i32 + dy) as u32);
                codes[k.index(c)] = code;
            }
        }
    }
    GradientField {
        width: k.width(),
        height: k.height(),
        tie,
        codes,
    }
}

impl GradientField {
    fn index(&self, c: Cell) -> usize {
        c.y as usize * (2 * self.width as usize - 1) + c.x as usize
    }

    fn cell_at(&self, i: usize) -> Cell {
        let gw = 2 * self.width as usize - 1;
        Cell::new((i % gw) as u32, (i / gw) as u32)
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie
    }

    pub fn is_critical(&self, c: Cell) -> bool {
        self.codes[self.index(c)] == CRITICAL
    }

    pub fn partner(&self, c: Cell) -> Option<Cell> {
        match self.codes[self.index(c)] {
            UNSET | CRITICAL => None,
            code => Some(apply_dir(c, code)),
        }
    }

    /// Critical cells graded by dimension, each list in row-major order.
    pub fn critical_cells(&self) -> [Vec<Cell>; 3] {
        let mut out: [Vec<Cell>; 3] = Default::default();
        for (i, &code) in self.codes.iter().enumerate() {
            if code == CRITICAL {
                let c = self.cell_at(i);
                out[c.dim() as usize].push(c);
            }
        }
        out
    }

    pub fn critical_counts(&self) -> [usize; 3] {
        self.critical_cells().map(|v| v.len())
    }

    /// Check that the field is a complete, value-preserving matching with
    /// no closed V-paths.
    pub fn verify(&self, k: &CubicalComplex) -> Result<(), MorseError> {
        let bad = |cell: Cell, reason: &str| MorseError::InvalidPairing {
            cell,
            reason: reason.to_string(),
        };
        if (k.width(), k.height()) != (self.width, self.height) {
            return Err(MorseError::InvalidComplex("size mismatch".into()));
        }
        for (i, &code) in self.codes.iter().enumerate() {
            let c = self.cell_at(i);
            match code {
                UNSET => return Err(bad(c, "unclassified")),
                CRITICAL => {}
                _ => {
                    let p = apply_dir(c, code);
                    if !k.contains(p) {
                        return Err(bad(c, "partner off grid"));
                    }
                    if self.partner(p) != Some(c) {
                        return Err(bad(c, "partner is not mutual"));
                    }
                    if c.dim().abs_diff(p.dim()) != 1 {
                        return Err(bad(c, "dimension gap is not one"));
                    }
                    if k.value(c) != k.value(p) {
                        return Err(bad(c, "partner has a different value"));
                    }
                }
            }
        }
        self.check_acyclic(k)
    }

    /// The cell a V-path continues into after `face`, if `face` is paired
    /// with a higher-dimensional cell.
    fn up_partner(&self, face: Cell) -> Option<Cell> {
        self.partner(face).filter(|p| p.dim() > face.dim())
    }

    fn check_acyclic(&self, k: &CubicalComplex) -> Result<(), MorseError> {
        // 0/1 level: each vertex has at most one successor.
        let mut state = vec![0u8; self.codes.len()];
        for start in k.cells().filter(|c| c.dim() == 0) {
            let mut path = Vec::new();
            let mut u = start;
            loop {
                match state[self.index(u)] {
                    2 => break,
                    1 => return Err(MorseError::AcyclicityViolation(u)),
                    _ => {}
                }
                state[self.index(u)] = 1;
                path.push(u);
                match self.up_partner(u) {
                    Some(e) => {
                        let ends = k.faces(e).expect("edge in grid");
                        u = if ends[0] == u { ends[1] } else { ends[0] };
                    }
                    None => break,
                }
            }
            for p in path {
                state[self.index(p)] = 2;
            }
        }
        // 1/2 level: iterative DFS over edges paired with squares.
        for start in k.cells().filter(|c| c.dim() == 1) {
            if state[self.index(start)] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state[self.index(start)] = 1;
            while let Some(&mut (tau, ref mut next)) = stack.last_mut() {
                let succ = self.up_partner(tau).map(|s| {
                    k.faces(s)
                        .expect("square in grid")
                        .into_iter()
                        .filter(|f| *f != tau)
                        .collect::<Vec<_>>()
                });
                let succ = succ.unwrap_or_default();
                if *next < succ.len() {
                    let t2 = succ[*next];
                    *next += 1;
                    match state[self.index(t2)] {
                        0 => {
                            state[self.index(t2)] = 1;
                            stack.push((t2, 0));
                        }
                        1 => return Err(MorseError::AcyclicityViolation(t2)),
                        _ => {}
                    }
                } else {
                    state[self.index(tau)] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    /// Follow the gradient flow from a vertex down to its critical vertex.
    fn flow_root(&self, k: &CubicalComplex, mut u: Cell) -> Result<Cell, MorseError> {
        for _ in 0..=k.num_vertices() {
            match self.up_partner(u) {
                None => return Ok(u),
                Some(e) => {
                    let ends = k.faces(e).expect("edge in grid");
                    u = if ends[0] == u { ends[1] } else { ends[0] };
                }
            }
        }
        Err(MorseError::AcyclicityViolation(u))
    }

    /// Critical `(p-1)`-cells reached from the critical `p`-cell `from` by an
    /// odd number of V-paths, in row-major order.
    pub fn trace_vpaths(&self, k: &CubicalComplex, from: Cell) -> Result<Vec<Cell>, MorseError> {
        if !k.contains(from) || !self.is_critical(from) {
            return Err(MorseError::NotCritical(from));
        }
        match from.dim() {
            0 => Ok(Vec::new()),
            1 => {
                let ends = k.faces(from).expect("edge in grid");
                let a = self.flow_root(k, ends[0])?;
                let b = self.flow_root(k, ends[1])?;
                Ok(odd_entries(vec![a, b]))
            }
            _ => self.square_boundary(k, from),
        }
    }

    /// V-path parity from a critical square, propagated over the reachable
    /// squares in topological order.
    fn square_boundary(&self, k: &CubicalComplex, sigma: Cell) -> Result<Vec<Cell>, MorseError> {
        let exits = |s: Cell| {
            let entry = self.partner(s);
            k.faces(s)
                .expect("square in grid")
                .into_iter()
                .filter(move |f| Some(*f) != entry)
        };

        // DFS post-order over squares reachable along V-paths.
        let mut slot: HashMap<Cell, usize> = HashMap::new();
        let mut nodes = vec![sigma];
        let mut state = vec![1u8];
        slot.insert(sigma, 0);
        let mut post = Vec::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let faces: Vec<Cell> = exits(nodes[node]).collect();
            let mut pushed = None;
            while *next < faces.len() {
                let tau = faces[*next];
                *next += 1;
                if let Some(s2) = self.up_partner(tau) {
                    match slot.get(&s2) {
                        None => {
                            let id = nodes.len();
                            slot.insert(s2, id);
                            nodes.push(s2);
                            state.push(1);
                            pushed = Some(id);
                            break;
                        }
                        Some(&id) if state[id] == 1 => {
                            return Err(MorseError::AcyclicityViolation(s2))
                        }
                        Some(_) => {}
                    }
                }
            }
            match pushed {
                Some(id) => stack.push((id, 0)),
                None => {
                    state[node] = 2;
                    post.push(node);
                    stack.pop();
                }
            }
        }

        let mut parity = vec![false; nodes.len()];
        parity[0] = true;
        let mut hits = Vec::new();
        for &node in post.iter().rev() {
            if !parity[node] {
                continue;
            }
            for tau in exits(nodes[node]) {
                if self.is_critical(tau) {
                    hits.push(tau);
                } else if let Some(s2) = self.up_partner(tau) {
                    let id = slot[&s2];
                    parity[id] = !parity[id];
                }
            }
        }
        Ok(odd_entries(hits))
    }

    /// Text dump, one `CELL x y dim value CRITICAL|PAIR px py` line per cell.
    pub fn dump(&self, k: &CubicalComplex) -> String {
        let mut out = String::new();
        for c in k.cells() {
            let _ = write!(out, "CELL {} {} {} {} ", c.x, c.y, c.dim(), k.value(c));
            match self.partner(c) {
                Some(p) => {
                    let _ = writeln!(out, "PAIR {} {}", p.x, p.y);
                }
                None => out.push_str("CRITICAL\n"),
            }
        }
        out
    }
}

/// Cells appearing an odd number of times, sorted.
fn odd_entries(mut cells: Vec<Cell>) -> Vec<Cell> {
    cells.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let mut j = i;
        while j < cells.len() && cells[j] == cells[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(cells[i]);
        }
        i = j;
    }
    out
}

/// A critical cell as a generator of the Morse complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CriticalCell {
    pub cell: Cell,
    pub dim: u8,
    pub value: u8,
}

impl CriticalCell {
    pub fn new(cell: Cell, dim: u8, value: u8) -> Self {
        Self { cell, dim, value }
    }
}

/// Morse chain complex over the two-element field. Generators are stored in
/// filtration order; each boundary lists earlier generators, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorseComplex {
    cells: Vec<CriticalCell>,
    boundary: Vec<Vec<u32>>,
}

impl MorseComplex {
    /// Assemble a complex from generators in filtration order and their
    /// boundaries (indices into `cells`). Validates the grading, the order
    /// and that the boundary squares to zero.
    pub fn from_parts(
        cells: Vec<CriticalCell>,
        mut boundary: Vec<Vec<u32>>,
    ) -> Result<Self, MorseError> {
        let bad = |s: String| Err(MorseError::InvalidComplex(s));
        if cells.len() != boundary.len() {
            return bad(format!(
                "{} generators but {} boundaries",
                cells.len(),
                boundary.len()
            ));
        }
        for (i, col) in boundary.iter_mut().enumerate() {
            let c = cells[i];
            if c.dim > 2 {
                return bad(format!("generator {i} has dimension {}", c.dim));
            }
            if i > 0 && cells[i - 1].value > c.value {
                return bad(format!("generator {i} breaks the value order"));
            }
            col.sort_unstable();
            if col.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("boundary of {i} repeats a generator"));
            }
            for &j in col.iter() {
                let j = j as usize;
                if j >= i {
                    return bad(format!("boundary of {i} refers to later generator {j}"));
                }
                if cells[j].dim + 1 != c.dim {
                    return bad(format!("boundary of {i} has wrong-dimension entry {j}"));
                }
            }
        }
        let m = Self { cells, boundary };
        if !m.boundary_squares_to_zero() {
            return bad("boundary does not square to zero".into());
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CriticalCell] {
        &self.cells
    }

    pub fn boundary(&self, i: usize) -> &[u32] {
        &self.boundary[i]
    }

    /// Number of generators per dimension.
    pub fn ranks(&self) -> [usize; 3] {
        let mut r = [0; 3];
        for c in &self.cells {
            r[c.dim as usize] += 1;
        }
        r
    }

    pub fn boundary_squares_to_zero(&self) -> bool {
        self.boundary.iter().all(|col| {
            let mut acc: Vec<u32> = col
                .iter()
                .flat_map(|&j| self.boundary[j as usize].iter().copied())
                .collect();
            acc.sort_unstable();
            acc.chunks(2).all(|p| p.len() == 2 && p[0] == p[1])
        })
    }
}

pub fn build_morse_complex(
    g: &GradientField,
    k: &CubicalComplex,
) -> Result<MorseComplex, MorseError> {
    build_morse_complex_with(g, k, Execution::default())
}

pub fn build_morse_complex_with(
    g: &GradientField,
    k: &CubicalComplex,
    exec: Execution,
) -> Result<MorseComplex, MorseError> {
    let mut crit: Vec<CriticalCell> = g
        .critical_cells()
        .into_iter()
        .flatten()
        .map(|c| CriticalCell::new(c, c.dim(), k.value(c)))
        .collect();
    crit.sort_unstable_by_key(|c| (c.value, c.dim, c.cell));
    let order: HashMap<Cell, u32> = crit
        .iter()
        .enumerate()
        .map(|(i, c)| (c.cell, i as u32))
        .collect();

    // Flow roots of every vertex, memoized along each walk.
    let mut root: Vec<u32> = vec![u32::MAX; k.num_vertices()];
    let w = k.width();
    let vidx = |c: Cell| (c.y / 2 * w + c.x / 2) as usize;
    for v in 0..k.num_vertices() {
        if root[v] != u32::MAX {
            continue;
        }
        let mut path = Vec::new();
        let mut u = Cell::vertex(v as u32 % w, v as u32 / w);
        let found = loop {
            if root[vidx(u)] != u32::MAX {
                break root[vidx(u)];
            }
            if path.len() > k.num_vertices() {
                return Err(MorseError::AcyclicityViolation(u));
            }
            path.push(vidx(u));
            match g.up_partner(u) {
                None => break order[&u],
                Some(e) => {
                    let ends = k.faces(e).expect("edge in grid");
                    u = if ends[0] == u { ends[1] } else { ends[0] };
                }
            }
        };
        for p in path {
            root[p] = found;
        }
    }

    let boundaries = par::map_slice(exec, &crit, |c| -> Result<Vec<u32>, MorseError> {
        Ok(match c.dim {
            0 => Vec::new(),
            1 => {
                let ends = k.faces(c.cell).expect("edge in grid");
                let (a, b) = (root[vidx(ends[0])], root[vidx(ends[1])]);
                match a.cmp(&b) {
                    std::cmp::Ordering::Equal => Vec::new(),
                    std::cmp::Ordering::Less => vec![a, b],
                    std::cmp::Ordering::Greater => vec![b, a],
                }
            }
            _ => {
                let mut col: Vec<u32> = g
                    .square_boundary(k, c.cell)?
                    .into_iter()
                    .map(|t| order[&t])
                    .collect();
                col.sort_unstable();
                col
            }
        })
    });
    let boundary = boundaries.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(MorseComplex {
        cells: crit,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::GrayImage;
    use proptest::prelude::*;

    fn complex(w: usize, h: usize, v: Vec<u8>) -> CubicalComplex {
        CubicalComplex::from_image(&GrayImage::new(w, h, v).unwrap())
    }

    fn ring() -> CubicalComplex {
        complex(3, 3, vec![0, 0, 0, 0, 255, 0, 0, 0, 0])
    }

    #[test]
    fn single_pixel_is_critical() {
        let k = complex(1, 1, vec![9]);
        let g = build_gradient(&k);
        assert!(g.is_critical(Cell::new(0, 0)));
        assert_eq!(g.critical_counts(), [1, 0, 0]);
    }

    #[test]
    fn constant_image_has_one_critical_vertex() {
        for (w, h) in [(1, 1), (2, 3), (5, 5), (7, 2)] {
            let k = complex(w, h, vec![42; w * h]);
            let g = build_gradient(&k);
            g.verify(&k).unwrap();
            assert_eq!(g.critical_cells()[0], vec![Cell::new(0, 0)]);
            assert_eq!(g.critical_counts(), [1, 0, 0]);
            let m = build_morse_complex(&g, &k).unwrap();
            assert_eq!(m.ranks(), [1, 0, 0]);
        }
    }

    #[test]
    fn two_pixel_strip() {
        let k = complex(2, 1, vec![0, 5]);
        let g = build_gradient(&k);
        assert!(g.is_critical(Cell::new(0, 0)));
        assert_eq!(g.partner(Cell::new(2, 0)), Some(Cell::new(1, 0)));
        assert_eq!(g.partner(Cell::new(1, 0)), Some(Cell::new(2, 0)));
        assert_eq!(g.trace_vpaths(&k, Cell::new(0, 0)).unwrap(), vec![]);
        assert_eq!(
            g.trace_vpaths(&k, Cell::new(1, 0)),
            Err(MorseError::NotCritical(Cell::new(1, 0)))
        );
    }

    #[test]
    fn ring_image_morse_data() {
        let k = ring();
        let g = build_gradient(&k);
        g.verify(&k).unwrap();
        let counts = g.critical_counts();
        assert_eq!(counts[0] as i64 - counts[1] as i64 + counts[2] as i64, 1);
        assert!(counts[0] >= 1);
        // the bright centre fills the ring: some critical square at 255
        let squares = &g.critical_cells()[2];
        assert!(squares.iter().any(|s| k.value(*s) == 255));
        let m = build_morse_complex(&g, &k).unwrap();
        assert!(m.boundary_squares_to_zero());
        // square boundaries reach a critical edge that is born at 0
        let sq = m
            .cells()
            .iter()
            .position(|c| c.dim == 2 && c.value == 255)
            .unwrap();
        assert!(m
            .boundary(sq)
            .iter()
            .any(|&j| m.cells()[j as usize].value == 0));
    }

    #[test]
    fn dump_format() {
        let k = complex(2, 1, vec![0, 5]);
        let g = build_gradient(&k);
        assert_eq!(
            g.dump(&k),
            "CELL 0 0 0 0 CRITICAL\nCELL 1 0 1 5 PAIR 2 0\nCELL 2 0 0 5 PAIR 1 0\n"
        );
    }

    #[test]
    fn from_parts_validation() {
        let v = CriticalCell::new(Cell::new(0, 0), 0, 0);
        let e = CriticalCell::new(Cell::new(1, 0), 1, 1);
        assert!(MorseComplex::from_parts(vec![v, e], vec![vec![], vec![0]]).is_ok());
        assert!(MorseComplex::from_parts(vec![e, v], vec![vec![], vec![]]).is_err());
        assert!(MorseComplex::from_parts(vec![v, e], vec![vec![], vec![1]]).is_err());
        assert!(MorseComplex::from_parts(vec![v], vec![]).is_err());
        let s = CriticalCell::new(Cell::new(1, 1), 2, 2);
        // boundary of the square hits the edge whose boundary is nonzero
        assert!(MorseComplex::from_parts(vec![v, e, s], vec![vec![], vec![0], vec![1]]).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let vals: Vec<u8> = (0..400u32).map(|i| (i * 7919 % 251) as u8).collect();
        let k = complex(20, 20, vals);
        let a = build_gradient_with(&k, TieBreak::RowMajor, Execution::Sequential);
        let b = build_gradient_with(&k, TieBreak::RowMajor, Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(
            build_morse_complex_with(&a, &k, Execution::Sequential).unwrap(),
            build_morse_complex_with(&b, &k, Execution::Parallel).unwrap()
        );
    }

    fn any_complex() -> impl Strategy<Value = CubicalComplex> {
        (1usize..10, 1usize..10, 1u8..=255).prop_flat_map(|(w, h, top)| {
            prop::collection::vec(0..=top, w * h).prop_map(move |v| complex(w, h, v))
        })
    }

    proptest! {
        #[test]
        fn gradient_invariants(k in any_complex(), reverse in any::<bool>()) {
            let tie = if reverse { TieBreak::ReverseRowMajor } else { TieBreak::RowMajor };
            let g = build_gradient_with(&k, tie, Execution::Sequential);
            prop_assert!(g.verify(&k).is_ok());
            let c = g.critical_counts();
            prop_assert_eq!(c[0] as i64 - c[1] as i64 + c[2] as i64, 1);
            let m = build_morse_complex(&g, &k).unwrap();
            prop_assert!(m.boundary_squares_to_zero());
            for (i, cell) in m.cells().iter().enumerate() {
                let traced = g.trace_vpaths(&k, cell.cell).unwrap();
                prop_assert_eq!(traced.len(), m.boundary(i).len());
            }
        }
    }
}
