//! Persistence pairing of the filtered Morse complex, a brute-force oracle
//! over the full cubical complex, Betti numbers and the bottleneck distance.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::cubical::{Cell, CubicalComplex};
use crate::morse::MorseComplex;

/// Default cell budget for [`oracle_persistence`].
pub const DEFAULT_ORACLE_LIMIT: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PersistenceError {
    #[error("oracle refused a complex with {cells} cells (limit {limit})")]
    OracleTooLarge { cells: usize, limit: usize },
}

/// When a class dies. Essential classes sort after every finite death.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Death {
    Finite(u8),
    Essential,
}

impl fmt::Display for Death {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Death::Finite(v) => write!(f, "{v}"),
            Death::Essential => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PersistencePair {
    pub dim: u8,
    pub birth: u8,
    pub death: Death,
    /// The cell whose entry creates the class.
    pub creator: Cell,
    /// The cell whose entry kills it; `None` for essential classes.
    pub destructor: Option<Cell>,
}

impl PersistencePair {
    pub fn is_essential(&self) -> bool {
        self.death == Death::Essential
    }

    /// Birth and death at the same grayscale value.
    pub fn is_zero_length(&self) -> bool {
        self.death == Death::Finite(self.birth)
    }

    /// `death - birth` for finite pairs.
    pub fn lifespan(&self) -> Option<u8> {
        match self.death {
            Death::Finite(d) => Some(d - self.birth),
            Death::Essential => None,
        }
    }

    fn sort_key(&self) -> (u8, u8, Death, Cell) {
        (self.dim, self.birth, self.death, self.creator)
    }
}

/// Persistence pairs in canonical order: dimension, birth, death, then
/// creator cell.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PersistenceDiagram {
    pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn new(mut pairs: Vec<PersistencePair>) -> Self {
        pairs.sort_by_key(PersistencePair::sort_key);
        Self { pairs }
    }

    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn without_zero_length(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .filter(|p| !p.is_zero_length())
                .copied()
                .collect(),
        }
    }

    /// Sorted `(dim, birth, death)` triples of the pairs with positive
    /// length. This is what two valid reductions of the same filtration
    /// must agree on.
    pub fn signature(&self) -> Vec<(u8, u8, Death)> {
        let mut v: Vec<_> = self
            .pairs
            .iter()
            .filter(|p| !p.is_zero_length())
            .map(|p| (p.dim, p.birth, p.death))
            .collect();
        v.sort();
        v
    }

    /// Pairs of one dimension.
    pub fn dimension(&self, dim: u8) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    /// `(beta_0, beta_1)` of the sublevel set at `t`, read off the diagram.
    pub fn betti_at(&self, t: u8) -> [usize; 2] {
        let mut out = [0; 2];
        for p in &self.pairs {
            let alive = p.birth <= t
                && match p.death {
                    Death::Finite(d) => t < d,
                    Death::Essential => true,
                };
            if alive && p.dim < 2 {
                out[p.dim as usize] += 1;
            }
        }
        out
    }
}

fn add_column(target: &mut Vec<u32>, source: &[u32]) {
    let mut out = Vec::with_capacity(target.len() + source.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < source.len() {
        match target[i].cmp(&source[j]) {
            Ordering::Less => {
                out.push(target[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(source[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&target[i..]);
    out.extend_from_slice(&source[j..]);
    *target = out;
}

/// Reduced boundary columns of the Morse complex: `pivot_row[j]` is the
/// lowest nonzero row of column `j` after reduction, if any.
///
/// Columns are reduced left to right, highest dimension first, and columns
/// of generators that are already known to be pivots are cleared.
fn reduce(m: &MorseComplex) -> Vec<Option<u32>> {
    let n = m.len();
    let mut pivot_row: Vec<Option<u32>> = vec![None; n];
    let mut column_of_pivot: Vec<Option<u32>> = vec![None; n];
    let mut reduced: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut cleared = vec![false; n];
    for dim in [2u8, 1] {
        for j in 0..n {
            if m.cells()[j].dim != dim || cleared[j] {
                continue;
            }
            let mut col = m.boundary(j).to_vec();
            while let Some(&low) = col.last() {
                match column_of_pivot[low as usize] {
                    Some(other) => add_column(&mut col, &reduced[other as usize]),
                    None => break,
                }
            }
            if let Some(&low) = col.last() {
                pivot_row[j] = Some(low);
                column_of_pivot[low as usize] = Some(j as u32);
                cleared[low as usize] = true;
            }
            reduced[j] = col;
        }
    }
    pivot_row
}

/// Persistence diagram of the filtered Morse complex. Zero-length pairs
/// are kept.
pub fn compute_persistence(m: &MorseComplex) -> PersistenceDiagram {
    let pivots = reduce(m);
    let cells = m.cells();
    let mut is_pivot = vec![false; m.len()];
    let mut pairs = Vec::new();
    for (j, pivot) in pivots.iter().enumerate() {
        if let Some(i) = *pivot {
            let i = i as usize;
            is_pivot[i] = true;
            pairs.push(PersistencePair {
                dim: cells[i].dim,
                birth: cells[i].value,
                death: Death::Finite(cells[j].value),
                creator: cells[i].cell,
                destructor: Some(cells[j].cell),
            });
        }
    }
    for (i, c) in cells.iter().enumerate() {
        // a generator with a nonzero reduced column is a destructor
        if !is_pivot[i] && pivots[i].is_none() {
            pairs.push(PersistencePair {
                dim: c.dim,
                birth: c.value,
                death: Death::Essential,
                creator: c.cell,
                destructor: None,
            });
        }
    }
    PersistenceDiagram::new(pairs)
}

/// Betti numbers `[beta_0, beta_1, beta_2]` of the Morse complex.
pub fn betti_numbers(m: &MorseComplex) -> [usize; 3] {
    let ranks = m.ranks();
    let mut boundary_rank = [0usize; 3];
    for (j, p) in reduce(m).iter().enumerate() {
        if p.is_some() {
            boundary_rank[m.cells()[j].dim as usize] += 1;
        }
    }
    let next = |p: usize| boundary_rank.get(p + 1).copied().unwrap_or(0);
    [0, 1, 2].map(|p| ranks[p] - boundary_rank[p] - next(p))
}

/// Persistence of the full cubical complex by plain column reduction over
/// every cell, ordered by `(value, dimension, y, x)`. Shares no code with
/// the Morse route.
pub fn oracle_persistence(
    k: &CubicalComplex,
    limit: usize,
) -> Result<PersistenceDiagram, PersistenceError> {
    let n = k.num_cells();
    if n > limit {
        return Err(PersistenceError::OracleTooLarge { cells: n, limit });
    }
    let mut order: Vec<Cell> = k.cells().collect();
    order.sort_by_key(|&c| (k.value(c), c.dim(), c.y, c.x));
    let mut position = vec![0usize; n];
    for (i, &c) in order.iter().enumerate() {
        position[k.index(c)] = i;
    }
    let mut columns: Vec<BTreeSet<usize>> = order
        .iter()
        .map(|&c| {
            k.faces(c)
                .expect("cell in grid")
                .iter()
                .map(|f| position[k.index(*f)])
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        while let Some(&low) = columns[j].iter().next_back() {
            let Some(other) = owner[low] else { break };
            let src = columns[other].clone();
            let col = &mut columns[j];
            for r in src {
                if !col.remove(&r) {
                    col.insert(r);
                }
            }
        }
        if let Some(&low) = columns[j].iter().next_back() {
            owner[low] = Some(j);
        }
    }
    let mut pairs = Vec::new();
    for (i, &c) in order.iter().enumerate() {
        if !columns[i].is_empty() {
            continue;
        }
        let (death, destructor) = match owner[i] {
            Some(j) => (Death::Finite(k.value(order[j])), Some(order[j])),
            None => (Death::Essential, None),
        };
        pairs.push(PersistencePair {
            dim: c.dim(),
            birth: k.value(c),
            death,
            creator: c,
            destructor,
        });
    }
    Ok(PersistenceDiagram::new(pairs))
}

/// Bottleneck distance between the dimension-`dim` parts of two diagrams.
///
/// Finite points may be matched to each other at L-infinity cost or to
/// the diagonal at half their lifespan; essential classes only match each
/// other, at the difference of their births. Returns infinity when the
/// essential counts differ. The result is always an integer or a half
/// integer, so the `f64` is exact.
pub fn bottleneck_distance(a: &PersistenceDiagram, b: &PersistenceDiagram, dim: u8) -> f64 {
    let split = |d: &PersistenceDiagram| {
        let mut finite = Vec::new();
        let mut essential = Vec::new();
        for p in d.dimension(dim) {
            match p.death {
                Death::Finite(death) if death > p.birth => {
                    finite.push((i32::from(p.birth), i32::from(death)))
                }
                Death::Finite(_) => {}
                Death::Essential => essential.push(i32::from(p.birth)),
            }
        }
        essential.sort_unstable();
        (finite, essential)
    };
    let (fa, mut ea) = split(a);
    let (fb, mut eb) = split(b);
    if ea.len() != eb.len() {
        return f64::INFINITY;
    }
    ea.sort_unstable();
    eb.sort_unstable();
    // Sorted matching is optimal for points on a line.
    let essential_cost2 = ea
        .iter()
        .zip(&eb)
        .map(|(x, y)| 2 * (x - y).abs())
        .max()
        .unwrap_or(0);
    let finite_cost2 = finite_bottleneck_doubled(&fa, &fb);
    f64::from(essential_cost2.max(finite_cost2)) / 2.0
}

/// Twice the bottleneck distance between two finite point sets.
fn finite_bottleneck_doubled(a: &[(i32, i32)], b: &[(i32, i32)]) -> i32 {
    let linf2 = |p: (i32, i32), q: (i32, i32)| 2 * (p.0 - q.0).abs().max((p.1 - q.1).abs());
    let diag2 = |p: (i32, i32)| p.1 - p.0;

    let mut candidates: Vec<i32> = vec![0];
    candidates.extend(a.iter().map(|&p| diag2(p)));
    candidates.extend(b.iter().map(|&p| diag2(p)));
    for &p in a {
        for &q in b {
            candidates.push(linf2(p, q));
        }
    }
    candidates.sort_unstable();
    candidates.dedup();

    // Left side: points of `a`, then diagonal projections of `b`.
    // Right side: points of `b`, then diagonal projections of `a`.
    let (na, nb) = (a.len(), b.len());
    let feasible = |delta: i32| -> bool {
        let n = na + nb;
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|l| {
                let mut v = Vec::new();
                if l < na {
                    for (j, &q) in b.iter().enumerate() {
                        if linf2(a[l], q) <= delta {
                            v.push(j);
                        }
                    }
                    if diag2(a[l]) <= delta {
                        v.push(nb + l);
                    }
                } else {
                    let j = l - na;
                    if diag2(b[j]) <= delta {
                        v.push(j);
                    }
                    // diagonal to diagonal is free
                    v.extend((0..na).map(|i| nb + i));
                }
                v
            })
            .collect();
        perfect_matching_exists(&adj, n)
    };

    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Kuhn's augmenting-path algorithm on a square bipartite graph.
fn perfect_matching_exists(adj: &[Vec<usize>], n: usize) -> bool {
    fn augment(
        l: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        match_right: &mut [Option<usize>],
    ) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if match_right[r].is_none_or(|l2| augment(l2, adj, seen, match_right)) {
                match_right[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut match_right = vec![None; n];
    for l in 0..n {
        let mut seen = vec![false; n];
        if !augment(l, adj, &mut seen, &mut match_right) {
            return false;
        }
    }
    true
}
