//! Lattice geometry, walks, loop erasure and polygon classification.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, LwwError, Result};
use crate::series::Q;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<i32>);

impl Point {
    pub fn origin(d: usize) -> Self {
        Point(vec![0; d])
    }

    /// The unit vector along axis `axis` with the given sign.
    pub fn unit(d: usize, axis: usize, sign: i32) -> Self {
        let mut c = vec![0; d];
        c[axis] = sign;
        Point(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Point {
        Point(self.0.iter().map(|a| -a).collect())
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|&a| (a as i64).abs()).sum()
    }

    pub fn norm2(&self) -> i64 {
        self.0.iter().map(|&a| (a as i64) * (a as i64)).sum()
    }

    pub fn is_adjacent_lattice(&self, other: &Point) -> bool {
        self.sub(other).l1() == 1
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<i32>> for Point {
    fn from(v: Vec<i32>) -> Self {
        Point(v)
    }
}

/// A finite simple graph whose vertices are labelled by points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGraph {
    vertices: Vec<Point>,
    index: HashMap<Point, usize>,
    adj: Vec<Vec<usize>>,
}

impl FiniteGraph {
    pub fn new(vertices: Vec<Point>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = vertices.len();
        let mut index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return precondition(format!("duplicate vertex {v:?}"));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(LwwError::Domain(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return precondition("self-loops are not allowed");
            }
            if !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for row in adj.iter_mut() {
            row.sort_by(|&x, &y| vertices[x].cmp(&vertices[y]));
        }
        Ok(FiniteGraph { vertices, index, adj })
    }

    /// The `w` by `h` box of Z^2 with nearest-neighbour edges.
    pub fn grid(w: usize, h: usize) -> Self {
        let mut vertices = Vec::new();
        for x in 0..w as i32 {
            for y in 0..h as i32 {
                vertices.push(Point(vec![x, y]));
            }
        }
        let mut edges = Vec::new();
        for (i, p) in vertices.iter().enumerate() {
            for (j, q) in vertices.iter().enumerate() {
                if i < j && p.is_adjacent_lattice(q) {
                    edges.push((i, j));
                }
            }
        }
        FiniteGraph::new(vertices, &edges).expect("grid is well formed")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, row) in self.adj.iter().enumerate() {
            for &b in row {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Reads `{"vertices": [...], "edges": [[i, j], ...]}`. Vertices are
    /// coordinate arrays, or integers for a graph on the line.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Vertex {
            Scalar(i32),
            Coords(Vec<i32>),
        }
        #[derive(Deserialize)]
        struct GraphFile {
            vertices: Vec<Vertex>,
            edges: Vec<[usize; 2]>,
        }
        let file: GraphFile = serde_json::from_str(text).map_err(|e| LwwError::Parse(format!("graph file: {e}")))?;
        let vertices: Vec<Point> = file
            .vertices
            .into_iter()
            .map(|v| match v {
                Vertex::Scalar(x) => Point(vec![x]),
                Vertex::Coords(c) => Point(c),
            })
            .collect();
        if let Some(first) = vertices.first() {
            if vertices.iter().any(|v| v.dim() != first.dim()) {
                return precondition("graph vertices must share one dimension");
            }
        }
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        FiniteGraph::new(vertices, &edges)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphCtx {
    Lattice(usize),
    Finite(FiniteGraph),
}

impl GraphCtx {
    pub fn lattice(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        GraphCtx::Lattice(d)
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, GraphCtx::Lattice(_))
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            GraphCtx::Lattice(d) => p.dim() == *d,
            GraphCtx::Finite(g) => g.index.contains_key(p),
        }
    }

    pub fn neighbors(&self, p: &Point) -> Result<Vec<Point>> {
        match self {
            GraphCtx::Lattice(d) => {
                if p.dim() != *d {
                    return Err(LwwError::Domain(format!("{p:?} is not a point of Z^{d}")));
                }
                let mut out = Vec::with_capacity(2 * d);
                for axis in 0..*d {
                    for sign in [-1, 1] {
                        out.push(p.add(&Point::unit(*d, axis, sign)));
                    }
                }
                out.sort();
                Ok(out)
            }
            GraphCtx::Finite(g) => match g.index.get(p) {
                Some(&i) => Ok(g.adj[i].iter().map(|&j| g.vertices[j].clone()).collect()),
                None => Err(LwwError::Domain(format!("{p:?} is not a vertex of the graph"))),
            },
        }
    }

    pub fn adjacent(&self, a: &Point, b: &Point) -> bool {
        match self {
            GraphCtx::Lattice(_) => a.is_adjacent_lattice(b),
            GraphCtx::Finite(g) => match (g.index.get(a), g.index.get(b)) {
                (Some(&i), Some(&j)) => g.adj[i].contains(&j),
                _ => false,
            },
        }
    }

    pub fn check_walk(&self, w: &Walk) -> Result<()> {
        for p in &w.0 {
            if !self.contains(p) {
                return Err(LwwError::Domain(format!("{p:?} not in graph")));
            }
        }
        for pair in w.0.windows(2) {
            if !self.adjacent(&pair[0], &pair[1]) {
                return precondition(format!("{:?} and {:?} are not adjacent", pair[0], pair[1]));
            }
        }
        Ok(())
    }
}

/// A nearest-neighbour walk stored as its vertex sequence.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Walk(pub Vec<Point>);

impl fmt::Debug for Walk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Walk{:?}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkClass {
    Saw,
    Sap,
    Loop,
    General,
}

impl Walk {
    pub fn new(vertices: Vec<Point>) -> Self {
        assert!(!vertices.is_empty(), "a walk has at least one vertex");
        Walk(vertices)
    }

    pub fn from_coords(coords: &[&[i32]]) -> Self {
        Walk::new(coords.iter().map(|c| Point(c.to_vec())).collect())
    }

    /// One-dimensional convenience constructor.
    pub fn line(xs: &[i32]) -> Self {
        Walk::new(xs.iter().map(|&x| Point(vec![x])).collect())
    }

    pub fn trivial(p: Point) -> Self {
        Walk(vec![p])
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> &Point {
        &self.0[0]
    }

    pub fn end(&self) -> &Point {
        self.0.last().unwrap()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.0
    }

    /// The subwalk on the closed index interval `[a, b]`.
    pub fn sub(&self, a: usize, b: usize) -> Walk {
        Walk(self.0[a..=b].to_vec())
    }

    pub fn range(&self) -> BTreeSet<Point> {
        self.0.iter().cloned().collect()
    }

    pub fn reversed(&self) -> Walk {
        let mut v = self.0.clone();
        v.reverse();
        Walk(v)
    }

    pub fn is_closed(&self) -> bool {
        self.start() == self.end()
    }

    pub fn is_self_avoiding(&self) -> bool {
        let set: BTreeSet<&Point> = self.0.iter().collect();
        set.len() == self.0.len()
    }

    pub fn classify(&self) -> WalkClass {
        if self.is_self_avoiding() {
            return WalkClass::Saw;
        }
        if !self.is_closed() {
            return WalkClass::General;
        }
        let inner = &self.0[..self.0.len() - 1];
        let set: BTreeSet<&Point> = inner.iter().collect();
        if self.len() >= 2 && set.len() == inner.len() {
            WalkClass::Sap
        } else {
            WalkClass::Loop
        }
    }

    pub fn concat(&self, other: &Walk) -> Result<Walk> {
        if self.end() != other.start() {
            return precondition("concatenation needs the first walk to end where the second starts");
        }
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0[1..]);
        Ok(Walk(v))
    }

    pub fn diamond_concat(&self, other: &Walk, ctx: &GraphCtx) -> Result<Walk> {
        if !ctx.adjacent(self.end(), other.start()) {
            return precondition("diamond concatenation needs adjacent endpoints");
        }
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Ok(Walk(v))
    }

    /// Applies a single loop erasure. Returns the shortened walk and the
    /// removed polygon, or the walk itself when it is self-avoiding.
    pub fn single_loop_erase(&self) -> (Walk, Option<Walk>) {
        let mut seen: HashMap<&Point, usize> = HashMap::new();
        for (j, p) in self.0.iter().enumerate() {
            if let Some(&i) = seen.get(p) {
                let mut v = self.0[..=i].to_vec();
                v.extend_from_slice(&self.0[j + 1..]);
                return (Walk(v), Some(Walk(self.0[i..=j].to_vec())));
            }
            seen.insert(p, j);
        }
        (self.clone(), None)
    }

    /// Chronological loop erasure. Returns the loop-erased walk and the
    /// erased polygons in the order they were removed.
    pub fn loop_erase_raw(&self) -> (Walk, Vec<Walk>) {
        let mut stack: Vec<Point> = Vec::with_capacity(self.0.len());
        let mut pos: HashMap<Point, usize> = HashMap::new();
        let mut erased = Vec::new();
        for p in &self.0 {
            if let Some(&i) = pos.get(p) {
                let mut polygon: Vec<Point> = stack[i..].to_vec();
                polygon.push(p.clone());
                for q in stack.drain(i + 1..) {
                    pos.remove(&q);
                }
                erased.push(Walk(polygon));
            } else {
                pos.insert(p.clone(), stack.len());
                stack.push(p.clone());
            }
        }
        (Walk(stack), erased)
    }

    /// Number of loops erased by chronological loop erasure.
    pub fn loop_count(&self) -> usize {
        self.loop_erase_raw().1.len()
    }

    pub fn loop_erase(&self, ctx: &GraphCtx) -> LoopErasure {
        let (saw, erased) = self.loop_erase_raw();
        let loops = erased.iter().map(|p| SapKey::new(p, ctx)).collect();
        LoopErasure { saw, record: LoopRecord { loops }, erased }
    }

    /// Loop erasure computed through last exit times.
    pub fn loop_erase_last_exit(&self) -> Walk {
        let times = self.last_exit_times();
        Walk(times.iter().map(|&t| self.0[t].clone()).collect())
    }

    /// The indices `l_0 = 0, l_k = (last visit of the vertex at l_{k-1}) + 1`
    /// that stay within the walk.
    pub fn last_exit_times(&self) -> Vec<usize> {
        let mut last: HashMap<&Point, usize> = HashMap::new();
        for (j, p) in self.0.iter().enumerate() {
            last.insert(p, j);
        }
        let mut out = vec![0usize];
        loop {
            let next = last[&self.0[*out.last().unwrap()]] + 1;
            if next > self.len() {
                break;
            }
            out.push(next);
        }
        out
    }

    /// Splits the walk along cut times of its loop erasure `eta`. The cuts
    /// must run from 0 to `|eta|`. The piece for `[r, s]` starts at the
    /// last-exit time of `eta_r`; pieces are joined by single steps, and the
    /// final piece runs to the end of the walk.
    pub fn preimage_segments(&self, cuts: &[usize]) -> Result<Vec<Walk>> {
        let exits = self.last_exit_times();
        let k = exits.len() - 1;
        if cuts.is_empty() || cuts[0] != 0 || *cuts.last().unwrap() != k {
            return precondition("cut times must start at 0 and end at the loop-erased length");
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return precondition("cut times must be strictly increasing");
        }
        if cuts.len() == 1 {
            return Ok(vec![self.clone()]);
        }
        let mut out = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let (r, s) = (w[0], w[1]);
            let end = if s == k { self.len() } else { exits[s] - 1 };
            out.push(self.sub(exits[r], end));
        }
        Ok(out)
    }

    /// Shrinking times of the self-avoiding walk `eta` by `self`, as pairs
    /// `(s_k, t_k)` of a time of `self` and an index of `eta`.
    pub fn shrinking_times(&self, eta: &Walk) -> Result<Vec<(usize, usize)>> {
        if self.start() != eta.end() {
            return precondition("the walk must start at the end of eta");
        }
        if !eta.is_self_avoiding() {
            return precondition("eta must be self-avoiding");
        }
        let index: HashMap<&Point, usize> = eta.0.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut limit = eta.len();
        let mut out = Vec::new();
        while limit > 0 {
            let hit = self
                .0
                .iter()
                .enumerate()
                .find(|(_, p)| index.get(p).is_some_and(|&i| i < limit));
            match hit {
                Some((s, p)) => {
                    let t = index[p];
                    out.push((s, t));
                    limit = t;
                }
                None => break,
            }
        }
        Ok(out)
    }
}

pub struct LoopErasure {
    pub saw: Walk,
    pub record: LoopRecord,
    pub erased: Vec<Walk>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopRecord {
    pub loops: Vec<SapKey>,
}

impl LoopRecord {
    pub fn count(&self) -> usize {
        self.loops.len()
    }

    /// Multiplicity of each polygon class.
    pub fn multiset(&self) -> HashMap<SapKey, usize> {
        let mut m = HashMap::new();
        for k in &self.loops {
            *m.entry(k.clone()).or_insert(0) += 1;
        }
        m
    }
}

/// Signed permutation matrices acting on Z^d, as (permutation, signs).
pub fn point_group(d: usize) -> Vec<(Vec<usize>, Vec<i32>)> {
    let mut perms = Vec::new();
    let mut current: Vec<usize> = (0..d).collect();
    permute(&mut current, 0, &mut perms);
    let mut out = Vec::new();
    for p in perms {
        for mask in 0..(1u32 << d) {
            let signs = (0..d).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            out.push((p.clone(), signs));
        }
    }
    out
}

fn permute(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, out);
        v.swap(k, i);
    }
}

pub fn apply_isometry(g: &(Vec<usize>, Vec<i32>), p: &Point) -> Point {
    Point(g.0.iter().zip(&g.1).map(|(&i, &s)| s * p.0[i]).collect())
}

/// Canonical representative of a self-avoiding polygon class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SapKey(pub Vec<Point>);

impl SapKey {
    /// `polygon` is a closed self-avoiding walk (first vertex equals last).
    pub fn new(polygon: &Walk, ctx: &GraphCtx) -> Self {
        let cycle = &polygon.0[..polygon.0.len() - 1];
        match ctx {
            GraphCtx::Lattice(d) => {
                let mut best: Option<Vec<Point>> = None;
                for g in point_group(*d) {
                    let image: Vec<Point> = cycle.iter().map(|p| apply_isometry(&g, p)).collect();
                    consider_cyclic(&image, true, &mut best);
                }
                SapKey(best.unwrap())
            }
            GraphCtx::Finite(_) => {
                let mut best = None;
                consider_cyclic(cycle, false, &mut best);
                SapKey(best.unwrap())
            }
        }
    }
}

fn consider_cyclic(cycle: &[Point], translate: bool, best: &mut Option<Vec<Point>>) {
    let n = cycle.len();
    for orientation in 0..2 {
        for start in 0..n {
            let seq: Vec<Point> = (0..n)
                .map(|i| {
                    let j = if orientation == 0 { (start + i) % n } else { (start + n - i) % n };
                    cycle[j].clone()
                })
                .collect();
            let seq = if translate {
                let base = seq[0].clone();
                seq.iter().map(|p| p.sub(&base)).collect()
            } else {
                seq
            };
            if best.as_ref().is_none_or(|b| seq < *b) {
                *best = Some(seq);
            }
        }
    }
}

/// Activities attached to erased polygons.
#[derive(Clone, Debug, PartialEq)]
pub enum LoopActivity {
    Constant(Q),
    Table { map: HashMap<SapKey, Q>, default: Q },
}

impl LoopActivity {
    pub fn constant(lambda: Q) -> Self {
        assert!(lambda >= Q::zero(), "activities are nonnegative");
        LoopActivity::Constant(lambda)
    }

    pub fn from_int(n: i64) -> Self {
        LoopActivity::Constant(Q::from_integer(n.into()))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        LoopActivity::Constant(Q::new(p.into(), q.into()))
    }

    pub fn as_constant(&self) -> Option<&Q> {
        match self {
            LoopActivity::Constant(l) => Some(l),
            LoopActivity::Table { .. } => None,
        }
    }

    pub fn activity_of(&self, key: &SapKey) -> Q {
        match self {
            LoopActivity::Constant(l) => l.clone(),
            LoopActivity::Table { map, default } => map.get(key).cloned().unwrap_or_else(|| default.clone()),
        }
    }

    /// Supremum of the activities.
    pub fn sup(&self) -> Q {
        match self {
            LoopActivity::Constant(l) => l.clone(),
            LoopActivity::Table { map, default } => {
                map.values().fold(default.clone(), |m, v| if *v > m { v.clone() } else { m })
            }
        }
    }
}

/// Returns `(|w|, loop factor)` for the weight `z^|w|` times the product
/// of activities of erased polygons.
pub fn walk_weight(w: &Walk, act: &LoopActivity, ctx: &GraphCtx) -> (usize, Q) {
    let factor = match act {
        LoopActivity::Constant(l) => num_traits::pow(l.clone(), w.loop_count()),
        LoopActivity::Table { .. } => {
            let (_, erased) = w.loop_erase_raw();
            erased.iter().fold(Q::one(), |acc, p| acc * act.activity_of(&SapKey::new(p, ctx)))
        }
    };
    (w.len(), factor)
}

/// A pair of walks whose concatenation erases a different number of loops
/// than the two walks erase separately.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopCountWitness {
    pub first: Walk,
    pub second: Walk,
    pub separate: usize,
    pub joined: usize,
}

/// Searches all pairs of walks of length at most `max_len` in Z^d, by
/// increasing total length, for the first pair with
/// `n_L(w w') > n_L(w) + n_L(w')` and the first with the reverse strict
/// inequality. The second walk is translated to start where the first ends.
pub fn non_repulsiveness_witnesses(d: usize, max_len: usize) -> Result<(Option<LoopCountWitness>, Option<LoopCountWitness>)> {
    let ctx = GraphCtx::lattice(d);
    let mut by_len: Vec<Vec<(Walk, usize)>> = vec![Vec::new(); max_len + 1];
    crate::enumerate::for_each_walk(&ctx, &Point::origin(d), max_len, |w| {
        by_len[w.len()].push((w.clone(), w.loop_count()));
    })?;
    let (mut more, mut fewer) = (None, None);
    for total in 0..=2 * max_len {
        for a in total.saturating_sub(max_len)..=total.min(max_len) {
            for (w, kw) in &by_len[a] {
                let shift = w.end().clone();
                for (v, kv) in &by_len[total - a] {
                    if more.is_some() && fewer.is_some() {
                        return Ok((more, fewer));
                    }
                    let mut joined = w.0.clone();
                    joined.extend(v.0[1..].iter().map(|p| p.add(&shift)));
                    let joined_count = Walk(joined).loop_count();
                    let separate = kw + kv;
                    let slot = match joined_count.cmp(&separate) {
                        std::cmp::Ordering::Greater => &mut more,
                        std::cmp::Ordering::Less => &mut fewer,
                        std::cmp::Ordering::Equal => continue,
                    };
                    if slot.is_none() {
                        let second = Walk(v.0.iter().map(|p| p.add(&shift)).collect());
                        *slot = Some(LoopCountWitness { first: w.clone(), second, separate, joined: joined_count });
                    }
                }
            }
        }
    }
    Ok((more, fewer))
}
