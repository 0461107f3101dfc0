//! Graphs on discrete intervals: lace connectedness, the lace of a
//! connected graph, compatible edges, and brute-force checks of the lace
//! prescription and the connectedness recursion.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{precondition, LwwError, Result};
use crate::series::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Spacelike,
    Timelike,
}

/// A labelled edge `st` with `s < t`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub s: usize,
    pub t: usize,
    pub label: Label,
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = match self.label {
            Label::Spacelike => "s",
            Label::Timelike => "t",
        };
        write!(f, "({},{}){l}", self.s, self.t)
    }
}

impl Edge {
    pub fn new(s: usize, t: usize, label: Label) -> Self {
        assert!(s < t, "edges satisfy s < t");
        Edge { s, t, label }
    }

    pub fn spacelike(s: usize, t: usize) -> Self {
        Edge::new(s, t, Label::Spacelike)
    }

    pub fn timelike(s: usize, t: usize) -> Self {
        Edge::new(s, t, Label::Timelike)
    }
}

/// Which labels the edge universe of an interval carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// Every edge is spacelike.
    Single,
    /// Every pair `st` may appear with either label or both.
    Dual,
}

/// A set of labelled edges on the interval `[a, b]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntervalGraph {
    pub a: usize,
    pub b: usize,
    pub edges: BTreeSet<Edge>,
}

impl IntervalGraph {
    pub fn new(a: usize, b: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        if a > b {
            return precondition("the interval needs a <= b");
        }
        if let Some(e) = edges.iter().find(|e| e.s < a || e.t > b) {
            return precondition(format!("edge {e:?} leaves [{a},{b}]"));
        }
        Ok(IntervalGraph { a, b, edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn with(&self, e: Edge) -> IntervalGraph {
        let mut g = self.clone();
        g.edges.insert(e);
        g
    }

    fn without(&self, e: &Edge) -> IntervalGraph {
        let mut g = self.clone();
        g.edges.remove(e);
        g
    }
}

/// Lace connectedness: `b > a + 1`, every interior point is straddled by
/// an edge, and some edge leaves `a` and some edge enters `b`.
pub fn is_connected(g: &IntervalGraph) -> bool {
    if g.b <= g.a + 1 {
        return false;
    }
    let starts = g.edges.iter().any(|e| e.s == g.a);
    let ends = g.edges.iter().any(|e| e.t == g.b);
    starts && ends && (g.a + 1..g.b).all(|j| g.edges.iter().any(|e| e.s < j && j < e.t))
}

/// A connected graph from which no edge can be removed without losing
/// connectedness.
pub fn is_lace(g: &IntervalGraph) -> bool {
    is_connected(g) && g.edges.iter().all(|e| !is_connected(&g.without(e)))
}

/// The lace of a connected labelled graph. Ties between the two labels of
/// one pair go to the spacelike edge.
pub fn lace_of(g: &IntervalGraph) -> Result<IntervalGraph> {
    if !is_connected(g) {
        return precondition("the lace is only defined for connected graphs");
    }
    let pick = |s: usize, t: usize| -> Edge {
        if g.edges.contains(&Edge::spacelike(s, t)) {
            Edge::spacelike(s, t)
        } else {
            Edge::timelike(s, t)
        }
    };
    let mut out = BTreeSet::new();
    let s1 = g.a;
    let t1 = g.edges.iter().filter(|e| e.s == s1).map(|e| e.t).max().expect("connected graphs leave a");
    out.insert(pick(s1, t1));
    let mut t = t1;
    while t < g.b {
        let next = g.edges.iter().filter(|e| e.s < t).map(|e| e.t).max().expect("connected");
        if next <= t {
            return Err(LwwError::Precondition("the lace construction stalled".into()));
        }
        let s = g.edges.iter().filter(|e| e.t == next).map(|e| e.s).min().expect("an edge ends at next");
        out.insert(pick(s, next));
        t = next;
    }
    Ok(IntervalGraph { a: g.a, b: g.b, edges: out })
}

/// All labelled edges of `[a, b]` in the given mode.
pub fn edge_universe(a: usize, b: usize, mode: LabelMode) -> Vec<Edge> {
    let mut out = Vec::new();
    for s in a..=b {
        for t in s + 1..=b {
            out.push(Edge::spacelike(s, t));
            if mode == LabelMode::Dual {
                out.push(Edge::timelike(s, t));
            }
        }
    }
    out
}

/// Edges not in the lace whose addition leaves the lace unchanged.
pub fn compatible_edges(lace: &IntervalGraph, mode: LabelMode) -> Result<Vec<Edge>> {
    if !is_connected(lace) {
        return precondition("compatible edges are defined relative to a lace");
    }
    let mut out = Vec::new();
    for e in edge_universe(lace.a, lace.b, mode) {
        if lace.edges.contains(&e) {
            continue;
        }
        if lace_of(&lace.with(e))? == *lace {
            out.push(e);
        }
    }
    Ok(out)
}

/// Interval lengths cut out by the lace: for edges `s_i t_i` the points
/// `s_1 < s_2 <= t_1 <= s_3 <= t_2 ...` split the interval into
/// `2N - 1` pieces.
pub fn lace_intervals(lace: &IntervalGraph) -> Vec<usize> {
    let e: Vec<&Edge> = lace.edges.iter().collect();
    let n = e.len();
    if n == 1 {
        return vec![e[0].t - e[0].s];
    }
    let mut sorted = e.clone();
    sorted.sort_by_key(|x| (x.s, x.t));
    let mut pts = vec![sorted[0].s, sorted[1].s];
    for i in 0..n - 1 {
        pts.push(sorted[i].t);
        if i + 2 < n {
            pts.push(sorted[i + 2].s);
        }
    }
    pts.push(sorted[n - 1].t);
    pts.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Def "valid" for a vector of `2N - 1` lengths.
pub fn is_valid_vector(m: &[usize]) -> bool {
    let k = m.len();
    if k % 2 == 0 {
        return false;
    }
    if m[0] == 0 || m[k - 1] == 0 {
        return false;
    }
    (1..k).step_by(2).all(|i| m[i] >= 1)
}

/// Largest interval accepted by the brute-force sums, in either mode.
pub const BRUTE_FORCE_CAP: usize = 6;

fn check_cap(a: usize, b: usize) -> Result<()> {
    if b < a {
        return precondition("the interval needs a <= b");
    }
    if b - a > BRUTE_FORCE_CAP {
        return Err(LwwError::Resource(format!(
            "interval length {} exceeds the cap {BRUTE_FORCE_CAP}",
            b - a
        )));
    }
    Ok(())
}

fn weight_of(weights: &HashMap<Edge, Q>, e: &Edge) -> Q {
    weights.get(e).cloned().unwrap_or_else(Q::zero)
}

/// Every lace on `[a, b]`. Connectedness ignores labels and a minimal
/// graph never carries both labels of one pair, so the unlabelled laces
/// are found by testing all spacelike graphs and then labelled freely.
pub fn all_laces(a: usize, b: usize, mode: LabelMode) -> Result<Vec<IntervalGraph>> {
    check_cap(a, b)?;
    let universe = edge_universe(a, b, LabelMode::Single);
    let e = universe.len();
    let interior: u64 = if b > a + 1 { ((1u64 << (b - a - 1)) - 1) << (a + 1) } else { 0 };
    let cover: Vec<u64> = universe
        .iter()
        .map(|x| if x.t > x.s + 1 { ((1u64 << (x.t - x.s - 1)) - 1) << (x.s + 1) } else { 0 })
        .collect();
    let connected = |mask: u64| -> bool {
        if b <= a + 1 {
            return false;
        }
        let mut cov = 0u64;
        let (mut sa, mut eb) = (false, false);
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            cov |= cover[i];
            sa |= universe[i].s == a;
            eb |= universe[i].t == b;
        }
        sa && eb && cov & interior == interior
    };
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << e) {
        if !connected(mask) {
            continue;
        }
        let mut minimal = true;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros();
            m &= m - 1;
            if connected(mask & !(1u64 << i)) {
                minimal = false;
                break;
            }
        }
        if !minimal {
            continue;
        }
        let spans: Vec<Edge> = (0..e).filter(|&i| mask >> i & 1 == 1).map(|i| universe[i]).collect();
        let labellings: u32 = match mode {
            LabelMode::Single => 1,
            LabelMode::Dual => 1 << spans.len(),
        };
        for lab in 0..labellings {
            let edges = spans.iter().enumerate().map(|(k, x)| {
                if lab >> k & 1 == 1 {
                    Edge::timelike(x.s, x.t)
                } else {
                    *x
                }
            });
            out.push(IntervalGraph::new(a, b, edges)?);
        }
    }
    Ok(out)
}

/// `sum_{connected labelled graphs} prod_{st} w(st)`, computed by a sum
/// over edge subsets that tracks which interior points are straddled and
/// whether the endpoints are touched.
pub fn connected_graph_sum(a: usize, b: usize, weights: &HashMap<Edge, Q>, mode: LabelMode) -> Result<Q> {
    check_cap(a, b)?;
    Ok(subset_sums(a, b, weights, mode).1)
}

/// Sum of `w(Gamma)` over all graphs and over connected graphs.
fn subset_sums(a: usize, b: usize, weights: &HashMap<Edge, Q>, mode: LabelMode) -> (Q, Q) {
    if b <= a {
        // The only graph on a single point is empty.
        return (if a == b { Q::one() } else { Q::zero() }, Q::zero());
    }
    let interior: u64 = ((1u64 << (b - a - 1)) - 1) << (a + 1);
    // State: (covered interior points, touches a, touches b).
    let mut states: HashMap<(u64, bool, bool), Q> = HashMap::new();
    states.insert((0, false, false), Q::one());
    for e in edge_universe(a, b, mode) {
        let w = weight_of(weights, &e);
        if w.is_zero() {
            continue;
        }
        let cov = if e.t > e.s + 1 { ((1u64 << (e.t - e.s - 1)) - 1) << (e.s + 1) } else { 0 };
        let mut next = states.clone();
        for ((c, sa, eb), v) in &states {
            let key = (c | cov, *sa || e.s == a, *eb || e.t == b);
            let add = v * &w;
            *next.entry(key).or_insert_with(Q::zero) += add;
        }
        states = next;
    }
    let all = states.values().fold(Q::zero(), |acc, v| acc + v);
    let conn = if b > a + 1 {
        states
            .iter()
            .filter(|((c, sa, eb), _)| *sa && *eb && c & interior == interior)
            .fold(Q::zero(), |acc, (_, v)| acc + v)
    } else {
        Q::zero()
    };
    (all, conn)
}

/// `sum_L prod_{st in L} w(st) prod_{st in C(L)} (1 + w(st))`.
pub fn lace_prescription_sum(a: usize, b: usize, weights: &HashMap<Edge, Q>, mode: LabelMode) -> Result<Q> {
    let mut acc = Q::zero();
    for lace in all_laces(a, b, mode)? {
        let mut term = Q::one();
        for e in &lace.edges {
            term *= weight_of(weights, e);
        }
        if term.is_zero() {
            continue;
        }
        for e in compatible_edges(&lace, mode)? {
            term *= Q::one() + weight_of(weights, &e);
        }
        acc += term;
    }
    Ok(acc)
}

/// `K[a,b]` (all graphs) and `J[a,b]` (connected graphs) for a
/// multiplicative weight, with `K = J = 0` when `a > b`.
pub fn k_j(a: usize, b: usize, weights: &HashMap<Edge, Q>, mode: LabelMode) -> Result<(Q, Q)> {
    if a > b {
        return Ok((Q::zero(), Q::zero()));
    }
    check_cap(a, b)?;
    Ok(subset_sums(a, b, weights, mode))
}

/// Residual `K[a,b] - K[a,a+1] K[a+1,b] - sum_{j >= 2} J[a,a+j] K[a+j,b]`.
pub fn connectedness_recursion_residual(a: usize, b: usize, weights: &HashMap<Edge, Q>, mode: LabelMode) -> Result<Q> {
    if b <= a {
        return precondition("the recursion needs a < b");
    }
    let (k_ab, _) = k_j(a, b, weights, mode)?;
    let mut rhs = k_j(a, a + 1, weights, mode)?.0 * k_j(a + 1, b, weights, mode)?.0;
    for j in 2..=b - a {
        let (_, jj) = k_j(a, a + j, weights, mode)?;
        let (kk, _) = k_j(a + j, b, weights, mode)?;
        rhs += jj * kk;
    }
    Ok(k_ab - rhs)
}

/// Brute-force sum over all edge subsets, for cross-checking the state
/// sums on small intervals.
pub fn connected_graph_sum_brute(a: usize, b: usize, weights: &HashMap<Edge, Q>, mode: LabelMode) -> Result<Q> {
    let universe = edge_universe(a, b, mode);
    if universe.len() > 20 {
        return Err(LwwError::Resource("too many edges for the brute-force sum".into()));
    }
    let mut acc = Q::zero();
    for mask in 0u32..(1u32 << universe.len()) {
        let g = IntervalGraph::new(a, b, (0..universe.len()).filter(|&i| mask >> i & 1 == 1).map(|i| universe[i]))?;
        if is_connected(&g) {
            acc += g.edges.iter().fold(Q::one(), |p, e| p * weight_of(weights, e));
        }
    }
    Ok(acc)
}
