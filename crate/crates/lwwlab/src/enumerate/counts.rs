//! Exact loop-count tables `N(n, k)` for walks from the origin of Z^d.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{LwwError, Result};
use crate::series::{ZSeries, Q};
use crate::walk::Point;

use super::engine::Budget;

/// Counts of `n`-step walks with `k` erased loops, with the summed squared
/// end-to-end distance per cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopCountTable {
    pub d: usize,
    pub nmax: usize,
    /// `counts[n][k]`.
    pub counts: Vec<Vec<u64>>,
    /// `sq[n][k]`: sum of `|w_n|^2` over the walks counted in `counts[n][k]`.
    pub sq: Vec<Vec<u128>>,
    /// Optional refinement by endpoint: `by_end[x][n][k]`.
    pub by_end: Option<BTreeMap<Point, Vec<Vec<u64>>>>,
}

impl LoopCountTable {
    pub fn entry(&self, n: usize, k: usize) -> u64 {
        self.counts.get(n).and_then(|r| r.get(k)).copied().unwrap_or(0)
    }

    /// `c_n` at constant activity `lambda`.
    pub fn c_n(&self, n: usize, lambda: &Q) -> Q {
        poly_eval(&self.counts[n], lambda)
    }

    /// Weighted sum of `|w_n|^2` at activity `lambda`.
    pub fn sq_sum(&self, n: usize, lambda: &Q) -> Q {
        let mut acc = Q::zero();
        let mut p = Q::from_integer(1.into());
        for &s in &self.sq[n] {
            if s != 0 {
                acc += &p * Q::from_integer(BigInt::from(s));
            }
            p *= lambda;
        }
        acc
    }

    /// Mean-square displacement of the `n`-step walk at activity `lambda`.
    pub fn msd(&self, n: usize, lambda: &Q) -> Q {
        self.sq_sum(n, lambda) / self.c_n(n, lambda)
    }

    /// Susceptibility series `sum_n c_n z^n`.
    pub fn chi(&self, lambda: &Q) -> ZSeries {
        let mut s = ZSeries::zero(self.nmax);
        for n in 0..=self.nmax {
            s.set_coeff(n, self.c_n(n, lambda));
        }
        s
    }

    pub fn row_total(&self, n: usize) -> u64 {
        self.counts[n].iter().sum()
    }
}

fn poly_eval(row: &[u64], lambda: &Q) -> Q {
    let mut acc = Q::zero();
    for &c in row.iter().rev() {
        acc = acc * lambda + Q::from_integer(BigInt::from(c));
    }
    acc
}

/// Nodes visited by the symmetry-reduced enumeration below.
pub fn reduced_tree_size(d: usize, nmax: usize) -> f64 {
    let classes = if d == 1 { 2.0 } else { 3.0 };
    let deg = (2 * d) as f64;
    // Nodes at depth n >= 2 below the representative prefixes; the last
    // level is handled inline.
    (2..nmax.max(2)).map(|n| classes * deg.powi(n as i32 - 2)).sum::<f64>() + 2.0
}

/// Builds the table for `n <= nmax`. Without endpoint resolution the
/// enumeration uses the lattice symmetry: the first step is fixed, and the
/// second step is one of the classes back, straight, or sideways.
pub fn loop_count_table(nmax: usize, d: usize, endpoint_resolved: bool, budget: Budget) -> Result<LoopCountTable> {
    if d == 0 {
        return Err(LwwError::Precondition("dimension must be positive".into()));
    }
    let kmax = nmax / 2 + 1;
    let mut counts = vec![vec![0u64; kmax + 1]; nmax + 1];
    let mut sq = vec![vec![0u128; kmax + 1]; nmax + 1];
    counts[0][0] = 1;
    if endpoint_resolved {
        budget.check(super::engine::tree_size(2 * d, nmax), "endpoint-resolved loop table")?;
        let mut grid = Grid::new(d, nmax);
        let mut by_end: BTreeMap<usize, Vec<Vec<u64>>> = BTreeMap::new();
        grid.run_full(nmax, &mut |n, k, cell, r2| {
            if n > 0 {
                counts[n][k] += 1;
                sq[n][k] += r2 as u128;
            }
            by_end.entry(cell).or_insert_with(|| vec![vec![0u64; kmax + 1]; nmax + 1])[n][k] += 1;
        });
        let by_end = by_end.into_iter().map(|(cell, rows)| (grid.point(cell), rows)).collect();
        return Ok(LoopCountTable { d, nmax, counts, sq, by_end: Some(by_end) });
    }
    budget.check(reduced_tree_size(d, nmax), "loop table")?;
    if nmax >= 1 {
        counts[1][0] = 2 * d as u64;
        sq[1][0] = 2 * d as u128;
    }
    if nmax >= 2 {
        // Prefix classes (second step relative to the first, multiplicity).
        let mut classes: Vec<(usize, u64)> = vec![(0, 1), (1, 1)];
        if d > 1 {
            classes.push((2, 2 * d as u64 - 2));
        }
        let first_mult = 2 * d as u64;
        let parts: Vec<(Vec<Vec<u64>>, Vec<Vec<u128>>)> = classes
            .par_iter()
            .map(|&(class, mult)| {
                let mut c = vec![vec![0u64; kmax + 1]; nmax + 1];
                let mut s = vec![vec![0u128; kmax + 1]; nmax + 1];
                let mut grid = Grid::new(d, nmax);
                grid.run_prefix(class, nmax, &mut c, &mut s);
                let m = mult * first_mult;
                for row in c.iter_mut() {
                    for x in row.iter_mut() {
                        *x *= m;
                    }
                }
                for row in s.iter_mut() {
                    for x in row.iter_mut() {
                        *x *= m as u128;
                    }
                }
                (c, s)
            })
            .collect();
        for (c, s) in parts {
            for n in 2..=nmax {
                for k in 0..=kmax {
                    counts[n][k] += c[n][k];
                    sq[n][k] += s[n][k];
                }
            }
        }
    }
    Ok(LoopCountTable { d, nmax, counts, sq, by_end: None })
}

/// Dense box of Z^d holding the loop-erasure stack position of each cell.
struct Grid {
    d: usize,
    side: usize,
    radius: i32,
    strides: Vec<isize>,
    pos: Vec<i32>,
    stack: Vec<usize>,
    undo: Vec<usize>,
    coord: Vec<i32>,
}

impl Grid {
    fn new(d: usize, nmax: usize) -> Self {
        let radius = nmax as i32 + 1;
        let side = (2 * radius + 1) as usize;
        let mut strides = Vec::with_capacity(2 * d);
        let mut s = 1isize;
        for _ in 0..d {
            strides.push(s);
            strides.push(-s);
            s *= side as isize;
        }
        Grid {
            d,
            side,
            radius,
            strides,
            pos: vec![-1; side.pow(d as u32)],
            stack: Vec::new(),
            undo: Vec::new(),
            coord: vec![0; d],
        }
    }

    fn origin(&self) -> usize {
        let r = self.radius as usize;
        (0..self.d).map(|i| r * self.side.pow(i as u32)).sum()
    }

    fn point(&self, cell: usize) -> Point {
        let mut c = cell;
        let mut v = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            v.push((c % self.side) as i32 - self.radius);
            c /= self.side;
        }
        Point(v)
    }

    fn r2(&self) -> u64 {
        self.coord.iter().map(|&x| (x as i64 * x as i64) as u64).sum()
    }

    /// Moves to `v`. Returns the number of popped cells, or `usize::MAX`
    /// when the cell was pushed.
    #[inline]
    fn enter(&mut self, v: usize) -> usize {
        let p = self.pos[v];
        if p >= 0 {
            let i = p as usize;
            let cnt = self.stack.len() - 1 - i;
            for k in i + 1..self.stack.len() {
                let u = self.stack[k];
                self.pos[u] = -1;
                self.undo.push(u);
            }
            self.stack.truncate(i + 1);
            cnt
        } else {
            self.pos[v] = self.stack.len() as i32;
            self.stack.push(v);
            usize::MAX
        }
    }

    #[inline]
    fn leave(&mut self, v: usize, popped: usize) {
        if popped == usize::MAX {
            self.stack.pop();
            self.pos[v] = -1;
        } else {
            let from = self.undo.len() - popped;
            for k in from..self.undo.len() {
                let u = self.undo[k];
                self.pos[u] = self.stack.len() as i32;
                self.stack.push(u);
            }
            self.undo.truncate(from);
        }
    }

    fn move_coord(&mut self, dir: usize, sign: i32) {
        self.coord[dir / 2] += if dir % 2 == 0 { sign } else { -sign };
    }

    fn run_prefix(&mut self, class: usize, nmax: usize, counts: &mut [Vec<u64>], sq: &mut [Vec<u128>]) {
        let o = self.origin();
        self.pos[o] = 0;
        self.stack.push(o);
        // First step along +e_1 (direction 0).
        let first = 0usize;
        let v1 = (o as isize + self.strides[first]) as usize;
        self.enter(v1);
        self.move_coord(first, 1);
        let second = match class {
            0 => 1, // back
            1 => 0, // straight
            _ => 2, // sideways, +e_2
        };
        let v2 = (v1 as isize + self.strides[second]) as usize;
        let popped = self.enter(v2);
        let loops = if popped == usize::MAX { 0 } else { 1 };
        self.move_coord(second, 1);
        counts[2][loops] += 1;
        sq[2][loops] += self.r2() as u128;
        if nmax > 2 {
            self.descend(v2, 2, loops, nmax, counts, sq);
        }
    }

    fn descend(&mut self, cur: usize, n: usize, loops: usize, nmax: usize, counts: &mut [Vec<u64>], sq: &mut [Vec<u128>]) {
        let n1 = n + 1;
        if n1 == nmax {
            // Leaves: no need to modify the stack.
            for dir in 0..2 * self.d {
                let v = (cur as isize + self.strides[dir]) as usize;
                let k = if self.pos[v] >= 0 { loops + 1 } else { loops };
                self.move_coord(dir, 1);
                counts[n1][k] += 1;
                sq[n1][k] += self.r2() as u128;
                self.move_coord(dir, -1);
            }
            return;
        }
        for dir in 0..2 * self.d {
            let v = (cur as isize + self.strides[dir]) as usize;
            let popped = self.enter(v);
            let k = if popped == usize::MAX { loops } else { loops + 1 };
            self.move_coord(dir, 1);
            counts[n1][k] += 1;
            sq[n1][k] += self.r2() as u128;
            self.descend(v, n1, k, nmax, counts, sq);
            self.move_coord(dir, -1);
            self.leave(v, popped);
        }
    }

    fn run_full(&mut self, nmax: usize, f: &mut dyn FnMut(usize, usize, usize, u64)) {
        let o = self.origin();
        self.pos[o] = 0;
        self.stack.push(o);
        f(0, 0, o, 0);
        if nmax > 0 {
            self.full_rec(o, 0, 0, nmax, f);
        }
    }

    fn full_rec(&mut self, cur: usize, n: usize, loops: usize, nmax: usize, f: &mut dyn FnMut(usize, usize, usize, u64)) {
        let n1 = n + 1;
        for dir in 0..2 * self.d {
            let v = (cur as isize + self.strides[dir]) as usize;
            let popped = self.enter(v);
            let k = if popped == usize::MAX { loops } else { loops + 1 };
            self.move_coord(dir, 1);
            f(n1, k, v, self.r2());
            if n1 < nmax {
                self.full_rec(v, n1, k, nmax, f);
            }
            self.move_coord(dir, -1);
            self.leave(v, popped);
        }
    }
}
