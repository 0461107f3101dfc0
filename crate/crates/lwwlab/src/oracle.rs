//! Deliberately naive reference enumerators. They share no code with the
//! main engine and serve as independent checks of it.

use std::collections::HashSet;

use crate::walk::{Point, Walk};

/// Every walk of exactly `n` steps from the origin of Z^d, generated by
/// counting through all step sequences in base `2d`.
pub fn all_walks(d: usize, n: usize) -> Vec<Walk> {
    let steps: Vec<Vec<i32>> = (0..2 * d)
        .map(|s| {
            let mut v = vec![0; d];
            v[s / 2] = if s % 2 == 0 { 1 } else { -1 };
            v
        })
        .collect();
    let total = (2 * d).pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut c = code;
        let mut cur = vec![0i32; d];
        let mut verts = vec![Point(cur.clone())];
        for _ in 0..n {
            let s = &steps[c % (2 * d)];
            c /= 2 * d;
            for i in 0..d {
                cur[i] += s[i];
            }
            verts.push(Point(cur.clone()));
        }
        out.push(Walk(verts));
    }
    out
}

/// Number of `n`-step self-avoiding walks from the origin of Z^d.
pub fn saw_count(d: usize, n: usize) -> u64 {
    all_walks(d, n)
        .iter()
        .filter(|w| {
            let set: HashSet<&Point> = w.0.iter().collect();
            set.len() == w.0.len()
        })
        .count() as u64
}

/// Loop counts of all `n`-step walks by repeatedly cutting out the first
/// closed loop. Entry `k` is the number of walks with `k` erased loops.
pub fn loop_count_row(d: usize, n: usize) -> Vec<u64> {
    let mut row = vec![0u64; n / 2 + 2];
    for w in all_walks(d, n) {
        let mut cur = w.0.clone();
        let mut k = 0;
        'outer: loop {
            for j in 0..cur.len() {
                if let Some(i) = cur[..j].iter().position(|p| *p == cur[j]) {
                    cur.drain(i + 1..=j);
                    k += 1;
                    continue 'outer;
                }
            }
            break;
        }
        row[k] += 1;
    }
    row
}
