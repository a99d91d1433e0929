//! Brute-force ground truth: exact walk counts by dynamic programming and
//! reachability by breadth-first search. Deliberately naive; every
//! correctness check in the crate compares against this module.

use std::collections::VecDeque;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::graph::DirectedGraph;

/// Number of length-`length` walks from `s` to `t`, computed with
/// `length` vector-by-adjacency products.
pub fn count_walks_exact(graph: &DirectedGraph, s: usize, t: usize, length: usize) -> BigUint {
    walks_from(graph, s, length).swap_remove(t)
}

/// `N_length(s, v)` for every `v`.
pub fn walks_from(graph: &DirectedGraph, s: usize, length: usize) -> Vec<BigUint> {
    let n = graph.vertex_count();
    let mut row = vec![BigUint::zero(); n];
    row[s] = BigUint::one();
    for _ in 0..length {
        let mut next = vec![BigUint::zero(); n];
        for &(u, v) in graph.edges() {
            if !row[u].is_zero() {
                next[v] += &row[u];
            }
        }
        row = next;
    }
    row
}

/// Exact counts `N_ℓ(i, j)` for `0 ≤ ℓ ≤ max_length`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkTable {
    n: usize,
    /// `counts[ℓ][i][j]`.
    counts: Vec<Vec<Vec<BigUint>>>,
}

impl WalkTable {
    pub fn build(graph: &DirectedGraph, max_length: usize) -> Self {
        let n = graph.vertex_count();
        let mut counts = Vec::with_capacity(max_length + 1);
        let mut rows: Vec<Vec<BigUint>> = (0..n)
            .map(|s| {
                let mut row = vec![BigUint::zero(); n];
                row[s] = BigUint::one();
                row
            })
            .collect();
        counts.push(rows.clone());
        for _ in 0..max_length {
            rows = rows
                .iter()
                .map(|row| {
                    let mut next = vec![BigUint::zero(); n];
                    for &(u, v) in graph.edges() {
                        next[v] += &row[u];
                    }
                    next
                })
                .collect();
            counts.push(rows.clone());
        }
        Self { n, counts }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn max_length(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn get(&self, length: usize, i: usize, j: usize) -> &BigUint {
        &self.counts[length][i][j]
    }

    /// `N_ℓ(i, j) mod q`.
    pub fn get_mod(&self, length: usize, i: usize, j: usize, q: u64) -> u64 {
        let r = self.get(length, i, j) % q;
        r.try_into().expect("residue below q")
    }
}

/// Checks `Σ_u N_a(i,u)·N_b(u,j) = N_{a+b}(i,j)` for all `i, j`.
pub fn verify_concatenation(graph: &DirectedGraph, a: usize, b: usize) -> bool {
    let table = WalkTable::build(graph, a + b);
    let n = table.vertex_count();
    (0..n).all(|i| {
        (0..n).all(|j| {
            let joined: BigUint = (0..n)
                .map(|u| table.get(a, i, u) * table.get(b, u, j))
                .sum();
            &joined == table.get(a + b, i, j)
        })
    })
}

/// Directed reachability by breadth-first search (`s` reaches itself).
pub fn reachable(graph: &DirectedGraph, s: usize, t: usize) -> bool {
    let mut seen = vec![false; graph.vertex_count()];
    let mut queue = VecDeque::from([s]);
    seen[s] = true;
    while let Some(u) = queue.pop_front() {
        if u == t {
            return true;
        }
        for v in graph.successors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}
