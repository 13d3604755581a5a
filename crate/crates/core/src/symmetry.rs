//! Exact symmetries of a single-flip generator, used to shrink the set of
//! initial states a worst-case scan has to visit.
//!
//! A vertex permutation σ is a symmetry when q(σs, σv) = q(s, v) for every
//! state `s` and vertex `v`; the global flip is one when q(!s, v) = q(s, v).
//! Symmetric starts have transient laws that are images of each other, and
//! π is invariant, so their distances to π coincide at every time.

use crate::ctmc::GeneratorMatrix;

/// Backtracking stops after this many candidate nodes.
const SEARCH_BUDGET: usize = 1_000_000;
/// At most this many permutations are collected.
const MAX_PERMUTATIONS: usize = 4096;

fn permute_state(s: usize, perm: &[usize]) -> usize {
    perm.iter().enumerate().fold(0, |acc, (v, &img)| acc | ((s >> v & 1) << img))
}

/// `dep[v][u]`: the rate at `v` changes with the spin at `u` for some state.
fn dependencies(q: &GeneratorMatrix) -> Vec<Vec<bool>> {
    let n = q.n();
    let mut dep = vec![vec![false; n]; n];
    for (v, row) in dep.iter_mut().enumerate() {
        for (u, d) in row.iter_mut().enumerate() {
            if u != v {
                *d = (0..q.dim()).any(|s| q.rate(s, v) != q.rate(s ^ (1 << u), v));
            }
        }
    }
    dep
}

fn preserves_rates(q: &GeneratorMatrix, perm: &[usize]) -> bool {
    (0..q.dim()).all(|s| {
        let t = permute_state(s, perm);
        (0..q.n()).all(|v| q.rate(t, perm[v]) == q.rate(s, v))
    })
}

struct Search<'a> {
    q: &'a GeneratorMatrix,
    dep: Vec<Vec<bool>>,
    map: Vec<usize>,
    used: Vec<bool>,
    budget: usize,
    found: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn extend(&mut self) {
        if self.budget == 0 || self.found.len() >= MAX_PERMUTATIONS {
            return;
        }
        self.budget -= 1;
        let k = self.map.len();
        let n = self.q.n();
        if k == n {
            if self.map.iter().enumerate().any(|(v, &i)| v != i) && preserves_rates(self.q, &self.map) {
                self.found.push(self.map.clone());
            }
            return;
        }
        for img in 0..n {
            if self.used[img] {
                continue;
            }
            let consistent = self.map.iter().enumerate().all(|(j, &mj)| {
                self.dep[k][j] == self.dep[img][mj] && self.dep[j][k] == self.dep[mj][img]
            });
            if !consistent {
                continue;
            }
            self.used[img] = true;
            self.map.push(img);
            self.extend();
            self.map.pop();
            self.used[img] = false;
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    // The smaller state becomes the root, so roots are class minima.
    if ra < rb {
        parent[rb] = ra;
    } else if rb < ra {
        parent[ra] = rb;
    }
}

/// One state per symmetry class (the smallest), in increasing order. The
/// classes may be finer than the true orbits if the search budget runs out,
/// which only costs extra starts.
pub fn start_representatives(q: &GeneratorMatrix) -> Vec<usize> {
    let n = q.n();
    let dim = q.dim();
    let mut search = Search {
        q,
        dep: dependencies(q),
        map: Vec::with_capacity(n),
        used: vec![false; n],
        budget: SEARCH_BUDGET,
        found: Vec::new(),
    };
    search.extend();
    let mask = dim - 1;
    let flip = (0..dim).all(|s| (0..n).all(|v| q.rate(s, v) == q.rate(!s & mask, v)));
    let mut parent: Vec<usize> = (0..dim).collect();
    for perm in &search.found {
        for s in 0..dim {
            union(&mut parent, s, permute_state(s, perm));
        }
    }
    if flip {
        for s in 0..dim {
            union(&mut parent, s, !s & mask);
        }
    }
    (0..dim).filter(|&s| find(&mut parent, s) == s).collect()
}
