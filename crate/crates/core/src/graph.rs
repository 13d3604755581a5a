//! Finite simple graphs, induced boxes of the integer lattice and their
//! exterior boundaries, and L1 lattice distances.
//!
//! Vertices are dense ids `0..n`. Lattice boxes keep a coordinate table so
//! that points and ids can be converted in both directions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};

/// A point of the integer lattice Z^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub Vec<i64>);

impl Point {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The 2d lattice neighbors, ordered by axis then by sign (-1 before +1).
    pub fn lattice_neighbors(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut c = self.0.clone();
                c[axis] += step;
                Point(c)
            })
        })
    }
}

impl fmt::Display for Point {
    /// Coordinates joined by `:` (e.g. `3:-1`), which keeps CSV cells comma free.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl serde::Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl From<Vec<i64>> for Point {
    fn from(v: Vec<i64>) -> Self {
        Point(v)
    }
}

/// Immutable undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    coords: Option<Vec<Point>>,
}

impl Graph {
    /// Builds a graph on `n` vertices. Self-loops, out-of-range endpoints and
    /// repeated edges (in either orientation) are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return input(format!("edge ({u}, {v}) has a vertex outside 0..{n}"));
            }
            if u == v {
                return input(format!("edge ({u}, {v}) is a self-loop"));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return input(format!("edge ({u}, {v}) is a duplicate"));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph { adjacency, coords: None })
    }

    fn with_coords(mut self, coords: Vec<Point>) -> Result<Self> {
        if coords.len() != self.n() {
            return input("coordinate table length differs from vertex count");
        }
        for (u, v) in self.edges() {
            if lattice_dist(&coords[u], &coords[v])? != 1 {
                return input(format!("edge ({u}, {v}) does not join lattice neighbors"));
            }
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn coords(&self) -> Option<&[Point]> {
        self.coords.as_deref()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// The single edge K2.
    pub fn k2() -> Self {
        Graph::from_edges(2, &[(0, 1)]).expect("K2 is valid")
    }

    /// Path on `n >= 1` vertices, embedded in Z along the first axis.
    pub fn path(n: usize) -> Result<Self> {
        if n == 0 {
            return input("path needs at least one vertex");
        }
        let pts = (0..n as i64).map(|i| Point(vec![i])).collect::<Vec<_>>();
        Ok(LatticeBox::new(1, &pts)?.interior)
    }

    /// Cycle Z/nZ, `n >= 3`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return input(format!("cycle needs at least 3 vertices, got {n}"));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges)
    }

    /// `width x height` grid box of Z^2 (induced subgraph, no boundary).
    pub fn grid(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return input("grid dimensions must be positive");
        }
        Ok(LatticeBox::cuboid(&[(0, width as i64 - 1), (0, height as i64 - 1)])?.interior)
    }

    /// Connected Erdős–Rényi sample G(n, p): draws are repeated until the
    /// sample is connected (at most 10_000 attempts).
    pub fn random_connected(n: usize, p: f64, seed: u64) -> Result<Self> {
        if n == 0 || !(0.0..=1.0).contains(&p) {
            return input(format!("random graph needs n >= 1 and p in [0,1], got n={n}, p={p}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if crate::rng::unit_f64(rng.next_u64()) < p {
                        edges.push((u, v));
                    }
                }
            }
            let g = Graph::from_edges(n, &edges)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        input(format!("no connected G({n}, {p}) sample found"))
    }

    pub fn is_connected(&self) -> bool {
        if self.n() == 0 {
            return true;
        }
        let mut seen = vec![false; self.n()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Parses the edge-list text format: a header line `n m` followed by `m`
    /// lines `u v`.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Input("empty edge list".into()))?;
        let (n, m) = parse_pair(header, 1)?;
        let mut edges = Vec::with_capacity(m);
        for (lineno, line) in lines {
            edges.push(parse_pair(line, lineno + 1)?);
        }
        if edges.len() != m {
            return input(format!("header declares {m} edges but {} were listed", edges.len()));
        }
        Graph::from_edges(n, &edges)
    }

    /// Built-in shorthands: `k2`, `path:N`, `cycle:N`, `grid:WxH`,
    /// `gnp:N:P:SEED`.
    pub fn from_shorthand(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let num = |s: &str| -> Result<usize> {
            s.trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad size {s:?} in graph {spec:?}")))
        };
        match kind {
            "k2" if rest.is_empty() => Ok(Graph::k2()),
            "path" => Graph::path(num(rest)?),
            "cycle" => Graph::cycle(num(rest)?),
            "grid" => {
                let (w, h) = rest
                    .split_once('x')
                    .ok_or_else(|| Error::Input(format!("grid expects WxH, got {rest:?}")))?;
                Graph::grid(num(w)?, num(h)?)
            }
            "gnp" => {
                let parts: Vec<_> = rest.split(':').collect();
                if parts.len() != 3 {
                    return input(format!("gnp expects N:P:SEED, got {rest:?}"));
                }
                let p = parts[1]
                    .parse()
                    .map_err(|_| Error::Input(format!("bad probability {:?}", parts[1])))?;
                let seed = parts[2]
                    .parse()
                    .map_err(|_| Error::Input(format!("bad seed {:?}", parts[2])))?;
                Graph::random_connected(num(parts[0])?, p, seed)
            }
            _ => input(format!("unknown graph shorthand {spec:?}")),
        }
    }
}

fn parse_pair(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => input(format!("line {lineno}: expected two non-negative integers, got {line:?}")),
    }
}

/// A finite induced subgraph of Z^d together with its exterior boundary.
///
/// Boundary vertices are kept apart from the interior graph; the edges that
/// join them to the interior are listed per interior vertex.
#[derive(Debug, Clone)]
pub struct LatticeBox {
    pub dim: usize,
    pub interior: Graph,
    pub boundary: Vec<Point>,
    /// `(boundary index, interior id)` for every boundary-interior lattice edge.
    pub boundary_adjacency: Vec<(usize, usize)>,
    index: HashMap<Point, usize>,
    boundary_index: HashMap<Point, usize>,
}

impl LatticeBox {
    pub fn new(dim: usize, points: &[Point]) -> Result<Self> {
        if dim == 0 {
            return input("lattice dimension must be at least 1");
        }
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return input(format!("point {p} is not {dim}-dimensional"));
            }
            if index.insert(p.clone(), i).is_some() {
                return input(format!("duplicate point {p}"));
            }
        }

        let mut edges = Vec::new();
        let mut boundary_set = BTreeSet::new();
        for (i, p) in points.iter().enumerate() {
            for q in p.lattice_neighbors() {
                match index.get(&q) {
                    Some(&j) if i < j => edges.push((i, j)),
                    Some(_) => {}
                    None => {
                        boundary_set.insert(q);
                    }
                }
            }
        }
        let boundary: Vec<Point> = boundary_set.into_iter().collect();
        let boundary_index: HashMap<Point, usize> =
            boundary.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();

        let mut boundary_adjacency = Vec::new();
        for (b, q) in boundary.iter().enumerate() {
            for r in q.lattice_neighbors() {
                if let Some(&i) = index.get(&r) {
                    boundary_adjacency.push((b, i));
                }
            }
        }
        boundary_adjacency.sort_unstable();

        let interior = Graph::from_edges(points.len(), &edges)?.with_coords(points.to_vec())?;
        Ok(LatticeBox { dim, interior, boundary, boundary_adjacency, index, boundary_index })
    }

    /// Cuboid box `lo..=hi` along each axis.
    pub fn cuboid(ranges: &[(i64, i64)]) -> Result<Self> {
        if ranges.iter().any(|&(lo, hi)| lo > hi) {
            return input("cuboid range has lo > hi");
        }
        let mut points = vec![Vec::new()];
        for &(lo, hi) in ranges {
            points = points
                .into_iter()
                .flat_map(|p| {
                    (lo..=hi).map(move |c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        // Row-major with the first axis varying fastest.
        let mut points: Vec<Point> = points.into_iter().map(Point).collect();
        points.sort_by(|a, b| a.0.iter().rev().cmp(b.0.iter().rev()));
        LatticeBox::new(ranges.len(), &points)
    }

    pub fn points(&self) -> &[Point] {
        self.interior.coords().expect("lattice boxes carry coordinates")
    }

    pub fn id_of(&self, p: &Point) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn boundary_id_of(&self, p: &Point) -> Option<usize> {
        self.boundary_index.get(p).copied()
    }

    /// Boundary indices adjacent to interior vertex `x`.
    pub fn boundary_neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.boundary_adjacency.iter().filter(move |&&(_, i)| i == x).map(|&(b, _)| b)
    }

    /// Degree of interior vertex `x` in the graph on interior plus boundary.
    pub fn full_degree(&self, x: usize) -> usize {
        self.interior.degree(x) + self.boundary_neighbors(x).count()
    }
}

/// L1 distance on Z^d.
pub fn lattice_dist(u: &Point, v: &Point) -> Result<u64> {
    if u.dim() != v.dim() {
        return input(format!("dimension mismatch: {u} vs {v}"));
    }
    Ok(u.0.iter().zip(&v.0).map(|(a, b)| a.abs_diff(*b)).sum())
}

/// Minimum L1 distance from `u` to any point in `set`.
pub fn dist_to_box(u: &Point, set: &[Point]) -> Result<u64> {
    if set.is_empty() {
        return input("distance to an empty vertex set");
    }
    set.iter().map(|v| lattice_dist(u, v)).try_fold(u64::MAX, |m, d| Ok(m.min(d?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> Point {
        Point(c.to_vec())
    }

    #[test]
    fn single_edge() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 1]);
        assert_eq!(g, Graph::k2());
    }

    #[test]
    fn four_cycle() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(g.degrees(), vec![2; 4]);
        assert_eq!(g, Graph::cycle(4).unwrap());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(Graph::from_edges(1, &[(0, 0)]), Err(Error::Input(m)) if m.contains("self-loop")));
        assert!(matches!(Graph::from_edges(2, &[(0, 2)]), Err(Error::Input(m)) if m.contains("outside")));
        assert!(matches!(Graph::from_edges(3, &[(0, 1), (1, 0)]), Err(Error::Input(m)) if m.contains("duplicate")));
    }

    #[test]
    fn segment_in_z() {
        let b = LatticeBox::new(1, &[p(&[0]), p(&[1]), p(&[2])]).unwrap();
        assert_eq!(b.interior.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(b.boundary, vec![p(&[-1]), p(&[3])]);
    }

    #[test]
    fn square_in_z2() {
        let b = LatticeBox::cuboid(&[(0, 1), (0, 1)]).unwrap();
        assert_eq!(b.interior.edge_count(), 4);
        assert_eq!(b.interior.degrees(), vec![2; 4]);
        // Hand enumeration: two outside neighbors per side of the square.
        let mut expected = vec![
            p(&[-1, 0]),
            p(&[-1, 1]),
            p(&[2, 0]),
            p(&[2, 1]),
            p(&[0, -1]),
            p(&[1, -1]),
            p(&[0, 2]),
            p(&[1, 2]),
        ];
        expected.sort();
        assert_eq!(b.boundary, expected);
        for x in 0..4 {
            assert_eq!(b.full_degree(x), 4);
        }
    }

    #[test]
    fn single_point_box() {
        let b = LatticeBox::new(2, &[p(&[0, 0])]).unwrap();
        assert_eq!(b.interior.edge_count(), 0);
        assert_eq!(b.boundary.len(), 4);
        assert_eq!(b.full_degree(0), 4);
    }

    #[test]
    fn duplicate_point_rejected() {
        assert!(LatticeBox::new(1, &[p(&[0]), p(&[0])]).is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(lattice_dist(&p(&[0, 0]), &p(&[0, 0])).unwrap(), 0);
        assert_eq!(lattice_dist(&p(&[0, 0]), &p(&[2, 3])).unwrap(), 5);
        assert_eq!(lattice_dist(&p(&[1]), &p(&[-4])).unwrap(), 5);
        assert!(lattice_dist(&p(&[1]), &p(&[1, 2])).is_err());

        let h = [p(&[0, 0]), p(&[1, 0])];
        assert_eq!(dist_to_box(&p(&[1, 0]), &h).unwrap(), 0);
        assert_eq!(dist_to_box(&p(&[5, 0]), &h).unwrap(), 4);
        let square = LatticeBox::cuboid(&[(0, 1), (0, 1)]).unwrap();
        assert_eq!(dist_to_box(&p(&[-1, -1]), square.points()).unwrap(), 2);
        assert!(dist_to_box(&p(&[0]), &[]).is_err());
    }

    #[test]
    fn shorthands_and_edge_list() {
        assert_eq!(Graph::from_shorthand("path:3").unwrap().degrees(), vec![1, 2, 1]);
        assert_eq!(Graph::from_shorthand("grid:3x3").unwrap().edge_count(), 12);
        assert!(Graph::from_shorthand("cycle:2").is_err());
        assert!(Graph::from_shorthand("torus:3").is_err());
        let g = Graph::from_shorthand("gnp:12:0.3:5").unwrap();
        assert_eq!(g.n(), 12);
        assert!(g.is_connected());

        let g = Graph::parse_edge_list("4 4\n0 1\n1 2\n2 3\n3 0\n").unwrap();
        assert_eq!(g, Graph::cycle(4).unwrap());
        assert!(Graph::parse_edge_list("3 2\n0 1\n").is_err());
        assert!(Graph::parse_edge_list("3 1\n0 x\n").is_err());
    }

    #[test]
    fn grid_has_coords_on_unit_edges() {
        let g = Graph::grid(3, 2).unwrap();
        let c = g.coords().unwrap();
        for (u, v) in g.edges() {
            assert_eq!(lattice_dist(&c[u], &c[v]).unwrap(), 1);
        }
        assert_eq!(c[0], p(&[0, 0]));
        assert_eq!(c[1], p(&[1, 0]));
    }
}
