//! Discrete metric-measure spaces.
//!
//! A [`DiscreteMMSpace`] is a finite weighted graph carrying three mutually
//! consistent structures: edge lengths inducing a shortest-path metric,
//! edge conductances driving the Dirichlet form, and a positive reference
//! measure on the points. The space is immutable after construction, so it
//! can be shared freely across threads.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

pub const SPACE_SCHEMA_VERSION: u32 = 1;

/// One undirected edge. Stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
    pub conductance: f64,
}

/// Finite metric-measure space: points, edges, shortest-path metric, measure.
#[derive(Debug, Clone)]
pub struct DiscreteMMSpace {
    name: String,
    n: usize,
    edges: Vec<Edge>,
    measure: DVector<f64>,
    dist: DMatrix<f64>,
    diam: f64,
    /// adjacency[i] = (neighbor, length, conductance), sorted by neighbor index
    adjacency: Vec<Vec<(usize, f64, f64)>>,
    /// optional embedding coordinates, used by generators and named densities
    coords: Option<Vec<[f64; 3]>>,
    metadata: serde_json::Map<String, serde_json::Value>,
}

impl DiscreteMMSpace {
    /// Build a space from raw data, computing the shortest-path metric and
    /// validating every invariant (positivity, connectivity, metric axioms).
    pub fn build(
        name: impl Into<String>,
        n: usize,
        edges: Vec<(usize, usize, f64, f64)>,
        measure: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParams("space needs at least one point".into()));
        }
        if measure.len() != n {
            return Err(Error::BadParams(format!(
                "measure has {} entries for {} points",
                measure.len(),
                n
            )));
        }
        for (i, &m) in measure.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::NonpositiveMeasure(i, m));
            }
        }

        // symmetric closure with deduplication; (i,j) and (j,i) collapse
        let mut canon: std::collections::BTreeMap<(usize, usize), (f64, f64)> =
            std::collections::BTreeMap::new();
        for &(i, j, len, cond) in &edges {
            if i >= n || j >= n {
                return Err(Error::BadParams(format!("edge ({i}, {j}) out of range")));
            }
            if i == j {
                return Err(Error::BadParams(format!("self loop at {i}")));
            }
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::NonpositiveLength(i, j, len));
            }
            if cond < 0.0 || !cond.is_finite() {
                return Err(Error::BadParams(format!(
                    "edge ({i}, {j}) has invalid conductance {cond}"
                )));
            }
            let key = (i.min(j), i.max(j));
            canon.insert(key, (len, cond));
        }
        let edges: Vec<Edge> = canon
            .into_iter()
            .map(|((i, j), (length, conductance))| Edge {
                i,
                j,
                length,
                conductance,
            })
            .collect();

        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.i].push((e.j, e.length, e.conductance));
            adjacency[e.j].push((e.i, e.length, e.conductance));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by(|a, b| a.0.cmp(&b.0));
        }

        let mut dist = DMatrix::zeros(n, n);
        for src in 0..n {
            let (d, _) = dijkstra(&adjacency, src);
            for (j, dj) in d.iter().enumerate() {
                if !dj.is_finite() {
                    return Err(Error::DisconnectedGraph(j));
                }
                dist[(src, j)] = *dj;
            }
        }
        // symmetrize exactly; Dijkstra from both ends can differ in the last ulp
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist[(i, j)].min(dist[(j, i)]);
                dist[(i, j)] = d;
                dist[(j, i)] = d;
            }
        }
        let diam = dist.iter().fold(0.0f64, |a, &b| a.max(b));

        let space = DiscreteMMSpace {
            name: name.into(),
            n,
            edges,
            measure: DVector::from_vec(measure),
            dist,
            diam,
            adjacency,
            coords: None,
            metadata: serde_json::Map::new(),
        };
        space.validate_metric()?;
        Ok(space)
    }

    fn validate_metric(&self) -> Result<()> {
        let n = self.n;
        for e in &self.edges {
            debug_assert!(self.dist[(e.i, e.j)] <= e.length + 1e-12 * e.length.max(1.0));
        }
        // exhaustive triangle inequality check is cubic; skip above desk scale
        if n <= 200 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let lhs = self.dist[(i, j)];
                        let rhs = self.dist[(i, k)] + self.dist[(k, j)];
                        if lhs > rhs + 1e-9 * (1.0 + rhs) {
                            return Err(Error::BadParams(format!(
                                "triangle inequality fails on ({i},{j},{k})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn measure(&self) -> &DVector<f64> {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.sum()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn dist_matrix(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Neighbors of `i` as `(j, length, conductance)`, ascending in `j`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64, f64)] {
        &self.adjacency[i]
    }

    /// Mesh scale: the largest edge length.
    pub fn mesh_size(&self) -> f64 {
        self.edges.iter().fold(0.0f64, |a, e| a.max(e.length))
    }

    pub fn coords(&self) -> Option<&[[f64; 3]]> {
        self.coords.as_deref()
    }

    pub(crate) fn set_coords(&mut self, coords: Vec<[f64; 3]>) {
        self.coords = Some(coords);
    }

    pub fn metadata(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.metadata
    }

    pub(crate) fn metadata_mut(&mut self) -> &mut serde_json::Map<String, serde_json::Value> {
        &mut self.metadata
    }

    /// Measure of the closed ball `{y : d(x, y) <= r}`.
    pub fn ball_measure(&self, x: usize, r: f64) -> f64 {
        (0..self.n)
            .filter(|&y| self.dist[(x, y)] <= r)
            .map(|y| self.measure[y])
            .sum()
    }

    /// Shortest path from `src` to `dst` (inclusive), deterministic under
    /// lexicographic tie-breaking on predecessor indices.
    pub fn shortest_path(&self, src: usize, dst: usize) -> Vec<usize> {
        let (_, pred) = dijkstra(&self.adjacency, src);
        let mut path = vec![dst];
        let mut cur = dst;
        while cur != src {
            cur = pred[cur].expect("connected space");
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// Replace measure and conductances (used by the drift module). Lengths
    /// and therefore distances are untouched.
    pub(crate) fn reweighted(
        &self,
        name: String,
        measure: DVector<f64>,
        conductance: impl Fn(&Edge) -> f64,
    ) -> Self {
        let mut out = self.clone();
        out.name = name;
        for k in 0..out.edges.len() {
            let w = conductance(&out.edges[k]);
            out.edges[k].conductance = w;
        }
        out.adjacency = vec![Vec::new(); out.n];
        for e in &out.edges {
            out.adjacency[e.i].push((e.j, e.length, e.conductance));
            out.adjacency[e.j].push((e.i, e.length, e.conductance));
        }
        for nbrs in &mut out.adjacency {
            nbrs.sort_by(|a, b| a.0.cmp(&b.0));
        }
        out.measure = measure;
        out
    }
}

/// Dijkstra with deterministic tie-breaking: on equal distance the smaller
/// predecessor index wins. Returns (distances, predecessors).
fn dijkstra(adjacency: &[Vec<(usize, f64, f64)>], src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = adjacency.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;

    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            // min-heap on (distance, index)
            other
                .0
                .partial_cmp(&self.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| other.1.cmp(&self.1))
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Item(0.0, src));
    while let Some(Item(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, len, _) in &adjacency[u] {
            let alt = d + len;
            if alt < dist[v] {
                dist[v] = alt;
                pred[v] = Some(u);
                heap.push(Item(alt, v));
            } else if alt == dist[v] {
                if let Some(p) = pred[v] {
                    if u < p {
                        pred[v] = Some(u);
                    }
                }
            }
        }
    }
    (dist, pred)
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    schema_version: u32,
    name: String,
    n: usize,
    edges: Vec<(usize, usize, f64, f64)>,
    measure: Vec<f64>,
    #[serde(default)]
    metadata: serde_json::Map<String, serde_json::Value>,
}

/// Serialize a space to JSON. Distances are never stored; they are
/// recomputed on load.
pub fn save_space(space: &DiscreteMMSpace, path: impl AsRef<Path>) -> Result<()> {
    let mut metadata = space.metadata.clone();
    if let Some(coords) = &space.coords {
        metadata.insert(
            "coords".into(),
            serde_json::to_value(coords).expect("serializable"),
        );
    }
    let file = SpaceFile {
        schema_version: SPACE_SCHEMA_VERSION,
        name: space.name.clone(),
        n: space.n,
        edges: space
            .edges
            .iter()
            .map(|e| (e.i, e.j, e.length, e.conductance))
            .collect(),
        measure: space.measure.iter().copied().collect(),
        metadata,
    };
    let text = serde_json::to_string_pretty(&file).expect("serializable");
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_space(path: impl AsRef<Path>) -> Result<DiscreteMMSpace> {
    let text = std::fs::read_to_string(path)?;
    let file: SpaceFile =
        serde_json::from_str(&text).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    if file.schema_version != SPACE_SCHEMA_VERSION {
        return Err(Error::SchemaViolation(format!(
            "unsupported schema version {}",
            file.schema_version
        )));
    }
    if file.edges.is_empty() && file.n > 1 {
        return Err(Error::SchemaViolation("no edges".into()));
    }
    if file.measure.len() != file.n {
        return Err(Error::SchemaViolation(format!(
            "measure length {} does not match n = {}",
            file.measure.len(),
            file.n
        )));
    }
    let mut space = DiscreteMMSpace::build(file.name, file.n, file.edges, file.measure)?;
    let mut metadata = file.metadata;
    if let Some(coords_val) = metadata.remove("coords") {
        let coords: Vec<[f64; 3]> = serde_json::from_value(coords_val)
            .map_err(|e| Error::SchemaViolation(format!("bad coords: {e}")))?;
        if coords.len() != space.n {
            return Err(Error::SchemaViolation("coords length mismatch".into()));
        }
        space.set_coords(coords);
    }
    *space.metadata_mut() = metadata;
    Ok(space)
}

/// The standard two-point test space: one unit edge, unit conductance,
/// unit masses.
pub fn two_point() -> DiscreteMMSpace {
    DiscreteMMSpace::build("two_point", 2, vec![(0, 1, 1.0, 1.0)], vec![1.0, 1.0]).unwrap()
}
