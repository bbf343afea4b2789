//! Graph data model, file ingestion and the modularity matrix.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::info;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Bijection between the labels found in input files and contiguous node
/// indices, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity map `"0" -> 0, "1" -> 1, ...`.
    pub fn identity(n: usize) -> Self {
        let mut map = Self::new();
        for i in 0..n {
            map.get_or_insert(&i.to_string());
        }
        map
    }

    pub fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Immutable undirected simple graph over nodes `0..n_nodes`.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    features: Option<Matrix>,
    labels: Option<Vec<usize>>,
    id_map: IdMap,
}

impl Graph {
    /// Builds a graph from index pairs. Self-loops and repeated pairs (in
    /// either orientation) are dropped.
    pub fn from_edges(n_nodes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self::build(n_nodes, pairs, IdMap::identity(n_nodes)).0
    }

    fn build(
        n_nodes: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
        id_map: IdMap,
    ) -> (Self, usize, usize) {
        let mut adjacency = vec![Vec::new(); n_nodes];
        let mut self_loops = 0;
        for (u, v) in pairs {
            assert!(u < n_nodes && v < n_nodes, "edge ({u}, {v}) out of range");
            if u == v {
                self_loops += 1;
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut duplicates = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            duplicates += before - list.len();
        }
        let edges = adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect();
        let graph = Graph {
            adjacency,
            edges,
            features: None,
            labels: None,
            id_map,
        };
        // each duplicate pair was counted once per endpoint
        (graph, self_loops, duplicates / 2)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of undirected edges, `M`.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, |x| x.ncols())
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn id_map(&self) -> &IdMap {
        &self.id_map
    }

    /// Attaches a feature matrix, L2-normalizing every non-zero row.
    pub fn with_features(mut self, mut features: Matrix) -> Result<Self> {
        if features.nrows() != self.n_nodes() {
            return Err(Error::shape(
                "feature rows",
                self.n_nodes(),
                features.nrows(),
            ));
        }
        normalize_rows(&mut features);
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_nodes() {
            return Err(Error::Coverage {
                expected: self.n_nodes(),
                actual: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Entry `b_ij = a_ij - k_i k_j / 2M` of the modularity matrix, computed
    /// without materializing any row.
    pub fn modularity_entry(&self, i: usize, j: usize) -> f64 {
        let two_m = 2.0 * self.n_edges() as f64;
        let a = if self.has_edge(i, j) { 1.0 } else { 0.0 };
        a - (self.degree(i) * self.degree(j)) as f64 / two_m
    }

    /// Row `b_i` of the modularity matrix, built on demand.
    pub fn modularity_row(&self, i: usize) -> Vec<f64> {
        let two_m = 2.0 * self.n_edges() as f64;
        let ki = self.degree(i) as f64;
        let mut row: Vec<f64> = self
            .adjacency
            .iter()
            .map(|list| -ki * list.len() as f64 / two_m)
            .collect();
        for &j in &self.adjacency[i] {
            row[j] += 1.0;
        }
        row
    }

    /// Subgraph induced by `keep` (in that order); features and labels are
    /// carried over, original labels are preserved in the id map.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Graph {
        let mut new_index = vec![usize::MAX; self.n_nodes()];
        let mut id_map = IdMap::new();
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
            id_map.get_or_insert(self.id_map.name(old));
        }
        let pairs = self.edges.iter().filter_map(|&(u, v)| {
            let (a, b) = (new_index[u], new_index[v]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b))
        });
        let (mut graph, _, _) = Self::build(keep.len(), pairs, id_map);
        graph.features = self.features.as_ref().map(|x| x.select(ndarray::Axis(0), keep));
        graph.labels = self
            .labels
            .as_ref()
            .map(|l| keep.iter().map(|&i| l[i]).collect());
        graph
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.n_nodes());
        let mut inverse = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let pairs = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        let mut id_map = IdMap::new();
        for &old in &inverse {
            id_map.get_or_insert(self.id_map.name(old));
        }
        let (mut graph, _, _) = Self::build(self.n_nodes(), pairs, id_map);
        graph.features = self
            .features
            .as_ref()
            .map(|x| x.select(ndarray::Axis(0), &inverse));
        graph.labels = self
            .labels
            .as_ref()
            .map(|l| inverse.iter().map(|&i| l[i]).collect());
        graph
    }
}

fn normalize_rows(x: &mut Matrix) {
    for mut row in x.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads a whitespace-separated edge list. Lines starting with `#` are
/// skipped. Node labels are remapped to contiguous indices in order of first
/// appearance; the result is always undirected.
pub fn load_edge_list(path: impl AsRef<Path>, directed_hint: bool) -> Result<Graph> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut id_map = IdMap::new();
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(parse_error(
                path,
                lineno + 1,
                format!("expected 2 node labels, found {}", tokens.len()),
            ));
        }
        let u = id_map.get_or_insert(tokens[0]);
        let v = id_map.get_or_insert(tokens[1]);
        pairs.push((u, v));
    }
    let n = id_map.len();
    let (graph, self_loops, duplicates) = Graph::build(n, pairs, id_map);
    if graph.n_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    if self_loops + duplicates > 0 {
        info!(
            "{}: dropped {self_loops} self-loops and {duplicates} duplicate edges{}",
            path.display(),
            if directed_hint { " (reciprocal arcs merged)" } else { "" }
        );
    }
    Ok(graph)
}

fn parse_number(path: &Path, line: usize, cell: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(path, line, format!("non-numeric cell {cell:?}")))
}

/// Loads node features and attaches them (row-normalized) to `graph`.
///
/// Two layouts are accepted:
/// * plain comma-separated numeric rows, where row `r` belongs to the node
///   whose original label is `r`;
/// * `label,v1 v2 ...`: exactly two comma-separated cells per line, the
///   second holding the whitespace-separated feature vector.
pub fn load_features(path: impl AsRef<Path>, graph: Graph) -> Result<Graph> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let labeled = !lines.is_empty()
        && lines.iter().all(|(_, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            cells.len() == 2 && cells[1].split_whitespace().count() > 1
        });
    let n = graph.n_nodes();
    if lines.len() != n {
        return Err(Error::shape("feature rows", n, lines.len()));
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut width = None;
    for (row_index, &(lineno, line)) in lines.iter().enumerate() {
        let (label, values): (String, Vec<f64>) = if labeled {
            let (label, vector) = line.split_once(',').expect("checked above");
            let values = vector
                .split_whitespace()
                .map(|c| parse_number(path, lineno, c))
                .collect::<Result<_>>()?;
            (label.trim().to_string(), values)
        } else {
            let values = line
                .split(',')
                .map(|c| parse_number(path, lineno, c))
                .collect::<Result<_>>()?;
            (row_index.to_string(), values)
        };
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(parse_error(path, lineno, "ragged feature row"));
        }
        let node = graph
            .id_map
            .get(&label)
            .ok_or_else(|| parse_error(path, lineno, format!("unknown node label {label:?}")))?;
        if rows[node].replace(values).is_some() {
            return Err(parse_error(path, lineno, format!("duplicate row for {label:?}")));
        }
    }
    let width = width.unwrap_or(0);
    let flat: Vec<f64> = rows
        .into_iter()
        .flat_map(|r| r.expect("every node has exactly one row"))
        .collect();
    let features = Array2::from_shape_vec((n, width), flat).expect("row widths checked");
    graph.with_features(features)
}

/// Reads `node-label community-id` pairs. Community ids may be arbitrary
/// tokens; they are compacted to `0..K` in order of first appearance.
pub fn load_labels(path: impl AsRef<Path>, graph: Graph) -> Result<Graph> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut communities = IdMap::new();
    let mut labels = vec![None; graph.n_nodes()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(parse_error(path, lineno + 1, "expected `node-label community-id`"));
        }
        let Some(node) = graph.id_map.get(tokens[0]) else {
            // labels for nodes absent from the edge list are ignored
            continue;
        };
        labels[node] = Some(communities.get_or_insert(tokens[1]));
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| {
                parse_error(path, 0, format!("no label for node {:?}", graph.id_map.name(i)))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    graph.with_labels(labels)
}

/// Dense modularity matrix `B` with `b_ij = a_ij - k_i k_j / 2M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularityMatrix {
    pub values: Matrix,
}

impl ModularityMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

pub fn modularity_matrix(graph: &Graph) -> Result<ModularityMatrix> {
    if graph.n_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = graph.n_nodes();
    let degrees: Vec<f64> = graph.degrees().into_iter().map(|k| k as f64).collect();
    let two_m = 2.0 * graph.n_edges() as f64;
    let mut values = Array2::from_shape_fn((n, n), |(i, j)| -degrees[i] * degrees[j] / two_m);
    for &(u, v) in graph.edges() {
        values[[u, v]] += 1.0;
        values[[v, u]] += 1.0;
    }
    Ok(ModularityMatrix { values })
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the row sums of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub values: Matrix,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// `Ã · m`.
    pub fn apply(&self, m: &Matrix) -> Matrix {
        self.values.dot(m)
    }
}

pub fn normalized_adjacency(graph: &Graph) -> NormalizedAdjacency {
    let n = graph.n_nodes();
    let d: Vec<f64> = (0..n).map(|i| (graph.degree(i) + 1) as f64).collect();
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        values[[i, i]] = 1.0 / d[i];
        for &j in graph.neighbors(i) {
            values[[i, j]] = 1.0 / (d[i] * d[j]).sqrt();
        }
    }
    NormalizedAdjacency { values }
}

/// Hard partition of the nodes, optionally with the centroids that produced
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    k: usize,
    #[serde(skip)]
    centroids: Option<Matrix>,
}

impl CommunityAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Config(format!("community id {bad} >= k = {k}")));
        }
        Ok(Self {
            labels,
            k,
            centroids: None,
        })
    }

    /// Uses `k = max(label) + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self {
            labels,
            k,
            centroids: None,
        }
    }

    pub fn with_centroids(mut self, centroids: Matrix) -> Result<Self> {
        if centroids.nrows() != self.k {
            return Err(Error::shape("centroid rows", self.k, centroids.nrows()));
        }
        self.centroids = Some(centroids);
        Ok(self)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn centroids(&self) -> Option<&Matrix> {
        self.centroids.as_ref()
    }

    /// `δ(σ_i, σ_j)`.
    pub fn same_community(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// Centroids recomputed as per-community means of `embedding`. This is
    /// the explicit maintenance step; inference never refits on its own.
    pub fn refit_centroids(&mut self, embedding: &Matrix) -> Result<()> {
        if embedding.nrows() != self.labels.len() {
            return Err(Error::shape("embedding rows", self.labels.len(), embedding.nrows()));
        }
        let mut sums = Array2::zeros((self.k, embedding.ncols()));
        let mut counts = vec![0usize; self.k];
        for (row, &c) in embedding.rows().into_iter().zip(&self.labels) {
            let mut target = sums.row_mut(c);
            target += &row;
            counts[c] += 1;
        }
        for (mut row, &count) in sums.rows_mut().into_iter().zip(&counts) {
            if count > 0 {
                row /= count as f64;
            }
        }
        self.centroids = Some(sums);
        Ok(())
    }

    /// Two-column `node-label community-id` text.
    pub fn to_text(&self, id_map: &IdMap) -> String {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{} {c}\n", id_map.name(i)))
            .collect()
    }
}
