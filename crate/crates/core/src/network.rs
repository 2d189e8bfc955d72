//! Communication topology: Erdős–Rényi graphs, Metropolis–Hastings mixing
//! weights and the EXTRA companion matrix `W̃ = (I + W)/2`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Self-loops are rejected.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (i, j) in pairs {
            if i == j || i >= n || j >= n {
                return Err(Error::InvalidConfig(format!("bad edge ({i}, {j}) for n = {n}")));
            }
            edges.insert((i.min(j), i.max(j)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self { n, edges, neighbors })
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).expect("valid pairs")
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("valid pairs")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`.
    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn average_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.n
    }
}

/// Realized ER sample together with the seed that produced it.
#[derive(Debug, Clone)]
pub struct ErSample {
    pub graph: Graph,
    /// Seed of the accepted (connected) draw.
    pub seed_used: u64,
    /// Number of disconnected draws that were rejected.
    pub rejected: u64,
}

/// `G(n, p)` conditioned on connectivity: draws with `seed, seed+1, …` until
/// the sample is connected.
pub fn generate_er_graph(n: usize, p: f64, seed: u64) -> Result<ErSample> {
    if n == 0 || !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "Erdos-Renyi graph needs n >= 1 and 0 < p <= 1 (n={n}, p={p})"
        )));
    }
    let mut rejected = 0;
    loop {
        let seed_used = seed.wrapping_add(rejected);
        let mut rng = ChaCha8Rng::seed_from_u64(seed_used);
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    pairs.push((i, j));
                }
            }
        }
        let graph = Graph::from_edges(n, pairs)?;
        if graph.is_connected() {
            return Ok(ErSample {
                graph,
                seed_used,
                rejected,
            });
        }
        rejected += 1;
    }
}

/// Symmetric doubly stochastic mixing matrix and `W̃ = (I + W)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    w_tilde: DMatrix<f64>,
}

impl MixingMatrix {
    /// Wraps an arbitrary square matrix without any checks. Use
    /// [`check_mixing`] to audit it.
    pub fn from_raw(w: DMatrix<f64>) -> Self {
        let n = w.nrows();
        let w_tilde = (DMatrix::identity(n, n) + &w) * 0.5;
        Self { w, w_tilde }
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn w_tilde(&self) -> &DMatrix<f64> {
        &self.w_tilde
    }

    pub fn size(&self) -> usize {
        self.w.nrows()
    }

    /// `‖W − J‖₂` with `J = 𝟏𝟏ᵀ/n`.
    pub fn spectral_gap(&self) -> f64 {
        spectral_gap(self)
    }

    /// Writes `n` then one `i j w_ij` line per upper-triangular edge.
    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let n = self.size();
        let mut out = format!("{n}\n");
        for i in 0..n {
            for j in i + 1..n {
                let w = self.w[(i, j)];
                if w != 0.0 {
                    writeln!(out, "{i} {j} {w:.16e}").expect("writing to String");
                }
            }
        }
        out
    }

    /// Inverse of [`MixingMatrix::to_text`]; diagonal entries are `1 − Σ_j w_ij`.
    pub fn read_text(path: impl AsRef<Path>) -> Result<(Graph, Self)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse_text(&text).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn parse_text(text: &str) -> std::result::Result<(Graph, Self), String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n: usize = lines
            .next()
            .ok_or("empty file")?
            .trim()
            .parse()
            .map_err(|e| format!("bad node count: {e}"))?;
        let mut w = DMatrix::zeros(n, n);
        let mut pairs = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [i, j, v] = fields[..] else {
                return Err(format!("expected `i j w`, got `{line}`"));
            };
            let i: usize = i.parse().map_err(|e| format!("bad index in `{line}`: {e}"))?;
            let j: usize = j.parse().map_err(|e| format!("bad index in `{line}`: {e}"))?;
            let v: f64 = v.parse().map_err(|e| format!("bad weight in `{line}`: {e}"))?;
            if i >= n || j >= n || i == j {
                return Err(format!("edge ({i}, {j}) out of range for n = {n}"));
            }
            w[(i, j)] = v;
            w[(j, i)] = v;
            pairs.push((i, j));
        }
        fill_diagonal(&mut w);
        let graph = Graph::from_edges(n, pairs).map_err(|e| e.to_string())?;
        Ok((graph, Self::from_raw(w)))
    }
}

fn fill_diagonal(w: &mut DMatrix<f64>) {
    let n = w.nrows();
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
}

/// `w_ij = 1/(max(deg_i, deg_j) + 1)` on edges, `w_ii = 1 − Σ_{j≠i} w_ij`.
pub fn metropolis_weights(g: &Graph) -> MixingMatrix {
    let n = g.node_count();
    let mut w = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let v = 1.0 / (g.degree(i).max(g.degree(j)) + 1) as f64;
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    fill_diagonal(&mut w);
    MixingMatrix::from_raw(w)
}

/// `‖W − J‖₂`, computed from the eigenvalues of the symmetric part.
pub fn spectral_gap(m: &MixingMatrix) -> f64 {
    let n = m.size();
    if n <= 1 {
        return 0.0;
    }
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    let diff = m.w() - j;
    let sym = (&diff + diff.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Outcome of auditing a mixing matrix against its invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingCheck {
    pub symmetry_error: f64,
    pub row_sum_error: f64,
    pub col_sum_error: f64,
    pub min_entry: f64,
    pub min_diagonal: f64,
    pub spectral_gap: f64,
    /// `w_ij > 0` exactly on edges (only checked when a graph is given).
    pub support_matches: bool,
}

impl MixingCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.symmetry_error <= tol
            && self.row_sum_error <= tol
            && self.col_sum_error <= tol
            && self.min_entry >= 0.0
            && self.min_diagonal > 0.0
            && self.spectral_gap < 1.0
            && self.support_matches
    }
}

pub fn check_mixing(m: &MixingMatrix, graph: Option<&Graph>) -> MixingCheck {
    let w = m.w();
    let n = m.size();
    let symmetry_error = (w - w.transpose()).amax();
    let row_sum_error = w.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
    let col_sum_error = w.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
    let min_entry = w.iter().copied().fold(f64::INFINITY, f64::min);
    let min_diagonal = w.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
    let support_matches = graph.is_none_or(|g| {
        g.node_count() == n
            && (0..n).all(|i| (0..n).filter(|&j| j != i).all(|j| (w[(i, j)] > 0.0) == g.has_edge(i, j)))
    });
    MixingCheck {
        symmetry_error,
        row_sum_error,
        col_sum_error,
        min_entry,
        min_diagonal,
        spectral_gap: spectral_gap(m),
        support_matches,
    }
}
