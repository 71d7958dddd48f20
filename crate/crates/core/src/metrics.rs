//! Graph-recovery and estimation-accuracy metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{pair_count, SymMatrix};
use crate::netgen::NetworkModel;

/// Symmetric boolean adjacency matrix with an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    p: usize,
    bits: Vec<bool>,
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Adjacency {
            p,
            bits: vec![false; p * p],
        }
    }

    /// Builds from unordered pairs; `(i, j)` and `(j, i)` are the same edge.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Adjacency::empty(p);
        for &(i, j) in edges {
            if i >= p || j >= p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: i.max(j) + 1,
                });
            }
            if i == j {
                return Err(Error::Domain(format!("self-loop at node {i}")));
            }
            adj.set(i, j, true);
        }
        Ok(adj)
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let p = rows.len();
        let mut adj = Adjacency::empty(p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            for (j, &b) in row.iter().enumerate() {
                adj.bits[i * p + j] = b;
            }
        }
        for i in 0..p {
            if adj.has_edge(i, i) {
                return Err(Error::Domain(format!("self-loop at node {i}")));
            }
            for j in (i + 1)..p {
                if adj.has_edge(i, j) != adj.has_edge(j, i) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(adj)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.p + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[i * self.p + j] = value;
        self.bits[j * self.p + i] = value;
    }

    /// Edges `(i, j)` with `i < j`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.p)
            .map(|i| (0..self.p).map(|j| self.has_edge(i, j)).collect())
            .collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index becomes the root, which keeps labels canonical.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Partition of the nodes into connectivity components.
///
/// Components are listed by their smallest node; nodes within a component are
/// sorted.
pub fn connectivity_components(adjacency: &Adjacency) -> Vec<Vec<usize>> {
    let p = adjacency.dim();
    let mut uf = UnionFind::new(p);
    for (i, j) in adjacency.edges() {
        uf.union(i, j);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; p];
    for node in 0..p {
        let root = uf.find(node);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(node);
    }
    groups
}

/// Component index of every node.
pub fn component_labels(p: usize, components: &[Vec<usize>]) -> Vec<usize> {
    let mut labels = vec![0; p];
    for (c, comp) in components.iter().enumerate() {
        for &node in comp {
            labels[node] = c;
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn normalized_edges(p: usize, edges: &[(usize, usize)]) -> Result<Adjacency> {
    Adjacency::from_edges(p, edges)
}

/// Confusion counts over unordered node pairs.
pub fn confusion(estimated: &[(usize, usize)], truth: &Adjacency) -> Result<Confusion> {
    let p = truth.dim();
    let est = normalized_edges(p, estimated)?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for i in 0..p {
        for j in (i + 1)..p {
            match (est.has_edge(i, j), truth.has_edge(i, j)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

/// `TP / (TP + (FP + FN)/2)`; `1` when there are no edges anywhere.
pub fn f1_score(c: &Confusion) -> f64 {
    if c.tp + c.fp + c.fn_ == 0 {
        return 1.0;
    }
    c.tp as f64 / (c.tp as f64 + 0.5 * (c.fp + c.fn_) as f64)
}

/// `||Θ̂ - Θ||_F`.
pub fn frobenius_distance(theta_hat: &SymMatrix, theta: &SymMatrix) -> Result<f64> {
    if theta_hat.dim() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            got: theta_hat.dim(),
        });
    }
    Ok((theta_hat.as_matrix() - theta.as_matrix()).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistantFdr {
    pub v_distant: usize,
    pub r_total: usize,
    pub dfdr: f64,
    pub fwer_event: bool,
}

/// Discoveries that join distinct true connectivity components.
pub fn distant_fdr(estimated: &[(usize, usize)], components: &[Vec<usize>], p: usize) -> Result<DistantFdr> {
    let est = normalized_edges(p, estimated)?;
    let labels = component_labels(p, components);
    let edges = est.edges();
    let v_distant = edges.iter().filter(|&&(i, j)| labels[i] != labels[j]).count();
    let r_total = edges.len();
    Ok(DistantFdr {
        v_distant,
        r_total,
        dfdr: v_distant as f64 / r_total.max(1) as f64,
        fwer_event: v_distant > 0,
    })
}

/// Fraction of true edges that were discovered.
pub fn power(estimated: &[(usize, usize)], truth: &Adjacency) -> Result<f64> {
    let c = confusion(estimated, truth)?;
    let true_edges = c.tp + c.fn_;
    if true_edges == 0 {
        return Err(Error::Domain("power is undefined for a graph without edges".into()));
    }
    Ok(c.tp as f64 / true_edges as f64)
}

/// Every evaluation quantity for one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub f1: f64,
    pub frobenius: f64,
    pub v_distant: usize,
    pub r_total: usize,
    pub dfdr: f64,
    pub fwer_event: bool,
    /// `None` when the true graph has no edges.
    pub power: Option<f64>,
}

pub fn evaluate(
    estimated: &[(usize, usize)],
    theta_hat: &SymMatrix,
    truth: &NetworkModel,
) -> Result<MetricsReport> {
    evaluate_against(estimated, theta_hat, &truth.theta, &truth.adjacency)
}

/// As [`evaluate`], from the oracle precision matrix and true graph alone.
pub fn evaluate_against(
    estimated: &[(usize, usize)],
    theta_hat: &SymMatrix,
    theta: &SymMatrix,
    adjacency: &Adjacency,
) -> Result<MetricsReport> {
    let p = adjacency.dim();
    if theta.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: theta.dim(),
        });
    }
    let c = confusion(estimated, adjacency)?;
    debug_assert_eq!(c.tp + c.fp + c.fn_ + c.tn, pair_count(p));
    let d = distant_fdr(estimated, &connectivity_components(adjacency), p)?;
    let power = if c.tp + c.fn_ == 0 {
        None
    } else {
        Some(c.tp as f64 / (c.tp + c.fn_) as f64)
    };
    Ok(MetricsReport {
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tn: c.tn,
        f1: f1_score(&c),
        frobenius: frobenius_distance(theta_hat, theta)?,
        v_distant: d.v_distant,
        r_total: d.r_total,
        dfdr: d.dfdr,
        fwer_event: d.fwer_event,
        power,
    })
}
