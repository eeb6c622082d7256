//! Labeled graphs, symmetric normalization, and the Laplacian eigenbasis.
//!
//! Every graph gets a forced self-loop on each node, so degrees are always
//! positive and the normalized operators are well defined. Only unweighted
//! undirected graphs are supported.

use ndarray::{Array1, Array2};

use crate::linalg::sym_eigen;
use crate::{Error, Result};

/// Undirected graph with unit diagonal plus a per-node class assignment.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    adjacency: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
    class_sizes: Vec<usize>,
}

impl LabeledGraph {
    /// Builds a graph from an edge list. Edges are symmetrized (an edge
    /// listed in either direction connects both ways), duplicates collapse
    /// to weight 1, and the diagonal is forced to 1 regardless of input.
    pub fn from_edges(edges: &[(usize, usize)], labels: &[usize]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adjacency = Array2::<f64>::zeros((n, n));
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::NodeOutOfRange { id: u, n });
            }
            if v >= n {
                return Err(Error::NodeOutOfRange { id: v, n });
            }
            adjacency[[u, v]] = 1.0;
            adjacency[[v, u]] = 1.0;
        }
        for i in 0..n {
            adjacency[[i, i]] = 1.0;
        }
        Self::from_parts(adjacency, labels.to_vec())
    }

    /// Builds a graph from an existing 0/1 adjacency matrix. The matrix must
    /// be symmetric; the diagonal is forced to 1.
    pub fn from_adjacency(mut adjacency: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if adjacency.nrows() != n || adjacency.ncols() != n {
            return Err(Error::DimMismatch {
                context: "adjacency size vs labels",
                expected: n,
                got: adjacency.nrows(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = adjacency[[i, j]];
                if i != j && v != 0.0 && v != 1.0 {
                    return Err(Error::WeightedEdge { i, j, value: v });
                }
                if adjacency[[i, j]] != adjacency[[j, i]] {
                    return Err(Error::Asymmetric { i, j });
                }
            }
        }
        for i in 0..n {
            adjacency[[i, i]] = 1.0;
        }
        Self::from_parts(adjacency, labels)
    }

    fn from_parts(adjacency: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let class_count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut class_sizes = vec![0usize; class_count];
        for &l in &labels {
            class_sizes[l] += 1;
        }
        if let Some(class) = class_sizes.iter().position(|&c| c == 0) {
            return Err(Error::MissingClass { class });
        }
        Ok(Self {
            adjacency,
            labels,
            class_count,
            class_sizes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Class sizes R_k, indexed by class id.
    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    /// Undirected edge count excluding self-loops.
    pub fn edge_count(&self) -> usize {
        let n = self.node_count();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[[i, j]] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Number of connected components (self-loops do not connect anything).
    #[allow(clippy::needless_range_loop)]
    pub fn connected_components(&self) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if v != u && self.adjacency[[u, v]] != 0.0 && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }

    /// 0/1 class indicator matrix Y together with the class sizes.
    pub fn label_matrix(&self) -> LabelMatrix {
        let n = self.node_count();
        let k = self.class_count;
        let mut y = Array2::<f64>::zeros((n, k));
        for (i, &l) in self.labels.iter().enumerate() {
            y[[i, l]] = 1.0;
        }
        LabelMatrix {
            y,
            class_sizes: self.class_sizes.clone(),
        }
    }

    /// Indicator vector of one class.
    pub fn class_indicator(&self, class: usize) -> Array1<f64> {
        let mut v = Array1::<f64>::zeros(self.node_count());
        for (i, &l) in self.labels.iter().enumerate() {
            if l == class {
                v[i] = 1.0;
            }
        }
        v
    }
}

/// Class indicator columns Y with Y^T Y = diag(R).
#[derive(Debug, Clone)]
pub struct LabelMatrix {
    y: Array2<f64>,
    class_sizes: Vec<usize>,
}

impl LabelMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn class_count(&self) -> usize {
        self.class_sizes.len()
    }
}

/// The normalized operators derived from one graph: symmetric normalized
/// adjacency and Laplacian plus the random-walk matrix.
#[derive(Debug, Clone)]
pub struct NormalizedOperators {
    pub tilde_a: Array2<f64>,
    pub tilde_l: Array2<f64>,
    pub random_walk: Array2<f64>,
    pub degrees: Array1<f64>,
}

/// Computes tilde_A = D^{-1/2} A D^{-1/2}, tilde_L = I - tilde_A, and
/// P = D^{-1} A. Self-loops guarantee every degree is at least 1.
pub fn normalize(graph: &LabeledGraph) -> NormalizedOperators {
    let a = graph.adjacency();
    let n = graph.node_count();
    let degrees = Array1::from_iter((0..n).map(|i| a.row(i).sum()));
    let inv_sqrt: Vec<f64> = degrees.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let mut tilde_a = Array2::<f64>::zeros((n, n));
    let mut random_walk = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            tilde_a[[i, j]] = inv_sqrt[i] * a[[i, j]] * inv_sqrt[j];
            random_walk[[i, j]] = a[[i, j]] / degrees[i];
        }
    }
    let mut tilde_l = Array2::<f64>::eye(n);
    tilde_l -= &tilde_a;
    NormalizedOperators {
        tilde_a,
        tilde_l,
        random_walk,
        degrees,
    }
}

/// Eigenvalues in [0, 2] (ascending) and orthonormal frequency components
/// of the symmetric normalized Laplacian.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
    preclamp_violations: usize,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector columns u_i matching `eigenvalues()`.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Count of eigenvalues that fell outside [0, 2] by more than 1e-6
    /// before being clamped. Anything nonzero points at a solver problem.
    pub fn preclamp_violations(&self) -> usize {
        self.preclamp_violations
    }

    /// Multiplicity of the zero eigenvalue (tolerance 1e-8); equals the
    /// number of connected components.
    pub fn zero_multiplicity(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v < 1e-8).count()
    }

    /// Test/synthetic constructor; callers are responsible for coherence.
    pub fn from_parts(eigenvalues: Array1<f64>, eigenvectors: Array2<f64>) -> Self {
        Self {
            eigenvalues,
            eigenvectors,
            preclamp_violations: 0,
        }
    }
}

/// Full symmetric eigendecomposition of tilde_L with a fixed sign
/// convention (first component of each eigenvector above 1e-12 in
/// magnitude is made positive) so repeated runs agree bit for bit.
pub fn eigendecompose(ops: &NormalizedOperators) -> Result<SpectralDecomposition> {
    let eig = sym_eigen(&ops.tilde_l)?;
    let n = eig.values.len();
    let mut eigenvalues = eig.values;
    let mut eigenvectors = eig.vectors;

    let mut preclamp_violations = 0;
    for v in eigenvalues.iter_mut() {
        if *v < -1e-6 || *v > 2.0 + 1e-6 {
            preclamp_violations += 1;
        }
        *v = v.clamp(0.0, 2.0);
    }

    for c in 0..n {
        let mut sign = 0.0;
        for r in 0..n {
            let v = eigenvectors[[r, c]];
            if v.abs() > 1e-12 {
                sign = v.signum();
                break;
            }
        }
        if sign < 0.0 {
            for r in 0..n {
                eigenvectors[[r, c]] = -eigenvectors[[r, c]];
            }
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        preclamp_violations,
    })
}
