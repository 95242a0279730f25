//! Communication graphs and doubly stochastic gossip matrices.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::format_sig17;
use crate::scalar::Scalar;

/// Row/column sum tolerance for doubly stochastic checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Largest `N` for which [`spectral_lambda`] uses a dense eigendecomposition.
pub const DENSE_EIG_MAX_N: usize = 512;
pub const POWER_MAX_ITERS: usize = 1000;
pub const POWER_TOL: f64 = 1e-10;

/// Undirected, connected communication graph. Self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from undirected edges; `(i, j)` and `(j, i)` are the
    /// same edge. Rejects self-loops, out-of-range endpoints and
    /// disconnected graphs.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidTopology(
                "graph needs at least one node".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidTopology(format!("self-loop at node {i}")));
            }
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidTopology(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let g = Self {
            n_nodes,
            edges: set,
        };
        if !g.is_connected() {
            return Err(Error::InvalidTopology("graph is not connected".into()));
        }
        Ok(g)
    }

    /// Ring where node `i` talks to `i - 1` and `i + 1` (mod `n`).
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidTopology(format!(
                "ring needs n >= 3, got {n}"
            )));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidTopology(format!(
                "complete graph needs n >= 2, got {n}"
            )));
        }
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == i, b == i) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Symmetric doubly stochastic gossip matrix with its cached `lambda = ||W - Q||`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix<T> {
    n: usize,
    w: Vec<T>,
    lambda: T,
}

impl<T: Scalar> MixingMatrix<T> {
    /// Metropolis-Hastings weights: `w_ij = 1 / (max(deg_i, deg_j) + 1)` on
    /// edges, the diagonal absorbs the remainder of each row.
    pub fn metropolis_hastings(g: &Graph) -> Result<Self> {
        if !g.is_connected() {
            return Err(Error::InvalidTopology("graph is not connected".into()));
        }
        let n = g.n_nodes();
        let deg = g.degrees();
        let mut w = vec![T::zero(); n * n];
        for (i, j) in g.edges() {
            let wij = T::one() / T::from_usize(deg[i].max(deg[j]) + 1).unwrap();
            w[i * n + j] = wij;
            w[j * n + i] = wij;
        }
        for i in 0..n {
            let off: T = (0..n).filter(|&j| j != i).map(|j| w[i * n + j]).sum();
            w[i * n + i] = T::one() - off;
        }
        Self::from_dense(n, w, Some(g))
    }

    /// `Q = (1/n) 1 1^T`, one-shot exact averaging.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("uniform matrix needs n >= 1".into()));
        }
        let q = T::one() / T::from_usize(n).unwrap();
        Ok(Self {
            n,
            w: vec![q; n * n],
            lambda: T::zero(),
        })
    }

    /// Validates an arbitrary row-major matrix. When `graph` is given, the
    /// sparsity pattern must respect it.
    pub fn from_dense(n: usize, w: Vec<T>, graph: Option<&Graph>) -> Result<Self> {
        if w.len() != n * n || n == 0 {
            return Err(Error::ContractViolation(format!(
                "expected {n}x{n} weights, got {} entries",
                w.len()
            )));
        }
        check_doubly_stochastic(n, &w)?;
        if let Some(g) = graph {
            if g.n_nodes() != n {
                return Err(Error::ContractViolation(format!(
                    "graph has {} nodes, matrix has {n}",
                    g.n_nodes()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && w[i * n + j] > T::zero() && !g.has_edge(i, j) {
                        return Err(Error::ContractViolation(format!(
                            "positive weight on non-edge ({i}, {j})"
                        )));
                    }
                }
            }
        }
        let lambda = spectral_lambda(n, &w)?;
        if lambda >= T::one() - stochastic_tol::<T>(n) {
            return Err(Error::InvalidTopology(format!(
                "lambda = {lambda} >= 1: the gossip graph is not connected"
            )));
        }
        Ok(Self { n, w, lambda })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.w[i * self.n + j]
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        check_doubly_stochastic(self.n, &self.w).is_ok()
    }

    /// One gossip round on per-node vectors: `out_i = sum_j w_ij x_j`.
    pub fn mix(&self, cols: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        if cols.len() != self.n {
            return Err(Error::ContractViolation(format!(
                "mixing {} vectors with a {}x{} matrix",
                cols.len(),
                self.n,
                self.n
            )));
        }
        Ok(linalg::mix_columns(&self.w, cols))
    }

    /// `N` lines of `N` comma-separated values with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| format_sig17(self.weight(i, j).as_f64()))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `1e-12`, widened to a few ulps per summand for low-precision scalars.
fn stochastic_tol<T: Scalar>(n: usize) -> T {
    T::lit(STOCHASTIC_TOL).max(T::epsilon() * T::from_usize(4 * n).unwrap())
}

fn check_doubly_stochastic<T: Scalar>(n: usize, w: &[T]) -> Result<()> {
    let tol = stochastic_tol::<T>(n);
    for i in 0..n {
        let mut row = T::zero();
        let mut col = T::zero();
        for j in 0..n {
            let v = w[i * n + j];
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::ContractViolation(format!(
                    "weight ({i}, {j}) = {v} outside [0, 1]"
                )));
            }
            row += v;
            col += w[j * n + i];
        }
        if (row - T::one()).abs() > tol {
            return Err(Error::ContractViolation(format!("row {i} sums to {row}")));
        }
        if (col - T::one()).abs() > tol {
            return Err(Error::ContractViolation(format!(
                "column {i} sums to {col}"
            )));
        }
    }
    Ok(())
}

fn check_symmetric<T: Scalar>(n: usize, w: &[T]) -> Result<()> {
    for i in 0..n {
        for j in i + 1..n {
            if w[i * n + j] != w[j * n + i] {
                return Err(Error::ContractViolation(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// `||W - Q||_2` for a symmetric doubly stochastic `W`: dense eigenvalues for
/// `n <= 512`, power iteration otherwise.
pub fn spectral_lambda<T: Scalar>(n: usize, w: &[T]) -> Result<T> {
    if w.len() != n * n {
        return Err(Error::ContractViolation("weights are not n x n".into()));
    }
    check_symmetric(n, w)?;
    if n <= DENSE_EIG_MAX_N {
        Ok(spectral_lambda_dense(n, w))
    } else {
        Ok(spectral_lambda_power(
            n,
            w,
            POWER_MAX_ITERS,
            T::lit(POWER_TOL),
        ))
    }
}

pub fn spectral_lambda_dense<T: Scalar>(n: usize, w: &[T]) -> T {
    let q = T::one() / T::from_usize(n).unwrap();
    let centered: Vec<T> = w.iter().map(|&v| v - q).collect();
    T::symmetric_eigenvalues(&centered, n)
        .into_iter()
        .fold(T::zero(), |m, e| m.max(e.abs()))
}

/// Power iteration on `W - Q`, keeping the iterate orthogonal to `1`.
/// Returns `||(W - Q) v||` for the converged unit vector `v`.
pub fn spectral_lambda_power<T: Scalar>(n: usize, w: &[T], max_iters: usize, tol: T) -> T {
    // Fixed, non-symmetric start so no eigenvector is missed by construction.
    let mut v: Vec<T> = (0..n)
        .map(|k| T::lit(((k as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5))
        .collect();
    let deflate = |v: &mut Vec<T>| {
        let m = v.iter().copied().sum::<T>() / T::from_usize(n).unwrap();
        for x in v.iter_mut() {
            *x -= m;
        }
    };
    deflate(&mut v);
    let norm = linalg::norm_sq(&v).sqrt();
    if norm <= T::lit(1e-300) {
        return T::zero();
    }
    linalg::scale_in_place(T::one() / norm, &mut v);

    let mut estimate = T::zero();
    for _ in 0..max_iters {
        let mut u: Vec<T> = (0..n)
            .map(|i| linalg::dot(&w[i * n..(i + 1) * n], &v))
            .collect();
        deflate(&mut u);
        let next = linalg::norm_sq(&u).sqrt();
        if next <= T::lit(1e-300) {
            return T::zero();
        }
        linalg::scale_in_place(T::one() / next, &mut u);
        v = u;
        let done = (next - estimate).abs() <= tol;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}
