//! Linear solves for the Newton step.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::Scalar;

/// Square matrix in triplet form; duplicate entries are summed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn new(n: usize) -> Self {
        SparseMatrix {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        SparseMatrix {
            n,
            entries: Vec::with_capacity(nnz),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::zero(); self.n]; self.n];
        for &(i, j, v) in &self.entries {
            dense[i][j] = dense[i][j] + v;
        }
        dense
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("matrix is singular at elimination step {step}")]
pub struct SingularMatrix {
    pub step: usize,
}

/// Solves `A x = b`. Implementations must be deterministic.
pub trait LinearSolver<T>: Send + Sync {
    fn solve(&self, a: &SparseMatrix<T>, b: &[T]) -> Result<Vec<T>, SingularMatrix>;
}

/// Dense LU with partial pivoting. Zero multipliers are skipped, so banded
/// and block-structured systems stay cheap.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseLu;

impl<T: Scalar> LinearSolver<T> for DenseLu {
    fn solve(&self, a: &SparseMatrix<T>, b: &[T]) -> Result<Vec<T>, SingularMatrix> {
        let n = a.n();
        let mut m = a.to_dense();
        let mut x = b.to_vec();
        for k in 0..n {
            let (pivot_row, pivot_abs) =
                (k..n)
                    .map(|i| (i, m[i][k].abs()))
                    .fold(
                        (k, T::zero()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_abs == T::zero() || !pivot_abs.is_finite() {
                return Err(SingularMatrix { step: k });
            }
            m.swap(k, pivot_row);
            x.swap(k, pivot_row);
            let (upper, lower) = m.split_at_mut(k + 1);
            let pivot = &upper[k];
            for (offset, row) in lower.iter_mut().enumerate() {
                let factor = row[k] / pivot[k];
                if factor == T::zero() {
                    continue;
                }
                row[k] = T::zero();
                for j in k + 1..n {
                    if pivot[j] != T::zero() {
                        row[j] = row[j] - factor * pivot[j];
                    }
                }
                x[k + 1 + offset] = x[k + 1 + offset] - factor * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - m[i][j] * x[j];
            }
            x[i] = acc / m[i][i];
        }
        Ok(x)
    }
}

/// Sparse LU without row exchanges, eliminating in index order.
///
/// The structure is symmetrized before factoring, so fill stays symmetric and
/// the rows to update at step k are exactly the upper columns of row k. Callers
/// choose a fill-reducing index order (see [`minimum_degree_order`]). When a
/// pivot falls below `pivot_tolerance` times its row's largest magnitude the
/// solve falls back to [`DenseLu`].
#[derive(Clone, Copy, Debug)]
pub struct SparseLu {
    pub pivot_tolerance: f64,
}

impl Default for SparseLu {
    fn default() -> Self {
        SparseLu {
            pivot_tolerance: 1e-8,
        }
    }
}

impl SparseLu {
    fn factor_solve<T: Scalar>(&self, a: &SparseMatrix<T>, b: &[T]) -> Option<Vec<T>> {
        let n = a.n();
        let mut rows: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); n];
        for &(i, j, v) in a.entries() {
            let slot = rows[i].entry(j).or_insert(T::zero());
            *slot = *slot + v;
            rows[j].entry(i).or_insert(T::zero());
        }
        let tol = T::lit(self.pivot_tolerance);
        let mut lower: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for k in 0..n {
            let pivot = *rows[k].get(&k)?;
            let row_max = rows[k].values().fold(T::zero(), |m, v| m.max(v.abs()));
            if !pivot.is_finite() || pivot.abs() <= tol * row_max || pivot == T::zero() {
                return None;
            }
            let upper: Vec<(usize, T)> = rows[k].range(k + 1..).map(|(&j, &v)| (j, v)).collect();
            for &(i, _) in &upper {
                let Some(a_ik) = rows[i].remove(&k) else {
                    continue;
                };
                let factor = a_ik / pivot;
                lower[i].push((k, factor));
                // Fill is inserted even for zero multipliers to keep the structure symmetric.
                for &(j, u) in &upper {
                    let slot = rows[i].entry(j).or_insert(T::zero());
                    *slot = *slot - factor * u;
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for &(k, l) in &lower[i] {
                y[i] = y[i] - l * y[k];
            }
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for (&j, &u) in rows[i].range(i + 1..) {
                acc = acc - u * y[j];
            }
            y[i] = acc / rows[i][&i];
        }
        y.iter().all(|v| v.is_finite()).then_some(y)
    }
}

impl<T: Scalar> LinearSolver<T> for SparseLu {
    fn solve(&self, a: &SparseMatrix<T>, b: &[T]) -> Result<Vec<T>, SingularMatrix> {
        match self.factor_solve(a, b) {
            Some(x) => Ok(x),
            None => DenseLu.solve(a, b),
        }
    }
}

/// Greedy minimum-degree elimination order of an undirected graph given as
/// adjacency lists. Ties go to the lowest node index.
pub fn minimum_degree_order(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut graph: Vec<std::collections::BTreeSet<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(i, nbrs)| nbrs.iter().copied().filter(|&j| j != i).collect())
        .collect();
    for i in 0..n {
        for j in graph[i].clone() {
            graph[j].insert(i);
        }
    }
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let node = (0..n)
            .filter(|&i| !eliminated[i])
            .min_by_key(|&i| (graph[i].len(), i))
            .expect("remaining node");
        eliminated[node] = true;
        order.push(node);
        let nbrs: Vec<usize> = std::mem::take(&mut graph[node]).into_iter().collect();
        for &a in &nbrs {
            graph[a].remove(&node);
            for &b in &nbrs {
                if a != b {
                    graph[a].insert(b);
                }
            }
        }
    }
    order
}
