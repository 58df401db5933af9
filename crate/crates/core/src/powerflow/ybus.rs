use num_complex::Complex;
use thiserror::Error;

use crate::network::{BusId, PerUnitBranch};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmittanceError {
    #[error("branch {from}-{to} has zero series impedance")]
    SingularBranch { from: BusId, to: BusId },
    #[error("branch {from}-{to} references bus position outside 0..{n}")]
    BusOutOfRange { from: BusId, to: BusId, n: usize },
}

/// Nodal admittance matrix stored row-wise; each row holds its diagonal and
/// the columns of directly connected buses, sorted by column.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix<T> {
    rows: Vec<Vec<(usize, Complex<T>)>>,
}

impl<T: Scalar> AdmittanceMatrix<T> {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex<T>)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|pos| self.rows[i][pos].1)
            .unwrap_or_else(|_| Complex::new(T::zero(), T::zero()))
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Buses sharing an off-diagonal entry with `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i]
            .iter()
            .map(|&(c, _)| c)
            .filter(move |&c| c != i)
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        let n = self.n();
        let mut dense = vec![vec![Complex::new(T::zero(), T::zero()); n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, y) in row {
                dense[i][j] = y;
            }
        }
        dense
    }

    /// Bus current injections `I = Y V`.
    pub fn multiply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .fold(Complex::new(T::zero(), T::zero()), |acc, &(j, y)| {
                        acc + y * v[j]
                    })
            })
            .collect()
    }
}

/// Stamps series branches into an `n`-bus admittance matrix. Each branch
/// contributes `y/a²` at (f,f), `y` at (t,t) and `-y/a` off-diagonal, with
/// `y = 1/(r + jx)` and `a` the from-side tap.
pub fn build_admittance<T: Scalar>(
    branches: &[PerUnitBranch<T>],
    n: usize,
) -> Result<AdmittanceMatrix<T>, AdmittanceError> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut rows: Vec<Vec<(usize, Complex<T>)>> = (0..n).map(|i| vec![(i, zero)]).collect();
    let add = |rows: &mut Vec<Vec<(usize, Complex<T>)>>, i: usize, j: usize, y: Complex<T>| {
        let row = &mut rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => row[pos].1 = row[pos].1 + y,
            Err(pos) => row.insert(pos, (j, y)),
        }
    };
    for b in branches {
        if b.from >= n || b.to >= n {
            return Err(AdmittanceError::BusOutOfRange {
                from: b.from_bus.clone(),
                to: b.to_bus.clone(),
                n,
            });
        }
        if b.r_pu == T::zero() && b.x_pu == T::zero() {
            return Err(AdmittanceError::SingularBranch {
                from: b.from_bus.clone(),
                to: b.to_bus.clone(),
            });
        }
        let y = Complex::new(T::one(), T::zero()) / Complex::new(b.r_pu, b.x_pu);
        let a = b.tap;
        add(&mut rows, b.from, b.from, y / (a * a));
        add(&mut rows, b.to, b.to, y);
        add(&mut rows, b.from, b.to, -y / a);
        add(&mut rows, b.to, b.from, -y / a);
    }
    Ok(AdmittanceMatrix { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BranchKind;

    pub(crate) fn branch(from: usize, to: usize, r: f64, x: f64) -> PerUnitBranch<f64> {
        PerUnitBranch {
            kind: BranchKind::Cable,
            from_bus: BusId::new(from.to_string()),
            to_bus: BusId::new(to.to_string()),
            from,
            to,
            r_pu: r,
            x_pu: x,
            tap: 1.0,
            flow_limit_pu: None,
        }
    }

    fn close(a: Complex<f64>, b: Complex<f64>) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn single_reactive_branch() {
        let y = build_admittance(&[branch(0, 1, 0.0, 0.1)], 2).unwrap();
        assert!(close(y.get(0, 0), Complex::new(0.0, -10.0)));
        assert!(close(y.get(0, 1), Complex::new(0.0, 10.0)));
        assert!(close(y.get(1, 0), Complex::new(0.0, 10.0)));
        assert!(close(y.get(1, 1), Complex::new(0.0, -10.0)));
    }

    #[test]
    fn empty_branch_list_is_zero() {
        let y = build_admittance::<f64>(&[], 3).unwrap();
        for row in y.to_dense() {
            assert!(row.iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn triangle_stamping() {
        let z = (0.02, 0.08);
        let y = build_admittance(
            &[
                branch(0, 1, z.0, z.1),
                branch(1, 2, z.0, z.1),
                branch(0, 2, z.0, z.1),
            ],
            3,
        )
        .unwrap();
        let yb = Complex::new(1.0, 0.0) / Complex::new(z.0, z.1);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { yb * 2.0 } else { -yb };
                assert!(close(y.get(i, j), expected));
            }
        }
    }

    #[test]
    fn zero_impedance_rejected() {
        assert!(matches!(
            build_admittance(&[branch(0, 1, 0.0, 0.0)], 2),
            Err(AdmittanceError::SingularBranch { .. })
        ));
    }

    #[test]
    fn symmetric_rows_sum_to_zero_without_taps() {
        let y = build_admittance(
            &[
                branch(0, 1, 0.01, 0.05),
                branch(1, 2, 0.03, 0.02),
                branch(1, 3, 0.0, 0.2),
            ],
            4,
        )
        .unwrap();
        for i in 0..4 {
            let sum = y
                .row(i)
                .iter()
                .fold(Complex::new(0.0, 0.0), |acc, &(_, v)| acc + v);
            assert!(sum.norm() < 1e-12);
            for j in 0..4 {
                assert_eq!(y.get(i, j), y.get(j, i));
            }
        }
    }

    #[test]
    fn tap_applied_on_from_side() {
        let mut b = branch(0, 1, 0.0, 0.1);
        b.tap = 1.05;
        let y = build_admittance(&[b], 2).unwrap();
        let yb = Complex::new(0.0, -10.0);
        assert!(close(y.get(0, 0), yb / (1.05 * 1.05)));
        assert!(close(y.get(1, 1), yb));
        assert!(close(y.get(0, 1), -yb / 1.05));
    }
}
