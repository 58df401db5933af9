//! Polar-form Newton-Raphson power flow.

use num_complex::Complex;
use thiserror::Error;

use super::linear::{minimum_degree_order, DenseLu, LinearSolver, SparseLu, SparseMatrix};
use super::ybus::AdmittanceMatrix;
use crate::scalar::Scalar;

/// Specified bus injections in per-unit; consumption is negative. The slack
/// entry of `p`/`q` is ignored and its voltage setpoint used instead.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectionSet<T> {
    pub slack: usize,
    /// Slack voltage magnitude (pu) and angle (rad).
    pub slack_voltage: (T, T),
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Scalar> InjectionSet<T> {
    /// Zero injections with the slack held at 1.0 pu, 0 rad.
    pub fn zeros(n: usize, slack: usize) -> Self {
        InjectionSet {
            slack,
            slack_voltage: (T::one(), T::zero()),
            p: vec![T::zero(); n],
            q: vec![T::zero(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoltageProfile<T> {
    pub v_mag: Vec<T>,
    pub v_ang: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StartMode<T> {
    Flat,
    Warm(VoltageProfile<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions<T> {
    /// Largest acceptable |ΔP| or |ΔQ| in per-unit.
    pub tolerance_pu: T,
    pub max_iterations: usize,
    pub start: StartMode<T>,
    /// Keep every bus's mismatch per iteration, for the debug trace dump.
    pub record_trace: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tolerance_pu: T::lit(1e-8),
            max_iterations: 50,
            start: StartMode::Flat,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace<T> {
    pub iteration: usize,
    pub max_mismatch: T,
    pub worst_bus: usize,
    /// Per-bus mismatches; empty unless `record_trace` was set.
    pub dp: Vec<T>,
    pub dq: Vec<T>,
}

/// Converged voltage state of one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct BusState<T> {
    pub v_mag: Vec<T>,
    pub v_ang: Vec<T>,
    pub iterations: usize,
    pub max_mismatch_pu: T,
    pub trace: Vec<IterationTrace<T>>,
}

impl<T: Scalar> BusState<T> {
    pub fn voltages(&self) -> VoltageProfile<T> {
        VoltageProfile {
            v_mag: self.v_mag.clone(),
            v_ang: self.v_ang.clone(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError<T: Scalar> {
    #[error("no convergence after {iterations} iterations; worst mismatch {worst_mismatch} pu at bus position {worst_bus}")]
    NonConvergence {
        iterations: usize,
        worst_bus: usize,
        worst_mismatch: T,
        trace: Vec<IterationTrace<T>>,
    },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("invalid solve input: {0}")]
    InvalidInput(String),
}

/// Per-bus specified-minus-computed injections; slack entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch<T> {
    pub dp: Vec<T>,
    pub dq: Vec<T>,
}

impl<T: Scalar> Mismatch<T> {
    /// Largest absolute entry and the bus holding it.
    pub fn worst(&self) -> (T, usize) {
        let mut best = (T::zero(), 0);
        for (i, (p, q)) in self.dp.iter().zip(&self.dq).enumerate() {
            let m = p.abs().max(q.abs());
            if m > best.0 || m.is_nan() {
                best = (m, i);
            }
        }
        best
    }
}

/// Computed bus injections `S = V · conj(Y V)` in per-unit.
pub fn calculated_injections<T: Scalar>(
    ybus: &AdmittanceMatrix<T>,
    v_mag: &[T],
    v_ang: &[T],
) -> (Vec<T>, Vec<T>) {
    let v: Vec<Complex<T>> = v_mag
        .iter()
        .zip(v_ang)
        .map(|(&m, &a)| Complex::from_polar(m, a))
        .collect();
    let current = ybus.multiply(&v);
    v.iter()
        .zip(&current)
        .map(|(v, i)| {
            let s = v * i.conj();
            (s.re, s.im)
        })
        .unzip()
}

pub fn mismatch<T: Scalar>(
    ybus: &AdmittanceMatrix<T>,
    v_mag: &[T],
    v_ang: &[T],
    injections: &InjectionSet<T>,
) -> Mismatch<T> {
    let (p, q) = calculated_injections(ybus, v_mag, v_ang);
    mismatch_from(&p, &q, injections)
}

fn mismatch_from<T: Scalar>(p: &[T], q: &[T], injections: &InjectionSet<T>) -> Mismatch<T> {
    let n = p.len();
    let mut dp = vec![T::zero(); n];
    let mut dq = vec![T::zero(); n];
    for i in (0..n).filter(|&i| i != injections.slack) {
        dp[i] = injections.p[i] - p[i];
        dq[i] = injections.q[i] - q[i];
    }
    Mismatch { dp, dq }
}

/// Placement of unknowns in the Newton system: each non-slack bus owns an
/// angle column and a magnitude column (and the matching P and Q rows),
/// laid out in a fill-reducing bus order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JacobianLayout {
    pub theta: Vec<Option<usize>>,
    pub vmag: Vec<Option<usize>>,
}

impl JacobianLayout {
    /// Unknowns in natural bus order.
    pub fn natural(n: usize, slack: usize) -> Self {
        Self::from_order(n, (0..n).filter(|&i| i != slack))
    }

    /// Unknowns in minimum-degree order of the network graph.
    pub fn minimum_degree<T: Scalar>(ybus: &AdmittanceMatrix<T>, slack: usize) -> Self {
        let n = ybus.n();
        let buses: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &b) in buses.iter().enumerate() {
            local[b] = k;
        }
        let adjacency: Vec<Vec<usize>> = buses
            .iter()
            .map(|&b| {
                ybus.neighbors(b)
                    .filter(|&j| j != slack)
                    .map(|j| local[j])
                    .collect()
            })
            .collect();
        let order = minimum_degree_order(&adjacency);
        Self::from_order(n, order.into_iter().map(|k| buses[k]))
    }

    fn from_order(n: usize, order: impl Iterator<Item = usize>) -> Self {
        let mut theta = vec![None; n];
        let mut vmag = vec![None; n];
        for (k, bus) in order.enumerate() {
            theta[bus] = Some(2 * k);
            vmag[bus] = Some(2 * k + 1);
        }
        JacobianLayout { theta, vmag }
    }

    pub fn size(&self) -> usize {
        2 * self.theta.iter().filter(|t| t.is_some()).count()
    }
}

/// Jacobian of the computed injections (P rows, Q rows) with respect to
/// bus angles and magnitudes, placed according to `layout`.
pub fn jacobian<T: Scalar>(
    ybus: &AdmittanceMatrix<T>,
    v_mag: &[T],
    v_ang: &[T],
    layout: &JacobianLayout,
) -> SparseMatrix<T> {
    let (p, q) = calculated_injections(ybus, v_mag, v_ang);
    jacobian_with(ybus, v_mag, v_ang, &p, &q, layout)
}

fn jacobian_with<T: Scalar>(
    ybus: &AdmittanceMatrix<T>,
    v_mag: &[T],
    v_ang: &[T],
    p: &[T],
    q: &[T],
    layout: &JacobianLayout,
) -> SparseMatrix<T> {
    let mut jac = SparseMatrix::with_capacity(layout.size(), 4 * ybus.nnz());
    for i in 0..ybus.n() {
        let (Some(row_p), Some(row_q)) = (layout.theta[i], layout.vmag[i]) else {
            continue;
        };
        let vi = v_mag[i];
        for &(k, y) in ybus.row(i) {
            let (g, b) = (y.re, y.im);
            if k == i {
                jac.push(row_p, row_p, -q[i] - b * vi * vi);
                jac.push(row_p, row_q, p[i] / vi + g * vi);
                jac.push(row_q, row_p, p[i] - g * vi * vi);
                jac.push(row_q, row_q, q[i] / vi - b * vi);
                continue;
            }
            let (Some(col_t), Some(col_v)) = (layout.theta[k], layout.vmag[k]) else {
                continue;
            };
            let vk = v_mag[k];
            let (sin, cos) = (v_ang[i] - v_ang[k]).sin_cos();
            let a = g * sin - b * cos;
            let c = g * cos + b * sin;
            jac.push(row_p, col_t, vi * vk * a);
            jac.push(row_p, col_v, vi * c);
            jac.push(row_q, col_t, -vi * vk * c);
            jac.push(row_q, col_v, vi * a);
        }
    }
    jac
}

/// A power flow solver honoring the solve contract: on success every non-slack
/// bus matches its specified injection to `tolerance_pu`.
pub trait PowerFlowBackend<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        ybus: &AdmittanceMatrix<T>,
        injections: &InjectionSet<T>,
        options: &SolverOptions<T>,
    ) -> Result<BusState<T>, SolveError<T>>;
}

/// Full Newton-Raphson with a pluggable linear solver.
#[derive(Clone, Debug, Default)]
pub struct NewtonRaphson<L = SparseLu> {
    linear: L,
}

impl NewtonRaphson<SparseLu> {
    pub fn new() -> Self {
        NewtonRaphson {
            linear: SparseLu::default(),
        }
    }
}

impl NewtonRaphson<DenseLu> {
    pub fn dense() -> Self {
        NewtonRaphson { linear: DenseLu }
    }
}

impl<L> NewtonRaphson<L> {
    pub fn with_solver(linear: L) -> Self {
        NewtonRaphson { linear }
    }
}

fn check_inputs<T: Scalar>(
    ybus: &AdmittanceMatrix<T>,
    injections: &InjectionSet<T>,
    options: &SolverOptions<T>,
) -> Result<(), SolveError<T>> {
    let n = ybus.n();
    if injections.p.len() != n || injections.q.len() != n {
        return Err(SolveError::InvalidInput(format!(
            "{} buses but {}/{} injections",
            n,
            injections.p.len(),
            injections.q.len()
        )));
    }
    if injections.slack >= n {
        return Err(SolveError::InvalidInput(
            "slack position out of range".into(),
        ));
    }
    if !injections
        .p
        .iter()
        .chain(&injections.q)
        .all(|v| v.is_finite())
    {
        return Err(SolveError::InvalidInput("non-finite injection".into()));
    }
    if !(options.tolerance_pu > T::zero()) || options.max_iterations == 0 {
        return Err(SolveError::InvalidInput(
            "tolerance must be > 0 and max_iterations >= 1".into(),
        ));
    }
    if let StartMode::Warm(v) = &options.start {
        if v.v_mag.len() != n || v.v_ang.len() != n {
            return Err(SolveError::InvalidInput(
                "warm start has wrong length".into(),
            ));
        }
    }
    Ok(())
}

impl<T: Scalar, L: LinearSolver<T>> PowerFlowBackend<T> for NewtonRaphson<L> {
    fn name(&self) -> &'static str {
        "newton-raphson"
    }

    fn solve(
        &self,
        ybus: &AdmittanceMatrix<T>,
        injections: &InjectionSet<T>,
        options: &SolverOptions<T>,
    ) -> Result<BusState<T>, SolveError<T>> {
        check_inputs(ybus, injections, options)?;
        let n = ybus.n();
        let slack = injections.slack;
        let (mut v_mag, mut v_ang) = match &options.start {
            StartMode::Flat => (vec![T::one(); n], vec![T::zero(); n]),
            StartMode::Warm(v) => (v.v_mag.clone(), v.v_ang.clone()),
        };
        (v_mag[slack], v_ang[slack]) = injections.slack_voltage;
        let layout = JacobianLayout::minimum_degree(ybus, slack);
        let mut trace = Vec::new();

        for iteration in 0..=options.max_iterations {
            let (p, q) = calculated_injections(ybus, &v_mag, &v_ang);
            let mis = mismatch_from(&p, &q, injections);
            let (worst, worst_bus) = mis.worst();
            let finite = worst.is_finite();
            trace.push(IterationTrace {
                iteration,
                max_mismatch: worst,
                worst_bus,
                dp: if options.record_trace {
                    mis.dp.clone()
                } else {
                    Vec::new()
                },
                dq: if options.record_trace {
                    mis.dq.clone()
                } else {
                    Vec::new()
                },
            });
            if finite && worst <= options.tolerance_pu {
                return Ok(BusState {
                    v_mag,
                    v_ang,
                    iterations: iteration,
                    max_mismatch_pu: worst,
                    trace,
                });
            }
            if !finite || iteration == options.max_iterations {
                return Err(SolveError::NonConvergence {
                    iterations: iteration,
                    worst_bus,
                    worst_mismatch: worst,
                    trace,
                });
            }

            let jac = jacobian_with(ybus, &v_mag, &v_ang, &p, &q, &layout);
            let mut rhs = vec![T::zero(); layout.size()];
            for i in (0..n).filter(|&i| i != slack) {
                rhs[layout.theta[i].unwrap()] = mis.dp[i];
                rhs[layout.vmag[i].unwrap()] = mis.dq[i];
            }
            let step = self
                .linear
                .solve(&jac, &rhs)
                .map_err(|_| SolveError::SingularJacobian {
                    iteration: iteration + 1,
                })?;
            for i in (0..n).filter(|&i| i != slack) {
                v_ang[i] = v_ang[i] + step[layout.theta[i].unwrap()];
                v_mag[i] = v_mag[i] + step[layout.vmag[i].unwrap()];
            }
        }
        unreachable!("loop returns on the final iteration")
    }
}

/// Solves with the default sparse Newton-Raphson backend.
pub fn solve<T: Scalar>(
    ybus: &AdmittanceMatrix<T>,
    injections: &InjectionSet<T>,
    options: &SolverOptions<T>,
) -> Result<BusState<T>, SolveError<T>> {
    NewtonRaphson::new().solve(ybus, injections, options)
}

/// Writes a mismatch trace as `iteration,bus_id,dp_pu,dq_pu`.
pub fn write_trace_csv<T: Scalar, W: std::io::Write>(
    trace: &[IterationTrace<T>],
    bus_ids: &[String],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "iteration,bus_id,dp_pu,dq_pu")?;
    for it in trace {
        for (i, (dp, dq)) in it.dp.iter().zip(&it.dq).enumerate() {
            writeln!(out, "{},{},{},{}", it.iteration, bus_ids[i], dp, dq)?;
        }
    }
    Ok(())
}
