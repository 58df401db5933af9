use num_complex::Complex;

use super::newton::{calculated_injections, BusState, InjectionSet};
use super::ybus::AdmittanceMatrix;
use crate::network::PerUnitBranch;
use crate::scalar::Scalar;

/// Complex power entering a branch at each end, in MW/MVAr. Loss is the sum
/// of both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchFlow<T> {
    pub from_p_mw: T,
    pub from_q_mvar: T,
    pub to_p_mw: T,
    pub to_q_mvar: T,
    pub loss_p_mw: T,
    pub loss_q_mvar: T,
}

impl<T: Scalar> BranchFlow<T> {
    /// Larger of the two end apparent powers, MVA.
    pub fn apparent_mva(&self) -> T {
        let from = self.from_p_mw.hypot(self.from_q_mvar);
        let to = self.to_p_mw.hypot(self.to_q_mvar);
        from.max(to)
    }
}

/// End flows of every branch for a voltage state.
pub fn branch_flows<T: Scalar>(
    v_mag: &[T],
    v_ang: &[T],
    branches: &[PerUnitBranch<T>],
    s_base_mva: T,
) -> Vec<BranchFlow<T>> {
    branches
        .iter()
        .map(|b| {
            let vf = Complex::from_polar(v_mag[b.from], v_ang[b.from]);
            let vt = Complex::from_polar(v_mag[b.to], v_ang[b.to]);
            let y = Complex::new(T::one(), T::zero()) / Complex::new(b.r_pu, b.x_pu);
            let a = b.tap;
            let i_from = (vf / a - vt) * y / a;
            let i_to = (vt - vf / a) * y;
            let s_from = vf * i_from.conj() * s_base_mva;
            let s_to = vt * i_to.conj() * s_base_mva;
            BranchFlow {
                from_p_mw: s_from.re,
                from_q_mvar: s_from.im,
                to_p_mw: s_to.re,
                to_q_mvar: s_to.im,
                loss_p_mw: s_from.re + s_to.re,
                loss_q_mvar: s_from.im + s_to.im,
            }
        })
        .collect()
}

/// Converged voltages together with derived branch flows and slack injection.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerFlowSolution<T> {
    pub v_mag: Vec<T>,
    pub v_ang: Vec<T>,
    pub branch_flows: Vec<BranchFlow<T>>,
    pub slack_p_mw: T,
    pub slack_q_mvar: T,
    pub iterations: usize,
    pub max_mismatch_pu: T,
}

impl<T: Scalar> PowerFlowSolution<T> {
    pub fn from_state(
        state: BusState<T>,
        ybus: &AdmittanceMatrix<T>,
        branches: &[PerUnitBranch<T>],
        injections: &InjectionSet<T>,
        s_base_mva: T,
    ) -> Self {
        let flows = branch_flows(&state.v_mag, &state.v_ang, branches, s_base_mva);
        let (p, q) = calculated_injections(ybus, &state.v_mag, &state.v_ang);
        PowerFlowSolution {
            slack_p_mw: p[injections.slack] * s_base_mva,
            slack_q_mvar: q[injections.slack] * s_base_mva,
            branch_flows: flows,
            iterations: state.iterations,
            max_mismatch_pu: state.max_mismatch_pu,
            v_mag: state.v_mag,
            v_ang: state.v_ang,
        }
    }

    pub fn total_loss_mw(&self) -> T {
        self.branch_flows.iter().map(|f| f.loss_p_mw).sum()
    }

    pub fn total_loss_mvar(&self) -> T {
        self.branch_flows.iter().map(|f| f.loss_q_mvar).sum()
    }
}
