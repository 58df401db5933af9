use thiserror::Error;

use super::model::{cable_impedance, BusId, NetworkModel};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    Cable,
    Transformer,
}

/// Series branch in per-unit on the system MVA base.
///
/// For cables `flow_limit_pu` bounds real power; for transformers it is the
/// nameplate rating and bounds apparent power.
#[derive(Clone, Debug, PartialEq)]
pub struct PerUnitBranch<T> {
    pub kind: BranchKind,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Positions of the endpoints in the network's bus ordering.
    pub from: usize,
    pub to: usize,
    pub r_pu: T,
    pub x_pu: T,
    /// Off-nominal turns ratio on the from side; 1 for cables.
    pub tap: T,
    pub flow_limit_pu: Option<T>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("cable {from}-{to} spans {from_kv} kV and {to_kv} kV without a transformer")]
    VoltageLevel {
        from: BusId,
        to: BusId,
        from_kv: f64,
        to_kv: f64,
    },
    #[error("branch references unknown bus {0}")]
    UnknownBus(BusId),
}

/// Impedance base in ohms for a voltage level: kV² / MVA.
pub fn impedance_base_ohms<T: Scalar>(nominal_kv: T, s_base_mva: T) -> T {
    nominal_kv * nominal_kv / s_base_mva
}

/// Series (r, x) in per-unit on the system base from nameplate percentages.
/// Without a resistive part the whole impedance is reactance.
pub fn transformer_impedance_pu<T: Scalar>(
    impedance_pct: T,
    r_pct: Option<T>,
    rating_mva: T,
    s_base_mva: T,
) -> (T, T) {
    let hundred = T::lit(100.0);
    let rebase = s_base_mva / rating_mva;
    let z = impedance_pct / hundred * rebase;
    match r_pct {
        Some(r_pct) => {
            let r = r_pct / hundred * rebase;
            let x = (z * z - r * r).max(T::zero()).sqrt();
            (r, x)
        }
        None => (T::zero(), z),
    }
}

/// Normalizes every branch of `model`, cables first then transformers.
pub fn to_per_unit<T: Scalar>(model: &NetworkModel) -> Result<Vec<PerUnitBranch<T>>, UnitError> {
    let index = model.bus_index();
    let lookup = |id: &BusId| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| UnitError::UnknownBus(id.clone()))
    };
    let s_base = T::lit(model.s_base_mva);
    let mut out = Vec::with_capacity(model.branch_count());

    for c in &model.cables {
        let (from, to) = (lookup(&c.from_bus)?, lookup(&c.to_bus)?);
        let (from_kv, to_kv) = (model.buses[from].nominal_kv, model.buses[to].nominal_kv);
        if from_kv != to_kv {
            return Err(UnitError::VoltageLevel {
                from: c.from_bus.clone(),
                to: c.to_bus.clone(),
                from_kv,
                to_kv,
            });
        }
        let (r_ohm, x_ohm) = cable_impedance(c);
        let z_base = impedance_base_ohms(T::lit(from_kv), s_base);
        out.push(PerUnitBranch {
            kind: BranchKind::Cable,
            from_bus: c.from_bus.clone(),
            to_bus: c.to_bus.clone(),
            from,
            to,
            r_pu: T::lit(r_ohm) / z_base,
            x_pu: T::lit(x_ohm) / z_base,
            tap: T::one(),
            flow_limit_pu: c.limit_mw.map(|mw| T::lit(mw) / s_base),
        });
    }

    for t in &model.transformers {
        let (from, to) = (lookup(&t.from_bus)?, lookup(&t.to_bus)?);
        let (r_pu, x_pu) = transformer_impedance_pu(
            T::lit(t.impedance_pct),
            t.r_pct.map(T::lit),
            T::lit(t.rating_mva),
            s_base,
        );
        out.push(PerUnitBranch {
            kind: BranchKind::Transformer,
            from_bus: t.from_bus.clone(),
            to_bus: t.to_bus.clone(),
            from,
            to,
            r_pu,
            x_pu,
            tap: T::lit(t.tap_ratio),
            flow_limit_pu: Some(T::lit(t.rating_mva) / s_base),
        });
    }
    Ok(out)
}

impl<T: Scalar> PerUnitBranch<T> {
    /// Converts the series impedance back to ohms at `nominal_kv`.
    pub fn to_ohms(&self, nominal_kv: T, s_base_mva: T) -> (T, T) {
        let z_base = impedance_base_ohms(nominal_kv, s_base_mva);
        (self.r_pu * z_base, self.x_pu * z_base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Bus, BusKind, CableSegment, Transformer};

    fn model() -> NetworkModel {
        NetworkModel {
            s_base_mva: 10.0,
            buses: vec![
                Bus {
                    id: "1".into(),
                    name: String::new(),
                    kind: BusKind::Slack,
                    nominal_kv: 12.47,
                },
                Bus {
                    id: "2".into(),
                    name: String::new(),
                    kind: BusKind::Load,
                    nominal_kv: 12.47,
                },
                Bus {
                    id: "3".into(),
                    name: String::new(),
                    kind: BusKind::Load,
                    nominal_kv: 0.48,
                },
            ],
            cables: vec![CableSegment {
                from_bus: "1".into(),
                to_bus: "2".into(),
                length_miles: 2.0,
                r_per_mile: 0.3,
                x_per_mile: 0.4,
                limit_mw: Some(5.0),
            }],
            transformers: vec![Transformer {
                from_bus: "2".into(),
                to_bus: "3".into(),
                rating_mva: 1.0,
                impedance_pct: 5.0,
                r_pct: None,
                tap_ratio: 1.0,
            }],
            generators: vec![],
        }
    }

    #[test]
    fn cable_per_unit_at_12_47_kv() {
        let z_base = impedance_base_ohms(12.47f64, 10.0);
        assert!((z_base - 15.5500).abs() < 1e-4);
        let branches = to_per_unit::<f64>(&model()).unwrap();
        assert!((branches[0].r_pu - 0.038585).abs() < 1e-6);
        assert_eq!(branches[0].flow_limit_pu, Some(0.5));
    }

    #[test]
    fn transformer_rebased_to_system() {
        let branches = to_per_unit::<f64>(&model()).unwrap();
        let t = &branches[1];
        assert_eq!(t.kind, BranchKind::Transformer);
        assert_eq!(t.r_pu, 0.0);
        assert!((t.x_pu - 0.5).abs() < 1e-15);
        let (r, x) = transformer_impedance_pu(5.0f64, None, 10.0, 10.0);
        assert_eq!(r, 0.0);
        assert!((x - 0.05).abs() < 1e-15);
    }

    #[test]
    fn transformer_resistive_part() {
        let (r, x) = transformer_impedance_pu(5.0f64, Some(3.0), 1.0, 1.0);
        assert!((r - 0.03).abs() < 1e-15);
        assert!((x - 0.04).abs() < 1e-15);
    }

    #[test]
    fn cable_between_levels_is_unit_error() {
        let mut m = model();
        m.cables[0].to_bus = "3".into();
        m.transformers.clear();
        assert!(matches!(
            to_per_unit::<f64>(&m),
            Err(UnitError::VoltageLevel { .. })
        ));
    }

    #[test]
    fn single_precision_conversion() {
        let branches = to_per_unit::<f32>(&model()).unwrap();
        assert!((branches[0].r_pu - 0.038585).abs() < 1e-5);
    }

    proptest::proptest! {
        #[test]
        fn per_unit_round_trip(len in 0.01f64..10.0, r in 0.001f64..2.0, x in 0.001f64..2.0,
                               kv in 0.2f64..69.0, s_base in 0.5f64..100.0) {
            let mut m = model();
            m.s_base_mva = s_base;
            m.buses[0].nominal_kv = kv;
            m.buses[1].nominal_kv = kv;
            m.cables[0].length_miles = len;
            m.cables[0].r_per_mile = r;
            m.cables[0].x_per_mile = x;
            let b = &to_per_unit::<f64>(&m).unwrap()[0];
            let (r_back, x_back) = b.to_ohms(kv, s_base);
            let (r_ohm, x_ohm) = cable_impedance(&m.cables[0]);
            proptest::prop_assert!(((r_back - r_ohm) / r_ohm).abs() <= 1e-12);
            proptest::prop_assert!(((x_back - x_ohm) / x_ohm).abs() <= 1e-12);
        }
    }
}
