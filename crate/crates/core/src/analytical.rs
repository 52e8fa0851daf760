//! Closed-form schedulability tests and minimum feasible sampling periods.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{BmacParams, TaskParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormulaVariant {
    /// Numerator T_tdma + W − B, matching the medium-access inequality.
    #[default]
    Eq6Consistent,
    /// Numerator T_tdma + C_M + C_S, i.e. no credit for the lower bound B.
    Eq7Literal,
}

/// Which quantity stands in for B, the lower bound on a sensor response.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LowerBound {
    /// B = C_S.
    #[default]
    SensorWcet,
    /// B = `sensor_bcet`.
    SensorBcet,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnalyticOptions {
    pub variant: FormulaVariant,
    /// Use `<` in the medium-access test instead of `≤`.
    pub strict: bool,
    pub lower_bound: LowerBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BindingConstraint {
    FifoQueueTest,
    MediumAccessTest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnalyticBound {
    pub min_period: i64,
    pub binding_constraint: BindingConstraint,
    pub formula_variant: FormulaVariant,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticError {
    #[error("packet index must be ≥ 1, got {0}")]
    PacketIndex(i64),
    #[error("misc period {misc_period} is shorter than C_M + C_S = {w}; no sampling period is feasible")]
    MiscOverload { misc_period: i64, w: i64 },
}

/// C_M + C_S ≤ min(T_M, T_S)
pub fn fifo_schedulable(p: &TaskParams) -> bool {
    p.w() <= p.misc_period.min(p.sensor_period)
}

/// Instant at which the j-th packet is ready: (jN − 1)·T_S + R.
pub fn packet_ready_time(p: &TaskParams, j: i64, response: i64) -> Result<i64, AnalyticError> {
    if j < 1 {
        return Err(AnalyticError::PacketIndex(j));
    }
    Ok((j * p.buffer_size - 1) * p.sensor_period + response)
}

fn lower_bound(p: &TaskParams, opts: &AnalyticOptions) -> i64 {
    match (opts.variant, opts.lower_bound) {
        (FormulaVariant::Eq7Literal, _) => 0,
        (FormulaVariant::Eq6Consistent, LowerBound::SensorWcet) => p.sensor_wcet,
        (FormulaVariant::Eq6Consistent, LowerBound::SensorBcet) => p.sensor_bcet,
    }
}

/// T_tdma < N·T_S + B − W (or `≤` unless `opts.strict`).
pub fn medium_access_ok(p: &TaskParams, opts: &AnalyticOptions) -> bool {
    medium_access_with(p, p.tdma_superframe, opts)
}

fn medium_access_with(p: &TaskParams, medium_delay: i64, opts: &AnalyticOptions) -> bool {
    let rhs = p.buffer_size * p.sensor_period + lower_bound(p, opts) - p.w();
    if opts.strict {
        medium_delay < rhs
    } else {
        medium_delay <= rhs
    }
}

/// Smallest integer T_S passing both tests. `p.sensor_period` is ignored.
pub fn min_feasible_period(
    p: &TaskParams,
    opts: &AnalyticOptions,
) -> Result<AnalyticBound, AnalyticError> {
    bound_with(p, p.tdma_superframe, opts)
}

fn bound_with(
    p: &TaskParams,
    medium_delay: i64,
    opts: &AnalyticOptions,
) -> Result<AnalyticBound, AnalyticError> {
    let w = p.w();
    if p.misc_period < w {
        return Err(AnalyticError::MiscOverload {
            misc_period: p.misc_period,
            w,
        });
    }
    let fifo = w.max(1);
    let num = medium_delay + w - lower_bound(p, opts);
    let medium = if opts.strict {
        num.div_euclid(p.buffer_size) + 1
    } else {
        div_ceil(num, p.buffer_size)
    };
    let (min_period, binding_constraint) = if medium > fifo {
        (medium, BindingConstraint::MediumAccessTest)
    } else {
        (fifo, BindingConstraint::FifoQueueTest)
    };
    Ok(AnalyticBound {
        min_period,
        binding_constraint,
        formula_variant: opts.variant,
    })
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Sender communication delay t_sd = t_b1 + t_f1 + k·(t_b2 + t_f2) + t_pkt.
pub fn bmac_delay(b: &BmacParams) -> i64 {
    b.t_b1 + b.t_f1 + b.k * (b.t_b2 + b.t_f2) + b.t_pkt
}

/// Same as [`min_feasible_period`] with T_tdma replaced by the B-MAC delay.
pub fn min_feasible_period_bmac(
    p: &TaskParams,
    b: &BmacParams,
    opts: &AnalyticOptions,
) -> Result<AnalyticBound, AnalyticError> {
    bound_with(p, bmac_delay(b), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(cs: i64, n: i64) -> TaskParams {
        TaskParams {
            sensor_wcet: cs,
            buffer_size: n,
            ..TaskParams::baseline()
        }
    }

    #[test]
    fn fifo_examples() {
        assert!(fifo_schedulable(&cell(2, 3).with_period(12)));
        assert!(!fifo_schedulable(&cell(30, 3).with_period(39)));
        assert!(fifo_schedulable(&cell(30, 3).with_period(40)));
    }

    #[test]
    fn ready_times() {
        let p = cell(2, 3).with_period(20);
        assert_eq!(packet_ready_time(&p, 1, 12), Ok(52));
        assert_eq!(packet_ready_time(&p, 2, 12), Ok(112));
        assert_eq!(packet_ready_time(&cell(2, 1).with_period(11), 1, 2), Ok(2));
        assert!(packet_ready_time(&p, 0, 2).is_err());
    }

    #[test]
    fn medium_access_boundary() {
        let o = AnalyticOptions::default();
        assert!(medium_access_ok(&cell(2, 1).with_period(20), &o));
        assert!(!medium_access_ok(&cell(2, 1).with_period(19), &o));
        assert!(medium_access_ok(&cell(2, 10).with_period(12), &o));
        let strict = AnalyticOptions {
            strict: true,
            ..o
        };
        assert!(!medium_access_ok(&cell(2, 1).with_period(20), &strict));
    }

    #[test]
    fn min_period_examples() {
        let o = AnalyticOptions::default();
        let b = min_feasible_period(&cell(2, 1), &o).unwrap();
        assert_eq!(b.min_period, 20);
        assert_eq!(b.binding_constraint, BindingConstraint::MediumAccessTest);
        let b = min_feasible_period(&cell(30, 5), &o).unwrap();
        assert_eq!((b.min_period, b.binding_constraint), (40, BindingConstraint::FifoQueueTest));
        let b = min_feasible_period(&cell(2, 2), &o).unwrap();
        assert_eq!((b.min_period, b.binding_constraint), (12, BindingConstraint::FifoQueueTest));
        let strict = AnalyticOptions {
            strict: true,
            ..o
        };
        assert_eq!(min_feasible_period(&cell(2, 1), &strict).unwrap().min_period, 21);
        let lit = AnalyticOptions {
            variant: FormulaVariant::Eq7Literal,
            ..o
        };
        assert_eq!(min_feasible_period(&cell(2, 1), &lit).unwrap().min_period, 22);
    }

    #[test]
    fn overloaded_misc_has_no_bound() {
        let p = TaskParams {
            misc_period: 5,
            ..cell(2, 1)
        };
        assert!(min_feasible_period(&p, &AnalyticOptions::default()).is_err());
    }

    #[test]
    fn bmac_examples() {
        let b = |t_b1, t_f1, t_b2, t_f2, k, t_pkt| BmacParams {
            t_b1,
            t_f1,
            t_b2,
            t_f2,
            t_pkt,
            k,
        };
        assert_eq!(bmac_delay(&b(1, 1, 1, 1, 4, 5)), 15);
        assert_eq!(bmac_delay(&b(2, 3, 0, 0, 0, 7)), 12);
        assert_eq!(bmac_delay(&b(5, 5, 2, 3, 4, 7)), 37);

        let o = AnalyticOptions::default();
        let ten = b(1, 1, 1, 1, 1, 6);
        assert_eq!(min_feasible_period_bmac(&cell(2, 1), &ten, &o).unwrap().min_period, 20);
        let fifty = b(0, 0, 0, 0, 0, 50);
        assert_eq!(min_feasible_period_bmac(&cell(2, 2), &fifty, &o).unwrap().min_period, 30);
        assert_eq!(min_feasible_period_bmac(&cell(30, 10), &ten, &o).unwrap().min_period, 40);
    }
}
