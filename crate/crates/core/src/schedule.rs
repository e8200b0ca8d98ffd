//! Trotter-Suzuki pulse schedules.
//!
//! Every schedule is built from two primitives: free evolution under
//! `χ J_z²` and instantaneous quarter turns about x or y. A block
//!
//! ```text
//! free(c δt/2) · R_{π/2}^a · free(2c δt) · R_{-π/2}^a · free(c δt/2)
//! ```
//!
//! with pulses about `a = y` realizes `e^{-i c τ (J_z² + 2 J_x²)}` to second
//! order in `τ = χ δt`, which equals `e^{-i c τ (J_x² - J_y²)}` up to a
//! global phase. Pulses about `a = x` give `J_z² + 2 J_y²`, i.e. the sign
//! flipped twist. Higher orders come from Suzuki's recursion, with every
//! negative coefficient realized by the x-pulse block instead of a negative
//! free duration.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::propagation::{Axis, Propagator, SpinSystem, Turn};
use crate::spin::{DickeState, C64};

/// `s = 1/(2 - 2^{1/3})`, the third-order Suzuki coefficient.
pub fn suzuki_s() -> f64 {
    1.0 / (2.0 - 2f64.cbrt())
}

/// `k_m = 1/(2 - 2^{1/(2m-1)})` for the order-2m recursion level.
pub fn suzuki_k(m: u32) -> f64 {
    assert!(m >= 2, "recursion levels start at m = 2");
    1.0 / (2.0 - 2f64.powf(1.0 / (2 * m - 1) as f64))
}

const MAX_LEAVES: usize = 3usize.pow(12);

/// Signed leaf coefficients of the recursive symmetric product formula.
#[derive(Debug, Clone, PartialEq)]
pub struct TsCoefficients {
    pub order: u32,
    /// `k_m` for `m = 2..=order/2`.
    pub levels: Vec<f64>,
    /// Coefficients `c` of the second-order leaves `S(c α)`, in product order.
    pub leaves: Vec<f64>,
}

impl TsCoefficients {
    pub fn new(order: u32) -> Result<Self> {
        if order < 2 || order % 2 != 0 {
            return Err(Error::invalid(format!(
                "product-formula order must be even and at least 2, got {order}"
            )));
        }
        let m_max = order / 2;
        let n_leaves = 3usize
            .checked_pow(m_max - 1)
            .filter(|&n| n <= MAX_LEAVES)
            .ok_or_else(|| Error::invalid(format!("order {order} needs too many product-formula leaves")))?;
        let mut leaves = vec![1.0];
        let mut levels = Vec::new();
        for m in 2..=m_max {
            let k = suzuki_k(m);
            levels.push(k);
            let mut next = Vec::with_capacity(leaves.len() * 3);
            for factor in [k, 1.0 - 2.0 * k, k] {
                next.extend(leaves.iter().map(|c| c * factor));
            }
            leaves = next;
        }
        debug_assert_eq!(leaves.len(), n_leaves);
        if leaves
            .iter()
            .any(|c| c.abs() < 1e3 * f64::MIN_POSITIVE || !c.is_finite())
        {
            return Err(Error::invalid(format!("order {order} coefficients underflow")));
        }
        Ok(TsCoefficients { order, levels, leaves })
    }

    pub fn signed_sum(&self) -> f64 {
        self.leaves.iter().sum()
    }

    pub fn absolute_sum(&self) -> f64 {
        self.leaves.iter().map(|c| c.abs()).sum()
    }
}

/// Which compiled sequence a schedule implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    /// First-order splitting (two pulses per period, asymmetric).
    Liu1,
    /// Symmetric second-order splitting, two pulses per period.
    SchemeA,
    /// Third/fourth-order splitting, six pulses per period.
    SchemeB,
    /// Recursive construction of the given even order.
    General(u32),
}

impl SequenceKind {
    pub fn tag(self) -> &'static str {
        match self {
            SequenceKind::Liu1 => "liu1",
            SequenceKind::SchemeA => "schemeA",
            SequenceKind::SchemeB => "schemeB",
            SequenceKind::General(_) => "general",
        }
    }

    pub fn order(self) -> u32 {
        match self {
            SequenceKind::Liu1 => 1,
            SequenceKind::SchemeA => 2,
            SequenceKind::SchemeB => 4,
            SequenceKind::General(order) => order,
        }
    }

    /// Compile with `δt` chosen so that `n_cycles` periods last `t_total`.
    pub fn compile_for_total_time(self, t_total: f64, n_cycles: usize) -> Result<Schedule> {
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(Error::invalid(format!("t_total must be positive, got {t_total}")));
        }
        if n_cycles == 0 {
            return Err(Error::invalid("n_cycles must be at least 1"));
        }
        let units = self.period_in_delta_t()?;
        self.compile(t_total / (n_cycles as f64 * units), n_cycles)
    }

    pub fn compile(self, delta_t: f64, n_cycles: usize) -> Result<Schedule> {
        match self {
            SequenceKind::Liu1 => compile_order1(delta_t, n_cycles),
            SequenceKind::SchemeA => compile_scheme_a(delta_t, n_cycles),
            SequenceKind::SchemeB => compile_scheme_b(delta_t, n_cycles),
            SequenceKind::General(order) => compile_general(order, delta_t, n_cycles),
        }
    }

    /// Period length `t_c / δt`, which is also the divisor of `χ` in the
    /// effective Hamiltonian.
    pub fn period_in_delta_t(self) -> Result<f64> {
        Ok(match self {
            SequenceKind::Liu1 | SequenceKind::SchemeA => 3.0,
            SequenceKind::SchemeB => 12.0 * suzuki_s() - 3.0,
            SequenceKind::General(order) => 3.0 * TsCoefficients::new(order)?.absolute_sum(),
        })
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKind::General(order) => write!(f, "order{order}"),
            other => f.write_str(other.tag()),
        }
    }
}

/// One step of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Free evolution under `χ J_z²`.
    Free { duration: f64 },
    /// Instantaneous `R^{axis}_{±π/2}`.
    Pulse { axis: Axis, turn: Turn },
}

/// A compiled periodic pulse sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: SequenceKind,
    pub delta_t: f64,
    pub n_cycles: usize,
    /// Segments of one period, in time order.
    pub period: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleStats {
    pub period: f64,
    pub pulses_per_period: usize,
    pub total_pulses: usize,
    /// `d` in `H_eff = χ (J_x² - J_y²) / d`.
    pub effective_divisor: f64,
}

fn validate(delta_t: f64, n_cycles: usize) -> Result<()> {
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(Error::invalid(format!("delta_t must be positive, got {delta_t}")));
    }
    if n_cycles == 0 {
        return Err(Error::invalid("n_cycles must be at least 1"));
    }
    Ok(())
}

fn free(duration: f64) -> Segment {
    Segment::Free { duration }
}

fn pulse(axis: Axis, turn: Turn) -> Segment {
    Segment::Pulse { axis, turn }
}

/// `e^{-iτJ_z²} e^{-i2τJ_x²}`: in time order `R_{π/2}^y`, `free(2δt)`,
/// `R_{-π/2}^y`, `free(δt)`, so pulses sit at `0` and `2δt` of each period.
pub fn compile_order1(delta_t: f64, n_cycles: usize) -> Result<Schedule> {
    validate(delta_t, n_cycles)?;
    Ok(Schedule {
        kind: SequenceKind::Liu1,
        delta_t,
        n_cycles,
        period: vec![
            pulse(Axis::Y, Turn::Plus),
            free(2.0 * delta_t),
            pulse(Axis::Y, Turn::Minus),
            free(delta_t),
        ],
    })
}

/// `free(δt/2) · R_{π/2}^y · free(2δt) · R_{-π/2}^y · free(δt/2)`.
pub fn compile_scheme_a(delta_t: f64, n_cycles: usize) -> Result<Schedule> {
    validate(delta_t, n_cycles)?;
    Ok(Schedule {
        kind: SequenceKind::SchemeA,
        delta_t,
        n_cycles,
        period: twist_block(1.0, delta_t),
    })
}

/// Seven free segments `t_1..t_7` (palindromic), y-pulses around `t_2` and
/// `t_6`, x-pulses around `t_4`.
pub fn compile_scheme_b(delta_t: f64, n_cycles: usize) -> Result<Schedule> {
    validate(delta_t, n_cycles)?;
    let s = suzuki_s();
    let t1 = s * delta_t / 2.0;
    let t2 = 2.0 * s * delta_t;
    let t3 = (3.0 * s - 1.0) * delta_t / 2.0;
    let t4 = 2.0 * (2.0 * s - 1.0) * delta_t;
    Ok(Schedule {
        kind: SequenceKind::SchemeB,
        delta_t,
        n_cycles,
        period: vec![
            free(t1),
            pulse(Axis::Y, Turn::Plus),
            free(t2),
            pulse(Axis::Y, Turn::Minus),
            free(t3),
            pulse(Axis::X, Turn::Plus),
            free(t4),
            pulse(Axis::X, Turn::Minus),
            free(t3),
            pulse(Axis::Y, Turn::Plus),
            free(t2),
            pulse(Axis::Y, Turn::Minus),
            free(t1),
        ],
    })
}

/// Second-order block for `S(c α)`; a negative `c` swaps the pulse axis.
fn twist_block(c: f64, delta_t: f64) -> Vec<Segment> {
    let axis = if c > 0.0 { Axis::Y } else { Axis::X };
    let w = c.abs() * delta_t;
    vec![
        free(w / 2.0),
        pulse(axis, Turn::Plus),
        free(2.0 * w),
        pulse(axis, Turn::Minus),
        free(w / 2.0),
    ]
}

/// Recursive order-`order` schedule; adjacent free segments are merged and
/// back-to-back inverse pulses cancelled.
pub fn compile_general(order: u32, delta_t: f64, n_cycles: usize) -> Result<Schedule> {
    validate(delta_t, n_cycles)?;
    let coeffs = TsCoefficients::new(order)?;
    let raw: Vec<Segment> = coeffs.leaves.iter().flat_map(|&c| twist_block(c, delta_t)).collect();
    Ok(Schedule {
        kind: SequenceKind::General(order),
        delta_t,
        n_cycles,
        period: simplify(raw),
    })
}

fn simplify(segments: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in segments {
        if let Segment::Free { duration } = seg {
            if duration == 0.0 {
                continue;
            }
        }
        match (out.last().copied(), seg) {
            (Some(Segment::Free { duration: acc }), Segment::Free { duration }) => {
                out.pop();
                out.push(free(acc + duration));
            }
            (Some(Segment::Pulse { axis: a, turn: t }), Segment::Pulse { axis, turn })
                if a == axis && t == turn.inverse() =>
            {
                out.pop();
                // the cancellation can leave two free segments side by side
                if let [.., Segment::Free { duration: d1 }, Segment::Free { duration: d2 }] = out[..] {
                    out.truncate(out.len() - 2);
                    out.push(free(d1 + d2));
                }
            }
            _ => out.push(seg),
        }
    }
    out
}

impl Schedule {
    pub fn period_duration(&self) -> f64 {
        self.period
            .iter()
            .map(|s| match s {
                Segment::Free { duration } => *duration,
                Segment::Pulse { .. } => 0.0,
            })
            .sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.period_duration() * self.n_cycles as f64
    }

    pub fn pulses_per_period(&self) -> usize {
        self.period
            .iter()
            .filter(|s| matches!(s, Segment::Pulse { .. }))
            .count()
    }

    pub fn free_durations(&self) -> Vec<f64> {
        self.period
            .iter()
            .filter_map(|s| match s {
                Segment::Free { duration } => Some(*duration),
                Segment::Pulse { .. } => None,
            })
            .collect()
    }

    /// Pulse instants within one period, with their axis and direction.
    pub fn pulse_times(&self) -> Vec<(f64, Axis, Turn)> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for seg in &self.period {
            match *seg {
                Segment::Free { duration } => t += duration,
                Segment::Pulse { axis, turn } => out.push((t, axis, turn)),
            }
        }
        out
    }

    /// Per-axis signed quarter-turn count over one period; all zero when the
    /// pulses pair up.
    pub fn net_quarter_turns(&self) -> [i64; 2] {
        let mut net = [0i64; 2];
        for seg in &self.period {
            if let Segment::Pulse { axis, turn } = seg {
                let idx = match axis {
                    Axis::X => 0,
                    Axis::Y => 1,
                };
                net[idx] += match turn {
                    Turn::Plus => 1,
                    Turn::Minus => -1,
                };
            }
        }
        net
    }

    pub fn stats(&self) -> ScheduleStats {
        let period = self.period_duration();
        let pulses = self.pulses_per_period();
        ScheduleStats {
            period,
            pulses_per_period: pulses,
            total_pulses: pulses * self.n_cycles,
            effective_divisor: period / self.delta_t,
        }
    }

    /// Advance `state` through one period.
    pub fn apply_period(&self, sys: &SpinSystem, state: &mut DickeState, chi: f64) {
        for seg in &self.period {
            self.apply_segment(sys, state, seg, chi);
        }
    }

    pub(crate) fn apply_segment(&self, sys: &SpinSystem, state: &mut DickeState, seg: &Segment, chi: f64) {
        match *seg {
            Segment::Free { duration } => sys.oat_in_place(state, chi * duration),
            Segment::Pulse { axis, turn } => sys.pulse_in_place(state, axis, turn),
        }
    }

    /// Dense unitary of one period.
    pub fn period_propagator(&self, sys: &SpinSystem, chi: f64) -> Propagator {
        let dim = sys.dim();
        let mut acc = Propagator {
            matrix: DMatrix::<C64>::identity(dim, dim),
            generator: crate::propagation::Generator::Composite,
            parameter: f64::NAN,
        };
        for seg in &self.period {
            let step = match *seg {
                Segment::Free { duration } => sys.oat_propagator(chi * duration),
                Segment::Pulse { axis, turn } => sys.rotation_propagator(axis, turn.angle()),
            };
            acc = step.after(&acc);
        }
        acc
    }

    /// Line-oriented text form, one segment per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# scheme={} order={} delta_t={} t_c={} n_cycles={}",
            self.kind.tag(),
            self.kind.order(),
            self.delta_t,
            self.period_duration(),
            self.n_cycles
        );
        for seg in &self.period {
            let _ = match seg {
                Segment::Free { duration } => writeln!(out, "FREE {duration}"),
                Segment::Pulse { axis, turn } => writeln!(out, "PULSE {axis} {turn}"),
            };
        }
        out
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::invalid(format!("schedule line {line}: {msg}"));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::invalid("empty schedule text"))?;
        let header = header.strip_prefix('#').ok_or_else(|| bad(1, "missing '#' header"))?;
        let (mut tag, mut order, mut delta_t, mut n_cycles) = (None, None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(1, "malformed header field"))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(1, "bad number"));
            match key {
                "scheme" => tag = Some(value.to_string()),
                "order" => order = Some(value.parse::<u32>().map_err(|_| bad(1, "bad order"))?),
                "delta_t" => delta_t = Some(num(value)?),
                "t_c" => {
                    num(value)?;
                }
                "n_cycles" => n_cycles = Some(value.parse::<usize>().map_err(|_| bad(1, "bad n_cycles"))?),
                _ => return Err(bad(1, &format!("unknown header key '{key}'"))),
            }
        }
        let order = order.ok_or_else(|| bad(1, "missing order"))?;
        let kind = match tag.as_deref() {
            Some("liu1") => SequenceKind::Liu1,
            Some("schemeA") => SequenceKind::SchemeA,
            Some("schemeB") => SequenceKind::SchemeB,
            Some("general") => SequenceKind::General(order),
            _ => return Err(bad(1, "missing or unknown scheme")),
        };
        let mut period = Vec::new();
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let seg = match (parts.next(), parts.next(), parts.next()) {
                (Some("FREE"), Some(d), None) => Segment::Free {
                    duration: d.parse().map_err(|_| bad(i + 1, "bad duration"))?,
                },
                (Some("PULSE"), Some(axis), Some(turn)) => Segment::Pulse {
                    axis: match axis {
                        "x" => Axis::X,
                        "y" => Axis::Y,
                        _ => return Err(bad(i + 1, "axis must be x or y")),
                    },
                    turn: match turn {
                        "+" => Turn::Plus,
                        "-" => Turn::Minus,
                        _ => return Err(bad(i + 1, "sign must be + or -")),
                    },
                },
                _ => return Err(bad(i + 1, "expected FREE <duration> or PULSE <axis> <sign>")),
            };
            period.push(seg);
        }
        Ok(Schedule {
            kind,
            delta_t: delta_t.ok_or_else(|| bad(1, "missing delta_t"))?,
            n_cycles: n_cycles.ok_or_else(|| bad(1, "missing n_cycles"))?,
            period,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn suzuki_constants() {
        assert_abs_diff_eq!(suzuki_s(), 1.351_207_191_959_657_6, epsilon = 1e-14);
        assert_eq!(suzuki_k(2), suzuki_s());
        assert_abs_diff_eq!(suzuki_k(3), 1.0 / (2.0 - 2f64.powf(0.2)), epsilon = 1e-15);
    }

    #[test]
    fn order1_layout() {
        let s = compile_order1(0.1, 1).unwrap();
        assert_eq!(s.pulses_per_period(), 2);
        assert_abs_diff_eq!(s.period_duration(), 0.3, epsilon = 1e-15);
        let times = s.pulse_times();
        assert_eq!(times[0], (0.0, Axis::Y, Turn::Plus));
        assert_abs_diff_eq!(times[1].0, 0.2, epsilon = 1e-15);
        assert!(compile_order1(0.1, 0).is_err());
        assert!(compile_order1(0.0, 3).is_err());
        assert!(compile_order1(-1.0, 3).is_err());
    }

    #[test]
    fn scheme_a_layout() {
        let dt = 0.2;
        let s = compile_scheme_a(dt, 1).unwrap();
        assert_eq!(s.free_durations(), vec![dt / 2.0, 2.0 * dt, dt / 2.0]);
        let times = s.pulse_times();
        assert_eq!(times.len(), 2);
        assert_abs_diff_eq!(times[0].0, dt / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(times[1].0, 5.0 * dt / 2.0, epsilon = 1e-15);
        assert_eq!((times[0].1, times[0].2), (Axis::Y, Turn::Plus));
        assert_eq!((times[1].1, times[1].2), (Axis::Y, Turn::Minus));
        let stats = s.stats();
        assert_abs_diff_eq!(stats.period, 3.0 * dt, epsilon = 1e-15);
        assert_abs_diff_eq!(stats.effective_divisor, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn scheme_b_layout() {
        let s = compile_scheme_b(1.0, 1).unwrap();
        let d = s.free_durations();
        let expected = [0.6756, 2.7024, 1.5268, 3.4048, 1.5268, 2.7024, 0.6756];
        assert_eq!(d.len(), 7);
        for (a, b) in d.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-4);
            assert!(*a > 0.0);
        }
        for i in 0..7 {
            assert_eq!(d[i], d[6 - i]);
        }
        assert_abs_diff_eq!(s.period_duration(), 12.0 * suzuki_s() - 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(s.period_duration(), 13.214, epsilon = 1e-3);
        assert_eq!(s.pulses_per_period(), 6);
        let axes: Vec<Axis> = s.pulse_times().iter().map(|p| p.1).collect();
        assert_eq!(axes, [Axis::Y, Axis::Y, Axis::X, Axis::X, Axis::Y, Axis::Y]);
    }

    #[test]
    fn general_order2_is_scheme_a() {
        assert_eq!(
            compile_general(2, 0.3, 4).unwrap().period,
            compile_scheme_a(0.3, 4).unwrap().period
        );
    }

    #[test]
    fn general_order4_matches_scheme_b() {
        let g = compile_general(4, 0.7, 2).unwrap();
        let b = compile_scheme_b(0.7, 2).unwrap();
        assert_eq!(g.period.len(), b.period.len());
        for (x, y) in g.period.iter().zip(&b.period) {
            match (x, y) {
                (Segment::Free { duration: a }, Segment::Free { duration: c }) => {
                    assert_abs_diff_eq!(a, c, epsilon = 1e-14)
                }
                _ => assert_eq!(x, y),
            }
        }
    }

    #[test]
    fn order6_coefficients() {
        let c = TsCoefficients::new(6).unwrap();
        assert_eq!(c.leaves.len(), 9);
        assert_abs_diff_eq!(c.levels[1], 1.0 / (2.0 - 2f64.powf(0.2)), epsilon = 1e-15);
        assert_abs_diff_eq!(c.signed_sum(), 1.0, epsilon = 1e-12);
        // outer k₃ times inner s
        assert_abs_diff_eq!(c.leaves[0], suzuki_k(3) * suzuki_s(), epsilon = 1e-15);
        assert!(c.leaves.iter().any(|&x| x < 0.0));
        let s = compile_general(6, 1.0, 1).unwrap();
        assert!(s.free_durations().iter().all(|&d| d > 0.0));
        assert_eq!(s.net_quarter_turns(), [0, 0]);
        assert_abs_diff_eq!(s.stats().effective_divisor, 3.0 * c.absolute_sum(), epsilon = 1e-12);
    }

    #[test]
    fn bad_orders_rejected() {
        assert!(TsCoefficients::new(0).is_err());
        assert!(TsCoefficients::new(3).is_err());
        assert!(TsCoefficients::new(40).is_err());
        assert!(compile_general(5, 0.1, 1).is_err());
    }

    #[test]
    fn stats_totals() {
        let a = SequenceKind::SchemeA.compile(0.01, 50).unwrap().stats();
        assert_eq!(a.total_pulses, 100);
        assert_abs_diff_eq!(a.effective_divisor, 3.0, epsilon = 1e-12);
        let b = SequenceKind::SchemeB.compile(0.01, 17).unwrap().stats();
        assert_eq!(b.total_pulses, 102);
        assert_abs_diff_eq!(b.effective_divisor, 12.0 * suzuki_s() - 3.0, epsilon = 1e-12);
    }

    #[test]
    fn total_time_solves_for_delta_t() {
        for kind in [
            SequenceKind::Liu1,
            SequenceKind::SchemeA,
            SequenceKind::SchemeB,
            SequenceKind::General(6),
        ] {
            let s = kind.compile_for_total_time(0.009, 37).unwrap();
            assert_abs_diff_eq!(s.total_duration(), 0.009, epsilon = 1e-15);
        }
        assert!(SequenceKind::SchemeA.compile_for_total_time(0.0, 3).is_err());
    }

    #[test]
    fn simplify_cancels_inverse_pairs() {
        let raw = vec![
            free(1.0),
            pulse(Axis::Y, Turn::Minus),
            pulse(Axis::Y, Turn::Plus),
            free(2.0),
            pulse(Axis::X, Turn::Plus),
            free(0.0),
            pulse(Axis::X, Turn::Minus),
        ];
        assert_eq!(simplify(raw), vec![free(3.0)]);
    }

    #[test]
    fn text_format_golden() {
        let s = compile_scheme_a(0.5, 3).unwrap();
        assert_eq!(
            s.to_text(),
            "# scheme=schemeA order=2 delta_t=0.5 t_c=1.5 n_cycles=3\n\
             FREE 0.25\nPULSE y +\nFREE 1\nPULSE y -\nFREE 0.25\n"
        );
    }

    #[test]
    fn text_format_rejects_garbage() {
        assert!("".parse::<Schedule>().is_err());
        assert!("FREE 1\n".parse::<Schedule>().is_err());
        assert!("# scheme=schemeA order=2 delta_t=1 n_cycles=1\nPULSE z +\n"
            .parse::<Schedule>()
            .is_err());
        assert!("# scheme=schemeA order=2 delta_t=1 n_cycles=1\nWAIT 3\n"
            .parse::<Schedule>()
            .is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(order in prop::sample::select(vec![0u32, 1, 2, 4, 6]), dt in 1e-6f64..10.0, nc in 1usize..2000) {
            let kind = match order {
                0 => SequenceKind::Liu1,
                1 => SequenceKind::SchemeA,
                2 => SequenceKind::SchemeB,
                o => SequenceKind::General(o),
            };
            let s = kind.compile(dt, nc).unwrap();
            let back: Schedule = s.to_text().parse().unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn schedules_pair_up_and_are_palindromic(kind in prop::sample::select(vec![
            SequenceKind::SchemeA, SequenceKind::SchemeB, SequenceKind::General(4), SequenceKind::General(6), SequenceKind::General(8),
        ]), t_total in 1e-4f64..5.0, nc in 1usize..500) {
            let s = kind.compile_for_total_time(t_total, nc).unwrap();
            prop_assert_eq!(s.net_quarter_turns(), [0, 0]);
            let d = s.free_durations();
            for i in 0..d.len() {
                prop_assert!((d[i] - d[d.len() - 1 - i]).abs() <= 1e-12 * t_total);
                prop_assert!(d[i] > 0.0);
            }
            prop_assert!((s.total_duration() - t_total).abs() <= 1e-12 * t_total);
        }
    }
}
