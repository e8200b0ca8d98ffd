//! Numerical experiments: compiled sequences against their effective
//! two-axis-twisting dynamics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagation::{Axis, SpinSystem};
use crate::schedule::{Schedule, Segment, SequenceKind};
use crate::spin::{DickeState, SpinMoments};
use crate::squeezing::{find_optimum, squeezing_from_moments, Optimum, Sampling, SqueezingSample, SqueezingTrace};

/// Coarse grid size of the optimal-time search.
pub const OPTIMUM_GRID: usize = 2000;

/// Reference time cost of a few-pulse two-axis scheme, in units of `1/χ`.
pub const FEW_PULSE_TIME_COST: f64 = 0.1;

/// What drives the dynamics of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// A compiled pulse sequence on top of `χ J_z²`.
    Sequence(SequenceKind),
    /// `χ (J_x² - J_y²) / divisor` from `|J, J⟩`.
    IdealTat { divisor: f64 },
    /// `χ J_z²` from the coherent state along +x.
    IdealOat,
}

impl Scheme {
    /// Effective-Hamiltonian divisor `d`; 1 for the ideal references.
    pub fn divisor(&self) -> Result<f64> {
        match self {
            Scheme::Sequence(kind) => kind.period_in_delta_t(),
            Scheme::IdealTat { divisor } => Ok(*divisor),
            Scheme::IdealOat => Ok(1.0),
        }
    }

    /// Ideal reference on the same physical time axis.
    pub fn effective(&self) -> Result<Scheme> {
        Ok(Scheme::IdealTat {
            divisor: self.divisor()?,
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Sequence(kind) => write!(f, "{kind}"),
            Scheme::IdealTat { divisor } if *divisor == 1.0 => f.write_str("ideal-tat"),
            Scheme::IdealTat { divisor } => write!(f, "ideal-tat/{divisor}"),
            Scheme::IdealOat => f.write_str("ideal-oat"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// `liu1`, `schemeA`, `schemeB`, `general` (order 4 unless given as
    /// `order<2m>`), `ideal-tat`, `ideal-oat`. Case and `-`/`_` insensitive.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "liu1" | "liu" | "order1" => Scheme::Sequence(SequenceKind::Liu1),
            "schemea" | "a" => Scheme::Sequence(SequenceKind::SchemeA),
            "schemeb" | "b" => Scheme::Sequence(SequenceKind::SchemeB),
            "general" => Scheme::Sequence(SequenceKind::General(4)),
            "idealtat" | "tat" => Scheme::IdealTat { divisor: 1.0 },
            "idealoat" | "oat" => Scheme::IdealOat,
            other => match other.strip_prefix("order").and_then(|o| o.parse::<u32>().ok()) {
                Some(order) if order >= 2 && order % 2 == 0 => Scheme::Sequence(SequenceKind::General(order)),
                _ => return Err(Error::invalid(format!("unknown scheme '{s}'"))),
            },
        })
    }
}

/// Declarative description of one deterministic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec {
    pub scheme: Scheme,
    pub n_spins: usize,
    /// Periods of the sequence; for the ideal references, grid intervals.
    pub n_cycles: usize,
    pub chi: f64,
    pub t_total: f64,
    pub sampling: Sampling,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::invalid("n_spins must be at least 1"));
        }
        if self.n_cycles == 0 {
            return Err(Error::invalid("n_cycles must be at least 1"));
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::invalid(format!("chi must be positive, got {}", self.chi)));
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(Error::invalid(format!(
                "t_total must be positive, got {}",
                self.t_total
            )));
        }
        if let Scheme::IdealTat { divisor } = self.scheme {
            if !(divisor > 0.0 && divisor.is_finite()) {
                return Err(Error::invalid(format!("divisor must be positive, got {divisor}")));
            }
        }
        if self.sampling == Sampling::Fine(0) {
            return Err(Error::invalid("fine sampling needs at least one subsample"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.t_total / self.n_cycles as f64
    }

    /// The ideal-TAT reference sharing this run's time grid.
    pub fn effective(&self) -> Result<ExperimentSpec> {
        Ok(ExperimentSpec {
            scheme: self.scheme.effective()?,
            ..*self
        })
    }

    pub fn schedule(&self) -> Result<Option<Schedule>> {
        match self.scheme {
            Scheme::Sequence(kind) => kind.compile_for_total_time(self.t_total, self.n_cycles).map(Some),
            _ => Ok(None),
        }
    }
}

/// Sample times `(t, stroboscopic)` in order.
fn time_grid(spec: &ExperimentSpec) -> Vec<(f64, bool)> {
    let tc = spec.period();
    let k = spec.sampling.subsamples();
    let mut out = Vec::with_capacity(spec.n_cycles * (k + 1) + 1);
    out.push((0.0, true));
    for m in 0..spec.n_cycles {
        let start = m as f64 * tc;
        for j in 1..=k {
            out.push((start + tc * j as f64 / (k + 1) as f64, false));
        }
        out.push(((m + 1) as f64 * tc, true));
    }
    out
}

fn sample(sys: &SpinSystem, state: &DickeState, t: f64, strobe: bool, index: usize) -> Result<SqueezingSample> {
    let moments = SpinMoments::of(state, sys.ops())?;
    squeezing_from_moments(&moments, sys.ops().j(), None)
        .map(|s| s.at(t, strobe))
        .map_err(|e| e.at_sample(index))
}

/// Run `spec`, building the spin system on the fly.
pub fn run_trace(spec: &ExperimentSpec) -> Result<SqueezingTrace> {
    spec.validate()?;
    let sys = SpinSystem::new(spec.n_spins)?;
    run_trace_with(&sys, spec)
}

/// Run `spec` against a prebuilt spin system of matching size.
pub fn run_trace_with(sys: &SpinSystem, spec: &ExperimentSpec) -> Result<SqueezingTrace> {
    spec.validate()?;
    if sys.n_spins() != spec.n_spins {
        return Err(Error::DimensionMismatch {
            expected: spec.n_spins + 1,
            found: sys.dim(),
        });
    }
    let grid = time_grid(spec);
    let samples = match spec.scheme {
        Scheme::Sequence(kind) => {
            let schedule = kind.compile_for_total_time(spec.t_total, spec.n_cycles)?;
            run_sequence(sys, spec, &schedule, &grid)?
        }
        Scheme::IdealTat { divisor } => {
            let traj = sys.twist_trajectory(&sys.coherent_z())?;
            grid.iter()
                .enumerate()
                .map(|(i, &(t, strobe))| sample(sys, &traj.state_at(spec.chi * t / divisor), t, strobe, i))
                .collect::<Result<_>>()?
        }
        Scheme::IdealOat => {
            let start = oat_initial_state(sys)?;
            grid.iter()
                .enumerate()
                .map(|(i, &(t, strobe))| sample(sys, &sys.evolve_oat(&start, spec.chi, t)?, t, strobe, i))
                .collect::<Result<_>>()?
        }
    };
    Ok(SqueezingTrace {
        label: spec.scheme.to_string(),
        n_spins: spec.n_spins,
        n_cycles: spec.n_cycles,
        sampling: spec.sampling,
        samples,
    })
}

/// Coherent state along +x, the standard one-axis-twisting start.
pub fn oat_initial_state(sys: &SpinSystem) -> Result<DickeState> {
    sys.rotate(&sys.coherent_z(), Axis::Y, std::f64::consts::FRAC_PI_2)
}

fn run_sequence(
    sys: &SpinSystem,
    spec: &ExperimentSpec,
    schedule: &Schedule,
    grid: &[(f64, bool)],
) -> Result<Vec<SqueezingSample>> {
    let k = spec.sampling.subsamples();
    let tc = spec.period();
    let mut state = sys.coherent_z();
    let mut out = Vec::with_capacity(grid.len());
    out.push(sample(sys, &state, 0.0, true, 0)?);
    for _ in 0..spec.n_cycles {
        if k > 0 {
            // Interior samples come from a copy so the boundary states are
            // bit-identical to a stroboscopic run.
            let mut branch = state.clone();
            let mut elapsed = 0.0;
            let mut j = 1;
            for seg in &schedule.period {
                if let Segment::Free { duration } = *seg {
                    let end = elapsed + duration;
                    while j <= k {
                        let target = tc * j as f64 / (k + 1) as f64;
                        if target > end {
                            break;
                        }
                        schedule.apply_segment(
                            sys,
                            &mut branch,
                            &Segment::Free {
                                duration: target - elapsed,
                            },
                            spec.chi,
                        );
                        elapsed = target;
                        let (t, strobe) = grid[out.len()];
                        out.push(sample(sys, &branch, t, strobe, out.len())?);
                        j += 1;
                    }
                    schedule.apply_segment(
                        sys,
                        &mut branch,
                        &Segment::Free {
                            duration: end - elapsed,
                        },
                        spec.chi,
                    );
                    elapsed = end;
                } else {
                    schedule.apply_segment(sys, &mut branch, seg, spec.chi);
                }
            }
            // rounding can leave the last target a hair past the period end
            while j <= k {
                let (t, strobe) = grid[out.len()];
                out.push(sample(sys, &branch, t, strobe, out.len())?);
                j += 1;
            }
        }
        schedule.apply_period(sys, &mut state, spec.chi);
        let (t, strobe) = grid[out.len()];
        debug_assert!(strobe);
        out.push(sample(sys, &state, t, strobe, out.len())?);
    }
    Ok(out)
}

/// Run independent specs concurrently; results keep the input order.
pub fn run_many(specs: &[ExperimentSpec]) -> Vec<Result<SqueezingTrace>> {
    specs.par_iter().map(run_trace).collect()
}

/// Pointwise `|ξ²_seq - ξ²_eff| / ξ²_eff` at period boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub points: Vec<(f64, f64)>,
}

impl ErrorCurve {
    /// Largest error with `t <= t_max`.
    pub fn max_until(&self, t_max: f64) -> f64 {
        self.points
            .iter()
            .filter(|(t, _)| *t <= t_max)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }
}

pub fn relative_error_curve(seq: &SqueezingTrace, eff: &SqueezingTrace) -> Result<ErrorCurve> {
    let a: Vec<_> = seq.stroboscopic().collect();
    let b: Vec<_> = eff.stroboscopic().collect();
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} stroboscopic samples against {}",
            a.len(),
            b.len()
        )));
    }
    let points = a
        .iter()
        .zip(&b)
        .map(|(x, y)| {
            if (x.t - y.t).abs() > 1e-12 * x.t.abs().max(1.0) {
                return Err(Error::GridMismatch(format!("t = {} against t = {}", x.t, y.t)));
            }
            Ok((x.t, (x.xi2 - y.xi2).abs() / y.xi2))
        })
        .collect::<Result<_>>()?;
    Ok(ErrorCurve { points })
}

/// Sequence trace, its effective-Hamiltonian reference and their error curve.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub sequence: SqueezingTrace,
    pub effective: SqueezingTrace,
    pub errors: ErrorCurve,
}

pub fn compare(spec: &ExperimentSpec) -> Result<Comparison> {
    spec.validate()?;
    let sys = SpinSystem::new(spec.n_spins)?;
    compare_with(&sys, spec)
}

pub fn compare_with(sys: &SpinSystem, spec: &ExperimentSpec) -> Result<Comparison> {
    let eff_spec = spec.effective()?;
    let (sequence, effective) = rayon::join(|| run_trace_with(sys, spec), || run_trace_with(sys, &eff_spec));
    let (sequence, effective) = (sequence?, effective?);
    let errors = relative_error_curve(&sequence, &effective)?;
    Ok(Comparison {
        sequence,
        effective,
        errors,
    })
}

/// Optimal squeezing of the ideal dynamics at unit strength (`χ = 1`, `d = 1`).
///
/// Coarse scan of [`OPTIMUM_GRID`] points, then golden-section refinement
/// around the best grid point. The scan stops early if the mean spin vanishes.
pub fn ideal_optimum(sys: &SpinSystem, reference: Reference) -> Result<Optimum> {
    let n = sys.n_spins() as f64;
    let eval: Box<dyn Fn(f64) -> Result<f64> + Sync + '_> = match reference {
        Reference::Tat => {
            let traj = sys.twist_trajectory(&sys.coherent_z())?;
            Box::new(move |t| sample(sys, &traj.state_at(t), t, true, 0).map(|s| s.xi2))
        }
        Reference::Oat => {
            let start = oat_initial_state(sys)?;
            Box::new(move |t| sample(sys, &sys.evolve_oat(&start, 1.0, t)?, t, true, 0).map(|s| s.xi2))
        }
    };
    let window = match reference {
        Reference::Tat => 1.5 * (2.0 * n).ln() / n,
        Reference::Oat => 3.0 * n.powf(-2.0 / 3.0),
    };
    let step = window / OPTIMUM_GRID as f64;
    let mut grid = Vec::with_capacity(OPTIMUM_GRID + 1);
    for i in 0..=OPTIMUM_GRID {
        let t = step * i as f64;
        match eval(t) {
            Ok(xi2) => grid.push(SqueezingSample {
                t,
                xi2,
                mean_spin: [0.0; 3],
                min_variance_direction: [0.0; 3],
                stroboscopic: true,
            }),
            Err(Error::MeanSpinVanishing { .. }) if i > 0 => break,
            Err(e) => return Err(e),
        }
    }
    let coarse = find_optimum(&grid)?;
    let lo = (coarse.t_opt - step).max(0.0);
    let hi = coarse.t_opt + step;
    let f = |t: f64| eval(t).unwrap_or(f64::INFINITY);
    let (t, xi2) = golden_section(f, lo, hi, 1e-12 * window);
    Ok(if xi2 < coarse.xi2_min {
        Optimum { t_opt: t, xi2_min: xi2 }
    } else {
        coarse
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Tat,
    Oat,
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_cycles: usize,
    /// Smallest stroboscopic `ξ²` of the run and when it occurred.
    pub xi2_best: f64,
    pub t_best: f64,
    /// `|ξ²_best - ξ²_min| / ξ²_min` against the ideal two-axis minimum.
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub ideal: Optimum,
    pub rows: Vec<ConvergenceRow>,
}

/// Sweep the number of periods at fixed total time.
pub fn nc_convergence(
    kind: SequenceKind,
    n_spins: usize,
    chi: f64,
    t_total: f64,
    nc_list: &[usize],
) -> Result<Convergence> {
    let sys = SpinSystem::new(n_spins)?;
    nc_convergence_with(&sys, kind, chi, t_total, nc_list)
}

pub fn nc_convergence_with(
    sys: &SpinSystem,
    kind: SequenceKind,
    chi: f64,
    t_total: f64,
    nc_list: &[usize],
) -> Result<Convergence> {
    let ideal = ideal_optimum(sys, Reference::Tat)?;
    let rows = nc_list
        .par_iter()
        .map(|&n_cycles| {
            let spec = ExperimentSpec {
                scheme: Scheme::Sequence(kind),
                n_spins: sys.n_spins(),
                n_cycles,
                chi,
                t_total,
                sampling: Sampling::Stroboscopic,
            };
            let trace = run_trace_with(sys, &spec)?;
            let best = find_optimum(trace.stroboscopic())?;
            Ok(ConvergenceRow {
                n_cycles,
                xi2_best: best.xi2_min,
                t_best: best.t_opt,
                rel_error: (best.xi2_min - ideal.xi2_min).abs() / ideal.xi2_min,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Convergence { ideal, rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares fit of `ln y = exponent · ln x + intercept`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("fit needs equally many x and y values"));
    }
    if xs.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("power-law fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs at least two distinct x values"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(PowerLawFit {
        exponent,
        intercept,
        r2,
    })
}

/// Scaling of the optimal `ξ²` with spin number.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub points: Vec<(usize, Optimum)>,
    pub fit: PowerLawFit,
}

pub fn scaling_fit(reference: Reference, n_list: &[usize]) -> Result<ScalingResult> {
    if n_list.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: n_list.len(),
        });
    }
    let points = n_list
        .par_iter()
        .map(|&n| Ok((n, ideal_optimum(&SpinSystem::new(n)?, reference)?)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|(_, o)| o.xi2_min).collect();
    Ok(ScalingResult {
        fit: fit_power_law(&xs, &ys)?,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCost {
    pub kind: SequenceKind,
    pub divisor: f64,
    /// Optimal time of the unit-strength ideal dynamics, in `1/χ`.
    pub t_opt: f64,
    /// `d · t_opt / χ`.
    pub total_time: f64,
}

/// Total sequence time needed to reach optimal squeezing.
pub fn time_cost(kind: SequenceKind, n_spins: usize, chi: f64) -> Result<TimeCost> {
    if n_spins < 2 {
        return Err(Error::invalid("time cost needs at least two spins"));
    }
    let sys = SpinSystem::new(n_spins)?;
    time_cost_with(&sys, kind, chi)
}

pub fn time_cost_with(sys: &SpinSystem, kind: SequenceKind, chi: f64) -> Result<TimeCost> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::invalid(format!("chi must be positive, got {chi}")));
    }
    let divisor = kind.period_in_delta_t()?;
    let opt = ideal_optimum(sys, Reference::Tat)?;
    Ok(TimeCost {
        kind,
        divisor,
        t_opt: opt.t_opt,
        total_time: divisor * opt.t_opt / chi,
    })
}

/// Position of stroboscopic samples relative to the fine-sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    /// Boundaries with fine samples on both sides.
    pub boundaries: usize,
    pub at_or_above_median: usize,
    pub at_or_below_median: usize,
}

/// Compare each interior stroboscopic sample at `t <= t_max` with the median
/// of the fine samples in the surrounding period: the second half of the
/// period before it and the first half of the period after it. Centering the
/// window on the boundary keeps a monotone trend from biasing the comparison.
pub fn envelope_report(trace: &SqueezingTrace, t_max: f64) -> EnvelopeReport {
    let mut report = EnvelopeReport {
        boundaries: 0,
        at_or_above_median: 0,
        at_or_below_median: 0,
    };
    let mut periods: Vec<Vec<f64>> = vec![Vec::new()];
    let mut strobes = Vec::new();
    for s in trace.samples.iter().skip(1) {
        if s.stroboscopic {
            strobes.push(*s);
            periods.push(Vec::new());
        } else if let Some(last) = periods.last_mut() {
            last.push(s.xi2);
        }
    }
    for (m, s) in strobes.iter().enumerate() {
        let (before, after) = (&periods[m], &periods[m + 1]);
        if s.t > t_max || before.is_empty() || after.is_empty() {
            continue;
        }
        let h = before.len().min(after.len()).div_ceil(2);
        let mut window: Vec<f64> = before[before.len() - h..].iter().chain(&after[..h]).copied().collect();
        let med = median(&mut window);
        report.boundaries += 1;
        if s.xi2 >= med {
            report.at_or_above_median += 1;
        }
        if s.xi2 <= med {
            report.at_or_below_median += 1;
        }
    }
    report
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
