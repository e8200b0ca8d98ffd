//! Kitagawa-Ueda squeezing parameter `ξ² = 2 (ΔJ_⊥)²_min / J`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spin::{DickeState, SpinMoments, SpinOperators};

/// Mean spin shorter than this fraction of `J` leaves the transverse plane undefined.
pub const MEAN_SPIN_EPS: f64 = 1e-8;

pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn quad(c: &[[f64; 3]; 3], u: &Vec3, v: &Vec3) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            acc += u[a] * c[a][b] * v[b];
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingSample {
    pub t: f64,
    pub xi2: f64,
    pub mean_spin: Vec3,
    /// Unit vector normal to the mean spin along which the variance is smallest.
    pub min_variance_direction: Vec3,
    /// Sample taken at a period boundary.
    pub stroboscopic: bool,
}

impl SqueezingSample {
    pub fn at(mut self, t: f64, stroboscopic: bool) -> Self {
        self.t = t;
        self.stroboscopic = stroboscopic;
        self
    }
}

/// Deterministic orthonormal pair spanning the plane normal to `n0`.
///
/// The first vector is the projection of the canonical axis least aligned
/// with `n0`.
pub fn transverse_basis(n0: &Vec3) -> (Vec3, Vec3) {
    let mut axis = 0;
    for k in 1..3 {
        if n0[k].abs() < n0[axis].abs() {
            axis = k;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let p = dot(&e, n0);
    let raw = [e[0] - p * n0[0], e[1] - p * n0[1], e[2] - p * n0[2]];
    let n1 = scale(&raw, 1.0 / norm(&raw));
    let n2 = cross(n0, &n1);
    (n1, n2)
}

/// `ξ²` of `state`, using the default transverse basis.
pub fn squeezing_parameter(state: &DickeState, ops: &SpinOperators) -> Result<SqueezingSample> {
    let moments = SpinMoments::of(state, ops)?;
    squeezing_from_moments(&moments, ops.j(), None)
}

/// `ξ²` from precomputed moments; `basis` overrides the transverse pair.
pub fn squeezing_from_moments(moments: &SpinMoments, j: f64, basis: Option<(Vec3, Vec3)>) -> Result<SqueezingSample> {
    let mean = moments.mean;
    let length = norm(&mean);
    if length.is_nan() || length <= MEAN_SPIN_EPS * j {
        return Err(Error::MeanSpinVanishing {
            norm: length,
            sample: None,
        });
    }
    let n0 = scale(&mean, 1.0 / length);
    let (n1, n2) = basis.unwrap_or_else(|| transverse_basis(&n0));
    let cov = moments.covariance();
    let a = quad(&cov, &n1, &n1);
    let b = quad(&cov, &n1, &n2);
    let c = quad(&cov, &n2, &n2);

    let half_gap = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lambda_min = 0.5 * (a + c) - half_gap;
    // eigenvector of [[a, b], [b, c]] for lambda_min
    let (u, v) = if half_gap <= 1e-14 * (a.abs() + c.abs()).max(f64::MIN_POSITIVE) {
        (1.0, 0.0)
    } else {
        let p = (b, lambda_min - a);
        let q = (lambda_min - c, b);
        if p.0.hypot(p.1) >= q.0.hypot(q.1) {
            p
        } else {
            q
        }
    };
    let l = u.hypot(v);
    let dir = [
        (u * n1[0] + v * n2[0]) / l,
        (u * n1[1] + v * n2[1]) / l,
        (u * n1[2] + v * n2[2]) / l,
    ];
    Ok(SqueezingSample {
        t: 0.0,
        xi2: (2.0 * lambda_min / j).max(0.0),
        mean_spin: mean,
        min_variance_direction: dir,
        stroboscopic: true,
    })
}

/// `(ΔJ_n)²` along a fixed unit vector `n`.
pub fn variance_along(moments: &SpinMoments, n: &Vec3) -> f64 {
    quad(&moments.covariance(), n, n)
}

/// How a trace is sampled in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Period boundaries only.
    #[default]
    Stroboscopic,
    /// Period boundaries plus `k` equally spaced interior points per period.
    Fine(usize),
}

impl Sampling {
    pub fn subsamples(self) -> usize {
        match self {
            Sampling::Stroboscopic => 0,
            Sampling::Fine(k) => k,
        }
    }
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampling::Stroboscopic => f.write_str("stroboscopic"),
            Sampling::Fine(k) => write!(f, "fine({k})"),
        }
    }
}

impl FromStr for Sampling {
    type Err = Error;

    /// Accepts `stroboscopic`, `fine(k)` and `fine:k`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("stroboscopic") || s.eq_ignore_ascii_case("strobe") {
            return Ok(Sampling::Stroboscopic);
        }
        let k = s
            .strip_prefix("fine(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("fine:"))
            .ok_or_else(|| Error::invalid(format!("unknown sampling '{s}'")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad subsample count in '{s}'")))?;
        if k == 0 {
            return Err(Error::invalid("fine sampling needs at least one subsample"));
        }
        Ok(Sampling::Fine(k))
    }
}

/// Time-ordered squeezing samples of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezingTrace {
    pub label: String,
    pub n_spins: usize,
    pub n_cycles: usize,
    pub sampling: Sampling,
    pub samples: Vec<SqueezingSample>,
}

impl SqueezingTrace {
    pub fn stroboscopic(&self) -> impl Iterator<Item = &SqueezingSample> {
        self.samples.iter().filter(|s| s.stroboscopic)
    }

    pub fn is_time_ordered(&self) -> bool {
        self.samples.windows(2).all(|w| w[0].t < w[1].t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub t_opt: f64,
    pub xi2_min: f64,
}

/// Smallest `ξ²` in `samples`; ties go to the earliest sample.
pub fn find_optimum<'a>(samples: impl IntoIterator<Item = &'a SqueezingSample>) -> Result<Optimum> {
    let mut best: Option<&SqueezingSample> = None;
    for s in samples {
        if best.is_none_or(|b| s.xi2 < b.xi2) {
            best = Some(s);
        }
    }
    best.map(|s| Optimum {
        t_opt: s.t,
        xi2_min: s.xi2,
    })
    .ok_or(Error::EmptyTrace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::{Axis, SpinSystem};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    use crate::spin::C64;

    fn random_state(n: usize, seed: u64) -> DickeState {
        let amps = DVector::from_fn(n + 1, |k, _| {
            let a = (seed as f64 + 0.5) * 0.618_034 * (k as f64 + 1.0);
            C64::new(a.cos() * (-(k as f64) / 4.0).exp(), a.sin() * 0.3)
        });
        DickeState::normalized(n, amps).unwrap()
    }

    /// Brute-force minimum of the transverse variance by scanning angles.
    fn scan_xi2(state: &DickeState, ops: &SpinOperators) -> f64 {
        let m = SpinMoments::of(state, ops).unwrap();
        let n0 = scale(&m.mean, 1.0 / norm(&m.mean));
        let (n1, n2) = transverse_basis(&n0);
        let mut best = f64::INFINITY;
        for i in 0..20_000 {
            let phi = std::f64::consts::PI * i as f64 / 20_000.0;
            let d = [
                phi.cos() * n1[0] + phi.sin() * n2[0],
                phi.cos() * n1[1] + phi.sin() * n2[1],
                phi.cos() * n1[2] + phi.sin() * n2[2],
            ];
            best = best.min(variance_along(&m, &d));
        }
        2.0 * best / ops.j()
    }

    #[test]
    fn coherent_state_is_unsqueezed() {
        for n in [1, 2, 10, 100] {
            let sys = SpinSystem::new(n).unwrap();
            let s = squeezing_parameter(&sys.coherent_z(), sys.ops()).unwrap();
            assert_abs_diff_eq!(s.xi2, 1.0, epsilon = 1e-9);
            assert_eq!(s.mean_spin, [0.0, 0.0, n as f64 / 2.0]);
            // degenerate covariance: first transverse basis vector
            let (n1, _) = transverse_basis(&[0.0, 0.0, 1.0]);
            assert_eq!(s.min_variance_direction, n1);
        }
    }

    #[test]
    fn rotated_coherent_states_stay_unsqueezed() {
        let sys = SpinSystem::new(12).unwrap();
        for theta in [0.2, 1.0, std::f64::consts::FRAC_PI_2, 2.5] {
            let psi = sys.rotate(&sys.coherent_z(), Axis::Y, theta).unwrap();
            let s = squeezing_parameter(&psi, sys.ops()).unwrap();
            assert_abs_diff_eq!(s.xi2, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_spin_closed_form_against_scan() {
        let sys = SpinSystem::new(2).unwrap();
        for chi_t in [0.05, 0.2, 0.5, 0.7] {
            let psi = sys.evolve_twist(&sys.coherent_z(), 1.0, chi_t).unwrap();
            let s = squeezing_parameter(&psi, sys.ops()).unwrap();
            let closed = 1.0 - (2.0 * chi_t).sin().abs();
            assert_abs_diff_eq!(s.xi2, closed, epsilon = 1e-10);
            assert_abs_diff_eq!(scan_xi2(&psi, sys.ops()), closed, epsilon = 1e-6);
        }
    }

    #[test]
    fn vanishing_mean_spin_is_an_error() {
        let sys = SpinSystem::new(2).unwrap();
        let psi = sys
            .evolve_twist(&sys.coherent_z(), 1.0, std::f64::consts::FRAC_PI_4)
            .unwrap();
        let err = squeezing_parameter(&psi, sys.ops()).unwrap_err();
        assert!(matches!(err, Error::MeanSpinVanishing { sample: None, .. }));
        assert!(matches!(
            err.at_sample(7),
            Error::MeanSpinVanishing { sample: Some(7), .. }
        ));
    }

    #[test]
    fn direction_is_orthogonal_to_mean_spin() {
        let sys = SpinSystem::new(40).unwrap();
        let psi = sys.evolve_twist(&sys.coherent_z(), 1.0, 0.02).unwrap();
        let s = squeezing_parameter(&psi, sys.ops()).unwrap();
        assert!(s.xi2 < 1.0);
        assert!(dot(&s.min_variance_direction, &s.mean_spin).abs() <= 1e-9);
        assert_abs_diff_eq!(norm(&s.min_variance_direction), 1.0, epsilon = 1e-12);
        let m = SpinMoments::of(&psi, sys.ops()).unwrap();
        assert_abs_diff_eq!(
            2.0 * variance_along(&m, &s.min_variance_direction) / sys.ops().j(),
            s.xi2,
            epsilon = 1e-10
        );
    }

    #[test]
    fn optimum_prefers_earliest_tie() {
        let mk = |t: f64, xi2: f64| SqueezingSample {
            t,
            xi2,
            mean_spin: [0.0, 0.0, 1.0],
            min_variance_direction: [1.0, 0.0, 0.0],
            stroboscopic: true,
        };
        let samples = [mk(0.0, 1.0), mk(1.0, 0.4), mk(2.0, 0.2), mk(3.0, 0.2), mk(4.0, 0.6)];
        let opt = find_optimum(&samples).unwrap();
        assert_eq!((opt.t_opt, opt.xi2_min), (2.0, 0.2));
        assert!(matches!(find_optimum(&[]), Err(Error::EmptyTrace)));
    }

    #[test]
    fn sampling_parse() {
        assert_eq!("stroboscopic".parse::<Sampling>().unwrap(), Sampling::Stroboscopic);
        assert_eq!("fine(8)".parse::<Sampling>().unwrap(), Sampling::Fine(8));
        assert_eq!("fine:3".parse::<Sampling>().unwrap(), Sampling::Fine(3));
        assert!("fine(0)".parse::<Sampling>().is_err());
        assert!("sometimes".parse::<Sampling>().is_err());
        assert_eq!(Sampling::Fine(8).to_string(), "fine(8)");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn basis_invariance(seed in 0u64..10_000, phi in 0.0f64..std::f64::consts::TAU) {
            let sys = SpinSystem::new(14).unwrap();
            let psi = random_state(14, seed);
            let m = SpinMoments::of(&psi, sys.ops()).unwrap();
            let a = squeezing_from_moments(&m, sys.ops().j(), None).unwrap();
            let n0 = scale(&m.mean, 1.0 / norm(&m.mean));
            let (n1, n2) = transverse_basis(&n0);
            let r1 = [
                phi.cos() * n1[0] + phi.sin() * n2[0],
                phi.cos() * n1[1] + phi.sin() * n2[1],
                phi.cos() * n1[2] + phi.sin() * n2[2],
            ];
            let r2 = cross(&n0, &r1);
            let b = squeezing_from_moments(&m, sys.ops().j(), Some((r1, r2))).unwrap();
            prop_assert!((a.xi2 - b.xi2).abs() <= 1e-10);
            // λ_min is a minimum over transverse directions
            prop_assert!(a.xi2 <= 2.0 * variance_along(&m, &r1) / sys.ops().j() + 1e-12);
        }

        #[test]
        fn rotational_covariance(seed in 0u64..10_000, angle in -3.0f64..3.0, y_axis in any::<bool>()) {
            let sys = SpinSystem::new(10).unwrap();
            let psi = random_state(10, seed);
            let axis = if y_axis { Axis::Y } else { Axis::X };
            let rotated = sys.rotate(&psi, axis, angle).unwrap();
            let a = squeezing_parameter(&psi, sys.ops()).unwrap().xi2;
            let b = squeezing_parameter(&rotated, sys.ops()).unwrap().xi2;
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}
