//! Exact unitary propagation in the Dicke basis.
//!
//! Three generators appear in the twisting schemes:
//!
//! * `J_z²` is diagonal, so free evolution is a phase per amplitude.
//! * `J_x` and `J_y` drive the control pulses. Both are built from a single
//!   eigendecomposition of the real tridiagonal `J_x`, using
//!   `J_y = D J_x D†` with `D = e^{-iπ J_z/2}`. The quarter turn
//!   `R_y(π/2)` is a real orthogonal matrix and is cached.
//! * `J_x² - J_y²` is real and only couples `Δm = ±2`, so it splits into two
//!   real symmetric tridiagonal blocks (even and odd basis index), each
//!   diagonalized once.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spin::{DickeState, SpinOperators, C64};
use crate::tolerance::Tolerances;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_SWEEPS: usize = 0; // 0 = no limit inside nalgebra

/// Rotation axis available to the control pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

/// Direction of a quarter-turn pulse, `θ = ±π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Turn {
    Plus,
    Minus,
}

impl Turn {
    pub fn angle(self) -> f64 {
        match self {
            Turn::Plus => FRAC_PI_2,
            Turn::Minus => -FRAC_PI_2,
        }
    }

    pub fn inverse(self) -> Turn {
        match self {
            Turn::Plus => Turn::Minus,
            Turn::Minus => Turn::Plus,
        }
    }
}

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Turn::Plus => "+",
            Turn::Minus => "-",
        })
    }
}

/// Eigendecomposition `A = V diag(λ) Vᵀ` of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenFactorization {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub source: &'static str,
}

impl EigenFactorization {
    pub fn of_symmetric(matrix: DMatrix<f64>, source: &'static str, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("eigendecomposition needs a square matrix"));
        }
        let probe = probe_vector(matrix.nrows());
        let expected = &matrix * &probe;
        let scale = matrix.amax().max(1.0);
        let eig = SymmetricEigen::try_new(matrix, EIGEN_EPS, EIGEN_MAX_SWEEPS)
            .ok_or_else(|| Error::Eigensolver(format!("no convergence for {source}")))?;
        let out = EigenFactorization {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            source,
        };
        // O(n²) spot check; the full reconstruction is exercised in tests.
        let got = out.apply_real(&probe);
        let residual = (got - expected).amax() / scale;
        if residual > tol.reconstruction {
            return Err(Error::NumericalConsistency {
                what: "eigendecomposition reconstruction",
                residual,
                tolerance: tol.reconstruction,
            });
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (mut col, &l) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= l;
        }
        scaled * v.transpose()
    }

    fn apply_real(&self, x: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.eigenvectors.tr_mul(x).component_mul(&self.eigenvalues);
        &self.eigenvectors * coeffs
    }

    /// `x ← e^{-i s A} x`.
    pub fn exp_apply(&self, x: &mut [C64], s: f64) {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.dim()];
        real_tr_matvec(&self.eigenvectors, x, &mut coeffs);
        for (c, &l) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= C64::from_polar(1.0, -s * l);
        }
        real_matvec(&self.eigenvectors, &coeffs, x);
    }

    /// Dense `e^{-i s A}`.
    pub fn exp_matrix(&self, s: f64) -> DMatrix<C64> {
        let v = self.eigenvectors.map(C64::from);
        let mut scaled = v.clone();
        for (mut col, &l) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= C64::from_polar(1.0, -s * l);
        }
        scaled * v.transpose()
    }
}

/// Factorization of `J_x² - J_y²` on its two parity blocks.
#[derive(Debug, Clone)]
pub struct TwistFactorization {
    even: EigenFactorization,
    odd: Option<EigenFactorization>,
}

impl TwistFactorization {
    pub fn new(ops: &SpinOperators, tol: &Tolerances) -> Result<Self> {
        let raise = ops.raise_coefficients();
        let dim = ops.dim();
        let block = |start: usize| {
            let idx: Vec<usize> = (start..dim).step_by(2).collect();
            let n = idx.len();
            let mut m = DMatrix::zeros(n, n);
            for b in 1..n {
                let k = idx[b];
                let v = 0.5 * raise[k] * raise[k - 1];
                m[(b - 1, b)] = v;
                m[(b, b - 1)] = v;
            }
            m
        };
        let even = EigenFactorization::of_symmetric(block(0), "twist (even parity)", tol)?;
        let odd = if dim > 1 {
            Some(EigenFactorization::of_symmetric(block(1), "twist (odd parity)", tol)?)
        } else {
            None
        };
        Ok(TwistFactorization { even, odd })
    }

    pub fn blocks(&self) -> impl Iterator<Item = (usize, &EigenFactorization)> {
        std::iter::once((0, &self.even)).chain(self.odd.as_ref().map(|f| (1, f)))
    }

    pub fn dim(&self) -> usize {
        self.even.dim() + self.odd.as_ref().map_or(0, |f| f.dim())
    }

    /// All eigenvalues of `J_x² - J_y²`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.blocks().flat_map(|(_, f)| f.eigenvalues.iter().copied()).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// `x ← e^{-i s (J_x² - J_y²)} x`.
    pub fn exp_apply(&self, x: &mut [C64], s: f64) {
        for (start, f) in self.blocks() {
            let mut sub: Vec<C64> = x[start..].iter().step_by(2).copied().collect();
            f.exp_apply(&mut sub, s);
            for (dst, v) in x[start..].iter_mut().step_by(2).zip(sub) {
                *dst = v;
            }
        }
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for (start, f) in self.blocks() {
            let r = f.reconstruct();
            for (bi, i) in (start..dim).step_by(2).enumerate() {
                for (bj, j) in (start..dim).step_by(2).enumerate() {
                    out[(i, j)] = r[(bi, bj)];
                }
            }
        }
        out
    }
}

/// Generator label of a dense [`Propagator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// `e^{-i χt J_z²}`; the parameter is `χt`.
    TwistZ,
    /// `e^{-iθ J_axis}`; the parameter is `θ`.
    Rotation(Axis),
    /// `e^{-i χt (J_x² - J_y²)}`; the parameter is `χt`.
    TwistXy,
    /// Product of other propagators.
    Composite,
}

/// Dense unitary with a record of what generated it.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub matrix: DMatrix<C64>,
    pub generator: Generator,
    pub parameter: f64,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Spectral-norm estimate of `U†U - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        let defect = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n);
        spectral_norm(&defect).value
    }

    pub fn check_unitary(&self, tol: &Tolerances) -> Result<()> {
        let residual = self.unitarity_residual();
        if residual > tol.unitarity {
            return Err(Error::NumericalConsistency {
                what: "propagator unitarity",
                residual,
                tolerance: tol.unitarity,
            });
        }
        Ok(())
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &Propagator) -> Propagator {
        Propagator {
            matrix: &self.matrix * &first.matrix,
            generator: Generator::Composite,
            parameter: f64::NAN,
        }
    }

    pub fn apply(&self, state: &DickeState) -> Result<DickeState> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(DickeState::from_raw(state.n_spins(), &self.matrix * state.amplitudes()))
    }
}

/// `a_m ← e^{-iχ m² t} a_m`.
pub fn evolve_oat(state: &DickeState, ops: &SpinOperators, chi: f64, t: f64) -> Result<DickeState> {
    if state.dim() != ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: ops.dim(),
            found: state.dim(),
        });
    }
    let mut out = state.clone();
    apply_oat_phases(out.amplitudes_mut().as_mut_slice(), ops.jz_sq_diag(), chi * t);
    Ok(out)
}

fn apply_oat_phases(x: &mut [C64], jz_sq: &[f64], chi_t: f64) {
    if chi_t == 0.0 {
        return;
    }
    for (a, &m2) in x.iter_mut().zip(jz_sq) {
        *a *= C64::from_polar(1.0, -chi_t * m2);
    }
}

/// Operators plus cached factorizations for one spin number.
///
/// Immutable once built (the twist factorization is computed on first use),
/// and shareable across threads.
#[derive(Debug)]
pub struct SpinSystem {
    ops: SpinOperators,
    tol: Tolerances,
    jx_eigen: EigenFactorization,
    /// `e^{-iπ m/2}` per basis vector.
    quarter_phase: Vec<C64>,
    /// `R_y(π/2)`; real orthogonal.
    quarter_turn_y: DMatrix<f64>,
    twist: OnceLock<std::result::Result<TwistFactorization, Error>>,
}

impl SpinSystem {
    pub fn new(n_spins: usize) -> Result<Self> {
        Self::with_tolerances(n_spins, Tolerances::DEFAULT)
    }

    pub fn with_tolerances(n_spins: usize, tol: Tolerances) -> Result<Self> {
        let ops = SpinOperators::new(n_spins)?;
        let jx_eigen = EigenFactorization::of_symmetric(ops.jx_real(), "J_x", &tol)?;
        let quarter_phase: Vec<C64> = ops
            .m_values()
            .iter()
            .map(|&m| C64::from_polar(1.0, -FRAC_PI_2 * m))
            .collect();

        // R_y(θ) = D R_x(θ) D†, entrywise d_j conj(d_k) Σ_l V_jl V_kl e^{-iθλ_l}
        let dim = ops.dim();
        let v = &jx_eigen.eigenvectors;
        let phases: Vec<C64> = jx_eigen
            .eigenvalues
            .iter()
            .map(|&l| C64::from_polar(1.0, -FRAC_PI_2 * l))
            .collect();
        let mut weighted = DMatrix::<C64>::zeros(dim, dim);
        for (l, ph) in phases.iter().enumerate() {
            for j in 0..dim {
                weighted[(j, l)] = *ph * v[(j, l)];
            }
        }
        let rx = weighted * v.transpose().map(C64::from);
        let mut quarter_turn_y = DMatrix::zeros(dim, dim);
        let mut worst_imag: f64 = 0.0;
        for k in 0..dim {
            for j in 0..dim {
                let z = quarter_phase[j] * quarter_phase[k].conj() * rx[(j, k)];
                worst_imag = worst_imag.max(z.im.abs());
                quarter_turn_y[(j, k)] = z.re;
            }
        }
        if worst_imag > tol.reconstruction {
            return Err(Error::NumericalConsistency {
                what: "R_y(π/2) should be real",
                residual: worst_imag,
                tolerance: tol.reconstruction,
            });
        }

        Ok(SpinSystem {
            ops,
            tol,
            jx_eigen,
            quarter_phase,
            quarter_turn_y,
            twist: OnceLock::new(),
        })
    }

    pub fn ops(&self) -> &SpinOperators {
        &self.ops
    }

    pub fn n_spins(&self) -> usize {
        self.ops.n_spins()
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn jx_factorization(&self) -> &EigenFactorization {
        &self.jx_eigen
    }

    /// Real orthogonal `R_y(π/2)`.
    pub fn quarter_turn_y(&self) -> &DMatrix<f64> {
        &self.quarter_turn_y
    }

    pub fn twist_factorization(&self) -> Result<&TwistFactorization> {
        self.twist
            .get_or_init(|| TwistFactorization::new(&self.ops, &self.tol))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn check_dim(&self, state: &DickeState) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(())
    }

    pub fn coherent_z(&self) -> DickeState {
        DickeState::coherent_z(self.n_spins()).expect("n_spins validated at construction")
    }

    pub fn evolve_oat(&self, state: &DickeState, chi: f64, t: f64) -> Result<DickeState> {
        evolve_oat(state, &self.ops, chi, t)
    }

    pub(crate) fn oat_in_place(&self, state: &mut DickeState, chi_t: f64) {
        apply_oat_phases(state.amplitudes_mut().as_mut_slice(), self.ops.jz_sq_diag(), chi_t);
    }

    /// `e^{-iθ J_axis}` applied to `state`.
    pub fn rotate(&self, state: &DickeState, axis: Axis, angle: f64) -> Result<DickeState> {
        self.check_dim(state)?;
        let mut out = state.clone();
        if angle == FRAC_PI_2 {
            self.pulse_in_place(&mut out, axis, Turn::Plus);
        } else if angle == -FRAC_PI_2 {
            self.pulse_in_place(&mut out, axis, Turn::Minus);
        } else {
            let x = out.amplitudes_mut().as_mut_slice();
            match axis {
                Axis::X => self.jx_eigen.exp_apply(x, angle),
                Axis::Y => {
                    // R_y = D R_x D†
                    conj_phase(x, &self.quarter_phase);
                    self.jx_eigen.exp_apply(x, angle);
                    phase(x, &self.quarter_phase);
                }
            }
        }
        Ok(out)
    }

    /// Quarter-turn pulse `R^{axis}_{±π/2}`.
    pub fn pulse(&self, state: &DickeState, axis: Axis, turn: Turn) -> Result<DickeState> {
        self.check_dim(state)?;
        let mut out = state.clone();
        self.pulse_in_place(&mut out, axis, turn);
        Ok(out)
    }

    pub(crate) fn pulse_in_place(&self, state: &mut DickeState, axis: Axis, turn: Turn) {
        let x = state.amplitudes_mut().as_mut_slice();
        let mut tmp = vec![C64::new(0.0, 0.0); x.len()];
        // R_x = D† R_y D
        if axis == Axis::X {
            phase(x, &self.quarter_phase);
        }
        match turn {
            Turn::Plus => real_matvec(&self.quarter_turn_y, x, &mut tmp),
            Turn::Minus => real_tr_matvec(&self.quarter_turn_y, x, &mut tmp),
        }
        x.copy_from_slice(&tmp);
        if axis == Axis::X {
            conj_phase(x, &self.quarter_phase);
        }
    }

    /// `e^{-iχt (J_x² - J_y²)}` applied to `state`.
    pub fn evolve_twist(&self, state: &DickeState, chi: f64, t: f64) -> Result<DickeState> {
        self.check_dim(state)?;
        let twist = self.twist_factorization()?;
        let mut out = state.clone();
        twist.exp_apply(out.amplitudes_mut().as_mut_slice(), chi * t);
        Ok(out)
    }

    /// Precompute eigen-coefficients of `initial` for repeated twist evolution.
    pub fn twist_trajectory(&self, initial: &DickeState) -> Result<TwistTrajectory<'_>> {
        self.check_dim(initial)?;
        let twist = self.twist_factorization()?;
        let x = initial.amplitudes().as_slice();
        let coefficients = twist
            .blocks()
            .map(|(start, f)| {
                let sub: Vec<C64> = x[start..].iter().step_by(2).copied().collect();
                let mut c = vec![C64::new(0.0, 0.0); f.dim()];
                real_tr_matvec(&f.eigenvectors, &sub, &mut c);
                c
            })
            .collect();
        Ok(TwistTrajectory {
            twist,
            n_spins: self.n_spins(),
            coefficients,
        })
    }

    pub fn oat_propagator(&self, chi_t: f64) -> Propagator {
        let diag = DVector::from_iterator(
            self.dim(),
            self.ops
                .jz_sq_diag()
                .iter()
                .map(|&m2| C64::from_polar(1.0, -chi_t * m2)),
        );
        Propagator {
            matrix: DMatrix::from_diagonal(&diag),
            generator: Generator::TwistZ,
            parameter: chi_t,
        }
    }

    pub fn rotation_propagator(&self, axis: Axis, angle: f64) -> Propagator {
        let mut matrix = self.jx_eigen.exp_matrix(angle);
        if axis == Axis::Y {
            let d = &self.quarter_phase;
            for k in 0..self.dim() {
                for j in 0..self.dim() {
                    matrix[(j, k)] *= d[j] * d[k].conj();
                }
            }
        }
        Propagator {
            matrix,
            generator: Generator::Rotation(axis),
            parameter: angle,
        }
    }

    pub fn twist_propagator(&self, chi_t: f64) -> Result<Propagator> {
        let twist = self.twist_factorization()?;
        let dim = self.dim();
        let mut matrix = DMatrix::<C64>::zeros(dim, dim);
        for (start, f) in twist.blocks() {
            let block = f.exp_matrix(chi_t);
            for (bi, i) in (start..dim).step_by(2).enumerate() {
                for (bj, j) in (start..dim).step_by(2).enumerate() {
                    matrix[(i, j)] = block[(bi, bj)];
                }
            }
        }
        Ok(Propagator {
            matrix,
            generator: Generator::TwistXy,
            parameter: chi_t,
        })
    }
}

/// `e^{-iχt (J_x² - J_y²)} ψ₀` for arbitrary `χt` at O(N²) per evaluation.
#[derive(Debug, Clone)]
pub struct TwistTrajectory<'a> {
    twist: &'a TwistFactorization,
    n_spins: usize,
    coefficients: Vec<Vec<C64>>,
}

impl TwistTrajectory<'_> {
    pub fn state_at(&self, chi_t: f64) -> DickeState {
        let dim = self.n_spins + 1;
        let mut out = DVector::from_element(dim, C64::new(0.0, 0.0));
        for ((start, f), c0) in self.twist.blocks().zip(&self.coefficients) {
            let c: Vec<C64> = c0
                .iter()
                .zip(f.eigenvalues.iter())
                .map(|(c, &l)| c * C64::from_polar(1.0, -chi_t * l))
                .collect();
            let mut sub = vec![C64::new(0.0, 0.0); f.dim()];
            real_matvec(&f.eigenvectors, &c, &mut sub);
            for (dst, v) in out.as_mut_slice()[start..].iter_mut().step_by(2).zip(sub) {
                *dst = v;
            }
        }
        DickeState::from_raw(self.n_spins, out)
    }
}

/// How to measure the size of an operator difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    /// Power iteration on `A†A`.
    #[default]
    Spectral,
    /// Frobenius norm; an upper bound on the spectral norm.
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 500;

/// Largest singular value by power iteration on `A†A`.
pub fn spectral_norm(a: &DMatrix<C64>) -> NormEstimate {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut v = probe_vector(n).map(C64::from);
    v.unscale_mut(v.norm());
    let mut sigma2 = 0.0;
    for it in 1..=POWER_MAX_ITER {
        let w = a * &v;
        let next = w.norm_squared();
        let mut u = a.adjoint() * w;
        let un = u.norm();
        if un == 0.0 {
            return NormEstimate {
                value: next.sqrt(),
                iterations: it,
                converged: true,
            };
        }
        u.unscale_mut(un);
        v = u;
        if (next - sigma2).abs() <= POWER_TOL * next {
            return NormEstimate {
                value: next.sqrt(),
                iterations: it,
                converged: true,
            };
        }
        sigma2 = next;
    }
    NormEstimate {
        value: sigma2.sqrt(),
        iterations: POWER_MAX_ITER,
        converged: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryDistance {
    pub value: f64,
    /// Global phase `φ` applied to the second operand.
    pub phase: f64,
    /// `tr(u2† u1)` vanished, so no phase alignment was possible (φ = 0).
    pub phase_degenerate: bool,
}

/// `min_φ ‖u1 - e^{iφ} u2‖` with `φ = arg tr(u2† u1)`.
pub fn unitary_distance(u1: &DMatrix<C64>, u2: &DMatrix<C64>) -> Result<UnitaryDistance> {
    unitary_distance_with(u1, u2, NormKind::Spectral)
}

pub fn unitary_distance_with(u1: &DMatrix<C64>, u2: &DMatrix<C64>, norm: NormKind) -> Result<UnitaryDistance> {
    if u1.shape() != u2.shape() || !u1.is_square() {
        return Err(Error::DimensionMismatch {
            expected: u1.nrows(),
            found: u2.nrows(),
        });
    }
    // tr(u2† u1) = Σ conj(u2_ij) u1_ij
    let overlap = u2.dotc(u1);
    let degenerate = overlap.norm() <= f64::EPSILON * u1.nrows() as f64;
    let phase = if degenerate { 0.0 } else { overlap.arg() };
    let diff = u1 - u2 * C64::from_polar(1.0, phase);
    let value = match norm {
        NormKind::Spectral => spectral_norm(&diff).value,
        NormKind::Frobenius => diff.norm(),
    };
    Ok(UnitaryDistance {
        value,
        phase,
        phase_degenerate: degenerate,
    })
}

/// Deterministic vector with no special alignment to any basis.
fn probe_vector(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| 1.0 + 0.5 * ((k as f64 + 1.0) * 1.618_033_988_75).sin())
}

fn phase(x: &mut [C64], d: &[C64]) {
    for (a, p) in x.iter_mut().zip(d) {
        *a *= p;
    }
}

fn conj_phase(x: &mut [C64], d: &[C64]) {
    for (a, p) in x.iter_mut().zip(d) {
        *a *= p.conj();
    }
}

/// `out = A x` for real `A`, complex `x`.
fn real_matvec(a: &DMatrix<f64>, x: &[C64], out: &mut [C64]) {
    let n = a.nrows();
    debug_assert_eq!(out.len(), n);
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for (k, xk) in x.iter().enumerate() {
        if xk.re == 0.0 && xk.im == 0.0 {
            continue;
        }
        let col = a.column(k);
        let col = col.as_slice();
        for ((r, i), &c) in re.iter_mut().zip(im.iter_mut()).zip(col) {
            *r += c * xk.re;
            *i += c * xk.im;
        }
    }
    for ((o, r), i) in out.iter_mut().zip(re).zip(im) {
        *o = C64::new(r, i);
    }
}

/// `out = Aᵀ x` for real `A`, complex `x`.
fn real_tr_matvec(a: &DMatrix<f64>, x: &[C64], out: &mut [C64]) {
    debug_assert_eq!(out.len(), a.ncols());
    for (j, o) in out.iter_mut().enumerate() {
        let col = a.column(j);
        let (mut r, mut i) = (0.0, 0.0);
        for (&c, xk) in col.as_slice().iter().zip(x) {
            r += c * xk.re;
            i += c * xk.im;
        }
        *o = C64::new(r, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    fn random_state(n: usize, seed: u64) -> DickeState {
        let amps = DVector::from_fn(n + 1, |k, _| {
            let a = (seed as f64 + 1.0) * 0.7548776662 * (k as f64 + 1.0);
            C64::new(a.sin(), (1.7 * a).cos())
        });
        DickeState::normalized(n, amps).unwrap()
    }

    /// Dense exponential by Taylor series with scaling and squaring; used as
    /// an oracle independent of the eigendecomposition route.
    fn expm_taylor(a: &DMatrix<C64>) -> DMatrix<C64> {
        let n = a.nrows();
        let norm = max_abs(a) * n as f64;
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let scaled = a / C64::from(2f64.powi(squarings as i32));
        let mut term = DMatrix::<C64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &scaled / C64::from(k as f64);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    /// `e^{-isH}` from a dense complex Hermitian eigendecomposition.
    fn expm_hermitian(h: &DMatrix<C64>, s: f64) -> DMatrix<C64> {
        let eig = SymmetricEigen::new(h.clone());
        let v = eig.eigenvectors;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, -s * l)));
        &v * d * v.adjoint()
    }

    #[test]
    fn oat_on_coherent_state_is_a_phase() {
        let sys = SpinSystem::new(8).unwrap();
        let psi = sys.coherent_z();
        let out = sys.evolve_oat(&psi, 1.3, 0.77).unwrap();
        assert_abs_diff_eq!(out.overlap(&psi), 1.0, epsilon = 1e-14);
        let same = sys.evolve_oat(&psi, 1.0, 0.0).unwrap();
        assert_eq!(same, psi);
    }

    #[test]
    fn oat_forward_backward() {
        let sys = SpinSystem::new(15).unwrap();
        let psi = random_state(15, 3);
        let fwd = sys.evolve_oat(&psi, 1.0, 0.4).unwrap();
        let back = sys.evolve_oat(&fwd, 1.0, -0.4).unwrap();
        assert!((back.amplitudes() - psi.amplitudes()).camax() <= 1e-12);
    }

    #[test]
    fn spin_half_quarter_turn() {
        let sys = SpinSystem::new(1).unwrap();
        let r = sys.rotation_propagator(Axis::Y, FRAC_PI_2).matrix;
        let c = FRAC_PI_4.cos();
        let s = FRAC_PI_4.sin();
        let expected = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]).map(C64::from);
        assert!(max_abs(&(r - expected)) <= 1e-14);
        let w = sys.quarter_turn_y();
        assert_abs_diff_eq!(w[(0, 1)], -s, epsilon = 1e-14);
        assert_abs_diff_eq!(w[(1, 0)], s, epsilon = 1e-14);
    }

    #[test]
    fn rotations_match_taylor_oracle() {
        for n in [1, 2, 5, 10] {
            let sys = SpinSystem::new(n).unwrap();
            for (axis, gen) in [(Axis::X, sys.ops().jx()), (Axis::Y, sys.ops().jy())] {
                for angle in [FRAC_PI_2, -FRAC_PI_2, 0.37, -2.1] {
                    let oracle = expm_taylor(&(gen * C64::new(0.0, -angle)));
                    let ours = sys.rotation_propagator(axis, angle).matrix;
                    assert!(max_abs(&(&ours - &oracle)) <= 1e-11, "N={n} {axis} {angle}");
                    let psi = random_state(n, 7);
                    let applied = sys.rotate(&psi, axis, angle).unwrap();
                    let dense = &oracle * psi.amplitudes();
                    assert!((applied.amplitudes() - dense).camax() <= 1e-11);
                }
            }
        }
    }

    #[test]
    fn rotation_inverse_is_identity() {
        let sys = SpinSystem::new(24).unwrap();
        let psi = random_state(24, 1);
        for axis in [Axis::X, Axis::Y] {
            for angle in [0.3, FRAC_PI_2, 2.9] {
                let there = sys.rotate(&psi, axis, angle).unwrap();
                let back = sys.rotate(&there, axis, -angle).unwrap();
                assert!((back.amplitudes() - psi.amplitudes()).camax() <= 1e-10);
                assert_abs_diff_eq!(there.norm(), 1.0, epsilon = 1e-10);
            }
            let r = sys.rotation_propagator(axis, 1.1);
            let rinv = sys.rotation_propagator(axis, -1.1);
            let id = DMatrix::<C64>::identity(25, 25);
            assert!(max_abs(&(rinv.after(&r).matrix - id)) <= 1e-10);
        }
    }

    #[test]
    fn quarter_turn_conjugation_identities() {
        for n in [1, 2, 3, 10, 21, 40] {
            let sys = SpinSystem::new(n).unwrap();
            let ops = sys.ops();
            for chi_t in [0.1, 1.0, PI] {
                let z = sys.oat_propagator(chi_t);
                for (axis, target) in [(Axis::X, ops.jy()), (Axis::Y, ops.jx())] {
                    let lhs = sys
                        .rotation_propagator(axis, -FRAC_PI_2)
                        .after(&z.after(&sys.rotation_propagator(axis, FRAC_PI_2)));
                    let rhs = expm_hermitian(&(target * target), chi_t);
                    assert!(max_abs(&(lhs.matrix - rhs)) <= 1e-9, "N={n} axis={axis} χt={chi_t}");
                }
            }
        }
    }

    #[test]
    fn propagators_are_unitary() {
        let sys = SpinSystem::new(20).unwrap();
        let tol = Tolerances::DEFAULT;
        sys.oat_propagator(0.9).check_unitary(&tol).unwrap();
        sys.rotation_propagator(Axis::X, 0.4).check_unitary(&tol).unwrap();
        sys.rotation_propagator(Axis::Y, FRAC_PI_2).check_unitary(&tol).unwrap();
        sys.twist_propagator(0.6).unwrap().check_unitary(&tol).unwrap();
    }

    #[test]
    fn twist_factorization_reconstructs() {
        for n in [1, 2, 9, 30, 101] {
            let sys = SpinSystem::new(n).unwrap();
            let twist = sys.twist_factorization().unwrap();
            let rec = twist.reconstruct();
            let source = sys.ops().twist_xy_real();
            assert!((rec - source).amax() <= 1e-8, "N={n}");
            let jx = sys.jx_factorization();
            assert!((jx.reconstruct() - sys.ops().jx_real()).amax() <= 1e-8);
        }
    }

    #[test]
    fn two_spin_twist_closed_form() {
        let sys = SpinSystem::new(2).unwrap();
        let psi = sys.coherent_z();
        let out = sys.evolve_twist(&psi, 1.0, FRAC_PI_4).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [C64::new(r, 0.0), C64::new(0.0, 0.0), C64::new(0.0, -r)];
        for (a, b) in out.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() <= 1e-12);
        }
        // independent oracle: dense Taylor exponential of J_x² - J_y²
        let oracle = expm_taylor(&(sys.ops().twist_xy() * C64::new(0.0, -FRAC_PI_4)));
        assert!((oracle * psi.amplitudes() - out.amplitudes()).camax() <= 1e-12);
        let same = sys.evolve_twist(&psi, 1.0, 0.0).unwrap();
        assert!((same.amplitudes() - psi.amplitudes()).camax() <= 1e-14);
    }

    #[test]
    fn twist_semigroup_and_trajectory() {
        let sys = SpinSystem::new(33).unwrap();
        let psi = random_state(33, 5);
        let a = sys.evolve_twist(&psi, 1.0, 0.13).unwrap();
        let ab = sys.evolve_twist(&a, 1.0, 0.29).unwrap();
        let direct = sys.evolve_twist(&psi, 1.0, 0.42).unwrap();
        assert!((ab.amplitudes() - direct.amplitudes()).camax() <= 1e-9);
        assert_abs_diff_eq!(ab.norm(), 1.0, epsilon = 1e-10);
        let traj = sys.twist_trajectory(&psi).unwrap();
        assert!((traj.state_at(0.42).amplitudes() - direct.amplitudes()).camax() <= 1e-10);
    }

    #[test]
    fn casimir_phase_equivalence() {
        // e^{-iτ(2J_x² + J_z²)} = e^{-iτ(J_x² - J_y²)} e^{-iτ J(J+1)}
        for n in [1, 4, 11, 30] {
            let sys = SpinSystem::new(n).unwrap();
            let ops = sys.ops();
            let tau = 0.37;
            let gen = ops.jx() * ops.jx() * C64::from(2.0) + ops.jz() * ops.jz();
            let lhs = expm_taylor(&(gen * C64::new(0.0, -tau)));
            let rhs = sys.twist_propagator(tau).unwrap().matrix;
            let d = unitary_distance(&lhs, &rhs).unwrap();
            assert!(d.value <= 1e-9, "N={n}: {}", d.value);
            let expected_phase = -tau * ops.casimir();
            let wrapped = (d.phase - expected_phase).rem_euclid(2.0 * PI);
            assert!(wrapped.min(2.0 * PI - wrapped) <= 1e-9);
        }
    }

    #[test]
    fn distance_is_phase_invariant() {
        let sys = SpinSystem::new(6).unwrap();
        let u = sys.twist_propagator(0.8).unwrap().matrix;
        assert!(unitary_distance(&u, &u).unwrap().value <= 1e-10);
        for phi in [0.3, -2.0, PI] {
            let shifted = &u * C64::from_polar(1.0, phi);
            assert!(unitary_distance(&u, &shifted).unwrap().value <= 1e-9);
            let fro = unitary_distance_with(&u, &shifted, NormKind::Frobenius).unwrap();
            assert!(fro.value <= 1e-9);
        }
        let v = sys.rotation_propagator(Axis::X, 0.2).matrix;
        let spec = unitary_distance(&u, &v).unwrap().value;
        let fro = unitary_distance_with(&u, &v, NormKind::Frobenius).unwrap().value;
        assert!(spec > 0.0 && spec <= fro + 1e-12);
    }

    #[test]
    fn distance_flags_degenerate_phase() {
        // Pauli X and Z are orthogonal in the trace inner product.
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).map(C64::from);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]).map(C64::from);
        let d = unitary_distance(&x, &z).unwrap();
        assert!(d.phase_degenerate);
        assert_eq!(d.phase, 0.0);
        assert_abs_diff_eq!(d.value, 2f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, -3.0),
            C64::new(1.0, 1.0),
        ]));
        let est = spectral_norm(&d);
        assert!(est.converged);
        assert_abs_diff_eq!(est.value, 3.0, epsilon = 1e-5);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = SpinSystem::new(4).unwrap();
        let other = DickeState::coherent_z(5).unwrap();
        assert!(matches!(
            sys.rotate(&other, Axis::X, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            sys.evolve_twist(&other, 1.0, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
