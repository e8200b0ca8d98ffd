//! Collective angular momentum in the symmetric (J = N/2) Dicke sector.
//!
//! Basis vectors are ordered by descending magnetic number: index `k`
//! holds `|J, m = J - k⟩`, so `|J, J⟩` is the first vector.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Spin operators for `n_spins` spin-1/2 particles in the J = N/2 sector.
///
/// The ladder coefficients and `m` values are stored directly; dense
/// matrices are materialized on first request and cached.
#[derive(Debug)]
pub struct SpinOperators {
    n_spins: usize,
    m: Vec<f64>,
    jz_sq: Vec<f64>,
    /// `raise[k]` is the coefficient of `J+ |k⟩ = raise[k] |k-1⟩`; `raise[0] = 0`.
    raise: Vec<f64>,
    dense: OnceLock<DenseOperators>,
}

#[derive(Debug)]
struct DenseOperators {
    jx: DMatrix<C64>,
    jy: DMatrix<C64>,
    jz: DMatrix<C64>,
    twist_xy: DMatrix<C64>,
}

impl Clone for SpinOperators {
    fn clone(&self) -> Self {
        SpinOperators {
            n_spins: self.n_spins,
            m: self.m.clone(),
            jz_sq: self.jz_sq.clone(),
            raise: self.raise.clone(),
            dense: OnceLock::new(),
        }
    }
}

/// Build the collective spin operators for `n_spins` spins.
pub fn build_operators(n_spins: usize) -> Result<SpinOperators> {
    SpinOperators::new(n_spins)
}

impl SpinOperators {
    pub fn new(n_spins: usize) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::invalid("n_spins must be at least 1"));
        }
        let dim = n_spins
            .checked_add(1)
            .filter(|d| d.checked_mul(*d).is_some())
            .ok_or_else(|| Error::invalid(format!("n_spins = {n_spins} overflows the basis dimension")))?;
        let j = n_spins as f64 / 2.0;
        let m: Vec<f64> = (0..dim).map(|k| j - k as f64).collect();
        let jz_sq = m.iter().map(|x| x * x).collect();
        // J(J+1) - m(m+1) = (J - m)(J + m + 1) = k (N - k + 1)
        let raise = (0..dim).map(|k| ((k * (n_spins + 1 - k)) as f64).sqrt()).collect();
        Ok(SpinOperators {
            n_spins,
            m,
            jz_sq,
            raise,
            dense: OnceLock::new(),
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.n_spins + 1
    }

    /// Total spin J = N/2.
    pub fn j(&self) -> f64 {
        self.n_spins as f64 / 2.0
    }

    /// Casimir eigenvalue J(J+1).
    pub fn casimir(&self) -> f64 {
        let j = self.j();
        j * (j + 1.0)
    }

    /// Magnetic numbers `m` in basis order.
    pub fn m_values(&self) -> &[f64] {
        &self.m
    }

    /// Diagonal of `J_z²`.
    pub fn jz_sq_diag(&self) -> &[f64] {
        &self.jz_sq
    }

    /// Raising coefficients: `J+ |k⟩ = raise[k] |k-1⟩`.
    pub fn raise_coefficients(&self) -> &[f64] {
        &self.raise
    }

    pub fn jx(&self) -> &DMatrix<C64> {
        &self.dense().jx
    }

    pub fn jy(&self) -> &DMatrix<C64> {
        &self.dense().jy
    }

    pub fn jz(&self) -> &DMatrix<C64> {
        &self.dense().jz
    }

    /// `J_x² - J_y² = (J+² + J-²)/2`; couples only Δm = ±2.
    pub fn twist_xy(&self) -> &DMatrix<C64> {
        &self.dense().twist_xy
    }

    /// Real symmetric entries of `J_x` (tridiagonal).
    pub fn jx_real(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for k in 1..dim {
            out[(k - 1, k)] = 0.5 * self.raise[k];
            out[(k, k - 1)] = 0.5 * self.raise[k];
        }
        out
    }

    /// Real symmetric entries of `J_x² - J_y²`.
    pub fn twist_xy_real(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for k in 2..dim {
            let v = 0.5 * self.raise[k] * self.raise[k - 1];
            out[(k - 2, k)] = v;
            out[(k, k - 2)] = v;
        }
        out
    }

    fn dense(&self) -> &DenseOperators {
        self.dense.get_or_init(|| {
            let dim = self.dim();
            let mut jx = DMatrix::from_element(dim, dim, ZERO);
            let mut jy = DMatrix::from_element(dim, dim, ZERO);
            let mut jz = DMatrix::from_element(dim, dim, ZERO);
            for k in 0..dim {
                jz[(k, k)] = C64::new(self.m[k], 0.0);
            }
            for k in 1..dim {
                // ⟨k-1| J+ |k⟩ = raise[k], ⟨k| J- |k-1⟩ = raise[k]
                let c = 0.5 * self.raise[k];
                jx[(k - 1, k)] = C64::new(c, 0.0);
                jx[(k, k - 1)] = C64::new(c, 0.0);
                // J_y = (J+ - J-)/(2i)
                jy[(k - 1, k)] = C64::new(0.0, -c);
                jy[(k, k - 1)] = C64::new(0.0, c);
            }
            let twist_xy = self.twist_xy_real().map(|v| C64::new(v, 0.0));
            DenseOperators { jx, jy, jz, twist_xy }
        })
    }
}

/// Normalized pure state over the Dicke basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeState {
    n_spins: usize,
    amplitudes: DVector<C64>,
}

/// The fully polarized state `|J, J⟩`.
pub fn coherent_state_z(n_spins: usize) -> Result<DickeState> {
    DickeState::coherent_z(n_spins)
}

impl DickeState {
    pub fn coherent_z(n_spins: usize) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::invalid("n_spins must be at least 1"));
        }
        let mut amplitudes = DVector::from_element(n_spins + 1, ZERO);
        amplitudes[0] = C64::new(1.0, 0.0);
        Ok(DickeState { n_spins, amplitudes })
    }

    /// Wrap amplitudes that are already normalized.
    pub fn from_amplitudes(n_spins: usize, amplitudes: DVector<C64>) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::invalid("n_spins must be at least 1"));
        }
        if amplitudes.len() != n_spins + 1 {
            return Err(Error::DimensionMismatch {
                expected: n_spins + 1,
                found: amplitudes.len(),
            });
        }
        let drift = (amplitudes.norm() - 1.0).abs();
        let tol = Tolerances::DEFAULT.norm;
        if drift > tol {
            return Err(Error::NumericalConsistency {
                what: "state normalization",
                residual: drift,
                tolerance: tol,
            });
        }
        Ok(DickeState { n_spins, amplitudes })
    }

    /// Normalize arbitrary nonzero amplitudes.
    pub fn normalized(n_spins: usize, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Self::from_amplitudes(n_spins, amplitudes.unscale(norm))
    }

    pub(crate) fn from_raw(n_spins: usize, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), n_spins + 1);
        DickeState { n_spins, amplitudes }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `|⟨self|other⟩|`, insensitive to global phase.
    pub fn overlap(&self, other: &DickeState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm()
    }
}

/// `⟨ψ|A|ψ⟩` for a Hermitian matrix `A`.
pub fn expectation(state: &DickeState, operator: &DMatrix<C64>) -> Result<f64> {
    expectation_with(state, operator, &Tolerances::DEFAULT)
}

pub fn expectation_with(state: &DickeState, operator: &DMatrix<C64>, tol: &Tolerances) -> Result<f64> {
    let dim = state.dim();
    if operator.nrows() != dim || operator.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: if operator.nrows() != dim {
                operator.nrows()
            } else {
                operator.ncols()
            },
        });
    }
    let psi = state.amplitudes();
    let value = psi.dotc(&(operator * psi));
    if value.im.abs() > tol.expectation_imag {
        return Err(Error::NumericalConsistency {
            what: "imaginary part of a Hermitian expectation value",
            residual: value.im.abs(),
            tolerance: tol.expectation_imag,
        });
    }
    Ok(value.re)
}

/// First and symmetrized second moments of `(J_x, J_y, J_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMoments {
    pub mean: [f64; 3],
    /// `⟨(J_a J_b + J_b J_a)/2⟩`.
    pub second: [[f64; 3]; 3],
}

impl SpinMoments {
    /// Evaluate all moments in O(N) from the ladder structure.
    pub fn of(state: &DickeState, ops: &SpinOperators) -> Result<Self> {
        if state.dim() != ops.dim() {
            return Err(Error::DimensionMismatch {
                expected: ops.dim(),
                found: state.dim(),
            });
        }
        let a = state.amplitudes().as_slice();
        let m = ops.m_values();
        let raise = ops.raise_coefficients();

        let mut jz = 0.0;
        let mut jz2 = 0.0;
        for (amp, &mk) in a.iter().zip(m) {
            let p = amp.norm_sqr();
            jz += p * mk;
            jz2 += p * mk * mk;
        }

        let mut jp = ZERO;
        let mut jp_jz = ZERO;
        for k in 1..a.len() {
            let t = a[k - 1].conj() * a[k] * raise[k];
            jp += t;
            jp_jz += t * (2.0 * m[k] + 1.0);
        }
        let mut jp2 = ZERO;
        for k in 2..a.len() {
            jp2 += a[k - 2].conj() * a[k] * (raise[k] * raise[k - 1]);
        }

        // J+² = J_x² - J_y² + i{J_x, J_y};  J+J- + J-J+ = 2(J² - J_z²)
        let transverse = ops.casimir() - jz2;
        let xx = 0.5 * (jp2.re + transverse);
        let yy = 0.5 * (-jp2.re + transverse);
        let xy = 0.5 * jp2.im;
        let xz = 0.5 * jp_jz.re;
        let yz = 0.5 * jp_jz.im;

        Ok(SpinMoments {
            mean: [jp.re, jp.im, jz],
            second: [[xx, xy, xz], [xy, yy, yz], [xz, yz, jz2]],
        })
    }

    /// Symmetrized covariance `⟨{J_a, J_b}⟩/2 - ⟨J_a⟩⟨J_b⟩`.
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| std::array::from_fn(|b| self.second[a][b] - self.mean[a] * self.mean[b]))
    }
}
