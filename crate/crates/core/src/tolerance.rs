/// Numerical tolerances shared by the consistency checks.
///
/// All values scale together through a single strictness factor: a factor
/// below 1 tightens every check, above 1 loosens them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `U†U = I`, spectral-norm estimate.
    pub unitarity: f64,
    /// `V diag(λ) V† = A`, max-entry norm.
    pub reconstruction: f64,
    /// Largest imaginary part tolerated in a Hermitian expectation value.
    pub expectation_imag: f64,
    /// State norm drift.
    pub norm: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        unitarity: 1e-9,
        reconstruction: 1e-8,
        expectation_imag: 1e-9,
        norm: 1e-10,
    };

    pub fn with_strictness(factor: f64) -> Self {
        assert!(
            factor.is_finite() && factor > 0.0,
            "strictness must be finite and positive"
        );
        let d = Self::DEFAULT;
        Tolerances {
            unitarity: d.unitarity * factor,
            reconstruction: d.reconstruction * factor,
            expectation_imag: d.expectation_imag * factor,
            norm: d.norm * factor,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
