//! 2×2 matrix primitives: eigenvalues, hypothesis validation, the unit
//! lower-triangular conjugator Λ and the companion transform.
//!
//! Matrices use the layout `(a b; d θ)`. Everything except
//! [`eigenvalues`] is generic over [`Scalar`] so the same code runs on
//! binary64 and on exact rationals.

use std::fmt;
use std::ops::Mul;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A 2×2 matrix `(a b; d θ)`.
///
/// Matrices of the input family are nonnegative; use [`Mat2::try_new`] to
/// enforce that. Products of companion matrices are not, so the plain
/// constructor does not check signs.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat2<T = f64> {
    pub a: T,
    pub b: T,
    pub d: T,
    pub theta: T,
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, d: T, theta: T) -> Self {
        Mat2 { a, b, d, theta }
    }

    /// Constructor that rejects negative (or, for floats, NaN) entries.
    pub fn try_new(a: T, b: T, d: T, theta: T) -> Result<Self> {
        let m = Mat2 { a, b, d, theta };
        if m.is_nonnegative() {
            Ok(m)
        } else {
            Err(Error::Domain(format!("matrix {m:?} has a negative entry")))
        }
    }

    pub fn identity() -> Self {
        Mat2::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn is_nonnegative(&self) -> bool {
        let zero = T::zero();
        self.entries().iter().all(|x| *x >= zero)
    }

    pub fn entries(&self) -> [T; 4] {
        [
            self.a.clone(),
            self.b.clone(),
            self.d.clone(),
            self.theta.clone(),
        ]
    }

    pub fn from_entries([a, b, d, theta]: [T; 4]) -> Self {
        Mat2 { a, b, d, theta }
    }

    pub fn trace(&self) -> T {
        self.a.clone() + self.theta.clone()
    }

    /// `aθ − bd`, the determinant of the displayed layout.
    pub fn det(&self) -> T {
        self.a.clone() * self.theta.clone() - self.b.clone() * self.d.clone()
    }

    /// Entry `(i, j)` with 1-based indices.
    pub fn entry(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (1, 1) => self.a.clone(),
            (1, 2) => self.b.clone(),
            (2, 1) => self.d.clone(),
            (2, 2) => self.theta.clone(),
            _ => panic!("matrix index ({i}, {j}) out of range"),
        }
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_apply(&self, v: &[T; 2]) -> [T; 2] {
        [
            v[0].clone() * self.a.clone() + v[1].clone() * self.d.clone(),
            v[0].clone() * self.b.clone() + v[1].clone() * self.theta.clone(),
        ]
    }

    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> Mat2<U> {
        Mat2 {
            a: f(&self.a),
            b: f(&self.b),
            d: f(&self.d),
            theta: f(&self.theta),
        }
    }

    pub fn to_f64(&self) -> Mat2<f64> {
        self.map(Scalar::to_f64_lossy)
    }
}

impl<T: Scalar> Mul for &Mat2<T> {
    type Output = Mat2<T>;

    fn mul(self, rhs: &Mat2<T>) -> Mat2<T> {
        let row1 = rhs.left_apply(&[self.a.clone(), self.b.clone()]);
        let row2 = rhs.left_apply(&[self.d.clone(), self.theta.clone()]);
        let [a, b] = row1;
        let [d, theta] = row2;
        Mat2 { a, b, d, theta }
    }
}

impl<T: fmt::Display> fmt::Display for Mat2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}; {} {})", self.a, self.b, self.d, self.theta)
    }
}

/// Eigenvalues of a 2×2 matrix, `rho ≥ rho1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub rho: f64,
    pub rho1: f64,
}

impl Eigenpair {
    /// `|rho1| / rho`, the asymptotic contraction ratio.
    pub fn ratio(&self) -> f64 {
        self.rho1.abs() / self.rho
    }

    pub fn gap(&self) -> f64 {
        self.rho - self.rho1
    }
}

/// Relative tolerance under which a slightly negative discriminant is read as 0.
pub const DISCRIMINANT_TOLERANCE: f64 = 1e-14;

/// Real eigenvalues by the quadratic formula.
///
/// The discriminant `(a+θ)² + 4(bd − aθ)` is evaluated in the equivalent
/// form `(a−θ)² + 4bd`. The smaller-magnitude root is recovered from the
/// determinant to avoid cancellation.
pub fn eigenvalues(m: &Mat2<f64>) -> Result<Eigenpair> {
    let trace = m.a + m.theta;
    let det = m.a * m.theta - m.b * m.d;
    let mut disc = (m.a - m.theta).powi(2) + 4.0 * m.b * m.d;
    if disc.is_nan() {
        return Err(Error::NegativeDiscriminant { discriminant: disc });
    }
    if disc < 0.0 {
        if disc > -DISCRIMINANT_TOLERANCE * trace * trace {
            disc = 0.0;
        } else {
            return Err(Error::NegativeDiscriminant { discriminant: disc });
        }
    }
    let root = disc.sqrt();
    let (big, small) = if trace >= 0.0 {
        let big = 0.5 * (trace + root);
        let small = if big != 0.0 {
            det / big
        } else {
            0.5 * (trace - root)
        };
        (big, small)
    } else {
        let small = 0.5 * (trace - root);
        let big = if small != 0.0 {
            det / small
        } else {
            0.5 * (trace + root)
        };
        (big, small)
    };
    let (rho, rho1) = if big >= small {
        (big, small)
    } else {
        (small, big)
    };
    Ok(Eigenpair { rho, rho1 })
}

/// Spectral radius `max(|rho|, |rho1|)` for matrices with real spectrum.
pub fn spectral_radius(m: &Mat2<f64>) -> Result<f64> {
    let e = eigenvalues(m)?;
    Ok(e.rho.abs().max(e.rho1.abs()))
}

/// Outcome of checking `a+θ ≠ 0`, `b ≠ 0` and `bd ≠ aθ` on a limit matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    pub trace_nonzero: bool,
    pub b_nonzero: bool,
    pub det_nonzero: bool,
    /// Sign of `bd − aθ`: -1, 0 or +1.
    pub det_sign: i8,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.trace_nonzero && self.b_nonzero && self.det_nonzero
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.trace_nonzero {
            out.push("a+θ=0");
        }
        if !self.b_nonzero {
            out.push("b=0");
        }
        if !self.det_nonzero {
            out.push("bd=aθ");
        }
        out
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passes() {
            Ok(self)
        } else {
            Err(Error::Validation(self.failures().join(", ")))
        }
    }
}

pub fn validate_limit_matrix<T: Scalar>(m: &Mat2<T>) -> ValidationReport {
    let gap = m.b.clone() * m.d.clone() - m.a.clone() * m.theta.clone();
    let det_sign = if gap.is_zero() {
        0
    } else if gap > T::zero() {
        1
    } else {
        -1
    };
    ValidationReport {
        trace_nonzero: !m.trace().is_zero(),
        b_nonzero: !m.b.is_zero(),
        det_nonzero: det_sign != 0,
        det_sign,
    }
}

/// The transformed matrix `(ã b̃; d̃ 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMat<T = f64> {
    pub a_tilde: T,
    pub b_tilde: T,
    pub d_tilde: T,
}

impl<T: Scalar> CompanionMat<T> {
    pub fn as_mat2(&self) -> Mat2<T> {
        Mat2::new(
            self.a_tilde.clone(),
            self.b_tilde.clone(),
            self.d_tilde.clone(),
            T::zero(),
        )
    }

    pub fn det(&self) -> T {
        -(self.b_tilde.clone() * self.d_tilde.clone())
    }
}

/// Companion matrix built from `M_k` (index `k`) and `M_{k+1}`:
/// `ã = a_k + b_k θ_{k+1}/b_{k+1}`, `b̃ = b_k`, `d̃ = d_k − a_k θ_k / b_k`.
pub fn companion<T: Scalar>(m_k: &Mat2<T>, m_k1: &Mat2<T>, k: usize) -> Result<CompanionMat<T>> {
    if m_k.b.is_singular() {
        return Err(Error::ZeroB { index: k });
    }
    if m_k1.b.is_singular() {
        return Err(Error::ZeroB { index: k + 1 });
    }
    let a_tilde = m_k.a.clone() + m_k.b.clone() * m_k1.theta.clone() / m_k1.b.clone();
    let d_tilde = m_k.d.clone() - m_k.a.clone() * m_k.theta.clone() / m_k.b.clone();
    Ok(CompanionMat {
        a_tilde,
        b_tilde: m_k.b.clone(),
        d_tilde,
    })
}

/// The conjugator `Λ = (1 0; θ/b 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambda<T = f64> {
    pub sub: T,
}

impl<T: Scalar> Lambda<T> {
    pub fn matrix(&self) -> Mat2<T> {
        Mat2::new(T::one(), T::zero(), self.sub.clone(), T::one())
    }

    pub fn inverse(&self) -> Mat2<T> {
        Mat2::new(T::one(), T::zero(), -self.sub.clone(), T::one())
    }
}

/// `Λ` for the matrix at index `k`.
pub fn lambda_of<T: Scalar>(m: &Mat2<T>, k: usize) -> Result<Lambda<T>> {
    if m.b.is_singular() {
        return Err(Error::ZeroB { index: k });
    }
    Ok(Lambda {
        sub: m.theta.clone() / m.b.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};
    use num_traits::{Signed, Zero};
    use proptest::prelude::*;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn m(a: f64, b: f64, d: f64, t: f64) -> Mat2 {
        Mat2::new(a, b, d, t)
    }

    fn q(a: i64, b: i64, d: i64, t: i64) -> Mat2<Rational> {
        Mat2::new(ratio(a, 1), ratio(b, 1), ratio(d, 1), ratio(t, 1))
    }

    // Naive quadratic formula on x² − tr·x + det, used as an independent check.
    fn naive_roots(m: &Mat2) -> (f64, f64) {
        let tr = m.a + m.theta;
        let det = m.a * m.theta - m.b * m.d;
        let s = (tr * tr - 4.0 * det).sqrt();
        ((tr + s) / 2.0, (tr - s) / 2.0)
    }

    #[test]
    fn eigenvalues_examples() {
        let e = eigenvalues(&m(1.0, 1.0, 1.0, 0.0)).unwrap();
        assert!((e.rho - GOLDEN).abs() < 1e-15);
        assert!((e.rho1 - (1.0 - GOLDEN)).abs() < 1e-15);
        let (r, r1) = naive_roots(&m(1.0, 1.0, 1.0, 0.0));
        assert!((e.rho - r).abs() < 1e-15 && (e.rho1 - r1).abs() < 1e-15);

        let e = eigenvalues(&m(1.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!((e.rho, e.rho1), (1.0, 1.0));

        let e = eigenvalues(&m(2.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((e.rho - 2.618_033_988_749_895).abs() < 1e-15);
        assert!((e.rho1 - 0.381_966_011_250_105_1).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_negative_discriminant() {
        // Rotation-like matrix with complex spectrum.
        let err = eigenvalues(&m(0.0, 1.0, -1.0, 0.0)).unwrap_err();
        match err {
            Error::NegativeDiscriminant { discriminant } => assert_eq!(discriminant, -4.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eigenvalues_tiny_negative_discriminant_is_zero() {
        // (a−θ)² + 4bd = -1e-17 after rounding-sized perturbation of b·d.
        let e = eigenvalues(&m(1.0, 1e-17, -1.0, 1.0)).unwrap();
        assert_eq!(e.rho, 1.0);
        assert_eq!(e.rho1, 1.0);
    }

    #[test]
    fn validation_examples() {
        let r = validate_limit_matrix(&m(1.0, 1.0, 1.0, 0.0));
        assert!(r.passes());
        assert_eq!(r.det_sign, 1);

        let r = validate_limit_matrix(&m(1.0, 1.0, 1.0, 1.0));
        assert!(!r.passes());
        assert_eq!(r.failures(), vec!["bd=aθ"]);

        let r = validate_limit_matrix(&m(0.0, 1.0, 1.0, 0.0));
        assert!(!r.passes());
        assert_eq!(r.failures(), vec!["a+θ=0"]);

        let r = validate_limit_matrix(&m(1.0, 0.0, 1.0, 2.0));
        assert_eq!(r.failures(), vec!["b=0"]);
        assert!(matches!(r.into_result(), Err(Error::Validation(_))));
    }

    #[test]
    fn companion_examples() {
        let fib = q(1, 1, 1, 0);
        let c = companion(&fib, &fib, 1).unwrap();
        assert_eq!(c.as_mat2(), q(1, 1, 1, 0));

        let m2 = q(2, 1, 1, 1);
        let c = companion(&m2, &m2, 1).unwrap();
        assert_eq!(
            (c.a_tilde, c.b_tilde, c.d_tilde),
            (ratio(3, 1), ratio(1, 1), ratio(-1, 1))
        );

        let c = companion(&q(1, 2, 3, 4), &q(5, 6, 7, 8), 1).unwrap();
        assert_eq!(
            (c.a_tilde, c.b_tilde, c.d_tilde),
            (ratio(11, 3), ratio(2, 1), ratio(1, 1))
        );
    }

    #[test]
    fn companion_zero_b_names_index() {
        let bad = q(1, 0, 1, 1);
        let good = q(1, 1, 1, 0);
        assert!(matches!(
            companion(&bad, &good, 7),
            Err(Error::ZeroB { index: 7 })
        ));
        assert!(matches!(
            companion(&good, &bad, 7),
            Err(Error::ZeroB { index: 8 })
        ));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_of(&q(1, 1, 1, 0), 1).unwrap().sub, ratio(0, 1));
        assert_eq!(lambda_of(&q(2, 1, 1, 1), 1).unwrap().sub, ratio(1, 1));
        let l = lambda_of(&q(1, 2, 3, 4), 1).unwrap();
        assert_eq!(l.sub, ratio(2, 1));
        assert_eq!(&l.matrix() * &l.inverse(), Mat2::identity());
        assert!(matches!(
            lambda_of(&q(1, 0, 3, 4), 3),
            Err(Error::ZeroB { index: 3 })
        ));
    }

    #[test]
    fn companion_shares_spectrum_for_constant_sequence() {
        for mm in [
            m(1.0, 1.0, 1.0, 0.0),
            m(2.0, 1.0, 1.0, 1.0),
            m(0.5, 3.0, 0.25, 2.0),
        ] {
            let c = companion(&mm, &mm, 1).unwrap().as_mat2();
            let (e1, e2) = (eigenvalues(&mm).unwrap(), eigenvalues(&c).unwrap());
            assert!((e1.rho - e2.rho).abs() < 1e-12 && (e1.rho1 - e2.rho1).abs() < 1e-12);
        }
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (0i64..40, 1i64..9).prop_map(|(n, d)| ratio(n, d))
    }

    fn positive_rational() -> impl Strategy<Value = Rational> {
        (1i64..40, 1i64..9).prop_map(|(n, d)| ratio(n, d))
    }

    fn rational_mat() -> impl Strategy<Value = Mat2<Rational>> {
        (
            small_rational(),
            positive_rational(),
            small_rational(),
            small_rational(),
        )
            .prop_map(|(a, b, d, t)| Mat2::new(a, b, d, t))
    }

    proptest! {
        #[test]
        fn quasi_similarity_is_exact(mk in rational_mat(), mk1 in rational_mat()) {
            let c = companion(&mk, &mk1, 1).unwrap();
            let lk = lambda_of(&mk, 1).unwrap();
            let lk1 = lambda_of(&mk1, 2).unwrap();
            let conj = &(&lk.inverse() * &mk) * &lk1.matrix();
            prop_assert!(conj.theta.is_zero());
            prop_assert_eq!(conj, c.as_mat2());
        }

        #[test]
        fn eigen_reconstructs_trace_and_det(
            a in 0.0f64..1e3, b in 0.0f64..1e3, d in 0.0f64..1e3, t in 0.0f64..1e3
        ) {
            let mm = m(a, b, d, t);
            let e = eigenvalues(&mm).unwrap();
            prop_assert!(e.rho >= e.rho1);
            let scale = (a + t).abs().max((a * t).abs() + (b * d).abs()).max(1e-300);
            let tr_err = (e.rho + e.rho1 - (a + t)).abs() / (a + t).abs().max(1e-300);
            let det_err = (e.rho * e.rho1 - (a * t - b * d)).abs() / scale;
            prop_assert!(tr_err <= 1e-12, "trace err {}", tr_err);
            prop_assert!(det_err <= 1e-12, "det err {}", det_err);
        }

        #[test]
        fn sign_law_of_d_tilde(mm in rational_mat()) {
            let r = validate_limit_matrix(&mm);
            prop_assume!(r.passes());
            let c = companion(&mm, &mm, 1).unwrap();
            let sign = if c.d_tilde.is_positive() { 1 } else if c.d_tilde.is_negative() { -1 } else { 0 };
            prop_assert_eq!(sign, r.det_sign);
        }
    }
}
