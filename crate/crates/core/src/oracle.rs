//! Exact rational reference implementations.
//!
//! Everything here works on [`Rational`] with plain repeated multiplication
//! and is only meant to certify the binary64 path at small depths.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::{companion_at, companion_product, Entry};
use crate::contfrac::{approximant, CfCoeffs, CoeffTable};
use crate::error::{Error, Result};
use crate::mat2::{validate_limit_matrix, Mat2};
use crate::scalar::{ratio, Rational};
use crate::sequences::{MatrixSource, TableSequence};

pub type RationalMat2 = Mat2<Rational>;
pub type RationalSequence = TableSequence<Rational>;

/// Default depth cap for exact products.
pub const DEFAULT_ORACLE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub depth_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            depth_cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl OracleConfig {
    fn check(&self, n: usize) -> Result<()> {
        if n > self.depth_cap {
            return Err(Error::CapExceeded {
                requested: n,
                cap: self.depth_cap,
            });
        }
        Ok(())
    }
}

/// Exact `e_i M_{k+1}⋯M_{k+n} e_jᵗ` by full matrix multiplication.
pub fn exact_product_entry(
    seq: &impl MatrixSource<Rational>,
    k: usize,
    n: usize,
    entry: Entry,
    cfg: &OracleConfig,
) -> Result<Rational> {
    cfg.check(n)?;
    let mut acc = Mat2::identity();
    for m in k + 1..=k + n {
        acc = &acc * &seq.matrix(m);
    }
    Ok(acc.entry(entry.row(), entry.col()))
}

/// Exact `e_i A_{k+1}⋯A_{k+n} e_jᵗ`.
pub fn exact_companion_product_entry(
    seq: &impl MatrixSource<Rational>,
    k: usize,
    n: usize,
    entry: Entry,
    cfg: &OracleConfig,
) -> Result<Rational> {
    cfg.check(n)?;
    Ok(companion_product(seq, k, n)?.entry(entry.row(), entry.col()))
}

/// Exact approximant `ξ_{k,n}`.
pub fn exact_approximant(cf: &impl CfCoeffs<Rational>, k: usize, n: usize) -> Result<Rational> {
    approximant(cf, k, n)
}

/// `y_{k,n} = e₁A_k⋯A_n e₁ᵗ`, with `y_{n+1,n} = 1`.
pub fn exact_y(seq: &impl MatrixSource<Rational>, k: usize, n: usize) -> Result<Rational> {
    if k == 0 || k > n + 1 {
        return Err(Error::InvalidArgument(format!(
            "y needs 1 <= k <= n+1, got k={k}, n={n}"
        )));
    }
    Ok(companion_product(seq, k - 1, n + 1 - k)?.a)
}

/// Coefficients built from companion entries: `(ã_k/(b̃_k d̃_{k+1}), 1/(b̃_k d̃_{k+1}))`.
pub fn companion_coeffs(
    seq: &impl MatrixSource<Rational>,
    k: usize,
) -> Result<(Rational, Rational)> {
    let c = companion_at(seq, k)?;
    let next = companion_at(seq, k + 1)?;
    let den = c.b_tilde.clone() * next.d_tilde.clone();
    if den == ratio(0, 1) {
        return Err(Error::DegenerateIndex { index: k + 1 });
    }
    Ok((c.a_tilde / den.clone(), ratio(1, 1) / den))
}

/// Both sides of
/// `ξ_{k,n+1} − ξ_{k,n} = −b̃_k d̃_{n+1} ∏_{j=k+1}^{n} det(A_j) / (A_{k,n}(11) A_{k,n+1}(11))`
/// where `A_{k,n} = A_k⋯A_n`.
pub fn exact_monotonicity_identity(
    seq: &impl MatrixSource<Rational>,
    cf: &impl CfCoeffs<Rational>,
    k: usize,
    n: usize,
) -> Result<(Rational, Rational)> {
    let lhs = approximant(cf, k, n + 1)? - approximant(cf, k, n)?;
    let mut dets = ratio(1, 1);
    for j in k + 1..=n {
        dets *= companion_at(seq, j)?.det();
    }
    let ck = companion_at(seq, k)?;
    let cn1 = companion_at(seq, n + 1)?;
    let num = -(ck.b_tilde * cn1.d_tilde) * dets;
    let den = exact_y(seq, k, n)? * exact_y(seq, k, n + 1)?;
    Ok((lhs, num / den))
}

/// Exact approximants at depths `depth` and `depth + 1` starting at `k`,
/// ordered `(low, high)`. For positive coefficient streams the tail lies
/// between them.
pub fn tail_enclosure(
    cf: &impl CfCoeffs<Rational>,
    k: usize,
    depth: usize,
) -> Result<(Rational, Rational)> {
    let x = approximant(cf, k, k + depth - 1)?;
    let y = approximant(cf, k, k + depth)?;
    Ok(if x <= y { (x, y) } else { (y, x) })
}

/// Deterministic generators for oracle test inputs.
pub mod gen {
    use super::*;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Rational in `[0, max]` with denominator at most `max_den`.
    pub fn rational_in(rng: &mut impl Rng, max: i64, max_den: i64) -> Rational {
        let den = rng.random_range(1..=max_den);
        ratio(rng.random_range(0..=max * den), den)
    }

    /// Rational in `(0, max]`.
    pub fn positive_rational(rng: &mut impl Rng, max: i64, max_den: i64) -> Rational {
        let den = rng.random_range(1..=max_den);
        ratio(rng.random_range(1..=max * den), den)
    }

    /// Random nonnegative matrix with entries in `[0, 4]` passing the limit hypotheses.
    pub fn validated_matrix(rng: &mut impl Rng) -> RationalMat2 {
        loop {
            let m = Mat2::new(
                rational_in(rng, 4, 8),
                rational_in(rng, 4, 8),
                rational_in(rng, 4, 8),
                rational_in(rng, 4, 8),
            );
            if validate_limit_matrix(&m).passes() {
                return m;
            }
        }
    }

    /// Random matrix with entries in `(0, 4]` and `sign(bd − aθ) = sign`.
    pub fn positive_matrix_with_sign(rng: &mut impl Rng, sign: i8) -> RationalMat2 {
        loop {
            let m = Mat2::new(
                positive_rational(rng, 4, 6),
                positive_rational(rng, 4, 6),
                positive_rational(rng, 4, 6),
                positive_rational(rng, 4, 6),
            );
            if validate_limit_matrix(&m).det_sign == sign {
                return m;
            }
        }
    }

    /// `M_k = M + E_k/k` for `k ≤ len` with random `E_k` entries in
    /// `[−spread, spread]` (clamped to keep entries positive), then `M`.
    /// Rows whose `bd − aθ` vanishes are redrawn.
    pub fn perturbed_sequence(
        rng: &mut impl Rng,
        limit: RationalMat2,
        len: usize,
        spread: i64,
    ) -> RationalSequence {
        let floor = ratio(1, 16);
        let mut rows = Vec::with_capacity(len);
        for k in 1..=len {
            loop {
                let entries = limit.entries().map(|x| {
                    let e = rational_in(rng, 2 * spread, 6) - ratio(spread, 1);
                    let v = x + e / ratio(k as i64, 1);
                    if v < floor {
                        floor.clone()
                    } else {
                        v
                    }
                });
                let m = Mat2::from_entries(entries);
                if validate_limit_matrix(&m).det_nonzero {
                    rows.push(m);
                    break;
                }
            }
        }
        TableSequence::new(rows, limit)
    }

    /// A positive coefficient stream that is random for `k ≤ len` and
    /// constant afterwards, with a rational tail value past `len`.
    #[derive(Debug, Clone)]
    pub struct EventuallyConstantCf {
        pub table: CoeffTable<Rational>,
        pub limit_tail: Rational,
        pub len: usize,
    }

    impl EventuallyConstantCf {
        /// Exact tail `ξ_k` for `1 ≤ k`.
        pub fn exact_tail(&self, k: usize) -> Result<Rational> {
            let mut t = self.limit_tail.clone();
            for j in (k..=self.len).rev() {
                let (alpha, beta) = self.table.coeffs(j)?;
                t = beta / (alpha + t);
            }
            Ok(t)
        }
    }

    pub fn eventually_constant_cf(rng: &mut impl Rng, len: usize) -> EventuallyConstantCf {
        let rows = (0..len)
            .map(|_| (positive_rational(rng, 4, 7), positive_rational(rng, 4, 7)))
            .collect();
        let alpha = positive_rational(rng, 3, 5);
        let xi = positive_rational(rng, 2, 5);
        let beta = xi.clone() * (alpha.clone() + xi.clone());
        EventuallyConstantCf {
            table: CoeffTable::new(rows, (alpha, beta)),
            limit_tail: xi,
            len,
        }
    }
}

/// Smallest index `k₁` such that every companion matrix `A_j` with
/// `k₁ ≤ j ≤ last` has `ã_j > 0`, `b̃_j > 0` and `sign(d̃_j) = sign`.
pub fn exact_k1(seq: &impl MatrixSource<Rational>, last: usize, sign: i8) -> Result<usize> {
    let zero = ratio(0, 1);
    let mut k1 = last + 1;
    for j in (1..=last).rev() {
        let c = companion_at(seq, j)?;
        let d_ok = match sign {
            1 => c.d_tilde > zero,
            -1 => c.d_tilde < zero,
            _ => false,
        };
        if c.a_tilde > zero && c.b_tilde > zero && d_ok {
            k1 = j;
        } else {
            break;
        }
    }
    Ok(k1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::cf_from_sequence;
    use crate::contfrac::ConstantCf;

    fn q(x: i64) -> Rational {
        ratio(x, 1)
    }

    fn fib() -> RationalSequence {
        TableSequence::constant(Mat2::new(q(1), q(1), q(1), q(0)))
    }

    #[test]
    fn exact_product_examples() {
        let cfg = OracleConfig::default();
        let e11 = Entry::new(1, 1).unwrap();
        assert_eq!(
            exact_product_entry(&fib(), 0, 20, e11, &cfg).unwrap(),
            q(10946)
        );
        let s = TableSequence::constant(Mat2::new(q(2), q(1), q(1), q(1)));
        assert_eq!(
            exact_product_entry(&s, 0, 3, Entry::new(2, 2).unwrap(), &cfg).unwrap(),
            q(5)
        );
        let s = gen::perturbed_sequence(&mut gen::rng(3), s.limit(), 5, 1);
        assert_eq!(
            exact_product_entry(&s, 2, 1, e11, &cfg).unwrap(),
            s.matrix(3).a
        );
        assert!(matches!(
            exact_product_entry(&fib(), 0, 65, e11, &cfg),
            Err(Error::CapExceeded {
                requested: 65,
                cap: 64
            })
        ));
    }

    #[test]
    fn exact_approximant_examples() {
        let cf = ConstantCf {
            alpha: q(1),
            beta: q(1),
        };
        assert_eq!(exact_approximant(&cf, 1, 5).unwrap(), ratio(5, 8));
        let cf = CoeffTable::new(vec![(ratio(3, 2), ratio(5, 7))], (q(1), q(1)));
        assert_eq!(exact_approximant(&cf, 1, 1).unwrap(), ratio(10, 21));
    }

    #[test]
    fn approximant_is_ratio_of_y() {
        let mut rng = gen::rng(11);
        let m = gen::validated_matrix(&mut rng);
        let seq = gen::perturbed_sequence(&mut rng, m, 20, 1);
        let cf = cf_from_sequence(&seq).unwrap();
        for k in 1..6 {
            for n in k..k + 8 {
                let xi = exact_approximant(&cf, k, n);
                let ys = exact_y(&seq, k + 1, n).and_then(|a| Ok(a / exact_y(&seq, k, n)?));
                if let (Ok(x), Ok(y)) = (xi, ys) {
                    assert_eq!(x, y);
                }
            }
        }
    }

    #[test]
    fn y_boundary_is_one() {
        assert_eq!(exact_y(&fib(), 4, 3).unwrap(), q(1));
        assert!(exact_y(&fib(), 5, 3).is_err());
    }

    #[test]
    fn monotonicity_identity_fibonacci() {
        let cf = cf_from_sequence(fib()).unwrap();
        let (l, r) = exact_monotonicity_identity(&fib(), &cf, 1, 1).unwrap();
        assert_eq!((l.clone(), r), (ratio(-1, 2), ratio(-1, 2)));
        let (l, r) = exact_monotonicity_identity(&fib(), &cf, 1, 2).unwrap();
        assert_eq!(l, ratio(1, 6));
        assert_eq!(r, ratio(1, 6));
    }

    #[test]
    fn enclosure_brackets_tail() {
        let c = gen::eventually_constant_cf(&mut gen::rng(5), 10);
        let t = c.exact_tail(2).unwrap();
        let (lo, hi) = tail_enclosure(&c.table, 2, 20).unwrap();
        assert!(lo <= t && t <= hi);
    }

    #[test]
    fn k1_detection() {
        let s = TableSequence::new(
            vec![
                Mat2::new(q(1), q(1), q(5), q(1)),
                Mat2::new(q(2), q(1), q(1), q(1)),
            ],
            Mat2::new(q(2), q(1), q(1), q(1)),
        );
        assert_eq!(exact_k1(&s, 10, -1).unwrap(), 2);
    }
}
