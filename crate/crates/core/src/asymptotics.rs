//! The asymptotic pipeline: continued-fraction coefficients from a matrix
//! sequence, the limiting constants ψ (for `M`-products) and φ (for
//! companion products), log-scaled product entries and convergence
//! diagnostics for `Π(k,n) = e_i M_{k+1}⋯M_{k+n} e_jᵗ · ξ_{k+1}⋯ξ_{k+n}`.

use std::fmt;

use crate::contfrac::{
    inflated_rate, limit_tail, tails_range, CfCoeffs, TailEstimate, TailOptions, RATE_WINDOW,
};
use crate::error::{Error, Result};
use crate::mat2::{
    companion, eigenvalues, lambda_of, spectral_radius, CompanionMat, Eigenpair, Mat2,
};
use crate::scalar::Scalar;
use crate::scaled::{ScaledEntry, ScaledRow};
use crate::sequences::MatrixSource;

/// Matrix entry `(i, j)`, both in `{1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Entry {
    i: usize,
    j: usize,
}

impl Entry {
    pub const ALL: [Entry; 4] = [
        Entry { i: 1, j: 1 },
        Entry { i: 1, j: 2 },
        Entry { i: 2, j: 1 },
        Entry { i: 2, j: 2 },
    ];

    pub fn new(i: usize, j: usize) -> Result<Self> {
        if !(1..=2).contains(&i) || !(1..=2).contains(&j) {
            return Err(Error::InvalidArgument(format!(
                "entry ({i},{j}) out of range"
            )));
        }
        Ok(Entry { i, j })
    }

    pub fn row(&self) -> usize {
        self.i
    }

    pub fn col(&self) -> usize {
        self.j
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.i, self.j)
    }
}

impl std::str::FromStr for Entry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<usize> = s
            .chars()
            .filter(|c| !matches!(c, ',' | ' ' | '(' | ')'))
            .map(|c| c.to_digit(10).map(|d| d as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidArgument(format!("bad entry {s:?}")))?;
        match digits[..] {
            [i, j] => Entry::new(i, j),
            _ => Err(Error::InvalidArgument(format!("bad entry {s:?}"))),
        }
    }
}

/// Coefficients of the continued fraction attached to a matrix sequence:
///
/// `β_n = b_{n+1} / (b_n (b_{n+1}d_{n+1} − a_{n+1}θ_{n+1}))`,
/// `α_n = (a_n b_{n+1} + b_n θ_{n+1}) / (b_n (b_{n+1}d_{n+1} − a_{n+1}θ_{n+1}))`.
#[derive(Debug, Clone, Copy)]
pub struct SequenceCf<S> {
    seq: S,
}

impl<S> SequenceCf<S> {
    pub fn sequence(&self) -> &S {
        &self.seq
    }
}

/// Builds the coefficient stream, checking the limit hypotheses.
pub fn cf_from_sequence<T: Scalar, S: MatrixSource<T>>(seq: S) -> Result<SequenceCf<S>> {
    crate::mat2::validate_limit_matrix(&seq.limit()).into_result()?;
    Ok(SequenceCf { seq })
}

impl<T: Scalar, S: MatrixSource<T>> CfCoeffs<T> for SequenceCf<S> {
    fn coeffs(&self, n: usize) -> Result<(T, T)> {
        // Bit-identical to `limits()` in the exact region.
        if self.exact_from().is_some_and(|e| n >= e) {
            return Ok(self.limits());
        }
        let m = self.seq.matrix(n);
        let next = self.seq.matrix(n + 1);
        if m.b.is_singular() {
            return Err(Error::ZeroB { index: n });
        }
        let gap = next.b.clone() * next.d.clone() - next.a.clone() * next.theta.clone();
        if gap.is_singular() {
            return Err(Error::DegenerateIndex { index: n + 1 });
        }
        let den = m.b.clone() * gap;
        let beta = next.b.clone() / den.clone();
        let alpha = (m.a * next.b + m.b * next.theta) / den;
        Ok((alpha, beta))
    }

    fn limits(&self) -> (T, T) {
        let m = self.seq.limit();
        let gap = m.b.clone() * m.d.clone() - m.a.clone() * m.theta.clone();
        (m.trace() / gap.clone(), T::one() / gap)
    }

    fn exact_from(&self) -> Option<usize> {
        self.seq.exact_from()
    }
}

/// Companion matrix `A_m` built from `M_m` and `M_{m+1}`.
pub fn companion_at<T: Scalar>(seq: &impl MatrixSource<T>, m: usize) -> Result<CompanionMat<T>> {
    companion(&seq.matrix(m), &seq.matrix(m + 1), m)
}

/// Indices past which the sequence behaves like its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    /// First index from which trace, `b` and the sign of `bd − aθ` are settled.
    pub k1: usize,
    /// First index `≥ k1` from which the per-step contraction factor stays
    /// below the inflated limiting rate.
    pub k0: usize,
}

/// Consecutive indices that must satisfy the sign/size conditions.
pub const SETTLE_RUN: usize = 16;
/// Default number of indices scanned by [`detect_thresholds`].
pub const DEFAULT_SCAN_CAP: usize = 100_000;

/// Scans for `k₁` and `k₀`.
///
/// `k₁`: `a_m + θ_m` and `b_m` exceed half their limits and
/// `sign(b_m d_m − a_m θ_m)` equals the limit sign, for [`SETTLE_RUN`]
/// consecutive indices. `k₀`: first index `≥ k₁` such that the step factor
/// `|β_j| / (α_j + ξ)²` stays at most [`inflated_rate`] of `|ξ/(α+ξ)|` over the next
/// [`RATE_WINDOW`] indices.
pub fn detect_thresholds(seq: &impl MatrixSource<f64>, scan_cap: usize) -> Result<Thresholds> {
    let limit = seq.limit();
    let report = crate::mat2::validate_limit_matrix(&limit).into_result()?;
    let eps_trace = 0.5 * limit.trace();
    let eps_b = 0.5 * limit.b;
    let settled = |m: usize| {
        let mm = seq.matrix(m);
        let gap = mm.b * mm.d - mm.a * mm.theta;
        let sign = if gap > 0.0 {
            1
        } else if gap < 0.0 {
            -1
        } else {
            0
        };
        mm.trace() > eps_trace && mm.b > eps_b && sign == report.det_sign
    };
    let mut run = 0;
    let mut k1 = None;
    for m in 1..=scan_cap {
        if settled(m) {
            run += 1;
            if run == SETTLE_RUN {
                k1 = Some(m + 1 - SETTLE_RUN);
                break;
            }
        } else {
            run = 0;
        }
    }
    let k1 = k1.ok_or_else(|| Error::Domain(format!("no k1 found within {scan_cap} indices")))?;

    let cf = SequenceCf { seq };
    let (alpha, beta) = cf.limits();
    let xi = limit_tail(alpha, beta)?;
    let allowed = inflated_rate((xi / (alpha + xi)).abs());
    let within = |j: usize| -> Result<bool> {
        let (a_j, b_j) = cf.coeffs(j)?;
        let den = a_j + xi;
        Ok(den != 0.0 && b_j.abs() / (den * den) <= allowed)
    };
    let mut run = 0;
    for m in k1..=k1 + scan_cap {
        if within(m)? {
            run += 1;
            if run == RATE_WINDOW {
                return Ok(Thresholds {
                    k1,
                    k0: m + 1 - RATE_WINDOW,
                });
            }
        } else {
            run = 0;
        }
    }
    Err(Error::Domain(format!(
        "no k0 found within {scan_cap} indices of k1={k1}"
    )))
}

/// Limit data shared by ψ and φ.
struct LimitData {
    eig: Eigenpair,
    b: f64,
    theta: f64,
}

fn limit_data(seq: &impl MatrixSource<f64>) -> Result<LimitData> {
    let m = seq.limit();
    let eig = eigenvalues(&m)?;
    if eig.gap() == 0.0 {
        return Err(Error::DegenerateSpectrum { rho: eig.rho });
    }
    Ok(LimitData {
        eig,
        b: m.b,
        theta: m.theta,
    })
}

fn tail_at(
    seq: &impl MatrixSource<f64>,
    k: usize,
    tol: f64,
    opts: &TailOptions,
) -> Result<TailEstimate> {
    let cf = cf_from_sequence(seq)?;
    Ok(tails_range(&cf, k, k, tol, opts)?[0])
}

impl LimitData {
    /// `ψ(i, j, k)` given the tail `ξ_{k+1}`.
    fn psi_with_tail(
        &self,
        seq: &impl MatrixSource<f64>,
        entry: Entry,
        k: usize,
        xi: f64,
    ) -> Result<f64> {
        let (rho, gap) = (self.eig.rho, self.eig.gap());
        let row2 = || -> Result<f64> {
            let next = seq.matrix(k + 1);
            if next.b.is_singular() {
                return Err(Error::ZeroB { index: k + 1 });
            }
            Ok(next.theta / next.b - xi * next.det() / next.b)
        };
        Ok(match (entry.i, entry.j) {
            (1, 1) => (rho - self.theta) / gap,
            (1, 2) => self.b / gap,
            // Row 2 is row 1 times the k-dependent factor; the (ϱ − θ)
            // numerator matches the measured limit whenever θ ≠ 0.
            (2, 1) => (rho - self.theta) / gap * row2()?,
            _ => self.b / gap * row2()?,
        })
    }

    /// `φ(i, j, k)` given the tail `ξ_{k+1}`.
    fn phi_with_tail(
        &self,
        seq: &impl MatrixSource<f64>,
        entry: Entry,
        k: usize,
        xi: f64,
    ) -> Result<f64> {
        let (rho, gap) = (self.eig.rho, self.eig.gap());
        let row2 = || -> Result<f64> { Ok(companion_at(seq, k + 1)?.d_tilde * xi) };
        Ok(match (entry.i, entry.j) {
            (1, 1) => rho / gap,
            (1, 2) => self.b / gap,
            (2, 1) => rho / gap * row2()?,
            _ => self.b / gap * row2()?,
        })
    }
}

/// `ψ(i, j, k)`, the limit of `Π(k, n)` as `n → ∞`.
///
/// Row 1 constants depend only on the limit matrix; row 2 carries the
/// factor `θ_{k+1}/b_{k+1} − ξ_{k+1} det(M_{k+1})/b_{k+1}`.
pub fn psi(
    seq: &impl MatrixSource<f64>,
    entry: Entry,
    k: usize,
    tol: f64,
    opts: &TailOptions,
) -> Result<f64> {
    let lim = limit_data(seq)?;
    let xi = if entry.i == 2 {
        tail_at(seq, k + 1, tol, opts)?.value
    } else {
        0.0
    };
    lim.psi_with_tail(seq, entry, k, xi)
}

/// `φ(i, j, k)`, the analogue of [`psi`] for companion products
/// `e_i A_{k+1}⋯A_{k+n} e_jᵗ`.
pub fn phi(
    seq: &impl MatrixSource<f64>,
    entry: Entry,
    k: usize,
    tol: f64,
    opts: &TailOptions,
) -> Result<f64> {
    let lim = limit_data(seq)?;
    let xi = if entry.i == 2 {
        tail_at(seq, k + 1, tol, opts)?.value
    } else {
        0.0
    };
    lim.phi_with_tail(seq, entry, k, xi)
}

fn scaled_product(
    start: ScaledRow,
    k: usize,
    n: usize,
    mut factor: impl FnMut(usize) -> Result<Mat2<f64>>,
) -> Result<ScaledRow> {
    let mut row = start;
    for m in k + 1..=k + n {
        row.v = factor(m)?.left_apply(&row.v);
        row.renormalize()?;
    }
    Ok(row)
}

fn check_depth(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "product depth n must be at least 1".into(),
        ));
    }
    Ok(())
}

/// `e_i M_{k+1}⋯M_{k+n} e_jᵗ`, accumulated as a renormalized row vector.
pub fn product_entry(
    seq: &impl MatrixSource<f64>,
    k: usize,
    n: usize,
    entry: Entry,
) -> Result<ScaledEntry> {
    check_depth(n)?;
    let row = scaled_product(ScaledRow::unit(entry.i), k, n, |m| Ok(seq.matrix(m)))?;
    row.component(entry.j)
}

/// `e_i A_{k+1}⋯A_{k+n} e_jᵗ` over companion matrices.
pub fn companion_product_entry(
    seq: &impl MatrixSource<f64>,
    k: usize,
    n: usize,
    entry: Entry,
) -> Result<ScaledEntry> {
    check_depth(n)?;
    let row = scaled_product(ScaledRow::unit(entry.i), k, n, |m| {
        Ok(companion_at(seq, m)?.as_mat2())
    })?;
    row.component(entry.j)
}

/// Exact-arithmetic product `A_{k+1}⋯A_{k+n}` (identity when `n = 0`).
pub fn companion_product<T: Scalar>(
    seq: &impl MatrixSource<T>,
    k: usize,
    n: usize,
) -> Result<Mat2<T>> {
    let mut acc = Mat2::identity();
    for m in k + 1..=k + n {
        acc = &acc * &companion_at(seq, m)?.as_mat2();
    }
    Ok(acc)
}

/// Both sides of `e_i M_{k+1}⋯M_{k+n} e₁ᵗ = (e_i Λ_{k+1}) A_{k+1}⋯A_{k+n} (1, −θ_{k+n+1}/b_{k+n+1})ᵗ`.
///
/// For `i = 1` the right side is `e₁A⋯Ae₁ᵗ − (θ_{k+n+1}/b_{k+n+1})·e₁A⋯Ae₂ᵗ`.
pub fn m_to_a_entry_identity(
    seq: &impl MatrixSource<f64>,
    k: usize,
    n: usize,
    i: usize,
) -> Result<(ScaledEntry, ScaledEntry)> {
    let entry = Entry::new(i, 1)?;
    let left = product_entry(seq, k, n, entry)?;
    let start = if i == 1 {
        ScaledRow::unit(1)
    } else {
        let lam = lambda_of(&seq.matrix(k + 1), k + 1)?;
        ScaledRow {
            v: [lam.sub, 1.0],
            log2_scale: 0,
        }
    };
    let row = scaled_product(start, k, n, |m| Ok(companion_at(seq, m)?.as_mat2()))?;
    let lam_end = lambda_of(&seq.matrix(k + n + 1), k + n + 1)?;
    let right = row
        .component(1)?
        .sub(&row.component(2)?.scale_by(lam_end.sub)?)?;
    Ok((left, right))
}

/// Exact mirror of [`m_to_a_entry_identity`].
pub fn m_to_a_entry_identity_exact<T: Scalar>(
    seq: &impl MatrixSource<T>,
    k: usize,
    n: usize,
    i: usize,
) -> Result<(T, T)> {
    Entry::new(i, 1)?;
    let mut left = if i == 1 {
        [T::one(), T::zero()]
    } else {
        [T::zero(), T::one()]
    };
    for m in k + 1..=k + n {
        left = seq.matrix(m).left_apply(&left);
    }
    let mut right = if i == 1 {
        [T::one(), T::zero()]
    } else {
        [lambda_of(&seq.matrix(k + 1), k + 1)?.sub, T::one()]
    };
    for m in k + 1..=k + n {
        right = companion_at(seq, m)?.as_mat2().left_apply(&right);
    }
    let lam_end = lambda_of(&seq.matrix(k + n + 1), k + n + 1)?.sub;
    let [r1, r2] = right;
    Ok((left[0].clone(), r1 - r2 * lam_end))
}

/// `σ_i = log(ϱ^i (ϱ − ϱ₁) / (ϱ^{i+1} − ϱ₁^{i+1}))`.
pub fn sigma(i: u32, eig: &Eigenpair) -> Result<f64> {
    if !(eig.rho > 0.0) {
        return Err(Error::Domain(format!(
            "sigma needs rho > 0, got {}",
            eig.rho
        )));
    }
    let x = eig.rho1 / eig.rho;
    let num = 1.0 - x;
    let den = 1.0 - x.powi(i as i32 + 1);
    if !(num > 0.0) || !(den > 0.0) {
        return Err(Error::Domain(format!(
            "sigma_{i}: nonpositive log argument ({num}/{den})"
        )));
    }
    Ok(num.ln() - den.ln())
}

/// `Π(k, n)` against its limit `ψ(i, j, k)` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioDiagnostics {
    pub k: usize,
    pub entry: Entry,
    pub ratios: Vec<(usize, f64)>,
    pub target: f64,
    /// `max |Π(k,n) − ψ|` over the last quarter of `n`.
    pub sup_dev: f64,
}

/// `Π(k, n)` for `n = 1..=n_max` given tails `ξ_{k+1..=k+n_max}` in order.
fn ratio_series(
    seq: &impl MatrixSource<f64>,
    k: usize,
    entry: Entry,
    tails: &[TailEstimate],
) -> Vec<(usize, f64)> {
    let mut v = if entry.i == 1 { [1.0, 0.0] } else { [0.0, 1.0] };
    let mut out = Vec::with_capacity(tails.len());
    for (offset, t) in tails.iter().enumerate() {
        let n = offset + 1;
        debug_assert_eq!(t.index, k + n);
        v = seq.matrix(k + n).left_apply(&v);
        v[0] *= t.value;
        v[1] *= t.value;
        out.push((n, v[entry.j - 1]));
    }
    out
}

fn last_quartile_sup(ratios: &[(usize, f64)], target: f64) -> f64 {
    let skip = ratios.len() - (ratios.len() / 4).max(1);
    ratios[skip..]
        .iter()
        .map(|(_, r)| (r - target).abs())
        .fold(0.0, f64::max)
}

pub fn ratio_diagnostics(
    seq: &impl MatrixSource<f64>,
    k: usize,
    entry: Entry,
    n_max: usize,
    tol: f64,
    opts: &TailOptions,
) -> Result<RatioDiagnostics> {
    check_depth(n_max)?;
    let cf = cf_from_sequence(seq)?;
    let tails = tails_range(&cf, k + 1, k + n_max, tol, opts)?;
    let target = psi(seq, entry, k, tol, opts)?;
    let ratios = ratio_series(seq, k, entry, &tails);
    let sup_dev = last_quartile_sup(&ratios, target);
    Ok(RatioDiagnostics {
        k,
        entry,
        ratios,
        target,
        sup_dev,
    })
}

/// `sup_{k ∈ [k_lo, k_hi]} |Π(k, n) − ψ(i, j, k)|` for `n = 1..=n_max`.
pub fn uniformity_envelope(
    seq: &impl MatrixSource<f64>,
    k_lo: usize,
    k_hi: usize,
    entry: Entry,
    n_max: usize,
    tol: f64,
    opts: &TailOptions,
) -> Result<Vec<(usize, f64)>> {
    check_depth(n_max)?;
    let cf = cf_from_sequence(seq)?;
    let tails = tails_range(&cf, k_lo + 1, k_hi + n_max + 1, tol, opts)?;
    let lim = limit_data(seq)?;
    let mut env = vec![0.0f64; n_max];
    for k in k_lo..=k_hi {
        let off = k - k_lo;
        let window = &tails[off..off + n_max];
        let target = lim.psi_with_tail(seq, entry, k, window[0].value)?;
        for (slot, (_, r)) in env.iter_mut().zip(ratio_series(seq, k, entry, window)) {
            *slot = slot.max((r - target).abs());
        }
    }
    Ok(env
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i + 1, v))
        .collect())
}

/// `(e_i M_{k+1}⋯M_{k+n} e_jᵗ) / ∏ ϱ(M_m)` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSeries {
    pub rows: Vec<(usize, f64)>,
    /// First index `m` whose spectrum was not real, if any.
    pub truncated_at: Option<usize>,
}

pub fn spectral_radius_ratio(
    seq: &impl MatrixSource<f64>,
    k: usize,
    entry: Entry,
    n_max: usize,
) -> Result<SpectralSeries> {
    check_depth(n_max)?;
    let mut v = if entry.i == 1 { [1.0, 0.0] } else { [0.0, 1.0] };
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let m = seq.matrix(k + n);
        let radius = match spectral_radius(&m) {
            Ok(r) if r > 0.0 => r,
            _ => {
                return Ok(SpectralSeries {
                    rows,
                    truncated_at: Some(k + n),
                })
            }
        };
        v = m.left_apply(&v);
        v[0] /= radius;
        v[1] /= radius;
        rows.push((n, v[entry.j - 1]));
    }
    Ok(SpectralSeries {
        rows,
        truncated_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::{approximant, tail};
    use crate::scalar::{ratio, Rational};
    use crate::sequences::{Decay, MatrixSequence, TableSequence};

    const GOLDEN: f64 = 1.618_033_988_749_895;
    const SQRT5: f64 = 2.236_067_977_499_79;

    fn fib() -> MatrixSequence {
        MatrixSequence::constant(Mat2::new(1.0, 1.0, 1.0, 0.0)).unwrap()
    }

    fn m211() -> MatrixSequence {
        MatrixSequence::constant(Mat2::new(2.0, 1.0, 1.0, 1.0)).unwrap()
    }

    fn e(i: usize, j: usize) -> Entry {
        Entry::new(i, j).unwrap()
    }

    fn opts() -> TailOptions {
        TailOptions::default()
    }

    fn fib_numbers(n: usize) -> Vec<u128> {
        let mut f = vec![0u128, 1];
        while f.len() <= n {
            let l = f.len();
            f.push(f[l - 1] + f[l - 2]);
        }
        f
    }

    #[test]
    fn entry_parsing() {
        assert_eq!("12".parse::<Entry>().unwrap(), e(1, 2));
        assert_eq!("2,1".parse::<Entry>().unwrap(), e(2, 1));
        assert!("13".parse::<Entry>().is_err());
        assert!("1".parse::<Entry>().is_err());
        assert!(Entry::new(0, 1).is_err());
    }

    #[test]
    fn cf_examples() {
        let cf = cf_from_sequence(fib()).unwrap();
        for k in 1..5 {
            assert_eq!(cf.coeffs(k).unwrap(), (1.0, 1.0));
        }
        assert_eq!(cf.limits(), (1.0, 1.0));
        let cf = cf_from_sequence(m211()).unwrap();
        assert_eq!(cf.coeffs(3).unwrap(), (-3.0, -1.0));
        assert_eq!(cf.limits(), (-3.0, -1.0));
    }

    #[test]
    fn cf_degenerate_index() {
        let seq = MatrixSequence::from_rows(
            vec![Mat2::new(1.0, 1.0, 1.0, 0.0), Mat2::new(1.0, 1.0, 1.0, 1.0)],
            Mat2::new(1.0, 1.0, 1.0, 0.0),
        )
        .unwrap();
        let cf = cf_from_sequence(&seq).unwrap();
        assert!(matches!(
            cf.coeffs(1),
            Err(Error::DegenerateIndex { index: 2 })
        ));
        let seq = MatrixSequence::from_rows(
            vec![Mat2::new(1.0, 0.0, 1.0, 0.0)],
            Mat2::new(1.0, 1.0, 1.0, 0.0),
        )
        .unwrap();
        let cf = cf_from_sequence(&seq).unwrap();
        assert!(matches!(cf.coeffs(1), Err(Error::ZeroB { index: 1 })));
    }

    #[test]
    fn fibonacci_approximants_are_fibonacci_ratios() {
        let q = |x: i64| ratio(x, 1);
        let seq = TableSequence::constant(Mat2::new(q(1), q(1), q(1), q(0)));
        let cf = cf_from_sequence(&seq).unwrap();
        let f = fib_numbers(20);
        for k in 1..4 {
            for n in k..k + 12 {
                let d = n - k + 1;
                let got: Rational = approximant(&cf, k, n).unwrap();
                assert_eq!(got, ratio(f[d] as i64, f[d + 1] as i64));
            }
        }
    }

    #[test]
    fn fibonacci_tails_are_inverse_golden() {
        let cf = cf_from_sequence(fib()).unwrap();
        for k in [1, 5, 100] {
            let t = tail(&cf, k, 1e-14, &opts()).unwrap();
            assert!((t.value - 1.0 / GOLDEN).abs() < 1e-15);
        }
    }

    #[test]
    fn perturbed_tails_approach_limit() {
        let seq = MatrixSequence::perturbed(
            Mat2::new(1.0, 1.0, 1.0, 0.0),
            Mat2::new(1.0, 0.0, 0.0, 0.0),
            Decay::Power { p: 1.0 },
        )
        .unwrap();
        let cf = cf_from_sequence(&seq).unwrap();
        let devs: Vec<f64> = [10, 100, 1000, 10000]
            .iter()
            .map(|&k| (tail(&cf, k, 1e-14, &opts()).unwrap().value - 1.0 / GOLDEN).abs())
            .collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
        assert!(devs[3] < 1e-4);
    }

    #[test]
    fn psi_fibonacci() {
        let s = fib();
        let want = [
            GOLDEN / SQRT5,
            1.0 / SQRT5,
            1.0 / SQRT5,
            1.0 / (SQRT5 * GOLDEN),
        ];
        for (entry, w) in Entry::ALL.iter().zip(want) {
            let got = psi(&s, *entry, 0, 1e-14, &opts()).unwrap();
            assert!((got - w).abs() < 1e-13, "{entry}: {got} vs {w}");
        }
    }

    #[test]
    fn psi_is_the_measured_limit_when_theta_nonzero() {
        // (2,1,1,1): ψ = (0.7236, 0.4472; 0.4472, 0.2764).
        for entry in Entry::ALL {
            let d = ratio_diagnostics(&m211(), 2, entry, 40, 1e-15, &opts()).unwrap();
            assert!(
                d.sup_dev < 1e-12,
                "{entry}: {} vs {}",
                d.ratios[39].1,
                d.target
            );
        }
        let p21 = psi(&m211(), e(2, 1), 0, 1e-15, &opts()).unwrap();
        assert!((p21 - 1.0 / SQRT5).abs() < 1e-14);
    }

    #[test]
    fn phi_fibonacci_and_ratio() {
        let s = fib();
        assert!((phi(&s, e(1, 1), 0, 1e-14, &opts()).unwrap() - GOLDEN / SQRT5).abs() < 1e-13);
        assert!((phi(&s, e(2, 1), 0, 1e-14, &opts()).unwrap() - 1.0 / SQRT5).abs() < 1e-13);
        for seq in [
            m211(),
            MatrixSequence::constant(Mat2::new(0.5, 2.0, 3.0, 1.5)).unwrap(),
        ] {
            let rho = eigenvalues(&seq.limit()).unwrap().rho;
            let r = phi(&seq, e(1, 2), 3, 1e-14, &opts()).unwrap()
                / phi(&seq, e(1, 1), 3, 1e-14, &opts()).unwrap();
            assert!((r - seq.limit().b / rho).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_phi_consistency() {
        let seq = MatrixSequence::perturbed(
            Mat2::new(2.0, 1.0, 1.0, 1.0),
            Mat2::new(0.5, 0.25, 0.0, 1.0),
            Decay::Geometric { q: 0.5 },
        )
        .unwrap();
        let lim = seq.limit();
        for k in [1, 4, 9] {
            let p11 = psi(&seq, e(1, 1), k, 1e-14, &opts()).unwrap();
            let f11 = phi(&seq, e(1, 1), k, 1e-14, &opts()).unwrap();
            let f12 = phi(&seq, e(1, 2), k, 1e-14, &opts()).unwrap();
            assert!((p11 - (f11 - lim.theta / lim.b * f12)).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // Identity-like limit: a+θ ≠ 0, b ≠ 0, bd ≠ aθ but rho = rho1.
        let seq = MatrixSequence::constant(Mat2::new(1.0, 1.0, 0.0, 1.0)).unwrap();
        assert!(matches!(
            psi(&seq, e(1, 1), 0, 1e-12, &opts()),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn product_entry_examples() {
        let s = fib();
        assert_eq!(product_entry(&s, 0, 5, e(1, 1)).unwrap().to_f64(), 8.0);
        assert_eq!(
            product_entry(&m211(), 0, 3, e(1, 1)).unwrap().to_f64(),
            13.0
        );
        let p = MatrixSequence::perturbed(
            Mat2::new(1.0, 1.0, 1.0, 0.0),
            Mat2::new(1.0, 0.0, 0.0, 0.0),
            Decay::Power { p: 1.0 },
        )
        .unwrap();
        assert_eq!(
            product_entry(&p, 3, 1, e(1, 1)).unwrap().to_f64(),
            p.matrix(4).a
        );
        assert!(product_entry(&s, 0, 0, e(1, 1)).is_err());
    }

    #[test]
    fn product_entry_survives_overflow() {
        let s = fib();
        let x = product_entry(&s, 0, 5000, e(1, 1)).unwrap();
        assert_eq!(x.to_f64(), f64::INFINITY);
        // ln F_5001 ≈ 5001 ln φ − ln √5
        let want = 5001.0 * GOLDEN.ln() - SQRT5.ln();
        assert!((x.ln_abs() - want).abs() / want < 1e-12);
    }

    #[test]
    fn companion_product_examples() {
        let s = fib();
        for n in 1..10 {
            for en in Entry::ALL {
                assert_eq!(
                    companion_product_entry(&s, 0, n, en).unwrap(),
                    product_entry(&s, 0, n, en).unwrap()
                );
            }
        }
        let s = m211();
        for n in 1..=12 {
            assert!(companion_product_entry(&s, 0, n, e(2, 1)).unwrap().signum() < 0.0);
        }
    }

    #[test]
    fn m_to_a_examples() {
        let (l, r) = m_to_a_entry_identity(&fib(), 0, 7, 1).unwrap();
        assert_eq!((l.to_f64(), r.to_f64()), (21.0, 21.0));
        let (l, r) = m_to_a_entry_identity(&m211(), 0, 2, 1).unwrap();
        assert_eq!((l.to_f64(), r.to_f64()), (5.0, 5.0));
        let q = |x: i64| ratio(x, 1);
        let seq = TableSequence::constant(Mat2::new(q(2), q(1), q(1), q(1)));
        for i in 1..=2 {
            for n in 1..8 {
                let (l, r) = m_to_a_entry_identity_exact(&seq, 0, n, i).unwrap();
                assert_eq!(l, r);
            }
        }
    }

    #[test]
    fn sigma_examples() {
        let eig = eigenvalues(&Mat2::new(1.0, 1.0, 1.0, 0.0)).unwrap();
        // ϱ^0(ϱ−ϱ₁)/(ϱ−ϱ₁) = 1
        assert_eq!(sigma(0, &eig).unwrap(), 0.0);
        assert!((sigma(1, &eig).unwrap() - 0.481_211_825_059_603_4).abs() < 1e-14);
        let far = sigma(200, &eig).unwrap();
        assert!((far - (eig.gap() / eig.rho).ln()).abs() < 1e-15);
        let bad = Eigenpair {
            rho: -1.0,
            rho1: -2.0,
        };
        assert!(sigma(1, &bad).is_err());
    }

    #[test]
    fn ratio_diagnostics_fibonacci() {
        let d = ratio_diagnostics(&fib(), 0, e(1, 1), 60, 1e-15, &opts()).unwrap();
        let (n10, p10) = d.ratios[9];
        assert_eq!(n10, 10);
        assert!((p10 - 89.0 / GOLDEN.powi(10)).abs() < 1e-12);
        assert!((p10 - 0.723_625_069_264_718).abs() < 1e-12);
        let (_, last) = *d.ratios.last().unwrap();
        assert!((last - GOLDEN / SQRT5).abs() < 1e-10);
        assert!(d.sup_dev < 1e-9);
    }

    #[test]
    fn constant_sequence_ratio_is_shift_invariant() {
        for en in Entry::ALL {
            let a = ratio_diagnostics(&m211(), 0, en, 30, 1e-15, &opts()).unwrap();
            let b = ratio_diagnostics(&m211(), 17, en, 30, 1e-15, &opts()).unwrap();
            for ((_, x), (_, y)) in a.ratios.iter().zip(&b.ratios) {
                assert!((x - y).abs() <= 1e-13 * x.abs());
            }
        }
    }

    #[test]
    fn spectral_ratio_matches_xi_ratio_for_constant() {
        let s = fib();
        let sp = spectral_radius_ratio(&s, 0, e(1, 1), 40).unwrap();
        let d = ratio_diagnostics(&s, 0, e(1, 1), 40, 1e-15, &opts()).unwrap();
        assert!(sp.truncated_at.is_none());
        for ((_, x), (_, y)) in sp.rows.iter().zip(&d.ratios) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!((sp.rows[9].1 - 0.723_625_069_264_718).abs() < 1e-12);
    }

    #[test]
    fn spectral_ratio_truncates_on_complex_spectrum() {
        struct Bad;
        impl MatrixSource<f64> for Bad {
            fn matrix(&self, k: usize) -> Mat2<f64> {
                if k == 3 {
                    Mat2::new(0.0, 1.0, -1.0, 0.0)
                } else {
                    Mat2::new(1.0, 1.0, 1.0, 0.0)
                }
            }
            fn limit(&self) -> Mat2<f64> {
                Mat2::new(1.0, 1.0, 1.0, 0.0)
            }
        }
        let s = spectral_radius_ratio(&Bad, 0, e(1, 1), 10).unwrap();
        assert_eq!(s.truncated_at, Some(3));
        assert_eq!(s.rows.len(), 2);
    }

    #[test]
    fn thresholds_constant_and_perturbed() {
        assert_eq!(
            detect_thresholds(&fib(), 1000).unwrap(),
            Thresholds { k1: 1, k0: 1 }
        );
        // b_k = 1 − 0.9·... starts below half its limit.
        let seq = MatrixSequence::perturbed(
            Mat2::new(1.0, 1.0, 1.0, 0.0),
            Mat2::new(0.0, -0.9, 0.0, 0.0),
            Decay::Power { p: 1.0 },
        )
        .unwrap();
        let t = detect_thresholds(&seq, 10_000).unwrap();
        assert!(t.k1 >= 2, "{t:?}");
        assert!(t.k0 >= t.k1);
    }
}
