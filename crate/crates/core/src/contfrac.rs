//! Continued fractions `β_k/(α_k + β_{k+1}/(α_{k+1} + ...))`: finite
//! approximants, the limit value for limit-periodic coefficients, and tails
//! with a certified truncation bound.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coefficient stream `k ↦ (α_k, β_k)` for `k ≥ 1` with declared limits.
///
/// Implementations must be deterministic: two reads of the same index
/// return identical values.
pub trait CfCoeffs<T: Scalar>: Sync {
    fn coeffs(&self, k: usize) -> Result<(T, T)>;

    /// Declared limits `(α, β)`.
    fn limits(&self) -> (T, T);

    /// Index from which every coefficient equals the limits exactly, if known.
    /// Past it the limit value is the exact tail and truncation costs nothing.
    fn exact_from(&self) -> Option<usize> {
        None
    }
}

impl<T: Scalar, C: CfCoeffs<T> + ?Sized> CfCoeffs<T> for &C {
    fn coeffs(&self, k: usize) -> Result<(T, T)> {
        (**self).coeffs(k)
    }

    fn limits(&self) -> (T, T) {
        (**self).limits()
    }

    fn exact_from(&self) -> Option<usize> {
        (**self).exact_from()
    }
}

/// `α_k = α`, `β_k = β` for every index.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantCf<T = f64> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> CfCoeffs<T> for ConstantCf<T> {
    fn coeffs(&self, _k: usize) -> Result<(T, T)> {
        Ok((self.alpha.clone(), self.beta.clone()))
    }

    fn limits(&self) -> (T, T) {
        (self.alpha.clone(), self.beta.clone())
    }

    fn exact_from(&self) -> Option<usize> {
        Some(1)
    }
}

/// Explicit coefficients for `k = 1..=len`, the declared limits afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable<T = f64> {
    rows: Vec<(T, T)>,
    limit: (T, T),
}

impl<T: Scalar> CoeffTable<T> {
    pub fn new(rows: Vec<(T, T)>, limit: (T, T)) -> Self {
        CoeffTable { rows, limit }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl<T: Scalar> CfCoeffs<T> for CoeffTable<T> {
    fn coeffs(&self, k: usize) -> Result<(T, T)> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "coefficient index starts at 1".into(),
            ));
        }
        Ok(self
            .rows
            .get(k - 1)
            .cloned()
            .unwrap_or_else(|| self.limit.clone()))
    }

    fn limits(&self) -> (T, T) {
        self.limit.clone()
    }

    fn exact_from(&self) -> Option<usize> {
        Some(self.rows.len() + 1)
    }
}

fn check_window(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "approximant window needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    Ok(())
}

/// One backward step `β/(α + t)`, failing on a vanishing denominator.
fn step<T: Scalar>(alpha: T, beta: T, t: T, j: usize) -> Result<T> {
    let den = alpha + t;
    if den.is_singular() {
        return Err(Error::SingularApproximant { index: j });
    }
    Ok(beta / den)
}

/// The approximant `ξ_{k,n}` by backward recurrence.
pub fn approximant<T: Scalar>(cf: &impl CfCoeffs<T>, k: usize, n: usize) -> Result<T> {
    check_window(k, n)?;
    let mut t = T::zero();
    for j in (k..=n).rev() {
        let (alpha, beta) = cf.coeffs(j)?;
        t = step(alpha, beta, t, j)?;
    }
    Ok(t)
}

/// All approximants `ξ_{j,n}` for `j = k..=n`, from one backward sweep.
/// Entry `i` of the result is `ξ_{k+i,n}`.
pub fn approximant_sweep<T: Scalar>(cf: &impl CfCoeffs<T>, k: usize, n: usize) -> Result<Vec<T>> {
    check_window(k, n)?;
    let mut out = vec![T::zero(); n - k + 1];
    let mut t = T::zero();
    for j in (k..=n).rev() {
        let (alpha, beta) = cf.coeffs(j)?;
        t = step(alpha, beta, t, j)?;
        out[j - k] = t.clone();
    }
    Ok(out)
}

/// Value of a continued fraction with constant coefficients `(α, β)`:
/// `(α/2)(√(1 + 4β/α²) − 1)`, evaluated without cancellation.
pub fn limit_tail(alpha: f64, beta: f64) -> Result<f64> {
    if alpha == 0.0 || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::Domain(format!(
            "limit tail needs alpha != 0, got {alpha}"
        )));
    }
    let x = 4.0 * beta / (alpha * alpha);
    let radicand = 1.0 + x;
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "alpha^2 + 4 beta < 0 (alpha={alpha}, beta={beta})"
        )));
    }
    // (α/2)(√(1+x) − 1) = (α/2)·x/(√(1+x) + 1)
    Ok(0.5 * alpha * x / (radicand.sqrt() + 1.0))
}

/// Smallest `C ≥ 1` with `1/C ≤ β_k/α_k ≤ C` on `k_lo..=k_hi`, or `None`
/// if some ratio is not positive.
pub fn seidel_stern_check<T: Scalar>(
    cf: &impl CfCoeffs<T>,
    k_lo: usize,
    k_hi: usize,
) -> Result<Option<T>> {
    if k_lo > k_hi {
        return Err(Error::InvalidArgument(format!(
            "empty window {k_lo}..={k_hi}"
        )));
    }
    let mut bound = T::one();
    for k in k_lo..=k_hi {
        let (alpha, beta) = cf.coeffs(k)?;
        if alpha.is_zero() {
            return Ok(None);
        }
        let ratio = beta / alpha;
        if !ratio.is_positive() {
            return Ok(None);
        }
        let inv = T::one() / ratio.clone();
        for candidate in [ratio, inv] {
            if candidate > bound {
                bound = candidate;
            }
        }
    }
    Ok(Some(bound))
}

/// Inflation applied to the limiting contraction ratio.
pub const RATE_INFLATION: f64 = 1.05;

/// `1.05·r`, or `√r` when that would reach 1 (nearly equal eigenvalue moduli).
pub fn inflated_rate(limit_rate: f64) -> f64 {
    let r = RATE_INFLATION * limit_rate;
    if r >= 1.0 && limit_rate < 1.0 {
        limit_rate.sqrt()
    } else {
        r
    }
}
/// Number of leading recurrence steps scanned for the empirical ratio.
pub const RATE_WINDOW: usize = 32;
/// Default cap on the truncation depth of [`tail`].
pub const DEFAULT_DEPTH_CAP: usize = 1_000_000;
/// Environment variable overriding [`DEFAULT_DEPTH_CAP`].
pub const DEPTH_CAP_ENV: &str = "CFMP_DEPTH_CAP";

/// Contraction ratio used to certify tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionRate {
    /// `|ξ/(α + ξ)|` from the declared limits, before inflation.
    pub limit_rate: f64,
    /// Largest per-step factor `|β_j|/(α_j + ξ)²` in the scanned window.
    pub empirical: f64,
    /// `max(inflated_rate(limit_rate), empirical)`.
    pub rate: f64,
}

fn rate_over(cf: &impl CfCoeffs<f64>, lo: usize, hi: usize) -> Result<ContractionRate> {
    let (alpha, beta) = cf.limits();
    let xi = limit_tail(alpha, beta)?;
    let limit_rate = (xi / (alpha + xi)).abs();
    let mut empirical: f64 = 0.0;
    for j in lo.max(1)..hi {
        let (a_j, b_j) = cf.coeffs(j)?;
        let den = a_j + xi;
        let f = if den == 0.0 {
            f64::INFINITY
        } else {
            b_j.abs() / (den * den)
        };
        empirical = empirical.max(f);
    }
    let rate = inflated_rate(limit_rate).max(empirical);
    if !(rate < 1.0) {
        return Err(Error::NonContractive { rate });
    }
    Ok(ContractionRate {
        limit_rate,
        empirical,
        rate,
    })
}

/// Contraction rate for tails starting at `k_lo`.
pub fn contraction_rate(cf: &impl CfCoeffs<f64>, k_lo: usize) -> Result<ContractionRate> {
    rate_over(cf, k_lo, k_lo + RATE_WINDOW)
}

/// A tail value with its certified truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub index: usize,
    pub value: f64,
    pub err_bound: f64,
    /// Truncation index `N`: the limit value seeds index `N + 1`.
    pub depth: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailOptions {
    pub depth_cap: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }
}

impl TailOptions {
    /// Defaults, with the depth cap read from `CFMP_DEPTH_CAP` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(DEPTH_CAP_ENV) {
            Ok(v) => {
                let depth_cap = v.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidArgument(format!("{DEPTH_CAP_ENV}={v:?} is not a depth"))
                })?;
                Ok(TailOptions { depth_cap })
            }
            Err(_) => Ok(TailOptions::default()),
        }
    }
}

/// Constant `C` of the truncation bound at depth `N`: the largest
/// `|seed − β_j/α_j|` over `N ≤ j < N + RATE_WINDOW`.
///
/// A single index can match the seed by coincidence and report `C = 0`.
fn bound_constant(cf: &impl CfCoeffs<f64>, seed: f64, n: usize) -> Result<f64> {
    let mut c: f64 = 0.0;
    for j in n..n + RATE_WINDOW {
        let (alpha, beta) = cf.coeffs(j)?;
        if alpha.is_singular() {
            return Ok(f64::INFINITY);
        }
        c = c.max((seed - beta / alpha).abs());
    }
    Ok(c)
}

/// Smallest depth `N ≥ k` with `C(N)·rate^(N−k) ≤ tol`, or the first depth
/// whose seed index lies in the exactly-constant region (bound 0).
fn certify_depth(
    cf: &impl CfCoeffs<f64>,
    k: usize,
    seed: f64,
    rate: f64,
    tol: f64,
    cap: usize,
) -> Result<std::result::Result<(usize, f64), f64>> {
    let exact_from = cf.exact_from();
    let mut factor = 1.0f64;
    let mut last = f64::INFINITY;
    for offset in 0..=cap {
        let n = k + offset;
        if exact_from.is_some_and(|e| n + 1 >= e) {
            return Ok(Ok((n, 0.0)));
        }
        let c = bound_constant(cf, seed, n)?;
        last = c * factor;
        if last <= tol {
            return Ok(Ok((n, last)));
        }
        factor *= rate;
    }
    Ok(Err(last))
}

/// A non-contractive rate is tolerated when the stream is eventually exact:
/// the depth search then stops in the exact region.
fn usable_rate(cf: &impl CfCoeffs<f64>, r: Result<ContractionRate>) -> Result<f64> {
    match r {
        Ok(r) => Ok(r.rate),
        Err(Error::NonContractive { rate }) if cf.exact_from().is_some() => Ok(rate),
        Err(e) => Err(e),
    }
}

fn backward_from(
    cf: &impl CfCoeffs<f64>,
    seed: f64,
    k: usize,
    n: usize,
    mut visit: impl FnMut(usize, f64),
) -> Result<f64> {
    let mut t = seed;
    for j in (k..=n).rev() {
        let (alpha, beta) = cf.coeffs(j)?;
        t = step(alpha, beta, t, j)?;
        visit(j, t);
    }
    Ok(t)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// The tail `ξ_k` to within `tol`.
///
/// The backward recurrence runs from depth `N` seeded with the limit value
/// [`limit_tail`] at index `N + 1`; `N` is the first depth whose bound
/// `C(N)·rate^(N−k)` is at most `tol`, where `C(N)` is the largest
/// `|seed − β_j/α_j|` over the next [`RATE_WINDOW`] indices.
pub fn tail(
    cf: &impl CfCoeffs<f64>,
    k: usize,
    tol: f64,
    opts: &TailOptions,
) -> Result<TailEstimate> {
    check_tol(tol)?;
    if k == 0 {
        return Err(Error::InvalidArgument("tail index starts at 1".into()));
    }
    let (alpha, beta) = cf.limits();
    let seed = limit_tail(alpha, beta)?;
    let rate = usable_rate(cf, contraction_rate(cf, k))?;
    match certify_depth(cf, k, seed, rate, tol, opts.depth_cap)? {
        Ok((n, err_bound)) => {
            let value = backward_from(cf, seed, k, n, |_, _| {})?;
            Ok(TailEstimate {
                index: k,
                value,
                err_bound,
                depth: n,
                rate,
            })
        }
        Err(err_bound) => {
            let depth = k + opts.depth_cap;
            let best = backward_from(cf, seed, k, depth, |_, _| {})?;
            Err(Error::Convergence {
                index: k,
                best,
                err_bound,
                depth,
            })
        }
    }
}

/// Tails `ξ_j` for `j = k_lo..=k_hi` from a single backward sweep.
///
/// The depth is certified at `k_hi`; lower indices inherit a smaller bound.
pub fn tails_range(
    cf: &impl CfCoeffs<f64>,
    k_lo: usize,
    k_hi: usize,
    tol: f64,
    opts: &TailOptions,
) -> Result<Vec<TailEstimate>> {
    check_tol(tol)?;
    if k_lo == 0 || k_lo > k_hi {
        return Err(Error::InvalidArgument(format!(
            "bad tail range {k_lo}..={k_hi}"
        )));
    }
    let (alpha, beta) = cf.limits();
    let seed = limit_tail(alpha, beta)?;
    let rate = usable_rate(cf, rate_over(cf, k_lo, k_hi + RATE_WINDOW))?;
    let (n, top_bound) = match certify_depth(cf, k_hi, seed, rate, tol, opts.depth_cap)? {
        Ok(found) => found,
        Err(err_bound) => {
            let depth = k_hi + opts.depth_cap;
            let best = backward_from(cf, seed, k_hi, depth, |_, _| {})?;
            return Err(Error::Convergence {
                index: k_hi,
                best,
                err_bound,
                depth,
            });
        }
    };
    let c = if n == k_hi {
        top_bound
    } else {
        top_bound / rate.powi((n - k_hi) as i32)
    };
    let mut out = vec![
        TailEstimate {
            index: 0,
            value: 0.0,
            err_bound: 0.0,
            depth: n,
            rate,
        };
        k_hi - k_lo + 1
    ];
    backward_from(cf, seed, k_lo, n, |j, t| {
        if j <= k_hi {
            let e = &mut out[j - k_lo];
            e.index = j;
            e.value = t;
            e.err_bound = c * rate.powi((n - j) as i32);
        }
    })?;
    Ok(out)
}
