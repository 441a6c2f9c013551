//! Float-vs-exact certification of the public numeric operations.
//!
//! Inputs are dyadic rationals so that the binary64 copy of every test
//! sequence is exact and any disagreement comes from the float path alone.

use rand::Rng;

use crate::asymptotics::{
    cf_from_sequence, companion_at, companion_product_entry, m_to_a_entry_identity,
    m_to_a_entry_identity_exact, product_entry, Entry,
};
use crate::contfrac::{approximant, limit_tail, seidel_stern_check, tail, CoeffTable, TailOptions};
use crate::error::Result;
use crate::mat2::{companion, eigenvalues, lambda_of, validate_limit_matrix, Mat2};
use crate::oracle::{
    exact_approximant, exact_companion_product_entry, exact_product_entry, gen, tail_enclosure,
    OracleConfig, RationalMat2, RationalSequence,
};
use crate::scalar::{ratio, rel_err, Rational, Scalar};
use crate::sequences::{MatrixSource, TableSequence};
use num_traits::{Signed, ToPrimitive};

/// Maximum relative error tolerated between a float result and its exact mirror.
pub const CERT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelftestConfig {
    pub seed: u64,
    pub cases: usize,
    pub max_depth: usize,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            seed: 20_240_917,
            cases: 24,
            max_depth: 40,
        }
    }
}

/// Outcome of one certification check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub comparisons: usize,
    pub max_rel_err: f64,
    pub violations: usize,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            comparisons: 0,
            max_rel_err: 0.0,
            violations: 0,
        }
    }

    fn record(&mut self, err: f64) {
        self.comparisons += 1;
        if err.is_nan() || err > self.max_rel_err {
            self.max_rel_err = if err.is_nan() { f64::INFINITY } else { err };
        }
        if !(err <= CERT_REL_TOL) {
            self.violations += 1;
        }
    }

    fn record_bool(&mut self, ok: bool) {
        self.comparisons += 1;
        if !ok {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.comparisons > 0
    }
}

fn dyadic(rng: &mut impl Rng, max: i64) -> Rational {
    let den = 1i64 << rng.random_range(0..=3);
    ratio(rng.random_range(0..=max * den), den)
}

fn positive_dyadic(rng: &mut impl Rng, max: i64) -> Rational {
    let den = 1i64 << rng.random_range(0..=3);
    ratio(rng.random_range(1..=max * den), den)
}

/// Random dyadic limit with positive entries and the requested sign of `bd − aθ`.
pub fn dyadic_limit(rng: &mut impl Rng, sign: i8) -> RationalMat2 {
    loop {
        let m = Mat2::new(
            positive_dyadic(rng, 4),
            positive_dyadic(rng, 4),
            positive_dyadic(rng, 4),
            positive_dyadic(rng, 4),
        );
        if validate_limit_matrix(&m).det_sign == sign {
            return m;
        }
    }
}

/// `M_k = M + E_k / 2^⌈log₂ k⌉` with dyadic `E_k` in `[−1, 1]`, entries kept ≥ 1/8
/// and `bd ≠ aθ` at every row.
pub fn dyadic_sequence(rng: &mut impl Rng, limit: RationalMat2, len: usize) -> RationalSequence {
    let floor = ratio(1, 8);
    let rows = (1..=len)
        .map(|k| {
            let scale = ratio(1, (k as u64).next_power_of_two() as i64);
            loop {
                let m = Mat2::from_entries(limit.entries().map(|x| {
                    let e = dyadic(rng, 2) - ratio(1, 1);
                    let v = x + e * scale.clone();
                    if v < floor {
                        floor.clone()
                    } else {
                        v
                    }
                }));
                if validate_limit_matrix(&m).det_nonzero {
                    break m;
                }
            }
        })
        .collect();
    TableSequence::new(rows, limit)
}

/// Positive dyadic coefficient stream, constant with dyadic tail past `len`.
///
/// `α_j ≥ 2` and `β_j ≤ 3` keep every step factor below one.
pub fn dyadic_stream(rng: &mut impl Rng, len: usize) -> gen::EventuallyConstantCf {
    let two = ratio(2, 1);
    let rows = (0..len)
        .map(|_| (two.clone() + dyadic(rng, 2), positive_dyadic(rng, 3)))
        .collect();
    let alpha = two + dyadic(rng, 2);
    let xi = positive_dyadic(rng, 1);
    let beta = xi.clone() * (alpha.clone() + xi.clone());
    gen::EventuallyConstantCf {
        table: CoeffTable::new(rows, (alpha, beta)),
        limit_tail: xi,
        len,
    }
}

fn float_table(t: &CoeffTable<Rational>, len: usize) -> CoeffTable<f64> {
    let rows = (1..=len)
        .map(|k| {
            let (a, b) = crate::contfrac::CfCoeffs::coeffs(t, k).expect("table index in range");
            (a.to_f64_lossy(), b.to_f64_lossy())
        })
        .collect();
    let (a, b) = crate::contfrac::CfCoeffs::limits(t);
    CoeffTable::new(rows, (a.to_f64_lossy(), b.to_f64_lossy()))
}

fn rel(x: f64, y: &Rational) -> f64 {
    rel_err(x, y)
}

/// Runs every certification check. Seeds are deterministic in `cfg.seed`.
pub fn run_certification(cfg: &SelftestConfig) -> Result<Vec<Check>> {
    let mut rng = gen::rng(cfg.seed);
    let oracle = OracleConfig::default();
    let opts = TailOptions::default();
    let depth = cfg.max_depth.min(oracle.depth_cap);

    let mut eig = Check::new("eigenvalues");
    let mut comp = Check::new("companion");
    let mut lam = Check::new("lambda_of");
    let mut coeffs = Check::new("cf_from_sequence");
    let mut approx = Check::new("approximant");
    let mut prod = Check::new("product_entry");
    let mut cprod = Check::new("companion_product_entry");
    let mut mtoa = Check::new("m_to_a_entry_identity");
    let mut seidel = Check::new("seidel_stern_check");
    let mut limit = Check::new("limit_tail");
    let mut tails = Check::new("tail_enclosure");

    for case in 0..cfg.cases {
        let sign = if case % 2 == 0 { 1 } else { -1 };
        let lim = dyadic_limit(&mut rng, sign);
        let seq = dyadic_sequence(&mut rng, lim.clone(), depth + 2);
        let fseq = seq.to_float()?;

        // Eigenvalues: exact trace and determinant of the limit.
        let e = eigenvalues(&lim.to_f64())?;
        let tr = lim.trace();
        let det = lim.det();
        eig.record(rel(e.rho + e.rho1, &tr));
        let det_scale =
            (lim.a.clone() * lim.theta.clone()).abs() + (lim.b.clone() * lim.d.clone()).abs();
        let det_err =
            (Rational::from_float(e.rho * e.rho1).expect("finite") - det).abs() / det_scale;
        eig.record(det_err.to_f64().unwrap_or(f64::INFINITY));

        let cf_exact = cf_from_sequence(&seq)?;
        let cf_float = cf_from_sequence(&fseq)?;
        for k in 1..=depth {
            let ce = companion_at(&seq, k)?;
            let cf = companion(&fseq.matrix(k), &fseq.matrix(k + 1), k)?;
            comp.record(rel(cf.a_tilde, &ce.a_tilde));
            comp.record(rel(cf.b_tilde, &ce.b_tilde));
            comp.record(rel(cf.d_tilde, &ce.d_tilde));
            lam.record(rel(
                lambda_of(&fseq.matrix(k), k)?.sub,
                &lambda_of(&seq.matrix(k), k)?.sub,
            ));
            let (ae, be) = crate::contfrac::CfCoeffs::coeffs(&cf_exact, k)?;
            let (af, bf) = crate::contfrac::CfCoeffs::<f64>::coeffs(&cf_float, k)?;
            coeffs.record(rel(af, &ae));
            coeffs.record(rel(bf, &be));
        }

        // Approximant denominators are nonzero for all-positive sequences.
        for k in [1usize, 3] {
            for n in (k..=depth).step_by(3) {
                let x = exact_approximant(&cf_exact, k, n)?;
                approx.record(rel(approximant(&cf_float, k, n)?, &x));
            }
        }

        for n in (1..=depth).step_by(3) {
            for entry in Entry::ALL {
                let x = exact_product_entry(&seq, 0, n, entry, &oracle)?;
                prod.record(rel(product_entry(&fseq, 0, n, entry)?.to_f64(), &x));
                let y = exact_companion_product_entry(&seq, 0, n, entry, &oracle)?;
                cprod.record(rel(
                    companion_product_entry(&fseq, 0, n, entry)?.to_f64(),
                    &y,
                ));
            }
            for i in 1..=2 {
                let (l, r) = m_to_a_entry_identity(&fseq, 0, n, i)?;
                let (le, re) = m_to_a_entry_identity_exact(&seq, 0, n, i)?;
                mtoa.record(rel(l.to_f64(), &le));
                mtoa.record(rel(r.to_f64(), &re));
            }
        }

        // Positive coefficient streams: tails inside the alternating enclosure.
        let stream = dyadic_stream(&mut rng, depth);
        let ftable = float_table(&stream.table, depth);
        let (alpha, beta) = crate::contfrac::CfCoeffs::limits(&stream.table);
        limit.record(rel(
            limit_tail(alpha.to_f64_lossy(), beta.to_f64_lossy())?,
            &stream.limit_tail,
        ));
        match (
            seidel_stern_check(&stream.table, 1, depth)?,
            seidel_stern_check(&ftable, 1, depth)?,
        ) {
            (Some(x), Some(f)) => seidel.record(rel(f, &x)),
            (x, f) => seidel.record_bool(x.is_none() && f.is_none()),
        }
        for k in [1usize, 5, 12] {
            let t = tail(&ftable, k, 1e-13, &opts)?;
            let exact = stream.exact_tail(k)?;
            let (lo, hi) = tail_enclosure(&stream.table, k, depth)?;
            let widen = Rational::from_float(t.err_bound + 4.0 * f64::EPSILON * t.value.abs())
                .expect("finite");
            let v = Rational::from_float(t.value).expect("finite");
            tails.record_bool(v >= lo - widen.clone() && v <= hi + widen);
            // Distance beyond the certified bound counts as an error.
            let excess = (v - exact).abs().to_f64().unwrap_or(f64::INFINITY) - t.err_bound;
            tails.record(excess.max(0.0));
        }
    }
    Ok(vec![
        eig, comp, lam, coeffs, approx, prod, cprod, mtoa, seidel, limit, tails,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certification_passes_small() {
        let cfg = SelftestConfig {
            cases: 4,
            max_depth: 16,
            ..SelftestConfig::default()
        };
        for c in run_certification(&cfg).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn dyadic_inputs_are_float_exact() {
        let mut rng = gen::rng(1);
        let lim = dyadic_limit(&mut rng, -1);
        let seq = dyadic_sequence(&mut rng, lim, 10);
        let f = seq.to_float().unwrap();
        for k in 1..=11 {
            let back = f.matrix(k).map(|x| <Rational as Scalar>::from_f64(*x));
            assert_eq!(back, seq.matrix(k));
        }
    }
}
