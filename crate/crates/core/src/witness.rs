//! The Möbius witness family: `q_n`, `p_n`, `r_n`, the graded trilinear
//! certificate for `3!·T_{q_n}`, and the ratio table.
//!
//! Variables are 0-based: block `B ∈ {0,1,2}` holds `x_{B·n + v - 1}` for values
//! `v ∈ 1..=n`, and `x_{3n}` is the extra variable of `r_n`. Everything here is
//! exact rational arithmetic.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::cert::CbCertificate;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::poly::{Partition, Polynomial, ENUM_CAP};
use crate::queryerror::eps_lower_from_witness;
use crate::scalar::{Rational, Scalar};
use crate::tensor::symmetric_tensor_of;

pub const MOEBIUS_CAP: usize = 100_000_000;

/// Largest `n` whose `3n` variables are enumerated exactly.
pub const EXACT_N_CAP: usize = ENUM_CAP / 3;

/// Local-search restarts used for `‖q_n‖_∞` beyond [`EXACT_N_CAP`].
const LOCAL_SEARCH_RESTARTS: usize = 64;

/// Möbius values `f0(1..=N)`.
#[derive(Clone, Debug)]
pub struct MoebiusTable {
    values: Vec<i8>,
}

impl MoebiusTable {
    pub fn len(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `f0(a)` for `1 ≤ a ≤ N`.
    pub fn get(&self, a: usize) -> i8 {
        assert!(a >= 1 && a < self.values.len(), "f0({a}) outside the table");
        self.values[a]
    }

    /// Number of square-free integers in `1..=m`.
    pub fn squarefree_count(&self, m: usize) -> usize {
        self.values[1..=m].iter().filter(|&&v| v != 0).count()
    }
}

/// Linear sieve.
pub fn moebius_sieve(n: usize) -> Result<MoebiusTable> {
    if n > MOEBIUS_CAP {
        return Err(Error::CapExceeded { what: "Möbius sieve", size: n, cap: MOEBIUS_CAP });
    }
    let mut mu = vec![0i8; n + 1];
    let mut composite = vec![false; n + 1];
    let mut primes: Vec<usize> = Vec::new();
    if n >= 1 {
        mu[1] = 1;
    }
    for i in 2..=n {
        if !composite[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &p in &primes {
            let m = i * p;
            if m > n {
                break;
            }
            composite[m] = true;
            if i % p == 0 {
                mu[m] = 0;
                break;
            }
            mu[m] = -mu[i];
        }
    }
    Ok(MoebiusTable { values: mu })
}

/// `S(N)/N`, where `S(N)` counts the square-free integers in `1..=N`.
pub fn squarefree_density(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("density needs N ≥ 1".into()));
    }
    let table = moebius_sieve(n)?;
    Ok(table.squarefree_count(n) as f64 / n as f64)
}

/// Representative of `x mod n` in `1..=n`.
pub fn rep(x: i64, n: usize) -> usize {
    ((x - 1).rem_euclid(n as i64) + 1) as usize
}

fn var(block: usize, value: usize, n: usize) -> usize {
    block * n + value - 1
}

/// `Σ_{a,b ∈ Z_n} f0([a+3b]) x_{[a]} x_{n+[a+b]} x_{2n+[a+2b]}` on `3n` variables.
pub fn build_qn(n: usize) -> Result<Polynomial<Rational>> {
    if n == 0 {
        return Err(Error::InvalidInput("q_n needs n ≥ 1".into()));
    }
    let mu = moebius_sieve(n)?;
    let mut monomials = Vec::with_capacity(n * n);
    for a in 0..n as i64 {
        for b in 0..n as i64 {
            let c = mu.get(rep(a + 3 * b, n));
            if c == 0 {
                continue;
            }
            let vars = [var(0, rep(a, n), n), var(1, rep(a + b, n), n), var(2, rep(a + 2 * b, n), n)];
            monomials.push((vars, Rational::from_i64(c as i64)));
        }
    }
    let refs: Vec<(&[usize], Rational)> = monomials.iter().map(|(v, c)| (&v[..], c.clone())).collect();
    Polynomial::from_monomials(3 * n, &refs)
}

#[derive(Clone, Debug)]
pub struct WitnessFamily {
    pub n: usize,
    pub q: Polynomial<Rational>,
    pub p: Polynomial<Rational>,
    pub r: Polynomial<Rational>,
    pub partition: Partition,
    /// `‖q_n‖_∞`; a local-search lower bound when `exact` is false.
    pub q_norm_inf: Rational,
    pub q_norm2_sq: Rational,
    /// `‖r_n‖_1`, computed only when the cube is enumerable.
    pub r_norm_one: Option<Rational>,
    pub squarefree: usize,
    pub exact: bool,
}

fn require_odd(n: usize) -> Result<()> {
    if n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "n = {n} is even; the construction needs 2 invertible mod n"
        )));
    }
    Ok(())
}

/// `q_n`, `r_n = q_n·x_{3n+1}`, `p_n = r_n/‖q_n‖_∞` and the four-block partition.
pub fn build_family(n: usize) -> Result<WitnessFamily> {
    require_odd(n)?;
    let q = build_qn(n)?;
    let exact = n <= EXACT_N_CAP;
    let q_norm_inf = if exact {
        q.norm_inf_exact()?
    } else {
        q.norm_inf_local_search(LOCAL_SEARCH_RESTARTS, n as u64)?.0
    };
    let r = q.times_variable(3 * n + 1, 3 * n)?;
    let p = r.scale(&(Rational::one() / q_norm_inf.clone()));
    let q_norm2_sq = q.inner(&q)?;
    let r_norm_one = if 3 * n < ENUM_CAP { Some(r.norm_one_exact()?) } else { None };
    Ok(WitnessFamily {
        n,
        partition: Partition::blocks(&[n, n, n, 1])?,
        squarefree: moebius_sieve(n)?.squarefree_count(n),
        q,
        p,
        r,
        q_norm_inf,
        q_norm2_sq,
        r_norm_one,
        exact,
    })
}

/// Graded certificate of weight one realizing `3!·T_{q_n}`.
///
/// Levels: `H0` (index 0), `H1` indexed by `(block, value)`, `H2` by
/// `(missing block, forced value)`, `H3` (last index). `A(i)` for `x_i` in block
/// `B` with value `v` has three components: `H0 → (B, v)`; `(B', v') ↦ f0·(B'', w'')`
/// for `B' ≠ B`, where `(a, b)` is solved from the two known pairs and `(B'', w'')`
/// is the remaining variable of that monomial; and `(B, v) → H3`.
pub fn varopoulos_certificate(n: usize) -> Result<CbCertificate<Rational>> {
    require_odd(n)?;
    let mu = moebius_sieve(n)?;
    let d = 6 * n + 2;
    let h1 = |b: usize, v: usize| 1 + var(b, v, n);
    let h2 = |b: usize, v: usize| 1 + 3 * n + var(b, v, n);
    let top = d - 1;
    let half = (n as i64 + 1) / 2;
    let ni = n as i64;
    // (a, b) from two (block, value) pairs with distinct blocks.
    let solve = |(b1, v1): (usize, i64), (b2, v2): (usize, i64)| -> (i64, i64) {
        let ((b1, v1), (b2, v2)) = if b1 < b2 { ((b1, v1), (b2, v2)) } else { ((b2, v2), (b1, v1)) };
        match (b1, b2) {
            (0, 1) => (v1, v2 - v1),
            (0, 2) => (v1, ((v2 - v1) * half).rem_euclid(ni)),
            _ => {
                let b = v2 - v1;
                (v1 - b, b)
            }
        }
    };
    let mut ops = Vec::with_capacity(3 * n);
    for block in 0..3 {
        for value in 1..=n {
            let mut a = SparseMatrix::zeros(d, d);
            a.add_to(0, h1(block, value), Rational::one());
            for other in (0..3).filter(|&o| o != block) {
                let missing = 3 - block - other;
                for v in 1..=n {
                    let (x, y) = solve((other, v as i64), (block, value as i64));
                    let c = mu.get(rep(x + 3 * y, n));
                    if c != 0 {
                        let forced = rep(x + missing as i64 * y, n);
                        a.add_to(h1(other, v), h2(missing, forced), Rational::from_i64(c as i64));
                    }
                }
            }
            a.add_to(h2(block, value), top, Rational::one());
            ops.push(a);
        }
    }
    let mut u = vec![Rational::zero(); d];
    let mut v = vec![Rational::zero(); d];
    u[0] = Rational::one();
    v[top] = Rational::one();
    CbCertificate::new(3, Rational::one(), u, v, ops)
}

/// Appends `A(3n+1) = I`, turning the order-3 certificate into one of order 4.
pub fn extend_with_identity(cert: &CbCertificate<Rational>) -> Result<CbCertificate<Rational>> {
    cert.with_operator(SparseMatrix::identity(cert.dim()))?.with_order(cert.order() + 1)
}

/// Outcome of the exhaustive checks on a graded certificate.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateCheck {
    pub order: usize,
    pub variables: usize,
    pub realizes_target: bool,
    pub zero_orders: Vec<(usize, bool)>,
    pub exact_contractions: bool,
    pub weight_one: bool,
}

impl CertificateCheck {
    pub fn passed(&self) -> bool {
        self.realizes_target
            && self.exact_contractions
            && self.weight_one
            && self.zero_orders.iter().all(|&(_, ok)| ok)
    }
}

/// Compares the realization with `order!·T_target` and checks that the other
/// listed orders realize zero. Zero tolerance: every operator must be a signed
/// partial permutation and `‖u‖² = ‖v‖² = 1` exactly.
pub fn check_certificate(
    cert: &CbCertificate<Rational>,
    target: &Polynomial<Rational>,
    zero_orders: &[usize],
) -> Result<CertificateCheck> {
    let t = cert.order();
    let fact = Rational::from_i64((1..=t as i64).product());
    let expected = symmetric_tensor_of(target, t)?.scale(&fact);
    let realized = cert.realize()?;
    let report = cert.validate(0.0);
    let zero_orders = zero_orders
        .iter()
        .map(|&k| Ok((k, cert.realize_order(k)?.is_zero())))
        .collect::<Result<Vec<_>>>()?;
    Ok(CertificateCheck {
        order: t,
        variables: cert.n(),
        realizes_target: realized == expected,
        zero_orders,
        exact_contractions: report.exact_contractions && report.is_valid(),
        weight_one: cert.weight().is_one(),
    })
}

/// One row of the ratio table.
#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub n: usize,
    pub squarefree: usize,
    pub q_terms: usize,
    pub q_norm_inf: f64,
    pub q_norm2_sq: f64,
    pub cb_dual_upper: f64,
    /// `⟨r_n, p_n⟩ = ‖q_n‖_2²/‖q_n‖_∞`.
    pub inf_dual_lower: f64,
    /// `cb_dual_upper / inf_dual_lower = ‖q_n‖_∞/(n·S(n))`.
    pub ratio: f64,
    pub r_norm_one: f64,
    pub eps_lower: f64,
    pub exact: bool,
    pub certificate: String,
}

pub fn ratio_row(n: usize) -> Result<RatioRow> {
    if n > EXACT_N_CAP {
        return Err(Error::CapExceeded { what: "ratio table n", size: n, cap: EXACT_N_CAP });
    }
    let fam = build_family(n)?;
    let cert = extend_with_identity(&varopoulos_certificate(n)?)?;
    let bound = eps_lower_from_witness(&fam.p, &fam.r, &fam.partition, &cert, &fam.r)?;
    let lower = fam.r.inner(&fam.p)?;
    let ratio = cert.weight().clone() / lower.clone();
    debug_assert_eq!(
        ratio,
        fam.q_norm_inf.clone() / Rational::from_i64((n * fam.squarefree) as i64)
    );
    Ok(RatioRow {
        n,
        squarefree: fam.squarefree,
        q_terms: fam.q.num_terms(),
        q_norm_inf: fam.q_norm_inf.to_f64(),
        q_norm2_sq: fam.q_norm2_sq.to_f64(),
        cb_dual_upper: cert.weight().to_f64(),
        inf_dual_lower: lower.to_f64(),
        ratio: ratio.to_f64(),
        r_norm_one: bound.ub_infdual.to_f64(),
        eps_lower: bound.value.to_f64(),
        exact: fam.exact,
        certificate: format!("graded certificate, dimension {}, weight 1", cert.dim()),
    })
}

pub fn ratio_report(ns: &[usize]) -> Result<Vec<RatioRow>> {
    ns.iter().map(|&n| ratio_row(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::MultiIndex;

    #[test]
    fn moebius_values() {
        let t = moebius_sieve(30).unwrap();
        assert_eq!((t.get(1), t.get(12), t.get(30), t.get(7)), (1, 0, -1, -1));
        assert_eq!(t.squarefree_count(10), 7);
        assert_eq!(t.squarefree_count(1), 1);
        assert_eq!(squarefree_density(10).unwrap(), 0.7);
        assert!(moebius_sieve(MOEBIUS_CAP + 1).is_err());
    }

    #[test]
    fn q3_terms() {
        let q = build_qn(3).unwrap();
        assert_eq!(q.num_terms(), 9);
        // (a, b) = (1, 1): x1 x5 x9, coefficient f0(1).
        assert_eq!(q.coefficient(&MultiIndex::from_vars(9, &[0, 4, 8])), Rational::one());
        assert_eq!(q.inner(&q).unwrap(), Rational::from_i64(9));
    }

    #[test]
    fn family_at_three() {
        let f = build_family(3).unwrap();
        assert!(f.exact);
        assert_eq!(f.q_norm_inf, Rational::from_i64(9));
        assert!(f.p.norm_inf_exact().unwrap().is_one());
        assert!(f.r.is_block_multilinear(&f.partition));
        assert_eq!(f.r.inner(&f.p).unwrap(), Rational::from_i64(9) / f.q_norm_inf.clone());
        assert!(build_family(4).is_err());
    }

    #[test]
    fn certificate_identities_at_three() {
        let q = build_qn(3).unwrap();
        let c = varopoulos_certificate(3).unwrap();
        assert_eq!(c.dim(), 20);
        assert!(c.ops().iter().all(|a| a.is_signed_partial_permutation()));
        assert!(check_certificate(&c, &q, &[1, 2, 4]).unwrap().passed());
        let f = build_family(3).unwrap();
        let e = extend_with_identity(&c).unwrap();
        assert!(e.weight().is_one());
        assert!(check_certificate(&e, &f.r, &[]).unwrap().passed());
        // Two occurrences of the extra variable give zero.
        assert!(e.value(&[9, 9, 0, 3]).unwrap().is_zero());
    }

    #[test]
    fn ratio_rows() {
        let rows = ratio_report(&[3, 5]).unwrap();
        assert_eq!(rows[0].ratio, 1.0);
        assert_eq!(rows[0].eps_lower, 0.0);
        assert_eq!((rows[1].q_norm_inf, rows[1].q_norm2_sq), (14.0, 20.0));
        assert!((rows[1].ratio - 0.7).abs() < 1e-15);
        assert!(rows[1].eps_lower > 0.0);
    }
}
