//! Polynomials over the Boolean hypercube {-1,1}^n.
//!
//! Variables are 0-based in the Rust API and 1-based in every serialized form.
//! On the hypercube a monomial `x^α` only depends on which exponents are odd,
//! so exact norms are computed from a table of (odd-variable mask, coefficient)
//! pairs; a point is encoded as a bitmask whose set bits mark `x_i = -1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Default largest `n` for which the exact hypercube norms enumerate `2^n` points.
pub const ENUM_CAP: usize = 24;

/// Largest family size for which `project_wq_by_averaging` enumerates sign flips.
pub const AVERAGING_CAP: usize = 20;

const CHUNK: u64 = 1 << 14;

/// Exponent vector `α ∈ Z_{≥0}^n`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Monomial `x_{v_1} x_{v_2} ...` (0-based variables, repeats allowed).
    pub fn from_vars(n: usize, vars: &[usize]) -> Self {
        let mut e = vec![0; n];
        for &v in vars {
            e[v] += 1;
        }
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn is_multilinear(&self) -> bool {
        self.0.iter().all(|&a| a <= 1)
    }

    /// Bitmask of variables with odd exponent. Requires `n <= 64`.
    pub fn odd_mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a % 2 == 1)
            .fold(0u64, |m, (i, _)| m | (1u64 << i))
    }

    /// Variables listed with multiplicity, in increasing order.
    pub fn vars(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| std::iter::repeat_n(i, a as usize))
            .collect()
    }
}

/// A family of pairwise disjoint, non-empty subsets of `{0..n-1}`; `total`
/// records whether it covers every variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    parts: Vec<Vec<usize>>,
    total: bool,
}

impl Partition {
    pub fn new(n: usize, parts: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut sorted = Vec::with_capacity(parts.len());
        for mut part in parts {
            if part.is_empty() {
                return Err(Error::InvalidPartition("empty part".into()));
            }
            part.sort_unstable();
            for &v in &part {
                if v >= n {
                    return Err(Error::InvalidPartition(format!(
                        "variable {} outside 1..={n}",
                        v + 1
                    )));
                }
                if seen[v] {
                    return Err(Error::InvalidPartition(format!(
                        "variable {} appears in two parts",
                        v + 1
                    )));
                }
                seen[v] = true;
            }
            sorted.push(part);
        }
        let total = seen.iter().all(|&s| s);
        Ok(Partition {
            n,
            parts: sorted,
            total,
        })
    }

    pub fn from_one_based(n: usize, parts: Vec<Vec<usize>>) -> Result<Self> {
        let mut zero = Vec::with_capacity(parts.len());
        for part in parts {
            let mut p = Vec::with_capacity(part.len());
            for v in part {
                if v == 0 {
                    return Err(Error::InvalidPartition("variables are numbered from 1".into()));
                }
                p.push(v - 1);
            }
            zero.push(p);
        }
        Self::new(n, zero)
    }

    /// Parses `"1,2,3;4,5,6"` (1-based variables, parts separated by `;`).
    pub fn parse(n: usize, s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Self::new(n, vec![]);
        }
        let mut parts = Vec::new();
        for chunk in s.split(';') {
            let mut part = Vec::new();
            for tok in chunk.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let v: usize = tok
                    .parse()
                    .map_err(|_| Error::InvalidPartition(format!("bad variable `{tok}`")))?;
                part.push(v);
            }
            parts.push(part);
        }
        Self::from_one_based(n, parts)
    }

    /// Consecutive blocks of the given sizes covering `0..Σsizes`.
    pub fn blocks(sizes: &[usize]) -> Result<Self> {
        let mut parts = Vec::new();
        let mut start = 0;
        for &s in sizes {
            parts.push((start..start + s).collect());
            start += s;
        }
        Self::new(start, parts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_total(&self) -> bool {
        self.total
    }

    /// Index of the part containing `var`.
    pub fn part_of(&self, var: usize) -> Option<usize> {
        self.parts.iter().position(|p| p.contains(&var))
    }

    pub fn part_masks(&self) -> Vec<u64> {
        self.parts
            .iter()
            .map(|p| p.iter().fold(0u64, |m, &v| m | (1u64 << v)))
            .collect()
    }

    /// Same parts viewed inside a larger ground set.
    pub fn widen(&self, n: usize) -> Result<Self> {
        Self::new(n, self.parts.clone())
    }

    /// True when, for every part, the exponents of `alpha` inside it sum to an odd number.
    pub fn odd_in_every_part(&self, alpha: &MultiIndex) -> bool {
        self.parts
            .iter()
            .all(|p| p.iter().map(|&v| alpha.0[v]).sum::<u32>() % 2 == 1)
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.parts
            .iter()
            .map(|p| p.iter().map(|v| v + 1).collect())
            .collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self
            .to_one_based()
            .iter()
            .map(|p| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", s.join(";"))
    }
}

/// Sparse polynomial `Σ c_α x^α` in `n` variables. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<S> {
    n: usize,
    terms: BTreeMap<MultiIndex, S>,
}

impl<S: Scalar> Polynomial<S> {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: S) -> Self {
        Self::from_terms(n, [(MultiIndex::zeros(n), c)]).expect("valid constant")
    }

    /// Builds a polynomial, summing repeated exponent vectors and dropping zeros.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (MultiIndex, S)>) -> Result<Self> {
        let mut map: BTreeMap<MultiIndex, S> = BTreeMap::new();
        for (alpha, c) in terms {
            check_dim("exponent vector", n, alpha.len())?;
            let e = map.entry(alpha).or_insert_with(S::zero);
            *e = e.clone() + c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(Polynomial { n, terms: map })
    }

    /// Builds from monomials given as lists of 0-based variables.
    pub fn from_monomials(n: usize, monomials: &[(&[usize], S)]) -> Result<Self> {
        for (vars, _) in monomials {
            if let Some(&v) = vars.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidInput(format!("variable {} outside 1..={n}", v + 1)));
            }
        }
        Self::from_terms(
            n,
            monomials
                .iter()
                .map(|(vars, c)| (MultiIndex::from_vars(n, vars), c.clone())),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, S> {
        &self.terms
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> S {
        self.terms.get(alpha).cloned().unwrap_or_else(S::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = &MultiIndex> {
        self.terms.keys()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn is_multilinear(&self) -> bool {
        self.terms.keys().all(MultiIndex::is_multilinear)
    }

    pub fn is_homogeneous(&self, d: usize) -> bool {
        self.terms.keys().all(|a| a.degree() == d)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim("polynomial sum", self.n, other.n)?;
        Self::from_terms(
            self.n,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(a, c)| (a.clone(), c.clone())),
        )
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::from_terms(
            self.n,
            self.terms.iter().map(|(a, c)| (a.clone(), c.clone() * s.clone())),
        )
        .expect("same dimension")
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Polynomial<T> {
        Polynomial::from_terms(self.n, self.terms.iter().map(|(a, c)| (a.clone(), f(c))))
            .expect("same dimension")
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        self.map_scalar(|c| c.to_f64())
    }

    /// `Σ_α c_α x^α` at a real point.
    pub fn eval(&self, x: &[S]) -> Result<S> {
        check_dim("evaluation point", self.n, x.len())?;
        Ok(self.terms.iter().fold(S::zero(), |acc, (alpha, c)| {
            let mut m = c.clone();
            for (xi, &a) in x.iter().zip(alpha.exponents()) {
                for _ in 0..a {
                    m = m * xi.clone();
                }
            }
            acc + m
        }))
    }

    /// Coefficient inner product `Σ_α c_α c'_α`.
    pub fn inner(&self, other: &Self) -> Result<S> {
        check_dim("polynomial inner product", self.n, other.n)?;
        Ok(self
            .terms
            .iter()
            .filter_map(|(a, c)| other.terms.get(a).map(|d| c.clone() * d.clone()))
            .fold(S::zero(), |acc, x| acc + x))
    }

    /// Restriction to the monomials of total degree `d`.
    pub fn homogeneous_part(&self, d: usize) -> Self {
        Polynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| a.degree() == d)
                .map(|(a, c)| (a.clone(), c.clone()))
                .collect(),
        }
    }

    /// Coefficient filter onto `W_Q`: keeps monomials with odd total degree inside every part of `q`.
    pub fn project_wq(&self, q: &Partition) -> Result<Self> {
        check_dim("partition ground set", self.n, q.n())?;
        Ok(Polynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| q.odd_in_every_part(a))
                .map(|(a, c)| (a.clone(), c.clone()))
                .collect(),
        })
    }

    /// `E_z[p(x·z) Π_{I∈Q} z_I]` by full enumeration of the sign vector `z`.
    pub fn project_wq_by_averaging(&self, q: &Partition, x: &[S]) -> Result<S> {
        check_dim("partition ground set", self.n, q.n())?;
        check_dim("evaluation point", self.n, x.len())?;
        if q.len() > AVERAGING_CAP {
            return Err(Error::CapExceeded {
                what: "sign-flip averaging",
                size: q.len(),
                cap: AVERAGING_CAP,
            });
        }
        let m = q.len();
        let mut total = S::zero();
        let mut xz = x.to_vec();
        for z in 0u64..(1u64 << m) {
            let mut sign = S::one();
            for (k, part) in q.parts().iter().enumerate() {
                let flip = (z >> k) & 1 == 1;
                for &v in part {
                    xz[v] = if flip { -x[v].clone() } else { x[v].clone() };
                }
                if flip {
                    sign = -sign;
                }
            }
            total = total + self.eval(&xz)? * sign;
        }
        Ok(total / S::from_i64(1i64 << m))
    }

    /// Membership in `V_P`: every monomial is multilinear with exactly one variable per part.
    pub fn is_block_multilinear(&self, p: &Partition) -> bool {
        if p.n() != self.n || !p.is_total() {
            return false;
        }
        self.terms.keys().all(|a| {
            a.is_multilinear()
                && a.degree() == p.len()
                && p
                    .parts()
                    .iter()
                    .all(|part| part.iter().map(|&v| a.exponents()[v]).sum::<u32>() == 1)
        })
    }

    /// Coefficients grouped by odd-exponent mask; the polynomial's restriction to the hypercube.
    pub fn sign_table(&self) -> Result<Vec<(u64, S)>> {
        if self.n > 64 {
            return Err(Error::CapExceeded {
                what: "hypercube mask width",
                size: self.n,
                cap: 64,
            });
        }
        let mut by_mask: BTreeMap<u64, S> = BTreeMap::new();
        for (a, c) in &self.terms {
            let e = by_mask.entry(a.odd_mask()).or_insert_with(S::zero);
            *e = e.clone() + c.clone();
        }
        Ok(by_mask.into_iter().filter(|(_, c)| !c.is_zero()).collect())
    }

    /// Value at the hypercube point encoded by `point` (bit `i` set means `x_i = -1`).
    pub fn eval_point_mask(table: &[(u64, S)], point: u64) -> S {
        table.iter().fold(S::zero(), |acc, (m, c)| {
            if (m & point).count_ones() % 2 == 1 {
                acc - c.clone()
            } else {
                acc + c.clone()
            }
        })
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        if self.n > cap {
            Err(Error::CapExceeded {
                what: "hypercube enumeration",
                size: self.n,
                cap,
            })
        } else {
            Ok(())
        }
    }

    /// `max_{x∈{-1,1}^n} |p(x)|`, exact, for `n <= ENUM_CAP`.
    pub fn norm_inf_exact(&self) -> Result<S> {
        self.norm_inf_exact_capped(ENUM_CAP)
    }

    pub fn norm_inf_exact_capped(&self, cap: usize) -> Result<S> {
        Ok(self.argmax_abs_capped(cap)?.0)
    }

    /// Largest `|p(x)|` on the hypercube with a maximizing point (as a bitmask).
    pub fn argmax_abs_capped(&self, cap: usize) -> Result<(S, u64)> {
        self.check_cap(cap)?;
        let table = self.sign_table()?;
        if let Some((ints, den)) = Self::integer_table(&table) {
            let (v, b) = Self::argmax_by(self.n, 0i128, |b| (Self::eval_int(&ints, b) as i128).abs());
            return Ok((S::from_i128(v) / den, b));
        }
        Ok(Self::argmax_by(self.n, S::zero(), |b| Self::eval_point_mask(&table, b).abs()))
    }

    /// Largest `f(b)` over all points; ties go to the smallest mask.
    fn argmax_by<T: PartialOrd + Send + Sync + Clone>(n: usize, zero: T, f: impl Fn(u64) -> T + Sync) -> (T, u64) {
        let points = 1u64 << n;
        let chunks = points.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut best = (zero.clone(), c * CHUNK);
                for b in c * CHUNK..((c + 1) * CHUNK).min(points) {
                    let v = f(b);
                    if v > best.0 {
                        best = (v, b);
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((zero.clone(), 0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    /// The sign table over a common denominator, when exact integer evaluation applies.
    fn integer_table(table: &[(u64, S)]) -> Option<(Vec<(u64, i64)>, S)> {
        if !S::EXACT {
            return None;
        }
        let coeffs: Vec<S> = table.iter().map(|(_, c)| c.clone()).collect();
        let (ints, den) = S::scaled_integers(&coeffs)?;
        Some((table.iter().map(|(m, _)| *m).zip(ints).collect(), den))
    }

    fn eval_int(table: &[(u64, i64)], point: u64) -> i64 {
        table.iter().fold(0i64, |acc, &(m, c)| {
            if (m & point).count_ones() % 2 == 1 {
                acc - c
            } else {
                acc + c
            }
        })
    }

    fn int_sum(n: usize, f: impl Fn(u64) -> i128 + Sync) -> i128 {
        let points = 1u64 << n;
        (0..points.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(points)).map(&f).sum::<i128>())
            .sum()
    }

    /// `E_x |p(x)|` under the uniform measure, exact, for `n <= ENUM_CAP`.
    pub fn norm_one_exact(&self) -> Result<S> {
        self.norm_one_exact_capped(ENUM_CAP)
    }

    pub fn norm_one_exact_capped(&self, cap: usize) -> Result<S> {
        self.check_cap(cap)?;
        let table = self.sign_table()?;
        let size = S::from_f64((1u64 << self.n) as f64);
        if let Some((ints, den)) = Self::integer_table(&table) {
            let sum = Self::int_sum(self.n, |b| (Self::eval_int(&ints, b) as i128).abs());
            return Ok(S::from_i128(sum) / den / size);
        }
        let sum = Self::hypercube_sum(self.n, |b| Self::eval_point_mask(&table, b).abs());
        Ok(sum / size)
    }

    /// Point-wise pairing `E_x[p(x) q(x)]`.
    pub fn hypercube_pairing(&self, other: &Self) -> Result<S> {
        check_dim("hypercube pairing", self.n, other.n)?;
        self.check_cap(ENUM_CAP)?;
        let (tp, tq) = (self.sign_table()?, other.sign_table()?);
        let sum = Self::hypercube_sum(self.n, |b| {
            Self::eval_point_mask(&tp, b) * Self::eval_point_mask(&tq, b)
        });
        Ok(sum / S::from_f64((1u64 << self.n) as f64))
    }

    /// Ordered chunked sum, so floating-point results do not depend on thread scheduling.
    fn hypercube_sum(n: usize, f: impl Fn(u64) -> S + Sync) -> S {
        let points = 1u64 << n;
        let chunks = points.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                (c * CHUNK..((c + 1) * CHUNK).min(points)).fold(S::zero(), |acc, b| acc + f(b))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(S::zero(), |acc, x| acc + x)
    }

    /// Heuristic lower bound on `‖p‖_∞` by single-flip local search with random
    /// restarts; usable beyond the enumeration cap. Returns the value and the point.
    pub fn norm_inf_local_search(&self, restarts: usize, seed: u64) -> Result<(S, Vec<S>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(S, Vec<S>)> = None;
        for _ in 0..restarts.max(1) {
            let mut x: Vec<S> = (0..self.n)
                .map(|_| if rng.gen::<bool>() { S::one() } else { -S::one() })
                .collect();
            let mut val = self.eval(&x)?.abs();
            loop {
                let mut improved = false;
                for i in 0..self.n {
                    x[i] = -x[i].clone();
                    let v = self.eval(&x)?.abs();
                    if v > val {
                        val = v;
                        improved = true;
                    } else {
                        x[i] = -x[i].clone();
                    }
                }
                if !improved {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(b, _)| val > *b) {
                best = Some((val, x));
            }
        }
        Ok(best.expect("at least one restart"))
    }
}

impl<S: Scalar> Polynomial<S> {
    /// `x_var · p` in a ground set of `n_new >= n` variables.
    pub fn times_variable(&self, n_new: usize, var: usize) -> Result<Self> {
        if n_new < self.n || var >= n_new {
            return Err(Error::InvalidInput("variable outside the widened ground set".into()));
        }
        Self::from_terms(
            n_new,
            self.terms.iter().map(|(a, c)| {
                let mut e = a.exponents().to_vec();
                e.resize(n_new, 0);
                e[var] += 1;
                (MultiIndex::new(e), c.clone())
            }),
        )
    }
}

/// How many distinct multilinear monomials of each degree `random_polynomial` draws.
///
/// Coefficients are i.i.d. uniform on `[-1, 1]`; monomials of a given degree
/// are a uniform random subset of the `C(n, degree)` candidates.
#[derive(Clone, Debug, Default)]
pub struct DegreeProfile {
    pub terms_per_degree: Vec<(usize, usize)>,
}

impl DegreeProfile {
    pub fn new(terms_per_degree: Vec<(usize, usize)>) -> Self {
        DegreeProfile { terms_per_degree }
    }
}

pub fn random_polynomial(n: usize, profile: &DegreeProfile, seed: u64) -> Polynomial<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for &(deg, count) in &profile.terms_per_degree {
        if deg > n {
            continue;
        }
        let mut chosen = BTreeSet::new();
        let total = binomial(n, deg);
        let want = count.min(total as usize);
        while chosen.len() < want {
            let vars = sample(&mut rng, n, deg).into_vec();
            chosen.insert(MultiIndex::from_vars(n, &vars));
        }
        for alpha in chosen {
            let c: f64 = rng.gen_range(-1.0..=1.0);
            terms.push((alpha, c));
        }
    }
    Polynomial::from_terms(n, terms).expect("consistent dimension")
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Serialized polynomial: 1-based variables, canonical term order on write.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub n: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub alpha: AlphaJson,
    pub c: f64,
}

/// Either a dense exponent vector of length `n` or sparse `[var, exp]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaJson {
    Dense(Vec<u32>),
    Sparse(Vec<(usize, u32)>),
}

impl Polynomial<f64> {
    pub fn to_json(&self) -> PolynomialJson {
        PolynomialJson {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(a, c)| TermJson {
                    alpha: AlphaJson::Dense(a.exponents().to_vec()),
                    c: *c,
                })
                .collect(),
        }
    }

    pub fn from_json(j: &PolynomialJson) -> Result<Self> {
        let mut terms = Vec::with_capacity(j.terms.len());
        for t in &j.terms {
            let alpha = match &t.alpha {
                AlphaJson::Dense(v) if v.is_empty() => MultiIndex::zeros(j.n),
                AlphaJson::Dense(v) => {
                    check_dim("dense exponent vector", j.n, v.len())?;
                    MultiIndex::new(v.clone())
                }
                AlphaJson::Sparse(pairs) => {
                    let mut e = vec![0; j.n];
                    for &(var, exp) in pairs {
                        if var == 0 || var > j.n {
                            return Err(Error::InvalidInput(format!(
                                "variable {var} outside 1..={}",
                                j.n
                            )));
                        }
                        e[var - 1] += exp;
                    }
                    MultiIndex::new(e)
                }
            };
            if !t.c.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
            terms.push((alpha, t.c));
        }
        Self::from_terms(j.n, terms)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn example_21() -> Polynomial<f64> {
        let third = 1.0 / 3.0;
        Polynomial::from_monomials(3, &[(&[0], third), (&[1], third), (&[2], third)]).unwrap()
    }

    fn q(vars: &[(&[usize], f64)], n: usize) -> Polynomial<f64> {
        Polynomial::from_monomials(n, vars).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(q(&[(&[0, 1], 1.0)], 2).eval(&[1.0, -1.0]).unwrap(), -1.0);
        assert!((example_21().eval(&[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(Polynomial::<f64>::zero(4).eval(&[1.0, -1.0, 0.5, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            Polynomial::<f64>::zero(2).eval(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        // Non-multilinear exponents on a real point.
        let sq = Polynomial::from_terms(1, [(MultiIndex::new(vec![2]), 1.0)]).unwrap();
        assert_eq!(sq.eval(&[3.0]).unwrap(), 9.0);
    }

    #[test]
    fn inner_examples() {
        let a = q(&[(&[0, 1], 1.0)], 3);
        assert_eq!(a.inner(&a).unwrap(), 1.0);
        assert_eq!(q(&[(&[0], 1.0)], 3).inner(&q(&[(&[1], 1.0)], 3)).unwrap(), 0.0);
        let e = example_21();
        assert!((e.inner(&e).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(a.inner(&Polynomial::zero(2)).is_err());
    }

    #[test]
    fn exact_norms() {
        let e = example_21().map_scalar(|c| BigRational::from_f64(*c));
        // Use exact thirds rather than the rounded float.
        let third = BigRational::from_ratio(1, 3);
        let e = Polynomial::from_terms(3, e.terms().keys().map(|a| (a.clone(), third.clone()))).unwrap();
        assert_eq!(e.norm_inf_exact().unwrap(), BigRational::from_ratio(1, 1));
        assert_eq!(e.norm_one_exact().unwrap(), BigRational::from_ratio(1, 2));
        assert_eq!(q(&[(&[0, 1], 1.0)], 2).norm_inf_exact().unwrap(), 1.0);
        assert_eq!(q(&[(&[0], 1.0), (&[0, 1], 1.0)], 2).norm_inf_exact().unwrap(), 2.0);
        assert_eq!(q(&[(&[0], 1.0)], 1).norm_one_exact().unwrap(), 1.0);
        assert_eq!(Polynomial::<f64>::zero(3).norm_one_exact().unwrap(), 0.0);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let p = q(&[(&[0], 1.0)], 30);
        assert!(matches!(p.norm_inf_exact(), Err(Error::CapExceeded { .. })));
        assert!(matches!(p.norm_one_exact_capped(10), Err(Error::CapExceeded { .. })));
        let (lb, x) = p.norm_inf_local_search(2, 1).unwrap();
        assert_eq!(lb, 1.0);
        assert_eq!(x.len(), 30);
    }

    #[test]
    fn homogeneous_parts() {
        let p = q(&[(&[0], 1.0), (&[0, 1], 1.0)], 2);
        assert_eq!(p.homogeneous_part(2), q(&[(&[0, 1], 1.0)], 2));
        let c = Polynomial::from_terms(2, [(MultiIndex::zeros(2), 1.0), (MultiIndex::new(vec![1, 0]), 1.0)])
            .unwrap();
        assert_eq!(c.homogeneous_part(0), Polynomial::constant(2, 1.0));
    }

    #[test]
    fn parity_projection() {
        let fam = Partition::from_one_based(3, vec![vec![1]]).unwrap();
        assert!(q(&[(&[1], 1.0)], 3).project_wq(&fam).unwrap().is_zero());
        let fam12 = Partition::from_one_based(3, vec![vec![1, 2]]).unwrap();
        assert!(q(&[(&[0, 1, 2], 1.0)], 3).project_wq(&fam12).unwrap().is_zero());
        let p = q(&[(&[0, 2], 1.0), (&[0, 1], 1.0)], 3);
        assert_eq!(p.project_wq(&fam12).unwrap(), q(&[(&[0, 2], 1.0)], 3));
    }

    #[test]
    fn parity_projection_by_averaging() {
        let fam12 = Partition::from_one_based(3, vec![vec![1, 2]]).unwrap();
        let p = q(&[(&[0, 2], 1.0), (&[0, 1], 1.0)], 3);
        assert_eq!(p.project_wq_by_averaging(&fam12, &[1.0, 1.0, 1.0]).unwrap(), 1.0);
        let empty = Partition::new(3, vec![]).unwrap();
        let x = [0.3, -2.0, 1.5];
        assert_eq!(p.project_wq_by_averaging(&empty, &x).unwrap(), p.eval(&x).unwrap());
        let fam1 = Partition::from_one_based(3, vec![vec![1]]).unwrap();
        assert_eq!(q(&[(&[1], 1.0)], 3).project_wq_by_averaging(&fam1, &x).unwrap(), 0.0);
    }

    #[test]
    fn overlapping_parts_are_rejected() {
        assert!(matches!(
            Partition::from_one_based(3, vec![vec![1, 2], vec![2, 3]]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(Partition::from_one_based(3, vec![vec![]]).is_err());
        assert!(Partition::from_one_based(3, vec![vec![4]]).is_err());
        assert!(Partition::parse(4, "1,2;3,4").unwrap().is_total());
        assert!(!Partition::parse(4, "1,2").unwrap().is_total());
    }

    #[test]
    fn block_multilinear_membership() {
        let part = Partition::from_one_based(4, vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert!(q(&[(&[0, 2], 1.0)], 4).is_block_multilinear(&part));
        assert!(!q(&[(&[0, 1], 1.0)], 4).is_block_multilinear(&part));
        assert!(!q(&[(&[0], 1.0)], 4).is_block_multilinear(&part));
    }

    #[test]
    fn random_polynomials_are_reproducible() {
        let prof = DegreeProfile::new(vec![(1, 3), (2, 4), (3, 2)]);
        for seed in [1, 2, 3] {
            let a = random_polynomial(6, &prof, seed);
            let b = random_polynomial(6, &prof, seed);
            assert_eq!(a, b);
            assert_eq!(a.num_terms(), 9);
        }
        assert_ne!(random_polynomial(6, &prof, 1), random_polynomial(6, &prof, 2));
    }

    #[test]
    fn json_accepts_sparse_alpha_and_writes_canonically() {
        let s = r#"{"n":3,"terms":[{"alpha":[[3,1],[1,1]],"c":2.0},{"alpha":[1,0,0],"c":-1.5}]}"#;
        let p = Polynomial::from_json_str(s).unwrap();
        assert_eq!(p, q(&[(&[0, 2], 2.0), (&[0], -1.5)], 3));
        let out = p.to_json_string();
        assert_eq!(out, r#"{"n":3,"terms":[{"alpha":[1,0,0],"c":-1.5},{"alpha":[1,0,1],"c":2.0}]}"#);
        assert_eq!(Polynomial::from_json_str(&out).unwrap(), p);
        assert!(Polynomial::from_json_str(r#"{"n":2,"terms":[{"alpha":[[3,1]],"c":1.0}]}"#).is_err());
    }
}
