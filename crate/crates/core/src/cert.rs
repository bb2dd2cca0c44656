//! Certificates `(d, u, v, A, w)` for membership of a tensor in `w·K(n,t)`,
//! where `K(n,t)` holds the tensors `⟨u, A(i_1)⋯A(i_t) v⟩` with unit `u, v` and
//! contraction-valued `A`.
//!
//! Weights follow the balanced convention `‖u‖² = ‖v‖² = w`. Products are
//! evaluated with row vectors, `((uᵀA(i_1))A(i_2))⋯`, and prefixes that vanish
//! are pruned, so sparse graded certificates realize quickly.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_sq, scale_vec, Matrix, SparseMatrix};
use crate::numopt::{clip_operator_norm, eig_sym, op_norm, SymMatrix};
use crate::poly::Partition;
use crate::rng::derived_rng;
use crate::scalar::Scalar;
use crate::tensor::{Tensor, DIM_CAP, MAX_ORDER};

/// Largest `n^t` that a full realization will enumerate.
pub const REALIZE_CAP: usize = 100_000_000;

/// Contraction and normalization tolerance used by [`CbCertificate::validate`].
pub const CERT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CbCertificate<S> {
    t: usize,
    d: usize,
    w: S,
    u: Vec<S>,
    v: Vec<S>,
    ops: Vec<SparseMatrix<S>>,
}

/// Result of [`CbCertificate::validate`]. `exact_contractions` records that every
/// operator is a signed partial permutation, so its norm bound holds with no slack.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub op_norms: Vec<f64>,
    pub u_norm_sq: f64,
    pub v_norm_sq: f64,
    pub w: f64,
    pub exact_contractions: bool,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn is_zero_vec<S: Scalar>(v: &[S]) -> bool {
    v.iter().all(|x| x.is_zero())
}

/// Square root of a scalar, or an error when the type cannot represent it.
fn root<S: Scalar>(x: &S) -> Result<S> {
    x.sqrt_checked()
        .ok_or(Error::NotRepresentable("square root needed to balance a certificate"))
}

impl<S: Scalar> CbCertificate<S> {
    /// Assembles a certificate, checking shapes only; see [`Self::validate`] for the norm invariants.
    pub fn new(t: usize, w: S, u: Vec<S>, v: Vec<S>, ops: Vec<SparseMatrix<S>>) -> Result<Self> {
        if t > MAX_ORDER {
            return Err(Error::CapExceeded {
                what: "certificate order",
                size: t,
                cap: MAX_ORDER,
            });
        }
        let d = u.len();
        check_dim("certificate vector v", d, v.len())?;
        for a in &ops {
            check_dim("certificate operator rows", d, a.rows())?;
            check_dim("certificate operator cols", d, a.cols())?;
        }
        if w < S::zero() {
            return Err(Error::InvalidCertificate("negative weight".into()));
        }
        Ok(CbCertificate { t, d, w, u, v, ops })
    }

    /// Rescales `u` and `v` to equal norms, setting `w = ‖u‖‖v‖`.
    pub fn balanced(t: usize, u: Vec<S>, v: Vec<S>, ops: Vec<SparseMatrix<S>>) -> Result<Self> {
        let (nu, nv) = (norm_sq(&u), norm_sq(&v));
        if nu == nv {
            return Self::new(t, nu, u, v, ops);
        }
        if nu.is_zero() || nv.is_zero() {
            let d = u.len();
            return Self::new(t, S::zero(), vec![S::zero(); d], vec![S::zero(); d], ops);
        }
        // u ↦ u·(‖v‖/‖u‖)^{1/2}, v ↦ v·(‖u‖/‖v‖)^{1/2}
        let ratio = root(&(nv.clone() / nu.clone()))?;
        let su = root(&ratio)?;
        let w = root(&(nu * nv))?;
        let u = scale_vec(&u, &su);
        let v = scale_vec(&v, &(S::one() / su));
        Self::new(t, w, u, v, ops)
    }

    /// Weight-zero certificate of dimension one.
    pub fn zero(n: usize, t: usize) -> Self {
        CbCertificate {
            t,
            d: 1,
            w: S::zero(),
            u: vec![S::zero()],
            v: vec![S::zero()],
            ops: vec![SparseMatrix::zeros(1, 1); n],
        }
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn order(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn weight(&self) -> &S {
        &self.w
    }

    pub fn u(&self) -> &[S] {
        &self.u
    }

    pub fn v(&self) -> &[S] {
        &self.v
    }

    pub fn ops(&self) -> &[SparseMatrix<S>] {
        &self.ops
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> CbCertificate<T> {
        CbCertificate {
            t: self.t,
            d: self.d,
            w: f(&self.w),
            u: self.u.iter().map(&f).collect(),
            v: self.v.iter().map(&f).collect(),
            ops: self.ops.iter().map(|a| a.map(&f)).collect(),
        }
    }

    pub fn to_f64(&self) -> CbCertificate<f64> {
        self.map_scalar(|x| x.to_f64())
    }

    /// `⟨u, A(i_1)⋯A(i_t) v⟩` for one tuple of any length.
    pub fn value(&self, idx: &[usize]) -> Result<S> {
        let mut row = self.u.clone();
        for &i in idx {
            let a = self.ops.get(i).ok_or_else(|| {
                Error::InvalidInput(format!("index {} outside 1..={}", i + 1, self.n()))
            })?;
            row = a.vec_mul(&row)?;
            if is_zero_vec(&row) {
                return Ok(S::zero());
            }
        }
        Ok(dot(&row, &self.v))
    }

    pub fn realize_on(&self, support: &[Vec<usize>]) -> Result<Vec<S>> {
        support.iter().map(|idx| self.value(idx)).collect()
    }

    /// The full realized tensor over `[n]^t`.
    pub fn realize(&self) -> Result<Tensor<S>> {
        self.realize_order(self.t)
    }

    /// Realization over `[n]^k` for an arbitrary length `k` (zero conditions at other orders).
    pub fn realize_order(&self, k: usize) -> Result<Tensor<S>> {
        let n = self.n();
        let total = (n as f64).powi(k as i32);
        if total > REALIZE_CAP as f64 {
            return Err(Error::CapExceeded {
                what: "realization tuples",
                size: total as usize,
                cap: REALIZE_CAP,
            });
        }
        if k == 0 {
            return Tensor::from_entries(n, 0, [(vec![], dot(&self.u, &self.v))]);
        }
        let parts: Vec<Vec<(Vec<usize>, S)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                let row = self.ops[i].vec_mul(&self.u).expect("shape checked");
                self.extend(vec![i], row, k, &mut out);
                out
            })
            .collect();
        Tensor::from_entries(n, k, parts.into_iter().flatten())
    }

    fn extend(&self, prefix: Vec<usize>, row: Vec<S>, k: usize, out: &mut Vec<(Vec<usize>, S)>) {
        if is_zero_vec(&row) {
            return;
        }
        if prefix.len() == k {
            let val = dot(&row, &self.v);
            if !val.is_zero() {
                out.push((prefix, val));
            }
            return;
        }
        for (i, a) in self.ops.iter().enumerate() {
            let next = a.vec_mul(&row).expect("shape checked");
            let mut p = prefix.clone();
            p.push(i);
            self.extend(p, next, k, out);
        }
    }

    /// Reports operator norms, vector norms and every violated invariant.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let mut violations = Vec::new();
        let mut exact = true;
        let mut op_norms = Vec::with_capacity(self.ops.len());
        for (i, a) in self.ops.iter().enumerate() {
            let norm = if a.is_signed_partial_permutation() {
                if a.nnz() == 0 {
                    0.0
                } else {
                    1.0
                }
            } else {
                exact = false;
                if self.d > DIM_CAP {
                    violations.push(format!(
                        "A({}): dimension {} too large for a numerical norm check",
                        i + 1,
                        self.d
                    ));
                    f64::NAN
                } else {
                    op_norm(&a.to_dense().to_f64()).unwrap_or(f64::NAN)
                }
            };
            if norm.is_nan() || norm > 1.0 + tol {
                violations.push(format!("A({}) has operator norm {norm}", i + 1));
            }
            op_norms.push(norm);
        }
        let (nu, nv) = (norm_sq(&self.u), norm_sq(&self.v));
        let w = self.w.to_f64();
        let off = |x: &S| {
            if S::EXACT {
                *x != self.w
            } else {
                (x.to_f64() - w).abs() > tol * w.max(1.0)
            }
        };
        if off(&nu) {
            violations.push(format!("‖u‖² = {} differs from w = {w}", nu.to_f64()));
        }
        if off(&nv) {
            violations.push(format!("‖v‖² = {} differs from w = {w}", nv.to_f64()));
        }
        ValidationReport {
            op_norms,
            u_norm_sq: nu.to_f64(),
            v_norm_sq: nv.to_f64(),
            w,
            exact_contractions: exact,
            violations,
        }
    }

    /// Direct sum; realizes the sum of the two realizations with weight `w1 + w2`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.t != other.t {
            return Err(Error::OrderMismatch(self.t, other.t));
        }
        check_dim("certificate variable count", self.n(), other.n())?;
        let ops = self
            .ops
            .iter()
            .zip(&other.ops)
            .map(|(a, b)| SparseMatrix::block_diag(&[a, b]))
            .collect();
        let mut u = self.u.clone();
        u.extend(other.u.iter().cloned());
        let mut v = self.v.clone();
        v.extend(other.v.iter().cloned());
        Self::new(self.t, self.w.clone() + other.w.clone(), u, v, ops)
    }

    /// Realization scaled by `λ`: `u` and `v` scale by `√|λ|`, the sign goes into `u`.
    pub fn scale(&self, lambda: &S) -> Result<Self> {
        let r = root(&lambda.abs())?;
        let su = if lambda.is_negative() { -r.clone() } else { r.clone() };
        Self::new(
            self.t,
            self.w.clone() * lambda.abs(),
            scale_vec(&self.u, &su),
            scale_vec(&self.v, &r),
            self.ops.clone(),
        )
    }

    /// Appends one more variable with operator `op`.
    pub fn with_operator(&self, op: SparseMatrix<S>) -> Result<Self> {
        let mut ops = self.ops.clone();
        ops.push(op);
        Self::new(self.t, self.w.clone(), self.u.clone(), self.v.clone(), ops)
    }

    /// Same data read as a certificate of another order.
    pub fn with_order(&self, t: usize) -> Result<Self> {
        Self::new(t, self.w.clone(), self.u.clone(), self.v.clone(), self.ops.clone())
    }
}

/// `d = t+1`, `u = e_1`, `v = e_{t+1}`, `A(i) = Σ_{s: i_s = i} e_s e_{s+1}ᵀ`; realizes `e_ind`.
pub fn basis_certificate<S: Scalar>(ind: &[usize], n: usize) -> Result<CbCertificate<S>> {
    let t = ind.len();
    if let Some(&bad) = ind.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!("index {} outside 1..={n}", bad + 1)));
    }
    let d = t + 1;
    let mut ops = vec![SparseMatrix::zeros(d, d); n];
    for (s, &i) in ind.iter().enumerate() {
        ops[i].add_to(s, s + 1, S::one());
    }
    let mut u = vec![S::zero(); d];
    u[0] = S::one();
    let mut v = vec![S::zero(); d];
    v[t] = S::one();
    CbCertificate::new(t, S::one(), u, v, ops)
}

/// Sum of scaled basis certificates over the support; weight `Σ|T_i|`.
pub fn from_ell1<S: Scalar>(tensor: &Tensor<S>) -> Result<CbCertificate<S>> {
    let (n, t) = (tensor.n(), tensor.order());
    let mut acc: Option<CbCertificate<S>> = None;
    let mut pieces = Vec::with_capacity(tensor.nnz());
    for (idx, val) in tensor.entries() {
        pieces.push(basis_certificate(idx, n)?.scale(val)?);
    }
    // Assemble the block diagonal once rather than pairwise.
    if pieces.is_empty() {
        return Ok(CbCertificate::zero(n, t));
    }
    let d: usize = pieces.iter().map(|c| c.d).sum();
    let mut ops = vec![SparseMatrix::zeros(d, d); n];
    let (mut u, mut v, mut w) = (Vec::with_capacity(d), Vec::with_capacity(d), S::zero());
    let mut off = 0;
    for p in &pieces {
        for (i, a) in p.ops.iter().enumerate() {
            ops[i].add_block(off, off, a);
        }
        u.extend(p.u.iter().cloned());
        v.extend(p.v.iter().cloned());
        w = w + p.w.clone();
        off += p.d;
    }
    acc.get_or_insert(CbCertificate::new(t, w, u, v, ops)?);
    Ok(acc.expect("set above"))
}

/// Prefix-tree certificate: one node per prefix of a support tuple, `A(i)` moving
/// each prefix to its extension by `i`; weight `‖T‖_F = (Σ T_i²)^{1/2}`.
pub fn from_prefix_tree<S: Scalar>(tensor: &Tensor<S>) -> Result<CbCertificate<S>> {
    let (n, t) = (tensor.n(), tensor.order());
    if tensor.is_zero() {
        return Ok(CbCertificate::zero(n, t));
    }
    let mut nodes: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    nodes.insert(vec![], 0);
    for idx in tensor.entries().keys() {
        for len in 1..=t {
            let next = nodes.len();
            nodes.entry(idx[..len].to_vec()).or_insert(next);
        }
    }
    let d = nodes.len();
    let mut ops = vec![SparseMatrix::zeros(d, d); n];
    for (prefix, &node) in &nodes {
        if let Some((&last, head)) = prefix.split_last() {
            ops[last].add_to(nodes[head], node, S::one());
        }
    }
    let w = root(&norm_sq(&tensor.entries().values().cloned().collect::<Vec<_>>()))?;
    let s = root(&w)?;
    let mut u = vec![S::zero(); d];
    u[0] = s.clone();
    let mut v = vec![S::zero(); d];
    for (idx, val) in tensor.entries() {
        v[nodes[idx]] = val.clone() / s.clone();
    }
    CbCertificate::new(t, w, u, v, ops)
}

/// Single-map certificate on dimension `(t+1)d` with `A(i) = Σ_s E_{s,s+1} ⊗ A_s(i)`,
/// `u' = e_1 ⊗ u`, `v' = e_{t+1} ⊗ v`; realizes `⟨u, A_1(i_1)⋯A_t(i_t) v⟩`.
pub fn combine_maps<S: Scalar>(
    maps: &[Vec<SparseMatrix<S>>],
    u: &[S],
    v: &[S],
) -> Result<CbCertificate<S>> {
    let t = maps.len();
    let n = maps.first().map_or(0, Vec::len);
    let d = u.len();
    check_dim("multi-map vector v", d, v.len())?;
    let big = (t + 1) * d;
    if big > DIM_CAP {
        return Err(Error::CapExceeded {
            what: "combined certificate dimension",
            size: big,
            cap: DIM_CAP,
        });
    }
    let mut ops = vec![SparseMatrix::zeros(big, big); n];
    for (s, family) in maps.iter().enumerate() {
        check_dim("multi-map family size", n, family.len())?;
        for (i, a) in family.iter().enumerate() {
            check_dim("multi-map operator rows", d, a.rows())?;
            check_dim("multi-map operator cols", d, a.cols())?;
            ops[i].add_block(s * d, (s + 1) * d, a);
        }
    }
    let mut uu = vec![S::zero(); big];
    uu[..d].clone_from_slice(u);
    let mut vv = vec![S::zero(); big];
    vv[t * d..].clone_from_slice(v);
    CbCertificate::balanced(t, uu, vv, ops)
}

/// Parity lift of multi-map data: each family is replaced by `⊕_z (A_s·z)(i)`,
/// `û = ⊕_z u / 2^{|Q|/2}`, `v̂ = ⊕_z v·Π_I z_I / 2^{|Q|/2}`, then the maps are
/// combined. The realization is the `Q`-parity projection of the original.
pub fn parity_lift<S: Scalar>(
    maps: &[Vec<SparseMatrix<S>>],
    u: &[S],
    v: &[S],
    q: &Partition,
) -> Result<CbCertificate<S>> {
    let d = u.len();
    let copies = 1usize.checked_shl(q.len() as u32).unwrap_or(usize::MAX);
    let lifted_dim = d.saturating_mul(copies);
    let total = lifted_dim.saturating_mul(maps.len() + 1);
    if total > DIM_CAP {
        return Err(Error::CapExceeded {
            what: "parity-lift dimension",
            size: total,
            cap: DIM_CAP,
        });
    }
    let n = maps.first().map_or(0, Vec::len);
    check_dim("partition ground set", n, q.n())?;
    let part_of: Vec<Option<usize>> = (0..n).map(|i| q.part_of(i)).collect();
    let lifted: Vec<Vec<SparseMatrix<S>>> = maps
        .iter()
        .map(|family| {
            family
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let mut out = SparseMatrix::zeros(lifted_dim, lifted_dim);
                    for z in 0..copies {
                        let flip = part_of[i].is_some_and(|k| (z >> k) & 1 == 1);
                        let block = if flip { a.scale(&-S::one()) } else { a.clone() };
                        out.add_block(z * d, z * d, &block);
                    }
                    out
                })
                .collect()
        })
        .collect();
    let norm = root(&S::from_i64(copies as i64))?;
    let mut uh = Vec::with_capacity(lifted_dim);
    let mut vh = Vec::with_capacity(lifted_dim);
    for z in 0..copies {
        let sign = if (z.count_ones() % 2) == 1 { -S::one() } else { S::one() };
        uh.extend(u.iter().map(|x| x.clone() / norm.clone()));
        vh.extend(v.iter().map(|x| x.clone() * sign.clone() / norm.clone()));
    }
    combine_maps(&lifted, &uh, &vh)
}

/// Graded three-level certificate for `T_ij = ⟨x_i, y_j⟩` (rows of `x` and `y`):
/// `A(i)` sends level 0 to `x_i/a` and level 1 to `y_i/b` at level 2, with
/// `a, b` the largest row norms; weight `a·b`.
pub fn from_gram_factors(x: &Matrix<f64>, y: &Matrix<f64>) -> Result<CbCertificate<f64>> {
    check_dim("factor row count", x.rows(), y.rows())?;
    check_dim("factor rank", x.cols(), y.cols())?;
    let (n, r) = (x.rows(), x.cols());
    let rownorm = |m: &Matrix<f64>| {
        (0..m.rows())
            .map(|i| norm_sq(m.row(i)).sqrt())
            .fold(0.0, f64::max)
    };
    let (a, b) = (rownorm(x), rownorm(y));
    if a == 0.0 || b == 0.0 {
        return Ok(CbCertificate::zero(n, 2));
    }
    let d = r + 2;
    let mut ops = vec![SparseMatrix::zeros(d, d); n];
    for (i, op) in ops.iter_mut().enumerate() {
        for k in 0..r {
            op.add_to(0, 1 + k, x[(i, k)] / a);
            op.add_to(1 + k, r + 1, y[(i, k)] / b);
        }
    }
    let s = (a * b).sqrt();
    let mut u = vec![0.0; d];
    u[0] = s;
    let mut v = vec![0.0; d];
    v[r + 1] = s;
    CbCertificate::new(2, a * b, u, v, ops)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: String,
    pub upper_witness: String,
}

impl CertifiedInterval {
    pub fn new(lower: f64, upper: f64, lower_witness: impl Into<String>, upper_witness: impl Into<String>) -> Self {
        CertifiedInterval {
            lower,
            upper,
            lower_witness: lower_witness.into(),
            upper_witness: upper_witness.into(),
        }
    }

    pub fn exact(value: f64, witness: impl Into<String>) -> Self {
        let w = witness.into();
        Self::new(value, value, w.clone(), w)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.lower - tol <= x && x <= self.upper + tol
    }

    /// The interval invariant `lower ≤ upper + 1e-7`.
    pub fn is_consistent(&self) -> bool {
        self.lower <= self.upper + 1e-7
    }
}

impl fmt::Display for CertifiedInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualStrategy {
    Ell1,
    PrefixTree,
    Structured,
    Supplied,
}

#[derive(Clone, Debug)]
pub struct DualUpper {
    pub weight: f64,
    pub strategy: DualStrategy,
    pub certificate: CbCertificate<f64>,
    pub candidates: Vec<(DualStrategy, f64)>,
}

/// Best certified upper bound on `‖T‖_{cb,*}` among the ℓ1 decomposition, the
/// prefix tree, the scalar family (order one), the Gram factorization (order two) and an optional supplied
/// certificate. Candidates whose realization or validation fails are skipped.
fn scale_of(tensor: &Tensor<f64>) -> f64 {
    tensor.entries().values().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn cb_dualnorm_upper(
    tensor: &Tensor<f64>,
    supplied: Option<&CbCertificate<f64>>,
) -> Result<DualUpper> {
    let scale = tensor.entries().values().fold(1.0f64, |m, x| m.max(x.abs()));
    let accepts = |c: &CbCertificate<f64>| -> bool {
        if !c.validate(CERT_TOL).is_valid() || c.order() != tensor.order() || c.n() != tensor.n() {
            return false;
        }
        match c.realize() {
            Ok(r) => r
                .sub(tensor)
                .map(|diff| diff.entries().values().all(|x| x.abs() <= 1e-9 * scale))
                .unwrap_or(false),
            Err(_) => false,
        }
    };
    let mut found: Vec<(DualStrategy, CbCertificate<f64>)> = Vec::new();
    let ell1 = from_ell1(tensor)?;
    found.push((DualStrategy::Ell1, ell1));
    found.push((DualStrategy::PrefixTree, from_prefix_tree(tensor)?));
    if tensor.order() == 1 && !tensor.is_zero() {
        // One-dimensional: u = v = √m, A(i) = T_i/m with m = max|T_i|.
        let m = scale_of(tensor);
        let ops = (0..tensor.n())
            .map(|i| {
                let mut a = SparseMatrix::zeros(1, 1);
                a.add_to(0, 0, tensor.get(&[i]) / m);
                a
            })
            .collect();
        let c = CbCertificate::new(1, m, vec![m.sqrt()], vec![m.sqrt()], ops)?;
        if accepts(&c) {
            found.push((DualStrategy::Structured, c));
        }
    }
    if tensor.order() == 2 && !tensor.is_zero() {
        let b = Matrix::from_fn(tensor.n(), tensor.n(), |i, j| tensor.get(&[i, j]));
        let g = crate::matnorms::cb_dualnorm_matrix(&b)?;
        let c = from_gram_factors(&g.factors.0, &g.factors.1)?;
        if accepts(&c) {
            found.push((DualStrategy::Structured, c));
        }
    }
    if let Some(c) = supplied {
        if accepts(c) {
            found.push((DualStrategy::Supplied, c.clone()));
        }
    }
    let candidates: Vec<(DualStrategy, f64)> = found.iter().map(|(s, c)| (*s, c.w)).collect();
    let (strategy, certificate) = found
        .into_iter()
        .fold(None, |best: Option<(DualStrategy, CbCertificate<f64>)>, (s, c)| match best {
            Some(b) if b.1.w <= c.w => Some(b),
            _ => Some((s, c)),
        })
        .expect("the ℓ1 candidate is always present");
    Ok(DualUpper {
        weight: certificate.w,
        strategy,
        certificate,
        candidates,
    })
}

#[derive(Clone, Debug)]
pub struct CbLowerOptions {
    pub dim: usize,
    pub restarts: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for CbLowerOptions {
    fn default() -> Self {
        CbLowerOptions {
            dim: 4,
            restarts: 32,
            sweeps: 200,
            seed: 0,
        }
    }
}

/// A contraction family with unit vectors attaining `value = |⟨u, T(A) v⟩|`.
#[derive(Clone, Debug)]
pub struct CbLower {
    pub value: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub ops: Vec<Matrix<f64>>,
}

struct Ascent<'a> {
    entries: Vec<(&'a [usize], f64)>,
    by_var: Vec<Vec<usize>>,
    d: usize,
}

impl Ascent<'_> {
    fn eval(&self, ops: &[Matrix<f64>]) -> Matrix<f64> {
        let mut out = Matrix::zeros(self.d, self.d);
        for (idx, c) in &self.entries {
            let mut p = Matrix::identity(self.d);
            for &i in idx.iter() {
                p = p.matmul(&ops[i]).expect("square");
            }
            out = out.add(&p.scale(c)).expect("square");
        }
        out
    }

    fn objective(&self, ops: &[Matrix<f64>], u: &[f64], v: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|(idx, c)| {
                let mut row = u.to_vec();
                for &i in idx.iter() {
                    row = ops[i].vec_mul(&row).expect("square");
                }
                c * dot(&row, v)
            })
            .sum()
    }

    /// `∂⟨u, T(A) v⟩ / ∂A(var)`.
    fn gradient(&self, ops: &[Matrix<f64>], u: &[f64], v: &[f64], var: usize) -> Matrix<f64> {
        let mut g = Matrix::zeros(self.d, self.d);
        for &e in &self.by_var[var] {
            let (idx, c) = self.entries[e];
            let t = idx.len();
            let mut prefix = vec![u.to_vec()];
            for &i in idx.iter() {
                let next = ops[i].vec_mul(prefix.last().expect("nonempty")).expect("square");
                prefix.push(next);
            }
            let mut suffix = v.to_vec();
            for s in (0..t).rev() {
                if idx[s] == var {
                    for a in 0..self.d {
                        let pa = c * prefix[s][a];
                        if pa != 0.0 {
                            for b in 0..self.d {
                                g[(a, b)] += pa * suffix[b];
                            }
                        }
                    }
                }
                suffix = ops[idx[s]].mul_vec(&suffix).expect("square");
            }
        }
        g
    }
}

fn top_singular_pair(m: &Matrix<f64>) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let e = eig_sym(&SymMatrix::gram(m))?;
    let v = e.vector(0);
    let mut u = m.mul_vec(&v)?;
    let s = norm_sq(&u).sqrt();
    if s > 0.0 {
        u.iter_mut().for_each(|x| *x /= s);
    } else {
        u = v.clone();
    }
    Ok((s, u, v))
}

fn frob(m: &Matrix<f64>) -> f64 {
    norm_sq(m.entries()).sqrt()
}

/// Lower bound on `‖T‖_cb` by alternating maximization over one contraction
/// family of dimension `opts.dim`: the top singular pair of `T(A)` updates `u, v`,
/// and each `A(i)` takes a gradient step projected back onto the unit ball.
/// Restarts run in parallel with seeds derived from `opts.seed`.
pub fn cb_norm_lower(tensor: &Tensor<f64>, opts: &CbLowerOptions) -> Result<CbLower> {
    let (n, d) = (tensor.n(), opts.dim.max(1));
    if d > DIM_CAP {
        return Err(Error::CapExceeded {
            what: "lower-bound family dimension",
            size: d,
            cap: DIM_CAP,
        });
    }
    let entries: Vec<(&[usize], f64)> = tensor.entries().iter().map(|(i, c)| (i.as_slice(), *c)).collect();
    let mut by_var = vec![Vec::new(); n];
    for (e, (idx, _)) in entries.iter().enumerate() {
        let mut seen: Vec<usize> = idx.to_vec();
        seen.sort_unstable();
        seen.dedup();
        for i in seen {
            by_var[i].push(e);
        }
    }
    let asc = Ascent { entries, by_var, d };
    let runs: Vec<Result<CbLower>> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = derived_rng(opts.seed, k as u64);
            let mut ops: Vec<Matrix<f64>> = (0..n)
                .map(|_| {
                    let a = Matrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
                    let s = op_norm(&a)?;
                    Ok(if s > 0.0 { a.scale(&(1.0 / s)) } else { a })
                })
                .collect::<Result<_>>()?;
            let (mut best, mut u, mut v) = top_singular_pair(&asc.eval(&ops))?;
            for _ in 0..opts.sweeps {
                let before = best;
                for var in 0..n {
                    if asc.by_var[var].is_empty() {
                        continue;
                    }
                    let g = asc.gradient(&ops, &u, &v, var);
                    let gn = frob(&g);
                    if gn == 0.0 {
                        continue;
                    }
                    let current = asc.objective(&ops, &u, &v);
                    let mut step = 10.0 / gn;
                    for _ in 0..6 {
                        let trial = clip_operator_norm(&ops[var].add(&g.scale(&step))?)?;
                        let old = std::mem::replace(&mut ops[var], trial);
                        if asc.objective(&ops, &u, &v) > current {
                            break;
                        }
                        ops[var] = old;
                        step *= 0.25;
                    }
                }
                let (s, uu, vv) = top_singular_pair(&asc.eval(&ops))?;
                best = s;
                u = uu;
                v = vv;
                if best - before <= 1e-12 * (1.0 + best) {
                    break;
                }
            }
            // Renormalize so the witness is feasible as stored.
            for a in ops.iter_mut() {
                let s = op_norm(a)?;
                if s > 1.0 {
                    *a = a.scale(&(1.0 / s));
                }
            }
            let value = dot(&u, &asc.eval(&ops).mul_vec(&v)?).abs();
            Ok(CbLower { value, u, v, ops })
        })
        .collect();
    let mut best: Option<CbLower> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Serialized certificate; operator indices are 1-based and rows dense.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateJson {
    pub d: usize,
    pub t: usize,
    pub n: usize,
    pub w: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(rename = "A")]
    pub ops: Vec<OperatorJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorJson {
    pub i: usize,
    pub rows: Vec<Vec<f64>>,
}

impl CbCertificate<f64> {
    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            d: self.d,
            t: self.t,
            n: self.n(),
            w: self.w,
            u: self.u.clone(),
            v: self.v.clone(),
            ops: self
                .ops
                .iter()
                .enumerate()
                .filter(|(_, a)| a.nnz() > 0)
                .map(|(i, a)| OperatorJson {
                    i: i + 1,
                    rows: a.to_dense().to_rows(),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &CertificateJson) -> Result<Self> {
        let mut ops = vec![SparseMatrix::zeros(j.d, j.d); j.n];
        for op in &j.ops {
            if op.i == 0 || op.i > j.n {
                return Err(Error::InvalidInput(format!("operator index {} outside 1..={}", op.i, j.n)));
            }
            ops[op.i - 1] = SparseMatrix::from_dense(&Matrix::from_rows(op.rows.clone())?);
        }
        Self::new(j.t, j.w, j.u.clone(), j.v.clone(), ops)
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

    fn q(n: i64) -> BigRational {
        BigRational::from_i64(n)
    }

    #[test]
    fn basis_certificates_realize_basis_tensors() {
        let c = basis_certificate::<BigRational>(&[1, 0], 2).unwrap();
        assert_eq!(c.value(&[1, 0]).unwrap(), q(1));
        assert_eq!(c.realize().unwrap(), Tensor::basis(2, &[1, 0]).unwrap());
        let c = basis_certificate::<f64>(&[0, 0], 2).unwrap();
        assert_eq!(c.ops()[0].get(0, 1), 1.0);
        assert_eq!(c.ops()[0].get(1, 2), 1.0);
        assert_eq!(c.realize().unwrap(), Tensor::basis(2, &[0, 0]).unwrap());
        let a = basis_certificate::<f64>(&[0, 1], 2).unwrap().realize().unwrap();
        let b = basis_certificate::<f64>(&[1, 0], 2).unwrap().realize().unwrap();
        assert_eq!(a.inner(&b).unwrap(), 0.0);
    }

    #[test]
    fn zero_family_realizes_zero() {
        let c = CbCertificate::new(2, 1.0, vec![1.0, 0.0], vec![0.0, 1.0], vec![SparseMatrix::zeros(2, 2); 3]).unwrap();
        assert!(c.realize().unwrap().is_zero());
    }

    #[test]
    fn validation_flags_violations() {
        let c = basis_certificate::<f64>(&[0, 1], 2).unwrap();
        let rep = c.validate(CERT_TOL);
        assert!(rep.is_valid() && rep.exact_contractions);
        let mut ops = c.ops().to_vec();
        ops[0] = ops[0].scale(&2.0);
        let bad = CbCertificate::new(2, 1.0, c.u().to_vec(), c.v().to_vec(), ops).unwrap();
        assert!(!bad.validate(CERT_TOL).is_valid());
        let unnorm = CbCertificate::new(2, 1.0, vec![2.0, 0.0, 0.0], c.v().to_vec(), c.ops().to_vec()).unwrap();
        assert!(!unnorm.validate(CERT_TOL).is_valid());
    }

    #[test]
    fn sums_and_scalings() {
        let a = basis_certificate::<BigRational>(&[0, 1], 2).unwrap();
        let b = basis_certificate::<BigRational>(&[1, 0], 2).unwrap();
        let s = a.add(&b).unwrap();
        assert_eq!(*s.weight(), q(2));
        let expected = Tensor::from_entries(2, 2, [(vec![0, 1], q(1)), (vec![1, 0], q(1))]).unwrap();
        assert_eq!(s.realize().unwrap(), expected);
        assert_eq!(a.add(&CbCertificate::zero(2, 2)).unwrap().realize().unwrap(), a.realize().unwrap());
        assert!(a.add(&basis_certificate(&[0], 2).unwrap()).is_err());

        assert!(a.scale(&q(0)).unwrap().realize().unwrap().is_zero());
        assert_eq!(a.scale(&q(-1)).unwrap().realize().unwrap(), Tensor::basis(2, &[0, 1]).unwrap().scale(&q(-1)));
        assert_eq!(*a.scale(&q(4)).unwrap().weight(), q(4));
        assert!(a.scale(&q(2)).is_err());
        assert!(a.scale(&q(4)).unwrap().validate(0.0).is_valid());
    }

    #[test]
    fn ell1_and_prefix_tree() {
        let t = Tensor::from_entries(3, 2, [(vec![0, 1], 1.0), (vec![0, 2], -1.0), (vec![2, 2], 1.0)]).unwrap();
        let c = from_ell1(&t).unwrap();
        assert_eq!(*c.weight(), 3.0);
        assert_eq!(c.realize().unwrap(), t);
        assert!(c.validate(CERT_TOL).is_valid());
        let p = from_prefix_tree(&t).unwrap();
        assert!((p.weight() - 3f64.sqrt()).abs() < 1e-15);
        assert!(p.validate(CERT_TOL).is_valid());
        let r = p.realize().unwrap();
        assert!(r.sub(&t).unwrap().entries().values().all(|x| x.abs() < 1e-15));
        assert_eq!(*from_ell1(&Tensor::<f64>::basis(2, &[0, 1]).unwrap()).unwrap().weight(), 1.0);
    }

    #[test]
    fn combined_maps_match_multi_map_values() {
        let id = SparseMatrix::<f64>::identity(2);
        let fam = vec![id.clone(), id.clone()];
        let c = combine_maps(&[fam.clone(), fam], &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        let r = c.realize().unwrap();
        assert_eq!(r.nnz(), 4);
        assert!(r.entries().values().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn parity_lift_filters_even_tuples() {
        let c = basis_certificate::<f64>(&[0, 1], 2).unwrap();
        let maps = vec![c.ops().to_vec(), c.ops().to_vec()];
        let empty = Partition::new(2, vec![]).unwrap();
        let lifted = parity_lift(&maps, c.u(), c.v(), &empty).unwrap();
        assert_eq!(lifted.realize().unwrap(), c.realize().unwrap());
        let all = Partition::new(2, vec![vec![0, 1]]).unwrap();
        assert!(parity_lift(&maps, c.u(), c.v(), &all).unwrap().realize().unwrap().is_zero());
        let sep = Partition::new(2, vec![vec![0], vec![1]]).unwrap();
        let l = parity_lift(&maps, c.u(), c.v(), &sep).unwrap();
        assert!((l.realize().unwrap().get(&[0, 1]) - 1.0).abs() < 1e-15);
        assert!((l.weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_upper_bounds() {
        let e12 = Tensor::basis(2, &[0, 1]).unwrap();
        assert!((cb_dualnorm_upper(&e12, None).unwrap().weight - 1.0).abs() < 1e-12);
        assert_eq!(cb_dualnorm_upper(&Tensor::zero(2, 2), None).unwrap().weight, 0.0);
        // H = [[1,1],[1,-1]]: γ₂ = √2, below ℓ1 = 4 and Frobenius = 2.
        let h = Tensor::from_entries(2, 2, [(vec![0, 0], 1.0), (vec![0, 1], 1.0), (vec![1, 0], 1.0), (vec![1, 1], -1.0)]).unwrap();
        let up = cb_dualnorm_upper(&h, None).unwrap();
        assert_eq!(up.strategy, DualStrategy::Structured);
        assert!((up.weight - 2f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn lower_bounds_on_basis_and_bilinear() {
        let opts = CbLowerOptions { dim: 3, restarts: 8, sweeps: 200, seed: 5 };
        let e12 = Tensor::basis(2, &[0, 1]).unwrap();
        assert!(cb_norm_lower(&e12, &opts).unwrap().value >= 1.0 - 1e-6);
        let tp = Tensor::from_entries(2, 2, [(vec![0, 1], 0.5), (vec![1, 0], 0.5)]).unwrap();
        let r = cb_norm_lower(&tp, &opts).unwrap();
        assert!(r.value >= 1.0 - 1e-6 && r.value <= 1.0 + 1e-9);
        let again = cb_norm_lower(&tp, &opts).unwrap();
        assert_eq!(r.value, again.value);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let c = combine_maps(
            &[vec![SparseMatrix::from_dense(&Matrix::from_rows(vec![vec![0.1, 0.2], vec![1.0 / 3.0, 0.0]]).unwrap())]],
            &[0.3, 0.7],
            &[1.0 / 7.0, 0.25],
        )
        .unwrap();
        let s = c.to_json_string();
        let back = CbCertificate::from_json_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json_string(), s);
    }
}
