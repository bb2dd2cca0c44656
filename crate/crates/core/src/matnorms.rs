//! Norms of matrices viewed as bilinear forms `p(x, y) = xᵀAy` on the
//! hypercube, their duals, and the polynomial dual `‖p‖_{∞,*}`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cert::CertifiedInterval;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::numopt::{eig_sym, lp_solve, sdp_diag_max, LpProblem, SdpDiagOptions, SdpDiagResult, SymMatrix};
use crate::poly::{MultiIndex, Partition, Polynomial};
use crate::rng::derived_rng;
use crate::scalar::Scalar;

/// Side length handled by the `2^k` enumeration in [`norm_inf_to_one`].
pub const INF_TO_ONE_CAP: usize = 20;
/// Side length for the SDP-based matrix norms.
pub const CB_MATRIX_CAP: usize = 64;
/// Side length for [`cb_dualnorm_matrix`].
pub const GAMMA2_CAP: usize = 32;
const GAMMA2_ITERATIONS: usize = 20_000;
/// Side length for the dyad LP in [`inf_to_one_dualnorm`].
pub const DYAD_LP_CAP: usize = 4;
/// Variables handled by [`poly_inf_dualnorm`].
pub const POLY_DUAL_CAP: usize = 14;

/// Known bracket for the real Grothendieck constant.
pub const KG_BRACKET: (f64, f64) = (1.676, 1.782);
/// Upper end used when asserting experimental ratios.
pub const KG_ASSERT_UPPER: f64 = 1.7821;

/// A bilinear form `xᵀAy` on `{-1,1}^rows × {-1,1}^cols`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearForm<S> {
    pub a: Matrix<S>,
}

impl<S: Scalar> BilinearForm<S> {
    pub fn new(a: Matrix<S>) -> Self {
        BilinearForm { a }
    }

    /// The partition `{x-block, y-block}` of the `rows + cols` variables.
    pub fn partition(&self) -> Partition {
        Partition::blocks(&[self.a.rows(), self.a.cols()]).expect("nonempty blocks")
    }

    pub fn to_polynomial(&self) -> Polynomial<S> {
        let (r, c) = (self.a.rows(), self.a.cols());
        let terms = (0..r).flat_map(|i| {
            (0..c).map(move |j| (MultiIndex::from_vars(r + c, &[i, r + j]), self.a[(i, j)].clone()))
        });
        Polynomial::from_terms(r + c, terms.collect::<Vec<_>>()).expect("valid monomials")
    }

    /// Recovers the matrix of `p ∈ V_P` for a two-part partition.
    pub fn from_polynomial(p: &Polynomial<S>, part: &Partition) -> Result<Self> {
        if part.len() != 2 || !p.is_block_multilinear(part) {
            return Err(Error::InvalidInput("polynomial is not bilinear in the given two blocks".into()));
        }
        let (xs, ys) = (&part.parts()[0], &part.parts()[1]);
        let a = Matrix::from_fn(xs.len(), ys.len(), |i, j| {
            p.coefficient(&MultiIndex::from_vars(p.n(), &[xs[i], ys[j]]))
        });
        Ok(BilinearForm { a })
    }
}

fn signs<S: Scalar>(mask: u64, k: usize) -> Vec<S> {
    (0..k)
        .map(|i| if (mask >> i) & 1 == 1 { -S::one() } else { S::one() })
        .collect()
}

fn sign_bits(mask: u64, k: usize) -> Vec<i8> {
    (0..k).map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 }).collect()
}

/// Maximizing sign vectors of `xᵀAy`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfToOne<S> {
    pub value: S,
    pub x: Vec<i8>,
    pub y: Vec<i8>,
}

/// `max_{x,y} xᵀAy` over sign vectors, exact. Enumerates the shorter side with
/// its first sign fixed; the other side is chosen row by row.
pub fn norm_inf_to_one_argmax<S: Scalar>(a: &Matrix<S>) -> Result<InfToOne<S>> {
    let transposed = a.cols() > a.rows();
    let m = if transposed { a.transpose() } else { a.clone() };
    let (r, k) = (m.rows(), m.cols());
    if k > INF_TO_ONE_CAP {
        return Err(Error::CapExceeded {
            what: "∞→1 enumeration side",
            size: k,
            cap: INF_TO_ONE_CAP,
        });
    }
    if k == 0 {
        return Ok(InfToOne { value: S::zero(), x: vec![1; a.rows()], y: vec![1; a.cols()] });
    }
    let half = 1u64 << (k - 1);
    let eval = |mask: u64| -> (S, Vec<i8>) {
        let y: Vec<S> = signs(mask, k);
        let mut total = S::zero();
        let mut x = Vec::with_capacity(r);
        for i in 0..r {
            let s = dot(m.row(i), &y);
            x.push(if s.is_negative() { -1 } else { 1 });
            total = total + s.abs();
        }
        (total, x)
    };
    let (best_mask, (value, x)) = (0..half)
        .into_par_iter()
        .map(|mask| (mask, eval(mask)))
        .reduce_with(|p, q| if q.1 .0 > p.1 .0 || (q.1 .0 == p.1 .0 && q.0 < p.0) { q } else { p })
        .expect("nonempty range");
    let y = sign_bits(best_mask, k);
    Ok(if transposed {
        InfToOne { value, x: y, y: x }
    } else {
        InfToOne { value, x, y }
    })
}

pub fn norm_inf_to_one<S: Scalar>(a: &Matrix<S>) -> Result<S> {
    Ok(norm_inf_to_one_argmax(a)?.value)
}

/// `[[0, A/2], [Aᵀ/2, 0]]`; its diagonal-constrained SDP value is `sup Σ A_ij ⟨u_i, v_j⟩`.
pub fn bipartite_embedding(a: &Matrix<f64>) -> SymMatrix<f64> {
    let (r, c) = (a.rows(), a.cols());
    let m = Matrix::from_fn(r + c, r + c, |i, j| {
        if i < r && j >= r {
            a[(i, j - r)] / 2.0
        } else if i >= r && j < r {
            a[(j, i - r)] / 2.0
        } else {
            0.0
        }
    });
    SymMatrix::new(m).expect("symmetric by construction")
}

/// Certified `‖A‖_cb` with the unit vectors of the lower side (`u` rows, `v` rows)
/// and the diagonal dual of the upper side.
#[derive(Clone, Debug, Serialize)]
pub struct CbMatrixNorm {
    pub interval: CertifiedInterval,
    pub u: Matrix<f64>,
    pub v: Matrix<f64>,
    pub sdp: SdpDiagResult,
}

impl CbMatrixNorm {
    /// `C_ij = ⟨u_i, v_j⟩`, the correlation matrix attaining the lower side.
    pub fn correlation(&self) -> Matrix<f64> {
        self.u.matmul(&self.v.transpose()).expect("equal ranks")
    }
}

pub fn cb_norm_matrix_with(a: &Matrix<f64>, opts: &SdpDiagOptions) -> Result<CbMatrixNorm> {
    let (r, c) = (a.rows(), a.cols());
    if r.max(c) > CB_MATRIX_CAP {
        return Err(Error::CapExceeded {
            what: "cb-norm matrix side",
            size: r.max(c),
            cap: CB_MATRIX_CAP,
        });
    }
    let sdp = sdp_diag_max(&bipartite_embedding(a), opts)?;
    let f = &sdp.factor;
    let mut u = Matrix::from_fn(r, f.cols(), |i, k| f[(i, k)]);
    let mut v = Matrix::from_fn(c, f.cols(), |j, k| f[(r + j, k)]);
    let mut lower = sdp.primal;
    let mut lower_witness = format!("unit vectors of rank {}", f.cols());
    if r.min(c) <= INF_TO_ONE_CAP {
        let s = norm_inf_to_one_argmax(a)?;
        // Ties within rounding go to the exact sign witness.
        if s.value >= lower - 1e-12 * lower.abs().max(1.0) {
            lower = s.value;
            lower_witness = "sign vectors".into();
            u = Matrix::from_fn(r, 1, |i, _| s.x[i] as f64);
            v = Matrix::from_fn(c, 1, |j, _| s.y[j] as f64);
        }
    }
    let interval = CertifiedInterval::new(lower, sdp.dual, lower_witness, "diagonal dual Diag(w) ⪰ embedding");
    Ok(CbMatrixNorm { interval, u, v, sdp })
}

pub fn cb_norm_matrix(a: &Matrix<f64>) -> Result<CertifiedInterval> {
    Ok(cb_norm_matrix_with(a, &SdpDiagOptions::default())?.interval)
}

/// Certified `γ₂(B)`: the upper side is an explicit factorization `B = XYᵀ`
/// (value `max‖x_i‖·max‖y_j‖`), the lower side a matrix `Q` with
/// `⟨B,Q⟩ / UB(‖Q‖_cb)`.
#[derive(Clone, Debug, Serialize)]
pub struct Gamma2 {
    pub interval: CertifiedInterval,
    pub factors: (Matrix<f64>, Matrix<f64>),
    pub dual_witness: Matrix<f64>,
    pub dual_witness_cb_upper: f64,
}

struct WeightedSvd {
    trace_norm: f64,
    u: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    v: Vec<Vec<f64>>,
}

/// Singular triples of `diag(a) B diag(b)` with `σ > 0`.
fn weighted_svd(b: &Matrix<f64>, wa: &[f64], wb: &[f64]) -> Result<WeightedSvd> {
    let m = Matrix::from_fn(b.rows(), b.cols(), |i, j| wa[i] * b[(i, j)] * wb[j]);
    let e = eig_sym(&SymMatrix::gram(&m))?;
    let tiny = 1e-14 * e.values.first().copied().unwrap_or(0.0).max(0.0).sqrt().max(1e-300);
    let (mut u, mut sigma, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..e.values.len() {
        let s = e.values[k].max(0.0).sqrt();
        if s <= tiny {
            continue;
        }
        let vk = e.vector(k);
        let uk: Vec<f64> = m.mul_vec(&vk)?.into_iter().map(|x| x / s).collect();
        u.push(uk);
        sigma.push(s);
        v.push(vk);
    }
    Ok(WeightedSvd { trace_norm: sigma.iter().sum(), u, sigma, v })
}

/// Appends a block so that `XYᵀ` reproduces `B` despite rounding: `x_i ← [x_i, s e_i]`,
/// `y_j ← [y_j, E_{·j}/s]` with `E = B - XYᵀ`.
fn with_residual(b: &Matrix<f64>, x: Matrix<f64>, y: Matrix<f64>) -> Result<(Matrix<f64>, Matrix<f64>)> {
    let (r, c, rank) = (b.rows(), b.cols(), x.cols());
    let resid = b.sub(&x.matmul(&y.transpose())?)?;
    if resid.max_abs() == 0.0 {
        return Ok((x, y));
    }
    let col_max = (0..c)
        .map(|j| (0..r).map(|i| resid[(i, j)].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let (ax, ay) = (row_norm_max(&x), row_norm_max(&y));
    let s = if ax > 0.0 && ay > 0.0 { (col_max * ax / ay).sqrt() } else { col_max.sqrt() };
    let s = if s > 0.0 { s } else { 1.0 };
    let xa = Matrix::from_fn(r, rank + r, |i, k| if k < rank { x[(i, k)] } else if k - rank == i { s } else { 0.0 });
    let ya = Matrix::from_fn(c, rank + r, |j, k| if k < rank { y[(j, k)] } else { resid[(k - rank, j)] / s });
    Ok((xa, ya))
}

fn row_norm_max(m: &Matrix<f64>) -> f64 {
    (0..m.rows()).map(|i| dot(m.row(i), m.row(i)).sqrt()).fold(0.0, f64::max)
}

pub fn cb_dualnorm_matrix(b: &Matrix<f64>) -> Result<Gamma2> {
    cb_dualnorm_matrix_with(b, &SdpDiagOptions::default())
}

pub fn cb_dualnorm_matrix_with(b: &Matrix<f64>, opts: &SdpDiagOptions) -> Result<Gamma2> {
    let (r, c) = (b.rows(), b.cols());
    if r.max(c) > GAMMA2_CAP {
        return Err(Error::CapExceeded {
            what: "γ₂ matrix side",
            size: r.max(c),
            cap: GAMMA2_CAP,
        });
    }
    if b.max_abs() == 0.0 {
        return Ok(Gamma2 {
            interval: CertifiedInterval::exact(0.0, "zero matrix"),
            factors: (Matrix::zeros(r, 1), Matrix::zeros(c, 1)),
            dual_witness: Matrix::zeros(r, c),
            dual_witness_cb_upper: 0.0,
        });
    }
    // Fixed point of a_i² ∝ (UΣUᵀ)_ii, b_j² ∝ (VΣVᵀ)_jj for max ‖diag(a) B diag(b)‖_tr.
    // Every iterate yields a lower candidate (Q) and an upper candidate (X, Y).
    let mut wa = vec![1.0 / (r as f64).sqrt(); r];
    let mut wb = vec![1.0 / (c as f64).sqrt(); c];
    let mut best_lower: Option<(f64, Vec<f64>, Vec<f64>, WeightedSvd)> = None;
    let mut best_upper: Option<(f64, Matrix<f64>, Matrix<f64>)> = None;
    let inv = |w: f64| if w > 0.0 { 1.0 / w } else { 0.0 };
    for _ in 0..GAMMA2_ITERATIONS {
        let svd = weighted_svd(b, &wa, &wb)?;
        let tn = svd.trace_norm;
        let rank = svd.sigma.len();
        let x = Matrix::from_fn(r, rank, |i, k| inv(wa[i]) * svd.u[k][i] * svd.sigma[k].sqrt());
        let y = Matrix::from_fn(c, rank, |j, k| inv(wb[j]) * svd.v[k][j] * svd.sigma[k].sqrt());
        let (x, y) = with_residual(b, x, y)?;
        let up = row_norm_max(&x) * row_norm_max(&y);
        if best_upper.as_ref().is_none_or(|bu| up < bu.0) {
            best_upper = Some((up, x, y));
        }
        let mut na = vec![0.0; r];
        let mut nb = vec![0.0; c];
        for (k, s) in svd.sigma.iter().enumerate() {
            for (acc, x) in na.iter_mut().zip(&svd.u[k]) {
                *acc += s * x * x;
            }
            for (acc, y) in nb.iter_mut().zip(&svd.v[k]) {
                *acc += s * y * y;
            }
        }
        if best_lower.as_ref().is_none_or(|bl| tn > bl.0) {
            best_lower = Some((tn, wa.clone(), wb.clone(), svd));
        }
        let (lo, hi) = (best_lower.as_ref().expect("set").0, best_upper.as_ref().expect("set").0);
        if hi - lo <= 1e-10 * hi {
            break;
        }
        wa = na.iter().map(|x| (x / tn).sqrt()).collect();
        wb = nb.iter().map(|x| (x / tn).sqrt()).collect();
    }
    let (_, wa, wb, svd) = best_lower.expect("at least one iterate");
    let (_, x, y) = best_upper.expect("at least one iterate");
    let rank = svd.sigma.len();
    let upper = row_norm_max(&x) * row_norm_max(&y);

    // Lower side: Q = diag(a) U Vᵀ diag(b) has ‖Q‖_cb ≤ 1; its SDP dual certifies that.
    let q = Matrix::from_fn(r, c, |i, j| {
        wa[i] * wb[j] * (0..rank).map(|k| svd.u[k][i] * svd.v[k][j]).sum::<f64>()
    });
    let q_cb = cb_norm_matrix_with(&q, opts)?.interval.upper;
    let lower = if q_cb > 0.0 { b.inner(&q)? / q_cb } else { 0.0 };
    Ok(Gamma2 {
        interval: CertifiedInterval::new(
            lower.min(upper),
            upper,
            "⟨B,Q⟩/‖Q‖_cb with Q = D_a U Vᵀ D_b",
            format!("Gram factorization of rank {}", x.cols()),
        ),
        factors: (x, y),
        dual_witness: q,
        dual_witness_cb_upper: q_cb,
    })
}

/// Certified `‖B‖_{∞→1,*}`: a signed dyad decomposition (upper side) and a
/// dual matrix `M` with `⟨B,M⟩ / max(1, ‖M‖_{∞→1})` (lower side).
#[derive(Clone, Debug, Serialize)]
pub struct InfToOneDual<S> {
    pub lower: S,
    pub upper: S,
    pub terms: Vec<(S, Vec<i8>, Vec<i8>)>,
    pub dual: Matrix<S>,
    pub dual_norm: S,
}

impl<S: Scalar> InfToOneDual<S> {
    pub fn interval(&self) -> CertifiedInterval {
        CertifiedInterval::new(
            self.lower.to_f64(),
            self.upper.to_f64(),
            "LP dual matrix M with exact ‖M‖_{∞→1}",
            format!("{} signed sign-vector dyads", self.terms.len()),
        )
    }
}

pub fn inf_to_one_dualnorm<S: Scalar>(b: &Matrix<S>) -> Result<InfToOneDual<S>> {
    let (r, c) = (b.rows(), b.cols());
    if r.max(c) > DYAD_LP_CAP {
        return Err(Error::CapExceeded {
            what: "dyad LP matrix side",
            size: r.max(c),
            cap: DYAD_LP_CAP,
        });
    }
    // x_1 = +1 removes the dyad sign symmetry.
    let dyads: Vec<(u64, u64)> = (0..1u64 << r.saturating_sub(1))
        .flat_map(|xm| (0..1u64 << c).map(move |ym| (xm << 1, ym)))
        .collect();
    let cols = 2 * dyads.len();
    let a = Matrix::from_fn(r * c, cols, |row, col| {
        let (i, j) = (row / c, row % c);
        let (xm, ym) = dyads[col / 2];
        let bit = ((xm >> i) ^ (ym >> j)) & 1;
        let v = if bit == 1 { -S::one() } else { S::one() };
        if col % 2 == 0 {
            v
        } else {
            -v
        }
    });
    let rhs: Vec<S> = b.entries().to_vec();
    let sol = lp_solve(&LpProblem::new(vec![-S::one(); cols], a, rhs)?)?;
    let upper = -sol.value.clone();
    let mut terms = Vec::new();
    for (m, &(xm, ym)) in dyads.iter().enumerate() {
        let lam = sol.x[2 * m].clone() - sol.x[2 * m + 1].clone();
        if !lam.is_zero() {
            terms.push((lam, sign_bits(xm, r), sign_bits(ym, c)));
        }
    }
    let dual = Matrix::from_fn(r, c, |i, j| -sol.y[i * c + j].clone());
    let dual_norm = norm_inf_to_one(&dual)?;
    let pairing = b.inner(&dual)?;
    let lower = if dual_norm > S::one() { pairing / dual_norm.clone() } else { pairing };
    let lower = if lower > upper { upper.clone() } else { lower };
    Ok(InfToOneDual { lower, upper, terms, dual, dual_norm })
}

/// `‖p‖_{∞,*}` over `V_P` by two linear programs.
///
/// Route (a) is the measure form of `sup{⟨p,q⟩ : q ∈ V_P, |q(x)| ≤ 1}` over
/// the whole cube; its dual prices give `q`, checked by enumeration. Route (b)
/// minimizes `‖r‖_1` over `r ∈ W_P` with `r_{=t} = p`, parametrized by the
/// values of `r` on one point per orbit of the part-wise sign flips.
#[derive(Clone, Debug)]
pub struct PolyInfDual<S> {
    pub lower: S,
    pub upper: S,
    pub q: Polynomial<S>,
    pub q_norm_inf: S,
    /// `(point mask, m)`: `r(z·x) = Π z_k · 2^{n-|P|} m` on the orbit of `x`.
    pub r_orbits: Vec<(u64, S)>,
    partition: Partition,
}

impl<S: Scalar> PolyInfDual<S> {
    pub fn interval(&self) -> CertifiedInterval {
        CertifiedInterval::new(
            self.lower.to_f64(),
            self.upper.to_f64(),
            "q ∈ V_P with exact ‖q‖_∞",
            format!("r ∈ W_P on {} orbits with ‖r‖_1 = Σ|m|", self.r_orbits.len()),
        )
    }

    /// The extension `r` as a multilinear polynomial.
    pub fn r_polynomial(&self) -> Result<Polynomial<S>> {
        let part = &self.partition;
        let n = part.n();
        if n > 16 {
            return Err(Error::CapExceeded { what: "extension expansion", size: n, cap: 16 });
        }
        let covered: u64 = part.part_masks().iter().fold(0, |a, m| a | m);
        let free: Vec<usize> = (0..n).filter(|i| (covered >> i) & 1 == 0).collect();
        // Monomials of W_P: an odd subset of every part times any subset of the rest.
        let mut monos: Vec<u64> = vec![0];
        for p in part.parts() {
            let mut next = Vec::new();
            for s in 1u64..(1 << p.len()) {
                if s.count_ones() % 2 == 1 {
                    let m: u64 = p.iter().enumerate().filter(|(k, _)| (s >> k) & 1 == 1).map(|(_, &v)| 1u64 << v).sum();
                    next.extend(monos.iter().map(|x| x | m));
                }
            }
            monos = next;
        }
        let mut all = Vec::new();
        for s in 0u64..(1 << free.len()) {
            let m: u64 = free.iter().enumerate().filter(|(k, _)| (s >> k) & 1 == 1).map(|(_, &v)| 1u64 << v).sum();
            all.extend(monos.iter().map(|x| x | m));
        }
        let terms = all.into_iter().map(|mask| {
            let c = self.r_orbits.iter().fold(S::zero(), |acc, (pt, m)| {
                if (mask & pt).count_ones() % 2 == 1 {
                    acc - m.clone()
                } else {
                    acc + m.clone()
                }
            });
            let vars: Vec<usize> = (0..n).filter(|i| (mask >> i) & 1 == 1).collect();
            (MultiIndex::from_vars(n, &vars), c)
        });
        Polynomial::from_terms(n, terms.collect::<Vec<_>>())
    }
}

fn chi(alpha: u64, point: u64) -> bool {
    (alpha & point).count_ones() % 2 == 1
}

fn measure_lp<S: Scalar>(alphas: &[u64], rhs: &[S], points: &[u64]) -> Result<crate::numopt::LpSolution<S>> {
    let a = Matrix::from_fn(alphas.len(), 2 * points.len(), |row, col| {
        let neg = chi(alphas[row], points[col / 2]) ^ (col % 2 == 1);
        if neg {
            -S::one()
        } else {
            S::one()
        }
    });
    lp_solve(&LpProblem::new(vec![-S::one(); 2 * points.len()], a, rhs.to_vec())?)
}

pub fn poly_inf_dualnorm<S: Scalar>(p: &Polynomial<S>, part: &Partition) -> Result<PolyInfDual<S>> {
    let n = p.n();
    if n > POLY_DUAL_CAP {
        return Err(Error::CapExceeded { what: "dual-norm LP variables", size: n, cap: POLY_DUAL_CAP });
    }
    if !p.is_block_multilinear(part) {
        return Err(Error::InvalidInput("polynomial is not block-multilinear for the partition".into()));
    }
    // Rows: one per monomial of V_P.
    let mut alphas: Vec<u64> = vec![0];
    for pt in part.parts() {
        alphas = alphas.iter().flat_map(|a| pt.iter().map(move |&v| a | (1u64 << v))).collect();
    }
    let coeff: BTreeMap<u64, S> = p.terms().iter().map(|(a, c)| (a.odd_mask(), c.clone())).collect();
    let rhs: Vec<S> = alphas.iter().map(|a| coeff.get(a).cloned().unwrap_or_else(S::zero)).collect();

    // Route (a): signed measures on the whole cube.
    let all_points: Vec<u64> = (0..1u64 << n).collect();
    let sol_a = measure_lp(&alphas, &rhs, &all_points)?;
    let q = Polynomial::from_terms(
        n,
        alphas
            .iter()
            .zip(&sol_a.y)
            .map(|(&a, y)| {
                let vars: Vec<usize> = (0..n).filter(|i| (a >> i) & 1 == 1).collect();
                (MultiIndex::from_vars(n, &vars), -y.clone())
            })
            .collect::<Vec<_>>(),
    )?;
    let q_norm_inf = q.norm_inf_exact()?;
    let pairing = p.inner(&q)?;
    let lower = if q_norm_inf > S::one() { pairing / q_norm_inf.clone() } else { pairing };

    // Route (b): one representative per flip orbit, the lowest variable of every part set to +1.
    let lead: u64 = part.parts().iter().map(|pt| 1u64 << pt.iter().min().expect("nonempty part")).sum();
    let reps: Vec<u64> = all_points.iter().copied().filter(|x| x & lead == 0).collect();
    let sol_b = measure_lp(&alphas, &rhs, &reps)?;
    let r_orbits: Vec<(u64, S)> = reps
        .iter()
        .enumerate()
        .filter_map(|(k, &x)| {
            let m = sol_b.x[2 * k].clone() - sol_b.x[2 * k + 1].clone();
            (!m.is_zero()).then_some((x, m))
        })
        .collect();
    let upper = r_orbits.iter().fold(S::zero(), |acc, (_, m)| acc + m.abs());
    for (row, &a) in alphas.iter().enumerate() {
        let got = r_orbits.iter().fold(S::zero(), |acc, (x, m)| if chi(a, *x) { acc - m.clone() } else { acc + m.clone() });
        let diff = (got - rhs[row].clone()).abs();
        let bad = if S::EXACT { !diff.is_zero() } else { diff.to_f64() > 1e-9 };
        if bad {
            return Err(Error::WitnessInconsistent("extension does not reproduce p".into()));
        }
    }
    let (la, ub) = (lower.to_f64(), upper.to_f64());
    if (ub - la).abs() > 1e-6 * la.abs().max(1.0) {
        return Err(Error::RouteDisagreement { a: la, b: ub });
    }
    Ok(PolyInfDual { lower, upper, q, q_norm_inf, r_orbits, partition: part.clone() })
}

/// One row of a Grothendieck-ratio experiment.
#[derive(Clone, Debug, Serialize)]
pub struct GrothendieckSample {
    pub index: usize,
    pub matrix_hash: String,
    pub inf_to_one: f64,
    pub cb_lower: f64,
    pub cb_upper: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrothendieckReport {
    pub k: usize,
    pub seed: u64,
    pub kg_bracket: (f64, f64),
    pub samples: Vec<GrothendieckSample>,
}

impl GrothendieckReport {
    pub fn max_ratio_upper(&self) -> f64 {
        self.samples.iter().map(|s| s.ratio_upper).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// FNV-1a over the shape and entry bits.
pub fn matrix_hash(a: &Matrix<f64>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(&(a.rows() as u64).to_le_bytes());
    eat(&(a.cols() as u64).to_le_bytes());
    for x in a.entries() {
        eat(&x.to_bits().to_le_bytes());
    }
    format!("{h:016x}")
}

/// `k × k` matrix with i.i.d. uniform `[-1, 1]` entries from stream `index` of `seed`.
pub fn random_matrix(k: usize, seed: u64, index: u64) -> Matrix<f64> {
    let mut rng = derived_rng(seed, index);
    Matrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..=1.0))
}

pub fn grothendieck_sample(a: &Matrix<f64>, index: usize, opts: &SdpDiagOptions) -> Result<GrothendieckSample> {
    let inf = norm_inf_to_one(a)?;
    let cb = cb_norm_matrix_with(a, opts)?.interval;
    let (rl, ru) = if inf > 0.0 { (cb.lower / inf, cb.upper / inf) } else { (1.0, 1.0) };
    Ok(GrothendieckSample {
        index,
        matrix_hash: matrix_hash(a),
        inf_to_one: inf,
        cb_lower: cb.lower,
        cb_upper: cb.upper,
        ratio_lower: rl,
        ratio_upper: ru,
    })
}

/// Certified ratios `‖A‖_cb / ‖A‖_{∞→1}` on seeded random matrices. Fails with
/// [`Error::BoundViolation`] if an interval leaves `[1 - 1e-6, 1.7821 + 1e-4]`.
pub fn grothendieck_experiment(k: usize, samples: usize, seed: u64) -> Result<GrothendieckReport> {
    if k == 0 || k > 10 {
        return Err(Error::CapExceeded { what: "experiment matrix side", size: k, cap: 10 });
    }
    let rows: Vec<GrothendieckSample> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let a = random_matrix(k, seed, s as u64);
            let opts = SdpDiagOptions { seed: seed.wrapping_add(s as u64), ..SdpDiagOptions::default() };
            let row = grothendieck_sample(&a, s, &opts)?;
            if row.ratio_lower < 1.0 - 1e-6 || row.ratio_upper > KG_ASSERT_UPPER + 1e-4 {
                return Err(Error::BoundViolation(format!(
                    "ratio [{}, {}] outside the Grothendieck bracket for {:?}",
                    row.ratio_lower,
                    row.ratio_upper,
                    a.to_rows()
                )));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(GrothendieckReport { k, seed, kg_bracket: KG_BRACKET, samples: rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn m(rows: Vec<Vec<f64>>) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    fn chsh() -> Matrix<f64> {
        m(vec![vec![1.0, 1.0], vec![1.0, -1.0]])
    }

    #[test]
    fn inf_to_one_fixtures() {
        assert_eq!(norm_inf_to_one(&chsh()).unwrap(), 2.0);
        assert_eq!(norm_inf_to_one(&Matrix::<f64>::identity(2)).unwrap(), 2.0);
        assert_eq!(norm_inf_to_one(&Matrix::<f64>::zeros(3, 3)).unwrap(), 0.0);
        let r = norm_inf_to_one_argmax(&m(vec![vec![1.0, -2.0, 0.5]])).unwrap();
        assert_eq!(r.value, 3.5);
        assert_eq!(r.y.len(), 3);
    }

    #[test]
    fn cb_norm_fixtures() {
        let s2 = 2f64.sqrt();
        let i = cb_norm_matrix(&chsh()).unwrap();
        assert!(i.contains(2.0 * s2, 1e-9) && i.width() < 1e-4);
        let e11 = m(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(cb_norm_matrix(&e11).unwrap().contains(1.0, 1e-9));
        assert!(cb_norm_matrix(&Matrix::identity(2)).unwrap().contains(2.0, 1e-9));
        let t = cb_norm_matrix(&chsh().transpose()).unwrap();
        assert!((t.lower - i.lower).abs() < 1e-4);
    }

    #[test]
    fn gamma2_fixtures() {
        let g = cb_dualnorm_matrix(&chsh()).unwrap();
        assert!(g.interval.contains(2f64.sqrt(), 1e-9) && g.interval.width() < 1e-4, "{}", g.interval);
        let (x, y) = &g.factors;
        assert!(x.matmul(&y.transpose()).unwrap().sub(&chsh()).unwrap().max_abs() < 1e-12);
        let e11 = m(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(cb_dualnorm_matrix(&e11).unwrap().interval.contains(1.0, 1e-6));
        let ones = m(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(cb_dualnorm_matrix(&ones).unwrap().interval.contains(1.0, 1e-6));
    }

    #[test]
    fn gamma2_random_intervals_are_tight() {
        for s in 0..5 {
            let b = random_matrix(4, 11, s);
            let g = cb_dualnorm_matrix(&b).unwrap();
            assert!(g.interval.is_consistent());
            assert!(g.interval.width() < 1e-3 * g.interval.upper, "{}", g.interval);
        }
    }

    #[test]
    fn dyad_dual_norm() {
        let q = |n: i64| BigRational::from_i64(n);
        let e11 = Matrix::from_rows(vec![vec![q(1), q(0)], vec![q(0), q(0)]]).unwrap();
        let d = inf_to_one_dualnorm(&e11).unwrap();
        assert_eq!(d.upper, q(1));
        assert_eq!(d.lower, q(1));
        let h = Matrix::from_rows(vec![vec![q(1), q(1)], vec![q(1), q(-1)]]).unwrap();
        assert_eq!(inf_to_one_dualnorm(&h).unwrap().upper, q(2));
        assert_eq!(inf_to_one_dualnorm(&Matrix::<BigRational>::identity(2)).unwrap().lower, q(1));
        let dyad = m(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!((inf_to_one_dualnorm(&dyad).unwrap().upper - 1.0).abs() < 1e-12);
        assert_eq!(inf_to_one_dualnorm(&Matrix::<f64>::zeros(2, 2)).unwrap().upper, 0.0);
    }

    #[test]
    fn poly_dual_example_and_bilinear_cross_check() {
        let third = BigRational::from_ratio(1, 3);
        let p = Polynomial::from_monomials(3, &[(&[0], third.clone()), (&[1], third.clone()), (&[2], third.clone())]).unwrap();
        let part = Partition::new(3, vec![vec![0, 1, 2]]).unwrap();
        let d = poly_inf_dualnorm(&p, &part).unwrap();
        assert_eq!(d.lower, third);
        assert_eq!(d.upper, third);
        assert_eq!(d.r_polynomial().unwrap().norm_one_exact().unwrap(), third);

        let x1 = Polynomial::<f64>::from_monomials(1, &[(&[0], 1.0)]).unwrap();
        let d = poly_inf_dualnorm(&x1, &Partition::new(1, vec![vec![0]]).unwrap()).unwrap();
        assert!((d.upper - 1.0).abs() < 1e-12);

        let b = m(vec![vec![0.3, -0.7], vec![0.2, 0.9]]);
        let form = BilinearForm::new(b.clone());
        let d = poly_inf_dualnorm(&form.to_polynomial(), &form.partition()).unwrap();
        let e = inf_to_one_dualnorm(&b).unwrap();
        assert!((d.upper - e.upper).abs() < 1e-9);
        assert_eq!(BilinearForm::from_polynomial(&form.to_polynomial(), &form.partition()).unwrap(), form);
    }

    #[test]
    fn grothendieck_small_run() {
        let rep = grothendieck_experiment(3, 6, 1).unwrap();
        assert_eq!(rep.samples.len(), 6);
        let again = grothendieck_experiment(3, 6, 1).unwrap();
        assert_eq!(rep.samples[5].cb_upper, again.samples[5].cb_upper);
        let s = grothendieck_sample(&chsh(), 0, &SdpDiagOptions::default()).unwrap();
        assert!((s.ratio_lower - 2f64.sqrt()).abs() < 1e-4);
    }
}
