//! Certified bounds on the additive error `E(p,t)` of `t`-query algorithms
//! computing a block-multilinear form `p` in expectation.
//!
//! For bilinear forms (`t = 1`) both sides are computed: the upper side is an
//! explicit `Q` in the cb unit ball with error `‖A - Q‖_{∞→1}`, and the lower
//! side a matrix `B` scored by `(⟨A,B⟩ - γ₂(B)) / ‖B‖_{∞→1,*}`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cert::{CbCertificate, CertifiedInterval, CERT_TOL};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_sq, Matrix, SparseMatrix};
use crate::matnorms::{
    cb_dualnorm_matrix_with, cb_norm_matrix_with, matrix_hash, norm_inf_to_one, random_matrix, BilinearForm,
};
use crate::numopt::{lp_solve, op_norm, LpProblem, SdpDiagOptions};
use crate::poly::{Partition, Polynomial};
use crate::scalar::Scalar;
use crate::tensor::{symmetric_tensor_of, DIM_CAP};

/// Side length accepted by [`eps_bilinear`].
pub const EPS_BILINEAR_CAP: usize = 4;
/// Most separating cuts added by [`eps_bilinear`].
pub const MAX_CUTS: usize = 500;

#[derive(Clone, Debug)]
pub struct EpsOptions {
    pub tol: f64,
    pub max_cuts: usize,
    pub seed: u64,
}

impl Default for EpsOptions {
    fn default() -> Self {
        EpsOptions {
            tol: 5e-3,
            max_cuts: MAX_CUTS,
            seed: 0,
        }
    }
}

/// Feasible `B` for the dual supremum, with the certified upper bounds that score it.
#[derive(Clone, Debug, Serialize)]
pub struct LowerWitness {
    pub b: Matrix<f64>,
    pub pairing: f64,
    pub cb_dual_upper: f64,
    pub inf_dual_upper: f64,
}

/// `Q` with a certified `‖Q‖_cb ≤ 1` and its exact error `‖A - Q‖_{∞→1}`.
#[derive(Clone, Debug, Serialize)]
pub struct UpperWitness {
    pub q: Matrix<f64>,
    pub q_cb_upper: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryErrorResult {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: LowerWitness,
    pub upper_witness: UpperWitness,
    pub cuts: usize,
    pub flagged: bool,
}

impl QueryErrorResult {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn interval(&self) -> CertifiedInterval {
        CertifiedInterval::new(
            self.lower,
            self.upper,
            "B with certified γ₂ and dyad-norm upper bounds",
            "Q with certified ‖Q‖_cb ≤ 1",
        )
    }
}

fn dyads(r: usize, c: usize) -> Vec<Matrix<f64>> {
    let mut out = Vec::new();
    for xm in 0..1u64 << r.saturating_sub(1) {
        for ym in 0..1u64 << c {
            let xm = xm << 1;
            out.push(Matrix::from_fn(r, c, |i, j| {
                if ((xm >> i) ^ (ym >> j)) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            }));
        }
    }
    out
}

struct Master {
    q: Matrix<f64>,
    b: Matrix<f64>,
    dyad_weight: f64,
}

/// `min s` over `(Q, s)` with `|⟨A - Q, D⟩| ≤ s` for every dyad and `⟨Q, C⟩ ≤ 1` for every cut.
fn solve_master(a: &Matrix<f64>, ds: &[Matrix<f64>], cuts: &[Matrix<f64>]) -> Result<Master> {
    let (r, c) = (a.rows(), a.cols());
    let kk = r * c;
    let rows = 2 * ds.len() + cuts.len();
    let cols = 2 * kk + 1 + rows;
    let mut m = Matrix::zeros(rows, cols);
    let mut rhs = vec![0.0; rows];
    let put_q = |m: &mut Matrix<f64>, row: usize, coef: &Matrix<f64>, sign: f64| {
        for (e, &x) in coef.entries().iter().enumerate() {
            m[(row, e)] = sign * x;
            m[(row, kk + e)] = -sign * x;
        }
    };
    for (d, dm) in ds.iter().enumerate() {
        let ad = a.inner(dm)?;
        put_q(&mut m, 2 * d, dm, -1.0);
        m[(2 * d, 2 * kk)] = -1.0;
        rhs[2 * d] = -ad;
        put_q(&mut m, 2 * d + 1, dm, 1.0);
        m[(2 * d + 1, 2 * kk)] = -1.0;
        rhs[2 * d + 1] = ad;
    }
    for (k, cm) in cuts.iter().enumerate() {
        let row = 2 * ds.len() + k;
        put_q(&mut m, row, cm, 1.0);
        rhs[row] = 1.0;
    }
    for row in 0..rows {
        m[(row, 2 * kk + 1 + row)] = 1.0;
    }
    let mut obj = vec![0.0; cols];
    obj[2 * kk] = -1.0;
    let sol = lp_solve(&LpProblem::new(obj, m, rhs)?)?;
    let q = Matrix::from_fn(r, c, |i, j| sol.x[i * c + j] - sol.x[kk + i * c + j]);
    let mut b = Matrix::zeros(r, c);
    let mut dyad_weight = 0.0;
    for (d, dm) in ds.iter().enumerate() {
        let lam = sol.y[2 * d] - sol.y[2 * d + 1];
        dyad_weight += lam.abs();
        b = b.add(&dm.scale(&lam))?;
    }
    Ok(Master { q, b, dyad_weight })
}

/// Minimizes the convex map `θ ↦ ‖A - θQ‖_{∞→1}` on `[0, 1]`.
fn best_scaling(a: &Matrix<f64>, q: &Matrix<f64>) -> Result<(f64, f64)> {
    let f = |t: f64| norm_inf_to_one(&a.sub(&q.scale(&t))?);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let mut best = (1.0, f(1.0)?);
    for (t, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 {
            best = (t, v);
        }
    }
    Ok(best)
}

/// Certified interval for `E(p, 1)` of `p(x, y) = xᵀAy`, by Kelley cutting planes
/// on the cb unit ball: cuts are correlation matrices found by the cb-norm SDP.
pub fn eps_bilinear(a: &Matrix<f64>, opts: &EpsOptions) -> Result<QueryErrorResult> {
    let (r, c) = (a.rows(), a.cols());
    if r.max(c) > EPS_BILINEAR_CAP {
        return Err(Error::CapExceeded {
            what: "query-error matrix side",
            size: r.max(c),
            cap: EPS_BILINEAR_CAP,
        });
    }
    let sdp = SdpDiagOptions {
        seed: opts.seed,
        ..SdpDiagOptions::default()
    };
    let norm_p = norm_inf_to_one(a)?;
    let zero_lower = LowerWitness {
        b: Matrix::zeros(r, c),
        pairing: 0.0,
        cb_dual_upper: 0.0,
        inf_dual_upper: 0.0,
    };
    let mut upper = UpperWitness {
        q: Matrix::zeros(r, c),
        q_cb_upper: 0.0,
        error: norm_p,
    };
    if norm_p == 0.0 {
        return Ok(QueryErrorResult {
            lower: 0.0,
            upper: 0.0,
            lower_witness: zero_lower,
            upper_witness: upper,
            cuts: 0,
            flagged: false,
        });
    }
    let consider = |cand: &Matrix<f64>, upper: &mut UpperWitness| -> Result<()> {
        let ub = cb_norm_matrix_with(cand, &sdp)?.interval.upper;
        let q = if ub > 1.0 { cand.scale(&(1.0 / ub)) } else { cand.clone() };
        let (t, err) = best_scaling(a, &q)?;
        if err < upper.error {
            *upper = UpperWitness {
                q: q.scale(&t),
                q_cb_upper: ub.max(1.0).recip() * ub * t,
                error: err,
            };
        }
        Ok(())
    };
    consider(a, &mut upper)?;

    let ds = dyads(r, c);
    let mut cuts: Vec<Matrix<f64>> = ds.iter().flat_map(|d| [d.clone(), d.scale(&-1.0)]).collect();
    let base = cuts.len();
    let mut lower = zero_lower;
    let mut lower_value = 0.0;
    let mut flagged = true;
    loop {
        let master = solve_master(a, &ds, &cuts)?;
        if master.dyad_weight > 0.0 {
            let g = cb_dualnorm_matrix_with(&master.b, &sdp)?;
            let pairing = a.inner(&master.b)?;
            let value = (pairing - g.interval.upper) / master.dyad_weight;
            if value > lower_value {
                lower_value = value;
                lower = LowerWitness {
                    b: master.b.clone(),
                    pairing,
                    cb_dual_upper: g.interval.upper,
                    inf_dual_upper: master.dyad_weight,
                };
            }
        }
        consider(&master.q, &mut upper)?;
        if upper.error - lower_value <= opts.tol {
            flagged = false;
            break;
        }
        if cuts.len() - base >= opts.max_cuts {
            break;
        }
        let sep = cb_norm_matrix_with(&master.q, &sdp)?;
        let corr = sep.correlation();
        if master.q.inner(&corr)? <= 1.0 + 1e-9 {
            // The master point is inside the ball as far as the SDP can tell.
            break;
        }
        cuts.push(corr);
    }
    Ok(QueryErrorResult {
        lower: lower_value.clamp(0.0, norm_p),
        upper: upper.error.min(norm_p),
        lower_witness: lower,
        upper_witness: upper,
        cuts: cuts.len() - base,
        flagged,
    })
}

/// How [`eps_upper_via_cb`] bounds `‖p‖_cb`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CbUpperRoute {
    /// Certified SDP bound for two blocks, exact value for one block.
    Certified,
    /// `Σ|c_α|`, valid for every order.
    Ell1,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlmostGt {
    pub value: f64,
    pub norm_inf: f64,
    pub cb_upper: f64,
    pub route: CbUpperRoute,
}

/// `‖p‖_∞ (1 - 1/UB(‖p‖_cb))`, an upper bound on `E(p,t)`.
pub fn eps_upper_via_cb(p: &Polynomial<f64>, part: &Partition, route: CbUpperRoute) -> Result<AlmostGt> {
    if !p.is_block_multilinear(part) {
        return Err(Error::InvalidInput("polynomial is not block-multilinear for the partition".into()));
    }
    let norm_inf = p.norm_inf_exact()?;
    let ell1: f64 = p.terms().values().map(|c| c.abs()).sum();
    let cb_upper = match (route, part.len()) {
        (CbUpperRoute::Ell1, _) | (_, 1) => ell1,
        (CbUpperRoute::Certified, 2) => {
            let form = BilinearForm::from_polynomial(p, part)?;
            cb_norm_matrix_with(&form.a, &SdpDiagOptions::default())?.interval.upper
        }
        (CbUpperRoute::Certified, k) => {
            return Err(Error::InvalidInput(format!(
                "no certified cb-norm upper bound for {k} blocks; request the ℓ1 route"
            )))
        }
    };
    let value = if cb_upper > 0.0 {
        (norm_inf * (1.0 - 1.0 / cb_upper)).max(0.0)
    } else {
        0.0
    };
    Ok(AlmostGt { value, norm_inf, cb_upper, route })
}

/// Lower bound on `E(p,t)` from a witness `r ∈ V_P`.
#[derive(Clone, Debug)]
pub struct WitnessBound<S> {
    /// `max(0, raw)`.
    pub value: S,
    /// `(⟨p,r⟩ - w) / ub`, or zero when `ub = 0`.
    pub raw: S,
    pub pairing: S,
    pub w: S,
    pub ub_infdual: S,
    pub clamped: bool,
}

/// `(⟨p,r⟩ - w) / ‖r̃‖_1` after re-validating both witnesses:
/// `cert` must realize `t!·T_r` with weight `w` (so `‖r‖_{cb,*} ≤ w`), and the
/// extension `r̃ ∈ W_P` must satisfy `r̃_{=t} = r` (so `‖r‖_{∞,*} ≤ ‖r̃‖_1`).
pub fn eps_lower_from_witness<S: Scalar>(
    p: &Polynomial<S>,
    r: &Polynomial<S>,
    part: &Partition,
    cert: &CbCertificate<S>,
    extension: &Polynomial<S>,
) -> Result<WitnessBound<S>> {
    let t = part.len();
    if !p.is_block_multilinear(part) || !r.is_block_multilinear(part) {
        return Err(Error::WitnessInconsistent("p and r must lie in V_P".into()));
    }
    if cert.order() != t || cert.n() != r.n() {
        return Err(Error::WitnessInconsistent(format!(
            "certificate has order {} on {} variables, expected {t} on {}",
            cert.order(),
            cert.n(),
            r.n()
        )));
    }
    let report = cert.validate(if S::EXACT { 0.0 } else { CERT_TOL });
    if !report.is_valid() {
        return Err(Error::WitnessInconsistent(report.violations.join("; ")));
    }
    let factorial = S::from_i64((1..=t as i64).product());
    let expected = symmetric_tensor_of(r, t)?.scale(&factorial);
    let diff = cert.realize()?.sub(&expected)?;
    let off = diff.entries().values().any(|x| if S::EXACT { !x.is_zero() } else { x.to_f64().abs() > 1e-9 });
    if off {
        return Err(Error::WitnessInconsistent("certificate does not realize t!·T_r".into()));
    }
    if extension.project_wq(part)? != *extension || extension.homogeneous_part(t) != *r {
        return Err(Error::WitnessInconsistent("extension is not in W_P or does not restrict to r".into()));
    }
    let ub = extension.norm_one_exact()?;
    let pairing = p.inner(r)?;
    let w = cert.weight().clone();
    if ub.is_zero() {
        return Ok(WitnessBound { value: S::zero(), raw: S::zero(), pairing, w, ub_infdual: ub, clamped: true });
    }
    let raw = (pairing.clone() - w.clone()) / ub.clone();
    let clamped = raw.is_negative();
    let value = if clamped { S::zero() } else { raw.clone() };
    Ok(WitnessBound { value, raw, pairing, w, ub_infdual: ub, clamped })
}

/// Data `(u, v, w, A, r)` of the dual program with a single contraction-valued
/// map on `n + 1` indices; nothing is checked at construction.
#[derive(Clone, Debug)]
pub struct Sdp2Instance {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: f64,
    pub ops: Vec<SparseMatrix<f64>>,
    pub r: Polynomial<f64>,
}

impl Sdp2Instance {
    /// Uses the certificate's data and appends `A(n+1) = 0`.
    pub fn from_certificate(cert: &CbCertificate<f64>, r: Polynomial<f64>) -> Self {
        let d = cert.dim();
        let mut ops = cert.ops().to_vec();
        ops.push(SparseMatrix::zeros(d, d));
        Sdp2Instance {
            u: cert.u().to_vec(),
            v: cert.v().to_vec(),
            w: *cert.weight(),
            ops,
            r,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sdp2Verified {
    pub objective: f64,
    pub pairing: f64,
    pub w: f64,
    pub r_norm_one: f64,
    pub tuples_checked: usize,
}

pub const SDP2_MAX_VARS: usize = 8;

/// Checks every constraint of the instance and returns `(⟨p,r⟩ - w)/‖r‖_1`.
/// Violations are listed with their 1-based tuples.
pub fn verify_sdp2_instance(inst: &Sdp2Instance, part: &Partition, p: &Polynomial<f64>) -> Result<Sdp2Verified> {
    let n = p.n();
    let order = part.len();
    if n > SDP2_MAX_VARS || order > 4 {
        return Err(Error::CapExceeded {
            what: "dual-program enumeration",
            size: n.max(order),
            cap: SDP2_MAX_VARS,
        });
    }
    check_dim("instance polynomial variables", n, inst.r.n())?;
    check_dim("instance operator count", n + 1, inst.ops.len())?;
    let d = inst.u.len();
    check_dim("instance vector v", d, inst.v.len())?;
    if !inst.r.is_multilinear() {
        return Err(Error::InvalidInput("r must be multilinear".into()));
    }
    let mut violations = Vec::new();
    let scale = inst.w.abs().max(1.0);
    for (name, nsq) in [("u", norm_sq(&inst.u)), ("v", norm_sq(&inst.v))] {
        if (nsq - inst.w).abs() > CERT_TOL * scale {
            violations.push(format!("‖{name}‖² = {nsq} but w = {}", inst.w));
        }
    }
    for (i, a) in inst.ops.iter().enumerate() {
        check_dim("instance operator", d, a.rows())?;
        check_dim("instance operator", d, a.cols())?;
        if a.is_signed_partial_permutation() {
            continue;
        }
        if d > DIM_CAP {
            return Err(Error::CapExceeded { what: "operator norm check", size: d, cap: DIM_CAP });
        }
        let norm = op_norm(&a.to_dense())?;
        if norm > 1.0 + CERT_TOL {
            violations.push(format!("A({}) has operator norm {norm}", i + 1));
        }
    }
    let coeffs: BTreeMap<u64, f64> = inst.r.sign_table()?.into_iter().collect();
    let mut bad_tuples = Vec::new();
    let mut checked = 0usize;
    let mut stack: Vec<(Vec<usize>, Vec<f64>, u64)> = vec![(Vec::new(), inst.u.clone(), 0)];
    while let Some((tuple, row, alpha)) = stack.pop() {
        if tuple.len() == order {
            checked += 1;
            let got = dot(&row, &inst.v);
            let want = coeffs.get(&alpha).copied().unwrap_or(0.0);
            if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
                bad_tuples.push((tuple, want, got));
            }
            continue;
        }
        for (i, a) in inst.ops.iter().enumerate() {
            let mut next = tuple.clone();
            next.push(i);
            let bit = if i < n { 1u64 << i } else { 0 };
            stack.push((next, a.vec_mul(&row)?, alpha ^ bit));
        }
    }
    if !bad_tuples.is_empty() {
        bad_tuples.sort_by(|x, y| x.0.cmp(&y.0));
        let shown: Vec<String> = bad_tuples
            .iter()
            .take(10)
            .map(|(t, want, got)| {
                let idx: Vec<String> = t.iter().map(|i| (i + 1).to_string()).collect();
                format!("({}): coefficient {want}, realized {got}", idx.join(","))
            })
            .collect();
        violations.push(format!("{} tuple constraints fail: {}", bad_tuples.len(), shown.join("; ")));
    }
    if !violations.is_empty() {
        return Err(Error::WitnessInconsistent(violations.join(" | ")));
    }
    let r_norm_one = inst.r.norm_one_exact()?;
    let pairing = p.inner(&inst.r)?;
    let objective = if r_norm_one > 0.0 { (pairing - inst.w) / r_norm_one } else { 0.0 };
    Ok(Sdp2Verified { objective, pairing, w: inst.w, r_norm_one, tuples_checked: checked })
}

/// XOR-game values of `A` under both conventions: unnormalized (`‖A‖_{∞→1}` and
/// the cb interval) and divided by `Σ|A_ij|`.
#[derive(Clone, Debug, Serialize)]
pub struct XorGameValues {
    pub distribution: Matrix<f64>,
    pub total_weight: f64,
    pub classical: f64,
    pub quantum: CertifiedInterval,
    pub classical_normalized: f64,
    pub quantum_normalized: CertifiedInterval,
}

pub fn xor_game_values(a: &Matrix<f64>) -> Result<XorGameValues> {
    let total: f64 = a.entries().iter().map(|x| x.abs()).sum();
    if total == 0.0 {
        return Err(Error::InvalidInput("the zero matrix defines no game".into()));
    }
    let classical = norm_inf_to_one(a)?;
    let quantum = cb_norm_matrix_with(a, &SdpDiagOptions::default())?.interval;
    let quantum_normalized = CertifiedInterval::new(
        quantum.lower / total,
        quantum.upper / total,
        quantum.lower_witness.clone(),
        quantum.upper_witness.clone(),
    );
    Ok(XorGameValues {
        distribution: a.map(|x| x.abs() / total),
        total_weight: total,
        classical,
        quantum,
        classical_normalized: classical / total,
        quantum_normalized,
    })
}

/// Margin a separation must clear before it is reported.
pub const SEPARATION_TOL: f64 = 1e-6;

/// One sample of the comparison between `E(p,1)` and `‖p‖_∞(1 - 1/‖p‖_cb)`.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeRow {
    pub index: usize,
    pub matrix_hash: String,
    pub e_lower: f64,
    pub e_upper: f64,
    pub almost_gt_lower: f64,
    pub almost_gt_upper: f64,
    /// `almost_gt_lower - e_upper`; positive values separate the two quantities.
    pub separation: f64,
    /// `separation > SEPARATION_TOL`.
    pub separated: bool,
    pub flagged: bool,
}

/// Samples bounded bilinear forms (`‖A‖_{∞→1} = 1`, uniform entries before
/// scaling) and compares the two quantities. Only `E ≤ ‖p‖_∞(1 - 1/‖p‖_cb)` is
/// asserted; equality is reported, never assumed.
pub fn probe_open_question(samples: usize, k: usize, seed: u64) -> Result<Vec<ProbeRow>> {
    if k == 0 || k > 3 {
        return Err(Error::CapExceeded { what: "probe matrix side", size: k, cap: 3 });
    }
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let raw = random_matrix(k, seed, s as u64);
            let norm = norm_inf_to_one(&raw)?;
            let a = raw.scale(&(1.0 / norm));
            probe_one(&a, s, seed.wrapping_add(s as u64))
        })
        .collect()
}

pub fn probe_one(a: &Matrix<f64>, index: usize, seed: u64) -> Result<ProbeRow> {
    let opts = EpsOptions { seed, ..EpsOptions::default() };
    let e = eps_bilinear(a, &opts)?;
    let norm = norm_inf_to_one(a)?;
    let cb = cb_norm_matrix_with(a, &SdpDiagOptions { seed, ..SdpDiagOptions::default() })?.interval;
    let gt = |x: f64| if x > 0.0 { (norm * (1.0 - 1.0 / x)).max(0.0) } else { 0.0 };
    let (gl, gu) = (gt(cb.lower), gt(cb.upper));
    if e.upper > gu + 1e-4 {
        return Err(Error::BoundViolation(format!(
            "E upper {} exceeds ‖p‖_∞(1 - 1/‖p‖_cb) upper {gu} for {:?}",
            e.upper,
            a.to_rows()
        )));
    }
    Ok(ProbeRow {
        index,
        matrix_hash: matrix_hash(a),
        e_lower: e.lower,
        e_upper: e.upper,
        almost_gt_lower: gl,
        almost_gt_upper: gu,
        separation: gl - e.upper,
        separated: gl - e.upper > SEPARATION_TOL,
        flagged: e.flagged,
    })
}
