use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

const MAX_ITERATIONS: usize = 200_000;

/// Consecutive degenerate pivots after which pricing falls back to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

/// `max cᵀx  s.t.  A x = b,  x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LpProblem<S> {
    pub c: Vec<S>,
    pub a: Matrix<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> LpProblem<S> {
    pub fn new(c: Vec<S>, a: Matrix<S>, b: Vec<S>) -> Result<Self> {
        check_dim("LP objective length", a.cols(), c.len())?;
        check_dim("LP right-hand side length", a.rows(), b.len())?;
        Ok(LpProblem { c, a, b })
    }
}

/// Optimal primal point with dual prices `y` satisfying `Aᵀy ≥ c` (up to the
/// reported residuals); `bᵀy` equals the optimum.
#[derive(Clone, Debug)]
pub struct LpSolution<S> {
    pub x: Vec<S>,
    pub value: S,
    pub y: Vec<S>,
    pub dual_value: S,
    pub primal_residual: f64,
    pub dual_infeasibility: f64,
    pub complementary_slackness: f64,
    pub iterations: usize,
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    rhs: Vec<S>,
    basis: Vec<usize>,
    reduced: Vec<S>,
    value: S,
    iterations: usize,
}

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, r: usize, col: usize) {
        let piv = self.rows[r][col].clone();
        let nz: Vec<usize> = (0..self.rows[r].len())
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        for &j in &nz {
            self.rows[r][j] = self.rows[r][j].clone() / piv.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / piv;
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][col].is_zero() {
                continue;
            }
            let f = self.rows[i][col].clone();
            for &j in &nz {
                self.rows[i][j] = self.rows[i][j].clone() - f.clone() * prow[j].clone();
            }
            self.rows[i][col] = S::zero();
            self.rhs[i] = self.rhs[i].clone() - f * prhs.clone();
        }
        let f = self.reduced[col].clone();
        if !f.is_zero() {
            for &j in &nz {
                self.reduced[j] = self.reduced[j].clone() - f.clone() * prow[j].clone();
            }
            self.reduced[col] = S::zero();
            self.value = self.value.clone() + f * prhs;
        }
        self.basis[r] = col;
        self.iterations += 1;
    }

    fn price(&mut self, cost: &[S]) {
        let m = self.rows.len();
        self.reduced = cost.to_vec();
        self.value = S::zero();
        for i in 0..m {
            let cb = cost[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for (r, a) in self.reduced.iter_mut().zip(&self.rows[i]) {
                if !a.is_zero() {
                    *r = r.clone() - cb.clone() * a.clone();
                }
            }
            self.value = self.value.clone() + cb * self.rhs[i].clone();
        }
    }

    /// Runs simplex iterations on columns `0..allowed`. Dantzig pricing, with
    /// Bland's rule once a long degenerate streak suggests cycling.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let tol = S::pivot_tol();
        let mut streak = 0;
        loop {
            if self.iterations > MAX_ITERATIONS {
                return Err(Error::NoConvergence("simplex iteration cap".into()));
            }
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter: Option<usize> = None;
            for j in 0..allowed {
                if self.reduced[j] > tol {
                    match enter {
                        None => enter = Some(j),
                        Some(e) if !bland && self.reduced[j] > self.reduced[e] => enter = Some(j),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some(col) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, S)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][col];
                if *a > tol {
                    let ratio = self.rhs[i].clone() / a.clone();
                    let better = match &leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < *best || (ratio == *best && self.basis[i] < self.basis[*l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio.is_zero() {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, col);
        }
    }
}

/// Two-phase dense simplex. Dual prices are read from the final basis inverse,
/// which the artificial columns carry along.
pub fn lp_solve<S: Scalar>(prob: &LpProblem<S>) -> Result<LpSolution<S>> {
    let (m, n) = (prob.a.rows(), prob.a.cols());
    let mut sign = vec![S::one(); m];
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, sg) in sign.iter_mut().enumerate() {
        let flip = prob.b[i] < S::zero();
        if flip {
            *sg = -S::one();
        }
        let mut row: Vec<S> = prob
            .a
            .row(i)
            .iter()
            .map(|x| if flip { -x.clone() } else { x.clone() })
            .collect();
        row.extend((0..m).map(|k| if k == i { S::one() } else { S::zero() }));
        rows.push(row);
        rhs.push(prob.b[i].abs());
    }
    let mut tab = Tableau {
        rows,
        rhs,
        basis: (n..n + m).collect(),
        reduced: Vec::new(),
        value: S::zero(),
        iterations: 0,
    };

    let phase1: Vec<S> = (0..n + m)
        .map(|j| if j < n { S::zero() } else { -S::one() })
        .collect();
    tab.price(&phase1);
    tab.optimize(n + m)?;
    let bscale = prob.b.iter().map(|x| x.to_f64().abs()).fold(1.0, f64::max);
    let infeasible = if S::EXACT {
        tab.value < S::zero()
    } else {
        tab.value.to_f64() < -1e-8 * bscale
    };
    if infeasible {
        return Err(Error::Infeasible);
    }
    for i in 0..m {
        if tab.basis[i] >= n {
            let tol = S::pivot_tol();
            if let Some(j) = (0..n).find(|&j| tab.rows[i][j].abs() > tol) {
                tab.pivot(i, j);
            }
        }
    }

    let phase2: Vec<S> = (0..n + m)
        .map(|j| if j < n { prob.c[j].clone() } else { S::zero() })
        .collect();
    tab.price(&phase2);
    tab.optimize(n)?;

    let mut x = vec![S::zero(); n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab.rhs[i].clone();
        }
    }
    let y: Vec<S> = (0..m)
        .map(|i| {
            let yi = (0..m).fold(S::zero(), |acc, k| {
                acc + phase2[tab.basis[k]].clone() * tab.rows[k][n + i].clone()
            });
            yi * sign[i].clone()
        })
        .collect();

    let value = dot(&prob.c, &x);
    let dual_value = dot(&prob.b, &y);
    let ax = prob.a.mul_vec(&x)?;
    let primal_residual = ax
        .iter()
        .zip(&prob.b)
        .map(|(l, r)| (l.clone() - r.clone()).to_f64().abs())
        .fold(0.0, f64::max);
    let aty = prob.a.vec_mul(&y)?;
    let mut dual_infeasibility: f64 = 0.0;
    let mut complementary_slackness: f64 = 0.0;
    for j in 0..n {
        let slack = (aty[j].clone() - prob.c[j].clone()).to_f64();
        dual_infeasibility = dual_infeasibility.max(-slack);
        complementary_slackness = complementary_slackness.max(x[j].to_f64().abs() * slack.abs());
    }
    Ok(LpSolution {
        x,
        value,
        y,
        dual_value,
        primal_residual,
        dual_infeasibility,
        complementary_slackness,
        iterations: tab.iterations,
    })
}
