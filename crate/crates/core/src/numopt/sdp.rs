use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::eig::{eig_sym, min_eigenvalue, SymMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::derived_rng;

pub const SDP_DIM_CAP: usize = 512;

#[derive(Clone, Debug)]
pub struct SdpDiagOptions {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Gaps above this are flagged; both bounds are still valid.
    pub gap_tol: f64,
}

impl Default for SdpDiagOptions {
    fn default() -> Self {
        SdpDiagOptions {
            restarts: 8,
            max_sweeps: 20_000,
            seed: 0,
            gap_tol: 1e-6,
        }
    }
}

/// Certified interval for `max{⟨C,X⟩ : X ⪰ 0, X_ii = 1}`.
///
/// `primal` is attained by `X = factor·factorᵀ` (unit rows); `dual = Σw` with
/// `Diag(w) - C ⪰ 0` checked by the eigensolver.
#[derive(Clone, Debug, Serialize)]
pub struct SdpDiagResult {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub factor: Matrix<f64>,
    pub w: Vec<f64>,
    pub flagged: bool,
}

impl SdpDiagResult {
    /// Gram matrix of the factor rows; a feasible primal point.
    pub fn x(&self) -> Matrix<f64> {
        self.factor.matmul(&self.factor.transpose()).expect("compatible")
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 1e-300 {
        v.iter_mut().for_each(|x| *x /= n);
        true
    } else {
        false
    }
}

fn objective(c: &Matrix<f64>, v: &[Vec<f64>]) -> f64 {
    let m = v.len();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            let cij = c[(i, j)];
            if cij != 0.0 {
                s += cij * v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    s
}

fn local_field(c: &Matrix<f64>, v: &[Vec<f64>], i: usize) -> Vec<f64> {
    let r = v[0].len();
    let mut g = vec![0.0; r];
    for (j, vj) in v.iter().enumerate() {
        let cij = c[(i, j)];
        if j != i && cij != 0.0 {
            g.iter_mut().zip(vj).for_each(|(a, b)| *a += cij * b);
        }
    }
    g
}

/// Low-rank block-coordinate ascent from one random start.
fn ascend(c: &Matrix<f64>, rank: usize, max_sweeps: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<Vec<f64>>) {
    let m = c.rows();
    let mut v: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut row: Vec<f64> = (0..rank).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if !normalize(&mut row) {
                row[0] = 1.0;
            }
            row
        })
        .collect();
    let mut obj = objective(c, &v);
    for _ in 0..max_sweeps {
        for i in 0..m {
            let mut g = local_field(c, &v, i);
            if normalize(&mut g) {
                v[i] = g;
            }
        }
        let next = objective(c, &v);
        let done = next - obj <= 1e-15 * (1.0 + obj.abs());
        obj = next;
        if done {
            break;
        }
    }
    (obj, v)
}

/// Smallest uniform shift making `Diag(w) - C` PSD, plus a safety margin.
fn repair_dual(c: &Matrix<f64>, mut w: Vec<f64>) -> Result<Vec<f64>> {
    let m = c.rows();
    let z = Matrix::from_fn(m, m, |i, j| if i == j { w[i] - c[(i, j)] } else { -c[(i, j)] });
    let lam = min_eigenvalue(&SymMatrix::new(z)?)?;
    let margin = 1e-11 * (1.0 + c.max_abs()) * m as f64;
    let shift = (-lam).max(0.0) + margin;
    w.iter_mut().for_each(|x| *x += shift);
    Ok(w)
}

pub fn sdp_diag_max(c: &SymMatrix<f64>, opts: &SdpDiagOptions) -> Result<SdpDiagResult> {
    let m = c.dim();
    if m > SDP_DIM_CAP {
        return Err(Error::CapExceeded {
            what: "SDP dimension",
            size: m,
            cap: SDP_DIM_CAP,
        });
    }
    let c = c.matrix();
    if m == 0 {
        return Ok(SdpDiagResult {
            primal: 0.0,
            dual: 0.0,
            gap: 0.0,
            factor: Matrix::zeros(0, 0),
            w: vec![],
            flagged: false,
        });
    }
    let rank = ((2.0 * m as f64).sqrt().ceil() as usize + 1).min(m.max(1));
    let runs: Vec<(f64, Vec<Vec<f64>>)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|k| {
            ascend(c, rank, opts.max_sweeps, &mut derived_rng(opts.seed, k as u64))
        })
        .collect();
    let (primal, v) = runs
        .into_iter()
        .fold(None, |best: Option<(f64, Vec<Vec<f64>>)>, run| match best {
            Some(b) if b.0 >= run.0 => Some(b),
            _ => Some(run),
        })
        .expect("at least one restart");

    let stationary: Vec<f64> = (0..m)
        .map(|i| {
            let g = local_field(c, &v, i);
            c[(i, i)] + g.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    let w_stat = repair_dual(c, stationary)?;
    let w_rows: Vec<f64> = (0..m)
        .map(|i| c[(i, i)] + (0..m).filter(|&j| j != i).map(|j| c[(i, j)].abs()).sum::<f64>())
        .collect();
    let w = if w_stat.iter().sum::<f64>() < w_rows.iter().sum::<f64>() {
        w_stat
    } else {
        w_rows
    };
    let dual: f64 = w.iter().sum();
    let gap = dual - primal;
    let factor = Matrix::from_rows(v)?;
    Ok(SdpDiagResult {
        primal,
        dual,
        gap,
        factor,
        w,
        flagged: gap > opts.gap_tol * (1.0 + primal.abs()),
    })
}

#[derive(Clone, Debug)]
pub enum PsdFeasibility {
    /// A PSD matrix matching the fixed entries up to `residual`.
    Feasible { point: Matrix<f64>, residual: f64 },
    /// Alternating projections stalled; `witness` is a unit vector with
    /// `witnessᵀ X witness = min_eigenvalue < 0` for the final affine iterate.
    /// This is a heuristic indication only, not a proof of infeasibility.
    Stalled {
        witness: Vec<f64>,
        min_eigenvalue: f64,
        residual: f64,
    },
}

/// Looks for `X ⪰ 0` with `X_ij = target_ij` on the `fixed` positions (taken
/// symmetrically), other entries free, by alternating projections.
pub fn psd_feasibility(
    target: &SymMatrix<f64>,
    fixed: &[(usize, usize)],
    max_iter: usize,
) -> Result<PsdFeasibility> {
    let m = target.dim();
    let t = target.matrix();
    let mut mask = vec![false; m * m];
    for &(i, j) in fixed {
        if i >= m || j >= m {
            return Err(Error::InvalidInput("fixed entry outside the matrix".into()));
        }
        mask[i * m + j] = true;
        mask[j * m + i] = true;
    }
    let mut x = t.clone();
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let e = eig_sym(&SymMatrix::new(x.clone())?)?;
        let clipped: Vec<f64> = e.values.iter().map(|&l| l.max(0.0)).collect();
        let psd = e
            .vectors
            .matmul(&Matrix::diag(&clipped))?
            .matmul(&e.vectors.transpose())?;
        let residual = (0..m * m)
            .filter(|&k| mask[k])
            .map(|k| (psd.entries()[k] - t.entries()[k]).abs())
            .fold(0.0, f64::max);
        if residual < 1e-8 {
            return Ok(PsdFeasibility::Feasible {
                point: psd,
                residual,
            });
        }
        if (last - residual).abs() <= 1e-12 * residual.max(1e-300) {
            let last_e = eig_sym(&SymMatrix::new(x)?)?;
            let k = last_e.values.len() - 1;
            return Ok(PsdFeasibility::Stalled {
                witness: last_e.vector(k),
                min_eigenvalue: last_e.values[k],
                residual,
            });
        }
        last = residual;
        x = Matrix::from_fn(m, m, |i, j| {
            if mask[i * m + j] {
                t[(i, j)]
            } else {
                psd[(i, j)]
            }
        });
    }
    Err(Error::NoConvergence("alternating projections iteration cap".into()))
}
