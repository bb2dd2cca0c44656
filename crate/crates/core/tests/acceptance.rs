//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! report is always printed; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cbnorm::cert::{combine_maps, from_ell1, parity_lift};
use cbnorm::matnorms::{
    cb_dualnorm_matrix, cb_norm_matrix, grothendieck_experiment, norm_inf_to_one, poly_inf_dualnorm, random_matrix,
};
use cbnorm::numopt::clip_operator_norm;
use cbnorm::poly::{random_polynomial, DegreeProfile};
use cbnorm::queryerror::{eps_bilinear, probe_one, verify_sdp2_instance, EpsOptions, Sdp2Instance};
use cbnorm::rng::derived_rng;
use cbnorm::tensor::symmetric_tensor_of;
use cbnorm::witness::{build_family, check_certificate, extend_with_identity, ratio_report, squarefree_density, varopoulos_certificate};
use cbnorm::{Matrix, Partition, Polynomial, Rational, Scalar, SparseMatrix, Tensor};
use num_traits::One;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn err(e: cbnorm::Error) -> String {
    e.to_string()
}

fn example_fixture() -> Outcome {
    let start = Instant::now();
    let third = Rational::new(1.into(), 3.into());
    let p = Polynomial::from_monomials(3, &[(&[0], third.clone()), (&[1], third.clone()), (&[2], third.clone())])
        .map_err(err)?;
    let part = Partition::new(3, vec![vec![0, 1, 2]]).map_err(err)?;
    let exact = poly_inf_dualnorm(&p, &part).map_err(err)?;
    ensure(exact.lower == third && exact.upper == third, || {
        format!("exact routes gave [{}, {}]", exact.lower, exact.upper)
    })?;
    let pf = p.to_f64();
    let float = poly_inf_dualnorm(&pf, &part).map_err(err)?;
    ensure((float.upper - float.lower).abs() < 1e-9 && (float.lower - 1.0 / 3.0).abs() < 1e-9, || {
        format!("float routes gave [{}, {}]", float.lower, float.upper)
    })?;
    let one = p.norm_one_exact().map_err(err)?;
    ensure(one == Rational::new(1.into(), 2.into()), || format!("‖p‖_1 = {one}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("‖p‖_∞,* = {third} on both routes, ‖p‖_1 = 1/2"))
}

fn grothendieck_sandwich() -> Outcome {
    let start = Instant::now();
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 2..=5 {
        let report = grothendieck_experiment(k, 25, 1000 + k as u64).map_err(err)?;
        for s in &report.samples {
            ensure(s.ratio_lower >= 1.0 - 1e-6 && s.ratio_upper <= 1.7821 + 1e-4, || {
                format!("k = {k}, sample {}: [{}, {}]", s.index, s.ratio_lower, s.ratio_upper)
            })?;
            worst = (worst.0.min(s.ratio_lower), worst.1.max(s.ratio_upper));
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("100 ratios within [{:.6}, {:.6}]", worst.0, worst.1))
}

fn chsh_fixtures() -> Outcome {
    let a = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, -1.0]]).map_err(err)?;
    let inf = norm_inf_to_one(&a).map_err(err)?;
    ensure(inf == 2.0, || format!("‖A‖_∞→1 = {inf}"))?;
    let cb = cb_norm_matrix(&a).map_err(err)?;
    ensure(cb.contains(8f64.sqrt(), 1e-12) && cb.width() < 1e-3, || format!("cb interval {cb}"))?;
    let g = cb_dualnorm_matrix(&a).map_err(err)?.interval;
    ensure(g.contains(2f64.sqrt(), 1e-12) && g.width() < 1e-3, || format!("dual interval {g}"))?;
    Ok(format!("∞→1 = 2, cb {cb}, cb-dual {g}"))
}

fn bounded_form(seed: u64, index: u64) -> Result<Matrix<f64>, String> {
    let raw = random_matrix(2, seed, index);
    let norm = norm_inf_to_one(&raw).map_err(err)?;
    Ok(raw.scale(&(1.0 / norm)))
}

fn minimax_gap() -> Outcome {
    let mut max_gap: f64 = 0.0;
    for i in 0..25u64 {
        let a = bounded_form(4242, i)?;
        let row = probe_one(&a, i as usize, i).map_err(err)?;
        let gap = row.e_upper - row.e_lower;
        ensure(gap < 5e-3, || format!("sample {i}: gap {gap}"))?;
        ensure(0.0 <= row.e_lower && row.e_upper <= 1.0, || {
            format!("sample {i}: [{}, {}] leaves [0, 1]", row.e_lower, row.e_upper)
        })?;
        ensure(row.e_upper <= row.almost_gt_upper + 1e-4, || {
            format!("sample {i}: upper {} above {}", row.e_upper, row.almost_gt_upper)
        })?;
        max_gap = max_gap.max(gap);
    }
    Ok(format!("25 forms, largest gap {max_gap:.2e}"))
}

fn order_two_supremum() -> Outcome {
    let grid: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
    let cap = 1.0 - 1.0 / 1.7822 + 1e-2;
    let mut best: f64 = 0.0;
    let mut count = 0;
    for &s in &grid {
        for &t in &grid {
            for &u in &grid {
                let raw = Matrix::from_rows(vec![vec![1.0, s], vec![t, -u]]).map_err(err)?;
                let a = raw.scale(&(1.0 / norm_inf_to_one(&raw).map_err(err)?));
                let e = eps_bilinear(&a, &EpsOptions::default()).map_err(err)?;
                ensure(e.upper <= cap, || format!("({s}, {t}, {u}): upper {} above {cap}", e.upper))?;
                best = best.max(e.lower);
                count += 1;
            }
        }
    }
    let target = 1.0 - 1.0 / 2f64.sqrt() - 1e-2;
    ensure(best >= target, || format!("best lower {best} below {target}"))?;
    Ok(format!("{count} forms, max lower(E) = {best:.6}"))
}

fn appendix_exactness() -> Outcome {
    let mut lines = Vec::new();
    for n in [3, 5, 7] {
        let start = Instant::now();
        let fam = build_family(n).map_err(err)?;
        let cert = extend_with_identity(&varopoulos_certificate(n).map_err(err)?).map_err(err)?;
        let check = check_certificate(&cert, &fam.r, &[]).map_err(err)?;
        ensure(check.passed(), || format!("n = {n}: {check:?}"))?;
        within(start.elapsed(), Duration::from_secs(60))?;
        lines.push(format!("n={n} in {:.1?}", start.elapsed()));
    }
    Ok(format!("4!·T_r realized exactly, weight 1 ({})", lines.join(", ")))
}

fn ratio_table() -> Outcome {
    let rows = ratio_report(&[3, 5, 7]).map_err(err)?;
    for row in &rows {
        let fam = build_family(row.n).map_err(err)?;
        let ns = Rational::from_i64((row.n * fam.squarefree) as i64);
        ensure(fam.exact && fam.q_norm2_sq == ns, || format!("n = {}: ‖q‖_2² = {}", row.n, fam.q_norm2_sq))?;
        let ratio = fam.q_norm_inf.clone() / ns;
        ensure(ratio <= Rational::one() && (ratio.to_f64() - row.ratio).abs() < 1e-15, || {
            format!("n = {}: ratio {} vs {}", row.n, ratio, row.ratio)
        })?;
    }
    let shown: Vec<String> = rows.iter().map(|r| format!("n={}: {:.4}", r.n, r.ratio)).collect();
    Ok(shown.join(", "))
}

fn density() -> Outcome {
    let d = squarefree_density(10_000).map_err(err)?;
    let target = 6.0 / std::f64::consts::PI.powi(2);
    ensure((d - target).abs() < 0.05, || format!("S(N)/N = {d}"))?;
    Ok(format!("S(10⁴)/10⁴ = {d}"))
}

fn integer_poly(n: usize, seed: u64) -> Polynomial<f64> {
    let profile = DegreeProfile::new(vec![(1, 3), (2, 5), (3, 6), (4, 4), (5, 2)]);
    let p = random_polynomial(n, &profile, seed);
    // Integer coefficients keep every hypercube sum exact in f64.
    Polynomial::from_terms(n, p.terms().iter().map(|(a, c)| (a.clone(), (c * 8.0).round()))).expect("same n")
}

fn random_family(n: usize, seed: u64) -> Partition {
    let mut rng = derived_rng(seed, 1);
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); rng.gen_range(1..=3)];
    for v in 0..n {
        let slot = rng.gen_range(0..=parts.len());
        if slot < parts.len() {
            parts[slot].push(v);
        }
    }
    parts.retain(|p| !p.is_empty());
    Partition::new(n, parts).expect("disjoint parts")
}

fn projector_suite() -> Outcome {
    for i in 0..200u64 {
        let n = 4 + (i as usize % 9);
        let p = integer_poly(n, i);
        let q = random_family(n, i);
        let proj = p.project_wq(&q).map_err(err)?;
        let table = proj.sign_table().map_err(err)?;
        for point in 0u64..1 << n {
            let x: Vec<f64> = (0..n).map(|v| if (point >> v) & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let avg = p.project_wq_by_averaging(&q, &x).map_err(err)?;
            let filt = Polynomial::eval_point_mask(&table, point);
            ensure(avg == filt, || format!("pair {i}, point {point}: {avg} vs {filt}"))?;
        }
        let (pi, pp) = (proj.norm_inf_exact().map_err(err)?, p.norm_inf_exact().map_err(err)?);
        let (oi, op) = (proj.norm_one_exact().map_err(err)?, p.norm_one_exact().map_err(err)?);
        ensure(pi <= pp && oi <= op, || format!("pair {i}: ∞ {pi} vs {pp}, 1 {oi} vs {op}"))?;
    }
    Ok("200 pairs: averaging = filter at every point; both norms contract".into())
}

fn random_contraction(d: usize, rng: &mut impl Rng) -> SparseMatrix<f64> {
    let m = Matrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..=1.0));
    SparseMatrix::from_dense(&clip_operator_norm(&m).expect("small matrix"))
}

fn block_multilinear(sizes: [usize; 2], rng: &mut impl Rng) -> Polynomial<f64> {
    let n = sizes[0] + sizes[1];
    let mut terms = Vec::new();
    for i in 0..sizes[0] {
        for j in 0..sizes[1] {
            if rng.gen_bool(0.6) {
                terms.push((vec![i, sizes[0] + j], rng.gen_range(-1.0..=1.0)));
            }
        }
    }
    if terms.is_empty() {
        terms.push((vec![0, sizes[0]], 1.0));
    }
    let refs: Vec<(&[usize], f64)> = terms.iter().map(|(v, c)| (&v[..], *c)).collect();
    Polynomial::from_monomials(n, &refs).expect("valid monomials")
}

fn lift_round_trips() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let mut rng = derived_rng(777, i);
        // Two families combined into one map.
        let (n, d) = (3, 2);
        let fams: Vec<Vec<SparseMatrix<f64>>> =
            (0..2).map(|_| (0..n).map(|_| random_contraction(d, &mut rng)).collect()).collect();
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let combined = combine_maps(&fams, &u, &v).map_err(err)?.realize().map_err(err)?;
        for a in 0..n {
            for b in 0..n {
                let direct = fams[1][b].vec_mul(&fams[0][a].vec_mul(&u).unwrap()).unwrap();
                let want: f64 = direct.iter().zip(&v).map(|(x, y)| x * y).sum();
                worst = worst.max((combined.get(&[a, b]) - want).abs());
            }
        }

        // Parity lift of an order-2 certificate for a block-multilinear r.
        let sizes = [2, 1 + (i as usize % 3)];
        let r = block_multilinear(sizes, &mut rng);
        let part = Partition::blocks(&sizes).map_err(err)?;
        let t2 = symmetric_tensor_of(&r, 2).map_err(err)?.scale(&2.0);
        let base = from_ell1(&t2).map_err(err)?;
        let maps = vec![base.ops().to_vec(), base.ops().to_vec()];
        let lifted = parity_lift(&maps, base.u(), base.v(), &part).map_err(err)?;
        let diff: Tensor<f64> = lifted.realize().map_err(err)?.sub(&t2.project(&part).map_err(err)?).map_err(err)?;
        worst = diff.entries().values().fold(worst, |m, x| m.max(x.abs()));

        let inst = Sdp2Instance::from_certificate(&lifted, r.project_wq(&part).map_err(err)?);
        verify_sdp2_instance(&inst, &part, &r).map_err(|e| format!("instance {i} rejected: {e}"))?;
        let mut bad = inst.clone();
        let entries: Vec<(usize, usize, usize, f64)> = (0..r.n())
            .flat_map(|op| {
                let a = &bad.ops[op];
                (0..a.rows())
                    .flat_map(move |row| a.row(row).iter().map(move |&(c, x)| (op, row, c, x)))
                    .collect::<Vec<_>>()
            })
            .collect();
        let (op, row, col, x) = entries[rng.gen_range(0..entries.len())];
        bad.ops[op].add_to(row, col, 0.1 * x.signum());
        ensure(verify_sdp2_instance(&bad, &part, &r).is_err(), || format!("perturbation {i} accepted"))?;
    }
    ensure(worst <= 1e-12, || format!("realization error {worst:e}"))?;
    Ok(format!("50 instances, max realization error {worst:.1e}, 50/50 perturbations rejected"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("example fixture: dual norm 1/3, ‖p‖_1 = 1/2", example_fixture),
        ("Grothendieck sandwich on 100 random matrices", grothendieck_sandwich),
        ("CHSH fixtures", chsh_fixtures),
        ("minimax gap on 25 bounded bilinear forms", minimax_gap),
        ("order-2 supremum sweep", order_two_supremum),
        ("witness certificate exactness, n = 3, 5, 7", appendix_exactness),
        ("witness ratio table", ratio_table),
        ("square-free density", density),
        ("projector suite", projector_suite),
        ("polarization and parity-lift round trips", lift_round_trips),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} ({secs:.2}s) {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name} ({secs:.2}s) {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
