use std::path::Path;

use cbnorm::cert::{cb_dualnorm_upper, cb_norm_lower, CbLowerOptions, CertificateJson};
use cbnorm::matnorms::{
    cb_dualnorm_matrix, cb_norm_matrix, grothendieck_experiment, poly_inf_dualnorm, BilinearForm, GrothendieckSample,
};
use cbnorm::poly::PolynomialJson;
use cbnorm::queryerror::{eps_bilinear, probe_open_question, verify_sdp2_instance, EpsOptions, Sdp2Instance, MAX_CUTS};
use cbnorm::tensor::symmetric_tensor_of;
use cbnorm::witness::{extend_with_identity, ratio_report, varopoulos_certificate};
use cbnorm::{CbCertificate, Error, Matrix, Partition, Polynomial};
use serde::{Deserialize, Serialize};

use crate::output::{emit, read_json, write_file, CliError, CliResult};
use crate::{PolyArgs, RunConfig};

/// Enumeration beyond this many variables is refused outright.
const CAP_ENUM_LIMIT: usize = 32;

#[derive(Serialize)]
struct Row {
    quantity: &'static str,
    lower: f64,
    upper: f64,
    lower_witness: String,
    upper_witness: String,
}

impl Row {
    fn exact(quantity: &'static str, value: f64, witness: impl Into<String>) -> Self {
        let w = witness.into();
        Row { quantity, lower: value, upper: value, lower_witness: w.clone(), upper_witness: w }
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    partition: Option<String>,
    #[serde(flatten)]
    body: &'a T,
}

fn doc<'a, T: Serialize>(command: &'static str, cfg: &RunConfig, partition: Option<&Partition>, body: &'a T) -> Document<'a, T> {
    Document { command, seed: cfg.seed, partition: partition.map(|p| p.to_string()), body }
}

fn load_poly(cfg: &RunConfig, args: &PolyArgs) -> CliResult<(Polynomial<f64>, Partition)> {
    if cfg.cap_enum > CAP_ENUM_LIMIT {
        return Err(CliError::Usage(format!("--cap-enum {} exceeds {CAP_ENUM_LIMIT}", cfg.cap_enum)));
    }
    let json: PolynomialJson = read_json(&args.poly)?;
    let p = Polynomial::from_json(&json)?;
    let n = p.n();
    let part = match &args.partition {
        Some(s) => Partition::parse(n, s)?,
        None => Partition::new(n, vec![(0..n).collect()])?,
    };
    Ok((p, part))
}

fn factorial(t: usize) -> f64 {
    (1..=t).map(|k| k as f64).product()
}

pub fn norms(cfg: &RunConfig, args: &PolyArgs) -> CliResult<()> {
    let (p, part) = load_poly(cfg, args)?;
    let inf = p.norm_inf_exact_capped(cfg.cap_enum)?;
    let one = p.norm_one_exact_capped(cfg.cap_enum)?;
    let mut rows = vec![
        Row::exact("norm_inf", inf, "hypercube enumeration"),
        Row::exact("norm_1", one, "hypercube enumeration"),
    ];
    let ell1: f64 = p.terms().values().map(|c| c.abs()).sum();
    if p.is_zero() {
        rows.push(Row::exact("norm_cb", 0.0, "zero polynomial"));
    } else if part.len() == 2 && p.is_block_multilinear(&part) {
        let a = BilinearForm::from_polynomial(&p, &part)?.a;
        let cb = cb_norm_matrix(&a)?;
        rows.push(Row { quantity: "norm_cb", lower: cb.lower, upper: cb.upper, lower_witness: cb.lower_witness, upper_witness: cb.upper_witness });
    } else if p.is_homogeneous(1) {
        rows.push(Row::exact("norm_cb", ell1, "A(i) = sign(c_i)·I attains Σ|c_i|"));
    } else if p.is_homogeneous(p.degree()) && p.degree() > 0 {
        let t = symmetric_tensor_of(&p, p.degree())?;
        let opts = CbLowerOptions { seed: cfg.seed, ..CbLowerOptions::default() };
        let lower = cb_norm_lower(&t, &opts)?;
        rows.push(Row {
            quantity: "norm_cb",
            lower: lower.value.min(ell1),
            upper: ell1,
            lower_witness: format!("contraction family of dimension {}", opts.dim),
            upper_witness: "coefficient ℓ1 sum".into(),
        });
    }
    emit(cfg, &doc("norms", cfg, Some(&part), &serde_json::json!({ "n": p.n(), "rows": rows })), &rows)
}

#[derive(Serialize)]
struct DualNormsBody {
    n: usize,
    rows: Vec<Row>,
    inf_dual_q: PolynomialJson,
    inf_dual_extension: PolynomialJson,
    cb_dual_strategy: String,
    cb_dual_certificate: CertificateJson,
}

pub fn dual_norms(cfg: &RunConfig, args: &PolyArgs, cert: Option<&Path>) -> CliResult<()> {
    let (p, part) = load_poly(cfg, args)?;
    let inf = poly_inf_dualnorm(&p, &part)?;
    let t = part.len();
    let tensor = symmetric_tensor_of(&p, t)?.scale(&factorial(t));
    let supplied = match cert {
        Some(path) => Some(CbCertificate::from_json(&read_json::<CertificateJson>(path)?)?),
        None => None,
    };
    let dual = cb_dualnorm_upper(&tensor, supplied.as_ref())?;
    let (mut lower, mut upper) = (0.0, dual.weight);
    let mut lower_witness = "zero polynomial".to_string();
    if !p.is_zero() {
        // ⟨p,p⟩/‖p‖_cb with the ℓ1 bound on ‖p‖_cb.
        let ell1: f64 = p.terms().values().map(|c| c.abs()).sum();
        lower = p.inner(&p)? / ell1;
        lower_witness = "p paired with itself over its ℓ1 cb bound".into();
        if t == 2 {
            let g = cb_dualnorm_matrix(&BilinearForm::from_polynomial(&p, &part)?.a)?;
            if g.interval.lower > lower {
                lower = g.interval.lower;
                lower_witness = g.interval.lower_witness.clone();
            }
            upper = upper.min(g.interval.upper);
        }
    }
    let rows = vec![
        Row {
            quantity: "inf_dual",
            lower: inf.lower,
            upper: inf.upper,
            lower_witness: "q with |q| ≤ 1 on the hypercube".into(),
            upper_witness: "extension r̃ ∈ W_P with r̃ restricting to p".into(),
        },
        Row {
            quantity: "cb_dual",
            lower: lower.min(upper),
            upper,
            lower_witness,
            upper_witness: format!("certificate ({:?}) of weight {}", dual.strategy, dual.weight),
        },
    ];
    let body = DualNormsBody {
        n: p.n(),
        inf_dual_q: inf.q.to_json(),
        inf_dual_extension: inf.r_polynomial()?.to_json(),
        cb_dual_strategy: format!("{:?}", dual.strategy),
        cb_dual_certificate: dual.certificate.to_json(),
        rows,
    };
    emit(cfg, &doc("dual-norms", cfg, Some(&part), &body), &body.rows)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixFile {
    Bare(Vec<Vec<f64>>),
    Wrapped { matrix: Vec<Vec<f64>> },
}

fn load_matrix(path: &Path) -> CliResult<Matrix<f64>> {
    let rows = match read_json::<MatrixFile>(path)? {
        MatrixFile::Bare(r) | MatrixFile::Wrapped { matrix: r } => r,
    };
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()).into());
    }
    Ok(Matrix::from_rows(rows)?)
}

#[derive(Serialize)]
struct QueryErrorRow {
    lower: f64,
    upper: f64,
    gap: f64,
    cuts: usize,
    flagged: bool,
    lower_witness: &'static str,
    upper_witness: &'static str,
}

pub fn query_error(cfg: &RunConfig, matrix: &Path) -> CliResult<()> {
    let a = load_matrix(matrix)?;
    let opts = EpsOptions { tol: cfg.tol, max_cuts: MAX_CUTS, seed: cfg.seed };
    let res = eps_bilinear(&a, &opts)?;
    let row = QueryErrorRow {
        lower: res.lower,
        upper: res.upper,
        gap: res.gap(),
        cuts: res.cuts,
        flagged: res.flagged,
        lower_witness: "lower_witness.b (JSON output)",
        upper_witness: "upper_witness.q (JSON output)",
    };
    emit(cfg, &doc("query-error", cfg, None, &res), &[row])
}

#[derive(Serialize)]
struct KgRow {
    index: usize,
    matrix_hash: String,
    inf_to_one: f64,
    cb_lower: f64,
    cb_upper: f64,
    ratio_lower: f64,
    ratio_upper: f64,
    lower_witness: &'static str,
    upper_witness: &'static str,
}

impl From<&GrothendieckSample> for KgRow {
    fn from(s: &GrothendieckSample) -> Self {
        KgRow {
            index: s.index,
            matrix_hash: s.matrix_hash.clone(),
            inf_to_one: s.inf_to_one,
            cb_lower: s.cb_lower,
            cb_upper: s.cb_upper,
            ratio_lower: s.ratio_lower,
            ratio_upper: s.ratio_upper,
            lower_witness: "SDP primal vectors or sign vectors",
            upper_witness: "diagonal SDP dual",
        }
    }
}

pub fn kg_bounds(cfg: &RunConfig, k: usize, samples: usize) -> CliResult<()> {
    let report = grothendieck_experiment(k, samples, cfg.seed)?;
    let rows: Vec<KgRow> = report.samples.iter().map(KgRow::from).collect();
    let body = serde_json::json!({
        "k": report.k,
        "kg_bracket": report.kg_bracket,
        "max_ratio_upper": report.max_ratio_upper(),
        "samples": rows,
    });
    emit(cfg, &doc("kg-bounds", cfg, None, &body), &rows)
}

pub fn witness(cfg: &RunConfig, ns: &[usize], dump_cert: Option<&Path>) -> CliResult<()> {
    if let Some(path) = dump_cert {
        let [n] = ns else {
            return Err(CliError::Usage("--dump-cert needs exactly one value of --n".into()));
        };
        let cert = extend_with_identity(&varopoulos_certificate(*n)?)?;
        let mut text = cert.to_f64().to_json_string();
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    let rows = ratio_report(ns)?;
    emit(cfg, &doc("witness", cfg, None, &serde_json::json!({ "rows": rows })), &rows)
}

pub fn probe(cfg: &RunConfig, k: usize, samples: usize) -> CliResult<()> {
    let rows = probe_open_question(samples, k, cfg.seed)?;
    let body = serde_json::json!({
        "k": k,
        "asserted": "E upper ≤ ‖p‖_∞(1 - 1/‖p‖_cb) upper + 1e-4",
        "witnesses": "E from query-error witnesses; ‖p‖_cb from the diagonal SDP",
        "rows": rows,
    });
    emit(cfg, &doc("probe-open-question", cfg, None, &body), &rows)
}

#[derive(Deserialize)]
struct InstanceFile {
    certificate: CertificateJson,
    r: PolynomialJson,
    p: PolynomialJson,
    partition: String,
}

pub fn verify_sdp2(cfg: &RunConfig, path: &Path) -> CliResult<()> {
    let file: InstanceFile = read_json(path)?;
    let cert = CbCertificate::from_json(&file.certificate)?;
    let p = Polynomial::from_json(&file.p)?;
    let part = Partition::parse(p.n(), &file.partition)?;
    let inst = Sdp2Instance {
        u: cert.u().to_vec(),
        v: cert.v().to_vec(),
        w: *cert.weight(),
        ops: cert.ops().to_vec(),
        r: Polynomial::from_json(&file.r)?,
    };
    let verified = verify_sdp2_instance(&inst, &part, &p)?;
    emit(cfg, &doc("verify-sdp2", cfg, Some(&part), &verified), &[&verified])
}
