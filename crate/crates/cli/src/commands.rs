use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use wmalg_core::io::{parse_family, parse_matrix, EntryCodec};
use wmalg_core::{
    contraction_factor, product_bound, quasi_inverse_exact, quasi_inverse_neumann, AnyMatrix,
    WeightFamily, WeightedMatrix,
};

use crate::cli::GlobalOpts;
use crate::error::{code, CliError};
use crate::report::{InputDigest, RunReport};

/// Result of a command: the report, the exit code and a human summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub exit: u8,
    pub summary: String,
}

impl Outcome {
    pub fn ok(report: RunReport, summary: String) -> Self {
        Self {
            report,
            exit: code::OK,
            summary,
        }
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

pub fn read_input(path: &Path) -> Result<(String, InputDigest), CliError> {
    let name = display(path);
    let bytes = fs::read(path).map_err(|e| CliError::io(&name, e))?;
    let digest = InputDigest::of(&name, &bytes);
    let text = String::from_utf8(bytes)
        .map_err(|e| CliError::new(code::PARSE, format!("{name}: {e}")))?;
    Ok((text, digest))
}

pub fn load_family(opts: &GlobalOpts) -> Result<(WeightFamily, Option<InputDigest>), CliError> {
    match &opts.weights {
        None => Ok((WeightFamily::default_family(), None)),
        Some(path) => {
            let (text, digest) = read_input(path)?;
            let family = parse_family(&text).map_err(|e| CliError::load(&display(path), e))?;
            Ok((family, Some(digest)))
        }
    }
}

pub fn load_matrix(path: &Path) -> Result<(AnyMatrix, InputDigest), CliError> {
    let (text, digest) = read_input(path)?;
    let m = parse_matrix(&text).map_err(|e| CliError::load(&display(path), e))?;
    Ok((m, digest))
}

/// Writes through a sibling temporary file and renames it into place, so
/// concurrent readers never observe a partial file.
pub fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    let name = display(path);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp.{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| CliError::io(&name, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(&name, e))
}

pub fn cmd_norm(opts: &GlobalOpts, matrix: &Path) -> Result<Outcome, CliError> {
    let (family, wdigest) = load_family(opts)?;
    let (m, digest) = load_matrix(matrix)?;
    let norms = match &m {
        AnyMatrix::Scalar(t) => t.norm_report(&family)?,
        AnyMatrix::Block(t) => t.norm_report(&family)?,
    };
    let mut report = RunReport::new("norm", &family);
    report.inputs.push(digest);
    report.inputs.extend(wdigest);
    report.outputs = serde_json::to_value(&norms).expect("finite norms");
    report.passed = norms.norms.len();

    let mut summary = String::new();
    for n in &norms.norms {
        match n.argmax {
            Some((i, j)) => writeln!(summary, "{:<16} {:e} at ({i},{j})", n.weight, n.value),
            None => writeln!(summary, "{:<16} 0", n.weight),
        }
        .unwrap();
    }
    Ok(Outcome::ok(report, summary))
}

fn mul_typed<A: EntryCodec>(
    r: &WeightedMatrix<A>,
    s: &WeightedMatrix<A>,
    family: &WeightFamily,
) -> Result<(String, Value, usize, usize), CliError> {
    let product = r.multiply(s)?;
    let (g, gb) = (family.summable(), family.summable_bound());
    let mut rows = Vec::new();
    let (mut passed, mut failed) = (0, 0);
    for (id, f) in family.ids().into_iter().zip(family.members()) {
        let norm = product.weighted_norm(f)?;
        let bound = product_bound(r, s, f, g, gb)?;
        let satisfied = norm <= bound * (1.0 + 1e-9);
        if satisfied {
            passed += 1;
        } else {
            failed += 1;
        }
        rows.push(json!({
            "weight": id,
            "norm": norm,
            "bound": bound,
            "bound_satisfied": satisfied,
        }));
    }
    let outputs = json!({
        "support": [product.support_rows(), product.support_cols()],
        "nnz": product.nnz(),
        "weights": rows,
    });
    Ok((
        wmalg_core::io::matrix_to_json(&product),
        outputs,
        passed,
        failed,
    ))
}

pub fn cmd_mul(opts: &GlobalOpts, a: &Path, b: &Path) -> Result<Outcome, CliError> {
    let (family, wdigest) = load_family(opts)?;
    let (ma, da) = load_matrix(a)?;
    let (mb, db) = load_matrix(b)?;
    let (text, mut outputs, passed, failed) = match (&ma, &mb) {
        (AnyMatrix::Scalar(r), AnyMatrix::Scalar(s)) => mul_typed(r, s, &family)?,
        (AnyMatrix::Block(r), AnyMatrix::Block(s)) => mul_typed(r, s, &family)?,
        _ => {
            return Err(CliError::new(
                code::MISMATCH,
                format!(
                    "algebra mismatch: {:?} vs {:?}",
                    ma.algebra_spec(),
                    mb.algebra_spec()
                ),
            ))
        }
    };
    attach_matrix(opts, &mut outputs, &text)?;

    let mut report = RunReport::new("mul", &family);
    report.inputs = vec![da, db];
    report.inputs.extend(wdigest);
    report.passed = passed;
    report.failed = failed;
    let summary = summarize_rows(&outputs["weights"], "norm", "bound");
    report.outputs = outputs;
    let exit = if failed > 0 { code::VERIFY_FAILED } else { code::OK };
    Ok(Outcome {
        report,
        exit,
        summary,
    })
}

/// Writes the matrix to `--out`, or embeds it in the report when no output
/// file was requested.
fn attach_matrix(opts: &GlobalOpts, outputs: &mut Value, text: &str) -> Result<(), CliError> {
    match &opts.out {
        Some(path) => {
            write_output(path, text)?;
            outputs["matrix_file"] = json!(display(path));
        }
        None => {
            outputs["matrix"] = serde_json::from_str(text).expect("matrix JSON");
        }
    }
    Ok(())
}

fn summarize_rows(rows: &Value, lhs: &str, rhs: &str) -> String {
    let mut s = String::new();
    for row in rows.as_array().into_iter().flatten() {
        writeln!(
            s,
            "{:<16} {lhs} {:e}  {rhs} {:e}",
            row["weight"].as_str().unwrap_or("?"),
            row[lhs].as_f64().unwrap_or(f64::NAN),
            row[rhs].as_f64().unwrap_or(f64::NAN),
        )
        .unwrap();
    }
    s
}

struct QinvResult {
    text: String,
    outputs: Value,
    certificate: Option<String>,
    failed: usize,
}

fn qinv_typed<A: EntryCodec>(
    t: &WeightedMatrix<A>,
    family: &WeightFamily,
    opts: &GlobalOpts,
) -> Result<QinvResult, CliError> {
    let rho = contraction_factor(t, family.summable(), family.summable_bound())?;
    if !(rho < 1.0) {
        if !opts.oracle {
            return Err(CliError::new(
                code::NOT_CERTIFIED,
                format!("not certified; rho = {rho}"),
            ));
        }
        let exact = quasi_inverse_exact(t)?;
        return Ok(QinvResult {
            text: wmalg_core::io::matrix_to_json(&exact),
            outputs: json!({ "method": "oracle", "rho": rho, "certificate": null }),
            certificate: None,
            failed: 0,
        });
    }

    let (q, cert) = quasi_inverse_neumann(t, family, opts.tol, opts.max_terms)?;
    let mut outputs = json!({
        "method": "neumann",
        "rho": rho,
        "certificate": &cert,
    });
    let mut failed = 0;
    if opts.oracle {
        let exact = quasi_inverse_exact(t)?;
        let diff = q.sub(&exact)?;
        let mut rows = serde_json::Map::new();
        for (id, f) in family.ids().into_iter().zip(family.members()) {
            let deviation = diff.weighted_norm(f)?;
            let tail = cert.tail(&id).expect("tail for every family weight");
            let within = deviation <= tail * (1.0 + 1e-6);
            if !within {
                failed += 1;
            }
            rows.insert(
                id,
                json!({ "deviation": deviation, "tail": tail, "within_tail": within }),
            );
        }
        outputs["oracle"] = Value::Object(rows);
    }
    Ok(QinvResult {
        text: wmalg_core::io::matrix_to_json(&q),
        certificate: Some(serde_json::to_string_pretty(&cert).expect("finite certificate")),
        outputs,
        failed,
    })
}

pub fn cmd_qinv(opts: &GlobalOpts, matrix: &Path) -> Result<Outcome, CliError> {
    let (family, wdigest) = load_family(opts)?;
    let (m, digest) = load_matrix(matrix)?;
    let mut res = match &m {
        AnyMatrix::Scalar(t) => qinv_typed(t, &family, opts)?,
        AnyMatrix::Block(t) => qinv_typed(t, &family, opts)?,
    };
    attach_matrix(opts, &mut res.outputs, &res.text)?;
    if let (Some(path), Some(cert)) = (&opts.out, &res.certificate) {
        let mut cert_path = path.as_os_str().to_owned();
        cert_path.push(".cert.json");
        let cert_path = PathBuf::from(cert_path);
        write_output(&cert_path, cert)?;
        res.outputs["certificate_file"] = json!(display(&cert_path));
    }

    let mut report = RunReport::new("qinv", &family);
    report.inputs.push(digest);
    report.inputs.extend(wdigest);
    report.failed = res.failed;
    report.passed = usize::from(res.failed == 0);
    let summary = format!(
        "method {}  rho {}  iterations {}\n",
        res.outputs["method"].as_str().unwrap_or("?"),
        res.outputs["rho"],
        res.outputs["certificate"]["iterations"],
    );
    report.outputs = res.outputs;
    let exit = if res.failed > 0 { code::VERIFY_FAILED } else { code::OK };
    Ok(Outcome {
        report,
        exit,
        summary,
    })
}
