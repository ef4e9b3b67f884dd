//! Trace CSV: one row per outer iteration, vectors joined with `;`, floats
//! at 17 significant digits.

use std::io::{Read, Write};

use ralm_core::alm::{AlmRecord, AlmTrace};
use ralm_core::problem::CroProblem;

use crate::CliError;

pub const COLUMNS: [&str; 13] = [
    "k",
    "point",
    "lambda",
    "mu",
    "lambda_bar",
    "mu_bar",
    "rho",
    "eps",
    "v",
    "h_norm",
    "inner_status",
    "inner_iterations",
    "al_grad_norm",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn vector(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

pub fn write_trace<W: Write>(trace: &AlmTrace, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in &trace.records {
        w.write_record([
            r.k.to_string(),
            vector(&r.point),
            vector(&r.lambda),
            vector(&r.mu),
            vector(&r.lambda_bar),
            vector(&r.mu_bar),
            num(r.rho),
            num(r.eps),
            vector(&r.v),
            num(r.h_norm),
            r.inner_status.as_str().to_string(),
            r.inner_iterations.to_string(),
            num(r.al_grad_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn bad(row: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Trace(format!("row {row}: {msg}"))
}

fn parse_num(s: &str, row: usize, col: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| bad(row, format!("column `{col}`: `{s}` is not a number")))
}

fn parse_vec(s: &str, len: usize, row: usize, col: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = if s.trim().is_empty() {
        Vec::new()
    } else {
        s.split(';')
            .map(|x| parse_num(x, row, col))
            .collect::<Result<_, _>>()?
    };
    if v.len() != len {
        return Err(bad(row, format!("column `{col}` has {} entries, expected {len}", v.len())));
    }
    Ok(v)
}

/// Reads a trace and checks every vector length against `prob`.
pub fn read_trace<R: Read>(input: R, prob: &CroProblem) -> Result<AlmTrace, CliError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(CliError::Trace(format!(
            "header has {} columns, expected {}: {}",
            header.len(),
            COLUMNS.len(),
            COLUMNS.join(",")
        )));
    }
    let n = prob.manifold.ambient_dim();
    let (s, m) = (prob.n_eq(), prob.n_ineq());
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let row = row?;
        let f = |c: usize| &row[c];
        records.push(AlmRecord {
            k: f(0).trim().parse().map_err(|_| bad(row_no, "column `k` is not an integer"))?,
            point: parse_vec(f(1), n, row_no, "point")?,
            lambda: parse_vec(f(2), s, row_no, "lambda")?,
            mu: parse_vec(f(3), m, row_no, "mu")?,
            lambda_bar: parse_vec(f(4), s, row_no, "lambda_bar")?,
            mu_bar: parse_vec(f(5), m, row_no, "mu_bar")?,
            rho: parse_num(f(6), row_no, "rho")?,
            eps: parse_num(f(7), row_no, "eps")?,
            v: parse_vec(f(8), m, row_no, "v")?,
            h_norm: parse_num(f(9), row_no, "h_norm")?,
            inner_status: f(10).trim().parse().map_err(|e| bad(row_no, e))?,
            inner_iterations: f(11)
                .trim()
                .parse()
                .map_err(|_| bad(row_no, "column `inner_iterations` is not an integer"))?,
            al_grad_norm: parse_num(f(12), row_no, "al_grad_norm")?,
        });
    }
    Ok(AlmTrace { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ralm_core::alm::{self, AlmConfig};
    use ralm_core::fixtures;
    use ralm_core::problem::MultiplierEstimate;

    fn equator_trace() -> (CroProblem, AlmTrace) {
        let f = fixtures::get("equator-lp").unwrap();
        let prob = f.problem().unwrap();
        let start = prob.point(&f.start_point()).unwrap();
        let out = alm::run(&prob, &AlmConfig::default(), &start, &MultiplierEstimate::zeros(0, 1)).unwrap();
        (prob, out.trace)
    }

    #[test]
    fn round_trip_is_exact() {
        let (prob, trace) = equator_trace();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let back = read_trace(buf.as_slice(), &prob).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(vector(&[]), "");
    }

    #[test]
    fn truncated_row_is_rejected() {
        let (prob, trace) = equator_trace();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = &text[..text.len() - 40];
        assert!(read_trace(cut.as_bytes(), &prob).is_err());
    }

    #[test]
    fn wrong_problem_is_rejected() {
        let (_, trace) = equator_trace();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let other = fixtures::problem("paper-cpld-sphere").unwrap();
        let err = read_trace(buf.as_slice(), &other).unwrap_err().to_string();
        assert!(err.contains("column `mu`"), "{err}");
    }
}
