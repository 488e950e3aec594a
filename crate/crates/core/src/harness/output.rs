//! CSV rows emitted by the harness. Reals are written with 17 significant
//! digits so they parse back to the same doubles.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::IterationRecord;

pub const RESULTS_HEADER: [&str; 11] = [
    "experiment_id",
    "variant",
    "problem",
    "macro_rep",
    "iteration",
    "cumulative_budget",
    "delta_k",
    "outcome",
    "incumbent_coords",
    "post_mean",
    "post_stderr",
];

pub const ITERATIONS_HEADER: [&str; 16] = [
    "experiment_id",
    "variant",
    "problem",
    "macro_rep",
    "k",
    "delta_k",
    "outcome",
    "r_hat",
    "r_tilde",
    "r_model",
    "grad_norm",
    "samples",
    "cumulative_budget",
    "incumbent_estimate",
    "next_delta",
    "incumbent_coords",
];

pub const PROFILE_HEADER: [&str; 10] = [
    "experiment_id",
    "variant",
    "problem",
    "fraction",
    "budget",
    "solved",
    "runs",
    "solved_fraction",
    "ci_lower",
    "ci_upper",
];

pub const TRAJECTORY_HEADER: [&str; 9] = [
    "experiment_id",
    "variant",
    "problem",
    "fraction",
    "budget",
    "runs",
    "mean",
    "ci_lower",
    "ci_upper",
];

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(field: &str, column: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::invalid("csv", format!("column {column}: cannot parse {field:?} as a real")))
}

fn parse_int(field: &str, column: &str) -> Result<u64> {
    field
        .parse()
        .map_err(|_| Error::invalid("csv", format!("column {column}: cannot parse {field:?} as an integer")))
}

pub fn fmt_coords(x: &[f64]) -> String {
    x.iter().map(|v| fmt_real(*v)).collect::<Vec<_>>().join(";")
}

fn parse_coords(field: &str) -> Result<Vec<f64>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(';').map(|s| parse_real(s, "incumbent_coords")).collect()
}

/// One post-replicated recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub variant: String,
    pub problem: String,
    pub macro_rep: u64,
    /// Iterations completed when the recommendation was made; 0 is the start.
    pub iteration: u64,
    pub cumulative_budget: u64,
    pub delta_k: f64,
    pub outcome: String,
    pub incumbent: Vec<f64>,
    pub post_mean: f64,
    pub post_stderr: f64,
}

impl ResultRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.experiment_id.clone(),
            self.variant.clone(),
            self.problem.clone(),
            self.macro_rep.to_string(),
            self.iteration.to_string(),
            self.cumulative_budget.to_string(),
            fmt_real(self.delta_k),
            self.outcome.clone(),
            fmt_coords(&self.incumbent),
            fmt_real(self.post_mean),
            fmt_real(self.post_stderr),
        ]
    }

    pub fn from_record(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != RESULTS_HEADER.len() {
            return Err(Error::invalid(
                "csv",
                format!("expected {} columns, found {}", RESULTS_HEADER.len(), r.len()),
            ));
        }
        Ok(Self {
            experiment_id: r[0].to_string(),
            variant: r[1].to_string(),
            problem: r[2].to_string(),
            macro_rep: parse_int(&r[3], "macro_rep")?,
            iteration: parse_int(&r[4], "iteration")?,
            cumulative_budget: parse_int(&r[5], "cumulative_budget")?,
            delta_k: parse_real(&r[6], "delta_k")?,
            outcome: r[7].to_string(),
            incumbent: parse_coords(&r[8])?,
            post_mean: parse_real(&r[9], "post_mean")?,
            post_stderr: parse_real(&r[10], "post_stderr")?,
        })
    }
}

/// One solver iteration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub experiment_id: String,
    pub variant: String,
    pub problem: String,
    pub macro_rep: u64,
    pub record: IterationRecord,
}

impl IterationRow {
    pub fn to_record(&self) -> Vec<String> {
        let r = &self.record;
        vec![
            self.experiment_id.clone(),
            self.variant.clone(),
            self.problem.clone(),
            self.macro_rep.to_string(),
            r.k.to_string(),
            fmt_real(r.delta),
            r.outcome.to_string(),
            fmt_real(r.r_hat),
            fmt_real(r.r_tilde),
            fmt_real(r.r_model),
            fmt_real(r.gradient_norm),
            r.samples.to_string(),
            r.cumulative_budget.to_string(),
            fmt_real(r.incumbent_estimate),
            fmt_real(r.next_delta),
            fmt_coords(&r.incumbent),
        ]
    }
}

/// Mean post-replicated objective across macro-replications at one budget
/// fraction, with a 95% band.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub variant: String,
    pub fraction: f64,
    pub budget: f64,
    pub runs: u64,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

pub fn write_csv<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_csv(File::create(path)?, header, rows)
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::invalid("csv", format!("unexpected results header {header:?}")));
    }
    rdr.records().map(|r| ResultRow::from_record(&r?)).collect()
}

pub fn results_to_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &RESULTS_HEADER, rows.iter().map(ResultRow::to_record))?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64) -> ResultRow {
        ResultRow {
            experiment_id: "e,1".into(),
            variant: "astrodf".into(),
            problem: "sphere".into(),
            macro_rep: 3,
            iteration: 7,
            cumulative_budget: 1234,
            delta_k: 0.1,
            outcome: "success_subproblem".into(),
            incumbent: vec![v, -1.0 / 3.0, 1e-300],
            post_mean: f64::NAN,
            post_stderr: f64::INFINITY,
        }
    }

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-310, 1e308, f64::MIN_POSITIVE, 123456789.123456789] {
            let s = fmt_real(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![row(0.1), row(std::f64::consts::PI)];
        let text = results_to_string(&rows).unwrap();
        let parsed = read_results(text.as_bytes()).unwrap();
        assert_eq!(results_to_string(&parsed).unwrap(), text);
        assert_eq!(parsed[1].incumbent, rows[1].incumbent);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_results("a,b\n1,2\n".as_bytes()).is_err());
    }
}
