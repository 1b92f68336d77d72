//! Parameter sweeps over `K0/τ1` for a family of `τ2` values.

use std::io;

use pll_lockin::numeric::{default_options, lock_in_numeric};
use pll_lockin::{classify_stable, lock_in_analytic, Error, LoopParameters, Method, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::{num, opt_num};

pub const CSV_HEADER: [&str; 9] = [
    "k0_over_tau1",
    "tau2",
    "k",
    "method",
    "omega_l",
    "omega_l_tau1_over_k0",
    "case",
    "err_estimate",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// `K0/τ1` values, shared by every `τ2`.
    pub x_values: Vec<f64>,
    pub tau2_set: Vec<f64>,
    pub slope_k: f64,
    pub tau1: f64,
    pub methods: Vec<Method>,
    /// Also evaluate the degenerate-node gain of each `τ2`.
    pub degenerate_points: bool,
}

impl SweepSpec {
    /// `count` values log-spaced on `[min, max]`.
    pub fn log_axis(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
        if count < 2 {
            return Err(Error::InvalidSweep(format!("x count must be at least 2, got {count}")));
        }
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(Error::InvalidSweep(format!("x range must satisfy 0 < min < max, got {min}:{max}")));
        }
        let (lo, hi) = (min.ln(), max.ln());
        Ok((0..count)
            .map(|i| match i {
                0 => min,
                i if i == count - 1 => max,
                i => (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp(),
            })
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_values.len() < 2 {
            return Err(Error::InvalidSweep("at least two x values are required".into()));
        }
        if self.tau2_set.is_empty() {
            return Err(Error::InvalidSweep("the tau2 list is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidSweep("no method selected".into()));
        }
        for &v in self.x_values.iter().chain(&self.tau2_set) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSweep(format!("sweep values must be positive, got {v}")));
            }
        }
        LoopParameters::new(self.tau1, 1.0, 1.0, self.slope_k, 0.0)?;
        Ok(())
    }

    /// `K0/τ1` of the degenerate node for this `τ2`.
    pub fn degenerate_x(&self, tau2: f64) -> f64 {
        // (τ2K0/τ1)² = 4K0/(kτ1)
        4.0 * self.tau1 / (self.slope_k * tau2 * tau2)
    }

    /// Grid points in output order: τ2-major, then x ascending.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &tau2 in &self.tau2_set {
            let mut xs = self.x_values.clone();
            if self.degenerate_points {
                xs.push(self.degenerate_x(tau2));
            }
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            out.extend(xs.into_iter().map(|x| (tau2, x)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k0_over_tau1: f64,
    pub tau2: f64,
    pub k: f64,
    pub method: Method,
    pub omega_l: Option<f64>,
    pub omega_l_tau1_over_k0: Option<f64>,
    pub case: String,
    pub err_estimate: Option<f64>,
    pub error: Option<String>,
}

fn evaluate(spec: &SweepSpec, tau2: f64, x: f64, method: Method) -> SweepRow {
    let mut row = SweepRow {
        k0_over_tau1: x,
        tau2,
        k: spec.slope_k,
        method,
        omega_l: None,
        omega_l_tau1_over_k0: None,
        case: String::new(),
        err_estimate: None,
        error: None,
    };
    let params = match LoopParameters::new(spec.tau1, tau2, x * spec.tau1, spec.slope_k, 0.0) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.case = classify_stable(&params).name().to_string();
    let result = match method {
        Method::Analytic => lock_in_analytic(&params),
        Method::Numeric => lock_in_numeric(&params, &default_options(&params)),
    };
    match result {
        Ok(r) => {
            row.omega_l = Some(r.omega_l);
            row.omega_l_tau1_over_k0 = Some(r.omega_l / x);
            row.err_estimate = r.diagnostics.get("error_estimate").map(|e| e / 2.0);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Evaluates every grid point on up to `jobs` threads; rows come back in the
/// deterministic order of [`SweepSpec::points`], methods in spec order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let tasks: Vec<(f64, f64, Method)> = spec
        .points()
        .into_iter()
        .flat_map(|(tau2, x)| spec.methods.iter().map(move |&m| (tau2, x, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidSweep(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(tau2, x, m)| evaluate(spec, tau2, x, m))
            .collect()
    }))
}

pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            num(r.k0_over_tau1),
            num(r.tau2),
            num(r.k),
            r.method.name().to_string(),
            opt_num(r.omega_l),
            opt_num(r.omega_l_tau1_over_k0),
            r.case.clone(),
            opt_num(r.err_estimate),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()
}

fn parse_method(s: &str) -> Option<Method> {
    match s {
        "analytic" => Some(Method::Analytic),
        "numeric" => Some(Method::Numeric),
        _ => None,
    }
}

fn bad_data(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Parses a file written by [`write_csv`].
pub fn read_csv<R: io::Read>(input: R) -> io::Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(bad_data("unexpected sweep header"));
    }
    let float = |s: &str| s.parse::<f64>().map_err(|e| bad_data(format!("{s:?}: {e}")));
    let opt_float = |s: &str| if s.is_empty() { Ok(None) } else { float(s).map(Some) };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(SweepRow {
            k0_over_tau1: float(&rec[0])?,
            tau2: float(&rec[1])?,
            k: float(&rec[2])?,
            method: parse_method(&rec[3]).ok_or_else(|| bad_data(format!("unknown method {:?}", &rec[3])))?,
            omega_l: opt_float(&rec[4])?,
            omega_l_tau1_over_k0: opt_float(&rec[5])?,
            case: rec[6].to_string(),
            err_estimate: opt_float(&rec[7])?,
            error: Some(rec[8].to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pll_lockin::TRIANGULAR_SLOPE;

    fn spec(methods: Vec<Method>) -> SweepSpec {
        SweepSpec {
            x_values: SweepSpec::log_axis(0.5, 50.0, 3).unwrap(),
            tau2_set: vec![1.0, 0.5],
            slope_k: TRIANGULAR_SLOPE,
            tau1: 1.0,
            methods,
            degenerate_points: false,
        }
    }

    #[test]
    fn cardinality_and_order() {
        let rows = run_sweep(&spec(vec![Method::Analytic, Method::Numeric]), 3).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0].tau2, 1.0);
        assert_eq!(rows[6].tau2, 0.5);
        assert_eq!(rows[0].method, Method::Analytic);
        assert_eq!(rows[1].method, Method::Numeric);
        assert!(rows[0].k0_over_tau1 < rows[2].k0_over_tau1);
        assert!(rows.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn analytic_rows_match_library() {
        for row in run_sweep(&spec(vec![Method::Analytic]), 1).unwrap() {
            let p = LoopParameters::triangular(1.0, row.tau2, row.k0_over_tau1).unwrap();
            assert_eq!(row.omega_l, Some(lock_in_analytic(&p).unwrap().omega_l));
            assert!(row.err_estimate.is_none());
        }
    }

    #[test]
    fn thread_count_does_not_change_rows() {
        let s = spec(vec![Method::Numeric]);
        assert_eq!(run_sweep(&s, 1).unwrap(), run_sweep(&s, 4).unwrap());
    }

    #[test]
    fn degenerate_points_are_inserted() {
        let mut s = spec(vec![Method::Analytic]);
        s.degenerate_points = true;
        let rows = run_sweep(&s, 2).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows.iter().filter(|r| r.case == "DegenerateNode").count(), 2);
        assert!(rows[..4].windows(2).all(|w| w[0].k0_over_tau1 < w[1].k0_over_tau1));
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = run_sweep(&spec(vec![Method::Analytic, Method::Numeric]), 2).unwrap();
        rows[3].error = Some("bad, \"quoted\" point".into());
        rows[3].omega_l = None;
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert!(!buf.contains(&b'\r'));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SweepSpec::log_axis(1.0, 10.0, 1).is_err());
        assert!(SweepSpec::log_axis(0.0, 10.0, 3).is_err());
        let mut s = spec(vec![Method::Analytic]);
        s.tau2_set.clear();
        assert!(matches!(run_sweep(&s, 1), Err(Error::InvalidSweep(_))));
    }
}
