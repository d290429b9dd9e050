//! Trace CSV and run-summary JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BomeError, Result};
use crate::runner::{running_min_kkt, Method, Termination, Trace};
use crate::types::{SolverConfig, StepDiagnostics};

pub const TRACE_HEADER: [&str; 9] = [
    "k", "f", "q_hat", "lambda", "phi", "delta_norm", "grad_qhat_norm", "kkt", "wall_us",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| BomeError::io(format!("creating directory {}", dir.display()), e))?;
    }
    let file = File::create(path).map_err(|e| BomeError::io(format!("creating {}", path.display()), e))?;
    Ok(BufWriter::new(file))
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one row per iteration. Floats use 17 significant digits so values
/// round-trip exactly; `kkt` is empty on rows where it was not evaluated.
pub fn emit_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.iter_k.to_string(),
            fmt_f(r.f_value),
            fmt_f(r.q_hat),
            fmt_f(r.lambda),
            fmt_f(r.phi),
            fmt_f(r.delta_norm),
            fmt_f(r.grad_qhat_norm),
            r.kkt_value.map(fmt_f).unwrap_or_default(),
            r.wall_time_micros.to_string(),
        ])?;
    }
    w.flush()
        .map_err(|e| BomeError::io(format!("writing {}", path.display()), e))
}

/// Reads a file written by [`emit_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<StepDiagnostics>> {
    let file = File::open(path).map_err(|e| BomeError::io(format!("opening {}", path.display()), e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(BomeError::Parse(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| BomeError::Parse(format!("{}: row {}: bad '{col}'", path.display(), line + 1));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(TRACE_HEADER[i]));
        out.push(StepDiagnostics {
            iter_k: rec[0].parse().map_err(|_| bad("k"))?,
            f_value: num(1)?,
            q_hat: num(2)?,
            lambda: num(3)?,
            phi: num(4)?,
            delta_norm: num(5)?,
            grad_qhat_norm: num(6)?,
            kkt_value: if rec[7].is_empty() { None } else { Some(num(7)?) },
            wall_time_micros: rec[8].parse().map_err(|_| bad("wall_us"))?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: Method,
    pub config: SolverConfig,
    pub iterations: usize,
    pub final_f: f64,
    pub final_kkt: Option<f64>,
    pub min_kkt: Option<f64>,
    /// `(k, running min)` at every evaluated row.
    pub running_min_kkt: Vec<(usize, f64)>,
    pub dist_to_opt: Option<f64>,
    pub total_wall_us: u64,
    pub termination: Termination,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn from_trace(trace: &Trace) -> RunSummary {
        let running = running_min_kkt(trace).unwrap_or_default();
        RunSummary {
            problem: trace.problem_name.clone(),
            method: trace.method,
            config: trace.config_snapshot.clone(),
            iterations: trace.records.len(),
            final_f: trace.final_f,
            final_kkt: trace.final_kkt_value(),
            min_kkt: running.last().map(|&(_, v)| v),
            running_min_kkt: running,
            dist_to_opt: trace
                .known_optimum
                .as_ref()
                .filter(|o| o.dims() == trace.final_point.dims())
                .map(|o| o.distance(&trace.final_point)),
            total_wall_us: trace.total_wall_micros(),
            termination: trace.termination,
            error: trace.error.clone(),
        }
    }
}

/// Writes a JSON array with one [`RunSummary`] per trace.
pub fn emit_summary_json(traces: &[Trace], path: &Path) -> Result<()> {
    if traces.is_empty() {
        return Err(BomeError::Parse("no traces to summarize".into()));
    }
    let summaries: Vec<RunSummary> = traces.iter().map(RunSummary::from_trace).collect();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &summaries)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| BomeError::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::MinimaxProblem;
    use crate::runner::run;
    use crate::types::JointPoint;

    fn sample_trace() -> Trace {
        let cfg = SolverConfig {
            max_iters: 15,
            kkt_eval_every: 4,
            ..SolverConfig::with_step(0.1)
        };
        run(&MinimaxProblem, &JointPoint::new(vec![1.0], vec![1.0]).unwrap(), &cfg, Method::Bome).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/trace.csv");
        let trace = sample_trace();
        emit_trace_csv(&trace, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,f,q_hat,lambda,phi,delta_norm,grad_qhat_norm,kkt,wall_us\n"));
        assert_eq!(read_trace_csv(&path).unwrap(), trace.records);
        // rows 1..3 have no measure
        assert!(text.lines().nth(2).unwrap().contains(",,"));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let target = blocker.join("trace.csv");
        let err = emit_trace_csv(&sample_trace(), &target).unwrap_err();
        assert!(matches!(err, BomeError::Io { .. }));
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn summary_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        let trace = sample_trace();
        emit_summary_json(std::slice::from_ref(&trace), &path).unwrap();
        let parsed: Vec<RunSummary> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed.len(), 1);
        let s = &parsed[0];
        assert_eq!(s.problem, "minimax");
        assert_eq!(s.iterations, 15);
        assert_eq!(s.termination, Termination::MaxIters);
        let d = s.dist_to_opt.unwrap();
        assert!((d - trace.final_point.norm()).abs() < 1e-15);
        assert!(s.min_kkt.unwrap() <= s.final_kkt.unwrap());
        assert!(emit_summary_json(&[], &path).is_err());
    }

    #[test]
    fn rejects_foreign_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_trace_csv(&path).is_err());
    }
}
