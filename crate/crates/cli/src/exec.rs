//! Trace execution: replay against the engine, answering queries or
//! emitting per-operation benchmark rows.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use dyconn::audit::audit;
use dyconn::{Connectivity, Encoding, Overrides};

use crate::trace::{Trace, TraceOp};

/// Engine construction and replay settings shared by run and bench.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub encoding: Encoding,
    pub k_override: Option<u32>,
    pub h_override: Option<u32>,
    pub word_bits: Option<u32>,
    /// Run the full-structure auditor after every N-th operation.
    pub audit_every: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            encoding: Encoding::Dense,
            k_override: None,
            h_override: None,
            word_bits: None,
            audit_every: None,
        }
    }
}

/// A replay failure, split by exit-code class: bad input versus a broken
/// internal invariant.
#[derive(Debug)]
pub enum ExecError {
    /// Malformed trace, contract violation, parameter or I/O problem.
    Input(String),
    /// The auditor found the structure inconsistent.
    Invariant(String),
}

impl ExecError {
    /// Process exit code for this failure: 1 for input, 2 for invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExecError::Input(_) => 1,
            ExecError::Invariant(_) => 2,
        }
    }
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::Input(m) => write!(f, "{m}"),
            ExecError::Invariant(m) => write!(f, "invariant failure: {m}"),
        }
    }
}

impl std::error::Error for ExecError {}

impl From<std::io::Error> for ExecError {
    fn from(e: std::io::Error) -> ExecError {
        ExecError::Input(format!("output error: {e}"))
    }
}

/// Build the engine a trace's header asks for.
pub fn build_engine(t: &Trace, cfg: &RunConfig) -> Result<Connectivity, ExecError> {
    Connectivity::new(
        t.n,
        t.mhat,
        cfg.encoding,
        Overrides {
            k: cfg.k_override,
            h: cfg.h_override,
            word_bits: cfg.word_bits,
        },
    )
    .map_err(|e| ExecError::Input(format!("invalid parameters: {e}")))
}

fn apply(c: &mut Connectivity, index: usize, op: TraceOp) -> Result<Option<bool>, ExecError> {
    let r = match op {
        TraceOp::Insert(u, v) => c.insert(u, v).map(|_| None),
        TraceOp::Delete(u, v) => c.delete(u, v).map(|_| None),
        TraceOp::Query(u, v) => c.connected(u, v).map(Some),
    };
    r.map_err(|e| ExecError::Input(format!("op {} (`{op}`): {e}", index + 1)))
}

fn maybe_audit(c: &Connectivity, cfg: &RunConfig, index: usize) -> Result<(), ExecError> {
    match cfg.audit_every {
        Some(every) if every > 0 && (index as u64 + 1) % every == 0 => {
            let report = audit(c);
            if report.is_empty() {
                Ok(())
            } else {
                let lines: Vec<String> = report.iter().map(|v| v.to_string()).collect();
                Err(ExecError::Invariant(format!(
                    "audit after op {}:\n{}",
                    index + 1,
                    lines.join("\n")
                )))
            }
        }
        _ => Ok(()),
    }
}

/// Replay `t`, writing one `0`/`1` line per query to `out`.
pub fn run(t: &Trace, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), ExecError> {
    let mut c = build_engine(t, cfg)?;
    for (index, &op) in t.ops.iter().enumerate() {
        if let Some(answer) = apply(&mut c, index, op)? {
            writeln!(out, "{}", answer as u8)?;
        }
        maybe_audit(&c, cfg, index)?;
    }
    Ok(())
}

/// Column headers of the benchmark CSV, in order.
pub const BENCH_HEADER: &str = "op_index,op_kind,latency_ns,chunks_split,chunks_merged,\
superchunks_split,superchunks_merged,edges_scanned,word_ops";

/// Replay `t`, writing one CSV row per operation to `out`. Queries report
/// zero restructuring counters; audit time is excluded from latency.
pub fn bench(t: &Trace, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), ExecError> {
    let mut c = build_engine(t, cfg)?;
    writeln!(out, "{BENCH_HEADER}")?;
    for (index, &op) in t.ops.iter().enumerate() {
        let start = Instant::now();
        apply(&mut c, index, op)?;
        let latency = start.elapsed().as_nanos().max(1);
        let k = match op {
            TraceOp::Query(..) => Default::default(),
            _ => c.last_counters(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            index,
            op.kind(),
            latency,
            k.chunks_split,
            k.chunks_merged,
            k.superchunks_split,
            k.superchunks_merged,
            k.edges_scanned,
            k.word_ops
        )?;
        maybe_audit(&c, cfg, index)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace;

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn run_answers_queries_in_order() {
        let t = trace::parse("init 3 10\ni 1 2\nq 1 0\nq 1 2\ni 0 1\nq 0 2\n").unwrap();
        let mut out = Vec::new();
        run(&t, &cfg(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0\n1\n1\n");
    }

    #[test]
    fn contract_violations_are_input_errors() {
        let dup = trace::parse("init 3 10\ni 0 1\ni 1 0\n").unwrap();
        let e = run(&dup, &cfg(), &mut Vec::new()).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("op 2"), "{e}");

        let missing = trace::parse("init 3 10\nd 0 1\n").unwrap();
        let e = run(&missing, &cfg(), &mut Vec::new()).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn bench_rows_have_nine_columns() {
        let t = trace::parse("init 4 10\ni 0 1\ni 1 2\nq 0 2\nd 0 1\n").unwrap();
        let mut out = Vec::new();
        bench(&t, &cfg(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], BENCH_HEADER);
        for row in &lines[1..] {
            assert_eq!(row.split(',').count(), 9, "{row}");
        }
        let latency: u64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert!(latency > 0);
        // Query rows carry zero restructuring counters.
        let q_row: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(q_row[1], "q");
        assert!(q_row[3..].iter().all(|c| *c == "0"), "{q_row:?}");
    }

    #[test]
    fn audits_interleave_and_pass() {
        let mix = crate::gen::Mix::new(0.5, 0.2, 0.3).unwrap();
        let t = crate::gen::generate(10, 20, 200, mix, 3).unwrap();
        let c = RunConfig {
            audit_every: Some(1),
            ..cfg()
        };
        run(&t, &c, &mut Vec::new()).unwrap();
    }
}
