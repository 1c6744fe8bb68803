//! End-to-end tests of the `dyconn` binary: output, exit codes, and
//! determinism across the run/generate/bench subcommands.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn dyconn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyconn"))
        .args(args)
        .output()
        .expect("spawn dyconn")
}

fn trace_file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_prints_query_answers() {
    let f = trace_file("init 3 10\ni 1 2\nq 1 0\ni 0 1 # bridge\nq 1 0\nq 2 0\n");
    let out = dyconn(&["run", f.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "0\n1\n1\n");
}

#[test]
fn run_accepts_engine_flags() {
    let f = trace_file("init 6 12\ni 0 1\ni 1 2\ni 2 3\ni 3 4\ni 4 5\nq 0 5\nd 2 3\nq 0 5\n");
    for enc in ["dense", "packed"] {
        let out = dyconn(&[
            "run",
            f.path().to_str().unwrap(),
            "--encoding",
            enc,
            "--k-override",
            "2",
            "--h-override",
            "4",
            "--audit-every",
            "1",
        ]);
        assert!(out.status.success(), "{enc}: {}", stderr(&out));
        assert_eq!(stdout(&out), "1\n0\n");
    }
}

#[test]
fn parse_errors_exit_one_with_line_number() {
    let f = trace_file("init 3 10\nq 0 7\n");
    let out = dyconn(&["run", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = dyconn(&["run", "/no/such/trace.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn contract_violations_exit_one() {
    let f = trace_file("init 4 10\ni 0 1\nd 2 3\n");
    let out = dyconn(&["run", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("op 2"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let out = dyconn(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = dyconn(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("run"));
}

#[test]
fn generate_is_deterministic_and_replayable() {
    let args = [
        "generate", "--n", "30", "--mhat", "60", "--ops", "400", "--mix", "40,30,30", "--seed",
        "11",
    ];
    let a = dyconn(&args);
    let b = dyconn(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("init 30 60\n"));

    let f = trace_file(&stdout(&a));
    let run = dyconn(&[
        "run",
        f.path().to_str().unwrap(),
        "--audit-every",
        "50",
    ]);
    assert!(run.status.success(), "{}", stderr(&run));

    let c = dyconn(&[
        "generate", "--n", "30", "--mhat", "60", "--ops", "400", "--seed", "12",
    ]);
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn generate_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.trace");
    let out = dyconn(&[
        "generate",
        "--n",
        "8",
        "--mhat",
        "10",
        "--ops",
        "50",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("init 8 10\n"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn bench_emits_csv() {
    let gen = dyconn(&[
        "generate", "--n", "20", "--mhat", "40", "--ops", "200", "--seed", "5",
    ]);
    let f = trace_file(&stdout(&gen));
    let out = dyconn(&["bench", f.path().to_str().unwrap(), "--encoding", "packed"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "op_index,op_kind,latency_ns,chunks_split,chunks_merged,superchunks_split,\
superchunks_merged,edges_scanned,word_ops"
    );
    let mut rows = 0;
    for (i, row) in lines.enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 9, "{row}");
        assert_eq!(cols[0].parse::<usize>().unwrap(), i);
        assert!(matches!(cols[1], "i" | "d" | "q"), "{row}");
        assert!(cols[2].parse::<u64>().unwrap() >= 1, "{row}");
        rows += 1;
    }
    assert_eq!(rows, 200);
}
