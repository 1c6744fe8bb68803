//! Text wire format for operation traces.
//!
//! A trace is line-oriented: a mandatory `init <n> <mhat>` header followed
//! by `i <u> <v>` (insert), `d <u> <v>` (delete), and `q <u> <v>` (query)
//! lines. Vertices are 0-based decimal. `#` starts a comment that runs to
//! the end of the line; blank lines are ignored.

use std::fmt;

/// One operation from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOp {
    Insert(u32, u32),
    Delete(u32, u32),
    Query(u32, u32),
}

impl TraceOp {
    /// The single-letter kind used in the wire format and in CSV output.
    pub fn kind(&self) -> char {
        match self {
            TraceOp::Insert(..) => 'i',
            TraceOp::Delete(..) => 'd',
            TraceOp::Query(..) => 'q',
        }
    }

    /// The operation's vertex pair.
    pub fn endpoints(&self) -> (u32, u32) {
        match *self {
            TraceOp::Insert(u, v) | TraceOp::Delete(u, v) | TraceOp::Query(u, v) => (u, v),
        }
    }
}

impl fmt::Display for TraceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (u, v) = self.endpoints();
        write!(f, "{} {} {}", self.kind(), u, v)
    }
}

/// A parsed trace: the header values plus the operations in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// Number of vertices.
    pub n: u32,
    /// Maximum number of edges present at any time.
    pub mhat: usize,
    pub ops: Vec<TraceOp>,
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "init {} {}", self.n, self.mhat)?;
        for op in &self.ops {
            writeln!(f, "{op}")?;
        }
        Ok(())
    }
}

/// A parse failure, pointing at the offending 1-based line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ParseError {}

fn fail(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, tok: &str) -> Result<T, ParseError> {
    tok.parse()
        .map_err(|_| fail(line, format!("bad {what} `{tok}`")))
}

/// Parse a whole trace from text.
pub fn parse(src: &str) -> Result<Trace, ParseError> {
    let mut trace: Option<Trace> = None;
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let toks: Vec<&str> = text.split_whitespace().collect();
        match (toks[0], toks.len()) {
            ("init", 3) => {
                if trace.is_some() {
                    return Err(fail(line, "duplicate init header"));
                }
                trace = Some(Trace {
                    n: parse_num(line, "vertex count", toks[1])?,
                    mhat: parse_num(line, "edge capacity", toks[2])?,
                    ops: Vec::new(),
                });
            }
            ("init", _) => return Err(fail(line, "init takes exactly <n> <mhat>")),
            (kind @ ("i" | "d" | "q"), 3) => {
                let t = trace
                    .as_mut()
                    .ok_or_else(|| fail(line, "operation before init header"))?;
                let u: u32 = parse_num(line, "vertex", toks[1])?;
                let v: u32 = parse_num(line, "vertex", toks[2])?;
                for x in [u, v] {
                    if x >= t.n {
                        return Err(fail(line, format!("vertex {x} out of range (n = {})", t.n)));
                    }
                }
                t.ops.push(match kind {
                    "i" => TraceOp::Insert(u, v),
                    "d" => TraceOp::Delete(u, v),
                    _ => TraceOp::Query(u, v),
                });
            }
            ("i" | "d" | "q", _) => {
                return Err(fail(line, format!("{} takes exactly <u> <v>", toks[0])))
            }
            (other, _) => return Err(fail(line, format!("unknown directive `{other}`"))),
        }
    }
    trace.ok_or_else(|| fail(src.lines().count().max(1), "missing init header"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let t = Trace {
            n: 5,
            mhat: 10,
            ops: vec![
                TraceOp::Insert(0, 1),
                TraceOp::Query(1, 4),
                TraceOp::Delete(0, 1),
            ],
        };
        assert_eq!(parse(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn skips_comments_and_blanks() {
        let src = "# full-line comment\n\ninit 3 4   # trailing\n i 0 1\n\nq 0 2 # ask\n";
        let t = parse(src).unwrap();
        assert_eq!(t.n, 3);
        assert_eq!(t.ops, vec![TraceOp::Insert(0, 1), TraceOp::Query(0, 2)]);
    }

    #[test]
    fn reports_line_numbers() {
        let cases = [
            ("init 3\n", 1, "init takes"),
            ("init 3 9\nq 0\n", 2, "takes exactly"),
            ("init 3 9\nz 0 1\n", 2, "unknown directive"),
            ("i 0 1\n", 1, "before init"),
            ("init 3 9\ninit 3 9\n", 2, "duplicate init"),
            ("init 3 9\nq 0 3\n", 2, "out of range"),
            ("init 3 9\nq 0 x\n", 2, "bad vertex"),
            ("# nothing\n", 1, "missing init"),
        ];
        for (src, line, needle) in cases {
            let e = parse(src).unwrap_err();
            assert_eq!(e.line, line, "{src:?}");
            assert!(e.msg.contains(needle), "{src:?} gave {e}");
        }
    }
}
