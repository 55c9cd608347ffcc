//! Solvers in other languages, driven over stdin/stdout.
//!
//! Lines are newline-terminated, fields separated by single spaces, reals in
//! shortest round-trip decimal form.
//!
//! ```text
//! harness -> solver   INIT <d> <budget> <seed>
//!                     LOWER <x_1> ... <x_d>
//!                     UPPER <x_1> ... <x_d>
//! solver -> harness   EVAL <x_1> ... <x_d>
//! harness -> solver   F <y_1> <y_2>          (raw objective values)
//!                     DONE                   (budget used up; the run is over)
//! solver -> harness   QUIT                   (the solver stops early)
//! ```
//!
//! Anything else, a wrong number of values, or the process exiting without
//! `QUIT` while budget is left marks the run failed.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use bono::harness::{CountingEvaluator, EvalError, Solver};

/// How long a solver may take to exit after the run is over.
const EXIT_GRACE: Duration = Duration::from_secs(5);

pub struct ExternalSolver {
    pub command: String,
    pub id: String,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn finish(mut child: Child) {
    drop(child.stdin.take());
    let start = Instant::now();
    while start.elapsed() < EXIT_GRACE {
        if let Ok(Some(_)) = child.try_wait() {
            return;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    let _ = child.kill();
    let _ = child.wait();
}

impl Solver for ExternalSolver {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn solve(&self, ev: &mut CountingEvaluator<'_>, seed: u64) -> Result<(), EvalError> {
        let failed = |m: String| EvalError::Failed(m);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| failed(format!("cannot start `{}`: {e}", self.command)))?;
        let result = converse(&mut child, ev, seed);
        finish(child);
        result
    }
}

fn converse(child: &mut Child, ev: &mut CountingEvaluator<'_>, seed: u64) -> Result<(), EvalError> {
    let failed = |m: String| EvalError::Failed(m);
    let mut input = child.stdin.take().expect("piped stdin");
    let mut output = BufReader::new(child.stdout.take().expect("piped stdout"));
    let d = ev.dimension();
    let mut send = |line: String| -> Result<(), EvalError> {
        writeln!(input, "{line}")
            .and_then(|_| input.flush())
            .map_err(|e| failed(format!("solver stopped reading: {e}")))
    };
    send(format!("INIT {d} {} {seed}", ev.budget()))?;
    send(format!("LOWER {}", join(ev.lower())))?;
    send(format!("UPPER {}", join(ev.upper())))?;
    let mut line = String::new();
    loop {
        line.clear();
        let n = output
            .read_line(&mut line)
            .map_err(|e| failed(format!("reading from solver: {e}")))?;
        if n == 0 {
            if ev.remaining() == 0 {
                return Err(EvalError::BudgetExhausted);
            }
            return Err(failed("solver exited without QUIT".into()));
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("QUIT") => return Ok(()),
            Some("EVAL") => {
                let x: Vec<f64> = fields
                    .map(|f| f.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| failed(format!("bad number in {:?}", line.trim_end())))?;
                if x.len() != d {
                    return Err(failed(format!(
                        "EVAL with {} values, expected {d}",
                        x.len()
                    )));
                }
                match ev.evaluate(&x) {
                    Ok(y) => send(format!("F {} {}", y.y1, y.y2))?,
                    Err(EvalError::BudgetExhausted) => {
                        // the solver may already be gone
                        let _ = send("DONE".into());
                        return Err(EvalError::BudgetExhausted);
                    }
                    Err(e) => return Err(failed(e.to_string())),
                }
            }
            _ => return Err(failed(format!("protocol violation: {:?}", line.trim_end()))),
        }
    }
}
