//! Evaluation through an external program speaking a line protocol.
//!
//! For every batch the program is started once, receives one line per point
//! (`s` space-separated floats, shortest round-trip form, LF terminated) on
//! standard input, and must answer with exactly one float per line on standard
//! output, in the same order, then exit with status 0.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::EvalError;

#[derive(Debug)]
pub struct ExternalEvaluator {
    program: PathBuf,
    args: Vec<String>,
    timeout: Option<Duration>,
    // one batch in flight at a time
    gate: Mutex<()>,
}

impl ExternalEvaluator {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalEvaluator {
            program: program.into(),
            args: Vec::new(),
            timeout: None,
            gate: Mutex::new(()),
        }
    }

    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn program(&self) -> &std::path::Path {
        &self.program
    }

    /// Sends `points` (flat, `dim` coordinates each) and returns one value per point.
    pub fn evaluate_batch(&self, points: &[f64], dim: usize) -> Result<Vec<f64>, EvalError> {
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let expected = points.len() / dim;
        let mut request = String::with_capacity(points.len() * 20);
        for point in points.chunks(dim) {
            for (k, v) in point.iter().enumerate() {
                if k > 0 {
                    request.push(' ');
                }
                request.push_str(&v.to_string());
            }
            request.push('\n');
        }

        let _guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::External {
                line: None,
                reason: format!("cannot start {}: {e}", self.program.display()),
            })?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");

        let writer = thread::spawn(move || {
            // A broken pipe here means the program exited early; that is
            // reported through the reply count and exit status instead.
            let _ = stdin.write_all(request.as_bytes());
            let _ = stdin.flush();
        });
        let (tx, rx) = mpsc::channel();
        let reader = thread::spawn(move || {
            let mut lines = Vec::with_capacity(expected);
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => lines.push(l),
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        return;
                    }
                }
            }
            let _ = tx.send(Ok(lines));
        });

        let received = match self.timeout {
            Some(limit) => match rx.recv_timeout(limit) {
                Ok(r) => r,
                Err(_) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    // Descendants of the program may still hold the pipes, so
                    // the I/O threads are detached rather than joined.
                    drop(writer);
                    drop(reader);
                    return Err(EvalError::Timeout(limit));
                }
            },
            None => rx.recv().map_err(|_| EvalError::External {
                line: None,
                reason: "reader thread terminated".into(),
            })?,
        };
        let _ = writer.join();
        let _ = reader.join();
        let status = child.wait().map_err(|e| EvalError::External {
            line: None,
            reason: format!("wait failed: {e}"),
        })?;
        let lines = received.map_err(|e| EvalError::External {
            line: None,
            reason: format!("read failed: {e}"),
        })?;
        if !status.success() {
            return Err(EvalError::External {
                line: Some(lines.len() + 1),
                reason: format!("evaluator exited with {status}"),
            });
        }
        if lines.len() != expected {
            return Err(EvalError::External {
                line: Some(lines.len().min(expected) + 1),
                reason: format!("expected {expected} reply lines, got {}", lines.len()),
            });
        }
        lines
            .iter()
            .enumerate()
            .map(|(k, line)| {
                let value: f64 = line.trim().parse().map_err(|_| EvalError::External {
                    line: Some(k + 1),
                    reason: format!("malformed reply {:?}", line),
                })?;
                if !value.is_finite() {
                    return Err(EvalError::NonFinite {
                        value,
                        point: points[k * dim..(k + 1) * dim].to_vec(),
                    });
                }
                Ok(value)
            })
            .collect()
    }
}
