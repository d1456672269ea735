//! Plain-text dump of an [`SdpProblem`] for cross-checking with external
//! solvers.
//!
//! ```text
//! sdp-dump 1
//! vars <N>
//! objective <c_1> ... <c_N>
//! bounds
//! <lower_1|-inf> <upper_1|inf>
//! ...                                  (N lines)
//! equalities <R>
//! <e_r1> ... <e_rN> <f_r>              (R lines)
//! blocks <B>
//! block <label> dim <d> terms <T>
//! F0
//! <d rows of d numbers, row-major>
//! F <var index, 0-based>
//! <d rows of d numbers>
//! ...                                  (T coefficient matrices)
//! ```
//!
//! Each block represents the constraint `F0 + sum_i v_i F_i <= -tau I`.
//! Numbers are written with 17 significant digits so a dump reads back
//! bit-exactly.

use std::fmt::Write as _;

use thiserror::Error;

use super::{LmiBlock, SdpProblem, VariableBounds};
use crate::linalg::{Matrix, SymmetricMatrix};

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_dump(problem: &SdpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sdp-dump 1");
    let _ = writeln!(out, "vars {}", problem.num_vars);
    let obj: Vec<String> = problem.objective.iter().map(|&x| num(x)).collect();
    let _ = writeln!(out, "objective {}", obj.join(" "));
    let _ = writeln!(out, "bounds");
    for b in &problem.bounds {
        let l = b.lower.map_or("-inf".to_string(), num);
        let u = b.upper.map_or("inf".to_string(), num);
        let _ = writeln!(out, "{l} {u}");
    }
    let _ = writeln!(out, "equalities {}", problem.eq_rows.len());
    for (row, f) in problem.eq_rows.iter().zip(&problem.eq_rhs) {
        let mut cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        cells.push(num(*f));
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    let _ = writeln!(out, "blocks {}", problem.blocks.len());
    for block in &problem.blocks {
        let label = if block.label.is_empty() {
            "-".to_string()
        } else {
            block.label.replace(char::is_whitespace, "_")
        };
        let _ = writeln!(out, "block {} dim {} terms {}", label, block.dim(), block.terms.len());
        let _ = writeln!(out, "F0");
        write_sym(&mut out, &block.constant);
        for (i, f) in &block.terms {
            let _ = writeln!(out, "F {i}");
            write_sym(&mut out, f);
        }
    }
    out
}

fn write_sym(out: &mut String, s: &SymmetricMatrix) {
    for row in s.to_matrix().to_rows() {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, DumpError> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok(l);
            }
        }
        Err(self.err("unexpected end of input"))
    }

    fn err(&self, msg: impl Into<String>) -> DumpError {
        DumpError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>, DumpError> {
        let l = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(self.err(format!("expected '{key}'")));
        }
        Ok(it.collect())
    }

    fn numbers(&mut self, expected: usize) -> Result<Vec<f64>, DumpError> {
        let l = self.next()?;
        let vals = l
            .split_whitespace()
            .map(parse_num)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| self.err("bad number"))?;
        if vals.len() != expected {
            return Err(self.err(format!("expected {expected} numbers, got {}", vals.len())));
        }
        Ok(vals)
    }

    fn keyed_count(&mut self, key: &str) -> Result<usize, DumpError> {
        let rest = self.keyed(key)?;
        self.count(rest.first())
    }

    fn count(&self, s: Option<&&str>) -> Result<usize, DumpError> {
        s.and_then(|s| s.parse().ok()).ok_or_else(|| self.err("bad count"))
    }

    fn sym(&mut self, d: usize) -> Result<SymmetricMatrix, DumpError> {
        let mut data = Vec::with_capacity(d * d);
        for _ in 0..d {
            data.extend(self.numbers(d)?);
        }
        let m = Matrix::from_row_major(d, d, data).map_err(|e| self.err(e.to_string()))?;
        SymmetricMatrix::from_matrix(&m, 0.0).map_err(|e| self.err(e.to_string()))
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn read_dump(text: &str) -> Result<SdpProblem, DumpError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.keyed("sdp-dump")?;
    if header != ["1"] {
        return Err(lines.err("unsupported dump version"));
    }
    let n = lines.keyed_count("vars")?;
    let objective = lines
        .keyed("objective")?
        .iter()
        .map(|s| parse_num(s))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| lines.err("bad objective"))?;
    lines.keyed("bounds")?;
    let mut bounds = Vec::with_capacity(n);
    for _ in 0..n {
        let b = lines.numbers(2)?;
        bounds.push(VariableBounds {
            lower: b[0].is_finite().then_some(b[0]),
            upper: b[1].is_finite().then_some(b[1]),
        });
    }
    let neq = lines.keyed_count("equalities")?;
    let mut eq_rows = Vec::with_capacity(neq);
    let mut eq_rhs = Vec::with_capacity(neq);
    for _ in 0..neq {
        let mut row = lines.numbers(n + 1)?;
        eq_rhs.push(row.pop().unwrap_or_default());
        eq_rows.push(row);
    }
    let nblocks = lines.keyed_count("blocks")?;
    let mut blocks = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let head = lines.keyed("block")?;
        if head.len() != 5 || head[1] != "dim" || head[3] != "terms" {
            return Err(lines.err("malformed block header"));
        }
        let label = if head[0] == "-" {
            String::new()
        } else {
            head[0].to_string()
        };
        let d = lines.count(head.get(2))?;
        let t = lines.count(head.get(4))?;
        lines.keyed("F0")?;
        let mut block = LmiBlock::new(label, lines.sym(d)?);
        for _ in 0..t {
            let var = lines.keyed_count("F")?;
            block.terms.push((var, lines.sym(d)?));
        }
        blocks.push(block);
    }
    let problem = SdpProblem {
        num_vars: n,
        objective,
        blocks,
        eq_rows,
        eq_rhs,
        bounds,
    };
    problem.validate().map_err(|e| lines.err(e.to_string()))?;
    Ok(problem)
}
