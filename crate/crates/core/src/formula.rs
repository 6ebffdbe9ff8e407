// SPDX-License-Identifier: Apache-2.0

//! Stage formulas for the pipelined encoder.
//!
//! A formula is a left-to-right sequence of stages, each stage being `k`
//! parallel copies of one atom (`I_k (x) A`). The general formula `F(N, M)`
//! contains placeholder atoms `W_v`; [`specialize`] rewrites each of them into
//! a switch or a permutation, giving the concrete `f_{N,M}` that
//! [`crate::netlist::elaborate`] turns into hardware.
//!
//! Canonical text form, one parenthesized group per stage:
//!
//! ```text
//! formula := group+
//! group   := "(" [ "I" INT "x" ] atom ")"
//! atom    := "XP" | "S" INT | "P" INT | "W" INT [ "/" INT ]
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::{DesignPoint, ParamError};

/// Subscript of a placeholder `W_v`, stored as `v = 2^exp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    pub exp: i32,
}

impl Dyadic {
    /// `true` when `v >= 2`, i.e. the placeholder becomes a switch.
    pub fn is_switch(self) -> bool {
        self.exp >= 1
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp >= 0 {
            write!(f, "{}", 1u64 << self.exp)
        } else {
            write!(f, "1/{}", 1u64 << -self.exp)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atom {
    /// XOR-and-pass: `(u0 ^ u1, u1)`.
    Xp,
    /// Two-lane switch `S_K` with `K/2` delays on each side.
    Switch(usize),
    /// Fixed rewiring `P_P` of `P` lanes.
    Perm(usize),
    /// Placeholder `W_v` of the general formula.
    W(Dyadic),
}

impl Atom {
    /// Lanes one instance spans, or `None` for a `W_v` with `v <= 1`, whose
    /// copies jointly fill the whole datapath.
    pub fn width(&self) -> Option<usize> {
        match *self {
            Atom::Xp | Atom::Switch(_) => Some(2),
            Atom::Perm(p) => Some(p),
            Atom::W(v) if v.is_switch() => Some(2),
            Atom::W(_) => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Xp => write!(f, "XP"),
            Atom::Switch(k) => write!(f, "S{k}"),
            Atom::Perm(p) => write!(f, "P{p}"),
            Atom::W(v) => write!(f, "W{v}"),
        }
    }
}

/// `I_copies (x) atom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stage {
    pub copies: usize,
    pub atom: Atom,
}

impl Stage {
    pub fn new(copies: usize, atom: Atom) -> Self {
        Self { copies, atom }
    }

    /// Lanes spanned in a datapath of width `m`.
    pub fn lane_span(&self, m: usize) -> usize {
        self.atom.width().map_or(m, |w| w * self.copies)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.copies == 1 {
            write!(f, "({})", self.atom)
        } else {
            write!(f, "(I{}x{})", self.copies, self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    pub n: usize,
    pub m: usize,
    pub stages: Vec<Stage>,
}

impl Formula {
    pub fn is_specialized(&self) -> bool {
        !self.stages.iter().any(|s| matches!(s.atom, Atom::W(_)))
    }

    pub fn point(&self) -> Result<DesignPoint, ParamError> {
        DesignPoint::new(self.n, self.m)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for stage in &self.stages {
            write!(f, "{stage}")?;
        }
        Ok(())
    }
}

impl FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("structural error: {0}")]
    Structural(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("placeholder W{0} at stage {1} cannot be specialized")]
    BadPlaceholder(Dyadic, usize),
}

/// `F(N, M)`: stages with `W_v`, `v_i = N / (2^i M)` for `i = 0 ..= log2(N) - 3`.
pub fn general_formula(point: DesignPoint) -> Formula {
    let (m, half, quarter) = (point.m(), point.m() / 2, point.m() / 4);
    let xp = Stage::new(half, Atom::Xp);
    let p4 = Stage::new(quarter, Atom::Perm(4));

    let mut stages = vec![xp, p4];
    for i in 0..=point.log_n() - 3 {
        let exp = point.log_n() as i32 - point.log_m() as i32 - i as i32;
        let v = Dyadic { exp };
        let copies = if v.is_switch() { half } else { 1 << -exp };
        stages.push(Stage::new(copies, Atom::W(v)));
        stages.push(xp);
    }
    stages.push(p4);
    stages.push(Stage::new(half, Atom::Switch(point.n() / m)));
    stages.push(xp);

    Formula {
        n: point.n(),
        m,
        stages,
    }
}

/// Rewrites every placeholder: `W_v` with `v >= 2` becomes `I_{M/2} (x) S_v`;
/// `W_{1/k}` becomes `I_k (x) P_{M/k}`.
pub fn specialize(f: &Formula) -> Result<Formula, FormulaError> {
    let stages = f
        .stages
        .iter()
        .enumerate()
        .map(|(idx, stage)| match stage.atom {
            Atom::W(v) if v.is_switch() => {
                if stage.copies != f.m / 2 {
                    return Err(FormulaError::BadPlaceholder(v, idx));
                }
                Ok(Stage::new(stage.copies, Atom::Switch(1 << v.exp)))
            }
            Atom::W(v) => {
                let k = 1usize
                    .checked_shl((-v.exp) as u32)
                    .filter(|&k| k <= f.m / 4 && stage.copies == k)
                    .ok_or(FormulaError::BadPlaceholder(v, idx))?;
                Ok(Stage::new(k, Atom::Perm(f.m / k)))
            }
            _ => Ok(*stage),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Formula {
        n: f.n,
        m: f.m,
        stages,
    })
}

/// `f_{N,M}` in one call.
pub fn specialized_formula(point: DesignPoint) -> Formula {
    specialize(&general_formula(point)).expect("generated placeholders are well formed")
}

/// Canonical text of a formula.
pub fn format_formula(f: &Formula) -> String {
    f.to_string()
}

/// Parses the canonical grammar, inferring `M` from the lane span and `N`
/// from the last switch (`S_{N/M}`).
pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let stages = Parser::new(text).groups()?;
    if stages.is_empty() {
        return Err(FormulaError::Syntax {
            pos: 0,
            message: "expected at least one stage".into(),
        });
    }

    for (idx, stage) in stages.iter().enumerate() {
        check_sizes(idx, stage).map_err(FormulaError::Structural)?;
    }

    let m = stages
        .iter()
        .find_map(|s| s.atom.width().map(|w| w * s.copies))
        .ok_or_else(|| FormulaError::Structural("no stage with a fixed lane span".into()))?;
    for (idx, stage) in stages.iter().enumerate() {
        let span = stage.lane_span(m);
        if span != m {
            return Err(FormulaError::Structural(format!(
                "stage {idx} {stage} spans {span} lanes, expected {m}"
            )));
        }
    }

    let last_switch = stages
        .iter()
        .rev()
        .find_map(|s| match s.atom {
            Atom::Switch(k) => Some(k),
            _ => None,
        })
        .ok_or_else(|| FormulaError::Structural("no final switch to infer N from".into()))?;
    let n = last_switch * m;
    DesignPoint::new(n, m)?;
    Ok(Formula { n, m, stages })
}

fn check_sizes(idx: usize, stage: &Stage) -> Result<(), String> {
    if !stage.copies.is_power_of_two() {
        return Err(format!(
            "stage {idx}: copy count {} is not a power of two",
            stage.copies
        ));
    }
    match stage.atom {
        Atom::Switch(k) if !k.is_power_of_two() || k < 2 => Err(format!(
            "stage {idx}: switch size {k} must be a power of two >= 2"
        )),
        Atom::Perm(p) if !p.is_power_of_two() || p < 4 => Err(format!(
            "stage {idx}: permutation size {p} must be a power of two > 2"
        )),
        _ => Ok(()),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, byte: u8) -> bool {
        if self.peek() == Some(byte) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, byte: u8) -> Result<(), FormulaError> {
        if self.eat(byte) {
            Ok(())
        } else {
            self.error(format!("expected '{}'", byte as char))
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn groups(&mut self) -> Result<Vec<Stage>, FormulaError> {
        let mut stages = Vec::new();
        self.skip_ws();
        while self.peek().is_some() {
            stages.push(self.group()?);
            self.skip_ws();
        }
        Ok(stages)
    }

    fn group(&mut self) -> Result<Stage, FormulaError> {
        self.expect(b'(')?;
        let copies = if self.eat(b'I') {
            let k = self.int()?;
            self.expect(b'x')?;
            k
        } else {
            1
        };
        let atom = self.atom()?;
        self.expect(b')')?;
        Ok(Stage::new(copies, atom))
    }

    fn atom(&mut self) -> Result<Atom, FormulaError> {
        match self.peek() {
            Some(b'X') => {
                self.pos += 1;
                self.expect(b'P')?;
                Ok(Atom::Xp)
            }
            Some(b'S') => {
                self.pos += 1;
                Ok(Atom::Switch(self.int()?))
            }
            Some(b'P') => {
                self.pos += 1;
                Ok(Atom::Perm(self.int()?))
            }
            Some(b'W') => {
                self.pos += 1;
                let start = self.pos;
                let num = self.int()?;
                let den = if self.eat(b'/') { self.int()? } else { 1 };
                if !num.is_power_of_two() || !den.is_power_of_two() || (num > 1 && den > 1) {
                    self.pos = start;
                    return self.error(format!("W subscript {num}/{den} is not a power of two"));
                }
                let exp = num.trailing_zeros() as i32 - den.trailing_zeros() as i32;
                Ok(Atom::W(Dyadic { exp }))
            }
            _ => self.error("expected XP, S, P or W"),
        }
    }

    fn int(&mut self) -> Result<usize, FormulaError> {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.error("expected an integer");
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        match digits.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => {
                self.pos = start;
                self.error(format!("'{digits}' is not a positive integer"))
            }
        }
    }
}

/// One problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Params(ParamError),
    Size {
        stage: usize,
        message: String,
    },
    LaneSpan {
        stage: usize,
        span: usize,
        expected: usize,
    },
    Unspecialized {
        stage: usize,
    },
    StageCount {
        expected: usize,
        actual: usize,
    },
    Template {
        stage: usize,
        expected: String,
        found: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Params(e) => write!(f, "{e}"),
            Violation::Size { message, .. } => write!(f, "{message}"),
            Violation::LaneSpan {
                stage,
                span,
                expected,
            } => write!(f, "stage {stage} spans {span} lanes, expected {expected}"),
            Violation::Unspecialized { stage } => {
                write!(f, "stage {stage} still holds a W placeholder")
            }
            Violation::StageCount { expected, actual } => {
                write!(f, "expected {expected} stages, found {actual}")
            }
            Violation::Template {
                stage,
                expected,
                found,
            } => write!(f, "stage {stage} is {found}, template requires {expected}"),
        }
    }
}

/// Everything that keeps `f` from being elaborated; empty means valid.
pub fn validate(f: &Formula) -> Vec<Violation> {
    let mut out = Vec::new();
    for (idx, stage) in f.stages.iter().enumerate() {
        if let Err(message) = check_sizes(idx, stage) {
            out.push(Violation::Size {
                stage: idx,
                message,
            });
        }
        let span = stage.lane_span(f.m);
        if span != f.m {
            out.push(Violation::LaneSpan {
                stage: idx,
                span,
                expected: f.m,
            });
        }
        if matches!(stage.atom, Atom::W(_)) {
            out.push(Violation::Unspecialized { stage: idx });
        }
    }

    let point = match f.point() {
        Ok(p) => p,
        Err(e) => {
            out.push(Violation::Params(e));
            return out;
        }
    };
    let template = if f.is_specialized() {
        specialized_formula(point)
    } else {
        general_formula(point)
    };
    if template.stages.len() != f.stages.len() {
        out.push(Violation::StageCount {
            expected: template.stages.len(),
            actual: f.stages.len(),
        });
    } else if let Some((idx, (want, got))) = template
        .stages
        .iter()
        .zip(&f.stages)
        .enumerate()
        .find(|(_, (a, b))| a != b)
    {
        out.push(Violation::Template {
            stage: idx,
            expected: want.to_string(),
            found: got.to_string(),
        });
    }
    out
}
