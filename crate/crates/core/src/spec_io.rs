//! Verification properties: a VNNLIB subset and ε-balls.
//!
//! Inputs are bounded by `(assert (<= X_i c))` / `(assert (>= X_i c))`.
//! Output asserts describe a counterexample, so a single output atom, or
//! `(assert (or (and a₁) (and a₂) …))` with one atom per disjunct, is
//! negated into margins to prove:
//!
//! | counterexample atom | proved margin  |
//! |---------------------|----------------|
//! | `(>= Y_i Y_j)`      | `y_j - y_i ≥ 0` |
//! | `(<= Y_i Y_j)`      | `y_i - y_j ≥ 0` |
//! | `(<= Y_i c)`        | `y_i - c ≥ 0`   |
//! | `(>= Y_i c)`        | `c - y_i ≥ 0`   |
//!
//! Atoms may also be written with the constant first. Anything else is
//! rejected with the offending line.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::bound_engine::InputBox;
use crate::net_ir::DenseVector;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input variable X_{0} has no lower bound")]
    MissingLower(usize),
    #[error("input variable X_{0} has no upper bound")]
    MissingUpper(usize),
    #[error("input variable X_{index}: lower bound {lower} exceeds upper bound {upper}")]
    EmptyInterval { index: usize, lower: f64, upper: f64 },
    #[error("no input variables declared")]
    NoInputs,
    #[error("epsilon must be a non-negative finite number, got {0}")]
    BadEpsilon(f64),
    #[error("clip range [{0}, {1}] is empty")]
    BadClip(f64, f64),
    #[error("label {label} out of range for {outputs} outputs")]
    BadLabel { label: usize, outputs: usize },
    #[error("constraint {0} is not expressible as a single VNNLIB atom")]
    NotExpressible(usize),
    #[error("centre file: {0}")]
    Centre(String),
}

/// Prove `c·y + d ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConstraint {
    pub c: DenseVector,
    pub d: f64,
}

impl OutputConstraint {
    pub fn eval(&self, y: &DenseVector) -> f64 {
        self.c.dot(y) + self.d
    }
}

/// A box and the output margins that must all hold on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertySpec {
    pub input_box: InputBox,
    pub output_width: usize,
    pub constraints: Vec<OutputConstraint>,
}

impl PropertySpec {
    /// Local robustness: `y_label - y_j ≥ 0` for every other output `j`.
    pub fn robustness(input_box: InputBox, label: usize, outputs: usize) -> Result<Self, SpecError> {
        if label >= outputs {
            return Err(SpecError::BadLabel { label, outputs });
        }
        let constraints = (0..outputs)
            .filter(|&j| j != label)
            .map(|j| {
                let mut c = DenseVector::zeros(outputs);
                c[label] = 1.0;
                c[j] = -1.0;
                OutputConstraint { c, d: 0.0 }
            })
            .collect();
        Ok(PropertySpec {
            input_box,
            output_width: outputs,
            constraints,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_box.dim()
    }

    /// True if every constraint holds at output `y`.
    pub fn holds(&self, y: &DenseVector) -> bool {
        self.constraints.iter().all(|c| c.eval(y) >= 0.0)
    }
}

/// `[pᵢ - ε, pᵢ + ε]` per coordinate, intersected with `clip`.
pub fn epsilon_ball(center: &DenseVector, eps: f64, clip: Option<(f64, f64)>) -> Result<InputBox, SpecError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(SpecError::BadEpsilon(eps));
    }
    let (mut lo, mut hi) = (center - eps, center + eps);
    if let Some((a, b)) = clip {
        if a > b {
            return Err(SpecError::BadClip(a, b));
        }
        lo.mapv_inplace(|v| v.clamp(a, b));
        hi.mapv_inplace(|v| v.clamp(a, b));
    }
    InputBox::new(lo, hi).map_err(|e| SpecError::Centre(e.to_string()))
}

/// Reads a centre vector: values separated by newlines and/or commas.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_center(text: &str) -> Result<DenseVector, SpecError> {
    let mut v = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            v.push(
                tok.parse::<f64>()
                    .map_err(|_| SpecError::Centre(format!("line {}: '{tok}' is not a number", ln + 1)))?,
            );
        }
    }
    if v.is_empty() {
        return Err(SpecError::Centre("no values".into()));
    }
    Ok(DenseVector::from(v))
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn line(&self) -> usize {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a, _) => f.write_str(a),
            Sexp::List(items, _) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn perr(line: usize, msg: impl Into<String>) -> SpecError {
    SpecError::Parse { line, msg: msg.into() }
}

fn tokenize(text: &str) -> Result<Vec<Sexp>, SpecError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = vec![(Vec::new(), 0)];
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let code = raw.split(';').next().unwrap_or("");
        let mut chars = code.char_indices().peekable();
        while let Some((i, ch)) = chars.next() {
            match ch {
                '(' => stack.push((Vec::new(), line)),
                ')' => {
                    if stack.len() == 1 {
                        return Err(perr(line, "unbalanced ')'"));
                    }
                    let (items, start) = stack.pop().expect("non-root frame");
                    stack.last_mut().expect("non-empty").0.push(Sexp::List(items, start));
                }
                c if c.is_whitespace() => {}
                _ => {
                    let mut end = i + ch.len_utf8();
                    while let Some(&(j, c)) = chars.peek() {
                        if c == '(' || c == ')' || c.is_whitespace() {
                            break;
                        }
                        end = j + c.len_utf8();
                        chars.next();
                    }
                    stack.last_mut().expect("non-empty").0.push(Sexp::Atom(code[i..end].to_string(), line));
                }
            }
        }
    }
    if stack.len() != 1 {
        let open = stack.last().map_or(0, |s| s.1);
        return Err(perr(open, "unclosed '('"));
    }
    Ok(stack.pop().expect("root").0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Term {
    X(usize),
    Y(usize),
    Const(f64),
}

fn term(s: &Sexp) -> Result<Term, SpecError> {
    let Sexp::Atom(a, line) = s else {
        return Err(perr(s.line(), format!("expected a variable or number, found {s}")));
    };
    let index = |rest: &str| {
        rest.parse::<usize>()
            .map_err(|_| perr(*line, format!("bad variable name '{a}'")))
    };
    if let Some(rest) = a.strip_prefix("X_") {
        Ok(Term::X(index(rest)?))
    } else if let Some(rest) = a.strip_prefix("Y_") {
        Ok(Term::Y(index(rest)?))
    } else {
        a.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Term::Const)
            .ok_or_else(|| perr(*line, format!("unknown symbol '{a}'")))
    }
}

/// `lhs op rhs` with `op` one of `<=`, `>=`, normalized to `lhs <= rhs`.
fn atom(s: &Sexp) -> Result<(Term, Term), SpecError> {
    let unsupported = || perr(s.line(), format!("unsupported expression {s}"));
    let Sexp::List(items, _) = s else { return Err(unsupported()) };
    let [Sexp::Atom(op, _), l, r] = items.as_slice() else { return Err(unsupported()) };
    let (l, r) = (term(l)?, term(r)?);
    match op.as_str() {
        "<=" => Ok((l, r)),
        ">=" => Ok((r, l)),
        _ => Err(unsupported()),
    }
}

#[derive(Default)]
struct Builder {
    xs: BTreeMap<usize, (Option<f64>, Option<f64>)>,
    ys: usize,
    declared_x: usize,
    output_assert: Option<usize>,
    constraints: Vec<OutputConstraint>,
}

impl Builder {
    fn input_bound(&mut self, le: (Term, Term), line: usize) -> Result<bool, SpecError> {
        let (i, lower, value) = match le {
            (Term::X(i), Term::Const(c)) => (i, false, c),
            (Term::Const(c), Term::X(i)) => (i, true, c),
            (Term::X(_), _) | (_, Term::X(_)) => {
                return Err(perr(line, "input constraints must compare X_i with a constant"))
            }
            _ => return Ok(false),
        };
        if i >= self.declared_x {
            return Err(perr(line, format!("X_{i} is not declared")));
        }
        let e = self.xs.entry(i).or_default();
        if lower {
            e.0 = Some(e.0.map_or(value, |v: f64| v.max(value)));
        } else {
            e.1 = Some(e.1.map_or(value, |v: f64| v.min(value)));
        }
        Ok(true)
    }

    /// Negation of the counterexample atom `lhs <= rhs`: `lhs - rhs ≥ 0`.
    fn margin(&self, le: (Term, Term), line: usize) -> Result<OutputConstraint, SpecError> {
        let mut c = DenseVector::zeros(self.ys);
        let mut d = 0.0;
        let mut add = |t: Term, sign: f64| -> Result<(), SpecError> {
            match t {
                Term::Y(i) if i < self.ys => c[i] += sign,
                Term::Y(i) => return Err(perr(line, format!("Y_{i} is not declared"))),
                Term::Const(v) => d += sign * v,
                Term::X(_) => return Err(perr(line, "output constraints cannot mention inputs")),
            }
            Ok(())
        };
        match le {
            (Term::Const(_), Term::Const(_)) => return Err(perr(line, "constraint without variables")),
            (l, r) => {
                add(l, 1.0)?;
                add(r, -1.0)?;
            }
        }
        Ok(OutputConstraint { c, d })
    }

    fn declare(&mut self, items: &[Sexp], line: usize) -> Result<(), SpecError> {
        let [_, name, Sexp::Atom(ty, _)] = items else {
            return Err(perr(line, "expected (declare-const NAME Real)"));
        };
        if ty != "Real" {
            return Err(perr(line, format!("unsupported sort '{ty}'")));
        }
        match term(name)? {
            Term::X(i) if i == self.declared_x => self.declared_x += 1,
            Term::Y(i) if i == self.ys => self.ys += 1,
            Term::X(_) | Term::Y(_) => return Err(perr(line, format!("{name} declared out of order"))),
            Term::Const(_) => return Err(perr(line, format!("cannot declare {name}"))),
        }
        Ok(())
    }

    fn output_disjunct(&mut self, s: &Sexp) -> Result<(), SpecError> {
        let a = match s {
            Sexp::List(items, line) if matches!(items.first(), Some(Sexp::Atom(h, _)) if h == "and") => {
                match &items[1..] {
                    [one] => atom(one)?,
                    _ => {
                        return Err(perr(
                            *line,
                            format!("disjunct with several atoms is not a supported robustness form: {s}"),
                        ))
                    }
                }
            }
            _ => atom(s)?,
        };
        let m = self.margin(a, s.line())?;
        self.constraints.push(m);
        Ok(())
    }

    fn assert(&mut self, body: &Sexp, line: usize) -> Result<(), SpecError> {
        if let Sexp::List(items, _) = body {
            if let Some(Sexp::Atom(head, _)) = items.first() {
                match head.as_str() {
                    "or" => {
                        self.claim_output(line)?;
                        for d in &items[1..] {
                            self.output_disjunct(d)?;
                        }
                        return Ok(());
                    }
                    "and" => {
                        for a in &items[1..] {
                            if !self.input_bound(atom(a)?, a.line())? {
                                return Err(perr(a.line(), format!("output atom inside a conjunction: {a}")));
                            }
                        }
                        return Ok(());
                    }
                    _ => {}
                }
            }
        }
        let a = atom(body)?;
        if !self.input_bound(a, line)? {
            self.claim_output(line)?;
            let m = self.margin(a, line)?;
            self.constraints.push(m);
        }
        Ok(())
    }

    fn claim_output(&mut self, line: usize) -> Result<(), SpecError> {
        if let Some(prev) = self.output_assert {
            return Err(perr(
                line,
                format!("second output assertion (first on line {prev}); conjunctions of output atoms are not supported"),
            ));
        }
        self.output_assert = Some(line);
        Ok(())
    }

    fn finish(self) -> Result<PropertySpec, SpecError> {
        if self.declared_x == 0 {
            return Err(SpecError::NoInputs);
        }
        let mut lo = DenseVector::zeros(self.declared_x);
        let mut hi = DenseVector::zeros(self.declared_x);
        for i in 0..self.declared_x {
            let (l, u) = self.xs.get(&i).copied().unwrap_or_default();
            lo[i] = l.ok_or(SpecError::MissingLower(i))?;
            hi[i] = u.ok_or(SpecError::MissingUpper(i))?;
            if lo[i] > hi[i] {
                return Err(SpecError::EmptyInterval {
                    index: i,
                    lower: lo[i],
                    upper: hi[i],
                });
            }
        }
        Ok(PropertySpec {
            input_box: InputBox::new(lo, hi).expect("checked above"),
            output_width: self.ys,
            constraints: self.constraints,
        })
    }
}

pub fn parse_vnnlib(text: &str) -> Result<PropertySpec, SpecError> {
    let mut b = Builder::default();
    for form in tokenize(text)? {
        let line = form.line();
        let Sexp::List(items, _) = &form else {
            return Err(perr(line, format!("unexpected top-level token {form}")));
        };
        match items.first() {
            Some(Sexp::Atom(h, _)) if h == "declare-const" => b.declare(items, line)?,
            Some(Sexp::Atom(h, _)) if h == "assert" => match &items[1..] {
                [body] => b.assert(body, line)?,
                _ => return Err(perr(line, "assert takes one expression")),
            },
            _ => return Err(perr(line, format!("unsupported command {form}"))),
        }
    }
    b.finish()
}

/// The counterexample atom whose negation is `con`, if it has one.
fn negated_atom(con: &OutputConstraint) -> Option<String> {
    let nz: Vec<(usize, f64)> = con.c.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
    match nz.as_slice() {
        [(i, a), (j, b)] if con.d == 0.0 && *a == -*b && a.abs() == 1.0 => {
            let (p, m) = if *a > 0.0 { (i, j) } else { (j, i) };
            Some(format!("(<= Y_{p} Y_{m})"))
        }
        [(i, 1.0)] => Some(format!("(<= Y_{i} {})", -con.d)),
        [(i, -1.0)] => Some(format!("(>= Y_{i} {})", con.d)),
        _ => None,
    }
}

/// Writes `spec` in the canonical form accepted by [`parse_vnnlib`].
pub fn emit_vnnlib(spec: &PropertySpec) -> Result<String, SpecError> {
    let mut out = String::new();
    for i in 0..spec.input_width() {
        let _ = writeln!(out, "(declare-const X_{i} Real)");
    }
    for i in 0..spec.output_width {
        let _ = writeln!(out, "(declare-const Y_{i} Real)");
    }
    out.push('\n');
    for i in 0..spec.input_width() {
        let _ = writeln!(out, "(assert (>= X_{i} {}))", spec.input_box.lower()[i]);
        let _ = writeln!(out, "(assert (<= X_{i} {}))", spec.input_box.upper()[i]);
    }
    if !spec.constraints.is_empty() {
        out.push_str("\n(assert (or\n");
        for (k, c) in spec.constraints.iter().enumerate() {
            let a = negated_atom(c).ok_or(SpecError::NotExpressible(k))?;
            let _ = writeln!(out, "    (and {a})");
        }
        out.push_str("))\n");
    }
    Ok(out)
}
