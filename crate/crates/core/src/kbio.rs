//! Line-oriented knowledge-base files.
//!
//! ```text
//! # comment
//! variable e1 false true
//! variable c  false true
//! p e1=false c=true 0.25
//! ```
//!
//! Declaration order of `variable` lines fixes the table layout. Each `p`
//! line names a total assignment (in any variable order) and a decimal
//! probability. Cells without a `p` line default to zero.

use std::collections::HashMap;
use std::fmt;

use crate::error::Result;
use crate::table::{strides, Assignment, JointTable, VariableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    /// 1-based line in the parsed text.
    pub line: usize,
}

impl Diagnostic {
    fn error(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            line,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.severity.as_str(), self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellEntry {
    pub assignment: Assignment,
    pub probability: f64,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KbDocument {
    pub variables: Vec<VariableSpec>,
    /// Source line of each declaration, parallel to `variables`.
    pub variable_lines: Vec<usize>,
    pub cells: Vec<CellEntry>,
}

impl KbDocument {
    /// Sum of the listed probabilities, before any renormalization.
    pub fn mass(&self) -> f64 {
        self.cells.iter().map(|c| c.probability).sum()
    }

    pub fn cell_count(&self) -> usize {
        self.variables.iter().map(VariableSpec::cardinality).product()
    }

    fn flat_index(&self, assignment: &Assignment) -> Option<usize> {
        let cards: Vec<usize> = self.variables.iter().map(VariableSpec::cardinality).collect();
        let st = strides(&cards);
        self.variables.iter().zip(st).try_fold(0, |acc, (v, stride)| {
            let s = v.state_index(assignment.get(v.name())?).ok()?;
            Some(acc + s * stride)
        })
    }
}

fn valid_token(token: &str) -> bool {
    !token.is_empty() && !token.contains(['=', ':', ',', '#'])
}

/// Decimal literals only: digits, one optional point, optional exponent.
fn parse_probability(token: &str) -> std::result::Result<f64, String> {
    let (mantissa, exponent) = match token.find(['e', 'E']) {
        Some(i) => (&token[..i], Some(&token[i + 1..])),
        None => (token, None),
    };
    let mantissa = mantissa.strip_prefix('+').unwrap_or(mantissa);
    let digits_ok = mantissa.chars().filter(|c| *c == '.').count() <= 1
        && mantissa.chars().any(|c| c.is_ascii_digit())
        && mantissa.chars().all(|c| c.is_ascii_digit() || c == '.');
    let exp_ok = exponent.map_or(true, |e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && e.chars().all(|c| c.is_ascii_digit())
    });
    if token.starts_with('-') {
        return Err(format!("negative probability '{token}'"));
    }
    if !(digits_ok && exp_ok) {
        return Err(format!("'{token}' is not a decimal probability"));
    }
    token
        .parse::<f64>()
        .map_err(|e| format!("'{token}': {e}"))
}

/// Parses a knowledge-base file. Problems are reported as diagnostics; the
/// returned document holds whatever was read successfully.
pub fn parse_kb(text: &str) -> (KbDocument, Vec<Diagnostic>) {
    let mut doc = KbDocument::default();
    let mut diags = Vec::new();
    let mut seen_cells: HashMap<usize, usize> = HashMap::new();
    let mut last_line = 0;
    let mut cells_started = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "variable" => {
                if cells_started {
                    diags.push(Diagnostic::error(line, "variable declared after cell lines"));
                    continue;
                }
                let Some(&name) = tokens.get(1) else {
                    diags.push(Diagnostic::error(line, "variable declaration needs a name"));
                    continue;
                };
                if let Some(bad) = tokens[1..].iter().find(|t| !valid_token(t)) {
                    diags.push(Diagnostic::error(
                        line,
                        format!("invalid name '{bad}' (may not contain '=', ':' or ',')"),
                    ));
                    continue;
                }
                if doc.variables.iter().any(|v| v.name() == name) {
                    diags.push(Diagnostic::error(line, format!("duplicate variable '{name}'")));
                    continue;
                }
                match VariableSpec::new(name, tokens[2..].iter().copied()) {
                    Ok(spec) => {
                        doc.variables.push(spec);
                        doc.variable_lines.push(line);
                    }
                    Err(e) => diags.push(Diagnostic::error(line, e.to_string())),
                }
            }
            "p" => {
                cells_started = true;
                if doc.variables.is_empty() {
                    diags.push(Diagnostic::error(line, "cell line before any variable declaration"));
                    continue;
                }
                if tokens.len() < 2 {
                    diags.push(Diagnostic::error(line, "cell line needs assignments and a probability"));
                    continue;
                }
                let (value, assigns) = tokens[1..].split_last().expect("nonempty");
                match parse_cell(&doc, assigns, value) {
                    Ok((assignment, probability)) => {
                        let flat = doc.flat_index(&assignment).expect("validated assignment");
                        if let Some(&first) = seen_cells.get(&flat) {
                            diags.push(Diagnostic::error(
                                line,
                                format!("duplicate cell, first given on line {first}"),
                            ));
                            continue;
                        }
                        seen_cells.insert(flat, line);
                        doc.cells.push(CellEntry {
                            assignment,
                            probability,
                            line,
                        });
                    }
                    Err(message) => diags.push(Diagnostic::error(line, message)),
                }
            }
            other => diags.push(Diagnostic::error(line, format!("unknown directive '{other}'"))),
        }
    }

    if doc.variables.is_empty() {
        diags.push(Diagnostic::error(last_line.max(1), "no variables declared"));
    } else if !diags.iter().any(Diagnostic::is_error) {
        let total = doc.cell_count();
        let missing = total - doc.cells.len();
        if missing > 0 {
            diags.push(Diagnostic {
                severity: Severity::Warning,
                message: format!("{missing} of {total} cells not listed; treated as 0"),
                line: *doc.variable_lines.last().expect("declared"),
            });
        }
    }
    (doc, diags)
}

fn parse_cell(doc: &KbDocument, assigns: &[&str], value: &str) -> std::result::Result<(Assignment, f64), String> {
    let mut assignment = Assignment::new();
    for token in assigns {
        let (var, state) = token
            .split_once('=')
            .ok_or_else(|| format!("expected <variable>=<state>, got '{token}'"))?;
        let spec = doc
            .variables
            .iter()
            .find(|v| v.name() == var)
            .ok_or_else(|| format!("unknown variable '{var}'"))?;
        if spec.state_index(state).is_err() {
            return Err(format!("unknown state '{state}' for variable '{var}'"));
        }
        if assignment.insert(var, state).is_some() {
            return Err(format!("variable '{var}' assigned twice"));
        }
    }
    if let Some(missing) = doc.variables.iter().find(|v| assignment.get(v.name()).is_none()) {
        return Err(format!("cell line does not assign variable '{}'", missing.name()));
    }
    Ok((assignment, parse_probability(value)?))
}

/// Builds the table described by an error-free document.
pub fn to_table(doc: &KbDocument) -> Result<JointTable> {
    let mut cells = vec![0.0; doc.cell_count()];
    for entry in &doc.cells {
        if let Some(flat) = doc.flat_index(&entry.assignment) {
            cells[flat] = entry.probability;
        }
    }
    JointTable::new(doc.variables.clone(), cells)
}

/// Writes `p` with 17 significant digits, dropping trailing zeros.
fn format_probability(p: f64) -> String {
    if p == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{p:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let out = if (-6..=16).contains(&exp) {
        if exp < 0 {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        } else {
            let (int, frac) = digits.split_at(exp as usize + 1);
            format!("{int}.{frac}")
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{exp}");
    };
    out.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Serializes a table in canonical layout order.
pub fn serialize_kb(t: &JointTable) -> String {
    let mut out = String::new();
    for v in t.variables() {
        out.push_str("variable ");
        out.push_str(v.name());
        for s in v.states() {
            out.push(' ');
            out.push_str(s);
        }
        out.push('\n');
    }
    for (flat, &p) in t.cells().iter().enumerate() {
        let cell = t.assignment_at(flat);
        out.push('p');
        for v in t.variables() {
            out.push(' ');
            out.push_str(v.name());
            out.push('=');
            out.push_str(cell.get(v.name()).unwrap_or_default());
        }
        out.push(' ');
        out.push_str(&format_probability(p));
        out.push('\n');
    }
    out
}
