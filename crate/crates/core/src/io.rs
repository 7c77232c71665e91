//! Reading and writing systems.
//!
//! The native format is line based:
//!
//! ```text
//! # comments start with '#'
//! # var 1 price
//! li2 <n> <d>
//! <i> <j> <alpha> <beta> <gamma> [<]
//! ```
//!
//! Each row reads `alpha·x_i + beta·x_j <= gamma` with 1-based indices;
//! `j = 0` (and `beta = 0`) gives a one-variable row and a trailing `<`
//! makes the row strict. Rows get ids in file order.
//!
//! The `.ine` reader accepts the usual H-representation layout, where a row
//! `b a1 .. ad` means `b + a·x >= 0`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::numeric::Scalar;
use crate::system::{Constraint, Li2System, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: row has more than two variables")]
    NotLi2 { line: usize },
}

fn syntax(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, reason: reason.into() }
}

fn number(line: usize, tok: &str) -> Result<Scalar, ParseError> {
    tok.parse().map_err(|_| syntax(line, format!("bad rational `{tok}`")))
}

fn index(line: usize, tok: &str) -> Result<usize, ParseError> {
    tok.parse().map_err(|_| syntax(line, format!("bad index `{tok}`")))
}

pub fn parse_li2(text: &str) -> Result<Li2System, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut names: Vec<(usize, usize, String)> = Vec::new();
    let mut rows = Vec::new();
    let mut last_line = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last_line = line;
        let raw = raw.trim();
        if let Some(comment) = raw.strip_prefix('#') {
            let toks: Vec<&str> = comment.split_whitespace().collect();
            if let ["var", idx, name @ ..] = toks.as_slice() {
                if !name.is_empty() {
                    names.push((line, index(line, idx)?, name.join(" ")));
                }
            }
            continue;
        }
        if raw.is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let Some((n, d)) = header else {
            match toks.as_slice() {
                ["li2", n, d] => header = Some((index(line, n)?, index(line, d)?)),
                _ => return Err(syntax(line, "expected header `li2 <n> <d>`")),
            }
            continue;
        };
        let strict = match toks.len() {
            5 => false,
            6 if toks[5] == "<" => true,
            n if n > 5 => return Err(ParseError::NotLi2 { line }),
            _ => return Err(syntax(line, "expected `<i> <j> <alpha> <beta> <gamma>`")),
        };
        let (i, j) = (index(line, toks[0])?, index(line, toks[1])?);
        let (alpha, beta, gamma) = (number(line, toks[2])?, number(line, toks[3])?, number(line, toks[4])?);
        if i == 0 || i > d || j > d {
            return Err(syntax(line, format!("variable index out of range 1..{d}")));
        }
        if i == j {
            return Err(syntax(line, "both indices name the same variable"));
        }
        let mut terms = vec![(i - 1, alpha)];
        if j == 0 {
            if !beta.is_zero() {
                return Err(syntax(line, "beta must be 0 when j is 0"));
            }
        } else {
            terms.push((j - 1, beta));
        }
        let c = Constraint::new(rows.len(), terms, gamma, strict).map_err(|e| syntax(line, e.to_string()))?;
        if c.arity() == 0 {
            return Err(syntax(line, "row has no nonzero coefficient"));
        }
        rows.push(c);
        if rows.len() > n {
            return Err(syntax(line, format!("more than {n} rows")));
        }
    }
    let (n, d) = header.ok_or_else(|| syntax(last_line.max(1), "missing header"))?;
    if rows.len() != n {
        return Err(syntax(last_line.max(1), format!("expected {n} rows, found {}", rows.len())));
    }
    let mut sys = Li2System::new(d, rows).map_err(|e| syntax(last_line, e.to_string()))?;
    if !names.is_empty() {
        let mut v = vec![String::new(); d];
        for (line, idx, name) in names {
            if idx == 0 || idx > d {
                return Err(syntax(line, format!("variable index out of range 1..{d}")));
            }
            v[idx - 1] = name;
        }
        sys.names = Some(v);
    }
    Ok(sys)
}

/// Writes the native format. Rows are emitted in row id order, so the ids of
/// the reparsed system are `0..n`.
pub fn write_li2(sys: &Li2System) -> String {
    let mut out = String::new();
    if let Some(names) = &sys.names {
        for (v, name) in names.iter().enumerate().filter(|(_, n)| !n.is_empty()) {
            writeln!(out, "# var {} {}", v + 1, name).unwrap();
        }
    }
    writeln!(out, "li2 {} {}", sys.len(), sys.dim()).unwrap();
    let mut rows: Vec<&Constraint> = sys.constraints().iter().collect();
    rows.sort_by_key(|c| c.row_id);
    for c in rows {
        let t = c.terms();
        let (j, beta) = match t.get(1) {
            Some(t1) => (t1.var + 1, t1.coef.clone()),
            None => (0, Scalar::zero()),
        };
        write!(out, "{} {} {} {} {}", t[0].var + 1, j, t[0].coef, beta, c.rhs).unwrap();
        out.push_str(if c.strict { " <\n" } else { "\n" });
    }
    out
}

/// Reads an H-representation. `linearity` rows become two opposite rows;
/// rows without any nonzero `a` entry are skipped when they hold and
/// rejected otherwise.
pub fn parse_ine(text: &str) -> Result<Li2System, ParseError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let mut linearity: Vec<usize> = Vec::new();
    let mut begun = false;
    for (line, l) in lines.by_ref() {
        if l.is_empty() || l.starts_with('*') {
            continue;
        }
        if l == "begin" {
            begun = true;
            break;
        }
        if let Some(rest) = l.strip_prefix("linearity") {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            let count = toks.first().map(|t| index(line, t)).transpose()?.unwrap_or(0);
            linearity = toks[1..].iter().map(|t| index(line, t)).collect::<Result<_, _>>()?;
            if linearity.len() != count {
                return Err(syntax(line, "linearity count does not match"));
            }
        } else if l == "V-representation" {
            return Err(syntax(line, "only H-representations are supported"));
        }
    }
    if !begun {
        return Err(syntax(text.lines().count().max(1), "missing `begin`"));
    }
    let (size_line, size) = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty() && !l.starts_with('*'))
        .ok_or_else(|| syntax(text.lines().count().max(1), "missing size line"))?;
    let (m, cols) = match size.split_whitespace().collect::<Vec<_>>().as_slice() {
        [m, c, ..] => (index(size_line, m)?, index(size_line, c)?),
        _ => return Err(syntax(size_line, "expected `<rows> <columns> <number type>`")),
    };
    if cols == 0 {
        return Err(syntax(size_line, "need at least one column"));
    }
    let d = cols - 1;
    let mut rows = Vec::new();
    let mut seen = 0;
    let mut ended = false;
    for (line, l) in lines.by_ref() {
        if l.is_empty() || l.starts_with('*') {
            continue;
        }
        if l == "end" {
            ended = true;
            break;
        }
        seen += 1;
        let vals: Vec<Scalar> = l.split_whitespace().map(|t| number(line, t)).collect::<Result<_, _>>()?;
        if vals.len() != cols {
            return Err(syntax(line, format!("expected {cols} entries")));
        }
        let terms: Vec<(Var, Scalar)> =
            vals[1..].iter().enumerate().filter(|(_, a)| !a.is_zero()).map(|(v, a)| (v, -a)).collect();
        if terms.len() > 2 {
            return Err(ParseError::NotLi2 { line });
        }
        let b = vals[0].clone();
        if terms.is_empty() {
            if b.is_negative() || (linearity.contains(&seen) && !b.is_zero()) {
                return Err(syntax(line, "row without variables is never satisfied"));
            }
            continue;
        }
        let c = Constraint::new(rows.len(), terms, b, false).map_err(|e| syntax(line, e.to_string()))?;
        if linearity.contains(&seen) {
            let back = c.reversed().with_row_id(rows.len() + 1);
            rows.push(c);
            rows.push(back);
        } else {
            rows.push(c);
        }
    }
    if !ended {
        return Err(syntax(text.lines().count().max(1), "missing `end`"));
    }
    if seen != m {
        return Err(syntax(size_line, format!("expected {m} rows, found {seen}")));
    }
    Li2System::new(d, rows).map_err(|e| syntax(size_line, e.to_string()))
}

/// Writes an H-representation. Strictness is not representable and is
/// dropped.
pub fn write_ine(sys: &Li2System) -> String {
    let mut out = String::from("H-representation\nbegin\n");
    writeln!(out, "{} {} rational", sys.len(), sys.dim() + 1).unwrap();
    let mut rows: Vec<&Constraint> = sys.constraints().iter().collect();
    rows.sort_by_key(|c| c.row_id);
    for c in rows {
        let mut vals = vec![Scalar::zero(); sys.dim()];
        for t in c.terms() {
            vals[t.var] = -&t.coef;
        }
        write!(out, "{}", c.rhs).unwrap();
        for v in vals {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}
