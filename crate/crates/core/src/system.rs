//! The LI(2) data model.
//!
//! Variables are 0-based indices `0..d`; row ids are stable labels that
//! survive every transformation, so reports always speak about input rows.
//! File formats and the CLI present both 1-based.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use arrayvec::ArrayVec;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::Scalar;

pub type Var = usize;
pub type RowId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("variable index {var} out of range for {d} variables")]
    IndexOutOfRange { var: Var, d: usize },
    #[error("row id {0} appears more than once")]
    DuplicateRowId(RowId),
    #[error("row {row} has more than two variables with nonzero coefficients")]
    TooManyVariables { row: RowId },
    #[error("malformed substitution: {0}")]
    MalformedSubstitution(String),
    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown row id {0}")]
    UnknownRow(RowId),
    #[error("row {0} has no variable with a nonzero coefficient")]
    EmptyRow(RowId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Term {
    pub var: Var,
    pub coef: Scalar,
}

/// `Σ coef·x_var ≤ rhs` (or `<` when `strict`) with at most two terms.
///
/// Terms are sorted by variable and carry nonzero coefficients. A constraint
/// without terms is the trivial row `0 ≤ rhs`; it is kept so that row ids
/// stay accounted for after substitution.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub row_id: RowId,
    terms: ArrayVec<Term, 2>,
    pub rhs: Scalar,
    pub strict: bool,
}

impl Constraint {
    /// Builds a row from arbitrary `(var, coef)` pairs, merging repeated
    /// variables and dropping zero coefficients.
    pub fn new(
        row_id: RowId,
        terms: impl IntoIterator<Item = (Var, Scalar)>,
        rhs: Scalar,
        strict: bool,
    ) -> Result<Self, SystemError> {
        let mut merged: BTreeMap<Var, Scalar> = BTreeMap::new();
        for (v, c) in terms {
            *merged.entry(v).or_default() += &c;
        }
        let mut out = ArrayVec::new();
        for (var, coef) in merged.into_iter().filter(|(_, c)| !c.is_zero()) {
            out.try_push(Term { var, coef })
                .map_err(|_| SystemError::TooManyVariables { row: row_id })?;
        }
        Ok(Constraint { row_id, terms: out, rhs, strict })
    }

    pub fn unary(row_id: RowId, var: Var, coef: Scalar, rhs: Scalar) -> Self {
        Self::new(row_id, [(var, coef)], rhs, false).expect("one term")
    }

    /// Panics if `i == j` with cancelling coefficients is not intended; use
    /// [`Constraint::new`] for untrusted input.
    pub fn binary(row_id: RowId, i: Var, alpha: Scalar, j: Var, beta: Scalar, rhs: Scalar) -> Self {
        Self::new(row_id, [(i, alpha), (j, beta)], rhs, false).expect("two terms")
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn arity(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, var: Var) -> Option<&Scalar> {
        self.terms.iter().find(|t| t.var == var).map(|t| &t.coef)
    }

    pub fn mentions(&self, var: Var) -> bool {
        self.terms.iter().any(|t| t.var == var)
    }

    /// The other variable of a two-variable row that mentions `var`.
    pub fn partner(&self, var: Var) -> Option<Var> {
        match self.terms.as_slice() {
            [a, b] if a.var == var => Some(b.var),
            [a, b] if b.var == var => Some(a.var),
            _ => None,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.terms.is_empty()
    }

    /// A term-free row that no point satisfies.
    pub fn is_contradiction(&self) -> bool {
        self.terms.is_empty() && (self.rhs.is_negative() || (self.strict && self.rhs.is_zero()))
    }

    pub fn lhs(&self, point: &[Scalar]) -> Scalar {
        self.terms.iter().map(|t| &t.coef * &point[t.var]).sum()
    }

    /// Slack `rhs - lhs(point)`.
    pub fn slack(&self, point: &[Scalar]) -> Scalar {
        &self.rhs - &self.lhs(point)
    }

    /// Satisfied, honoring the row's own strictness.
    pub fn holds(&self, point: &[Scalar]) -> bool {
        let s = self.slack(point);
        if self.strict {
            s.is_positive()
        } else {
            !s.is_negative()
        }
    }

    /// `-a·x ≤ -b`: the closed opposite halfspace.
    pub fn reversed(&self) -> Constraint {
        Constraint {
            row_id: self.row_id,
            terms: self.terms.iter().map(|t| Term { var: t.var, coef: -&t.coef }).collect(),
            rhs: -&self.rhs,
            strict: false,
        }
    }

    /// `-a·x < -b`: the complement of the row.
    pub fn complement(&self) -> Constraint {
        Constraint { strict: !self.strict, ..self.reversed() }
    }

    pub fn with_strict(&self, strict: bool) -> Constraint {
        Constraint { strict, ..self.clone() }
    }

    pub fn with_row_id(&self, row_id: RowId) -> Constraint {
        Constraint { row_id, ..self.clone() }
    }

    /// Multiplies both sides by a positive scalar.
    pub fn scaled(&self, k: &Scalar) -> Constraint {
        debug_assert!(k.is_positive());
        Constraint {
            row_id: self.row_id,
            terms: self.terms.iter().map(|t| Term { var: t.var, coef: &t.coef * k }).collect(),
            rhs: &self.rhs * k,
            strict: self.strict,
        }
    }

    /// Scales so the first coefficient has absolute value 1.
    pub fn normalized(&self) -> Constraint {
        match self.terms.first() {
            Some(t) => self.scaled(&t.coef.abs().recip()),
            None => self.clone(),
        }
    }

    fn max_var(&self) -> Option<Var> {
        self.terms.last().map(|t| t.var)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            f.write_str("0")?;
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}·x{}", t.coef, t.var + 1)?;
        }
        let op = if self.strict { "<" } else { "<=" };
        write!(f, " {op} {}", self.rhs)
    }
}

/// `target = p + q·x_in_terms_of`, or `target = p` without a second variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSubst {
    pub target: Var,
    pub in_terms_of: Option<Var>,
    pub p: Scalar,
    pub q: Scalar,
}

impl AffineSubst {
    pub fn constant(target: Var, value: Scalar) -> Self {
        AffineSubst { target, in_terms_of: None, p: value, q: Scalar::zero() }
    }

    pub fn affine(target: Var, other: Var, p: Scalar, q: Scalar) -> Self {
        AffineSubst { target, in_terms_of: Some(other), p, q }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckMode {
    /// every row satisfied
    Weak,
    /// every row satisfied strictly
    Strict,
    /// the listed rows tight, all others strict
    Relative(BTreeSet<RowId>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub violated: Vec<RowId>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violated.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Li2System {
    d: usize,
    constraints: Vec<Constraint>,
    pub names: Option<Vec<String>>,
}

impl Li2System {
    pub fn new(d: usize, constraints: Vec<Constraint>) -> Result<Self, SystemError> {
        let mut seen = BTreeSet::new();
        for c in &constraints {
            match c.max_var() {
                Some(v) if v >= d => return Err(SystemError::IndexOutOfRange { var: v, d }),
                None => return Err(SystemError::EmptyRow(c.row_id)),
                _ => {}
            }
            if !seen.insert(c.row_id) {
                return Err(SystemError::DuplicateRowId(c.row_id));
            }
        }
        Ok(Li2System { d, constraints, names: None })
    }

    /// Rows are numbered `0..n` in the given order.
    pub fn from_rows(
        d: usize,
        rows: impl IntoIterator<Item = (Vec<(Var, Scalar)>, Scalar)>,
    ) -> Result<Self, SystemError> {
        let constraints = rows
            .into_iter()
            .enumerate()
            .map(|(k, (terms, rhs))| Constraint::new(k, terms, rhs, false))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(d, constraints)
    }

    /// Same variable space, different rows; skips validation of row ids
    /// already known to be unique.
    pub(crate) fn with_constraints(&self, constraints: Vec<Constraint>) -> Self {
        debug_assert!(constraints.iter().all(|c| c.max_var().is_none_or(|v| v < self.d)));
        Li2System { d: self.d, constraints, names: self.names.clone() }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn into_constraints(self) -> Vec<Constraint> {
        self.constraints
    }

    pub fn row_ids(&self) -> Vec<RowId> {
        self.constraints.iter().map(|c| c.row_id).collect()
    }

    pub fn row(&self, id: RowId) -> Result<&Constraint, SystemError> {
        self.constraints
            .iter()
            .find(|c| c.row_id == id)
            .ok_or(SystemError::UnknownRow(id))
    }

    /// Smallest row id not in use.
    pub fn next_row_id(&self) -> RowId {
        self.constraints.iter().map(|c| c.row_id + 1).max().unwrap_or(0)
    }

    pub fn var_name(&self, v: Var) -> String {
        self.names
            .as_ref()
            .and_then(|n| n.get(v))
            .filter(|s| !s.is_empty())
            .cloned()
            .unwrap_or_else(|| format!("x{}", v + 1))
    }

    fn check_var(&self, v: Var) -> Result<(), SystemError> {
        if v < self.d {
            Ok(())
        } else {
            Err(SystemError::IndexOutOfRange { var: v, d: self.d })
        }
    }

    /// Variables sharing a two-variable row with `i`.
    pub fn neighbors(&self, i: Var) -> Result<BTreeSet<Var>, SystemError> {
        self.check_var(i)?;
        Ok(self.constraints.iter().filter_map(|c| c.partner(i)).collect())
    }

    /// Replaces the target variable everywhere. Rows whose terms cancel are
    /// kept as `0 ≤ rhs` rows.
    pub fn substitute(&self, s: &AffineSubst) -> Result<Li2System, SystemError> {
        let bad = |m: String| SystemError::MalformedSubstitution(m);
        self.check_var(s.target).map_err(|e| bad(e.to_string()))?;
        if let Some(o) = s.in_terms_of {
            self.check_var(o).map_err(|e| bad(e.to_string()))?;
            if o == s.target {
                return Err(bad(format!("x{} expressed in terms of itself", o + 1)));
            }
        }
        let constraints = self
            .constraints
            .iter()
            .map(|c| substitute_row(c, s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.with_constraints(constraints))
    }

    pub fn check_point(&self, point: &[Scalar], mode: &CheckMode) -> Result<Verdict, SystemError> {
        if point.len() != self.d {
            return Err(SystemError::DimensionMismatch { expected: self.d, got: point.len() });
        }
        let violated = self
            .constraints
            .iter()
            .filter(|c| {
                let slack = c.slack(point);
                match mode {
                    CheckMode::Weak => !c.holds(point),
                    CheckMode::Strict => !slack.is_positive(),
                    CheckMode::Relative(tight) => {
                        if tight.contains(&c.row_id) {
                            !slack.is_zero()
                        } else {
                            !slack.is_positive()
                        }
                    }
                }
            })
            .map(|c| c.row_id)
            .collect();
        Ok(Verdict { violated })
    }

    /// Scales every row to a unit lead coefficient and drops rows that
    /// coincide after scaling; the returned map sends each dropped row id to
    /// the (lowest) kept id.
    pub fn normalize_dedupe(&self) -> (Li2System, BTreeMap<RowId, RowId>) {
        let mut order: Vec<&Constraint> = self.constraints.iter().collect();
        order.sort_by_key(|c| c.row_id);
        let mut seen: HashMap<(ArrayVec<Term, 2>, Scalar, bool), RowId> = HashMap::new();
        let mut kept = Vec::with_capacity(order.len());
        let mut dups = BTreeMap::new();
        for c in order {
            let n = c.normalized();
            let key = (n.terms.clone(), n.rhs.clone(), n.strict);
            match seen.get(&key) {
                Some(&first) => {
                    dups.insert(c.row_id, first);
                }
                None => {
                    seen.insert(key, c.row_id);
                    kept.push(n);
                }
            }
        }
        (self.with_constraints(kept), dups)
    }

    /// Keeps only the rows whose ids satisfy `keep`, in their current order.
    pub fn filter_rows(&self, mut keep: impl FnMut(RowId) -> bool) -> Li2System {
        self.with_constraints(
            self.constraints.iter().filter(|c| keep(c.row_id)).cloned().collect(),
        )
    }
}

fn substitute_row(c: &Constraint, s: &AffineSubst) -> Result<Constraint, SystemError> {
    let Some(alpha) = c.coeff(s.target) else {
        return Ok(c.clone());
    };
    let mut terms: Vec<(Var, Scalar)> = c
        .terms
        .iter()
        .filter(|t| t.var != s.target)
        .map(|t| (t.var, t.coef.clone()))
        .collect();
    if let Some(o) = s.in_terms_of {
        terms.push((o, alpha * &s.q));
    }
    let rhs = &c.rhs - &(alpha * &s.p);
    Constraint::new(c.row_id, terms, rhs, c.strict)
}

impl fmt::Display for Li2System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            writeln!(f, "r{}: {}", c.row_id + 1, c)?;
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn pt(v: &[&str]) -> Vec<Scalar> {
        v.iter().map(|s| q(s)).collect()
    }

    #[test]
    fn neighbors_examples() {
        assert_eq!(square().neighbors(0).unwrap(), BTreeSet::from([1]));
        let no_coupling = square().filter_rows(|r| r != 4);
        assert!(no_coupling.neighbors(0).unwrap().is_empty());
        assert_eq!(chain().neighbors(1).unwrap(), BTreeSet::from([0, 2]));
        assert_eq!(
            square().neighbors(2),
            Err(SystemError::IndexOutOfRange { var: 2, d: 2 })
        );
    }

    #[test]
    fn constraint_invariants() {
        let c = Constraint::new(0, [(1, q("2")), (0, q("1")), (1, q("-2"))], q("1"), false).unwrap();
        assert_eq!(c.arity(), 1);
        assert_eq!(c.terms()[0].var, 0);
        assert_eq!(
            Constraint::new(3, [(0, q("1")), (1, q("1")), (2, q("1"))], q("0"), false),
            Err(SystemError::TooManyVariables { row: 3 })
        );
        let c = Constraint::binary(0, 2, q("1"), 0, q("3"), q("1"));
        assert_eq!((c.terms()[0].var, c.terms()[1].var), (0, 2));
        assert!(Li2System::new(2, vec![Constraint::unary(0, 2, q("1"), q("0"))]).is_err());
        assert_eq!(
            Li2System::new(3, vec![c.clone(), c]).unwrap_err(),
            SystemError::DuplicateRowId(0)
        );
    }

    #[test]
    fn substitute_chain_constant() {
        let s = chain().substitute(&AffineSubst::constant(2, q("1"))).unwrap();
        let rows = s.constraints();
        assert_eq!(rows[0], chain().constraints()[0]);
        assert_eq!(rows[1], Constraint::unary(1, 1, q("1"), q("5/4")));
        assert!(rows[2].is_trivial() && !rows[2].is_contradiction());
        assert_eq!(rows[2].rhs, q("0"));
        assert!(!s.neighbors(1).unwrap().contains(&2));
    }

    #[test]
    fn substitute_square_zero() {
        let s = square().substitute(&AffineSubst::constant(0, q("0"))).unwrap();
        let rows = s.constraints();
        assert!(rows[0].is_trivial() && rows[0].rhs == q("1"));
        assert!(rows[1].is_trivial() && rows[1].rhs == q("0") && !rows[1].is_contradiction());
        assert_eq!(rows[4], Constraint::unary(4, 1, q("1"), q("3")));
        let bad = square().substitute(&AffineSubst::constant(0, q("2"))).unwrap();
        assert!(bad.constraints()[0].is_contradiction());
    }

    #[test]
    fn substitute_affine_merges_terms() {
        let s = sys(2, &[(&[(1, "1"), (2, "1")], "3")]);
        let out = s.substitute(&AffineSubst::affine(1, 0, q("0"), q("1"))).unwrap();
        assert_eq!(out.constraints()[0], Constraint::unary(0, 0, q("2"), q("3")));
        assert!(matches!(
            s.substitute(&AffineSubst::affine(1, 1, q("0"), q("1"))),
            Err(SystemError::MalformedSubstitution(_))
        ));
    }

    #[test]
    fn check_point_modes() {
        let sq = square();
        assert!(sq.check_point(&pt(&["1/2", "1/2"]), &CheckMode::Strict).unwrap().passed());
        let v = sq.check_point(&pt(&["1", "1/2"]), &CheckMode::Strict).unwrap();
        assert_eq!(v.violated, vec![0]);
        assert!(sq.check_point(&pt(&["1", "1/2"]), &CheckMode::Weak).unwrap().passed());
        let rel = CheckMode::Relative(BTreeSet::from([0, 1]));
        assert!(pinned().check_point(&pt(&["0", "1/2"]), &rel).unwrap().passed());
        assert_eq!(
            sq.check_point(&pt(&["1"]), &CheckMode::Weak),
            Err(SystemError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn normalize_dedupe_examples() {
        let s = sys(1, &[(&[(1, "1")], "1"), (&[(1, "2")], "2")]);
        let (kept, dups) = s.normalize_dedupe();
        assert_eq!(kept.row_ids(), vec![0]);
        assert_eq!(dups, BTreeMap::from([(1, 0)]));

        let s = sys(1, &[(&[(1, "1")], "1"), (&[(1, "2")], "3")]);
        assert_eq!(s.normalize_dedupe().0.len(), 2);

        let s = sys(2, &[(&[(1, "1"), (2, "1")], "1"), (&[(1, "-1"), (2, "-1")], "-1")]);
        assert_eq!(s.normalize_dedupe().0.len(), 2);
    }

    #[test]
    fn normalize_dedupe_is_idempotent() {
        let s = sys(
            2,
            &[(&[(1, "3"), (2, "-1")], "6"), (&[(1, "1"), (2, "-1/3")], "2"), (&[(2, "-2")], "4")],
        );
        let (once, _) = s.normalize_dedupe();
        let (twice, dups) = once.normalize_dedupe();
        assert_eq!(once, twice);
        assert!(dups.is_empty());
    }
}
