//! Fourier–Motzkin elimination with strict rows, backtracking of a single
//! eliminated variable, and the brute-force oracle built from them.
//!
//! The oracle is exponential and meant for small systems only. It shares
//! nothing with the solver beyond the row type.

use std::collections::HashMap;

use thiserror::Error;

use crate::numeric::{ExtScalar, Scalar};
use crate::system::{Constraint, Li2System, RowId, SystemError, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BacktrackError {
    #[error("empty interval for x{0}")]
    EmptyInterval(usize),
    #[error("interval for x{0} is a single point")]
    DegenerateIntervalInInteriorMode(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BacktrackMode {
    Any,
    Interior,
    Relint,
}

/// Record of one elimination, enough to lift a solution back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FmStep {
    pub eliminated_var: Var,
    /// rows with a negative coefficient on the variable (`x >= ...`)
    pub lower_rows: Vec<Constraint>,
    /// rows with a positive coefficient (`x <= ...`)
    pub upper_rows: Vec<Constraint>,
    pub produced: Vec<Constraint>,
}

/// Eliminates `x_i`. Every pair of a lower and an upper row yields one new
/// row, strict if either parent is. New rows get fresh row ids above every
/// id in `sys`.
pub fn fm_eliminate(sys: &Li2System, i: Var) -> (Li2System, FmStep) {
    let mut lower_rows = Vec::new();
    let mut upper_rows = Vec::new();
    let mut rest = Vec::new();
    for c in sys.constraints() {
        match c.coeff(i) {
            Some(a) if a.is_positive() => upper_rows.push(c.clone()),
            Some(_) => lower_rows.push(c.clone()),
            None => rest.push(c.clone()),
        }
    }
    let mut next_id = sys.next_row_id();
    let mut produced = Vec::with_capacity(lower_rows.len() * upper_rows.len());
    for l in &lower_rows {
        let al = l.coeff(i).unwrap();
        for u in &upper_rows {
            let au = u.coeff(i).unwrap();
            produced.push(combine(u, &-al, l, au, i, next_id));
            next_id += 1;
        }
    }
    rest.extend(produced.iter().cloned());
    let step = FmStep { eliminated_var: i, lower_rows, upper_rows, produced };
    (sys.with_constraints(rest), step)
}

/// `ku·u + kl·l` with the `x_i` terms cancelling; both multipliers positive.
fn combine(u: &Constraint, ku: &Scalar, l: &Constraint, kl: &Scalar, i: Var, row_id: RowId) -> Constraint {
    let scaled = |c: &Constraint, k: &Scalar| {
        c.terms()
            .iter()
            .filter(|t| t.var != i)
            .map(|t| (t.var, &t.coef * k))
            .collect::<Vec<_>>()
    };
    let mut terms = scaled(u, ku);
    terms.extend(scaled(l, kl));
    let rhs = &(&u.rhs * ku) + &(&l.rhs * kl);
    Constraint::new(row_id, terms, rhs, u.strict || l.strict)
        .expect("eliminating from two-variable rows leaves at most two variables")
        .normalized()
}

/// One end of an interval: `(value, strict)`, or `None` when unbounded.
pub type End = Option<(Scalar, bool)>;

/// Bounds on the eliminated variable implied by its rows under
/// `assignment`; the tightest one on each side, strict winning ties.
pub fn interval(step: &FmStep, assignment: &[Scalar]) -> (End, End) {
    let i = step.eliminated_var;
    let bound = |c: &Constraint| {
        let a = c.coeff(i).unwrap();
        let others: Scalar = c
            .terms()
            .iter()
            .filter(|t| t.var != i)
            .map(|t| &t.coef * &assignment[t.var])
            .sum();
        (&(&c.rhs - &others) / a, c.strict)
    };
    let lo = step.lower_rows.iter().map(bound).max_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let hi = step.upper_rows.iter().map(bound).min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    (lo, hi)
}

/// Picks a value for the eliminated variable given values for all others.
pub fn backtrack_value(step: &FmStep, assignment: &[Scalar], mode: BacktrackMode) -> Result<Scalar, BacktrackError> {
    let (lo, hi) = interval(step, assignment);
    pick(step.eliminated_var, lo, hi, mode)
}

fn pick(
    i: Var,
    lo: Option<(Scalar, bool)>,
    hi: Option<(Scalar, bool)>,
    mode: BacktrackMode,
) -> Result<Scalar, BacktrackError> {
    match (lo, hi) {
        (Some((l, ls)), Some((h, hs))) => {
            if l > h || (l == h && (ls || hs)) {
                Err(BacktrackError::EmptyInterval(i))
            } else if l == h {
                match mode {
                    BacktrackMode::Interior => Err(BacktrackError::DegenerateIntervalInInteriorMode(i)),
                    _ => Ok(l),
                }
            } else {
                Ok(l.midpoint(&h))
            }
        }
        (Some((l, _)), None) => Ok(l + Scalar::one()),
        (None, Some((h, _))) => Ok(h - Scalar::one()),
        (None, None) => Ok(Scalar::zero()),
    }
}

/// Drops trivially true rows and, among rows with the same left-hand side
/// after normalization, keeps only the tightest one.
fn prune(sys: &Li2System) -> Li2System {
    let mut best: HashMap<Vec<Term>, Constraint> = HashMap::new();
    let mut order = Vec::new();
    let mut contradictions = Vec::new();
    for c in sys.constraints() {
        if c.is_trivial() {
            if c.is_contradiction() {
                contradictions.push(c.clone());
            }
            continue;
        }
        let n = c.normalized();
        let key = n.terms().to_vec();
        match best.get_mut(&key) {
            Some(old) => {
                if n.rhs < old.rhs || (n.rhs == old.rhs && n.strict && !old.strict) {
                    *old = n;
                }
            }
            None => {
                order.push(key.clone());
                best.insert(key, n);
            }
        }
    }
    let mut rows: Vec<Constraint> = order.into_iter().map(|k| best.remove(&k).unwrap()).collect();
    rows.extend(contradictions);
    sys.with_constraints(rows)
}

fn has_contradiction(sys: &Li2System) -> bool {
    sys.constraints().iter().any(Constraint::is_contradiction)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleSolution {
    Feasible(Vec<Scalar>),
    Infeasible,
}

impl OracleSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self, OracleSolution::Feasible(_))
    }
}

/// Eliminates every variable in order and lifts a solution back.
pub fn oracle_solve(sys: &Li2System) -> OracleSolution {
    let mut cur = prune(sys);
    let mut steps = Vec::with_capacity(sys.dim());
    for v in 0..sys.dim() {
        if has_contradiction(&cur) {
            return OracleSolution::Infeasible;
        }
        let (next, step) = fm_eliminate(&cur, v);
        cur = prune(&next);
        steps.push(step);
    }
    if has_contradiction(&cur) {
        return OracleSolution::Infeasible;
    }
    let mut point = vec![Scalar::zero(); sys.dim()];
    for step in steps.iter().rev() {
        point[step.eliminated_var] =
            backtrack_value(step, &point, BacktrackMode::Any).expect("a consistent projection lifts");
    }
    OracleSolution::Feasible(point)
}

/// Exact `[min, max]` of `x_i` over the solutions, or `None` if there are
/// none.
pub fn oracle_range(sys: &Li2System, i: Var) -> Result<Option<(ExtScalar, ExtScalar)>, SystemError> {
    sys.neighbors(i)?;
    let mut cur = prune(sys);
    for v in (0..sys.dim()).filter(|&v| v != i) {
        if has_contradiction(&cur) {
            return Ok(None);
        }
        cur = prune(&fm_eliminate(&cur, v).0);
    }
    if has_contradiction(&cur) {
        return Ok(None);
    }
    let mut lo: (ExtScalar, bool) = (ExtScalar::NegInf, false);
    let mut hi: (ExtScalar, bool) = (ExtScalar::PosInf, false);
    for c in cur.constraints() {
        let a = c.coeff(i).unwrap();
        let b = ExtScalar::Finite(&c.rhs / a);
        if a.is_positive() {
            if b < hi.0 || (b == hi.0 && c.strict) {
                hi = (b, c.strict);
            }
        } else if b > lo.0 || (b == lo.0 && c.strict) {
            lo = (b, c.strict);
        }
    }
    if lo.0 > hi.0 || (lo.0 == hi.0 && (lo.1 || hi.1)) {
        return Ok(None);
    }
    Ok(Some((lo.0, hi.0)))
}

fn others_plus(sys: &Li2System, row: RowId, replacement: Constraint) -> Li2System {
    let mut rows: Vec<Constraint> = sys.constraints().iter().filter(|c| c.row_id != row).cloned().collect();
    rows.push(replacement);
    sys.with_constraints(rows)
}

/// Whether removing `row` leaves the solution set unchanged: the other rows
/// together with the strict complement of `row` have no solution.
pub fn oracle_redundant(sys: &Li2System, row: RowId) -> Result<bool, SystemError> {
    let c = sys.row(row)?;
    Ok(!oracle_solve(&others_plus(sys, row, c.complement())).is_feasible())
}

/// Whether every solution satisfies `row` with equality.
pub fn oracle_implicit_equality(sys: &Li2System, row: RowId) -> Result<bool, SystemError> {
    let c = sys.row(row)?;
    Ok(!oracle_solve(&others_plus(sys, row, c.with_strict(true))).is_feasible())
}

/// Whether some point satisfies every row strictly.
pub fn oracle_full_dimensional(sys: &Li2System) -> bool {
    let strict = sys.constraints().iter().map(|c| c.with_strict(true)).collect();
    oracle_solve(&sys.with_constraints(strict)).is_feasible()
}

/// `d` minus the rank of the implicit equalities, or `None` if infeasible.
pub fn oracle_dimension(sys: &Li2System) -> Option<usize> {
    if !oracle_solve(sys).is_feasible() {
        return None;
    }
    let mut eqs: Vec<Vec<Scalar>> = Vec::new();
    for c in sys.constraints() {
        if oracle_implicit_equality(sys, c.row_id).unwrap() {
            let mut v = vec![Scalar::zero(); sys.dim()];
            for t in c.terms() {
                v[t.var] = t.coef.clone();
            }
            eqs.push(v);
        }
    }
    Some(sys.dim() - rank(eqs))
}

/// Rank by exact Gaussian elimination.
pub fn rank(mut m: Vec<Vec<Scalar>>) -> usize {
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for col in 0..cols {
        let Some(p) = (r..m.len()).find(|&k| !m[k][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][col].clone();
        for k in 0..m.len() {
            if k != r && !m[k][col].is_zero() {
                let f = &m[k][col] / &pivot;
                let (src, dst) = if k < r {
                    let (a, b) = m.split_at_mut(r);
                    (&b[0], &mut a[k])
                } else {
                    let (a, b) = m.split_at_mut(k);
                    (&a[r], &mut b[0])
                };
                for (x, y) in dst[col..].iter_mut().zip(&src[col..]) {
                    *x -= &(&f * y);
                }
            }
        }
        r += 1;
    }
    r
}
