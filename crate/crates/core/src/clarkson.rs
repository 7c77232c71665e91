//! Output-sensitive redundancy detection.
//!
//! [`clarkson_core`] grows the set `S` of nonredundant rows one ray shot at a
//! time, so every feasibility subproblem has at most `|S| + 1` rows.
//! [`detect_redundancies`] first projects a lower-dimensional system onto its
//! affine hull and then runs the core loop there.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::hochbaum_naor::{hn_solve, HnResult, Mode};
use crate::numeric::{cmp_ratio, EpsPoint, EpsPoly, EpsRatio, Scalar};
use crate::system::{CheckMode, Constraint, Li2System, RowId, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClarksonError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("rows {} and {} are hit at the same parameter", .0 + 1, .1 + 1)]
    AmbiguousHit(RowId, RowId),
    #[error("the ray leaves no row")]
    NoHit,
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RayHit {
    pub row: RowId,
    pub tau: EpsRatio,
}

/// `z + (ε, ε², …, ε^d)`.
pub fn perturb(z: &[Scalar]) -> EpsPoint {
    z.iter()
        .enumerate()
        .map(|(c, v)| &EpsPoly::constant(v.clone()) + &EpsPoly::monomial(Scalar::one(), c + 1))
        .collect()
}

fn dot(terms: &[Term], p: &[EpsPoly]) -> EpsPoly {
    terms.iter().fold(EpsPoly::zero(), |acc, t| &acc + &p[t.var].scale(&t.coef))
}

/// First row crossed by the ray from `zeps` towards `target`.
pub fn ray_shoot(sys: &Li2System, zeps: &[EpsPoly], target: &[Scalar]) -> Result<RayHit, ClarksonError> {
    let dir: Vec<EpsPoly> = zeps.iter().zip(target).map(|(z, t)| &EpsPoly::constant(t.clone()) - z).collect();
    let mut best: Option<RayHit> = None;
    let mut tied: Option<RowId> = None;
    for c in sys.constraints() {
        let speed = dot(c.terms(), &dir);
        if speed.signum() != Ordering::Greater {
            continue;
        }
        let gap = &EpsPoly::constant(c.rhs.clone()) - &dot(c.terms(), zeps);
        let tau = EpsRatio::new(gap, speed).expect("positive denominator");
        match best.as_ref().map(|b| cmp_ratio(&tau, &b.tau)) {
            None | Some(Ordering::Less) => {
                best = Some(RayHit { row: c.row_id, tau });
                tied = None;
            }
            Some(Ordering::Equal) => tied = Some(c.row_id),
            Some(Ordering::Greater) => {}
        }
    }
    let hit = best.ok_or(ClarksonError::NoHit)?;
    match tied {
        Some(other) => Err(ClarksonError::AmbiguousHit(hit.row.min(other), hit.row.max(other))),
        None => Ok(hit),
    }
}

/// State after one pass of the core loop.
#[derive(Clone, Debug)]
pub struct Iteration<'a> {
    pub picked: RowId,
    pub subproblem_rows: usize,
    pub nonredundant: &'a BTreeSet<RowId>,
    pub redundant: &'a BTreeSet<RowId>,
}

/// Splits the rows of a full-dimensional, deduplicated system into
/// nonredundant and redundant ones. `z` must satisfy every row strictly.
pub fn clarkson_core(sys: &Li2System, z: &[Scalar]) -> Result<(BTreeSet<RowId>, BTreeSet<RowId>), ClarksonError> {
    clarkson_core_observed(sys, z, |_| {})
}

/// [`clarkson_core`], calling `observe` after every iteration.
pub fn clarkson_core_observed(
    sys: &Li2System,
    z: &[Scalar],
    mut observe: impl FnMut(&Iteration<'_>),
) -> Result<(BTreeSet<RowId>, BTreeSet<RowId>), ClarksonError> {
    let verdict = sys
        .check_point(z, &CheckMode::Strict)
        .map_err(|e| ClarksonError::PreconditionViolated(e.to_string()))?;
    if !verdict.passed() {
        return Err(ClarksonError::PreconditionViolated("z is not an interior point".into()));
    }
    let zeps = perturb(z);
    let mut rows: Vec<&Constraint> = sys.constraints().iter().collect();
    rows.sort_by_key(|c| c.row_id);
    let mut s: BTreeSet<RowId> = BTreeSet::new();
    let mut r: BTreeSet<RowId> = BTreeSet::new();
    let mut next = 0;
    while next < rows.len() {
        let row = rows[next];
        if s.contains(&row.row_id) {
            next += 1;
            continue;
        }
        let mut sub: Vec<Constraint> = rows.iter().filter(|c| s.contains(&c.row_id)).map(|c| (*c).clone()).collect();
        sub.push(row.reversed());
        let subproblem_rows = sub.len();
        let sub = Li2System::new(sys.dim(), sub).map_err(|e| ClarksonError::Internal(e.to_string()))?;
        match hn_solve(&sub, Mode::Interior) {
            HnResult::FullDim(x) => {
                let hit = ray_shoot(sys, &zeps, &x)?;
                if !s.insert(hit.row) {
                    return Err(ClarksonError::Internal(format!("row {} hit twice", hit.row + 1)));
                }
            }
            HnResult::NotFullDim | HnResult::Infeasible => {
                r.insert(row.row_id);
                next += 1;
            }
            other => return Err(ClarksonError::Internal(format!("unexpected subproblem result {other:?}"))),
        }
        observe(&Iteration { picked: row.row_id, subproblem_rows, nonredundant: &s, redundant: &r });
    }
    Ok((s, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    #[serde(rename = "nonredundant")]
    NonRedundant,
    Redundant,
    ImplicitEquality,
}

/// Row ids are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RedundancyReport {
    pub nonredundant: BTreeSet<RowId>,
    pub redundant: BTreeSet<RowId>,
    /// dropped row → the row it coincides with (after projection, for the
    /// non-tight rows)
    pub duplicates: BTreeMap<RowId, RowId>,
    pub equality_basis: Vec<RowId>,
    /// implicit equalities that were not dropped as duplicates
    pub tight_rows: BTreeSet<RowId>,
    pub dimension: usize,
}

impl RedundancyReport {
    fn root(&self, mut row: RowId) -> RowId {
        while let Some(&k) = self.duplicates.get(&row) {
            row = k;
        }
        row
    }

    /// Classification of an input row, or `None` for an unknown id.
    pub fn row_status(&self, row: RowId) -> Option<RowStatus> {
        let root = self.root(row);
        if self.tight_rows.contains(&root) {
            Some(RowStatus::ImplicitEquality)
        } else if self.duplicates.contains_key(&row) || self.redundant.contains(&row) {
            Some(RowStatus::Redundant)
        } else if self.nonredundant.contains(&row) {
            if self.duplicates.values().any(|&k| k == row) {
                Some(RowStatus::Redundant)
            } else {
                Some(RowStatus::NonRedundant)
            }
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Redundancy {
    Infeasible,
    Report(RedundancyReport),
}

/// `x = p + q·x_root`, or a constant when `root` is `None`.
#[derive(Clone, Debug)]
struct Label {
    root: Option<Var>,
    p: Scalar,
    q: Scalar,
}

struct SolvedForm {
    labels: Vec<Label>,
}

impl SolvedForm {
    fn new(d: usize) -> Self {
        SolvedForm { labels: (0..d).map(|v| Label { root: Some(v), p: Scalar::zero(), q: Scalar::one() }).collect() }
    }

    /// Rewrites `Σ a·x ≤ rhs` over the roots.
    fn express(&self, c: &Constraint) -> (Vec<(Var, Scalar)>, Scalar) {
        let mut terms = Vec::with_capacity(2);
        let mut rhs = c.rhs.clone();
        for t in c.terms() {
            let l = &self.labels[t.var];
            rhs -= &(&t.coef * &l.p);
            if let Some(r) = l.root {
                terms.push((r, &t.coef * &l.q));
            }
        }
        (terms, rhs)
    }

    /// Replaces root `r` by `p + q·x_to` (or the constant `p`).
    fn rebind(&mut self, r: Var, to: Option<Var>, p: &Scalar, q: &Scalar) {
        for l in &mut self.labels {
            if l.root == Some(r) {
                l.p = &l.p + &(&l.q * p);
                l.q = match to {
                    Some(_) => &l.q * q,
                    None => Scalar::zero(),
                };
                l.root = to;
            }
        }
    }

    /// Adds `c` as an equality. Returns false when it is implied already.
    fn add(&mut self, c: &Constraint) -> bool {
        let (terms, rhs) = self.express(c);
        let eq = Constraint::new(0, terms, rhs, false).expect("two roots at most");
        match eq.terms() {
            [] => false,
            [t] => {
                self.rebind(t.var, None, &(&eq.rhs / &t.coef), &Scalar::zero());
                true
            }
            [a, b] => {
                // b.var := (rhs - a.coef·a.var) / b.coef
                self.rebind(b.var, Some(a.var), &(&eq.rhs / &b.coef), &-(&a.coef / &b.coef));
                true
            }
            _ => unreachable!(),
        }
    }
}

/// Classifies every row of `sys`.
pub fn detect_redundancies(sys: &Li2System) -> Result<Redundancy, ClarksonError> {
    let (dedup, mut duplicates) = sys.normalize_dedupe();
    let point = match hn_solve(&dedup, Mode::Relint) {
        HnResult::RelInt { point, .. } => point,
        HnResult::Infeasible => return Ok(Redundancy::Infeasible),
        other => return Err(ClarksonError::Internal(format!("unexpected result {other:?}"))),
    };
    let (tight, loose): (Vec<&Constraint>, Vec<&Constraint>) =
        dedup.constraints().iter().partition(|c| c.slack(&point).is_zero());

    let mut form = SolvedForm::new(sys.dim());
    let mut tight_sorted = tight.clone();
    tight_sorted.sort_by_key(|c| c.row_id);
    let equality_basis: Vec<RowId> = tight_sorted.iter().filter(|c| form.add(c)).map(|c| c.row_id).collect();

    let roots: Vec<Var> = (0..sys.dim()).filter(|&v| form.labels[v].root == Some(v)).collect();
    let index: BTreeMap<Var, Var> = roots.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut redundant = BTreeSet::new();
    let mut reduced = Vec::with_capacity(loose.len());
    for c in loose {
        let (terms, rhs) = form.express(c);
        let terms = terms.into_iter().map(|(v, a)| (index[&v], a));
        let row = Constraint::new(c.row_id, terms, rhs, c.strict).map_err(|e| ClarksonError::Internal(e.to_string()))?;
        if row.arity() == 0 {
            redundant.insert(row.row_id);
        } else {
            reduced.push(row);
        }
    }
    let reduced = Li2System::new(roots.len(), reduced).map_err(|e| ClarksonError::Internal(e.to_string()))?;
    let (reduced, more) = reduced.normalize_dedupe();
    duplicates.extend(more);
    let z: Vec<Scalar> = roots.iter().map(|&v| point[v].clone()).collect();
    let (nonredundant, r) = clarkson_core(&reduced, &z)?;
    redundant.extend(r);
    Ok(Redundancy::Report(RedundancyReport {
        nonredundant,
        redundant,
        duplicates,
        equality_basis,
        tight_rows: tight.iter().map(|c| c.row_id).collect(),
        dimension: roots.len(),
    }))
}

/// Like [`detect_redundancies`] for a full-dimensional system with a known
/// interior point.
pub fn detect_redundancies_with_point(sys: &Li2System, z: &[Scalar]) -> Result<RedundancyReport, ClarksonError> {
    let (dedup, duplicates) = sys.normalize_dedupe();
    let (nonredundant, redundant) = clarkson_core(&dedup, z)?;
    Ok(RedundancyReport {
        nonredundant,
        redundant,
        duplicates,
        equality_basis: vec![],
        tight_rows: BTreeSet::new(),
        dimension: sys.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_motzkin::oracle_redundant;
    use crate::system::fixtures::*;

    fn ids(v: &[RowId]) -> BTreeSet<RowId> {
        v.iter().map(|i| i - 1).collect()
    }

    fn half() -> Vec<Scalar> {
        vec![q("1/2"), q("1/2")]
    }

    fn report(s: &Li2System) -> RedundancyReport {
        match detect_redundancies(s).unwrap() {
            Redundancy::Report(r) => r,
            Redundancy::Infeasible => panic!("infeasible"),
        }
    }

    #[test]
    fn perturbation() {
        let p = perturb(&half());
        assert_eq!(p[0], EpsPoly::new(vec![q("1/2"), q("1")]));
        assert_eq!(p[1], EpsPoly::new(vec![q("1/2"), q("0"), q("1")]));
        assert!(perturb(&[]).is_empty());
        let p = perturb(&[q("0"), q("0"), q("0")]);
        assert_eq!(p[2], EpsPoly::monomial(q("1"), 3));
    }

    #[test]
    fn ray_hits() {
        let sq = square().filter_rows(|r| r < 4);
        let zeps = perturb(&half());
        assert_eq!(ray_shoot(&sq, &zeps, &[q("2"), q("1/2")]).unwrap().row, 0);
        // both rows are crossed at 1/3 without the perturbation
        let hit = ray_shoot(&sq, &zeps, &[q("2"), q("2")]).unwrap();
        let tau = |row: usize| {
            let c = sq.row(row).unwrap();
            let dir: Vec<EpsPoly> = zeps.iter().map(|z| &EpsPoly::constant(q("2")) - z).collect();
            EpsRatio::new(&EpsPoly::constant(c.rhs.clone()) - &dot(c.terms(), &zeps), dot(c.terms(), &dir)).unwrap()
        };
        let (t0, t2) = (tau(0), tau(2));
        assert_eq!(t0.num().coeff(0) * t2.den().coeff(0), t2.num().coeff(0) * t0.den().coeff(0));
        let winner = if cmp_ratio(&t0, &t2) == Ordering::Less { 0 } else { 2 };
        assert_eq!(hit.row, winner);
        assert!(!oracle_redundant(&sq, 0).unwrap() && !oracle_redundant(&sq, 2).unwrap());
        let one = sq.filter_rows(|r| r == 0);
        assert_eq!(ray_shoot(&one, &zeps, &[q("0"), q("1/2")]), Err(ClarksonError::NoHit));
    }

    #[test]
    fn duplicate_rows_tie() {
        let s = sys(1, &[(&[(1, "1")], "1"), (&[(1, "1")], "1")]);
        assert_eq!(ray_shoot(&s, &perturb(&[q("0")]), &[q("2")]), Err(ClarksonError::AmbiguousHit(0, 1)));
    }

    #[test]
    fn core_loop() {
        assert_eq!(clarkson_core(&square(), &half()).unwrap(), (ids(&[1, 2, 3, 4]), ids(&[5])));
        assert_eq!(clarkson_core(&square().filter_rows(|r| r < 4), &half()).unwrap(), (ids(&[1, 2, 3, 4]), ids(&[])));
        let s = sys(
            2,
            &[(&[(1, "1")], "2"), (&[(1, "1")], "1"), (&[(1, "-1")], "0"), (&[(2, "1")], "1"), (&[(2, "-1")], "0")],
        );
        let (_, r) = clarkson_core(&s, &half()).unwrap();
        assert!(r.contains(&0) && oracle_redundant(&s, 0).unwrap());
        assert!(matches!(clarkson_core(&square(), &[q("1"), q("1/2")]), Err(ClarksonError::PreconditionViolated(_))));
    }

    #[test]
    fn subproblems_stay_small() {
        let mut worst = 0;
        let (s, _) = clarkson_core_observed(&square(), &half(), |it| worst = worst.max(it.subproblem_rows)).unwrap();
        assert!(worst <= s.len() + 1);
    }

    #[test]
    fn full_dimensional_report() {
        let r = report(&square());
        assert_eq!(r.dimension, 2);
        assert_eq!(r.nonredundant, ids(&[1, 2, 3, 4]));
        assert_eq!(r.redundant, ids(&[5]));
        assert!(r.equality_basis.is_empty());
        assert_eq!(r.row_status(4), Some(RowStatus::Redundant));
        assert_eq!(r.row_status(0), Some(RowStatus::NonRedundant));
    }

    #[test]
    fn pinned_report() {
        let s = sys(
            2,
            &[(&[(1, "1")], "0"), (&[(1, "-1")], "0"), (&[(2, "1")], "1"), (&[(2, "-1")], "0"), (&[(2, "1")], "2")],
        );
        let r = report(&s);
        assert_eq!(r.dimension, 1);
        assert_eq!(r.equality_basis, vec![0]);
        assert_eq!(r.tight_rows, ids(&[1, 2]));
        assert_eq!(r.nonredundant, ids(&[3, 4]));
        assert_eq!(r.redundant, ids(&[5]));
        assert_eq!(r.row_status(1), Some(RowStatus::ImplicitEquality));
    }

    #[test]
    fn duplicates_are_redundant_unless_tight() {
        let s = sys(
            2,
            &[
                (&[(1, "1")], "1"),
                (&[(1, "2")], "2"),
                (&[(1, "-1")], "0"),
                (&[(2, "1")], "0"),
                (&[(2, "-1")], "0"),
                (&[(2, "3")], "0"),
            ],
        );
        let r = report(&s);
        assert_eq!(r.duplicates, BTreeMap::from([(1, 0), (5, 3)]));
        assert_eq!(r.row_status(0), Some(RowStatus::Redundant));
        assert_eq!(r.row_status(1), Some(RowStatus::Redundant));
        assert_eq!(r.row_status(2), Some(RowStatus::NonRedundant));
        assert_eq!(r.row_status(5), Some(RowStatus::ImplicitEquality));
    }

    #[test]
    fn coupled_equalities_project() {
        // x1 = x2, x2 = 2·x3, x3 in [0, 1], x1 <= 5
        let s = sys(
            3,
            &[
                (&[(1, "1"), (2, "-1")], "0"),
                (&[(1, "-1"), (2, "1")], "0"),
                (&[(2, "1"), (3, "-2")], "0"),
                (&[(2, "-1"), (3, "2")], "0"),
                (&[(3, "1")], "1"),
                (&[(3, "-1")], "0"),
                (&[(1, "1")], "5"),
            ],
        );
        let r = report(&s);
        assert_eq!(r.dimension, 1);
        assert_eq!(r.equality_basis, vec![0, 2]);
        assert_eq!(r.nonredundant, ids(&[5, 6]));
        assert_eq!(r.redundant, ids(&[7]));
    }

    #[test]
    fn infeasible_report() {
        assert_eq!(detect_redundancies(&hidden_infeasible()).unwrap(), Redundancy::Infeasible);
    }
}
