//! The two-part Hochbaum–Naor solver.
//!
//! Part one walks the variables in order. For `x_i` it binary-searches the
//! breakpoints of the current system `G` with range tests on `H` (the input
//! rows plus every value fixed so far). A breakpoint inside the range is
//! fixed; otherwise the range sits between two adjacent breakpoints, the
//! rows of `G` are reduced to those active on that window and `x_i` is
//! eliminated. Part two resolves the last variable and backtracks.
//!
//! The three modes differ in which range tests count as a hit and in how the
//! backtracking picks values. In the relative-interior mode a variable whose
//! interval collapses to a point is pinned, and the dimension is the number
//! of variables that were not.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::aspvall_shiloach::{Classification, Propagator};
use crate::envelope::{breakpoints, relevant_unchecked};
use crate::fourier_motzkin::{backtrack_value, fm_eliminate, interval, BacktrackError, BacktrackMode, FmStep};
use crate::numeric::{ExtScalar, Scalar};
use crate::system::{AffineSubst, Constraint, Li2System, RowId, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// any solution
    Feasible,
    /// a point satisfying every row strictly
    Interior,
    /// a relative interior point
    Relint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HnResult {
    Feasible(Vec<Scalar>),
    Infeasible,
    FullDim(Vec<Scalar>),
    NotFullDim,
    RelInt { point: Vec<Scalar>, pinned: BTreeMap<Var, Scalar> },
}

impl HnResult {
    pub fn point(&self) -> Option<&[Scalar]> {
        match self {
            HnResult::Feasible(p) | HnResult::FullDim(p) | HnResult::RelInt { point: p, .. } => Some(p),
            _ => None,
        }
    }
}

/// One step of part one. Variables are 0-based.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "branch", rename_all = "lowercase")]
pub enum HnStep {
    Fixed {
        var: Var,
        value: Scalar,
        open_range: bool,
        breakpoints: usize,
    },
    Eliminated {
        var: Var,
        window: (ExtScalar, ExtScalar),
        /// rows on the eliminated variable that survived the reduction,
        /// including the window bounds
        relevant_rows: Vec<RowId>,
        breakpoints: usize,
        /// most new two-variable rows produced between one pair of neighbors
        max_new_coupling: usize,
        /// filled in by the backtracking pass
        value: Option<Scalar>,
        #[serde(skip)]
        fm_step: FmStep,
    },
}

impl HnStep {
    pub fn var(&self) -> Var {
        match self {
            HnStep::Fixed { var, .. } | HnStep::Eliminated { var, .. } => *var,
        }
    }

    pub fn breakpoints(&self) -> usize {
        match self {
            HnStep::Fixed { breakpoints, .. } | HnStep::Eliminated { breakpoints, .. } => *breakpoints,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct HnTrace {
    pub steps: Vec<HnStep>,
    /// rows left on the last variable before it is resolved
    pub final_rows: Vec<String>,
    pub range_tests: usize,
}

enum Branch {
    Fix(Scalar, Classification),
    Eliminate(ExtScalar, ExtScalar),
}

/// Solves `sys` in the given mode.
pub fn hn_solve(sys: &Li2System, mode: Mode) -> HnResult {
    hn_solve_traced(sys, mode).0
}

/// Drops trivial rows and keeps only the tightest one-variable bound on each
/// side of every variable. Contradictions are kept.
fn tidy(rows: impl IntoIterator<Item = Constraint>, like: &Li2System) -> Li2System {
    let mut best: HashMap<(Var, bool), (Scalar, bool, RowId)> = HashMap::new();
    let mut kept = Vec::new();
    for c in rows {
        if c.is_trivial() && !c.is_contradiction() {
            continue;
        }
        let [t] = c.terms() else {
            kept.push(c);
            continue;
        };
        let upper = t.coef.is_positive();
        let bound = &c.rhs / &t.coef;
        // smaller is tighter for upper bounds; lower bounds compare negated
        let key = (if upper { bound } else { -bound }, !c.strict, c.row_id);
        match best.get(&(t.var, upper)) {
            Some(cur) if *cur <= key => {}
            _ => {
                best.insert((t.var, upper), key);
            }
        }
        kept.push(c);
    }
    kept.retain(|c| match c.terms() {
        [t] => best[&(t.var, t.coef.is_positive())].2 == c.row_id,
        _ => true,
    });
    like.with_constraints(kept)
}

fn contradictory(g: &Li2System) -> bool {
    g.constraints().iter().any(Constraint::is_contradiction)
}

/// Like [`hn_solve`], also returning the step log.
pub fn hn_solve_traced(sys: &Li2System, mode: Mode) -> (HnResult, HnTrace) {
    let d = sys.dim();
    let mut trace = HnTrace::default();
    let mut h = Propagator::new(sys);
    let mut g = tidy(sys.constraints().iter().cloned(), sys);
    let mut pinned: BTreeMap<Var, Scalar> = BTreeMap::new();

    for i in 0..d.saturating_sub(1) {
        if contradictory(&g) {
            return (HnResult::Infeasible, trace);
        }
        let bps = breakpoints(&g, i).expect("variable in range").points;
        let branch = if bps.len() == 2 {
            Branch::Eliminate(ExtScalar::NegInf, ExtScalar::PosInf)
        } else {
            let (mut lo, mut hi) = (0, bps.len() - 1);
            let mut hit = None;
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                let b = bps[mid].finite().unwrap();
                trace.range_tests += 1;
                let c = h.classify(i, b);
                use Classification::*;
                match (mode, c) {
                    (_, InfeasibleDetected) => return (HnResult::Infeasible, trace),
                    (Mode::Feasible, c) if c.in_range() => hit = Some(c),
                    (Mode::Interior, Interior) | (Mode::Relint, Interior | PointRange) => hit = Some(c),
                    (_, Below | AtMin | PointRange) => lo = mid,
                    _ => hi = mid,
                }
                if let Some(c) = hit {
                    hit = Some(c);
                    lo = mid;
                    break;
                }
            }
            match hit {
                Some(c) => Branch::Fix(bps[lo].finite().unwrap().clone(), c),
                None => Branch::Eliminate(bps[lo].clone(), bps[hi].clone()),
            }
        };

        match branch {
            Branch::Fix(b, c) => {
                let fixed = g.substitute(&AffineSubst::constant(i, b.clone())).expect("valid substitution");
                g = tidy(fixed.into_constraints(), &g);
                h.restrict(i, Some(&b), Some(&b));
                if mode == Mode::Relint && c == Classification::PointRange {
                    pinned.insert(i, b.clone());
                }
                trace.steps.push(HnStep::Fixed {
                    var: i,
                    value: b,
                    open_range: c == Classification::Interior,
                    breakpoints: bps.len(),
                });
            }
            Branch::Eliminate(wlo, whi) => {
                let window = (wlo, whi);
                let mut rel = relevant_unchecked(&g, i, &window).into_constraints();
                let mut next_id = g.next_row_id();
                if let ExtScalar::Finite(v) = &window.0 {
                    rel.push(Constraint::unary(next_id, i, -Scalar::one(), -v));
                    next_id += 1;
                }
                if let ExtScalar::Finite(v) = &window.1 {
                    rel.push(Constraint::unary(next_id, i, Scalar::one(), v.clone()));
                }
                let (next, step) = fm_eliminate(&g.with_constraints(rel), i);
                let mut per_pair: HashMap<(Var, Var), usize> = HashMap::new();
                for c in step.produced.iter().filter(|c| c.arity() == 2) {
                    *per_pair.entry((c.terms()[0].var, c.terms()[1].var)).or_default() += 1;
                }
                g = tidy(next.into_constraints(), &g);
                trace.steps.push(HnStep::Eliminated {
                    var: i,
                    window,
                    relevant_rows: step.lower_rows.iter().chain(&step.upper_rows).map(|c| c.row_id).collect(),
                    breakpoints: bps.len(),
                    max_new_coupling: per_pair.values().copied().max().unwrap_or(0),
                    value: None,
                    fm_step: step,
                });
            }
        }
    }

    // part two
    if contradictory(&g) {
        return (HnResult::Infeasible, trace);
    }
    let mut point = vec![Scalar::zero(); d];
    if d > 0 {
        let last = d - 1;
        trace.final_rows = g.constraints().iter().map(|c| c.to_string()).collect();
        let (lower_rows, upper_rows) = g
            .constraints()
            .iter()
            .cloned()
            .partition(|c| c.coeff(last).is_some_and(Scalar::is_negative));
        let step = FmStep { eliminated_var: last, lower_rows, upper_rows, produced: vec![] };
        match resolve(&step, &point, mode, &mut pinned) {
            Ok(v) => point[last] = v,
            Err(BacktrackError::EmptyInterval(_)) => return (HnResult::Infeasible, trace),
            Err(BacktrackError::DegenerateIntervalInInteriorMode(_)) => return (HnResult::NotFullDim, trace),
        }
    }
    for s in trace.steps.iter_mut().rev() {
        match s {
            HnStep::Fixed { var, value, .. } => point[*var] = value.clone(),
            HnStep::Eliminated { var, value, fm_step, .. } => match resolve(fm_step, &point, mode, &mut pinned) {
                Ok(v) => {
                    point[*var] = v.clone();
                    *value = Some(v);
                }
                Err(BacktrackError::DegenerateIntervalInInteriorMode(_)) => return (HnResult::NotFullDim, trace),
                Err(e) => panic!("backtracking a feasible projection failed: {e}"),
            },
        }
    }
    let result = match mode {
        Mode::Feasible => HnResult::Feasible(point),
        Mode::Interior => HnResult::FullDim(point),
        Mode::Relint => HnResult::RelInt { point, pinned },
    };
    (result, trace)
}

fn resolve(step: &FmStep, point: &[Scalar], mode: Mode, pinned: &mut BTreeMap<Var, Scalar>) -> Result<Scalar, BacktrackError> {
    let bt = match mode {
        Mode::Feasible => BacktrackMode::Any,
        Mode::Interior => BacktrackMode::Interior,
        Mode::Relint => BacktrackMode::Relint,
    };
    let v = backtrack_value(step, point, bt)?;
    if mode == Mode::Relint {
        if let (Some((lo, _)), Some((hi, _))) = interval(step, point) {
            if lo == hi {
                pinned.insert(step.eliminated_var, v.clone());
            }
        }
    }
    Ok(v)
}

/// Dimension of the solution set, or `None` if it is empty.
pub fn dimension(sys: &Li2System) -> Option<usize> {
    match hn_solve(sys, Mode::Relint) {
        HnResult::RelInt { pinned, .. } => Some(sys.dim() - pinned.len()),
        _ => None,
    }
}
