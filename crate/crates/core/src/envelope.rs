//! Upper and lower envelopes of the rows coupling two variables, their
//! breakpoints, and the reduction to the rows that are active on a
//! breakpoint-free window.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::numeric::{ExtScalar, Scalar};
use crate::par;
use crate::system::{Constraint, Li2System, RowId, SystemError, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("no row couples x{0} and x{1}")]
    NoCouplingRows(usize, usize),
    #[error("breakpoint {0} lies strictly inside the window")]
    WindowContainsBreakpoint(Scalar),
    #[error("envelopes need two distinct variables")]
    SameVariable,
    #[error(transparent)]
    System(#[from] SystemError),
}

/// `slope·u + intercept`, tagged with the row it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Line {
    pub slope: Scalar,
    pub intercept: Scalar,
    pub row: RowId,
}

impl Line {
    pub fn at(&self, u: &Scalar) -> Scalar {
        &(&self.slope * u) + &self.intercept
    }

    fn negated(self) -> Line {
        Line { slope: -self.slope, intercept: -self.intercept, row: self.row }
    }
}

/// Pointwise minimum of a set of lines.
///
/// Returns the lines that are minimal on some open interval, ordered left to
/// right (so by decreasing slope), and the breakpoints between consecutive
/// ones. Parallel lines keep the lower intercept; exact ties keep the lowest
/// row.
pub fn min_envelope(mut lines: Vec<Line>) -> (Vec<Line>, Vec<Scalar>) {
    lines.sort_by(|a, b| {
        b.slope
            .cmp(&a.slope)
            .then_with(|| a.intercept.cmp(&b.intercept))
            .then_with(|| a.row.cmp(&b.row))
    });
    lines.dedup_by(|later, earlier| later.slope == earlier.slope);

    let cross = |a: &Line, b: &Line| &(&b.intercept - &a.intercept) / &(&a.slope - &b.slope);
    let mut hull: Vec<Line> = Vec::with_capacity(lines.len());
    for line in lines {
        while hull.len() >= 2 {
            let n = hull.len();
            if cross(&hull[n - 2], &line) <= cross(&hull[n - 2], &hull[n - 1]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(line);
    }
    let breaks = hull.windows(2).map(|w| cross(&w[0], &w[1])).collect();
    (hull, breaks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// bounds the dependent variable from above; concave
    Upper,
    /// bounds it from below; convex
    Lower,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub slope: Scalar,
    pub intercept: Scalar,
    pub from: ExtScalar,
    pub to: ExtScalar,
    pub source_row: RowId,
}

/// `x_k` as a piecewise-linear bound in `x_j`. An envelope without pieces is
/// the trivial bound (`+inf` for upper, `-inf` for lower).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Envelope {
    pub side: Side,
    pub pieces: Vec<Piece>,
}

impl Envelope {
    fn from_lines(side: Side, lines: Vec<Line>) -> Envelope {
        let (hull, breaks) = match side {
            Side::Upper => min_envelope(lines),
            Side::Lower => {
                let (hull, breaks) = min_envelope(lines.into_iter().map(Line::negated).collect());
                (hull.into_iter().map(Line::negated).collect(), breaks)
            }
        };
        let n = hull.len();
        let pieces = hull
            .into_iter()
            .enumerate()
            .map(|(m, l)| Piece {
                from: if m == 0 { ExtScalar::NegInf } else { breaks[m - 1].clone().into() },
                to: if m + 1 == n { ExtScalar::PosInf } else { breaks[m].clone().into() },
                slope: l.slope,
                intercept: l.intercept,
                source_row: l.row,
            })
            .collect();
        Envelope { side, pieces }
    }

    /// Finite breakpoints, ascending.
    pub fn breakpoints(&self) -> impl Iterator<Item = &Scalar> {
        self.pieces.iter().skip(1).filter_map(|p| p.from.finite())
    }

    pub fn eval(&self, x: &Scalar) -> ExtScalar {
        let idx = self
            .pieces
            .partition_point(|p| p.to.finite().is_some_and(|t| t < x));
        match self.pieces.get(idx) {
            Some(p) => (&(&p.slope * x) + &p.intercept).into(),
            None => match self.side {
                Side::Upper => ExtScalar::PosInf,
                Side::Lower => ExtScalar::NegInf,
            },
        }
    }
}

/// Rows mentioning both variables, written as `x_k <= slope·x_j + c`
/// (upper) or `x_k >= slope·x_j + c` (lower).
fn split_lines<'a>(rows: impl IntoIterator<Item = &'a Constraint>, j: Var, k: Var) -> (Vec<Line>, Vec<Line>) {
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for c in rows {
        let (Some(a), Some(b)) = (c.coeff(j), c.coeff(k)) else {
            continue;
        };
        let line = Line { slope: -(a / b), intercept: &c.rhs / b, row: c.row_id };
        if b.is_positive() {
            upper.push(line);
        } else {
            lower.push(line);
        }
    }
    (upper, lower)
}

fn envelopes_from_rows<'a>(rows: impl IntoIterator<Item = &'a Constraint>, j: Var, k: Var) -> (Envelope, Envelope) {
    let (upper, lower) = split_lines(rows, j, k);
    (Envelope::from_lines(Side::Upper, upper), Envelope::from_lines(Side::Lower, lower))
}

/// Upper and lower envelope of `x_k` as a function of `x_j`.
pub fn build_envelopes(sys: &Li2System, j: Var, k: Var) -> Result<(Envelope, Envelope), EnvelopeError> {
    if j == k {
        return Err(EnvelopeError::SameVariable);
    }
    sys.neighbors(j)?;
    sys.neighbors(k)?;
    let rows: Vec<&Constraint> = sys.constraints().iter().filter(|c| c.partner(j) == Some(k)).collect();
    if rows.is_empty() {
        return Err(EnvelopeError::NoCouplingRows(j, k));
    }
    Ok(envelopes_from_rows(rows, j, k))
}

/// Rows coupling `i` with each neighbor, in one pass over the system.
fn coupling_groups(sys: &Li2System, i: Var) -> BTreeMap<Var, Vec<&Constraint>> {
    let mut groups: BTreeMap<Var, Vec<&Constraint>> = BTreeMap::new();
    for c in sys.constraints() {
        if let Some(j) = c.partner(i) {
            groups.entry(j).or_default().push(c);
        }
    }
    groups
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BreakpointSet {
    /// ascending, always starting with `-inf` and ending with `+inf`
    pub points: Vec<ExtScalar>,
    pub per_neighbor: BTreeMap<Var, Vec<Scalar>>,
}

impl BreakpointSet {
    pub fn finite_count(&self) -> usize {
        self.points.len() - 2
    }
}

/// The `x_i`-coordinates of all envelope breakpoints over the neighbors of
/// `x_i`, with explicit infinite sentinels.
pub fn breakpoints(sys: &Li2System, i: Var) -> Result<BreakpointSet, SystemError> {
    sys.neighbors(i)?;
    let groups: Vec<(Var, Vec<&Constraint>)> = coupling_groups(sys, i).into_iter().collect();
    let per: Vec<(Var, Vec<Scalar>)> = par::map(&groups, |(j, rows)| {
        let (up, lo) = envelopes_from_rows(rows.iter().copied(), i, *j);
        let mut pts: Vec<Scalar> = up.breakpoints().chain(lo.breakpoints()).cloned().collect();
        pts.sort();
        pts.dedup();
        (*j, pts)
    });
    let all: BTreeSet<&Scalar> = per.iter().flat_map(|(_, p)| p).collect();
    let mut points = Vec::with_capacity(all.len() + 2);
    points.push(ExtScalar::NegInf);
    points.extend(all.into_iter().map(|s| ExtScalar::Finite(s.clone())));
    points.push(ExtScalar::PosInf);
    Ok(BreakpointSet { points, per_neighbor: per.into_iter().collect() })
}

/// A finite point of the window: the midpoint, one unit inside a finite end,
/// or 0.
pub fn representative(window: &(ExtScalar, ExtScalar)) -> Scalar {
    match window {
        (ExtScalar::Finite(a), ExtScalar::Finite(b)) => a.midpoint(b),
        (ExtScalar::Finite(a), _) => a + &Scalar::one(),
        (_, ExtScalar::Finite(b)) => b - &Scalar::one(),
        _ => Scalar::zero(),
    }
}

/// Keeps, for every neighbor of `x_i`, only the rows attaining the upper and
/// lower envelope on `window`; all other rows pass through.
pub fn relevant(sys: &Li2System, i: Var, window: &(ExtScalar, ExtScalar)) -> Result<Li2System, EnvelopeError> {
    let bps = breakpoints(sys, i)?;
    for p in bps.points.iter().filter(|p| p.is_finite()) {
        if &window.0 < p && p < &window.1 {
            return Err(EnvelopeError::WindowContainsBreakpoint(p.finite().unwrap().clone()));
        }
    }
    Ok(relevant_unchecked(sys, i, window))
}

pub(crate) fn relevant_unchecked(sys: &Li2System, i: Var, window: &(ExtScalar, ExtScalar)) -> Li2System {
    let x = representative(window);
    let mut keep: BTreeSet<RowId> = BTreeSet::new();
    let mut drop: BTreeSet<RowId> = BTreeSet::new();
    for (j, rows) in coupling_groups(sys, i) {
        let (upper, lower) = split_lines(rows.iter().copied(), i, j);
        let best = |lines: &[Line], want: std::cmp::Ordering| {
            lines
                .iter()
                .map(|l| (l.at(&x), l.row))
                .reduce(|acc, cur| {
                    let ord = cur.0.cmp(&acc.0);
                    if ord == want || (ord.is_eq() && cur.1 < acc.1) {
                        cur
                    } else {
                        acc
                    }
                })
                .map(|(_, r)| r)
        };
        keep.extend(best(&upper, std::cmp::Ordering::Less));
        keep.extend(best(&lower, std::cmp::Ordering::Greater));
        drop.extend(rows.iter().map(|c| c.row_id));
    }
    sys.filter_rows(|r| keep.contains(&r) || !drop.contains(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::fixtures::*;
    use proptest::prelude::*;

    fn fin(s: &str) -> ExtScalar {
        ExtScalar::Finite(q(s))
    }

    /// x2 <= x1, x2 <= 2 - x1
    fn tent() -> Li2System {
        sys(2, &[(&[(2, "1"), (1, "-1")], "0"), (&[(2, "1"), (1, "1")], "2")])
    }

    #[test]
    fn tent_upper_envelope() {
        let (up, lo) = build_envelopes(&tent(), 0, 1).unwrap();
        assert!(lo.pieces.is_empty());
        assert_eq!(up.pieces.len(), 2);
        assert_eq!((up.pieces[0].slope.clone(), up.pieces[0].to.clone()), (q("1"), fin("1")));
        assert_eq!((up.pieces[1].slope.clone(), up.pieces[1].from.clone()), (q("-1"), fin("1")));
        assert_eq!(up.breakpoints().cloned().collect::<Vec<_>>(), vec![q("1")]);
    }

    #[test]
    fn no_coupling_rows() {
        let s = sys(2, &[(&[(2, "-1")], "0")]);
        assert_eq!(build_envelopes(&s, 0, 1), Err(EnvelopeError::NoCouplingRows(0, 1)));
    }

    #[test]
    fn crossing_at_origin() {
        let s = sys(2, &[(&[(2, "1"), (1, "-1")], "0"), (&[(2, "1"), (1, "-2")], "0")]);
        let (up, _) = build_envelopes(&s, 0, 1).unwrap();
        let slopes: Vec<_> = up.pieces.iter().map(|p| p.slope.clone()).collect();
        assert_eq!(slopes, vec![q("2"), q("1")]);
        assert_eq!(up.pieces[0].to, fin("0"));
    }

    #[test]
    fn breakpoint_examples() {
        let mut s = tent().into_constraints();
        s.push(Constraint::unary(2, 1, q("-1"), q("0")));
        let s = Li2System::new(2, s).unwrap();
        let b = breakpoints(&s, 0).unwrap();
        assert_eq!(b.points, vec![ExtScalar::NegInf, fin("1"), ExtScalar::PosInf]);
        let inf = vec![ExtScalar::NegInf, ExtScalar::PosInf];
        assert_eq!(breakpoints(&square(), 0).unwrap().points, inf);
        assert_eq!(breakpoints(&chain(), 0).unwrap().points, inf);
    }

    #[test]
    fn relevant_examples() {
        let mut rows = tent().into_constraints();
        rows.push(Constraint::unary(2, 1, q("-1"), q("5")));
        let s = Li2System::new(2, rows).unwrap();
        let right = relevant(&s, 0, &(fin("1"), ExtScalar::PosInf)).unwrap();
        assert_eq!(right.row_ids(), vec![1, 2]);
        let left = relevant(&s, 0, &(ExtScalar::NegInf, fin("1"))).unwrap();
        assert_eq!(left.row_ids(), vec![0, 2]);
        assert_eq!(
            relevant(&s, 0, &(fin("0"), fin("2"))),
            Err(EnvelopeError::WindowContainsBreakpoint(q("1")))
        );
        let one = relevant(&chain(), 0, &(ExtScalar::NegInf, ExtScalar::PosInf)).unwrap();
        assert_eq!(one, chain());
    }

    #[test]
    fn relevant_tie_keeps_lowest_row() {
        let s = sys(2, &[(&[(2, "2"), (1, "-2")], "0"), (&[(2, "1"), (1, "-1")], "0")]);
        let r = relevant(&s, 0, &(ExtScalar::NegInf, ExtScalar::PosInf)).unwrap();
        assert_eq!(r.row_ids(), vec![0]);
    }

    fn lines() -> impl Strategy<Value = Vec<Line>> {
        prop::collection::vec((-6i64..6, -20i64..20, 1i64..4), 1..12).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(row, (s, c, den))| Line {
                    slope: Scalar::new(s, den),
                    intercept: Scalar::from_integer(c),
                    row,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn envelope_is_pointwise_min(ls in lines()) {
            let (hull, breaks) = min_envelope(ls.clone());
            prop_assert_eq!(hull.len(), breaks.len() + 1);
            prop_assert!(breaks.windows(2).all(|w| w[0] < w[1]));
            // every piece is one of the inputs
            for h in &hull {
                prop_assert!(ls.contains(h));
            }
            let env = Envelope::from_lines(Side::Upper, ls.clone());
            let mut samples: Vec<Scalar> = (-10..=10).map(|k| Scalar::new(k, 2)).collect();
            samples.extend(breaks.iter().cloned());
            for u in &samples {
                let min = ls.iter().map(|l| l.at(u)).min().unwrap();
                prop_assert_eq!(env.eval(u), ExtScalar::Finite(min));
            }
        }

        #[test]
        fn lower_envelope_is_pointwise_max(ls in lines()) {
            let env = Envelope::from_lines(Side::Lower, ls.clone());
            for k in -10..=10 {
                let u = Scalar::new(k, 3);
                let max = ls.iter().map(|l| l.at(&u)).max().unwrap();
                prop_assert_eq!(env.eval(&u), ExtScalar::Finite(max));
            }
        }
    }
}
