//! Bound propagation for two-variable systems and the range test for a
//! single variable.
//!
//! Propagation runs on the literal graph: literal `2v` stands for `x_v` and
//! `2v + 1` for `-x_v`, and `U(L)` is an upper bound on the value of `L`. A
//! row `|a|·Lp + |b|·Lq <= c` gives the two edges `¬Lq -> Lp` and
//! `¬Lp -> Lq`, each an increasing affine map on bounds. Edges between the
//! same pair of literals are merged into their lower envelope.
//!
//! Bounds live in the δ-extended field so that pinning `x_i` to `λ ± δ`
//! yields one-sided slopes for free. Cycles in the parent graph are composed
//! into a single affine map `u -> c + a·u` and accelerated to their fixed
//! point, so the result is the closure of the rows rather than a fixed number
//! of relaxation rounds.

use std::collections::HashMap;

use serde::Serialize;

use crate::envelope::{min_envelope, Line};
use crate::numeric::{InfScalar, Scalar};
use crate::par;
use crate::system::{Li2System, SystemError, Var};

/// An upper or lower bound in the δ-extended field.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Bound {
    NegInf,
    Finite(InfScalar),
    PosInf,
}

impl Bound {
    fn neg(&self) -> Bound {
        match self {
            Bound::NegInf => Bound::PosInf,
            Bound::PosInf => Bound::NegInf,
            Bound::Finite(v) => Bound::Finite(-v),
        }
    }

    pub fn finite(&self) -> Option<&InfScalar> {
        match self {
            Bound::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// Bounds on every variable after propagation. `conflict` holds the value of
/// a violated derived inequality `0 <= v` when one was found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundState {
    pub lower: Vec<Bound>,
    pub upper: Vec<Bound>,
    pub conflict: Option<InfScalar>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Classification {
    Below,
    AtMin,
    Interior,
    AtMax,
    Above,
    InfeasibleDetected,
    PointRange,
}

impl Classification {
    pub fn in_range(self) -> bool {
        matches!(
            self,
            Classification::AtMin | Classification::Interior | Classification::AtMax | Classification::PointRange
        )
    }
}

fn lit(v: Var, negative: bool) -> usize {
    2 * v + usize::from(negative)
}

#[derive(Clone, Debug)]
struct Group {
    to: usize,
    lines: Vec<Line>,
    breaks: Vec<Scalar>,
}

impl Group {
    fn piece(&self, u: &InfScalar) -> usize {
        self.breaks
            .partition_point(|b| u.value > *b || (u.value == *b && u.slope.is_positive()))
    }
}

#[derive(Clone, Debug)]
struct Parent {
    from: usize,
    group: usize,
    piece: usize,
}

/// Result of one propagation run.
#[derive(Clone, Debug)]
struct Run {
    u: Vec<Bound>,
    conflict: Option<InfScalar>,
}

/// A system compiled for repeated propagation.
#[derive(Clone, Debug)]
pub struct Propagator {
    d: usize,
    groups: Vec<Group>,
    out: Vec<Vec<usize>>,
    sources: Vec<Option<Scalar>>,
    /// closure of the unpinned system; every pinned run starts from here
    base: Vec<Bound>,
    base_parent: Vec<Option<Parent>>,
}

impl Propagator {
    pub fn new(sys: &Li2System) -> Propagator {
        let d = sys.dim();
        let mut sources: Vec<Option<Scalar>> = vec![None; 2 * d];
        let mut edges: HashMap<(usize, usize), Vec<Line>> = HashMap::new();
        for c in sys.constraints() {
            match c.terms() {
                [t] => {
                    let l = lit(t.var, t.coef.is_negative());
                    tighten(&mut sources[l], &c.rhs / &t.coef.abs());
                }
                [p, q] => {
                    let (ap, aq) = (p.coef.abs(), q.coef.abs());
                    let lp = lit(p.var, p.coef.is_negative());
                    let lq = lit(q.var, q.coef.is_negative());
                    edges.entry((lq ^ 1, lp)).or_default().push(Line {
                        slope: &aq / &ap,
                        intercept: &c.rhs / &ap,
                        row: c.row_id,
                    });
                    edges.entry((lp ^ 1, lq)).or_default().push(Line {
                        slope: &ap / &aq,
                        intercept: &c.rhs / &aq,
                        row: c.row_id,
                    });
                }
                _ => {}
            }
        }
        let mut keys: Vec<(usize, usize)> = edges.keys().copied().collect();
        keys.sort_unstable();
        let raw: Vec<((usize, usize), Vec<Line>)> =
            keys.into_iter().map(|k| (k, edges.remove(&k).unwrap())).collect();
        let groups: Vec<(usize, Group)> = par::map(&raw, |((from, to), lines)| {
            let (lines, breaks) = min_envelope(lines.clone());
            (*from, Group { to: *to, lines, breaks })
        });
        let mut out = vec![Vec::new(); 2 * d];
        for (g, (from, _)) in groups.iter().enumerate() {
            out[*from].push(g);
        }
        let mut prop = Propagator {
            d,
            groups: groups.into_iter().map(|(_, g)| g).collect(),
            out,
            sources,
            base: Vec::new(),
            base_parent: Vec::new(),
        };
        prop.rebase();
        prop
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn rebase(&mut self) {
        let mut u: Vec<Bound> = self
            .sources
            .iter()
            .map(|s| s.clone().map_or(Bound::PosInf, |v| Bound::Finite(InfScalar::constant(v))))
            .collect();
        let mut parent = vec![None; 2 * self.d];
        let frontier: Vec<usize> = (0..2 * self.d).filter(|&l| u[l] != Bound::PosInf).collect();
        self.relax(&mut u, &mut parent, frontier, None);
        self.base = u;
        self.base_parent = parent;
    }

    /// Adds the bounds `lo <= x_v <= hi` as permanent sources.
    pub fn restrict(&mut self, v: Var, lo: Option<&Scalar>, hi: Option<&Scalar>) {
        if let Some(hi) = hi {
            tighten(&mut self.sources[lit(v, false)], hi.clone());
        }
        if let Some(lo) = lo {
            tighten(&mut self.sources[lit(v, true)], -lo);
        }
        self.rebase();
    }

    /// Propagates with `x_i` pinned to `mu`.
    fn run(&self, i: Var, mu: &InfScalar, stop_on_conflict: bool) -> Run {
        let mut u = self.base.clone();
        let mut parent = self.base_parent.clone();
        let mut frontier = Vec::with_capacity(2);
        for (l, v) in [(lit(i, false), mu.clone()), (lit(i, true), -mu)] {
            let cand = Bound::Finite(v);
            if cand < u[l] {
                u[l] = cand;
                parent[l] = None;
                frontier.push(l);
            }
        }
        let conflict = match crossing(&u, i) {
            Some(c) if stop_on_conflict => Some(c),
            _ => self.relax(&mut u, &mut parent, frontier, Some((i, stop_on_conflict))),
        };
        Run { u, conflict }
    }

    /// Bellman–Ford style relaxation from `frontier` until nothing changes.
    ///
    /// With a pinned variable, returns the first conflict that is visible:
    /// a crossing at the pinned variable, or any violated derived inequality
    /// whose value depends on the pin.
    fn relax(
        &self,
        u: &mut [Bound],
        parent: &mut [Option<Parent>],
        mut frontier: Vec<usize>,
        pin: Option<(Var, bool)>,
    ) -> Option<InfScalar> {
        let n = 2 * self.d;
        let mut mark = vec![0usize; n];
        let mut stamp = 0usize;
        let mut in_next = vec![false; n];
        let mut last_conflict = None;
        let mut rounds = 0usize;
        while !frontier.is_empty() {
            rounds += 1;
            assert!(rounds <= 64 * (n + 4), "bound propagation did not converge");
            let mut next = Vec::new();
            for &from in &frontier {
                let Bound::Finite(x) = u[from].clone() else {
                    if u[from] == Bound::NegInf {
                        for &g in &self.out[from] {
                            let to = self.groups[g].to;
                            if u[to] != Bound::NegInf {
                                u[to] = Bound::NegInf;
                                parent[to] = None;
                                push(&mut next, &mut in_next, to);
                            }
                        }
                    }
                    continue;
                };
                for &g in &self.out[from] {
                    let grp = &self.groups[g];
                    let piece = grp.piece(&x);
                    let line = &grp.lines[piece];
                    let cand = Bound::Finite(x.affine(&line.intercept, &line.slope));
                    if cand < u[grp.to] {
                        u[grp.to] = cand;
                        parent[grp.to] = Some(Parent { from, group: g, piece });
                        push(&mut next, &mut in_next, grp.to);
                    }
                }
            }
            for &l in &next {
                in_next[l] = false;
            }

            // cycles in the parent graph
            let mut extra = Vec::new();
            let round_base = stamp;
            for &start in &next {
                stamp += 1;
                let mut v = start;
                loop {
                    if mark[v] == stamp {
                        if let Some(c) = self.close_cycle(v, u, parent, &mut extra, pin.is_some()) {
                            if pin.is_some_and(|(_, stop)| stop) {
                                return Some(c);
                            }
                            last_conflict.get_or_insert(c);
                        }
                        break;
                    }
                    if mark[v] > round_base {
                        // reached by an earlier walk of this round
                        break;
                    }
                    mark[v] = stamp;
                    match &parent[v] {
                        Some(p) => v = p.from,
                        None => break,
                    }
                }
            }
            for l in extra {
                push(&mut next, &mut in_next, l);
            }
            for &l in &next {
                in_next[l] = false;
            }

            if let Some((i, stop)) = pin {
                let found = crossing(u, i).or_else(|| {
                    next.iter().find_map(|&l| crossing_at(u, l / 2).filter(|c| !c.slope.is_zero()))
                });
                if let Some(c) = found {
                    if stop {
                        return Some(c);
                    }
                    last_conflict.get_or_insert(c);
                }
            }
            frontier = next;
        }
        match pin {
            Some((i, _)) => last_conflict.or_else(|| crossing(u, i)),
            None => None,
        }
    }

    /// Handles the cycle through `v` in the parent graph. Returns a conflict
    /// value when the cycle proves the pinned system infeasible.
    fn close_cycle(
        &self,
        v: usize,
        u: &mut [Bound],
        parent: &mut [Option<Parent>],
        changed: &mut Vec<usize>,
        pinned: bool,
    ) -> Option<InfScalar> {
        // nodes in forward order: v -> cycle[1] -> ... -> v
        let mut back = vec![v];
        let mut w = parent[v].as_ref().unwrap().from;
        while w != v {
            back.push(w);
            w = parent[w].as_ref().unwrap().from;
        }
        let mut cycle = vec![v];
        cycle.extend(back[1..].iter().rev());
        let line_into = |x: usize| {
            let p = parent[x].as_ref().unwrap();
            &self.groups[p.group].lines[p.piece]
        };
        // u -> c + a·u around the cycle, starting and ending at v
        let (mut c, mut a) = (Scalar::zero(), Scalar::one());
        for &x in cycle[1..].iter().chain(std::iter::once(&v)) {
            let l = line_into(x);
            c = &l.intercept + &(&l.slope * &c);
            a = &l.slope * &a;
        }
        let Bound::Finite(uv) = u[v].clone() else {
            return None;
        };
        let image = uv.affine(&c, &a);
        if image >= uv {
            return None;
        }
        let one = Scalar::one();
        if a < one {
            let fixed = InfScalar::constant(&c / &(&one - &a));
            u[v] = Bound::Finite(fixed);
            parent[v] = None;
            changed.push(v);
            return None;
        }
        let mut conflict = None;
        if a > one {
            // v >= c/(1-a) on every solution, and U(v) lies below it
            let floor = InfScalar::constant(&c / &(&one - &a));
            if pinned && !uv.slope.is_zero() {
                conflict = Some(&uv - &floor);
            }
            let dual = Bound::Finite(-&floor);
            if dual < u[v ^ 1] {
                u[v ^ 1] = dual;
                parent[v ^ 1] = None;
                changed.push(v ^ 1);
            }
        }
        for &x in &cycle {
            u[x] = Bound::NegInf;
            parent[x] = None;
            changed.push(x);
        }
        conflict
    }

    fn state(&self, run: Run) -> BoundState {
        let upper = (0..self.d).map(|v| run.u[lit(v, false)].clone()).collect();
        let lower = (0..self.d).map(|v| run.u[lit(v, true)].neg()).collect();
        BoundState { lower, upper, conflict: run.conflict }
    }

    /// Full propagation with `x_i` pinned to `lam`.
    pub fn propagate(&self, i: Var, lam: &InfScalar) -> BoundState {
        self.state(self.run(i, lam, false))
    }

    /// Whether `x_i = mu` survives propagation; on failure the conflict
    /// value as an affine function of the pin.
    fn test(&self, i: Var, mu: InfScalar) -> Option<InfScalar> {
        self.run(i, &mu, true).conflict
    }

    /// Position of `lam` relative to the range of `x_i`.
    pub fn classify(&self, i: Var, lam: &Scalar) -> Classification {
        let right = InfScalar::new(lam.clone(), Scalar::one());
        let left = InfScalar::new(lam.clone(), -Scalar::one());
        let (r, l) = par::join(|| self.test(i, right), || self.test(i, left));
        let (r, l) = match (r, l) {
            (None, None) => return Classification::Interior,
            (None, Some(_)) => return Classification::AtMin,
            (Some(_), None) => return Classification::AtMax,
            (Some(r), Some(l)) => (r, l),
        };
        // each conflict v0 + g·(mu - lam) < 0 rules out a half-line of mu
        let mut lo: Option<Scalar> = None;
        let mut hi: Option<Scalar> = None;
        for (v0, g) in [(r.value, r.slope), (l.value, -l.slope)] {
            if g.is_zero() {
                return Classification::InfeasibleDetected;
            }
            let cut = lam - &(&v0 / &g);
            if g.is_positive() {
                lo = Some(lo.map_or(cut.clone(), |x| x.max(cut)));
            } else {
                hi = Some(hi.map_or(cut.clone(), |x| x.min(cut)));
            }
        }
        match (&lo, &hi) {
            (Some(a), Some(b)) if a > b => Classification::InfeasibleDetected,
            (Some(a), _) if a > lam => Classification::Below,
            (_, Some(b)) if b < lam => Classification::Above,
            _ => match self.test(i, InfScalar::constant(lam.clone())) {
                None => Classification::PointRange,
                Some(_) => Classification::InfeasibleDetected,
            },
        }
    }
}

fn tighten(slot: &mut Option<Scalar>, v: Scalar) {
    match slot {
        Some(old) if *old <= v => {}
        _ => *slot = Some(v),
    }
}

fn push(next: &mut Vec<usize>, in_next: &mut [bool], l: usize) {
    if !in_next[l] {
        in_next[l] = true;
        next.push(l);
    }
}

fn crossing_at(u: &[Bound], v: Var) -> Option<InfScalar> {
    match (&u[lit(v, false)], &u[lit(v, true)]) {
        (Bound::Finite(a), Bound::Finite(b)) => Some(a + b).filter(InfScalar::is_negative),
        (Bound::NegInf, Bound::PosInf) | (Bound::PosInf, Bound::NegInf) => None,
        (Bound::NegInf, _) | (_, Bound::NegInf) => {
            Some(InfScalar::constant(-Scalar::one()))
        }
        _ => None,
    }
}

fn crossing(u: &[Bound], i: Var) -> Option<InfScalar> {
    crossing_at(u, i)
}

/// Propagation on `sys` with `x_i` pinned to `lam`.
pub fn propagate(sys: &Li2System, i: Var, lam: &InfScalar) -> Result<BoundState, SystemError> {
    sys.neighbors(i)?;
    Ok(Propagator::new(sys).propagate(i, lam))
}

/// Position of `lam` relative to the range of `x_i` in `sys`.
pub fn classify(sys: &Li2System, i: Var, lam: &Scalar) -> Result<Classification, SystemError> {
    sys.neighbors(i)?;
    Ok(Propagator::new(sys).classify(i, lam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::fixtures::*;
    use Classification::*;

    fn at(s: &Li2System, i: Var, lam: &str) -> Classification {
        classify(s, i, &q(lam)).unwrap()
    }

    fn fin(v: &str) -> Bound {
        Bound::Finite(InfScalar::constant(q(v)))
    }

    #[test]
    fn square_ranges() {
        assert_eq!(at(&square(), 0, "1/2"), Interior);
        assert_eq!(at(&square(), 0, "1"), AtMax);
        assert_eq!(at(&square(), 0, "2"), Above);
        assert_eq!(at(&square(), 0, "0"), AtMin);
        assert_eq!(at(&square(), 0, "-3"), Below);
    }

    #[test]
    fn chain_max_is_17_12() {
        assert_eq!(at(&chain(), 0, "17/12"), AtMax);
        assert_eq!(at(&chain(), 0, "0"), Interior);
        assert_eq!(at(&chain(), 0, "3/2"), Above);
        let st = propagate(&chain(), 0, &InfScalar::constant(q("1000000"))).unwrap();
        assert_eq!(st.upper[0], fin("17/12"));
        assert!(st.lower[0] > st.upper[0]);
        let st = propagate(&chain(), 0, &InfScalar::zero()).unwrap();
        assert!(st.lower[0] <= fin("0") && fin("0") <= st.upper[0]);
        assert!(st.conflict.is_none());
    }

    #[test]
    fn cycle_min_is_3_35() {
        assert_eq!(at(&cycle(), 0, "3/35"), AtMin);
        assert_eq!(at(&cycle(), 0, "1/20"), Below);
        assert_eq!(at(&cycle(), 0, "1"), Interior);
        let st = propagate(&cycle(), 0, &InfScalar::constant(q("1/20"))).unwrap();
        assert!(st.lower[0] > fin("1/20"));
    }

    #[test]
    fn pinned_point_range() {
        assert_eq!(at(&pinned(), 0, "0"), PointRange);
        assert_eq!(at(&pinned(), 0, "1"), Above);
        assert_eq!(at(&pinned(), 1, "1/2"), Interior);
    }

    #[test]
    fn hidden_infeasibility_is_not_visible() {
        for lam in ["-10", "0", "10"] {
            assert_eq!(at(&hidden_infeasible(), 0, lam), Interior);
        }
    }

    #[test]
    fn lasso_through_growing_cycle() {
        // x1 >= x2, x2 >= 1 + x3/2, x3 >= x2: the range of x1 is [2, inf)
        let s = sys(
            3,
            &[
                (&[(1, "-1"), (2, "1")], "0"),
                (&[(2, "-1"), (3, "1/2")], "-1"),
                (&[(3, "-1"), (2, "1")], "0"),
            ],
        );
        assert_eq!(at(&s, 0, "1"), Below);
        assert_eq!(at(&s, 0, "2"), AtMin);
        assert_eq!(at(&s, 0, "5"), Interior);
        // the same cycle reached through an equality
        let s = sys(
            3,
            &[
                (&[(1, "1"), (2, "-1")], "0"),
                (&[(2, "1"), (1, "-1")], "0"),
                (&[(2, "1"), (3, "-1")], "0"),
                (&[(3, "1"), (2, "-2")], "-2"),
            ],
        );
        assert_eq!(at(&s, 0, "1"), Below);
        assert_eq!(at(&s, 0, "2"), AtMin);
    }

    #[test]
    fn contradictory_bounds() {
        let s = sys(1, &[(&[(1, "1")], "0"), (&[(1, "-1")], "-1")]);
        assert_eq!(at(&s, 0, "1/2"), InfeasibleDetected);
        // only the violated side is reported away from the gap
        assert_eq!(at(&s, 0, "5"), Above);
    }

    #[test]
    fn unconstrained_variable() {
        let s = sys(2, &[(&[(2, "1")], "0")]);
        assert_eq!(at(&s, 0, "7"), Interior);
        assert!(classify(&s, 2, &q("0")).is_err());
    }
}
