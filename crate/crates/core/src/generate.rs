//! Seeded random instances with a known interior point.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::Scalar;
use crate::system::{Constraint, Li2System, RowId, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid generator spec: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Clone, Debug, Serialize)]
pub struct GenSpec {
    pub seed: u64,
    /// total number of rows, including planted and pinning rows
    pub n: usize,
    pub d: usize,
    /// chance that a sampled row couples two variables
    pub coupling_prob: f64,
    pub planted_redundant: usize,
    /// coefficients are drawn from `[-range, range] \ {0}`
    pub coefficient_range: i64,
    /// variables fixed by a pair of opposite rows
    pub pin_vars: usize,
}

impl GenSpec {
    pub fn new(seed: u64, n: usize, d: usize) -> Self {
        GenSpec { seed, n, d, coupling_prob: 0.7, planted_redundant: 0, coefficient_range: 5, pin_vars: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GenMeta {
    /// satisfies every row strictly except the pinning rows
    pub anchor: Vec<Scalar>,
    pub planted: Vec<RowId>,
    pub pinned: Vec<Var>,
    pub pin_rows: Vec<RowId>,
}

pub fn generate(spec: &GenSpec) -> Result<(Li2System, GenMeta), InvalidSpec> {
    let bad = |m: &str| Err(InvalidSpec(m.to_string()));
    if !(0.0..=1.0).contains(&spec.coupling_prob) {
        return bad("coupling_prob must lie in [0, 1]");
    }
    if spec.coefficient_range < 1 {
        return bad("coefficient_range must be at least 1");
    }
    if spec.pin_vars > spec.d {
        return bad("more pinned variables than variables");
    }
    let Some(sampled) = spec.n.checked_sub(spec.planted_redundant + 2 * spec.pin_vars) else {
        return bad("n is smaller than planted_redundant + 2 * pin_vars");
    };
    if sampled > 0 && spec.d == 0 {
        return bad("rows need at least one variable");
    }
    if spec.planted_redundant > 0 && sampled == 0 {
        return bad("planted rows need sampled rows to copy");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let range = spec.coefficient_range;
    let anchor: Vec<Scalar> = (0..spec.d).map(|_| Scalar::from_integer(rng.gen_range(-3..=3))).collect();
    let coef = |rng: &mut ChaCha8Rng| {
        let c = rng.gen_range(1..=range);
        Scalar::from_integer(if rng.gen_bool(0.5) { c } else { -c })
    };

    let mut rows: Vec<Constraint> = Vec::with_capacity(spec.n);
    for id in 0..sampled {
        let i = rng.gen_range(0..spec.d);
        let mut terms = vec![(i, coef(&mut rng))];
        if spec.d > 1 && rng.gen_bool(spec.coupling_prob) {
            let j = (i + rng.gen_range(1..spec.d)) % spec.d;
            terms.push((j, coef(&mut rng)));
        }
        let at: Scalar = terms.iter().map(|(v, a)| a * &anchor[*v]).sum();
        let slack = Scalar::from_integer(rng.gen_range(1..=range));
        rows.push(Constraint::new(id, terms, &at + &slack, false).expect("distinct variables"));
    }
    let mut planted = Vec::with_capacity(spec.planted_redundant);
    for _ in 0..spec.planted_redundant {
        let src = &rows[rng.gen_range(0..sampled)];
        let extra = Scalar::from_integer(rng.gen_range(1..=range));
        let id = rows.len();
        let mut copy = src.with_row_id(id);
        copy.rhs += &extra;
        rows.push(copy);
        planted.push(id);
    }
    let mut pinned: Vec<Var> = sample(&mut rng, spec.d, spec.pin_vars).into_vec();
    pinned.sort_unstable();
    let mut pin_rows = Vec::with_capacity(2 * pinned.len());
    for &c in &pinned {
        for sign in [1, -1] {
            let s = Scalar::from_integer(sign);
            let id = rows.len();
            rows.push(Constraint::unary(id, c, s.clone(), &s * &anchor[c]));
            pin_rows.push(id);
        }
    }
    let sys = Li2System::new(spec.d, rows).expect("generated rows are valid");
    Ok((sys, GenMeta { anchor, planted, pinned, pin_rows }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_motzkin::oracle_redundant;
    use crate::system::CheckMode;
    use std::collections::BTreeSet;

    #[test]
    fn deterministic() {
        let spec = GenSpec::new(7, 5, 2);
        assert_eq!(generate(&spec).unwrap().0, generate(&spec).unwrap().0);
        assert_ne!(generate(&spec).unwrap().0, generate(&GenSpec::new(8, 5, 2)).unwrap().0);
    }

    #[test]
    fn anchor_is_inside() {
        for seed in 0..40 {
            let spec = GenSpec { planted_redundant: 2, pin_vars: (seed % 3) as usize, ..GenSpec::new(seed, 12, 3) };
            let (sys, meta) = generate(&spec).unwrap();
            assert_eq!(sys.len(), 12);
            let mode = if meta.pin_rows.is_empty() {
                CheckMode::Strict
            } else {
                CheckMode::Relative(meta.pin_rows.iter().copied().collect::<BTreeSet<_>>())
            };
            assert!(sys.check_point(&meta.anchor, &mode).unwrap().passed());
            for &p in &meta.planted {
                assert!(oracle_redundant(&sys, p).unwrap());
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&GenSpec { pin_vars: 3, ..GenSpec::new(1, 10, 2) }).is_err());
        assert!(generate(&GenSpec { planted_redundant: 11, ..GenSpec::new(1, 10, 2) }).is_err());
        assert!(generate(&GenSpec { planted_redundant: 2, pin_vars: 1, ..GenSpec::new(1, 4, 2) }).is_err());
        assert!(generate(&GenSpec { coupling_prob: 1.5, ..GenSpec::new(1, 4, 2) }).is_err());
        assert!(generate(&GenSpec::new(1, 3, 0)).is_err());
        assert!(generate(&GenSpec::new(1, 0, 0)).is_ok());
    }
}
