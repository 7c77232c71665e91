#![allow(dead_code)]

use li2::generate::{generate, GenSpec};
use li2::{Constraint, Li2System, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Full,
    Pinned,
    EqualityPair,
    Infeasible,
    Unstructured,
}

pub struct Instance {
    pub seed: u64,
    pub kind: Kind,
    pub sys: Li2System,
}

/// Small instances mixing full-dimensional, pinned, equality-pair,
/// infeasible and unstructured systems.
pub fn corpus(count: u64) -> Vec<Instance> {
    (0..count).map(instance).collect()
}

pub fn instance(seed: u64) -> Instance {
    let kind = [Kind::Full, Kind::Pinned, Kind::EqualityPair, Kind::Infeasible, Kind::Unstructured][(seed % 5) as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let d = rng.gen_range(1..=4);
    if kind == Kind::Unstructured {
        return Instance { seed, kind, sys: unstructured(&mut rng, d) };
    }
    let pin = if kind == Kind::Pinned { rng.gen_range(1..=d.min(2)) } else { 0 };
    let planted = rng.gen_range(0..=2);
    let n = rng.gen_range(3..=16) + planted + 2 * pin;
    let spec = GenSpec {
        coupling_prob: rng.gen_range(0.3..1.0),
        planted_redundant: planted,
        coefficient_range: rng.gen_range(1..=4),
        pin_vars: pin,
        ..GenSpec::new(seed, n, d)
    };
    let (sys, meta) = generate(&spec).unwrap();
    let mut rows = sys.constraints().to_vec();
    let src = rows[rng.gen_range(0..rows.len() - planted - 2 * pin)].clone();
    let next = rows.len();
    match kind {
        Kind::EqualityPair => {
            let at = src.lhs(&meta.anchor);
            let mut eq = src.with_row_id(next);
            eq.rhs = at;
            rows.push(eq.clone());
            rows.push(eq.reversed().with_row_id(next + 1));
        }
        Kind::Infeasible => {
            let mut cut = src.reversed().with_row_id(next);
            cut.rhs -= &Scalar::one();
            rows.push(cut);
        }
        _ => {}
    }
    Instance { seed, kind, sys: Li2System::new(d, rows).unwrap() }
}

/// Rows with small random right-hand sides and no planted point.
fn unstructured(rng: &mut ChaCha8Rng, d: usize) -> Li2System {
    let n = rng.gen_range(2..=12);
    let coef = |rng: &mut ChaCha8Rng| {
        let c = rng.gen_range(1..=3);
        Scalar::from_integer(if rng.gen_bool(0.5) { c } else { -c })
    };
    let rows = (0..n)
        .map(|id| {
            let i = rng.gen_range(0..d);
            let mut terms = vec![(i, coef(rng))];
            if d > 1 && rng.gen_bool(0.7) {
                terms.push(((i + rng.gen_range(1..d)) % d, coef(rng)));
            }
            Constraint::new(id, terms, Scalar::from_integer(rng.gen_range(-3..=4)), false).unwrap()
        })
        .collect();
    Li2System::new(d, rows).unwrap()
}
