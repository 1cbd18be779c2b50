use rand::seq::IndexedRandom;
use rand::Rng;

use super::{Op, Predicate, QueryExpr};
use crate::report::FeatureValue;
use crate::template::Template;

const ORDERING: [Op; 4] = [Op::Lt, Op::Le, Op::Gt, Op::Ge];

fn predicate<R: Rng>(rng: &mut R, t: &Template) -> Predicate {
    let feats: Vec<_> = t.features().map(|(_, f)| f).collect();
    let f = *feats.choose(rng).expect("template has features");
    match rng.random_range(0..10) {
        0 => return Predicate::new(&f.name, Op::IsNull, None),
        1 => return Predicate::new(&f.name, Op::NotNull, None),
        _ => {}
    }
    if let Some(range) = f.candidates.range() {
        let scaled = rng.random_range(
            range.min_scaled..=range.max_scaled.min(range.min_scaled + 30 * range.scale()),
        );
        let lit = FeatureValue::Number(scaled as f64 / range.scale() as f64);
        let op = if rng.random_bool(0.7) {
            *ORDERING.choose(rng).expect("non-empty")
        } else if rng.random_bool(0.5) {
            Op::Eq
        } else {
            Op::Ne
        };
        Predicate::new(&f.name, op, Some(lit))
    } else {
        let values = f.candidates.distinct_values();
        let v = values.choose(rng).expect("non-empty candidates").clone();
        let op = if rng.random_bool(0.75) {
            Op::Eq
        } else {
            Op::Ne
        };
        Predicate::new(&f.name, op, Some(FeatureValue::Text(v)))
    }
}

/// A well-typed random query of at most `depth` levels.
pub fn random_query<R: Rng>(rng: &mut R, t: &Template, depth: usize) -> QueryExpr {
    if depth == 0 || rng.random_bool(0.35) {
        return QueryExpr::Pred(predicate(rng, t));
    }
    match rng.random_range(0..3) {
        0 => QueryExpr::and(
            random_query(rng, t, depth - 1),
            random_query(rng, t, depth - 1),
        ),
        1 => QueryExpr::or(
            random_query(rng, t, depth - 1),
            random_query(rng, t, depth - 1),
        ),
        _ => QueryExpr::not(random_query(rng, t, depth - 1)),
    }
}
