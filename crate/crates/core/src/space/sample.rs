use rand::Rng;

use super::{key, Point, SearchIr};
use crate::normalize::Domain;
use crate::schema::{PriorKind, Scalar};

fn integral_range(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> (i64, i64) {
    let mut first = lo.ceil();
    if lo_open && first == lo {
        first += 1.0;
    }
    let mut last = hi.floor();
    if hi_open && last == hi {
        last -= 1.0;
    }
    (first as i64, last as i64)
}

/// Draws one value. Categoricals are uniform; continuous domains follow
/// their prior (log-uniform draws are `exp(uniform(ln lo, ln hi))`), and
/// quantized draws are rounded to the nearest multiple and kept inside.
pub fn sample_domain<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Scalar {
    match domain {
        Domain::Cat { values, .. } => values[rng.random_range(0..values.len())].clone(),
        Domain::OpSlot { marker } => Scalar::Str(marker.clone()),
        Domain::Cont { lo, hi, .. } if lo == hi => Scalar::Number(*lo),
        Domain::Cont {
            lo,
            hi,
            lo_open,
            hi_open,
            integer,
            prior,
            ..
        } => {
            let log = prior.kind == PriorKind::LogUniform && *lo > 0.0;
            if *integer {
                let (first, last) = integral_range(*lo, *hi, *lo_open, *hi_open);
                if !log || first < 1 {
                    return Scalar::Number(rng.random_range(first..=last) as f64);
                }
                let (a, b) = ((first as f64 - 0.5).max(0.5).ln(), (last as f64 + 0.5).ln());
                let x = rng
                    .random_range(a..b)
                    .exp()
                    .round()
                    .clamp(first as f64, last as f64);
                return Scalar::Number(x);
            }
            for _ in 0..64 {
                let x = if log {
                    rng.random_range(lo.ln()..hi.ln()).exp()
                } else {
                    rng.random_range(*lo..*hi)
                };
                let x = match prior.quantization {
                    Some(q) => {
                        let rounded = (x / q).round() * q;
                        if domain.contains_number(rounded) {
                            rounded
                        } else {
                            x
                        }
                    }
                    None => x,
                };
                if domain.contains_number(x) {
                    return Scalar::Number(x);
                }
            }
            domain.default_scalar()
        }
    }
}

fn sample_into<R: Rng + ?Sized>(
    ir: &SearchIr,
    rng: &mut R,
    forced: Option<usize>,
    point: &mut Point,
) {
    match ir {
        SearchIr::Steps { steps, .. } => {
            let mut forced = forced;
            for step in steps.values() {
                let f = if step.root_choice().is_some() {
                    forced.take()
                } else {
                    None
                };
                sample_into(step, rng, f, point);
            }
        }
        SearchIr::Choice {
            discriminant,
            branches,
        } => {
            let index = forced.unwrap_or_else(|| rng.random_range(0..branches.len()));
            let branch = &branches[index];
            point.insert(discriminant.clone(), Scalar::Str(branch.value.clone()));
            sample_into(&branch.body, rng, None, point);
        }
        SearchIr::Leaf(leaf) => {
            let disjunct = &leaf.nf.disjuncts[rng.random_range(0..leaf.nf.disjuncts.len())];
            for (name, domain) in disjunct {
                point.insert(key(&leaf.path, name), sample_domain(domain, rng));
            }
            for slot in leaf.slots.values() {
                sample_into(slot, rng, None, point);
            }
        }
    }
}

/// Random point: choice branches uniform, disjuncts uniform within a leaf,
/// values by domain.
pub fn sample_point<R: Rng + ?Sized>(ir: &SearchIr, rng: &mut R) -> Point {
    let mut point = Point::new();
    sample_into(ir, rng, None, &mut point);
    point
}

/// Like [`sample_point`] with the root choice fixed to branch `branch`.
pub fn sample_point_in_branch<R: Rng + ?Sized>(ir: &SearchIr, rng: &mut R, branch: usize) -> Point {
    let mut point = Point::new();
    sample_into(ir, rng, Some(branch), &mut point);
    point
}
