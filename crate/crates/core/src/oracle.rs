//! Exhaustive small-depth evaluation of the chain metric, independent of
//! the evaluators in [`crate::metric`].
//!
//! Every grid arc up to the given depth is laid out on the unwrapped line
//! `[0, 2)` at resolution `2^{-mD}`. For a forward arc `[a, b]`, `C(p)` is the
//! cheapest family of arcs whose union is connected and covers `[a, p]`:
//!
//! `C(p) = min { Δ(I) + C(l_I) : l_I < p ≤ r_I }`, with `C(p) = 0` for `p ≤ a`.
//!
//! The last arc of any optimal family contains `p` and reaches left of it;
//! what remains must cover `[a, l_I]`. The metric is the cheaper of the two
//! directions.

use num_traits::{One, Zero};

use crate::diameter::DiameterFunction;
use crate::dyadic::{CirclePoint, DyadicArc};
use crate::{Error, Exact, Result};

/// Largest `m · depth` accepted.
pub const MAX_ORACLE_LEVEL: u32 = 14;

/// Exact chain infimum over arcs of grid generation at most `depth`, for
/// grid points of that generation.
pub fn brute_force_distance(
    df: &DiameterFunction,
    x: &CirclePoint,
    y: &CirclePoint,
    depth: u32,
) -> Result<Exact> {
    let m = df.base_exponent();
    let level = m * depth;
    if level > MAX_ORACLE_LEVEL {
        return Err(Error::Resource(format!(
            "exhaustive search at 2^{level} positions exceeds the oracle limit 2^{MAX_ORACLE_LEVEL}"
        )));
    }
    let (ux, uy) = match (x.units(level), y.units(level)) {
        (Some(a), Some(b)) => (a as usize, b as usize),
        _ => {
            return Err(Error::Grid(format!(
                "{x} and {y} must be grid points of generation {depth}"
            )))
        }
    };
    if ux == uy {
        return Ok(Exact::zero());
    }
    let r = 1usize << level;
    // Values of every grid arc, by generation and index.
    let mut values: Vec<Vec<Exact>> = Vec::with_capacity(depth as usize + 1);
    for g in 0..=depth {
        let n = 1u64 << (m * g);
        let row = (0..n)
            .map(|k| df.value_exact(&DyadicArc::new(m * g, k)?))
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    let forward = cover(&values, m, depth, r, ux, if uy > ux { uy } else { uy + r });
    let backward = cover(&values, m, depth, r, uy, if ux > uy { ux } else { ux + r });
    let best = if forward < backward { forward } else { backward };
    Ok(if best > Exact::one() { Exact::one() } else { best })
}

fn cover(values: &[Vec<Exact>], m: u32, depth: u32, r: usize, a: usize, b: usize) -> Exact {
    // c[p - a] for p in a..=b.
    let mut c: Vec<Exact> = vec![Exact::zero(); b - a + 1];
    for p in a + 1..=b {
        let mut best: Option<Exact> = None;
        for g in 0..=depth {
            let w = r >> (m * g);
            let n = 1usize << (m * g);
            let k = p.div_ceil(w) - 1;
            let left = k * w;
            let cost = &values[g as usize][k % n]
                + if left <= a { Exact::zero() } else { c[left - a].clone() };
            if best.as_ref().is_none_or(|v| cost < *v) {
                best = Some(cost);
            }
        }
        c[p - a] = best.expect("some generation contains p");
    }
    c[b - a].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diameter::{NamedRule, Param};
    use crate::ratio;

    fn pt(s: &str) -> CirclePoint {
        CirclePoint::parse(s).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let half = DiameterFunction::rule(1, Param::parse("1/2").unwrap(), NamedRule::AllHalf, 0).unwrap();
        assert_eq!(brute_force_distance(&half, &pt("0"), &pt("1/4"), 4).unwrap(), ratio(1, 4));
        let ex = DiameterFunction::rule(1, Param::parse("0.7").unwrap(), NamedRule::AllSnow, 0).unwrap();
        assert_eq!(brute_force_distance(&ex, &pt("0"), &pt("1/2"), 3).unwrap(), ratio(7, 10));
        let d = brute_force_distance(&ex, &pt("0"), &pt("1/16"), 4).unwrap();
        assert_eq!(d, ex.value_exact(&DyadicArc::new(4, 0).unwrap()).unwrap());
        for df in [&half, &ex] {
            let d = brute_force_distance(df, &pt("0"), &pt("1/16"), 4).unwrap();
            assert!(d <= df.value_exact(&DyadicArc::new(4, 0).unwrap()).unwrap());
        }
    }

    #[test]
    fn oracle_limits() {
        let half = DiameterFunction::rule(1, Param::parse("1/2").unwrap(), NamedRule::AllHalf, 0).unwrap();
        assert!(matches!(brute_force_distance(&half, &pt("0"), &pt("1/4"), 20), Err(Error::Resource(_))));
        assert!(matches!(brute_force_distance(&half, &pt("0"), &pt("1/64"), 4), Err(Error::Grid(_))));
        assert_eq!(brute_force_distance(&half, &pt("1/4"), &pt("1/4"), 4).unwrap(), Exact::zero());
    }
}
