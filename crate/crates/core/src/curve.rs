//! Metric Jordan curves parameterized by the circle, and their subdivision
//! into arcs of equal diameter.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diameter::DiameterFunction;
use crate::dyadic::{CirclePoint, GeneralArc};
use crate::metric::{self, Bracket};
use crate::{rng, Error, Result};

/// Grid depth used for arc diameters of model circles.
const MODEL_DEPTH: u32 = 24;
/// Bisection steps per local equalization.
const BISECTION_STEPS: u32 = 60;
/// Rounds of the shrinking regularization schedule.
const EPSILON_ROUNDS: u32 = 5;

/// A closed polygon in the plane, parameterized by normalized arc length.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    points: Vec<[f64; 2]>,
    /// Normalized arc length at each vertex; `cum[0] = 0`.
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Domain("a closed polyline needs at least 3 vertices".into()));
        }
        let n = points.len();
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            if len == 0.0 {
                return Err(Error::Domain(format!("repeated vertex at index {i}")));
            }
            acc += len;
            cum.push(acc);
        }
        for c in &mut cum {
            *c /= acc;
        }
        Ok(Polyline { points, cum })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// The point at normalized arc length `t`.
    pub fn at(&self, t: f64) -> [f64; 2] {
        let t = t.rem_euclid(1.0);
        let i = self.cum.partition_point(|&c| c <= t).saturating_sub(1).min(self.points.len() - 1);
        let (a, b) = (self.points[i], self.points[(i + 1) % self.points.len()]);
        let w = (t - self.cum[i]) / (self.cum[i + 1] - self.cum[i]);
        [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
    }

    /// Vertices with parameter strictly inside the forward range `(s, s+len)`.
    fn vertices_in(&self, s: f64, len: f64) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.cum[..self.points.len()].iter().enumerate().filter_map(move |(i, &c)| {
            let off = (c - s).rem_euclid(1.0);
            (off > 0.0 && off < len).then_some(self.points[i])
        })
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Largest pairwise distance of a planar point set, via its convex hull.
pub fn planar_diameter(points: &[[f64; 2]]) -> f64 {
    let hull = convex_hull(points);
    let mut best: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            best = best.max(dist(hull[i], hull[j]));
        }
    }
    best
}

/// Andrew's monotone chain; collinear points are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// A metric Jordan curve parameterized by `𝕊¹ = [0,1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Curve {
    /// The circle of diameter 1 with the chord metric.
    RoundCircle,
    /// A closed polygon with the plane metric.
    Polyline(Polyline),
    /// The circle with the chain metric of a diameter function.
    ModelCircle(Box<DiameterFunction>),
    /// The circle with the metric `λ(s,t)^ε`.
    SnowflakePower { epsilon: f64 },
}

/// Output of [`Curve::equal_diameter_split`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Split {
    /// Division points `s_1 < … < s_{N-1}` in the direction of the arc.
    pub points: Vec<CirclePoint>,
    /// Diameters of the `N` pieces.
    pub diameters: Vec<f64>,
    /// `(max - min) / max` over the pieces.
    pub spread: f64,
}

/// Forward distance from `s` to `t`, exact for dyadic points.
fn forward(s: &CirclePoint, t: &CirclePoint) -> f64 {
    s.forward_to(t)
}

impl Curve {
    pub fn polyline(points: Vec<[f64; 2]>) -> Result<Self> {
        Ok(Curve::Polyline(Polyline::new(points)?))
    }

    pub fn model(df: DiameterFunction) -> Self {
        Curve::ModelCircle(Box::new(df))
    }

    pub fn snowflake_power(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Domain(format!("epsilon {epsilon} outside (0,1]")));
        }
        Ok(Curve::SnowflakePower { epsilon })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Curve::RoundCircle => "round_circle",
            Curve::Polyline(_) => "polyline",
            Curve::ModelCircle(_) => "model_circle",
            Curve::SnowflakePower { .. } => "snowflake_power",
        }
    }

    /// Distance between the curve points with parameters `s` and `t`.
    pub fn point_distance(&self, s: &CirclePoint, t: &CirclePoint) -> Result<Bracket<f64>> {
        let exact = |v: f64| Ok(Bracket::exact(v, 0));
        match self {
            Curve::RoundCircle => exact((std::f64::consts::PI * forward(s, t)).sin().abs()),
            Curve::Polyline(p) => exact(dist(p.at(s.value()), p.at(t.value()))),
            Curve::ModelCircle(df) => metric::fine_distance(df, s, t),
            Curve::SnowflakePower { epsilon } => {
                let u = forward(s, t);
                exact(u.min(1.0 - u).powf(*epsilon))
            }
        }
    }

    /// Diameter of the sub-curve over `arc`. Exact for the closed-form
    /// kinds; a certified bracket for model circles, refined with more
    /// sample points until its relative width is below `tol` or the sample
    /// budget runs out.
    pub fn arc_diam(&self, arc: &GeneralArc, tol: f64) -> Result<Bracket<f64>> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::Domain(format!("tolerance {tol} must be positive")));
        }
        let len = arc.length();
        let exact = |v: f64| Ok(Bracket::exact(v, 0));
        match self {
            Curve::RoundCircle => {
                exact(if len >= 0.5 { 1.0 } else { (std::f64::consts::PI * len).sin() })
            }
            Curve::Polyline(p) => {
                if arc.is_whole() {
                    return exact(planar_diameter(&p.points));
                }
                let s = arc.start().value();
                let mut pts = vec![p.at(s), p.at(arc.end().value())];
                pts.extend(p.vertices_in(s, len));
                exact(planar_diameter(&pts))
            }
            Curve::SnowflakePower { epsilon } => exact(len.min(0.5).powf(*epsilon)),
            Curve::ModelCircle(df) => {
                let depth = MODEL_DEPTH.min(crate::dyadic::MAX_LEVEL / df.base_exponent());
                let mut best = metric::arc_diameter(df, arc, depth)?;
                let mut samples = 32;
                while best.width() > tol * best.upper && samples <= 128 {
                    let b = metric::arc_diameter_sampled(df, arc, depth, samples)?;
                    best = Bracket {
                        lower: best.lower.max(b.lower),
                        upper: best.upper.min(b.upper),
                        ..best
                    };
                    samples *= 4;
                }
                Ok(best)
            }
        }
    }

    /// Diameter of the whole curve.
    pub fn diameter(&self) -> Result<Bracket<f64>> {
        self.arc_diam(&GeneralArc::whole_from(CirclePoint::ZERO), 1e-9)
    }

    /// `min(diam [s,t], diam [t,s])`, the diameter distance.
    pub fn diameter_distance(&self, s: &CirclePoint, t: &CirclePoint, tol: f64) -> Result<Bracket<f64>> {
        if (s.level().is_some() && s == t) || s.value() == t.value() {
            return Ok(Bracket::exact(0.0, 0));
        }
        // These curves are 1-bounded-turning: the shorter arc's diameter is the chord.
        if !matches!(self, Curve::Polyline(_)) {
            return self.point_distance(s, t);
        }
        let a = self.arc_diam(&GeneralArc::new(*s, *t)?, tol)?;
        let b = self.arc_diam(&GeneralArc::new(*t, *s)?, tol)?;
        Ok(Bracket {
            lower: a.lower.min(b.lower),
            upper: a.upper.min(b.upper),
            depth: a.depth.max(b.depth),
            certified: a.certified && b.certified,
        })
    }

    /// Lower estimate of the bounded-turning constant from random pairs.
    pub fn bt_constant_estimate(&self, samples: usize, seed: u64) -> Result<f64> {
        if samples == 0 {
            return Err(Error::Domain("at least one sample is needed".into()));
        }
        let mut rng = rng::stream(seed, 11);
        let mut best: f64 = 1.0;
        for _ in 0..samples {
            let s = CirclePoint::from_f64(rng.gen::<f64>())?;
            let t = CirclePoint::from_f64(rng.gen::<f64>())?;
            if s.value() == t.value() {
                continue;
            }
            let d = self.point_distance(&s, &t)?.midpoint();
            if d > 0.0 {
                best = best.max(self.diameter_distance(&s, &t, 1e-6)?.midpoint() / d);
            }
        }
        Ok(best)
    }

    /// Half-width in parameter of a window containing every point within
    /// metric distance `r` of a given point.
    pub fn param_radius(&self, r: f64) -> f64 {
        match self {
            Curve::RoundCircle => {
                if r >= 1.0 {
                    0.5
                } else {
                    r.asin() / std::f64::consts::PI
                }
            }
            Curve::Polyline(_) => 0.5,
            Curve::SnowflakePower { epsilon } => r.powf(1.0 / epsilon).min(0.5),
            Curve::ModelCircle(df) => model_param_radius(df, r),
        }
    }

    /// Division points `s_1, …, s_{N-1}` of `arc` into `n` subarcs of equal
    /// diameter, by repeated local equalization of adjacent pairs.
    ///
    /// Each pass moves one shared endpoint by bisection so that its two
    /// neighbouring pieces have equal regularized diameter
    /// `diam + ε·length`. The term `ε·length` makes the comparison strictly
    /// monotone; `ε` halves over five rounds, each warm-started from the
    /// last, and a final round uses `ε = 0`.
    pub fn equal_diameter_split(&self, arc: &GeneralArc, n: usize, tol: f64) -> Result<Split> {
        if n < 2 {
            return Err(Error::Domain(format!("cannot split into {n} pieces")));
        }
        let a = arc.start();
        let len = arc.length();
        let end = arc.end();
        let at = |x: f64| -> Result<CirclePoint> {
            if x <= 0.0 {
                Ok(a)
            } else if x >= 1.0 {
                Ok(end)
            } else {
                CirclePoint::from_f64(a.value() + x * len)
            }
        };
        let diam_tol = (tol * 0.1).max(1e-12);
        let piece = |x0: f64, x1: f64| -> Result<f64> {
            Ok(self.arc_diam(&GeneralArc::new(at(x0)?, at(x1)?)?, diam_tol)?.midpoint())
        };
        let mut x: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let initial = self.arc_diam(arc, diam_tol)?.midpoint();
        let mut schedule: Vec<f64> = (1..=EPSILON_ROUNDS).map(|k| initial * 0.5f64.powi(k as i32)).collect();
        schedule.push(0.0);
        let sweeps = 40 * n + 40;
        for eps in schedule {
            let reg = |x0: f64, x1: f64| -> Result<f64> { Ok(piece(x0, x1)? + eps * (x1 - x0) * len) };
            for _ in 0..sweeps {
                let mut moved: f64 = 0.0;
                for i in 1..n {
                    let (mut lo, mut hi) = (x[i - 1], x[i + 1]);
                    let mut found = None;
                    for _ in 0..BISECTION_STEPS {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        let g = reg(x[i - 1], mid)? - reg(mid, x[i + 1])?;
                        if g == 0.0 {
                            found = Some(mid);
                            break;
                        }
                        if g < 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let new = found.unwrap_or(0.5 * (lo + hi));
                    moved = moved.max((new - x[i]).abs());
                    x[i] = new;
                }
                if moved <= 1e-15 {
                    break;
                }
            }
        }
        let diameters = (0..n).map(|i| piece(x[i], x[i + 1])).collect::<Result<Vec<_>>>()?;
        let max = diameters.iter().cloned().fold(0.0, f64::max);
        let min = diameters.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = if max > 0.0 { (max - min) / max } else { 0.0 };
        if spread > tol {
            return Err(Error::Split {
                best_phi: spread,
                detail: format!("{n}-way split of {arc} did not equalize within {tol}"),
            });
        }
        let points = x[1..n].iter().map(|&v| at(v)).collect::<Result<Vec<_>>>()?;
        Ok(Split { points, diameters, spread })
    }

    pub fn to_json_value(&self) -> Value {
        match self {
            Curve::RoundCircle => json!({ "kind": "round_circle" }),
            Curve::Polyline(p) => json!({ "kind": "polyline", "points": p.points }),
            Curve::ModelCircle(df) => json!({ "kind": "model_circle", "model": df.to_json_value() }),
            Curve::SnowflakePower { epsilon } => json!({ "kind": "snowflake_power", "epsilon": epsilon }),
        }
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse("curve needs a kind".into()))?;
        match kind {
            "round_circle" => Ok(Curve::RoundCircle),
            "polyline" => {
                let pts: Vec<[f64; 2]> = serde_json::from_value(
                    v.get("points").cloned().ok_or_else(|| Error::Parse("polyline needs points".into()))?,
                )?;
                Curve::polyline(pts)
            }
            "model_circle" => {
                let model = v.get("model").cloned().ok_or_else(|| Error::Parse("model_circle needs a model".into()))?;
                Ok(Curve::model(serde_json::from_value(model)?))
            }
            "snowflake_power" => {
                let e = v
                    .get("epsilon")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| Error::Parse("snowflake_power needs epsilon".into()))?;
                Curve::snowflake_power(e)
            }
            other => Err(Error::Parse(format!("unknown curve kind {other:?}"))),
        }
    }
}

impl Serialize for Curve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Curve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Curve::from_json_value(&v).map_err(serde::de::Error::custom)
    }
}

/// If `d(x,y) ≤ r`, one of the two arcs between `x` and `y` has diameter at
/// most `r`. When every grid arc of generation `n` has `Δ > r`, that arc
/// contains none of them, so its length is below `2·2^{-mn}`.
fn model_param_radius(df: &DiameterFunction, r: f64) -> f64 {
    let m = df.base_exponent();
    let table = df.counts_table(16 / m).ok();
    let step = 0.5f64.powi(m as i32).min(df.parameter().value());
    let mut n = 0;
    let mut min_delta = 1.0;
    while m * (n + 1) <= crate::dyadic::MAX_LEVEL {
        let next = match &table {
            Some(t) if ((n + 1) as usize) < t.len() => t[(n + 1) as usize]
                .iter()
                .map(|&(h, s)| df.factor_f64(h, s))
                .fold(f64::INFINITY, f64::min),
            _ => min_delta * step,
        };
        if next <= r {
            break;
        }
        n += 1;
        min_delta = next;
    }
    if min_delta <= r {
        return 0.5;
    }
    (2.0 * 0.5f64.powi((m * n) as i32)).min(0.5)
}

/// Nested subdivisions of a curve into `base^n` arcs per generation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubdivisionTree {
    base: usize,
    /// `starts[n][k]` is the initial parameter of `A^n_k`.
    starts: Vec<Vec<CirclePoint>>,
    /// `diameters[n][k] = diam(A^n_k)`.
    diameters: Vec<Vec<f64>>,
    max_diameter: Vec<f64>,
    /// Worst `(max - min)/max` among the equal-diameter splits.
    worst_spread: f64,
}

/// Largest number of arcs a tree may hold.
const TREE_BUDGET: usize = 1 << 22;

impl SubdivisionTree {
    /// Repeated `base`-way equal-diameter splits of the whole curve,
    /// starting at `anchor`, to `depth` generations.
    pub fn build(curve: &Curve, base: usize, depth: u32, tol: f64, anchor: CirclePoint) -> Result<Self> {
        if base < 2 {
            return Err(Error::Domain(format!("base {base} must be at least 2")));
        }
        let total: f64 = (0..=depth).map(|g| (base as f64).powi(g as i32)).sum();
        if total > TREE_BUDGET as f64 {
            return Err(Error::Resource(format!(
                "a {base}-ary tree of depth {depth} has {total} arcs, above the budget {TREE_BUDGET}"
            )));
        }
        let whole = GeneralArc::whole_from(anchor);
        let mut tree = SubdivisionTree {
            base,
            starts: vec![vec![anchor]],
            diameters: vec![vec![curve.arc_diam(&whole, tol)?.midpoint()]],
            max_diameter: vec![],
            worst_spread: 0.0,
        };
        tree.max_diameter.push(tree.diameters[0][0]);
        for n in 0..depth as usize {
            let count = tree.starts[n].len();
            let mut starts = Vec::with_capacity(count * base);
            let mut diams = Vec::with_capacity(count * base);
            for k in 0..count {
                let arc = tree.arc(n as u32, k)?;
                let split = curve.equal_diameter_split(&arc, base, tol)?;
                tree.worst_spread = tree.worst_spread.max(split.spread);
                starts.push(arc.start());
                starts.extend(split.points);
                diams.extend(split.diameters);
            }
            tree.max_diameter.push(diams.iter().cloned().fold(0.0, f64::max));
            tree.starts.push(starts);
            tree.diameters.push(diams);
        }
        Ok(tree)
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn depth(&self) -> u32 {
        self.starts.len() as u32 - 1
    }

    /// `A^n_k`.
    pub fn arc(&self, n: u32, k: usize) -> Result<GeneralArc> {
        let starts = self
            .starts
            .get(n as usize)
            .ok_or_else(|| Error::Domain(format!("generation {n} beyond tree depth")))?;
        if n == 0 {
            return Ok(GeneralArc::whole_from(starts[0]));
        }
        GeneralArc::new(starts[k], starts[(k + 1) % starts.len()])
    }

    pub fn start(&self, n: u32, k: usize) -> CirclePoint {
        let s = &self.starts[n as usize];
        s[k % s.len()]
    }

    pub fn diameter(&self, n: u32, k: usize) -> f64 {
        self.diameters[n as usize][k]
    }

    pub fn diameters(&self, n: u32) -> &[f64] {
        &self.diameters[n as usize]
    }

    pub fn max_diameters(&self) -> &[f64] {
        &self.max_diameter
    }

    pub fn worst_spread(&self) -> f64 {
        self.worst_spread
    }

    pub fn to_json_value(&self) -> Value {
        let gens: Vec<Value> = self
            .starts
            .iter()
            .zip(&self.diameters)
            .map(|(s, d)| {
                json!({
                    "starts": s.iter().map(|p| p.value()).collect::<Vec<_>>(),
                    "diameters": d,
                })
            })
            .collect();
        json!({ "base": self.base, "generations": gens, "max_diameter": self.max_diameter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diameter::{NamedRule, Param};

    fn pt(s: &str) -> CirclePoint {
        CirclePoint::parse(s).unwrap()
    }

    fn square() -> Curve {
        Curve::polyline(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn extremal() -> Curve {
        Curve::model(DiameterFunction::rule(1, Param::parse("0.7").unwrap(), NamedRule::AllSnow, 0).unwrap())
    }

    #[test]
    fn arc_diam_examples() {
        let quarter = GeneralArc::parse("0", "1/4").unwrap();
        let d = Curve::RoundCircle.arc_diam(&quarter, 1e-9).unwrap();
        assert!((d.upper - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(square().arc_diam(&quarter, 1e-9).unwrap().upper, 1.0);
        let d = extremal().arc_diam(&GeneralArc::parse("1/4", "1/2").unwrap(), 1e-9).unwrap();
        assert_eq!((d.lower, d.upper), (0.49, 0.49));
    }

    #[test]
    fn diameter_distance_examples() {
        let c = Curve::RoundCircle;
        assert_eq!(c.diameter_distance(&pt("0"), &pt("1/2"), 1e-9).unwrap().upper, 1.0);
        let d = c.diameter_distance(&pt("0"), &pt("1/4"), 1e-9).unwrap();
        assert!((d.upper - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(c.diameter_distance(&pt("1/3"), &pt("1/3"), 1e-9).unwrap().upper, 0.0);
    }

    #[test]
    fn bt_constants() {
        assert!((Curve::RoundCircle.bt_constant_estimate(200, 1).unwrap() - 1.0).abs() < 1e-9);
        assert!((extremal().bt_constant_estimate(50, 1).unwrap() - 1.0).abs() < 1e-6);
        assert!(square().bt_constant_estimate(500, 2).unwrap() >= 1.0);
    }

    #[test]
    fn split_examples() {
        let segment = Curve::polyline(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1e-3], [0.0, 1e-3]]).unwrap();
        let side = GeneralArc::new(CirclePoint::ZERO, CirclePoint::from_f64(1.0 / (2.0 + 2e-3)).unwrap()).unwrap();
        let s = segment.equal_diameter_split(&side, 3, 1e-9).unwrap();
        let xs: Vec<f64> = s.points.iter().map(|p| p.value() * (2.0 + 2e-3)).collect();
        assert!((xs[0] - 1.0 / 3.0).abs() < 1e-9 && (xs[1] - 2.0 / 3.0).abs() < 1e-9);

        let whole = GeneralArc::whole_from(CirclePoint::ZERO);
        let s = Curve::RoundCircle.equal_diameter_split(&whole, 4, 1e-9).unwrap();
        for (p, want) in s.points.iter().zip([0.25, 0.5, 0.75]) {
            assert!((p.value() - want).abs() < 1e-12);
        }
        assert!((s.diameters[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);

        let s = extremal().equal_diameter_split(&whole, 2, 1e-9).unwrap();
        assert_eq!(s.points, vec![pt("1/2")]);
        assert_eq!(s.diameters, vec![0.7, 0.7]);
    }

    #[test]
    fn lopsided_polyline_splits() {
        let c = Curve::polyline(vec![[0.0, 0.0], [3.0, 0.0], [3.0, 0.5], [1.0, 2.0], [0.0, 1.0]]).unwrap();
        let whole = GeneralArc::whole_from(CirclePoint::ZERO);
        for n in [2, 3, 5] {
            let s = c.equal_diameter_split(&whole, n, 1e-6).unwrap();
            assert!(s.spread <= 1e-6);
        }
    }

    #[test]
    fn trees_shrink() {
        let t = SubdivisionTree::build(&Curve::RoundCircle, 2, 6, 1e-9, CirclePoint::ZERO).unwrap();
        assert_eq!(t.diameters(6).len(), 64);
        for w in t.max_diameters().windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(t.max_diameters()[6] < t.max_diameters()[1]);
    }

    #[test]
    fn param_radius_contains_balls() {
        let c = extremal();
        let x = pt("1/8");
        for r in [0.3, 0.05, 0.004] {
            let w = c.param_radius(r);
            let y = CirclePoint::from_f64(0.125 + w * 1.01).unwrap();
            assert!(c.point_distance(&x, &y).unwrap().lower > r);
        }
    }

    #[test]
    fn curve_json_round_trip() {
        for c in [Curve::RoundCircle, square(), extremal(), Curve::snowflake_power(0.5).unwrap()] {
            let v = serde_json::to_value(&c).unwrap();
            assert_eq!(serde_json::from_value::<Curve>(v).unwrap(), c);
        }
    }
}
