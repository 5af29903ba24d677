//! Empirical bi-Lipschitz distortion between metrics on the circle, and
//! Assouad dimension estimates from separated nets.

use rand::Rng;
use serde::Serialize;

use crate::curve::Curve;
use crate::dyadic::{CirclePoint, DyadicArc, GeneralArc};
use crate::metric::Bracket;
use crate::{rng, Error, Result};

/// A metric on the circle queried by parameter.
pub trait Oracle: Sync {
    fn distance(&self, s: &CirclePoint, t: &CirclePoint) -> Result<Bracket<f64>>;

    fn arc_diameter(&self, arc: &GeneralArc) -> Result<Bracket<f64>>;

    /// Every point within distance `r` of `s` has parameter within this
    /// much of `s`.
    fn param_radius(&self, _r: f64) -> f64 {
        0.5
    }
}

/// Relative tolerance for arc diameters queried by the estimators.
const ORACLE_TOL: f64 = 1e-3;

impl Oracle for Curve {
    fn distance(&self, s: &CirclePoint, t: &CirclePoint) -> Result<Bracket<f64>> {
        self.point_distance(s, t)
    }

    fn arc_diameter(&self, arc: &GeneralArc) -> Result<Bracket<f64>> {
        self.arc_diam(arc, ORACLE_TOL)
    }

    fn param_radius(&self, r: f64) -> f64 {
        Curve::param_radius(self, r)
    }
}

/// The diameter distance of a curve, multiplied by `scale`.
#[derive(Clone, Debug)]
pub struct DiameterDistance<'a> {
    pub curve: &'a Curve,
    pub scale: f64,
    pub tol: f64,
}

impl<'a> DiameterDistance<'a> {
    pub fn new(curve: &'a Curve, scale: f64) -> Self {
        DiameterDistance { curve, scale, tol: ORACLE_TOL }
    }
}

fn scaled(b: Bracket<f64>, k: f64) -> Bracket<f64> {
    Bracket { lower: b.lower * k, upper: b.upper * k, ..b }
}

impl Oracle for DiameterDistance<'_> {
    fn distance(&self, s: &CirclePoint, t: &CirclePoint) -> Result<Bracket<f64>> {
        Ok(scaled(self.curve.diameter_distance(s, t, self.tol)?, self.scale))
    }

    fn arc_diameter(&self, arc: &GeneralArc) -> Result<Bracket<f64>> {
        Ok(scaled(self.curve.arc_diam(arc, self.tol)?, self.scale))
    }

    fn param_radius(&self, r: f64) -> f64 {
        self.curve.param_radius(r / self.scale)
    }
}

/// Image of a parameter under a correspondence, with the metric diameter of
/// the region it is known to lie in (zero when exact).
pub type Mapped = (CirclePoint, f64);

/// One bucket of the log-ratio histogram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    pub log2_lo: f64,
    pub log2_hi: f64,
    pub count: usize,
}

/// Output of [`bilip_report`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub pairs: usize,
    /// Largest central ratio `d_b / d_a`.
    pub max_ratio: f64,
    /// Smallest central ratio `d_b / d_a`.
    pub min_ratio: f64,
    /// `max(max_ratio, 1/min_ratio)`.
    #[serde(rename = "L_est")]
    pub l_est: f64,
    /// The same with every bracket resolved against compliance.
    #[serde(rename = "L_upper")]
    pub l_upper: f64,
    /// The bound the violations are counted against.
    pub bound: f64,
    /// Pairs whose whole ratio bracket lies outside `[1/bound, bound]`.
    pub violations: usize,
    /// Largest relative width `hi/lo - 1` of a ratio bracket.
    pub bracket_slack: f64,
    pub histogram: Vec<Bucket>,
}

/// Dyadic level of the stratified endpoint samples.
const ENDPOINT_LEVEL: u32 = 10;

/// Samples `pairs` parameter pairs and compares `a` at `(s,t)` with `b` at
/// the images under `phi`. With `grid_level` every pair is drawn from the
/// dyadic endpoints of that generation; without it, half the pairs are
/// endpoints of generation 10 and half are uniform.
pub fn bilip_report(
    a: &dyn Oracle,
    b: &dyn Oracle,
    phi: &dyn Fn(&CirclePoint) -> Result<Mapped>,
    pairs: usize,
    bound: f64,
    seed: u64,
    grid_level: Option<u32>,
) -> Result<DistortionReport> {
    if pairs == 0 {
        return Err(Error::Domain("at least one pair is needed".into()));
    }
    let level = grid_level.unwrap_or(ENDPOINT_LEVEL);
    if level == 0 || level > crate::dyadic::MAX_LEVEL {
        return Err(Error::Domain(format!("grid level {level} outside 1..=62")));
    }
    let mut rng = rng::stream(seed, 21);
    let mut report = DistortionReport {
        pairs: 0,
        max_ratio: 0.0,
        min_ratio: f64::INFINITY,
        l_est: 1.0,
        l_upper: 1.0,
        bound,
        violations: 0,
        bracket_slack: 0.0,
        histogram: (-8..8)
            .map(|i| Bucket { log2_lo: i as f64 * 0.5, log2_hi: (i + 1) as f64 * 0.5, count: 0 })
            .collect(),
    };
    let draw = |dyadic: bool, rng: &mut rand_chacha::ChaCha8Rng| -> Result<CirclePoint> {
        if dyadic {
            CirclePoint::dyadic(rng.gen_range(0..1u64 << level), level)
        } else {
            CirclePoint::from_f64(rng.gen::<f64>())
        }
    };
    let mut i = 0;
    while report.pairs < pairs {
        let dyadic = grid_level.is_some() || i % 2 == 0;
        i += 1;
        let s = draw(dyadic, &mut rng)?;
        let t = draw(dyadic, &mut rng)?;
        if s == t || s.value() == t.value() {
            continue;
        }
        let da = a.distance(&s, &t)?;
        let (fs, rs) = phi(&s)?;
        let (ft, rt) = phi(&t)?;
        let raw = b.distance(&fs, &ft)?;
        let db = Bracket { lower: (raw.lower - rs - rt).max(0.0), upper: raw.upper + rs + rt, ..raw };
        if da.upper == 0.0 || db.upper == 0.0 {
            if da.lower > 0.0 || db.lower > 0.0 {
                return Err(Error::Correspondence(format!(
                    "{s} and {t} collapse in one metric but not the other"
                )));
            }
            continue;
        }
        report.pairs += 1;
        let central = db.midpoint() / da.midpoint();
        let lo = db.lower / da.upper;
        let hi = if da.lower > 0.0 { db.upper / da.lower } else { f64::INFINITY };
        report.max_ratio = report.max_ratio.max(central);
        report.min_ratio = report.min_ratio.min(central);
        report.l_upper = report.l_upper.max(hi).max(1.0 / lo);
        if lo > bound || hi < 1.0 / bound {
            report.violations += 1;
        }
        if lo > 0.0 {
            report.bracket_slack = report.bracket_slack.max(hi / lo - 1.0);
        }
        let bin = ((central.log2() * 2.0).floor() as i64 + 8).clamp(0, 15) as usize;
        report.histogram[bin].count += 1;
    }
    report.l_est = report.max_ratio.max(1.0 / report.min_ratio).max(1.0);
    Ok(report)
}

/// Counts at one scale of [`assouad_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleCount {
    pub r: f64,
    pub mean_count: f64,
    pub max_count: usize,
}

/// Output of [`assouad_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssouadReport {
    pub alpha: f64,
    pub radius: f64,
    pub centers: usize,
    pub scales: Vec<ScaleCount>,
    /// Residuals of the least-squares fit, per scale.
    pub residuals: Vec<f64>,
}

/// Least-squares slope and residuals of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::Domain("a slope needs at least two scales".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("degenerate fit: all scales coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let residuals = x.iter().zip(y).map(|(a, b)| b - (my + slope * (a - mx))).collect();
    Ok((slope, residuals))
}

/// Points of the ball `B(c, radius)` that are `r/2`-dense in it: start
/// points of dyadic arcs of diameter at most `r/2` covering its parameter
/// window. Arcs certainly outside the ball are pruned, and arcs certainly
/// inside it are refined without further distance queries.
fn candidates(o: &dyn Oracle, c: &CirclePoint, radius: f64, r: f64) -> Result<Vec<CirclePoint>> {
    let w = o.param_radius(radius);
    let mut stack: Vec<(DyadicArc, bool)> = Vec::new();
    if w >= 0.25 {
        stack.push((DyadicArc::WHOLE, false));
    } else {
        let g = (-w.log2()).floor() as u32;
        let k = (c.value() * (1u64 << g) as f64).floor() as i128;
        for dk in [1, 0, -1] {
            stack.push((DyadicArc::wrapped(g, k + dk)?, false));
        }
    }
    let mut out = Vec::new();
    while let Some((arc, inside)) = stack.pop() {
        let diam = if arc.generation() == 0 { 1.0 } else { o.arc_diameter(&arc.into())?.upper };
        let mut inside = inside;
        if !inside {
            let d = o.distance(c, &arc.start())?;
            if d.lower - diam > radius {
                continue;
            }
            inside = d.upper + diam <= radius;
            if diam <= 0.5 * r && d.lower > radius {
                continue;
            }
        }
        if diam <= 0.5 * r || arc.generation() >= crate::dyadic::MAX_LEVEL {
            out.push(arc.start());
        } else {
            let kids = arc.children(1)?;
            stack.push((kids[1], inside));
            stack.push((kids[0], inside));
        }
    }
    out.sort_by(|a, b| c.forward_to(a).total_cmp(&c.forward_to(b)));
    Ok(out)
}

/// Start points of the parameter halves of `arc`, refined until each piece
/// has diameter at most `r`, in order along the arc.
pub fn dense_points(o: &dyn Oracle, arc: &GeneralArc, r: f64, budget: usize) -> Result<Vec<CirclePoint>> {
    let mut stack = vec![*arc];
    let mut out = Vec::new();
    while let Some(a) = stack.pop() {
        if out.len() + stack.len() > budget {
            return Err(Error::Resource(format!("more than {budget} sample points needed at scale {r}")));
        }
        let len = a.length();
        if o.arc_diameter(&a)?.upper <= r || len < 1e-15 {
            out.push(a.start());
            continue;
        }
        let mid = CirclePoint::from_f64(a.start().value() + 0.5 * len)?;
        let mid = match (a.start().level(), a.units()) {
            (Some(_), Some(u)) if u.len % 2 == 0 => CirclePoint::dyadic(u.start + u.len / 2, u.level)?,
            (Some(_), Some(u)) if u.level < crate::dyadic::MAX_LEVEL => {
                CirclePoint::dyadic(2 * u.start + u.len, u.level + 1)?
            }
            _ => mid,
        };
        stack.push(GeneralArc::new(mid, a.end())?);
        stack.push(GeneralArc::new(a.start(), mid)?);
    }
    out.push(arc.end());
    Ok(out)
}

/// Greedy maximal `r`-separated subset of `points`, taken in order. Only
/// already-chosen points within the oracle's parameter window are compared.
pub fn separated_subset(o: &dyn Oracle, points: &[CirclePoint], r: f64) -> Result<Vec<CirclePoint>> {
    let w = o.param_radius(r);
    let mut chosen: Vec<CirclePoint> = Vec::new();
    'next: for p in points {
        for q in chosen.iter().rev() {
            let gap = q.forward_to(p).min(p.forward_to(q));
            if w < 0.5 && gap > w {
                continue;
            }
            if o.distance(p, q)?.lower < r {
                continue 'next;
            }
        }
        chosen.push(*p);
    }
    Ok(chosen)
}

/// Slope of `log card(S)` against `log(R/r)` for greedy `r`-nets `S` of
/// balls of radius `R = radius` around `centers` random points, at scales
/// `r = R/2, R/4, …, R/2^scales`.
pub fn assouad_estimate(
    o: &dyn Oracle,
    radius: f64,
    scales: u32,
    centers: usize,
    seed: u64,
) -> Result<AssouadReport> {
    if scales < 2 || centers == 0 || radius.is_nan() || radius <= 0.0 {
        return Err(Error::Domain("need at least two scales, one center and a positive radius".into()));
    }
    let mut rng = rng::stream(seed, 31);
    let cs = (0..centers)
        .map(|_| CirclePoint::dyadic(rng.gen_range(0..1u64 << 20), 20))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for j in 1..=scales {
        let r = radius * 0.5f64.powi(j as i32);
        let mut total = 0usize;
        let mut max = 0usize;
        for c in &cs {
            let pts = candidates(o, c, radius, r)?;
            let n = separated_subset(o, &pts, r)?.len();
            total += n;
            max = max.max(n);
        }
        out.push(ScaleCount { r, mean_count: total as f64 / centers as f64, max_count: max });
    }
    let x: Vec<f64> = out.iter().map(|s| (radius / s.r).ln()).collect();
    let y: Vec<f64> = out.iter().map(|s| s.mean_count.max(1.0).ln()).collect();
    let (alpha, residuals) = fit_slope(&x, &y)?;
    Ok(AssouadReport { alpha, radius, centers, scales: out, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diameter::{DiameterFunction, NamedRule, Param};

    fn model(p: &str, rule: NamedRule) -> Curve {
        Curve::model(DiameterFunction::rule(1, Param::parse(p).unwrap(), rule, 0).unwrap())
    }

    fn identity(s: &CirclePoint) -> Result<Mapped> {
        Ok((*s, 0.0))
    }

    #[test]
    fn identity_has_no_distortion() {
        let c = Curve::RoundCircle;
        let r = bilip_report(&c, &c, &identity, 200, 8.0, 1, None).unwrap();
        assert_eq!((r.l_est, r.violations, r.pairs), (1.0, 0, 200));
    }

    #[test]
    fn half_model_is_arc_length() {
        let half = model("1/2", NamedRule::AllHalf);
        let lambda = Curve::snowflake_power(1.0).unwrap();
        let r = bilip_report(&half, &lambda, &identity, 300, 1.0 + 1e-9, 2, None).unwrap();
        assert!((r.l_est - 1.0).abs() < 1e-9, "{r:?}");
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn swapping_inverts_ratios() {
        let a = Curve::RoundCircle;
        let b = Curve::snowflake_power(1.0).unwrap();
        let ab = bilip_report(&a, &b, &identity, 300, 8.0, 3, None).unwrap();
        let ba = bilip_report(&b, &a, &identity, 300, 8.0, 3, None).unwrap();
        assert!((ab.l_est - ba.l_est).abs() < 1e-12);
        assert!((ab.max_ratio * ba.min_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slopes() {
        let (s, res) = fit_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && res.iter().all(|r| r.abs() < 1e-12));
        assert!(fit_slope(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn circle_dimension_is_one() {
        let r = assouad_estimate(&Curve::RoundCircle, 0.25, 5, 4, 5).unwrap();
        assert!((r.alpha - 1.0).abs() < 0.1, "{r:?}");
    }
}
