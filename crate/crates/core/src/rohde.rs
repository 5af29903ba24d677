//! Planar snowflakes from 4-adic diameter functions.
//!
//! Start from the unit square, oriented counterclockwise so the exterior
//! lies to the right of every edge. At each level an edge either splits into
//! four equal collinear pieces (HALF) or is replaced by a similar copy of the
//! four-segment arc `A_p` (SNOW) whose tip points to the right. Edge lengths
//! then equal the driving `Δ` up to the factor `1/Δ(J¹)`.

use num_traits::Float;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::diameter::DiameterFunction;
use crate::{rng, Error, Result};

pub type Point<F> = [F; 2];

fn c<F: Float>(x: f64) -> F {
    F::from(x).unwrap_or_else(F::nan)
}

fn sub<F: Float>(a: Point<F>, b: Point<F>) -> Point<F> {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm<F: Float>(a: Point<F>) -> F {
    a[0].hypot(a[1])
}

fn dist<F: Float>(a: Point<F>, b: Point<F>) -> F {
    norm(sub(a, b))
}

/// `a + u·(b-a) + w·right(b-a)`, where `right` turns clockwise.
fn frame<F: Float>(a: Point<F>, b: Point<F>, u: F, w: F) -> Point<F> {
    let v = sub(b, a);
    [a[0] + u * v[0] + w * v[1], a[1] + u * v[1] - w * v[0]]
}

/// The replacement arc `A_p` on the unit base `[0,1]`, tip to the right.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorArc<F> {
    pub p: F,
    /// Angle at the tip.
    pub tip_angle: F,
    /// Distance of the tip from the base.
    pub height: F,
    /// Vertices in template coordinates `(along, right)`.
    pub vertices: [Point<F>; 5],
}

/// `A_p` for `1/4 ≤ p < 1/2`.
pub fn generator_arc<F: Float>(p: F) -> Result<GeneratorArc<F>> {
    let (quarter, half) = (c::<F>(0.25), c::<F>(0.5));
    if !(p >= quarter && p < half) {
        return Err(Error::Domain(format!("p = {:?} outside [1/4, 1/2)", p.to_f64())));
    }
    let height = (p - quarter).sqrt();
    let tip_angle = c::<F>(2.0) * (F::one() / (c::<F>(2.0) * p) - F::one()).asin();
    let vertices = [
        [F::zero(), F::zero()],
        [p, F::zero()],
        [half, height],
        [F::one() - p, F::zero()],
        [F::one(), F::zero()],
    ];
    Ok(GeneratorArc { p, tip_angle, height, vertices })
}

/// `c(p) = 1/2 - p`, the separation constant of child triangles.
pub fn separation_constant<F: Float>(p: F) -> F {
    c::<F>(0.5) - p
}

/// Bounded-turning constant `16/(1-2p)` of every stage.
pub fn bt_bound<F: Float>(p: F) -> F {
    c::<F>(16.0) / (F::one() - c::<F>(2.0) * p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge<F> {
    pub start: Point<F>,
    pub end: Point<F>,
    pub exterior: Side,
    pub diameter: F,
}

/// Stage `Rⁿ`: `4ⁿ` edges forming a closed chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnowPolygon<F> {
    pub level: u32,
    pub edges: Vec<Edge<F>>,
}

impl<F: Float> SnowPolygon<F> {
    /// The unit square, counterclockwise from the origin.
    pub fn square() -> Self {
        let (o, l) = (F::zero(), F::one());
        let v = [[o, o], [l, o], [l, l], [o, l]];
        let edges = (0..4)
            .map(|k| Edge { start: v[k], end: v[(k + 1) % 4], exterior: Side::Right, diameter: l })
            .collect();
        SnowPolygon { level: 1, edges }
    }

    pub fn vertices(&self) -> Vec<Point<F>> {
        self.edges.iter().map(|e| e.start).collect()
    }

    pub fn to_json_value(&self) -> Value {
        let v: Vec<[f64; 2]> = self
            .vertices()
            .iter()
            .map(|p| [p[0].to_f64().unwrap_or(f64::NAN), p[1].to_f64().unwrap_or(f64::NAN)])
            .collect();
        json!({ "level": self.level, "vertices": v })
    }

    /// Next stage with one choice bit per edge (`true` for SNOW).
    fn refine(&self, gen: &GeneratorArc<F>, snow: impl Fn(usize) -> bool) -> Self {
        let quarter = c::<F>(0.25);
        let mut edges = Vec::with_capacity(4 * self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            let (a, b) = match e.exterior {
                Side::Right => (e.start, e.end),
                Side::Left => (e.end, e.start),
            };
            let pts: Vec<Point<F>> = if snow(k) {
                gen.vertices.iter().map(|t| frame(a, b, t[0], t[1])).collect()
            } else {
                (0..5).map(|i| frame(a, b, quarter * c(i as f64), F::zero())).collect()
            };
            let factor = if snow(k) { gen.p } else { quarter };
            let kids = (0..4).map(|i| Edge {
                start: pts[i],
                end: pts[i + 1],
                exterior: Side::Right,
                diameter: e.diameter * factor,
            });
            match e.exterior {
                Side::Right => edges.extend(kids),
                Side::Left => edges.extend(kids.rev().map(|x| Edge {
                    start: x.end,
                    end: x.start,
                    exterior: Side::Left,
                    ..x
                })),
            }
        }
        SnowPolygon { level: self.level + 1, edges }
    }
}

/// Stages `R¹ … R^levels` driven by a 4-adic diameter function with
/// parameter `p`: edge `k` of `Rⁿ` follows the choice of the grid arc
/// `Jⁿ_k`.
pub fn generate<F: Float>(p: F, df: &DiameterFunction, levels: u32) -> Result<Vec<SnowPolygon<F>>> {
    if df.base_exponent() != 2 {
        return Err(Error::Domain(format!("choices must be 4-adic, got base 2^{}", df.base_exponent())));
    }
    let pv = p.to_f64().unwrap_or(f64::NAN);
    let tol = (F::epsilon().to_f64().unwrap_or(0.0) * 8.0).max(1e-12);
    if (df.parameter().value() - pv).abs() > tol {
        return Err(Error::Domain(format!(
            "choices carry parameter {} but p = {pv}",
            df.parameter().value()
        )));
    }
    if levels == 0 || levels > 12 {
        return Err(Error::Domain(format!("levels {levels} outside 1..=12")));
    }
    let gen = generator_arc(p)?;
    let mut out = vec![SnowPolygon::square()];
    for n in 1..levels {
        let next = out[n as usize - 1].refine(&gen, |k| df.choice(n, k as u64));
        out.push(next);
    }
    Ok(out)
}

/// `T(E)`: the isosceles triangle on `E` with height `ratio·diam(E)` on the
/// exterior side; `ratio = √(p-1/4)` gives the envelope of all descendants.
pub fn envelope<F: Float>(e: &Edge<F>, ratio: F) -> [Point<F>; 3] {
    let (a, b) = (e.start, e.end);
    let w = match e.exterior {
        Side::Right => ratio,
        Side::Left => -ratio,
    };
    [a, frame(a, b, c(0.5), w), b]
}

fn cross<F: Float>(o: Point<F>, a: Point<F>, b: Point<F>) -> F {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn point_segment<F: Float>(x: Point<F>, a: Point<F>, b: Point<F>) -> F {
    let v = sub(b, a);
    let len2 = v[0] * v[0] + v[1] * v[1];
    if len2 == F::zero() {
        return dist(x, a);
    }
    let t = ((x[0] - a[0]) * v[0] + (x[1] - a[1]) * v[1]) / len2;
    let t = t.max(F::zero()).min(F::one());
    dist(x, [a[0] + t * v[0], a[1] + t * v[1]])
}

/// How far `x` lies outside the triangle `t` (zero inside).
fn outside_by<F: Float>(x: Point<F>, t: &[Point<F>; 3]) -> F {
    let orient = cross(t[0], t[1], t[2]);
    let mut worst = F::zero();
    for i in 0..3 {
        let (a, b) = (t[i], t[(i + 1) % 3]);
        let side = cross(a, b, x) * orient.signum();
        if side < F::zero() {
            let len = dist(a, b);
            if len > F::zero() {
                worst = worst.max(-side / len);
            }
        }
    }
    worst
}

fn segments_cross<F: Float>(a: Point<F>, b: Point<F>, p: Point<F>, q: Point<F>) -> bool {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let d3 = cross(p, q, a);
    let d4 = cross(p, q, b);
    (d1 * d2 < F::zero()) && (d3 * d4 < F::zero())
}

/// Euclidean distance between two triangles.
pub fn triangle_distance<F: Float>(s: &[Point<F>; 3], t: &[Point<F>; 3]) -> F {
    for i in 0..3 {
        for j in 0..3 {
            if segments_cross(s[i], s[(i + 1) % 3], t[j], t[(j + 1) % 3]) {
                return F::zero();
            }
        }
    }
    if s.iter().any(|&x| outside_by(x, t) == F::zero() && cross(t[0], t[1], t[2]) != F::zero())
        || t.iter().any(|&x| outside_by(x, s) == F::zero() && cross(s[0], s[1], s[2]) != F::zero())
    {
        return F::zero();
    }
    let mut best = F::infinity();
    for i in 0..3 {
        for j in 0..3 {
            best = best.min(point_segment(s[i], t[j], t[(j + 1) % 3]));
            best = best.min(point_segment(t[j], s[i], s[(i + 1) % 3]));
        }
    }
    best
}

/// Nesting and separation of the triangles of one stage and its refinement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub level: u32,
    /// Largest distance by which a child triangle leaves its parent's.
    pub nesting_excess: f64,
    /// Smallest `dist(T(E_i), T(E_{i+2})) / diam(E)` over parents `E`.
    pub min_separation_ratio: f64,
    pub separation_constant: f64,
}

impl EnvelopeReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.nesting_excess <= tol && self.min_separation_ratio >= self.separation_constant - tol
    }
}

/// Checks `T(E_i) ⊂ T(E)` and `dist(T(E₀),T(E₂)), dist(T(E₁),T(E₃)) ≥ c(p)·diam(E)`
/// for every edge `E` of `parent` and its children in `child`.
pub fn triangles<F: Float>(parent: &SnowPolygon<F>, child: &SnowPolygon<F>, p: F) -> Result<EnvelopeReport> {
    if child.edges.len() != 4 * parent.edges.len() {
        return Err(Error::Domain("the second polygon must refine the first".into()));
    }
    let h = (p - c(0.25)).sqrt();
    let mut excess = F::zero();
    let mut ratio = F::infinity();
    for (k, e) in parent.edges.iter().enumerate() {
        let te = envelope(e, h);
        let kids: Vec<[Point<F>; 3]> =
            child.edges[4 * k..4 * k + 4].iter().map(|x| envelope(x, h)).collect();
        if h > F::zero() {
            for t in &kids {
                for &x in t {
                    excess = excess.max(outside_by(x, &te));
                }
            }
        }
        for (i, j) in [(0, 2), (1, 3)] {
            ratio = ratio.min(triangle_distance(&kids[i], &kids[j]) / e.diameter);
        }
    }
    Ok(EnvelopeReport {
        level: parent.level,
        nesting_excess: excess.to_f64().unwrap_or(f64::NAN),
        min_separation_ratio: ratio.to_f64().unwrap_or(f64::NAN),
        separation_constant: separation_constant(p).to_f64().unwrap_or(f64::NAN),
    })
}

/// `φₙ` at the `4ⁿ` endpoints of generation `n`: endpoint `k/4ⁿ` goes to the
/// vertex shared by edges `k-1` and `k`.
pub fn phi_endpoints<F: Float>(poly: &SnowPolygon<F>) -> Vec<Point<F>> {
    poly.vertices()
}

/// Largest deviation of `diam(Eⁿ_k)` from `Δ(Jⁿ_k)/Δ(J¹)`, and of the
/// recorded diameters from the edge lengths.
pub fn diameter_defect(poly: &SnowPolygon<f64>, df: &DiameterFunction) -> Result<f64> {
    let n = poly.level;
    let first = df.value(&crate::dyadic::DyadicArc::new(2, 0)?)?;
    let mut worst: f64 = 0.0;
    for (k, e) in poly.edges.iter().enumerate() {
        let delta = df.value(&crate::dyadic::DyadicArc::new(2 * n, k as u64)?)? / first;
        let len = dist(e.start, e.end);
        worst = worst.max((len - delta).abs()).max((e.diameter - len).abs());
    }
    Ok(worst)
}

/// Upper bound on the Hausdorff distance between a stage and its
/// refinement, pairing each edge with its four children. Distances from
/// the edge to the children are sampled at spacing `δ` and raised by `δ/2`,
/// which bounds the 1-Lipschitz distance function between samples.
pub fn stage_hausdorff<F: Float>(parent: &SnowPolygon<F>, child: &SnowPolygon<F>) -> Result<F> {
    if child.edges.len() != 4 * parent.edges.len() {
        return Err(Error::Domain("the second polygon must refine the first".into()));
    }
    const SAMPLES: usize = 256;
    let mut worst = F::zero();
    for (k, e) in parent.edges.iter().enumerate() {
        let kids = &child.edges[4 * k..4 * k + 4];
        for x in kids {
            worst = worst.max(point_segment(x.end, e.start, e.end));
        }
        let step = F::one() / c(SAMPLES as f64);
        let mut far = F::zero();
        for i in 0..=SAMPLES {
            let x = frame(e.start, e.end, step * c(i as f64), F::zero());
            let d = kids.iter().map(|y| point_segment(x, y.start, y.end)).fold(F::infinity(), F::min);
            far = far.max(d);
        }
        worst = worst.max(far + c::<F>(0.5) * step * dist(e.start, e.end));
    }
    Ok(worst)
}

/// Largest sampled `min(diam γ₁, diam γ₂) / |x − y|` over vertex pairs
/// `x, y`, where `γ₁, γ₂` are the two arcs of the polygon between them.
pub fn bt_estimate(poly: &SnowPolygon<f64>, samples: usize, seed: u64) -> f64 {
    let v = poly.vertices();
    let n = v.len();
    let mut rng = rng::stream(seed, 51);
    let mut best: f64 = 1.0;
    for _ in 0..samples {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let (i, j) = (i.min(j), i.max(j));
        let inner: Vec<[f64; 2]> = v[i..=j].to_vec();
        let outer: Vec<[f64; 2]> = v[j..].iter().chain(&v[..=i]).copied().collect();
        let d = crate::curve::planar_diameter(&inner).min(crate::curve::planar_diameter(&outer));
        best = best.max(d / dist(v[i], v[j]));
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvgOptions {
    /// Draw `T(E)` for every edge of the last polygon.
    pub triangles: bool,
    /// Parameter used for the triangle heights.
    pub p: f64,
    pub stroke_width: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { triangles: false, p: 1.0 / 3.0, stroke_width: 0.004 }
    }
}

/// SVG with one closed path per polygon, fitted to the drawing.
pub fn export_svg(polys: &[SnowPolygon<f64>], opts: &SvgOptions) -> String {
    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 1.0f64, 1.0f64);
    for p in polys {
        for v in p.vertices() {
            x0 = x0.min(v[0]);
            y0 = y0.min(v[1]);
            x1 = x1.max(v[0]);
            y1 = y1.max(v[1]);
        }
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0);
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let fy = |y: f64| y1 + y0 - y;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.6} {:.6} {:.6} {:.6}\">\n",
        x0 - pad,
        y0 - pad,
        w,
        h
    );
    for p in polys {
        let mut d = String::new();
        for (i, v) in p.vertices().iter().enumerate() {
            d.push_str(&format!("{}{:.9} {:.9} ", if i == 0 { "M" } else { "L" }, v[0], fy(v[1])));
        }
        d.push('Z');
        out.push_str(&format!(
            "<path data-level=\"{}\" d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{}\"/>\n",
            p.level, d, opts.stroke_width
        ));
    }
    if opts.triangles {
        if let Some(last) = polys.last() {
            let h = (opts.p - 0.25).max(0.0).sqrt();
            for e in &last.edges {
                let t = envelope(e, h);
                out.push_str(&format!(
                    "<polygon points=\"{:.9},{:.9} {:.9},{:.9} {:.9},{:.9}\" fill=\"none\" stroke=\"red\" stroke-width=\"{}\"/>\n",
                    t[0][0],
                    fy(t[0][1]),
                    t[1][0],
                    fy(t[1][1]),
                    t[2][0],
                    fy(t[2][1]),
                    opts.stroke_width / 2.0
                ));
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
