//! Diameter functions built from metric curves.
//!
//! A build subdivides the curve into arcs `Aⁿ_k` of equal diameter, `2^m`
//! per parent, and assigns `Δ` generation by generation so that `Δ(Jⁿ_k)`
//! tracks `diam(Aⁿ_k)`. The arc `Jⁿ_k` of the circle then corresponds to
//! `Aⁿ_k`, which induces a bi-Lipschitz homeomorphism from the model circle
//! onto the curve with its diameter distance.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use crate::curve::{Curve, SubdivisionTree};
use crate::diameter::{ChoiceSource, DiameterFunction, Param};
use crate::dyadic::CirclePoint;
use crate::verify::{self, DiameterDistance, DistortionReport, Oracle};
use crate::{Error, Exact, Result};

/// Relative tolerance of the equal-diameter splits.
pub const SPLIT_TOL: f64 = 1e-9;
/// Slack for floating comparisons of exact identities.
const SLACK: f64 = 1e-12;
/// Pairs sampled for the bounded-turning estimate.
const BT_SAMPLES: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildKind {
    TheoremA,
    TheoremB,
    FourAdic,
}

/// Constants of a build.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constants {
    /// Estimated bounded-turning constant of the input curve.
    #[serde(rename = "C")]
    pub c: f64,
    /// Sandwich constant: `K⁻¹Δ ≤ diam ≤ KΔ`.
    #[serde(rename = "K")]
    pub k: f64,
    /// Bi-Lipschitz constant against the diameter distance of the
    /// normalized curve.
    #[serde(rename = "L")]
    pub l: f64,
    /// Branching `2^m` of the subdivision tree.
    #[serde(rename = "M")]
    pub big_m: u64,
    pub m: u32,
    pub tau: f64,
    pub sigma: f64,
    /// Bound for the model that is finally returned (after extension, if any).
    pub final_bound: f64,
    /// `M·L`, the bound after extension to a finer grid.
    pub extension_bound: f64,
    /// Bound against the original curve metric: `final_bound · C · max{D, 1/D}`.
    pub curve_bound: f64,
    /// Diameter `D` of the input curve.
    pub diameter: f64,
    /// Separation threshold estimate, when `m` was chosen automatically.
    pub epsilon0: Option<f64>,
}

/// One row of the sandwich log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichEntry {
    pub generation: u32,
    pub index: usize,
    pub delta: f64,
    pub diam: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildResult {
    pub kind: BuildKind,
    pub model: DiameterFunction,
    /// Model on the grid of the tree, before any extension.
    pub tree_model: DiameterFunction,
    pub tree: SubdivisionTree,
    pub constants: Constants,
    pub sandwich_log: Vec<SandwichEntry>,
}

impl BuildResult {
    /// `m` of the tree grid: each generation has `2^m` children per arc.
    pub fn tree_exponent(&self) -> u32 {
        self.constants.m
    }

    /// Factor turning curve distances into normalized ones.
    pub fn scale(&self) -> f64 {
        1.0 / self.constants.diameter
    }

    /// The model file with `tree` and `constants` sections added.
    pub fn to_json_value(&self) -> Value {
        let mut v = self.model.to_json_value();
        if let Value::Object(obj) = &mut v {
            obj.insert("kind".into(), serde_json::to_value(self.kind).unwrap_or(Value::Null));
            obj.insert("tree".into(), self.tree.to_json_value());
            obj.insert("constants".into(), serde_json::to_value(&self.constants).unwrap_or(Value::Null));
            obj.insert("tree_model".into(), self.tree_model.to_json_value());
            obj.insert(
                "sandwich_log".into(),
                json!(self
                    .sandwich_log
                    .iter()
                    .map(|e| json!([e.generation, e.index, e.delta, e.diam]))
                    .collect::<Vec<_>>()),
            );
        }
        v
    }
}

/// Per-arc `Δ` and the choice bits that produce it, from normalized
/// diameters: SNOW when `Δ ≤ diam`, HALF otherwise.
struct Assignment {
    levels: Vec<Vec<bool>>,
    log: Vec<SandwichEntry>,
}

fn assign(tree: &SubdivisionTree, scale: f64, tau: f64, big_m: f64) -> Assignment {
    let depth = tree.depth();
    let mut levels = vec![vec![true]];
    let mut log = Vec::new();
    let mut delta = vec![tau; tree.base()];
    for g in 1..=depth {
        let diams = tree.diameters(g);
        let mut bits = Vec::with_capacity(diams.len());
        for (k, (&d, &dl)) in diams.iter().zip(&delta).enumerate() {
            let diam = d * scale;
            log.push(SandwichEntry { generation: g, index: k, delta: dl, diam });
            bits.push(dl <= diam);
        }
        if g < depth {
            let per = tree.base();
            delta = delta
                .iter()
                .zip(&bits)
                .flat_map(|(&dl, &snow)| std::iter::repeat_n(if snow { dl * tau } else { dl / big_m }, per))
                .collect();
            levels.push(bits);
        }
    }
    Assignment { levels, log }
}

fn check_sandwich(log: &[SandwichEntry], k: f64) -> Result<()> {
    for e in log {
        let lo = e.delta / k * (1.0 - SLACK);
        let hi = e.delta * k * (1.0 + SLACK);
        if !(lo <= e.diam && e.diam <= hi) {
            return Err(Error::Build(format!(
                "sandwich fails at arc ({}, {}): Δ = {}, diam = {}, K = {k}",
                e.generation, e.index, e.delta, e.diam
            )));
        }
    }
    Ok(())
}

fn with_horizon(df: DiameterFunction, depth: u32) -> Result<DiameterFunction> {
    let (run, _) = df.longest_run(depth)?;
    Ok(df.with_halving_horizon(Some(run + 1)))
}

fn normalization(curve: &Curve) -> Result<f64> {
    let d = curve.diameter()?.midpoint();
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("curve diameter {d} is not positive")));
    }
    Ok(d)
}

/// Dyadic model of a curve with snowflake parameter 1.
///
/// The curve is cut into two arcs of equal diameter, then each arc into two
/// halves of equal diameter, to `depth` generations. `Δ(I¹) = 1` and the
/// children of `Iⁿ` keep `Δ(Iⁿ)` when `Δ(Iⁿ) ≤ diam(Aⁿ)` and halve it
/// otherwise. Every arc then satisfies `½Δ ≤ diam ≤ 2Δ`, and the map is
/// 8-bi-Lipschitz onto the normalized curve with its diameter distance.
pub fn build_theorem_a(curve: &Curve, depth: u32) -> Result<BuildResult> {
    if depth == 0 {
        return Err(Error::Domain("depth must be positive".into()));
    }
    let diameter = normalization(curve)?;
    let scale = 1.0 / diameter;
    let tree = SubdivisionTree::build(curve, 2, depth, SPLIT_TOL, CirclePoint::ZERO)?;
    let a = assign(&tree, scale, 1.0, 2.0);
    check_sandwich(&a.log, 2.0)?;
    let choices = ChoiceSource::Explicit { levels: a.levels, fallback: None };
    let model = with_horizon(DiameterFunction::new(1, Param::Exact(Exact::from_integer(1.into())), choices)?, depth)?;
    let c = curve.bt_constant_estimate(BT_SAMPLES, 0)?;
    let spread = diameter.max(1.0 / diameter);
    Ok(BuildResult {
        kind: BuildKind::TheoremA,
        tree_model: model.clone(),
        model,
        tree,
        constants: Constants {
            c,
            k: 2.0,
            l: 8.0,
            big_m: 2,
            m: 1,
            tau: 1.0,
            sigma: 1.0,
            final_bound: 8.0,
            extension_bound: 16.0,
            curve_bound: 8.0 * c * spread,
            diameter,
            epsilon0: None,
        },
        sandwich_log: a.log,
    })
}

/// `σ^m`, exact when possible.
fn tau_param(sigma: &Param, m: u32) -> Param {
    match sigma.pow_exact(m) {
        Some(r) => Param::Exact(r),
        None => Param::Real(sigma.pow_f64(m)),
    }
}

fn exact_f64(r: &Exact) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `2^m`-adic model of a doubling curve with snowflake parameter `τ = σ^m`.
///
/// The curve is cut into `M = 2^m` arcs of equal diameter per parent. `m`
/// is taken large enough that every split satisfies
/// `M⁻¹ diam(A) ≤ diam(A_k) ≤ τ diam(A)`; when absent it is chosen from the
/// separation threshold estimated by [`estimate_epsilon0`]. Children of
/// `Jⁿ` get `τΔ(Jⁿ)` when `Δ(Jⁿ) ≤ diam(Aⁿ)` and `Δ(Jⁿ)/M` otherwise, so
/// `K⁻¹Δ ≤ diam ≤ KΔ` with `K = τM`, and the map is `L = 2τM²` bi-Lipschitz.
pub fn build_theorem_b(
    curve: &Curve,
    sigma: &Param,
    m: Option<u32>,
    depth: u32,
    seed: u64,
) -> Result<BuildResult> {
    let s = sigma.value();
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::Domain(format!("σ = {s} outside (1/2, 1)")));
    }
    if depth == 0 {
        return Err(Error::Domain("depth must be positive".into()));
    }
    let diameter = normalization(curve)?;
    let (m, epsilon0) = match m {
        Some(0) => return Err(Error::Domain("m must be positive".into())),
        Some(m) => (m, None),
        None => {
            let e = estimate_epsilon0(curve, s, seed)?;
            (choose_m(s, e), Some(e))
        }
    };
    if m > 8 {
        return Err(Error::Resource(format!("m = {m} gives {}-ary trees, above the supported 256", 1u64 << m.min(63))));
    }
    let scale = 1.0 / diameter;
    let big_m = 1u64 << m;
    let tau = tau_param(sigma, m);
    let t = tau.value();
    let tree = SubdivisionTree::build(curve, big_m as usize, depth, SPLIT_TOL, CirclePoint::ZERO)?;
    check_splits(&tree, scale, t, big_m as f64)?;
    let a = assign(&tree, scale, t, big_m as f64);
    let (k, l, ml) = match tau.exact() {
        Some(te) => {
            let mm = Exact::from_integer(BigInt::from(big_m));
            let k = &te * &mm;
            let l = &k * &mm * Exact::from_integer(2.into());
            let ml = &l * &mm;
            (exact_f64(&k), exact_f64(&l), exact_f64(&ml))
        }
        None => {
            let k = t * big_m as f64;
            (k, 2.0 * k * big_m as f64, 2.0 * k * (big_m * big_m) as f64)
        }
    };
    check_sandwich(&a.log, k)?;
    let choices = ChoiceSource::Explicit { levels: a.levels, fallback: None };
    let model = with_horizon(DiameterFunction::new(m, tau, choices)?, depth)?;
    let c = curve.bt_constant_estimate(BT_SAMPLES, seed)?;
    let spread = diameter.max(1.0 / diameter);
    Ok(BuildResult {
        kind: BuildKind::TheoremB,
        tree_model: model.clone(),
        model,
        tree,
        constants: Constants {
            c,
            k,
            l,
            big_m,
            m,
            tau: t,
            sigma: s,
            final_bound: l,
            extension_bound: ml,
            curve_bound: l * c * spread,
            diameter,
            epsilon0,
        },
        sandwich_log: a.log,
    })
}

/// `M⁻¹ diam(A) ≤ diam(A_k) ≤ τ diam(A)` for every split of the tree.
fn check_splits(tree: &SubdivisionTree, scale: f64, tau: f64, big_m: f64) -> Result<()> {
    for g in 0..tree.depth() {
        let per = tree.base();
        for (k, &d) in tree.diameters(g).iter().enumerate() {
            let parent = if g == 0 { 1.0 } else { d * scale };
            for (j, &c) in tree.diameters(g + 1)[k * per..(k + 1) * per].iter().enumerate() {
                let child = c * scale;
                if child < parent / big_m * (1.0 - SLACK) || child > tau * parent * (1.0 + SLACK) {
                    return Err(Error::Build(format!(
                        "split of arc ({g}, {k}) gives child {j} of diameter {child} outside [{}, {}]; \
                         the curve may need a larger m",
                        parent / big_m,
                        tau * parent
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Twice the least `m` with `σ^m < ε₀`.
pub fn choose_m(sigma: f64, epsilon0: f64) -> u32 {
    let mut m = 1;
    while sigma.powi(m as i32) >= epsilon0 && m < 64 {
        m += 1;
    }
    2 * m
}

/// Grid of trial values `ε = 2^{-j/2}`.
const EPSILON_STEPS: u32 = 12;
/// Sub-arcs sampled per trial value.
const EPSILON_ARCS: usize = 6;
/// Largest number of candidate points the estimate may generate.
const EPSILON_BUDGET: usize = 1 << 22;

/// Largest `ε` on the grid `2^{-j/2}` below which every sampled sub-arc `A`
/// has greedy `ε·diam(A)`-separated sets of fewer than `ε^{-β}` points,
/// `β = log 2 / log(1/σ)`.
pub fn estimate_epsilon0(curve: &Curve, sigma: f64, seed: u64) -> Result<f64> {
    use rand::Rng;
    let beta = 2f64.ln() / (1.0 / sigma).ln();
    let diameter = normalization(curve)?;
    let oracle = DiameterDistance::new(curve, 1.0 / diameter);
    let mut rng = crate::rng::stream(seed, 41);
    let arcs: Vec<_> = (0..EPSILON_ARCS)
        .map(|_| {
            let g = rng.gen_range(1..=3u32);
            crate::dyadic::DyadicArc::new(g, rng.gen_range(0..1u64 << g))
        })
        .collect::<Result<_>>()?;
    let mut total = 0usize;
    let mut eps0 = None;
    for j in (1..=EPSILON_STEPS).rev() {
        let eps = 0.5f64.powf(j as f64 / 2.0);
        let mut ok = true;
        for arc in &arcs {
            let ga = (*arc).into();
            let d = oracle.arc_diameter(&ga)?.midpoint();
            let r = eps * d;
            let pts = verify::dense_points(&oracle, &ga, 0.5 * r, EPSILON_BUDGET - total)?;
            total += pts.len();
            let card = verify::separated_subset(&oracle, &pts, r)?.len();
            if card as f64 >= eps.powf(-beta) {
                ok = false;
            }
        }
        if !ok {
            break;
        }
        eps0 = Some(eps);
    }
    eps0.ok_or_else(|| {
        Error::Build(format!(
            "no separation threshold found down to ε = 2^-{}; the curve may not be doubling at σ = {sigma}",
            EPSILON_STEPS / 2
        ))
    })
}

/// [`build_theorem_b`] with `σ = √p` and even `m = 2k`, collapsed to a 4-adic model
/// with parameter `τ^{1/k} = p`.
pub fn build_4adic(curve: &Curve, p: &Param, m: Option<u32>, depth: u32, seed: u64) -> Result<BuildResult> {
    let pv = p.value();
    if !(pv > 0.25 && pv < 1.0) {
        return Err(Error::Domain(format!("p = {pv} outside (1/4, 1)")));
    }
    if let Some(m) = m {
        if m % 2 != 0 {
            return Err(Error::Domain(format!("m = {m} must be even for a 4-adic collapse")));
        }
    }
    let sigma = p.root(2);
    let mut r = build_theorem_b(curve, &sigma, m, depth, seed)?;
    let model = r.model.extend_to_4adic()?;
    r.kind = BuildKind::FourAdic;
    r.constants.final_bound = r.constants.extension_bound;
    r.constants.curve_bound = r.constants.final_bound * r.constants.c * r.constants.diameter.max(1.0 / r.constants.diameter);
    r.model = model;
    Ok(r)
}

/// Image of `s` under the correspondence `Jⁿ_k ↦ Aⁿ_k`, with the diameter
/// of the smallest image arc known to contain it (zero at tree endpoints).
pub fn locate(result: &BuildResult, s: &CirclePoint) -> Result<(CirclePoint, f64)> {
    let m = result.tree_exponent();
    let tree = &result.tree;
    for n in 0..=tree.depth() {
        if let Some(k) = s.units(m * n) {
            return Ok((tree.start(n, k as usize), 0.0));
        }
    }
    let n = tree.depth();
    let k = (s.value() * (1u64 << (m * n)) as f64).floor() as usize;
    let arc = tree.arc(n, k)?;
    let mid = CirclePoint::from_f64(arc.start().value() + 0.5 * arc.length())?;
    Ok((mid, tree.diameter(n, k) * result.scale()))
}

/// Curve parameter corresponding to `s`: exact at tree endpoints, otherwise
/// the midpoint parameter of the first image arc of normalized diameter
/// below `tol`.
pub fn map_point(result: &BuildResult, s: &CirclePoint, tol: f64) -> Result<CirclePoint> {
    let m = result.tree_exponent();
    let tree = &result.tree;
    for n in 0..=tree.depth() {
        if let Some(k) = s.units(m * n) {
            return Ok(tree.start(n, k as usize));
        }
    }
    let mut achieved = f64::INFINITY;
    for n in 1..=tree.depth() {
        let k = (s.value() * (1u64 << (m * n)) as f64).floor() as usize;
        achieved = tree.diameter(n, k) * result.scale();
        if achieved < tol {
            let arc = tree.arc(n, k)?;
            return CirclePoint::from_f64(arc.start().value() + 0.5 * arc.length());
        }
    }
    Err(Error::Depth { achieved, tol })
}

/// Sampled distortion of the correspondence from the tree model to the
/// normalized curve with its diameter distance, against `final_bound` of
/// the unextended model. Pairs are drawn from the leaf endpoints of the
/// tree, where the correspondence is exact.
pub fn distortion(result: &BuildResult, curve: &Curve, pairs: usize, seed: u64) -> Result<DistortionReport> {
    let model = Curve::model(result.tree_model.clone());
    let target = DiameterDistance::new(curve, result.scale());
    let level = result.tree_exponent() * result.tree.depth();
    let bound = match result.kind {
        BuildKind::FourAdic => result.constants.l,
        _ => result.constants.final_bound,
    };
    verify::bilip_report(&model, &target, &|s| locate(result, s), pairs, bound, seed, Some(level))
}

/// Sampled distortion between the tree model and its extension, the
/// returned model of a 4-adic build.
pub fn extension_distortion(result: &BuildResult, pairs: usize, seed: u64) -> Result<DistortionReport> {
    let a = Curve::model(result.tree_model.clone());
    let b = Curve::model(result.model.clone());
    let bound = result.constants.big_m as f64;
    let level = result.tree_exponent() * result.tree.depth();
    verify::bilip_report(&a, &b, &|s| Ok((*s, 0.0)), pairs, bound, seed, Some(level))
}
