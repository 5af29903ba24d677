//! The chain metric `d(x,y) = inf Σ Δ(I_k)` over chains of grid arcs.
//!
//! A chain joining `x` and `y` has connected union, so it covers one of the
//! two arcs between them; conversely every finite cover of such an arc
//! contains a chain. The metric is therefore the cheaper of the two minimal
//! covers. Two evaluators compute the minimal cover at a fixed depth:
//!
//! * a shortest-path search over the arc-intersection graph (node weight
//!   `Δ`, sources the arcs containing `x`, targets those containing `y`),
//!   used by [`distance_in`] while the graph is small;
//! * a recursion on the grid tree, `cover(K, P) = min(Δ(K), Σ cover(child, P ∩ child))`,
//!   which is linear in the depth and serves everything else.
//!
//! A full arc `K` costs exactly `Δ(K)` to cover, because the children of any
//! arc carry total value at least `Δ(K)`. Consequently, when `x` and `y` are
//! grid points of grid generation at most `D`, covers at depth `D` already
//! attain the infimum and the bracket collapses to a single value.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::ops::Add;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Pow, Zero};
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::diameter::DiameterFunction;
use crate::dyadic::{CirclePoint, DyadicArc, GeneralArc, MAX_LEVEL};
use crate::{Error, Exact, Result, Scalar};

/// Graphs with more nodes than this are evaluated by the tree recursion.
const GRAPH_NODE_BUDGET: u128 = 1 << 18;
/// Grid points sampled per arc when bracketing an arc diameter from below.
const DIAMETER_SAMPLES: u64 = 8;
/// Log2 of the number of grid points used for the diameter of the circle.
const CIRCLE_POINTS_LOG2: u32 = 7;

/// Certified interval around a metric quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct Bracket<S> {
    pub lower: S,
    pub upper: S,
    /// Grid generation of the arcs used.
    pub depth: u32,
    pub certified: bool,
}

impl<S: Scalar> Bracket<S> {
    pub fn exact(value: S, depth: u32) -> Self {
        Bracket { lower: value.clone(), upper: value, depth, certified: true }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper.approx() - self.lower.approx()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower.approx() + self.upper.approx())
    }

    pub fn contains(&self, v: &S) -> bool {
        &self.lower <= v && v <= &self.upper
    }

    pub fn to_f64(&self) -> Bracket<f64> {
        Bracket {
            lower: self.lower.approx(),
            upper: self.upper.approx(),
            depth: self.depth,
            certified: self.certified,
        }
    }
}

impl<S: Scalar> Serialize for Bracket<S> {
    fn serialize<Z: Serializer>(&self, s: Z) -> std::result::Result<Z::Ok, Z::Error> {
        let mut st = s.serialize_struct("Bracket", 4)?;
        st.serialize_field("lower", &self.lower.approx())?;
        st.serialize_field("upper", &self.upper.approx())?;
        st.serialize_field("depth", &self.depth)?;
        st.serialize_field("certified", &self.certified)?;
        st.end()
    }
}

/// Grid arcs sandwiching a general arc: `I ∪ J ⊂ A ⊂ Î ∪ Ĵ`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ArcBracket {
    /// `I`, the grid arc inside `A` with the largest `Δ`.
    pub inner_left: DyadicArc,
    /// `J`, equal to `I` when `A ⊂ Î`.
    pub inner_right: DyadicArc,
    /// `Î`, the grid parent of `I`.
    pub outer_left: DyadicArc,
    /// `Ĵ`, the grid parent of `J`.
    pub outer_right: DyadicArc,
    /// `Δ*(A) = Δ(I)`.
    pub delta_star: f64,
}

fn check_depth(df: &DiameterFunction, depth: u32) -> Result<u32> {
    let level = depth
        .checked_mul(df.base_exponent())
        .filter(|&l| l <= MAX_LEVEL)
        .ok_or_else(|| Error::Resource(format!("depth {depth} exceeds the representable grid")))?;
    Ok(level)
}

/// `floor(x · 2^level)` and whether it is exact.
fn floor_units(x: &CirclePoint, level: u32) -> (u128, bool) {
    match *x {
        CirclePoint::Dyadic { num, level: own } if own <= level => {
            (u128::from(num) << (level - own), true)
        }
        CirclePoint::Dyadic { num, level: own } => (u128::from(num >> (own - level)), false),
        CirclePoint::Real(v) => {
            let t = v * (level as f64).exp2();
            (t.floor() as u128, t.fract() == 0.0)
        }
    }
}

fn floor_exact(r: &Exact, level: u32) -> i128 {
    let n: BigInt = r.numer() << level as usize;
    i128::try_from(n.div_floor(r.denom())).unwrap_or(i128::MAX)
}

fn ceil_exact(r: &Exact, level: u32) -> i128 {
    let n: BigInt = r.numer() << level as usize;
    let (q, rem) = n.div_mod_floor(r.denom());
    i128::try_from(q).unwrap_or(i128::MAX) + i128::from(!rem.is_zero())
}

/// Start and forward length of an arc as exact rationals.
fn exact_span(arc: &GeneralArc) -> (Exact, Exact) {
    let s = arc.start().to_exact();
    if arc.is_whole() {
        return (s, Exact::one());
    }
    let e = arc.end().to_exact();
    let mut len = e - &s;
    if len <= Exact::zero() {
        len += Exact::one();
    }
    (s, len)
}

/// Minimal covers by grid arcs of grid generation at most `depth`, by
/// recursion on the grid tree.
struct CoverSolver<'a, S> {
    df: &'a DiameterFunction,
    depth: u32,
    m: u32,
    memo: HashMap<(u32, u32), S>,
}

impl<'a, S: Scalar> CoverSolver<'a, S> {
    fn new(df: &'a DiameterFunction, depth: u32) -> Result<Self> {
        check_depth(df, depth)?;
        if S::EXACT && df.parameter().exact().is_none() {
            return Err(Error::Domain("exact evaluation needs a rational parameter".into()));
        }
        Ok(CoverSolver { df, depth, m: df.base_exponent(), memo: HashMap::new() })
    }

    fn level(&self) -> u32 {
        self.m * self.depth
    }

    fn weight(&mut self, h: u32, s: u32) -> Result<S> {
        if let Some(v) = self.memo.get(&(h, s)) {
            return Ok(v.clone());
        }
        let v = self.df.factor_in::<S>(h, s)?;
        self.memo.insert((h, s), v.clone());
        Ok(v)
    }

    /// Cover of the unwrapped unit range `[a, a+len]`, `len ≤ 2^level`.
    fn arc(&mut self, a: u128, len: u128) -> Result<S> {
        let r = 1u128 << self.level();
        let pieces = if len >= r {
            vec![(0, r)]
        } else if a + len <= r {
            vec![(a, a + len)]
        } else {
            vec![(a, r), (0, a + len - r)]
        };
        self.node(0, 0, 0, 0, &pieces)
    }

    fn node(&mut self, g: u32, k: u128, h: u32, s: u32, pieces: &[(u128, u128)]) -> Result<S> {
        let width = 1u128 << (self.m * (self.depth - g));
        let (ks, ke) = (k * width, k * width + width);
        let clipped: Vec<(u128, u128)> = pieces
            .iter()
            .filter_map(|&(a, b)| {
                let (a, b) = (a.max(ks), b.min(ke));
                (a < b).then_some((a, b))
            })
            .collect();
        if clipped.is_empty() {
            return Ok(S::zero());
        }
        let own = self.weight(h, s)?;
        if g == self.depth || clipped == [(ks, ke)] {
            return Ok(own);
        }
        let (ch, cs) = if self.df.choice(g, k as u64) { (h, s + 1) } else { (h + 1, s) };
        let mut sum = S::zero();
        for c in 0..(1u128 << self.m) {
            sum = sum + self.node(g + 1, (k << self.m) + c, ch, cs, &clipped)?;
            if sum >= own {
                return Ok(own);
            }
        }
        Ok(S::min_of(own, sum))
    }

    /// Cover of the smallest grid-aligned range containing `arc`.
    fn outer(&mut self, arc: &GeneralArc) -> Result<S> {
        let level = self.level();
        let r = 1i128 << level;
        let (s, len) = exact_span(arc);
        let a = floor_exact(&s, level);
        let b = ceil_exact(&(s + len), level);
        self.arc(a as u128, (b - a).min(r) as u128)
    }

    /// Cover of the largest grid-aligned range inside `arc`; zero if empty.
    fn inner(&mut self, arc: &GeneralArc) -> Result<S> {
        let level = self.level();
        let r = 1i128 << level;
        let (s, len) = exact_span(arc);
        let a = ceil_exact(&s, level);
        let b = floor_exact(&(s + len), level);
        if b <= a {
            return Ok(S::zero());
        }
        self.arc((a % r) as u128, (b - a).min(r) as u128)
    }
}

fn on_grid(df: &DiameterFunction, p: &CirclePoint, depth: u32) -> bool {
    floor_units(p, df.base_exponent() * depth).1
}

fn same_point(x: &CirclePoint, y: &CirclePoint) -> bool {
    match (x.level(), y.level()) {
        (Some(_), Some(_)) => x == y,
        _ => x.value() == y.value(),
    }
}

/// Exact metric between grid points of grid generation at most `depth`.
pub fn grid_distance_in<S: Scalar>(
    df: &DiameterFunction,
    x: &CirclePoint,
    y: &CirclePoint,
    depth: u32,
) -> Result<S> {
    let level = check_depth(df, depth)?;
    let (ux, ex) = floor_units(x, level);
    let (uy, ey) = floor_units(y, level);
    if !(ex && ey) {
        return Err(Error::Grid(format!("{x} or {y} is not a grid point of generation {depth}")));
    }
    if ux == uy {
        return Ok(S::zero());
    }
    let r = 1u128 << level;
    let fwd = (uy + r - ux) % r;
    let mut solver = CoverSolver::<S>::new(df, depth)?;
    let a = solver.arc(ux, fwd)?;
    let b = solver.arc(uy, r - fwd)?;
    Ok(S::min_of(a, b))
}

/// Metric bracket for arbitrary points, from covers at the finest
/// representable depth: inner-rounded arcs below, outer-rounded above.
pub fn fine_distance(df: &DiameterFunction, x: &CirclePoint, y: &CirclePoint) -> Result<Bracket<f64>> {
    let depth = MAX_LEVEL / df.base_exponent();
    if same_point(x, y) {
        return Ok(Bracket::exact(0.0, depth));
    }
    let mut solver = CoverSolver::<f64>::new(df, depth)?;
    let fwd = GeneralArc::new(*x, *y)?;
    let back = GeneralArc::new(*y, *x)?;
    let upper = solver.outer(&fwd)?.min(solver.outer(&back)?);
    let lower = solver.inner(&fwd)?.min(solver.inner(&back)?);
    Ok(Bracket { lower, upper, depth, certified: true })
}

/// Upper bound for the minimal cover of `arc` at `depth`; exact when the
/// endpoints are grid points of that depth.
pub fn cover_in<S: Scalar>(df: &DiameterFunction, arc: &GeneralArc, depth: u32) -> Result<S> {
    CoverSolver::<S>::new(df, depth)?.outer(arc)
}

struct HeapItem<W> {
    cost: W,
    node: usize,
}

impl<W: PartialOrd> PartialEq for HeapItem<W> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<W: PartialOrd> Eq for HeapItem<W> {}

impl<W: PartialOrd> PartialOrd for HeapItem<W> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<W: PartialOrd> Ord for HeapItem<W> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Implicit arc-intersection graph of the grid arcs up to a depth.
struct ArcGraph {
    m: u32,
    depth: u32,
    offsets: Vec<usize>,
}

impl ArcGraph {
    fn new(m: u32, depth: u32) -> Self {
        let mut offsets = Vec::with_capacity(depth as usize + 2);
        let mut acc = 0usize;
        for g in 0..=depth {
            offsets.push(acc);
            acc += 1usize << (m * g);
        }
        offsets.push(acc);
        ArcGraph { m, depth, offsets }
    }

    fn len(&self) -> usize {
        self.offsets[self.depth as usize + 1]
    }

    fn id(&self, g: u32, k: u128) -> usize {
        self.offsets[g as usize] + k as usize
    }

    fn locate(&self, id: usize) -> (u32, u128) {
        let g = self.offsets.partition_point(|&o| o <= id) - 1;
        (g as u32, (id - self.offsets[g]) as u128)
    }

    /// Arcs containing `p`, one or two per generation.
    fn containing(&self, p: &CirclePoint) -> Vec<usize> {
        let mut out = Vec::new();
        for g in 0..=self.depth {
            let n = 1u128 << (self.m * g);
            let (k, boundary) = floor_units(p, self.m * g);
            let k = k % n;
            out.push(self.id(g, k));
            if boundary && g > 0 {
                out.push(self.id(g, (k + n - 1) % n));
            }
        }
        out
    }

    fn for_each_neighbor(&self, id: usize, mut f: impl FnMut(usize)) {
        let (g, k) = self.locate(id);
        let level = self.m * self.depth;
        let w = 1u128 << (level - self.m * g);
        let (s, e) = (k * w, k * w + w);
        for g2 in 0..=self.depth {
            let w2 = 1u128 << (level - self.m * g2);
            let n2 = 1i128 << (self.m * g2);
            let lo = s.div_ceil(w2) as i128 - 1;
            let hi = (e / w2) as i128;
            if hi - lo + 1 >= n2 {
                for k2 in 0..n2 {
                    f(self.id(g2, k2 as u128));
                }
            } else {
                for k2 in lo..=hi {
                    f(self.id(g2, k2.rem_euclid(n2) as u128));
                }
            }
        }
    }

    /// Node-weighted multi-source shortest path; the cost includes both ends.
    fn shortest<W>(&self, weights: &[W], sources: &[usize], targets: &[usize]) -> Option<W>
    where
        W: Clone + PartialOrd + Add<Output = W>,
    {
        let mut is_target = vec![false; self.len()];
        for &t in targets {
            is_target[t] = true;
        }
        let mut best: Vec<Option<W>> = vec![None; self.len()];
        let mut done = vec![false; self.len()];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if best[s].is_none() {
                best[s] = Some(weights[s].clone());
                heap.push(HeapItem { cost: weights[s].clone(), node: s });
            }
        }
        while let Some(HeapItem { cost, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            if is_target[node] {
                return Some(cost);
            }
            self.for_each_neighbor(node, |nb| {
                if done[nb] {
                    return;
                }
                let c = cost.clone() + weights[nb].clone();
                if best[nb].as_ref().is_none_or(|b| c < *b) {
                    best[nb] = Some(c.clone());
                    heap.push(HeapItem { cost: c, node: nb });
                }
            });
        }
        None
    }
}

/// Shortest chain cost at `depth` in `S`, over the arc-intersection graph.
fn chain_search<S: Scalar>(
    df: &DiameterFunction,
    x: &CirclePoint,
    y: &CirclePoint,
    depth: u32,
) -> Result<S> {
    let m = df.base_exponent();
    let graph = ArcGraph::new(m, depth);
    let counts = df.counts_table(depth)?;
    let sources = graph.containing(x);
    let targets = graph.containing(y);
    let unreachable = || Error::Resource("chain search found no path".into());
    match df.parameter().exact() {
        Some(p) => {
            // Integer weights over the common denominator 2^{mD} q^D.
            let num = p.numer().magnitude().clone();
            let den = p.denom().magnitude().clone();
            let mut memo: HashMap<(u32, u32), BigUint> = HashMap::new();
            let mut weights = Vec::with_capacity(graph.len());
            for level in &counts {
                for &(h, s) in level {
                    let w = memo.entry((h, s)).or_insert_with(|| {
                        let a: BigUint = Pow::pow(num.clone(), s);
                        let b: BigUint = Pow::pow(den.clone(), depth - s);
                        (a * b) << (m * (depth - h)) as usize
                    });
                    weights.push(w.clone());
                }
            }
            let cost = graph.shortest(&weights, &sources, &targets).ok_or_else(unreachable)?;
            let scale: BigUint = Pow::pow(den, depth) << (m * depth) as usize;
            Ok(S::from_exact(&Exact::new(BigInt::from(cost), BigInt::from(scale))))
        }
        None => {
            if S::EXACT {
                return Err(Error::Domain("exact evaluation needs a rational parameter".into()));
            }
            let weights: Vec<f64> = counts
                .iter()
                .flat_map(|level| level.iter().map(|&(h, s)| df.factor_f64(h, s)))
                .collect();
            let cost = graph.shortest(&weights, &sources, &targets).ok_or_else(unreachable)?;
            S::from_f64(cost).ok_or_else(|| Error::Domain("cost not representable".into()))
        }
    }
}

/// Relative error allowance for floating evaluation of irrational parameters.
fn float_budget(df: &DiameterFunction, depth: u32) -> f64 {
    if df.parameter().exact().is_some() {
        0.0
    } else {
        16.0 * f64::EPSILON * f64::from(depth + 2)
    }
}

fn widen<S: Scalar>(b: Bracket<S>, rel: f64) -> Bracket<S> {
    if rel == 0.0 {
        return b;
    }
    let lo = S::from_f64(1.0 - rel).unwrap_or_else(S::one);
    let hi = S::from_f64(1.0 + rel).unwrap_or_else(S::one);
    Bracket { lower: b.lower * lo, upper: b.upper * hi, ..b }
}

/// The metric `d(x,y)` bracketed with chains of grid generation at most `depth`.
pub fn distance_in<S: Scalar>(
    df: &DiameterFunction,
    x: &CirclePoint,
    y: &CirclePoint,
    depth: u32,
) -> Result<Bracket<S>> {
    check_depth(df, depth)?;
    if same_point(x, y) {
        return Ok(Bracket::exact(S::zero(), depth));
    }
    let m = df.base_exponent();
    let nodes: u128 = (0..=depth).map(|g| 1u128 << (m * g)).sum();
    let fwd = GeneralArc::new(*x, *y)?;
    let back = GeneralArc::new(*y, *x)?;
    let mut solver = CoverSolver::<S>::new(df, depth)?;
    let upper = if nodes <= GRAPH_NODE_BUDGET {
        chain_search::<S>(df, x, y, depth)?
    } else {
        S::min_of(solver.outer(&fwd)?, solver.outer(&back)?)
    };
    if on_grid(df, x, depth) && on_grid(df, y, depth) {
        return Ok(widen(Bracket::exact(upper, depth), float_budget(df, depth)));
    }
    let star = S::min_of(
        bracket_arcs(df, &fwd)?.delta_star_in::<S>(df)?,
        bracket_arcs(df, &back)?.delta_star_in::<S>(df)?,
    );
    let inner = S::min_of(solver.inner(&fwd)?, solver.inner(&back)?);
    let lower = S::max_of(star, inner);
    let b = Bracket { lower, upper, depth, certified: true };
    Ok(widen(b, float_budget(df, depth)))
}

/// [`distance_in`] in double precision.
pub fn distance(df: &DiameterFunction, x: &CirclePoint, y: &CirclePoint, depth: u32) -> Result<Bracket<f64>> {
    distance_in::<f64>(df, x, y, depth)
}

/// Exact inclusive range of unwrapped indices `[k0, k1)` of generation
/// `level` arcs inside `[s, s+len]`, with the partial boundary arcs.
fn inside_range(s: &Exact, end: &Exact, level: u32) -> (i128, i128, bool, bool) {
    let k0 = ceil_exact(s, level);
    let k1 = floor_exact(end, level);
    let left_partial = floor_exact(s, level) != k0;
    let right_partial = ceil_exact(end, level) != k1;
    (k0, k1, left_partial, right_partial)
}

/// The grid arcs `I, J, Î, Ĵ` around `arc`.
pub fn bracket_arcs(df: &DiameterFunction, arc: &GeneralArc) -> Result<ArcBracket> {
    if arc.is_whole() {
        return Ok(ArcBracket {
            inner_left: DyadicArc::WHOLE,
            inner_right: DyadicArc::WHOLE,
            outer_left: DyadicArc::WHOLE,
            outer_right: DyadicArc::WHOLE,
            delta_star: 1.0,
        });
    }
    let m = df.base_exponent();
    let (s, len) = exact_span(arc);
    let end = &s + &len;
    let max_g = match arc.units() {
        Some(u) => u.level.div_ceil(m).min(MAX_LEVEL / m),
        None => MAX_LEVEL / m,
    };
    let mut best: Option<(DyadicArc, (u32, u32))> = None;
    for g in 1..=max_g {
        let level = m * g;
        let n = 1i128 << level;
        let (k0, k1, lp, rp) = inside_range(&s, &end, level);
        let (p0, p1, _, _) = inside_range(&s, &end, level - m);
        let mut ranges = vec![];
        if p0 < p1 {
            ranges.push((k0, p0 << m));
            ranges.push((p1 << m, k1));
        } else {
            ranges.push((k0, k1));
        }
        for (a, b) in ranges {
            for k in a..b {
                let cand = DyadicArc::wrapped(level, k)?;
                let c = df.counts(&cand)?;
                let better = match &best {
                    None => true,
                    Some((cur, cc)) => match df.compare_factors(c, *cc) {
                        Ordering::Greater => true,
                        Ordering::Equal => {
                            cur.generation() == level && cand.index() < cur.index()
                        }
                        Ordering::Less => false,
                    },
                };
                if better {
                    best = Some((cand, c));
                }
            }
        }
        if let Some((_, bc)) = &best {
            let mut deeper_possible = false;
            for (partial, k) in [(lp, k0 - 1), (rp, k1)] {
                if partial {
                    let c = df.counts(&DyadicArc::wrapped(level, k.rem_euclid(n))?)?;
                    if df.compare_factors(c, *bc) == Ordering::Greater {
                        deeper_possible = true;
                    }
                }
            }
            if !deeper_possible {
                break;
            }
        }
    }
    let (i_arc, _) = best.ok_or_else(|| Error::Resource(format!("arc {arc} is below grid resolution")))?;
    let i_hat = grid_parent(df, &i_arc);
    let delta_star = df.value(&i_arc)?;
    if arc.inside_dyadic(&i_hat) {
        return Ok(ArcBracket {
            inner_left: i_arc,
            inner_right: i_arc,
            outer_left: i_hat,
            outer_right: i_hat,
            delta_star,
        });
    }
    // Unwrapped offsets of Î relative to the start of A.
    let hat_start = i_hat.start().to_exact();
    let i_start = i_arc.start().to_exact();
    let mut oi = &i_start - &s;
    if oi < Exact::zero() {
        oi += Exact::one();
    }
    let o_hat = &oi - (&i_start - &hat_start);
    let hat_len = Exact::new(BigInt::one(), BigInt::one() << i_hat.generation() as usize);
    let o_end = &o_hat + &hat_len;
    let (y_off, forward, room) = if o_end < len {
        (o_end.clone(), true, &len - &o_end)
    } else {
        (o_hat.clone(), false, o_hat.clone())
    };
    let y_abs = &s + &y_off;
    let mut j_arc = None;
    for g in 1..=MAX_LEVEL / m {
        let level = m * g;
        let size = Exact::new(BigInt::one(), BigInt::one() << level as usize);
        let k = floor_exact(&y_abs, level);
        if ceil_exact(&y_abs, level) != k || size > room {
            continue;
        }
        let idx = if forward { k } else { k - 1 };
        j_arc = Some(DyadicArc::wrapped(level, idx.rem_euclid(1i128 << level))?);
        break;
    }
    let j_arc = j_arc.ok_or_else(|| Error::Resource(format!("arc {arc} is below grid resolution")))?;
    Ok(ArcBracket {
        inner_left: i_arc,
        inner_right: j_arc,
        outer_left: i_hat,
        outer_right: grid_parent(df, &j_arc),
        delta_star,
    })
}

fn grid_parent(df: &DiameterFunction, arc: &DyadicArc) -> DyadicArc {
    let g = arc.generation();
    if g <= df.base_exponent() {
        DyadicArc::WHOLE
    } else {
        arc.ancestor(g - df.base_exponent()).unwrap_or(DyadicArc::WHOLE)
    }
}

impl ArcBracket {
    pub fn delta_star_in<S: Scalar>(&self, df: &DiameterFunction) -> Result<S> {
        df.value_in::<S>(&self.inner_left)
    }

    /// `Δ(Î) + Δ(Ĵ)`, or `Δ(Î)` when `I = J`.
    pub fn outer_sum_in<S: Scalar>(&self, df: &DiameterFunction) -> Result<S> {
        let a = df.value_in::<S>(&self.outer_left)?;
        if self.inner_left == self.inner_right {
            Ok(a)
        } else {
            Ok(a + df.value_in::<S>(&self.outer_right)?)
        }
    }
}

/// The grid arc equal to `arc`, if any.
pub fn as_grid_arc(df: &DiameterFunction, arc: &GeneralArc) -> Option<DyadicArc> {
    if arc.is_whole() {
        return None;
    }
    let u = arc.units()?;
    if !u.len.is_power_of_two() {
        return None;
    }
    let gen = u.level - u.len.trailing_zeros();
    if gen % df.base_exponent() != 0 || u.start % u.len != 0 {
        return None;
    }
    DyadicArc::new(gen, u.start / u.len).ok()
}

/// Lower bound for `d(u,v)` at `depth`: exact on grid points.
fn pair_lower<S: Scalar>(
    solver: &mut CoverSolver<S>,
    df: &DiameterFunction,
    u: &CirclePoint,
    v: &CirclePoint,
    depth: u32,
) -> Result<S> {
    if same_point(u, v) {
        return Ok(S::zero());
    }
    if on_grid(df, u, depth) && on_grid(df, v, depth) {
        return grid_distance_in::<S>(df, u, v, depth);
    }
    let a = solver.inner(&GeneralArc::new(*u, *v)?)?;
    let b = solver.inner(&GeneralArc::new(*v, *u)?)?;
    Ok(S::min_of(a, b))
}

/// `diam_d(arc)` bracketed with grid arcs of grid generation at most `depth`.
pub fn arc_diameter_in<S: Scalar>(df: &DiameterFunction, arc: &GeneralArc, depth: u32) -> Result<Bracket<S>> {
    arc_diameter_sampled_in(df, arc, depth, DIAMETER_SAMPLES)
}

/// [`arc_diameter_in`] with `samples` interior grid points in the lower bound.
pub fn arc_diameter_sampled_in<S: Scalar>(
    df: &DiameterFunction,
    arc: &GeneralArc,
    depth: u32,
    samples: u64,
) -> Result<Bracket<S>> {
    check_depth(df, depth)?;
    if let Some(g) = as_grid_arc(df, arc) {
        return Ok(Bracket::exact(df.value_in::<S>(&g)?, depth));
    }
    if arc.is_whole() {
        return circle_diameter_in::<S>(df, depth);
    }
    let m = df.base_exponent();
    let ab = bracket_arcs(df, arc)?;
    let star = ab.delta_star_in::<S>(df)?;
    let sandwich = star.clone() * S::from_u64(1u64 << (m + 1)).unwrap_or_else(S::one);
    let rel = float_budget(df, depth);
    let grow = S::from_f64(1.0 + rel).unwrap_or_else(S::one);
    let shrink = S::from_f64(1.0 - rel).unwrap_or_else(S::one);
    let mut solver = CoverSolver::<S>::new(df, depth)?;
    let outer = ab.outer_sum_in::<S>(df)? * grow.clone();
    let cover = solver.outer(arc)? * grow;
    let upper = S::min_of(sandwich, S::min_of(outer, cover));

    let mut points = vec![arc.start(), arc.end()];
    for d in [&ab.inner_left, &ab.inner_right] {
        points.push(d.start());
        points.push(d.end());
    }
    let level = m * depth;
    let (s0, len) = exact_span(arc);
    let k0 = ceil_exact(&s0, level);
    let k1 = floor_exact(&(s0 + len), level);
    if k0 <= k1 {
        let step = ((k1 - k0) / samples.max(1) as i128).max(1);
        let r = 1i128 << level;
        let mut k = k0;
        while k <= k1 {
            points.push(CirclePoint::dyadic(k.rem_euclid(r) as u64, level)?);
            k += step;
        }
    }
    points.dedup_by(|a, b| same_point(a, b));
    let mut lower = star;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = pair_lower(&mut solver, df, &points[i], &points[j], depth)?;
            lower = S::max_of(lower, d * shrink.clone());
        }
    }
    let lower = S::min_of(lower, upper.clone());
    Ok(Bracket { lower, upper, depth, certified: true })
}

/// Diameter of the whole circle. `Δ(𝕊¹) = 1` bounds it from above, but it
/// can be smaller (the arc-length model has diameter 1/2). Grid points of
/// one generation give the lower end; every point lies within `Δ` of such a
/// point, which gives the upper end.
fn circle_diameter_in<S: Scalar>(df: &DiameterFunction, depth: u32) -> Result<Bracket<S>> {
    let m = df.base_exponent();
    let g = (CIRCLE_POINTS_LOG2 / m).clamp(1, depth.max(1));
    check_depth(df, g)?;
    let n = 1u64 << (m * g);
    let points = (0..n)
        .map(|k| CirclePoint::dyadic(k, m * g))
        .collect::<Result<Vec<_>>>()?;
    let mut solver = CoverSolver::<S>::new(df, g)?;
    let r = 1u128 << (m * g);
    let mut lower = S::zero();
    for (i, p) in points.iter().enumerate() {
        let (ui, _) = floor_units(p, m * g);
        for q in &points[i + 1..] {
            let (uj, _) = floor_units(q, m * g);
            let fwd = (uj + r - ui) % r;
            let d = S::min_of(solver.arc(ui, fwd)?, solver.arc(uj, r - fwd)?);
            lower = S::max_of(lower, d);
        }
    }
    let slack = S::from_f64(2.0 * df.max_value_at(g)?).unwrap_or_else(S::one);
    let upper = S::min_of(S::one(), lower.clone() + slack);
    let b = Bracket { lower, upper, depth: g, certified: true };
    Ok(widen(b, float_budget(df, g)))
}

/// [`arc_diameter_in`] in double precision.
pub fn arc_diameter(df: &DiameterFunction, arc: &GeneralArc, depth: u32) -> Result<Bracket<f64>> {
    arc_diameter_in::<f64>(df, arc, depth)
}

/// [`arc_diameter_sampled_in`] in double precision.
pub fn arc_diameter_sampled(df: &DiameterFunction, arc: &GeneralArc, depth: u32, samples: u64) -> Result<Bracket<f64>> {
    arc_diameter_sampled_in::<f64>(df, arc, depth, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diameter::{NamedRule, Param};
    use crate::ratio;

    fn model(m: u32, p: &str, rule: NamedRule) -> DiameterFunction {
        DiameterFunction::rule(m, Param::parse(p).unwrap(), rule, 3).unwrap()
    }

    fn pt(s: &str) -> CirclePoint {
        CirclePoint::parse(s).unwrap()
    }

    fn arc(a: &str, b: &str) -> GeneralArc {
        GeneralArc::parse(a, b).unwrap()
    }

    #[test]
    fn bracket_arc_examples() {
        let half = model(1, "1/2", NamedRule::AllHalf);
        let b = bracket_arcs(&half, &arc("0", "3/4")).unwrap();
        assert_eq!(b.inner_left, DyadicArc::new(1, 0).unwrap());
        assert_eq!(b.inner_right, b.inner_left);
        assert_eq!(b.outer_left, DyadicArc::WHOLE);
        assert_eq!(b.delta_star, 0.5);
        let b = bracket_arcs(&half, &arc("3/8", "5/8")).unwrap();
        assert_eq!(b.inner_left, DyadicArc::new(3, 3).unwrap());
        assert_eq!(b.inner_right, DyadicArc::new(3, 4).unwrap());
        assert_eq!(b.outer_left, DyadicArc::new(2, 1).unwrap());
        assert_eq!(b.outer_right, DyadicArc::new(2, 2).unwrap());
        assert_eq!(b.delta_star, 0.125);
        let g = DyadicArc::new(3, 5).unwrap();
        let b = bracket_arcs(&half, &GeneralArc::from(g)).unwrap();
        assert_eq!((b.inner_left, b.inner_right), (g, g));
    }

    #[test]
    fn arc_diameter_examples() {
        let ex = model(1, "0.7", NamedRule::AllSnow);
        let d = arc_diameter_in::<Exact>(&ex, &GeneralArc::from(DyadicArc::new(2, 1).unwrap()), 6).unwrap();
        assert!(d.is_exact());
        assert_eq!(d.lower, ratio(49, 100));
        let half = model(1, "1/2", NamedRule::AllHalf);
        let d = arc_diameter_in::<Exact>(&half, &arc("3/8", "5/8"), 4).unwrap();
        assert_eq!((d.lower, d.upper), (ratio(1, 4), ratio(1, 4)));
        let whole = GeneralArc::whole_from(CirclePoint::ZERO);
        let d = arc_diameter(&ex, &whole, 8).unwrap();
        assert_eq!((d.lower, d.upper), (1.0, 1.0));
        let d = arc_diameter(&half, &whole, 8).unwrap();
        assert!(d.lower == 0.5 && d.upper < 0.52);
    }

    #[test]
    fn distance_examples() {
        let half = model(1, "1/2", NamedRule::AllHalf);
        let d = distance_in::<Exact>(&half, &pt("1/8"), &pt("3/8"), 6).unwrap();
        assert_eq!((d.lower, d.upper), (ratio(1, 4), ratio(1, 4)));
        let ex = model(1, "0.7", NamedRule::AllSnow);
        for depth in [1, 3, 7] {
            let d = distance_in::<Exact>(&ex, &pt("0"), &pt("1/2"), depth).unwrap();
            assert_eq!(d.upper, ratio(7, 10));
            assert!(d.is_exact());
        }
        assert_eq!(distance(&ex, &pt("1/3"), &pt("1/3"), 4).unwrap().upper, 0.0);
    }

    #[test]
    fn chain_search_agrees_with_recursion() {
        let alt = model(1, "1", NamedRule::Alternating { first_snow: false });
        let rnd = model(2, "3/10", NamedRule::RandomBernoulli { p_snow: 0.5 });
        for (df, depth) in [(&alt, 6), (&rnd, 3)] {
            let n = 1u64 << (df.base_exponent() * depth);
            for a in (0..n).step_by(3) {
                for b in (a + 1..n).step_by(5) {
                    let x = CirclePoint::dyadic(a, df.base_exponent() * depth).unwrap();
                    let y = CirclePoint::dyadic(b, df.base_exponent() * depth).unwrap();
                    let g: Exact = chain_search(df, &x, &y, depth).unwrap();
                    assert_eq!(g, grid_distance_in::<Exact>(df, &x, &y, depth).unwrap());
                }
            }
        }
    }

    #[test]
    fn off_grid_points_get_honest_brackets() {
        let ex = model(1, "0.7", NamedRule::AllSnow);
        let x = CirclePoint::Real(0.1);
        let y = CirclePoint::Real(0.45);
        let coarse = distance(&ex, &x, &y, 4).unwrap();
        let fine = fine_distance(&ex, &x, &y).unwrap();
        assert!(coarse.lower <= fine.lower + 1e-15 && fine.upper <= coarse.upper + 1e-15);
        assert!(fine.width() < 1e-6);
        let deep = distance(&ex, &x, &y, 16).unwrap();
        assert!(deep.upper <= coarse.upper);
    }

    #[test]
    fn irrational_parameters_refuse_exact_scalars() {
        let ext = model(2, "3/10", NamedRule::AllSnow).extend_to_dyadic().unwrap();
        assert!(distance_in::<Exact>(&ext, &pt("0"), &pt("1/8"), 3).is_err());
        let d = distance(&ext, &pt("0"), &pt("1/8"), 3).unwrap();
        assert!(d.lower <= d.upper && d.width() < 1e-12);
    }
}
