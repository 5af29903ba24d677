//! Dyadic arithmetic on the circle `[0,1]/{0~1}`.
//!
//! A [`DyadicArc`] `(n, k)` is the closed arc `[k/2^n, (k+1)/2^n]`; the arc
//! `(0, 0)` is the whole circle. Dyadic points are kept as an odd numerator
//! over a power of two, so containment, adjacency and tilings are decided
//! with integer arithmetic. Wrap-around is index arithmetic modulo `2^n`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{exact_from_f64, parse_exact, Error, Exact, Result};

/// Finest dyadic level representable with `u64` numerators.
pub const MAX_LEVEL: u32 = 62;

/// A point of the circle, exact when dyadic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CirclePoint {
    /// `num / 2^level`, reduced: `num` odd unless the point is `0`.
    Dyadic { num: u64, level: u32 },
    /// A non-dyadic coordinate in `[0,1)`.
    Real(f64),
}

impl CirclePoint {
    pub const ZERO: CirclePoint = CirclePoint::Dyadic { num: 0, level: 0 };

    /// `num / 2^level`, taken modulo 1.
    pub fn dyadic(num: u64, level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Domain(format!("dyadic level {level} exceeds {MAX_LEVEL}")));
        }
        let mask = (1u64 << level) - 1;
        let (mut num, mut level) = (num & mask, level);
        if num == 0 {
            return Ok(Self::ZERO);
        }
        while num % 2 == 0 {
            num /= 2;
            level -= 1;
        }
        Ok(CirclePoint::Dyadic { num, level })
    }

    /// A point from a float, wrapped into `[0,1)`. Floats that are dyadic
    /// with level at most 52 become exact points.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite circle coordinate {x}")));
        }
        let v = x.rem_euclid(1.0);
        let v = if v >= 1.0 { 0.0 } else { v };
        let scaled = v * (1u64 << 52) as f64;
        if scaled.fract() == 0.0 {
            return Self::dyadic(scaled as u64, 52);
        }
        Ok(CirclePoint::Real(v))
    }

    /// A point from an exact rational, wrapped into `[0,1)`.
    pub fn from_exact(r: &Exact) -> Result<Self> {
        let floor = r.floor();
        let frac = r - floor;
        let den = frac.denom();
        if den.is_one() {
            return Ok(Self::ZERO);
        }
        let bits = den.bits();
        if den.magnitude().count_ones() == 1 && bits - 1 <= u64::from(MAX_LEVEL) {
            let num = frac.numer().to_u64().ok_or_else(|| Error::Domain("numerator overflow".into()))?;
            return Self::dyadic(num, (bits - 1) as u32);
        }
        let v = frac.to_f64().unwrap_or(0.0);
        Ok(CirclePoint::Real(if v >= 1.0 { 0.0 } else { v }))
    }

    pub fn value(&self) -> f64 {
        match *self {
            CirclePoint::Dyadic { num, level } => num as f64 / (1u64 << level) as f64,
            CirclePoint::Real(x) => x,
        }
    }

    /// Dyadic level of the point, or `None` for non-dyadic points.
    pub fn level(&self) -> Option<u32> {
        match *self {
            CirclePoint::Dyadic { level, .. } => Some(level),
            CirclePoint::Real(_) => None,
        }
    }

    pub fn is_dyadic(&self) -> bool {
        matches!(self, CirclePoint::Dyadic { .. })
    }

    /// Numerator at resolution `2^level`, if the point lies on that grid.
    pub fn units(&self, level: u32) -> Option<u64> {
        match *self {
            CirclePoint::Dyadic { num, level: own } if own <= level && level <= MAX_LEVEL => {
                Some(num << (level - own))
            }
            _ => None,
        }
    }

    pub fn to_exact(&self) -> Exact {
        match *self {
            CirclePoint::Dyadic { num, level } => {
                Exact::new(BigInt::from(num), BigInt::one() << level as usize)
            }
            CirclePoint::Real(x) => exact_from_f64(x).unwrap_or_else(Exact::zero),
        }
    }

    /// Forward distance from `self` to `other` along the circle, in `[0,1)`.
    pub fn forward_to(&self, other: &CirclePoint) -> f64 {
        match (self, other) {
            (CirclePoint::Dyadic { level: a, .. }, CirclePoint::Dyadic { level: b, .. }) => {
                let l = (*a).max(*b);
                let s = self.units(l).unwrap_or(0);
                let t = other.units(l).unwrap_or(0);
                let r = 1u128 << l;
                let off = (u128::from(t) + r - u128::from(s)) % r;
                off as f64 / r as f64
            }
            _ => (other.value() - self.value()).rem_euclid(1.0),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((num, den)) = t.split_once('/') {
            if let Some(pow) = den.trim().strip_prefix("2^") {
                let level: u32 = pow
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad power of two in {t:?}")))?;
                let num: u64 = num
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad numerator in {t:?}")))?;
                if level > MAX_LEVEL {
                    return Err(Error::Domain(format!("dyadic level {level} exceeds {MAX_LEVEL}")));
                }
                return Self::dyadic(num % (1u64 << level), level);
            }
        }
        Self::from_exact(&parse_exact(t)?)
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CirclePoint::Dyadic { num: 0, .. } => write!(f, "0"),
            CirclePoint::Dyadic { num, level } => write!(f, "{}/{}", num, 1u64 << level),
            CirclePoint::Real(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for CirclePoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for CirclePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CirclePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => CirclePoint::parse(&t).map_err(serde::de::Error::custom),
            Raw::Number(x) => CirclePoint::from_f64(x).map_err(serde::de::Error::custom),
        }
    }
}

/// The arc `[index/2^generation, (index+1)/2^generation]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicArc {
    generation: u32,
    index: u64,
}

/// Relation of two arcs on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcRelation {
    Disjoint,
    TouchAtEndpoint,
    Overlap,
    AContainsB,
    BContainsA,
    Equal,
}

impl ArcRelation {
    /// The relation with the arguments swapped.
    pub fn mirrored(self) -> Self {
        match self {
            ArcRelation::AContainsB => ArcRelation::BContainsA,
            ArcRelation::BContainsA => ArcRelation::AContainsB,
            r => r,
        }
    }
}

/// Tree moves from a dyadic arc.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Navigation {
    Parent,
    /// The `2^m` descendants `m` generations down.
    Children(u32),
    Sibling,
}

impl DyadicArc {
    pub const WHOLE: DyadicArc = DyadicArc { generation: 0, index: 0 };

    pub fn new(generation: u32, index: u64) -> Result<Self> {
        if generation > MAX_LEVEL {
            return Err(Error::Domain(format!("generation {generation} exceeds {MAX_LEVEL}")));
        }
        if index >= 1u64 << generation {
            return Err(Error::Domain(format!("index {index} out of range for generation {generation}")));
        }
        Ok(DyadicArc { generation, index })
    }

    /// Index taken modulo `2^generation`.
    pub fn wrapped(generation: u32, index: i128) -> Result<Self> {
        if generation > MAX_LEVEL {
            return Err(Error::Domain(format!("generation {generation} exceeds {MAX_LEVEL}")));
        }
        let n = 1i128 << generation;
        Self::new(generation, index.rem_euclid(n) as u64)
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn start(&self) -> CirclePoint {
        CirclePoint::dyadic(self.index, self.generation).expect("valid arc")
    }

    pub fn end(&self) -> CirclePoint {
        CirclePoint::dyadic(self.index + 1, self.generation).expect("valid arc")
    }

    /// Start in units of `2^-level`; `level` must be at least the generation.
    pub fn start_units(&self, level: u32) -> u64 {
        self.index << (level - self.generation)
    }

    /// Length in units of `2^-level`.
    pub fn size_units(&self, level: u32) -> u64 {
        1u64 << (level - self.generation)
    }

    pub fn length(&self) -> f64 {
        1.0 / (1u64 << self.generation) as f64
    }

    pub fn parent(&self) -> Result<Self> {
        if self.generation == 0 {
            return Err(Error::Domain("the whole circle has no parent".into()));
        }
        Ok(DyadicArc { generation: self.generation - 1, index: self.index / 2 })
    }

    /// The `2^m` descendants at generation `n + m`, in order. The arc must
    /// sit on the `2^m`-adic grid.
    pub fn children(&self, m: u32) -> Result<Vec<Self>> {
        if m == 0 {
            return Err(Error::Domain("base exponent must be at least 1".into()));
        }
        if !self.generation.is_multiple_of(m) {
            return Err(Error::Grid(format!(
                "arc {self} is not on the 2^{m}-adic grid"
            )));
        }
        let generation = self.generation + m;
        if generation > MAX_LEVEL {
            return Err(Error::Domain(format!("generation {generation} exceeds {MAX_LEVEL}")));
        }
        let base = self.index << m;
        Ok((0..1u64 << m).map(|j| DyadicArc { generation, index: base + j }).collect())
    }

    pub fn sibling(&self) -> Result<Self> {
        if self.generation == 0 {
            return Err(Error::Domain("the whole circle has no sibling".into()));
        }
        Ok(DyadicArc { generation: self.generation, index: self.index ^ 1 })
    }

    pub fn navigate(&self, nav: Navigation) -> Result<Vec<Self>> {
        match nav {
            Navigation::Parent => Ok(vec![self.parent()?]),
            Navigation::Children(m) => self.children(m),
            Navigation::Sibling => Ok(vec![self.sibling()?]),
        }
    }

    /// The ancestor at generation `g <= self.generation`.
    pub fn ancestor(&self, g: u32) -> Option<Self> {
        (g <= self.generation).then(|| DyadicArc { generation: g, index: self.index >> (self.generation - g) })
    }

    /// `other ⊂ self`.
    pub fn contains(&self, other: &DyadicArc) -> bool {
        other.ancestor(self.generation) == Some(*self)
    }

    pub fn contains_point(&self, p: &CirclePoint) -> bool {
        if self.generation == 0 {
            return true;
        }
        match p.level() {
            Some(pl) => {
                let l = pl.max(self.generation);
                let u = p.units(l).unwrap_or(0);
                let s = self.start_units(l);
                let e = s + self.size_units(l);
                (s <= u && u <= e) || (e == 1u64 << l && u == 0)
            }
            None => {
                let x = p.value();
                let n = (1u64 << self.generation) as f64;
                let s = self.index as f64 / n;
                let e = (self.index + 1) as f64 / n;
                s <= x && x <= e
            }
        }
    }

    /// Exact relation between two dyadic arcs, respecting the wrap at `0 ~ 1`.
    pub fn relation(&self, other: &DyadicArc) -> ArcRelation {
        if self == other {
            return ArcRelation::Equal;
        }
        if self.contains(other) {
            return ArcRelation::AContainsB;
        }
        if other.contains(self) {
            return ArcRelation::BContainsA;
        }
        let l = self.generation.max(other.generation);
        let r = 1u128 << l;
        let (sa, ea) = (u128::from(self.start_units(l)), u128::from(self.start_units(l) + self.size_units(l)));
        let (sb, eb) = (u128::from(other.start_units(l)), u128::from(other.start_units(l) + other.size_units(l)));
        if ea % r == sb % r || eb % r == sa % r {
            ArcRelation::TouchAtEndpoint
        } else {
            ArcRelation::Disjoint
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (n, k) = text
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("arc {text:?} is not of the form n:k")))?;
        let n: u32 = n.trim().parse().map_err(|_| Error::Parse(format!("bad generation in {text:?}")))?;
        let k: u64 = k.trim().parse().map_err(|_| Error::Parse(format!("bad index in {text:?}")))?;
        Self::new(n, k)
    }
}

impl fmt::Display for DyadicArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.generation, self.index)
    }
}

impl FromStr for DyadicArc {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for DyadicArc {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DyadicArc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = String::deserialize(d)?;
        DyadicArc::parse(&t).map_err(serde::de::Error::custom)
    }
}

/// Relation of two dyadic arcs; see [`DyadicArc::relation`].
pub fn arc_relation(a: &DyadicArc, b: &DyadicArc) -> ArcRelation {
    a.relation(b)
}

/// The closed arc traversed forward from `start` to `end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralArc {
    start: CirclePoint,
    end: CirclePoint,
    whole: bool,
}

/// Exact position of a general arc: start and length in units of `2^-level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArcUnits {
    pub level: u32,
    pub start: u64,
    pub len: u64,
}

impl GeneralArc {
    pub fn new(start: CirclePoint, end: CirclePoint) -> Result<Self> {
        let same = match (start.level(), end.level()) {
            (Some(_), Some(_)) => start == end,
            _ => start.value() == end.value(),
        };
        if same {
            return Err(Error::Domain(format!("degenerate arc [{start}, {end}]")));
        }
        Ok(GeneralArc { start, end, whole: false })
    }

    /// The whole circle, traversed once from `start`.
    pub fn whole_from(start: CirclePoint) -> Self {
        GeneralArc { start, end: start, whole: true }
    }

    pub fn parse(start: &str, end: &str) -> Result<Self> {
        Self::new(CirclePoint::parse(start)?, CirclePoint::parse(end)?)
    }

    pub fn start(&self) -> CirclePoint {
        self.start
    }

    pub fn end(&self) -> CirclePoint {
        self.end
    }

    pub fn is_whole(&self) -> bool {
        self.whole
    }

    /// The complementary arc `[end, start]`.
    pub fn complement(&self) -> Option<Self> {
        (!self.whole).then_some(GeneralArc { start: self.end, end: self.start, whole: false })
    }

    pub fn length(&self) -> f64 {
        if self.whole {
            1.0
        } else {
            self.start.forward_to(&self.end)
        }
    }

    /// Exact coordinates when both endpoints are dyadic.
    pub fn units(&self) -> Option<ArcUnits> {
        let level = self.start.level()?.max(self.end.level()?);
        self.units_at(level)
    }

    /// Exact coordinates at a finer resolution `2^-level`.
    pub fn units_at(&self, level: u32) -> Option<ArcUnits> {
        let s = self.start.units(level)?;
        let e = self.end.units(level)?;
        let r = 1u128 << level;
        let len = if self.whole { r } else { (u128::from(e) + r - u128::from(s)) % r };
        Some(ArcUnits { level, start: s, len: len as u64 })
    }

    /// Forward offset of `p` from the start, in `[0,1)`.
    pub fn offset(&self, p: &CirclePoint) -> f64 {
        self.start.forward_to(p)
    }

    pub fn contains_point(&self, p: &CirclePoint) -> bool {
        if self.whole {
            return true;
        }
        if let (Some(l0), Some(pl)) = (self.units(), p.level()) {
            let l = l0.level.max(pl);
            let a = self.units_at(l).expect("dyadic arc");
            let u = u128::from(p.units(l).expect("dyadic point"));
            let r = 1u128 << l;
            let off = (u + r - u128::from(a.start)) % r;
            return off <= u128::from(a.len);
        }
        self.offset(p) <= self.length()
    }

    /// `arc ⊂ self`.
    pub fn contains_dyadic(&self, arc: &DyadicArc) -> bool {
        if self.whole {
            return true;
        }
        if let Some(a) = self.units() {
            let l = a.level.max(arc.generation());
            let a = self.units_at(l).expect("dyadic arc");
            let r = 1u128 << l;
            let s = u128::from(arc.start_units(l));
            let w = u128::from(arc.size_units(l));
            let off = (s + r - u128::from(a.start)) % r;
            return off + w <= u128::from(a.len);
        }
        if arc.generation() == 0 {
            return false;
        }
        let off = self.offset(&arc.start());
        off + arc.length() <= self.length()
    }

    /// `self ⊂ arc`.
    pub fn inside_dyadic(&self, arc: &DyadicArc) -> bool {
        if arc.generation() == 0 {
            return true;
        }
        if self.whole {
            return false;
        }
        let g = GeneralArc::from(*arc);
        g.contains_point(&self.start)
            && g.offset(&self.start) + self.length() <= arc.length()
    }
}

impl From<DyadicArc> for GeneralArc {
    fn from(a: DyadicArc) -> Self {
        if a.generation() == 0 {
            GeneralArc::whole_from(CirclePoint::ZERO)
        } else {
            GeneralArc { start: a.start(), end: a.end(), whole: false }
        }
    }
}

impl fmt::Display for GeneralArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.whole {
            write!(f, "[{}, {}+1]", self.start, self.start)
        } else {
            write!(f, "[{}, {}]", self.start, self.end)
        }
    }
}

impl Serialize for GeneralArc {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("GeneralArc", 3)?;
        st.serialize_field("start", &self.start)?;
        st.serialize_field("end", &self.end)?;
        st.serialize_field("whole", &self.whole)?;
        st.end()
    }
}

/// Tiles a dyadic-ended arc by maximal dyadic arcs, in forward order.
///
/// Each returned arc lies in the input, consecutive arcs share an endpoint,
/// and no returned arc has its parent inside the input.
pub fn canonical_cover(arc: &GeneralArc, max_generation: u32) -> Result<Vec<DyadicArc>> {
    let u = arc
        .units()
        .ok_or_else(|| Error::Domain(format!("arc {arc} does not have dyadic endpoints")))?;
    if u.level > max_generation {
        return Err(Error::Domain(format!(
            "endpoint level {} exceeds max generation {max_generation}",
            u.level
        )));
    }
    if arc.is_whole() {
        return Ok(vec![DyadicArc::WHOLE]);
    }
    let l = u.level;
    let r = 1u64 << l;
    let mut out = Vec::new();
    let mut pos = u.start;
    let mut left = u.len;
    while left > 0 {
        let align = if pos == 0 { l } else { pos.trailing_zeros().min(l) };
        let fit = 63 - left.leading_zeros();
        let j = align.min(fit);
        let size = 1u64 << j;
        let g = l - j;
        out.push(DyadicArc { generation: g, index: pos >> j });
        pos = (pos + size) % r;
        left -= size;
    }
    Ok(out)
}

/// Dyadic level of an exact rational, if its denominator is a power of two.
pub fn dyadic_level_of(r: &Exact) -> Option<u32> {
    let den = r.denom();
    if den.is_one() {
        return Some(0);
    }
    let two = BigInt::from(2);
    let mut d = den.clone();
    let mut level = 0u32;
    while d.is_even() {
        d /= &two;
        level += 1;
    }
    d.is_one().then_some(level)
}
