//! Diameter functions on the `2^m`-adic grid.
//!
//! `Δ(𝕊¹) = 1`, and the `2^m` children of a grid arc share one value: either
//! `Δ/2^m` (a halving, "HALF") or `param·Δ` (a "SNOW" step). One choice bit
//! per parent arc therefore determines the whole function. Bits come from
//! explicit per-generation strings, a named rule, or explicit strings with a
//! rule behind them.
//!
//! A function may read its bits from a coarser grid (`stride > 1`). This is
//! how [`DiameterFunction::extend_to_dyadic`] represents the extension of a
//! `2^m`-adic function: every dyadic generation inside one `2^m`-adic step
//! repeats that step's choice, with the parameter replaced by its `m`-th root.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dyadic::{DyadicArc, MAX_LEVEL};
use crate::{exact_from_f64, format_exact, parse_exact, rng, Error, Exact, Result, Scalar};

/// The snowflake parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum Param {
    Exact(Exact),
    /// A double read from a JSON number; exact as the binary fraction it is.
    Real(f64),
    /// `radicand^(1/index)`, produced by extension to a finer grid.
    Root { radicand: Exact, index: u32 },
}

impl Param {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((base, root)) = t.split_once("^(1/") {
            let index: u32 = root
                .trim_end_matches(')')
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad root index in {t:?}")))?;
            if index == 0 {
                return Err(Error::Parse(format!("zero root index in {t:?}")));
            }
            return Ok(Param::Root { radicand: parse_exact(base)?, index }.normalized());
        }
        Ok(Param::Exact(parse_exact(t)?))
    }

    /// Collapses roots of perfect powers to exact rationals.
    fn normalized(self) -> Self {
        match self {
            Param::Root { radicand, index: 1 } => Param::Exact(radicand),
            Param::Root { radicand, index } => {
                let (n, d) = (radicand.numer().nth_root(index), radicand.denom().nth_root(index));
                if Pow::pow(&n, index) == *radicand.numer() && Pow::pow(&d, index) == *radicand.denom() {
                    Param::Exact(Exact::new(n, d))
                } else {
                    Param::Root { radicand, index }
                }
            }
            p => p,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Param::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Param::Real(x) => *x,
            Param::Root { radicand, index } => {
                radicand.to_f64().unwrap_or(f64::NAN).powf(1.0 / f64::from(*index))
            }
        }
    }

    /// The parameter as an exact rational, when it is one.
    pub fn exact(&self) -> Option<Exact> {
        match self {
            Param::Exact(r) => Some(r.clone()),
            Param::Real(x) => exact_from_f64(*x),
            Param::Root { .. } => None,
        }
    }

    /// `param^count` exactly, when rational.
    pub fn pow_exact(&self, count: u32) -> Option<Exact> {
        match self {
            Param::Root { radicand, index } => {
                count.is_multiple_of(*index).then(|| Pow::pow(radicand.clone(), count / index))
            }
            p => p.exact().map(|r| Pow::pow(r, count)),
        }
    }

    /// `param^count` in double precision.
    pub fn pow_f64(&self, count: u32) -> f64 {
        match self {
            Param::Root { radicand, index } if count.is_multiple_of(*index) => {
                radicand.to_f64().unwrap_or(f64::NAN).powi((count / index) as i32)
            }
            Param::Root { radicand, index } => radicand
                .to_f64()
                .unwrap_or(f64::NAN)
                .powf(f64::from(count) / f64::from(*index)),
            p => p.value().powi(count as i32),
        }
    }

    /// The `k`-th root.
    pub fn root(&self, k: u32) -> Param {
        match self {
            Param::Exact(r) => Param::Root { radicand: r.clone(), index: k }.normalized(),
            Param::Real(x) => {
                if k == 1 {
                    Param::Real(*x)
                } else {
                    Param::Root { radicand: exact_from_f64(*x).unwrap_or_else(Exact::zero), index: k }
                        .normalized()
                }
            }
            Param::Root { radicand, index } => {
                Param::Root { radicand: radicand.clone(), index: index * k }.normalized()
            }
        }
    }

    /// Compares with `2^-m` and `1`: returns (`param >= 2^-m`, `param <= 1`, `param == 1`).
    fn range_flags(&self, m: u32) -> (bool, bool, bool) {
        let lo = Exact::new(BigInt::one(), BigInt::one() << m as usize);
        match self {
            Param::Root { radicand, index } => {
                let lo_pow: Exact = Pow::pow(lo, *index);
                (radicand >= &lo_pow, radicand <= &Exact::one(), radicand.is_one())
            }
            p => match p.exact() {
                Some(r) => (r >= lo, r <= Exact::one(), r.is_one()),
                None => (false, false, false),
            },
        }
    }

    pub fn is_one(&self) -> bool {
        self.range_flags(1).2
    }

    fn to_json(&self) -> Value {
        match self {
            Param::Exact(r) => Value::String(format_exact(r)),
            Param::Real(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Param::Root { radicand, index } => Value::String(format!("{}^(1/{index})", format_exact(radicand))),
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::String(s) => Param::parse(s),
            Value::Number(n) => n
                .as_f64()
                .map(Param::Real)
                .ok_or_else(|| Error::Parse("parameter is not a finite number".into())),
            _ => Err(Error::Parse("parameter must be a number or an \"a/b\" string".into())),
        }
    }
}

/// Deterministic choice rules.
#[derive(Clone, Debug, PartialEq)]
pub enum NamedRule {
    AllSnow,
    AllHalf,
    /// SNOW on even generations when `first_snow`, else on odd ones.
    Alternating { first_snow: bool },
    /// Independent SNOW bits with probability `p_snow`, keyed on the seed.
    RandomBernoulli { p_snow: f64 },
}

impl NamedRule {
    pub fn name(&self) -> &'static str {
        match self {
            NamedRule::AllSnow => "all_snow",
            NamedRule::AllHalf => "all_half",
            NamedRule::Alternating { .. } => "alternating",
            NamedRule::RandomBernoulli { .. } => "random_bernoulli",
        }
    }

    pub fn from_name(name: &str, params: &Map<String, Value>) -> Result<Self> {
        match name {
            "all_snow" => Ok(NamedRule::AllSnow),
            "all_half" => Ok(NamedRule::AllHalf),
            "alternating" => {
                let first = params.get("first").and_then(Value::as_str).unwrap_or("half");
                match first {
                    "half" => Ok(NamedRule::Alternating { first_snow: false }),
                    "snow" => Ok(NamedRule::Alternating { first_snow: true }),
                    other => Err(Error::Parse(format!("alternating.first must be half or snow, got {other:?}"))),
                }
            }
            "random_bernoulli" => {
                let p = params.get("p_snow").and_then(Value::as_f64).unwrap_or(0.5);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Parse(format!("p_snow {p} outside [0,1]")));
                }
                Ok(NamedRule::RandomBernoulli { p_snow: p })
            }
            other => Err(Error::Parse(format!("unknown rule {other:?}"))),
        }
    }

    fn params(&self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            NamedRule::Alternating { first_snow } => {
                m.insert("first".into(), Value::String(if *first_snow { "snow" } else { "half" }.into()));
            }
            NamedRule::RandomBernoulli { p_snow } => {
                m.insert("p_snow".into(), serde_json::json!(p_snow));
            }
            _ => {}
        }
        m
    }

    fn bit(&self, seed: u64, g: u32, k: u64) -> bool {
        match self {
            NamedRule::AllSnow => true,
            NamedRule::AllHalf => false,
            NamedRule::Alternating { first_snow } => g.is_multiple_of(2) == *first_snow,
            NamedRule::RandomBernoulli { p_snow } => rng::cell_uniform(seed, g, k) < *p_snow,
        }
    }

    /// Longest SNOW run the rule alone can produce, if bounded.
    fn run_bound(&self) -> Option<u32> {
        match self {
            NamedRule::AllHalf => Some(0),
            NamedRule::Alternating { .. } => Some(1),
            NamedRule::RandomBernoulli { p_snow } if *p_snow == 0.0 => Some(0),
            _ => None,
        }
    }
}

/// Where the per-parent choice bits come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ChoiceSource {
    /// `levels[g][k]` is the bit of grid arc `(g, k)`; deeper generations use
    /// `fallback`, or HALF without one.
    Explicit { levels: Vec<Vec<bool>>, fallback: Option<(NamedRule, u64)> },
    Rule { rule: NamedRule, seed: u64 },
}

impl ChoiceSource {
    pub fn bit(&self, g: u32, k: u64) -> bool {
        match self {
            ChoiceSource::Explicit { levels, fallback } => match levels.get(g as usize) {
                Some(level) => level[k as usize],
                None => fallback.as_ref().is_some_and(|(r, seed)| r.bit(*seed, g, k)),
            },
            ChoiceSource::Rule { rule, seed } => rule.bit(*seed, g, k),
        }
    }

    fn explicit_depth(&self) -> u32 {
        match self {
            ChoiceSource::Explicit { levels, .. } => levels.len() as u32,
            ChoiceSource::Rule { .. } => 0,
        }
    }

    fn tail_rule(&self) -> Option<&NamedRule> {
        match self {
            ChoiceSource::Explicit { fallback, .. } => fallback.as_ref().map(|(r, _)| r),
            ChoiceSource::Rule { rule, .. } => Some(rule),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            ChoiceSource::Explicit { levels, fallback } => {
                let strings: Vec<Value> = levels
                    .iter()
                    .map(|l| Value::String(l.iter().map(|&b| if b { '1' } else { '0' }).collect()))
                    .collect();
                let mut obj = Map::new();
                obj.insert("kind".into(), Value::String("explicit_levels".into()));
                obj.insert("levels".into(), Value::Array(strings));
                if let Some((rule, seed)) = fallback {
                    obj.insert("fallback".into(), rule_json(rule, *seed));
                }
                Value::Object(obj)
            }
            ChoiceSource::Rule { rule, seed } => rule_json(rule, *seed),
        }
    }

    fn from_json(v: &Value, grid_m: u32) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("choices must be an object".into()))?;
        match obj.get("kind").and_then(Value::as_str) {
            Some("explicit_levels") => {
                let raw = obj
                    .get("levels")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Parse("explicit_levels needs a levels array".into()))?;
                let mut levels = Vec::with_capacity(raw.len());
                for (g, item) in raw.iter().enumerate() {
                    let s = item.as_str().ok_or_else(|| Error::Parse("levels must be strings".into()))?;
                    let want = 1u128 << (grid_m as usize * g).min(127);
                    if s.len() as u128 != want {
                        return Err(Error::Invalid(format!(
                            "level {g} has {} bits, expected {want}",
                            s.len()
                        )));
                    }
                    let bits = s
                        .chars()
                        .map(|c| match c {
                            '0' => Ok(false),
                            '1' => Ok(true),
                            _ => Err(Error::Parse(format!("level {g} contains {c:?}"))),
                        })
                        .collect::<Result<Vec<bool>>>()?;
                    levels.push(bits);
                }
                let fallback = match obj.get("fallback") {
                    Some(f) => match ChoiceSource::from_json(f, grid_m)? {
                        ChoiceSource::Rule { rule, seed } => Some((rule, seed)),
                        _ => return Err(Error::Parse("fallback must be a named_rule".into())),
                    },
                    None => None,
                };
                Ok(ChoiceSource::Explicit { levels, fallback })
            }
            Some("named_rule") => {
                let name = obj
                    .get("rule")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Parse("named_rule needs a rule".into()))?;
                let empty = Map::new();
                let params = obj.get("params").and_then(Value::as_object).unwrap_or(&empty);
                let seed = obj.get("seed").and_then(Value::as_u64).unwrap_or(0);
                Ok(ChoiceSource::Rule { rule: NamedRule::from_name(name, params)?, seed })
            }
            other => Err(Error::Parse(format!("unknown choices kind {other:?}"))),
        }
    }
}

fn rule_json(rule: &NamedRule, seed: u64) -> Value {
    serde_json::json!({
        "kind": "named_rule",
        "rule": rule.name(),
        "params": Value::Object(rule.params()),
        "seed": seed,
    })
}

/// A diameter function on the `2^m`-adic grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct DiameterFunction {
    base_exponent: u32,
    parameter: Param,
    halving_horizon: Option<u32>,
    choices: ChoiceSource,
    stride: u32,
}

/// Outcome of [`DiameterFunction::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub reasons: Vec<String>,
    /// A branch violating the halving horizon, when one was found.
    pub witness: Option<Vec<DyadicArc>>,
    pub checked_depth: u32,
}

/// Outcome of [`DiameterFunction::doubling_test`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DoublingVerdict {
    Doubling { n0: u32, n: u64 },
    NotDoubling { run: u32, witness: Vec<DyadicArc> },
    Inconclusive { scanned_depth: u32, longest_run: u32 },
}

/// Upper bound on the Assouad dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum AssouadBound {
    Finite { value: f64 },
    Unbounded,
}

/// Cells scanned at most when enumerating choice bits.
const SCAN_BUDGET: u64 = 1 << 24;

impl DiameterFunction {
    pub fn new(base_exponent: u32, parameter: Param, choices: ChoiceSource) -> Result<Self> {
        if base_exponent == 0 || base_exponent > 8 {
            return Err(Error::Domain(format!("base exponent {base_exponent} outside 1..=8")));
        }
        let (ge_lo, le_one, _) = parameter.range_flags(base_exponent);
        if !(ge_lo && le_one) {
            return Err(Error::Domain(format!(
                "parameter {} outside [2^-{base_exponent}, 1]",
                parameter.value()
            )));
        }
        if let ChoiceSource::Explicit { levels, .. } = &choices {
            for (g, l) in levels.iter().enumerate() {
                if l.len() as u128 != 1u128 << (base_exponent as usize * g).min(127) {
                    return Err(Error::Invalid(format!("level {g} has {} bits", l.len())));
                }
            }
        }
        Ok(DiameterFunction { base_exponent, parameter, halving_horizon: None, choices, stride: 1 })
    }

    /// Dyadic function driven by a named rule.
    pub fn rule(base_exponent: u32, parameter: Param, rule: NamedRule, seed: u64) -> Result<Self> {
        Self::new(base_exponent, parameter, ChoiceSource::Rule { rule, seed })
    }

    /// Function driven by explicit level strings such as `["1", "01"]`.
    pub fn explicit(base_exponent: u32, parameter: Param, levels: &[&str]) -> Result<Self> {
        let levels = levels
            .iter()
            .map(|s| s.chars().map(|c| c == '1').collect())
            .collect();
        Self::new(base_exponent, parameter, ChoiceSource::Explicit { levels, fallback: None })
    }

    pub fn with_halving_horizon(mut self, h: Option<u32>) -> Self {
        self.halving_horizon = h;
        self
    }

    pub fn base_exponent(&self) -> u32 {
        self.base_exponent
    }

    pub fn parameter(&self) -> &Param {
        &self.parameter
    }

    pub fn halving_horizon(&self) -> Option<u32> {
        self.halving_horizon
    }

    pub fn choices(&self) -> &ChoiceSource {
        &self.choices
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    /// Choice bit of the grid arc at grid generation `g`, index `k` (SNOW = true).
    pub fn choice(&self, g: u32, k: u64) -> bool {
        if self.stride == 1 {
            return self.choices.bit(g, k);
        }
        let g0 = g / self.stride;
        let shift = self.base_exponent * (g % self.stride);
        self.choices.bit(g0, k >> shift)
    }

    /// Grid generation of a dyadic arc, or a grid error when it is off-grid.
    pub fn grid_generation(&self, arc: &DyadicArc) -> Result<u32> {
        if !arc.generation().is_multiple_of(self.base_exponent) {
            return Err(Error::Grid(format!(
                "arc {arc} is not on the 2^{}-adic grid",
                self.base_exponent
            )));
        }
        Ok(arc.generation() / self.base_exponent)
    }

    /// Numbers of HALF and SNOW steps from the circle down to `arc`.
    pub fn counts(&self, arc: &DyadicArc) -> Result<(u32, u32)> {
        let n = self.grid_generation(arc)?;
        let m = self.base_exponent;
        let mut snow = 0;
        for g in 0..n {
            let k = arc.index() >> (m * (n - g));
            if self.choice(g, k) {
                snow += 1;
            }
        }
        Ok((n - snow, snow))
    }

    /// `(2^-m)^halves · param^snows` in double precision.
    pub fn factor_f64(&self, halves: u32, snows: u32) -> f64 {
        let h = 0.5f64.powi((self.base_exponent * halves) as i32);
        h * self.parameter.pow_f64(snows)
    }

    /// `(2^-m)^halves · param^snows` exactly, when rational.
    pub fn factor_exact(&self, halves: u32, snows: u32) -> Option<Exact> {
        let p = self.parameter.pow_exact(snows)?;
        Some(p / Exact::from_integer(BigInt::one() << (self.base_exponent * halves) as usize))
    }

    /// `(2^-m)^halves · param^snows` in `S`; exact scalars fail on irrational values.
    pub fn factor_in<S: Scalar>(&self, halves: u32, snows: u32) -> Result<S> {
        match self.factor_exact(halves, snows) {
            Some(r) => Ok(S::from_exact(&r)),
            None if S::EXACT => Err(Error::Domain(format!(
                "value with {snows} steps of parameter {} is irrational",
                self.parameter.value()
            ))),
            None => S::from_f64(self.factor_f64(halves, snows))
                .ok_or_else(|| Error::Domain("value not representable".into())),
        }
    }

    /// Exact comparison of two step-count factors.
    pub fn compare_factors(&self, a: (u32, u32), b: (u32, u32)) -> Ordering {
        let (radicand, k) = match &self.parameter {
            Param::Root { radicand, index } => (radicand.clone(), *index),
            p => (p.exact().unwrap_or_else(Exact::zero), 1),
        };
        let key = |(h, s): (u32, u32)| -> Exact {
            let p: Exact = Pow::pow(radicand.clone(), s);
            p / Exact::from_integer(BigInt::one() << (self.base_exponent * k * h) as usize)
        };
        key(a).cmp(&key(b))
    }

    /// `Δ(arc)` in double precision.
    pub fn value(&self, arc: &DyadicArc) -> Result<f64> {
        let (h, s) = self.counts(arc)?;
        Ok(self.factor_f64(h, s))
    }

    /// `Δ(arc)` exactly.
    pub fn value_exact(&self, arc: &DyadicArc) -> Result<Exact> {
        self.value_in::<Exact>(arc)
    }

    pub fn value_in<S: Scalar>(&self, arc: &DyadicArc) -> Result<S> {
        let (h, s) = self.counts(arc)?;
        self.factor_in(h, s)
    }

    /// Step counts `(halves, snows)` for every grid arc of grid generation `0..=depth`.
    pub fn counts_table(&self, depth: u32) -> Result<Vec<Vec<(u32, u32)>>> {
        let m = self.base_exponent;
        if u64::from(m * depth) > u64::from(MAX_LEVEL) {
            return Err(Error::Resource(format!("depth {depth} beyond the representable grid")));
        }
        let total: u128 = (0..=depth).map(|g| 1u128 << (m * g)).sum();
        if total > u128::from(SCAN_BUDGET) {
            return Err(Error::Resource(format!("{total} grid arcs to depth {depth} exceed the budget")));
        }
        let mut table = vec![vec![(0u32, 0u32)]];
        for g in 1..=depth {
            let prev = &table[(g - 1) as usize];
            let mut level = Vec::with_capacity(prev.len() << m);
            for (k, &(h, s)) in prev.iter().enumerate() {
                let step = if self.choice(g - 1, k as u64) { (h, s + 1) } else { (h + 1, s) };
                level.extend(std::iter::repeat_n(step, 1 << m));
            }
            table.push(level);
        }
        Ok(table)
    }

    /// `Δ` in `S` for every grid arc to grid generation `depth`.
    pub fn value_table<S: Scalar>(&self, depth: u32) -> Result<Vec<Vec<S>>> {
        let counts = self.counts_table(depth)?;
        let mut memo: HashMap<(u32, u32), S> = HashMap::new();
        let mut out = Vec::with_capacity(counts.len());
        for level in &counts {
            let mut row = Vec::with_capacity(level.len());
            for &(h, s) in level {
                let v = match memo.get(&(h, s)) {
                    Some(v) => v.clone(),
                    None => {
                        let v = self.factor_in::<S>(h, s)?;
                        memo.insert((h, s), v.clone());
                        v
                    }
                };
                row.push(v);
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Longest run of consecutive SNOW choices along any branch, scanning
    /// parents of grid generation below `depth`. Returns the run and the
    /// parents carrying it.
    pub fn longest_run(&self, depth: u32) -> Result<(u32, Vec<DyadicArc>)> {
        let m = self.base_exponent;
        let total: u128 = (0..depth).map(|g| 1u128 << (m * g).min(127)).sum();
        if total > u128::from(SCAN_BUDGET) {
            return Err(Error::Resource(format!("scanning {total} cells exceeds the budget")));
        }
        let mut best = (0u32, 0u32, 0u64);
        let mut prev: Vec<u32> = Vec::new();
        for g in 0..depth {
            let width = 1u64 << (m * g);
            let mut cur = Vec::with_capacity(width as usize);
            for k in 0..width {
                let above = if g == 0 { 0 } else { prev[(k >> m) as usize] };
                let run = if self.choice(g, k) { above + 1 } else { 0 };
                if run > best.0 {
                    best = (run, g, k);
                }
                cur.push(run);
            }
            prev = cur;
        }
        let (run, g, k) = best;
        let mut witness = Vec::with_capacity(run as usize);
        for i in (0..run).rev() {
            let gg = g - i;
            let idx = k >> (m * (g - gg));
            witness.push(DyadicArc::new(gg * m, idx)?);
        }
        Ok((run, witness))
    }

    /// Checks the structural conditions and, for parameter 1, the declared
    /// halving horizon down to grid generation `depth`.
    pub fn validate(&self, depth: u32) -> ValidationReport {
        let mut reasons = Vec::new();
        let mut witness = None;
        let (ge_lo, le_one, is_one) = self.parameter.range_flags(self.base_exponent);
        if !(ge_lo && le_one) {
            reasons.push(format!(
                "parameter {} outside [2^-{}, 1]",
                self.parameter.value(),
                self.base_exponent
            ));
        }
        let mut checked = depth;
        if is_one {
            match self.halving_horizon {
                None => reasons.push("shrinking not certified".into()),
                Some(0) => reasons.push("halving horizon must be positive".into()),
                Some(h) => {
                    let mut scan = depth;
                    let mut result = self.longest_run(scan);
                    while result.is_err() && scan > 0 {
                        scan -= 1;
                        result = self.longest_run(scan);
                    }
                    checked = scan;
                    if let Ok((run, w)) = result {
                        if run >= h {
                            reasons.push(format!(
                                "{run} consecutive SNOW generations exceed halving horizon {h}"
                            ));
                            witness = Some(w);
                        }
                    }
                    if scan < depth {
                        reasons.push(format!("horizon checked only to depth {scan}"));
                    }
                }
            }
        }
        let valid = reasons.iter().all(|r| r.starts_with("horizon checked only"));
        ValidationReport { valid, reasons, witness, checked_depth: checked }
    }

    /// Least `n0` such that every descent of `n0` grid generations at least
    /// halves `Δ`, or a witness run of SNOW steps of length at least `horizon`.
    pub fn doubling_test(&self, horizon: u32) -> DoublingVerdict {
        if !self.parameter.is_one() {
            return DoublingVerdict::Doubling { n0: self.halving_steps(), n: 1 << (self.halving_steps() + 2) };
        }
        let explicit = self.choices.explicit_depth() * self.stride;
        let tail = if self.stride == 1 { self.choices.tail_rule() } else { None };
        let tail_bound = match (&self.choices, tail) {
            (ChoiceSource::Explicit { fallback: None, .. }, _) => Some(0),
            (_, Some(rule)) => rule.run_bound(),
            _ => None,
        };
        let target = explicit + horizon.max(1) + 2;
        let mut scan = target;
        let mut result = self.longest_run(scan);
        while result.is_err() && scan > 0 {
            scan -= 1;
            result = self.longest_run(scan);
        }
        let (run, witness) = result.unwrap_or((0, Vec::new()));
        if run >= horizon {
            let start = witness.len() - horizon as usize;
            return DoublingVerdict::NotDoubling { run, witness: witness[start..].to_vec() };
        }
        match tail_bound {
            Some(b) if scan == target && b < horizon => {
                let n0 = run.max(b) + 1;
                DoublingVerdict::Doubling { n0, n: 1u64 << (n0 + 2).min(63) }
            }
            _ => DoublingVerdict::Inconclusive { scanned_depth: scan, longest_run: run },
        }
    }

    /// Least `n` with `param^n <= 1/2` (for parameter below 1).
    fn halving_steps(&self) -> u32 {
        let half = Exact::new(BigInt::one(), BigInt::from(2));
        let mut n = 1;
        loop {
            let small = match self.parameter.pow_exact(n) {
                Some(v) => v <= half,
                None => self.parameter.pow_f64(n) <= 0.5,
            };
            if small || n > 4096 {
                return n;
            }
            n += 1;
        }
    }

    /// `m · log 2 / log(1/param)`.
    pub fn assouad_upper(&self) -> AssouadBound {
        if self.parameter.is_one() {
            return AssouadBound::Unbounded;
        }
        let m = f64::from(self.base_exponent);
        let ln_inv = match &self.parameter {
            Param::Root { radicand, index } => {
                -radicand.to_f64().unwrap_or(f64::NAN).ln() / f64::from(*index)
            }
            p => -p.value().ln(),
        };
        AssouadBound::Finite { value: m * std::f64::consts::LN_2 / ln_inv }
    }

    /// Extension to the dyadic grid: each `2^m`-adic step with factor `f`
    /// becomes `m` dyadic steps with factor `f^{1/m}`.
    pub fn extend_to_dyadic(&self) -> Result<Self> {
        self.refine(1)
    }

    /// Collapse of a `4^k`-adic function to a 4-adic one with parameter `τ^{1/k}`.
    pub fn extend_to_4adic(&self) -> Result<Self> {
        if !self.base_exponent.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "base exponent {} is odd; a 4-adic collapse needs an even exponent",
                self.base_exponent
            )));
        }
        self.refine(2)
    }

    fn refine(&self, target: u32) -> Result<Self> {
        let m = self.base_exponent;
        if m <= target || !m.is_multiple_of(target) {
            return Err(Error::Domain(format!(
                "cannot refine a 2^{m}-adic function to the 2^{target}-adic grid"
            )));
        }
        let k = m / target;
        Ok(DiameterFunction {
            base_exponent: target,
            parameter: self.parameter.root(k),
            halving_horizon: self.halving_horizon.map(|h| h * k),
            choices: self.choices.clone(),
            stride: self.stride * k,
        })
    }

    /// Maximum of `Δ` over grid generation `g`, in double precision.
    pub fn max_value_at(&self, g: u32) -> Result<f64> {
        let table = self.counts_table(g)?;
        Ok(table[g as usize]
            .iter()
            .map(|&(h, s)| self.factor_f64(h, s))
            .fold(0.0, f64::max))
    }

    pub fn to_json_value(&self) -> Value {
        Value::from(self.clone())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl From<DiameterFunction> for Value {
    fn from(df: DiameterFunction) -> Value {
        let mut obj = Map::new();
        obj.insert("base_exponent".into(), Value::from(df.base_exponent));
        obj.insert("parameter".into(), df.parameter.to_json());
        obj.insert(
            "halving_horizon".into(),
            df.halving_horizon.map(Value::from).unwrap_or(Value::Null),
        );
        obj.insert("choices".into(), df.choices.to_json());
        if df.stride != 1 {
            obj.insert("choice_stride".into(), Value::from(df.stride));
        }
        Value::Object(obj)
    }
}

impl TryFrom<Value> for DiameterFunction {
    type Error = Error;

    fn try_from(v: Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("model must be a JSON object".into()))?;
        let m = obj
            .get("base_exponent")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing base_exponent".into()))? as u32;
        let parameter = Param::from_json(obj.get("parameter").ok_or_else(|| Error::Parse("missing parameter".into()))?)?;
        let horizon = match obj.get("halving_horizon") {
            None | Some(Value::Null) => None,
            Some(h) => Some(h.as_u64().ok_or_else(|| Error::Parse("halving_horizon must be an integer".into()))? as u32),
        };
        let stride = obj.get("choice_stride").and_then(Value::as_u64).unwrap_or(1) as u32;
        if stride == 0 {
            return Err(Error::Parse("choice_stride must be positive".into()));
        }
        let choices = ChoiceSource::from_json(
            obj.get("choices").ok_or_else(|| Error::Parse("missing choices".into()))?,
            m * stride,
        )?;
        let (ge_lo, le_one, _) = parameter.range_flags(m);
        if m == 0 || m > 8 {
            return Err(Error::Domain(format!("base exponent {m} outside 1..=8")));
        }
        if !(ge_lo && le_one) {
            return Err(Error::Domain(format!("parameter {} outside [2^-{m}, 1]", parameter.value())));
        }
        Ok(DiameterFunction { base_exponent: m, parameter, halving_horizon: horizon, choices, stride })
    }
}
