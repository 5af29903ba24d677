//! Snowflake-type metric circles.
//!
//! The crate builds model metrics on the circle from dyadic (and `2^m`-adic)
//! diameter functions, evaluates their chain metrics with certified
//! brackets, turns bounded-turning curves into such models, and generates
//! planar Rohde snowflakes driven by 4-adic diameter functions.
//!
//! Numeric code that does not need transcendental functions is generic over
//! [`Scalar`], which covers `f32`, `f64` and the exact [`Exact`] rationals.
//! Planar geometry is generic over [`num_traits::Float`].

pub mod builders;
pub mod curve;
pub mod diameter;
pub mod dyadic;
pub mod metric;
pub mod oracle;
pub mod rng;
pub mod rohde;
pub mod verify;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};

/// Exact rational scalar used by the oracle and by exact metric evaluation.
pub type Exact = BigRational;
/// Metric bracket in double precision.
pub type MetricBracket = metric::Bracket<f64>;
/// Metric bracket with exact rational end points.
pub type ExactBracket = metric::Bracket<Exact>;
/// Snowflake polygon in double precision.
pub type Polygon = rohde::SnowPolygon<f64>;

/// Numbers the metric code can run on: floats and exact rationals.
pub trait Scalar:
    Clone + PartialOrd + fmt::Debug + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether arithmetic in `Self` is exact.
    const EXACT: bool;

    /// Converts an exact rational, rounding when `Self` is a float.
    fn from_exact(r: &Exact) -> Self;

    /// Lossy conversion to `f64`.
    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `2^{-n}`.
    fn pow2_inv(n: u32) -> Self {
        let mut v = Self::one();
        let half = Self::one() / (Self::one() + Self::one());
        for _ in 0..n {
            v = v * half.clone();
        }
        v
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn from_exact(r: &Exact) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;
    fn from_exact(r: &Exact) -> Self {
        r.to_f32().unwrap_or(f32::NAN)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    fn from_exact(r: &Exact) -> Self {
        r.clone()
    }
}

/// Exact rational from a finite `f64` (every finite double is dyadic).
pub fn exact_from_f64(x: f64) -> Option<Exact> {
    BigRational::from_float(x)
}

/// `num/den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Exact {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"a/b"`, an integer, or a finite decimal literal such as `0.7`
/// into an exact rational. Scientific notation is accepted.
pub fn parse_exact(text: &str) -> Result<Exact> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let num: BigInt = a
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {t:?}")))?;
        let den: BigInt = b
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {t:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {t:?}")));
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = t[i + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {t:?}")))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("not a number: {t:?}")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("not a number: {t:?}")));
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| Error::Parse(format!("not a number: {t:?}")))?
    };
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

/// Formats an exact rational as `"a/b"`, or `"a"` for integers.
pub fn format_exact(r: &Exact) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("tolerance error: {0}")]
    Tolerance(String),
    #[error("split did not converge (best spread {best_phi:.3e}): {detail}")]
    Split { best_phi: f64, detail: String },
    #[error("build error: {0}")]
    Build(String),
    #[error("correspondence error: {0}")]
    Correspondence(String),
    #[error("insufficient depth: image arc diameter {achieved:.3e} above tolerance {tol:.3e}")]
    Depth { achieved: f64, tol: f64 },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Grid(_) => "grid",
            Error::Resource(_) => "resource",
            Error::Parse(_) => "parse",
            Error::Invalid(_) => "invalid",
            Error::Tolerance(_) => "tolerance",
            Error::Split { .. } => "split",
            Error::Build(_) => "build",
            Error::Correspondence(_) => "correspondence",
            Error::Depth { .. } => "depth",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub use builders::{build_4adic, build_theorem_a, build_theorem_b, map_point, BuildResult};
pub use curve::{Curve, SubdivisionTree};
pub use diameter::{ChoiceSource, DiameterFunction, DoublingVerdict, NamedRule, Param};
pub use dyadic::{ArcRelation, CirclePoint, DyadicArc, GeneralArc, Navigation};
pub use metric::{ArcBracket, Bracket};
