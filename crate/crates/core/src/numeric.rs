//! Extended reals and correctly rounded accumulation.
//!
//! Objective values are weighted sums of per-point costs. They are computed
//! with an error-free product transform followed by an exact expansion sum, so
//! the result is the correctly rounded value of the real sum. That makes every
//! objective independent of summation order, which the solvers rely on when
//! they compare values produced along different routes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number or `+∞`.
///
/// Infinity absorbs under addition. The derived ordering places every finite
/// value below `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// Total order; finite values are compared with [`f64::total_cmp`].
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.total_cmp(b),
            (ExtReal::Finite(_), ExtReal::Infinite) => Ordering::Less,
            (ExtReal::Infinite, ExtReal::Finite(_)) => Ordering::Greater,
            (ExtReal::Infinite, ExtReal::Infinite) => Ordering::Equal,
        }
    }

    /// Exact `self <= other` (no tolerance).
    pub fn le(self, other: ExtReal) -> bool {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a <= b,
            (_, ExtReal::Infinite) => true,
            (ExtReal::Infinite, ExtReal::Finite(_)) => false,
        }
    }

    /// Correctly rounded `Σ wᵢ·cᵢ`; any infinite cost makes the sum infinite.
    pub fn weighted_sum<I>(terms: I) -> ExtReal
    where
        I: IntoIterator<Item = (f64, ExtReal)>,
    {
        let mut acc = ExactSum::new();
        for (w, c) in terms {
            match c {
                ExtReal::Infinite => return ExtReal::Infinite,
                ExtReal::Finite(v) => acc.add_product(w, v),
            }
        }
        ExtReal::Finite(acc.value())
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => f.write_str("+inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::Infinite => s.serialize_str("+inf"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrMarker {
    Num(f64),
    Marker(String),
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match NumOrMarker::deserialize(d)? {
            NumOrMarker::Num(v) => Ok(ExtReal::Finite(v)),
            NumOrMarker::Marker(m) if m == "+inf" || m == "inf" => Ok(ExtReal::Infinite),
            NumOrMarker::Marker(m) => Err(serde::de::Error::custom(format!(
                "expected a number or \"+inf\", found \"{m}\""
            ))),
        }
    }
}

/// Serde adapter for `Option<f64>` values where `None` stands for `−∞`.
pub mod neg_inf_marker {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_f64(*v),
            None => s.serialize_str("-inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Marker(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Some(v)),
            Repr::Marker(m) if m == "-inf" => Ok(None),
            Repr::Marker(m) => Err(serde::de::Error::custom(format!("unexpected marker {m}"))),
        }
    }
}

/// Exact floating-point accumulator (Shewchuk expansion, as in `fsum`).
///
/// Inputs are assumed finite and far from overflow.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds `a·b` exactly via a fused multiply-add error term.
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        if e != 0.0 {
            self.add(e);
        }
    }

    /// The correctly rounded sum of everything added so far.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction when the remaining partials push past a tie.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// Correctly rounded sum of a slice.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Smallest double strictly greater than `x` (finite `x`).
pub(crate) fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}
