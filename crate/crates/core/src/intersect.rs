//! Private set-intersection sizes and the thresholded Jaccard decision.
//!
//! Inputs are private vectors of unique integer tokens. Every strategy
//! returns the intersection cardinality as a private scalar; which one is
//! usable depends on the backend's capabilities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{Capabilities, PlainBackend};
use crate::error::{Error, Result};
use crate::machine::{Machine, PrivateBool, PrivateScalar, PrivateVector};
use crate::trace::CostWeights;
use crate::value::{NumericDomain, Public};

/// Padding value for rotation on exact backends.
pub const SENTINEL_EXACT: i64 = i64::MAX;
/// Padding value for rotation on approximate backends.
pub const SENTINEL_APPROX: i64 = 1 << 52;
/// Default Jaccard tolerance on approximate backends.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntersectStrategy {
    /// Pairwise join: every element of one vector against every element of
    /// the other.
    PJ,
    /// Vector rotation.
    VR,
    /// Vector extension.
    VE,
    /// Sorting.
    SO,
    /// Matrix join.
    MJ,
}

impl IntersectStrategy {
    pub const ALL: [IntersectStrategy; 5] = [Self::PJ, Self::VR, Self::VE, Self::SO, Self::MJ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PJ => "pj",
            Self::VR => "vr",
            Self::VE => "ve",
            Self::SO => "so",
            Self::MJ => "mj",
        }
    }

    /// Capabilities this strategy needs, by name, if any is missing.
    pub fn missing(self, caps: &Capabilities) -> Option<&'static str> {
        let eq = caps.native_eq || caps.division;
        match self {
            Self::PJ if !eq => Some("equality (native or via division)"),
            Self::VR if !caps.rotation => Some("rotation"),
            Self::VE if !caps.repeat_elements => Some("repeat_elements"),
            Self::SO if !caps.sort => Some("sort"),
            Self::MJ if !caps.join => Some("join"),
            Self::VR | Self::VE | Self::SO if !eq => Some("equality (native or via division)"),
            _ => None,
        }
    }

    pub fn supported(self, caps: &Capabilities) -> bool {
        self.missing(caps).is_none()
    }
}

impl fmt::Display for IntersectStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntersectStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown intersection strategy `{s}`")))
    }
}

/// A fixed strategy, or the cheapest supported one per the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyChoice {
    Fixed(IntersectStrategy),
    Auto,
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyChoice::Fixed(s) => s.fmt(f),
            StrategyChoice::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for StrategyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(StrategyChoice::Auto)
        } else {
            s.parse().map(StrategyChoice::Fixed)
        }
    }
}

/// Similarity threshold as an exact rational `num/den` in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Threshold {
    num: u64,
    den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Threshold {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::Config(format!("threshold {num}/{den} must lie in (0, 1)")));
        }
        let g = gcd(num, den);
        Ok(Threshold {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Plain-arithmetic reference: `inter / (s1 + s2 - inter) > t`.
    pub fn passes(&self, inter: u64, s1: u64, s2: u64) -> bool {
        let union = s1 + s2 - inter;
        union > 0 && (self.den as u128) * (inter as u128) > (self.num as u128) * (union as u128)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Threshold {
    type Err = Error;

    /// Accepts `P/Q` or a decimal such as `0.35`, both converted exactly.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse threshold `{s}`"));
        if let Some((p, q)) = s.split_once('/') {
            let p = p.trim().parse().map_err(|_| bad())?;
            let q = q.trim().parse().map_err(|_| bad())?;
            return Threshold::new(p, q);
        }
        let s = s.trim();
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Threshold::new(num, den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JaccardParams {
    pub threshold: Threshold,
    /// Tolerance used only on approximate backends.
    pub epsilon: f64,
}

impl JaccardParams {
    pub fn new(threshold: Threshold) -> Self {
        JaccardParams {
            threshold,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

fn require(m: &Machine, strategy: IntersectStrategy) -> Result<()> {
    match strategy.missing(&m.capabilities()) {
        None => Ok(()),
        Some(capability) => Err(Error::Unsupported {
            backend: format!("{}/{}", m.kind(), m.profile()),
            capability,
        }),
    }
}

/// Default padding sentinel for the machine's domain.
pub fn default_sentinel(domain: NumericDomain) -> i64 {
    if domain.is_exact() {
        SENTINEL_EXACT
    } else {
        SENTINEL_APPROX
    }
}

/// Number of zero slots: equality against zeros, summed by a dot product
/// with ones.
pub fn zero_count(m: &mut Machine, diff: &PrivateVector) -> Result<PrivateScalar> {
    let n = diff.len();
    let zero = m.enc_scalar(0)?;
    let zeros = m.broadcast(&zero, n)?;
    let bits = m.eeq(diff, &zeros)?;
    let one = m.enc_scalar(1)?;
    let ones = m.broadcast(&one, n)?;
    m.dot_product(&bits, &ones)
}

pub fn isect_pj(m: &mut Machine, v1: &PrivateVector, v2: &PrivateVector) -> Result<PrivateScalar> {
    require(m, IntersectStrategy::PJ)?;
    let a: Vec<PrivateScalar> = (0..v1.len()).map(|i| m.element(v1, i)).collect::<Result<_>>()?;
    let b: Vec<PrivateScalar> = (0..v2.len()).map(|j| m.element(v2, j)).collect::<Result<_>>()?;
    let mut acc = m.enc_scalar(0)?;
    for x in &a {
        for y in &b {
            let e = m.eq_scalar(x, y)?;
            acc = m.add(&acc, &e)?;
        }
    }
    Ok(acc)
}

/// Pads the shorter input with `sentinel` so both have length
/// `max(|v1|, |v2|)`.
pub fn vr_pad(
    m: &mut Machine,
    v1: &PrivateVector,
    v2: &PrivateVector,
    sentinel: i64,
) -> Result<(PrivateVector, PrivateVector)> {
    let l = v1.len().max(v2.len());
    let a = if v1.len() < l { m.pad(v1, l, sentinel)? } else { v1.clone() };
    let b = if v2.len() < l { m.pad(v2, l, sentinel)? } else { v2.clone() };
    Ok((a, b))
}

fn vr_loop(
    m: &mut Machine,
    v1: &PrivateVector,
    v2: &PrivateVector,
    sentinel: i64,
    keep: bool,
) -> Result<(PrivateScalar, Vec<PrivateVector>)> {
    require(m, IntersectStrategy::VR)?;
    let mut acc = m.enc_scalar(0)?;
    let mut diffs = Vec::new();
    if v1.is_empty() || v2.is_empty() {
        return Ok((acc, diffs));
    }
    let (a, mut b) = vr_pad(m, v1, v2, sentinel)?;
    for _ in 0..a.len() {
        let diff = m.esub(&a, &b)?;
        let z = zero_count(m, &diff)?;
        acc = m.add(&acc, &z)?;
        b = m.rshift(&b, 1)?;
        if keep {
            diffs.push(diff);
        }
    }
    Ok((acc, diffs))
}

/// Rotation strategy: `max(|v1|, |v2|)` rounds of subtract, count zeros,
/// rotate by one.
pub fn isect_vr(m: &mut Machine, v1: &PrivateVector, v2: &PrivateVector) -> Result<PrivateScalar> {
    let sentinel = default_sentinel(m.domain());
    isect_vr_with(m, v1, v2, sentinel)
}

pub fn isect_vr_with(
    m: &mut Machine,
    v1: &PrivateVector,
    v2: &PrivateVector,
    sentinel: i64,
) -> Result<PrivateScalar> {
    Ok(vr_loop(m, v1, v2, sentinel, false)?.0)
}

/// The per-round difference vectors of the rotation strategy, in order.
pub fn vr_differences(
    m: &mut Machine,
    v1: &PrivateVector,
    v2: &PrivateVector,
    sentinel: i64,
) -> Result<Vec<PrivateVector>> {
    Ok(vr_loop(m, v1, v2, sentinel, true)?.1)
}

/// `v1` tiled `|v2|` times and each element of `v2` repeated `|v1|` times.
pub fn ve_operands(
    m: &mut Machine,
    v1: &PrivateVector,
    v2: &PrivateVector,
) -> Result<(PrivateVector, PrivateVector)> {
    require(m, IntersectStrategy::VE)?;
    let a = m.tile(v1, v2.len())?;
    let b = m.repeat_each(v2, v1.len())?;
    Ok((a, b))
}

pub fn isect_ve(m: &mut Machine, v1: &PrivateVector, v2: &PrivateVector) -> Result<PrivateScalar> {
    let (a, b) = ve_operands(m, v1, v2)?;
    let diff = m.esub(&a, &b)?;
    zero_count(m, &diff)
}

/// Sorted concatenation with each element minus its successor.
pub fn so_differences(m: &mut Machine, v1: &PrivateVector, v2: &PrivateVector) -> Result<PrivateVector> {
    require(m, IntersectStrategy::SO)?;
    let merged = m.concat(v1, v2)?;
    let sorted = m.sort(&merged)?;
    let n = sorted.len();
    let head = m.slice(&sorted, 0, n.saturating_sub(1))?;
    let tail = m.slice(&sorted, n.min(1), n.saturating_sub(1))?;
    m.esub(&head, &tail)
}

pub fn isect_so(m: &mut Machine, v1: &PrivateVector, v2: &PrivateVector) -> Result<PrivateScalar> {
    let diff = so_differences(m, v1, v2)?;
    zero_count(m, &diff)
}

pub fn isect_mj(m: &mut Machine, v1: &PrivateVector, v2: &PrivateVector) -> Result<PrivateScalar> {
    require(m, IntersectStrategy::MJ)?;
    m.join_count(v1, v2)
}

pub fn intersection_size(
    m: &mut Machine,
    strategy: IntersectStrategy,
    v1: &PrivateVector,
    v2: &PrivateVector,
) -> Result<PrivateScalar> {
    match strategy {
        IntersectStrategy::PJ => isect_pj(m, v1, v2),
        IntersectStrategy::VR => isect_vr(m, v1, v2),
        IntersectStrategy::VE => isect_ve(m, v1, v2),
        IntersectStrategy::SO => isect_so(m, v1, v2),
        IntersectStrategy::MJ => isect_mj(m, v1, v2),
    }
}

/// Weighted primitive cost of one intersection at the given public lengths,
/// measured by a dry run on a simulator with the same capabilities.
pub fn estimate_cost(
    strategy: IntersectStrategy,
    caps: Capabilities,
    domain: NumericDomain,
    len1: usize,
    len2: usize,
    weights: &CostWeights,
) -> Result<f64> {
    let mut m = Machine::new(Box::new(PlainBackend::restricted(caps, domain)), 0);
    m.set_tracing(false);
    let a: Vec<i64> = (1..=len1 as i64).collect();
    let b: Vec<i64> = (1..=len2 as i64).map(|x| x + len1 as i64).collect();
    let v1 = m.enc_vec(&a)?;
    let v2 = m.enc_vec(&b)?;
    m.reset_ledger();
    intersection_size(&mut m, strategy, &v1, &v2)?;
    Ok(m.ledger().total(weights))
}

/// Cheapest supported strategy for these lengths; ties keep the earlier
/// strategy in declaration order.
pub fn auto_strategy(
    caps: Capabilities,
    domain: NumericDomain,
    len1: usize,
    len2: usize,
    weights: &CostWeights,
) -> Result<IntersectStrategy> {
    let mut best: Option<(f64, IntersectStrategy)> = None;
    for s in IntersectStrategy::ALL {
        if !s.supported(&caps) {
            continue;
        }
        let c = estimate_cost(s, caps, domain, len1, len2, weights)?;
        if best.is_none_or(|(bc, _)| c < bc) {
            best = Some((c, s));
        }
    }
    best.map(|(_, s)| s).ok_or(Error::Unsupported {
        backend: "selected".into(),
        capability: "any intersection strategy",
    })
}

/// Private decision `|r1 ∩ r2| / |r1 ∪ r2| > t`.
///
/// Exact backends test `(den + num)·inter − num·(s1 + s2) > 0`, which is the
/// same inequality without division. Approximate backends compute the ratio
/// through the masked reciprocal and test `ratio > t + ε`, so a similarity
/// of exactly `t` does not match there either.
pub fn jaccard_match(
    m: &mut Machine,
    r1: &PrivateVector,
    r2: &PrivateVector,
    params: &JaccardParams,
    strategy: IntersectStrategy,
) -> Result<PrivateBool> {
    let s1 = m.size(r1).len() as i64;
    let s2 = m.size(r2).len() as i64;
    let inter = intersection_size(m, strategy, r1, r2)?;
    let t = params.threshold;
    if m.domain().is_exact() {
        let scaled = m.mul_public(&inter, (t.den() + t.num()) as i64)?;
        let shifted = m.add_public(&scaled, -(t.num() as i64) * (s1 + s2))?;
        return m.gt_zero(&shifted);
    }
    if s1 + s2 == 0 {
        return m.enc_scalar(0);
    }
    let neg = m.mul_public(&inter, -1i64)?;
    let union = m.add_public(&neg, s1 + s2)?;
    let inv = m.masked_reciprocal(&union)?;
    let ratio = m.mul(&inter, &inv)?;
    let margin = m.add_public(&ratio, Public::Real(-(t.as_f64() + params.epsilon)))?;
    m.gt_zero(&margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_parsing() {
        let t: Threshold = "0.5".parse().unwrap();
        assert_eq!((t.num(), t.den()), (1, 2));
        let t: Threshold = "3/10".parse().unwrap();
        assert_eq!((t.num(), t.den()), (3, 10));
        let t: Threshold = ".25".parse().unwrap();
        assert_eq!((t.num(), t.den()), (1, 4));
        assert!("1".parse::<Threshold>().is_err());
        assert!("0".parse::<Threshold>().is_err());
        assert!("2/1".parse::<Threshold>().is_err());
        assert!("x".parse::<Threshold>().is_err());
    }

    #[test]
    fn rearranged_test_matches_real_division() {
        for den in [100u64] {
            for num in 1..den {
                let t = Threshold::new(num, den).unwrap();
                for s1 in 0..=64u64 {
                    for s2 in 0..=64u64 {
                        for inter in 0..=s1.min(s2) {
                            let union = s1 + s2 - inter;
                            // integer cross-multiplication is the oracle for
                            // the real-valued strict inequality
                            let real = union > 0 && inter * den > num * union;
                            let rearranged = ((den + num) * inter) as i128
                                - (num * (s1 + s2)) as i128
                                > 0;
                            assert_eq!(t.passes(inter, s1, s2), real);
                            assert_eq!(rearranged, real);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in IntersectStrategy::ALL {
            assert_eq!(s.name().parse::<IntersectStrategy>().unwrap(), s);
        }
        assert_eq!("auto".parse::<StrategyChoice>().unwrap(), StrategyChoice::Auto);
        assert!("xx".parse::<StrategyChoice>().is_err());
    }
}
