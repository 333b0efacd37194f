//! Backends realize the machine's primitives over some representation of
//! private data.
//!
//! The machine owns shapes, handles, tracing and authority checks; a backend
//! only sees flat slot buffers addressed by [`SlotId`]. Three realizations
//! exist: the cleartext oracle, the oblivious simulator (plain values that
//! refuse host-level inspection, restricted per [`Profile`]) and the
//! three-party secret-sharing backend in [`crate::mpc`].

mod plain;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TaintViolation};
use crate::mpc::{LatencyModel, MpcBackend, RoundStats, Transcript};
use crate::trace::Stage;
use crate::value::{NumericDomain, Plain, Public};

pub use plain::{PlainBackend, SealedValue};

pub type SlotId = u64;

/// Source of one output slot in a [`Backend::gather`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pick {
    /// `sources[source][index]`
    Slot { source: usize, index: usize },
    /// A public constant.
    Fill(Public),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackendKind {
    Clear,
    ObliviousSim,
    Mpc,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Clear => "clear",
            BackendKind::ObliviousSim => "sim",
            BackendKind::Mpc => "mpc",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clear" => Ok(BackendKind::Clear),
            "sim" | "oblivious-sim" => Ok(BackendKind::ObliviousSim),
            "mpc" => Ok(BackendKind::Mpc),
            other => Err(Error::Config(format!("unknown backend `{other}`"))),
        }
    }
}

/// Capability restriction applied to the oblivious simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Profile {
    Generic,
    /// Packed-slot homomorphic style: rotations and replication, approximate
    /// arithmetic, division through the masked reciprocal helper.
    SimdLike,
    /// Secret-shared platform style: native equality, sorting and joins.
    SharemindLike,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Generic => "generic",
            Profile::SimdLike => "simd",
            Profile::SharemindLike => "sharemind",
        }
    }

    pub fn capabilities(self) -> Capabilities {
        match self {
            Profile::Generic => Capabilities::all(),
            Profile::SimdLike => Capabilities {
                native_eq: false,
                rotation: true,
                repeat_elements: true,
                sort: false,
                join: false,
                division: true,
                compare: true,
            },
            Profile::SharemindLike => Capabilities {
                native_eq: true,
                rotation: false,
                repeat_elements: true,
                sort: true,
                join: true,
                division: false,
                compare: true,
            },
        }
    }

    pub fn domain(self) -> NumericDomain {
        match self {
            Profile::SimdLike => NumericDomain::ApproxFixedPoint,
            _ => NumericDomain::ExactInt64,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Profile::Generic),
            "simd" | "simd-like" => Ok(Profile::SimdLike),
            "sharemind" | "sharemind-like" => Ok(Profile::SharemindLike),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

/// Primitive families a backend can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub native_eq: bool,
    pub rotation: bool,
    pub repeat_elements: bool,
    pub sort: bool,
    pub join: bool,
    /// Helper-assisted reciprocal of a masked private value.
    pub division: bool,
    /// Private comparison against zero.
    pub compare: bool,
}

impl Capabilities {
    pub fn all() -> Self {
        Capabilities {
            native_eq: true,
            rotation: true,
            repeat_elements: true,
            sort: true,
            join: true,
            division: false,
            compare: true,
        }
    }
}

/// Slot-level primitive interface. Output slots are fresh ids chosen by the
/// caller; operands are guaranteed to exist and to have compatible lengths.
pub trait Backend: Send {
    fn kind(&self) -> BackendKind;
    fn profile(&self) -> Profile;
    fn domain(&self) -> NumericDomain;
    fn capabilities(&self) -> Capabilities;

    /// Data-owner input: the cleartext is turned into private form.
    fn input(&mut self, out: SlotId, values: Plain) -> Result<()>;
    /// Joint output: the machine has already checked the authority.
    fn reveal(&mut self, slot: SlotId) -> Result<Plain>;
    fn free(&mut self, slots: &[SlotId]);

    fn add(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()>;
    fn sub(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()>;
    fn emul(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()>;
    fn add_public(&mut self, out: SlotId, a: SlotId, value: Public) -> Result<()>;
    fn mul_public(&mut self, out: SlotId, a: SlotId, value: Public) -> Result<()>;
    /// Row-major `(m×k)·(k×n)` product.
    fn matmul(&mut self, out: SlotId, a: SlotId, b: SlotId, m: usize, k: usize, n: usize)
        -> Result<()>;
    /// Sum of all slots into a single slot.
    fn sum(&mut self, out: SlotId, a: SlotId) -> Result<()>;
    /// Public re-indexing: output slot `i` is taken from `picks[i]`.
    fn gather(&mut self, out: SlotId, sources: &[SlotId], picks: &[Pick]) -> Result<()>;
    /// Element-wise equality bit.
    fn eq(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()>;
    /// Element-wise `a > 0` bit, signed.
    fn gt_zero(&mut self, out: SlotId, a: SlotId) -> Result<()>;
    fn sort(&mut self, out: SlotId, a: SlotId) -> Result<()>;
    /// Cardinality of the equality join of two columns.
    fn join_count(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()>;

    /// Host-level read of private content, the operation a data-dependent
    /// branch would need. Only the cleartext oracle permits it.
    fn peek(&mut self, slot: SlotId, site: &str) -> Result<Plain, TaintViolation>;

    /// Independent copy for parallel work, when the backend allows it.
    fn fork(&self) -> Option<Box<dyn Backend>> {
        None
    }
    fn supports_fork(&self) -> bool {
        false
    }
    fn export(&mut self, _slot: SlotId) -> Option<SealedValue> {
        None
    }
    fn import(&mut self, _out: SlotId, _value: SealedValue) -> Result<()> {
        Err(Error::Unsupported {
            backend: self.kind().to_string(),
            capability: "import",
        })
    }

    fn round_stats(&mut self) -> Option<RoundStats> {
        None
    }

    /// Messages each computing party received, for backends that record them.
    fn transcripts(&mut self) -> Option<Vec<Transcript>> {
        None
    }

    /// Pipeline stage that subsequent primitives are accounted to.
    fn set_stage(&mut self, _stage: Stage) {}
}

/// Builds a backend. `profile` only restricts the oblivious simulator; the
/// cleartext oracle and the mpc backend have fixed capability sets.
pub fn make_backend(
    kind: BackendKind,
    profile: Profile,
    seed: u64,
    latency: LatencyModel,
) -> Result<Box<dyn Backend>> {
    Ok(match kind {
        BackendKind::Clear => Box::new(PlainBackend::clear()),
        BackendKind::ObliviousSim => Box::new(PlainBackend::oblivious(profile)),
        BackendKind::Mpc => Box::new(MpcBackend::spawn(seed, latency)?),
    })
}
