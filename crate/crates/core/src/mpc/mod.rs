//! Simulated three-party additive secret sharing.
//!
//! Secrets live in `Z/2^64` as three additive components, one per party.
//! Linear operations are local; multiplication consumes dealer-generated
//! Beaver triples and costs one opening round; equality and comparison are
//! served by the dealer as ideal functionalities over one-time-pad-masked
//! inputs. [`share`] holds the single-threaded protocol reference,
//! [`MpcBackend`] runs the same protocols with one actor thread per party
//! plus a dealer actor, exchanging messages over channels.

mod actor;
mod driver;
pub mod share;

use std::collections::BTreeMap;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::trace::Stage;

pub use driver::MpcBackend;
pub use share::{beaver_mul, local_add, local_sub, reconstruct, share_secret, BeaverTriple, Dealer, Share};

/// Communication counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub rounds: u64,
    pub messages: u64,
    pub bytes: u64,
}

impl Counters {
    fn merge(&mut self, other: &Counters) {
        self.rounds += other.rounds;
        self.messages += other.messages;
        self.bytes += other.bytes;
    }
}

/// Rounds, messages and bytes, in total and broken down per operation and
/// per pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub total: Counters,
    pub per_op: BTreeMap<String, Counters>,
    pub per_stage: BTreeMap<Stage, Counters>,
    /// Values each party opened to its peers, per party.
    pub opened_per_party: u64,
}

impl RoundStats {
    pub(crate) fn add_round(&mut self, stage: Stage, op: &str, rounds: u64) {
        self.total.rounds += rounds;
        self.per_op.entry(op.to_string()).or_default().rounds += rounds;
        self.per_stage.entry(stage).or_default().rounds += rounds;
    }

    pub(crate) fn add_traffic(&mut self, stage: Stage, op: &str, messages: u64, bytes: u64) {
        let c = Counters {
            rounds: 0,
            messages,
            bytes,
        };
        self.total.merge(&c);
        self.per_op.entry(op.to_string()).or_default().merge(&c);
        self.per_stage.entry(stage).or_default().merge(&c);
    }

    pub fn merge(&mut self, other: &RoundStats) {
        self.total.merge(&other.total);
        for (k, v) in &other.per_op {
            self.per_op.entry(k.clone()).or_default().merge(v);
        }
        for (k, v) in &other.per_stage {
            self.per_stage.entry(*k).or_default().merge(v);
        }
        self.opened_per_party += other.opened_per_party;
    }

    /// `scope,name,rounds,messages,bytes` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scope,name,rounds,messages,bytes\n");
        let t = &self.total;
        out.push_str(&format!("total,all,{},{},{}\n", t.rounds, t.messages, t.bytes));
        for (stage, c) in &self.per_stage {
            out.push_str(&format!("stage,{stage},{},{},{}\n", c.rounds, c.messages, c.bytes));
        }
        for (op, c) in &self.per_op {
            out.push_str(&format!("op,{op},{},{},{}\n", c.rounds, c.messages, c.bytes));
        }
        out
    }
}

/// Per-message delivery delay: `fixed + uniform(0..=jitter)` microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub fixed_us: u64,
    pub jitter_us: u64,
}

impl LatencyModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn fixed(us: u64) -> Self {
        LatencyModel {
            fixed_us: us,
            jitter_us: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.fixed_us == 0 && self.jitter_us == 0
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> Duration {
        let jitter = if self.jitter_us > 0 {
            rng.gen_range(0..=self.jitter_us)
        } else {
            0
        };
        Duration::from_micros(self.fixed_us + jitter)
    }
}

/// Who sent a message a party received.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Party(usize),
    Dealer,
    Owner,
}

/// One received message as seen by a party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub from: Endpoint,
    pub kind: String,
    pub values: Vec<u64>,
}

pub type Transcript = Vec<TranscriptEntry>;
