//! Reference implementation of the sharing protocols with all three
//! components in one place. The actor backend follows the same message
//! schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Endpoint, RoundStats, Transcript, TranscriptEntry};
use crate::error::{Error, Result};
use crate::machine::{AuthorityScope, DecryptionAuthority};
use crate::trace::Stage;

pub const PARTIES: usize = 3;

/// Additive shares of a secret in `Z/2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    components: [u64; PARTIES],
}

impl Share {
    pub fn from_components(components: [u64; PARTIES]) -> Self {
        Share { components }
    }

    /// Component held by party `i`.
    pub fn component(&self, i: usize) -> u64 {
        self.components[i]
    }

    pub fn components(&self) -> [u64; PARTIES] {
        self.components
    }

    fn sum(&self) -> u64 {
        self.components.iter().fold(0u64, |s, &c| s.wrapping_add(c))
    }
}

/// Two uniform components and a correcting third.
pub fn share_secret<R: Rng>(x: u64, rng: &mut R) -> Share {
    let c0: u64 = rng.gen();
    let c1: u64 = rng.gen();
    Share {
        components: [c0, c1, x.wrapping_sub(c0).wrapping_sub(c1)],
    }
}

/// Splits `x` into three components; used by owners and the dealer.
pub(crate) fn split<R: Rng>(x: u64, rng: &mut R) -> [u64; PARTIES] {
    share_secret(x, rng).components
}

pub fn reconstruct(s: &Share, authority: &DecryptionAuthority) -> Result<u64> {
    if authority.scope() != AuthorityScope::Joint {
        return Err(Error::Authority(format!(
            "{:?} authority cannot reconstruct shares",
            authority.scope()
        )));
    }
    Ok(s.sum())
}

pub fn local_add(a: &Share, b: &Share) -> Share {
    let mut c = [0u64; PARTIES];
    for (i, slot) in c.iter_mut().enumerate() {
        *slot = a.components[i].wrapping_add(b.components[i]);
    }
    Share { components: c }
}

pub fn local_sub(a: &Share, b: &Share) -> Share {
    let mut c = [0u64; PARTIES];
    for (i, slot) in c.iter_mut().enumerate() {
        *slot = a.components[i].wrapping_sub(b.components[i]);
    }
    Share { components: c }
}

/// Shares of `(a, b, a·b)`. Usable once.
#[derive(Debug, Clone)]
pub struct BeaverTriple {
    a: Share,
    b: Share,
    c: Share,
    used: bool,
}

impl BeaverTriple {
    pub fn is_used(&self) -> bool {
        self.used
    }
}

/// Trusted dealer: triples and the equality gate.
#[derive(Debug)]
pub struct Dealer<R: Rng> {
    rng: R,
}

impl<R: Rng> Dealer<R> {
    pub fn new(rng: R) -> Self {
        Dealer { rng }
    }

    pub fn triple(&mut self) -> BeaverTriple {
        let a: u64 = self.rng.gen();
        let b: u64 = self.rng.gen();
        BeaverTriple {
            a: share_secret(a, &mut self.rng),
            b: share_secret(b, &mut self.rng),
            c: share_secret(a.wrapping_mul(b), &mut self.rng),
            used: false,
        }
    }

    /// Ideal equality functionality. Parties send their components of
    /// `x - y` masked by dealer-issued pad shares; the dealer removes the pad,
    /// tests for zero and hands out fresh shares of the bit.
    pub fn equality_gate(
        &mut self,
        x: &Share,
        y: &Share,
        stats: &mut RoundStats,
        transcript: &mut Transcript,
    ) -> Share {
        let diff = local_sub(x, y);
        let pad: u64 = self.rng.gen();
        let pad_shares = share_secret(pad, &mut self.rng);
        let masked: Vec<u64> = (0..PARTIES)
            .map(|i| diff.components[i].wrapping_add(pad_shares.components[i]))
            .collect();
        let opened = masked.iter().fold(0u64, |s, &m| s.wrapping_add(m)).wrapping_sub(pad);
        let bit = share_secret((opened == 0) as u64, &mut self.rng);
        for (i, &m) in masked.iter().enumerate() {
            transcript.push(TranscriptEntry {
                from: Endpoint::Dealer,
                kind: format!("pad->{i}"),
                values: vec![pad_shares.components[i]],
            });
            transcript.push(TranscriptEntry {
                from: Endpoint::Party(i),
                kind: "masked->dealer".into(),
                values: vec![m],
            });
            transcript.push(TranscriptEntry {
                from: Endpoint::Dealer,
                kind: format!("bit->{i}"),
                values: vec![bit.components[i]],
            });
        }
        stats.add_round(Stage::Adhoc, "eq", 1);
        stats.add_traffic(Stage::Adhoc, "eq", 9, 9 * 8);
        bit
    }
}

/// One-round Beaver multiplication. Each party opens `x_i - a_i` and
/// `y_i - b_i` to both peers.
pub fn beaver_mul(
    x: &Share,
    y: &Share,
    triple: &mut BeaverTriple,
    stats: &mut RoundStats,
    transcript: &mut Transcript,
) -> Result<Share> {
    if triple.used {
        return Err(Error::Mpc("beaver triple reused".into()));
    }
    triple.used = true;
    let d_parts = local_sub(x, &triple.a);
    let e_parts = local_sub(y, &triple.b);
    for i in 0..PARTIES {
        transcript.push(TranscriptEntry {
            from: Endpoint::Party(i),
            kind: "open".into(),
            values: vec![d_parts.components[i], e_parts.components[i]],
        });
    }
    let d = d_parts.sum();
    let e = e_parts.sum();
    let mut z = [0u64; PARTIES];
    for (i, slot) in z.iter_mut().enumerate() {
        let mut v = triple.c.components[i]
            .wrapping_add(d.wrapping_mul(triple.b.components[i]))
            .wrapping_add(e.wrapping_mul(triple.a.components[i]));
        if i == 0 {
            v = v.wrapping_add(d.wrapping_mul(e));
        }
        *slot = v;
    }
    stats.add_round(Stage::Adhoc, "emul", 1);
    // every party sends (d_i, e_i) to both peers
    stats.add_traffic(Stage::Adhoc, "emul", 6, 6 * 16);
    stats.opened_per_party += 2;
    Ok(Share { components: z })
}
