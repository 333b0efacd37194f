//! [`Backend`] implementation that drives the party and dealer actors.

use std::collections::HashMap;
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{unbounded, Receiver, Sender};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::actor::{
    spawn_dealer, spawn_party, DealerChannels, DealerReq, GateKind, Instr, PartyChannels, Reply,
    Traffic,
};
use super::share::{split, PARTIES};
use super::{LatencyModel, RoundStats, Transcript};
use crate::backend::{Backend, BackendKind, Capabilities, Pick, Profile, SlotId};
use crate::error::{Error, Result, TaintViolation};
use crate::trace::Stage;
use crate::value::{NumericDomain, Plain, Public};

/// Scratch slots used inside composite protocols (sorting).
const SCRATCH_BASE: SlotId = 1 << 62;

/// Three-party additive sharing backend with a trusted dealer.
///
/// Exact 64-bit integer domain. Comparisons interpret values as signed and
/// are exact as long as the compared differences do not overflow.
pub struct MpcBackend {
    parties: Vec<Sender<Instr>>,
    replies: Vec<Receiver<Reply>>,
    dealer: Sender<DealerReq>,
    dealer_reply: Receiver<Reply>,
    threads: Vec<JoinHandle<()>>,
    lens: HashMap<SlotId, usize>,
    owner_rng: ChaCha8Rng,
    stats: RoundStats,
    stage: Stage,
    op: &'static str,
    transcripts: Vec<Transcript>,
    next_scratch: SlotId,
}

impl MpcBackend {
    pub fn spawn(seed: u64, latency: LatencyModel) -> Result<Self> {
        Self::spawn_with(seed, latency, false)
    }

    /// As [`MpcBackend::spawn`], optionally recording every message each
    /// party receives.
    pub fn spawn_with(seed: u64, latency: LatencyModel, record_transcripts: bool) -> Result<Self> {
        let mut peer_tx: Vec<Vec<Option<Sender<Vec<u64>>>>> =
            (0..PARTIES).map(|_| vec![None; PARTIES]).collect();
        let mut peer_rx: Vec<Vec<Option<Receiver<Vec<u64>>>>> =
            (0..PARTIES).map(|_| (0..PARTIES).map(|_| None).collect()).collect();
        for i in 0..PARTIES {
            for j in 0..PARTIES {
                if i != j {
                    let (tx, rx) = unbounded();
                    peer_tx[i][j] = Some(tx);
                    peer_rx[j][i] = Some(rx);
                }
            }
        }

        let (dealer_ctrl_tx, dealer_ctrl_rx) = unbounded();
        let (dealer_reply_tx, dealer_reply_rx) = unbounded();
        let mut to_party = Vec::new();
        let mut from_dealer = Vec::new();
        let mut to_dealer = Vec::new();
        let mut from_party = Vec::new();
        for _ in 0..PARTIES {
            let (tx, rx) = unbounded();
            to_party.push(tx);
            from_dealer.push(rx);
            let (tx, rx) = unbounded();
            to_dealer.push(tx);
            from_party.push(rx);
        }

        let mut threads = Vec::new();
        let mut parties = Vec::new();
        let mut replies = Vec::new();
        for (i, ((out, inn), (fd, td))) in peer_tx
            .into_iter()
            .zip(peer_rx)
            .zip(from_dealer.into_iter().zip(to_dealer))
            .enumerate()
        {
            let (ctrl_tx, ctrl_rx) = unbounded();
            let (reply_tx, reply_rx) = unbounded();
            let ch = PartyChannels {
                ctrl: ctrl_rx,
                peer_in: inn,
                peer_out: out,
                from_dealer: fd,
                to_dealer: td,
                reply: reply_tx,
            };
            threads.push(spawn_party(i, ch, seed, latency, record_transcripts));
            parties.push(ctrl_tx);
            replies.push(reply_rx);
        }
        threads.push(spawn_dealer(
            DealerChannels {
                ctrl: dealer_ctrl_rx,
                to_party,
                from_party,
                reply: dealer_reply_tx,
            },
            seed,
            latency,
        ));

        Ok(MpcBackend {
            parties,
            replies,
            dealer: dealer_ctrl_tx,
            dealer_reply: dealer_reply_rx,
            threads,
            lens: HashMap::new(),
            owner_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6f_776e_6572),
            stats: RoundStats::default(),
            stage: Stage::Adhoc,
            op: "setup",
            transcripts: vec![Transcript::new(); PARTIES],
            next_scratch: SCRATCH_BASE,
        })
    }

    /// Messages each party has received so far, in arrival order. Empty
    /// unless the backend was spawned with transcripts enabled.
    pub fn transcripts(&mut self) -> Result<Vec<Transcript>> {
        self.collect()?;
        Ok(self.transcripts.clone())
    }

    fn broadcast(&self, make: impl Fn(usize) -> Instr) -> Result<()> {
        for (i, tx) in self.parties.iter().enumerate() {
            tx.send(make(i)).map_err(|_| Error::Mpc(format!("party {i} is gone")))?;
        }
        Ok(())
    }

    fn to_dealer(&self, req: DealerReq) -> Result<()> {
        self.dealer
            .send(req)
            .map_err(|_| Error::Mpc("dealer is gone".into()))
    }

    fn begin(&mut self, op: &'static str) -> Result<()> {
        if self.op != op {
            self.op = op;
            let stage = self.stage;
            self.broadcast(|_| Instr::Stage(stage, op))?;
            self.to_dealer(DealerReq::Stage(stage, op))?;
        }
        Ok(())
    }

    fn len(&self, slot: SlotId) -> Result<usize> {
        self.lens
            .get(&slot)
            .copied()
            .ok_or_else(|| Error::Mpc(format!("unknown slot {slot}")))
    }

    fn same_len(&self, op: &'static str, a: SlotId, b: SlotId) -> Result<usize> {
        let (la, lb) = (self.len(a)?, self.len(b)?);
        if la != lb {
            return Err(Error::shape(op, la, lb));
        }
        Ok(la)
    }

    fn int(value: Public) -> Result<u64> {
        match value {
            Public::Int(v) => Ok(v as u64),
            Public::Real(v) => Err(Error::Domain(format!(
                "real constant {v} on the exact mpc backend"
            ))),
        }
    }

    fn collect(&mut self) -> Result<()> {
        self.broadcast(|_| Instr::Report)?;
        self.to_dealer(DealerReq::Report)?;
        let mut traffic: Vec<Traffic> = Vec::new();
        for (i, rx) in self.replies.iter().enumerate() {
            match rx.recv() {
                Ok(Reply::Report { traffic: t, transcript }) => {
                    traffic.push(t);
                    self.transcripts[i].extend(transcript);
                }
                _ => return Err(Error::Mpc(format!("party {i} failed to report"))),
            }
        }
        match self.dealer_reply.recv() {
            Ok(Reply::Report { traffic: t, .. }) => traffic.push(t),
            _ => return Err(Error::Mpc("dealer failed to report".into())),
        }
        for t in traffic {
            for ((stage, op), (msgs, bytes)) in t {
                self.stats.add_traffic(stage, &op, msgs, bytes);
            }
        }
        Ok(())
    }

    fn scratch(&mut self) -> SlotId {
        self.next_scratch += 1;
        self.next_scratch
    }

    fn gate(&mut self, kind: GateKind, out: SlotId, n: usize, make: impl Fn(usize) -> Instr) -> Result<()> {
        self.to_dealer(DealerReq::Gate { kind, n })?;
        self.broadcast(make)?;
        self.stats.add_round(self.stage, self.op, 1);
        self.lens.insert(out, n);
        Ok(())
    }

    /// One layer of compare-exchange on disjoint pairs `(lo[i], hi[i])`.
    fn exchange_layer(&mut self, cur: SlotId, n: usize, pairs: &[(usize, usize)]) -> Result<SlotId> {
        let lo_picks: Vec<Pick> = pairs.iter().map(|&(i, _)| Pick::Slot { source: 0, index: i }).collect();
        let hi_picks: Vec<Pick> = pairs.iter().map(|&(_, j)| Pick::Slot { source: 0, index: j }).collect();
        let lo = self.scratch();
        let hi = self.scratch();
        self.gather(lo, &[cur], &lo_picks)?;
        self.gather(hi, &[cur], &hi_picks)?;
        let diff = self.scratch();
        self.sub(diff, lo, hi)?;
        let swap = self.scratch();
        self.gt_zero(swap, diff)?;
        let delta = self.scratch();
        self.emul(delta, swap, diff)?;
        let new_lo = self.scratch();
        let new_hi = self.scratch();
        self.sub(new_lo, lo, delta)?;
        self.add(new_hi, hi, delta)?;
        let mut picks: Vec<Pick> = (0..n).map(|i| Pick::Slot { source: 0, index: i }).collect();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            picks[i] = Pick::Slot { source: 1, index: p };
            picks[j] = Pick::Slot { source: 2, index: p };
        }
        let next = self.scratch();
        self.gather(next, &[cur, new_lo, new_hi], &picks)?;
        self.free(&[lo, hi, diff, swap, delta, new_lo, new_hi]);
        Ok(next)
    }
}

/// Comparator layers of the merge-exchange sorting network for `n` inputs.
pub(crate) fn merge_exchange_layers(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut layers = Vec::new();
    if n < 2 {
        return layers;
    }
    let t = usize::BITS - (n - 1).leading_zeros();
    let mut p = 1usize << (t - 1);
    while p > 0 {
        let mut q = 1usize << (t - 1);
        let mut r = 0usize;
        let mut d = p;
        loop {
            let layer: Vec<(usize, usize)> = (0..n - d)
                .filter(|&i| i & p == r)
                .map(|i| (i, i + d))
                .collect();
            if !layer.is_empty() {
                layers.push(layer);
            }
            if q == p {
                break;
            }
            d = q - p;
            q >>= 1;
            r = p;
        }
        p >>= 1;
    }
    layers
}

impl Backend for MpcBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mpc
    }

    fn profile(&self) -> Profile {
        Profile::Generic
    }

    fn domain(&self) -> NumericDomain {
        NumericDomain::ExactInt64
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            native_eq: true,
            rotation: true,
            repeat_elements: true,
            sort: true,
            join: false,
            division: false,
            compare: true,
        }
    }

    fn input(&mut self, out: SlotId, values: Plain) -> Result<()> {
        let values = match values {
            Plain::Int(v) => v,
            Plain::Real(_) => {
                return Err(Error::Domain("real input on the exact mpc backend".into()))
            }
        };
        self.begin("input")?;
        let mut comps: [Vec<u64>; PARTIES] = Default::default();
        for &v in &values {
            let parts = split(v as u64, &mut self.owner_rng);
            for i in 0..PARTIES {
                comps[i].push(parts[i]);
            }
        }
        for (i, c) in comps.into_iter().enumerate() {
            self.parties[i]
                .send(Instr::Input { out, component: c })
                .map_err(|_| Error::Mpc(format!("party {i} is gone")))?;
        }
        let n = values.len() as u64;
        self.stats.add_round(self.stage, "input", 1);
        self.stats
            .add_traffic(self.stage, "input", PARTIES as u64, PARTIES as u64 * 8 * n);
        self.lens.insert(out, values.len());
        Ok(())
    }

    fn reveal(&mut self, slot: SlotId) -> Result<Plain> {
        let n = self.len(slot)?;
        self.begin("reveal")?;
        self.broadcast(|_| Instr::Reveal { slot })?;
        let mut total = vec![0u64; n];
        for (i, rx) in self.replies.iter().enumerate() {
            match rx.recv() {
                Ok(Reply::Component(c)) => {
                    for (t, v) in total.iter_mut().zip(c) {
                        *t = t.wrapping_add(v);
                    }
                }
                _ => return Err(Error::Mpc(format!("party {i} failed to reveal"))),
            }
        }
        self.stats.add_round(self.stage, "reveal", 1);
        Ok(Plain::Int(total.into_iter().map(|v| v as i64).collect()))
    }

    fn free(&mut self, slots: &[SlotId]) {
        let slots: Vec<SlotId> = slots
            .iter()
            .copied()
            .filter(|s| self.lens.remove(s).is_some())
            .collect();
        if !slots.is_empty() {
            // a dead party only matters for later operations, which report it
            let _ = self.broadcast(|_| Instr::Free(slots.clone()));
        }
    }

    fn add(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        let n = self.same_len("add", a, b)?;
        self.broadcast(|_| Instr::Add { out, a, b })?;
        self.lens.insert(out, n);
        Ok(())
    }

    fn sub(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        let n = self.same_len("sub", a, b)?;
        self.broadcast(|_| Instr::Sub { out, a, b })?;
        self.lens.insert(out, n);
        Ok(())
    }

    fn emul(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        let n = self.same_len("emul", a, b)?;
        self.begin("emul")?;
        self.to_dealer(DealerReq::Triples { n })?;
        self.broadcast(|_| Instr::EMul { out, a, b })?;
        self.stats.add_round(self.stage, "emul", 1);
        self.stats.opened_per_party += 2 * n as u64;
        self.lens.insert(out, n);
        Ok(())
    }

    fn add_public(&mut self, out: SlotId, a: SlotId, value: Public) -> Result<()> {
        let n = self.len(a)?;
        let c = Self::int(value)?;
        self.broadcast(|_| Instr::AddPublic { out, a, c })?;
        self.lens.insert(out, n);
        Ok(())
    }

    fn mul_public(&mut self, out: SlotId, a: SlotId, value: Public) -> Result<()> {
        let n = self.len(a)?;
        let c = Self::int(value)?;
        self.broadcast(|_| Instr::MulPublic { out, a, c })?;
        self.lens.insert(out, n);
        Ok(())
    }

    fn matmul(&mut self, out: SlotId, a: SlotId, b: SlotId, m: usize, k: usize, n: usize) -> Result<()> {
        if self.len(a)? != m * k || self.len(b)? != k * n {
            return Err(Error::shape("matmul", (m, k), (k, n)));
        }
        self.begin("matmul")?;
        self.to_dealer(DealerReq::MatTriple { m, k, n })?;
        self.broadcast(|_| Instr::MatMul { out, a, b, m, k, n })?;
        self.stats.add_round(self.stage, "matmul", 1);
        self.stats.opened_per_party += (m * k + k * n) as u64;
        self.lens.insert(out, m * n);
        Ok(())
    }

    fn sum(&mut self, out: SlotId, a: SlotId) -> Result<()> {
        self.len(a)?;
        self.broadcast(|_| Instr::Sum { out, a })?;
        self.lens.insert(out, 1);
        Ok(())
    }

    fn gather(&mut self, out: SlotId, sources: &[SlotId], picks: &[Pick]) -> Result<()> {
        let lens: Vec<usize> = sources.iter().map(|&s| self.len(s)).collect::<Result<_>>()?;
        for p in picks {
            match *p {
                Pick::Slot { source, index } => {
                    if source >= lens.len() || index >= lens[source] {
                        return Err(Error::invalid(format!(
                            "gather pick ({source}, {index}) out of range"
                        )));
                    }
                }
                Pick::Fill(c) => {
                    Self::int(c)?;
                }
            }
        }
        let picks = Arc::new(picks.to_vec());
        let sources = sources.to_vec();
        self.broadcast(|_| Instr::Gather {
            out,
            sources: sources.clone(),
            picks: Arc::clone(&picks),
        })?;
        self.lens.insert(out, picks.len());
        Ok(())
    }

    fn eq(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        let n = self.same_len("eq", a, b)?;
        self.begin("eq")?;
        self.gate(GateKind::Eq, out, n, |_| Instr::Eq { out, a, b })
    }

    fn gt_zero(&mut self, out: SlotId, a: SlotId) -> Result<()> {
        let n = self.len(a)?;
        self.begin("compare")?;
        self.gate(GateKind::GtZero, out, n, |_| Instr::GtZero { out, a })
    }

    fn sort(&mut self, out: SlotId, a: SlotId) -> Result<()> {
        let n = self.len(a)?;
        let mut cur = self.scratch();
        self.gather(cur, &[a], &(0..n).map(|i| Pick::Slot { source: 0, index: i }).collect::<Vec<_>>())?;
        for layer in merge_exchange_layers(n) {
            let next = self.exchange_layer(cur, n, &layer)?;
            self.free(&[cur]);
            cur = next;
        }
        let identity: Vec<Pick> = (0..n).map(|i| Pick::Slot { source: 0, index: i }).collect();
        self.gather(out, &[cur], &identity)?;
        self.free(&[cur]);
        Ok(())
    }

    fn join_count(&mut self, _out: SlotId, _a: SlotId, _b: SlotId) -> Result<()> {
        Err(Error::Unsupported {
            backend: "mpc".into(),
            capability: "join",
        })
    }

    fn peek(&mut self, _slot: SlotId, site: &str) -> Result<Plain, TaintViolation> {
        Err(TaintViolation {
            operation: "peek".into(),
            site: site.into(),
        })
    }

    fn round_stats(&mut self) -> Option<RoundStats> {
        self.collect().ok()?;
        Some(self.stats.clone())
    }

    fn transcripts(&mut self) -> Option<Vec<Transcript>> {
        MpcBackend::transcripts(self).ok()
    }

    fn set_stage(&mut self, stage: Stage) {
        if self.stage != stage {
            self.stage = stage;
            let op = self.op;
            let _ = self.broadcast(|_| Instr::Stage(stage, op));
            let _ = self.to_dealer(DealerReq::Stage(stage, op));
        }
    }
}

impl Drop for MpcBackend {
    fn drop(&mut self) {
        let _ = self.broadcast(|_| Instr::Shutdown);
        let _ = self.to_dealer(DealerReq::Shutdown);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}
