//! Party and dealer actors. Each runs on its own thread and talks to the
//! others only through channels; every protocol step has a fixed message
//! schedule, so a party blocks only on messages that are guaranteed to come.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::thread;

use crossbeam_channel::{Receiver, Sender};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::share::{split, PARTIES};
use super::{Endpoint, LatencyModel, Transcript, TranscriptEntry};
use crate::backend::{Pick, SlotId};
use crate::trace::Stage;
use crate::value::Public;

pub(crate) type Traffic = BTreeMap<(Stage, String), (u64, u64)>;

#[derive(Debug)]
pub(crate) enum Instr {
    Stage(Stage, &'static str),
    Input { out: SlotId, component: Vec<u64> },
    Add { out: SlotId, a: SlotId, b: SlotId },
    Sub { out: SlotId, a: SlotId, b: SlotId },
    AddPublic { out: SlotId, a: SlotId, c: u64 },
    MulPublic { out: SlotId, a: SlotId, c: u64 },
    Sum { out: SlotId, a: SlotId },
    Gather { out: SlotId, sources: Vec<SlotId>, picks: Arc<Vec<Pick>> },
    EMul { out: SlotId, a: SlotId, b: SlotId },
    MatMul { out: SlotId, a: SlotId, b: SlotId, m: usize, k: usize, n: usize },
    Eq { out: SlotId, a: SlotId, b: SlotId },
    GtZero { out: SlotId, a: SlotId },
    Reveal { slot: SlotId },
    Free(Vec<SlotId>),
    Report,
    Shutdown,
}

#[derive(Debug)]
pub(crate) enum Reply {
    Component(Vec<u64>),
    Report { traffic: Traffic, transcript: Transcript },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum GateKind {
    Eq,
    GtZero,
}

#[derive(Debug)]
pub(crate) enum DealerReq {
    Stage(Stage, &'static str),
    Triples { n: usize },
    MatTriple { m: usize, k: usize, n: usize },
    Gate { kind: GateKind, n: usize },
    Report,
    Shutdown,
}

#[derive(Debug)]
pub(crate) enum DealerMsg {
    Triple { a: Vec<u64>, b: Vec<u64>, c: Vec<u64> },
    Pad(Vec<u64>),
    Bits(Vec<u64>),
}

impl DealerMsg {
    fn kind(&self) -> &'static str {
        match self {
            DealerMsg::Triple { .. } => "triple",
            DealerMsg::Pad(_) => "pad",
            DealerMsg::Bits(_) => "bits",
        }
    }

    fn values(&self) -> Vec<u64> {
        match self {
            DealerMsg::Triple { a, b, c } => a.iter().chain(b).chain(c).copied().collect(),
            DealerMsg::Pad(v) | DealerMsg::Bits(v) => v.clone(),
        }
    }

    fn len(&self) -> usize {
        match self {
            DealerMsg::Triple { a, b, c } => a.len() + b.len() + c.len(),
            DealerMsg::Pad(v) | DealerMsg::Bits(v) => v.len(),
        }
    }
}

fn matmul(x: &[u64], y: &[u64], m: usize, k: usize, n: usize) -> Vec<u64> {
    let mut z = vec![0u64; m * n];
    for i in 0..m {
        for l in 0..k {
            let xv = x[i * k + l];
            if xv == 0 {
                continue;
            }
            for j in 0..n {
                z[i * n + j] = z[i * n + j].wrapping_add(xv.wrapping_mul(y[l * n + j]));
            }
        }
    }
    z
}

fn zip(x: &[u64], y: &[u64], f: impl Fn(u64, u64) -> u64) -> Vec<u64> {
    x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect()
}

pub(crate) struct PartyChannels {
    pub ctrl: Receiver<Instr>,
    pub peer_in: Vec<Option<Receiver<Vec<u64>>>>,
    pub peer_out: Vec<Option<Sender<Vec<u64>>>>,
    pub from_dealer: Receiver<DealerMsg>,
    pub to_dealer: Sender<Vec<u64>>,
    pub reply: Sender<Reply>,
}

struct PartyNode {
    id: usize,
    ch: PartyChannels,
    store: HashMap<SlotId, Vec<u64>>,
    stage: Stage,
    op: &'static str,
    traffic: Traffic,
    record: bool,
    transcript: Transcript,
    latency: LatencyModel,
    jitter: ChaCha8Rng,
}

impl PartyNode {
    fn get(&self, slot: SlotId) -> &[u64] {
        self.store
            .get(&slot)
            .map(Vec::as_slice)
            .unwrap_or_else(|| panic!("party {}: unknown slot {slot}", self.id))
    }

    fn count(&mut self, values: usize) {
        let e = self
            .traffic
            .entry((self.stage, self.op.to_string()))
            .or_default();
        e.0 += 1;
        e.1 += 8 * values as u64;
    }

    fn delay(&mut self) {
        if !self.latency.is_zero() {
            thread::sleep(self.latency.sample(&mut self.jitter));
        }
    }

    fn note(&mut self, from: Endpoint, kind: &str, values: &[u64]) {
        if self.record {
            self.transcript.push(TranscriptEntry {
                from,
                kind: kind.to_string(),
                values: values.to_vec(),
            });
        }
    }

    /// Sends `values` to both peers and returns the sum of all three
    /// parties' contributions.
    fn open(&mut self, values: Vec<u64>) -> Vec<u64> {
        for j in 0..PARTIES {
            if j == self.id {
                continue;
            }
            self.delay();
            self.count(values.len());
            let tx = self.ch.peer_out[j].as_ref().expect("peer channel");
            tx.send(values.clone()).expect("peer hung up");
        }
        let mut total = values;
        for j in 0..PARTIES {
            if j == self.id {
                continue;
            }
            let rx = self.ch.peer_in[j].as_ref().expect("peer channel");
            let got = rx.recv().expect("peer hung up");
            self.note(Endpoint::Party(j), "open", &got);
            for (t, g) in total.iter_mut().zip(&got) {
                *t = t.wrapping_add(*g);
            }
        }
        total
    }

    fn recv_dealer(&mut self) -> DealerMsg {
        let msg = self.ch.from_dealer.recv().expect("dealer hung up");
        if self.record {
            let (kind, values) = (msg.kind(), msg.values());
            self.note(Endpoint::Dealer, kind, &values);
        }
        msg
    }

    fn gate(&mut self, input: Vec<u64>) -> Vec<u64> {
        let pad = match self.recv_dealer() {
            DealerMsg::Pad(p) => p,
            other => panic!("party {}: expected pad, got {:?}", self.id, other.kind()),
        };
        let masked = zip(&input, &pad, u64::wrapping_add);
        self.delay();
        self.count(masked.len());
        self.ch.to_dealer.send(masked).expect("dealer hung up");
        match self.recv_dealer() {
            DealerMsg::Bits(b) => b,
            other => panic!("party {}: expected bits, got {:?}", self.id, other.kind()),
        }
    }

    fn triple(&mut self) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
        match self.recv_dealer() {
            DealerMsg::Triple { a, b, c } => (a, b, c),
            other => panic!("party {}: expected triple, got {:?}", self.id, other.kind()),
        }
    }

    fn public(&self, c: Public) -> u64 {
        match c {
            Public::Int(v) => {
                if self.id == 0 {
                    v as u64
                } else {
                    0
                }
            }
            Public::Real(v) => panic!("real constant {v} reached an integer party"),
        }
    }

    fn run(mut self) {
        while let Ok(instr) = self.ch.ctrl.recv() {
            match instr {
                Instr::Stage(stage, op) => {
                    self.stage = stage;
                    self.op = op;
                }
                Instr::Input { out, component } => {
                    self.note(Endpoint::Owner, "input", &component);
                    self.store.insert(out, component);
                }
                Instr::Add { out, a, b } => {
                    let v = zip(self.get(a), self.get(b), u64::wrapping_add);
                    self.store.insert(out, v);
                }
                Instr::Sub { out, a, b } => {
                    let v = zip(self.get(a), self.get(b), u64::wrapping_sub);
                    self.store.insert(out, v);
                }
                Instr::AddPublic { out, a, c } => {
                    let add = if self.id == 0 { c } else { 0 };
                    let v = self.get(a).iter().map(|x| x.wrapping_add(add)).collect();
                    self.store.insert(out, v);
                }
                Instr::MulPublic { out, a, c } => {
                    let v = self.get(a).iter().map(|x| x.wrapping_mul(c)).collect();
                    self.store.insert(out, v);
                }
                Instr::Sum { out, a } => {
                    let s = self.get(a).iter().fold(0u64, |s, &x| s.wrapping_add(x));
                    self.store.insert(out, vec![s]);
                }
                Instr::Gather { out, sources, picks } => {
                    let v = picks
                        .iter()
                        .map(|p| match *p {
                            Pick::Slot { source, index } => self.get(sources[source])[index],
                            Pick::Fill(c) => self.public(c),
                        })
                        .collect();
                    self.store.insert(out, v);
                }
                Instr::EMul { out, a, b } => {
                    let (ta, tb, tc) = self.triple();
                    let d_i = zip(self.get(a), &ta, u64::wrapping_sub);
                    let e_i = zip(self.get(b), &tb, u64::wrapping_sub);
                    let n = d_i.len();
                    let mut payload = d_i;
                    payload.extend(e_i);
                    let opened = self.open(payload);
                    let (d, e) = opened.split_at(n);
                    let z = (0..n)
                        .map(|i| {
                            let mut v = tc[i]
                                .wrapping_add(d[i].wrapping_mul(tb[i]))
                                .wrapping_add(e[i].wrapping_mul(ta[i]));
                            if self.id == 0 {
                                v = v.wrapping_add(d[i].wrapping_mul(e[i]));
                            }
                            v
                        })
                        .collect();
                    self.store.insert(out, z);
                }
                Instr::MatMul { out, a, b, m, k, n } => {
                    let (ta, tb, tc) = self.triple();
                    let d_i = zip(self.get(a), &ta, u64::wrapping_sub);
                    let e_i = zip(self.get(b), &tb, u64::wrapping_sub);
                    let split_at = d_i.len();
                    let mut payload = d_i;
                    payload.extend(e_i);
                    let opened = self.open(payload);
                    let (d, e) = opened.split_at(split_at);
                    let db = matmul(d, &tb, m, k, n);
                    let ae = matmul(&ta, e, m, k, n);
                    let mut z: Vec<u64> = (0..m * n)
                        .map(|i| tc[i].wrapping_add(db[i]).wrapping_add(ae[i]))
                        .collect();
                    if self.id == 0 {
                        let de = matmul(d, e, m, k, n);
                        for (zi, x) in z.iter_mut().zip(de) {
                            *zi = zi.wrapping_add(x);
                        }
                    }
                    self.store.insert(out, z);
                }
                Instr::Eq { out, a, b } => {
                    let diff = zip(self.get(a), self.get(b), u64::wrapping_sub);
                    let bits = self.gate(diff);
                    self.store.insert(out, bits);
                }
                Instr::GtZero { out, a } => {
                    let x = self.get(a).to_vec();
                    let bits = self.gate(x);
                    self.store.insert(out, bits);
                }
                Instr::Reveal { slot } => {
                    let v = self.get(slot).to_vec();
                    self.delay();
                    self.count(v.len());
                    self.ch.reply.send(Reply::Component(v)).expect("driver hung up");
                }
                Instr::Free(slots) => {
                    for s in slots {
                        self.store.remove(&s);
                    }
                }
                Instr::Report => {
                    let report = Reply::Report {
                        traffic: std::mem::take(&mut self.traffic),
                        transcript: std::mem::take(&mut self.transcript),
                    };
                    self.ch.reply.send(report).expect("driver hung up");
                }
                Instr::Shutdown => break,
            }
        }
    }
}

pub(crate) struct DealerChannels {
    pub ctrl: Receiver<DealerReq>,
    pub to_party: Vec<Sender<DealerMsg>>,
    pub from_party: Vec<Receiver<Vec<u64>>>,
    pub reply: Sender<Reply>,
}

struct DealerNode {
    ch: DealerChannels,
    rng: ChaCha8Rng,
    stage: Stage,
    op: &'static str,
    traffic: Traffic,
    latency: LatencyModel,
    jitter: ChaCha8Rng,
}

impl DealerNode {
    fn send(&mut self, party: usize, msg: DealerMsg) {
        if !self.latency.is_zero() {
            thread::sleep(self.latency.sample(&mut self.jitter));
        }
        let e = self
            .traffic
            .entry((self.stage, self.op.to_string()))
            .or_default();
        e.0 += 1;
        e.1 += 8 * msg.len() as u64;
        self.ch.to_party[party].send(msg).expect("party hung up");
    }

    fn shares_of(&mut self, values: &[u64]) -> [Vec<u64>; PARTIES] {
        let mut out: [Vec<u64>; PARTIES] = Default::default();
        for &v in values {
            let parts = split(v, &mut self.rng);
            for i in 0..PARTIES {
                out[i].push(parts[i]);
            }
        }
        out
    }

    fn deal_triple(&mut self, a: Vec<u64>, b: Vec<u64>, c: Vec<u64>) {
        let [a0, a1, a2] = self.shares_of(&a);
        let [b0, b1, b2] = self.shares_of(&b);
        let [c0, c1, c2] = self.shares_of(&c);
        self.send(0, DealerMsg::Triple { a: a0, b: b0, c: c0 });
        self.send(1, DealerMsg::Triple { a: a1, b: b1, c: c1 });
        self.send(2, DealerMsg::Triple { a: a2, b: b2, c: c2 });
    }

    fn run(mut self) {
        while let Ok(req) = self.ch.ctrl.recv() {
            match req {
                DealerReq::Stage(stage, op) => {
                    self.stage = stage;
                    self.op = op;
                }
                DealerReq::Triples { n } => {
                    let a: Vec<u64> = (0..n).map(|_| self.rng.gen()).collect();
                    let b: Vec<u64> = (0..n).map(|_| self.rng.gen()).collect();
                    let c = zip(&a, &b, u64::wrapping_mul);
                    self.deal_triple(a, b, c);
                }
                DealerReq::MatTriple { m, k, n } => {
                    let a: Vec<u64> = (0..m * k).map(|_| self.rng.gen()).collect();
                    let b: Vec<u64> = (0..k * n).map(|_| self.rng.gen()).collect();
                    let c = matmul(&a, &b, m, k, n);
                    self.deal_triple(a, b, c);
                }
                DealerReq::Gate { kind, n } => {
                    let pad: Vec<u64> = (0..n).map(|_| self.rng.gen()).collect();
                    let shares = self.shares_of(&pad);
                    for (i, s) in shares.into_iter().enumerate() {
                        self.send(i, DealerMsg::Pad(s));
                    }
                    let mut opened = vec![0u64; n];
                    for i in 0..PARTIES {
                        let masked = self.ch.from_party[i].recv().expect("party hung up");
                        for (o, m) in opened.iter_mut().zip(masked) {
                            *o = o.wrapping_add(m);
                        }
                    }
                    let bits: Vec<u64> = opened
                        .iter()
                        .zip(&pad)
                        .map(|(&o, &p)| {
                            let x = o.wrapping_sub(p);
                            match kind {
                                GateKind::Eq => (x == 0) as u64,
                                GateKind::GtZero => ((x as i64) > 0) as u64,
                            }
                        })
                        .collect();
                    let shares = self.shares_of(&bits);
                    for (i, s) in shares.into_iter().enumerate() {
                        self.send(i, DealerMsg::Bits(s));
                    }
                }
                DealerReq::Report => {
                    let report = Reply::Report {
                        traffic: std::mem::take(&mut self.traffic),
                        transcript: Vec::new(),
                    };
                    self.ch.reply.send(report).expect("driver hung up");
                }
                DealerReq::Shutdown => break,
            }
        }
    }
}

pub(crate) fn spawn_party(
    id: usize,
    ch: PartyChannels,
    seed: u64,
    latency: LatencyModel,
    record: bool,
) -> thread::JoinHandle<()> {
    let node = PartyNode {
        id,
        ch,
        store: HashMap::new(),
        stage: Stage::Adhoc,
        op: "setup",
        traffic: Traffic::new(),
        record,
        transcript: Transcript::new(),
        latency,
        jitter: ChaCha8Rng::seed_from_u64(seed ^ (0x7061_7274 + id as u64)),
    };
    thread::Builder::new()
        .name(format!("party-{id}"))
        .spawn(move || node.run())
        .expect("spawn party thread")
}

pub(crate) fn spawn_dealer(ch: DealerChannels, seed: u64, latency: LatencyModel) -> thread::JoinHandle<()> {
    let node = DealerNode {
        ch,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6465_616c_6572),
        stage: Stage::Adhoc,
        op: "setup",
        traffic: Traffic::new(),
        latency,
        jitter: ChaCha8Rng::seed_from_u64(seed ^ 0x6a69_7474),
    };
    thread::Builder::new()
        .name("dealer".into())
        .spawn(move || node.run())
        .expect("spawn dealer thread")
}
