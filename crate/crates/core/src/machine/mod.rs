//! The data-oblivious abstract machine.
//!
//! A [`Machine`] owns one backend context. Private values are opaque handles
//! whose shape is public and whose contents are reachable only through
//! [`Machine::dec`] with a [`DecryptionAuthority`]. Every primitive is traced
//! with its public dimensions and counted in the context's ledger, so
//! obliviousness can be checked by diffing traces of twin executions.

mod manip;
mod ternary;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendKind, Capabilities, Pick, Profile, SlotId};
use crate::error::{Error, Result, TaintViolation};
use crate::mpc::{RoundStats, Transcript};
use crate::trace::{OpCostLedger, Prim, Stage, Trace, TraceEvent};
use crate::value::{NumericDomain, Plain, Public, APPROX_EXACT_LIMIT};

/// Default offset in the arithmetic equality workaround.
pub const DEFAULT_XI: f64 = 1e-3;
/// Round-trip tolerance for approximate backends.
pub const TAU_NUM: f64 = 1e-6;

static NEXT_CONTEXT: AtomicU64 = AtomicU64::new(1);

/// Party roles in the linkage protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyRole {
    /// First data owner.
    P1,
    /// Second data owner.
    P2,
    /// Computation host.
    P3,
}

impl fmt::Display for PartyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PartyRole::P1 => "P1",
            PartyRole::P2 => "P2",
            PartyRole::P3 => "P3",
        };
        f.write_str(s)
    }
}

/// What a decryption authority may be used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuthorityScope {
    /// Joint output decryption by the data owners.
    Joint,
    /// The host's one-off view of the obfuscated candidate matrix.
    ObfuscatedPairs,
    /// The host's view of masked products in the reciprocal protocol.
    MaskedHelper,
}

/// Token naming which party may decrypt, and for what.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecryptionAuthority {
    ctx: u64,
    token: u64,
    role: PartyRole,
    scope: AuthorityScope,
}

impl DecryptionAuthority {
    /// Authority not bound to a machine context, used by the share-level
    /// protocol API. Only data owners may hold one.
    pub fn detached(role: PartyRole) -> Result<Self> {
        if role == PartyRole::P3 {
            return Err(Error::Authority(
                "the host never holds a joint decryption authority".into(),
            ));
        }
        Ok(DecryptionAuthority {
            ctx: 0,
            token: 0,
            role,
            scope: AuthorityScope::Joint,
        })
    }

    pub fn role(&self) -> PartyRole {
        self.role
    }

    pub fn scope(&self) -> AuthorityScope {
        self.scope
    }
}

/// Something the host observed in clear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    DatasetSize {
        party: PartyRole,
        records: usize,
    },
    RecordSize {
        party: PartyRole,
        index: usize,
        containers: usize,
    },
    BlockKey {
        party: PartyRole,
        key: String,
    },
    BlockSize {
        party: PartyRole,
        key: String,
        ids: usize,
    },
    Decrypted {
        scope: AuthorityScope,
        dims: Vec<usize>,
        values: Plain,
    },
}

/// Public shape of a private value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            Shape::Scalar => vec![1],
            Shape::Vector(n) => vec![n],
            Shape::Matrix(r, c) => vec![r, c],
        }
    }
}

struct SlotGuard {
    ctx: u64,
    id: SlotId,
    domain: NumericDomain,
    free: Sender<SlotId>,
}

impl Drop for SlotGuard {
    fn drop(&mut self) {
        let _ = self.free.send(self.id);
    }
}

/// Reference-counted backend slot. The slot is released when the last
/// handle referring to it is dropped.
#[derive(Clone)]
pub struct Handle(Arc<SlotGuard>);

impl Handle {
    pub fn context(&self) -> u64 {
        self.0.ctx
    }

    pub fn domain(&self) -> NumericDomain {
        self.0.domain
    }

    fn slot(&self) -> SlotId {
        self.0.id
    }
}

impl fmt::Debug for Handle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Handle(ctx={}, slot={})", self.0.ctx, self.0.id)
    }
}

mod sealed {
    pub trait Sealed {}
}

/// Common surface of the three private value types.
pub trait PrivateValue: Clone + fmt::Debug + sealed::Sealed {
    fn handle(&self) -> &Handle;
    fn shape(&self) -> Shape;
    #[doc(hidden)]
    fn from_parts(handle: Handle, shape: Shape) -> Self;
}

#[derive(Clone, Debug)]
pub struct PrivateScalar {
    handle: Handle,
}

/// A private scalar holding 0 or 1.
pub type PrivateBool = PrivateScalar;

#[derive(Clone, Debug)]
pub struct PrivateVector {
    handle: Handle,
    len: usize,
}

impl PrivateVector {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Clone, Debug)]
pub struct PrivateMatrix {
    handle: Handle,
    rows: usize,
    cols: usize,
}

impl PrivateMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

impl sealed::Sealed for PrivateScalar {}
impl sealed::Sealed for PrivateVector {}
impl sealed::Sealed for PrivateMatrix {}

impl PrivateValue for PrivateScalar {
    fn handle(&self) -> &Handle {
        &self.handle
    }
    fn shape(&self) -> Shape {
        Shape::Scalar
    }
    fn from_parts(handle: Handle, _shape: Shape) -> Self {
        PrivateScalar { handle }
    }
}

impl PrivateValue for PrivateVector {
    fn handle(&self) -> &Handle {
        &self.handle
    }
    fn shape(&self) -> Shape {
        Shape::Vector(self.len)
    }
    fn from_parts(handle: Handle, shape: Shape) -> Self {
        PrivateVector {
            handle,
            len: shape.len(),
        }
    }
}

impl PrivateValue for PrivateMatrix {
    fn handle(&self) -> &Handle {
        &self.handle
    }
    fn shape(&self) -> Shape {
        Shape::Matrix(self.rows, self.cols)
    }
    fn from_parts(handle: Handle, shape: Shape) -> Self {
        match shape {
            Shape::Matrix(rows, cols) => PrivateMatrix { handle, rows, cols },
            other => PrivateMatrix {
                handle,
                rows: 1,
                cols: other.len(),
            },
        }
    }
}

/// Behavior of [`Machine::lshift`]/[`Machine::rshift`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftMode {
    Cyclic,
    /// Vacated slots take a public constant.
    Fill(Public),
}

/// One backend context plus its trace, ledger and authority registry.
///
/// A machine is confined to one thread at a time; move it between threads
/// as a whole, or [`fork`](Machine::fork) it for parallel work.
pub struct Machine {
    ctx: u64,
    parent_ctx: Option<u64>,
    backend: Box<dyn Backend>,
    next_slot: SlotId,
    free_tx: Sender<SlotId>,
    free_rx: Receiver<SlotId>,
    trace: Trace,
    tracing: bool,
    ledger: OpCostLedger,
    stage: Stage,
    xi: f64,
    shift_mode: ShiftMode,
    owner_rng: Option<ChaCha8Rng>,
    authorities: HashMap<u64, (PartyRole, AuthorityScope)>,
    next_token: u64,
    host_view: Vec<Observation>,
}

impl fmt::Debug for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Machine")
            .field("ctx", &self.ctx)
            .field("backend", &self.backend.kind())
            .field("profile", &self.backend.profile())
            .field("stage", &self.stage)
            .finish()
    }
}

impl Machine {
    /// Wraps a backend. `seed` drives the data owners' randomness used by
    /// the masked reciprocal protocol.
    pub fn new(backend: Box<dyn Backend>, seed: u64) -> Self {
        let (free_tx, free_rx) = unbounded();
        Machine {
            ctx: NEXT_CONTEXT.fetch_add(1, Ordering::Relaxed),
            parent_ctx: None,
            backend,
            next_slot: 1,
            free_tx,
            free_rx,
            trace: Trace::default(),
            tracing: true,
            ledger: OpCostLedger::default(),
            stage: Stage::Adhoc,
            xi: DEFAULT_XI,
            shift_mode: ShiftMode::Cyclic,
            owner_rng: Some(ChaCha8Rng::seed_from_u64(seed ^ 0x6f77_6e65_7273)),
            authorities: HashMap::new(),
            next_token: 1,
            host_view: Vec::new(),
        }
    }

    pub fn clear() -> Self {
        Self::new(Box::new(crate::backend::PlainBackend::clear()), 0)
    }

    pub fn oblivious(profile: Profile) -> Self {
        Self::new(Box::new(crate::backend::PlainBackend::oblivious(profile)), 0)
    }

    pub fn context_id(&self) -> u64 {
        self.ctx
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn profile(&self) -> Profile {
        self.backend.profile()
    }

    pub fn domain(&self) -> NumericDomain {
        self.backend.domain()
    }

    pub fn capabilities(&self) -> Capabilities {
        self.backend.capabilities()
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn set_xi(&mut self, xi: f64) -> Result<()> {
        if !(xi > 0.0 && xi < 0.5) {
            return Err(Error::invalid(format!("xi must lie in (0, 0.5), got {xi}")));
        }
        self.xi = xi;
        Ok(())
    }

    /// Tolerance within which decrypted booleans must sit.
    pub fn tau_bool(&self) -> f64 {
        if self.domain().is_exact() {
            0.0
        } else {
            2.0 * self.xi
        }
    }

    pub fn tau_num(&self) -> f64 {
        if self.domain().is_exact() {
            0.0
        } else {
            TAU_NUM
        }
    }

    pub fn set_shift_mode(&mut self, mode: ShiftMode) {
        self.shift_mode = mode;
    }

    /// Removes the data owners' randomness source.
    pub fn without_owner_randomness(mut self) -> Self {
        self.owner_rng = None;
        self
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn set_stage(&mut self, stage: Stage) {
        self.stage = stage;
        self.backend.set_stage(stage);
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Disables trace recording; the ledger keeps counting.
    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn take_trace(&mut self) -> Trace {
        std::mem::take(&mut self.trace)
    }

    pub fn ledger(&self) -> &OpCostLedger {
        &self.ledger
    }

    pub fn reset_ledger(&mut self) {
        self.ledger = OpCostLedger::default();
        self.trace.clear();
    }

    pub fn merge_ledger(&mut self, other: &OpCostLedger) {
        self.ledger.merge(other);
    }

    pub fn round_stats(&mut self) -> Option<RoundStats> {
        self.backend.round_stats()
    }

    /// Per-party received messages, when the backend records them.
    pub fn transcripts(&mut self) -> Option<Vec<Transcript>> {
        self.backend.transcripts()
    }

    /// Everything the host has seen in clear so far.
    pub fn host_view(&self) -> &[Observation] {
        &self.host_view
    }

    /// Records public metadata delivered to the host.
    pub fn observe(&mut self, obs: Observation) {
        self.host_view.push(obs);
    }

    // -- authorities -----------------------------------------------------

    /// Issues a decryption authority. The host can never obtain a joint
    /// output authority.
    pub fn grant(&mut self, role: PartyRole, scope: AuthorityScope) -> Result<DecryptionAuthority> {
        let allowed = match scope {
            AuthorityScope::Joint => role != PartyRole::P3,
            AuthorityScope::ObfuscatedPairs | AuthorityScope::MaskedHelper => {
                role == PartyRole::P3
            }
        };
        if !allowed {
            return Err(Error::Authority(format!(
                "{role} cannot hold a {scope:?} authority"
            )));
        }
        let token = self.next_token;
        self.next_token += 1;
        self.authorities.insert(token, (role, scope));
        Ok(DecryptionAuthority {
            ctx: self.ctx,
            token,
            role,
            scope,
        })
    }

    pub fn revoke(&mut self, authority: &DecryptionAuthority) {
        if authority.ctx == self.ctx {
            self.authorities.remove(&authority.token);
        }
    }

    fn check_authority(&self, authority: &DecryptionAuthority) -> Result<()> {
        let ours = authority.ctx == self.ctx || Some(authority.ctx) == self.parent_ctx;
        match self.authorities.get(&authority.token) {
            Some(&(role, scope)) if ours && role == authority.role && scope == authority.scope => {
                Ok(())
            }
            _ => Err(Error::Authority(format!(
                "authority {} ({}, {:?}) is not valid in context {}",
                authority.token, authority.role, authority.scope, self.ctx
            ))),
        }
    }

    // -- bookkeeping -----------------------------------------------------

    fn drain_frees(&mut self) {
        let freed: Vec<SlotId> = self.free_rx.try_iter().collect();
        if !freed.is_empty() {
            self.backend.free(&freed);
        }
    }

    fn fresh(&mut self) -> (SlotId, Handle) {
        let id = self.next_slot;
        self.next_slot += 1;
        let handle = Handle(Arc::new(SlotGuard {
            ctx: self.ctx,
            id,
            domain: self.backend.domain(),
            free: self.free_tx.clone(),
        }));
        (id, handle)
    }

    fn record(&mut self, prim: Prim, dims: Vec<usize>) {
        self.ledger.record(self.stage, prim);
        if self.tracing {
            self.trace.push(TraceEvent { prim, dims });
        }
    }

    fn own(&self, h: &Handle) -> Result<SlotId> {
        if h.context() == self.ctx || Some(h.context()) == self.parent_ctx {
            Ok(h.slot())
        } else {
            Err(Error::ContextMismatch {
                expected: self.ctx,
                found: h.context(),
            })
        }
    }

    fn require(&self, flag: bool, capability: &'static str) -> Result<()> {
        if flag {
            Ok(())
        } else {
            Err(Error::Unsupported {
                backend: format!("{}/{}", self.kind(), self.profile()),
                capability,
            })
        }
    }

    fn same_shape<T: PrivateValue>(op: &'static str, a: &T, b: &T) -> Result<()> {
        if a.shape() == b.shape() {
            Ok(())
        } else {
            Err(Error::shape(op, a.shape(), b.shape()))
        }
    }

    fn lift(&self, values: &[i64]) -> Result<Plain> {
        if !self.domain().is_exact() {
            if let Some(v) = values.iter().find(|v| v.unsigned_abs() > APPROX_EXACT_LIMIT as u64) {
                return Err(Error::Domain(format!(
                    "{v} exceeds the approximate domain's exact integer range"
                )));
            }
        }
        Ok(Plain::Int(values.to_vec()))
    }

    // -- Enc / Dec -------------------------------------------------------

    fn input_raw(&mut self, shape: Shape, values: Plain) -> Result<Handle> {
        if values.len() != shape.len() {
            return Err(Error::shape("enc", shape, values.len()));
        }
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.input(out, values)?;
        self.record(Prim::Enc, shape.dims());
        Ok(h)
    }

    pub fn enc_scalar(&mut self, value: i64) -> Result<PrivateScalar> {
        let v = self.lift(&[value])?;
        let handle = self.input_raw(Shape::Scalar, v)?;
        Ok(PrivateScalar { handle })
    }

    pub fn enc_real(&mut self, value: f64) -> Result<PrivateScalar> {
        self.require(!self.domain().is_exact(), "real-valued inputs")?;
        let handle = self.input_raw(Shape::Scalar, Plain::Real(vec![value]))?;
        Ok(PrivateScalar { handle })
    }

    pub fn enc_vec(&mut self, values: &[i64]) -> Result<PrivateVector> {
        let v = self.lift(values)?;
        let handle = self.input_raw(Shape::Vector(values.len()), v)?;
        Ok(PrivateVector {
            handle,
            len: values.len(),
        })
    }

    pub fn enc_real_vec(&mut self, values: &[f64]) -> Result<PrivateVector> {
        self.require(!self.domain().is_exact(), "real-valued inputs")?;
        let handle = self.input_raw(Shape::Vector(values.len()), Plain::Real(values.to_vec()))?;
        Ok(PrivateVector {
            handle,
            len: values.len(),
        })
    }

    /// Row-major matrix input.
    pub fn enc_matrix(&mut self, rows: usize, cols: usize, values: &[i64]) -> Result<PrivateMatrix> {
        let v = self.lift(values)?;
        let handle = self.input_raw(Shape::Matrix(rows, cols), v)?;
        Ok(PrivateMatrix { handle, rows, cols })
    }

    pub fn enc_bool_matrix(&mut self, rows: usize, cols: usize, bits: &[bool]) -> Result<PrivateMatrix> {
        let v: Vec<i64> = bits.iter().map(|&b| b as i64).collect();
        self.enc_matrix(rows, cols, &v)
    }

    pub fn dec<T: PrivateValue>(&mut self, value: &T, authority: &DecryptionAuthority) -> Result<Plain> {
        self.check_authority(authority)?;
        let slot = self.own(value.handle())?;
        self.drain_frees();
        let plain = self.backend.reveal(slot)?;
        self.record(Prim::Dec, value.shape().dims());
        if authority.role == PartyRole::P3 {
            self.host_view.push(Observation::Decrypted {
                scope: authority.scope,
                dims: value.shape().dims(),
                values: plain.clone(),
            });
        }
        Ok(plain)
    }

    /// Decrypts and rounds to integers within `tau_num` (approximate) or
    /// exactly (exact backends).
    pub fn dec_ints<T: PrivateValue>(
        &mut self,
        value: &T,
        authority: &DecryptionAuthority,
        tolerance: f64,
    ) -> Result<Vec<i64>> {
        self.dec(value, authority)?.to_ints(tolerance)
    }

    pub fn dec_bits<T: PrivateValue>(
        &mut self,
        value: &T,
        authority: &DecryptionAuthority,
        tolerance: f64,
    ) -> Result<Vec<bool>> {
        self.dec(value, authority)?.to_bits(tolerance)
    }

    /// Host-level inspection of a private boolean, i.e. what branching on it
    /// would require. Refused by every backend except the cleartext oracle.
    pub fn branch_on(&mut self, cond: &PrivateBool, site: &str) -> Result<bool> {
        let slot = self.own(cond.handle())?;
        let plain = self.backend.peek(slot, site)?;
        Ok(plain.scalar_f64() > 0.5)
    }

    /// Host-level read used by debug-only precondition checks.
    pub fn peek<T: PrivateValue>(&mut self, value: &T, site: &str) -> Result<Plain, TaintViolation> {
        let slot = self.own(value.handle()).map_err(|e| TaintViolation {
            operation: e.to_string(),
            site: site.to_string(),
        })?;
        self.backend.peek(slot, site)
    }

    // -- primitive arithmetic -------------------------------------------

    fn binary<T: PrivateValue>(
        &mut self,
        prim: Prim,
        a: &T,
        b: &T,
        f: impl FnOnce(&mut dyn Backend, SlotId, SlotId, SlotId) -> Result<()>,
    ) -> Result<T> {
        Self::same_shape(prim.name(), a, b)?;
        let (sa, sb) = (self.own(a.handle())?, self.own(b.handle())?);
        self.drain_frees();
        let (out, h) = self.fresh();
        f(self.backend.as_mut(), out, sa, sb)?;
        self.record(prim, a.shape().dims());
        Ok(T::from_parts(h, a.shape()))
    }

    fn unary<T: PrivateValue>(
        &mut self,
        prim: Prim,
        a: &T,
        f: impl FnOnce(&mut dyn Backend, SlotId, SlotId) -> Result<()>,
    ) -> Result<T> {
        let sa = self.own(a.handle())?;
        self.drain_frees();
        let (out, h) = self.fresh();
        f(self.backend.as_mut(), out, sa)?;
        self.record(prim, a.shape().dims());
        Ok(T::from_parts(h, a.shape()))
    }

    pub fn add<T: PrivateValue>(&mut self, a: &T, b: &T) -> Result<T> {
        self.binary(Prim::Add, a, b, |be, o, x, y| be.add(o, x, y))
    }

    pub fn sub<T: PrivateValue>(&mut self, a: &T, b: &T) -> Result<T> {
        self.binary(Prim::Sub, a, b, |be, o, x, y| be.sub(o, x, y))
    }

    pub fn eadd<T: PrivateValue>(&mut self, a: &T, b: &T) -> Result<T> {
        self.binary(Prim::EAdd, a, b, |be, o, x, y| be.add(o, x, y))
    }

    pub fn esub<T: PrivateValue>(&mut self, a: &T, b: &T) -> Result<T> {
        self.binary(Prim::ESub, a, b, |be, o, x, y| be.sub(o, x, y))
    }

    pub fn emul<T: PrivateValue>(&mut self, a: &T, b: &T) -> Result<T> {
        self.binary(Prim::EMul, a, b, |be, o, x, y| be.emul(o, x, y))
    }

    /// Scalar product.
    pub fn mul(&mut self, a: &PrivateScalar, b: &PrivateScalar) -> Result<PrivateScalar> {
        self.binary(Prim::Mul, a, b, |be, o, x, y| be.emul(o, x, y))
    }

    pub fn add_public<T: PrivateValue>(&mut self, a: &T, c: impl Into<Public>) -> Result<T> {
        let c = c.into();
        self.unary(Prim::AddPublic, a, |be, o, x| be.add_public(o, x, c))
    }

    pub fn mul_public<T: PrivateValue>(&mut self, a: &T, c: impl Into<Public>) -> Result<T> {
        let c = c.into();
        self.unary(Prim::MulPublic, a, |be, o, x| be.mul_public(o, x, c))
    }

    /// Matrix product.
    pub fn matmul(&mut self, a: &PrivateMatrix, b: &PrivateMatrix) -> Result<PrivateMatrix> {
        if a.cols != b.rows {
            return Err(Error::shape("mul", a.shape(), b.shape()));
        }
        let (sa, sb) = (self.own(&a.handle)?, self.own(&b.handle)?);
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.matmul(out, sa, sb, a.rows, a.cols, b.cols)?;
        self.record(Prim::Mul, vec![a.rows, a.cols, b.cols]);
        Ok(PrivateMatrix {
            handle: h,
            rows: a.rows,
            cols: b.cols,
        })
    }

    /// Row vector times matrix.
    pub fn vec_mat(&mut self, v: &PrivateVector, m: &PrivateMatrix) -> Result<PrivateVector> {
        if v.len != m.rows {
            return Err(Error::shape("mul", v.shape(), m.shape()));
        }
        let (sv, sm) = (self.own(&v.handle)?, self.own(&m.handle)?);
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.matmul(out, sv, sm, 1, m.rows, m.cols)?;
        self.record(Prim::Mul, vec![1, m.rows, m.cols]);
        Ok(PrivateVector {
            handle: h,
            len: m.cols,
        })
    }

    /// Outer product `Transpose(col)·row`.
    pub fn outer(&mut self, col: &PrivateVector, row: &PrivateVector) -> Result<PrivateMatrix> {
        let (sc, sr) = (self.own(&col.handle)?, self.own(&row.handle)?);
        self.record(Prim::Transpose, vec![col.len]);
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.matmul(out, sc, sr, col.len, 1, row.len)?;
        self.record(Prim::Mul, vec![col.len, 1, row.len]);
        Ok(PrivateMatrix {
            handle: h,
            rows: col.len,
            cols: row.len,
        })
    }

    /// Inner product of two equal-length vectors (also known as
    /// `InnerProduct`).
    pub fn dot_product(&mut self, a: &PrivateVector, b: &PrivateVector) -> Result<PrivateScalar> {
        Self::same_shape("dot_product", a, b)?;
        let (sa, sb) = (self.own(&a.handle)?, self.own(&b.handle)?);
        self.drain_frees();
        let (prod, _tmp) = self.fresh();
        self.backend.emul(prod, sa, sb)?;
        let (out, h) = self.fresh();
        self.backend.sum(out, prod)?;
        self.record(Prim::DotProduct, vec![a.len]);
        Ok(PrivateScalar { handle: h })
    }

    pub fn sum(&mut self, v: &PrivateVector) -> Result<PrivateScalar> {
        let sv = self.own(&v.handle)?;
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.sum(out, sv)?;
        self.record(Prim::Sum, vec![v.len]);
        Ok(PrivateScalar { handle: h })
    }

    pub fn size<T: PrivateValue>(&mut self, v: &T) -> Shape {
        self.record(Prim::Size, v.shape().dims());
        v.shape()
    }

    fn gather_raw(
        &mut self,
        prim: Prim,
        dims: Vec<usize>,
        sources: &[&Handle],
        picks: &[Pick],
    ) -> Result<Handle> {
        let slots = sources
            .iter()
            .map(|h| self.own(h))
            .collect::<Result<Vec<_>>>()?;
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.gather(out, &slots, picks)?;
        self.record(prim, dims);
        Ok(h)
    }

    fn shift(&mut self, v: &PrivateVector, by: usize, right: bool) -> Result<PrivateVector> {
        let prim = if right { Prim::RShift } else { Prim::LShift };
        let caps = self.capabilities();
        self.require(caps.rotation, "rotation")?;
        let n = v.len;
        let mode = self.shift_mode;
        let picks: Vec<Pick> = (0..n)
            .map(|i| {
                let src = if right {
                    i as i64 - by as i64
                } else {
                    i as i64 + by as i64
                };
                match mode {
                    ShiftMode::Cyclic => Pick::Slot {
                        source: 0,
                        index: src.rem_euclid(n.max(1) as i64) as usize,
                    },
                    ShiftMode::Fill(c) if src < 0 || src >= n as i64 => Pick::Fill(c),
                    ShiftMode::Fill(_) => Pick::Slot {
                        source: 0,
                        index: src as usize,
                    },
                }
            })
            .collect();
        let h = self.gather_raw(prim, vec![n, by], &[&v.handle], &picks)?;
        Ok(PrivateVector { handle: h, len: n })
    }

    /// Slot `i` moves to `i + by`.
    pub fn rshift(&mut self, v: &PrivateVector, by: usize) -> Result<PrivateVector> {
        self.shift(v, by, true)
    }

    /// Slot `i` moves to `i - by`.
    pub fn lshift(&mut self, v: &PrivateVector, by: usize) -> Result<PrivateVector> {
        self.shift(v, by, false)
    }

    pub fn transpose(&mut self, m: &PrivateMatrix) -> Result<PrivateMatrix> {
        let picks: Vec<Pick> = (0..m.cols)
            .flat_map(|j| (0..m.rows).map(move |i| (i, j)))
            .map(|(i, j)| Pick::Slot {
                source: 0,
                index: i * m.cols + j,
            })
            .collect();
        let h = self.gather_raw(Prim::Transpose, vec![m.rows, m.cols], &[&m.handle], &picks)?;
        Ok(PrivateMatrix {
            handle: h,
            rows: m.cols,
            cols: m.rows,
        })
    }

    /// `[a, b, c]` with `times = 2` becomes `[a, a, b, b, c, c]`.
    pub fn repeat_each(&mut self, v: &PrivateVector, times: usize) -> Result<PrivateVector> {
        self.require(self.capabilities().repeat_elements, "repeat_elements")?;
        let picks: Vec<Pick> = (0..v.len)
            .flat_map(|i| std::iter::repeat_n(i, times))
            .map(|index| Pick::Slot { source: 0, index })
            .collect();
        let len = picks.len();
        let h = self.gather_raw(Prim::Repeat, vec![v.len, times, 1], &[&v.handle], &picks)?;
        Ok(PrivateVector { handle: h, len })
    }

    /// `[a, b, c]` with `times = 2` becomes `[a, b, c, a, b, c]`.
    pub fn tile(&mut self, v: &PrivateVector, times: usize) -> Result<PrivateVector> {
        self.require(self.capabilities().repeat_elements, "repeat_elements")?;
        let picks: Vec<Pick> = (0..times)
            .flat_map(|_| 0..v.len)
            .map(|index| Pick::Slot { source: 0, index })
            .collect();
        let len = picks.len();
        let h = self.gather_raw(Prim::Repeat, vec![v.len, times, 0], &[&v.handle], &picks)?;
        Ok(PrivateVector { handle: h, len })
    }

    pub fn concat(&mut self, a: &PrivateVector, b: &PrivateVector) -> Result<PrivateVector> {
        let picks: Vec<Pick> = (0..a.len)
            .map(|index| Pick::Slot { source: 0, index })
            .chain((0..b.len).map(|index| Pick::Slot { source: 1, index }))
            .collect();
        let h = self.gather_raw(Prim::Concat, vec![a.len, b.len], &[&a.handle, &b.handle], &picks)?;
        Ok(PrivateVector {
            handle: h,
            len: a.len + b.len,
        })
    }

    /// Extends `v` to `len` slots with a public constant.
    pub fn pad(&mut self, v: &PrivateVector, len: usize, fill: impl Into<Public>) -> Result<PrivateVector> {
        if len < v.len {
            return Err(Error::shape("pad", v.len, len));
        }
        let fill = fill.into();
        let picks: Vec<Pick> = (0..len)
            .map(|i| {
                if i < v.len {
                    Pick::Slot { source: 0, index: i }
                } else {
                    Pick::Fill(fill)
                }
            })
            .collect();
        let h = self.gather_raw(Prim::Concat, vec![v.len, len - v.len], &[&v.handle], &picks)?;
        Ok(PrivateVector { handle: h, len })
    }

    pub fn slice(&mut self, v: &PrivateVector, start: usize, len: usize) -> Result<PrivateVector> {
        if start + len > v.len {
            return Err(Error::shape("slice", v.len, start + len));
        }
        let picks: Vec<Pick> = (start..start + len)
            .map(|index| Pick::Slot { source: 0, index })
            .collect();
        let h = self.gather_raw(Prim::Slice, vec![v.len, start, len], &[&v.handle], &picks)?;
        Ok(PrivateVector { handle: h, len })
    }

    /// Slot at a public index.
    pub fn element(&mut self, v: &PrivateVector, index: usize) -> Result<PrivateScalar> {
        if index >= v.len {
            return Err(Error::shape("element", v.len, index));
        }
        let h = self.gather_raw(
            Prim::Slice,
            vec![v.len, index, 1],
            &[&v.handle],
            &[Pick::Slot { source: 0, index }],
        )?;
        Ok(PrivateScalar { handle: h })
    }

    pub fn broadcast(&mut self, s: &PrivateScalar, len: usize) -> Result<PrivateVector> {
        let picks = vec![Pick::Slot { source: 0, index: 0 }; len];
        let h = self.gather_raw(Prim::Broadcast, vec![len], &[&s.handle], &picks)?;
        Ok(PrivateVector { handle: h, len })
    }

    pub fn broadcast_matrix(&mut self, s: &PrivateScalar, rows: usize, cols: usize) -> Result<PrivateMatrix> {
        let picks = vec![Pick::Slot { source: 0, index: 0 }; rows * cols];
        let h = self.gather_raw(Prim::Broadcast, vec![rows, cols], &[&s.handle], &picks)?;
        Ok(PrivateMatrix { handle: h, rows, cols })
    }

    /// Public-shape view of a vector as a `rows×cols` matrix.
    pub fn reshape(&mut self, v: &PrivateVector, rows: usize, cols: usize) -> Result<PrivateMatrix> {
        if rows * cols != v.len {
            return Err(Error::shape("reshape", v.len, (rows, cols)));
        }
        self.own(&v.handle)?;
        Ok(PrivateMatrix {
            handle: v.handle.clone(),
            rows,
            cols,
        })
    }

    pub fn flatten(&mut self, m: &PrivateMatrix) -> Result<PrivateVector> {
        self.own(&m.handle)?;
        Ok(PrivateVector {
            handle: m.handle.clone(),
            len: m.rows * m.cols,
        })
    }

    /// Builds a `rows×cols` matrix from scalars placed at public positions;
    /// every other cell holds `fill`.
    pub fn assemble_matrix(
        &mut self,
        rows: usize,
        cols: usize,
        cells: &[(usize, usize, PrivateScalar)],
        fill: i64,
    ) -> Result<PrivateMatrix> {
        let mut picks = vec![Pick::Fill(Public::Int(fill)); rows * cols];
        let mut sources = Vec::with_capacity(cells.len());
        for (k, (i, j, s)) in cells.iter().enumerate() {
            if *i >= rows || *j >= cols {
                return Err(Error::shape("assemble", (rows, cols), (i, j)));
            }
            picks[i * cols + j] = Pick::Slot { source: k, index: 0 };
            sources.push(&s.handle);
        }
        let h = self.gather_raw(Prim::Gather, vec![rows, cols, cells.len()], &sources, &picks)?;
        Ok(PrivateMatrix { handle: h, rows, cols })
    }

    // -- comparisons -----------------------------------------------------

    /// Element-wise equality bits. Backends without a native equality gate
    /// use `(a-b)·(-1/(a-b+ξ)) + 1`, which needs integer contents and the
    /// masked reciprocal.
    pub fn eeq(&mut self, a: &PrivateVector, b: &PrivateVector) -> Result<PrivateVector> {
        Self::same_shape("eeq", a, b)?;
        let caps = self.capabilities();
        if caps.native_eq {
            return self.binary(Prim::Eq, a, b, |be, o, x, y| be.eq(o, x, y));
        }
        self.require(caps.division, "equality (native or via division)")?;
        self.eeq_arithmetic(a, b)
    }

    /// The arithmetic equality workaround, regardless of native support.
    pub fn eeq_arithmetic<T: PrivateValue>(&mut self, a: &T, b: &T) -> Result<T> {
        let xi = self.xi;
        let diff = self.esub(a, b)?;
        let shifted = self.add_public(&diff, Public::Real(xi))?;
        let inv = self.masked_reciprocal(&shifted)?;
        let q = self.emul(&diff, &inv)?;
        let neg = self.mul_public(&q, Public::Real(-1.0))?;
        self.add_public(&neg, Public::Real(1.0))
    }

    pub fn eq_scalar(&mut self, a: &PrivateScalar, b: &PrivateScalar) -> Result<PrivateBool> {
        let caps = self.capabilities();
        if caps.native_eq {
            return self.binary(Prim::Eq, a, b, |be, o, x, y| be.eq(o, x, y));
        }
        self.require(caps.division, "equality (native or via division)")?;
        self.eeq_arithmetic(a, b)
    }

    /// Element-wise `a > 0` bits.
    pub fn gt_zero<T: PrivateValue>(&mut self, a: &T) -> Result<T> {
        self.require(self.capabilities().compare, "compare")?;
        self.unary(Prim::Compare, a, |be, o, x| be.gt_zero(o, x))
    }

    pub fn sort(&mut self, v: &PrivateVector) -> Result<PrivateVector> {
        self.require(self.capabilities().sort, "sort")?;
        self.unary(Prim::Sort, v, |be, o, x| be.sort(o, x))
    }

    pub fn join_count(&mut self, a: &PrivateVector, b: &PrivateVector) -> Result<PrivateScalar> {
        self.require(self.capabilities().join, "join")?;
        let (sa, sb) = (self.own(&a.handle)?, self.own(&b.handle)?);
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.join_count(out, sa, sb)?;
        self.record(Prim::Join, vec![a.len, b.len]);
        Ok(PrivateScalar { handle: h })
    }

    /// Reciprocal without a division gate: a data owner masks `n` with fresh
    /// randomness `r`, the host decrypts only `r·n`, inverts it in clear and
    /// re-encrypts, and the mask is multiplied back in.
    pub fn masked_reciprocal<T: PrivateValue>(&mut self, n: &T) -> Result<T> {
        self.require(self.capabilities().division, "division")?;
        if self.domain().is_exact() {
            return Err(Error::Domain("masked reciprocal needs an approximate domain".into()));
        }
        let len = n.shape().len();
        let mask: Vec<f64> = {
            let rng = self.owner_rng.as_mut().ok_or(Error::NoRandomness)?;
            (0..len).map(|_| rng.gen_range(0.5..2.0)).collect()
        };
        self.record(Prim::MaskedReciprocal, n.shape().dims());
        let r_handle = self.input_raw(n.shape(), Plain::Real(mask))?;
        let r = T::from_parts(r_handle, n.shape());
        let masked = self.emul(n, &r)?;
        let helper = self.grant(PartyRole::P3, AuthorityScope::MaskedHelper)?;
        let opened = self.dec(&masked, &helper)?.to_f64();
        self.revoke(&helper);
        if opened.contains(&0.0) {
            return Err(Error::DivisionByZero);
        }
        let inv: Vec<f64> = opened.iter().map(|x| 1.0 / x).collect();
        let inv_handle = self.input_raw(n.shape(), Plain::Real(inv))?;
        let inv = T::from_parts(inv_handle, n.shape());
        self.emul(&inv, &r)
    }

    // -- forks -------------------------------------------------------------

    pub fn can_fork(&self) -> bool {
        self.backend.supports_fork()
    }

    /// Independent copy of this context for parallel work. Handles of this
    /// machine stay valid in the fork; results come back via
    /// [`absorb`](Machine::absorb).
    pub fn fork(&self) -> Option<Machine> {
        let backend = self.backend.fork()?;
        let (free_tx, free_rx) = unbounded();
        let ctx = NEXT_CONTEXT.fetch_add(1, Ordering::Relaxed);
        // fresh owner masks per fork; reusing a mask would relate openings
        let owner_rng = self.owner_rng.clone().map(|mut r| {
            let s: u64 = r.gen();
            ChaCha8Rng::seed_from_u64(s ^ ctx)
        });
        Some(Machine {
            ctx,
            parent_ctx: Some(self.ctx),
            backend,
            next_slot: self.next_slot + (1 << 40),
            free_tx,
            free_rx,
            trace: Trace::default(),
            tracing: self.tracing,
            ledger: OpCostLedger::default(),
            stage: self.stage,
            xi: self.xi,
            shift_mode: self.shift_mode,
            owner_rng,
            authorities: self.authorities.clone(),
            next_token: self.next_token,
            host_view: Vec::new(),
        })
    }

    /// Moves a scalar computed in a fork back into this context.
    pub fn absorb(&mut self, fork: &mut Machine, value: &PrivateScalar) -> Result<PrivateScalar> {
        let slot = fork.own(&value.handle)?;
        let sealed = fork
            .backend
            .export(slot)
            .ok_or_else(|| Error::invalid("value missing from fork"))?;
        self.drain_frees();
        let (out, h) = self.fresh();
        self.backend.import(out, sealed)?;
        Ok(PrivateScalar { handle: h })
    }

    /// Folds a finished fork's ledger and host observations into this one.
    pub fn join_fork(&mut self, fork: Machine) {
        self.ledger.merge(&fork.ledger);
        self.host_view.extend(fork.host_view);
    }
}

#[cfg(test)]
mod tests;
