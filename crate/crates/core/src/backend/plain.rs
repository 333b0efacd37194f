use std::collections::HashMap;

use super::{Backend, BackendKind, Capabilities, Pick, Profile, SlotId};
use crate::error::{Error, Result, TaintViolation};
use crate::value::{NumericDomain, Plain, Public};

#[derive(Debug, Clone, PartialEq)]
enum Buf {
    Int(Vec<i64>),
    Real(Vec<f64>),
}

/// A private value moved between forked contexts. Contents are not
/// accessible outside the backend.
#[derive(Debug, Clone)]
pub struct SealedValue(Buf);

/// Backend holding plain values in memory: the cleartext oracle, or the
/// oblivious simulator when host-level reads are refused.
#[derive(Debug, Clone)]
pub struct PlainBackend {
    kind: BackendKind,
    profile: Profile,
    domain: NumericDomain,
    caps: Capabilities,
    store: HashMap<SlotId, Buf>,
}

impl PlainBackend {
    pub fn clear() -> Self {
        PlainBackend {
            kind: BackendKind::Clear,
            profile: Profile::Generic,
            domain: NumericDomain::ExactInt64,
            caps: Capabilities::all(),
            store: HashMap::new(),
        }
    }

    pub fn oblivious(profile: Profile) -> Self {
        PlainBackend {
            kind: BackendKind::ObliviousSim,
            profile,
            domain: profile.domain(),
            caps: profile.capabilities(),
            store: HashMap::new(),
        }
    }

    /// Oblivious simulator with an explicit capability set and domain, used
    /// for dry runs that mirror another backend's restrictions.
    pub fn restricted(caps: Capabilities, domain: NumericDomain) -> Self {
        PlainBackend {
            kind: BackendKind::ObliviousSim,
            profile: Profile::Generic,
            domain,
            caps,
            store: HashMap::new(),
        }
    }

    fn get(&self, slot: SlotId) -> Result<&Buf> {
        self.store
            .get(&slot)
            .ok_or_else(|| Error::invalid(format!("unknown slot {slot}")))
    }

    fn put(&mut self, slot: SlotId, buf: Buf) {
        self.store.insert(slot, buf);
    }

    fn convert(&self, values: Plain) -> Result<Buf> {
        match (self.domain, values) {
            (NumericDomain::ExactInt64, Plain::Int(v)) => Ok(Buf::Int(v)),
            (NumericDomain::ExactInt64, Plain::Real(_)) => Err(Error::Domain(
                "real values on an exact backend".into(),
            )),
            (NumericDomain::ApproxFixedPoint, Plain::Int(v)) => {
                Ok(Buf::Real(v.into_iter().map(|x| x as f64).collect()))
            }
            (NumericDomain::ApproxFixedPoint, Plain::Real(v)) => Ok(Buf::Real(v)),
        }
    }

    fn zip(
        &mut self,
        out: SlotId,
        a: SlotId,
        b: SlotId,
        int: impl Fn(i64, i64) -> i64,
        real: impl Fn(f64, f64) -> f64,
    ) -> Result<()> {
        let buf = match (self.get(a)?, self.get(b)?) {
            (Buf::Int(x), Buf::Int(y)) => {
                Buf::Int(x.iter().zip(y).map(|(&p, &q)| int(p, q)).collect())
            }
            (Buf::Real(x), Buf::Real(y)) => {
                Buf::Real(x.iter().zip(y).map(|(&p, &q)| real(p, q)).collect())
            }
            _ => return Err(Error::Domain("mixed buffers".into())),
        };
        self.put(out, buf);
        Ok(())
    }

    fn map(
        &mut self,
        out: SlotId,
        a: SlotId,
        int: impl Fn(i64) -> i64,
        real: impl Fn(f64) -> f64,
    ) -> Result<()> {
        let buf = match self.get(a)? {
            Buf::Int(x) => Buf::Int(x.iter().map(|&p| int(p)).collect()),
            Buf::Real(x) => Buf::Real(x.iter().map(|&p| real(p)).collect()),
        };
        self.put(out, buf);
        Ok(())
    }

    fn public_int(value: Public) -> Result<i64> {
        match value {
            Public::Int(v) => Ok(v),
            Public::Real(v) => Err(Error::Domain(format!(
                "real constant {v} on an exact backend"
            ))),
        }
    }
}

impl Backend for PlainBackend {
    fn kind(&self) -> BackendKind {
        self.kind
    }

    fn profile(&self) -> Profile {
        self.profile
    }

    fn domain(&self) -> NumericDomain {
        self.domain
    }

    fn capabilities(&self) -> Capabilities {
        self.caps
    }

    fn input(&mut self, out: SlotId, values: Plain) -> Result<()> {
        let buf = self.convert(values)?;
        self.put(out, buf);
        Ok(())
    }

    fn reveal(&mut self, slot: SlotId) -> Result<Plain> {
        Ok(match self.get(slot)? {
            Buf::Int(v) => Plain::Int(v.clone()),
            Buf::Real(v) => Plain::Real(v.clone()),
        })
    }

    fn free(&mut self, slots: &[SlotId]) {
        for s in slots {
            self.store.remove(s);
        }
    }

    fn add(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        self.zip(out, a, b, i64::wrapping_add, |x, y| x + y)
    }

    fn sub(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        self.zip(out, a, b, i64::wrapping_sub, |x, y| x - y)
    }

    fn emul(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        self.zip(out, a, b, i64::wrapping_mul, |x, y| x * y)
    }

    fn add_public(&mut self, out: SlotId, a: SlotId, value: Public) -> Result<()> {
        if self.domain.is_exact() {
            let c = Self::public_int(value)?;
            self.map(out, a, |x| x.wrapping_add(c), |x| x)
        } else {
            let c = value.as_f64();
            self.map(out, a, |x| x, |x| x + c)
        }
    }

    fn mul_public(&mut self, out: SlotId, a: SlotId, value: Public) -> Result<()> {
        if self.domain.is_exact() {
            let c = Self::public_int(value)?;
            self.map(out, a, |x| x.wrapping_mul(c), |x| x)
        } else {
            let c = value.as_f64();
            self.map(out, a, |x| x, |x| x * c)
        }
    }

    fn matmul(
        &mut self,
        out: SlotId,
        a: SlotId,
        b: SlotId,
        m: usize,
        k: usize,
        n: usize,
    ) -> Result<()> {
        let buf = match (self.get(a)?, self.get(b)?) {
            (Buf::Int(x), Buf::Int(y)) => {
                let mut z = vec![0i64; m * n];
                for i in 0..m {
                    for l in 0..k {
                        let xv = x[i * k + l];
                        for j in 0..n {
                            z[i * n + j] = z[i * n + j].wrapping_add(xv.wrapping_mul(y[l * n + j]));
                        }
                    }
                }
                Buf::Int(z)
            }
            (Buf::Real(x), Buf::Real(y)) => {
                let mut z = vec![0f64; m * n];
                for i in 0..m {
                    for l in 0..k {
                        let xv = x[i * k + l];
                        for j in 0..n {
                            z[i * n + j] += xv * y[l * n + j];
                        }
                    }
                }
                Buf::Real(z)
            }
            _ => return Err(Error::Domain("mixed buffers".into())),
        };
        self.put(out, buf);
        Ok(())
    }

    fn sum(&mut self, out: SlotId, a: SlotId) -> Result<()> {
        let buf = match self.get(a)? {
            Buf::Int(x) => Buf::Int(vec![x.iter().fold(0i64, |s, &v| s.wrapping_add(v))]),
            Buf::Real(x) => Buf::Real(vec![x.iter().sum()]),
        };
        self.put(out, buf);
        Ok(())
    }

    fn gather(&mut self, out: SlotId, sources: &[SlotId], picks: &[Pick]) -> Result<()> {
        let bufs = sources
            .iter()
            .map(|&s| self.get(s))
            .collect::<Result<Vec<_>>>()?;
        let buf = if self.domain.is_exact() {
            let mut v = Vec::with_capacity(picks.len());
            for p in picks {
                v.push(match *p {
                    Pick::Slot { source, index } => match bufs[source] {
                        Buf::Int(x) => x[index],
                        Buf::Real(_) => return Err(Error::Domain("mixed buffers".into())),
                    },
                    Pick::Fill(c) => Self::public_int(c)?,
                });
            }
            Buf::Int(v)
        } else {
            let mut v = Vec::with_capacity(picks.len());
            for p in picks {
                v.push(match *p {
                    Pick::Slot { source, index } => match bufs[source] {
                        Buf::Real(x) => x[index],
                        Buf::Int(_) => return Err(Error::Domain("mixed buffers".into())),
                    },
                    Pick::Fill(c) => c.as_f64(),
                });
            }
            Buf::Real(v)
        };
        self.put(out, buf);
        Ok(())
    }

    fn eq(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        self.zip(
            out,
            a,
            b,
            |x, y| (x == y) as i64,
            |x, y| if x == y { 1.0 } else { 0.0 },
        )
    }

    fn gt_zero(&mut self, out: SlotId, a: SlotId) -> Result<()> {
        self.map(out, a, |x| (x > 0) as i64, |x| if x > 0.0 { 1.0 } else { 0.0 })
    }

    fn sort(&mut self, out: SlotId, a: SlotId) -> Result<()> {
        let buf = match self.get(a)? {
            Buf::Int(x) => {
                let mut v = x.clone();
                v.sort_unstable();
                Buf::Int(v)
            }
            Buf::Real(x) => {
                let mut v = x.clone();
                v.sort_by(f64::total_cmp);
                Buf::Real(v)
            }
        };
        self.put(out, buf);
        Ok(())
    }

    fn join_count(&mut self, out: SlotId, a: SlotId, b: SlotId) -> Result<()> {
        let buf = match (self.get(a)?, self.get(b)?) {
            (Buf::Int(x), Buf::Int(y)) => {
                let n = x.iter().map(|p| y.iter().filter(|q| *q == p).count()).sum::<usize>();
                Buf::Int(vec![n as i64])
            }
            (Buf::Real(x), Buf::Real(y)) => {
                let n = x.iter().map(|p| y.iter().filter(|q| *q == p).count()).sum::<usize>();
                Buf::Real(vec![n as f64])
            }
            _ => return Err(Error::Domain("mixed buffers".into())),
        };
        self.put(out, buf);
        Ok(())
    }

    fn peek(&mut self, slot: SlotId, site: &str) -> Result<Plain, TaintViolation> {
        match self.kind {
            BackendKind::Clear => self.reveal(slot).map_err(|e| TaintViolation {
                operation: format!("peek: {e}"),
                site: site.to_string(),
            }),
            _ => Err(TaintViolation {
                operation: "host-level read of a private value".into(),
                site: site.to_string(),
            }),
        }
    }

    fn supports_fork(&self) -> bool {
        true
    }

    fn fork(&self) -> Option<Box<dyn Backend>> {
        Some(Box::new(self.clone()))
    }

    fn export(&mut self, slot: SlotId) -> Option<SealedValue> {
        self.store.get(&slot).cloned().map(SealedValue)
    }

    fn import(&mut self, out: SlotId, value: SealedValue) -> Result<()> {
        let domain_ok = matches!(
            (&value.0, self.domain),
            (Buf::Int(_), NumericDomain::ExactInt64) | (Buf::Real(_), NumericDomain::ApproxFixedPoint)
        );
        if !domain_ok {
            return Err(Error::Domain("sealed value from another domain".into()));
        }
        self.put(out, value.0);
        Ok(())
    }
}
