#![allow(dead_code)]

use pper_core::backend::{BackendKind, Profile};
use pper_core::blocking::{prepare_with_plan, BlockingConfig, OwnerBundle};
use pper_core::evalkit::{generate_dataset, CorruptionProfile, Dataset};
use pper_core::machine::{AuthorityScope, Machine, PartyRole, PrivateValue};
use pper_core::mpc::{LatencyModel, MpcBackend};

pub const CORPUS_SEED: u64 = 42;

pub fn simd() -> Machine {
    let mut m = Machine::oblivious(Profile::SimdLike);
    m.set_xi(1e-9).unwrap();
    m
}

pub fn mpc(seed: u64) -> Machine {
    Machine::new(Box::new(MpcBackend::spawn(seed, LatencyModel::none()).unwrap()), seed)
}

/// Every backend and simulator profile, labelled.
pub fn machines() -> Vec<(String, Machine)> {
    vec![
        ("clear".into(), Machine::clear()),
        ("sim/generic".into(), Machine::oblivious(Profile::Generic)),
        ("sim/simd".into(), simd()),
        ("sim/sharemind".into(), Machine::oblivious(Profile::SharemindLike)),
        ("mpc".into(), mpc(11)),
    ]
}

pub fn label(m: &Machine) -> String {
    match m.kind() {
        BackendKind::ObliviousSim => format!("sim/{}", m.profile()),
        k => k.to_string(),
    }
}

pub fn ints<T: PrivateValue>(m: &mut Machine, v: &T) -> Vec<i64> {
    let auth = m.grant(PartyRole::P1, AuthorityScope::Joint).unwrap();
    let tol = m.tau_bool().max(1e-6);
    let out = m.dec_ints(v, &auth, tol).unwrap();
    m.revoke(&auth);
    out
}

pub fn corpus() -> Dataset {
    generate_dataset(CORPUS_SEED, 100, 20, &CorruptionProfile::default()).unwrap()
}

pub fn bundles(ds: &Dataset, threshold: f64) -> (OwnerBundle, OwnerBundle) {
    let config = BlockingConfig {
        threshold,
        ..BlockingConfig::default()
    };
    let plan = config.plan().unwrap();
    (
        prepare_with_plan(&ds.d1, &config, plan).unwrap(),
        prepare_with_plan(&ds.d2, &config, plan).unwrap(),
    )
}
