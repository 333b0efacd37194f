use super::*;
use crate::backend::PlainBackend;
use crate::mpc::{LatencyModel, MpcBackend};
use crate::trace::assert_oblivious;

fn machines() -> Vec<Machine> {
    vec![
        Machine::clear(),
        Machine::oblivious(Profile::Generic),
        simd(),
        Machine::oblivious(Profile::SharemindLike),
        Machine::new(Box::new(MpcBackend::spawn(7, LatencyModel::none()).unwrap()), 7),
    ]
}

/// Approximate machine with a small offset, so that lookups through
/// arithmetic equality masks stay well within rounding tolerance.
fn simd() -> Machine {
    let mut m = Machine::oblivious(Profile::SimdLike);
    m.set_xi(1e-9).unwrap();
    m
}

fn ints<T: PrivateValue>(m: &mut Machine, v: &T) -> Vec<i64> {
    let auth = m.grant(PartyRole::P1, AuthorityScope::Joint).unwrap();
    let tol = m.tau_bool().max(1e-6);
    m.dec_ints(v, &auth, tol).unwrap()
}

#[test]
fn enc_dec_round_trip() {
    for mut m in machines() {
        let v = m.enc_vec(&[3, -4, 0, 9]).unwrap();
        assert_eq!(ints(&mut m, &v), vec![3, -4, 0, 9], "{:?}", m.kind());
    }
}

#[test]
fn arithmetic_and_products() {
    for mut m in machines() {
        let a = m.enc_vec(&[1, 2, 3]).unwrap();
        let b = m.enc_vec(&[4, 5, 6]).unwrap();
        let s = m.eadd(&a, &b).unwrap();
        let d = m.esub(&a, &b).unwrap();
        let p = m.emul(&a, &b).unwrap();
        let dp = m.dot_product(&a, &b).unwrap();
        assert_eq!(ints(&mut m, &s), vec![5, 7, 9]);
        assert_eq!(ints(&mut m, &d), vec![-3, -3, -3]);
        assert_eq!(ints(&mut m, &p), vec![4, 10, 18]);
        assert_eq!(ints(&mut m, &dp), vec![32]);

        let x = m.enc_matrix(2, 3, &[1, 2, 3, 4, 5, 6]).unwrap();
        let y = m.enc_matrix(3, 2, &[7, 8, 9, 10, 11, 12]).unwrap();
        let z = m.matmul(&x, &y).unwrap();
        assert_eq!(ints(&mut m, &z), vec![58, 64, 139, 154]);
        let t = m.transpose(&x).unwrap();
        assert_eq!(ints(&mut m, &t), vec![1, 4, 2, 5, 3, 6]);
    }
}

#[test]
fn choose_variants() {
    for mut m in machines() {
        let one = m.enc_scalar(1).unwrap();
        let zero = m.enc_scalar(0).unwrap();
        let a = m.enc_scalar(10).unwrap();
        let b = m.enc_scalar(20).unwrap();
        let c1 = m.choose(&one, &a, &b).unwrap();
        let c0 = m.choose(&zero, &a, &b).unwrap();
        assert_eq!(ints(&mut m, &c1), vec![10]);
        assert_eq!(ints(&mut m, &c0), vec![20]);

        let mask = m.enc_vec(&[1, 0, 1]).unwrap();
        let va = m.enc_vec(&[1, 2, 3]).unwrap();
        let vb = m.enc_vec(&[7, 8, 9]).unwrap();
        let cv = m.choose_vec(&mask, &va, &vb).unwrap();
        assert_eq!(ints(&mut m, &cv), vec![1, 8, 3]);
        let ce = m.choose_vec_ext(&zero, &va, &vb).unwrap();
        assert_eq!(ints(&mut m, &ce), vec![7, 8, 9]);

        let mm = m.enc_matrix(2, 2, &[0, 1, 1, 0]).unwrap();
        let ma = m.enc_matrix(2, 2, &[1, 2, 3, 4]).unwrap();
        let mb = m.enc_matrix(2, 2, &[5, 6, 7, 8]).unwrap();
        let cm = m.choose_mat(&mm, &ma, &mb).unwrap();
        assert_eq!(ints(&mut m, &cm), vec![5, 2, 3, 8]);
        let cme = m.choose_mat_ext(&one, &ma, &mb).unwrap();
        assert_eq!(ints(&mut m, &cme), vec![1, 2, 3, 4]);
    }
}

#[test]
fn private_indexing() {
    for mut m in machines() {
        let v = m.enc_vec(&[5, 6, 7, 8]).unwrap();
        let i = m.enc_scalar(2).unwrap();
        let mask = m.mask_gen(4, &i).unwrap();
        assert_eq!(ints(&mut m, &mask), vec![0, 0, 1, 0]);
        let got = m.vector_lookup(&v, &i).unwrap();
        assert_eq!(ints(&mut m, &got), vec![7]);
        let val = m.enc_scalar(-1).unwrap();
        let up = m.vector_update(&v, &i, &val).unwrap();
        assert_eq!(ints(&mut m, &up), vec![5, 6, -1, 8]);

        let mat = m.enc_matrix(2, 3, &[1, 2, 3, 4, 5, 6]).unwrap();
        let r = m.enc_scalar(1).unwrap();
        let c = m.enc_scalar(0).unwrap();
        let cell = m.matrix_lookup(&mat, &r, &c).unwrap();
        assert_eq!(ints(&mut m, &cell), vec![4]);
        let nine = m.enc_scalar(9).unwrap();
        let up = m.matrix_update(&mat, &r, &c, &nine).unwrap();
        assert_eq!(ints(&mut m, &up), vec![1, 2, 3, 9, 5, 6]);
    }
}

#[test]
fn out_of_range_index_reads_zero() {
    let mut m = Machine::oblivious(Profile::Generic);
    let v = m.enc_vec(&[5, 6]).unwrap();
    let i = m.enc_scalar(7).unwrap();
    let got = m.vector_lookup(&v, &i).unwrap();
    assert_eq!(ints(&mut m, &got), vec![0]);
}

#[test]
fn arithmetic_equality_matches_native() {
    let mut m = Machine::oblivious(Profile::SimdLike);
    let a = m.enc_vec(&[0, 3, -2, 100, 7]).unwrap();
    let b = m.enc_vec(&[0, 4, -2, 99, 7]).unwrap();
    let e = m.eeq(&a, &b).unwrap();
    let auth = m.grant(PartyRole::P1, AuthorityScope::Joint).unwrap();
    let tol = m.tau_bool();
    assert_eq!(
        m.dec_bits(&e, &auth, tol).unwrap(),
        vec![true, false, true, false, true]
    );
    assert!(m.ledger().count(Prim::MaskedReciprocal) >= 1);
}

#[test]
fn equality_workaround_needs_division() {
    let mut m = Machine::new(Box::new(PlainBackend::oblivious(Profile::Generic)), 1);
    let a = m.enc_scalar(1).unwrap();
    assert!(matches!(m.masked_reciprocal(&a), Err(Error::Unsupported { .. })));
}

#[test]
fn masked_reciprocal_without_randomness_fails() {
    let mut m = Machine::oblivious(Profile::SimdLike).without_owner_randomness();
    let a = m.enc_scalar(4).unwrap();
    assert!(matches!(m.masked_reciprocal(&a), Err(Error::NoRandomness)));
}

#[test]
fn host_sees_only_masked_products() {
    let mut m = Machine::oblivious(Profile::SimdLike);
    let a = m.enc_real(4.0).unwrap();
    let inv = m.masked_reciprocal(&a).unwrap();
    let auth = m.grant(PartyRole::P1, AuthorityScope::Joint).unwrap();
    let v = m.dec(&inv, &auth).unwrap().scalar_f64();
    assert!((v - 0.25).abs() < 1e-9);
    let seen: Vec<f64> = m
        .host_view()
        .iter()
        .filter_map(|o| match o {
            Observation::Decrypted { scope: AuthorityScope::MaskedHelper, values, .. } => {
                Some(values.scalar_f64())
            }
            _ => None,
        })
        .collect();
    assert_eq!(seen.len(), 1);
    assert!((2.0..8.0).contains(&seen[0]), "r·4 with r in [0.5, 2)");
}

#[test]
fn host_cannot_get_joint_authority() {
    let mut m = Machine::clear();
    assert!(m.grant(PartyRole::P3, AuthorityScope::Joint).is_err());
    assert!(m.grant(PartyRole::P1, AuthorityScope::ObfuscatedPairs).is_err());
}

#[test]
fn foreign_or_revoked_authority_is_refused() {
    let mut m1 = Machine::oblivious(Profile::Generic);
    let mut m2 = Machine::oblivious(Profile::Generic);
    let foreign = m2.grant(PartyRole::P1, AuthorityScope::Joint).unwrap();
    let v = m1.enc_scalar(1).unwrap();
    assert!(matches!(m1.dec(&v, &foreign), Err(Error::Authority(_))));
    let own = m1.grant(PartyRole::P1, AuthorityScope::Joint).unwrap();
    m1.revoke(&own);
    assert!(matches!(m1.dec(&v, &own), Err(Error::Authority(_))));
}

#[test]
fn handles_do_not_cross_contexts() {
    let mut m1 = Machine::oblivious(Profile::Generic);
    let mut m2 = Machine::oblivious(Profile::Generic);
    let a = m1.enc_scalar(1).unwrap();
    let b = m2.enc_scalar(1).unwrap();
    assert!(matches!(m1.add(&a, &b), Err(Error::ContextMismatch { .. })));
}

#[test]
fn branching_on_private_data_is_a_taint_violation() {
    for mut m in machines().into_iter().skip(1) {
        let c = m.enc_scalar(1).unwrap();
        let err = m.branch_on(&c, "test").unwrap_err();
        assert!(matches!(err, Error::Taint(_)));
    }
    let mut clear = Machine::clear();
    let c = clear.enc_scalar(1).unwrap();
    assert!(clear.branch_on(&c, "test").unwrap());
}

#[test]
fn shapes_are_checked() {
    let mut m = Machine::clear();
    let a = m.enc_vec(&[1, 2]).unwrap();
    let b = m.enc_vec(&[1, 2, 3]).unwrap();
    assert!(matches!(m.eadd(&a, &b), Err(Error::ShapeMismatch { .. })));
    let x = m.enc_matrix(2, 2, &[1, 2, 3, 4]).unwrap();
    let y = m.enc_matrix(3, 1, &[1, 2, 3]).unwrap();
    assert!(matches!(m.matmul(&x, &y), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn capabilities_gate_primitives() {
    let mut sm = Machine::oblivious(Profile::SharemindLike);
    let v = sm.enc_vec(&[1, 2, 3]).unwrap();
    assert!(matches!(sm.rshift(&v, 1), Err(Error::Unsupported { .. })));
    let mut simd = Machine::oblivious(Profile::SimdLike);
    let v = simd.enc_vec(&[1, 2, 3]).unwrap();
    assert!(matches!(simd.sort(&v), Err(Error::Unsupported { .. })));
    assert!(matches!(simd.join_count(&v, &v), Err(Error::Unsupported { .. })));
}

#[test]
fn shifts_rotate_or_fill() {
    let mut m = Machine::oblivious(Profile::Generic);
    let v = m.enc_vec(&[1, 2, 3, 4]).unwrap();
    let r = m.rshift(&v, 1).unwrap();
    assert_eq!(ints(&mut m, &r), vec![4, 1, 2, 3]);
    let l = m.lshift(&v, 1).unwrap();
    assert_eq!(ints(&mut m, &l), vec![2, 3, 4, 1]);
    m.set_shift_mode(ShiftMode::Fill(Public::Int(0)));
    let l = m.lshift(&v, 1).unwrap();
    assert_eq!(ints(&mut m, &l), vec![2, 3, 4, 0]);
}

#[test]
fn reshaping_helpers() {
    let mut m = Machine::oblivious(Profile::Generic);
    let v = m.enc_vec(&[1, 2]).unwrap();
    let r = m.repeat_each(&v, 3).unwrap();
    assert_eq!(ints(&mut m, &r), vec![1, 1, 1, 2, 2, 2]);
    let t = m.tile(&v, 2).unwrap();
    assert_eq!(ints(&mut m, &t), vec![1, 2, 1, 2]);
    let c = m.concat(&v, &t).unwrap();
    assert_eq!(ints(&mut m, &c), vec![1, 2, 1, 2, 1, 2]);
    let p = m.pad(&v, 4, 9).unwrap();
    assert_eq!(ints(&mut m, &p), vec![1, 2, 9, 9]);
    let s = m.slice(&c, 1, 3).unwrap();
    assert_eq!(ints(&mut m, &s), vec![2, 1, 2]);
    let a = m.enc_scalar(5).unwrap();
    let b = m.enc_scalar(6).unwrap();
    let g = m.assemble_matrix(2, 2, &[(0, 1, a), (1, 0, b)], 0).unwrap();
    assert_eq!(ints(&mut m, &g), vec![0, 5, 6, 0]);
}

#[test]
fn sort_and_compare() {
    for mut m in [
        Machine::oblivious(Profile::SharemindLike),
        Machine::new(Box::new(MpcBackend::spawn(3, LatencyModel::none()).unwrap()), 3),
    ] {
        let v = m.enc_vec(&[5, -1, 3, 3, 0, 9, 2]).unwrap();
        let s = m.sort(&v).unwrap();
        assert_eq!(ints(&mut m, &s), vec![-1, 0, 2, 3, 3, 5, 9]);
        let g = m.gt_zero(&v).unwrap();
        assert_eq!(ints(&mut m, &g), vec![1, 0, 1, 1, 0, 1, 1]);
    }
}

#[test]
fn traces_depend_only_on_shapes() {
    let run = |vals: [i64; 4], idx: i64| {
        let mut m = Machine::oblivious(Profile::Generic);
        let v = m.enc_vec(&vals).unwrap();
        let i = m.enc_scalar(idx).unwrap();
        let x = m.enc_scalar(vals[0] * 3).unwrap();
        let up = m.vector_update(&v, &i, &x).unwrap();
        let _ = m.vector_lookup(&up, &i).unwrap();
        m.take_trace()
    };
    assert_oblivious(&run([1, 2, 3, 4], 0), &run([9, 9, 0, -5], 3)).unwrap();
}

#[test]
fn ledger_counts_per_stage() {
    let mut m = Machine::oblivious(Profile::Generic);
    m.set_stage(Stage::MergeDedup);
    let a = m.enc_vec(&[1, 2]).unwrap();
    let _ = m.dot_product(&a, &a).unwrap();
    assert_eq!(m.ledger().stage_count(Stage::MergeDedup, Prim::DotProduct), 1);
    assert_eq!(m.ledger().stage_count(Stage::Adhoc, Prim::DotProduct), 0);
}

#[test]
fn approximate_domain_rejects_large_integers() {
    let mut m = Machine::oblivious(Profile::SimdLike);
    assert!(matches!(m.enc_scalar(i64::MAX), Err(Error::Domain(_))));
    assert!(m.enc_scalar(1 << 52).is_ok());
}

#[test]
fn exact_domain_rejects_reals() {
    let mut m = Machine::oblivious(Profile::Generic);
    assert!(m.enc_real(0.5).is_err());
}

#[test]
fn forks_absorb_results() {
    let mut m = Machine::oblivious(Profile::Generic);
    let a = m.enc_vec(&[1, 2, 3]).unwrap();
    let mut f = m.fork().unwrap();
    let s = f.sum(&a).unwrap();
    let back = m.absorb(&mut f, &s).unwrap();
    m.join_fork(f);
    assert_eq!(ints(&mut m, &back), vec![6]);
    assert_eq!(m.ledger().count(Prim::Sum), 1);
}

#[test]
fn mpc_round_stats_accumulate_per_stage() {
    let mut m = Machine::new(Box::new(MpcBackend::spawn(1, LatencyModel::none()).unwrap()), 1);
    m.set_stage(Stage::FilterEr);
    let a = m.enc_vec(&[1, 2, 3]).unwrap();
    let b = m.enc_vec(&[1, 0, 3]).unwrap();
    let _ = m.eeq(&a, &b).unwrap();
    let _ = m.emul(&a, &b).unwrap();
    let stats = m.round_stats().unwrap();
    let st = stats.per_stage[&Stage::FilterEr];
    assert!(st.rounds >= 4);
    assert!(st.messages > 0 && st.bytes > 0);
    assert!(stats.per_op.contains_key("eq"));
    assert!(stats.per_op.contains_key("emul"));
}
