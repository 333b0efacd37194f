mod common;

use std::collections::BTreeSet;

use common::{ints, machines};
use pper_core::intersect::{
    intersection_size, jaccard_match, so_differences, ve_operands, vr_differences, IntersectStrategy, JaccardParams,
    Threshold, SENTINEL_EXACT,
};
use pper_core::machine::Machine;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute(a: &[i64], b: &[i64]) -> i64 {
    let sa: BTreeSet<_> = a.iter().collect();
    b.iter().filter(|x| sa.contains(x)).count() as i64
}

fn random_set(rng: &mut ChaCha8Rng, len: usize) -> Vec<i64> {
    sample(rng, 1 << 16, len).into_iter().map(|x| x as i64).collect()
}

#[test]
fn worked_examples() {
    let mut m = Machine::oblivious(pper_core::backend::Profile::Generic);
    let v1 = m.enc_vec(&[1, 2, 4]).unwrap();
    let v2 = m.enc_vec(&[2, 3]).unwrap();
    let (a, b) = ve_operands(&mut m, &v1, &v2).unwrap();
    assert_eq!(ints(&mut m, &a), vec![1, 2, 4, 1, 2, 4]);
    assert_eq!(ints(&mut m, &b), vec![2, 2, 2, 3, 3, 3]);
    let c = intersection_size(&mut m, IntersectStrategy::VE, &v1, &v2).unwrap();
    assert_eq!(ints(&mut m, &c), vec![1]);

    let d = so_differences(&mut m, &v1, &v2).unwrap();
    assert_eq!(ints(&mut m, &d), vec![-1, 0, -1, -1]);
    let c = intersection_size(&mut m, IntersectStrategy::SO, &v1, &v2).unwrap();
    assert_eq!(ints(&mut m, &c), vec![1]);

    let w1 = m.enc_vec(&[1, 2]).unwrap();
    let w2 = m.enc_vec(&[2, 2, 3]).unwrap();
    let diffs = vr_differences(&mut m, &w1, &w2, 0).unwrap();
    assert_eq!(ints(&mut m, &diffs[0]), vec![-1, 0, -3]);
    let diffs = vr_differences(&mut m, &w1, &w2, SENTINEL_EXACT).unwrap();
    assert_eq!(ints(&mut m, &diffs[0]), vec![-1, 0, SENTINEL_EXACT - 3]);
}

#[test]
fn strategies_agree_with_brute_force_on_every_backend() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<(Vec<i64>, Vec<i64>)> = (0..60)
        .map(|_| {
            let l1 = rng.gen_range(1..=32);
            let l2 = rng.gen_range(1..=32);
            let mut a = random_set(&mut rng, l1);
            let mut b = random_set(&mut rng, l2);
            // force some overlap
            let k = rng.gen_range(0..=a.len().min(b.len()));
            b[..k].copy_from_slice(&a[..k]);
            a.sort_unstable();
            (a, b)
        })
        .collect();
    for (name, mut m) in machines() {
        for s in IntersectStrategy::ALL {
            if !s.supported(&m.capabilities()) {
                continue;
            }
            for (a, b) in &cases {
                let v1 = m.enc_vec(a).unwrap();
                let v2 = m.enc_vec(b).unwrap();
                let c = intersection_size(&mut m, s, &v1, &v2).unwrap();
                assert_eq!(ints(&mut m, &c), vec![brute(a, b)], "{name} {s}");
            }
        }
    }
}

#[test]
fn unsupported_strategies_are_refused() {
    for (name, mut m) in machines() {
        let v = m.enc_vec(&[1, 2]).unwrap();
        for s in IntersectStrategy::ALL {
            let r = intersection_size(&mut m, s, &v, &v);
            assert_eq!(r.is_ok(), s.supported(&m.capabilities()), "{name} {s}");
        }
    }
}

#[test]
fn jaccard_threshold_is_strict() {
    // |a ∩ b| = 2, |a ∪ b| = 4: similarity exactly 1/2
    let a = [1, 2, 3];
    let b = [2, 3, 4];
    for (name, mut m) in machines() {
        let s = IntersectStrategy::ALL.into_iter().find(|s| s.supported(&m.capabilities())).unwrap();
        let v1 = m.enc_vec(&a).unwrap();
        let v2 = m.enc_vec(&b).unwrap();
        for (t, want) in [("1/2", 0), ("49/100", 1), ("51/100", 0), ("1/3", 1)] {
            let params = JaccardParams::new(t.parse::<Threshold>().unwrap());
            let bit = jaccard_match(&mut m, &v1, &v2, &params, s).unwrap();
            assert_eq!(ints(&mut m, &bit), vec![want], "{name} t={t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jaccard_matches_rational_oracle(
        a in prop::collection::btree_set(0i64..200, 1..16),
        b in prop::collection::btree_set(0i64..200, 1..16),
        num in 1u64..100,
    ) {
        let t = Threshold::new(num, 100).unwrap();
        let a: Vec<i64> = a.into_iter().collect();
        let b: Vec<i64> = b.into_iter().collect();
        let want = t.passes(brute(&a, &b) as u64, a.len() as u64, b.len() as u64) as i64;
        for mut m in [Machine::oblivious(pper_core::backend::Profile::Generic), common::simd()] {
            let v1 = m.enc_vec(&a).unwrap();
            let v2 = m.enc_vec(&b).unwrap();
            let bit = jaccard_match(&mut m, &v1, &v2, &JaccardParams::new(t), IntersectStrategy::VE).unwrap();
            prop_assert_eq!(ints(&mut m, &bit), vec![want]);
        }
    }

    #[test]
    fn vr_and_ve_agree(
        a in prop::collection::btree_set(-500i64..500, 1..20),
        b in prop::collection::btree_set(-500i64..500, 1..20),
    ) {
        let a: Vec<i64> = a.into_iter().collect();
        let b: Vec<i64> = b.into_iter().collect();
        let mut m = Machine::oblivious(pper_core::backend::Profile::Generic);
        let v1 = m.enc_vec(&a).unwrap();
        let v2 = m.enc_vec(&b).unwrap();
        for s in [IntersectStrategy::VR, IntersectStrategy::VE, IntersectStrategy::PJ, IntersectStrategy::SO] {
            let c = intersection_size(&mut m, s, &v1, &v2).unwrap();
            prop_assert_eq!(ints(&mut m, &c), vec![brute(&a, &b)]);
        }
    }
}
