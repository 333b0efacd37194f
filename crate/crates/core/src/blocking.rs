//! Data-owner side preparation: bigram tokens, container encoding, MinHash
//! signatures, LSH band planning and blocking keys.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;
use std::io::{BufRead, Write};

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{Machine, PrivateVector};

pub const DEFAULT_NUM_PERM: usize = 128;
/// Mersenne prime modulus of the universal hash family.
pub const HASH_PRIME: u64 = (1 << 61) - 1;
/// Integration step of the band optimizer.
pub const INTEGRATION_STEP: f64 = 0.001;

/// Default field order used to build the token string.
pub const DEFAULT_FIELDS: [&str; 7] = [
    "given_name",
    "surname",
    "street_number",
    "address",
    "suburb",
    "postcode",
    "state",
];

/// One input record: `{"id": .., "fields": {..}}` per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub fields: BTreeMap<String, String>,
}

impl Record {
    /// Configured fields joined by single spaces; missing fields are empty.
    pub fn text(&self, fields: &[String]) -> String {
        fields
            .iter()
            .map(|f| self.fields.get(f).map(String::as_str).unwrap_or(""))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn read_records(reader: impl BufRead) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::invalid(format!("record line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(mut writer: impl Write, records: &[Record]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Distinct bigram codes of a record, `first·256 + second`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSet {
    pub id: String,
    pub tokens: BTreeSet<u16>,
}

impl TokenSet {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercases ASCII letters and checks every character is a printable
/// 8-bit code.
pub fn normalize(text: &str) -> Result<Vec<u8>> {
    text.chars()
        .map(|c| {
            let code = c as u32;
            if code > 0xFF {
                Err(Error::invalid(format!("character {c:?} is not an 8-bit code")))
            } else if code < 0x20 || code == 0x7F {
                Err(Error::invalid(format!("control character {code:#04x} in record text")))
            } else {
                Ok((code as u8).to_ascii_lowercase())
            }
        })
        .collect()
}

/// Overlapping bigrams of the normalized text. Texts shorter than two
/// characters are padded with spaces.
pub fn tokenize_bigrams(id: &str, text: &str) -> Result<TokenSet> {
    let mut bytes = normalize(text)?;
    while bytes.len() < 2 {
        bytes.push(b' ');
    }
    let tokens = bytes
        .windows(2)
        .map(|w| (w[0] as u16) << 8 | w[1] as u16)
        .collect();
    Ok(TokenSet {
        id: id.to_string(),
        tokens,
    })
}

/// Token containers of one record as uploaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedRecord {
    pub id: String,
    pub containers: Vec<i64>,
    pub pack: usize,
}

/// Packs sorted token codes, `k` per 64-bit container, big-endian with zero
/// padding in the last container.
pub fn pack_tokens(tokens: &TokenSet, k: usize) -> Result<EncodedRecord> {
    if k != 1 && k != 4 {
        return Err(Error::Config(format!("packing factor must be 1 or 4, got {k}")));
    }
    let sorted: Vec<u16> = tokens.tokens.iter().copied().collect();
    let containers = sorted
        .chunks(k)
        .map(|chunk| {
            let mut v: u64 = 0;
            for i in 0..k {
                v = v << 16 | chunk.get(i).copied().unwrap_or(0) as u64;
            }
            v as i64
        })
        .collect();
    Ok(EncodedRecord {
        id: tokens.id.clone(),
        containers,
        pack: k,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub seed: u64,
}

impl MinHashSignature {
    /// Fraction of agreeing slots, an estimate of Jaccard similarity.
    pub fn similarity(&self, other: &MinHashSignature) -> f64 {
        let same = self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.values.len().max(1) as f64
    }

    /// Signature of the union of the two underlying sets.
    pub fn union(&self, other: &MinHashSignature) -> MinHashSignature {
        MinHashSignature {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| *a.min(b))
                .collect(),
            seed: self.seed,
        }
    }
}

/// Seeded family of `(a·x + b) mod (2^61 − 1)` hashes.
#[derive(Debug, Clone)]
pub struct MinHasher {
    a: Vec<u64>,
    b: Vec<u64>,
    seed: u64,
}

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::with_capacity(num_perm);
        let mut b = Vec::with_capacity(num_perm);
        for _ in 0..num_perm {
            a.push(rng.gen_range(1..HASH_PRIME));
            b.push(rng.gen_range(0..HASH_PRIME));
        }
        MinHasher { a, b, seed }
    }

    pub fn num_perm(&self) -> usize {
        self.a.len()
    }

    pub fn signature(&self, tokens: &TokenSet) -> MinHashSignature {
        let values = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| {
                tokens
                    .tokens
                    .iter()
                    .map(|&x| ((a as u128 * x as u128 + b as u128) % HASH_PRIME as u128) as u64)
                    .min()
                    .unwrap_or(u64::MAX)
            })
            .collect();
        MinHashSignature {
            values,
            seed: self.seed,
        }
    }
}

/// `b` bands of `r` signature rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub b: usize,
    pub r: usize,
    pub num_perm: usize,
    pub fp_weight: f64,
    pub fn_weight: f64,
}

/// Midpoint rule with step close to [`INTEGRATION_STEP`].
fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = ((hi - lo) / INTEGRATION_STEP).round().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Probability mass of dissimilar pairs (`s < t`) that share a band.
pub fn false_positive_probability(t: f64, b: usize, r: usize) -> f64 {
    integrate(|s| 1.0 - (1.0 - s.powi(r as i32)).powi(b as i32), 0.0, t)
}

/// Probability mass of similar pairs (`s ≥ t`) that share no band.
pub fn false_negative_probability(t: f64, b: usize, r: usize) -> f64 {
    integrate(|s| (1.0 - s.powi(r as i32)).powi(b as i32), t, 1.0)
}

pub fn band_objective(t: f64, b: usize, r: usize, fp_weight: f64, fn_weight: f64) -> f64 {
    fp_weight * false_positive_probability(t, b, r) + fn_weight * false_negative_probability(t, b, r)
}

/// Exhaustive search over `b·r ≤ num_perm` for the smallest weighted error.
/// Ties keep the first pair in `(b, r)` lexicographic order.
pub fn optimal_band_range(t: f64, num_perm: usize, fp_weight: f64, fn_weight: f64) -> Result<BandPlan> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("blocking threshold must lie in (0, 1), got {t}")));
    }
    if num_perm == 0 {
        return Err(Error::Config("num_perm must be positive".into()));
    }
    let mut best = (f64::INFINITY, 0, 0);
    for b in 1..=num_perm {
        for r in 1..=num_perm / b {
            let err = band_objective(t, b, r, fp_weight, fn_weight);
            if err < best.0 {
                best = (err, b, r);
            }
        }
    }
    Ok(BandPlan {
        b: best.1,
        r: best.2,
        num_perm,
        fp_weight,
        fn_weight,
    })
}

/// One key per band: 4 hex digits of band index, then 16 hex digits of the
/// FNV-1a hash of the band's rows.
pub fn lsh_keys(sig: &MinHashSignature, plan: &BandPlan) -> Result<Vec<String>> {
    if plan.b * plan.r > sig.values.len() {
        return Err(Error::Config(format!(
            "band plan {}x{} exceeds signature length {}",
            plan.b,
            plan.r,
            sig.values.len()
        )));
    }
    Ok((0..plan.b)
        .map(|band| {
            let mut h = FnvHasher::default();
            for v in &sig.values[band * plan.r..(band + 1) * plan.r] {
                h.write(&v.to_le_bytes());
            }
            format!("{band:04x}{:016x}", h.finish())
        })
        .collect())
}

/// Blocking parameters both owners agree on before linkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingConfig {
    pub threshold: f64,
    pub num_perm: usize,
    pub fp_weight: f64,
    pub fn_weight: f64,
    pub minhash_seed: u64,
    pub pack: usize,
    pub fields: Vec<String>,
}

impl Default for BlockingConfig {
    fn default() -> Self {
        BlockingConfig {
            threshold: 0.5,
            num_perm: DEFAULT_NUM_PERM,
            fp_weight: 0.5,
            fn_weight: 0.5,
            minhash_seed: 1,
            pack: 1,
            fields: DEFAULT_FIELDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl BlockingConfig {
    pub fn plan(&self) -> Result<BandPlan> {
        optimal_band_range(self.threshold, self.num_perm, self.fp_weight, self.fn_weight)
    }
}

/// Public blocking key to 0-based record indices, ascending.
pub type InvertedIndex = BTreeMap<String, Vec<usize>>;

pub fn inverted_index(keys: &[Vec<String>]) -> InvertedIndex {
    let mut index = InvertedIndex::new();
    for (i, ks) in keys.iter().enumerate() {
        for k in ks {
            let ids = index.entry(k.clone()).or_default();
            if ids.last() != Some(&i) {
                ids.push(i);
            }
        }
    }
    index
}

/// Everything one data owner prepares before upload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnerBundle {
    pub encoded: Vec<EncodedRecord>,
    pub blocks: InvertedIndex,
    pub plan: BandPlan,
}

impl OwnerBundle {
    pub fn ids(&self) -> Vec<String> {
        self.encoded.iter().map(|e| e.id.clone()).collect()
    }
}

pub fn tokenize_records(records: &[Record], fields: &[String]) -> Result<Vec<TokenSet>> {
    records
        .iter()
        .map(|r| tokenize_bigrams(&r.id, &r.text(fields)))
        .collect()
}

/// Tokenizes, encodes and blocks a dataset with a precomputed plan.
pub fn prepare_with_plan(records: &[Record], config: &BlockingConfig, plan: BandPlan) -> Result<OwnerBundle> {
    let hasher = MinHasher::new(config.num_perm, config.minhash_seed);
    let tokens = tokenize_records(records, &config.fields)?;
    let encoded = tokens
        .iter()
        .map(|t| pack_tokens(t, config.pack))
        .collect::<Result<Vec<_>>>()?;
    let keys = tokens
        .iter()
        .map(|t| lsh_keys(&hasher.signature(t), &plan))
        .collect::<Result<Vec<_>>>()?;
    Ok(OwnerBundle {
        encoded,
        blocks: inverted_index(&keys),
        plan,
    })
}

pub fn prepare(records: &[Record], config: &BlockingConfig) -> Result<OwnerBundle> {
    prepare_with_plan(records, config, config.plan()?)
}

/// Encrypts an inverted index: each key's record indices become a private
/// vector. Keys with no ids are dropped.
pub fn build_blocks(m: &mut Machine, index: &InvertedIndex) -> Result<BTreeMap<String, PrivateVector>> {
    let mut out = BTreeMap::new();
    for (k, ids) in index {
        if ids.is_empty() {
            continue;
        }
        let v: Vec<i64> = ids.iter().map(|&i| i as i64).collect();
        out.insert(k.clone(), m.enc_vec(&v)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bigrams_of_a_name() {
        let t = tokenize_bigrams("x", "Peter").unwrap();
        assert_eq!(t.len(), 4);
        let pe = (b'p' as u16) * 256 + b'e' as u16;
        assert_eq!(pe, 28773);
        assert!(t.tokens.contains(&pe));
        assert_eq!(tokenize_bigrams("x", "aaa").unwrap().len(), 1);
        assert_eq!(tokenize_bigrams("x", "").unwrap().len(), 1);
        assert_eq!(tokenize_bigrams("x", "a").unwrap().len(), 1);
    }

    #[test]
    fn wide_characters_are_rejected() {
        assert!(tokenize_bigrams("x", "naïve").is_ok());
        assert!(tokenize_bigrams("x", "日本").is_err());
        assert!(tokenize_bigrams("x", "a\tb").is_err());
    }

    #[test]
    fn packing_layouts() {
        let t = tokenize_bigrams("x", "peter").unwrap();
        let one = pack_tokens(&t, 1).unwrap();
        let sorted: Vec<i64> = t.tokens.iter().map(|&x| x as i64).collect();
        assert_eq!(one.containers, sorted);
        let four = pack_tokens(&t, 4).unwrap();
        assert_eq!(four.containers.len(), 1);
        let s = &sorted;
        let expect = (s[0] << 48) | (s[1] << 32) | (s[2] << 16) | s[3];
        assert_eq!(four.containers[0], expect);
        let t5 = tokenize_bigrams("x", "peters").unwrap();
        let p = pack_tokens(&t5, 4).unwrap();
        assert_eq!(p.containers.len(), 2);
        assert_eq!(p.containers[1] & 0xFFFF_FFFF_FFFF, 0);
        assert!(pack_tokens(&t5, 3).is_err());
    }

    #[test]
    fn integration_is_accurate() {
        let v = integrate(|x| x * x, 0.0, 1.0);
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn band_keys_have_fixed_layout() {
        let h = MinHasher::new(128, 3);
        let sig = h.signature(&tokenize_bigrams("x", "peter").unwrap());
        let plan = BandPlan {
            b: 14,
            r: 9,
            num_perm: 128,
            fp_weight: 0.5,
            fn_weight: 0.5,
        };
        let keys = lsh_keys(&sig, &plan).unwrap();
        assert_eq!(keys.len(), 14);
        assert!(keys.iter().all(|k| k.len() == 20));
        assert!(keys[13].starts_with("000d"));
    }

    #[test]
    fn inverted_index_deduplicates_ids() {
        let keys = vec![
            vec!["a".to_string(), "b".to_string(), "a".to_string()],
            vec!["b".to_string()],
        ];
        let idx = inverted_index(&keys);
        assert_eq!(idx["a"], vec![0]);
        assert_eq!(idx["b"], vec![0, 1]);
    }
}
