//! Synthetic census-style corpora with known duplicates, gold standards
//! and linkage quality metrics.

mod corrupt;
mod metrics;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use serde::{Deserialize, Serialize};

use crate::blocking::{Record, DEFAULT_FIELDS};
use crate::error::{Error, Result};

pub use corrupt::{corrupt, Corruption};
pub use metrics::{compute_metrics, expected_performance_sweep, metrics_csv, MetricsReport, SweepRow, METRICS_HEADER};

/// Bounds on how duplicates are derived from originals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionProfile {
    pub max_duplicates: usize,
    pub max_per_field: usize,
    pub max_per_record: usize,
    pub zipf_exponent: f64,
    /// Share of the corpus made of duplicates.
    pub duplicate_fraction: f64,
    /// Relative weights of 1, 2, .. modifications for one duplicate.
    pub modification_weights: Vec<f64>,
    pub kinds: Vec<Corruption>,
}

impl Default for CorruptionProfile {
    fn default() -> Self {
        CorruptionProfile {
            max_duplicates: 5,
            max_per_field: 5,
            max_per_record: 5,
            zipf_exponent: 1.0,
            duplicate_fraction: 0.4,
            modification_weights: vec![0.4, 0.25, 0.15, 0.12, 0.08],
            kinds: Corruption::ALL.to_vec(),
        }
    }
}

impl CorruptionProfile {
    /// Duplicates are exact copies of their originals.
    pub fn clean() -> Self {
        CorruptionProfile {
            max_per_field: 0,
            max_per_record: 0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_duplicates == 0 {
            return Err(Error::Config("max_duplicates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.duplicate_fraction) {
            return Err(Error::Config("duplicate_fraction must lie in [0, 1)".into()));
        }
        if self.max_per_record > 0 && (self.kinds.is_empty() || self.modification_weights.is_empty()) {
            return Err(Error::Config("modifications need kinds and weights".into()));
        }
        Ok(())
    }
}

/// True cross-split pairs `(id in D1, id in D2)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub pairs: BTreeSet<(String, String)>,
}

impl GoldStandard {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, id1: &str, id2: &str) -> bool {
        self.pairs.contains(&(id1.to_string(), id2.to_string()))
    }
}

/// A generated corpus split between two owners.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d1: Vec<Record>,
    pub d2: Vec<Record>,
    pub gold: GoldStandard,
    /// Record id to the original it descends from.
    pub lineage: BTreeMap<String, usize>,
    /// Modifications applied to each duplicate.
    pub modifications: BTreeMap<String, usize>,
}

impl Dataset {
    /// Size of the full comparison space, |D1|·|D2|.
    pub fn total_pairs(&self) -> usize {
        self.d1.len() * self.d2.len()
    }
}

fn original<R: Rng>(rng: &mut R) -> BTreeMap<String, String> {
    let pick = |rng: &mut R, list: &[&str]| list.choose(rng).unwrap().to_string();
    let (state, lo, hi) = *vocab::STATES.choose(rng).unwrap();
    let values = [
        pick(rng, vocab::GIVEN_NAMES),
        pick(rng, vocab::SURNAMES),
        rng.gen_range(1..400u32).to_string(),
        format!("{} {}", pick(rng, vocab::STREETS), pick(rng, vocab::STREET_TYPES)),
        pick(rng, vocab::SUBURBS),
        rng.gen_range(lo..=hi).to_string(),
        state.to_string(),
    ];
    DEFAULT_FIELDS
        .iter()
        .zip(values)
        .map(|(f, v)| (f.to_string(), v))
        .collect()
}

/// Applies between 1 and `max_per_record` modifications, at most
/// `max_per_field` to any one field. Returns the number applied.
fn modify<R: Rng>(fields: &mut BTreeMap<String, String>, profile: &CorruptionProfile, rng: &mut R) -> Result<usize> {
    let cap = profile.max_per_record.min(profile.modification_weights.len());
    if cap == 0 || profile.max_per_field == 0 {
        return Ok(0);
    }
    let weights = WeightedIndex::new(&profile.modification_weights[..cap])
        .map_err(|e| Error::Config(format!("modification weights: {e}")))?;
    let want = weights.sample(rng) + 1;
    let names: Vec<String> = fields.keys().cloned().collect();
    let mut per_field: BTreeMap<String, usize> = BTreeMap::new();
    let mut done = 0;
    while done < want {
        let open: Vec<&String> = names
            .iter()
            .filter(|n| per_field.get(*n).copied().unwrap_or(0) < profile.max_per_field)
            .collect();
        let Some(&name) = open.choose(rng) else { break };
        let kind = *profile.kinds.choose(rng).unwrap();
        let value = fields.get_mut(name).unwrap();
        *value = corrupt(value, kind, rng);
        *per_field.entry(name.clone()).or_default() += 1;
        done += 1;
    }
    Ok(done)
}

/// Generates `size` records, `d1_size` of which go to the first owner.
/// Duplicate counts per original follow a Zipf law truncated at
/// `max_duplicates`; the gold standard holds every cross-split pair of
/// records sharing an original.
pub fn generate_dataset(seed: u64, size: usize, d1_size: usize, profile: &CorruptionProfile) -> Result<Dataset> {
    profile.validate()?;
    if d1_size > size {
        return Err(Error::Config(format!("split {d1_size} exceeds corpus size {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(profile.max_duplicates as u64, profile.zipf_exponent)
        .map_err(|e| Error::Config(format!("zipf: {e}")))?;
    let dup_budget = ((size as f64) * profile.duplicate_fraction).round() as usize;
    let originals = size - dup_budget;

    let mut records = Vec::with_capacity(size);
    let mut lineage = BTreeMap::new();
    let mut modifications = BTreeMap::new();
    let mut bases = Vec::with_capacity(originals);
    for n in 0..originals {
        let fields = original(&mut rng);
        let id = format!("rec-{n}-org");
        lineage.insert(id.clone(), n);
        records.push(Record { id, fields: fields.clone() });
        bases.push(fields);
    }
    let mut remaining = dup_budget;
    let mut n = 0;
    while remaining > 0 {
        let k = (zipf.sample(&mut rng) as usize).min(remaining);
        for d in 0..k {
            let mut fields = bases[n].clone();
            let applied = modify(&mut fields, profile, &mut rng)?;
            let id = format!("rec-{n}-dup-{d}");
            lineage.insert(id.clone(), n);
            modifications.insert(id.clone(), applied);
            records.push(Record { id, fields });
        }
        remaining -= k;
        n = (n + 1) % originals.max(1);
        if originals == 0 {
            return Err(Error::Config("no originals to duplicate".into()));
        }
    }
    records.shuffle(&mut rng);
    let d2 = records.split_off(d1_size);
    let d1 = records;

    let mut gold = GoldStandard::default();
    for a in &d1 {
        for b in &d2 {
            if lineage[&a.id] == lineage[&b.id] {
                gold.pairs.insert((a.id.clone(), b.id.clone()));
            }
        }
    }
    Ok(Dataset {
        d1,
        d2,
        gold,
        lineage,
        modifications,
    })
}

pub fn write_gold(mut writer: impl Write, gold: &GoldStandard) -> Result<()> {
    for (a, b) in &gold.pairs {
        writeln!(writer, "{a},{b}")?;
    }
    Ok(())
}

/// Reads `id1,id2` lines; blank lines are skipped.
pub fn read_pairs(reader: impl BufRead) -> Result<BTreeSet<(String, String)>> {
    let mut out = BTreeSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("pair line {}: expected id1,id2", n + 1)))?;
        out.insert((a.to_string(), b.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_and_ids() {
        let ds = generate_dataset(7, 100, 20, &CorruptionProfile::default()).unwrap();
        assert_eq!(ds.d1.len(), 20);
        assert_eq!(ds.d2.len(), 80);
        assert_eq!(ds.total_pairs(), 1600);
        assert_eq!(ds.lineage.len(), 100);
        assert!(ds.d1.iter().chain(&ds.d2).all(|r| r.id.starts_with("rec-")));
    }

    #[test]
    fn modification_bounds() {
        let profile = CorruptionProfile::default();
        let ds = generate_dataset(3, 400, 100, &profile).unwrap();
        assert!(ds.modifications.values().all(|&m| (1..=5).contains(&m)));
    }

    #[test]
    fn gold_round_trip() {
        let ds = generate_dataset(1, 100, 20, &CorruptionProfile::default()).unwrap();
        let mut buf = Vec::new();
        write_gold(&mut buf, &ds.gold).unwrap();
        assert_eq!(read_pairs(&buf[..]).unwrap(), ds.gold.pairs);
    }
}
