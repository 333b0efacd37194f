//! The linkage protocol between two data owners (P1, P2) and a computation
//! host (P3).
//!
//! Stages, in order: owners encode and block their data; the host receives
//! encrypted records and blocks; shared blocking keys are merged into a
//! private candidate matrix; the matrix is obfuscated with random true
//! cells and opened to the host; the host evaluates the Jaccard decision on
//! every opened cell; the result is masked by the candidate matrix and
//! decrypted by the owners.

pub mod oracle;
pub mod transport;

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocking::{build_blocks, OwnerBundle};
use crate::error::{Error, Result};
use crate::intersect::{auto_strategy, jaccard_match, IntersectStrategy, JaccardParams, StrategyChoice};
use crate::machine::{AuthorityScope, Machine, Observation, PartyRole, PrivateMatrix, PrivateScalar, PrivateVector};
use crate::mpc::RoundStats;
use crate::trace::{CostWeights, OpCostLedger, Stage};

/// Equality offset used on approximate backends during linkage.
pub const PIPELINE_XI: f64 = 1e-9;
/// Distance from 0 or 1 within which a decrypted approximate bit is accepted.
pub const BIT_TOLERANCE: f64 = 0.25;
pub const DEFAULT_RHO: f64 = 0.05;

/// Who draws the obfuscation noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseSource {
    /// The host draws noise itself. It then knows which opened cells are
    /// noise, so this hides nothing from the host.
    Host,
    /// A data owner pre-generates and encrypts the noise matrix.
    Owner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationPolicy {
    pub rho: f64,
    pub source: NoiseSource,
    pub seed: u64,
}

impl Default for ObfuscationPolicy {
    fn default() -> Self {
        ObfuscationPolicy {
            rho: DEFAULT_RHO,
            source: NoiseSource::Owner,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub jaccard: JaccardParams,
    pub strategy: StrategyChoice,
    pub obfuscation: ObfuscationPolicy,
    /// Parallel contexts for the filtering stage, when the backend can fork.
    pub jobs: usize,
    pub weights: CostWeights,
    /// Equality offset on approximate backends.
    pub xi: f64,
}

impl PipelineConfig {
    pub fn new(jaccard: JaccardParams) -> Self {
        PipelineConfig {
            jaccard,
            strategy: StrategyChoice::Auto,
            obfuscation: ObfuscationPolicy::default(),
            jobs: 1,
            weights: CostWeights::default(),
            xi: PIPELINE_XI,
        }
    }
}

/// Uploaded, encrypted data of one owner as held by the host.
#[derive(Debug, Clone)]
pub struct Upload {
    pub party: PartyRole,
    pub records: Vec<PrivateVector>,
    pub blocks: BTreeMap<String, PrivateVector>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LinkReport {
    /// Matched `(id1, id2)` pairs, sorted.
    pub pairs: Vec<(String, String)>,
    /// Cells the host opened as candidates (true or noise).
    pub opened_cells: usize,
    /// Jaccard evaluations performed.
    pub evaluations: usize,
    /// Strategy used, with the number of pairs it handled.
    pub strategies: BTreeMap<String, usize>,
    #[serde(skip)]
    pub ledger: OpCostLedger,
    #[serde(skip)]
    pub round_stats: Option<RoundStats>,
    #[serde(skip)]
    pub timings: Vec<(Stage, Duration)>,
}

fn staged<T>(stage: Stage, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.at_stage(stage))
}

/// Encrypts one owner's bundle and hands it to the host, which observes the
/// public metadata.
pub fn upload(m: &mut Machine, party: PartyRole, bundle: &OwnerBundle) -> Result<Upload> {
    let records = bundle
        .encoded
        .iter()
        .map(|e| m.enc_vec(&e.containers))
        .collect::<Result<Vec<_>>>()?;
    let blocks = build_blocks(m, &bundle.blocks)?;
    m.observe(Observation::DatasetSize {
        party,
        records: records.len(),
    });
    for (index, r) in records.iter().enumerate() {
        m.observe(Observation::RecordSize {
            party,
            index,
            containers: r.len(),
        });
    }
    for (key, ids) in &blocks {
        m.observe(Observation::BlockKey {
            party,
            key: key.clone(),
        });
        m.observe(Observation::BlockSize {
            party,
            key: key.clone(),
            ids: ids.len(),
        });
    }
    Ok(Upload {
        party,
        records,
        blocks,
    })
}

/// Private candidate matrix: for every key present in both block maps,
/// every cross pair of its ids is set true.
pub fn merge_dedup(
    m: &mut Machine,
    b1: &BTreeMap<String, PrivateVector>,
    b2: &BTreeMap<String, PrivateVector>,
    rows: usize,
    cols: usize,
) -> Result<PrivateMatrix> {
    let mut cand = m.enc_bool_matrix(rows, cols, &vec![false; rows * cols])?;
    if rows == 0 || cols == 0 {
        return Ok(cand);
    }
    let truth = m.enc_scalar(1)?;
    for (key, ids1) in b1 {
        let Some(ids2) = b2.get(key) else { continue };
        if ids1.is_empty() || ids2.is_empty() {
            continue;
        }
        let firsts = lookups(m, ids1)?;
        let seconds = lookups(m, ids2)?;
        for id1 in &firsts {
            for id2 in &seconds {
                cand = m.matrix_update(&cand, id1, id2, &truth)?;
            }
        }
    }
    Ok(cand)
}

/// Reads every id of a block vector. Exact domains use private lookups. On
/// approximate domains a lookup's result carries about `n·ξ` of error from
/// the equality mask, which breaks the next equality test in the matrix
/// update, so the ids are read with exact slot extraction at the same
/// public positions instead.
fn lookups(m: &mut Machine, ids: &PrivateVector) -> Result<Vec<PrivateScalar>> {
    let exact = m.domain().is_exact();
    (0..ids.len())
        .map(|i| {
            if exact {
                let idx = m.enc_scalar(i as i64)?;
                m.vector_lookup(ids, &idx)
            } else {
                m.element(ids, i)
            }
        })
        .collect()
}

/// Adds random true cells (rate `rho`) and opens the result to the host.
pub fn obfuscate(m: &mut Machine, cand: &PrivateMatrix, policy: &ObfuscationPolicy) -> Result<Vec<bool>> {
    let (rows, cols) = (cand.rows(), cand.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ 0x6e_6f69_7365);
    let noise: Vec<bool> = (0..rows * cols).map(|_| rng.gen_bool(policy.rho.clamp(0.0, 1.0))).collect();
    let noise = m.enc_bool_matrix(rows, cols, &noise)?;
    // cand OR noise
    let both = m.emul(cand, &noise)?;
    let sum = m.eadd(cand, &noise)?;
    let obfu = m.esub(&sum, &both)?;
    let host = m.grant(PartyRole::P3, AuthorityScope::ObfuscatedPairs)?;
    let opened = m.dec_bits(&obfu, &host, BIT_TOLERANCE);
    m.revoke(&host);
    opened
}

/// Jaccard decisions for every opened cell; all other cells hold 0.
pub fn filter_er(
    m: &mut Machine,
    d1: &[PrivateVector],
    d2: &[PrivateVector],
    opened: &[bool],
    config: &PipelineConfig,
    report: &mut LinkReport,
) -> Result<PrivateMatrix> {
    let (rows, cols) = (d1.len(), d2.len());
    let cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .filter(|&(i, j)| opened[i * cols + j])
        .collect();
    let mut plan = Vec::with_capacity(cells.len());
    let mut cache: HashMap<(usize, usize), IntersectStrategy> = HashMap::new();
    for &(i, j) in &cells {
        let key = (d1[i].len(), d2[j].len());
        let s = match config.strategy {
            StrategyChoice::Fixed(s) => s,
            StrategyChoice::Auto => match cache.get(&key) {
                Some(&s) => s,
                None => {
                    let s = auto_strategy(m.capabilities(), m.domain(), key.0, key.1, &config.weights)?;
                    cache.insert(key, s);
                    s
                }
            },
        };
        if let Some(capability) = s.missing(&m.capabilities()) {
            return Err(Error::Unsupported {
                backend: format!("{}/{}", m.kind(), m.profile()),
                capability,
            });
        }
        *report.strategies.entry(s.name().to_string()).or_default() += 1;
        plan.push(s);
    }
    report.evaluations = cells.len();

    let jobs = config.jobs.max(1);
    let results: Vec<PrivateScalar> = if jobs > 1 && cells.len() > 1 && m.can_fork() {
        parallel_matches(m, d1, d2, &cells, &plan, config, jobs)?
    } else {
        cells
            .iter()
            .zip(&plan)
            .map(|(&(i, j), &s)| jaccard_match(m, &d1[i], &d2[j], &config.jaccard, s))
            .collect::<Result<_>>()?
    };
    let placed: Vec<(usize, usize, PrivateScalar)> = cells
        .iter()
        .zip(results)
        .map(|(&(i, j), r)| (i, j, r))
        .collect();
    m.assemble_matrix(rows, cols, &placed, 0)
}

fn parallel_matches(
    m: &mut Machine,
    d1: &[PrivateVector],
    d2: &[PrivateVector],
    cells: &[(usize, usize)],
    plan: &[IntersectStrategy],
    config: &PipelineConfig,
    jobs: usize,
) -> Result<Vec<PrivateScalar>> {
    let mut forks: Vec<Machine> = (0..jobs)
        .map(|_| m.fork().ok_or_else(|| Error::invalid("backend stopped supporting forks")))
        .collect::<Result<_>>()?;
    let outcomes: Vec<Result<Vec<(usize, PrivateScalar)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = forks
            .iter_mut()
            .enumerate()
            .map(|(w, fork)| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for k in (w..cells.len()).step_by(jobs) {
                        let (i, j) = cells[k];
                        out.push((k, jaccard_match(fork, &d1[i], &d2[j], &config.jaccard, plan[k])?));
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::invalid("worker panicked"))))
            .collect()
    });
    let mut slots: Vec<Option<PrivateScalar>> = vec![None; cells.len()];
    for (fork, outcome) in forks.iter_mut().zip(outcomes) {
        for (k, v) in outcome? {
            slots[k] = Some(m.absorb(fork, &v)?);
        }
    }
    for fork in forks {
        m.join_fork(fork);
    }
    slots
        .into_iter()
        .map(|s| s.ok_or_else(|| Error::invalid("missing parallel result")))
        .collect()
}

/// Keeps results only where the candidate matrix is true.
pub fn finalize(m: &mut Machine, cand: &PrivateMatrix, results: &PrivateMatrix) -> Result<PrivateMatrix> {
    let (rows, cols) = (cand.rows(), cand.cols());
    let dummies = m.enc_bool_matrix(rows, cols, &vec![false; rows * cols])?;
    m.choose_mat(cand, results, &dummies)
}

/// Runs all stages on encoded data and returns the decrypted matches.
pub fn link_encoded(
    m: &mut Machine,
    owner1: &OwnerBundle,
    owner2: &OwnerBundle,
    config: &PipelineConfig,
) -> Result<LinkReport> {
    if !m.domain().is_exact() {
        m.set_xi(config.xi)?;
    }
    if let StrategyChoice::Fixed(s) = config.strategy {
        if let Some(capability) = s.missing(&m.capabilities()) {
            return Err(Error::Unsupported {
                backend: format!("{}/{}", m.kind(), m.profile()),
                capability,
            }
            .at_stage(Stage::FilterEr));
        }
    }
    let mut report = LinkReport::default();
    let mut clock = Instant::now();
    let mut lap = |stage: Stage, report: &mut LinkReport| {
        report.timings.push((stage, clock.elapsed()));
        clock = Instant::now();
    };

    m.set_stage(Stage::Upload);
    let up1 = staged(Stage::Upload, upload(m, PartyRole::P1, owner1))?;
    let up2 = staged(Stage::Upload, upload(m, PartyRole::P2, owner2))?;
    lap(Stage::Upload, &mut report);
    let (rows, cols) = (up1.records.len(), up2.records.len());

    m.set_stage(Stage::MergeDedup);
    let cand = staged(Stage::MergeDedup, merge_dedup(m, &up1.blocks, &up2.blocks, rows, cols))?;
    lap(Stage::MergeDedup, &mut report);

    m.set_stage(Stage::Obfuscate);
    let opened = staged(Stage::Obfuscate, obfuscate(m, &cand, &config.obfuscation))?;
    report.opened_cells = opened.iter().filter(|&&b| b).count();
    lap(Stage::Obfuscate, &mut report);

    m.set_stage(Stage::FilterEr);
    let results = staged(
        Stage::FilterEr,
        filter_er(m, &up1.records, &up2.records, &opened, config, &mut report),
    )?;
    lap(Stage::FilterEr, &mut report);

    m.set_stage(Stage::Finalize);
    let matches = staged(Stage::Finalize, finalize(m, &cand, &results))?;
    let owner = staged(Stage::Finalize, m.grant(PartyRole::P1, AuthorityScope::Joint))?;
    let bits = staged(Stage::Finalize, m.dec_bits(&matches, &owner, BIT_TOLERANCE))?;
    m.revoke(&owner);
    lap(Stage::Finalize, &mut report);
    m.set_stage(Stage::Adhoc);

    let mut pairs: Vec<(String, String)> = bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(k, _)| (owner1.encoded[k / cols].id.clone(), owner2.encoded[k % cols].id.clone()))
        .collect();
    pairs.sort();
    report.pairs = pairs;
    report.ledger = m.ledger().clone();
    report.round_stats = m.round_stats();
    Ok(report)
}

/// Owner-side preparation followed by [`link_encoded`]; the preparation time
/// is reported as the encode/block stage.
pub fn run_pper(
    m: &mut Machine,
    d1: &[crate::blocking::Record],
    d2: &[crate::blocking::Record],
    blocking: &crate::blocking::BlockingConfig,
    config: &PipelineConfig,
) -> Result<LinkReport> {
    let start = Instant::now();
    m.set_stage(Stage::EncodeBlock);
    let plan = staged(Stage::EncodeBlock, blocking.plan())?;
    let o1 = staged(Stage::EncodeBlock, crate::blocking::prepare_with_plan(d1, blocking, plan))?;
    let o2 = staged(Stage::EncodeBlock, crate::blocking::prepare_with_plan(d2, blocking, plan))?;
    let prep = start.elapsed();
    let mut report = link_encoded(m, &o1, &o2, config)?;
    report.timings.insert(0, (Stage::EncodeBlock, prep));
    Ok(report)
}

/// Matched pairs as `id1,id2` lines.
pub fn pairs_to_csv(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(a, b)| format!("{a},{b}\n")).collect()
}
