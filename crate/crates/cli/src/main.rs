//! `pper`: generate corpora, block, link privately, benchmark and evaluate.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pper_core::backend::{make_backend, BackendKind, Profile};
use pper_core::blocking::{prepare, prepare_with_plan, read_records, write_records, OwnerBundle, Record};
use pper_core::config::RunConfig;
use pper_core::evalkit::{
    compute_metrics, expected_performance_sweep, Dataset, GoldStandard, generate_dataset, metrics_csv, read_pairs, write_gold, SweepRow,
};
use pper_core::intersect::{IntersectStrategy, StrategyChoice};
use pper_core::machine::Machine;
use pper_core::pipeline::transport::{read_party_dir, render_key_values, write_party_dir, Manifest};
use pper_core::pipeline::{link_encoded, oracle, pairs_to_csv, LinkReport};
use pper_core::trace::Stage;

#[derive(Parser)]
#[command(name = "pper", version, about = "Private entity resolution over an oblivious machine")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

/// Flags override values read from `--config`.
#[derive(Args)]
struct Overrides {
    /// Flat key=value run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["clear", "sim", "oblivious-sim", "mpc"])]
    backend: Option<String>,
    #[arg(long, global = true, value_parser = ["generic", "simd", "sharemind"])]
    profile: Option<String>,
    #[arg(long, global = true, value_parser = ["pj", "vr", "ve", "so", "mj", "auto"])]
    isect: Option<String>,
    /// Match threshold as P/Q or a decimal.
    #[arg(long, global = true)]
    t_jaccard: Option<String>,
    /// Blocking threshold.
    #[arg(long, global = true)]
    t_block: Option<f64>,
    /// Obfuscation noise probability.
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true, value_parser = ["1", "4"])]
    pack: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    latency_us: Option<u64>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Any other config entry, as key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-party corpus and its gold standard.
    Generate,
    /// Tokenize, encode and block both parties' records.
    Block,
    /// Run the private linkage on the blocked parties.
    Link,
    /// Cost tables across strategies, backends and blocking thresholds.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
        thresholds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "pj,vr,ve,so,mj")]
        strategies: Vec<String>,
        /// Backends as `clear`, `mpc` or `sim:<profile>`.
        #[arg(long, value_delimiter = ',', default_value = "clear,sim:generic,sim:simd,sim:sharemind")]
        backends: Vec<String>,
    },
    /// Quality metrics of the last link plus a cleartext threshold sweep.
    Eval {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        thresholds: Vec<f64>,
    },
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            c.merge_text(&text)?;
        }
        let flags: [(&str, Option<String>); 12] = [
            ("backend", self.backend.clone()),
            ("profile", self.profile.clone()),
            ("isect", self.isect.clone()),
            ("t_jaccard", self.t_jaccard.clone()),
            ("t_block", self.t_block.map(|v| v.to_string())),
            ("rho", self.rho.map(|v| v.to_string())),
            ("pack", self.pack.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("jobs", self.jobs.map(|v| v.to_string())),
            ("latency_us", self.latency_us.map(|v| v.to_string())),
            ("data_dir", self.data_dir.as_ref().map(|p| p.display().to_string())),
            ("out_dir", self.out_dir.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
            c.set(k.trim(), v)?;
        }
        Ok(c)
    }
}

fn write_config(dir: &Path, name: &str, config: &RunConfig) -> Result<()> {
    fs::write(dir.join(format!("{name}.conf")), config.render())?;
    Ok(())
}

fn load_records(path: &Path) -> Result<Vec<Record>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_records(BufReader::new(file))?)
}

fn save_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_records(&mut w, records)?;
    Ok(())
}

fn load_pairs(path: &Path) -> Result<BTreeSet<(String, String)>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_pairs(BufReader::new(file))?)
}

fn load_parties(config: &RunConfig) -> Result<(OwnerBundle, OwnerBundle)> {
    let (o1, m1) = read_party_dir(&config.data_dir.join("p1")).context("reading party p1")?;
    let (o2, m2) = read_party_dir(&config.data_dir.join("p2")).context("reading party p2")?;
    if o1.plan != o2.plan {
        bail!("parties disagree on the band plan");
    }
    for key in ["pack", "minhash_seed", "t_block"] {
        if m1.get(key) != m2.get(key) {
            bail!("parties disagree on `{key}`");
        }
    }
    Ok((o1, o2))
}

fn machine_for(config: &RunConfig, kind: BackendKind, profile: Profile) -> Result<Machine> {
    let backend = make_backend(kind, profile, config.seed, config.latency())?;
    Ok(Machine::new(backend, config.seed))
}

fn generate(config: &RunConfig) -> Result<()> {
    let ds = generate_dataset(config.seed, config.size, config.d1_size, &config.corruption())?;
    fs::create_dir_all(&config.data_dir)?;
    save_records(&config.data_dir.join("d1.jsonl"), &ds.d1)?;
    save_records(&config.data_dir.join("d2.jsonl"), &ds.d2)?;
    let mut gold = BufWriter::new(fs::File::create(config.data_dir.join("gold.csv"))?);
    write_gold(&mut gold, &ds.gold)?;
    write_config(&config.data_dir, "generate", config)?;
    println!(
        "generated {} + {} records, {} true pairs in {}",
        ds.d1.len(),
        ds.d2.len(),
        ds.gold.len(),
        config.data_dir.display()
    );
    Ok(())
}

fn block(config: &RunConfig) -> Result<()> {
    let d1 = load_records(&config.data_dir.join("d1.jsonl"))?;
    let d2 = load_records(&config.data_dir.join("d2.jsonl"))?;
    let blocking = config.blocking();
    let plan = blocking.plan()?;
    let o1 = prepare_with_plan(&d1, &blocking, plan).map_err(|e| e.at_stage(Stage::EncodeBlock))?;
    let o2 = prepare_with_plan(&d2, &blocking, plan).map_err(|e| e.at_stage(Stage::EncodeBlock))?;
    let mut extra = Manifest::new();
    extra.insert("t_block".into(), config.t_block.to_string());
    extra.insert("minhash_seed".into(), config.minhash_seed.to_string());
    write_party_dir(&config.data_dir.join("p1"), "p1", &o1, &extra)?;
    write_party_dir(&config.data_dir.join("p2"), "p2", &o2, &extra)?;
    write_config(&config.data_dir, "block", config)?;
    println!(
        "blocked with b={} r={}: {} and {} keys, {} candidate pairs",
        plan.b,
        plan.r,
        o1.blocks.len(),
        o2.blocks.len(),
        oracle::candidate_pairs(&o1.blocks, &o2.blocks).len()
    );
    Ok(())
}

fn summary(config: &RunConfig, report: &LinkReport) -> String {
    let mut m = Manifest::new();
    m.insert("backend".into(), config.backend.to_string());
    m.insert("profile".into(), config.profile.to_string());
    m.insert("matches".into(), report.pairs.len().to_string());
    m.insert("opened_cells".into(), report.opened_cells.to_string());
    m.insert("evaluations".into(), report.evaluations.to_string());
    for (s, n) in &report.strategies {
        m.insert(format!("strategy.{s}"), n.to_string());
    }
    render_key_values(&m)
}

fn link(config: &RunConfig) -> Result<()> {
    let (o1, o2) = load_parties(config)?;
    let mut m = config.machine()?;
    let report = link_encoded(&mut m, &o1, &o2, &config.pipeline())?;
    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    fs::write(out.join("matches.csv"), pairs_to_csv(&report.pairs))?;
    fs::write(out.join("ledger.csv"), report.ledger.to_csv())?;
    if let Some(rs) = &report.round_stats {
        fs::write(out.join("rounds.csv"), rs.to_csv())?;
    }
    fs::write(out.join("link.summary"), summary(config, &report))?;
    write_config(out, "link", config)?;
    for (stage, t) in &report.timings {
        eprintln!("{stage}: {:.3} ms", t.as_secs_f64() * 1e3);
    }
    println!("{} matches written to {}", report.pairs.len(), out.join("matches.csv").display());
    Ok(())
}

fn eval(config: &RunConfig, thresholds: &[f64]) -> Result<()> {
    let gold = load_pairs(&config.data_dir.join("gold.csv"))?;
    let (o1, o2) = load_parties(config)?;
    let matched = load_pairs(&config.out_dir.join("matches.csv"))?;
    let blocked: BTreeSet<_> = oracle::blocked_pairs(&o1, &o2).into_iter().collect();
    let total = o1.encoded.len() * o2.encoded.len();
    let report = compute_metrics(&gold, &blocked, &matched, total)?;
    let expected: BTreeSet<_> = oracle::link(&o1, &o2, config.t_jaccard).into_iter().collect();
    let row = SweepRow {
        threshold: config.t_block,
        b: o1.plan.b,
        r: o1.plan.r,
        metrics: report.clone(),
    };
    fs::write(config.out_dir.join("metrics.csv"), metrics_csv(&[row]))?;

    let d1 = load_records(&config.data_dir.join("d1.jsonl"))?;
    let d2 = load_records(&config.data_dir.join("d2.jsonl"))?;
    let ds = Dataset {
        d1,
        d2,
        gold: GoldStandard { pairs: gold },
        lineage: Default::default(),
        modifications: Default::default(),
    };
    let sweep = expected_performance_sweep(&ds, &config.blocking(), thresholds)?;
    fs::write(config.out_dir.join("sweep.csv"), metrics_csv(&sweep))?;
    write_config(&config.out_dir, "eval", config)?;
    println!(
        "pc={:.4} rr={:.4} f={:.4} precision={:.4} recall={:.4} oracle_agrees={}",
        report.pc,
        report.rr,
        report.f_score,
        report.precision,
        report.recall,
        matched == expected
    );
    Ok(())
}

fn parse_backend(spec: &str) -> Result<(BackendKind, Profile)> {
    let (kind, profile) = spec.split_once(':').unwrap_or((spec, "generic"));
    Ok((kind.parse()?, profile.parse()?))
}

const BENCH_HEADER: &str = "threshold,backend,profile,strategy,b,r,candidate_pairs,opened_cells,evaluations,matches,ledger_total,filter_cost_per_pair,rounds,messages,bytes,status\n";

fn bench(config: &RunConfig, thresholds: &[f64], strategies: &[String], backends: &[String]) -> Result<()> {
    let d1 = load_records(&config.data_dir.join("d1.jsonl"))?;
    let d2 = load_records(&config.data_dir.join("d2.jsonl"))?;
    let strategies: Vec<IntersectStrategy> = strategies.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let backends: Vec<(BackendKind, Profile)> = backends.iter().map(|b| parse_backend(b)).collect::<Result<_>>()?;
    let mut out = String::from(BENCH_HEADER);
    for &t in thresholds {
        let mut blocking = config.blocking();
        blocking.threshold = t;
        let o1 = prepare(&d1, &blocking)?;
        let o2 = prepare(&d2, &blocking)?;
        let cands = oracle::candidate_pairs(&o1.blocks, &o2.blocks).len();
        for &(kind, profile) in &backends {
            let profile_name = if kind == BackendKind::ObliviousSim { profile.name() } else { "-" };
            for &s in &strategies {
                let mut pipeline = config.pipeline();
                pipeline.strategy = StrategyChoice::Fixed(s);
                let prefix = format!("{t},{kind},{profile_name},{s},{},{},{cands}", o1.plan.b, o1.plan.r);
                let mut m = machine_for(config, kind, profile)?;
                if let Some(missing) = s.missing(&m.capabilities()) {
                    out.push_str(&format!("{prefix},,,,,,,,,unsupported: {missing}\n"));
                    continue;
                }
                match link_encoded(&mut m, &o1, &o2, &pipeline) {
                    Ok(r) => {
                        let filter = r.ledger.stage_total(Stage::FilterEr, &pipeline.weights);
                        let per_pair = if r.evaluations == 0 { 0.0 } else { filter / r.evaluations as f64 };
                        let (rounds, msgs, bytes) = r
                            .round_stats
                            .as_ref()
                            .map(|rs| (rs.total.rounds.to_string(), rs.total.messages.to_string(), rs.total.bytes.to_string()))
                            .unwrap_or_default();
                        out.push_str(&format!(
                            "{prefix},{},{},{},{},{per_pair:.1},{rounds},{msgs},{bytes},ok\n",
                            r.opened_cells,
                            r.evaluations,
                            r.pairs.len(),
                            r.ledger.total(&pipeline.weights),
                        ));
                    }
                    Err(e) => {
                        let msg = e.to_string().replace(',', ";");
                        out.push_str(&format!("{prefix},,,,,,,,,error: {msg}\n"));
                    }
                }
            }
        }
    }
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("bench.csv"), &out)?;
    write_config(&config.out_dir, "bench", config)?;
    print!("{out}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.opts.resolve()?;
    match cli.cmd {
        Command::Generate => generate(&config),
        Command::Block => block(&config),
        Command::Link => link(&config),
        Command::Bench {
            thresholds,
            strategies,
            backends,
        } => bench(&config, &thresholds, &strategies, &backends),
        Command::Eval { thresholds } => eval(&config, &thresholds),
    }
}

/// The error chain, skipping causes whose text a parent already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
