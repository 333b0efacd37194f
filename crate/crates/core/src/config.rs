//! Run configuration as a flat `key=value` file.

use std::path::PathBuf;

use crate::backend::{make_backend, BackendKind, Profile};
use crate::blocking::{BlockingConfig, DEFAULT_FIELDS, DEFAULT_NUM_PERM};
use crate::error::{Error, Result};
use crate::evalkit::CorruptionProfile;
use crate::intersect::{JaccardParams, StrategyChoice, Threshold, DEFAULT_EPSILON};
use crate::machine::Machine;
use crate::mpc::LatencyModel;
use crate::pipeline::transport::{parse_key_values, render_key_values, Manifest};
use crate::pipeline::{NoiseSource, ObfuscationPolicy, PipelineConfig, DEFAULT_RHO, PIPELINE_XI};
use crate::trace::CostWeights;

/// Every parameter a run depends on. Written next to each output so a run
/// can be repeated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub profile: Profile,
    pub isect: StrategyChoice,
    pub t_jaccard: Threshold,
    pub epsilon: f64,
    pub xi: f64,
    pub t_block: f64,
    pub num_perm: usize,
    pub fp_weight: f64,
    pub fn_weight: f64,
    pub pack: usize,
    pub fields: Vec<String>,
    pub rho: f64,
    pub noise_source: NoiseSource,
    pub seed: u64,
    pub minhash_seed: u64,
    pub noise_seed: u64,
    pub latency_us: u64,
    pub jobs: usize,
    pub size: usize,
    pub d1_size: usize,
    pub weights: CostWeights,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendKind::Clear,
            profile: Profile::Generic,
            isect: StrategyChoice::Auto,
            t_jaccard: Threshold::new(1, 2).expect("valid threshold"),
            epsilon: DEFAULT_EPSILON,
            xi: PIPELINE_XI,
            t_block: 0.5,
            num_perm: DEFAULT_NUM_PERM,
            fp_weight: 0.5,
            fn_weight: 0.5,
            pack: 1,
            fields: DEFAULT_FIELDS.iter().map(|s| s.to_string()).collect(),
            rho: DEFAULT_RHO,
            noise_source: NoiseSource::Owner,
            seed: 42,
            minhash_seed: 1,
            noise_seed: 7,
            latency_us: 0,
            jobs: 1,
            size: 100,
            d1_size: 20,
            weights: CostWeights::default(),
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn noise_name(s: NoiseSource) -> &'static str {
    match s {
        NoiseSource::Host => "host",
        NoiseSource::Owner => "owner",
    }
}

impl RunConfig {
    /// Sets one parameter from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "backend" => self.backend = value.parse()?,
            "profile" => self.profile = value.parse()?,
            "isect" => self.isect = value.parse()?,
            "t_jaccard" => self.t_jaccard = value.parse()?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "xi" => self.xi = parse(key, value)?,
            "t_block" => self.t_block = parse(key, value)?,
            "num_perm" => self.num_perm = parse(key, value)?,
            "fp_weight" => self.fp_weight = parse(key, value)?,
            "fn_weight" => self.fn_weight = parse(key, value)?,
            "pack" => self.pack = parse(key, value)?,
            "fields" => {
                self.fields = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "rho" => self.rho = parse(key, value)?,
            "noise_source" => {
                self.noise_source = match value {
                    "host" => NoiseSource::Host,
                    "owner" => NoiseSource::Owner,
                    _ => return Err(Error::Config(format!("unknown noise source `{value}`"))),
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "minhash_seed" => self.minhash_seed = parse(key, value)?,
            "noise_seed" => self.noise_seed = parse(key, value)?,
            "latency_us" => self.latency_us = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "size" => self.size = parse(key, value)?,
            "d1_size" => self.d1_size = parse(key, value)?,
            "weights" => self.weights = CostWeights::parse(value)?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> Manifest {
        let mut m = Manifest::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("backend", self.backend.to_string());
        put("profile", self.profile.to_string());
        put("isect", self.isect.to_string());
        put("t_jaccard", self.t_jaccard.to_string());
        put("epsilon", self.epsilon.to_string());
        put("xi", self.xi.to_string());
        put("t_block", self.t_block.to_string());
        put("num_perm", self.num_perm.to_string());
        put("fp_weight", self.fp_weight.to_string());
        put("fn_weight", self.fn_weight.to_string());
        put("pack", self.pack.to_string());
        put("fields", self.fields.join(","));
        put("rho", self.rho.to_string());
        put("noise_source", noise_name(self.noise_source).to_string());
        put("seed", self.seed.to_string());
        put("minhash_seed", self.minhash_seed.to_string());
        put("noise_seed", self.noise_seed.to_string());
        put("latency_us", self.latency_us.to_string());
        put("jobs", self.jobs.to_string());
        put("size", self.size.to_string());
        put("d1_size", self.d1_size.to_string());
        put("weights", self.weights.render());
        put("data_dir", self.data_dir.display().to_string());
        put("out_dir", self.out_dir.display().to_string());
        m
    }

    pub fn render(&self) -> String {
        render_key_values(&self.to_key_values())
    }

    /// Applies every entry of a `key=value` text on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.merge_text(text)?;
        Ok(c)
    }

    pub fn blocking(&self) -> BlockingConfig {
        BlockingConfig {
            threshold: self.t_block,
            num_perm: self.num_perm,
            fp_weight: self.fp_weight,
            fn_weight: self.fn_weight,
            minhash_seed: self.minhash_seed,
            pack: self.pack,
            fields: self.fields.clone(),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            jaccard: JaccardParams {
                threshold: self.t_jaccard,
                epsilon: self.epsilon,
            },
            strategy: self.isect,
            obfuscation: ObfuscationPolicy {
                rho: self.rho,
                source: self.noise_source,
                seed: self.noise_seed,
            },
            jobs: self.jobs.max(1),
            weights: self.weights.clone(),
            xi: self.xi,
        }
    }

    pub fn corruption(&self) -> CorruptionProfile {
        CorruptionProfile::default()
    }

    pub fn latency(&self) -> LatencyModel {
        LatencyModel::fixed(self.latency_us)
    }

    pub fn machine(&self) -> Result<Machine> {
        let backend = make_backend(self.backend, self.profile, self.seed, self.latency())?;
        Ok(Machine::new(backend, self.seed))
    }
}
