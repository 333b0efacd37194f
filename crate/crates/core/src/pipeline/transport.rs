//! Per-party transport directory.
//!
//! - `records.enc`: one JSON line per record, `{"index": i, "containers": [..]}`
//! - `blocks.enc`: one JSON line per blocking key, `{"key": k, "ids": [..]}`
//! - `manifest`: `key=value` lines with sizes and negotiated parameters
//! - `ids.map`: `index,id` lines; stays with the owning party
//!
//! The `.enc` files carry the owner's encoded containers and index vectors;
//! encryption happens when they are uploaded into a machine.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blocking::{BandPlan, EncodedRecord, InvertedIndex, OwnerBundle};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct RecordLine {
    index: usize,
    containers: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct BlockLine {
    key: String,
    ids: Vec<usize>,
}

pub type Manifest = BTreeMap<String, String>;

pub fn parse_key_values(text: &str) -> Result<Manifest> {
    let mut out = Manifest::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn render_key_values(map: &Manifest) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn get<T: std::str::FromStr>(m: &Manifest, key: &str) -> Result<T> {
    m.get(key)
        .ok_or_else(|| Error::Config(format!("manifest lacks `{key}`")))?
        .parse()
        .map_err(|_| Error::Config(format!("manifest value for `{key}` is malformed")))
}

/// Writes a party directory. `extra` entries are added to the manifest.
pub fn write_party_dir(dir: &Path, party: &str, bundle: &OwnerBundle, extra: &Manifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut rec = BufWriter::new(fs::File::create(dir.join("records.enc"))?);
    let mut ids = BufWriter::new(fs::File::create(dir.join("ids.map"))?);
    for (index, e) in bundle.encoded.iter().enumerate() {
        let line = RecordLine {
            index,
            containers: e.containers.clone(),
        };
        serde_json::to_writer(&mut rec, &line)?;
        rec.write_all(b"\n")?;
        writeln!(ids, "{index},{}", e.id)?;
    }
    rec.flush()?;
    ids.flush()?;
    let mut blk = BufWriter::new(fs::File::create(dir.join("blocks.enc"))?);
    for (key, ids) in &bundle.blocks {
        serde_json::to_writer(&mut blk, &BlockLine { key: key.clone(), ids: ids.clone() })?;
        blk.write_all(b"\n")?;
    }
    blk.flush()?;

    let mut manifest = extra.clone();
    let pack = bundle.encoded.first().map_or(1, |e| e.pack);
    for (k, v) in [
        ("party", party.to_string()),
        ("records", bundle.encoded.len().to_string()),
        ("blocks", bundle.blocks.len().to_string()),
        ("pack", pack.to_string()),
        ("bands", bundle.plan.b.to_string()),
        ("rows", bundle.plan.r.to_string()),
        ("num_perm", bundle.plan.num_perm.to_string()),
        ("fp_weight", bundle.plan.fp_weight.to_string()),
        ("fn_weight", bundle.plan.fn_weight.to_string()),
    ] {
        manifest.insert(k.to_string(), v);
    }
    fs::write(dir.join("manifest"), render_key_values(&manifest))?;
    Ok(())
}

/// Reads a party directory back into a bundle plus its manifest.
pub fn read_party_dir(dir: &Path) -> Result<(OwnerBundle, Manifest)> {
    let manifest = parse_key_values(&fs::read_to_string(dir.join("manifest"))?)?;
    let pack: usize = get(&manifest, "pack")?;
    let plan = BandPlan {
        b: get(&manifest, "bands")?,
        r: get(&manifest, "rows")?,
        num_perm: get(&manifest, "num_perm")?,
        fp_weight: get(&manifest, "fp_weight")?,
        fn_weight: get(&manifest, "fn_weight")?,
    };
    let mut names = BTreeMap::new();
    for line in BufReader::new(fs::File::open(dir.join("ids.map"))?).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (i, id) = line
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("malformed ids.map line `{line}`")))?;
        let i: usize = i.parse().map_err(|_| Error::invalid(format!("bad index `{i}`")))?;
        names.insert(i, id.to_string());
    }
    let mut encoded = Vec::new();
    for (n, line) in BufReader::new(fs::File::open(dir.join("records.enc"))?).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let r: RecordLine = serde_json::from_str(&line)?;
        if r.index != n {
            return Err(Error::invalid(format!("records.enc out of order at line {}", n + 1)));
        }
        let id = names
            .get(&r.index)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("no id for record {}", r.index)))?;
        encoded.push(EncodedRecord {
            id,
            containers: r.containers,
            pack,
        });
    }
    let mut blocks = InvertedIndex::new();
    for line in BufReader::new(fs::File::open(dir.join("blocks.enc"))?).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let b: BlockLine = serde_json::from_str(&line)?;
        if b.key.len() != 20 || !b.key.bytes().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::invalid(format!("malformed blocking key `{}`", b.key)));
        }
        if let Some(&bad) = b.ids.iter().find(|&&i| i >= encoded.len()) {
            return Err(Error::invalid(format!("block `{}` names record {bad} out of range", b.key)));
        }
        blocks.insert(b.key, b.ids);
    }
    Ok((OwnerBundle { encoded, blocks, plan }, manifest))
}
