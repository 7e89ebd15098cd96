//! Training-set generation and the binary dataset container.
//!
//! Layout: the magic bytes, a little-endian `u32` header length, a JSON
//! header, then three little-endian `f64` arrays (features `n x 3K`,
//! channel targets `n x 2K`, log-variance targets `n`), all row-major.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::SystemModel;
use crate::error::{Error, Result};
use crate::neural::Dataset;
use crate::rng::Purpose;

pub const DATASET_MAGIC: &[u8; 6] = b"NLMDS\x01";
const CHUNK: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub users: usize,
    pub samples: usize,
    pub endianness: String,
    pub config_hash: String,
}

/// `n` samples, each from a fresh drop, channel draw and antenna index.
///
/// `purpose` separates training from validation streams.
pub fn generate_dataset(sys: &SystemModel, n: usize, purpose: Purpose) -> Result<Dataset> {
    sys.require_third_order("dataset generation")?;
    let k = sys.config.scenario.k;
    let parts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = sys.seeds.stream(purpose, c as u64, 0);
            let mut ds = Dataset::new(k);
            for _ in 0..CHUNK.min(n - c * CHUNK) {
                let setup = sys.sample_setup_with(0, &mut rng)?;
                let m = rng.random_range(0..setup.ls.antennas());
                let (fv, c_row, var) = sys.antenna_sample(&setup, m, &mut rng)?;
                ds.push(&fv.values, &fv.channel_targets(&c_row, setup.ls.sigma2), (var / setup.ls.sigma2).log10());
            }
            Ok(ds)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Dataset::new(k);
    for p in parts {
        out.append(p);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, ds: &Dataset, config_hash: &str) -> Result<()> {
    ds.check()?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let header = DatasetHeader {
        format_version: 1,
        users: ds.users,
        samples: ds.len(),
        endianness: "little".into(),
        config_hash: config_hash.into(),
    };
    let head = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(head.len() as u32).to_le_bytes())?;
    w.write_all(&head)?;
    for v in ds.features.iter().chain(&ds.channel).chain(&ds.log_variance) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Dataset)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || Error::Config(format!("{} is not a dataset file", path.display()));
    if bytes.len() < 10 || &bytes[..6] != DATASET_MAGIC {
        return Err(bad());
    }
    let hlen = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let header: DatasetHeader = serde_json::from_slice(bytes.get(10..10 + hlen).ok_or_else(bad)?)?;
    let (n, k) = (header.samples, header.users);
    let body = &bytes[10 + hlen..];
    if body.len() != 8 * n * (5 * k + 1) {
        return Err(bad());
    }
    let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (f, rest) = vals.split_at(3 * k * n);
    let (ch, lv) = rest.split_at(2 * k * n);
    let ds = Dataset { users: k, features: f.to_vec(), channel: ch.to_vec(), log_variance: lv.to_vec() };
    Ok((header, ds))
}
