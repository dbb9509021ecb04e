//! Reading and writing the plain-text artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use iqp_core::bits::{format_bits, parse_bits};
use iqp_core::controller::ControllerBundle;
use iqp_core::datasets::BitstringDataset;
use iqp_core::{combine_direct, IqpCircuit};

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn read_dataset(path: &Path) -> Result<BitstringDataset> {
    BitstringDataset::from_text(&read(path)?).with_context(|| format!("invalid dataset {}", path.display()))
}

pub fn read_circuit(path: &Path) -> Result<IqpCircuit> {
    IqpCircuit::from_text(&read(path)?).with_context(|| format!("invalid circuit {}", path.display()))
}

pub fn read_controller(path: &Path) -> Result<ControllerBundle> {
    ControllerBundle::from_text(&read(path)?).with_context(|| format!("invalid controller {}", path.display()))
}

/// The circuit at `path`, with the controller at `ctrl` merged in if given.
pub fn read_model(path: &Path, ctrl: Option<&Path>) -> Result<IqpCircuit> {
    let base = read_circuit(path)?;
    match ctrl {
        None => Ok(base),
        Some(p) => Ok(combine_direct(&base, &read_controller(p)?.circuit)?),
    }
}

/// Bitstrings from either a dataset file or a plain one-per-line sample file.
/// Returns the common length and the samples.
pub fn read_bitstrings(path: &Path) -> Result<(usize, Vec<u64>)> {
    let text = read(path)?;
    if text.trim_start().starts_with("bits") {
        let d = BitstringDataset::from_text(&text).with_context(|| format!("invalid dataset {}", path.display()))?;
        return Ok((d.n(), d.samples().to_vec()));
    }
    let mut n = None;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if *n.get_or_insert(line.len()) != line.len() {
            bail!("{}:{}: bitstring length differs from the first line", path.display(), i + 1);
        }
        out.push(parse_bits(line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    match n {
        Some(n) => Ok((n, out)),
        None => bail!("{} contains no bitstrings", path.display()),
    }
}

pub fn samples_text(samples: &[u64], n: usize) -> String {
    let mut out = String::with_capacity(samples.len() * (n + 1));
    for &x in samples {
        out.push_str(&format_bits(x, n));
        out.push('\n');
    }
    out
}

/// `bitstring,count`, sorted by bitstring.
pub fn counts_csv(samples: &[u64], n: usize) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &x in samples {
        *counts.entry(format_bits(x, n)).or_default() += 1;
    }
    let mut out = String::from("bitstring,count\n");
    for (b, c) in counts {
        out.push_str(&format!("{b},{c}\n"));
    }
    out
}

pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|t| t.trim().parse().with_context(|| format!("not a count: {t:?}"))).collect()
}
