//! Checkpoint container: a plain-text header followed by raw tensors.
//!
//! ```text
//! decompkan-checkpoint
//! format_version 1
//! config {"lookback":336,...}
//! tensors 41
//! tensor adaptive.stats_in.weight 32 336
//! ...
//! end_header
//! <little-endian f64 values of every tensor, in manifest order>
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::config::{count_params, ModelConfig};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::nn::Parameters;

const MAGIC: &str = "decompkan-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_checkpoint(mut w: impl Write, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    let tensors = params.named_tensors();
    let mut header = format!("{MAGIC}\nformat_version {FORMAT_VERSION}\nconfig {}\ntensors {}\n", serde_json::to_string(config)?, tensors.len());
    for (name, t) in &tensors {
        header.push_str(&format!("tensor {name} {} {}\n", t.rows(), t.cols()));
    }
    header.push_str("end_header\n");
    let io = |e| Error::Checkpoint(format!("write failed: {e}"));
    w.write_all(header.as_bytes()).map_err(io)?;
    let mut buf = Vec::with_capacity(8 * 4096);
    for (_, t) in &tensors {
        for chunk in t.data().chunks(4096) {
            buf.clear();
            chunk.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
            w.write_all(&buf).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn header_line(r: &mut impl BufRead) -> Result<String> {
    let mut line = String::new();
    let n = r
        .read_line(&mut line)
        .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
    if n == 0 {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|s| s.strip_prefix(' '))
        .ok_or_else(|| Error::Checkpoint(format!("expected `{key}` line, found `{line}`")))
}

/// Reads and validates a checkpoint: the manifest must match the layout
/// implied by the stored configuration exactly, the total must equal
/// [`count_params`], and no bytes may be missing or left over.
pub fn read_checkpoint(r: impl Read) -> Result<(ModelConfig, ModelParams)> {
    let mut r = BufReader::new(r);
    let magic = header_line(&mut r)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version: u32 = field(&header_line(&mut r)?, "format_version")?
        .parse()
        .map_err(|_| Error::Checkpoint("bad format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let config: ModelConfig = serde_json::from_str(field(&header_line(&mut r)?, "config")?)
        .map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
    config.validate()?;
    let count: usize = field(&header_line(&mut r)?, "tensors")?
        .parse()
        .map_err(|_| Error::Checkpoint("bad tensor count".into()))?;

    let mut params = ModelParams::zeros(&config);
    let expected: Vec<(String, usize, usize)> =
        params.named_tensors().into_iter().map(|(n, t)| (n, t.rows(), t.cols())).collect();
    if count != expected.len() {
        return Err(Error::Checkpoint(format!("manifest lists {count} tensors, configuration needs {}", expected.len())));
    }
    let mut total = 0;
    for (name, rows, cols) in &expected {
        let line = header_line(&mut r)?;
        let parts: Vec<&str> = field(&line, "tensor")?.split(' ').collect();
        let ok = parts.len() == 3 && parts[0] == name && parts[1] == rows.to_string() && parts[2] == cols.to_string();
        if !ok {
            return Err(Error::Checkpoint(format!("manifest entry `{line}` does not match expected {name} {rows}x{cols}")));
        }
        total += rows * cols;
    }
    if total != count_params(&config) {
        return Err(Error::Checkpoint(format!("manifest holds {total} values, configuration has {}", count_params(&config))));
    }
    if header_line(&mut r)? != "end_header" {
        return Err(Error::Checkpoint("missing end_header".into()));
    }

    let mut failure = None;
    let mut bytes = [0u8; 8];
    params.visit_mut("", &mut |name, t| {
        if failure.is_some() {
            return;
        }
        for v in t.data_mut() {
            if let Err(e) = r.read_exact(&mut bytes) {
                failure = Some(format!("tensor {name}: {e}"));
                return;
            }
            *v = f64::from_le_bytes(bytes);
        }
    });
    if let Some(f) = failure {
        return Err(Error::Checkpoint(format!("truncated data in {f}")));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)
        .map_err(|e| Error::Checkpoint(format!("unreadable data: {e}")))?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes after the last tensor", rest.len())));
    }
    Ok((config, params))
}

pub fn save_checkpoint(path: impl AsRef<Path>, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(std::io::BufWriter::new(file), config, params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelParams)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file)
}
