use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use dnim::sis::MONTH_SECONDS;
use dnim::{NodeId, ParseOptions, TemporalGraph};
use serde::Serialize;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<dnim::Error> for CliError {
    fn from(e: dnim::Error) -> Self {
        use dnim::Error as E;
        let code = match &e {
            E::NonFinite(_) => EXIT_NUMERIC,
            E::InvalidParam(_) | E::KTooLarge { .. } | E::AlreadySeed(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn with_path<T>(path: &Path, r: Result<T, impl Into<CliError>>) -> CliResult<T> {
    r.map_err(|e| {
        let mut e = e.into();
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })
}

/// Seconds, or a number followed by `s`, `min`, `h`, `d`, `w` or `mo` (30 days).
pub fn parse_duration(s: &str) -> Result<i64, String> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: i64 = num.parse().map_err(|_| format!("invalid duration `{s}`"))?;
    let mult = match unit {
        "" | "s" => 1,
        "min" => 60,
        "h" => 3600,
        "d" => 86_400,
        "w" => 7 * 86_400,
        "mo" => MONTH_SECONDS,
        _ => {
            return Err(format!(
                "unknown duration unit `{unit}` (use s, min, h, d, w or mo)"
            ))
        }
    };
    let v = n
        .checked_mul(mult)
        .ok_or_else(|| format!("duration `{s}` overflows"))?;
    if v <= 0 {
        return Err("duration must be positive".into());
    }
    Ok(v)
}

/// Reads a binary cache or, failing the magic check, an edge list.
pub fn load_graph(path: &Path) -> CliResult<TemporalGraph> {
    load_graph_with(path, &ParseOptions::default())
}

pub fn load_graph_with(path: &Path, opts: &ParseOptions) -> CliResult<TemporalGraph> {
    let bytes = with_path(path, fs::read(path))?;
    if TemporalGraph::is_cache(&bytes) {
        with_path(path, TemporalGraph::read_cache(bytes.as_slice()))
    } else {
        with_path(path, TemporalGraph::parse_edge_list(bytes.as_slice(), opts))
    }
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum SeedsFile {
    List(Vec<i64>),
    Report { seeds: Vec<i64> },
}

/// Dense ids for the given original ids, or those in `file`.
pub fn resolve_seeds(
    g: &TemporalGraph,
    ids: &[i64],
    file: Option<&Path>,
) -> CliResult<(Vec<i64>, Vec<NodeId>)> {
    let original = match file {
        Some(p) => {
            let text = with_path(p, fs::read_to_string(p))?;
            match with_path(
                p,
                serde_json::from_str::<SeedsFile>(&text).map_err(dnim::Error::from),
            )? {
                SeedsFile::List(v) | SeedsFile::Report { seeds: v } => v,
            }
        }
        None => ids.to_vec(),
    };
    let mut dense = Vec::with_capacity(original.len());
    for &id in &original {
        let v = g.dense_id(id)?;
        if dense.contains(&v) {
            return Err(CliError::usage(format!("seed {id} listed twice")));
        }
        dense.push(v);
    }
    Ok((original, dense))
}

/// Pretty JSON to `path`, or stdout.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(dnim::Error::from)?;
    text.push('\n');
    match path {
        Some(p) => with_path(p, fs::write(p, text)),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Runs `f` on a buffered writer for `path`, or stdout.
pub fn emit_with<F>(path: Option<&Path>, f: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> dnim::Result<()>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(with_path(p, File::create(p))?);
            with_path(p, f(&mut w))?;
            with_path(p, w.flush())
        }
        None => {
            let mut w = std::io::stdout().lock();
            f(&mut w)?;
            Ok(w.flush()?)
        }
    }
}

/// Appends an `algorithm,k,seconds` row, writing the header to a new file.
pub fn append_timing(path: &Path, algorithm: &str, k: usize, seconds: f64) -> CliResult<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = with_path(
        path,
        OpenOptions::new().create(true).append(true).open(path),
    )?;
    if fresh {
        writeln!(f, "algorithm,k,seconds")?;
    }
    writeln!(f, "{algorithm},{k},{seconds:.6}")?;
    Ok(())
}
