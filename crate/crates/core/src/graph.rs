//! Continuous-time dynamic graphs: a timestamp-sorted edge stream over a
//! dense node id space.

use std::collections::HashMap;
use std::collections::HashSet;
use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Dense node index in `[0, n_nodes)`.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    /// Seconds.
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Comma if the line contains one, otherwise whitespace.
    #[default]
    Auto,
    Comma,
    Whitespace,
    Char(char),
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub delimiter: Delimiter,
    /// `None` infers it from the first data line (four fields means a weight column).
    pub has_weight_column: Option<bool>,
    pub drop_loops: bool,
    /// Drop repeated `(src, dst, timestamp)` triples.
    pub dedup: bool,
}

/// Immutable continuous-time edge list.
///
/// Edges are sorted by timestamp, stably with respect to input order, so the
/// diffusion simulator replays ties deterministically.
#[derive(Debug, Clone)]
pub struct TemporalGraph {
    n_nodes: usize,
    edges: Vec<TemporalEdge>,
    t_start: i64,
    t_end: i64,
    original_ids: Vec<i64>,
    nbr_offsets: Vec<usize>,
    nbr_entries: Vec<(NodeId, i64)>,
}

/// Dataset summary in the usual table layout.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub density: f64,
    pub duration: i64,
    pub t_start: i64,
    pub t_end: i64,
}

impl TemporalGraph {
    /// Builds a graph from dense-id edges. Original ids are the dense ids.
    pub fn from_edges(n_nodes: usize, edges: Vec<(NodeId, NodeId, i64)>) -> Result<Self> {
        let ids = (0..n_nodes as i64).collect();
        let edges = edges
            .into_iter()
            .map(|(src, dst, timestamp)| TemporalEdge {
                src,
                dst,
                timestamp,
            })
            .collect();
        Self::build(n_nodes, edges, ids, None)
    }

    fn build(
        n_nodes: usize,
        mut edges: Vec<TemporalEdge>,
        original_ids: Vec<i64>,
        window: Option<(i64, i64)>,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Empty("graph (no nodes)"));
        }
        if original_ids.len() != n_nodes {
            return Err(Error::InvalidParam("original id table length".into()));
        }
        for e in &edges {
            for id in [e.src, e.dst] {
                if id >= n_nodes {
                    return Err(Error::NodeOutOfRange { id, n_nodes });
                }
            }
        }
        // Vec::sort_by_key is stable.
        edges.sort_by_key(|e| e.timestamp);
        let (t_start, t_end) = match window {
            Some((s, e)) => {
                if s > e {
                    return Err(Error::InvalidParam(format!("window start {s} > end {e}")));
                }
                edges.retain(|x| x.timestamp >= s && x.timestamp <= e);
                (s, e)
            }
            None => match (edges.first(), edges.last()) {
                (Some(a), Some(b)) => (a.timestamp, b.timestamp),
                _ => (0, 0),
            },
        };

        let mut degree = vec![0usize; n_nodes];
        for e in &edges {
            degree[e.src] += 1;
            if e.dst != e.src {
                degree[e.dst] += 1;
            }
        }
        let mut nbr_offsets = Vec::with_capacity(n_nodes + 1);
        nbr_offsets.push(0);
        for d in &degree {
            nbr_offsets.push(nbr_offsets.last().unwrap() + d);
        }
        let mut fill = nbr_offsets[..n_nodes].to_vec();
        let mut nbr_entries = vec![(0, 0); *nbr_offsets.last().unwrap()];
        for e in &edges {
            nbr_entries[fill[e.src]] = (e.dst, e.timestamp);
            fill[e.src] += 1;
            if e.dst != e.src {
                nbr_entries[fill[e.dst]] = (e.src, e.timestamp);
                fill[e.dst] += 1;
            }
        }

        Ok(Self {
            n_nodes,
            edges,
            t_start,
            t_end,
            original_ids,
            nbr_offsets,
            nbr_entries,
        })
    }

    /// Restricts the horizon to `[t_start, t_end]`, dropping edges outside it.
    pub fn with_window(self, t_start: i64, t_end: i64) -> Result<Self> {
        Self::build(
            self.n_nodes,
            self.edges,
            self.original_ids,
            Some((t_start, t_end)),
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn t_start(&self) -> i64 {
        self.t_start
    }

    pub fn t_end(&self) -> i64 {
        self.t_end
    }

    pub fn duration(&self) -> i64 {
        self.t_end - self.t_start
    }

    pub fn original_ids(&self) -> &[i64] {
        &self.original_ids
    }

    pub fn original_id(&self, v: NodeId) -> i64 {
        self.original_ids[v]
    }

    /// Maps an original dataset id back to its dense id.
    pub fn dense_id(&self, original: i64) -> Result<NodeId> {
        self.original_ids
            .iter()
            .position(|&x| x == original)
            .ok_or(Error::UnknownNode(original))
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v < self.n_nodes {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id: v,
                n_nodes: self.n_nodes,
            })
        }
    }

    /// Every `(neighbor, timestamp)` over incident edges in either direction,
    /// one entry per edge, ascending by timestamp.
    pub fn temporal_neighbors(&self, v: NodeId) -> Result<&[(NodeId, i64)]> {
        self.check_node(v)?;
        Ok(&self.nbr_entries[self.nbr_offsets[v]..self.nbr_offsets[v + 1]])
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for e in &self.edges {
            deg[e.src] += 1;
        }
        deg
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            nodes: self.n_nodes,
            edges: self.edges.len(),
            density: self.edges.len() as f64 / self.n_nodes as f64,
            duration: self.duration(),
            t_start: self.t_start,
            t_end: self.t_end,
        }
    }

    /// Parses `src,dst[,weight],timestamp` lines. Lines starting with `#` or
    /// `%` and blank lines are skipped.
    pub fn parse_edge_list<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<Self> {
        let mut id_map: HashMap<i64, NodeId> = HashMap::new();
        let mut original_ids = Vec::new();
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        let mut has_weight = opts.has_weight_column;

        let mut intern = |raw: i64, ids: &mut Vec<i64>| -> NodeId {
            *id_map.entry(raw).or_insert_with(|| {
                ids.push(raw);
                ids.len() - 1
            })
        };

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
                continue;
            }
            let fields = split_fields(trimmed, opts.delimiter);
            let weighted = *has_weight.get_or_insert(fields.len() >= 4);
            let expected = if weighted { 4 } else { 3 };
            if fields.len() != expected {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {expected} fields, found {}", fields.len()),
                });
            }
            let src = parse_id(fields[0], line_no)?;
            let dst = parse_id(fields[1], line_no)?;
            let ts = parse_timestamp(fields[expected - 1], line_no)?;
            if weighted {
                fields[2].parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad weight {:?}", fields[2]),
                })?;
            }
            if opts.drop_loops && src == dst {
                continue;
            }
            if opts.dedup && !seen.insert((src, dst, ts)) {
                continue;
            }
            let s = intern(src, &mut original_ids);
            let d = intern(dst, &mut original_ids);
            edges.push(TemporalEdge {
                src: s,
                dst: d,
                timestamp: ts,
            });
        }
        if edges.is_empty() {
            return Err(Error::NoEdges);
        }
        Self::build(original_ids.len(), edges, original_ids, None)
    }

    /// Writes the graph as a weightless `src,dst,timestamp` list of original ids.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.edges {
            writeln!(
                w,
                "{},{},{}",
                self.original_ids[e.src], self.original_ids[e.dst], e.timestamp
            )?;
        }
        Ok(())
    }

    /// Writes the versioned binary cache.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_nodes as u64).to_le_bytes())?;
        w.write_all(&(self.edges.len() as u64).to_le_bytes())?;
        w.write_all(&self.t_start.to_le_bytes())?;
        w.write_all(&self.t_end.to_le_bytes())?;
        for id in &self.original_ids {
            w.write_all(&id.to_le_bytes())?;
        }
        for e in &self.edges {
            w.write_all(&(e.src as u32).to_le_bytes())?;
            w.write_all(&(e.dst as u32).to_le_bytes())?;
            w.write_all(&e.timestamp.to_le_bytes())?;
        }
        Ok(())
    }

    /// True if `bytes` start like a file written by [`Self::write_cache`].
    pub fn is_cache(bytes: &[u8]) -> bool {
        bytes.starts_with(CACHE_MAGIC)
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("not a graph cache".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::Format(format!(
                "unsupported cache version {version}"
            )));
        }
        let n_nodes = read_u64(&mut r)? as usize;
        let n_edges = read_u64(&mut r)? as usize;
        let t_start = read_u64(&mut r)? as i64;
        let t_end = read_u64(&mut r)? as i64;
        let mut ids = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            ids.push(read_u64(&mut r)? as i64);
        }
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let src = read_u32(&mut r)? as usize;
            let dst = read_u32(&mut r)? as usize;
            let timestamp = read_u64(&mut r)? as i64;
            edges.push(TemporalEdge {
                src,
                dst,
                timestamp,
            });
        }
        Self::build(n_nodes, edges, ids, Some((t_start, t_end)))
    }
}

const CACHE_MAGIC: &[u8; 8] = b"DNIMGRPH";
const CACHE_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn split_fields(line: &str, delim: Delimiter) -> Vec<&str> {
    let sep = match delim {
        Delimiter::Auto if line.contains(',') => ',',
        Delimiter::Auto | Delimiter::Whitespace => return line.split_whitespace().collect(),
        Delimiter::Comma => ',',
        Delimiter::Char(c) => c,
    };
    line.split(sep).map(str::trim).collect()
}

fn parse_id(s: &str, line: usize) -> Result<i64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad node id {s:?}"),
    })
}

fn parse_timestamp(s: &str, line: usize) -> Result<i64> {
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    // Some dumps write integral timestamps in float notation.
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t.fract() == 0.0 && t.abs() < 9.0e15 => Ok(t as i64),
        _ => Err(Error::Parse {
            line,
            message: format!("bad timestamp {s:?}"),
        }),
    }
}
