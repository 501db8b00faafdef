//! Edge-list text format.
//!
//! ```text
//! # comment
//! dg <T> <feature_dim>
//! v <entity> <t>
//! e <t> <entity_u> <entity_v>
//! ```
//!
//! Temporal links are never stored; they are derived from presences.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DynamicGraph, EntityId, Timestep, VertexInstance};
use crate::{Error, Result};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| perr(line, format!("invalid {what} `{tok}`")))
}

pub fn parse_edge_list(text: &str) -> Result<DynamicGraph> {
    let mut header: Option<(Timestep, u32)> = None;
    let mut seen = HashSet::new();
    let mut vertices = Vec::new();
    let mut edges = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let tag = toks.next().unwrap_or_default();
        let Some((snapshots, _)) = header else {
            if tag != "dg" {
                return Err(perr(line, "expected `dg <T> <feature_dim>` header"));
            }
            let t: Timestep = field(toks.next(), line, "snapshot count")?;
            let d: u32 = field(toks.next(), line, "feature dimension")?;
            header = Some((t, d));
            if toks.next().is_some() {
                return Err(perr(line, "trailing tokens"));
            }
            continue;
        };
        match tag {
            "v" => {
                let e: EntityId = field(toks.next(), line, "entity")?;
                let t: Timestep = field(toks.next(), line, "timestep")?;
                if t == 0 || t > snapshots {
                    return Err(perr(line, format!("timestep {t} outside 1..={snapshots}")));
                }
                if !seen.insert(VertexInstance::new(e, t)) {
                    return Err(perr(line, format!("duplicate vertex instance ({e}, {t})")));
                }
                vertices.push((e, t));
            }
            "e" => {
                let t: Timestep = field(toks.next(), line, "timestep")?;
                let u: EntityId = field(toks.next(), line, "entity")?;
                let v: EntityId = field(toks.next(), line, "entity")?;
                if u == v {
                    return Err(perr(line, format!("self-loop on entity {u}")));
                }
                edges.push((line, t, u, v));
            }
            "dg" => return Err(perr(line, "repeated header")),
            other => return Err(perr(line, format!("unknown record `{other}`"))),
        }
        if toks.next().is_some() {
            return Err(perr(line, "trailing tokens"));
        }
    }

    let (snapshots, feature_dim) = header.ok_or_else(|| perr(1, "empty file"))?;
    let mut b = DynamicGraph::builder(snapshots, feature_dim);
    for (e, t) in vertices {
        b.vertex(e, t)?;
    }
    for (line, t, u, v) in edges {
        for ent in [u, v] {
            if !seen.contains(&VertexInstance::new(ent, t)) {
                return Err(perr(
                    line,
                    format!("edge references absent vertex instance ({ent}, {t})"),
                ));
            }
        }
        b.edge(t, u, v).map_err(|e| perr(line, e.to_string()))?;
    }
    b.build()
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<DynamicGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text)
}

pub fn write_edge_list(g: &DynamicGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dg {} {}", g.num_snapshots(), g.feature_dim());
    for v in g.instances() {
        let _ = writeln!(out, "v {} {}", v.entity, v.t);
    }
    for &(a, b) in g.spatial_edges() {
        let (u, v) = (g.instance(a), g.instance(b));
        let _ = writeln!(out, "e {} {} {}", u.t, u.entity, v.entity);
    }
    out
}

pub fn save_graph(g: &DynamicGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_edge_list(g)).map_err(|e| Error::io(path, e))
}
