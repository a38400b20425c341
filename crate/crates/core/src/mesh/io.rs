//! Plain-text mesh format:
//!
//! ```text
//! afw3d-mesh v1
//! vertices <n>
//! <x> <y> <z>        (n lines)
//! tets <m>
//! <a> <b> <c> <d>    (m lines)
//! orders <m>         (optional block)
//! <r>                (m lines)
//! ```
//!
//! Coordinates are written in shortest round-trip exponent form, so a write/read cycle
//! reproduces every bit.

use std::fmt::Write as _;

use super::{build_complex, MeshError, SimplicialMesh};

pub const MESH_HEADER: &str = "afw3d-mesh v1";

pub fn write_mesh(m: &SimplicialMesh, orders: Option<&[u32]>) -> String {
    let mut s = String::new();
    writeln!(s, "{MESH_HEADER}").ok();
    writeln!(s, "vertices {}", m.num_vertices()).ok();
    for v in &m.vertices {
        writeln!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]).ok();
    }
    writeln!(s, "tets {}", m.num_tets()).ok();
    for t in &m.tets {
        writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]).ok();
    }
    if let Some(o) = orders {
        writeln!(s, "orders {}", o.len()).ok();
        for r in o {
            writeln!(s, "{r}").ok();
        }
    }
    s
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> MeshError {
    MeshError::Parse(format!("line {line}: {msg}"))
}

fn section_count(lines: &mut dyn Iterator<Item = (usize, &str)>, keyword: &str) -> Result<usize, MeshError> {
    let (no, l) = lines
        .next()
        .ok_or_else(|| MeshError::Parse(format!("missing `{keyword}` section")))?;
    let mut it = l.split_whitespace();
    if it.next() != Some(keyword) {
        return Err(parse_err(no, format!("expected `{keyword} <count>`")));
    }
    it.next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| parse_err(no, "bad count"))
}

/// Parses a mesh file; returns the mesh and the optional per-tet orders.
pub fn read_mesh(text: &str) -> Result<(SimplicialMesh, Option<Vec<u32>>), MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l == MESH_HEADER => {}
        _ => return Err(MeshError::Parse(format!("missing header `{MESH_HEADER}`"))),
    }
    let nv = section_count(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, l) = lines.next().ok_or_else(|| MeshError::Parse("truncated vertex block".into()))?;
        let c: Vec<f64> = l
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|e| parse_err(no, e)))
            .collect::<Result<_, _>>()?;
        if c.len() != 3 || c.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(no, "expected three finite coordinates"));
        }
        vertices.push([c[0], c[1], c[2]]);
    }
    let nt = section_count(&mut lines, "tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (no, l) = lines.next().ok_or_else(|| MeshError::Parse("truncated tet block".into()))?;
        let c: Vec<usize> = l
            .split_whitespace()
            .map(|w| w.parse::<usize>().map_err(|e| parse_err(no, e)))
            .collect::<Result<_, _>>()?;
        if c.len() != 4 {
            return Err(parse_err(no, "expected four vertex ids"));
        }
        tets.push([c[0], c[1], c[2], c[3]]);
    }
    let orders = match lines.next() {
        None => None,
        Some((no, l)) => {
            let mut it = l.split_whitespace();
            if it.next() != Some("orders") {
                return Err(parse_err(no, "expected `orders <count>` or end of file"));
            }
            let count: usize = it.next().and_then(|c| c.parse().ok()).ok_or_else(|| parse_err(no, "bad count"))?;
            if count != nt {
                return Err(parse_err(no, format!("orders block has {count} entries for {nt} tets")));
            }
            let mut o = Vec::with_capacity(count);
            for t in 0..count {
                let (no, l) = lines.next().ok_or_else(|| MeshError::Parse("truncated orders block".into()))?;
                o.push(
                    l.parse::<u32>()
                        .map_err(|e| parse_err(no, format!("tet {t}: {e}")))?,
                );
            }
            Some(o)
        }
    };
    if let Some((no, _)) = lines.next() {
        return Err(parse_err(no, "unexpected trailing content"));
    }
    Ok((build_complex(vertices, &tets)?, orders))
}
