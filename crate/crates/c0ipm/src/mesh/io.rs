//! Plain-text mesh file reader and writer.
//!
//! Format (UTF-8, whitespace separated):
//! ```text
//! DIM 2
//! DEGREE 3
//! SHAPE TRI
//! NODES 4
//! 0.0 0.0
//! ...
//! ELEMS 2
//! 0 1 2 ...
//! BFACES 1
//! 0 2 10
//! ```
//! Node ids are 0-based; `BFACES` rows are `elem localface tag` and are
//! optional.

use super::Mesh;
use crate::error::{Error, Result};
use crate::refelem::ElemShape;
use std::fmt::Write as _;
use std::path::Path;

pub fn shape_name(shape: ElemShape) -> &'static str {
    match shape {
        ElemShape::Triangle => "TRI",
        ElemShape::Quad => "QUAD",
        ElemShape::Hex => "HEX",
    }
}

fn shape_from_name(name: &str) -> Option<ElemShape> {
    match name {
        "TRI" => Some(ElemShape::Triangle),
        "QUAD" => Some(ElemShape::Quad),
        "HEX" => Some(ElemShape::Hex),
        _ => None,
    }
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "DIM {}", mesh.dim);
    let _ = writeln!(s, "DEGREE {}", mesh.degree);
    let _ = writeln!(s, "SHAPE {}", shape_name(mesh.shape));
    let _ = writeln!(s, "NODES {}", mesh.n_nodes());
    for x in &mesh.coords {
        for k in 0..mesh.dim {
            if k > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.17e}", x[k]);
        }
        s.push('\n');
    }
    let _ = writeln!(s, "ELEMS {}", mesh.n_elems());
    for e in 0..mesh.n_elems() {
        let nodes = mesh.elem_nodes(e);
        for (i, n) in nodes.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{n}");
        }
        s.push('\n');
    }
    if !mesh.bface_tags.is_empty() {
        let _ = writeln!(s, "BFACES {}", mesh.bface_tags.len());
        for (e, lf, tag) in &mesh.bface_tags {
            let _ = writeln!(s, "{e} {lf} {tag}");
        }
    }
    std::fs::write(path, s).map_err(|err| Error::io(path.display().to_string(), err))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text =
        std::fs::read_to_string(path).map_err(|err| Error::io(path.display().to_string(), err))?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let all_lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let mut cursor = 0usize;
    let mut lines = std::iter::from_fn(move || {
        let item = all_lines.get(cursor).copied();
        cursor += 1;
        item
    });

    let expect_kv = |lines: &mut dyn Iterator<Item = (usize, &str)>, key: &str| -> Result<(usize, String)> {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(format!("unexpected end of file, expected {key}")))?;
        let mut it = line.split_whitespace();
        let k = it.next().unwrap_or("");
        if k != key {
            return Err(Error::parse_at(ln, format!("expected `{key}`, found `{k}`")));
        }
        let v = it
            .next()
            .ok_or_else(|| Error::parse_at(ln, format!("`{key}` needs a value")))?;
        if it.next().is_some() {
            return Err(Error::parse_at(ln, format!("trailing tokens after `{key}`")));
        }
        Ok((ln, v.to_string()))
    };

    let (ln, v) = expect_kv(&mut lines, "DIM")?;
    let dim: usize = v
        .parse()
        .map_err(|_| Error::parse_at(ln, format!("bad DIM value `{v}`")))?;
    if dim != 2 && dim != 3 {
        return Err(Error::parse_at(ln, format!("DIM must be 2 or 3, got {dim}")));
    }
    let (ln, v) = expect_kv(&mut lines, "DEGREE")?;
    let degree: usize = v
        .parse()
        .map_err(|_| Error::parse_at(ln, format!("bad DEGREE value `{v}`")))?;
    let (ln, v) = expect_kv(&mut lines, "SHAPE")?;
    let shape = shape_from_name(&v)
        .ok_or_else(|| Error::parse_at(ln, format!("unknown SHAPE `{v}`")))?;
    if shape.dim() != dim {
        return Err(Error::parse_at(
            ln,
            format!("SHAPE {v} is {}-dimensional but DIM is {dim}", shape.dim()),
        ));
    }
    let (_, v) = expect_kv(&mut lines, "NODES")?;
    let n_nodes: usize = v.parse().map_err(|_| Error::parse(format!("bad NODES count `{v}`")))?;

    let mut coords = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse("unexpected end of file in node block"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse_at(ln, "bad coordinate"))?;
        if vals.len() != dim {
            return Err(Error::parse_at(
                ln,
                format!("expected {dim} coordinates, found {}", vals.len()),
            ));
        }
        let mut x = [0.0; 3];
        x[..dim].copy_from_slice(&vals);
        coords.push(x);
    }

    let (_, v) = expect_kv(&mut lines, "ELEMS")?;
    let n_elems: usize = v.parse().map_err(|_| Error::parse(format!("bad ELEMS count `{v}`")))?;
    let n_en = shape.n_nodes(degree);
    let mut conn = Vec::with_capacity(n_elems * n_en);
    for _ in 0..n_elems {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse("unexpected end of file in element block"))?;
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse_at(ln, "bad node id"))?;
        if ids.len() != n_en {
            return Err(Error::parse_at(
                ln,
                format!("expected {n_en} node ids, found {}", ids.len()),
            ));
        }
        for &id in &ids {
            if id >= n_nodes {
                return Err(Error::parse_at(ln, format!("node id {id} out of range")));
            }
        }
        conn.extend(ids);
    }

    let mut bface_tags = Vec::new();
    if let Some((ln, line)) = lines.next() {
        let mut it = line.split_whitespace();
        if it.next() != Some("BFACES") {
            return Err(Error::parse_at(ln, "expected `BFACES` or end of file"));
        }
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse_at(ln, "bad BFACES count"))?;
        for _ in 0..n {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse("unexpected end of file in BFACES block"))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::parse_at(ln, "BFACES rows are `elem localface tag`"));
            }
            let e: usize = toks[0].parse().map_err(|_| Error::parse_at(ln, "bad element id"))?;
            let lf: usize = toks[1].parse().map_err(|_| Error::parse_at(ln, "bad local face"))?;
            let tag: i64 = toks[2].parse().map_err(|_| Error::parse_at(ln, "bad tag"))?;
            if e >= n_elems {
                return Err(Error::parse_at(ln, format!("element id {e} out of range")));
            }
            if lf >= shape.n_faces() {
                return Err(Error::parse_at(ln, format!("local face {lf} out of range")));
            }
            bface_tags.push((e, lf, tag));
        }
    }

    let mut mesh = Mesh::new(dim, degree, shape, coords, conn)?;
    mesh.bface_tags = bface_tags;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_mesh;

    #[test]
    fn roundtrip_is_identity() {
        let mut m =
            structured_mesh(&[0.0; 3], &[1.0, 2.0, 0.0], &[2, 3, 0], ElemShape::Triangle, 3).unwrap();
        m.bface_tags = vec![(0, 0, 7), (1, 2, -3)];
        let dir = std::env::temp_dir().join("c0ipm_mesh_roundtrip.txt");
        write_mesh(&m, &dir).unwrap();
        let m2 = read_mesh(&dir).unwrap();
        assert_eq!(m.dim, m2.dim);
        assert_eq!(m.degree, m2.degree);
        assert_eq!(m.shape, m2.shape);
        assert_eq!(m.n_nodes(), m2.n_nodes());
        assert_eq!(m.n_elems(), m2.n_elems());
        for (a, b) in m.coords.iter().zip(&m2.coords) {
            assert_eq!(a, b); // bitwise: %.17e roundtrips f64 exactly
        }
        for e in 0..m.n_elems() {
            assert_eq!(m.elem_nodes(e), m2.elem_nodes(e));
        }
        assert_eq!(m.bface_tags, m2.bface_tags);
    }

    #[test]
    fn dim_mismatch_rejected() {
        let text = "DIM 2\nDEGREE 1\nSHAPE TRI\nNODES 3\n0 0 0\n1 0 0\n0 1 0\nELEMS 1\n0 1 2\n";
        let err = parse_mesh(text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn bad_ids_rejected() {
        let text = "DIM 2\nDEGREE 1\nSHAPE TRI\nNODES 3\n0 0\n1 0\n0 1\nELEMS 1\n0 1 5\n";
        assert!(parse_mesh(text).is_err());
    }

    #[test]
    fn shape_dim_consistency() {
        let text = "DIM 3\nDEGREE 1\nSHAPE TRI\nNODES 0\nELEMS 0\n";
        assert!(parse_mesh(text).is_err());
    }
}
