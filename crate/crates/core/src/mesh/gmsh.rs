//! Gmsh MSH 2.2 ASCII reader and writer for 2D triangle meshes.
//!
//! Only `$MeshFormat`, `$Nodes` and `$Elements` are interpreted; other
//! sections are skipped. Element type 2 (3-node triangle) defines the cells,
//! type 1 (2-node line) carries the physical tag of boundary facets and type
//! 15 (point) is ignored. Anything else is rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{signed_area, Mesh, Point};
use crate::error::{Error, Result};

pub fn load_gmsh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_gmsh(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some(l);
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<&'a str> {
        self.next_line()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            path: PathBuf::from(self.path),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, tok: Option<&str>, what: &str) -> Result<T> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("could not parse {what}")))
    }
}

/// Parses MSH 2.2 ASCII text. `origin` is only used in error messages.
pub fn parse_gmsh(text: &str, origin: &Path) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path: origin,
        line: 0,
    };
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut edge_tags: HashMap<[usize; 2], i32> = HashMap::new();
    let mut seen_format = false;
    let mut pending_elements: Vec<(usize, u32, i32, Vec<u64>)> = Vec::new();

    while let Some(header) = lines.next_line() {
        match header {
            "$MeshFormat" => {
                let l = lines.expect_line("format line")?;
                let mut tok = l.split_whitespace();
                let version: String = lines.parse(tok.next(), "format version")?;
                let file_type: u32 = lines.parse(tok.next(), "file type")?;
                if !version.starts_with('2') {
                    return Err(lines.err(format!("unsupported MSH version {version}, need 2.2")));
                }
                if file_type != 0 {
                    return Err(lines.err("binary MSH files are not supported"));
                }
                if lines.expect_line("$EndMeshFormat")? != "$EndMeshFormat" {
                    return Err(lines.err("expected $EndMeshFormat"));
                }
                seen_format = true;
            }
            "$Nodes" => {
                let l = lines.expect_line("node count")?;
                let n: usize = lines.parse(Some(l), "node count")?;
                vertices.reserve(n);
                for _ in 0..n {
                    let l = lines.expect_line("node")?;
                    let mut tok = l.split_whitespace();
                    let id: u64 = lines.parse(tok.next(), "node id")?;
                    let x: f64 = lines.parse(tok.next(), "x coordinate")?;
                    let y: f64 = lines.parse(tok.next(), "y coordinate")?;
                    if node_index.insert(id, vertices.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    vertices.push([x, y]);
                }
                if lines.expect_line("$EndNodes")? != "$EndNodes" {
                    return Err(lines.err("expected $EndNodes"));
                }
            }
            "$Elements" => {
                let l = lines.expect_line("element count")?;
                let n: usize = lines.parse(Some(l), "element count")?;
                for _ in 0..n {
                    let l = lines.expect_line("element")?;
                    let mut tok = l.split_whitespace();
                    let _id: u64 = lines.parse(tok.next(), "element id")?;
                    let ty: u32 = lines.parse(tok.next(), "element type")?;
                    let ntags: usize = lines.parse(tok.next(), "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(lines.parse::<i32>(tok.next(), "element tag")?);
                    }
                    let nnodes = match ty {
                        1 => 2,
                        2 => 3,
                        15 => 1,
                        other => {
                            return Err(lines.err(format!(
                                "unsupported element type {other} ({})",
                                element_name(other)
                            )))
                        }
                    };
                    let mut nodes = Vec::with_capacity(nnodes);
                    for _ in 0..nnodes {
                        nodes.push(lines.parse::<u64>(tok.next(), "element node")?);
                    }
                    if tok.next().is_some() {
                        return Err(lines.err("trailing data after element nodes"));
                    }
                    let physical = tags.first().copied().unwrap_or(0);
                    pending_elements.push((lines.line, ty, physical, nodes));
                }
                if lines.expect_line("$EndElements")? != "$EndElements" {
                    return Err(lines.err("expected $EndElements"));
                }
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    let l = lines.expect_line(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected line '{other}'"))),
        }
    }
    if !seen_format {
        return Err(lines.err("missing $MeshFormat section"));
    }

    for (line, ty, physical, nodes) in pending_elements {
        lines.line = line;
        let mut idx = Vec::with_capacity(nodes.len());
        for id in nodes {
            idx.push(
                *node_index
                    .get(&id)
                    .ok_or_else(|| lines.err(format!("unknown node {id}")))?,
            );
        }
        match ty {
            1 => {
                edge_tags.insert([idx[0].min(idx[1]), idx[0].max(idx[1])], physical);
            }
            2 => {
                let mut t = [idx[0], idx[1], idx[2]];
                let area = signed_area([vertices[t[0]], vertices[t[1]], vertices[t[2]]]);
                if area == 0.0 {
                    return Err(lines.err("degenerate triangle"));
                }
                if area < 0.0 {
                    t.swap(1, 2);
                }
                triangles.push(t);
            }
            _ => {}
        }
    }
    if triangles.is_empty() {
        return Err(lines.err("no triangle elements"));
    }

    // drop nodes that no triangle uses (geometry points, 3D leftovers)
    let mut renumber = vec![usize::MAX; vertices.len()];
    let mut used = Vec::new();
    for t in triangles.iter_mut() {
        for v in t.iter_mut() {
            if renumber[*v] == usize::MAX {
                renumber[*v] = used.len();
                used.push(vertices[*v]);
            }
            *v = renumber[*v];
        }
    }
    let tags: HashMap<[usize; 2], i32> = edge_tags
        .into_iter()
        .filter(|([a, b], _)| renumber[*a] != usize::MAX && renumber[*b] != usize::MAX)
        .map(|([a, b], t)| {
            let (a, b) = (renumber[a], renumber[b]);
            ([a.min(b), a.max(b)], t)
        })
        .collect();
    let mesh = Mesh::from_cells(used, triangles, |k| tags.get(&k).copied().unwrap_or(0))?;
    mesh.check_conforming()?;
    Ok(mesh)
}

fn element_name(ty: u32) -> &'static str {
    match ty {
        3 => "4-node quadrangle",
        4 => "4-node tetrahedron",
        5 => "8-node hexahedron",
        6 => "6-node prism",
        7 => "5-node pyramid",
        8 => "3-node second order line",
        9 => "6-node second order triangle",
        _ => "not a linear 2D element",
    }
}

/// Writes the mesh as MSH 2.2 ASCII. Boundary facets become line elements
/// carrying their tag as physical group; triangles get physical group 1.
pub fn write_gmsh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_gmsh_string(mesh))?;
    Ok(())
}

pub fn to_gmsh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} 0", i + 1, v[0], v[1]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let boundary: Vec<_> = mesh.facets().iter().filter(|f| f.is_boundary()).collect();
    let _ = writeln!(s, "{}", boundary.len() + mesh.num_cells());
    let mut id = 1;
    for f in boundary {
        let _ = writeln!(
            s,
            "{id} 1 2 {} {} {} {}",
            f.tag,
            f.tag,
            f.vertices[0] + 1,
            f.vertices[1] + 1
        );
        id += 1;
    }
    for c in mesh.cells() {
        let _ = writeln!(s, "{id} 2 2 1 1 {} {} {}", c[0] + 1, c[1] + 1, c[2] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rectangle, DiagonalPattern};

    const TWO_TRIANGLES: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
1
1 7 \"wall\"
$EndPhysicalNames
$Nodes
4
10 0 0 0
11 1 0 0
12 1 1 0
13 0 1 0
$EndNodes
$Elements
4
1 15 2 0 1 10
2 1 2 7 1 10 11
3 2 2 1 1 10 11 12
4 2 2 1 1 10 13 12
$EndElements
";

    #[test]
    fn two_triangles_share_one_facet() {
        let m = parse_gmsh(TWO_TRIANGLES, Path::new("mem.msh")).unwrap();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.facets().iter().filter(|f| !f.is_boundary()).count(), 1);
        // clockwise input triangle gets reoriented
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let tagged: Vec<_> = m.facets().iter().filter(|f| f.tag == 7).collect();
        assert_eq!(tagged.len(), 1);
    }

    #[test]
    fn quadrilateral_is_a_format_error() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n$Elements\n1\n1 3 2 0 1 1 2 3 4\n$EndElements\n";
        match parse_gmsh(text, Path::new("quad.msh")) {
            Err(Error::Format { line, msg, .. }) => {
                assert_eq!(line, 13);
                assert!(msg.contains("quadrangle"), "{msg}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn parse_failure_reports_line() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 zero 0 0\n$EndNodes\n";
        match parse_gmsh(text, Path::new("bad.msh")) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_version_four() {
        let text = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n";
        assert!(matches!(
            parse_gmsh(text, Path::new("v4.msh")),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn round_trip_preserves_connectivity() {
        let m = generate_rectangle(0.0, 0.0, 1.0, 1.0, 1, 1, DiagonalPattern::Right).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.msh");
        write_gmsh(&m, &path).unwrap();
        let back = load_gmsh(&path).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.facets(), m.facets());
    }

    #[test]
    fn hanging_node_rejected_at_load() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n6\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 1 0.5 0\n5 2 0 0\n6 2 1 0\n$EndNodes\n$Elements\n4\n1 2 0 1 2 3\n2 2 0 2 5 4\n3 2 0 4 5 6\n4 2 0 4 6 3\n$EndElements\n";
        assert!(matches!(
            parse_gmsh(text, Path::new("hang.msh")),
            Err(Error::NonConforming(_))
        ));
    }
}
