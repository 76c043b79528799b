//! ASCII mesh files.
//!
//! ```text
//! # comment
//! NODES n
//! id x1 x2
//! TRIANGLES m
//! id n1 n2 n3 [region]
//! EDGES k
//! n1 n2 TAG
//! ```
//!
//! Indices are 0-based and ids must be sequential. Sections may come in any
//! order but each must appear exactly once.

use std::fmt::Write as _;

use super::{BoundaryEdge, BoundaryTag, Mesh2D, MeshError, Point};

/// A parsed mesh together with the repairs applied while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMesh {
    pub mesh: Mesh2D,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Nodes,
    Triangles,
    Edges,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Nodes => "NODES",
            Section::Triangles => "TRIANGLES",
            Section::Edges => "EDGES",
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| syntax(line, format!("cannot parse {what} from '{tok}'")))
}

/// Parses a mesh file. Clockwise triangles are reoriented by swapping two
/// vertices, with a warning; every other invariant violation is an error.
pub fn load_mesh(text: &str) -> Result<LoadedMesh, MeshError> {
    let mut nodes: Option<Vec<Point>> = None;
    let mut triangles: Option<Vec<[usize; 3]>> = None;
    let mut regions: Vec<u32> = Vec::new();
    let mut edges: Option<Vec<BoundaryEdge>> = None;

    let mut current: Option<(Section, usize)> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let first = toks.next().unwrap_or_default();

        if let Some((section, remaining)) = current {
            if remaining > 0 {
                match section {
                    Section::Nodes => {
                        let list = nodes.as_mut().expect("section open");
                        let id: usize = field(Some(first), line, "node id")?;
                        if id != list.len() {
                            return Err(syntax(line, format!("expected node id {}, found {id}", list.len())));
                        }
                        let x1 = field(toks.next(), line, "x1")?;
                        let x2 = field(toks.next(), line, "x2")?;
                        list.push([x1, x2]);
                    }
                    Section::Triangles => {
                        let list = triangles.as_mut().expect("section open");
                        let id: usize = field(Some(first), line, "triangle id")?;
                        if id != list.len() {
                            return Err(syntax(line, format!("expected triangle id {}, found {id}", list.len())));
                        }
                        let tri = [
                            field(toks.next(), line, "vertex n1")?,
                            field(toks.next(), line, "vertex n2")?,
                            field(toks.next(), line, "vertex n3")?,
                        ];
                        let region = match toks.next() {
                            Some(t) => field(Some(t), line, "region id")?,
                            None => 0,
                        };
                        list.push(tri);
                        regions.push(region);
                    }
                    Section::Edges => {
                        let list = edges.as_mut().expect("section open");
                        let a = field(Some(first), line, "edge node n1")?;
                        let b = field(toks.next(), line, "edge node n2")?;
                        let tag_tok = toks.next().ok_or_else(|| syntax(line, "missing edge tag"))?;
                        let tag: BoundaryTag = tag_tok.parse().map_err(|e: String| syntax(line, e))?;
                        list.push(BoundaryEdge { nodes: [a, b], tag });
                    }
                }
                if let Some(extra) = toks.next() {
                    return Err(syntax(line, format!("unexpected trailing token '{extra}'")));
                }
                current = Some((section, remaining - 1));
                continue;
            }
        }

        let section = match first {
            "NODES" => Section::Nodes,
            "TRIANGLES" => Section::Triangles,
            "EDGES" => Section::Edges,
            other => return Err(syntax(line, format!("expected a section header, found '{other}'"))),
        };
        let count: usize = field(toks.next(), line, "section count")?;
        if let Some(extra) = toks.next() {
            return Err(syntax(line, format!("unexpected trailing token '{extra}'")));
        }
        let already = match section {
            Section::Nodes => nodes.replace(Vec::with_capacity(count)).is_some(),
            Section::Triangles => triangles.replace(Vec::with_capacity(count)).is_some(),
            Section::Edges => edges.replace(Vec::with_capacity(count)).is_some(),
        };
        if already {
            return Err(syntax(line, format!("duplicate section {}", section.name())));
        }
        current = Some((section, count));
    }
    if let Some((section, remaining)) = current {
        if remaining > 0 {
            return Err(syntax(
                last_line,
                format!("section {} ends {remaining} lines early", section.name()),
            ));
        }
    }

    let nodes = nodes.ok_or(MeshError::MissingSection("NODES"))?;
    let mut triangles = triangles.ok_or(MeshError::MissingSection("TRIANGLES"))?;
    let edges = edges.ok_or(MeshError::MissingSection("EDGES"))?;

    let mut warnings = Vec::new();
    for (t, tri) in triangles.iter_mut().enumerate() {
        if tri.iter().all(|&v| v < nodes.len()) {
            let area = super::signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area < 0.0 {
                tri.swap(1, 2);
                warnings.push(format!("triangle {t} was clockwise; swapped vertices 2 and 3"));
            }
        }
    }
    let mesh = Mesh2D::from_parts_unchecked(nodes, triangles, regions, edges);
    let diag_warnings = mesh.validate().into_result()?;
    warnings.extend(diag_warnings.into_iter().map(|d| format!("{}: {}", d.check, d.detail)));
    Ok(LoadedMesh { mesh, warnings })
}

/// Serializes a mesh; [`load_mesh`] reads it back unchanged.
pub fn write_mesh(mesh: &Mesh2D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# viscontact mesh");
    let _ = writeln!(out, "NODES {}", mesh.n_nodes());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(out, "{i} {:?} {:?}", p[0], p[1]);
    }
    let _ = writeln!(out, "TRIANGLES {}", mesh.n_triangles());
    let has_regions = mesh.regions().iter().any(|&r| r != 0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if has_regions {
            let _ = writeln!(out, "{t} {} {} {} {}", tri[0], tri[1], tri[2], mesh.regions()[t]);
        } else {
            let _ = writeln!(out, "{t} {} {} {}", tri[0], tri[1], tri[2]);
        }
    }
    let _ = writeln!(out, "EDGES {}", mesh.boundary_edges().len());
    for e in mesh.boundary_edges() {
        let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.tag);
    }
    out
}
