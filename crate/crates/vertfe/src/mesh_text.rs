//! Plain-text mesh export.
//!
//! ```text
//! vertfe-mesh 1
//! nodes <N>
//! elements <M>
//! node_sets <K>
//! <id> <x> <y> <z>                 N lines, ids from 0
//! <id> <hex8|tet10> <bone|pmma> <n1> ... <nK>   M lines
//! set <name> <count>               K blocks, each followed by one line of ids
//! ```
//!
//! Coordinates use the shortest representation that parses back to the same
//! `f64`, so a read-write cycle reproduces the text exactly. Source voxels and
//! the lattice are not stored.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use vertfe_core::mesh::{Element, ElementKind, ElementTag, Mesh};

use crate::error::FormatError;

const MAGIC: &str = "vertfe-mesh 1";

fn kind_name(k: ElementKind) -> &'static str {
    match k {
        ElementKind::Hex8 => "hex8",
        ElementKind::Tet10 => "tet10",
    }
}

fn tag_name(t: ElementTag) -> &'static str {
    match t {
        ElementTag::Bone => "bone",
        ElementTag::Pmma => "pmma",
    }
}

pub fn to_text(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    let _ = writeln!(s, "node_sets {}", mesh.node_sets.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for (i, el) in mesh.elements.iter().enumerate() {
        let _ = write!(s, "{i} {} {}", kind_name(el.kind), tag_name(el.tag));
        for n in &el.nodes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    for (name, ids) in &mesh.node_sets {
        let _ = writeln!(s, "set {name} {}", ids.len());
        let line: Vec<String> = ids.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, FormatError> {
        let (i, l) =
            self.inner.next().ok_or(FormatError::Parse { line: self.line + 1, message: "unexpected end".into() })?;
        self.line = i + 1;
        Ok(l)
    }

    fn err(&self, message: impl Into<String>) -> FormatError {
        FormatError::Parse { line: self.line, message: message.into() }
    }

    fn count(&mut self, key: &str) -> Result<usize, FormatError> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| self.err(format!("expected `{key} <count>`")))
    }
}

pub fn from_text(text: &str) -> Result<Mesh, FormatError> {
    let mut it = Lines { inner: text.lines().enumerate(), line: 0 };
    if it.next()? != MAGIC {
        return Err(it.err("missing `vertfe-mesh 1` header"));
    }
    let n_nodes = it.count("nodes")?;
    let n_elems = it.count("elements")?;
    let n_sets = it.count("node_sets")?;
    let mut mesh = Mesh::default();
    for i in 0..n_nodes {
        let l = it.next()?;
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() != 4 || f[0] != i.to_string() {
            return Err(it.err(format!("expected node {i}")));
        }
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = f[k + 1].parse().map_err(|_| it.err(format!("bad coordinate `{}`", f[k + 1])))?;
        }
        mesh.nodes.push(p);
    }
    for i in 0..n_elems {
        let l = it.next()?;
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() < 3 || f[0] != i.to_string() {
            return Err(it.err(format!("expected element {i}")));
        }
        let (kind, want) = match f[1] {
            "hex8" => (ElementKind::Hex8, 8),
            "tet10" => (ElementKind::Tet10, 10),
            other => return Err(it.err(format!("unknown element kind `{other}`"))),
        };
        let tag = match f[2] {
            "bone" => ElementTag::Bone,
            "pmma" => ElementTag::Pmma,
            other => return Err(it.err(format!("unknown tag `{other}`"))),
        };
        if f.len() != 3 + want {
            return Err(it.err(format!("{} expects {want} nodes", f[1])));
        }
        let mut nodes = Vec::with_capacity(want);
        for s in &f[3..] {
            let n: usize = s.parse().map_err(|_| it.err(format!("bad node id `{s}`")))?;
            if n >= n_nodes {
                return Err(it.err(format!("node {n} out of range")));
            }
            nodes.push(n);
        }
        mesh.elements.push(Element { kind, nodes, tag, source_voxel: None });
    }
    let mut sets = BTreeMap::new();
    for _ in 0..n_sets {
        let l = it.next()?;
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() != 3 || f[0] != "set" {
            return Err(it.err("expected `set <name> <count>`"));
        }
        let count: usize = f[2].parse().map_err(|_| it.err("bad set size"))?;
        let ids_line = it.next()?;
        let ids: Vec<usize> = if ids_line.is_empty() {
            Vec::new()
        } else {
            ids_line.split(' ').map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| it.err("bad set member"))?
        };
        if ids.len() != count {
            return Err(it.err(format!("set {} lists {} ids, header says {count}", f[1], ids.len())));
        }
        sets.insert(f[1].to_string(), ids);
    }
    mesh.node_sets = sets;
    Ok(mesh)
}
