//! Plain-text tree dumps.
//!
//! The first line is a JSON header; every following line is one node:
//!
//! ```text
//! {"kind":"rrt","d":2,"epsilon":0.1,"seed":5,"stream":0,"generator_name":"…","version":"0.1.0"}
//! step,parent,depth,edge_length,x0,…,x{d-1}
//! ```
//!
//! The root's parent field is empty. Floats are written in Rust's shortest
//! round-trip form, so a dump reloads bit-exact and re-dumps byte-identical.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{validate, Origin, Tree, TreeKind, TreeNode};
use crate::error::{Error, Result};
use crate::space::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeHeader {
    pub kind: String,
    pub d: usize,
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub stream: u64,
    pub generator_name: String,
    pub version: String,
    /// Only present for connection trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_size: Option<usize>,
}

impl TreeHeader {
    pub fn for_tree(tree: &Tree, seed: u64, stream: u64) -> Self {
        Self {
            kind: tree.kind().as_str().to_string(),
            d: tree.dim(),
            epsilon: tree.epsilon(),
            seed,
            stream,
            generator_name: crate::space::GENERATOR_NAME.to_string(),
            version: crate::VERSION.to_string(),
            base_size: tree.base_size(),
        }
    }
}

pub fn write_tree(tree: &Tree, header: &TreeHeader) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for node in tree.nodes() {
        let parent = node.parent.map(|p| p.to_string()).unwrap_or_default();
        write!(out, "{},{},{},{}", node.step, parent, node.depth, node.edge_length).unwrap();
        for c in node.position.coords() {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_tree(text: &str) -> Result<(Tree, TreeHeader)> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header: TreeHeader =
        serde_json::from_str(first).map_err(|e| parse_err(1, format!("header: {e}")))?;
    let kind = TreeKind::parse(&header.kind)
        .ok_or_else(|| parse_err(1, format!("unknown tree kind `{}`", header.kind)))?;
    crate::space::check_dim(header.d)?;

    let mut nodes = Vec::new();
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + header.d {
            return Err(parse_err(
                line_no,
                format!("expected {} fields, found {}", 4 + header.d, fields.len()),
            ));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| parse_err(line_no, format!("{name}: {e}")))
        };
        let step = fields[0]
            .parse::<u64>()
            .map_err(|e| parse_err(line_no, format!("step: {e}")))?;
        let parent = if fields[1].is_empty() {
            None
        } else {
            Some(
                fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(line_no, format!("parent: {e}")))?,
            )
        };
        let depth = fields[2]
            .parse::<u32>()
            .map_err(|e| parse_err(line_no, format!("depth: {e}")))?;
        let edge_length = num(3, "edge_length")?;
        let coords = (0..header.d)
            .map(|a| num(4 + a, "coordinate"))
            .collect::<Result<Vec<_>>>()?;
        let position = Point::new(&coords).map_err(|e| parse_err(line_no, e.to_string()))?;
        let origin = match header.base_size {
            Some(s) if nodes.len() <= s => Origin::Base,
            _ => Origin::Grown,
        };
        nodes.push(TreeNode {
            position,
            parent,
            edge_length,
            depth,
            step,
            origin,
        });
    }
    if nodes.is_empty() {
        return Err(parse_err(2, "tree has no root"));
    }
    let tree = Tree::from_parts(kind, header.d, header.epsilon, nodes, header.base_size);
    validate(&tree)?;
    Ok((tree, header))
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}
