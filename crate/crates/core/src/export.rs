//! Byte-exact JSON and CSV serialization of an enriched tree.
//!
//! Floats are rounded to 9 significant digits and then printed in their
//! shortest round-trip form, so output bytes do not depend on the platform's
//! last-bit arithmetic. Both formats use LF line endings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::BusFactor;
use crate::knowledge::FileStatus;
use crate::scalar::Scalar;
use crate::tree::{AuthorShare, NodeKind, RepoTree, TreeNode};

pub const CSV_HEADER: &str =
    "id,path,name,kind,bytes,status,bus_factor,major_authors,top_author,top_author_share";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("invalid tree JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Rounds to 9 significant digits.
pub fn canonical_float(value: f64) -> f64 {
    if !value.is_finite() || value == 0.0 {
        return if value.is_finite() { 0.0 } else { value };
    }
    format!("{value:.8e}").parse().unwrap_or(value)
}

fn serialize_canonical<Z: serde::Serializer>(value: &f64, serializer: Z) -> Result<Z::Ok, Z::Error> {
    serializer.serialize_f64(canonical_float(*value))
}

#[derive(Serialize, Deserialize)]
struct JsonAuthor {
    id: String,
    #[serde(serialize_with = "serialize_canonical")]
    knowledge: f64,
    #[serde(serialize_with = "serialize_canonical")]
    share: f64,
    major: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct JsonNode {
    name: String,
    path: String,
    kind: NodeKind,
    bytes: u64,
    status: FileStatus,
    bus_factor: BusFactor,
    authors: Vec<JsonAuthor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<JsonNode>>,
}

impl JsonNode {
    fn from_node<S: Scalar>(node: &TreeNode<S>) -> Self {
        Self {
            name: node.name.clone(),
            path: node.path.clone(),
            kind: node.kind,
            bytes: node.bytes,
            status: node.status,
            bus_factor: node.bus_factor,
            authors: node
                .authors
                .iter()
                .map(|a| JsonAuthor {
                    id: a.id.clone(),
                    knowledge: a.knowledge.to_f64_lossy(),
                    share: a.share.to_f64_lossy(),
                    major: a.major,
                })
                .collect(),
            children: (node.kind == NodeKind::Folder)
                .then(|| node.children.iter().map(Self::from_node).collect()),
        }
    }

    fn into_node(self, next_id: &mut usize) -> TreeNode<f64> {
        let id = *next_id;
        *next_id += 1;
        TreeNode {
            id,
            name: self.name,
            path: self.path,
            kind: self.kind,
            bytes: self.bytes,
            status: self.status,
            bus_factor: self.bus_factor,
            authors: self
                .authors
                .into_iter()
                .map(|a| AuthorShare {
                    id: a.id,
                    knowledge: a.knowledge,
                    share: a.share,
                    major: a.major,
                })
                .collect(),
            children: self
                .children
                .unwrap_or_default()
                .into_iter()
                .map(|c| c.into_node(next_id))
                .collect(),
        }
    }
}

/// Compact UTF-8 JSON with fixed key order:
/// name, path, kind, bytes, status, busFactor, authors, children.
pub fn to_json<S: Scalar>(tree: &RepoTree<S>) -> Vec<u8> {
    serde_json::to_vec(&JsonNode::from_node(&tree.root)).expect("tree serialization is infallible")
}

/// Parses a tree written by [`to_json`]; ids are reassigned in preorder.
pub fn from_json(bytes: &[u8]) -> Result<RepoTree<f64>, ExportError> {
    let node: JsonNode = serde_json::from_slice(bytes)?;
    let mut next_id = 0;
    Ok(RepoTree {
        root: node.into_node(&mut next_id),
    })
}

/// One CSV row, already formatted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRow {
    pub id: usize,
    pub path: String,
    pub name: String,
    pub kind: String,
    pub bytes: u64,
    pub status: String,
    pub bus_factor: String,
    pub major_authors: String,
    pub top_author: String,
    pub top_author_share: String,
}

impl CsvRow {
    pub fn from_node<S: Scalar>(node: &TreeNode<S>) -> Self {
        let top = node.authors.first();
        Self {
            id: node.id,
            path: node.path.clone(),
            name: node.name.clone(),
            kind: node.kind.as_str().to_string(),
            bytes: node.bytes,
            status: node.status.as_str().to_string(),
            bus_factor: node.bus_factor.value().map(|v| v.to_string()).unwrap_or_default(),
            major_authors: node.major_authors().collect::<Vec<_>>().join(";"),
            top_author: top.map(|a| a.id.clone()).unwrap_or_default(),
            top_author_share: top
                .map(|a| format!("{:.6}", canonical_float(a.share.to_f64_lossy())))
                .unwrap_or_default(),
        }
    }
}

/// RFC 4180 CSV, one row per node in preorder, LF terminated.
pub fn to_csv<S: Scalar>(tree: &RepoTree<S>) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    writer
        .write_record(CSV_HEADER.split(','))
        .expect("writing to memory");
    for node in tree.preorder() {
        writer
            .serialize(CsvRow::from_node(node))
            .expect("writing to memory");
    }
    writer.into_inner().expect("flushing to memory")
}

/// Parses CSV written by [`to_csv`].
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<CsvRow>, ExportError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    reader
        .deserialize()
        .map(|row| row.map_err(ExportError::from))
        .collect()
}
