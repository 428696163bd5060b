//! Repository file tree enriched with bus factor data.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{BusFactor, Engine};
use crate::knowledge::FileStatus;
use crate::miner::HeadFile;
use crate::scalar::Scalar;

pub const NOT_APPLICABLE: &str = "Not Applicable";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("duplicate path: {0}")]
    DuplicatePath(String),
    #[error("path is both a file and a folder: {0}")]
    FileFolderConflict(String),
    #[error("path is not normalized: {0:?}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NodeKind {
    File,
    Folder,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::File => "FILE",
            NodeKind::Folder => "FOLDER",
        }
    }
}

/// An author's aggregated knowledge on a node.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorShare<S> {
    pub id: String,
    pub knowledge: S,
    pub share: S,
    /// Removed by the greedy procedure on this node. For files these are
    /// exactly the major authors.
    pub major: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<S> {
    /// Preorder index, root is 0.
    pub id: usize,
    pub name: String,
    pub path: String,
    pub kind: NodeKind,
    pub bytes: u64,
    pub status: FileStatus,
    pub bus_factor: BusFactor,
    /// Descending by knowledge, ties by id.
    pub authors: Vec<AuthorShare<S>>,
    pub children: Vec<TreeNode<S>>,
}

impl<S> TreeNode<S> {
    fn leaf(name: String, path: String, kind: NodeKind, bytes: u64) -> Self {
        Self {
            id: 0,
            name,
            path,
            kind,
            bytes,
            status: FileStatus::Inactive,
            bus_factor: BusFactor::NotApplicable,
            authors: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn is_file(&self) -> bool {
        self.kind == NodeKind::File
    }

    /// Author ids with `major` set, in author order.
    pub fn major_authors(&self) -> impl Iterator<Item = &str> {
        self.authors.iter().filter(|a| a.major).map(|a| a.id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepoTree<S> {
    pub root: TreeNode<S>,
}

#[derive(Default)]
struct Dir {
    files: BTreeMap<String, u64>,
    dirs: BTreeMap<String, Dir>,
}

impl<S: Scalar> RepoTree<S> {
    /// Builds the folder hierarchy from head files.
    ///
    /// Children are ordered by ascending byte size, ties by name, and ids are
    /// assigned in preorder.
    pub fn build<'a, I>(files: I) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let mut top = Dir::default();
        let mut seen = BTreeSet::new();
        for (path, bytes) in files {
            let segments: Vec<&str> = path.split('/').collect();
            if segments.iter().any(|s| s.is_empty() || *s == "." || *s == "..") {
                return Err(TreeError::InvalidPath(path.to_string()));
            }
            if !seen.insert(path) {
                return Err(TreeError::DuplicatePath(path.to_string()));
            }
            let (file_name, folders) = segments.split_last().expect("split yields one segment");
            let mut dir = &mut top;
            for folder in folders {
                if dir.files.contains_key(*folder) {
                    return Err(TreeError::FileFolderConflict(path.to_string()));
                }
                dir = dir.dirs.entry((*folder).to_string()).or_default();
            }
            if dir.dirs.contains_key(*file_name) {
                return Err(TreeError::FileFolderConflict(path.to_string()));
            }
            dir.files.insert((*file_name).to_string(), bytes);
        }

        let mut root = convert(String::new(), String::new(), top);
        let mut next_id = 0;
        assign_ids(&mut root, &mut next_id);
        Ok(Self { root })
    }

    pub fn from_head_files(files: &[HeadFile]) -> Result<Self, TreeError> {
        Self::build(files.iter().map(|f| (f.path.as_str(), f.bytes)))
    }

    /// Attaches status, bus factor and author shares to every node.
    pub fn enrich(&self, engine: &Engine<'_, S>) -> Self {
        let scopes = self.subtree_files();
        let mut tree = self.clone();
        enrich_node(&mut tree.root, &scopes, engine);
        tree
    }

    /// Nodes in preorder (id order).
    pub fn preorder(&self) -> impl Iterator<Item = &TreeNode<S>> {
        let mut stack = vec![&self.root];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    pub fn node_count(&self) -> usize {
        self.preorder().count()
    }

    pub fn find(&self, path: &str) -> Option<&TreeNode<S>> {
        self.preorder().find(|n| n.path == path)
    }

    /// For each node in preorder, the paths of all files beneath it.
    pub fn subtree_files(&self) -> Vec<Vec<&str>> {
        fn walk<'t, S>(node: &'t TreeNode<S>, out: &mut Vec<Vec<&'t str>>) -> usize {
            let slot = out.len();
            out.push(Vec::new());
            if node.is_file() {
                out[slot].push(node.path.as_str());
                return slot;
            }
            for child in &node.children {
                let child_slot = walk(child, out);
                let (head, tail) = out.split_at_mut(child_slot);
                head[slot].extend_from_slice(&tail[0]);
            }
            slot
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

fn convert<S>(name: String, path: String, dir: Dir) -> TreeNode<S> {
    let join = |child: &str| {
        if path.is_empty() {
            child.to_string()
        } else {
            format!("{path}/{child}")
        }
    };
    let mut children: Vec<TreeNode<S>> = dir
        .files
        .into_iter()
        .map(|(n, bytes)| {
            let p = join(&n);
            TreeNode::leaf(n, p, NodeKind::File, bytes)
        })
        .collect();
    for (n, sub) in dir.dirs {
        let p = join(&n);
        children.push(convert(n, p, sub));
    }
    children.sort_by(|a, b| a.bytes.cmp(&b.bytes).then_with(|| a.name.cmp(&b.name)));
    let mut node = TreeNode::leaf(name, path, NodeKind::Folder, 0);
    node.bytes = children.iter().map(|c| c.bytes).sum();
    node.children = children;
    node
}

fn assign_ids<S>(node: &mut TreeNode<S>, next: &mut usize) {
    node.id = *next;
    *next += 1;
    for child in &mut node.children {
        assign_ids(child, next);
    }
}

fn enrich_node<S: Scalar>(node: &mut TreeNode<S>, scopes: &[Vec<&str>], engine: &Engine<'_, S>) {
    let matrix = engine.matrix();
    let active: Vec<&str> = scopes[node.id]
        .iter()
        .copied()
        .filter(|f| matrix.is_active(f))
        .collect();
    node.status = if active.is_empty() {
        FileStatus::Inactive
    } else {
        FileStatus::Active
    };
    let analysis = engine.analyze(&node.path, active.iter().copied());
    node.bus_factor = analysis.result.bus_factor;
    let removed: BTreeSet<&str> = analysis
        .result
        .removal_trace
        .iter()
        .map(|r| r.author_id.as_str())
        .collect();
    let total: S = analysis.author_totals.iter().map(|(_, k)| *k).sum();
    node.authors = analysis
        .author_totals
        .into_iter()
        .map(|(id, knowledge)| AuthorShare {
            major: removed.contains(id.as_str()),
            share: knowledge / total,
            id,
            knowledge,
        })
        .collect();
    for child in &mut node.children {
        enrich_node(child, scopes, engine);
    }
}

/// One bus factor category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CategoryRange {
    pub label: String,
    pub color: String,
    pub min_bf: u32,
    /// Inclusive upper bound; `None` is unbounded.
    pub max_bf: Option<u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CategoryError {
    #[error("category config has no ranges")]
    Empty,
    #[error("duplicate category label {0:?}")]
    DuplicateLabel(String),
    #[error("invalid color {0:?}, expected #rrggbb")]
    InvalidColor(String),
    #[error("range {0:?} has max below min")]
    InvertedRange(String),
    #[error("ranges must be disjoint and cover [1, inf) without gaps; problem near {0:?}")]
    Coverage(String),
    #[error("bus factor {0} falls outside every range")]
    OutOfRange(u32),
}

/// Ordered bus factor categories used for coloring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryConfig {
    pub ranges: Vec<CategoryRange>,
}

impl Default for CategoryConfig {
    fn default() -> Self {
        let range = |label: &str, color: &str, min_bf, max_bf| CategoryRange {
            label: label.into(),
            color: color.into(),
            min_bf,
            max_bf,
        };
        Self {
            ranges: vec![
                range("Dangerous", "#d73027", 1, Some(1)),
                range("Low", "#fc8d59", 2, Some(2)),
                range("OK", "#1a9850", 3, None),
            ],
        }
    }
}

impl CategoryConfig {
    /// Checks that labels are unique and ranges tile `[1, inf)` in order.
    pub fn validate(&self) -> Result<(), CategoryError> {
        let Some(first) = self.ranges.first() else {
            return Err(CategoryError::Empty);
        };
        let mut labels = BTreeSet::new();
        for r in &self.ranges {
            if !labels.insert(r.label.as_str()) || r.label == NOT_APPLICABLE {
                return Err(CategoryError::DuplicateLabel(r.label.clone()));
            }
            let hex = r.color.strip_prefix('#').unwrap_or("");
            if hex.len() != 6 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(CategoryError::InvalidColor(r.color.clone()));
            }
            if r.max_bf.is_some_and(|max| max < r.min_bf) {
                return Err(CategoryError::InvertedRange(r.label.clone()));
            }
        }
        if first.min_bf > 1 {
            return Err(CategoryError::Coverage(first.label.clone()));
        }
        for pair in self.ranges.windows(2) {
            match pair[0].max_bf {
                Some(max) if pair[1].min_bf == max + 1 => {}
                _ => return Err(CategoryError::Coverage(pair[1].label.clone())),
            }
        }
        if self.ranges.last().is_some_and(|r| r.max_bf.is_some()) {
            return Err(CategoryError::Coverage(
                self.ranges.last().unwrap().label.clone(),
            ));
        }
        Ok(())
    }

    /// Category label for a bus factor.
    ///
    /// A bus factor of 0 (only reachable in simulations) falls into the
    /// lowest category when no range contains it.
    pub fn categorize(&self, bus_factor: BusFactor) -> Result<&str, CategoryError> {
        let BusFactor::Value(value) = bus_factor else {
            return Ok(NOT_APPLICABLE);
        };
        let contains = |r: &&CategoryRange| {
            r.min_bf <= value && r.max_bf.map_or(true, |max| value <= max)
        };
        if let Some(r) = self.ranges.iter().find(contains) {
            return Ok(&r.label);
        }
        match self.ranges.iter().min_by_key(|r| r.min_bf) {
            Some(lowest) if value == 0 && lowest.min_bf <= 1 => Ok(&lowest.label),
            _ => Err(CategoryError::OutOfRange(value)),
        }
    }
}

/// Category label of `bus_factor` under `config`.
pub fn categorize(bus_factor: BusFactor, config: &CategoryConfig) -> Result<&str, CategoryError> {
    config.categorize(bus_factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::KnowledgeMatrix;

    fn tree(files: &[(&str, u64)]) -> RepoTree<f64> {
        RepoTree::build(files.iter().copied()).unwrap()
    }

    #[test]
    fn single_file() {
        let t = tree(&[("a.txt", 10)]);
        assert_eq!(t.root.bytes, 10);
        assert_eq!(t.root.children.len(), 1);
        assert_eq!(t.root.children[0].kind, NodeKind::File);
        assert_eq!(t.root.children[0].path, "a.txt");
        assert_eq!(t.root.children[0].id, 1);
    }

    #[test]
    fn children_sorted_by_ascending_bytes() {
        let t = tree(&[("d/a", 1), ("d/b", 2), ("c", 4)]);
        let names: Vec<_> = t.root.children.iter().map(|c| (c.name.as_str(), c.bytes)).collect();
        assert_eq!(names, [("d", 3), ("c", 4)]);
        let ids: Vec<_> = t.preorder().map(|n| (n.id, n.path.as_str())).collect();
        assert_eq!(ids, [(0, ""), (1, "d"), (2, "d/a"), (3, "d/b"), (4, "c")]);
    }

    #[test]
    fn ties_ordered_by_name() {
        let t = tree(&[("b", 1), ("a", 1)]);
        assert_eq!(t.root.children[0].name, "a");
    }

    #[test]
    fn empty_tree() {
        let t = tree(&[]);
        assert_eq!(t.root.kind, NodeKind::Folder);
        assert_eq!(t.root.bytes, 0);
        assert!(t.root.children.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let dup = RepoTree::<f64>::build([("a", 1), ("a", 2)]);
        assert_eq!(dup, Err(TreeError::DuplicatePath("a".into())));
        let conflict = RepoTree::<f64>::build([("a", 1), ("a/b", 2)]);
        assert_eq!(conflict, Err(TreeError::FileFolderConflict("a/b".into())));
        let conflict = RepoTree::<f64>::build([("a/b", 1), ("a", 2)]);
        assert_eq!(conflict, Err(TreeError::FileFolderConflict("a".into())));
        assert!(RepoTree::<f64>::build([("/a", 1)]).is_err());
        assert!(RepoTree::<f64>::build([("a/../b", 1)]).is_err());
    }

    #[test]
    fn subtree_files_follow_preorder() {
        let t = tree(&[("d/a", 1), ("d/b", 2), ("c", 4)]);
        let scopes = t.subtree_files();
        assert_eq!(scopes[0], ["d/a", "d/b", "c"]);
        assert_eq!(scopes[1], ["d/a", "d/b"]);
        assert_eq!(scopes[4], ["c"]);
    }

    #[test]
    fn enrich_single_author_file() {
        let m = KnowledgeMatrix::<f64>::from_entries(0, vec![("a.txt", vec![("x", 2.0)])], &[]);
        let t = tree(&[("a.txt", 3)]).enrich(&Engine::new(&m));
        let file = &t.root.children[0];
        assert_eq!(file.bus_factor, BusFactor::Value(1));
        assert_eq!(file.authors.len(), 1);
        assert_eq!(file.authors[0].share, 1.0);
        assert!(file.authors[0].major);
        assert_eq!(t.root.status, FileStatus::Active);
    }

    #[test]
    fn enrich_inactive_file() {
        let m = KnowledgeMatrix::<f64>::from_entries(0, vec![("a", vec![("x", 1.0)])], &["old/b"]);
        let t = tree(&[("a", 1), ("old/b", 5)]).enrich(&Engine::new(&m));
        let old = t.find("old").unwrap();
        assert_eq!(old.status, FileStatus::Inactive);
        assert_eq!(old.bus_factor, BusFactor::NotApplicable);
        let b = t.find("old/b").unwrap();
        assert_eq!(b.bus_factor, BusFactor::NotApplicable);
        assert!(b.authors.is_empty());
        assert_eq!(t.root.bus_factor, BusFactor::Value(1));
    }

    #[test]
    fn enrich_folder_shares() {
        let m = KnowledgeMatrix::<f64>::from_entries(
            0,
            vec![
                ("src/f1", vec![("a", 1.5)]),
                ("src/f2", vec![("a", 1.5)]),
                ("src/f3", vec![("b", 1.0)]),
                ("src/f4", vec![("b", 1.0)]),
            ],
            &[],
        );
        let t = tree(&[("src/f1", 1), ("src/f2", 1), ("src/f3", 1), ("src/f4", 1)])
            .enrich(&Engine::new(&m));
        let src = t.find("src").unwrap();
        assert_eq!(src.bus_factor, BusFactor::Value(2));
        assert_eq!(src.authors[0].id, "a");
        assert!((src.authors[0].share - 0.6).abs() < 1e-12);
        assert!((src.authors[1].share - 0.4).abs() < 1e-12);
        assert!(src.authors.iter().all(|a| a.major));
    }

    #[test]
    fn default_categories() {
        let cfg = CategoryConfig::default();
        cfg.validate().unwrap();
        assert_eq!(categorize(BusFactor::NotApplicable, &cfg), Ok("Not Applicable"));
        assert_eq!(categorize(BusFactor::Value(1), &cfg), Ok("Dangerous"));
        assert_eq!(categorize(BusFactor::Value(2), &cfg), Ok("Low"));
        assert_eq!(categorize(BusFactor::Value(5), &cfg), Ok("OK"));
        assert_eq!(categorize(BusFactor::Value(0), &cfg), Ok("Dangerous"));
    }

    #[test]
    fn category_validation_errors() {
        let mut cfg = CategoryConfig::default();
        cfg.ranges[1].min_bf = 3;
        cfg.ranges[1].max_bf = Some(3);
        assert!(matches!(cfg.validate(), Err(CategoryError::Coverage(_))));
        assert_eq!(cfg.categorize(BusFactor::Value(2)), Err(CategoryError::OutOfRange(2)));

        let mut cfg = CategoryConfig::default();
        cfg.ranges[2].label = "Low".into();
        assert!(matches!(cfg.validate(), Err(CategoryError::DuplicateLabel(_))));

        let mut cfg = CategoryConfig::default();
        cfg.ranges[0].color = "red".into();
        assert!(matches!(cfg.validate(), Err(CategoryError::InvalidColor(_))));

        let mut cfg = CategoryConfig::default();
        cfg.ranges[2].max_bf = Some(10);
        assert!(matches!(cfg.validate(), Err(CategoryError::Coverage(_))));

        assert_eq!(CategoryConfig { ranges: vec![] }.validate(), Err(CategoryError::Empty));
    }
}
