//! Greedy bus factor computation.
//!
//! Authors are removed in descending order of their knowledge summed over the
//! scope (ties by author id) until fewer than half of the scope's active files
//! still have a major author left. The number of removed authors is the bus
//! factor.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::knowledge::{select_majors, KnowledgeMatrix};
use crate::scalar::Scalar;
use crate::tree::RepoTree;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown authors: {}", .0.join(", "))]
    UnknownAuthors(Vec<String>),
}

/// Bus factor of a scope; not applicable when it holds no active file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BusFactor {
    #[default]
    NotApplicable,
    Value(u32),
}

impl BusFactor {
    pub fn value(self) -> Option<u32> {
        match self {
            BusFactor::Value(v) => Some(v),
            BusFactor::NotApplicable => None,
        }
    }

    pub fn is_applicable(self) -> bool {
        matches!(self, BusFactor::Value(_))
    }
}

impl From<Option<u32>> for BusFactor {
    fn from(value: Option<u32>) -> Self {
        value.map_or(BusFactor::NotApplicable, BusFactor::Value)
    }
}

impl fmt::Display for BusFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BusFactor::Value(v) => write!(f, "{v}"),
            BusFactor::NotApplicable => f.write_str("Not Applicable"),
        }
    }
}

impl Serialize for BusFactor {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        self.value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BusFactor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Option::<u32>::deserialize(deserializer).map(Into::into)
    }
}

/// One greedy step: the removed author and the coverage left afterwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Removal {
    pub author_id: String,
    pub covered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BusFactorResult {
    pub scope: String,
    pub bus_factor: BusFactor,
    pub removal_trace: Vec<Removal>,
    pub total_active_files: usize,
}

/// Bus factor together with the per-author knowledge totals it was ranked by.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeAnalysis<S> {
    pub result: BusFactorResult,
    /// Descending by knowledge, ties by author id.
    pub author_totals: Vec<(String, S)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationDelta {
    pub path: String,
    pub original_bf: BusFactor,
    pub simulated_bf: BusFactor,
    pub delta: i64,
}

impl SimulationDelta {
    pub fn new(path: String, original_bf: BusFactor, simulated_bf: BusFactor) -> Self {
        let delta = match (original_bf, simulated_bf) {
            (BusFactor::Value(o), BusFactor::Value(s)) => i64::from(s) - i64::from(o),
            _ => 0,
        };
        Self {
            path,
            original_bf,
            simulated_bf,
            delta,
        }
    }
}

/// Bus factor calculator over one matrix, with major authors precomputed.
pub struct Engine<'m, S: Scalar> {
    matrix: &'m KnowledgeMatrix<S>,
    majors: HashMap<&'m str, Vec<String>>,
}

impl<'m, S: Scalar> Engine<'m, S> {
    pub fn new(matrix: &'m KnowledgeMatrix<S>) -> Self {
        let majors = matrix
            .active_files()
            .map(|path| (path, select_majors(matrix.authors_of(path).collect())))
            .collect();
        Self { matrix, majors }
    }

    pub fn matrix(&self) -> &'m KnowledgeMatrix<S> {
        self.matrix
    }

    pub fn majors(&self, path: &str) -> &[String] {
        self.majors.get(path).map_or(&[], Vec::as_slice)
    }

    /// Active files in `scope` that keep at least one major author.
    pub fn coverage<'a, I>(&self, scope: I, removed: &BTreeSet<String>) -> usize
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.active_scope(scope)
            .into_iter()
            .filter(|f| self.majors(f).iter().any(|m| !removed.contains(m)))
            .count()
    }

    pub fn bus_factor<'a, I>(&self, scope_name: &str, scope: I) -> BusFactorResult
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.analyze(scope_name, scope).result
    }

    /// Greedy removal over the active files of `scope`.
    pub fn analyze<'a, I>(&self, scope_name: &str, scope: I) -> ScopeAnalysis<S>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let files = self.active_scope(scope);
        let total = files.len();

        let mut totals: HashMap<&str, S> = HashMap::new();
        let mut major_of: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut remaining = Vec::with_capacity(total);
        for (idx, file) in files.iter().enumerate() {
            for (author, k) in self.matrix.authors_of(file) {
                let slot = totals.entry(author).or_insert_with(S::zero);
                *slot = *slot + k;
            }
            let majors = self.majors(file);
            for m in majors {
                major_of.entry(m.as_str()).or_default().push(idx);
            }
            remaining.push(majors.len());
        }
        let mut order: Vec<(&str, S)> = totals.into_iter().collect();
        order.sort_by(|(a, ka), (b, kb)| kb.partial_cmp(ka).unwrap().then_with(|| a.cmp(b)));

        let mut covered = remaining.iter().filter(|r| **r > 0).count();
        let mut trace = Vec::new();
        let mut candidates = order.iter();
        while total > 0 && covered * 2 >= total {
            let Some((author, _)) = candidates.next() else {
                break;
            };
            for &idx in major_of.get(author).map_or(&[][..], Vec::as_slice) {
                remaining[idx] -= 1;
                if remaining[idx] == 0 {
                    covered -= 1;
                }
            }
            trace.push(Removal {
                author_id: (*author).to_string(),
                covered,
            });
        }

        let bus_factor = if total == 0 {
            BusFactor::NotApplicable
        } else {
            BusFactor::Value(trace.len() as u32)
        };
        ScopeAnalysis {
            result: BusFactorResult {
                scope: scope_name.to_string(),
                bus_factor,
                removal_trace: trace,
                total_active_files: total,
            },
            author_totals: order.into_iter().map(|(a, k)| (a.to_string(), k)).collect(),
        }
    }

    /// Deduplicated active files of `scope`, sorted by path.
    fn active_scope<'a, I>(&self, scope: I) -> Vec<&'m str>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut files: Vec<&'m str> = scope
            .into_iter()
            .filter_map(|f| self.majors.get_key_value(f).map(|(k, _)| *k))
            .collect();
        files.sort_unstable();
        files.dedup();
        files
    }
}

/// Number of active files in `scope` with a major author outside `removed`.
pub fn coverage<S: Scalar>(
    matrix: &KnowledgeMatrix<S>,
    scope: &BTreeSet<String>,
    removed: &BTreeSet<String>,
) -> usize {
    Engine::new(matrix).coverage(scope.iter().map(String::as_str), removed)
}

/// Bus factor of the whole `scope`, reported under the scope name "".
pub fn bus_factor<S: Scalar>(
    matrix: &KnowledgeMatrix<S>,
    scope: &BTreeSet<String>,
) -> BusFactorResult {
    Engine::new(matrix).bus_factor("", scope.iter().map(String::as_str))
}

/// Recomputes every node's bus factor with `excluded` authors removed from
/// the matrix. Files left without authors stay in each scope as uncovered.
pub fn simulate<S: Scalar>(
    matrix: &KnowledgeMatrix<S>,
    tree: &RepoTree<S>,
    excluded: &BTreeSet<String>,
) -> Result<Vec<SimulationDelta>, EngineError> {
    let known = matrix.authors();
    let unknown: Vec<String> = excluded
        .iter()
        .filter(|a| !known.contains(a.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(EngineError::UnknownAuthors(unknown));
    }

    let view = matrix.without_authors(excluded);
    let engine = Engine::new(&view);
    let scopes = tree.subtree_files();
    Ok(tree
        .preorder()
        .zip(scopes.iter())
        .map(|(node, files)| {
            let simulated = engine
                .bus_factor(&node.path, files.iter().copied())
                .bus_factor;
            SimulationDelta::new(node.path.clone(), node.bus_factor, simulated)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// a is sole major of f1,f2 (1.5 each); b of f3,f4 (1.0 each).
    pub(crate) fn four_file() -> KnowledgeMatrix<f64> {
        KnowledgeMatrix::from_entries(
            0,
            vec![
                ("f1", vec![("a", 1.5)]),
                ("f2", vec![("a", 1.5)]),
                ("f3", vec![("b", 1.0)]),
                ("f4", vec![("b", 1.0)]),
            ],
            &[],
        )
    }

    #[test]
    fn coverage_examples() {
        let m = KnowledgeMatrix::<f64>::from_entries(
            0,
            vec![("f", vec![("a", 1.0)]), ("g", vec![("a", 1.0), ("b", 1.0)])],
            &[],
        );
        let scope = set(&["f", "g"]);
        assert_eq!(coverage(&m, &scope, &set(&[])), 2);
        assert_eq!(coverage(&m, &scope, &set(&["a", "b"])), 0);
        assert_eq!(coverage(&m, &scope, &set(&["a"])), 1);
    }

    #[test]
    fn single_owner_of_three_files() {
        let m = KnowledgeMatrix::<f64>::from_entries(
            0,
            vec![("f1", vec![("x", 1.0)]), ("f2", vec![("x", 2.0)]), ("f3", vec![("x", 0.5)])],
            &[],
        );
        let r = bus_factor(&m, &set(&["f1", "f2", "f3"]));
        assert_eq!(r.bus_factor, BusFactor::Value(1));
        assert_eq!(
            r.removal_trace,
            vec![Removal { author_id: "x".into(), covered: 0 }]
        );
    }

    #[test]
    fn half_coverage_is_not_less_than_half() {
        let r = bus_factor(&four_file(), &set(&["f1", "f2", "f3", "f4"]));
        assert_eq!(r.bus_factor, BusFactor::Value(2));
        assert_eq!(
            r.removal_trace,
            vec![
                Removal { author_id: "a".into(), covered: 2 },
                Removal { author_id: "b".into(), covered: 0 },
            ]
        );
        assert_eq!(r.total_active_files, 4);
    }

    #[test]
    fn dominant_author_over_ten_files() {
        let mut entries = Vec::new();
        for i in 0..6 {
            entries.push((format!("f{i}"), vec![("top", 3.0), ("minor", 0.5)]));
        }
        for i in 6..10 {
            entries.push((format!("f{i}"), vec![("other", 1.0)]));
        }
        let m = KnowledgeMatrix::<f64>::from_entries(0, entries, &[]);
        let scope: BTreeSet<String> = (0..10).map(|i| format!("f{i}")).collect();
        let r = bus_factor(&m, &scope);
        assert_eq!(r.bus_factor, BusFactor::Value(1));
        assert_eq!(r.removal_trace[0].author_id, "top");
        assert_eq!(r.removal_trace[0].covered, 4);
    }

    #[test]
    fn empty_scope_is_not_applicable() {
        let r = bus_factor(&four_file(), &set(&[]));
        assert_eq!(r.bus_factor, BusFactor::NotApplicable);
        assert!(r.removal_trace.is_empty());
        assert_eq!(r.total_active_files, 0);
    }

    #[test]
    fn inactive_and_unknown_files_are_ignored() {
        let m = KnowledgeMatrix::<f64>::from_entries(0, vec![("f", vec![("a", 1.0)])], &["old"]);
        let r = bus_factor(&m, &set(&["f", "old", "nope"]));
        assert_eq!(r.total_active_files, 1);
        assert_eq!(r.bus_factor, BusFactor::Value(1));
    }

    #[test]
    fn ties_break_by_author_id() {
        let m = KnowledgeMatrix::<f64>::from_entries(
            0,
            vec![("f1", vec![("b", 1.0)]), ("f2", vec![("a", 1.0)])],
            &[],
        );
        let r = bus_factor(&m, &set(&["f1", "f2"]));
        let order: Vec<_> = r.removal_trace.iter().map(|x| x.author_id.as_str()).collect();
        assert_eq!(order, ["a", "b"]);
        assert_eq!(r.bus_factor, BusFactor::Value(2));
    }

    #[test]
    fn fully_excluded_scope_has_zero_bus_factor() {
        let view = four_file().without_authors(&set(&["a", "b"]));
        let r = bus_factor(&view, &set(&["f1", "f2", "f3", "f4"]));
        assert_eq!(r.bus_factor, BusFactor::Value(0));
        assert!(r.removal_trace.is_empty());
    }

    #[test]
    fn delta_is_zero_when_not_applicable() {
        let d = SimulationDelta::new("x".into(), BusFactor::NotApplicable, BusFactor::Value(1));
        assert_eq!(d.delta, 0);
        let d = SimulationDelta::new("x".into(), BusFactor::Value(2), BusFactor::Value(1));
        assert_eq!(d.delta, -1);
    }

    #[test]
    fn bus_factor_serializes_as_number_or_null() {
        assert_eq!(serde_json::to_string(&BusFactor::Value(3)).unwrap(), "3");
        assert_eq!(serde_json::to_string(&BusFactor::NotApplicable).unwrap(), "null");
        let back: BusFactor = serde_json::from_str("null").unwrap();
        assert_eq!(back, BusFactor::NotApplicable);
    }
}
