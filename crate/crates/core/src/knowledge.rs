//! Decay-weighted per-file knowledge.
//!
//! Every contribution event adds `0.5^(age / HALF_LIFE_DAYS)` to its author's
//! knowledge of the file, with age measured back from the reference time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::miner::{MiningResult, SECONDS_PER_DAY};
use crate::scalar::Scalar;

/// Five months of 30.44 days, rounded.
pub const HALF_LIFE_DAYS: u32 = 152;
/// Fraction of a file's top knowledge an author needs to count as major.
pub const MAJOR_THRESHOLD: f64 = 0.75;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("age must be non-negative, got {0} days")]
    NegativeAge(f64),
    #[error("{0} is not an active file")]
    InactiveFile(String),
}

/// Weight of a contribution made `age_days` before the reference time.
pub fn decay_weight<S: Scalar>(age_days: S) -> Result<S, ModelError> {
    if !(age_days >= S::zero()) {
        return Err(ModelError::NegativeAge(age_days.to_f64_lossy()));
    }
    let half_life = S::from_f64_lossy(f64::from(HALF_LIFE_DAYS));
    Ok(S::from_f64_lossy(0.5).powf(age_days / half_life))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FileStatus {
    Active,
    Inactive,
}

impl FileStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FileStatus::Active => "ACTIVE",
            FileStatus::Inactive => "INACTIVE",
        }
    }
}

/// Major authors of one file, strongest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MajorAuthorSet {
    pub path: String,
    pub majors: Vec<String>,
}

/// Per-file, per-author knowledge.
///
/// Only ACTIVE files have entries; every head file has a status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", bound = "")]
pub struct KnowledgeMatrix<S: Scalar> {
    reference_time: i64,
    entries: BTreeMap<String, BTreeMap<String, S>>,
    file_status: BTreeMap<String, FileStatus>,
}

impl<S: Scalar> KnowledgeMatrix<S> {
    /// Builds the matrix from mined events, discarding `bots`.
    ///
    /// Files at head without in-window human events are INACTIVE; events on
    /// paths no longer at head are dropped.
    pub fn build(mining: &MiningResult, bots: &BTreeSet<String>) -> Self {
        let mut file_status: BTreeMap<String, FileStatus> = mining
            .files
            .iter()
            .map(|f| (f.path.clone(), FileStatus::Inactive))
            .collect();
        let mut entries: BTreeMap<String, BTreeMap<String, S>> = BTreeMap::new();
        let day = S::from_f64_lossy(SECONDS_PER_DAY as f64);

        for event in &mining.events {
            if bots.contains(&event.author_id) || !file_status.contains_key(&event.path) {
                continue;
            }
            let age_seconds = (mining.reference_time - event.timestamp_utc).max(0);
            let weight = decay_weight(S::from_f64_lossy(age_seconds as f64) / day)
                .expect("age clamped to non-negative");
            let slot = entries
                .entry(event.path.clone())
                .or_default()
                .entry(event.author_id.clone())
                .or_insert_with(S::zero);
            *slot = *slot + weight;
        }
        for path in entries.keys() {
            file_status.insert(path.clone(), FileStatus::Active);
        }
        Self {
            reference_time: mining.reference_time,
            entries,
            file_status,
        }
    }

    /// Assembles a matrix directly from knowledge values.
    ///
    /// Files with a non-empty author map are ACTIVE; `inactive` lists extra
    /// head files without knowledge. Negative or non-finite values are
    /// dropped.
    pub fn from_entries<I, P, A>(reference_time: i64, entries: I, inactive: &[&str]) -> Self
    where
        I: IntoIterator<Item = (P, Vec<(A, S)>)>,
        P: Into<String>,
        A: Into<String>,
    {
        let mut matrix = Self {
            reference_time,
            entries: BTreeMap::new(),
            file_status: BTreeMap::new(),
        };
        for (path, authors) in entries {
            let path = path.into();
            let map: BTreeMap<String, S> = authors
                .into_iter()
                .map(|(a, k)| (a.into(), k))
                .filter(|(_, k)| k.is_finite() && *k > S::zero())
                .collect();
            let status = if map.is_empty() {
                FileStatus::Inactive
            } else {
                matrix.entries.insert(path.clone(), map);
                FileStatus::Active
            };
            matrix.file_status.insert(path, status);
        }
        for path in inactive {
            matrix
                .file_status
                .entry((*path).to_string())
                .or_insert(FileStatus::Inactive);
        }
        matrix
    }

    pub fn reference_time(&self) -> i64 {
        self.reference_time
    }

    pub fn status(&self, path: &str) -> Option<FileStatus> {
        self.file_status.get(path).copied()
    }

    pub fn is_active(&self, path: &str) -> bool {
        self.status(path) == Some(FileStatus::Active)
    }

    /// All head files with their status, sorted by path.
    pub fn files(&self) -> impl Iterator<Item = (&str, FileStatus)> {
        self.file_status.iter().map(|(p, s)| (p.as_str(), *s))
    }

    pub fn active_files(&self) -> impl Iterator<Item = &str> {
        self.file_status
            .iter()
            .filter(|(_, s)| **s == FileStatus::Active)
            .map(|(p, _)| p.as_str())
    }

    /// Knowledge of every author on `path`; empty for inactive or unknown paths.
    pub fn authors_of(&self, path: &str) -> impl Iterator<Item = (&str, S)> {
        self.entries
            .get(path)
            .into_iter()
            .flat_map(|m| m.iter().map(|(a, k)| (a.as_str(), *k)))
    }

    pub fn knowledge(&self, path: &str, author: &str) -> S {
        self.entries
            .get(path)
            .and_then(|m| m.get(author))
            .copied()
            .unwrap_or_else(S::zero)
    }

    /// Every author holding knowledge on some file.
    pub fn authors(&self) -> BTreeSet<&str> {
        self.entries
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }

    /// Authors with knowledge at least `MAJOR_THRESHOLD` of the file's top
    /// value, descending by knowledge, ties by author id.
    ///
    /// A file whose author map was emptied by [`Self::without_authors`] has
    /// no majors.
    pub fn major_authors(&self, path: &str) -> Result<MajorAuthorSet, ModelError> {
        if !self.is_active(path) {
            return Err(ModelError::InactiveFile(path.to_string()));
        }
        let authors: Vec<(&str, S)> = self.authors_of(path).collect();
        Ok(MajorAuthorSet {
            path: path.to_string(),
            majors: select_majors(authors),
        })
    }

    /// A view with the given authors' knowledge deleted.
    ///
    /// File statuses are kept, so files that lose every author stay ACTIVE
    /// and count as uncovered.
    pub fn without_authors(&self, excluded: &BTreeSet<String>) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(path, authors)| {
                let kept = authors
                    .iter()
                    .filter(|(a, _)| !excluded.contains(*a))
                    .map(|(a, k)| (a.clone(), *k))
                    .collect();
                (path.clone(), kept)
            })
            .collect();
        Self {
            reference_time: self.reference_time,
            entries,
            file_status: self.file_status.clone(),
        }
    }

    /// Elementwise sum; statuses merge with ACTIVE taking precedence.
    pub fn merged(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (path, authors) in &other.entries {
            let target = out.entries.entry(path.clone()).or_default();
            for (author, k) in authors {
                let slot = target.entry(author.clone()).or_insert_with(S::zero);
                *slot = *slot + *k;
            }
        }
        for (path, status) in &other.file_status {
            let slot = out.file_status.entry(path.clone()).or_insert(*status);
            if *status == FileStatus::Active {
                *slot = FileStatus::Active;
            }
        }
        out
    }
}

/// Major-author selection over one file's (author, knowledge) pairs.
pub(crate) fn select_majors<S: Scalar>(mut authors: Vec<(&str, S)>) -> Vec<String> {
    let Some(max) = authors.iter().map(|(_, k)| *k).reduce(S::max) else {
        return Vec::new();
    };
    let cutoff = S::from_f64_lossy(MAJOR_THRESHOLD) * max;
    authors.retain(|(_, k)| *k >= cutoff);
    authors.sort_by(|(a, ka), (b, kb)| kb.partial_cmp(ka).unwrap().then_with(|| a.cmp(b)));
    authors.into_iter().map(|(a, _)| a.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::{ContributionEvent, HeadFile};

    const DAY: i64 = SECONDS_PER_DAY;
    const REF: i64 = 1_700_000_000;

    fn event(author: &str, path: &str, age_days: i64) -> ContributionEvent {
        ContributionEvent {
            author_id: author.into(),
            path: path.into(),
            commit_id: format!("c{age_days}"),
            timestamp_utc: REF - age_days * DAY,
        }
    }

    fn mining(events: Vec<ContributionEvent>, files: &[&str]) -> MiningResult {
        MiningResult {
            events,
            reference_time: REF,
            files: files
                .iter()
                .map(|p| HeadFile { path: (*p).into(), bytes: 1 })
                .collect(),
            commit_count_scanned: 0,
            commit_count_in_window: 0,
        }
    }

    #[test]
    fn decay_examples() {
        assert_eq!(decay_weight(0.0f64).unwrap(), 1.0);
        assert!((decay_weight(152.0f64).unwrap() - 0.5).abs() < 1e-15);
        assert!((decay_weight(456.0f64).unwrap() - 0.125).abs() < 1e-15);
        assert!((decay_weight(152.0f32).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn decay_rejects_negative_and_nan() {
        assert_eq!(decay_weight(-1.0f64), Err(ModelError::NegativeAge(-1.0)));
        assert!(decay_weight(f64::NAN).is_err());
    }

    #[test]
    fn single_event_at_reference_time() {
        let m = KnowledgeMatrix::<f64>::build(&mining(vec![event("a", "f", 0)], &["f"]), &BTreeSet::new());
        assert_eq!(m.knowledge("f", "a"), 1.0);
        assert!(m.is_active("f"));
    }

    #[test]
    fn two_events_sum_decay_weights() {
        let m = KnowledgeMatrix::<f64>::build(
            &mining(vec![event("a", "f", 0), event("a", "f", 152)], &["f"]),
            &BTreeSet::new(),
        );
        assert!((m.knowledge("f", "a") - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bot_only_file_is_inactive() {
        let bots: BTreeSet<String> = ["bot".to_string()].into();
        let m = KnowledgeMatrix::<f64>::build(
            &mining(vec![event("bot", "f", 0), event("a", "g", 0)], &["f", "g"]),
            &bots,
        );
        assert_eq!(m.status("f"), Some(FileStatus::Inactive));
        assert_eq!(m.authors_of("f").count(), 0);
        assert!(!m.authors().contains("bot"));
        assert!(m.is_active("g"));
    }

    #[test]
    fn untouched_head_files_are_inactive_and_deleted_paths_dropped() {
        let m = KnowledgeMatrix::<f64>::build(
            &mining(vec![event("a", "gone", 0), event("a", "f", 1)], &["f", "old"]),
            &BTreeSet::new(),
        );
        assert_eq!(m.status("old"), Some(FileStatus::Inactive));
        assert_eq!(m.status("gone"), None);
        assert_eq!(m.active_files().collect::<Vec<_>>(), vec!["f"]);
    }

    #[test]
    fn empty_events_give_all_inactive() {
        let m = KnowledgeMatrix::<f64>::build(&mining(vec![], &["a", "b"]), &BTreeSet::new());
        assert_eq!(m.active_files().count(), 0);
        assert_eq!(m.files().count(), 2);
    }

    #[test]
    fn major_author_examples() {
        let m = KnowledgeMatrix::<f64>::from_entries(
            0,
            vec![
                ("f", vec![("a", 10.0), ("b", 8.0), ("c", 1.0)]),
                ("g", vec![("a", 4.0)]),
                ("h", vec![("b", 7.5), ("a", 10.0)]),
            ],
            &["old"],
        );
        assert_eq!(m.major_authors("f").unwrap().majors, ["a", "b"]);
        assert_eq!(m.major_authors("g").unwrap().majors, ["a"]);
        assert_eq!(m.major_authors("h").unwrap().majors, ["a", "b"]);
        assert_eq!(
            m.major_authors("old"),
            Err(ModelError::InactiveFile("old".into()))
        );
    }

    #[test]
    fn majors_tie_break_lexicographically() {
        let m = KnowledgeMatrix::<f64>::from_entries(0, vec![("f", vec![("z", 2.0), ("b", 2.0), ("m", 2.0)])], &[]);
        assert_eq!(m.major_authors("f").unwrap().majors, ["b", "m", "z"]);
    }

    #[test]
    fn exclusion_keeps_status() {
        let m = KnowledgeMatrix::<f64>::from_entries(0, vec![("f", vec![("a", 1.0)])], &[]);
        let view = m.without_authors(&["a".to_string()].into());
        assert!(view.is_active("f"));
        assert!(view.major_authors("f").unwrap().majors.is_empty());
    }

    #[test]
    fn matrix_json_round_trip_is_exact() {
        let m = KnowledgeMatrix::<f64>::build(
            &mining(vec![event("a", "f", 3), event("b", "f", 100)], &["f", "old"]),
            &BTreeSet::new(),
        );
        let json = serde_json::to_string(&m).unwrap();
        let back: KnowledgeMatrix<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
