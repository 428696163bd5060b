//! Naive reference implementation of the greedy bus factor, written
//! directly from the definition and sharing no code with the engine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Instance = Vec<BTreeMap<String, f64>>;

fn is_major(file: &BTreeMap<String, f64>, author: &str) -> bool {
    let max = file.values().cloned().fold(0.0, f64::max);
    file.get(author).is_some_and(|k| *k >= 0.75 * max)
}

fn covered(files: &Instance, removed: &BTreeSet<String>) -> usize {
    files
        .iter()
        .filter(|f| f.keys().any(|a| !removed.contains(a) && is_major(f, a)))
        .count()
}

/// Returns `None` for an empty scope.
pub fn naive_bus_factor(files: &Instance) -> Option<usize> {
    if files.is_empty() {
        return None;
    }
    let half = 0.5 * files.len() as f64;
    let mut removed = BTreeSet::new();
    loop {
        if (covered(files, &removed) as f64) < half {
            return Some(removed.len());
        }
        let mut best: Option<(String, f64)> = None;
        let authors: BTreeSet<&String> = files.iter().flat_map(|f| f.keys()).collect();
        for author in authors {
            if removed.contains(author) {
                continue;
            }
            let total: f64 = files.iter().filter_map(|f| f.get(author)).sum();
            let better = match &best {
                None => true,
                Some((_, t)) => total > *t,
            };
            if better {
                best = Some((author.clone(), total));
            }
        }
        match best {
            Some((author, _)) => {
                removed.insert(author);
            }
            None => return Some(removed.len()),
        }
    }
}

/// Random instance with up to 6 authors and up to 10 files, every file
/// holding at least one author with knowledge in (0, 1].
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let authors = rng.random_range(1..=6usize);
    let files = rng.random_range(1..=10usize);
    (0..files)
        .map(|_| {
            let mut file = BTreeMap::new();
            for a in 0..authors {
                if rng.random_bool(0.5) {
                    file.insert(format!("author{a}"), 1.0 - rng.random::<f64>());
                }
            }
            if file.is_empty() {
                let a = rng.random_range(0..authors);
                file.insert(format!("author{a}"), 1.0 - rng.random::<f64>());
            }
            file
        })
        .collect()
}
