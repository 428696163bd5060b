use std::collections::BTreeSet;
use std::time::Instant;

use busfactor_core::engine::{self, Engine};
use busfactor_core::knowledge::KnowledgeMatrix;
use busfactor_core::tree::RepoTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn simulate_on_fifty_thousand_nodes_is_fast() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // 10 x 10 x 10 folders holding 49 files each: 1110 folders + 49000 files.
    let mut entries = Vec::new();
    for a in 0..10 {
        for b in 0..10 {
            for c in 0..10 {
                for f in 0..49 {
                    let path = format!("d{a}/d{b}/d{c}/f{f}.rs");
                    let authors: Vec<(String, f64)> = (0..rng.random_range(1..=3))
                        .map(|_| (format!("a{}@x", rng.random_range(0..60)), rng.random_range(0.01..5.0)))
                        .collect();
                    entries.push((path, authors));
                }
            }
        }
    }
    let files: Vec<(String, u64)> = entries.iter().map(|(p, _)| (p.clone(), 100)).collect();
    let matrix: KnowledgeMatrix<f64> = KnowledgeMatrix::from_entries(0, entries, &[]);
    let tree = RepoTree::build(files.iter().map(|(p, b)| (p.as_str(), *b)))
        .unwrap()
        .enrich(&Engine::new(&matrix));
    assert_eq!(tree.node_count(), 1 + 1110 + 49_000);

    let excluded: BTreeSet<String> = (0..5).map(|i| format!("a{i}@x")).collect();
    let start = Instant::now();
    let deltas = engine::simulate(&matrix, &tree, &excluded).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(deltas.len(), tree.node_count());
    for d in &deltas {
        if let (Some(o), Some(n)) = (d.original_bf.value(), d.simulated_bf.value()) {
            assert_eq!(d.delta, i64::from(n) - i64::from(o));
        }
    }
    assert!(elapsed.as_secs_f64() < 2.0, "simulate took {elapsed:?}");
}
