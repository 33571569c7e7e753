//! Partition agreement scores against known labels.

use std::collections::HashMap;
use std::hash::Hash;

fn contingency<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> (Vec<Vec<u64>>, Vec<u64>, Vec<u64>) {
    let mut ia: HashMap<&A, usize> = HashMap::new();
    let mut ib: HashMap<&B, usize> = HashMap::new();
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        let na = ia.len();
        let i = *ia.entry(x).or_insert(na);
        let nb = ib.len();
        let j = *ib.entry(y).or_insert(nb);
        cells.push((i, j));
    }
    let mut table = vec![vec![0u64; ib.len()]; ia.len()];
    for (i, j) in cells {
        table[i][j] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..ib.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    (table, rows, cols)
}

fn pairs(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index of two labellings of the same items. Identical
/// partitions score 1; chance agreement scores about 0.
///
/// # Panics
/// If the slices differ in length.
pub fn adjusted_rand_index<A: Hash + Eq, B: Hash + Eq>(truth: &[A], predicted: &[B]) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "labellings differ in length");
    let n = truth.len() as u64;
    if n < 2 {
        return 1.0;
    }
    let (table, rows, cols) = contingency(truth, predicted);
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.iter().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.iter().map(|&c| pairs(c)).sum();
    let expected = sum_rows * sum_cols / pairs(n);
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        // both partitions trivial (all singletons or one block)
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Fraction of items whose cluster's majority class matches their own class.
pub fn purity<A: Hash + Eq, B: Hash + Eq>(truth: &[A], predicted: &[B]) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "labellings differ in length");
    if truth.is_empty() {
        return 1.0;
    }
    // rows index classes, columns clusters
    let (table, _, _) = contingency(truth, predicted);
    let n_clusters = table.first().map_or(0, Vec::len);
    let hits: u64 = (0..n_clusters)
        .map(|j| table.iter().map(|r| r[j]).max().unwrap_or(0))
        .sum();
    hits as f64 / truth.len() as f64
}
