//! Token-level Levenshtein distance.

use crate::scene::ObjectId;

/// Minimum insertions, deletions and substitutions turning `a` into `b`.
pub fn levenshtein(a: &[ObjectId], b: &[ObjectId]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (diag + usize::from(x != y)).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

/// Levenshtein distance divided by the longer length; 0 when both are empty.
pub fn ned(p: &[ObjectId], g: &[ObjectId]) -> f64 {
    let longest = p.len().max(g.len());
    if longest == 0 {
        0.0
    } else {
        levenshtein(p, g) as f64 / longest as f64
    }
}
