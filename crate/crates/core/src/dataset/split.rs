use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AgeBucket, LabeledRecord};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Test,
}

/// Seeded train/test split stratified by age bucket.
///
/// The overall test size is `round(n * test_fraction)` (kept within
/// `1..n`). It is apportioned across buckets by largest remainder, with every
/// bucket of two or more records placing at least one record on each side.
/// Returns sorted `(train, test)` record indices.
pub fn split(
    records: &[LabeledRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = records.len();
    if n < 2 {
        return Err(Error::Empty(format!("need at least 2 records to split, got {n}")));
    }

    let mut rng = rng::seeded(seed);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); AgeBucket::ALL.len()];
    for (i, r) in records.iter().enumerate() {
        groups[r.bucket.index()].push(i);
    }
    for g in &mut groups {
        g.shuffle(&mut rng);
    }

    let target = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let quotas: Vec<f64> = groups.iter().map(|g| g.len() as f64 * test_fraction).collect();
    let bounds: Vec<(usize, usize)> = groups
        .iter()
        .map(|g| if g.len() >= 2 { (1, g.len() - 1) } else { (0, 0) })
        .collect();
    let mut alloc: Vec<usize> = quotas
        .iter()
        .zip(&bounds)
        .map(|(q, (lo, hi))| (q.floor() as usize).clamp(*lo, *hi))
        .collect();

    // A single-record dataset bucket cannot be split; such records train.
    let mut total: usize = alloc.iter().sum();
    while total < target {
        let pick = (0..groups.len())
            .filter(|&b| alloc[b] < bounds[b].1)
            .max_by(|&a, &b| {
                let ra = quotas[a] - alloc[a] as f64;
                let rb = quotas[b] - alloc[b] as f64;
                // earlier bucket wins ties
                ra.total_cmp(&rb).then(b.cmp(&a))
            });
        match pick {
            Some(b) => {
                alloc[b] += 1;
                total += 1;
            }
            None => break,
        }
    }
    while total > target {
        let pick = (0..groups.len())
            .filter(|&b| alloc[b] > bounds[b].0)
            .min_by(|&a, &b| {
                let ra = quotas[a] - alloc[a] as f64;
                let rb = quotas[b] - alloc[b] as f64;
                ra.total_cmp(&rb).then(a.cmp(&b))
            });
        match pick {
            Some(b) => {
                alloc[b] -= 1;
                total -= 1;
            }
            None => break,
        }
    }

    let mut train = Vec::with_capacity(n - total);
    let mut test = Vec::with_capacity(total);
    for (g, k) in groups.iter().zip(&alloc) {
        test.extend_from_slice(&g[..*k]);
        train.extend_from_slice(&g[*k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
