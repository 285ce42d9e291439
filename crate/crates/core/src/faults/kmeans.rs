//! Lloyd's k-means on scalar per-BRAM fault counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KMeansError {
    #[error("need at least two clusters, got k={0}")]
    TooFewClusters(usize),
    #[error("no values to cluster")]
    Empty,
    #[error("value {0} at index {1} is negative or not finite")]
    BadValue(f64, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VulnerabilityClass {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: Vec<VulnerabilityClass>,
    /// Centroids of the non-empty clusters, ascending.
    pub centroids: Vec<f64>,
    /// Number of clusters actually used (after reducing `k`).
    pub effective_k: usize,
    pub iterations: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Classification {
    pub fn ids_of(&self, class: VulnerabilityClass) -> Vec<u32> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn high(&self) -> Vec<u32> {
        self.ids_of(VulnerabilityClass::High)
    }
}

fn nearest(value: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    for (j, c) in centroids.iter().enumerate().skip(1) {
        if (value - c).abs() < (value - centroids[best]).abs() {
            best = j;
        }
    }
    best
}

/// Clusters `counts` into `k` groups and labels them by centroid rank: the
/// lowest cluster is Low, the highest High, anything between Medium.
///
/// Centroids start at evenly spaced order statistics (min, median, max for
/// k = 3). When there are fewer distinct values than `k`, `k` is reduced and
/// a warning recorded; a single distinct value labels everything Low.
pub fn classify_brams_kmeans(counts: &[f64], k: usize) -> Result<Classification, KMeansError> {
    if k < 2 {
        return Err(KMeansError::TooFewClusters(k));
    }
    if counts.is_empty() {
        return Err(KMeansError::Empty);
    }
    if let Some((i, &v)) = counts.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(KMeansError::BadValue(v, i));
    }

    let mut sorted = counts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let mut warnings = Vec::new();
    let mut k = k;
    if distinct.len() < k {
        let msg = format!("only {} distinct values; reducing k from {k} to {}", distinct.len(), distinct.len());
        log::warn!("{msg}");
        warnings.push(msg);
        k = distinct.len();
    }
    if k == 1 {
        let msg = "all values equal; single effective cluster".to_owned();
        log::warn!("{msg}");
        warnings.push(msg);
        return Ok(Classification {
            labels: vec![VulnerabilityClass::Low; counts.len()],
            centroids: vec![sorted[0]],
            effective_k: 1,
            iterations: 0,
            warnings,
        });
    }

    let n = sorted.len();
    let mut centroids: Vec<f64> = (0..k).map(|j| sorted[(n - 1) * j / (k - 1)]).collect();
    let mut assignment: Vec<usize> = counts.iter().map(|&v| nearest(v, &centroids)).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut sums = vec![0.0; k];
        let mut sizes = vec![0usize; k];
        for (&v, &a) in counts.iter().zip(&assignment) {
            sums[a] += v;
            sizes[a] += 1;
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centroids[j] = sums[j] / sizes[j] as f64;
            }
        }
        let next: Vec<usize> = counts.iter().map(|&v| nearest(v, &centroids)).collect();
        if next == assignment || iterations >= MAX_ITERATIONS {
            assignment = next;
            break;
        }
        assignment = next;
    }

    let mut used: Vec<usize> = (0..k).filter(|j| assignment.contains(j)).collect();
    used.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]));
    let mut rank = vec![0usize; k];
    for (r, &j) in used.iter().enumerate() {
        rank[j] = r;
    }
    let top = used.len() - 1;
    let labels = assignment
        .iter()
        .map(|&j| match rank[j] {
            0 => VulnerabilityClass::Low,
            r if r == top => VulnerabilityClass::High,
            _ => VulnerabilityClass::Medium,
        })
        .collect();
    Ok(Classification {
        labels,
        centroids: used.iter().map(|&j| centroids[j]).collect(),
        effective_k: used.len(),
        iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use VulnerabilityClass::*;

    #[test]
    fn separated_two_clusters() {
        let mut counts = vec![0.0; 100];
        counts.extend([1000.0; 5]);
        let c = classify_brams_kmeans(&counts, 2).unwrap();
        assert_eq!(c.high(), (100..105).collect::<Vec<u32>>());
        assert!(c.labels[..100].iter().all(|&l| l == Low));
    }

    /// Optimal 1-D clustering by exhaustive search over contiguous splits of
    /// the sorted values.
    fn brute_force_three(values: &[f64]) -> Vec<usize> {
        let mut sorted: Vec<(f64, usize)> = values.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sse = |s: &[(f64, usize)]| {
            let m = s.iter().map(|p| p.0).sum::<f64>() / s.len() as f64;
            s.iter().map(|p| (p.0 - m).powi(2)).sum::<f64>()
        };
        let n = sorted.len();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 1..n - 1 {
            for b in a + 1..n {
                let cost = sse(&sorted[..a]) + sse(&sorted[a..b]) + sse(&sorted[b..]);
                if cost < best.0 {
                    best = (cost, a, b);
                }
            }
        }
        let mut out = vec![0; n];
        for (rank, &(_, idx)) in sorted.iter().enumerate() {
            out[idx] = if rank < best.1 { 0 } else if rank < best.2 { 1 } else { 2 };
        }
        out
    }

    #[test]
    fn planted_clusters_match_exhaustive_optimum() {
        let mut values = Vec::new();
        let mut state = 17u64;
        let mut jitter = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64 * 4.0
        };
        for _ in 0..60 {
            values.push(jitter());
        }
        for _ in 0..15 {
            values.push(48.0 + jitter());
        }
        for _ in 0..5 {
            values.push(4998.0 + jitter());
        }
        let oracle = brute_force_three(&values);
        let c = classify_brams_kmeans(&values, 3).unwrap();
        let expected: Vec<VulnerabilityClass> = oracle.iter().map(|&r| [Low, Medium, High][r]).collect();
        assert_eq!(c.labels, expected);
        assert_eq!(c.effective_k, 3);
        assert_eq!(c.high(), (75..80).collect::<Vec<u32>>());
    }

    #[test]
    fn all_equal_is_one_cluster() {
        let c = classify_brams_kmeans(&[3.0; 10], 3).unwrap();
        assert_eq!(c.effective_k, 1);
        assert!(c.labels.iter().all(|&l| l == Low));
        assert!(!c.warnings.is_empty());
    }

    #[test]
    fn k_reduced_to_distinct_values() {
        let c = classify_brams_kmeans(&[0.0, 0.0, 9.0, 9.0], 3).unwrap();
        assert_eq!(c.effective_k, 2);
        assert_eq!(c.labels, vec![Low, Low, High, High]);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn errors() {
        assert_eq!(classify_brams_kmeans(&[1.0], 1), Err(KMeansError::TooFewClusters(1)));
        assert_eq!(classify_brams_kmeans(&[], 3), Err(KMeansError::Empty));
        assert!(matches!(classify_brams_kmeans(&[1.0, -1.0], 2), Err(KMeansError::BadValue(..))));
    }
}
