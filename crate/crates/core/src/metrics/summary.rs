use serde::{Deserialize, Serialize};

/// Order statistics of a sample. `stats` is absent for an empty sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: u64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SummaryStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub p10: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p90: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quantile by linear interpolation between closest ranks: position
/// `(n - 1) * p` in the sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl DistributionSummary {
    pub fn empty() -> Self {
        Self { count: 0, stats: None }
    }

    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::empty();
        }
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Self {
            count: v.len() as u64,
            stats: Some(SummaryStats {
                min: v[0],
                p10: quantile(&v, 0.10),
                p25: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                p75: quantile(&v, 0.75),
                p90: quantile(&v, 0.90),
                max: v[v.len() - 1],
                mean,
            }),
        }
    }

    pub fn of_counts(values: impl IntoIterator<Item = u64>) -> Self {
        Self::of(values.into_iter().map(|v| v as f64))
    }
}
