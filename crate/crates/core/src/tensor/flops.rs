use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// Which part of the network a multiply-accumulate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlopClass {
    /// Patch / tubelet projection.
    Embedding,
    /// Q, K, V and output projections.
    AttentionProjection,
    /// `Q·Kᵀ`.
    AttentionScore,
    /// `softmax(·)·V`.
    AttentionMix,
    Mlp,
    Fusion,
    Classifier,
    Other,
}

impl FlopClass {
    pub const ALL: [FlopClass; 8] = [
        FlopClass::Embedding,
        FlopClass::AttentionProjection,
        FlopClass::AttentionScore,
        FlopClass::AttentionMix,
        FlopClass::Mlp,
        FlopClass::Fusion,
        FlopClass::Classifier,
        FlopClass::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FlopClass::Embedding => "embedding",
            FlopClass::AttentionProjection => "attention_projection",
            FlopClass::AttentionScore => "attention_score",
            FlopClass::AttentionMix => "attention_mix",
            FlopClass::Mlp => "mlp",
            FlopClass::Fusion => "fusion",
            FlopClass::Classifier => "classifier",
            FlopClass::Other => "other",
        }
    }
}

impl fmt::Display for FlopClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exact multiply-accumulate tally of forward matrix products.
///
/// Counts only grow; [`FlopCounter::reset`] is the only way back to zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlopCounter {
    total: u64,
    by_class: BTreeMap<FlopClass, u64>,
}

impl FlopCounter {
    pub fn record(&mut self, class: FlopClass, macs: u64) {
        self.total += macs;
        *self.by_class.entry(class).or_default() += macs;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, class: FlopClass) -> u64 {
        self.by_class.get(&class).copied().unwrap_or(0)
    }

    pub fn breakdown(&self) -> impl Iterator<Item = (FlopClass, u64)> + '_ {
        self.by_class.iter().map(|(c, n)| (*c, *n))
    }

    pub fn reset(&mut self) {
        self.total = 0;
        self.by_class.clear();
    }
}

/// Least-squares slope of `ln y` against `ln x`: the growth exponent `k` in
/// `y ≈ c·xᵏ`. `None` with fewer than two distinct positive points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (logs.len() >= 2 && sxx > 0.0).then(|| sxy / sxx)
}
