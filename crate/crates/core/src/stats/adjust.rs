//! Multiple-testing adjustments. Each returns adjusted p-values in input
//! order; a hypothesis is rejected when its adjusted p-value is ≤ alpha.
//!
//! Ranks come from a stable sort on `(p, original index)`, so ties keep
//! their input order.

use super::StatsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    Bonferroni,
    Holm,
    Hochberg,
    /// Benjamini-Hochberg, independent tests.
    Bh,
}

impl Correction {
    pub const ALL: [Correction; 5] = [
        Correction::None,
        Correction::Bonferroni,
        Correction::Holm,
        Correction::Hochberg,
        Correction::Bh,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::Bonferroni => "bonferroni",
            Correction::Holm => "holm",
            Correction::Hochberg => "hochberg",
            Correction::Bh => "bh",
        }
    }
}

impl std::str::FromStr for Correction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Correction::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| format!("unknown correction `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjusted {
    pub p_adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

impl Adjusted {
    pub fn rejections(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }
}

pub fn adjust(pvalues: &[f64], method: Correction, alpha: f64) -> Result<Adjusted, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if let Some((index, &value)) = pvalues
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(StatsError::PValueOutOfRange { index, value });
    }
    let m = pvalues.len();
    let mf = m as f64;
    let mut order: Vec<usize> = (0..m).collect();
    // indices ascend already, so a stable sort on p alone orders by (p, index)
    order.sort_by(|&i, &j| pvalues[i].total_cmp(&pvalues[j]));

    let mut adj = vec![0.0; m];
    match method {
        Correction::None => adj.copy_from_slice(pvalues),
        Correction::Bonferroni => {
            for (a, &p) in adj.iter_mut().zip(pvalues) {
                *a = (mf * p).min(1.0);
            }
        }
        Correction::Holm => {
            let mut running = 0.0f64;
            for (rank, &i) in order.iter().enumerate() {
                let v = ((mf - rank as f64) * pvalues[i]).min(1.0);
                running = running.max(v);
                adj[i] = running;
            }
        }
        Correction::Hochberg => {
            let mut running = 1.0f64;
            for (rank, &i) in order.iter().enumerate().rev() {
                let v = ((mf - rank as f64) * pvalues[i]).min(1.0);
                running = running.min(v);
                adj[i] = running;
            }
        }
        Correction::Bh => {
            let mut running = 1.0f64;
            for (rank, &i) in order.iter().enumerate().rev() {
                let v = (mf * pvalues[i] / (rank as f64 + 1.0)).min(1.0);
                running = running.min(v);
                adj[i] = running;
            }
        }
    }
    let reject = adj.iter().map(|&p| p <= alpha).collect();
    Ok(Adjusted { p_adjusted: adj, reject })
}
