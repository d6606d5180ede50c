use super::special::{student_t_sf, student_t_two_sided};
use super::StatsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    /// Equal-variance test with pooled variance, `df = n_a + n_b − 2`.
    StudentPooled,
    /// Unequal variances with Satterthwaite degrees of freedom.
    #[default]
    Welch,
}

/// Alternative hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    TwoSided,
    /// mean(a) > mean(b)
    AGreater,
    /// mean(b) > mean(a)
    BGreater,
}

impl std::str::FromStr for TTestVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "student_pooled" | "student" => Ok(Self::StudentPooled),
            "welch" => Ok(Self::Welch),
            other => Err(format!("unknown t-test variant `{other}`")),
        }
    }
}

impl std::str::FromStr for Tail {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two_sided" => Ok(Self::TwoSided),
            "a_greater" => Ok(Self::AGreater),
            "b_greater" => Ok(Self::BGreater),
            other => Err(format!("unknown tail `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Two-sample t-test of `a` against `b`; positive `t` means `mean(a) > mean(b)`.
///
/// Two constant samples with equal means give `t = 0, p = 1`.
pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant, tail: Tail) -> Result<TTestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewObservations {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);

    let (se2, df) = match variant {
        TTestVariant::StudentPooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (pooled * (1.0 / na + 1.0 / nb), df)
        }
        TTestVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
            let df = if denom > 0.0 { se2 * se2 / denom } else { na + nb - 2.0 };
            (se2, df)
        }
    };

    if !(se2 > 0.0) {
        if ma == mb {
            return Ok(TTestResult { t: 0.0, df, p: 1.0 });
        }
        return Err(StatsError::ZeroVariance);
    }

    let t = (ma - mb) / se2.sqrt();
    let p = match tail {
        Tail::TwoSided => student_t_two_sided(t, df),
        Tail::AGreater => student_t_sf(t, df),
        Tail::BGreater => student_t_sf(-t, df),
    };
    Ok(TTestResult { t, df, p: p.clamp(0.0, 1.0) })
}
