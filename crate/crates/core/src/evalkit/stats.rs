use serde::Serialize;
use statrs::function::erf::erfc;

use super::EvalError;

/// Largest allowed gap between the accuracy-implied and PPV-implied prevalence.
pub const FEASIBILITY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionTestResult {
    /// Chi-squared statistic with one degree of freedom.
    pub statistic: f64,
    pub p_value: f64,
    pub continuity_corrected: bool,
    pub p1: f64,
    pub p2: f64,
}

/// Pooled two-proportion chi-squared test. With `continuity`, the absolute
/// difference is shrunk by `(1/n1 + 1/n2) / 2` (never below zero) before
/// squaring.
pub fn two_proportion_test(
    x1: u64,
    n1: u64,
    x2: u64,
    n2: u64,
    continuity: bool,
) -> Result<ProportionTestResult, EvalError> {
    if n1 == 0 || n2 == 0 {
        return Err(EvalError::InvalidCounts("sample sizes must be at least 1".into()));
    }
    if x1 > n1 || x2 > n2 {
        return Err(EvalError::InvalidCounts(format!(
            "successes exceed sample size ({x1}/{n1}, {x2}/{n2})"
        )));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let p1 = x1 as f64 / n1f;
    let p2 = x2 as f64 / n2f;
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    let variance = pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f);

    let mut diff = (p1 - p2).abs();
    if continuity {
        diff = (diff - (1.0 / n1f + 1.0 / n2f) / 2.0).max(0.0);
    }
    // A pooled proportion of 0 or 1 means both samples agree exactly.
    let statistic = if variance > 0.0 { diff * diff / variance } else { 0.0 };
    let p_value = erfc((statistic / 2.0).sqrt()).clamp(0.0, 1.0);
    Ok(ProportionTestResult {
        statistic,
        p_value,
        continuity_corrected: continuity,
        p1,
        p2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Feasibility {
    /// A unique prevalence in `[0, 1]` reproduces the accuracy.
    Feasible { prevalence: f64 },
    /// Sensitivity equals specificity equals accuracy: every prevalence works.
    AnyPrevalence,
    /// No prevalence in `[0, 1]` fits. `implied_prevalence` is the
    /// out-of-range solution, absent when there is none at all.
    Infeasible { implied_prevalence: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub accuracy_check: Feasibility,
    /// Prevalence implied by the PPV, when one was supplied and it is determined.
    pub ppv_prevalence: Option<f64>,
    /// `Some(false)` when the PPV-implied prevalence disagrees with the
    /// accuracy check by more than [`FEASIBILITY_TOLERANCE`].
    pub ppv_consistent: Option<bool>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        !matches!(self.accuracy_check, Feasibility::Infeasible { .. }) && self.ppv_consistent != Some(false)
    }

    pub fn prevalence(&self) -> Option<f64> {
        match self.accuracy_check {
            Feasibility::Feasible { prevalence } => Some(prevalence),
            Feasibility::Infeasible { implied_prevalence } => implied_prevalence,
            Feasibility::AnyPrevalence => None,
        }
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<f64, EvalError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(EvalError::RateOutOfRange { name, value })
    }
}

/// Solves `accuracy = sens * pi + spec * (1 - pi)` for the prevalence `pi`
/// and, given a PPV, cross-checks it against
/// `ppv = sens * pi / (sens * pi + (1 - spec) * (1 - pi))`.
pub fn metric_feasibility(
    sensitivity: f64,
    specificity: f64,
    accuracy: f64,
    ppv: Option<f64>,
) -> Result<FeasibilityReport, EvalError> {
    let sens = check_rate("sensitivity", sensitivity)?;
    let spec = check_rate("specificity", specificity)?;
    let acc = check_rate("accuracy", accuracy)?;
    let ppv = ppv.map(|p| check_rate("ppv", p)).transpose()?;

    let in_range = |pi: f64| (-1e-12..=1.0 + 1e-12).contains(&pi);
    let accuracy_check = if sens == spec {
        if acc == sens {
            Feasibility::AnyPrevalence
        } else {
            Feasibility::Infeasible {
                implied_prevalence: None,
            }
        }
    } else {
        let pi = (acc - spec) / (sens - spec);
        if in_range(pi) {
            Feasibility::Feasible {
                prevalence: pi.clamp(0.0, 1.0),
            }
        } else {
            Feasibility::Infeasible {
                implied_prevalence: Some(pi),
            }
        }
    };

    let ppv_prevalence = ppv.and_then(|ppv| {
        let a = sens * (1.0 - ppv);
        let b = ppv * (1.0 - spec);
        (a + b > 0.0).then(|| b / (a + b))
    });
    let ppv_consistent = ppv_prevalence.map(|p| match accuracy_check {
        Feasibility::Feasible { prevalence } => (p - prevalence).abs() <= FEASIBILITY_TOLERANCE,
        Feasibility::AnyPrevalence => in_range(p),
        Feasibility::Infeasible { .. } => false,
    });

    Ok(FeasibilityReport {
        accuracy_check,
        ppv_prevalence,
        ppv_consistent,
    })
}
