use serde::{Deserialize, Serialize};

use crate::domain::MiCode;

use super::EvalError;

/// Rows are gold codes, columns predicted codes, both in `MiCode::ALL` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: MiCode, pred: MiCode) -> usize {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(gold: &[MiCode], pred: &[MiCode]) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    #[serde(rename = "CT")]
    pub ct: ClassMetrics,
    #[serde(rename = "ST")]
    pub st: ClassMetrics,
    #[serde(rename = "FN")]
    pub fn_: ClassMetrics,
}

impl PerClass {
    pub fn get(&self, code: MiCode) -> &ClassMetrics {
        match code {
            MiCode::Ct => &self.ct,
            MiCode::St => &self.st,
            MiCode::Fn => &self.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: PerClass,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub n: usize,
    /// Unresolved predictions that were scored as the configured fallback code.
    pub unresolved_mapped: usize,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy and per-class/macro precision, recall, F1. Every zero
/// denominator yields 0.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let class = |c: MiCode| {
        let i = c.index();
        let tp = cm.counts[i][i];
        let predicted: usize = (0..3).map(|g| cm.counts[g][i]).sum();
        let actual: usize = cm.counts[i].iter().sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
        }
    };
    let per_class = PerClass {
        ct: class(MiCode::Ct),
        st: class(MiCode::St),
        fn_: class(MiCode::Fn),
    };
    let mean = |f: fn(&ClassMetrics) -> f64| {
        MiCode::ALL
            .iter()
            .map(|c| f(per_class.get(*c)))
            .sum::<f64>()
            / 3.0
    };
    MetricsReport {
        accuracy: ratio(cm.trace(), cm.total()),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
        n: cm.total(),
        unresolved_mapped: 0,
        confusion: *cm,
    }
}
