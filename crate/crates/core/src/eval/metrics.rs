use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::risk::Severity;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, o: &BinaryCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

/// Scores for one task as fractions in [0, 1]; `None` where undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Class names, in the order of `confusion` rows (gold) and columns
    /// (predicted).
    pub labels: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl TaskMetrics {
    pub fn binary(c: &BinaryCounts) -> Self {
        Self {
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            labels: vec!["not sensitive".into(), "sensitive".into()],
            confusion: vec![vec![c.tn, c.fp], vec![c.fn_, c.tp]],
        }
    }

    /// Accuracy plus macro-averaged precision and recall. A class enters the
    /// precision mean only if it was predicted, and the recall mean only if
    /// it occurs in the gold data.
    pub fn multiclass(labels: Vec<String>, confusion: Vec<Vec<u64>>) -> Self {
        let n = labels.len();
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..n).map(|i| confusion[i][i]).sum();
        let mut precisions = Vec::new();
        let mut recalls = Vec::new();
        for k in 0..n {
            let predicted: u64 = (0..n).map(|g| confusion[g][k]).sum();
            let actual: u64 = confusion[k].iter().sum();
            if let Some(p) = ratio(confusion[k][k], predicted) {
                precisions.push(p);
            }
            if let Some(r) = ratio(confusion[k][k], actual) {
                recalls.push(r);
            }
        }
        Self {
            accuracy: ratio(correct, total),
            precision: mean(&precisions),
            recall: mean(&recalls),
            labels,
            confusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub binary: TaskMetrics,
    pub binary_counts: BinaryCounts,
    pub category: TaskMetrics,
    pub severity: TaskMetrics,
    pub cases_total: usize,
    pub cases_scored: usize,
    pub failures: Vec<CaseFailure>,
    /// Gold objects and predictions left without a partner.
    pub unmatched_gold: u64,
    pub unmatched_predicted: u64,
    /// Likert cut points, e.g. "2,5".
    pub severity_map: String,
    pub match_threshold: f64,
}

pub const SEVERITY_LABELS: [Severity; 3] = [Severity::Low, Severity::Medium, Severity::High];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    Text,
    Json,
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.2}", x * 100.0),
        None => "-".into(),
    }
}

/// Renders metrics as a results table or as JSON.
pub fn report_metrics(m: &EvalMetrics, format: MetricsFormat) -> Vec<u8> {
    match format {
        MetricsFormat::Json => {
            let mut v = serde_json::to_vec_pretty(m).expect("metrics serialize");
            v.push(b'\n');
            v
        }
        MetricsFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<30}{:>14}{:>15}{:>12}",
                "Task", "Accuracy (%)", "Precision (%)", "Recall (%)"
            );
            for (name, t) in [
                ("Object sensitivity (binary)", &m.binary),
                ("Risk category (multi-class)", &m.category),
                ("Severity (High/Med/Low)", &m.severity),
            ] {
                let _ = writeln!(
                    s,
                    "{:<30}{:>14}{:>15}{:>12}",
                    name,
                    pct(t.accuracy),
                    pct(t.precision),
                    pct(t.recall)
                );
            }
            let c = &m.binary_counts;
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "cases: {} total, {} scored, {} failed",
                m.cases_total,
                m.cases_scored,
                m.failures.len()
            );
            let _ = writeln!(s, "binary counts: TP={} FP={} TN={} FN={}", c.tp, c.fp, c.tn, c.fn_);
            let _ = writeln!(
                s,
                "unmatched: {} gold, {} predicted; match threshold {:.2}; severity map {}",
                m.unmatched_gold, m.unmatched_predicted, m.match_threshold, m.severity_map
            );
            for f in &m.failures {
                let _ = writeln!(s, "failed {}: {}", f.id, f.error);
            }
            s.into_bytes()
        }
    }
}
