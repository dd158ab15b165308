//! Offline evaluation of risk identification against object-level labels.
//!
//! Each case is scored on three tasks. Binary sensitivity counts every
//! matched prediction as a positive; unmatched gold objects are false
//! negatives when sensitive and true negatives otherwise; unmatched
//! predictions are false positives. Risk category is scored on matched
//! pairs and severity on matched pairs whose gold object is sensitive.

mod dataset;
mod matching;
mod metrics;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde_json::json;
use thiserror::Error;
use tracing::warn;

use crate::backends::Backends;
use crate::pipeline::identify_risks;
use crate::prompt::UserContext;
use crate::raster::load_image;
use crate::risk::{parse_risk_report, RiskCategory, RiskReport, Severity};

pub use dataset::{load_dataset, parse_dataset, EvalCase, GoldObject, CATEGORY_COUNT};
pub use matching::{label_similarity, match_elements, MatchedPair, Pairing, DEFAULT_MATCH_THRESHOLD};
pub use metrics::{
    report_metrics, BinaryCounts, CaseFailure, EvalMetrics, MetricsFormat, TaskMetrics, SEVERITY_LABELS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset line {line}: image {} not found", path.display())]
    MissingImage { line: usize, path: PathBuf },
    #[error("{0}")]
    Io(String),
    #[error("severity {0} outside 1..=7")]
    OutOfRange(u8),
    #[error("invalid severity map {0:?}: expected two cut points a,b with 1 <= a < b < 7")]
    BadSeverityMap(String),
    #[error("match threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
}

pub const CATEGORY_NAMES: [&str; 6] = [
    "personal information",
    "location",
    "preferences and pastimes",
    "social circle",
    "others' confidential information",
    "other",
];

/// Dataset category index of a risk category.
pub fn category_index(c: &RiskCategory) -> u8 {
    match c {
        RiskCategory::IdentityExposure => 0,
        RiskCategory::LocationExposure => 1,
        RiskCategory::SelfDisclosure => 2,
        RiskCategory::Bystander => 3,
        RiskCategory::ConfidentialInformationLeakage => 4,
        RiskCategory::Other(_) => 5,
    }
}

/// Cut points reducing a 1..=7 rating to three levels: ratings up to `low`
/// are Low, up to `medium` Medium, the rest High.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeverityMap {
    low: u8,
    medium: u8,
}

impl Default for SeverityMap {
    fn default() -> Self {
        Self { low: 2, medium: 5 }
    }
}

impl SeverityMap {
    pub fn new(low: u8, medium: u8) -> Result<Self, EvalError> {
        if !(1 <= low && low < medium && medium < 7) {
            return Err(EvalError::BadSeverityMap(format!("{low},{medium}")));
        }
        Ok(Self { low, medium })
    }

    pub fn map(&self, likert: u8) -> Result<Severity, EvalError> {
        match likert {
            1..=7 if likert <= self.low => Ok(Severity::Low),
            1..=7 if likert <= self.medium => Ok(Severity::Medium),
            1..=7 => Ok(Severity::High),
            _ => Err(EvalError::OutOfRange(likert)),
        }
    }
}

impl FromStr for SeverityMap {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvalError::BadSeverityMap(s.to_string());
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let a: u8 = a.trim().parse().map_err(|_| bad())?;
        let b: u8 = b.trim().parse().map_err(|_| bad())?;
        Self::new(a, b).map_err(|_| bad())
    }
}

impl fmt::Display for SeverityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.low, self.medium)
    }
}

/// Produces an identification report for one case.
pub trait Predictor: Sync {
    fn predict(&self, case: &EvalCase) -> Result<RiskReport, String>;
}

/// Risk labels the oracle writes for each category index. Each one
/// classifies back to the same index.
pub const ORACLE_LABELS: [&str; 6] = [
    "Reveals your identity",
    "Reveals where you are",
    "Reveals personal details",
    "Shows others nearby",
    "Exposes private data",
    "Raises other concerns",
];

/// Replays the gold annotations as a model reply.
#[derive(Debug, Clone, Default)]
pub struct OraclePredictor {
    pub severity_map: SeverityMap,
}

impl OraclePredictor {
    pub fn reply_for(&self, case: &EvalCase) -> Result<String, String> {
        let mut risks = Vec::new();
        for o in case.objects.iter().filter(|o| o.sensitive) {
            let id = risks.len() + 1;
            let severity = self.severity_map.map(o.severity).map_err(|e| e.to_string())?;
            risks.push(json!({
                "privacy_risk_id": id,
                "privacyRisk": ORACLE_LABELS[o.category as usize],
                "severity": severity.as_str(),
                "threatActors": ["Public Users"],
                "sensitiveElements": [{
                    "id": id,
                    "element": o.label,
                    "riskCause": "annotated",
                    "markedByUser": false,
                }],
            }));
        }
        Ok(serde_json::to_string_pretty(&risks).expect("json"))
    }
}

impl Predictor for OraclePredictor {
    fn predict(&self, case: &EvalCase) -> Result<RiskReport, String> {
        parse_risk_report(&self.reply_for(case)?).map_err(|e| e.to_string())
    }
}

/// Reads a stored reply from `<image>.prediction.json`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SidecarPredictor;

impl SidecarPredictor {
    pub fn sidecar_path(case: &EvalCase) -> PathBuf {
        let mut p = case.image.clone().into_os_string();
        p.push(".prediction.json");
        p.into()
    }
}

impl Predictor for SidecarPredictor {
    fn predict(&self, case: &EvalCase) -> Result<RiskReport, String> {
        let path = Self::sidecar_path(case);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        parse_risk_report(&text).map_err(|e| e.to_string())
    }
}

/// Runs detection and identification with an empty user context.
pub struct PipelinePredictor {
    pub backends: Backends,
}

impl Predictor for PipelinePredictor {
    fn predict(&self, case: &EvalCase) -> Result<RiskReport, String> {
        let bytes = std::fs::read(&case.image).map_err(|e| format!("{}: {e}", case.image.display()))?;
        let img = load_image(&bytes, None).map_err(|e| e.to_string())?;
        identify_risks(&img, &UserContext::default(), &self.backends)
            .map(|(_, r)| r)
            .map_err(|e| format!("{}: {e}", e.code()))
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub severity_map: SeverityMap,
    pub match_threshold: f64,
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            severity_map: SeverityMap::default(),
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            jobs: 1,
        }
    }
}

/// A predicted element with the category and severity of the most severe
/// risk listing it (earliest risk on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedElement {
    pub label: String,
    pub category: u8,
    pub severity: Severity,
}

pub fn predicted_elements(report: &RiskReport) -> Vec<PredictedElement> {
    report
        .elements
        .values()
        .filter_map(|e| {
            let risk = report
                .risks
                .iter()
                .filter(|r| r.elements.iter().any(|s| s.id == e.id))
                .fold(None, |best: Option<&crate::risk::PrivacyRisk>, r| match best {
                    Some(b) if b.severity >= r.severity => Some(b),
                    _ => Some(r),
                })?;
            Some(PredictedElement {
                label: e.element.clone(),
                category: category_index(&risk.category),
                severity: risk.severity,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
struct CaseScore {
    binary: BinaryCounts,
    category: Vec<(u8, u8)>,
    severity: Vec<(Severity, Severity)>,
    unmatched_gold: u64,
    unmatched_predicted: u64,
}

fn score_case(case: &EvalCase, report: &RiskReport, cfg: &EvalConfig) -> Result<CaseScore, String> {
    let preds = predicted_elements(report);
    let pred_labels: Vec<&str> = preds.iter().map(|p| p.label.as_str()).collect();
    let gold_labels: Vec<&str> = case.objects.iter().map(|o| o.label.as_str()).collect();
    let pairing = match_elements(&pred_labels, &gold_labels, cfg.match_threshold);
    let mut s = CaseScore {
        unmatched_gold: pairing.unmatched_gold.len() as u64,
        unmatched_predicted: pairing.unmatched_predicted.len() as u64,
        ..Default::default()
    };
    for pair in &pairing.pairs {
        let (g, p) = (&case.objects[pair.gold], &preds[pair.predicted]);
        if g.sensitive {
            s.binary.tp += 1;
            let gold_sev = cfg.severity_map.map(g.severity).map_err(|e| e.to_string())?;
            s.severity.push((gold_sev, p.severity));
        } else {
            s.binary.fp += 1;
        }
        s.category.push((g.category, p.category));
    }
    for &gi in &pairing.unmatched_gold {
        if case.objects[gi].sensitive {
            s.binary.fn_ += 1;
        } else {
            s.binary.tn += 1;
        }
    }
    s.binary.fp += s.unmatched_predicted;
    Ok(s)
}

fn sev_index(s: Severity) -> usize {
    SEVERITY_LABELS.iter().position(|&x| x == s).expect("three levels")
}

fn aggregate(cases: usize, scores: &[CaseScore], failures: Vec<CaseFailure>, cfg: &EvalConfig) -> EvalMetrics {
    let mut counts = BinaryCounts::default();
    let mut cat = vec![vec![0u64; CATEGORY_COUNT as usize]; CATEGORY_COUNT as usize];
    let mut sev = vec![vec![0u64; 3]; 3];
    let (mut ug, mut up) = (0, 0);
    for s in scores {
        counts.add(&s.binary);
        for &(g, p) in &s.category {
            cat[g as usize][p as usize] += 1;
        }
        for &(g, p) in &s.severity {
            sev[sev_index(g)][sev_index(p)] += 1;
        }
        ug += s.unmatched_gold;
        up += s.unmatched_predicted;
    }
    let binary = TaskMetrics::binary(&counts);
    debug_assert_eq!(binary.recall, brute_recall(scores));
    EvalMetrics {
        binary,
        binary_counts: counts,
        category: TaskMetrics::multiclass(CATEGORY_NAMES.iter().map(|s| s.to_string()).collect(), cat),
        severity: TaskMetrics::multiclass(SEVERITY_LABELS.iter().map(|s| s.to_string()).collect(), sev),
        cases_total: cases,
        cases_scored: scores.len(),
        failures,
        unmatched_gold: ug,
        unmatched_predicted: up,
        severity_map: cfg.severity_map.to_string(),
        match_threshold: cfg.match_threshold,
    }
}

// Recount without the aggregated counters.
fn brute_recall(scores: &[CaseScore]) -> Option<f64> {
    let hits: u64 = scores.iter().map(|s| s.binary.tp).sum();
    let misses: u64 = scores.iter().map(|s| s.binary.fn_).sum();
    (hits + misses > 0).then(|| hits as f64 / (hits + misses) as f64)
}

/// Scores every case. Predictor failures are recorded and skipped.
pub fn run_eval(cases: &[EvalCase], predictor: &dyn Predictor, cfg: &EvalConfig) -> Result<EvalMetrics, EvalError> {
    if !(cfg.match_threshold > 0.0 && cfg.match_threshold <= 1.0) {
        return Err(EvalError::BadThreshold(cfg.match_threshold));
    }
    let results: Mutex<Vec<(usize, Result<CaseScore, String>)>> = Mutex::new(Vec::with_capacity(cases.len()));
    let next = AtomicUsize::new(0);
    let workers = cfg.jobs.clamp(1, cases.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(case) = cases.get(i) else { break };
                let r = predictor.predict(case).and_then(|rep| score_case(case, &rep, cfg));
                if let Err(e) = &r {
                    warn!(case = %case.id, error = %e, "case failed");
                }
                results.lock().expect("results lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(s) => scores.push(s),
            Err(error) => failures.push(CaseFailure {
                id: cases[i].id.clone(),
                error,
            }),
        }
    }
    Ok(aggregate(cases.len(), &scores, failures, cfg))
}
