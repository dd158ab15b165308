use std::collections::HashMap;

use super::{AnnotatedRisk, AnnotatedRiskReport, RecommendationSet, RiskError, RiskReport};

/// Most recommendations kept per (risk, element) pair.
pub const MAX_RECOMMENDATIONS_PER_ELEMENT: usize = 2;

/// Joins recommendations onto their risks by `privacy_risk_id`.
///
/// Extra recommendations for a (risk, element) pair beyond the first two are
/// dropped with a warning. Fails if any risk ends up without a
/// recommendation.
pub fn merge_recommendations(report: &RiskReport, recs: &RecommendationSet) -> Result<AnnotatedRiskReport, RiskError> {
    let mut warnings = recs.warnings.clone();
    let mut by_risk = HashMap::new();
    for entry in &recs.entries {
        let risk = report
            .risk(entry.privacy_risk_id)
            .ok_or(RiskError::UnknownRiskId(entry.privacy_risk_id))?;
        let mut per_element: HashMap<u32, usize> = HashMap::new();
        let mut kept = Vec::with_capacity(entry.recommendations.len());
        for rec in &entry.recommendations {
            if !report.elements.contains_key(&rec.element_id) {
                return Err(RiskError::UnknownElementId {
                    risk_id: risk.privacy_risk_id,
                    element_id: rec.element_id,
                });
            }
            if !risk.elements.iter().any(|e| e.id == rec.element_id) {
                warnings.push(format!(
                    "risk {}: recommendation targets element {} which the risk does not list",
                    risk.privacy_risk_id, rec.element_id
                ));
            }
            let n = per_element.entry(rec.element_id).or_default();
            *n += 1;
            if *n > MAX_RECOMMENDATIONS_PER_ELEMENT {
                warnings.push(format!(
                    "risk {}: dropped extra recommendation ({}) for element {}",
                    risk.privacy_risk_id, rec.technique, rec.element_id
                ));
                continue;
            }
            kept.push(rec.clone());
        }
        by_risk.insert(entry.privacy_risk_id, kept);
    }

    let mut gaps = Vec::new();
    let risks = report
        .risks
        .iter()
        .map(|risk| {
            let recommendations = by_risk.remove(&risk.privacy_risk_id).unwrap_or_default();
            if recommendations.is_empty() {
                gaps.push(risk.privacy_risk_id);
            }
            AnnotatedRisk {
                risk: risk.clone(),
                recommendations,
            }
        })
        .collect();
    if !gaps.is_empty() {
        return Err(RiskError::CoverageGap(gaps));
    }

    Ok(AnnotatedRiskReport {
        risks,
        elements: report.elements.clone(),
        warnings,
    })
}
