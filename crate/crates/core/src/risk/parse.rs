use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};

use super::json::extract_json;
use super::{
    classify_category, merge_recommendations, AnnotatedRiskReport, ElementEntry, ObfuscationTechnique, PrivacyRisk,
    Recommendation, RecommendationSet, RiskCategory, RiskError, RiskRecommendations, RiskReport, SensitiveElement,
    Severity,
};

#[derive(Serialize)]
pub(crate) struct ElementWire {
    id: u32,
    element: String,
    #[serde(rename = "riskCause")]
    risk_cause: String,
    #[serde(rename = "markedByUser")]
    marked_by_user: bool,
}

#[derive(Serialize)]
pub(crate) struct RiskWire {
    privacy_risk_id: u32,
    #[serde(rename = "privacyRisk")]
    privacy_risk: String,
    severity: Severity,
    #[serde(rename = "threatActors")]
    threat_actors: Vec<String>,
    #[serde(rename = "sensitiveElements")]
    sensitive_elements: Vec<ElementWire>,
}

impl RiskWire {
    pub(crate) fn from_risk(r: &PrivacyRisk) -> Self {
        RiskWire {
            privacy_risk_id: r.privacy_risk_id,
            privacy_risk: r.label.clone(),
            severity: r.severity,
            threat_actors: r.threat_actors.clone(),
            sensitive_elements: r
                .elements
                .iter()
                .map(|e| ElementWire {
                    id: e.id,
                    element: e.element.clone(),
                    risk_cause: e.risk_cause.clone(),
                    marked_by_user: e.marked_by_user,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub(crate) struct RecWire {
    element: u32,
    manipulation_type: ObfuscationTechnique,
    type_description: String,
    prompt: String,
    advantages: Vec<String>,
    disadvantages: Vec<String>,
}

impl From<&Recommendation> for RecWire {
    fn from(r: &Recommendation) -> Self {
        RecWire {
            element: r.element_id,
            manipulation_type: r.technique,
            type_description: r.description.clone(),
            prompt: r.generation_prompt.clone(),
            advantages: r.advantages.clone(),
            disadvantages: r.disadvantages.clone(),
        }
    }
}

#[derive(Serialize)]
pub(crate) struct RiskRecsWire {
    pub(crate) privacy_risk_id: u32,
    pub(crate) recommendations: Vec<RecWire>,
}

#[derive(Serialize)]
pub(crate) struct AnnotatedWire {
    #[serde(flatten)]
    pub(crate) base: RiskWire,
    pub(crate) category: RiskCategory,
    pub(crate) recommendations: Vec<RecWire>,
}

/// Top-level array, or an object wrapping exactly one array (a common shape
/// when a backend forces JSON-object mode).
fn top_level_array(v: &Value) -> Result<&Vec<Value>, RiskError> {
    match v {
        Value::Array(a) => Ok(a),
        Value::Object(o) => {
            let arrays: Vec<&Vec<Value>> = o.values().filter_map(Value::as_array).collect();
            match arrays.as_slice() {
                [only] if o.len() == 1 => Ok(only),
                _ => Err(RiskError::schema("", "expected a JSON array")),
            }
        }
        _ => Err(RiskError::schema("", "expected a JSON array")),
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, RiskError> {
    v.as_object()
        .ok_or_else(|| RiskError::schema(path, "expected an object"))
}

fn id_field(obj: &Map<String, Value>, key: &str, path: &str) -> Result<u32, RiskError> {
    let p = format!("{path}/{key}");
    match obj.get(key) {
        Some(Value::Number(n)) => n
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| RiskError::schema(p, "expected a non-negative integer id")),
        Some(Value::String(s)) => s
            .trim()
            .parse::<u32>()
            .map_err(|_| RiskError::schema(p, format!("expected an integer id, got {s:?}"))),
        Some(_) => Err(RiskError::schema(p, "expected an integer id")),
        None => Err(RiskError::schema(p, "missing")),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str, path: &str, nonempty: bool) -> Result<String, RiskError> {
    let p = format!("{path}/{key}");
    match obj.get(key) {
        Some(Value::String(s)) => {
            let s = s.trim();
            if nonempty && s.is_empty() {
                return Err(RiskError::schema(p, "must not be empty"));
            }
            Ok(s.to_string())
        }
        Some(Value::Null) | None if !nonempty => Ok(String::new()),
        Some(_) => Err(RiskError::schema(p, "expected a string")),
        None => Err(RiskError::schema(p, "missing")),
    }
}

fn string_list(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Vec<String>, RiskError> {
    let p = format!("{path}/{key}");
    let arr = match obj.get(key) {
        Some(Value::Array(a)) => a,
        Some(Value::Null) | None => return Ok(Vec::new()),
        Some(_) => return Err(RiskError::schema(p, "expected an array of strings")),
    };
    arr.iter()
        .enumerate()
        .map(|(i, v)| match v.as_str().map(str::trim) {
            Some(s) if !s.is_empty() => Ok(s.to_string()),
            Some(_) => Err(RiskError::schema(format!("{p}/{i}"), "must not be empty")),
            None => Err(RiskError::schema(format!("{p}/{i}"), "expected a string")),
        })
        .collect()
}

fn bool_field(obj: &Map<String, Value>, key: &str, path: &str) -> Result<bool, RiskError> {
    match obj.get(key) {
        Some(Value::Bool(b)) => Ok(*b),
        Some(Value::Null) | None => Ok(false),
        Some(_) => Err(RiskError::schema(format!("{path}/{key}"), "expected true/false")),
    }
}

fn same_text(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// Parses identification output into a validated report with a
/// deduplicated element registry.
pub fn parse_risk_report(text: &str) -> Result<RiskReport, RiskError> {
    let doc = extract_json(text)?;
    let items = top_level_array(&doc)?;
    let mut risks = Vec::with_capacity(items.len());
    let mut registry: BTreeMap<u32, ElementEntry> = BTreeMap::new();

    for (i, item) in items.iter().enumerate() {
        let path = format!("/{i}");
        let obj = as_object(item, &path)?;
        let risk_id = id_field(obj, "privacy_risk_id", &path)?;
        if risks.iter().any(|r: &PrivacyRisk| r.privacy_risk_id == risk_id) {
            return Err(RiskError::schema(
                format!("{path}/privacy_risk_id"),
                format!("duplicate privacy_risk_id {risk_id}"),
            ));
        }
        let label = string_field(obj, "privacyRisk", &path, true)?;
        let severity_raw = string_field(obj, "severity", &path, true)?;
        let severity: Severity = severity_raw
            .parse()
            .map_err(|reason: String| RiskError::schema(format!("{path}/severity"), reason))?;
        let threat_actors = match obj.get("threatActors") {
            None => return Err(RiskError::schema(format!("{path}/threatActors"), "missing")),
            Some(_) => string_list(obj, "threatActors", &path)?,
        };

        let elems_path = format!("{path}/sensitiveElements");
        let raw_elems = obj
            .get("sensitiveElements")
            .and_then(Value::as_array)
            .ok_or_else(|| RiskError::schema(&elems_path, "expected an array"))?;
        if raw_elems.is_empty() {
            return Err(RiskError::schema(&elems_path, "a risk needs at least one element"));
        }
        let mut elements: Vec<SensitiveElement> = Vec::with_capacity(raw_elems.len());
        for (j, raw) in raw_elems.iter().enumerate() {
            let epath = format!("{elems_path}/{j}");
            let eobj = as_object(raw, &epath)?;
            let el = SensitiveElement {
                id: id_field(eobj, "id", &epath)?,
                element: string_field(eobj, "element", &epath, true)?,
                risk_cause: string_field(eobj, "riskCause", &epath, false)?,
                marked_by_user: bool_field(eobj, "markedByUser", &epath)?,
            };
            if let Some(prev) = elements.iter_mut().find(|e| e.id == el.id) {
                if !same_text(&prev.element, &el.element) {
                    return Err(RiskError::DuplicateElementConflict {
                        id: el.id,
                        first: prev.element.clone(),
                        second: el.element,
                    });
                }
                prev.marked_by_user |= el.marked_by_user;
                continue;
            }
            elements.push(el);
        }

        for el in &elements {
            match registry.get_mut(&el.id) {
                Some(entry) => {
                    if !same_text(&entry.element, &el.element) {
                        return Err(RiskError::DuplicateElementConflict {
                            id: el.id,
                            first: entry.element.clone(),
                            second: el.element.clone(),
                        });
                    }
                    entry.marked_by_user |= el.marked_by_user;
                    entry.risk_ids.push(risk_id);
                }
                None => {
                    registry.insert(
                        el.id,
                        ElementEntry {
                            id: el.id,
                            element: el.element.clone(),
                            marked_by_user: el.marked_by_user,
                            risk_ids: vec![risk_id],
                        },
                    );
                }
            }
        }

        let causes: Vec<&str> = elements.iter().map(|e| e.risk_cause.as_str()).collect();
        risks.push(PrivacyRisk {
            privacy_risk_id: risk_id,
            category: classify_category(&label, &causes),
            label,
            severity,
            threat_actors,
            elements,
        });
    }

    Ok(RiskReport {
        risks,
        elements: registry,
    })
}

/// Parses recommendation output. Prompts attached to techniques that do not
/// take one are cleared with a warning.
pub fn parse_recommendations(text: &str) -> Result<RecommendationSet, RiskError> {
    let doc = extract_json(text)?;
    let items = top_level_array(&doc)?;
    let mut set = RecommendationSet::default();

    for (i, item) in items.iter().enumerate() {
        let path = format!("/{i}");
        let obj = as_object(item, &path)?;
        let risk_id = id_field(obj, "privacy_risk_id", &path)?;
        if set.entries.iter().any(|e| e.privacy_risk_id == risk_id) {
            return Err(RiskError::schema(
                format!("{path}/privacy_risk_id"),
                format!("duplicate privacy_risk_id {risk_id}"),
            ));
        }
        let recs_path = format!("{path}/recommendations");
        let raw_recs = match obj.get("recommendations") {
            Some(Value::Array(a)) => a.as_slice(),
            Some(Value::Null) | None => &[],
            Some(_) => return Err(RiskError::schema(recs_path, "expected an array")),
        };
        let mut recommendations = Vec::with_capacity(raw_recs.len());
        for (j, raw) in raw_recs.iter().enumerate() {
            let rpath = format!("{recs_path}/{j}");
            let robj = as_object(raw, &rpath)?;
            let element_id = id_field(robj, "element", &rpath)?;
            let label = string_field(robj, "manipulation_type", &rpath, true)?;
            let technique: ObfuscationTechnique = label.parse()?;
            let mut generation_prompt = string_field(robj, "prompt", &rpath, false)?;
            if !technique.carries_prompt() && !generation_prompt.is_empty() {
                set.warnings.push(format!(
                    "{rpath}/prompt: {technique} takes no generation prompt; cleared"
                ));
                generation_prompt.clear();
            }
            recommendations.push(Recommendation {
                element_id,
                technique,
                description: string_field(robj, "type_description", &rpath, false)?,
                generation_prompt,
                advantages: string_list(robj, "advantages", &rpath)?,
                disadvantages: string_list(robj, "disadvantages", &rpath)?,
            });
        }
        set.entries.push(RiskRecommendations {
            privacy_risk_id: risk_id,
            recommendations,
        });
    }
    Ok(set)
}

/// Reads back an annotated report written by
/// [`AnnotatedRiskReport::to_canonical_json`].
pub fn parse_annotated_report(text: &str) -> Result<AnnotatedRiskReport, RiskError> {
    let report = parse_risk_report(text)?;
    let recs = parse_recommendations(text)?;
    merge_recommendations(&report, &recs)
}
