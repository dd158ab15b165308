//! Hand-built model-output fixtures with their expected parse outcome.

use std::path::Path;

use serde::Deserialize;

use super::{parse_annotated_report, parse_recommendations, parse_risk_report, RiskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureStage {
    Identification,
    Recommendation,
    Annotated,
}

/// Expected outcome. `error` excludes every other field.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureExpectation {
    pub error: Option<String>,
    pub risks: Option<usize>,
    pub elements: Option<usize>,
    pub entries: Option<usize>,
    pub warnings: Option<usize>,
    /// Recommendation count per risk, in report order.
    pub recommendations: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFixture {
    #[serde(skip)]
    pub name: String,
    pub stage: FixtureStage,
    #[serde(default)]
    pub identification: String,
    #[serde(default)]
    pub recommendation: String,
    pub expect: FixtureExpectation,
}

fn check(what: &str, want: Option<usize>, got: usize) -> Result<(), String> {
    match want {
        Some(w) if w != got => Err(format!("{what}: expected {w}, got {got}")),
        _ => Ok(()),
    }
}

fn outcome<T>(want: &Option<String>, got: Result<T, RiskError>) -> Result<Option<T>, String> {
    match (want, got) {
        (Some(kind), Err(e)) if e.kind() == kind => Ok(None),
        (Some(kind), Err(e)) => Err(format!("expected {kind}, got {} ({e})", e.kind())),
        (Some(kind), Ok(_)) => Err(format!("expected {kind}, parse succeeded")),
        (None, Err(e)) => Err(format!("unexpected {}: {e}", e.kind())),
        (None, Ok(v)) => Ok(Some(v)),
    }
}

impl SchemaFixture {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut f: SchemaFixture = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        f.name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        Ok(f)
    }

    /// Every `*.json` fixture in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, String> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| format!("{}: {e}", dir.display()))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::load(p)).collect()
    }

    /// Parses the fixture and compares against the expectation. Successful
    /// parses must also survive a canonical serialization round trip.
    pub fn verify(&self) -> Result<(), String> {
        let e = &self.expect;
        match self.stage {
            FixtureStage::Identification => {
                let Some(r) = outcome(&e.error, parse_risk_report(&self.identification))? else {
                    return Ok(());
                };
                check("risks", e.risks, r.risks.len())?;
                check("elements", e.elements, r.elements.len())?;
                let canon = r.to_canonical_json();
                let again = parse_risk_report(&canon).map_err(|e| format!("round trip: {e}"))?;
                if again != r || again.to_canonical_json() != canon {
                    return Err("canonical round trip changed the report".into());
                }
            }
            FixtureStage::Recommendation => {
                let Some(s) = outcome(&e.error, parse_recommendations(&self.recommendation))? else {
                    return Ok(());
                };
                check("entries", e.entries, s.entries.len())?;
                check("warnings", e.warnings, s.warnings.len())?;
                let canon = s.to_canonical_json();
                let again = parse_recommendations(&canon).map_err(|e| format!("round trip: {e}"))?;
                if again.entries != s.entries || again.to_canonical_json() != canon {
                    return Err("canonical round trip changed the recommendations".into());
                }
            }
            FixtureStage::Annotated => {
                let merged = parse_risk_report(&self.identification).and_then(|r| {
                    let recs = parse_recommendations(&self.recommendation)?;
                    super::merge_recommendations(&r, &recs)
                });
                let Some(a) = outcome(&e.error, merged)? else {
                    return Ok(());
                };
                check("risks", e.risks, a.risks.len())?;
                check("elements", e.elements, a.elements.len())?;
                check("warnings", e.warnings, a.warnings.len())?;
                if let Some(want) = &e.recommendations {
                    let got: Vec<usize> = a.risks.iter().map(|r| r.recommendations.len()).collect();
                    if &got != want {
                        return Err(format!("recommendations: expected {want:?}, got {got:?}"));
                    }
                }
                let canon = a.to_canonical_json();
                let again = parse_annotated_report(&canon).map_err(|e| format!("round trip: {e}"))?;
                if again.risks != a.risks || again.elements != a.elements || again.to_canonical_json() != canon {
                    return Err("canonical round trip changed the annotated report".into());
                }
            }
        }
        Ok(())
    }
}
