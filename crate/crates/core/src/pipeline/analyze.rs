use tracing::{info, warn};

use super::PipelineError;
use crate::backends::Backends;
use crate::prompt::{build_identification_prompt, build_prescan, build_recommendation_prompt, PreScan, UserContext};
use crate::raster::ImageBuffer;
use crate::risk::{
    merge_recommendations, parse_recommendations, parse_risk_report, AnnotatedRiskReport, RiskError, RiskReport,
};

/// Model calls made per stage when the reply does not parse.
pub const MAX_MODEL_ATTEMPTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub prescan: PreScan,
    pub report: AnnotatedRiskReport,
    /// Risks whose severity was raised because they hold a user-marked element.
    pub escalated: Vec<u32>,
}

fn ask<T>(
    stage: &'static str,
    backends: &Backends,
    bundle: &crate::prompt::PromptBundle,
    parse: impl Fn(&str) -> Result<T, RiskError>,
) -> Result<T, PipelineError> {
    let mut last = None;
    for attempt in 1..=MAX_MODEL_ATTEMPTS {
        let reply = backends.chat_multimodal(bundle)?;
        match parse(&reply) {
            Ok(v) => return Ok(v),
            Err(e) => {
                warn!(stage, attempt, error = %e, "model reply rejected");
                last = Some(e);
            }
        }
    }
    Err(PipelineError::ParseAfterRetry {
        stage,
        source: last.expect("at least one attempt"),
    })
}

/// Pre-scan and identification only, without severity escalation.
pub fn identify_risks(
    img: &ImageBuffer,
    ctx: &UserContext,
    backends: &Backends,
) -> Result<(PreScan, RiskReport), PipelineError> {
    if let Some(m) = &ctx.concern_mask {
        m.ensure_same_dims(img.width(), img.height())?;
    }
    let detections = backends.detect_objects(img)?;
    let prescan = build_prescan(img, detections)?;
    let bundle = build_identification_prompt(ctx, &prescan, img)?;
    let report = ask("identification", backends, &bundle, parse_risk_report)?;
    Ok((prescan, report))
}

/// Pre-scan, identification and recommendation for one image. Pure with
/// respect to the session so callers can run it without holding a lock.
pub fn analyze_image(img: &ImageBuffer, ctx: &UserContext, backends: &Backends) -> Result<Analysis, PipelineError> {
    let (prescan, mut report) = identify_risks(img, ctx, backends)?;
    let escalated = report.escalate_user_marked();
    if !escalated.is_empty() {
        info!(?escalated, "raised user-marked risks to High");
    }
    if report.is_empty() {
        return Ok(Analysis {
            prescan,
            report: AnnotatedRiskReport::default(),
            escalated,
        });
    }

    let rec_bundle = build_recommendation_prompt(ctx, &report, img)?;
    let annotated = ask("recommendation", backends, &rec_bundle, |text| {
        merge_recommendations(&report, &parse_recommendations(text)?)
    })?;
    Ok(Analysis {
        prescan,
        report: annotated,
        escalated,
    })
}
