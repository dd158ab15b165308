use std::io::Write;

use veil_core::backends::BackendRole;
use veil_core::eval::{
    load_dataset, report_metrics, run_eval, EvalConfig, MetricsFormat, OraclePredictor, PipelinePredictor, Predictor,
    SeverityMap, SidecarPredictor,
};

use crate::args::{BackendKind, EvalArgs, EvalBackend, OutputFormat};
use crate::error::{CliError, EXIT_EVAL_CASES, EXIT_FAILURE};
use crate::setup;

pub fn run(a: &EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let severity_map: SeverityMap = a
        .severity_map
        .parse()
        .map_err(|e| CliError::validation(format!("{e}")))?;
    if !(a.match_threshold > 0.0 && a.match_threshold <= 1.0) {
        return Err(CliError::validation(format!(
            "--match-threshold must be in (0, 1], got {}",
            a.match_threshold
        )));
    }
    if a.jobs == 0 {
        return Err(CliError::validation("--jobs must be at least 1"));
    }
    if let Some(out) = &a.out {
        setup::check_out_dir(out)?;
    }
    let cases = load_dataset(&a.dataset).map_err(|e| CliError::validation(e.to_string()))?;

    let predictor: Box<dyn Predictor> = match a.backend {
        EvalBackend::Mock => Box::new(SidecarPredictor),
        EvalBackend::Oracle => Box::new(OraclePredictor { severity_map }),
        EvalBackend::Live => Box::new(PipelinePredictor {
            backends: setup::backends(
                BackendKind::Live,
                &a.backends,
                &[BackendRole::Chat, BackendRole::Detector],
            )?,
        }),
    };
    let cfg = EvalConfig {
        severity_map,
        match_threshold: a.match_threshold,
        jobs: a.jobs,
    };
    let metrics = run_eval(&cases, predictor.as_ref(), &cfg).map_err(|e| CliError::validation(e.to_string()))?;

    if let Some(out) = &a.out {
        let json = report_metrics(&metrics, MetricsFormat::Json);
        setup::write_file(out, &json)?;
    }
    let format = match a.format {
        OutputFormat::Text => MetricsFormat::Text,
        OutputFormat::Json => MetricsFormat::Json,
    };
    stdout
        .write_all(&report_metrics(&metrics, format))
        .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;

    if metrics.failures.is_empty() {
        Ok(())
    } else {
        let first = &metrics.failures[0];
        Err(CliError::new(
            EXIT_EVAL_CASES,
            format!(
                "{} of {} cases failed; first: {}: {}",
                metrics.failures.len(),
                metrics.cases_total,
                first.id,
                first.error
            ),
        ))
    }
}
