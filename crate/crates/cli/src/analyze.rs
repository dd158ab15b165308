use std::io::Write;

use veil_core::backends::BackendRole;
use veil_core::pipeline::Session;
use veil_core::risk::AnnotatedRiskReport;

use crate::args::AnalyzeArgs;
use crate::error::CliError;
use crate::setup;

pub fn run(a: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let img = setup::read_image(&a.image)?;
    let mask = a
        .concern_mask
        .as_deref()
        .map(|p| setup::read_mask(p, &img))
        .transpose()?;
    setup::check_out_dir(&a.out)?;
    let backends = setup::backends(a.backend, &a.backends, &[BackendRole::Chat, BackendRole::Detector])?;

    let mut session = Session::from_image(img);
    session.set_text_context(a.intent.clone(), a.concern.clone());
    session.set_concern_mask(mask)?;
    let report = session.analyze(&backends)?;
    setup::write_file(&a.out, report.to_canonical_json().as_bytes())?;

    for w in &report.warnings {
        tracing::warn!("{w}");
    }
    write_summary(report, stdout).map_err(|e| CliError::new(1, e.to_string()))?;
    Ok(())
}

fn clip(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let head: String = s.chars().take(n - 1).collect();
        format!("{head}…")
    }
}

/// One row per risk: id, severity, label, threat actors, elements.
pub fn write_summary(report: &AnnotatedRiskReport, out: &mut dyn Write) -> std::io::Result<()> {
    if report.is_empty() {
        return writeln!(out, "No privacy risks found.");
    }
    let rows: Vec<[String; 5]> = report
        .risks
        .iter()
        .map(|r| {
            let elements: Vec<String> = r
                .risk
                .elements
                .iter()
                .map(|e| {
                    if e.marked_by_user {
                        format!("{}*", e.element)
                    } else {
                        e.element.clone()
                    }
                })
                .collect();
            [
                r.risk.privacy_risk_id.to_string(),
                r.risk.severity.as_str().to_string(),
                clip(&r.risk.label, 40),
                clip(&r.risk.threat_actors.join(", "), 36),
                clip(&elements.join(", "), 48),
            ]
        })
        .collect();
    let header = ["ID", "Severity", "Risk", "Threat actors", "Elements"];
    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    writeln!(out, "{}", line(&header.map(String::from)))?;
    writeln!(out, "{}", line(&widths.map(|w| "-".repeat(w))))?;
    for row in &rows {
        writeln!(out, "{}", line(row))?;
    }
    if report.risks.iter().any(|r| r.risk.has_user_marked_element()) {
        writeln!(out, "* marked by you")?;
    }
    Ok(())
}
