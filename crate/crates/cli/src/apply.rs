use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{Map, Value};
use veil_core::backends::Backends;
use veil_core::obfuscate::{self, Selection, TechniqueParams};
use veil_core::raster::{decode_mask_png, save_image, Contour, ImageBuffer, ImageFormat, RegionMask};
use veil_core::risk::ObfuscationTechnique;

use crate::args::ApplyArgs;
use crate::error::{CliError, EXIT_FAILURE};
use crate::setup;

/// Technique flags as the JSON params object the service accepts, so that
/// both front ends share one validator.
pub fn params_json(a: &ApplyArgs) -> Result<Value, CliError> {
    let mut m = Map::new();
    if let Some(v) = a.sigma {
        m.insert("sigma".into(), v.into());
    }
    if let Some(v) = a.block {
        m.insert("block".into(), v.into());
    }
    if let Some(v) = &a.color {
        m.insert("color".into(), v.clone().into());
    }
    if let Some(v) = a.height_fraction {
        m.insert("height_fraction".into(), v.into());
    }
    if let Some(v) = a.dot_radius {
        m.insert("dot_radius".into(), v.into());
    }
    if let Some(v) = a.draw_skeleton_lines {
        m.insert("draw_skeleton_lines".into(), v.into());
    }
    if let Some(v) = &a.style_prompt {
        m.insert("style_prompt".into(), v.clone().into());
    }
    if let Some(v) = &a.prompt {
        m.insert("prompt".into(), v.clone().into());
    }
    if let Some(p) = &a.reference {
        m.insert(
            "reference".into(),
            B64.encode(setup::read_file(p, "reference image")?).into(),
        );
    }
    Ok(Value::Object(m))
}

fn output_format(path: &Path) -> ImageFormat {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => ImageFormat::Jpeg,
        _ => ImageFormat::Png,
    }
}

fn read_selection(a: &ApplyArgs) -> Result<Selection, CliError> {
    if let Some(p) = &a.mask {
        let bytes = setup::read_file(p, "mask")?;
        let m = decode_mask_png(&bytes).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
        return Ok(Selection::Mask(m));
    }
    let p = a.contour.as_deref().expect("clap requires --mask or --contour");
    let text = setup::read_file(p, "contour")?;
    let c: Contour =
        serde_json::from_slice(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
    Ok(Selection::Contour(c))
}

/// Pixels outside `allowed` that differ between the two images.
pub fn locality_violations(before: &ImageBuffer, after: &ImageBuffer, allowed: &RegionMask) -> usize {
    let mut n = 0;
    for y in 0..before.height() {
        for x in 0..before.width() {
            if !allowed.get(x, y) && before.pixel(x, y) != after.pixel(x, y) {
                n += 1;
            }
        }
    }
    n
}

pub fn run(a: &ApplyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let technique: ObfuscationTechnique = a.technique.parse().map_err(|e| CliError::validation(format!("{e}")))?;
    let params = TechniqueParams::from_json(technique, &params_json(a)?)?;
    params.validate()?;
    let img = setup::read_image(&a.image)?;
    let selection = read_selection(a)?;
    let mask = selection.to_mask(img.width(), img.height())?;
    setup::check_out_dir(&a.out)?;
    let backends = match a.backend {
        Some(kind) => setup::backends(kind, &a.backends, &[])?,
        None => Backends::default(),
    };

    let (out, allowed) = obfuscate::apply_traced(technique, &img, &selection, &params, &backends)?;
    let stray = locality_violations(&img, &out, &allowed);
    if stray > 0 {
        return Err(CliError::new(
            EXIT_FAILURE,
            format!("{stray} pixels changed outside the selection"),
        ));
    }
    let bytes = save_image(&out, output_format(&a.out))?;
    setup::write_file(&a.out, &bytes)?;

    let changed = locality_violations(&img, &out, &RegionMask::new(img.width(), img.height())?);
    writeln!(
        stdout,
        "{}: {} pixels changed ({} selected), wrote {}",
        technique,
        changed,
        mask.count(),
        a.out.display()
    )
    .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))
}
