//! Set `UPDATE_GOLDENS=1` to rewrite the files after an intended change.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use veil_core::backends::MockSet;
use veil_core::prompt::{build_identification_prompt, build_prescan, build_recommendation_prompt, UserContext};
use veil_core::raster::{load_image, BoundingBox, RegionMask};
use veil_core::risk::parse_risk_report;

#[derive(Deserialize)]
struct GoldenContext {
    name: String,
    sharing_intent: Option<String>,
    privacy_concern: Option<String>,
    concern_box: Option<BoundingBox>,
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn check(path: &Path, actual: &str) {
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{} differs from the built bundle", path.display());
}

#[test]
fn bundles_match_goldens() {
    let dir = fixtures();
    let img = load_image(&std::fs::read(dir.join("mock/family.png")).unwrap(), None).unwrap();
    let backends = MockSet::from_fixture_dir(&dir.join("mock")).unwrap().backends();
    let prescan = build_prescan(&img, backends.detect_objects(&img).unwrap()).unwrap();
    let reply = std::fs::read_to_string(
        dir.join("mock/chat")
            .join(format!("{}.identification.txt", img.content_hash())),
    )
    .unwrap();
    let report = parse_risk_report(&reply).unwrap();

    let contexts: Vec<GoldenContext> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("prompts/contexts.json")).unwrap()).unwrap();
    assert_eq!(contexts.len(), 3);
    for c in contexts {
        let ctx = UserContext {
            sharing_intent: c.sharing_intent,
            privacy_concern: c.privacy_concern,
            concern_mask: c
                .concern_box
                .map(|b| RegionMask::from_box(img.width(), img.height(), b).unwrap()),
        };
        let id = build_identification_prompt(&ctx, &prescan, &img).unwrap();
        let rec = build_recommendation_prompt(&ctx, &report, &img).unwrap();
        let out = dir.join("prompts").join(&c.name);
        check(&out.join("identification.txt"), &id.golden_text());
        check(&out.join("recommendation.txt"), &rec.golden_text());
    }
}
