use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const CATEGORY_COUNT: u8 = 6;

/// One annotated object in a case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldObject {
    pub label: String,
    pub sensitive: bool,
    /// 0 personal information, 1 location, 2 preferences and pastimes,
    /// 3 social circle, 4 others' confidential information, 5 other.
    pub category: u8,
    /// 1 (not sensitive) to 7 (very sensitive).
    pub severity: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalCase {
    pub id: String,
    /// Resolved against the dataset file's directory.
    pub image: PathBuf,
    pub objects: Vec<GoldObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseLine {
    #[serde(default)]
    id: Option<String>,
    image: PathBuf,
    #[serde(default)]
    objects: Vec<GoldObject>,
}

fn check_object(o: &GoldObject) -> Result<(), String> {
    if o.label.trim().is_empty() {
        return Err("object label is empty".into());
    }
    if o.category >= CATEGORY_COUNT {
        return Err(format!("category {} outside 0..=5", o.category));
    }
    if !(1..=7).contains(&o.severity) {
        return Err(format!("severity {} outside 1..=7", o.severity));
    }
    Ok(())
}

/// Parses a JSONL dataset held in memory. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_dataset(text: &str, base: &Path) -> Result<Vec<EvalCase>, EvalError> {
    let mut cases = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: CaseLine = serde_json::from_str(raw).map_err(|e| EvalError::Parse {
            line,
            message: e.to_string(),
        })?;
        for o in &parsed.objects {
            check_object(o).map_err(|message| EvalError::Parse { line, message })?;
        }
        let image = base.join(&parsed.image);
        if !image.is_file() {
            return Err(EvalError::MissingImage { line, path: image });
        }
        cases.push(EvalCase {
            id: parsed.id.unwrap_or_else(|| format!("line-{line}")),
            image,
            objects: parsed.objects,
        });
    }
    Ok(cases)
}

pub fn load_dataset(path: &Path) -> Result<Vec<EvalCase>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_dataset(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with_image() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("a.png"), b"x").unwrap();
        d
    }

    #[test]
    fn two_lines_two_cases() {
        let d = dir_with_image();
        let text = r#"{"id": "one", "image": "a.png", "objects": [{"label": "face", "sensitive": true, "category": 0, "severity": 6}]}

{"image": "a.png", "objects": []}
"#;
        let cases = parse_dataset(text, d.path()).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].objects[0].label, "face");
        assert_eq!(cases[1].id, "line-3");
        assert_eq!(cases[1].image, d.path().join("a.png"));
    }

    #[test]
    fn severity_nine_is_rejected() {
        let d = dir_with_image();
        let text = r#"{"image": "a.png", "objects": []}
{"image": "a.png", "objects": [{"label": "face", "sensitive": true, "category": 0, "severity": 9}]}"#;
        match parse_dataset(text, d.path()).unwrap_err() {
            EvalError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_category_and_json() {
        let d = dir_with_image();
        let cat = r#"{"image": "a.png", "objects": [{"label": "x", "sensitive": true, "category": 6, "severity": 2}]}"#;
        assert!(matches!(
            parse_dataset(cat, d.path()),
            Err(EvalError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_dataset("{", d.path()),
            Err(EvalError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_file_is_empty() {
        let d = dir_with_image();
        let p = d.path().join("empty.jsonl");
        fs::write(&p, "").unwrap();
        assert!(load_dataset(&p).unwrap().is_empty());
    }

    #[test]
    fn missing_image() {
        let d = dir_with_image();
        let err = parse_dataset(r#"{"image": "nope.png"}"#, d.path()).unwrap_err();
        assert!(matches!(err, EvalError::MissingImage { line: 1, .. }));
    }
}
