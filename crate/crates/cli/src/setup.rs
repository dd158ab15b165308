use std::path::Path;

use veil_core::backends::{BackendConfig, BackendRole, Backends, ConfigFile, MockSet};
use veil_core::raster::{
    decode_mask_png, is_color_image, load_image, mask_from_green_annotation, ImageBuffer, RegionMask,
};

use crate::args::{BackendArgs, BackendKind};
use crate::error::CliError;

pub fn read_file(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::validation(format!("cannot read {what} {}: {e}", path.display())))
}

pub fn read_image(path: &Path) -> Result<ImageBuffer, CliError> {
    let bytes = read_file(path, "image")?;
    load_image(&bytes, None).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// A 1-bit mask PNG, or a colour copy of `base` with green strokes.
pub fn read_mask(path: &Path, base: &ImageBuffer) -> Result<RegionMask, CliError> {
    let bytes = read_file(path, "mask")?;
    let bad = |e: veil_core::raster::RasterError| CliError::validation(format!("{}: {e}", path.display()));
    let mask = if is_color_image(&bytes).map_err(bad)? {
        mask_from_green_annotation(&load_image(&bytes, None).map_err(bad)?, base).map_err(bad)?
    } else {
        decode_mask_png(&bytes).map_err(bad)?
    };
    mask.ensure_same_dims(base.width(), base.height()).map_err(bad)?;
    Ok(mask)
}

/// Fails early when the output file cannot be created where asked.
pub fn check_out_dir(out: &Path) -> Result<(), CliError> {
    match out.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::validation(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

/// The config file with `--endpoint ROLE=URL` overrides applied. Other
/// settings of an overridden role are kept.
pub fn load_config(args: &BackendArgs) -> Result<ConfigFile, CliError> {
    let mut cfg = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    for entry in &args.endpoints {
        let (role, url) = entry
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("--endpoint expects ROLE=URL, got {entry:?}")))?;
        let role: BackendRole = role.parse().map_err(CliError::validation)?;
        let fresh = BackendConfig::new(role, url.trim())?;
        let merged = match cfg.backends.remove(&role) {
            Some(old) => BackendConfig {
                endpoint: fresh.endpoint,
                ..old
            },
            None => fresh,
        };
        cfg.backends.insert(role, merged);
    }
    Ok(cfg)
}

pub fn mock_backends(args: &BackendArgs) -> Result<Backends, CliError> {
    let dir = args
        .fixtures
        .as_deref()
        .ok_or_else(|| CliError::validation("--backend mock needs --fixtures DIR"))?;
    let set = MockSet::from_fixture_dir(dir).map_err(|e| CliError::validation(e.to_string()))?;
    Ok(set.backends())
}

/// Builds the clients and checks that `required` roles are present before
/// any request is made.
pub fn backends(kind: BackendKind, args: &BackendArgs, required: &[BackendRole]) -> Result<Backends, CliError> {
    let b = match kind {
        BackendKind::Mock => mock_backends(args)?,
        BackendKind::Live => {
            let cfg = load_config(args)?;
            Backends::from_config(&cfg).map_err(|e| CliError::validation(e.to_string()))?
        }
    };
    for role in required {
        if !b.has(*role) {
            let name = role.as_str();
            return Err(CliError::validation(format!(
                "no {name} endpoint configured; add [backends.{name}] to --config or pass --endpoint {name}=URL"
            )));
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn args(endpoints: &[&str], config: Option<&Path>) -> BackendArgs {
        BackendArgs {
            config: config.map(Path::to_path_buf),
            endpoints: endpoints.iter().map(|s| s.to_string()).collect(),
            fixtures: None,
        }
    }

    #[test]
    fn endpoint_override_keeps_other_settings() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "[backends.chat]\nendpoint = \"http://a/chat\"\ntoken_env = \"TOK\"").unwrap();
        let cfg = load_config(&args(&["chat=http://b/chat", "pose=http://c/pose"], Some(f.path()))).unwrap();
        let chat = &cfg.backends[&BackendRole::Chat];
        assert_eq!(chat.endpoint.as_str(), "http://b/chat");
        assert_eq!(chat.token_env.as_deref(), Some("TOK"));
        assert!(cfg.backends.contains_key(&BackendRole::Pose));
    }

    #[test]
    fn bad_endpoint_specs() {
        for entry in ["chat", "oracle=http://x", "chat=ftp://x"] {
            assert_eq!(load_config(&args(&[entry], None)).unwrap_err().code, 2, "{entry}");
        }
    }

    #[test]
    fn live_without_chat_is_validation_error() {
        let e = backends(BackendKind::Live, &args(&[], None), &[BackendRole::Chat]).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("--endpoint chat=URL"));
    }

    #[test]
    fn mock_needs_fixtures() {
        assert_eq!(backends(BackendKind::Mock, &args(&[], None), &[]).unwrap_err().code, 2);
    }
}
