//! Shared configuration file for the CLI and the service.
//!
//! ```toml
//! [backends.chat]
//! endpoint = "https://api.example.com/v1/chat/completions"
//! token_env = "VEIL_CHAT_TOKEN"
//! model = "gpt-4o"
//! timeout_secs = 120
//! retry_count = 1
//!
//! [backends.detector]
//! endpoint = "http://localhost:8101/detect"
//!
//! [service]
//! port = 8080
//! max_image_bytes = 25165824
//! session_ttl_secs = 1800
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use super::BackendRole;

pub const DEFAULT_TIMEOUT_SECS: u64 = 60;
pub const DEFAULT_RETRY_COUNT: u32 = 1;
pub const MAX_RETRY_COUNT: u32 = 3;
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_IMAGE_BYTES: usize = 24 * 1024 * 1024;
pub const DEFAULT_SESSION_TTL_SECS: u64 = 30 * 60;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("backend {role}: {reason}")]
    Invalid { role: BackendRole, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendConfig {
    pub role: BackendRole,
    pub endpoint: Url,
    /// Name of the environment variable holding a bearer token.
    pub token_env: Option<String>,
    pub timeout: Duration,
    pub retry_count: u32,
    /// Model name sent to chat endpoints.
    pub model: Option<String>,
}

impl BackendConfig {
    pub fn new(role: BackendRole, endpoint: &str) -> Result<Self, ConfigError> {
        let endpoint = Url::parse(endpoint).map_err(|e| ConfigError::Invalid {
            role,
            reason: format!("endpoint {endpoint:?}: {e}"),
        })?;
        if !matches!(endpoint.scheme(), "http" | "https") {
            return Err(ConfigError::Invalid {
                role,
                reason: format!("endpoint scheme {:?} is not http(s)", endpoint.scheme()),
            });
        }
        Ok(Self {
            role,
            endpoint,
            token_env: None,
            timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS),
            retry_count: DEFAULT_RETRY_COUNT,
            model: None,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, ConfigError> {
        if timeout.is_zero() {
            return Err(ConfigError::Invalid {
                role: self.role,
                reason: "timeout must be positive".into(),
            });
        }
        self.timeout = timeout;
        Ok(self)
    }

    pub fn with_retry_count(mut self, n: u32) -> Result<Self, ConfigError> {
        if n > MAX_RETRY_COUNT {
            return Err(ConfigError::Invalid {
                role: self.role,
                reason: format!("retry_count {n} exceeds {MAX_RETRY_COUNT}"),
            });
        }
        self.retry_count = n;
        Ok(self)
    }

    pub fn with_token_env(mut self, var: impl Into<String>) -> Self {
        self.token_env = Some(var.into());
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackend {
    endpoint: String,
    token_env: Option<String>,
    timeout_secs: Option<f64>,
    retry_count: Option<u32>,
    model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceSettings {
    pub port: u16,
    pub max_image_bytes: usize,
    pub session_ttl_secs: u64,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            max_image_bytes: DEFAULT_MAX_IMAGE_BYTES,
            session_ttl_secs: DEFAULT_SESSION_TTL_SECS,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    backends: BTreeMap<String, RawBackend>,
    #[serde(default)]
    service: ServiceSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub backends: BTreeMap<BackendRole, BackendConfig>,
    pub service: ServiceSettings,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut backends = BTreeMap::new();
        for (name, b) in raw.backends {
            let role: BackendRole = name.parse().map_err(ConfigError::Parse)?;
            let mut cfg = BackendConfig::new(role, &b.endpoint)?;
            if let Some(t) = b.timeout_secs {
                if !t.is_finite() || t <= 0.0 {
                    return Err(ConfigError::Invalid {
                        role,
                        reason: "timeout must be positive".into(),
                    });
                }
                cfg = cfg.with_timeout(Duration::from_secs_f64(t))?;
            }
            if let Some(n) = b.retry_count {
                cfg = cfg.with_retry_count(n)?;
            }
            cfg.token_env = b.token_env;
            cfg.model = b.model;
            backends.insert(role, cfg);
        }
        if raw.service.max_image_bytes == 0 {
            return Err(ConfigError::Parse("service.max_image_bytes must be positive".into()));
        }
        Ok(Self {
            backends,
            service: raw.service,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}
