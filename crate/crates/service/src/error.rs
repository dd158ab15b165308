use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::json;

use veil_core::backends::BackendError;
use veil_core::obfuscate::ObfuscationError;
use veil_core::pipeline::PipelineError;
use veil_core::raster::RasterError;

/// An error as the client sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn validation(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }

    pub fn busy() -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "busy",
            "another operation on this session is still running",
        )
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "image_too_large",
            format!("body exceeds {limit} bytes"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code, "message": self.message});
        (self.status, Json(body)).into_response()
    }
}

fn backend_status(e: &BackendError) -> StatusCode {
    match e {
        BackendError::Raster(_) | BackendError::Precondition(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::BAD_GATEWAY,
    }
}

impl From<BackendError> for ApiError {
    fn from(e: BackendError) -> Self {
        ApiError::new(backend_status(&e), e.code(), e.to_string())
    }
}

impl From<RasterError> for ApiError {
    fn from(e: RasterError) -> Self {
        ApiError::from(PipelineError::Raster(e))
    }
}

impl From<ObfuscationError> for ApiError {
    fn from(e: ObfuscationError) -> Self {
        ApiError::from(PipelineError::Obfuscation(e))
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        use PipelineError as P;
        let status = match &e {
            P::ImageMissing => StatusCode::NOT_FOUND,
            P::NoReport | P::NothingToUndo | P::NothingToRedo => StatusCode::CONFLICT,
            P::ParseAfterRetry { .. } => StatusCode::BAD_GATEWAY,
            P::Backend(b) | P::Obfuscation(ObfuscationError::Backend(b)) => backend_status(b),
            P::Integrity(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}
