//! Response envelope and error codes of the HTTP API.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use sensorspace_core::genesis::GenesisError;
use sensorspace_core::geometry::GeometryError;
use sensorspace_core::space::SpaceError;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadSchema,
    UnknownSchema,
    ProviderDown,
    Validation,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadSchema => StatusCode::BAD_REQUEST,
            ErrorCode::UnknownSchema => StatusCode::NOT_FOUND,
            ErrorCode::ProviderDown => StatusCode::BAD_GATEWAY,
            ErrorCode::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn unknown_schema(id: &str) -> Self {
        ApiError::new(
            ErrorCode::UnknownSchema,
            format!("no schema with id {id:?}"),
        )
        .with_detail(json!({ "schema_id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::Internal, message)
    }

    /// Maps an engine error raised while registering a schema.
    pub fn from_registration(e: SpaceError) -> Self {
        match e {
            SpaceError::Provider(p) => ApiError::new(ErrorCode::ProviderDown, p.to_string()),
            other => ApiError::new(ErrorCode::BadSchema, other.to_string()),
        }
    }

    /// Maps an engine error raised on an existing schema.
    pub fn from_space(e: SpaceError) -> Self {
        match e {
            SpaceError::Provider(p) => ApiError::new(ErrorCode::ProviderDown, p.to_string()),
            // a built space always covers clamped readings
            SpaceError::OutsideHull | SpaceError::Geometry(_) => ApiError::internal(e.to_string()),
            SpaceError::InvalidSchema(_)
            | SpaceError::TooManySensors(_)
            | SpaceError::UnknownSensor(_)
            | SpaceError::MissingSensor(_)
            | SpaceError::NonFiniteValue(_)
            | SpaceError::AnchorOutOfRange { .. }
            | SpaceError::DuplicateAnchorReading
            | SpaceError::EmbeddingDimension { .. }
            | SpaceError::Embedding(_) => ApiError::new(ErrorCode::Validation, e.to_string()),
        }
    }

    pub fn from_genesis(e: GenesisError) -> Self {
        match e {
            GenesisError::Space(s) => ApiError::from_space(s),
            GenesisError::GeneratorUnavailable(_) | GenesisError::GeneratorFailure(_) => {
                ApiError::new(ErrorCode::ProviderDown, e.to_string())
            }
            GenesisError::DimensionMismatch { .. }
            | GenesisError::RateOutOfRange(_)
            | GenesisError::InvalidPolicy(_)
            | GenesisError::ZeroCapacity
            | GenesisError::Io(_) => ApiError::internal(e.to_string()),
        }
    }

    pub fn from_geometry(e: GeometryError) -> Self {
        ApiError::internal(e.to_string())
    }
}

/// Successful response data; `status` defaults to 200.
pub struct ApiOk {
    pub status: StatusCode,
    pub data: Value,
}

impl ApiOk {
    pub fn new(data: impl Serialize) -> Self {
        ApiOk {
            status: StatusCode::OK,
            data: serde_json::to_value(data).unwrap_or(Value::Null),
        }
    }

    pub fn created(data: impl Serialize) -> Self {
        ApiOk {
            status: StatusCode::CREATED,
            ..ApiOk::new(data)
        }
    }
}

impl IntoResponse for ApiOk {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "ok": true, "data": self.data, "error": null })),
        )
            .into_response()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.code.status(),
            Json(json!({ "ok": false, "data": null, "error": self })),
        )
            .into_response()
    }
}
