//! HTTP property estimator.
//!
//! Protocol: `POST <endpoint>` with the JSON request `{"category": "...", "context": "..."}`;
//! the response body must be a JSON object with `static_friction` and any of `density`,
//! `mass`, `dynamic_friction`, `restitution` (no other keys). Anything else, including
//! timeouts, makes the caller fall back to the category table.

use std::time::Duration;

use scenelift_core::properties::{EstimatedValues, PropertyEstimator, PropertyRequest};

pub const ENDPOINT_VAR: &str = "SCENELIFT_PROPERTY_ENDPOINT";
pub const TIMEOUT: Duration = Duration::from_secs(10);

pub struct HttpEstimator {
    agent: ureq::Agent,
    endpoint: String,
}

impl HttpEstimator {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpEstimator {
            agent: ureq::AgentBuilder::new().timeout(TIMEOUT).build(),
            endpoint: endpoint.into(),
        }
    }

    /// The configured endpoint, else the environment variable, else none.
    pub fn resolve(configured: Option<&str>) -> Option<Self> {
        configured
            .map(str::to_string)
            .or_else(|| std::env::var(ENDPOINT_VAR).ok().filter(|s| !s.trim().is_empty()))
            .map(Self::new)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl PropertyEstimator for HttpEstimator {
    fn estimate(&self, request: &PropertyRequest) -> Result<EstimatedValues, String> {
        let response = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| format!("request to {} failed: {e}", self.endpoint))?;
        response
            .into_json::<EstimatedValues>()
            .map_err(|e| format!("malformed estimator response: {e}"))
    }
}
