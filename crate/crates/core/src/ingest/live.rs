//! The only place that knows the reach API's URL layout and response shape.

use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::QueryDescriptor;
use crate::domain::{ParentFilter, Sex};

pub const TOKEN_ENV: &str = "ADS_API_TOKEN";
pub const ACCOUNT_ENV: &str = "ADS_ACCOUNT_ID";
pub const DEFAULT_API_BASE: &str = "https://graph.facebook.com/v19.0";
/// Targeting id of the "parents of a child up to 12 months" family status.
pub const NEW_PARENTS_STATUS_ID: &str = "6023005458383";

/// Failure of a single reach request.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Anything that can answer a reach query with an audience count.
pub trait ReachSource: Send + Sync {
    fn fetch(&self, q: &QueryDescriptor) -> Result<u64, SourceError>;
}

/// Blocking client for the advertising delivery-estimate endpoint.
pub struct ReachApiClient {
    http: reqwest::blocking::Client,
    api_base: String,
    account_id: String,
    token: String,
}

impl ReachApiClient {
    pub fn new(api_base: impl Into<String>, account_id: impl Into<String>, token: impl Into<String>) -> Result<Self, SourceError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| SourceError::Transport(e.to_string()))?;
        Ok(Self {
            http,
            api_base: api_base.into().trim_end_matches('/').to_string(),
            account_id: account_id.into(),
            token: token.into(),
        })
    }

    /// Reads the token from `ADS_API_TOKEN`; the account id comes from the
    /// argument or `ADS_ACCOUNT_ID`.
    pub fn from_env(api_base: &str, account_id: Option<&str>) -> Result<Self, SourceError> {
        let token = std::env::var(TOKEN_ENV)
            .ok()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| SourceError::Auth(format!("{TOKEN_ENV} is not set")))?;
        let account = match account_id {
            Some(a) => a.to_string(),
            None => std::env::var(ACCOUNT_ENV)
                .map_err(|_| SourceError::Auth(format!("no ad account configured (set {ACCOUNT_ENV})")))?,
        };
        Self::new(api_base, account, token)
    }

    pub fn endpoint(&self) -> String {
        format!("{}/act_{}/delivery_estimate", self.api_base, self.account_id.trim_start_matches("act_"))
    }
}

/// Targeting specification for one query.
pub fn targeting_spec(q: &QueryDescriptor) -> Value {
    let gender = match q.sex {
        Sex::Male => 1,
        Sex::Female => 2,
    };
    let mut spec = json!({
        "geo_locations": { "countries": [q.country_iso2.as_str()] },
        "genders": [gender],
        "age_min": q.age_min,
        "age_max": q.age_max,
    });
    if q.parent_filter == ParentFilter::ParentOfChild0To12m {
        spec["family_statuses"] = json!([{ "id": NEW_PARENTS_STATUS_ID }]);
    }
    spec
}

impl ReachSource for ReachApiClient {
    fn fetch(&self, q: &QueryDescriptor) -> Result<u64, SourceError> {
        let spec = targeting_spec(q).to_string();
        let resp = self
            .http
            .get(self.endpoint())
            .query(&[("access_token", self.token.as_str()), ("optimization_goal", "REACH"), ("targeting_spec", &spec)])
            .send()
            .map_err(|e| SourceError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| SourceError::Transport(e.to_string()))?;
        parse_response(status, &body)
    }
}

/// Maps an HTTP status and body to a count or a classified error.
pub fn parse_response(status: u16, body: &str) -> Result<u64, SourceError> {
    let parsed: Result<Value, _> = serde_json::from_str(body);
    if let Ok(v) = &parsed {
        if let Some(err) = v.get("error") {
            let code = err.get("code").and_then(Value::as_i64).unwrap_or_default();
            let msg = err.get("message").and_then(Value::as_str).unwrap_or("unknown error").to_string();
            return Err(match code {
                102 | 190 => SourceError::Auth(msg),
                4 | 17 | 32 | 613 | 80004 => SourceError::RateLimited(msg),
                _ if status == 429 => SourceError::RateLimited(msg),
                _ if status == 401 || status == 403 => SourceError::Auth(msg),
                _ => SourceError::Malformed(format!("api error {code}: {msg}")),
            });
        }
    }
    match status {
        429 => return Err(SourceError::RateLimited(format!("http {status}"))),
        401 | 403 => return Err(SourceError::Auth(format!("http {status}"))),
        500..=599 => return Err(SourceError::Transport(format!("http {status}"))),
        200..=299 => {}
        _ => return Err(SourceError::Malformed(format!("unexpected http {status}"))),
    }
    let v = parsed.map_err(|e| SourceError::Malformed(e.to_string()))?;
    let data = v.get("data").ok_or_else(|| SourceError::Malformed("missing `data`".into()))?;
    let entry = match data {
        Value::Array(items) => items.first().ok_or_else(|| SourceError::Malformed("empty `data`".into()))?,
        other => other,
    };
    ["estimate_mau", "estimate_mau_upper_bound", "users"]
        .iter()
        .find_map(|k| entry.get(*k).and_then(Value::as_u64))
        .ok_or_else(|| SourceError::Malformed("no audience size in response".into()))
}
