use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::query::EntityKind;
use super::FederationError;

/// `KGRESEARCH_ENDPOINT_<SOURCE_ID>` replaces a source's base URL (and every
/// per-endpoint base), which is how tests point clients at a mock server.
pub const ENDPOINT_ENV_PREFIX: &str = "KGRESEARCH_ENDPOINT_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Rest,
    Graphql,
    FlatFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AuthMode {
    #[default]
    None,
    /// Credential read from `env` and sent as query parameter `param`.
    ApiKey { env: String, param: String },
    /// Credential read from `env` and sent as a bearer token.
    Session { env: String },
}

impl AuthMode {
    pub fn env_var(&self) -> Option<&str> {
        match self {
            AuthMode::None => None,
            AuthMode::ApiKey { env, .. } | AuthMode::Session { env } => Some(env),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, backoff_ms: 500, multiplier: 2.0 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based count of failures so far).
    pub fn backoff(&self, attempt: u32) -> std::time::Duration {
        let ms = self.backoff_ms as f64 * self.multiplier.powi(attempt.saturating_sub(1) as i32);
        std::time::Duration::from_millis(ms.round() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExtractFormat {
    #[default]
    Json,
    /// Tab-separated `id<TAB>names; description` lines.
    KeggFind,
}

/// Declarative mapping from a response body to records.
///
/// `records`, `name` and `ids` values are dot paths; `.` is the value itself
/// and arrays along a path resolve to their first element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Extract {
    #[serde(default)]
    pub format: ExtractFormat,
    #[serde(default = "dot")]
    pub records: String,
    #[serde(default = "dot")]
    pub name: String,
    #[serde(default)]
    pub ids: BTreeMap<String, String>,
    /// Identifier namespace for flat-file formats.
    #[serde(default)]
    pub namespace: Option<String>,
}

fn dot() -> String {
    ".".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphqlSpec {
    pub template: String,
    #[serde(default)]
    pub variables: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    #[serde(default)]
    pub base: Option<String>,
    pub path: String,
    #[serde(default)]
    pub graphql: Option<GraphqlSpec>,
    #[serde(default)]
    pub extract: Extract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub base_url: String,
    pub protocol: Protocol,
    #[serde(default)]
    pub auth: AuthMode,
    pub rate_limit: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    /// Live sources may be queried at their public endpoint; the others are
    /// stubs until an endpoint override is set.
    #[serde(default)]
    pub live: bool,
    #[serde(default)]
    pub endpoints: BTreeMap<String, Endpoint>,
    #[serde(skip)]
    pub overridden: bool,
}

fn default_timeout() -> u64 {
    20_000
}

impl SourceDescriptor {
    pub fn validate(&self) -> Result<(), FederationError> {
        if self.rate_limit.is_nan() || self.rate_limit <= 0.0 {
            return Err(FederationError::Config(format!("{}: rate limit must be > 0", self.id)));
        }
        if self.retry.max_attempts < 1 {
            return Err(FederationError::Config(format!("{}: max attempts must be >= 1", self.id)));
        }
        url::Url::parse(&self.base_url).map_err(|e| FederationError::Config(format!("{}: {e}", self.id)))?;
        Ok(())
    }

    pub fn endpoint(&self, name: &str) -> Result<&Endpoint, FederationError> {
        self.endpoints.get(name).ok_or_else(|| FederationError::NoEndpoint {
            source_id: self.id.clone(),
            kind: name.to_string(),
        })
    }

    pub fn supports(&self, kind: EntityKind) -> bool {
        self.endpoints.contains_key(kind.as_str())
    }

    /// Full URL for an endpoint with `{name}` placeholders filled in, values
    /// percent-encoded.
    pub fn url_for(&self, endpoint: &Endpoint, params: &[(&str, &str)]) -> String {
        let base = match (&endpoint.base, self.overridden) {
            (Some(b), false) => b.as_str(),
            _ => self.base_url.as_str(),
        };
        let mut path = endpoint.path.clone();
        for (k, v) in params {
            let enc: String = url::form_urlencoded::byte_serialize(v.as_bytes()).collect();
            path = path.replace(&format!("{{{k}}}"), &enc.replace('+', "%20"));
        }
        format!("{}{}", base.trim_end_matches('/'), path)
    }

    pub fn with_base_url(mut self, base: &str) -> Self {
        self.base_url = base.trim_end_matches('/').to_string();
        self.overridden = true;
        self
    }
}

/// Registered sources plus the merge priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRegistry {
    sources: Vec<SourceDescriptor>,
    priority: Vec<String>,
}

#[derive(Deserialize)]
struct RegistryFile {
    priority: Vec<String>,
    sources: Vec<SourceDescriptor>,
}

impl SourceRegistry {
    pub fn from_json(text: &str) -> Result<Self, FederationError> {
        let file: RegistryFile = serde_json::from_str(text).map_err(|e| FederationError::Config(e.to_string()))?;
        let reg = Self { sources: file.sources, priority: file.priority };
        for s in &reg.sources {
            s.validate()?;
        }
        Ok(reg)
    }

    /// Bundled registry of all sources, without environment overrides.
    pub fn builtin() -> Self {
        Self::from_json(crate::data::SOURCES).expect("bundled source registry")
    }

    /// Bundled registry with `KGRESEARCH_ENDPOINT_*` overrides applied.
    pub fn from_env() -> Self {
        let mut reg = Self::builtin();
        for s in &mut reg.sources {
            let var = format!("{ENDPOINT_ENV_PREFIX}{}", s.id.to_uppercase());
            if let Ok(base) = std::env::var(&var) {
                *s = s.clone().with_base_url(&base);
            }
        }
        reg
    }

    /// Points every source at `{root}/{source_id}`.
    pub fn with_mock_root(mut self, root: &str) -> Self {
        let root = root.trim_end_matches('/');
        for s in &mut self.sources {
            *s = s.clone().with_base_url(&format!("{root}/{}", s.id));
        }
        self
    }

    pub fn sources(&self) -> &[SourceDescriptor] {
        &self.sources
    }

    pub fn get(&self, id: &str) -> Result<&SourceDescriptor, FederationError> {
        self.sources
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| FederationError::UnknownSource(id.to_string()))
    }

    pub fn get_mut(&mut self, id: &str) -> Result<&mut SourceDescriptor, FederationError> {
        self.sources
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| FederationError::UnknownSource(id.to_string()))
    }

    pub fn priority_of(&self, id: &str) -> usize {
        self.priority.iter().position(|p| p == id).unwrap_or(self.priority.len())
    }

    /// Ids of sources serving `kind`, in priority order.
    pub fn sources_for(&self, kind: EntityKind) -> Vec<String> {
        let mut v: Vec<&SourceDescriptor> = self.sources.iter().filter(|s| s.supports(kind)).collect();
        v.sort_by_key(|s| self.priority_of(&s.id));
        v.into_iter().map(|s| s.id.clone()).collect()
    }
}
