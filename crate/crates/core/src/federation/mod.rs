//! Rate-limited access to biomedical knowledge-base services with unified
//! multi-source search, relation search and result persistence.

mod client;
mod clock;
mod limiter;
pub mod mock;
mod persist;
mod query;
mod source;
mod transport;
mod unified;

use std::path::PathBuf;

use thiserror::Error;

pub use client::{FederationClient, ParsedResponse};
pub use clock::{Clock, ManualClock, SystemClock};
pub use limiter::{Dispatch, RateLimiter};
pub use persist::{persist_results, read_persisted, Manifest};
pub use query::{build_boolean_query, render_entity, EntityKind, EntityType, Predicate, QuerySpec};
pub use source::{
    AuthMode, Endpoint, Extract, ExtractFormat, GraphqlSpec, Protocol, RetryPolicy, SourceDescriptor,
    SourceRegistry, ENDPOINT_ENV_PREFIX,
};
pub use transport::{HttpRequest, HttpResponse, MockTransport, Transport, TransportError, UreqTransport};
pub use unified::{EntityRef, FetchResult, RelatedEntity, SourceStatus, UnifiedRecord, XrefId};
pub(crate) use unified::merge_records;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FederationError {
    #[error("unsupported entity type: {0}")]
    UnsupportedEntityType(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown predicate: {0}")]
    UnknownPredicate(String),
    #[error("unknown source: {0}")]
    UnknownSource(String),
    #[error("source {source_id} has no endpoint for {kind}")]
    NoEndpoint { source_id: String, kind: String },
    #[error("source {host} unavailable after {attempts} attempt(s): {reason}")]
    SourceUnavailable { host: String, attempts: u32, reason: String },
    #[error("source {source_id} needs credential ${env}")]
    AuthMissing { source_id: String, env: String },
    #[error("source {0} is a stub; set an endpoint override to query it")]
    StubSource(String),
    #[error("all sources failed: {0:?}")]
    AllSourcesFailed(Vec<(String, String)>),
    #[error("response from {source_id} could not be parsed: {message}")]
    Parse { source_id: String, message: String },
    #[error("workspace {path} unavailable: {message}")]
    WorkspaceUnavailable { path: PathBuf, message: String },
    #[error("configuration error: {0}")]
    Config(String),
}
