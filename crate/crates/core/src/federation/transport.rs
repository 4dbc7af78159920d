use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
    pub timeout: Duration,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: "GET".into(),
            url: url.into(),
            headers: Vec::new(),
            body: None,
            timeout: Duration::from_secs(20),
        }
    }

    pub fn post_json(url: impl Into<String>, body: String) -> Self {
        Self {
            method: "POST".into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(body),
            ..Self::get(url)
        }
    }

    pub fn host(&self) -> String {
        url::Url::parse(&self.url)
            .ok()
            .and_then(|u| {
                let host = u.host_str()?.to_string();
                Some(match u.port() {
                    Some(p) => format!("{host}:{p}"),
                    None => host,
                })
            })
            .unwrap_or_else(|| self.url.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn ok(body: impl Into<String>) -> Self {
        Self { status: 200, body: body.into() }
    }

    pub fn status(status: u16) -> Self {
        Self { status, body: String::new() }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Server errors and throttling are worth retrying.
    pub fn is_transient(&self) -> bool {
        self.status == 429 || self.status >= 500
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("{0}")]
    Other(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Blocking HTTP(S) transport.
#[derive(Debug, Clone)]
pub struct UreqTransport {
    user_agent: String,
}

impl UreqTransport {
    pub fn new() -> Self {
        Self { user_agent: format!("kgresearch/{}", env!("CARGO_PKG_VERSION")) }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for UreqTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(req.timeout))
            .http_status_as_error(false)
            .user_agent(self.user_agent.as_str())
            .build()
            .into();
        let map_err = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            ureq::Error::Io(io) => TransportError::Connect(io.to_string()),
            ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => TransportError::Connect(e.to_string()),
            other => TransportError::Other(other.to_string()),
        };
        let mut resp = if req.method == "POST" {
            let mut r = agent.post(&req.url);
            for (k, v) in &req.headers {
                r = r.header(k, v);
            }
            r.send(req.body.clone().unwrap_or_default()).map_err(map_err)?
        } else {
            let mut r = agent.get(&req.url);
            for (k, v) in &req.headers {
                r = r.header(k, v);
            }
            r.call().map_err(map_err)?
        };
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(map_err)?;
        Ok(HttpResponse { status, body })
    }
}

type Script = VecDeque<Result<HttpResponse, TransportError>>;

/// In-process scripted transport. Responses are matched by URL substring;
/// each route replays its script in order and repeats the last entry.
#[derive(Debug, Default)]
pub struct MockTransport {
    routes: Mutex<Vec<(String, Script)>>,
    calls: Mutex<Vec<HttpRequest>>,
    hits: Mutex<HashMap<String, usize>>,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(self, url_part: &str, script: Vec<Result<HttpResponse, TransportError>>) -> Self {
        self.routes
            .lock()
            .expect("mock lock")
            .push((url_part.to_string(), script.into_iter().collect()));
        self
    }

    pub fn calls(&self) -> Vec<HttpRequest> {
        self.calls.lock().expect("mock lock").clone()
    }

    pub fn hits(&self, url_part: &str) -> usize {
        self.hits.lock().expect("mock lock").get(url_part).copied().unwrap_or(0)
    }
}

impl Transport for MockTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.calls.lock().expect("mock lock").push(req.clone());
        let mut routes = self.routes.lock().expect("mock lock");
        let Some((part, script)) = routes.iter_mut().find(|(p, _)| req.url.contains(p.as_str())) else {
            return Ok(HttpResponse::status(404));
        };
        *self.hits.lock().expect("mock lock").entry(part.clone()).or_default() += 1;
        if script.len() > 1 {
            script.pop_front().expect("nonempty script")
        } else {
            script.front().cloned().unwrap_or_else(|| Ok(HttpResponse::status(404)))
        }
    }
}
