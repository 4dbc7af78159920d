//! Local HTTP server replaying recorded responses, for hermetic tests.
//!
//! A fixture file is a JSON array of routes:
//!
//! ```json
//! [{"path": "/biothings/query", "responses": [{"status": 200, "body_file": "mygene.json", "delay_ms": 0}]}]
//! ```
//!
//! A route matches when its `path` is a substring of the request path and
//! query. Responses replay in order and the last one repeats. `body` may be
//! given inline instead of `body_file` (resolved next to the fixture file).

use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Deserialize;

use super::FederationError;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct MockResponse {
    #[serde(default = "ok")]
    pub status: u16,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub body_file: Option<String>,
    #[serde(default)]
    pub delay_ms: u64,
}

fn ok() -> u16 {
    200
}

impl MockResponse {
    pub fn json(body: impl Into<String>) -> Self {
        Self { status: 200, body: body.into(), body_file: None, delay_ms: 0 }
    }

    pub fn status(status: u16) -> Self {
        Self { status, body: String::new(), body_file: None, delay_ms: 0 }
    }

    pub fn delayed(mut self, ms: u64) -> Self {
        self.delay_ms = ms;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct MockRoute {
    pub path: String,
    pub responses: Vec<MockResponse>,
}

impl MockRoute {
    pub fn new(path: &str, responses: Vec<MockResponse>) -> Self {
        Self { path: path.to_string(), responses }
    }
}

type Routes = Arc<Mutex<Vec<(String, VecDeque<MockResponse>)>>>;

pub struct MockServer {
    url: String,
    server: Arc<tiny_http::Server>,
    stop: Arc<AtomicBool>,
    log: Arc<Mutex<Vec<String>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(routes: Vec<MockRoute>) -> Result<Self, FederationError> {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(|e| FederationError::Config(e.to_string()))?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| FederationError::Config("mock server has no IP address".into()))?;
        let server = Arc::new(server);
        let routes: Routes = Arc::new(Mutex::new(
            routes.into_iter().map(|r| (r.path, r.responses.into_iter().collect())).collect(),
        ));
        let stop = Arc::new(AtomicBool::new(false));
        let log = Arc::new(Mutex::new(Vec::new()));
        let handle = {
            let (server, stop, log) = (server.clone(), stop.clone(), log.clone());
            std::thread::spawn(move || serve(&server, &routes, &stop, &log))
        };
        Ok(Self { url: format!("http://127.0.0.1:{port}"), server, stop, log, handle: Some(handle) })
    }

    pub fn from_fixture_file(path: &Path) -> Result<Self, FederationError> {
        let text = std::fs::read_to_string(path).map_err(|e| FederationError::Config(format!("{}: {e}", path.display())))?;
        let mut routes: Vec<MockRoute> =
            serde_json::from_str(&text).map_err(|e| FederationError::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for r in &mut routes {
            for resp in &mut r.responses {
                if let Some(f) = resp.body_file.take() {
                    let p = dir.join(&f);
                    resp.body = std::fs::read_to_string(&p)
                        .map_err(|e| FederationError::Config(format!("{}: {e}", p.display())))?;
                }
            }
        }
        Self::start(routes)
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Request paths (with query) in arrival order.
    pub fn requests(&self) -> Vec<String> {
        self.log.lock().expect("mock log").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            h.join().ok();
        }
    }
}

impl std::fmt::Debug for MockServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockServer").field("url", &self.url).finish()
    }
}

fn serve(server: &tiny_http::Server, routes: &Routes, stop: &AtomicBool, log: &Mutex<Vec<String>>) {
    let mut workers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        let req = match server.recv_timeout(Duration::from_millis(50)) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(_) => break,
        };
        let path = req.url().to_string();
        log.lock().expect("mock log").push(path.clone());
        let resp = {
            let mut routes = routes.lock().expect("mock routes");
            routes.iter_mut().find(|(p, _)| path.contains(p.as_str())).map(|(_, script)| {
                if script.len() > 1 {
                    script.pop_front().expect("nonempty script")
                } else {
                    script.front().cloned().unwrap_or_else(|| MockResponse::status(404))
                }
            })
        };
        let resp = resp.unwrap_or_else(|| MockResponse::status(404));
        workers.push(std::thread::spawn(move || {
            if resp.delay_ms > 0 {
                std::thread::sleep(Duration::from_millis(resp.delay_ms));
            }
            let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header");
            let r = tiny_http::Response::from_string(resp.body).with_status_code(resp.status).with_header(header);
            req.respond(r).ok();
        }));
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        w.join().ok();
    }
}
