use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::clock::{Clock, SystemClock};
use super::limiter::RateLimiter;
use super::persist::persist_results;
use super::query::{render_entity, EntityKind, EntityType, Predicate, QuerySpec};
use super::source::{AuthMode, Endpoint, Extract, ExtractFormat, SourceDescriptor, SourceRegistry};
use super::transport::{HttpRequest, HttpResponse, Transport, UreqTransport};
use super::unified::{merge_records, summarize, EntityRef, FetchResult, RelatedEntity, SourceStatus, UnifiedRecord};
use super::FederationError;

pub const DEFAULT_WORKERS: usize = 4;

/// Records extracted from one source response, in source-native rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub source: String,
    pub records: Vec<UnifiedRecord>,
}

/// Shareable client over every registered source.
pub struct FederationClient {
    registry: SourceRegistry,
    transport: Arc<dyn Transport>,
    limiter: Arc<RateLimiter>,
    credentials: HashMap<String, String>,
    workers: usize,
}

impl FederationClient {
    pub fn new(registry: SourceRegistry, transport: Arc<dyn Transport>, limiter: Arc<RateLimiter>) -> Self {
        Self {
            registry,
            transport,
            limiter,
            credentials: HashMap::new(),
            workers: DEFAULT_WORKERS,
        }
    }

    /// Real HTTP, wall clock, registry with environment overrides.
    pub fn from_env() -> Self {
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::new());
        Self::new(SourceRegistry::from_env(), Arc::new(UreqTransport::new()), Arc::new(RateLimiter::new(clock)))
    }

    pub fn with_credential(mut self, env: &str, value: &str) -> Self {
        self.credentials.insert(env.to_string(), value.to_string());
        self
    }

    pub fn with_workers(mut self, n: usize) -> Self {
        self.workers = n.max(1);
        self
    }

    pub fn registry(&self) -> &SourceRegistry {
        &self.registry
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    fn credential(&self, env: &str) -> Option<String> {
        self.credentials
            .get(env)
            .cloned()
            .or_else(|| std::env::var(env).ok())
            .filter(|v| !v.is_empty())
    }

    /// Sends `req` to `source_id` honoring its rate limit, auth mode and retry policy.
    pub fn fetch_with_policy(&self, source_id: &str, mut req: HttpRequest) -> Result<HttpResponse, FederationError> {
        let source = self.registry.get(source_id)?;
        if !source.live && !source.overridden {
            return Err(FederationError::StubSource(source.id.clone()));
        }
        match &source.auth {
            AuthMode::None => {}
            AuthMode::ApiKey { env, param } => {
                let key = self.credential(env).ok_or_else(|| FederationError::AuthMissing {
                    source_id: source.id.clone(),
                    env: env.clone(),
                })?;
                let sep = if req.url.contains('?') { '&' } else { '?' };
                let enc: String = url::form_urlencoded::byte_serialize(key.as_bytes()).collect();
                req.url = format!("{}{sep}{param}={enc}", req.url);
            }
            AuthMode::Session { env } => {
                let token = self.credential(env).ok_or_else(|| FederationError::AuthMissing {
                    source_id: source.id.clone(),
                    env: env.clone(),
                })?;
                req.headers.push(("Authorization".into(), format!("Bearer {token}")));
            }
        }
        req.timeout = Duration::from_millis(source.timeout_ms);
        let host = req.host();
        let policy = source.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.limiter.acquire(&host, source.rate_limit);
            let reason = match self.transport.send(&req) {
                Ok(resp) if resp.is_success() => return Ok(resp),
                Ok(resp) if !resp.is_transient() => {
                    return Err(FederationError::SourceUnavailable {
                        host,
                        attempts: attempt,
                        reason: format!("HTTP {}", resp.status),
                    })
                }
                Ok(resp) => format!("HTTP {}", resp.status),
                Err(e) => e.to_string(),
            };
            if attempt >= policy.max_attempts {
                return Err(FederationError::SourceUnavailable { host, attempts: attempt, reason });
            }
            self.limiter.clock().sleep(policy.backoff(attempt));
        }
    }

    fn request_for(
        &self,
        source: &SourceDescriptor,
        endpoint: &Endpoint,
        params: &[(&str, &str)],
    ) -> Result<HttpRequest, FederationError> {
        let url = source.url_for(endpoint, params);
        let Some(gql) = &endpoint.graphql else {
            return Ok(HttpRequest::get(url));
        };
        let template = crate::data::graphql_template(&gql.template)
            .ok_or_else(|| FederationError::Config(format!("unknown GraphQL template {}", gql.template)))?;
        let mut vars = serde_json::Map::new();
        for (k, v) in params {
            let value = match *k {
                "query" => json!(v),
                "size" => json!(v.parse::<u64>().unwrap_or(10)),
                _ => json!(v),
            };
            let key = if *k == "query" { "queryString" } else { k };
            vars.insert(key.to_string(), value);
        }
        for (k, v) in &gql.variables {
            vars.insert(k.clone(), v.clone());
        }
        let body = json!({ "query": template, "variables": vars });
        Ok(HttpRequest::post_json(url, body.to_string()))
    }

    /// Queries one source for `kind` and extracts its records.
    pub fn query_source(
        &self,
        source_id: &str,
        kind: EntityKind,
        query: &str,
        limit: usize,
    ) -> Result<ParsedResponse, FederationError> {
        let source = self.registry.get(source_id)?;
        let endpoint = source.endpoint(kind.as_str())?;
        let size = limit.to_string();
        let req = self.request_for(source, endpoint, &[("query", query), ("size", &size)])?;
        let resp = self.fetch_with_policy(source_id, req)?;
        let mut records = extract_records(&resp.body, &endpoint.extract, source_id, kind)?;
        records.truncate(limit);
        Ok(ParsedResponse { source: source_id.to_string(), records })
    }

    /// Queries the requested sources concurrently and merges their records.
    pub fn search_entities_unified(&self, spec: &QuerySpec) -> Result<FetchResult, FederationError> {
        spec.validate()?;
        let mut ids: Vec<String> = if spec.sources.is_empty() {
            self.registry.sources_for(spec.kind)
        } else {
            for s in &spec.sources {
                self.registry.get(s)?;
            }
            spec.sources.clone()
        };
        ids.sort_by_key(|s| self.registry.priority_of(s));
        ids.dedup();
        if ids.is_empty() {
            return Err(FederationError::InvalidQuery(format!("no source serves {}", spec.kind)));
        }
        let slots: Vec<Mutex<Option<Result<ParsedResponse, FederationError>>>> =
            ids.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..self.workers.min(ids.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= ids.len() {
                        break;
                    }
                    let r = self.query_source(&ids[i], spec.kind, &spec.query, spec.limit);
                    *slots[i].lock().expect("result slot") = Some(r);
                });
            }
        });
        let mut status = Vec::new();
        let mut per_source = Vec::new();
        for (id, slot) in ids.iter().zip(slots) {
            match slot.into_inner().expect("result slot").expect("every source ran") {
                Ok(p) => {
                    status.push((id.clone(), SourceStatus::Ok { count: p.records.len() }));
                    per_source.push(p);
                }
                Err(e) => status.push((id.clone(), SourceStatus::Failed { reason: e.to_string() })),
            }
        }
        if per_source.is_empty() {
            return Err(FederationError::AllSourcesFailed(
                status
                    .into_iter()
                    .map(|(id, s)| match s {
                        SourceStatus::Failed { reason } => (id, reason),
                        SourceStatus::Ok { .. } => (id, String::new()),
                    })
                    .collect(),
            ));
        }
        let records = merge_records(per_source);
        let mut manifest = Vec::new();
        if let Some(dir) = &spec.save {
            let stem = format!("{}_{}", spec.kind, file_stem(&spec.query));
            manifest = persist_results(&records, dir, &stem)?.paths();
        }
        let summary = summarize(spec, &records, &status, &manifest);
        Ok(FetchResult { kind: spec.kind, query: spec.query.clone(), records, summary, manifest, status })
    }

    /// Entities linked to `entity` by `predicate` in the relation-search backend.
    pub fn find_related_entities(&self, entity: &EntityRef, predicate: &str) -> Result<Vec<RelatedEntity>, FederationError> {
        let predicate: Predicate = predicate.parse()?;
        let id = entity.annotation_id()?;
        let source = self.registry.get("pubtator")?;
        let endpoint = source.endpoint("relations")?;
        let pred = predicate.as_str().to_lowercase();
        let req = self.request_for(source, endpoint, &[("entity", &id), ("predicate", &pred)])?;
        let resp = self.fetch_with_policy(&source.id, req)?;
        parse_relations(&resp.body, &id, predicate)
    }
}

impl FederationClient {
    /// PMIDs referenced by the publication `pmid`.
    pub fn citations(&self, pmid: u64) -> Result<Vec<u64>, FederationError> {
        let source = self.registry.get("pubmed")?;
        let endpoint = source.endpoint("citations")?;
        let id = pmid.to_string();
        let req = self.request_for(source, endpoint, &[("pmid", &id)])?;
        let resp = self.fetch_with_policy(&source.id, req)?;
        parse_citations(&resp.body, pmid)
    }
}

pub(crate) fn parse_citations(body: &str, pmid: u64) -> Result<Vec<u64>, FederationError> {
    let v: Value = serde_json::from_str(body).map_err(|e| FederationError::Parse {
        source_id: "pubmed".into(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for set in v.get("linksets").and_then(Value::as_array).into_iter().flatten() {
        for db in set.get("linksetdbs").and_then(Value::as_array).into_iter().flatten() {
            for id in db.get("links").map(scalars).unwrap_or_default() {
                if let Ok(p) = id.parse::<u64>() {
                    if p != pmid && !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
    }
    Ok(out)
}

impl std::fmt::Debug for FederationClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FederationClient")
            .field("sources", &self.registry.sources().len())
            .field("workers", &self.workers)
            .finish()
    }
}

fn file_stem(query: &str) -> String {
    let s: String = query
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    let s = s.trim_matches('_').to_string();
    if s.is_empty() {
        "query".into()
    } else {
        s.chars().take(60).collect()
    }
}

fn resolve<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    if path == "." || path.is_empty() {
        return Some(v);
    }
    let mut cur = v;
    for seg in path.split('.') {
        if let Value::Array(a) = cur {
            cur = a.first()?;
        }
        cur = cur.get(seg)?;
    }
    Some(cur)
}

fn scalars(v: &Value) -> Vec<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => vec![s.trim().to_string()],
        Value::Number(n) => vec![n.to_string()],
        Value::Array(a) => a.iter().flat_map(scalars).collect(),
        _ => Vec::new(),
    }
}

/// Applies a declarative extraction to a response body.
pub(crate) fn extract_records(
    body: &str,
    extract: &Extract,
    source_id: &str,
    kind: EntityKind,
) -> Result<Vec<UnifiedRecord>, FederationError> {
    match extract.format {
        ExtractFormat::KeggFind => Ok(parse_kegg_find(body, extract.namespace.as_deref().unwrap_or("kegg"), source_id, kind)),
        ExtractFormat::Json => {
            let v: Value = serde_json::from_str(body).map_err(|e| FederationError::Parse {
                source_id: source_id.to_string(),
                message: e.to_string(),
            })?;
            let items: Vec<&Value> = match resolve(&v, &extract.records) {
                Some(Value::Array(a)) => a.iter().collect(),
                Some(Value::Null) | None => Vec::new(),
                Some(other) => vec![other],
            };
            let mut out = Vec::new();
            for item in items {
                let mut xrefs = BTreeMap::new();
                for (ns, path) in &extract.ids {
                    let vals: BTreeSet<String> = resolve(item, path).map(scalars).unwrap_or_default().into_iter().collect();
                    if !vals.is_empty() {
                        xrefs.insert(ns.clone(), vals);
                    }
                }
                let name = resolve(item, &extract.name)
                    .and_then(|n| scalars(n).into_iter().next())
                    .or_else(|| xrefs.values().next().and_then(|s| s.iter().next().cloned()));
                let Some(name) = name else { continue };
                out.push(UnifiedRecord::single(source_id, kind, &name, xrefs, out.len(), item.clone()));
            }
            Ok(out)
        }
    }
}

fn parse_kegg_find(body: &str, namespace: &str, source_id: &str, kind: EntityKind) -> Vec<UnifiedRecord> {
    let mut out = Vec::new();
    for line in body.lines() {
        let Some((id, rest)) = line.split_once('\t') else { continue };
        let id = id.trim();
        let name = rest
            .split(';')
            .next()
            .and_then(|s| s.split(',').next())
            .map(|s| s.trim())
            .unwrap_or(rest)
            .to_string();
        if id.is_empty() || name.is_empty() {
            continue;
        }
        let mut xrefs = BTreeMap::new();
        xrefs.insert(namespace.to_string(), BTreeSet::from([id.to_string()]));
        if let Some(entrez) = id.strip_prefix("hsa:").filter(|e| e.chars().all(|c| c.is_ascii_digit())) {
            xrefs.insert("entrez".to_string(), BTreeSet::from([entrez.to_string()]));
        }
        out.push(UnifiedRecord::single(source_id, kind, &name, xrefs, out.len(), Value::String(line.to_string())));
    }
    out
}

fn pmids(v: &Value) -> Vec<u64> {
    let field = v.get("publications").or_else(|| v.get("pmids"));
    field
        .map(scalars)
        .unwrap_or_default()
        .iter()
        .filter_map(|s| s.parse().ok())
        .collect()
}

pub(crate) fn parse_relations(body: &str, self_id: &str, predicate: Predicate) -> Result<Vec<RelatedEntity>, FederationError> {
    let v: Value = serde_json::from_str(body).map_err(|e| FederationError::Parse {
        source_id: "pubtator".into(),
        message: e.to_string(),
    })?;
    let list = match &v {
        Value::Array(a) => a.as_slice(),
        other => other.get("relations").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]),
    };
    let mut merged: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    for rel in list {
        let s = rel.get("source").and_then(Value::as_str).unwrap_or("");
        let t = rel.get("target").and_then(Value::as_str).unwrap_or("");
        let other = if s.eq_ignore_ascii_case(self_id) { t } else { s };
        if other.is_empty() || other.eq_ignore_ascii_case(self_id) {
            continue;
        }
        merged.entry(other.to_string()).or_default().extend(pmids(rel));
    }
    let mut out: Vec<RelatedEntity> = merged
        .into_iter()
        .map(|(id, p)| RelatedEntity {
            entity: EntityRef::from_annotation_id(&id),
            predicate,
            pmids: p.into_iter().collect(),
        })
        .collect();
    out.sort_by(|a, b| b.pmids.len().cmp(&a.pmids.len()).then_with(|| a.entity.id.cmp(&b.entity.id)));
    Ok(out)
}

impl EntityRef {
    /// `@TYPE_name` identifier used by the relation backend.
    pub fn annotation_id(&self) -> Result<String, FederationError> {
        if let Some(id) = self.id.as_deref().filter(|i| i.starts_with('@')) {
            return Ok(id.to_string());
        }
        let t: EntityType = match self.entity_type.as_deref() {
            Some(t) => t.parse()?,
            None => return Err(FederationError::UnsupportedEntityType(format!("{} has no entity type", self.name))),
        };
        Ok(render_entity(t, &self.name))
    }

    pub fn from_annotation_id(id: &str) -> Self {
        let body = id.trim_start_matches('@');
        let (t, name) = body.split_once('_').unwrap_or(("", body));
        let entity_type = t.parse::<EntityType>().ok().map(|t| t.as_str().to_string());
        Self {
            name: name.replace('_', " "),
            entity_type,
            id: Some(id.to_string()),
        }
    }
}
