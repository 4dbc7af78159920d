use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::{AnswerKey, BenchError, BenchItem, Benchmark};
use crate::curate::mcq::seeded_rng;

pub const LITQA2_SAMPLE: usize = 25;
pub const TRIALPANORAMA_RECENT: usize = 50;

/// Subset sizes observed on the upstream dataset versions the recipes were
/// designed against; upstream exports drift, so these are not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SnapshotExpectation {
    pub benchmark: Benchmark,
    pub count: usize,
    pub version: &'static str,
}

pub const SNAPSHOT_EXPECTATIONS: [SnapshotExpectation; 4] = [
    SnapshotExpectation { benchmark: Benchmark::HleMed, count: 30, version: "HLE public release, early 2025" },
    SnapshotExpectation { benchmark: Benchmark::Litqa2, count: 25, version: "LAB-Bench LitQA2, any version (fixed sample size)" },
    SnapshotExpectation { benchmark: Benchmark::SupergpqaMedHard, count: 172, version: "SuperGPQA initial release, 2025" },
    SnapshotExpectation { benchmark: Benchmark::TrialpanoramaEqa, count: 50, version: "TrialPanorama evidence QA, 2025 (fixed cutoff)" },
];

fn field<'a>(rec: &'a Value, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| rec.get(*n)).filter(|v| !v.is_null())
}

fn record_id(rec: &Value, index: usize) -> Result<String, BenchError> {
    match field(rec, &["id", "uuid"]) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        _ => Err(BenchError::MissingField { record: format!("#{index}"), field: "id".into() }),
    }
}

fn require<'a>(rec: &'a Value, id: &str, names: &[&str]) -> Result<&'a Value, BenchError> {
    field(rec, names).ok_or_else(|| BenchError::MissingField { record: id.to_string(), field: names[0].to_string() })
}

fn text_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn requires_image(v: Option<&Value>) -> bool {
    match v {
        None | Some(Value::Null) | Some(Value::Bool(false)) => false,
        Some(Value::String(s)) => !s.trim().is_empty(),
        Some(Value::Array(a)) => !a.is_empty(),
        Some(_) => true,
    }
}

/// Every string stored under an `abstract` key, at any depth.
pub fn abstract_texts(rec: &Value) -> Vec<String> {
    fn walk(v: &Value, out: &mut Vec<String>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    if k.eq_ignore_ascii_case("abstract") {
                        match x {
                            Value::String(s) if !s.trim().is_empty() => out.push(s.clone()),
                            Value::Array(a) => out.extend(a.iter().filter_map(Value::as_str).map(str::to_string)),
                            _ => {}
                        }
                    } else {
                        walk(x, out);
                    }
                }
            }
            Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(rec, &mut out);
    out
}

/// Removes `abstract` keys everywhere, then erases abstract text quoted elsewhere.
fn strip_abstracts(rec: &Value) -> Value {
    fn drop_keys(v: &Value) -> Value {
        match v {
            Value::Object(m) => Value::Object(
                m.iter().filter(|(k, _)| !k.eq_ignore_ascii_case("abstract")).map(|(k, x)| (k.clone(), drop_keys(x))).collect::<Map<_, _>>(),
            ),
            Value::Array(a) => Value::Array(a.iter().map(drop_keys).collect()),
            other => other.clone(),
        }
    }
    fn erase(v: &Value, texts: &[String]) -> Value {
        match v {
            Value::String(s) => {
                let mut s = s.clone();
                for t in texts {
                    s = s.replace(t.as_str(), "");
                }
                Value::String(s)
            }
            Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), erase(x, texts))).collect()),
            Value::Array(a) => Value::Array(a.iter().map(|x| erase(x, texts)).collect()),
            other => other.clone(),
        }
    }
    let mut texts = abstract_texts(rec);
    texts.sort_by_key(|t| std::cmp::Reverse(t.len()));
    erase(&drop_keys(rec), &texts)
}

/// Applies a benchmark's selection recipe to native records, keeping native fields.
/// The output is a subset of the input by id and re-filtering it changes nothing.
pub fn filter_records(records: &[Value], benchmark: Benchmark, seed: u64) -> Result<Vec<Value>, BenchError> {
    let mut ids = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        ids.push(record_id(r, i)?);
    }
    match benchmark {
        Benchmark::HleMed => {
            let mut out = Vec::new();
            for (r, id) in records.iter().zip(&ids) {
                let subject = text_of(require(r, id, &["raw_subject", "subject"])?);
                if r.get("image").is_none() {
                    return Err(BenchError::MissingField { record: id.clone(), field: "image".into() });
                }
                if subject.trim() == "Medicine" && !requires_image(r.get("image")) {
                    out.push(r.clone());
                }
            }
            Ok(out)
        }
        Benchmark::SupergpqaMedHard => {
            let mut out = Vec::new();
            for (r, id) in records.iter().zip(&ids) {
                let difficulty = text_of(require(r, id, &["difficulty"])?);
                let fld = text_of(require(r, id, &["field"])?);
                if difficulty.trim().eq_ignore_ascii_case("hard") && fld.trim() == "Clinical Medicine" {
                    out.push(r.clone());
                }
            }
            Ok(out)
        }
        Benchmark::Litqa2 => {
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.sort_by(|a, b| ids[*a].cmp(&ids[*b]));
            order.dedup_by(|a, b| ids[*a] == ids[*b]);
            if order.len() > LITQA2_SAMPLE {
                let mut rng = seeded_rng(seed);
                order.shuffle(&mut rng);
                order.truncate(LITQA2_SAMPLE);
                order.sort_by(|a, b| ids[*a].cmp(&ids[*b]));
            }
            Ok(order.into_iter().map(|i| records[i].clone()).collect())
        }
        Benchmark::TrialpanoramaEqa => {
            let mut dated = Vec::with_capacity(records.len());
            for (i, (r, id)) in records.iter().zip(&ids).enumerate() {
                let date = text_of(require(r, id, &["date", "publication_date"])?);
                dated.push((date, id.clone(), i));
            }
            dated.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            dated.truncate(TRIALPANORAMA_RECENT);
            Ok(dated.into_iter().map(|(_, _, i)| strip_abstracts(&records[i])).collect())
        }
    }
}

const LABELS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";

fn labeled(options: &[String]) -> Vec<Value> {
    options.iter().zip(LABELS).map(|(t, l)| json!({"label": (*l as char).to_string(), "text": t})).collect()
}

fn answer_key(v: &Value) -> AnswerKey {
    match v {
        Value::Array(a) => AnswerKey::Labels { labels: a.iter().map(text_of).collect() },
        other => AnswerKey::Single { answer: text_of(other) },
    }
}

fn metadata(benchmark: Benchmark, filters: &[&str]) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("source".into(), Value::from(benchmark.as_str()));
    m.insert("filters".into(), Value::from(filters.to_vec()));
    m
}

/// Filters native records and converts them into scored items.
pub fn prepare_dataset(records: &[Value], benchmark: Benchmark, seed: u64) -> Result<Vec<BenchItem>, BenchError> {
    let kept = filter_records(records, benchmark, seed)?;
    let mut items = Vec::with_capacity(kept.len());
    for (i, r) in kept.iter().enumerate() {
        let id = record_id(r, i)?;
        let question = text_of(require(r, &id, &["question"])?);
        let item = match benchmark {
            Benchmark::HleMed => BenchItem {
                question: json!({
                    "question": question,
                    "answer_type": r.get("answer_type").cloned().unwrap_or(Value::Null),
                }),
                answer: AnswerKey::Single { answer: text_of(require(r, &id, &["answer"])?) },
                metadata: metadata(benchmark, &["subject=Medicine", "no_image"]),
                id,
                family: benchmark.family(),
            },
            Benchmark::SupergpqaMedHard => {
                let options: Vec<String> = require(r, &id, &["options"])?
                    .as_array()
                    .map(|a| a.iter().map(text_of).collect())
                    .unwrap_or_default();
                BenchItem {
                    question: json!({"question": question, "options": labeled(&options)}),
                    answer: AnswerKey::Single { answer: text_of(require(r, &id, &["answer_letter"])?) },
                    metadata: metadata(benchmark, &["difficulty=hard", "field=Clinical Medicine"]),
                    id,
                    family: benchmark.family(),
                }
            }
            Benchmark::Litqa2 => {
                let ideal = text_of(require(r, &id, &["ideal"])?);
                let mut options = vec![ideal.clone()];
                if let Some(d) = field(r, &["distractors"]).and_then(Value::as_array) {
                    options.extend(d.iter().map(text_of));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fxhash(&id));
                options.shuffle(&mut rng);
                let pos = options.iter().position(|o| *o == ideal).unwrap_or(0);
                BenchItem {
                    question: json!({"question": question, "options": labeled(&options)}),
                    answer: AnswerKey::Single { answer: (LABELS[pos] as char).to_string() },
                    metadata: metadata(benchmark, &[&format!("seeded_sample={LITQA2_SAMPLE}")]),
                    id,
                    family: benchmark.family(),
                }
            }
            Benchmark::TrialpanoramaEqa => {
                let mut payload = r.clone();
                if let Value::Object(m) = &mut payload {
                    for k in ["id", "answer", "date", "publication_date"] {
                        m.remove(k);
                    }
                }
                BenchItem {
                    question: payload,
                    answer: answer_key(require(r, &id, &["answer"])?),
                    metadata: metadata(benchmark, &["abstracts_removed", &format!("most_recent={TRIALPANORAMA_RECENT}")]),
                    id,
                    family: benchmark.family(),
                }
            }
        };
        item.validate()?;
        items.push(item);
    }
    Ok(items)
}

/// Stable 64-bit string hash (FNV-1a) used to derive per-item option orders.
fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}
