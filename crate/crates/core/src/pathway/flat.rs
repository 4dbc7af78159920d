use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PathwayError;

const KEY_WIDTH: usize = 12;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRef {
    pub name: String,
    /// Organism gene ids (`hsa:5142`).
    pub gene_ids: Vec<String>,
    pub orthologs: Vec<String>,
}

/// One KEGG DRUG-style flat-file record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeggFlatRecord {
    pub accession: String,
    pub name: String,
    pub synonyms: Vec<String>,
    pub comment: String,
    pub efficacy: String,
    pub diseases: Vec<String>,
    pub classes: Vec<String>,
    pub targets: Vec<TargetRef>,
    pub pathways: Vec<String>,
    pub residual: BTreeMap<String, String>,
}

fn strip_brackets(s: &str) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    for c in s.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn clean_name(raw: &str) -> String {
    let s = raw.trim().trim_end_matches(';').trim();
    match s.rfind(" (") {
        Some(i) if s.ends_with(')') => s[..i].trim().to_string(),
        _ => s.to_string(),
    }
}

fn parse_target(line: &str) -> TargetRef {
    let name_end = line.find('[').unwrap_or(line.len());
    let mut t = TargetRef {
        name: line[..name_end].trim().to_string(),
        ..Default::default()
    };
    let mut rest = &line[name_end..];
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']') else { break };
        let inner = &rest[open + 1..open + close];
        if let Some((ns, ids)) = inner.split_once(':') {
            let ns_lower = ns.to_ascii_lowercase();
            for id in ids.split_whitespace() {
                if ns_lower == "ko" {
                    t.orthologs.push(id.to_string());
                } else {
                    t.gene_ids.push(format!("{ns_lower}:{id}"));
                }
            }
        }
        rest = &rest[open + close + 1..];
    }
    t
}

fn pathway_id(line: &str) -> Option<String> {
    let token = line.split_whitespace().next()?;
    let id = token.split('(').next().unwrap_or(token);
    (!id.is_empty()).then(|| id.to_string())
}

/// Parses the first record of a KEGG flat file; text after `///` is ignored.
pub fn parse_flat_record(text: &str) -> Result<KeggFlatRecord, PathwayError> {
    if text.trim().is_empty() {
        return Err(PathwayError::MalformedRecord("empty record".into()));
    }
    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for line in text.lines() {
        if line.starts_with("///") {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let split = line
            .char_indices()
            .nth(KEY_WIDTH)
            .map(|(i, _)| i)
            .unwrap_or(line.len());
        let (head, value) = line.split_at(split);
        let key = head.trim();
        let value = value.trim();
        let is_key = !key.is_empty()
            && key.chars().all(|c| c.is_ascii_uppercase() || c == '_');
        if is_key {
            fields.push((key.to_string(), vec![value.to_string()]));
        } else if let Some((_, lines)) = fields.last_mut() {
            lines.push(line.trim().to_string());
        }
    }

    let mut rec = KeggFlatRecord::default();
    let mut saw_name = false;
    for (key, lines) in fields {
        let lines: Vec<String> = lines.into_iter().filter(|l| !l.is_empty()).collect();
        match key.as_str() {
            "ENTRY" => {
                rec.accession = lines
                    .first()
                    .and_then(|l| l.split_whitespace().next())
                    .unwrap_or_default()
                    .to_string();
            }
            "NAME" => {
                saw_name = true;
                let names: Vec<String> = lines
                    .iter()
                    .flat_map(|l| l.split(';'))
                    .map(clean_name)
                    .filter(|n| !n.is_empty())
                    .collect();
                rec.name = names.first().cloned().unwrap_or_default();
                rec.synonyms = names.into_iter().skip(1).collect();
            }
            "COMMENT" => rec.comment = lines.join(" "),
            "EFFICACY" => rec.efficacy = lines.join(" "),
            "DISEASE" => rec
                .diseases
                .extend(lines.iter().map(|l| strip_brackets(l)).filter(|d| !d.is_empty())),
            "CLASS" => rec.classes.extend(lines.iter().map(|l| strip_brackets(l))),
            "TARGET" => rec.targets.extend(lines.iter().map(|l| parse_target(l))),
            "PATHWAY" => {
                for id in lines.iter().filter_map(|l| pathway_id(l)) {
                    if !rec.pathways.contains(&id) {
                        rec.pathways.push(id);
                    }
                }
            }
            _ => {
                let entry = rec.residual.entry(key).or_default();
                if !entry.is_empty() {
                    entry.push('\n');
                }
                entry.push_str(&lines.join("\n"));
            }
        }
    }
    if !saw_name || rec.name.is_empty() {
        return Err(PathwayError::MalformedRecord("NAME field missing".into()));
    }
    if rec.accession.is_empty() {
        return Err(PathwayError::MalformedRecord("ENTRY field missing".into()));
    }
    Ok(rec)
}

/// Splits a multi-record flat file on `///` and parses each record.
pub fn parse_flat_records(text: &str) -> Result<Vec<KeggFlatRecord>, PathwayError> {
    text.split("\n///")
        .filter(|chunk| !chunk.trim().trim_start_matches("///").trim().is_empty())
        .map(parse_flat_record)
        .collect()
}
