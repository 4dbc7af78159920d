use std::collections::HashMap;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use super::graph::{NodeKind, PathwayNode, ReactionGraph, SignedPathwayGraph, SkippedRelation};
use super::PathwayError;

/// Sign carried by a KGML relation subtype, if it has one.
pub fn relation_weight(subtype: &str) -> Option<i8> {
    match subtype.trim().to_ascii_lowercase().as_str() {
        "activation" | "expression" => Some(1),
        "inhibition" | "repression" => Some(-1),
        _ => None,
    }
}

struct Entry {
    kind: String,
    names: Vec<String>,
    graphics: String,
    components: Vec<String>,
    reactions: Vec<String>,
}

fn context(node: &Node) -> String {
    let pos = node.document().text_pos_at(node.range().start);
    let id = node.attribute("id").map(|i| format!(" id={i}")).unwrap_or_default();
    format!("line {} <{}{}>", pos.row, node.tag_name().name(), id)
}

fn malformed(node: &Node, message: impl Into<String>) -> PathwayError {
    PathwayError::MalformedKgml {
        context: context(node),
        message: message.into(),
    }
}

fn required<'a>(node: &Node<'a, '_>, attr: &str) -> Result<&'a str, PathwayError> {
    node.attribute(attr)
        .ok_or_else(|| malformed(node, format!("missing attribute `{attr}`")))
}

/// First alias of a graphics label such as "TNF, DIF, TNF-alpha...".
fn primary_symbol(graphics: &str) -> String {
    graphics
        .split(',')
        .next()
        .unwrap_or("")
        .trim()
        .trim_end_matches("...")
        .trim()
        .to_string()
}

fn node_for(entry: &Entry) -> Option<PathwayNode> {
    let kind = match entry.kind.as_str() {
        "gene" | "ortholog" | "enzyme" => NodeKind::Gene,
        "compound" => NodeKind::Compound,
        "map" => NodeKind::Map,
        "group" => return None,
        _ => NodeKind::Other,
    };
    let mut symbol = primary_symbol(&entry.graphics);
    if symbol.is_empty() {
        symbol = entry.names.first().cloned().unwrap_or_default();
    }
    if symbol.is_empty() {
        return None;
    }
    if kind == NodeKind::Map {
        symbol = symbol.trim_start_matches("TITLE:").to_string();
    }
    let mut node = PathwayNode::gene(symbol).with_kind(kind);
    node.graphics_name = entry.graphics.clone();
    node.entry_type = entry.kind.clone();
    for n in &entry.names {
        if let Some(ec) = n.strip_prefix("ec:") {
            node.ec_numbers.push(ec.to_string());
        } else if kind == NodeKind::Gene {
            node.kegg_ids.push(n.clone());
        }
    }
    Some(node)
}

/// Parses a KGML document into its signed interaction graph and its
/// substrate → product reaction graph.
pub fn parse_kgml(document: &str) -> Result<(SignedPathwayGraph, ReactionGraph), PathwayError> {
    let doc = Document::parse(document).map_err(|e| PathwayError::MalformedKgml {
        context: format!("line {} column {}", e.pos().row, e.pos().col),
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "pathway" {
        return Err(malformed(&root, "root element is not <pathway>"));
    }
    let mut signed = SignedPathwayGraph::new(
        root.attribute("name").unwrap_or_default(),
        root.attribute("title").unwrap_or_default(),
    );
    let mut rg = ReactionGraph::new();

    let mut entries: HashMap<String, Entry> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for el in root.children().filter(|n| n.has_tag_name("entry")) {
        let id = required(&el, "id")?.to_string();
        let names = required(&el, "name")?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let graphics = el
            .children()
            .find(|c| c.has_tag_name("graphics"))
            .and_then(|g| g.attribute("name"))
            .unwrap_or_default()
            .to_string();
        let components = el
            .children()
            .filter(|c| c.has_tag_name("component"))
            .map(|c| required(&c, "id").map(str::to_string))
            .collect::<Result<_, _>>()?;
        let reactions = el
            .attribute("reaction")
            .map(|r| r.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        order.push(id.clone());
        entries.insert(
            id,
            Entry {
                kind: required(&el, "type")?.to_string(),
                names,
                graphics,
                components,
                reactions,
            },
        );
    }

    let mut node_of: HashMap<&str, usize> = HashMap::new();
    for id in &order {
        let entry = &entries[id];
        if let Some(node) = node_for(entry) {
            let idx = signed.add_node(node);
            node_of.insert(id.as_str(), idx);
        }
        if entry.kind == "compound" {
            if let Some(cid) = entry.names.first() {
                let bare = cid.trim_start_matches("cpd:");
                let label = entry.graphics.trim();
                let name = (!label.is_empty() && label != bare && label != cid).then_some(label);
                rg.add_compound(cid, name);
            }
        }
    }

    let expand = |id: &str| -> Vec<usize> {
        match entries.get(id) {
            Some(e) if e.kind == "group" => e
                .components
                .iter()
                .filter_map(|c| node_of.get(c.as_str()).copied())
                .collect(),
            Some(_) => node_of.get(id).copied().into_iter().collect(),
            None => Vec::new(),
        }
    };

    for rel in root.children().filter(|n| n.has_tag_name("relation")) {
        let e1 = required(&rel, "entry1")?;
        let e2 = required(&rel, "entry2")?;
        let subtypes: Vec<&str> = rel
            .children()
            .filter(|c| c.has_tag_name("subtype"))
            .filter_map(|c| c.attribute("name"))
            .collect();
        let signed_subtypes: Vec<(&str, i8)> = subtypes
            .iter()
            .filter_map(|s| relation_weight(s).map(|w| (*s, w)))
            .collect();
        let skip = |reason: String| SkippedRelation {
            entry1: e1.to_string(),
            entry2: e2.to_string(),
            reason,
        };
        let Some(&(subtype, weight)) = signed_subtypes.first() else {
            signed.skipped.push(skip(format!("unmapped subtype [{}]", subtypes.join(", "))));
            continue;
        };
        if signed_subtypes.iter().any(|(_, w)| *w != weight) {
            signed.skipped.push(skip("conflicting signed subtypes".into()));
            continue;
        }
        let (from, to) = (expand(e1), expand(e2));
        if from.is_empty() || to.is_empty() {
            signed.skipped.push(skip("unknown entry".into()));
            continue;
        }
        for &a in &from {
            for &b in &to {
                signed.add_edge(a, b, weight, subtype);
            }
        }
    }

    for rx in root.children().filter(|n| n.has_tag_name("reaction")) {
        let id = required(&rx, "id")?;
        let name = rx.attribute("name").unwrap_or_default();
        let reversible = rx.attribute("type") == Some("reversible");
        let collect = |tag: &str| -> Result<Vec<String>, PathwayError> {
            rx.children()
                .filter(|c| c.has_tag_name(tag))
                .map(|c| required(&c, "name").map(str::to_string))
                .collect()
        };
        let substrates = collect("substrate")?;
        let products = collect("product")?;
        let s: Vec<&str> = substrates.iter().map(String::as_str).collect();
        let p: Vec<&str> = products.iter().map(String::as_str).collect();
        let ridx = rg.add_reaction(id, name, reversible, &s, &p);

        let mut enzymes: Vec<usize> = expand(id);
        let rnames: Vec<&str> = name.split_whitespace().collect();
        for eid in &order {
            let e = &entries[eid];
            if e.reactions.iter().any(|r| rnames.contains(&r.as_str())) {
                enzymes.extend(expand(eid));
            }
        }
        enzymes.sort_unstable();
        enzymes.dedup();
        for n in enzymes {
            let node = signed.node(n);
            if node.kind == NodeKind::Gene {
                let sym = node.symbol.clone();
                rg.annotate_enzyme(&sym, ridx);
            }
        }
    }

    signed.detect_endpoints(&super::default_endpoint_lexicon());
    Ok((signed, rg))
}

/// JSON-friendly view of a parsed pathway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub pathway_id: String,
    pub title: String,
    pub nodes: Vec<PathwayNode>,
    pub edges: Vec<SnapshotEdge>,
    pub endpoints: Vec<String>,
    pub compounds: Vec<super::graph::Compound>,
    pub reactions: Vec<SnapshotReaction>,
    pub skipped: Vec<SkippedRelation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEdge {
    pub from: String,
    pub to: String,
    pub weight: i8,
    pub subtype: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotReaction {
    pub id: String,
    pub name: String,
    pub reversible: bool,
    pub substrates: Vec<String>,
    pub products: Vec<String>,
    pub enzymes: Vec<String>,
}

impl GraphSnapshot {
    pub fn new(g: &SignedPathwayGraph, rg: &ReactionGraph) -> Self {
        let sym = |i: usize| g.node(i).symbol.clone();
        let cpd = |i: usize| rg.compound(i).id.clone();
        let reactions = rg
            .reactions()
            .iter()
            .enumerate()
            .map(|(i, r)| SnapshotReaction {
                id: r.id.clone(),
                name: r.name.clone(),
                reversible: r.reversible,
                substrates: r.substrates.iter().map(|&c| cpd(c)).collect(),
                products: r.products.iter().map(|&c| cpd(c)).collect(),
                enzymes: rg
                    .enzyme_symbols()
                    .filter(|s| rg.reactions_of(s).contains(&i))
                    .map(str::to_string)
                    .collect(),
            })
            .collect();
        Self {
            pathway_id: g.pathway_id.clone(),
            title: g.title.clone(),
            nodes: g.nodes().to_vec(),
            edges: g
                .edges()
                .iter()
                .map(|e| SnapshotEdge {
                    from: sym(e.from),
                    to: sym(e.to),
                    weight: e.weight,
                    subtype: e.subtype.clone(),
                })
                .collect(),
            endpoints: g.endpoints().iter().map(|&i| sym(i)).collect(),
            compounds: rg.compounds().to_vec(),
            reactions,
            skipped: g.skipped.clone(),
        }
    }
}
