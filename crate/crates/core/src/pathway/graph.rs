use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::functional::FunctionalType;
use super::PathwayError;

/// Read-only adjacency view shared by the analytics routines.
pub trait Topology {
    fn node_count(&self) -> usize;
    fn successors(&self, node: usize) -> &[usize];
    fn predecessors(&self, node: usize) -> &[usize];
    fn label(&self, node: usize) -> &str;
    fn index_of(&self, label: &str) -> Option<usize>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Gene,
    Compound,
    Map,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayNode {
    pub symbol: String,
    pub kind: NodeKind,
    /// KEGG gene identifiers (`hsa:7124`).
    pub kegg_ids: Vec<String>,
    pub ec_numbers: Vec<String>,
    /// Raw graphics label from the KGML entry.
    pub graphics_name: String,
    pub entry_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional_type: Option<FunctionalType>,
}

impl PathwayNode {
    pub fn gene(symbol: impl Into<String>) -> Self {
        let symbol = symbol.into();
        Self {
            graphics_name: symbol.clone(),
            symbol,
            kind: NodeKind::Gene,
            kegg_ids: Vec::new(),
            ec_numbers: Vec::new(),
            entry_type: "gene".into(),
            functional_type: None,
        }
    }

    pub fn with_kind(mut self, kind: NodeKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_ec(mut self, ec: impl Into<String>) -> Self {
        self.ec_numbers.push(ec.into());
        self
    }

    pub fn with_functional_type(mut self, t: FunctionalType) -> Self {
        self.functional_type = Some(t);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedEdge {
    pub from: usize,
    pub to: usize,
    /// Always +1 or -1.
    pub weight: i8,
    pub subtype: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRelation {
    pub entry1: String,
    pub entry2: String,
    pub reason: String,
}

/// Directed gene/protein graph with ±1 edge signs and disease endpoints.
#[derive(Debug, Clone, Default)]
pub struct SignedPathwayGraph {
    pub pathway_id: String,
    pub title: String,
    nodes: Vec<PathwayNode>,
    index: HashMap<String, usize>,
    edges: Vec<SignedEdge>,
    edge_index: HashMap<(usize, usize), usize>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    endpoints: BTreeSet<usize>,
    pub skipped: Vec<SkippedRelation>,
}

impl SignedPathwayGraph {
    pub fn new(pathway_id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            pathway_id: pathway_id.into(),
            title: title.into(),
            ..Default::default()
        }
    }

    /// Adds a node, or merges identifiers into the node with the same symbol.
    pub fn add_node(&mut self, node: PathwayNode) -> usize {
        if let Some(&i) = self.index.get(&node.symbol) {
            let existing = &mut self.nodes[i];
            for id in node.kegg_ids {
                if !existing.kegg_ids.contains(&id) {
                    existing.kegg_ids.push(id);
                }
            }
            for ec in node.ec_numbers {
                if !existing.ec_numbers.contains(&ec) {
                    existing.ec_numbers.push(ec);
                }
            }
            if existing.functional_type.is_none() {
                existing.functional_type = node.functional_type;
            }
            return i;
        }
        let i = self.nodes.len();
        self.index.insert(node.symbol.clone(), i);
        self.nodes.push(node);
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        i
    }

    pub fn add_gene(&mut self, symbol: &str) -> usize {
        self.add_node(PathwayNode::gene(symbol))
    }

    /// Adds a signed edge. Returns false when the pair already has an edge
    /// (the first one is kept) or the weight is not ±1.
    pub fn add_edge(&mut self, from: usize, to: usize, weight: i8, subtype: &str) -> bool {
        if weight != 1 && weight != -1 || from == to {
            return false;
        }
        if self.edge_index.contains_key(&(from, to)) {
            return false;
        }
        self.edge_index.insert((from, to), self.edges.len());
        self.edges.push(SignedEdge {
            from,
            to,
            weight,
            subtype: subtype.to_string(),
        });
        self.out[from].push(to);
        self.inc[to].push(from);
        true
    }

    pub fn add_edge_by_symbol(&mut self, from: &str, to: &str, weight: i8) -> bool {
        let a = self.add_gene(from);
        let b = self.add_gene(to);
        let subtype = if weight > 0 { "activation" } else { "inhibition" };
        self.add_edge(a, b, weight, subtype)
    }

    pub fn nodes(&self) -> &[PathwayNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &PathwayNode {
        &self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut PathwayNode {
        &mut self.nodes[i]
    }

    pub fn edges(&self) -> &[SignedEdge] {
        &self.edges
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<i8> {
        self.edge_index.get(&(from, to)).map(|&e| self.edges[e].weight)
    }

    pub fn require(&self, symbol: &str) -> Result<usize, PathwayError> {
        self.index
            .get(symbol)
            .copied()
            .ok_or_else(|| PathwayError::NodeNotFound(symbol.to_string()))
    }

    pub fn find_by_kegg_id(&self, id: &str) -> Option<usize> {
        let id = id.to_ascii_lowercase();
        self.nodes
            .iter()
            .position(|n| n.kegg_ids.iter().any(|k| k.to_ascii_lowercase() == id))
    }

    pub fn endpoints(&self) -> &BTreeSet<usize> {
        &self.endpoints
    }

    pub fn set_endpoint(&mut self, node: usize) {
        assert!(node < self.nodes.len(), "endpoint must be a node");
        self.endpoints.insert(node);
    }

    pub fn set_endpoints_by_symbol(&mut self, symbols: &[&str]) -> Result<(), PathwayError> {
        for s in symbols {
            let i = self.require(s)?;
            self.endpoints.insert(i);
        }
        Ok(())
    }

    pub fn clear_endpoints(&mut self) {
        self.endpoints.clear();
    }

    /// Marks as endpoints all nodes whose symbol or graphics label contains a
    /// lexicon term (case-insensitive). Returns how many were marked.
    pub fn detect_endpoints(&mut self, lexicon: &[String]) -> usize {
        let terms: Vec<String> = lexicon.iter().map(|t| t.to_lowercase()).collect();
        let mut marked = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind == NodeKind::Compound {
                continue;
            }
            let hay = format!("{} {}", n.symbol, n.graphics_name).to_lowercase();
            if terms.iter().any(|t| hay.contains(t.as_str())) && self.endpoints.insert(i) {
                marked += 1;
            }
        }
        marked
    }

    /// Same graph with every edge sign flipped.
    pub fn negated(&self) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.weight = -e.weight;
        }
        g
    }

    /// Union of several graphs; nodes are identified by symbol, first edge wins.
    pub fn merge_all<'a>(graphs: impl IntoIterator<Item = &'a SignedPathwayGraph>) -> Self {
        let mut merged = SignedPathwayGraph::new("merged", "merged pathways");
        for g in graphs {
            let map: Vec<usize> = g.nodes.iter().map(|n| merged.add_node(n.clone())).collect();
            for e in &g.edges {
                merged.add_edge(map[e.from], map[e.to], e.weight, &e.subtype);
            }
            for &ep in &g.endpoints {
                merged.endpoints.insert(map[ep]);
            }
        }
        merged
    }

    /// Gene/protein nodes that are not endpoints.
    pub fn candidate_genes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|i| self.nodes[*i].kind == NodeKind::Gene && !self.endpoints.contains(i))
            .collect()
    }
}

impl Topology for SignedPathwayGraph {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }
    fn successors(&self, node: usize) -> &[usize] {
        &self.out[node]
    }
    fn predecessors(&self, node: usize) -> &[usize] {
        &self.inc[node]
    }
    fn label(&self, node: usize) -> &str {
        &self.nodes[node].symbol
    }
    fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compound {
    /// KEGG compound id (`cpd:C00022`) or a free label.
    pub id: String,
    /// Human-readable name when known.
    pub name: Option<String>,
}

impl Compound {
    pub fn display(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub id: String,
    pub name: String,
    pub reversible: bool,
    pub substrates: Vec<usize>,
    pub products: Vec<usize>,
}

/// Directed substrate → product compound graph with enzyme annotations.
#[derive(Debug, Clone, Default)]
pub struct ReactionGraph {
    compounds: Vec<Compound>,
    index: HashMap<String, usize>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    reactions: Vec<Reaction>,
    /// Gene symbol → reactions it catalyzes.
    enzymes: BTreeMap<String, Vec<usize>>,
}

impl ReactionGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_compound(&mut self, id: &str, name: Option<&str>) -> usize {
        if let Some(&i) = self.index.get(id) {
            if self.compounds[i].name.is_none() {
                self.compounds[i].name = name.map(str::to_string);
            }
            return i;
        }
        let i = self.compounds.len();
        self.index.insert(id.to_string(), i);
        self.compounds.push(Compound {
            id: id.to_string(),
            name: name.map(str::to_string),
        });
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        if from == to || self.out[from].contains(&to) {
            return;
        }
        self.out[from].push(to);
        self.inc[to].push(from);
    }

    pub fn add_edge_by_id(&mut self, from: &str, to: &str) {
        let a = self.add_compound(from, None);
        let b = self.add_compound(to, None);
        self.add_edge(a, b);
    }

    /// Registers a reaction and its substrate → product edges.
    pub fn add_reaction(
        &mut self,
        id: &str,
        name: &str,
        reversible: bool,
        substrates: &[&str],
        products: &[&str],
    ) -> usize {
        let s: Vec<usize> = substrates.iter().map(|c| self.add_compound(c, None)).collect();
        let p: Vec<usize> = products.iter().map(|c| self.add_compound(c, None)).collect();
        for &a in &s {
            for &b in &p {
                self.add_edge(a, b);
            }
        }
        self.reactions.push(Reaction {
            id: id.to_string(),
            name: name.to_string(),
            reversible,
            substrates: s,
            products: p,
        });
        self.reactions.len() - 1
    }

    pub fn annotate_enzyme(&mut self, symbol: &str, reaction: usize) {
        let list = self.enzymes.entry(symbol.to_string()).or_default();
        if !list.contains(&reaction) {
            list.push(reaction);
        }
    }

    pub fn compounds(&self) -> &[Compound] {
        &self.compounds
    }

    pub fn compound(&self, i: usize) -> &Compound {
        &self.compounds[i]
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn reactions_of(&self, symbol: &str) -> &[usize] {
        self.enzymes.get(symbol).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn enzyme_symbols(&self) -> impl Iterator<Item = &str> {
        self.enzymes.keys().map(String::as_str)
    }

    pub fn require(&self, id: &str) -> Result<usize, PathwayError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| PathwayError::NodeNotFound(id.to_string()))
    }

    /// Fills in display names from an id → name table (e.g. KEGG compound list).
    pub fn set_compound_names(&mut self, names: &HashMap<String, String>) {
        for c in &mut self.compounds {
            if c.name.is_some() {
                continue;
            }
            let bare = c.id.trim_start_matches("cpd:");
            if let Some(n) = names.get(&c.id).or_else(|| names.get(bare)) {
                c.name = Some(n.clone());
            }
        }
    }

    pub fn reversed(&self) -> Self {
        let mut g = self.clone();
        std::mem::swap(&mut g.out, &mut g.inc);
        g
    }
}

impl Topology for ReactionGraph {
    fn node_count(&self) -> usize {
        self.compounds.len()
    }
    fn successors(&self, node: usize) -> &[usize] {
        &self.out[node]
    }
    fn predecessors(&self, node: usize) -> &[usize] {
        &self.inc[node]
    }
    fn label(&self, node: usize) -> &str {
        &self.compounds[node].id
    }
    fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}
