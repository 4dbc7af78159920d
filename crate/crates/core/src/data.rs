//! Bundled, editable data tables.

pub const GENE_FAMILIES: &str = include_str!("../data/gene_families.json");
pub const ENDPOINT_LEXICON: &str = include_str!("../data/endpoint_lexicon.json");
pub const DRUGGABILITY_BLACKLIST: &str = include_str!("../data/druggability_blacklist.txt");
pub const FLUX_TEMPLATES: &str = include_str!("../data/flux_templates.json");
pub const REGIMEN_TEMPLATES: &str = include_str!("../data/regimen_templates.json");
pub const SURROGATE_LIBRARY: &str = include_str!("../data/surrogate_library.json");
pub const CONTEXT_KEYWORDS: &str = include_str!("../data/context_keywords.json");
pub const SOURCES: &str = include_str!("../data/sources.json");
pub const GRAPHQL_OPENTARGETS_SEARCH: &str = include_str!("../data/graphql/opentargets_search.graphql");
pub const GRAPHQL_OPENTARGETS_TARGET: &str = include_str!("../data/graphql/opentargets_target.graphql");

/// Bundled GraphQL query templates by name.
pub fn graphql_template(name: &str) -> Option<&'static str> {
    match name {
        "opentargets_search" => Some(GRAPHQL_OPENTARGETS_SEARCH),
        "opentargets_target" => Some(GRAPHQL_OPENTARGETS_TARGET),
        _ => None,
    }
}
