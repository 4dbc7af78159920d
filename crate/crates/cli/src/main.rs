use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use kgresearch_core::agents::{run_research, DecisionOracle, DefaultOracle, HttpOracle, ResearchConfig};
use kgresearch_core::bench::{self, Benchmark};
use kgresearch_core::curate::ebm::{self, DEFAULT_K};
use kgresearch_core::curate::flux::build_flux_item;
use kgresearch_core::curate::mcq::{write_items, McqItem};
use kgresearch_core::curate::regimen::{curate_corpus, RegimenCorpus};
use kgresearch_core::curate::sample_size::{gen_sample_size_item, TrialContext};
use kgresearch_core::curate::surrogate::curate_drugs;
use kgresearch_core::curate::target::{build_target_item, DiseaseCategory, LogicProfile, TargetItemConfig};
use kgresearch_core::curate::CurateError;
use kgresearch_core::evidence_graph::EvidenceGraphStore;
use kgresearch_core::federation::{
    EntityKind, FederationClient, QuerySpec, RateLimiter, SourceRegistry, SystemClock, UreqTransport,
};
use kgresearch_core::pathway::{parse_flat_records, parse_kgml, GraphSnapshot, ReactionGraph, SignedPathwayGraph};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "kgresearch", version, about = "Deep research over biomedical knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or export an evidence graph.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Parse pathway files.
    #[command(subcommand)]
    Pathway(PathwayCmd),
    /// Unified entity search across knowledge sources.
    Fetch {
        #[arg(long, default_value = "gene")]
        kind: String,
        #[arg(long)]
        query: String,
        /// Comma-separated source ids; empty means every source serving the kind.
        #[arg(long, value_delimiter = ',')]
        sources: Vec<String>,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate benchmark items.
    #[command(subcommand)]
    Curate(CurateCmd),
    /// Score predictions.
    #[command(subcommand)]
    Score(ScoreCmd),
    /// Run the research orchestrator.
    #[command(subcommand)]
    Research(ResearchCmd),
    /// Prepare and score open benchmarks.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Write the canonical JSON document of a stored graph.
    Export {
        /// Graph document or research workspace directory.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print entity and relation counts.
    Stats {
        #[arg(long)]
        graph: PathBuf,
    },
}

#[derive(Subcommand)]
enum PathwayCmd {
    Parse {
        #[arg(long)]
        kgml: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CurateCmd {
    TargetId {
        #[arg(long)]
        kgml_dir: PathBuf,
        #[arg(long, default_value = "other")]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        options: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Flux {
        #[arg(long)]
        kgml_dir: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value = "a tracer labeling study")]
        context: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    SampleSize {
        /// JSONL of {"truth": N, "context": {...}} or one integer per line.
        #[arg(long)]
        truths: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Regimen {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Surrogate {
        /// KEGG DRUG flat records.
        #[arg(long)]
        drugs: PathBuf,
        #[arg(long)]
        kgml_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Ebm {
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ScoreCmd {
    Ebm {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum ResearchCmd {
    Run {
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 5)]
        bfrs_budget: usize,
        #[arg(long, default_value_t = 5)]
        dfrs_budget: usize,
        /// `default` or the URL of a chat-completion endpoint.
        #[arg(long, default_value = "default")]
        oracle: String,
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long, value_delimiter = ',')]
        kbs: Vec<String>,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    Prepare {
        #[arg(long)]
        benchmark: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Score {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Graph(cmd) => graph(cmd),
        Command::Pathway(PathwayCmd::Parse { kgml, out }) => {
            let (g, rg) = parse_kgml(&read(&kgml)?).with_context(|| kgml.display().to_string())?;
            write_text(&out, serde_json::to_string_pretty(&GraphSnapshot::new(&g, &rg))?)?;
            println!("{}: {} nodes, {} edges, {} reactions", g.pathway_id, g.nodes().len(), g.edges().len(), rg.reactions().len());
            Ok(())
        }
        Command::Fetch { kind, query, sources, limit, out } => fetch(&kind, &query, &sources, limit, &out),
        Command::Curate(cmd) => curate(cmd),
        Command::Score(ScoreCmd::Ebm { tasks, predictions, k }) => {
            let tasks = ebm::read_tasks(&tasks)?;
            let preds = ebm::read_predictions(&predictions)?;
            let scores = ebm::score_tasks(&tasks, &preds, k)?;
            for (t, s) in tasks.iter().zip(&scores) {
                println!("{}", json!({"base_doi": t.base_doi, "score": s}));
            }
            println!("{}", serde_json::to_string(&ebm::summarize(&scores))?);
            Ok(())
        }
        Command::Research(ResearchCmd::Run { query, bfrs_budget, dfrs_budget, oracle, workspace, kbs }) => {
            research(&query, bfrs_budget, dfrs_budget, &oracle, workspace, &kbs)
        }
        Command::Bench(cmd) => bench_cmd(cmd),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: String) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn graph(cmd: GraphCmd) -> Result<()> {
    let load = |p: &Path| -> Result<EvidenceGraphStore> {
        let file = if p.is_dir() { p.join("graph.json") } else { p.to_path_buf() };
        Ok(EvidenceGraphStore::import_graph(&file)?)
    };
    match cmd {
        GraphCmd::Export { graph, out } => {
            let doc = load(&graph)?.export_graph(&out)?;
            println!("{} entities, {} relations -> {}", doc.entities.len(), doc.relations.len(), out.display());
        }
        GraphCmd::Stats { graph } => println!("{}", serde_json::to_string_pretty(&load(&graph)?.stats())?),
    }
    Ok(())
}

fn client() -> FederationClient {
    FederationClient::new(
        SourceRegistry::from_env(),
        Arc::new(UreqTransport::new()),
        Arc::new(RateLimiter::new(Arc::new(SystemClock::new()))),
    )
}

fn fetch(kind: &str, query: &str, sources: &[String], limit: usize, out: &Path) -> Result<()> {
    let kind: EntityKind = kind.parse()?;
    let ids: Vec<&str> = sources.iter().map(String::as_str).collect();
    let spec = QuerySpec::new(kind, query).with_sources(&ids).with_limit(limit).with_save(out);
    let result = client().search_entities_unified(&spec)?;
    println!("{}", result.summary);
    for p in &result.manifest {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn kgml_files(dir: &Path) -> Result<Vec<(PathBuf, SignedPathwayGraph, ReactionGraph)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "xml" || e == "kgml"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let (g, rg) = parse_kgml(&read(&p)?).with_context(|| p.display().to_string())?;
        out.push((p, g, rg));
    }
    if out.is_empty() {
        bail!("no KGML files in {}", dir.display());
    }
    Ok(out)
}

fn finish(out: &Path, items: &[McqItem], skipped: &[(String, CurateError)]) -> Result<()> {
    write_items(out, items)?;
    for (id, e) in skipped {
        eprintln!("skipped {id}: {e}");
    }
    println!("{} items -> {} ({} skipped)", items.len(), out.display(), skipped.len());
    Ok(())
}

fn curate(cmd: CurateCmd) -> Result<()> {
    match cmd {
        CurateCmd::TargetId { kgml_dir, profile, seed, options, out } => {
            let category: DiseaseCategory = profile.parse()?;
            let profile = LogicProfile::for_category(category);
            let (mut items, mut skipped) = (Vec::new(), Vec::new());
            for (i, (path, g, _)) in kgml_files(&kgml_dir)?.iter().enumerate() {
                let config = TargetItemConfig { option_count: options, seed: seed.wrapping_add(i as u64), disease: None };
                match build_target_item(g, &profile, &config) {
                    Ok(item) => items.push(item),
                    Err(e) => skipped.push((path.display().to_string(), e)),
                }
            }
            finish(&out, &items, &skipped)
        }
        CurateCmd::Flux { kgml_dir, target, context, seed, out } => {
            let (mut items, mut skipped) = (Vec::new(), Vec::new());
            for (path, _, rg) in kgml_files(&kgml_dir)? {
                if rg.reactions_of(&target).is_empty() {
                    continue;
                }
                match build_flux_item(&rg, &target, &context, seed) {
                    Ok(item) => items.push(item),
                    Err(e) => skipped.push((path.display().to_string(), e)),
                }
            }
            if items.is_empty() && skipped.is_empty() {
                bail!("{target} catalyzes no reaction in {}", kgml_dir.display());
            }
            finish(&out, &items, &skipped)
        }
        CurateCmd::SampleSize { truths, seed, out } => {
            let (mut items, mut skipped) = (Vec::new(), Vec::new());
            for (i, line) in read(&truths)?.lines().filter(|l| !l.trim().is_empty()).enumerate() {
                let v: Value = serde_json::from_str(line).with_context(|| format!("line {}", i + 1))?;
                let (truth, ctx) = match &v {
                    Value::Number(n) => (n.as_i64(), TrialContext::default()),
                    _ => (v["truth"].as_i64(), serde_json::from_value(v["context"].clone()).unwrap_or_default()),
                };
                let truth = truth.with_context(|| format!("line {}: no integer truth", i + 1))?;
                match gen_sample_size_item(truth, &ctx, seed.wrapping_add(i as u64)) {
                    Ok(item) => items.push(item),
                    Err(e) => skipped.push((format!("line {}", i + 1), e)),
                }
            }
            finish(&out, &items, &skipped)
        }
        CurateCmd::Regimen { corpus, seed, out } => {
            let corpus = RegimenCorpus::from_json(&read(&corpus)?)?;
            let (items, skipped) = curate_corpus(&corpus, seed);
            finish(&out, &items, &skipped)
        }
        CurateCmd::Surrogate { drugs, kgml_dir, seed, out } => {
            let records = parse_flat_records(&read(&drugs)?)?;
            let graphs: Vec<SignedPathwayGraph> = kgml_files(&kgml_dir)?.into_iter().map(|(_, g, _)| g).collect();
            let merged = SignedPathwayGraph::merge_all(&graphs);
            let (items, skipped) = curate_drugs(&records, &merged, seed);
            finish(&out, &items, &skipped)
        }
        CurateCmd::Ebm { reviews, out } => {
            let (versions, warnings) = ebm::load_reviews(&reviews)?;
            let pairing = ebm::pair_versions(&versions);
            ebm::write_tasks(&out, &pairing.tasks)?;
            println!(
                "{} tasks -> {} ({} unpaired, {} with empty truth, {} parse warnings)",
                pairing.tasks.len(),
                out.display(),
                pairing.unpaired.len(),
                pairing.dropped_empty,
                warnings
            );
            Ok(())
        }
    }
}

fn research(query: &str, bfrs: usize, dfrs: usize, oracle: &str, workspace: PathBuf, kbs: &[String]) -> Result<()> {
    let mut config = ResearchConfig::new(query, workspace).with_budgets(bfrs, dfrs);
    if !kbs.is_empty() {
        config.kbs = kbs.to_vec();
    }
    let oracle: Box<dyn DecisionOracle> = match oracle {
        "default" => Box::new(DefaultOracle),
        url if url.starts_with("http://") || url.starts_with("https://") => {
            Box::new(HttpOracle::new(url, Arc::new(UreqTransport::new())))
        }
        other => bail!("unknown oracle {other:?}: use `default` or an http(s) URL"),
    };
    let outcome = run_research(&config, &client(), oracle.as_ref())?;
    println!("{}", outcome.answer.as_deref().unwrap_or("(no answer)"));
    eprintln!(
        "{} steps, {} calls, graph {} entities / {} relations, workspace {}",
        outcome.steps.len(),
        outcome.calls.len(),
        outcome.graph.entities,
        outcome.graph.relations,
        config.workspace.display()
    );
    Ok(())
}

fn bench_cmd(cmd: BenchCmd) -> Result<()> {
    match cmd {
        BenchCmd::Prepare { benchmark, input, out, seed } => {
            let benchmark: Benchmark = benchmark.parse()?;
            let records = bench::load_records(&input)?;
            let items = bench::prepare_dataset(&records, benchmark, seed)?;
            bench::write_items(&out, &items)?;
            println!("{benchmark}: {} of {} records -> {}", items.len(), records.len(), out.display());
        }
        BenchCmd::Score { items, predictions, report } => {
            let items = bench::read_items(&items)?;
            let suite = bench::run_suite(&items, &predictions)?;
            let (rows, md) = suite.write(&report)?;
            for f in &suite.families {
                println!("{}", serde_json::to_string(f)?);
            }
            println!("wrote {} and {}", rows.display(), md.display());
        }
    }
    Ok(())
}
