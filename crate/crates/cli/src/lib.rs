//! Command-line surface: analyze, recommend, trace, serve.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use tower_http::services::ServeDir;

use noteflow_core::bundle::{analyze, to_canonical_json, Bundle};
use noteflow_core::chart::ChartSpec;
use noteflow_core::config::Settings;
use noteflow_core::graph::NodeId;
use noteflow_core::recommend::{filter_candidates, rank, operated_columns, CandidateFilter, Recommendation};
use noteflow_core::snapshot::{load_manifest, SnapshotStore};
use noteflow_core::trace::TraceResult;

/// Bad input: exit code 2.
#[derive(Debug)]
pub struct InputError(pub anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(InputError(e.into()))
}

/// 2 for input errors, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<InputError>().is_some() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "noteflow", version, about = "Dataflow, chart recommendation and chart tracing for notebooks")]
pub struct Cli {
    /// Config file (default: $NOTEFLOW_CONFIG, then ./noteflow.toml).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a bundle from a notebook and its snapshots.
    Analyze(AnalyzeArgs),
    /// Print the ranked charts of a node or a cell.
    Recommend(RecommendArgs),
    /// Pin a chart and trace it across the flow.
    Trace(TraceArgs),
    /// Serve a bundle and UI assets on loopback.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub notebook: PathBuf,
    /// Execution log; cells are ordered by execution counter without it.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub snapshots: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Inline rendered chart data.
    #[arg(long)]
    pub embed_data: bool,
    /// Keep every candidate instead of the top ones per node.
    #[arg(long)]
    pub full_candidates: bool,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, required_unless_present = "cell", conflicts_with = "cell")]
    pub node: Option<String>,
    /// Execution counter of a cell; its tables are ranked together.
    #[arg(long)]
    pub cell: Option<u32>,
    #[arg(long)]
    pub top: Option<usize>,
    /// Keep charts encoding any of these columns.
    #[arg(long = "column")]
    pub columns: Vec<String>,
    /// Keep charts tagged with any of these (e.g. transformation/fill, fact).
    #[arg(long = "reason")]
    pub reasons: Vec<String>,
    /// Restrict to one table variable of the cell.
    #[arg(long)]
    pub table: Option<String>,
    /// Show every table of the cell, not only the latest.
    #[arg(long)]
    pub all_tables: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub node: String,
    /// Rank position of the chart to pin.
    #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
    pub chart: Option<usize>,
    /// Chart spec as JSON.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Snapshot directory, when it moved since analysis.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub ui: Option<PathBuf>,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
}

fn settings(config: Option<&Path>) -> anyhow::Result<Settings> {
    match config {
        Some(p) => Settings::load(p).map_err(input),
        None => Settings::discover().map_err(input),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a, cli.config.as_deref()),
        Command::Recommend(a) => cmd_recommend(&a),
        Command::Trace(a) => cmd_trace(&a),
        Command::Serve(a) => cmd_serve(&a),
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs, config: Option<&Path>) -> anyhow::Result<()> {
    let mut s = settings(config)?;
    s.embed_data |= args.embed_data;
    s.full_candidates |= args.full_candidates;
    if !args.snapshots.is_dir() {
        return Err(input(anyhow!("snapshot directory {} does not exist", args.snapshots.display())));
    }
    let (bundle, _) = analyze(&args.notebook, args.trace.as_deref(), &args.snapshots, &s).map_err(input)?;
    std::fs::write(&args.out, bundle.to_json()).with_context(|| format!("writing {}", args.out.display()))?;
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} nodes, {} edges, {} layout columns -> {}",
        bundle.graph.nodes.len(),
        bundle.graph.edges.len(),
        bundle.graph.layout.columns.len(),
        args.out.display()
    );
    Ok(())
}

fn load_bundle(path: &Path) -> anyhow::Result<Bundle> {
    Bundle::load(path).map_err(input)
}

fn parse_node(bundle: &Bundle, raw: &str) -> anyhow::Result<NodeId> {
    let id: NodeId = raw.parse().map_err(input)?;
    if !bundle.graph.contains(&id) {
        return Err(input(anyhow!("unknown node {raw}")));
    }
    Ok(id)
}

/// Ranked recommendations for a node, or for every table of a cell.
pub fn query(bundle: &Bundle, args: &RecommendArgs) -> anyhow::Result<Vec<Recommendation>> {
    let columns = (!args.columns.is_empty()).then(|| args.columns.iter().cloned().collect::<BTreeSet<_>>());
    let reasons = (!args.reasons.is_empty()).then(|| args.reasons.iter().cloned().collect::<BTreeSet<_>>());
    let mut out = if let Some(raw) = &args.node {
        let id = parse_node(bundle, raw)?;
        let recs = bundle.recommendations(&id).unwrap_or_default().to_vec();
        let f = CandidateFilter { columns, reasons, all_tables: true, ..Default::default() };
        filter_candidates(&recs, &f)
    } else {
        let cell = args.cell.expect("clap requires node or cell");
        let nodes: Vec<&NodeId> = bundle.nodes.keys().filter(|n| n.cell_exec == cell).collect();
        if nodes.is_empty() {
            return Err(input(anyhow!("no analyzed tables in cell {cell}")));
        }
        let all: Vec<Recommendation> =
            nodes.iter().flat_map(|n| bundle.recommendations(n).unwrap_or_default().iter().cloned()).collect();
        let operated: BTreeMap<NodeId, BTreeSet<String>> =
            nodes.iter().map(|n| ((*n).clone(), operated_columns(&bundle.graph, n))).collect();
        let ranked = rank(all, &operated);
        let f = CandidateFilter { table: args.table.clone(), columns, reasons, all_tables: args.all_tables };
        filter_candidates(&ranked, &f)
    };
    if let Some(k) = args.top {
        out.truncate(k);
    }
    Ok(out)
}

pub fn cmd_recommend(args: &RecommendArgs) -> anyhow::Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let recs = query(&bundle, args)?;
    if args.json {
        println!("{}", to_canonical_json(&recs));
        return Ok(());
    }
    for (i, r) in recs.iter().enumerate() {
        let tags: Vec<String> = r
            .tags
            .iter()
            .map(|t| match (&t.transform, t.fact_kind) {
                (Some(op), _) => format!("transformation/{op}"),
                (None, Some(k)) => format!("fact/{}", k.as_str()),
                _ => "?".into(),
            })
            .collect();
        println!("{i:>3}  {:<22} {}  [{}]", r.node.to_string(), r.chart, tags.join(", "));
    }
    Ok(())
}

fn open_store(bundle: &Bundle, bundle_path: &Path, dir: Option<&Path>) -> anyhow::Result<SnapshotStore> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| bundle.snapshot_dir(Some(bundle_path)));
    load_manifest(&dir).map_err(input)
}

/// Resolves a pin request to a chart spec.
pub fn pinned_spec(bundle: &Bundle, node: &NodeId, chart: Option<usize>, spec: Option<&str>) -> anyhow::Result<ChartSpec> {
    match (chart, spec) {
        (_, Some(json)) => serde_json::from_str(json).map_err(|e| input(anyhow!("invalid chart spec: {e}"))),
        (Some(i), None) => {
            let recs = bundle.recommendations(node).unwrap_or_default();
            recs.get(i)
                .map(|r| r.chart.clone())
                .ok_or_else(|| input(anyhow!("chart index {i} out of range ({} charts for {node})", recs.len())))
        }
        (None, None) => Err(input(anyhow!("either a chart index or a spec is required"))),
    }
}

pub fn trace_request(
    bundle: &Bundle,
    store: &SnapshotStore,
    node: &str,
    chart: Option<usize>,
    spec: Option<&str>,
) -> anyhow::Result<TraceResult> {
    let id = parse_node(bundle, node)?;
    let spec = pinned_spec(bundle, &id, chart, spec)?;
    bundle.trace(store, &id, &spec).map_err(input)
}

pub fn cmd_trace(args: &TraceArgs) -> anyhow::Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let store = open_store(&bundle, &args.bundle, args.snapshots.as_deref())?;
    let result = trace_request(&bundle, &store, &args.node, args.chart, args.spec.as_deref())?;
    std::fs::write(&args.out, to_canonical_json(&result)).with_context(|| format!("writing {}", args.out.display()))?;
    let untraceable = result.per_node.values().filter(|e| !e.is_traceable()).count();
    eprintln!("{} nodes traced, {untraceable} untraceable -> {}", result.per_node.len(), args.out.display());
    Ok(())
}

/// Immutable state shared by request handlers.
pub struct ServeState {
    pub bundle: Bundle,
    pub bytes: String,
    pub store: SnapshotStore,
}

#[derive(Debug, Deserialize)]
struct TraceQuery {
    node: Option<String>,
    chart: Option<String>,
    spec: Option<String>,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn json_error(status: StatusCode, msg: &str) -> Response {
    json_response(status, serde_json::json!({ "error": msg }).to_string())
}

async fn get_bundle(State(state): State<Arc<ServeState>>) -> Response {
    json_response(StatusCode::OK, state.bytes.clone())
}

async fn get_trace(State(state): State<Arc<ServeState>>, Query(q): Query<TraceQuery>) -> Response {
    let Some(node) = q.node.as_deref() else {
        return json_error(StatusCode::BAD_REQUEST, "missing node parameter");
    };
    let chart = match q.chart.as_deref().map(str::parse::<usize>) {
        Some(Ok(i)) => Some(i),
        Some(Err(_)) => return json_error(StatusCode::BAD_REQUEST, "chart must be a non-negative integer"),
        None => None,
    };
    if chart.is_none() && q.spec.is_none() {
        return json_error(StatusCode::BAD_REQUEST, "missing chart or spec parameter");
    }
    match trace_request(&state.bundle, &state.store, node, chart, q.spec.as_deref()) {
        Ok(r) => json_response(StatusCode::OK, to_canonical_json(&r)),
        Err(e) if exit_code(&e) == 2 => json_error(StatusCode::BAD_REQUEST, &format!("{e:#}")),
        Err(e) => json_error(StatusCode::INTERNAL_SERVER_ERROR, &format!("{e:#}")),
    }
}

pub fn router(state: Arc<ServeState>, ui: Option<&Path>) -> Router {
    let app = Router::new().route("/bundle.json", get(get_bundle)).route("/trace", get(get_trace));
    let app = match ui {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.with_state(state)
}

pub fn load_state(bundle_path: &Path, snapshots: Option<&Path>) -> anyhow::Result<ServeState> {
    let bundle = load_bundle(bundle_path)?;
    let store = open_store(&bundle, bundle_path, snapshots)?;
    Ok(ServeState { bytes: bundle.to_json(), bundle, store })
}

pub fn cmd_serve(args: &ServeArgs) -> anyhow::Result<()> {
    let state = Arc::new(load_state(&args.bundle, args.snapshots.as_deref())?);
    if let Some(ui) = &args.ui {
        if !ui.is_dir() {
            return Err(input(anyhow!("UI directory {} does not exist", ui.display())));
        }
    }
    let app = router(state, args.ui.as_deref());
    let addr = SocketAddr::from(([127, 0, 0, 1], args.port));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("serving on http://{addr}");
        axum::serve(listener, app).await?;
        anyhow::Ok(())
    })
}
