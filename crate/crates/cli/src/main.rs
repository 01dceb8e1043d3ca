mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use hexflow_core::chfield::{curvatures, evolvable_with, is_critical, minimal_field, ChFieldError};
use hexflow_core::flow::{evolve, trajectory_csv, EventKind, FlowError, Termination, Trajectory};
use hexflow_core::network::{classify_junctions, parse_document, serialize, serialize_document, validate_admissible, DocMeta};
use hexflow_core::render::{svg_frame, SvgStyle, ViewBox};
use hexflow_core::scenarios::{catalog, find, Params};
use hexflow_core::shrinker::{
    classify_all, solve_config, verify_config, verify_vertex_case, InteriorConfig, ShrinkerError, VertexCase,
};
use hexflow_core::{fmt_sig, Network};

use config::RunConfig;

#[derive(Debug, Error)]
enum CliError {
    /// Bad arguments, unreadable or malformed input.
    #[error("{0}")]
    Input(String),
    /// Well-formed input for which the requested object does not exist.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "hexflow", version, about = "Crystalline curvature flow of hexagonal networks")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// JSON run configuration (tolerances, integrator settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Recorded in JSON output; every command is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Override a scenario parameter, e.g. --param eps=0.1.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check admissibility and classify junctions.
    Validate {
        input: String,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Minimal Cahn-Hoffman field and crystalline curvatures.
    Chfield {
        input: String,
        #[command(flatten)]
        params: ParamArgs,
        /// Shorthand for --param eps=VALUE.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Evolve one or more networks.
    Evolve {
        #[arg(required = true)]
        inputs: Vec<String>,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Write the trajectory as CSV (single input only).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write one SVG frame per sample.
        #[arg(long)]
        svg_dir: Option<PathBuf>,
        /// Evolve this many inputs in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Self-shrinker classification or a single configuration.
    Shrink {
        #[arg(long, conflicts_with = "verify", required_unless_present = "verify")]
        classify: bool,
        /// Half-line vertices such as A1,A2, or a vertex-centered case name.
        #[arg(long)]
        verify: Option<String>,
        /// Cross-check the prediction by evolving the network.
        #[arg(long)]
        flow: bool,
    },
    /// Draw a network as SVG.
    Render {
        input: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write every catalog scenario as a JSON fixture.
    Fixtures { dir: PathBuf },
    /// List catalog scenarios.
    List,
}

struct Ctx {
    format: Format,
    cfg: RunConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hexflow: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Input)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let ctx = Ctx { format: cli.format, cfg };
    match cli.cmd {
        Command::Validate { input, params } => cmd_validate(&ctx, &input, &parse_params(&params.params)?),
        Command::Chfield { input, params, eps } => {
            let mut p = parse_params(&params.params)?;
            if let Some(eps) = eps {
                p.insert("eps".into(), eps);
            }
            cmd_chfield(&ctx, &input, &p)
        }
        Command::Evolve { inputs, params, horizon, csv, svg_dir, jobs } => {
            cmd_evolve(&ctx, &inputs, &parse_params(&params.params)?, horizon, csv.as_deref(), svg_dir.as_deref(), jobs)
        }
        Command::Shrink { classify, verify, flow } => match verify {
            Some(label) => cmd_verify(&ctx, &label, flow),
            None if classify => Ok(cmd_classify(&ctx)),
            None => Err(CliError::Input("shrink needs --classify or --verify".into())),
        },
        Command::Render { input, params, output } => cmd_render(&input, &parse_params(&params.params)?, output.as_deref()),
        Command::Fixtures { dir } => cmd_fixtures(&dir),
        Command::List => Ok(cmd_list(&ctx)),
    }
}

fn parse_params(raw: &[String]) -> CliResult<Params> {
    let mut p = BTreeMap::new();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--param {item}: expected KEY=VALUE")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::Input(format!("--param {item}: not a number")))?;
        p.insert(k.trim().to_string(), v);
    }
    Ok(p)
}

fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

// ---------------------------------------------------------------------------
// Input resolution

fn fixtures_dir() -> PathBuf {
    match std::env::var_os("HEXFLOW_FIXTURES") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from("fixtures"),
    }
}

/// A network from a file, a fixture name or a catalog scenario, in that order.
/// Parameter overrides rebuild the scenario a document was generated from.
fn load_input(input: &str, params: &Params) -> CliResult<(Network, DocMeta)> {
    let dir = fixtures_dir();
    let candidates = [PathBuf::from(input), dir.join(input), dir.join(format!("{input}.json"))];
    if let Some(path) = candidates.iter().find(|p| p.is_file()) {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let (net, meta) = parse_document(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if params.is_empty() {
            return Ok((net, meta));
        }
        let Some(sref) = &meta.scenario else {
            return Err(CliError::Input(format!("{}: --param needs a scenario document", path.display())));
        };
        let mut merged = sref.params.clone();
        merged.extend(params.clone());
        return build_scenario(&sref.name, &merged);
    }
    match find(input) {
        Ok(_) => build_scenario(input, params),
        Err(_) => Err(CliError::Input(format!("{input}: no such file, fixture or scenario"))),
    }
}

fn build_scenario(name: &str, params: &Params) -> CliResult<(Network, DocMeta)> {
    let sc = find(name).map_err(|e| CliError::Input(e.to_string()))?;
    let net = sc.build(params).map_err(|e| CliError::Input(e.to_string()))?;
    let meta = sc.meta(params).map_err(|e| CliError::Input(e.to_string()))?;
    Ok((net, meta))
}

// ---------------------------------------------------------------------------
// validate / chfield

fn cmd_validate(ctx: &Ctx, input: &str, params: &Params) -> CliResult<String> {
    let (net, _) = load_input(input, params)?;
    let report = validate_admissible(&net);
    let mut warnings = Vec::new();
    let mut junctions = Vec::new();
    let mut critical = None;
    if report.is_valid() {
        match classify_junctions(&net) {
            Ok(js) => {
                for j in js {
                    junctions.push((net.vertices[j.vertex].id.clone(), format!("{:?}", j.kind)));
                }
            }
            Err(e) => warnings.push(e.to_string()),
        }
        match minimal_field(&net) {
            Ok(field) => {
                if !evolvable_with(&net, &field).unwrap_or(false) {
                    warnings.push("not evolvable: an edge at a non-120 junction has nonzero curvature".into());
                }
                critical = is_critical(&net).ok();
            }
            Err(ChFieldError::NoCHField(v)) => warnings.push(format!("no CH field at junction {v}")),
            Err(e) => warnings.push(e.to_string()),
        }
    }
    let out = match ctx.format {
        Format::Json => to_json(&json!({
            "valid": report.is_valid(),
            "violations": report.violations,
            "junctions": junctions.iter().map(|(v, k)| json!({"vertex": v, "kind": k})).collect::<Vec<_>>(),
            "critical": critical,
            "warnings": warnings,
        })),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{}", if report.is_valid() { "valid" } else { "invalid" });
            for v in &report.violations {
                let _ = writeln!(s, "  violation: {v}");
            }
            for (v, k) in &junctions {
                let _ = writeln!(s, "  junction {v}: {k}");
            }
            if let Some(c) = critical {
                let _ = writeln!(s, "  critical: {}", if c { "yes" } else { "no" });
            }
            for w in &warnings {
                let _ = writeln!(s, "warning: {w}");
            }
            s
        }
    };
    if report.is_valid() {
        Ok(out)
    } else {
        print!("{out}");
        Err(CliError::Domain(format!("{input}: network is not admissible")))
    }
}

fn cmd_chfield(ctx: &Ctx, input: &str, params: &Params) -> CliResult<String> {
    let (net, _) = load_input(input, params)?;
    let field = minimal_field(&net).map_err(|e| CliError::Domain(e.to_string()))?;
    let report = curvatures(&net, &field).map_err(|e| CliError::Domain(e.to_string()))?;
    let evolvable = evolvable_with(&net, &field).unwrap_or(false);
    let critical = field.kappa.iter().all(|k| k.abs() <= 1e-12);
    Ok(match ctx.format {
        Format::Json => to_json(&json!({
            "x": field.x,
            "edges": report.edges,
            "junctions": report.junctions,
            "critical": critical,
            "evolvable": evolvable,
        })),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{:<12} {:>5} {:>14} {:>14} {:>14}  bc", "edge", "facet", "kappa", "s_from", "s_to");
            for (e, row) in report.edges.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{:<12} {:>5} {:>14} {:>14} {:>14}  {}",
                    row.id,
                    row.facet,
                    fmt_sig(row.kappa),
                    fmt_sig(field.s_from[e]),
                    field.s_to[e].map_or("-".into(), fmt_sig),
                    if row.bc_flag { "bc" } else { "-" }
                );
            }
            for j in &report.junctions {
                let _ = writeln!(
                    s,
                    "junction {:<8} {:?} residuals {} {}",
                    j.vertex,
                    j.kind,
                    fmt_sig(j.vector_residual),
                    fmt_sig(j.kappa_residual)
                );
            }
            let _ = writeln!(s, "critical: {}", if critical { "yes" } else { "no" });
            let _ = writeln!(s, "evolvable: {}", if evolvable { "yes" } else { "no" });
            s
        }
    })
}

// ---------------------------------------------------------------------------
// evolve / render

struct RunOutcome {
    input: String,
    traj: Trajectory,
    view: ViewBox,
}

fn evolve_one(ctx: &Ctx, input: &str, params: &Params, horizon: f64) -> CliResult<RunOutcome> {
    let (net, _) = load_input(input, params)?;
    let view = ViewBox::around(&net);
    let traj = match evolve(&net, horizon, &ctx.cfg.flow_options()) {
        Ok(t) => t,
        Err(e @ (FlowError::InvalidHorizon | FlowError::NotAdmissible(_))) => {
            return Err(CliError::Input(format!("{input}: {e}")))
        }
        Err(e) => return Err(CliError::Domain(format!("{input}: {e}"))),
    };
    Ok(RunOutcome { input: input.to_string(), traj, view })
}

fn cmd_evolve(
    ctx: &Ctx,
    inputs: &[String],
    params: &Params,
    horizon: f64,
    csv: Option<&Path>,
    svg_dir: Option<&Path>,
    jobs: usize,
) -> CliResult<String> {
    if inputs.len() > 1 && csv.is_some() {
        return Err(CliError::Input("--csv takes a single input".into()));
    }
    let jobs = jobs.max(1);
    let mut results: Vec<CliResult<RunOutcome>> = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(jobs) {
        let batch: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|i| s.spawn(move || evolve_one(ctx, i, params, horizon))).collect();
            handles.into_iter().map(|h| h.join().expect("evolve thread panicked")).collect()
        });
        results.extend(batch);
    }
    let runs: Vec<RunOutcome> = results.into_iter().collect::<CliResult<_>>()?;

    for run in &runs {
        if let Some(path) = csv {
            std::fs::write(path, trajectory_csv(&run.traj))
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        }
        if let Some(dir) = svg_dir {
            let dir = if runs.len() > 1 { dir.join(stem(&run.input)) } else { dir.to_path_buf() };
            write_frames(&dir, run)?;
        }
    }

    let not_evolvable = runs.iter().any(|r| {
        r.traj.events.first().is_some_and(|e| e.t == 0.0 && e.termination == Some(Termination::NotEvolvable))
    });
    let out = match ctx.format {
        Format::Json => {
            let items: Vec<Value> = runs
                .iter()
                .map(|r| {
                    let last = r.traj.samples.last();
                    let end = r.traj.termination();
                    json!({
                        "input": r.input,
                        "horizon": horizon,
                        "seed": ctx.cfg.seed,
                        "t_end": end.map(|e| e.t),
                        "termination": end.and_then(|e| e.termination),
                        "events": r.traj.events,
                        "samples": r.traj.samples.len(),
                        "final_network": last.map(|s| serde_json::from_str::<Value>(&serialize(&s.network)).expect("network json")),
                    })
                })
                .collect();
            if items.len() == 1 {
                to_json(&items[0])
            } else {
                to_json(&Value::Array(items))
            }
        }
        Format::Text => {
            let mut s = String::new();
            for r in &runs {
                let _ = writeln!(s, "{}", r.input);
                let _ = writeln!(s, "  {:>12}  {:<10} {:<22} detail", "t", "event", "termination");
                for e in &r.traj.events {
                    let kind = match e.kind {
                        EventKind::Collapse => "collapse",
                        EventKind::Restart => "restart",
                        EventKind::Terminate => "terminate",
                    };
                    let mut detail = e.detail.clone();
                    if let Some(c) = e.critical {
                        detail = format!("{detail}{}critical={c}", if detail.is_empty() { "" } else { "; " });
                    }
                    let _ = writeln!(
                        s,
                        "  {:>12}  {:<10} {:<22} {}",
                        fmt_sig(e.t),
                        kind,
                        e.termination.map_or("-", |t| t.as_str()),
                        detail
                    );
                }
                let _ = writeln!(s, "  samples: {}", r.traj.samples.len());
            }
            s
        }
    };
    if not_evolvable {
        print!("{out}");
        return Err(CliError::Domain("network is not evolvable".into()));
    }
    Ok(out)
}

fn stem(input: &str) -> String {
    Path::new(input).file_stem().map_or(input.to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_frames(dir: &Path, run: &RunOutcome) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let style = SvgStyle::default();
    for (k, sample) in run.traj.samples.iter().enumerate() {
        let caption = format!("t = {}", fmt_sig(sample.t));
        let svg = svg_frame(&sample.network, &run.view, &style, Some(&caption));
        let path = dir.join(format!("frame_{k:05}.svg"));
        std::fs::write(&path, svg).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_render(input: &str, params: &Params, output: Option<&Path>) -> CliResult<String> {
    let (net, _) = load_input(input, params)?;
    let svg = svg_frame(&net, &ViewBox::around(&net), &SvgStyle::default(), Some(input));
    match output {
        Some(path) => {
            std::fs::write(path, svg).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(svg),
    }
}

// ---------------------------------------------------------------------------
// shrink

fn cmd_classify(ctx: &Ctx) -> String {
    let table = classify_all();
    match ctx.format {
        Format::Json => table.to_json(),
        Format::Text => table.to_text(),
    }
}

fn vertex_case(label: &str) -> Option<VertexCase> {
    let key = label.trim().to_ascii_lowercase().replace('-', "_");
    VertexCase::ALL
        .into_iter()
        .find(|c| serde_json::to_value(c).ok().and_then(|v| v.as_str().map(|s| s == key)).unwrap_or(false))
}

fn cmd_verify(ctx: &Ctx, label: &str, flow: bool) -> CliResult<String> {
    let a0 = ctx.cfg.shrinker_a0;
    let frac = ctx.cfg.horizon_fraction;
    if let Some(case) = vertex_case(label) {
        let check = if flow {
            Some(verify_vertex_case(case, a0, frac).map_err(|e| CliError::Domain(e.to_string()))?)
        } else {
            None
        };
        return Ok(match ctx.format {
            Format::Json => to_json(&json!({"case": case, "name": case.name(), "expected": case.expected(), "flow": check})),
            Format::Text => {
                let mut s = format!("{}: {}\n", case.name(), case.expected().as_str());
                if let Some(c) = check {
                    let _ = writeln!(s, "flow: homothetic={} residual={}", c.homothetic, fmt_sig(c.residual));
                    if let Some(d) = c.discrepancy {
                        let _ = writeln!(s, "flow: {d}");
                    }
                }
                s
            }
        });
    }
    let config = InteriorConfig::parse(label).map_err(|e: ShrinkerError| CliError::Input(e.to_string()))?;
    let Some(sol) = solve_config(config) else {
        let msg = format!("{}: NOT a shrinker (no positive solution)", config.label());
        if ctx.format == Format::Json {
            print!("{}", to_json(&json!({"config": config.label(), "shrinker": false})));
        } else {
            println!("{msg}");
        }
        return Err(CliError::Domain(format!("{}: no shrinker", config.label())));
    };
    let check = if flow {
        Some(verify_config(config, a0, frac).map_err(|e| CliError::Domain(e.to_string()))?)
    } else {
        None
    };
    Ok(match ctx.format {
        Format::Json => to_json(&json!({"config": sol.config, "shrinker": true, "solution": sol, "flow": check})),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{}: shrinker", sol.config);
            let row = |xs: &[f64]| xs.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "sides/a:      {}", row(&sol.sides));
            let _ = writeln!(s, "theta (deg):  {}", row(&sol.theta));
            let _ = writeln!(s, "theta_bar:    {}", row(&sol.theta_bar));
            let o = &sol.omega;
            let _ = writeln!(s, "omega:        {}", row(&[o.w2, o.w3, o.w4, o.wb2, o.wb3, o.wb4]));
            let _ = writeln!(s, "|OA1|/|OA4|:  {}", fmt_sig(sol.center_ratio));
            let _ = writeln!(s, "lambda:       {}", fmt_sig(sol.lambda));
            let _ = writeln!(s, "collapse t:   {}", fmt_sig(sol.collapse_time));
            if let Some(c) = check {
                let _ = writeln!(
                    s,
                    "flow:         homothetic={} residual={} lambda_fit={}",
                    c.homothetic,
                    fmt_sig(c.residual),
                    fmt_sig(c.lambda_fit)
                );
                if let Some(d) = c.discrepancy {
                    let _ = writeln!(s, "flow:         {d}");
                }
            }
            s
        }
    })
}

// ---------------------------------------------------------------------------
// fixtures / list

fn cmd_fixtures(dir: &Path) -> CliResult<String> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut out = String::new();
    for sc in catalog() {
        let net = sc.build(&Params::new()).map_err(|e| CliError::Input(e.to_string()))?;
        let meta = sc.meta(&Params::new()).map_err(|e| CliError::Input(e.to_string()))?;
        let path = dir.join(format!("{}.json", sc.name));
        std::fs::write(&path, serialize_document(&net, &meta))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(out)
}

fn cmd_list(ctx: &Ctx) -> String {
    let all = catalog();
    match ctx.format {
        Format::Json => to_json(&Value::Array(
            all.iter()
                .map(|s| json!({"name": s.name, "description": s.description, "params": s.params(&Params::new()).ok()}))
                .collect(),
        )),
        Format::Text => {
            let mut s = String::new();
            for sc in &all {
                let params: Vec<String> = sc.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let _ = writeln!(s, "{:<32} {}{}", sc.name, sc.description, if params.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", params.join(", "))
                });
            }
            s
        }
    }
}
