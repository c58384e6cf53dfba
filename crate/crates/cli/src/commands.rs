use std::fs;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory};

use dhkpr::cluster::{
    accepts, local_cluster, local_cluster_autophi, sparse_cut, AutoPhiRun, ClusterRequest, ClusterRun, SweepStrategy,
};
use dhkpr::congest::{default_bandwidth, RoundStats, SimConfig};
use dhkpr::hkpr::{exact_phkpr, walk_parameters};
use dhkpr::kmachine::{
    closed_form_cluster_bound, closed_form_phkpr_bound, crossover_k, dropped_factor, kmachine_table,
    local_cluster_symbolic, phkpr_symbolic, CostMeasurement,
};
use dhkpr::phkpr::{estimate_phkpr_distributed, support_within_ball};
use dhkpr::report::{
    fmt_num, fmt_ratio, fmt_set, graph_section, kmachine_section, stats_section, sweep_section, trace_text,
    vector_section, Report, Section,
};
use dhkpr::sweep::{chain_sweep, distributed_sweep, sweep_exact, truncation_length, SweepCaps, SweepParams};
use dhkpr::{Error, Graph, GraphError};

use crate::source::{self, SourceError};
use crate::{Cli, ClusterArgs, Command, Net, Walk};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Graph(GraphError::UnknownNode { .. }) => CliError::usage(e.to_string()),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<SourceError> for CliError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::Spec(msg) => CliError::usage(msg),
            SourceError::Graph(g) => CliError::runtime(format!("invalid graph: {g}")),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Where each parameter's value came from: `flag`, `env`, `default` or
/// `unset` (derived from the graph or other parameters).
struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    fn new(name: &str, sub: &ArgMatches) -> Self {
        let cmd = Cli::command();
        let sub_cmd = cmd.find_subcommand(name).expect("matched subcommand exists");
        let entries = sub_cmd
            .get_arguments()
            .map(|a| a.get_id().as_str())
            .filter(|id| !matches!(*id, "help" | "version" | "graph"))
            .map(|id| {
                let src = match sub.value_source(id) {
                    Some(ValueSource::CommandLine) => "flag",
                    Some(ValueSource::EnvVariable) => "env",
                    Some(ValueSource::DefaultValue) => "default",
                    _ => "unset",
                };
                (id.to_string(), src.to_string())
            })
            .collect();
        Provenance { entries }
    }

    fn derive(&mut self, id: &str, how: &str) {
        match self.entries.iter_mut().find(|(k, _)| k == id) {
            Some(entry) if entry.1 == "unset" => entry.1 = format!("derived: {how}"),
            Some(_) => {}
            None => self.entries.push((id.to_string(), format!("derived: {how}"))),
        }
    }

    /// Drops arguments the chosen mode never reads.
    fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        self.entries.retain(|(k, _)| keep(k));
    }

    fn section(&self) -> Section {
        self.entries
            .iter()
            .fold(Section::new("provenance"), |s, (k, v)| s.field(k.as_str(), v))
    }
}

fn header(echo: &str, name: &str, g: &Graph, graph_source: &str) -> Report {
    let mut r = Report::new();
    r.push(
        Section::new("run")
            .field("command", format!("dhkpr {echo}"))
            .field("subcommand", name)
            .field("version", env!("CARGO_PKG_VERSION")),
    );
    r.push(graph_section(g, graph_source));
    r
}

fn sim_config(g: &Graph, net: &Net, seed: u64) -> Result<SimConfig> {
    if !(net.beta > 0.0 && net.beta.is_finite()) {
        return Err(CliError::usage(format!("--beta must be positive, got {}", net.beta)));
    }
    if net.round_cap == 0 {
        return Err(CliError::usage("--round-cap must be positive"));
    }
    Ok(SimConfig {
        bandwidth_bits: default_bandwidth(g.node_count(), net.beta),
        mode: net.mode,
        seed,
        round_cap: net.round_cap,
        trace: net.trace.is_some(),
    })
}

fn net_fields(s: Section, net: &Net, cfg: &SimConfig) -> Section {
    let s = s
        .field("seed", cfg.seed)
        .field("mode", cfg.mode.as_str())
        .num("beta", net.beta)
        .field("bandwidth_bits", cfg.bandwidth_bits)
        .field("round_cap", cfg.round_cap)
        .field("log_base", "e");
    match &net.trace {
        Some(path) => s.field("trace", path.display()),
        None => s,
    }
}

fn write_trace(net: &Net, stats: &RoundStats) -> Result<()> {
    if let Some(path) = &net.trace {
        fs::write(path, trace_text(&stats.trace))
            .map_err(|e| CliError::runtime(format!("cannot write trace {}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn run(command: Command, name: &str, sub: &ArgMatches, echo: &str) -> Result<Report> {
    let mut prov = Provenance::new(name, sub);
    match command {
        Command::Hkpr {
            graph,
            walk,
            t,
            seed,
            net,
        } => {
            let g = source::load(&graph)?;
            let cfg = sim_config(&g, &net, seed)?;
            let est = estimate_phkpr_distributed(&g, walk.seed_node, t, walk.eps, walk.c, &cfg)?;
            let mut r = header(echo, name, &g, &graph);
            r.push(net_fields(
                walk_fields(Section::new("parameters"), &walk).num("t", t),
                &net,
                &cfg,
            ));
            r.push(prov.section());
            r.push(
                Section::new("walk")
                    .field("tokens", est.params.tokens)
                    .field("step_cap", est.params.step_cap),
            );
            r.push(stats_section("stats", &est.stats));
            r.push(
                Section::new("checks")
                    .field("token_total", est.vector.tokens().unwrap_or(0))
                    .field(
                        "support_within_step_cap",
                        support_within_ball(&g, &est.vector, est.params.step_cap),
                    ),
            );
            r.push(vector_section(&est.vector));
            write_trace(&net, &est.stats)?;
            Ok(r)
        }
        Command::HkprExact {
            graph,
            seed_node,
            t,
            tol,
        } => {
            let g = source::load(&graph)?;
            let v = exact_phkpr(&g, seed_node, t, tol)?;
            let mut r = header(echo, name, &g, &graph);
            r.push(
                Section::new("parameters")
                    .field("seed_node", seed_node)
                    .num("t", t)
                    .num("tol", tol),
            );
            r.push(prov.section());
            r.push(vector_section(&v));
            Ok(r)
        }
        Command::Sweep {
            graph,
            walk,
            t,
            chain,
            sigma,
            varsigma,
            seed,
            net,
        } => {
            let g = source::load(&graph)?;
            let cfg = sim_config(&g, &net, seed)?;
            let est = estimate_phkpr_distributed(&g, walk.seed_node, t, walk.eps, walk.c, &cfg)?;
            let caps = SweepCaps {
                size: sigma,
                volume: varsigma,
            };
            let params = SweepParams {
                eps: walk.eps,
                depth_cap: est.params.step_cap,
                caps,
            };
            let (res, sweep_stats) = if chain {
                chain_sweep(&g, &est.vector, &params, &cfg)?
            } else {
                distributed_sweep(
                    &g,
                    &est.vector,
                    &SweepParams {
                        caps: SweepCaps::none(),
                        ..params
                    },
                    &cfg,
                )?
            };
            let limit = truncation_length(walk.eps)?;
            let exact = sweep_exact(&g, &est.vector, Some(limit))?;
            let mut total = est.stats.clone();
            total.absorb(sweep_stats.clone());

            let mut r = header(echo, name, &g, &graph);
            let mut p = walk_fields(Section::new("parameters"), &walk)
                .num("t", t)
                .field("strategy", if chain { "chain" } else { "tree" })
                .field("truncation", limit)
                .field("depth_cap", est.params.step_cap);
            if let Some(s) = sigma {
                p = p.field("sigma", s);
            }
            if let Some(v) = varsigma {
                p = p.field("varsigma", v);
            }
            r.push(net_fields(p, &net, &cfg));
            r.push(prov.section());
            r.push(
                Section::new("walk")
                    .field("tokens", est.params.tokens)
                    .field("step_cap", est.params.step_cap),
            );
            r.push(
                Section::new("checks")
                    .field(
                        "matches_exact",
                        (res.best_prefix, res.best_ratio) == (exact.best_prefix, exact.best_ratio),
                    )
                    .field("exact_best_ratio", fmt_ratio(exact.best_ratio))
                    .field(
                        "cheeger_ratio_of_set",
                        fmt_ratio(g.cheeger_ratio(&res.best_set).map_err(Error::from)?),
                    ),
            );
            r.push(sweep_section(&res));
            r.push(stats_section("stats.estimate", &est.stats));
            r.push(stats_section("stats.sweep", &sweep_stats));
            r.push(stats_section("stats.total", &total));
            write_trace(&net, &total)?;
            Ok(r)
        }
        Command::Cluster { graph, phi, args } => {
            let g = source::load(&graph)?;
            let (req, cfg) = cluster_request(&g, &args, phi, &mut prov)?;
            let run = local_cluster(&g, &req, &cfg)?;
            let mut r = header(echo, name, &g, &graph);
            r.push(net_fields(
                request_fields(&req).num("phi", req.phi).num("t", run.t),
                &args.net,
                &cfg,
            ));
            r.push(prov.section());
            r.push(result_section(&g, &run, req.phi, req.c2)?);
            r.push(sweep_section(&run.sweep));
            r.push(stats_section("stats", &run.stats));
            write_trace(&args.net, &run.stats)?;
            Ok(r)
        }
        Command::ClusterAuto { graph, args } => {
            let g = source::load(&graph)?;
            let (req, cfg) = cluster_request(&g, &args, 0.5, &mut prov)?;
            let auto = local_cluster_autophi(&g, &req, &cfg)?;
            let mut r = header(echo, name, &g, &graph);
            r.push(net_fields(request_fields(&req).field("phi", "auto"), &args.net, &cfg));
            r.push(prov.section());
            r.push(result_section(&g, &auto.run, auto.phi_used, req.c2)?);
            r.push(guess_section(&auto));
            r.push(sweep_section(&auto.run.sweep));
            r.push(stats_section("stats", &auto.stats));
            write_trace(&args.net, &auto.stats)?;
            Ok(r)
        }
        Command::Sparsecut { graph, samples, args } => {
            let g = source::load(&graph)?;
            let (req, cfg) = cluster_request(&g, &args, 0.5, &mut prov)?;
            let n = g.node_count();
            let samples = match samples {
                Some(0) => return Err(CliError::usage("--samples must be at least 1")),
                Some(s) => s,
                None => {
                    prov.derive("samples", "ceil((n/sigma)*ln n)");
                    ((n as f64 / req.sigma as f64) * (n as f64).ln()).ceil().max(1.0) as usize
                }
            };
            let cut = sparse_cut(&g, samples, &req, &cfg)?;
            let mut r = header(echo, name, &g, &graph);
            r.push(net_fields(
                request_fields(&req).field("phi", "auto").field("samples", samples),
                &args.net,
                &cfg,
            ));
            r.push(prov.section());
            r.push(result_section(&g, &cut.best.run, cut.best.phi_used, req.c2)?.field("best_seed", cut.best_seed));
            r.push(
                Section::new("samples").with_table(
                    &["seed_node", "ratio", "accepted"],
                    cut.per_seed
                        .iter()
                        .map(|(s, ratio, acc)| vec![s.to_string(), fmt_ratio(*ratio), acc.to_string()]),
                ),
            );
            r.push(guess_section(&cut.best));
            r.push(sweep_section(&cut.best.run.sweep));
            r.push(stats_section("stats.best", &cut.best.stats));
            write_trace(&args.net, &cut.best.stats)?;
            Ok(r)
        }
        Command::Kmachine {
            graph,
            k,
            walk,
            max_degree,
            messages,
            rounds,
            max_node_messages,
            seed,
            t,
            phi,
            net,
        } => kmachine(
            KmArgs {
                graph,
                k,
                walk,
                max_degree,
                messages,
                rounds,
                max_node_messages,
                seed,
                t,
                phi,
                net,
            },
            name,
            echo,
            prov,
        ),
    }
}

fn walk_fields(s: Section, walk: &Walk) -> Section {
    s.field("seed_node", walk.seed_node)
        .num("eps", walk.eps)
        .num("c", walk.c)
}

fn cluster_request(
    g: &Graph,
    args: &ClusterArgs,
    phi: f64,
    prov: &mut Provenance,
) -> Result<(ClusterRequest, SimConfig)> {
    let sigma = args.sigma.unwrap_or_else(|| {
        prov.derive("sigma", "ceil(n/2)");
        g.node_count().div_ceil(2) as u64
    });
    let varsigma = args.varsigma.unwrap_or_else(|| {
        prov.derive("varsigma", "m");
        g.edge_count() as u64
    });
    if args.t_override.is_none() {
        prov.derive("t", "ln(2*sqrt(varsigma)/eps)/phi clamped to [1, 10000]");
    }
    let req = ClusterRequest {
        seed: args.walk.seed_node,
        sigma,
        varsigma,
        phi,
        eps: args.walk.eps,
        c2: args.c2,
        c: args.walk.c,
        t_override: args.t_override,
        strategy: if args.chain {
            SweepStrategy::Chain
        } else {
            SweepStrategy::Tree
        },
    };
    req.validate()?;
    g.check_node(req.seed).map_err(Error::from)?;
    let cfg = sim_config(g, &args.net, args.seed)?;
    Ok((req, cfg))
}

fn request_fields(req: &ClusterRequest) -> Section {
    let s = Section::new("parameters")
        .field("seed_node", req.seed)
        .field("sigma", req.sigma)
        .field("varsigma", req.varsigma)
        .num("eps", req.eps)
        .num("c", req.c)
        .num("c2", req.c2)
        .field("strategy", req.strategy.as_str());
    match req.t_override {
        Some(t) => s.num("t_override", t),
        None => s,
    }
}

fn result_section(g: &Graph, run: &ClusterRun, phi: f64, c2: f64) -> Result<Section> {
    let set = &run.sweep.best_set;
    let ratio = run.ratio();
    let check = g.cheeger_ratio(set).map_err(Error::from)?;
    Ok(Section::new("result")
        .field("set", fmt_set(set))
        .field("size", set.len())
        .field("ratio", fmt_ratio(ratio))
        .num("ratio_value", *ratio.numer() as f64 / *ratio.denom() as f64)
        .field("cheeger_ratio_of_set", fmt_ratio(check))
        .field("volume", g.volume(set))
        .field("boundary", g.edge_boundary(set))
        .num("phi_used", phi)
        .num("t_used", run.t)
        .field("accepted", accepts(ratio, phi, c2))
        .field("tokens", run.params.tokens)
        .field("step_cap", run.params.step_cap)
        .field("rounds", run.stats.rounds)
        .field("estimate_rounds", run.estimate_rounds)
        .field("sweep_rounds", run.sweep_rounds)
        .field("messages", run.stats.total_messages)
        .field("max_node_messages", run.stats.max_node_messages))
}

fn guess_section(auto: &AutoPhiRun) -> Section {
    Section::new("guesses")
        .field("count", auto.guesses.len())
        .field("accepted", auto.accepted)
        .num("phi_used", auto.phi_used)
        .with_table(
            &["phi", "ratio", "accepted"],
            auto.guesses
                .iter()
                .map(|g| vec![fmt_num(g.phi), fmt_ratio(g.ratio), g.accepted.to_string()]),
        )
}

struct KmArgs {
    graph: Option<String>,
    k: Vec<u64>,
    walk: Walk,
    max_degree: Option<usize>,
    messages: Option<f64>,
    rounds: Option<f64>,
    max_node_messages: Option<f64>,
    seed: Option<u64>,
    t: f64,
    phi: f64,
    net: Net,
}

fn measurement_section(name: &str, m: &CostMeasurement) -> Section {
    Section::new(name)
        .num("messages", m.messages)
        .num("max_node_messages", m.max_node_messages)
        .num("rounds", m.rounds)
        .field("n", m.n)
        .field("max_degree", m.max_degree)
}

fn join_k(k: &[u64]) -> String {
    k.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn kmachine(a: KmArgs, name: &str, echo: &str, mut prov: Provenance) -> Result<Report> {
    if let (Some(messages), Some(rounds), Some(c)) = (a.messages, a.rounds, a.max_node_messages) {
        let m = CostMeasurement::new(messages, c, rounds, 0, 0)?;
        let mut r = Report::new();
        r.push(
            Section::new("run")
                .field("command", format!("dhkpr {echo}"))
                .field("subcommand", name)
                .field("version", env!("CARGO_PKG_VERSION")),
        );
        r.push(
            Section::new("parameters")
                .field("k", join_k(&a.k))
                .num("messages", messages)
                .num("rounds", rounds)
                .num("max_node_messages", c),
        );
        prov.retain(|k| matches!(k, "k" | "messages" | "rounds" | "max_node_messages"));
        r.push(prov.section());
        r.push(measurement_section("measurement", &m));
        r.push(kmachine_section(
            "kmachine",
            &kmachine_table(&m, &a.k)?,
            crossover_k(&m),
        ));
        return Ok(r);
    }
    let Some(graph) = a.graph else {
        return Err(CliError::usage(
            "kmachine needs a graph or --messages/--rounds/--max-node-messages",
        ));
    };
    let g = source::load(&graph)?;
    let n = g.node_count();
    let delta = a.max_degree.unwrap_or_else(|| {
        prov.derive("max_degree", "graph");
        g.max_degree()
    });
    let params = walk_parameters(n, a.walk.eps, a.walk.c)?;
    let mut r = header(echo, name, &g, &graph);
    let mut p = walk_fields(Section::new("parameters"), &a.walk)
        .field("max_degree", delta)
        .field("k", join_k(&a.k));
    let cfg = match a.seed {
        Some(seed) => {
            let cfg = sim_config(&g, &a.net, seed)?;
            p = net_fields(p.num("t", a.t).num("phi", a.phi), &a.net, &cfg);
            Some(cfg)
        }
        None => {
            prov.retain(|k| !matches!(k, "t" | "phi" | "mode" | "beta" | "round_cap" | "trace"));
            None
        }
    };
    prov.retain(|k| !matches!(k, "messages" | "rounds" | "max_node_messages"));
    r.push(p);
    r.push(prov.section());
    r.push(
        Section::new("walk")
            .field("tokens", params.tokens)
            .field("step_cap", params.step_cap)
            .num("dropped_factor", dropped_factor(n, a.walk.eps, a.walk.c)?),
    );

    let sym_h = phkpr_symbolic(n, delta, a.walk.eps, a.walk.c)?;
    let sym_c = local_cluster_symbolic(n, delta, a.walk.eps, a.walk.c)?;
    let table_h = kmachine_table(&sym_h, &a.k)?;
    let table_c = kmachine_table(&sym_c, &a.k)?;
    r.push(measurement_section("symbolic.hkpr", &sym_h));
    r.push(kmachine_section(
        "kmachine.symbolic.hkpr",
        &table_h,
        crossover_k(&sym_h),
    ));
    r.push(measurement_section("symbolic.cluster", &sym_c));
    r.push(kmachine_section(
        "kmachine.symbolic.cluster",
        &table_c,
        crossover_k(&sym_c),
    ));
    r.push(Section::new("closed_form").with_table(
        &["k", "hkpr_expr", "hkpr_ratio", "cluster_expr", "cluster_ratio"],
        a.k.iter().zip(table_h.iter().zip(&table_c)).map(|(&k, (h, c))| {
            let eh = closed_form_phkpr_bound(a.walk.eps, k);
            let ec = closed_form_cluster_bound(a.walk.eps, delta, k);
            vec![
                k.to_string(),
                fmt_num(eh),
                fmt_num(h.bound / eh),
                fmt_num(ec),
                fmt_num(c.bound / ec),
            ]
        }),
    ));

    if let Some(cfg) = cfg {
        let est = estimate_phkpr_distributed(&g, a.walk.seed_node, a.t, a.walk.eps, a.walk.c, &cfg)?;
        let req = ClusterRequest {
            c: a.walk.c,
            ..ClusterRequest::new(
                a.walk.seed_node,
                n.div_ceil(2) as u64,
                g.edge_count() as u64,
                a.phi,
                a.walk.eps,
            )
        };
        let run = local_cluster(&g, &req, &cfg)?;
        for (label, stats, table) in [("hkpr", &est.stats, &table_h), ("cluster", &run.stats, &table_c)] {
            let m = CostMeasurement::from_stats(stats, &g);
            let measured = kmachine_table(&m, &a.k)?;
            r.push(measurement_section(&format!("measured.{label}"), &m));
            r.push(Section::new(format!("kmachine.measured.{label}")).with_table(
                &["k", "bound", "symbolic", "ratio"],
                measured.iter().zip(table.iter()).map(|(mb, sb)| {
                    vec![
                        mb.k.to_string(),
                        fmt_num(mb.bound),
                        fmt_num(sb.bound),
                        fmt_num(mb.bound / sb.bound),
                    ]
                }),
            ));
        }
        let mut total = est.stats;
        total.absorb(run.stats);
        write_trace(&a.net, &total)?;
    }
    Ok(r)
}
