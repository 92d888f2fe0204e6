use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dnim::agent::{train_with_callback, CheckpointManifest, QNetwork, QNetworkConfig, TrainConfig};
use dnim::graph::Delimiter;
use dnim::oracle::estimate_with_stats;
use dnim::selectors::{degree_top_k, greedy_lazy, random_k};
use dnim::sis::{fraction_active_activations, influence, run_diffusion, window_activity};
use dnim::{DiffusionParams, DiffusionStats, NodeId, ParseOptions, Scalar, TemporalGraph};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::io::*;

/// Seed used when `--rng-seed` is absent.
const DEFAULT_SEED: u64 = 0;

fn report(command: &str, args: &impl Serialize, rng_seed: u64) -> Value {
    let mut params = serde_json::to_value(args).expect("arguments serialize");
    params["command"] = json!(command);
    params["rng_seed"] = json!(rng_seed);
    json!({ "params": params })
}

fn originals(g: &TemporalGraph, seeds: &[NodeId]) -> Vec<i64> {
    seeds.iter().map(|&v| g.original_id(v)).collect()
}

fn diffusion(d: &DiffusionArgs, rng_seed: u64) -> DiffusionParams {
    DiffusionParams {
        mu: d.mu,
        t_act: d.t_act,
        rng_seed,
    }
}

fn stats_json(stats: &DiffusionStats) -> Value {
    json!({
        "attempts": stats.attempts,
        "successes": stats.successes,
        "successes_on_active": stats.successes_on_active,
        "fraction_active_activations": fraction_active_activations(stats),
    })
}

pub fn ingest(a: &IngestArgs, rng_seed: Option<u64>) -> CliResult<()> {
    let opts = ParseOptions {
        delimiter: match a.delimiter {
            DelimiterArg::Auto => Delimiter::Auto,
            DelimiterArg::Comma => Delimiter::Comma,
            DelimiterArg::Whitespace => Delimiter::Whitespace,
            DelimiterArg::Tab => Delimiter::Char('\t'),
        },
        has_weight_column: a.weights,
        drop_loops: a.drop_loops,
        dedup: a.dedup,
    };
    let mut g = load_graph_with(&a.input, &opts)?;
    if let (Some(s), Some(e)) = (a.t_start, a.t_end) {
        g = g.with_window(s, e)?;
    }
    if let Some(out) = &a.out {
        emit_with(Some(out), |w| g.write_cache(w))?;
    }
    let mut r = report("ingest", a, rng_seed.unwrap_or(DEFAULT_SEED));
    r["summary"] = serde_json::to_value(g.summary()).expect("summary serializes");
    emit_json(&r, None)
}

pub fn evaluate(a: &EvaluateArgs, rng_seed: u64) -> CliResult<()> {
    let g = load_graph(&a.graph.graph)?;
    let (ids, seeds) = resolve_seeds(&g, &a.seeds.seeds, a.seeds.seeds_file.as_deref())?;
    let p = diffusion(&a.diffusion, rng_seed);
    let (est, stats) = estimate_with_stats(&g, &seeds, &p, a.reps)?;
    if let (Some(n), Some(out)) = (a.windows, &a.windows_out) {
        // Replication 0 of the estimate above.
        let first = DiffusionParams {
            rng_seed: dnim::rng::derive_seed(p.rng_seed, 0),
            ..p
        };
        let (log, _) = run_diffusion(&g, &seeds, &first)?;
        let counts = window_activity(&log, n)?;
        let width = g.duration() as f64 / n as f64;
        emit_with(Some(out), |w| {
            writeln!(w, "window,start,end,active_nodes")?;
            for (i, c) in counts.iter().enumerate() {
                let lo = g.t_start() as f64 + width * i as f64;
                let hi = if i + 1 == n {
                    g.t_end() as f64
                } else {
                    lo + width
                };
                writeln!(w, "{i},{lo},{hi},{c}")?;
            }
            Ok(())
        })?;
    }
    let mut r = report("evaluate", a, rng_seed);
    r["seeds"] = json!(ids);
    r["mean"] = json!(est.mean);
    r["std_dev"] = json!(est.std_dev);
    r["std_error"] = json!(est.std_error());
    r["replications"] = json!(est.replications);
    r["stats"] = stats_json(&stats);
    emit_json(&r, a.out.as_deref())
}

fn read_manifest(path: &Path) -> CliResult<CheckpointManifest> {
    let mut m = path.as_os_str().to_owned();
    m.push(".json");
    let m = PathBuf::from(m);
    let text =
        fs::read_to_string(&m).map_err(|e| CliError::data(format!("{}: {e}", m.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", m.display())))
}

fn policy_seeds<T: Scalar>(path: &Path, g: &TemporalGraph, k: usize) -> CliResult<Vec<NodeId>> {
    let (net, _) = QNetwork::<T>::load(path)?;
    Ok(net.select_seeds_by_policy(g, k)?)
}

pub fn select(a: &SelectArgs, rng_seed: u64) -> CliResult<()> {
    let g = load_graph(&a.graph.graph)?;
    if a.k > g.n_nodes() {
        return Err(dnim::Error::KTooLarge {
            k: a.k,
            n_nodes: g.n_nodes(),
        }
        .into());
    }
    let started = Instant::now();
    let seeds = match a.algorithm {
        Algorithm::Greedy => greedy_lazy(&g, a.k, &diffusion(&a.diffusion, rng_seed), a.reps)?,
        Algorithm::Degree => degree_top_k(&g, a.k)?,
        Algorithm::Random => random_k(&g, a.k, rng_seed)?,
        Algorithm::Dnimrl => {
            let path = a.checkpoint.as_deref().expect("clap requires a checkpoint");
            match read_manifest(path)?.scalar.as_str() {
                "f32" => policy_seeds::<f32>(path, &g, a.k)?,
                _ => policy_seeds::<f64>(path, &g, a.k)?,
            }
        }
    };
    let seconds = started.elapsed().as_secs_f64();
    let name = serde_json::to_value(a.algorithm).expect("enum serializes");
    if let Some(t) = &a.timing {
        append_timing(t, name.as_str().unwrap_or_default(), a.k, seconds)?;
    }
    let mut r = report("select", a, rng_seed);
    r["seeds"] = json!(originals(&g, &seeds));
    emit_json(&r, a.out.as_deref())
}

fn train_config(path: Option<&Path>, rng_seed: Option<u64>) -> CliResult<TrainConfig> {
    let mut cfg: TrainConfig = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = rng_seed {
        cfg.agent.rng_seed = s;
        cfg.diffusion.rng_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_training<T: Scalar>(
    a: &TrainArgs,
    g: &TemporalGraph,
    cfg: &TrainConfig,
) -> CliResult<Value> {
    let (net, log) =
        train_with_callback::<T, _>(g, &cfg.agent, &cfg.embedding, &cfg.diffusion, |_| {})?;
    let checkpoint = a.checkpoint.as_deref().expect("clap requires a checkpoint");
    net.save(
        checkpoint,
        json!({ "config": cfg, "episodes": log.episodes.len() }),
    )?;
    if let Some(path) = &a.log {
        emit_with(Some(path), |w| log.write_csv(w))?;
    }
    let policy = net.select_seeds_by_policy(g, cfg.agent.k)?;
    Ok(json!({
        "episodes": log.episodes.len(),
        "gradient_steps": log.gradient_steps,
        "target_syncs": log.target_syncs,
        "final_return": log.episodes.last().map(|e| e.ret),
        "policy_seeds": originals(g, &policy),
    }))
}

pub fn train(a: &TrainArgs, rng_seed: Option<u64>) -> CliResult<()> {
    let cfg = train_config(a.config.as_deref(), rng_seed)?;
    if a.print_config {
        return emit_json(&cfg, a.out.as_deref());
    }
    let g = load_graph(a.graph.as_deref().expect("clap requires a graph"))?;
    let result = match a.precision {
        Precision::F32 => run_training::<f32>(a, &g, &cfg)?,
        Precision::F64 => run_training::<f64>(a, &g, &cfg)?,
    };
    let mut r = report("train", a, cfg.agent.rng_seed);
    r["params"]["config"] = serde_json::to_value(&cfg).expect("config serializes");
    r["result"] = result;
    emit_json(&r, a.out.as_deref())
}

pub fn simulate(a: &SimulateArgs, rng_seed: u64) -> CliResult<()> {
    let g = load_graph(&a.graph.graph)?;
    let (ids, seeds) = resolve_seeds(&g, &a.seeds.seeds, a.seeds.seeds_file.as_deref())?;
    let (log, stats) = run_diffusion(&g, &seeds, &diffusion(&a.diffusion, rng_seed))?;
    if let Some(path) = &a.intervals_out {
        emit_with(Some(path), |w| log.write_csv(&g, w))?;
    }
    let mut r = report("simulate", a, rng_seed);
    r["seeds"] = json!(ids);
    r["influence"] = json!(influence(&log, g.n_nodes()));
    r["total_active_seconds"] = json!(log.total_active_time());
    r["stats"] = stats_json(&stats);
    emit_json(&r, a.out.as_deref())
}

fn write_embeddings<T: Scalar>(
    net: &QNetwork<T>,
    g: &TemporalGraph,
    out: Option<&Path>,
) -> CliResult<()> {
    let z = net.embeddings(g)?;
    emit_with(out, |w| z.write_csv(g, w))
}

pub fn embed(a: &EmbedArgs, rng_seed: Option<u64>) -> CliResult<()> {
    let g = load_graph(&a.graph.graph)?;
    match &a.checkpoint {
        Some(path) => match read_manifest(path)?.scalar.as_str() {
            "f32" => write_embeddings(&QNetwork::<f32>::load(path)?.0, &g, a.out.as_deref()),
            _ => write_embeddings(&QNetwork::<f64>::load(path)?.0, &g, a.out.as_deref()),
        },
        None => {
            let cfg = train_config(a.config.as_deref(), rng_seed)?;
            let net_cfg = QNetworkConfig {
                embedding: cfg.embedding,
                ablation: cfg.agent.ablation,
                estimator_hidden: cfg.agent.estimator_hidden,
            };
            let net = QNetwork::<f64>::new(&net_cfg, cfg.agent.rng_seed)?;
            write_embeddings(&net, &g, a.out.as_deref())
        }
    }
}
