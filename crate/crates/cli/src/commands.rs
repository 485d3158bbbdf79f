use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use beamtrack::agent::{train, ActionSpace, Checkpoint, QPolicy, TrainConfig, TrainOutcome};
use beamtrack::baselines::{train_learned_handover, MultiConnectivity};
use beamtrack::env::{run_episode, Action, EpisodeTrace, HandoverEnv, Policy, RayLinkModel, SiteView, State};
use beamtrack::metrics::{compare, paired_comparison, summarize, RealizationResult, RunSummary};
use beamtrack::scenario::{evaluation_realizations, Scenario, ScenarioConfig};

use crate::manifest::{self, sha256_hex, Manifest};
use crate::{
    Cli, CliError, Command, CompareArgs, EvaluateArgs, GenerateArgs, Method, ReplayArgs, ScenarioArgs, TrainArgs,
};

pub fn run(command: Command, args: Vec<String>) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => generate(&a, args),
        Command::Train(a) => train_cmd(&a, args),
        Command::Evaluate(a) => evaluate(&a, args),
        Command::Compare(a) => compare_cmd(&a, args),
        Command::Replay(a) => replay(&a),
    }
}

struct Loaded {
    scenario: Scenario,
    config_sha256: String,
    env: HandoverEnv<RayLinkModel>,
}

fn load(args: &ScenarioArgs) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(&args.scene)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.scene.display())))?;
    let mut config = ScenarioConfig::from_json_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.scene.display())))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(m) = args.traj_slots {
        config.trajectory.slots = m;
    }
    let config_sha256 = sha256_hex(config.to_canonical_json().as_bytes());
    let scenario = Scenario::build(config)?;
    let env = scenario.env(args.num_bs, None)?;
    Ok(Loaded { scenario, config_sha256, env })
}

/// Collects output files and their hashes, then writes the manifest.
struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    fn csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        self.write(rel, &bytes)
    }

    fn finish(self, mut m: Manifest) -> Result<Manifest, CliError> {
        m.outputs = self.files;
        let mut s = serde_json::to_string_pretty(&m).expect("serializable");
        s.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, s).map_err(|e| CliError::io(&path, e))?;
        Ok(m)
    }
}

fn base_manifest(command: &str, args: Vec<String>, l: &Loaded) -> Manifest {
    Manifest {
        tool: "beamtrack".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        args,
        config_sha256: l.config_sha256.clone(),
        seed: l.scenario.config.seed,
        num_bs: l.env.num_bs(),
        slots: l.env.num_slots(),
        scenario: serde_json::to_value(&l.scenario.config).expect("serializable"),
        train: None,
        methods: Vec::new(),
        realizations: Vec::new(),
        outputs: BTreeMap::new(),
    }
}

fn generate(a: &GenerateArgs, args: Vec<String>) -> Result<(), CliError> {
    let l = load(&a.scenario)?;
    let mut out = Outputs::new(&a.out_dir)?;
    out.json("scene.json", &l.scenario.scene_file())?;
    let scene = &l.scenario.scene;
    println!(
        "BSs: {}  slots: {}  world area: {:.0} m²  street area: {:.0} m²  buildings: {}",
        l.env.num_bs(),
        l.env.num_slots(),
        scene.bounds.area(),
        scene.street_area(),
        scene.buildings.len()
    );
    out.finish(base_manifest("generate", args, &l))?;
    Ok(())
}

fn train_config(path: Option<&Path>, episodes: Option<usize>, seed: u64) -> Result<TrainConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(n) = episodes {
        cfg.episodes = n;
    }
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn train_method(env: &mut HandoverEnv<RayLinkModel>, method: Method, cfg: &TrainConfig) -> Result<TrainOutcome, CliError> {
    match method {
        Method::Proposed => Ok(train(env, cfg, ActionSpace::TrackOrHandover)?),
        Method::Baseline2 => Ok(train_learned_handover(env, cfg)?),
        Method::Baseline1 => Err(CliError::Config("baseline1 is a fixed rule and needs no training".into())),
    }
}

fn write_trained(out: &mut Outputs, prefix: &str, t: &TrainOutcome) -> Result<(), CliError> {
    out.json(&format!("{prefix}policy.json"), &Checkpoint::from_policy(&t.policy)?)?;
    out.csv(&format!("{prefix}curve.csv"), &t.curve)
}

fn train_cmd(a: &TrainArgs, args: Vec<String>) -> Result<(), CliError> {
    if a.method == Method::Baseline1 {
        return Err(CliError::Config("baseline1 is a fixed rule and needs no training".into()));
    }
    let mut l = load(&a.scenario)?;
    let cfg = train_config(a.config.as_deref(), a.episodes, l.scenario.config.seed)?;
    let t = train_method(&mut l.env, a.method, &cfg)?;
    let mut out = Outputs::new(&a.out_dir)?;
    write_trained(&mut out, "", &t)?;
    let tail = &t.curve[t.curve.len().saturating_sub(100)..];
    if !tail.is_empty() {
        let mean = tail.iter().map(|c| c.episode_return).sum::<f64>() / tail.len() as f64;
        println!("{}: {} episodes, mean return over the last {}: {mean:.2}", a.method.name(), t.curve.len(), tail.len());
    }
    let mut m = base_manifest("train", args, &l);
    m.train = Some(serde_json::to_value(&cfg).expect("serializable"));
    m.methods = vec![a.method.name().into()];
    out.finish(m)?;
    Ok(())
}

/// A frozen evaluation policy.
#[derive(Clone)]
enum Frozen {
    Learned(QPolicy),
    Rule(MultiConnectivity),
}

impl Policy for Frozen {
    fn act(&mut self, state: &State, sites: &dyn SiteView) -> Action {
        match self {
            Frozen::Learned(p) => p.act(state, sites),
            Frozen::Rule(p) => p.act(state, sites),
        }
    }
}

fn load_policy(path: &Path, method: Method, num_bs: usize) -> Result<QPolicy, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| CliError::Mismatch(format!("{}: {e}", path.display())))?;
    let policy = ck.into_policy()?;
    expect_policy(&policy, method, num_bs)?;
    Ok(policy)
}

fn expect_policy(policy: &QPolicy, method: Method, num_bs: usize) -> Result<(), CliError> {
    let want = match method {
        Method::Proposed => ActionSpace::TrackOrHandover,
        _ => ActionSpace::HandoverOnly,
    };
    if policy.actions != want {
        return Err(CliError::Mismatch(format!("checkpoint action space {:?} does not belong to {}", policy.actions, method.name())));
    }
    if policy.num_bs() != num_bs {
        return Err(CliError::Mismatch(format!("checkpoint trained for {} BSs, scenario has {num_bs}", policy.num_bs())));
    }
    Ok(())
}

fn frozen(method: Method, policy: Option<QPolicy>, num_bs: usize) -> Result<Frozen, CliError> {
    match (method, policy) {
        (Method::Baseline1, _) => {
            Ok(Frozen::Rule(MultiConnectivity::new(num_bs).map_err(|e| CliError::Config(e.to_string()))?))
        }
        (_, Some(p)) => Ok(Frozen::Learned(p)),
        (m, None) => Err(CliError::Config(format!("{} needs --policy", m.name()))),
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Config(e.to_string()))
}

/// Evaluate a frozen policy; results come back in realization order.
fn evaluate_policy(
    pool: &rayon::ThreadPool,
    env: &HandoverEnv<RayLinkModel>,
    policy: &Frozen,
    realizations: &[u64],
) -> Result<Vec<EpisodeTrace>, CliError> {
    pool.install(|| {
        realizations
            .par_iter()
            .map(|&r| {
                let mut e = env.clone();
                let mut p = policy.clone();
                run_episode(&mut e, &mut p, r).map_err(|err| CliError::Config(err.to_string()))
            })
            .collect()
    })
}

fn write_evaluation(out: &mut Outputs, prefix: &str, method: Method, traces: &[EpisodeTrace], threshold: f64) -> Result<(Vec<RealizationResult>, RunSummary), CliError> {
    for (i, t) in traces.iter().enumerate() {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).map_err(|e| CliError::Config(e.to_string()))?;
        out.write(&format!("{prefix}traces/realization_{i:04}.csv"), &buf)?;
    }
    let results: Vec<RealizationResult> = traces.iter().map(|t| RealizationResult::from_trace(t, threshold)).collect();
    let summary = summarize(method.name(), &results).map_err(|e| CliError::Config(e.to_string()))?;
    out.csv(&format!("{prefix}results.csv"), &results)?;
    out.json(&format!("{prefix}summary.json"), &summary)?;
    Ok((results, summary))
}

fn evaluate(a: &EvaluateArgs, args: Vec<String>) -> Result<(), CliError> {
    if a.realizations == 0 {
        return Err(CliError::Config("--realizations must be positive".into()));
    }
    let l = load(&a.scenario)?;
    let num_bs = l.env.num_bs();
    let policy = match (a.method, &a.policy) {
        (Method::Baseline1, _) => None,
        (m, Some(p)) => Some(load_policy(p, m, num_bs)?),
        (m, None) => return Err(CliError::Config(format!("{} needs --policy", m.name()))),
    };
    let policy = frozen(a.method, policy, num_bs)?;
    let realizations = evaluation_realizations(a.realizations);
    let traces = evaluate_policy(&pool(a.workers)?, &l.env, &policy, &realizations)?;
    let mut out = Outputs::new(&a.out_dir)?;
    let threshold = l.env.config().throughput_threshold;
    let (_, s) = write_evaluation(&mut out, "", a.method, &traces, threshold)?;
    print_summary(&s);
    let mut m = base_manifest("evaluate", args, &l);
    m.methods = vec![a.method.name().into()];
    m.realizations = realizations;
    out.finish(m)?;
    Ok(())
}

fn print_summary(s: &RunSummary) {
    println!(
        "{:<10} throughput {:.2} ± {:.2}  unmet {:.2} ± {:.2}  handovers {:.2} ± {:.2}  fallbacks {:.2}",
        s.method, s.mean_throughput, s.ci_throughput, s.mean_unmet, s.ci_unmet, s.mean_handovers, s.ci_handovers, s.mean_fallbacks
    );
}

#[derive(Serialize)]
struct LengthRow<'a> {
    trajectory_length: usize,
    method: &'a str,
    mean: f64,
    ci: f64,
}

#[derive(Serialize)]
struct BsRow<'a> {
    num_bs: usize,
    method: &'a str,
    aggregate_throughput_mean: f64,
    ci: f64,
}

#[derive(Serialize)]
struct PairedRow<'a> {
    metric: &'a str,
    method: &'a str,
    baseline: &'a str,
    mean_difference: f64,
    ci_difference: f64,
    wins: usize,
    losses: usize,
    p_value: f64,
}

fn compare_cmd(a: &CompareArgs, args: Vec<String>) -> Result<(), CliError> {
    if a.realizations == 0 {
        return Err(CliError::Config("--realizations must be positive".into()));
    }
    let mut l = load(&a.scenario)?;
    let num_bs = l.env.num_bs();
    MultiConnectivity::new(num_bs).map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = train_config(a.config.as_deref(), a.episodes, l.scenario.config.seed)?;
    let mut out = Outputs::new(&a.out_dir)?;
    let proposed = train_method(&mut l.env, Method::Proposed, &cfg)?;
    write_trained(&mut out, "proposed/", &proposed)?;
    let learned = train_method(&mut l.env, Method::Baseline2, &cfg)?;
    write_trained(&mut out, "baseline2/", &learned)?;

    let realizations = evaluation_realizations(a.realizations);
    let pool = pool(a.workers)?;
    let threshold = l.env.config().throughput_threshold;
    let methods = [
        (Method::Proposed, frozen(Method::Proposed, Some(proposed.policy), num_bs)?),
        (Method::Baseline1, frozen(Method::Baseline1, None, num_bs)?),
        (Method::Baseline2, frozen(Method::Baseline2, Some(learned.policy), num_bs)?),
    ];
    let mut results = Vec::new();
    let mut summaries = Vec::new();
    for (m, p) in &methods {
        let traces = evaluate_policy(&pool, &l.env, p, &realizations)?;
        let (r, s) = write_evaluation(&mut out, &format!("{}/", m.name()), *m, &traces, threshold)?;
        print_summary(&s);
        results.push(r);
        summaries.push(s);
    }

    let table = compare(&summaries, "proposed").map_err(|e| CliError::Config(e.to_string()))?;
    out.csv("comparison.csv", &table)?;
    let m_len = l.env.num_slots();
    let rows = |f: fn(&RunSummary) -> (f64, f64)| -> Vec<LengthRow> {
        summaries.iter().map(|s| {
            let (mean, ci) = f(s);
            LengthRow { trajectory_length: m_len, method: &s.method, mean, ci }
        }).collect()
    };
    out.csv("unmet.csv", &rows(|s| (s.mean_unmet, s.ci_unmet)))?;
    out.csv("handovers.csv", &rows(|s| (s.mean_handovers, s.ci_handovers)))?;
    let bs_rows: Vec<BsRow> = summaries
        .iter()
        .map(|s| BsRow { num_bs, method: &s.method, aggregate_throughput_mean: s.mean_throughput, ci: s.ci_throughput })
        .collect();
    out.csv("throughput.csv", &bs_rows)?;

    let metrics: [(&str, fn(&RealizationResult) -> f64); 3] = [
        ("unmet_slots", |r| -(r.unmet_slots as f64)),
        ("handovers", |r| -(r.handovers as f64)),
        ("total_throughput", |r| r.total_throughput),
    ];
    let mut paired = Vec::new();
    for (metric, f) in metrics {
        for (i, name) in [(1, "baseline1"), (2, "baseline2")] {
            let c = paired_comparison("proposed", &results[0], name, &results[i], f);
            paired.push(PairedRow {
                metric,
                method: "proposed",
                baseline: name,
                mean_difference: c.mean_difference,
                ci_difference: c.ci_difference,
                wins: c.wins,
                losses: c.losses,
                p_value: c.p_value,
            });
        }
    }
    out.csv("paired.csv", &paired)?;

    let mut man = base_manifest("compare", args, &l);
    man.train = Some(serde_json::to_value(&cfg).expect("serializable"));
    man.methods = methods.iter().map(|(m, _)| m.name().to_string()).collect();
    man.realizations = realizations;
    out.finish(man)?;
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<(), CliError> {
    let old = manifest::read(&a.manifest)?;
    let mut argv = vec!["beamtrack".to_string(), old.command.clone()];
    argv.extend(old.args.iter().cloned());
    argv.push("--out-dir".into());
    argv.push(a.out_dir.display().to_string());
    let cli = <Cli as clap::Parser>::try_parse_from(&argv).map_err(|e| CliError::Config(format!("manifest arguments: {e}")))?;
    run(cli.command, old.args.clone())?;
    let new = manifest::read(&a.out_dir.join("manifest.json"))?;
    if new.config_sha256 != old.config_sha256 {
        return Err(CliError::Mismatch("scenario changed since the recorded run".into()));
    }
    let differing: Vec<&String> =
        old.outputs.iter().filter(|(k, v)| new.outputs.get(*k) != Some(*v)).map(|(k, _)| k).collect();
    if !differing.is_empty() || new.outputs.len() != old.outputs.len() {
        return Err(CliError::Mismatch(format!("replayed outputs differ: {differing:?}")));
    }
    println!("replay reproduced {} files", new.outputs.len());
    Ok(())
}
