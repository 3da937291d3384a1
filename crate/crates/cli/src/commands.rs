use crate::config::FileConfig;
use crate::manifest::{FileHash, RunManifest, STDOUT};
use clap::{Args, Parser, Subcommand};
use negobench::baselines::llm::{llm_play_game, LlmClient, LlmClientConfig, LlmTrace, MockScript, MockTransport, RecordingSleeper};
use negobench::evaluation::sweep::SizeClass;
use negobench::evaluation::{emit_report, improvement_stats, run_sweep, SweepGrid};
use negobench::generator::{generate_game, ActionCounts, Alignment, GeneratorConfig, PayoffRegime};
use negobench::par;
use negobench::protocol::{play_with_spec, LeafEval, ProtocolConfig, Trace};
use negobench::solvers::{optimal_payoffs, solve_welfare, ExactConfig, WelfareObjective};
use negobench::topfile::{parse_topfile, topfile_to_game};
use negobench::values::{ThreatPolicy, ValueKind, ValueSpec};
use negobench::{Error, Game, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(name = "negobench", version, about = "Sequential multi-party negotiation games with binding commitments")]
pub struct Cli {
    /// TOML config file; keys mirror flag names, `[subcommand]` tables override top-level keys
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run manifest path (default: next to the primary output, or ./negobench-<command>.manifest.json)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random game
    Generate(GenerateArgs),
    /// Play a game with the reference protocol
    Play(PlayArgs),
    /// Solve a game exactly by backward induction
    SolveExact(SolveArgs),
    /// Utilitarian or Nash welfare optimum
    Welfare(WelfareArgs),
    /// Run a regime sweep and write CSV/JSON reports
    Sweep(SweepArgs),
    /// Convert a topfile document into a game
    Ingest(IngestArgs),
    /// Play a game with a language-model proposer
    LlmPlay(LlmArgs),
    /// Improvement statistics of trace A over trace B
    Compare(CompareArgs),
    /// Re-run a manifest and check its outputs reproduce byte-for-byte
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Play(_) => "play",
            Command::SolveExact(_) => "solve-exact",
            Command::Welfare(_) => "welfare",
            Command::Sweep(_) => "sweep",
            Command::Ingest(_) => "ingest",
            Command::LlmPlay(_) => "llm-play",
            Command::Compare(_) => "compare",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub players: Option<usize>,
    /// Actions per player: N or MIN-MAX
    #[arg(long)]
    pub actions: Option<ActionCounts>,
    #[arg(long)]
    pub goals: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// cooperative | adversarial
    #[arg(long)]
    pub alignment: Option<Alignment>,
    /// balanced | pos_dom | neg_dom | neg_dom_pp
    #[arg(long)]
    pub regime: Option<PayoffRegime>,
    #[arg(long, allow_hyphen_values = true)]
    pub utility_min: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub utility_max: Option<i64>,
    #[arg(long)]
    pub aon_fraction: Option<f64>,
    #[arg(long)]
    pub zipf_alpha: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub cooperative_mean: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// Proposals per player
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Per-player per-turn commitment budget
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub mcts_sims: Option<usize>,
    #[arg(long)]
    pub mcts_c: Option<f64>,
    /// approx | raw
    #[arg(long)]
    pub leaf_eval: Option<LeafEval>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Candidate-update guard per offer search
    #[arg(long)]
    pub max_candidates: Option<usize>,
    /// State guard for exact solving
    #[arg(long)]
    pub max_states: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[arg(long)]
    pub game: Option<PathBuf>,
    /// reward | upper | lower | exact
    #[arg(long)]
    pub value: Option<ValueKind>,
    /// Comma-separated per-player kinds, overriding --value
    #[arg(long)]
    pub per_player: Option<KindList>,
    /// literal | exclude_self_only
    #[arg(long)]
    pub threat_policy: Option<ThreatPolicy>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub game: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_states: Option<usize>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WelfareArgs {
    #[arg(long)]
    pub game: Option<PathBuf>,
    /// utilitarian | nash
    #[arg(long)]
    pub objective: Option<WelfareObjective>,
    /// Minimum payoff for Nash welfare
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid file (TOML)
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Comma-separated value kinds
    #[arg(long)]
    pub methods: Option<KindList>,
    #[arg(long)]
    pub threat_policy: Option<ThreatPolicy>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub topfile: Option<PathBuf>,
    /// Game identifier recorded in provenance (default: the file stem)
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name sidecar (default: <out>.names.json)
    #[arg(long)]
    pub names_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    #[arg(long)]
    pub game: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Scripted replies (JSON) instead of the live endpoint; waits are recorded, not slept
    #[arg(long)]
    pub mock: Option<PathBuf>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub backoff_base: Option<f64>,
    #[arg(long)]
    pub backoff_factor: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Commitment budget per side for model offers
    #[arg(long)]
    pub k_llm: Option<usize>,
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub trace_a: PathBuf,
    pub trace_b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest to replay
    pub run: PathBuf,
}

/// Comma-separated list of value kinds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KindList(pub Vec<ValueKind>);

impl FromStr for KindList {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let kinds = s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(ValueKind::from_str)
            .collect::<Result<Vec<_>>>()?;
        if kinds.is_empty() {
            return Err(Error::validation("empty method list"));
        }
        Ok(KindList(kinds))
    }
}

/// Fully resolved configuration of one run; echoed into the manifest and replayable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Generate {
        generator: GeneratorConfig,
        out: Option<PathBuf>,
    },
    Play {
        game: PathBuf,
        value: ValueSpec,
        protocol: ProtocolConfig,
        trace_out: Option<PathBuf>,
    },
    SolveExact {
        game: PathBuf,
        rounds: u32,
        k: usize,
        max_states: usize,
        max_candidates: usize,
        out: Option<PathBuf>,
    },
    Welfare {
        game: PathBuf,
        objective: WelfareObjective,
        delta: f64,
        out: Option<PathBuf>,
    },
    Sweep {
        grid_file: PathBuf,
        grid: SweepGrid,
        methods: Vec<ValueSpec>,
        protocol: ProtocolConfig,
        jobs: usize,
        out_dir: PathBuf,
    },
    Ingest {
        topfile: PathBuf,
        id: String,
        out: PathBuf,
        names_out: PathBuf,
    },
    LlmPlay {
        game: PathBuf,
        llm: LlmClientConfig,
        mock: Option<PathBuf>,
        protocol: ProtocolConfig,
        trace_out: Option<PathBuf>,
    },
    Compare {
        trace_a: PathBuf,
        trace_b: PathBuf,
        out: Option<PathBuf>,
    },
    Replay {
        run: PathBuf,
    },
}

fn required<T>(name: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::validation(format!("missing required option --{name}")))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn resolve_protocol(cfg: &FileConfig, a: ProtocolArgs, default_rounds: u32) -> Result<ProtocolConfig> {
    let d = ProtocolConfig::default();
    Ok(ProtocolConfig {
        proposer_rounds_per_player: cfg.pick("rounds", a.rounds, default_rounds)?,
        k: cfg.pick("k", a.k, d.k)?,
        mcts_simulations: cfg.pick("mcts_sims", a.mcts_sims, d.mcts_simulations)?,
        mcts_exploration: cfg.pick("mcts_c", a.mcts_c, d.mcts_exploration)?,
        leaf_eval: cfg.pick("leaf_eval", a.leaf_eval, d.leaf_eval)?,
        seed: cfg.pick("seed", a.seed, d.seed)?,
        max_candidates: cfg.pick("max_candidates", a.max_candidates, d.max_candidates)?,
        max_exact_states: cfg.pick("max_states", a.max_states, d.max_exact_states)?,
    })
}

fn pick_path(cfg: &FileConfig, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
    Ok(cfg.pick_opt::<String>(key, flag.map(|p| p.to_string_lossy().into_owned()))?.map(PathBuf::from))
}

pub fn resolve(command: Command, config: Option<&Path>) -> Result<RunConfig> {
    let cfg = FileConfig::load(config, command.name())?;
    Ok(match command {
        Command::Generate(a) => {
            let d = GeneratorConfig::default();
            let lo = cfg.pick_opt("utility_min", a.utility_min)?;
            let hi = cfg.pick_opt("utility_max", a.utility_max)?;
            let utility_range = match (lo, hi) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => return Err(Error::validation("--utility-min and --utility-max go together")),
            };
            let generator = GeneratorConfig {
                num_players: cfg.pick("players", a.players, d.num_players)?,
                actions_per_player: cfg.pick("actions", a.actions, d.actions_per_player)?,
                num_goals: cfg.pick("goals", a.goals, d.num_goals)?,
                latent_dim: cfg.pick("latent_dim", a.latent_dim, d.latent_dim)?,
                alignment: cfg.pick("alignment", a.alignment, d.alignment)?,
                payoff_regime: cfg.pick("regime", a.regime, d.payoff_regime)?,
                utility_range,
                aon_fraction: cfg.pick("aon_fraction", a.aon_fraction, d.aon_fraction)?,
                zipf_alpha: cfg.pick("zipf_alpha", a.zipf_alpha, d.zipf_alpha)?,
                noise_sigma: cfg.pick("noise_sigma", a.noise_sigma, d.noise_sigma)?,
                cooperative_mean: cfg.pick("cooperative_mean", a.cooperative_mean, d.cooperative_mean)?,
                seed: cfg.pick("seed", a.seed, d.seed)?,
            };
            generator.validate()?;
            RunConfig::Generate {
                generator,
                out: pick_path(&cfg, "out", a.out)?,
            }
        }
        Command::Play(a) => {
            let kind = cfg.pick("value", a.value, ValueKind::UpperBound)?;
            let per_player = cfg.pick_opt("per_player", a.per_player)?.map(|l| l.0);
            let protocol = resolve_protocol(&cfg, a.protocol, 1)?;
            protocol.validate()?;
            RunConfig::Play {
                game: required("game", pick_path(&cfg, "game", a.game)?)?,
                value: ValueSpec {
                    kind,
                    per_player,
                    threat_policy: cfg.pick("threat_policy", a.threat_policy, ThreatPolicy::default())?,
                },
                protocol,
                trace_out: pick_path(&cfg, "trace_out", a.trace_out)?,
            }
        }
        Command::SolveExact(a) => {
            let d = ProtocolConfig::default();
            RunConfig::SolveExact {
                game: required("game", pick_path(&cfg, "game", a.game)?)?,
                rounds: cfg.pick("rounds", a.rounds, 1)?,
                k: cfg.pick("k", a.k, d.k)?,
                max_states: cfg.pick("max_states", a.max_states, d.max_exact_states)?,
                max_candidates: cfg.pick("max_candidates", a.max_candidates, d.max_candidates)?,
                out: pick_path(&cfg, "out", a.out)?,
            }
        }
        Command::Welfare(a) => RunConfig::Welfare {
            game: required("game", pick_path(&cfg, "game", a.game)?)?,
            objective: cfg.pick("objective", a.objective, WelfareObjective::Utilitarian)?,
            delta: cfg.pick("delta", a.delta, negobench::solvers::welfare::DEFAULT_DELTA)?,
            out: pick_path(&cfg, "out", a.out)?,
        },
        Command::Sweep(a) => {
            let grid_file = required("grid", pick_path(&cfg, "grid", a.grid)?)?;
            let grid = SweepGrid::from_toml(&std::fs::read_to_string(&grid_file)?)?;
            grid.validate()?;
            let policy = cfg.pick("threat_policy", a.threat_policy, ThreatPolicy::default())?;
            let kinds = cfg.pick("methods", a.methods, KindList(ValueKind::APPROXIMATIONS.to_vec()))?;
            let protocol = resolve_protocol(&cfg, a.protocol, SizeClass::default_rounds(grid.size_class))?;
            protocol.validate()?;
            let jobs_default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
            RunConfig::Sweep {
                grid_file,
                grid,
                methods: kinds
                    .0
                    .into_iter()
                    .map(|kind| ValueSpec {
                        kind,
                        per_player: None,
                        threat_policy: policy,
                    })
                    .collect(),
                protocol,
                jobs: cfg.pick("jobs", a.jobs, jobs_default)?,
                out_dir: required("out-dir", pick_path(&cfg, "out_dir", a.out_dir)?)?,
            }
        }
        Command::Ingest(a) => {
            let topfile = required("topfile", pick_path(&cfg, "topfile", a.topfile)?)?;
            let out = required("out", pick_path(&cfg, "out", a.out)?)?;
            let stem = topfile.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            RunConfig::Ingest {
                id: cfg.pick("id", a.id, stem)?,
                names_out: pick_path(&cfg, "names_out", a.names_out)?.unwrap_or_else(|| with_suffix(&out, ".names.json")),
                topfile,
                out,
            }
        }
        Command::LlmPlay(a) => {
            let d = LlmClientConfig::default();
            let llm = LlmClientConfig {
                endpoint: cfg.pick("endpoint", a.endpoint, d.endpoint)?,
                model: cfg.pick("model", a.model, d.model)?,
                api_key_env: cfg.pick("api_key_env", a.api_key_env, d.api_key_env)?,
                max_retries: cfg.pick("max_retries", a.max_retries, d.max_retries)?,
                backoff_base: cfg.pick("backoff_base", a.backoff_base, d.backoff_base)?,
                backoff_factor: cfg.pick("backoff_factor", a.backoff_factor, d.backoff_factor)?,
                jitter: cfg.pick("jitter", a.jitter, d.jitter)?,
                timeout_secs: cfg.pick("timeout", a.timeout, d.timeout_secs)?,
                k_llm: cfg.pick("k_llm", a.k_llm, d.k_llm)?,
            };
            llm.validate()?;
            let protocol = ProtocolConfig {
                proposer_rounds_per_player: cfg.pick("rounds", a.rounds, 1)?,
                seed: cfg.pick("seed", a.seed, 0)?,
                k: llm.k_llm,
                ..ProtocolConfig::default()
            };
            RunConfig::LlmPlay {
                game: required("game", pick_path(&cfg, "game", a.game)?)?,
                llm,
                mock: pick_path(&cfg, "mock", a.mock)?,
                protocol,
                trace_out: pick_path(&cfg, "trace_out", a.trace_out)?,
            }
        }
        Command::Compare(a) => RunConfig::Compare {
            trace_a: a.trace_a,
            trace_b: a.trace_b,
            out: pick_path(&cfg, "out", a.out)?,
        },
        Command::Replay(a) => RunConfig::Replay { run: a.run },
    })
}

/// Bytes bound for a file, or for stdout when `path` is `None`.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn label(&self) -> String {
        self.path.as_ref().map_or(STDOUT.to_string(), |p| p.display().to_string())
    }
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<Artifact>,
    /// Raised after the artifacts are written.
    pub failure: Option<Error>,
}

impl RunOutput {
    fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(FileHash::of(&path.display().to_string(), &bytes));
        String::from_utf8(bytes).map_err(|_| Error::validation(format!("{} is not UTF-8", path.display())))
    }

    fn read_game(&mut self, path: &Path) -> Result<Game> {
        let text = self.read_input(path)?;
        Game::from_json(&text)
    }

    fn emit(&mut self, path: Option<&Path>, text: String) {
        self.artifacts.push(Artifact {
            path: path.map(Path::to_path_buf),
            bytes: text.into_bytes(),
        });
    }

    /// `text` to `path` when given, otherwise to stdout.
    fn emit_or_stdout(&mut self, path: &Option<PathBuf>, text: String) {
        self.emit(path.as_deref(), text);
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn load_terminal(text: &str) -> Result<Trace> {
    if let Ok(t) = Trace::from_json(text) {
        return Ok(t);
    }
    let llm: LlmTrace = serde_json::from_str(text)
        .map_err(|e| Error::validation(format!("not a trace file: {e}")))?;
    Ok(llm.trace)
}

fn payoff_line(p: &negobench::PayoffVector) -> String {
    p.values().iter().map(negobench::rational::format_rational).collect::<Vec<_>>().join(" ")
}

pub fn primary_output(config: &RunConfig) -> Option<PathBuf> {
    match config {
        RunConfig::Generate { out, .. }
        | RunConfig::SolveExact { out, .. }
        | RunConfig::Welfare { out, .. }
        | RunConfig::Compare { out, .. } => out.clone(),
        RunConfig::Play { trace_out, .. } | RunConfig::LlmPlay { trace_out, .. } => trace_out.clone(),
        RunConfig::Sweep { out_dir, .. } => Some(out_dir.join("run")),
        RunConfig::Ingest { out, .. } => Some(out.clone()),
        RunConfig::Replay { .. } => None,
    }
}

pub fn command_name(config: &RunConfig) -> &'static str {
    match config {
        RunConfig::Generate { .. } => "generate",
        RunConfig::Play { .. } => "play",
        RunConfig::SolveExact { .. } => "solve-exact",
        RunConfig::Welfare { .. } => "welfare",
        RunConfig::Sweep { .. } => "sweep",
        RunConfig::Ingest { .. } => "ingest",
        RunConfig::LlmPlay { .. } => "llm-play",
        RunConfig::Compare { .. } => "compare",
        RunConfig::Replay { .. } => "replay",
    }
}

pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    match config {
        RunConfig::Generate { generator, out: path } => {
            let game = generate_game(generator)?;
            out.emit_or_stdout(path, game.to_json());
        }
        RunConfig::Play {
            game,
            value,
            protocol,
            trace_out,
        } => {
            let game = out.read_game(game)?;
            let trace = play_with_spec(&game, value, protocol)?;
            let accepted = trace.turns.iter().filter(|t| t.accepted).count();
            if let Some(p) = trace_out {
                out.emit(Some(p), trace.to_json());
            }
            out.emit(
                None,
                format!(
                    "value: {}\naccepted: {accepted}/{}\nterminal: {}\n",
                    value.label(),
                    trace.turns.len(),
                    payoff_line(&trace.terminal)
                ),
            );
        }
        RunConfig::SolveExact {
            game,
            rounds,
            k,
            max_states,
            max_candidates,
            out: path,
        } => {
            let game = out.read_game(game)?;
            let mut cfg = ExactConfig::new(rounds * game.num_players() as u32, *k);
            cfg.limits.max_states = *max_states;
            cfg.limits.max_candidates = *max_candidates;
            let payoffs = optimal_payoffs(&game, cfg)?;
            let body = serde_json::json!({
                "horizon": cfg.horizon,
                "k": k,
                "payoffs": payoffs,
            });
            out.emit_or_stdout(path, pretty(&body)?);
        }
        RunConfig::Welfare {
            game,
            objective,
            delta,
            out: path,
        } => {
            let game = out.read_game(game)?;
            let solution = solve_welfare(&game, *objective, *delta)?;
            out.emit_or_stdout(path, pretty(&solution)?);
        }
        RunConfig::Sweep {
            grid_file,
            grid,
            methods,
            protocol,
            jobs,
            out_dir,
        } => {
            let text = out.read_input(grid_file)?;
            if SweepGrid::from_toml(&text)? != *grid {
                return Err(Error::validation("grid file changed since the configuration was resolved"));
            }
            let table = par::with_jobs(*jobs, |exec| run_sweep(grid, methods, protocol, exec))??;
            let tmp = tempfile::tempdir()?;
            let files = emit_report(&table, tmp.path())?;
            for f in [&files.raw_csv, &files.summary_csv, &files.summary_json] {
                let name = f.file_name().expect("report file name");
                out.artifacts.push(Artifact {
                    path: Some(out_dir.join(name)),
                    bytes: std::fs::read(f)?,
                });
            }
            let errors = table.rows.iter().filter(|r| r.error.is_some()).count();
            out.emit(
                None,
                format!(
                    "cells: {}\nrows: {}\nerror rows: {errors}\nreport: {}\n",
                    grid.cells().len(),
                    table.rows.len(),
                    out_dir.display()
                ),
            );
        }
        RunConfig::Ingest {
            topfile,
            id,
            out: path,
            names_out,
        } => {
            let text = out.read_input(topfile)?;
            let tf = parse_topfile(&text)?;
            let converted = topfile_to_game(&tf, id)?;
            for g in &converted.names.unreferenced_goals {
                log::warn!("goal {g:?} has no satisfaction tuples and was dropped");
            }
            out.emit(Some(path), converted.game.to_json());
            out.emit(Some(names_out), pretty(&converted.names)?);
            out.emit(
                None,
                format!(
                    "players: {}\ngoals: {}\nslots: {}\nexclusions: {}\ndropped goals: {}\n",
                    converted.game.num_players(),
                    converted.game.num_goals(),
                    converted.game.total_slots(),
                    converted.game.exclusions().len(),
                    converted.names.unreferenced_goals.len()
                ),
            );
        }
        RunConfig::LlmPlay {
            game,
            llm,
            mock,
            protocol,
            trace_out,
        } => {
            let game = out.read_game(game)?;
            let mut client = match mock {
                Some(script) => {
                    let script = MockScript::from_json(&out.read_input(script)?)?;
                    LlmClient::new(
                        llm.clone(),
                        Box::new(MockTransport::new(script)),
                        Box::new(RecordingSleeper::default()),
                    )?
                }
                None => LlmClient::http(llm.clone())?,
            };
            let trace = llm_play_game(&game, &mut client, protocol)?;
            let degraded = trace.turns.iter().filter(|t| t.degraded).count();
            out.emit_or_stdout(trace_out, pretty(&trace)?);
            if trace_out.is_some() {
                out.emit(
                    None,
                    format!(
                        "model: {}\ndegraded turns: {degraded}/{}\nterminal: {}\n",
                        trace.model,
                        trace.turns.len(),
                        payoff_line(&trace.trace.terminal)
                    ),
                );
            }
            if !trace.turns.is_empty() && degraded == trace.turns.len() {
                out.failure = Some(Error::ExternalService(format!(
                    "every model request failed ({} turns degraded to empty offers)",
                    degraded
                )));
            }
        }
        RunConfig::Compare { trace_a, trace_b, out: path } => {
            let a = load_terminal(&out.read_input(trace_a)?)?;
            let b = load_terminal(&out.read_input(trace_b)?)?;
            if a.game_hash != b.game_hash {
                log::warn!("traces were recorded on different games ({} vs {})", a.game_hash, b.game_hash);
            }
            let stats = improvement_stats(&a.terminal, &b.terminal)?;
            out.emit_or_stdout(path, pretty(&stats)?);
        }
        RunConfig::Replay { run } => {
            out.read_input(run)?;
            let manifest = RunManifest::read(run)?;
            out.emit(None, replay(&manifest)?);
        }
    }
    Ok(out)
}

/// Re-runs a manifest without touching the filesystem outputs and compares hashes.
fn replay(manifest: &RunManifest) -> Result<String> {
    if matches!(manifest.config, RunConfig::Replay { .. }) {
        return Err(Error::validation("cannot replay a replay manifest"));
    }
    if manifest.exit_code != 0 {
        return Err(Error::validation("the recorded run did not succeed; nothing to reproduce"));
    }
    let again = execute(&manifest.config)?;
    let mut report = String::new();
    let mut mismatches = 0;
    for recorded in &manifest.inputs {
        let now = again.inputs.iter().find(|h| h.path == recorded.path);
        if now.map(|h| &h.sha256) != Some(&recorded.sha256) {
            mismatches += 1;
            report.push_str(&format!("input changed: {}\n", recorded.path));
        }
    }
    for recorded in &manifest.outputs {
        let now = again.artifacts.iter().find(|a| a.label() == recorded.path);
        match now {
            Some(a) if FileHash::of(&recorded.path, &a.bytes) == *recorded => {
                report.push_str(&format!("identical: {}\n", recorded.path));
            }
            _ => {
                mismatches += 1;
                report.push_str(&format!("differs: {}\n", recorded.path));
            }
        }
    }
    if mismatches > 0 {
        return Err(Error::validation(format!("replay diverged:\n{report}")));
    }
    report.push_str(&format!("replay ok: {} outputs reproduced\n", manifest.outputs.len()));
    Ok(report)
}
