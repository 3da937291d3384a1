//! Zero-shot language-model negotiator over a chat-completions style endpoint.
//!
//! Each turn the model receives the instructions, the static game description and
//! the current state, and replies with a partner and a joint update. Replies are
//! validated before they reach the engine: invalid partners become a random legal
//! partner, invalid action vectors become empty. Transport failures and unparseable
//! replies are retried with exponential backoff; a turn that exhausts its retries is
//! degraded to a random partner with no offer. The engine decides acceptance with the
//! partner's myopic reward.

use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game, GoalKind};
use crate::protocol::{JointUpdate, ProtocolConfig, Trace, TurnRecord};
use crate::rational;
use crate::rng::{stream, stream_rng, StreamRng};
use crate::values::{ValueKind, ValueSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// Versioned system prompt; `{k}` is replaced by the commitment budget.
pub const PROMPT_V1: &str = include_str!("../../prompts/negotiator_v1.md");
pub const PROMPT_VERSION: &str = "negotiator_v1";

/// Truncated SHA-256 of the prompt template.
pub fn prompt_hash() -> String {
    hex::encode(&Sha256::digest(PROMPT_V1.as_bytes())[..8])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_retries: u32,
    /// Seconds before the first retry.
    pub backoff_base: f64,
    pub backoff_factor: f64,
    /// Relative jitter: each wait is scaled by a uniform factor in [1 - jitter, 1 + jitter].
    pub jitter: f64,
    pub timeout_secs: f64,
    /// Commitment budget per side.
    pub k_llm: usize,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        LlmClientConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-5-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            backoff_base: 1.0,
            backoff_factor: 2.0,
            jitter: 0.1,
            timeout_secs: 60.0,
            k_llm: 3,
        }
    }
}

impl LlmClientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_llm < 1 {
            return Err(Error::validation("k_llm must be at least 1"));
        }
        if !(self.backoff_base >= 0.0 && self.backoff_factor >= 1.0 && (0.0..=1.0).contains(&self.jitter)) {
            return Err(Error::validation(
                "backoff_base must be >= 0, backoff_factor >= 1 and jitter within [0, 1]",
            ));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::validation("timeout_secs must be positive"));
        }
        Ok(())
    }

    /// Nominal wait before retry `i` (0-based), without jitter.
    pub fn nominal_backoff(&self, i: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base * self.backoff_factor.powi(i as i32))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub response_format: Value,
}

/// Sends a chat request and returns the assistant message text.
pub trait Transport {
    fn complete(&mut self, request: &ChatRequest) -> std::result::Result<String, String>;
}

pub trait Sleeper {
    fn sleep(&mut self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records waits instead of sleeping.
#[derive(Clone, Default)]
pub struct RecordingSleeper {
    pub log: Arc<Mutex<Vec<Duration>>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&mut self, d: Duration) {
        self.log.lock().expect("sleep log").push(d);
    }
}

/// Blocking HTTP transport with bearer authentication.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(config: &LlmClientConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        HttpTransport {
            agent,
            endpoint: config.endpoint.clone(),
            api_key: std::env::var(&config.api_key_env).ok(),
        }
    }
}

impl Transport for HttpTransport {
    fn complete(&mut self, request: &ChatRequest) -> std::result::Result<String, String> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| e.to_string())?;
        let body: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

/// One scripted reply: either message content (a string or any JSON value) or a failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Content { content: Value },
    Failure { error: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub replies: Vec<MockReply>,
    /// Restart from the first reply when exhausted; otherwise further calls fail.
    #[serde(default)]
    pub cycle: bool,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<MockScript> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Deterministic local responder that replays a script and records every request.
#[derive(Clone, Default)]
pub struct MockTransport {
    script: MockScript,
    next: usize,
    pub requests: Arc<Mutex<Vec<ChatRequest>>>,
}

impl MockTransport {
    pub fn new(script: MockScript) -> Self {
        MockTransport {
            script,
            next: 0,
            requests: Arc::default(),
        }
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().expect("request log").len()
    }
}

impl Transport for MockTransport {
    fn complete(&mut self, request: &ChatRequest) -> std::result::Result<String, String> {
        self.requests.lock().expect("request log").push(request.clone());
        let n = self.script.replies.len();
        if n == 0 || (self.next >= n && !self.script.cycle) {
            return Err("mock script exhausted".into());
        }
        let reply = self.script.replies[self.next % n].clone();
        self.next += 1;
        match reply {
            MockReply::Content { content: Value::String(s) } => Ok(s),
            MockReply::Content { content } => Ok(content.to_string()),
            MockReply::Failure { error } => Err(error),
        }
    }
}

pub struct LlmClient {
    pub config: LlmClientConfig,
    transport: Box<dyn Transport>,
    sleeper: Box<dyn Sleeper>,
}

impl LlmClient {
    pub fn new(config: LlmClientConfig, transport: Box<dyn Transport>, sleeper: Box<dyn Sleeper>) -> Result<Self> {
        config.validate()?;
        Ok(LlmClient {
            config,
            transport,
            sleeper,
        })
    }

    pub fn http(config: LlmClientConfig) -> Result<Self> {
        let transport = HttpTransport::new(&config);
        LlmClient::new(config, Box::new(transport), Box::new(ThreadSleeper))
    }
}

/// The reply shape the model must produce.
#[derive(Clone, Debug, Deserialize)]
struct RawOffer {
    partner: i64,
    proposer_actions: Vec<i64>,
    partner_actions: Vec<i64>,
}

fn response_format() -> Value {
    let vector = json!({"type": "array", "items": {"type": "integer", "enum": [0, 1]}});
    json!({
        "type": "json_schema",
        "json_schema": {
            "name": "joint_offer",
            "strict": true,
            "schema": {
                "type": "object",
                "properties": {
                    "partner": {"type": "integer"},
                    "proposer_actions": vector,
                    "partner_actions": vector,
                },
                "required": ["partner", "proposer_actions", "partner_actions"],
                "additionalProperties": false,
            }
        }
    })
}

/// Game topology, goal values and satisfaction masks.
pub fn static_context(game: &Game) -> String {
    let goals: Vec<Value> = game
        .goals()
        .iter()
        .enumerate()
        .map(|(g, goal)| {
            let values: Vec<String> = (0..game.num_players())
                .map(|p| {
                    rational::format_rational(&crate::Rational::new(
                        game.utility(g, p) as i128,
                        game.utility_scale() as i128,
                    ))
                })
                .collect();
            json!({
                "id": goal.id,
                "kind": match goal.kind {
                    GoalKind::Linear => "linear",
                    GoalKind::AllOrNothing => "all_or_nothing",
                },
                "required": goal.required.iter().map(|s| [s.player, s.action]).collect::<Vec<_>>(),
                "values": values,
            })
        })
        .collect();
    let ctx = json!({
        "num_players": game.num_players(),
        "actions_per_player": game.actions_per_player(),
        "goals": goals,
        "mutually_exclusive": game.exclusions().iter()
            .map(|set| set.iter().map(|s| [s.player, s.action]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    });
    format!("Game:\n{ctx}")
}

pub fn dynamic_context(game: &Game, state: &CommitmentState, proposer: usize) -> String {
    let ctx = json!({
        "turn": state.turn,
        "proposer": proposer,
        "commitments": game.state_rows(state),
    });
    format!("Current state:\n{ctx}")
}

pub fn build_request(game: &Game, state: &CommitmentState, proposer: usize, config: &LlmClientConfig) -> ChatRequest {
    ChatRequest {
        model: config.model.clone(),
        messages: vec![
            ChatMessage {
                role: "system".into(),
                content: PROMPT_V1.replace("{k}", &config.k_llm.to_string()),
            },
            ChatMessage {
                role: "user".into(),
                content: static_context(game),
            },
            ChatMessage {
                role: "user".into(),
                content: dynamic_context(game, state, proposer),
            },
        ],
        response_format: response_format(),
    }
}

fn parse_offer(text: &str) -> Option<RawOffer> {
    let t = text.trim();
    let t = t
        .strip_prefix("```json")
        .or_else(|| t.strip_prefix("```"))
        .map(|s| s.trim_end().trim_end_matches("```"))
        .unwrap_or(t);
    serde_json::from_str(t.trim()).ok()
}

/// Outcome and audit log of one language-model turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmTurn {
    pub partner: usize,
    pub update: JointUpdate,
    pub attempts: u32,
    /// Raw replies, or `error: ...` for failed attempts, in order.
    pub replies: Vec<String>,
    /// Waits before each retry, in seconds.
    pub backoff_secs: Vec<f64>,
    /// Validation overrides applied to the parsed reply.
    pub corrections: Vec<String>,
    /// True when every attempt failed.
    pub degraded: bool,
}

fn random_partner(np: usize, proposer: usize, rng: &mut StreamRng) -> usize {
    let r = rng.random_range(0..np - 1);
    if r >= proposer {
        r + 1
    } else {
        r
    }
}

/// Converts a 0/1 vector into action indices, or explains why it is invalid.
fn check_vector(
    game: &Game,
    state: &CommitmentState,
    player: usize,
    v: &[i64],
    k: usize,
) -> std::result::Result<Vec<usize>, String> {
    if v.len() != game.num_actions(player) {
        return Err(format!(
            "player {player} vector has {} entries, expected {}",
            v.len(),
            game.num_actions(player)
        ));
    }
    let mut adds = Vec::new();
    for (a, &x) in v.iter().enumerate() {
        match x {
            0 => {}
            1 if state.is_committed(game, player, a) => {
                return Err(format!("player {player} action {a} is already committed"));
            }
            1 => adds.push(a),
            other => return Err(format!("player {player} vector has entry {other}")),
        }
    }
    if adds.len() > k {
        return Err(format!("player {player} adds {} commitments, budget is {k}", adds.len()));
    }
    Ok(adds)
}

fn validate_offer(
    game: &Game,
    state: &CommitmentState,
    proposer: usize,
    raw: &RawOffer,
    k: usize,
    rng: &mut StreamRng,
    corrections: &mut Vec<String>,
) -> (usize, JointUpdate) {
    let np = game.num_players();
    let partner = if raw.partner >= 0 && (raw.partner as usize) < np && raw.partner as usize != proposer {
        raw.partner as usize
    } else {
        let p = random_partner(np, proposer, rng);
        corrections.push(format!("invalid partner {}; using random partner {p}", raw.partner));
        p
    };
    let mut side = |player: usize, v: &[i64]| match check_vector(game, state, player, v, k) {
        Ok(adds) => adds,
        Err(why) => {
            corrections.push(format!("{why}; zeroed"));
            Vec::new()
        }
    };
    let mut update = JointUpdate {
        proposer: side(proposer, &raw.proposer_actions),
        partner: side(partner, &raw.partner_actions),
    };
    if !update.is_empty() && update.apply(game, state, proposer, partner, k).is_err() {
        corrections.push("update completes a mutually exclusive set; zeroed".into());
        update = JointUpdate {
            proposer: vec![],
            partner: vec![],
        };
    }
    (partner, update)
}

/// Asks the model for this turn's partner and offer, with retries and validation.
pub fn llm_play_turn(
    game: &Game,
    state: &CommitmentState,
    proposer: usize,
    client: &mut LlmClient,
    rng: &mut StreamRng,
) -> Result<LlmTurn> {
    game.check_state(state)?;
    if proposer >= game.num_players() {
        return Err(Error::validation("proposer outside the game"));
    }
    let cfg = client.config.clone();
    let request = build_request(game, state, proposer, &cfg);
    let mut turn = LlmTurn {
        partner: 0,
        update: JointUpdate {
            proposer: vec![],
            partner: vec![],
        },
        attempts: 0,
        replies: vec![],
        backoff_secs: vec![],
        corrections: vec![],
        degraded: false,
    };
    for attempt in 0..=cfg.max_retries {
        if attempt > 0 {
            let u: f64 = rng.random_range(-1.0..=1.0);
            let wait = cfg.nominal_backoff(attempt - 1).mul_f64(1.0 + cfg.jitter * u);
            turn.backoff_secs.push(wait.as_secs_f64());
            client.sleeper.sleep(wait);
        }
        turn.attempts += 1;
        match client.transport.complete(&request) {
            Ok(text) => {
                let parsed = parse_offer(&text);
                turn.replies.push(text);
                if let Some(raw) = parsed {
                    let (partner, update) = validate_offer(game, state, proposer, &raw, cfg.k_llm, rng, &mut turn.corrections);
                    turn.partner = partner;
                    turn.update = update;
                    return Ok(turn);
                }
                log::warn!("unparseable model reply on turn {} (attempt {})", state.turn, turn.attempts);
            }
            Err(e) => {
                log::warn!("model request failed on turn {} (attempt {}): {e}", state.turn, turn.attempts);
                turn.replies.push(format!("error: {e}"));
            }
        }
    }
    turn.degraded = true;
    turn.partner = random_partner(game.num_players(), proposer, rng);
    Ok(turn)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmTrace {
    pub trace: Trace,
    pub model: String,
    pub prompt_version: String,
    pub prompt_hash: String,
    pub turns: Vec<LlmTurn>,
}

/// Plays the full game with the model proposing every turn. An offer is applied when it
/// is non-empty and the partner's myopic reward weakly improves.
pub fn llm_play_game(game: &Game, client: &mut LlmClient, config: &ProtocolConfig) -> Result<LlmTrace> {
    let config = ProtocolConfig {
        k: client.config.k_llm,
        ..config.clone()
    };
    config.validate()?;
    let np = game.num_players();
    let horizon = config.horizon(game);
    let mut state = game.empty_state();
    let mut records = Vec::with_capacity(horizon as usize);
    let mut turns = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        state.turn = t;
        let proposer = t as usize % np;
        let mut rng = stream_rng(config.seed, stream::LLM_BASE + t as u64);
        let turn = llm_play_turn(game, &state, proposer, client, &mut rng)?;
        let mut accepted = false;
        if !turn.update.is_empty() {
            let bits = turn.update.apply(game, &state, proposer, turn.partner, config.k)?;
            if game.reward_scaled(&bits, turn.partner) >= game.reward_scaled(&state.bits, turn.partner) {
                state.bits = bits;
                accepted = true;
            }
        }
        records.push(TurnRecord {
            turn: t,
            proposer,
            partner: Some(turn.partner),
            offer: (!turn.update.is_empty()).then(|| turn.update.clone()),
            accepted,
            state_after: game.state_rows(&state),
        });
        turns.push(turn);
    }
    state.turn = horizon;
    let terminal = game.reward_vector(&state)?;
    Ok(LlmTrace {
        trace: Trace {
            game_hash: game.content_hash(),
            value: ValueSpec::new(ValueKind::MyopicReward),
            config,
            turns: records,
            terminal,
        },
        model: client.config.model.clone(),
        prompt_version: PROMPT_VERSION.into(),
        prompt_hash: prompt_hash(),
        turns,
    })
}
