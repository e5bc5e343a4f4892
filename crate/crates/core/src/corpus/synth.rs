//! Synthetic ticket generator standing in for a proprietary chat corpus.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::library::ScriptLibrary;
use super::{fill_placeholders, segment, CorpusStats, Placeholder, Role, Round, Speaker, Ticket, TicketMeta, Turn};
use crate::error::{Error, Result};

/// Reference (value, value) pairs for mean rounds, turns and messages per
/// ticket. The generator is considered on target when each observed mean lies
/// within `tolerance` (relative) of either value of its pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeTargets {
    pub rounds: [f64; 2],
    pub turns: [f64; 2],
    pub messages: [f64; 2],
    pub tolerance: f64,
}

impl Default for ShapeTargets {
    fn default() -> Self {
        ShapeTargets {
            rounds: [4.7, 4.0],
            turns: [7.9, 7.0],
            messages: [17.4, 14.0],
            tolerance: 0.15,
        }
    }
}

impl ShapeTargets {
    /// Returns one message per statistic that misses its target.
    pub fn violations(&self, stats: &CorpusStats) -> Vec<String> {
        let checks = [
            ("rounds", stats.rounds.mean, self.rounds),
            ("turns", stats.turns.mean, self.turns),
            ("messages", stats.messages.mean, self.messages),
        ];
        checks
            .into_iter()
            .filter(|(_, mean, pair)| {
                !pair
                    .iter()
                    .any(|target| (mean - target).abs() <= self.tolerance * target)
            })
            .map(|(name, mean, pair)| {
                format!("mean {name} {mean:.2} not within {:.0}% of {pair:?}", self.tolerance * 100.0)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_tickets: usize,
    pub n_issues: usize,
    /// Probability that a customer reply carries no information.
    pub ambiguity_rate: f64,
    pub missing_issue_rate: f64,
    /// Probability that a ticket ends before its script is finished.
    pub early_stop_rate: f64,
    /// Probability that the agent asks the next two script questions at once.
    pub multi_question_rate: f64,
    /// Probability that the agent asks a random question of the issue instead
    /// of the scripted one.
    pub off_script_rate: f64,
    pub status_check_rate: f64,
    pub greeting_courtesy_rate: f64,
    pub closing_rate: f64,
    /// Probability of using a non-question paraphrase when one exists.
    pub paraphrase_rate: f64,
    pub filler_rate: f64,
    /// Probability that a sentence after the first starts a new message.
    pub message_split_rate: f64,
    pub nudge_rate: f64,
    /// Truncates every script to at most this many investigative steps.
    pub max_script_steps: Option<usize>,
    pub targets: ShapeTargets,
    #[serde(skip_serializing_if = "is_default_library")]
    pub library: ScriptLibrary,
}

fn is_default_library(lib: &ScriptLibrary) -> bool {
    *lib == ScriptLibrary::default()
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let library = ScriptLibrary::default();
        SyntheticSpec {
            n_tickets: 2000,
            n_issues: library.issues.len(),
            ambiguity_rate: 0.5,
            missing_issue_rate: 0.1,
            early_stop_rate: 0.2,
            multi_question_rate: 0.1,
            off_script_rate: 0.15,
            status_check_rate: 0.15,
            greeting_courtesy_rate: 0.5,
            closing_rate: 0.8,
            paraphrase_rate: 0.15,
            filler_rate: 0.5,
            message_split_rate: 0.8,
            nudge_rate: 0.3,
            max_script_steps: None,
            targets: ShapeTargets::default(),
            library,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.library.validate()?;
        if self.n_issues == 0 || self.n_issues > self.library.issues.len() {
            return Err(Error::Validation(format!(
                "n_issues must be in 1..={}, got {}",
                self.library.issues.len(),
                self.n_issues
            )));
        }
        let rates = [
            ("ambiguity_rate", self.ambiguity_rate),
            ("missing_issue_rate", self.missing_issue_rate),
            ("early_stop_rate", self.early_stop_rate),
            ("multi_question_rate", self.multi_question_rate),
            ("off_script_rate", self.off_script_rate),
            ("status_check_rate", self.status_check_rate),
            ("greeting_courtesy_rate", self.greeting_courtesy_rate),
            ("closing_rate", self.closing_rate),
            ("paraphrase_rate", self.paraphrase_rate),
            ("filler_rate", self.filler_rate),
            ("message_split_rate", self.message_split_rate),
            ("nudge_rate", self.nudge_rate),
        ];
        for (name, value) in rates {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Validation(format!("{name} must be in [0, 1], got {value}")));
            }
        }
        if self.max_script_steps == Some(0) {
            return Err(Error::Validation("max_script_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskedIntent {
    pub intent_id: usize,
    /// The anonymized surface form used.
    pub surface: String,
    pub paraphrase: bool,
}

/// Ground truth for one round that has an agent turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTruth {
    pub round_index: usize,
    pub intent_ids: Vec<usize>,
    pub asked: Vec<AskedIntent>,
    /// Planted courtesy and status-checking questions.
    pub courtesy: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketTruth {
    pub ticket_id: String,
    /// The true issue, known even when the ticket's metadata omits it.
    pub issue_id: usize,
    pub subtype: String,
    pub rounds: Vec<RoundTruth>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub tickets: Vec<Ticket>,
    pub truth: Vec<TicketTruth>,
}

const CUSTOMER_NAMES: &[&str] = &[
    "Ana", "John", "Priya", "Lukas", "Mei", "Omar", "Sofia", "Daniel", "Chloe", "Kenji", "Fatima",
    "Marco", "Elena", "Aisha", "Ravi", "Ingmar",
];
const AGENT_NAMES: &[&str] = &["Maria", "Kevin", "Greta", "Samuel", "Nadia", "Viktor"];
const HOST_NAMES: &[&str] = &["Pierre", "Hannah", "Giulia", "Mateo", "Ingrid", "Yusuf", "Camille", "Tobias"];
const CODE_ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [String]) -> &'a str {
    items.choose(rng).map(String::as_str).unwrap_or_default()
}

fn random_meta(rng: &mut ChaCha8Rng, ticket_id: String, issue_id: Option<usize>) -> TicketMeta {
    let mut party_names = BTreeMap::new();
    party_names.insert(Role::Customer, CUSTOMER_NAMES.choose(rng).unwrap().to_string());
    party_names.insert(Role::Agent, AGENT_NAMES.choose(rng).unwrap().to_string());
    party_names.insert(Role::Host, HOST_NAMES.choose(rng).unwrap().to_string());

    let code: String = (0..8)
        .map(|_| *CODE_ALPHABET.choose(rng).unwrap() as char)
        .collect();
    let mut fill_values = BTreeMap::new();
    fill_values.insert(Placeholder::ReservationCode, format!("HM{code}"));
    fill_values.insert(Placeholder::CardLast4, format!("{:04}", rng.random_range(1000..10000)));
    fill_values.insert(Placeholder::Email, format!("guest{}@example.com", rng.random_range(1000..100000)));
    fill_values.insert(Placeholder::PhoneNumber, format!("+1 415-555-{:04}", rng.random_range(0..10000)));
    fill_values.insert(
        Placeholder::Url,
        format!("https://www.example.com/rooms/{}", rng.random_range(10000..1000000)),
    );
    fill_values.insert(
        Placeholder::Amount,
        format!("${}.{:02}", rng.random_range(20..1500), rng.random_range(0..100)),
    );
    fill_values.insert(
        Placeholder::Timestamp,
        format!(
            "2023-{:02}-{:02} {:02}:{:02}",
            rng.random_range(1..=12),
            rng.random_range(1..=28),
            rng.random_range(0..24),
            rng.random_range(0..60)
        ),
    );
    TicketMeta {
        ticket_id,
        issue_id,
        party_names,
        fill_values,
    }
}

/// Independent per-ticket stream so tickets can be generated in any order.
fn ticket_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

struct TicketBuilder<'a> {
    spec: &'a SyntheticSpec,
    meta: TicketMeta,
    rounds: Vec<Round>,
    truth: Vec<RoundTruth>,
}

impl TicketBuilder<'_> {
    fn messages(&self, rng: &mut ChaCha8Rng, templates: &[String]) -> Vec<String> {
        let mut messages: Vec<String> = Vec::new();
        for template in templates {
            let text = fill_placeholders(template, &self.meta).text;
            match messages.last_mut() {
                Some(last) if !rng.random_bool(self.spec.message_split_rate) => {
                    last.push(' ');
                    last.push_str(&text);
                }
                _ => messages.push(text),
            }
        }
        messages
    }

    fn push(&mut self, rng: &mut ChaCha8Rng, agent: Option<(Vec<String>, RoundTruth)>, customer: Vec<String>) {
        let index = self.rounds.len() + 1;
        let agent = agent.map(|(sentences, mut truth)| {
            truth.round_index = index;
            self.truth.push(truth);
            Turn::new(Speaker::Agent, self.messages(rng, &sentences))
        });
        let customer = Turn::new(Speaker::Customer, self.messages(rng, &customer));
        self.rounds.push(Round { index, agent, customer });
    }
}

fn empty_truth() -> RoundTruth {
    RoundTruth {
        round_index: 0,
        intent_ids: Vec::new(),
        asked: Vec::new(),
        courtesy: Vec::new(),
    }
}

fn generate_ticket(spec: &SyntheticSpec, seed: u64, index: usize) -> (Ticket, TicketTruth) {
    let lib = &spec.library;
    let mut rng = ticket_rng(seed, index);
    let issue_id = rng.random_range(0..spec.n_issues);
    let issue = &lib.issues[issue_id];
    let subtype = issue.subtypes.choose(&mut rng).expect("validated subtypes");

    let mut pool: Vec<usize> = issue.subtypes.iter().flat_map(|s| s.path.iter().copied()).collect();
    pool.sort_unstable();
    pool.dedup();
    let mut path = subtype.path.clone();
    if let Some(max) = spec.max_script_steps {
        path.truncate(max);
    }
    if path.len() > 1 && rng.random_bool(spec.early_stop_rate) {
        let keep = rng.random_range(1..path.len());
        path.truncate(keep);
    }

    let ticket_id = format!("t{index:06}");
    let visible_issue = (!rng.random_bool(spec.missing_issue_rate)).then_some(issue_id);
    let meta = random_meta(&mut rng, ticket_id.clone(), visible_issue);
    let mut b = TicketBuilder {
        spec,
        meta,
        rounds: Vec::new(),
        truth: Vec::new(),
    };

    let mut opener: Vec<String> = segment(pick(&mut rng, &subtype.openers))
        .into_iter()
        .map(|s| s.text)
        .collect();
    if rng.random_bool(spec.nudge_rate) {
        opener.push(pick(&mut rng, &lib.customer_nudges).to_string());
    }
    b.push(&mut rng, None, opener);

    let mut step = 0;
    while step < path.len() {
        let first = step == 0;
        if !first && rng.random_bool(spec.status_check_rate) {
            let form = lib.status_check.forms().collect::<Vec<_>>().choose(&mut rng).unwrap().to_string();
            let mut sentences = Vec::new();
            if rng.random_bool(spec.filler_rate) {
                sentences.push(pick(&mut rng, &lib.agent_fillers).to_string());
            }
            sentences.push(form.clone());
            let truth = RoundTruth {
                courtesy: vec![form],
                ..empty_truth()
            };
            let reply = vec![pick(&mut rng, &lib.status_replies).to_string()];
            b.push(&mut rng, Some((sentences, truth)), reply);
        }

        let mut sentences = Vec::new();
        let mut truth = empty_truth();
        if first {
            sentences.push(pick(&mut rng, &lib.agent_intros).to_string());
            if rng.random_bool(spec.greeting_courtesy_rate) {
                let form = lib.greeting.forms().collect::<Vec<_>>().choose(&mut rng).unwrap().to_string();
                sentences.push(form.clone());
                truth.courtesy.push(form);
            }
        } else if rng.random_bool(spec.filler_rate) {
            sentences.push(pick(&mut rng, &lib.agent_fillers).to_string());
        }
        let take = if step + 1 < path.len() && rng.random_bool(spec.multi_question_rate) { 2 } else { 1 };
        let mut asked = path[step..step + take].to_vec();
        for intent_id in &mut asked {
            if rng.random_bool(spec.off_script_rate) {
                *intent_id = *pool.choose(&mut rng).expect("non-empty issue pool");
            }
        }
        asked.dedup();
        for &intent_id in &asked {
            let intent = &lib.intents[intent_id];
            let paraphrase = !intent.paraphrases.is_empty() && rng.random_bool(spec.paraphrase_rate);
            let surface = if paraphrase {
                pick(&mut rng, &intent.paraphrases)
            } else {
                pick(&mut rng, &intent.variants)
            }
            .to_string();
            sentences.push(surface.clone());
            truth.intent_ids.push(intent_id);
            truth.asked.push(AskedIntent {
                intent_id,
                surface,
                paraphrase,
            });
        }

        let mut reply = Vec::new();
        if rng.random_bool(spec.ambiguity_rate) {
            reply.push(pick(&mut rng, &lib.generic_replies).to_string());
        } else {
            for &intent_id in &asked {
                reply.push(pick(&mut rng, &lib.intents[intent_id].answers).to_string());
            }
            reply.push(pick(&mut rng, &subtype.reminders).to_string());
        }
        if rng.random_bool(spec.nudge_rate / 2.0) {
            reply.push(pick(&mut rng, &lib.customer_nudges).to_string());
        }
        b.push(&mut rng, Some((sentences, truth)), reply);
        step += take;
    }

    if rng.random_bool(spec.closing_rate) {
        let form = lib.closing.forms().collect::<Vec<_>>().choose(&mut rng).unwrap().to_string();
        let sentences = vec![pick(&mut rng, &lib.agent_wrapups).to_string(), form.clone()];
        let truth = RoundTruth {
            courtesy: vec![form],
            ..empty_truth()
        };
        let reply = vec![pick(&mut rng, &lib.closing_replies).to_string()];
        b.push(&mut rng, Some((sentences, truth)), reply);
    }

    let ticket = Ticket {
        meta: b.meta,
        rounds: b.rounds,
    };
    let truth = TicketTruth {
        ticket_id,
        issue_id,
        subtype: subtype.name.clone(),
        rounds: b.truth,
    };
    (ticket, truth)
}

/// Generates `spec.n_tickets` tickets. Each ticket draws from its own random
/// stream derived from `seed` and its index.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let (tickets, truth) = (0..spec.n_tickets)
        .map(|i| generate_ticket(spec, seed, i))
        .unzip();
    Ok(SyntheticCorpus { tickets, truth })
}

const PII_TEMPLATES: &[&str] = &[
    "Hi {customer name}, this is {agent name} from support.",
    "Your host {host name} asked about the booking.",
    "We emailed {email} and texted {phone number}.",
    "The card ending in {card last4} was charged {amount}.",
    "Check {url} for details.",
    "Your check-in is at {timestamp}.",
    "The reservation code is {reservation code}.",
    "{customer name}, did {host name} reply?",
];

/// Random texts with personal information and the metadata describing it,
/// paired with the anonymized text they should map to.
pub fn pii_fixtures(n: usize, seed: u64) -> Vec<(String, String, TicketMeta)> {
    (0..n)
        .map(|i| {
            let mut rng = ticket_rng(seed, i);
            let meta = random_meta(&mut rng, format!("f{i}"), None);
            let count = rng.random_range(1..=4);
            let template = (0..count)
                .map(|_| *PII_TEMPLATES.choose(&mut rng).unwrap())
                .collect::<Vec<_>>()
                .join(" ");
            let raw = fill_placeholders(&template, &meta).text;
            (raw, template, meta)
        })
        .collect()
}
