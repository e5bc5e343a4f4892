use std::time::Duration;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use smartreply_core::artifact::ArtifactHeader;
use smartreply_core::candidates::{build_catalog, embed_phrase, FineCluster};
use smartreply_core::corpus::{
    generate_synthetic_corpus, preprocess_corpus, Role, SyntheticSpec, Ticket, TicketMeta,
};
use smartreply_core::embeddings::Word2VecConfig;
use smartreply_core::model::{
    fit_frequency, predict_topk, vocabulary_hash, Checkpoint, Model, ModelDims, SequenceExample, TrainConfig,
    Variant, CHECKPOINT_VERSION,
};
use smartreply_core::pipeline::{build_examples, train_embeddings, EmbeddingSet};
use smartreply_service::{router, AppState, Engine, MessageAccepted, SessionCreated, SuggestionList};

const RESERVATION: &str = "{customer name}, could you provide the reservation code?";

struct Fixture {
    tickets: Vec<Ticket>,
    offline: Vec<SequenceExample>,
    engine_parts: (Checkpoint, smartreply_core::candidates::CandidateCatalog, EmbeddingSet),
    issue_names: Vec<String>,
}

fn fixture(variant: Variant) -> Fixture {
    let spec = SyntheticSpec {
        n_tickets: 40,
        ..SyntheticSpec::default()
    };
    let issue_names = spec.library.issues.iter().map(|i| i.name.clone()).collect();
    let tickets = generate_synthetic_corpus(&spec, 3).unwrap().tickets;
    let processed = preprocess_corpus(&tickets);
    let w2v = Word2VecConfig {
        dim: 8,
        epochs: 1,
        ..Word2VecConfig::default()
    };
    let embeddings = train_embeddings(&processed, &w2v, 3).unwrap();
    let clusters: Vec<FineCluster> = [
        RESERVATION,
        "Are you on the app or website?",
        "What is the listing address?",
        "When did you book?",
        "Which card did you use?",
    ]
    .iter()
    .map(|t| FineCluster {
        intent: t.to_string(),
        variants: vec![t.to_string()],
    })
    .collect();
    let se = embeddings.sentence_embedder();
    let catalog = build_catalog(&clusters, &[], |t| embed_phrase(t, &se)).unwrap();
    let dims = ModelDims {
        embedding_dim: 8,
        n_candidates: catalog.len(),
        n_issues: spec.n_issues,
        hidden: 6,
    };
    let mut offline = build_examples(&processed, &[], &embeddings.turn_embedder());
    let mut labelled = offline.clone();
    for (i, ex) in labelled.iter_mut().enumerate() {
        for (t, y) in ex.targets.iter_mut().enumerate() {
            *y = vec![(i + t) % dims.n_candidates];
        }
    }
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        header: ArtifactHeader::new("train", 3, Value::Null),
        variant,
        config: TrainConfig::default(),
        lambda: 0.0,
        best_epoch: 0,
        vocab_hash: vocabulary_hash(&embeddings.vectors),
        catalog_hash: catalog.fingerprint(),
        model: match variant {
            Variant::Frequency => Model::Frequency(fit_frequency(&labelled, dims.n_candidates, dims.n_issues)),
            v => Model::init(v, dims, 0.5, 9).unwrap(),
        },
        prior: fit_frequency(&labelled, dims.n_candidates, dims.n_issues),
        log: Vec::new(),
    };
    offline.iter_mut().for_each(|ex| ex.targets.iter_mut().for_each(Vec::clear));
    Fixture {
        tickets,
        offline,
        engine_parts: (checkpoint, catalog, embeddings),
        issue_names,
    }
}

impl Fixture {
    fn engine(&self) -> Engine {
        let (ck, catalog, emb) = self.engine_parts.clone();
        Engine::new(ck, catalog, emb.vectors, emb.turn_stats)
            .unwrap()
            .with_issue_names(self.issue_names.clone())
    }

    fn offline_ids(&self, i: usize) -> Vec<Vec<usize>> {
        let model = &self.engine_parts.0.model;
        model
            .predict_sequence(&self.offline[i])
            .unwrap()
            .iter()
            .map(|p| predict_topk(p, 3).unwrap())
            .collect()
    }
}

struct Server {
    base: String,
    client: Client,
    state: AppState,
}

async fn start(engine: Engine, ttl: Duration) -> Server {
    let state = AppState::new(engine, ttl);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server {
        base: format!("http://{addr}"),
        client: Client::new(),
        state,
    }
}

impl Server {
    async fn create(&self, body: Value) -> SessionCreated {
        let resp = self.client.post(format!("{}/v1/sessions", self.base)).json(&body).send().await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        resp.json().await.unwrap()
    }

    async fn post(&self, id: &str, speaker: &str, text: &str, end_of_turn: bool) -> reqwest::Response {
        self.client
            .post(format!("{}/v1/sessions/{id}/messages", self.base))
            .json(&json!({"speaker": speaker, "text": text, "end_of_turn": end_of_turn}))
            .send()
            .await
            .unwrap()
    }

    async fn say(&self, id: &str, speaker: &str, text: &str, end_of_turn: bool) -> MessageAccepted {
        let resp = self.post(id, speaker, text, end_of_turn).await;
        assert_eq!(resp.status(), StatusCode::OK);
        resp.json().await.unwrap()
    }

    async fn suggestions(&self, id: &str) -> reqwest::Response {
        self.client
            .get(format!("{}/v1/sessions/{id}/suggestions", self.base))
            .send()
            .await
            .unwrap()
    }

    /// Streams a ticket and returns the suggested ids after each completed round.
    async fn replay(&self, ticket: &Ticket, explicit_end: bool) -> Vec<Vec<usize>> {
        let created = self.create(json!({"meta": ticket.meta})).await;
        let id = created.session_id;
        let mut out = Vec::new();
        for round in &ticket.rounds {
            if let Some(agent) = &round.agent {
                for (k, m) in agent.messages.iter().enumerate() {
                    let ack = self.say(&id, "agent", m, k + 1 == agent.messages.len()).await;
                    if let Some(s) = ack.suggestions {
                        out.push(s.iter().map(|s| s.candidate_id).collect());
                    }
                }
            }
            let n = round.customer.messages.len();
            for (k, m) in round.customer.messages.iter().enumerate() {
                let ack = self.say(&id, "customer", m, explicit_end && k + 1 == n).await;
                if let Some(s) = ack.suggestions {
                    out.push(s.iter().map(|s| s.candidate_id).collect());
                }
            }
        }
        out
    }
}

#[tokio::test]
async fn streaming_replay_matches_offline_inference() {
    for variant in [Variant::Lstm, Variant::LstmIssueInOut, Variant::LinearIssue, Variant::Frequency] {
        let fx = fixture(variant);
        let server = start(fx.engine(), Duration::from_secs(60)).await;
        for (i, ticket) in fx.tickets.iter().enumerate().take(12) {
            let online = server.replay(ticket, true).await;
            assert_eq!(online, fx.offline_ids(i), "{variant} ticket {}", ticket.id());
        }
    }
}

#[tokio::test]
async fn speaker_change_closes_the_customer_turn() {
    let fx = fixture(Variant::Lstm);
    let server = start(fx.engine(), Duration::from_secs(60)).await;
    for (i, ticket) in fx.tickets.iter().enumerate().take(8) {
        let online = server.replay(ticket, false).await;
        let offline = fx.offline_ids(i);
        assert_eq!(online.len(), offline.len() - 1);
        assert_eq!(online[..], offline[..offline.len() - 1]);
    }
}

#[tokio::test]
async fn sessions_start_from_the_issue_prior() {
    let fx = fixture(Variant::Lstm);
    let prior = fx.engine_parts.0.prior.clone();
    let server = start(fx.engine(), Duration::from_secs(60)).await;

    let by_name = server.create(json!({"issue_id": fx.issue_names[1], "meta": {}})).await;
    assert_eq!(by_name.issue_id, Some(1));
    assert!(by_name.warnings.is_empty());
    assert_eq!(by_name.round, 0);
    let ids: Vec<usize> = by_name.suggestions.iter().map(|s| s.candidate_id).collect();
    assert_eq!(ids, predict_topk(&prior.distribution(1), 3).unwrap());

    let by_id = server.create(json!({"issue_id": 2})).await;
    assert_eq!(by_id.issue_id, Some(2));

    let missing = server.create(json!({})).await;
    assert_eq!(missing.issue_id, None);
    assert!(missing.warnings.is_empty());
    let ids: Vec<usize> = missing.suggestions.iter().map(|s| s.candidate_id).collect();
    assert_eq!(ids, predict_topk(&prior.distribution(prior.n_issues()), 3).unwrap());

    for unknown in [json!("no such issue"), json!(99)] {
        let s = server.create(json!({"issue_id": unknown})).await;
        assert_eq!(s.issue_id, None);
        assert_eq!(s.warnings, vec!["unknown_issue".to_string()]);
        assert_eq!(s.suggestions, missing.suggestions);
    }
    assert_ne!(by_name.session_id, by_id.session_id);
}

#[tokio::test]
async fn one_state_advance_per_round_and_merged_agent_turns() {
    let fx = fixture(Variant::LstmIssueIn);
    let engine = fx.engine();
    let server = start(fx.engine(), Duration::from_secs(60)).await;
    let meta = TicketMeta {
        ticket_id: "live".into(),
        issue_id: Some(0),
        ..TicketMeta::default()
    };

    let s = server.create(json!({"meta": meta})).await;
    let id = s.session_id;
    let ack = server.say(&id, "customer", "I can't check in to my reservation.", true).await;
    assert_eq!((ack.round, ack.round_completed), (1, true));
    let ack = server.say(&id, "agent", "Sorry to hear that.", false).await;
    assert_eq!((ack.round, ack.round_completed, ack.suggestions.is_none()), (1, false, true));
    server.say(&id, "agent", "Could you provide the reservation code?", true).await;
    let ack = server.say(&id, "customer", "It is HMX2.", true).await;
    assert_eq!(ack.round, 2);

    let mut local = engine.open("local".into(), meta.clone(), None);
    use smartreply_core::corpus::Speaker::{Agent, Customer};
    engine.post(&mut local, Customer, "I can't check in to my reservation.", true).unwrap();
    engine.post(&mut local, Agent, "Sorry to hear that. Could you provide the reservation code?", true).unwrap();
    engine.post(&mut local, Customer, "It is HMX2.", true).unwrap();
    assert_eq!(ack.suggestions.unwrap(), engine.suggestions(&local).unwrap());
}

#[tokio::test]
async fn suggestions_are_read_only_and_filled_from_meta() {
    let fx = fixture(Variant::Frequency);
    let server = start(fx.engine(), Duration::from_secs(60)).await;
    let mut meta = TicketMeta::default();
    meta.party_names.insert(Role::Customer, "Maria".into());
    let id = server.create(json!({"meta": meta})).await.session_id;
    server.say(&id, "customer", "Hi, I need help with my booking.", true).await;

    let a: SuggestionList = server.suggestions(&id).await.json().await.unwrap();
    let b: SuggestionList = server.suggestions(&id).await.json().await.unwrap();
    assert_eq!(a, b);
    assert_eq!(a.round, 1);
    assert_eq!(a.suggestions.len(), 3);
    let total: f64 = a.suggestions.iter().map(|s| s.probability).sum();
    assert!(total <= 1.0 + 1e-12);
    assert!(a.suggestions.windows(2).all(|w| w[0].probability >= w[1].probability));
    for s in &a.suggestions {
        assert!(!s.text.contains('{'), "unfilled: {}", s.text);
        if s.candidate_id == 0 {
            assert_eq!(s.text, "Maria, could you provide the reservation code?");
        }
    }
    let reservation = fx.engine_parts.1.clusters[0].intent.clone();
    assert_eq!(reservation, RESERVATION);
    let engine = fx.engine();
    let mut probe = engine.open("p".into(), meta, None);
    probe.probabilities = vec![0.9, 0.05, 0.03, 0.01, 0.01];
    assert_eq!(engine.suggestions(&probe).unwrap()[0].text, "Maria, could you provide the reservation code?");
}

#[tokio::test]
async fn invalid_requests_are_rejected() {
    let fx = fixture(Variant::Lstm);
    let server = start(fx.engine(), Duration::from_secs(60)).await;
    let id = server.create(json!({})).await.session_id;

    assert_eq!(server.post(&id, "customer", "   ", true).await.status(), StatusCode::BAD_REQUEST);
    assert_eq!(server.post(&id, "robot", "hello", true).await.status(), StatusCode::BAD_REQUEST);
    assert_eq!(server.post("nope", "customer", "hello", true).await.status(), StatusCode::NOT_FOUND);
    assert_eq!(server.suggestions("nope").await.status(), StatusCode::NOT_FOUND);
    let after: SuggestionList = server.suggestions(&id).await.json().await.unwrap();
    assert_eq!(after.round, 0);

    let del = server.client.delete(format!("{}/v1/sessions/{id}", server.base)).send().await.unwrap();
    assert_eq!(del.status(), StatusCode::OK);
    assert_eq!(del.json::<Value>().await.unwrap(), json!({"closed": true}));
    assert_eq!(server.suggestions(&id).await.status(), StatusCode::NOT_FOUND);
    let again = server.client.delete(format!("{}/v1/sessions/{id}", server.base)).send().await.unwrap();
    assert_eq!(again.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn interleaved_sessions_are_isolated() {
    let fx = fixture(Variant::LstmIssueOut);
    let server = start(fx.engine(), Duration::from_secs(60)).await;
    let serial_a = server.replay(&fx.tickets[0], true).await;
    let serial_b = server.replay(&fx.tickets[1], true).await;

    let mut scripts = Vec::new();
    for ticket in &fx.tickets[..2] {
        let id = server.create(json!({"meta": ticket.meta})).await.session_id;
        let mut steps = Vec::new();
        for round in &ticket.rounds {
            for m in round.agent.iter().flat_map(|a| &a.messages) {
                steps.push(("agent", m.clone(), false));
            }
            let n = round.customer.messages.len();
            for (k, m) in round.customer.messages.iter().enumerate() {
                steps.push(("customer", m.clone(), k + 1 == n));
            }
        }
        scripts.push((id, steps, Vec::<Vec<usize>>::new()));
    }
    let longest = scripts.iter().map(|s| s.1.len()).max().unwrap();
    for k in 0..longest {
        for (id, steps, got) in &mut scripts {
            if let Some((speaker, text, end)) = steps.get(k) {
                if let Some(s) = server.say(id, speaker, text, *end).await.suggestions {
                    got.push(s.iter().map(|s| s.candidate_id).collect());
                }
            }
        }
    }
    assert_eq!(scripts[0].2, serial_a);
    assert_eq!(scripts[1].2, serial_b);
}

#[tokio::test]
async fn concurrent_posts_to_one_session_are_serialized() {
    let fx = fixture(Variant::Lstm);
    let server = start(fx.engine(), Duration::from_secs(60)).await;
    let id = server.create(json!({})).await.session_id;
    let mut handles = Vec::new();
    for i in 0..24 {
        let (client, url) = (server.client.clone(), format!("{}/v1/sessions/{id}/messages", server.base));
        handles.push(tokio::spawn(async move {
            let body = json!({"speaker": "customer", "text": format!("message {i}"), "end_of_turn": true});
            let ack: MessageAccepted = client.post(url).json(&body).send().await.unwrap().json().await.unwrap();
            ack.round
        }));
    }
    let mut rounds = Vec::new();
    for h in handles {
        rounds.push(h.await.unwrap());
    }
    rounds.sort_unstable();
    assert_eq!(rounds, (1..=24).collect::<Vec<_>>());
    let last: SuggestionList = server.suggestions(&id).await.json().await.unwrap();
    assert_eq!(last.round, 24);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let fx = fixture(Variant::Lstm);
    let server = start(fx.engine(), Duration::from_millis(150)).await;
    let idle = server.create(json!({})).await.session_id;
    let active = server.create(json!({})).await.session_id;
    for _ in 0..4 {
        tokio::time::sleep(Duration::from_millis(60)).await;
        assert_eq!(server.suggestions(&active).await.status(), StatusCode::OK);
    }
    assert_eq!(server.suggestions(&idle).await.status(), StatusCode::NOT_FOUND);
    tokio::time::sleep(Duration::from_millis(200)).await;
    assert_eq!(server.state.store.sweep(), 1);
    assert!(server.state.store.is_empty());
}

#[tokio::test]
async fn snapshot_restores_sessions_mid_conversation() {
    let fx = fixture(Variant::LstmIssueInOut);
    let ticket = &fx.tickets[2];
    let expected = fx.offline_ids(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.json");

    let first = start(fx.engine(), Duration::from_secs(60)).await;
    let id = first.create(json!({"meta": ticket.meta})).await.session_id;
    let half = ticket.rounds.len() / 2;
    let mut got = Vec::new();
    let send = |server: &'_ Server, rounds: &'_ [smartreply_core::corpus::Round]| {
        let (server, id, rounds) = (server.base.clone(), id.clone(), rounds.to_vec());
        let client = Client::new();
        async move {
            let mut out = Vec::new();
            for round in rounds {
                let msgs = round
                    .agent
                    .iter()
                    .flat_map(|a| a.messages.iter().map(|m| ("agent", m.clone(), false)))
                    .chain(round.customer.messages.iter().enumerate().map(|(k, m)| {
                        ("customer", m.clone(), k + 1 == round.customer.messages.len())
                    }))
                    .collect::<Vec<_>>();
                for (speaker, text, end) in msgs {
                    let ack: MessageAccepted = client
                        .post(format!("{server}/v1/sessions/{id}/messages"))
                        .json(&json!({"speaker": speaker, "text": text, "end_of_turn": end}))
                        .send()
                        .await
                        .unwrap()
                        .json()
                        .await
                        .unwrap();
                    if let Some(s) = ack.suggestions {
                        out.push(s.iter().map(|s| s.candidate_id).collect::<Vec<_>>());
                    }
                }
            }
            out
        }
    };
    got.extend(send(&first, &ticket.rounds[..half]).await);
    assert_eq!(first.state.store.save_snapshot(&path).await.unwrap(), 1);

    let second = start(fx.engine(), Duration::from_secs(60)).await;
    assert_eq!(second.state.store.load_snapshot(&path).unwrap(), 1);
    assert_eq!(second.state.store.sessions().await, first.state.store.sessions().await);
    got.extend(send(&second, &ticket.rounds[half..]).await);
    assert_eq!(got, expected);
}

#[test]
fn engine_refuses_mismatched_catalog() {
    let fx = fixture(Variant::Lstm);
    let (ck, mut catalog, emb) = fx.engine_parts.clone();
    catalog.clusters[0].variants.push("Could you share the code?".into());
    assert!(Engine::new(ck, catalog, emb.vectors, emb.turn_stats).is_err());
}
