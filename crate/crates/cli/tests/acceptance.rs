//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! blocking criterion fails.
//!
//! Run with `cargo test -p smartreply-cli --test acceptance -- --nocapture`
//! (output is printed either way; the harness is custom).

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use smartreply_core::artifact::ArtifactHeader;
use smartreply_core::candidates::{
    build_catalog, embed_phrase, minibatch_kmeans, mine_candidates, rematch, CandidateCatalog, KMeansConfig,
    KMeansMode, Rematched,
};
use smartreply_core::corpus::library::ScriptLibrary;
use smartreply_core::corpus::{
    anonymize, fill_placeholders, generate_synthetic_corpus, pii_fixtures, preprocess_corpus, Ticket,
};
use smartreply_core::embeddings::cosine_similarity;
use smartreply_core::eval::{evaluate_model, format_table, run_benchmark, BenchmarkData, BenchmarkReport, RunOutcome};
use smartreply_core::model::gradcheck::{check_gradients, tiny_fixture};
use smartreply_core::model::{
    fit_frequency, predict_topk, sequence_loss, LinearModel, Model, ModelDims, SequenceExample, TrainConfig, Variant,
};
use smartreply_core::pipeline::{
    prepare_benchmark_data, train_checkpoint, train_embeddings, EmbeddingSet, PipelineConfig, Profile,
};
use smartreply_service::{router, AppState, Engine, MessageAccepted, SessionCreated};

const SEED: u64 = 7;

struct Line {
    id: &'static str,
    name: String,
    blocking: bool,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Results {
    lines: Vec<Line>,
}

impl Results {
    fn record(&mut self, id: &'static str, name: &str, blocking: bool, outcome: anyhow::Result<(bool, String)>) {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e:#}")));
        let line = Line {
            id,
            name: name.to_string(),
            blocking,
            pass,
            detail,
        };
        println!(
            "[{}] {} {}{}: {}",
            if line.pass { "PASS" } else { "FAIL" },
            line.id,
            line.name,
            if line.blocking { "" } else { " (non-blocking)" },
            line.detail
        );
        self.lines.push(line);
    }

    /// Runs `f`, turning panics into failures.
    fn check(&mut self, id: &'static str, name: &str, f: impl FnOnce() -> anyhow::Result<(bool, String)>) {
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(panic) => Err(anyhow::anyhow!(
                "panicked: {}",
                panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            )),
        };
        self.record(id, name, true, outcome);
    }
}

/// Small-profile chain on the default synthetic corpus.
struct Pipeline {
    config: PipelineConfig,
    tickets: Vec<Ticket>,
    embeddings: EmbeddingSet,
    catalog: CandidateCatalog,
    clusters_variants: Vec<Vec<String>>,
    rematched: Rematched,
    data: BenchmarkData,
}

fn pipeline() -> anyhow::Result<Pipeline> {
    let config = PipelineConfig::for_profile(Profile::Small);
    let corpus = generate_synthetic_corpus(&config.synth, SEED)?;
    let processed = preprocess_corpus(&corpus.tickets);
    let embeddings = train_embeddings(&processed, &config.word2vec, SEED)?;
    let embedder = embeddings.sentence_embedder();
    let mined = mine_candidates(&processed, &embedder, &config.mining, SEED)?;
    let catalog = build_catalog(&mined.clusters, &[], |t| embed_phrase(t, &embedder))?;
    let rematched = rematch(&processed, &catalog, &embedder, &config.rematch)?;
    let data = prepare_benchmark_data(&processed, &rematched.labels, &embeddings, &catalog, config.split, SEED)?;
    Ok(Pipeline {
        clusters_variants: mined.clusters.iter().map(|c| c.variants.clone()).collect(),
        config,
        tickets: corpus.tickets,
        embeddings,
        catalog,
        rematched,
        data,
    })
}

fn c1_gradients() -> anyhow::Result<(bool, String)> {
    let started = Instant::now();
    let (dims, examples) = tiny_fixture(SEED);
    let mut worst = (0.0_f64, String::new());
    let mut coordinates = 0;
    for variant in Variant::ALL {
        for lambda in [0.0, 0.01] {
            let model = match variant {
                Variant::Frequency => Model::Frequency(fit_frequency(&examples, dims.n_candidates, dims.n_issues)),
                v => Model::init(v, dims, 0.5, SEED)?,
            };
            let report = check_gradients(&model, &examples, lambda, 1e-5)?;
            coordinates += report.coordinates;
            if report.max_relative_error >= worst.0 {
                worst = (report.max_relative_error, format!("{variant} λ={lambda}"));
            }
        }
    }
    let elapsed = started.elapsed();
    Ok((
        worst.0 < 1e-4 && elapsed < Duration::from_secs(10),
        format!(
            "{coordinates} coordinates over 7 variants, max relative error {:.2e} ({}), {:.2}s",
            worst.0,
            worst.1,
            elapsed.as_secs_f64()
        ),
    ))
}

fn c2_loss_value() -> anyhow::Result<(bool, String)> {
    let p = vec![vec![0.5, 0.25, 0.25]];
    let y = vec![vec![1.0, 0.0, 1.0]];
    let loss = sequence_loss(&p, &y, 0.0, &[])?;
    let oracle: f64 = -(0.5f64.ln() + 0.25f64.ln());
    let target = 2.0794415;
    Ok((
        (loss - target).abs() <= 1e-6 && (loss - oracle).abs() <= 1e-12,
        format!("loss {loss:.9}, expected {target} (ln 8 = {oracle:.9})"),
    ))
}

fn c2_softmax(p: &Pipeline, trained: &Model) -> anyhow::Result<(bool, String)> {
    let dims = ModelDims {
        hidden: p.config.train.hidden,
        ..p.data.dims
    };
    let mut models = vec![("trained".to_string(), trained.clone())];
    for v in Variant::ALL {
        let model = match v {
            Variant::Frequency => Model::Frequency(fit_frequency(&p.data.train, dims.n_candidates, dims.n_issues)),
            v => Model::init(v, dims, p.config.train.init_scale, SEED)?,
        };
        models.push((v.name().to_string(), model));
    }
    let mut worst = 0.0_f64;
    let mut rounds = 0;
    for (_, model) in &models {
        for ex in &p.data.test {
            for dist in model.predict_sequence(ex)? {
                ensure!(dist.iter().all(|v| v.is_finite() && *v >= 0.0), "invalid probability");
                worst = worst.max((dist.iter().sum::<f64>() - 1.0).abs());
                rounds += 1;
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!(
            "{rounds} distributions from {} models on {} test tickets, max |Σp − 1| = {worst:.1e}",
            models.len(),
            p.data.test.len()
        ),
    ))
}

/// Top-k ids by score, highest first, lowest id on ties.
fn oracle_topk(scores: &[f64], k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

fn oracle_recall(predicted: &[usize], truth: &[usize]) -> f64 {
    let p: BTreeSet<usize> = predicted.iter().copied().collect();
    let t: BTreeSet<usize> = truth.iter().copied().collect();
    p.intersection(&t).count() as f64 / t.len().min(p.len()) as f64
}

/// Recall-r and Recall-t from (ticket, recall) pairs of valid rounds.
fn oracle_aggregates(valid: &[(usize, f64)]) -> (f64, f64) {
    let r = valid.iter().map(|(_, v)| v).sum::<f64>() / valid.len() as f64;
    let mut per: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (t, v) in valid {
        per.entry(*t).or_default().push(*v);
    }
    let t = per.values().map(|vs| vs.iter().sum::<f64>() / vs.len() as f64).sum::<f64>() / per.len() as f64;
    (r, t)
}

/// A linear model whose logits are the first m input coordinates.
fn identity_model(m: usize, d: usize) -> anyhow::Result<Model> {
    let dims = ModelDims {
        embedding_dim: d,
        n_candidates: m,
        n_issues: 1,
        hidden: 1,
    };
    let mut params = vec![0.0; m * 2 * d + m];
    for j in 0..m {
        params[j * 2 * d + j] = 1.0;
    }
    Ok(Model::Linear(LinearModel::from_params(dims, false, params)?))
}

fn c3_metrics() -> anyhow::Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let d = 4;
    let mut worst = 0.0_f64;
    let mut differing = 0;
    for _ in 0..1000 {
        let m = rng.random_range(2..=2 * d);
        let model = identity_model(m, d)?;
        let n_tickets = rng.random_range(1..=5);
        let mut examples = Vec::new();
        let mut valid = Vec::new();
        for ticket in 0..n_tickets {
            let rounds = rng.random_range(1..=6);
            let mut ex = SequenceExample {
                ticket_id: format!("t{ticket}"),
                issue_id: None,
                inputs: Vec::new(),
                targets: Vec::new(),
            };
            for _ in 0..rounds {
                let logits: Vec<f64> = (0..m).map(|_| rng.random_range(0..4) as f64).collect();
                let mut x = vec![0.0; 2 * d];
                x[..m].copy_from_slice(&logits);
                let truth: Vec<usize> = if rng.random_bool(0.2) {
                    Vec::new()
                } else {
                    let size = rng.random_range(1..=m.min(4));
                    let mut all: Vec<usize> = (0..m).collect();
                    for i in 0..size {
                        let j = rng.random_range(i..m);
                        all.swap(i, j);
                    }
                    let mut t = all[..size].to_vec();
                    t.sort_unstable();
                    t
                };
                if !truth.is_empty() {
                    let predicted = oracle_topk(&logits, 3.min(m));
                    valid.push((ticket, oracle_recall(&predicted, &truth)));
                }
                ex.inputs.push(x);
                ex.targets.push(truth);
            }
            examples.push(ex);
        }
        if valid.is_empty() {
            examples[0].targets[0] = vec![0];
            let logits = &examples[0].inputs[0][..m];
            valid.insert(0, (0, oracle_recall(&oracle_topk(logits, 3.min(m)), &[0])));
        }
        let (r, t) = oracle_aggregates(&valid);
        let eval = evaluate_model(&model, &examples)?;
        let per_round: Vec<f64> = eval.rounds.iter().filter_map(|x| x.recall).collect();
        ensure!(per_round.len() == valid.len(), "valid round count differs");
        for (a, (_, b)) in per_round.iter().zip(&valid) {
            worst = worst.max((a - b).abs());
        }
        worst = worst.max((eval.recall_r - r).abs()).max((eval.recall_t - t).abs());
        if (r - t).abs() > 1e-9 {
            differing += 1;
        }
    }

    // One ticket with a single perfect round, one with three misses.
    let model = identity_model(4, d)?;
    let round = |truth: Vec<usize>| (vec![3.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], truth);
    let ticket = |id: &str, rounds: Vec<(Vec<f64>, Vec<usize>)>| SequenceExample {
        ticket_id: id.into(),
        issue_id: None,
        inputs: rounds.iter().map(|r| r.0.clone()).collect(),
        targets: rounds.into_iter().map(|r| r.1).collect(),
    };
    let fixed = [
        ticket("a", vec![round(vec![0])]),
        ticket("b", vec![round(vec![3]), round(vec![3]), round(vec![3])]),
    ];
    let eval = evaluate_model(&model, &fixed)?;
    worst = worst.max((eval.recall_r - 0.25).abs()).max((eval.recall_t - 0.5).abs());

    Ok((
        worst <= 1e-12 && differing > 0,
        format!(
            "1000 fixtures, max deviation {worst:.1e}, {differing} with Recall-r ≠ Recall-t; fixed case r={:.2} t={:.2}",
            eval.recall_r, eval.recall_t
        ),
    ))
}

fn c4_benchmark(p: &Pipeline, results: &mut Results) -> Option<BenchmarkReport> {
    let started = Instant::now();
    let report = match run_benchmark(&p.data, &Variant::ALL, 10, SEED, &p.config.train, |method, outcome| {
        if let RunOutcome::Failed { seed, error } = outcome {
            eprintln!("  {method} seed {seed} failed: {error}");
        }
    }) {
        Ok(r) => r,
        Err(e) => {
            results.record("C4", "method ordering", true, Err(e.into()));
            return None;
        }
    };
    let elapsed = started.elapsed();
    let mean = |v: Variant| report.method(v).and_then(|m| m.recall_r).map(|(m, _)| m).unwrap_or(f64::NAN);
    let (freq, linear, lstm) = (mean(Variant::Frequency), mean(Variant::Linear), mean(Variant::Lstm));
    results.record(
        "C4",
        "LSTM ≥ linear + 0.03",
        true,
        Ok((lstm >= linear + 0.03, format!("Recall-r LSTM {lstm:.4}, linear {linear:.4}, margin {:.4}", lstm - linear))),
    );
    results.record(
        "C4",
        "linear ≥ frequency + 0.02",
        true,
        Ok((linear >= freq + 0.02, format!("Recall-r linear {linear:.4}, frequency {freq:.4}, margin {:.4}", linear - freq))),
    );
    results.record(
        "C4",
        "benchmark runtime < 30 min",
        true,
        Ok((elapsed < Duration::from_secs(30 * 60), format!("7 methods × 10 runs in {:.1}s", elapsed.as_secs_f64()))),
    );
    let issue = [Variant::LstmIssueIn, Variant::LstmIssueOut, Variant::LstmIssueInOut];
    let gaps: Vec<String> = issue.iter().map(|&v| format!("{} {:+.4}", v.name(), mean(v) - lstm)).collect();
    results.record(
        "C4",
        "LSTM issue variants within ±0.01 of LSTM",
        false,
        Ok((issue.iter().all(|&v| (mean(v) - lstm).abs() <= 0.01), gaps.join(", "))),
    );
    println!("{}", format_table(&report, true));
    Some(report)
}

fn owner(lib: &ScriptLibrary, surface: &str) -> Option<usize> {
    lib.intents
        .iter()
        .position(|i| i.variants.iter().chain(&i.paraphrases).any(|v| v == surface))
}

fn c5_recovery(p: &Pipeline) -> anyhow::Result<(bool, String)> {
    let lib = &p.config.synth.library;
    let used = lib.used_intents(p.config.synth.n_issues);
    let recovered: BTreeSet<usize> = p
        .clusters_variants
        .iter()
        .flatten()
        .filter_map(|v| owner(lib, v))
        .collect();
    let hit = used.iter().filter(|i| recovered.contains(i)).count();
    let rate = hit as f64 / used.len() as f64;
    Ok((
        rate >= 0.9,
        format!(
            "{hit}/{} planted intents recovered ({:.1}%), {} candidates",
            used.len(),
            100.0 * rate,
            p.catalog.len()
        ),
    ))
}

fn c5_rematch(p: &Pipeline) -> anyhow::Result<(bool, String)> {
    let embedder = p.embeddings.sentence_embedder();
    let threshold = p.config.rematch.threshold;
    let mut violations = 0;
    for m in &p.rematched.matches {
        let e = embed_phrase(&m.sentence, &embedder);
        let sims: Vec<f64> = p.catalog.clusters.iter().map(|c| cosine_similarity(&e, &c.centroid)).collect();
        let own = sims[m.candidate_id];
        let closest = sims.iter().all(|s| own >= *s);
        if !closest || own < threshold || (own - m.similarity).abs() > 1e-12 {
            violations += 1;
        }
    }
    Ok((
        violations == 0 && !p.rematched.matches.is_empty(),
        format!(
            "{} matched sentences, {violations} violating closest-candidate or threshold {threshold}",
            p.rematched.matches.len()
        ),
    ))
}

fn c5_kmeans() -> anyhow::Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let centres = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -1.0, 0.0]];
    let mut points = Vec::new();
    for c in &centres {
        for _ in 0..15 {
            points.push(c.iter().map(|v| v + rng.random_range(-0.15..0.15)).collect::<Vec<f64>>());
        }
    }
    let weights: Vec<f64> = (0..points.len()).map(|i| 1.0 + (i % 3) as f64).collect();
    let unit: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            p.iter().map(|v| v / n).collect()
        })
        .collect();
    let lloyd = lloyd(&unit, &weights, &[0, 15, 30, 45]);

    let config = KMeansConfig {
        k: 4,
        iters: 100,
        mode: KMeansMode::FullBatch,
        ..KMeansConfig::default()
    };
    let result = minibatch_kmeans(&points, &weights, &config, SEED)?;
    let same_partition = partition(&result.assignments) == partition(&lloyd.0);
    let mut centroid_gap = 0.0_f64;
    for (j, c) in result.centroids.iter().enumerate() {
        let Some(&member) = result.assignments.iter().position(|&a| a == j).as_ref() else {
            continue;
        };
        let o = lloyd.0[member];
        for (a, b) in c.iter().zip(&lloyd.1[o]) {
            centroid_gap = centroid_gap.max((a - b).abs());
        }
    }
    let objective_gap = (result.objective() - lloyd.2).abs();
    Ok((
        same_partition && centroid_gap < 1e-9 && objective_gap < 1e-9,
        format!(
            "60 points: partition {}, max centroid gap {centroid_gap:.1e}, objective gap {objective_gap:.1e}",
            if same_partition { "equal" } else { "differs" }
        ),
    ))
}

fn partition(assignments: &[usize]) -> BTreeSet<BTreeSet<usize>> {
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, &a) in assignments.iter().enumerate() {
        groups.entry(a).or_default().insert(i);
    }
    groups.into_values().collect()
}

/// Weighted Lloyd iterations from the given seed points; returns the
/// assignments, the centroids and the weighted squared-distance objective.
fn lloyd(points: &[Vec<f64>], weights: &[f64], init: &[usize]) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut centroids: Vec<Vec<f64>> = init.iter().map(|&i| points[i].clone()).collect();
    let mut assignments: Vec<usize> = Vec::new();
    loop {
        let next: Vec<usize> = points
            .iter()
            .map(|p| {
                (0..centroids.len())
                    .min_by(|&a, &b| dist(p, &centroids[a]).partial_cmp(&dist(p, &centroids[b])).unwrap())
                    .unwrap()
            })
            .collect();
        let done = next == assignments;
        assignments = next;
        if done {
            break;
        }
        for (j, c) in centroids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..points.len()).filter(|&i| assignments[i] == j).collect();
            let mass: f64 = members.iter().map(|&i| weights[i]).sum();
            if mass > 0.0 {
                *c = (0..c.len())
                    .map(|k| members.iter().map(|&i| weights[i] * points[i][k]).sum::<f64>() / mass)
                    .collect();
            }
        }
    }
    let objective = points
        .iter()
        .zip(&assignments)
        .zip(weights)
        .map(|((p, &a), w)| w * dist(p, &centroids[a]))
        .sum();
    (assignments, centroids, objective)
}

fn c6_round_trip() -> anyhow::Result<(bool, String)> {
    let fixtures = pii_fixtures(200, SEED);
    let restored = fixtures
        .iter()
        .filter(|(raw, _, meta)| fill_placeholders(&anonymize(raw, meta).text, meta).text == *raw)
        .count();
    let templated = fixtures
        .iter()
        .filter(|(raw, template, meta)| anonymize(raw, meta).text == *template)
        .count();
    Ok((
        restored == fixtures.len(),
        format!("{restored}/{} restored, {templated}/{} anonymized to their template", fixtures.len(), fixtures.len()),
    ))
}

async fn stream_ticket(client: &reqwest::Client, base: &str, ticket: &Ticket) -> anyhow::Result<Vec<Vec<usize>>> {
    let created: SessionCreated = client
        .post(format!("{base}/v1/sessions"))
        .json(&json!({"meta": ticket.meta}))
        .send()
        .await?
        .error_for_status()?
        .json()
        .await?;
    let id = created.session_id;
    let mut out = Vec::new();
    for round in &ticket.rounds {
        let agent = round.agent.iter().flat_map(|t| &t.messages).map(|m| ("agent", m, false));
        let n = round.customer.messages.len();
        let customer = round
            .customer
            .messages
            .iter()
            .enumerate()
            .map(|(k, m)| ("customer", m, k + 1 == n));
        for (speaker, text, end) in agent.chain(customer) {
            let ack: MessageAccepted = client
                .post(format!("{base}/v1/sessions/{id}/messages"))
                .json(&json!({"speaker": speaker, "text": text, "end_of_turn": end}))
                .send()
                .await?
                .error_for_status()?
                .json()
                .await?;
            if let Some(s) = ack.suggestions {
                out.push(s.iter().map(|s| s.candidate_id).collect());
            }
        }
    }
    client.delete(format!("{base}/v1/sessions/{id}")).send().await?.error_for_status()?;
    Ok(out)
}

fn c7_online(p: &Pipeline, engine: Engine) -> anyhow::Result<(bool, String)> {
    let model = engine.model().clone();
    let k = 3.min(model.n_candidates());
    let raw: BTreeMap<&str, &Ticket> = p.tickets.iter().map(|t| (t.id(), t)).collect();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let (tickets, rounds, mismatches) = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let base = format!("http://{}", listener.local_addr()?);
        let app = router(AppState::new(engine, Duration::from_secs(600)));
        tokio::spawn(async move { axum::serve(listener, app).await });
        let client = reqwest::Client::new();
        let (mut rounds, mut mismatches) = (0, 0);
        for ex in &p.data.test {
            let ticket = raw.get(ex.ticket_id.as_str()).context("test ticket missing from the corpus")?;
            let online = stream_ticket(&client, &base, ticket).await?;
            let offline: Vec<Vec<usize>> = model
                .predict_sequence(ex)?
                .iter()
                .map(|dist| predict_topk(dist, k))
                .collect::<Result<_, _>>()?;
            rounds += offline.len();
            mismatches += offline.iter().zip(&online).filter(|(a, b)| a != b).count();
            mismatches += offline.len().abs_diff(online.len());
        }
        anyhow::Ok((p.data.test.len(), rounds, mismatches))
    })?;
    Ok((
        mismatches == 0 && rounds > 0,
        format!("{tickets} test tickets, {rounds} rounds streamed over HTTP, {mismatches} mismatches"),
    ))
}

const CHAIN_CONFIG: &str = r#"
[synth]
n_tickets = 400
[word2vec]
dim = 40
[train]
epochs = 2
hidden = 6
lambda_grid = [0.0, 0.001]
[benchmark]
runs = 2
"#;

fn files(root: &Path) -> anyhow::Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root)?.to_path_buf(), std::fs::read(&path)?);
            }
        }
    }
    Ok(out)
}

fn c8_cli_determinism() -> anyhow::Result<(bool, String)> {
    let stages: [&[&str]; 8] = [
        &["synth"],
        &["embed"],
        &["mine"],
        &["label"],
        &["train", "--variant", "lstm"],
        &["train", "--variant", "linear+issue"],
        &["eval", "--methods", "freq,linear,lstm+issue_in"],
        &["stats"],
    ];
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for dir in &dirs {
        let config = dir.path().join("chain.toml");
        std::fs::write(&config, CHAIN_CONFIG)?;
        for stage in stages {
            let out = Command::new(env!("CARGO_BIN_EXE_smartreply"))
                .arg("--config")
                .arg(&config)
                .arg("--workdir")
                .arg(dir.path().join("work"))
                .args(stage)
                .output()?;
            ensure!(
                out.status.success(),
                "{stage:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
    let (a, b) = (files(&dirs[0].path().join("work"))?, files(&dirs[1].path().join("work"))?);
    ensure!(a.keys().eq(b.keys()), "artifact sets differ");
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} stages run twice, {} artifacts byte-identical", stages.len(), a.len())
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    ))
}

fn c8_report_layout(report: &BenchmarkReport) -> anyhow::Result<(bool, String)> {
    let table = format_table(report, false);
    let lines: Vec<&str> = table.lines().collect();
    ensure!(lines.len() >= report.methods.len() + 2, "table too short");
    let header: Vec<&str> = lines[0].split("  ").map(str::trim).filter(|s| !s.is_empty()).collect();
    ensure!(header == ["Method", "Recall-r", "Recall-t"], "header {header:?}");
    let mut problems = Vec::new();
    for m in &report.methods {
        let values = |get: fn(&RunOutcome) -> Option<f64>| m.runs.iter().filter_map(get).collect::<Vec<f64>>();
        let r = values(|o| match o {
            RunOutcome::Ok { recall_r, .. } => Some(*recall_r),
            _ => None,
        });
        let t = values(|o| match o {
            RunOutcome::Ok { recall_t, .. } => Some(*recall_t),
            _ => None,
        });
        if m.runs.len() != 10 || r.len() != 10 {
            problems.push(format!("{}: {} successful runs", m.method, r.len()));
            continue;
        }
        let oracle = |v: &[f64]| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            (mean, sd / n.sqrt())
        };
        let (or, ot) = (oracle(&r), oracle(&t));
        let (rr, rt) = (m.recall_r.unwrap_or_default(), m.recall_t.unwrap_or_default());
        if (rr.0 - or.0).abs() > 1e-12 || (rr.1 - or.1).abs() > 1e-12 || (rt.0 - ot.0).abs() > 1e-12 || (rt.1 - ot.1).abs() > 1e-12 {
            problems.push(format!("{}: mean/SE differ from recomputation", m.method));
        }
        let row = lines.iter().find(|l| l.starts_with(m.method.label()));
        let expected = format!("{:.3} ({:.3})", or.0, or.1);
        if !row.is_some_and(|l| l.contains(&expected)) {
            problems.push(format!("{}: row missing {expected}", m.method));
        }
    }
    Ok((
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} methods × 10 runs, mean (SE) rows match recomputation", report.methods.len())
        } else {
            problems.join("; ")
        },
    ))
}

fn main() {
    let started = Instant::now();
    let mut results = Results::default();

    results.check("C1", "finite-difference gradients", c1_gradients);
    results.check("C2", "sequence loss value", c2_loss_value);
    results.check("C3", "metric oracle", c3_metrics);
    results.check("C5", "k-means reference mode vs Lloyd", c5_kmeans);
    results.check("C6", "anonymization round trip", c6_round_trip);

    println!("building the small-profile pipeline (seed {SEED}) ...");
    match catch_unwind(pipeline) {
        Ok(Ok(p)) => {
            let mut config = TrainConfig {
                variant: Variant::LstmIssueInOut,
                seed: SEED,
                lambda_grid: vec![0.0],
                ..p.config.train.clone()
            };
            config.lambda = 0.0;
            let header = ArtifactHeader::new("acceptance", SEED, Value::Null);
            let checkpoint = train_checkpoint(&p.data, &config, &p.embeddings, &p.catalog, header);
            match &checkpoint {
                Ok(ck) => results.check("C2", "softmax sums to one", || c2_softmax(&p, &ck.model)),
                Err(e) => results.record("C2", "softmax sums to one", true, Err(anyhow::anyhow!("training: {e}"))),
            }
            results.check("C5", "planted intent recovery", || c5_recovery(&p));
            results.check("C5", "rematch invariants", || c5_rematch(&p));
            match checkpoint {
                Ok(ck) => {
                    let names = p.config.synth.library.issues.iter().map(|i| i.name.clone()).collect();
                    results.check("C7", "online/offline equivalence", || {
                        let engine = Engine::new(
                            ck,
                            p.catalog.clone(),
                            p.embeddings.vectors.clone(),
                            p.embeddings.turn_stats.clone(),
                        )?
                        .with_issue_names(names);
                        c7_online(&p, engine)
                    });
                }
                Err(e) => results.record("C7", "online/offline equivalence", true, Err(anyhow::anyhow!("training: {e}"))),
            }
            println!("running the benchmark: 7 methods × 10 seeds ...");
            match catch_unwind(AssertUnwindSafe(|| c4_benchmark(&p, &mut results))) {
                Ok(Some(report)) => results.check("C8", "benchmark report layout", || c8_report_layout(&report)),
                Ok(None) => results.record("C8", "benchmark report layout", true, Err(anyhow::anyhow!("no report"))),
                Err(_) => results.record("C4", "method ordering", true, Err(anyhow::anyhow!("benchmark panicked"))),
            }
        }
        Ok(Err(e)) => results.record("--", "pipeline", true, Err(e)),
        Err(_) => results.record("--", "pipeline", true, Err(anyhow::anyhow!("pipeline panicked"))),
    }

    results.check("C8", "CLI stages byte-identical on rerun", c8_cli_determinism);

    let failed: Vec<String> = results
        .lines
        .iter()
        .filter(|l| l.blocking && !l.pass)
        .map(|l| format!("{} {}", l.id, l.name))
        .collect();
    let passed = results.lines.iter().filter(|l| l.pass).count();
    println!(
        "acceptance: {passed}/{} checks passed in {:.0}s",
        results.lines.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("blocking failures: {}", failed.join(", "));
        std::process::exit(1);
    }
}
