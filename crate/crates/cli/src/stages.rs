use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::json;
use smartreply_core::artifact::{sha256_hex, write_json, write_jsonl, ArtifactHeader};
use smartreply_core::candidates::{
    build_catalog, embed_phrase, load_catalog, load_edits, load_labels, mine_candidates, rematch, save_catalog,
    save_labels, CandidateCatalog,
};
use smartreply_core::corpus::{
    corpus_stats, generate_synthetic_corpus, load_corpus, preprocess_corpus, save_corpus, save_synthetic_labels,
    ProcessedTicket,
};
use smartreply_core::embeddings::{load_tfidf, load_word_vectors, save_tfidf, save_word_vectors};
use smartreply_core::eval::{evaluate_model, format_table, run_benchmark, BenchmarkData, RunOutcome};
use smartreply_core::model::save_checkpoint;
use smartreply_core::pipeline::{prepare_benchmark_data, train_checkpoint, train_embeddings, EmbeddingSet, PipelineConfig};
use smartreply_service::{serve, Engine, EnginePaths, ServeConfig};

use crate::config::{ensure_parent, load_config, require, write_manifest, Layout};
use crate::{Cli, Command, EvalArgs, MineArgs, ServeArgs, StatsArgs, SynthArgs, TrainArgs};

/// Resolved global options shared by every stage.
struct Workspace {
    seed: u64,
    config: PipelineConfig,
    layout: Layout,
}

impl Workspace {
    fn header(&self, stage: &str, config: impl Serialize) -> anyhow::Result<ArtifactHeader> {
        Ok(ArtifactHeader::new(stage, self.seed, serde_json::to_value(config)?))
    }

    fn tickets(&self) -> anyhow::Result<Vec<ProcessedTicket>> {
        require(&self.layout.corpus(), "synth")?;
        Ok(preprocess_corpus(&load_corpus(&self.layout.corpus())?))
    }

    fn embeddings(&self) -> anyhow::Result<EmbeddingSet> {
        require(&self.layout.vectors(), "embed")?;
        Ok(EmbeddingSet {
            vectors: load_word_vectors(&self.layout.vectors())?,
            sentence_stats: load_tfidf(&self.layout.sentence_tfidf())?,
            turn_stats: load_tfidf(&self.layout.turn_tfidf())?,
        })
    }

    fn catalog(&self) -> anyhow::Result<CandidateCatalog> {
        require(&self.layout.catalog(), "mine")?;
        Ok(load_catalog(&self.layout.catalog())?)
    }

    fn benchmark_data(&self) -> anyhow::Result<(BenchmarkData, EmbeddingSet, CandidateCatalog)> {
        let tickets = self.tickets()?;
        let embeddings = self.embeddings()?;
        let catalog = self.catalog()?;
        require(&self.layout.labels(), "label")?;
        let labels = load_labels(&self.layout.labels())?;
        let data = prepare_benchmark_data(&tickets, &labels, &embeddings, &catalog, self.config.split, self.seed)?;
        Ok((data, embeddings, catalog))
    }
}

pub(crate) fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(cli.profile.into(), cli.config.as_deref())?;
    let ctx = Workspace {
        seed: cli.seed,
        config,
        layout: Layout::new(cli.workdir),
    };
    std::fs::create_dir_all(&ctx.layout.root)
        .with_context(|| format!("creating work directory {}", ctx.layout.root.display()))?;
    let started = Instant::now();
    match cli.command {
        Command::Synth(args) => synth(&ctx, args),
        Command::Embed => embed(&ctx),
        Command::Mine(args) => mine(&ctx, args),
        Command::Label => label(&ctx),
        Command::Train(args) => train(&ctx, args),
        Command::Eval(args) => eval(&ctx, args),
        Command::Serve(args) => serve_cmd(&ctx, args),
        Command::Stats(args) => stats(&ctx, args),
    }?;
    tracing::info!(elapsed = ?started.elapsed(), "done");
    Ok(())
}

fn synth(ctx: &Workspace, args: SynthArgs) -> anyhow::Result<()> {
    let mut spec = ctx.config.synth.clone();
    if let Some(n) = args.tickets {
        spec.n_tickets = n;
    }
    let corpus = generate_synthetic_corpus(&spec, ctx.seed)?;
    let header = ctx.header("synth", &spec)?;
    let layout = &ctx.layout;
    save_corpus(&layout.corpus(), &corpus.tickets, Some(&header))?;
    save_synthetic_labels(&layout.truth(), &corpus.truth, Some(&header))?;
    write_manifest(layout, &header, &[layout.corpus(), layout.truth()])?;
    tracing::info!(tickets = corpus.tickets.len(), path = %layout.corpus().display(), "corpus written");
    Ok(())
}

fn embed(ctx: &Workspace) -> anyhow::Result<()> {
    let tickets = ctx.tickets()?;
    let set = train_embeddings(&tickets, &ctx.config.word2vec, ctx.seed)?;
    let layout = &ctx.layout;
    save_word_vectors(&layout.vectors(), &set.vectors)?;
    save_tfidf(&layout.sentence_tfidf(), &set.sentence_stats)?;
    save_tfidf(&layout.turn_tfidf(), &set.turn_stats)?;
    let header = ctx.header("embed", &ctx.config.word2vec)?;
    write_manifest(layout, &header, &[layout.vectors(), layout.sentence_tfidf(), layout.turn_tfidf()])?;
    tracing::info!(vocabulary = set.vectors.vocab().len(), dim = set.vectors.dim(), "embeddings written");
    Ok(())
}

#[derive(Serialize)]
struct RemovedQuestion<'a> {
    ticket_id: &'a str,
    round_index: usize,
    text: &'a str,
}

fn mine(ctx: &Workspace, args: MineArgs) -> anyhow::Result<()> {
    let tickets = ctx.tickets()?;
    let embeddings = ctx.embeddings()?;
    let embedder = embeddings.sentence_embedder();
    let out = mine_candidates(&tickets, &embedder, &ctx.config.mining, ctx.seed)?;
    let edits = match &args.edits {
        Some(path) => load_edits(path)?,
        None => Vec::new(),
    };
    let catalog = build_catalog(&out.clusters, &edits, |t| embed_phrase(t, &embedder))?;
    let layout = &ctx.layout;
    let header = ctx.header("mine", json!({"mining": ctx.config.mining, "edits": edits}))?;
    save_catalog(&layout.catalog(), &catalog)?;
    write_json(
        &layout.mining_report(),
        &json!({"header": header, "report": out.report, "clusters": out.clusters}),
    )?;
    write_jsonl(
        &layout.removed_questions(),
        Some(&header),
        out.removed.iter().map(|q| RemovedQuestion {
            ticket_id: &q.ticket_id,
            round_index: q.round_index,
            text: &q.text,
        }),
    )?;
    write_manifest(
        layout,
        &header,
        &[layout.catalog(), layout.mining_report(), layout.removed_questions()],
    )?;
    tracing::info!(
        candidates = catalog.len(),
        variants = catalog.variant_count(),
        removed = out.removed.len(),
        "catalog written"
    );
    Ok(())
}

fn label(ctx: &Workspace) -> anyhow::Result<()> {
    let tickets = ctx.tickets()?;
    let embeddings = ctx.embeddings()?;
    let catalog = ctx.catalog()?;
    let result = rematch(&tickets, &catalog, &embeddings.sentence_embedder(), &ctx.config.rematch)?;
    let layout = &ctx.layout;
    let header = ctx.header(
        "label",
        json!({"rematch": ctx.config.rematch, "catalog": catalog.fingerprint()}),
    )?;
    save_labels(&layout.labels(), &result.labels, Some(&header))?;
    write_jsonl(&layout.matches(), Some(&header), &result.matches)?;
    write_manifest(layout, &header, &[layout.labels(), layout.matches()])?;
    let labelled = result.labels.iter().filter(|l| !l.candidate_ids.is_empty()).count();
    tracing::info!(rounds = result.labels.len(), labelled, matches = result.matches.len(), "labels written");
    Ok(())
}

fn train(ctx: &Workspace, args: TrainArgs) -> anyhow::Result<()> {
    let (data, embeddings, catalog) = ctx.benchmark_data()?;
    let mut config = ctx.config.train.clone();
    config.variant = args.variant;
    config.seed = ctx.seed;
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(hidden) = args.hidden {
        config.hidden = hidden;
    }
    if let Some(lambda) = args.lambda {
        config.lambda_grid = vec![lambda];
    }
    let stage = format!("train-{}", args.variant.name());
    let header = ctx.header(&stage, json!({"train": config, "split": ctx.config.split}))?;
    let checkpoint = train_checkpoint(&data, &config, &embeddings, &catalog, header.clone())?;
    let test = evaluate_model(&checkpoint.model, &data.test)?;
    let path = ctx.layout.checkpoint(args.variant);
    ensure_parent(&path)?;
    save_checkpoint(&path, &checkpoint)?;
    write_manifest(&ctx.layout, &header, &[path.clone()])?;
    tracing::info!(
        variant = %args.variant,
        lambda = checkpoint.lambda,
        best_epoch = checkpoint.best_epoch,
        test_recall_r = test.recall_r,
        test_recall_t = test.recall_t,
        path = %path.display(),
        "checkpoint written"
    );
    Ok(())
}

fn eval(ctx: &Workspace, args: EvalArgs) -> anyhow::Result<()> {
    let (data, _, _) = ctx.benchmark_data()?;
    let methods = args.methods.unwrap_or_else(|| ctx.config.benchmark.methods.clone());
    let runs = args.runs.unwrap_or(ctx.config.benchmark.runs);
    let template = ctx.config.train.clone();
    let header = ctx.header(
        "eval",
        json!({"methods": methods, "runs": runs, "train": template, "split": ctx.config.split}),
    )?;
    let report = run_benchmark(&data, &methods, runs, ctx.seed, &template, |method, outcome| match outcome {
        RunOutcome::Ok { seed, recall_r, .. } => tracing::info!(%method, seed, recall_r, "run finished"),
        RunOutcome::Failed { seed, error } => tracing::warn!(%method, seed, error, "run failed"),
    })?;
    let table_path = args.out.unwrap_or_else(|| ctx.layout.report_table());
    let json_path = table_path.with_extension("json");
    ensure_parent(&table_path)?;
    let table = format_table(&report, true);
    let text = format!(
        "# smartreply eval: seed {}, runs {}, methods {}\n\n{table}",
        ctx.seed,
        runs,
        methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
    );
    std::fs::write(&table_path, &text).with_context(|| format!("writing {}", table_path.display()))?;
    write_json(&json_path, &json!({"header": header, "report": report}))?;
    write_manifest(&ctx.layout, &header, &[table_path.clone(), json_path])?;
    print!("{table}");
    Ok(())
}

fn serve_cmd(ctx: &Workspace, args: ServeArgs) -> anyhow::Result<()> {
    let layout = &ctx.layout;
    let paths = EnginePaths {
        checkpoint: args.checkpoint.unwrap_or_else(|| layout.checkpoint(args.variant)),
        catalog: args.catalog.unwrap_or_else(|| layout.catalog()),
        vectors: layout.vectors(),
        turn_tfidf: layout.turn_tfidf(),
    };
    for (path, stage) in [
        (&paths.checkpoint, "train"),
        (&paths.catalog, "mine"),
        (&paths.vectors, "embed"),
    ] {
        require(path, stage)?;
    }
    let names = ctx.config.synth.library.issues.iter().map(|i| i.name.clone()).collect();
    let engine = Engine::load(&paths)?.with_issue_names(names);
    let config = ServeConfig {
        bind: args.bind,
        ttl: Duration::from_secs(args.ttl_secs),
        snapshot: args.snapshot,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(serve(engine, config, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

fn stats(ctx: &Workspace, args: StatsArgs) -> anyhow::Result<()> {
    let path: PathBuf = args.corpus.unwrap_or_else(|| ctx.layout.corpus());
    if !Path::new(&path).exists() {
        bail!("{} not found; run `smartreply synth` first", path.display());
    }
    let tickets = load_corpus(&path)?;
    let stats = corpus_stats(&tickets)?;
    let shown = path.strip_prefix(&ctx.layout.root).unwrap_or(&path).display().to_string();
    let digest = sha256_hex(&std::fs::read(&path)?);
    let header = ctx.header("stats", json!({"corpus": shown, "sha256": digest}))?;
    write_json(&ctx.layout.stats(), &json!({"header": header, "stats": stats}))?;
    write_manifest(&ctx.layout, &header, &[ctx.layout.stats()])?;
    println!("{:<10} {:>8} {:>8}", "", "median", "mean");
    for (name, s) in [("messages", stats.messages), ("turns", stats.turns), ("rounds", stats.rounds)] {
        println!("{name:<10} {:>8.1} {:>8.2}", s.median, s.mean);
    }
    println!("{} tickets", stats.tickets);
    Ok(())
}
