use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use acrank_core::baselines::{MpcRanker, MpgcRanker, PopularityIndex, MPC_ID, MPGC_ID};
use acrank_core::embedding::{
    load_embeddings, save_embeddings, sessionize_by_user, train_skipgram, Corpus, EmbeddingTable, SaveOptions,
    SkipgramConfig,
};
use acrank_core::features::{FeatureLayout, Featurizer, DEFAULT_PAST_K};
use acrank_core::metrics::{evaluate, render_tables, EvalQuery, EvalReport};
use acrank_core::prepare::{prepare, PrepareConfig};
use acrank_core::rank::Ranker;
use acrank_core::ranker::{default_ranker_id, network_config_for, train_ranker, Checkpoint, NeuralRanker, TrainConfig};
use acrank_core::session::{holdout_sessions, parse_session_log, AcSession, ParseMode, TrainingPair, WeightMode};
use acrank_core::stats::{StatsBuilder, StatsStore};
use acrank_core::synth::{generate, RelevanceWeights, SynthConfig};
use acrank_core::trie::PrefixTrie;
use acrank_serve::{ContextStore, SuggestService, SystemClock};
use anyhow::{anyhow, bail, Context, Result};

use crate::fsio::{open, read_jsonl, write_atomic, write_json, write_jsonl};
use crate::manifest::{blob_hash, manifest_path_for, RunManifest, DIR_MANIFEST};
use crate::{
    Cli, Command, EvaluateArgs, GenSyntheticArgs, InspectArgs, PrepareDataArgs, ServeArgs, TrainEmbeddingsArgs,
    TrainRankerArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(&a),
        Command::PrepareData(a) => prepare_data(&a),
        Command::TrainEmbeddings(a) => train_embeddings(&a),
        Command::TrainRanker(a) => train_ranker_cmd(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Serve(a) => serve(&a),
        Command::InspectCheckpoint(a) => inspect(&a),
    }
}

fn load_stats(path: &Path, days: usize, half_life_days: f64) -> Result<StatsStore> {
    StatsStore::load(open(path)?, days, half_life_days)
        .with_context(|| format!("loading stats {}", path.display()))
}

fn load_table(path: &Path) -> Result<EmbeddingTable> {
    load_embeddings(open(path)?).with_context(|| format!("loading embeddings {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(open(path)?).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn load_sessions(path: &Path, skip_bad_lines: bool) -> Result<Vec<AcSession>> {
    let mode = if skip_bad_lines {
        ParseMode::SkipAndReport
    } else {
        ParseMode::Strict
    };
    let log = parse_session_log(open(path)?, mode).with_context(|| format!("parsing {}", path.display()))?;
    for e in &log.errors {
        eprintln!("warning: {}:{}: skipped: {}", path.display(), e.line, e.message);
    }
    Ok(log.sessions)
}

fn gen_synthetic(a: &GenSyntheticArgs) -> Result<()> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        seed: a.seed,
        sessions: a.sessions.unwrap_or(d.sessions),
        queries_per_cluster: a.queries_per_cluster.unwrap_or(d.queries_per_cluster),
        context_rate: a.context_rate.unwrap_or(d.context_rate),
        position_bias: a.position_bias.unwrap_or(d.position_bias),
        distraction: a.distraction.unwrap_or(d.distraction),
        purchase_rate: a.purchase_rate.unwrap_or(d.purchase_rate),
        search_users: a.search_users.unwrap_or(d.search_users),
        relevance: RelevanceWeights {
            same_cluster: a.context_weight.unwrap_or(d.relevance.same_cluster),
            ..d.relevance.clone()
        },
        ..d.clone()
    };
    let data = generate(&cfg)?;
    let dir = &a.out_dir;
    let sessions = dir.join("sessions.jsonl");
    let stats = dir.join("stats.jsonl");
    let searches = dir.join("searches.tsv");
    let queries = dir.join("queries.tsv");
    let truth = dir.join("truth.jsonl");

    write_jsonl(&sessions, &data.sessions)?;
    write_jsonl(&stats, &data.stats)?;
    write_atomic(&searches, |w| {
        for e in &data.searches {
            writeln!(w, "{}\t{}\t{}", e.ts, e.query, e.user)?;
        }
        Ok(())
    })?;
    let store = StatsStore::from_records(data.stats.clone(), cfg.days, cfg.half_life_days)?;
    write_atomic(&queries, |w| {
        for q in &data.queries {
            writeln!(w, "{}\t{}", q.text, store.decayed_popularity(&q.text))?;
        }
        Ok(())
    })?;
    write_jsonl(&truth, &data.queries)?;

    let mut m = RunManifest::new("gen-synthetic", &cfg, Some(cfg.seed))?;
    for p in [&sessions, &stats, &searches, &queries, &truth] {
        m.output(p)?;
    }
    m.write(&dir.join(DIR_MANIFEST))?;
    println!(
        "wrote {} sessions, {} queries, {} searches to {}",
        data.sessions.len(),
        data.queries.len(),
        data.searches.len(),
        dir.display()
    );
    Ok(())
}

fn prepare_data(a: &PrepareDataArgs) -> Result<()> {
    let weight_mode: WeightMode = a.weight_mode.parse().map_err(|e: String| anyhow!(e))?;
    let cfg = PrepareConfig {
        test_fraction: a.test_fraction,
        validation_fraction: a.validation_fraction,
        weight_mode,
        gmv_positive_only: a.gmv_positive_only,
        seed: a.seed,
    };
    let sessions = load_sessions(&a.sessions, a.skip_bad_lines)?;
    let data = prepare(&sessions, &cfg)?;
    if data.train.is_empty() && data.validation.is_empty() {
        eprintln!(
            "warning: no training pairs extracted from {} sessions{}",
            sessions.len(),
            if a.gmv_positive_only {
                " (after keeping only sessions with gmv > 0)"
            } else {
                ""
            }
        );
    }

    // behavior stats from the sessions that feed training only, so held-out
    // submissions never leak into the features
    let kept: Vec<&AcSession> = sessions
        .iter()
        .filter(|s| !cfg.gmv_positive_only || s.gmv > 0.0)
        .collect();
    let test: HashSet<String> = holdout_sessions(kept.iter().map(|s| s.session_id.as_str()), cfg.test_fraction, cfg.seed);
    let mut builder = StatsBuilder::new();
    for s in kept.iter().filter(|s| !test.contains(&s.session_id)) {
        builder.add_search(&s.submitted_query, s.timestamp);
        if s.gmv > 0.0 {
            builder.add_gmv(&s.submitted_query, s.timestamp, s.gmv);
        }
    }

    let dir = &a.out_dir;
    let train = dir.join("train_pairs.jsonl");
    let val = dir.join("validation_pairs.jsonl");
    let eval = dir.join("eval.jsonl");
    let stats = dir.join("session_stats.jsonl");
    write_jsonl(&train, &data.train)?;
    write_jsonl(&val, &data.validation)?;
    write_jsonl(&eval, &data.eval)?;
    write_jsonl(&stats, &builder.build(a.stats_days, None))?;

    let mut m = RunManifest::new("prepare-data", a, Some(a.seed))?;
    m.input(&a.sessions)?;
    for p in [&train, &val, &eval, &stats] {
        m.output(p)?;
    }
    m.write(&dir.join(DIR_MANIFEST))?;
    println!(
        "{} sessions ({} held out): {} train pairs, {} validation pairs, {} eval samples",
        data.sessions_used,
        data.sessions_held_out,
        data.train.len(),
        data.validation.len(),
        data.eval.len()
    );
    Ok(())
}

fn read_search_stream(path: &Path) -> Result<Vec<(String, String, i64)>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let ts = f.next().unwrap_or_default();
        let Ok(ts) = ts.trim().parse::<i64>() else {
            if i == 0 {
                continue; // header
            }
            bail!("{}:{}: bad timestamp '{ts}'", path.display(), i + 1);
        };
        let query = f
            .next()
            .with_context(|| format!("{}:{}: missing query column", path.display(), i + 1))?;
        let user = f.next().unwrap_or("");
        out.push((user.to_string(), query.to_string(), ts));
    }
    Ok(out)
}

fn train_embeddings(a: &TrainEmbeddingsArgs) -> Result<()> {
    let (input, events) = match (&a.searches, &a.sessions) {
        (Some(p), _) => (p, read_search_stream(p)?),
        (None, Some(p)) => {
            let events = load_sessions(p, false)?
                .into_iter()
                .flat_map(|s| {
                    let user = s.user_id.clone();
                    s.past_queries
                        .into_iter()
                        .map(|q| (q.0, q.1))
                        .chain([(s.submitted_query, s.timestamp)])
                        .map(move |(q, ts)| (user.clone(), q, ts))
                        .collect::<Vec<_>>()
                })
                .collect();
            (p, events)
        }
        (None, None) => bail!("one of --searches or --sessions is required"),
    };
    let cfg = SkipgramConfig {
        dim: a.dim,
        window: a.window,
        negatives_per_positive: a.negatives,
        epochs: a.epochs,
        initial_learning_rate: a.learning_rate,
        min_count: a.min_count,
        seed: a.seed,
        ..SkipgramConfig::default()
    };
    let corpus = Corpus::build(&sessionize_by_user(&events), a.min_count);
    if corpus.is_empty() {
        bail!("no query reaches --min-count {} in {}", a.min_count, input.display());
    }
    let table = train_skipgram(&corpus, &cfg)?;
    write_atomic(&a.out, |w| {
        save_embeddings(
            &table,
            w,
            SaveOptions {
                include_context: a.include_context,
            },
        )?;
        Ok(())
    })?;
    let mut m = RunManifest::new("train-embeddings", a, Some(a.seed))?;
    m.input(input)?;
    m.output(&a.out)?;
    m.write(&manifest_path_for(&a.out))?;
    println!("{} tokens, dim {} -> {}", table.len(), table.dim(), a.out.display());
    Ok(())
}

fn train_ranker_cmd(a: &TrainRankerArgs) -> Result<()> {
    let train: Vec<TrainingPair> = read_jsonl(&a.train)?;
    let val: Vec<TrainingPair> = match &a.validation {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    let stats = load_stats(&a.stats, a.stats_days, a.half_life_days)?;
    let emb = load_table(&a.embeddings)?;
    let layout = FeatureLayout::new(a.stats_days, a.past_k, a.half_life_days, emb.dim());
    let featurizer = Featurizer::new(&layout, &stats, &emb)?;
    let mut net_cfg = network_config_for(&featurizer);
    net_cfg.query_repr_units = a.query_units;
    net_cfg.lstm_units = a.lstm_units;
    net_cfg.context_repr_units = a.context_units;
    net_cfg.head_units = a.head_units;
    net_cfg.dropout_rate = a.dropout;
    net_cfg.seed = a.seed;
    net_cfg.ablate_delta_ndcg = a.ablate_delta_ndcg;
    net_cfg.ablate_context = a.ablate_context;
    let train_cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        seed: a.seed.wrapping_add(1),
        ..TrainConfig::default()
    };
    let ck = train_ranker(&train, &val, &featurizer, net_cfg, &train_cfg)?;
    write_atomic(&a.out, |w| Ok(ck.save(w)?))?;

    let mut m = RunManifest::new("train-ranker", a, Some(a.seed))?;
    for p in [Some(&a.train), a.validation.as_ref(), Some(&a.stats), Some(&a.embeddings)]
        .into_iter()
        .flatten()
    {
        m.input(p)?;
    }
    m.output(&a.out)?;
    m.write(&manifest_path_for(&a.out))?;
    let h = &ck.metadata.history;
    println!(
        "{}: {} train / {} validation pairs, best epoch {}, loss {:.5} -> {:.5}",
        default_ranker_id(&ck),
        train.len(),
        val.len(),
        h.best_epoch,
        h.initial_train_loss,
        h.train_loss.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let queries: Vec<EvalQuery> = read_jsonl(&a.eval)?;
    if queries.is_empty() {
        bail!("{} holds no evaluation samples", a.eval.display());
    }
    let mut rankers: Vec<Box<dyn Ranker>> = Vec::new();
    if !a.ranker.is_empty() {
        let stats = load_stats(&a.stats, a.stats_days, a.half_life_days)?;
        let index = Arc::new(PopularityIndex::from_stats(&stats));
        for id in &a.ranker {
            rankers.push(match id.as_str() {
                MPC_ID => Box::new(MpcRanker::new(index.clone())),
                MPGC_ID => Box::new(MpgcRanker::new(index.clone())),
                other => bail!("unknown baseline ranker '{other}' (expected {MPC_ID} or {MPGC_ID})"),
            });
        }
    }
    if !a.checkpoint.is_empty() {
        let emb_path = a
            .embeddings
            .as_ref()
            .context("--embeddings is required to evaluate a checkpoint")?;
        let emb = Arc::new(load_table(emb_path)?);
        for path in &a.checkpoint {
            let ck = load_checkpoint(path)?;
            let stats = Arc::new(load_stats(&a.stats, ck.layout.series_len, ck.layout.half_life_days)?);
            let mut id = default_ranker_id(&ck);
            let mut n = 2;
            while rankers.iter().any(|r| r.id() == id) {
                id = format!("{}#{n}", default_ranker_id(&ck));
                n += 1;
            }
            let r = NeuralRanker::new(id, Arc::new(ck), stats, emb.clone())
                .with_context(|| format!("checkpoint {} does not fit the stats/embeddings", path.display()))?;
            rankers.push(Box::new(r));
        }
    }
    if rankers.is_empty() {
        bail!("nothing to evaluate: give --ranker and/or --checkpoint");
    }
    let reports: Vec<EvalReport> = rankers
        .iter()
        .map(|r| evaluate(r.as_ref(), &queries))
        .collect();
    for r in &reports {
        if r.errors > 0 {
            eprintln!(
                "warning: {} failed on {} samples, e.g. {}",
                r.ranker,
                r.errors,
                r.error_examples.first().map(String::as_str).unwrap_or("")
            );
        }
    }
    print!("{}", render_tables(&reports, &a.baseline));
    if let Some(out) = &a.out {
        write_json(out, &reports)?;
        let mut m = RunManifest::new("evaluate", a, None)?;
        for p in [Some(&a.eval), Some(&a.stats), a.embeddings.as_ref()].into_iter().flatten() {
            m.input(p)?;
        }
        for p in &a.checkpoint {
            m.input(p)?;
        }
        m.output(out)?;
        m.write(&manifest_path_for(out))?;
    }
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<()> {
    let stats = Arc::new(load_stats(&a.stats, a.stats_days, a.half_life_days)?);
    let trie = match &a.trie {
        Some(p) => PrefixTrie::load_tsv(open(p)?, Some(a.shortlist))
            .with_context(|| format!("loading trie {}", p.display()))?,
        None => PrefixTrie::build(
            stats
                .records()
                .into_iter()
                .map(|r| (r.query.clone(), stats.decayed_popularity(&r.query))),
            Some(a.shortlist),
        ),
    };
    let mut rankers: Vec<Arc<dyn Ranker>> = Vec::new();
    let mut versions = Vec::new();
    let mut past_k = DEFAULT_PAST_K;
    if !a.checkpoint.is_empty() {
        let emb_path = a
            .embeddings
            .as_ref()
            .context("--embeddings is required to serve a checkpoint")?;
        let emb = Arc::new(load_table(emb_path)?);
        for (i, path) in a.checkpoint.iter().enumerate() {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let ck = Checkpoint::load(bytes.as_slice()).with_context(|| format!("loading checkpoint {}", path.display()))?;
            if i == 0 {
                past_k = ck.layout.past_k;
            }
            versions.push(blob_hash(&bytes)[..12].to_string());
            let ck_stats = if ck.layout.series_len == stats.days() && ck.layout.half_life_days == stats.half_life_days() {
                stats.clone()
            } else {
                Arc::new(load_stats(&a.stats, ck.layout.series_len, ck.layout.half_life_days)?)
            };
            let mut id = default_ranker_id(&ck);
            if rankers.iter().any(|r| r.id() == id) {
                id = format!("{id}#{}", i + 1);
            }
            rankers.push(Arc::new(NeuralRanker::new(id, Arc::new(ck), ck_stats, emb.clone())?));
        }
    }
    let index = Arc::new(PopularityIndex::from_stats(&stats));
    rankers.push(Arc::new(MpcRanker::new(index.clone())));
    rankers.push(Arc::new(MpgcRanker::new(index)));
    let model_version = if versions.is_empty() {
        "baselines-only".to_string()
    } else {
        versions.join("+")
    };
    let contexts = ContextStore::new(past_k, a.context_ttl_minutes * 60 * 1000, SystemClock);
    let service = Arc::new(SuggestService::new(trie, rankers, contexts, model_version)?);

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        acrank_serve::serve(listener, service).await?;
        Ok(())
    })
}

fn inspect(a: &InspectArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let summary = serde_json::json!({
        "ranker_id": default_ranker_id(&ck),
        "parameters": ck.network.params.len(),
        "network": ck.network.config,
        "feature_layout": ck.layout,
        "metadata": ck.metadata,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(out) = &a.export_json {
        write_atomic(out, |w| Ok(ck.export_json(w)?))?;
    }
    Ok(())
}
