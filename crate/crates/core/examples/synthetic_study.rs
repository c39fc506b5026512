//! Runs the whole pipeline on generated data and prints the slice report
//! for the popularity baselines and the neural ranker variants.
//!
//! cargo run --release -p acrank-core --example synthetic_study -- [sessions] [position_bias] [distraction] [epochs] [seed] [test_fraction] [same_cluster_weight]

use std::sync::Arc;
use std::time::Instant;

use acrank_core::baselines::{MpcRanker, MpgcRanker, PopularityIndex};
use acrank_core::embedding::{sessionize_by_user, train_skipgram, Corpus, SkipgramConfig};
use acrank_core::features::{FeatureLayout, Featurizer};
use acrank_core::metrics::{evaluate, render_tables};
use acrank_core::prepare::{prepare, PrepareConfig};
use acrank_core::ranker::{network_config_for, train_ranker, NetworkConfig, NeuralRanker, TrainConfig};
use acrank_core::stats::StatsStore;
use acrank_core::synth::{generate, RelevanceWeights, SynthConfig};

fn main() -> acrank_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(d);
    let synth = SynthConfig {
        sessions: arg(0, 4000.0) as usize,
        position_bias: arg(1, 0.0),
        distraction: arg(2, 0.0),
        seed: arg(4, 7.0) as u64,
        relevance: RelevanceWeights {
            same_cluster: arg(6, RelevanceWeights::default().same_cluster),
            ..RelevanceWeights::default()
        },
        ..SynthConfig::default()
    };
    let epochs = arg(3, 5.0) as usize;
    let t = Instant::now();
    let data = generate(&synth)?;
    let events: Vec<(&str, &str, i64)> =
        data.searches.iter().map(|e| (e.user.as_str(), e.query.as_str(), e.ts)).collect();
    let corpus = Corpus::build(&sessionize_by_user(&events), 2);
    let emb = train_skipgram(&corpus, &SkipgramConfig::default())?;
    let stats = Arc::new(StatsStore::from_records(data.stats.clone(), synth.days, synth.half_life_days)?);
    let emb = Arc::new(emb);
    let prepared = prepare(
        &data.sessions,
        &PrepareConfig {
            test_fraction: arg(5, 0.2),
            ..PrepareConfig::default()
        },
    )?;
    eprintln!(
        "data {:?}: train {} val {} eval {} vocab {}",
        t.elapsed(),
        prepared.train.len(),
        prepared.validation.len(),
        prepared.eval.len(),
        corpus.tokens().len()
    );
    let layout = FeatureLayout::standard(emb.dim());
    let featurizer = Featurizer::new(&layout, &stats, &emb)?;
    let base = network_config_for(&featurizer);
    let train_cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let index = Arc::new(PopularityIndex::from_stats(&stats));
    let mut reports = vec![
        evaluate(&MpcRanker::new(index.clone()), &prepared.eval),
        evaluate(&MpgcRanker::new(index), &prepared.eval),
    ];
    for (id, cfg) in [
        ("neural", base.clone()),
        ("no-context", NetworkConfig { ablate_context: true, ..base.clone() }),
        ("no-delta", NetworkConfig { ablate_delta_ndcg: true, ..base.clone() }),
    ] {
        let t = Instant::now();
        let ck = train_ranker(&prepared.train, &prepared.validation, &featurizer, cfg, &train_cfg)?;
        eprintln!("{id}: {:?} history {:?}", t.elapsed(), ck.metadata.history);
        let r = NeuralRanker::new(id, Arc::new(ck), stats.clone(), emb.clone())?;
        reports.push(evaluate(&r, &prepared.eval));
    }
    println!("{}", render_tables(&reports, "mpc"));
    Ok(())
}
