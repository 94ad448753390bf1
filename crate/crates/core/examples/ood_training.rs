//! Training the regression models on a query sample when queries and corpus
//! come from different distributions.

use rrr_ann::bench::{brute_force_knn, mean_recall, synth_shifted};
use rrr_ann::{IndexConfig, LocalTrain, QueryParams, RrrIndex, TrainSource};

fn main() -> rrr_ann::Result<()> {
    let data = synth_shifted(10_000, 300, 5000, 64, 3);
    let k = 10;
    let truth = brute_force_knn(&data.corpus, &data.queries, k, data.metric)?;
    let params = QueryParams::new(k, 4, 100).without_rerank();

    for (name, source, local) in [
        ("corpus, cluster-only", TrainSource::Corpus, LocalTrain::ClusterOnly),
        ("corpus, routed", TrainSource::Corpus, LocalTrain::Routed),
        ("query sample, routed", TrainSource::QuerySample, LocalTrain::Routed),
    ] {
        let mut cfg = IndexConfig::for_corpus(data.metric, &data.corpus).with_seed(3);
        cfg.clusters = 40;
        cfg.rrr.rank = 8;
        cfg.rrr.reduced_dim = Some(16);
        cfg.rrr.train_source = source;
        cfg.rrr.local_train = local;
        cfg.rerank = false;
        let train = (source == TrainSource::QuerySample).then_some(data.train.as_ref().unwrap());
        let index = RrrIndex::build(&data.corpus, train, &cfg)?;
        let found: Vec<Vec<usize>> = index.query_batch(&data.queries, &params)?.into_iter().map(|r| r.ids).collect();
        println!("{name:22} recall@{k} without re-ranking: {:.3}", mean_recall(&found, &truth, k));
    }
    Ok(())
}
