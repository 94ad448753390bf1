//! Build an index on synthetic data and measure recall against exact search.

use rrr_ann::bench::{brute_force_knn, mean_recall, synth_dataset, SynthKind};
use rrr_ann::{IndexConfig, Metric, QueryParams, RrrIndex};

fn main() -> rrr_ann::Result<()> {
    let data = synth_dataset(20_000, 200, 96, SynthKind::Clustered(50), 7);
    let cfg = IndexConfig::for_corpus(Metric::Euclidean, &data.corpus).with_seed(7);
    println!(
        "{} clusters, reduced dim {:?}, rank {}",
        cfg.clusters, cfg.rrr.reduced_dim, cfg.rrr.rank
    );
    let index = RrrIndex::build(&data.corpus, None, &cfg)?;

    let k = 10;
    let truth = brute_force_knn(&data.corpus, &data.queries, k, Metric::Euclidean)?;
    for (w, t) in [(2, 50), (4, 100), (8, 200), (16, 400)] {
        let found: Vec<Vec<usize>> = index
            .query_batch(&data.queries, &QueryParams::new(k, w, t))?
            .into_iter()
            .map(|r| r.ids)
            .collect();
        println!("w = {w:2}, t = {t:3}: recall@{k} = {:.3}", mean_recall(&found, &truth, k));
    }
    Ok(())
}
