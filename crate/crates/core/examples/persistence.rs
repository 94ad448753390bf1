//! Saving and loading an index, plus .fvecs/.ivecs files.

use rrr_ann::bench::{brute_force_knn, load_fvecs, load_ivecs, synth_dataset, write_fvecs, write_ivecs, SynthKind};
use rrr_ann::{IndexConfig, Metric, QueryParams, RrrIndex};

fn main() -> rrr_ann::Result<()> {
    let dir = std::env::temp_dir().join("rrr_ann_persistence");
    std::fs::create_dir_all(&dir)?;
    let data = synth_dataset(5000, 20, 48, SynthKind::Gaussian, 5);
    write_fvecs(dir.join("base.fvecs"), &data.corpus)?;
    write_ivecs(dir.join("gt.ivecs"), &brute_force_knn(&data.corpus, &data.queries, 10, Metric::Cosine)?)?;

    let corpus = load_fvecs(dir.join("base.fvecs"))?;
    let cfg = IndexConfig::for_corpus(Metric::Cosine, &corpus);
    let index = RrrIndex::build(&corpus, None, &cfg)?;
    let (bytes, fp) = index.serialize_with_footprint();
    println!("{} bytes: {fp:#?}", bytes.len());
    index.save(dir.join("index.rrr"))?;

    let loaded = RrrIndex::load(dir.join("index.rrr"))?;
    let p = QueryParams::new(10, 6, 60);
    let same = (0..data.queries.rows()).all(|i| {
        index.query(data.queries.row(i), &p).unwrap() == loaded.query(data.queries.row(i), &p).unwrap()
    });
    println!("loaded index answers identically: {same}");
    println!("ground truth rows: {}", load_ivecs(dir.join("gt.ivecs"))?.len());

    let mut damaged = bytes.clone();
    damaged[100] ^= 1;
    println!("damaged file: {}", RrrIndex::deserialize(&damaged).unwrap_err());
    Ok(())
}
