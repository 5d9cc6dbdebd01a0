//! temporary diagnostic, removed before release
use gramsift_core::corpus::{load_corpus, stratified_split};
use gramsift_core::pipeline::{train_model, RunConfig};
use gramsift_core::synth::{benchmark_spec, generate};

#[test]
#[ignore]
fn diag_features() {
    let seed = 5u64;
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let spec = benchmark_spec(seed, 50, 4096);
    let generated = generate(&spec, dir).unwrap();
    let corpus = load_corpus(dir, &generated.manifest).unwrap();
    let split = stratified_split(&corpus, 0.7, seed).unwrap();
    let train_samples: Vec<_> = corpus
        .samples()
        .iter()
        .filter(|s| split.train_ids.contains(&s.id))
        .cloned()
        .collect();
    let train_corpus = gramsift_core::corpus::Corpus::from_samples(train_samples).unwrap();

    let mut cfg = RunConfig::with_seed(11);
    cfg.forest.n_trees = 200;
    cfg.forest.feature_cap_c = 100;
    cfg.stage3.budget_b = 600;
    let trained = train_model(&train_corpus, &cfg).unwrap();

    println!("selected: {}", trained.selected.len());
    println!("surviving features: {}", trained.bundle.features.len());
    let one_gram_cols = trained
        .bundle
        .column_sources
        .iter()
        .filter(|c| matches!(c, gramsift_core::bundle::ColumnSource::OneGram(_)))
        .count();
    println!("surviving one-gram columns: {one_gram_cols}");
    let mut lens = std::collections::BTreeMap::new();
    for f in &trained.bundle.features {
        *lens.entry(f.gram.len()).or_insert(0usize) += 1;
    }
    println!("surviving pattern lengths: {lens:?}");

    // weak rows from the earlier diagnostic
    for id in ["echo_/0006.bin", "echo_/0044.bin", "bravo/0005.bin"] {
        let s = corpus
            .samples()
            .iter()
            .find(|s| s.id.0 == id)
            .unwrap();
        let contains = |needle: &[u8]| {
            s.bytes.windows(needle.len()).any(|w| w == needle)
        };
        let sig_hits: Vec<String> = spec
            .families
            .iter()
            .flat_map(|f| f.signatures.iter().map(move |sg| (f.name.clone(), sg)))
            .filter(|(_, sg)| contains(&hex::decode(&sg.bytes_hex).unwrap()))
            .map(|(fam, sg)| format!("{fam}:{}", String::from_utf8_lossy(&hex::decode(&sg.bytes_hex).unwrap())))
            .collect();
        let (p, pred) = trained.bundle.predict(&s.bytes);
        let pmax: Vec<String> = p.iter().map(|v| format!("{v:.3}")).collect();
        // how many surviving patterns match this file
        let hits = trained
            .bundle
            .features
            .iter()
            .filter(|f| contains(&f.gram))
            .count();
        println!(
            "{id}: sigs {sig_hits:?}, {hits} surviving patterns present, pred {pred}, probs {pmax:?}"
        );
    }
}
