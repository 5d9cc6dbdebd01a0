//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values. Oracles here are deliberately
//! naive re-implementations, independent of the library code paths they
//! check.
//!
//! Run with `cargo test -p gramsift-cli --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gramsift_core::corpus::{load_corpus, stratified_split, Corpus, Sample, SampleId};
use gramsift_core::entropy::{compute_thresholds, entropy_of, EntropyThresholds, Stage1Config};
use gramsift_core::featurizer::{compile_patterns, featurize};
use gramsift_core::forest::{prune_and_retrain, train_initial, DataMatrix, ForestConfig};
use gramsift_core::metrics::{logloss, PredictionMatrix};
use gramsift_core::miner::{mine_family, Stage2Config};
use gramsift_core::pipeline::STAGE_LABELS;
use gramsift_core::selector::{info_gain, select_pairwise, PairSplit, Stage3Config};
use gramsift_core::synth::{benchmark_spec, generate};

fn gramsift() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gramsift"))
}

fn sample(id: &str, family: &str, bytes: Vec<u8>) -> Sample {
    Sample {
        id: SampleId(id.to_string()),
        path: PathBuf::from(id),
        family: family.to_string(),
        bytes,
    }
}

/// Direct evaluation of the base-2 byte-value entropy definition.
fn entropy_oracle(gram: &[u8]) -> f64 {
    let mut acc = 0.0;
    for value in 0u16..=255 {
        let count = gram.iter().filter(|&&b| u16::from(b) == value).count();
        if count > 0 {
            let p = count as f64 / gram.len() as f64;
            acc -= p * p.log2();
        }
    }
    acc
}

#[test]
fn criterion_01_entropy_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC_01);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [4usize, 8, 16, 32] {
        for _ in 0..1000 {
            let gram: Vec<u8> = (0..n).map(|_| rng.r#gen()).collect();
            let got = entropy_of(&gram).expect("non-empty");
            let want = entropy_oracle(&gram);
            let err = (got - want).abs();
            worst = worst.max(err);
            assert!(err < 1e-12, "length {n}: error {err}");
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "entropy oracle sweep took {elapsed:?}"
    );
    println!(
        "CRITERION 1 PASS — 4000 grams, worst error {worst:.3e}, {elapsed:?}"
    );
}

/// Naive mining oracle: enumerate every substring of every file, dedupe
/// per file, count files, filter by entropy and the presence bar.
fn mining_oracle(
    samples: &[&Sample],
    n: usize,
    threshold: f64,
    gamma: f64,
) -> BTreeMap<Vec<u8>, usize> {
    let min_count = ((gamma * samples.len() as f64).floor() as usize).max(1);
    let mut counts: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    for s in samples {
        if s.bytes.len() < n {
            continue;
        }
        let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
        for start in 0..=s.bytes.len() - n {
            let gram = &s.bytes[start..start + n];
            if entropy_oracle(gram) >= threshold {
                seen.insert(gram.to_vec());
            }
        }
        for gram in seen {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts.retain(|_, c| *c >= min_count);
    counts
}

#[test]
fn criterion_02_mining_oracle() {
    let gamma = 0.2;
    for instance in 0..10u64 {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACC_02 + instance);
        let n_files = rng.gen_range(4..=20);
        let samples: Vec<Sample> = (0..n_files)
            .map(|i| {
                let len = rng.gen_range(0..=2048);
                let bytes: Vec<u8> = (0..len)
                    .map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..24) })
                    .collect();
                sample(&format!("f{i}"), "fam", bytes)
            })
            .collect();
        let refs: Vec<&Sample> = samples.iter().collect();

        let computed = compute_thresholds(
            &refs,
            &Stage1Config { alpha: 0.5, beta: 32, seed: instance, ..Default::default() },
        )
        .ok();
        for n in [4usize, 8, 16, 32] {
            let mut thresholds_to_try = vec![0.0];
            if let Some(th) = &computed {
                thresholds_to_try.push(th.threshold_for(n).unwrap());
            }
            for t in thresholds_to_try {
                let th = EntropyThresholds::from_text(
                    &format!("{n}\t{t:.16e}\t1.0000000000000000e0\t{t:.16e}\n"),
                    String::new(),
                    0,
                )
                .unwrap();
                let cfg = Stage2Config { gamma, memory_cap_bytes: None };
                let mined = mine_family("fam", &refs, &th, &cfg).expect("mining");
                let got: BTreeMap<Vec<u8>, usize> = mined.per_length[&n]
                    .iter()
                    .map(|r| (r.gram.clone(), r.count))
                    .collect();
                let expect = mining_oracle(&refs, n, t, gamma);
                assert_eq!(got, expect, "instance {instance}, n {n}, t {t}");
            }
        }
        let elapsed = start.elapsed();
        assert!(
            elapsed.as_secs_f64() < 10.0,
            "instance {instance} took {elapsed:?}"
        );
    }
    println!("CRITERION 2 PASS — 10 corpora, exact set equality at t=0 and computed t");
}

/// From-scratch pairwise gain: the two-class entropies and the weighted
/// difference, clamped to the contract range.
fn gain_oracle(p1: usize, p2: usize, n1: usize, n2: usize) -> f64 {
    let h = |a: usize, b: usize| -> f64 {
        let tot = (a + b) as f64;
        let mut acc = 0.0;
        if a > 0 {
            let g = a as f64 / tot;
            acc -= g * g.log2();
        }
        if b > 0 {
            let g = b as f64 / tot;
            acc -= g * g.log2();
        }
        acc
    };
    let f = (n1 + n2) as f64;
    let hf = h(n1, n2);
    let l = p1 + p2;
    let r = (n1 - p1) + (n2 - p2);
    let hl = if l == 0 { 0.0 } else { h(p1, p2) };
    let hr = if r == 0 { 0.0 } else { h(n1 - p1, n2 - p2) };
    (hf - hl * (l as f64 / f) - hr * (r as f64 / f)).clamp(0.0, hf)
}

fn split_of(p1: usize, p2: usize, n1: usize, n2: usize) -> PairSplit {
    PairSplit {
        pair: ("a".into(), "b".into()),
        present_count_1: p1,
        present_count_2: p2,
        n_1: n1,
        n_2: n2,
    }
}

#[test]
fn criterion_03_information_gain_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC_03);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n1 = rng.gen_range(1..=60);
        let n2 = rng.gen_range(1..=60);
        let p1 = rng.gen_range(0..=n1);
        let p2 = rng.gen_range(0..=n2);
        let got = info_gain(&split_of(p1, p2, n1, n2));
        let want = gain_oracle(p1, p2, n1, n2);
        let err = (got - want).abs();
        worst = worst.max(err);
        assert!(err < 1e-12, "({p1},{p2},{n1},{n2}): {err}");
    }
    // worked example: all 3 of 3 present vs 1 of 2
    let worked = info_gain(&split_of(3, 1, 3, 2));
    assert!((worked - 0.321_928_094_887_362_4).abs() < 1e-12);
    assert!((worked - gain_oracle(3, 1, 3, 2)).abs() < 1e-12);
    println!(
        "CRITERION 3 PASS — 500 splits, worst error {worst:.3e}; worked example {worked:.12}"
    );
}

#[test]
fn criterion_04_automaton_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC_04);
    for instance in 0..50u64 {
        // sizes vary up to the caps; pin the first instances at the caps
        let (n_patterns, file_len) = if instance == 0 {
            (1000usize, 65536usize)
        } else {
            (rng.gen_range(20..=1000), rng.gen_range(0..=65536))
        };
        let mut patterns: BTreeSet<Vec<u8>> = BTreeSet::new();
        while patterns.len() < n_patterns {
            let len = *[4usize, 8, 16, 32].choose(&mut rng).unwrap();
            // small alphabet so matches actually occur
            patterns.insert((0..len).map(|_| rng.gen_range(0..8u8)).collect());
        }
        let patterns: Vec<Vec<u8>> = patterns.into_iter().collect();
        let haystack: Vec<u8> = (0..file_len).map(|_| rng.gen_range(0..8u8)).collect();

        let compiled = compile_patterns(patterns).expect("compile");
        let (fv, stats) = featurize(SampleId(format!("i{instance}")), &haystack, &compiled);
        for (j, pattern) in compiled.set.patterns().iter().enumerate() {
            let expected = if haystack.len() >= pattern.len() {
                haystack
                    .windows(pattern.len())
                    .filter(|w| w == &pattern.as_slice())
                    .count() as u64
            } else {
                0
            };
            assert_eq!(stats.counts[j], expected, "instance {instance} pattern {j}");
            assert_eq!(fv.presence.get(j), expected > 0);
        }
    }
    println!("CRITERION 4 PASS — 50 instances, presence and counts equal naive search");
}

/// Exhaustive selection oracle with the stated tie-break.
#[allow(clippy::type_complexity)]
fn selection_oracle(
    reps: &[gramsift_core::miner::FamilyRepresentatives],
    families: &[(String, Vec<&Sample>)],
    budget: usize,
) -> BTreeMap<Vec<u8>, Vec<(String, String, f64)>> {
    let k = families.len();
    let quota = budget / (k * (k - 1) / 2);
    let contains = |hay: &[u8], needle: &[u8]| -> bool {
        hay.len() >= needle.len() && hay.windows(needle.len()).any(|w| w == needle)
    };
    let mut merged: BTreeMap<Vec<u8>, Vec<(String, String, f64)>> = BTreeMap::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let mut cands: BTreeSet<Vec<u8>> = BTreeSet::new();
            for fi in [i, j] {
                for grams in reps[fi].per_length.values() {
                    for r in grams {
                        cands.insert(r.gram.clone());
                    }
                }
            }
            let mut scored: Vec<(Vec<u8>, f64)> = cands
                .into_iter()
                .map(|g| {
                    let p1 = families[i].1.iter().filter(|s| contains(&s.bytes, &g)).count();
                    let p2 = families[j].1.iter().filter(|s| contains(&s.bytes, &g)).count();
                    (g, gain_oracle(p1, p2, families[i].1.len(), families[j].1.len()))
                })
                .collect();
            scored.sort_by(|a, b| {
                b.1.total_cmp(&a.1)
                    .then_with(|| a.0.len().cmp(&b.0.len()))
                    .then_with(|| a.0.cmp(&b.0))
            });
            scored.truncate(quota);
            for (g, gain) in scored {
                merged
                    .entry(g)
                    .or_default()
                    .push((families[i].0.clone(), families[j].0.clone(), gain));
            }
        }
    }
    merged
}

#[test]
fn criterion_05_selection_oracle_and_budget() {
    // three families with planted markers over random text plus a decoy
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC_05);
    let markers: [&[u8]; 3] = [b"MK_Aw", b"MK_Bx", b"MK_Cy"];
    let mut samples = Vec::new();
    for (fi, fam) in ["fa", "fb", "fc"].iter().enumerate() {
        for i in 0..10 {
            let mut bytes: Vec<u8> = (0..160).map(|_| rng.gen_range(b'a'..=b'h')).collect();
            if i < 9 {
                bytes[40..45].copy_from_slice(markers[fi]);
            }
            bytes[90..94].copy_from_slice(b"XYZW");
            samples.push(sample(&format!("{fam}/{i}"), fam, bytes));
        }
    }
    let corpus = Corpus::from_samples(samples).unwrap();
    let families = corpus.family_view(None);

    let thresholds = EntropyThresholds::from_text(
        "4\t5.0000000000000000e-1\t1.0000000000000000e0\t5.0000000000000000e-1\n\
         8\t5.0000000000000000e-1\t1.0000000000000000e0\t5.0000000000000000e-1\n",
        String::new(),
        0,
    )
    .unwrap();
    let cfg2 = Stage2Config { gamma: 0.5, memory_cap_bytes: None };
    let reps: Vec<_> = families
        .iter()
        .map(|(name, s)| mine_family(name, s, &thresholds, &cfg2).unwrap())
        .collect();

    let budget = 30usize;
    let cfg3 = Stage3Config { budget_b: budget };
    let selected = select_pairwise(&reps, &families, &cfg3).unwrap();
    let again = select_pairwise(&reps, &families, &cfg3).unwrap();
    assert_eq!(selected, again, "selection must be deterministic");

    let oracle = selection_oracle(&reps, &families, budget);
    assert_eq!(selected.len(), oracle.len());
    for f in &selected {
        let want = oracle.get(&f.gram).expect("oracle selected the same gram");
        assert_eq!(f.tags.len(), want.len());
        for (tag, (a, b, gain)) in f.tags.iter().zip(want) {
            assert_eq!(&tag.families.0, a);
            assert_eq!(&tag.families.1, b);
            assert!((tag.gain - gain).abs() < 1e-12);
        }
    }

    assert!(selected.len() <= budget);
    let quota = budget / 3;
    let mut per_pair: BTreeMap<(String, String), usize> = BTreeMap::new();
    for f in &selected {
        for t in &f.tags {
            *per_pair.entry(t.families.clone()).or_insert(0) += 1;
        }
    }
    for (pair, count) in &per_pair {
        assert!(count <= &quota, "pair {pair:?} got {count} > quota {quota}");
    }
    println!(
        "CRITERION 5 PASS — selection equals exhaustive oracle; |selected| = {} <= B = {budget}, per-pair <= {quota}",
        selected.len()
    );
}

/// Generate the benchmark corpus, split 70/30, and write both manifests.
fn prepare_benchmark(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let spec = benchmark_spec(seed, 50, 4096);
    let generated = generate(&spec, dir).expect("generate");
    let corpus = load_corpus(dir, &generated.manifest).expect("load");
    let split = stratified_split(&corpus, 0.7, seed).expect("split");

    let mut train = String::new();
    let mut test = String::new();
    for s in corpus.samples() {
        let line = format!("{}\t{}\n", s.id, s.family);
        if split.train_ids.contains(&s.id) {
            train.push_str(&line);
        } else {
            test.push_str(&line);
        }
    }
    let train_path = dir.join("train.tsv");
    let test_path = dir.join("test.tsv");
    std::fs::write(&train_path, train).unwrap();
    std::fs::write(&test_path, test).unwrap();
    (train_path, test_path)
}

fn run_ok(cmd: &mut Command) -> String {
    let output = cmd.output().expect("spawn gramsift");
    assert!(
        output.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf-8 stdout")
}

fn train_benchmark(dir: &Path, train_manifest: &Path, out: &Path, threads: usize) -> String {
    run_ok(
        gramsift()
            .arg("train")
            .arg("--threads")
            .arg(threads.to_string())
            .arg("--corpus")
            .arg(dir)
            .arg("--manifest")
            .arg(train_manifest)
            .arg("--out")
            .arg(out)
            .args(["--seed", "11", "--trees", "200", "--budget", "600", "--feature-cap", "100"]),
    )
}

fn parse_metric(output: &str, name: &str) -> f64 {
    output
        .lines()
        .find_map(|l| {
            let rest = l.strip_prefix(name)?;
            rest.trim().parse::<f64>().ok()
        })
        .unwrap_or_else(|| panic!("no {name} line in output:\n{output}"))
}

#[test]
fn criterion_06_end_to_end_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let started = Instant::now();
    let (train_manifest, test_manifest) = prepare_benchmark(dir, 11);

    let bundle_dir = dir.join("bundle");
    let train_out = train_benchmark(dir, &train_manifest, &bundle_dir, 4);
    for label in STAGE_LABELS {
        assert!(train_out.contains(label), "missing stage row {label:?}");
    }

    let eval_out = run_ok(
        gramsift()
            .arg("evaluate")
            .args(["--threads", "4"])
            .arg("--bundle")
            .arg(&bundle_dir)
            .arg("--corpus")
            .arg(dir)
            .arg("--manifest")
            .arg(&test_manifest),
    );
    let accuracy = parse_metric(&eval_out, "accuracy");
    let loss = parse_metric(&eval_out, "logloss");
    assert!(accuracy >= 0.99, "test accuracy {accuracy} < 0.99");
    assert!(loss <= 0.05, "calibrated logloss {loss} > 0.05");

    // every planted signature must appear in the report of every pair
    // involving its family
    let explain_out = run_ok(
        gramsift()
            .arg("explain")
            .arg("--bundle")
            .arg(&bundle_dir)
            .args(["--top", "40"]),
    );
    let spec = benchmark_spec(11, 50, 4096);
    let mut sections: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut current: Option<(String, String)> = None;
    for line in explain_out.lines() {
        if let Some(rest) = line.strip_prefix("== pair ") {
            let (a, b) = rest.split_once(" | ").expect("pair header");
            current = Some((a.to_string(), b.to_string()));
            sections.insert(current.clone().unwrap(), String::new());
        } else if line.starts_with("== family ") {
            current = None;
        } else if let Some(key) = &current {
            sections.get_mut(key).unwrap().push_str(line);
            sections.get_mut(key).unwrap().push('\n');
        }
    }
    assert_eq!(sections.len(), 15, "expected all 15 pair sections");
    for fam in &spec.families {
        for sig in &fam.signatures {
            let ascii = String::from_utf8(hex::decode(&sig.bytes_hex).unwrap()).unwrap();
            for (pair, body) in &sections {
                if pair.0 == fam.name || pair.1 == fam.name {
                    assert!(
                        body.contains(&format!("\"{ascii}\"")),
                        "signature {ascii:?} of {} missing from pair {pair:?} section:\n{body}",
                        fam.name
                    );
                }
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "end-to-end benchmark took {elapsed:?}"
    );
    println!(
        "CRITERION 6 PASS — accuracy {accuracy:.4}, logloss {loss:.5}, all signatures reported, {elapsed:?}"
    );
}

#[test]
fn criterion_07_pruning_recovers_planted_features() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACC_07 + seed);
        let k = 5usize;
        let per_class = 30usize;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..k {
            for _ in 0..per_class {
                let mut row = vec![0.0f64; 10 + 1000];
                row[class * 2] = 1.0;
                row[class * 2 + 1] = 1.0;
                for noise in row.iter_mut().skip(10) {
                    *noise = if rng.gen_bool(0.3) { 1.0 } else { 0.0 };
                }
                rows.push(row);
                labels.push(class);
            }
        }
        let matrix = DataMatrix::from_rows(rows).unwrap();
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let cfg = ForestConfig {
            n_trees: 150,
            feature_cap_c: 50,
            seed,
            ..Default::default()
        };
        let forest = train_initial(&matrix, &labels, &classes, &cfg).unwrap();
        let (survivors, _) = prune_and_retrain(&forest, &matrix, &labels, &cfg).unwrap();
        for planted in 0..10usize {
            assert!(
                survivors.contains(&planted),
                "seed {seed}: planted column {planted} was pruned; kept {survivors:?}"
            );
        }
    }
    println!("CRITERION 7 PASS — 10/10 planted columns survive C=50 pruning across 5 seeds");
}

#[test]
fn criterion_08_logloss_spot_values() {
    let perfect = PredictionMatrix {
        sample_ids: vec!["a".into(), "b".into()],
        probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        truth: vec![0, 1],
        class_order: vec!["x".into(), "y".into()],
    };
    let l_perfect = logloss(&perfect, 1e-15).unwrap();
    assert!(l_perfect <= 2e-15, "perfect logloss {l_perfect}");

    let uniform = PredictionMatrix {
        sample_ids: (0..9).map(|i| format!("s{i}")).collect(),
        probs: vec![vec![1.0 / 9.0; 9]; 9],
        truth: (0..9).collect(),
        class_order: (0..9).map(|c| format!("c{c}")).collect(),
    };
    let l_uniform = logloss(&uniform, 1e-15).unwrap();
    assert!(
        (l_uniform - 9.0f64.ln()).abs() < 1e-9,
        "uniform logloss {l_uniform} vs ln 9"
    );
    println!(
        "CRITERION 8 PASS — perfect {l_perfect:.2e} <= 2e-15, uniform {l_uniform:.12} = ln 9"
    );
}

#[test]
fn criterion_09_reproducibility_across_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (train_manifest, test_manifest) = prepare_benchmark(dir, 23);

    let mut bundles = Vec::new();
    for (i, threads) in [1usize, 8, 1, 8].into_iter().enumerate() {
        let out = dir.join(format!("bundle{i}"));
        train_benchmark(dir, &train_manifest, &out, threads);
        bundles.push(out);
    }
    for name in ["meta", "features", "thresholds", "forest", "calibrator"] {
        let reference = std::fs::read(bundles[0].join(name)).unwrap();
        for other in &bundles[1..] {
            assert_eq!(
                reference,
                std::fs::read(other.join(name)).unwrap(),
                "{name} differs between runs"
            );
        }
    }

    // classification output must be bitwise identical across thread counts
    let test_corpus = load_corpus(dir, &test_manifest).unwrap();
    let input_dir = dir.join("test_inputs");
    std::fs::create_dir_all(&input_dir).unwrap();
    for s in test_corpus.samples() {
        let flat = s.id.0.replace('/', "_");
        std::fs::write(input_dir.join(flat), &s.bytes).unwrap();
    }
    let mut outputs = Vec::new();
    for threads in [1usize, 8] {
        let out_file = dir.join(format!("pred_t{threads}.tsv"));
        run_ok(
            gramsift()
                .arg("classify")
                .arg("--threads")
                .arg(threads.to_string())
                .arg("--bundle")
                .arg(&bundles[0])
                .arg("--input")
                .arg(&input_dir)
                .arg("--out")
                .arg(&out_file),
        );
        outputs.push(std::fs::read(out_file).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "predictions differ across thread counts");
    println!("CRITERION 9 PASS — byte-identical bundles and predictions at 1 and 8 threads");
}

#[test]
fn criterion_10_timing_table_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let spec = benchmark_spec(31, 6, 1024);
    let generated = generate(&spec, dir).unwrap();

    let out = run_ok(
        gramsift()
            .arg("train")
            .arg("--corpus")
            .arg(dir)
            .arg("--manifest")
            .arg(&generated.manifest)
            .arg("--out")
            .arg(dir.join("bundle"))
            .args(["--seed", "1", "--trees", "20", "--budget", "300", "--feature-cap", "50"]),
    );
    for label in STAGE_LABELS {
        let row = out
            .lines()
            .find(|l| l.starts_with(label))
            .unwrap_or_else(|| panic!("no timing row for {label:?}:\n{out}"));
        let rest = row[label.len()..].trim();
        let value = rest
            .strip_suffix('s')
            .map(str::trim)
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or_else(|| panic!("row {row:?} does not end in a seconds value"));
        assert!(value >= 0.0);
    }
    println!("CRITERION 10 PASS — all five stage rows present with timings");
}
