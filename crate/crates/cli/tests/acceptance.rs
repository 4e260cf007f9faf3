//! Acceptance suite: every release gate runs here, one test per
//! criterion, each printing a PASS line with its runtime.
//!
//! Run with `cargo test -p neurolabel --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use neurolabel_core::corpus::{EmbeddingMatrix, LabelVocabulary, SourceTag};
use neurolabel_core::metrics::{
    auc_exact_pairwise, auc_rank_based, pearson, scs, sigmoid, wilcoxon_paired,
};
use neurolabel_core::projection::{assign_csp, assign_semanticlens, csp_residual, Pipeline};
use neurolabel_core::retrieval::{ContrastiveSample, NeuronEvidence, PositiveSample};
use neurolabel_core::rng::SplitMix64;
use neurolabel_core::simulator::{
    concept_recovery_benchmark, generate_world, verify_closed_form_residual, BenchmarkRow,
    LinearWorld, WorldConfig,
};
use neurolabel_core::vecmath::{dot_f32, dot_f64, normalize_f64};

fn pass(criterion: u32, elapsed: f64, detail: &str) {
    println!("[acceptance] criterion {criterion} PASS ({elapsed:.2}s): {detail}");
}

fn world_config(seed: u64) -> WorldConfig {
    WorldConfig {
        dim: 64,
        neurons: 3,
        pairs_per_neuron: 5,
        alignment: 0.0,
        alpha_range: (1.0, 1.5),
        beta_range: (2.25, 2.75),
        beta_prime_range: None,
        noise_positive: 0.0,
        noise_contrastive: 0.0,
        distractors: 4,
        seed,
    }
}

fn accuracy_of(rows: &[BenchmarkRow], pipeline: Pipeline, gamma: Option<f64>) -> f64 {
    rows.iter()
        .find(|r| r.pipeline == pipeline && r.gamma == gamma)
        .unwrap_or_else(|| panic!("missing benchmark row {pipeline:?} {gamma:?}"))
        .accuracy
}

/// Criterion 1: on 100 seeded noiseless worlds (d = 64, alignments 0,
/// 0.2 and 0.6) the engine residual matches the linear-model closed form
/// to 1e-9 for gamma in {0, 0.5, 1}, in under 5 seconds.
#[test]
fn c1_closed_form_residual_oracle() {
    let start = Instant::now();
    let mut max_dev = 0.0f64;
    for i in 0..100u64 {
        let mut config = world_config(1_000 + i);
        config.alignment = [0.0, 0.2, 0.6][(i % 3) as usize];
        let world = generate_world(&config).expect("world generates");
        for gamma in [0.0, 0.5, 1.0] {
            let dev = verify_closed_form_residual(&world, gamma).expect("noiseless world");
            assert!(
                dev <= 1e-9,
                "world {i} gamma {gamma}: deviation {dev:.3e} above 1e-9"
            );
            max_dev = max_dev.max(dev);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "criterion 1 took {elapsed:.2}s (limit 5s)");
    pass(
        1,
        elapsed,
        &format!("max closed-form deviation {max_dev:.2e}"),
    );
}

/// Criterion 2: noiseless orthogonal world, nuisance coefficient twice
/// the concept coefficient, 200 neurons: full projection recovers every
/// concept label while plain positive aggregation locks onto the
/// nuisance label, in under 10 seconds.
#[test]
fn c2_concept_recovery_split() {
    let start = Instant::now();
    let mut config = world_config(42);
    config.neurons = 200;
    config.pairs_per_neuron = 8;
    config.distractors = 30;
    // beta mean 2.5 versus alpha mean 1.25.
    let world = generate_world(&config).expect("world generates");
    let rows =
        concept_recovery_benchmark(&world, &[1.0], &[Pipeline::SemanticLens, Pipeline::Csp], 1)
            .expect("benchmark runs");
    let csp_acc = accuracy_of(&rows, Pipeline::Csp, Some(1.0));
    let sl = rows
        .iter()
        .find(|r| r.pipeline == Pipeline::SemanticLens)
        .unwrap();
    assert_eq!(csp_acc, 1.0, "full projection must recover every concept");
    assert!(
        sl.nuisance_rate >= 0.95,
        "plain aggregation should pick the nuisance label, rate {}",
        sl.nuisance_rate
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 2 took {elapsed:.2}s (limit 10s)");
    pass(
        2,
        elapsed,
        &format!(
            "csp accuracy {csp_acc:.2}, semanticlens nuisance rate {:.2}",
            sl.nuisance_rate
        ),
    );
}

/// Criterion 3: with coordinate noise 0.1 and alignment 0.2, full
/// projection beats plain aggregation by at least 0.2 accuracy averaged
/// over 10 seeds, in under 30 seconds.
#[test]
fn c3_noisy_regime_ordering() {
    let start = Instant::now();
    let mut csp_sum = 0.0;
    let mut sl_sum = 0.0;
    let seeds = 10;
    for seed in 0..seeds {
        let mut config = world_config(100 + seed);
        config.neurons = 60;
        config.pairs_per_neuron = 8;
        config.alignment = 0.2;
        config.noise_positive = 0.1;
        config.noise_contrastive = 0.1;
        config.distractors = 20;
        let world = generate_world(&config).expect("world generates");
        let rows =
            concept_recovery_benchmark(&world, &[1.0], &[Pipeline::SemanticLens, Pipeline::Csp], 1)
                .expect("benchmark runs");
        csp_sum += accuracy_of(&rows, Pipeline::Csp, Some(1.0));
        sl_sum += accuracy_of(&rows, Pipeline::SemanticLens, None);
    }
    let csp_mean = csp_sum / seeds as f64;
    let sl_mean = sl_sum / seeds as f64;
    assert!(
        csp_mean - sl_mean >= 0.2,
        "csp {csp_mean:.3} vs semanticlens {sl_mean:.3}: gap below 0.2"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "criterion 3 took {elapsed:.2}s (limit 30s)");
    pass(
        3,
        elapsed,
        &format!("mean accuracy csp {csp_mean:.3} vs semanticlens {sl_mean:.3}"),
    );
}

fn mean_pair_cosine(world: &LinearWorld) -> f64 {
    let mut total = 0.0f64;
    let mut pairs = 0usize;
    for n in &world.ground_truth.neurons {
        for (&p, &c) in n.positive_rows.iter().zip(&n.contrastive_rows) {
            total += dot_f32(world.embeddings.row(p), world.embeddings.row(c));
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Criterion 4: when positives and contrastives are nearly parallel
/// (mean cosine at least 0.95), half-strength projection recovers at
/// least as well as full projection over 10 seeds, in under 30 seconds.
#[test]
fn c4_over_projection_ordering() {
    let start = Instant::now();
    let mut half_sum = 0.0;
    let mut full_sum = 0.0;
    let mut cosine_sum = 0.0;
    let seeds = 10;
    for seed in 0..seeds {
        let mut config = world_config(200 + seed);
        config.neurons = 60;
        config.pairs_per_neuron = 8;
        config.alignment = 0.95;
        config.alpha_range = (0.9, 1.1);
        config.beta_range = (0.9, 1.1);
        config.noise_positive = 0.03;
        config.noise_contrastive = 0.03;
        config.distractors = 30;
        let world = generate_world(&config).expect("world generates");
        cosine_sum += mean_pair_cosine(&world);
        let rows = concept_recovery_benchmark(&world, &[0.5, 1.0], &[Pipeline::Csp], 1)
            .expect("benchmark runs");
        half_sum += accuracy_of(&rows, Pipeline::Csp, Some(0.5));
        full_sum += accuracy_of(&rows, Pipeline::Csp, Some(1.0));
    }
    let mean_cosine = cosine_sum / seeds as f64;
    let half = half_sum / seeds as f64;
    let full = full_sum / seeds as f64;
    assert!(
        mean_cosine >= 0.95,
        "world not in the over-projection regime: mean cosine {mean_cosine:.4}"
    );
    assert!(
        half >= full,
        "half projection {half:.3} should recover at least full projection {full:.3}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "criterion 4 took {elapsed:.2}s (limit 30s)");
    pass(
        4,
        elapsed,
        &format!(
            "mean pair cosine {mean_cosine:.3}; accuracy gamma=0.5 {half:.3} vs gamma=1 {full:.3}"
        ),
    );
}

/// Criterion 5: metric oracles. AUC equals exhaustive pairwise
/// enumeration exactly on 1000 random tie-heavy instances; the
/// correlation score matches the direct two-pass formula within 1e-12;
/// exact signed-rank p-values match full sign-pattern enumeration for
/// n ≤ 12.
#[test]
fn c5_metric_oracles() {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xACCE);

    for case in 0..1000 {
        let np = 1 + rng.next_usize(20);
        let nn = 1 + rng.next_usize(20);
        // Half the instances draw from a coarse grid to force ties.
        let draw = |rng: &mut SplitMix64, grid: bool| -> f64 {
            if grid {
                rng.next_usize(5) as f64 / 4.0
            } else {
                rng.next_f64()
            }
        };
        let grid = case % 2 == 0;
        let pos: Vec<f64> = (0..np).map(|_| draw(&mut rng, grid)).collect();
        let neg: Vec<f64> = (0..nn).map(|_| draw(&mut rng, grid)).collect();
        let got = auc_exact_pairwise(&pos, &neg).unwrap();
        // Independent enumeration: accumulate doubled per-pair credit.
        let mut doubled_credit: u64 = 0;
        for p in &pos {
            for n in &neg {
                if p > n {
                    doubled_credit += 2;
                } else if p == n {
                    doubled_credit += 1;
                }
            }
        }
        let oracle = doubled_credit as f64 / (2 * np as u64 * nn as u64) as f64;
        assert_eq!(
            got, oracle,
            "case {case}: auc {got} vs enumeration {oracle}"
        );
    }

    for case in 0..500 {
        let n = 2 + rng.next_usize(40);
        let acts: Vec<f64> = (0..n).map(|_| rng.next_gaussian() * 3.0 + 1.0).collect();
        let sims: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        let tau = 0.5 + rng.next_f64();
        match scs(&acts, &sims, tau) {
            Ok(got) => {
                // Direct two-pass formula, written out longhand.
                let soft: Vec<f64> = sims.iter().map(|s| sigmoid(s / tau)).collect();
                let nf = n as f64;
                let ma = acts.iter().sum::<f64>() / nf;
                let ms = soft.iter().sum::<f64>() / nf;
                let mut num = 0.0;
                let mut da = 0.0;
                let mut ds = 0.0;
                for i in 0..n {
                    num += (acts[i] - ma) * (soft[i] - ms);
                    da += (acts[i] - ma) * (acts[i] - ma);
                    ds += (soft[i] - ms) * (soft[i] - ms);
                }
                let oracle = num / (da.sqrt() * ds.sqrt());
                assert!(
                    (got - oracle).abs() <= 1e-12,
                    "case {case}: scs {got} vs two-pass {oracle}"
                );
                let direct = pearson(&acts, &soft).unwrap();
                assert!((got - direct).abs() <= 1e-12);
            }
            Err(e) => panic!("case {case}: unexpected error {e}"),
        }
    }

    let mut checked = 0usize;
    for case in 0..400 {
        let n = 1 + case % 12;
        let x: Vec<f64> = (0..n).map(|_| rng.next_usize(5) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.next_usize(5) as f64).collect();
        let Ok(result) = wilcoxon_paired(&x, &y) else {
            continue;
        };
        assert!(result.exact);
        // Oracle: brute-force enumeration of all 2^n sign patterns over
        // the observed average ranks.
        let diffs: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| a - b)
            .filter(|d| *d != 0.0)
            .collect();
        let m = diffs.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
        let mut ranks = vec![0.0f64; m];
        let mut i = 0;
        while i < m {
            let mut j = i;
            while j < m && diffs[order[j]].abs() == diffs[order[i]].abs() {
                j += 1;
            }
            let avg = (i + 1 + j) as f64 / 2.0;
            for &idx in &order[i..j] {
                ranks[idx] = avg;
            }
            i = j;
        }
        let total: f64 = ranks.iter().sum();
        let observed = result.statistic;
        let mut count = 0u64;
        for mask in 0u64..(1 << m) {
            let w_plus: f64 = (0..m)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| ranks[i])
                .sum();
            if w_plus.min(total - w_plus) <= observed {
                count += 1;
            }
        }
        let oracle = count as f64 / (1u64 << m) as f64;
        assert_eq!(
            result.p_value, oracle,
            "case {case}: p {} vs enumeration {oracle}",
            result.p_value
        );
        checked += 1;
    }
    assert!(checked > 300, "too few non-degenerate signed-rank cases");

    let elapsed = start.elapsed().as_secs_f64();
    pass(5, elapsed, "auc, correlation and signed-rank oracles agree");
}

/// Criterion 6: projection invariants over 10,000 random unit-vector
/// instances: identity at gamma 0, orthogonality at gamma 1 within
/// 1e-10, the exact (1−gamma)|overlap| leftover, and argmax invariance
/// under positive activation scaling.
#[test]
fn c6_projection_invariants() {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x1A6A);
    let unit = |rng: &mut SplitMix64, dim: usize| -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
            if normalize_f64(&mut v) > 1e-6 {
                return v;
            }
        }
    };
    for case in 0..10_000 {
        let dim = 2 + rng.next_usize(63);
        let p = unit(&mut rng, dim);
        let n = unit(&mut rng, dim);
        assert_eq!(
            csp_residual(&p, &n, 0.0),
            p,
            "case {case}: gamma-0 identity"
        );
        let ortho = dot_f64(&csp_residual(&p, &n, 1.0), &n).abs();
        assert!(ortho <= 1e-10, "case {case}: orthogonality {ortho:.2e}");
        let gamma = rng.next_f64();
        let leftover = dot_f64(&csp_residual(&p, &n, gamma), &n);
        let expected = (1.0 - gamma) * dot_f64(&p, &n);
        assert!(
            (leftover - expected).abs() <= 1e-12,
            "case {case}: leftover {leftover} vs {expected}"
        );
    }

    // Argmax invariance under positive activation scaling.
    for case in 0..1000 {
        let dim = 8;
        let pairs = 4;
        let rows: Vec<Vec<f64>> = (0..2 * pairs).map(|_| unit(&mut rng, dim)).collect();
        let emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
        let vocab_rows: Vec<Vec<f64>> = (0..12).map(|_| unit(&mut rng, dim)).collect();
        let vocab = LabelVocabulary::new(
            (0..12).map(|i| format!("label_{i}")).collect(),
            vec![SourceTag::Baseline; 12],
            EmbeddingMatrix::from_rows_f64(&vocab_rows).unwrap(),
        )
        .unwrap();
        let base_acts: Vec<f64> = (0..pairs).map(|_| 0.1 + rng.next_f64()).collect();
        let gamma = rng.next_f64();
        let scale = [1e-3, 0.5, 7.0, 1e3][case % 4];
        let evidence = |s: f64| NeuronEvidence {
            neuron_id: 0,
            mean_activation: 0.0,
            positives: (0..pairs)
                .map(|k| PositiveSample {
                    index: k,
                    activation: s * base_acts[k],
                })
                .collect(),
            contrastives: (0..pairs)
                .map(|k| ContrastiveSample {
                    index: pairs + k,
                    activation: 0.0,
                    similarity: 0.0,
                })
                .collect(),
        };
        let (a, _) = assign_csp(&evidence(1.0), &emb, &vocab, gamma, 1).unwrap();
        let (b, _) = assign_csp(&evidence(scale), &emb, &vocab, gamma, 1).unwrap();
        assert_eq!(a.label, b.label, "case {case}: scaling changed the argmax");
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass(
        6,
        elapsed,
        "identity, orthogonality, leftover and scaling hold",
    );
}

/// Criterion 7: pipeline equivalences. Uniform-activation projection at
/// gamma 0 equals plain positive aggregation on all 500 neurons of a
/// random corpus, and the exact and rank-based AUC routes agree to 1e-12.
#[test]
fn c7_pipeline_equivalences() {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x7777);
    let dim = 16;
    let pairs = 5;
    let rows: Vec<Vec<f64>> = (0..3000)
        .map(|_| {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
            normalize_f64(&mut v);
            v
        })
        .collect();
    let emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
    let vocab_rows: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..dim).map(|_| rng.next_gaussian()).collect())
        .collect();
    let vocab = LabelVocabulary::new(
        (0..50).map(|i| format!("label_{i}")).collect(),
        vec![SourceTag::Baseline; 50],
        EmbeddingMatrix::from_rows_f64(&vocab_rows).unwrap(),
    )
    .unwrap();
    for neuron in 0..500 {
        let uniform = 0.2 + rng.next_f64();
        let evidence = NeuronEvidence {
            neuron_id: neuron,
            mean_activation: 0.0,
            positives: (0..pairs)
                .map(|_| PositiveSample {
                    index: rng.next_usize(3000),
                    activation: uniform,
                })
                .collect(),
            contrastives: (0..pairs)
                .map(|_| ContrastiveSample {
                    index: rng.next_usize(3000),
                    activation: 0.0,
                    similarity: 0.0,
                })
                .collect(),
        };
        let sl = assign_semanticlens(&evidence, &emb, &vocab, 1).unwrap();
        let (csp, _) = assign_csp(&evidence, &emb, &vocab, 0.0, 1).unwrap();
        assert_eq!(sl.label, csp.label, "neuron {neuron}: argmax diverged");
    }

    // Exact and rank-based AUC agreement, up to the 10^6-pair budget.
    for case in 0..60 {
        let np = 1 + rng.next_usize(1000);
        let nn = 1 + rng.next_usize(1000);
        let grid = case % 2 == 0;
        let draw = |rng: &mut SplitMix64| -> f64 {
            if grid {
                rng.next_usize(7) as f64
            } else {
                rng.next_f64()
            }
        };
        let pos: Vec<f64> = (0..np).map(|_| draw(&mut rng)).collect();
        let neg: Vec<f64> = (0..nn).map(|_| draw(&mut rng)).collect();
        let exact = auc_exact_pairwise(&pos, &neg).unwrap();
        let ranked = auc_rank_based(&pos, &neg).unwrap();
        assert!(
            (exact - ranked).abs() <= 1e-12,
            "case {case}: exact {exact} vs ranked {ranked}"
        );
    }
    let pos: Vec<f64> = (0..1000).map(|_| rng.next_usize(9) as f64).collect();
    let neg: Vec<f64> = (0..1000).map(|_| rng.next_usize(9) as f64).collect();
    let exact = auc_exact_pairwise(&pos, &neg).unwrap();
    let ranked = auc_rank_based(&pos, &neg).unwrap();
    assert!((exact - ranked).abs() <= 1e-12);

    let elapsed = start.elapsed().as_secs_f64();
    pass(
        7,
        elapsed,
        "gamma-0 equals plain aggregation; auc routes agree",
    );
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neurolabel"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run_toy_pipeline(out: &Path, workers: &str) {
    let manifest = fixtures().join("toy/manifest.json");
    let manifest = manifest.to_str().unwrap();
    let out_str = out.to_str().unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec!["retrieve", "--manifest", manifest],
        vec!["assign", "--manifest", manifest, "--evidence", "EVIDENCE"],
        vec![
            "evaluate",
            "--manifest",
            manifest,
            "--assignments",
            "ASSIGNMENTS",
        ],
        vec![
            "prompts",
            "--manifest",
            manifest,
            "--evidence",
            "EVIDENCE",
            "--mode",
            "contrastive",
            "--rows",
            "1",
            "--cols",
            "3",
        ],
    ];
    let evidence = out.join("evidence.json");
    let assignments = out.join("assignments.json");
    for step in steps {
        let args: Vec<&str> = step
            .iter()
            .map(|a| match *a {
                "EVIDENCE" => evidence.to_str().unwrap(),
                "ASSIGNMENTS" => assignments.to_str().unwrap(),
                other => other,
            })
            .collect();
        let output = bin()
            .args(&args)
            .args(["--out", out_str, "--workers", workers])
            .output()
            .expect("binary runs");
        assert!(output.status.success(), "step {args:?} failed: {output:?}");
    }
}

fn canonical_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path
                .file_name()
                .unwrap()
                .to_str()
                .unwrap()
                .starts_with("timings_")
            {
                files.push(path);
            }
        }
    }
    files.sort();
    files
}

/// Criterion 8: determinism and formats. Three pipeline runs on the
/// bundled toy manifest, across worker counts 1 and 8, produce
/// byte-identical canonical outputs; the tensor format round-trips
/// bit-exactly; both prompt templates match their pinned golden bytes.
#[test]
fn c8_determinism_and_format() {
    let start = Instant::now();
    let runs = [
        (tempfile::tempdir().unwrap(), "1"),
        (tempfile::tempdir().unwrap(), "1"),
        (tempfile::tempdir().unwrap(), "1"),
        (tempfile::tempdir().unwrap(), "8"),
    ];
    for (dir, workers) in &runs {
        run_toy_pipeline(dir.path(), workers);
    }
    let reference = canonical_files(runs[0].0.path());
    assert!(
        reference.len() >= 10,
        "expected a full set of outputs, found {}",
        reference.len()
    );
    for (dir, workers) in &runs[1..] {
        let other = canonical_files(dir.path());
        assert_eq!(reference.len(), other.len());
        for (a, b) in reference.iter().zip(&other) {
            assert_eq!(
                a.file_name(),
                b.file_name(),
                "file sets diverge: {a:?} vs {b:?}"
            );
            let bytes_a = std::fs::read(a).unwrap();
            let bytes_b = std::fs::read(b).unwrap();
            assert_eq!(
                bytes_a,
                bytes_b,
                "output {:?} differs (workers {workers})",
                a.file_name().unwrap()
            );
        }
    }

    // Tensor format: save∘load∘save is byte-identical.
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SplitMix64::new(0xC8);
    for case in 0..100 {
        let rows = 1 + rng.next_usize(10);
        let dim = 1 + rng.next_usize(12);
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dim).map(|_| rng.next_gaussian() * 3.0).collect())
            .collect();
        let m = EmbeddingMatrix::from_rows_f64(&data).unwrap();
        let path_a = dir.path().join(format!("a{case}.emb1"));
        let path_b = dir.path().join(format!("b{case}.emb1"));
        m.save(&path_a).unwrap();
        EmbeddingMatrix::load(&path_a)
            .unwrap()
            .save(&path_b)
            .unwrap();
        assert_eq!(
            std::fs::read(&path_a).unwrap(),
            std::fs::read(&path_b).unwrap(),
            "case {case}: round trip changed bytes"
        );
    }

    // Prompt templates against their pinned golden bytes.
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    let positive = std::fs::read(golden_dir.join("positive_prompt.txt")).unwrap();
    let contrastive = std::fs::read(golden_dir.join("contrastive_prompt.txt")).unwrap();
    assert_eq!(
        neurolabel_core::prompts::POSITIVE_PROMPT.as_bytes(),
        positive
    );
    assert_eq!(
        neurolabel_core::prompts::CONTRASTIVE_PROMPT.as_bytes(),
        contrastive
    );

    let elapsed = start.elapsed().as_secs_f64();
    pass(
        8,
        elapsed,
        "byte-identical runs, bit-exact tensors, pinned templates",
    );
}

/// Criterion 9: ablation drivers. The gamma sweep emits exactly the
/// 11-point grid and the K sweep exactly the 10-point grid on a
/// synthetic world, and the leftover-nuisance column decreases
/// monotonically in gamma.
#[test]
fn c9_ablation_drivers() {
    let start = Instant::now();
    let world_dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "world": {
            "dim": 32,
            "neurons": 6,
            "pairs_per_neuron": 100,
            "alignment": 0.3,
            "alpha_range": [1.0, 1.5],
            "beta_range": [2.25, 2.75],
            "distractors": 6,
            "seed": 31
        },
        "gammas": [0.0, 0.5, 1.0],
        "pipelines": ["semanticlens", "csp"]
    });
    let config_path = world_dir.path().join("sim.json");
    std::fs::write(&config_path, config.to_string()).unwrap();
    let sim_out = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "simulate",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            sim_out.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let manifest = sim_out.path().join("manifest.json");

    let gamma_out = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "sweep",
            "--manifest",
            manifest.to_str().unwrap(),
            "--axis",
            "gamma",
            "--out",
            gamma_out.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let table: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(gamma_out.path().join("sweep_gamma.json")).unwrap(),
    )
    .unwrap();
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 11, "gamma grid must have exactly 11 points");
    let mut previous = f64::INFINITY;
    for (i, row) in rows.iter().enumerate() {
        let gamma = row["gamma"].as_f64().unwrap();
        assert_eq!(gamma, i as f64 / 10.0, "grid point {i}");
        let overlap = row["mean_abs_nuisance_overlap"].as_f64().unwrap();
        assert!(
            overlap <= previous + 1e-12,
            "nuisance column rose at gamma {gamma}: {overlap} > {previous}"
        );
        previous = overlap;
    }
    // The endpoints bracket the linear decay to (near) zero.
    assert!(rows[0]["mean_abs_nuisance_overlap"].as_f64().unwrap() > 0.5);
    assert!(rows[10]["mean_abs_nuisance_overlap"].as_f64().unwrap() < 1e-6);

    let k_out = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "sweep",
            "--manifest",
            manifest.to_str().unwrap(),
            "--axis",
            "k",
            "--out",
            k_out.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(k_out.path().join("sweep_k.json")).unwrap())
            .unwrap();
    let rows = table["rows"].as_array().unwrap();
    let mut ks: Vec<u64> = rows.iter().map(|r| r["k"].as_u64().unwrap()).collect();
    ks.dedup();
    assert_eq!(
        ks,
        (1..=10).map(|i| i * 10).collect::<Vec<u64>>(),
        "k grid must be 10..=100 by 10"
    );
    // One semanticlens row plus three csp gammas per grid point.
    assert_eq!(rows.len(), 40);

    let elapsed = start.elapsed().as_secs_f64();
    pass(
        9,
        elapsed,
        "pinned gamma/K grids with monotone nuisance column",
    );
}
