//! Acceptance suite. One test per criterion, each ending in a single
//! `acceptance criterion N (<name>): PASS` line (visible with
//! `cargo test --test acceptance -- --nocapture`); the harness line itself
//! reports pass/fail per criterion.
//!
//! Criteria:
//!  1. analytic gradients match central differences (< 1e-4, h = 1e-5)
//!  2. bi-directional voting matches a brute-force oracle exactly
//!  3. diversity rectification matches the direct formula within 1e-12
//!  4. EMA teacher error decays geometrically (1e-12 at n = 10, m = 0.9)
//!  5. end-to-end synthetic benchmark reaches test Hits@1 >= 0.95
//!  6. semi-supervised training beats supervised-only with 5% seeds
//!  7. the full model dominates the no-BDV and no-MDR ablations
//!  8. Hits@k / MRR equal hand-computed values on a fixed rank list
//!  9. reruns from a run manifest are byte-identical

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixtea_core::diff::{
    central_difference_gradient, max_relative_error, xavier_init, GradientTape, NodeId, Tensor,
};
use mixtea_core::encoder::{encode, EncoderConfig, GraphIndices, ModelParams, ParamNodes};
use mixtea_core::eval::{evaluate, hits_at_k, mean_reciprocal_rank, Direction, Split};
use mixtea_core::kg::{build_dataset, AlignmentDataset, EntityMapping, KnowledgeGraph, Triple};
use mixtea_core::pseudo::{bdv_fuse, mdr_rectify, pseudo_loss, VoteWeight};
use mixtea_core::synthetic::{write_openea_dir, SyntheticConfig};
use mixtea_core::train::{ema_update, margin_loss, train, NegativeSet, TrainConfig, TrainMode};

fn mixtea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixtea"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

// ---------------------------------------------------------------- criterion 1

fn check_gradients<F>(params: &[Tensor], build: F) -> f64
where
    F: Fn(&mut GradientTape, &[NodeId]) -> NodeId,
{
    let mut tape = GradientTape::new();
    let ids: Vec<NodeId> = params.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &ids);
    let grads = tape.backward(loss).expect("backward");
    let analytic: Vec<Tensor> = ids.iter().map(|&i| grads.get(i)).collect();
    let numeric = central_difference_gradient(
        |ps| {
            let mut tape = GradientTape::new();
            let ids: Vec<NodeId> = ps.iter().map(|t| tape.leaf(t.clone())).collect();
            let loss = build(&mut tape, &ids);
            tape.value(loss).scalar_value()
        },
        params,
        1e-5,
    );
    max_relative_error(&analytic, &numeric)
}

fn toy_pair() -> AlignmentDataset {
    let triples = vec![
        Triple { head: 0, relation: 0, tail: 1 },
        Triple { head: 1, relation: 1, tail: 2 },
        Triple { head: 2, relation: 0, tail: 3 },
        Triple { head: 3, relation: 1, tail: 4 },
        Triple { head: 4, relation: 0, tail: 0 },
    ];
    let kg = |name: &str| {
        KnowledgeGraph::new(
            name,
            (0..5).map(|i| format!("{name}{i}")).collect(),
            triples.clone(),
            2,
        )
        .unwrap()
    };
    AlignmentDataset::new(
        kg("s"),
        kg("t"),
        vec!["r0".into(), "r1".into()],
        vec![
            EntityMapping { source: 0, target: 0 },
            EntityMapping { source: 1, target: 1 },
        ],
        vec![EntityMapping { source: 2, target: 2 }],
        vec![
            EntityMapping { source: 3, target: 3 },
            EntityMapping { source: 4, target: 4 },
        ],
    )
    .unwrap()
}

#[test]
fn acceptance_1_gradient_fidelity() {
    let start = Instant::now();
    let tolerance = 1e-4;
    let mix = xavier_init(3, 4, 100).unwrap();

    // one check per differentiable operation
    let single_input: Vec<(&str, Box<dyn Fn(&mut GradientTape, NodeId) -> NodeId>)> = vec![
        ("elu", Box::new(|t, x| t.elu(x))),
        ("leaky_relu", Box::new(|t, x| t.leaky_relu(x, 0.2))),
        ("relu", Box::new(|t, x| t.relu(x))),
        ("transpose", Box::new(|t, x| t.transpose(x))),
        ("scale", Box::new(|t, x| t.scale(x, -1.7))),
        ("add_const", Box::new(|t, x| t.add_const(x, 0.9))),
        ("row_softmax", Box::new(|t, x| t.row_softmax(x, 0.6).unwrap())),
        ("row_normalize", Box::new(|t, x| t.row_normalize(x).unwrap())),
        (
            "gather_rows",
            Box::new(|t, x| t.gather_rows(x, Arc::new(vec![2, 0, 2])).unwrap()),
        ),
        (
            "segment_mean",
            Box::new(|t, x| {
                t.segment_mean(x, Arc::new(vec![vec![0, 1, 1], vec![2], vec![]])).unwrap()
            }),
        ),
    ];
    for (name, op) in &single_input {
        // inputs kept away from the piecewise kinks at zero
        let x = Tensor::new(3, 4, vec![
            -1.3, 0.6, 2.0, -0.4, 1.1, -2.2, 0.3, -0.8, 1.9, -1.1, 0.5, 2.4,
        ])
        .unwrap();
        let mix = mix.clone();
        let err = check_gradients(&[x], |tape, ids| {
            let y = op(tape, ids[0]);
            let rows = tape.value(y).rows();
            let cols = tape.value(y).cols();
            let weights: Vec<f64> = mix.data().iter().cycle().take(rows * cols).cloned().collect();
            let konst = tape.leaf(Tensor::new(rows, cols, weights).unwrap());
            let weighted = tape.mul_elem(y, konst).unwrap();
            tape.sum_all(weighted)
        });
        assert!(err < tolerance, "{name}: relative error {err}");
    }

    // ln needs a positive domain
    let pos = Tensor::new(1, 4, vec![0.3, 1.2, 2.7, 0.05]).unwrap();
    let err = check_gradients(&[pos], |tape, ids| {
        let y = tape.ln(ids[0]).unwrap();
        tape.sum_all(y)
    });
    assert!(err < tolerance, "ln: relative error {err}");

    // two-input operations
    let a = xavier_init(3, 4, 101).unwrap();
    let b = xavier_init(3, 4, 102).unwrap();
    for (name, err) in [
        (
            "add",
            check_gradients(&[a.clone(), b.clone()], |t, ids| {
                let y = t.add(ids[0], ids[1]).unwrap();
                let sq = t.mul_elem(y, y).unwrap();
                t.sum_all(sq)
            }),
        ),
        (
            "sub",
            check_gradients(&[a.clone(), b.clone()], |t, ids| {
                let y = t.sub(ids[0], ids[1]).unwrap();
                let sq = t.mul_elem(y, y).unwrap();
                t.sum_all(sq)
            }),
        ),
        (
            "mul_elem",
            check_gradients(&[a.clone(), b.clone()], |t, ids| {
                let y = t.mul_elem(ids[0], ids[1]).unwrap();
                t.sum_all(y)
            }),
        ),
        (
            "row_l2_distance",
            check_gradients(&[a.clone(), b.clone()], |t, ids| {
                let y = t.row_l2_distance(ids[0], ids[1]).unwrap();
                t.sum_all(y)
            }),
        ),
        (
            "cosine_sim_matrix",
            check_gradients(&[a.clone(), b.clone()], |t, ids| {
                let y = t.cosine_sim_matrix(ids[0], ids[1]).unwrap();
                let sq = t.mul_elem(y, y).unwrap();
                t.sum_all(sq)
            }),
        ),
        (
            "matmul",
            check_gradients(&[xavier_init(3, 4, 103).unwrap(), xavier_init(4, 2, 104).unwrap()], |t, ids| {
                let y = t.matmul(ids[0], ids[1]).unwrap();
                let sq = t.mul_elem(y, y).unwrap();
                t.sum_all(sq)
            }),
        ),
        (
            "concat_columns",
            check_gradients(&[a.clone(), b.clone()], |t, ids| {
                let y = t.concat_cols(&[ids[0], ids[1]]).unwrap();
                let sq = t.mul_elem(y, y).unwrap();
                t.sum_all(sq)
            }),
        ),
        (
            "scale_by_entry",
            check_gradients(&[a.clone(), xavier_init(4, 1, 105).unwrap()], |t, ids| {
                let y = t.scale_by_entry(ids[0], ids[1], 2).unwrap();
                let sq = t.mul_elem(y, y).unwrap();
                t.sum_all(sq)
            }),
        ),
    ] {
        assert!(err < tolerance, "{name}: relative error {err}");
    }

    // segment softmax and weighted aggregation over a shared offset table
    let offsets = Arc::new(vec![0usize, 2, 6]);
    let logits = xavier_init(6, 1, 106).unwrap();
    let seg_mix = xavier_init(6, 1, 107).unwrap();
    let err = {
        let offsets = offsets.clone();
        check_gradients(&[logits], move |t, ids| {
            let s = t.segment_softmax(ids[0], offsets.clone()).unwrap();
            let konst = t.leaf(seg_mix.clone());
            let weighted = t.mul_elem(s, konst).unwrap();
            t.sum_all(weighted)
        })
    };
    assert!(err < tolerance, "segment_softmax: relative error {err}");
    let err = check_gradients(
        &[xavier_init(6, 2, 108).unwrap(), xavier_init(6, 1, 109).unwrap()],
        move |t, ids| {
            let s = t.weighted_segment_sum(ids[0], ids[1], offsets.clone()).unwrap();
            let sq = t.mul_elem(s, s).unwrap();
            t.sum_all(sq)
        },
    );
    assert!(err < tolerance, "weighted_segment_sum: relative error {err}");

    // composed encoder + margin loss + pseudo loss on the 10-entity toy pair
    let dataset = toy_pair();
    let idx = GraphIndices::build(&dataset);
    let cfg = EncoderConfig { entity_dim: 3, relation_dim: 2, layers: 2 };
    let model = ModelParams::init(&cfg, idx.entity_count, idx.relation_count, 110).unwrap();
    let tensors: Vec<Tensor> = model.named_tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let positives = dataset.train.clone();
    let negatives = NegativeSet {
        target_side: vec![vec![2], vec![3]],
        source_side: vec![vec![3], vec![4]],
    };
    let unl_src: Vec<usize> = dataset.unlabeled_source.clone();
    let unl_tgt: Vec<usize> = dataset.unlabeled_target.iter().map(|&e| idx.global_target(e)).collect();
    let p_tilde = {
        let raw = xavier_init(unl_src.len(), unl_tgt.len(), 111).unwrap();
        let data = raw.data().iter().map(|v| v.abs().min(1.0)).collect();
        Tensor::new(unl_src.len(), unl_tgt.len(), data).unwrap()
    };
    let layers = cfg.layers;
    let err = check_gradients(&tensors, move |tape, ids| {
        let mut gat_weights = Vec::new();
        let mut attn_vectors = Vec::new();
        for l in 0..layers {
            gat_weights.push(ids[2 + 2 * l]);
            attn_vectors.push(ids[3 + 2 * l]);
        }
        let nodes = ParamNodes {
            entity_emb: ids[0],
            relation_emb: ids[1],
            gat_weights,
            attn_vectors,
            fusion_logits: ids[2 + 2 * layers],
        };
        let emb = encode(tape, &nodes, &idx, true).unwrap();
        let emb_norm = tape.row_normalize(emb).unwrap();
        let loss_a = margin_loss(tape, emb_norm, &positives, &negatives, &idx, 2.0).unwrap();
        let stu_src = tape.gather_rows(emb, unl_src.clone().into()).unwrap();
        let stu_tgt = tape.gather_rows(emb, unl_tgt.clone().into()).unwrap();
        let m_stu = tape.cosine_sim_matrix(stu_src, stu_tgt).unwrap();
        let loss_u = pseudo_loss(tape, m_stu, &p_tilde, 1.0, 1.0).unwrap();
        let weighted = tape.scale(loss_u, 0.7);
        tape.add(loss_a, weighted).unwrap()
    });
    assert!(err < tolerance, "composed encoder+loss: relative error {err}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "gradient fidelity took {elapsed:?}");
    println!("acceptance criterion 1 (gradient fidelity): PASS ({elapsed:?})");
}

// ------------------------------------------------------------ criteria 2 + 3

fn random_vote_fixture(rng: &mut ChaCha8Rng) -> (Tensor, Tensor, f64) {
    let rows = rng.gen_range(1..=8);
    let cols = rng.gen_range(1..=8);
    let fill = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let m_st = Tensor::new(rows, cols, fill(rng, rows * cols)).unwrap();
    let m_ts = Tensor::new(cols, rows, fill(rng, rows * cols)).unwrap();
    let beta: f64 = rng.gen();
    (m_st, m_ts, beta)
}

fn brute_force_votes(m_st: &Tensor, m_ts: &Tensor, beta: f64) -> Tensor {
    let argmax = |row: &[f64]| {
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        best
    };
    let mut p = Tensor::zeros(m_st.rows(), m_st.cols());
    for i in 0..m_st.rows() {
        let j = argmax(m_st.row(i));
        p.set(i, j, beta * 1.0);
    }
    for j in 0..m_ts.rows() {
        let i = argmax(m_ts.row(j));
        p.set(i, j, p.get(i, j) + (1.0 - beta) * 1.0);
    }
    p
}

#[test]
fn acceptance_2_bdv_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240001);
    for _ in 0..1000 {
        let (m_st, m_ts, beta) = random_vote_fixture(&mut rng);
        let got = bdv_fuse(&m_st, &m_ts, VoteWeight::new(beta).unwrap()).unwrap();
        let expect = brute_force_votes(&m_st, &m_ts, beta);
        assert_eq!(got, expect, "exact mismatch at beta {beta}");
        let one = beta + (1.0 - beta);
        for &v in got.data() {
            assert!(
                v == 0.0 || v == beta || v == 1.0 - beta || v == one,
                "value {v} outside {{0, beta, 1-beta, 1}}"
            );
            assert!(v == 0.0 || (v - 1.0).abs() < 1e-9 || v == beta || v == 1.0 - beta);
        }
    }
    println!("acceptance criterion 2 (BDV oracle equivalence): PASS");
}

#[test]
fn acceptance_3_mdr_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240001); // same fixtures as criterion 2
    for _ in 0..1000 {
        let (m_st, m_ts, beta) = random_vote_fixture(&mut rng);
        if beta == 0.0 {
            continue; // a zero forward weight may leave empty rows
        }
        let p = bdv_fuse(&m_st, &m_ts, VoteWeight::new(beta).unwrap()).unwrap();
        let rectified = mdr_rectify(&p).unwrap();
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                let v = p.get(i, j);
                let row_sum: f64 = (0..p.cols()).map(|k| p.get(i, k)).sum();
                let col_sum: f64 = (0..p.rows()).map(|k| p.get(k, j)).sum();
                let expect = if v == 0.0 { 0.0 } else { v / (row_sum + col_sum - v) };
                let got = rectified.get(i, j);
                assert!((got - expect).abs() < 1e-12, "direct formula mismatch");
                assert!(got <= v + 1e-15, "rectification increased confidence");
                assert!((0.0..=1.0).contains(&got));
            }
        }
    }

    // worked 2x2 example, exact
    let p = Tensor::new(2, 2, vec![1.0, 0.0, 0.5, 0.5]).unwrap();
    let r = mdr_rectify(&p).unwrap();
    assert_eq!(r.get(0, 0), 2.0 / 3.0);
    assert_eq!(r.get(0, 1), 0.0);
    assert_eq!(r.get(1, 0), 0.25);
    assert_eq!(r.get(1, 1), 0.5);
    println!("acceptance criterion 3 (MDR oracle equivalence): PASS");
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn acceptance_4_ema_geometric_decay() {
    let cfg = EncoderConfig { entity_dim: 4, relation_dim: 3, layers: 2 };
    let student = ModelParams::init(&cfg, 6, 3, 200).unwrap();
    let mut teacher = ModelParams::init(&cfg, 6, 3, 201).unwrap();
    let initial: Vec<Tensor> = teacher.named_tensors().iter().map(|(_, t)| (*t).clone()).collect();
    let m: f64 = 0.9;
    for _ in 0..10 {
        ema_update(&mut teacher, &student, m).unwrap();
    }
    let factor = m.powi(10);
    for (((_, tea), (_, stu)), init) in teacher
        .named_tensors()
        .iter()
        .zip(student.named_tensors().iter())
        .zip(&initial)
    {
        for ((t, s), i) in tea.data().iter().zip(stu.data()).zip(init.data()) {
            let expected = factor * (i - s);
            assert!(
                ((t - s) - expected).abs() < 1e-12,
                "decay deviates: {} vs {}",
                t - s,
                expected
            );
        }
    }
    println!("acceptance criterion 4 (EMA geometric decay): PASS");
}

// ---------------------------------------------------------------- criterion 5

fn parse_report_line(line: &str) -> (f64, f64, f64) {
    let mut hits1 = None;
    let mut hits5 = None;
    let mut mrr = None;
    for field in line.split_whitespace() {
        if let Some((k, v)) = field.split_once('=') {
            let v: Option<f64> = v.parse().ok();
            match k {
                "hits1" => hits1 = v,
                "hits5" => hits5 = v,
                "mrr" => mrr = v,
                _ => {}
            }
        }
    }
    (hits1.unwrap(), hits5.unwrap(), mrr.unwrap())
}

#[test]
fn acceptance_5_synthetic_end_to_end() {
    let start = Instant::now();
    let data = tempfile::tempdir().unwrap();
    let run = tempfile::tempdir().unwrap();
    let run_dir = run.path().join("out");

    assert_success(&mixtea(&[
        "gen-synthetic",
        "--entities", "100",
        "--relations", "10",
        "--avg-degree", "5",
        "--seed", "7",
        "--out", data.path().to_str().unwrap(),
    ]));
    assert_success(&mixtea(&[
        "train",
        "--dataset-dir", data.path().to_str().unwrap(),
        "--output-dir", run_dir.to_str().unwrap(),
        "--mode", "mixtea",
        "--epochs", "200",
        "--entity-dim", "64",
        "--relation-dim", "32",
        "--seed", "7",
    ]));

    let report = fs::read_to_string(run_dir.join("report.txt")).unwrap();
    let line = report
        .lines()
        .find(|l| l.contains("direction=s->t"))
        .expect("forward direction in report");
    let (hits1, hits5, mrr) = parse_report_line(line);
    assert!(hits1 >= 0.95, "test Hits@1 {hits1} below 0.95");
    assert!(hits1 <= hits5 && hits5 <= 1.0, "hits ordering violated");
    assert!(hits1 <= mrr && mrr <= 1.0, "mrr bound violated");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "end-to-end run took {elapsed:?}");
    println!(
        "acceptance criterion 5 (synthetic end-to-end): PASS (hits1={hits1:.3}, {elapsed:?})"
    );
}

// ------------------------------------------------------------ criteria 6 + 7

/// Shared benchmark: 100 entities per side, 5% training seeds, generator
/// seeds 1..=3. All variants run the same encoder and budget; only the
/// training regime differs.
const BENCH_SEEDS: [u64; 3] = [1, 2, 3];

fn bench_dataset(seed: u64) -> (tempfile::TempDir, AlignmentDataset) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SyntheticConfig::new(100, 10, 5.0, seed);
    cfg.train_fraction = 0.05;
    write_openea_dir(&cfg, dir.path()).unwrap();
    let ds = build_dataset(dir.path(), 1).unwrap();
    (dir, ds)
}

fn bench_config(seed: u64, mode: TrainMode, no_bdv: bool, no_mdr: bool) -> TrainConfig {
    TrainConfig {
        mode,
        seed,
        epochs: 200,
        ramp_epochs: 50,
        lambda_max: 3.0,
        tau_teacher: 0.3,
        no_bdv,
        no_mdr,
        ..TrainConfig::default()
    }
}

fn bench_run(ds: &AlignmentDataset, cfg: &TrainConfig) -> f64 {
    let enc = EncoderConfig { entity_dim: 64, relation_dim: 32, layers: 2 };
    let out = train(ds, &enc, cfg).unwrap();
    let idx = GraphIndices::build(ds);
    evaluate(&out.student, ds, &idx, !cfg.no_rel, Split::Test, Direction::SourceToTarget)
        .unwrap()
        .hits1
}

/// The three full-model runs are shared between criteria 6 and 7.
fn full_model_hits() -> &'static Vec<f64> {
    static FULL: OnceLock<Vec<f64>> = OnceLock::new();
    FULL.get_or_init(|| {
        BENCH_SEEDS
            .iter()
            .map(|&seed| {
                let (_dir, ds) = bench_dataset(seed);
                bench_run(&ds, &bench_config(seed, TrainMode::MixTea, false, false))
            })
            .collect()
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn acceptance_6_semi_supervised_gain() {
    let full = mean(full_model_hits());
    let supervised: Vec<f64> = BENCH_SEEDS
        .iter()
        .map(|&seed| {
            let (_dir, ds) = bench_dataset(seed);
            bench_run(&ds, &bench_config(seed, TrainMode::SupervisedOnly, false, false))
        })
        .collect();
    let sup = mean(&supervised);
    assert!(
        full > sup,
        "semi-supervised mean {full:.3} not strictly above supervised mean {sup:.3}"
    );
    println!(
        "acceptance criterion 6 (semi-supervised gain): PASS (full={full:.3} > supervised={sup:.3})"
    );
}

#[test]
fn acceptance_7_ablation_ordering() {
    let full = mean(full_model_hits());
    let run_variant = |no_bdv: bool, no_mdr: bool| -> f64 {
        let hits: Vec<f64> = BENCH_SEEDS
            .iter()
            .map(|&seed| {
                let (_dir, ds) = bench_dataset(seed);
                bench_run(&ds, &bench_config(seed, TrainMode::MixTea, no_bdv, no_mdr))
            })
            .collect();
        mean(&hits)
    };
    let no_bdv = run_variant(true, false);
    let no_mdr = run_variant(false, true);
    assert!(full >= no_bdv, "full {full:.3} below w/o BDV {no_bdv:.3}");
    assert!(full >= no_mdr, "full {full:.3} below w/o MDR {no_mdr:.3}");
    println!(
        "acceptance criterion 7 (ablation ordering): PASS (full={full:.3} >= no_bdv={no_bdv:.3}, no_mdr={no_mdr:.3})"
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn acceptance_8_metric_correctness() {
    let ranks = [1, 1, 2, 3, 5, 5, 6, 10, 20, 100];
    // hand counts: 2 of 10 at rank 1; 6 of 10 within rank 5
    assert_eq!(hits_at_k(&ranks, 1).unwrap(), 0.2);
    assert_eq!(hits_at_k(&ranks, 5).unwrap(), 0.6);
    let hand_mrr = (1.0 + 1.0 + 0.5 + 1.0 / 3.0 + 0.2 + 0.2 + 1.0 / 6.0 + 0.1 + 0.05 + 0.01) / 10.0;
    assert_eq!(mean_reciprocal_rank(&ranks).unwrap(), hand_mrr);
    println!("acceptance criterion 8 (metric correctness): PASS");
}

// ---------------------------------------------------------------- criterion 9

fn train_into(dataset: &Path, out_dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "train",
        "--dataset-dir",
        dataset.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    assert_success(&mixtea(&args));
}

#[test]
fn acceptance_9_manifest_determinism() {
    let data = tempfile::tempdir().unwrap();
    assert_success(&mixtea(&[
        "gen-synthetic",
        "--entities", "30",
        "--relations", "4",
        "--avg-degree", "4",
        "--seed", "11",
        "--out", data.path().to_str().unwrap(),
    ]));

    let runs = tempfile::tempdir().unwrap();
    let first = runs.path().join("first");
    train_into(
        data.path(),
        &first,
        &[
            "--entity-dim", "16",
            "--relation-dim", "8",
            "--epochs", "15",
            "--neg-samples", "3",
            "--seed", "7",
        ],
    );

    // rerun purely from the manifest, into a fresh directory
    let second = runs.path().join("second");
    let manifest = first.join("run_manifest");
    assert_success(&mixtea(&[
        "train",
        "--config",
        manifest.to_str().unwrap(),
        "--output-dir",
        second.to_str().unwrap(),
    ]));

    let a = fs::read(first.join("metrics.csv")).unwrap();
    let b = fs::read(second.join("metrics.csv")).unwrap();
    assert_eq!(a, b, "metrics.csv differs between manifest reruns");
    println!("acceptance criterion 9 (manifest determinism): PASS");
}

// keep PathBuf in scope for helpers above
#[allow(unused)]
fn _typecheck(_: PathBuf) {}
