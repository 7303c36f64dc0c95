//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the PASS/FAIL lines always reach the output; exits non-zero
//! when any criterion fails.

mod common;

use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use exitlens::features::{AgeSource, CompanyProfile, ExecutiveTitles, AGE_UNKNOWN};
use exitlens::gbdt::{fit, fit_traced, GbdtConfig, Node};
use exitlens::ingest::{CompanyStore, Tables};
use exitlens::llm::{run_eval, ChatClient, EndpointConfig};
use exitlens::metrics::{bertscore, classification_report, TokenEmbeddings};
use exitlens::prompt::{
    compile_records, emit_training_manifest, sample_fewshot, serialize_chat, ChatRecord, PromptSettings,
    PromptVariant, RecordMeta, RenderMode, SftRecord, TrainingManifest, IM_END, IM_START,
    LEAKY_TERMS,
};
use exitlens::synth::{synthesize, MissingRates, SynthConfig};
use exitlens::tokens::{DefaultCounter, TokenCounter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -------------------------------------------------------------------------

fn brute_force(preds: &[u8], labels: &[u8]) -> (f64, f64, f64, f64) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..preds.len() {
        if preds[i] == 1 && labels[i] == 1 {
            tp += 1;
        } else if preds[i] == 1 {
            fp += 1;
        } else if labels[i] == 0 {
            tn += 1;
        } else {
            fn_ += 1;
        }
    }
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let accuracy = div(tp + tn, tp + fp + tn + fn_);
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (accuracy, precision, recall, f1)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let n = rng.gen_range(1..200);
        let bias: f64 = rng.gen();
        let preds: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(bias))).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let r = classification_report(&preds, &labels).map_err(|e| e.to_string())?;
        let want = brute_force(&preds, &labels);
        let got = (r.accuracy, r.precision, r.recall, r.f1_positive);
        ensure(got == want, || format!("case {case}: {got:?} != {want:?}"))?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(1), || format!("took {t:?}"))?;
    Ok(format!("1000 cases exact, {:.0} ms", t.as_secs_f64() * 1e3))
}

// 2 -------------------------------------------------------------------------

fn criterion_2() -> Check {
    let r = classification_report(&[1, 1, 1, 0], &[1, 0, 1, 1]).map_err(|e| e.to_string())?;
    let third = 2.0 / 3.0;
    ensure(
        r.precision == third && r.recall == third && r.f1_positive == third && r.accuracy == 0.5,
        || format!("{r:?}"),
    )?;
    Ok("P = R = F1 = 2/3, accuracy 0.5".into())
}

// 3 -------------------------------------------------------------------------

fn emb(vectors: Vec<Vec<f64>>) -> TokenEmbeddings {
    let tokens = (0..vectors.len()).map(|i| format!("t{i}")).collect();
    TokenEmbeddings::new(tokens, vectors).expect("valid embeddings")
}

fn random_emb(rng: &mut ChaCha8Rng, dim: usize) -> TokenEmbeddings {
    let n = rng.gen_range(1..12);
    emb((0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().any(|x| x.abs() > 1e-3) {
                break v;
            }
        })
        .collect())
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_emb(&mut rng, 8);
    let s = e(bertscore(&a, &a.clone()))?;
    ensure(
        (s.precision - 1.0).abs() < 1e-9 && (s.recall - 1.0).abs() < 1e-9 && (s.f1 - 1.0).abs() < 1e-9,
        || format!("identity {s:?}"),
    )?;
    let o = e(bertscore(
        &emb(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]),
        &emb(vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]),
    ))?;
    ensure(o.precision == 0.0 && o.recall == 0.0 && o.f1 == 0.0, || format!("orthogonal {o:?}"))?;
    let h = (0.75f64).sqrt();
    let hand = e(bertscore(
        &emb(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, h]]),
        &emb(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]),
    ))?;
    ensure(
        [hand.precision, hand.recall, hand.f1].iter().all(|x| (x - 0.75).abs() < 1e-9),
        || format!("hand {hand:?}"),
    )?;
    for i in 0..100 {
        let dim = rng.gen_range(2..16);
        let (a, b) = (random_emb(&mut rng, dim), random_emb(&mut rng, dim));
        let ab = e(bertscore(&a, &b))?;
        let ba = e(bertscore(&b, &a))?;
        ensure(
            (ab.precision - ba.recall).abs() < 1e-12 && (ab.recall - ba.precision).abs() < 1e-12,
            || format!("pair {i}: {ab:?} vs {ba:?}"),
        )?;
    }
    Ok("identity 1, orthogonal 0, hand 0.75, 100 symmetric pairs".into())
}

// 4 -------------------------------------------------------------------------

fn criterion_4() -> Check {
    let cfg = GbdtConfig {
        n_rounds: 1,
        max_depth: 1,
        learning_rate: 1.0,
        lambda: 1.0,
        gamma: 0.0,
        min_child_weight: 0.0,
        seed: 0,
    };
    let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
    let m = fit(&x, &[1, 1, 0, 0], &cfg).map_err(|e| e.to_string())?;
    let left = match &m.trees[0].nodes[0] {
        Node::Split { left, .. } => match &m.trees[0].nodes[*left] {
            Node::Leaf { weight } => *weight,
            n => return Err(format!("left child is not a leaf: {n:?}")),
        },
        n => return Err(format!("root is not a split: {n:?}")),
    };
    ensure((left - 2.0 / 3.0).abs() < 1e-9, || format!("leaf weight {left}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::NEG_INFINITY;
    for d in 0..50 {
        let n = rng.gen_range(20..120);
        let f = rng.gen_range(1..5);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| (rng.gen_range(0.0..10.0f64) * 4.0).round() / 4.0).collect())
            .collect();
        let mut y: Vec<u8> = x.iter().map(|r| u8::from(r[0] + rng.gen_range(-3.0..3.0) > 5.0)).collect();
        y[0] = 0;
        y[1] = 1;
        let cfg = GbdtConfig {
            n_rounds: 30,
            max_depth: rng.gen_range(1..5),
            learning_rate: rng.gen_range(0.01..=0.3),
            lambda: rng.gen_range(0.0..3.0),
            gamma: 0.0,
            min_child_weight: rng.gen_range(0.0..2.0),
            seed: d,
        };
        let (_, trace) = fit_traced(&x, &y, &cfg).map_err(|e| e.to_string())?;
        for (r, w) in trace.losses.windows(2).enumerate() {
            worst = worst.max(w[1] - w[0]);
            ensure(w[1] <= w[0] + 1e-6, || format!("dataset {d} round {}: {} -> {}", r + 1, w[0], w[1]))?;
        }
    }
    Ok(format!("leaf weight {left:.10}, 50 datasets monotone (max step {worst:.2e})"))
}

// 5 -------------------------------------------------------------------------

fn run_steps(dir: &Path, steps: &[&[&str]]) -> Result<(), String> {
    for args in steps {
        let (code, _, err) = run_cli(dir, args);
        ensure(code == 0, || format!("`{}` exited {code}: {}", args.join(" "), err.lines().last().unwrap_or("")))?;
    }
    Ok(())
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn pipeline_accuracy(dir: &Path, synth: &[&str]) -> Result<f64, String> {
    run_steps(
        dir,
        &[synth, &["ingest"], &["features"], &["split", "--train", "0.8", "--val", "0.1", "--test", "0.1"], &[
            "train-baseline",
        ]],
    )?;
    read_json(&dir.join("out/baseline/report.json"))?["report"]["accuracy"]
        .as_f64()
        .ok_or_else(|| "report has no accuracy".to_string())
}

fn criterion_5() -> Check {
    let det = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let acc = pipeline_accuracy(det.path(), &["synth", "--n", "2000", "--mode", "deterministic-threshold"])?;
    let t = start.elapsed();
    let det_ok = acc >= 0.95 && t < Duration::from_secs(30);

    let logi = tempfile::tempdir().map_err(|e| e.to_string())?;
    let acc_l = pipeline_accuracy(logi.path(), &["synth", "--n", "20000", "--mode", "logistic-sampling"])?;
    let b = read_json(&logi.path().join("data/synth_summary.json"))?["bayes_accuracy"]["accuracy"]
        .as_f64()
        .ok_or("synth summary has no Bayes estimate")?;
    let logi_ok = acc_l >= b - 0.05 && acc_l <= b + 0.01;
    let msg = format!(
        "deterministic acc {acc:.4} in {:.1} s; logistic acc {acc_l:.4} vs B {b:.4} window [{:.4}, {:.4}]",
        t.as_secs_f64(),
        b - 0.05,
        b + 0.01
    );
    if det_ok && logi_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// 6 -------------------------------------------------------------------------

fn profile_json_ok(p: &CompanyProfile) -> bool {
    fn walk(v: &Value) -> bool {
        match v {
            Value::Null => false,
            Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
            Value::Array(a) => a.iter().all(walk),
            Value::Object(o) => o.values().all(walk),
            _ => true,
        }
    }
    serde_json::to_value(p).is_ok_and(|v| walk(&v)) && p.feature_vector().iter().all(|x| x.is_finite())
}

fn criterion_6() -> Check {
    let cfg = SynthConfig {
        n_companies: 500,
        missing: MissingRates::none(),
        ..SynthConfig::reference()
    };
    let corpus = synthesize(&cfg).map_err(|e| e.to_string())?;
    let titles = ExecutiveTitles::default();
    let derive = |t: Tables| exitlens::features::derive_all(&CompanyStore::build(t), cfg.reference_date, &titles);
    let base = derive(corpus.tables.clone());
    let truth: Vec<u8> = corpus.ground_truth.iter().map(|g| g.label).collect();
    ensure(base.iter().map(|p| p.success).eq(truth.iter().copied()), || "labels differ from ground truth".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..20 {
        let rate: f64 = rng.gen_range(0.1..0.9);
        let mut t = corpus.tables.clone();
        for o in &mut t.organizations {
            if rng.gen_bool(rate) {
                o.founded_on = None;
            }
            if rng.gen_bool(rate) {
                o.created_at = None;
            }
            if rng.gen_bool(rate) {
                o.description.clear();
            }
        }
        for r in &mut t.funding_rounds {
            if rng.gen_bool(rate) {
                r.raised_usd = None;
            }
            if rng.gen_bool(rate) {
                r.announced_on = None;
            }
        }
        for i in &mut t.ipos {
            if rng.gen_bool(rate) {
                i.went_public_on = None;
            }
        }
        for a in &mut t.acquisitions {
            if rng.gen_bool(rate) {
                a.announced_on = None;
            }
        }
        let store = CompanyStore::build(t.clone());
        let got = derive(t.clone());
        for (i, (p, b)) in got.iter().zip(&base).enumerate() {
            let o = &t.organizations[i];
            ensure(profile_json_ok(p), || format!("trial {trial} org {i}: null or non-finite field"))?;
            ensure(p.success == b.success, || format!("trial {trial} org {i}: label changed"))?;
            if o.founded_on.is_none() && o.created_at.is_none() {
                ensure(p.age_years == AGE_UNKNOWN && p.age_source == AgeSource::Missing, || {
                    format!("trial {trial} org {i}: age {} for absent dates", p.age_years)
                })?;
            }
            let known: f64 = store.rounds_for(&o.org_id).filter_map(|r| r.raised_usd).sum();
            ensure(p.total_raised_usd == known, || {
                format!("trial {trial} org {i}: raised {} != {known}", p.total_raised_usd)
            })?;
            ensure(
                (p.num_funding_rounds, p.num_investors, p.num_acquisitions_made, p.num_executives)
                    == (b.num_funding_rounds, b.num_investors, b.num_acquisitions_made, b.num_executives),
                || format!("trial {trial} org {i}: count features changed"),
            )?;
        }
    }
    Ok("20 deletion trials over 500 orgs, no nulls, labels stable".into())
}

// 7 -------------------------------------------------------------------------

fn criterion_7() -> Check {
    for v in [PromptVariant::V1, PromptVariant::V2, PromptVariant::V3, PromptVariant::V4] {
        let want = std::fs::read_to_string(golden_path(v)).map_err(|e| format!("{v}: {e}"))?;
        ensure(render_fixture(v) == want, || format!("{v} differs from its golden file"))?;
    }
    let cfg = SynthConfig {
        n_companies: 400,
        leaky_phrase_rate: 0.5,
        ..SynthConfig::reference()
    };
    let mut profiles = synthetic_profiles(&cfg);
    profiles.push(fixture_profile());
    let mut checked = 0;
    for v in [PromptVariant::V1, PromptVariant::V2, PromptVariant::V3, PromptVariant::V4] {
        for mode in [RenderMode::Sft, RenderMode::Inference] {
            let settings = PromptSettings {
                variant: v,
                mode,
                ..PromptSettings::default()
            };
            let recs = compile_records(&profiles, &settings, &DefaultCounter).map_err(|e| e.to_string())?;
            for r in &recs {
                let text = serialize_chat(&r.chat.messages).map_err(|e| e.to_string())?;
                let (open, close) = (text.matches(IM_START).count(), text.matches(IM_END).count());
                ensure(open == close && open == r.chat.messages.len(), || {
                    format!("{}: {open} opening vs {close} closing markers", r.chat.meta.org_id)
                })?;
                let n = DefaultCounter.count(&text);
                ensure(n <= 256, || format!("{} {v}: {n} tokens", r.chat.meta.org_id))?;
                let lower = text.to_lowercase();
                ensure(!LEAKY_TERMS.iter().any(|t| lower.contains(t)), || {
                    format!("{} {v}: leaky term survived", r.chat.meta.org_id)
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("4 goldens match, {checked} records balanced, within budget and scrubbed"))
}

// 8 -------------------------------------------------------------------------

fn pool_record(i: usize, label: u8) -> SftRecord {
    SftRecord {
        chat: ChatRecord {
            messages: vec![exitlens::prompt::ChatMessage::user(format!("profile {i}"))],
            meta: RecordMeta {
                org_id: format!("org-{i}"),
                variant: PromptVariant::V4,
                split: None,
            },
        },
        target_label: label,
        target_justification: String::new(),
    }
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pool: Vec<SftRecord> = (0..9000).map(|i| pool_record(i, u8::from(rng.gen_bool(0.45)))).collect();
    for k in [1000, 2000, 4000] {
        let a = sample_fewshot(&pool, k, 11).map_err(|e| e.to_string())?;
        let b = sample_fewshot(&pool, k, 11).map_err(|e| e.to_string())?;
        let pos = a.iter().filter(|r| r.target_label == 1).count();
        ensure(a.len() == k, || format!("k={k}: got {}", a.len()))?;
        ensure(pos.abs_diff(k - pos) <= 1, || format!("k={k}: {pos} positive"))?;
        ensure(a == b, || format!("k={k}: not deterministic"))?;
        let ids: HashSet<&str> = a.iter().map(|r| r.chat.meta.org_id.as_str()).collect();
        ensure(ids.len() == k, || format!("k={k}: duplicates"))?;
    }
    Ok("k in {1000, 2000, 4000} exact, balanced, deterministic".into())
}

// 9 -------------------------------------------------------------------------

fn endpoint(url: &str, max_in_flight: usize) -> EndpointConfig {
    EndpointConfig {
        base_url: url.into(),
        api_key_env: "EXITLENS_ACCEPTANCE_UNSET_KEY".into(),
        max_in_flight,
        timeout_secs: 10,
        backoff_base_ms: 1,
        ..EndpointConfig::default()
    }
}

fn balanced_records(n: usize) -> Vec<SftRecord> {
    let cfg = SynthConfig {
        n_companies: n * 2,
        ..SynthConfig::reference()
    };
    let profiles = synthetic_profiles(&cfg);
    let (pos, neg): (Vec<_>, Vec<_>) = profiles.into_iter().partition(|p| p.success == 1);
    let mut picked: Vec<CompanyProfile> = pos.into_iter().take(n / 2).collect();
    picked.extend(neg.into_iter().take(n / 2));
    inference_records(&picked)
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn criterion_9() -> Check {
    let start = Instant::now();

    let oracle_set = balanced_records(500);
    let server = MockServer::start(8, oracle_handler(&oracle_set));
    let client = e(ChatClient::new(endpoint(&server.base_url, 8)))?;
    let run = e(run_eval(&client, &oracle_set, 8))?;
    drop(server);
    ensure(oracle_set.len() == 500 && run.report.accuracy == 1.0, || {
        format!("oracle accuracy {} on {}", run.report.accuracy, oracle_set.len())
    })?;

    let const_set = balanced_records(400);
    let server = MockServer::start(8, Arc::new(|_: &Value| (200, completion_body(&answer(1)))));
    let client = e(ChatClient::new(endpoint(&server.base_url, 8)))?;
    let constant = e(run_eval(&client, &const_set, 8))?.report.accuracy;
    drop(server);
    ensure((constant - 0.5).abs() <= 0.05, || format!("constant-label accuracy {constant}"))?;

    let hits = Arc::new(AtomicUsize::new(0));
    let h = Arc::clone(&hits);
    let server = MockServer::start(
        1,
        Arc::new(move |_: &Value| {
            if h.fetch_add(1, Ordering::SeqCst) < 2 {
                (503, "busy".to_string())
            } else {
                (200, completion_body(&answer(0)))
            }
        }),
    );
    let client = e(ChatClient::new(endpoint(&server.base_url, 1)))?;
    let flaky = e(run_eval(&client, &const_set[..1], 1))?;
    drop(server);
    let attempts = &flaky.outcomes[0].attempts;
    ensure(flaky.outcomes[0].error.is_none() && attempts.len() == 3, || {
        format!("flaky: {} attempts, error {:?}", attempts.len(), flaky.outcomes[0].error)
    })?;

    let live = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(Mutex::new(0usize));
    let (l, p) = (Arc::clone(&live), Arc::clone(&peak));
    let server = MockServer::start(
        16,
        Arc::new(move |_: &Value| {
            let now = l.fetch_add(1, Ordering::SeqCst) + 1;
            {
                let mut m = p.lock().unwrap();
                *m = (*m).max(now);
            }
            std::thread::sleep(Duration::from_millis(15));
            l.fetch_sub(1, Ordering::SeqCst);
            (200, completion_body(&answer(1)))
        }),
    );
    let max_in_flight = 4;
    let client = e(ChatClient::new(endpoint(&server.base_url, max_in_flight)))?;
    e(run_eval(&client, &const_set[..120], max_in_flight))?;
    drop(server);
    let peak = *peak.lock().unwrap();
    ensure(peak <= max_in_flight, || format!("observed {peak} concurrent requests"))?;

    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), || format!("took {t:?}"))?;
    Ok(format!(
        "oracle 1.0 on 500, constant {constant:.3} on 400, flaky 3 attempts, peak {peak}/{max_in_flight}, {:.1} s",
        t.as_secs_f64()
    ))
}

// 10 ------------------------------------------------------------------------

fn criterion_10() -> Check {
    let m: TrainingManifest =
        serde_json::from_str(&emit_training_manifest(&[]).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let ok = m.epochs == 5
        && m.learning_rate == 5e-4
        && m.warmup_steps == 20
        && m.weight_decay == 0.01
        && m.gradient_accumulation_steps == 2
        && m.max_length == 256
        && m.lora.rank == 16
        && m.lora.alpha == 16
        && m.lora.dropout == 0.1
        && m.rank_sweep == [8, 16, 32, 64, 128];
    ensure(ok, || format!("{m:?}"))?;
    Ok("epochs 5, lr 5e-4, warmup 20, wd 0.01, accum 2, len 256, LoRA 16/16/0.1, sweep 8..128".into())
}

fn main() {
    let checks: [(u8, &str, fn() -> Check); 10] = [
        (1, "metric oracle equivalence", criterion_1),
        (2, "confusion fixture", criterion_2),
        (3, "bertscore identities", criterion_3),
        (4, "gbdt hand check and monotone loss", criterion_4),
        (5, "end-to-end learnability", criterion_5),
        (6, "imputation conformance", criterion_6),
        (7, "prompt goldens, markers, budget, leakage", criterion_7),
        (8, "few-shot sampler", criterion_8),
        (9, "evaluation harness vs mocks", criterion_9),
        (10, "training manifest constants", criterion_10),
    ];
    let mut failed = 0;
    for (n, name, f) in checks {
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
