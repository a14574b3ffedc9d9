//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use lift_backends::{Backend, BoundModel, CompletionRequest, FineTuneSpec, ScriptedBackend};
use lift_core::baselines::{self, Aggregator, BaselineKind, BaselineSpec};
use lift_core::data::{FeatureSchema, TabularDataset, TargetRef, TaskKind};
use lift_core::eval::{self, calibration_profile};
use lift_core::parse::{
    infer_with_retry, parse_completion, CompletionSource, ParseContext, PredictionValue, RetryPolicy,
};
use lift_core::perturb::{self, NoiseKind, NoiseSpec};
use lift_core::prompts::{self, encode_level, format_number, LevelEncoding, NamingMode, PromptTemplate};
use lift_core::synth::{self, FunctionKind};
use lift_core::{rng, Exec};
use lift_runner::pipeline;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const NAME_POOL: [&str; 10] =
    ["age", "income", "sepal length", "petal width", "color", "size", "weight", "height", "score", "region code"];
const LABEL_POOL: [&str; 8] = ["setosa", "Iris virginica", "yes", "no", "class 3", "-1", "42", "high risk"];

fn random_template(r: &mut rng::Rng, names: &[String]) -> PromptTemplate {
    let sentence = || {
        let holes: Vec<String> = names.iter().map(|n| format!("the {{{n}}} {n}")).collect();
        format!("Given {}, what is the {{target}}?", holes.join(" and "))
    };
    let naming = match r.random_range(0..6) {
        0 => NamingMode::Generic,
        1 => NamingMode::WithoutNamesAlt,
        2 => NamingMode::CorrectNamesList,
        3 => NamingMode::CorrectNamesSentence { sentence_template: sentence() },
        4 => NamingMode::ShuffledNamesList { shuffle_seed: r.random() },
        _ => NamingMode::ShuffledNamesSentence { shuffle_seed: r.random(), sentence_template: sentence() },
    };
    PromptTemplate::default().with_naming(naming).with_decimals(r.random_range(0..5))
}

fn c01_round_trip() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(1);
    let mut modes = std::collections::HashSet::new();
    for draw in 0..1000 {
        let p = r.random_range(1..=6);
        let mut pool: Vec<&str> = NAME_POOL.to_vec();
        pool.shuffle(&mut r);
        let names: Vec<String> = pool[..p].iter().map(|s| s.to_string()).collect();
        let schema = FeatureSchema::named(names.clone()).unwrap().with_target_name("outcome");
        let tpl = random_template(&mut r, &names);
        modes.insert(std::mem::discriminant(&tpl.naming));
        let row: Vec<f64> = (0..p).map(|_| r.random_range(-1000.0..1000.0)).collect();
        if r.random_bool(0.5) {
            let label = LABEL_POOL[r.random_range(0..LABEL_POOL.len())].to_string();
            let ex =
                prompts::serialize_example(&row, TargetRef::Label(&label), &schema, &tpl).map_err(|e| e.to_string())?;
            let set: Vec<String> = LABEL_POOL.iter().map(|s| s.to_string()).collect();
            let got = parse_completion(&ex.completion, TaskKind::Classification, &set, &tpl.end_token);
            ensure(got == Ok(PredictionValue::Label(label.clone())), || format!("draw {draw}: {got:?} != {label:?}"))?;
        } else {
            let v: f64 = r.random_range(-1e4..1e4);
            let ex = prompts::serialize_example(&row, TargetRef::Value(v), &schema, &tpl).map_err(|e| e.to_string())?;
            let got = parse_completion(&ex.completion, TaskKind::Regression, &[], &tpl.end_token)
                .map_err(|e| format!("draw {draw}: {e:?}"))?
                .as_value()
                .unwrap();
            let tol = 0.5 * 10f64.powi(-(tpl.decimals as i32)) + 1e-9 * v.abs();
            ensure((got - v).abs() <= tol, || format!("draw {draw}: {got} vs {v} at {} decimals", tpl.decimals))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(modes.len() == 6, || format!("only {} naming modes drawn", modes.len()))?;
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("1000/1000 draws, 6 naming modes, {secs:.2}s"))
}

fn c02_metric_oracles() -> Outcome {
    let mut r = rng::seeded(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = r.random_range(2..40);
        let truth: Vec<f64> = (0..n).map(|_| r.random_range(-100.0..100.0)).collect();
        let pred: Vec<f64> = (0..n).map(|_| r.random_range(-100.0..100.0)).collect();
        let mean = truth.iter().sum::<f64>() / n as f64;
        let num: f64 = pred.iter().zip(&truth).map(|(p, t)| (p - t).abs()).sum();
        let den: f64 = truth.iter().map(|t| (t - mean).abs()).sum();
        let rae_o = num / den;
        let rmse_o = (pred.iter().zip(&truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64).sqrt();
        let rae = eval::rae(&pred, &truth).map_err(|e| e.to_string())?;
        let rmse = eval::rmse(&pred, &truth).map_err(|e| e.to_string())?;
        worst = worst.max(((rae - rae_o) / rae_o).abs()).max(((rmse - rmse_o) / rmse_o).abs());
    }
    ensure(worst <= 1e-12, || format!("relative error {worst:e}"))?;
    let rae = eval::rae(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    let rmse = eval::rmse(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    ensure(rae == 1.0, || format!("hand rae {rae}"))?;
    ensure((rmse - (2.0f64 / 3.0).sqrt()).abs() <= 1e-12, || format!("hand rmse {rmse}"))?;
    Ok(format!("max relative error {worst:.1e}; hand case rae=1, rmse=sqrt(2/3)"))
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            let pivot_row = a[c].clone();
            for (x, p) in a[i][c..].iter_mut().zip(&pivot_row[c..]) {
                *x -= f * p;
            }
            b[i] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn c03_ridge() -> Outcome {
    let mut r = rng::seeded(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let y: Vec<f64> = (0..20).map(|_| r.random_range(-3.0..3.0)).collect();
        for lambda in [0.0, 1.0, 10.0, 100.0] {
            let (xa, ya) = perturb::ridge_augment(&x, &y, lambda).map_err(|e| e.to_string())?;
            let (w, b) = baselines::least_squares(&xa, &ya, false);
            ensure(b == 0.0, || "intercept fitted".into())?;
            let gram: Vec<Vec<f64>> = (0..5)
                .map(|i| {
                    (0..5)
                        .map(|j| x.iter().map(|row| row[i] * row[j]).sum::<f64>() + if i == j { lambda } else { 0.0 })
                        .collect()
                })
                .collect();
            let rhs: Vec<f64> = (0..5).map(|i| x.iter().zip(&y).map(|(row, t)| row[i] * t).sum()).collect();
            let closed = solve(gram, rhs);
            let d = w.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    ensure(worst <= 1e-6, || format!("max |dw| {worst:e}"))?;
    Ok(format!("400 systems, max |dw|_inf {worst:.1e}"))
}

fn c04_retry() -> Outcome {
    let train = TabularDataset::regression(
        FeatureSchema::generic(1),
        vec![vec![0.0], vec![1.0], vec![2.0]],
        vec![1.0, 2.0, 6.0],
    )
    .map_err(|e| e.to_string())?;
    let fallback = pipeline::fallback_value(&train).map_err(|e| e.to_string())?;
    ensure(fallback == PredictionValue::Value(3.0), || format!("regression fallback {fallback:?}"))?;
    let ctx = ParseContext::new(TaskKind::Regression, &[], "@@@");
    let policy = RetryPolicy::default();
    for k in 0..5 {
        let mut queue: Vec<String> = (0..k).map(|i| format!("garbage {i}")).collect();
        queue.push(" y=7.5@@@".into());
        let b = ScriptedBackend::with_queue(queue);
        let h = b.base_model("m").unwrap();
        let p =
            infer_with_retry(&BoundModel::new(&b, &h), "q###", &policy, &ctx, &fallback).map_err(|e| e.to_string())?;
        ensure(p.valid && p.attempts == k + 1 && p.value == PredictionValue::Value(7.5), || format!("k={k}: {p:?}"))?;
        let temps: Vec<f64> = b.requests().iter().map(|r| r.temperature).collect();
        ensure(temps[0] == 0.0 && temps[1..].iter().all(|&t| t == 0.75), || format!("temperatures {temps:?}"))?;
    }
    let b = ScriptedBackend::with_responder(|_| Ok("nonsense".into()));
    let h = b.base_model("m").unwrap();
    let p = infer_with_retry(&BoundModel::new(&b, &h), "q###", &policy, &ctx, &fallback).map_err(|e| e.to_string())?;
    ensure(!p.valid && p.attempts == 5 && p.used_fallback && p.value == fallback, || format!("all invalid: {p:?}"))?;

    let cls = TabularDataset::classification(
        FeatureSchema::generic(1),
        vec![vec![0.0]; 5],
        ["b", "a", "b", "c", "b"].map(String::from).to_vec(),
    )
    .map_err(|e| e.to_string())?;
    let fb = pipeline::fallback_value(&cls).map_err(|e| e.to_string())?;
    let ctx = ParseContext::new(TaskKind::Classification, cls.label_set(), "@@@");
    let p = infer_with_retry(&BoundModel::new(&b, &h), "q###", &policy, &ctx, &fb).map_err(|e| e.to_string())?;
    ensure(!p.valid && p.attempts == 5 && p.value == PredictionValue::Label("b".into()), || {
        format!("classification: {p:?}")
    })?;
    Ok("k=0..4 -> attempts k+1; all-invalid -> fallback, attempts=5".into())
}

fn c05_corruption() -> Outcome {
    let set = ["a", "b", "c", "d"];
    let labels: Vec<String> = (0..1000).map(|i| set[i % 4].to_string()).collect();
    let ds = TabularDataset::classification(
        FeatureSchema::generic(1),
        (0..1000).map(|i| vec![i as f64]).collect(),
        labels.clone(),
    )
    .map_err(|e| e.to_string())?;
    let changed = |d: &TabularDataset| d.labels().unwrap().iter().zip(&labels).filter(|(a, b)| a != b).count();
    for f in [0.05, 0.1, 0.2] {
        let want = (f * 1000.0f64).round() as usize;
        for seed in 0..3 {
            let rnd = perturb::corrupt_labels_random(&ds, f, seed).map_err(|e| e.to_string())?;
            ensure(changed(&rnd) == want, || format!("random f={f}: {} changed", changed(&rnd)))?;
            let mut sys = perturb::corrupt_labels_systematic(&ds, f, seed).map_err(|e| e.to_string())?;
            ensure(changed(&sys) == want, || format!("systematic f={f}: {} changed", changed(&sys)))?;
            for _ in 1..set.len() {
                sys = perturb::corrupt_labels_systematic(&sys, f, seed).map_err(|e| e.to_string())?;
            }
            ensure(changed(&sys) == 0, || format!("f={f}: {} labels not restored", changed(&sys)))?;
        }
    }
    Ok("exact counts 50/100/200; 4-fold systematic restores".into())
}

fn c06_noise_budget() -> Outcome {
    let zeros = vec![vec![0.0; 10]; 10_000];
    let mut r = rng::seeded(6);
    let mut coords = 0usize;
    for _ in 0..5 {
        let eps: f64 = r.random_range(0.01..5.0);
        let seed = r.random();
        let g = perturb::perturb_features(&zeros, &NoiseSpec { kind: NoiseKind::GaussianLinf, epsilon: eps, seed })
            .map_err(|e| e.to_string())?;
        ensure(g.iter().flatten().all(|d| d.abs() <= eps), || format!("gaussian exceeds eps={eps}"))?;
        let s = perturb::perturb_features(&zeros, &NoiseSpec { kind: NoiseKind::SignedConstant, epsilon: eps, seed })
            .map_err(|e| e.to_string())?;
        ensure(s.iter().flatten().all(|d| d.abs() == eps), || format!("signed constant not +-eps={eps}"))?;
        coords += s.iter().map(Vec::len).sum::<usize>();
    }
    let x: Vec<Vec<f64>> = (0..1000).map(|_| (0..10).map(|_| r.random_range(-100.0..100.0)).collect()).collect();
    let eps = 0.3;
    for kind in [NoiseKind::GaussianLinf, NoiseKind::SignedConstant] {
        let out =
            perturb::perturb_features(&x, &NoiseSpec { kind, epsilon: eps, seed: 9 }).map_err(|e| e.to_string())?;
        for (a, b) in out.iter().flatten().zip(x.iter().flatten()) {
            // one rounding of the sum
            ensure((a - b).abs() <= eps + 2.0 * f64::EPSILON * b.abs().max(1.0), || {
                format!("{kind:?}: |delta| {}", (a - b).abs())
            })?;
        }
    }
    Ok(format!("{coords} signed-constant coordinates at exactly +-eps"))
}

fn c07_end_to_end(dir: &Path) -> Outcome {
    let out = dir.join("nine");
    let cfg = format!(
        r#"name = "nine_clusters"
mode = "fine_tune"
seed = 11
output_dir = "{}"

[dataset]
kind = "synth_classification"
shape = "nine_clusters"
n = 2000
seed = 11

[split]
fractions = [0.7, 0.1, 0.2]
seed = 11
stratified = true

[template]
decimals = 0

[backend]
kind = "memorizer"
seed = 11

[[fine_tune_grid]]
epochs = 10
"#,
        out.display()
    );
    let cfg_path = dir.join("nine.toml");
    fs::write(&cfg_path, cfg).map_err(|e| e.to_string())?;
    let lift = env!("CARGO_BIN_EXE_lift");
    let st = Command::new(lift).args(["run", "--config"]).arg(&cfg_path).output().map_err(|e| e.to_string())?;
    ensure(st.status.success(), || format!("run failed: {}", String::from_utf8_lossy(&st.stderr)))?;
    let res: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let acc = res["repeats"][0]["test"]["accuracy"].as_f64().ok_or("no accuracy")?;
    ensure(acc >= 95.0, || format!("LIFT accuracy {acc:.2} < 95"))?;

    let mcc_out = dir.join("nine_mcc");
    let st = Command::new(lift)
        .args(["baseline", "--spec", r#"{"kind":"mcc"}"#, "--config"])
        .arg(&cfg_path)
        .arg("--output-dir")
        .arg(&mcc_out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(st.status.success(), || format!("baseline failed: {}", String::from_utf8_lossy(&st.stderr)))?;
    let res: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(mcc_out.join("result.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let mcc = res["repeats"][0]["test"]["accuracy"].as_f64().ok_or("no accuracy")?;

    let last_col = |p: &Path| -> Result<Vec<String>, String> {
        let text = fs::read_to_string(p).map_err(|e| e.to_string())?;
        Ok(text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect())
    };
    let train = last_col(&mcc_out.join("train.csv"))?;
    let test = last_col(&mcc_out.join("test.csv"))?;
    let mut counts: Vec<(String, usize)> = Vec::new();
    for l in &train {
        match counts.iter_mut().find(|c| c.0 == *l) {
            Some(c) => c.1 += 1,
            None => counts.push((l.clone(), 1)),
        }
    }
    let best = counts.iter().map(|c| c.1).max().unwrap();
    // the majority is unambiguous on a stratified split unless classes tie
    let majority: Vec<&String> = counts.iter().filter(|c| c.1 == best).map(|c| &c.0).collect();
    let freqs: Vec<f64> =
        majority.iter().map(|m| 100.0 * test.iter().filter(|t| t == m).count() as f64 / test.len() as f64).collect();
    ensure(freqs.iter().any(|f| (f - mcc).abs() < 1e-9), || {
        format!("MCC {mcc} not in majority frequencies {freqs:?}")
    })?;
    Ok(format!("LIFT/memorizer test accuracy {acc:.2}%; MCC {mcc:.2}% = majority test frequency"))
}

/// Brute-force kNN: full stable sort by (distance, index).
fn oracle_neighbours(rows: &[Vec<f64>], q: &[f64], k: usize, power: f64) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s: f64 = r.iter().zip(q).map(|(a, b)| (a - b).abs().powf(power)).sum();
            (s.powf(1.0 / power), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|x| x.1).collect()
}

fn c08_knn_oracle() -> Outcome {
    let mut r = rng::seeded(8);
    let mut checked = 0;
    for inst in 0..200 {
        let n = r.random_range(1..=50);
        let p = r.random_range(1..=4);
        let k = [1, 3, 5][r.random_range(0..3)];
        let power = [1.0, 2.0][r.random_range(0..2)];
        // integer grid to force distance ties
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random_range(0..4) as f64).collect()).collect();
        let labels: Vec<String> = (0..n).map(|_| ["a", "b", "c"][r.random_range(0..3)].to_string()).collect();
        let values: Vec<f64> = (0..n).map(|_| r.random_range(0..10) as f64).collect();
        let cls = TabularDataset::classification(FeatureSchema::generic(p), rows.clone(), labels.clone()).unwrap();
        let reg = TabularDataset::regression(FeatureSchema::generic(p), rows.clone(), values.clone()).unwrap();
        let mc =
            baselines::fit(&BaselineSpec::knn(BaselineKind::KnnClassifier, k, power).with_standardize(false), &cls)
                .map_err(|e| e.to_string())?;
        let mr = baselines::fit(&BaselineSpec::knn(BaselineKind::KnnRegressor, k, power).with_standardize(false), &reg)
            .map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let q: Vec<f64> = (0..p).map(|_| r.random_range(0..4) as f64).collect();
            let nn = oracle_neighbours(&rows, &q, k, power);
            let got: Vec<usize> = baselines::nearest(&rows, &q, k, power).into_iter().map(|x| x.1).collect();
            ensure(got == nn, || format!("instance {inst}: neighbours {got:?} vs {nn:?}"))?;
            // vote: highest count, ties to the label seen first in rank order
            let mut tally: Vec<(&str, usize)> = Vec::new();
            for &i in &nn {
                match tally.iter_mut().find(|t| t.0 == labels[i]) {
                    Some(t) => t.1 += 1,
                    None => tally.push((&labels[i], 1)),
                }
            }
            let top = tally.iter().map(|t| t.1).max().unwrap();
            let want = tally.iter().find(|t| t.1 == top).unwrap().0;
            let lab = mc.predict_row(&q).map_err(|e| e.to_string())?;
            ensure(lab.as_label() == Some(want), || format!("instance {inst}: label {lab:?} vs {want}"))?;
            let mean = nn.iter().map(|&i| values[i]).sum::<f64>() / nn.len() as f64;
            let val = mr.predict_row(&q).map_err(|e| e.to_string())?;
            ensure(val.as_value() == Some(mean), || format!("instance {inst}: value {val:?} vs {mean}"))?;
            checked += 1;
        }
    }
    let three = TabularDataset::regression(
        FeatureSchema::generic(1),
        vec![vec![0.0], vec![1.0], vec![2.0]],
        vec![1.0, 2.0, 100.0],
    )
    .unwrap();
    let med = baselines::fit(
        &BaselineSpec::knn(BaselineKind::KnnRegressor, 3, 2.0)
            .with_aggregator(Aggregator::Median)
            .with_standardize(false),
        &three,
    )
    .map_err(|e| e.to_string())?;
    let m = med.predict_row(&[1.0]).map_err(|e| e.to_string())?;
    ensure(m == PredictionValue::Value(2.0), || format!("median-3NN {m:?}"))?;
    Ok(format!("{checked} queries on 200 instances match; median-3NN{{1,2,100}} = 2"))
}

fn c09_calibration() -> Outcome {
    let start = Instant::now();
    let sigma = |x: f64| (x + 10.0) / 10.0;
    let backend = Arc::new(ScriptedBackend::with_responder(move |req: &CompletionRequest| {
        let x: f64 = req
            .prompt
            .strip_prefix("When we have x1=")
            .and_then(|s| s.split(',').next())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| lift_backends::BackendError::InvalidRequest(req.prompt.clone()))?;
        let mut r = rng::seeded(req.seed.unwrap_or(0));
        let y = x + Normal::new(0.0, sigma(x)).unwrap().sample(&mut r);
        Ok(format!(" y={}@@@", format_number(y, 6)))
    }));
    let train = vec![prompts::PromptedExample {
        prompt: "When we have x1=0, what should be y?###".into(),
        completion: " y=0@@@".into(),
    }];
    let handle = backend.fine_tune(&train, &FineTuneSpec::new(1, "base")).map_err(|e| e.to_string())?;
    let bound =
        PromptTemplate::default().with_decimals(6).bind(&FeatureSchema::generic(1), &[]).map_err(|e| e.to_string())?;
    let ctx = ParseContext::new(TaskKind::Regression, &[], "@@@");
    let xs: Vec<f64> = (0..1000).map(|i| -10.0 + 20.0 * (i as f64 + 0.5) / 1000.0).collect();
    let mut calls = 0u64;
    let profile = calibration_profile(
        |x, rep| {
            calls += 1;
            let src = BoundModel::new(&*backend, &handle).with_seed(Some(rng::derive(calls, &format!("{x}/{rep}"))));
            let text = src.complete(&bound.query(&[x]).unwrap(), 0.75)?;
            Ok::<f64, lift_backends::BackendError>(ctx.parse(&text).ok().and_then(|v| v.as_value()).unwrap_or(f64::NAN))
        },
        &xs,
        200,
        8,
        Some(&sigma),
    )
    .map_err(|e| format!("{e:?}"))?;
    let mut worst = 0.0f64;
    let mut bins = 0;
    for b in profile.bins.iter().filter(|b| b.count >= 100) {
        let reference = b.reference_std.unwrap();
        let rel = (b.pred_std - reference).abs() / reference;
        ensure(rel <= 0.2, || {
            format!("bin [{:.1},{:.1}): {:.4} vs injected {:.4}", b.lo, b.hi, b.pred_std, reference)
        })?;
        worst = worst.max(rel);
        bins += 1;
    }
    ensure(bins > 0, || "no bin with 100 samples".into())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{bins} bins, worst relative deviation {:.1}%, {secs:.1}s", 100.0 * worst))
}

fn c10_levels() -> Outcome {
    let enc = LevelEncoding::new(0.0, 3.0, 3).unwrap();
    let codes: Vec<String> = [0.5, 1.5, 2.5].iter().map(|&y| encode_level(y, &enc).unwrap()).collect();
    ensure(codes == ["00", "01", "11"], || format!("codes {codes:?}"))?;
    let mut r = rng::seeded(10);
    for i in 0..10_000 {
        let lo: f64 = r.random_range(-100.0..100.0);
        let hi = lo + r.random_range(0.1..100.0);
        let enc = LevelEncoding::new(lo, hi, r.random_range(2..20)).unwrap();
        let (a, b) = (r.random_range(lo..=hi), r.random_range(lo..=hi));
        let (ca, cb) = (encode_level(a, &enc).unwrap(), encode_level(b, &enc).unwrap());
        let ham = ca.bytes().zip(cb.bytes()).filter(|(x, y)| x != y).count();
        let diff = enc.bin_index(a).unwrap().abs_diff(enc.bin_index(b).unwrap());
        ensure(ham == diff, || format!("pair {i}: hamming {ham} != bin distance {diff}"))?;
    }
    Ok("[0,3]/3 -> 00,01,11; 10^4 random pairs hamming = bin distance".into())
}

fn c11_normalization() -> Outcome {
    let mut extremes = (f64::INFINITY, f64::NEG_INFINITY);
    for kind in FunctionKind::ALL {
        for p in [1, 2] {
            let (lo, hi) = synth::monte_carlo_range(kind, p, 1_000_000, 11, Exec::default());
            ensure(lo >= -9.01 && hi <= 9.01, || format!("{kind:?} p={p}: [{lo}, {hi}]"))?;
            extremes = (extremes.0.min(lo), extremes.1.max(hi));
        }
    }
    for (x, want) in [(5.0, 6.0), (0.0, 0.0), (-5.0, -6.0)] {
        let got = synth::eval_function(FunctionKind::Piecewise, &[x], false);
        ensure(got == want, || format!("piecewise({x}) = {got}"))?;
    }
    Ok(format!("all kinds within [{:.3}, {:.3}]; piecewise 6/0/-6 exact", extremes.0, extremes.1))
}

fn c12_reproducible(dir: &Path) -> Outcome {
    let out = dir.join("repro");
    let cfg = format!(
        r#"mode = "fine_tune"
seed = 5
repeats = 2
output_dir = "{}"

[dataset]
kind = "synth_classification"
shape = "moons"
n = 300
noise = 0.1
seed = 5

[split]
fractions = [0.6, 0.2, 0.2]
seed = 5

[backend]
kind = "memorizer"
seed = 5

[[fine_tune_grid]]
epochs = 5

[[fine_tune_grid]]
epochs = 10
"#,
        out.display()
    );
    let cfg_path = dir.join("repro.toml");
    fs::write(&cfg_path, cfg).map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for exec in ["parallel", "sequential", "parallel"] {
        let st = Command::new(env!("CARGO_BIN_EXE_lift"))
            .args(["run", "--exec", exec, "--config"])
            .arg(&cfg_path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(st.status.success(), || String::from_utf8_lossy(&st.stderr).into_owned())?;
        let json = fs::read_to_string(out.join("result.json")).map_err(|e| e.to_string())?;
        seen.push(pipeline::without_timing(&json).map_err(|e| e.to_string())?);
    }
    ensure(seen[0] == seen[2], || "two identical runs differ".into())?;
    // the exec override changes the config text and hence its hash, nothing else
    let unhashed = |s: &str| {
        let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
        v.as_object_mut().unwrap().remove("config_hash");
        v
    };
    ensure(unhashed(&seen[0]) == unhashed(&seen[1]), || "sequential and parallel results differ".into())?;
    Ok(format!("byte-identical result JSON ({} bytes); sequential run agrees", seen[0].len()))
}

fn c13_jsonl(dir: &Path) -> Outcome {
    let rows = vec![vec![5.1, 3.5, 1.4, 0.2], vec![7.0, 3.2, 4.7, 1.4], vec![6.3, 3.3, 6.0, 2.5]];
    let labels = ["setosa", "versicolor", "virginica"].map(String::from).to_vec();
    let iris = TabularDataset::classification(FeatureSchema::generic(4), rows, labels).unwrap();
    let emitted =
        prompts::to_jsonl(&prompts::serialize_dataset(&iris, &PromptTemplate::default()).map_err(|e| e.to_string())?);
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/iris_fig1.jsonl"))
        .map_err(|e| e.to_string())?;
    ensure(emitted == golden, || format!("emitted:\n{emitted}golden:\n{golden}"))?;
    let mut lines = 0;
    for file in [dir.join("nine/prompts.jsonl"), dir.join("repro/prompts.jsonl")] {
        let text = fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let obj = v.as_object().ok_or("line is not an object")?;
            let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
            ensure(keys.len() == 2 && obj.contains_key("prompt") && obj.contains_key("completion"), || {
                format!("keys {keys:?}")
            })?;
            let p = obj["prompt"].as_str().unwrap_or("");
            let c = obj["completion"].as_str().unwrap_or("");
            ensure(p.ends_with("###") && c.ends_with("@@@"), || format!("separators in {line}"))?;
            lines += 1;
        }
    }
    Ok(format!("golden Iris file byte-identical; {lines} emitted lines have exactly prompt/completion"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("serialization round-trip", Box::new(c01_round_trip)),
        ("metric oracles", Box::new(c02_metric_oracles)),
        ("ridge equivalence", Box::new(c03_ridge)),
        ("retry protocol", Box::new(c04_retry)),
        ("corruption exactness", Box::new(c05_corruption)),
        ("noise budget", Box::new(c06_noise_budget)),
        ("end-to-end offline pipeline", Box::new(|| c07_end_to_end(dir))),
        ("kNN oracle", Box::new(c08_knn_oracle)),
        ("calibration harness", Box::new(c09_calibration)),
        ("level encoding", Box::new(c10_levels)),
        ("synthetic normalization", Box::new(c11_normalization)),
        ("reproducibility", Box::new(|| c12_reproducible(dir))),
        ("JSONL conformance", Box::new(|| c13_jsonl(dir))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
