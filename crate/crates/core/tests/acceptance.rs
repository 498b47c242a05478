//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    main_table, Metric, HUMAN_AGGREGATES, HUMAN_CELLS, LEADERBOARDS, MAIN_OVERALL_MEAN, MAIN_OVERALL_RANK,
    MAIN_TEXTUAL_MEAN, MAIN_TEXTUAL_RANK, MAIN_VISUAL_MEAN, MAIN_VISUAL_RANK, MODELS,
};
use genception::backends::mock::{MockDescriber, MockEmbedder, MockFeatureExtractor, MockGenerator};
use genception::backends::{Backends, CallLog, CallRecord, Gate, Gated, Recorded, Role};
use genception::digest::short_hash;
use genception::metrics::{correlation_matrix, fid, gc_at_t};
use genception::model::{CategorySet, CorrelationKind, FeatureStats, GroupId, ScoreTable};
use genception::orchestrator::Runner;
use genception::pipeline::{finish_mock_run, mock_run, MockRunOptions, MockRunOutput};
use genception::report::{
    audit_delta, benchmark_vectors, load_benchmarks, render_score_table, Format, HumanComparison,
};
use genception::storage::{RunState, RunStore};

type Outcome = Result<String, String>;

fn ensure(ok: bool, failures: &mut Vec<String>, msg: impl FnOnce() -> String) {
    if !ok {
        failures.push(msg());
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(failures.join("; "))
    }
}

fn within_budget(elapsed: Duration, budget: Duration, failures: &mut Vec<String>) {
    ensure(elapsed < budget, failures, || format!("took {elapsed:?}, budget {budget:?}"));
}

/// Reference weighting written out term by term.
fn weighted_reference(s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in s.iter().enumerate() {
        let t = (i + 1) as f64;
        num += t * v;
        den += t;
    }
    num / den
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    let tol = 1e-12;
    for case in 0..10_000 {
        let t = rng.random_range(1..=10usize);
        let s: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let gc = gc_at_t(&s).map_err(|e| e.to_string())?;
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure(gc >= lo - tol && gc <= hi + tol, &mut failures, || format!("case {case}: {gc} outside [{lo}, {hi}]"));
        ensure((gc - weighted_reference(&s)).abs() <= tol, &mut failures, || format!("case {case}: weighting"));
        ensure(gc_at_t(&s[..1]).unwrap() == s[0], &mut failures, || format!("case {case}: GC@1 != s1"));

        // a*s + b stays inside [-1, 1] for |a| + |b| <= 1.
        let a = rng.random_range(-0.5..=0.5);
        let b = rng.random_range(-0.5..=0.5);
        let mapped: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        let affine = gc_at_t(&mapped).map_err(|e| e.to_string())?;
        ensure((affine - (a * gc + b)).abs() <= tol, &mut failures, || format!("case {case}: affinity"));

        let c = rng.random_range(-1.0..=1.0);
        let constant = gc_at_t(&vec![c; t]).unwrap();
        ensure((constant - c).abs() <= tol, &mut failures, || format!("case {case}: constant series"));
        if failures.len() > 5 {
            break;
        }
    }
    within_budget(start.elapsed(), Duration::from_secs(1), &mut failures);
    verdict(failures, format!("10000 series in {:?}", start.elapsed()))
}

fn diag_stats(mean: Vec<f64>, var: &[f64]) -> FeatureStats {
    FeatureStats::new(
        DVector::from_vec(mean),
        DMatrix::from_diagonal(&DVector::from_row_slice(var)),
        10,
        "f",
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    for case in 0..1000 {
        // Half the cases are 1-D, the rest diagonal in 2..=16 dimensions.
        let dim = if case % 2 == 0 { 1 } else { rng.random_range(2..=16) };
        let draw = |rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
            let mu = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
            let var = (0..dim).map(|_| rng.random_range(0.01..25.0)).collect();
            (mu, var)
        };
        let (ma, va) = draw(&mut rng);
        let (mb, vb) = draw(&mut rng);
        let closed: f64 = (0..dim)
            .map(|i| (ma[i] - mb[i]).powi(2) + (va[i].sqrt() - vb[i].sqrt()).powi(2))
            .sum();
        let a = diag_stats(ma, &va);
        let b = diag_stats(mb, &vb);
        let ab = fid(&a, &b).map_err(|e| e.to_string())?;
        let ba = fid(&b, &a).map_err(|e| e.to_string())?;
        ensure((ab - closed).abs() <= 1e-6, &mut failures, || format!("case {case} (dim {dim}): {ab} vs {closed}"));
        ensure(
            (ab - ba).abs() <= 1e-8 * ab.abs().max(ba.abs()).max(f64::MIN_POSITIVE),
            &mut failures,
            || format!("case {case}: asymmetric {ab} vs {ba}"),
        );
        let aa = fid(&a, &a).map_err(|e| e.to_string())?;
        ensure(aa.abs() <= 1e-6, &mut failures, || format!("case {case}: fid(a, a) = {aa}"));
        if failures.len() > 5 {
            break;
        }
    }
    within_budget(start.elapsed(), Duration::from_secs(10), &mut failures);
    verdict(failures, format!("1000 pairs in {:?}", start.elapsed()))
}

/// Half a unit in the last printed place, inclusive, plus float slack.
fn printed_tolerance(decimals: usize) -> f64 {
    0.5 * 10f64.powi(-(decimals as i32)) + 1e-9
}

fn check_means(
    table: &ScoreTable,
    metric: Metric,
    label: &str,
    computed: &[Option<f64>],
    printed: &[f64; 21],
    failures: &mut Vec<String>,
) {
    let tol = printed_tolerance(metric.decimals());
    for (m, (c, p)) in computed.iter().zip(metric.pick(printed)).enumerate() {
        let c = c.unwrap();
        ensure((c - p).abs() <= tol, failures, || {
            format!("{:?} {label} {}: computed {c:.4}, printed {p}", metric, table.models[m])
        });
    }
}

fn check_ranks(metric: Metric, label: &str, computed: &[Option<u32>], printed: &[u32; 21], failures: &mut Vec<String>) {
    let computed: Vec<u32> = computed.iter().map(|r| r.unwrap()).collect();
    let expected = metric.pick(printed);
    ensure(computed == expected, failures, || {
        format!("{metric:?} {label} ranks: computed {computed:?}, printed {expected:?}")
    });
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let groups = CategorySet::mme().groups();
    let vi = groups.iter().position(|g| *g == GroupId::visual_intensive()).unwrap();
    let ti = groups.iter().position(|g| *g == GroupId::textual_intensive()).unwrap();
    for metric in [Metric::Cosine, Metric::Fid] {
        let t = main_table(metric);
        let visual: Vec<Option<f64>> = t.group_means.iter().map(|r| r[vi]).collect();
        let textual: Vec<Option<f64>> = t.group_means.iter().map(|r| r[ti]).collect();
        check_means(&t, metric, "visual mean", &visual, &MAIN_VISUAL_MEAN, &mut failures);
        check_means(&t, metric, "textual mean", &textual, &MAIN_TEXTUAL_MEAN, &mut failures);
        check_means(&t, metric, "overall mean", &t.overall_mean, &MAIN_OVERALL_MEAN, &mut failures);
        let vis_ranks = &t.rank_row(GroupId::VISUAL_INTENSIVE).unwrap().ranks;
        let tex_ranks = &t.rank_row(GroupId::TEXTUAL_INTENSIVE).unwrap().ranks;
        check_ranks(metric, "visual", vis_ranks, &MAIN_VISUAL_RANK, &mut failures);
        check_ranks(metric, "textual", tex_ranks, &MAIN_TEXTUAL_RANK, &mut failures);
        check_ranks(metric, "overall", &t.overall_ranks().unwrap().ranks, &MAIN_OVERALL_RANK, &mut failures);
    }
    within_budget(start.elapsed(), Duration::from_secs(1), &mut failures);
    verdict(failures, "cosine and FID means and ranks reproduced".into())
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let models: Vec<(String, Vec<Option<f64>>)> = MODELS
        .iter()
        .enumerate()
        .map(|(m, name)| (name.to_string(), HUMAN_CELLS.iter().map(|r| Some(r[m])).collect()))
        .collect();
    let human: Vec<Option<f64>> = HUMAN_CELLS.iter().map(|r| Some(r[7])).collect();
    let cmp = HumanComparison::build(&CategorySet::mme(), &models, &human).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (row, printed) in cmp.rows.iter().zip(HUMAN_CELLS.iter().map(|r| r[8])) {
        let d = row.delta_percent.unwrap();
        worst = worst.max((d - printed).abs());
        ensure((d - printed).abs() <= 1e-4, &mut failures, || {
            format!("{}: computed {d:.6}%, printed {printed}%", row.label)
        });
    }
    for (label, printed) in HUMAN_AGGREGATES {
        let agg = cmp.aggregate(label).ok_or_else(|| format!("no `{label}` row"))?;
        let audit = audit_delta(agg, printed[8], 1e-4);
        ensure(audit.flagged(), &mut failures, || format!("{label}: printed Δ% silently matched"));
        ensure(audit.matches_category_mean, &mut failures, || {
            format!("{label}: printed {} is not the mean of category gaps {:?}", printed[8], audit.mean_category_delta)
        });
    }
    let overall = cmp.aggregate("overall mean").unwrap();
    verdict(
        failures,
        format!(
            "14 categories within {worst:.1e} pp; overall printed 13.5327% flagged (direct {:.4}%)",
            overall.delta_percent.unwrap()
        ),
    )
}

fn recorded_backends(log: &Arc<CallLog>, gate: Option<&Arc<Gate>>) -> Backends {
    match gate {
        None => Backends {
            describer: Arc::new(Recorded::new(MockDescriber, log.clone())),
            generator: Arc::new(Recorded::new(MockGenerator::new(0), log.clone())),
            embedder: Arc::new(Recorded::new(MockEmbedder::new(0), log.clone())),
            features: Arc::new(MockFeatureExtractor::default()),
            echo: None,
        },
        Some(g) => Backends {
            describer: Arc::new(Gated::new(Recorded::new(MockDescriber, log.clone()), g.clone())),
            generator: Arc::new(Gated::new(Recorded::new(MockGenerator::new(0), log.clone()), g.clone())),
            embedder: Arc::new(Gated::new(Recorded::new(MockEmbedder::new(0), log.clone()), g.clone())),
            features: Arc::new(MockFeatureExtractor::default()),
            echo: None,
        },
    }
}

fn rendered(out: &MockRunOutput) -> String {
    let mut s = render_score_table(&out.gc_table, Format::Json);
    s.push_str(&render_score_table(&out.gc_table, Format::Csv));
    if let Some(t) = &out.fid_table {
        s.push_str(&render_score_table(t, Format::Json));
    }
    s
}

/// Calls attributable to each chain, keyed by what the call carried.
fn per_chain_calls(store: &RunStore, state: &RunState, log: &[CallRecord]) -> Result<Vec<(usize, usize, usize)>, String> {
    let handle = store.open_run(&state.run_id).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for chain in &state.chains {
        let mut images = vec![handle.seed_image(&chain.seed.id).map_err(|e| e.to_string())?.unwrap_or_default()];
        for it in &chain.iterations {
            images.push(handle.read_artifact(&it.image_ref).map_err(|e| e.to_string())?);
        }
        let image_hashes: Vec<String> = images.iter().map(|b| short_hash(b)).collect();
        let prompts: BTreeSet<String> = chain.iterations.iter().map(|i| short_hash(i.gen_prompt.as_bytes())).collect();
        let describes: BTreeSet<&String> = image_hashes[..image_hashes.len() - 1].iter().collect();
        let embeds: BTreeSet<&String> = image_hashes.iter().collect();
        let count = |role: Role, keys: &dyn Fn(&String) -> bool| {
            log.iter().filter(|r| r.role == role && keys(&r.input)).count()
        };
        out.push((
            count(Role::Describe, &|h| describes.contains(h)),
            count(Role::Generate, &|h| prompts.contains(h)),
            count(Role::Embed, &|h| embeds.contains(h)),
        ));
    }
    Ok(out)
}

async fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let err = |e: genception::pipeline::PipelineError| e.to_string();

    let mut outputs = Vec::new();
    let mut logs = Vec::new();
    let mut dirs = Vec::new();
    for parallelism in [4, 4, 1, 8] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = MockRunOptions {
            parallelism,
            ..MockRunOptions::new(dir.path())
        };
        let log = CallLog::new();
        outputs.push(mock_run(&opts, Some(recorded_backends(&log, None))).await.map_err(err)?);
        logs.push(log);
        dirs.push(dir);
    }
    let first = rendered(&outputs[0]);
    for (i, out) in outputs.iter().enumerate().skip(1) {
        ensure(rendered(out) == first, &mut failures, || format!("rendered tables of run {i} differ"));
    }
    let state = &outputs[0].state;
    ensure(state.chains.len() >= 6, &mut failures, || "fixture has fewer than 6 chains".into());
    ensure(
        state.complete_chains().count() == state.chains.len(),
        &mut failures,
        || "not every chain completed".into(),
    );
    let t = state.config.iterations as usize;
    let counts = per_chain_calls(&RunStore::new(dirs[0].path()), state, &logs[0].records())?;
    for (chain, c) in state.chains.iter().zip(&counts) {
        ensure(*c == (t, t, t + 1), &mut failures, || format!("{}: calls {c:?}", chain.seed.id));
    }
    let expected_total = state.chains.len() * (3 * t + 1);
    ensure(logs[0].total() == expected_total, &mut failures, || {
        format!("{} calls in total, expected {expected_total}", logs[0].total())
    });

    // Forced kill: the gate parks every call after the budget and the run is dropped.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = MockRunOptions::new(dir.path());
    let seeds = genception::fixtures::write_fixture_dataset(&opts.config().dataset).map_err(|e| e.to_string())?;
    let store = RunStore::new(dir.path());
    let killed_log = CallLog::new();
    let gate = Gate::new(23);
    let runner = Runner::new(opts.config(), recorded_backends(&killed_log, Some(&gate)), store.clone());
    let run_id = runner.create_run(&seeds).map_err(|e| e.to_string())?;
    tokio::select! {
        _ = runner.execute(&run_id) => failures.push("run finished despite the kill".into()),
        _ = gate.tripped() => {}
    }
    drop(runner);
    let resumed_log = CallLog::new();
    let runner = Runner::new(opts.config(), recorded_backends(&resumed_log, None), store);
    let resumed = runner.resume(&run_id).await.map_err(|e| e.to_string())?;
    let before: BTreeSet<CallRecord> = killed_log.records().into_iter().collect();
    let duplicates = resumed_log.records().iter().filter(|r| before.contains(r)).count();
    ensure(duplicates == 0, &mut failures, || format!("{duplicates} calls repeated after resume"));
    ensure(
        killed_log.total() + resumed_log.total() == expected_total,
        &mut failures,
        || format!("{} + {} calls across kill and resume", killed_log.total(), resumed_log.total()),
    );
    let resumed_out = finish_mock_run(&runner, resumed, true).await.map_err(err)?;
    ensure(rendered(&resumed_out) == first, &mut failures, || "resumed run scores differ".into());

    within_budget(start.elapsed(), Duration::from_secs(30), &mut failures);
    verdict(
        failures,
        format!(
            "{} chains, T={t}, identical across 4 runs and a kill/resume in {:?}",
            state.chains.len(),
            start.elapsed()
        ),
    )
}

/// Pearson matrix over [GC@3 cosine, -GC@3 FID, MME, HallusionBench, MMStar,
/// SEEDBench, AI2D, OpenCompass], computed once with an independent
/// statistics package from the printed overall rows.
const PEARSON_ORACLE: [[f64; 8]; 8] = [
    [1.0, 0.9872480204937855, 0.5158501463888223, 0.93450963235228, 0.6457440165095452, 0.5729585195258496, 0.8872184621996575, 0.9555188061718629],
    [0.9872480204937855, 1.0, 0.4654078091365188, 0.895237885663959, 0.6508119168633509, 0.5292716603280124, 0.8751282396809095, 0.9267055280172315],
    [0.5158501463888223, 0.46540780913651875, 1.0, 0.6526725514768308, 0.5538007269572744, 0.8437526633995241, 0.5777116938601965, 0.6167527228685241],
    [0.93450963235228, 0.8952378856639591, 0.6526725514768308, 1.0, 0.7747339491926057, 0.7855297486234261, 0.9440827622015712, 0.9847172311845143],
    [0.6457440165095452, 0.6508119168633509, 0.5538007269572744, 0.7747339491926057, 1.0, 0.7597134807678381, 0.906528747695089, 0.7789339240957996],
    [0.5729585195258496, 0.5292716603280124, 0.8437526633995241, 0.7855297486234261, 0.7597134807678381, 1.0, 0.7800849895182642, 0.7653527024506763],
    [0.8872184621996575, 0.8751282396809095, 0.5777116938601965, 0.9440827622015711, 0.9065287476950891, 0.7800849895182642, 1.0, 0.9665577824661484],
    [0.9555188061718629, 0.9267055280172315, 0.616752722868524, 0.9847172311845143, 0.7789339240957996, 0.7653527024506763, 0.9665577824661483, 1.0],
];
const ORACLE_ORDER: [&str; 8] = ["cos", "fidneg", "MME", "HallusionBench", "MMStar", "SEEDBench", "AI2D", "OpenCompass"];

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let models: Vec<String> = MODELS.iter().map(|m| m.to_string()).collect();
    let doc: serde_json::Map<String, serde_json::Value> = LEADERBOARDS
        .iter()
        .map(|(bench, scores)| {
            let by_model: serde_json::Map<String, serde_json::Value> =
                models.iter().cloned().zip(scores.iter().map(|&v| v.into())).collect();
            (bench.to_string(), by_model.into())
        })
        .collect();
    let ingested = load_benchmarks(&serde_json::to_string(&doc).unwrap()).map_err(|e| e.to_string())?;
    let mut vectors = vec![
        ("cos".to_string(), Metric::Cosine.pick(&MAIN_OVERALL_MEAN)),
        ("fidneg".to_string(), Metric::Fid.pick(&MAIN_OVERALL_MEAN).iter().map(|v| -v).collect()),
        ("MME".to_string(), Metric::Mme.pick(&MAIN_OVERALL_MEAN)),
    ];
    vectors.extend(benchmark_vectors(&ingested, &models).map_err(|e| e.to_string())?);
    let m = correlation_matrix(&vectors, CorrelationKind::Pearson).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (i, a) in ORACLE_ORDER.iter().enumerate() {
        for (j, b) in ORACLE_ORDER.iter().enumerate() {
            let v = m.get(a, b).ok_or_else(|| format!("missing {a}/{b}"))?;
            worst = worst.max((v - PEARSON_ORACLE[i][j]).abs());
            ensure((v - PEARSON_ORACLE[i][j]).abs() <= 1e-10, &mut failures, || {
                format!("{a}/{b}: {v} vs oracle {}", PEARSON_ORACLE[i][j])
            });
            if i == j {
                ensure(v == 1.0, &mut failures, || format!("diagonal {a} = {v}"));
            }
        }
    }
    verdict(failures, format!("8×8 matrix within {worst:.1e} of the oracle"))
}

fn main() {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 GC@T algebra", criterion_1()),
        ("2 FID closed forms", criterion_2()),
        ("3 main table aggregation", criterion_3()),
        ("4 human gap percentages", criterion_4()),
        ("5 mock end-to-end determinism", runtime.block_on(criterion_5())),
        ("6 correlation fixture", criterion_6()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("acceptance criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("acceptance criterion {name}: FAIL ({detail})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} acceptance criteria failed", results.len());
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", results.len());
}
