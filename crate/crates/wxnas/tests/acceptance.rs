//! Acceptance criteria 1-10. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL (or SKIP) line.
//!
//! Criterion 10 needs network access and hours of CPU time; it runs only
//! when `WXNAS_FULL_DATA=1`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use wxnas::bench::time_inference;
use wxnas::executor::ThreadedExecutor;
use wxnas::model_file::{decode_model, encode_model, load_model, save_model};
use wxnas::pipeline::{evaluate_rmse, parse_arch, run_search, train_on_sources, DataSource, PreparedData};
use wxnas_core::dataset::{assemble_pooled, PreparedCity, Segment, WindowedDataset};
use wxnas_core::metrics::{persistence_rmse, Persistence};
use wxnas_core::nas::{
    crowding_distance, evolve, fast_non_dominated_sort, SearchBudget, SearchConfig, SearchResult, SerialExecutor,
    TrainingEvaluator,
};
use wxnas_core::nn::{check_gradients, count_params, Dims, Forecaster, ModelSpec, TrainConfig, TrainedModel};
use wxnas_core::rng::{seeded, standard_normal};
use wxnas_core::robustness::{conformal_calibrate, conformal_interval, empirical_coverage, horizon_rmse};
use wxnas_core::series::{CityRecord, HourlySeries, Role};
use wxnas_core::synthetic::{generate_synthetic_city, ClimateProfile};
use wxnas_core::transfer::{pretrain, run_transfer_experiment, TransferConfig};
use wxnas_core::{LOOKBACK, N_FEATURES};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn city(seed: u64, hours: usize, name: &str, role: Role) -> HourlySeries {
    let mut s = generate_synthetic_city(seed, hours, ClimateProfile::Temperate).unwrap();
    s.city = CityRecord::new(name, 0.0, 0.0, "temperate", role).unwrap();
    s
}

fn c1_param_counts() -> Outcome {
    let cases = [("gru128-gru128", 153_096), ("cnn128", 4_232), ("cnn32", 1_064)];
    let mut got = Vec::new();
    for (desc, want) in cases {
        let n = count_params(&desc.parse().unwrap(), Dims::default());
        if n != want {
            return Err(format!("{desc}: {n} != {want}"));
        }
        got.push(format!("{desc}={n}"));
    }
    Ok(got.join(", "))
}

fn c2_gradients() -> Outcome {
    let mut worst = 0.0f64;
    for (desc, lookback, features, batch) in
        [("dense8", 5, 3, 4), ("cnn8", 6, 3, 4), ("gru8", 6, 2, 4), ("lstm8", 5, 3, 3), ("attn8", 4, 3, 2)]
    {
        let spec: ModelSpec = desc.parse().unwrap();
        for seed in 0..3 {
            let r = check_gradients(&spec, Dims { lookback, features }, batch, seed, 1e-5, 1e-6).map_err(|e| e.to_string())?;
            if r.max_relative_error >= 1e-4 {
                return Err(format!("{desc} seed {seed}: max relative error {:.3e}", r.max_relative_error));
            }
            worst = worst.max(r.max_relative_error);
        }
    }
    Ok(format!("max relative error {worst:.2e} < 1e-4"))
}

fn brute_force_ranks(points: &[[f64; 3]]) -> Vec<usize> {
    let dom = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y);
    let mut rank = vec![usize::MAX; points.len()];
    let mut level = 0;
    while rank.contains(&usize::MAX) {
        let open: Vec<usize> = (0..points.len()).filter(|&i| rank[i] == usize::MAX).collect();
        let layer: Vec<usize> =
            open.iter().copied().filter(|&i| !open.iter().any(|&j| dom(&points[j], &points[i]))).collect();
        for i in layer {
            rank[i] = level;
        }
        level += 1;
    }
    rank
}

fn c3_dominance() -> Outcome {
    let mut rng = seeded(31);
    let points: Vec<[f64; 3]> = (0..500)
        .map(|_| [standard_normal(&mut rng), standard_normal(&mut rng), standard_normal(&mut rng)])
        .collect();
    let fronts = fast_non_dominated_sort(&points);
    let mut rank = vec![usize::MAX; points.len()];
    for (r, f) in fronts.iter().enumerate() {
        for &i in f {
            rank[i] = r;
        }
    }
    if rank != brute_force_ranks(&points) {
        return Err("ranks differ from brute-force dominance".into());
    }
    for f in &fronts {
        let d = crowding_distance(&points, f);
        for m in 0..3 {
            let lo = f.iter().copied().min_by(|&a, &b| points[a][m].total_cmp(&points[b][m])).unwrap();
            let hi = f.iter().copied().max_by(|&a, &b| points[a][m].total_cmp(&points[b][m])).unwrap();
            for b in [lo, hi] {
                let k = f.iter().position(|&i| i == b).unwrap();
                if d[k] != f64::INFINITY {
                    return Err(format!("boundary point {b} of objective {m} has distance {}", d[k]));
                }
            }
        }
    }
    Ok(format!("{} fronts match brute force; boundaries infinite", fronts.len()))
}

fn objectives(r: &SearchResult) -> Vec<(String, u64, usize, usize)> {
    r.front()
        .iter()
        .map(|i| (i.genome.to_string(), i.objectives.val_rmse.to_bits(), i.objectives.param_count, i.objectives.depth))
        .collect()
}

fn c4_mini_search() -> Outcome {
    let t0 = Instant::now();
    let cities = [
        PreparedCity::source(city(11, 2000, "a", Role::Source)).unwrap(),
        PreparedCity::source(city(12, 2000, "b", Role::Source)).unwrap(),
    ];
    let config = SearchConfig { population: 6, generations: 3, seed: 4, ..SearchConfig::default() };
    let budget = SearchBudget::default();
    let train = budget.subsample(&assemble_pooled(&cities, Segment::Train).unwrap(), 9);
    let val = assemble_pooled(&cities, Segment::Val).unwrap();
    let evaluator =
        TrainingEvaluator { train_set: &train, val_set: &val, config: budget.train.with_seed(4), dims: Dims::default() };
    let result = evolve(&config, &evaluator, &SerialExecutor).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed().as_secs_f64();
    let front = result.front();
    let vecs: Vec<[f64; 3]> = front.iter().map(|i| i.objectives.vector()).collect();
    for (i, a) in vecs.iter().enumerate() {
        for (j, b) in vecs.iter().enumerate() {
            if i != j && a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y) {
                return Err(format!("front member {i} dominates {j}"));
            }
        }
    }
    let best = front.iter().map(|i| i.objectives.val_rmse).fold(f64::INFINITY, f64::min);
    let pers = persistence_rmse(&val).map_err(|e| e.to_string())?;
    let unique = result.unique_evaluations();
    check(
        unique <= 24 && best < pers && elapsed < 600.0,
        format!("{unique} unique trainings, best RMSE {best:.4} vs persistence {pers:.4}, {elapsed:.0} s"),
    )
}

/// Residuals of a persistence predictor on `y = last input row + N(0, 0.1²)`.
fn noisy_persistence_task(n: usize, seed: u64) -> WindowedDataset {
    let mut rng = seeded(seed);
    let mut ds = WindowedDataset::empty(LOOKBACK, N_FEATURES);
    for i in 0..n {
        let w: Vec<f32> = (0..LOOKBACK * N_FEATURES).map(|_| standard_normal(&mut rng) as f32).collect();
        let last = &w[(LOOKBACK - 1) * N_FEATURES..];
        ds.y.extend(last.iter().map(|&v| v + 0.1 * standard_normal(&mut rng) as f32));
        ds.x.extend_from_slice(&w);
        ds.origins.push(wxnas_core::dataset::WindowOrigin { city: 0, row: i as u32 });
    }
    ds.cities.push(wxnas_core::dataset::CityTag { name: "regression".into(), start_time: 0 });
    ds
}

fn c5_conformal() -> Outcome {
    let model = Persistence { dims: Dims::default() };
    let cal = noisy_persistence_task(2000, 51);
    let test = noisy_persistence_task(10_000, 52);
    let calib = conformal_calibrate(&model, &cal, 0.05).map_err(|e| e.to_string())?;
    let pred = model.predict(&test.x, test.len()).map_err(|e| e.to_string())?;
    let cov = empirical_coverage(&conformal_interval(&pred, &calib).map_err(|e| e.to_string())?, &test.y)
        .map_err(|e| e.to_string())?;
    check((0.94..=0.96).contains(&cov.macro_average), format!("macro coverage {:.4}", cov.macro_average))
}

/// Three sources × 4,000 h and one 8,760 h target, all temperate.
fn transfer_data() -> PreparedData {
    let mut series: Vec<HourlySeries> =
        (0..3).map(|i| city(200 + i, 4000, &format!("source{i}"), Role::Source)).collect();
    series.push(city(300, 8760, "target", Role::Target));
    PreparedData::from_series(series).unwrap()
}

fn pretrained_gru32(data: &PreparedData) -> TrainedModel {
    let spec: ModelSpec = "gru32".parse().unwrap();
    let train = data.source(Segment::Train).unwrap();
    let val = data.source(Segment::Val).unwrap();
    pretrain(&spec, data.dims(), &train, &val, &TrainConfig::default().with_seed(1)).unwrap()
}

fn c6_transfer(data: &PreparedData, pretrained: &TrainedModel) -> Outcome {
    let config = TransferConfig { fractions: vec![0.01], trials: 10, seed: 7, train: TrainConfig::default() };
    let r = run_transfer_experiment(pretrained, &data.targets, &config).map_err(|e| e.to_string())?;
    let f = &r.fractions[0];
    check(
        f.transfer_mean < f.scratch_mean && f.ttest.p_value < 0.05,
        format!(
            "1%: transfer {:.4} vs scratch {:.4}, paired t p = {:.2e}, N = {}",
            f.transfer_mean, f.scratch_mean, f.ttest.p_value, r.trials
        ),
    )
}

fn c7_horizon(data: &PreparedData, model: &TrainedModel) -> Outcome {
    let target = &data.targets[0];
    let test = target.split.range(Segment::Test);
    let span = LOOKBACK + 12;
    let starts: Vec<usize> = (test.start..test.end - span + 1).step_by(3).collect();
    let r = horizon_rmse(model, &target.scaled, &starts, 12).map_err(|e| e.to_string())?;
    check(
        starts.len() >= 500 && r[11] > r[0],
        format!("h1 {:.4} < h12 {:.4} over {} seed windows", r[0], r[11], starts.len()),
    )
}

fn c8_deployment() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let c = TrainedModel::initialized(parse_arch("cnn32").unwrap(), Dims::default(), 1).unwrap();
    let a = TrainedModel::initialized(parse_arch("gru128x2").unwrap(), Dims::default(), 1).unwrap();
    let (pc, pa) = (dir.path().join("c.gnas"), dir.path().join("a.gnas"));
    save_model(&c, &pc).map_err(|e| e.to_string())?;
    save_model(&a, &pa).map_err(|e| e.to_string())?;
    let size_c = std::fs::metadata(&pc).unwrap().len();
    let size_a = std::fs::metadata(&pa).unwrap().len();
    let latency = time_inference(&c, 100, 1000).map_err(|e| e.to_string())?.mean_ms;
    let payload = 153_096 * 4;
    let a_ok = (payload..=payload + 65_536).contains(&size_a) && (552_960..=675_840).contains(&size_a);
    check(
        latency < 1.0 && size_c < 8_192 && a_ok,
        format!("C latency {latency:.3} ms, C artifact {size_c} B, A artifact {size_a} B"),
    )
}

fn c9_determinism() -> Outcome {
    let series = vec![city(21, 1500, "s", Role::Source), city(22, 1500, "t", Role::Target)];
    let data = PreparedData::from_series(series).unwrap();
    let config = SearchConfig { population: 4, generations: 2, seed: 9, ..SearchConfig::default() };
    let budget = SearchBudget {
        min_windows: 256,
        train: TrainConfig { max_epochs: 3, patience: 2, batch_size: 32, ..TrainConfig::default() },
        ..SearchBudget::default()
    };
    let serial = run_search(&data, &config, &budget, &SerialExecutor).map_err(|e| e.to_string())?;
    let threaded = run_search(&data, &config, &budget, &ThreadedExecutor::new(2)).map_err(|e| e.to_string())?;
    if objectives(&serial) != objectives(&threaded) {
        return Err("search fronts differ between identical-seed runs".into());
    }
    let spec = parse_arch("gru8-dense8@0.2").unwrap();
    let cfg = TrainConfig { max_epochs: 4, patience: 2, ..TrainConfig::default() }.with_seed(3);
    let m1 = train_on_sources(&data, &spec, &cfg).map_err(|e| e.to_string())?;
    let m2 = train_on_sources(&data, &spec, &cfg).map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    if bits(&m1.meta.train_loss) != bits(&m2.meta.train_loss) || bits(&m1.meta.val_rmse) != bits(&m2.meta.val_rmse) {
        return Err("training curves differ between identical-seed runs".into());
    }
    let test = data.target_test().unwrap();
    let before = m1.predict(&test.x, test.len()).unwrap();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.gnas");
    save_model(&m1, &path).map_err(|e| e.to_string())?;
    let after = load_model(&path).map_err(|e| e.to_string())?.predict(&test.x, test.len()).unwrap();
    let reencoded = decode_model(&encode_model(&m1).unwrap()).unwrap();
    let same = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits()) && reencoded.params == m1.params;
    check(
        same && before.len() == after.len(),
        format!("{} front members and {} epochs identical; {} predictions bitwise equal", serial.front().len(), m1.meta.epochs_run, before.len()),
    )
}

fn c10_full_data() -> Outcome {
    let cities = wxnas::cities::default_cities();
    let source = DataSource::Real {
        start: chrono_date(2019, 1, 1),
        end: chrono_date(2024, 12, 31),
        cache_dir: std::env::var_os("WXNAS_CACHE_DIR")
            .map(Into::into)
            .unwrap_or_else(|| std::env::temp_dir().join("wxnas-cache")),
    };
    let client = wxnas::ingest::ArchiveClient::new(Box::new(wxnas::ingest::UreqTransport::default()));
    let data = PreparedData::load(&source, &cities, Some(&client)).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default().with_seed(42);
    let model = train_on_sources(&data, &parse_arch("gru128x2").unwrap(), &cfg).map_err(|e| e.to_string())?;
    let test = data.target_test().unwrap();
    let target_rmse = evaluate_rmse(&model, &test).map_err(|e| e.to_string())?;
    let config = TransferConfig { fractions: vec![1.0], trials: 10, seed: 42, train: cfg };
    let r = run_transfer_experiment(&model, &data.targets, &config).map_err(|e| e.to_string())?;
    let f = &r.fractions[0];
    check(
        (0.08..=0.12).contains(&target_rmse) && f.transfer_mean < f.scratch_mean,
        format!(
            "target RMSE {target_rmse:.4}; 100%: transfer {:.4} vs scratch {:.4} ({:+.1}%)",
            f.transfer_mean, f.scratch_mean, f.improvement_pct
        ),
    )
}

fn chrono_date(y: i32, m: u32, d: u32) -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = t0.elapsed().as_secs_f64();
    match outcome {
        Ok(d) => {
            println!("criterion {n:>2} {name}: PASS ({d}) [{secs:.1} s]");
            true
        }
        Err(d) => {
            println!("criterion {n:>2} {name}: FAIL ({d}) [{secs:.1} s]");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= report(1, "parameter counts", c1_param_counts);
    ok &= report(2, "gradient correctness", c2_gradients);
    ok &= report(3, "dominance sort", c3_dominance);
    ok &= report(4, "mini end-to-end search", c4_mini_search);
    ok &= report(5, "conformal validity", c5_conformal);
    let data = transfer_data();
    let pretrained = pretrained_gru32(&data);
    ok &= report(6, "transfer directionality", || c6_transfer(&data, &pretrained));
    ok &= report(7, "multi-step degradation", || c7_horizon(&data, &pretrained));
    ok &= report(8, "deployment bounds", c8_deployment);
    ok &= report(9, "determinism and round trip", c9_determinism);
    if std::env::var("WXNAS_FULL_DATA").is_ok_and(|v| v == "1") {
        ok &= report(10, "full-data integration", c10_full_data);
    } else {
        println!("criterion 10 full-data integration: SKIP (set WXNAS_FULL_DATA=1; needs network and hours)");
    }
    if !ok {
        std::process::exit(1);
    }
}
