//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#[path = "../../core/tests/support/mod.rs"]
mod support;

mod common;

use argrid_cli::config::{Cli, Command};
use argrid_cli::server::{router, AppState};
use argrid_core::ar::{ArMatrix, ArModel, ArParams, ExtPopMode};
use argrid_core::baselines::{two_step_fca, DecayFunction};
use argrid_core::engine::{Engine, EngineConfig};
use argrid_core::impact::{impact_scores, min_accessibility_under_shock, shock_report};
use argrid_core::ingest::{current_supply, estimate_capacity, LoadOptions, OccupancySnapshot, StoreWriter, TriageCounts};
use argrid_core::spatial::{build_grid, BoundingBox, CellId, FacilitySite, Location};
use argrid_core::stats::{adjust, differential_report, t_test, Correction, Tail, TTestVariant};
use argrid_core::synth::{radial_city, RadialCityParams};
use chrono::{Duration, TimeZone, Utc};
use clap::Parser;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;
use support::{close, oracle_ar, oracle_ols, oracle_shock_enumeration, random_instance, Instance};

type Check = fn() -> String;

fn instance(seed: u64) -> Instance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 100, 10)
}

fn model(inst: &Instance, mode: ExtPopMode) -> ArModel {
    let params = ArParams {
        gamma: inst.gamma,
        tau_km: inst.tau,
        extpop_mode: mode,
        ..ArParams::default()
    };
    ArModel::new(&inst.grid, &inst.sites, params).unwrap()
}

fn all_close(got: &[f64], want: &[f64], rel: f64) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(&g, &w)| close(g, w, rel))
}

fn ar_oracle() -> String {
    let t = Instant::now();
    for seed in 0..50 {
        let inst = instance(seed);
        for mode in [ExtPopMode::FacilityPool, ExtPopMode::CellAggregated] {
            let oracle = oracle_ar(&inst, mode);
            let m = model(&inst, mode).evaluate(&inst.supply, None).unwrap();
            for (l, row) in oracle.standardized.iter().enumerate() {
                assert!(all_close(&m.entries().row(l).to_vec(), row, 1e-12), "seed {seed} row {l}");
            }
            assert!(all_close(&m.accessibility(), &oracle.a, 1e-12), "seed {seed} A");
            assert!(all_close(&m.reachability(), &oracle.r, 1e-12), "seed {seed} R");
        }
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 5.0, "took {secs:.2} s");
    format!("50 instances x 2 modes in {secs:.2} s")
}

fn grand_sum() -> String {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let inst = instance(seed);
        for mode in [ExtPopMode::FacilityPool, ExtPopMode::CellAggregated] {
            let m = model(&inst, mode).evaluate(&inst.supply, None).unwrap();
            let total: f64 = m.entries().sum();
            let sa: f64 = m.accessibility().iter().sum();
            let sr: f64 = m.reachability().iter().sum();
            let scale = total.abs().max(f64::MIN_POSITIVE);
            let err = ((sa - total).abs().max((sr - total).abs())) / scale;
            assert!(total == 0.0 && sa == 0.0 && sr == 0.0 || err <= 1e-9, "seed {seed}: {sa} {sr} {total}");
            worst = worst.max(if total == 0.0 { 0.0 } else { err });
        }
    }
    format!("max relative gap {worst:.1e}")
}

fn rows(m: &ArMatrix) -> Vec<Vec<f64>> {
    m.entries().outer_iter().map(|r| r.to_vec()).collect()
}

fn shock_identity() -> String {
    for seed in 0..50 {
        let inst = instance(seed);
        let m = model(&inst, ExtPopMode::FacilityPool).evaluate(&inst.supply, None).unwrap();
        let (best, _) = oracle_shock_enumeration(&rows(&m));
        let sweep = min_accessibility_under_shock(&m);
        assert_eq!(sweep.min_accessibility, best, "seed {seed}");
        assert!(sweep.min_accessibility.iter().zip(&sweep.accessibility).all(|(h, a)| h <= a));
    }
    let entries = Array2::from_shape_vec((3, 3), vec![0.0, 0.7, 0.0, 0.2, 0.5, 0.1, 0.0, 0.0, 1.0]).unwrap();
    let sweep = min_accessibility_under_shock(&ArMatrix::from_entries(entries, -2.0, 5.0));
    assert_eq!((sweep.min_accessibility[0], sweep.min_accessibility[2]), (0.0, 0.0));
    "50 enumerations exact; sole suppliers collapse to 0".into()
}

fn ols() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(3..200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let fit = impact_scores(&x, &y).unwrap();
        let (alpha, beta) = oracle_ols(&x, &y);
        assert!((fit.alpha - alpha).abs() <= 1e-9 * alpha.abs().max(1.0));
        assert!((fit.beta - beta).abs() <= 1e-9 * beta.abs().max(1.0));
        let sum_r: f64 = fit.residuals.iter().sum();
        let sum_rx: f64 = fit.residuals.iter().zip(&x).map(|(r, x)| r * x).sum();
        assert!(sum_r.abs() < 1e-9 && sum_rx.abs() < 1e-9, "{sum_r} {sum_rx}");
    }
    let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.37).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v).collect();
    assert!(impact_scores(&x, &y).unwrap().residuals.iter().all(|r| r.abs() < 1e-12));
    "200 random fits orthogonal and match the oracle; collinear fit exact".into()
}

fn multiple_testing() -> String {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let cells = support::simulated_cells(&mut rng, 211, 100);
    let report = differential_report(&cells, TTestVariant::Welch, Tail::BGreater, 0.05).unwrap();
    let n = |c| report.rejection_count(c);
    let counts = [n(Correction::Bonferroni), n(Correction::Bh), n(Correction::None)];
    assert!(counts[0] <= counts[1] && counts[1] <= counts[2], "{counts:?}");
    let raw: Vec<f64> = report.cells.iter().map(|c| c.p).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    for method in Correction::ALL {
        let adj = adjust(&raw, method, 0.05).unwrap();
        assert!(order.windows(2).all(|w| adj.p_adjusted[w[0]] <= adj.p_adjusted[w[1]]), "{method:?}");
        assert!(adj.p_adjusted.iter().zip(&raw).all(|(a, p)| a >= p && *a <= 1.0));
    }
    let example = [0.01, 0.02, 0.03, 0.04];
    let got: Vec<usize> = [Correction::Bonferroni, Correction::Holm, Correction::Hochberg, Correction::Bh]
        .iter()
        .map(|&c| adjust(&example, c, 0.05).unwrap().rejections())
        .collect();
    assert_eq!(got, [1, 1, 4, 4]);
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 10.0);
    format!("bonferroni {} <= bh {} <= none {} of 211 in {secs:.2} s", counts[0], counts[1], counts[2])
}

fn t_test_correctness() -> String {
    let xs = [1.0, 2.0, 3.0];
    let r = t_test(&xs, &xs, TTestVariant::Welch, Tail::TwoSided).unwrap();
    assert_eq!((r.t, r.p), (0.0, 1.0));
    let w = t_test(&[10.0, 11.0, 12.0, 13.0], &[14.0, 15.0, 16.0, 17.0], TTestVariant::Welch, Tail::TwoSided).unwrap();
    assert!((w.t - -4.0 / (10.0f64 / 12.0).sqrt()).abs() < 1e-12);
    assert!((w.df - 6.0).abs() < 1e-12);
    let reference = 2.0 * StudentsT::new(0.0, 1.0, 6.0).unwrap().cdf(w.t);
    assert!((w.p - reference).abs() < 1e-12);
    format!("t = {:.4}, df = {}, p = {:.6}", w.t, w.df, w.p)
}

fn fca_mass_balance() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (l, k) = (rng.random_range(1..60), rng.random_range(1..12));
        let supply: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..100.0)).collect();
        let pop: Vec<f64> = (0..l).map(|_| rng.random_range(1.0..5000.0)).collect();
        let dist = Array2::from_shape_fn((l, k), |_| rng.random_range(0.0..20.0));
        let a = two_step_fca(&supply, &pop, &dist, DecayFunction::Uniform { threshold: 25.0 }, 25.0).unwrap();
        let lhs: f64 = a.iter().zip(&pop).map(|(a, p)| a * p).sum();
        let rhs: f64 = supply.iter().sum();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs, "{lhs} vs {rhs}");
    }
    "100 random instances conserve supply".into()
}

fn capacity_rules() -> String {
    let opts = LoadOptions::default();
    let t0 = Utc.with_ymd_and_hms(2022, 3, 7, 8, 0, 0).unwrap();
    let mk = |i: i64, c: TriageCounts| OccupancySnapshot {
        site_id: "ED".into(),
        ts: t0 + Duration::minutes(i),
        in_charge: c,
        waiting: TriageCounts::default(),
    };
    let series: Vec<_> = [3, 7, 5].iter().enumerate().map(|(i, &n)| mk(i as i64, TriageCounts::new(0, n, 0, 0))).collect();
    assert_eq!(estimate_capacity(&series, &opts), Ok(7));
    assert_eq!(current_supply(&mk(9, TriageCounts::new(0, 12, 0, 0)), 7, &opts), 0);
    let red_heavy = mk(0, TriageCounts::new(1, 2, 3, 1000));
    assert_eq!(opts.load(&red_heavy), 6);
    "capacity 7, clamp 0, red excluded".into()
}

fn determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    common::run(&["synth", "--out", d, "--corpus", &format!("{d}/corpus.ndjson")]).unwrap();
    std::fs::write(
        dir.path().join("replay.json"),
        r#"{"source": {"kind": "file_replay", "path": "corpus.ndjson"}, "poll_interval_secs": 300}"#,
    )
    .unwrap();
    for store in ["s1", "s2"] {
        common::run(&["ingest", "--source", &format!("{d}/replay.json"), "--store", &format!("{d}/{store}")]).unwrap();
        let flags = ["--grid", &format!("{d}/grid.csv"), "--sites", &format!("{d}/sites.csv"), "--store", &format!("{d}/{store}")];
        let run = |cmd: &str, extra: &[&str]| {
            let mut args = vec![cmd];
            args.extend_from_slice(&flags);
            args.extend_from_slice(extra);
            common::run(&args).unwrap();
        };
        let out = |name: &str| format!("{d}/{store}-{name}");
        run("compute", &["--at", "2022-03-16T14:00:00Z", "--out", &out("ar")]);
        run("impact", &["--at", "2022-03-16T14:00:00Z", "--saturate", "C01,B03", "--out", &out("impact")]);
        run("test", &["--from", common::START, "--to", "2022-03-20T23:00:00Z", "--slot", "19:00-20:00", "--out", &out("test")]);
    }
    let mut files = 0;
    for name in ["ar", "impact", "test"] {
        files += common::same_tree(&dir.path().join(format!("s1-{name}")), &dir.path().join(format!("s2-{name}"))).unwrap();
    }
    format!("{files} artifacts byte-identical across two replays")
}

fn performance() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (side, h) = (100, 0.2);
    let pops: Vec<(CellId, f64)> = (0..side * side).map(|i| (CellId(format!("c{i}")), rng.random_range(0.0..3000.0))).collect();
    let extent = side as f64 * h;
    let grid = build_grid(BoundingBox::new(0.0, 0.0, extent, extent), h, &pops).unwrap();
    let sites: Vec<FacilitySite> = (0..100)
        .map(|j| FacilitySite::new(format!("s{j}"), Location::planar(rng.random_range(0.0..extent), rng.random_range(0.0..extent))))
        .collect();
    let supply: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..40.0)).collect();
    let t = Instant::now();
    let model = ArModel::new(&grid, &sites, ArParams::default()).unwrap();
    let m = model.evaluate(&supply, None).unwrap();
    let sweep = min_accessibility_under_shock(&m);
    let batch = t.elapsed().as_secs_f64();
    assert_eq!(sweep.min_accessibility.len(), 10_000);

    let latency = shock_latency();
    let msg = format!("L=10000 K=100 in {:.0} ms; POST /shock p95 {:.1} ms", batch * 1e3, latency * 1e3);
    assert!(batch < 1.0 && latency < 0.1, "{msg}");
    msg
}

/// p95 of `POST /shock` against a bound server over 250 cells and 20 sites.
fn shock_latency() -> f64 {
    let dir = tempfile::tempdir().unwrap();
    let mut grid = String::from("cell_id,lon,lat,x_km,y_km,population\n");
    for i in 0..250 {
        grid += &format!("c{i},,,{}.5,{}.5,{}\n", i % 25, i / 25, 100 + (i * 37) % 900);
    }
    let mut sites = String::from("site_id,label,lon,lat,x_km,y_km\n");
    let ids: Vec<String> = (0..20).map(|j| format!("S{j:02}")).collect();
    for (j, id) in ids.iter().enumerate() {
        sites += &format!("{id},{id},,,{}.5,{}.5\n", (j * 7) % 25, (j * 3) % 10);
    }
    std::fs::write(dir.path().join("grid.csv"), grid).unwrap();
    std::fs::write(dir.path().join("sites.csv"), sites).unwrap();
    let mut w = StoreWriter::open(dir.path().join("store")).unwrap();
    for (ts, load) in [("2022-03-16T02:00:00Z", 30), ("2022-03-16T08:00:00Z", 12)] {
        let batch: Vec<_> = ids
            .iter()
            .enumerate()
            .map(|(j, id)| OccupancySnapshot {
                site_id: id.as_str().into(),
                ts: ts.parse().unwrap(),
                in_charge: TriageCounts::new(0, load + j as u32, 0, 0),
                waiting: TriageCounts::default(),
            })
            .collect();
        w.append(&batch).unwrap();
    }
    let d = dir.path().to_str().unwrap();
    let cli = Cli::try_parse_from([
        "argrid", "serve", "--grid", &format!("{d}/grid.csv"), "--sites", &format!("{d}/sites.csv"), "--store", &format!("{d}/store"),
    ])
    .unwrap();
    let Command::Serve(args) = cli.command else { unreachable!() };
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async move {
        let state = Arc::new(AppState::new(args.run, 8).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("http://{}/shock", listener.local_addr().unwrap());
        tokio::spawn(async move { axum::serve(listener, router(state, None)).await.unwrap() });
        let client = reqwest::Client::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut times = Vec::new();
        for _ in 0..200 {
            let picked: Vec<&String> = ids.iter().filter(|_| rng.random_bool(0.2)).chain(std::iter::once(&ids[0])).collect();
            let body = serde_json::json!({ "at": "2022-03-16T08:00:00Z", "saturated_sites": picked });
            let t = Instant::now();
            let r = client.post(&url).json(&body).send().await.unwrap();
            assert!(r.status().is_success());
            r.bytes().await.unwrap();
            times.push(t.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        times[(times.len() * 95).div_ceil(100) - 1]
    })
}

fn radial_pattern() -> String {
    let city = radial_city(&RadialCityParams::default()).unwrap();
    let start = Utc.with_ymd_and_hms(2022, 3, 6, 23, 0, 0).unwrap();
    let corpus = city.occupancy.corpus(start, start + Duration::days(7), Duration::minutes(15));
    let engine = Engine::new(city.grid.clone(), city.sites.clone(), EngineConfig::default())
        .unwrap()
        .with_snapshots(&corpus);
    let central: Vec<bool> = city.cell_radius.iter().map(|&r| r <= 2.0).collect();
    let border: Vec<bool> = city.cell_radius.iter().map(|&r| r >= 5.0).collect();
    let border_site: Vec<bool> = city.central_site.iter().map(|c| !c).collect();
    let mean = |v: &[f64], mask: &[bool]| {
        let picked: Vec<f64> = v.iter().zip(mask).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
        picked.iter().sum::<f64>() / picked.len() as f64
    };
    let mut last = String::new();
    for day in 0..7 {
        for hour in [4, 10, 16] {
            let at = start + Duration::days(day) + Duration::hours(hour);
            let m = engine.ar_at(at).unwrap();
            let (a, r) = (m.accessibility(), m.reachability());
            let impact: Vec<f64> = shock_report(&m, &city.grid, &city.sites).unwrap().records.iter().map(|x| x.impact).collect();
            let (ac, ab) = (mean(&a, &central), mean(&a, &border));
            let (rc, rb) = (mean(&r, &city.central_site), mean(&r, &border_site));
            let (ic, ib) = (mean(&impact, &central), mean(&impact, &border));
            assert!(ac > ab && rc < rb && ib < 0.0 && ib < ic, "at {at}: A {ac}/{ab} R {rc}/{rb} impact {ic}/{ib}");
            last = format!("A {ac:.2} vs {ab:.2}, R {rc:.2} vs {rb:.2}, impact {ic:.3} vs {ib:.3}");
        }
    }
    format!("21 instants; central vs border: {last}")
}

fn main() {
    let checks: [(&str, Check); 11] = [
        ("AR oracle equivalence", ar_oracle),
        ("grand-sum identity", grand_sum),
        ("shock identity", shock_identity),
        ("OLS residual orthogonality", ols),
        ("multiple-testing nesting", multiple_testing),
        ("t-test correctness", t_test_correctness),
        ("2SFCA mass balance", fca_mass_balance),
        ("capacity and supply rules", capacity_rules),
        ("end-to-end determinism", determinism),
        ("performance", performance),
        ("radial city pattern", radial_pattern),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
