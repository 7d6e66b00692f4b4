//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! print, in order.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use risopt::baselines::Optimizer;
use risopt::channel::{aggregate, gen_rayleigh, LargeScale, PhaseVector, SystemDims};
use risopt::cvec::{inner_h, norm_sqr};
use risopt::encode::random_vector;
use risopt::harness::config::{ChannelModel, ExperimentConfig, ModeName, OptimizerSpec};
use risopt::harness::output::{read_rows, Row, RESULTS_FILE, TRACE_DIR};
use risopt::harness::{plot, recipes, run_experiment};
use risopt::linkmath::{precode, ser_analytic, ser_series_high, ser_series_low, FitnessMode, LinkBudget, Precoder};
use risopt::modem::Constellation;
use risopt::optim::{DeConfig, Mode, Objective, Problem};
use risopt::rng::stream;
use risopt::{baselines, Execution};

const ROOT_SEED: u64 = 20_240_611;
const SEEDS: usize = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn spec(optimizer: Optimizer, mode: Mode) -> OptimizerSpec {
    OptimizerSpec { optimizer, mode: ModeName(mode), fitness: FitnessMode::AvgSer }
}

/// Runs `cfg` through the harness into a scratch directory.
fn experiment(name: &str, cfg: &ExperimentConfig) -> (tempfile::TempDir, Vec<Row>) {
    let dir = tempfile::tempdir().expect("scratch directory");
    let summary = run_experiment(name, cfg, ROOT_SEED, dir.path()).expect("experiment runs");
    assert!(summary.errors.is_empty(), "sub-run errors: {:?}", summary.errors);
    let rows = read_rows(&dir.path().join(RESULTS_FILE)).expect("results readable");
    (dir, rows)
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn values<'a>(rows: &'a [Row], scheme: &'a str, metric: &'a str) -> impl Iterator<Item = &'a Row> {
    rows.iter().filter(move |r| r.scheme == scheme && r.metric == metric)
}

fn seeds_of(rows: &[Row], scheme: &str) -> usize {
    let mut s: Vec<u64> = values(rows, scheme, "ser_analytic").map(|r| r.seed).collect();
    s.sort_unstable();
    s.dedup();
    s.len()
}

// 1. Analytic and simulated SER agree for the linear precoders.
fn analytic_vs_monte_carlo() -> Verdict {
    let started = Instant::now();
    let mut cfg = recipes::find("fig3").unwrap().config();
    cfg.users = vec![4];
    cfg.realizations = SEEDS;
    cfg.n_symbols = 100_000;
    let (_dir, rows) = experiment("fig3", &cfg);
    let elapsed = started.elapsed();

    let mut checked = 0;
    let mut failing = 0;
    let mut per_scheme = Vec::new();
    for scheme in Precoder::ALL {
        let mut worst = (0.0f64, f64::NAN);
        for &rho in &cfg.rho_db {
            let at = |metric| mean(values(&rows, scheme.name(), metric).filter(|r| r.rho_db == rho).map(|r| r.value));
            let (analytic, mc) = (at("ser_analytic"), at("ser_mc"));
            if analytic < 1e-3 {
                continue;
            }
            let n = (cfg.n_symbols * 4 * cfg.realizations) as f64;
            let tol = (3.0 * (analytic * (1.0 - analytic) / n).sqrt()).max(0.05 * analytic);
            let ratio = (mc - analytic).abs() / tol;
            checked += 1;
            failing += usize::from(ratio > 1.0);
            if ratio > worst.0 {
                worst = (ratio, rho);
            }
        }
        per_scheme.push(format!("{} worst {:.3} @ {} dB", scheme.name(), worst.0, worst.1));
    }
    let fast = elapsed <= Duration::from_secs(300);
    verdict(
        failing == 0 && checked > 0 && fast,
        format!(
            "{failing}/{checked} points outside max(3 SE, 5%) (|MC-analytic|/tol: {}); {:.1}s (limit 300s)",
            per_scheme.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Shared optimizer runs at 0, 5 and 15 dB with traces.
struct OptimizerRuns {
    at_0db: Vec<Row>,
    at_0db_time: Duration,
    joint_vs_passive: Vec<Row>,
    traces: BTreeMap<String, Vec<Vec<risopt::optim::TraceRow>>>,
    _dirs: Vec<tempfile::TempDir>,
}

fn optimizer_runs() -> OptimizerRuns {
    let mut cfg = ExperimentConfig {
        rho_db: vec![0.0],
        realizations: SEEDS,
        traces: true,
        optimizers: vec![
            spec(Optimizer::ImprovedDe, Mode::Joint),
            spec(Optimizer::CanonicalDe, Mode::Joint),
            spec(Optimizer::Ga, Mode::Joint),
            spec(Optimizer::RandomRzf, Mode::Joint),
        ],
        ..ExperimentConfig::default()
    };
    let started = Instant::now();
    let (a, at_0db) = experiment("fig6", &cfg);
    let at_0db_time = started.elapsed();

    cfg.rho_db = vec![5.0, 15.0];
    cfg.optimizers = vec![
        spec(Optimizer::ImprovedDe, Mode::Joint),
        spec(Optimizer::ImprovedDe, Mode::PassiveOnly(Precoder::Rzf)),
    ];
    let (b, joint_vs_passive) = experiment("table1", &cfg);

    let mut traces = plot::read_traces(&a.path().join(TRACE_DIR)).unwrap();
    for (k, v) in plot::read_traces(&b.path().join(TRACE_DIR)).unwrap() {
        traces.entry(k).or_default().extend(v);
    }
    OptimizerRuns { at_0db, at_0db_time, joint_vs_passive, traces, _dirs: vec![a, b] }
}

// 2. Improved DE beats random phases + RZF by at least 20%.
fn beats_random_baseline(runs: &OptimizerRuns) -> Verdict {
    let de = "improved_de/joint/avg_ser";
    let improved = mean(values(&runs.at_0db, de, "ser_analytic").map(|r| r.value));
    let random = mean(values(&runs.at_0db, "random_rzf", "ser_analytic").map(|r| r.value));
    let nfe = mean(values(&runs.at_0db, de, "nfe").map(|r| r.value));
    let ratio = improved / random;
    let fast = runs.at_0db_time <= Duration::from_secs(600);
    verdict(
        ratio <= 0.8 && seeds_of(&runs.at_0db, de) >= SEEDS && fast,
        format!(
            "improved DE {improved:.4} vs random+RZF {random:.4}: ratio {ratio:.4} (limit 0.8), mean NFE {nfe:.0}; {:.1}s (limit 600s)",
            runs.at_0db_time.as_secs_f64()
        ),
    )
}

// 3. Local search and adaptation do not lose to canonical DE.
fn improved_vs_canonical(runs: &OptimizerRuns) -> Verdict {
    let fit = |s| values(&runs.at_0db, s, "fitness").map(|r| (r.seed, r.value)).collect::<BTreeMap<_, _>>();
    let (imp, can) = (fit("improved_de/joint/avg_ser"), fit("canonical_de/joint/avg_ser"));
    let wins = imp.iter().filter(|(s, v)| **v <= can[*s]).count();
    let (mi, mc) = (mean(imp.values().copied()), mean(can.values().copied()));
    verdict(
        mi <= mc && imp.len() >= SEEDS,
        format!("final mean fitness improved {mi:.4} vs canonical {mc:.4}; paired wins {wins}/{}", imp.len()),
    )
}

// 4. Joint design does not lose to RIS phases + RZF.
fn joint_vs_passive(runs: &OptimizerRuns) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for rho in [5.0, 15.0] {
        let at = |s| mean(values(&runs.joint_vs_passive, s, "ser_analytic").filter(|r| r.rho_db == rho).map(|r| r.value));
        let (joint, passive) = (at("improved_de/joint/avg_ser"), at("improved_de/passive_rzf/avg_ser"));
        pass &= joint <= passive;
        parts.push(format!("{rho} dB: joint {joint:.4e} vs passive {passive:.4e}"));
    }
    verdict(pass && seeds_of(&runs.joint_vs_passive, "improved_de/joint/avg_ser") >= SEEDS, parts.join("; "))
}

// 5. Best fitness never increases along any trace.
fn elitist_traces(runs: &OptimizerRuns) -> Verdict {
    let mut total = 0;
    let mut bad = Vec::new();
    for (label, list) in &runs.traces {
        for t in list {
            total += 1;
            if t.windows(2).any(|w| w[1].best > w[0].best) {
                bad.push(label.clone());
            }
        }
    }
    let kinds = ["improved_de", "canonical_de", "ga"];
    let covered = kinds.iter().all(|k| runs.traces.keys().any(|l| l.starts_with(k)));
    verdict(bad.is_empty() && covered, format!("{total} traces over {kinds:?}, {} non-monotone", bad.len()))
}

// 6. Constellation geometry is exact.
fn constellation_exact() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [4u32, 16, 64] {
        let c = Constellation::new(m).unwrap();
        let side = (m as f64).sqrt() as usize;
        let es = (c.average_energy() - 1.0).abs();
        let delta = (c.delta() - (3.0 / (2.0 * (m as f64 - 1.0))).sqrt()).abs();
        let counts = c.subset_counts() == (4, 4 * (side - 2), (side - 2) * (side - 2));
        pass &= es <= 1e-12 && delta <= 1e-12 && counts && c.points().len() == m as usize;
        parts.push(format!("m={m}: |Es-1|={es:.1e} |d-d*|={delta:.1e} counts {:?}", c.subset_counts()));
    }
    verdict(pass, parts.join("; "))
}

// 7. Zero forcing nulls inter-user interference.
fn zero_forcing_null() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let (k, m) = [(2, 4), (2, 16), (4, 8), (3, 6)][seed as usize % 4];
        let dims = SystemDims::new(m, 8, k).unwrap();
        let ch = gen_rayleigh(dims, &LargeScale::unit(k), seed).unwrap();
        let theta: Vec<f64> = random_vector(&mut stream(seed, &[99]), 8).into_iter().map(|v| v * PI).collect();
        let agg = aggregate(&ch, &PhaseVector::new(theta).unwrap()).unwrap();
        let bf = precode(&agg, Precoder::Zf, &LinkBudget::from_snr_db(10.0)).unwrap();
        for (i, z) in agg.z.iter().enumerate() {
            for (_, w) in bf.vectors.iter().enumerate().filter(|(j, _)| *j != i) {
                let leak = inner_h(z, w).norm() / (norm_sqr(z).sqrt() * norm_sqr(w).sqrt());
                worst = worst.max(leak);
            }
        }
    }
    verdict(worst <= 1e-9, format!("100 channels, worst normalized leakage {worst:.2e} (limit 1e-9)"))
}

// 8. Series approximations hold in their regimes.
fn series_regimes() -> Verdict {
    let rel = |approx: f64, exact: f64| (approx - exact).abs() / exact;
    let low = (1..=500)
        .map(|i| i as f64 * 1e-3)
        .map(|s| rel(ser_series_low(s, 16).unwrap(), ser_analytic(s, 16).unwrap()))
        .fold(0.0, f64::max);
    let high_points: Vec<f64> = (0..=300).map(|i| 20.0 * 10f64.powf(i as f64 / 100.0)).collect();
    let (high, at) = high_points
        .iter()
        .map(|&s| (rel(ser_series_high(s, 16, 1).unwrap(), ser_analytic(s, 16).unwrap()), s))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let first_ok = high_points
        .iter()
        .find(|&&s| rel(ser_series_high(s, 16, 1).unwrap(), ser_analytic(s, 16).unwrap()) <= 0.10)
        .copied()
        .unwrap_or(f64::NAN);
    verdict(
        low <= 0.02 && high <= 0.10,
        format!(
            "low form worst {:.3}% on (0, 0.5] (limit 2%); first-order high form worst {:.2}% at SINR {at:.1} on [20, 2e4] (limit 10%; within 10% only from SINR {first_ok:.1})",
            100.0 * low,
            100.0 * high
        ),
    )
}

// 9. The optimizer matches a brute-force grid on a two-element instance.
fn tiny_instance_oracle() -> Verdict {
    let dims = SystemDims::new(1, 2, 1).unwrap();
    let grid = 50;
    let mut hits = 0;
    let mut gaps = Vec::new();
    for seed in 0..SEEDS as u64 {
        let ch = gen_rayleigh(dims, &LargeScale::unit(1), seed).unwrap();
        let budget = LinkBudget::from_snr_db(0.0);
        let joint = Problem::new(&ch, budget, 16, Mode::Joint, FitnessMode::AvgSer).unwrap();
        let mrt = joint.passive_view(Precoder::Mrt);
        let axis = |i: usize| -1.0 + 2.0 * i as f64 / grid as f64;
        let oracle = (0..grid * grid)
            .map(|i| mrt.evaluate(&[axis(i / grid), axis(i % grid)]))
            .fold(f64::INFINITY, f64::min);
        let de = DeConfig { seed, ..DeConfig::default() };
        let found = baselines::run(Optimizer::ImprovedDe, &joint, &de, Execution::Sequential).unwrap().solution.fitness;
        gaps.push(found - oracle);
        hits += usize::from(found <= oracle + 1e-3);
    }
    let worst = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(hits >= 9, format!("{hits}/{SEEDS} seeds within 1e-3 of the 50x50 grid optimum (need 9); worst gap {worst:.2e}"))
}

fn monotone(v: &[f64], increasing: bool) -> bool {
    v.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn means_by(rows: &[Row], key: impl Fn(&Row) -> f64, keys: &[f64]) -> Vec<f64> {
    keys.iter()
        .map(|&k| mean(rows.iter().filter(|r| r.metric == "ser_analytic" && key(r) == k).map(|r| r.value)))
        .collect()
}

// 10. Qualitative trends: more elements, a specular path and better CSI help.
fn trends() -> Verdict {
    let mut fig7 = recipes::find("fig7").unwrap().config();
    fig7.realizations = SEEDS;
    let (_a, rows) = experiment("fig7", &fig7);
    let ns: Vec<f64> = fig7.elements.iter().map(|&n| n as f64).collect();
    let by_n = means_by(&rows, |r| r.n_elements as f64, &ns);

    let mut fig9 = recipes::find("fig9").unwrap().config();
    fig9.realizations = SEEDS;
    fig9.channel.model = ChannelModel::Rician;
    fig9.channel.specular = vec![0, 1];
    let (_b, rows) = experiment("fig9", &fig9);
    let by_s = means_by(&rows, |r| r.specular as f64, &[0.0, 1.0]);

    let mut csi = recipes::find("csi").unwrap().config();
    csi.realizations = SEEDS;
    csi.optimizers.retain(|o| o.optimizer == Optimizer::ImprovedDe);
    let (_c, rows) = experiment("csi", &csi);
    let by_e = means_by(&rows, |r| r.sigma_e2, &csi.sigma_e2);

    let (n_ok, s_ok, e_ok) = (monotone(&by_n, false), by_s[1] < by_s[0], monotone(&by_e, true));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" > ");
    verdict(
        n_ok && s_ok && e_ok,
        format!(
            "N {:?}: [{}] {}; S=0 {:.3e} vs S=1 {:.3e} {}; sigma_e2 {:?}: [{}] {}",
            fig7.elements,
            fmt(&by_n),
            if n_ok { "ok" } else { "NOT decreasing" },
            by_s[0],
            by_s[1],
            if s_ok { "ok" } else { "NOT improved" },
            csi.sigma_e2,
            by_e.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" < "),
            if e_ok { "ok" } else { "NOT increasing" },
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters: this target has exactly one entry.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut record = |n: usize, name: &'static str, v: Verdict| {
        println!("criterion {n:>2} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };
    record(1, "analytic/MC agreement", analytic_vs_monte_carlo());
    let runs = optimizer_runs();
    record(2, "improved DE vs random phases + RZF", beats_random_baseline(&runs));
    record(3, "improved DE vs canonical DE", improved_vs_canonical(&runs));
    record(4, "joint vs passive-only RZF", joint_vs_passive(&runs));
    record(5, "elitist monotonicity", elitist_traces(&runs));
    record(6, "constellation exactness", constellation_exact());
    record(7, "zero-forcing null", zero_forcing_null());
    record(8, "series approximation regimes", series_regimes());
    record(9, "tiny-instance grid oracle", tiny_instance_oracle());
    record(10, "trend reproductions", trends());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria pass in {:.1}s{}",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
