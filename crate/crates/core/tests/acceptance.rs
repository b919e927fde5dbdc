//! Acceptance gate. Each test prints one `criterion N: PASS|FAIL` line.
//! Run with `cargo test -p afs-core --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::time::Instant;

use afs_core::acquisition::{expected_improvement, probability_of_improvement};
use afs_core::analytics::{normalize_per_function, rank_per_run, PerformanceTable, RowKey};
use afs_core::bbob::Problem;
use afs_core::doe::{design_key, sample_design, Design};
use afs_core::ela::{disp, feature_vector, ic, nbc, ela_distribution, FeatureVector, NUM_FEATURES};
use afs_core::engine::{run, BudgetConfig, EngineConfig};
use afs_core::gp::{GpConfig, GpModel};
use afs_core::harness::{pipeline, run_experiments, ExperimentConfig, PipelineConfig, Seeds};
use afs_core::rng::StreamKey;
use afs_core::schedule::{Schedule, PORTFOLIO};
use afs_core::selector::{self, Dataset, DatasetRow, ForestConfig, Split};
use afs_core::AfKind;
use rand::Rng;
use rand_distr::StandardNormal;

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_1_af_closed_forms_match_monte_carlo() {
    let t = Instant::now();
    let mut rng = StreamKey::new(1).rng();
    let samples = 100_000;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mu: f64 = rng.random_range(-2.0..2.0);
        let sigma: f64 = rng.random_range(0.2..2.0);
        let f_min = mu + sigma * rng.random_range(-2.5..2.5);
        let (mut s, mut s2, mut hits) = (0.0, 0.0, 0usize);
        for _ in 0..samples {
            let z: f64 = rng.sample(StandardNormal);
            let imp = (f_min - (mu + sigma * z)).max(0.0);
            s += imp;
            s2 += imp * imp;
            hits += usize::from(imp > 0.0);
        }
        let n = samples as f64;
        let ei_mc = s / n;
        let ei_se = ((s2 / n - ei_mc * ei_mc) / n).sqrt();
        let pi_mc = hits as f64 / n;
        let pi_se = (pi_mc * (1.0 - pi_mc) / n).sqrt();
        let ei = expected_improvement(mu, sigma, f_min, 0.0).unwrap();
        let pi = probability_of_improvement(mu, sigma, f_min, 0.0).unwrap();
        worst = worst.max((ei - ei_mc).abs() / ei_se).max((pi - pi_mc).abs() / pi_se);
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 3.0 && secs < 10.0;
    report(1, pass, format!("max deviation {worst:.2} SE over 100 comparisons, {secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_2_gp_interpolates() {
    let t = Instant::now();
    let mut rng = StreamKey::new(2).rng();
    let points: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
        .collect();
    let values: Vec<f64> = points.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
    let range = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().copied().fold(f64::INFINITY, f64::min);
    let model = GpModel::fit(&points, &values, &GpConfig::default(), StreamKey::new(3)).unwrap();
    let worst_fit = points
        .iter()
        .zip(&values)
        .map(|(x, y)| (model.predict(x).unwrap().0 - y).abs())
        .fold(0.0, f64::max);
    let mut min_var = f64::INFINITY;
    for _ in 0..1000 {
        let x = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let (_, sd) = model.predict(&x).unwrap();
        min_var = min_var.min(sd * sd).min(model.latent_variance(&x));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst_fit <= 1e-6 * range && min_var >= 0.0 && secs < 5.0;
    report(
        2,
        pass,
        format!("max |mu - y| = {:.2e} (limit {:.2e}), min variance {min_var:.2e}, {secs:.2}s", worst_fit, 1e-6 * range),
    );
    assert!(pass);
}

fn quantile7(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile7(&s, 0.5)
}

fn cor(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// Ordered pairwise distances (both (i, j) and (j, i)), which leaves the
/// mean and median unchanged.
fn all_pairs(d: &Design, members: &[usize]) -> Vec<f64> {
    let mut out = Vec::new();
    for &i in members {
        for &j in members {
            if i != j {
                out.push(dist(&d.points[i], &d.points[j]));
            }
        }
    }
    out
}

fn disp_oracle(d: &Design) -> Vec<f64> {
    let n = d.values.len();
    let mut sorted = d.values.clone();
    sorted.sort_by(f64::total_cmp);
    let everyone: Vec<usize> = (0..n).collect();
    let full = all_pairs(d, &everyone);
    let mut out = vec![0.0; 16];
    for (k, q) in [0.02, 0.05, 0.10, 0.25].into_iter().enumerate() {
        let thr = quantile7(&sorted, q);
        let mut members: Vec<usize> = everyone.iter().copied().filter(|&i| d.values[i] <= thr).collect();
        if members.len() < 2 {
            let mut by_value = everyone.clone();
            by_value.sort_by(|&a, &b| d.values[a].total_cmp(&d.values[b]).then(a.cmp(&b)));
            members = by_value[..2].to_vec();
        }
        let sub = all_pairs(d, &members);
        out[k] = mean(&sub) / mean(&full);
        out[4 + k] = median(&sub) / median(&full);
        out[8 + k] = mean(&sub) - mean(&full);
        out[12 + k] = median(&sub) - median(&full);
    }
    out
}

fn nbc_oracle(d: &Design) -> Vec<f64> {
    let n = d.values.len();
    let mut nn = Vec::new();
    let mut nb = Vec::new();
    let mut indegree = vec![0.0; n];
    for i in 0..n {
        let nearest = (0..n)
            .filter(|&j| j != i)
            .map(|j| dist(&d.points[i], &d.points[j]))
            .fold(f64::INFINITY, f64::min);
        let better = (0..n)
            .filter(|&j| d.values[j] < d.values[i])
            .map(|j| (dist(&d.points[i], &d.points[j]), j))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((db, j)) = better {
            nn.push(nearest);
            nb.push(db);
            indegree[j] += 1.0;
        }
    }
    let ratio: Vec<f64> = nn.iter().zip(&nb).map(|(a, b)| a / b).collect();
    vec![
        sd(&nn) / sd(&nb),
        mean(&nn) / mean(&nb),
        cor(&nn, &nb),
        sd(&ratio) / mean(&ratio),
        cor(&indegree, &d.values),
    ]
}

fn crafted_designs() -> Vec<Design> {
    let mut rng = StreamKey::new(30).rng();
    let mut cloud = |dim: usize| -> Vec<Vec<f64>> {
        (0..20)
            .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect()
    };
    let sphere = cloud(2);
    let sphere_y = sphere.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
    let rastrigin = cloud(3);
    let rastrigin_y = rastrigin
        .iter()
        .map(|x: &Vec<f64>| {
            x.iter()
                .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
                .sum()
        })
        .collect();
    // Plateaus: tied values across distinct points.
    let plateau = cloud(2);
    let plateau_y = plateau.iter().map(|x| (x[0] + x[1]).abs().floor()).collect();
    vec![
        Design::new(sphere, sphere_y).unwrap(),
        Design::new(rastrigin, rastrigin_y).unwrap(),
        Design::new(plateau, plateau_y).unwrap(),
    ]
}

#[test]
fn criterion_3_ela_oracles() {
    let t = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;

    let p = Problem::instantiate(5, 0, 5).unwrap();
    let d = sample_design(&p, 50, design_key(5, 0, 0), 0).unwrap();
    let fv: FeatureVector = feature_vector(&d);
    pass &= fv.len() == NUM_FEATURES && NUM_FEATURES == 38;
    notes.push(format!("{} features", fv.len()));

    let mut worst: f64 = 0.0;
    for design in crafted_designs() {
        let got_d = disp(&design).unwrap().values;
        let got_n = nbc(&design).unwrap().values;
        for (a, b) in got_d.iter().zip(disp_oracle(&design)).chain(got_n.iter().zip(nbc_oracle(&design))) {
            worst = worst.max((a - b).abs());
            pass &= (a - b).abs() <= 1e-10;
        }
    }
    notes.push(format!("disp/nbc max |diff| {worst:.1e}"));

    let sym = Design::new(
        (0..5).map(|i| vec![f64::from(i)]).collect(),
        vec![-2.0, -1.0, 0.0, 1.0, 2.0],
    )
    .unwrap();
    let skew = ela_distribution(&sym).unwrap().values[0];
    pass &= skew.abs() <= 1e-12;
    notes.push(format!("skewness {skew:.1e}"));

    let alternating = Design::new(
        (0..10).map(|i| vec![f64::from(i)]).collect(),
        (0..10).map(|i| f64::from(i % 2)).collect(),
    )
    .unwrap();
    let h0 = ic(&alternating).unwrap().entropy(0.0);
    pass &= (h0 - 0.3868).abs() <= 1e-4;
    notes.push(format!("H(0) {h0:.5}"));

    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 10.0;
    report(3, pass, format!("{}, {secs:.2}s", notes.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_4_bo_beats_random_search() {
    let t = Instant::now();
    let problem = Problem::instantiate(1, 0, 2).unwrap();
    let budget = BudgetConfig {
        doe_size: 20,
        surrogate_evals: 40,
    };
    let mut bo = Vec::new();
    let mut rs = Vec::new();
    for seed in 0..10u64 {
        let rec = run(&problem, Schedule::Ee50, budget, seed, &EngineConfig::default()).unwrap();
        bo.push(*rec.incumbent_regret.last().unwrap());
        let mut rng = StreamKey::new(seed).derive(0xba5e).rng();
        let best = (0..60)
            .map(|_| {
                let x = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
                problem.evaluate(&x).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        rs.push(problem.regret(best));
    }
    let (bo_med, rs_med) = (median(&bo), median(&rs));
    let secs = t.elapsed().as_secs_f64();
    let pass = bo_med * 100.0 <= rs_med && secs < 300.0;
    report(
        4,
        pass,
        format!("median regret BO {bo_med:.2e} vs random search {rs_med:.2e} ({:.0}x), {secs:.1}s", rs_med / bo_med),
    );
    assert!(pass);
}

#[test]
fn criterion_5_schedule_fidelity() {
    let key = StreamKey::new(5);
    let count_ei = |s: Schedule| s.sequence(100, key).iter().filter(|a| **a == AfKind::Ei).count();
    let counts = [count_ei(Schedule::Ee25), count_ei(Schedule::Ee50), count_ei(Schedule::Ee75)];
    let mut pass = counts == [25, 50, 75];
    let rr = Schedule::RoundRobin.sequence(100, key);
    pass &= rr.windows(2).all(|w| w[0] != w[1]) && rr[0] == AfKind::Ei;
    let replay = Schedule::Random.sequence(100, key) == Schedule::Random.sequence(100, key);
    let differs = Schedule::Random.sequence(100, key) != Schedule::Random.sequence(100, StreamKey::new(6));
    pass &= replay && differs;
    pass &= Schedule::StaticEi.sequence(100, key).iter().all(|a| *a == AfKind::Ei)
        && Schedule::StaticPi.sequence(100, key).iter().all(|a| *a == AfKind::Pi);
    report(
        5,
        pass,
        format!("EI counts {counts:?}, round-robin alternates, random replay {replay}"),
    );
    assert!(pass);
}

fn synthetic_dataset(rows: usize, seed: u64) -> Dataset {
    let mut rng = StreamKey::new(seed).rng();
    let rows: Vec<DatasetRow> = (0..rows)
        .map(|i| {
            let values: Vec<f64> = (0..NUM_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut targets = vec![0.5; PORTFOLIO.len()];
            targets[0] = if values[0] > 0.0 { 0.0 } else { 1.0 };
            DatasetRow {
                key: RowKey {
                    function_id: 1,
                    instance_id: 0,
                    dim: 2,
                    seed: i as u64,
                },
                features: FeatureVector::from_values(values).unwrap(),
                raw: targets.clone(),
                targets,
                split: if i % 10 < 7 { Split::Train } else { Split::Test },
            }
        })
        .collect();
    Dataset {
        schema_version: selector::DATASET_SCHEMA_VERSION,
        feature_names: afs_core::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        target_order: PORTFOLIO.to_vec(),
        split_seed: seed,
        rows,
        table: PerformanceTable::default(),
        dropped: Vec::new(),
    }
}

#[test]
fn criterion_6_selector_on_synthetic_data() {
    let t = Instant::now();
    let ds = synthetic_dataset(300, 6);
    let forest = selector::train_forest(&ds, ForestConfig::default(), 6).unwrap();
    let (mut hits, mut total) = (0, 0);
    for row in ds.test_rows() {
        let (choice, _) = selector::select(&forest, &row.features).unwrap();
        hits += usize::from(choice == selector::vbs(&row.targets).unwrap());
        total += 1;
    }
    let rate = hits as f64 / total as f64;
    let secs = t.elapsed().as_secs_f64();
    let pass = rate >= 0.9 && secs < 60.0;
    report(6, pass, format!("true best picked on {hits}/{total} held-out rows ({:.1}%), {secs:.2}s", 100.0 * rate));
    assert!(pass);
}

#[test]
fn criterion_7_dominance_invariants() {
    let mut rng = StreamKey::new(7).rng();
    let rows: Vec<(RowKey, Vec<f64>)> = (0..500u64)
        .map(|seed| {
            let key = RowKey {
                function_id: (seed % 4) as u8 + 1,
                instance_id: 0,
                dim: 2,
                seed,
            };
            // Coarse values so that ties are common.
            let v = (0..7).map(|_| f64::from(rng.random_range(-6..3)) * 0.5).collect();
            (key, v)
        })
        .collect();
    let mut table = normalize_per_function(&rows).unwrap();
    let choices: BTreeMap<RowKey, Schedule> = table
        .rows
        .iter()
        .map(|r| (r.key, PORTFOLIO[rng.random_range(0..7)]))
        .collect();
    table.set_afs(|k| choices.get(k).copied());

    let mut violations = 0;
    for r in &table.rows {
        let min = r.normalized.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let afs = r.afs_value().unwrap();
        let ranks = rank_per_run(r.key, &r.normalized, r.afs).unwrap();
        let rank_min = ranks.ranks.iter().copied().fold(f64::INFINITY, f64::min);
        let ok = r.vbs_value() == min
            && afs >= r.vbs_value()
            && afs <= max
            && ranks.ranks.iter().sum::<f64>() == 28.0
            && ranks.afs == Some(ranks.ranks[r.afs.unwrap().index()])
            && ranks.vbs == rank_min;
        violations += usize::from(!ok);
    }
    let pass = violations == 0;
    report(7, pass, format!("{violations} violations over {} rows", table.rows.len()));
    assert!(pass);
}

#[test]
fn criterion_8_scaled_reproduction() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(
        r#"
        functions = [1, 8, 16, 21]
        instances = [0, 1]
        dims = [2]
        parallelism = 0
        [budget]
        doe_size = 20
        surrogate_evals = 40
        "#,
    )
    .unwrap();
    cfg.seeds = Seeds::Count(10);
    cfg.output_dir = dir.path().join("runs");
    let summary = run_experiments(&cfg).unwrap();
    assert_eq!(summary.failed, 0);

    let out = dir.path().join("report");
    let rep = pipeline(&cfg.output_dir, &out, &PipelineConfig::default()).unwrap();
    let (best, best_rank) = rep.best_schedule_rank();
    let afs_rank = rep.mean_ranks.afs.unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = afs_rank <= best_rank + 0.25 && secs < 7200.0;
    let ranks: Vec<String> = PORTFOLIO
        .iter()
        .zip(&rep.mean_ranks.schedules)
        .map(|(s, r)| format!("{}={r:.2}", s.id()))
        .collect();
    report(
        8,
        pass,
        format!(
            "AFS mean rank {afs_rank:.2} vs best schedule {} {best_rank:.2} (+0.25 allowed) on {} test rows, VBS {:.2}, {} runs in {secs:.0}s [{}]",
            best.id(),
            rep.test_rows,
            rep.mean_ranks.vbs,
            summary.completed,
            ranks.join(" ")
        ),
    );
    assert!(pass);
}
