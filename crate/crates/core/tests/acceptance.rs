//! Acceptance checks. Each test prints one PASS/FAIL line and then asserts.
//! Run with `--nocapture` to see the lines.

mod common;

use std::time::Instant;

use common::{feasible_antennas, kendall_tau, kronecker_user, random_unitary, report};
use hetsched::channel::{generate_realization, Antennas, Scenario, UserChannel, UserProfile};
use hetsched::criteria::{
    delta_capacity, exact_delta_capacity, metric_selection_simplified,
    metric_selection_simplified_angle_form, Criterion, CriterionKind, SubsetView,
};
use hetsched::harness::output::write_csv;
use hetsched::harness::presets::apply_overrides;
use hetsched::harness::{
    bootstrap_paired_quantile_diff_se, figure_preset, outage_quantile, run_experiment,
    run_experiment_samples, sorted_mean, ExperimentSamples, ExperimentSpec,
};
use hetsched::precoding::{bd_capacities_fixed_snr, bd_precoders, capacity_bounds, PowerPolicy};
use hetsched::schedulers::{schedule_algorithm1, schedule_algorithm2, SchedulerKind};
use hetsched::subspace::{
    geometrical_angle_cos2, geometrical_angle_cos2_determinant, principal_angles, CMatrix,
    OrthonormalBasis,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OUTAGE: f64 = 0.10;
const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 99;

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Outage difference `a - b` and its paired bootstrap standard error.
fn outage_gap(
    s: &ExperimentSamples,
    a: (SchedulerKind, Option<CriterionKind>),
    b: (SchedulerKind, Option<CriterionKind>),
    snr_db: f64,
) -> (f64, f64) {
    let k = s.snr_index(snr_db).expect("snr point present");
    let x = &s.capacity[s.run_index(a.0, a.1).expect("run a")][k];
    let y = &s.capacity[s.run_index(b.0, b.1).expect("run b")][k];
    let gap = outage_quantile(x, OUTAGE).unwrap() - outage_quantile(y, OUTAGE).unwrap();
    let se = bootstrap_paired_quantile_diff_se(x, y, OUTAGE, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED).unwrap();
    (gap, se)
}

#[test]
fn criterion_01_capacity_sandwich() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for instance in 0..1000 {
        let m_t = [4, 6, 8][instance % 3];
        let antennas = feasible_antennas(m_t, 4, &mut rng);
        let users: Vec<UserChannel> = antennas
            .iter()
            .enumerate()
            .map(|(i, &n)| kronecker_user(i, n, m_t, &mut rng))
            .collect();
        let group: Vec<&UserChannel> = users.iter().collect();
        let snr = 10f64.powf(rng.random_range(-1.0..4.0));
        let exact = bd_capacities_fixed_snr(&group, m_t, snr).unwrap();
        for (i, c) in exact.iter().enumerate() {
            let b = capacity_bounds(i, &group, m_t, snr).unwrap();
            worst = worst.min(c - b.lower).min(b.upper - c);
            checked += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst >= -1e-9 && elapsed < 60.0;
    report(
        1,
        "capacity bounds sandwich",
        pass,
        &format!("{checked} users, min slack {worst:.3e} bits (>= -1e-9), {elapsed:.1}s (< 60s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_geometrical_angle_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m_t = rng.random_range(4..=8);
        let a = rng.random_range(1..=4.min(m_t));
        let b = rng.random_range(1..=4.min(m_t));
        let ha = kronecker_user(0, a, m_t, &mut rng);
        let hb = kronecker_user(1, b, m_t, &mut rng);
        let product = geometrical_angle_cos2(&ha.h, &hb.h).unwrap();
        let det = geometrical_angle_cos2_determinant(&ha.h, &hb.h).unwrap();
        worst = worst.max(rel_diff(product, det));
    }
    let pass = worst <= 1e-8;
    report(2, "geometrical angle product vs determinant", pass, &format!("max relative gap {worst:.3e} (<= 1e-8)"));
    assert!(pass);
}

#[test]
fn criterion_03_selection_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m_t = rng.random_range(4..=8);
        let mut antennas = feasible_antennas(m_t, 4, &mut rng);
        let candidate_antennas = antennas.pop().unwrap();
        let subset: Vec<UserChannel> = antennas
            .iter()
            .enumerate()
            .map(|(i, &n)| kronecker_user(i, n, m_t, &mut rng))
            .collect();
        let k = kronecker_user(99, candidate_antennas, m_t, &mut rng);
        let view = SubsetView::new(subset.iter().collect(), m_t).unwrap();
        let det_form = metric_selection_simplified(&k, &view).unwrap();
        let angle_form = metric_selection_simplified_angle_form(&k, &view).unwrap();
        worst = worst.max(rel_diff(det_form, angle_form));
    }
    let pass = worst <= 1e-8;
    report(3, "selection criterion sin² vs projected determinant", pass, &format!("max relative gap {worst:.3e} (<= 1e-8)"));
    assert!(pass);
}

#[test]
fn criterion_04_bd_zero_interference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for instance in 0..1000 {
        let m_t = rng.random_range(2..=8);
        let antennas = feasible_antennas(m_t, 5, &mut rng);
        let users: Vec<UserChannel> = antennas
            .iter()
            .enumerate()
            .map(|(i, &n)| kronecker_user(i, n, m_t, &mut rng))
            .collect();
        let group: Vec<&UserChannel> = users.iter().collect();
        let policy = if instance % 2 == 0 { PowerPolicy::Equal } else { PowerPolicy::Waterfilling };
        let set = bd_precoders(&group, m_t, policy, 100.0, 1.0).unwrap();
        for (i, pi) in set.users.iter().enumerate() {
            let f = pi.precoder();
            if f.ncols() == 0 {
                continue;
            }
            for (j, uj) in users.iter().enumerate() {
                if i == j {
                    continue;
                }
                let leak = (&uj.h * &f).norm() / (uj.h.norm() * f.norm());
                worst = worst.max(leak);
            }
        }
    }
    let pass = worst <= 1e-10;
    report(4, "BD cross interference", pass, &format!("max relative residual {worst:.3e} (<= 1e-10)"));
    assert!(pass);
}

#[test]
fn criterion_05_principal_angle_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    for _ in 0..200 {
        let p = rng.random_range(1..=5);
        let q = rng.random_range(p..=6);
        let n = rng.random_range(0..=p);
        let m = rng.random_range(0..=n);
        // shared | intermediate pairs | U only | V only
        let dim = m + 2 * (n - m) + (p - n) + (q - n);
        let mut u = CMatrix::zeros(dim, p);
        let mut v = CMatrix::zeros(dim, q);
        let one = Complex64::new(1.0, 0.0);
        for i in 0..m {
            u[(i, i)] = one;
            v[(i, i)] = one;
        }
        for i in 0..n - m {
            let theta: f64 = rng.random_range(0.2..1.3);
            let (a, b) = (m + 2 * i, m + 2 * i + 1);
            u[(a, m + i)] = one;
            v[(a, m + i)] = Complex64::new(theta.cos(), 0.0);
            v[(b, m + i)] = Complex64::new(theta.sin(), 0.0);
        }
        let base = m + 2 * (n - m);
        for i in 0..p - n {
            u[(base + i, n + i)] = one;
        }
        for i in 0..q - n {
            v[(base + (p - n) + i, n + i)] = one;
        }
        let rot = random_unitary(dim, &mut rng);
        let ub = OrthonormalBasis::from_columns(&rot * u).unwrap();
        let vb = OrthonormalBasis::from_columns(&rot * v).unwrap();
        let angles = principal_angles(&ub, &vb).unwrap();
        let zeros = angles.angles().iter().filter(|&&t| t < 1e-8).count();
        let right = angles
            .angles()
            .iter()
            .filter(|&&t| (t - std::f64::consts::FRAC_PI_2).abs() < 1e-8)
            .count();
        if zeros != m || right != p - n || angles.len() != p {
            failures += 1;
        }
    }
    let pass = failures == 0;
    report(5, "principal angle structure", pass, &format!("{failures} of 200 constructions off"));
    assert!(pass);
}

#[test]
fn criterion_06_greedy_vs_exhaustive() {
    const MIN_RATIO: f64 = 0.95;
    let users = (0..8)
        .map(|id| UserProfile::randomized(id, Antennas::UniformUpTo(2)))
        .collect();
    let mut scenario = Scenario::new(4, users);
    scenario.trials = 500;
    scenario.snr_db = vec![30.0];
    scenario.seed = 6;
    let mut spec = ExperimentSpec::new("greedy-vs-exhaustive", scenario);
    spec.schedulers = vec![SchedulerKind::GreedySelection, SchedulerKind::ExhaustiveSelection];
    spec.criteria = vec![
        CriterionKind::SelectionFull,
        CriterionKind::SelectionSimplified,
        CriterionKind::LargestPrincipalAngle,
        CriterionKind::ProjectedNorm,
    ];
    let s = run_experiment_samples(&spec).unwrap();
    let ex = &s.capacity[s.run_index(SchedulerKind::ExhaustiveSelection, None).unwrap()][0];
    let mut violations = 0;
    for &c in &spec.criteria {
        let g = &s.capacity[s.run_index(SchedulerKind::GreedySelection, Some(c)).unwrap()][0];
        violations += g.iter().zip(ex).filter(|(g, e)| **g > **e + 1e-9).count();
    }
    let full = &s.capacity[s.run_index(SchedulerKind::GreedySelection, Some(CriterionKind::SelectionFull)).unwrap()][0];
    let ratio = sorted_mean(full) / sorted_mean(ex);
    let pass = violations == 0 && ratio >= MIN_RATIO;
    report(
        6,
        "greedy vs exhaustive selection",
        pass,
        &format!("{violations} dominance violations; selection-full mean ratio {ratio:.4} (>= {MIN_RATIO})"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_delta_capacity_ranking() {
    const MIN_MEDIAN_TAU: f64 = 0.8;
    let m_t = 12;
    let snr = 1e4;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut taus = Vec::new();
    while taus.len() < 200 {
        let subset: Vec<UserChannel> = (0..2)
            .map(|i| kronecker_user(i, rng.random_range(1..=2), m_t, &mut rng))
            .collect();
        let candidates: Vec<UserChannel> = (0..10)
            .map(|i| kronecker_user(100 + i, rng.random_range(1..=2), m_t, &mut rng))
            .collect();
        let refs: Vec<&UserChannel> = subset.iter().collect();
        let view = SubsetView::new(refs.clone(), m_t).unwrap();
        let exact: Vec<f64> = candidates
            .iter()
            .map(|k| exact_delta_capacity(k, &refs, m_t, snr).unwrap())
            .collect();
        let approx: Vec<f64> = candidates
            .iter()
            .map(|k| delta_capacity(k, &view, snr).unwrap().delta)
            .collect();
        taus.push(kendall_tau(&approx, &exact));
    }
    taus.sort_by(f64::total_cmp);
    let median = 0.5 * (taus[99] + taus[100]);
    let pass = median >= MIN_MEDIAN_TAU;
    report(7, "delta-capacity ranking fidelity", pass, &format!("median Kendall tau {median:.3} (>= {MIN_MEDIAN_TAU})"));
    assert!(pass);
}

fn preset_samples(name: &str, snr_db: &[f64]) -> Vec<(ExperimentSpec, ExperimentSamples)> {
    let mut specs = figure_preset(name).unwrap();
    apply_overrides(&mut specs, None, Some(8));
    specs
        .into_iter()
        .map(|mut spec| {
            spec.scenario.snr_db = snr_db.to_vec();
            let s = run_experiment_samples(&spec).unwrap();
            (spec, s)
        })
        .collect()
}

#[test]
fn criterion_08_grouping_oriented_beats_largest_angle() {
    let runs = preset_samples("fig3", &[30.0, 40.0]);
    let (_, s) = &runs[0];
    let go = (SchedulerKind::ConventionalGrouping, Some(CriterionKind::GroupingOriented));
    let lpa = (SchedulerKind::ConventionalGrouping, Some(CriterionKind::LargestPrincipalAngle));
    let mut pass = true;
    let mut detail = Vec::new();
    for snr in [30.0, 40.0] {
        let (gap, se) = outage_gap(s, go, lpa, snr);
        pass &= gap > 2.0 * se;
        detail.push(format!("{snr} dB gap {gap:.3} vs 2se {:.3}", 2.0 * se));
    }
    report(8, "grouping-oriented over largest principal angle", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_09_heterogeneity_gap() {
    // magnitude reference and tolerance factor for the most heterogeneous pool
    const REFERENCE_GAP: f64 = 10.0;
    const FACTOR: f64 = 2.0;
    let runs = preset_samples("fig4", &[40.0]);
    let go = (SchedulerKind::ConventionalGrouping, Some(CriterionKind::GroupingOriented));
    let lpa = (SchedulerKind::ConventionalGrouping, Some(CriterionKind::LargestPrincipalAngle));
    let find = |label: &str| runs.iter().find(|(spec, _)| spec.label == label).map(|(_, s)| s).unwrap();
    let (homo_gap, homo_se) = outage_gap(find("fig4-2-2-2-2-2-2"), go, lpa, 40.0);
    let (het_gap, het_se) = outage_gap(find("fig4-1-2-3-4-5-6"), go, lpa, 40.0);
    let homo_ok = homo_gap.abs() <= 2.0 * homo_se;
    let het_ok = het_gap > 2.0 * het_se && het_gap >= REFERENCE_GAP / FACTOR && het_gap <= REFERENCE_GAP * FACTOR;
    let pass = homo_ok && het_ok;
    report(
        9,
        "homogeneous tie, heterogeneous gap",
        pass,
        &format!(
            "homogeneous gap {homo_gap:.3} (|gap| <= 2se {:.3}); heterogeneous gap {het_gap:.3} (se {het_se:.3}, want [{}, {}])",
            2.0 * homo_se,
            REFERENCE_GAP / FACTOR,
            REFERENCE_GAP * FACTOR
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_algorithm1_vs_conventional() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, criterion, conventional) in [
        (
            "fig7",
            CriterionKind::SelectionSimplified,
            (SchedulerKind::ExhaustiveGrouping, None),
        ),
        (
            "fig8",
            CriterionKind::LargestPrincipalAngle,
            (SchedulerKind::ConventionalGrouping, Some(CriterionKind::LargestPrincipalAngle)),
        ),
    ] {
        let runs = preset_samples(name, &[30.0, 40.0]);
        let (_, s) = &runs[0];
        for snr in [30.0, 40.0] {
            let (gap, se) = outage_gap(s, (SchedulerKind::Algorithm1GroupMin, Some(criterion)), conventional, snr);
            // not significantly below the comparator
            pass &= gap >= -2.0 * se;
            detail.push(format!("{name} {snr} dB gap {gap:.3} (>= -2se {:.3})", -2.0 * se));
        }
    }
    report(10, "algorithm 1 at high SNR", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_11_comparison_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    let mut instances = 0;
    for trial in 0..300u64 {
        let k = rng.random_range(2..=40);
        let m_t = rng.random_range(4..=12);
        let max_r = rng.random_range(1..=4.min(m_t));
        let users = (0..k)
            .map(|id| UserProfile::randomized(id, Antennas::UniformUpTo(max_r)))
            .collect();
        let mut scenario = Scenario::new(m_t, users);
        scenario.seed = rng.random();
        let real = generate_realization(&scenario, trial).unwrap();
        let two_l = k as u64;
        for kind in [CriterionKind::SelectionSimplified, CriterionKind::LargestPrincipalAngle] {
            let a1 = schedule_algorithm1(&real, &mut Criterion::new(kind, ChaCha8Rng::seed_from_u64(0))).unwrap();
            let n_g = a1.groups.len() as u64;
            if a1.comparisons > 2 * n_g * (two_l - n_g.min(two_l)) {
                violations += 1;
            }
            let a2 = schedule_algorithm2(&real, &mut Criterion::new(kind, ChaCha8Rng::seed_from_u64(0))).unwrap();
            if a2.comparisons > two_l * (two_l - 1) {
                violations += 1;
            }
            instances += 1;
        }
    }
    let pass = violations == 0;
    report(11, "comparison counts within bounds", pass, &format!("{violations} violations over {instances} runs"));
    assert!(pass);
}

fn preset_csv(name: &str, trials: usize, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut specs = figure_preset(name).unwrap();
        apply_overrides(&mut specs, Some(trials), Some(12));
        let summaries: Vec<_> = specs.iter().map(|s| run_experiment(s).unwrap()).collect();
        let mut out = Vec::new();
        write_csv(&summaries, &mut out).unwrap();
        out
    })
}

#[test]
fn criterion_12_determinism() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, trials) in [("fig3", 60), ("fig5", 20), ("fig8", 60)] {
        let a = preset_csv(name, trials, 1);
        let b = preset_csv(name, trials, 1);
        let c = preset_csv(name, trials, 4);
        let same = a == b && a == c;
        pass &= same;
        detail.push(format!("{name}: {}", if same { "identical" } else { "differs" }));
    }
    report(12, "byte-identical CSV across runs and thread counts", pass, &detail.join(", "));
    assert!(pass);
}
