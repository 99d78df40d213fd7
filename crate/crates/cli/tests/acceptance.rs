//! Acceptance suite. Each test prints one `ACCEPTANCE <n> PASS|FAIL` line
//! and then asserts the same condition.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use epiabc::analysis::{
    bayes_factor, hpd_interval, model_probs, posterior_mode, Evidence, ValueKind,
};
use epiabc::distributions::Prior;
use epiabc::dynamics::{ctmc_events, drift, EnvSchedule};
use epiabc::harness::{generate_dataset, run_study, Scenario, StudySetup};
use epiabc::linalg::{psd_sqrt, SymMatrix};
use epiabc::observe::{observe_binomial, observe_poisson};
use epiabc::rng::stream;
use epiabc::simulate::{
    simulate_ctmc, simulate_euler, simulate_ode, simulate_sde, simulate_sde_with, NoiseMode,
    TimeGrid, Trajectory,
};
use epiabc::smc::{run_abc_smc, Population};
use epiabc::{
    DynParams, Environment, ModelRegistry, PriorSpec, ProposalSpec, RunConfig, SmcProblem,
    StateVector, Transmission,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Beta, ContinuousCDF, Gamma, Uniform};

const MONTH: f64 = 1.0 / 12.0;

// Writes through the raw handle so the line survives libtest output capture.
fn report(n: u32, pass: bool, what: &str, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "ACCEPTANCE {n:>2} {verdict}: {what} [{detail}]").unwrap();
    out.flush().unwrap();
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn scenario_a_params() -> DynParams {
    Scenario::a().params
}

// 1. Matrix square root.
#[test]
fn criterion_01_psd_sqrt() {
    const TOL: f64 = 1e-8;
    const BUDGET: Duration = Duration::from_secs(5);
    let mut rng = stream(101, &[]);
    let mut mats = Vec::with_capacity(1000);
    for k in 0..1000 {
        let n = if k % 2 == 0 { 3 } else { 4 };
        let rank = 1 + k % n;
        let scale = 10f64.powi(rng.random_range(-3..4));
        let a: Vec<f64> = (0..n * rank)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect::<Vec<f64>>();
        let mut s = SymMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                s.set(
                    r,
                    c,
                    (0..rank).map(|j| a[r * rank + j] * a[c * rank + j]).sum(),
                );
            }
        }
        mats.push(s);
    }
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for s in &mats {
        match psd_sqrt(s) {
            Ok(b) => {
                let rel = b.matmul(&b).sub(s).frobenius_norm() / (1.0 + s.frobenius_norm());
                worst = worst.max(rel);
                if rel > TOL {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && elapsed < BUDGET;
    report(
        1,
        pass,
        "psd_sqrt reconstructs 1000 random PSD 3x3/4x4 matrices",
        format!("worst ||BB-S||/(1+||S||) = {worst:.2e}, failures {failures}, {elapsed:.2?}"),
    );
    assert!(pass);
}

// 2. RK4 integrator.
#[test]
fn criterion_02_ode_integrator() {
    const DECAY_TOL: f64 = 1e-6;
    const MIN_RATIO: f64 = 8.0;
    const REF_TOL: f64 = 1e-5;

    // Analytic: S' = -mS, I' = -(mu+m)I, C' = mu I.
    let (mu, m, s0, i0) = (0.3, 0.05, 40.0, 20.0);
    let p = DynParams {
        mu,
        ..Default::default()
    };
    let sched = EnvSchedule::constant(Environment::new(0.0, m));
    let x0 = StateVector::direct(s0, i0, 0.0);
    let grid = TimeGrid::annual(0.0, 11, MONTH).unwrap();
    let tr = simulate_ode(Transmission::Direct, &p, &x0, &grid, &sched).unwrap();
    let mut decay_err = 0.0f64;
    for (t, x) in tr.times.iter().zip(&tr.states) {
        let k = mu + m;
        let exact = [
            s0 * (-m * t).exp(),
            i0 * (-k * t).exp(),
            mu * i0 * (1.0 - (-k * t).exp()) / k,
        ];
        for (g, e) in x.as_slice().iter().zip(exact) {
            if e != 0.0 {
                decay_err = decay_err.max(((g - e) / e).abs());
            } else {
                decay_err = decay_err.max(g.abs());
            }
        }
    }

    // Step halving on a fast decay, where truncation error dominates.
    let fast = DynParams {
        mu: 1.5,
        ..Default::default()
    };
    let sched_fast = EnvSchedule::constant(Environment::new(0.0, 0.5));
    let err_at = |step: f64| {
        let g = TimeGrid::new(0.0, vec![0.0, 2.0], step).unwrap();
        let x = simulate_ode(Transmission::Direct, &fast, &x0, &g, &sched_fast).unwrap();
        let want = i0 * (-4.0f64).exp();
        (x.states[1].i() - want).abs()
    };
    let ratio = err_at(0.25) / err_at(0.125);

    // Scenario (a) against a run at one hundredth of the step.
    let sc = Scenario::a();
    let e = &sc.skeleton().epidemics[0];
    let x0a = sc.ics[0].state();
    let sched_a = e.schedule();
    let coarse = simulate_ode(
        Transmission::Indirect,
        &sc.params,
        &x0a,
        &e.grid(MONTH).unwrap(),
        &sched_a,
    )
    .unwrap();
    let fine = simulate_ode(
        Transmission::Indirect,
        &sc.params,
        &x0a,
        &e.grid(MONTH / 100.0).unwrap(),
        &sched_a,
    )
    .unwrap();
    let mut ref_err = 0.0f64;
    for (c, f) in coarse.states.iter().zip(&fine.states) {
        for (a, b) in c.as_slice().iter().zip(f.as_slice()) {
            let rel = if *b == 0.0 {
                a.abs()
            } else {
                ((a - b) / b).abs()
            };
            ref_err = ref_err.max(rel);
        }
    }

    let pass = decay_err <= DECAY_TOL && ratio >= MIN_RATIO && ref_err <= REF_TOL;
    report(
        2,
        pass,
        "RK4: analytic decay, step-halving order, scenario (a) vs step/100",
        format!("decay rel err {decay_err:.2e}, halving ratio {ratio:.2}, reference rel err {ref_err:.2e}"),
    );
    assert!(pass);
}

// 3. Gillespie simulator.
#[test]
fn criterion_03_ctmc() {
    const REPS: usize = 10_000;
    let p = DynParams {
        mu: 0.3,
        ..Default::default()
    };
    let sched = EnvSchedule::constant(Environment::new(0.0, 0.0));
    let grid = TimeGrid::new(0.0, vec![0.0, 1.0], MONTH).unwrap();
    let x0 = StateVector::direct(0.0, 20.0, 0.0);
    let mut rng = stream(303, &[]);
    let finals: Vec<f64> = (0..REPS)
        .map(|_| {
            simulate_ctmc(&p, &x0, &grid, &sched, &mut rng)
                .unwrap()
                .states[1]
                .i()
        })
        .collect();
    let (mean, var) = mean_var(&finals);
    let se = (var / REPS as f64).sqrt();
    let want = 20.0 * (-0.3f64).exp();
    let z = (mean - want).abs() / se;

    // Dyadic rationals keep every product exact, so the identity must hold
    // bit for bit.
    let mut mismatches = 0;
    let dy = |rng: &mut epiabc::rng::SimRng| rng.random_range(0..1024) as f64 / 1024.0;
    for _ in 0..1000 {
        let x = StateVector::direct(
            rng.random_range(0..500) as f64,
            rng.random_range(0..500) as f64,
            rng.random_range(0..500) as f64,
        );
        let q = DynParams {
            beta: dy(&mut rng),
            mu: dy(&mut rng),
            ..Default::default()
        };
        let env = Environment::new(8.0 * dy(&mut rng), dy(&mut rng));
        let f = drift(Transmission::Direct, &x, &q, &env).unwrap();
        let table = ctmc_events(&x, &q, &env).unwrap();
        for k in 0..3 {
            let sum: f64 = table
                .events
                .iter()
                .map(|e| e.rate * e.delta[k] as f64)
                .sum();
            if sum != f.as_slice()[k] {
                mismatches += 1;
            }
        }
    }

    let pass = z <= 3.0 && mismatches == 0;
    report(
        3,
        pass,
        "CTMC pure-death mean and exact drift identity",
        format!("mean I(1) {mean:.4} vs {want:.4}, {z:.2} SE; drift mismatches {mismatches}/3000"),
    );
    assert!(pass);
}

// 4. Euler-Maruyama simulator.
#[test]
fn criterion_04_sde() {
    const REPS: usize = 10_000;
    let p = scenario_a_params();
    let sched = EnvSchedule::constant(Environment::new(3.0, 0.05));
    let x0 = StateVector::indirect(24.0, 5.0, 4.04, 0.0);
    let grid = TimeGrid::new(0.0, vec![0.0, 1.0], MONTH).unwrap();
    let ode_c1 = simulate_ode(Transmission::Indirect, &p, &x0, &grid, &sched)
        .unwrap()
        .states[1]
        .c();
    let mut rng = stream(404, &[]);
    let c1: Vec<f64> = (0..REPS)
        .map(|_| {
            simulate_sde(Transmission::Indirect, &p, &x0, &grid, &sched, &mut rng)
                .unwrap()
                .states[1]
                .c()
        })
        .collect();
    let (mean, var) = mean_var(&c1);
    let z = (mean - ode_c1).abs() / (var / REPS as f64).sqrt();

    let long = TimeGrid::annual(0.0, 11, MONTH).unwrap();
    let mut bit_exact = true;
    for kind in [Transmission::Direct, Transmission::Indirect] {
        let x = if kind == Transmission::Direct {
            StateVector::direct(12.0, 14.0, 0.0)
        } else {
            x0
        };
        let q = DynParams { beta: 0.04, ..p };
        let a = simulate_sde_with(
            kind,
            &q,
            &x,
            &long,
            &sched,
            &mut stream(1, &[]),
            NoiseMode::Zero,
        )
        .unwrap();
        let b = simulate_euler(kind, &q, &x, &long, &sched).unwrap();
        bit_exact &= a.states.iter().zip(&b.states).all(|(u, v)| {
            u.as_slice()
                .iter()
                .zip(v.as_slice())
                .all(|(s, t)| s.to_bits() == t.to_bits())
        });
    }

    let pass = z <= 3.0 && bit_exact;
    report(
        4,
        pass,
        "SDE ensemble mean of C(1) matches ODE; zero-noise path equals Euler",
        format!("mean C(1) {mean:.4} vs ODE {ode_c1:.4}, {z:.2} SE; bit-exact {bit_exact}"),
    );
    assert!(pass);
}

// 5. Observation models.
#[test]
fn criterion_05_observers() {
    const DRAWS: usize = 10_000;
    let mut rng = stream(505, &[]);

    let mut exceed = 0;
    let sc = Scenario::a();
    let grid = TimeGrid::annual(0.0, 11, MONTH).unwrap();
    let sched = EnvSchedule::constant(Environment::new(3.0, 0.05));
    for k in 0..2000 {
        let traj = if k % 2 == 0 {
            simulate_sde(
                Transmission::Indirect,
                &sc.params,
                &sc.ics[0].state(),
                &grid,
                &sched,
                &mut rng,
            )
            .unwrap()
        } else {
            let c = rng.random_range(0.0..80.0);
            Trajectory {
                times: vec![0.0],
                states: vec![StateVector::direct(
                    rng.random_range(0.0..20.0),
                    rng.random_range(0.0..20.0),
                    c,
                )],
            }
        };
        let obs = observe_binomial(&traj, &mut rng);
        for (x, &c) in traj.states.iter().zip(&obs.c_tilde) {
            if c as f64 > (x.s() + x.i() + x.c()).round() {
                exceed += 1;
            }
        }
    }

    let single = |c: f64, n: f64| Trajectory {
        times: vec![0.0],
        states: vec![StateVector::direct(n - c, 0.0, c)],
    };
    let binom: Vec<f64> = (0..DRAWS)
        .map(|_| observe_binomial(&single(10.0, 40.0), &mut rng).c_tilde[0] as f64)
        .collect();
    let (bm, bv) = mean_var(&binom);
    let zb = (bm - 10.0).abs() / (bv / DRAWS as f64).sqrt();

    let pois: Vec<f64> = (0..DRAWS)
        .map(|_| observe_poisson(&single(10.0, 40.0), &mut rng).c_tilde[0] as f64)
        .collect();
    let (pm, pv) = mean_var(&pois);
    let zm = (pm - 10.0).abs() / (pv / DRAWS as f64).sqrt();
    let m4 = pois.iter().map(|x| (x - pm).powi(4)).sum::<f64>() / DRAWS as f64;
    let n = DRAWS as f64;
    let var_se = ((m4 - pv * pv * (n - 3.0) / (n - 1.0)) / n).sqrt();
    let zv = (pv - 10.0).abs() / var_se;

    let zero = Trajectory {
        times: vec![0.0, 1.0, 2.0],
        states: vec![StateVector::indirect(30.0, 4.0, 2.0, 0.0); 3],
    };
    let zeros = (0..1000).all(|_| {
        observe_binomial(&zero, &mut rng)
            .c_tilde
            .iter()
            .all(|&c| c == 0)
            && observe_poisson(&zero, &mut rng)
                .c_tilde
                .iter()
                .all(|&c| c == 0)
    });

    let pass = exceed == 0 && zb <= 3.0 && zm <= 3.0 && zv <= 3.0 && zeros;
    report(
        5,
        pass,
        "Binomial <= N, Binomial/Poisson moments, zero deaths observed as zero",
        format!(
            "exceedances {exceed}; binom mean {bm:.3} ({zb:.2} SE); pois mean {pm:.3} ({zm:.2} SE), var {pv:.3} ({zv:.2} SE); zeros {zeros}"
        ),
    );
    assert!(pass);
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn prior_cdf(p: &Prior) -> Box<dyn Fn(f64) -> f64> {
    match *p {
        Prior::Beta { alpha, beta } => {
            let d = Beta::new(alpha, beta).unwrap();
            Box::new(move |x| d.cdf(x))
        }
        Prior::Gamma { shape, rate } => {
            let d = Gamma::new(shape, rate).unwrap();
            Box::new(move |x| d.cdf(x))
        }
        Prior::Uniform { low, high } => {
            let d = Uniform::new(low, high).unwrap();
            Box::new(move |x| d.cdf(x))
        }
        Prior::DiscreteUniform { .. } => unreachable!("continuous marginals only"),
    }
}

fn weight_sums_ok(pops: &[Population], worst: &mut f64) -> bool {
    let mut ok = true;
    for pop in pops {
        let counts = pop.model_counts();
        for (k, s) in pop.weight_sums().iter().enumerate() {
            if counts[k] > 0 {
                *worst = worst.max((s - 1.0).abs());
                ok &= (s - 1.0).abs() <= 1e-12;
            }
        }
    }
    ok
}

// 6. SMC sanity.
#[test]
fn criterion_06_smc_sanity() {
    const N: usize = 2500;
    const KS_MAX: f64 = 0.05;
    let reg = ModelRegistry::builtin();
    let data = generate_dataset(&Scenario::b(), &reg, MONTH, 606)
        .unwrap()
        .0;
    let priors = PriorSpec::informative1();
    let mut worst_ks = 0.0f64;
    let mut ks_detail = Vec::new();
    let mut worst_wsum = 0.0f64;
    let mut sums_ok = true;

    for name in ["direct-ode-binom", "indirect-ode-binom"] {
        let problem = SmcProblem::new(
            reg.menu(&[name]).unwrap(),
            priors,
            ProposalSpec::default(),
            &data,
            MONTH,
        )
        .unwrap();
        let cfg = RunConfig {
            tolerances: vec![1e300],
            n_particles: N,
            seed: 6,
            ..Default::default()
        };
        let pops = run_abc_smc(&cfg, &problem).unwrap();
        sums_ok &= weight_sums_ok(&pops, &mut worst_wsum);
        let pop = &pops[0];
        for id in problem.models[0].layout(2).components() {
            if id.is_discrete() {
                continue;
            }
            let xs: Vec<f64> = pop
                .particles
                .iter()
                .map(|p| p.theta.get(id).unwrap())
                .collect();
            let d = ks_statistic(xs, prior_cdf(priors.prior_for(id)));
            worst_ks = worst_ks.max(d);
            ks_detail.push(format!(
                "{}:{}={d:.4}",
                name.split('-').next().unwrap(),
                id.name()
            ));
        }
    }

    let problem = SmcProblem::new(
        reg.full_menu(),
        priors,
        ProposalSpec::default(),
        &data,
        MONTH,
    )
    .unwrap();
    let cfg = |threads| RunConfig {
        tolerances: vec![7.0, 6.0, 5.0],
        n_particles: N,
        seed: 66,
        threads,
        ..Default::default()
    };
    let base = run_abc_smc(&cfg(1), &problem).unwrap();
    sums_ok &= weight_sums_ok(&base, &mut worst_wsum);
    let same_2 = run_abc_smc(&cfg(2), &problem).unwrap() == base;
    let same_8 = run_abc_smc(&cfg(8), &problem).unwrap() == base;

    let dup = SmcProblem::new(
        reg.menu(&["direct-ode-binom", "direct-ode-binom"]).unwrap(),
        priors,
        ProposalSpec::default(),
        &data,
        MONTH,
    )
    .unwrap();
    let dup_pops = run_abc_smc(&cfg(0), &dup).unwrap();
    sums_ok &= weight_sums_ok(&dup_pops, &mut worst_wsum);
    let p_dup = model_probs(dup_pops.last().unwrap()).unwrap().probs[0];
    let dup_ok = (p_dup - 0.5).abs() <= 3.0 * (0.25 / N as f64).sqrt();

    let pass = worst_ks <= KS_MAX && sums_ok && same_2 && same_8 && dup_ok;
    report(
        6,
        pass,
        "SMC: prior recovery at infinite tolerance, weight sums, thread invariance",
        format!(
            "max KS {worst_ks:.4} ({}); max |sum w - 1| {worst_wsum:.1e}; threads 1=2 {same_2}, 1=8 {same_8}; duplicate-model P {p_dup:.3}",
            ks_detail.join(" ")
        ),
    );
    assert!(pass);
}

// 7. Scaled simulation study on scenario (b).
#[test]
fn criterion_07_scenario_b_study() {
    const DATASETS: usize = 10;
    const MIN_TOP2: usize = 7;
    const MIN_BF_OK: usize = 8;
    const BF_LIMIT: f64 = 3.0;
    const BUDGET: Duration = Duration::from_secs(60 * 60);
    let reg = ModelRegistry::builtin();
    let cfg = RunConfig {
        seed: 7,
        ..Default::default()
    };
    let setup = StudySetup {
        registry: &reg,
        menu: reg.full_menu(),
        priors: PriorSpec::informative1(),
        proposals: ProposalSpec::default(),
        cfg: cfg.clone(),
    };
    let start = Instant::now();
    let result = run_study(&Scenario::b(), DATASETS, &setup, |d, r| {
        let line = match r {
            Ok((o, _)) => format!(
                "  dataset {:>2}: best {:<20} true rank {:>2}  BF {:.3}",
                d + 1,
                o.best_name,
                o.true_rank,
                o.bf_best_vs_true
            ),
            Err(e) => format!("  dataset {:>2}: failed: {e}", d + 1),
        };
        writeln!(std::io::stdout().lock(), "{line}").unwrap();
    })
    .unwrap();
    let elapsed = start.elapsed();
    let top2 = result.true_top2();
    let bf_ok = result.bf_at_most(BF_LIMIT);
    let mut ranks = BTreeMap::new();
    for o in &result.outcomes {
        *ranks.entry(o.true_rank).or_insert(0) += 1;
    }
    let pass = top2 >= MIN_TOP2 && bf_ok >= MIN_BF_OK && elapsed <= BUDGET;
    report(
        7,
        pass,
        "scenario (b) study: true model top-2 and best-vs-true BF",
        format!(
            "N = {}, {} threads; top-2 {top2}/{DATASETS}, best {}/{DATASETS}, BF <= {BF_LIMIT} {bf_ok}/{DATASETS}; rank counts {ranks:?}; failures {}; {:.1} min",
            cfg.n_particles,
            std::thread::available_parallelism().map_or(1, |n| n.get()),
            result.true_best(),
            result.failures.len(),
            elapsed.as_secs_f64() / 60.0
        ),
    );
    assert!(pass);
}

// 8. Bayes factors and evidence bins.
#[test]
fn criterion_08_bayes_factor() {
    const TOL: f64 = 1e-12;
    let cases = [
        (0.4, 0.1, 0.2, 0.8, 16.0),
        (0.21, 0.09, 0.1, 0.1, 0.21 / 0.09),
        (0.3, 0.3, 0.5, 0.5, 1.0),
        (0.5, 0.01, 0.25, 0.25, 50.0),
    ];
    let arith_ok = cases.iter().all(|&(p1, p2, q1, q2, want)| {
        (bayes_factor(p1, p2, q1, q2).unwrap().value - want).abs() <= TOL * want
    });
    let mut rng = stream(808, &[]);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(1e-4..1.0));
        let ab = bayes_factor(v[0], v[1], v[2], v[3]).unwrap().value;
        let ba = bayes_factor(v[1], v[0], v[3], v[2]).unwrap().value;
        worst = worst.max((ab * ba - 1.0).abs());
    }
    let bins = [
        (1.0, Evidence::Weak),
        (2.999, Evidence::Weak),
        (3.0, Evidence::Positive),
        (19.99, Evidence::Positive),
        (20.0, Evidence::Strong),
        (150.0, Evidence::Strong),
        (150.01, Evidence::VeryStrong),
        (f64::INFINITY, Evidence::VeryStrong),
    ];
    let bins_ok = bins.iter().all(|&(bf, e)| Evidence::classify(bf) == e)
        && bayes_factor(0.2, 0.0, 0.5, 0.5).unwrap().evidence == Evidence::VeryStrong;
    let pass = arith_ok && worst <= TOL && bins_ok;
    report(
        8,
        pass,
        "Bayes factor arithmetic, reciprocity and evidence bins",
        format!("hand cases {arith_ok}; max |BF12*BF21 - 1| {worst:.1e}; bins {bins_ok}"),
    );
    assert!(pass);
}

/// Shortest interval `[x_i, x_j]` with enclosed weight at least `level`,
/// ties to the lower left endpoint, by checking every pair.
fn brute_hpd(samples: &[(f64, f64)], level: f64) -> (f64, f64) {
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let mut best: Option<(f64, f64)> = None;
    for (i, &lo) in xs.iter().enumerate() {
        for &hi in &xs[i..] {
            let w: f64 = samples
                .iter()
                .filter(|s| s.0 >= lo && s.0 <= hi)
                .map(|s| s.1)
                .sum();
            if w >= level * total * (1.0 - 1e-12) {
                let better = match best {
                    None => true,
                    Some((l, h)) => hi - lo < h - l,
                };
                if better {
                    best = Some((lo, hi));
                }
                break;
            }
        }
    }
    best.unwrap()
}

// 9. HPD intervals and posterior modes.
#[test]
fn criterion_09_hpd_and_mode() {
    const MODE_TOL: f64 = 0.1;
    let mut rng = stream(909, &[]);
    let mut mismatches = 0;
    for trial in 0..100 {
        let n = 5 + trial % 40;
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                let v = if trial % 3 == 0 { v.round() } else { v };
                (v, rng.random_range(0.01..1.0))
            })
            .collect();
        let level = [0.5, 0.8, 0.9, 0.95][trial % 4];
        if hpd_interval(&samples, level).unwrap() != brute_hpd(&samples, level) {
            mismatches += 1;
        }
    }
    let equal: Vec<(f64, f64)> = (1..=100).map(|k| (k as f64, 1.0)).collect();
    let equal_ok = hpd_interval(&equal, 0.95).unwrap() == brute_hpd(&equal, 0.95);

    let draws: Vec<(f64, f64)> = (0..10_000)
        .map(|_| (StandardNormal.sample(&mut rng), 1.0))
        .collect();
    let mode = posterior_mode(&draws, ValueKind::Continuous).unwrap();
    let atoms = posterior_mode(&[(2.0, 0.6), (7.0, 0.4)], ValueKind::Discrete).unwrap();

    let pass = mismatches == 0 && equal_ok && mode.abs() <= MODE_TOL && atoms == 2.0;
    report(
        9,
        pass,
        "HPD matches brute-force oracle; KDE mode of N(0,1) draws",
        format!("HPD mismatches {mismatches}/100, equal-weight 1..100 {equal_ok}; mode {mode:.4}; discrete {atoms}"),
    );
    assert!(pass);
}

// 10. End-to-end ensemble through the binary.
#[test]
fn criterion_10_simulate_cli() {
    const REPS: usize = 100;
    const BUDGET: Duration = Duration::from_secs(10);
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_epiabc"))
        .args([
            "simulate",
            "--model",
            "indirect-sde-binom",
            "--reps",
            "100",
            "--seed",
            "10",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    let elapsed = start.elapsed();

    let mut rdr = csv::Reader::from_path(dir.path().join("ensemble.csv")).unwrap();
    let mut series: BTreeMap<(String, String), Vec<(f64, u64)>> = BTreeMap::new();
    let mut errors = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if !rec[4].is_empty() {
            errors += 1;
            continue;
        }
        series
            .entry((rec[1].to_string(), rec[0].to_string()))
            .or_default()
            .push((rec[2].parse().unwrap(), rec[3].parse().unwrap()));
    }
    let mut per_epidemic: BTreeMap<String, usize> = BTreeMap::new();
    let mut start_zero = true;
    for ((epi, _), s) in &series {
        *per_epidemic.entry(epi.clone()).or_insert(0) += 1;
        let first = s
            .iter()
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        start_zero &= first.1 == 0;
    }
    let counts_ok = per_epidemic.len() == 2 && per_epidemic.values().all(|&c| c == REPS);
    let pass = status.success() && errors == 0 && counts_ok && start_zero && elapsed < BUDGET;
    report(
        10,
        pass,
        "simulate --reps 100 writes 100 series per epidemic starting at 0",
        format!("exit {status}, series per epidemic {per_epidemic:?}, all start at 0 {start_zero}, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn ks_statistic_matches_hand_value() {
    // Three points against U(0,1): D = max(1/3, |0.5-2/3|, 1-0.9) = 1/3.
    let d = ks_statistic(vec![0.0, 0.5, 0.9], |x| x);
    assert!((d - 1.0 / 3.0).abs() < 1e-15);
}
