use loopsched_core::bo::{
    bo_run_closed_loop, bo_step, build_surrogate, inner_optimize, marginalized_acquisition, mes, sobol_point,
    BoConfig, DirectOptions, Observation, SurrogateMode,
};
use loopsched_core::simulator::{simulate_executions, Locality, SyntheticWorkload, WorkloadKind};
use loopsched_core::Schedule;

fn convex(x: f64) -> f64 {
    1.0 + 4.0 * (x - 0.37) * (x - 0.37)
}

fn grid_argmin(f: impl Fn(f64) -> f64) -> f64 {
    (0..=100_000)
        .map(|i| i as f64 / 100_000.0)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

fn config(seed: u64, iters: usize) -> BoConfig {
    BoConfig {
        n_iters: iters,
        seed,
        ..BoConfig::default()
    }
}

#[test]
fn convex_objective_is_found() {
    let truth = grid_argmin(convex);
    let mut hits = 0;
    for seed in 0..20 {
        let run = bo_run_closed_loop(|x, _| Ok::<_, ()>(vec![convex(x)]), &config(seed, 10)).unwrap();
        assert_eq!(run.trace.len(), 14);
        if (run.best_x - truth).abs() <= 0.05 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20 seeds within 0.05");
}

#[test]
fn zero_iterations_returns_best_sobol_point() {
    let run = bo_run_closed_loop(|x, _| Ok::<_, ()>(vec![convex(x)]), &config(3, 0)).unwrap();
    assert_eq!(run.trace.len(), 4);
    let xs: Vec<f64> = (0..4).map(sobol_point).collect();
    let best = xs.iter().copied().min_by(|a, b| convex(*a).total_cmp(&convex(*b))).unwrap();
    assert_eq!(run.best_x, best);
}

#[test]
fn incumbent_is_monotone_and_trace_consistent() {
    let run = bo_run_closed_loop(|x, _| Ok::<_, ()>(vec![convex(x), 0.5 * convex(x)]), &config(5, 4)).unwrap();
    for w in run.trace.windows(2) {
        assert!(w[1].best_total <= w[0].best_total);
    }
    for (t, e) in run.trace.iter().enumerate() {
        assert_eq!(e.t, t);
        assert!(e.x > 0.0 && e.x < 1.0);
        assert!((e.total - 1.5 * convex(e.x)).abs() < 1e-12);
    }
}

#[test]
fn objective_failure_keeps_partial_trace() {
    let mut calls = 0;
    let err = bo_run_closed_loop(
        |x, _| {
            calls += 1;
            if calls == 3 {
                Err("boom")
            } else {
                Ok(vec![convex(x)])
            }
        },
        &config(1, 5),
    )
    .unwrap_err();
    assert_eq!(err.trace.len(), 2);
}

#[test]
fn warmup_ignores_seed() {
    for seed in [0, 1, 99] {
        let a = bo_run_closed_loop(|x, _| Ok::<_, ()>(vec![convex(x)]), &config(seed, 0)).unwrap();
        let xs: Vec<f64> = a.trace.iter().map(|e| e.x).collect();
        assert_eq!(xs, vec![0.5, 0.25, 0.75, 0.125]);
    }
}

fn dataset(xs: &[f64]) -> Vec<Observation> {
    xs.iter().map(|&x| Observation::new(x, vec![convex(x)]).unwrap()).collect()
}

#[test]
fn step_is_deterministic_and_in_domain() {
    let data = dataset(&[0.5, 0.25, 0.75, 0.125]);
    let cfg = config(11, 1);
    let a = bo_step(&data, &cfg).unwrap();
    let b = bo_step(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(!a.warmup);
    assert!(a.x > 0.0 && a.x < 1.0);
}

#[test]
fn marginal_acquisition_is_mean_of_members() {
    let data = dataset(&[0.5, 0.25, 0.75, 0.125, 0.4]);
    let cfg = config(2, 1);
    let model = build_surrogate(&data, &cfg).unwrap();
    for &x in &[0.1, 0.33, 0.6, 0.9] {
        let per: Vec<f64> = model.members.iter().map(|(s, ys)| mes::mes_acquisition(s, x, ys)).collect();
        let lo = per.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v = marginalized_acquisition(&data, x, &cfg).unwrap();
        assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        assert!(v >= 0.0);
    }
    let single = BoConfig { hp_samples: 1, ..cfg };
    let model = build_surrogate(&data, &single).unwrap();
    assert_eq!(model.members.len(), 1);
    let (s, ys) = &model.members[0];
    assert_eq!(model.acquisition(0.3), mes::mes_acquisition(s, 0.3, ys));
}

#[test]
fn inner_optimize_known_optimum() {
    let r = inner_optimize(|x| -(x - 0.3) * (x - 0.3), &DirectOptions::default()).unwrap();
    assert!((r.x - 0.3).abs() < 1e-3);
    let r = inner_optimize(|_| 1.0, &DirectOptions::default()).unwrap();
    assert!(r.x > 0.0 && r.x < 1.0);
    let err = inner_optimize(|x| if x > 0.6 { f64::NAN } else { x }, &DirectOptions::default()).unwrap_err();
    assert!(matches!(err, loopsched_core::bo::BoError::NonFiniteAcquisition { x } if x > 0.6));
}

fn locality_workload(seed: u64) -> SyntheticWorkload {
    let durations = WorkloadKind::Lognormal { mean: 1e-4, std_dev: 1e-4 }.generate(2048, seed).unwrap();
    SyntheticWorkload::new(durations, 8, 2e-6, Locality::new(2.0, 0.3).unwrap(), 16).unwrap()
}

#[test]
fn locality_training_rows_follow_stride() {
    let w = locality_workload(1);
    let mut data = Vec::new();
    for i in 0..3 {
        let x = sobol_point(i);
        let theta = loopsched_core::bo::reparam(x).unwrap();
        let t = simulate_executions(&w, &Schedule::Factoring { theta }, None).unwrap();
        data.push(Observation::new(x, t).unwrap());
    }
    let cfg = BoConfig {
        surrogate: SurrogateMode::LocalityAware,
        ..config(0, 1)
    };
    let d = loopsched_core::bo::SurrogateData::from_observations(&data, &cfg).unwrap();
    assert_eq!(d.training.len(), 3 * 4);
    let ells: Vec<f64> = d.training.inputs()[..4].iter().map(|p| p.ell).collect();
    assert_eq!(ells, vec![1.0, 5.0, 9.0, 13.0]);
    assert_eq!(d.fallback, None);

    let single: Vec<Observation> = data.iter().map(|o| Observation::new(o.x, vec![o.total]).unwrap()).collect();
    let d = loopsched_core::bo::SurrogateData::from_observations(&single, &cfg).unwrap();
    assert_eq!(d.mode, SurrogateMode::Plain);
    assert!(d.fallback.is_some());
}

#[test]
fn fast_locality_prediction_matches_per_execution_sum() {
    let w = locality_workload(2);
    let mut data = Vec::new();
    for i in 0..5 {
        let x = sobol_point(i);
        let theta = loopsched_core::bo::reparam(x).unwrap();
        let t = simulate_executions(&w, &Schedule::Factoring { theta }, None).unwrap();
        data.push(Observation::new(x, t).unwrap());
    }
    let cfg = BoConfig {
        surrogate: SurrogateMode::LocalityAware,
        hp_samples: 3,
        ..config(4, 1)
    };
    let model = build_surrogate(&data, &cfg).unwrap();
    for (s, _) in &model.members {
        for &x in &[0.05, 0.3, 0.52, 0.8] {
            let (m1, v1) = s.predict_total(x);
            let (m2, v2) = s.predict_total_by_execution(x);
            assert!((m1 - m2).abs() <= 1e-9 * m2.abs().max(1e-12), "{m1} {m2}");
            assert!((v1 - v2).abs() <= 1e-7 * v2.abs().max(1e-18), "{v1} {v2}");
            assert!(v1 >= 0.0);
        }
    }
}
