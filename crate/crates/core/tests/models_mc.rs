use depbernstein::mc::{run_expectation_experiment, run_tail_experiment, trial_rng};
use depbernstein::mixing::MarkovChain;
use depbernstein::models::{
    shipped_model, shipped_models, v2_bruteforce, v2_interval_estimate, ContractionSpec, IidSpec, Model, ModelSpec,
};
use depbernstein::stats::mean_and_stderr;

fn shipped(name: &str) -> Model {
    Model::new(shipped_model(name).unwrap()).unwrap()
}

#[test]
fn every_draw_respects_its_ceiling() {
    for spec in shipped_models() {
        let model = Model::new(spec).unwrap();
        let ceiling = model.lambda_max_bound();
        let xs = model.simulate(100_000, &mut trial_rng(17, 0));
        let worst = xs.iter().map(|x| x.lambda_max()).fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= ceiling * (1.0 + 1e-12), "{}: {worst} > {ceiling}", model.digest());
    }
}

#[test]
fn summands_are_centered() {
    for spec in shipped_models() {
        let model = Model::new(spec).unwrap();
        let d = model.dim();
        let xs = model.simulate(200_000, &mut trial_rng(23, 1));
        // block sums of 50 consecutive summands are close to independent
        for entry in 0..d * d {
            let batches: Vec<f64> = xs
                .chunks(50)
                .map(|c| c.iter().map(|x| x.entries()[entry]).sum::<f64>() / c.len() as f64)
                .collect();
            let est = mean_and_stderr(&batches);
            assert!(est.value.abs() <= 5.0 * est.stderr + 1e-15, "{} entry {entry}: {est:?}", model.digest());
        }
    }
}

#[test]
fn iid_sign_model_has_zero_mean() {
    let spec = ModelSpec::Contraction(ContractionSpec {
        d: 2,
        chain: MarkovChain::iid(&[0.5, 0.5]).unwrap(),
        tau_map: vec![1.0, -0.5],
        y_law: None,
        m: 1.0,
    });
    let model = Model::new(spec).unwrap();
    let (n, trials) = (64usize, 200usize);
    let mut acc = [0.0; 4];
    for trial in 0..trials {
        for x in model.simulate(n, &mut trial_rng(3, trial as u64)) {
            for (a, e) in acc.iter_mut().zip(x.entries()) {
                *a += e;
            }
        }
    }
    let tol = 4.0 / ((n * trials) as f64).sqrt();
    assert!(acc.iter().all(|a| (a / (n * trials) as f64).abs() <= tol), "{acc:?}");
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let model = shipped("blockcov");
    let grid = [0.0, 2.0, 8.0, 32.0];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&run_tail_experiment(&model, 32, 300, &grid, 99).unwrap()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}

#[test]
fn shipped_models_are_dominated() {
    for spec in shipped_models() {
        let model = Model::new(spec).unwrap();
        let n = 64;
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * n as f64 * model.lambda_max_bound() / 20.0).collect();
        let report = run_tail_experiment(&model, n, 1000, &grid, 5).unwrap();
        assert!(report.dominance_violations().is_empty(), "{}", model.digest());
    }
}

#[test]
fn iid_expectation_within_bound() {
    let spec = ModelSpec::IidBaseline(IidSpec { d: 2, y_law: None, m: 1.0 });
    let report = run_expectation_experiment(&Model::new(spec).unwrap(), 256, 2000, 8).unwrap();
    assert!(report.holds(), "{report:?}");
}

#[test]
fn interval_estimate_never_exceeds_bruteforce() {
    for spec in shipped_models() {
        let model = Model::new(spec).unwrap();
        let brute = v2_bruteforce(&model, 6).unwrap();
        let est = v2_interval_estimate(&model, 6, 4000, 12).unwrap();
        assert!(est.value <= brute + 3.0 * est.stderr, "{}: {est:?} vs {brute}", model.digest());
    }
}

#[test]
fn iid_interval_estimate_matches_second_moment() {
    let model = shipped("iid");
    let est = v2_interval_estimate(&model, 5, 8000, 4).unwrap();
    assert!((est.value - 1.0).abs() <= 4.0 * est.stderr + 1e-12, "{est:?}");
}
