//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p duelbandit --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use duelbandit::bench::{aggregate, run_seeds, RunConfig};
use duelbandit::confidence::{BetaMode, ConfidenceConfig};
use duelbandit::environments::{linspace, Environment, FeedbackSampler, SamplerMode, TestFunction};
use duelbandit::estimator::{
    fit, fit_in_basis, loss, loss_gradient, sigmoid, FeedbackMode, History, GRAD_TOL,
};
use duelbandit::kernels::{GramState, GridPosterior, KernelGrid, KernelSpec, Query};
use duelbandit::policies::{
    ids_plan, maxinp_select, maxminlcb_select, multisbm_select, rucb_select, IdsParams,
    MultiSbmState, PolicyKind,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn square_grid(lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let axis = linspace(lo, hi, 10);
    axis.iter()
        .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
        .collect()
}

/// Random `f = Σ cᵢ k(·, zᵢ)` scaled to `‖f‖_k = bound`, evaluated on `points`.
fn random_rkhs_utility(
    rng: &mut ChaCha8Rng,
    spec: &KernelSpec,
    points: &[Vec<f64>],
    bound: f64,
) -> Vec<f64> {
    let m = 8;
    let centers: Vec<Vec<f64>> = (0..m)
        .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
        .collect();
    let c: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let kz = DMatrix::from_fn(m, m, |a, b| spec.eval(&centers[a], &centers[b]).unwrap());
    let cv = DVector::from_vec(c.clone());
    let norm = cv.dot(&(&kz * &cv)).sqrt();
    points
        .iter()
        .map(|x| {
            let v: f64 = (0..m).map(|a| c[a] * spec.eval(x, &centers[a]).unwrap()).sum();
            v * bound / norm
        })
        .collect()
}

fn coverage() -> Outcome {
    let runs = 50;
    let steps = 200;
    let bound = 1.0;
    let spec = KernelSpec::rbf(1.0, 1.0);
    let conf = ConfidenceConfig::new(bound, 0.1, 0.1, BetaMode::Theoretical).unwrap();
    let points = square_grid(-3.0, 3.0);
    let grid = KernelGrid::new(spec, points.clone()).unwrap();
    let n = grid.len();
    let mut violating = 0;
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + run);
        let f = random_rkhs_utility(&mut rng, &spec, &points, bound);
        let env = Environment::from_utilities("rkhs", points.clone(), f.clone()).unwrap();
        let mut sampler = FeedbackSampler::new(run, 0, SamplerMode::Preference);
        let mut post = GridPosterior::new(&grid, conf.rho()).unwrap();
        let mut hist = History::new(FeedbackMode::Dueling);
        let mut weights: Option<Vec<f64>> = None;
        let mut violated = false;
        for _ in 0..steps {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            let y = sampler.sample(&env, i, j);
            hist.push(i, j, y);
            post.append(Query::Pair(i, j));
            let fit = fit_in_basis(&hist, &grid, conf.lambda, weights.as_deref()).unwrap();
            let beta = conf.beta(post.info_gain());
            'scan: for a in 0..n {
                for b in 0..n {
                    let q = Query::Pair(a, b);
                    let truth = sigmoid::value(f[a] - f[b]);
                    if (fit.prob(q) - truth).abs() > beta * post.sigma(q) {
                        violated = true;
                        break 'scan;
                    }
                }
            }
            weights = Some(fit.weights);
            if violated {
                break;
            }
        }
        violating += usize::from(violated);
    }
    let rate = violating as f64 / runs as f64;
    outcome(
        rate <= 0.15,
        format!("violation rate {rate:.3} ({violating}/{runs} runs), limit 0.15"),
    )
}

fn desk_config(policy: PolicyKind, horizon: usize, seeds: u64) -> RunConfig {
    RunConfig {
        env: TestFunction::Ackley,
        policy,
        horizon,
        seeds: (0..seeds).collect(),
        lambda: 0.1,
        beta: BetaMode::Fixed(1.0),
        restrict_to_maximizers: false,
        ..RunConfig::default()
    }
}

fn mean_regret(policy: PolicyKind, horizon: usize, seeds: u64) -> (f64, f64) {
    let records = run_seeds(&desk_config(policy, horizon, seeds)).unwrap();
    let s = aggregate(&records).unwrap();
    (s.mean_cum_regret, s.std_err)
}

fn dueling_ordering() -> Outcome {
    let ours = mean_regret(PolicyKind::MaxMinLcb, 500, 5);
    let multisbm = mean_regret(PolicyKind::MultiSbm, 500, 5);
    let others: Vec<(PolicyKind, (f64, f64))> = [
        PolicyKind::Doubler,
        PolicyKind::Rucb,
        PolicyKind::Ids,
        PolicyKind::MaxInP,
    ]
    .into_iter()
    .map(|p| (p, mean_regret(p, 500, 5)))
    .collect();
    let (best_kind, best) = others
        .iter()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap())
        .map(|(k, v)| (*k, v.0))
        .unwrap();
    let pass = ours.0 < multisbm.0 && ours.0 <= 2.0 * best;
    let rest: Vec<String> = others
        .iter()
        .map(|(k, v)| format!("{} {:.2}", k.title(), v.0))
        .collect();
    outcome(
        pass,
        format!(
            "MaxMinLCB {:.2} ± {:.2} vs MultiSBM {:.2} ± {:.2}; best other {} {:.2} ({})",
            ours.0,
            ours.1,
            multisbm.0,
            multisbm.1,
            best_kind.title(),
            best,
            rest.join(", ")
        ),
    )
}

fn logistic_ordering() -> Outcome {
    let lgp = mean_regret(PolicyKind::LgpUcb, 500, 5);
    let ind = mean_regret(PolicyKind::IndUcb, 500, 5);
    outcome(
        lgp.0 < ind.0,
        format!(
            "LGP-UCB {:.2} ± {:.2} vs Ind-UCB {:.2} ± {:.2}",
            lgp.0, lgp.1, ind.0, ind.1
        ),
    )
}

fn sublinearity() -> Outcome {
    let records = run_seeds(&desk_config(PolicyKind::MaxMinLcb, 1000, 3)).unwrap();
    let window = |lo: usize, hi: usize| -> f64 {
        let mut total = 0.0;
        let mut count = 0;
        for r in &records {
            for row in r.rows.iter().filter(|row| row.t >= lo && row.t <= hi) {
                total += row.step_regret;
                count += 1;
            }
        }
        total / count as f64
    };
    let early = window(1, 200);
    let late = window(801, 1000);
    outcome(
        late < 0.5 * early,
        format!("late mean step regret {late:.5} vs 0.5 × early {:.5}", 0.5 * early),
    )
}

fn random_history(rng: &mut ChaCha8Rng, n: usize, t: usize) -> History {
    let mut h = History::new(FeedbackMode::Dueling);
    for _ in 0..t {
        h.push(rng.random_range(0..n), rng.random_range(0..n), rng.random_bool(0.5));
    }
    h
}

fn estimator_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let points: Vec<Vec<f64>> = (0..15)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let grid = KernelGrid::new(KernelSpec::rbf(1.0, 1.0), points).unwrap();
    let lambda = 0.1;
    let mut worst_rel: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..50 {
        let t = rng.random_range(1..=20);
        let h = random_history(&mut rng, 15, t);
        let alpha: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = loss_gradient(&alpha, &h, &grid, lambda).unwrap();
        let eps = 1e-5;
        let fd: Vec<f64> = (0..t)
            .map(|k| {
                let mut up = alpha.clone();
                let mut dn = alpha.clone();
                up[k] += eps;
                dn[k] -= eps;
                (loss(&up, &h, &grid, lambda).unwrap() - loss(&dn, &h, &grid, lambda).unwrap())
                    / (2.0 * eps)
            })
            .collect();
        let diff = fd.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst_rel = worst_rel.max(diff / scale);

        for fitted in [
            fit(&h, &grid, lambda, None).unwrap(),
            fit_in_basis(&h, &grid, lambda, None).unwrap(),
        ] {
            let gg = loss_gradient(&fitted.alpha, &h, &grid, lambda).unwrap();
            worst_grad = worst_grad.max(gg.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }

    let mut sym = History::new(FeedbackMode::Dueling);
    for _ in 0..10 {
        let (i, j) = (rng.random_range(0..15), rng.random_range(0..15));
        for (a, b) in [(i, j), (j, i)] {
            sym.push(a, b, true);
            sym.push(a, b, false);
        }
    }
    let mut worst_h: f64 = 0.0;
    for fitted in [
        fit(&sym, &grid, lambda, None).unwrap(),
        fit_in_basis(&sym, &grid, lambda, None).unwrap(),
    ] {
        for i in 0..15 {
            for j in 0..15 {
                worst_h = worst_h.max(fitted.value(Query::Pair(i, j)).abs());
            }
        }
    }
    outcome(
        worst_rel <= 1e-6 && worst_grad <= GRAD_TOL && worst_h <= 1e-10,
        format!(
            "max FD rel err {worst_rel:.2e} (≤1e-6), max fitted ‖∇L‖ {worst_grad:.2e} (≤1e-8), max |ĥ| symmetric {worst_h:.2e} (≤1e-10)"
        ),
    )
}

fn linear_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let spec = KernelSpec::rbf(1.0, 1.0);
    let mut min_eig = f64::INFINITY;
    for _ in 0..100 {
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let m = rng.random_range(2..=25);
        let pairs: Vec<(usize, usize)> = (0..m)
            .map(|_| (rng.random_range(0..10), rng.random_range(0..10)))
            .collect();
        let gram = DMatrix::from_fn(m, m, |a, b| {
            let (i, j) = pairs[a];
            let (k, l) = pairs[b];
            spec.eval_dueling((&pts[i], &pts[j]), (&pts[k], &pts[l])).unwrap()
        });
        min_eig = min_eig.min(SymmetricEigen::new(gram).eigenvalues.min());
    }

    let pts = square_grid(-2.0, 2.0);
    let grid = KernelGrid::new(spec, pts).unwrap();
    let rho = 0.1 * duelbandit::confidence::kappa(1.0);
    let mut gram = GramState::new(rho).unwrap();
    let mut post = GridPosterior::new(&grid, rho).unwrap();
    let probes: Vec<Query> = (0..40)
        .map(|_| Query::Pair(rng.random_range(0..100), rng.random_range(0..100)))
        .collect();
    let mut prev: Vec<f64> = probes.iter().map(|&q| post.sigma(q)).collect();
    let mut monotone = true;
    let mut rows = Vec::new();
    for _ in 0..500 {
        let q = Query::Pair(rng.random_range(0..100), rng.random_range(0..100));
        gram.append(&grid.kernel_vector(&rows, q), grid.row_kernel(q, q) + rho)
            .unwrap();
        post.append(q);
        rows.push(q);
        let now: Vec<f64> = probes.iter().map(|&p| post.sigma(p)).collect();
        monotone &= now.iter().zip(&prev).all(|(a, b)| *a <= b + 1e-12);
        prev = now;
    }
    let t = rows.len();
    let dense = grid.row_gram(&rows) + DMatrix::identity(t, t) * rho;
    let chol = dense.cholesky().unwrap();
    let dense_log_det =
        chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>() - t as f64 * rho.ln();
    let mut worst = (gram.log_det() - dense_log_det)
        .abs()
        .max((post.log_det() - dense_log_det).abs());
    for &p in &probes {
        let kv = DVector::from_vec(grid.kernel_vector(&rows, p));
        let dense_sigma = (grid.row_kernel(p, p) - kv.dot(&chol.solve(&kv))).max(0.0).sqrt();
        let inc = gram
            .posterior_sigma(kv.as_slice(), grid.row_kernel(p, p))
            .unwrap();
        worst = worst
            .max((inc - dense_sigma).abs())
            .max((post.sigma(p) - dense_sigma).abs());
    }
    outcome(
        min_eig >= -1e-8 && worst <= 1e-8 && monotone,
        format!(
            "min k^D eigenvalue {min_eig:.2e} (≥−1e-8), incremental vs dense {worst:.2e} (≤1e-8), σ monotone {monotone}"
        ),
    )
}

fn selection_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = [0usize; 5];
    for _ in 0..100 {
        let n = rng.random_range(3..=5);
        let s = random_prob_surface(&mut rng, n);
        let mask = random_mask(&mut rng, n);
        if maxminlcb_select(&s, &mask).0 != oracle_maxminlcb(&s, &mask) {
            mismatches[0] += 1;
        }
    }
    for _ in 0..100 {
        let n = rng.random_range(3..=5);
        let s = random_prob_surface(&mut rng, n);
        let mask = random_mask(&mut rng, n);
        if maxinp_select(&s, &mask) != oracle_maxinp(&s, &mask) {
            mismatches[1] += 1;
        }
    }
    for _ in 0..100 {
        let n = rng.random_range(3..=5);
        let s = random_prob_surface(&mut rng, n);
        let mask = random_mask(&mut rng, n);
        let seed: u64 = rng.random();
        let (first, reference) = rucb_select(&s, &mask, &mut ChaCha8Rng::seed_from_u64(seed));
        let m = members(&mask);
        let expected_ref = m[ChaCha8Rng::seed_from_u64(seed).random_range(0..m.len())];
        if reference != expected_ref || first != oracle_response(&s, &mask, reference) {
            mismatches[2] += 1;
        }
    }
    for _ in 0..100 {
        let n = rng.random_range(3..=5);
        let s = random_prob_surface(&mut rng, n);
        let mask = random_mask(&mut rng, n);
        let prev = rng.random_range(0..n);
        let pair = multisbm_select(&s, &mask, &mut MultiSbmState { previous: prev });
        if pair != (prev, oracle_response(&s, &mask, prev)) {
            mismatches[3] += 1;
        }
    }
    for _ in 0..100 {
        let n = rng.random_range(3..=5);
        let s = random_utility_surface(&mut rng, n, 0.0);
        let params = IdsParams {
            beta_tilde: 4.0,
            rho: 0.1 * duelbandit::confidence::kappa(1.0),
        };
        let plan = ids_plan(&s, params);
        if (plan.incumbent, plan.candidate) != oracle_ids(&s, params.beta_tilde, params.rho) {
            mismatches[4] += 1;
        }
    }
    outcome(
        mismatches.iter().all(|&m| m == 0),
        format!(
            "mismatches over 100 tables each: MaxMinLCB {}, MaxInP {}, RUCB {}, MultiSBM {}, IDS {}",
            mismatches[0], mismatches[1], mismatches[2], mismatches[3], mismatches[4]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("confidence coverage", coverage),
        ("dueling regret ordering", dueling_ordering),
        ("logistic regret ordering", logistic_ordering),
        ("sublinear regret", sublinearity),
        ("estimator correctness", estimator_correctness),
        ("kernel and linear algebra", linear_algebra),
        ("selection oracles", selection_oracles),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {label}: {} [{secs:.1}s]", result.detail);
        failed += usize::from(!result.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
