//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime.
//! Runs without the libtest harness so the lines are always printed.

#![allow(clippy::needless_range_loop)]

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use beliefmdp::filter::{bayes_update, belief_transition, initial_posterior, obs_marginal};
use beliefmdp::measures::{interval_family_gap, setwise_gap, tv_distance, TestSet};
use beliefmdp::models::{
    build_example_4_1, build_example_4_3, build_inventory, build_kalman, dyadic_density_masses, kalman_exact,
    sin_sq_half_turn, InventoryMode, InventorySpec, KalmanSpec,
};
use beliefmdp::probe::{
    example_4_2_h_limits, example_4_3_q_mass, probe_kernel, KernelSelector, ProbeMode, SetFamily, Verdict,
    DEFAULT_THRESHOLD,
};
use beliefmdp::solver::{alpha_solve, optimality_residual, value_iterate_grid, Pruning, SimplexGrid, ValueFunction};
use beliefmdp::{Belief, CostMode, DiscretePomdp};
use common::{draw, enumerate_posterior, random_belief, random_model, two_step_enumeration, ModelShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn action(model: &DiscretePomdp, label: &str) -> Result<usize, String> {
    model.action_index(label).ok_or_else(|| format!("no action `{label}`"))
}

fn c1_golden_posteriors() -> Outcome {
    let z = Belief::uniform(2);
    for n in 1..=6u32 {
        let cells = 1usize << n;
        let m = build_example_4_1(n, cells).map_err(err)?;
        let a = action(&m, &format!("1/{n}"))?;
        let density = dyadic_density_masses(n, cells);
        for (y, mass) in density.iter().enumerate() {
            let post = bayes_update(&m, &z, a, y).map_err(err)?;
            let want = if *mass > 0.0 { [1.0 / 3.0, 2.0 / 3.0] } else { [1.0, 0.0] };
            ensure((post[0] - want[0]).abs() <= 1e-12 && (post[1] - want[1]).abs() <= 1e-12, || {
                format!("n={n} cell {y}: posterior {:?}, expected {want:?}", &post[..])
            })?;
        }
        let law = belief_transition(&m, &z, a).map_err(err)?;
        let w_split = law.weight_of(&[1.0 / 3.0, 2.0 / 3.0], 1e-12);
        let w_point = law.weight_of(&[1.0, 0.0], 1e-12);
        ensure(law.len() == 2 && (w_split - 0.75).abs() <= 1e-12 && (w_point - 0.25).abs() <= 1e-12, || {
            format!("n={n}: weights {w_split}, {w_point} over {} atoms", law.len())
        })?;
    }
    Ok("n = 1..6, posteriors and weights exact within 1e-12".into())
}

fn c2_continuity_dichotomy() -> Outcome {
    let state2 = Belief::point_mass(2, 1);
    let mut worst_setwise_ratio: f64 = 0.0;
    for n in 1..=6u32 {
        let cells = 1usize << n;
        let m = build_example_4_1(n, cells).map_err(err)?;
        let a = action(&m, &format!("1/{n}"))?;
        // identity transitions, so R'(.|delta_2, a) = Q(.|a, 2)
        let p = obs_marginal(&m, &state2, a).map_err(err)?;
        let q = obs_marginal(&m, &state2, 0).map_err(err)?;
        let tv = tv_distance(&p, &q).map_err(err)?;
        ensure((tv - 0.5).abs() <= 1e-12, || format!("n={n}: TV = {tv}"))?;
        let mut dyadic = Vec::new();
        for j in 0..=n {
            let len = 0.5f64.powi(j as i32);
            for k in 0..(1u32 << j) {
                dyadic.push(TestSet::Interval {
                    lo: Some(k as f64 * len),
                    hi: Some((k + 1) as f64 * len),
                    lo_closed: true,
                    hi_closed: false,
                    coord: 0,
                });
            }
        }
        let g = setwise_gap(&p, &q, &dyadic).map_err(err)?.gap;
        let bound = 0.5f64.powi(n as i32 - 1);
        ensure(g <= bound + 1e-12, || format!("n={n}: dyadic gap {g} > {bound}"))?;
        let all = interval_family_gap(&p, &q).map_err(err)?;
        ensure(all <= bound + 1e-12, || format!("n={n}: interval gap {all} > {bound}"))?;
        worst_setwise_ratio = worst_setwise_ratio.max(g / bound);
    }

    // verdicts need a tail below the threshold, so the probe runs n = 1..14
    let n = 14u32;
    let m = build_example_4_1(n, 1 << n).map_err(err)?;
    let seq: Vec<_> = (1..=n).map(|j| (state2.clone(), j as usize)).collect();
    let target = (state2.clone(), 0);
    let tv = probe_kernel(&m, KernelSelector::ObsMarginal, &seq, &target, ProbeMode::Tv, None, DEFAULT_THRESHOLD)
        .map_err(err)?;
    let sw = probe_kernel(
        &m,
        KernelSelector::ObsMarginal,
        &seq,
        &target,
        ProbeMode::Setwise,
        Some(&SetFamily::AllIntervals),
        DEFAULT_THRESHOLD,
    )
    .map_err(err)?;
    let zq = Belief::uniform(2);
    let qseq: Vec<_> = (1..=n).map(|j| (zq.clone(), j as usize)).collect();
    let qtv = probe_kernel(
        &m,
        KernelSelector::BeliefTransition,
        &qseq,
        &(zq, 0),
        ProbeMode::Tv,
        None,
        DEFAULT_THRESHOLD,
    )
    .map_err(err)?;
    ensure(tv.verdict == Verdict::Stalled, || format!("Q tv verdict {:?}", tv.verdict))?;
    ensure(sw.verdict == Verdict::Converging, || format!("Q setwise verdict {:?}", sw.verdict))?;
    ensure(qtv.gaps.iter().all(|g| (g - 1.0).abs() <= 1e-12), || format!("q tv gaps {:?}", qtv.gaps))?;
    Ok(format!(
        "TV = 1/2 for n <= 6, dyadic gap / 2^(1-n) <= {worst_setwise_ratio:.3}; verdicts Q tv {:?}, Q setwise {:?} (tail {:.2e}), q tv gap = 1",
        tv.verdict, sw.verdict, sw.limit_estimate
    ))
}

fn c3_example_4_2_limits() -> Outcome {
    let h = example_4_2_h_limits(1000).map_err(err)?;
    ensure(h.left_final >= 0.999, || format!("H(-1/1000) = {}", h.left_final))?;
    ensure(h.right_final <= 0.001, || format!("H(+1/1000) = {}", h.right_final))?;
    let h2 = example_4_2_h_limits(2).map_err(err)?;
    ensure((h2.left[1] - 2.0 / 3.0).abs() <= 1e-12 && (h2.right[1] - 1.0 / 3.0).abs() <= 1e-12, || {
        format!("k=2: {} and {}", h2.left[1], h2.right[1])
    })?;
    Ok(format!("k=1000: {:.6} / {:.6}; k=2: 2/3 and 1/3", h.left_final, h.right_final))
}

fn c4_example_4_3_mass() -> Outcome {
    let q300 = example_4_3_q_mass(300).map_err(err)?.value();
    ensure((q300 - 1.0 / 3.0).abs() <= 0.02, || format!("m=300: {q300}"))?;
    for m in [1, 3] {
        let v = example_4_3_q_mass(m).map_err(err)?.value();
        ensure(v == 0.5, || format!("m={m}: {v}"))?;
    }
    let k = 20;
    let tol = 0.5f64.powi(21);
    let model = build_example_4_3(3, k).map_err(err)?;
    let z = Belief::uniform(2);
    let mut worst: f64 = 0.0;
    for m in 1..=3usize {
        let a = action(&model, &format!("1/{m}"))?;
        let law = belief_transition(&model, &z, a).map_err(err)?;
        // untruncated law: each residue l of n mod 2m carries 1/(2m)
        let mut closed: Vec<([f64; 2], f64)> = Vec::new();
        for l in 1..=2 * m {
            let s = sin_sq_half_turn(l, m);
            let p = [s, 1.0 - s];
            match closed.iter_mut().find(|(q, _)| (q[0] - p[0]).abs() <= 1e-12) {
                Some(e) => e.1 += 1.0 / (2 * m) as f64,
                None => closed.push((p, 1.0 / (2 * m) as f64)),
            }
        }
        for (p, w) in &closed {
            worst = worst.max((law.weight_of(p, 1e-12) - w).abs());
        }
        for (b, w) in law.iter() {
            if !closed.iter().any(|(p, _)| (p[0] - b[0]).abs() <= 1e-12) {
                worst = worst.max(w);
            }
        }
        let d_mass = law.mass_where(|b| b[0] >= 0.75 - 1e-9);
        let exact = example_4_3_q_mass(m as i64).map_err(err)?.value();
        worst = worst.max((d_mass - exact).abs());
    }
    ensure(worst <= tol, || format!("largest deviation {worst:e} > 2^-21"))?;
    Ok(format!("m=300: {q300:.4}; K=20 deviation {worst:.3e} <= 2^-21"))
}

fn c5_filter_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let models = 300;
    for _ in 0..models {
        let shape = ModelShape {
            nx: rng.gen_range(1..=4),
            ny: rng.gen_range(1..=4),
            na: rng.gen_range(1..=4),
            mode: CostMode::D,
            discount: 0.9,
            cost_range: (0.0, 1.0),
            infinite_cost: 0.0,
            sparsity: 0.3,
        };
        let m = random_model(&mut rng, &shape);
        let horizon = rng.gen_range(0..=3);
        let actions: Vec<usize> = (0..horizon).map(|_| rng.gen_range(0..shape.na)).collect();
        let mut x = draw(&mut rng, m.prior());
        let mut ys = vec![draw(&mut rng, m.initial_observation_row(x))];
        for &a in &actions {
            x = draw(&mut rng, m.transition_row(a, x));
            ys.push(draw(&mut rng, m.observation_row(a, x)));
        }
        let oracle = enumerate_posterior(&m, m.prior(), &actions, &ys).ok_or("sampled path has probability 0")?;
        let mut z = initial_posterior(&m, &m.prior_belief().map_err(err)?, ys[0]).map_err(err)?;
        for (t, &a) in actions.iter().enumerate() {
            z = bayes_update(&m, &z, a, ys[t + 1]).map_err(err)?;
        }
        for (u, v) in z.iter().zip(&oracle) {
            worst = worst.max((u - v).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("{models} models, max deviation {worst:.2e}"))
}

fn c6_finite_horizon() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let models = 60;
    for _ in 0..models {
        let shape = ModelShape {
            nx: 2,
            ny: 2,
            na: 2,
            mode: CostMode::D,
            discount: rng.gen_range(0.1..0.99),
            cost_range: (-1.0, 2.0),
            infinite_cost: 0.0,
            sparsity: 0.2,
        };
        let m = random_model(&mut rng, &shape);
        let pointwise = alpha_solve(&m, 2, Pruning::Pointwise).map_err(err)?.pop().unwrap();
        let exact = alpha_solve(&m, 2, Pruning::Exact).map_err(err)?.pop().unwrap();
        for _ in 0..50 {
            let z = random_belief(&mut rng, 2);
            let want = two_step_enumeration(&m, &z);
            worst = worst.max((pointwise.value(&z) - want).abs());
            worst = worst.max((exact.value(&z) - want).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("{models} models x 50 beliefs, both prunings, max deviation {worst:.2e}"))
}

fn grid_iterates(m: &DiscretePomdp, r: u32, sweeps: usize) -> Result<Vec<Vec<f64>>, String> {
    (1..=sweeps)
        .map(|k| value_iterate_grid(m, r, k, 0.0).map(|s| s.values.values).map_err(err))
        .collect()
}

fn c7_value_iteration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // (a) monotone iterates in mode P
    let mut p_models = 0;
    for i in 0..24 {
        let shape = ModelShape {
            nx: rng.gen_range(2..=3),
            ny: rng.gen_range(1..=3),
            na: rng.gen_range(1..=3),
            mode: CostMode::P,
            discount: if i % 4 == 0 { 1.0 } else { rng.gen_range(0.5..1.0) },
            cost_range: (0.0, 2.0),
            infinite_cost: 0.1,
            sparsity: 0.2,
        };
        let m = random_model(&mut rng, &shape);
        let iterates = grid_iterates(&m, 8, 15)?;
        let mut prev = vec![0.0; iterates[0].len()];
        for (k, v) in iterates.iter().enumerate() {
            for (i, (a, b)) in prev.iter().zip(v).enumerate() {
                ensure(*b >= *a - 1e-12, || format!("model {i}: iterate {k} decreases at vertex {i}: {a} -> {b}"))?;
            }
            prev = v.clone();
        }
        p_models += 1;
    }

    // (b) contraction in mode D with discount 0.9
    let mut worst_ratio: f64 = 0.0;
    let mut worst_pair = (0.0, 0.0);
    let mut d_models = 0;
    for _ in 0..20 {
        let shape = ModelShape {
            nx: rng.gen_range(2..=3),
            ny: rng.gen_range(1..=3),
            na: rng.gen_range(1..=3),
            mode: CostMode::D,
            discount: 0.9,
            cost_range: (-1.0, 1.0),
            infinite_cost: 0.0,
            sparsity: 0.2,
        };
        let m = random_model(&mut rng, &shape);
        let sol = value_iterate_grid(&m, 12, 300, 0.0).map_err(err)?;
        let scale = sol.values.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        // below this floor, rounding in the deltas exceeds the 1e-6 ratio tolerance
        let floor = 1e-7 * scale;
        for w in sol.trace.windows(2) {
            if w[0] > floor && w[1] > floor && w[1] / w[0] > worst_ratio {
                worst_ratio = w[1] / w[0];
                worst_pair = (w[0], w[1]);
            }
        }
        d_models += 1;
    }
    ensure(worst_ratio <= 0.9 + 1e-6, || format!("contraction ratio {worst_ratio} from deltas {worst_pair:?}"))?;

    // (c) converged residual at r = 200 against the r = 400 refinement
    let mut worst_residual: f64 = 0.0;
    let mut worst_slack: f64 = 0.0;
    for _ in 0..5 {
        let shape = ModelShape {
            nx: 2,
            ny: rng.gen_range(2..=3),
            na: rng.gen_range(2..=3),
            mode: CostMode::D,
            discount: 0.9,
            cost_range: (0.0, 1.0),
            infinite_cost: 0.0,
            sparsity: 0.1,
        };
        let m = random_model(&mut rng, &shape);
        let coarse = value_iterate_grid(&m, 200, 100_000, 1e-12).map_err(err)?;
        let fine = value_iterate_grid(&m, 400, 100_000, 1e-12).map_err(err)?;
        ensure(coarse.converged && fine.converged, || "grid iteration did not converge".into())?;
        let vertices: Vec<Belief> = coarse.values.grid.vertices().collect();
        worst_residual = worst_residual.max(optimality_residual(&m, &coarse.values, &vertices).map_err(err)?);
        let grid400 = SimplexGrid::new(2, 400).map_err(err)?;
        for i in 0..coarse.values.grid.len() {
            let counts: Vec<u32> = coarse.values.grid.counts(i).iter().map(|c| 2 * c).collect();
            let j = grid400.find(&counts).ok_or("r=200 vertex missing from r=400 grid")?;
            worst_slack = worst_slack.max((coarse.values.values[i] - fine.values.values[j]).abs());
        }
    }
    ensure(worst_residual <= 1e-6, || format!("residual {worst_residual:e}"))?;
    Ok(format!(
        "{p_models} mode-P models monotone; {d_models} mode-D models, max ratio {worst_ratio:.6}; \
         r=200 residual {worst_residual:.2e}, |V200 - V400| at shared vertices {worst_slack:.2e}"
    ))
}

fn c8_concavity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..10 {
        let nx = rng.gen_range(2..=4);
        let shape = ModelShape {
            nx,
            ny: rng.gen_range(2..=3),
            na: rng.gen_range(2..=3),
            mode: CostMode::D,
            discount: 0.9,
            cost_range: (-1.0, 2.0),
            infinite_cost: 0.0,
            sparsity: 0.2,
        };
        let m = random_model(&mut rng, &shape);
        let v = alpha_solve(&m, 3, Pruning::Pointwise).map_err(err)?.pop().unwrap();
        for _ in 0..1000 {
            let (z1, z2) = (random_belief(&mut rng, nx), random_belief(&mut rng, nx));
            let lambda: f64 = rng.gen();
            let mid = Belief::mix(&z1, &z2, lambda).map_err(err)?;
            let chord = lambda * v.value(&z1) + (1.0 - lambda) * v.value(&z2);
            worst = worst.max(chord - v.value(&mid));
            checks += 1;
        }
    }
    ensure(worst <= 1e-10, || format!("concavity violated by {worst:e}"))?;
    Ok(format!("{checks} combinations, worst slack {worst:.2e}"))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn c9_kalman() -> Outcome {
    let base = KalmanSpec::example();
    let trajectories = 400;
    let steps = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let paths: Vec<(Vec<usize>, Vec<f64>)> = (0..trajectories)
        .map(|_| {
            let mut x = base.prior_mean + base.prior_sd * gaussian(&mut rng);
            let mut ys = vec![base.h * x + base.c * gaussian(&mut rng)];
            let mut acts = Vec::new();
            for _ in 0..steps {
                let a = rng.gen_range(0..base.actions.len());
                x = base.d * x + base.b * base.actions[a] + base.state_noise_sd * gaussian(&mut rng);
                ys.push(base.h * x + base.c * gaussian(&mut rng));
                acts.push(a);
            }
            (acts, ys)
        })
        .collect();

    let mut rows = Vec::new();
    for level in 0..4 {
        let mut spec = base.clone();
        spec.state_points = (base.state_points - 1) * (1 << level) + 1;
        spec.obs_points = (base.obs_points - 1) * (1 << level) + 1;
        let h = spec.state_spacing();
        let model = build_kalman(&spec).map_err(err)?;
        let xs = spec.state_grid();
        let prior = model.prior_belief().map_err(err)?;
        let mut max_err: f64 = 0.0;
        let mut sum_err = 0.0;
        let mut count = 0usize;
        for (acts, ys) in &paths {
            let action_values: Vec<f64> = acts.iter().map(|&a| spec.actions[a]).collect();
            let exact = kalman_exact(&spec, spec.prior_mean, spec.prior_sd.powi(2), &action_values, ys).map_err(err)?;
            let mut z = initial_posterior(&model, &prior, spec.obs_cell(ys[0])).map_err(err)?;
            for t in 0..=steps {
                if t > 0 {
                    z = bayes_update(&model, &z, acts[t - 1], spec.obs_cell(ys[t])).map_err(err)?;
                }
                let mean: f64 = z.iter().zip(&xs).map(|(w, x)| w * x).sum();
                let e = (mean - exact[t].mean).abs();
                max_err = max_err.max(e);
                sum_err += e;
                count += 1;
            }
        }
        rows.push((h, max_err, sum_err / count as f64));
    }
    let mut ratios = Vec::new();
    for (h, max_err, _) in &rows {
        ensure(*max_err <= 2.0 * h, || format!("h={h}: max error {max_err} > 2h"))?;
    }
    for w in rows.windows(2) {
        let ratio = w[0].2 / w[1].2;
        ratios.push(ratio);
        ensure((1.5..=2.5).contains(&ratio), || format!("error ratio {ratio:.3} at h={} -> {}", w[0].0, w[1].0))?;
    }
    let desc: Vec<String> = rows
        .iter()
        .map(|(h, mx, mean)| format!("h={h}: max {mx:.4} mean {mean:.5}"))
        .collect();
    Ok(format!(
        "{}; halving ratios {:?}",
        desc.join(", "),
        ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
    ))
}

fn container_of(cuts: &[f64], x: f64) -> usize {
    cuts.iter().filter(|&&c| c <= x).count()
}

fn run_inventory(spec: &InventorySpec, episodes: usize, steps: usize, seed: u64) -> Result<usize, String> {
    let model = build_inventory(spec).map_err(err)?;
    let levels = &spec.levels;
    let fully_transparent = spec.transparent.iter().all(|t| *t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let check = |z: &Belief, x: usize| -> Result<(), String> {
        let c = container_of(&spec.cuts, levels[x]);
        for s in z.support() {
            ensure(container_of(&spec.cuts, levels[s]) == c, || {
                format!("belief puts mass on level {} outside the container of {}", levels[s], levels[x])
            })?;
        }
        if spec.transparent[c] || fully_transparent {
            ensure(z[x] == 1.0, || format!("level {} is observed but the belief is {:?}", levels[x], &z[..]))?;
        }
        Ok(())
    };
    for _ in 0..episodes {
        let mut x = draw(&mut rng, model.prior());
        let y = draw(&mut rng, model.initial_observation_row(x));
        let mut z = initial_posterior(&model, &model.prior_belief().map_err(err)?, y).map_err(err)?;
        check(&z, x)?;
        for _ in 0..steps {
            let a = rng.gen_range(0..model.n_actions());
            x = draw(&mut rng, model.transition_row(a, x));
            let y = draw(&mut rng, model.observation_row(a, x));
            z = bayes_update(&model, &z, a, y).map_err(err)?;
            check(&z, x)?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn c10_inventory() -> Outcome {
    let mut specs = vec![InventorySpec::example()];
    let mut multi = InventorySpec::example();
    multi.levels = (-6..=8).map(f64::from).collect();
    multi.cuts = vec![-2.5, 0.5, 3.5];
    multi.transparent = vec![false, true, false, true];
    specs.push(multi.clone());
    let mut lost = multi.clone();
    lost.mode = InventoryMode::LostSales;
    lost.lost_sale_cost = 3.0;
    lost.levels = (0..=8).map(f64::from).collect();
    lost.cuts = vec![2.5, 5.5];
    lost.transparent = vec![false, true, false];
    specs.push(lost);
    let mut checked = 0;
    for (i, spec) in specs.iter().enumerate() {
        checked += run_inventory(spec, 400, 30, 100 + i as u64)?;
    }
    let mut clear = multi;
    clear.transparent = vec![true; 4];
    let point_masses = run_inventory(&clear, 200, 30, 200)?;
    Ok(format!(
        "{checked} beliefs inside their containers over 3 specs; {point_masses} point masses with full transparency"
    ))
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_beliefmdp"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(err)?;
    ensure(out.status.success(), || {
        format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let probe_spec = r#"{"kernel":"obs_marginal","mode":"setwise","sets":"all_intervals",
        "sequence":{"belief":[0,1],"actions":["1/1","1/2","1/3","1/4","1/5","1/6","1/7","1/8"]},
        "target":{"belief":[0,1],"action":"0"}}"#;
    let runs: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (
            vec!["solve", "--builder", "example-4-2", "--params", r#"{"k_max":3}"#, "--resolution", "40", "--output",
                 "solve.json", "--trace", "trace.csv"],
            vec!["solve.json", "trace.csv"],
        ),
        (
            vec!["solve", "--builder", "example-4-3", "--params", r#"{"m_max":2,"truncation":4}"#, "--method", "alpha",
                 "--horizon", "3", "--output", "alpha.json"],
            vec!["alpha.json"],
        ),
        (
            vec!["simulate", "--builder", "inventory", "--policy", "fixed", "--action", "order 2", "--episodes", "200",
                 "--horizon", "20", "--seed", "11", "--output", "sim.json"],
            vec!["sim.json"],
        ),
        (
            vec!["simulate", "--builder", "example-4-2", "--params", r#"{"k_max":2}"#, "--episodes", "1", "--seed", "0",
                 "--output", "sim1.csv"],
            vec!["sim1.csv"],
        ),
        (
            vec!["filter-trace", "--builder", "kalman", "--actions", "0,1,2,1,0", "--seed", "3", "--output", "trace.csv"],
            vec!["trace.csv"],
        ),
        (
            vec!["probe", "--builder", "example-4-1", "--params", r#"{"n":8}"#, "--spec", probe_spec, "--output",
                 "probe.json"],
            vec!["probe.json"],
        ),
    ];
    let mut compared = 0;
    for (args, files) in &runs {
        let mut first = Vec::new();
        for threads in ["1", "4"] {
            let mut full = vec!["--threads", threads];
            full.extend(args.iter().copied());
            run_cli(&full, dir.path())?;
            let contents: Vec<Vec<u8>> = files
                .iter()
                .map(|f| std::fs::read(dir.path().join(f)).map_err(err))
                .collect::<Result<_, _>>()?;
            if first.is_empty() {
                first = contents;
            } else {
                for (f, (a, b)) in files.iter().zip(first.iter().zip(&contents)) {
                    ensure(a == b, || format!("{f} differs between runs of `{}`", args.join(" ")))?;
                    compared += 1;
                }
            }
        }
    }
    Ok(format!("{compared} output files byte-identical across repeated runs (1 and 4 threads)"))
}

/// Number, name, runtime budget and check.
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "golden posteriors in the dyadic-density example", Duration::from_secs(1), c1_golden_posteriors),
        (2, "continuity dichotomy for the observation kernel", Duration::from_secs(1), c2_continuity_dichotomy),
        (3, "posterior limits on both sides of a = 0", Duration::from_secs(1), c3_example_4_2_limits),
        (4, "sin^2 example mass and truncated law", Duration::from_secs(5), c4_example_4_3_mass),
        (5, "filter against path enumeration", Duration::from_secs(30), c5_filter_oracle),
        (6, "alpha backups against strategy enumeration", Duration::from_secs(30), c6_finite_horizon),
        (7, "value iteration structure", Duration::from_secs(120), c7_value_iteration),
        (8, "concavity of alpha-vector values", Duration::from_secs(10), c8_concavity),
        (9, "grid filter against the Kalman filter", Duration::from_secs(60), c9_kalman),
        (10, "inventory beliefs stay in the observed container", Duration::from_secs(30), c10_inventory),
        (11, "CLI determinism", Duration::from_secs(120), c11_determinism),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; runtime {elapsed:.2?} over the {limit:?} budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name}: {detail} ({elapsed:.2?})"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name}: {why} ({elapsed:.2?})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
