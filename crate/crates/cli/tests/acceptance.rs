//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! The heavy experiments (evolution efficacy, preconditioner efficacy) run
//! seeded desk-scale searches and take a few minutes each.

use flexamg::cycle::{
    assemble_iteration_matrix, execute_cycle, residual_rate, run_solver,
    spectral_radius, standard_v_cycle, validate_program, work_units_with_nnz, FlexProgram, Instr,
    SolveOptions, TolMode,
};
use flexamg::evolve::{
    evolve, EvalMode, EvoParams, ProblemSpec,
};
use flexamg::grammar::Grammar;
use flexamg::krylov::{hybrid_solve, pcg, reference_solver_program, HybridConfig, Preconditioner};
use flexamg::nsga::{dominates, non_dominated_sort};
use flexamg::problems::{
    build_anisotropic_poisson, build_timestep_matrix, diagonal_dominance_ratio, random_vector,
    PoissonSpec, TimestepSpec,
};
use flexamg::setup::{build_hierarchy, Hierarchy, HierarchyConfig};
use flexamg::smoother::{
    smoother_error_operator, Ordering, SmootherKind, SmootherSpec, SmootherVariant,
};
use flexamg::sparse::{dense_lu_factor, norm2, DenseMatrix, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn poisson_hierarchy(nd: usize, c: [f64; 3]) -> Hierarchy {
    let spec = PoissonSpec::new(c[0], c[1], c[2], nd).unwrap();
    let a = build_anisotropic_poisson(&spec).unwrap();
    build_hierarchy(a, &HierarchyConfig::default()).unwrap()
}

#[test]
fn c01_grammar_closure() {
    let start = std::time::Instant::now();
    let grammar = Grammar::standard();
    let deep = poisson_hierarchy(12, [1.0, 1.0, 1.0]);
    let shallow = poisson_hierarchy(3, [1.0, 1.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut pool = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let tree = grammar.random_derivation(20, &mut rng);
        let prog = grammar.genotype_to_program(&tree, &deep);
        validate_program(&prog, &deep).expect("random derivation decoded invalid");
        pool.push(tree);
    }
    for i in 0..10_000 {
        let a = &pool[i];
        let b = &pool[(i * 7 + 13) % pool.len()];
        let (ca, _) = grammar.crossover(a, b, &mut rng);
        let prog = grammar.genotype_to_program(&ca, &deep);
        validate_program(&prog, &deep).expect("crossover child decoded invalid");
        let prog_shallow = grammar.genotype_to_program(&ca, &shallow);
        validate_program(&prog_shallow, &shallow).expect("crossover child invalid when shallow");
    }
    for tree in pool.iter().take(10_000) {
        let m = grammar.mutate(tree, &mut rng);
        let prog = grammar.genotype_to_program(&m, &deep);
        validate_program(&prog, &deep).expect("mutant decoded invalid");
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "closure sweep took {elapsed:?}, budget is one minute"
    );
    println!("criterion 1 PASS: 30000 grammar operations, all programs valid ({elapsed:?})");
}

#[test]
fn c02_v_cycle_bitwise_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20 {
        let nd = rng.gen_range(3..=16);
        let c = [
            10f64.powf(rng.gen_range(-3.0..0.0)),
            10f64.powf(rng.gen_range(-3.0..0.0)),
            10f64.powf(rng.gen_range(-3.0..0.0)),
        ];
        let h = poisson_hierarchy(nd, c);
        let prog = reference_solver_program("default", &h).unwrap();
        let n = h.finest().a.nrows();
        let b = random_vector(n, 900 + case);
        let mut xa = random_vector(n, 1900 + case);
        let mut xb = xa.clone();
        for _ in 0..6 {
            xa = execute_cycle(&prog, &h, &xa, &b).unwrap();
            xb = standard_v_cycle(&h, h.top_level(), &xb, &b).unwrap();
            assert_eq!(xa, xb, "iterates diverged bitwise (nd={nd}, case={case})");
        }
    }
    println!("criterion 2 PASS: V(1,1) encoding matches the standard cycle bitwise on 20 problems");
}

fn fixed_point_problems() -> Vec<Hierarchy> {
    let mut out = Vec::new();
    for (nd, c) in [
        (4, [1.0, 1.0, 1.0]),
        (5, [1e-3, 1.0, 1.0]),
        (6, [1.0, 1e-2, 1.0]),
        (4, [1e-3, 1e-3, 1.0]),
        (5, [0.1, 1.0, 0.5]),
        (6, [1.0, 1.0, 1e-3]),
        (3, [1.0, 1.0, 1.0]),
        (5, [1.0, 0.03, 0.03]),
    ] {
        out.push(poisson_hierarchy(nd, c));
    }
    // Two surrogate time-step systems round out the set.
    for k in [1, 10] {
        let spec = TimestepSpec {
            nd: 5,
            ..TimestepSpec::default()
        };
        let a = build_timestep_matrix(&spec, k).unwrap();
        out.push(build_hierarchy(a, &HierarchyConfig::default()).unwrap());
    }
    out
}

#[test]
fn c03_fixed_point_preservation() {
    let grammar = Grammar::standard();
    let problems = fixed_point_problems();
    assert_eq!(problems.len(), 10);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for trial in 0..1000 {
        let tree = grammar.random_derivation(18, &mut rng);
        for (pi, h) in problems.iter().enumerate() {
            let prog = grammar.genotype_to_program(&tree, h);
            let n = h.finest().a.nrows();
            let xstar = random_vector(n, 5000 + trial * 16 + pi as u64);
            let b = h.finest().a.spmv(&xstar);
            let out = execute_cycle(&prog, h, &xstar, &b).unwrap();
            let drift: f64 = out
                .iter()
                .zip(&xstar)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let bound = 1e-10 * (1.0 + norm2(&xstar));
            assert!(
                drift <= bound,
                "fixed point drifted {drift} > {bound} (trial {trial}, problem {pi})"
            );
        }
    }
    println!("criterion 3 PASS: 1000 programs x 10 problems preserve the exact solution");
}

#[test]
fn c04_two_grid_oracle() {
    let h = poisson_hierarchy(3, [1.0, 1.0, 1.0]);
    assert_eq!(h.num_levels(), 2, "27-point problem should coarsen once");
    let n = h.finest().a.nrows();
    assert_eq!(n, 27);
    let smoother = SmootherSpec::hybrid(SmootherKind::Gsf, Ordering::Lex, 1.0, 1.0);
    let prog = FlexProgram::new(
        vec![
            Instr::Relax { level: 1, spec: smoother },
            Instr::Restrict { from_level: 1 },
            Instr::StdVSolve { level: 0 },
            Instr::CoarseCorrection { to_level: 1, alpha: 1.0 },
            Instr::Relax { level: 1, spec: smoother },
        ],
        1,
        0,
    );
    validate_program(&prog, &h).unwrap();
    let e_prog = assemble_iteration_matrix(&prog, &h).unwrap();

    // Dense oracle: S (I - P Ac^-1 R A) S built from scratch.
    let fine = h.level(1);
    let a = fine.a.to_dense();
    let p = fine.p.as_ref().unwrap().to_dense();
    let r = fine.r.as_ref().unwrap().to_dense();
    let ac = h.level(0).a.to_dense();
    let ac_lu = dense_lu_factor(&ac).unwrap();
    let s = smoother_error_operator(
        &fine.a,
        &smoother,
        &fine.partition,
        &fine.l1_diag,
        fine.cf.as_ref(),
    )
    .unwrap();
    let nc = ac.nrows();
    // Ac^{-1} column by column.
    let mut ac_inv = DenseMatrix::zeros(nc, nc);
    for j in 0..nc {
        let mut e = vec![0.0; nc];
        e[j] = 1.0;
        ac_inv.set_column(j, &ac_lu.solve(&e));
    }
    let cgc = DenseMatrix::identity(n).sub(&p.matmul(&ac_inv).matmul(&r).matmul(&a));
    let oracle = s.matmul(&cgc).matmul(&s);
    let diff = e_prog.sub(&oracle).max_abs();
    assert!(diff <= 1e-10, "two-grid operator deviates by {diff}");
    println!("criterion 4 PASS: flexible two-grid program matches the dense oracle to {diff:.2e}");
}

#[test]
fn c05_work_unit_model() {
    // Level-complexity coefficients, coarsest first; level 0 is the direct
    // solve and never smooths.
    let nnz = [
        2.0e-6, 1.2e-5, 9.5e-5, 7.2e-4, 7.7e-3, 6.5e-2, 3.2e-1, 9.5e-1, 1.9, 1.0,
    ];
    let top = nnz.len() - 1;
    let pre = flexamg::cycle::vcycle_pre_smoother();
    let post = flexamg::cycle::vcycle_post_smoother();
    // nu = 2 on every level: the plain V(1,1).
    let mut v11 = Vec::new();
    for l in (1..=top).rev() {
        v11.push(Instr::Relax { level: l, spec: pre });
        v11.push(Instr::Restrict { from_level: l });
    }
    v11.push(Instr::StdVSolve { level: 0 });
    for l in 1..=top {
        v11.push(Instr::CoarseCorrection { to_level: l, alpha: 1.0 });
        v11.push(Instr::Relax { level: l, spec: post });
    }
    let wu_v = work_units_with_nnz(&FlexProgram::new(v11, top, 0), &nnz);
    assert!(
        (wu_v - 8.5).abs() <= 0.05,
        "V(1,1) work units {wu_v} not within 8.5 +/- 0.05"
    );

    // The sweep profile that skips the most expensive level and doubles up on
    // the finest: nu_top = 4, nu_top-1 = 0, others 2.
    let mut gp = vec![
        Instr::Relax { level: top, spec: pre },
        Instr::Relax { level: top, spec: pre },
        Instr::Restrict { from_level: top },
        Instr::Restrict { from_level: top - 1 },
    ];
    for l in (1..=top - 2).rev() {
        gp.push(Instr::Relax { level: l, spec: pre });
        gp.push(Instr::Restrict { from_level: l });
    }
    gp.push(Instr::StdVSolve { level: 0 });
    for l in 1..=top - 2 {
        gp.push(Instr::CoarseCorrection { to_level: l, alpha: 1.0 });
        gp.push(Instr::Relax { level: l, spec: post });
    }
    gp.push(Instr::CoarseCorrection { to_level: top - 1, alpha: 1.0 });
    gp.push(Instr::CoarseCorrection { to_level: top, alpha: 1.0 });
    gp.push(Instr::Relax { level: top, spec: post });
    gp.push(Instr::Relax { level: top, spec: post });
    let wu_gp = work_units_with_nnz(&FlexProgram::new(gp, top, 0), &nnz);
    assert!(
        (wu_gp - 6.7).abs() <= 0.05,
        "reallocated-sweep work units {wu_gp} not within 6.7 +/- 0.05"
    );
    println!("criterion 5 PASS: work-unit model gives {wu_v:.3} and {wu_gp:.3}");
}

/// Measured asymptotic error-reduction rate: renormalized error propagation,
/// geometric mean over the last window of 200 iterations.
fn measured_rate(prog: &FlexProgram, h: &Hierarchy) -> f64 {
    let n = h.finest().a.nrows();
    let b = vec![0.0; n];
    let mut e = random_vector(n, 0xEE);
    let scale = norm2(&e);
    e.iter_mut().for_each(|v| *v /= scale);
    let mut ratios = Vec::with_capacity(200);
    for _ in 0..200 {
        let next = execute_cycle(prog, h, &e, &b).unwrap();
        let nn = norm2(&next);
        ratios.push(nn);
        if nn == 0.0 {
            return 0.0;
        }
        e = next;
        e.iter_mut().for_each(|v| *v /= nn);
    }
    let window = &ratios[150..];
    let log_mean: f64 = window.iter().map(|r| r.ln()).sum::<f64>() / window.len() as f64;
    log_mean.exp()
}

#[test]
fn c06_spectral_consistency() {
    // Analytic case first: unweighted Jacobi on the 3-point Laplacian.
    let a = SparseMatrix::from_dense_rows(&[
        vec![2.0, -1.0, 0.0],
        vec![-1.0, 2.0, -1.0],
        vec![0.0, -1.0, 2.0],
    ]);
    let part = flexamg::sparse::BlockPartition::even(3, 1);
    let l1 = flexamg::smoother::compute_l1_diagonal(&a, &part);
    let spec = SmootherSpec::jacobi(SmootherVariant::Weighted, Ordering::Lex, 1.0);
    let t = smoother_error_operator(&a, &spec, &part, &l1, None).unwrap();
    let est = spectral_radius(&t);
    let analytic = (std::f64::consts::PI / 4.0).cos();
    assert!(
        (est.value - analytic).abs() <= 1e-6,
        "Jacobi radius {} vs analytic {analytic}",
        est.value
    );

    // Default V(1,1) plus five random in-range programs on a 125-point grid.
    let h = poisson_hierarchy(5, [1.0, 1.0, 1.0]);
    let grammar = Grammar::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut candidates = vec![reference_solver_program("default", &h).unwrap()];
    while candidates.len() < 6 {
        let tree = grammar.random_derivation(14, &mut rng);
        let prog = grammar.genotype_to_program(&tree, &h);
        let e = assemble_iteration_matrix(&prog, &h).unwrap();
        let est = spectral_radius(&e);
        if est.converged && (0.05..=0.95).contains(&est.value) {
            candidates.push(prog);
        }
    }
    for (i, prog) in candidates.iter().enumerate() {
        let e = assemble_iteration_matrix(prog, &h).unwrap();
        let radius = spectral_radius(&e);
        assert!(
            (0.05..=0.95).contains(&radius.value) || i == 0,
            "candidate {i} radius {} left the band",
            radius.value
        );
        if !(0.05..=0.95).contains(&radius.value) {
            continue; // the default program may sit outside the band
        }
        let measured = measured_rate(prog, &h);
        let rel = (measured - radius.value).abs() / radius.value;
        assert!(
            rel <= 0.10,
            "program {i}: measured {measured} vs radius {} ({}% off)",
            radius.value,
            rel * 100.0
        );
    }
    println!("criterion 6 PASS: measured rates within 10% of spectral radii; Jacobi case to 1e-6");
}

#[test]
fn c07_rho_formula() {
    let rho = residual_rate(1.0, 1e-8, 8);
    assert!((rho - 0.1).abs() <= 1e-15, "rho formula gave {rho}");
    // And through solver bookkeeping on a real run.
    let h = poisson_hierarchy(6, [1.0, 1.0, 1.0]);
    let n = h.finest().a.nrows();
    let prog = reference_solver_program("default", &h).unwrap();
    let stats = run_solver(
        &prog,
        &h,
        &vec![0.0; n],
        &random_vector(n, 77),
        &SolveOptions::default(),
    )
    .unwrap();
    let expect = residual_rate(stats.history[0], *stats.history.last().unwrap(), stats.n);
    assert_eq!(stats.rho, expect);
    println!("criterion 7 PASS: (1e-8)^(1/8) = {rho} and solver bookkeeping agrees");
}

#[test]
fn c08_nsga_front_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for cloud in 0..100 {
        let pts: Vec<[f64; 2]> = (0..100)
            .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let fast = non_dominated_sort(&pts);
        let mut remaining: Vec<usize> = (0..pts.len()).collect();
        let mut oracle = Vec::new();
        while !remaining.is_empty() {
            let layer: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| j != i && dominates(&pts[j], &pts[i])))
                .collect();
            remaining.retain(|i| !layer.contains(i));
            oracle.push(layer);
        }
        assert_eq!(fast, oracle, "cloud {cloud} fronts diverged");
    }
    println!("criterion 8 PASS: fronts equal brute-force dominance sort on 100 clouds");
}

#[test]
fn c09_evolution_efficacy() {
    let grammar = Grammar::standard();
    let hier_cfg = HierarchyConfig::default();
    let problems = vec![ProblemSpec::desk_poisson().instantiate(&hier_cfg).unwrap()];
    let proxy = &problems[0];

    // Baseline: the default V(1,1) on the identical solve.
    let default_prog = reference_solver_program("default", &proxy.hierarchy).unwrap();
    let opts = SolveOptions {
        tol: proxy.tol,
        tol_mode: proxy.tol_mode,
        max_iter: 100,
    };
    let baseline = run_solver(&default_prog, &proxy.hierarchy, &proxy.b, &proxy.x0, &opts).unwrap();
    assert!(baseline.converged, "default must converge on the proxy");
    let target = 0.9 * baseline.wu_total;

    let mut wins = 0;
    let mut best_per_seed = Vec::new();
    for seed in 1..=5u64 {
        let params = EvoParams {
            workers: 2,
            ..EvoParams::desk(seed)
        };
        let result = evolve(&grammar, &problems, &params).unwrap();
        // Hypervolume must never regress across generations.
        for w in result.generations.windows(2) {
            assert!(
                w[1].hypervolume >= w[0].hypervolume - 1e-9,
                "hypervolume regressed at generation {} (seed {seed})",
                w[1].generation
            );
        }
        let best = result
            .front
            .iter()
            .map(|&i| &result.population[i])
            .filter(|ind| ind.meta.converged)
            .map(|ind| ind.meta.wu_total)
            .fold(f64::INFINITY, f64::min);
        best_per_seed.push(best);
        if best <= target {
            wins += 1;
        }
    }
    assert!(
        wins >= 4,
        "only {wins}/5 seeds beat the default by 10% (default {} WUs, best per seed {best_per_seed:?})",
        baseline.wu_total
    );
    println!(
        "criterion 9 PASS: {wins}/5 seeds beat the default ({:.1} WUs) by >=10%; best per seed {:?}",
        baseline.wu_total, best_per_seed
    );
}

#[test]
fn c10_preconditioner_efficacy() {
    let grammar = Grammar::standard();
    let hier_cfg = HierarchyConfig::default();
    let spec = ProblemSpec::Timestep {
        spec: TimestepSpec::default(),
        k: 1,
        tol: 1e-6,
        tol_mode: TolMode::Relative,
        mode: EvalMode::Pcg,
        guess_seed: 9001,
    };
    let problems = vec![spec.instantiate(&hier_cfg).unwrap()];
    let proxy = &problems[0];

    let default_prog = reference_solver_program("default", &proxy.hierarchy).unwrap();
    let precond = Preconditioner::Amg {
        program: &default_prog,
        hierarchy: &proxy.hierarchy,
    };
    let baseline = pcg(
        &proxy.hierarchy.finest().a,
        &proxy.b,
        &proxy.x0,
        &precond,
        proxy.tol,
        100,
    )
    .unwrap();
    assert!(baseline.stats.converged);

    let mut wins = 0;
    let mut best_per_seed = Vec::new();
    for seed in 1..=5u64 {
        let params = EvoParams {
            mu: 16,
            lambda: 16,
            rho0: 64,
            t_max: 10,
            seed,
            workers: 2,
            ..EvoParams::default()
        };
        let result = evolve(&grammar, &problems, &params).unwrap();
        let best_n = result
            .front
            .iter()
            .map(|&i| &result.population[i])
            .filter(|ind| ind.meta.converged)
            .map(|ind| ind.meta.n)
            .fold(f64::INFINITY, f64::min);
        best_per_seed.push(best_n);
        if best_n < baseline.stats.n as f64 {
            wins += 1;
        }
    }
    assert!(
        wins >= 4,
        "only {wins}/5 seeds beat the default preconditioner (default {} iters, best {best_per_seed:?})",
        baseline.stats.n
    );
    println!(
        "criterion 10 PASS: {wins}/5 seeds need fewer CG iterations than the default's {}; best {:?}",
        baseline.stats.n, best_per_seed
    );
}

#[test]
fn c11_hybrid_switching() {
    let spec = TimestepSpec::default();
    assert!(spec.decay < 1.0 && spec.k_max == 20 && spec.nd == 16);
    let hier_cfg = HierarchyConfig::default();
    let mut diag_iters = Vec::new();
    let mut etas = Vec::new();
    let mut switched = Vec::new();
    for k in 1..=spec.k_max {
        let a = build_timestep_matrix(&spec, k).unwrap();
        let n = a.nrows();
        etas.push(diagonal_dominance_ratio(&a));
        let b = random_vector(n, 7000 + k as u64);
        let diag = pcg(
            &a,
            &b,
            &vec![0.0; n],
            &Preconditioner::diagonal_of(&a),
            1e-6,
            5000,
        )
        .unwrap();
        assert!(diag.stats.converged, "diagonal CG failed at step {k}");
        diag_iters.push(diag.stats.n);

        let h = build_hierarchy(a.clone(), &hier_cfg).unwrap();
        let prog = reference_solver_program("default", &h).unwrap();
        let outcome = hybrid_solve(
            &a,
            &b,
            &prog,
            &hier_cfg,
            &HybridConfig::default(),
            1e-6,
            5000,
        )
        .unwrap();
        assert!(outcome.stats.converged, "hybrid failed at step {k}");
        switched.push(outcome.switched_at.is_some());
    }
    // Conditioning improves: diagonal dominance never decreases.
    for w in etas.windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "eta regressed: {w:?}");
    }
    // Diagonal-only iterations fall monotonically within +/- 1.
    for (k, w) in diag_iters.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] + 1,
            "diagonal iterations rose from {} to {} at step {}",
            w[0],
            w[1],
            k + 2
        );
    }
    assert!(switched[0], "the first (hardest) step must engage AMG");
    let last_switch = switched.iter().rposition(|&s| s).unwrap();
    assert!(
        last_switch + 1 < spec.k_max,
        "switching never stopped within the sequence"
    );
    println!(
        "criterion 11 PASS: AMG engaged through step {}, diagonal-only N fell {} -> {}",
        last_switch + 1,
        diag_iters.first().unwrap(),
        diag_iters.last().unwrap()
    );
}

#[test]
fn c12_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_flexamg");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    let cfg = serde_json::json!({
        "evo": {
            "mu": 8, "lambda": 8, "rho0": 16, "pc": 0.7, "t_max": 2,
            "seed": 0, "init_max_chain": 12, "fitness_mode": "work_units",
            "workers": 1, "max_iter": 40
        },
        "grammar": { "n_flex": 5, "include_zero_weight": false },
        "hierarchy": { "theta": 0.25, "coarse_size_max": 16, "partition_blocks": 8, "seed": 0 },
        "problems": [ { "kind": "poisson", "nd": 8, "c": [1e-3, 1.0, 1.0] } ]
    });
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    let run_evolve = |out: &std::path::Path| {
        let status = std::process::Command::new(bin)
            .args([
                "--seed",
                "7",
                "--workers",
                "2",
                "--config",
                cfg_path.to_str().unwrap(),
                "evolve",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    run_evolve(&out1);
    run_evolve(&out2);
    let mut names: Vec<String> = std::fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"generations.jsonl".to_string()));
    assert!(names.contains(&"pareto.csv".to_string()));
    for name in &names {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "output file {name} differs between identical runs");
    }

    let run_eval = || {
        let out = std::process::Command::new(bin)
            .args([
                "--seed",
                "5",
                "eval",
                "--solver",
                "tuned6",
                "--problem",
                "poisson:8:1e-3,1,1",
                "--tol",
                "1e-8",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run_eval(), run_eval(), "eval output differs between runs");
    println!(
        "criterion 12 PASS: {} evolve outputs and eval stdout byte-identical across reruns",
        names.len()
    );
}
