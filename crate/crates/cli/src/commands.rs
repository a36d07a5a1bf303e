use kdvb::illposedness::{inflation_experiment, IllposednessError, InflationSettings};
use kdvb::io::{write_snapshot, write_snapshot_preamble, RunHeader};
use kdvb::multiplier::{verify_block_sweep, verify_weighted, EstimateSettings, MultiplierError, SweepSettings};
use kdvb::norms::sobolev_norm;
use kdvb::quadrature::QuadratureError;
use kdvb::solver::{picard_iterate, solve, tail_mass, SolverConfig, SolverError, StepperKind};
use kdvb::symbols::{free_group_u, semigroup_w};
use serde::Serialize;

use crate::config::{ExperimentConfig, MultiplierMode};
use crate::output::{num, Outputs, Table};
use crate::{CliError, Command};

/// Relative slack allowed in the step-to-step energy comparison.
const ENERGY_SLACK: f64 = 1e-9;

fn solver_error(e: SolverError) -> CliError {
    match e {
        SolverError::BlowUp { .. } | SolverError::Divergence { .. } => CliError::Numerical(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn illposedness_error(e: IllposednessError) -> CliError {
    match e {
        IllposednessError::Quadrature(QuadratureError::NoConvergence { .. }) => CliError::Invariant(e.to_string()),
        IllposednessError::Quadrature(_) => CliError::Numerical(e.to_string()),
        IllposednessError::Solver(s) => solver_error(s),
        _ => CliError::Usage(e.to_string()),
    }
}

fn multiplier_error(e: MultiplierError) -> CliError {
    CliError::Usage(e.to_string())
}

fn outputs(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let header = RunHeader::new(cfg.canonical(), cfg.digest(), cfg.seed);
    Outputs::create(&cfg.out, header, cfg.format)
}

pub fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    match command {
        Command::Solve { .. } => cmd_solve(cfg),
        Command::Picard { .. } => cmd_picard(cfg),
        Command::Inflate { .. } => cmd_inflate(cfg),
        Command::Multiplier { .. } => match cfg.multiplier.mode {
            MultiplierMode::Blocks => cmd_blocks(cfg),
            MultiplierMode::Weighted => cmd_weighted(cfg),
        },
        Command::Norms => cmd_norms(cfg),
    }
}

#[derive(Serialize)]
struct SolveRow {
    t: f64,
    h0_norm: f64,
    hs_norm: f64,
    energy: f64,
    dissipation_rate: f64,
}

#[derive(Serialize)]
struct SolveReport {
    rows: Vec<SolveRow>,
    /// Largest relative residual of the energy law over the stored times.
    max_energy_residual: Option<f64>,
    energy_nonincreasing: bool,
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let phi = cfg.data.build(grid, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let traj = solve(&phi, &cfg.equation, &cfg.solver).map_err(solver_error)?;

    let energies = traj.energies();
    let rates = traj.dissipation_rates();
    let h0 = traj.sobolev_norms(0.0);
    let hs = traj.sobolev_norms(cfg.equation.s);
    let rows: Vec<SolveRow> = (0..traj.len())
        .map(|j| SolveRow {
            t: traj.times()[j],
            h0_norm: h0[j],
            hs_norm: hs[j],
            energy: energies[j],
            dissipation_rate: rates[j],
        })
        .collect();
    let residuals = traj.energy_law_residuals();
    let max_energy_residual = residuals.iter().map(|r| r.1).reduce(f64::max);
    let energy_nonincreasing = energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + ENERGY_SLACK));
    let report = SolveReport {
        rows,
        max_energy_residual,
        energy_nonincreasing,
    };

    let out = outputs(cfg)?;
    let mut table = Table::new(&["t", "h0_norm", "hs_norm", "energy", "dissipation_rate"]);
    for r in &report.rows {
        table.push(vec![num(r.t), num(r.h0_norm), num(r.hs_norm), num(r.energy), num(r.dissipation_rate)]);
    }
    let path = out.report("trajectory", &table, &report)?;
    let meta = out.header.lines().join("\n") + "\n";
    let snaps = out.binary("snapshots.bin", |w| {
        write_snapshot_preamble(w, &meta)?;
        for (&t, u) in traj.times().iter().zip(traj.states()) {
            write_snapshot(w, t, u)?;
        }
        Ok(())
    })?;
    let plot: Vec<Vec<f64>> = report.rows.iter().map(|r| vec![r.t, r.energy]).collect();
    out.plot("energy.dat", &["t", "energy"], &plot)?;

    println!("wrote {} and {}", path.display(), snaps.display());
    match report.max_energy_residual {
        Some(r) => println!("max energy-law residual {r:.3e} over {} stored times", traj.len()),
        None => println!("too few stored times for the energy-law residual"),
    }
    println!(
        "energy nonincreasing: {}",
        if report.energy_nonincreasing { "yes" } else { "no" }
    );
    if report.energy_nonincreasing {
        Ok(())
    } else {
        Err(CliError::Invariant("energy increased between stored times".into()))
    }
}

#[derive(Serialize)]
struct PicardReport {
    iterations: usize,
    distances: Vec<f64>,
    contraction_ratios: Vec<f64>,
    /// `‖u_Picard(T) - u_stepper(T)‖_{H⁰}`.
    stepper_distance: f64,
}

pub fn cmd_picard(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let phi = cfg.data.build(grid, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let k = cfg.solver.picard_iterations;
    let run = picard_iterate(&phi, cfg.solver.t_final, k, &cfg.equation, &cfg.solver).map_err(solver_error)?;
    let stepper_cfg = SolverConfig {
        stepper: StepperKind::Exponential,
        ..cfg.solver
    };
    let reference = solve(&phi, &cfg.equation, &stepper_cfg).map_err(solver_error)?;
    let last = |t: &kdvb::solver::Trajectory| t.last().map(|(_, u)| u.clone()).expect("nonempty trajectory");
    let stepper_distance = sobolev_norm(&last(&run.trajectory).sub(&last(&reference)), 0.0);
    let report = PicardReport {
        iterations: k,
        contraction_ratios: run.contraction_ratios(),
        distances: run.distances,
        stepper_distance,
    };

    let out = outputs(cfg)?;
    let mut table = Table::new(&["iterate", "distance", "ratio"]);
    for (j, d) in report.distances.iter().enumerate() {
        let ratio = if j == 0 { String::new() } else { num(report.contraction_ratios[j - 1]) };
        table.push(vec![(j + 1).to_string(), num(*d), ratio]);
    }
    let path = out.report("picard", &table, &report)?;
    println!("wrote {}", path.display());
    for (j, d) in report.distances.iter().enumerate() {
        println!("iterate {}: distance {d:.3e}", j + 1);
    }
    println!("distance to the exponential stepper at T: {stepper_distance:.3e}");
    Ok(())
}

pub fn cmd_inflate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let settings = InflationSettings {
        s: cfg.equation.s,
        alpha: cfg.equation.alpha,
        t: cfg.inflate.t,
        quad: cfg.inflate.quad,
    };
    let grid = cfg.grid.map(|_| cfg.grid()).transpose()?;
    let report = inflation_experiment(&settings, &cfg.inflate.n_list(), grid).map_err(illposedness_error)?;

    let out = outputs(cfg)?;
    let mut table = Table::new(&["n", "phi_norm", "restricted", "full", "lower_bound", "ratio"]);
    for r in &report.rows {
        table.push(vec![
            num(r.n),
            num(r.phi_norm),
            num(r.restricted),
            num(r.full),
            num(r.lower_bound),
            num(r.ratio()),
        ]);
    }
    let path = out.report("inflation", &table, &report)?;
    let plot: Vec<Vec<f64>> = report.rows.iter().map(|r| vec![r.n, r.restricted]).collect();
    out.plot("inflation.dat", &["N", "restricted_norm"], &plot)?;

    println!("wrote {}", path.display());
    println!("log-log slope of the restricted norm: {:.4}", report.slope);
    println!("log-log slope of norm / |phi|^2: {:.4}", report.ratio_slope);
    println!("bounded ratio: {}", report.bounded_ratio);
    if report.alpha_out_of_scope {
        println!("note: alpha = {} is outside [1/2, 1]", settings.alpha);
    }
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "restricted norm below the lower bound at N = {:?}",
            report.violations
        )))
    }
}

fn estimate_settings(cfg: &ExperimentConfig) -> EstimateSettings {
    EstimateSettings {
        seed: cfg.seed,
        ..cfg.multiplier.estimate
    }
}

pub fn cmd_blocks(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let m = &cfg.multiplier;
    let settings = SweepSettings {
        alpha: cfg.equation.alpha,
        beta: cfg.equation.beta,
        ranges: m.ranges,
        resolution: m.resolution,
        cells: m.cells,
        estimate: estimate_settings(cfg),
    };
    let report = verify_block_sweep(&settings).map_err(multiplier_error)?;

    let out = outputs(cfg)?;
    let mut table = Table::new(&[
        "n1", "n2", "n3", "h", "l1", "l2", "l3", "case", "support", "lower", "upper", "bound", "ratio",
    ]);
    for r in &report.rows {
        let b = &r.block;
        let mut row: Vec<String> = b.n.iter().map(|d| num(d.value())).collect();
        row.push(num(b.h.value()));
        row.extend(b.l.iter().map(|d| num(d.value())));
        row.push(format!("{:?}", r.case));
        row.push(r.support.to_string());
        row.extend([num(r.lower), num(r.upper), num(r.bound), num(r.ratio())]);
        table.push(row);
    }
    let path = out.report("blocks", &table, &report)?;

    let over: Vec<_> = report.rows.iter().filter(|r| r.lower > m.c_max * r.bound).collect();
    println!("wrote {}", path.display());
    println!(
        "{} admissible blocks ({} with lattice support), {} inadmissible",
        report.admissible_blocks,
        report.rows.len(),
        report.inadmissible_blocks
    );
    println!("fitted C = {:.4}", report.fitted_c);
    println!(
        "slope of log C against log N_max {:.4}, against log L_max {:.4}",
        report.slope_n_max, report.slope_l_max
    );
    if !report.violations.is_empty() {
        return Err(CliError::Invariant(format!(
            "{} inadmissible blocks have lattice support",
            report.violations.len()
        )));
    }
    if !over.is_empty() {
        return Err(CliError::Invariant(format!(
            "{} blocks exceed C_max = {} times the predicted bound",
            over.len(),
            m.c_max
        )));
    }
    Ok(())
}

pub fn cmd_weighted(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let m = &cfg.multiplier;
    let report =
        verify_weighted(&cfg.equation, &m.sizes, m.dtau, m.dxi, &estimate_settings(cfg)).map_err(multiplier_error)?;

    let out = outputs(cfg)?;
    let mut table = Table::new(&["points", "lower", "upper", "converged"]);
    for r in &report.rows {
        table.push(vec![r.points.to_string(), num(r.lower), num(r.upper), r.converged.to_string()]);
    }
    let path = out.report("weighted", &table, &report)?;
    println!("wrote {}", path.display());
    for r in &report.rows {
        println!("{:>5} points: [{:.4}, {:.4}]", r.points, r.lower, r.upper);
    }
    println!("final / penultimate = {:.4}", report.final_ratio);
    if report.final_ratio > m.max_final_ratio {
        return Err(CliError::Invariant(format!(
            "estimates grow: final ratio {:.4} > {}",
            report.final_ratio, m.max_final_ratio
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct NormRow {
    s: f64,
    initial: f64,
    dissipative: f64,
    free: f64,
}

#[derive(Serialize)]
struct NormsReport {
    t: f64,
    rows: Vec<NormRow>,
    tail_cut: f64,
    initial_tail: f64,
    dissipative_tail: f64,
}

pub fn cmd_norms(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let phi = cfg.data.build(grid, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = &cfg.norms;
    if !(spec.t.is_finite() && spec.t >= 0.0) {
        return Err(CliError::Usage(format!("norms: t must be nonnegative, got {}", spec.t)));
    }
    let w = semigroup_w(spec.t, &phi, cfg.equation.alpha);
    let u = free_group_u(spec.t, &phi);
    let report = NormsReport {
        t: spec.t,
        rows: spec
            .s_list
            .iter()
            .map(|&s| NormRow {
                s,
                initial: sobolev_norm(&phi, s),
                dissipative: sobolev_norm(&w, s),
                free: sobolev_norm(&u, s),
            })
            .collect(),
        tail_cut: spec.tail_cut,
        initial_tail: tail_mass(&phi, spec.tail_cut).sqrt(),
        dissipative_tail: tail_mass(&w, spec.tail_cut).sqrt(),
    };

    let out = outputs(cfg)?;
    let mut table = Table::new(&["s", "initial", "dissipative", "free"]);
    for r in &report.rows {
        table.push(vec![num(r.s), num(r.initial), num(r.dissipative), num(r.free)]);
    }
    let path = out.report("norms", &table, &report)?;
    println!("wrote {}", path.display());
    for r in &report.rows {
        println!(
            "s = {:>6}: |phi| {:.6e}  |W(t)phi| {:.6e}  |U(t)phi| {:.6e}",
            r.s, r.initial, r.dissipative, r.free
        );
    }
    Ok(())
}
