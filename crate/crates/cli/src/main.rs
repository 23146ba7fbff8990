//! Command-line driver: parses a `key = value` configuration, runs one of
//! the laboratory commands, and writes deterministic CSV outputs plus a run
//! manifest. Exit codes: 0 success, 2 configuration error, 3 numerical
//! failure, 4 invariant violation.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chemotax_lv_core::acceptance::run_all;
use chemotax_lv_core::continuation::{continue_branch, deviation_norms};
use chemotax_lv_core::model::{classify_competition, equilibria};
use chemotax_lv_core::shadow::{
    layer_solve, shadow_equilibrium, shadow_limit_check, shadow_linearization_spectrum,
    solve_pinned_eps, ShadowParams,
};
use chemotax_lv_core::sim::{simulate, Grid1D, SimError, State};
use chemotax_lv_core::stability::{chi_k, chi_threshold, growth_rate};

use config::{parse_config, RunConfig};
use output::{csv, fmt_f64, write_atomic, Manifest};

#[derive(Parser)]
#[command(name = "chemotax-lv", version, about = "Numerical laboratory for a \
two-species competition system with chemotaxis-type advection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $CHEMOTAX_LV_OUT, then the current dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random initial perturbations (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Constant steady states and the competition regime.
    Equilibria,
    /// Per-mode bifurcation values and growth rates.
    Stability,
    /// Time integration from a seeded random perturbation.
    Simulate,
    /// Steady-state branch continuation in chi.
    Continue,
    /// Shadow-system branch sweep in eps at pinned amplitudes.
    ShadowBranch,
    /// Singular transition-layer solve.
    Layer,
    /// Shadow-limit convergence table over a D1 sweep.
    VerifyShadowLimit,
    /// The full acceptance suite.
    VerifyAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Equilibria => "equilibria",
            Command::Stability => "stability",
            Command::Simulate => "simulate",
            Command::Continue => "continue",
            Command::ShadowBranch => "shadow-branch",
            Command::Layer => "layer",
            Command::VerifyShadowLimit => "verify-shadow-limit",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// Failure classes mapped to exit codes.
enum AppError {
    Config(String),
    Numerical(String),
    Invariant(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Invariant(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Numerical(m) | AppError::Invariant(m) => m,
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Numerical(e.to_string())
}

/// Everything a command produced, folded into the manifest at the end.
#[derive(Default)]
struct RunArtifacts {
    outputs: Vec<PathBuf>,
    invariants: Vec<(String, bool)>,
    notes: Vec<String>,
}

fn io_err(e: std::io::Error) -> AppError {
    AppError::Numerical(format!("i/o error: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("CHEMOTAX_LV_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output directory {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            // Malformed config: nothing is written except an error manifest.
            eprintln!("error: {}", e.message());
            let manifest = Manifest {
                command: cli.command.name().into(),
                config_echo: Vec::new(),
                warnings: Vec::new(),
                outputs: Vec::new(),
                invariants: vec![("config".into(), false)],
                notes: vec![format!("error: {}", e.message())],
                wall_time: started.elapsed(),
            };
            let _ = manifest.write(&out_dir);
            return ExitCode::from(e.code());
        }
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }

    let result = match cli.command {
        Command::Equilibria => cmd_equilibria(&cfg, &out_dir),
        Command::Stability => cmd_stability(&cfg, &out_dir),
        Command::Simulate => cmd_simulate(&cfg, &out_dir),
        Command::Continue => cmd_continue(&cfg, &out_dir),
        Command::ShadowBranch => cmd_shadow_branch(&cfg, &out_dir),
        Command::Layer => cmd_layer(&cfg, &out_dir),
        Command::VerifyShadowLimit => cmd_verify_shadow_limit(&cfg, &out_dir),
        Command::VerifyAll => cmd_verify_all(&cfg, &out_dir),
    };

    let (artifacts, exit) = match result {
        Ok(a) => (a, ExitCode::SUCCESS),
        Err(e) => {
            eprintln!("error: {}", e.message());
            let mut a = RunArtifacts::default();
            a.notes.push(format!("error: {}", e.message()));
            a.invariants.push(("run".into(), false));
            (a, ExitCode::from(e.code()))
        }
    };
    let manifest = Manifest {
        command: cli.command.name().into(),
        config_echo: cfg.echo(),
        warnings: cfg.warnings.clone(),
        outputs: artifacts.outputs,
        invariants: artifacts.invariants,
        notes: artifacts.notes,
        wall_time: started.elapsed(),
    };
    if let Err(e) = manifest.write(&out_dir) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(3);
    }
    exit
}

fn load_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| AppError::Config(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_equilibria(cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let eq = equilibria(&cfg.model).map_err(numerical)?;
    let regime = classify_competition(&cfg.model).map_err(numerical)?;
    let mut rows = vec![vec![
        "trivial".to_string(),
        fmt_f64(eq.trivial.0),
        fmt_f64(eq.trivial.1),
    ]];
    if let Some((u, v)) = eq.semitrivial_u {
        rows.push(vec!["semitrivial_u".into(), fmt_f64(u), fmt_f64(v)]);
    }
    if let Some((u, v)) = eq.semitrivial_v {
        rows.push(vec!["semitrivial_v".into(), fmt_f64(u), fmt_f64(v)]);
    }
    rows.push(vec![
        "coexistence".into(),
        fmt_f64(eq.coexistence.0),
        fmt_f64(eq.coexistence.1),
    ]);
    let path = write_atomic(out, "equilibria.csv", &csv(&["name", "u", "v"], &rows))
        .map_err(io_err)?;
    Ok(RunArtifacts {
        outputs: vec![path],
        invariants: Vec::new(),
        notes: vec![format!("competition_regime = {regime:?}")],
    })
}

fn cmd_stability(cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let p = &cfg.model;
    let mut rows = Vec::new();
    for k in 1..=cfg.stability_k_max {
        let bp = chi_k(p, k).map_err(numerical)?;
        let eig = growth_rate(p, k).map_err(numerical)?;
        rows.push(vec![
            k.to_string(),
            fmt_f64(bp.chi_k),
            fmt_f64(bp.q_k),
            bp.feasible.to_string(),
            fmt_f64(eig[0].0),
            fmt_f64(eig[0].1),
            fmt_f64(eig[1].0),
            fmt_f64(eig[1].1),
        ]);
    }
    let header = [
        "k",
        "chi_k",
        "q_k",
        "feasible",
        "re_lambda_plus",
        "im_lambda_plus",
        "re_lambda_minus",
        "im_lambda_minus",
    ];
    let path = write_atomic(out, "stability.csv", &csv(&header, &rows)).map_err(io_err)?;
    let note = match chi_threshold(p, cfg.stability_k_max.max(64)) {
        Ok((chi0, k0)) => format!("chi_0 = {}, k_0 = {k0}", fmt_f64(chi0)),
        Err(e) => format!("no instability threshold: {e}"),
    };
    Ok(RunArtifacts { outputs: vec![path], invariants: Vec::new(), notes: vec![note] })
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let p = &cfg.model;
    let grid = Grid1D::new(cfg.grid_n, p.l);
    let (u_bar, v_bar) = p.coexistence().map_err(numerical)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = State::constant(&grid, u_bar, v_bar);
    for j in 0..grid.n {
        init.u[j] *= 1.0 + cfg.perturbation * rng.gen_range(-1.0..1.0);
        init.v[j] *= 1.0 + cfg.perturbation * rng.gen_range(-1.0..1.0);
    }
    let modes = [1usize, 2, 3];
    let (final_state, diags) =
        match simulate(p, init, &grid, cfg.t_end, cfg.dt, cfg.snapshot_every, &modes) {
            Ok(r) => r,
            Err(SimError::InvariantViolation { .. }) => {
                return Err(AppError::Invariant("a-priori bound monitor tripped".into()))
            }
            Err(e) => return Err(numerical(e)),
        };

    let state_rows: Vec<Vec<String>> = (0..grid.n)
        .map(|j| {
            vec![
                fmt_f64(final_state.t),
                fmt_f64(grid.node(j)),
                fmt_f64(final_state.u[j]),
                fmt_f64(final_state.v[j]),
            ]
        })
        .collect();
    let state_path =
        write_atomic(out, "state.csv", &csv(&["t", "x", "u", "v"], &state_rows)).map_err(io_err)?;

    let diag_rows: Vec<Vec<String>> = diags
        .iter()
        .map(|d| {
            let mut row = vec![
                fmt_f64(d.t),
                fmt_f64(d.mass_u),
                fmt_f64(d.sup_v),
                fmt_f64(d.steady_residual_norm),
            ];
            row.extend(d.mode_amplitudes.iter().map(|&a| fmt_f64(a)));
            row
        })
        .collect();
    let diag_header = ["t", "mass_u", "sup_v", "residual", "amp_k1", "amp_k2", "amp_k3"];
    let diag_path =
        write_atomic(out, "diagnostics.csv", &csv(&diag_header, &diag_rows)).map_err(io_err)?;

    Ok(RunArtifacts {
        outputs: vec![state_path, diag_path],
        invariants: vec![("monitors".into(), true)],
        notes: vec![format!("snapshots = {}", diags.len())],
    })
}

fn cmd_continue(cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let p = &cfg.model;
    let grid = Grid1D::new(cfg.grid_n, p.l);
    let k = cfg.cont.k;
    let bp = chi_k(p, k).map_err(numerical)?;
    let lo = cfg.cont.chi_lo.unwrap_or(0.95 * bp.chi_k);
    let hi = cfg.cont.chi_hi.unwrap_or(1.1 * bp.chi_k);
    let branch = continue_branch(p, &grid, k, (lo, hi), cfg.cont.ds).map_err(numerical)?;
    let mut rows = Vec::new();
    for pt in &branch.points {
        let mut pp = *p;
        pp.chi = pt.chi;
        let (nu, nv) = deviation_norms(&pt.state, &pp, &grid).map_err(numerical)?;
        rows.push(vec![
            fmt_f64(pt.chi),
            fmt_f64(pt.amplitude),
            pt.stable.to_string(),
            fmt_f64(pt.residual),
            fmt_f64(nu),
            fmt_f64(nv),
        ]);
    }
    let header = ["chi", "amplitude", "stable", "residual", "norm_u", "norm_v"];
    let path = write_atomic(out, "branch.csv", &csv(&header, &rows)).map_err(io_err)?;
    Ok(RunArtifacts {
        outputs: vec![path],
        invariants: Vec::new(),
        notes: vec![
            format!("chi_k = {}", fmt_f64(bp.chi_k)),
            format!("points = {}, folds = {}", branch.points.len(), branch.fold_indices.len()),
        ],
    })
}

fn shadow_params_from(cfg: &RunConfig, eps: f64) -> ShadowParams {
    let m = &cfg.model;
    ShadowParams {
        a1: m.a1,
        a2: m.a2,
        b1: m.b1,
        b2: m.b2,
        c1: m.c1,
        c2: m.c2,
        r: cfg.shadow.r,
        eps,
        l: m.l,
        sensitivity: m.sensitivity,
    }
}

fn cmd_shadow_branch(cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let sp = shadow_params_from(cfg, cfg.shadow.eps);
    let grid = sp.grid(cfg.shadow.grid_n);
    let (v_bar, lambda_bar) = shadow_equilibrium(&sp).map_err(numerical)?;
    let u_bar = lambda_bar * (-sp.r * sp.sensitivity.big_phi(v_bar)).exp();
    let n_mode = cfg.shadow.n_mode;
    let mut rows = Vec::new();
    let mut s = cfg.shadow.ds;
    let mut guessed = 0usize;
    while s <= cfg.shadow.s_max + 1e-12 {
        let (st, eps_s) = solve_pinned_eps(&sp, &grid, n_mode, s).map_err(numerical)?;
        let sp_at = ShadowParams { eps: eps_s, ..sp };
        let (pde_norm, cons) = st.residuals(&sp_at);
        let stable = shadow_linearization_spectrum(&st, &sp_at, 1)[0].0 < 1e-8;
        let norm_v = st
            .v
            .iter()
            .map(|&v| (v - v_bar).abs())
            .fold(0.0f64, f64::max);
        let norm_u = st
            .v
            .iter()
            .map(|&v| {
                (st.lambda * (-sp.r * sp.sensitivity.big_phi(v)).exp() - u_bar).abs()
            })
            .fold(0.0f64, f64::max);
        rows.push(vec![
            fmt_f64(eps_s),
            fmt_f64(s),
            stable.to_string(),
            fmt_f64(pde_norm.max(cons.abs())),
            fmt_f64(norm_u),
            fmt_f64(norm_v),
        ]);
        guessed += 1;
        s += cfg.shadow.ds;
    }
    let header = ["eps", "amplitude", "stable", "residual", "norm_u", "norm_v"];
    let path = write_atomic(out, "shadow_branch.csv", &csv(&header, &rows)).map_err(io_err)?;
    Ok(RunArtifacts {
        outputs: vec![path],
        invariants: Vec::new(),
        notes: vec![format!("points = {guessed}, mode = {n_mode}")],
    })
}

fn cmd_layer(cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let sp = shadow_params_from(cfg, cfg.layer.eps);
    let (st, report) = layer_solve(&sp, cfg.layer.v_bar2).map_err(numerical)?;
    let grid = sp.grid(st.v.len());
    let rows: Vec<Vec<String>> = st
        .v
        .iter()
        .enumerate()
        .map(|(j, &v)| vec![fmt_f64(grid.node(j)), fmt_f64(v)])
        .collect();
    let path = write_atomic(out, "layer.csv", &csv(&["x", "v"], &rows)).map_err(io_err)?;
    Ok(RunArtifacts {
        outputs: vec![path],
        invariants: Vec::new(),
        notes: vec![
            format!("lambda_eps = {}", fmt_f64(report.lambda_eps)),
            format!("lambda_star = {}", fmt_f64(report.lambda_star)),
            format!("x0_predicted = {}", fmt_f64(report.x0_predicted)),
            format!("x0_measured = {}", fmt_f64(report.x0_measured)),
            format!("eps = {}", fmt_f64(cfg.layer.eps)),
            format!("v_bar2 = {}", fmt_f64(cfg.layer.v_bar2)),
        ],
    })
}

fn cmd_verify_shadow_limit(cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let grid = Grid1D::new(cfg.shadow.grid_n, cfg.model.l);
    let rows_data = shadow_limit_check(
        &cfg.model,
        cfg.shadow.r,
        &cfg.shadow.d1_list,
        &grid,
        cfg.shadow.t_end,
        cfg.shadow.dt,
        cfg.shadow.perturbation,
    )
    .map_err(numerical)?;
    let rows: Vec<Vec<String>> = rows_data
        .iter()
        .map(|r| vec![fmt_f64(r.d1), fmt_f64(r.osc_w), fmt_f64(r.v_distance)])
        .collect();
    let path = write_atomic(out, "shadow_limit.csv", &csv(&["d1", "osc_w", "v_distance"], &rows))
        .map_err(io_err)?;
    let decreasing = rows_data.windows(2).all(|w| w[1].osc_w < w[0].osc_w);
    let note = format!(
        "final osc(u e^(r Phi(v))) = {}",
        fmt_f64(rows_data.last().map(|r| r.osc_w).unwrap_or(f64::NAN))
    );
    let artifacts = RunArtifacts {
        outputs: vec![path],
        invariants: vec![("osc_decreasing".into(), decreasing)],
        notes: vec![note],
    };
    if !decreasing {
        return Err(AppError::Invariant(
            "oscillation of u e^(r Phi(v)) is not decreasing along the D1 sweep".into(),
        ));
    }
    Ok(artifacts)
}

fn cmd_verify_all(_cfg: &RunConfig, out: &Path) -> Result<RunArtifacts, AppError> {
    let results = run_all();
    for r in &results {
        println!("{}", r.summary_line());
    }
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.name.to_string(),
                r.pass.to_string(),
                format!("{:.3}", r.seconds),
            ]
        })
        .collect();
    let path = write_atomic(out, "acceptance.csv", &csv(&["index", "name", "pass", "seconds"], &rows))
        .map_err(io_err)?;
    let invariants: Vec<(String, bool)> =
        results.iter().map(|r| (r.name.to_string(), r.pass)).collect();
    let notes: Vec<String> = results.iter().map(|r| r.summary_line()).collect();
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    if !failed.is_empty() {
        return Err(AppError::Invariant(format!("failed criteria: {}", failed.join(", "))));
    }
    Ok(RunArtifacts { outputs: vec![path], invariants, notes })
}
