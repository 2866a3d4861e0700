//! Command-line front end: assemble network operators, run single solves,
//! and launch the prebuilt convergence studies.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use netpdae::assembly::{assemble, Loads, MeshParams};
use netpdae::experiments::{
    eps_order_csv, modal_decay_csv, modal_decay_samples_csv, oracle_comparison_csv, run_convergence_eps,
    run_convergence_tau, run_eps_order_study, run_oracle_comparison, tau_study_csv, EpsOrderConfig,
    ModalDecayConfig, OracleComparisonConfig, TauStudyConfig,
};
use netpdae::network::{builtin, Network, NetworkConfig, Scenario, BUILTIN_NAMES};
use netpdae::sparse::write_matrix_market;
use netpdae::stepping::{initial_state, make_stepper, ModelForm, RunConfig, Trajectory};
use netpdae::tableau::TABLEAU_NAMES;

#[derive(Parser)]
#[command(
    name = "netpdae",
    version,
    about = "Damped wave systems on networks: parabolic-limit solvers, a stiff reference solver, and convergence studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the finite-element operators and report their shape
    Assemble(AssembleArgs),
    /// Run one solver and write the trajectory as CSV
    Solve(SolveArgs),
    /// Time-step refinement of the limit solvers against a stiff reference
    ConvTau(ConvTauArgs),
    /// Mode-exact decay-exponent study on mesh sequences of a single pipe
    ConvEps(ConvEpsArgs),
    /// Relaxation-parameter order study at fixed time step
    EpsOrder(EpsOrderArgs),
    /// Compare the stiff solver against the closed-form mode series
    OracleCheck(OracleArgs),
}

/// Loads a builtin network by name or a JSON network configuration by path.
fn load_network(spec: &str) -> Result<(Network, Scenario)> {
    if BUILTIN_NAMES.contains(&spec) {
        return Ok(builtin(spec)?);
    }
    if !Path::new(spec).exists() {
        bail!(
            "'{spec}' is neither a builtin network ({}) nor an existing file",
            BUILTIN_NAMES.join(", ")
        );
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading network config {spec}"))?;
    let cfg: NetworkConfig = serde_json::from_str(&text).with_context(|| format!("parsing network config {spec}"))?;
    Ok(cfg.build()?)
}

fn write_output(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Writes a small matplotlib script that plots a study CSV on log-log axes.
fn write_plot_script(path: &Path, csv_name: &str, x_label: &str, y_label: &str) -> Result<()> {
    let script = format!(
        r##"#!/usr/bin/env python3
"""Log-log plot of {csv}."""
import csv
import matplotlib.pyplot as plt

with open("{csv}") as f:
    rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
header, data = rows[0], rows[1:]
cols = {{name: [float(r[i]) for r in data] for i, name in enumerate(header)}}
x = cols[header[0]]
fig, ax = plt.subplots(figsize=(6, 4.5))
for name in header[1:]:
    ax.loglog(x, cols[name], marker="o", markersize=3, label=name)
ax.set_xlabel("{xl}")
ax.set_ylabel("{yl}")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
out = "{csv}".rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=160)
print("saved", out)
"##,
        csv = csv_name,
        xl = x_label,
        yl = y_label,
    );
    write_output(path, &script)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
struct AssembleArgs {
    /// Builtin network name or path to a JSON network configuration
    #[arg(long, default_value = "demo-network")]
    network: String,
    #[arg(long, default_value_t = 10)]
    elements_per_edge: usize,
    /// Directory to write the assembled matrices in Matrix Market format
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

fn cmd_assemble(args: &AssembleArgs) -> Result<()> {
    let (net, scenario) = load_network(&args.network)?;
    let sys = assemble(&net, &MeshParams { elements_per_edge: args.elements_per_edge })?;
    sys.verify_constraint_rank()?;
    println!(
        "network: {} vertices, {} edges ({} boundary, {} junction vertices)",
        net.vertex_count,
        net.edges.len(),
        net.boundary_vertices.len(),
        net.junction_vertices.len()
    );
    println!(
        "mesh: {} elements per edge -> {} potential dofs, {} flux dofs",
        args.elements_per_edge,
        sys.n_potential(),
        sys.n_flux()
    );
    let loads = Loads::new(&sys, &scenario);
    let init = initial_state(&loads)?;
    let report = netpdae::assembly::check_consistency(&sys, &loads, &init.potential, &init.flux);
    println!(
        "initial data: boundary residual {:.3e}, flux relation residual {:.3e}",
        report.boundary_residual, report.flux_relation_residual
    );
    if let Some(dir) = &args.dump_matrices {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, matrix) in sys.matrices() {
            let path = dir.join(format!("{name}.mtx"));
            let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_matrix_market(&mut file, matrix).with_context(|| format!("writing {}", path.display()))?;
        }
        println!("wrote matrices to {}", dir.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "demo-network")]
    network: String,
    #[arg(long, default_value_t = 10)]
    elements_per_edge: usize,
    /// Model form: limit-1, limit-2, or stiff
    #[arg(long)]
    form: String,
    /// Time scheme (one of the registered tableaus)
    #[arg(long, default_value = "radau-iia-2")]
    scheme: String,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    steps: usize,
    /// Relaxation parameter; required by (and only by) the stiff form
    #[arg(long)]
    eps: Option<f64>,
    /// Store every k-th step
    #[arg(long, default_value_t = 1)]
    keep_every: usize,
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let np = traj.potential[0].len();
    let nm = traj.flux[0].len();
    let nl = traj.multiplier[0].len();
    let mut header = String::from("t");
    for i in 0..np {
        header.push_str(&format!(",p{i}"));
    }
    for i in 0..nm {
        header.push_str(&format!(",m{i}"));
    }
    for i in 0..nl {
        header.push_str(&format!(",lambda{i}"));
    }
    if traj.defect.is_some() {
        for i in 0..nl {
            header.push_str(&format!(",mu{i}"));
        }
    }
    if traj.correction_potential.is_some() {
        for i in 0..np {
            header.push_str(&format!(",corr_p{i}"));
        }
        for i in 0..nm {
            header.push_str(&format!(",corr_m{i}"));
        }
    }
    let mut out = header;
    out.push('\n');
    for row in 0..traj.len() {
        out.push_str(&format!("{:.16e}", traj.times[row]));
        let mut push_all = |values: &[f64]| {
            for v in values {
                out.push_str(&format!(",{v:.16e}"));
            }
        };
        push_all(&traj.potential[row]);
        push_all(&traj.flux[row]);
        push_all(&traj.multiplier[row]);
        if let Some(defect) = &traj.defect {
            push_all(&defect[row]);
        }
        if let Some(p1) = &traj.correction_potential {
            push_all(&p1[row]);
            push_all(&traj.correction_flux.as_ref().expect("paired correction fields")[row]);
        }
        out.push('\n');
    }
    out
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let form = match (args.form.as_str(), args.eps) {
        ("limit-1", None) => ModelForm::LimitFirstOrder,
        ("limit-2", None) => ModelForm::LimitSecondOrder,
        ("stiff", Some(eps)) => ModelForm::Stiff { eps },
        ("stiff", None) => bail!("the stiff form needs --eps"),
        ("limit-1" | "limit-2", Some(_)) => {
            bail!("--eps only applies to the stiff form; the limit forms are eps-independent")
        }
        (other, _) => bail!("unknown form '{other}' (expected limit-1, limit-2, or stiff)"),
    };
    let (net, scenario) = load_network(&args.network)?;
    let sys = assemble(&net, &MeshParams { elements_per_edge: args.elements_per_edge })?;
    let loads = Loads::new(&sys, &scenario);
    let init = initial_state(&loads)?;
    let stepper = make_stepper(form, &args.scheme)
        .with_context(|| format!("available schemes: {}", TABLEAU_NAMES.join(", ")))?;
    println!("running {} for {} steps of {:.3e}", stepper.describe(), args.steps, args.tau);
    let traj = stepper.run(&loads, &init, &RunConfig::with_thinning(args.tau, args.steps, args.keep_every))?;
    write_output(&args.out, &trajectory_csv(&traj))
}

// ---------------------------------------------------------------------------

#[derive(Args)]
struct ConvTauArgs {
    #[arg(long, default_value = "demo-network")]
    network: String,
    #[arg(long, default_value_t = 10)]
    elements_per_edge: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    final_time: f64,
    #[arg(long, default_value_t = 0.2)]
    base_tau: f64,
    #[arg(long, default_value_t = 14)]
    levels: usize,
    #[arg(long, default_value_t = 25)]
    reference_substeps: usize,
    #[arg(long, default_value = "conv_tau.csv")]
    out: PathBuf,
    /// Also write a matplotlib script next to the CSV
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

fn cmd_conv_tau(args: &ConvTauArgs) -> Result<()> {
    let (net, scenario) = load_network(&args.network)?;
    let cfg = TauStudyConfig {
        elements_per_edge: args.elements_per_edge,
        eps: args.eps,
        final_time: args.final_time,
        base_tau: args.base_tau,
        levels: args.levels,
        reference_substeps: args.reference_substeps,
        reference_scheme: "radau-iia-2".to_string(),
    };
    println!(
        "time-step study: {} levels from tau = {}, eps = {}, reference substeps = {}",
        cfg.levels, cfg.base_tau, cfg.eps, cfg.reference_substeps
    );
    let study = run_convergence_tau(&net, &scenario, &cfg)?;
    println!("{:>12}  {:>13}  {:>13}  {:>13}  {:>13}", "tau", "p0 euler", "phat euler", "p0 radau", "phat radau");
    for r in &study.rows {
        println!(
            "{:>12.6e}  {:>13.6e}  {:>13.6e}  {:>13.6e}  {:>13.6e}",
            r.tau, r.err_p0_euler, r.err_phat_euler, r.err_p0_radau, r.err_phat_radau
        );
    }
    println!("reference self-distance: {:.3e}", study.reference_gap);
    write_output(&args.out, &tau_study_csv(&study))?;
    if let Some(script) = &args.plot_script {
        write_plot_script(script, &args.out.display().to_string(), "step size", "error")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args)]
struct ConvEpsArgs {
    /// Element counts to sweep
    #[arg(long, num_args = 1.., default_values_t = vec![6usize, 11, 21, 41, 81, 161, 321, 641, 1281])]
    meshes: Vec<usize>,
    #[arg(long, default_value_t = 0.55)]
    data_exponent: f64,
    #[arg(long, default_value_t = 12810)]
    truncation: usize,
    #[arg(long, default_value_t = 16)]
    eps_count: usize,
    #[arg(long, default_value_t = 1.0)]
    final_time: f64,
    #[arg(long, default_value = "conv_eps.csv")]
    out: PathBuf,
    /// Also write the raw (mesh, eps, error) samples
    #[arg(long)]
    samples_out: Option<PathBuf>,
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

fn cmd_conv_eps(args: &ConvEpsArgs) -> Result<()> {
    let cfg = ModalDecayConfig {
        meshes: args.meshes.clone(),
        data_exponent: args.data_exponent,
        truncation: args.truncation,
        eps_count: args.eps_count,
        final_time: args.final_time,
    };
    println!(
        "decay-exponent study: meshes {:?}, data exponent {}, {} eps samples",
        cfg.meshes, cfg.data_exponent, cfg.eps_count
    );
    let rows = run_convergence_eps(&cfg)?;
    println!("{:>9}  {:>12}  {:>10}  {:>12}  {:>12}", "elements", "h", "alpha", "prefactor", "residual");
    for r in &rows {
        println!(
            "{:>9}  {:>12.6e}  {:>10.6}  {:>12.6e}  {:>12.6e}",
            r.elements, r.h, r.exponent, r.prefactor, r.fit_residual
        );
    }
    write_output(&args.out, &modal_decay_csv(&rows))?;
    if let Some(path) = &args.samples_out {
        write_output(path, &modal_decay_samples_csv(&rows))?;
    }
    if let Some(script) = &args.plot_script {
        write_plot_script(script, &args.out.display().to_string(), "mesh width", "fitted exponent")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args)]
struct EpsOrderArgs {
    #[arg(long, default_value = "demo-network")]
    network: String,
    #[arg(long, default_value_t = 10)]
    elements_per_edge: usize,
    #[arg(long, default_value_t = 1.0)]
    final_time: f64,
    #[arg(long, default_value_t = 1.953125e-4)]
    tau: f64,
    /// Relaxation parameters to sweep (repeat the flag for each value)
    #[arg(long = "eps", num_args = 1.., default_values_t = vec![1e-2, 1e-3, 1e-4])]
    eps_values: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    reference_substeps: usize,
    #[arg(long, default_value = "radau-iia-2")]
    scheme: String,
    #[arg(long, default_value = "eps_order.csv")]
    out: PathBuf,
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

fn cmd_eps_order(args: &EpsOrderArgs) -> Result<()> {
    let (net, scenario) = load_network(&args.network)?;
    let cfg = EpsOrderConfig {
        elements_per_edge: args.elements_per_edge,
        final_time: args.final_time,
        tau: args.tau,
        eps_values: args.eps_values.clone(),
        reference_substeps: args.reference_substeps,
        scheme: args.scheme.clone(),
    };
    println!(
        "relaxation-order study: tau = {:.6e}, eps values {:?}, scheme {}",
        cfg.tau, cfg.eps_values, cfg.scheme
    );
    let study = run_eps_order_study(&net, &scenario, &cfg)?;
    println!("{:>12}  {:>13}  {:>13}  {:>13}", "eps", "err p0", "err phat", "ref gap");
    for r in &study.rows {
        println!("{:>12.6e}  {:>13.6e}  {:>13.6e}  {:>13.6e}", r.eps, r.err_p0, r.err_phat, r.reference_gap);
    }
    println!("fitted slopes: p0 {:.4}, phat {:.4}", study.slope_p0, study.slope_phat);
    write_output(&args.out, &eps_order_csv(&study))?;
    if let Some(script) = &args.plot_script {
        write_plot_script(script, &args.out.display().to_string(), "eps", "error")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 4)]
    critical_mode: usize,
    #[arg(long, default_value_t = 1.1)]
    alpha: f64,
    #[arg(long, default_value_t = 8)]
    modes: usize,
    #[arg(long, default_value_t = 5e-3)]
    final_time: f64,
    #[arg(long, default_value_t = 4096)]
    steps: usize,
    #[arg(long, num_args = 1.., default_values_t = vec![16usize, 32, 64, 128])]
    meshes: Vec<usize>,
    #[arg(long, default_value = "radau-iia-2")]
    scheme: String,
    #[arg(long, default_value = "oracle_check.csv")]
    out: PathBuf,
}

fn cmd_oracle_check(args: &OracleArgs) -> Result<()> {
    let cfg = OracleComparisonConfig {
        critical_mode: args.critical_mode,
        alpha: args.alpha,
        modes: args.modes,
        final_time: args.final_time,
        steps: args.steps,
        meshes: args.meshes.clone(),
        scheme: args.scheme.clone(),
    };
    let cmp = run_oracle_comparison(&cfg)?;
    println!("{:>9}  {:>12}  {:>13}", "elements", "h", "error");
    for r in &cmp.rows {
        println!("{:>9}  {:>12.6e}  {:>13.6e}", r.elements, r.h, r.error);
    }
    println!("fitted spatial order: {:.4}", cmp.order);
    write_output(&args.out, &oracle_comparison_csv(&cmp))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Assemble(args) => cmd_assemble(args),
        Command::Solve(args) => cmd_solve(args),
        Command::ConvTau(args) => cmd_conv_tau(args),
        Command::ConvEps(args) => cmd_conv_eps(args),
        Command::EpsOrder(args) => cmd_eps_order(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    }
}
