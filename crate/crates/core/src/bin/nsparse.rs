use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsparse::chains::{scaling_gap_table, ChainState};
use nsparse::config::RunConfig;
use nsparse::harmonic::{
    default_ell, exclusion_lhs, extremal_h, mc_harmonic_measure, solve_tuning_pair, BoundarySet, ExclusionInputs,
};
use nsparse::pipeline::{
    artifact_header, diagnose, dk_field, labels_at, read_chain_states, run_pipeline, write_label_rows, ModuleIssue,
    LABELS_COLUMNS, LABELS_SCHEMA,
};
use nsparse::snapshot::load_snapshot;
use nsparse::solver::init_field;
use nsparse::sparseness::{z_alpha_check, SparsenessMode, SparsenessParams, DIM};
use nsparse::PeriodicField;

#[derive(Parser)]
#[command(name = "nsparse", version, about = "Navier–Stokes sparseness and derivative-chain diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write every artifact of the pipeline.
    Run {
        /// Configuration file.
        config: PathBuf,
        /// Override `output_dir` from the configuration.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Diagnostics of one snapshot file.
    Analyze {
        snapshot: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// One membership query for Z_α(λ, δ; c₀) on D^k of a field.
    Sparseness(SparsenessArgs),
    /// Re-label the chains of a `chains.csv`.
    Chains {
        chains: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ell0: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        q: Option<usize>,
    },
    /// Tuning, extremal and Monte Carlo harmonic-measure queries.
    Harmonic(HarmonicArgs),
    /// Scaling-gap table.
    Table {
        /// Orders as `a..b` (inclusive), `a..=b` or a comma list.
        #[arg(long, default_value = "0..8")]
        k: String,
    },
}

#[derive(Args)]
struct SparsenessArgs {
    /// Snapshot to analyze; otherwise the initial condition is used.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, default_value = "abc")]
    ic: String,
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    c0: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value = "vol")]
    mode: String,
    /// `all` or a stratified sample size.
    #[arg(long, default_value = "all")]
    sample_points: String,
}

#[derive(Args)]
struct HarmonicArgs {
    /// Solve the tuning pair for this δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Extremal harmonic measure of the slit K_λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Monte Carlo estimate at the origin with this many walkers (needs --lambda).
    #[arg(long)]
    walkers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate the exclusion inequality at order k (needs --delta).
    #[arg(long)]
    exclusion_k: Option<u32>,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    u0_sup: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, String> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            RunConfig::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn parse_orders(spec: &str) -> Result<Vec<u32>, String> {
    let bad = || format!("cannot parse orders `{spec}`");
    if let Some((a, b)) = spec.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        Ok((a..=b).collect())
    } else {
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

fn print_issues(issues: &[ModuleIssue]) {
    for issue in issues {
        eprintln!("{issue}");
    }
}

fn cmd_run(config: PathBuf, output_dir: Option<PathBuf>) -> ExitCode {
    let mut cfg = match load_config(Some(&config)) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    match run_pipeline(&cfg) {
        Ok(out) => {
            for path in &out.artifacts {
                println!("{}", path.display());
            }
            print_issues(&out.issues);
            if let Some(f) = &out.failure {
                eprintln!("solver failure: {f}");
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => fail(e),
    }
}

fn cmd_analyze(snapshot: PathBuf, config: Option<PathBuf>) -> ExitCode {
    let mut cfg = match load_config(config.as_ref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let snap = match load_snapshot(&snapshot) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", snapshot.display())),
    };
    let u = &snap.field;
    cfg.n = u.n();
    cfg.box_length = u.box_length();
    let mut issues = Vec::new();
    let diag = diagnose(u, &cfg, Some(snap.t), &mut issues);
    let mut s = String::new();
    let _ = writeln!(s, "t = {:.16e}", snap.t);
    let _ = writeln!(s, "n = {}", u.n());
    let _ = writeln!(s, "sup_u = {:.16e}", u.sup_norm());
    let _ = writeln!(s, "l2_u = {:.16e}", u.energy_l2());
    let _ = writeln!(s, "sup_w = {:.16e}", u.curl().sup_norm());
    for d in &diag.per_k {
        let _ = writeln!(
            s,
            "k = {}: sup_D = {:.16e}, R = {:.16e}, rho_star = {:.16e}, union_fraction = {:.16e}, zalpha = {}",
            d.k, d.sup, d.chain_value, d.rho_star, d.union_fraction, d.verdict
        );
    }
    for (j, v) in diag.chain_norms.iter().enumerate() {
        let _ = writeln!(s, "chain j = {j}: sup_Dj = {v:.16e}");
    }
    print!("{s}");
    print_issues(&issues);
    if issues.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_sparseness(a: SparsenessArgs) -> ExitCode {
    let mode: SparsenessMode = match a.mode.parse() {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let mut text = format!("n = {}\nic = {}\nk_list = {}\nsparseness_mode = {}\n", a.n, a.ic, a.k, a.mode);
    let _ = writeln!(text, "sample_points = {}", a.sample_points);
    let mut cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let u: PeriodicField = match &a.snapshot {
        Some(p) => match load_snapshot(p) {
            Ok(s) => s.field,
            Err(e) => return fail(format!("{}: {e}", p.display())),
        },
        None => match cfg
            .initial_condition()
            .map_err(|e| e.to_string())
            .and_then(|ic| init_field(&ic, cfg.n, cfg.box_length).map_err(|e| e.to_string()))
        {
            Ok(u) => u,
            Err(e) => return fail(e),
        },
    };
    cfg.n = u.n();
    cfg.box_length = u.box_length();
    let d = match dk_field(&u, a.k, &cfg) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    let params = SparsenessParams { lambda: a.lambda, delta: a.delta, c0: a.c0, alpha: a.alpha };
    match z_alpha_check(&d, &params, mode, &cfg.scan_options()) {
        Ok(rep) => {
            println!("mode = {}", rep.mode);
            println!("sup_D = {:.16e}", rep.sup_norm);
            println!(
                "points = {}, resolved = {}, unresolved = {}, passing = {}",
                rep.points.len(),
                rep.resolved,
                rep.unresolved,
                rep.passing
            );
            println!("fraction_passing = {:.16e}", rep.fraction_passing);
            println!("rho_star = {:.16e}", rep.rho_star);
            match rep.common_c {
                Some((lo, hi)) => println!("common_c = [{lo:.16e}, {hi:.16e}]"),
                None => println!("common_c = none"),
            }
            println!("union_fraction = {:.16e}", rep.union_fraction);
            println!("verdict = {}", rep.verdict);
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn cmd_chains(
    path: PathBuf,
    config: Option<PathBuf>,
    ell0: Option<usize>,
    c: Option<f64>,
    q: Option<usize>,
) -> ExitCode {
    let mut cfg = match load_config(config.as_ref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", path.display())),
    };
    let states: Vec<ChainState> = match read_chain_states(&text) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", path.display())),
    };
    cfg.chain_j_max = states[0].j_max() as u32;
    if let Some(c) = c {
        cfg.chain_c = c;
    }
    if let Some(q) = q {
        cfg.ladder_q = q;
    }
    let ell = ell0.unwrap_or_else(|| cfg.ell0(states[0].norms[0]));
    let mut issues = Vec::new();
    let mut s = artifact_header(LABELS_SCHEMA, &cfg);
    let _ = writeln!(s, "# ell0 = {ell}");
    let _ = writeln!(s, "{LABELS_COLUMNS}");
    for state in &states {
        if let Some(labels) = labels_at(&cfg, ell, state, &mut issues) {
            write_label_rows(&mut s, state.t, &labels);
        }
    }
    print!("{s}");
    print_issues(&issues);
    if issues.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_harmonic(a: HarmonicArgs) -> ExitCode {
    if a.delta.is_none() && a.lambda.is_none() {
        return fail("give --delta and/or --lambda");
    }
    if let Some(delta) = a.delta {
        match solve_tuning_pair(delta) {
            Ok(p) => println!(
                "tuning: delta = {:.16e}, lambda = {:.16e}, h = {:.16e}, constraint_ok = {}, residual = {:.3e}",
                p.delta, p.lambda, p.h, p.constraint_ok, p.residual
            ),
            Err(e) => return fail(e),
        }
    }
    if let Some(lambda) = a.lambda {
        match extremal_h(lambda) {
            Ok(h) => println!("extremal: lambda = {lambda:.16e}, h = {h:.16e}"),
            Err(e) => return fail(e),
        }
        if let Some(walkers) = a.walkers {
            let est =
                BoundarySet::extremal(lambda).and_then(|set| mc_harmonic_measure(&set, [0.0, 0.0], walkers, a.seed));
            match est {
                Ok(m) => println!(
                    "monte_carlo: estimate = {:.16e}, stderr = {:.16e}, walkers = {}",
                    m.estimate, m.stderr, m.walkers
                ),
                Err(e) => return fail(e),
            }
        }
    }
    if let Some(k) = a.exclusion_k {
        let Some(delta) = a.delta else {
            return fail("--exclusion-k needs --delta");
        };
        let lambda = match a.lambda {
            Some(l) => l,
            None => solve_tuning_pair(delta).map(|p| p.lambda).unwrap_or(f64::NAN),
        };
        let inputs = ExclusionInputs {
            lambda,
            delta,
            d: DIM,
            epsilon: a.epsilon,
            ell: default_ell(a.u0_sup, a.epsilon),
            k,
            c: a.c,
            mu: a.mu,
        };
        match exclusion_lhs(&inputs) {
            Ok(r) => println!(
                "exclusion: k = {k}, ell = {}, value = {:.16e}, eta = {:.16e}, h_star = {:.16e}, 2e/eta = {:.16e}, satisfied = {}",
                inputs.ell, r.value, r.eta, r.h_star, r.prefactor, r.satisfied
            ),
            Err(e) => return fail(e),
        }
    }
    ExitCode::SUCCESS
}

fn cmd_table(k: String) -> ExitCode {
    let ks = match parse_orders(&k) {
        Ok(ks) => ks,
        Err(e) => return fail(e),
    };
    println!("k,regularity,apriori,energy,gap_ratio,vorticity_regularity,vorticity_apriori");
    for r in scaling_gap_table(ks) {
        println!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.k, r.regularity, r.apriori, r.energy, r.gap_ratio, r.vorticity_regularity, r.vorticity_apriori
        );
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output_dir } => cmd_run(config, output_dir),
        Command::Analyze { snapshot, config } => cmd_analyze(snapshot, config),
        Command::Sparseness(a) => cmd_sparseness(a),
        Command::Chains { chains, config, ell0, c, q } => cmd_chains(chains, config, ell0, c, q),
        Command::Harmonic(a) => cmd_harmonic(a),
        Command::Table { k } => cmd_table(k),
    }
}
