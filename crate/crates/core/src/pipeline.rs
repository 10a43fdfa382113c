//! Simulate, snapshot, diagnose and report.
//!
//! Every text artifact starts with `#` lines carrying the schema version, the
//! SHA-256 of the resolved configuration and the configuration itself.
//! Floats are written with 17 significant digits.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::chains::{
    alpha_fit, ascending_chain_condition, chain_timespan, chain_value, chain_values, classify_order,
    detect_escape_times, label_sections, scaling_gap_table, AlphaFit, ChainState, LadderLabels, SectionType,
};
use crate::config::{ConfigError, RunConfig, SnapshotPolicy};
use crate::field::{FieldError, MultiIndex, PeriodicField};
use crate::harmonic::{default_ell, exclusion_lhs, solve_tuning_pair, ExclusionInputs};
use crate::snapshot::{save_snapshot, FieldRole, Snapshot};
use crate::solver::{energy_budget, init_field, run_with, Sample, SolverError, Trajectory};
use crate::sparseness::{z_alpha_check, DIM};
use crate::svg::{Plot, Series, Style};

pub const TRAJECTORY_SCHEMA: &str = "nsparse-trajectory/1";
pub const CHAINS_SCHEMA: &str = "nsparse-chains/1";
pub const LABELS_SCHEMA: &str = "nsparse-chain-labels/1";
pub const ESCAPE_SCHEMA: &str = "nsparse-escape/1";
pub const SNAPSHOTS_SCHEMA: &str = "nsparse-snapshots/1";
pub const REPORT_SCHEMA: &str = "nsparse-report/1";

/// Union fraction above which a failed membership test is flagged as trivial.
pub const TRIVIAL_UNION_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial condition: {0}")]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// A non-fatal error from one module, with where and when it happened.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleIssue {
    pub module: &'static str,
    pub t: Option<f64>,
    pub message: String,
}

impl fmt::Display for ModuleIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.t {
            Some(t) => write!(f, "[{} at t = {}] {}", self.module, num(t), self.message),
            None => write!(f, "[{}] {}", self.module, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZVerdict {
    True,
    False,
    /// Failed while the super-level sets cover most of the box.
    FalseTrivial,
    /// No sampled point had a resolvable scale.
    Unresolved,
    Error,
}

impl fmt::Display for ZVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZVerdict::True => "true",
            ZVerdict::False => "false",
            ZVerdict::FalseTrivial => "false-trivial",
            ZVerdict::Unresolved => "unresolved",
            ZVerdict::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderDiagnostics {
    pub k: u32,
    pub sup: f64,
    pub chain_value: f64,
    pub rho_star: f64,
    pub union_fraction: f64,
    pub verdict: ZVerdict,
}

/// Diagnostics of one velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDiagnostics {
    pub per_k: Vec<OrderDiagnostics>,
    /// `‖D^j u‖_∞` for `j = 0..=chain_j_max`.
    pub chain_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub sample: Sample,
    pub diagnostics: FieldDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub rows: Vec<Row>,
    pub artifacts: Vec<PathBuf>,
    pub issues: Vec<ModuleIssue>,
    pub failure: Option<String>,
}

impl PipelineOutcome {
    pub fn success(&self) -> bool {
        self.issues.is_empty() && self.failure.is_none()
    }

    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `#` preamble shared by every text artifact.
pub fn artifact_header(schema: &str, cfg: &RunConfig) -> String {
    let mut s = format!("# schema = {schema}\n# config_sha256 = {}\n", cfg.hash());
    for line in cfg.to_text().lines() {
        let _ = writeln!(s, "# config: {line}");
    }
    s
}

/// `D^k u` along `x₁`, or with `all_indices` the order-k derivative of largest sup-norm.
pub fn dk_field(u: &PeriodicField, k: u32, cfg: &RunConfig) -> Result<PeriodicField, FieldError> {
    let opts = cfg.derivative_options();
    if !cfg.all_indices {
        return u.derivative(MultiIndex::along(0, k), &opts);
    }
    let mut best: Option<(f64, PeriodicField)> = None;
    for zeta in MultiIndex::all_of_order(k) {
        let d = u.derivative(zeta, &opts)?;
        let s = d.sup_norm();
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, d));
        }
    }
    Ok(best.expect("every order has a multi-index").1)
}

/// Sparseness and chain diagnostics of `u`. Module errors are pushed to `issues`.
pub fn diagnose(u: &PeriodicField, cfg: &RunConfig, t: Option<f64>, issues: &mut Vec<ModuleIssue>) -> FieldDiagnostics {
    let opts = cfg.derivative_options();
    let scan = cfg.scan_options();
    let mut per_k = Vec::with_capacity(cfg.k_list.len());
    for &k in &cfg.k_list {
        let mut diag = OrderDiagnostics {
            k,
            sup: f64::NAN,
            chain_value: f64::NAN,
            rho_star: f64::NAN,
            union_fraction: f64::NAN,
            verdict: ZVerdict::Error,
        };
        match dk_field(u, k, cfg) {
            Ok(d) => {
                diag.sup = d.sup_norm();
                diag.chain_value = chain_value(k, cfg.chain_c, diag.sup);
                match z_alpha_check(&d, &cfg.sparseness_params(k), cfg.sparseness_mode, &scan) {
                    Ok(rep) => {
                        diag.rho_star = rep.rho_star;
                        diag.union_fraction = rep.union_fraction;
                        diag.verdict = if rep.resolved == 0 {
                            ZVerdict::Unresolved
                        } else if rep.verdict {
                            ZVerdict::True
                        } else if rep.union_fraction > TRIVIAL_UNION_FRACTION {
                            ZVerdict::FalseTrivial
                        } else {
                            ZVerdict::False
                        };
                    }
                    Err(e) => issues.push(ModuleIssue { module: "sparseness", t, message: format!("k = {k}: {e}") }),
                }
            }
            Err(e) => issues.push(ModuleIssue { module: "grid-field", t, message: format!("k = {k}: {e}") }),
        }
        per_k.push(diag);
    }
    let mut chain_norms = Vec::with_capacity(cfg.chain_j_max as usize + 1);
    for j in 0..=cfg.chain_j_max {
        match u.derivative_norm(j, f64::INFINITY, cfg.all_indices, &opts) {
            Ok(v) => chain_norms.push(v),
            Err(e) => {
                issues.push(ModuleIssue { module: "grid-field", t, message: format!("chain norm j = {j}: {e}") });
                chain_norms.push(f64::NAN);
            }
        }
    }
    FieldDiagnostics { per_k, chain_norms }
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn snapshot_name(ordinal: usize) -> String {
    format!("u_{ordinal:04}.splb")
}

/// Runs the whole pipeline and writes every artifact into `cfg.output_dir`.
///
/// Module errors and solver failures do not stop the run; they are collected
/// in the outcome after all artifacts have been written.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|source| PipelineError::Io { path: dir.clone(), source })?;
    let mut w = Writer { dir: &dir, artifacts: Vec::new() };
    let u0 = init_field(&cfg.initial_condition()?, cfg.n, cfg.box_length)?;
    let solver_cfg = cfg.solver_config();

    let mut rows: Vec<Row> = Vec::new();
    let mut issues: Vec<ModuleIssue> = Vec::new();
    let mut snapshots: Vec<(String, f64, u64)> = Vec::new();
    let mut last: Option<(PeriodicField, f64, u64)> = None;

    let result = run_with(&solver_cfg, u0, |state, sample| {
        let diagnostics = diagnose(&state.u, cfg, Some(sample.t), &mut issues);
        let ordinal = rows.len();
        rows.push(Row { sample: sample.clone(), diagnostics });
        let write_now = match cfg.snapshots {
            SnapshotPolicy::All => true,
            SnapshotPolicy::Ends => ordinal == 0,
            SnapshotPolicy::None => false,
        };
        if write_now {
            let name = snapshot_name(ordinal);
            let snap = Snapshot { field: state.u.clone(), t: sample.t, role: FieldRole::Velocity };
            match save_snapshot(&snap, &dir.join(&name)) {
                Ok(()) => snapshots.push((name, sample.t, sample.step)),
                Err(e) => issues.push(ModuleIssue { module: "snapshot", t: Some(sample.t), message: e.to_string() }),
            }
        } else if cfg.snapshots == SnapshotPolicy::Ends {
            last = Some((state.u.clone(), sample.t, sample.step));
        }
        Ok(())
    });
    let failure = match result {
        Ok(traj) => traj.failure,
        Err(e) => Some(e.to_string()),
    };
    if let Some((field, t, step)) = last {
        let name = snapshot_name(rows.len() - 1);
        match save_snapshot(&Snapshot { field, t, role: FieldRole::Velocity }, &dir.join(&name)) {
            Ok(()) => snapshots.push((name, t, step)),
            Err(e) => issues.push(ModuleIssue { module: "snapshot", t: Some(t), message: e.to_string() }),
        }
    }
    for (name, _, _) in &snapshots {
        w.artifacts.push(dir.join(name));
    }

    w.write("trajectory.csv", trajectory_csv(cfg, &rows).as_bytes())?;
    w.write("chains.csv", chains_csv(cfg, &rows, &mut issues).as_bytes())?;
    w.write("chain_labels.csv", labels_csv(cfg, &rows, &mut issues).as_bytes())?;
    w.write("escape.csv", escape_csv(cfg, &rows).as_bytes())?;
    w.write("snapshots.csv", snapshots_csv(cfg, &snapshots).as_bytes())?;
    let fits = alpha_fits(cfg, &rows);
    w.write("report.txt", report_text(cfg, &rows, &fits, failure.as_deref(), &mut issues).as_bytes())?;
    w.write("norms.svg", norms_plot(cfg, &rows).render().as_bytes())?;
    for (k, fit) in &fits {
        w.write(&format!("rho_star_k{k}.svg"), rho_plot(cfg, &rows, *k, fit.as_ref().ok()).render().as_bytes())?;
    }
    w.write("gap_ratio.svg", gap_plot(cfg).render().as_bytes())?;

    Ok(PipelineOutcome { rows, artifacts: w.artifacts, issues, failure })
}

pub fn trajectory_csv(cfg: &RunConfig, rows: &[Row]) -> String {
    let mut s = artifact_header(TRAJECTORY_SCHEMA, cfg);
    s.push_str("t,sup_u,l2_u,sup_w");
    for k in &cfg.k_list {
        let _ = write!(s, ",sup_D{k},R_{k},rho_star_{k},zalpha_{k}");
    }
    s.push('\n');
    for row in rows {
        let r = &row.sample;
        let _ = write!(s, "{},{},{},{}", num(r.t), num(r.sup_u), num(r.l2_u), num(r.sup_w));
        for d in &row.diagnostics.per_k {
            let _ = write!(s, ",{},{},{},{}", num(d.sup), num(d.chain_value), num(d.rho_star), d.verdict);
        }
        s.push('\n');
    }
    s
}

fn ell0(cfg: &RunConfig, rows: &[Row]) -> usize {
    cfg.ell0(rows.first().map_or(1.0, |r| r.sample.sup_u))
}

pub fn chains_csv(cfg: &RunConfig, rows: &[Row], issues: &mut Vec<ModuleIssue>) -> String {
    let ell = ell0(cfg, rows);
    let mut s = artifact_header(CHAINS_SCHEMA, cfg);
    let _ = writeln!(s, "# ell0 = {ell}");
    s.push_str("t,j,sup_Dj,R_j,T_j,order_at_ell0\n");
    for row in rows {
        let t = row.sample.t;
        let norms = &row.diagnostics.chain_norms;
        let r = chain_values(norms, cfg.chain_c);
        for (j, (&norm, &rj)) in norms.iter().zip(&r).enumerate() {
            let tj = chain_timespan(j as u32, cfg.chain_c, norm, cfg.m_star).unwrap_or(f64::NAN);
            let order = if j < ell {
                "n/a".to_string()
            } else {
                match classify_order(&r, ell, j) {
                    Ok(rep) => rep.class().to_string(),
                    Err(e) => {
                        issues.push(ModuleIssue { module: "derivative-chains", t: Some(t), message: e.to_string() });
                        "error".to_string()
                    }
                }
            };
            let _ = writeln!(s, "{},{j},{},{},{},{order}", num(t), num(norm), num(rj), num(tj));
        }
    }
    s
}

pub fn section_type_name(t: SectionType) -> &'static str {
    match t {
        SectionType::A => "A",
        SectionType::B => "B",
        SectionType::Undetermined => "undetermined",
    }
}

/// Labels for one time, or `None` after recording why they are unavailable.
pub fn labels_at(
    cfg: &RunConfig,
    ell: usize,
    state: &ChainState,
    issues: &mut Vec<ModuleIssue>,
) -> Option<LadderLabels> {
    let result = cfg.ladder(ell).and_then(|ladder| label_sections(&state.norms, &ladder));
    match result {
        Ok(l) => Some(l),
        Err(e) => {
            issues.push(ModuleIssue { module: "derivative-chains", t: Some(state.t), message: e.to_string() });
            None
        }
    }
}

pub fn write_label_rows(s: &mut String, t: f64, labels: &LadderLabels) {
    for (i, sec) in labels.sections.iter().enumerate() {
        let witness = sec.witness.map_or(String::new(), |w| w.to_string());
        let _ = writeln!(
            s,
            "{},section,{i},{},{},{},{},{witness}",
            num(t),
            sec.start,
            sec.end,
            sec.m,
            section_type_name(sec.label)
        );
    }
    for st in &labels.strings {
        let _ = writeln!(s, "{},string,{},{},{},,{},", num(t), st.first, st.start, st.end, section_type_name(st.label));
    }
}

pub const LABELS_COLUMNS: &str = "t,kind,index,start,end,m,label,witness";

pub fn labels_csv(cfg: &RunConfig, rows: &[Row], issues: &mut Vec<ModuleIssue>) -> String {
    let ell = ell0(cfg, rows);
    let mut s = artifact_header(LABELS_SCHEMA, cfg);
    let _ = writeln!(s, "# ell0 = {ell}");
    let _ = writeln!(s, "{LABELS_COLUMNS}");
    for row in rows {
        let state = ChainState { t: row.sample.t, norms: row.diagnostics.chain_norms.clone() };
        if let Some(labels) = labels_at(cfg, ell, &state, issues) {
            write_label_rows(&mut s, state.t, &labels);
        }
    }
    s
}

/// Escape times of every `R(j, c)` series: sample indices beyond which the
/// value stays strictly above.
pub fn escape_csv(cfg: &RunConfig, rows: &[Row]) -> String {
    let mut s = artifact_header(ESCAPE_SCHEMA, cfg);
    s.push_str("j,sample,t\n");
    if rows.len() < 2 {
        return s;
    }
    for j in 0..=cfg.chain_j_max as usize {
        let series: Vec<f64> =
            rows.iter().map(|r| chain_value(j as u32, cfg.chain_c, r.diagnostics.chain_norms[j])).collect();
        if let Ok(marks) = detect_escape_times(&series) {
            for m in marks {
                let _ = writeln!(s, "{j},{m},{}", num(rows[m].sample.t));
            }
        }
    }
    s
}

fn snapshots_csv(cfg: &RunConfig, snapshots: &[(String, f64, u64)]) -> String {
    let mut s = artifact_header(SNAPSHOTS_SCHEMA, cfg);
    s.push_str("file,t,step,role\n");
    for (name, t, step) in snapshots {
        let _ = writeln!(s, "{name},{},{step},velocity", num(*t));
    }
    s
}

/// α-fit of `ρ* ~ ‖D^k u‖_∞^{−α}` per order over the samples.
pub fn alpha_fits(cfg: &RunConfig, rows: &[Row]) -> Vec<(u32, Result<AlphaFit, String>)> {
    cfg.k_list
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let pairs: Vec<(f64, f64)> =
                rows.iter().map(|r| (r.diagnostics.per_k[i].rho_star, r.diagnostics.per_k[i].sup)).collect();
            (k, alpha_fit(&pairs).map_err(|e| e.to_string()))
        })
        .collect()
}

fn trajectory_of(rows: &[Row]) -> Trajectory {
    Trajectory { samples: rows.iter().map(|r| r.sample.clone()).collect(), failure: None }
}

pub fn report_text(
    cfg: &RunConfig,
    rows: &[Row],
    fits: &[(u32, Result<AlphaFit, String>)],
    failure: Option<&str>,
    issues: &mut Vec<ModuleIssue>,
) -> String {
    let mut s = artifact_header(REPORT_SCHEMA, cfg);
    let u0_sup = rows.first().map_or(f64::NAN, |r| r.sample.sup_u);
    let u0_l2 = rows.first().map_or(f64::NAN, |r| r.sample.l2_u);

    match solve_tuning_pair(cfg.delta) {
        Ok(p) => {
            let _ = writeln!(
                s,
                "tuning: delta = {}, lambda = {}, h = {}, constraint_ok = {}, residual = {}",
                num(p.delta),
                num(p.lambda),
                num(p.h),
                p.constraint_ok,
                num(p.residual)
            );
        }
        Err(e) => issues.push(ModuleIssue { module: "harmonic-measure", t: None, message: e.to_string() }),
    }
    let _ = writeln!(s, "levels: lambda = {}, delta = {}, c0 = {}", num(cfg.lambda), num(cfg.delta), num(cfg.c0));

    let ell = default_ell(u0_sup, cfg.epsilon);
    for &k in &cfg.k_list {
        if k == 0 {
            let _ = writeln!(s, "exclusion k = 0: n/a (needs k >= 1)");
            continue;
        }
        let inputs = ExclusionInputs {
            lambda: cfg.lambda,
            delta: cfg.delta,
            d: DIM,
            epsilon: cfg.epsilon,
            ell,
            k,
            c: cfg.chain_c,
            mu: cfg.mu,
        };
        match exclusion_lhs(&inputs) {
            Ok(r) => {
                let _ = writeln!(
                    s,
                    "exclusion k = {k}: ell = {ell}, value = {}, eta = {}, h_star = {}, 2e/eta = {}, mu = {}, satisfied = {}",
                    num(r.value),
                    num(r.eta),
                    num(r.h_star),
                    num(r.prefactor),
                    num(r.mu),
                    r.satisfied
                );
            }
            Err(e) => issues.push(ModuleIssue {
                module: "harmonic-measure",
                t: None,
                message: format!("exclusion k = {k}: {e}"),
            }),
        }
    }

    let ell0 = ell0(cfg, rows) as u32;
    for &k in &cfg.k_list {
        if k < ell0 {
            let _ = writeln!(s, "ascending k = {k}: n/a (k < ell0 = {ell0})");
            continue;
        }
        match ascending_chain_condition(cfg.chain_c, ell0, k, u0_l2, u0_sup, DIM, 1.0) {
            Ok(a) => {
                let _ = writeln!(
                    s,
                    "ascending k = {k}: ell0 = {ell0}, lhs = {}, rhs = {}, satisfied = {}",
                    num(a.lhs),
                    num(a.rhs),
                    a.satisfied
                );
            }
            Err(e) => issues.push(ModuleIssue {
                module: "derivative-chains",
                t: None,
                message: format!("ascending k = {k}: {e}"),
            }),
        }
    }

    for (k, fit) in fits {
        let expected = cfg.alpha.alpha(*k);
        match fit {
            Ok(f) => {
                let _ = writeln!(
                    s,
                    "alpha_fit k = {k}: alpha = {}, prefactor = {}, r_squared = {}, used = {}, excluded = {}, configured alpha = {}",
                    num(f.alpha),
                    num(f.prefactor),
                    num(f.r_squared),
                    f.used,
                    f.excluded,
                    num(expected)
                );
            }
            Err(e) => {
                let _ = writeln!(s, "alpha_fit k = {k}: n/a ({e})");
            }
        }
    }

    let residuals = energy_budget(&trajectory_of(rows));
    let e0 = u0_l2 * u0_l2;
    if let Some((i, &min)) = residuals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        let _ = writeln!(
            s,
            "energy: min residual = {}, relative = {}, at t = {}",
            num(min),
            num(min / e0),
            num(rows[i].sample.t)
        );
        let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let _ = writeln!(s, "energy: max |residual| = {}, relative = {}", num(max_abs), num(max_abs / e0));
    }
    let _ = writeln!(s, "samples: {}", rows.len());
    let _ = writeln!(s, "failure: {}", failure.unwrap_or("none"));
    let _ = writeln!(s, "issues: {}", issues.len());
    for issue in issues.iter() {
        let _ = writeln!(s, "  {issue}");
    }
    s
}

fn plot_comment(cfg: &RunConfig) -> String {
    artifact_header("nsparse-plot/1", cfg).trim_end().to_string()
}

pub fn norms_plot(cfg: &RunConfig, rows: &[Row]) -> Plot {
    let mut series = vec![
        Series {
            name: "sup |u|".into(),
            points: rows.iter().map(|r| (r.sample.t, r.sample.sup_u)).collect(),
            style: Style::Line,
        },
        Series {
            name: "sup |w|".into(),
            points: rows.iter().map(|r| (r.sample.t, r.sample.sup_w)).collect(),
            style: Style::Line,
        },
    ];
    for (i, k) in cfg.k_list.iter().enumerate() {
        series.push(Series {
            name: format!("sup |D^{k} u|"),
            points: rows.iter().map(|r| (r.sample.t, r.diagnostics.per_k[i].sup)).collect(),
            style: Style::Line,
        });
    }
    Plot {
        title: "Norm histories".into(),
        x_label: "t".into(),
        y_label: "sup norm".into(),
        log_y: true,
        series,
        comment: plot_comment(cfg),
        ..Default::default()
    }
}

pub fn rho_plot(cfg: &RunConfig, rows: &[Row], k: u32, fit: Option<&AlphaFit>) -> Plot {
    let i = cfg.k_list.iter().position(|&x| x == k).expect("k from the configured list");
    let points: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.diagnostics.per_k[i].sup, r.diagnostics.per_k[i].rho_star)).collect();
    let mut series = vec![Series { name: "samples".into(), points: points.clone(), style: Style::Markers }];
    let title = match fit {
        Some(f) => {
            let xs = points.iter().map(|p| p.0).filter(|x| x.is_finite() && *x > 0.0);
            let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if lo.is_finite() {
                let line = |x: f64| (x, f.prefactor * x.powf(-f.alpha));
                series.push(Series { name: "fit".into(), points: vec![line(lo), line(hi)], style: Style::Line });
            }
            format!("rho* vs sup |D^{k} u|, fitted slope -{:.4} (R^2 = {:.4})", f.alpha, f.r_squared)
        }
        None => format!("rho* vs sup |D^{k} u|, no fit"),
    };
    Plot {
        title,
        x_label: format!("sup |D^{k} u|"),
        y_label: "rho*".into(),
        log_x: true,
        log_y: true,
        series,
        comment: plot_comment(cfg),
    }
}

pub fn gap_plot(cfg: &RunConfig) -> Plot {
    let table = scaling_gap_table(0..=20);
    Plot {
        title: "Scaling gap".into(),
        x_label: "k".into(),
        y_label: "exponent".into(),
        series: vec![
            Series {
                name: "gap ratio".into(),
                points: table.iter().map(|r| (r.k as f64, r.gap_ratio)).collect(),
                style: Style::Line,
            },
            Series {
                name: "1/(k+1)".into(),
                points: table.iter().map(|r| (r.k as f64, r.regularity)).collect(),
                style: Style::Line,
            },
            Series {
                name: "1/(k+3/2)".into(),
                points: table.iter().map(|r| (r.k as f64, r.apriori)).collect(),
                style: Style::Line,
            },
        ],
        comment: plot_comment(cfg),
        ..Default::default()
    }
}

/// Chain states from a `chains.csv` written by [`run_pipeline`].
pub fn read_chain_states(text: &str) -> Result<Vec<ChainState>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or("no header row")?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| cols.iter().position(|&c| c == name).ok_or(format!("missing column `{name}`"));
    let (ct, cj, cn) = (col("t")?, col("j")?, col("sup_Dj")?);
    let mut states: Vec<ChainState> = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let get = |c: usize| f.get(c).copied().ok_or(format!("row {}: too few fields", i + 1));
        let t: f64 = get(ct)?.parse().map_err(|_| format!("row {}: bad t", i + 1))?;
        let j: usize = get(cj)?.parse().map_err(|_| format!("row {}: bad j", i + 1))?;
        let v: f64 = get(cn)?.parse().map_err(|_| format!("row {}: bad sup_Dj", i + 1))?;
        match states.last_mut() {
            Some(s) if s.t.to_bits() == t.to_bits() => {
                if j != s.norms.len() {
                    return Err(format!("row {}: j = {j} out of sequence", i + 1));
                }
                s.norms.push(v);
            }
            _ => {
                if j != 0 {
                    return Err(format!("row {}: a new time must start at j = 0", i + 1));
                }
                states.push(ChainState { t, norms: vec![v] });
            }
        }
    }
    if states.is_empty() {
        return Err("no data rows".into());
    }
    Ok(states)
}
