//! Incompressible Navier–Stokes on the periodic box, unit viscosity, no forcing.
//!
//! Velocity formulation: the nonlinear term is evaluated in rotation form
//! `u × ω` on the grid, truncated with the 2/3 rule and Leray-projected in
//! Fourier space, so pressure is never formed. Time integration is RK4 on the
//! integrating-factor variable `e^{|κ|² t} û`, which treats diffusion exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::fft::Fft3;
use crate::field::{DerivativeOptions, FieldError, MultiIndex, PeriodicField, Wavenumbers};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("unknown initial condition kind `{0}` (expected abc, taylor_green, kida or random_bandlimited)")]
    UnknownKind(String),
    #[error("initial field is not divergence-free: sup |div u| = {0:e}")]
    NotSolenoidal(f64),
    #[error("CFL limit exceeded: courant number {courant:.4} > {limit}; advisory dt = {advisory_dt:e}")]
    Cfl { courant: f64, limit: f64, advisory_dt: f64 },
    #[error("non-finite values after step {step} (t = {t}); integration aborted")]
    NonFinite { step: u64, t: f64, last_valid: Box<SolverState> },
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// Initial-condition families.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Arnold–Beltrami–Childress flow; `curl u = u`.
    Abc {
        a: f64,
        b: f64,
        c: f64,
    },
    TaylorGreen {
        amplitude: f64,
    },
    /// Kida–Pelz high-symmetry flow, scaled so that `‖ω₀‖_∞ = 1`.
    Kida,
    /// Seeded Gaussian modes with `|m| ≤ k_cut`, projected to be
    /// divergence-free and scaled so that `‖u₀‖_∞ = amplitude`.
    RandomBandlimited {
        seed: u64,
        k_cut: f64,
        amplitude: f64,
    },
}

impl InitialCondition {
    pub fn kind_name(&self) -> &'static str {
        match self {
            InitialCondition::Abc { .. } => "abc",
            InitialCondition::TaylorGreen { .. } => "taylor_green",
            InitialCondition::Kida => "kida",
            InitialCondition::RandomBandlimited { .. } => "random_bandlimited",
        }
    }
}

/// Family names accepted by [`InitialCondition`] parsing; parameters get defaults.
impl FromStr for InitialCondition {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abc" => Ok(InitialCondition::Abc { a: 1.0, b: 1.0, c: 1.0 }),
            "taylor_green" => Ok(InitialCondition::TaylorGreen { amplitude: 1.0 }),
            "kida" => Ok(InitialCondition::Kida),
            "random_bandlimited" => Ok(InitialCondition::RandomBandlimited { seed: 42, k_cut: 4.0, amplitude: 1.0 }),
            other => Err(SolverError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind_name())
    }
}

/// Largest admissible sup |div u| for an initial field.
const DIVERGENCE_TOLERANCE: f64 = 1e-10;

pub fn init_field(ic: &InitialCondition, n: usize, box_length: f64) -> Result<PeriodicField, SolverError> {
    // Formulas are written for a 2π box; rescale coordinates otherwise.
    let s = 2.0 * PI / box_length;
    let field = match *ic {
        InitialCondition::Abc { a, b, c } => PeriodicField::from_fn(n, box_length, |[x, y, z]| {
            let (x, y, z) = (s * x, s * y, s * z);
            [a * z.sin() + c * y.cos(), b * x.sin() + a * z.cos(), c * y.sin() + b * x.cos()]
        })?,
        InitialCondition::TaylorGreen { amplitude } => PeriodicField::from_fn(n, box_length, |[x, y, z]| {
            let (x, y, z) = (s * x, s * y, s * z);
            [amplitude * x.sin() * y.cos() * z.cos(), -amplitude * x.cos() * y.sin() * z.cos(), 0.0]
        })?,
        InitialCondition::Kida => {
            let raw = PeriodicField::from_fn(n, box_length, |[x, y, z]| {
                let (x, y, z) = (s * x, s * y, s * z);
                [
                    x.sin() * ((3.0 * y).cos() * z.cos() - y.cos() * (3.0 * z).cos()),
                    y.sin() * ((3.0 * z).cos() * x.cos() - z.cos() * (3.0 * x).cos()),
                    z.sin() * ((3.0 * x).cos() * y.cos() - x.cos() * (3.0 * y).cos()),
                ]
            })?;
            let w = raw.curl().sup_norm();
            raw.scaled(1.0 / w)?
        }
        InitialCondition::RandomBandlimited { seed, k_cut, amplitude } => {
            random_bandlimited(n, box_length, seed, k_cut, amplitude)?
        }
    };
    let div = field.divergence_sup();
    if div >= DIVERGENCE_TOLERANCE {
        return Err(SolverError::NotSolenoidal(div));
    }
    Ok(field)
}

fn random_bandlimited(
    n: usize,
    box_length: f64,
    seed: u64,
    k_cut: f64,
    amplitude: f64,
) -> Result<PeriodicField, SolverError> {
    let len = n * n * n;
    let wn = Wavenumbers::new(n, box_length);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); len]);
    for idx in 0..len {
        let m = wn.modes_at(idx);
        let mag = (m.iter().map(|&q| (q * q) as f64).sum::<f64>()).sqrt();
        if mag == 0.0 || mag > k_cut || m.contains(&((n / 2) as i64)) {
            continue;
        }
        let mut v = [Complex64::default(); 3];
        for c in v.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *c = Complex64::new(re, im);
        }
        let k = wn.vector(idx);
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let dot = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
        for c in 0..3 {
            spec[c][idx] = v[c] - dot * (k[c] / k2);
        }
    }
    let field = PeriodicField::from_spectral(n, box_length, &spec)?;
    let sup = field.sup_norm();
    if sup == 0.0 {
        return Ok(field);
    }
    Ok(field.scaled(amplitude / sup)?)
}

/// `1/(c_M² ‖u‖_∞²)`, or `max_horizon` for a vanishing sup-norm.
pub fn analyticity_timespan(sup_norm_u: f64, c_m: f64, max_horizon: f64) -> f64 {
    if sup_norm_u <= 0.0 {
        return max_horizon;
    }
    (1.0 / (c_m * c_m * sup_norm_u * sup_norm_u)).min(max_horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n: usize,
    pub box_length: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub adaptive: bool,
    /// Largest accepted `‖u‖_∞ dt / h`.
    pub cfl_limit: f64,
    /// Fraction of the analyticity timespan used as an adaptive dt cap.
    pub safety: f64,
    pub c_m: f64,
    pub max_horizon: f64,
    /// Derivative orders whose sup-norms are recorded per sample.
    pub k_list: Vec<u32>,
    /// Max over all order-k multi-indices instead of `∂_{x₁}^k` only.
    pub all_indices: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 64,
            box_length: 2.0 * PI,
            dt: 1e-3,
            t_end: 2.0,
            sample_interval: 0.1,
            adaptive: false,
            cfl_limit: 1.0,
            safety: 0.5,
            c_m: 1.0,
            max_horizon: 1.0,
            k_list: vec![1, 2, 3],
            all_indices: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::Config(msg.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt > 0");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end >= 0");
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample_interval > 0");
        }
        if !(self.cfl_limit > 0.0) {
            return bad("cfl_limit > 0");
        }
        if !(self.safety > 0.0 && self.c_m > 0.0 && self.max_horizon > 0.0) {
            return bad("safety, c_m and max_horizon must be positive");
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return bad("n >= 8 and a power of two");
        }
        Ok(())
    }
}

/// Integration state: velocity, time and the accumulated dissipation integral.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: PeriodicField,
    pub t: f64,
    pub step_count: u64,
    pub dt: f64,
    /// `∫₀ᵗ ‖∇u‖₂² ds`.
    pub dissipation: f64,
}

impl SolverState {
    pub fn new(u: PeriodicField, dt: f64) -> Self {
        Self { u, t: 0.0, step_count: 0, dt, dissipation: 0.0 }
    }
}

/// Precomputed wavenumber tables and the RK4 stepper.
pub struct Stepper {
    n: usize,
    box_length: f64,
    plan: std::sync::Arc<Fft3>,
    /// Physical wavevectors, Nyquist zeroed.
    kvec: [Vec<f64>; 3],
    k2: Vec<f64>,
    keep: Vec<bool>,
    cfl_limit: f64,
}

impl Stepper {
    pub fn new(n: usize, box_length: f64, cfl_limit: f64) -> Self {
        let wn = Wavenumbers::new(n, box_length);
        let len = n * n * n;
        let mut kvec: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
        let mut k2 = vec![0.0; len];
        let mut keep = vec![false; len];
        for idx in 0..len {
            let k = wn.odd_derivative_vector(idx);
            for a in 0..3 {
                kvec[a][idx] = k[a];
            }
            k2[idx] = wn.magnitude_sq(idx);
            keep[idx] = wn.dealias_keep(idx);
        }
        Self { n, box_length, plan: Fft3::shared(n), kvec, k2, keep, cfl_limit }
    }

    /// Projected, dealiased nonlinear tendency `P[u × ω]` for spectral velocity `û`.
    pub fn tendency(&self, u_hat: &[Vec<Complex64>; 3]) -> [Vec<Complex64>; 3] {
        let len = self.k2.len();
        let i = Complex64::new(0.0, 1.0);
        let mut u_hat_k: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); len]);
        let mut w_hat: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); len]);
        for idx in 0..len {
            if !self.keep[idx] {
                continue;
            }
            let k = [self.kvec[0][idx], self.kvec[1][idx], self.kvec[2][idx]];
            let (a, b, c) = (u_hat[0][idx], u_hat[1][idx], u_hat[2][idx]);
            u_hat_k[0][idx] = a;
            u_hat_k[1][idx] = b;
            u_hat_k[2][idx] = c;
            w_hat[0][idx] = i * (k[1] * c - k[2] * b);
            w_hat[1][idx] = i * (k[2] * a - k[0] * c);
            w_hat[2][idx] = i * (k[0] * b - k[1] * a);
        }
        // Six real inverse transforms packed into three complex ones.
        let (u1, u2) = self.plan.inverse_real_pair(&u_hat_k[0], &u_hat_k[1]);
        let (u3, w1) = self.plan.inverse_real_pair(&u_hat_k[2], &w_hat[0]);
        let (w2, w3) = self.plan.inverse_real_pair(&w_hat[1], &w_hat[2]);
        let mut c1 = vec![0.0; len];
        let mut c2 = vec![0.0; len];
        let mut c3 = vec![0.0; len];
        for idx in 0..len {
            c1[idx] = u2[idx] * w3[idx] - u3[idx] * w2[idx];
            c2[idx] = u3[idx] * w1[idx] - u1[idx] * w3[idx];
            c3[idx] = u1[idx] * w2[idx] - u2[idx] * w1[idx];
        }
        let (f1, f2) = self.plan.forward_real_pair(&c1, &c2);
        let mut f3: Vec<Complex64> = c3.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.plan.forward(&mut f3);
        let mut out = [f1, f2, f3];
        for idx in 0..len {
            if !self.keep[idx] {
                for c in out.iter_mut() {
                    c[idx] = Complex64::default();
                }
                continue;
            }
            let k2 = self.k2[idx];
            if k2 == 0.0 {
                continue;
            }
            let k = [self.kvec[0][idx], self.kvec[1][idx], self.kvec[2][idx]];
            let dot = k[0] * out[0][idx] + k[1] * out[1][idx] + k[2] * out[2][idx];
            for a in 0..3 {
                out[a][idx] -= dot * (k[a] / k2);
            }
        }
        out
    }

    /// One integrating-factor RK4 step of size `state.dt`.
    pub fn step(&self, state: &SolverState) -> Result<SolverState, SolverError> {
        let dt = state.dt;
        let h = self.box_length / self.n as f64;
        let sup = state.u.sup_norm();
        let courant = sup * dt / h;
        if courant > self.cfl_limit {
            return Err(SolverError::Cfl {
                courant,
                limit: self.cfl_limit,
                advisory_dt: 0.9 * self.cfl_limit * h / sup,
            });
        }
        let len = self.k2.len();
        let half: Vec<f64> = self.k2.iter().map(|k2| (-k2 * dt / 2.0).exp()).collect();
        let full: Vec<f64> = half.iter().map(|e| e * e).collect();

        let mut u0 = state.u.spectral().clone();
        for c in u0.iter_mut() {
            for (idx, v) in c.iter_mut().enumerate() {
                if !self.keep[idx] {
                    *v = Complex64::default();
                }
            }
        }
        let combine = |f: &dyn Fn(usize, usize) -> Complex64| -> [Vec<Complex64>; 3] {
            std::array::from_fn(|c| (0..len).map(|idx| f(c, idx)).collect())
        };

        let k1 = self.tendency(&u0);
        let s2 = combine(&|c, i| half[i] * (u0[c][i] + 0.5 * dt * k1[c][i]));
        let k2 = self.tendency(&s2);
        let s3 = combine(&|c, i| half[i] * u0[c][i] + 0.5 * dt * k2[c][i]);
        let k3 = self.tendency(&s3);
        let s4 = combine(&|c, i| full[i] * u0[c][i] + dt * half[i] * k3[c][i]);
        let k4 = self.tendency(&s4);
        let u1 = combine(&|c, i| {
            full[i] * u0[c][i] + dt / 6.0 * (full[i] * k1[c][i] + 2.0 * half[i] * (k2[c][i] + k3[c][i]) + k4[c][i])
        });

        let next_u = match PeriodicField::from_spectral(self.n, self.box_length, &u1) {
            Ok(f) => f,
            Err(_) => {
                return Err(SolverError::NonFinite {
                    step: state.step_count + 1,
                    t: state.t + dt,
                    last_valid: Box::new(state.clone()),
                })
            }
        };
        let increment = self.dissipation_increment(&u0, [&k1, &k2, &k3, &k4], &u1, &half, dt, next_u.cell_volume());
        Ok(SolverState {
            u: next_u,
            t: state.t + dt,
            step_count: state.step_count + 1,
            dt,
            dissipation: state.dissipation + increment,
        })
    }

    /// `∫ ‖∇u‖₂² ds` over one step, mode by mode, on `G(τ) = |û|² e^{2|κ|²s}`.
    /// Modes with `b = 2|κ|²dt < 1` interpolate `G` quadratically through the
    /// third-order RK4 dense output at the midpoint; stiffer modes take `G`
    /// linear. Both are exact for pure viscous decay.
    #[allow(clippy::too_many_arguments)]
    fn dissipation_increment(
        &self,
        start: &[Vec<Complex64>; 3],
        stages: [&[Vec<Complex64>; 3]; 4],
        end: &[Vec<Complex64>; 3],
        half: &[f64],
        dt: f64,
        cell_volume: f64,
    ) -> f64 {
        let len = self.k2.len();
        let n3 = len as f64;
        let [k1, k2s, k3, k4] = stages;
        let terms: Vec<f64> = (0..len)
            .map(|idx| {
                let k2 = self.k2[idx];
                if k2 == 0.0 {
                    return 0.0;
                }
                let g0: f64 = start.iter().map(|c| c[idx].norm_sqr()).sum();
                let g1: f64 = end.iter().map(|c| c[idx].norm_sqr()).sum();
                let b = 2.0 * k2 * dt;
                if b < 1.0 {
                    let e = half[idx];
                    let gm: f64 = (0..3)
                        .map(|c| {
                            let mid = e * start[c][idx]
                                + dt * (5.0 / 24.0 * e * k1[c][idx] + (k2s[c][idx] + k3[c][idx]) / 6.0
                                    - k4[c][idx] / (24.0 * e));
                            mid.norm_sqr()
                        })
                        .sum();
                    let (w0, wm, w1) = quadratic_decay_weights(b);
                    return k2 * dt * (g0 * w0 + gm * wm + g1 * w1);
                }
                let (w0, w1) = decay_weights(b);
                let end = if w1.is_finite() {
                    g1 * w1
                } else if g1 > 0.0 {
                    (g1.ln() + b - 2.0 * b.ln()).exp()
                } else {
                    0.0
                };
                k2 * dt * (g0 * w0 + end)
            })
            .collect();
        cell_volume * crate::field::pairwise_sum(&terms) / n3
    }
}

/// Weights for `∫₀¹ e^{−bτ} G(τ) dτ` with `G` quadratic through τ = 0, 1/2, 1,
/// expressed on `|û(0)|²`, `|û(1/2)|² = e^{−b/2}G(1/2)` and `|û(1)|² = e^{−b}G(1)`.
/// Series moments; intended for `b < 1`.
fn quadratic_decay_weights(b: f64) -> (f64, f64, f64) {
    // M_m = ∫₀¹ τ^m e^{−bτ} dτ = Σ_j (−b)^j / (j! (m + j + 1)).
    let mut moments = [0.0f64; 3];
    let mut term = 1.0;
    for j in 0..30 {
        for (m, mm) in moments.iter_mut().enumerate() {
            *mm += term / (m + j + 1) as f64;
        }
        term *= -b / (j + 1) as f64;
    }
    let [m0, m1, m2] = moments;
    let w0 = m0 - 3.0 * m1 + 2.0 * m2;
    let wm = (4.0 * m1 - 4.0 * m2) * (b / 2.0).exp();
    let w1 = (2.0 * m2 - m1) * b.exp();
    (w0, wm, w1)
}

/// Quadrature weights for `∫₀¹ e^{−bτ} G(τ) dτ` with `G` linear in τ, expressed
/// on the endpoint values `|û(0)|²` and `|û(1)|² = e^{−b} G(1)`.
fn decay_weights(b: f64) -> (f64, f64) {
    if b < 1e-3 {
        let w0 = 0.5 - b / 6.0 + b * b / 24.0;
        let w1 = 0.5 + b / 6.0 + b * b / 24.0;
        return (w0, w1);
    }
    let w0 = (b + (-b).exp_m1()) / (b * b);
    // (e^b − 1 − b)/b², evaluated without overflow for large b.
    let w1 = if b < 700.0 { (b.exp_m1() - b) / (b * b) } else { f64::INFINITY };
    (w0, w1)
}

/// One diagnostic sample along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub step: u64,
    pub sup_u: f64,
    pub l2_u: f64,
    pub sup_w: f64,
    /// `‖∇u‖₂²` at this time.
    pub grad_energy: f64,
    /// `∫₀ᵗ ‖∇u‖₂² ds` accumulated during stepping.
    pub dissipation: f64,
    /// `(k, ‖D^k u‖_∞)` for the configured orders.
    pub dk_sup: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Set when integration stopped early; the samples up to that point are kept.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

pub fn sample_state(state: &SolverState, config: &SolverConfig) -> Result<Sample, SolverError> {
    let u = &state.u;
    let opts = DerivativeOptions {
        k_max: config.k_list.iter().copied().max().unwrap_or(0).max(crate::field::DEFAULT_K_MAX),
        ..Default::default()
    };
    let mut dk_sup = Vec::with_capacity(config.k_list.len());
    for &k in &config.k_list {
        let v = if config.all_indices {
            u.derivative_norm(k, f64::INFINITY, true, &opts)?
        } else {
            u.derivative(MultiIndex::along(0, k), &opts)?.sup_norm()
        };
        dk_sup.push((k, v));
    }
    Ok(Sample {
        t: state.t,
        step: state.step_count,
        sup_u: u.sup_norm(),
        l2_u: u.energy_l2(),
        sup_w: u.curl().sup_norm(),
        grad_energy: u.gradient_energy(),
        dissipation: state.dissipation,
        dk_sup,
    })
}

/// Integrates from `u0` to `config.t_end`, sampling every `sample_interval`.
/// The observer sees every sampled state (including t = 0).
pub fn run_with<F>(config: &SolverConfig, u0: PeriodicField, mut observer: F) -> Result<Trajectory, SolverError>
where
    F: FnMut(&SolverState, &Sample) -> Result<(), SolverError>,
{
    config.validate()?;
    if u0.n() != config.n {
        return Err(SolverError::Config(format!(
            "field resolution {} does not match configured n = {}",
            u0.n(),
            config.n
        )));
    }
    let stepper = Stepper::new(config.n, config.box_length, config.cfl_limit);
    let mut state = SolverState::new(u0, config.dt);
    let mut traj = Trajectory::default();
    let first = sample_state(&state, config)?;
    observer(&state, &first)?;
    traj.samples.push(first);

    // Sample times are multiples of sample_interval; the final time is always sampled.
    let mut next_index = 1u64;
    let tol = 1e-12 * config.t_end.max(1.0);

    if config.adaptive {
        while state.t < config.t_end - tol {
            let target = (next_index as f64 * config.sample_interval).min(config.t_end);
            let h = config.box_length / config.n as f64;
            let sup = state.u.sup_norm();
            let cfl_dt = if sup > 0.0 { 0.9 * config.cfl_limit * h / sup } else { f64::INFINITY };
            let horizon = config.safety * analyticity_timespan(sup, config.c_m, config.max_horizon);
            let mut dt = config.dt.min(cfl_dt).min(horizon);
            let remaining = target - state.t;
            if dt >= remaining - tol {
                dt = remaining;
            }
            state.dt = dt;
            state = match stepper.step(&state) {
                Ok(s) => s,
                Err(e) => {
                    traj.failure = Some(e.to_string());
                    return Ok(traj);
                }
            };
            if (state.t - target).abs() <= tol {
                state.t = target;
                let s = sample_state(&state, config)?;
                observer(&state, &s)?;
                traj.samples.push(s);
                next_index += 1;
            }
        }
    } else {
        let total_steps = (config.t_end / config.dt).round() as u64;
        let per_sample = ((config.sample_interval / config.dt).round() as u64).max(1);
        for step in 1..=total_steps {
            state = match stepper.step(&state) {
                Ok(s) => s,
                Err(e) => {
                    traj.failure = Some(e.to_string());
                    return Ok(traj);
                }
            };
            // Time from the step counter avoids drift from repeated addition.
            state.t = step as f64 * config.dt;
            if step % per_sample == 0 || step == total_steps {
                let s = sample_state(&state, config)?;
                observer(&state, &s)?;
                traj.samples.push(s);
            }
        }
    }
    Ok(traj)
}

pub fn run(config: &SolverConfig, u0: PeriodicField) -> Result<Trajectory, SolverError> {
    run_with(config, u0, |_, _| Ok(()))
}

/// `‖u₀‖₂² − ‖u(t)‖₂² − 2∫₀ᵗ‖∇u‖₂² ds` at every sample, using the dissipation
/// integral accumulated during stepping.
pub fn energy_budget(tr: &Trajectory) -> Vec<f64> {
    let Some(first) = tr.samples.first() else {
        return Vec::new();
    };
    let e0 = first.l2_u * first.l2_u;
    tr.samples.iter().map(|s| e0 - s.l2_u * s.l2_u - 2.0 * (s.dissipation - first.dissipation)).collect()
}

/// Same residual with the dissipation integral taken by the trapezoid rule
/// over the sampled `‖∇u‖₂²` values.
pub fn energy_budget_trapezoid(tr: &Trajectory) -> Vec<f64> {
    let Some(first) = tr.samples.first() else {
        return Vec::new();
    };
    let e0 = first.l2_u * first.l2_u;
    let mut integral = 0.0;
    let mut out = vec![0.0];
    for w in tr.samples.windows(2) {
        integral += 0.5 * (w[1].t - w[0].t) * (w[0].grad_energy + w[1].grad_energy);
        out.push(e0 - w[1].l2_u * w[1].l2_u - 2.0 * integral);
    }
    out
}
