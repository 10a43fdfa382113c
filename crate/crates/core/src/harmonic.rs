//! Harmonic-measure tools: the extremal slit configuration in the unit disk,
//! the (λ, δ, h) tuning relations, the two-constant majorization and the
//! blow-up exclusion inequality.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Walkers closer than this to the boundary are absorbed.
pub const EXIT_TOLERANCE: f64 = 1e-6;
/// Fewest walkers accepted by [`mc_harmonic_measure`].
pub const MIN_WALKERS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
    #[error("need at least {MIN_WALKERS} walkers, got {0}")]
    TooFewWalkers(usize),
    #[error("start point must lie inside the unit disk and off the slits")]
    BadStart,
    #[error("η ≤ 0: the exclusion inequality needs δ(1+λ) > 1")]
    DegenerateEta,
    #[error("invalid boundary set: {0}")]
    BadBoundary(String),
}

/// Checks `value ∈ [0,1]` (closed) or `(0,1)` (open).
fn unit_interval(name: &'static str, value: f64, closed: bool) -> Result<(), HarmonicError> {
    let (ok, range) =
        if closed { ((0.0..=1.0).contains(&value), "[0,1]") } else { (value > 0.0 && value < 1.0, "(0,1)") };
    if ok {
        Ok(())
    } else {
        Err(HarmonicError::OutOfRange { name, value, range })
    }
}

/// `(2/π)·arcsin((1−q)/(1+q))`, the building block of every h below.
fn arcsin_ratio(q: f64) -> f64 {
    2.0 / PI * ((1.0 - q) / (1.0 + q)).clamp(-1.0, 1.0).asin()
}

/// Harmonic measure at 0 of `K_λ = [−1, −1+λ] ∪ [1−λ, 1]` in `𝔻 \ K_λ`.
pub fn extremal_h(lambda: f64) -> Result<f64, HarmonicError> {
    unit_interval("λ", lambda, true)?;
    let q = (1.0 - lambda) * (1.0 - lambda);
    Ok(arcsin_ratio(q))
}

/// `h(δ) = (2/π)·arcsin((1−δ²)/(1+δ²))`.
pub fn tuning_h(delta: f64) -> f64 {
    arcsin_ratio(delta * delta)
}

/// `h* = (2/π)·arcsin((1−δ^{2/d})/(1+δ^{2/d}))`.
pub fn h_star(delta: f64, d: f64) -> f64 {
    arcsin_ratio(delta.powf(2.0 / d))
}

/// `η` with `(1+η)^d = (δ(1+λ)+1)/2`.
pub fn eta(lambda: f64, delta: f64, d: f64) -> f64 {
    ((delta * (1.0 + lambda) + 1.0) / 2.0).powf(1.0 / d) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningPair {
    pub lambda: f64,
    pub delta: f64,
    pub h: f64,
    /// `δ > 1/(1+λ)`.
    pub constraint_ok: bool,
    /// `|λh + (1−h) − 2λ|`.
    pub residual: f64,
}

/// Level fraction λ balancing the majorization, `λh + (1−h) = 2λ`.
pub fn solve_tuning_pair(delta: f64) -> Result<TuningPair, HarmonicError> {
    unit_interval("δ", delta, false)?;
    let h = tuning_h(delta);
    let lambda = (1.0 - h) / (2.0 - h);
    Ok(TuningPair {
        lambda,
        delta,
        h,
        constraint_ok: delta > 1.0 / (1.0 + lambda),
        residual: (lambda * h + (1.0 - h) - 2.0 * lambda).abs(),
    })
}

/// Two-constant bound `m·h + M·(1−h)`.
pub fn majorize(m: f64, big_m: f64, h: f64) -> Result<f64, HarmonicError> {
    if !(m <= big_m) {
        return Err(HarmonicError::OutOfRange { name: "m", value: m, range: "(−∞, M]" });
    }
    unit_interval("h", h, true)?;
    Ok(m * h + big_m * (1.0 - h))
}

/// Target set on the closed unit disk: arcs of the circle (angles in radians,
/// counter-clockwise from `start` to `end`) and slits `[a, b] ⊂ [−1, 1]` on
/// the real diameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySet {
    arcs: Vec<(f64, f64)>,
    slits: Vec<(f64, f64)>,
}

impl BoundarySet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full_circle() -> Self {
        Self { arcs: vec![(0.0, 2.0 * PI)], slits: Vec::new() }
    }

    /// `K_λ` as two slits touching the circle.
    pub fn extremal(lambda: f64) -> Result<Self, HarmonicError> {
        unit_interval("λ", lambda, false)?;
        Self::slits(vec![(-1.0, -1.0 + lambda), (1.0 - lambda, 1.0)])
    }

    pub fn slits(slits: Vec<(f64, f64)>) -> Result<Self, HarmonicError> {
        for &(a, b) in &slits {
            if !(a >= -1.0 && a <= b && b <= 1.0) {
                return Err(HarmonicError::BadBoundary(format!("slit [{a}, {b}] is not inside [−1, 1]")));
            }
        }
        Ok(Self { arcs: Vec::new(), slits })
    }

    pub fn arcs(arcs: Vec<(f64, f64)>) -> Result<Self, HarmonicError> {
        for &(s, e) in &arcs {
            if !(s.is_finite() && e.is_finite() && e >= s && e - s <= 2.0 * PI) {
                return Err(HarmonicError::BadBoundary(format!("arc ({s}, {e}) is malformed")));
            }
        }
        Ok(Self { arcs, slits: Vec::new() })
    }

    /// Total slit length.
    pub fn slit_measure(&self) -> f64 {
        self.slits.iter().map(|(a, b)| b - a).sum()
    }

    fn on_arc(&self, theta: f64) -> bool {
        self.arcs.iter().any(|&(s, e)| {
            let rel = (theta - s).rem_euclid(2.0 * PI);
            rel <= e - s || e - s >= 2.0 * PI
        })
    }

    fn slit_distance(&self, x: f64, y: f64) -> f64 {
        self.slits
            .iter()
            .map(|&(a, b)| {
                let dx = x.clamp(a, b) - x;
                (dx * dx + y * y).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    /// Binomial standard error `√(p(1−p)/n)`.
    pub stderr: f64,
    pub walkers: usize,
}

/// Walk-on-spheres estimate of the harmonic measure of `set` at `z` in
/// `𝔻 \ slits`. Walker `w` draws from ChaCha stream `w` of `seed`, so the
/// result does not depend on evaluation order.
pub fn mc_harmonic_measure(
    set: &BoundarySet,
    z: [f64; 2],
    n_walkers: usize,
    seed: u64,
) -> Result<McEstimate, HarmonicError> {
    if n_walkers < MIN_WALKERS {
        return Err(HarmonicError::TooFewWalkers(n_walkers));
    }
    if !(z[0].hypot(z[1]) < 1.0) || set.slit_distance(z[0], z[1]) == 0.0 {
        return Err(HarmonicError::BadStart);
    }
    let hits = (0..n_walkers).filter(|&w| walk(set, z, seed, w as u64)).count();
    let p = hits as f64 / n_walkers as f64;
    Ok(McEstimate { estimate: p, stderr: (p * (1.0 - p) / n_walkers as f64).sqrt(), walkers: n_walkers })
}

fn walk(set: &BoundarySet, z: [f64; 2], seed: u64, stream: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (mut x, mut y) = (z[0], z[1]);
    loop {
        let to_circle = 1.0 - x.hypot(y);
        let to_slit = set.slit_distance(x, y);
        let d = to_circle.min(to_slit);
        if d < EXIT_TOLERANCE {
            return if to_slit <= to_circle { true } else { set.on_arc(y.atan2(x)) };
        }
        let phi = rng.random_range(0.0..2.0 * PI);
        x += d * phi.cos();
        y += d * phi.sin();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusionInputs {
    pub lambda: f64,
    pub delta: f64,
    pub d: f64,
    pub epsilon: f64,
    pub ell: u32,
    pub k: u32,
    pub c: f64,
    pub mu: f64,
}

impl ExclusionInputs {
    pub fn eta(&self) -> f64 {
        eta(self.lambda, self.delta, self.d)
    }

    pub fn h_star(&self) -> f64 {
        h_star(self.delta, self.d)
    }
}

/// Smallest ℓ ≥ 0 with `‖u₀‖_∞ ≤ (1+ε)^ℓ`.
pub fn default_ell(u0_sup: f64, epsilon: f64) -> u32 {
    if u0_sup <= 1.0 {
        return 0;
    }
    (u0_sup.ln() / epsilon.ln_1p()).ceil() as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusionReport {
    pub value: f64,
    pub eta: f64,
    pub h_star: f64,
    /// `2e/η`.
    pub prefactor: f64,
    pub mu: f64,
    pub satisfied: bool,
}

/// `λh* + exp((2e/η)(1+ε)^{ℓ/k} c^{1/(k+1)})(1−h*)` and its comparison with μ.
pub fn exclusion_lhs(inputs: &ExclusionInputs) -> Result<ExclusionReport, HarmonicError> {
    unit_interval("λ", inputs.lambda, false)?;
    unit_interval("δ", inputs.delta, false)?;
    unit_interval("c", inputs.c, false)?;
    if !(inputs.d >= 1.0) {
        return Err(HarmonicError::OutOfRange { name: "d", value: inputs.d, range: "[1, ∞)" });
    }
    if !(inputs.epsilon > 0.0) {
        return Err(HarmonicError::OutOfRange { name: "ε", value: inputs.epsilon, range: "(0, ∞)" });
    }
    if inputs.k < 1 {
        return Err(HarmonicError::OutOfRange { name: "k", value: inputs.k as f64, range: "[1, ∞)" });
    }
    let eta = inputs.eta();
    if !(eta > 0.0) {
        return Err(HarmonicError::DegenerateEta);
    }
    let h_star = inputs.h_star();
    let prefactor = 2.0 * E / eta;
    let k = inputs.k as f64;
    let exponent = prefactor * (1.0 + inputs.epsilon).powf(inputs.ell as f64 / k) * inputs.c.powf(1.0 / (k + 1.0));
    let value = inputs.lambda * h_star + exponent.exp() * (1.0 - h_star);
    Ok(ExclusionReport { value, eta, h_star, prefactor, mu: inputs.mu, satisfied: value <= inputs.mu })
}
