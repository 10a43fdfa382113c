//! Periodic 3-component fields on a uniform N³ grid.
//!
//! Collocation points are `x_i = i·L/n`, `i = 0..n-1`. The physical arrays are
//! the source of truth; the spectral representation is computed on first use
//! and cached. Pointwise vector magnitude follows the max-component convention
//! `|v| = max_i |v_i|` used throughout the sparseness diagnostics.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::fft::{signed_mode, Fft3};

/// Default cap on the total order of field-level derivatives.
pub const DEFAULT_K_MAX: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid size {0} must be a power of two and at least 8")]
    InvalidResolution(usize),
    #[error("box length {0} must be positive and finite")]
    InvalidBoxLength(f64),
    #[error("component {component} has {got} values, expected {expected}")]
    LengthMismatch { component: usize, expected: usize, got: usize },
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("derivative order {order} exceeds the limit k_max = {limit}")]
    OrderAboveLimit { order: u32, limit: u32 },
    #[error("derivative of order {order} produced non-finite values")]
    DerivativeOverflow { order: u32 },
    #[error("L^p exponent must satisfy p >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("no interpolation parameter s in [j/m, 1] solves the exponent relation ({0})")]
    InfeasibleInterpolation(String),
}

/// Orders of differentiation per axis, `ζ = (ζ₁, ζ₂, ζ₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub [u32; 3]);

impl MultiIndex {
    pub fn new(z1: u32, z2: u32, z3: u32) -> Self {
        Self([z1, z2, z3])
    }

    /// `∂_{x_axis}^k`.
    pub fn along(axis: usize, k: u32) -> Self {
        let mut z = [0; 3];
        z[axis] = k;
        Self(z)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// All multi-indices of total order `k`, in lexicographically descending ζ₁.
    pub fn all_of_order(k: u32) -> Vec<MultiIndex> {
        let mut out = Vec::with_capacity(((k + 1) * (k + 2) / 2) as usize);
        for z1 in (0..=k).rev() {
            for z2 in (0..=k - z1).rev() {
                out.push(MultiIndex::new(z1, z2, k - z1 - z2));
            }
        }
        out
    }
}

/// Exponential spectral filter `exp(−a (|m|/m_N)^{2p})`, `m_N = n/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFilter {
    pub strength: f64,
    pub half_order: u32,
}

impl Default for ExpFilter {
    fn default() -> Self {
        Self { strength: 36.0, half_order: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeOptions {
    pub k_max: u32,
    pub filter: Option<ExpFilter>,
    /// Zero modes outside the 2/3 band before differentiating.
    pub dealias: bool,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        Self { k_max: DEFAULT_K_MAX, filter: None, dealias: false }
    }
}

/// True when the integer mode survives 2/3-rule truncation on an n-point axis.
pub fn in_dealias_band(mode: i64, n: usize) -> bool {
    3 * mode.unsigned_abs() < n as u64
}

#[derive(Debug, Clone)]
pub struct PeriodicField {
    n: usize,
    box_length: f64,
    components: [Vec<f64>; 3],
    spectral: OnceLock<[Vec<Complex64>; 3]>,
}

impl PeriodicField {
    pub fn new(n: usize, box_length: f64, components: [Vec<f64>; 3]) -> Result<Self, FieldError> {
        validate_grid(n, box_length)?;
        let expected = n * n * n;
        for (c, v) in components.iter().enumerate() {
            if v.len() != expected {
                return Err(FieldError::LengthMismatch { component: c, expected, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(FieldError::NonFinite);
            }
        }
        Ok(Self { n, box_length, components, spectral: OnceLock::new() })
    }

    pub fn zeros(n: usize, box_length: f64) -> Result<Self, FieldError> {
        let len = n * n * n;
        Self::new(n, box_length, [vec![0.0; len], vec![0.0; len], vec![0.0; len]])
    }

    /// Samples `f` at every collocation point.
    pub fn from_fn(n: usize, box_length: f64, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self, FieldError> {
        validate_grid(n, box_length)?;
        let h = box_length / n as f64;
        let len = n * n * n;
        let mut comps = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = f([i as f64 * h, j as f64 * h, k as f64 * h]);
                    let idx = (i * n + j) * n + k;
                    for c in 0..3 {
                        comps[c][idx] = v[c];
                    }
                }
            }
        }
        Self::new(n, box_length, comps)
    }

    /// Builds a field from spectral coefficients; the physical values are the
    /// real part of the inverse transform.
    pub fn from_spectral(n: usize, box_length: f64, spectral: &[Vec<Complex64>; 3]) -> Result<Self, FieldError> {
        validate_grid(n, box_length)?;
        let plan = Fft3::shared(n);
        let mut comps: [Vec<f64>; 3] = Default::default();
        for c in 0..3 {
            let mut buf = spectral[c].clone();
            plan.inverse(&mut buf);
            comps[c] = buf.iter().map(|z| z.re).collect();
        }
        Self::new(n, box_length, comps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Grid spacing `h = L/n`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.components
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.components
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn grid_coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let [i, j, k] = self.grid_coords(idx);
        [i as f64 * h, j as f64 * h, k as f64 * h]
    }

    pub fn value(&self, idx: usize) -> [f64; 3] {
        [self.components[0][idx], self.components[1][idx], self.components[2][idx]]
    }

    /// Max-component magnitude at grid point `idx`.
    pub fn magnitude(&self, idx: usize) -> f64 {
        self.value(idx).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Spectral coefficients (unnormalized forward transform), computed on demand.
    pub fn spectral(&self) -> &[Vec<Complex64>; 3] {
        self.spectral.get_or_init(|| {
            let plan = Fft3::shared(self.n);
            let mut out: [Vec<Complex64>; 3] = Default::default();
            for c in 0..3 {
                let mut buf: Vec<Complex64> = self.components[c].iter().map(|&x| Complex64::new(x, 0.0)).collect();
                plan.forward(&mut buf);
                out[c] = buf;
            }
            out
        })
    }

    pub fn scaled(&self, beta: f64) -> Result<Self, FieldError> {
        let comps = self.components.clone().map(|v| v.into_iter().map(|x| beta * x).collect());
        Self::new(self.n, self.box_length, comps)
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        Wavenumbers::new(self.n, self.box_length)
    }

    /// `max_x max_i |f_i(x)|`.
    pub fn sup_norm(&self) -> f64 {
        self.components.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Rectangle-rule `L^p` norm of the max-component magnitude; `p = ∞`
    /// delegates to [`sup_norm`](Self::sup_norm).
    pub fn lp_norm(&self, p: f64) -> Result<f64, FieldError> {
        if p.is_nan() || p < 1.0 {
            return Err(FieldError::InvalidExponent(p));
        }
        if p.is_infinite() {
            return Ok(self.sup_norm());
        }
        let sup = self.sup_norm();
        if sup == 0.0 {
            return Ok(0.0);
        }
        // Normalizing by the sup keeps |f|^p in range for large p.
        let powers: Vec<f64> = (0..self.len()).map(|idx| (self.magnitude(idx) / sup).powf(p)).collect();
        Ok(sup * (self.cell_volume() * pairwise_sum(&powers)).powf(1.0 / p))
    }

    /// Euclidean `L²` norm, `(∫ Σ_i f_i² dx)^{1/2}`: the kinetic-energy norm.
    pub fn energy_l2(&self) -> f64 {
        let squares: Vec<f64> = (0..self.len()).map(|idx| self.value(idx).iter().map(|v| v * v).sum()).collect();
        (self.cell_volume() * pairwise_sum(&squares)).sqrt()
    }

    /// Euclidean energy evaluated from the spectral coefficients (Plancherel).
    pub fn spectral_energy(&self) -> f64 {
        let spec = self.spectral();
        let n3 = self.len() as f64;
        let terms: Vec<f64> = (0..self.len()).map(|idx| spec.iter().map(|c| c[idx].norm_sqr()).sum()).collect();
        self.cell_volume() * pairwise_sum(&terms) / n3
    }

    /// `‖∇f‖₂² = Σ_i ‖∇f_i‖₂²`, computed spectrally.
    pub fn gradient_energy(&self) -> f64 {
        let spec = self.spectral();
        let wn = self.wavenumbers();
        let n3 = self.len() as f64;
        let terms: Vec<f64> = (0..self.len())
            .map(|idx| wn.magnitude_sq(idx) * spec.iter().map(|c| c[idx].norm_sqr()).sum::<f64>())
            .collect();
        self.cell_volume() * pairwise_sum(&terms) / n3
    }

    /// Component-wise `∂^ζ f` by wavenumber multiplication.
    pub fn derivative(&self, zeta: MultiIndex, opts: &DerivativeOptions) -> Result<PeriodicField, FieldError> {
        let order = zeta.order();
        if order > opts.k_max {
            return Err(FieldError::OrderAboveLimit { order, limit: opts.k_max });
        }
        if order == 0 && opts.filter.is_none() && !opts.dealias {
            return Ok(self.clone());
        }
        let n = self.n;
        let wn = self.wavenumbers();
        let mut multiplier = vec![Complex64::new(0.0, 0.0); self.len()];
        for (idx, m) in multiplier.iter_mut().enumerate() {
            let modes = wn.modes_at(idx);
            if opts.dealias && !modes.iter().all(|&q| in_dealias_band(q, n)) {
                continue;
            }
            let mut factor = Complex64::new(1.0, 0.0);
            for axis in 0..3 {
                let z = zeta.0[axis];
                if z == 0 {
                    continue;
                }
                // Odd derivatives of the Nyquist mode are not representable.
                if z % 2 == 1 && modes[axis] == (n / 2) as i64 {
                    factor = Complex64::new(0.0, 0.0);
                    break;
                }
                factor *= (Complex64::new(0.0, wn.scale * modes[axis] as f64)).powu(z);
            }
            if let Some(filter) = opts.filter {
                let rel = (modes.iter().map(|&q| (q * q) as f64).sum::<f64>()).sqrt() / (n / 2) as f64;
                factor *= (-filter.strength * rel.powi(2 * filter.half_order as i32)).exp();
            }
            *m = factor;
        }
        let spec = self.spectral();
        let out: [Vec<Complex64>; 3] =
            std::array::from_fn(|c| spec[c].iter().zip(&multiplier).map(|(a, b)| a * b).collect());
        PeriodicField::from_spectral(n, self.box_length, &out).map_err(|_| FieldError::DerivativeOverflow { order })
    }

    /// Spectral curl `∇ × f`.
    pub fn curl(&self) -> PeriodicField {
        let wn = self.wavenumbers();
        let spec = self.spectral();
        let n = self.n;
        let len = self.len();
        let mut out: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); len]);
        for idx in 0..len {
            let k = wn.odd_derivative_vector(idx);
            let i = Complex64::new(0.0, 1.0);
            let (a, b, c) = (spec[0][idx], spec[1][idx], spec[2][idx]);
            out[0][idx] = i * (k[1] * c - k[2] * b);
            out[1][idx] = i * (k[2] * a - k[0] * c);
            out[2][idx] = i * (k[0] * b - k[1] * a);
        }
        PeriodicField::from_spectral(n, self.box_length, &out).expect("curl of a finite field is finite")
    }

    /// Spectral divergence as a scalar grid.
    pub fn divergence(&self) -> Vec<f64> {
        let wn = self.wavenumbers();
        let spec = self.spectral();
        let len = self.len();
        let mut buf = vec![Complex64::default(); len];
        for (idx, v) in buf.iter_mut().enumerate() {
            let k = wn.odd_derivative_vector(idx);
            *v = Complex64::new(0.0, 1.0) * (k[0] * spec[0][idx] + k[1] * spec[1][idx] + k[2] * spec[2][idx]);
        }
        Fft3::shared(self.n).inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `max_x |div f(x)|`.
    pub fn divergence_sup(&self) -> f64 {
        self.divergence().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Trilinear periodic interpolation of component `c` at physical point `x`.
    pub fn interpolate(&self, c: usize, x: [f64; 3]) -> f64 {
        interpolate_trilinear(&self.components[c], self.n, self.spacing(), x)
    }

    /// Largest `‖∂^ζ f‖_p` over multi-indices of order `j` (or only `∂_{x₁}^j`).
    pub fn derivative_norm(
        &self,
        j: u32,
        p: f64,
        all_indices: bool,
        opts: &DerivativeOptions,
    ) -> Result<f64, FieldError> {
        let indices = if all_indices { MultiIndex::all_of_order(j) } else { vec![MultiIndex::along(0, j)] };
        let mut best = 0.0f64;
        for zeta in indices {
            best = best.max(self.derivative(zeta, opts)?.lp_norm(p)?);
        }
        Ok(best)
    }
}

fn validate_grid(n: usize, box_length: f64) -> Result<(), FieldError> {
    if n < 8 || !n.is_power_of_two() {
        return Err(FieldError::InvalidResolution(n));
    }
    if !(box_length.is_finite() && box_length > 0.0) {
        return Err(FieldError::InvalidBoxLength(box_length));
    }
    Ok(())
}

pub(crate) fn interpolate_trilinear(data: &[f64], n: usize, h: f64, x: [f64; 3]) -> f64 {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let u = (x[a] / h).rem_euclid(n as f64);
        let f = u.floor();
        base[a] = (f as usize) % n;
        frac[a] = u - f;
    }
    let mut acc = 0.0;
    for di in 0..2 {
        let wi = if di == 0 { 1.0 - frac[0] } else { frac[0] };
        let i = (base[0] + di) % n;
        for dj in 0..2 {
            let wj = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
            let j = (base[1] + dj) % n;
            for dk in 0..2 {
                let wk = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
                let k = (base[2] + dk) % n;
                acc += wi * wj * wk * data[(i * n + j) * n + k];
            }
        }
    }
    acc
}

/// Wavenumber lookup for an n³ grid with period `L`.
#[derive(Debug, Clone)]
pub struct Wavenumbers {
    n: usize,
    /// `2π/L`.
    pub scale: f64,
}

impl Wavenumbers {
    pub fn new(n: usize, box_length: f64) -> Self {
        Self { n, scale: 2.0 * PI / box_length }
    }

    pub fn modes_at(&self, idx: usize) -> [i64; 3] {
        let n = self.n;
        [signed_mode(idx / (n * n), n), signed_mode((idx / n) % n, n), signed_mode(idx % n, n)]
    }

    /// Physical wavevector with Nyquist components zeroed (first-derivative use).
    pub fn odd_derivative_vector(&self, idx: usize) -> [f64; 3] {
        let nyq = (self.n / 2) as i64;
        self.modes_at(idx).map(|m| if m == nyq { 0.0 } else { self.scale * m as f64 })
    }

    /// Physical wavevector including Nyquist components.
    pub fn vector(&self, idx: usize) -> [f64; 3] {
        self.modes_at(idx).map(|m| self.scale * m as f64)
    }

    pub fn magnitude_sq(&self, idx: usize) -> f64 {
        self.vector(idx).iter().map(|k| k * k).sum()
    }

    pub fn dealias_keep(&self, idx: usize) -> bool {
        self.modes_at(idx).iter().all(|&m| in_dealias_band(m, self.n))
    }
}

/// Order-independent pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Result of a Gagliardo–Nirenberg ratio evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnRatio {
    pub s: f64,
    pub ratio: f64,
}

/// Interpolation parameter `s` solving `1/p = j/d + (1/r − m/d)s + (1−s)/q`
/// with `d = 3` and `j/m ≤ s ≤ 1`.
pub fn gn_exponent(j: u32, m: u32, p: f64, q: f64, r: f64) -> Result<f64, FieldError> {
    const D: f64 = 3.0;
    if m == 0 || j > m {
        return Err(FieldError::InfeasibleInterpolation(format!(
            "orders must satisfy 0 <= j <= m, m >= 1 (j = {j}, m = {m})"
        )));
    }
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let lhs = inv(p) - j as f64 / D - inv(q);
    let coeff = inv(r) - m as f64 / D - inv(q);
    if coeff.abs() < 1e-15 {
        return Err(FieldError::InfeasibleInterpolation("exponent relation is degenerate in s".into()));
    }
    let s = lhs / coeff;
    let lower = j as f64 / m as f64;
    if s < lower - 1e-12 || s > 1.0 + 1e-12 {
        return Err(FieldError::InfeasibleInterpolation(format!("s = {s} outside [{lower}, 1]")));
    }
    Ok(s.clamp(lower, 1.0))
}

/// `‖D^j f‖_p / (‖D^m f‖_r^s ‖f‖_q^{1−s})`, with `D^j` the max over all
/// multi-indices of order `j`.
pub fn gn_ratio(
    f: &PeriodicField,
    j: u32,
    m: u32,
    p: f64,
    q: f64,
    r: f64,
    opts: &DerivativeOptions,
) -> Result<GnRatio, FieldError> {
    let s = gn_exponent(j, m, p, q, r)?;
    let top = f.derivative_norm(j, p, true, opts)?;
    let dm = f.derivative_norm(m, r, true, opts)?;
    let base = f.lp_norm(q)?;
    let denom = dm.powf(s) * base.powf(1.0 - s);
    Ok(GnRatio { s, ratio: top / denom })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * PI;

    fn abc(n: usize) -> PeriodicField {
        PeriodicField::from_fn(n, TWO_PI, |[x, y, z]| [z.sin() + y.cos(), x.sin() + z.cos(), y.sin() + x.cos()])
            .unwrap()
    }

    fn rel_sup_diff(a: &PeriodicField, b: &PeriodicField) -> f64 {
        let mut d = 0.0f64;
        for c in 0..3 {
            for (x, y) in a.component(c).iter().zip(b.component(c)) {
                d = d.max((x - y).abs());
            }
        }
        d / a.sup_norm().max(b.sup_norm()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(PeriodicField::zeros(12, TWO_PI).unwrap_err(), FieldError::InvalidResolution(12));
        assert_eq!(PeriodicField::zeros(4, TWO_PI).unwrap_err(), FieldError::InvalidResolution(4));
        assert!(PeriodicField::zeros(8, -1.0).is_err());
        let nan = PeriodicField::from_fn(8, TWO_PI, |_| [f64::NAN, 0.0, 0.0]);
        assert_eq!(nan.unwrap_err(), FieldError::NonFinite);
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let f = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [x.sin(), 0.0, 0.0]).unwrap();
        let d = f.derivative(MultiIndex::along(0, 1), &DerivativeOptions::default()).unwrap();
        let expect = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [x.cos(), 0.0, 0.0]).unwrap();
        assert!(rel_sup_diff(&d, &expect) < 1e-13);
        assert!((d.sup_norm() - 1.0).abs() < 1e-13);
        for k in 0..=DEFAULT_K_MAX {
            let dk = f.derivative(MultiIndex::along(0, k), &DerivativeOptions::default()).unwrap();
            // round-off in the Nyquist band is amplified by (n/2)^k
            let tol = 1e-13 + 1e-15 * 8f64.powi(k as i32);
            assert!((dk.sup_norm() - 1.0).abs() < tol, "k = {k}");
        }
    }

    #[test]
    fn second_derivative_of_mode_three() {
        let a = 0.7;
        let f = PeriodicField::from_fn(16, TWO_PI, |[_, y, _]| [0.0, a * (3.0 * y).sin(), 0.0]).unwrap();
        let d = f.derivative(MultiIndex::new(0, 2, 0), &DerivativeOptions::default()).unwrap();
        let expect = PeriodicField::from_fn(16, TWO_PI, |[_, y, _]| [0.0, -9.0 * a * (3.0 * y).sin(), 0.0]).unwrap();
        assert!(rel_sup_diff(&d, &expect) < 1e-13);
        assert!((d.sup_norm() - 9.0 * a).abs() < 1e-12);
    }

    #[test]
    fn order_above_limit_is_rejected() {
        let f = abc(8);
        let err = f.derivative(MultiIndex::along(0, 13), &DerivativeOptions::default()).unwrap_err();
        assert_eq!(err, FieldError::OrderAboveLimit { order: 13, limit: 12 });
    }

    #[test]
    fn overflow_is_flagged_with_order() {
        let f = PeriodicField::from_fn(8, TWO_PI, |[x, _, _]| [1e300 * (3.0 * x).sin(), 0.0, 0.0]).unwrap();
        let opts = DerivativeOptions { k_max: 40, ..Default::default() };
        let err = f.derivative(MultiIndex::along(0, 40), &opts).unwrap_err();
        assert_eq!(err, FieldError::DerivativeOverflow { order: 40 });
    }

    #[test]
    fn nyquist_zeroed_for_odd_orders_only() {
        // cos(4x) is the Nyquist mode on an 8-point grid.
        let f = PeriodicField::from_fn(8, TWO_PI, |[x, _, _]| [(4.0 * x).cos(), 0.0, 0.0]).unwrap();
        let opts = DerivativeOptions::default();
        assert!(f.derivative(MultiIndex::along(0, 1), &opts).unwrap().sup_norm() < 1e-14);
        let d2 = f.derivative(MultiIndex::along(0, 2), &opts).unwrap();
        assert!((d2.sup_norm() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn filter_damps_high_modes() {
        let f = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [x.sin() + (7.0 * x).sin(), 0.0, 0.0]).unwrap();
        let opts = DerivativeOptions { filter: Some(ExpFilter::default()), ..Default::default() };
        let d = f.derivative(MultiIndex::along(0, 0), &opts).unwrap();
        // mode 1 survives essentially untouched; mode 7 at 7/8 of Nyquist is damped by e^{-36·0.875^16}.
        let damp = (-36.0 * (7.0f64 / 8.0).powi(16)).exp();
        let expect =
            PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [x.sin() + damp * (7.0 * x).sin(), 0.0, 0.0]).unwrap();
        assert!(rel_sup_diff(&d, &expect) < 1e-10);
    }

    #[test]
    fn sup_norm_examples() {
        let c = PeriodicField::from_fn(8, TWO_PI, |_| [1.0, -2.0, 0.5]).unwrap();
        assert_eq!(c.sup_norm(), 2.0);
        let s = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [x.sin(), 0.0, 0.0]).unwrap();
        assert!((s.sup_norm() - 1.0).abs() < 1e-15);
        assert_eq!(PeriodicField::zeros(8, TWO_PI).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn lp_norm_examples() {
        let s = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [x.sin(), 0.0, 0.0]).unwrap();
        let expect = (4.0 * PI.powi(3)).sqrt();
        assert!((s.lp_norm(2.0).unwrap() - expect).abs() < 1e-12 * expect);
        assert!((expect - 11.1366).abs() < 1e-4);
        let z = PeriodicField::zeros(8, TWO_PI).unwrap();
        assert_eq!(z.lp_norm(3.0).unwrap(), 0.0);
        let c = PeriodicField::from_fn(8, TWO_PI, |_| [1.5, 0.0, 0.0]).unwrap();
        assert!((c.lp_norm(2.0).unwrap() - 1.5 * TWO_PI.powf(1.5)).abs() < 1e-12);
        assert_eq!(c.lp_norm(f64::INFINITY).unwrap(), 1.5);
        assert_eq!(c.lp_norm(0.5).unwrap_err(), FieldError::InvalidExponent(0.5));
    }

    #[test]
    fn curl_examples() {
        let u = abc(16);
        assert!(rel_sup_diff(&u.curl(), &u) < 1e-13);
        let c = PeriodicField::from_fn(8, TWO_PI, |_| [1.0, 2.0, 3.0]).unwrap();
        assert!(c.curl().sup_norm() < 1e-14);
        let v = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [0.0, 0.0, x.sin()]).unwrap();
        let expect = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [0.0, -x.cos(), 0.0]).unwrap();
        // ∇ × (0,0,sin x) = (∂_y sin x, −∂_x sin x, 0) = (0, −cos x, 0).
        assert!(rel_sup_diff(&v.curl(), &expect) < 1e-13);
    }

    #[test]
    fn gradient_fields_are_curl_free() {
        // ∇φ for φ = sin x cos 2y + cos 3z.
        let g = PeriodicField::from_fn(16, TWO_PI, |[x, y, z]| {
            [x.cos() * (2.0 * y).cos(), -2.0 * x.sin() * (2.0 * y).sin(), -3.0 * (3.0 * z).sin()]
        })
        .unwrap();
        assert!(g.curl().sup_norm() < 1e-10);
    }

    #[test]
    fn round_trip_and_plancherel() {
        let u = PeriodicField::from_fn(16, TWO_PI, |[x, y, z]| {
            [(x + 2.0 * y).sin() * z.cos(), (3.0 * z).cos() + 0.2, (x - y).sin().powi(2)]
        })
        .unwrap();
        let back = PeriodicField::from_spectral(16, TWO_PI, u.spectral()).unwrap();
        assert!(rel_sup_diff(&u, &back) < 1e-12);
        let e_phys = u.energy_l2().powi(2);
        assert!((e_phys - u.spectral_energy()).abs() < 1e-10 * e_phys);
    }

    #[test]
    fn derivative_composition() {
        let u = abc(16);
        let opts = DerivativeOptions::default();
        let twice =
            u.derivative(MultiIndex::along(0, 1), &opts).unwrap().derivative(MultiIndex::along(0, 1), &opts).unwrap();
        let direct = u.derivative(MultiIndex::along(0, 2), &opts).unwrap();
        assert!(rel_sup_diff(&twice, &direct) < 1e-10);
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let f = PeriodicField::from_fn(8, TWO_PI, |[x, y, z]| [x + 2.0 * y + 3.0 * z, 0.0, 0.0]).unwrap();
        let h = f.spacing();
        assert!((f.interpolate(0, [h, 2.0 * h, 3.0 * h]) - 14.0 * h).abs() < 1e-12);
        assert!((f.interpolate(0, [1.5 * h, 2.0 * h, 3.0 * h]) - 14.5 * h).abs() < 1e-12);
        // Wraps around the period.
        assert!((f.interpolate(0, [h + TWO_PI, 2.0 * h, 3.0 * h - TWO_PI]) - 14.0 * h).abs() < 1e-12);
    }

    #[test]
    fn gn_single_mode_ratio_is_one() {
        for kappa in [1.0, 2.0, 3.0] {
            let f = PeriodicField::from_fn(16, TWO_PI, |[x, _, _]| [0.0, (kappa * x).sin(), 0.0]).unwrap();
            let g =
                gn_ratio(&f, 1, 2, f64::INFINITY, f64::INFINITY, f64::INFINITY, &DerivativeOptions::default()).unwrap();
            assert!((g.s - 0.5).abs() < 1e-15);
            assert!((g.ratio - 1.0).abs() < 1e-12, "kappa = {kappa}: {}", g.ratio);
        }
    }

    #[test]
    fn gn_constant_field_with_s_zero() {
        let f = PeriodicField::from_fn(8, TWO_PI, |_| [0.3, -0.1, 0.2]).unwrap();
        let g = gn_ratio(&f, 0, 2, 2.0, 2.0, 2.0, &DerivativeOptions::default()).unwrap();
        assert_eq!(g.s, 0.0);
        assert!((g.ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gn_infeasible_exponents_rejected() {
        // j = 2, m = 1 violates j <= m.
        assert!(gn_exponent(2, 1, 2.0, 2.0, 2.0).is_err());
        // s = 2 > 1.
        assert!(gn_exponent(1, 2, f64::INFINITY, f64::INFINITY, 2.0).is_err());
    }

    #[test]
    fn multi_indices_of_order() {
        let all = MultiIndex::all_of_order(2);
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(|z| z.order() == 2));
        assert_eq!(all[0], MultiIndex::new(2, 0, 0));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }
}
