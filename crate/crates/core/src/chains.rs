//! Chains of derivatives.
//!
//! The normalized chain value is
//! `R(j, c) = ‖D^j u‖^{1/(j+1)} / (c^{j/(j+1)} (j!)^{1/(j+1)})`, evaluated in
//! the log domain. Quantifiers over all higher orders are truncated at the
//! largest computed order `j_max`; reports carry that order.

use libm::lgamma;
use thiserror::Error;

/// Chain values closer than this relative distance compare as equal; they
/// are only determined to round-off by the stored norms.
pub const TIE_RTOL: f64 = 1e-12;

/// `a ≥ b` up to [`TIE_RTOL`].
pub fn tie_geq(a: f64, b: f64) -> bool {
    a >= b - TIE_RTOL * a.abs().max(b.abs())
}

/// `a > b` beyond [`TIE_RTOL`].
pub fn tie_gt(a: f64, b: f64) -> bool {
    !tie_geq(b, a)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("window ℓ = {ell}, k = {k} is outside the computed orders 0..={j_max}")]
    Window { ell: usize, k: usize, j_max: usize },
    #[error("M* = {0} must exceed 1")]
    ThresholdTooSmall(f64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("regressor is constant; the exponent is not identifiable")]
    DegenerateRegressor,
    #[error("invalid section ladder: {0}")]
    Ladder(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `ln R(j, c)`; `−∞` when the norm is zero.
pub fn log_chain_value(j: u32, c: f64, norm: f64) -> f64 {
    let jf = j as f64;
    (norm.ln() - jf * c.ln() - lgamma(jf + 1.0)) / (jf + 1.0)
}

pub fn chain_value(j: u32, c: f64, norm: f64) -> f64 {
    if j == 0 {
        return norm;
    }
    log_chain_value(j, c, norm).exp()
}

/// `R(j, c)` for `j = 0..norms.len()`.
pub fn chain_values(norms: &[f64], c: f64) -> Vec<f64> {
    norms.iter().enumerate().map(|(j, &b)| chain_value(j as u32, c, b)).collect()
}

/// `T_j = (M*−1)²·c^{2j/(j+1)}·‖D^j u‖^{−2/(j+1)}`.
pub fn chain_timespan(j: u32, c: f64, norm: f64, m_star: f64) -> Result<f64, ChainError> {
    if !(m_star > 1.0) {
        return Err(ChainError::ThresholdTooSmall(m_star));
    }
    if !(c > 0.0 && norm >= 0.0) {
        return Err(ChainError::InvalidArgument(format!(
            "need c > 0 and a nonnegative norm, got c = {c}, norm = {norm}"
        )));
    }
    let jf = j as f64;
    let log_t = 2.0 * (m_star - 1.0).ln() + 2.0 * jf / (jf + 1.0) * c.ln() - 2.0 / (jf + 1.0) * norm.ln();
    Ok(log_t.exp())
}

/// Sup-norms `‖D^j u(t)‖_∞` for `j = 0..=j_max` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub t: f64,
    pub norms: Vec<f64>,
}

impl ChainState {
    pub fn j_max(&self) -> usize {
        self.norms.len().saturating_sub(1)
    }

    pub fn values(&self, c: f64) -> Vec<f64> {
        chain_values(&self.norms, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderClass {
    Ascending,
    Descending,
    Both,
    Neither,
}

impl std::fmt::Display for OrderClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrderClass::Ascending => "ascending",
            OrderClass::Descending => "descending",
            OrderClass::Both => "both",
            OrderClass::Neither => "neither",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderReport {
    /// `R(j) ≤ R(k)` for all `ℓ ≤ j ≤ k`, up to [`TIE_RTOL`].
    pub ascending: bool,
    /// `R(k) ≥ R(j)` for all `k < j ≤ j_max`; `None` when `k = j_max` leaves
    /// nothing to compare.
    pub descending: Option<bool>,
    pub truncated_at: usize,
}

impl OrderReport {
    pub fn class(&self) -> OrderClass {
        match (self.ascending, self.descending == Some(true)) {
            (true, true) => OrderClass::Both,
            (true, false) => OrderClass::Ascending,
            (false, true) => OrderClass::Descending,
            (false, false) => OrderClass::Neither,
        }
    }
}

/// Ascending/descending order of the chain `r` at `k` over the window from `ℓ`.
pub fn classify_order(r: &[f64], ell: usize, k: usize) -> Result<OrderReport, ChainError> {
    let j_max = r.len().checked_sub(1).ok_or(ChainError::Window { ell, k, j_max: 0 })?;
    if !(ell <= k && k <= j_max) {
        return Err(ChainError::Window { ell, k, j_max });
    }
    let ascending = r[ell..=k].iter().all(|&v| tie_geq(r[k], v));
    let descending = (k < j_max).then(|| r[k + 1..].iter().all(|&v| tie_geq(r[k], v)));
    Ok(OrderReport { ascending, descending, truncated_at: j_max })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscendingCondition {
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// `c‖u₀‖₂‖u₀‖_∞^{d/2−1}(ℓ!)^{1/2}ℓ/Γ(ℓ/2+1) ≤ C·(k!)^{1/(k+1)}` with the
/// implied constant `C` as a knob.
pub fn ascending_chain_condition(
    c: f64,
    ell: u32,
    k: u32,
    u0_l2: f64,
    u0_sup: f64,
    d: f64,
    implied_constant: f64,
) -> Result<AscendingCondition, ChainError> {
    if k < ell || ell == 0 {
        return Err(ChainError::InvalidArgument(format!("need 1 ≤ ℓ ≤ k, got ℓ = {ell}, k = {k}")));
    }
    if !(c >= 0.0 && u0_l2 >= 0.0 && u0_sup >= 0.0 && implied_constant > 0.0) {
        return Err(ChainError::InvalidArgument("condition inputs must be nonnegative".into()));
    }
    let l = ell as f64;
    let kf = k as f64;
    let log_lhs =
        c.ln() + u0_l2.ln() + (d / 2.0 - 1.0) * u0_sup.ln() + 0.5 * lgamma(l + 1.0) + l.ln() - lgamma(l / 2.0 + 1.0);
    let log_lhs = if log_lhs.is_nan() { f64::NEG_INFINITY } else { log_lhs };
    let log_rhs = implied_constant.ln() + lgamma(kf + 1.0) / (kf + 1.0);
    Ok(AscendingCondition { log_lhs, log_rhs, lhs: log_lhs.exp(), rhs: log_rhs.exp(), satisfied: log_lhs <= log_rhs })
}

/// Indices `n` with `values[m] > values[n]` for every `m > n`.
pub fn detect_escape_times(values: &[f64]) -> Result<Vec<usize>, ChainError> {
    if values.len() < 2 {
        return Err(ChainError::TooFewSamples { need: 2, got: values.len() });
    }
    let mut later_min = f64::INFINITY;
    let mut marked = Vec::new();
    for n in (0..values.len()).rev() {
        if n + 1 < values.len() && later_min > values[n] {
            marked.push(n);
        }
        later_min = later_min.min(values[n]);
    }
    marked.reverse();
    Ok(marked)
}

/// Breakpoints `ℓ₀ < ℓ₁ < …` with `ℓ_{i+1} ≥ 2ℓ_i`, the per-section constants
/// `c(ℓ_i)` and the string length `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionLadder {
    breakpoints: Vec<usize>,
    constants: Vec<f64>,
    q: usize,
}

impl SectionLadder {
    pub fn new(breakpoints: Vec<usize>, constants: Vec<f64>, q: usize) -> Result<Self, ChainError> {
        if breakpoints.len() < 2 {
            return Err(ChainError::Ladder("need at least one section".into()));
        }
        if breakpoints[0] == 0 {
            return Err(ChainError::Ladder("ℓ₀ must be positive".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] < 2 * w[0]) {
            return Err(ChainError::Ladder("breakpoints must satisfy ℓ_{i+1} ≥ 2ℓ_i".into()));
        }
        if constants.len() != breakpoints.len() - 1 {
            return Err(ChainError::Ladder(format!(
                "{} sections need {} constants, got {}",
                breakpoints.len() - 1,
                breakpoints.len() - 1,
                constants.len()
            )));
        }
        if constants.iter().any(|&c| !(c > 0.0 && c < 1.0)) || constants.windows(2).any(|w| w[1] > w[0]) {
            return Err(ChainError::Ladder("constants must be non-increasing and lie in (0,1)".into()));
        }
        if q == 0 {
            return Err(ChainError::Ladder("string length q must be positive".into()));
        }
        Ok(Self { breakpoints, constants, q })
    }

    /// Doubling ladder `ℓ_{i+1} = 2ℓ_i` from `ell0` while `ℓ_{i+1} ≤ top`, with
    /// one constant `c` for every section.
    pub fn doubling(ell0: usize, top: usize, c: f64, q: usize) -> Result<Self, ChainError> {
        let mut breakpoints = vec![ell0];
        while ell0 > 0 && 2 * breakpoints.last().unwrap() <= top {
            breakpoints.push(2 * breakpoints.last().unwrap());
        }
        let constants = vec![c; breakpoints.len().saturating_sub(1)];
        Self::new(breakpoints, constants, q)
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sections(&self) -> usize {
        self.constants.len()
    }
}

/// `ℓ₀ = ⌈log_{1+ε}‖u₀‖_∞⌉`, clamped to `[1, 4]`.
pub fn default_ell0(u0_sup: f64, epsilon: f64) -> usize {
    let raw = (u0_sup.ln() / epsilon.ln_1p()).ceil();
    if raw.is_finite() {
        raw.clamp(1.0, 4.0) as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionType {
    A,
    B,
    /// Neither condition holds on the computed orders (ties or truncation).
    Undetermined,
}

impl std::fmt::Display for SectionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SectionType::A => "A",
            SectionType::B => "B",
            SectionType::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionLabel {
    pub start: usize,
    pub end: usize,
    pub c: f64,
    /// First maximizer of `R(·, c)` on `[start, end]`.
    pub m: usize,
    pub label: SectionType,
    /// Largest `k > end` satisfying the Type-A inequality.
    pub witness: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringLabel {
    /// Sections `first..first + q`.
    pub first: usize,
    pub start: usize,
    pub end: usize,
    pub label: SectionType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderLabels {
    pub sections: Vec<SectionLabel>,
    pub strings: Vec<StringLabel>,
    pub truncated_at: usize,
}

/// Type-A/Type-B labels of every section and of every run of `q` consecutive
/// sections, from the sup-norms `norms[j] = ‖D^j u‖_∞`.
pub fn label_sections(norms: &[f64], ladder: &SectionLadder) -> Result<LadderLabels, ChainError> {
    let j_max = norms.len().checked_sub(1).ok_or(ChainError::Ladder("empty chain".into()))?;
    let top = *ladder.breakpoints.last().unwrap();
    if top > j_max {
        return Err(ChainError::Ladder(format!("top breakpoint {top} exceeds j_max = {j_max}")));
    }
    let mut sections = Vec::with_capacity(ladder.sections());
    for (i, &c) in ladder.constants.iter().enumerate() {
        let (start, end) = (ladder.breakpoints[i], ladder.breakpoints[i + 1]);
        let r = chain_values(norms, c);
        let peak = r[start..=end].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = (start..=end).find(|&j| tie_geq(r[j], peak)).unwrap_or(start);
        let mut witness = None;
        let mut running = r[m..=end].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (k, &rk) in r.iter().enumerate().skip(end + 1) {
            running = running.max(rk);
            if tie_geq(rk, running) {
                witness = Some(k);
            }
        }
        let later = &r[m + 1..];
        let label = if witness.is_some() {
            SectionType::A
        } else if !later.is_empty() && later.iter().all(|&v| tie_gt(r[m], v)) {
            SectionType::B
        } else {
            SectionType::Undetermined
        };
        sections.push(SectionLabel { start, end, c, m, label, witness });
    }
    let q = ladder.q;
    let strings = (0..sections.len().saturating_sub(q - 1))
        .map(|first| {
            let members = &sections[first..first + q];
            let label = if members.iter().all(|s| s.label == SectionType::A) {
                SectionType::A
            } else if members.iter().any(|s| s.label == SectionType::B) {
                SectionType::B
            } else {
                SectionType::Undetermined
            };
            StringLabel { first, start: members[0].start, end: members[q - 1].end, label }
        })
        .collect();
    Ok(LadderLabels { sections, strings, truncated_at: j_max })
}

/// Scale exponents at derivative order `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub k: u32,
    /// Sparseness exponent sufficient for regularity, `1/(k+1)`.
    pub regularity: f64,
    /// Exponent guaranteed a priori, `1/(k+3/2)`.
    pub apriori: f64,
    /// Energy-level exponent `1/(3/2·(k+1))`.
    pub energy: f64,
    /// `(k+1)/(k+3/2)`.
    pub gap_ratio: f64,
    pub vorticity_regularity: f64,
    pub vorticity_apriori: f64,
}

pub fn gap_row(k: u32) -> GapRow {
    let kf = k as f64;
    GapRow {
        k,
        regularity: 1.0 / (kf + 1.0),
        apriori: 1.0 / (kf + 1.5),
        energy: 1.0 / (1.5 * (kf + 1.0)),
        gap_ratio: (kf + 1.0) / (kf + 1.5),
        vorticity_regularity: 1.0 / (kf + 2.0),
        vorticity_apriori: 1.0 / (kf + 2.5),
    }
}

pub fn scaling_gap_table(ks: impl IntoIterator<Item = u32>) -> Vec<GapRow> {
    ks.into_iter().map(gap_row).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFit {
    pub alpha: f64,
    /// Prefactor `ĉ` of `ρ* = ĉ·‖D^k u‖^{−α}`.
    pub prefactor: f64,
    pub r_squared: f64,
    pub used: usize,
    /// Samples dropped for a non-finite or non-positive ρ* or norm.
    pub excluded: usize,
}

/// Least-squares fit of `ln ρ* = −α·ln‖D^k u‖_∞ + ln ĉ` over `(ρ*, norm)` pairs.
pub fn alpha_fit(samples: &[(f64, f64)]) -> Result<AlphaFit, ChainError> {
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(rho, norm)| rho.is_finite() && *rho > 0.0 && norm.is_finite() && *norm > 0.0)
        .map(|(rho, norm)| (norm.ln(), rho.ln()))
        .collect();
    let excluded = samples.len() - points.len();
    if points.len() < 4 {
        return Err(ChainError::TooFewSamples { need: 4, got: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) * n {
        return Err(ChainError::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(AlphaFit { alpha: -slope, prefactor: intercept.exp(), r_squared, used: points.len(), excluded })
}
