//! Super-level-set sparseness at scale.
//!
//! A super-level set `S_i^± = {x : f_i^±(x) > λ‖f‖_∞}` is *δ-sparse at scale r
//! around x₀* in the volumetric sense when it fills at most a fraction δ of the
//! ball `B_r(x₀)`, and in the 1D sense when some diameter of length 2r through
//! x₀ is filled at most to the fraction δ. Volumetric ratios use the
//! voxel-center rule over an open periodic ball with a voxel-count denominator;
//! 1D ratios threshold a trilinear interpolant along the segment.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::fft::Fft3;
use crate::field::{interpolate_trilinear, DerivativeOptions, FieldError, MultiIndex, PeriodicField};

/// Spatial dimension of every grid in this crate.
pub const DIM: f64 = 3.0;
/// Number of `c` values scanned in `[1/c₀, c₀]`.
pub const C_GRID_LEN: usize = 32;
/// Number of scales scanned in `[2h, L/4]` when estimating ρ*.
pub const SCALE_GRID_LEN: usize = 24;
/// Smallest stratified subsample accepted by the point scans.
pub const MIN_SUBSAMPLE: usize = 4096;
/// Number of levels used by [`weak_lp_tail`].
pub const WEAK_LEVELS: usize = 32;

const MASK_MAGIC: &[u8; 4] = b"SPMK";
const MASK_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SparsenessError {
    #[error("level fraction λ = {0} must lie in (0,1)")]
    LevelOutOfRange(f64),
    #[error("sparseness ratio δ = {0} must lie in (0,1)")]
    RatioOutOfRange(f64),
    #[error("size parameter c₀ = {0} must exceed 1")]
    InvalidSizeParameter(f64),
    #[error("scaling exponent α = {0} must be positive")]
    InvalidAlpha(f64),
    #[error("scale r = {r} is outside the resolvable range [{min}, {max}]")]
    Unresolvable { r: f64, min: f64, max: f64 },
    #[error("field has zero sup-norm")]
    ZeroField,
    #[error("δ = {delta} must exceed 1/(1+λ) = {bound} for λ = {lambda}")]
    TuningConstraint { delta: f64, lambda: f64, bound: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mask grids differ")]
    GridMismatch,
    #[error("malformed mask dump: {0}")]
    MaskFormat(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    fn slot(component: usize, sign: Sign) -> usize {
        2 * component + usize::from(sign == Sign::Minus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsenessMode {
    OneD,
    Volumetric,
}

impl std::fmt::Display for SparsenessMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SparsenessMode::OneD => "1d",
            SparsenessMode::Volumetric => "vol",
        })
    }
}

impl std::str::FromStr for SparsenessMode {
    type Err = SparsenessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1d" | "1D" => Ok(SparsenessMode::OneD),
            "vol" => Ok(SparsenessMode::Volumetric),
            other => Err(SparsenessError::InvalidArgument(format!("unknown sparseness mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsenessParams {
    pub lambda: f64,
    pub delta: f64,
    pub c0: f64,
    pub alpha: f64,
}

impl SparsenessParams {
    pub fn validate(&self) -> Result<(), SparsenessError> {
        check_lambda(self.lambda)?;
        check_delta(self.delta)?;
        if !(self.c0.is_finite() && self.c0 > 1.0) {
            return Err(SparsenessError::InvalidSizeParameter(self.c0));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(SparsenessError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }

    /// Whether δ sits in the range `(1/(1+λ), 1)` required by the `W^{-k,p}` lemma.
    pub fn tuning_admissible(&self) -> bool {
        self.delta > 1.0 / (1.0 + self.lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<(), SparsenessError> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(SparsenessError::LevelOutOfRange(lambda))
    }
}

fn check_delta(delta: f64) -> Result<(), SparsenessError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(SparsenessError::RatioOutOfRange(delta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskProvenance {
    pub component: usize,
    pub sign: Sign,
    pub lambda: f64,
    /// CRC-32 of the source component's little-endian bytes.
    pub source_id: u32,
    pub sup_norm: f64,
}

/// Boolean occupancy on the collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetMask {
    n: usize,
    box_length: f64,
    bits: Vec<bool>,
    provenance: Option<MaskProvenance>,
}

impl LevelSetMask {
    /// Mask from raw occupancy, e.g. a synthetic test geometry.
    pub fn from_bits(n: usize, box_length: f64, bits: Vec<bool>) -> Result<Self, SparsenessError> {
        PeriodicField::zeros(n, box_length)?;
        if bits.len() != n * n * n {
            return Err(SparsenessError::Field(FieldError::LengthMismatch {
                component: 0,
                expected: n * n * n,
                got: bits.len(),
            }));
        }
        Ok(Self { n, box_length, bits, provenance: None })
    }

    /// Mask of the grid points satisfying `pred(position)`.
    pub fn from_predicate(n: usize, box_length: f64, pred: impl Fn([f64; 3]) -> bool) -> Result<Self, SparsenessError> {
        let h = box_length / n as f64;
        let bits = (0..n * n * n)
            .map(|idx| {
                let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
                pred([i as f64 * h, j as f64 * h, k as f64 * h])
            })
            .collect();
        Self::from_bits(n, box_length, bits)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn provenance(&self) -> Option<&MaskProvenance> {
        self.provenance.as_ref()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    /// Bit-packed dump: magic, version, grid, provenance, then voxels LSB first.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), SparsenessError> {
        w.write_all(MASK_MAGIC)?;
        w.write_all(&MASK_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.box_length.to_le_bytes())?;
        match &self.provenance {
            None => w.write_all(&[0u8])?,
            Some(p) => {
                w.write_all(&[1u8, p.component as u8, u8::from(p.sign == Sign::Minus)])?;
                w.write_all(&p.lambda.to_le_bytes())?;
                w.write_all(&p.source_id.to_le_bytes())?;
                w.write_all(&p.sup_norm.to_le_bytes())?;
            }
        }
        let mut packed = vec![0u8; self.bits.len().div_ceil(8)];
        for (idx, &b) in self.bits.iter().enumerate() {
            if b {
                packed[idx / 8] |= 1 << (idx % 8);
            }
        }
        w.write_all(&packed)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, SparsenessError> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MASK_MAGIC {
            return Err(SparsenessError::MaskFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != MASK_VERSION {
            return Err(SparsenessError::MaskFormat(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let box_length = f64::from_le_bytes(read_array(&mut r)?);
        PeriodicField::zeros(n, box_length).map_err(|e| SparsenessError::MaskFormat(e.to_string()))?;
        let [flag] = read_array::<1>(&mut r)?;
        let provenance = match flag {
            0 => None,
            1 => {
                let [component, sign] = read_array::<2>(&mut r)?;
                if component > 2 || sign > 1 {
                    return Err(SparsenessError::MaskFormat("bad provenance".into()));
                }
                Some(MaskProvenance {
                    component: component as usize,
                    sign: if sign == 1 { Sign::Minus } else { Sign::Plus },
                    lambda: f64::from_le_bytes(read_array(&mut r)?),
                    source_id: u32::from_le_bytes(read_array(&mut r)?),
                    sup_norm: f64::from_le_bytes(read_array(&mut r)?),
                })
            }
            _ => return Err(SparsenessError::MaskFormat("bad provenance flag".into())),
        };
        let len = n * n * n;
        let mut packed = vec![0u8; len.div_ceil(8)];
        read_exact(&mut r, &mut packed)?;
        let bits = (0..len).map(|idx| packed[idx / 8] & (1 << (idx % 8)) != 0).collect();
        Ok(Self { n, box_length, bits, provenance })
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), SparsenessError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => SparsenessError::MaskFormat("truncated".into()),
        _ => SparsenessError::Io(e),
    })
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N], SparsenessError> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

/// `S_i^± = {x : f_i^±(x) > λ‖f‖_∞}` on the grid.
pub fn superlevel_mask(
    f: &PeriodicField,
    component: usize,
    sign: Sign,
    lambda: f64,
) -> Result<LevelSetMask, SparsenessError> {
    check_lambda(lambda)?;
    if component > 2 {
        return Err(SparsenessError::InvalidArgument(format!("component {component} out of range")));
    }
    let sup = f.sup_norm();
    let threshold = lambda * sup;
    let s = sign.factor();
    let bits = f.component(component).iter().map(|&v| s * v > threshold).collect();
    Ok(LevelSetMask {
        n: f.n(),
        box_length: f.box_length(),
        bits,
        provenance: Some(MaskProvenance {
            component,
            sign,
            lambda,
            source_id: component_id(f.component(component)),
            sup_norm: sup,
        }),
    })
}

fn component_id(values: &[f64]) -> u32 {
    let mut hasher = crc32fast::Hasher::new();
    for v in values {
        hasher.update(&v.to_le_bytes());
    }
    hasher.finalize()
}

/// Scalar whose positive part marks the set sampled by the 1D test.
///
/// Built from a field component, the set is `{s·f_i > λ‖f‖_∞}` with the
/// component interpolated trilinearly. Built from a mask, the 0/1 occupancy is
/// interpolated and cut at 1/2.
#[derive(Debug, Clone)]
pub struct LineIndicator {
    n: usize,
    spacing: f64,
    values: Vec<f64>,
    threshold: f64,
}

impl LineIndicator {
    pub fn from_field(f: &PeriodicField, component: usize, sign: Sign, lambda: f64) -> Result<Self, SparsenessError> {
        check_lambda(lambda)?;
        if component > 2 {
            return Err(SparsenessError::InvalidArgument(format!("component {component} out of range")));
        }
        let s = sign.factor();
        Ok(Self {
            n: f.n(),
            spacing: f.spacing(),
            values: f.component(component).iter().map(|v| s * v).collect(),
            threshold: lambda * f.sup_norm(),
        })
    }

    pub fn from_mask(mask: &LevelSetMask) -> Self {
        Self {
            n: mask.n,
            spacing: mask.spacing(),
            values: mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            threshold: 0.5,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn excess(&self, x: [f64; 3]) -> f64 {
        interpolate_trilinear(&self.values, self.n, self.spacing, x) - self.threshold
    }
}

/// Occupied fraction of the segment `(x₀ − rν, x₀ + rν)` and whether it is `≤ δ`.
pub fn sparse_1d(
    set: &LineIndicator,
    x0: [f64; 3],
    nu: [f64; 3],
    r: f64,
    delta: f64,
) -> Result<(bool, f64), SparsenessError> {
    let norm = (nu[0] * nu[0] + nu[1] * nu[1] + nu[2] * nu[2]).sqrt();
    if !(norm.is_finite() && (norm - 1.0).abs() < 1e-9) {
        return Err(SparsenessError::InvalidArgument(format!("direction must be a unit vector, |ν| = {norm}")));
    }
    let min = 0.5 * set.spacing;
    if !(r.is_finite() && r >= min) {
        return Err(SparsenessError::Unresolvable { r, min, max: f64::INFINITY });
    }
    let ratio = segment_ratio(set, x0, nu, r);
    Ok((ratio <= delta, ratio))
}

fn segment_ratio(set: &LineIndicator, x0: [f64; 3], nu: [f64; 3], r: f64) -> f64 {
    // Samples at spacing ≤ h/2; each interval contributes its linearly
    // interpolated positive part.
    let intervals = ((4.0 * r / set.spacing).ceil() as usize).max(2);
    let step = 2.0 * r / intervals as f64;
    let at = |m: usize| {
        let t = -r + m as f64 * step;
        set.excess([x0[0] + t * nu[0], x0[1] + t * nu[1], x0[2] + t * nu[2]])
    };
    let mut occupied = 0.0;
    let mut prev = at(0);
    for m in 1..=intervals {
        let next = at(m);
        occupied += step * positive_fraction(prev, next);
        prev = next;
    }
    (occupied / (2.0 * r)).clamp(0.0, 1.0)
}

/// Fraction of `[0,1]` on which the linear interpolant of `a → b` is positive.
fn positive_fraction(a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        (true, false) => a / (a - b),
        (false, true) => b / (b - a),
    }
}

/// Candidate directions: the 3 axes, the 4 main diagonals, then `m_dirs`
/// Fibonacci-sphere points.
pub fn direction_set(m_dirs: usize) -> Vec<[f64; 3]> {
    let s = 1.0 / 3f64.sqrt();
    let mut dirs =
        vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [s, s, s], [s, s, -s], [s, -s, s], [-s, s, s]];
    let golden = PI * (3.0 - 5f64.sqrt());
    for i in 0..m_dirs {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / m_dirs as f64;
        let rad = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        dirs.push([rad * phi.cos(), rad * phi.sin(), z]);
    }
    dirs
}

/// Direction minimizing the 1D occupancy over [`direction_set`]; ties keep
/// the earlier candidate.
pub fn best_direction(
    set: &LineIndicator,
    x0: [f64; 3],
    r: f64,
    m_dirs: usize,
) -> Result<([f64; 3], f64), SparsenessError> {
    if m_dirs < 3 {
        return Err(SparsenessError::InvalidArgument(format!("m_dirs = {m_dirs} must be at least 3")));
    }
    best_of(set, x0, r, &direction_set(m_dirs))
}

fn best_of(set: &LineIndicator, x0: [f64; 3], r: f64, dirs: &[[f64; 3]]) -> Result<([f64; 3], f64), SparsenessError> {
    let mut best = (dirs[0], f64::INFINITY);
    for &nu in dirs {
        let (_, ratio) = sparse_1d(set, x0, nu, r, 1.0)?;
        if ratio < best.1 {
            best = (nu, ratio);
        }
    }
    Ok(best)
}

fn any_direction_passes(set: &LineIndicator, x0: [f64; 3], r: f64, delta: f64, dirs: &[[f64; 3]]) -> bool {
    dirs.iter().any(|&nu| segment_ratio(set, x0, nu, r) <= delta)
}

/// Resolvable range of the volumetric test, `[2h, L/2]`.
pub fn vol_scale_range(n: usize, box_length: f64) -> (f64, f64) {
    (2.0 * box_length / n as f64, 0.5 * box_length)
}

fn check_vol_scale(n: usize, box_length: f64, r: f64) -> Result<(), SparsenessError> {
    let (min, max) = vol_scale_range(n, box_length);
    // Tolerate round-off at the range ends so `c·h` grids hit them exactly.
    if r.is_finite() && r >= min * (1.0 - 1e-12) && r <= max * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(SparsenessError::Unresolvable { r, min, max })
    }
}

/// Integer offsets of the open ball `|o|·h < r`.
pub fn ball_offsets(n: usize, box_length: f64, r: f64) -> Vec<[i64; 3]> {
    let h = box_length / n as f64;
    let rr = (r / h) * (r / h);
    let reach = (r / h).ceil() as i64;
    let mut out = Vec::new();
    for di in -reach..=reach {
        for dj in -reach..=reach {
            for dk in -reach..=reach {
                if ((di * di + dj * dj + dk * dk) as f64) < rr {
                    out.push([di, dj, dk]);
                }
            }
        }
    }
    out
}

/// Occupied voxel fraction of the periodic ball `B_r(x₀)` around grid point `x0`.
pub fn sparse_vol(mask: &LevelSetMask, x0: usize, r: f64, delta: f64) -> Result<(bool, f64), SparsenessError> {
    let n = mask.n;
    check_vol_scale(n, mask.box_length, r)?;
    if x0 >= mask.bits.len() {
        return Err(SparsenessError::InvalidArgument(format!("grid index {x0} out of range")));
    }
    let offsets = ball_offsets(n, mask.box_length, r);
    let base = [(x0 / (n * n)) as i64, ((x0 / n) % n) as i64, (x0 % n) as i64];
    let ni = n as i64;
    let hits = offsets
        .iter()
        .filter(|o| {
            let i = (base[0] + o[0]).rem_euclid(ni) as usize;
            let j = (base[1] + o[1]).rem_euclid(ni) as usize;
            let k = (base[2] + o[2]).rem_euclid(ni) as usize;
            mask.bits[(i * n + j) * n + k]
        })
        .count();
    let ratio = hits as f64 / offsets.len() as f64;
    Ok((ratio <= delta, ratio))
}

/// Occupied-voxel counts of `B_r(x)` for every grid point, by FFT convolution.
pub struct BallCounter {
    n: usize,
    box_length: f64,
    plan: std::sync::Arc<Fft3>,
    mask_hat: Vec<Complex64>,
}

impl BallCounter {
    pub fn new(mask: &LevelSetMask) -> Self {
        let plan = Fft3::shared(mask.n);
        let mut mask_hat: Vec<Complex64> =
            mask.bits.iter().map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0)).collect();
        plan.forward(&mut mask_hat);
        Self { n: mask.n, box_length: mask.box_length, plan, mask_hat }
    }

    /// `(counts, ball voxel count)` at radius `r`.
    pub fn counts(&self, r: f64) -> Result<(Vec<u32>, u32), SparsenessError> {
        check_vol_scale(self.n, self.box_length, r)?;
        let n = self.n;
        let offsets = ball_offsets(n, self.box_length, r);
        let ni = n as i64;
        let mut kernel = vec![Complex64::default(); n * n * n];
        for o in &offsets {
            let i = o[0].rem_euclid(ni) as usize;
            let j = o[1].rem_euclid(ni) as usize;
            let k = o[2].rem_euclid(ni) as usize;
            kernel[(i * n + j) * n + k].re += 1.0;
        }
        self.plan.forward(&mut kernel);
        // The ball is symmetric, so convolution equals correlation.
        for (kv, mv) in kernel.iter_mut().zip(&self.mask_hat) {
            *kv *= mv;
        }
        self.plan.inverse(&mut kernel);
        let counts = kernel.iter().map(|z| z.re.round().max(0.0) as u32).collect();
        Ok((counts, offsets.len() as u32))
    }
}

/// Whether `sparse_vol` passes at every grid point.
pub fn semi_mixed(mask: &LevelSetMask, r: f64, delta: f64) -> Result<bool, SparsenessError> {
    let (counts, total) = BallCounter::new(mask).counts(r)?;
    Ok(counts.iter().all(|&c| c as f64 / total as f64 <= delta))
}

/// Component and sign attaining `|f(x₀)| = max_i |f_i(x₀)|`; ties go to the
/// lowest index, `+` before `−`.
pub fn dominant_component(f: &PeriodicField, idx: usize) -> (usize, Sign) {
    let v = f.value(idx);
    let mut best = (0, Sign::Plus, v[0].max(0.0));
    for (c, &vc) in v.iter().enumerate() {
        for sign in [Sign::Plus, Sign::Minus] {
            let part = (sign.factor() * vc).max(0.0);
            if part > best.2 {
                best = (c, sign, part);
            }
        }
    }
    (best.0, best.1)
}

/// Which grid points a scan visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSampling {
    All,
    /// One point per cubic block, at a seeded position inside the block.
    Stratified {
        count: usize,
        seed: u64,
    },
}

impl PointSampling {
    pub fn indices(&self, n: usize) -> Result<Vec<usize>, SparsenessError> {
        match *self {
            PointSampling::All => Ok((0..n * n * n).collect()),
            PointSampling::Stratified { count, seed } => {
                if count < MIN_SUBSAMPLE {
                    return Err(SparsenessError::InvalidArgument(format!(
                        "stratified subsample of {count} points is below {MIN_SUBSAMPLE}"
                    )));
                }
                if count >= n * n * n {
                    return Ok((0..n * n * n).collect());
                }
                let mut blocks = 1;
                while blocks * blocks * blocks < count {
                    blocks *= 2;
                }
                let blocks = blocks.min(n);
                let b = n / blocks;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(blocks * blocks * blocks);
                for bi in 0..blocks {
                    for bj in 0..blocks {
                        for bk in 0..blocks {
                            let i = bi * b + rng.random_range(0..b);
                            let j = bj * b + rng.random_range(0..b);
                            let k = bk * b + rng.random_range(0..b);
                            out.push((i * n + j) * n + k);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub sampling: PointSampling,
    /// Fibonacci directions added to the axes and diagonals in 1D mode.
    pub m_dirs: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { sampling: PointSampling::All, m_dirs: 16 }
    }
}

/// Geometric grid of [`C_GRID_LEN`] values in `[1/c₀, c₀]`.
pub fn c_grid(c0: f64) -> Vec<f64> {
    geometric_grid(1.0 / c0, c0, C_GRID_LEN)
}

/// Geometric grid of [`SCALE_GRID_LEN`] scales in `[2h, L/4]`.
pub fn scale_grid(n: usize, box_length: f64) -> Vec<f64> {
    geometric_grid(2.0 * box_length / n as f64, 0.25 * box_length, SCALE_GRID_LEN)
}

fn geometric_grid(lo: f64, hi: f64, len: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..len)
        .map(|m| match m {
            0 => lo,
            m if m == len - 1 => hi,
            m => lo * (ratio * m as f64 / (len - 1) as f64).exp(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub index: usize,
    pub component: usize,
    pub sign: Sign,
    /// `c` values from the scan grid at which the point is sparse.
    pub admissible_c: Vec<f64>,
    /// Smallest admissible scale, or the largest resolvable one if none passed.
    pub tested_r: f64,
    pub direction: Option<[f64; 3]>,
    pub ratio_1d: Option<f64>,
    pub ratio_vol: Option<f64>,
    pub resolved: bool,
}

impl PointReport {
    pub fn passes(&self) -> bool {
        self.resolved && !self.admissible_c.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsenessReport {
    pub mode: SparsenessMode,
    pub params: SparsenessParams,
    pub sup_norm: f64,
    pub c_grid: Vec<f64>,
    pub points: Vec<PointReport>,
    pub resolved: usize,
    pub unresolved: usize,
    pub passing: usize,
    /// `passing / resolved`, or 0 when nothing was resolved.
    pub fraction_passing: f64,
    /// Largest over resolved points of the smallest admissible scale; `+∞`
    /// if some resolved point has none.
    pub rho_star: f64,
    /// Hull of the `c` values admissible at every resolved point.
    pub common_c: Option<(f64, f64)>,
    /// Volume fraction covered by the union of all six super-level sets.
    pub union_fraction: f64,
    pub verdict: bool,
}

struct MaskCache<'a> {
    f: &'a PeriodicField,
    lambda: f64,
    masks: [Option<LevelSetMask>; 6],
    lines: [Option<LineIndicator>; 6],
    counters: [Option<BallCounter>; 6],
}

impl<'a> MaskCache<'a> {
    fn new(f: &'a PeriodicField, lambda: f64) -> Self {
        Self { f, lambda, masks: Default::default(), lines: Default::default(), counters: Default::default() }
    }

    fn mask(&mut self, c: usize, s: Sign) -> &LevelSetMask {
        let slot = Sign::slot(c, s);
        let (f, lambda) = (self.f, self.lambda);
        self.masks[slot].get_or_insert_with(|| superlevel_mask(f, c, s, lambda).expect("validated level"))
    }

    fn line(&mut self, c: usize, s: Sign) -> &LineIndicator {
        let slot = Sign::slot(c, s);
        let (f, lambda) = (self.f, self.lambda);
        self.lines[slot].get_or_insert_with(|| LineIndicator::from_field(f, c, s, lambda).expect("validated level"))
    }

    fn counter(&mut self, c: usize, s: Sign) -> &BallCounter {
        let slot = Sign::slot(c, s);
        if self.counters[slot].is_none() {
            let counter = BallCounter::new(self.mask(c, s));
            self.counters[slot] = Some(counter);
        }
        self.counters[slot].as_ref().expect("just inserted")
    }
}

/// Pointwise sparseness ratios at a list of scales, per chosen (component, sign).
struct ScaleTable {
    /// `ratios[slot][scale]` holds the occupancy per grid point (vol mode only).
    vol: [Vec<Option<Vec<f64>>>; 6],
}

impl ScaleTable {
    fn build(cache: &mut MaskCache<'_>, choices: &[(usize, Sign)], scales: &[f64], n: usize, box_length: f64) -> Self {
        let mut vol: [Vec<Option<Vec<f64>>>; 6] = Default::default();
        for (c, s) in unique_choices(choices) {
            let slot = Sign::slot(c, s);
            let counter = cache.counter(c, s);
            vol[slot] = scales
                .iter()
                .map(|&r| {
                    check_vol_scale(n, box_length, r).ok()?;
                    let (counts, total) = counter.counts(r).ok()?;
                    Some(counts.iter().map(|&k| k as f64 / total as f64).collect())
                })
                .collect();
        }
        Self { vol }
    }

    fn ratio(&self, c: usize, s: Sign, scale: usize, idx: usize) -> Option<f64> {
        self.vol[Sign::slot(c, s)].get(scale)?.as_ref().map(|v| v[idx])
    }
}

fn unique_choices(choices: &[(usize, Sign)]) -> Vec<(usize, Sign)> {
    let mut seen = [false; 6];
    let mut out = Vec::new();
    for &(c, s) in choices {
        let slot = Sign::slot(c, s);
        if !seen[slot] {
            seen[slot] = true;
            out.push((c, s));
        }
    }
    out
}

fn union_fraction(f: &PeriodicField, lambda: f64) -> f64 {
    let threshold = lambda * f.sup_norm();
    let covered = (0..f.len()).filter(|&idx| f.magnitude(idx) > threshold).count();
    covered as f64 / f.len() as f64
}

/// Membership test for `Z_α(λ, δ; c₀)` at every sampled point.
pub fn z_alpha_check(
    f: &PeriodicField,
    params: &SparsenessParams,
    mode: SparsenessMode,
    options: &ScanOptions,
) -> Result<SparsenessReport, SparsenessError> {
    params.validate()?;
    if options.m_dirs < 3 {
        return Err(SparsenessError::InvalidArgument(format!("m_dirs = {} must be at least 3", options.m_dirs)));
    }
    let sup = f.sup_norm();
    if sup == 0.0 {
        return Err(SparsenessError::ZeroField);
    }
    let (n, box_length, h) = (f.n(), f.box_length(), f.spacing());
    let cs = c_grid(params.c0);
    let scale_of = |c: f64| c / sup.powf(params.alpha);
    let radii: Vec<f64> = cs.iter().map(|&c| scale_of(c)).collect();
    let resolvable: Vec<bool> = radii
        .iter()
        .map(|&r| match mode {
            SparsenessMode::OneD => r.is_finite() && r >= 0.5 * h,
            SparsenessMode::Volumetric => check_vol_scale(n, box_length, r).is_ok(),
        })
        .collect();

    let indices = options.sampling.indices(n)?;
    let choices: Vec<(usize, Sign)> = indices.iter().map(|&idx| dominant_component(f, idx)).collect();
    let mut cache = MaskCache::new(f, params.lambda);
    let table = match mode {
        SparsenessMode::Volumetric => Some(ScaleTable::build(&mut cache, &choices, &radii, n, box_length)),
        SparsenessMode::OneD => None,
    };
    let dirs = direction_set(options.m_dirs);

    let mut points = Vec::with_capacity(indices.len());
    for (&idx, &(comp, sign)) in indices.iter().zip(&choices) {
        let x0 = f.position(idx);
        let mut admissible = Vec::new();
        let mut first_admissible = None;
        for (m, (&c, &r)) in cs.iter().zip(&radii).enumerate() {
            if !resolvable[m] {
                continue;
            }
            let pass = match &table {
                Some(t) => t.ratio(comp, sign, m, idx).is_some_and(|q| q <= params.delta),
                None => any_direction_passes(cache.line(comp, sign), x0, r, params.delta, &dirs),
            };
            if pass {
                admissible.push(c);
                first_admissible.get_or_insert(m);
            }
        }
        let resolved = resolvable.iter().any(|&b| b);
        let report_m = first_admissible.or_else(|| resolvable.iter().rposition(|&b| b));
        let tested_r = report_m.map_or(f64::NAN, |m| radii[m]);
        let (mut direction, mut ratio_1d, mut ratio_vol) = (None, None, None);
        if let Some(m) = report_m {
            match &table {
                Some(t) => ratio_vol = t.ratio(comp, sign, m, idx),
                None => {
                    let (nu, q) = best_of(cache.line(comp, sign), x0, tested_r, &dirs)?;
                    direction = Some(nu);
                    ratio_1d = Some(q);
                }
            }
        }
        points.push(PointReport {
            index: idx,
            component: comp,
            sign,
            admissible_c: admissible,
            tested_r,
            direction,
            ratio_1d,
            ratio_vol,
            resolved,
        });
    }

    let resolved = points.iter().filter(|p| p.resolved).count();
    let passing = points.iter().filter(|p| p.passes()).count();
    let rho_star = points
        .iter()
        .filter(|p| p.resolved)
        .map(|p| p.admissible_c.first().map_or(f64::INFINITY, |&c| scale_of(c)))
        .fold(0.0f64, f64::max);
    let common: Vec<f64> = cs
        .iter()
        .copied()
        .filter(|c| points.iter().filter(|p| p.resolved).all(|p| p.admissible_c.contains(c)))
        .collect();
    let common_c = if resolved == 0 { None } else { common.first().map(|&lo| (lo, *common.last().unwrap())) };
    Ok(SparsenessReport {
        mode,
        params: *params,
        sup_norm: sup,
        c_grid: cs,
        unresolved: points.len() - resolved,
        resolved,
        passing,
        fraction_passing: if resolved == 0 { 0.0 } else { passing as f64 / resolved as f64 },
        rho_star: if resolved == 0 { f64::NAN } else { rho_star },
        common_c,
        union_fraction: union_fraction(f, params.lambda),
        verdict: resolved > 0 && passing == resolved,
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReport {
    pub scales: Vec<f64>,
    /// `(grid index, ρ*(x₀))` with `+∞` where no scanned scale is sparse.
    pub per_point: Vec<(usize, f64)>,
    /// Largest per-point ρ*.
    pub global: f64,
    /// False when some point reported `+∞`.
    pub all_admissible: bool,
}

/// Smallest scale on [`scale_grid`] at which each point's chosen super-level
/// set is δ-sparse.
pub fn scale_of_sparseness(
    f: &PeriodicField,
    lambda: f64,
    delta: f64,
    mode: SparsenessMode,
    options: &ScanOptions,
) -> Result<ScaleReport, SparsenessError> {
    check_lambda(lambda)?;
    check_delta(delta)?;
    if f.sup_norm() == 0.0 {
        return Err(SparsenessError::ZeroField);
    }
    let (n, box_length) = (f.n(), f.box_length());
    let scales = scale_grid(n, box_length);
    let indices = options.sampling.indices(n)?;
    let choices: Vec<(usize, Sign)> = indices.iter().map(|&idx| dominant_component(f, idx)).collect();
    let mut cache = MaskCache::new(f, lambda);
    let table = match mode {
        SparsenessMode::Volumetric => Some(ScaleTable::build(&mut cache, &choices, &scales, n, box_length)),
        SparsenessMode::OneD => None,
    };
    let dirs = direction_set(options.m_dirs.max(3));
    let mut per_point = Vec::with_capacity(indices.len());
    for (&idx, &(comp, sign)) in indices.iter().zip(&choices) {
        let x0 = f.position(idx);
        let rho = (0..scales.len())
            .find(|&m| match &table {
                Some(t) => t.ratio(comp, sign, m, idx).is_some_and(|q| q <= delta),
                None => any_direction_passes(cache.line(comp, sign), x0, scales[m], delta, &dirs),
            })
            .map_or(f64::INFINITY, |m| scales[m]);
        per_point.push((idx, rho));
    }
    let global = per_point.iter().map(|p| p.1).fold(0.0f64, f64::max);
    Ok(ScaleReport { scales, all_admissible: global.is_finite(), per_point, global })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleVariant {
    Velocity,
    Vorticity,
}

/// A priori sparseness scale: `c·‖D^k u‖_∞^{−1/(k+3/p)}` for the velocity,
/// `c·‖D^k ω‖_∞^{−1/(k+5/2)}` for the vorticity (where `p` is ignored).
pub fn apriori_scale(dk_supnorm: f64, k: u32, p: f64, c: f64, variant: ScaleVariant) -> Result<f64, SparsenessError> {
    if !(dk_supnorm.is_finite() && dk_supnorm > 0.0 && c.is_finite() && c > 0.0) {
        return Err(SparsenessError::InvalidArgument("a priori scale needs positive finite inputs".into()));
    }
    let exponent = match variant {
        ScaleVariant::Velocity => {
            if !(p >= 1.0) {
                return Err(SparsenessError::Field(FieldError::InvalidExponent(p)));
            }
            1.0 / (k as f64 + DIM / p)
        }
        ScaleVariant::Vorticity => 1.0 / (k as f64 + 2.5),
    };
    Ok(c * dk_supnorm.powf(-exponent))
}

/// `η` solving `(1+η)³ = (δ(1+λ)+1)/2`.
pub fn lemma_eta(lambda: f64, delta: f64) -> f64 {
    ((delta * (1.0 + lambda) + 1.0) / 2.0).cbrt() - 1.0
}

/// `c* = κ·ϖ/2·(δ(1+λ)−1)^{1/p}·(η/2)^k` with `ϖ = 4π/3`.
pub fn lemma_constant(k: u32, lambda: f64, delta: f64, p: f64, kappa_dual: f64) -> f64 {
    let varpi = 4.0 * PI / 3.0;
    let eta = lemma_eta(lambda, delta);
    kappa_dual * varpi / 2.0 * (delta * (1.0 + lambda) - 1.0).powf(1.0 / p) * (eta / 2.0).powi(k as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WkpReport {
    /// `‖f‖_p`, dominating `‖D^ζ f‖_{W^{−k,p}}`.
    pub lhs: f64,
    pub rhs: f64,
    pub c_star: f64,
    pub eta: f64,
    pub derivative_sup: f64,
    pub verdict: bool,
    /// Direct check that all six super-level sets of `D^ζ f` are r-semi-mixed;
    /// `None` when r is outside the resolvable range.
    pub semi_mixed: Option<bool>,
}

/// Sufficient condition for semi-mixedness of the super-level sets of `D^ζ f`.
#[allow(clippy::too_many_arguments)]
pub fn wkp_test_quantity(
    f: &PeriodicField,
    zeta: MultiIndex,
    r: f64,
    p: f64,
    lambda: f64,
    delta: f64,
    kappa_dual: f64,
    opts: &DerivativeOptions,
) -> Result<WkpReport, SparsenessError> {
    check_lambda(lambda)?;
    check_delta(delta)?;
    let bound = 1.0 / (1.0 + lambda);
    if delta <= bound {
        return Err(SparsenessError::TuningConstraint { delta, lambda, bound });
    }
    if !(p > 1.0) {
        return Err(SparsenessError::Field(FieldError::InvalidExponent(p)));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(SparsenessError::InvalidArgument(format!("scale r = {r} must be positive")));
    }
    if !(kappa_dual.is_finite() && kappa_dual > 0.0) {
        return Err(SparsenessError::InvalidArgument(format!("κ_dual = {kappa_dual} must be positive")));
    }
    let k = zeta.order();
    let d = f.derivative(zeta, opts)?;
    let derivative_sup = d.sup_norm();
    let c_star = lemma_constant(k, lambda, delta, p, kappa_dual);
    let lhs = f.lp_norm(p)?;
    let rhs = c_star * r.powf(k as f64 + DIM / p) * derivative_sup;
    let semi_mixed = if derivative_sup > 0.0 && check_vol_scale(f.n(), f.box_length(), r).is_ok() {
        let mut all = true;
        for c in 0..3 {
            for s in [Sign::Plus, Sign::Minus] {
                all &= semi_mixed(&superlevel_mask(&d, c, s, lambda)?, r, delta)?;
            }
        }
        Some(all)
    } else {
        None
    };
    Ok(WkpReport { lhs, rhs, c_star, eta: lemma_eta(lambda, delta), derivative_sup, verdict: lhs <= rhs, semi_mixed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakLpReport {
    /// `max_m s_m·μ{|f| ≥ s_m}^{1/p}` over `s_m = m/32·‖f‖_∞`, `m = 1..32`.
    pub weak_norm: f64,
    /// `μ{|f| > λ‖f‖_∞}`.
    pub level_volume: f64,
    /// `level_volume ≤ 2·(weak_norm/(λ‖f‖_∞))^p`.
    pub consistent: bool,
}

/// Weak-`L^p` estimate from the distribution function of `|f|`.
pub fn weak_lp_tail(f: &PeriodicField, p: f64, lambda: f64) -> Result<WeakLpReport, SparsenessError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(SparsenessError::Field(FieldError::InvalidExponent(p)));
    }
    check_lambda(lambda)?;
    let sup = f.sup_norm();
    if sup == 0.0 {
        return Ok(WeakLpReport { weak_norm: 0.0, level_volume: 0.0, consistent: true });
    }
    let mut mags: Vec<f64> = (0..f.len()).map(|idx| f.magnitude(idx)).collect();
    mags.sort_by(f64::total_cmp);
    let dv = f.cell_volume();
    let at_least = |s: f64| (mags.len() - mags.partition_point(|&v| v < s)) as f64 * dv;
    let weak_norm = (1..=WEAK_LEVELS)
        .map(|m| {
            let s = m as f64 / WEAK_LEVELS as f64 * sup;
            s * at_least(s).powf(1.0 / p)
        })
        .fold(0.0f64, f64::max);
    let level = lambda * sup;
    let level_volume = (mags.len() - mags.partition_point(|&v| v <= level)) as f64 * dv;
    Ok(WeakLpReport { weak_norm, level_volume, consistent: level_volume <= 2.0 * (weak_norm / level).powf(p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * PI;

    fn ball_mask(n: usize, center: [f64; 3], a: f64) -> LevelSetMask {
        LevelSetMask::from_predicate(n, TWO_PI, |x| {
            let d2: f64 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum();
            d2 < a * a
        })
        .unwrap()
    }

    #[test]
    fn sine_superlevel_fractions() {
        let f = PeriodicField::from_fn(64, TWO_PI, |x| [x[0].sin(), 0.0, 0.0]).unwrap();
        let m = superlevel_mask(&f, 0, Sign::Plus, 1e-9).unwrap();
        // Grid points with sin > 0 are i = 1..31 of 64.
        assert_eq!(m.count(), 31 * 64 * 64);
        let m = superlevel_mask(&f, 0, Sign::Plus, 1.0 / 2f64.sqrt()).unwrap();
        assert!((m.fraction() - 0.25).abs() <= 1.0 / 64.0);
        assert!(matches!(superlevel_mask(&f, 0, Sign::Plus, 1.0), Err(SparsenessError::LevelOutOfRange(_))));
        assert!(superlevel_mask(&f, 0, Sign::Plus, 0.0).is_err());
    }

    #[test]
    fn masks_nest_in_lambda() {
        let f = PeriodicField::from_fn(16, TWO_PI, |x| [x[0].sin() * x[1].cos(), x[2].sin(), 0.3]).unwrap();
        for c in 0..3 {
            for s in [Sign::Plus, Sign::Minus] {
                let lo = superlevel_mask(&f, c, s, 0.2).unwrap();
                let hi = superlevel_mask(&f, c, s, 0.6).unwrap();
                assert!(hi.bits().iter().zip(lo.bits()).all(|(&h, &l)| !h || l));
            }
        }
    }

    #[test]
    fn segment_through_ball_center() {
        let n = 64;
        let h = TWO_PI / n as f64;
        let center = [PI, PI, PI];
        let r = 1.6;
        let a = r / 4.0;
        let set = LineIndicator::from_mask(&ball_mask(n, center, a));
        for nu in direction_set(8) {
            let (pass, ratio) = sparse_1d(&set, center, nu, r, 0.25 + 3.0 * h / r).unwrap();
            assert!(pass);
            assert!((ratio - 0.25).abs() <= 0.25 * 3.0 * h / r, "ratio {ratio} along {nu:?}");
        }
    }

    #[test]
    fn empty_and_full_segments() {
        let n = 16;
        let empty = LineIndicator::from_mask(&LevelSetMask::from_bits(n, TWO_PI, vec![false; n * n * n]).unwrap());
        let full = LineIndicator::from_mask(&LevelSetMask::from_bits(n, TWO_PI, vec![true; n * n * n]).unwrap());
        let x0 = [1.0, 2.0, 3.0];
        assert_eq!(sparse_1d(&empty, x0, [0.0, 0.0, 1.0], 1.0, 0.01).unwrap(), (true, 0.0));
        assert_eq!(sparse_1d(&full, x0, [0.0, 0.0, 1.0], 1.0, 0.99).unwrap(), (false, 1.0));
        let h = TWO_PI / n as f64;
        assert!(matches!(
            sparse_1d(&full, x0, [1.0, 0.0, 0.0], 0.4 * h, 0.5),
            Err(SparsenessError::Unresolvable { .. })
        ));
        assert!(sparse_1d(&full, x0, [1.0, 1.0, 0.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn field_indicator_is_subgrid_accurate() {
        // sin x₁ > 1/2 on (π/6, 5π/6): the segment along e₁ centered at π/2
        // with r = π/2 is covered on 2π/3 of its length π.
        let f = PeriodicField::from_fn(32, TWO_PI, |x| [x[0].sin(), 0.0, 0.0]).unwrap();
        let set = LineIndicator::from_field(&f, 0, Sign::Plus, 0.5).unwrap();
        let (_, ratio) = sparse_1d(&set, [PI / 2.0, 0.3, 0.7], [1.0, 0.0, 0.0], PI / 2.0, 0.5).unwrap();
        assert!((ratio - 2.0 / 3.0).abs() < 5e-3, "{ratio}");
    }

    #[test]
    fn vol_ratio_of_centered_ball() {
        let n = 32;
        let center = [PI, PI, PI];
        let a = 0.8;
        let mask = ball_mask(n, center, a);
        let idx = (16 * n + 16) * n + 16;
        let h = TWO_PI / n as f64;
        for r in [1.2, 1.6, 2.4] {
            let (_, ratio) = sparse_vol(&mask, idx, r, 0.5).unwrap();
            let exact = (a / r).powi(3);
            assert!((ratio - exact).abs() <= exact * 3.0 * h / r, "r {r}: {ratio} vs {exact}");
        }
        assert!(matches!(sparse_vol(&mask, idx, PI + 0.1, 0.5), Err(SparsenessError::Unresolvable { .. })));
        assert!(matches!(sparse_vol(&mask, idx, 1.5 * h, 0.5), Err(SparsenessError::Unresolvable { .. })));
        assert!(sparse_vol(&mask, idx, PI, 0.5).unwrap().0);
    }

    #[test]
    fn fft_counts_match_direct_sums() {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bits: Vec<bool> = (0..n * n * n).map(|_| rng.random_bool(0.3)).collect();
        let mask = LevelSetMask::from_bits(n, TWO_PI, bits).unwrap();
        let counter = BallCounter::new(&mask);
        for r in [0.8, 1.3, PI] {
            let (counts, total) = counter.counts(r).unwrap();
            for idx in (0..n * n * n).step_by(37) {
                let (_, ratio) = sparse_vol(&mask, idx, r, 1.0).unwrap();
                assert_eq!(counts[idx] as f64 / total as f64, ratio);
            }
        }
    }

    #[test]
    fn semi_mixed_examples() {
        let n = 32;
        let mut bits = vec![false; n * n * n];
        bits[1234] = true;
        let single = LevelSetMask::from_bits(n, TWO_PI, bits).unwrap();
        assert!(semi_mixed(&single, TWO_PI / 4.0, 0.5).unwrap());
        let full = LevelSetMask::from_bits(n, TWO_PI, vec![true; n * n * n]).unwrap();
        assert!(!semi_mixed(&full, 1.0, 0.99).unwrap());
    }

    #[test]
    fn slab_best_direction_is_normal() {
        let n = 32;
        let w = 0.4;
        let mask = LevelSetMask::from_predicate(n, TWO_PI, |x| (x[2] - PI).abs() < w).unwrap();
        let set = LineIndicator::from_mask(&mask);
        let (nu, ratio) = best_direction(&set, [PI, PI, PI], 2.0, 16).unwrap();
        assert!(nu[2].abs() > 0.99, "{nu:?}");
        let h = TWO_PI / n as f64;
        assert!((ratio - w / 2.0).abs() <= 3.0 * h / 2.0 * (w / 2.0), "{ratio}");
        assert!(best_direction(&set, [PI, PI, PI], 2.0, 2).is_err());
    }

    #[test]
    fn dominant_component_tie_breaks() {
        let f = PeriodicField::from_fn(8, TWO_PI, |_| [-1.0, 1.0, 0.5]).unwrap();
        assert_eq!(dominant_component(&f, 0), (0, Sign::Minus));
        let f = PeriodicField::from_fn(8, TWO_PI, |_| [0.5, -1.0, 1.0]).unwrap();
        assert_eq!(dominant_component(&f, 0), (1, Sign::Minus));
        let f = PeriodicField::from_fn(8, TWO_PI, |_| [1.0, 1.0, -1.0]).unwrap();
        assert_eq!(dominant_component(&f, 0), (0, Sign::Plus));
    }

    #[test]
    fn stratified_sampling_is_deterministic_and_spread() {
        let s = PointSampling::Stratified { count: 4096, seed: 9 };
        let a = s.indices(32).unwrap();
        assert_eq!(a, s.indices(32).unwrap());
        assert_eq!(a.len(), 4096);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4096);
        assert!(PointSampling::Stratified { count: 100, seed: 0 }.indices(32).is_err());
        assert_eq!(s.indices(16).unwrap().len(), 4096);
    }

    #[test]
    fn constant_field_is_not_in_z_alpha() {
        let f = PeriodicField::from_fn(16, TWO_PI, |_| [1.0, 0.0, 0.0]).unwrap();
        let params = SparsenessParams { lambda: 0.5, delta: 0.75, c0: 4.0, alpha: 0.5 };
        for mode in [SparsenessMode::Volumetric, SparsenessMode::OneD] {
            let rep = z_alpha_check(&f, &params, mode, &ScanOptions::default()).unwrap();
            assert!(!rep.verdict);
            assert_eq!(rep.union_fraction, 1.0);
            assert!(rep.rho_star.is_infinite());
        }
        let zero = PeriodicField::zeros(16, TWO_PI).unwrap();
        assert!(matches!(
            z_alpha_check(&zero, &params, SparsenessMode::OneD, &ScanOptions::default()),
            Err(SparsenessError::ZeroField)
        ));
    }

    #[test]
    fn ball_scale_of_sparseness() {
        // Super-level set of a radial bump is a ball of radius a.
        let n = 32;
        let a = 0.6;
        let lambda: f64 = 0.5;
        let width = a / (-lambda.ln()).sqrt();
        let f = PeriodicField::from_fn(n, TWO_PI, |x| {
            let d2: f64 = x.iter().map(|v| (v - PI).powi(2)).sum();
            [(-d2 / (width * width)).exp(), 0.0, 0.0]
        })
        .unwrap();
        let delta = 0.2;
        let idx = (16 * n + 16) * n + 16;
        let opts = ScanOptions { sampling: PointSampling::All, ..Default::default() };
        let rep = scale_of_sparseness(&f, lambda, delta, SparsenessMode::Volumetric, &opts).unwrap();
        let rho = rep.per_point.iter().find(|p| p.0 == idx).unwrap().1;
        let expected = a / delta.cbrt();
        let step = (rep.scales[1] / rep.scales[0]).ln();
        assert!((rho / expected).ln().abs() <= step + 3.0 * (TWO_PI / n as f64) / expected, "{rho} vs {expected}");
        let again = scale_of_sparseness(&f, lambda, delta, SparsenessMode::Volumetric, &opts).unwrap();
        assert_eq!(rep, again);
        let scaled =
            scale_of_sparseness(&f.scaled(8.0).unwrap(), lambda, delta, SparsenessMode::Volumetric, &opts).unwrap();
        assert_eq!(rep, scaled);
    }

    #[test]
    fn empty_superlevel_set_gives_smallest_scale() {
        // Where the weak second component dominates, its super-level set at
        // λ = 0.9 is empty because 0.5 < 0.9·‖f‖_∞.
        let f = PeriodicField::from_fn(16, TWO_PI, |x| [x[0].sin(), 0.5 * x[1].cos(), 0.0]).unwrap();
        let rep = scale_of_sparseness(&f, 0.9, 0.5, SparsenessMode::OneD, &ScanOptions::default()).unwrap();
        let smallest = rep.scales[0];
        let mut checked = 0;
        for &(idx, rho) in &rep.per_point {
            if dominant_component(&f, idx).0 == 1 {
                assert_eq!(rho, smallest);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn apriori_scale_examples() {
        let r = apriori_scale(1e6, 1, 2.0, 1.0, ScaleVariant::Velocity).unwrap();
        assert!((r.log10() + 2.4).abs() < 1e-12);
        for k in 0..6 {
            assert_eq!(apriori_scale(1.0, k, 2.0, 0.7, ScaleVariant::Velocity).unwrap(), 0.7);
        }
        // k = 0, p = 2: exponent 2/3.
        let r = apriori_scale(8.0, 0, 2.0, 1.0, ScaleVariant::Velocity).unwrap();
        assert!((r - 8f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        let r = apriori_scale(10.0, 1, 1.0, 1.0, ScaleVariant::Vorticity).unwrap();
        assert!((r - 10f64.powf(-1.0 / 3.5)).abs() < 1e-15);
        assert!(apriori_scale(0.0, 1, 2.0, 1.0, ScaleVariant::Velocity).is_err());
    }

    #[test]
    fn lemma_eta_value() {
        assert!((lemma_eta(0.45035, 0.75) - 0.01442).abs() < 5e-6);
        assert!(lemma_constant(2, 0.5, 1.0 / 1.5 + 1e-14, 2.0, 1.0) < 1e-7);
    }

    #[test]
    fn wkp_single_mode_matches_hand_evaluation() {
        let n = 32;
        let kappa = 2.0;
        let f = PeriodicField::from_fn(n, TWO_PI, |x| [0.0, (kappa * x[0]).sin(), 0.0]).unwrap();
        let (lambda, delta, p, r) = (0.5, 0.9, 2.0, 1.0);
        // ‖sin(κx₁)‖₂ over the box = (2π)^{3/2}/√2.
        let lhs = TWO_PI.powf(1.5) / 2f64.sqrt();
        for k in 1..=3u32 {
            let rep =
                wkp_test_quantity(&f, MultiIndex::along(0, k), r, p, lambda, delta, 1.0, &DerivativeOptions::default())
                    .unwrap();
            let sup = kappa.powi(k as i32);
            let rhs = lemma_constant(k, lambda, delta, p, 1.0) * r.powf(k as f64 + 1.5) * sup;
            assert!((rep.lhs - lhs).abs() < 1e-10 * lhs);
            assert!((rep.derivative_sup - sup).abs() < 1e-9 * sup);
            assert!((rep.rhs - rhs).abs() < 1e-9 * rhs);
            assert_eq!(rep.verdict, lhs <= rhs);
            assert!(rep.semi_mixed.is_some());
        }
        assert!(matches!(
            wkp_test_quantity(&f, MultiIndex::along(0, 1), r, p, 0.5, 0.6, 1.0, &DerivativeOptions::default()),
            Err(SparsenessError::TuningConstraint { .. })
        ));
    }

    #[test]
    fn weak_lp_examples() {
        let c = 1.5;
        let f = PeriodicField::from_fn(16, TWO_PI, |_| [c, 0.0, 0.0]).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let rep = weak_lp_tail(&f, p, 0.5).unwrap();
            let exact = c * TWO_PI.powf(3.0 / p);
            assert!((rep.weak_norm - exact).abs() < 1e-12 * exact);
            assert!(rep.consistent);
        }
        let rep = weak_lp_tail(&PeriodicField::zeros(8, TWO_PI).unwrap(), 2.0, 0.5).unwrap();
        assert_eq!(rep.weak_norm, 0.0);
    }

    #[test]
    fn weak_lp_of_sine_follows_arcsin_law() {
        // μ{|sin x₁| ≥ s} = (2π)²(2π − 4 arcsin s).
        let n = 256;
        let f = PeriodicField::from_fn(n, TWO_PI, |x| [x[0].sin(), 0.0, 0.0]).unwrap();
        for p in [1.0, 2.0, 4.0] {
            let rep = weak_lp_tail(&f, p, 0.5).unwrap();
            let analytic = (1..=100_000)
                .map(|m| {
                    let s = m as f64 / 100_000.0;
                    s * (TWO_PI * TWO_PI * (TWO_PI - 4.0 * s.asin())).powf(1.0 / p)
                })
                .fold(0.0f64, f64::max);
            assert!((rep.weak_norm / analytic - 1.0).abs() < 0.02, "p {p}: {} vs {analytic}", rep.weak_norm);
            assert!(rep.consistent);
        }
    }

    #[test]
    fn mask_dump_round_trip() {
        let f = PeriodicField::from_fn(8, TWO_PI, |x| [x[0].sin(), x[1].cos(), 0.0]).unwrap();
        let mask = superlevel_mask(&f, 1, Sign::Minus, 0.3).unwrap();
        let mut buf = Vec::new();
        mask.write_to(&mut buf).unwrap();
        assert_eq!(LevelSetMask::read_from(buf.as_slice()).unwrap(), mask);
        assert!(matches!(LevelSetMask::read_from(&buf[..buf.len() - 1]), Err(SparsenessError::MaskFormat(_))));
        let plain = LevelSetMask::from_bits(8, 1.0, vec![true; 512]).unwrap();
        let mut buf = Vec::new();
        plain.write_to(&mut buf).unwrap();
        assert_eq!(LevelSetMask::read_from(buf.as_slice()).unwrap(), plain);
        buf[0] = b'X';
        assert!(LevelSetMask::read_from(buf.as_slice()).is_err());
    }
}
