//! Closed-form precision bounds for generators with Gaussian latents and a
//! Lipschitz constant `L`, learning `M` modes at distance `D`.
//!
//! All bounds are expressed through `ε = D / (2L)`. Upper bounds on
//! precision may be vacuous (above 1) and lower bounds may be negative, so
//! the bound functions return a [`BoundValue`] carrying both the raw
//! formula value and the value clamped to `[0, 1]`.

use alloc::vec::Vec;
use core::f64::consts::{E, PI, SQRT_2};

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

fn domain(msg: impl Into<alloc::string::String>) -> Error {
    Error::Domain(msg.into())
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn phi_density(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / SQRT_2PI
}

/// Inverse standard normal CDF on `(0, 1)`.
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(alloc::format!("phi_inv needs p in (0, 1), got {p}")));
    }
    if p > 0.5 {
        // 1 − p is exact here.
        return Ok(-lower_phi_inv(1.0 - p));
    }
    Ok(lower_phi_inv(p))
}

/// `Φ⁻¹(1 − q)` computed from the tail probability `q` without forming
/// `1 − q`.
pub fn phi_inv_upper(q: f64) -> Result<f64> {
    Ok(-phi_inv(q)?)
}

/// `Φ⁻¹(p)` for `p ≤ 1/2`: rational seed, then Halley steps on `Φ(x) − p`.
fn lower_phi_inv(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let mut x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let e = phi(x) - p;
        let u = e * SQRT_2PI * libm::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Principal branch of the Lambert W function, `x ≥ −1/e`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    const BRANCH: f64 = -1.0 / E;
    if x.is_nan() || x < BRANCH {
        return Err(domain(alloc::format!("lambert_w0 needs x >= -1/e, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let near_branch = E * x + 1.0;
    if near_branch <= 1e-16 {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        let p = libm::sqrt(2.0 * near_branch);
        -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0))
    } else if x < 3.0 {
        libm::log1p(x)
    } else {
        let l = libm::log(x);
        l - libm::log(l)
    };
    // Close to the branch point the series is already accurate and Halley's
    // denominator degenerates.
    if near_branch < 1e-8 {
        return Ok(w);
    }
    for _ in 0..64 {
        let ew = libm::exp(w);
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if done {
            return Ok(w);
        }
    }
    Ok(w)
}

/// A bound value before and after clamping to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
}

impl BoundValue {
    fn new(raw: f64) -> Self {
        BoundValue {
            raw,
            clamped: raw.clamp(0.0, 1.0),
        }
    }
}

/// Setting of the multi-mode bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    d: f64,
    l: f64,
    m: usize,
    beta_bar: f64,
    epsilon: f64,
}

impl BoundInputs {
    /// Requires `D > 0`, `L > 0`, `M ≥ 2` and `β̄ ∈ (1/M, 1]`.
    pub fn new(d: f64, l: f64, m: usize, beta_bar: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(domain(alloc::format!("mode distance D must be positive, got {d}")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(domain(alloc::format!("Lipschitz constant L must be positive, got {l}")));
        }
        Self::build(d, l, m, beta_bar)
    }

    /// Inputs given directly by `ε ≥ 0` (stored as `D = 2ε`, `L = 1`).
    pub fn from_epsilon(epsilon: f64, m: usize, beta_bar: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(domain(alloc::format!("epsilon must be non-negative, got {epsilon}")));
        }
        Self::build(2.0 * epsilon, 1.0, m, beta_bar)
    }

    fn build(d: f64, l: f64, m: usize, beta_bar: f64) -> Result<Self> {
        if m < 2 {
            return Err(domain(alloc::format!("mode count M must be at least 2, got {m}")));
        }
        if !(beta_bar > 1.0 / m as f64 && beta_bar <= 1.0) {
            return Err(domain(alloc::format!(
                "recall beta_bar must lie in (1/M, 1] = ({}, 1], got {beta_bar}",
                1.0 / m as f64
            )));
        }
        Ok(BoundInputs {
            d,
            l,
            m,
            beta_bar,
            epsilon: d / (2.0 * l),
        })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn beta_bar(&self) -> f64 {
        self.beta_bar
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `β̄ · M`.
    pub fn covered_modes(&self) -> f64 {
        self.beta_bar * self.m as f64
    }
}

/// Latent-space cell measures `w_1 … w_K` with `w^∁ = 1 − Σ w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionWeights {
    w: Vec<f64>,
    complement: f64,
}

const SUM_TOLERANCE: f64 = 1e-12;

impl PartitionWeights {
    /// Each weight in `(0, 1/4]` and `Σ w ≤ 1`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(domain("partition needs at least one weight"));
        }
        if let Some(bad) = w.iter().find(|&&x| !(x > 0.0 && x <= 0.25)) {
            return Err(domain(alloc::format!("weights must lie in (0, 1/4], got {bad}")));
        }
        let sum: f64 = w.iter().sum();
        if sum > 1.0 + SUM_TOLERANCE * w.len() as f64 {
            return Err(domain(alloc::format!("weights sum to {sum} > 1")));
        }
        Ok(PartitionWeights {
            w,
            complement: (1.0 - sum).max(0.0),
        })
    }

    /// `K` equal weights `1/K` (requires `K ≥ 4`).
    pub fn equal(k: usize) -> Result<Self> {
        if k < 4 {
            return Err(domain(alloc::format!("equal weights 1/K need K >= 4, got {k}")));
        }
        Self::new(alloc::vec![1.0 / k as f64; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn complement(&self) -> f64 {
        self.complement
    }

    pub fn max_weight(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }
}

fn check_d_l(d: f64, l: f64) -> Result<f64> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(domain(alloc::format!("mode distance D must be non-negative, got {d}")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(domain(alloc::format!("Lipschitz constant L must be positive, got {l}")));
    }
    Ok(d / (2.0 * l))
}

/// Two-mode residual `α + (2ε/√(2π)) · exp(−Φ⁻¹(α/2)²/2) − 1`, increasing in
/// `α ∈ [0, 1]`.
pub fn thm2_residual(alpha: f64, epsilon: f64) -> f64 {
    if alpha <= 0.0 {
        return alpha - 1.0;
    }
    let x = lower_phi_inv((0.5 * alpha).min(0.5));
    alpha + 2.0 * epsilon / SQRT_2PI * libm::exp(-0.5 * x * x) - 1.0
}

/// Largest precision compatible with a generator splitting its latent mass
/// equally between two modes at distance `D`: the supremum of
/// `{α ∈ [0, 1] : residual(α) ≤ 0}`, by bisection to `1e-12`.
pub fn thm2_bound(d: f64, l: f64) -> Result<f64> {
    Ok(thm2_bound_eps(check_d_l(d, l)?))
}

pub fn thm2_bound_eps(epsilon: f64) -> f64 {
    if thm2_residual(1.0, epsilon) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo >= 1e-12 {
        let mid = 0.5 * (lo + hi);
        if thm2_residual(mid, epsilon) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Closed-form approximation `1 − √(2/π) · W(ε²)` of [`thm2_bound`], meant
/// for the high-precision regime (`ᾱ ≥ 3/4`).
pub fn thm2_bound_lambert(d: f64, l: f64) -> Result<f64> {
    thm2_bound_lambert_eps(check_d_l(d, l)?)
}

pub fn thm2_bound_lambert_eps(epsilon: f64) -> Result<f64> {
    Ok(1.0 - libm::sqrt(2.0 / PI) * lambert_w0(epsilon * epsilon)?)
}

/// `(1 + x²)/x² · e^{−ε²/2} · e^{−εx}`.
fn isoperimetric_factor(epsilon: f64, x: f64) -> f64 {
    (1.0 + x * x) / (x * x) * libm::exp(-0.5 * epsilon * epsilon - epsilon * x)
}

/// Upper bound on precision for a generator with recall `β̄` over `M`
/// equally weighted modes, with `x = Φ⁻¹(1 − 1/(β̄M))`. Requires `β̄M > 2`.
pub fn thm3_bound(inputs: &BoundInputs) -> Result<BoundValue> {
    let bm = inputs.covered_modes();
    if bm <= 2.0 {
        return Err(domain(alloc::format!(
            "thm3 bound requires beta_bar * M > 2 so that x > 0, got {bm}"
        )));
    }
    let x = phi_inv_upper(1.0 / bm)?;
    Ok(BoundValue::new(isoperimetric_factor(inputs.epsilon, x)))
}

/// Bound for unequal cell measures: `x = Φ⁻¹(1 − max(w^∁, w^max))` and the
/// uncovered mass `w^∁` subtracted.
pub fn thm3_bound_general(inputs: &BoundInputs, weights: &PartitionWeights) -> Result<BoundValue> {
    let top = weights.complement.max(weights.max_weight());
    if top >= 0.5 {
        return Err(domain(alloc::format!(
            "general bound needs max(w_complement, w_max) < 1/2, got {top}"
        )));
    }
    let x = phi_inv_upper(top)?;
    Ok(BoundValue::new(
        isoperimetric_factor(inputs.epsilon, x) - weights.complement,
    ))
}

/// Large-`M` form `e^{−ε²/2} · e^{−ε √(2 log(β̄M))}`.
pub fn thm3_asymptotic(inputs: &BoundInputs) -> f64 {
    let e = inputs.epsilon;
    libm::exp(-0.5 * e * e - e * libm::sqrt(2.0 * libm::log(inputs.covered_modes())))
}

/// Lower bound on the Gaussian measure of the `ε`-shrunk partition boundary
/// region: `1 − (1 + x²)/x² · e^{−ε²/2} e^{−εx}` with `x = Φ⁻¹(1 − max w)`.
/// Requires `K ≥ 4`, every `w_k ∈ (0, 1/4]` and `Σ w = 1`.
pub fn partition_boundary_lower(epsilon: f64, weights: &PartitionWeights) -> Result<BoundValue> {
    let k = weights.w.len();
    let sum: f64 = weights.w.iter().sum();
    if k < 4 || (sum - 1.0).abs() > SUM_TOLERANCE * k as f64 {
        return Err(domain(alloc::format!(
            "partition bound requires K >= 4 and w_k in (0,1/4] summing to 1 (K = {k}, sum = {sum})"
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(domain(alloc::format!("epsilon must be non-negative, got {epsilon}")));
    }
    let x = phi_inv_upper(weights.max_weight())?;
    Ok(BoundValue::new(1.0 - isoperimetric_factor(epsilon, x)))
}

/// `q(K) = √(2 log(√(2π) K))`, an upper bound on `Φ⁻¹(1 − 1/K)`.
pub fn phi_inv_upper_q(k: f64) -> f64 {
    libm::sqrt(2.0 * libm::log(SQRT_2PI * k))
}

/// Lower bound `√(2 log(K (q² − 1) / (√(2π) q³)))` on `Φ⁻¹(1 − 1/K)`,
/// valid for `K ≥ 8`.
pub fn phi_inv_lower_crudeman(k: f64) -> Result<f64> {
    if !(k >= 8.0 && k.is_finite()) {
        return Err(domain(alloc::format!("crude Phi^-1 lower bound needs K >= 8, got {k}")));
    }
    let q = phi_inv_upper_q(k);
    Ok(libm::sqrt(
        2.0 * libm::log(k * (q * q - 1.0) / (SQRT_2PI * q * q * q)),
    ))
}
