//! Quantum Fisher information and Cramér-Rao bounds for the rotation frequency.
//!
//! Three routes to the same number:
//!
//! - [`qfi_exact`] reduces the N-particle GHZ state to single-particle branch
//!   overlaps, polynomial in N.
//! - [`qfi_truncated_analytic`] is the closed form obtained by keeping only the
//!   external ground-state component of each branch. It is exact when the
//!   displacement vanishes and degrades with the ground-state fidelity.
//! - [`qfi_brute_force`] materializes the full tensor-product state for small N.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::{branch_state, BranchState};
use crate::params::{DriveProfile, PhysicalParams, SpinBranch};
use crate::tensor;

/// Default central-difference step in ω_s.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Largest relative disagreement tolerated between steps h and h/2.
pub const STEP_CONSISTENCY: f64 = 1e-6;

const BRUTE_FORCE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    ExactBranch,
    TruncatedAnalytic,
    BruteForce,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::ExactBranch => "exact-branch",
            Engine::TruncatedAnalytic => "truncated-analytic",
            Engine::BruteForce => "brute-force",
        })
    }
}

/// GHZ input `(⊗|↑⟩|0⟩ + ⊗|↓⟩|0⟩)/√2` of `n_particles` atoms under a given drive.
#[derive(Debug, Clone, PartialEq)]
pub struct GhzModel {
    pub params: PhysicalParams,
    pub profile: DriveProfile,
    n_particles: usize,
}

impl GhzModel {
    pub fn new(params: PhysicalParams, profile: DriveProfile, n_particles: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::Domain("particle number must be >= 1".into()));
        }
        Ok(GhzModel {
            params,
            profile,
            n_particles,
        })
    }

    /// Unit constants and a constant drive.
    pub fn unit(omega_s: f64, omega_p: f64, n_particles: usize) -> Result<Self> {
        Self::new(PhysicalParams::default(), DriveProfile::constant(omega_s, omega_p)?, n_particles)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn with_n_particles(&self, n_particles: usize) -> Result<Self> {
        Self::new(self.params, self.profile.clone(), n_particles)
    }

    pub fn with_omega_s(&self, omega_s: f64) -> Self {
        GhzModel {
            params: self.params,
            profile: self.profile.with_omega_s(omega_s),
            n_particles: self.n_particles,
        }
    }

    pub fn branches(&self) -> Result<(BranchState, BranchState)> {
        Ok((
            branch_state(&self.params, &self.profile, SpinBranch::Up)?,
            branch_state(&self.params, &self.profile, SpinBranch::Down)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiResult {
    pub value: f64,
    pub engine: Engine,
}

/// Derivative overlaps of one normalized branch state `χ = e^{iφ}|β⟩`:
/// `s = ⟨χ|χ'⟩` and `g = ⟨χ'|χ'⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchTangent {
    pub s: Complex64,
    pub g: f64,
}

impl BranchTangent {
    /// From the state and the ω_s-derivatives of its amplitude and phase.
    ///
    /// `|χ'⟩ = (iφ' − Re(β'β*) + β' a†)|χ⟩`, giving `s = i(φ' + Im(β'β*))`
    /// and `g = |s|² + |β'|²`.
    pub fn from_derivatives(state: &BranchState, d_amplitude: Complex64, d_phase: f64) -> Self {
        let x = d_amplitude * state.amplitude.conj();
        let s = Complex64::new(0.0, d_phase + x.im);
        BranchTangent {
            s,
            g: s.norm_sqr() + d_amplitude.norm_sqr(),
        }
    }
}

fn central(model: &GhzModel, h: f64) -> Result<[(BranchState, Complex64, f64); 2]> {
    let ws = model.profile.omega_s();
    let plus = model.with_omega_s(ws + h).branches()?;
    let minus = model.with_omega_s(ws - h).branches()?;
    let center = model.branches()?;
    let d = |p: &BranchState, m: &BranchState| ((p.amplitude - m.amplitude) / (2.0 * h), (p.phase - m.phase) / (2.0 * h));
    let (du_a, du_p) = d(&plus.0, &minus.0);
    let (dd_a, dd_p) = d(&plus.1, &minus.1);
    Ok([(center.0, du_a, du_p), (center.1, dd_a, dd_p)])
}

/// Tangents of both branches by Richardson-extrapolated central differences,
/// plus the relative disagreement of `qfi` evaluated at steps h and h/2.
///
/// β is affine and φ quadratic in ω_s for every drive, so the differences carry
/// no truncation error; the step only trades against round-off.
fn tangents<F>(model: &GhzModel, h: f64, qfi: F) -> Result<[BranchTangent; 2]>
where
    F: Fn(&[BranchTangent; 2]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let coarse = central(model, h)?;
    let fine = central(model, 0.5 * h)?;
    let to_tangents = |v: &[(BranchState, Complex64, f64); 2]| v.map(|(s, da, dp)| BranchTangent::from_derivatives(&s, da, dp));
    let f_coarse = qfi(&to_tangents(&coarse));
    let f_fine = qfi(&to_tangents(&fine));
    let scale = f_fine.abs().max(f_coarse.abs());
    let relative = if scale == 0.0 { 0.0 } else { (f_coarse - f_fine).abs() / scale };
    if relative > STEP_CONSISTENCY {
        return Err(Error::StepSize { step: h, relative });
    }
    let mut out = [BranchTangent { s: Complex64::new(0.0, 0.0), g: 0.0 }; 2];
    for k in 0..2 {
        let (state, ca, cp) = coarse[k];
        let (_, fa, fp) = fine[k];
        let da = (fa * 4.0 - ca) / 3.0;
        let dp = (4.0 * fp - cp) / 3.0;
        out[k] = BranchTangent::from_derivatives(&state, da, dp);
    }
    Ok(out)
}

/// `F_Q = 4[⟨Ψ'|Ψ'⟩ − |⟨Ψ'|Ψ⟩|²]` for the GHZ superposition of two product branches.
///
/// Cross terms between the branches vanish because their spin parts are
/// orthogonal, leaving
/// `⟨Ψ'|Ψ'⟩ = ½ Σ_σ [N g_σ + N(N−1)|s_σ|²]` and `⟨Ψ'|Ψ⟩ = ½ N Σ_σ s_σ*`.
fn ghz_qfi(n: f64, t: &[BranchTangent; 2]) -> f64 {
    let norm: f64 = t.iter().map(|b| n * b.g + n * (n - 1.0) * b.s.norm_sqr()).sum::<f64>() * 0.5;
    let cross = (t[0].s + t[1].s).conj() * (0.5 * n);
    4.0 * (norm - cross.norm_sqr())
}

/// Single-particle QFI of `(|↑⟩χ_↑ + |↓⟩χ_↓)/√2`.
fn single_qfi(t: &[BranchTangent; 2]) -> f64 {
    4.0 * (0.5 * (t[0].g + t[1].g) - 0.25 * (t[0].s + t[1].s).norm_sqr())
}

/// QFI of the GHZ output state via the product-branch reduction.
pub fn qfi_exact(model: &GhzModel, d_omega: f64) -> Result<QfiResult> {
    let n = model.n_particles() as f64;
    let t = tangents(model, d_omega, |t| ghz_qfi(n, t))?;
    Ok(QfiResult {
        value: ghz_qfi(n, &t).max(0.0),
        engine: Engine::ExactBranch,
    })
}

/// QFI of the uncorrelated input `⊗((|↑⟩+|↓⟩)/√2)|0⟩`: N times the
/// single-particle value.
pub fn qfi_coherent_spin(model: &GhzModel, d_omega: f64) -> Result<QfiResult> {
    let n = model.n_particles() as f64;
    let t = tangents(model, d_omega, single_qfi)?;
    Ok(QfiResult {
        value: (n * single_qfi(&t)).max(0.0),
        engine: Engine::ExactBranch,
    })
}

/// Ground-state-truncated closed form of the GHZ QFI, constant drives only.
///
/// `D_± = exp[m r²(ω_s ± ω_p)²(cos(πω/ω_p) − 1)/(ħω)]` is the squared modulus
/// of the truncated branch coefficient, `|C_σ|² = e^{−|α_σ|²}`.
pub fn qfi_truncated_analytic(model: &GhzModel) -> Result<QfiResult> {
    let wp = model.profile.constant_omega_p().ok_or(Error::UnsupportedProfile)?;
    let ws = model.profile.omega_s();
    let p = &model.params;
    let (m, hbar, w, r) = (p.mass(), p.hbar(), p.trap_frequency(), p.radius());
    let n = model.n_particles() as f64;
    let x = PI * w / wp;
    let damping = |c: f64| (m * r * r * c * c * (x.cos() - 1.0) / (hbar * w)).exp();
    let dp = damping(ws + wp).powf(n);
    let dm = damping(ws - wp).powf(n);

    let prefactor = m * m * n * n * r.powi(4) / (hbar * hbar * w * w * wp * wp);
    let bracket = PI * PI * w * w + 2.0 * wp * wp - 2.0 * wp * (wp * x.cos() + PI * w * x.sin());
    let mixed = dm * (ws - wp) + dp * (ws + wp);
    let brace = 2.0 * dm * (wp - ws).powi(2) + 2.0 * dp * (wp + ws).powi(2) - mixed * mixed;
    Ok(QfiResult {
        value: prefactor * bracket * brace,
        engine: Engine::TruncatedAnalytic,
    })
}

#[derive(Clone, Copy)]
enum Input {
    Ghz,
    CoherentSpin,
}

fn tensor_state(model: &GhzModel, n_max: usize, input: Input) -> Result<Vec<Complex64>> {
    let (up, down) = model.branches()?;
    let a = tensor::local(0, &up, n_max);
    let b = tensor::local(1, &down, n_max);
    Ok(match input {
        Input::Ghz => tensor::ghz(&a, &b, model.n_particles()),
        Input::CoherentSpin => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let single: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| (x + y) * s).collect();
            tensor::power(&single, model.n_particles())
        }
    })
}

/// Brute-force QFI with an optional ω_s-dependent global phase applied to the state.
fn brute_force(model: &GhzModel, n_max: usize, input: Input, gauge: &dyn Fn(f64) -> f64) -> Result<QfiResult> {
    tensor::check_capacity(model.n_particles(), n_max)?;
    let ws = model.profile.omega_s();
    let state_at = |w: f64| -> Result<Vec<Complex64>> {
        let phase = Complex64::from_polar(1.0, gauge(w));
        Ok(tensor_state(&model.with_omega_s(w), n_max, input)?
            .into_iter()
            .map(|z| z * phase)
            .collect())
    };
    let h = BRUTE_FORCE_STEP;
    let psi = state_at(ws)?;
    let diff = |step: f64| -> Result<Vec<Complex64>> {
        let p = state_at(ws + step)?;
        let m = state_at(ws - step)?;
        Ok(p.iter().zip(&m).map(|(x, y)| (x - y) / (2.0 * step)).collect())
    };
    let d1 = diff(h)?;
    let d2 = diff(0.5 * h)?;
    let deriv: Vec<Complex64> = d1.iter().zip(&d2).map(|(c, f)| (f * 4.0 - c) / 3.0).collect();
    let value = 4.0 * (tensor::inner(&deriv, &deriv).re - tensor::inner(&deriv, &psi).norm_sqr());
    Ok(QfiResult {
        value,
        engine: Engine::BruteForce,
    })
}

/// QFI of the GHZ output from the full tensor-product state, N ≤ 4 and n_max ≤ 8.
pub fn qfi_brute_force(model: &GhzModel, n_max: usize) -> Result<QfiResult> {
    brute_force(model, n_max, Input::Ghz, &|_| 0.0)
}

/// Same as [`qfi_brute_force`] after multiplying the state by `e^{i gauge(ω_s)}`.
pub fn qfi_brute_force_with_phase(model: &GhzModel, n_max: usize, gauge: &dyn Fn(f64) -> f64) -> Result<QfiResult> {
    brute_force(model, n_max, Input::Ghz, gauge)
}

/// QFI of the uncorrelated product input from the full tensor-product state.
pub fn qfi_coherent_spin_brute_force(model: &GhzModel, n_max: usize) -> Result<QfiResult> {
    brute_force(model, n_max, Input::CoherentSpin, &|_| 0.0)
}

/// `Δω_s ≥ 1/sqrt(ν F_Q)`.
pub fn qcrb(f: &QfiResult, repetitions: u32) -> Result<f64> {
    if repetitions == 0 {
        return Err(Error::Domain("repetitions must be >= 1".into()));
    }
    if !(f.value > 0.0) {
        return Err(Error::Unidentifiable);
    }
    Ok(1.0 / (repetitions as f64 * f.value).sqrt())
}

/// Least-squares slope of `ln(value)` against `ln(N)`.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*n > 0.0 && *v > 0.0)) {
        return Err(Error::Domain(format!("log-log fit needs positive data, got ({n}, {v})")));
    }
    let k = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(n, v)| (sx + n.ln(), sy + v.ln()));
    let (mx, my) = (sx / k, sy / k);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(n, v) in points {
        let dx = n.ln() - mx;
        sxy += dx * (v.ln() - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(Error::Domain("all N values identical".into()));
    }
    Ok(sxy / sxx)
}
