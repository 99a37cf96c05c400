//! Parity readout after the recombining π/2 pulse, and rotation precision by
//! error propagation.
//!
//! Pulse convention: `|↑⟩ → (|↑⟩ + |↓⟩)/√2`, `|↓⟩ → (|↓⟩ − |↑⟩)/√2`.
//! Single-particle parity is `+1` on `|↑⟩` and `−1` on `|↓⟩`, and `P` is the
//! product over particles.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::BranchState;
use crate::metrology::{Engine, GhzModel};
use crate::tensor;

/// Central-difference step used for `∂⟨P⟩/∂ω_s`.
pub const DEFAULT_STEP: f64 = 1e-6;
const SLOPE_FLOOR: f64 = 1e-12;
const STEP_CONSISTENCY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub engine: Engine,
}

impl ParityMoments {
    fn involution(mean: f64, engine: Engine) -> Self {
        ParityMoments {
            mean,
            second_moment: 1.0,
            variance: 1.0 - mean * mean,
            engine,
        }
    }
}

/// `K = ⟨χ_↑|χ_↓⟩` including the dynamical phases.
fn branch_overlap(up: &BranchState, down: &BranchState) -> Complex64 {
    up.overlap(down)
}

fn sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `⟨P⟩ = (−1)^N Re(K^N)`.
///
/// After the pulse the state is `(|A⟩^⊗N + |B⟩^⊗N)/√2`. The diagonal terms
/// `⟨A|p|A⟩` and `⟨B|p|B⟩` vanish and `⟨A|p|B⟩ = −K`.
pub fn parity_expectation_exact(model: &GhzModel) -> Result<f64> {
    let (up, down) = model.branches()?;
    let k = branch_overlap(&up, &down);
    let n = model.n_particles();
    // modulus and argument separately: powi on a complex loses accuracy for large N
    let value = k.norm().powi(n as i32) * (n as f64 * k.arg()).cos();
    Ok(sign(n) * value)
}

pub fn parity_moments_exact(model: &GhzModel) -> Result<ParityMoments> {
    Ok(ParityMoments::involution(parity_expectation_exact(model)?, Engine::ExactBranch))
}

struct Truncated {
    c: f64,
    s: f64,
    ws: f64,
    wp: f64,
    n: f64,
}

impl Truncated {
    fn new(model: &GhzModel) -> Result<Self> {
        if !model.params.is_unit() {
            return Err(Error::UnsupportedConfiguration(
                "truncated parity formulas assume m = hbar = omega = r = 1".into(),
            ));
        }
        let wp = model.profile.constant_omega_p().ok_or(Error::UnsupportedProfile)?;
        let x = PI / wp;
        Ok(Truncated {
            c: x.cos(),
            s: x.sin(),
            ws: model.profile.omega_s(),
            wp,
            n: model.n_particles() as f64,
        })
    }

    /// `N(ω_p² + ω_s²)(1 − cos(π/ω_p))`
    fn damping(&self) -> f64 {
        self.n * (self.wp * self.wp + self.ws * self.ws) * (1.0 - self.c)
    }

    /// `2Nω_s(ω_p sin(π/ω_p) − π)`
    fn fringe(&self) -> f64 {
        2.0 * self.n * self.ws * (self.wp * self.s - PI)
    }

    fn e(&self, w: f64) -> f64 {
        (self.n * w * w * (self.c - 1.0)).exp()
    }
}

/// Ground-state-truncated closed forms; unit constants and constant drive only.
///
/// The truncated state is not normalized, so `⟨P²⟩` falls below one away from
/// the return lines.
pub fn parity_moments_truncated(model: &GhzModel) -> Result<ParityMoments> {
    let t = Truncated::new(model)?;
    let n = model.n_particles();
    let mean = sign(n) * t.fringe().cos() / t.damping().exp();
    let second_moment = 0.5 * (t.e(t.wp - t.ws) + t.e(t.wp + t.ws));
    let variance = second_moment - t.fringe().cos().powi(2) / (2.0 * t.damping()).exp();
    Ok(ParityMoments {
        mean,
        second_moment,
        variance,
        engine: Engine::TruncatedAnalytic,
    })
}

/// Variance of the truncated engine on the return lines, where it reduces to
/// `sin²(2Nπω_s)`.
pub fn parity_variance_ideal(omega_s: f64, n_particles: usize) -> f64 {
    (2.0 * n_particles as f64 * PI * omega_s).sin().powi(2)
}

/// Richardson-extrapolated central difference of `f` at `x`, rejecting slopes
/// lost in round-off.
fn slope<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let d = |h: f64| -> Result<f64> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let floor = SLOPE_FLOOR.max(64.0 * f64::EPSILON / h);
    if value.abs() < floor {
        return Err(Error::InsensitiveOperatingPoint { slope: value });
    }
    let relative = (coarse - fine).abs() / value.abs();
    if relative > STEP_CONSISTENCY {
        return Err(Error::StepSize { step: h, relative });
    }
    Ok(value)
}

/// `Δω_s = ΔP/|∂⟨P⟩/∂ω_s|` from the exact engine.
pub fn rotation_precision(model: &GhzModel, d_omega: f64) -> Result<f64> {
    let p = parity_expectation_exact(model)?;
    let d = slope(|w| parity_expectation_exact(&model.with_omega_s(w)), model.profile.omega_s(), d_omega)?;
    Ok((1.0 - p * p).max(0.0).sqrt() / d.abs())
}

/// Closed-form `Δω_s` of the truncated engine.
pub fn rotation_precision_truncated(model: &GhzModel) -> Result<f64> {
    let t = Truncated::new(model)?;
    let theta = -t.fringe();
    let numerator = t.damping().exp()
        * (t.e(t.wp - t.ws) + t.e(t.wp + t.ws) - 2.0 * (-2.0 * t.damping()).exp() * theta.cos().powi(2))
            .max(0.0)
            .sqrt();
    let slope = t.ws * (t.c - 1.0) * theta.cos() + (t.wp * t.s - PI) * theta.sin();
    let denominator = 2.0 * 2f64.sqrt() * t.n * slope.abs();
    if denominator < SLOPE_FLOOR {
        return Err(Error::InsensitiveOperatingPoint { slope });
    }
    Ok(numerator / denominator)
}

/// `1/(2πN)`.
pub fn rotation_precision_ideal(n_particles: usize) -> Result<f64> {
    if n_particles == 0 {
        return Err(Error::Domain("particle number must be >= 1".into()));
    }
    Ok(1.0 / (2.0 * PI * n_particles as f64))
}

/// Mean single-particle parity for the uncorrelated input, `−Re K`.
fn single_particle_parity(model: &GhzModel) -> Result<f64> {
    let (up, down) = model.branches()?;
    Ok(-branch_overlap(&up, &down).re)
}

/// Precision of the uncorrelated input read out by the total parity imbalance
/// `Σ_k p_k`: `sqrt(1 − p̄²)/(√N |∂p̄/∂ω_s|)`.
pub fn rotation_precision_coherent_spin(model: &GhzModel, d_omega: f64) -> Result<f64> {
    let p = single_particle_parity(model)?;
    let d = slope(|w| single_particle_parity(&model.with_omega_s(w)), model.profile.omega_s(), d_omega)?;
    Ok((1.0 - p * p).max(0.0).sqrt() / ((model.n_particles() as f64).sqrt() * d.abs()))
}

/// Parity moments from the full tensor-product state, N ≤ 4 and n_max ≤ 8.
pub fn parity_brute_force(model: &GhzModel, n_max: usize) -> Result<ParityMoments> {
    let n = model.n_particles();
    tensor::check_capacity(n, n_max)?;
    let (up, down) = model.branches()?;
    let d = 2 * (n_max + 1);
    let mut state = tensor::ghz(&tensor::local(0, &up, n_max), &tensor::local(1, &down, n_max), n);
    let c = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let pulse = [[c, -c], [c, c]];
    for k in 0..n {
        tensor::apply_spin_gate(&mut state, n, d, k, pulse);
    }
    let parity = |v: &[Complex64]| -> Vec<Complex64> {
        v.iter()
            .enumerate()
            .map(|(i, a)| a * sign(tensor::down_count(i, n, d)))
            .collect()
    };
    let once = parity(&state);
    let twice = parity(&once);
    let mean = tensor::inner(&state, &once).re;
    let second_moment = tensor::inner(&state, &twice).re;
    Ok(ParityMoments {
        mean,
        second_moment,
        variance: second_moment - mean * mean,
        engine: Engine::BruteForce,
    })
}
