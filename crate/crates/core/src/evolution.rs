//! Closed-form branch evolution.
//!
//! The interaction-picture generator of each spin branch is linear in `a` and
//! `a†`, so the Magnus series stops at second order: a displacement by
//! `α_σ = ∫₀ᵀ A_σ(t) e^{iωt} dt` followed by a scalar phase `φ_σ`. Starting
//! from the oscillator ground state the external state of a branch is
//! therefore always a coherent state times a global phase.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::params::{coupling_amplitude, DriveProfile, PhysicalParams, SpinBranch};
use crate::quadrature;

/// Absolute tolerance of the single quadrature used for α on sampled drives.
pub const ALPHA_TOL: f64 = 1e-12;
/// Absolute tolerance of the nested quadrature used for φ on sampled drives.
pub const PHASE_TOL: f64 = 1e-10;

/// Exact single-particle external state of one spin branch at time T:
/// `e^{iφ} |β⟩` with `|β⟩` a normalized coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchState {
    pub branch: SpinBranch,
    pub amplitude: Complex64,
    pub phase: f64,
    pub evolution_time: f64,
}

impl BranchState {
    /// `⟨self|other⟩`, including both global phases.
    pub fn overlap(&self, other: &BranchState) -> Complex64 {
        Complex64::from_polar(1.0, other.phase - self.phase) * coherent_overlap(self.amplitude, other.amplitude)
    }

    /// Always 1: coherent states are normalized.
    pub fn norm_sqr(&self) -> f64 {
        self.overlap(self).re
    }
}

/// `⟨β₁|β₂⟩ = exp(−|β₁|²/2 − |β₂|²/2 + β₁* β₂)`.
pub fn coherent_overlap(b1: Complex64, b2: Complex64) -> Complex64 {
    (-0.5 * b1.norm_sqr() - 0.5 * b2.norm_sqr() + b1.conj() * b2).exp()
}

/// `α_σ = ∫₀ᵀ A_σ(t) e^{iωt} dt`.
///
/// Closed form for constant drives, adaptive quadrature otherwise.
pub fn displacement_alpha(params: &PhysicalParams, profile: &DriveProfile, branch: SpinBranch) -> Result<Complex64> {
    match profile.constant_omega_p() {
        Some(wp) => {
            let w = params.trap_frequency();
            let amp = params.coupling_scale() * (profile.omega_s() + branch.eta() * wp);
            let wt = w * profile.total_time();
            // (e^{iωT} − 1)/(iω)
            let factor = Complex64::new(wt.sin(), 1.0 - wt.cos()) / w;
            Ok(factor * amp)
        }
        None => displacement_alpha_quadrature(params, profile, branch),
    }
}

/// The defining integral of α evaluated by quadrature, for any drive.
pub fn displacement_alpha_quadrature(
    params: &PhysicalParams,
    profile: &DriveProfile,
    branch: SpinBranch,
) -> Result<Complex64> {
    let w = params.trap_frequency();
    let t_end = profile.total_time();
    let breaks = profile.drive().breakpoints(t_end);
    quadrature::integrate_piecewise(
        |t| Ok(Complex64::from_polar(coupling_amplitude(params, profile, branch, t)?, w * t)),
        0.0,
        t_end,
        &breaks,
        ALPHA_TOL,
    )
}

/// `φ_σ = ∫₀ᵀ ∫₀^{t₁} A_σ(t₁) A_σ(t₂) sin[ω(t₁ − t₂)] dt₂ dt₁`.
///
/// Constant drives give `(m r²/2ħ) (ω_s + η ω_p)² (T − sin(ωT)/ω)`.
pub fn dynamical_phase(params: &PhysicalParams, profile: &DriveProfile, branch: SpinBranch) -> Result<f64> {
    match profile.constant_omega_p() {
        Some(wp) => {
            let w = params.trap_frequency();
            let t = profile.total_time();
            let c = profile.omega_s() + branch.eta() * wp;
            let pref = params.mass() * params.radius().powi(2) / (2.0 * params.hbar());
            Ok(pref * c * c * (t - (w * t).sin() / w))
        }
        None => dynamical_phase_quadrature(params, profile, branch),
    }
}

/// The defining double integral of φ by nested quadrature, for any drive.
pub fn dynamical_phase_quadrature(params: &PhysicalParams, profile: &DriveProfile, branch: SpinBranch) -> Result<f64> {
    let w = params.trap_frequency();
    let t_end = profile.total_time();
    let breaks = profile.drive().breakpoints(t_end);
    let inner_tol = PHASE_TOL * 1e-2;
    quadrature::integrate_piecewise(
        |t1| {
            let outer = coupling_amplitude(params, profile, branch, t1)?;
            if outer == 0.0 {
                return Ok(0.0);
            }
            let inner: f64 = quadrature::integrate_piecewise(
                |t2| Ok(coupling_amplitude(params, profile, branch, t2)? * (w * (t1 - t2)).sin()),
                0.0,
                t1,
                &breaks,
                inner_tol,
            )?;
            Ok(outer * inner)
        },
        0.0,
        t_end,
        &breaks,
        PHASE_TOL,
    )
}

/// External state of `branch` after the full drive, starting from `|0⟩`.
///
/// The interaction-picture propagator is `D(α) e^{iφ}` with
/// `D(α) = exp(α a† − α* a)`, which takes `|0⟩` to `|α⟩`; the free rotation
/// `e^{−iωT a†a}` then maps `|α⟩` to `|α e^{−iωT}⟩`.
pub fn branch_state(params: &PhysicalParams, profile: &DriveProfile, branch: SpinBranch) -> Result<BranchState> {
    let alpha = displacement_alpha(params, profile, branch)?;
    let phase = dynamical_phase(params, profile, branch)?;
    let t = profile.total_time();
    let rotation = Complex64::from_polar(1.0, -params.trap_frequency() * t);
    Ok(BranchState {
        branch,
        amplitude: alpha * rotation,
        phase,
        evolution_time: t,
    })
}

/// `F₀ = |⟨0|ψ_ex⟩|² = e^{−|β|²}`.
pub fn ground_fidelity(state: &BranchState) -> f64 {
    (-state.amplitude.norm_sqr()).exp()
}

/// Poisson occupation probabilities `F_n = e^{−|β|²} |β|^{2n} / n!`, n = 0..=n_max.
pub fn fock_distribution(state: &BranchState, n_max: usize) -> Vec<f64> {
    let mean = state.amplitude.norm_sqr();
    let mut out = Vec::with_capacity(n_max + 1);
    let mut p = (-mean).exp();
    out.push(p);
    for n in 1..=n_max {
        p *= mean / n as f64;
        out.push(p);
    }
    out
}

/// True when ωT is an integer multiple of 2π, where the displacement vanishes
/// for constant drives.
pub fn is_return_point(params: &PhysicalParams, profile: &DriveProfile) -> bool {
    let turns = params.trap_frequency() * profile.total_time() / (2.0 * PI);
    (turns - turns.round()).abs() < 1e-12 && turns.round() >= 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use SpinBranch::{Down, Up};

    fn unit() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn constant(ws: f64, wp: f64) -> DriveProfile {
        DriveProfile::constant(ws, wp).unwrap()
    }

    #[test]
    fn alpha_vanishes_on_return_line() {
        let a = displacement_alpha(&unit(), &constant(0.1, 0.5), Up).unwrap();
        assert!(a.norm() < 1e-15, "{a}");
        assert!(is_return_point(&unit(), &constant(0.1, 0.25)));
        assert!(!is_return_point(&unit(), &constant(0.1, 0.6)));
        let a = displacement_alpha(&unit(), &constant(0.3, 0.25), Down).unwrap();
        assert!(a.norm() < 1e-14);
    }

    #[test]
    fn alpha_example_at_0_6() {
        let a = displacement_alpha(&unit(), &constant(0.1, 0.6), Up).unwrap();
        assert_relative_eq!(a.re, -0.42866, epsilon = 1e-5);
        assert_relative_eq!(a.im, 0.24749, epsilon = 1e-5);
        assert_relative_eq!(a.norm_sqr(), 0.245, epsilon = 1e-12);
        let q = displacement_alpha_quadrature(&unit(), &constant(0.1, 0.6), Up).unwrap();
        assert!((a - q).norm() < 1e-12);
    }

    #[test]
    fn alpha_branch_antisymmetry_at_zero_rotation() {
        let prof = constant(0.0, 0.37);
        let up = displacement_alpha(&unit(), &prof, Up).unwrap();
        let down = displacement_alpha(&unit(), &prof, Down).unwrap();
        assert_eq!(up, -down);
    }

    #[test]
    fn phase_examples() {
        let up = dynamical_phase(&unit(), &constant(0.1, 0.5), Up).unwrap();
        assert_relative_eq!(up, 0.36 * PI, epsilon = 1e-14);
        assert_relative_eq!(up, 1.130973, epsilon = 1e-6);
        let q = dynamical_phase_quadrature(&unit(), &constant(0.1, 0.5), Up).unwrap();
        assert_relative_eq!(up, q, epsilon = 1e-10);

        let prof = constant(0.0, 0.73);
        assert_eq!(
            dynamical_phase(&unit(), &prof, Up).unwrap(),
            dynamical_phase(&unit(), &prof, Down).unwrap()
        );
    }

    #[test]
    fn phase_difference_on_return_line() {
        for ws in [0.0, 0.05, 0.1, 0.37] {
            let prof = constant(ws, 0.5);
            let d = dynamical_phase(&unit(), &prof, Up).unwrap() - dynamical_phase(&unit(), &prof, Down).unwrap();
            assert_relative_eq!(d, 2.0 * PI * ws, epsilon = 1e-13);
            let dq = dynamical_phase_quadrature(&unit(), &prof, Up).unwrap()
                - dynamical_phase_quadrature(&unit(), &prof, Down).unwrap();
            assert_relative_eq!(dq, 2.0 * PI * ws, epsilon = 2e-10);
        }
    }

    #[test]
    fn branch_state_examples() {
        let s = branch_state(&unit(), &constant(0.1, 0.5), Up).unwrap();
        assert!(s.amplitude.norm() < 1e-15);
        assert_relative_eq!(s.phase, 1.130973, epsilon = 1e-6);
        assert_eq!(ground_fidelity(&s), 1.0);

        let s = branch_state(&unit(), &constant(0.1, 0.6), Up).unwrap();
        assert_relative_eq!(s.amplitude.norm_sqr(), 0.245, epsilon = 1e-12);
        assert_relative_eq!(s.norm_sqr(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(ground_fidelity(&s), (-0.245f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(ground_fidelity(&s), 0.782704538242, epsilon = 1e-11);
    }

    #[test]
    fn fidelity_at_0_55() {
        let s = branch_state(&unit(), &constant(0.1, 0.55), Up).unwrap();
        // |α|² = ½(0.65)² · 2(1 − cos(π/0.55))
        let expect = (-(0.65f64.powi(2)) * (1.0 - (PI / 0.55).cos())).exp();
        assert_relative_eq!(ground_fidelity(&s), expect, epsilon = 1e-14);
        assert_relative_eq!(ground_fidelity(&s), 0.935129382390, epsilon = 1e-11);
        assert!(ground_fidelity(&s) < 1.0);
    }

    #[test]
    fn fock_distribution_examples() {
        let s = branch_state(&unit(), &constant(0.1, 0.5), Up).unwrap();
        let f = fock_distribution(&s, 3);
        assert_eq!(f[0], 1.0);
        assert!(f[1..].iter().all(|&p| p < 1e-30));

        let s = branch_state(&unit(), &constant(0.1, 0.6), Up).unwrap();
        let f = fock_distribution(&s, 3);
        // Poisson(0.245), evaluated independently
        let expect = [0.782704538242, 0.191762611869, 0.023490919954, 0.001918425130];
        for (a, b) in f.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-11);
        }
        let mut prev = 0.0;
        for n in 0..8 {
            let total: f64 = fock_distribution(&s, n).iter().sum();
            assert!(total >= prev && total <= 1.0 + 1e-15);
            prev = total;
        }
    }

    #[test]
    fn sampled_constant_matches_closed_form() {
        let p = PhysicalParams::new(1.2, 0.9, 1.1, 0.8).unwrap();
        let wp = 0.6;
        let closed = constant(0.15, wp);
        let knots = vec![(0.0, wp), (2.0, wp), (3.5, wp), (40.0, wp)];
        let sampled = DriveProfile::sampled(0.15, knots).unwrap();
        for b in SpinBranch::ALL {
            let a1 = displacement_alpha(&p, &closed, b).unwrap();
            let a2 = displacement_alpha(&p, &sampled, b).unwrap();
            assert!((a1 - a2).norm() < 1e-11, "{a1} vs {a2}");
            let f1 = dynamical_phase(&p, &closed, b).unwrap();
            let f2 = dynamical_phase(&p, &sampled, b).unwrap();
            assert_relative_eq!(f1, f2, epsilon = 1e-9);
        }
    }

    #[test]
    fn sampled_ramp_integrals_are_consistent() {
        // α from quadrature vs a plain midpoint-rule oracle with many points
        let p = unit();
        let prof = DriveProfile::sampled(0.1, vec![(0.0, 0.3), (3.0, 0.7), (30.0, 0.7)]).unwrap();
        let alpha = displacement_alpha(&p, &prof, Up).unwrap();
        let n = 400_000;
        let h = prof.total_time() / n as f64;
        let mut oracle = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            oracle += Complex64::from_polar(coupling_amplitude(&p, &prof, Up, t).unwrap(), t) * h;
        }
        assert!((alpha - oracle).norm() < 1e-8, "{alpha} vs {oracle}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn negating_rotation_swaps_branches(ws in -1.0f64..1.0, wp in 0.1f64..1.0) {
                let p = unit();
                let pos = constant(ws, wp);
                let neg = pos.with_omega_s(-ws);
                let a = branch_state(&p, &neg, Up).unwrap();
                let b = branch_state(&p, &pos, Down).unwrap();
                prop_assert!((a.amplitude + b.amplitude).norm() < 1e-14);
                prop_assert!((a.phase - b.phase).abs() < 1e-14);
            }

            #[test]
            fn fidelity_bounds(ws in -1.0f64..1.0, wp in 0.1f64..1.0) {
                for b in SpinBranch::ALL {
                    let s = branch_state(&unit(), &constant(ws, wp), b).unwrap();
                    let f = ground_fidelity(&s);
                    prop_assert!(f > 0.0 && f <= 1.0);
                    prop_assert_eq!(f == 1.0, s.amplitude.norm_sqr() == 0.0 || f == 1.0);
                }
            }

            #[test]
            fn fock_distribution_saturates(ws in -1.0f64..1.0, wp in 0.1f64..1.0) {
                let s = branch_state(&unit(), &constant(ws, wp), Up).unwrap();
                let m = s.amplitude.norm_sqr();
                let n_max = (m + 10.0 * m.sqrt() + 20.0).ceil() as usize;
                let total: f64 = fock_distribution(&s, n_max).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
