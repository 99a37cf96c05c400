//! Invariant and oracle-equivalence checks run by `ghz-sagnac selftest`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::Result;
use crate::evolution::{
    branch_state, coherent_overlap, displacement_alpha, displacement_alpha_quadrature, dynamical_phase,
    dynamical_phase_quadrature,
};
use crate::fock_oracle::{self, FockVector, IntegratorConfig};
use crate::metrology::{self, qcrb, qfi_brute_force, qfi_exact, qfi_truncated_analytic, GhzModel};
use crate::params::{DriveProfile, PhysicalParams, SpinBranch};
use crate::parity;
use crate::tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation and the tolerance it was held to.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{status}  {:width$}  {}", c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

/// Runs `body`, which returns the worst deviation, against `tolerance`.
fn check(name: &'static str, tolerance: f64, body: impl FnOnce() -> Result<f64>) -> Check {
    match body() {
        Ok(worst) => Check {
            name,
            passed: worst <= tolerance,
            detail: format!("worst {worst:.3e} (tolerance {tolerance:.0e})"),
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn max_over<T>(items: impl IntoIterator<Item = T>, mut f: impl FnMut(T) -> Result<f64>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for item in items {
        worst = worst.max(f(item)?);
    }
    Ok(worst)
}

fn small_grid() -> Vec<(f64, f64)> {
    [0.0, 0.1, 0.2]
        .iter()
        .flat_map(|&ws| [0.5, 0.55, 0.6].map(|wp| (ws, wp)))
        .collect()
}

/// The full battery; `n_max` is the Fock cutoff of the brute-force oracles.
pub fn run(n_max: usize) -> Result<Report> {
    tensor::check_capacity(3, n_max)?;
    let params = PhysicalParams::default();
    let mut checks = Vec::new();

    checks.push(check("closed form vs quadrature (alpha, phi)", 1e-10, || {
        let points: Vec<(f64, f64)> = (0..=10)
            .flat_map(|i| (1..=10).map(move |j| (i as f64 * 0.1, j as f64 * 0.1)))
            .collect();
        max_over(points, |(ws, wp)| {
            let prof = DriveProfile::constant(ws, wp)?;
            max_over(SpinBranch::ALL, |b| {
                let da = (displacement_alpha(&params, &prof, b)? - displacement_alpha_quadrature(&params, &prof, b)?).norm();
                let dp = (dynamical_phase(&params, &prof, b)? - dynamical_phase_quadrature(&params, &prof, b)?).abs();
                Ok(da.max(dp))
            })
        })
    }));

    checks.push(check("Fock integrator infidelity", 1e-7, || {
        max_over([(0.0, 0.3), (0.1, 0.5), (0.2, 0.7)], |(ws, wp)| {
            let prof = DriveProfile::constant(ws, wp)?;
            max_over(SpinBranch::ALL, |b| {
                let run = fock_oracle::integrate(&params, &prof, b, &IntegratorConfig::for_profile(&prof))?;
                let reference = FockVector::from_branch(&branch_state(&params, &prof, b)?, run.state.n_max())?;
                Ok(1.0 - fock_oracle::overlap(&reference, &run.state)?.norm_sqr())
            })
        })
    }));

    checks.push(check("coherent overlap identity", 1e-10, || {
        let amplitudes = [(0.3, -0.2), (1.1, 0.4), (-0.7, 0.9), (0.0, 0.0)];
        max_over(amplitudes, |a| {
            max_over(amplitudes, |b| {
                let (za, zb) = (num_complex::Complex64::new(a.0, a.1), num_complex::Complex64::new(b.0, b.1));
                let direct = fock_oracle::overlap(&FockVector::coherent(za, 60)?, &FockVector::coherent(zb, 60)?)?;
                Ok((direct - coherent_overlap(za, zb)).norm())
            })
        })
    }));

    checks.push(check("QFI = 4 pi^2 N^2 at omega_p = 0.5, N = 1..20", 1e-6, || {
        max_over(1..=20, |n| {
            let m = GhzModel::unit(0.1, 0.5, n)?;
            let target = 4.0 * PI * PI * (n * n) as f64;
            let e = qfi_exact(&m, metrology::DEFAULT_STEP)?.value;
            let t = qfi_truncated_analytic(&m)?.value;
            Ok(((e - target).abs() / target).max((t - target).abs() / target))
        })
    }));

    checks.push(check("brute-force QFI vs product branches, N <= 3", 1e-6, || {
        max_over(small_grid(), |(ws, wp)| {
            max_over(1..=3, |n| {
                let m = GhzModel::unit(ws, wp, n)?;
                let e = qfi_exact(&m, metrology::DEFAULT_STEP)?.value;
                let b = qfi_brute_force(&m, n_max)?.value;
                Ok((e - b).abs() / e.abs())
            })
        })
    }));

    checks.push(check("brute-force parity vs product branches, N <= 3", 1e-6, || {
        max_over(small_grid(), |(ws, wp)| {
            max_over(1..=3, |n| {
                let m = GhzModel::unit(ws, wp, n)?;
                let b = parity::parity_brute_force(&m, n_max)?;
                let e = parity::parity_expectation_exact(&m)?;
                Ok((b.mean - e).abs().max((b.second_moment - 1.0).abs()))
            })
        })
    }));

    checks.push(check("exact engine <P^2> = 1", 0.0, || {
        max_over(small_grid(), |(ws, wp)| {
            max_over(1..=8, |n| Ok((parity::parity_moments_exact(&GhzModel::unit(ws, wp, n)?)?.second_moment - 1.0).abs()))
        })
    }));

    checks.push(check("parity fringe identity at omega_p = 0.5, N = 5", 1e-12, || {
        max_over(0..=200, |i| {
            let ws = i as f64 / 200.0;
            let p = parity::parity_expectation_exact(&GhzModel::unit(ws, 0.5, 5)?)?;
            Ok((p + (10.0 * PI * ws).cos()).abs())
        })
    }));

    checks.push(check("parity precision = 1/(2 pi N) = QCRB at omega_p = 0.5", 1e-9, || {
        max_over(1..=10, |n| {
            let m = GhzModel::unit(0.3 / (2.0 * PI * n as f64), 0.5, n)?;
            let d = parity::rotation_precision(&m, parity::DEFAULT_STEP)?;
            let ideal = parity::rotation_precision_ideal(n)?;
            let bound = qcrb(&qfi_exact(&m, metrology::DEFAULT_STEP)?, 1)?;
            Ok(((d - ideal).abs() / ideal).max((d - bound).abs() / bound))
        })
    }));

    checks.push(check("parity precision never beats the QCRB", 1e-9, || {
        let points = [(0.05, 0.5), (0.1, 0.55), (0.1, 0.6), (0.23, 0.45), (0.41, 0.7)];
        max_over(points, |(ws, wp)| {
            max_over([1, 3, 5], |n| {
                let m = GhzModel::unit(ws, wp, n)?;
                let bound = qcrb(&qfi_exact(&m, metrology::DEFAULT_STEP)?, 1)?;
                Ok((bound - parity::rotation_precision(&m, parity::DEFAULT_STEP)?).max(0.0))
            })
        })
    }));

    Ok(Report { checks })
}
