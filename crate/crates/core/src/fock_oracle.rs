//! Truncated number-basis Schrödinger integrator for one spin branch.
//!
//! Shares nothing with [`crate::evolution`] beyond the Hamiltonian
//! definition, so agreement between the two is a genuine check of the
//! closed-form engine.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::BranchState;
use crate::params::{DriveProfile, PhysicalParams, SpinBranch};

pub const DEFAULT_N_MAX: usize = 40;
pub const DEFAULT_STEPS: usize = 20_000;
pub const DEFAULT_LEAK_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Amplitudes in the number basis `|0⟩ … |n_max⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::Domain("Fock vector needs n_max >= 1".into()));
        }
        Ok(FockVector { amplitudes })
    }

    /// The number state `|n⟩`.
    pub fn basis(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::Domain(format!("|{n}> outside truncation n_max = {n_max}")));
        }
        let mut v = vec![ZERO; n_max + 1];
        v[n] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    /// The coherent state `|β⟩` projected onto the truncated basis (not renormalized).
    pub fn coherent(beta: Complex64, n_max: usize) -> Result<Self> {
        let mut v = Vec::with_capacity(n_max + 1);
        let mut c = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
        v.push(c);
        for n in 1..=n_max {
            c = c * beta / (n as f64).sqrt();
            v.push(c);
        }
        Self::new(v)
    }

    /// Materializes `e^{iφ}|β⟩` for a closed-form branch state.
    pub fn from_branch(state: &BranchState, n_max: usize) -> Result<Self> {
        let mut v = Self::coherent(state.amplitude, n_max)?;
        let phase = Complex64::from_polar(1.0, state.phase);
        v.amplitudes.iter_mut().for_each(|a| *a *= phase);
        Ok(v)
    }

    pub fn n_max(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `Σ a*_n b_n`.
pub fn overlap(a: &FockVector, b: &FockVector) -> Result<Complex64> {
    if a.amplitudes.len() != b.amplitudes.len() {
        return Err(Error::Shape {
            left: a.amplitudes.len(),
            right: b.amplitudes.len(),
        });
    }
    Ok(a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum())
}

/// Hermitian tridiagonal matrix: real diagonal, `upper[k] = H[k][k+1]`,
/// and `H[k+1][k] = conj(upper[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for k in 0..n {
            m[[k, k]] = Complex64::new(self.diag[k], 0.0);
        }
        for (k, u) in self.upper.iter().enumerate() {
            m[[k, k + 1]] = *u;
            m[[k + 1, k]] = u.conj();
        }
        m
    }

    /// `y = scale · H x`.
    pub fn apply(&self, x: &[Complex64], scale: Complex64, y: &mut [Complex64]) {
        let n = self.dim();
        for k in 0..n {
            let mut acc = x[k] * self.diag[k];
            if k + 1 < n {
                acc += self.upper[k] * x[k + 1];
            }
            if k > 0 {
                acc += self.upper[k - 1].conj() * x[k - 1];
            }
            y[k] = acc * scale;
        }
    }

    /// `exp(scale · H)` by scaling and squaring of a Taylor polynomial.
    ///
    /// The Horner steps multiply a dense matrix by the tridiagonal one, so only
    /// the squarings cost O(n³).
    pub fn expm(&self, scale: Complex64) -> Array2<Complex64> {
        let n = self.dim();
        // ‖scale·H‖₁ bound from the band
        let mut norm: f64 = 0.0;
        for k in 0..n {
            let mut col = self.diag[k].abs();
            if k + 1 < n {
                col += self.upper[k].norm();
            }
            if k > 0 {
                col += self.upper[k - 1].norm();
            }
            norm = norm.max(col);
        }
        norm *= scale.norm();
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let s = scale / 2f64.powi(squarings as i32);
        const DEGREE: usize = 18;

        let eye = Array2::<Complex64>::eye(n);
        let mut acc = eye.clone();
        let mut scratch = Array2::<Complex64>::zeros((n, n));
        for j in (1..=DEGREE).rev() {
            // acc = I + (s H / j) acc
            let coef = s / j as f64;
            for c in 0..n {
                let col: Vec<Complex64> = (0..n).map(|r| acc[[r, c]]).collect();
                let mut out = vec![ZERO; n];
                self.apply(&col, coef, &mut out);
                for r in 0..n {
                    scratch[[r, c]] = out[r];
                }
            }
            acc = &eye + &scratch;
        }
        for _ in 0..squarings {
            acc = acc.dot(&acc);
        }
        acc
    }
}

fn hamiltonian_band(
    params: &PhysicalParams,
    profile: &DriveProfile,
    branch: SpinBranch,
    t: f64,
    n_max: usize,
) -> Result<Tridiagonal> {
    let drive = profile.branch_drive(branch, t)?;
    let hw = params.hbar() * params.trap_frequency();
    let g = (params.mass() * params.hbar() * params.trap_frequency() / 2.0).sqrt() * params.radius() * drive;
    // i g (a† − a): ⟨n|·|n+1⟩ = −i g √(n+1)
    let diag = (0..=n_max).map(|n| hw * n as f64).collect();
    let upper = (0..n_max)
        .map(|n| Complex64::new(0.0, -g * ((n + 1) as f64).sqrt()))
        .collect();
    Ok(Tridiagonal { diag, upper })
}

/// `H_σ(t) = ħω a†a + i sqrt(mħω/2) r (a† − a)(ω_s + η_σ ω_p(t))` in the
/// truncated number basis.
pub fn hamiltonian_matrix(
    params: &PhysicalParams,
    profile: &DriveProfile,
    branch: SpinBranch,
    t: f64,
    n_max: usize,
) -> Result<Array2<Complex64>> {
    Ok(hamiltonian_band(params, profile, branch, t, n_max)?.to_dense())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact exponential of the midpoint Hamiltonian per step.
    MidpointExponential,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub n_max: usize,
    pub dt: f64,
    pub method: Method,
    pub leak_tol: f64,
}

impl IntegratorConfig {
    /// Default cutoff and step `T/20000` for the given profile.
    pub fn for_profile(profile: &DriveProfile) -> Self {
        IntegratorConfig {
            n_max: DEFAULT_N_MAX,
            dt: profile.total_time() / DEFAULT_STEPS as f64,
            method: Method::MidpointExponential,
            leak_tol: DEFAULT_LEAK_TOL,
        }
    }

    fn validate(&self, total_time: f64) -> Result<()> {
        if self.n_max < 4 {
            return Err(Error::Domain(format!("n_max must be >= 4, got {}", self.n_max)));
        }
        if !(self.dt > 0.0 && self.dt <= total_time / 100.0 * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "dt must lie in (0, T/100] = (0, {}], got {}",
                total_time / 100.0,
                self.dt
            )));
        }
        if !(self.leak_tol > 0.0) {
            return Err(Error::Domain("leak_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub state: FockVector,
    /// `|1 − ‖ψ‖²|` at the end.
    pub norm_loss: f64,
    /// Largest population seen in `|n_max⟩` over the trajectory.
    pub edge_population: f64,
    pub steps: usize,
}

/// Evolves `|0⟩` under `H_σ(t)` from 0 to T.
///
/// The step count is `ceil(T/dt)`; the last step is shortened to land on T.
/// Fails with [`Error::Truncation`] when norm loss or the edge population
/// exceeds `leak_tol`.
pub fn integrate(
    params: &PhysicalParams,
    profile: &DriveProfile,
    branch: SpinBranch,
    config: &IntegratorConfig,
) -> Result<Integration> {
    let t_end = profile.total_time();
    config.validate(t_end)?;
    let n = config.n_max + 1;
    let steps = (t_end / config.dt - 1e-9).ceil().max(1.0) as usize;
    let hbar = params.hbar();

    let mut psi = vec![ZERO; n];
    psi[0] = Complex64::new(1.0, 0.0);
    let mut edge: f64 = 0.0;

    let mut cached: Option<(f64, f64, Array2<Complex64>)> = None;
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];

    for step in 0..steps {
        let t0 = step as f64 * config.dt;
        let t1 = if step + 1 == steps { t_end } else { t0 + config.dt };
        let h = t1 - t0;
        match config.method {
            Method::MidpointExponential => {
                let tm = 0.5 * (t0 + t1);
                let drive = profile.branch_drive(branch, tm)?;
                let reuse = matches!(&cached, Some((d, hh, _)) if *d == drive && *hh == h);
                if !reuse {
                    let band = hamiltonian_band(params, profile, branch, tm, config.n_max)?;
                    cached = Some((drive, h, band.expm(-I * (h / hbar))));
                }
                let prop = &cached.as_ref().expect("propagator cached").2;
                for r in 0..n {
                    tmp[r] = (0..n).map(|c| prop[[r, c]] * psi[c]).sum();
                }
                psi.copy_from_slice(&tmp);
            }
            Method::Rk4 => {
                let scale = -I / hbar;
                let h_a = hamiltonian_band(params, profile, branch, t0, config.n_max)?;
                let h_m = hamiltonian_band(params, profile, branch, 0.5 * (t0 + t1), config.n_max)?;
                let h_b = hamiltonian_band(params, profile, branch, t1, config.n_max)?;
                h_a.apply(&psi, scale, &mut k1);
                for r in 0..n {
                    tmp[r] = psi[r] + k1[r] * (0.5 * h);
                }
                h_m.apply(&tmp, scale, &mut k2);
                for r in 0..n {
                    tmp[r] = psi[r] + k2[r] * (0.5 * h);
                }
                h_m.apply(&tmp, scale, &mut k3);
                for r in 0..n {
                    tmp[r] = psi[r] + k3[r] * h;
                }
                h_b.apply(&tmp, scale, &mut k4);
                for r in 0..n {
                    psi[r] += (k1[r] + k2[r] * 2.0 + k3[r] * 2.0 + k4[r]) * (h / 6.0);
                }
            }
        }
        edge = edge.max(psi[n - 1].norm_sqr());
    }

    let state = FockVector::new(psi)?;
    let norm_loss = (1.0 - state.norm_sqr()).abs();
    let leakage = norm_loss.max(edge);
    if leakage > config.leak_tol {
        return Err(Error::Truncation {
            leakage,
            tolerance: config.leak_tol,
            n_max: config.n_max,
        });
    }
    Ok(Integration {
        state,
        norm_loss,
        edge_population: edge,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{branch_state, coherent_overlap, ground_fidelity};
    use approx::assert_relative_eq;
    use SpinBranch::{Down, Up};

    fn unit() -> PhysicalParams {
        PhysicalParams::default()
    }

    #[test]
    fn hamiltonian_is_hermitian_and_diagonal_without_drive() {
        let p = PhysicalParams::new(1.3, 0.8, 1.7, 0.6).unwrap();
        let prof = DriveProfile::constant(0.2, 0.45).unwrap();
        let h = hamiltonian_matrix(&p, &prof, Down, 1.0, 6).unwrap();
        assert_eq!(h, h.t().mapv(|z| z.conj()));

        let still = DriveProfile::constant(0.5, 0.5).unwrap();
        let h = hamiltonian_matrix(&unit(), &still, Down, 0.5, 3).unwrap();
        let mut expect = Array2::<Complex64>::zeros((4, 4));
        for n in 0..4 {
            expect[[n, n]] = Complex64::new(n as f64, 0.0);
        }
        assert_eq!(h, expect);
    }

    #[test]
    fn hamiltonian_coupling_matches_amplitude() {
        let prof = DriveProfile::constant(0.1, 0.5).unwrap();
        let h = hamiltonian_matrix(&unit(), &prof, Up, 0.0, 2).unwrap();
        assert_relative_eq!(h[[0, 1]].norm(), 0.5f64.sqrt() * 0.6, epsilon = 1e-15);
        assert_relative_eq!(h[[0, 1]].norm(), 0.42426, epsilon = 1e-5);
        let a = crate::params::coupling_amplitude(&unit(), &prof, Up, 0.0).unwrap();
        assert_relative_eq!(h[[1, 2]].norm(), a * 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn expm_matches_eigen_route_for_diagonal() {
        let band = Tridiagonal {
            diag: vec![0.0, 1.0, 2.0, 3.0],
            upper: vec![ZERO; 3],
        };
        let u = band.expm(-I * 7.3);
        for k in 0..4 {
            let z = Complex64::from_polar(1.0, -7.3 * k as f64);
            assert!((u[[k, k]] - z).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_is_unitary_for_large_argument() {
        let p = unit();
        let prof = DriveProfile::constant(0.3, 0.4).unwrap();
        let band = hamiltonian_band(&p, &prof, Up, 0.1, 12).unwrap();
        let u = band.expm(-I * 3.0);
        let prod = u.t().mapv(|z| z.conj()).dot(&u);
        let eye = Array2::<Complex64>::eye(13);
        let err = (&prod - &eye).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn overlap_basics() {
        let zero = FockVector::basis(0, 5).unwrap();
        let one = FockVector::basis(1, 5).unwrap();
        assert_eq!(overlap(&zero, &one).unwrap(), ZERO);
        let v = FockVector::coherent(Complex64::new(0.3, -0.2), 5).unwrap();
        let vv = overlap(&v, &v).unwrap();
        assert!(vv.re >= 0.0 && vv.im == 0.0);
        assert_relative_eq!(vv.re, v.norm_sqr(), epsilon = 1e-15);
        let short = FockVector::basis(0, 4).unwrap();
        assert!(matches!(overlap(&zero, &short), Err(Error::Shape { left: 6, right: 5 })));
    }

    #[test]
    fn coherent_overlap_identity() {
        let betas = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.7, 0.1),
            Complex64::new(-0.4, 0.9),
            Complex64::new(0.2, -0.6),
        ];
        for &b1 in &betas {
            for &b2 in &betas {
                let v1 = FockVector::coherent(b1, 60).unwrap();
                let v2 = FockVector::coherent(b2, 60).unwrap();
                let num = overlap(&v1, &v2).unwrap();
                assert!((num - coherent_overlap(b1, b2)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn integrator_reproduces_stationary_ground_state() {
        let prof = DriveProfile::constant(0.5, 0.5).unwrap();
        let cfg = IntegratorConfig {
            n_max: 8,
            ..IntegratorConfig::for_profile(&prof)
        };
        let out = integrate(&unit(), &prof, Down, &cfg).unwrap();
        let amps = out.state.amplitudes();
        assert!((amps[0].norm() - 1.0).abs() < 1e-12);
        assert!(amps[1..].iter().all(|a| a.norm() < 1e-14));
    }

    #[test]
    fn integrator_matches_closed_form_at_return_line() {
        let prof = DriveProfile::constant(0.1, 0.5).unwrap();
        let cfg = IntegratorConfig::for_profile(&prof);
        let out = integrate(&unit(), &prof, Up, &cfg).unwrap();
        let pred = branch_state(&unit(), &prof, Up).unwrap();
        let ov = overlap(&FockVector::from_branch(&pred, cfg.n_max).unwrap(), &out.state).unwrap();
        assert!(ov.norm_sqr() >= 1.0 - 1e-8);
        // the global phase agrees too, not just the fidelity
        assert!((ov - Complex64::new(1.0, 0.0)).norm() < 1e-8, "{ov}");
    }

    #[test]
    fn integrator_ground_projection_at_0_6() {
        let prof = DriveProfile::constant(0.1, 0.6).unwrap();
        let cfg = IntegratorConfig::for_profile(&prof);
        let out = integrate(&unit(), &prof, Up, &cfg).unwrap();
        let f0 = out.state.amplitudes()[0].norm_sqr();
        assert_relative_eq!(f0, 0.782704538242, epsilon = 1e-6);
        let pred = branch_state(&unit(), &prof, Up).unwrap();
        assert_relative_eq!(f0, ground_fidelity(&pred), epsilon = 1e-6);
        let ov = overlap(&FockVector::from_branch(&pred, cfg.n_max).unwrap(), &out.state).unwrap();
        assert!((ov - Complex64::new(1.0, 0.0)).norm() < 1e-8, "{ov}");
    }

    #[test]
    fn truncation_is_reported() {
        let prof = DriveProfile::constant(0.9, 0.15).unwrap();
        let cfg = IntegratorConfig {
            n_max: 4,
            ..IntegratorConfig::for_profile(&prof)
        };
        assert!(matches!(
            integrate(&unit(), &prof, Up, &cfg),
            Err(Error::Truncation { n_max: 4, .. })
        ));
    }

    #[test]
    fn config_validation() {
        let prof = DriveProfile::constant(0.1, 0.5).unwrap();
        let mut cfg = IntegratorConfig::for_profile(&prof);
        cfg.n_max = 3;
        assert!(matches!(integrate(&unit(), &prof, Up, &cfg), Err(Error::Domain(_))));
        let mut cfg = IntegratorConfig::for_profile(&prof);
        cfg.dt = prof.total_time() / 50.0;
        assert!(matches!(integrate(&unit(), &prof, Up, &cfg), Err(Error::Domain(_))));
    }
}
