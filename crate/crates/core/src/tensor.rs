//! Dense N-particle states in the full spin ⊗ Fock tensor basis.
//!
//! Only used by the brute-force validation oracles, which are capped at
//! N ≤ 4 and n_max ≤ 8: at most 18⁴ = 104 976 amplitudes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::BranchState;
use crate::fock_oracle::FockVector;

pub const MAX_PARTICLES: usize = 4;
pub const MAX_FOCK_CUTOFF: usize = 8;

pub(crate) fn check_capacity(n_particles: usize, n_max: usize) -> Result<()> {
    if n_particles == 0 {
        return Err(Error::Domain("particle number must be >= 1".into()));
    }
    if n_particles > MAX_PARTICLES || n_max > MAX_FOCK_CUTOFF {
        return Err(Error::Capacity(format!(
            "brute force limited to N <= {MAX_PARTICLES}, n_max <= {MAX_FOCK_CUTOFF} (got N = {n_particles}, n_max = {n_max})"
        )));
    }
    if n_max < 1 {
        return Err(Error::Domain("n_max must be >= 1".into()));
    }
    Ok(())
}

/// Single-particle vector `|spin⟩ ⊗ χ` with spin 0 = up, 1 = down; index `spin·(n_max+1) + n`.
/// The truncated coherent state is renormalized.
pub(crate) fn local(spin: usize, state: &BranchState, n_max: usize) -> Vec<Complex64> {
    let chi = FockVector::from_branch(state, n_max).expect("n_max >= 1");
    let norm = chi.norm_sqr().sqrt();
    let mut v = vec![Complex64::new(0.0, 0.0); 2 * (n_max + 1)];
    for (n, a) in chi.amplitudes().iter().enumerate() {
        v[spin * (n_max + 1) + n] = a / norm;
    }
    v
}

pub(crate) fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub(crate) fn power(v: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = v.to_vec();
    for _ in 1..n {
        out = kron(&out, v);
    }
    out
}

/// `(|a⟩^⊗N + |b⟩^⊗N)/√2`.
pub(crate) fn ghz(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let pa = power(a, n);
    let pb = power(b, n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    pa.iter().zip(&pb).map(|(x, y)| (x + y) * s).collect()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Applies a 2×2 spin gate to particle `k` of an `n`-particle state with local dimension `d`.
pub(crate) fn apply_spin_gate(state: &mut [Complex64], n: usize, d: usize, k: usize, gate: [[Complex64; 2]; 2]) {
    let fock = d / 2;
    let after = d.pow((n - 1 - k) as u32);
    let before = d.pow(k as u32);
    for hi in 0..before {
        for m in 0..fock {
            for lo in 0..after {
                let iu = (hi * d + m) * after + lo;
                let id = (hi * d + fock + m) * after + lo;
                let (u, dn) = (state[iu], state[id]);
                state[iu] = gate[0][0] * u + gate[0][1] * dn;
                state[id] = gate[1][0] * u + gate[1][1] * dn;
            }
        }
    }
}

/// Number of particles in the spin-down half of their local space, for basis index `idx`.
pub(crate) fn down_count(mut idx: usize, n: usize, d: usize) -> usize {
    let mut count = 0;
    for _ in 0..n {
        if idx % d >= d / 2 {
            count += 1;
        }
        idx /= d;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SpinBranch;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn capacity_guard() {
        assert!(matches!(check_capacity(5, 4), Err(Error::Capacity(_))));
        assert!(matches!(check_capacity(2, 9), Err(Error::Capacity(_))));
        assert!(check_capacity(4, 8).is_ok());
    }

    #[test]
    fn spin_gate_acts_on_selected_particle() {
        // two particles, n_max = 1, d = 4; start in |up,0⟩|up,1⟩
        let d = 4;
        let mut state = vec![c(0.0); d * d];
        state[0 * d + 1] = c(1.0);
        let flip = [[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
        apply_spin_gate(&mut state, 2, d, 1, flip);
        // second particle now |down,1⟩: local index 2 + 1 = 3
        assert_eq!(state[3], c(1.0));
        assert_eq!(down_count(3, 2, d), 1);
        apply_spin_gate(&mut state, 2, d, 0, flip);
        assert_eq!(state[2 * d + 3], c(1.0));
        assert_eq!(down_count(2 * d + 3, 2, d), 2);
    }

    #[test]
    fn ghz_is_normalized() {
        let s = BranchState {
            branch: SpinBranch::Up,
            amplitude: Complex64::new(0.3, 0.2),
            phase: 0.4,
            evolution_time: 1.0,
        };
        let a = local(0, &s, 6);
        let b = local(1, &s, 6);
        let g = ghz(&a, &b, 3);
        assert!((inner(&g, &g).re - 1.0).abs() < 1e-14);
    }
}
