//! Two-level Lindblad dynamics of the impurity qubit.
//!
//! `dρ/dt = i[ρ, H] + Γ(σρσ† − ½{σ†σ, ρ})` with `H = ω_A |1⟩⟨1|` and
//! `σ = |0⟩⟨1|`, integrated with classical fourth-order Runge-Kutta.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::impurity::{ProbeConfig, ProbeSolver};
use crate::num::{lit, to_f64, Real};

/// Largest allowed `dt · max(ω_A, Γ)`.
pub const STEP_LIMIT: f64 = 0.1;

/// Density matrix in the `{|0⟩, |1⟩}` basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState<T> {
    rho: [[Complex<T>; 2]; 2],
}

impl<T: Real> QubitState<T> {
    /// Checks hermiticity, unit trace and positivity to `1e-12`.
    pub fn new(rho: [[Complex<T>; 2]; 2]) -> Result<Self> {
        let s = Self { rho };
        let tol: T = lit(1e-12);
        let herm = (rho[0][1] - rho[1][0].conj()).norm() <= tol
            && rho[0][0].im.abs() <= tol
            && rho[1][1].im.abs() <= tol;
        if !herm {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        if (s.trace() - T::one()).abs() > tol {
            return Err(Error::InvalidInput(format!("trace is {}, expected 1", to_f64(s.trace()))));
        }
        if s.min_eigenvalue() < -tol {
            return Err(Error::InvalidInput("density matrix has a negative eigenvalue".into()));
        }
        Ok(s)
    }

    pub fn ground() -> Self {
        Self::from_populations(T::one(), Complex::new(T::zero(), T::zero()))
    }

    pub fn excited() -> Self {
        Self::from_populations(T::zero(), Complex::new(T::zero(), T::zero()))
    }

    /// Pure state `a|0⟩ + b|1⟩`, normalised.
    pub fn pure(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::InvalidInput("state vector must be non-zero".into()));
        }
        let (a, b) = (a / n, b / n);
        Ok(Self {
            rho: [[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]],
        })
    }

    fn from_populations(p0: T, rho01: Complex<T>) -> Self {
        let zero = T::zero();
        Self {
            rho: [
                [Complex::new(p0, zero), rho01],
                [rho01.conj(), Complex::new(T::one() - p0, zero)],
            ],
        }
    }

    pub fn matrix(&self) -> [[Complex<T>; 2]; 2] {
        self.rho
    }

    /// `p₁ = ⟨1|ρ|1⟩`.
    pub fn excited_population(&self) -> T {
        self.rho[1][1].re
    }

    /// `⟨0|ρ|1⟩`.
    pub fn coherence(&self) -> Complex<T> {
        self.rho[0][1]
    }

    pub fn trace(&self) -> T {
        self.rho[0][0].re + self.rho[1][1].re
    }

    pub fn min_eigenvalue(&self) -> T {
        let a = self.rho[0][0].re;
        let d = self.rho[1][1].re;
        let half: T = lit(0.5);
        let disc = ((a - d) * (a - d) * lit(0.25) + self.rho[0][1].norm_sqr()).sqrt();
        (a + d) * half - disc
    }

    /// Closed-form state after time `t`.
    pub fn evolve_exact(&self, omega_a: T, gamma: T, t: T) -> Self {
        let decay = (-gamma * t).exp();
        let p1 = self.excited_population() * decay;
        let phase = Complex::new(-gamma * t * lit(0.5), omega_a * t).exp();
        Self::from_populations(T::one() - p1, self.coherence() * phase)
    }
}

fn rhs<T: Real>(rho: &[[Complex<T>; 2]; 2], omega_a: T, gamma: T) -> [[Complex<T>; 2]; 2] {
    let i = Complex::new(T::zero(), T::one());
    let half: T = lit(0.5);
    let p1 = rho[1][1];
    let c = rho[0][1];
    let dc = c * (i * omega_a - Complex::new(gamma * half, T::zero()));
    [[p1 * gamma, dc], [dc.conj(), -p1 * gamma]]
}

/// One Runge-Kutta step of length `dt`.
pub fn lindblad_step<T: Real>(state: &QubitState<T>, omega_a: T, gamma: T, dt: T) -> Result<QubitState<T>> {
    let product = dt * omega_a.abs().max(gamma.abs());
    if !(product < lit(STEP_LIMIT)) {
        return Err(Error::StepTooLarge {
            product: to_f64(product),
            limit: STEP_LIMIT,
        });
    }
    let add = |a: &[[Complex<T>; 2]; 2], b: &[[Complex<T>; 2]; 2], h: T| {
        let mut out = *a;
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = a[r][c] + b[r][c] * h;
            }
        }
        out
    };
    let y = &state.rho;
    let half = dt * lit(0.5);
    let k1 = rhs(y, omega_a, gamma);
    let k2 = rhs(&add(y, &k1, half), omega_a, gamma);
    let k3 = rhs(&add(y, &k2, half), omega_a, gamma);
    let k4 = rhs(&add(y, &k3, dt), omega_a, gamma);
    let sixth = dt / lit(6.0);
    let two: T = lit(2.0);
    let mut out = *y;
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = y[r][c] + (k1[r][c] + k2[r][c] * two + k3[r][c] * two + k4[r][c]) * sixth;
        }
    }
    Ok(QubitState { rho: out })
}

/// Integrated `p₁(t)` next to the exact `e^{−Γt} p₁(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayTrajectory<T> {
    pub omega_a: T,
    pub gamma: T,
    pub times: Vec<T>,
    pub integrated: Vec<T>,
    pub exact: Vec<T>,
    pub max_deviation: T,
    /// Largest departure of trace from 1 or of the smallest eigenvalue below 0.
    pub max_unphysical: T,
}

impl<T: Real> DecayTrajectory<T> {
    /// Decay rate and amplitude from a least-squares fit of `ln p₁` against `t`.
    pub fn fit(&self) -> Result<(T, T)> {
        fit_exponential(&self.times, &self.integrated)
    }

    /// `ln 2 / Γ` from the fitted rate.
    pub fn half_life(&self) -> Result<T> {
        Ok(T::LN_2() / self.fit()?.0)
    }
}

/// Least-squares fit of `ln y = ln A − Γ t`; returns `(Γ, A)`.
pub fn fit_exponential<T: Real>(times: &[T], values: &[T]) -> Result<(T, T)> {
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(values)
        .filter(|(_, &y)| y > T::zero())
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidInput("need at least two positive samples to fit".into()));
    }
    let n: T = lit(pts.len() as f64);
    let mt = pts.iter().fold(T::zero(), |s, p| s + p.0) / n;
    let my = pts.iter().fold(T::zero(), |s, p| s + p.1) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(t, y) in &pts {
        sxy = sxy + (t - mt) * (y - my);
        sxx = sxx + (t - mt) * (t - mt);
    }
    if !(sxx > T::zero()) {
        return Err(Error::InvalidInput("fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    Ok((-slope, (my - slope * mt).exp()))
}

/// Integrates from `t = 0` through the sorted, non-negative `times`, with
/// substeps of at most `0.02 / max(ω_A, Γ)`.
pub fn decay_trajectory_for_rate<T: Real>(
    initial: &QubitState<T>,
    omega_a: T,
    gamma: T,
    times: &[T],
) -> Result<DecayTrajectory<T>> {
    if times.iter().any(|t| !(*t >= T::zero()) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be finite, non-negative and sorted".into()));
    }
    if !(gamma >= T::zero()) || !omega_a.is_finite() {
        return Err(Error::InvalidInput("rates must be finite with gamma >= 0".into()));
    }
    let scale = omega_a.abs().max(gamma);
    let max_dt = if scale > T::zero() { lit::<T>(0.02) / scale } else { T::infinity() };
    let p0 = initial.excited_population();
    let mut state = *initial;
    let mut now = T::zero();
    let mut out = DecayTrajectory {
        omega_a,
        gamma,
        times: times.to_vec(),
        integrated: Vec::with_capacity(times.len()),
        exact: Vec::with_capacity(times.len()),
        max_deviation: T::zero(),
        max_unphysical: T::zero(),
    };
    for &t in times {
        let span = t - now;
        if span > T::zero() {
            let steps = if max_dt.is_finite() { (span / max_dt).ceil().max(T::one()) } else { T::one() };
            let dt = span / steps;
            let n = to_f64(steps) as usize;
            for _ in 0..n {
                state = lindblad_step(&state, omega_a, gamma, dt)?;
            }
            now = t;
        }
        let p = state.excited_population();
        let e = p0 * (-gamma * t).exp();
        out.max_deviation = out.max_deviation.max((p - e).abs());
        out.max_unphysical = out
            .max_unphysical
            .max((state.trace() - T::one()).abs())
            .max(-state.min_eigenvalue());
        out.integrated.push(p);
        out.exact.push(e);
    }
    Ok(out)
}

/// Trajectory from the excited state with `Γ` computed for `probe`.
pub fn decay_trajectory<T: Real>(
    solver: &ProbeSolver<T>,
    probe: &ProbeConfig<T>,
    times: &[T],
) -> Result<DecayTrajectory<T>> {
    let rate = solver.decay_rate(probe)?;
    decay_trajectory_for_rate(&QubitState::excited(), probe.omega_a(), rate.gamma, times)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_guard() {
        let s = QubitState::<f64>::excited();
        assert!(matches!(lindblad_step(&s, 1.0, 0.0, 0.2), Err(Error::StepTooLarge { .. })));
        assert!(lindblad_step(&s, 1.0, 0.0, 0.05).is_ok());
    }

    #[test]
    fn unitary_limit_keeps_populations() {
        let s = QubitState::<f64>::pure(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)).unwrap();
        let mut x = s;
        for _ in 0..1000 {
            x = lindblad_step(&x, 2.0, 0.0, 0.01).unwrap();
        }
        assert!((x.excited_population() - 0.5).abs() < 1e-14);
        let expected = s.coherence() * Complex::new(0.0, 20.0).exp();
        assert!((x.coherence() - expected).norm() < 1e-7);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let z = Complex::new(0.0, 0.0);
        let one = Complex::new(1.0, 0.0);
        assert!(QubitState::new([[one, z], [z, z]]).is_ok());
        assert!(QubitState::new([[one, z], [z, one]]).is_err());
        assert!(QubitState::new([[Complex::new(1.5, 0.0), z], [z, Complex::new(-0.5, 0.0)]]).is_err());
        assert!(QubitState::new([[Complex::new(0.5, 0.0), Complex::new(0.1, 0.0)], [z, Complex::new(0.5, 0.0)]]).is_err());
    }

    #[test]
    fn fit_recovers_rate() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.7 * (-1.3 * t).exp()).collect();
        let (g, a) = fit_exponential(&t, &y).unwrap();
        assert!((g - 1.3).abs() < 1e-12 && (a - 0.7).abs() < 1e-12);
    }
}
