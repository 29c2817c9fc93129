//! Trapped impurity as a probe: form factors, spectral densities, decay rates.
//!
//! The impurity has mass `M = (M/m)·m` and sits in an isotropic harmonic
//! trap of frequency `ω_A`, so its ground-state width is `ℓ = 1/√(M ω_A)`.
//! Its contact coupling to the gas has strength `κ` (in `E_F/k_F³`).

use num_complex::Complex;

use crate::dsf::{dsf, Beta, ModeSolver};
use crate::eos::{CrossoverPoint, GasUnits};
use crate::error::{Error, Result};
use crate::num::{lit, sinc, to_f64, Real};
use crate::quad::{adaptive, clean_breaks, AdaptiveSettings};
use crate::susceptibility::{ResponseSolver, SusceptibilitySettings};

/// `⁴⁰K` in `⁶Li`.
pub const DEFAULT_MASS_RATIO: f64 = 40.0 / 6.0;
pub const DEFAULT_KAPPA: f64 = 0.18;

/// Impurity parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig<T> {
    mass_ratio: T,
    kappa: T,
    omega_a: T,
    beta: Beta<T>,
}

impl<T: Real> ProbeConfig<T> {
    pub fn new(mass_ratio: T, kappa: T, omega_a: T, beta: Beta<T>) -> Result<Self> {
        for (name, v) in [("mass ratio", mass_ratio), ("kappa", kappa), ("trap frequency", omega_a)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {}", to_f64(v))));
            }
        }
        if let Beta::Finite(b) = beta {
            if !(b > T::zero()) || !b.is_finite() {
                return Err(Error::InvalidInput("beta must be positive".into()));
            }
        }
        Ok(Self {
            mass_ratio,
            kappa,
            omega_a,
            beta,
        })
    }

    /// Zero-temperature probe with the default mass ratio and coupling.
    pub fn default_at(omega_a: T) -> Result<Self> {
        Self::new(lit(DEFAULT_MASS_RATIO), lit(DEFAULT_KAPPA), omega_a, Beta::Infinite)
    }

    /// Same impurity retuned to another trap frequency.
    pub fn with_omega_a(&self, omega_a: T) -> Result<Self> {
        Self::new(self.mass_ratio, self.kappa, omega_a, self.beta)
    }

    pub fn mass_ratio(&self) -> T {
        self.mass_ratio
    }
    pub fn kappa(&self) -> T {
        self.kappa
    }
    pub fn omega_a(&self) -> T {
        self.omega_a
    }
    pub fn beta(&self) -> Beta<T> {
        self.beta
    }

    /// Impurity mass `M` in units where the fermion mass is `1/2`.
    pub fn mass(&self) -> T {
        self.mass_ratio * GasUnits::mass::<T>()
    }

    /// Oscillator length `ℓ = 1/√(M ω_A)` in `1/k_F`.
    pub fn ell(&self) -> T {
        T::one() / (self.mass() * self.omega_a).sqrt()
    }

    /// True when `βΘ₀ < 10`, outside the regime where thermal quasiparticles
    /// can be neglected.
    pub fn too_hot(&self, point: &CrossoverPoint<T>) -> bool {
        match self.beta {
            Beta::Infinite => false,
            Beta::Finite(b) => b * point.theta0() < lit(10.0),
        }
    }
}

/// Trap frequency giving oscillator length `ell` for the given mass ratio.
pub fn trap_frequency_for_length<T: Real>(mass_ratio: T, ell: T) -> T {
    T::one() / (mass_ratio * GasUnits::mass::<T>() * ell * ell)
}

/// `Φ(q) = (1/6) ℓ²q² e^{−ℓ²q²/2}`.
pub fn form_factor<T: Real>(q: T, ell: T) -> T {
    let x = ell * ell * q * q;
    x / lit(6.0) * (-x * lit(0.5)).exp()
}

/// Matrix element `κ ⟨γ| e^{iq·x} |δ⟩` between oscillator states, with index
/// 0 for the ground state and 1, 2, 3 for one quantum along x, y, z.
pub fn coupling_constant<T: Real>(q: [T; 3], ell: T, kappa: T, gamma: usize, delta: usize) -> Result<Complex<T>> {
    if gamma > 3 || delta > 3 {
        return Err(Error::InvalidInput(format!("level indices must be 0..=3, got ({gamma}, {delta})")));
    }
    let q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
    let envelope = kappa * (-ell * ell * q2 * lit(0.25)).exp();
    let half: T = lit(0.5);
    let value = match (gamma, delta) {
        (0, 0) => Complex::new(envelope, T::zero()),
        (0, a) | (a, 0) => Complex::new(T::zero(), envelope * ell * q[a - 1] * half.sqrt()),
        (a, b) if a == b => {
            let qa = q[a - 1];
            Complex::new(envelope * (T::one() - ell * ell * qa * qa * half), T::zero())
        }
        (a, b) => {
            let (i, j) = (a.min(b) - 1, a.max(b) - 1);
            Complex::new(-envelope * half * ell * ell * q[i] * q[j], T::zero())
        }
    };
    Ok(value)
}

/// Position and excitation direction of one impurity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpuritySite<T> {
    position: [T; 3],
    dipole: [T; 3],
}

impl<T: Real> ImpuritySite<T> {
    /// The dipole direction is normalised; a zero vector is rejected.
    pub fn new(position: [T; 3], dipole: [T; 3]) -> Result<Self> {
        let n = norm(dipole);
        if !(n > T::zero()) || !n.is_finite() || position.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("dipole direction must be a non-zero finite vector".into()));
        }
        Ok(Self {
            position,
            dipole: dipole.map(|d| d / n),
        })
    }

    pub fn position(&self) -> [T; 3] {
        self.position
    }

    pub fn dipole(&self) -> [T; 3] {
        self.dipole
    }
}

fn norm<T: Real>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Distance between two sites.
pub fn separation<T: Real>(m: &ImpuritySite<T>, n: &ImpuritySite<T>) -> T {
    let d = [0, 1, 2].map(|i| m.position[i] - n.position[i]);
    norm(d)
}

/// True when the far-field form `x_mn ≫ ℓ` is trustworthy (`x_mn ≥ 5ℓ`).
pub fn far_field_valid<T: Real>(m: &ImpuritySite<T>, n: &ImpuritySite<T>, ell: T) -> bool {
    let x = separation(m, n);
    x == T::zero() || x >= ell * lit(5.0)
}

/// Far-field cross form factor `(1/2)ℓ²q² e^{−ℓ²q²/2} sinc(q x) (d̂_m·x̂)(d̂_n·x̂)`,
/// reducing to [`form_factor`] for coincident sites.
pub fn far_field_cross_form_factor<T: Real>(q: T, m: &ImpuritySite<T>, n: &ImpuritySite<T>, ell: T) -> T {
    let sep = [0, 1, 2].map(|i| m.position[i] - n.position[i]);
    let x = norm(sep);
    if x == T::zero() {
        return form_factor(q, ell);
    }
    let xhat = sep.map(|s| s / x);
    let y = ell * ell * q * q;
    y * lit(0.5) * (-y * lit(0.5)).exp() * sinc(q * x) * dot(m.dipole, xhat) * dot(n.dipole, xhat)
}

/// Spherical Bessel functions `j1(y)/y` and `j2(y)`.
fn bessel_j1_over_y_and_j2<T: Real>(y: T) -> (T, T) {
    let y2 = y * y;
    if y.abs() < lit(0.1) {
        let j1y = (T::one() - y2 / lit(10.0) * (T::one() - y2 / lit(28.0))) / lit(3.0);
        let j2 = y2 / lit(15.0) * (T::one() - y2 / lit(14.0) * (T::one() - y2 / lit(36.0)));
        return (j1y, j2);
    }
    let (sn, cs) = (y.sin(), y.cos());
    let j1 = sn / y2 - cs / y;
    let three: T = lit(3.0);
    let j2 = (three / y2 - T::one()) * sn / y - three * cs / y2;
    (j1 / y, j2)
}

/// Exact angular average of `λ^(a0)_m λ^(a0)*_n / κ²` for dipoles `d̂_m`, `d̂_n`:
/// `(1/2)ℓ²q² e^{−ℓ²q²/2} [ (j1(qx)/qx) d̂_m·d̂_n − j2(qx) (d̂_m·x̂)(d̂_n·x̂) ]`.
///
/// Tends to [`far_field_cross_form_factor`] for `qx ≫ 1`; the `j1` term is the
/// leading correction and does not vanish for dipoles perpendicular to `x̂`.
pub fn cross_form_factor<T: Real>(q: T, m: &ImpuritySite<T>, n: &ImpuritySite<T>, ell: T) -> T {
    let sep = [0, 1, 2].map(|i| m.position[i] - n.position[i]);
    let x = norm(sep);
    let y = ell * ell * q * q;
    let envelope = y * lit(0.5) * (-y * lit(0.5)).exp();
    if x == T::zero() {
        return envelope * dot(m.dipole, n.dipole) / lit(3.0);
    }
    let xhat = sep.map(|s| s / x);
    let (j1y, j2) = bessel_j1_over_y_and_j2(q * x);
    envelope * (j1y * dot(m.dipole, n.dipole) - j2 * dot(m.dipole, xhat) * dot(n.dipole, xhat))
}

/// Which cross form factor to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossForm {
    FarField,
    Exact,
}

/// Decay rate with its Markov-approximation diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRate<T> {
    pub omega_a: T,
    pub gamma: T,
    pub ell: T,
    /// `Γ ℓ / c`.
    pub markov_length_ratio: T,
    /// `Γ / ω_A`.
    pub markov_frequency_ratio: T,
}

impl<T: Real> DecayRate<T> {
    fn new(probe: &ProbeConfig<T>, point: &CrossoverPoint<T>, gamma: T) -> Self {
        let ell = probe.ell();
        Self {
            omega_a: probe.omega_a(),
            gamma,
            ell,
            markov_length_ratio: gamma * ell / point.c(),
            markov_frequency_ratio: gamma / probe.omega_a(),
        }
    }

    /// Both Markov ratios below `limit`.
    pub fn is_markovian(&self, limit: T) -> bool {
        self.markov_length_ratio < limit && self.markov_frequency_ratio < limit
    }
}

/// Angular average of a squared coupling, used by the delta-function route.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingChannel {
    /// `|λ^(a0)|²`: the qubit transition, equal to `κ²Φ(q)`.
    Transition,
    /// `|λ^(00)|²`: dephasing of the ground state.
    Dephasing,
    /// `|λ^(ab)|²` with `a ≠ b`: transfer between excited sublevels.
    Sublevel,
}

impl CouplingChannel {
    pub fn angular_average<T: Real>(&self, q: T, ell: T, kappa: T) -> T {
        let y = ell * ell * q * q;
        let k2 = kappa * kappa;
        match self {
            CouplingChannel::Transition => k2 * form_factor(q, ell),
            CouplingChannel::Dephasing => k2 * (-y * lit(0.5)).exp(),
            CouplingChannel::Sublevel => k2 * y * y / lit(60.0) * (-y * lit(0.5)).exp(),
        }
    }
}

/// Spectral densities of one impurity (or a pair) in one superfluid state.
#[derive(Clone, Copy, Debug)]
pub struct ProbeSolver<T> {
    response: ResponseSolver<T>,
    modes: ModeSolver<T>,
    epsilon: T,
    rel_tol: T,
}

impl<T: Real> ProbeSolver<T> {
    pub fn new(point: CrossoverPoint<T>, epsilon: T) -> Self {
        Self::with_settings(point, epsilon, SusceptibilitySettings::sweep(), lit(1e-5))
    }

    /// `rel_tol` controls the momentum integral; `settings` the susceptibility.
    pub fn with_settings(
        point: CrossoverPoint<T>,
        epsilon: T,
        settings: SusceptibilitySettings<T>,
        rel_tol: T,
    ) -> Self {
        Self {
            response: ResponseSolver::with_settings(point, settings),
            modes: ModeSolver::new(point),
            epsilon,
            rel_tol,
        }
    }

    pub fn point(&self) -> &CrossoverPoint<T> {
        self.response.point()
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn modes(&self) -> &ModeSolver<T> {
        &self.modes
    }

    pub fn response(&self) -> &ResponseSolver<T> {
        &self.response
    }

    /// `(1/2π²) ∫ dq q² w(q) S(q, ν)` over `[0, max(6/ℓ, 4)]`.
    fn q_integral<W: Fn(T) -> T>(&self, nu: T, ell: T, beta: Beta<T>, weight: W) -> Result<T> {
        let point = *self.point();
        let q_max = (lit::<T>(6.0) / ell).max(lit(4.0));
        let lower = q_max * lit(1e-6);
        let mut interior = vec![T::one() / ell, lit::<T>(2.0).sqrt() / ell];
        if point.mu() > T::zero() {
            interior.push(lit::<T>(2.0) * point.mu().sqrt());
        }
        let abs_nu = nu.abs();
        // Edges of the pair continuum at this frequency.
        if abs_nu >= point.theta0() {
            let n = 64;
            let mut prev = (lower, point.pair_threshold(lower) < abs_nu);
            for i in 1..=n {
                let q = lower + (q_max - lower) * lit::<T>(i as f64) / lit::<T>(n as f64);
                let inside = point.pair_threshold(q) < abs_nu;
                if inside != prev.1 {
                    if let Some(r) = crate::roots::bisect(
                        |x| point.pair_threshold(x) - abs_nu,
                        prev.0,
                        q,
                        q_max * lit(1e-12),
                    ) {
                        interior.push(r);
                    }
                }
                prev = (q, inside);
            }
        }
        // Collective ridge.
        match self.modes.mode_at_frequency(abs_nu) {
            Ok(m) => {
                let w = self.epsilon / m.group_velocity.abs().max(lit(1e-6));
                for k in [-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0] {
                    interior.push(m.q_nu + w * lit(k));
                }
            }
            Err(Error::NoModeAtFrequency { .. }) => {}
            Err(e) => return Err(e),
        }
        let breaks = clean_breaks(lower, q_max, interior);
        let settings = AdaptiveSettings {
            rel_tol: self.rel_tol,
            abs_tol: T::min_positive_value(),
            max_panels: 300,
        };
        let mut failure = None;
        let est = adaptive(
            |q: T| {
                if failure.is_some() {
                    return T::zero();
                }
                match dsf(&self.response, q, nu, beta, self.epsilon) {
                    Ok(s) => q * q * weight(q) * s.value,
                    Err(e) => {
                        failure = Some(e);
                        T::zero()
                    }
                }
            },
            &breaks,
            false,
            &settings,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if !est.converged {
            return Err(Error::QuadratureNotConverged {
                context: format!("spectral density at nu = {}", to_f64(nu)),
                estimate: to_f64(est.error / est.value.abs()),
            });
        }
        Ok(est.value / (lit::<T>(2.0) * T::PI() * T::PI()))
    }

    /// `I(ν) = (κ²/2π²) ∫ dq q² Φ(q) S(q, ν)` from the broadened spectrum.
    pub fn spectral_density(&self, nu: T, probe: &ProbeConfig<T>) -> Result<T> {
        let ell = probe.ell();
        let k2 = probe.kappa() * probe.kappa();
        self.q_integral(nu, ell, probe.beta(), |q| k2 * form_factor(q, ell))
    }

    /// Cross spectral density `I_mn(ν)`.
    pub fn cross_spectral_density(
        &self,
        nu: T,
        m: &ImpuritySite<T>,
        n: &ImpuritySite<T>,
        probe: &ProbeConfig<T>,
        form: CrossForm,
    ) -> Result<T> {
        let ell = probe.ell();
        let k2 = probe.kappa() * probe.kappa();
        match form {
            CrossForm::FarField => {
                if separation(m, n) == T::zero() {
                    return self.spectral_density(nu, probe);
                }
                let sep = [0, 1, 2].map(|i| m.position[i] - n.position[i]);
                if dot(m.dipole, sep) == T::zero() || dot(n.dipole, sep) == T::zero() {
                    return Ok(T::zero());
                }
                self.q_integral(nu, ell, probe.beta(), |q| k2 * far_field_cross_form_factor(q, m, n, ell))
            }
            CrossForm::Exact => {
                self.q_integral(nu, ell, probe.beta(), |q| k2 * cross_form_factor(q, m, n, ell))
            }
        }
    }

    /// Spectral density from the undamped collective mode alone:
    /// `(1/2π²) ⟨|λ|²⟩(q_ν) q_ν² C_ν (1 + n(ν))`.
    pub fn delta_route_density(&self, nu: T, probe: &ProbeConfig<T>, channel: CouplingChannel) -> Result<T> {
        let m = self.modes.mode_at_frequency(nu)?;
        let g = channel.angular_average(m.q_nu, probe.ell(), probe.kappa());
        let two_pi2 = lit::<T>(2.0) * T::PI() * T::PI();
        Ok(g * m.q_nu * m.q_nu * m.c_nu / two_pi2 * (T::one() + probe.beta().occupation(nu)))
    }

    /// `Γ = 2π I(ω_A)`.
    pub fn decay_rate(&self, probe: &ProbeConfig<T>) -> Result<DecayRate<T>> {
        let i = self.spectral_density(probe.omega_a(), probe)?;
        Ok(DecayRate::new(probe, self.point(), lit::<T>(2.0) * T::PI() * i))
    }

    /// Decay rate with only the undamped collective mode contributing.
    pub fn collective_decay_rate(&self, probe: &ProbeConfig<T>) -> Result<DecayRate<T>> {
        let i = self.delta_route_density(probe.omega_a(), probe, CouplingChannel::Transition)?;
        Ok(DecayRate::new(probe, self.point(), lit::<T>(2.0) * T::PI() * i))
    }
}

/// Long-wavelength coupling `(α, ω_c)` with `α = κ²ρ₀/(24π² m ℓ² c³)` and `ω_c = c/ℓ`.
pub fn super_ohmic_parameters<T: Real>(probe: &ProbeConfig<T>, point: &CrossoverPoint<T>) -> (T, T) {
    let ell = probe.ell();
    let c = point.c();
    let alpha = probe.kappa() * probe.kappa() * GasUnits::density::<T>()
        / (lit::<T>(24.0) * T::PI() * T::PI() * GasUnits::mass::<T>() * ell * ell * c * c * c);
    (alpha, c / ell)
}

/// Low-frequency spectral density `α ω_c⁻⁴ ν⁵ e^{−ν²/2ω_c²}`.
pub fn super_ohmic<T: Real>(nu: T, probe: &ProbeConfig<T>, point: &CrossoverPoint<T>) -> T {
    let (alpha, wc) = super_ohmic_parameters(probe, point);
    let x = nu / wc;
    alpha * wc * x.powi(5) * (-x * x * lit(0.5)).exp()
}

/// Ground-state dephasing rate in the phonon regime,
/// `κ²ρ₀ ν³ coth(βν/2) / (2π m c⁵)`; it vanishes as `ν → 0`.
pub fn dephasing_rate<T: Real>(nu: T, probe: &ProbeConfig<T>, point: &CrossoverPoint<T>) -> T {
    let c = point.c();
    probe.kappa() * probe.kappa() * GasUnits::density::<T>() * nu.powi(3) * probe.beta().coth_half(nu)
        / (lit::<T>(2.0) * T::PI() * GasUnits::mass::<T>() * c.powi(5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_factor_closed_form_values() {
        assert_eq!(form_factor(0.0_f64, 1.3), 0.0);
        let ell = 0.7_f64;
        let peak = form_factor(2f64.sqrt() / ell, ell);
        assert!((peak - (-1f64).exp() / 3.0).abs() < 1e-15);
        assert!((form_factor(1.0 / ell, ell) - (-0.5f64).exp() / 6.0).abs() < 1e-15);
        assert!(form_factor(1.3 / ell, ell) < peak && form_factor(1.5 / ell, ell) < peak);
    }

    #[test]
    fn ell_is_derived_from_trap_frequency() {
        let p = ProbeConfig::new(40.0 / 6.0, 0.18, 0.5, Beta::Infinite).unwrap();
        let m = 40.0 / 6.0 * 0.5;
        assert!((p.ell() - 1.0 / (m * 0.5_f64).sqrt()).abs() < 1e-15);
        let w = trap_frequency_for_length(40.0 / 6.0, p.ell());
        assert!((w - 0.5).abs() < 1e-14);
        assert!(ProbeConfig::new(1.0, -0.1, 0.5, Beta::Infinite).is_err());
        assert!(ProbeConfig::new(1.0, 0.1, 0.0, Beta::Infinite).is_err());
    }

    #[test]
    fn coupling_constants_at_zero_momentum() {
        let z = [0.0_f64; 3];
        assert_eq!(coupling_constant(z, 1.0, 0.18, 0, 0).unwrap(), Complex::new(0.18, 0.0));
        assert_eq!(coupling_constant(z, 1.0, 0.18, 2, 0).unwrap(), Complex::new(0.0, 0.0));
        assert_eq!(coupling_constant(z, 1.0, 0.18, 1, 1).unwrap(), Complex::new(0.18, 0.0));
        assert!(coupling_constant(z, 1.0, 0.18, 4, 0).is_err());
        let q = [0.3, -0.2, 0.5];
        for g in 0..4 {
            for d in 0..4 {
                assert_eq!(
                    coupling_constant(q, 0.8, 0.2, g, d).unwrap(),
                    coupling_constant(q, 0.8, 0.2, d, g).unwrap()
                );
            }
        }
    }

    #[test]
    fn cross_form_factor_geometry() {
        let a = ImpuritySite::new([0.0_f64; 3], [0.0, 0.0, 2.0]).unwrap();
        assert_eq!(a.dipole(), [0.0, 0.0, 1.0]);
        let b = ImpuritySite::new([10.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        for q in [0.1, 0.5, 1.7] {
            assert_eq!(far_field_cross_form_factor(q, &a, &b, 1.0), 0.0);
            assert_eq!(far_field_cross_form_factor(q, &a, &a, 1.0), form_factor(q, 1.0));
        }
        assert!(ImpuritySite::new([0.0_f64; 3], [0.0; 3]).is_err());
        assert!(far_field_valid(&a, &b, 1.0));
        let c = ImpuritySite::new([0.0, 0.0, 40.0], [0.0, 0.0, 1.0]).unwrap();
        for q in [0.5, 1.0, 2.0] {
            let exact = cross_form_factor(q, &a, &c, 0.5);
            let far = far_field_cross_form_factor(q, &a, &c, 0.5);
            assert!((exact - far).abs() < 0.06 * form_factor(q, 0.5));
        }
        assert!((cross_form_factor(0.7, &a, &a, 0.9) - form_factor(0.7, 0.9)).abs() < 1e-16);
        assert!(!far_field_valid(&a, &b, 3.0));
    }
}
