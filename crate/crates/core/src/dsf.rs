//! Dynamic structure factor, collective-mode dispersion and sum rules.

use crate::eos::{CrossoverPoint, GasUnits};
use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};
use crate::quad::{adaptive, clean_breaks, AdaptiveSettings};
use crate::roots::bisect;
use crate::susceptibility::{ChiBuildingBlocks, ResponseSolver, SusceptibilitySettings};

/// Inverse temperature in `1/E_F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta<T> {
    /// Zero temperature.
    Infinite,
    Finite(T),
}

impl<T: Real> Beta<T> {
    /// Bose occupation `1/(e^{βν} − 1)`; zero at `T = 0`.
    pub fn occupation(&self, nu: T) -> T {
        match *self {
            Beta::Infinite => T::zero(),
            Beta::Finite(b) => T::one() / (b * nu).exp_m1(),
        }
    }

    /// `coth(βν/2)`, equal to 1 at `T = 0`.
    pub fn coth_half(&self, nu: T) -> T {
        match *self {
            Beta::Infinite => T::one(),
            Beta::Finite(b) => T::one() / (b * nu * lit(0.5)).tanh(),
        }
    }
}

/// One value of `S(q, ν)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DsfSample<T> {
    pub q: T,
    pub nu: T,
    pub beta: Beta<T>,
    pub epsilon: T,
    pub value: T,
}

/// Fluctuation-dissipation prefactor applied to `Im χ`: `S = prefactor · Im χ`.
///
/// Returns `None` where the prefactor is singular (`ν = 0` at finite β).
pub fn fdt_prefactor<T: Real>(nu: T, beta: Beta<T>) -> Option<T> {
    let minus_inv_pi = -T::one() / T::PI();
    match beta {
        Beta::Infinite => Some(if nu > T::zero() { minus_inv_pi } else { T::zero() }),
        Beta::Finite(b) => {
            if nu == T::zero() {
                None
            } else {
                Some(minus_inv_pi / -(-b * nu).exp_m1())
            }
        }
    }
}

/// `S(q, ν) = −Im χ(q, ν + iε) / (π (1 − e^{−βν}))`.
pub fn dsf<T: Real>(solver: &ResponseSolver<T>, q: T, nu: T, beta: Beta<T>, epsilon: T) -> Result<DsfSample<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidInput("the structure factor needs epsilon > 0".into()));
    }
    let value = match fdt_prefactor(nu, beta) {
        Some(p) if p == T::zero() => T::zero(),
        Some(p) => p * solver.response(q, nu, epsilon)?.chi_total.im,
        None => {
            // ν → 0 at finite β: Im χ is odd in ν, so S → −(∂ν Im χ)/(πβ).
            let b = match beta {
                Beta::Finite(b) => b,
                Beta::Infinite => unreachable!(),
            };
            let h = epsilon * lit(1e-3);
            let im = solver.response(q, h, epsilon)?.chi_total.im;
            -im / (h * T::PI() * b)
        }
    };
    Ok(DsfSample {
        q,
        nu,
        beta,
        epsilon,
        value,
    })
}

/// Controls for the real-frequency mode analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionSettings<T> {
    /// Relative tolerance of the `ε = 0` momentum integrals.
    pub rel_tol: T,
    pub scan_points: usize,
    /// Bracket is `(edge, Θ_q − edge)`.
    pub edge: T,
    /// A root closer than this to `Θ_q` counts as merged.
    pub grazing: T,
    /// Relative step of the central differences.
    pub derivative_step: T,
}

impl<T: Real> Default for DispersionSettings<T> {
    fn default() -> Self {
        Self {
            rel_tol: lit(1e-10),
            scan_points: 64,
            edge: lit(1e-6),
            grazing: lit(1e-3),
            derivative_step: lit(1e-4),
        }
    }
}

/// Undamped collective excitation at one momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeData<T> {
    pub omega: T,
    /// Spectral weight `W_q = B/(2ω) |1 − ∂Ω/∂ν|⁻¹`.
    pub weight: T,
    /// `C_ν = B/(2ν) |∂Ω/∂q|⁻¹` at `ν = ω_q`.
    pub c_nu: T,
    /// `B(q, ω_q)`.
    pub pole_weight: T,
    pub d_omega_d_nu: T,
    pub d_omega_d_q: T,
}

impl<T: Real> ModeData<T> {
    /// Group velocity `dω_q/dq` from the implicit-function rule.
    pub fn group_velocity(&self) -> T {
        self.d_omega_d_q / (T::one() - self.d_omega_d_nu)
    }
}

/// Collective mode at one `q`, or `None` in `mode` when merged with the continuum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollectiveModePoint<T> {
    pub q: T,
    pub theta_q: T,
    pub mode: Option<ModeData<T>>,
}

impl<T: Real> CollectiveModePoint<T> {
    pub fn is_merged(&self) -> bool {
        self.mode.is_none()
    }

    pub fn omega(&self) -> Option<T> {
        self.mode.map(|m| m.omega)
    }
}

/// Mode data indexed by frequency instead of momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyModePoint<T> {
    pub nu: T,
    /// `q_ν` with `ω_{q_ν} = ν`.
    pub q_nu: T,
    pub c_nu: T,
    /// Phonon density of states `q_ν² / (2π² |dω/dq|)`.
    pub dos: T,
    /// `W_{q_ν}`.
    pub weight: T,
    pub group_velocity: T,
}

/// Real-frequency analysis of the collective pole.
#[derive(Clone, Copy, Debug)]
pub struct ModeSolver<T> {
    response: ResponseSolver<T>,
    settings: DispersionSettings<T>,
}

impl<T: Real> ModeSolver<T> {
    pub fn new(point: CrossoverPoint<T>) -> Self {
        Self::with_settings(point, DispersionSettings::default())
    }

    pub fn with_settings(point: CrossoverPoint<T>, settings: DispersionSettings<T>) -> Self {
        let response = ResponseSolver::with_settings(
            point,
            SusceptibilitySettings {
                rel_tol: settings.rel_tol,
                abs_tol: settings.rel_tol * lit(1e-5),
                max_panels: 400,
            },
        );
        Self { response, settings }
    }

    pub fn point(&self) -> &CrossoverPoint<T> {
        self.response.point()
    }

    pub fn settings(&self) -> &DispersionSettings<T> {
        &self.settings
    }

    fn blocks(&self, q: T, nu: T) -> Result<ChiBuildingBlocks<T>> {
        self.response.building_blocks(q, nu, T::zero())
    }

    /// `I11 I22 − ν² I12²` at real `ν < Θ_q`; positive below the mode.
    pub fn mode_determinant(&self, q: T, nu: T) -> Result<T> {
        Ok(self.blocks(q, nu)?.coll_denominator().re)
    }

    /// `Ω(q, ν) = √(I11 I22) / |I12|`.
    pub fn omega_function(&self, q: T, nu: T) -> Result<T> {
        let o2 = self.blocks(q, nu)?.omega_squared().re;
        Ok(o2.max(T::zero()).sqrt())
    }

    /// `B(q, ν)` at real `ν < Θ_q`.
    pub fn pole_weight(&self, q: T, nu: T) -> Result<T> {
        Ok(self.blocks(q, nu)?.pole_weight(self.point().delta()).re)
    }

    /// Central difference with one Richardson step; `cap` bounds the step.
    fn derivative<F: Fn(T) -> Result<T>>(&self, f: F, x: T, cap: T) -> Result<T> {
        let h = (self.settings.derivative_step * x.abs().max(lit(1e-3))).min(cap);
        let two: T = lit(2.0);
        let d1 = (f(x + h)? - f(x - h)?) / (two * h);
        let h2 = h * lit(0.5);
        let d2 = (f(x + h2)? - f(x - h2)?) / (two * h2);
        Ok((lit::<T>(4.0) * d2 - d1) / lit(3.0))
    }

    fn mode_data(&self, q: T, omega: T) -> Result<ModeData<T>> {
        let b = self.pole_weight(q, omega)?;
        // Keep every stencil point below the continuum edge.
        let p = self.point();
        let room = p.pair_threshold(q) - omega;
        let probe = q * lit(1e-3);
        let edge_slope = ((p.pair_threshold(q + probe) - p.pair_threshold(q - probe)) / (probe * lit(2.0)))
            .abs()
            .max(T::one());
        let d_nu = self.derivative(|v| self.omega_function(q, v), omega, room * lit(0.1))?;
        let d_q = self.derivative(|k| self.omega_function(k, omega), q, room * lit(0.1) / edge_slope)?;
        let two: T = lit(2.0);
        Ok(ModeData {
            omega,
            weight: b / (two * omega) / (T::one() - d_nu).abs(),
            c_nu: b / (two * omega) / d_q.abs(),
            pole_weight: b,
            d_omega_d_nu: d_nu,
            d_omega_d_q: d_q,
        })
    }

    /// Solves `ω_q = Ω(q, ω_q)` below the continuum.
    pub fn dispersion(&self, q: T) -> Result<CollectiveModePoint<T>> {
        if !(q > T::zero()) {
            return Err(Error::InvalidInput("q must be positive".into()));
        }
        let theta = self.point().pair_threshold(q);
        let lo = self.settings.edge;
        let hi = theta - self.settings.edge;
        let n = self.settings.scan_points.max(2);
        let mut grid = Vec::with_capacity(n);
        for i in 0..n {
            let nu = lo + (hi - lo) * lit::<T>(i as f64) / lit::<T>((n - 1) as f64);
            grid.push((nu, self.mode_determinant(q, nu)?));
        }
        let brackets: Vec<(T, T)> = grid
            .windows(2)
            .filter(|w| (w[0].1 > T::zero()) != (w[1].1 > T::zero()))
            .map(|w| (w[0].0, w[1].0))
            .collect();
        let merged = CollectiveModePoint {
            q,
            theta_q: theta,
            mode: None,
        };
        match brackets.len() {
            0 => Ok(merged),
            1 => {
                let (a, b) = brackets[0];
                let tol = theta * lit(1e-13);
                let mut failure = None;
                let root = bisect(
                    |nu| match self.mode_determinant(q, nu) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            T::nan()
                        }
                    },
                    a,
                    b,
                    tol,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                let omega = root.ok_or(Error::RootBracketFailure {
                    q: to_f64(q),
                    sign_changes: 1,
                })?;
                if theta - omega < self.settings.grazing {
                    return Ok(merged);
                }
                Ok(CollectiveModePoint {
                    q,
                    theta_q: theta,
                    mode: Some(self.mode_data(q, omega)?),
                })
            }
            k => Err(Error::RootBracketFailure {
                q: to_f64(q),
                sign_changes: k,
            }),
        }
    }

    /// Smallest `q` with `Θ_q ≥ ν`; zero when `ν < Θ₀`.
    fn threshold_momentum(&self, nu: T) -> T {
        let p = self.point();
        if nu < p.theta0() {
            return T::zero();
        }
        let mut hi = T::one();
        while p.pair_threshold(hi) <= nu {
            hi = hi * lit(2.0);
        }
        bisect(|q| p.pair_threshold(q) - nu, T::zero(), hi, lit(1e-12)).unwrap_or(hi)
    }

    /// Finds `q_ν` with `ω_{q_ν} = ν` and evaluates `C_ν`, `D(ν)` and `W_{q_ν}`.
    pub fn mode_at_frequency(&self, nu: T) -> Result<FrequencyModePoint<T>> {
        if !(nu > T::zero()) {
            return Err(Error::InvalidInput("frequency must be positive".into()));
        }
        let no_mode = || Error::NoModeAtFrequency { nu: to_f64(nu) };
        // For q < q_ν the mode lies below ν, so the determinant at (q, ν) is negative.
        let q_floor = self.threshold_momentum(nu);
        let det = |q: T| -> Result<T> {
            if self.point().pair_threshold(q) <= nu {
                return Err(no_mode());
            }
            self.mode_determinant(q, nu)
        };
        let guess = (nu / self.point().c()).max(q_floor * lit(1.0001) + lit(1e-9));
        let grow: T = lit(1.25);
        let q_max: T = lit(50.0);
        let (mut a, mut b);
        if det(guess)? < T::zero() {
            a = guess;
            b = guess * grow;
            while det(b)? < T::zero() {
                a = b;
                b = b * grow;
                if b > q_max {
                    return Err(no_mode());
                }
            }
        } else {
            b = guess;
            a = guess / grow;
            loop {
                if a <= q_floor {
                    // Roots closer to the continuum than `grazing` count as merged,
                    // so the bracket can stop where that margin is reached.
                    let p = self.point();
                    let margin = nu + self.settings.grazing;
                    if p.pair_threshold(b) <= margin {
                        return Err(no_mode());
                    }
                    a = bisect(|k| p.pair_threshold(k) - margin, q_floor, b, b * lit(1e-12)).unwrap_or(b);
                    if det(a)? >= T::zero() {
                        return Err(no_mode());
                    }
                    break;
                }
                if det(a)? < T::zero() {
                    break;
                }
                b = a;
                a = a / grow;
            }
        }
        let mut failure = None;
        let q_nu = bisect(
            |q| match det(q) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    T::nan()
                }
            },
            a,
            b,
            b * lit(1e-13),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let q_nu = q_nu.ok_or_else(no_mode)?;
        if self.point().pair_threshold(q_nu) - nu < self.settings.grazing {
            return Err(no_mode());
        }
        let m = self.mode_data(q_nu, nu)?;
        let vg = m.group_velocity();
        let two_pi2 = lit::<T>(2.0) * T::PI() * T::PI();
        Ok(FrequencyModePoint {
            nu,
            q_nu,
            c_nu: m.c_nu,
            dos: q_nu * q_nu / (two_pi2 * vg.abs()),
            weight: m.weight,
            group_velocity: vg,
        })
    }

    /// `C_ν` and `q_ν`.
    pub fn c_nu(&self, nu: T) -> Result<(T, T)> {
        let m = self.mode_at_frequency(nu)?;
        Ok((m.c_nu, m.q_nu))
    }

    /// Phonon density of states `D(ν)`.
    pub fn phonon_dos(&self, nu: T) -> Result<T> {
        Ok(self.mode_at_frequency(nu)?.dos)
    }
}

/// Long-wavelength weight `ρ₀ ε_q / (c q)`.
pub fn spectral_weight_smallq<T: Real>(q: T, point: &CrossoverPoint<T>) -> T {
    GasUnits::density::<T>() * GasUnits::free_energy(q) / (point.c() * q)
}

/// Which sum rule to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumRule {
    /// `∫ ν S dν = ρ₀ ε_q`.
    FSum,
    /// `∫ S/ν dν = ρ₀ / (2 m c²)`.
    Compressibility,
}

/// Outcome of a sum-rule integration at `T = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumRuleReport<T> {
    pub rule: SumRule,
    pub q: T,
    pub epsilon: T,
    pub integral: T,
    pub expected: T,
    /// `|integral − expected| / expected`.
    pub deviation: T,
    pub upper_limit: T,
    /// Power-law estimate of the part beyond `upper_limit`.
    pub tail_estimate: T,
}

/// Integrates the broadened zero-temperature spectrum over `ν ∈ (0, ν_max]`.
///
/// The compressibility moment carries an `O(ε²/ω_q²)` bias from the Lorentzian
/// shape, so `epsilon` should be well below `ω_q` for that rule.
pub fn sum_rule_check<T: Real>(
    solver: &ResponseSolver<T>,
    q: T,
    rule: SumRule,
    epsilon: T,
) -> Result<SumRuleReport<T>> {
    let point = *solver.point();
    let modes = ModeSolver::new(point);
    let omega = modes.dispersion(q)?.omega();
    let theta = point.pair_threshold(q);
    let free_edge = q * q + lit::<T>(2.0) * q;
    let upper = lit::<T>(10.0) * point.theta0().max(theta).max(free_edge);

    let moment = |nu: T, s: T| match rule {
        SumRule::FSum => nu * s,
        SumRule::Compressibility => s / nu,
    };
    let mut failure = None;
    let mut interior = vec![theta, point.theta0()];
    if let Some(w) = omega {
        for k in [-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0] {
            interior.push(w + epsilon * lit(k));
        }
    }
    let lower = epsilon * lit(1e-3);
    let breaks = clean_breaks(lower, upper, interior);
    let settings = AdaptiveSettings {
        rel_tol: lit(1e-5),
        abs_tol: T::min_positive_value(),
        max_panels: 200,
    };
    let est = adaptive(
        |nu: T| match dsf(solver, q, nu, Beta::Infinite, epsilon) {
            Ok(s) => moment(nu, s.value),
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
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
            context: format!("sum-rule integral at q = {}", to_f64(q)),
            estimate: to_f64(est.error / est.value.abs()),
        });
    }
    let s_top = dsf(solver, q, upper, Beta::Infinite, epsilon)?.value;
    let rho = GasUnits::density::<T>();
    let (expected, tail) = match rule {
        SumRule::FSum => (rho * GasUnits::free_energy(q), upper * upper * s_top),
        SumRule::Compressibility => {
            let m = GasUnits::mass::<T>();
            (rho / (lit::<T>(2.0) * m * point.c() * point.c()), s_top / lit(3.0))
        }
    };
    Ok(SumRuleReport {
        rule,
        q,
        epsilon,
        integral: est.value,
        expected,
        deviation: (est.value - expected).abs() / expected,
        upper_limit: upper,
        tail_estimate: tail,
    })
}
