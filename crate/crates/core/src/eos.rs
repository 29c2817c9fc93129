//! Zero-temperature mean-field equations of state at fixed density.
//!
//! Everything is expressed in Fermi units: `k_F = E_F = 1`, hence the fermion
//! mass is `m = 1/2`, the free dispersion is `ε_k = k²`, the Fermi velocity is
//! `v_F = 2` and the density is `ρ₀ = 1/(3π²)`. Sound speeds are therefore in
//! `E_F/k_F` (so `v_F/√3 = 2/√3`) and lengths in `1/k_F`.

use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};
use crate::quad::TanMappedRule;
use crate::roots::golden_min;

/// Unit convention marker: `k_F = 1`, `E_F = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GasUnits;

impl GasUnits {
    pub fn fermi_wavevector<T: Real>() -> T {
        T::one()
    }

    pub fn fermi_energy<T: Real>() -> T {
        T::one()
    }

    /// `m`, fixed by `E_F = k_F²/2m`.
    pub fn mass<T: Real>() -> T {
        lit(0.5)
    }

    /// `v_F = k_F/m`.
    pub fn fermi_velocity<T: Real>() -> T {
        lit(2.0)
    }

    /// `ρ₀ = k_F³/(3π²)`, both spin states.
    pub fn density<T: Real>() -> T {
        T::one() / (lit::<T>(3.0) * T::PI() * T::PI())
    }

    /// Free-particle energy `k²/2m`.
    pub fn free_energy<T: Real>(k: T) -> T {
        k * k / (lit::<T>(2.0) * Self::mass::<T>())
    }
}

/// `E_k = √(Δ² + (k²/2m − μ)²)`.
pub fn quasiparticle_energy<T: Real>(k: T, delta: T, mu: T) -> T {
    let xi = GasUnits::free_energy(k) - mu;
    delta.hypot(xi)
}

/// Minimum energy of a zero-momentum quasiparticle pair.
pub fn pair_gap<T: Real>(delta: T, mu: T) -> T {
    if mu >= T::zero() {
        lit::<T>(2.0) * delta
    } else {
        lit::<T>(2.0) * delta.hypot(mu)
    }
}

/// Threshold `Θ_q = min_k (E_{k+q/2} + E_{k−q/2})` of the pair continuum.
///
/// Uses a 64×64 grid over `(|k|, cos θ)` followed by coordinate-wise
/// golden-section refinement. On the plateau `q ≤ 2√(2mμ)` the two momenta can
/// both sit on the Fermi surface and the value is `2Δ` exactly.
pub fn pair_threshold<T: Real>(q: T, delta: T, mu: T) -> T {
    let q = q.abs();
    if q == T::zero() {
        return pair_gap(delta, mu);
    }
    let m = GasUnits::mass::<T>();
    if mu > T::zero() && q <= lit::<T>(2.0) * (lit::<T>(2.0) * m * mu).sqrt() {
        return lit::<T>(2.0) * delta;
    }
    let quarter_q2 = q * q * lit(0.25);
    let energy = |k: T, c: T| -> T {
        let kq = k * q * c;
        let plus = (k * k + quarter_q2 + kq).max(T::zero()).sqrt();
        let minus = (k * k + quarter_q2 - kq).max(T::zero()).sqrt();
        quasiparticle_energy(plus, delta, mu) + quasiparticle_energy(minus, delta, mu)
    };

    let k_max = lit::<T>(4.0).max(lit::<T>(2.0) * q);
    let n = 64usize;
    let dk = k_max / lit((n - 1) as f64);
    let dc = lit::<T>(2.0) / lit((n - 1) as f64);
    let mut best = (T::zero(), -T::one(), T::infinity());
    for i in 0..n {
        let k = dk * lit(i as f64);
        for j in 0..n {
            let c = -T::one() + dc * lit(j as f64);
            let v = energy(k, c);
            if v < best.2 {
                best = (k, c, v);
            }
        }
    }

    let (mut k, mut c, mut v) = best;
    let tol = lit::<T>(1e-13);
    let mut k_span = dk;
    let mut c_span = dc;
    for _ in 0..40 {
        let (nk, _) = golden_min(
            |x| energy(x, c),
            (k - k_span).max(T::zero()),
            (k + k_span).min(k_max),
            tol,
        );
        let (nc, nv) = golden_min(
            |y| energy(nk, y),
            (c - c_span).max(-T::one()),
            (c + c_span).min(T::one()),
            tol,
        );
        let improvement = v - nv;
        let moved = (nk - k).abs() + (nc - c).abs();
        if nv <= v {
            k = nk;
            c = nc;
            v = nv;
        }
        k_span = (k_span * lit(0.5)).max(moved * lit(2.0)).max(lit(1e-9));
        c_span = (c_span * lit(0.5)).max(moved * lit(2.0)).max(lit(1e-9));
        if improvement.abs() < lit(1e-15) && moved < lit(1e-12) {
            break;
        }
    }
    v
}

/// Momentum integrals entering the equations of state and the sound speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoIntegrals<T> {
    /// `(8π/m)·(1/V)Σ(1/2ε − 1/2E)`, equal to `1/k_F a_s` at a solution.
    pub gap: T,
    /// `(1/V)Σ(1 − ξ/E)`, equal to `ρ₀` at a solution.
    pub density: T,
    /// `J₂ = (1/V)Σ 1/E³`.
    pub j2: T,
    /// `J₄ = (1/V)Σ k²/E³`.
    pub j4: T,
}

impl<T: Real> ThermoIntegrals<T> {
    /// `J_ξ = J₄ − μ J₂` (with `2m = 1`).
    pub fn j_xi(&self, mu: T) -> T {
        self.j4 - mu * self.j2
    }
}

/// Quadrature and Newton controls for the equation-of-state solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EosSettings<T> {
    pub min_order: usize,
    pub max_order: usize,
    pub quad_rel_tol: T,
    pub newton_tol: T,
    pub max_iterations: usize,
    /// Largest step in `1/k_F a_s` taken during continuation.
    pub continuation_step: T,
}

impl<T: Real> Default for EosSettings<T> {
    fn default() -> Self {
        Self {
            min_order: 16,
            max_order: 2048,
            quad_rel_tol: lit(1e-10),
            newton_tol: lit(1e-9),
            max_iterations: 80,
            continuation_step: lit(0.1),
        }
    }
}

/// Solved thermodynamic state at one interaction strength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossoverPoint<T> {
    inv_kfa: T,
    delta: T,
    mu: T,
    c: T,
    theta0: T,
    zeta: T,
    j2: T,
    j4: T,
}

impl<T: Real> CrossoverPoint<T> {
    /// Builds a point from `(Δ, μ)`, computing the sound speed from the
    /// momentum integrals. `inv_kfa` is recorded as given, not checked.
    pub fn from_gap_and_mu(inv_kfa: T, delta: T, mu: T) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "order parameter must be positive, got {}",
                to_f64(delta)
            )));
        }
        let solver = EosSolver::new(EosSettings::default());
        let integrals = solver.integrals(delta, mu)?;
        Self::from_parts(inv_kfa, delta, mu, &integrals)
    }

    fn from_parts(inv_kfa: T, delta: T, mu: T, integrals: &ThermoIntegrals<T>) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "order parameter must be positive, got {}",
                to_f64(delta)
            )));
        }
        if !mu.is_finite() || !inv_kfa.is_finite() {
            return Err(Error::InvalidInput("non-finite crossover parameters".into()));
        }
        let c = sound_speed(delta, mu, integrals);
        Ok(Self {
            inv_kfa,
            delta,
            mu,
            c,
            theta0: pair_gap(delta, mu),
            zeta: c / delta,
            j2: integrals.j2,
            j4: integrals.j4,
        })
    }

    pub fn inv_kfa(&self) -> T {
        self.inv_kfa
    }
    /// Order parameter Δ in `E_F`.
    pub fn delta(&self) -> T {
        self.delta
    }
    /// Chemical potential μ in `E_F`.
    pub fn mu(&self) -> T {
        self.mu
    }
    /// Sound speed in `E_F/k_F` (`v_F = 2`).
    pub fn c(&self) -> T {
        self.c
    }
    /// Sound speed in units of the Fermi velocity.
    pub fn c_over_vf(&self) -> T {
        self.c / GasUnits::fermi_velocity::<T>()
    }
    /// Pair gap Θ₀ in `E_F`.
    pub fn theta0(&self) -> T {
        self.theta0
    }
    /// Coherence length ζ = c/Δ in `1/k_F`.
    pub fn zeta(&self) -> T {
        self.zeta
    }
    pub fn j2(&self) -> T {
        self.j2
    }
    pub fn j4(&self) -> T {
        self.j4
    }
    pub fn j_xi(&self) -> T {
        self.j4 - self.mu * self.j2
    }

    pub fn quasiparticle_energy(&self, k: T) -> T {
        quasiparticle_energy(k, self.delta, self.mu)
    }

    pub fn pair_threshold(&self, q: T) -> T {
        pair_threshold(q, self.delta, self.mu)
    }
}

/// `c² = (1/3m²) Δ²J₂J₄ / (Δ²J₂² + J_ξ²)`.
pub fn sound_speed<T: Real>(delta: T, mu: T, integrals: &ThermoIntegrals<T>) -> T {
    let m = GasUnits::mass::<T>();
    let j_xi = integrals.j_xi(mu);
    let d2 = delta * delta;
    let c2 = d2 * integrals.j2 * integrals.j4
        / (lit::<T>(3.0) * m * m * (d2 * integrals.j2 * integrals.j2 + j_xi * j_xi));
    c2.sqrt()
}

/// Newton solver for `(Δ, μ)` with reusable quadrature rules.
#[derive(Clone, Debug)]
pub struct EosSolver<T> {
    settings: EosSettings<T>,
    rule: TanMappedRule<T>,
}

impl<T: Real> Default for EosSolver<T> {
    fn default() -> Self {
        Self::new(EosSettings::default())
    }
}

/// Continuation start: deep BCS side with a deliberately rough guess.
const START_INV_KFA: f64 = -2.0;
const START_GUESS: (f64, f64) = (0.1, 1.0);

impl<T: Real> EosSolver<T> {
    pub fn new(settings: EosSettings<T>) -> Self {
        // The gap integral passes through zero near unitarity, hence the floor.
        let rule = TanMappedRule::new(settings.min_order, settings.max_order, settings.quad_rel_tol)
            .with_abs_tol(settings.quad_rel_tol * lit(1e-2));
        Self { settings, rule }
    }

    pub fn settings(&self) -> &EosSettings<T> {
        &self.settings
    }

    /// Evaluates the four momentum integrals at `(Δ, μ)`.
    pub fn integrals(&self, delta: T, mu: T) -> Result<ThermoIntegrals<T>> {
        let two_pi2 = lit::<T>(2.0) * T::PI() * T::PI();
        let mut breaks = vec![T::one()];
        if mu > T::zero() {
            breaks.push(mu.sqrt());
            for j in [1.0, 3.0] {
                let lo = mu - delta * lit(j);
                if lo > T::zero() {
                    breaks.push(lo.sqrt());
                }
                breaks.push((mu + delta * lit(j)).sqrt());
            }
        } else {
            breaks.push((-mu).sqrt().max(lit(1e-3)));
        }
        let est = self.rule.integrate(&breaks, |k: T| -> [T; 4] {
            let k2 = k * k;
            let xi = k2 - mu;
            let e = delta.hypot(xi);
            let d2 = delta * delta;
            // 1 − ξ/E and E − k², rewritten to avoid cancellation for ξ ≫ Δ.
            let (one_minus_ratio, e_minus_k2) = if xi > T::zero() {
                let e_plus_xi = e + xi;
                (d2 / (e * e_plus_xi), d2 / e_plus_xi - mu)
            } else {
                (T::one() - xi / e, e - k2)
            };
            let e3 = e * e * e;
            [
                lit::<T>(2.0) / T::PI() * e_minus_k2 / e,
                k2 * one_minus_ratio / two_pi2,
                k2 / e3 / two_pi2,
                k2 * k2 / e3 / two_pi2,
            ]
        });
        if !est.converged {
            let rel = est
                .value
                .iter()
                .zip(est.error.iter())
                .map(|(v, e)| to_f64(*e) / to_f64(v.abs()).max(1e-300))
                .fold(0.0, f64::max);
            return Err(Error::QuadratureNotConverged {
                context: format!(
                    "equation-of-state integrals at delta = {}, mu = {}",
                    to_f64(delta),
                    to_f64(mu)
                ),
                estimate: rel,
            });
        }
        let [gap, density, j2, j4] = est.value;
        Ok(ThermoIntegrals {
            gap,
            density,
            j2,
            j4,
        })
    }

    /// Residuals `(gap − 1/k_F a_s, density/ρ₀ − 1)`.
    pub fn residuals(&self, inv_kfa: T, delta: T, mu: T) -> Result<(T, T)> {
        let ints = self.integrals(delta, mu)?;
        Ok((
            ints.gap - inv_kfa,
            ints.density / GasUnits::density::<T>() - T::one(),
        ))
    }

    /// Damped two-dimensional Newton iteration from an explicit initial guess.
    pub fn solve_from(&self, inv_kfa: T, guess: (T, T)) -> Result<CrossoverPoint<T>> {
        if !inv_kfa.is_finite() {
            return Err(Error::InvalidInput("1/kFa must be finite".into()));
        }
        let (mut delta, mut mu) = guess;
        if !(delta > T::zero()) {
            return Err(Error::InvalidInput("initial order parameter must be positive".into()));
        }
        let norm = |r: (T, T)| r.0.abs().max(r.1.abs());
        let mut r = self.residuals(inv_kfa, delta, mu)?;
        let mut iterations = 0;
        while norm(r) > self.settings.newton_tol {
            if iterations >= self.settings.max_iterations {
                return Err(Error::NonConvergence {
                    inv_kfa: to_f64(inv_kfa),
                    iterations,
                    gap_residual: to_f64(r.0),
                    density_residual: to_f64(r.1),
                });
            }
            iterations += 1;

            // Central-difference Jacobian.
            let hd = lit::<T>(1e-6) * delta.max(lit(1e-3));
            let hm = lit::<T>(1e-6) * mu.abs().max(lit(1e-2));
            let rdp = self.residuals(inv_kfa, delta + hd, mu)?;
            let rdm = self.residuals(inv_kfa, delta - hd, mu)?;
            let rmp = self.residuals(inv_kfa, delta, mu + hm)?;
            let rmm = self.residuals(inv_kfa, delta, mu - hm)?;
            let two = lit::<T>(2.0);
            let a11 = (rdp.0 - rdm.0) / (two * hd);
            let a21 = (rdp.1 - rdm.1) / (two * hd);
            let a12 = (rmp.0 - rmm.0) / (two * hm);
            let a22 = (rmp.1 - rmm.1) / (two * hm);
            let det = a11 * a22 - a12 * a21;
            if det == T::zero() || !det.is_finite() {
                return Err(Error::NonConvergence {
                    inv_kfa: to_f64(inv_kfa),
                    iterations,
                    gap_residual: to_f64(r.0),
                    density_residual: to_f64(r.1),
                });
            }
            let step_d = (a22 * r.0 - a12 * r.1) / det;
            let step_m = (-a21 * r.0 + a11 * r.1) / det;

            let mut lambda = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let nd = delta - lambda * step_d;
                let nm = mu - lambda * step_m;
                if nd > T::zero() {
                    if let Ok(nr) = self.residuals(inv_kfa, nd, nm) {
                        if norm(nr) < norm(r) {
                            delta = nd;
                            mu = nm;
                            r = nr;
                            accepted = true;
                            break;
                        }
                    }
                }
                lambda = lambda * lit(0.5);
            }
            if !accepted {
                return Err(Error::NonConvergence {
                    inv_kfa: to_f64(inv_kfa),
                    iterations,
                    gap_residual: to_f64(r.0),
                    density_residual: to_f64(r.1),
                });
            }
        }
        let ints = self.integrals(delta, mu)?;
        CrossoverPoint::from_parts(inv_kfa, delta, mu, &ints)
    }

    /// Solves at `inv_kfa` by continuation from the deep BCS side.
    pub fn solve(&self, inv_kfa: T) -> Result<CrossoverPoint<T>> {
        let start: T = lit(START_INV_KFA);
        let guess = (lit(START_GUESS.0), lit(START_GUESS.1));
        let mut point = self.solve_from(start, guess)?;
        let span = inv_kfa - start;
        let steps = (span.abs() / self.settings.continuation_step).ceil().to_usize().unwrap_or(0);
        let mut previous: Option<CrossoverPoint<T>> = None;
        for i in 1..=steps {
            let x = if i == steps {
                inv_kfa
            } else {
                start + span * lit::<T>(i as f64) / lit::<T>(steps as f64)
            };
            let guess = extrapolated_guess(previous.as_ref(), &point, x);
            let next = self.solve_from(x, guess)?;
            previous = Some(point);
            point = next;
        }
        Ok(point)
    }

    /// Serial continuation along a sorted scan; output order follows input.
    pub fn sweep(&self, scan: &[T]) -> Result<Vec<CrossoverPoint<T>>> {
        let mut out: Vec<CrossoverPoint<T>> = Vec::with_capacity(scan.len());
        for &x in scan {
            let point = match out.len() {
                0 => self.solve(x)?,
                n => {
                    let last = &out[n - 1];
                    if (x - last.inv_kfa).abs() > self.settings.continuation_step {
                        self.solve(x)?
                    } else {
                        let prev = if n >= 2 { Some(&out[n - 2]) } else { None };
                        let guess = extrapolated_guess(prev, last, x);
                        self.solve_from(x, guess).or_else(|_| self.solve(x))?
                    }
                }
            };
            out.push(point);
        }
        Ok(out)
    }
}

fn extrapolated_guess<T: Real>(
    previous: Option<&CrossoverPoint<T>>,
    last: &CrossoverPoint<T>,
    x: T,
) -> (T, T) {
    match previous {
        Some(p) if p.inv_kfa != last.inv_kfa => {
            let t = (x - last.inv_kfa) / (last.inv_kfa - p.inv_kfa);
            let d = last.delta + t * (last.delta - p.delta);
            let m = last.mu + t * (last.mu - p.mu);
            (if d > T::zero() { d } else { last.delta }, m)
        }
        _ => (last.delta, last.mu),
    }
}

/// Solves the equations of state at `inv_kfa` with default settings.
pub fn solve_eos<T: Real>(inv_kfa: T) -> Result<CrossoverPoint<T>> {
    EosSolver::default().solve(inv_kfa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_convention() {
        let m: f64 = GasUnits::mass();
        assert_eq!(GasUnits::free_energy(1.0_f64), 1.0);
        assert_eq!(GasUnits::fermi_velocity::<f64>(), 1.0 / m);
        assert_relative_eq!(
            GasUnits::density::<f64>(),
            1.0 / (3.0 * std::f64::consts::PI.powi(2)),
            max_relative = 1e-15
        );
    }

    #[test]
    fn quasiparticle_energy_examples() {
        assert_eq!(quasiparticle_energy(1.0_f64, 0.0, 0.0), 1.0);
        let k = (2.0 * 0.5 * 0.5_f64).sqrt();
        assert_relative_eq!(quasiparticle_energy(k, 0.3, 0.5), 0.3, max_relative = 1e-15);
        let direct = (0.6864_f64.powi(2) + (1.0 - 0.5906_f64).powi(2)).sqrt();
        assert_relative_eq!(quasiparticle_energy(1.0, 0.6864, 0.5906), direct);
        let e32: f32 = quasiparticle_energy(1.0f32, 0.6864, 0.5906);
        assert!((e32 as f64 - direct).abs() < 1e-6);
    }

    #[test]
    fn pair_gap_branches() {
        assert_eq!(pair_gap(0.5_f64, 1.0), 1.0);
        assert_relative_eq!(pair_gap(1.0_f64, -1.0), 2.0 * 2f64.sqrt());
        assert_eq!(pair_gap(0.0_f64, 1.0), 0.0);
    }

    #[test]
    fn pair_threshold_limits() {
        assert_eq!(pair_threshold(0.0_f64, 0.3, -0.5), pair_gap(0.3, -0.5));
        assert_eq!(pair_threshold(1.5_f64, 0.4, 1.0), 0.8);
        // Small q with μ < 0 approaches Θ₀ from above.
        let t = pair_threshold(1e-3_f64, 0.5, -1.0);
        assert!(t >= pair_gap(0.5, -1.0) - 1e-12);
        assert!(t - pair_gap(0.5, -1.0) < 1e-5);
    }

    #[test]
    fn crossover_point_rejects_zero_gap() {
        assert!(matches!(
            CrossoverPoint::from_gap_and_mu(0.0_f64, 0.0, 0.5),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn solver_reports_last_residuals_on_failure() {
        let solver = EosSolver::new(EosSettings {
            max_iterations: 1,
            ..EosSettings::default()
        });
        match solver.solve_from(0.0_f64, (0.1, 1.0)) {
            Err(Error::NonConvergence {
                iterations,
                gap_residual,
                ..
            }) => {
                assert_eq!(iterations, 1);
                assert!(gap_residual.is_finite());
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }
}
