//! Density response of the superfluid at complex frequency `ν + iε`.
//!
//! The momentum sums run over `k`, with the two quasiparticles of a pair at
//! `k − q/2` (unprimed) and `k + q/2` (primed). Rather than `(|k|, cos θ)` the
//! integrals are taken in the pair coordinates `p = |k − q/2|`, `p' = |k + q/2|`:
//!
//! ```text
//! (1/V) Σ_k F = 1/(4π² q) ∫_q^∞ dσ ∫_0^q dδ  p p' F(p, p'),
//! σ = p + p',  δ = p' − p,
//! ```
//!
//! which is exact for every integrand here because each is symmetric under
//! `p ↔ p'`. In these coordinates the resonance `E + E' = ν` is a curve that
//! is located by a cheap scan, so the inner `σ` integration gets breakpoints
//! exactly where the Lorentzian-broadened denominators peak.

use num_complex::Complex;

use crate::eos::CrossoverPoint;
use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};
use crate::quad::{adaptive, clean_breaks, AdaptiveSettings};
use crate::roots::{bisect, golden_min};

/// Default broadening in `E_F`.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// The five integrals entering the collective-mode response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiBuildingBlocks<T> {
    pub q: T,
    pub nu: T,
    pub epsilon: T,
    pub a1: Complex<T>,
    pub a2: Complex<T>,
    pub i11: Complex<T>,
    pub i22: Complex<T>,
    pub i12: Complex<T>,
}

impl<T: Real> ChiBuildingBlocks<T> {
    /// `z² = (ν + iε)²`.
    pub fn z2(&self) -> Complex<T> {
        let z = Complex::new(self.nu, self.epsilon);
        z * z
    }

    /// Numerator of the collective term, without the `Δ²` prefactor.
    pub fn coll_numerator(&self) -> Complex<T> {
        let z2 = self.z2();
        self.a1 * self.a1 * self.i11 + z2 * self.a2 * self.a2 * self.i22
            - z2 * self.a1 * self.a2 * self.i12 * lit::<T>(2.0)
    }

    /// `I11 I22 − z² I12²`; its zero on the real axis is the collective mode.
    pub fn coll_denominator(&self) -> Complex<T> {
        self.i11 * self.i22 - self.z2() * self.i12 * self.i12
    }

    /// Residue-like prefactor `B = −Δ² N / I12²`.
    pub fn pole_weight(&self, delta: T) -> Complex<T> {
        -self.coll_numerator() * delta * delta / (self.i12 * self.i12)
    }

    /// `Ω² = I11 I22 / I12²`.
    pub fn omega_squared(&self) -> Complex<T> {
        self.i11 * self.i22 / (self.i12 * self.i12)
    }
}

/// Everything produced by one pass over momentum space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponseIntegrals<T> {
    pub blocks: ChiBuildingBlocks<T>,
    pub chi_pair: Complex<T>,
    /// `I11` from the current-conservation form of the integrand.
    pub i11_identity: Complex<T>,
}

/// Complex density response at one `(q, ν + iε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexResponse<T> {
    pub q: T,
    pub nu: T,
    pub epsilon: T,
    pub chi_pair: Complex<T>,
    pub chi_coll: Complex<T>,
    pub chi_total: Complex<T>,
}

/// Quadrature controls; the inner tolerance is a tenth of the outer one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SusceptibilitySettings<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_panels: usize,
}

impl<T: Real> Default for SusceptibilitySettings<T> {
    fn default() -> Self {
        Self {
            rel_tol: lit(1e-8),
            abs_tol: lit(1e-13),
            max_panels: 400,
        }
    }
}

impl<T: Real> SusceptibilitySettings<T> {
    /// Looser settings used inside frequency and momentum sweeps.
    pub fn sweep() -> Self {
        Self {
            rel_tol: lit(1e-6),
            abs_tol: lit(1e-12),
            max_panels: 400,
        }
    }
}

/// Evaluates response functions for one crossover point.
#[derive(Clone, Copy, Debug)]
pub struct ResponseSolver<T> {
    point: CrossoverPoint<T>,
    settings: SusceptibilitySettings<T>,
}

const N_COMPONENTS: usize = 7;

impl<T: Real> ResponseSolver<T> {
    pub fn new(point: CrossoverPoint<T>) -> Self {
        Self::with_settings(point, SusceptibilitySettings::default())
    }

    pub fn with_settings(point: CrossoverPoint<T>, settings: SusceptibilitySettings<T>) -> Self {
        Self { point, settings }
    }

    pub fn point(&self) -> &CrossoverPoint<T> {
        &self.point
    }

    pub fn settings(&self) -> &SusceptibilitySettings<T> {
        &self.settings
    }

    /// Computes the pair term, the five blocks and the identity form of `I11`.
    ///
    /// `epsilon = 0` is accepted only strictly below the continuum threshold,
    /// where every integrand is real and bounded.
    pub fn integrals(&self, q: T, nu: T, epsilon: T) -> Result<ResponseIntegrals<T>> {
        if !(q > T::zero()) || !q.is_finite() {
            return Err(Error::InvalidInput(format!("q must be positive, got {}", to_f64(q))));
        }
        if !nu.is_finite() || !(epsilon >= T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidInput("frequency and broadening must be finite, epsilon >= 0".into()));
        }
        let delta = self.point.delta();
        let mu = self.point.mu();
        if epsilon == T::zero() && nu.abs() >= self.point.pair_threshold(q) {
            return Err(Error::InvalidInput(format!(
                "epsilon = 0 requires |nu| below the pair threshold (q = {}, nu = {})",
                to_f64(q),
                to_f64(nu)
            )));
        }

        let z = Complex::new(nu, epsilon);
        let z2 = z * z;
        let outer = AdaptiveSettings {
            rel_tol: self.settings.rel_tol,
            abs_tol: self.settings.abs_tol,
            max_panels: self.settings.max_panels,
        };
        let inner = AdaptiveSettings {
            rel_tol: self.settings.rel_tol * lit(0.1),
            abs_tol: self.settings.abs_tol * lit(0.1),
            max_panels: self.settings.max_panels,
        };
        let mut inner_failure: Option<f64> = None;
        let zero = [Complex::new(T::zero(), T::zero()); N_COMPONENTS];

        let est = adaptive(
            |d: T| -> [Complex<T>; N_COMPONENTS] {
                let breaks = resonance_breaks(q, d, nu, epsilon, delta, mu);
                let r = adaptive(
                    |s: T| integrand(s, d, q, z2, delta, mu),
                    &breaks,
                    true,
                    &inner,
                );
                if !r.converged {
                    let worst = worst_ratio(&r.value, &r.error, &inner);
                    inner_failure = Some(inner_failure.map_or(worst, |w: f64| w.max(worst)));
                    if !r.value.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                        return zero;
                    }
                }
                r.value
            },
            &[T::zero(), q],
            false,
            &outer,
        );

        let context = || {
            format!(
                "response integrals at q = {}, nu = {}, epsilon = {}",
                to_f64(q),
                to_f64(nu),
                to_f64(epsilon)
            )
        };
        if let Some(worst) = inner_failure {
            // Inner panels that miss their target by a small factor are still far
            // below the outer tolerance; only a gross miss is an error.
            if worst > 1e3 {
                return Err(Error::QuadratureNotConverged {
                    context: context(),
                    estimate: worst * to_f64(inner.rel_tol),
                });
            }
        }
        if !est.converged {
            // Square-root edges next to the continuum threshold stall the outer
            // refinement slightly above target; accept a miss up to 100x.
            let worst = worst_ratio(&est.value, &est.error, &outer);
            let finite = est.value.iter().all(|v| v.re.is_finite() && v.im.is_finite());
            if !(worst <= 1e2) || !finite {
                return Err(Error::QuadratureNotConverged {
                    context: context(),
                    estimate: worst * to_f64(outer.rel_tol),
                });
            }
        }

        let pref = T::one() / (lit::<T>(4.0) * T::PI() * T::PI() * q);
        let v: [Complex<T>; N_COMPONENTS] = std::array::from_fn(|i| est.value[i] * pref);
        Ok(ResponseIntegrals {
            blocks: ChiBuildingBlocks {
                q,
                nu,
                epsilon,
                a1: v[1],
                a2: v[2],
                i11: v[3],
                i22: v[4],
                i12: v[5],
            },
            chi_pair: v[0],
            i11_identity: v[6],
        })
    }

    pub fn building_blocks(&self, q: T, nu: T, epsilon: T) -> Result<ChiBuildingBlocks<T>> {
        Ok(self.integrals(q, nu, epsilon)?.blocks)
    }

    pub fn chi_pair(&self, q: T, nu: T, epsilon: T) -> Result<Complex<T>> {
        Ok(self.integrals(q, nu, epsilon)?.chi_pair)
    }

    /// Full response `χ = χ_pair + χ_coll`.
    pub fn response(&self, q: T, nu: T, epsilon: T) -> Result<ComplexResponse<T>> {
        let ints = self.integrals(q, nu, epsilon)?;
        let chi_coll = chi_coll(&ints.blocks, &self.point)?;
        Ok(ComplexResponse {
            q,
            nu,
            epsilon,
            chi_pair: ints.chi_pair,
            chi_coll,
            chi_total: ints.chi_pair + chi_coll,
        })
    }

    /// `|I11 − I11_identity| / |I11|`.
    pub fn i11_identity_gap(&self, q: T, nu: T, epsilon: T) -> Result<T> {
        let ints = self.integrals(q, nu, epsilon)?;
        Ok((ints.blocks.i11 - ints.i11_identity).norm() / ints.blocks.i11.norm())
    }
}

/// Collective term `Δ² N / (I11 I22 − z² I12²)`.
pub fn chi_coll<T: Real>(blocks: &ChiBuildingBlocks<T>, point: &CrossoverPoint<T>) -> Result<Complex<T>> {
    let den = blocks.coll_denominator();
    let z2 = blocks.z2();
    let scale = (blocks.i11 * blocks.i22).norm() + (z2 * blocks.i12 * blocks.i12).norm();
    if !(den.norm() > scale * T::epsilon() * lit(64.0)) {
        return Err(Error::PoleSingular {
            q: to_f64(blocks.q),
            nu: to_f64(blocks.nu),
            epsilon: to_f64(blocks.epsilon),
        });
    }
    let d2 = point.delta() * point.delta();
    Ok(blocks.coll_numerator() * d2 / den)
}

/// Collective term from the compact form `B / (z² − Ω²)`.
pub fn chi_coll_compact<T: Real>(blocks: &ChiBuildingBlocks<T>, point: &CrossoverPoint<T>) -> Complex<T> {
    blocks.pole_weight(point.delta()) / (blocks.z2() - blocks.omega_squared())
}

/// `EE' − ξξ'`, via `(E²E'² − ξ²ξ'²)/(EE' + ξξ')` when `ξξ' > 0`.
fn energy_product<T: Real>(e: T, ep: T, xi: T, xip: T, d2: T) -> T {
    let xx = xi * xip;
    if xx > T::zero() {
        (d2 * (xi * xi + xip * xip) + d2 * d2) / (e * ep + xx)
    } else {
        e * ep - xx
    }
}

#[inline]
fn integrand<T: Real>(
    sigma: T,
    d: T,
    q: T,
    z2: Complex<T>,
    delta: T,
    mu: T,
) -> [Complex<T>; N_COMPONENTS] {
    let half: T = lit(0.5);
    let p = (sigma - d) * half;
    let pp = (sigma + d) * half;
    let d2 = delta * delta;
    let xi = p * p - mu;
    let xip = pp * pp - mu;
    let e = (d2 + xi * xi).sqrt();
    let ep = (d2 + xip * xip).sqrt();
    let k2 = ((p * p + pp * pp) * half - q * q * lit(0.25)).max(T::zero());
    let xik = k2 - mu;
    let ek = (d2 + xik * xik).sqrt();

    let ee = e * ep;
    let s = e + ep;
    let r = s / ee;
    let s2 = Complex::new(s * s, T::zero());
    let inv = (s2 - z2).inv();
    let w = p * pp;

    // M = EE' − ξξ', free of cancellation.
    let m = energy_product(e, ep, xi, xip, d2);
    let c_pair = -(m + d2) * r;
    let c_a1 = (xi + xip) * r;
    let c_i12 = (e * xip + ep * xi) / ee;

    // I11 and I22 with the 1/E_k subtraction done analytically:
    //   (A/EE') s/(s² − z²) − 1/E_k
    //     = (A/EE' − 2)/s + (2E_k − s)/(s E_k) + (A/EE') z²/(s(s² − z²)),
    // where A/EE' − 2 = −(M ∓ Δ²)/EE' and 2E_k − s is assembled from the
    // differences E − ξ, using 2ξ_k − ξ − ξ' = −q²/2.
    let gap_excess = |en: T, x: T| if x > T::zero() { d2 / (en + x) } else { en - x };
    let two_ek_minus_s = lit::<T>(2.0) * gap_excess(ek, xik) - gap_excess(e, xi) - gap_excess(ep, xip)
        - q * q * half;
    let smooth = two_ek_minus_s / (s * ek);
    let a11 = lit::<T>(2.0) - (m - d2) / ee;
    let a22 = lit::<T>(2.0) - (m + d2) / ee;
    let tail = z2 * inv / s;
    let i11 = tail * a11 + (smooth - (m - d2) / (ee * s));
    let i22 = tail * a22 + (smooth - (m + d2) / (ee * s));

    let kq = pp * pp - p * p;
    let id = (z2 - Complex::new(kq * kq, T::zero())) * inv * (s / (lit::<T>(2.0) * ee));

    [
        inv * (c_pair * w),
        inv * (c_a1 * w),
        inv * (r * w),
        i11 * w,
        i22 * w,
        inv * (c_i12 * w),
        id * w,
    ]
}

fn pair_energy<T: Real>(sigma: T, d: T, delta: T, mu: T) -> T {
    let half: T = lit(0.5);
    let p = (sigma - d) * half;
    let pp = (sigma + d) * half;
    let d2 = delta * delta;
    let xi = p * p - mu;
    let xip = pp * pp - mu;
    (d2 + xi * xi).sqrt() + (d2 + xip * xip).sqrt()
}

/// Breakpoints for the `σ` integration at fixed `δ`: the resonance crossings
/// `E + E' = ν`, a few broadening widths either side, and the energy minimum.
fn resonance_breaks<T: Real>(q: T, d: T, nu: T, epsilon: T, delta: T, mu: T) -> Vec<T> {
    let g = |s: T| pair_energy(s, d, delta, mu);
    let lo = q;
    let mut pts: Vec<T> = Vec::with_capacity(16);
    let two: T = lit(2.0);
    // Beyond σ = 2√μ + δ both momenta are outside the Fermi sphere and g rises.
    let mono = if mu > T::zero() { (two * mu.sqrt() + d).max(lo) } else { lo };
    let target = nu.abs();
    let width_at = |s: T| -> T {
        let h = lit::<T>(1e-6) * s.max(lit(1e-3));
        let slope = ((g(s + h) - g((s - h).max(lo))) / (s + h - (s - h).max(lo))).abs();
        let w = lit::<T>(20.0) * epsilon / slope.max(lit(1e-12));
        w.min(s.max(T::one()))
    };
    let add_root = |pts: &mut Vec<T>, r: T| {
        pts.push(r);
        if epsilon > T::zero() {
            let w = width_at(r);
            pts.push(r - w);
            pts.push(r + w);
            pts.push(r - w * lit(0.1));
            pts.push(r + w * lit(0.1));
        }
    };

    if mono > lo {
        let n = 48usize;
        let h = (mono - lo) / lit((n - 1) as f64);
        let mut prev_s = lo;
        let mut prev_g = g(lo);
        let mut best = (lo, prev_g);
        for i in 1..n {
            let s = lo + h * lit(i as f64);
            let gs = g(s);
            if gs < best.1 {
                best = (s, gs);
            }
            if (prev_g - target) * (gs - target) < T::zero() {
                if let Some(r) = bisect(|x| g(x) - target, prev_s, s, h * lit(1e-10)) {
                    add_root(&mut pts, r);
                }
            }
            prev_s = s;
            prev_g = gs;
        }
        let (smin, gmin) = golden_min(g, (best.0 - h).max(lo), (best.0 + h).min(mono), h * lit(1e-8));
        pts.push(smin);
        // Near-tangent resonance: the crossing pair is closer than the scan step.
        if gmin < target && (best.1 - target).abs() < (best.1 - gmin) * lit(4.0) + epsilon {
            for (a, b) in [((smin - h).max(lo), smin), (smin, (smin + h).min(mono))] {
                if let Some(r) = bisect(|x| g(x) - target, a, b, h * lit(1e-10)) {
                    add_root(&mut pts, r);
                }
            }
        }
    }

    // Monotone part: at most one more crossing.
    if g(mono) < target {
        let mut a = mono;
        let mut b = mono.max(T::one()) * two;
        while g(b) < target {
            a = b;
            b = b * two;
        }
        if let Some(r) = bisect(|x| g(x) - target, a, b, b * lit(1e-14)) {
            add_root(&mut pts, r);
        }
    }

    let mut top = mono.max(lo * two).max(lit(2.0));
    for &p in &pts {
        top = top.max(p * lit(1.5));
    }
    pts.push(mono);
    clean_breaks(lo, top, pts)
}

fn worst_ratio<T: Real>(
    value: &[Complex<T>; N_COMPONENTS],
    error: &[Complex<T>; N_COMPONENTS],
    s: &AdaptiveSettings<T>,
) -> f64 {
    value
        .iter()
        .zip(error.iter())
        .map(|(v, e)| to_f64(e.norm() / s.abs_tol.max(s.rel_tol * v.norm())))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_product_matches_naive_when_safe() {
        let (e, ep, xi, xip, d2) = (1.2_f64, 0.9, 0.5, -0.3, 0.8);
        assert!((energy_product(e, ep, xi, xip, d2) - (e * ep - xi * xip)).abs() < 1e-15);
        let (xi, xip) = (3.0_f64, 4.0);
        let d2 = 0.01_f64;
        let e = (d2 + xi * xi).sqrt();
        let ep = (d2 + xip * xip).sqrt();
        let stable = energy_product(e, ep, xi, xip, d2);
        let naive = e * ep - xi * xip;
        assert!((stable - naive).abs() < 1e-12);
        assert!(stable > 0.0);
    }

    #[test]
    fn breaks_bracket_every_resonance() {
        let (q, d, nu, eps, delta, mu) = (0.4_f64, 0.2, 0.9, 0.01, 0.3, 0.8);
        let b = resonance_breaks(q, d, nu, eps, delta, mu);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b[0], q);
        // Every crossing of E + E' = ν found on a fine grid lies near a breakpoint.
        let g = |s: f64| pair_energy(s, d, delta, mu);
        let n = 20000;
        let top = *b.last().unwrap();
        for i in 0..n {
            let s0 = q + (top - q) * i as f64 / n as f64;
            let s1 = q + (top - q) * (i + 1) as f64 / n as f64;
            if (g(s0) - nu) * (g(s1) - nu) < 0.0 {
                assert!(b.iter().any(|&x| (x - s0).abs() < 2.0 * (s1 - s0)));
            }
        }
    }
}
