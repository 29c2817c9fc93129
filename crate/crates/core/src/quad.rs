//! Quadrature rules.
//!
//! Two families are provided:
//!
//! * [`GaussLegendre`] fixed-order rules, with [`TanMappedRule`] applying them to
//!   `[0, ∞)` through `k = tan(t)` and doubling the order until the result settles.
//! * [`adaptive`], a globally adaptive 7/15-point Gauss–Kronrod integrator for
//!   scalar, complex or small vector-valued integrands, optionally closing the
//!   range to infinity with the inverse map `x = b / t`.

use num_complex::Complex;

use crate::num::{lit, Real};

/// Values that can be accumulated by the quadrature routines.
pub trait QuadValue<T: Real>: Copy {
    fn empty() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn scaled(&self, s: T) -> Self;
    /// Component-wise magnitude, stored in the same shape.
    fn abs_parts(&self) -> Self;
    /// Largest ratio `|err_i| / max(abs_tol, rel_tol |self_i|)` over components.
    fn tolerance_ratio(&self, err: &Self, rel_tol: T, abs_tol: T) -> T;
    fn all_finite(&self) -> bool;
}

macro_rules! scalar_quad_value {
    ($t:ty) => {
        impl QuadValue<$t> for $t {
            fn empty() -> Self {
                0.0
            }
            fn plus(&self, other: &Self) -> Self {
                *self + *other
            }
            fn minus(&self, other: &Self) -> Self {
                *self - *other
            }
            fn scaled(&self, s: $t) -> Self {
                *self * s
            }
            fn abs_parts(&self) -> Self {
                self.abs()
            }
            fn tolerance_ratio(&self, err: &Self, rel_tol: $t, abs_tol: $t) -> $t {
                err.abs() / abs_tol.max(rel_tol * self.abs())
            }
            fn all_finite(&self) -> bool {
                <$t>::is_finite(*self)
            }
        }
    };
}

scalar_quad_value!(f32);
scalar_quad_value!(f64);

impl<T: Real> QuadValue<T> for Complex<T> {
    fn empty() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    fn plus(&self, other: &Self) -> Self {
        *self + *other
    }
    fn minus(&self, other: &Self) -> Self {
        *self - *other
    }
    fn scaled(&self, s: T) -> Self {
        Complex::new(self.re * s, self.im * s)
    }
    fn abs_parts(&self) -> Self {
        Complex::new(self.norm(), T::zero())
    }
    fn tolerance_ratio(&self, err: &Self, rel_tol: T, abs_tol: T) -> T {
        err.norm() / abs_tol.max(rel_tol * self.norm())
    }
    fn all_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<T: Real, V: QuadValue<T>, const N: usize> QuadValue<T> for [V; N] {
    fn empty() -> Self {
        [V::empty(); N]
    }
    fn plus(&self, other: &Self) -> Self {
        std::array::from_fn(|i| self[i].plus(&other[i]))
    }
    fn minus(&self, other: &Self) -> Self {
        std::array::from_fn(|i| self[i].minus(&other[i]))
    }
    fn scaled(&self, s: T) -> Self {
        std::array::from_fn(|i| self[i].scaled(s))
    }
    fn abs_parts(&self) -> Self {
        std::array::from_fn(|i| self[i].abs_parts())
    }
    fn tolerance_ratio(&self, err: &Self, rel_tol: T, abs_tol: T) -> T {
        self.iter()
            .zip(err.iter())
            .map(|(v, e)| v.tolerance_ratio(e, rel_tol, abs_tol))
            .fold(T::zero(), |a, b| if b > a || b.is_nan() { b } else { a })
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.all_finite())
    }
}

/// Fixed-order Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Builds the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre order must be positive");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, refined in f64 then in T.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = lit(-x);
            nodes[n - 1 - i] = lit(x);
            weights[i] = lit(w);
            weights[n - 1 - i] = lit(w);
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<V, F>(&self, a: T, b: T, mut f: F) -> V
    where
        V: QuadValue<T>,
        F: FnMut(T) -> V,
    {
        let half = (b - a) * lit(0.5);
        let mid = (a + b) * lit(0.5);
        let mut acc = V::empty();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc.plus(&f(mid + half * x).scaled(w));
        }
        acc.scaled(half)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * pn - p0) / (x * x - 1.0);
    (pn, dp)
}

/// Result of a converging quadrature.
#[derive(Clone, Copy, Debug)]
pub struct Estimate<V> {
    pub value: V,
    pub error: V,
    /// Panels (adaptive) or nodes per panel (doubling rules) used.
    pub work: usize,
    pub converged: bool,
}

/// Composite Gauss–Legendre on `[0, ∞)` in the variable `t = atan(k)`.
///
/// The range `[0, π/2)` is cut at `atan(b)` for every breakpoint `b`; the
/// order per panel is doubled from `min_order` until successive composite
/// results differ by less than `rel_tol` (relative, every component) or by
/// less than `abs_tol`.
#[derive(Clone, Debug)]
pub struct TanMappedRule<T> {
    rules: Vec<GaussLegendre<T>>,
    rel_tol: T,
    abs_tol: T,
}

impl<T: Real> TanMappedRule<T> {
    pub fn new(min_order: usize, max_order: usize, rel_tol: T) -> Self {
        let mut rules = Vec::new();
        let mut n = min_order.max(2);
        while n <= max_order.max(min_order) {
            rules.push(GaussLegendre::new(n));
            n *= 2;
        }
        Self {
            rules,
            rel_tol,
            abs_tol: T::min_positive_value(),
        }
    }

    pub fn with_abs_tol(mut self, abs_tol: T) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn rel_tol(&self) -> T {
        self.rel_tol
    }

    pub fn max_order(&self) -> usize {
        self.rules.last().map_or(0, |r| r.order())
    }

    fn composite<V, F>(&self, rule: &GaussLegendre<T>, cuts: &[T], f: &mut F) -> V
    where
        V: QuadValue<T>,
        F: FnMut(T) -> V,
    {
        let mut acc = V::empty();
        for w in cuts.windows(2) {
            let part = rule.integrate(w[0], w[1], |t: T| {
                let k = t.tan();
                let c = t.cos();
                f(k).scaled(T::one() / (c * c))
            });
            acc = acc.plus(&part);
        }
        acc
    }

    /// Integrates `f(k)` over `k ∈ [0, ∞)`.
    pub fn integrate<V, F>(&self, breakpoints: &[T], mut f: F) -> Estimate<V>
    where
        V: QuadValue<T>,
        F: FnMut(T) -> V,
    {
        let mut cuts = vec![T::zero()];
        let mut inner: Vec<T> = breakpoints
            .iter()
            .filter(|b| b.is_finite() && **b > T::zero())
            .map(|b| b.atan())
            .collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
        inner.dedup_by(|a, b| (*a - *b).abs() < lit(1e-12));
        cuts.extend(inner);
        cuts.push(T::FRAC_PI_2());

        let mut previous: Option<V> = None;
        let mut last_err = V::empty();
        let mut last_order = 0;
        for rule in &self.rules {
            let current: V = self.composite(rule, &cuts, &mut f);
            last_order = rule.order();
            if let Some(prev) = previous {
                let diff = current.minus(&prev).abs_parts();
                last_err = diff;
                if current.tolerance_ratio(&diff, self.rel_tol, self.abs_tol)
                    <= T::one()
                {
                    return Estimate {
                        value: current,
                        error: diff,
                        work: last_order,
                        converged: true,
                    };
                }
            }
            previous = Some(current);
        }
        Estimate {
            value: previous.unwrap_or_else(V::empty),
            error: last_err,
            work: last_order,
            converged: false,
        }
    }
}

/// Settings for [`adaptive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveSettings<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_panels: usize,
}

impl<T: Real> Default for AdaptiveSettings<T> {
    fn default() -> Self {
        Self {
            rel_tol: lit(1e-8),
            abs_tol: lit(1e-14),
            max_panels: 400,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy)]
enum Map<T> {
    Linear,
    /// `x = base / t`, `dx = base / t² dt`.
    Inverse(T),
}

struct Panel<T, V> {
    lo: T,
    hi: T,
    map: Map<T>,
    value: V,
    error: V,
}

fn kronrod<T, V, F>(f: &mut F, lo: T, hi: T, map: Map<T>) -> (V, V)
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    let center = (lo + hi) * lit(0.5);
    let half = (hi - lo) * lit(0.5);
    let mut eval = |t: T| -> V {
        match map {
            Map::Linear => f(t),
            Map::Inverse(base) => {
                let x = base / t;
                f(x).scaled(base / (t * t))
            }
        }
    };
    let fc = eval(center);
    let mut kron = fc.scaled(lit(WGK[7]));
    let mut gauss = fc.scaled(lit(WG[3]));
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let f1 = eval(center - dx);
        let f2 = eval(center + dx);
        let pair = f1.plus(&f2);
        kron = kron.plus(&pair.scaled(lit(WGK[j])));
        if j % 2 == 1 {
            gauss = gauss.plus(&pair.scaled(lit(WG[j / 2])));
        }
    }
    let kron = kron.scaled(half);
    let gauss = gauss.scaled(half);
    let err = kron.minus(&gauss).abs_parts();
    (kron, err)
}

/// Globally adaptive Gauss–Kronrod quadrature.
///
/// `breaks` (sorted, at least two points) seeds the initial panels. When
/// `to_infinity` is set, one more panel covers `[breaks.last(), ∞)` through the
/// inverse map; the integrand must then decay faster than `1/x`.
pub fn adaptive<T, V, F>(
    mut f: F,
    breaks: &[T],
    to_infinity: bool,
    settings: &AdaptiveSettings<T>,
) -> Estimate<V>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    assert!(breaks.len() >= 2 || (to_infinity && !breaks.is_empty()));
    let mut panels: Vec<Panel<T, V>> = Vec::with_capacity(64);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = kronrod(&mut f, w[0], w[1], Map::Linear);
            panels.push(Panel {
                lo: w[0],
                hi: w[1],
                map: Map::Linear,
                value,
                error,
            });
        }
    }
    if to_infinity {
        let base = *breaks.last().unwrap();
        assert!(base > T::zero(), "tail map needs a positive start");
        let map = Map::Inverse(base);
        let (value, error) = kronrod(&mut f, T::zero(), T::one(), map);
        panels.push(Panel {
            lo: T::zero(),
            hi: T::one(),
            map,
            value,
            error,
        });
    }

    loop {
        let mut total = V::empty();
        let mut total_err = V::empty();
        for p in &panels {
            total = total.plus(&p.value);
            total_err = total_err.plus(&p.error);
        }
        let ratio = total.tolerance_ratio(&total_err, settings.rel_tol, settings.abs_tol);
        if ratio <= T::one() || !total.all_finite() {
            return Estimate {
                value: total,
                error: total_err,
                work: panels.len(),
                converged: total.all_finite(),
            };
        }
        if panels.len() >= settings.max_panels {
            return Estimate {
                value: total,
                error: total_err,
                work: panels.len(),
                converged: false,
            };
        }
        // Split the panel contributing most to the worst component.
        let mut worst = 0;
        let mut worst_ratio = -T::one();
        for (i, p) in panels.iter().enumerate() {
            let r = total.tolerance_ratio(&p.error, settings.rel_tol, settings.abs_tol);
            if r > worst_ratio {
                worst_ratio = r;
                worst = i;
            }
        }
        let p = panels.swap_remove(worst);
        let mid = (p.lo + p.hi) * lit(0.5);
        if !(mid > p.lo && mid < p.hi) {
            // Panel exhausted floating point resolution; keep it and stop.
            panels.push(p);
            let mut total = V::empty();
            let mut total_err = V::empty();
            for p in &panels {
                total = total.plus(&p.value);
                total_err = total_err.plus(&p.error);
            }
            return Estimate {
                value: total,
                error: total_err,
                work: panels.len(),
                converged: false,
            };
        }
        let (v1, e1) = kronrod(&mut f, p.lo, mid, p.map);
        let (v2, e2) = kronrod(&mut f, mid, p.hi, p.map);
        panels.push(Panel {
            lo: p.lo,
            hi: mid,
            map: p.map,
            value: v1,
            error: e1,
        });
        panels.push(Panel {
            lo: mid,
            hi: p.hi,
            map: p.map,
            value: v2,
            error: e2,
        });
    }
}

/// Sorted, deduplicated breakpoints restricted to `[lo, hi]`, endpoints included.
pub fn clean_breaks<T: Real>(lo: T, hi: T, interior: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut pts: Vec<T> = interior
        .into_iter()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = (hi - lo).abs().max(lo.abs()).max(hi.abs());
    let min_gap = scale * lit::<T>(64.0) * T::epsilon();
    let mut out: Vec<T> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last() {
            Some(&last) if p - last <= min_gap => {
                if p == hi {
                    *out.last_mut().unwrap() = hi;
                }
            }
            _ => out.push(p),
        }
    }
    out
}
