use num_complex::Complex64 as C64;
use sfprobe::eos::{solve_eos, CrossoverPoint};
use sfprobe::susceptibility::{chi_coll, ResponseSolver};
use std::f64::consts::PI;

// Brute-force oracle in (|k|, cos θ) coordinates with composite Simpson rules.
// The sum over k is (1/4π²) ∫ k² dk ∫ du; k > K is mapped to t = 1/k, and the
// last sliver t < t_min is added as t_min times the (constant) limit.

struct Blocks {
    pair: C64,
    a1: C64,
    a2: C64,
    i11: C64,
    i22: C64,
    i12: C64,
}

fn simpson_weights(n: usize) -> Vec<f64> {
    assert!(n % 2 == 0);
    (0..=n)
        .map(|i| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
        .map(|w| w / 3.0)
        .collect()
}

fn integrand(k: f64, u: f64, q: f64, z2: C64, delta: f64, mu: f64) -> [C64; 6] {
    let d2 = delta * delta;
    let p2 = (k * k - k * q * u + q * q / 4.0).max(0.0);
    let pp2 = k * k + k * q * u + q * q / 4.0;
    let (xi, xip, xik) = (p2 - mu, pp2 - mu, k * k - mu);
    let (e, ep, ek) = ((xi * xi + d2).sqrt(), (xip * xip + d2).sqrt(), (xik * xik + d2).sqrt());
    let s = e + ep;
    let ee = e * ep;
    let den = C64::new(s * s, 0.0) - z2;
    let w = s / den;
    [
        -w * ((ee - xi * xip + d2) / ee),
        w * ((xi + xip) / ee),
        w / ee,
        w * ((ee + xi * xip + d2) / ee) - 1.0 / ek,
        w * ((ee + xi * xip - d2) / ee) - 1.0 / ek,
        ((e * xip + ep * xi) / ee) / den,
    ]
}

fn oracle(point: &CrossoverPoint<f64>, q: f64, nu: f64, eps: f64, nk: usize, nu_pts: usize) -> Blocks {
    let (delta, mu) = (point.delta(), point.mu());
    let z = C64::new(nu, eps);
    let z2 = z * z;
    let big_k = 6.0;
    let wu = simpson_weights(nu_pts);
    let hu = 2.0 / nu_pts as f64;
    let mut acc = [C64::new(0.0, 0.0); 6];
    let add_line = |k: f64, weight: f64, acc: &mut [C64; 6]| {
        for (j, w) in wu.iter().enumerate() {
            let u = -1.0 + hu * j as f64;
            let f = integrand(k, u, q, z2, delta, mu);
            for c in 0..6 {
                acc[c] += f[c] * (weight * w * hu);
            }
        }
    };
    let wk = simpson_weights(nk);
    let hk = big_k / nk as f64;
    for (i, w) in wk.iter().enumerate() {
        let k = hk * i as f64;
        add_line(k, w * hk * k * k, &mut acc);
    }
    // Tail in t = 1/k: ∫ k² F dk = ∫ F / t⁴ dt.
    let t_min = 1e-4;
    let t_max = 1.0 / big_k;
    let nt = 2000;
    let wt = simpson_weights(nt);
    let ht = (t_max - t_min) / nt as f64;
    for (i, w) in wt.iter().enumerate() {
        let t = t_min + ht * i as f64;
        add_line(1.0 / t, w * ht / t.powi(4), &mut acc);
    }
    add_line(1.0 / t_min, t_min / t_min.powi(4), &mut acc);
    let pref = 1.0 / (4.0 * PI * PI);
    Blocks {
        pair: acc[0] * pref,
        a1: acc[1] * pref,
        a2: acc[2] * pref,
        i11: acc[3] * pref,
        i22: acc[4] * pref,
        i12: acc[5] * pref,
    }
}

fn close(a: C64, b: C64, rel: f64, what: &str) {
    assert!((a - b).norm() <= rel * b.norm(), "{what}: {a} vs {b}");
}

#[test]
fn blocks_below_threshold_match_brute_force() {
    let point = solve_eos(-0.5_f64).unwrap();
    let (q, nu, eps) = (1.0, 0.5, 0.01);
    let o = oracle(&point, q, nu, eps, 6000, 200);
    let r = ResponseSolver::new(point).integrals(q, nu, eps).unwrap();
    let b = r.blocks;
    for (x, y, name) in [
        (r.chi_pair, o.pair, "pair"),
        (b.a1, o.a1, "A1"),
        (b.a2, o.a2, "A2"),
        (b.i11, o.i11, "I11"),
        (b.i22, o.i22, "I22"),
        (b.i12, o.i12, "I12"),
    ] {
        close(x, y, 1e-6, name);
    }
}

#[test]
fn blocks_inside_continuum_match_brute_force() {
    let point = solve_eos(0.0_f64).unwrap();
    let (q, nu, eps) = (1.0, 2.0, 0.05);
    let o = oracle(&point, q, nu, eps, 12000, 1000);
    let r = ResponseSolver::new(point).integrals(q, nu, eps).unwrap();
    let b = r.blocks;
    for (x, y, name) in [
        (r.chi_pair, o.pair, "pair"),
        (b.a1, o.a1, "A1"),
        (b.a2, o.a2, "A2"),
        (b.i11, o.i11, "I11"),
        (b.i22, o.i22, "I22"),
        (b.i12, o.i12, "I12"),
    ] {
        close(x, y, 1e-4, name);
    }
}

#[test]
fn collective_term_matches_brute_force() {
    let point = solve_eos(1.0_f64).unwrap();
    let (q, nu, eps) = (0.5, 0.3, 0.01);
    let o = oracle(&point, q, nu, eps, 6000, 200);
    let z = C64::new(nu, eps);
    let z2 = z * z;
    let num = o.a1 * o.a1 * o.i11 + z2 * o.a2 * o.a2 * o.i22 - z2 * o.a1 * o.a2 * o.i12 * 2.0;
    let den = o.i11 * o.i22 - z2 * o.i12 * o.i12;
    let expected = num * point.delta().powi(2) / den;
    let blocks = ResponseSolver::new(point).building_blocks(q, nu, eps).unwrap();
    let got = chi_coll(&blocks, &point).unwrap();
    close(got, expected, 1e-6, "chi_coll");
}

#[test]
fn long_wavelength_limits_of_blocks() {
    let point = solve_eos(0.0_f64).unwrap();
    let q = 0.01;
    let b = ResponseSolver::new(point).building_blocks(q, 0.0, 0.0).unwrap();
    let d2 = point.delta().powi(2);
    let rel = |a: f64, e: f64| (a - e).abs() / e.abs();
    assert!(rel(b.a1.re, point.j_xi()) < 1e-3);
    assert!(rel(b.a2.re, point.j2() / 2.0) < 1e-3);
    assert!(rel(b.i12.re, point.j_xi() / 2.0) < 1e-3);
    assert!(rel(b.i22.re, -d2 * point.j2()) < 1e-3);
    assert!(rel(b.i11.re, -q * q * point.j4() / 3.0) < 1e-2);
}

#[test]
fn small_gap_recovers_static_lindhard() {
    // Normal-state limit: χ(q, 0) = −N(0)[1/2 + (1 − x²)/(4x) ln|(1 + x)/(1 − x)|],
    // x = q/2, N(0) = 1/(2π²).
    let point = CrossoverPoint::from_gap_and_mu(0.0, 1e-3, 1.0).unwrap();
    let solver = ResponseSolver::new(point);
    for q in [0.4, 1.0, 1.5, 3.0] {
        let x: f64 = q / 2.0;
        let lindhard = -(0.5 + (1.0 - x * x) / (4.0 * x) * ((1.0 + x) / (1.0 - x)).abs().ln()) / (2.0 * PI * PI);
        let got = solver.chi_pair(q, 0.0, 0.0).unwrap().re;
        assert!((got - lindhard).abs() < 1e-3 * lindhard.abs(), "q {q}: {got} vs {lindhard}");
    }
}

/// `S_pair(q, ν)` at ε → 0: (1/2)(1/4π²) ∫ du Σ_roots k² C / |∂s/∂k|.
fn pair_delta_oracle(point: &CrossoverPoint<f64>, q: f64, nu: f64) -> f64 {
    let (delta, mu) = (point.delta(), point.mu());
    let d2 = delta * delta;
    let parts = |k: f64, u: f64| {
        let p2 = (k * k - k * q * u + q * q / 4.0).max(0.0);
        let pp2 = k * k + k * q * u + q * q / 4.0;
        let (xi, xip) = (p2 - mu, pp2 - mu);
        let (e, ep) = ((xi * xi + d2).sqrt(), (xip * xip + d2).sqrt());
        (e + ep, (e * ep - xi * xip + d2) / (e * ep))
    };
    let nu_pts = 4000;
    let wu = simpson_weights(nu_pts);
    let hu = 2.0 / nu_pts as f64;
    let mut total = 0.0;
    for (j, w) in wu.iter().enumerate() {
        let u = -1.0 + hu * j as f64;
        let g = |k: f64| parts(k, u).0 - nu;
        let n = 4000;
        let kmax = 6.0;
        let mut line = 0.0;
        for i in 0..n {
            let (a, b) = (kmax * i as f64 / n as f64, kmax * (i + 1) as f64 / n as f64);
            if g(a) * g(b) < 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..60 {
                    let m = 0.5 * (lo + hi);
                    if (g(m) > 0.0) == (g(lo) > 0.0) {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                let k = 0.5 * (lo + hi);
                let h = 1e-6;
                let slope = (g(k + h) - g(k - h)) / (2.0 * h);
                line += k * k * parts(k, u).1 / slope.abs();
            }
        }
        total += w * hu * line;
    }
    0.5 * total / (4.0 * PI * PI)
}

#[test]
fn pair_spectrum_matches_delta_oracle() {
    let point = solve_eos(0.0_f64).unwrap();
    let solver = ResponseSolver::new(point);
    for (q, nu) in [(1.0, 2.0), (2.0, 3.0)] {
        let expected = pair_delta_oracle(&point, q, nu);
        let got = -solver.chi_pair(q, nu, 1e-3).unwrap().im / PI;
        assert!((got - expected).abs() < 1e-2 * expected, "q {q}: {got} vs {expected}");
    }
}
