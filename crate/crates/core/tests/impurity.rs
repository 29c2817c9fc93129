use num_complex::Complex64 as C64;
use proptest::prelude::*;
use sfprobe::dsf::Beta;
use sfprobe::eos::solve_eos;
use sfprobe::impurity::*;
use std::f64::consts::PI;

/// 1D oscillator eigenfunctions n = 0, 1.
fn psi(n: usize, x: f64, ell: f64) -> f64 {
    let g = (PI * ell * ell).powf(-0.25) * (-x * x / (2.0 * ell * ell)).exp();
    if n == 0 {
        g
    } else {
        2f64.sqrt() * x / ell * g
    }
}

/// `⟨m| e^{iqx} |n⟩` by trapezoid on a wide grid (spectrally accurate here).
fn overlap(m: usize, n: usize, q: f64, ell: f64) -> C64 {
    let l = 14.0 * ell;
    let npts = 4000;
    let h = 2.0 * l / npts as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..=npts {
        let x = -l + h * i as f64;
        let w = if i == 0 || i == npts { 0.5 } else { 1.0 };
        acc += C64::from_polar(1.0, q * x) * (w * h * psi(m, x, ell) * psi(n, x, ell));
    }
    acc
}

/// Occupations along x, y, z of level 0..=3.
fn quanta(level: usize) -> [usize; 3] {
    let mut n = [0; 3];
    if level > 0 {
        n[level - 1] = 1;
    }
    n
}

#[test]
fn couplings_match_wavefunction_overlaps() {
    let ell = 0.8;
    let kappa = 0.18;
    for q in [[0.3, -0.7, 1.1], [1.5, 0.2, 0.0], [-0.4, 2.0, -1.3]] {
        for g in 0..4 {
            for d in 0..4 {
                let (ng, nd) = (quanta(g), quanta(d));
                let mut expected = C64::new(kappa, 0.0);
                for axis in 0..3 {
                    expected *= overlap(ng[axis], nd[axis], q[axis], ell);
                }
                let got = coupling_constant(q, ell, kappa, g, d).unwrap();
                assert!((got - expected).norm() < 1e-12, "({g},{d}) q {q:?}: {got} vs {expected}");
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn sphere_average(f: impl Fn([f64; 3]) -> f64) -> f64 {
    let gl = gauss_legendre(40);
    let nphi = 80;
    let mut acc = 0.0;
    for &(u, w) in &gl {
        let s = (1.0 - u * u).sqrt();
        for j in 0..nphi {
            let phi = 2.0 * PI * j as f64 / nphi as f64;
            acc += w * f([s * phi.cos(), s * phi.sin(), u]);
        }
    }
    acc / (2.0 * nphi as f64)
}

#[test]
fn angular_average_of_transition_coupling_is_form_factor() {
    let (ell, kappa) = (0.6, 0.18);
    for q in [0.2, 1.0, 2.357, 4.0] {
        for a in 1..4 {
            let avg = sphere_average(|n| {
                let v = [n[0] * q, n[1] * q, n[2] * q];
                coupling_constant(v, ell, kappa, a, 0).unwrap().norm_sqr()
            });
            let expected = kappa * kappa * form_factor(q, ell);
            assert!((avg - expected).abs() < 1e-8 * expected.max(1e-300) + 1e-18, "q {q}: {avg} vs {expected}");
        }
    }
}

#[test]
fn channel_averages_match_sphere_quadrature() {
    let (ell, kappa) = (0.9, 0.3);
    for q in [0.5, 1.7, 3.0] {
        let deph = sphere_average(|n| coupling_constant([n[0] * q, n[1] * q, n[2] * q], ell, kappa, 0, 0).unwrap().norm_sqr());
        let sub = sphere_average(|n| coupling_constant([n[0] * q, n[1] * q, n[2] * q], ell, kappa, 1, 2).unwrap().norm_sqr());
        let d = CouplingChannel::Dephasing.angular_average(q, ell, kappa);
        let s = CouplingChannel::Sublevel.angular_average(q, ell, kappa);
        assert!((deph - d).abs() < 1e-12 * d);
        assert!((sub - s).abs() < 1e-10 * s);
    }
}

#[test]
fn exact_cross_form_factor_matches_sphere_quadrature() {
    let ell = 0.7;
    let m = ImpuritySite::new([0.0; 3], [0.0, 0.6, 0.8]).unwrap();
    let n = ImpuritySite::new([1.3, -0.4, 2.2], [1.0, 0.0, 0.0]).unwrap();
    let x = [-1.3, 0.4, -2.2];
    for q in [0.3, 1.1, 2.5] {
        // ⟨λ_m λ_n*⟩/κ² = (ℓ²/2) e^{−ℓ²q²/2} ⟨(q·d_m)(q·d_n) e^{iq·x}⟩.
        let avg = sphere_average(|u| {
            let qv = [u[0] * q, u[1] * q, u[2] * q];
            let dm = qv[0] * m.dipole()[0] + qv[1] * m.dipole()[1] + qv[2] * m.dipole()[2];
            let dn = qv[0] * n.dipole()[0] + qv[1] * n.dipole()[1] + qv[2] * n.dipole()[2];
            let phase = (qv[0] * x[0] + qv[1] * x[1] + qv[2] * x[2]).cos();
            dm * dn * phase
        });
        let expected = ell * ell / 2.0 * (-ell * ell * q * q / 2.0).exp() * avg;
        let got = cross_form_factor(q, &m, &n, ell);
        assert!((got - expected).abs() < 1e-10, "q {q}: {got} vs {expected}");
    }
}

#[test]
fn coincident_sites_reduce_to_single_impurity() {
    let point = solve_eos(0.0_f64).unwrap();
    let solver = ProbeSolver::new(point, 0.01);
    let probe = ProbeConfig::default_at(0.7).unwrap();
    let site = ImpuritySite::new([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
    let a = solver.spectral_density(0.7, &probe).unwrap();
    let b = solver.cross_spectral_density(0.7, &site, &site, &probe, CrossForm::FarField).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parallel_dipoles_along_separation_regression() {
    // Frozen from this implementation; the sign and size follow sinc(q_ν x).
    let point = solve_eos(0.0_f64).unwrap();
    let solver = ProbeSolver::new(point, 0.01);
    let probe = ProbeConfig::default_at(0.7).unwrap();
    let ell = probe.ell();
    let m = ImpuritySite::new([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
    let n = ImpuritySite::new([0.0, 0.0, 5.0 * ell], [0.0, 0.0, 1.0]).unwrap();
    let cross = solver.cross_spectral_density(0.7, &m, &n, &probe, CrossForm::FarField).unwrap();
    let own = solver.spectral_density(0.7, &probe).unwrap();
    println!("I_mn = {cross:.9e}, I_nn = {own:.9e}");
    assert!(cross.abs() > 1e-3 * own);
    assert!((cross - FROZEN_CROSS).abs() < 1e-4 * FROZEN_CROSS.abs());
}

const FROZEN_CROSS: f64 = 6.156_465_498e-7;

#[test]
fn dephasing_limit_matches_collective_route() {
    let point = solve_eos(0.0_f64).unwrap();
    let solver = ProbeSolver::new(point, 0.01);
    let probe = ProbeConfig::default_at(0.5).unwrap();
    let mut last = f64::INFINITY;
    for nu in [0.04, 0.02, 0.01] {
        let via_mode = 2.0 * PI * solver.delta_route_density(nu, &probe, CouplingChannel::Dephasing).unwrap();
        let limit = dephasing_rate(nu, &probe, &point);
        let dev = (via_mode / limit - 1.0).abs();
        assert!(dev < last, "deviation must shrink as ν → 0");
        last = dev;
    }
    assert!(last < 2e-3);
    assert!(dephasing_rate(1e-6, &probe, &point) < 1e-20);
}

#[test]
fn sublevel_transfer_scales_as_sixth_power_at_finite_temperature() {
    let point = solve_eos(0.0_f64).unwrap();
    let solver = ProbeSolver::new(point, 0.01);
    let probe = ProbeConfig::new(40.0 / 6.0, 0.18, 0.5, Beta::Finite(10.0)).unwrap();
    let (n1, n2) = (1e-3, 2e-3);
    let i1 = solver.delta_route_density(n1, &probe, CouplingChannel::Sublevel).unwrap();
    let i2 = solver.delta_route_density(n2, &probe, CouplingChannel::Sublevel).unwrap();
    let slope = (i2 / i1).ln() / (n2 / n1).ln();
    assert!((slope - 6.0).abs() < 0.05, "slope {slope}");
}

#[test]
fn probe_reports_hot_regime() {
    let point = solve_eos(0.0_f64).unwrap();
    let cold = ProbeConfig::new(40.0 / 6.0, 0.18, 0.5, Beta::Finite(100.0)).unwrap();
    let hot = ProbeConfig::new(40.0 / 6.0, 0.18, 0.5, Beta::Finite(1.0)).unwrap();
    assert!(!cold.too_hot(&point));
    assert!(hot.too_hot(&point));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn couplings_are_symmetric_and_bounded(
        qx in -3.0f64..3.0, qy in -3.0f64..3.0, qz in -3.0f64..3.0,
        ell in 0.1f64..2.0, g in 0usize..4, d in 0usize..4,
    ) {
        let q = [qx, qy, qz];
        let a = coupling_constant(q, ell, 1.0, g, d).unwrap();
        prop_assert_eq!(a, coupling_constant(q, ell, 1.0, d, g).unwrap());
        // |⟨γ|e^{iq·x}|δ⟩| ≤ 1 for normalised states.
        prop_assert!(a.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn form_factor_is_bounded(q in 0.0f64..50.0, ell in 0.01f64..10.0) {
        let f = form_factor(q, ell);
        prop_assert!(f >= 0.0 && f <= (-1f64).exp() / 3.0 + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectral_density_is_non_negative(inv in -0.5f64..1.0, x in 0.1f64..2.0) {
        let point = solve_eos(inv).unwrap();
        let solver = ProbeSolver::new(point, 0.01);
        let nu = x * point.theta0();
        let probe = ProbeConfig::default_at(nu).unwrap();
        prop_assert!(solver.spectral_density(nu, &probe).unwrap() >= 0.0);
    }
}
