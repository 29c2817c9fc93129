//! Consistency checks collected into a JSON report.

use serde::Serialize;

use sfprobe::dsf::{dsf, sum_rule_check, Beta, SumRule};
use sfprobe::impurity::{CrossForm, ImpuritySite};
use sfprobe::susceptibility::ResponseSolver;

use crate::commands::Run;
use crate::curve::UNITS_CONVENTION;
use crate::{solver_error, CliError};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest deviation found; `null` when the check could not run.
    pub measured: Option<f64>,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonSample {
    pub epsilon: f64,
    pub gamma: f64,
    /// Relative difference from the smallest broadening.
    pub change_from_finest: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub code_version: String,
    pub config_hash: String,
    pub units: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub epsilon_study: Vec<EpsilonSample>,
}

impl Report {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn check(name: &str, threshold: f64, result: Result<(f64, String), CliError>) -> Check {
    match result {
        Ok((measured, detail)) => Check {
            name: name.into(),
            passed: measured.is_finite() && measured < threshold,
            measured: Some(measured),
            threshold,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            measured: None,
            threshold,
            detail: e.to_string(),
        },
    }
}

const CROSSOVER: [f64; 3] = [-0.5, 0.0, 1.0];

fn identity(run: &Run) -> Result<(f64, String), CliError> {
    let points = run.solve_scan(&CROSSOVER)?;
    let eps = run.config.numerics.epsilon;
    let mut worst: f64 = 0.0;
    for p in points {
        let solver = ResponseSolver::with_settings(p, run.chi_settings());
        let grid: Vec<(f64, f64)> = [0.5, 1.5, 2.5]
            .iter()
            .flat_map(|&q| [0.3, 1.0, 2.5].map(|x| (q, x * p.theta0())))
            .collect();
        let gaps = run.map(&grid, |&(q, nu)| {
            solver.i11_identity_gap(q, nu, eps).map_err(|e| solver_error(p.inv_kfa(), e))
        })?;
        worst = gaps.into_iter().fold(worst, f64::max);
    }
    Ok((worst, "max relative gap over 27 (q, nu) points".into()))
}

fn sum_rule(run: &Run, rule: SumRule, epsilon: f64) -> Result<(f64, String), CliError> {
    let p = run.solve_scan(&[0.0])?[0];
    let solver = ResponseSolver::with_settings(p, run.chi_settings());
    let r = sum_rule_check(&solver, 0.05, rule, epsilon).map_err(|e| solver_error(0.0, e))?;
    Ok((
        r.deviation,
        format!("q = 0.05, epsilon = {epsilon}: integral {:.6e}, expected {:.6e}", r.integral, r.expected),
    ))
}

fn two_route(run: &Run) -> Result<(f64, String), CliError> {
    let p = run.solve_scan(&[1.0])?[0];
    let solver = run.probe_solver(p, run.config.numerics.epsilon);
    let devs = run.map(&[0.3, 0.6, 0.9], |&x| {
        let probe = run.probe(x * p.theta0())?;
        let full = solver.decay_rate(&probe).map_err(|e| solver_error(1.0, e))?;
        let coll = solver.collective_decay_rate(&probe).map_err(|e| solver_error(1.0, e))?;
        Ok((full.gamma / coll.gamma - 1.0).abs())
    })?;
    Ok((
        devs.into_iter().fold(0.0, f64::max),
        "1/k_F a = 1, omega_A/Theta0 in {0.3, 0.6, 0.9}".into(),
    ))
}

fn detailed_balance(run: &Run) -> Result<(f64, String), CliError> {
    let p = run.solve_scan(&[0.0])?[0];
    let solver = ResponseSolver::with_settings(p, run.chi_settings());
    let beta = run.config.probe.beta.unwrap_or(20.0);
    let eps = run.config.numerics.epsilon;
    let grid: Vec<(f64, f64)> = [0.5, 1.0, 2.0]
        .iter()
        .flat_map(|&q| [0.3, 1.0, 1.5, 3.0].map(|x| (q, x * p.theta0())))
        .collect();
    let pairs = run.map(&grid, |&(q, nu)| {
        let up = dsf(&solver, q, nu, Beta::Finite(beta), eps).map_err(|e| solver_error(0.0, e))?;
        let down = dsf(&solver, q, -nu, Beta::Finite(beta), eps).map_err(|e| solver_error(0.0, e))?;
        Ok((nu, up.value, down.value))
    })?;
    let mut worst: f64 = 0.0;
    for (nu, up, down) in pairs {
        if up < 0.0 || down < 0.0 {
            return Ok((f64::INFINITY, format!("negative S at nu = {nu}")));
        }
        if up > 0.0 {
            worst = worst.max((down / up / (-beta * nu).exp() - 1.0).abs());
        }
    }
    Ok((worst, format!("beta = {beta}, S(-nu)/S(nu) against exp(-beta nu) at 12 points")))
}

fn decoupling(run: &Run) -> Result<(f64, String), CliError> {
    let p = run.solve_scan(&[0.0])?[0];
    let solver = run.probe_solver(p, run.config.numerics.epsilon);
    let rows = run.map(&[0.3, 0.6, 0.9], |&x| {
        let probe = run.probe(x * p.theta0())?;
        let b = 20.0 * probe.ell();
        let z = [0.0, 0.0, 1.0];
        let site = |pos| ImpuritySite::new(pos, z).map_err(|e| CliError::Config(e.to_string()));
        let m = site([0.0, 0.0, 0.0])?;
        let n = site([b, 0.0, 0.0])?;
        let nu = probe.omega_a();
        let err = |e| solver_error(0.0, e);
        let own = solver.spectral_density(nu, &probe).map_err(err)?;
        let far = solver.cross_spectral_density(nu, &m, &n, &probe, CrossForm::FarField).map_err(err)?;
        let exact = solver.cross_spectral_density(nu, &m, &n, &probe, CrossForm::Exact).map_err(err)?;
        Ok((far.abs() / own, exact.abs() / own))
    })?;
    let far = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let exact = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((
        far,
        format!("b = 20 ell, dipoles normal to the plane; exact angular form gives {exact:.3e}"),
    ))
}

/// Γ at unitarity, `ω_A = 1.5 Θ₀`, for each broadening.
fn epsilon_study(run: &Run) -> Result<Vec<EpsilonSample>, CliError> {
    let p = run.solve_scan(&[0.0])?[0];
    let probe = run.probe(1.5 * p.theta0())?;
    let mut eps = run.config.numerics.epsilon_study.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let gammas = run.map(&eps, |&e| {
        run.probe_solver(p, e)
            .decay_rate(&probe)
            .map(|g| g.gamma)
            .map_err(|err| solver_error(0.0, err))
    })?;
    let finest = *gammas.last().expect("non-empty study");
    Ok(eps
        .iter()
        .zip(&gammas)
        .map(|(&epsilon, &gamma)| EpsilonSample {
            epsilon,
            gamma,
            change_from_finest: (gamma / finest - 1.0).abs(),
        })
        .collect())
}

/// The working broadening is adequate if halving it moves Γ by under 5%.
fn halving(run: &Run) -> Result<(f64, String), CliError> {
    let p = run.solve_scan(&[0.0])?[0];
    let probe = run.probe(1.5 * p.theta0())?;
    let eps = run.config.numerics.epsilon;
    let g = run.map(&[eps, eps / 2.0], |&e| {
        run.probe_solver(p, e)
            .decay_rate(&probe)
            .map(|g| g.gamma)
            .map_err(|err| solver_error(0.0, err))
    })?;
    Ok((
        (g[0] / g[1] - 1.0).abs(),
        format!("unitarity, omega_A = 1.5 Theta0: Gamma {:.6e} at epsilon = {eps}, {:.6e} at {}", g[0], g[1], eps / 2.0),
    ))
}

pub fn run_checks(run: &Run) -> Result<Report, CliError> {
    let eps = run.config.numerics.epsilon;
    let mut checks = vec![
        check("i11_identity", 1e-6, identity(run)),
        check("f_sum_rule", 0.03, sum_rule(run, SumRule::FSum, eps)),
        check("compressibility_sum_rule", 0.05, sum_rule(run, SumRule::Compressibility, eps / 10.0)),
        check("two_route_gamma", 0.05, two_route(run)),
        check("detailed_balance", 0.01, detailed_balance(run)),
        check("multi_impurity_decoupling", 1e-3, decoupling(run)),
    ];
    let study = epsilon_study(run);
    let samples = study.as_ref().map(|s| s.clone()).unwrap_or_default();
    checks.push(check("epsilon_convergence", 0.05, halving(run)));
    if let Err(e) = study {
        checks.push(check("epsilon_study", 0.0, Err(e)));
    }
    Ok(Report {
        code_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: run.hash.clone(),
        units: UNITS_CONVENTION.into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        epsilon_study: samples,
    })
}
