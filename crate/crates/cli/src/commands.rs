//! Curve-producing subcommands.

use rayon::prelude::*;
use rayon::ThreadPool;

use sfprobe::dsf::{dsf, spectral_weight_smallq, Beta, ModeSolver};
use sfprobe::eos::{CrossoverPoint, EosSolver};
use sfprobe::impurity::{ProbeConfig, ProbeSolver};
use sfprobe::susceptibility::{ResponseSolver, SusceptibilitySettings};
use sfprobe::Error;

use crate::config::RunConfig;
use crate::curve::CurveFile;
use crate::lab::LabUnits;
use crate::{solver_error, CliError};

/// Resolved configuration plus the worker pool.
pub struct Run {
    pub config: RunConfig,
    pub hash: String,
    pool: ThreadPool,
}

impl Run {
    pub fn new(config: RunConfig, threads: Option<usize>) -> Result<Self, CliError> {
        config.validate()?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        let hash = config.hash();
        Ok(Self { config, hash, pool })
    }

    /// Order-preserving parallel map.
    pub fn map<T: Sync, R: Send>(
        &self,
        items: &[T],
        f: impl Fn(&T) -> Result<R, CliError> + Sync + Send,
    ) -> Result<Vec<R>, CliError> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    pub fn lab(&self) -> Option<LabUnits> {
        self.config.lab.as_ref().map(LabUnits::new)
    }

    pub fn beta(&self) -> Beta<f64> {
        self.config.probe.beta.map_or(Beta::Infinite, Beta::Finite)
    }

    pub fn chi_settings(&self) -> SusceptibilitySettings<f64> {
        SusceptibilitySettings {
            rel_tol: self.config.numerics.chi_rel_tol,
            abs_tol: 1e-12,
            max_panels: self.config.numerics.max_panels,
        }
    }

    pub fn probe_solver(&self, point: CrossoverPoint<f64>, epsilon: f64) -> ProbeSolver<f64> {
        ProbeSolver::with_settings(point, epsilon, self.chi_settings(), self.config.numerics.probe_rel_tol)
    }

    pub fn probe(&self, omega_a: f64) -> Result<ProbeConfig<f64>, CliError> {
        let p = &self.config.probe;
        ProbeConfig::new(p.mass_ratio, p.kappa, omega_a, self.beta()).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Cold-start solve of every scan point, so results do not depend on the thread count.
    pub fn solve_scan(&self, scan: &[f64]) -> Result<Vec<CrossoverPoint<f64>>, CliError> {
        let solver = EosSolver::<f64>::default();
        self.map(scan, |&inv| solver.solve(inv).map_err(|e| solver_error(inv, e)))
    }

    pub fn curve(&self, name: &str) -> CurveFile {
        let mut c = CurveFile::new(name);
        c.meta("config_hash", &self.hash);
        if let Some(lab) = &self.config.lab {
            c.meta("lab_density_cm3", lab.density_cm3);
            c.meta("lab_fermion_mass_amu", lab.fermion_mass_amu);
        }
        c
    }
}

/// File-name tag such as `inv+0.500`.
pub fn tag(inv_kfa: f64) -> String {
    format!("inv{:+.3}", inv_kfa)
}

fn point_meta(c: &mut CurveFile, p: &CrossoverPoint<f64>) {
    c.meta("inv_kfa", p.inv_kfa());
    c.meta("delta", p.delta());
    c.meta("mu", p.mu());
    c.meta("c_over_vf", p.c_over_vf());
    c.meta("theta0", p.theta0());
}

pub const DEFAULT_EOS_SCAN: (f64, f64, f64) = (-2.0, 2.0, 0.1);
pub const DEFAULT_CURVE_SCAN: [f64; 3] = [-0.5, 0.0, 1.0];

pub fn eos(run: &Run) -> Result<Vec<CurveFile>, CliError> {
    let (a, b, h) = DEFAULT_EOS_SCAN;
    let default = crate::config::RangeSpec::new(a, b, h).values()?;
    let scan = run.config.scan_or(&default)?;
    let points = run.solve_scan(&scan)?;
    let lab = run.lab();
    let mut c = run
        .curve("eos")
        .column("inv_kfa", "1")
        .column("delta", "E_F")
        .column("mu", "E_F")
        .column("c_over_vf", "v_F")
        .column("theta0", "E_F")
        .column("zeta", "1/k_F")
        .column("mu_bcs_asymptote", "E_F")
        .column("mu_bec_asymptote", "E_F")
        .column("c_bcs_asymptote", "v_F");
    if lab.is_some() {
        c = c
            .column("delta_hz", "Hz")
            .column("mu_hz", "Hz")
            .column("theta0_hz", "Hz")
            .column("c_mm_s", "mm/s")
            .column("zeta_nm", "nm");
    }
    for p in &points {
        let inv = p.inv_kfa();
        // Half the molecular binding energy, -1/(2 m a²).
        let bec = -inv * inv;
        let mut row = vec![
            inv,
            p.delta(),
            p.mu(),
            p.c_over_vf(),
            p.theta0(),
            p.zeta(),
            1.0,
            bec,
            1.0 / 3f64.sqrt(),
        ];
        if let Some(u) = lab {
            row.extend([u.hz(p.delta()), u.hz(p.mu()), u.hz(p.theta0()), u.mm_per_s(p.c_over_vf()), u.nm(p.zeta())]);
        }
        c.push(row);
    }
    let inc = |f: &dyn Fn(&CrossoverPoint<f64>) -> f64| points.windows(2).all(|w| f(&w[1]) > f(&w[0]));
    c.meta("delta_increasing", inc(&|p| p.delta()));
    c.meta("mu_decreasing", inc(&|p| -p.mu()));
    Ok(vec![c])
}

pub fn dispersion(run: &Run) -> Result<Vec<CurveFile>, CliError> {
    let scan = run.config.scan_or(&DEFAULT_CURVE_SCAN)?;
    let points = run.solve_scan(&scan)?;
    let qs = run.config.dispersion.q.values()?;
    let lab = run.lab();
    let mut out = Vec::new();
    for point in points {
        let inv = point.inv_kfa();
        let modes = ModeSolver::new(point);
        let samples = run.map(&qs, |&q| modes.dispersion(q).map_err(|e| solver_error(inv, e)))?;
        let mut c = run
            .curve(&format!("dispersion_{}", tag(inv)))
            .column("q", "k_F")
            .column("theta_q", "E_F")
            .column("omega_q", "E_F")
            .column("merged", "flag")
            .column("merged_q", "k_F")
            .column("weight", "1/E_F")
            .column("omega_smallq", "E_F")
            .column("weight_smallq", "1/E_F");
        if lab.is_some() {
            c = c
                .column("q_per_um", "1/um")
                .column("theta_q_hz", "Hz")
                .column("omega_q_hz", "Hz");
        }
        point_meta(&mut c, &point);
        let mut merged = Vec::new();
        for s in &samples {
            let q = s.q;
            let omega = s.omega().unwrap_or(f64::NAN);
            let weight = s.mode.map_or(f64::NAN, |m| m.weight);
            if s.is_merged() {
                merged.push(q);
            }
            let mut row = vec![
                q,
                s.theta_q,
                omega,
                if s.is_merged() { 1.0 } else { 0.0 },
                if s.is_merged() { q } else { f64::NAN },
                weight,
                point.c() * q,
                spectral_weight_smallq(q, &point),
            ];
            if let Some(u) = lab {
                row.extend([u.per_um(q), u.hz(s.theta_q), u.hz(omega)]);
            }
            c.push(row);
        }
        c.meta("merged_points", merged.len());
        c.meta(
            "merged_q_range",
            match (merged.first(), merged.last()) {
                (Some(a), Some(b)) => format!("{a}..{b}"),
                _ => "none".into(),
            },
        );
        out.push(c);
    }
    Ok(out)
}

pub fn dsf_grid(run: &Run) -> Result<Vec<CurveFile>, CliError> {
    let scan = run.config.scan_or(&[0.0])?;
    let points = run.solve_scan(&scan)?;
    let nus = run.config.dsf.nu.values()?;
    let grid: Vec<(f64, f64)> = run
        .config
        .dsf
        .q
        .iter()
        .flat_map(|&q| nus.iter().map(move |&nu| (q, nu)))
        .collect();
    let eps = run.config.numerics.epsilon;
    let beta = run.beta();
    let lab = run.lab();
    let mut out = Vec::new();
    for point in points {
        let inv = point.inv_kfa();
        let solver = ResponseSolver::with_settings(point, run.chi_settings());
        let values = run.map(&grid, |&(q, nu)| {
            dsf(&solver, q, nu, beta, eps)
                .map(|s| s.value)
                .map_err(|e| solver_error(inv, e))
        })?;
        let mut c = run
            .curve(&format!("dsf_{}", tag(inv)))
            .column("q", "k_F")
            .column("nu", "E_F")
            .column("theta_q", "E_F")
            .column("s", "k_F^3/E_F");
        if lab.is_some() {
            c = c.column("nu_hz", "Hz");
        }
        point_meta(&mut c, &point);
        c.meta("epsilon", eps);
        c.meta("beta", beta_label(beta));
        for (&(q, nu), &s) in grid.iter().zip(&values) {
            let mut row = vec![q, nu, point.pair_threshold(q), s];
            if let Some(u) = lab {
                row.push(u.hz(nu));
            }
            c.push(row);
        }
        out.push(c);
    }
    Ok(out)
}

pub fn beta_label(beta: Beta<f64>) -> String {
    match beta {
        Beta::Infinite => "infinite".into(),
        Beta::Finite(b) => b.to_string(),
    }
}

pub fn gamma(run: &Run) -> Result<Vec<CurveFile>, CliError> {
    let scan = run.config.scan_or(&DEFAULT_CURVE_SCAN)?;
    let points = run.solve_scan(&scan)?;
    let ratios = run.config.probe.omega_a.values()?;
    let eps = run.config.numerics.epsilon;
    let lab = run.lab();
    let mut out = Vec::new();
    for point in points {
        let inv = point.inv_kfa();
        let solver = run.probe_solver(point, eps);
        let rows = run.map(&ratios, |&r| {
            let probe = run.probe(r * point.theta0())?;
            let full = solver.decay_rate(&probe).map_err(|e| solver_error(inv, e))?;
            let coll = match solver.collective_decay_rate(&probe) {
                Ok(g) => g.gamma,
                Err(Error::NoModeAtFrequency { .. }) => f64::NAN,
                Err(e) => return Err(solver_error(inv, e)),
            };
            Ok((probe, full, coll))
        })?;
        let mut c = run
            .curve(&format!("gamma_{}", tag(inv)))
            .column("omega_a", "E_F")
            .column("omega_a_over_theta0", "1")
            .column("above_gap", "flag")
            .column("gamma", "E_F")
            .column("gamma_collective", "E_F")
            .column("ell", "1/k_F")
            .column("markov_length_ratio", "1")
            .column("markov_frequency_ratio", "1");
        if lab.is_some() {
            c = c
                .column("omega_a_hz", "Hz")
                .column("gamma_per_s", "1/s")
                .column("ell_nm", "nm");
        }
        point_meta(&mut c, &point);
        c.meta("epsilon", eps);
        c.meta("mass_ratio", run.config.probe.mass_ratio);
        c.meta("kappa", run.config.probe.kappa);
        c.meta("beta", beta_label(run.beta()));
        if let Some((probe, _, _)) = rows.first() {
            c.meta("too_hot", probe.too_hot(&point));
        }
        let mut markovian = true;
        for (&r, (probe, g, coll)) in ratios.iter().zip(&rows) {
            markovian &= g.is_markovian(0.1);
            let mut row = vec![
                probe.omega_a(),
                r,
                if probe.omega_a() >= point.theta0() { 1.0 } else { 0.0 },
                g.gamma,
                *coll,
                g.ell,
                g.markov_length_ratio,
                g.markov_frequency_ratio,
            ];
            if let Some(u) = lab {
                row.extend([u.hz(probe.omega_a()), u.per_second(g.gamma), u.nm(g.ell)]);
            }
            c.push(row);
        }
        c.meta("markovian", markovian);
        out.push(c);
    }
    Ok(out)
}
