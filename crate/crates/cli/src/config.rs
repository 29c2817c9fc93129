//! Run configuration, loaded from TOML or JSON and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Inclusive arithmetic range `start, start + step, …, stop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    /// Values are snapped to 12 decimals so that `-2 + 17 * 0.1` comes out
    /// as the double nearest `-0.3`.
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Config(format!(
                "range needs finite start <= stop and step > 0, got {:?}",
                self
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            return Err(CliError::Config(format!("range {:?} has {n} points", self)));
        }
        Ok((0..n)
            .map(|i| snap(self.start + self.step * i as f64))
            .collect())
    }
}

fn snap(x: f64) -> f64 {
    let s = format!("{x:.12}");
    let v: f64 = s.parse().expect("formatted float");
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Named crossover scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanPreset {
    /// `{−0.31, −0.24, −0.11, 0}`: BCS side into unitarity.
    BcsUnitary,
    /// `{0.02, 0.08, 0.14, 0.20}`: unitarity towards the BEC side.
    UnitaryBec,
}

impl ScanPreset {
    pub fn values(self) -> Vec<f64> {
        match self {
            ScanPreset::BcsUnitary => vec![-0.31, -0.24, -0.11, 0.0],
            ScanPreset::UnitaryBec => vec![0.02, 0.08, 0.14, 0.20],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeBlock {
    /// Impurity to fermion mass ratio.
    pub mass_ratio: f64,
    /// Contact coupling in `E_F / k_F³`.
    pub kappa: f64,
    /// Trap frequencies as multiples of the pair-breaking gap.
    pub omega_a: RangeSpec,
    /// Inverse temperature in `1/E_F`; absent means zero temperature.
    pub beta: Option<f64>,
}

impl Default for ProbeBlock {
    fn default() -> Self {
        Self {
            mass_ratio: sfprobe::impurity::DEFAULT_MASS_RATIO,
            kappa: sfprobe::impurity::DEFAULT_KAPPA,
            omega_a: RangeSpec::new(0.2, 2.0, 0.05),
            beta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsBlock {
    /// Lorentzian broadening in `E_F`.
    pub epsilon: f64,
    /// Relative tolerance of the susceptibility integrals.
    pub chi_rel_tol: f64,
    /// Relative tolerance of the momentum integral behind `I(ν)`.
    pub probe_rel_tol: f64,
    /// Panel cap of the adaptive susceptibility quadrature.
    pub max_panels: usize,
    /// Broadenings for the convergence study in `validate`.
    pub epsilon_study: Vec<f64>,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            chi_rel_tol: 1e-6,
            probe_rel_tol: 1e-5,
            max_panels: 400,
            epsilon_study: vec![0.04, 0.02, 0.01, 0.005],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionBlock {
    /// Momenta in `k_F`.
    pub q: RangeSpec,
}

impl Default for DispersionBlock {
    fn default() -> Self {
        Self {
            q: RangeSpec::new(0.1, 4.0, 0.1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsfBlock {
    pub q: Vec<f64>,
    /// Frequencies in `E_F`.
    pub nu: RangeSpec,
}

impl Default for DsfBlock {
    fn default() -> Self {
        Self {
            q: vec![0.25, 0.5, 1.0, 2.0],
            nu: RangeSpec::new(0.05, 4.0, 0.05),
        }
    }
}

/// Physical density for lab-unit columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabBlock {
    /// Total fermion density, both spin states, in cm⁻³.
    pub density_cm3: f64,
    /// Fermion mass in atomic mass units (⁶Li by default).
    #[serde(default = "default_fermion_mass")]
    pub fermion_mass_amu: f64,
}

fn default_fermion_mass() -> f64 {
    6.015_122_887
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Explicit list of `1/k_F a` values.
    pub scan: Option<Vec<f64>>,
    /// Explicit range of `1/k_F a` values.
    pub scan_range: Option<RangeSpec>,
    pub scan_preset: Option<ScanPreset>,
    pub probe: ProbeBlock,
    pub numerics: NumericsBlock,
    pub output: OutputBlock,
    pub dispersion: DispersionBlock,
    pub dsf: DsfBlock,
    pub lab: Option<LabBlock>,
}

impl RunConfig {
    /// Reads TOML or JSON, chosen by extension (anything but `.json` is TOML).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        Ok(config)
    }

    /// Resolves the crossover scan, falling back to `default` when no source is given.
    pub fn scan_or(&self, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let sources = [self.scan.is_some(), self.scan_range.is_some(), self.scan_preset.is_some()];
        if sources.iter().filter(|&&s| s).count() > 1 {
            return Err(CliError::Config(
                "give at most one of scan, scan_range, scan_preset".into(),
            ));
        }
        let scan = if let Some(s) = &self.scan {
            s.clone()
        } else if let Some(r) = &self.scan_range {
            r.values()?
        } else if let Some(p) = self.scan_preset {
            p.values()
        } else {
            default.to_vec()
        };
        check_sorted("scan", &scan)?;
        Ok(scan)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("probe.mass_ratio", self.probe.mass_ratio),
            ("probe.kappa", self.probe.kappa),
            ("numerics.epsilon", self.numerics.epsilon),
            ("numerics.chi_rel_tol", self.numerics.chi_rel_tol),
            ("numerics.probe_rel_tol", self.numerics.probe_rel_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(b) = self.probe.beta {
            if !(b > 0.0) {
                return Err(CliError::Config(format!("probe.beta must be positive, got {b}")));
            }
        }
        if self.numerics.max_panels < 2 {
            return Err(CliError::Config("numerics.max_panels must be at least 2".into()));
        }
        if self.numerics.epsilon_study.is_empty() || self.numerics.epsilon_study.iter().any(|&e| !(e > 0.0)) {
            return Err(CliError::Config("numerics.epsilon_study needs positive values".into()));
        }
        if let Some(lab) = &self.lab {
            if !(lab.density_cm3 > 0.0 && lab.fermion_mass_amu > 0.0) {
                return Err(CliError::Config("lab density and mass must be positive".into()));
            }
        }
        let omega = self.probe.omega_a.values()?;
        if omega[0] <= 0.0 {
            return Err(CliError::Config("probe.omega_a must start above zero".into()));
        }
        let q = self.dispersion.q.values()?;
        if q[0] <= 0.0 {
            return Err(CliError::Config("dispersion.q must start above zero".into()));
        }
        check_sorted("dsf.q", &self.dsf.q)?;
        if self.dsf.q[0] <= 0.0 {
            return Err(CliError::Config("dsf.q must be positive".into()));
        }
        self.dsf.nu.values()?;
        self.scan_or(&[0.0])?;
        Ok(())
    }

    /// SHA-256 of the resolved configuration minus the output block, as
    /// lowercase hex, so identical physics hashes identically wherever it is written.
    pub fn hash(&self) -> String {
        let mut inputs = self.clone();
        inputs.output = OutputBlock::default();
        let canonical = serde_json::to_string(&inputs).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn check_sorted(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config(format!("{name} is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("{name} has non-finite entries")));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}
