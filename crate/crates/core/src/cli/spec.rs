use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::CliError;
use crate::channel::{db_to_linear, ChannelParams, DEFAULT_ORDER};
use crate::montecarlo::{McConfig, SamplingLaw, DEFAULT_SAMPLES};
use crate::secrecy::SecrecyConfig;
use crate::specfun::QuadratureSpec;

/// Result columns, in CSV order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodColumn {
    Closed,
    Quadrature,
    Asymptotic,
    Mc,
    Conventional,
}

impl MethodColumn {
    pub const ALL: [MethodColumn; 5] = [
        MethodColumn::Closed,
        MethodColumn::Quadrature,
        MethodColumn::Asymptotic,
        MethodColumn::Mc,
        MethodColumn::Conventional,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MethodColumn::Closed => "closed",
            MethodColumn::Quadrature => "quadrature",
            MethodColumn::Asymptotic => "asymptotic",
            MethodColumn::Mc => "mc",
            MethodColumn::Conventional => "conventional",
        }
    }
}

impl fmt::Display for MethodColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodColumn::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| format!("unknown method '{s}' (expected closed, quadrature, asymptotic, mc, conventional)"))
    }
}

/// The parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptVariable {
    DGammaBarDb,
    EGammaBarDb,
    RateRs,
    Mu,
}

impl SweptVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweptVariable::DGammaBarDb => "d_gamma_bar_db",
            SweptVariable::EGammaBarDb => "e_gamma_bar_db",
            SweptVariable::RateRs => "rate_rs",
            SweptVariable::Mu => "mu",
        }
    }
}

impl FromStr for SweptVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "d_gamma_bar_db" => Ok(SweptVariable::DGammaBarDb),
            "e_gamma_bar_db" => Ok(SweptVariable::EGammaBarDb),
            "rate_rs" => Ok(SweptVariable::RateRs),
            "mu" => Ok(SweptVariable::Mu),
            other => Err(format!(
                "unknown sweep variable '{other}' (expected d_gamma_bar_db, e_gamma_bar_db, rate_rs, mu)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    ExactGk,
    SurrogateMixture,
}

impl From<LawName> for SamplingLaw {
    fn from(law: LawName) -> Self {
        match law {
            LawName::ExactGk => SamplingLaw::ExactGk,
            LawName::SurrogateMixture => SamplingLaw::SurrogateMixture,
        }
    }
}

/// A run description: fixed parameters, at most one swept variable, and the
/// methods to evaluate. SNRs are in dB. Loaded from flat TOML whose keys are
/// the field names below.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub d_k: f64,
    pub d_m: u32,
    pub d_gamma_bar_db: f64,
    pub e_k: f64,
    pub e_m: u32,
    pub e_gamma_bar_db: f64,
    pub rate_rs: f64,
    pub mu: f64,
    #[serde(rename = "L")]
    pub order: usize,
    pub mc_samples: u64,
    pub seed: u64,
    /// Monte Carlo substreams; part of the reproducibility key with `seed`.
    pub workers: usize,
    pub law: LawName,
    pub quad_rel_tol: f64,
    pub methods: Vec<MethodColumn>,
    pub sweep: Option<SweptVariable>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub step: Option<f64>,
}

impl Default for SweepSpec {
    /// `k = 3`, `m = 2` on both links, main link at 20 dB, eavesdropper at 0 dB, `R_s = 1`, `mu = 3`.
    fn default() -> Self {
        Self {
            d_k: 3.0,
            d_m: 2,
            d_gamma_bar_db: 20.0,
            e_k: 3.0,
            e_m: 2,
            e_gamma_bar_db: 0.0,
            rate_rs: 1.0,
            mu: 3.0,
            order: DEFAULT_ORDER,
            mc_samples: DEFAULT_SAMPLES,
            seed: 1,
            workers: 8,
            law: LawName::ExactGk,
            quad_rel_tol: 1e-11,
            methods: vec![MethodColumn::Closed],
            sweep: None,
            start: None,
            end: None,
            step: None,
        }
    }
}

/// Fully resolved numbers for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSpec {
    pub swept_value: f64,
    pub d: ChannelParams,
    pub e: ChannelParams,
    pub secrecy: SecrecyConfig,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks the spec; `expect_sweep` selects between sweep and point runs.
    pub fn validate(&self, expect_sweep: bool) -> Result<(), CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Config("methods must name at least one method".into()));
        }
        if !(self.quad_rel_tol > 0.0) {
            return Err(CliError::Config("quad_rel_tol must be > 0".into()));
        }
        if expect_sweep {
            let Some(var) = self.sweep else {
                return Err(CliError::Config(
                    "a sweep needs exactly one swept variable (`sweep`)".into(),
                ));
            };
            let (Some(start), Some(end), Some(step)) = (self.start, self.end, self.step) else {
                return Err(CliError::Config(format!(
                    "sweep over {} needs start, end and step",
                    var.name()
                )));
            };
            if !(start < end) || !(step > 0.0) || !step.is_finite() {
                return Err(CliError::Config(format!(
                    "sweep range needs start < end and step > 0 (got {start}..{end} step {step})"
                )));
            }
        } else if self.sweep.is_some() {
            return Err(CliError::Config(
                "`point` evaluates a single point; remove `sweep`".into(),
            ));
        }
        // Parameter validation happens here, before anything is computed.
        for value in self.grid() {
            self.point(value)?;
        }
        Ok(())
    }

    /// Swept values in ascending order (the single fixed point when not sweeping).
    pub fn grid(&self) -> Vec<f64> {
        match (self.sweep, self.start, self.end, self.step) {
            (Some(_), Some(start), Some(end), Some(step)) if step > 0.0 && start < end => {
                let count = ((end - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| start + i as f64 * step).collect()
            }
            _ => vec![self.d_gamma_bar_db],
        }
    }

    /// Name of the first CSV column.
    pub fn swept_name(&self) -> &'static str {
        self.sweep.map_or("d_gamma_bar_db", |v| v.name())
    }

    pub fn point(&self, swept_value: f64) -> Result<PointSpec, CliError> {
        let mut d_db = self.d_gamma_bar_db;
        let mut e_db = self.e_gamma_bar_db;
        let mut rate = self.rate_rs;
        let mut mu = self.mu;
        match self.sweep {
            Some(SweptVariable::DGammaBarDb) | None => d_db = swept_value,
            Some(SweptVariable::EGammaBarDb) => e_db = swept_value,
            Some(SweptVariable::RateRs) => rate = swept_value,
            Some(SweptVariable::Mu) => mu = swept_value,
        }
        let d =
            ChannelParams::from_db(self.d_k, self.d_m, d_db).map_err(|e| CliError::Config(format!("d link: {e}")))?;
        let e =
            ChannelParams::from_db(self.e_k, self.e_m, e_db).map_err(|e| CliError::Config(format!("e link: {e}")))?;
        let secrecy = SecrecyConfig::new(rate, mu).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(PointSpec {
            swept_value,
            d,
            e,
            secrecy,
        })
    }

    pub fn mc_config(&self) -> Result<McConfig, CliError> {
        let mc = McConfig {
            samples: self.mc_samples,
            seed: self.seed,
            law: self.law.into(),
            workers: self.workers,
            mixture_order: self.order,
        };
        mc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(mc)
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec::relative(self.quad_rel_tol)
    }

    /// One-line description of the configuration, echoed on failures.
    pub fn describe(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(MethodColumn::name).collect();
        format!(
            "d=(k={}, m={}, {} dB) e=(k={}, m={}, {} dB) R_s={} mu={} L={} methods={}",
            self.d_k,
            self.d_m,
            self.d_gamma_bar_db,
            self.e_k,
            self.e_m,
            self.e_gamma_bar_db,
            self.rate_rs,
            self.mu,
            self.order,
            methods.join(",")
        )
    }

    /// dB to linear conversions used by this spec.
    pub fn unit_metadata(&self) -> String {
        let describe = |name: &str, fixed: f64, swept: bool| {
            let grid = self.grid();
            match (swept, grid.first(), grid.last()) {
                (true, Some(&lo), Some(&hi)) => {
                    format!("{name}={lo}..{hi} -> linear {}..{}", db_to_linear(lo), db_to_linear(hi))
                }
                _ => format!("{name}={fixed} -> linear {}", db_to_linear(fixed)),
            }
        };
        format!(
            "{}; {}",
            describe(
                "d_gamma_bar_db",
                self.d_gamma_bar_db,
                self.sweep == Some(SweptVariable::DGammaBarDb)
            ),
            describe(
                "e_gamma_bar_db",
                self.e_gamma_bar_db,
                self.sweep == Some(SweptVariable::EGammaBarDb)
            )
        )
    }
}
