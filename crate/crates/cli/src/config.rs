//! Configuration file schema and assembly into solver objects.
//!
//! Parsing is fail-closed: unknown keys anywhere in the file are errors, and
//! every admissibility hypothesis is checked at assembly time with an error
//! message naming the violated condition.

use crate::Failure;
use nlgm_core::{CoupledProblem, Envelope, Exponents, Field, Grid, Kernel, SolverOptions};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(rename = "N")]
    pub dim: usize,
    /// Box half-width; omit to derive it from the slowest envelope
    /// (exponential envelopes only).
    #[serde(rename = "L", default)]
    pub half_width: Option<f64>,
    pub n: usize,
    pub kernel: KernelConfig,
    pub exponents: ExponentsConfig,
    pub rho: RhoConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
pub enum KernelConfig {
    ExpPoly {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        theta: Option<f64>,
    },
    Power {
        alpha: f64,
        #[serde(default)]
        theta: Option<f64>,
    },
    Riesz {
        theta: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsConfig {
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub s: f64,
}

/// Basic production term: envelope rates (a, b) plus the two-sided scale
/// window [alpha, beta]. The concrete profile is
/// ρ(x) = Ψ_{a,b}(x) · (α+β)/2 · (1 + (β-α)/(β+α) · sin(Σ x_i)),
/// which reduces to α·Ψ when α = β.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub lambda_range: Option<RangeConfig>,
    #[serde(default)]
    pub mu_range: Option<RangeConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    /// Death-rate sweeps default to log spacing: the existence curve is
    /// linear in log-log coordinates.
    #[default]
    Log,
}

impl RangeConfig {
    pub fn values(&self) -> Result<Vec<f64>, Failure> {
        if self.count < 1 || !(self.min > 0.0) || !(self.max > self.min) {
            return Err(Failure::usage(format!(
                "range needs 0 < min < max and count >= 1, got [{}, {}] x {}",
                self.min, self.max, self.count
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.min]);
        }
        let k = self.count as f64 - 1.0;
        Ok((0..self.count)
            .map(|i| {
                let t = i as f64 / k;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub omega: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            tol: o.tol,
            residual_tol: o.residual_tol,
            max_iter: o.max_iter,
            omega: o.omega,
            inner_tol: o.inner_tol,
            inner_max_iter: o.inner_max_iter,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            residual_tol: self.residual_tol,
            max_iter: self.max_iter,
            omega: self.omega,
            inner_tol: self.inner_tol,
            inner_max_iter: self.inner_max_iter,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<String>,
    pub formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<String>,
    #[serde(default)]
    pub riesz: Option<RieszCheckConfig>,
    #[serde(default)]
    pub condition_e: Option<ConditionECheckConfig>,
    #[serde(default)]
    pub holder: Option<HolderCheckConfig>,
    #[serde(default)]
    pub sample_count: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszCheckConfig {
    pub theta: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionECheckConfig {
    pub b: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderCheckConfig {
    pub r: f64,
    #[serde(default = "default_pairs")]
    pub pair_count: usize,
}

fn default_pairs() -> usize {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub theta: f64,
    pub a: f64,
    pub m: f64,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub l_values: Option<Vec<f64>>,
    #[serde(default)]
    pub l_range: Option<RangeConfig>,
}

/// Raw config bytes plus the parsed structure (the bytes feed the file hash).
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::usage(format!("config parse error: {e}")))?;
    let sha256 = {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(&bytes);
        hex_string(&h.finalize())
    };
    Ok(LoadedConfig { config, sha256 })
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn exponents(&self) -> Result<Exponents, Failure> {
        let e = self.problem.exponents;
        Exponents::new(e.p, e.q, e.m, e.s).map_err(Failure::from)
    }

    pub fn kernel(&self) -> Result<Kernel, Failure> {
        let dim = self.problem.dim;
        let k = match self.problem.kernel {
            KernelConfig::ExpPoly { alpha, beta, theta } => match theta {
                Some(t) => Kernel::exp_poly_with_theta(alpha, beta, dim, t),
                None => Kernel::exp_poly(alpha, beta, dim),
            },
            KernelConfig::Power { alpha, theta } => match theta {
                Some(t) => Kernel::power_with_theta(alpha, dim, t),
                None => Kernel::power(alpha, dim),
            },
            KernelConfig::Riesz { theta } => Kernel::riesz(theta, dim),
        };
        k.map_err(Failure::from)
    }

    pub fn rho_envelope(&self) -> Result<Envelope, Failure> {
        Envelope::new(self.problem.rho.a, self.problem.rho.b).map_err(Failure::from)
    }

    /// Envelope of the inhibitor component: (am - theta)/(1+s) in the Riesz
    /// case, (am/(1+s), bm/(1+s)) otherwise.
    pub fn inhibitor_envelope(&self) -> Result<Envelope, Failure> {
        let e = self.problem.exponents;
        let rho = self.problem.rho;
        let theta = match self.problem.kernel {
            KernelConfig::Riesz { theta } => theta,
            _ => 0.0,
        };
        Envelope::new(
            (rho.a * e.m - theta).max(0.0) / (1.0 + e.s),
            rho.b * e.m / (1.0 + e.s),
        )
        .map_err(Failure::from)
    }

    /// Builds the grid: explicit L when configured, otherwise the half-width
    /// at which the slowest relevant envelope has decayed to 1e-8.
    pub fn grid(&self) -> Result<Grid, Failure> {
        let l = match self.problem.half_width {
            Some(l) => l,
            None => {
                let envs = [self.rho_envelope()?, self.inhibitor_envelope()?];
                if envs.iter().any(|e| !e.is_exponential() && e.a + e.b > 0.0) {
                    return Err(Failure::usage(
                        "power-decay envelopes never reach the 1e-8 truncation target; set L explicitly"
                            .into(),
                    ));
                }
                Grid::choose_half_width(&envs, 1e-8).ok_or_else(|| {
                    Failure::usage("cannot derive L for constant envelopes; set L explicitly".into())
                })?
            }
        };
        Grid::new(self.problem.dim, l, self.problem.n).map_err(Failure::from)
    }

    /// Samples the basic production term on the grid.
    pub fn rho_field(&self, grid: &Grid) -> Result<Field, Failure> {
        let rho = self.problem.rho;
        if !(rho.alpha > 0.0) || !(rho.beta >= rho.alpha) {
            return Err(Failure::usage(format!(
                "rho scale window needs 0 < alpha <= beta, got [{}, {}]",
                rho.alpha, rho.beta
            )));
        }
        let env = self.rho_envelope()?;
        let mid = 0.5 * (rho.alpha + rho.beta);
        let wobble = (rho.beta - rho.alpha) / (rho.beta + rho.alpha);
        Field::sample(grid, nlgm_core::BoundaryRule::Zero, |x| {
            let s: f64 = x.iter().sum();
            env.psi(x) * mid * (1.0 + wobble * s.sin())
        })
        .map_err(Failure::from)
    }

    /// Scalar rates, required by solve.
    pub fn scalar_rates(&self) -> Result<(f64, f64), Failure> {
        let rates = self.rates.as_ref().ok_or_else(|| {
            Failure::usage("this command needs a rates block with scalar lambda and mu".into())
        })?;
        match (rates.lambda, rates.mu) {
            (Some(l), Some(m)) => Ok((l, m)),
            _ => Err(Failure::usage(
                "this command needs scalar rates: set rates.lambda and rates.mu".into(),
            )),
        }
    }

    /// Sweep ranges, required by sweep.
    pub fn sweep_ranges(&self) -> Result<(Vec<f64>, Vec<f64>), Failure> {
        let rates = self.rates.as_ref().ok_or_else(|| {
            Failure::usage("sweep needs a rates block with lambda_range and mu_range".into())
        })?;
        match (&rates.lambda_range, &rates.mu_range) {
            (Some(lr), Some(mr)) => Ok((lr.values()?, mr.values()?)),
            _ => Err(Failure::usage(
                "sweep needs both rates.lambda_range and rates.mu_range".into(),
            )),
        }
    }

    /// Full problem assembly at the given rates.
    pub fn coupled_problem(&self, lambda: f64, mu: f64) -> Result<CoupledProblem, Failure> {
        let grid = self.grid()?;
        let rho = self.rho_field(&grid)?;
        CoupledProblem::assemble(
            self.exponents()?,
            self.kernel()?,
            grid,
            rho,
            self.rho_envelope()?,
            lambda,
            mu,
        )
        .map_err(Failure::from)
    }
}
