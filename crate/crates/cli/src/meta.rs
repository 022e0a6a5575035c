//! Provenance headers for every emitted file: config hash, grid descriptor,
//! tolerances and seed. No timestamps, so identical runs produce identical
//! bytes.

use crate::config::SolverConfig;
use nlgm_core::Grid;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub config_sha256: String,
    pub seed: u64,
    pub grid: GridDesc,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridDesc {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub fixed_point: f64,
    pub residual: f64,
    pub linear: f64,
}

impl Meta {
    pub fn new(config_sha256: &str, seed: u64, grid: &Grid, solver: &SolverConfig) -> Meta {
        Meta {
            config_sha256: config_sha256.to_string(),
            seed,
            grid: GridDesc {
                dim: grid.dim(),
                half_width: grid.half_width(),
                n: grid.points_per_axis(),
                h: grid.spacing(),
            },
            tolerances: Tolerances {
                fixed_point: solver.tol,
                residual: solver.residual_tol,
                linear: nlgm_core::grid::LINEAR_TOL,
            },
        }
    }

    /// '#'-prefixed header lines for CSV files.
    pub fn csv_lines(&self) -> Vec<String> {
        vec![
            format!("config_sha256: {}", self.config_sha256),
            format!("seed: {}", self.seed),
            format!(
                "grid: N={} L={} n={} h={}",
                self.grid.dim, self.grid.half_width, self.grid.n, self.grid.h
            ),
            format!(
                "tolerances: fixed_point={} residual={} linear={}",
                self.tolerances.fixed_point, self.tolerances.residual, self.tolerances.linear
            ),
        ]
    }
}
