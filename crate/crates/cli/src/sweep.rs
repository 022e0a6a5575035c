//! (λ, μ) existence-map sweep: one solve attempt per grid cell, feasibility
//! gated by the planned constant system, results flushed row by row so an
//! interrupted sweep keeps its completed μ-rows.

use crate::config::LoadedConfig;
use crate::meta::Meta;
use crate::Failure;
use nlgm_core::{fixed_point_solve, Error as CoreError};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// One cell of the existence map. `converged` implies `feasible`: cells
/// rejected by the constant system are never solved.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub mu: f64,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: usize,
    pub residual_u: f64,
    pub residual_v: f64,
}

pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub frontier: Vec<(f64, Option<f64>)>,
}

/// Runs the sweep and writes existence_map.csv and frontier.csv.
/// Cells are computed in parallel within each μ-row; rows are emitted in
/// canonical (μ ascending, λ ascending) order and flushed as they finish.
pub fn cmd_sweep(loaded: &LoadedConfig, out_dir: &Path, seed: u64) -> Result<SweepSummary, Failure> {
    let cfg = &loaded.config;
    let (lambdas, mus) = cfg.sweep_ranges()?;

    // Fail fast on rate-independent problems (kernel admissibility, grid,
    // envelope gates) by assembling one probe cell before sweeping.
    let probe = cfg.coupled_problem(lambdas[0], mus[0])?;
    let meta = Meta::new(&loaded.sha256, seed, &probe.grid, &cfg.solver);
    let t_exponent = probe.exp.t;
    drop(probe);

    std::fs::create_dir_all(out_dir)?;
    let mut map_file = std::fs::File::create(out_dir.join("existence_map.csv"))?;
    for line in meta.csv_lines() {
        writeln!(map_file, "# {line}")?;
    }
    writeln!(map_file, "lambda,mu,feasible,converged,iterations,residual_u,residual_v")?;

    let opts = cfg.solver.options();
    let mut cells: Vec<SweepCell> = Vec::with_capacity(lambdas.len() * mus.len());
    for &mu in &mus {
        let row: Vec<SweepCell> = lambdas
            .par_iter()
            .map(|&lambda| solve_cell(cfg, lambda, mu, &opts))
            .collect::<Result<Vec<_>, Failure>>()?;
        for cell in &row {
            writeln!(
                map_file,
                "{},{},{},{},{},{},{}",
                cell.lambda,
                cell.mu,
                cell.feasible,
                cell.converged,
                cell.iterations,
                cell.residual_u,
                cell.residual_v
            )?;
        }
        map_file.flush()?;
        eprintln!(
            "mu = {mu}: {} of {} cells converged",
            row.iter().filter(|c| c.converged).count(),
            row.len()
        );
        cells.extend(row);
    }

    // frontier: smallest swept lambda with a converged cell, per mu
    let frontier: Vec<(f64, Option<f64>)> = mus
        .iter()
        .map(|&mu| {
            let star = cells
                .iter()
                .filter(|c| c.mu == mu && c.converged)
                .map(|c| c.lambda)
                .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a: f64| a.min(l))));
            (mu, star)
        })
        .collect();

    let mut frontier_file = std::fs::File::create(out_dir.join("frontier.csv"))?;
    for line in meta.csv_lines() {
        writeln!(frontier_file, "# {line}")?;
    }
    writeln!(
        frontier_file,
        "# diagnostic: loglog_slope is d(log lambda*)/d(log mu) between consecutive rows; \
         inv_t = 1/t with t = p(s+1)/q - m (no pass/fail attached)"
    )?;
    writeln!(frontier_file, "mu,lambda_star,loglog_slope,inv_t")?;
    let inv_t = 1.0 / t_exponent;
    let mut prev: Option<(f64, f64)> = None;
    for (mu, star) in &frontier {
        let slope = match (prev, star) {
            (Some((pmu, pstar)), Some(s)) => {
                format!("{}", (s.ln() - pstar.ln()) / (mu.ln() - pmu.ln()))
            }
            _ => String::new(),
        };
        match star {
            Some(s) => writeln!(frontier_file, "{mu},{s},{slope},{inv_t}")?,
            None => writeln!(frontier_file, "{mu},,,{inv_t}")?,
        }
        if let Some(s) = star {
            prev = Some((*mu, *s));
        }
    }

    Ok(SweepSummary { cells, frontier })
}

fn solve_cell(
    cfg: &crate::config::RunConfig,
    lambda: f64,
    mu: f64,
    opts: &nlgm_core::SolverOptions,
) -> Result<SweepCell, Failure> {
    let problem = cfg.coupled_problem(lambda, mu)?;
    if !problem.ledger.feasible {
        return Ok(SweepCell {
            lambda,
            mu,
            feasible: false,
            converged: false,
            iterations: 0,
            residual_u: f64::NAN,
            residual_v: f64::NAN,
        });
    }
    match fixed_point_solve(&problem, opts) {
        Ok(out) => Ok(SweepCell {
            lambda,
            mu,
            feasible: true,
            converged: out.report.converged,
            iterations: out.report.iterations,
            residual_u: out.report.residual_u,
            residual_v: out.report.residual_v,
        }),
        // a numerical stall inside one cell is sweep data, not a fatal error
        Err(CoreError::IterationLimit { .. }) => Ok(SweepCell {
            lambda,
            mu,
            feasible: true,
            converged: false,
            iterations: opts.max_iter,
            residual_u: f64::NAN,
            residual_v: f64::NAN,
        }),
        Err(e) => Err(e.into()),
    }
}
