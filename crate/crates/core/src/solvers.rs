//! The singular scalar solver (damped monotone iteration between explicit
//! sub/super-solutions) and the coupled fixed-point solver for the full
//! activator–inhibitor system.
//!
//! The discrete comparison principle of the Helmholtz operator makes the
//! envelope-trapping argument exact on the grid: with ratio constants
//! measured on the same grid, the de-coupled map sends the invariant window
//! into itself up to linear-solver noise. Iterates are therefore also
//! clipped to their windows, and the pre-clip membership history is what
//! `SolveReport::in_envelope` records.

use crate::analytic::{planned_constants, ConstantLedger, Envelope, Exponents, Kernel, RatioBounds};
use crate::convolve::{build_table, KernelTable};
use crate::error::{Error, Result};
use crate::grid::{helmholtz_solve, BoundaryRule, Field, Grid};
use crate::verify::fit_decay;
use serde::Serialize;

/// Barrier scales for the singular problem: d = (c1/(2μ))^{1/(1+s)} and
/// D = (2c2/μ)^{1/(1+s)}; always d <= D.
pub fn sub_super_constants(c_lo: f64, c_hi: f64, mu: f64, s: f64) -> (f64, f64) {
    let e = 1.0 / (1.0 + s);
    ((c_lo / (2.0 * mu)).powf(e), (2.0 * c_hi / mu).powf(e))
}

/// The singular scalar problem (-Δ + μ)w = K/w^s with K trapped between
/// c_lo·Ψ_env and c_hi·Ψ_env nodewise.
pub struct SingularProblem {
    pub mu: f64,
    pub s: f64,
    pub k_field: Field,
    pub env: Envelope,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl SingularProblem {
    /// Measures the trapping constants of K against Ψ_env over all nodes.
    pub fn from_measured(mu: f64, s: f64, k_field: Field, env: Envelope) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!("s = {s} must be nonnegative")));
        }
        if !(k_field.min_value() > 0.0) {
            return Err(Error::domain("K must be strictly positive nodewise"));
        }
        let grid = *k_field.grid();
        let psi = Field::sample(&grid, BoundaryRule::Zero, |x| env.psi(x))?;
        let (c_lo, c_hi) = k_field.ratio_bounds_over(&psi, None)?;
        let threshold = env.mu_threshold(s, grid.dim());
        if !(mu > threshold) {
            return Err(Error::hypothesis(format!(
                "mu = {mu} must exceed the singular-problem threshold \
                 max(2a/(1+s) + 2((a+b)/(1+s))^2, N(a+b)/(1+s)) = {threshold}"
            )));
        }
        Ok(SingularProblem { mu, s, k_field, env, c_lo, c_hi })
    }

    /// Decay class of the solution: Ψ_{a/(1+s), b/(1+s)}.
    pub fn solution_envelope(&self) -> Envelope {
        self.env.scaled_by(1.0 / (1.0 + self.s))
    }
}

/// Result of a singular solve.
#[derive(Debug)]
pub struct SingularOutcome {
    pub w: Field,
    pub iterations: usize,
    pub residual: f64,
    /// Nodes clipped on the final iterate (beyond floating-point dust).
    pub final_clip_events: usize,
    /// Converged while the final iterate still pressed a barrier.
    pub converged_on_boundary: bool,
    pub omega_final: f64,
}

/// Checks that the closed-form sandwich survives discretization:
/// (rate/2)·Ψ <= (-Δ_h + rate)·Ψ <= 2·rate·Ψ at every node. Fails when the
/// grid is too coarse for the envelope or the rate sits too close to its
/// threshold.
pub fn check_discrete_sandwich(grid: &Grid, env: &Envelope, rate: f64) -> Result<()> {
    let psi = Field::sample(grid, BoundaryRule::EnvelopeTrace { env: *env, scale: 1.0 }, |x| {
        env.psi(x)
    })?;
    let lap = psi.laplacian();
    for i in 0..grid.total_points() {
        let h_psi = -lap.values()[i] + rate * psi.values()[i];
        let lo = 0.5 * rate * psi.values()[i];
        let hi = 2.0 * rate * psi.values()[i];
        let slack = 1e-12 * rate * psi.values()[i];
        if h_psi < lo - slack || h_psi > hi + slack {
            return Err(Error::hypothesis(format!(
                "discrete envelope sandwich fails at node {i} (rate {rate}, envelope ({}, {})): \
                 the grid is too coarse or the rate too close to its threshold",
                env.a, env.b
            )));
        }
    }
    Ok(())
}

/// Damped monotone iteration for the singular problem, starting from the
/// super-solution D·Ψ and clipping every iterate into [d·Ψ, D·Ψ]:
///
///   w_{k+1} = clip((1-ω) w_k + ω·solve(μ, K/w_k^s), [dΨ, DΨ]).
///
/// Stops when the relative max-norm residual of the discrete equation drops
/// to `tol`. The damping halves itself (down to 0.1) when the residual
/// oscillates by more than 2x between iterations.
pub fn solve_singular(
    prob: &SingularProblem,
    omega: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SingularOutcome> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::domain(format!("damping must satisfy 0 < omega <= 1, got {omega}")));
    }
    let grid = *prob.k_field.grid();
    let env_w = prob.solution_envelope();
    check_discrete_sandwich(&grid, &env_w, prob.mu)?;
    let (d, big_d) = sub_super_constants(prob.c_lo, prob.c_hi, prob.mu, prob.s);
    let boundary = BoundaryRule::EnvelopeTrace { env: env_w, scale: d };
    let psi = Field::sample(&grid, BoundaryRule::Zero, |x| env_w.psi(x))?;

    // s = 0 is linear: a single undamped solve lands on the fixed point
    let mut omega = if prob.s == 0.0 { 1.0 } else { omega };
    let mut w = psi.map(boundary, |p| big_d * p)?;
    let mut prev_residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let rhs = nonlinear_rhs(&prob.k_field, &w, prob.s)?;
        let solved = helmholtz_solve(prob.mu, &rhs, boundary)?;
        let mixed: Vec<f64> = w
            .values()
            .iter()
            .zip(solved.values())
            .map(|(&old, &new)| (1.0 - omega) * old + omega * new)
            .collect();
        let (clipped, clip_events) = clip_to_window(&grid, boundary, &mixed, d, big_d, &psi)?;
        let rhs_now = nonlinear_rhs(&prob.k_field, &clipped, prob.s)?;
        let residual = equation_residual(prob.mu, &clipped, &rhs_now);
        w = clipped;
        if residual <= tol {
            return Ok(SingularOutcome {
                w,
                iterations: iter,
                residual,
                final_clip_events: clip_events,
                converged_on_boundary: clip_events > 0,
                omega_final: omega,
            });
        }
        if residual > 2.0 * prev_residual && omega > 0.1 {
            omega = (0.5 * omega).max(0.1);
        }
        prev_residual = residual;
    }
    Err(Error::IterationLimit {
        what: "singular sub/super-solution iteration".into(),
        residual: prev_residual,
    })
}

fn nonlinear_rhs(k_field: &Field, w: &Field, s: f64) -> Result<Field> {
    if s == 0.0 {
        return Ok(k_field.clone());
    }
    k_field.zip_with(w, BoundaryRule::Zero, |k, wv| k / wv.powf(s))
}

/// Relative max-norm residual ‖(-Δ_h+μ)w - rhs‖_∞ / ‖rhs‖_∞, ghosts from
/// the field's own boundary rule.
fn equation_residual(mu: f64, w: &Field, rhs: &Field) -> f64 {
    let lap = w.laplacian();
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..rhs.values().len() {
        let lhs = -lap.values()[i] + mu * w.values()[i];
        num = num.max((lhs - rhs.values()[i]).abs());
        den = den.max(rhs.values()[i].abs());
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Clips values into [lo·Ψ, hi·Ψ]; counts clips larger than relative dust.
fn clip_to_window(
    grid: &Grid,
    boundary: BoundaryRule,
    values: &[f64],
    lo: f64,
    hi: f64,
    psi: &Field,
) -> Result<(Field, usize)> {
    let mut events = 0usize;
    let mut out = Vec::with_capacity(values.len());
    for (&v, &p) in values.iter().zip(psi.values()) {
        let floor = lo * p;
        let ceil = hi * p;
        let c = v.clamp(floor, ceil);
        if (c - v).abs() > 1e-12 * ceil {
            events += 1;
        }
        out.push(c);
    }
    Ok((Field::from_values(grid, boundary, out)?, events))
}

/// The assembled coupled problem: validated exponents, kernel table,
/// measured ratio constants and the planned envelope windows.
pub struct CoupledProblem {
    pub exp: Exponents,
    pub kernel: Kernel,
    pub grid: Grid,
    pub rho: Field,
    pub rho_env: Envelope,
    pub lambda: f64,
    pub mu: f64,
    pub ledger: ConstantLedger,
    pub table: KernelTable,
    psi_u: Field,
    psi_v: Field,
    env_conv_p: Envelope,
    env_conv_m: Envelope,
    psi_conv_p: Field,
    psi_conv_m: Field,
}

impl CoupledProblem {
    /// Validates every admissibility hypothesis, measures the ratio
    /// constants on the grid (ρ against Ψ_{a,b}; direct-path convolutions of
    /// the powered envelopes against their reproduction classes) and plans
    /// the constant system.
    pub fn assemble(
        exp: Exponents,
        kernel: Kernel,
        grid: Grid,
        rho: Field,
        rho_env: Envelope,
        lambda: f64,
        mu: f64,
    ) -> Result<Self> {
        if exp.sigma > 1.0 {
            return Err(Error::hypothesis(format!(
                "sigma = {:.6} > 1 violates the anti-Turing condition sigma <= 1",
                exp.sigma
            )));
        }
        if kernel.dim != grid.dim() {
            return Err(Error::domain("kernel/grid dimension mismatch"));
        }
        if rho.grid() != &grid {
            return Err(Error::domain("rho must live on the problem grid"));
        }
        if !(rho.min_value() > 0.0) {
            return Err(Error::domain("basic production rho must be positive"));
        }
        let n = grid.dim() as f64;
        let (a, b) = (rho_env.a, rho_env.b);
        let max_mp = exp.m.max(exp.p);
        let min_mp = exp.m.min(exp.p);
        let riesz_theta = match kernel.family {
            crate::analytic::KernelFamily::ExpPoly { beta, .. } => {
                if !((a + b) * max_mp < beta) {
                    return Err(Error::hypothesis(format!(
                        "(a+b)*max(m,p) = {} must stay below the kernel margin M_J = {beta} \
                         for the convolution to reproduce the powered envelopes",
                        (a + b) * max_mp
                    )));
                }
                None
            }
            crate::analytic::KernelFamily::Power { .. } => {
                if b != 0.0 {
                    return Err(Error::hypothesis(
                        "power-kernel runs require a pure power envelope (b = 0)",
                    ));
                }
                let lower = (kernel.theta - 1.0).max(0.0) / min_mp;
                let upper = n / max_mp;
                if !(a > lower && a < upper) {
                    return Err(Error::hypothesis(format!(
                        "power envelope exponent a = {a} must lie in \
                         (max(theta-1,0)/min(m,p), N/max(m,p)) = ({lower}, {upper})"
                    )));
                }
                None
            }
            crate::analytic::KernelFamily::Riesz { theta } => {
                if b != 0.0 {
                    return Err(Error::hypothesis(
                        "riesz-kernel runs require a pure power envelope (b = 0)",
                    ));
                }
                if a * min_mp <= theta {
                    return Err(Error::hypothesis(format!(
                        "a <= theta/min(m,p): a = {a}, theta = {theta}; the activator \
                         convolution diverges and no positive solution exists in this regime"
                    )));
                }
                let ledger = crate::analytic::exponent_ledger(&rho_env, &exp, grid.dim(), Some(theta))?;
                if let Some(fail) = ledger.first_failure() {
                    return Err(Error::hypothesis(format!(
                        "riesz exponent bookkeeping fails: {}",
                        fail.name
                    )));
                }
                Some(theta)
            }
        };

        let psi_u = Field::sample(&grid, BoundaryRule::Zero, |x| rho_env.psi(x))?;
        let (rho_lo, rho_hi) = rho.ratio_bounds_over(&psi_u, None)?;

        let table = build_table(&kernel, &grid)?;
        let env_in_p = rho_env.scaled_by(exp.p);
        let env_in_m = rho_env.scaled_by(exp.m);
        let env_conv_p = kernel.conv_envelope(&env_in_p)?;
        let env_conv_m = kernel.conv_envelope(&env_in_m)?;
        let (c1, cc1) = measure_conv_ratio(&table, &env_in_p, &env_conv_p)?;
        let (c2, cc2) = measure_conv_ratio(&table, &env_in_m, &env_conv_m)?;

        let ratios = RatioBounds {
            rho_inf: rho_lo,
            rho_sup: rho_hi,
            conv_p_inf: c1,
            conv_p_sup: cc1,
            conv_m_inf: c2,
            conv_m_sup: cc2,
        };
        let ledger =
            planned_constants(&exp, &rho_env, &ratios, lambda, mu, grid.dim(), riesz_theta)?;
        let env_v = ledger.inhibitor_envelope();
        let psi_v = Field::sample(&grid, BoundaryRule::Zero, |x| env_v.psi(x))?;
        let psi_conv_p = Field::sample(&grid, BoundaryRule::Zero, |x| env_conv_p.psi(x))?;
        let psi_conv_m = Field::sample(&grid, BoundaryRule::Zero, |x| env_conv_m.psi(x))?;

        Ok(CoupledProblem {
            exp,
            kernel,
            grid,
            rho,
            rho_env,
            lambda,
            mu,
            ledger,
            table,
            psi_u,
            psi_v,
            env_conv_p,
            env_conv_m,
            psi_conv_p,
            psi_conv_m,
        })
    }

    pub fn inhibitor_envelope(&self) -> Envelope {
        self.ledger.inhibitor_envelope()
    }

    /// Decay class of J * u^p (reproduction class of the activator term).
    pub fn activator_conv_envelope(&self) -> Envelope {
        self.env_conv_p
    }

    /// Decay class of J * u^m (the data class of the inhibitor equation).
    pub fn inhibitor_conv_envelope(&self) -> Envelope {
        self.env_conv_m
    }
}

/// inf/sup of conv(Ψ_in)/Ψ_out, restricted to nodes where the comparison
/// envelope is large enough for the quotient to be numerically meaningful.
fn measure_conv_ratio(
    table: &KernelTable,
    env_in: &Envelope,
    env_out: &Envelope,
) -> Result<(f64, f64)> {
    let grid = table.grid();
    let f = Field::sample(grid, BoundaryRule::Zero, |x| env_in.psi(x))?;
    let conv = table.conv(&f)?;
    let psi_out = Field::sample(grid, BoundaryRule::Zero, |x| env_out.psi(x))?;
    let floor = 1e-13 * psi_out.max_value();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..grid.total_points() {
        let p = psi_out.values()[i];
        if p < floor {
            continue;
        }
        let q = conv.values()[i] / p;
        if !(q > 0.0) {
            return Err(Error::domain(format!(
                "measured convolution ratio is not positive at node {i}"
            )));
        }
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Ok((lo, hi))
}

/// One application of the de-coupled map.
pub struct MapOutcome {
    pub u: Field,
    pub v: Field,
    /// Pre-clip membership of Tu (resp. Tv) in its envelope window,
    /// tolerating linear-solver noise.
    pub u_in_window: bool,
    pub v_in_window: bool,
    pub singular_iterations: usize,
    pub singular_residual: f64,
}

/// Solver knobs; the defaults match the tolerances used throughout.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions {
    /// Fixed-point stop: successive relative sup-change of both components.
    pub tol: f64,
    /// Acceptance threshold for the full-system equation residuals.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Damping for the inner singular iteration.
    pub omega: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            residual_tol: 1e-5,
            max_iter: 200,
            omega: 0.7,
            inner_tol: 1e-8,
            inner_max_iter: 400,
        }
    }
}

/// Membership slack absorbing accumulated linear-solver noise: the window
/// checks are exact up to 1e-7 of the window's top scale.
fn window_atol(hi: f64) -> f64 {
    1e-7 * hi
}

fn in_window(values: &[f64], lo: f64, hi: f64, psi: &Field, atol: f64) -> bool {
    values
        .iter()
        .zip(psi.values())
        .all(|(&v, &p)| v >= lo * p - atol && v <= hi * p + atol)
}

/// Tu = solve(λ, conv(J,u^p)/v^q + ρ) with the sub-solution trace as ghost
/// data; Tv = singular solve with K = conv(J,u^m). Convolutions are clamped
/// into their proven two-sided windows (derived from the measured constants
/// and the current ratio range of u), which pushes floating-point noise in
/// the far field back inside the envelope scale.
pub fn decoupled_map(
    prob: &CoupledProblem,
    u: &Field,
    v: &Field,
    opts: &SolverOptions,
) -> Result<MapOutcome> {
    let led = &prob.ledger;
    let exp = &prob.exp;
    let (r_lo, r_hi) = u.ratio_bounds_over(&prob.psi_u, None)?;
    if !(r_lo > 0.0) {
        return Err(Error::domain("activator iterate must stay positive"));
    }
    if !(v.min_value() > 0.0) {
        return Err(Error::domain("inhibitor iterate must stay positive"));
    }

    // activator equation
    let u_pow_p = u.map(BoundaryRule::Zero, |x| x.powf(exp.p))?;
    let conv_p = prob.table.conv(&u_pow_p)?;
    let kp = clamp_to_envelope(
        &conv_p,
        led.ratios.conv_p_inf * r_lo.powf(exp.p),
        led.ratios.conv_p_sup * r_hi.powf(exp.p),
        &prob.psi_conv_p,
    )?;
    let rhs_u = kp.zip_with(v, BoundaryRule::Zero, |k, vv| k / vv.powf(exp.q))?;
    let rhs_u = rhs_u.zip_with(&prob.rho, BoundaryRule::Zero, |x, r| x + r)?;
    let u_boundary = BoundaryRule::EnvelopeTrace { env: prob.rho_env, scale: led.u_lo };
    let tu = helmholtz_solve(prob.lambda, &rhs_u, u_boundary)?;
    let atol_u = window_atol(led.u_hi);
    let u_in_window = in_window(tu.values(), led.u_lo, led.u_hi, &prob.psi_u, atol_u);
    let (tu, _) = clip_to_window(&prob.grid, u_boundary, tu.values(), led.u_lo, led.u_hi, &prob.psi_u)?;

    // inhibitor equation
    let u_pow_m = u.map(BoundaryRule::Zero, |x| x.powf(exp.m))?;
    let conv_m = prob.table.conv(&u_pow_m)?;
    let km = clamp_to_envelope(
        &conv_m,
        led.ratios.conv_m_inf * r_lo.powf(exp.m),
        led.ratios.conv_m_sup * r_hi.powf(exp.m),
        &prob.psi_conv_m,
    )?;
    let sp = SingularProblem::from_measured(prob.mu, exp.s, km, prob.env_conv_m)?;
    let sing = solve_singular(&sp, opts.omega, opts.inner_tol, opts.inner_max_iter)?;
    let env_v = led.inhibitor_envelope();
    let atol_v = window_atol(led.v_hi);
    let v_in_window = in_window(sing.w.values(), led.v_lo, led.v_hi, &prob.psi_v, atol_v);
    let v_boundary = BoundaryRule::EnvelopeTrace { env: env_v, scale: led.v_lo };
    let (tv, _) =
        clip_to_window(&prob.grid, v_boundary, sing.w.values(), led.v_lo, led.v_hi, &prob.psi_v)?;

    Ok(MapOutcome {
        u: tu,
        v: tv,
        u_in_window,
        v_in_window,
        singular_iterations: sing.iterations,
        singular_residual: sing.residual,
    })
}

fn clamp_to_envelope(f: &Field, lo: f64, hi: f64, psi: &Field) -> Result<Field> {
    f.zip_with(psi, BoundaryRule::Zero, |v, p| v.clamp(lo * p, hi * p))
}

/// Outcome record of a coupled fixed-point run. Serializes with exactly the
/// documented field names.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_u: f64,
    pub residual_v: f64,
    /// Window membership of the (pre-clip) map output, one entry per
    /// iteration.
    pub in_envelope: Vec<bool>,
    pub fitted_decay_u: (f64, f64),
    pub fitted_decay_v: (f64, f64),
    pub constants: ConstantLedger,
}

/// A finished run: the report plus the final fields.
#[derive(Debug)]
pub struct FixedPointOutcome {
    pub report: SolveReport,
    pub u: Field,
    pub v: Field,
}

/// Picard iteration of the de-coupled map from the geometric midpoint of the
/// envelope windows. Convergence means: successive relative sup-changes of
/// both components at most `tol`, full-system residuals at most
/// `residual_tol`, and the final iterate inside the invariant window.
/// Non-convergence is reported as data (converged = false), not an error.
pub fn fixed_point_solve(prob: &CoupledProblem, opts: &SolverOptions) -> Result<FixedPointOutcome> {
    let led = &prob.ledger;
    if !led.feasible {
        return Err(Error::hypothesis(format!(
            "constant system infeasible at lambda = {}, mu = {}: {}",
            prob.lambda,
            prob.mu,
            led.infeasible_reason.as_deref().unwrap_or("unspecified")
        )));
    }
    check_discrete_sandwich(&prob.grid, &prob.rho_env, prob.lambda)?;
    check_discrete_sandwich(&prob.grid, &led.inhibitor_envelope(), prob.mu)?;

    let u_boundary = BoundaryRule::EnvelopeTrace { env: prob.rho_env, scale: led.u_lo };
    let v_boundary = BoundaryRule::EnvelopeTrace { env: led.inhibitor_envelope(), scale: led.v_lo };
    let u0 = (led.u_lo * led.u_hi).sqrt();
    let v0 = (led.v_lo * led.v_hi).sqrt();
    let mut u = prob.psi_u.map(u_boundary, |p| u0 * p)?;
    let mut v = prob.psi_v.map(v_boundary, |p| v0 * p)?;

    let mut in_envelope = Vec::new();
    let mut iterations = 0usize;
    let mut settled = false;
    for k in 1..=opts.max_iter {
        let out = decoupled_map(prob, &u, &v, opts)?;
        let du = rel_sup_change(&u, &out.u);
        let dv = rel_sup_change(&v, &out.v);
        in_envelope.push(out.u_in_window && out.v_in_window);
        u = out.u.with_boundary(u_boundary);
        v = out.v.with_boundary(v_boundary);
        iterations = k;
        if du <= opts.tol && dv <= opts.tol {
            settled = true;
            break;
        }
    }

    let (residual_u, residual_v) = system_residuals(prob, &u, &v)?;
    let window_ok = in_envelope.last().copied().unwrap_or(false);
    let converged = settled
        && residual_u <= opts.residual_tol
        && residual_v <= opts.residual_tol
        && window_ok;

    let annulus = (prob.grid.half_width() / 4.0, prob.grid.half_width() / 2.0);
    let fit_u = fit_decay(&u, annulus).map(|f| (f.a_est, f.b_est)).unwrap_or((f64::NAN, f64::NAN));
    let fit_v = fit_decay(&v, annulus).map(|f| (f.a_est, f.b_est)).unwrap_or((f64::NAN, f64::NAN));

    Ok(FixedPointOutcome {
        report: SolveReport {
            converged,
            iterations,
            residual_u,
            residual_v,
            in_envelope,
            fitted_decay_u: fit_u,
            fitted_decay_v: fit_v,
            constants: led.clone(),
        },
        u,
        v,
    })
}

fn rel_sup_change(old: &Field, new: &Field) -> f64 {
    let scale = old.max_norm().max(1e-300);
    new.max_abs_diff(old) / scale
}

/// Max-norm relative residuals of both equations of the full system at
/// (u, v), with the same envelope-clamped convolutions the iteration uses.
pub fn system_residuals(prob: &CoupledProblem, u: &Field, v: &Field) -> Result<(f64, f64)> {
    let exp = &prob.exp;
    let led = &prob.ledger;
    let (r_lo, r_hi) = u.ratio_bounds_over(&prob.psi_u, None)?;

    let u_pow_p = u.map(BoundaryRule::Zero, |x| x.powf(exp.p))?;
    let kp = clamp_to_envelope(
        &prob.table.conv(&u_pow_p)?,
        led.ratios.conv_p_inf * r_lo.powf(exp.p),
        led.ratios.conv_p_sup * r_hi.powf(exp.p),
        &prob.psi_conv_p,
    )?;
    let rhs_u = kp.zip_with(v, BoundaryRule::Zero, |k, vv| k / vv.powf(exp.q))?;
    let rhs_u = rhs_u.zip_with(&prob.rho, BoundaryRule::Zero, |x, r| x + r)?;
    let res_u = equation_residual(prob.lambda, u, &rhs_u);

    let u_pow_m = u.map(BoundaryRule::Zero, |x| x.powf(exp.m))?;
    let km = clamp_to_envelope(
        &prob.table.conv(&u_pow_m)?,
        led.ratios.conv_m_inf * r_lo.powf(exp.m),
        led.ratios.conv_m_sup * r_hi.powf(exp.m),
        &prob.psi_conv_m,
    )?;
    let rhs_v = km.zip_with(v, BoundaryRule::Zero, |k, vv| k / vv.powf(exp.s))?;
    let res_v = equation_residual(prob.mu, v, &rhs_v);
    Ok((res_u, res_v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sub_super_constants_examples() {
        let (d, big) = sub_super_constants(2.0, 2.0, 1.0, 1.0);
        assert_relative_eq!(d, 1.0);
        assert_relative_eq!(big, 2.0);

        // s = 0: D/d = 4 independent of c and mu
        let (d, big) = sub_super_constants(3.0, 3.0, 7.0, 0.0);
        assert_relative_eq!(big / d, 4.0, max_relative = 1e-14);

        let (d, big) = sub_super_constants(1.0, 8.0, 4.0, 1.0);
        assert_relative_eq!(d, 0.125f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(big, 2.0);
    }

    fn psi_field(grid: &Grid, env: &Envelope, scale: f64) -> Field {
        Field::sample(grid, BoundaryRule::Zero, |x| scale * env.psi(x)).unwrap()
    }

    #[test]
    fn singular_linear_case_single_iteration() {
        // s = 0 reduces to one linear solve
        let grid = Grid::new(1, 16.0, 257).unwrap();
        let env = Envelope::new(1.0, 1.0).unwrap();
        let k = psi_field(&grid, &env, 5.0);
        let prob = SingularProblem::from_measured(12.0, 0.0, k, env).unwrap();
        let out = solve_singular(&prob, 0.7, 1e-8, 50).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.residual <= 1e-8);
    }

    #[test]
    fn singular_manufactured_solution_order() {
        // w* = Ψ_{1,1}, s = 1, μ = 20, K = ((-Δ+μ)Ψ)·Ψ so K/w* = (-Δ+μ)w*
        let env_w = Envelope::new(1.0, 1.0).unwrap();
        let env_k = Envelope::new(2.0, 2.0).unwrap();
        let mu = 20.0;
        let l = env_w.half_width_for_decay(1e-8).unwrap();
        let mut errs = Vec::new();
        for n in [129usize, 257, 513] {
            let grid = Grid::new(1, l, n).unwrap();
            let k = Field::sample(&grid, BoundaryRule::Zero, |x| {
                env_w.helmholtz_of_psi(mu, x) * env_w.psi(x)
            })
            .unwrap();
            let prob = SingularProblem::from_measured(mu, 1.0, k, env_k).unwrap();
            let out = solve_singular(&prob, 0.7, 5e-8, 200).unwrap();
            let exact = psi_field(&grid, &env_w, 1.0);
            errs.push(out.w.max_abs_diff(&exact));
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 >= 1.9 && o2 >= 1.9, "orders {o1:.2} {o2:.2} errs {errs:?}");
    }

    #[test]
    fn singular_sandwich_for_envelope_data() {
        // K = c Ψ_{a,b} exactly: w/Ψ_{a/(1+s),b/(1+s)} stays in [d, D]
        let grid = Grid::new(1, 18.0, 257).unwrap();
        let env = Envelope::new(1.0, 1.0).unwrap();
        let c = 3.0;
        let k = psi_field(&grid, &env, c);
        let prob = SingularProblem::from_measured(8.0, 1.0, k, env).unwrap();
        assert_relative_eq!(prob.c_lo, c, max_relative = 1e-12);
        assert_relative_eq!(prob.c_hi, c, max_relative = 1e-12);
        let (d, big) = sub_super_constants(prob.c_lo, prob.c_hi, prob.mu, prob.s);
        let out = solve_singular(&prob, 0.7, 1e-9, 200).unwrap();
        let psi_w = psi_field(&grid, &prob.solution_envelope(), 1.0);
        let (lo, hi) = out.w.ratio_bounds_over(&psi_w, None).unwrap();
        assert!(lo >= d - 1e-9 && hi <= big + 1e-9, "window [{lo}, {hi}] vs [{d}, {big}]");
    }

    #[test]
    fn singular_omega_independence() {
        let grid = Grid::new(1, 16.0, 129).unwrap();
        let env = Envelope::new(1.0, 1.0).unwrap();
        let k = Field::sample(&grid, BoundaryRule::Zero, |x| {
            env.psi(x) * (2.0 + (x[0] * 0.7).sin())
        })
        .unwrap();
        let tol = 1e-9;
        let prob = SingularProblem::from_measured(9.0, 1.0, k, env).unwrap();
        let w1 = solve_singular(&prob, 1.0, tol, 300).unwrap().w;
        let w2 = solve_singular(&prob, 0.5, tol, 300).unwrap().w;
        assert!(w1.max_abs_diff(&w2) <= 10.0 * tol * w1.max_norm().max(1.0));
    }

    #[test]
    fn singular_monotone_in_data() {
        // increasing K nodewise does not decrease the solution
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let grid = Grid::new(1, 14.0, 129).unwrap();
        let env = Envelope::new(1.0, 1.0).unwrap();
        for _ in 0..5 {
            let base: Vec<f64> = (0..grid.total_points()).map(|_| rng.random_range(1.0..2.0)).collect();
            let bump: Vec<f64> = (0..grid.total_points()).map(|_| rng.random_range(0.0..1.0)).collect();
            let psi = psi_field(&grid, &env, 1.0);
            let k1: Vec<f64> = base.iter().zip(psi.values()).map(|(c, p)| c * p).collect();
            let k2: Vec<f64> = k1.iter().zip(&bump).zip(psi.values()).map(|((k, b), p)| k + b * p).collect();
            let p1 = SingularProblem::from_measured(
                9.0,
                1.0,
                Field::from_values(&grid, BoundaryRule::Zero, k1).unwrap(),
                env,
            )
            .unwrap();
            let p2 = SingularProblem::from_measured(
                9.0,
                1.0,
                Field::from_values(&grid, BoundaryRule::Zero, k2).unwrap(),
                env,
            )
            .unwrap();
            let w1 = solve_singular(&p1, 0.7, 1e-9, 300).unwrap().w;
            let w2 = solve_singular(&p2, 0.7, 1e-9, 300).unwrap().w;
            let slack = 1e-7 * w2.max_norm();
            for (a, b) in w2.values().iter().zip(w1.values()) {
                assert!(*a >= b - slack);
            }
        }
    }

    fn small_coupled_problem(lambda: f64, mu: f64) -> CoupledProblem {
        let exp = Exponents::new(3.0, 2.0, 1.0, 1.0).unwrap();
        let kernel = Kernel::exp_poly(0.0, 7.0, 1).unwrap();
        let rho_env = Envelope::new(1.0, 1.0).unwrap();
        let inhib = Envelope::new(0.5, 0.5).unwrap();
        let l = Grid::choose_half_width(&[rho_env, inhib], 1e-8).unwrap();
        let grid = Grid::new(1, l, 257).unwrap();
        let rho = psi_field(&grid, &rho_env, 1.0);
        CoupledProblem::assemble(exp, kernel, grid, rho, rho_env, lambda, mu).unwrap()
    }

    fn feasible_lambda(mu: f64) -> f64 {
        // locate the feasibility edge by bisection on the planned constants
        let probe = small_coupled_problem(1e6, mu);
        let exp = probe.exp;
        let env = probe.rho_env;
        let ratios = probe.ledger.ratios;
        let feasible = |la: f64| {
            planned_constants(&exp, &env, &ratios, la, mu, 1, None)
                .map(|l| l.feasible)
                .unwrap_or(false)
        };
        let (mut lo, mut hi) = (1.0, 1e6);
        assert!(feasible(hi));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        2.0 * hi
    }

    #[test]
    fn coupled_trapping_at_window_corners() {
        let mu = 4.0;
        let lambda = feasible_lambda(mu);
        let prob = small_coupled_problem(lambda, mu);
        let led = &prob.ledger;
        assert!(led.feasible);
        let opts = SolverOptions::default();
        let psi_u = psi_field(&prob.grid, &prob.rho_env, 1.0);
        let psi_v = psi_field(&prob.grid, &led.inhibitor_envelope(), 1.0);

        // corner (u, v) = (d1 Ψ, D2 Ψ): Tu must not fall below d1 Ψ
        let u = psi_u.map(BoundaryRule::Zero, |p| led.u_lo * p).unwrap();
        let v = psi_v.map(BoundaryRule::Zero, |p| led.v_hi * p).unwrap();
        let out = decoupled_map(&prob, &u, &v, &opts).unwrap();
        assert!(out.u_in_window && out.v_in_window);
        let atol = 1e-7 * led.u_hi;
        for (tu, p) in out.u.values().iter().zip(psi_u.values()) {
            assert!(*tu >= led.u_lo * p - atol);
        }

        // corner (u, v) = (D1 Ψ, d2 Ψ): Tu must not exceed D1 Ψ
        let u = psi_u.map(BoundaryRule::Zero, |p| led.u_hi * p).unwrap();
        let v = psi_v.map(BoundaryRule::Zero, |p| led.v_lo * p).unwrap();
        let out = decoupled_map(&prob, &u, &v, &opts).unwrap();
        assert!(out.u_in_window && out.v_in_window);
        for (tu, p) in out.u.values().iter().zip(psi_u.values()) {
            assert!(*tu <= led.u_hi * p + atol);
        }
    }

    #[test]
    fn coupled_fixed_point_converges() {
        let mu = 4.0;
        let lambda = feasible_lambda(mu);
        let prob = small_coupled_problem(lambda, mu);
        let out = fixed_point_solve(&prob, &SolverOptions::default()).unwrap();
        assert!(out.report.converged, "report: {:?}", out.report.in_envelope);
        assert!(out.report.residual_u <= 1e-5);
        assert!(out.report.residual_v <= 1e-5);
        assert!(out.report.in_envelope.iter().all(|&b| b));
        // inhibitor decay close to (A, B) = (1/2, 1/2)
        let (a_est, b_est) = out.report.fitted_decay_v;
        assert!((a_est - 0.5).abs() <= 0.05 || (b_est - 0.5).abs() <= 0.05);
    }

    #[test]
    fn coupled_solve_refuses_infeasible_rates() {
        // mu huge at fixed lambda: ledger infeasible, solve refused
        let prob = small_coupled_problem(50.0, 2000.0);
        assert!(!prob.ledger.feasible);
        let err = fixed_point_solve(&prob, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }

    #[test]
    fn coupled_gate_below_lambda_threshold() {
        // lambda below the envelope threshold: treated as infeasible
        let prob = small_coupled_problem(5.0, 4.0);
        assert!(!prob.ledger.feasible);
        assert!(prob
            .ledger
            .infeasible_reason
            .as_deref()
            .unwrap()
            .contains("threshold"));
    }

    #[test]
    fn report_serializes_with_exact_field_names() {
        let mu = 4.0;
        let lambda = feasible_lambda(mu);
        let prob = small_coupled_problem(lambda, mu);
        let mut opts = SolverOptions::default();
        opts.max_iter = 3; // serialization shape test only
        let out = fixed_point_solve(&prob, &opts).unwrap();
        let json = serde_json::to_value(&out.report).unwrap();
        let obj = json.as_object().unwrap();
        for key in [
            "converged",
            "iterations",
            "residual_u",
            "residual_v",
            "in_envelope",
            "fitted_decay_u",
            "fitted_decay_v",
            "constants",
        ] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        let constants = obj["constants"].as_object().unwrap();
        for key in ["alpha", "beta", "c1", "C1", "c2", "C2", "d1", "D1", "d2", "D2", "A", "B", "feasible"] {
            assert!(constants.contains_key(key), "missing constants.{key}");
        }
    }
}
