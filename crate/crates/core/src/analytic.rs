//! Closed-form layer: decay envelopes, convolution kernel families,
//! admissibility thresholds and the explicit constant system that pins the
//! invariant set of the coupled solver.
//!
//! Everything here is computable without a grid. All formulas are evaluated
//! in double precision; the exponents involved are O(10), so no special
//! handling of cancellation is attempted.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Surface measure of the unit sphere in `dim` dimensions (2, 2π, 4π).
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Reaction exponents (p, q, m, s) of the activator/inhibitor system,
/// together with the derived cross-inhibition index `sigma` and the
/// death-rate curve exponent `t`.
///
/// The anti-Turing regime is `sigma <= 1`; every existence configuration
/// lives there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub s: f64,
    /// sigma = m q / ((p-1)(s+1)), stored at construction.
    pub sigma: f64,
    /// t = p(s+1)/q - m, the exponent of lambda in the existence curve.
    pub t: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64, m: f64, s: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::domain(format!("p = {p} must exceed 1")));
        }
        if !(q > 0.0) || !(m > 0.0) {
            return Err(Error::domain(format!("q = {q} and m = {m} must be positive")));
        }
        if !(s >= 0.0) {
            return Err(Error::domain(format!("s = {s} must be nonnegative")));
        }
        let sigma = m * q / ((p - 1.0) * (s + 1.0));
        let t = p * (s + 1.0) / q - m;
        Ok(Exponents { p, q, m, s, sigma, t })
    }

    /// True in the anti-Turing regime sigma <= 1.
    pub fn anti_turing(&self) -> bool {
        self.sigma <= 1.0
    }
}

/// Recomputes sigma = m q / ((p-1)(s+1)) from the raw exponents.
pub fn sigma_of(exp: &Exponents) -> f64 {
    exp.m * exp.q / ((exp.p - 1.0) * (exp.s + 1.0))
}

/// Decay envelope Ψ_{a,b}(x) = φ(x)^{-a} e^{-b φ(x)} with φ(x) = (1+|x|²)^{1/2}.
///
/// `a` is the polynomial decay rate, `b` the exponential one. Ψ_{0,0} ≡ 1,
/// and Ψ is radially non-increasing with values in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub a: f64,
    pub b: f64,
}

impl Envelope {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!(
                "envelope rates must be nonnegative, got (a, b) = ({a}, {b})"
            )));
        }
        Ok(Envelope { a, b })
    }

    /// φ(x) = (1 + |x|²)^{1/2}.
    pub fn phi(x: &[f64]) -> f64 {
        (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn psi(&self, x: &[f64]) -> f64 {
        self.psi_of_phi(Self::phi(x))
    }

    /// Ψ as a function of the radius |x|.
    pub fn psi_radial(&self, r: f64) -> f64 {
        self.psi_of_phi((1.0 + r * r).sqrt())
    }

    pub fn psi_of_phi(&self, phi: f64) -> f64 {
        phi.powf(-self.a) * (-self.b * phi).exp()
    }

    /// Exact value of (-Δ + λ)Ψ_{a,b} at x in dimension `x.len()`.
    ///
    /// Uses the closed-form bracket
    /// {λ - b² + b(N-2a-1)/φ + (b²+a(N-a-2))/φ² + b(2a+1)/φ³ + a(a+2)/φ⁴}·Ψ.
    pub fn helmholtz_of_psi(&self, lambda: f64, x: &[f64]) -> f64 {
        self.helmholtz_bracket(lambda, Self::phi(x), x.len()) * self.psi(x)
    }

    /// The bracket factor of `helmholtz_of_psi`, as a function of φ.
    pub fn helmholtz_bracket(&self, lambda: f64, phi: f64, dim: usize) -> f64 {
        let (a, b) = (self.a, self.b);
        let n = dim as f64;
        let u = 1.0 / phi;
        lambda - b * b
            + b * (n - 2.0 * a - 1.0) * u
            + (b * b + a * (n - a - 2.0)) * u * u
            + b * (2.0 * a + 1.0) * u.powi(3)
            + a * (a + 2.0) * u.powi(4)
    }

    /// Smallest admissible Helmholtz rate: for any λ strictly above
    /// max{2a + 2(a+b)², N(a+b)} the two-sided bound
    /// (λ/2)Ψ ≤ (-Δ+λ)Ψ ≤ 2λΨ holds everywhere.
    pub fn lambda_threshold(&self, dim: usize) -> f64 {
        let (a, b) = (self.a, self.b);
        let n = dim as f64;
        (2.0 * a + 2.0 * (a + b) * (a + b)).max(n * (a + b))
    }

    /// Threshold for the singular problem (-Δ+μ)w = K/w^s with K ≍ Ψ_{a,b}:
    /// the solution envelope is Ψ_{a/(1+s), b/(1+s)} and the admissible rates
    /// are μ strictly above this value.
    pub fn mu_threshold(&self, s: f64, dim: usize) -> f64 {
        self.scaled_by(1.0 / (1.0 + s)).lambda_threshold(dim)
    }

    /// Envelope with both rates multiplied by `k` (Ψ^k has envelope scaled by k).
    pub fn scaled_by(&self, k: f64) -> Envelope {
        Envelope { a: self.a * k, b: self.b * k }
    }

    /// Whether the envelope has an exponential tail.
    pub fn is_exponential(&self) -> bool {
        self.b > 0.0
    }

    /// Half-width L with Ψ(L)/Ψ(0) = `target` (bisection on φ).
    /// Returns None for the constant envelope.
    pub fn half_width_for_decay(&self, target: f64) -> Option<f64> {
        if self.a + self.b == 0.0 || !(target > 0.0 && target < 1.0) {
            return None;
        }
        // f(phi) = a ln(phi) + b (phi - 1) + ln(target), root in phi >= 1
        let f = |phi: f64| self.a * phi.ln() + self.b * (phi - 1.0) + target.ln();
        let mut lo = 1.0;
        let mut hi = 2.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let phi = 0.5 * (lo + hi);
        Some((phi * phi - 1.0).max(0.0).sqrt())
    }
}

/// Convolution kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// J(z) = (1+|z|)^{-alpha} e^{-beta |z|}, alpha >= 0, beta > 0.
    ExpPoly { alpha: f64, beta: f64 },
    /// J(z) = (1+|z|)^{-alpha}, alpha > N.
    Power { alpha: f64 },
    /// J(z) = |z|^{theta-N}, 0 < theta < N; singular at the origin and not
    /// in any Lebesgue class.
    Riesz { theta: f64 },
}

/// Convolution weight J with its decay metadata: `theta` is the exponent of
/// the pointwise bound J(z) <= c|z|^{theta-N}, `c_bound` the measured best c,
/// and `m_j` the exponential-decay margin (present only for ExpPoly kernels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub dim: usize,
    pub theta: f64,
    pub c_bound: f64,
    pub m_j: Option<f64>,
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(Error::domain(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    Ok(())
}

impl Kernel {
    pub fn exp_poly(alpha: f64, beta: f64, dim: usize) -> Result<Self> {
        Self::exp_poly_with_theta(alpha, beta, dim, 0.5 * dim as f64)
    }

    pub fn exp_poly_with_theta(alpha: f64, beta: f64, dim: usize, theta: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(alpha >= 0.0) || !(beta > 0.0) {
            return Err(Error::domain(format!(
                "exp_poly kernel needs alpha >= 0 and beta > 0, got ({alpha}, {beta})"
            )));
        }
        check_theta(theta, dim)?;
        let family = KernelFamily::ExpPoly { alpha, beta };
        let c_bound = measured_c_bound(&family, dim, theta);
        Ok(Kernel { family, dim, theta, c_bound, m_j: Some(beta) })
    }

    pub fn power(alpha: f64, dim: usize) -> Result<Self> {
        Self::power_with_theta(alpha, dim, 0.5 * dim as f64)
    }

    pub fn power_with_theta(alpha: f64, dim: usize, theta: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(alpha > dim as f64) {
            return Err(Error::domain(format!(
                "power kernel needs alpha > N = {dim}, got alpha = {alpha}"
            )));
        }
        check_theta(theta, dim)?;
        let family = KernelFamily::Power { alpha };
        // t^{N-theta}(1+t)^{-alpha} peaks at t* = (N-theta)/(alpha-N+theta)
        let nt = dim as f64 - theta;
        let t_star = nt / (alpha - nt);
        let c_bound = t_star.powf(nt) * (1.0 + t_star).powf(-alpha);
        Ok(Kernel { family, dim, theta, c_bound, m_j: None })
    }

    pub fn riesz(theta: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        check_theta(theta, dim)?;
        Ok(Kernel {
            family: KernelFamily::Riesz { theta },
            dim,
            theta,
            c_bound: 1.0,
            m_j: None,
        })
    }

    /// Radial profile J(|z|). Unbounded at 0 for Riesz kernels.
    pub fn eval_radial(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::ExpPoly { alpha, beta } => (1.0 + r).powf(-alpha) * (-beta * r).exp(),
            KernelFamily::Power { alpha } => (1.0 + r).powf(-alpha),
            KernelFamily::Riesz { theta } => r.powf(theta - self.dim as f64),
        }
    }

    pub fn is_integrable(&self) -> bool {
        !matches!(self.family, KernelFamily::Riesz { .. })
    }

    pub fn singular_at_origin(&self) -> bool {
        matches!(self.family, KernelFamily::Riesz { .. })
    }

    /// Upper bound on ‖J‖_{L¹} (radial quadrature plus an analytic tail
    /// majorant). Errors for Riesz kernels, which are not integrable.
    pub fn l1_norm_upper(&self) -> Result<f64> {
        let n = self.dim as f64;
        let omega = sphere_area(self.dim);
        match self.family {
            KernelFamily::Riesz { .. } => Err(Error::domain(
                "riesz kernels are not in L^1; no finite norm exists",
            )),
            KernelFamily::ExpPoly { beta, .. } => {
                let cut = (80.0 + 3.0 * n) / beta;
                let head = crate::quad::adaptive_simpson(
                    &|t: f64| self.eval_radial(t) * t.powf(n - 1.0),
                    0.0,
                    cut,
                    1e-12,
                )?;
                // tail: (1+t)^{-alpha} <= 1 and t^{N-1} <= (cut+k)^... use
                // t^{N-1} e^{-beta t} <= t^2 e^{-beta t} closed form pieces
                let tail = upper_exp_moment(self.dim - 1, beta, cut);
                Ok(omega * (head + tail))
            }
            KernelFamily::Power { alpha } => {
                let cut: f64 = 1e4;
                let head = crate::quad::adaptive_simpson(
                    &|t: f64| self.eval_radial(t) * t.powf(n - 1.0),
                    0.0,
                    cut,
                    1e-12,
                )?;
                // t^{N-1} <= (1+t)^{N-1}: tail <= (1+cut)^{N-alpha}/(alpha-N)
                let tail = (1.0 + cut).powf(n - alpha) / (alpha - n);
                Ok(omega * (head + tail))
            }
        }
    }

    /// Decay class of J * Ψ_env: integrable kernels reproduce the envelope,
    /// the Riesz kernel shifts the power down by theta (and requires a pure
    /// power envelope with a > theta for the convolution to stay finite).
    pub fn conv_envelope(&self, env: &Envelope) -> Result<Envelope> {
        match self.family {
            KernelFamily::Riesz { theta } => {
                if env.b != 0.0 {
                    return Err(Error::hypothesis(
                        "riesz convolution estimates require a pure power envelope (b = 0)",
                    ));
                }
                if env.a <= theta {
                    return Err(Error::hypothesis(format!(
                        "riesz convolution of a power envelope needs a > theta, got a = {} <= theta = {}",
                        env.a, theta
                    )));
                }
                Envelope::new(env.a - theta, 0.0)
            }
            _ => Ok(*env),
        }
    }
}

fn check_theta(theta: f64, dim: usize) -> Result<()> {
    if !(theta > 0.0 && theta < dim as f64) {
        return Err(Error::domain(format!(
            "theta = {theta} must lie in (0, N) with N = {dim}"
        )));
    }
    Ok(())
}

/// ∫_T^∞ t^k e^{-beta t} dt for k in {0, 1, 2}.
fn upper_exp_moment(k: usize, beta: f64, t: f64) -> f64 {
    let e = (-beta * t).exp();
    match k {
        0 => e / beta,
        1 => e * (t / beta + 1.0 / (beta * beta)),
        2 => e * (t * t / beta + 2.0 * t / (beta * beta) + 2.0 / beta.powi(3)),
        _ => unreachable!("dimension capped at 3"),
    }
}

fn measured_c_bound(family: &KernelFamily, dim: usize, theta: f64) -> f64 {
    let kernel = Kernel { family: *family, dim, theta, c_bound: 0.0, m_j: None };
    let n = dim as f64;
    let mut best: f64 = 0.0;
    // sup_t J(t) t^{N-theta}; log sweep is ample for metadata purposes
    for i in 0..4000 {
        let t = 10f64.powf(-8.0 + 12.0 * i as f64 / 3999.0);
        best = best.max(kernel.eval_radial(t) * t.powf(n - theta));
    }
    best
}

/// Two-sided ratio constants feeding the invariant-set construction:
/// `rho_inf/rho_sup` bound ρ/Ψ_{a,b}, `conv_p_*` bound (J*Ψ^p-class)/Ψ^p-class,
/// `conv_m_*` the same for the m-th power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBounds {
    #[serde(rename = "alpha")]
    pub rho_inf: f64,
    #[serde(rename = "beta")]
    pub rho_sup: f64,
    #[serde(rename = "c1")]
    pub conv_p_inf: f64,
    #[serde(rename = "C1")]
    pub conv_p_sup: f64,
    #[serde(rename = "c2")]
    pub conv_m_inf: f64,
    #[serde(rename = "C2")]
    pub conv_m_sup: f64,
}

impl RatioBounds {
    fn validate(&self) -> Result<()> {
        let pairs = [
            ("rho", self.rho_inf, self.rho_sup),
            ("conv_p", self.conv_p_inf, self.conv_p_sup),
            ("conv_m", self.conv_m_inf, self.conv_m_sup),
        ];
        for (name, lo, hi) in pairs {
            if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
                return Err(Error::domain(format!(
                    "{name} ratio bounds must satisfy 0 < inf <= sup < inf, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// The explicit constant system: envelope windows
/// u in [d1, D1]·Ψ_{a,b} and v in [d2, D2]·Ψ_{A,B}, plus the feasibility flag
/// that serves as the computable surrogate for the existence curve in (λ, μ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantLedger {
    #[serde(flatten)]
    pub ratios: RatioBounds,
    #[serde(rename = "d1")]
    pub u_lo: f64,
    #[serde(rename = "D1")]
    pub u_hi: f64,
    #[serde(rename = "d2")]
    pub v_lo: f64,
    #[serde(rename = "D2")]
    pub v_hi: f64,
    /// Inhibitor envelope rates: A = am/(1+s) (minus theta/(1+s) for Riesz),
    /// B = bm/(1+s).
    #[serde(rename = "A")]
    pub inhibitor_a: f64,
    #[serde(rename = "B")]
    pub inhibitor_b: f64,
    pub feasible: bool,
    pub lambda: f64,
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible_reason: Option<String>,
}

impl ConstantLedger {
    pub fn inhibitor_envelope(&self) -> Envelope {
        Envelope { a: self.inhibitor_a, b: self.inhibitor_b }
    }
}

/// Builds the constant system for given rates:
///
/// d1 = α/(2λ),
/// d2 = (c2 α^m / 2^{m+1})^{1/(1+s)} λ^{-m/(1+s)} μ^{-1/(1+s)},
/// D1 = C3 λ^{1/(p-1)-σ} μ^{-σ/m},   C3 = [(1/(4C1)) (c2 α^m / 2^{m+1})^{q/(1+s)}]^{1/(p-1)},
/// D2 = C4 λ^{(m/(1+s))(1/(p-1)-σ)} μ^{-(σ+1)/(1+s)},   C4 = (2 C2 C3^m)^{1/(1+s)}.
///
/// Feasibility = rate thresholds hold, D1 > d1, D2 > d2 and (λ/4)·D1 >= β.
pub fn planned_constants(
    exp: &Exponents,
    rho_env: &Envelope,
    ratios: &RatioBounds,
    lambda: f64,
    mu: f64,
    dim: usize,
    riesz_theta: Option<f64>,
) -> Result<ConstantLedger> {
    ratios.validate()?;
    if !(lambda > 0.0) || !(mu > 0.0) {
        return Err(Error::domain(format!(
            "death rates must be positive, got lambda = {lambda}, mu = {mu}"
        )));
    }
    if exp.sigma > 1.0 {
        return Err(Error::hypothesis(format!(
            "sigma = {:.6} > 1 violates the anti-Turing condition sigma <= 1",
            exp.sigma
        )));
    }
    if riesz_theta.is_some() && rho_env.b != 0.0 {
        return Err(Error::hypothesis(
            "the riesz regime requires a pure power envelope (b = 0)",
        ));
    }

    let (p, q, m, s, sigma) = (exp.p, exp.q, exp.m, exp.s, exp.sigma);
    let (alpha, beta) = (ratios.rho_inf, ratios.rho_sup);
    let (c2, cc1, cc2) = (ratios.conv_m_inf, ratios.conv_p_sup, ratios.conv_m_sup);
    let theta = riesz_theta.unwrap_or(0.0);

    let inhibitor_a = (rho_env.a * m - theta) / (1.0 + s);
    let inhibitor_b = rho_env.b * m / (1.0 + s);

    let core = c2 * alpha.powf(m) / 2f64.powf(m + 1.0);
    let u_lo = alpha / (2.0 * lambda);
    let v_lo = core.powf(1.0 / (1.0 + s)) * lambda.powf(-m / (1.0 + s)) * mu.powf(-1.0 / (1.0 + s));
    let c3 = ((1.0 / (4.0 * cc1)) * core.powf(q / (1.0 + s))).powf(1.0 / (p - 1.0));
    let u_hi = c3 * lambda.powf(1.0 / (p - 1.0) - sigma) * mu.powf(-sigma / m);
    let c4 = (2.0 * cc2 * c3.powf(m)).powf(1.0 / (1.0 + s));
    let v_hi = c4
        * lambda.powf((m / (1.0 + s)) * (1.0 / (p - 1.0) - sigma))
        * mu.powf(-(sigma + 1.0) / (1.0 + s));

    // K = J*u^m has envelope (am, bm) for integrable kernels, (am - theta, 0)
    // in the riesz case; the singular-problem threshold is taken against it.
    let k_env = Envelope {
        a: rho_env.a * m - theta,
        b: rho_env.b * m,
    };
    let lam_thr = rho_env.lambda_threshold(dim);
    let mu_thr = k_env.mu_threshold(s, dim);

    let mut reason = None;
    if !(lambda > lam_thr) {
        reason = Some(format!(
            "lambda = {lambda} <= envelope threshold max(2a+2(a+b)^2, N(a+b)) = {lam_thr}"
        ));
    } else if !(mu > mu_thr) {
        reason = Some(format!(
            "mu = {mu} <= singular-problem threshold {mu_thr} for the inhibitor envelope"
        ));
    } else if !(u_hi > u_lo) {
        reason = Some(format!("activator window is empty: D1 = {u_hi:.6e} <= d1 = {u_lo:.6e}"));
    } else if !(v_hi > v_lo) {
        reason = Some(format!("inhibitor window is empty: D2 = {v_hi:.6e} <= d2 = {v_lo:.6e}"));
    } else if !(lambda / 4.0 * u_hi >= beta) {
        reason = Some(format!(
            "(lambda/4)*D1 = {:.6e} < beta = {beta:.6e}: basic production not dominated",
            lambda / 4.0 * u_hi
        ));
    }

    Ok(ConstantLedger {
        ratios: *ratios,
        u_lo,
        u_hi,
        v_lo,
        v_hi,
        inhibitor_a,
        inhibitor_b,
        feasible: reason.is_none(),
        lambda,
        mu,
        infeasible_reason: reason,
    })
}

/// Outcome of one named exponent inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCheck {
    pub name: String,
    pub ok: bool,
}

/// Exponent bookkeeping for the decay of J*u^p/v^q: the inhibitor rates
/// (A, B), the activator gains ap-Aq and bp-Bq, and the named inequality
/// checks. A failing inequality marks the ledger infeasible rather than
/// raising an error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentLedger {
    #[serde(rename = "A")]
    pub inhibitor_a: f64,
    #[serde(rename = "B")]
    pub inhibitor_b: f64,
    pub ap_minus_aq: f64,
    pub bp_minus_bq: f64,
    pub checks: Vec<ExponentCheck>,
    pub feasible: bool,
}

impl ExponentLedger {
    pub fn first_failure(&self) -> Option<&ExponentCheck> {
        self.checks.iter().find(|c| !c.ok)
    }
}

pub fn exponent_ledger(
    env: &Envelope,
    exp: &Exponents,
    dim: usize,
    riesz_theta: Option<f64>,
) -> Result<ExponentLedger> {
    if exp.sigma > 1.0 {
        return Err(Error::hypothesis(format!(
            "sigma = {:.6} > 1 violates the anti-Turing condition sigma <= 1",
            exp.sigma
        )));
    }
    let (a, b) = (env.a, env.b);
    let (p, q, m, s) = (exp.p, exp.q, exp.m, exp.s);
    let n = dim as f64;
    let mut checks = Vec::new();

    let ledger = match riesz_theta {
        None => {
            let big_a = a * m / (1.0 + s);
            let big_b = b * m / (1.0 + s);
            let gain_a = a * p - big_a * q;
            let gain_b = b * p - big_b * q;
            checks.push(ExponentCheck {
                name: format!("a*p - A*q = {gain_a:.6} >= a = {a:.6}"),
                ok: gain_a >= a - 1e-12,
            });
            checks.push(ExponentCheck {
                name: format!("b*p - B*q = {gain_b:.6} >= b = {b:.6}"),
                ok: gain_b >= b - 1e-12,
            });
            let feasible = checks.iter().all(|c| c.ok);
            ExponentLedger {
                inhibitor_a: big_a,
                inhibitor_b: big_b,
                ap_minus_aq: gain_a,
                bp_minus_bq: gain_b,
                checks,
                feasible,
            }
        }
        Some(theta) => {
            if b != 0.0 {
                return Err(Error::hypothesis(
                    "riesz exponent bookkeeping requires a pure power envelope (b = 0)",
                ));
            }
            let big_a = (a * m - theta) / (1.0 + s);
            let gain_a = a * p - big_a * q;
            let lower = theta / m.min(p);
            let upper = n / m.max(p);
            checks.push(ExponentCheck {
                name: format!("theta/min(m,p) = {lower:.6} < a = {a:.6} < N/max(m,p) = {upper:.6}"),
                ok: a > lower && a < upper,
            });
            let lhs = a * (p - 1.0) * (1.0 - exp.sigma);
            let rhs = theta * (1.0 - q / (s + 1.0));
            checks.push(ExponentCheck {
                name: format!(
                    "a(p-1)(1-sigma) = {lhs:.6} >= theta(1 - q/(s+1)) = {rhs:.6}"
                ),
                ok: lhs >= rhs - 1e-12,
            });
            let gain_minus_theta = gain_a - theta;
            checks.push(ExponentCheck {
                name: format!("a*p - A*q - theta = {gain_minus_theta:.6} >= a = {a:.6}"),
                ok: gain_minus_theta >= a - 1e-12,
            });
            let feasible = checks.iter().all(|c| c.ok);
            ExponentLedger {
                inhibitor_a: big_a,
                inhibitor_b: 0.0,
                ap_minus_aq: gain_minus_theta,
                bp_minus_bq: 0.0,
                checks,
                feasible,
            }
        }
    };
    Ok(ledger)
}
