//! Discrete convolution J*f on the grid for the three kernel families.
//!
//! Weights are midpoint-rule cell integrals J(offset)·h^N away from the
//! origin; the origin cell gets an exact radial integral (Riesz) or adaptive
//! quadrature (bounded kernels). f is extended by zero outside the box; the
//! neglected mass is certified separately by [`tail_correction`].

use crate::analytic::{sphere_area, Envelope, Kernel, KernelFamily};
use crate::error::{Error, Result};
use crate::grid::{BoundaryRule, Field, Grid};
use crate::quad::{adaptive_cubature, adaptive_simpson};
use rand::{Rng, RngExt};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, OnceLock};

type C64 = Complex<f64>;

/// Which convolution path to use; `Auto` picks direct summation for small
/// problems and zero-padded FFT otherwise. Both agree to 1e-12 relative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMethod {
    Auto,
    Direct,
    Fft,
}

const DIRECT_COST_CAP: f64 = 5e7;

struct FftData {
    m: usize,
    kernel_hat: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Kernel integrated against every relative-offset cell of a grid:
/// (2n-1)^N positive weights, with the origin-cell weight computed by
/// quadrature that respects the kernel's singularity.
pub struct KernelTable {
    grid: Grid,
    kernel: Kernel,
    weights: Vec<f64>,
    singular_cell_weight: f64,
    fft: OnceLock<FftData>,
}

/// Integrates the kernel over each offset cell of `grid`.
pub fn build_table(kernel: &Kernel, grid: &Grid) -> Result<KernelTable> {
    if kernel.dim != grid.dim() {
        return Err(Error::domain(format!(
            "kernel dimension {} does not match grid dimension {}",
            kernel.dim,
            grid.dim()
        )));
    }
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let h = grid.spacing();
    let wn = 2 * n - 1;
    let total = wn.pow(dim as u32);
    let cell_volume = h.powi(dim as i32);
    let singular_cell_weight = origin_cell_weight(kernel, h)?;

    let mut weights = vec![0.0; total];
    let mut idx = [0usize; 3];
    for w in weights.iter_mut() {
        let mut r2 = 0.0;
        let mut at_origin = true;
        for d in 0..dim {
            let off = idx[d] as isize - (n as isize - 1);
            if off != 0 {
                at_origin = false;
            }
            let z = off as f64 * h;
            r2 += z * z;
        }
        *w = if at_origin {
            singular_cell_weight
        } else {
            kernel.eval_radial(r2.sqrt()) * cell_volume
        };
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < wn {
                break;
            }
            idx[d] = 0;
        }
    }
    debug_assert!(weights.iter().all(|&w| w > 0.0));
    Ok(KernelTable {
        grid: *grid,
        kernel: *kernel,
        weights,
        singular_cell_weight,
        fft: OnceLock::new(),
    })
}

fn origin_cell_weight(kernel: &Kernel, h: f64) -> Result<f64> {
    let c = 0.5 * h;
    match kernel.family {
        KernelFamily::Riesz { theta } => riesz_cell_weight(theta, kernel.dim, h),
        _ => {
            let k = *kernel;
            let f = move |z: &[f64]| {
                let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                k.eval_radial(r)
            };
            adaptive_cubature(&f, &vec![-c; kernel.dim], &vec![c; kernel.dim], 1e-8)
        }
    }
}

/// Exact integral of |z|^{theta-N} over the cell [-h/2, h/2]^N: closed-form
/// ball part plus a regular radial remainder (the sphere/cube overlap has a
/// known angular measure in every dimension we support).
pub fn riesz_cell_weight(theta: f64, dim: usize, h: f64) -> Result<f64> {
    let c = 0.5 * h;
    let omega = sphere_area(dim);
    let ball = omega * c.powf(theta) / theta;
    match dim {
        1 => Ok(ball), // the 1D "cell" is exactly the ball [-c, c]
        2 => {
            // angular measure inside the square for c < r <= c*sqrt(2)
            let corner = adaptive_simpson(
                &|r: f64| {
                    let frac = 2.0 * std::f64::consts::PI - 8.0 * (c / r).acos();
                    r.powf(theta - 1.0) * frac
                },
                c,
                c * 2f64.sqrt(),
                1e-10,
            )?;
            Ok(ball + corner)
        }
        3 => {
            let corner = adaptive_simpson(
                &|r: f64| r.powf(theta - 1.0) * cube_sphere_angle(c / r),
                c,
                c * 3f64.sqrt(),
                1e-9,
            )?;
            Ok(ball + corner)
        }
        d => Err(Error::domain(format!("unsupported dimension {d}"))),
    }
}

/// Solid angle (area on the unit sphere) lying inside the cube of half-width
/// `alpha` <= 1, by inclusion-exclusion over the six face caps and twelve
/// edge overlaps. Zero at alpha = 1/sqrt(3), 4π at alpha >= 1.
fn cube_sphere_angle(alpha: f64) -> f64 {
    let full = 4.0 * std::f64::consts::PI;
    if alpha >= 1.0 {
        return full;
    }
    let caps = 6.0 * 2.0 * std::f64::consts::PI * (1.0 - alpha);
    let mut edges = 0.0;
    if alpha < std::f64::consts::FRAC_1_SQRT_2 {
        let hi = (1.0 - alpha * alpha).sqrt();
        edges = 12.0
            * adaptive_simpson(
                &|u: f64| {
                    let rho = (1.0 - u * u).sqrt();
                    2.0 * (alpha / rho).min(1.0).acos()
                },
                alpha,
                hi,
                1e-10,
            )
            .unwrap_or(0.0);
    }
    (full - caps + edges).max(0.0)
}

impl KernelTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn singular_cell_weight(&self) -> f64 {
        self.singular_cell_weight
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// (J*f)(x_i) = Σ_j weights(i-j)·f(x_j) with zero extension of f.
    /// Nonnegative input yields nonnegative output (all weights positive).
    pub fn conv(&self, f: &Field) -> Result<Field> {
        self.conv_with(f, ConvMethod::Auto)
    }

    pub fn conv_with(&self, f: &Field, method: ConvMethod) -> Result<Field> {
        if f.grid() != &self.grid {
            return Err(Error::domain("convolution requires the table's grid"));
        }
        let n = self.grid.points_per_axis() as f64;
        let dim = self.grid.dim() as u32;
        let direct_cost = (2.0 * n - 1.0).powi(dim as i32) * n.powi(dim as i32);
        let use_direct = match method {
            ConvMethod::Direct => true,
            ConvMethod::Fft => false,
            ConvMethod::Auto => direct_cost <= DIRECT_COST_CAP,
        };
        let values = if use_direct { self.conv_direct(f) } else { self.conv_fft(f) };
        Field::from_values(&self.grid, BoundaryRule::Zero, values)
    }

    fn conv_direct(&self, f: &Field) -> Vec<f64> {
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        let wn = 2 * n - 1;
        let fv = f.values();
        let total = self.grid.total_points();
        let mut out = vec![0.0; total];

        if dim == 1 {
            for (i, out_i) in out.iter_mut().enumerate() {
                let base = i + n - 1;
                let mut acc = 0.0;
                for (j, &fj) in fv.iter().enumerate() {
                    acc += self.weights[base - j] * fj;
                }
                *out_i = acc;
            }
            return out;
        }

        let mut ci = [0usize; 3];
        for out_i in out.iter_mut() {
            let mut acc = 0.0;
            let mut cj = [0usize; 3];
            for (j, &fj) in fv.iter().enumerate() {
                let _ = j;
                let mut widx = 0usize;
                for d in 0..dim {
                    widx = widx * wn + (ci[d] + n - 1 - cj[d]);
                }
                acc += self.weights[widx] * fj;
                for d in (0..dim).rev() {
                    cj[d] += 1;
                    if cj[d] < n {
                        break;
                    }
                    cj[d] = 0;
                }
            }
            *out_i = acc;
            for d in (0..dim).rev() {
                ci[d] += 1;
                if ci[d] < n {
                    break;
                }
                ci[d] = 0;
            }
        }
        out
    }

    fn fft_data(&self) -> &FftData {
        self.fft.get_or_init(|| {
            let n = self.grid.points_per_axis();
            let dim = self.grid.dim();
            let wn = 2 * n - 1;
            let m = next_fast_len(3 * n - 2);
            let total = m.pow(dim as u32);
            let mut planner = FftPlanner::new();
            let fwd = planner.plan_fft_forward(m);
            let inv = planner.plan_fft_inverse(m);
            let mut kernel_hat = vec![C64::new(0.0, 0.0); total];
            embed(&self.weights, wn, &mut kernel_hat, m, dim);
            fft_nd(&mut kernel_hat, m, dim, &fwd);
            FftData { m, kernel_hat, fwd, inv }
        })
    }

    fn conv_fft(&self, f: &Field) -> Vec<f64> {
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        let data = self.fft_data();
        let m = data.m;
        let total = m.pow(dim as u32);
        let mut buf = vec![C64::new(0.0, 0.0); total];
        embed(f.values(), n, &mut buf, m, dim);
        fft_nd(&mut buf, m, dim, &data.fwd);
        for (b, k) in buf.iter_mut().zip(&data.kernel_hat) {
            *b *= k;
        }
        fft_nd(&mut buf, m, dim, &data.inv);
        let scale = 1.0 / total as f64;

        // out[i] = circular result at i + (n-1) along every axis
        let out_total = self.grid.total_points();
        let mut out = vec![0.0; out_total];
        let mut ci = [0usize; 3];
        for out_i in out.iter_mut() {
            let mut flat = 0usize;
            for d in 0..dim {
                flat = flat * m + ci[d] + n - 1;
            }
            *out_i = buf[flat].re * scale;
            for d in (0..dim).rev() {
                ci[d] += 1;
                if ci[d] < n {
                    break;
                }
                ci[d] = 0;
            }
        }
        out
    }
}

/// Copies a cube of side `src_n` into the corner of a cube of side `m`.
fn embed(src: &[f64], src_n: usize, dst: &mut [C64], m: usize, dim: usize) {
    let mut ci = [0usize; 3];
    for &v in src {
        let mut flat = 0usize;
        for d in 0..dim {
            flat = flat * m + ci[d];
        }
        dst[flat] = C64::new(v, 0.0);
        for d in (0..dim).rev() {
            ci[d] += 1;
            if ci[d] < src_n {
                break;
            }
            ci[d] = 0;
        }
    }
}

fn fft_nd(data: &mut [C64], m: usize, dim: usize, plan: &Arc<dyn Fft<f64>>) {
    let total = data.len();
    let mut scratch = vec![C64::new(0.0, 0.0); m];
    let mut stride = 1usize;
    for _axis in 0..dim {
        let block = stride * m;
        let blocks = total / block;
        for blk in 0..blocks {
            for inner in 0..stride {
                let start = blk * block + inner;
                for k in 0..m {
                    scratch[k] = data[start + k * stride];
                }
                plan.process(&mut scratch);
                for k in 0..m {
                    data[start + k * stride] = scratch[k];
                }
            }
        }
        stride *= m;
    }
}

/// Smallest integer >= x with no prime factor above 5.
fn next_fast_len(x: usize) -> usize {
    let mut m = x.max(2);
    loop {
        let mut r = m;
        for p in [2usize, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Upper bound on the truncated mass ∫_{|y|>L} J(x-y)·scale·Ψ_env(y) dy via
/// monotone radial majorants. Returns +∞ when the tail integral diverges
/// (Riesz kernel against an envelope with a <= theta), which is the
/// non-existence regime.
pub fn tail_correction(
    kernel: &Kernel,
    env: &Envelope,
    scale: f64,
    x: &[f64],
    l: f64,
) -> Result<f64> {
    if scale == 0.0 {
        return Ok(0.0);
    }
    if !(scale > 0.0) {
        return Err(Error::domain(format!("tail bound needs scale >= 0, got {scale}")));
    }
    let dim = x.len();
    if dim != kernel.dim {
        return Err(Error::domain("point dimension does not match the kernel"));
    }
    let r0 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(r0 < l) {
        return Err(Error::domain(format!(
            "tail bound requires |x| = {r0} inside the ball of radius L = {l}"
        )));
    }
    let omega = sphere_area(dim);
    let n1 = dim - 1; // exponent of the radial volume factor
    let bound = match kernel.family {
        KernelFamily::ExpPoly { beta, .. } => {
            // J(x-y) <= e^{beta|x|} e^{-beta|y|}; Ψ(y) <= max(1,|y|)^{-a} e^{-b|y|}
            let kappa = beta + env.b;
            omega * (beta * r0).exp() * l.max(1.0).powf(-env.a) * exp_tail_moment(n1, kappa, l)
        }
        KernelFamily::Power { alpha } => {
            if env.b > 0.0 {
                omega
                    * (1.0 + l - r0).powf(-alpha)
                    * l.max(1.0).powf(-env.a)
                    * exp_tail_moment(n1, env.b, l)
            } else {
                // (1 + rho - |x|) >= rho (1 - |x|/L) for rho >= L
                let shrink = (1.0 - r0 / l).powf(-alpha);
                omega * shrink * l.powf(dim as f64 - env.a - alpha) / (alpha + env.a - dim as f64)
            }
        }
        KernelFamily::Riesz { theta } => {
            let shrink = (1.0 - r0 / l).powf(theta - dim as f64);
            if env.b > 0.0 {
                let ex = theta - env.a - 1.0;
                if ex <= 0.0 {
                    omega * shrink * l.powf(ex) * exp_tail_moment(0, env.b, l)
                } else {
                    let k = ex.ceil().min(2.0) as usize;
                    omega * shrink * l.powf(ex - k as f64) * exp_tail_moment(k, env.b, l)
                }
            } else {
                if env.a <= theta {
                    return Ok(f64::INFINITY);
                }
                omega * shrink * l.powf(theta - env.a) / (env.a - theta)
            }
        }
    };
    Ok(scale * bound)
}

/// ∫_L^∞ t^k e^{-kappa t} dt for k in {0, 1, 2}.
fn exp_tail_moment(k: usize, kappa: f64, l: f64) -> f64 {
    let e = (-kappa * l).exp();
    match k {
        0 => e / kappa,
        1 => e * (l / kappa + 1.0 / (kappa * kappa)),
        2 => e * (l * l / kappa + 2.0 * l / (kappa * kappa) + 2.0 / kappa.powi(3)),
        _ => unreachable!("dimension capped at 3"),
    }
}

/// Measured Hölder quotient of the convolution operator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HolderReport {
    pub quotient_sup: f64,
    pub pairs_used: usize,
}

/// Samples random node pairs with |x-y| <= L/4 and reports
/// sup |Tf(x)-Tf(y)| / (|x-y|^{theta-N/r} ‖f‖_r), the discrete counterpart
/// of the operator's Hölder bound. ‖f‖_r is cell-volume weighted so the
/// quotient is grid-consistent.
pub fn holder_diagnostic(
    table: &KernelTable,
    f: &Field,
    r: f64,
    pair_count: usize,
    rng: &mut impl Rng,
) -> Result<HolderReport> {
    let g = table.grid();
    let dim = g.dim() as f64;
    let theta = table.kernel().theta;
    let nr = dim / r;
    if !(r > 1.0) || !(nr < theta && nr > theta - 1.0) {
        return Err(Error::hypothesis(format!(
            "holder window requires r > 1 with theta-1 < N/r < theta; got N/r = {nr}, theta = {theta}"
        )));
    }
    let tf = table.conv(f)?;
    let h = g.spacing();
    let norm_r = h.powf(dim / r)
        * f.values()
            .iter()
            .map(|v| v.abs().powf(r))
            .sum::<f64>()
            .powf(1.0 / r);
    if norm_r == 0.0 {
        return Ok(HolderReport { quotient_sup: 0.0, pairs_used: pair_count });
    }
    let total = g.total_points();
    let max_dist = g.half_width() / 4.0;
    let exponent = theta - nr;
    let mut sup: f64 = 0.0;
    let mut used = 0usize;
    let mut attempts = 0usize;
    let mut xi = [0.0; 3];
    let mut xj = [0.0; 3];
    while used < pair_count {
        attempts += 1;
        if attempts > 500 * pair_count {
            return Err(Error::domain(
                "could not sample enough node pairs within L/4",
            ));
        }
        let i = rng.random_range(0..total);
        let j = rng.random_range(0..total);
        if i == j {
            continue;
        }
        g.node_coords(i, &mut xi[..g.dim()]);
        g.node_coords(j, &mut xj[..g.dim()]);
        let dist = xi[..g.dim()]
            .iter()
            .zip(&xj[..g.dim()])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist > max_dist {
            continue;
        }
        let q = (tf.values()[i] - tf.values()[j]).abs() / (dist.powf(exponent) * norm_r);
        sup = sup.max(q);
        used += 1;
    }
    Ok(HolderReport { quotient_sup: sup, pairs_used: used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{Envelope, Kernel};
    use crate::grid::{BoundaryRule, Field, Grid};
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn riesz_singular_weight_1d_closed_form() {
        // ∫_{-h/2}^{h/2} |t|^{theta-1} dt = 2 (h/2)^theta / theta
        let h = 0.1;
        let theta = 0.5;
        let w = riesz_cell_weight(theta, 1, h).unwrap();
        assert_relative_eq!(w, 2.0 * (h / 2.0f64).powf(theta) / theta, max_relative = 1e-14);
    }

    #[test]
    fn riesz_singular_weight_2d_against_radial_oracle() {
        // independent oracle: integrating the radial part exactly leaves
        // W = 8 c^theta/theta ∫_0^{pi/4} sec^theta(phi) dphi; frozen at
        // 30-digit precision for theta = 0.5, h = 0.2
        let w = riesz_cell_weight(0.5, 2, 0.2).unwrap();
        assert_relative_eq!(w, 4.2040392677558638, max_relative = 1e-8);
    }

    #[test]
    fn cube_sphere_angle_limits() {
        let full = 4.0 * std::f64::consts::PI;
        assert_relative_eq!(cube_sphere_angle(1.0), full);
        // vanishes when the sphere touches the cube corners
        let at_corner = cube_sphere_angle(1.0 / 3f64.sqrt());
        assert!(at_corner.abs() < 1e-6, "{at_corner}");
        // monotone between the regimes
        assert!(cube_sphere_angle(0.9) < full);
        assert!(cube_sphere_angle(0.9) > cube_sphere_angle(0.7));
    }

    #[test]
    fn riesz_singular_weight_3d_against_radial_oracle() {
        // same radial reduction on the sphere, frozen for theta = 1.5,
        // h = 0.2 (the reduction reproduces the cell volume at theta = N)
        let w = riesz_cell_weight(1.5, 3, 0.2).unwrap();
        assert_relative_eq!(w, 0.35968458494934808, max_relative = 1e-6);
    }

    #[test]
    fn total_weight_matches_l1_norm() {
        let g = Grid::new(1, 30.0, 257).unwrap();
        let k = Kernel::exp_poly(0.0, 1.0, 1).unwrap();
        let t = build_table(&k, &g).unwrap();
        assert_relative_eq!(t.total_weight(), 2.0, max_relative = 1e-2);
        assert!(t.total_weight() <= k.l1_norm_upper().unwrap() + 1e-2);

        let k = Kernel::power(2.0, 1).unwrap();
        let t = build_table(&k, &g).unwrap();
        assert!((t.total_weight() - 2.0).abs() < 0.08); // tail ~ 2/31 at L = 30
        assert!(t.total_weight() <= k.l1_norm_upper().unwrap() + 1e-6);
    }

    #[test]
    fn conv_impulse_recovers_kernel_profile() {
        let g = Grid::new(1, 10.0, 65).unwrap();
        let h = g.spacing();
        let k = Kernel::exp_poly(1.0, 2.0, 1).unwrap();
        let t = build_table(&k, &g).unwrap();
        let center = g.total_points() / 2;
        let mut vals = vec![0.0; g.total_points()];
        vals[center] = 1.0 / h;
        let f = Field::from_values(&g, BoundaryRule::Zero, vals).unwrap();
        let out = t.conv_with(&f, ConvMethod::Direct).unwrap();
        for (i, &v) in out.values().iter().enumerate() {
            if i == center {
                continue; // origin cell carries the quadrature weight
            }
            let dist = (i as f64 - center as f64).abs() * h;
            assert_relative_eq!(v, k.eval_radial(dist), max_relative = 1e-12);
        }
    }

    #[test]
    fn conv_zero_is_zero() {
        let g = Grid::new(1, 5.0, 33).unwrap();
        let k = Kernel::power(2.0, 1).unwrap();
        let t = build_table(&k, &g).unwrap();
        let f = Field::constant(&g, 0.0, BoundaryRule::Zero);
        assert_eq!(t.conv(&f).unwrap().max_norm(), 0.0);
    }

    #[test]
    fn direct_and_fft_agree_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::new(1, 12.0, 257).unwrap();
        let k = Kernel::exp_poly(0.5, 1.5, 1).unwrap();
        let t = build_table(&k, &g).unwrap();
        let vals: Vec<f64> = (0..g.total_points()).map(|_| rng.random_range(0.0..1.0)).collect();
        let f = Field::from_values(&g, BoundaryRule::Zero, vals).unwrap();
        let a = t.conv_with(&f, ConvMethod::Direct).unwrap();
        let b = t.conv_with(&f, ConvMethod::Fft).unwrap();
        let scale = a.max_norm();
        assert!(a.max_abs_diff(&b) <= 1e-12 * scale);
    }

    #[test]
    fn conv_linearity_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid::new(1, 8.0, 129).unwrap();
        let k = Kernel::riesz(0.5, 1).unwrap();
        let t = build_table(&k, &g).unwrap();
        let fa: Vec<f64> = (0..g.total_points()).map(|_| rng.random_range(0.0..1.0)).collect();
        let fb: Vec<f64> = (0..g.total_points()).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = Field::from_values(&g, BoundaryRule::Zero, fa.clone()).unwrap();
        let b = Field::from_values(&g, BoundaryRule::Zero, fb.clone()).unwrap();
        let sum = Field::from_values(
            &g,
            BoundaryRule::Zero,
            fa.iter().zip(&fb).map(|(x, y)| x + y).collect(),
        )
        .unwrap();
        let ca = t.conv(&a).unwrap();
        let cb = t.conv(&b).unwrap();
        let csum = t.conv(&sum).unwrap();
        assert!(ca.values().iter().all(|&v| v >= 0.0));
        let mut worst = 0.0f64;
        for i in 0..g.total_points() {
            worst = worst.max((csum.values()[i] - ca.values()[i] - cb.values()[i]).abs());
        }
        assert!(worst <= 1e-12 * csum.max_norm());
    }

    #[test]
    fn conv_translation_equivariance() {
        let g = Grid::new(1, 8.0, 129).unwrap();
        let k = Kernel::exp_poly(0.0, 2.0, 1).unwrap();
        let t = build_table(&k, &g).unwrap();
        let center = g.total_points() / 2;
        let shift = 7usize;
        let mut v1 = vec![0.0; g.total_points()];
        v1[center] = 1.0;
        let mut v2 = vec![0.0; g.total_points()];
        v2[center + shift] = 1.0;
        let c1 = t
            .conv_with(&Field::from_values(&g, BoundaryRule::Zero, v1).unwrap(), ConvMethod::Direct)
            .unwrap();
        let c2 = t
            .conv_with(&Field::from_values(&g, BoundaryRule::Zero, v2).unwrap(), ConvMethod::Direct)
            .unwrap();
        for i in 0..g.total_points() - shift {
            assert_eq!(c1.values()[i], c2.values()[i + shift]);
        }
    }

    #[test]
    fn tail_correction_exppoly_reference() {
        // exponential kernel against an exponential envelope: the analytic
        // majorant dominates brute-force quadrature and is tiny at the L
        // where the envelope has decayed to 1e-8
        let env = Envelope::new(1.0, 1.0).unwrap();
        let l = env.half_width_for_decay(1e-8).unwrap();
        let k = Kernel::exp_poly(1.0, 2.0, 1).unwrap();
        let scale = 1.0;
        let x = [0.0];
        let bound = tail_correction(&k, &env, scale, &x, l).unwrap();
        // brute force: 2 ∫_L^{L+40} J(t) Ψ(t) dt (symmetric tails at x = 0)
        let brute = 2.0
            * crate::quad::adaptive_simpson(
                &|t: f64| k.eval_radial(t) * env.psi_radial(t),
                l,
                l + 40.0,
                1e-12,
            )
            .unwrap();
        assert!(bound >= brute, "majorant must dominate: {bound} < {brute}");
        assert!(bound <= 1e-7 * scale, "bound {bound} too large");
    }

    #[test]
    fn tail_correction_riesz_divergence_marker() {
        // theta = 0.5 against envelope a = 0.4: theta - a >= 0, divergent
        let k = Kernel::riesz(0.5, 1).unwrap();
        let env = Envelope::new(0.4, 0.0).unwrap();
        let b = tail_correction(&k, &env, 1.0, &[0.0], 50.0).unwrap();
        assert!(b.is_infinite());

        // integrable regime gives a finite certificate
        let env = Envelope::new(0.9, 0.0).unwrap();
        let b = tail_correction(&k, &env, 1.0, &[0.0], 50.0).unwrap();
        assert!(b.is_finite() && b > 0.0);
    }

    #[test]
    fn tail_correction_zero_scale() {
        let k = Kernel::riesz(0.5, 1).unwrap();
        let env = Envelope::new(0.4, 0.0).unwrap();
        assert_eq!(tail_correction(&k, &env, 0.0, &[0.0], 50.0).unwrap(), 0.0);
    }

    #[test]
    fn holder_zero_and_impulse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Grid::new(1, 8.0, 129).unwrap();
        let k = Kernel::riesz(0.5, 1).unwrap();
        let t = build_table(&k, &g).unwrap();

        let zero = Field::constant(&g, 0.0, BoundaryRule::Zero);
        let rep = holder_diagnostic(&t, &zero, 4.0, 100, &mut rng).unwrap();
        assert_eq!(rep.quotient_sup, 0.0);

        let mut v = vec![0.0; g.total_points()];
        v[g.total_points() / 2] = 1.0;
        let imp = Field::from_values(&g, BoundaryRule::Zero, v).unwrap();
        let rep = holder_diagnostic(&t, &imp, 4.0, 500, &mut rng).unwrap();
        assert!(rep.quotient_sup.is_finite() && rep.quotient_sup > 0.0);
        assert_eq!(rep.pairs_used, 500);

        // window gate: N/r outside (theta-1, theta)
        assert!(holder_diagnostic(&t, &imp, 1.2, 10, &mut rng).is_err());
    }

    #[test]
    fn holder_quotient_stable_under_refinement() {
        // same kernel and input class on n = 129 / 257 / 513
        let mut sups = Vec::new();
        for n in [129usize, 257, 513] {
            let mut rng = ChaCha8Rng::seed_from_u64(2024);
            let g = Grid::new(1, 8.0, n).unwrap();
            let k = Kernel::riesz(0.5, 1).unwrap();
            let t = build_table(&k, &g).unwrap();
            let f = Field::sample(&g, BoundaryRule::Zero, |x| {
                (1.0 + (3.0 * x[0]).sin()).abs()
            })
            .unwrap();
            let rep = holder_diagnostic(&t, &f, 4.0, 2000, &mut rng).unwrap();
            sups.push(rep.quotient_sup);
        }
        for w in sups.windows(2) {
            let ratio = w[1] / w[0];
            assert!(ratio < 2.0 && ratio > 0.5, "quotient drifted: {sups:?}");
        }
    }
}
