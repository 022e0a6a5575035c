//! Uniform grids on the truncated box [-L, L]^N, second-order finite
//! differences, and a Helmholtz solver whose discrete operator is a strictly
//! diagonally dominant M-matrix, so ordered data produce ordered solutions.

use crate::analytic::Envelope;
use crate::error::{Error, Result};
use serde::Serialize;
use std::io::{Read, Write};
use std::path::Path;

/// Uniform grid with n nodes per axis on [-L, L]^N; n is odd so the origin
/// (the envelope peak) is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    l: f64,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, l: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::domain(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::domain(format!("half-width must be positive, got {l}")));
        }
        if n < 16 || n % 2 == 0 {
            return Err(Error::domain(format!(
                "n = {n}: need at least 16 points per axis and n odd so x = 0 is a node"
            )));
        }
        let h = 2.0 * l / (n - 1) as f64;
        Ok(Grid { dim, n, l, h })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn total_points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Same box, doubled resolution (n -> 2n - 1).
    pub fn refined(&self) -> Grid {
        Grid::new(self.dim, self.l, 2 * self.n - 1).expect("refinement keeps n odd")
    }

    /// Coordinate of axis index i: -L + i h.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    pub fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        let mut acc = 1;
        for d in (0..self.dim).rev() {
            s[d] = acc;
            acc *= self.n;
        }
        s
    }

    /// Decodes a flat (row-major) index into coordinates.
    pub fn node_coords(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            out[d] = self.axis_coord(rem % self.n);
            rem /= self.n;
        }
    }

    pub fn node_radius(&self, flat: usize) -> f64 {
        let mut c = [0.0; 3];
        self.node_coords(flat, &mut c[..self.dim]);
        c[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Visits every node in row-major order with its coordinates.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut idx = [0usize; 3];
        let mut coords = [0.0f64; 3];
        for d in 0..self.dim {
            coords[d] = self.axis_coord(0);
        }
        let total = self.total_points();
        for flat in 0..total {
            f(flat, &coords[..self.dim]);
            for d in (0..self.dim).rev() {
                idx[d] += 1;
                if idx[d] < self.n {
                    coords[d] = self.axis_coord(idx[d]);
                    break;
                }
                idx[d] = 0;
                coords[d] = self.axis_coord(0);
            }
        }
    }

    /// Half-width so that the slowest of the given envelopes has decayed to
    /// `target` relative to its peak. None if every envelope is constant.
    pub fn choose_half_width(envelopes: &[Envelope], target: f64) -> Option<f64> {
        envelopes
            .iter()
            .filter_map(|e| e.half_width_for_decay(target))
            .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))))
    }
}

/// Ghost-value rule outside the box: zero extension, or the trace of a
/// scaled envelope evaluated at the ghost coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryRule {
    Zero,
    EnvelopeTrace { env: Envelope, scale: f64 },
}

impl BoundaryRule {
    pub fn ghost_value(&self, coord: &[f64]) -> f64 {
        match self {
            BoundaryRule::Zero => 0.0,
            BoundaryRule::EnvelopeTrace { env, scale } => scale * env.psi(coord),
        }
    }
}

/// Scalar samples on a grid plus the extension rule used for ghost nodes.
/// Values are immutable after construction.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    boundary: BoundaryRule,
}

impl Field {
    /// Nodewise evaluation of `f`; rejects non-finite samples.
    pub fn sample(grid: &Grid, boundary: BoundaryRule, f: impl Fn(&[f64]) -> f64) -> Result<Field> {
        let mut values = vec![0.0; grid.total_points()];
        let mut bad = None;
        grid.for_each_node(|i, x| {
            let v = f(x);
            if !v.is_finite() && bad.is_none() {
                bad = Some((i, v));
            }
            values[i] = v;
        });
        if let Some((i, v)) = bad {
            return Err(Error::NonFinite(format!("sample value {v} at node {i}")));
        }
        Ok(Field { grid: *grid, values, boundary })
    }

    pub fn constant(grid: &Grid, value: f64, boundary: BoundaryRule) -> Field {
        Field { grid: *grid, values: vec![value; grid.total_points()], boundary }
    }

    pub fn from_values(grid: &Grid, boundary: BoundaryRule, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.total_points() {
            return Err(Error::domain(format!(
                "value count {} does not match grid ({} nodes)",
                values.len(),
                grid.total_points()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value {v}")));
        }
        Ok(Field { grid: *grid, values, boundary })
    }

    pub fn grid(&self) -> &Grid {
        self.grid_ref()
    }

    fn grid_ref(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary(&self) -> &BoundaryRule {
        &self.boundary
    }

    pub fn with_boundary(&self, boundary: BoundaryRule) -> Field {
        Field { grid: self.grid, values: self.values.clone(), boundary }
    }

    /// Elementwise map into a new field (same grid, given boundary rule).
    pub fn map(&self, boundary: BoundaryRule, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::from_values(&self.grid, boundary, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, boundary: BoundaryRule, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::domain("zip_with requires matching grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::from_values(&self.grid, boundary, values)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// inf and sup of self/den over nodes with |x| <= max_radius (all nodes
    /// when None). Errors when a denominator value is not strictly positive.
    pub fn ratio_bounds_over(&self, den: &Field, max_radius: Option<f64>) -> Result<(f64, f64)> {
        if self.grid != den.grid {
            return Err(Error::domain("ratio requires matching grids"));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut count = 0usize;
        for i in 0..self.values.len() {
            if let Some(r) = max_radius {
                if self.grid.node_radius(i) > r {
                    continue;
                }
            }
            let d = den.values[i];
            if !(d > 0.0) {
                return Err(Error::domain(format!(
                    "ratio denominator must be positive, got {d} at node {i}"
                )));
            }
            let q = self.values[i] / d;
            lo = lo.min(q);
            hi = hi.max(q);
            count += 1;
        }
        if count == 0 {
            return Err(Error::domain("no nodes inside the requested radius"));
        }
        Ok((lo, hi))
    }

    /// Second-order central-difference Laplacian Δ_h, with ghost values
    /// supplied by this field's boundary rule. Exact on affine and quadratic
    /// polynomials at interior nodes.
    pub fn laplacian(&self) -> Field {
        let g = &self.grid;
        let n = g.n;
        let inv_h2 = 1.0 / (g.h * g.h);
        let strides = g.strides();
        let mut out = vec![0.0; self.values.len()];
        let mut idx = [0usize; 3];
        let mut ghost_coord = [0.0f64; 3];
        let total = g.total_points();
        for flat in 0..total {
            let mut acc = 0.0;
            for d in 0..g.dim {
                let c = idx[d];
                let left = if c > 0 {
                    self.values[flat - strides[d]]
                } else {
                    g.node_coords(flat, &mut ghost_coord[..g.dim]);
                    ghost_coord[d] = -g.l - g.h;
                    self.boundary.ghost_value(&ghost_coord[..g.dim])
                };
                let right = if c < n - 1 {
                    self.values[flat + strides[d]]
                } else {
                    g.node_coords(flat, &mut ghost_coord[..g.dim]);
                    ghost_coord[d] = g.l + g.h;
                    self.boundary.ghost_value(&ghost_coord[..g.dim])
                };
                acc += (left - 2.0 * self.values[flat] + right) * inv_h2;
            }
            out[flat] = acc;
            for d in (0..g.dim).rev() {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
            }
        }
        Field { grid: *g, values: out, boundary: self.boundary }
    }

    /// Writes the flat binary format: N, n (little-endian u64), L
    /// (little-endian f64), then n^N values as little-endian f64 row-major.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&(self.grid.dim as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&self.grid.l.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the flat binary format; the loaded field carries a zero
    /// extension rule (the file does not store one).
    pub fn read_binary(path: &Path) -> Result<Field> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let dim = u64::from_le_bytes(u64buf) as usize;
        r.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        r.read_exact(&mut u64buf)?;
        let l = f64::from_le_bytes(u64buf);
        let grid = Grid::new(dim, l, n).map_err(|e| Error::Format(e.to_string()))?;
        let mut values = vec![0.0; grid.total_points()];
        let mut vbuf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut vbuf).map_err(|_| {
                Error::Format("file truncated before all field values were read".into())
            })?;
            *v = f64::from_le_bytes(vbuf);
        }
        if r.read(&mut vbuf)? != 0 {
            return Err(Error::Format("trailing bytes after field values".into()));
        }
        Field::from_values(&grid, BoundaryRule::Zero, values)
    }

    /// CSV export with coordinate columns (1D and 2D only); `meta` lines are
    /// emitted first, prefixed with '#'.
    pub fn write_csv<W: Write>(&self, w: &mut W, meta: &[String]) -> Result<()> {
        if self.grid.dim > 2 {
            return Err(Error::domain("csv export supports 1D and 2D fields only"));
        }
        for line in meta {
            writeln!(w, "# {line}")?;
        }
        if self.grid.dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        let mut err = None;
        self.grid.for_each_node(|i, x| {
            let res = if self.grid.dim == 1 {
                writeln!(w, "{},{}", x[0], self.values[i])
            } else {
                writeln!(w, "{},{},{}", x[0], x[1], self.values[i])
            };
            if let Err(e) = res {
                if err.is_none() {
                    err = Some(e);
                }
            }
        });
        match err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

/// Matrix-free application of (-Δ_h + λ) with homogeneous ghost data; the
/// inhomogeneous ghost contribution is folded into the right-hand side.
struct HelmholtzOperator {
    grid: Grid,
    lambda: f64,
}

impl HelmholtzOperator {
    fn apply(&self, w: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.n;
        let inv_h2 = 1.0 / (g.h * g.h);
        let diag = self.lambda + 2.0 * g.dim as f64 * inv_h2;
        let strides = g.strides();
        let mut idx = [0usize; 3];
        for (flat, out_v) in out.iter_mut().enumerate() {
            let mut acc = diag * w[flat];
            for d in 0..g.dim {
                let c = idx[d];
                if c > 0 {
                    acc -= w[flat - strides[d]] * inv_h2;
                }
                if c < n - 1 {
                    acc -= w[flat + strides[d]] * inv_h2;
                }
            }
            *out_v = acc;
            for d in (0..g.dim).rev() {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// Relative 2-norm residual target for the linear solves.
pub const LINEAR_TOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 50_000;

/// Solves (-Δ_h + λ) w = rhs with Dirichlet ghost data from `boundary`.
///
/// The discrete matrix is strictly diagonally dominant with nonpositive
/// off-diagonal entries, so nonnegative data produce a nonnegative solution.
/// Conjugate gradients down to a relative residual of 1e-10.
pub fn helmholtz_solve(lambda: f64, rhs: &Field, boundary: BoundaryRule) -> Result<Field> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("helmholtz rate must be positive, got {lambda}")));
    }
    let g = *rhs.grid();
    let mut b = rhs.values().to_vec();
    add_ghost_contributions(&g, &boundary, &mut b);
    let op = HelmholtzOperator { grid: g, lambda };
    let x = conjugate_gradient(&op, &b, LINEAR_TOL, CG_MAX_ITER)?;
    Ok(Field { grid: g, values: x, boundary })
}

fn add_ghost_contributions(g: &Grid, boundary: &BoundaryRule, b: &mut [f64]) {
    if matches!(boundary, BoundaryRule::Zero) {
        return;
    }
    let n = g.n;
    let inv_h2 = 1.0 / (g.h * g.h);
    let mut idx = [0usize; 3];
    let mut coord = [0.0f64; 3];
    for flat in 0..g.total_points() {
        let on_edge = (0..g.dim).any(|d| idx[d] == 0 || idx[d] == n - 1);
        if on_edge {
            for d in 0..g.dim {
                if idx[d] == 0 {
                    g.node_coords(flat, &mut coord[..g.dim]);
                    coord[d] = -g.l - g.h;
                    b[flat] += boundary.ghost_value(&coord[..g.dim]) * inv_h2;
                }
                if idx[d] == n - 1 {
                    g.node_coords(flat, &mut coord[..g.dim]);
                    coord[d] = g.l + g.h;
                    b[flat] += boundary.ghost_value(&coord[..g.dim]) * inv_h2;
                }
            }
        }
        for d in (0..g.dim).rev() {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient(
    op: &HelmholtzOperator,
    b: &[f64],
    tol_rel: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let m = b.len();
    let norm_b = dot(b, b).sqrt();
    if norm_b == 0.0 {
        return Ok(vec![0.0; m]);
    }
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let mut rs = dot(&r, &r);
    for _ in 0..max_iter {
        op.apply(&p, &mut ap);
        let alpha = rs / dot(&p, &ap);
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= tol_rel * norm_b {
            return Ok(x);
        }
        let beta = rs_new / rs;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Err(Error::IterationLimit {
        what: "conjugate gradient".into(),
        residual: rs.sqrt() / norm_b,
    })
}

/// Test hook for the discrete comparison principle: with rhs1 >= rhs2
/// nodewise and ordered ghost data, the solutions must be ordered nodewise.
pub fn monotone_check(
    lambda: f64,
    rhs1: &Field,
    rhs2: &Field,
    b1: BoundaryRule,
    b2: BoundaryRule,
) -> Result<bool> {
    if rhs1.grid() != rhs2.grid() {
        return Err(Error::domain("monotone_check requires matching grids"));
    }
    for (i, (a, b)) in rhs1.values().iter().zip(rhs2.values()).enumerate() {
        if a < b {
            return Err(Error::domain(format!(
                "monotone_check precondition rhs1 >= rhs2 fails at node {i}: {a} < {b}"
            )));
        }
    }
    let g = rhs1.grid();
    let mut zeros1 = vec![0.0; g.total_points()];
    let mut zeros2 = zeros1.clone();
    add_ghost_contributions(g, &b1, &mut zeros1);
    add_ghost_contributions(g, &b2, &mut zeros2);
    for (i, (a, b)) in zeros1.iter().zip(&zeros2).enumerate() {
        if a < b {
            return Err(Error::domain(format!(
                "monotone_check precondition b1 >= b2 fails near node {i}"
            )));
        }
    }
    let w1 = helmholtz_solve(lambda, rhs1, b1)?;
    let w2 = helmholtz_solve(lambda, rhs2, b2)?;
    Ok(w1.values().iter().zip(w2.values()).all(|(a, b)| a >= b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::Envelope;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1d(n: usize, l: f64) -> Grid {
        Grid::new(1, l, n).unwrap()
    }

    #[test]
    fn grid_construction_rules() {
        assert!(Grid::new(1, 10.0, 17).is_ok());
        assert!(Grid::new(1, 10.0, 18).is_err()); // even
        assert!(Grid::new(1, 10.0, 15).is_err()); // too small
        assert!(Grid::new(4, 10.0, 17).is_err());
        let g = Grid::new(2, 5.0, 21).unwrap();
        assert_eq!(g.total_points(), 441);
        assert_relative_eq!(g.spacing(), 0.5);
        // origin is a node
        let mid = g.total_points() / 2;
        assert_eq!(g.node_radius(mid), 0.0);
    }

    #[test]
    fn sample_examples() {
        let g = grid1d(33, 4.0);
        let ones = Field::sample(&g, BoundaryRule::Zero, |_| 1.0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));

        let env = Envelope::new(1.0, 1.0).unwrap();
        let psi = Field::sample(&g, BoundaryRule::Zero, |x| env.psi(x)).unwrap();
        let vals = psi.values();
        // symmetric and radially decreasing
        for i in 0..16 {
            assert_relative_eq!(vals[i], vals[32 - i], max_relative = 1e-14);
            assert!(vals[i] < vals[i + 1]);
        }

        let id = Envelope::new(0.0, 0.0).unwrap();
        let f = Field::sample(&g, BoundaryRule::Zero, |x| id.psi(x)).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));

        assert!(Field::sample(&g, BoundaryRule::Zero, |x| 1.0 / x[0]).is_err());
    }

    #[test]
    fn laplacian_constant_and_quadratic() {
        let g = grid1d(33, 4.0);
        let c = Field::constant(
            &g,
            3.5,
            BoundaryRule::EnvelopeTrace { env: Envelope::new(0.0, 0.0).unwrap(), scale: 3.5 },
        );
        assert!(c.laplacian().values().iter().all(|&v| v.abs() < 1e-11));

        // second differences are exact on quadratics at interior nodes
        let q = Field::sample(&g, BoundaryRule::Zero, |x| x[0] * x[0]).unwrap();
        let lap = q.laplacian();
        for i in 1..32 {
            assert_relative_eq!(lap.values()[i], 2.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn laplacian_matches_closed_form() {
        // -Δ Ψ from the closed-form bracket with λ = 0, order ~ 2
        let env = Envelope::new(1.0, 1.0).unwrap();
        let mut errs = Vec::new();
        for n in [65usize, 129, 257] {
            let g = grid1d(n, 6.0);
            let psi = Field::sample(
                &g,
                BoundaryRule::EnvelopeTrace { env, scale: 1.0 },
                |x| env.psi(x),
            )
            .unwrap();
            let lap = psi.laplacian();
            let mut worst = 0.0f64;
            g.for_each_node(|i, x| {
                let exact = -env.helmholtz_of_psi(0.0, x);
                worst = worst.max((lap.values()[i] - exact).abs());
            });
            errs.push(worst);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 1.9 && order2 > 1.9, "orders {order1:.2} {order2:.2}");
    }

    #[test]
    fn helmholtz_constant_solution() {
        let g = grid1d(65, 5.0);
        let lam = 3.0;
        let rhs = Field::constant(&g, lam, BoundaryRule::Zero);
        let bc = BoundaryRule::EnvelopeTrace { env: Envelope::new(0.0, 0.0).unwrap(), scale: 1.0 };
        let w = helmholtz_solve(lam, &rhs, bc).unwrap();
        for &v in w.values() {
            assert_relative_eq!(v, 1.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn helmholtz_zero_data() {
        let g = grid1d(65, 5.0);
        let rhs = Field::constant(&g, 0.0, BoundaryRule::Zero);
        let w = helmholtz_solve(2.0, &rhs, BoundaryRule::Zero).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn helmholtz_manufactured_envelope() {
        // rhs = (-Δ+λ)Ψ_{1,1} recovers Ψ_{1,1} at O(h²)
        let env = Envelope::new(1.0, 1.0).unwrap();
        let lam = 20.0;
        let mut errs = Vec::new();
        for n in [65usize, 129, 257] {
            let g = grid1d(n, 8.0);
            let rhs =
                Field::sample(&g, BoundaryRule::Zero, |x| env.helmholtz_of_psi(lam, x)).unwrap();
            let bc = BoundaryRule::EnvelopeTrace { env, scale: 1.0 };
            let w = helmholtz_solve(lam, &rhs, bc).unwrap();
            let exact = Field::sample(&g, BoundaryRule::Zero, |x| env.psi(x)).unwrap();
            errs.push(w.max_abs_diff(&exact));
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 1.9 && order2 > 1.9, "orders {order1:.2} {order2:.2}");
    }

    #[test]
    fn monotone_check_examples() {
        let g = grid1d(65, 5.0);
        let one = Field::constant(&g, 1.0, BoundaryRule::Zero);
        let zero = Field::constant(&g, 0.0, BoundaryRule::Zero);
        assert!(monotone_check(2.0, &one, &zero, BoundaryRule::Zero, BoundaryRule::Zero).unwrap());
        // equality case
        assert!(monotone_check(2.0, &one, &one, BoundaryRule::Zero, BoundaryRule::Zero).unwrap());
        // violated precondition is a domain error
        assert!(monotone_check(2.0, &zero, &one, BoundaryRule::Zero, BoundaryRule::Zero).is_err());
    }

    #[test]
    fn monotone_check_randomized_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = grid1d(65, 5.0);
        for _ in 0..10 {
            let lam = rng.random_range(0.5..10.0);
            let base: Vec<f64> = (0..g.total_points()).map(|_| rng.random_range(0.0..1.0)).collect();
            let gap: Vec<f64> = (0..g.total_points()).map(|_| rng.random_range(0.0..1.0)).collect();
            let rhs2 = Field::from_values(&g, BoundaryRule::Zero, base.clone()).unwrap();
            let rhs1 = Field::from_values(
                &g,
                BoundaryRule::Zero,
                base.iter().zip(&gap).map(|(a, b)| a + b).collect(),
            )
            .unwrap();
            let env = Envelope::new(rng.random_range(0.0..2.0), rng.random_range(0.0..1.0)).unwrap();
            let hi = BoundaryRule::EnvelopeTrace { env, scale: rng.random_range(0.5..2.0) };
            assert!(monotone_check(lam, &rhs1, &rhs2, hi, BoundaryRule::Zero).unwrap());
        }
    }

    #[test]
    fn binary_roundtrip() {
        let dir = std::env::temp_dir().join("nlgm_field_roundtrip_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.field");
        let g = Grid::new(2, 3.0, 17).unwrap();
        let env = Envelope::new(1.0, 0.5).unwrap();
        let f = Field::sample(&g, BoundaryRule::Zero, |x| env.psi(x)).unwrap();
        f.write_binary(&path).unwrap();

        // header layout: N, n as u64 LE, L as f64 LE
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 17);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3.0);
        assert_eq!(bytes.len(), 24 + 8 * 17 * 17);

        let back = Field::read_binary(&path).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_export_shapes() {
        let g = grid1d(17, 1.0);
        let f = Field::constant(&g, 1.0, BoundaryRule::Zero);
        let mut buf = Vec::new();
        f.write_csv(&mut buf, &["meta: test".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# meta: test\nx,value\n"));
        assert_eq!(text.lines().count(), 2 + 17);

        let g3 = Grid::new(3, 1.0, 17).unwrap();
        let f3 = Field::constant(&g3, 1.0, BoundaryRule::Zero);
        assert!(f3.write_csv(&mut Vec::new(), &[]).is_err());
    }
}
