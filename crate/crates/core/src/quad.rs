//! Internal adaptive quadrature helpers (1D Simpson and tensor cubature).

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 60;

/// Adaptive Simpson on [a, b] with mixed absolute/relative tolerance.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = whole.abs().max(1e-300);
    let v = recurse(f, a, b, fa, fm, fb, whole, tol * scale, 0)?;
    if !v.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    Ok(v)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "max recursion depth reached near [{a}, {b}], error estimate {:.3e}",
            delta.abs()
        )));
    }
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1)?;
    Ok(l + r)
}

/// Tensor-product adaptive cubature over the box [lo, hi] (dim <= 3),
/// by peeling one axis at a time.
pub(crate) fn adaptive_cubature(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    tol: f64,
) -> Result<f64> {
    assert_eq!(lo.len(), hi.len());
    match lo.len() {
        1 => adaptive_simpson(&|x| f(&[x]), lo[0], hi[0], tol),
        2 => adaptive_simpson(
            &|x| {
                adaptive_simpson(&|y| f(&[x, y]), lo[1], hi[1], tol * 0.1).unwrap_or(f64::NAN)
            },
            lo[0],
            hi[0],
            tol,
        ),
        3 => adaptive_simpson(
            &|x| {
                adaptive_simpson(
                    &|y| {
                        adaptive_simpson(&|z| f(&[x, y, z]), lo[2], hi[2], tol * 0.01)
                            .unwrap_or(f64::NAN)
                    },
                    lo[1],
                    hi[1],
                    tol * 0.1,
                )
                .unwrap_or(f64::NAN)
            },
            lo[0],
            hi[0],
            tol,
        ),
        d => Err(Error::Quadrature(format!("unsupported cubature dimension {d}"))),
    }
}
