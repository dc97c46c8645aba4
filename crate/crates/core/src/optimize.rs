//! Derivative-free minimization: bounded scalar Brent and box-constrained Powell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 − √5)/2

/// Minimizes `f` on `[a, b]` by Brent's method (golden section with parabolic
/// steps), never evaluating outside the interval. Returns `(x, f(x), evals)`.
pub fn brent_bounded<F>(mut f: F, a: f64, b: f64, xatol: f64, max_evals: usize) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Validation(format!("invalid bracket [{a}, {b}]")));
    }
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = (a, b);
    let mut fulc = a + GOLDEN * (b - a);
    let mut nfc = fulc;
    let mut xf = fulc;
    let (mut rat, mut e) = (0.0f64, 0.0f64);
    let mut fx = f(xf)?;
    let mut evals = 1;
    let mut ffulc = fx;
    let mut fnfc = fx;
    let mut xm = 0.5 * (a + b);
    let mut tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
    let mut tol2 = 2.0 * tol1;

    while (xf - xm).abs() > tol2 - 0.5 * (b - a) {
        let mut golden = true;
        if e.abs() > tol1 {
            golden = false;
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = tol1 * sign_or_one(xm - xf);
                }
            } else {
                golden = true;
            }
        }
        if golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = GOLDEN * e;
        }
        let x = xf + sign_or_one(rat) * rat.abs().max(tol1);
        let fu = f(x)?;
        evals += 1;
        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
        tol2 = 2.0 * tol1;
        if evals >= max_evals {
            break;
        }
    }
    Ok((xf, fx, evals))
}

fn sign_or_one(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowellOptions {
    /// Relative decrease over one sweep below which the search stops.
    pub ftol: f64,
    /// Absolute step tolerance of each line search.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for PowellOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            xtol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowellResult {
    pub x: Vec<f64>,
    pub fun: f64,
    pub n_evals: usize,
    pub converged: bool,
    /// (outer iteration, cost) starting with the initial point at iteration 0.
    pub trajectory: Vec<(usize, f64)>,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Counted<F> {
    fn call(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                point: x.to_vec(),
            });
        }
        Ok(v)
    }
}

/// Range of t for which lo ≤ x + t·d ≤ hi.
fn feasible_segment(x: &[f64], d: &[f64], lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let (mut tmin, mut tmax) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..x.len() {
        if d[i] == 0.0 {
            continue;
        }
        let a = (lo[i] - x[i]) / d[i];
        let b = (hi[i] - x[i]) / d[i];
        tmin = tmin.max(a.min(b));
        tmax = tmax.min(a.max(b));
    }
    (tmin.min(0.0), tmax.max(0.0))
}

fn step(x: &[f64], d: &[f64], t: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| (x[i] + t * d[i]).clamp(lo[i], hi[i]))
        .collect()
}

/// Bounded Brent along `d` from `x`; endpoints are tried explicitly so active
/// bounds are hit exactly. Returns the new point, its value and the step taken.
fn line_search<F: FnMut(&[f64]) -> Result<f64>>(
    obj: &mut Counted<F>,
    x: &[f64],
    fx: f64,
    d: &[f64],
    lo: &[f64],
    hi: &[f64],
    xtol: f64,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let no_move = || (x.to_vec(), fx, vec![0.0; x.len()]);
    if d.iter().all(|&v| v == 0.0) {
        return Ok(no_move());
    }
    let (tmin, tmax) = feasible_segment(x, d, lo, hi);
    if tmax - tmin <= 0.0 {
        return Ok(no_move());
    }
    let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut t, mut ft, _) = brent_bounded(
        |t| obj.call(&step(x, d, t, lo, hi)),
        tmin,
        tmax,
        xtol / dnorm,
        500,
    )?;
    let edge = 10.0 * xtol / dnorm + 1e3 * f64::EPSILON * t.abs();
    for end in [tmin, tmax] {
        if (t - end).abs() <= edge && t != end {
            let fe = obj.call(&step(x, d, end, lo, hi))?;
            if fe <= ft {
                t = end;
                ft = fe;
            }
        }
    }
    if ft > fx {
        return Ok(no_move());
    }
    let xn = step(x, d, t, lo, hi);
    let taken = xn.iter().zip(x).map(|(a, b)| a - b).collect();
    Ok((xn, ft, taken))
}

/// Powell's conjugate-direction method restricted to the box `[lo, hi]`.
///
/// `directions` sets the initial direction set (coordinate axes when `None`);
/// its order is the order of the first sweep.
pub fn powell_minimize<F>(
    f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &PowellOptions,
    directions: Option<Vec<Vec<f64>>>,
) -> Result<PowellResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::Validation("bounds and start point differ in length".into()));
    }
    for i in 0..n {
        if !(lo[i] <= x0[i] && x0[i] <= hi[i]) {
            return Err(Error::BoundViolation {
                name: format!("x[{i}]"),
                value: x0[i],
                lo: lo[i],
                hi: hi[i],
            });
        }
    }
    let mut direc = directions.unwrap_or_else(|| {
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect()
    });
    let mut obj = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fval = obj.call(&x)?;
    let mut trajectory = vec![(0, fval)];
    let mut converged = false;
    let mut x1 = x.clone();

    for iter in 1..=opts.max_iter {
        let fx = fval;
        let mut bigind = 0;
        let mut delta = 0.0;
        for (i, d) in direc.iter().enumerate() {
            let before = fval;
            let (xn, fn_, _) = line_search(&mut obj, &x, fval, d, lo, hi, opts.xtol)?;
            x = xn;
            fval = fn_;
            if before - fval > delta {
                delta = before - fval;
                bigind = i;
            }
        }
        trajectory.push((iter, fval));
        if 2.0 * (fx - fval) <= opts.ftol * (fx.abs() + fval.abs()) + 1e-20 {
            converged = true;
            break;
        }

        let d1: Vec<f64> = x.iter().zip(&x1).map(|(a, b)| a - b).collect();
        x1 = x.clone();
        let (_, tmax) = feasible_segment(&x, &d1, lo, hi);
        let x2 = step(&x, &d1, tmax.min(1.0), lo, hi);
        let fx2 = obj.call(&x2)?;
        if fx > fx2 {
            let mut t = 2.0 * (fx + fx2 - 2.0 * fval);
            let temp = fx - fval - delta;
            t *= temp * temp;
            let temp = fx - fx2;
            t -= delta * temp * temp;
            if t < 0.0 {
                let (xn, fn_, taken) = line_search(&mut obj, &x, fval, &d1, lo, hi, opts.xtol)?;
                x = xn;
                fval = fn_;
                if taken.iter().any(|&v| v != 0.0) {
                    let last = direc.len() - 1;
                    direc[bigind] = direc[last].clone();
                    direc[last] = taken;
                }
            }
        }
    }

    Ok(PowellResult {
        x,
        fun: fval,
        n_evals: obj.evals,
        converged,
        trajectory,
    })
}
