//! Straight-line fits: weighted least squares and the errors-in-both-
//! coordinates (orthogonal, Deming-type) fit.
//!
//! Both work on internally rescaled data so that tiny physical units
//! (flux PSDs ~1e-49 Wb²/Hz) and single precision are safe.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::{brent_minimize, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineMethod {
    WeightedLeastSquares,
    WeightedOrthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XyPoint<T = f64> {
    pub x: T,
    pub y: T,
    pub sigma_x: T,
    pub sigma_y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit<T = f64> {
    pub intercept: T,
    pub slope: T,
    pub sigma_intercept: T,
    pub sigma_slope: T,
    /// Covariance of (intercept, slope).
    pub cov: [[T; 2]; 2],
    pub chi2: T,
    pub dof: usize,
    pub method: LineMethod,
}

impl<T: Real> LineFit<T> {
    pub fn eval(&self, x: T) -> T {
        self.intercept + self.slope * x
    }
}

fn scale_of<T: Real>(v: impl Iterator<Item = T>) -> T {
    let (mut s, mut n) = (T::zero(), 0usize);
    for x in v {
        s = s + x * x;
        n += 1;
    }
    let r = (s / T::lit(n.max(1) as f64)).sqrt();
    if r > T::zero() && r.is_finite() {
        r
    } else {
        T::one()
    }
}

fn check_points(n: usize) -> Result<()> {
    if n < 3 {
        return invalid(format!("line fit needs at least 3 points, got {n}"));
    }
    Ok(())
}

/// Weighted least squares of `y` on `x` with errors `sigma` on `y` only.
pub fn weighted_least_squares<T: Real>(x: &[T], y: &[T], sigma: &[T]) -> Result<LineFit<T>> {
    let n = x.len();
    check_points(n)?;
    if y.len() != n || sigma.len() != n {
        return invalid("x, y and sigma lengths differ");
    }
    if sigma.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
        return invalid("sigmas must be positive and finite");
    }
    let sx = scale_of(x.iter().copied());
    let sy = scale_of(y.iter().copied());
    let w: Vec<T> = sigma.iter().map(|s| {
        let s = *s / sy;
        T::one() / (s * s)
    }).collect();
    let sw: T = w.iter().copied().sum();
    let xm = x.iter().zip(&w).map(|(xi, wi)| *xi / sx * *wi).sum::<T>() / sw;
    let ym = y.iter().zip(&w).map(|(yi, wi)| *yi / sy * *wi).sum::<T>() / sw;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for i in 0..n {
        let dx = x[i] / sx - xm;
        sxx = sxx + w[i] * dx * dx;
        sxy = sxy + w[i] * dx * (y[i] / sy - ym);
    }
    let spread = x.iter().map(|v| (*v / sx - xm).abs()).fold(T::zero(), T::max);
    if !(spread > T::lit(1e-6) * (xm.abs() + T::lit(1e-30))) || !(sxx > T::zero()) {
        return Err(Error::Degenerate("abscissas have no spread".into()));
    }
    let b = sxy / sxx;
    let a = ym - b * xm;
    let chi2 = (0..n)
        .map(|i| {
            let r = (y[i] / sy - a - b * x[i] / sx) * w[i].sqrt();
            r * r
        })
        .sum();
    let vb = T::one() / sxx;
    let va = T::one() / sw + xm * xm / sxx;
    let cab = -xm / sxx;
    Ok(unscale(a, b, [[va, cab], [cab, vb]], chi2, n, sx, sy, LineMethod::WeightedLeastSquares))
}

#[allow(clippy::too_many_arguments)]
fn unscale<T: Real>(a: T, b: T, c: [[T; 2]; 2], chi2: T, n: usize, sx: T, sy: T, method: LineMethod) -> LineFit<T> {
    // y = sy (a + b x/sx): intercept sy a, slope sy b / sx
    let ka = sy;
    let kb = sy / sx;
    let cov = [[c[0][0] * ka * ka, c[0][1] * ka * kb], [c[1][0] * ka * kb, c[1][1] * kb * kb]];
    LineFit {
        intercept: a * ka,
        slope: b * kb,
        sigma_intercept: cov[0][0].sqrt(),
        sigma_slope: cov[1][1].sqrt(),
        cov,
        chi2,
        dof: n - 2,
        method,
    }
}

/// χ² of the orthogonal fit at (a, b), scaled coordinates.
fn ortho_chi2<T: Real>(p: &[XyPoint<T>], a: T, b: T) -> T {
    p.iter()
        .map(|q| {
            let r = q.y - a - b * q.x;
            r * r / (q.sigma_y * q.sigma_y + b * b * q.sigma_x * q.sigma_x)
        })
        .sum()
}

/// Intercept minimising χ² at fixed slope.
fn profile_intercept<T: Real>(p: &[XyPoint<T>], b: T) -> T {
    let (mut sw, mut swr) = (T::zero(), T::zero());
    for q in p {
        let w = T::one() / (q.sigma_y * q.sigma_y + b * b * q.sigma_x * q.sigma_x);
        sw = sw + w;
        swr = swr + w * (q.y - b * q.x);
    }
    swr / sw
}

/// Gradient and Hessian of χ²(a, b).
fn ortho_derivs<T: Real>(p: &[XyPoint<T>], a: T, b: T) -> ([T; 2], [[T; 2]; 2]) {
    let two = T::lit(2.0);
    let eight = T::lit(8.0);
    let mut g = [T::zero(); 2];
    let mut h = [[T::zero(); 2]; 2];
    for q in p {
        let sx2 = q.sigma_x * q.sigma_x;
        let d = q.sigma_y * q.sigma_y + b * b * sx2;
        let r = q.y - a - b * q.x;
        let x = q.x;
        g[0] = g[0] - two * r / d;
        g[1] = g[1] - two * r * x / d - two * b * sx2 * r * r / (d * d);
        h[0][0] = h[0][0] + two / d;
        let hab = two * x / d + T::lit(4.0) * b * sx2 * r / (d * d);
        h[0][1] = h[0][1] + hab;
        h[1][1] = h[1][1] + two * x * x / d + eight * b * sx2 * r * x / (d * d) - two * sx2 * r * r / (d * d)
            + eight * b * b * sx2 * sx2 * r * r / (d * d * d);
    }
    h[1][0] = h[0][1];
    (g, h)
}

/// Fit of `y = a + b x` minimising `sum (y - a - b x)^2 / (sigma_y^2 + b^2 sigma_x^2)`.
///
/// The intercept is profiled out exactly; the slope is found by a grid
/// scan around the least-squares slope, then Brent, then Newton steps on
/// the full χ². Covariance is twice the inverse Hessian at the minimum.
pub fn orthogonal_linear_fit<T: Real>(points: &[XyPoint<T>]) -> Result<LineFit<T>> {
    let n = points.len();
    check_points(n)?;
    for q in points {
        if !(q.sigma_x >= T::zero() && q.sigma_y > T::zero()) || !(q.x.is_finite() && q.y.is_finite()) {
            return invalid("orthogonal fit needs finite data, sigma_y > 0 and sigma_x >= 0");
        }
    }
    let sx = scale_of(points.iter().map(|q| q.x));
    let sy = scale_of(points.iter().map(|q| q.y));
    let p: Vec<XyPoint<T>> = points
        .iter()
        .map(|q| XyPoint { x: q.x / sx, y: q.y / sy, sigma_x: q.sigma_x / sx, sigma_y: q.sigma_y / sy })
        .collect();

    // all sigma_x zero: the WLS solution is exact
    let xs: Vec<T> = p.iter().map(|q| q.x).collect();
    let ys: Vec<T> = p.iter().map(|q| q.y).collect();
    let sig: Vec<T> = p.iter().map(|q| q.sigma_y).collect();
    let wls = weighted_least_squares(&xs, &ys, &sig)?;
    if p.iter().all(|q| q.sigma_x == T::zero()) {
        let mut f = unscale(wls.intercept, wls.slope, wls.cov, wls.chi2, n, sx, sy, LineMethod::WeightedOrthogonal);
        f.chi2 = wls.chi2;
        return Ok(f);
    }

    let profile = |b: T| ortho_chi2(&p, profile_intercept(&p, b), b);
    // Slope scale: WLS slope error with effective sigmas at the WLS slope.
    let b0 = wls.slope;
    let eff: Vec<T> = p.iter().map(|q| (q.sigma_y * q.sigma_y + b0 * b0 * q.sigma_x * q.sigma_x).sqrt()).collect();
    let wls2 = weighted_least_squares(&xs, &ys, &eff)?;
    let step = (wls2.sigma_slope.max(wls.sigma_slope)).max(T::lit(1e-6) * (b0.abs() + T::one()));
    let centre = wls2.slope;
    let m = 40i32;
    let mut best = (centre, profile(centre));
    let grid: Vec<T> = (-m..=m).map(|i| centre + step * T::lit(0.5 * i as f64)).collect();
    let mut best_i = m as usize;
    for (i, &b) in grid.iter().enumerate() {
        let v = profile(b);
        if v < best.1 {
            best = (b, v);
            best_i = i;
        }
    }
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let (mut b, _) = brent_minimize(profile, lo, hi, T::lit(1e-10).max(T::epsilon().sqrt()), 200);
    let mut a = profile_intercept(&p, b);

    // Newton polish on (a, b)
    for _ in 0..20 {
        let (g, h) = ortho_derivs(&p, a, b);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(det > T::zero()) {
            break;
        }
        let da = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let db = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
        let before = ortho_chi2(&p, a, b);
        let (na, nb) = (a - da, b - db);
        if ortho_chi2(&p, na, nb) > before {
            break;
        }
        a = na;
        b = nb;
        if db.abs() <= T::epsilon() * T::lit(4.0) * (b.abs() + T::one()) {
            break;
        }
    }
    let (_, h) = ortho_derivs(&p, a, b);
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if !(det > T::zero()) || !det.is_finite() {
        return Err(Error::NonConvergence { iterations: 20, reason: "χ² Hessian not positive definite at minimum".into() });
    }
    let two = T::lit(2.0);
    let cov = [[two * h[1][1] / det, -two * h[0][1] / det], [-two * h[1][0] / det, two * h[0][0] / det]];
    let chi2 = ortho_chi2(&p, a, b);
    Ok(unscale(a, b, cov, chi2, n, sx, sy, LineMethod::WeightedOrthogonal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_wls() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let f = weighted_least_squares(&x, &y, &[0.1; 4]).unwrap();
        assert!((f.intercept - 0.5).abs() < 1e-12);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(f.chi2 < 1e-20);
    }

    #[test]
    fn exact_line_orthogonal() {
        let pts: Vec<XyPoint> = (0..6)
            .map(|i| {
                let x = 1e-9 * (1.0 + i as f64);
                XyPoint { x, y: 1.27e-49 + 2.9e-41 * x, sigma_x: 1e-10, sigma_y: 1e-51 }
            })
            .collect();
        let f = orthogonal_linear_fit(&pts).unwrap();
        assert!((f.intercept / 1.27e-49 - 1.0).abs() < 1e-8);
        assert!((f.slope / 2.9e-41 - 1.0).abs() < 1e-8);
        assert!(f.chi2 < 1e-12);
    }

    #[test]
    fn vertical_data_rejected() {
        let pts = vec![XyPoint { x: 1.0, y: 0.0, sigma_x: 0.1, sigma_y: 0.1 }, XyPoint { x: 1.0, y: 1.0, sigma_x: 0.1, sigma_y: 0.1 }, XyPoint { x: 1.0, y: 2.0, sigma_x: 0.1, sigma_y: 0.1 }];
        assert!(matches!(orthogonal_linear_fit(&pts), Err(Error::Degenerate(_))));
        assert!(orthogonal_linear_fit(&pts[..2]).is_err());
    }

    #[test]
    fn f32_exact_line() {
        let pts: Vec<XyPoint<f32>> = (0..5)
            .map(|i| {
                let x = i as f32;
                XyPoint { x, y: 3.0 - 0.5 * x, sigma_x: 0.05, sigma_y: 0.1 }
            })
            .collect();
        let f = orthogonal_linear_fit(&pts).unwrap();
        assert!((f.intercept - 3.0).abs() < 1e-5);
        assert!((f.slope + 0.5).abs() < 1e-5);
    }
}
