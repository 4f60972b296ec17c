use std::f64::consts::TAU;

use super::GeometryError;

/// Periodic cubic interpolating spline on `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

/// Solves a cyclic tridiagonal system with constant pattern
/// `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` (indices mod n)
/// by Sherman–Morrison on top of the Thomas algorithm.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let thomas = |d: &[f64], r: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut denom = d[0];
        c[0] = sup[0] / denom;
        x[0] = r[0] / denom;
        for i in 1..n {
            denom = d[i] - sub[i] * c[i - 1];
            c[i] = sup[i] / denom;
            x[i] = (r[i] - sub[i] * x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let gamma = -diag[0];
    let alpha = sub[0]; // couples row 0 to x[n-1]
    let beta = sup[n - 1]; // couples row n-1 to x[0]
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let y = thomas(&d, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = beta;
    let z = thomas(&d, &u);
    let factor = (y[0] + alpha * y[n - 1] / gamma) / (1.0 + z[0] + alpha * z[n - 1] / gamma);
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}

impl PeriodicSpline {
    /// `knots` must be strictly increasing within `[0, 2π)`.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, GeometryError> {
        let n = knots.len();
        if n < 4 || values.len() != n {
            return Err(GeometryError::BadPointList(format!("need at least 4 points, got {n}")));
        }
        if knots[0] < 0.0 || knots[n - 1] >= TAU || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeometryError::BadPointList(
                "theta must be strictly increasing within [0, 2π)".into(),
            ));
        }
        let h: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { knots[i + 1] - knots[i] } else { knots[0] + TAU - knots[n - 1] })
            .collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let hp = h[(i + n - 1) % n];
            let hn = h[i];
            sub[i] = hp / 6.0;
            diag[i] = (hp + hn) / 3.0;
            sup[i] = hn / 6.0;
            rhs[i] = (values[(i + 1) % n] - values[i]) / hn - (values[i] - values[(i + n - 1) % n]) / hp;
        }
        let moments = solve_cyclic(&sub, &diag, &sup, &rhs);
        Ok(PeriodicSpline { knots, values, moments })
    }

    fn locate(&self, theta: f64) -> (usize, f64, f64) {
        let n = self.knots.len();
        let t = theta.rem_euclid(TAU);
        // last knot <= t, wrapping below the first knot
        let i = match self.knots.partition_point(|&k| k <= t) {
            0 => n - 1,
            p => p - 1,
        };
        let start = self.knots[i];
        let end = if i + 1 < n { self.knots[i + 1] } else { self.knots[0] + TAU };
        let s = if t < start { t + TAU - start } else { t - start };
        (i, s, end - start)
    }

    /// Value and first derivative at `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let n = self.knots.len();
        let (i, s, h) = self.locate(theta);
        let j = (i + 1) % n;
        let (y0, y1) = (self.values[i], self.values[j]);
        let (m0, m1) = (self.moments[i], self.moments[j]);
        let a = (h - s) / h;
        let b = s / h;
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let deriv = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        (value, deriv)
    }
}
