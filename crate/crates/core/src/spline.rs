//! Natural cubic spline on a uniform abscissa.

#[derive(Debug, Clone)]
pub struct UniformSpline {
    v0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(v0: f64, h: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 3 && h > 0.0);
        // tridiagonal solve for second derivatives, natural end conditions
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Self { v0, h, y, m }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.v0
    }

    pub fn end(&self) -> f64 {
        self.v0 + self.h * (self.y.len() - 1) as f64
    }

    fn end_slopes(&self) -> (f64, f64) {
        let n = self.y.len();
        let h = self.h;
        let s0 = (self.y[1] - self.y[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0;
        let s1 = (self.y[n - 1] - self.y[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0;
        (s0, s1)
    }

    /// Spline value; linear continuation outside the knots.
    pub fn eval(&self, v: f64) -> f64 {
        let n = self.y.len();
        let s = (v - self.v0) / self.h;
        if s <= 0.0 {
            return self.y[0] + self.end_slopes().0 * (v - self.v0);
        }
        if s >= (n - 1) as f64 {
            return self.y[n - 1] + self.end_slopes().1 * (v - self.end());
        }
        let i = (s as usize).min(n - 2);
        let a = (i + 1) as f64 - s;
        let b = s - i as f64;
        let h2 = self.h * self.h / 6.0;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h2
    }
}
