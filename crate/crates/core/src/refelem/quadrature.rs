use crate::error::{Error, Result};

pub const MAX_QUADRATURE_DEGREE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefDomain {
    Triangle,
    Interval,
}

/// Points are reference coordinates; for the interval only `points[i][0]` is
/// used.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub domain: RefDomain,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1]
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Rule exact for polynomials of total degree `degree`.
///
/// The triangle rule is the collapsed (Duffy) product of Gauss-Legendre rules:
/// `x = s`, `y = t (1 - s)`, whose Jacobian `1 - s` raises the degree in `s` by
/// one. All weights are positive and all points interior.
pub fn make_quadrature(domain: RefDomain, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(Error::Unsupported(format!(
            "quadrature degree {degree} exceeds {MAX_QUADRATURE_DEGREE}"
        )));
    }
    match domain {
        RefDomain::Interval => {
            let n = degree / 2 + 1;
            let (x, w) = gauss_legendre(n);
            Ok(QuadratureRule {
                domain,
                points: x.into_iter().map(|x| [x, 0.0]).collect(),
                weights: w,
                exactness_degree: 2 * n - 1,
            })
        }
        RefDomain::Triangle => {
            let n = (degree + 1) / 2 + 1;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (s, ws) in x.iter().zip(&w) {
                for (t, wt) in x.iter().zip(&w) {
                    points.push([*s, t * (1.0 - s)]);
                    weights.push(ws * wt * (1.0 - s));
                }
            }
            Ok(QuadratureRule {
                domain,
                points,
                weights,
                exactness_degree: 2 * n - 2,
            })
        }
    }
}
