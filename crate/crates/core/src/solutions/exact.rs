use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Closed-form Stokes solution with forcing `f = -nu lap(u) + grad(p)`.
pub trait ExactSolution: Send + Sync {
    fn name(&self) -> &str;
    fn nu(&self) -> f64;
    fn velocity(&self, x: Point) -> [f64; 2];
    /// `g[i][j] = d u_i / d x_j`.
    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2];
    fn pressure(&self, x: Point) -> Result<f64>;
    fn forcing(&self, x: Point) -> [f64; 2];
    /// Point where the solution is not smooth, if any; error integrals refine
    /// their quadrature towards it.
    fn singular_point(&self) -> Option<Point> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Kovasznay {
    pub nu: f64,
    pub lambda: f64,
    /// Pressure constant giving zero mean on `(-0.5, 1) x (-0.5, 1.5)`.
    pub c: f64,
}

pub fn kovasznay(nu: f64) -> Kovasznay {
    let lambda = 1.0 / (2.0 * nu) - (1.0 / (4.0 * nu * nu) + 4.0 * PI * PI).sqrt();
    let mean = 0.5 - ((2.0 * lambda).exp() - (-lambda).exp()) / (6.0 * lambda);
    Kovasznay {
        nu,
        lambda,
        c: -mean,
    }
}

impl ExactSolution for Kovasznay {
    fn name(&self) -> &str {
        "kovasznay"
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn velocity(&self, x: Point) -> [f64; 2] {
        let e = (self.lambda * x[0]).exp();
        let (s, c) = (2.0 * PI * x[1]).sin_cos();
        [1.0 - e * c, self.lambda / (2.0 * PI) * e * s]
    }

    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let l = self.lambda;
        let e = (l * x[0]).exp();
        let (s, c) = (2.0 * PI * x[1]).sin_cos();
        [
            [-l * e * c, 2.0 * PI * e * s],
            [l * l / (2.0 * PI) * e * s, l * e * c],
        ]
    }

    fn pressure(&self, x: Point) -> Result<f64> {
        Ok(0.5 * (1.0 - (2.0 * self.lambda * x[0]).exp()) + self.c)
    }

    fn forcing(&self, x: Point) -> [f64; 2] {
        let l = self.lambda;
        let e = (l * x[0]).exp();
        let (s, c) = (2.0 * PI * x[1]).sin_cos();
        let k = l * l - 4.0 * PI * PI;
        let lap = [-k * e * c, l / (2.0 * PI) * k * e * s];
        [
            -self.nu * lap[0] - l * (2.0 * l * x[0]).exp(),
            -self.nu * lap[1],
        ]
    }
}

/// Velocity `curl(zeta)` with `zeta = g(x) g(y)`, `g(t) = t^2 (t - 1)^2`, and
/// pressure `x^5 + y^5 - 1/3` on the unit square.
#[derive(Debug, Clone, Copy)]
pub struct CurlCase {
    pub nu: f64,
}

pub fn curl_case(nu: f64) -> CurlCase {
    CurlCase { nu }
}

/// `g` and its first three derivatives.
fn quartic(t: f64) -> [f64; 4] {
    [
        t * t * (t - 1.0) * (t - 1.0),
        2.0 * t * (t - 1.0) * (2.0 * t - 1.0),
        12.0 * t * t - 12.0 * t + 2.0,
        24.0 * t - 12.0,
    ]
}

impl ExactSolution for CurlCase {
    fn name(&self) -> &str {
        "curl"
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn velocity(&self, x: Point) -> [f64; 2] {
        let (gx, gy) = (quartic(x[0]), quartic(x[1]));
        [gx[0] * gy[1], -gx[1] * gy[0]]
    }

    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let (gx, gy) = (quartic(x[0]), quartic(x[1]));
        [
            [gx[1] * gy[1], gx[0] * gy[2]],
            [-gx[2] * gy[0], -gx[1] * gy[1]],
        ]
    }

    fn pressure(&self, x: Point) -> Result<f64> {
        Ok(x[0].powi(5) + x[1].powi(5) - 1.0 / 3.0)
    }

    fn forcing(&self, x: Point) -> [f64; 2] {
        let (gx, gy) = (quartic(x[0]), quartic(x[1]));
        let lap = [
            gx[2] * gy[1] + gx[0] * gy[3],
            -gx[3] * gy[0] - gx[1] * gy[2],
        ];
        [
            -self.nu * lap[0] + 5.0 * x[0].powi(4),
            -self.nu * lap[1] + 5.0 * x[1].powi(4),
        ]
    }
}

/// Smooth solenoidal flow on the unit square: `u = curl(sin(pi x) sin(pi y))`,
/// `p = sin(pi x) sin(pi y) - 4 / pi^2`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothCase {
    pub nu: f64,
}

pub fn smooth_case(nu: f64) -> SmoothCase {
    SmoothCase { nu }
}

impl ExactSolution for SmoothCase {
    fn name(&self) -> &str {
        "smooth"
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn velocity(&self, x: Point) -> [f64; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [PI * sx * cy, -PI * cx * sy]
    }

    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let q = PI * PI;
        [[q * cx * cy, -q * sx * sy], [q * sx * sy, -q * cx * cy]]
    }

    fn pressure(&self, x: Point) -> Result<f64> {
        Ok((PI * x[0]).sin() * (PI * x[1]).sin() - 4.0 / (PI * PI))
    }

    fn forcing(&self, x: Point) -> [f64; 2] {
        let u = self.velocity(x);
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let k = 2.0 * PI * PI * self.nu;
        [k * u[0] + PI * cx * sy, k * u[1] + PI * sx * cy]
    }
}

/// Corner singularity at the re-entrant vertex of
/// `(-1, 1)^2 \ [-1, 0] x [0, 1]`, with `nu = 1` and `f = 0`.
///
/// The classical form lives on the sector `0 <= phi <= 3 pi / 2`; points of
/// this domain are mapped there by `x -> -x`, which carries `(u, p)` to
/// `(-u(-x), p(-x))`.
#[derive(Debug, Clone, Copy)]
pub struct LShapeCorner {
    pub lambda: f64,
    pub omega: f64,
}

pub const L_SHAPE_LAMBDA: f64 = 0.54448373678246;

pub fn l_shape_corner() -> LShapeCorner {
    LShapeCorner {
        lambda: L_SHAPE_LAMBDA,
        omega: 1.5 * PI,
    }
}

impl LShapeCorner {
    /// `psi` and its first three derivatives at `phi`.
    pub fn psi(&self, phi: f64) -> [f64; 4] {
        let l = self.lambda;
        let (a, b) = (1.0 + l, 1.0 - l);
        let cw = (l * self.omega).cos();
        let (sa, ca) = (a * phi).sin_cos();
        let (sb, cb) = (b * phi).sin_cos();
        [
            sa * cw / a - ca - sb * cw / b + cb,
            ca * cw + a * sa - cb * cw - b * sb,
            -a * sa * cw + a * a * ca + b * sb * cw - b * b * cb,
            -a * a * ca * cw - a * a * a * sa + b * b * cb * cw + b * b * b * sb,
        ]
    }

    /// Polar coordinates of the reflected point, `phi` in `[0, 2 pi)`.
    fn polar(x: Point) -> (f64, f64) {
        let y = [-x[0], -x[1]];
        let r = y[0].hypot(y[1]);
        let mut phi = y[1].atan2(y[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        (r, phi)
    }

    /// Angular factors of the two velocity components and their derivatives.
    fn angular(&self, phi: f64) -> ([f64; 2], [f64; 2]) {
        let l = self.lambda;
        let a = 1.0 + l;
        let [p0, p1, p2, _] = self.psi(phi);
        let (s, c) = phi.sin_cos();
        let f = [a * s * p0 + c * p1, -a * c * p0 + s * p1];
        let df = [
            a * c * p0 + l * s * p1 + c * p2,
            a * s * p0 - l * c * p1 + s * p2,
        ];
        (f, df)
    }
}

impl ExactSolution for LShapeCorner {
    fn name(&self) -> &str {
        "lshape"
    }

    fn nu(&self) -> f64 {
        1.0
    }

    fn velocity(&self, x: Point) -> [f64; 2] {
        let (r, phi) = Self::polar(x);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let (f, _) = self.angular(phi);
        let rl = r.powf(self.lambda);
        [-rl * f[0], -rl * f[1]]
    }

    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let (r, phi) = Self::polar(x);
        if r == 0.0 {
            return [[f64::INFINITY; 2]; 2];
        }
        let l = self.lambda;
        let (f, df) = self.angular(phi);
        let (s, c) = phi.sin_cos();
        let rl = r.powf(l - 1.0);
        // reflection flips both the field and the coordinates, leaving the
        // gradient unchanged
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            g[i][0] = rl * (l * c * f[i] - s * df[i]);
            g[i][1] = rl * (l * s * f[i] + c * df[i]);
        }
        g
    }

    fn pressure(&self, x: Point) -> Result<f64> {
        let (r, phi) = Self::polar(x);
        if r < 1e-14 {
            return Err(Error::Domain(format!(
                "corner pressure is singular at r = {r:e}"
            )));
        }
        let l = self.lambda;
        let [_, p1, _, p3] = self.psi(phi);
        Ok(-r.powf(l - 1.0) * ((1.0 + l).powi(2) * p1 + p3) / (1.0 - l))
    }

    fn forcing(&self, _x: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn singular_point(&self) -> Option<Point> {
        Some([0.0, 0.0])
    }
}

/// Lid-driven cavity data on `[-1, 1]^2`: `(1 - x^4, 0)` on the lid `y = 1`,
/// zero on the other walls.
pub fn lid_driven_bc(x: Point) -> [f64; 2] {
    if (x[1] - 1.0).abs() < 1e-12 {
        [1.0 - x[0].powi(4), 0.0]
    } else {
        [0.0, 0.0]
    }
}
