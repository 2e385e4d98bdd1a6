use super::{Mesh, Point};
use crate::error::{Error, Result};

/// How each grid square is split into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagonalPattern {
    /// Every diagonal runs from the lower-left to the upper-right corner.
    #[default]
    Right,
    /// Every diagonal runs from the lower-right to the upper-left corner.
    Left,
    /// Diagonal direction alternates in a checkerboard.
    Crisscross,
}

impl DiagonalPattern {
    fn rising(self, i: usize, j: usize) -> bool {
        match self {
            DiagonalPattern::Right => true,
            DiagonalPattern::Left => false,
            DiagonalPattern::Crisscross => (i + j) % 2 == 0,
        }
    }
}

/// Triangulates the squares `(i, j)` of an `nx` by `ny` grid for which `keep`
/// holds. Unused grid vertices are dropped.
fn structured(
    nx: usize,
    ny: usize,
    coord: impl Fn(usize, usize) -> Point,
    keep: impl Fn(usize, usize) -> bool,
    pattern: DiagonalPattern,
) -> (Vec<Point>, Vec<[usize; 3]>) {
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let (a, b, c, d) = (
                grid(i, j),
                grid(i + 1, j),
                grid(i + 1, j + 1),
                grid(i, j + 1),
            );
            if pattern.rising(i, j) {
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            } else {
                cells.push([a, b, d]);
                cells.push([b, c, d]);
            }
        }
    }
    let mut renumber = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    for cell in cells.iter_mut() {
        for v in cell.iter_mut() {
            if renumber[*v] == usize::MAX {
                renumber[*v] = vertices.len();
                vertices.push(coord(*v % (nx + 1), *v / (nx + 1)));
            }
            *v = renumber[*v];
        }
    }
    (vertices, cells)
}

/// Structured triangulation of `[x0, x1] x [y0, y1]` with `2 nx ny` cells.
/// Boundary facets are tagged 1 (bottom), 2 (right), 3 (top), 4 (left).
pub fn generate_rectangle(
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    pattern: DiagonalPattern,
) -> Result<Mesh> {
    if !(x1 > x0) || !(y1 > y0) {
        return Err(Error::InvalidArgument(format!(
            "rectangle [{x0}, {x1}] x [{y0}, {y1}] has non-positive extent"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(
            "rectangle needs at least one cell per direction".into(),
        ));
    }
    let (hx, hy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
    let coord = |i: usize, j: usize| {
        // pin the far edges exactly
        let x = if i == nx { x1 } else { x0 + i as f64 * hx };
        let y = if j == ny { y1 } else { y0 + j as f64 * hy };
        [x, y]
    };
    let (vertices, cells) = structured(nx, ny, coord, |_, _| true, pattern);
    let tol = 1e-10 * (x1 - x0).max(y1 - y0);
    let verts = vertices.clone();
    Mesh::from_cells(vertices, cells, move |[a, b]| {
        let m = midpoint(verts[a], verts[b]);
        if (m[1] - y0).abs() < tol {
            1
        } else if (m[0] - x1).abs() < tol {
            2
        } else if (m[1] - y1).abs() < tol {
            3
        } else {
            4
        }
    })
}

/// Triangulation of `(-1, 1)^2 \ [-1, 0] x [0, 1]` built from `3 n^2` grid
/// squares; the re-entrant corner sits at the origin. Boundary tags: 1 on
/// `y = -1`, 2 on `x = 1`, 3 on `y = 1`, 4 on `x = 0`, 5 on `y = 0`, 6 on
/// `x = -1`.
pub fn generate_l_shape(n: usize) -> Result<Mesh> {
    generate_l_shape_with(n, DiagonalPattern::Right)
}

pub fn generate_l_shape_with(n: usize, pattern: DiagonalPattern) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "L-shape refinement level must be at least 1".into(),
        ));
    }
    let m = 2 * n;
    let h = 2.0 / m as f64;
    let coord = |i: usize, j: usize| {
        let c = |k: usize| if k == n { 0.0 } else { -1.0 + k as f64 * h };
        [c(i), c(j)]
    };
    // the square (i, j) lies in the removed quadrant when i < n and j >= n
    let (vertices, cells) = structured(m, m, coord, |i, j| !(i < n && j >= n), pattern);
    let verts = vertices.clone();
    Mesh::from_cells(vertices, cells, move |[a, b]| {
        let p = midpoint(verts[a], verts[b]);
        let tol = 1e-10;
        if (p[1] + 1.0).abs() < tol {
            1
        } else if (p[0] - 1.0).abs() < tol {
            2
        } else if (p[1] - 1.0).abs() < tol {
            3
        } else if p[0].abs() < tol {
            4
        } else if p[1].abs() < tol {
            5
        } else {
            6
        }
    })
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}
