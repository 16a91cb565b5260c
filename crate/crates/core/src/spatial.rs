//! Uniform hash grid over a static point set.

use std::collections::HashMap;

use nalgebra::Point3;

pub struct PointGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl PointGrid {
    pub fn new(points: &[Point3<f64>], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (i, p) in points.iter().enumerate() {
            let k = key(p, cell);
            for a in 0..3 {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
            cells.entry(k).or_default().push(i);
        }
        PointGrid { cell, cells, lo, hi }
    }

    /// Cell size giving roughly `per_cell` points per occupied cell for a set
    /// spread over its bounding box.
    pub fn auto_cell(points: &[Point3<f64>], per_cell: f64) -> f64 {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        let extent = (0..3).map(|a| max[a] - min[a]).fold(0.0, f64::max);
        let cells_per_axis = (points.len() as f64 / per_cell).cbrt().max(1.0);
        let h = extent / cells_per_axis;
        if h > 0.0 && h.is_finite() {
            h
        } else {
            1.0
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn key_of(&self, p: &Point3<f64>) -> [i64; 3] {
        key(p, self.cell)
    }

    /// Largest ring index that can still contain points, seen from `center`.
    pub fn max_ring(&self, center: [i64; 3]) -> i64 {
        (0..3)
            .map(|a| (center[a] - self.lo[a]).abs().max((self.hi[a] - center[a]).abs()))
            .max()
            .unwrap_or(0)
    }

    /// Visit the indices stored in cells at Chebyshev ring `r` around `center`.
    pub fn for_each_in_ring(&self, center: [i64; 3], r: i64, mut f: impl FnMut(usize)) {
        for dx in -r..=r {
            for dy in -r..=r {
                let on_shell_xy = dx.abs() == r || dy.abs() == r;
                let dzs: Box<dyn Iterator<Item = i64>> = if on_shell_xy {
                    Box::new(-r..=r)
                } else if r == 0 {
                    Box::new(std::iter::once(0))
                } else {
                    Box::new([-r, r].into_iter())
                };
                for dz in dzs {
                    let k = [center[0] + dx, center[1] + dy, center[2] + dz];
                    if let Some(v) = self.cells.get(&k) {
                        for &i in v {
                            f(i);
                        }
                    }
                }
            }
        }
    }

    /// Lower bound on the distance from a point in `center`'s cell to any
    /// point stored in ring `r`.
    pub fn ring_lower_bound(&self, r: i64) -> f64 {
        ((r - 1).max(0)) as f64 * self.cell
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn key(p: &Point3<f64>, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}
