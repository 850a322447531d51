//! Uniform-grid spatial hash over a point set in `R^d`.

/// Cap on the number of grid cells; the cell edge grows until the grid fits.
const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone)]
pub struct GridIndex {
    dim: usize,
    lower: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    offsets: Vec<u32>,
    ids: Vec<u32>,
    points: Vec<f64>,
}

impl GridIndex {
    /// Index `points` (flattened, `dim` per point) over the box
    /// `[lower, upper]` with cells of edge at least `cell`.
    pub fn build(points: &[f64], dim: usize, lower: &[f64], upper: &[f64], cell: f64) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        assert!(cell > 0.0 && cell.is_finite());
        let extent: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| (u - l).max(0.0)).collect();
        let mut cell = cell;
        let shape = loop {
            let shape: Vec<usize> = extent
                .iter()
                .map(|e| ((e / cell).floor() as usize + 1).max(1))
                .collect();
            let total = shape
                .iter()
                .try_fold(1usize, |acc, &s| acc.checked_mul(s))
                .unwrap_or(usize::MAX);
            if total <= MAX_CELLS {
                break shape;
            }
            cell *= 1.5;
        };
        let mut strides = vec![1usize; dim];
        for j in 1..dim {
            strides[j] = strides[j - 1] * shape[j - 1];
        }
        let n_cells: usize = shape.iter().product();
        let n = points.len() / dim;

        let mut index = Self {
            dim,
            lower: lower.to_vec(),
            cell,
            shape,
            strides,
            offsets: Vec::new(),
            ids: Vec::new(),
            points: points.to_vec(),
        };
        let cell_of: Vec<usize> = (0..n)
            .map(|i| index.flat_cell(&points[i * dim..(i + 1) * dim]))
            .collect();
        let mut counts = vec![0u32; n_cells + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut ids = vec![0u32; n];
        for (i, &c) in cell_of.iter().enumerate() {
            ids[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        index.offsets = counts;
        index.ids = ids;
        index
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn axis_cell(&self, j: usize, x: f64) -> usize {
        let v = ((x - self.lower[j]) / self.cell).floor();
        if v <= 0.0 {
            0
        } else {
            (v as usize).min(self.shape[j] - 1)
        }
    }

    fn flat_cell(&self, p: &[f64]) -> usize {
        (0..self.dim).map(|j| self.axis_cell(j, p[j]) * self.strides[j]).sum()
    }

    fn cell_points(&self, flat: usize) -> &[u32] {
        &self.ids[self.offsets[flat] as usize..self.offsets[flat + 1] as usize]
    }

    fn dist2(&self, i: usize, z: &[f64]) -> f64 {
        self.point(i)
            .iter()
            .zip(z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Visit every cell in the axis-aligned range `lo..=hi`; stop early when
    /// `visit` returns `true`.
    fn scan_range(&self, lo: &[usize], hi: &[usize], mut visit: impl FnMut(usize) -> bool) -> bool {
        let mut cur = lo.to_vec();
        loop {
            let flat: usize = cur.iter().zip(&self.strides).map(|(c, s)| c * s).sum();
            if visit(flat) {
                return true;
            }
            let mut j = 0;
            loop {
                if j == self.dim {
                    return false;
                }
                if cur[j] < hi[j] {
                    cur[j] += 1;
                    break;
                }
                cur[j] = lo[j];
                j += 1;
            }
        }
    }

    fn ball_range(&self, z: &[f64], r: f64) -> (Vec<usize>, Vec<usize>) {
        let lo = (0..self.dim).map(|j| self.axis_cell(j, z[j] - r)).collect();
        let hi = (0..self.dim).map(|j| self.axis_cell(j, z[j] + r)).collect();
        (lo, hi)
    }

    /// Whether some indexed point lies in the closed ball `B(z, r)`.
    pub fn any_within(&self, z: &[f64], r: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let r2 = r * r;
        let (lo, hi) = self.ball_range(z, r);
        self.scan_range(&lo, &hi, |flat| {
            self.cell_points(flat)
                .iter()
                .any(|&i| self.dist2(i as usize, z) <= r2)
        })
    }

    /// Number of indexed points in the closed ball `B(z, r)`.
    pub fn count_within(&self, z: &[f64], r: f64) -> usize {
        if self.is_empty() {
            return 0;
        }
        let r2 = r * r;
        let (lo, hi) = self.ball_range(z, r);
        let mut count = 0;
        self.scan_range(&lo, &hi, |flat| {
            count += self
                .cell_points(flat)
                .iter()
                .filter(|&&i| self.dist2(i as usize, z) <= r2)
                .count();
            false
        });
        count
    }

    /// Exact Euclidean distance from `z` to the nearest indexed point
    /// (`+∞` when empty).
    pub fn min_distance(&self, z: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        let centre: Vec<usize> = (0..self.dim).map(|j| self.axis_cell(j, z[j])).collect();
        let max_ring = (0..self.dim)
            .map(|j| centre[j].max(self.shape[j] - 1 - centre[j]))
            .max()
            .unwrap_or(0);
        let mut best2 = f64::INFINITY;
        let mut scanned_cells = 0usize;
        for k in 0..=max_ring {
            let lo: Vec<usize> = centre.iter().map(|&c| c.saturating_sub(k)).collect();
            let hi: Vec<usize> = (0..self.dim)
                .map(|j| (centre[j] + k).min(self.shape[j] - 1))
                .collect();
            let mut cur = lo.clone();
            // enumerate the shell of Chebyshev radius k
            'shell: loop {
                let on_shell = cur
                    .iter()
                    .zip(&centre)
                    .any(|(&c, &m)| c.abs_diff(m) == k);
                if on_shell {
                    scanned_cells += 1;
                    let flat: usize = cur.iter().zip(&self.strides).map(|(c, s)| c * s).sum();
                    for &i in self.cell_points(flat) {
                        best2 = best2.min(self.dist2(i as usize, z));
                    }
                }
                let mut j = 0;
                loop {
                    if j == self.dim {
                        break 'shell;
                    }
                    if cur[j] < hi[j] {
                        cur[j] += 1;
                        break;
                    }
                    cur[j] = lo[j];
                    j += 1;
                }
            }
            let reach = k as f64 * self.cell;
            if best2 <= reach * reach {
                return best2.sqrt();
            }
            if scanned_cells > 4 * self.len() + 64 {
                return self.brute_min_distance(z);
            }
        }
        best2.sqrt()
    }

    fn brute_min_distance(&self, z: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.dist2(i, z))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}
