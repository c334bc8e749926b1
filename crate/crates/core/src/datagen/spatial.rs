//! Uniform 2D bucket grid over a 3D point cloud for radius and kNN queries.
//!
//! Distances are full 3D; buckets only partition x/y, which suits 2.5D
//! terrain clouds. kNN results are ordered by `(distance², index)`.

#[derive(Debug, Clone)]
pub struct PointIndex<'a> {
    points: &'a [[f64; 3]],
    cell: f64,
    min: [f64; 2],
    dims: [usize; 2],
    /// Bucket start offsets into `order` (CSR layout).
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> PointIndex<'a> {
    pub fn new(points: &'a [[f64; 3]], cell: f64) -> Self {
        assert!(cell > 0.0);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let dims = [
            ((hi[0] - lo[0]) / cell).floor() as usize + 1,
            ((hi[1] - lo[1]) / cell).floor() as usize + 1,
        ];
        let mut idx = Self {
            points,
            cell,
            min: lo,
            dims,
            starts: vec![0; dims[0] * dims[1] + 1],
            order: vec![0; points.len()],
        };
        let buckets: Vec<usize> = points.iter().map(|p| idx.bucket(p)).collect();
        for &b in &buckets {
            idx.starts[b + 1] += 1;
        }
        for i in 0..idx.starts.len() - 1 {
            idx.starts[i + 1] += idx.starts[i];
        }
        let mut fill = idx.starts.clone();
        for (i, &b) in buckets.iter().enumerate() {
            idx.order[fill[b]] = i;
            fill[b] += 1;
        }
        idx
    }

    pub fn points(&self) -> &'a [[f64; 3]] {
        self.points
    }

    fn coord(&self, v: f64, axis: usize) -> i64 {
        ((v - self.min[axis]) / self.cell).floor() as i64
    }

    fn bucket(&self, p: &[f64; 3]) -> usize {
        let cx = self.coord(p[0], 0).clamp(0, self.dims[0] as i64 - 1) as usize;
        let cy = self.coord(p[1], 1).clamp(0, self.dims[1] as i64 - 1) as usize;
        cy * self.dims[0] + cx
    }

    fn bucket_slice(&self, cx: i64, cy: i64) -> &[usize] {
        if cx < 0 || cy < 0 || cx >= self.dims[0] as i64 || cy >= self.dims[1] as i64 {
            return &[];
        }
        let b = cy as usize * self.dims[0] + cx as usize;
        &self.order[self.starts[b]..self.starts[b + 1]]
    }

    /// Indices of all points within `radius` (inclusive), ascending.
    pub fn within(&self, q: [f64; 3], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let (x0, x1) = (self.coord(q[0] - radius, 0), self.coord(q[0] + radius, 0));
        let (y0, y1) = (self.coord(q[1] - radius, 1), self.coord(q[1] + radius, 1));
        let mut out = Vec::new();
        for cy in y0.max(0)..=y1.min(self.dims[1] as i64 - 1) {
            for cx in x0.max(0)..=x1.min(self.dims[0] as i64 - 1) {
                for &i in self.bucket_slice(cx, cy) {
                    if dist2(&self.points[i], &q) <= r2 {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The `k` nearest points to `q` that do not coincide with it, as
    /// `(distance², index)` sorted ascending with ties broken by index.
    pub fn knn_excluding_coincident(&self, q: [f64; 3], k: usize) -> Vec<(f64, usize)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let qx = self.coord(q[0], 0);
        let qy = self.coord(q[1], 1);
        let max_ring = self.dims[0].max(self.dims[1]) as i64 + qx.abs().max(qy.abs()) + 1;
        let mut cand: Vec<(f64, usize)> = Vec::new();
        let mut ring = 0i64;
        loop {
            if ring == 0 {
                self.collect(qx, qy, &q, &mut cand);
            } else {
                for d in -ring..=ring {
                    self.collect(qx + d, qy - ring, &q, &mut cand);
                    self.collect(qx + d, qy + ring, &q, &mut cand);
                }
                for d in -ring + 1..ring {
                    self.collect(qx - ring, qy + d, &q, &mut cand);
                    self.collect(qx + ring, qy + d, &q, &mut cand);
                }
            }
            // Everything outside rings 0..=ring is at least `ring·cell` away in x/y.
            if cand.len() >= k {
                cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let bound = ring as f64 * self.cell;
                if cand[k - 1].0 < bound * bound {
                    break;
                }
            }
            if ring > max_ring {
                break;
            }
            ring += 1;
        }
        cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(k);
        cand
    }

    fn collect(&self, cx: i64, cy: i64, q: &[f64; 3], out: &mut Vec<(f64, usize)>) {
        for &i in self.bucket_slice(cx, cy) {
            let d = dist2(&self.points[i], q);
            if d > 0.0 {
                out.push((d, i));
            }
        }
    }
}

#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
