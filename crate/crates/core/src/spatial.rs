//! Uniform hash grid over points or boxes.
//!
//! Cells are kept in a sorted table and looked up by binary search, so results never
//! depend on hasher seeds or insertion order.

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::geometry::{Aabb, Vec3};

type Cell = [i32; 3];

#[derive(Debug, Clone)]
pub struct CellIndex {
    cell: f64,
    /// Sorted cell keys with the `[start, end)` range of their items in `items`.
    cells: Vec<(Cell, u32, u32)>,
    items: Vec<u32>,
    lo: Cell,
    hi: Cell,
}

impl CellIndex {
    fn key(&self, p: &Vec3) -> Cell {
        key(self.cell, p)
    }

    /// Indexes items by the cells their bounds overlap.
    pub fn from_boxes(cell: f64, boxes: impl IntoIterator<Item = Aabb>) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut entries: Vec<(Cell, u32)> = Vec::new();
        for (idx, b) in boxes.into_iter().enumerate() {
            let (a, z) = (key(cell, &b.min), key(cell, &b.max));
            for x in a[0]..=z[0] {
                for y in a[1]..=z[1] {
                    for w in a[2]..=z[2] {
                        entries.push(([x, y, w], idx as u32));
                    }
                }
            }
        }
        Self::from_entries(cell, entries)
    }

    pub fn from_points(cell: f64, points: &[Vec3]) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let entries = points
            .iter()
            .enumerate()
            .map(|(i, p)| (key(cell, p), i as u32))
            .collect();
        Self::from_entries(cell, entries)
    }

    fn from_entries(cell: f64, mut entries: Vec<(Cell, u32)>) -> Self {
        entries.sort_unstable();
        let mut cells: Vec<(Cell, u32, u32)> = Vec::new();
        let mut items = Vec::with_capacity(entries.len());
        let mut lo = [i32::MAX; 3];
        let mut hi = [i32::MIN; 3];
        for (k, idx) in entries {
            let pos = items.len() as u32;
            match cells.last_mut() {
                Some(last) if last.0 == k => last.2 = pos + 1,
                _ => cells.push((k, pos, pos + 1)),
            }
            items.push(idx);
            for a in 0..3 {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
        }
        CellIndex {
            cell,
            cells,
            items,
            lo,
            hi,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn bucket(&self, k: &Cell) -> &[u32] {
        match self.cells.binary_search_by(|c| c.0.cmp(k)) {
            Ok(i) => {
                let (_, s, e) = self.cells[i];
                &self.items[s as usize..e as usize]
            }
            Err(_) => &[],
        }
    }

    /// Visits every item registered in the 27 cells around `p`.
    ///
    /// Items may be visited more than once when they span several cells.
    pub fn for_each_near(&self, p: &Vec3, mut f: impl FnMut(usize)) {
        let c = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let k = [c[0] + dx, c[1] + dy, c[2] + dz];
                    for &i in self.bucket(&k) {
                        f(i as usize);
                    }
                }
            }
        }
    }

    /// Nearest indexed point to `q` within `radius` (`radius ≤ cell size`), by squared distance.
    pub fn nearest_within(&self, points: &[Vec3], q: &Vec3, radius: f64) -> Option<(usize, f64)> {
        let r2 = radius * radius;
        let mut best: Option<(usize, f64)> = None;
        self.for_each_near(q, |i| {
            let d2 = (points[i] - q).norm_squared();
            if d2 <= r2 && best.map_or(true, |(bi, bd)| d2 < bd || (d2 == bd && i < bi)) {
                best = Some((i, d2));
            }
        });
        best
    }

    /// Exact nearest neighbor by expanding rings of cells, skipping index `exclude`.
    pub fn nearest(&self, points: &[Vec3], q: &Vec3, exclude: Option<usize>) -> Option<(usize, f64)> {
        if self.cells.is_empty() {
            return None;
        }
        let c = self.key(q);
        let max_ring = (0..3)
            .map(|a| (c[a] - self.lo[a]).abs().max((self.hi[a] - c[a]).abs()))
            .max()
            .unwrap_or(0);
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=max_ring {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        for &i in self.bucket(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            let i = i as usize;
                            if Some(i) == exclude {
                                continue;
                            }
                            let d2 = (points[i] - q).norm_squared();
                            if best.map_or(true, |(bi, bd)| d2 < bd || (d2 == bd && i < bi)) {
                                best = Some((i, d2));
                            }
                        }
                    }
                }
            }
            if let Some((_, d2)) = best {
                let reach = ring as f64 * self.cell;
                if d2 <= reach * reach {
                    break;
                }
            }
        }
        best
    }
}

fn key(cell: f64, p: &Vec3) -> Cell {
    let f = |v: f64| {
        let k = (v / cell).floor();
        k.clamp(i32::MIN as f64 / 2.0, i32::MAX as f64 / 2.0) as i32
    };
    [f(p.x), f(p.y), f(p.z)]
}

/// Median nearest-neighbor spacing over (at most) `max_queries` evenly strided points.
pub fn median_spacing(points: &[Vec3], max_queries: usize) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let b = Aabb::from_points(points.iter())?;
    let ext = b.extent();
    let diag = ext.norm().max(1e-9);
    // Surface-like clouds: spacing ~ sqrt(area / n); area approximated by the two largest box faces.
    let mut e = [ext.x, ext.y, ext.z];
    e.sort_by(|a, b| b.total_cmp(a));
    let area = (e[0] * e[1]).max(diag * diag * 1e-6);
    let cell = (area / points.len() as f64).sqrt().max(diag * 1e-6) * 2.0;
    let index = CellIndex::from_points(cell, points);
    let stride = (points.len() / max_queries.max(1)).max(1);
    let mut d: Vec<f64> = (0..points.len())
        .step_by(stride)
        .filter_map(|i| index.nearest(points, &points[i], Some(i)).map(|(_, d2)| d2.sqrt()))
        .collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Some(d[d.len() / 2])
}
