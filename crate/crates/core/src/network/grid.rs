use std::collections::HashMap;

/// A point with a timestamp and an owner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub t: i64,
    pub owner: u32,
    pub x: f64,
    pub y: f64,
}

/// Uniform grid over the plane with square cells of side `cell`. Each cell
/// keeps its points sorted by time, so a radius query over a time window
/// touches nine cells and binary-searches each.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<GridPoint>>,
}

impl SpatialGrid {
    pub fn new(cell: f64, points: impl IntoIterator<Item = GridPoint>) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut cells: HashMap<(i64, i64), Vec<GridPoint>> = HashMap::new();
        for p in points {
            cells.entry(Self::key_for(cell, p.x, p.y)).or_default().push(p);
        }
        for pts in cells.values_mut() {
            pts.sort_by(|a, b| a.t.cmp(&b.t).then(a.owner.cmp(&b.owner)));
        }
        SpatialGrid { cell, cells }
    }

    fn key_for(cell: f64, x: f64, y: f64) -> (i64, i64) {
        ((x / cell).floor() as i64, (y / cell).floor() as i64)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Calls `visit` for every point within `radius` of `(x, y)` whose time
    /// lies in `[t_from, t_to]`. `radius` must not exceed the cell size.
    pub fn for_each_within(
        &self,
        x: f64,
        y: f64,
        radius: f64,
        t_from: i64,
        t_to: i64,
        mut visit: impl FnMut(&GridPoint),
    ) {
        debug_assert!(radius <= self.cell);
        let (cx, cy) = Self::key_for(self.cell, x, y);
        let r2 = radius * radius;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(pts) = self.cells.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                let start = pts.partition_point(|p| p.t < t_from);
                for p in pts[start..].iter().take_while(|p| p.t <= t_to) {
                    let (ex, ey) = (p.x - x, p.y - y);
                    if ex * ex + ey * ey <= r2 {
                        visit(p);
                    }
                }
            }
        }
    }
}
