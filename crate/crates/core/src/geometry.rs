//! Network layouts on a square torus and the hexagonal reuse grid.
//!
//! All positions live in `[0, side)²` with wrap-around distances, which
//! removes boundary effects from the layout statistics. The hexagonal grid
//! partitions the same torus into cells used for sounding-sequence reuse;
//! it is purely geometric and unrelated to the user-centric clusters.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Square coverage area with torus topology; `area_m2() = side_m²`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TorusArea {
    pub side_m: f64,
}

impl TorusArea {
    pub fn new(side_m: f64) -> Result<Self> {
        if !(side_m > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "torus side must be positive, got {side_m}"
            )));
        }
        Ok(TorusArea { side_m })
    }

    /// Area in square meters.
    pub fn area_m2(&self) -> f64 {
        self.side_m * self.side_m
    }

    pub fn from_area_m2(area: f64) -> Result<Self> {
        if !(area > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "area must be positive, got {area}"
            )));
        }
        TorusArea::new(area.sqrt())
    }
}

/// Radio-unit and user positions for one network realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layout {
    pub side_m: f64,
    pub rng_seed: u64,
    pub ru_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
}

impl Layout {
    pub fn n_rus(&self) -> usize {
        self.ru_positions.len()
    }

    pub fn n_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn area(&self) -> TorusArea {
        TorusArea { side_m: self.side_m }
    }
}

/// Place `l` radio units and `k` users i.i.d. uniformly on the torus.
///
/// Draw order is fixed (RUs first, then UEs, x before y) so a seed fully
/// determines the layout.
pub fn place_uniform(area: TorusArea, l: usize, k: usize, seed: u64) -> Result<Layout> {
    if l == 0 || k == 0 {
        return Err(Error::InvalidConfig(format!(
            "need at least one RU and one UE, got L={l}, K={k}"
        )));
    }
    let mut stream = rng::stream_from(seed);
    let side = area.side_m;
    let draw = |stream: &mut rng::Stream| {
        let x: f64 = stream.gen::<f64>() * side;
        let y: f64 = stream.gen::<f64>() * side;
        Point::new(x, y)
    };
    let ru_positions = (0..l).map(|_| draw(&mut stream)).collect();
    let ue_positions = (0..k).map(|_| draw(&mut stream)).collect();
    Ok(Layout {
        side_m: side,
        rng_seed: seed,
        ru_positions,
        ue_positions,
    })
}

/// Minimal-norm displacement from `a` to `b` under wrap-around.
///
/// Each component is reduced to `[-side/2, side/2]`; the `+side/2` branch is
/// kept on exact ties so the result is deterministic.
pub fn torus_displacement(a: Point, b: Point, area: TorusArea) -> [f64; 2] {
    let side = area.side_m;
    let wrap = |d: f64| {
        let r = d.rem_euclid(side);
        if r > side / 2.0 {
            r - side
        } else {
            r
        }
    };
    [wrap(b.x - a.x), wrap(b.y - a.y)]
}

/// Wrap-around distance between two points.
pub fn torus_distance(a: Point, b: Point, area: TorusArea) -> f64 {
    let [dx, dy] = torus_displacement(a, b, area);
    (dx * dx + dy * dy).sqrt()
}

/// Angle of the link from `a` toward `b` on the torus, in `(-pi, pi]`.
pub fn torus_angle(a: Point, b: Point, area: TorusArea) -> f64 {
    let [dx, dy] = torus_displacement(a, b, area);
    dy.atan2(dx)
}

/// Radius `d_L = sqrt(A / (π L))` of a disk of area `A/L`.
pub fn disk_radius(area: TorusArea, l: usize) -> f64 {
    (area.area_m2() / (std::f64::consts::PI * l as f64)).sqrt()
}

/// Hexagonal partition of the torus with a proper coloring by square index.
///
/// Cells are the Voronoi regions of a sheared lattice (rows offset by half a
/// cell pitch), which tiles the torus exactly once the column count is a
/// multiple of 3 and the row count is even. Cell ids are `row * n_cols + col`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HexGrid {
    pub side_m: f64,
    pub cell_radius_m: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub n_squares: usize,
    centers: Vec<Point>,
    square_of_cell: Vec<usize>,
}

impl HexGrid {
    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    pub fn cell_centers(&self) -> &[Point] {
        &self.centers
    }

    /// Latin-square index in `[1, n_squares]` assigned to a cell.
    pub fn square_of_cell(&self, cell: usize) -> usize {
        self.square_of_cell[cell]
    }

    /// Cell containing `p`: nearest center under the torus metric
    /// (lowest id on ties).
    pub fn cell_of_point(&self, p: Point) -> usize {
        let area = TorusArea { side_m: self.side_m };
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = torus_distance(p, *c, area);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// The six lattice neighbors of a cell on the torus.
    pub fn neighbors(&self, cell: usize) -> [usize; 6] {
        let q = (cell % self.n_cols) as i64;
        let r = (cell / self.n_cols) as i64;
        const OFFSETS: [(i64, i64); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];
        let mut out = [0usize; 6];
        for (i, (dq, dr)) in OFFSETS.iter().enumerate() {
            out[i] = self.canonical(q + dq, r + dr);
        }
        out
    }

    /// Map raw lattice coordinates onto a cell id, applying the torus
    /// identifications (a full row wrap shifts columns by `n_rows/2`).
    fn canonical(&self, mut q: i64, mut r: i64) -> usize {
        let rows = self.n_rows as i64;
        let cols = self.n_cols as i64;
        while r < 0 {
            r += rows;
            q -= rows / 2;
        }
        while r >= rows {
            r -= rows;
            q += rows / 2;
        }
        let q = q.rem_euclid(cols);
        (r * cols + q) as usize
    }
}

/// Build the hexagonal reuse grid with `n_squares` available square indices.
///
/// The coloring first splits cells into three lattice classes (which is a
/// proper coloring of the six-neighbor adjacency), then spreads the square
/// indices of each class over its cells so that all `n_squares` indices get
/// used when the grid is large enough. Adjacent cells always end up with
/// distinct indices.
pub fn build_hex_grid(area: TorusArea, cell_radius: f64, n_squares: usize) -> Result<HexGrid> {
    let side = area.side_m;
    if n_squares < 3 {
        return Err(Error::InvalidConfig(format!(
            "hex coloring needs at least 3 square indices, got {n_squares}"
        )));
    }
    if !(cell_radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cell radius must be positive, got {cell_radius}"
        )));
    }
    if cell_radius > side / 2.0 {
        return Err(Error::InvalidConfig(format!(
            "cell radius {cell_radius} exceeds half the torus side {}",
            side / 2.0
        )));
    }

    // Ideal hex pitch: columns sqrt(3)·R apart, rows 1.5·R apart. Round the
    // counts onto the torus period (columns to a multiple of 3 so the
    // three-class coloring wraps, rows to an even count for the shear wrap).
    let raw_cols = side / (3f64.sqrt() * cell_radius);
    let raw_rows = side / (1.5 * cell_radius);
    let n_cols = (((raw_cols / 3.0).round() as usize).max(1)) * 3;
    let n_rows = (((raw_rows / 2.0).round() as usize).max(2)) * 2;
    if n_cols < 3 || n_rows < 4 {
        return Err(Error::InvalidConfig(format!(
            "cell radius {cell_radius} leaves a degenerate {n_cols}x{n_rows} grid on side {side}"
        )));
    }

    let dx = side / n_cols as f64;
    let dy = side / n_rows as f64;
    let mut centers = Vec::with_capacity(n_cols * n_rows);
    for r in 0..n_rows {
        for q in 0..n_cols {
            let x = (q as f64 + 0.5 * r as f64) * dx % side;
            let y = r as f64 * dy;
            centers.push(Point::new(x, y));
        }
    }

    // Partition the square indices [1, n_squares] round-robin over the three
    // lattice classes; each class cycles through its own share.
    let groups: [Vec<usize>; 3] = {
        let mut g: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for s in 1..=n_squares {
            g[(s - 1) % 3].push(s);
        }
        g
    };
    let mut class_counter = [0usize; 3];
    let mut square_of_cell = Vec::with_capacity(n_cols * n_rows);
    for r in 0..n_rows {
        for q in 0..n_cols {
            let class = (q + 2 * r) % 3;
            let group = &groups[class];
            square_of_cell.push(group[class_counter[class] % group.len()]);
            class_counter[class] += 1;
        }
    }

    Ok(HexGrid {
        side_m: side,
        cell_radius_m: cell_radius,
        n_cols,
        n_rows,
        n_squares,
        centers,
        square_of_cell,
    })
}
