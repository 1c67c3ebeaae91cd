use serde::{Deserialize, Serialize};

use super::{ConvexPolygon, OrientedBox3, Vec2};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Free,
    /// Indices into the occupier list that cover the cell centre.
    Occupied(Vec<usize>),
    OutsidePlatform,
}

/// Top-down grid over a platform's footprint bounding rectangle. Cell
/// `(i, j)` spans `origin + [i, i+1) * cell_size` along X and
/// `origin + [j, j+1) * cell_size` along Z; its state is decided at its centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMap {
    origin: Vec2,
    cell_size: f64,
    nx: usize,
    nz: usize,
    cells: Vec<CellState>,
}

impl OccupancyMap {
    pub fn from_footprints(platform: &ConvexPolygon, occupiers: &[ConvexPolygon], cell_size: f64) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Configuration(format!("cell size must be > 0, got {cell_size}")));
        }
        if platform.is_degenerate() {
            return Err(Error::Configuration("platform footprint has zero area".into()));
        }
        let (lo, hi) = platform.bounds();
        let ext = hi - lo;
        if cell_size > ext.x || cell_size > ext.y {
            return Err(Error::Configuration(format!(
                "cell size {cell_size} m exceeds platform extent {:.3} x {:.3} m",
                ext.x, ext.y
            )));
        }
        let nx = (ext.x / cell_size).ceil() as usize;
        let nz = (ext.y / cell_size).ceil() as usize;
        let bounds: Vec<(Vec2, Vec2)> = occupiers.iter().map(|o| o.bounds()).collect();
        let mut cells = Vec::with_capacity(nx * nz);
        for j in 0..nz {
            for i in 0..nx {
                let c = Vec2::new(lo.x + (i as f64 + 0.5) * cell_size, lo.y + (j as f64 + 0.5) * cell_size);
                if !platform.contains(&c) {
                    cells.push(CellState::OutsidePlatform);
                    continue;
                }
                let hits: Vec<usize> = occupiers
                    .iter()
                    .enumerate()
                    .filter(|(k, o)| {
                        let (blo, bhi) = bounds[*k];
                        c.x >= blo.x && c.x <= bhi.x && c.y >= blo.y && c.y <= bhi.y && o.contains(&c)
                    })
                    .map(|(k, _)| k)
                    .collect();
                cells.push(if hits.is_empty() {
                    CellState::Free
                } else {
                    CellState::Occupied(hits)
                });
            }
        }
        Ok(Self {
            origin: lo,
            cell_size,
            nx,
            nz,
            cells,
        })
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    pub fn cell(&self, i: usize, j: usize) -> &CellState {
        &self.cells[j * self.nx + i]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.cell_size,
            self.origin.y + (j as f64 + 0.5) * self.cell_size,
        )
    }

    /// Grid index of the cell holding `(x, z)`, or `None` off the grid.
    pub fn cell_index(&self, p: &Vec2) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fz = (p.y - self.origin.y) / self.cell_size;
        if !(fx >= 0.0 && fz >= 0.0) {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fz.floor() as usize);
        (i < self.nx && j < self.nz).then_some((i, j))
    }

    pub fn state_at(&self, p: &Vec2) -> Option<&CellState> {
        self.cell_index(p).map(|(i, j)| self.cell(i, j))
    }

    pub fn is_free_at(&self, p: &Vec2) -> bool {
        matches!(self.state_at(p), Some(CellState::Free))
    }

    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), &CellState)> {
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, s)| ((k % self.nx, k / self.nx), s))
    }

    pub fn count_occupied(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c, CellState::Occupied(_)))
            .count()
    }

    pub fn count_free(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, CellState::Free)).count()
    }
}

pub fn build_occupancy_map(
    platform: &OrientedBox3,
    occupiers: &[OrientedBox3],
    cell_size: f64,
) -> Result<OccupancyMap> {
    let fps: Vec<ConvexPolygon> = occupiers.iter().map(|o| o.footprint()).collect();
    OccupancyMap::from_footprints(&platform.footprint(), &fps, cell_size)
}
