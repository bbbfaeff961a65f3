//! The filtered cubical complex of a 2D grayscale image.
//!
//! Cells live on the doubled grid: a cell at `(x, y)` with both coordinates
//! even is the vertex for pixel `(x / 2, y / 2)`, one odd coordinate makes an
//! edge and two make a square. Nothing is materialized beyond the pixel
//! values; incidence is coordinate arithmetic.

use std::cmp::Ordering;
use std::fmt;

use arrayvec::ArrayVec;
use thiserror::Error;

use crate::image_io::GrayImage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cell ({x}, {y}) lies outside the {grid_width}x{grid_height} cell grid")]
pub struct BoundsError {
    pub x: u32,
    pub y: u32,
    pub grid_width: u32,
    pub grid_height: u32,
}

/// A cell addressed by doubled-grid coordinates.
///
/// Cells order row-major: by `y`, then `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub const fn vertex(px: u32, py: u32) -> Self {
        Self {
            x: 2 * px,
            y: 2 * py,
        }
    }

    /// Number of odd coordinates: 0 vertex, 1 edge, 2 square.
    pub const fn dim(self) -> u8 {
        (self.x & 1) as u8 + (self.y & 1) as u8
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub type Neighbors = ArrayVec<Cell, 4>;

/// Cubical complex with the lower-star filtration: a cell's value is the
/// maximum over its vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubicalComplex {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

pub fn build_complex(img: &GrayImage) -> CubicalComplex {
    CubicalComplex::from_image(img)
}

impl CubicalComplex {
    pub fn from_image(img: &GrayImage) -> Self {
        let width = u32::try_from(img.width()).expect("image width fits in u32");
        let height = u32::try_from(img.height()).expect("image height fits in u32");
        assert!(
            width < (1 << 30) && height < (1 << 30),
            "image too large for the doubled grid"
        );
        Self {
            width,
            height,
            pixels: img.values().to_vec(),
        }
    }

    /// Width in pixels.
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn grid_width(&self) -> u32 {
        2 * self.width - 1
    }

    pub fn grid_height(&self) -> u32 {
        2 * self.height - 1
    }

    pub fn num_cells(&self) -> usize {
        self.grid_width() as usize * self.grid_height() as usize
    }

    pub fn num_vertices(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, px: u32, py: u32) -> u8 {
        self.pixels[(py * self.width + px) as usize]
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.grid_width() && c.y < self.grid_height()
    }

    fn check(&self, c: Cell) -> Result<(), BoundsError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(BoundsError {
                x: c.x,
                y: c.y,
                grid_width: self.grid_width(),
                grid_height: self.grid_height(),
            })
        }
    }

    /// Dense index of a cell, row-major over the doubled grid.
    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.grid_width() as usize + c.x as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let gw = self.grid_width() as usize;
        Cell::new((index % gw) as u32, (index / gw) as u32)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells()).map(|i| self.cell_at(i))
    }

    /// Vertices of a cell (1, 2 or 4 of them).
    pub fn vertices(&self, c: Cell) -> Neighbors {
        let mut out = Neighbors::new();
        let xs = if c.x & 1 == 1 {
            [c.x - 1, c.x + 1]
        } else {
            [c.x, c.x]
        };
        let ys = if c.y & 1 == 1 {
            [c.y - 1, c.y + 1]
        } else {
            [c.y, c.y]
        };
        let nx = if c.x & 1 == 1 { 2 } else { 1 };
        let ny = if c.y & 1 == 1 { 2 } else { 1 };
        for &y in &ys[..ny] {
            for &x in &xs[..nx] {
                out.push(Cell::new(x, y));
            }
        }
        out
    }

    /// Filtration value: maximum pixel value over the cell's vertices.
    pub fn value(&self, c: Cell) -> u8 {
        let x0 = c.x / 2;
        let y0 = c.y / 2;
        let x1 = x0 + (c.x & 1);
        let y1 = y0 + (c.y & 1);
        self.pixel(x0, y0)
            .max(self.pixel(x1, y0))
            .max(self.pixel(x0, y1))
            .max(self.pixel(x1, y1))
    }

    /// Codimension-1 faces.
    pub fn faces(&self, c: Cell) -> Result<Neighbors, BoundsError> {
        self.check(c)?;
        let mut out = Neighbors::new();
        if c.x & 1 == 1 {
            out.push(Cell::new(c.x - 1, c.y));
            out.push(Cell::new(c.x + 1, c.y));
        }
        if c.y & 1 == 1 {
            out.push(Cell::new(c.x, c.y - 1));
            out.push(Cell::new(c.x, c.y + 1));
        }
        Ok(out)
    }

    /// Codimension-1 cofaces that exist in the grid.
    pub fn cofaces(&self, c: Cell) -> Result<Neighbors, BoundsError> {
        self.check(c)?;
        let mut out = Neighbors::new();
        if c.x & 1 == 0 {
            if c.x > 0 {
                out.push(Cell::new(c.x - 1, c.y));
            }
            if c.x + 1 < self.grid_width() {
                out.push(Cell::new(c.x + 1, c.y));
            }
        }
        if c.y & 1 == 0 {
            if c.y > 0 {
                out.push(Cell::new(c.x, c.y - 1));
            }
            if c.y + 1 < self.grid_height() {
                out.push(Cell::new(c.x, c.y + 1));
            }
        }
        Ok(out)
    }

    /// Number of vertices, edges and squares.
    pub fn cell_counts(&self) -> [usize; 3] {
        let (w, h) = (self.width as usize, self.height as usize);
        [w * h, w * (h - 1) + h * (w - 1), (w - 1) * (h - 1)]
    }

    pub fn euler_characteristic(&self) -> i64 {
        let [v, e, s] = self.cell_counts();
        v as i64 - e as i64 + s as i64
    }
}
