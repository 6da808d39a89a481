//! The 28x28 RoI grid shared by the extractor, controller and metric.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Side length of the RoI grid.
pub const GRID: usize = 28;
pub const GRID_CELLS: usize = GRID * GRID;

/// Per-cell object-presence scores over the search window, row-major with
/// row 0 at the top of the window.
#[derive(Clone, PartialEq)]
pub struct RoiMatrix {
    cells: Box<[f64; GRID_CELLS]>,
}

impl RoiMatrix {
    pub fn zeros() -> Self {
        Self::filled(0.0)
    }

    pub fn filled(v: f64) -> Self {
        Self {
            cells: Box::new([v; GRID_CELLS]),
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros();
        for r in 0..GRID {
            for c in 0..GRID {
                m.cells[r * GRID + c] = f(r, c);
            }
        }
        m
    }

    /// Values must be finite and inside `[0, 1]`.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != GRID_CELLS {
            return Err(Error::Shape(format!(
                "RoI matrix needs {GRID_CELLS} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Param(format!(
                "RoI value {} at cell {i} outside [0, 1]",
                values[i]
            )));
        }
        let mut m = Self::zeros();
        m.cells.copy_from_slice(values);
        Ok(m)
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let n = t.len();
        if t.shape().iter().rev().take(2).any(|&d| d != GRID) || n != GRID_CELLS {
            return Err(Error::Shape(format!(
                "expected a {GRID}x{GRID} map, got {:?}",
                t.shape()
            )));
        }
        Self::from_slice(t.data())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * GRID + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.cells[row * GRID + col] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.cells[..]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(vec![GRID, GRID], self.cells.to_vec())
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / GRID_CELLS as f64
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(|r, c| self.get(r, GRID - 1 - c))
    }

    /// Mirror top-bottom.
    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(|r, c| self.get(GRID - 1 - r, c))
    }
}

impl std::fmt::Debug for RoiMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "RoiMatrix(sum={:.4})", self.sum())?;
        for r in 0..GRID {
            let row: String = (0..GRID)
                .map(|c| match self.get(r, c) {
                    v if v >= 0.75 => '#',
                    v if v >= 0.5 => '+',
                    v if v >= 0.25 => '.',
                    _ => ' ',
                })
                .collect();
            writeln!(f, "|{row}|")?;
        }
        Ok(())
    }
}

/// Binary ground-truth occupancy of the grid.
#[derive(Clone, PartialEq, Eq)]
pub struct GtMatrix {
    cells: Box<[bool; GRID_CELLS]>,
}

impl GtMatrix {
    pub fn empty() -> Self {
        Self {
            cells: Box::new([false; GRID_CELLS]),
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty();
        for r in 0..GRID {
            for c in 0..GRID {
                m.cells[r * GRID + c] = f(r, c);
            }
        }
        m
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * GRID + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.cells[row * GRID + col] = v;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells[..]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn to_roi(&self) -> RoiMatrix {
        RoiMatrix::from_fn(|r, c| if self.get(r, c) { 1.0 } else { 0.0 })
    }

    /// The 0/1 values as a `[28, 28]` tensor, the training target layout.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(
            vec![GRID, GRID],
            self.cells.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }
}

impl std::fmt::Debug for GtMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GtMatrix(count={})", self.count())
    }
}
