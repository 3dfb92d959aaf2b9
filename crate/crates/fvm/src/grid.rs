//! Cell-grid accessors shared by task kernels and the dense reference.
//!
//! The numerical routines are written against the [`Cells`] traits so the
//! exact same code runs over a runtime block view inside a kernel and over an
//! owned [`Field`] in the reference integrator.

use taskrt::{Block, BlockMut};

/// Read access to a 2D grid of cells, each holding `n_vars` scalars.
/// `i` indexes columns (x), `j` rows (y).
pub trait Cells {
    fn nx(&self) -> usize;
    fn ny(&self) -> usize;
    fn n_vars(&self) -> usize;
    fn cell(&self, i: usize, j: usize) -> &[f64];
}

/// Mutable access to a cell grid.
pub trait CellsMut: Cells {
    fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64];
}

/// Owned dense cell grid, row-major with the variable index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    nx: usize,
    ny: usize,
    nvar: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(nx: usize, ny: usize, nvar: usize) -> Self {
        Self {
            nx,
            ny,
            nvar,
            data: vec![0.0; nx * ny * nvar],
        }
    }

    /// Wraps an existing row-major buffer. The length must be exactly
    /// `nx * ny * nvar`.
    pub fn from_vec(nx: usize, ny: usize, nvar: usize, data: Vec<f64>) -> Option<Self> {
        if data.len() != nx * ny * nvar {
            return None;
        }
        Some(Self { nx, ny, nvar, data })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Copies the `w` x `h` cell window starting at (`x0`, `y0`) into a
    /// dense row-major buffer.
    pub fn window(&self, x0: usize, y0: usize, w: usize, h: usize) -> Vec<f64> {
        assert!(x0 + w <= self.nx && y0 + h <= self.ny);
        let mut out = Vec::with_capacity(w * h * self.nvar);
        for j in 0..h {
            let start = ((y0 + j) * self.nx + x0) * self.nvar;
            out.extend_from_slice(&self.data[start..start + w * self.nvar]);
        }
        out
    }

    /// Writes a dense row-major buffer into the window at (`x0`, `y0`).
    pub fn set_window(&mut self, x0: usize, y0: usize, w: usize, h: usize, data: &[f64]) {
        assert!(x0 + w <= self.nx && y0 + h <= self.ny);
        assert_eq!(data.len(), w * h * self.nvar);
        for j in 0..h {
            let start = ((y0 + j) * self.nx + x0) * self.nvar;
            self.data[start..start + w * self.nvar]
                .copy_from_slice(&data[j * w * self.nvar..(j + 1) * w * self.nvar]);
        }
    }
}

impl Cells for Field {
    fn nx(&self) -> usize {
        self.nx
    }

    fn ny(&self) -> usize {
        self.ny
    }

    fn n_vars(&self) -> usize {
        self.nvar
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> &[f64] {
        let c = (j * self.nx + i) * self.nvar;
        &self.data[c..c + self.nvar]
    }
}

impl CellsMut for Field {
    #[inline]
    fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let c = (j * self.nx + i) * self.nvar;
        &mut self.data[c..c + self.nvar]
    }
}

impl Cells for Block<'_> {
    fn nx(&self) -> usize {
        self.cols()
    }

    fn ny(&self) -> usize {
        self.rows()
    }

    fn n_vars(&self) -> usize {
        self.item_len()
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> &[f64] {
        self.item(i, j)
    }
}

impl Cells for BlockMut<'_> {
    fn nx(&self) -> usize {
        self.cols()
    }

    fn ny(&self) -> usize {
        self.rows()
    }

    fn n_vars(&self) -> usize {
        self.item_len()
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> &[f64] {
        self.item(i, j)
    }
}

impl CellsMut for BlockMut<'_> {
    #[inline]
    fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        self.item_mut(i, j)
    }
}
