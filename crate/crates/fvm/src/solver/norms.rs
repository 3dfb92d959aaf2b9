//! Discrete error norms and conserved totals.

use crate::grid::{Cells, CellsMut, Field};
use crate::mesh::Domain;
use crate::systems::System;

/// Volume-weighted L1 and L2 norms, one entry per conserved variable.
#[derive(Clone, Debug)]
pub struct ErrorNorms {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
}

/// Norms of `a - b` with the given cell volume.
pub fn diff_norms(a: &Field, b: &Field, cell_volume: f64) -> ErrorNorms {
    assert_eq!((a.nx(), a.ny(), a.n_vars()), (b.nx(), b.ny(), b.n_vars()));
    let nv = a.n_vars();
    let mut l1 = vec![0.0; nv];
    let mut l2 = vec![0.0; nv];
    // Accumulate per variable in index order to keep the sums deterministic.
    for j in 0..a.ny() {
        for i in 0..a.nx() {
            let ca = a.cell(i, j);
            let cb = b.cell(i, j);
            for v in 0..nv {
                let d = ca[v] - cb[v];
                l1[v] += d.abs() * cell_volume;
                l2[v] += d * d * cell_volume;
            }
        }
    }
    for v in &mut l2 {
        *v = v.sqrt();
    }
    ErrorNorms { l1, l2 }
}

/// Norms of the difference between `field` and the exact solution at time
/// `t`, if the system has one.
pub fn norms_vs_exact(
    sys: &dyn System,
    domain: &Domain,
    field: &Field,
    t: f64,
) -> Option<ErrorNorms> {
    let mut probe = vec![0.0; sys.n_vars()];
    let (x0, y0) = domain.cell_center(0, 0);
    if !sys.exact(x0, y0, t, &mut probe) {
        return None;
    }
    let mut exact = Field::zeros(domain.nx, domain.ny, sys.n_vars());
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let (x, y) = domain.cell_center(i, j);
            sys.exact(x, y, t, exact.cell_mut(i, j));
        }
    }
    Some(diff_norms(field, &exact, domain.dx * domain.dy))
}

/// Volume-weighted totals of each conserved variable.
pub fn totals(field: &Field, cell_volume: f64) -> Vec<f64> {
    let nv = field.n_vars();
    let mut sums = vec![0.0; nv];
    for j in 0..field.ny() {
        for i in 0..field.nx() {
            for (s, q) in sums.iter_mut().zip(field.cell(i, j)) {
                *s += q * cell_volume;
            }
        }
    }
    sums
}
