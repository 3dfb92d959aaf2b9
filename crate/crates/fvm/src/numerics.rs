//! First-order finite-volume building blocks.
//!
//! Every arithmetic expression that contributes to a cell state lives here,
//! in exactly one place: the Lax-Friedrichs interface flux, the residual
//! assembly from the four interface fluxes, and the explicit update. Both
//! the task kernels and the dense reference integrator call these helpers
//! with identical argument bits, which is what makes runs bitwise
//! reproducible across partitionings, worker counts, and schedulers.
//!
//! Residual evaluation is split in gather form. For interior cells the
//! per-cell flux and wave-speed tables are precomputed once per block; for
//! the one-cell border ring the same quantities are recomputed on the fly
//! against the overlap buffers. A cell's residual therefore never depends on
//! which side of a subdomain boundary its neighbours live on.

use thiserror::Error;

use crate::grid::{Cells, CellsMut};
use crate::mesh::Domain;
use crate::systems::{Axis, NonPhysical, System};

/// Upper bound on the number of conserved variables, used to size stack
/// buffers in the cell loops.
pub const MAX_VARS: usize = 8;

/// A numerical failure pinned to a cell (local indices within the grid the
/// routine was handed).
#[derive(Clone, Debug, Error)]
#[error("cell ({i}, {j}): {source}")]
pub struct CellError {
    pub i: usize,
    pub j: usize,
    #[source]
    pub source: NonPhysical,
}

impl CellError {
    fn at(i: usize, j: usize) -> impl FnOnce(NonPhysical) -> CellError {
        move |source| CellError { i, j, source }
    }
}

/// Lax-Friedrichs flux across one interface. `a` is the cell on the low
/// side (west or south), `b` on the high side; `fa`/`fb` are the physical
/// fluxes of the two states along the interface normal and `sa`/`sb` their
/// largest absolute wave speeds.
#[inline]
pub fn lf_combine(
    fa: &[f64],
    fb: &[f64],
    wa: &[f64],
    wb: &[f64],
    sa: f64,
    sb: f64,
    out: &mut [f64],
) {
    let s = 0.5 * sa.max(sb);
    for v in 0..out.len() {
        out[v] = 0.5 * (fa[v] + fb[v]) - s * (wb[v] - wa[v]);
    }
}

/// Residual of one cell from its four interface fluxes (west, east, south,
/// north), with `cx = 1/dx` and `cy = 1/dy`.
#[inline]
pub fn combine_rhs(fw: &[f64], fe: &[f64], fs: &[f64], fnn: &[f64], cx: f64, cy: f64, out: &mut [f64]) {
    for v in 0..out.len() {
        out[v] = cx * (fw[v] - fe[v]) + cy * (fs[v] - fnn[v]);
    }
}

/// Explicit Euler step of one cell.
#[inline]
pub fn update_cell(u: &mut [f64], rhs: &[f64], dt: f64) {
    for v in 0..u.len() {
        u[v] += dt * rhs[v];
    }
}

/// Per-cell physical fluxes and wave speeds of a cell grid.
pub struct FluxTables {
    nx: usize,
    nvar: usize,
    fx: Vec<f64>,
    fy: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
}

impl FluxTables {
    pub fn new(nx: usize, ny: usize, nvar: usize) -> Self {
        Self {
            nx,
            nvar,
            fx: vec![0.0; nx * ny * nvar],
            fy: vec![0.0; nx * ny * nvar],
            sx: vec![0.0; nx * ny],
            sy: vec![0.0; nx * ny],
        }
    }

    /// Fills the tables for every cell of `u`.
    pub fn fill(&mut self, sys: &dyn System, u: &impl Cells) -> Result<(), CellError> {
        let (nx, ny, nv) = (u.nx(), u.ny(), u.n_vars());
        debug_assert!(nx == self.nx && nx * ny * nv == self.fx.len());
        for j in 0..ny {
            for i in 0..nx {
                let w = u.cell(i, j);
                let c = (j * nx + i) * nv;
                sys.flux(w, Axis::X, &mut self.fx[c..c + nv])
                    .map_err(CellError::at(i, j))?;
                sys.flux(w, Axis::Y, &mut self.fy[c..c + nv])
                    .map_err(CellError::at(i, j))?;
                self.sx[j * nx + i] = sys
                    .max_abs_eigenvalue(w, Axis::X)
                    .map_err(CellError::at(i, j))?;
                self.sy[j * nx + i] = sys
                    .max_abs_eigenvalue(w, Axis::Y)
                    .map_err(CellError::at(i, j))?;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn fx(&self, i: usize, j: usize) -> &[f64] {
        let c = (j * self.nx + i) * self.nvar;
        &self.fx[c..c + self.nvar]
    }

    #[inline]
    pub fn fy(&self, i: usize, j: usize) -> &[f64] {
        let c = (j * self.nx + i) * self.nvar;
        &self.fy[c..c + self.nvar]
    }

    #[inline]
    pub fn sx(&self, i: usize, j: usize) -> f64 {
        self.sx[j * self.nx + i]
    }

    #[inline]
    pub fn sy(&self, i: usize, j: usize) -> f64 {
        self.sy[j * self.nx + i]
    }
}

/// Zeroes the whole residual grid and fills the strict interior (cells whose
/// four neighbours all lie in `u`) from precomputed flux tables.
pub fn internal_residuals(
    sys: &dyn System,
    u: &impl Cells,
    rhs: &mut impl CellsMut,
    dx: f64,
    dy: f64,
) -> Result<(), CellError> {
    let (nx, ny, nv) = (u.nx(), u.ny(), u.n_vars());
    debug_assert!(nv <= MAX_VARS);
    for j in 0..ny {
        for i in 0..nx {
            rhs.cell_mut(i, j).fill(0.0);
        }
    }
    let mut tables = FluxTables::new(nx, ny, nv);
    tables.fill(sys, u)?;
    let cx = 1.0 / dx;
    let cy = 1.0 / dy;
    let mut fw = [0.0; MAX_VARS];
    let mut fe = [0.0; MAX_VARS];
    let mut fs = [0.0; MAX_VARS];
    let mut fnn = [0.0; MAX_VARS];
    for j in 1..ny.saturating_sub(1) {
        for i in 1..nx.saturating_sub(1) {
            lf_combine(
                tables.fx(i - 1, j),
                tables.fx(i, j),
                u.cell(i - 1, j),
                u.cell(i, j),
                tables.sx(i - 1, j),
                tables.sx(i, j),
                &mut fw[..nv],
            );
            lf_combine(
                tables.fx(i, j),
                tables.fx(i + 1, j),
                u.cell(i, j),
                u.cell(i + 1, j),
                tables.sx(i, j),
                tables.sx(i + 1, j),
                &mut fe[..nv],
            );
            lf_combine(
                tables.fy(i, j - 1),
                tables.fy(i, j),
                u.cell(i, j - 1),
                u.cell(i, j),
                tables.sy(i, j - 1),
                tables.sy(i, j),
                &mut fs[..nv],
            );
            lf_combine(
                tables.fy(i, j),
                tables.fy(i, j + 1),
                u.cell(i, j),
                u.cell(i, j + 1),
                tables.sy(i, j),
                tables.sy(i, j + 1),
                &mut fnn[..nv],
            );
            combine_rhs(
                &fw[..nv],
                &fe[..nv],
                &fs[..nv],
                &fnn[..nv],
                cx,
                cy,
                rhs.cell_mut(i, j),
            );
        }
    }
    Ok(())
}

/// One side of an interface during border assembly: the state plus its
/// directional flux and wave speed.
struct SideEval {
    w: [f64; MAX_VARS],
    f: [f64; MAX_VARS],
    s: f64,
}

fn eval_side(
    sys: &dyn System,
    w: &[f64],
    axis: Axis,
    i: usize,
    j: usize,
) -> Result<SideEval, CellError> {
    let nv = w.len();
    let mut e = SideEval {
        w: [0.0; MAX_VARS],
        f: [0.0; MAX_VARS],
        s: 0.0,
    };
    e.w[..nv].copy_from_slice(w);
    sys.flux(w, axis, &mut e.f[..nv]).map_err(CellError::at(i, j))?;
    e.s = sys.max_abs_eigenvalue(w, axis).map_err(CellError::at(i, j))?;
    Ok(e)
}

/// Fills the residuals of the one-cell border ring. Neighbour states that
/// fall outside the block are taken from the overlap buffers: `ovlp_w` and
/// `ovlp_e` are one-column grids holding the adjacent column of the west and
/// east neighbours, `ovlp_s` and `ovlp_n` one-row grids from the south and
/// north neighbours.
#[allow(clippy::too_many_arguments)]
pub fn border_residuals(
    sys: &dyn System,
    u: &impl Cells,
    ovlp_e: &impl Cells,
    ovlp_n: &impl Cells,
    ovlp_w: &impl Cells,
    ovlp_s: &impl Cells,
    rhs: &mut impl CellsMut,
    dx: f64,
    dy: f64,
) -> Result<(), CellError> {
    let (nx, ny, nv) = (u.nx(), u.ny(), u.n_vars());
    debug_assert!(nv <= MAX_VARS);
    debug_assert!(ovlp_w.ny() == ny && ovlp_e.ny() == ny && ovlp_w.nx() == 1);
    debug_assert!(ovlp_s.nx() == nx && ovlp_n.nx() == nx && ovlp_s.ny() == 1);
    let cx = 1.0 / dx;
    let cy = 1.0 / dy;
    let mut fw = [0.0; MAX_VARS];
    let mut fe = [0.0; MAX_VARS];
    let mut fs = [0.0; MAX_VARS];
    let mut fnn = [0.0; MAX_VARS];
    for j in 0..ny {
        let ring_row = j == 0 || j + 1 == ny;
        for i in 0..nx {
            if !(ring_row || i == 0 || i + 1 == nx) {
                continue;
            }
            let own_x = eval_side(sys, u.cell(i, j), Axis::X, i, j)?;
            let own_y = eval_side(sys, u.cell(i, j), Axis::Y, i, j)?;
            let west = if i > 0 {
                eval_side(sys, u.cell(i - 1, j), Axis::X, i, j)?
            } else {
                eval_side(sys, ovlp_w.cell(0, j), Axis::X, i, j)?
            };
            let east = if i + 1 < nx {
                eval_side(sys, u.cell(i + 1, j), Axis::X, i, j)?
            } else {
                eval_side(sys, ovlp_e.cell(0, j), Axis::X, i, j)?
            };
            let south = if j > 0 {
                eval_side(sys, u.cell(i, j - 1), Axis::Y, i, j)?
            } else {
                eval_side(sys, ovlp_s.cell(i, 0), Axis::Y, i, j)?
            };
            let north = if j + 1 < ny {
                eval_side(sys, u.cell(i, j + 1), Axis::Y, i, j)?
            } else {
                eval_side(sys, ovlp_n.cell(i, 0), Axis::Y, i, j)?
            };
            lf_combine(
                &west.f[..nv],
                &own_x.f[..nv],
                &west.w[..nv],
                u.cell(i, j),
                west.s,
                own_x.s,
                &mut fw[..nv],
            );
            lf_combine(
                &own_x.f[..nv],
                &east.f[..nv],
                u.cell(i, j),
                &east.w[..nv],
                own_x.s,
                east.s,
                &mut fe[..nv],
            );
            lf_combine(
                &south.f[..nv],
                &own_y.f[..nv],
                &south.w[..nv],
                u.cell(i, j),
                south.s,
                own_y.s,
                &mut fs[..nv],
            );
            lf_combine(
                &own_y.f[..nv],
                &north.f[..nv],
                u.cell(i, j),
                &north.w[..nv],
                own_y.s,
                north.s,
                &mut fnn[..nv],
            );
            combine_rhs(
                &fw[..nv],
                &fe[..nv],
                &fs[..nv],
                &fnn[..nv],
                cx,
                cy,
                rhs.cell_mut(i, j),
            );
        }
    }
    Ok(())
}

/// Validates the time step against the per-cell CFL bound
/// `dt * max(sx, sy) <= min(dx, dy)` and rejects non-finite states.
pub fn check_time_step(
    sys: &dyn System,
    u: &impl Cells,
    dt: f64,
    dx: f64,
    dy: f64,
) -> Result<(), CellError> {
    let h_min = dx.min(dy);
    for j in 0..u.ny() {
        for i in 0..u.nx() {
            let w = u.cell(i, j);
            for &q in w {
                if !q.is_finite() {
                    return Err(CellError {
                        i,
                        j,
                        source: NonPhysical::new(format!("non-finite state component {q}")),
                    });
                }
            }
            let sx = sys
                .max_abs_eigenvalue(w, Axis::X)
                .map_err(CellError::at(i, j))?;
            let sy = sys
                .max_abs_eigenvalue(w, Axis::Y)
                .map_err(CellError::at(i, j))?;
            let s = sx.max(sy);
            if dt * s > h_min {
                return Err(CellError {
                    i,
                    j,
                    source: NonPhysical::new(format!(
                        "time step {dt} violates the CFL bound: wave speed {s} allows at most {}",
                        h_min / s
                    )),
                });
            }
        }
    }
    Ok(())
}

/// Advances every cell by `dt` times its residual.
pub fn apply_update(u: &mut impl CellsMut, rhs: &impl Cells, dt: f64) {
    for j in 0..rhs.ny() {
        for i in 0..rhs.nx() {
            update_cell(u.cell_mut(i, j), rhs.cell(i, j), dt);
        }
    }
}

/// Applies one explicit source step to every cell. `gx0`/`gy0` give the
/// global index of the block's first cell so that cell centers match the
/// unpartitioned grid bit for bit.
pub fn source_step(
    sys: &dyn System,
    u: &mut impl CellsMut,
    dt: f64,
    gx0: usize,
    gy0: usize,
    domain: &Domain,
) -> Result<(), CellError> {
    let nv = u.n_vars();
    debug_assert!(nv <= MAX_VARS);
    let mut src = [0.0; MAX_VARS];
    for j in 0..u.ny() {
        for i in 0..u.nx() {
            let (x, y) = domain.cell_center(gx0 + i, gy0 + j);
            sys.source(u.cell(i, j), x, y, &mut src[..nv])
                .map_err(CellError::at(i, j))?;
            update_cell(u.cell_mut(i, j), &src[..nv], dt);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use crate::systems::Euler;

    fn euler_field<F: Fn(usize, usize) -> [f64; 4]>(nx: usize, ny: usize, f: F) -> Field {
        let mut u = Field::zeros(nx, ny, 4);
        for j in 0..ny {
            for i in 0..nx {
                u.cell_mut(i, j).copy_from_slice(&f(i, j));
            }
        }
        u
    }

    /// A smooth strictly positive test state that varies from cell to cell.
    fn wavy(i: usize, j: usize) -> [f64; 4] {
        let a = 0.1 * (i as f64) + 0.07 * (j as f64);
        [1.0 + 0.3 * a.sin(), 0.2 * a.cos(), -0.1 * a.sin(), 2.0 + 0.5 * a.cos()]
    }

    #[test]
    fn constant_states_produce_exactly_zero_residuals() {
        let sys = Euler::cosine();
        let w = sys.conserved(1.3, 0.4, -0.2, 0.9);
        let u = euler_field(6, 5, |_, _| w);
        let mut rhs = Field::zeros(6, 5, 4);
        internal_residuals(&sys, &u, &mut rhs, 1.0 / 6.0, 0.2).unwrap();
        let col = euler_field(1, 5, |_, _| w);
        let row = euler_field(6, 1, |_, _| w);
        border_residuals(&sys, &u, &col, &row, &col, &row, &mut rhs, 1.0 / 6.0, 0.2).unwrap();
        assert!(rhs.data().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn two_cell_periodic_residuals_cancel_bitwise() {
        // With two cells on a periodic axis, both interfaces carry the same
        // flux, so the residuals are exact negatives of each other.
        let sys = Euler::cosine();
        let u = euler_field(2, 1, |i, _| {
            if i == 0 {
                sys.conserved(1.0, 0.3, 0.0, 0.8)
            } else {
                sys.conserved(1.4, -0.2, 0.1, 1.1)
            }
        });
        let mut rhs = Field::zeros(2, 1, 4);
        // Columns wrap onto each other; rows see themselves.
        let ovlp_w = euler_field(1, 1, |_, _| {
            let mut w = [0.0; 4];
            w.copy_from_slice(u.cell(1, 0));
            w
        });
        let ovlp_e = euler_field(1, 1, |_, _| {
            let mut w = [0.0; 4];
            w.copy_from_slice(u.cell(0, 0));
            w
        });
        let self_row = u.clone();
        border_residuals(
            &sys, &u, &ovlp_e, &self_row, &ovlp_w, &self_row, &mut rhs, 0.5, 1.0,
        )
        .unwrap();
        for v in 0..4 {
            assert_eq!(rhs.cell(0, 0)[v], -rhs.cell(1, 0)[v]);
        }
    }

    #[test]
    fn split_and_unsplit_assembly_agree_bitwise() {
        // Residuals of an 8x8 grid computed as one block with wrap-around
        // overlaps must equal the assembly from four 4x4 blocks exchanging
        // overlap columns and rows.
        let sys = Euler::cosine();
        let n = 8;
        let u = euler_field(n, n, wavy);
        let dx = 1.0 / n as f64;
        let dy = dx;

        let whole = residuals_of_block(&sys, &u, (0, 0), (n, n), n, dx, dy);

        for (bx, by) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
            let local = euler_field(4, 4, |i, j| wavy(bx * 4 + i, by * 4 + j));
            let part = residuals_of_block(&sys, &local, (bx * 4, by * 4), (4, 4), n, dx, dy);
            for j in 0..4 {
                for i in 0..4 {
                    let got = part.cell(i, j);
                    let want = whole.cell(bx * 4 + i, by * 4 + j);
                    assert_eq!(got, want, "cell ({}, {}) of block ({bx}, {by})", i, j);
                }
            }
        }
    }

    /// Internal plus border residuals of one block cut out of a periodic
    /// `n` x `n` field described by `wavy`, with overlaps built from the
    /// periodic neighbours.
    fn residuals_of_block(
        sys: &Euler,
        local: &Field,
        origin: (usize, usize),
        dims: (usize, usize),
        n: usize,
        dx: f64,
        dy: f64,
    ) -> Field {
        let (gx0, gy0) = origin;
        let (nxl, nyl) = dims;
        let wrap = |c: isize| -> usize { c.rem_euclid(n as isize) as usize };
        let mut rhs = Field::zeros(nxl, nyl, 4);
        internal_residuals(sys, local, &mut rhs, dx, dy).unwrap();
        let ovlp_w = euler_field(1, nyl, |_, j| wavy(wrap(gx0 as isize - 1), gy0 + j));
        let ovlp_e = euler_field(1, nyl, |_, j| wavy(wrap((gx0 + nxl) as isize), gy0 + j));
        let ovlp_s = euler_field(nxl, 1, |i, _| wavy(gx0 + i, wrap(gy0 as isize - 1)));
        let ovlp_n = euler_field(nxl, 1, |i, _| wavy(gx0 + i, wrap((gy0 + nyl) as isize)));
        border_residuals(
            sys, local, &ovlp_e, &ovlp_n, &ovlp_w, &ovlp_s, &mut rhs, dx, dy,
        )
        .unwrap();
        rhs
    }

    #[test]
    fn residuals_conserve_the_total_state() {
        let sys = Euler::cosine();
        let n = 16;
        let u = euler_field(n, n, wavy);
        let rhs = residuals_of_block(&sys, &u, (0, 0), (n, n), n, 1.0 / n as f64, 1.0 / n as f64);
        let mut totals = [0.0f64; 4];
        for j in 0..n {
            for i in 0..n {
                for (t, r) in totals.iter_mut().zip(rhs.cell(i, j)) {
                    *t += r;
                }
            }
        }
        let scale: f64 = rhs.data().iter().map(|r| r.abs()).sum();
        for t in totals {
            assert!(t.abs() <= 1e-13 * scale, "totals = {totals:?}");
        }
    }

    #[test]
    fn cfl_check_passes_at_equality_and_fails_beyond() {
        let sys = Euler::cosine();
        let n = 1024;
        let domain = Domain::unit(n, n);
        let mut u = Field::zeros(n, n, 4);
        for j in 0..n {
            for i in 0..n {
                let (x, y) = domain.cell_center(i, j);
                sys.initial(x, y, u.cell_mut(i, j));
            }
        }
        // The fastest signal is |u| + c = 2 exactly, so dt = 1/2048 sits
        // exactly on the bound for h = 1/1024.
        assert!(check_time_step(&sys, &u, 1.0 / 2048.0, domain.dx, domain.dy).is_ok());
        let err = check_time_step(&sys, &u, 1.125 / 2048.0, domain.dx, domain.dy).unwrap_err();
        assert!(err.to_string().contains("CFL"), "{err}");
    }

    #[test]
    fn update_applies_dt_times_rhs() {
        let mut u = euler_field(2, 2, |_, _| [1.0, 2.0, 3.0, 4.0]);
        let rhs = euler_field(2, 2, |_, _| [0.5, -1.0, 0.0, 2.0]);
        apply_update(&mut u, &rhs, 0.1);
        assert_eq!(u.cell(1, 1), &[1.05, 1.9, 3.0, 4.2]);
    }

    #[test]
    fn non_finite_states_are_reported_by_the_check() {
        let sys = Euler::cosine();
        let mut u = euler_field(2, 2, |_, _| [1.0, 0.0, 0.0, 2.5]);
        u.cell_mut(1, 0)[3] = f64::NAN;
        let err = check_time_step(&sys, &u, 1e-3, 0.5, 0.5).unwrap_err();
        assert_eq!((err.i, err.j), (1, 0));
        assert!(err.to_string().contains("non-finite"));
    }
}
