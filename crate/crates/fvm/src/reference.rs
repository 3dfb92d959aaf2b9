//! Dense single-array reference integrator.
//!
//! Runs the identical numerical scheme as the task solver, over one
//! unpartitioned field, using the same cell primitives: interior residuals
//! from flux tables, border residuals against periodic wrap columns and
//! rows. Its states are the bitwise ground truth any task run must match.

use crate::error::FvmError;
use crate::grid::{Cells, CellsMut, Field};
use crate::mesh::Domain;
use crate::numerics;
use crate::systems::System;

/// Evaluates the initial condition at every cell center.
pub fn initial_field(sys: &dyn System, domain: &Domain) -> Field {
    let mut u = Field::zeros(domain.nx, domain.ny, sys.n_vars());
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let (x, y) = domain.cell_center(i, j);
            sys.initial(x, y, u.cell_mut(i, j));
        }
    }
    u
}

/// Integrates `steps` explicit steps of size `dt` and returns the final
/// field along with the reached time.
pub fn integrate(
    sys: &dyn System,
    domain: &Domain,
    dt: f64,
    steps: u64,
) -> Result<(Field, f64), FvmError> {
    let mut u = initial_field(sys, domain);
    sys.startup_check(&u, domain, dt)
        .map_err(|e| FvmError::Numerics(e.message))?;

    let (nx, ny, nv) = (domain.nx, domain.ny, sys.n_vars());
    let mut rhs = Field::zeros(nx, ny, nv);
    let mut ovlp_w = Field::zeros(1, ny, nv);
    let mut ovlp_e = Field::zeros(1, ny, nv);
    let mut ovlp_s = Field::zeros(nx, 1, nv);
    let mut ovlp_n = Field::zeros(nx, 1, nv);

    for _ in 0..steps {
        numerics::check_time_step(sys, &u, dt, domain.dx, domain.dy)
            .map_err(|e| FvmError::Numerics(e.to_string()))?;

        // The whole grid is one block whose four overlaps wrap around.
        for j in 0..ny {
            ovlp_w.cell_mut(0, j).copy_from_slice(u.cell(nx - 1, j));
            ovlp_e.cell_mut(0, j).copy_from_slice(u.cell(0, j));
        }
        for i in 0..nx {
            ovlp_s.cell_mut(i, 0).copy_from_slice(u.cell(i, ny - 1));
            ovlp_n.cell_mut(i, 0).copy_from_slice(u.cell(i, 0));
        }

        numerics::internal_residuals(sys, &u, &mut rhs, domain.dx, domain.dy)
            .map_err(|e| FvmError::Numerics(e.to_string()))?;
        numerics::border_residuals(
            sys, &u, &ovlp_e, &ovlp_n, &ovlp_w, &ovlp_s, &mut rhs, domain.dx, domain.dy,
        )
        .map_err(|e| FvmError::Numerics(e.to_string()))?;
        numerics::apply_update(&mut u, &rhs, dt);
        if sys.has_source() {
            numerics::source_step(sys, &mut u, dt, 0, 0, domain)
                .map_err(|e| FvmError::Numerics(e.to_string()))?;
        }
    }
    Ok((u, dt * steps as f64))
}
