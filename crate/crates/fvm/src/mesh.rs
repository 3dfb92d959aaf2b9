//! Uniform Cartesian mesh on the periodic unit square and its block
//! decomposition into rectangular subdomains.

use crate::error::FvmError;

/// Uniform `nx` x `ny` mesh covering the unit square with periodic wrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Domain {
    /// Unit square with square-count resolution `nx` x `ny`.
    pub fn unit(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            dx: 1.0 / nx as f64,
            dy: 1.0 / ny as f64,
        }
    }

    /// Center of the cell with global indices (`gx`, `gy`).
    ///
    /// Written as `(index + 0.5) * h` so that every caller that knows the
    /// global index reproduces the same coordinate bits.
    #[inline]
    pub fn cell_center(&self, gx: usize, gy: usize) -> (f64, f64) {
        ((gx as f64 + 0.5) * self.dx, (gy as f64 + 0.5) * self.dy)
    }
}

/// Sides of a subdomain, used to address its periodic neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    West,
    East,
    South,
    North,
}

/// One rectangular block of the decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Subdomain {
    /// Linear index, `px + py * npx`.
    pub index: usize,
    pub px: usize,
    pub py: usize,
    /// Global index of the first owned cell along x.
    pub gx0: usize,
    pub gy0: usize,
    /// Owned cells along x.
    pub nxl: usize,
    /// Owned cells along y.
    pub nyl: usize,
}

/// Decomposition of a [`Domain`] into `npx` x `npy` equal blocks.
#[derive(Clone, Copy, Debug)]
pub struct Partition {
    pub domain: Domain,
    pub npx: usize,
    pub npy: usize,
    nxl: usize,
    nyl: usize,
}

impl Partition {
    pub fn new(domain: Domain, npx: usize, npy: usize) -> Result<Self, FvmError> {
        if npx == 0 || !domain.nx.is_multiple_of(npx) {
            return Err(FvmError::NotDivisible {
                axis: 'x',
                cells: domain.nx,
                parts: npx,
            });
        }
        if npy == 0 || !domain.ny.is_multiple_of(npy) {
            return Err(FvmError::NotDivisible {
                axis: 'y',
                cells: domain.ny,
                parts: npy,
            });
        }
        Ok(Self {
            domain,
            npx,
            npy,
            nxl: domain.nx / npx,
            nyl: domain.ny / npy,
        })
    }

    pub fn n_subdomains(&self) -> usize {
        self.npx * self.npy
    }

    pub fn subdomain(&self, index: usize) -> Subdomain {
        assert!(index < self.n_subdomains());
        let px = index % self.npx;
        let py = index / self.npx;
        Subdomain {
            index,
            px,
            py,
            gx0: px * self.nxl,
            gy0: py * self.nyl,
            nxl: self.nxl,
            nyl: self.nyl,
        }
    }

    /// Index of the periodic neighbour of subdomain `index` on `side`.
    pub fn neighbor(&self, index: usize, side: Side) -> usize {
        let s = self.subdomain(index);
        let (px, py) = match side {
            Side::West => ((s.px + self.npx - 1) % self.npx, s.py),
            Side::East => ((s.px + 1) % self.npx, s.py),
            Side::South => (s.px, (s.py + self.npy - 1) % self.npy),
            Side::North => (s.px, (s.py + 1) % self.npy),
        };
        px + py * self.npx
    }

    pub fn subdomains(&self) -> impl Iterator<Item = Subdomain> + '_ {
        (0..self.n_subdomains()).map(|p| self.subdomain(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_uneven_splits() {
        let d = Domain::unit(10, 8);
        assert!(matches!(
            Partition::new(d, 3, 2),
            Err(FvmError::NotDivisible {
                axis: 'x',
                cells: 10,
                parts: 3
            })
        ));
        assert!(matches!(
            Partition::new(d, 2, 0),
            Err(FvmError::NotDivisible { axis: 'y', .. })
        ));
    }

    #[test]
    fn subdomains_tile_the_grid_exactly_once() {
        let p = Partition::new(Domain::unit(8, 8), 4, 2).unwrap();
        let mut seen = vec![0u32; 64];
        for s in p.subdomains() {
            for j in 0..s.nyl {
                for i in 0..s.nxl {
                    seen[(s.gx0 + i) + (s.gy0 + j) * 8] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn cell_centers_are_midpoints() {
        let d = Domain::unit(4, 2);
        assert_eq!(d.cell_center(0, 0), (0.125, 0.25));
        assert_eq!(d.cell_center(3, 1), (0.875, 0.75));
    }

    proptest! {
        // Walking to a neighbour and back is the identity, and opposite
        // borders see each other under periodic wrap.
        #[test]
        fn neighbor_walks_are_involutions(npx in 1usize..6, npy in 1usize..6, seed in 0usize..36) {
            let d = Domain::unit(npx * 2, npy * 3);
            let p = Partition::new(d, npx, npy).unwrap();
            let idx = seed % p.n_subdomains();
            prop_assert_eq!(p.neighbor(p.neighbor(idx, Side::West), Side::East), idx);
            prop_assert_eq!(p.neighbor(p.neighbor(idx, Side::North), Side::South), idx);
            let s = p.subdomain(idx);
            prop_assert_eq!(p.subdomain(p.neighbor(idx, Side::East)).px, (s.px + 1) % npx);
        }
    }
}
