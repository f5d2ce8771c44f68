//! Cutoff-radius neighbor search on a cell-linked list, with per-pair kernel
//! values cached so continuity, momentum and transport stages reuse the same
//! interaction data within one advection step.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::SmoothingKernel;
use crate::types::Vect;

/// One interaction partner of particle `i`, with precomputed geometry and
/// kernel values. `e_ij = (r_i - r_j)/|r_i - r_j|` points from j toward i,
/// so the kernel gradient with respect to i is `dwdr * e_ij`.
#[derive(Debug, Clone, Copy)]
pub struct PairEntry<const D: usize> {
    pub j: u32,
    pub r: f64,
    pub e_ij: Vect<D>,
    pub w: f64,
    pub dwdr: f64,
}

/// Per-particle neighbor lists in CSR layout. All stored pairs satisfy
/// `0 < r < cutoff`; within each particle the entries are sorted by index,
/// which makes construction deterministic regardless of thread count.
#[derive(Debug, Clone, Default)]
pub struct NeighborList<const D: usize> {
    offsets: Vec<usize>,
    entries: Vec<PairEntry<D>>,
    cutoff: f64,
}

impl<const D: usize> NeighborList<D> {
    /// Same-set search: all unordered pairs within `cutoff`, stored in both
    /// directions, self-pairs excluded.
    pub fn build(
        positions: &[Vect<D>],
        cutoff: f64,
        kernel: &SmoothingKernel,
    ) -> Result<Self> {
        Self::build_impl(positions, positions, cutoff, kernel, true)
    }

    /// Cross-set search: for each source particle, the target particles
    /// within `cutoff`. Entry direction is `e_ij = (src_i - tgt_j)/r`.
    pub fn build_cross(
        sources: &[Vect<D>],
        targets: &[Vect<D>],
        cutoff: f64,
        kernel: &SmoothingKernel,
    ) -> Result<Self> {
        Self::build_impl(sources, targets, cutoff, kernel, false)
    }

    fn build_impl(
        sources: &[Vect<D>],
        targets: &[Vect<D>],
        cutoff: f64,
        kernel: &SmoothingKernel,
        same_set: bool,
    ) -> Result<Self> {
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(Error::InvalidInput(format!(
                "neighbor cutoff must be positive and finite, got {cutoff}"
            )));
        }
        if sources.is_empty() || targets.is_empty() {
            return Ok(Self {
                offsets: vec![0; sources.len() + 1],
                entries: Vec::new(),
                cutoff,
            });
        }
        let grid = CellGrid::build(targets, cutoff)?;

        let per_particle: Vec<Vec<PairEntry<D>>> = sources
            .par_iter()
            .enumerate()
            .map(|(i, &pos)| {
                let mut list = Vec::new();
                grid.for_candidates(pos, |j| {
                    if same_set && j as usize == i {
                        return;
                    }
                    let r_ij = pos - targets[j as usize];
                    let r = r_ij.norm();
                    if r > 0.0 && r < cutoff {
                        list.push(PairEntry {
                            j,
                            r,
                            e_ij: r_ij / r,
                            w: kernel.value(r),
                            dwdr: kernel.grad(r),
                        });
                    }
                });
                list.sort_unstable_by_key(|p| p.j);
                list
            })
            .collect();

        let mut offsets = Vec::with_capacity(sources.len() + 1);
        offsets.push(0usize);
        let mut total = 0;
        for l in &per_particle {
            total += l.len();
            offsets.push(total);
        }
        let mut entries = Vec::with_capacity(total);
        for l in per_particle {
            entries.extend(l);
        }
        Ok(Self {
            offsets,
            entries,
            cutoff,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Pair entries of particle `i`. Particles appended after construction
    /// (buffer injections within an advection step) have no entries until
    /// the next rebuild.
    pub fn neighbors(&self, i: usize) -> &[PairEntry<D>] {
        if i + 1 >= self.offsets.len() {
            return &[];
        }
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn pair_count(&self) -> usize {
        self.entries.len()
    }
}

/// Dense cell grid over the bounding box of the indexed points.
/// Cell size equals the cutoff, so candidate search visits 3^D cells.
struct CellGrid<const D: usize> {
    origin: Vect<D>,
    cell: f64,
    dims: [usize; D],
    cells: Vec<Vec<u32>>,
}

impl<const D: usize> CellGrid<D> {
    fn build(points: &[Vect<D>], cell: f64) -> Result<Self> {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for d in 0..D {
                if !p[d].is_finite() {
                    return Err(Error::InvalidInput(
                        "non-finite position in neighbor search".into(),
                    ));
                }
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let mut dims = [1usize; D];
        for d in 0..D {
            dims[d] = (((hi[d] - lo[d]) / cell).floor() as usize + 1).max(1);
        }
        let n_cells: usize = dims.iter().product();
        if n_cells > 200_000_000 {
            return Err(Error::InvalidInput(format!(
                "cell grid too large ({n_cells} cells); check cutoff {cell}"
            )));
        }
        let mut cells = vec![Vec::new(); n_cells];
        for (idx, p) in points.iter().enumerate() {
            let c = Self::cell_index(lo, cell, dims, *p);
            cells[c].push(idx as u32);
        }
        Ok(Self {
            origin: lo,
            cell,
            dims,
            cells,
        })
    }

    fn cell_coord(origin: Vect<D>, cell: f64, dims: [usize; D], p: Vect<D>) -> [usize; D] {
        let mut c = [0usize; D];
        for d in 0..D {
            let x = ((p[d] - origin[d]) / cell).floor();
            c[d] = (x.max(0.0) as usize).min(dims[d] - 1);
        }
        c
    }

    fn cell_index(origin: Vect<D>, cell: f64, dims: [usize; D], p: Vect<D>) -> usize {
        let c = Self::cell_coord(origin, cell, dims, p);
        let mut idx = 0;
        for d in (0..D).rev() {
            idx = idx * dims[d] + c[d];
        }
        idx
    }

    /// Visits every point index in the 3^D cell block around `p`.
    fn for_candidates(&self, p: Vect<D>, mut f: impl FnMut(u32)) {
        let c = Self::cell_coord(self.origin, self.cell, self.dims, p);
        // Query points may lie outside the indexed bounding box by more than
        // one cell; clamp-to-edge keeps the scan correct because out-of-range
        // candidates fail the distance test anyway, but skip hopeless queries.
        for d in 0..D {
            let x = (p[d] - self.origin[d]) / self.cell;
            if x < -1.0 || x > (self.dims[d] as f64 + 1.0) {
                return;
            }
        }
        let mut offsets = [[0usize; 3]; D];
        let mut counts = [0usize; D];
        for d in 0..D {
            let mut n = 0;
            for s in -1i64..=1 {
                let v = c[d] as i64 + s;
                if v >= 0 && (v as usize) < self.dims[d] {
                    offsets[d][n] = v as usize;
                    n += 1;
                }
            }
            counts[d] = n;
        }
        let mut cursor = [0usize; D];
        loop {
            let mut idx = 0;
            for d in (0..D).rev() {
                idx = idx * self.dims[d] + offsets[d][cursor[d]];
            }
            for &j in &self.cells[idx] {
                f(j);
            }
            // odometer over the visited block
            let mut d = 0;
            loop {
                cursor[d] += 1;
                if cursor[d] < counts[d] {
                    break;
                }
                cursor[d] = 0;
                d += 1;
                if d == D {
                    return;
                }
            }
        }
    }
}
