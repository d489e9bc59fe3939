//! Sounding-signal hopping plans and the per-edge observations they
//! generate.
//!
//! Each hexagonal cell owns one Latin square; users of the cell are mapped
//! to distinct symbols of that square, and in slot `s` a user transmits on
//! the subcarrier whose square entry at column `s mod N` equals its symbol.
//! Users of the same cell therefore never collide, while users of cells
//! with different squares collide exactly once every `N` slots.

use crate::error::{Error, Result};
use crate::geometry::{HexGrid, Point};
use crate::linalg::CMat;
use crate::propagation::{ChannelModel, LargeScale};
use crate::rng::{complex_gaussian, Stream};
use crate::srs::latin::{is_prime, mod_inverse};

/// Sounding resources of one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrsAssignment {
    /// Hexagonal cell the user sits in.
    pub cell: usize,
    /// Latin-square index, `1..=n-1`.
    pub square: usize,
    /// Symbol (row value) within the square, `1..=n`.
    pub symbol: usize,
}

/// Hopping assignment for every user over `n_slots` sounding slots.
#[derive(Debug, Clone)]
pub struct HoppingPlan {
    /// Prime order of the Latin-square family (also the subcarrier count).
    pub n: usize,
    pub n_slots: usize,
    /// Per-user assignment; `None` for silent or overflow users.
    pub assignment: Vec<Option<SrsAssignment>>,
}

/// Subcarrier (1-indexed) used in `slot` by a user holding `symbol` of
/// square `square`: the row `f` of the square with `A(f, slot mod n) =
/// symbol`.
pub fn subcarrier(symbol: usize, square: usize, slot: usize, n: usize) -> usize {
    let s = slot % n;
    let diff = (symbol - 1 + n - s) % n;
    mod_inverse(square, n) * diff % n + 1
}

impl HoppingPlan {
    pub fn subcarrier_of(&self, k: usize, slot: usize) -> Option<usize> {
        self.assignment[k]
            .as_ref()
            .map(|a| subcarrier(a.symbol, a.square, slot, self.n))
    }

    /// Assigned users other than `k` sharing `k`'s subcarrier in `slot`,
    /// ascending.
    pub fn colliders(&self, k: usize, slot: usize) -> Vec<usize> {
        let Some(f) = self.subcarrier_of(k, slot) else {
            return Vec::new();
        };
        (0..self.assignment.len())
            .filter(|&i| i != k && self.subcarrier_of(i, slot) == Some(f))
            .collect()
    }

    /// Number of slots in which users `k1` and `k2` share a subcarrier.
    pub fn collision_count(&self, k1: usize, k2: usize) -> usize {
        (0..self.n_slots)
            .filter(|&s| {
                let a = self.subcarrier_of(k1, s);
                a.is_some() && a == self.subcarrier_of(k2, s)
            })
            .count()
    }
}

/// Assign hopping resources cell by cell.
///
/// Active users are visited in ascending id order; each gets the square of
/// its cell and the next unused symbol there. A cell holding more than `n`
/// active users leaves the overflow unassigned (they keep their
/// demodulation pilots and simply get no sounding-based estimate).
pub fn assign_hopping(
    grid: &HexGrid,
    ue_positions: &[Point],
    active: &[bool],
    n: usize,
    n_slots: usize,
) -> Result<HoppingPlan> {
    if !is_prime(n) {
        return Err(Error::UnsupportedOrder(n));
    }
    if grid.n_squares > n - 1 {
        return Err(Error::InvalidConfig(format!(
            "grid uses {} squares but order {n} provides only {}",
            grid.n_squares,
            n - 1
        )));
    }
    if n_slots == 0 {
        return Err(Error::InvalidConfig("need at least one sounding slot".into()));
    }
    let mut used_symbols = vec![0usize; grid.n_cells()];
    let assignment = ue_positions
        .iter()
        .zip(active)
        .map(|(pos, &is_active)| {
            if !is_active {
                return None;
            }
            let cell = grid.cell_of_point(*pos);
            if used_symbols[cell] >= n {
                return None; // cell exhausted its symbols
            }
            used_symbols[cell] += 1;
            Some(SrsAssignment {
                cell,
                square: grid.square_of_cell(cell),
                symbol: used_symbols[cell],
            })
        })
        .collect();
    Ok(HoppingPlan {
        n,
        n_slots,
        assignment,
    })
}

/// Sounding observation of edge `(l, k)`: an `M x n_slots` block whose
/// column `s` is the user's channel plus the channels of that slot's
/// colliders plus noise of per-entry variance `1/snr`.
///
/// Channels fade independently across slots; all draws come from the
/// per-edge stream in slot order (user first, colliders ascending, then
/// noise), so the block depends only on the stream, not on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_srs(
    model: &ChannelModel,
    ls: &LargeScale,
    supports: &[Vec<usize>],
    plan: &HoppingPlan,
    l: usize,
    k: usize,
    snr: f64,
    rng: &mut Stream,
) -> Result<CMat> {
    if plan.assignment[k].is_none() {
        return Err(Error::Contract(format!(
            "user {k} has no sounding assignment"
        )));
    }
    let m = model.m();
    let k_n = ls.n_ues;
    let mut y = CMat::zeros(m, plan.n_slots);
    for s in 0..plan.n_slots {
        let mut col = model.sample(ls.beta[(l, k)], &supports[l * k_n + k], rng);
        for i in plan.colliders(k, s) {
            col += model.sample(ls.beta[(l, i)], &supports[l * k_n + i], rng);
        }
        for r in 0..m {
            col[r] += complex_gaussian(rng, 1.0 / snr);
        }
        y.set_column(s, &col);
    }
    Ok(y)
}
