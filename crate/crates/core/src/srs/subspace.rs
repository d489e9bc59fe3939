//! Angular-subspace estimation from sounding observations.
//!
//! The robust split isolates the hopping user's low-rank component; its
//! dominant left singular vectors estimate the user's angular subspace at
//! that radio unit. The estimate can optionally be snapped onto the DFT
//! grid by keeping the DFT columns that capture the most subspace energy.

use crate::error::Result;
use crate::linalg::CMat;
use crate::propagation::ChannelModel;
use crate::srs::rpca::{select_rank, tune_lambda, RpcaOptions, RpcaResult};

/// Orthonormal basis (`M x rank`) of one edge's estimated subspace.
#[derive(Debug, Clone)]
pub struct EdgeSubspace {
    pub basis: CMat,
    pub rank: usize,
}

/// Estimate the subspace of an observation block: tune the robust split,
/// then keep the gap-rank dominant left singular vectors of the low-rank
/// part.
pub fn estimate_subspace(
    y: &CMat,
    r_expected: usize,
    opts: &RpcaOptions,
) -> Result<EdgeSubspace> {
    let (_, result) = tune_lambda(y, r_expected, opts)?;
    subspace_of_split(&result)
}

/// Gap-rank dominant left singular vectors of an already computed robust
/// split's low-rank part.
pub fn subspace_of_split(result: &RpcaResult) -> Result<EdgeSubspace> {
    let svd = result.low_rank.clone().svd(true, false);
    let svals: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = select_rank(&svals)?;
    let basis = svd
        .u
        .as_ref()
        .expect("svd with u")
        .columns(0, rank)
        .clone_owned();
    Ok(EdgeSubspace { basis, rank })
}

/// DFT columns best aligned with an estimated subspace.
///
/// Scores every DFT column by its projection energy onto the basis and
/// keeps the `rank` highest (lowest index on ties), ascending.
pub fn project_to_dft(model: &ChannelModel, subspace: &EdgeSubspace) -> Vec<usize> {
    let m = model.m();
    let full = model.basis(&(0..m).collect::<Vec<_>>());
    let scores = subspace.basis.adjoint() * full; // rank x M
    let mut order: Vec<usize> = (0..m).collect();
    let energy = |bin: usize| scores.column(bin).norm_squared();
    order.sort_by(|&a, &b| {
        energy(b)
            .partial_cmp(&energy(a))
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut support: Vec<usize> = order[..subspace.rank].to_vec();
    support.sort_unstable();
    support
}

/// Fraction of an estimated subspace that lies inside the true angular
/// span: `||F_S^H B||_F^2 / rank`, in `[0, 1]`.
pub fn power_efficiency(model: &ChannelModel, true_support: &[usize], basis: &CMat) -> f64 {
    let f_s = model.basis(true_support);
    let overlap = f_s.adjoint() * basis;
    overlap.norm_squared() / basis.ncols() as f64
}
