//! Demodulation reference signals: pilot transmission and channel
//! estimation at each radio unit.
//!
//! Active users transmit orthogonal pilot sequences (scaled DFT columns) of
//! length `tau_p`. Each RU correlates its received block against a user's
//! sequence to get the pilot-matching estimate, which carries the full
//! co-pilot contamination; projecting it onto the user's angular subspace
//! removes every contaminator whose support does not overlap the user's.

use crate::association::Clustering;
use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, orthonormality_defect, CMat, CVec};
use crate::propagation::{ChannelModel, LargeScale};
use crate::rng::{complex_gaussian, Stream};
use nalgebra::Complex;

/// The `tau_p` pilot sequences, column `t` being `sqrt(tau_p snr) F(:, t)`.
#[derive(Debug, Clone)]
pub struct PilotBook {
    pub tau_p: usize,
    pub snr: f64,
    phi: CMat,
}

impl PilotBook {
    pub fn new(tau_p: usize, snr: f64) -> Result<Self> {
        if tau_p == 0 {
            return Err(Error::InvalidConfig("tau_p must be at least 1".into()));
        }
        if !(snr > 0.0) || !snr.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "pilot snr must be positive and finite, got {snr}"
            )));
        }
        let phi = dft_matrix(tau_p) * Complex::new((tau_p as f64 * snr).sqrt(), 0.0);
        Ok(PilotBook { tau_p, snr, phi })
    }

    /// Pilot sequence `t`, with `||phi_t||^2 = tau_p * snr`.
    pub fn sequence(&self, t: usize) -> CVec {
        self.phi.column(t).clone_owned()
    }
}

/// Received pilot blocks `Y_l = sum_k h_{l,k} phi_{t_k}^H + Z`, one `M x
/// tau_p` block per RU, with unit-variance complex noise.
///
/// Only active users transmit. Noise is drawn per RU in ascending order,
/// column-major within a block.
pub fn synthesize_pilot_field(
    channels: &[CMat],
    clustering: &Clustering,
    book: &PilotBook,
    rng: &mut Stream,
) -> Vec<CMat> {
    let m = channels[0].nrows();
    let one = Complex::new(1.0, 0.0);
    channels
        .iter()
        .map(|h_l| {
            let mut y = CMat::zeros(m, book.tau_p);
            for k in 0..clustering.n_ues {
                if let Some(t) = clustering.pilot[k] {
                    let h = h_l.column(k).clone_owned();
                    let phi = book.sequence(t);
                    y.gerc(one, &h, &phi, one);
                }
            }
            for c in 0..book.tau_p {
                for r in 0..m {
                    y[(r, c)] += complex_gaussian(rng, 1.0);
                }
            }
            y
        })
        .collect()
}

/// Pilot-matching estimate `Y phi_t / (tau_p snr)`: the user's channel plus
/// all co-pilot channels plus noise of per-entry variance `1/(tau_p snr)`.
pub fn pilot_matching(y_l: &CMat, book: &PilotBook, t: usize) -> CVec {
    let scale = Complex::new(1.0 / (book.tau_p as f64 * book.snr), 0.0);
    y_l * book.sequence(t) * scale
}

/// Project an estimate onto the column span of `basis` (`B B^H h`).
///
/// `basis` must have orthonormal columns; a defect above `1e-9` is a
/// contract violation, not a recoverable condition.
pub fn subspace_projection(h: &CVec, basis: &CMat) -> Result<CVec> {
    let defect = orthonormality_defect(basis);
    if defect >= 1e-9 {
        return Err(Error::Contract(format!(
            "projection basis is not orthonormal (defect {defect:.3e})"
        )));
    }
    Ok(basis * (basis.adjoint() * h))
}

/// Covariance of the co-pilot contamination that survives the subspace
/// projection at RU `l` for user `k`:
/// `sum_i (beta_i M / |S_i|) P_k F_i F_i^H P_k` over active co-pilot users
/// `i != k`, with `P_k` the projector onto user `k`'s angular subspace.
pub fn contamination_covariance(
    model: &ChannelModel,
    ls: &LargeScale,
    supports: &[Vec<usize>],
    clustering: &Clustering,
    l: usize,
    k: usize,
) -> CMat {
    let m = model.m();
    let t_k = clustering.pilot[k].expect("contamination is defined for active users");
    let b_k = model.basis(&supports[l * ls.n_ues + k]);
    let p_k = &b_k * b_k.adjoint();
    let mut sigma = CMat::zeros(m, m);
    for i in clustering.co_pilot_ues(t_k) {
        if i == k {
            continue;
        }
        let r_i = model.covariance(ls.beta[(l, i)], &supports[l * ls.n_ues + i]);
        sigma += &p_k * r_i * &p_k;
    }
    sigma
}
