//! Linear uplink receivers.
//!
//! Each serving radio unit applies a local LMMSE vector that treats
//! out-of-cluster interference as extra white noise; the cluster processor
//! then combines the per-RU outputs with weights maximizing a nominal SINR
//! built from the CSI known inside the cluster. A cluster-wise global
//! zero-forcing receiver on the stacked known-CSI matrix is available as an
//! alternative, falling back to LMMSE when the stack loses column rank.

use crate::association::Clustering;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::propagation::LargeScale;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Receiver family applied at the cluster level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    LocalLmmse,
    #[serde(rename = "gzf")]
    GlobalZf,
}

/// Per-RU effective noise variance after folding in the large-scale gain of
/// every active user the RU does not serve.
#[derive(Debug, Clone)]
pub struct NoiseInflation {
    pub sigma2: Vec<f64>,
}

/// `sigma^2_l = 1 + snr * sum beta_{l,j}` over active users `j` not served
/// by RU `l`. Silent (outage) users contribute nothing.
pub fn noise_inflation(ls: &LargeScale, clustering: &Clustering, snr: f64) -> NoiseInflation {
    let sigma2 = (0..ls.n_rus)
        .map(|l| {
            let mut acc = 0.0;
            for k in 0..ls.n_ues {
                if clustering.is_active(k) && !clustering.served[l].contains(&k) {
                    acc += ls.beta[(l, k)];
                }
            }
            1.0 + snr * acc
        })
        .collect();
    NoiseInflation { sigma2 }
}

/// Combined receiver for one user: unit-norm when stacked over the cluster,
/// identically zero on every RU outside it.
#[derive(Debug, Clone)]
pub struct CompositeReceiver {
    /// Serving RUs in cluster order (leader first).
    pub rus: Vec<usize>,
    /// Weighted local vectors per serving RU; the stacked norm is 1.
    pub blocks: Vec<CVec>,
    pub kind: ReceiverKind,
    /// Set when a zero-forcing request lost rank and LMMSE was used instead.
    pub fell_back: bool,
}

impl CompositeReceiver {
    /// `v^H h_j` against the stacked channel of user `j`, using the true
    /// per-RU channel matrices (`M x K` each). Off-cluster blocks are zero,
    /// so only the serving RUs contribute.
    pub fn dot_channel(&self, channels: &[CMat], j: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &l) in self.rus.iter().enumerate() {
            acc += self.blocks[i].dotc(&channels[l].column(j).clone_owned());
        }
        acc
    }

    /// Norm of the stacked receiver.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

fn check_finite(v: &CVec, what: &'static str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Unit-norm local LMMSE vector for user `k` at RU `l`:
/// `(sigma^2_l I + snr * sum_{j in U_l} h_j h_j^H)^{-1} h_k`, normalized.
pub fn local_lmmse(
    estimates: &[CMat],
    clustering: &Clustering,
    snr: f64,
    sigma: &NoiseInflation,
    l: usize,
    k: usize,
) -> Result<CVec> {
    if !clustering.served[l].contains(&k) {
        return Err(Error::Contract(format!("user {k} is not served by RU {l}")));
    }
    let m = estimates[l].nrows();
    let mut a = CMat::identity(m, m) * Complex64::new(sigma.sigma2[l], 0.0);
    for &j in &clustering.served[l] {
        let h = estimates[l].column(j);
        check_finite(&h.clone_owned(), "channel estimate")?;
        // a += snr * h h^H
        a.gerc(Complex64::new(snr, 0.0), &h, &h, Complex64::new(1.0, 0.0));
    }
    let chol = a
        .cholesky()
        .ok_or(Error::NonFinite("lmmse covariance factorization"))?;
    let mut v = estimates[l].column(k).clone_owned();
    chol.solve_mut(&mut v);
    check_finite(&v, "lmmse solution")?;
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::Contract(format!(
            "zero channel estimate for user {k} at RU {l}"
        )));
    }
    Ok(v / Complex64::new(n, 0.0))
}

/// Nominal per-RU SINR of a candidate vector `v` for user `k` at RU `l`,
/// counting only the interference the RU knows about.
pub fn nominal_local_sinr(
    v: &CVec,
    estimates: &[CMat],
    clustering: &Clustering,
    snr: f64,
    sigma: &NoiseInflation,
    l: usize,
    k: usize,
) -> f64 {
    let signal = snr * v.dotc(&estimates[l].column(k).clone_owned()).norm_sqr();
    let mut denom = sigma.sigma2[l] * v.norm_squared();
    for &j in &clustering.served[l] {
        if j != k {
            denom += snr * v.dotc(&estimates[l].column(j).clone_owned()).norm_sqr();
        }
    }
    signal / denom
}

/// Combining weights for user `k` over its cluster, maximizing the nominal
/// SINR of the combined output: `w = C^{-1} g` with `g(l) = v_l^H h_{l,k}`
/// and `C` the known-CSI interference-plus-noise covariance across RUs.
pub fn cluster_weights(
    locals: &[CVec],
    estimates: &[CMat],
    clustering: &Clustering,
    snr: f64,
    sigma: &NoiseInflation,
    k: usize,
) -> Result<CVec> {
    let cluster = &clustering.clusters[k];
    if cluster.is_empty() {
        return Err(Error::Contract(format!("user {k} has an empty cluster")));
    }
    let nc = cluster.len();
    let mut g = CVec::zeros(nc);
    for (i, &l) in cluster.iter().enumerate() {
        g[i] = locals[i].dotc(&estimates[l].column(k).clone_owned());
    }
    // C(l,l') = snr * sum_{j != k} a_l(j) conj(a_l'(j)) + delta * sigma^2_l,
    // with a_l(j) = v_l^H h_{l,j} when RU l serves j and zero otherwise.
    let mut c = CMat::zeros(nc, nc);
    for i in 0..nc {
        c[(i, i)] = Complex64::new(sigma.sigma2[cluster[i]], 0.0);
    }
    for j in 0..clustering.n_ues {
        if j == k || !clustering.is_active(j) {
            continue;
        }
        let mut a = CVec::zeros(nc);
        let mut any = false;
        for (i, &l) in cluster.iter().enumerate() {
            if clustering.served[l].contains(&j) {
                a[i] = locals[i].dotc(&estimates[l].column(j).clone_owned());
                any = true;
            }
        }
        if any {
            c.gerc(Complex64::new(snr, 0.0), &a, &a, Complex64::new(1.0, 0.0));
        }
    }
    let chol = c
        .cholesky()
        .ok_or(Error::NonFinite("combining covariance factorization"))?;
    let mut w = g;
    chol.solve_mut(&mut w);
    check_finite(&w, "combining weights")?;
    Ok(w)
}

fn weighted_composite(
    rus: Vec<usize>,
    locals: Vec<CVec>,
    weights: &CVec,
    kind: ReceiverKind,
    fell_back: bool,
) -> Result<CompositeReceiver> {
    let mut blocks: Vec<CVec> = locals
        .into_iter()
        .zip(weights.iter())
        .map(|(v, &w)| v * w)
        .collect();
    let norm = blocks
        .iter()
        .map(|b| b.norm_squared())
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::NonFinite("composite receiver norm"));
    }
    for b in &mut blocks {
        *b /= Complex64::new(norm, 0.0);
    }
    Ok(CompositeReceiver {
        rus,
        blocks,
        kind,
        fell_back,
    })
}

/// Local-LMMSE receiver with nominal-SINR combining for user `k`.
pub fn lmmse_receiver(
    estimates: &[CMat],
    clustering: &Clustering,
    snr: f64,
    sigma: &NoiseInflation,
    k: usize,
) -> Result<CompositeReceiver> {
    let cluster = clustering.clusters[k].clone();
    if cluster.is_empty() {
        return Err(Error::Contract(format!("user {k} has an empty cluster")));
    }
    let locals: Vec<CVec> = cluster
        .iter()
        .map(|&l| local_lmmse(estimates, clustering, snr, sigma, l, k))
        .collect::<Result<_>>()?;
    let w = cluster_weights(&locals, estimates, clustering, snr, sigma, k)?;
    weighted_composite(cluster, locals, &w, ReceiverKind::LocalLmmse, false)
}

/// Cluster-wise global zero-forcing receiver for user `k`: the `k`-th
/// column of `H (H^H H)^{-1}` on the stacked known-CSI matrix `H` of the
/// cluster, normalized. Falls back to [`lmmse_receiver`] when the stack is
/// rank deficient.
pub fn gzf_receiver(
    estimates: &[CMat],
    clustering: &Clustering,
    snr: f64,
    sigma: &NoiseInflation,
    k: usize,
) -> Result<CompositeReceiver> {
    let cluster = clustering.clusters[k].clone();
    if cluster.is_empty() {
        return Err(Error::Contract(format!("user {k} has an empty cluster")));
    }
    let m = estimates[0].nrows();
    // Users with CSI known somewhere in the cluster, ascending.
    let mut known: Vec<usize> = Vec::new();
    for &l in &cluster {
        for &j in &clustering.served[l] {
            if !known.contains(&j) {
                known.push(j);
            }
        }
    }
    known.sort_unstable();
    let k_pos = known
        .iter()
        .position(|&j| j == k)
        .expect("cluster RUs serve their own user");

    let rows = m * cluster.len();
    let fallback = |fell: bool| -> Result<CompositeReceiver> {
        let mut r = lmmse_receiver(estimates, clustering, snr, sigma, k)?;
        r.kind = ReceiverKind::GlobalZf;
        r.fell_back = fell;
        Ok(r)
    };
    if known.len() > rows {
        return fallback(true);
    }
    let mut stack = CMat::zeros(rows, known.len());
    for (bi, &l) in cluster.iter().enumerate() {
        for (cj, &j) in known.iter().enumerate() {
            if clustering.served[l].contains(&j) {
                let h = estimates[l].column(j).clone_owned();
                check_finite(&h, "channel estimate")?;
                stack.view_mut((bi * m, cj), (m, 1)).copy_from(&h);
            }
        }
    }
    let gram = stack.adjoint() * &stack;
    let Some(chol) = gram.cholesky() else {
        return fallback(true);
    };
    let mut x = CVec::zeros(known.len());
    x[k_pos] = Complex64::new(1.0, 0.0);
    chol.solve_mut(&mut x);
    let v = &stack * x;
    check_finite(&v, "zero-forcing solution")?;
    let norm = v.norm();
    if norm == 0.0 {
        return fallback(true);
    }
    let v = v / Complex64::new(norm, 0.0);
    let blocks: Vec<CVec> = (0..cluster.len())
        .map(|bi| v.rows(bi * m, m).clone_owned())
        .collect();
    Ok(CompositeReceiver {
        rus: cluster,
        blocks,
        kind: ReceiverKind::GlobalZf,
        fell_back: false,
    })
}

/// Build the receiver of the requested kind for user `k`.
pub fn build_receiver(
    kind: ReceiverKind,
    estimates: &[CMat],
    clustering: &Clustering,
    snr: f64,
    sigma: &NoiseInflation,
    k: usize,
) -> Result<CompositeReceiver> {
    match kind {
        ReceiverKind::LocalLmmse => lmmse_receiver(estimates, clustering, snr, sigma, k),
        ReceiverKind::GlobalZf => gzf_receiver(estimates, clustering, snr, sigma, k),
    }
}
