//! Greedy user-centric clustering and pilot assignment.
//!
//! Users are admitted in order of decreasing best-link gain. Each user
//! collects the radio units whose large-scale gain clears an SNR-relative
//! threshold, takes the strongest one with spare pilot capacity as its
//! cluster leader, and picks the pilot that minimizes the co-pilot gain its
//! candidate RUs would see. Further candidates join the cluster while they
//! have capacity and the pilot is locally unused. Users that find no leader
//! are in outage and stay silent for the rest of the simulation.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Clustering and pilot assignment for one layout.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub n_rus: usize,
    pub n_ues: usize,
    pub tau_p: usize,
    /// Pilot index per user; `None` marks outage.
    pub pilot: Vec<Option<usize>>,
    /// Serving RUs per user in acceptance order (leader first).
    pub clusters: Vec<Vec<usize>>,
    /// Users served per RU in acceptance order.
    pub served: Vec<Vec<usize>>,
}

impl Clustering {
    /// Users that were assigned a pilot and transmit.
    pub fn active_ues(&self) -> Vec<usize> {
        (0..self.n_ues).filter(|&k| self.pilot[k].is_some()).collect()
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.pilot[k].is_some()
    }

    /// Fraction of users left without a serving cluster.
    pub fn outage_fraction(&self) -> f64 {
        let outages = self.pilot.iter().filter(|p| p.is_none()).count();
        outages as f64 / self.n_ues as f64
    }

    /// Active users sharing pilot `t` (ascending ids).
    pub fn co_pilot_ues(&self, t: usize) -> Vec<usize> {
        (0..self.n_ues).filter(|&k| self.pilot[k] == Some(t)).collect()
    }
}

/// Run the greedy association on large-scale gains `beta` (`L x K`).
///
/// An RU is a candidate for a user when `beta >= eta / (M snr)`. `tau_p`
/// bounds the users an RU can serve (one per pilot) and `q_max` bounds the
/// cluster size of a user.
pub fn form_clusters(
    beta: &DMatrix<f64>,
    m_antennas: usize,
    snr: f64,
    eta: f64,
    tau_p: usize,
    q_max: usize,
) -> Result<Clustering> {
    let (l_n, k_n) = beta.shape();
    if l_n == 0 || k_n == 0 {
        return Err(Error::InvalidConfig("empty gain matrix".into()));
    }
    if tau_p == 0 || q_max == 0 {
        return Err(Error::InvalidConfig(format!(
            "tau_p and q_max must be at least 1, got tau_p={tau_p}, q_max={q_max}"
        )));
    }
    if !(snr > 0.0) || !(eta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "snr and eta must be positive, got snr={snr}, eta={eta}"
        )));
    }
    let threshold = eta / (m_antennas as f64 * snr);

    // Admission order: decreasing best-link gain, user id breaking ties.
    let mut order: Vec<usize> = (0..k_n).collect();
    let best_gain = |k: usize| (0..l_n).map(|l| beta[(l, k)]).fold(f64::MIN, f64::max);
    order.sort_by(|&a, &b| {
        best_gain(b)
            .partial_cmp(&best_gain(a))
            .expect("finite gains")
            .then(a.cmp(&b))
    });

    let mut pilot: Vec<Option<usize>> = vec![None; k_n];
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k_n];
    let mut served: Vec<Vec<usize>> = vec![Vec::new(); l_n];
    let mut pilot_used = vec![vec![false; tau_p]; l_n];
    // co_pilot_gain[t][l] accumulates beta over users already holding pilot t.
    let mut co_pilot_gain = vec![vec![0.0f64; l_n]; tau_p];

    for &k in &order {
        let mut candidates: Vec<usize> =
            (0..l_n).filter(|&l| beta[(l, k)] >= threshold).collect();
        candidates.sort_by(|&a, &b| {
            beta[(b, k)]
                .partial_cmp(&beta[(a, k)])
                .expect("finite gains")
                .then(a.cmp(&b))
        });

        let leader = candidates
            .iter()
            .copied()
            .find(|&l| served[l].len() < tau_p);
        let Some(leader) = leader else {
            continue; // outage: no candidate has pilot capacity
        };

        // Among pilots free at the leader, pick the one whose existing
        // holders leak the least total gain into this user's candidates.
        let t = (0..tau_p)
            .filter(|&t| !pilot_used[leader][t])
            .min_by(|&a, &b| {
                let score =
                    |t: usize| candidates.iter().map(|&l| co_pilot_gain[t][l]).sum::<f64>();
                score(a)
                    .partial_cmp(&score(b))
                    .expect("finite gains")
                    .then(a.cmp(&b))
            })
            .expect("leader has spare capacity, so a free pilot exists");

        pilot[k] = Some(t);
        for &l in &candidates {
            if clusters[k].len() >= q_max {
                break;
            }
            if served[l].len() < tau_p && !pilot_used[l][t] {
                pilot_used[l][t] = true;
                served[l].push(k);
                clusters[k].push(l);
            }
        }
        debug_assert_eq!(clusters[k][0], leader);
        for l in 0..l_n {
            co_pilot_gain[t][l] += beta[(l, k)];
        }
    }

    Ok(Clustering {
        n_rus: l_n,
        n_ues: k_n,
        tau_p,
        pilot,
        clusters,
        served,
    })
}
