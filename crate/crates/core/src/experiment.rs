//! End-to-end pipeline: one layout from placement to per-user rates, the
//! Monte-Carlo experiment over layouts, and the parameter-sweep driver.
//!
//! Reproducibility contract: every stochastic stage draws from a substream
//! keyed by the master seed, a stage label, and the layout (and, where
//! applicable, realization or edge) index. Layouts and sweep rows are
//! computed independently and reduced in index order, so the parallelism
//! degree never changes a single output byte. Channel realizations depend
//! only on `(seed, layout, realization)` — not on the estimator or receiver
//! under test — which pairs the noise across compared settings.

use crate::association::{form_clusters, Clustering};
use crate::config::{Estimator, SimConfig, SweepPoint, SweepSpec};
use crate::dmrs::{pilot_matching, subspace_projection, synthesize_pilot_field, PilotBook};
use crate::error::{Error, Result};
use crate::evaluation::{
    average_rate, instantaneous_sinr, mean_and_stderr, median, spectral_efficiency,
};
use crate::geometry::{build_hex_grid, place_uniform, Layout, TorusArea};
use crate::linalg::CMat;
use crate::propagation::{
    calibrate_snr, draw_channel_set, edge_supports, generate_large_scale, ChannelModel,
    LargeScale,
};
use crate::receivers::{build_receiver, noise_inflation};
use crate::rng::{derive_seed, pack_index, substream};
use crate::srs::plan::{assign_hopping, synthesize_srs};
use crate::srs::rpca::{rpca_decompose, RpcaOptions};
use crate::srs::subspace::{
    estimate_subspace, power_efficiency, project_to_dft, subspace_of_split, EdgeSubspace,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::time::{Duration, Instant};

/// Rate, spectral efficiency, and outage flag of one user in one layout.
/// `ue_id` is global: `layout_index * K + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub ue_id: usize,
    pub rate_bps_hz: f64,
    pub se_bps_hz: f64,
    pub outage: bool,
}

/// Everything one layout contributes to the experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutOutcome {
    pub layout: usize,
    pub sum_se_bps_hz: f64,
    pub outage_fraction: f64,
    /// Served edges whose sounding-based estimate fell back to plain pilot
    /// matching (no assignment, or a degenerate robust split).
    pub srs_fallback_edges: usize,
    pub users: Vec<UeRecord>,
}

/// Aggregated experiment result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub config_hash: String,
    pub mean_sum_se_bps_hz: f64,
    pub stderr_sum_se_bps_hz: f64,
    pub outage_fraction: f64,
    pub layouts: Vec<LayoutOutcome>,
}

impl RateReport {
    /// All per-user records in layout, then user order.
    pub fn users(&self) -> impl Iterator<Item = &UeRecord> {
        self.layouts.iter().flat_map(|l| l.users.iter())
    }
}

/// Expected angular-subspace rank for the tuner: the number of DFT bins a
/// spread-`delta` window covers, plus one for edge leakage, capped at `M`.
pub fn expected_rank(m: usize, spread: f64) -> usize {
    (((m as f64 * spread / TAU).ceil() as usize) + 1).min(m)
}

fn rpca_options(cfg: &SimConfig) -> RpcaOptions {
    RpcaOptions {
        tol: cfg.srs.tol,
        max_iter: cfg.srs.max_iter,
        ..RpcaOptions::default()
    }
}

/// Estimate the angular subspace of every served edge from its sounding
/// observations. `None` marks a fallback edge: the user got no sounding
/// assignment (its cell ran out of symbols) or the robust split degenerated.
#[allow(clippy::too_many_arguments)]
fn srs_subspaces(
    cfg: &SimConfig,
    layout: &Layout,
    ls: &LargeScale,
    clustering: &Clustering,
    supports: &[Vec<usize>],
    model: &ChannelModel,
    snr: f64,
    layout_idx: usize,
) -> Result<Vec<Option<EdgeSubspace>>> {
    let (l_n, k_n) = (clustering.n_rus, clustering.n_ues);
    let grid = build_hex_grid(layout.area(), cfg.srs.hex_radius_m, 3)?;
    let active: Vec<bool> = (0..k_n).map(|k| clustering.is_active(k)).collect();
    let plan = assign_hopping(&grid, &layout.ue_positions, &active, cfg.srs.n, cfg.srs.s)?;
    let opts = rpca_options(cfg);
    let r_expected = expected_rank(model.m(), cfg.radio.angular_spread_rad);

    let mut subspaces: Vec<Option<EdgeSubspace>> = vec![None; l_n * k_n];
    for l in 0..l_n {
        for &k in &clustering.served[l] {
            if plan.assignment[k].is_none() {
                continue;
            }
            let mut rng = substream(cfg.mc.seed, "srs", pack_index(layout_idx, l * k_n + k));
            let y = synthesize_srs(model, ls, supports, &plan, l, k, snr, &mut rng)?;
            let sub = if cfg.srs.lambda0 > 0.0 {
                rpca_decompose(&y, cfg.srs.lambda0, &opts).and_then(|r| subspace_of_split(&r))
            } else {
                estimate_subspace(&y, r_expected, &opts)
            };
            match sub {
                Ok(sub) => subspaces[l * k_n + k] = Some(sub),
                Err(Error::NoSubspace) => {} // keep pilot matching for this edge
                Err(e) => {
                    return Err(e.in_context(format!("sounding estimate for RU {l}, user {k}")))
                }
            }
        }
    }
    Ok(subspaces)
}

/// Projection basis per served edge under the configured estimator; `None`
/// means the raw pilot-matching estimate is used as-is.
fn edge_projectors(
    cfg: &SimConfig,
    clustering: &Clustering,
    supports: &[Vec<usize>],
    model: &ChannelModel,
    subspaces: Option<Vec<Option<EdgeSubspace>>>,
) -> Vec<Option<CMat>> {
    let (l_n, k_n) = (clustering.n_rus, clustering.n_ues);
    let mut projectors: Vec<Option<CMat>> = vec![None; l_n * k_n];
    match cfg.estimator {
        Estimator::Ideal | Estimator::Pm => {}
        Estimator::SpTrue => {
            for l in 0..l_n {
                for &k in &clustering.served[l] {
                    projectors[l * k_n + k] = Some(model.basis(&supports[l * k_n + k]));
                }
            }
        }
        Estimator::SpRpca | Estimator::SpRpcaProjected => {
            let subspaces = subspaces.expect("sounding stage ran for sounding estimators");
            for (e, sub) in subspaces.into_iter().enumerate() {
                let Some(sub) = sub else { continue };
                projectors[e] = Some(match cfg.estimator {
                    Estimator::SpRpca => sub.basis,
                    _ => model.basis(&project_to_dft(model, &sub)),
                });
            }
        }
    }
    projectors
}

/// Run the full pipeline for one layout index.
pub fn run_layout(cfg: &SimConfig, layout_idx: usize) -> Result<LayoutOutcome> {
    run_layout_inner(cfg, layout_idx).map_err(|e| e.in_context(format!("layout {layout_idx}")))
}

fn run_layout_inner(cfg: &SimConfig, layout_idx: usize) -> Result<LayoutOutcome> {
    let master = cfg.mc.seed;
    let (l_n, m, k_n) = (cfg.geometry.l, cfg.geometry.m, cfg.geometry.k);
    let area = TorusArea::from_area_m2(cfg.geometry.area_km2 * 1e6)?;
    let layout = place_uniform(area, l_n, k_n, derive_seed(master, "layout", layout_idx as u64))?;
    let mut ls_rng = substream(master, "large-scale", layout_idx as u64);
    let ls = generate_large_scale(&layout, &cfg.radio, &mut ls_rng);
    let snr = calibrate_snr(cfg.power, area, l_n, m, &cfg.radio)?;
    let clustering = form_clusters(
        &ls.beta,
        m,
        snr,
        cfg.protocol.eta,
        cfg.protocol.tau_p,
        cfg.protocol.q,
    )?;
    let supports = edge_supports(&layout, m, cfg.radio.angular_spread_rad);
    let model = ChannelModel::new(m);
    let active = clustering.active_ues();

    let needs_srs = matches!(
        cfg.estimator,
        Estimator::SpRpca | Estimator::SpRpcaProjected
    );
    let subspaces = if needs_srs {
        Some(srs_subspaces(
            cfg,
            &layout,
            &ls,
            &clustering,
            &supports,
            &model,
            snr,
            layout_idx,
        )?)
    } else {
        None
    };
    let srs_fallback_edges = if needs_srs {
        let subs = subspaces.as_ref().unwrap();
        clustering
            .served
            .iter()
            .enumerate()
            .flat_map(|(l, users)| users.iter().map(move |&k| l * k_n + k))
            .filter(|&e| subs[e].is_none())
            .count()
    } else {
        0
    };
    let projectors = edge_projectors(cfg, &clustering, &supports, &model, subspaces);

    let book = if cfg.estimator == Estimator::Ideal {
        None
    } else {
        Some(PilotBook::new(cfg.protocol.tau_p, snr)?)
    };
    let sigma = noise_inflation(&ls, &clustering, snr);

    let n_real = cfg.mc.n_realizations;
    let mut sinrs: Vec<Vec<f64>> = vec![Vec::with_capacity(n_real); k_n];
    for r in 0..n_real {
        let mut ch_rng = substream(master, "channels", pack_index(layout_idx, r));
        let channels = draw_channel_set(&model, &ls, &supports, &mut ch_rng);
        let estimated;
        let estimates: &[CMat] = if let Some(book) = &book {
            let mut pilot_rng = substream(master, "dmrs", pack_index(layout_idx, r));
            let y = synthesize_pilot_field(&channels, &clustering, book, &mut pilot_rng);
            let mut est: Vec<CMat> = (0..l_n).map(|_| CMat::zeros(m, k_n)).collect();
            for l in 0..l_n {
                for &k in &clustering.served[l] {
                    let t = clustering.pilot[k].expect("served users hold a pilot");
                    let mut h = pilot_matching(&y[l], book, t);
                    if let Some(basis) = &projectors[l * k_n + k] {
                        h = subspace_projection(&h, basis)?;
                    }
                    est[l].set_column(k, &h);
                }
            }
            estimated = est;
            &estimated
        } else {
            &channels
        };
        for &k in &active {
            let rx = build_receiver(cfg.receiver, estimates, &clustering, snr, &sigma, k)
                .map_err(|e| e.in_context(format!("realization {r}, user {k}")))?;
            sinrs[k].push(instantaneous_sinr(&rx, &channels, snr, k, &active));
        }
    }

    let outage: Vec<bool> = (0..k_n).map(|k| !clustering.is_active(k)).collect();
    let rates: Vec<f64> = (0..k_n)
        .map(|k| {
            if outage[k] {
                Ok(0.0)
            } else {
                average_rate(&sinrs[k])
            }
        })
        .collect::<Result<_>>()?;
    let (se, sum_se) = spectral_efficiency(&rates, &outage, cfg.protocol.tau_p, cfg.protocol.t)?;
    let users = (0..k_n)
        .map(|k| UeRecord {
            ue_id: layout_idx * k_n + k,
            rate_bps_hz: rates[k],
            se_bps_hz: se[k],
            outage: outage[k],
        })
        .collect();
    Ok(LayoutOutcome {
        layout: layout_idx,
        sum_se_bps_hz: sum_se,
        outage_fraction: clustering.outage_fraction(),
        srs_fallback_edges,
        users,
    })
}

/// Run the configured number of layouts (in parallel) and aggregate.
pub fn run_experiment(cfg: &SimConfig) -> Result<RateReport> {
    cfg.validate()?;
    let outcomes: Vec<Result<LayoutOutcome>> = (0..cfg.mc.n_layouts)
        .into_par_iter()
        .map(|i| run_layout(cfg, i))
        .collect();
    let mut layouts = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        layouts.push(outcome?);
    }
    let sums: Vec<f64> = layouts.iter().map(|l| l.sum_se_bps_hz).collect();
    let (mean, stderr) = mean_and_stderr(&sums)?;
    let outage_fraction =
        layouts.iter().map(|l| l.outage_fraction).sum::<f64>() / layouts.len() as f64;
    Ok(RateReport {
        config_hash: cfg.hash(),
        mean_sum_se_bps_hz: mean,
        stderr_sum_se_bps_hz: stderr,
        outage_fraction,
        layouts,
    })
}

/// One sweep combination's result. `runtime` stays out of the serialized
/// form so output files are byte-stable; it is reported separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub settings: Vec<(String, String)>,
    pub config_hash: Option<String>,
    pub sum_se_bps_hz: Option<f64>,
    pub stderr_sum_se_bps_hz: Option<f64>,
    pub outage_fraction: Option<f64>,
    pub best_in_group: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub runtime: Duration,
}

/// All sweep rows plus the bookkeeping needed to render them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub spec_hash: String,
    pub params: Vec<String>,
    pub group_by: Vec<String>,
    pub rows: Vec<SweepRow>,
}

fn row_of_point(point: &SweepPoint) -> SweepRow {
    let settings: Vec<(String, String)> = point
        .settings
        .iter()
        .map(|(name, value)| (name.clone(), value.to_string()))
        .collect();
    let mut row = SweepRow {
        index: point.index,
        settings,
        config_hash: None,
        sum_se_bps_hz: None,
        stderr_sum_se_bps_hz: None,
        outage_fraction: None,
        best_in_group: false,
        error: None,
        runtime: Duration::ZERO,
    };
    match &point.config {
        Err(msg) => row.error = Some(msg.clone()),
        Ok(cfg) => {
            row.config_hash = Some(cfg.hash());
            let t0 = Instant::now();
            match run_experiment(cfg) {
                Ok(report) => {
                    row.sum_se_bps_hz = Some(report.mean_sum_se_bps_hz);
                    row.stderr_sum_se_bps_hz = Some(report.stderr_sum_se_bps_hz);
                    row.outage_fraction = Some(report.outage_fraction);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row.runtime = t0.elapsed();
        }
    }
    row
}

/// Flag the best (largest sum SE) row of every group, lowest index on ties.
fn mark_best_rows(rows: &mut [SweepRow], group_by: &[String]) {
    use std::collections::BTreeMap;
    let key_of = |row: &SweepRow| -> String {
        group_by
            .iter()
            .map(|g| {
                row.settings
                    .iter()
                    .find(|(name, _)| name == g)
                    .map(|(_, value)| format!("{g}={value}"))
                    .unwrap_or_default()
            })
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut best: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..rows.len() {
        let Some(se) = rows[i].sum_se_bps_hz else {
            continue;
        };
        let key = key_of(&rows[i]);
        let replace = match best.get(&key) {
            None => true,
            Some(&j) => se > rows[j].sum_se_bps_hz.expect("flagged rows have sums"),
        };
        if replace {
            best.insert(key, i);
        }
    }
    for &i in best.values() {
        rows[i].best_in_group = true;
    }
}

/// Run every combination of the sweep; failures are recorded on their row
/// and the sweep continues. `parallelism = 0` uses the default thread pool.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> Result<SweepTable> {
    let points = spec.expand()?;
    let run_all = || points.par_iter().map(row_of_point).collect::<Vec<_>>();
    let mut rows = if parallelism > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| {
                Error::InvalidConfig(format!(
                    "cannot build a {parallelism}-thread pool: {e}"
                ))
            })?
            .install(run_all)
    } else {
        run_all()
    };
    mark_best_rows(&mut rows, &spec.sweep.group_by);
    Ok(SweepTable {
        spec_hash: spec.hash(),
        params: spec.swept_params(),
        group_by: spec.sweep.group_by.clone(),
        rows,
    })
}

/// Placement-and-association view of one layout, for inspection dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutDescription {
    pub config_hash: String,
    pub layout: usize,
    pub side_m: f64,
    /// Calibrated normalized transmit SNR in dB.
    pub snr_db: f64,
    pub ru_positions: Vec<crate::geometry::Point>,
    pub ue_positions: Vec<crate::geometry::Point>,
    /// Serving-cluster size per user (0 = outage).
    pub cluster_sizes: Vec<usize>,
    pub outage_fraction: f64,
}

/// Run placement, large-scale fading, and association for one layout and
/// describe the result.
pub fn describe_layout(cfg: &SimConfig, layout_idx: usize) -> Result<LayoutDescription> {
    cfg.validate()?;
    let master = cfg.mc.seed;
    let (l_n, m, k_n) = (cfg.geometry.l, cfg.geometry.m, cfg.geometry.k);
    let area = TorusArea::from_area_m2(cfg.geometry.area_km2 * 1e6)?;
    let layout = place_uniform(area, l_n, k_n, derive_seed(master, "layout", layout_idx as u64))?;
    let mut ls_rng = substream(master, "large-scale", layout_idx as u64);
    let ls = generate_large_scale(&layout, &cfg.radio, &mut ls_rng);
    let snr = calibrate_snr(cfg.power, area, l_n, m, &cfg.radio)?;
    let clustering = form_clusters(
        &ls.beta,
        m,
        snr,
        cfg.protocol.eta,
        cfg.protocol.tau_p,
        cfg.protocol.q,
    )?;
    Ok(LayoutDescription {
        config_hash: cfg.hash(),
        layout: layout_idx,
        side_m: layout.side_m,
        snr_db: 10.0 * snr.log10(),
        ru_positions: layout.ru_positions,
        ue_positions: layout.ue_positions,
        cluster_sizes: clustering.clusters.iter().map(|c| c.len()).collect(),
        outage_fraction: clustering.outage_fraction(),
    })
}

/// Sounding-stage quality of one served edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrsEdgeReport {
    pub ru: usize,
    pub ue: usize,
    /// Estimated subspace rank; `None` when the edge fell back.
    pub rank: Option<usize>,
    /// Fraction of estimated-subspace power inside the true angular span.
    pub power_efficiency: Option<f64>,
    pub fell_back: bool,
}

/// Sounding-stage dump for one layout: per-edge subspace quality
/// irrespective of the configured estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrsSurvey {
    pub config_hash: String,
    pub layout: usize,
    pub served_edges: usize,
    pub fallback_edges: usize,
    pub median_power_efficiency: Option<f64>,
    pub edges: Vec<SrsEdgeReport>,
}

/// Run layout placement through subspace estimation and report per-edge
/// quality against the true angular supports.
pub fn survey_srs(cfg: &SimConfig, layout_idx: usize) -> Result<SrsSurvey> {
    cfg.validate()?;
    let master = cfg.mc.seed;
    let (l_n, m, k_n) = (cfg.geometry.l, cfg.geometry.m, cfg.geometry.k);
    let area = TorusArea::from_area_m2(cfg.geometry.area_km2 * 1e6)?;
    let layout = place_uniform(area, l_n, k_n, derive_seed(master, "layout", layout_idx as u64))?;
    let mut ls_rng = substream(master, "large-scale", layout_idx as u64);
    let ls = generate_large_scale(&layout, &cfg.radio, &mut ls_rng);
    let snr = calibrate_snr(cfg.power, area, l_n, m, &cfg.radio)?;
    let clustering = form_clusters(
        &ls.beta,
        m,
        snr,
        cfg.protocol.eta,
        cfg.protocol.tau_p,
        cfg.protocol.q,
    )?;
    let supports = edge_supports(&layout, m, cfg.radio.angular_spread_rad);
    let model = ChannelModel::new(m);
    let subspaces = srs_subspaces(
        cfg,
        &layout,
        &ls,
        &clustering,
        &supports,
        &model,
        snr,
        layout_idx,
    )
    .map_err(|e| e.in_context(format!("layout {layout_idx}")))?;

    let mut edges = Vec::new();
    for l in 0..l_n {
        for &k in &clustering.served[l] {
            let report = match &subspaces[l * k_n + k] {
                Some(sub) => SrsEdgeReport {
                    ru: l,
                    ue: k,
                    rank: Some(sub.rank),
                    power_efficiency: Some(power_efficiency(
                        &model,
                        &supports[l * k_n + k],
                        &sub.basis,
                    )),
                    fell_back: false,
                },
                None => SrsEdgeReport {
                    ru: l,
                    ue: k,
                    rank: None,
                    power_efficiency: None,
                    fell_back: true,
                },
            };
            edges.push(report);
        }
    }
    edges.sort_by_key(|e| (e.ru, e.ue));
    let served_edges = edges.len();
    let fallback_edges = edges.iter().filter(|e| e.fell_back).count();
    let pes: Vec<f64> = edges.iter().filter_map(|e| e.power_efficiency).collect();
    let median_power_efficiency = if pes.is_empty() {
        None
    } else {
        Some(median(&pes)?)
    };
    Ok(SrsSurvey {
        config_hash: cfg.hash(),
        layout: layout_idx,
        served_edges,
        fallback_edges,
        median_power_efficiency,
        edges,
    })
}
