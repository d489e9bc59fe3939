//! Run configuration: schema, per-field validation, canonical hashing, and
//! sweep expansion.
//!
//! Configs are TOML with one table per stage. Every field has a default, so
//! a minimal file (even an empty one) parses to the small reference setup;
//! unknown keys and type mismatches are rejected with the offending key
//! named. The canonical form of a config is its JSON serialization with
//! struct-order keys, and the config hash is the SHA-256 of that string, so
//! any output file can be checked against the config that produced it.

use crate::error::{Error, Result};
use crate::propagation::{PowerMode, RadioConfig};
use crate::receivers::ReceiverKind;
use crate::srs::latin::is_prime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;

/// Channel-state information available to the receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// True channels of the serving RUs (partial-CSI genie).
    Ideal,
    /// Pilot matching on the demodulation pilots.
    Pm,
    /// Pilot matching projected onto the true angular subspace.
    SpTrue,
    /// Pilot matching projected onto the sounding-based subspace estimate.
    SpRpca,
    /// As `sp-rpca`, but with the estimate snapped onto the DFT grid first.
    SpRpcaProjected,
}

impl Estimator {
    /// Kebab-case name as used in config files and output tables.
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ideal => "ideal",
            Estimator::Pm => "pm",
            Estimator::SpTrue => "sp-true",
            Estimator::SpRpca => "sp-rpca",
            Estimator::SpRpcaProjected => "sp-rpca-projected",
        }
    }
}

impl ReceiverKind {
    /// Kebab-case name as used in config files and output tables.
    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::LocalLmmse => "local-lmmse",
            ReceiverKind::GlobalZf => "gzf",
        }
    }
}

/// Network size and coverage area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Torus area in km^2.
    pub area_km2: f64,
    /// Number of radio units.
    pub l: usize,
    /// Antennas per radio unit.
    pub m: usize,
    /// Number of users.
    pub k: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            area_km2: 1.0,
            l: 20,
            m: 8,
            k: 100,
        }
    }
}

/// Frame structure and association rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Demodulation pilots per resource block (also the per-RU user cap).
    pub tau_p: usize,
    /// Resource-block length in symbols; the pilot overhead is `tau_p / t`.
    pub t: usize,
    /// Maximum cluster size per user.
    pub q: usize,
    /// Association SNR threshold: an RU is a candidate when
    /// `beta >= eta / (M snr)`.
    pub eta: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            tau_p: 10,
            t: 200,
            q: 4,
            eta: 1.0,
        }
    }
}

/// Sounding schedule and robust-split knobs for the subspace estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrsConfig {
    /// Hopping-pattern order: subcarriers per sounding symbol and symbols
    /// per cell. Must be prime (Latin-square construction) and at least 5
    /// so the hex coloring has enough square indices.
    pub n: usize,
    /// Sounding slots collected per subspace estimate.
    pub s: usize,
    /// Regularization weight for the robust split; `0` tunes it
    /// automatically from the expected rank.
    pub lambda0: f64,
    /// Relative feasibility tolerance of the split solver.
    pub tol: f64,
    /// Outer-iteration cap of the split solver.
    pub max_iter: usize,
    /// Hexagonal sounding-cell radius in meters.
    pub hex_radius_m: f64,
}

impl Default for SrsConfig {
    fn default() -> Self {
        SrsConfig {
            n: 19,
            s: 57,
            lambda0: 0.0,
            tol: 1e-6,
            max_iter: 500,
            hex_radius_m: 150.0,
        }
    }
}

/// Monte-Carlo averaging depth and the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Independent network layouts.
    pub n_layouts: usize,
    /// Small-scale fading realizations per layout.
    pub n_realizations: usize,
    /// Master seed; every substream is derived from it.
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_layouts: 10,
            n_realizations: 50,
            seed: 1,
        }
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub geometry: GeometryConfig,
    pub radio: RadioConfig,
    pub power: PowerMode,
    pub protocol: ProtocolConfig,
    pub estimator: Estimator,
    pub receiver: ReceiverKind,
    pub srs: SrsConfig,
    pub mc: McConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            geometry: GeometryConfig::default(),
            radio: RadioConfig::default(),
            power: PowerMode::FixedPower {
                p_tx_dbm: 0.0,
                bandwidth_hz: 1e7,
                noise_dbm_hz: -174.0,
            },
            protocol: ProtocolConfig::default(),
            estimator: Estimator::SpTrue,
            receiver: ReceiverKind::LocalLmmse,
            srs: SrsConfig::default(),
            mc: McConfig::default(),
        }
    }
}

/// Hex-encoded SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl SimConfig {
    /// Check every invariant, naming the offending field(s) in the error.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.area_km2 > 0.0) || !g.area_km2.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "geometry.area_km2 must be positive and finite, got {}",
                g.area_km2
            )));
        }
        if g.l == 0 || g.m == 0 || g.k == 0 {
            return Err(Error::InvalidConfig(format!(
                "geometry.l, geometry.m, geometry.k must all be at least 1, got l={}, m={}, k={}",
                g.l, g.m, g.k
            )));
        }
        let r = &self.radio;
        if !(r.carrier_ghz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radio.carrier_ghz must be positive, got {}",
                r.carrier_ghz
            )));
        }
        if !(r.ue_height_m > 0.0) || !(r.ru_height_m > r.ue_height_m) {
            return Err(Error::InvalidConfig(format!(
                "radio heights must satisfy ru_height_m > ue_height_m > 0, got ru_height_m={}, ue_height_m={}",
                r.ru_height_m, r.ue_height_m
            )));
        }
        if !(r.angular_spread_rad > 0.0 && r.angular_spread_rad <= TAU) {
            return Err(Error::InvalidConfig(format!(
                "radio.angular_spread_rad must lie in (0, 2pi], got {}",
                r.angular_spread_rad
            )));
        }
        let p = &self.protocol;
        if p.tau_p == 0 || p.q == 0 {
            return Err(Error::InvalidConfig(format!(
                "protocol.tau_p and protocol.q must be at least 1, got tau_p={}, q={}",
                p.tau_p, p.q
            )));
        }
        if p.t <= p.tau_p {
            return Err(Error::InvalidConfig(format!(
                "protocol.t must exceed protocol.tau_p, got t={}, tau_p={}",
                p.t, p.tau_p
            )));
        }
        if !(p.eta > 0.0) || !p.eta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "protocol.eta must be positive and finite, got {}",
                p.eta
            )));
        }
        match self.power {
            PowerMode::CellEdge { rho, d_l_factor } => {
                if !(rho > 0.0) || !(d_l_factor > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "power.rho and power.d_l_factor must be positive, got rho={rho}, d_l_factor={d_l_factor}"
                    )));
                }
            }
            PowerMode::FixedPower {
                p_tx_dbm,
                bandwidth_hz,
                noise_dbm_hz,
            } => {
                if !p_tx_dbm.is_finite() || !noise_dbm_hz.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "power.p_tx_dbm and power.noise_dbm_hz must be finite, got p_tx_dbm={p_tx_dbm}, noise_dbm_hz={noise_dbm_hz}"
                    )));
                }
                if !(bandwidth_hz > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "power.bandwidth_hz must be positive, got {bandwidth_hz}"
                    )));
                }
            }
        }
        let s = &self.srs;
        if !is_prime(s.n) || s.n < 5 {
            return Err(Error::InvalidConfig(format!(
                "srs.n must be a prime of at least 5, got {}",
                s.n
            )));
        }
        if s.s == 0 {
            return Err(Error::InvalidConfig(format!(
                "srs.s must be at least 1, got {}",
                s.s
            )));
        }
        if s.lambda0 < 0.0 || !s.lambda0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "srs.lambda0 must be zero (auto) or positive, got {}",
                s.lambda0
            )));
        }
        if !(s.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "srs.tol must be positive, got {}",
                s.tol
            )));
        }
        if s.max_iter == 0 {
            return Err(Error::InvalidConfig(format!(
                "srs.max_iter must be at least 1, got {}",
                s.max_iter
            )));
        }
        if !(s.hex_radius_m > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "srs.hex_radius_m must be positive, got {}",
                s.hex_radius_m
            )));
        }
        let mc = &self.mc;
        if mc.n_layouts == 0 || mc.n_realizations == 0 {
            return Err(Error::InvalidConfig(format!(
                "mc.n_layouts and mc.n_realizations must be at least 1, got n_layouts={}, n_realizations={}",
                mc.n_layouts, mc.n_realizations
            )));
        }
        Ok(())
    }

    /// Canonical serialized form: JSON with struct-order keys.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, hex-encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    /// Config echoed back as TOML (same key order as the schema).
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Parse and validate a TOML config.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// How sweep value lists combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Cartesian product in canonical parameter order (first parameter
    /// slowest, last fastest).
    #[default]
    Cross,
    /// Parallel iteration; all lists must share one length.
    Zipped,
}

/// Value lists for the sweepable parameters. Absent keys are not swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepValues {
    pub l: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub tau_p: Option<Vec<usize>>,
    pub p_tx_dbm: Option<Vec<f64>>,
    pub area_km2: Option<Vec<f64>>,
    pub estimator: Option<Vec<Estimator>>,
    pub receiver: Option<Vec<ReceiverKind>>,
}

/// Sweep section: combination mode, grouping for the argmax report, values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub mode: SweepMode,
    /// Parameters whose values partition the rows into groups; the best row
    /// (largest sum SE, lowest index on ties) is flagged per group. Empty
    /// means one global group.
    pub group_by: Vec<String>,
    pub values: SweepValues,
}

/// A base config plus value lists per swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub sweep: SweepSection,
}

/// One value a sweep can assign to a parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepValue {
    Count(usize),
    Level(f64),
    Estimator(Estimator),
    Receiver(ReceiverKind),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Count(v) => write!(f, "{v}"),
            SweepValue::Level(v) => write!(f, "{v}"),
            SweepValue::Estimator(e) => write!(f, "{}", e.name()),
            SweepValue::Receiver(r) => write!(f, "{}", r.name()),
        }
    }
}

/// Canonical order of sweepable parameters; fixes cross-product enumeration
/// and output-column order.
pub const SWEEP_PARAMS: [&str; 8] = [
    "l",
    "m",
    "k",
    "tau_p",
    "p_tx_dbm",
    "area_km2",
    "estimator",
    "receiver",
];

/// One fully resolved run of a sweep: its settings in canonical parameter
/// order and the resulting config (or why it is invalid).
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub settings: Vec<(String, SweepValue)>,
    pub config: std::result::Result<SimConfig, String>,
}

fn apply_setting(cfg: &mut SimConfig, name: &str, value: &SweepValue) -> Result<()> {
    match (name, value) {
        ("l", SweepValue::Count(v)) => cfg.geometry.l = *v,
        ("m", SweepValue::Count(v)) => cfg.geometry.m = *v,
        ("k", SweepValue::Count(v)) => cfg.geometry.k = *v,
        ("tau_p", SweepValue::Count(v)) => cfg.protocol.tau_p = *v,
        ("p_tx_dbm", SweepValue::Level(v)) => match &mut cfg.power {
            PowerMode::FixedPower { p_tx_dbm, .. } => *p_tx_dbm = *v,
            PowerMode::CellEdge { .. } => {
                return Err(Error::InvalidConfig(
                    "sweep.values.p_tx_dbm requires power.mode = \"fixed-power\"".into(),
                ))
            }
        },
        ("area_km2", SweepValue::Level(v)) => cfg.geometry.area_km2 = *v,
        ("estimator", SweepValue::Estimator(e)) => cfg.estimator = *e,
        ("receiver", SweepValue::Receiver(r)) => cfg.receiver = *r,
        _ => unreachable!("setting {name} paired with a value of the wrong kind"),
    }
    Ok(())
}

impl SweepSpec {
    /// SHA-256 of the canonical JSON form, hex-encoded.
    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("sweep spec serializes")
                .as_bytes(),
        )
    }

    fn value_lists(&self) -> Vec<(&'static str, Vec<SweepValue>)> {
        let v = &self.sweep.values;
        let mut lists = Vec::new();
        let counts = |xs: &Vec<usize>| xs.iter().map(|&x| SweepValue::Count(x)).collect();
        let levels = |xs: &Vec<f64>| xs.iter().map(|&x| SweepValue::Level(x)).collect();
        if let Some(xs) = &v.l {
            lists.push(("l", counts(xs)));
        }
        if let Some(xs) = &v.m {
            lists.push(("m", counts(xs)));
        }
        if let Some(xs) = &v.k {
            lists.push(("k", counts(xs)));
        }
        if let Some(xs) = &v.tau_p {
            lists.push(("tau_p", counts(xs)));
        }
        if let Some(xs) = &v.p_tx_dbm {
            lists.push(("p_tx_dbm", levels(xs)));
        }
        if let Some(xs) = &v.area_km2 {
            lists.push(("area_km2", levels(xs)));
        }
        if let Some(xs) = &v.estimator {
            lists.push((
                "estimator",
                xs.iter().map(|&e| SweepValue::Estimator(e)).collect(),
            ));
        }
        if let Some(xs) = &v.receiver {
            lists.push((
                "receiver",
                xs.iter().map(|&r| SweepValue::Receiver(r)).collect(),
            ));
        }
        lists
    }

    /// Names of the swept parameters in canonical order.
    pub fn swept_params(&self) -> Vec<String> {
        self.value_lists()
            .iter()
            .map(|(name, _)| name.to_string())
            .collect()
    }

    /// Check the spec: valid base config, at least one nonempty list,
    /// zipped lengths equal, group-by keys actually swept.
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let lists = self.value_lists();
        if lists.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep.values must provide at least one parameter list".into(),
            ));
        }
        for (name, vals) in &lists {
            if vals.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "sweep.values.{name} must not be empty"
                )));
            }
        }
        if self.sweep.mode == SweepMode::Zipped {
            let lens: Vec<usize> = lists.iter().map(|(_, v)| v.len()).collect();
            if lens.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "zipped sweep needs equal list lengths, got {lens:?}"
                )));
            }
        }
        let swept = self.swept_params();
        for g in &self.sweep.group_by {
            if !swept.contains(g) {
                return Err(Error::InvalidConfig(format!(
                    "sweep.group_by names '{g}', which is not a swept parameter"
                )));
            }
        }
        Ok(())
    }

    /// Expand into one resolved point per combination. A combination whose
    /// config violates an invariant is kept with the error attached, so a
    /// sweep can record it as a failed row and continue.
    pub fn expand(&self) -> Result<Vec<SweepPoint>> {
        self.validate()?;
        let lists = self.value_lists();
        let combos: Vec<Vec<(String, SweepValue)>> = match self.sweep.mode {
            SweepMode::Zipped => {
                let rows = lists[0].1.len();
                (0..rows)
                    .map(|i| {
                        lists
                            .iter()
                            .map(|(name, vals)| (name.to_string(), vals[i].clone()))
                            .collect()
                    })
                    .collect()
            }
            SweepMode::Cross => {
                let mut combos: Vec<Vec<(String, SweepValue)>> = vec![Vec::new()];
                for (name, vals) in &lists {
                    combos = combos
                        .into_iter()
                        .flat_map(|prefix| {
                            vals.iter().map(move |v| {
                                let mut row = prefix.clone();
                                row.push((name.to_string(), v.clone()));
                                row
                            })
                        })
                        .collect();
                }
                combos
            }
        };
        Ok(combos
            .into_iter()
            .enumerate()
            .map(|(index, settings)| {
                let mut cfg = self.base.clone();
                let config = settings
                    .iter()
                    .try_for_each(|(name, value)| apply_setting(&mut cfg, name, value))
                    .and_then(|_| cfg.validate())
                    .map(|_| cfg)
                    .map_err(|e| e.to_string());
                SweepPoint {
                    index,
                    settings,
                    config,
                }
            })
            .collect())
    }
}

/// Parse and validate a TOML sweep spec.
pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let spec: SweepSpec =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}
