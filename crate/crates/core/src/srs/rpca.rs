//! Column-outlier robust PCA via an augmented-Lagrangian splitting.
//!
//! Splits an observation block `Y` into a low-rank part `H` (the hopping
//! user's subspace) and a column-sparse part `E` (slots hit by a
//! collision), by minimizing `||H||_* + lambda ||E||_{2,1}` subject to
//! `H + E = Y`. The solver takes proximal outer steps on `H`: each step
//! anchors a small quadratic at the last accepted iterate and solves the
//! anchored subproblem with inner augmented-Lagrangian sweeps — a
//! singular-value threshold on `H`, a column-wise soft threshold on `E`,
//! and dual ascent under an escalating penalty. An outer step is kept only
//! when it lowers the objective of the completed decomposition
//! `(H, Y - H)`, so the recorded objective trace never rises. When even
//! the first step cannot improve on the empty decomposition `(0, Y)` —
//! which is optimal once `lambda` prices every column below its share of
//! the nuclear norm — that pair is returned unchanged.

use crate::error::{Error, Result};
use crate::linalg::{fro_norm, CMat};
use nalgebra::Complex;

/// Solver knobs; the defaults match the tolerances used everywhere.
#[derive(Debug, Clone, Copy)]
pub struct RpcaOptions {
    /// Relative feasibility tolerance on `||Y - H - E||_F / ||Y||_F`
    /// enforced by the inner sweeps of every outer step.
    pub tol: f64,
    /// Cap on outer (proximal) steps.
    pub max_iter: usize,
    /// Initial inner penalty; `None` picks `1.25 / sigma_1(Y)`.
    pub mu: Option<f64>,
    /// Inner per-sweep penalty growth (1.0 keeps it fixed). Growth trades
    /// looser early sweeps for much faster feasibility.
    pub rho: f64,
}

impl Default for RpcaOptions {
    fn default() -> Self {
        RpcaOptions {
            tol: 1e-6,
            max_iter: 500,
            mu: None,
            rho: 1.6,
        }
    }
}

/// Decomposition outcome with the per-outer-step objective values.
#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub low_rank: CMat,
    pub outliers: CMat,
    /// Outer steps attempted (including a final rejected one, if any).
    pub iterations: usize,
    pub converged: bool,
    /// `||H||_* + lambda ||E||_{2,1}` of the completed decomposition
    /// `(H, Y - H)`, for the start pair `(0, Y)` and then each accepted
    /// outer step. Non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

/// Baseline column-sparsity weight for an `n_slots`-column block with a
/// nominal 10% collision budget.
pub fn default_lambda(n_slots: usize) -> f64 {
    3.0 / (7.0 * (0.1 * n_slots as f64).sqrt())
}

/// Singular-value thresholding: shrink every singular value of `x` by
/// `tau`, dropping the ones that hit zero. Returns the reconstruction and
/// the surviving (shrunk) singular values.
pub(crate) fn svt(x: &CMat, tau: f64) -> (CMat, Vec<f64>) {
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let shrunk: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| (s - tau).max(0.0))
        .take_while(|&s| s > 0.0)
        .collect();
    let r = shrunk.len();
    if r == 0 {
        return (CMat::zeros(x.nrows(), x.ncols()), shrunk);
    }
    let mut scaled = u.columns(0, r).clone_owned();
    for (j, &s) in shrunk.iter().enumerate() {
        scaled.column_mut(j).scale_mut(s);
    }
    (scaled * v_t.rows(0, r), shrunk)
}

/// Column-wise soft threshold: scale each column by
/// `max(1 - tau / ||col||, 0)`.
pub(crate) fn column_shrink(x: &CMat, tau: f64) -> CMat {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        let factor = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        col.scale_mut(factor);
    }
    out
}

fn l21_norm(x: &CMat) -> f64 {
    x.column_iter().map(|c| c.norm()).sum()
}

/// Outer anchor weight as a fraction of `1 / sigma_1(Y)`: strong enough to
/// damp oscillation between outer steps, weak enough that the anchored
/// subproblem stays a faithful copy of the original one.
const PROX_WEIGHT: f64 = 0.05;
/// Inner sweep budget per outer step; the escalating penalty reaches
/// feasibility in far fewer sweeps on every block size used here.
const INNER_MAX_SWEEPS: usize = 100;
/// Relative objective progress below which an outer step counts as a stall.
const STALL_DESCENT: f64 = 1e-9;
/// Relative iterate movement below which an outer step counts as a stall.
const STALL_STEP: f64 = 1e-4;

/// Run the proximal augmented-Lagrangian splitting on `y` with sparsity
/// weight `lambda`.
pub fn rpca_decompose(y: &CMat, lambda: f64, opts: &RpcaOptions) -> Result<RpcaResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let y_norm = fro_norm(y);
    if y_norm == 0.0 {
        return Ok(RpcaResult {
            low_rank: CMat::zeros(y.nrows(), y.ncols()),
            outliers: CMat::zeros(y.nrows(), y.ncols()),
            iterations: 0,
            converged: true,
            objective_trace: Vec::new(),
        });
    }
    let sigma1 = y.clone().svd(false, false).singular_values[0];
    let mu0 = opts.mu.unwrap_or(1.25 / sigma1);
    let mu_max = mu0 * 1e7;
    let anchor_weight = PROX_WEIGHT / sigma1;

    // Last accepted decomposition; starts from the feasible pair (0, Y).
    let mut acc_h = CMat::zeros(y.nrows(), y.ncols());
    let mut acc_e = y.clone();
    // Inner state, warm across outer steps.
    let mut h = CMat::zeros(y.nrows(), y.ncols());
    let mut e = CMat::zeros(y.nrows(), y.ncols());
    let mut dual = CMat::zeros(y.nrows(), y.ncols());

    let mut trace = vec![lambda * l21_norm(y)];
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;

        // Inner sweeps on the anchored subproblem
        //   min ||H||_* + lambda ||E||_{2,1} + (w/2) ||H - acc_h||_F^2
        //   s.t. H + E = Y
        // whose H update stays a singular-value threshold: the anchor only
        // reweights the threshold target.
        let mut mu = mu0;
        let mut inner_feasible = false;
        let mut nuclear = 0.0;
        for _ in 0..INNER_MAX_SWEEPS {
            let target = (&acc_h * Complex::new(anchor_weight, 0.0)
                + (y - &e) * Complex::new(mu, 0.0)
                + &dual)
                / Complex::new(anchor_weight + mu, 0.0);
            let (h_new, shrunk) = svt(&target, 1.0 / (anchor_weight + mu));
            h = h_new;
            nuclear = shrunk.iter().sum();
            e = column_shrink(&(y - &h + &dual / Complex::new(mu, 0.0)), lambda / mu);
            let residual = y - &h - &e;
            dual += &residual * Complex::new(mu, 0.0);
            if fro_norm(&residual) / y_norm < opts.tol {
                inner_feasible = true;
                break;
            }
            mu = (mu * opts.rho).min(mu_max);
        }

        let value = nuclear + lambda * l21_norm(&(y - &h));
        let last = *trace.last().expect("trace starts non-empty");
        if value > last {
            // The anchored subproblem can no longer improve the completed
            // objective; keep the previous accepted pair.
            h = acc_h.clone();
            e = acc_e.clone();
            converged = true;
            break;
        }
        trace.push(value);
        let step = fro_norm(&(&h - &acc_h)) / y_norm;
        acc_h = h.clone();
        acc_e = e.clone();
        if last - value < STALL_DESCENT * trace[0].max(1.0) && step < STALL_STEP {
            converged = inner_feasible;
            break;
        }
    }

    Ok(RpcaResult {
        low_rank: h,
        outliers: e,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Rank from the largest consecutive gap of a descending singular-value
/// sequence.
///
/// Values at or below `sigma_1 * 1e-12` are discarded first. A single
/// surviving value means rank one; otherwise the rank is the position of
/// the widest gap (earliest on ties). An all-zero sequence has no signal
/// subspace at all.
pub fn select_rank(singular_values: &[f64]) -> Result<usize> {
    let Some(&first) = singular_values.first() else {
        return Err(Error::NoSubspace);
    };
    let kept: Vec<f64> = singular_values
        .iter()
        .copied()
        .take_while(|&s| s > first * 1e-12)
        .collect();
    if kept.is_empty() {
        return Err(Error::NoSubspace);
    }
    if kept.len() == 1 {
        return Ok(1);
    }
    let mut best_i = 0;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 0..kept.len() - 1 {
        let gap = kept[i] - kept[i + 1];
        if gap > best_gap {
            best_gap = gap;
            best_i = i;
        }
    }
    Ok(best_i + 1)
}

const TUNE_STEPS: usize = 12;

/// Geometric search over `lambda` until the recovered low-rank part has a
/// plausible rank.
///
/// Starting from [`default_lambda`], each step halves `lambda` when the
/// decomposition keeps too many directions and doubles it when everything
/// was dumped into the outlier part. Returns the last decomposition even
/// if the search exhausts its budget without landing in `[1, r_expected]`.
pub fn tune_lambda(
    y: &CMat,
    r_expected: usize,
    opts: &RpcaOptions,
) -> Result<(f64, RpcaResult)> {
    if r_expected == 0 {
        return Err(Error::InvalidConfig("r_expected must be at least 1".into()));
    }
    let mut lambda = default_lambda(y.ncols());
    let mut result = rpca_decompose(y, lambda, opts)?;
    for _ in 0..TUNE_STEPS {
        let svals: Vec<f64> = result
            .low_rank
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        match select_rank(&svals) {
            Ok(r) if r <= r_expected => return Ok((lambda, result)),
            Ok(_) => lambda /= 2.0,       // too many directions kept
            Err(Error::NoSubspace) => lambda *= 2.0, // everything became outliers
            Err(e) => return Err(e),
        }
        result = rpca_decompose(y, lambda, opts)?;
    }
    Ok((lambda, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use crate::rng::{complex_gaussian, substream};
    use nalgebra::Complex;

    /// Rank-`r` block with unit-magnitude factors, plus optional outlier
    /// columns of amplitude `spike`.
    fn synthetic(
        m: usize,
        s: usize,
        r: usize,
        outlier_cols: &[usize],
        spike: f64,
        seed: u64,
    ) -> CMat {
        let mut rng = substream(seed, "rpca-test", 0);
        let mut a = CMat::zeros(m, r);
        for j in 0..r {
            let col = CVec::from_fn(m, |_, _| complex_gaussian(&mut rng, 1.0));
            a.set_column(j, &(col / Complex::new((m as f64).sqrt(), 0.0)));
        }
        let mut b = CMat::zeros(r, s);
        for i in 0..r {
            for j in 0..s {
                b[(i, j)] = complex_gaussian(&mut rng, 1.0);
            }
        }
        let mut y = a * b;
        for &c in outlier_cols {
            for i in 0..m {
                y[(i, c)] += complex_gaussian(&mut rng, spike * spike);
            }
        }
        y
    }

    #[test]
    fn clean_low_rank_is_recovered() {
        // With no outliers and a lambda that prices columns above their
        // norms, the optimum keeps the whole block in the low-rank part.
        let y = synthetic(16, 30, 2, &[], 0.0, 1);
        let res = rpca_decompose(&y, 1.0, &RpcaOptions::default()).unwrap();
        assert!(res.converged, "did not converge in {} iters", res.iterations);
        let rel = fro_norm(&(y.clone() - &res.low_rank)) / fro_norm(&y);
        assert!(rel < 1e-4, "low-rank relative error {rel}");
        assert!(
            fro_norm(&res.outliers) / fro_norm(&y) < 1e-4,
            "spurious outliers"
        );
    }

    #[test]
    fn outlier_columns_are_isolated() {
        let outliers = [3usize, 11, 24];
        let clean = synthetic(16, 30, 2, &[], 0.0, 7);
        let y = {
            let mut y = clean.clone();
            let mut rng = substream(8, "rpca-test-outliers", 0);
            for &c in &outliers {
                for i in 0..16 {
                    y[(i, c)] += complex_gaussian(&mut rng, 25.0);
                }
            }
            y
        };
        // Price a column between the inlier norms (~1.3 each, cheap to keep
        // low-rank) and the spike norms (~20 each, cheap to discard).
        let res = rpca_decompose(&y, 0.5, &RpcaOptions::default()).unwrap();
        assert!(res.converged);
        // Outlier columns carry nearly all of E's energy.
        let col_norms: Vec<f64> = res.outliers.column_iter().map(|c| c.norm()).collect();
        let hit: f64 = outliers.iter().map(|&c| col_norms[c]).sum();
        let total: f64 = col_norms.iter().sum();
        assert!(
            hit / total > 0.95,
            "outlier energy concentrated only {hit}/{total}"
        );
        // The low-rank part still matches the clean block on inlier columns.
        let mut err = 0.0;
        let mut base = 0.0;
        for c in 0..30 {
            if outliers.contains(&c) {
                continue;
            }
            err += (res.low_rank.column(c) - clean.column(c)).norm_squared();
            base += clean.column(c).norm_squared();
        }
        let rel = (err / base).sqrt();
        assert!(rel < 0.05, "inlier reconstruction error {rel}");
    }

    #[test]
    fn objective_trace_is_nonincreasing() {
        // Across sparsity weights spanning the empty-decomposition regime,
        // the useful middle, and the keep-everything regime.
        for seed in [1u64, 7, 13, 29] {
            for lambda_scale in [1.0, 2.0, 4.0] {
                let y = synthetic(16, 30, 3, &[2, 17], 5.0, seed);
                let lambda = default_lambda(30) * lambda_scale;
                let res = rpca_decompose(&y, lambda, &RpcaOptions::default()).unwrap();
                assert!(
                    !res.objective_trace.is_empty(),
                    "trace records at least the start pair"
                );
                for w in res.objective_trace.windows(2) {
                    assert!(
                        w[1] <= w[0] + 1e-8 * w[0].max(1.0),
                        "objective rose from {} to {} (seed {seed}, lambda {lambda})",
                        w[0],
                        w[1]
                    );
                }
            }
        }
    }

    #[test]
    fn tiny_lambda_keeps_empty_decomposition() {
        // When every column is priced below its share of the nuclear norm,
        // the empty decomposition (0, Y) is already optimal.
        let y = synthetic(16, 30, 2, &[4], 5.0, 11);
        let lambda = default_lambda(30) / 8.0;
        let res = rpca_decompose(&y, lambda, &RpcaOptions::default()).unwrap();
        assert!(res.converged);
        assert!(
            fro_norm(&res.low_rank) <= 1e-9 * fro_norm(&y),
            "low-rank part should be empty"
        );
        assert!(
            fro_norm(&(y.clone() - &res.outliers)) <= 1e-5 * fro_norm(&y),
            "outlier part should carry the whole block"
        );
    }

    #[test]
    fn zero_input_is_trivially_decomposed() {
        let y = CMat::zeros(8, 10);
        let res = rpca_decompose(&y, 0.1, &RpcaOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(fro_norm(&res.low_rank), 0.0);
    }

    #[test]
    fn invalid_lambda_is_rejected() {
        let y = CMat::zeros(4, 4);
        assert!(rpca_decompose(&y, 0.0, &RpcaOptions::default()).is_err());
        assert!(rpca_decompose(&y, f64::NAN, &RpcaOptions::default()).is_err());
    }

    #[test]
    fn svt_shrinks_singular_values() {
        let mut x = CMat::zeros(3, 3);
        x[(0, 0)] = Complex::new(5.0, 0.0);
        x[(1, 1)] = Complex::new(3.0, 0.0);
        x[(2, 2)] = Complex::new(1.0, 0.0);
        let (out, shrunk) = svt(&x, 2.0);
        assert_eq!(shrunk, vec![3.0, 1.0]);
        let mut expect = CMat::zeros(3, 3);
        expect[(0, 0)] = Complex::new(3.0, 0.0);
        expect[(1, 1)] = Complex::new(1.0, 0.0);
        assert!(fro_norm(&(out - expect)) < 1e-10);
    }

    #[test]
    fn column_shrink_scales_and_kills_columns() {
        let mut x = CMat::zeros(2, 2);
        x[(0, 0)] = Complex::new(4.0, 0.0);
        x[(1, 1)] = Complex::new(1.0, 0.0);
        let out = column_shrink(&x, 2.0);
        assert!((out[(0, 0)].re - 2.0).abs() < 1e-12, "norm-4 column halves");
        assert_eq!(out[(1, 1)].norm(), 0.0, "norm-1 column vanishes");
    }

    #[test]
    fn rank_selection_reference_cases() {
        assert_eq!(select_rank(&[3.0, 3.0, 3.0]).unwrap(), 1);
        assert_eq!(select_rank(&[10.0, 9.0, 1.0, 0.5]).unwrap(), 2);
        assert_eq!(select_rank(&[5.0]).unwrap(), 1);
        assert_eq!(select_rank(&[6.0, 4.0, 2.0]).unwrap(), 1, "tie takes earliest gap");
        assert_eq!(select_rank(&[1.0, 1e-20]).unwrap(), 1, "tiny value trimmed");
        assert!(matches!(select_rank(&[0.0, 0.0]), Err(Error::NoSubspace)));
        assert!(matches!(select_rank(&[]), Err(Error::NoSubspace)));
    }

    #[test]
    fn tuned_lambda_lands_in_expected_rank_band() {
        let y = synthetic(16, 30, 3, &[5, 20], 8.0, 3);
        let (lambda, res) = tune_lambda(&y, 3, &RpcaOptions::default()).unwrap();
        assert!(lambda > 0.0);
        let svals: Vec<f64> = res
            .low_rank
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        let r = select_rank(&svals).unwrap();
        assert!((1..=3).contains(&r), "tuned rank {r}");
    }

    #[test]
    fn tune_rejects_zero_expected_rank() {
        let y = CMat::zeros(4, 4);
        assert!(tune_lambda(&y, 0, &RpcaOptions::default()).is_err());
    }
}
