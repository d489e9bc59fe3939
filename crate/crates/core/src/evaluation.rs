//! Instantaneous SINRs, Monte-Carlo rates, spectral efficiency, and
//! distribution summaries.

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::receivers::CompositeReceiver;

/// Instantaneous SINR of user `k` under unit-norm composite receiver `rx`,
/// evaluated on the true channels:
/// `|v^H h_k|^2 / (1/snr + sum_{j != k, active} |v^H h_j|^2)`.
///
/// Only transmitting users enter the interference sum; `active` must be the
/// clustering's active-user list.
pub fn instantaneous_sinr(
    rx: &CompositeReceiver,
    channels: &[CMat],
    snr: f64,
    k: usize,
    active: &[usize],
) -> f64 {
    let signal = rx.dot_channel(channels, k).norm_sqr();
    let mut denom = 1.0 / snr;
    for &j in active {
        if j != k {
            denom += rx.dot_channel(channels, j).norm_sqr();
        }
    }
    signal / denom
}

/// Monte-Carlo optimistic ergodic rate: mean of `log2(1 + SINR)` over the
/// per-realization SINR samples of one user.
pub fn average_rate(sinrs: &[f64]) -> Result<f64> {
    if sinrs.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(sinrs.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / sinrs.len() as f64)
}

/// Per-user spectral efficiency `(1 - tau_p/T) * R_k`, zeroed for outage
/// users, plus the sum over the others. `tau_p = 0` is allowed for
/// ideal-CSI baselines; `tau_p >= T` is rejected.
pub fn spectral_efficiency(
    rates: &[f64],
    outage: &[bool],
    tau_p: usize,
    t: usize,
) -> Result<(Vec<f64>, f64)> {
    if tau_p >= t {
        return Err(Error::InvalidConfig(format!(
            "pilot overhead tau_p = {tau_p} must be below the slot length T = {t}"
        )));
    }
    if rates.len() != outage.len() {
        return Err(Error::Contract(
            "rates and outage flags must be parallel".into(),
        ));
    }
    let factor = 1.0 - tau_p as f64 / t as f64;
    let se: Vec<f64> = rates
        .iter()
        .zip(outage)
        .map(|(&r, &out)| if out { 0.0 } else { factor * r })
        .collect();
    let sum = se.iter().sum();
    Ok((se, sum))
}

/// Right-continuous empirical CDF over `samples`: ascending unique values
/// paired with `P(X <= value)`.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Median of a sample set (mean of the middle pair for even sizes).
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use crate::receivers::{CompositeReceiver, ReceiverKind};
    use crate::rng::{complex_gaussian, substream};
    use num_complex::Complex64;

    fn receiver_from(rus: Vec<usize>, blocks: Vec<CVec>) -> CompositeReceiver {
        let norm = blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt();
        let blocks = blocks
            .into_iter()
            .map(|b| b / Complex64::new(norm, 0.0))
            .collect();
        CompositeReceiver {
            rus,
            blocks,
            kind: ReceiverKind::LocalLmmse,
            fell_back: false,
        }
    }

    #[test]
    fn single_user_matched_filter_closed_form() {
        let mut rng = substream(1, "eval-test", 0);
        let h = CVec::from_fn(6, |_, _| complex_gaussian(&mut rng, 1.0));
        let mut ch = CMat::zeros(6, 1);
        ch.set_column(0, &h);
        let rx = receiver_from(vec![0], vec![h.clone()]);
        let snr = 2.7;
        let sinr = instantaneous_sinr(&rx, &[ch], snr, 0, &[0]);
        let expect = snr * h.norm_squared();
        assert!((sinr - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn orthogonal_receiver_gives_zero_sinr() {
        let mut ch = CMat::zeros(4, 1);
        ch[(0, 0)] = Complex64::new(1.0, 0.0);
        let mut v = CVec::zeros(4);
        v[1] = Complex64::new(1.0, 0.0);
        let rx = receiver_from(vec![0], vec![v]);
        assert_eq!(instantaneous_sinr(&rx, &[ch], 1.0, 0, &[0]), 0.0);
    }

    #[test]
    fn extra_interferer_never_raises_sinr() {
        let mut rng = substream(2, "eval-test", 1);
        for _ in 0..50 {
            let ch = CMat::from_fn(5, 3, |_, _| complex_gaussian(&mut rng, 1.0));
            let v = CVec::from_fn(5, |_, _| complex_gaussian(&mut rng, 1.0));
            let rx = receiver_from(vec![0], vec![v]);
            let without = instantaneous_sinr(&rx, std::slice::from_ref(&ch), 1.5, 0, &[0, 1]);
            let with = instantaneous_sinr(&rx, &[ch], 1.5, 0, &[0, 1, 2]);
            assert!(with <= without + 1e-15);
        }
    }

    #[test]
    fn constant_unity_sinr_gives_one_bit() {
        let sinrs = vec![1.0; 40];
        assert!((average_rate(&sinrs).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_efficiency_applies_pilot_overhead() {
        let (se, sum) = spectral_efficiency(&[2.0, 3.0], &[false, false], 20, 200).unwrap();
        assert!((se[0] - 1.8).abs() < 1e-15);
        assert!((se[1] - 2.7).abs() < 1e-15);
        assert!((sum - 4.5).abs() < 1e-15);
    }

    #[test]
    fn zero_overhead_keeps_rates() {
        let (se, _) = spectral_efficiency(&[2.0], &[false], 0, 10).unwrap();
        assert_eq!(se[0], 2.0);
    }

    #[test]
    fn outage_user_has_zero_se() {
        let (se, sum) = spectral_efficiency(&[2.0, 5.0], &[false, true], 10, 100).unwrap();
        assert_eq!(se[1], 0.0);
        assert!((sum - 1.8).abs() < 1e-15);
    }

    #[test]
    fn overhead_at_or_above_slot_length_is_rejected() {
        assert!(spectral_efficiency(&[1.0], &[false], 10, 10).is_err());
        assert!(spectral_efficiency(&[1.0], &[false], 11, 10).is_err());
    }

    #[test]
    fn sum_se_is_permutation_invariant() {
        let rates = [0.4, 1.1, 2.2, 0.9];
        let outage = [false, true, false, false];
        let (_, sum) = spectral_efficiency(&rates, &outage, 5, 50).unwrap();
        let perm = [2usize, 0, 3, 1];
        let rates_p: Vec<f64> = perm.iter().map(|&i| rates[i]).collect();
        let outage_p: Vec<bool> = perm.iter().map(|&i| outage[i]).collect();
        let (_, sum_p) = spectral_efficiency(&rates_p, &outage_p, 5, 50).unwrap();
        assert!((sum - sum_p).abs() < 1e-15);
    }

    #[test]
    fn cdf_reference_points() {
        let cdf = empirical_cdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(cdf, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
    }

    #[test]
    fn cdf_collapses_equal_samples() {
        let cdf = empirical_cdf(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(cdf, vec![(5.0, 1.0)]);
    }

    #[test]
    fn cdf_is_nondecreasing_and_ends_at_one() {
        let mut rng = substream(3, "eval-test", 2);
        let samples: Vec<f64> = (0..200)
            .map(|_| complex_gaussian(&mut rng, 1.0).re)
            .collect();
        let cdf = empirical_cdf(&samples).unwrap();
        for w in cdf.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 <= w[1].1);
        }
        assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_samples_are_rejected() {
        assert!(empirical_cdf(&[]).is_err());
        assert!(average_rate(&[]).is_err());
        assert!(mean_and_stderr(&[]).is_err());
        assert!(median(&[]).is_err());
    }

    #[test]
    fn mean_stderr_and_median_reference_values() {
        let (mean, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((mean - 2.5).abs() < 1e-15);
        // Sample variance 5/3, stderr = sqrt(5/12).
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
    }
}
