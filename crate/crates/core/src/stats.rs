//! Point-biserial correlation of daily sentiment against price direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{label_directions, label_map, PriceBar};
use crate::sentiment::{AggregateMode, DailySentiment};
use crate::{Error, Result};

/// Pearson correlation of continuous `x` with 0/1 `y`, computed from class
/// means and the population standard deviation of `x`.
pub fn point_biserial(x: &[f64], y: &[u8]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two pairs".into()));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::Degenerate("labels contain a single class".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Degenerate("continuous variable is constant".into()));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (mut sum1, mut sum0) = (0.0, 0.0);
    for (&v, &c) in x.iter().zip(y) {
        if c == 1 {
            sum1 += v;
        } else {
            sum0 += v;
        }
    }
    let (m1, m0) = (sum1 / n1 as f64, sum0 / n0 as f64);
    let (p, q) = (n1 as f64 / n, n0 as f64 / n);
    Ok(((m1 - m0) / s * (p * q).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub delay: usize,
    /// `None` when the delay had too few usable pairs.
    pub r_pb: Option<f64>,
    pub n: usize,
    pub mode: AggregateMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// One report per delay, in the order given. Sentiment days without a price
/// label at that delay (weekends, the last `delay` trading days) are left
/// out of that delay's sample.
pub fn delay_sweep(
    daily: &[DailySentiment],
    bars: &[PriceBar],
    delays: &[usize],
    mode: AggregateMode,
) -> Vec<CorrelationReport> {
    delays
        .par_iter()
        .map(|&delay| {
            let unavailable = |n, msg: String| CorrelationReport {
                delay,
                r_pb: None,
                n,
                mode,
                warning: Some(msg),
            };
            let labels = match label_directions(bars, delay) {
                Ok(l) => label_map(&l),
                Err(e) => return unavailable(0, e.to_string()),
            };
            let (x, y): (Vec<f64>, Vec<u8>) = daily
                .iter()
                .filter_map(|d| labels.get(&d.date).map(|&l| (d.value(mode), l)))
                .unzip();
            match point_biserial(&x, &y) {
                Ok(r) => CorrelationReport {
                    delay,
                    r_pb: Some(r),
                    n: x.len(),
                    mode,
                    warning: None,
                },
                Err(e) => unavailable(x.len(), e.to_string()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// |skewness| or |excess kurtosis| beyond these gets a warning.
pub const SKEW_LIMIT: f64 = 1.0;
pub const KURTOSIS_LIMIT: f64 = 2.0;

/// Population moments plus a rough normality warning. Nothing is rejected.
pub fn moments(values: &[f64]) -> Result<Moments> {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(
            "moments need at least two finite values".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let central = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let m2 = central(2);
    if m2 == 0.0 {
        return Err(Error::Degenerate("values are constant".into()));
    }
    let skewness = central(3) / m2.powf(1.5);
    let excess_kurtosis = central(4) / (m2 * m2) - 3.0;
    let warning = (skewness.abs() > SKEW_LIMIT || excess_kurtosis.abs() > KURTOSIS_LIMIT).then(|| {
        format!("distribution looks non-normal (skewness {skewness:.3}, excess kurtosis {excess_kurtosis:.3})")
    });
    Ok(Moments {
        n: values.len(),
        mean,
        std_dev: m2.sqrt(),
        skewness,
        excess_kurtosis,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};

    use super::*;

    fn pearson(x: &[f64], y: &[u8]) -> f64 {
        let y: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn examples() {
        assert!((point_biserial(&[-1.0, 1.0], &[0, 1]).unwrap() - 1.0).abs() < 1e-15);
        let r = point_biserial(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]).unwrap();
        assert!((r - 0.8944271909999159).abs() < 1e-12);
        assert!((r - pearson(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1])).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            point_biserial(&[1.0, 2.0, 3.0], &[1, 1, 1]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            point_biserial(&[2.0, 2.0], &[0, 1]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            point_biserial(&[1.0], &[0, 1]),
            Err(Error::Dimension(_))
        ));
        assert!(point_biserial(&[1.0, 2.0], &[0, 2]).is_err());
        assert!(point_biserial(&[1.0], &[1]).is_err());
    }

    #[test]
    fn matches_pearson_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let n = rng.gen_range(4..=200);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            y[0] = 0;
            y[1] = 1;
            let r = point_biserial(&x, &y).unwrap();
            assert!((r - pearson(&x, &y)).abs() < 1e-12);
        }
    }

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 1, 4).unwrap() + chrono::Days::new(i)
    }

    #[test]
    fn synthetic_delay_two_peaks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut close = 100.0;
        let bars: Vec<PriceBar> = (0..80)
            .map(|i| {
                close += rng.gen_range(-1.0..1.0);
                PriceBar {
                    date: day(i),
                    close,
                }
            })
            .collect();
        let at2 = label_map(&label_directions(&bars, 2).unwrap());
        let daily: Vec<DailySentiment> = bars
            .iter()
            .filter_map(|b| at2.get(&b.date).map(|&l| (b.date, l)))
            .map(|(date, l)| {
                let mag = rng.gen_range(0.05..0.5);
                let v = if l == 1 { mag } else { -mag };
                DailySentiment {
                    date,
                    mean_compound: v,
                    weighted_compound: v,
                    tweet_count: 1,
                }
            })
            .collect();
        let delays: Vec<usize> = (1..=7).collect();
        let reports = delay_sweep(&daily, &bars, &delays, AggregateMode::Simple);
        assert_eq!(reports.iter().map(|r| r.delay).collect::<Vec<_>>(), delays);
        let r2 = reports[1].r_pb.unwrap();
        for r in reports.iter().filter(|r| r.delay != 2) {
            assert!(
                r2 > r.r_pb.unwrap(),
                "delay {} has {:?} >= {r2}",
                r.delay,
                r.r_pb
            );
        }
    }

    #[test]
    fn sweep_flags_unavailable_delays() {
        let bars: Vec<PriceBar> = (0..4)
            .map(|i| PriceBar {
                date: day(i),
                close: 1.0 + i as f64,
            })
            .collect();
        let daily: Vec<DailySentiment> = (0..4)
            .map(|i| DailySentiment {
                date: day(i),
                mean_compound: i as f64,
                weighted_compound: 0.0,
                tweet_count: 1,
            })
            .collect();
        let reports = delay_sweep(&daily, &bars, &[1, 5], AggregateMode::Simple);
        assert_eq!(reports.len(), 2);
        // monotone prices give a single class
        assert!(reports[0].r_pb.is_none() && reports[0].warning.is_some());
        assert_eq!(reports[0].n, 3);
        assert!(reports[1].r_pb.is_none());
    }

    #[test]
    fn moments_of_symmetric_data() {
        let m = moments(&[-1.0, 0.0, 1.0]).unwrap();
        assert!(m.skewness.abs() < 1e-15);
        assert!((m.excess_kurtosis - -1.5).abs() < 1e-12);
        assert!(m.warning.is_none());
        let skewed = moments(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0]).unwrap();
        assert!(skewed.warning.is_some());
        assert!(moments(&[1.0, 1.0]).is_err());
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
            (4usize..100).prop_flat_map(|n| {
                (
                    prop::collection::vec(-100.0f64..100.0, n),
                    prop::collection::vec(0u8..=1, n),
                )
            })
        }

        proptest! {
            #[test]
            fn sign_flip_and_affine((x, mut y) in instance(), a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], b in -10.0f64..10.0) {
                y[0] = 0;
                y[1] = 1;
                prop_assume!(x.iter().any(|&v| v != x[0]));
                let r = point_biserial(&x, &y).unwrap();
                let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
                prop_assert!((point_biserial(&x, &flipped).unwrap() + r).abs() < 1e-12);
                let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((point_biserial(&ax, &y).unwrap() - a.signum() * r).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
