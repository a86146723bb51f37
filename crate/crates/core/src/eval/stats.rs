use crate::error::{Error, Result};
use crate::fbl::inv_q;

/// Empirical CDF at each distinct sample value.
pub fn ecdf_points(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Domain("ECDF of an empty sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("ECDF input contains NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    Ok(out)
}

pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standard-normal quantile at plotting position `(i − 0.5)/n`, 1-based.
pub fn normal_plotting_quantile(i: usize, n: usize) -> f64 {
    let u = (i as f64 - 0.5) / n as f64;
    inv_q(1.0 - u).expect("plotting positions lie strictly inside (0, 1)")
}

/// `(theoretical, sample)` pairs: z-scored order statistics against
/// standard-normal quantiles.
pub fn qq_points(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Domain(format!("Q-Q needs at least 2 samples, got {n}")));
    }
    let (mean, std) = mean_std(samples);
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::Domain("Q-Q of a zero-variance sample".into()));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / std).collect();
    z.sort_by(f64::total_cmp);
    Ok(z.into_iter().enumerate().map(|(i, v)| (normal_plotting_quantile(i + 1, n), v)).collect())
}

/// Matched quantiles of a generated sample against a reference sample,
/// both standardized with the reference mean and std so that a scale
/// mismatch shows up as a slope away from 1.
///
/// Returns `(reference, generated)` pairs at `points` plotting positions.
pub fn qq_two_sample(reference: &[f64], generated: &[f64], points: usize) -> Result<Vec<(f64, f64)>> {
    if reference.len() < 2 || generated.is_empty() || points == 0 {
        return Err(Error::Domain("two-sample Q-Q needs non-empty samples".into()));
    }
    let (mean, std) = mean_std(reference);
    if !(std > 0.0) {
        return Err(Error::Domain("reference sample has zero variance".into()));
    }
    let mut r = reference.to_vec();
    let mut g = generated.to_vec();
    r.sort_by(f64::total_cmp);
    g.sort_by(f64::total_cmp);
    Ok((1..=points)
        .map(|i| {
            let u = (i as f64 - 0.5) / points as f64;
            ((quantile_sorted(&r, u) - mean) / std, (quantile_sorted(&g, u) - mean) / std)
        })
        .collect())
}

/// Linear-interpolated quantile of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], u: f64) -> f64 {
    let pos = u * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `y` on `x`.
pub fn regression_slope(points: &[(f64, f64)]) -> Result<f64> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("regression with constant x".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ecdf_examples() {
        let e = ecdf_points(&[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(e, vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]);
        assert_eq!(ecdf_points(&[3.5]).unwrap(), vec![(3.5, 1.0)]);
        assert!(ecdf_points(&[]).is_err());
    }

    #[test]
    fn qq_on_exact_quantiles_is_identity() {
        let n = 50;
        let q: Vec<f64> = (1..=n).map(|i| normal_plotting_quantile(i, n)).collect();
        // the plotting quantiles are not exactly unit-variance, so rescale
        let (m, s) = mean_std(&q);
        for (t, z) in qq_points(&q).unwrap() {
            assert!((z - (t - m) / s).abs() < 1e-9);
        }
    }

    #[test]
    fn qq_symmetric_pair() {
        let p = qq_points(&[1.0, -1.0]).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p[0].0 + p[1].0).abs() < 1e-12 && (p[0].1 + p[1].1).abs() < 1e-12);
        assert!(qq_points(&[2.0, 2.0, 2.0]).is_err());
        assert!(qq_points(&[2.0]).is_err());
    }

    #[test]
    fn two_sample_slope_detects_scale() {
        let r: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let same = qq_two_sample(&r, &r, 99).unwrap();
        assert!((regression_slope(&same).unwrap() - 1.0).abs() < 1e-12);
        let wide: Vec<f64> = r.iter().map(|x| 3.0 + 2.0 * x).collect();
        let s = regression_slope(&qq_two_sample(&r, &wide, 99).unwrap()).unwrap();
        assert!((s - 2.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn ecdf_is_monotone_and_ends_at_one(xs in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let e = ecdf_points(&xs).unwrap();
            prop_assert!(e.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            prop_assert_eq!(e.last().unwrap().1, 1.0);
        }

        #[test]
        fn qq_is_affine_invariant(
            xs in prop::collection::vec(-10f64..10.0, 3..60),
            a in 0.1f64..50.0,
            b in -100f64..100.0,
        ) {
            let (_, s) = mean_std(&xs);
            prop_assume!(s > 1e-3);
            let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let p = qq_points(&xs).unwrap();
            let q = qq_points(&ys).unwrap();
            for (u, v) in p.iter().zip(&q) {
                prop_assert_eq!(u.0, v.0);
                prop_assert!((u.1 - v.1).abs() < 1e-8);
            }
        }
    }
}
