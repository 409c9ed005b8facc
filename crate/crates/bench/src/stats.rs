//! Censored order statistics and normalized anytime curves.

/// Linear-interpolation quantile of already sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quartiles `(q1, median, q3)` of run times censored at `limit`.
///
/// Values above the limit (and unsolved runs recorded as the limit) are
/// clamped, so no statistic exceeds it. `None` for an empty sample.
pub fn censored_quartiles(times: &[f64], limit: f64) -> Option<(f64, f64, f64)> {
    if times.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = times.iter().map(|t| t.min(limit)).collect();
    v.sort_by(f64::total_cmp);
    Some((quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75)))
}

pub fn censored_median(times: &[f64], limit: f64) -> Option<f64> {
    censored_quartiles(times, limit).map(|(_, m, _)| m)
}

/// `(t, (cost_t - cost*) / (cost_max - cost*))` along an incumbent trace.
///
/// `None` when `cost_max <= cost*`: the instance carries no anytime signal and
/// is left out of mean curves.
pub fn normalized_anytime_error(trace: &[(f64, f64)], cost_star: f64, cost_max: f64) -> Option<Vec<(f64, f64)>> {
    let span = cost_max - cost_star;
    if span.is_nan() || span <= 0.0 {
        return None;
    }
    Some(
        trace
            .iter()
            .map(|&(t, c)| (t, ((c - cost_star) / span).clamp(0.0, 1.0)))
            .collect(),
    )
}

/// Value of a step curve at time `t`; 1 before the first point.
pub fn step_value(curve: &[(f64, f64)], t: f64) -> f64 {
    curve.iter().take_while(|(s, _)| *s <= t).last().map_or(1.0, |&(_, e)| e)
}

/// Pointwise mean of step curves on a time grid.
pub fn mean_curve(curves: &[Vec<(f64, f64)>], grid: &[f64]) -> Vec<(f64, f64)> {
    if curves.is_empty() {
        return Vec::new();
    }
    grid.iter()
        .map(|&t| (t, curves.iter().map(|c| step_value(c, t)).sum::<f64>() / curves.len() as f64))
        .collect()
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || hi.is_nan() || hi <= lo || lo <= 0.0 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_with_a_censored_run() {
        assert_eq!(censored_median(&[1.0, 2.0, 900.0], 900.0), Some(2.0));
        assert_eq!(censored_median(&[1000.0, 2000.0], 900.0), Some(900.0));
        assert_eq!(censored_median(&[], 900.0), None);
        assert_eq!(censored_median(&[1.0, 2.0, 3.0, 4.0], 900.0), Some(2.5));
    }

    #[test]
    fn anytime_examples() {
        let c = normalized_anytime_error(&[(1.0, 10.0), (2.0, 4.0)], 4.0, 10.0).unwrap();
        assert_eq!(c, vec![(1.0, 1.0), (2.0, 0.0)]);
        let c = normalized_anytime_error(&[(0.5, 4.0)], 4.0, 10.0).unwrap();
        assert!(c.iter().all(|&(_, e)| e == 0.0));
        assert!(normalized_anytime_error(&[(1.0, 4.0)], 4.0, 4.0).is_none());
    }

    #[test]
    fn mean_of_step_curves() {
        let a = vec![(1.0, 1.0), (2.0, 0.0)];
        let b = vec![(0.5, 0.0)];
        let m = mean_curve(&[a, b], &[0.1, 1.0, 3.0]);
        assert_eq!(m, vec![(0.1, 1.0), (1.0, 0.5), (3.0, 0.0)]);
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(0.01, 100.0, 5);
        assert!((g[0] - 0.01).abs() < 1e-12 && (g[4] - 100.0).abs() < 1e-9);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }
}
