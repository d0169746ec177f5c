use super::ImuError;

/// Fewest non-overlapping cluster pairs accepted for one averaging time.
const MIN_CLUSTER_PAIRS: usize = 9;

/// Overlapping Allan deviation of a uniformly sampled rate signal.
///
/// Each `tau` is rounded to a whole number of samples; the returned pairs
/// carry the effective averaging time and are sorted by it.
pub fn allan_deviation(values: &[f64], rate: f64, taus: &[f64]) -> Result<Vec<(f64, f64)>, ImuError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(ImuError::ParameterError(format!("sample rate {rate}")));
    }
    let n = values.len();
    if n == 0 {
        return Err(ImuError::InsufficientData("empty series".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let dt = 1.0 / rate;
    // integrated phase x_k, k = 0..=n
    let mut x = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    x.push(0.0);
    for v in values {
        acc += (v - mean) * dt;
        x.push(acc);
    }

    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ImuError::ParameterError(format!("averaging time {tau}")));
        }
        let m = ((tau * rate).round() as usize).max(1);
        let pairs = (n / m).saturating_sub(1);
        if pairs < MIN_CLUSTER_PAIRS {
            return Err(ImuError::InsufficientData(format!(
                "tau {tau} s leaves {pairs} cluster pairs, need {MIN_CLUSTER_PAIRS}"
            )));
        }
        let tau_m = m as f64 * dt;
        let terms = n + 1 - 2 * m;
        let sum: f64 = (0..terms)
            .map(|k| {
                let d = x[k + 2 * m] - 2.0 * x[k + m] + x[k];
                d * d
            })
            .sum();
        let var = sum / (2.0 * tau_m * tau_m * terms as f64);
        out.push((tau_m, var.sqrt()));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Log-spaced averaging times, `per_decade` points per decade from `min` to `max`.
pub fn decade_taus(min: f64, max: f64, per_decade: usize) -> Vec<f64> {
    if !(min > 0.0 && max >= min) || per_decade == 0 {
        return Vec::new();
    }
    let decades = (max / min).log10();
    let steps = (decades * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|i| min * 10f64.powf(i as f64 / per_decade as f64))
        .collect()
}
