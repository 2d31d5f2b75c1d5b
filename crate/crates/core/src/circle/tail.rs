use crate::quad::{cumulative_trapezoid, linear_fit};
use crate::{Certificate, Error, Result, Verdict};

/// Running integral of `e^{w·s}·value(s)` with a log-slope fit of the
/// integrand over the final unit interval in `s`.
///
/// Metrics: `integral`, `tail_slope`, `tail_fraction` (share of the integral
/// accumulated over that final interval) and `final_integrand`.
pub fn weighted_tail_integral(s: &[f64], values: &[f64], weight_exponent: f64) -> Result<Certificate> {
    if s.len() != values.len() {
        return Err(Error::Shape(format!("{} times for {} values", s.len(), values.len())));
    }
    if s.len() < 8 {
        return Err(Error::InsufficientSamples { needed: 8, got: s.len() });
    }
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("sample times must be strictly increasing".into()));
    }
    let integrand: Vec<f64> = s.iter().zip(values).map(|(s, v)| (weight_exponent * s).exp() * v).collect();
    let cumulative = cumulative_trapezoid(s, &integrand);
    let total = *cumulative.last().unwrap();
    let s_end = *s.last().unwrap();
    let start = s.iter().position(|&x| x >= s_end - 1.0).unwrap_or(0).min(s.len() - 3);

    let (xs, ys): (Vec<f64>, Vec<f64>) = s[start..]
        .iter()
        .zip(&integrand[start..])
        .filter(|(_, v)| v.abs() > 0.0)
        .map(|(x, v)| (*x, v.abs().ln()))
        .unzip();
    let slope = if xs.len() >= 2 { linear_fit(&xs, &ys).0 } else { f64::NEG_INFINITY };
    let tail = total - cumulative[start];
    let tail_fraction = if total.abs() > 0.0 { tail / total } else { 0.0 };

    let verdict = if slope >= 0.0 { Verdict::Growing } else { Verdict::ConvergentSoFar };
    Ok(Certificate::new("weighted-tail-integral", verdict)
        .with_metric("integral", total)
        .with_metric("tail_slope", slope)
        .with_metric("tail_fraction", tail_fraction)
        .with_metric("final_integrand", *integrand.last().unwrap())
        .with_metric("weight_exponent", weight_exponent)
        .with_samples("s", s.to_vec())
        .with_samples("integrand", integrand)
        .with_samples("cumulative", cumulative))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn decaying_exponential_is_convergent() {
        let s = grid(0.0, 5.0, 101);
        let v: Vec<f64> = s.iter().map(|x| (-3.0 * x).exp()).collect();
        let c = weighted_tail_integral(&s, &v, 2.0).unwrap();
        assert_eq!(c.verdict, Verdict::ConvergentSoFar);
        assert!((c.metric("tail_slope") + 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_with_positive_weight_is_growing() {
        let s = grid(0.0, 3.0, 31);
        let c = weighted_tail_integral(&s, &vec![1.0; 31], 2.0).unwrap();
        assert_eq!(c.verdict, Verdict::Growing);
    }

    #[test]
    fn polynomial_times_exponential_slope() {
        let s = grid(2.0, 8.0, 241);
        let v: Vec<f64> = s.iter().map(|x| x * (-2.0 * x).exp()).collect();
        let c = weighted_tail_integral(&s, &v, 0.0).unwrap();
        let sbar = 7.5;
        let expected = -2.0 + 1.0 / sbar;
        assert!(((c.metric("tail_slope") - expected) / expected).abs() < 0.05);
    }

    #[test]
    fn zero_series_is_convergent() {
        let s = grid(0.0, 3.0, 10);
        let c = weighted_tail_integral(&s, &[0.0; 10], 2.0).unwrap();
        assert_eq!(c.verdict, Verdict::ConvergentSoFar);
        assert_eq!(c.metric("integral"), 0.0);
    }

    #[test]
    fn too_few_samples() {
        let s = grid(0.0, 1.0, 7);
        assert!(matches!(
            weighted_tail_integral(&s, &[1.0; 7], 0.0),
            Err(Error::InsufficientSamples { needed: 8, got: 7 })
        ));
    }
}
