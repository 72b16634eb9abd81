use crate::error::{Error, Result};

/// Sample autocorrelations and partial autocorrelations with 95% bands.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    /// `acf[l]` for `l = 0..=max_lag`; `acf[0] == 1`.
    pub acf: Vec<f64>,
    /// `pacf[l]` for `l = 0..=max_lag`; `pacf[0] == 1` by convention.
    pub pacf: Vec<f64>,
    /// Half-width of the white-noise band, `1.96 / sqrt(T)`.
    pub band: f64,
}

impl Correlogram {
    /// Share of lags `1..=max_lag` whose ACF lies outside the band.
    pub fn acf_outside_share(&self) -> f64 {
        let lags = &self.acf[1..];
        lags.iter().filter(|r| r.abs() > self.band).count() as f64 / lags.len() as f64
    }

    pub fn pacf_outside_share(&self) -> f64 {
        let lags = &self.pacf[1..];
        lags.iter().filter(|r| r.abs() > self.band).count() as f64 / lags.len() as f64
    }
}

/// ACF by the usual biased estimator; PACF by Durbin–Levinson.
pub fn acf_pacf(series: &[f64], max_lag: usize) -> Result<Correlogram> {
    let t = series.len();
    if t <= max_lag + 1 {
        return Err(Error::Insufficient(format!(
            "correlogram to lag {max_lag} needs more than {} points, got {t}",
            max_lag + 1
        )));
    }
    let mean = series.iter().sum::<f64>() / t as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if !(c0 > 0.0) {
        return Err(Error::Numerical("constant series has no autocorrelation".into()));
    }
    let acf: Vec<f64> = (0..=max_lag)
        .map(|l| {
            if l == 0 {
                return 1.0;
            }
            dev[l..].iter().zip(&dev[..t - l]).map(|(a, b)| a * b).sum::<f64>() / c0
        })
        .collect();

    let mut pacf = vec![1.0; max_lag + 1];
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = acf[k] - phi.iter().enumerate().map(|(j, p)| p * acf[k - 1 - j]).sum::<f64>();
        let kk = num / v;
        let mut next: Vec<f64> = phi
            .iter()
            .enumerate()
            .map(|(j, p)| p - kk * phi[phi.len() - 1 - j])
            .collect();
        next.push(kk);
        phi = next;
        v *= 1.0 - kk * kk;
        pacf[k] = kk;
    }
    Ok(Correlogram {
        acf,
        pacf,
        band: 1.96 / (t as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_zero_is_one() {
        let c = acf_pacf(&[1.0, 3.0, 2.0, 5.0, 4.0], 2).unwrap();
        assert_eq!(c.acf[0], 1.0);
    }

    #[test]
    fn pacf_lag_one_equals_acf_lag_one() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let c = acf_pacf(&x, 5).unwrap();
        assert!((c.pacf[1] - c.acf[1]).abs() < 1e-15);
        // Closed form for lag 2: (r2 - r1^2) / (1 - r1^2).
        let (r1, r2) = (c.acf[1], c.acf[2]);
        assert!((c.pacf[2] - (r2 - r1 * r1) / (1.0 - r1 * r1)).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(acf_pacf(&[2.0; 10], 3).is_err());
        assert!(acf_pacf(&[1.0, 2.0, 3.0], 2).is_err());
    }
}
