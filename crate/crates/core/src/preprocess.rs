use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{rng_from_seed, TimeSeries};
use crate::numerics::DenseMatrix;

/// Per-channel first difference `y_{t+1} − y_t`; one step shorter.
pub fn first_difference(y: &TimeSeries) -> Result<TimeSeries> {
    let (n, p) = y.values().shape();
    if n < 2 {
        return Err(Error::HorizonTooShort { len: n, order: 1 });
    }
    let src = y.values().as_slice();
    let data: Vec<f64> = src[p..].iter().zip(src).map(|(b, a)| b - a).collect();
    let mut out = TimeSeries::new(DenseMatrix::new(n - 1, p, data)?)?;
    out.sample_rate_hz = y.sample_rate_hz;
    out.channel_names = y.channel_names.clone();
    Ok(out)
}

/// Replaces steps `t_start..=t_end` of `channel` with i.i.d. `N(0, std²)`
/// draws. Channel and steps are 1-based.
pub fn inject_artefact(
    y: &TimeSeries,
    channel: usize,
    t_start: usize,
    t_end: usize,
    std: f64,
    seed: u64,
) -> Result<TimeSeries> {
    let (n, p) = y.values().shape();
    if channel == 0 || channel > p {
        return Err(Error::IndexOutOfRange(format!(
            "channel {channel} of a {p}-channel series"
        )));
    }
    if t_start == 0 || t_start > t_end || t_end > n {
        return Err(Error::IndexOutOfRange(format!(
            "window {t_start}..={t_end} in a series of {n} steps"
        )));
    }
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "artefact std must be non-negative, got {std}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = y.values().clone();
    for t in t_start - 1..t_end {
        let e: f64 = StandardNormal.sample(&mut rng);
        values[(t, channel - 1)] = std * e;
    }
    let mut out = TimeSeries::new(values)?;
    out.sample_rate_hz = y.sample_rate_hz;
    out.channel_names = y.channel_names.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_example() {
        let y = TimeSeries::scalar(&[1.0, 3.0, 6.0]).unwrap();
        assert_eq!(
            first_difference(&y).unwrap().scalar_values().unwrap(),
            &[2.0, 3.0]
        );
        let c = TimeSeries::scalar(&[4.0; 5]).unwrap();
        assert!(first_difference(&c)
            .unwrap()
            .scalar_values()
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(first_difference(&TimeSeries::scalar(&[1.0]).unwrap()).is_err());
    }

    #[test]
    fn multichannel_difference() {
        let y = TimeSeries::new(
            DenseMatrix::from_rows(&[[1.0, 10.0], [2.0, 8.0], [4.0, 9.0]]).unwrap(),
        )
        .unwrap();
        let d = first_difference(&y).unwrap();
        assert_eq!(d.values().as_slice(), &[1.0, -2.0, 2.0, 1.0]);
    }

    #[test]
    fn zero_std_zeroes_window() {
        let y = TimeSeries::scalar(&[1.0; 6]).unwrap();
        let a = inject_artefact(&y, 1, 2, 4, 0.0, 7).unwrap();
        assert_eq!(a.scalar_values().unwrap(), &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn window_bounds_checked() {
        let y = TimeSeries::scalar(&[1.0; 6]).unwrap();
        assert!(matches!(
            inject_artefact(&y, 1, 0, 3, 1.0, 0),
            Err(Error::IndexOutOfRange(_))
        ));
        assert!(matches!(
            inject_artefact(&y, 1, 3, 7, 1.0, 0),
            Err(Error::IndexOutOfRange(_))
        ));
        assert!(matches!(
            inject_artefact(&y, 2, 1, 3, 1.0, 0),
            Err(Error::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn other_channels_untouched() {
        let y =
            TimeSeries::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap())
                .unwrap();
        let a = inject_artefact(&y, 2, 1, 3, 1.0, 3).unwrap();
        assert_eq!(a.channel(0), y.channel(0));
        assert_ne!(a.channel(1), y.channel(1));
        assert_eq!(a, inject_artefact(&y, 2, 1, 3, 1.0, 3).unwrap());
    }
}
