use crate::error::{Error, Result};

/// Upsamples frame values to the sample grid.
///
/// Frame `m` is anchored at sample `m * hop + hop / 2`. Samples between two
/// anchors are linearly interpolated, samples outside the first/last anchor
/// hold the edge value.
pub fn interpolate_to_samples(
    frame_values: &[f64],
    hop_size: usize,
    out_len: usize,
) -> Result<Vec<f64>> {
    if frame_values.is_empty() {
        return Err(Error::invalid("cannot interpolate an empty frame sequence"));
    }
    if hop_size == 0 {
        return Err(Error::invalid("hop size must be positive"));
    }
    if out_len > frame_values.len() * hop_size {
        return Err(Error::invalid(format!(
            "out_len {out_len} exceeds {} frames x hop {hop_size}",
            frame_values.len()
        )));
    }
    let hop = hop_size as f64;
    let first = hop / 2.0;
    let last_frame = frame_values.len() - 1;
    let out = (0..out_len)
        .map(|n| {
            let pos = (n as f64 - first) / hop;
            if pos <= 0.0 {
                return frame_values[0];
            }
            let m = pos.floor() as usize;
            if m >= last_frame {
                return frame_values[last_frame];
            }
            let (a, b) = (frame_values[m], frame_values[m + 1]);
            if a == b {
                return a;
            }
            let t = pos - m as f64;
            (1.0 - t) * a + t * b
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let y = interpolate_to_samples(&[5.0, 5.0, 5.0], 4, 12).unwrap();
        assert_eq!(y, vec![5.0; 12]);
    }

    #[test]
    fn midpoint_between_anchors() {
        // anchors at samples 2 and 6
        let y = interpolate_to_samples(&[0.0, 4.0], 4, 8).unwrap();
        assert_eq!(y[4], 2.0);
        assert_eq!(y[2], 0.0);
        assert_eq!(y[6], 4.0);
        // constant extrapolation at both ends
        assert_eq!(y[0], 0.0);
        assert_eq!(y[7], 4.0);
    }

    #[test]
    fn ramp_is_monotone() {
        let y = interpolate_to_samples(&[0.0, 1.0, 2.0, 3.0], 256, 1024).unwrap();
        assert_eq!(y.len(), 1024);
        assert!(y.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(y[128], 0.0);
        assert_eq!(y[128 + 3 * 256], 3.0);
    }

    #[test]
    fn errors() {
        assert!(interpolate_to_samples(&[], 4, 0).is_err());
        assert!(interpolate_to_samples(&[1.0], 0, 0).is_err());
        assert!(interpolate_to_samples(&[1.0, 2.0], 4, 9).is_err());
        assert_eq!(
            interpolate_to_samples(&[1.0], 4, 0).unwrap(),
            Vec::<f64>::new()
        );
    }

    proptest::proptest! {
        #[test]
        fn output_within_input_range(
            vals in proptest::collection::vec(-100.0f64..100.0, 1..20),
            hop in 1usize..64,
        ) {
            let len = vals.len() * hop;
            let y = interpolate_to_samples(&vals, hop, len).unwrap();
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            proptest::prop_assert_eq!(y.len(), len);
            for v in y {
                proptest::prop_assert!(v >= lo && v <= hi);
            }
        }
    }
}
