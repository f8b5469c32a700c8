//! Signed Q24.8 fixed point: 32-bit two's complement, 8 fractional bits.

pub const FRACTION_BITS: u32 = 8;
pub const SCALE: f64 = (1u32 << FRACTION_BITS) as f64;

/// Smallest representable value, −2²³.
pub const MIN: f64 = i32::MIN as f64 / SCALE;
/// Largest representable value, 2²³ − 1/256.
pub const MAX: f64 = i32::MAX as f64 / SCALE;

pub fn fixed_to_real(word: u32) -> f64 {
    word as i32 as f64 / SCALE
}

/// Rounds to the nearest 1/256 (ties away from zero) and saturates.
pub fn real_to_fixed(x: f64) -> u32 {
    if x.is_nan() {
        return 0;
    }
    let n = (x * SCALE).round().clamp(i32::MIN as f64, i32::MAX as f64) as i32;
    n as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spot_values() {
        assert_eq!(fixed_to_real(0x0000_0000), 0.0);
        assert_eq!(fixed_to_real(0x0000_0100), 1.0);
        assert_eq!(fixed_to_real(0xFFFF_FF80), -0.5);
        assert_eq!(fixed_to_real(0x8000_0000), MIN);
        assert_eq!(fixed_to_real(0x7FFF_FFFF), MAX);
        assert_eq!(real_to_fixed(0.0), 0x0000_0000);
        assert_eq!(real_to_fixed(-0.5), 0xFFFF_FF80);
    }

    #[test]
    fn rounding_and_saturation() {
        // 1/512 is exactly half a step: ties go away from zero
        assert_eq!(real_to_fixed(1.0 / 512.0), 1);
        assert_eq!(real_to_fixed(-1.0 / 512.0), (-1i32) as u32);
        assert_eq!(real_to_fixed(0.9 / 512.0), 0);
        assert_eq!(real_to_fixed(1e12), 0x7FFF_FFFF);
        assert_eq!(real_to_fixed(-1e12), 0x8000_0000);
        assert_eq!(real_to_fixed(f64::INFINITY), 0x7FFF_FFFF);
        assert_eq!(real_to_fixed(f64::NAN), 0);
    }

    proptest! {
        #[test]
        fn word_roundtrip(w in any::<u32>()) {
            prop_assert_eq!(real_to_fixed(fixed_to_real(w)), w);
        }

        #[test]
        fn representable_values_roundtrip(n in any::<i32>()) {
            let x = n as f64 / 256.0;
            prop_assert_eq!(fixed_to_real(real_to_fixed(x)), x);
        }

        #[test]
        fn quantization_error_is_half_step(x in -8.0e6f64..8.0e6) {
            let err = (fixed_to_real(real_to_fixed(x)) - x).abs();
            prop_assert!(err <= 0.5 / SCALE);
        }
    }
}
