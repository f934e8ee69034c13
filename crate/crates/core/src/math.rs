//! Floating-point helpers shared by the workload functions and the tests.

/// Absolute tolerance used for every boundary comparison.
pub const EPS: f64 = 1e-9;

/// Snaps `x` to the nearest integer when it lies within [`EPS`] of it.
#[inline]
fn snap(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= EPS).then_some(r)
}

/// `floor(x)`, treating values within [`EPS`] of an integer as that integer.
#[inline]
pub fn floor_snap(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.floor())
}

/// `ceil(x)`, treating values within [`EPS`] of an integer as that integer.
#[inline]
pub fn ceil_snap(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.ceil())
}

/// `a <= b` up to [`EPS`].
#[inline]
pub fn le(a: f64, b: f64) -> bool {
    a <= b + EPS
}

/// Returns the integer value of `x` if it is integral within [`EPS`].
#[inline]
pub fn as_integer(x: f64) -> Option<u64> {
    if x < 0.0 || !x.is_finite() {
        return None;
    }
    snap(x).map(|r| r as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_absorbs_rounding_noise() {
        assert_eq!(ceil_snap(3.0000000000004), 3.0);
        assert_eq!(ceil_snap(3.1), 4.0);
        assert_eq!(floor_snap(2.9999999999996), 3.0);
        assert_eq!(floor_snap(-0.25), -1.0);
        assert_eq!(ceil_snap(1.2 / 0.4), 3.0);
    }

    #[test]
    fn integer_detection() {
        assert_eq!(as_integer(12.0), Some(12));
        assert_eq!(as_integer(12.5), None);
        assert_eq!(as_integer(-1.0), None);
    }
}
