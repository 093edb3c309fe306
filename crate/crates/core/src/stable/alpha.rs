use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::special::sin_pi;

/// Stability index of a one-sided stable law, `0 < alpha < 1`, with the
/// constant `c_alpha = sin(pi alpha) / pi` cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alpha {
    alpha: f64,
    c_alpha: f64,
}

impl Alpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self {
            alpha,
            c_alpha: sin_pi(alpha) / PI,
        })
    }

    pub fn half() -> Self {
        Self::new(0.5).expect("1/2 is a valid index")
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.alpha
    }

    /// `sin(pi alpha) / pi`
    #[inline]
    pub fn c(&self) -> f64 {
        self.c_alpha
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(Alpha::new(bad), Err(Error::InvalidAlpha(_))));
        }
    }

    #[test]
    fn caches_c_alpha() {
        for a in [0.1, 0.3, 0.5, 0.7, 0.99] {
            let alpha = Alpha::new(a).unwrap();
            assert!(alpha.c() > 0.0);
            assert!((alpha.c() - (PI * a).sin() / PI).abs() < 1e-16);
        }
        assert_eq!(Alpha::half().c(), 1.0 / PI);
    }
}
