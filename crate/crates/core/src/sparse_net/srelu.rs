use serde::{Deserialize, Serialize};

/// Learnable parameters of an S-shaped rectified linear unit.
///
/// Below `t_left` the unit has slope `a_left`, above `t_right` slope
/// `a_right`, and it is the identity in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SreluParams {
    pub t_left: f64,
    pub a_left: f64,
    pub t_right: f64,
    pub a_right: f64,
}

impl SreluParams {
    /// Plain ReLU: `(t_left, a_left, t_right, a_right) = (0, 0, 1, 1)`.
    pub const RELU: Self = Self {
        t_left: 0.0,
        a_left: 0.0,
        t_right: 1.0,
        a_right: 1.0,
    };

    pub fn new(t_left: f64, a_left: f64, t_right: f64, a_right: f64) -> Self {
        Self {
            t_left,
            a_left,
            t_right,
            a_right,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.t_left, self.a_left, self.t_right, self.a_right]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        Self::new(p[0], p[1], p[2], p[3])
    }
}

impl Default for SreluParams {
    fn default() -> Self {
        Self::RELU
    }
}

#[inline]
pub fn srelu(x: f64, p: &SreluParams) -> f64 {
    if x >= p.t_right {
        p.t_right + p.a_right * (x - p.t_right)
    } else if x > p.t_left {
        x
    } else {
        p.t_left + p.a_left * (x - p.t_left)
    }
}

/// Derivatives of the unit at `x`: `(d/dx, d/dt_left, d/da_left, d/dt_right, d/da_right)`.
#[inline]
pub(crate) fn srelu_partials(x: f64, p: &SreluParams) -> (f64, [f64; 4]) {
    if x >= p.t_right {
        (p.a_right, [0.0, 0.0, 1.0 - p.a_right, x - p.t_right])
    } else if x > p.t_left {
        (1.0, [0.0; 4])
    } else {
        (p.a_left, [1.0 - p.a_left, x - p.t_left, 0.0, 0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_init_behaviour() {
        let p = SreluParams::RELU;
        assert_eq!(srelu(-3.0, &p), 0.0);
        assert_eq!(srelu(-5.0, &p), 0.0);
        assert_eq!(srelu(0.5, &p), 0.5);
        assert_eq!(srelu(2.0, &p), 2.0);
    }

    #[test]
    fn general_parameters() {
        let p = SreluParams::new(-1.0, 0.5, 2.0, 0.25);
        assert_eq!(srelu(-3.0, &p), -2.0);
        assert_eq!(srelu(4.0, &p), 2.5);
        assert_eq!(srelu(0.3, &p), 0.3);
        // continuous at both hinges
        assert_eq!(srelu(-1.0, &p), -1.0);
        assert_eq!(srelu(2.0, &p), 2.0);
    }

    #[test]
    fn partials_match_finite_differences() {
        let p = SreluParams::new(-0.7, 0.3, 1.2, 0.6);
        let h = 1e-6;
        for &x in &[-2.0, -0.1, 0.4, 3.0] {
            let (dx, dp) = srelu_partials(x, &p);
            let fd_x = (srelu(x + h, &p) - srelu(x - h, &p)) / (2.0 * h);
            assert!((dx - fd_x).abs() < 1e-6);
            for k in 0..4 {
                let mut hi = p.to_array();
                let mut lo = p.to_array();
                hi[k] += h;
                lo[k] -= h;
                let fd = (srelu(x, &SreluParams::from_array(hi))
                    - srelu(x, &SreluParams::from_array(lo)))
                    / (2.0 * h);
                assert!((dp[k] - fd).abs() < 1e-6, "x={x} k={k}");
            }
        }
    }
}
