use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Analysis/synthesis window shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Periodic Hamming.
    Hamming,
    /// Periodic Hann.
    Hann,
    /// Hann of length `len + 2` with both zero end points dropped, as in
    /// MATLAB's `hanning`. Used by the intelligibility measure.
    Hanning,
}

/// Window coefficients of length `len`.
pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    let n = len as f64;
    (0..len)
        .map(|i| {
            let i = i as f64;
            match kind {
                WindowKind::Hamming => 0.54 - 0.46 * (2.0 * PI * i / n).cos(),
                WindowKind::Hann => 0.5 - 0.5 * (2.0 * PI * i / n).cos(),
                WindowKind::Hanning => 0.5 - 0.5 * (2.0 * PI * (i + 1.0) / (n + 1.0)).cos(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_windows() {
        let h = window(WindowKind::Hann, 8);
        assert_eq!(h[0], 0.0);
        assert!((h[4] - 1.0).abs() < 1e-15);
        // periodic: w[k] == w[n - k]
        for k in 1..8 {
            assert!((h[k] - h[8 - k]).abs() < 1e-15);
        }
        let m = window(WindowKind::Hamming, 512);
        assert!((m[0] - 0.08).abs() < 1e-15);
        assert!((m[256] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hanning_matches_matlab_definition() {
        // hanning(4) = [0.3455, 0.9045, 0.9045, 0.3455]
        let w = window(WindowKind::Hanning, 4);
        let expected = [0.345_491_502_812_526_3, 0.904_508_497_187_473_7];
        assert!((w[0] - expected[0]).abs() < 1e-15);
        assert!((w[1] - expected[1]).abs() < 1e-15);
        assert!((w[2] - w[1]).abs() < 1e-15);
        assert!((w[3] - w[0]).abs() < 1e-15);
    }
}
