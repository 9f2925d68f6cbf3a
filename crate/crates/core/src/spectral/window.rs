//! Classification of eigenvalues against the interval `[3λ, -2λ)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowZone {
    BelowWindow,
    InWindow,
    AtOrAboveThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindowReport {
    pub lambda: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub empty: bool,
    pub note: Option<String>,
    pub classified: Vec<(f64, WindowZone)>,
}

/// Pure arithmetic: no geometry is touched.
pub fn spectral_window(lambda: f64, mus: &[f64]) -> SpectralWindowReport {
    let lo = 3.0 * lambda;
    let hi = -2.0 * lambda;
    let empty = !(lo < hi);
    let note = if lambda == 0.0 {
        Some("window empty at λ = 0: [0, 0) contains no eigenvalue".to_string())
    } else if empty {
        Some(format!("window empty for λ = {lambda} > 0"))
    } else {
        None
    };
    let classified = mus
        .iter()
        .map(|&mu| {
            let zone = if lo <= mu && mu < hi {
                WindowZone::InWindow
            } else if mu >= hi {
                WindowZone::AtOrAboveThreshold
            } else {
                WindowZone::BelowWindow
            };
            (mu, zone)
        })
        .collect();
    SpectralWindowReport {
        lambda,
        window_lo: lo,
        window_hi: hi,
        empty,
        note,
        classified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn negative_lambda_window() {
        let r = spectral_window(-2.0, &[4.0, -6.0, 0.0, -6.5, 3.999]);
        assert_eq!((r.window_lo, r.window_hi), (-6.0, 4.0));
        assert!(!r.empty);
        let zones: Vec<WindowZone> = r.classified.iter().map(|c| c.1).collect();
        assert_eq!(
            zones,
            vec![
                WindowZone::AtOrAboveThreshold,
                WindowZone::InWindow,
                WindowZone::InWindow,
                WindowZone::BelowWindow,
                WindowZone::InWindow
            ]
        );
        assert_eq!(spectral_window(-1.0, &[-5.0]).classified[0].1, WindowZone::BelowWindow);
    }

    #[test]
    fn zero_lambda_is_empty_with_note() {
        let r = spectral_window(0.0, &[0.0, 1.0]);
        assert!(r.empty);
        assert!(r.note.unwrap().contains("empty"));
        assert!(r.classified.iter().all(|c| c.1 == WindowZone::AtOrAboveThreshold));
    }

    proptest! {
        #[test]
        fn negative_window_contains_zero(lambda in -100.0f64..-1e-6) {
            let r = spectral_window(lambda, &[0.0]);
            prop_assert!(r.window_lo < 0.0 && 0.0 < r.window_hi);
            prop_assert_eq!(r.classified[0].1, WindowZone::InWindow);
        }

        #[test]
        fn zones_partition_the_line(lambda in -10.0f64..10.0, mu in -100.0f64..100.0) {
            let r = spectral_window(lambda, &[mu]);
            let z = r.classified[0].1;
            let inside = r.window_lo <= mu && mu < r.window_hi;
            prop_assert_eq!(z == WindowZone::InWindow, inside);
            if !inside {
                prop_assert_eq!(z == WindowZone::AtOrAboveThreshold, mu >= r.window_hi);
            }
        }
    }
}
