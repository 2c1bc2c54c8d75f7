//! Linear-scheme leakage against a direct conditional-variance computation.

use ota_core::privacy::{gaussian_mi_bound, gaussian_mi_exact, InfoValue};
use ota_core::scheme::{gaussian_scheme, EncoderMap};
use ota_core::{ModelSpec, SystemConfig};

/// `(d/2)·ln(Var Y / Var(Y | Uᵢ))` using the scheme's actual gain.
fn variance_ratio_mi(cfg: &SystemConfig, model: &ModelSpec) -> f64 {
    let ModelSpec::GaussianLocation { sigma_sq, .. } = *model else {
        unreachable!()
    };
    let scheme = gaussian_scheme(cfg, model).unwrap();
    let EncoderMap::LinearGain { gain } = scheme.encoder.map else {
        unreachable!()
    };
    let per_user = gain * gain * sigma_sq;
    let total = cfg.n as f64 * per_user + cfg.sigma0_sq;
    let given_user = (cfg.n - 1) as f64 * per_user + cfg.sigma0_sq;
    cfg.d as f64 / 2.0 * (total / given_user).ln()
}

#[test]
fn exact_below_bound_on_grid() {
    let mut points = 0;
    for n in [1, 2, 5, 20, 100] {
        for d in [1, 4] {
            for sigma0_sq in [0.1, 1.0] {
                for (power, bound) in [(0.5, 0.5), (1.0, 1.0), (2.0, 3.0), (10.0, 0.1), (1.0, 10.0)] {
                    let cfg = SystemConfig::new(n, d, power, sigma0_sq).unwrap();
                    let model = ModelSpec::gaussian(1.5, bound).unwrap();
                    let exact = gaussian_mi_exact(&cfg, &model).unwrap().finite().unwrap();
                    let upper = gaussian_mi_bound(&cfg, &model).unwrap().finite().unwrap();
                    assert!(exact <= upper, "{cfg:?}: {exact} > {upper}");
                    let direct = variance_ratio_mi(&cfg, &model);
                    assert!((exact - direct).abs() <= 1e-12 * direct.max(1.0), "{exact} vs {direct}");
                    points += 1;
                }
            }
        }
    }
    assert_eq!(points, 100);
}

#[test]
fn spot_values() {
    let cfg = SystemConfig::new(5, 2, 2.0, 1.0).unwrap();
    let model = ModelSpec::gaussian(1.0, 1.0).unwrap();
    let exact = gaussian_mi_exact(&cfg, &model).unwrap().finite().unwrap();
    assert!((exact - 0.182_32).abs() < 1e-5);
    assert!((exact - (1.2f64).ln()).abs() < 1e-15);
    assert_eq!(gaussian_mi_bound(&cfg, &model).unwrap(), InfoValue::Finite(0.2));
}

#[test]
fn single_user_without_noise_is_unbounded() {
    let cfg = SystemConfig::new(1, 1, 1.0, 0.0).unwrap();
    let model = ModelSpec::gaussian(1.0, 1.0).unwrap();
    assert!(gaussian_mi_exact(&cfg, &model).unwrap().is_unbounded());
    assert!(gaussian_mi_bound(&cfg, &model).unwrap().is_unbounded());
}
