//! Binary-sum leakage against brute-force enumeration over all user bits.

use ota_core::privacy::{bernoulli_mi_bound, bernoulli_mi_exact};
use ota_core::SystemConfig;

/// `I(X₁ + … + Xₙ; X₁)` in nats by enumerating all 2ⁿ bit patterns.
fn enumerate_mi(n: usize, theta: f64) -> f64 {
    let mut joint = vec![[0.0f64; 2]; n + 1];
    for pattern in 0u32..(1 << n) {
        let ones = pattern.count_ones() as i32;
        let p = theta.powi(ones) * (1.0 - theta).powi(n as i32 - ones);
        joint[ones as usize][(pattern & 1) as usize] += p;
    }
    let px = [1.0 - theta, theta];
    let mut mi = 0.0;
    for row in &joint {
        let ps = row[0] + row[1];
        for x in 0..2 {
            if row[x] > 0.0 {
                mi += row[x] * (row[x] / (px[x] * ps)).ln();
            }
        }
    }
    mi
}

#[test]
fn matches_enumeration() {
    for n in 1..=12 {
        for k in 0..=20 {
            let theta = k as f64 / 20.0;
            let exact = bernoulli_mi_exact(n, theta).unwrap();
            let brute = enumerate_mi(n, theta);
            assert!((exact - brute).abs() < 1e-12, "n={n} theta={theta}: {exact} vs {brute}");
        }
    }
}

#[test]
fn two_users_half_is_half_a_bit() {
    let brute = enumerate_mi(2, 0.5);
    assert!((brute - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
    assert!((bernoulli_mi_exact(2, 0.5).unwrap() - 0.346_57).abs() < 1e-5);
    assert!((bernoulli_mi_exact(2, 0.5).unwrap() - brute).abs() < 1e-6);
}

#[test]
fn never_exceeds_d_over_n() {
    for n in 1..=20 {
        for d in [1, 3] {
            let cfg = SystemConfig::new(n, d, 1.0, 1.0).unwrap();
            let bound = bernoulli_mi_bound(&cfg);
            for k in 0..=100 {
                let theta = k as f64 / 100.0;
                let total = d as f64 * bernoulli_mi_exact(n, theta).unwrap();
                assert!(total <= bound, "n={n} d={d} theta={theta}: {total} > {bound}");
            }
        }
    }
}

#[test]
fn large_n_stays_finite() {
    let v = bernoulli_mi_exact(64, 0.5).unwrap();
    assert!(v.is_finite() && v > 0.0 && v < 1.0 / 64.0);
}
