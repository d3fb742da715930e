use ganland_core::bounds::{
    lambert_w0, partition_boundary_lower, phi, phi_density, phi_inv, phi_inv_lower_crudeman,
    phi_inv_upper, phi_inv_upper_q, thm2_bound, thm2_bound_eps, thm2_bound_lambert,
    thm2_bound_lambert_eps, thm2_residual, thm3_asymptotic, thm3_bound, thm3_bound_general,
    BoundInputs, PartitionWeights,
};
use proptest::prelude::*;
use std::f64::consts::{E, PI};

// Reference values computed with mpmath at 50 digits.
const W_OF_ONE: f64 = 0.567_143_290_409_783_87;
const LAMBERT_FORM_HALF: f64 = 0.837_320_629_655_584_28;
const LAMBERT_FORM_ONE: f64 = 0.547_485_124_819_097_68;
const THM2: [(f64, f64); 4] = [
    (1.0, 0.421_993_377_573_564_28),
    (0.75, 0.515_590_873_611_475_40),
    (0.1, 0.920_606_869_406_105_07),
    (3.0, 0.150_125_512_348_786_44),
];
const THM3_EPS1_M9: f64 = 0.299_056_204_616_821_46;
const THM3_EPS07_M25_B08: f64 = 0.338_960_936_782_705_18;
const THM3_EPS1_M1E6: f64 = 0.005_461_028_120_328_001_3;
const ASYMPTOTIC_EPS1_M1E6: f64 = 0.003_162_090_973_433_384_7;
const GENERAL_EPS08: f64 = 0.848_084_062_505_533_27;
const PARTITION_K4_EPS1: f64 = 0.011_859_067_104_508_722;
const CRUDE_8: f64 = 0.406_112_591_072_829_59;
const CRUDE_1E6: f64 = 4.726_601_551_194_469_8;
const PHI_INV_7_8: f64 = 1.150_349_380_376_008_2;
const PHI_INV_UPPER_1E6: f64 = 4.753_424_308_822_898_9;
const PHI_AT_1959964: f64 = 0.975_000_000_903_557_60;
const PHI_INV_1E8: f64 = -5.612_001_244_174_788_7;
const PHI_INV_0975: f64 = 1.959_963_984_540_054_2;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Φ by composite Simpson on the density over [0, |x|].
fn phi_quadrature(x: f64) -> f64 {
    let n = 4000;
    let h = x.abs() / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let mut s = f(0.0) + f(x.abs());
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = s * h / 3.0;
    if x >= 0.0 { 0.5 + half } else { 0.5 - half }
}

/// Φ⁻¹ by bisection on the quadrature Φ.
fn phi_inv_quadrature(p: f64) -> f64 {
    let (mut lo, mut hi) = (-8.0f64, 8.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_quadrature(mid) < p { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

fn thm3_oracle(eps: f64, m: f64, beta: f64) -> f64 {
    let x = phi_inv_quadrature(1.0 - 1.0 / (beta * m));
    (1.0 + x * x) / (x * x) * (-0.5 * eps * eps - eps * x).exp()
}

#[test]
fn phi_matches_frozen_and_quadrature_values() {
    assert!(close(phi(1.959964), PHI_AT_1959964, 1e-14));
    assert!((phi(1.959964) - 0.975).abs() < 1e-6);
    for i in -60..=60 {
        let x = i as f64 / 10.0;
        assert!((phi(x) - phi_quadrature(x)).abs() < 1e-13, "x = {x}");
    }
    assert!((phi_density(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
}

#[test]
fn phi_inv_matches_frozen_values() {
    assert!(close(phi_inv(1e-8).unwrap(), PHI_INV_1E8, 1e-13));
    assert!(close(phi_inv(0.975).unwrap(), PHI_INV_0975, 1e-13));
    assert!(close(phi_inv(7.0 / 8.0).unwrap(), PHI_INV_7_8, 1e-13));
    assert!(close(phi_inv_upper(1e-6).unwrap(), PHI_INV_UPPER_1E6, 1e-13));
    assert_eq!(phi_inv(0.5).unwrap(), 0.0);
    for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
        assert!(phi_inv(p).is_err());
    }
}

#[test]
fn phi_round_trip_on_log_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..=400 {
        // 1e-8 .. 0.5 logarithmically, then mirrored
        let p = 10f64.powf(-8.0 + (8.0 + 0.5f64.log10()) * i as f64 / 400.0);
        for q in [p, 1.0 - p] {
            worst = worst.max((phi(phi_inv(q).unwrap()) - q).abs());
        }
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn lambert_w_values() {
    assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
    assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
    assert!(close(lambert_w0(1.0).unwrap(), W_OF_ONE, 1e-15));
    assert!((lambert_w0(1.0).unwrap() - 0.5671).abs() < 1e-4);
    assert_eq!(lambert_w0(-1.0 / E).unwrap(), -1.0);
    assert!(lambert_w0(-1.0 / E - 1e-9).is_err());
    assert!(lambert_w0(f64::NAN).is_err());
}

#[test]
fn lambert_w_residual_on_grid() {
    // |W e^W − x| relative to max(1, |x|): absolute 1e-12 is below one ulp
    // of x once x exceeds ~4.5e3.
    let lo = -1.0 / E + 1e-9;
    let mut xs: Vec<f64> = (0..=2000).map(|i| lo + (1.0 - lo) * i as f64 / 2000.0).collect();
    xs.extend((0..=600).map(|i| 10f64.powf(6.0 * i as f64 / 600.0)));
    for x in xs {
        let w = lambert_w0(x).unwrap();
        let r = (w * w.exp() - x).abs() / x.abs().max(1.0);
        assert!(r <= 1e-12, "x = {x}, residual {r}");
    }
}

#[test]
fn thm2_matches_frozen_roots() {
    for (eps, want) in THM2 {
        assert!((thm2_bound_eps(eps) - want).abs() < 1e-11, "eps = {eps}");
        assert!((thm2_bound(2.0 * eps, 1.0).unwrap() - want).abs() < 1e-11);
        assert!((thm2_bound(6.0 * eps, 3.0).unwrap() - want).abs() < 1e-11);
    }
    assert!(thm2_bound_eps(1.0) < 0.5475);
}

#[test]
fn thm2_residual_brackets_result() {
    for i in 1..=50 {
        let eps = i as f64 * 0.1;
        let a = thm2_bound_eps(eps);
        assert!(thm2_residual(a, eps) <= 0.0);
        assert!(thm2_residual(a + 1e-9, eps) > 0.0);
    }
}

#[test]
fn thm2_matches_dense_grid_scan() {
    for (d, l) in [(0.37, 1.3), (2.0, 0.8), (5.5, 2.2)] {
        let eps = d / (2.0 * l);
        let n = 10_000_000u32;
        // largest grid point with a non-positive residual
        let scan = (0..=n)
            .rev()
            .map(|i| i as f64 / n as f64)
            .find(|&a| thm2_residual(a, eps) <= 0.0)
            .unwrap();
        let got = thm2_bound(d, l).unwrap();
        assert!(got >= scan && got - scan <= 1e-7, "{got} vs {scan}");
    }
}

#[test]
fn thm2_limits_and_domain() {
    assert_eq!(thm2_bound(0.0, 1.0).unwrap(), 1.0);
    assert!(thm2_bound_eps(1e-9) > 1.0 - 1e-8);
    assert!(thm2_bound(1.0, 0.0).is_err());
    assert!(thm2_bound(-1.0, 1.0).is_err());
}

#[test]
fn thm2_is_monotone_on_grid() {
    let ds: Vec<f64> = (1..=20).map(|i| 0.25 * i as f64).collect();
    let ls: Vec<f64> = (1..=20).map(|i| 0.2 * i as f64).collect();
    for &l in &ls {
        for w in ds.windows(2) {
            assert!(thm2_bound(w[1], l).unwrap() <= thm2_bound(w[0], l).unwrap());
        }
    }
    for &d in &ds {
        for w in ls.windows(2) {
            assert!(thm2_bound(d, w[1]).unwrap() >= thm2_bound(d, w[0]).unwrap());
        }
    }
}

#[test]
fn lambert_form_values() {
    assert!(close(thm2_bound_lambert_eps(0.5).unwrap(), LAMBERT_FORM_HALF, 1e-14));
    assert!(close(thm2_bound_lambert(2.0, 1.0).unwrap(), LAMBERT_FORM_ONE, 1e-14));
    let direct = 1.0 - (2.0 / PI).sqrt() * lambert_w0(0.25).unwrap();
    assert_eq!(thm2_bound_lambert_eps(0.5).unwrap(), direct);
    assert!(thm2_bound_lambert_eps(1e-8).unwrap() > 1.0 - 1e-15);
}

#[test]
fn thm3_matches_frozen_and_composed_oracles() {
    let v = thm3_bound(&BoundInputs::from_epsilon(1.0, 9, 1.0).unwrap()).unwrap();
    assert!(close(v.raw, THM3_EPS1_M9, 1e-12));
    assert!((v.raw - thm3_oracle(1.0, 9.0, 1.0)).abs() < 1e-10);
    let v = thm3_bound(&BoundInputs::from_epsilon(0.7, 25, 0.8).unwrap()).unwrap();
    assert!(close(v.raw, THM3_EPS07_M25_B08, 1e-12));
    assert!((v.raw - thm3_oracle(0.7, 25.0, 0.8)).abs() < 1e-10);
    let big = BoundInputs::from_epsilon(1.0, 1_000_000, 1.0).unwrap();
    assert!(close(thm3_bound(&big).unwrap().raw, THM3_EPS1_M1E6, 1e-12));
    assert!(close(thm3_asymptotic(&big), ASYMPTOTIC_EPS1_M1E6, 1e-12));
}

#[test]
fn thm3_reports_raw_and_clamped() {
    let v = thm3_bound(&BoundInputs::from_epsilon(0.0, 3, 1.0).unwrap()).unwrap();
    assert!(v.raw > 1.0);
    assert_eq!(v.clamped, 1.0);
    let v = thm3_bound(&BoundInputs::new(9.0, 1.0, 9, 1.0).unwrap()).unwrap();
    assert_eq!(v.raw, v.clamped);
}

#[test]
fn thm3_domain_guards() {
    let e = thm3_bound(&BoundInputs::from_epsilon(1.0, 2, 1.0).unwrap()).unwrap_err();
    assert!(e.to_string().contains("beta_bar * M > 2"));
    assert!(thm3_bound(&BoundInputs::from_epsilon(1.0, 4, 0.5).unwrap()).is_err());
    assert!(BoundInputs::from_epsilon(1.0, 1, 1.0).is_err());
    assert!(BoundInputs::from_epsilon(1.0, 10, 0.1).is_err());
    assert!(BoundInputs::from_epsilon(1.0, 10, 1.1).is_err());
    assert!(BoundInputs::from_epsilon(-0.1, 10, 1.0).is_err());
    assert!(BoundInputs::new(0.0, 1.0, 10, 1.0).is_err());
}

#[test]
fn thm3_is_monotone_in_each_argument() {
    let f = |eps: f64, m: usize, b: f64| {
        thm3_bound(&BoundInputs::from_epsilon(eps, m, b).unwrap()).unwrap().raw
    };
    for m in [3usize, 9, 25, 100, 10_000] {
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let v = f(0.1 * i as f64, m, 1.0);
            assert!(v < prev);
            prev = v;
        }
    }
    for eps in [0.0, 0.5, 1.0, 2.0] {
        let mut prev = f64::INFINITY;
        for m in 3..200 {
            let v = f(eps, m, 1.0);
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let v = f(eps, 50, 0.05 + 0.019 * i as f64);
            assert!(v <= prev);
            prev = v;
        }
    }
}

#[test]
fn asymptotic_form_properties() {
    for m in [2usize, 9, 1000] {
        assert_eq!(thm3_asymptotic(&BoundInputs::from_epsilon(0.0, m, 1.0).unwrap()), 1.0);
    }
    for (eps, b) in [(0.5, 1.0), (1.0, 0.7), (2.5, 0.3)] {
        for m in [10usize, 100, 4096] {
            let a = thm3_asymptotic(&BoundInputs::from_epsilon(eps, m, b).unwrap());
            let a2 = thm3_asymptotic(&BoundInputs::from_epsilon(eps, 2 * m, b).unwrap());
            let bm = b * m as f64;
            let drop = eps * ((2.0 * (2.0 * bm).ln()).sqrt() - (2.0 * bm.ln()).sqrt());
            assert!((a.ln() - a2.ln() - drop).abs() < 1e-12);
        }
    }
}

#[test]
fn asymptotic_gap_shrinks_with_m() {
    // The relative gap decays like 1/log M; at M = 1e6 it is still ~0.73.
    let gap = |m: usize| {
        let i = BoundInputs::from_epsilon(1.0, m, 1.0).unwrap();
        let a = thm3_asymptotic(&i);
        (thm3_bound(&i).unwrap().raw - a).abs() / a
    };
    let gaps: Vec<f64> = [10usize, 100, 10_000, 1_000_000, 1 << 40].iter().map(|&m| gap(m)).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!((gaps[3] - (THM3_EPS1_M1E6 / ASYMPTOTIC_EPS1_M1E6 - 1.0)).abs() < 1e-10);
}

#[test]
fn general_bound_values_and_reductions() {
    let i = BoundInputs::from_epsilon(0.8, 5, 1.0).unwrap();
    let w = PartitionWeights::new(vec![0.2, 0.15, 0.1, 0.22, 0.13]).unwrap();
    assert!((w.complement() - 0.2).abs() < 1e-15);
    assert!(close(thm3_bound_general(&i, &w).unwrap().raw, GENERAL_EPS08, 1e-12));

    for m in [5usize, 9, 64] {
        let i = BoundInputs::from_epsilon(1.3, m, 1.0).unwrap();
        let eq = thm3_bound_general(&i, &PartitionWeights::equal(m).unwrap()).unwrap();
        assert!((eq.raw - thm3_bound(&i).unwrap().raw).abs() < 1e-12);
    }

    // shifting mass into the complement below w_max moves the bound by the shift
    let a = PartitionWeights::new(vec![0.25, 0.2, 0.2, 0.2]).unwrap();
    let b = PartitionWeights::new(vec![0.25, 0.2, 0.2, 0.15]).unwrap();
    let i = BoundInputs::from_epsilon(0.5, 4, 1.0).unwrap();
    let (va, vb) = (thm3_bound_general(&i, &a).unwrap().raw, thm3_bound_general(&i, &b).unwrap().raw);
    assert!((va - vb - 0.05).abs() < 1e-12);
}

proptest! {
    #[test]
    fn general_bound_matches_direct_formula(
        ws in proptest::collection::vec(0.01f64..=0.25, 3..12),
        eps in 0.0f64..3.0,
    ) {
        let total: f64 = ws.iter().sum();
        let w: Vec<f64> = if total > 1.0 { ws.iter().map(|v| v / total).collect() } else { ws };
        let weights = PartitionWeights::new(w.clone()).unwrap();
        let wc = (1.0 - w.iter().sum::<f64>()).max(0.0);
        let top = w.iter().copied().fold(wc, f64::max);
        prop_assume!(top < 0.5);
        let x = phi_inv_quadrature(1.0 - top);
        let direct = (1.0 + x * x) / (x * x) * (-0.5 * eps * eps - eps * x).exp() - wc;
        let got = thm3_bound_general(&BoundInputs::from_epsilon(eps, w.len().max(2), 1.0).unwrap(), &weights)
            .unwrap()
            .raw;
        prop_assert!((got - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn thm3_matches_composed_oracle(eps in 0.0f64..3.0, m in 3usize..500, beta in 0.2f64..=1.0) {
        prop_assume!(beta * m as f64 > 2.05);
        let got = thm3_bound(&BoundInputs::from_epsilon(eps, m, beta).unwrap()).unwrap().raw;
        let want = thm3_oracle(eps, m as f64, beta);
        prop_assert!((got - want).abs() < 1e-10 * want.max(1.0));
    }
}

#[test]
fn general_bound_domain() {
    let i = BoundInputs::from_epsilon(1.0, 4, 1.0).unwrap();
    let sparse = PartitionWeights::new(vec![0.1, 0.1]).unwrap();
    assert!(thm3_bound_general(&i, &sparse).is_err());
    assert!(PartitionWeights::new(vec![0.3, 0.2]).is_err());
    assert!(PartitionWeights::new(vec![0.25, 0.25, 0.25, 0.25, 0.1]).is_err());
    assert!(PartitionWeights::new(vec![0.0, 0.25]).is_err());
}

#[test]
fn partition_bound_values() {
    let w4 = PartitionWeights::equal(4).unwrap();
    let v = partition_boundary_lower(1.0, &w4).unwrap();
    assert!(close(v.raw, PARTITION_K4_EPS1, 1e-12));
    let zero = partition_boundary_lower(0.0, &w4).unwrap();
    assert!(zero.raw < 0.0 && zero.clamped == 0.0);
    let mut prev = 0.0;
    for k in [4usize, 16, 256, 4096, 65_536] {
        let v = partition_boundary_lower(1.0, &PartitionWeights::equal(k).unwrap()).unwrap().raw;
        assert!(v > prev);
        prev = v;
    }
    assert!(prev > 0.9);
}

#[test]
fn partition_bound_domain() {
    let e = partition_boundary_lower(1.0, &PartitionWeights::new(vec![0.25; 3]).unwrap()).unwrap_err();
    assert!(e.to_string().contains("K >= 4 and w_k in (0,1/4]"));
    let short = PartitionWeights::new(vec![0.25, 0.25, 0.25, 0.2]).unwrap();
    assert!(partition_boundary_lower(1.0, &short).is_err());
    assert!(partition_boundary_lower(-1.0, &PartitionWeights::equal(4).unwrap()).is_err());
    assert!(PartitionWeights::equal(3).is_err());
}

#[test]
fn crude_lower_bound_values() {
    assert!(close(phi_inv_lower_crudeman(8.0).unwrap(), CRUDE_8, 1e-13));
    assert!(close(phi_inv_lower_crudeman(1e6).unwrap(), CRUDE_1E6, 1e-13));
    assert!(phi_inv_lower_crudeman(8.0).unwrap() <= phi_inv(7.0 / 8.0).unwrap());
    let (lo, exact) = (phi_inv_lower_crudeman(1e6).unwrap(), phi_inv_upper(1e-6).unwrap());
    assert!(lo <= exact && (exact - lo) / exact < 0.10);
    assert!(phi_inv_lower_crudeman(7.99).is_err());
    assert!(phi_inv_lower_crudeman(f64::INFINITY).is_err());
}

#[test]
fn crude_bounds_bracket_phi_inv() {
    for e in 3..=20 {
        let k = (1u64 << e) as f64;
        let lo = phi_inv_lower_crudeman(k).unwrap();
        let mid = phi_inv_upper(1.0 / k).unwrap();
        let hi = phi_inv_upper_q(k);
        assert!(lo <= mid && mid <= hi, "K = {k}: {lo} {mid} {hi}");
    }
}

#[test]
fn crude_lower_bound_increases_in_k() {
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=500 {
        let k = 8.0 * (1e6f64 / 8.0).powf(i as f64 / 500.0);
        let v = phi_inv_lower_crudeman(k).unwrap();
        assert!(v > prev);
        prev = v;
    }
}
