use ganland_core::bounds::phi;
use ganland_core::data::{sample_latent, sample_mixture, sample_mixture_labeled};
use ganland_core::{GaussianMixtureSpec, LatentSpec, Origin};

#[test]
fn degenerate_single_mode_repeats_center() {
    let spec = GaussianMixtureSpec::from_centers(vec![[2.5, -1.0]], 1e-12).unwrap();
    let s = sample_mixture(&spec, 3, 7).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s.origin, Origin::Real);
    for i in 0..3 {
        let p = s.point(i);
        assert!((p[0] - 2.5).abs() < 1e-9 && (p[1] + 1.0).abs() < 1e-9);
    }
}

#[test]
fn nine_mode_grid_minimum_distance() {
    let spec = GaussianMixtureSpec::grid(9, 9.0, None).unwrap();
    let c = spec.centers();
    let mut min = f64::INFINITY;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let d = ((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt();
            min = min.min(d);
        }
    }
    assert_eq!(min, 9.0);
    assert_eq!(spec.min_distance(), 9.0);
    let mean_x: f64 = c.iter().map(|p| p[0]).sum::<f64>() / 9.0;
    let mean_y: f64 = c.iter().map(|p| p[1]).sum::<f64>() / 9.0;
    assert_eq!((mean_x, mean_y), (0.0, 0.0));
}

#[test]
fn component_counts_within_binomial_bound() {
    let spec = GaussianMixtureSpec::grid(9, 9.0, None).unwrap();
    let n = 90_000;
    let (_, labels) = sample_mixture_labeled(&spec, n, 2024).unwrap();
    let p = 1.0 / 9.0;
    let tol = 3.0 * (n as f64 * p * (1.0 - p)).sqrt();
    let mut counts = [0usize; 9];
    for l in labels {
        counts[l] += 1;
    }
    for c in counts {
        assert!((c as f64 - n as f64 / 9.0).abs() <= tol, "{counts:?}");
    }
}

#[test]
fn components_follow_their_gaussian_law() {
    let spec = GaussianMixtureSpec::grid(4, 10.0, Some(0.5)).unwrap();
    let n = 80_000;
    let (s, labels) = sample_mixture_labeled(&spec, n, 99).unwrap();
    for (k, center) in spec.centers().iter().enumerate() {
        let pts: Vec<&[f64]> = (0..n).filter(|&i| labels[i] == k).map(|i| s.point(i)).collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p[0]).sum::<f64>() / m;
        let my = pts.iter().map(|p| p[1]).sum::<f64>() / m;
        let vx = pts.iter().map(|p| (p[0] - mx).powi(2)).sum::<f64>() / (m - 1.0);
        let vy = pts.iter().map(|p| (p[1] - my).powi(2)).sum::<f64>() / (m - 1.0);
        let cxy = pts.iter().map(|p| (p[0] - mx) * (p[1] - my)).sum::<f64>() / (m - 1.0);
        // 5 standard errors on the mean; loose relative bound on variances
        let se = 0.5 / m.sqrt();
        assert!((mx - center[0]).abs() < 5.0 * se && (my - center[1]).abs() < 5.0 * se);
        assert!((vx / 0.25 - 1.0).abs() < 0.05 && (vy / 0.25 - 1.0).abs() < 0.05);
        assert!(cxy.abs() / 0.25 < 0.05);
    }
}

#[test]
fn latent_moments_within_clt_bounds() {
    let s = sample_latent(LatentSpec::new(2).unwrap(), 100_000, 5).unwrap();
    for j in 0..2 {
        let col: Vec<f64> = (0..s.len()).map(|i| s.point(i)[j]).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((v - 1.0).abs() < 0.03, "variance {v}");
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let l = LatentSpec::new(3).unwrap();
    assert_eq!(sample_latent(l, 50, 1).unwrap(), sample_latent(l, 50, 1).unwrap());
    assert_ne!(sample_latent(l, 50, 1).unwrap(), sample_latent(l, 50, 2).unwrap());
    let spec = GaussianMixtureSpec::grid(25, 3.0, None).unwrap();
    assert_eq!(sample_mixture(&spec, 40, 8).unwrap(), sample_mixture(&spec, 40, 8).unwrap());
}

#[test]
fn one_dimensional_latent_passes_ks_test() {
    let n = 10_000;
    let s = sample_latent(LatentSpec::new(1).unwrap(), n, 31).unwrap();
    let mut xs: Vec<f64> = s.points.data().to_vec();
    xs.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = phi(x);
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(GaussianMixtureSpec::grid(8, 1.0, None).is_err());
    assert!(GaussianMixtureSpec::grid(4, 0.0, None).is_err());
    assert!(GaussianMixtureSpec::from_centers(vec![], 1.0).is_err());
    assert!(GaussianMixtureSpec::from_centers(vec![[0.0, 0.0]], 0.0).is_err());
    assert!(LatentSpec::new(0).is_err());
    let spec = GaussianMixtureSpec::grid(4, 1.0, None).unwrap();
    assert!(sample_mixture(&spec, 0, 1).is_err());
}
