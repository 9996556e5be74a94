//! Noiseless references checked against closed-form quantiles.

use dprank::inference::{
    critical_value, p_value, ref_kw, ref_mw, ref_t, ref_wilcoxon, wilcoxon_null_variance, KwMode,
    MwMode, Tail,
};
use dprank::privacy::PrivacyBudget;
use dprank::RandomStream;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

const Z: usize = 200_000;

#[test]
fn noiseless_kw_is_chi_squared() {
    for g in 2..=5 {
        let r = ref_kw(g, 90, f64::INFINITY, Z, &RandomStream::new(1, g as u64), KwMode::Chi2Laplace).unwrap();
        let chi = ChiSquared::new((g - 1) as f64).unwrap();
        for alpha in [0.1, 0.05, 0.01] {
            let exact = chi.inverse_cdf(1.0 - alpha);
            let c = critical_value(&r, alpha).unwrap();
            assert!((c / exact - 1.0).abs() < 0.03, "g={g} alpha={alpha}: {c} vs {exact}");
        }
    }
}

#[test]
fn full_simulation_kw_approaches_chi_squared() {
    let r = ref_kw(3, 200, f64::INFINITY, 50_000, &RandomStream::new(2, 0), KwMode::FullSim).unwrap();
    let exact = ChiSquared::new(2.0).unwrap().inverse_cdf(0.95);
    let c = critical_value(&r, 0.05).unwrap();
    assert!((c / exact - 1.0).abs() < 0.05, "{c} vs {exact}");
}

#[test]
fn noiseless_wilcoxon_is_normal() {
    let n = 60;
    let sd = wilcoxon_null_variance(n).sqrt();
    let r = ref_wilcoxon(n, f64::INFINITY, Z, &RandomStream::new(3, 0)).unwrap();
    let normal = Normal::new(0.0, sd).unwrap();
    for alpha in [0.1, 0.05, 0.01] {
        let exact = normal.inverse_cdf(1.0 - alpha / 2.0);
        let c = critical_value(&r, alpha).unwrap();
        assert!((c / exact - 1.0).abs() < 0.03, "alpha={alpha}: {c} vs {exact}");
    }
    assert!((p_value(normal.inverse_cdf(0.975), &r) - 0.05).abs() < 0.005);
    assert!((p_value(-normal.inverse_cdf(0.975), &r) - 0.05).abs() < 0.005);
}

#[test]
fn noiseless_t_is_student() {
    let n = 30;
    let r = ref_t(n, &PrivacyBudget::pure(f64::INFINITY).unwrap(), Z, &RandomStream::new(4, 0)).unwrap();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).unwrap();
    for alpha in [0.1, 0.05] {
        let exact = t.inverse_cdf(1.0 - alpha / 2.0);
        let c = critical_value(&r, alpha).unwrap();
        assert!((c / exact - 1.0).abs() < 0.03, "alpha={alpha}: {c} vs {exact}");
    }
}

fn mw_critical_values(alphas: &[f64]) -> Vec<(f64, f64, f64)> {
    let budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
    let (n, m) = (200, 80);
    let rng = RandomStream::new(5, 0);
    let normal = ref_mw(n, m, &budget, 100_000, &rng, MwMode::NormalLaplace, false).unwrap();
    let full = ref_mw(n, m, &budget, 100_000, &rng, MwMode::FullSim, false).unwrap();
    assert_eq!((normal.tail(), full.tail()), (Tail::Lower, Tail::Lower));
    alphas
        .iter()
        .map(|&a| (a, critical_value(&normal, a).unwrap(), critical_value(&full, a).unwrap()))
        .collect()
}

// Full simulation re-releases the group size in every replicate, which lowers m*
// by about c again and widens the Laplace term. Its lower tail is therefore longer
// than the normal reference's, so it rejects less often.
#[test]
fn full_simulation_mw_is_at_least_as_conservative_as_normal() {
    for (alpha, cn, cf) in mw_critical_values(&[0.01, 0.05, 0.1]) {
        assert!(cf <= cn * 1.01, "alpha={alpha}: full {cf} vs normal {cn}");
    }
}

/// The opposite ordering: the normal reference never rejects more often than
/// full simulation. Fails with per-replicate re-estimation (e.g. 3025 vs 2839 at
/// alpha = 0.01); kept so the discrepancy stays measurable.
#[test]
#[ignore = "does not hold when full simulation re-estimates the group size"]
fn normal_mw_reference_is_at_least_as_conservative_as_full_simulation() {
    for (alpha, cn, cf) in mw_critical_values(&[0.01, 0.05, 0.1]) {
        assert!(cn <= cf * 1.01, "alpha={alpha}: normal {cn} vs full {cf}");
    }
}
