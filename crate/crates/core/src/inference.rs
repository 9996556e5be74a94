//! Reference distributions, p-values, critical values and complete tests.

use std::fmt;
use std::str::FromStr;

use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::privacy::{
    laplace_noise, private_kw, private_kwabs, private_mw, private_t, private_wilcoxon,
    release_mw, wilcoxon_sensitivity, GroupSizeRelease, PrivacyBudget, KW_SENSITIVITY,
};
use crate::random::{NoiseSource, RandomStream};
use crate::rankstats::{BoundedSample, GroupedSample, PairedSample};

/// Standard deviation of the t-test null data generator.
pub const T_NULL_SIGMA: f64 = 0.3;
/// Smallest reference size for which [`run_test`] releases a p-value.
pub const MIN_RELEASE_REPS: usize = 1000;
pub const DEFAULT_REPS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Kw,
    Kwabs,
    Mw,
    Wilcoxon,
    Ttest,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::Kw,
        TestKind::Kwabs,
        TestKind::Mw,
        TestKind::Wilcoxon,
        TestKind::Ttest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Kw => "kw",
            TestKind::Kwabs => "kwabs",
            TestKind::Mw => "mw",
            TestKind::Wilcoxon => "wilcoxon",
            TestKind::Ttest => "ttest",
        }
    }

    pub fn tail(self) -> Tail {
        match self {
            TestKind::Kw | TestKind::Kwabs => Tail::Upper,
            TestKind::Mw => Tail::Lower,
            TestKind::Wilcoxon | TestKind::Ttest => Tail::TwoSided,
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown test `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    Upper,
    Lower,
    TwoSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    FullSim,
    Chi2Laplace,
    NormalLaplace,
    NormalSim,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum KwMode {
    #[default]
    Chi2Laplace,
    FullSim,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MwMode {
    #[default]
    NormalLaplace,
    FullSim,
}

/// Sorted Monte-Carlo draws of a private statistic under the null.
#[derive(Clone, Debug)]
pub struct ReferenceDistribution {
    samples: Vec<f64>,
    tail: Tail,
    provenance: Provenance,
}

impl ReferenceDistribution {
    pub fn new(mut samples: Vec<f64>, tail: Tail, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter(
                "reference distribution needs at least one sample".into(),
            ));
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidParameter("reference sample is NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            samples,
            tail,
            provenance,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn z(&self) -> usize {
        self.samples.len()
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Same samples read with a different rejection region.
    pub fn with_tail(mut self, tail: Tail) -> Self {
        self.tail = tail;
        self
    }

    fn count_at_least(&self, x: f64) -> usize {
        self.z() - self.samples.partition_point(|&s| s < x)
    }

    fn count_at_most(&self, x: f64) -> usize {
        self.samples.partition_point(|&s| s <= x)
    }
}

fn check_z(z: usize) -> Result<()> {
    if z < 1 {
        return Err(Error::InvalidParameter("z must be at least 1".into()));
    }
    Ok(())
}

fn check_groups(g: usize, n: usize) -> Result<()> {
    if g < 2 {
        return Err(Error::InvalidParameter(format!("need g >= 2, got {g}")));
    }
    if n < g {
        return Err(Error::InvalidParameter(format!(
            "need n >= g, got n = {n}, g = {g}"
        )));
    }
    Ok(())
}

/// Replicate `i` always draws from `root.substream(i)`, so results do not
/// depend on how rayon splits the work.
fn simulate(
    z: usize,
    root: &RandomStream,
    draw: impl Fn(&mut RandomStream) -> Result<f64> + Sync,
) -> Result<Vec<f64>> {
    (0..z as u64)
        .into_par_iter()
        .map(|i| draw(&mut root.substream(i)))
        .collect()
}

pub(crate) fn normal<S: NoiseSource + ?Sized>(rng: &mut S) -> f64 {
    // Box-Muller on the open-interval uniforms keeps every draw on NoiseSource.
    let u1 = rng.uniform_open();
    let u2 = rng.uniform_open();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `floor(n/g)` per group, plus one for each of the first `n mod g` groups.
pub fn near_equal_sizes(n: usize, g: usize) -> Vec<usize> {
    (0..g).map(|i| n / g + usize::from(i < n % g)).collect()
}

fn uniform_groups(sizes: &[usize], rng: &mut RandomStream) -> Result<GroupedSample> {
    let groups = sizes
        .iter()
        .map(|&len| (0..len).map(|_| rng.uniform_open()).collect())
        .collect();
    GroupedSample::new(groups)
}

/// Null distribution of the private Kruskal-Wallis statistic.
pub fn ref_kw(
    g: usize,
    n: usize,
    epsilon: f64,
    z: usize,
    rng: &RandomStream,
    mode: KwMode,
) -> Result<ReferenceDistribution> {
    check_groups(g, n)?;
    check_z(z)?;
    let budget = PrivacyBudget::pure(epsilon)?;
    let samples = match mode {
        KwMode::Chi2Laplace => {
            let chi2 = ChiSquared::new((g - 1) as f64)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let scale = KW_SENSITIVITY / epsilon;
            simulate(z, rng, |r| {
                let h = chi2.sample(r);
                Ok(h + laplace_noise(scale, r))
            })?
        }
        KwMode::FullSim => {
            let sizes = near_equal_sizes(n, g);
            simulate(z, rng, |r| {
                let db = uniform_groups(&sizes, r)?;
                Ok(private_kw(&db, &budget, r)?.statistic)
            })?
        }
    };
    let provenance = match mode {
        KwMode::Chi2Laplace => Provenance::Chi2Laplace,
        KwMode::FullSim => Provenance::FullSim,
    };
    ReferenceDistribution::new(samples, Tail::Upper, provenance)
}

/// Null distribution of the private absolute-value statistic with near-equal
/// groups, which maximises its expectation.
pub fn ref_kwabs(
    g: usize,
    n: usize,
    epsilon: f64,
    z: usize,
    rng: &RandomStream,
) -> Result<ReferenceDistribution> {
    check_groups(g, n)?;
    ref_kwabs_sizes(&near_equal_sizes(n, g), epsilon, z, rng)
}

/// [`ref_kwabs`] with explicit group sizes.
pub fn ref_kwabs_sizes(
    sizes: &[usize],
    epsilon: f64,
    z: usize,
    rng: &RandomStream,
) -> Result<ReferenceDistribution> {
    check_groups(sizes.len(), sizes.iter().sum())?;
    check_z(z)?;
    let budget = PrivacyBudget::pure(epsilon)?;
    let samples = simulate(z, rng, |r| {
        let db = uniform_groups(sizes, r)?;
        Ok(private_kwabs(&db, &budget, r)?.statistic)
    })?;
    ReferenceDistribution::new(samples, Tail::Upper, Provenance::FullSim)
}

/// Mean and variance of U_1 under the null with group sizes `m` and `n - m`.
pub fn mw_null_moments(n: usize, m: usize) -> (f64, f64) {
    let prod = (m * (n - m)) as f64;
    (prod / 2.0, prod * (n as f64 + 1.0) / 12.0)
}

fn mw_normal_draw<S: NoiseSource + ?Sized>(n: usize, m_star: usize, fold: bool, rng: &mut S) -> f64 {
    let (mean, var) = mw_null_moments(n, m_star);
    let y = mean + var.sqrt() * normal(rng);
    if fold {
        // U is the smaller of U_1 and U_2 = 2*mean - U_1.
        y.min(2.0 * mean - y)
    } else {
        y
    }
}

/// Null distribution of the private Mann-Whitney statistic given the released `m*`.
///
/// `NormalLaplace` folds the normal approximation of U_1 about its mean so
/// that it describes `min(U_1, U_2)`, then adds Lap((n - m*)/epsilon_U).
/// `FullSim` runs [`private_mw`] on uniform data with group sizes
/// `(m*, n - m*)`, re-estimating the group size in every replicate.
pub fn ref_mw(
    n: usize,
    m_star: usize,
    budget: &PrivacyBudget,
    z: usize,
    rng: &RandomStream,
    mode: MwMode,
    known_equal: bool,
) -> Result<ReferenceDistribution> {
    check_z(z)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if m_star > n / 2 {
        return Err(Error::InvalidParameter(format!(
            "m* = {m_star} exceeds floor(n/2) = {}",
            n / 2
        )));
    }
    if known_equal && m_star != n / 2 {
        return Err(Error::InvalidParameter(format!(
            "known-equal groups imply m* = {}, got {m_star}",
            n / 2
        )));
    }
    if !known_equal && budget.delta() <= 0.0 {
        return Err(Error::InvalidParameter(
            "Mann-Whitney needs delta > 0 unless group sizes are known to be equal".into(),
        ));
    }
    let samples = match mode {
        MwMode::NormalLaplace => {
            let eps_u = if known_equal {
                budget.epsilon()
            } else {
                budget.mw_parts().1
            };
            let scale = (n - m_star) as f64 / eps_u;
            simulate(z, rng, |r| {
                let u = mw_normal_draw(n, m_star, true, r);
                Ok(u + laplace_noise(scale, r))
            })?
        }
        MwMode::FullSim => {
            let sizes = [m_star, n - m_star];
            simulate(z, rng, |r| {
                if m_star == 0 {
                    // An empty group forces U = 0; only the noise steps remain.
                    return Ok(release_mw(0.0, 0, n, budget, r, known_equal)?.statistic);
                }
                let db = uniform_groups(&sizes, r)?;
                Ok(private_mw(&db, budget, r, known_equal)?.statistic)
            })?
        }
    };
    let provenance = match mode {
        MwMode::NormalLaplace => Provenance::NormalLaplace,
        MwMode::FullSim => Provenance::FullSim,
    };
    ReferenceDistribution::new(samples, Tail::Lower, provenance)
}

/// Null variance of the Pratt signed-rank statistic without zeros.
pub fn wilcoxon_null_variance(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0
}

/// Normal(0, n(n+1)(2n+1)/6) + Lap(2n/epsilon), read two-sided.
pub fn ref_wilcoxon(
    n: usize,
    epsilon: f64,
    z: usize,
    rng: &RandomStream,
) -> Result<ReferenceDistribution> {
    check_z(z)?;
    if n < 1 {
        return Err(Error::InvalidParameter("need n >= 1".into()));
    }
    PrivacyBudget::pure(epsilon)?;
    let sd = wilcoxon_null_variance(n).sqrt();
    let scale = wilcoxon_sensitivity(n) / epsilon;
    let samples = simulate(z, rng, |r| {
        let w = sd * normal(r);
        Ok(w + laplace_noise(scale, r))
    })?;
    ReferenceDistribution::new(samples, Tail::TwoSided, Provenance::NormalLaplace)
}

/// Normal(0, 0.3) truncated to [-1, 1] by rejection.
pub(crate) fn truncated_null_value<S: NoiseSource + ?Sized>(rng: &mut S) -> f64 {
    loop {
        let x = T_NULL_SIGMA * normal(rng);
        if x.abs() <= 1.0 {
            return x;
        }
    }
}

/// Private t statistics of truncated-normal null databases, read two-sided.
pub fn ref_t(
    n: usize,
    budget: &PrivacyBudget,
    z: usize,
    rng: &RandomStream,
) -> Result<ReferenceDistribution> {
    check_z(z)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let samples = simulate(z, rng, |r| {
        let values = (0..n).map(|_| truncated_null_value(r)).collect();
        let db = BoundedSample::new(values)?;
        Ok(private_t(&db, budget, r)?.statistic)
    })?;
    ReferenceDistribution::new(samples, Tail::TwoSided, Provenance::NormalSim)
}

/// Tail fraction of the reference at least as extreme as `stat`.
pub fn p_value(stat: f64, reference: &ReferenceDistribution) -> f64 {
    let z = reference.z();
    let count = match reference.tail() {
        Tail::Upper => reference.count_at_least(stat),
        Tail::Lower => reference.count_at_most(stat),
        Tail::TwoSided => {
            let a = stat.abs();
            if a == 0.0 {
                z
            } else {
                reference.count_at_least(a) + reference.count_at_most(-a)
            }
        }
    };
    count as f64 / z as f64
}

/// Rejection threshold at level `alpha`.
///
/// Upper tail: the empirical `1 - alpha` quantile. Lower tail: the `alpha`
/// quantile. Two-sided: the `1 - alpha` quantile of the absolute values.
pub fn critical_value(reference: &ReferenceDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let z = reference.z();
    if (z as f64) * alpha < 10.0 {
        return Err(Error::InvalidParameter(format!(
            "z = {z} is too small to resolve alpha = {alpha}; need z * alpha >= 10"
        )));
    }
    // Smallest order statistic with empirical CDF >= q.
    let index = |q: f64| (((q * z as f64) - 1e-9).ceil() as usize).clamp(1, z) - 1;
    Ok(match reference.tail() {
        Tail::Upper => reference.samples[index(1.0 - alpha)],
        Tail::Lower => reference.samples[index(alpha)],
        Tail::TwoSided => {
            let mut abs: Vec<f64> = reference.samples.iter().map(|s| s.abs()).collect();
            let k = index(1.0 - alpha);
            *abs.select_nth_unstable_by(k, f64::total_cmp).1
        }
    })
}

#[derive(Clone, Debug)]
pub enum TestData {
    Grouped(GroupedSample),
    Paired(PairedSample),
    Bounded(BoundedSample),
}

/// Read access to a private database.
pub trait DataSource {
    fn read(&self) -> &TestData;
}

impl DataSource for TestData {
    fn read(&self) -> &TestData {
        self
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TestConfig {
    pub kind: TestKind,
    pub budget: PrivacyBudget,
    pub reps: usize,
    /// Declared number of groups; may exceed the groups present in the data.
    pub groups: Option<usize>,
    pub known_equal_groups: bool,
    pub kw_mode: KwMode,
    pub mw_mode: MwMode,
}

impl TestConfig {
    pub fn new(kind: TestKind, budget: PrivacyBudget, reps: usize) -> Self {
        Self {
            kind,
            budget,
            reps,
            groups: None,
            known_equal_groups: false,
            kw_mode: KwMode::default(),
            mw_mode: MwMode::default(),
        }
    }
}

/// Everything a test releases about the database.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Release {
    pub statistic: f64,
    pub n: usize,
    pub g: Option<usize>,
    pub group_size: Option<GroupSizeRelease>,
}

fn mismatch(kind: TestKind, expected: &str) -> Error {
    Error::InvalidInput(format!("test `{kind}` needs {expected} data"))
}

/// Computes the private statistic. This is the only step that reads `data`.
pub fn release<S: NoiseSource + ?Sized>(
    data: &TestData,
    config: &TestConfig,
    rng: &mut S,
) -> Result<Release> {
    let budget = &config.budget;
    match (config.kind, data) {
        (TestKind::Kw | TestKind::Kwabs | TestKind::Mw, TestData::Grouped(db)) => {
            if let Some(declared) = config.groups {
                if declared != db.g() {
                    return Err(Error::InvalidInput(format!(
                        "declared {declared} groups but data has {}",
                        db.g()
                    )));
                }
            }
            let r = match config.kind {
                TestKind::Kw => private_kw(db, budget, rng)?,
                TestKind::Kwabs => private_kwabs(db, budget, rng)?,
                _ => private_mw(db, budget, rng, config.known_equal_groups)?,
            };
            Ok(Release {
                statistic: r.statistic,
                n: db.n(),
                g: Some(db.g()),
                group_size: r.group_size,
            })
        }
        (TestKind::Wilcoxon, TestData::Paired(db)) => Ok(Release {
            statistic: private_wilcoxon(db, budget, rng)?.statistic,
            n: db.n(),
            g: None,
            group_size: None,
        }),
        (TestKind::Ttest, TestData::Bounded(db)) => Ok(Release {
            statistic: private_t(db, budget, rng)?.statistic,
            n: db.n(),
            g: None,
            group_size: None,
        }),
        (kind @ (TestKind::Kw | TestKind::Kwabs | TestKind::Mw), _) => {
            Err(mismatch(kind, "grouped"))
        }
        (TestKind::Wilcoxon, _) => Err(mismatch(TestKind::Wilcoxon, "paired")),
        (TestKind::Ttest, _) => Err(mismatch(TestKind::Ttest, "single-column")),
    }
}

/// Builds the null reference from released quantities only.
pub fn reference_for(
    config: &TestConfig,
    released: &Release,
    rng: &RandomStream,
) -> Result<ReferenceDistribution> {
    let (n, z, eps) = (released.n, config.reps, config.budget.epsilon());
    let g = || released.g.ok_or_else(|| Error::InvalidInput("missing group count".into()));
    match config.kind {
        TestKind::Kw => ref_kw(g()?, n, eps, z, rng, config.kw_mode),
        TestKind::Kwabs => ref_kwabs(g()?, n, eps, z, rng),
        TestKind::Mw => {
            let m_star = released
                .group_size
                .ok_or_else(|| Error::InvalidInput("missing released m*".into()))?
                .m_star;
            ref_mw(
                n,
                m_star,
                &config.budget,
                z,
                rng,
                config.mw_mode,
                config.known_equal_groups,
            )
        }
        TestKind::Wilcoxon => ref_wilcoxon(n, eps, z, rng),
        TestKind::Ttest => ref_t(n, &config.budget, z, rng),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestOutcome {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub g: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub split: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub reference: Provenance,
    pub m_noisy: Option<f64>,
    pub m_star: Option<usize>,
}

/// Stream used for the private statistic; the reference uses [`REFERENCE_SUBSTREAM`].
pub const STATISTIC_SUBSTREAM: u64 = 0;
pub const REFERENCE_SUBSTREAM: u64 = 1;

/// Releases the private statistic once and compares it with a reference
/// built from the released quantities.
pub fn run_test<D: DataSource + ?Sized>(
    data: &D,
    config: &TestConfig,
    rng: &RandomStream,
) -> Result<TestOutcome> {
    if config.reps < MIN_RELEASE_REPS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_RELEASE_REPS} reference replicates, got {}",
            config.reps
        )));
    }
    let released = release(
        data.read(),
        config,
        &mut rng.substream(STATISTIC_SUBSTREAM),
    )?;
    let reference = reference_for(config, &released, &rng.substream(REFERENCE_SUBSTREAM))?;
    Ok(TestOutcome {
        test: config.kind,
        statistic: released.statistic,
        p_value: p_value(released.statistic, &reference),
        n: released.n,
        g: released.g,
        epsilon: config.budget.epsilon(),
        delta: config.budget.delta(),
        split: config.budget.split(),
        reps: config.reps,
        seed: rng.seed(),
        reference: reference.provenance(),
        m_noisy: released.group_size.map(|r| r.m_noisy),
        m_star: released.group_size.map(|r| r.m_star),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::cell::Cell;

    fn root(seed: u64) -> RandomStream {
        RandomStream::new(seed, 11)
    }

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    fn variance(xs: &[f64]) -> f64 {
        let m = mean(xs);
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    }

    #[test]
    fn p_value_counts() {
        let samples: Vec<f64> = (0..1001).map(f64::from).collect();
        let r = ReferenceDistribution::new(samples, Tail::Upper, Provenance::FullSim).unwrap();
        assert_eq!(p_value(5000.0, &r), 0.0);
        assert_eq!(p_value(0.0, &r), 1.0);
        assert_eq!(p_value(500.0, &r), 501.0 / 1001.0);
        let lower = r.clone().with_tail(Tail::Lower);
        assert_eq!(p_value(0.0, &lower), 1.0 / 1001.0);
        let two = ReferenceDistribution::new(vec![-3.0, -1.0, 0.0, 2.0], Tail::TwoSided, Provenance::FullSim)
            .unwrap();
        assert_eq!(p_value(2.0, &two), 0.5);
        assert_eq!(p_value(-1.0, &two), 0.75);
        assert_eq!(p_value(0.0, &two), 1.0);
    }

    #[test]
    fn critical_value_guard_and_order() {
        let samples: Vec<f64> = (1..=1000).map(f64::from).collect();
        let r = ReferenceDistribution::new(samples, Tail::Upper, Provenance::FullSim).unwrap();
        assert_eq!(critical_value(&r, 0.05).unwrap(), 950.0);
        assert_eq!(critical_value(&r.clone().with_tail(Tail::Lower), 0.05).unwrap(), 50.0);
        assert!(critical_value(&r, 0.001).is_err());
        assert!(critical_value(&r, 0.0).is_err());
        // Rejecting at the critical value has rate alpha.
        let c = critical_value(&r, 0.1).unwrap();
        assert_abs_diff_eq!(p_value(c, &r), 0.101, epsilon = 1e-12);
    }

    #[test]
    fn z_zero_is_rejected() {
        let rng = root(1);
        assert!(ref_kw(3, 30, 1.0, 0, &rng, KwMode::Chi2Laplace).is_err());
        assert!(ref_kwabs(3, 30, 1.0, 0, &rng).is_err());
        assert!(ref_kw(3, 2, 1.0, 10, &rng, KwMode::Chi2Laplace).is_err());
        let one = ref_kwabs(3, 30, 1.0, 1, &rng).unwrap();
        assert_eq!(one.z(), 1);
        assert!([0.0, 1.0].contains(&p_value(0.5, &one)));
    }

    #[test]
    fn kw_chi2_noiseless_quantile() {
        let r = ref_kw(3, 100, f64::INFINITY, 1_000_000, &root(2), KwMode::Chi2Laplace).unwrap();
        let q = critical_value(&r, 0.05).unwrap();
        assert!((q - 5.991).abs() <= 0.05, "{q}");
    }

    #[test]
    fn kw_modes_agree() {
        let a = ref_kw(3, 150, 1.0, 100_000, &root(3), KwMode::Chi2Laplace).unwrap();
        let b = ref_kw(3, 150, 1.0, 100_000, &root(4), KwMode::FullSim).unwrap();
        let (qa, qb) = (critical_value(&a, 0.05).unwrap(), critical_value(&b, 0.05).unwrap());
        assert!((qa / qb - 1.0).abs() <= 0.05, "{qa} vs {qb}");
    }

    #[test]
    fn kwabs_one_row_per_group_is_constant() {
        let r = ref_kwabs(4, 4, f64::INFINITY, 2000, &root(5)).unwrap();
        let s = r.samples();
        assert_eq!(s.first(), s.last());
        // Brute force over the 4! rank assignments gives the same value.
        let c = 4.0 * 3.0 / 16.0;
        let expected = c * [1.0f64, 2.0, 3.0, 4.0].iter().map(|r| (r - 2.5).abs()).sum::<f64>();
        assert_abs_diff_eq!(s[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn kwabs_noiseless_mean() {
        let r = ref_kwabs(3, 30, f64::INFINITY, 100_000, &root(6)).unwrap();
        // E|r_bar_i - (n+1)/2| with the finite-population variance
        // (n+1)(n-n_i)/(12 n_i), under the normal approximation.
        let (n, ni) = (30.0f64, 10.0f64);
        let sd = ((n + 1.0) * (n - ni) / (12.0 * ni)).sqrt();
        let expected = 4.0 * (n - 1.0) / (n * n) * 3.0 * ni * sd * (2.0 / std::f64::consts::PI).sqrt();
        let m = mean(r.samples());
        assert!((m / expected - 1.0).abs() <= 0.02, "{m} vs {expected}");
    }

    #[test]
    fn kwabs_equal_groups_maximise_critical_value() {
        let z = 100_000;
        let crit = |sizes: &[usize], seed| {
            let r = ref_kwabs_sizes(sizes, 1.0, z, &root(seed)).unwrap();
            critical_value(&r, 0.05).unwrap()
        };
        let equal = crit(&[20, 20, 20], 7);
        for (sizes, seed) in [(&[30, 20, 10], 8), (&[40, 15, 5], 9)] {
            let other = crit(sizes, seed);
            assert!(equal >= other - 0.1, "{equal} vs {other} for {sizes:?}");
        }
    }

    #[test]
    fn mw_normal_moments() {
        let n = 100;
        let rng = root(10);
        let draws: Vec<f64> = (0..1_000_000u64)
            .into_par_iter()
            .map(|i| mw_normal_draw(n, 50, false, &mut rng.substream(i)))
            .collect();
        assert!((mean(&draws) - 1250.0).abs() <= 10.0);
        let v = 50.0 * 50.0 * 101.0 / 12.0;
        assert!((variance(&draws) / v - 1.0).abs() <= 0.02);

        let b = PrivacyBudget::new(f64::INFINITY, 1e-6).unwrap();
        let r = ref_mw(n, 50, &b, 1_000_000, &rng, MwMode::NormalLaplace, false).unwrap();
        let folded = 1250.0 - v.sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean(r.samples()) - folded).abs() <= 10.0);
        assert_eq!(r.tail(), Tail::Lower);
    }

    #[test]
    fn mw_zero_m_star_is_pure_laplace() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let r = ref_mw(50, 0, &b, 100_000, &root(12), MwMode::NormalLaplace, false).unwrap();
        let mad = r.samples().iter().map(|x| x.abs()).sum::<f64>() / 1e5;
        let scale = 50.0 / b.mw_parts().1;
        assert!((mad / scale - 1.0).abs() <= 0.02, "{mad} vs {scale}");
        let full = ref_mw(50, 0, &b, 2000, &root(12), MwMode::FullSim, false).unwrap();
        assert_eq!(full.z(), 2000);
        assert!(ref_mw(50, 26, &b, 10, &root(12), MwMode::NormalLaplace, false).is_err());
    }

    #[test]
    fn mw_modes_agree() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let a = ref_mw(200, 100, &b, 100_000, &root(13), MwMode::NormalLaplace, false).unwrap();
        let f = ref_mw(200, 100, &b, 100_000, &root(14), MwMode::FullSim, false).unwrap();
        let (qa, qf) = (critical_value(&a, 0.05).unwrap(), critical_value(&f, 0.05).unwrap());
        assert!((qa / qf - 1.0).abs() <= 0.05, "{qa} vs {qf}");
    }

    #[test]
    fn wilcoxon_reference() {
        let r = ref_wilcoxon(100, f64::INFINITY, 1_000_000, &root(15)).unwrap();
        let sd = variance(r.samples()).sqrt();
        assert!((sd / 581.68 - 1.0).abs() <= 0.01, "{sd}");
        assert_eq!(r.tail(), Tail::TwoSided);
    }

    #[test]
    fn t_reference() {
        let b = PrivacyBudget::pure(f64::INFINITY).unwrap();
        let r = ref_t(10_000, &b, 10_000, &root(16)).unwrap();
        let q = critical_value(&r.with_tail(Tail::Upper), 0.025).unwrap();
        assert!((q - 1.96).abs() <= 0.05, "{q}");

        let noisy = ref_t(5, &PrivacyBudget::pure(0.1).unwrap(), 1000, &root(17)).unwrap();
        assert_eq!(noisy.z(), 1000);
        assert!(noisy.samples().windows(2).all(|w| w[0] <= w[1]));
        assert!(noisy.samples().iter().any(|&s| s == 0.0));
    }

    struct Counting {
        data: TestData,
        reads: Cell<usize>,
    }

    impl DataSource for Counting {
        fn read(&self) -> &TestData {
            self.reads.set(self.reads.get() + 1);
            &self.data
        }
    }

    fn grouped(seed: u64, shift: f64) -> GroupedSample {
        let mut r = RandomStream::new(seed, 0);
        GroupedSample::new(
            (0..3)
                .map(|i| (0..40).map(|_| normal(&mut r) + shift * f64::from(i)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn run_test_reads_data_once() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let paired = PairedSample::new((0..30).map(|i| (0.0, f64::from(i % 7) - 3.0)).collect()).unwrap();
        let bounded = BoundedSample::new((0..30).map(|i| f64::from(i % 5) / 5.0 - 0.4).collect()).unwrap();
        let two = GroupedSample::new(grouped(1, 0.0).groups()[..2].to_vec()).unwrap();
        let cases = [
            (TestKind::Kw, TestData::Grouped(grouped(1, 0.0))),
            (TestKind::Kwabs, TestData::Grouped(grouped(1, 0.0))),
            (TestKind::Mw, TestData::Grouped(two)),
            (TestKind::Wilcoxon, TestData::Paired(paired)),
            (TestKind::Ttest, TestData::Bounded(bounded)),
        ];
        for (kind, data) in cases {
            let budget = if kind == TestKind::Mw { b } else { PrivacyBudget::pure(1.0).unwrap() };
            let source = Counting { data, reads: Cell::new(0) };
            let config = TestConfig::new(kind, budget, 2000);
            let out = run_test(&source, &config, &RandomStream::new(3, 0)).unwrap();
            assert_eq!(source.reads.get(), 1, "{kind}");
            assert!((0.0..=1.0).contains(&out.p_value));
            assert_eq!(out, run_test(&source, &config, &RandomStream::new(3, 0)).unwrap());
        }
    }

    #[test]
    fn run_test_errors() {
        let b = PrivacyBudget::pure(1.0).unwrap();
        let data = TestData::Grouped(grouped(2, 0.0));
        let rng = RandomStream::new(1, 0);
        assert!(run_test(&data, &TestConfig::new(TestKind::Kw, b, 999), &rng).is_err());
        assert!(matches!(
            run_test(&data, &TestConfig::new(TestKind::Wilcoxon, b, 1000), &rng),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn kwabs_detects_strong_effect() {
        let data = TestData::Grouped(grouped(4, 3.0));
        let config = TestConfig::new(TestKind::Kwabs, PrivacyBudget::pure(f64::INFINITY).unwrap(), 10_000);
        let out = run_test(&data, &config, &RandomStream::new(9, 0)).unwrap();
        assert!(out.p_value < 0.001, "{}", out.p_value);
    }

    #[test]
    fn near_equal_allocation() {
        assert_eq!(near_equal_sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(near_equal_sizes(9, 3), vec![3, 3, 3]);
    }
}
