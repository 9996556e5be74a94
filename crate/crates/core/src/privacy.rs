//! Laplace mechanism, sensitivity constants and the private test statistics.

mod oracle;

pub use oracle::{
    difference_grid, rank_grid, unit_grid, OracleDatabase, SensitivityOracle, StatisticKind,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::random::NoiseSource;
use crate::rankstats::{
    kw_from_rank_sums, kwabs_from_rank_sums, mw_stat, rank_midrank, rank_random, rank_sums,
    wilcoxon_pratt_stat, BoundedSample, GroupedSample, PairedSample,
};

/// Global sensitivity of the Kruskal-Wallis h statistic on untied ranks.
pub const KW_SENSITIVITY: f64 = 87.0;
/// Global sensitivity of the absolute-value Kruskal-Wallis statistic.
pub const KWABS_SENSITIVITY: f64 = 8.0;
/// Default share of the Mann-Whitney budget spent estimating the smaller group size.
pub const MW_DEFAULT_SPLIT: f64 = 0.65;
/// Default share of the t-test budget spent on the mean.
pub const T_DEFAULT_SPLIT: f64 = 0.5;
/// Default delta for Mann-Whitney in simulation commands.
pub const MW_DEFAULT_DELTA: f64 = 1e-6;

pub fn wilcoxon_sensitivity(n: usize) -> f64 {
    2.0 * n as f64
}

pub fn mean_sensitivity(n: usize) -> f64 {
    2.0 / n as f64
}

pub fn variance_sensitivity(n: usize) -> f64 {
    5.0 / (n as f64 - 1.0)
}

/// Total privacy budget for one test.
///
/// `epsilon = +inf` is accepted and means "no noise", which is how the public
/// baselines are run through the same code path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
    split: Option<f64>,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in [0, 1), got {delta}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            split: None,
        })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    /// Fraction of epsilon for the first released quantity (m for
    /// Mann-Whitney, the mean for the t-test).
    pub fn with_split(mut self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "budget split must lie in (0, 1), got {fraction}"
            )));
        }
        self.split = Some(fraction);
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn split(&self) -> Option<f64> {
        self.split
    }

    /// `(epsilon_m, epsilon_U)`.
    pub fn mw_parts(&self) -> (f64, f64) {
        let f = self.split.unwrap_or(MW_DEFAULT_SPLIT);
        (self.epsilon * f, self.epsilon * (1.0 - f))
    }

    /// `(epsilon_mean, epsilon_variance)`.
    pub fn t_parts(&self) -> (f64, f64) {
        let f = self.split.unwrap_or(T_DEFAULT_SPLIT);
        (self.epsilon * f, self.epsilon * (1.0 - f))
    }

    fn require_pure(&self, test: &str) -> Result<()> {
        if self.delta != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{test} is pure epsilon-DP; delta must be 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Inverse-CDF Laplace draw for a given uniform `u` in (0, 1).
pub fn laplace_from_uniform(scale: f64, u: f64) -> f64 {
    let centred = u - 0.5;
    let magnitude = -(1.0 - 2.0 * centred.abs()).ln();
    if centred < 0.0 {
        -scale * magnitude
    } else {
        scale * magnitude
    }
}

/// One draw from Lap(0, `scale`).
pub fn laplace_sample<S: NoiseSource + ?Sized>(scale: f64, rng: &mut S) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Laplace scale must be positive and finite, got {scale}"
        )));
    }
    Ok(laplace_from_uniform(scale, rng.uniform_open()))
}

/// Like [`laplace_sample`] but accepts scale 0 (infinite epsilon) and returns 0.
pub(crate) fn laplace_noise<S: NoiseSource + ?Sized>(scale: f64, rng: &mut S) -> f64 {
    let u = rng.uniform_open();
    if scale == 0.0 {
        0.0
    } else {
        laplace_from_uniform(scale, u)
    }
}

/// Released Mann-Whitney group-size quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupSizeRelease {
    /// Noisy smaller-group size.
    pub m_noisy: f64,
    /// High-probability lower bound on the smaller group size.
    pub m_star: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrivateStatResult {
    pub statistic: f64,
    pub group_size: Option<GroupSizeRelease>,
}

impl PrivateStatResult {
    fn plain(statistic: f64) -> Self {
        Self {
            statistic,
            group_size: None,
        }
    }
}

/// Kruskal-Wallis h with random tie-breaking plus Lap(87/epsilon).
pub fn private_kw<S: NoiseSource + ?Sized>(
    db: &GroupedSample,
    budget: &PrivacyBudget,
    rng: &mut S,
) -> Result<PrivateStatResult> {
    budget.require_pure("Kruskal-Wallis")?;
    let ranks = rank_random(&db.values(), rng)?;
    let sizes = db.sizes();
    let h = kw_from_rank_sums(db.n(), &sizes, &rank_sums(&sizes, &ranks.ranks));
    let noise = laplace_noise(KW_SENSITIVITY / budget.epsilon(), rng);
    Ok(PrivateStatResult::plain(h + noise))
}

/// Absolute-value Kruskal-Wallis with random tie-breaking plus Lap(8/epsilon).
pub fn private_kwabs<S: NoiseSource + ?Sized>(
    db: &GroupedSample,
    budget: &PrivacyBudget,
    rng: &mut S,
) -> Result<PrivateStatResult> {
    budget.require_pure("absolute-value Kruskal-Wallis")?;
    let ranks = rank_random(&db.values(), rng)?;
    let sizes = db.sizes();
    let h = kwabs_from_rank_sums(db.n(), &sizes, &rank_sums(&sizes, &ranks.ranks));
    let noise = laplace_noise(KWABS_SENSITIVITY / budget.epsilon(), rng);
    Ok(PrivateStatResult::plain(h + noise))
}

/// `m* = max(ceil(m_noisy - c), 0)`, additionally capped at `floor(n/2)`.
pub fn m_star(m_noisy: f64, epsilon_m: f64, delta: f64, n: usize) -> usize {
    let c = -(2.0 * delta).ln() / epsilon_m;
    let bound = (m_noisy - c).ceil().max(0.0);
    (bound as usize).min(n / 2)
}

/// Mann-Whitney U with a privately estimated noise scale.
///
/// Spends `epsilon_m` on a noisy smaller-group size, lowers it to `m*` so that
/// `n - m*` bounds the local sensitivity with probability `1 - delta`, then
/// adds Lap((n - m*)/epsilon_U) to U. With `known_equal` the group sizes are
/// public, `m* = floor(n/2)` and all of epsilon goes to U.
pub fn private_mw<S: NoiseSource + ?Sized>(
    db: &GroupedSample,
    budget: &PrivacyBudget,
    rng: &mut S,
    known_equal: bool,
) -> Result<PrivateStatResult> {
    let sizes = db.sizes();
    if sizes.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "Mann-Whitney needs exactly 2 groups, got {}",
            sizes.len()
        )));
    }
    let ranks = rank_midrank(&db.values())?;
    let u = mw_stat(db, &ranks)?.u;
    if known_equal && sizes[0].abs_diff(sizes[1]) > 1 {
        return Err(Error::InvalidInput(format!(
            "groups declared equal but have sizes {} and {}",
            sizes[0], sizes[1]
        )));
    }
    release_mw(u, sizes[0].min(sizes[1]), db.n(), budget, rng, known_equal)
}

/// Noise step of [`private_mw`] given U and the true smaller-group size.
pub(crate) fn release_mw<S: NoiseSource + ?Sized>(
    u: f64,
    m: usize,
    n: usize,
    budget: &PrivacyBudget,
    rng: &mut S,
    known_equal: bool,
) -> Result<PrivateStatResult> {
    if known_equal {
        let m_star = n / 2;
        let noise = laplace_noise((n - m_star) as f64 / budget.epsilon(), rng);
        return Ok(PrivateStatResult {
            statistic: u + noise,
            group_size: Some(GroupSizeRelease {
                m_noisy: m_star as f64,
                m_star,
            }),
        });
    }
    if budget.delta() <= 0.0 {
        return Err(Error::InvalidParameter(
            "Mann-Whitney needs delta > 0 unless group sizes are known to be equal".into(),
        ));
    }
    let (eps_m, eps_u) = budget.mw_parts();
    let m_noisy = m as f64 + laplace_noise(1.0 / eps_m, rng);
    let m_star = m_star(m_noisy, eps_m, budget.delta(), n);
    let noise = laplace_noise((n - m_star) as f64 / eps_u, rng);
    Ok(PrivateStatResult {
        statistic: u + noise,
        group_size: Some(GroupSizeRelease { m_noisy, m_star }),
    })
}

/// Pratt signed-rank statistic plus Lap(2n/epsilon).
pub fn private_wilcoxon<S: NoiseSource + ?Sized>(
    db: &PairedSample,
    budget: &PrivacyBudget,
    rng: &mut S,
) -> Result<PrivateStatResult> {
    budget.require_pure("Wilcoxon signed-rank")?;
    let w = wilcoxon_pratt_stat(db);
    let noise = laplace_noise(wilcoxon_sensitivity(db.n()) / budget.epsilon(), rng);
    Ok(PrivateStatResult::plain(w + noise))
}

/// t statistic from separately privatised mean and variance.
///
/// Returns 0 when the noisy variance is not positive.
pub fn private_t<S: NoiseSource + ?Sized>(
    db: &BoundedSample,
    budget: &PrivacyBudget,
    rng: &mut S,
) -> Result<PrivateStatResult> {
    budget.require_pure("t-test")?;
    let n = db.n();
    let (eps_mean, eps_var) = budget.t_parts();
    let (mean, var) = db.mean_variance();
    let noisy_mean = mean + laplace_noise(mean_sensitivity(n) / eps_mean, rng);
    let noisy_var = var + laplace_noise(variance_sensitivity(n) / eps_var, rng);
    let t = if noisy_var > 0.0 {
        noisy_mean / (noisy_var.sqrt() / (n as f64).sqrt())
    } else {
        0.0
    };
    Ok(PrivateStatResult::plain(t))
}
