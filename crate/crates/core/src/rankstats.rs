//! Ranking kernels and the public (non-private) test statistics.
//!
//! Grouped statistics take a [`RankVector`] aligned with
//! [`GroupedSample::values`], i.e. group 0's observations first, then group 1's,
//! and so on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::NoiseSource;

/// Continuous observations partitioned into `g` declared groups.
///
/// Individual groups may be empty; `g` counts valid groups, not observed ones.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedSample {
    groups: Vec<Vec<f64>>,
}

impl GroupedSample {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 groups, got {}",
                groups.len()
            )));
        }
        let n: usize = groups.iter().map(Vec::len).sum();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if groups.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        Ok(Self { groups })
    }

    pub fn g(&self) -> usize {
        self.groups.len()
    }

    pub fn n(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// All observations, group by group.
    pub fn values(&self) -> Vec<f64> {
        self.groups.iter().flatten().copied().collect()
    }
}

/// Paired rows `(u, v)`; the test works on `d = v - u`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    rows: Vec<(f64, f64)>,
}

impl PairedSample {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("paired sample is empty".into()));
        }
        if rows.iter().any(|(u, v)| !u.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        Ok(Self { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn differences(&self) -> Vec<f64> {
        self.rows.iter().map(|(u, v)| v - u).collect()
    }
}

/// Observations already scaled into `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedSample {
    values: Vec<f64>,
}

impl BoundedSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "value {v} is outside [-1, 1]; rescale the data first"
            )));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample mean and unbiased variance.
    pub fn mean_variance(&self) -> (f64, f64) {
        mean_variance(&self.values)
    }
}

pub(crate) fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankScheme {
    /// Tied values share the average of the positions they occupy.
    Midrank,
    /// Ties are ordered by a uniformly random permutation; ranks are 1..=n.
    RandomTiebreak,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankVector {
    pub ranks: Vec<f64>,
    pub scheme: RankScheme,
}

impl RankVector {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

fn check_rankable(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot rank an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("cannot rank non-finite values".into()));
    }
    Ok(())
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Calls `f(start, end)` for each maximal run of equal values in sorted order.
fn for_each_tie_class(values: &[f64], order: &[usize], mut f: impl FnMut(usize, usize)) {
    let mut start = 0;
    while start < order.len() {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == v {
            end += 1;
        }
        f(start, end);
        start = end;
    }
}

pub fn rank_midrank(values: &[f64]) -> Result<RankVector> {
    check_rankable(values)?;
    let order = sorted_order(values);
    let mut ranks = vec![0.0; values.len()];
    for_each_tie_class(values, &order, |start, end| {
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
    });
    Ok(RankVector {
        ranks,
        scheme: RankScheme::Midrank,
    })
}

/// Ranks 1..=n with ties ordered by a uniformly random permutation from `rng`.
pub fn rank_random<S: NoiseSource + ?Sized>(values: &[f64], rng: &mut S) -> Result<RankVector> {
    check_rankable(values)?;
    let mut order = sorted_order(values);
    let mut classes = Vec::new();
    for_each_tie_class(values, &order, |start, end| {
        if end - start > 1 {
            classes.push((start, end));
        }
    });
    for (start, end) in classes {
        let class = &mut order[start..end];
        for i in (1..class.len()).rev() {
            class.swap(i, rng.below(i + 1));
        }
    }
    let mut ranks = vec![0.0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = (pos + 1) as f64;
    }
    Ok(RankVector {
        ranks,
        scheme: RankScheme::RandomTiebreak,
    })
}

fn check_aligned(db: &GroupedSample, ranks: &RankVector) -> Result<()> {
    if ranks.len() != db.n() {
        return Err(Error::InvalidInput(format!(
            "rank vector has {} entries for {} observations",
            ranks.len(),
            db.n()
        )));
    }
    Ok(())
}

/// Per-group rank sums, in group order.
pub fn rank_sums(sizes: &[usize], ranks: &[f64]) -> Vec<f64> {
    let mut offset = 0;
    sizes
        .iter()
        .map(|&len| {
            let s = ranks[offset..offset + len].iter().sum();
            offset += len;
            s
        })
        .collect()
}

/// `12/(n(n+1)) * sum(R_i^2 / n_i) - 3(n+1)`; valid only for untied ranks.
pub fn kw_from_rank_sums(n: usize, sizes: &[usize], sums: &[f64]) -> f64 {
    let nf = n as f64;
    let between: f64 = sizes
        .iter()
        .zip(sums)
        .filter(|(&len, _)| len > 0)
        .map(|(&len, &r)| r * r / len as f64)
        .sum();
    12.0 / (nf * (nf + 1.0)) * between - 3.0 * (nf + 1.0)
}

/// Parity-dependent absolute-value statistic from rank sums; untied ranks only.
pub fn kwabs_from_rank_sums(n: usize, sizes: &[usize], sums: &[f64]) -> f64 {
    let nf = n as f64;
    let centre = (nf + 1.0) / 2.0;
    let spread: f64 = sizes
        .iter()
        .zip(sums)
        .map(|(&len, &r)| (r - len as f64 * centre).abs())
        .sum();
    kwabs_constant(n) * spread
}

fn kwabs_constant(n: usize) -> f64 {
    let nf = n as f64;
    if n % 2 == 0 {
        4.0 * (nf - 1.0) / (nf * nf)
    } else {
        4.0 / (nf + 1.0)
    }
}

/// Kruskal-Wallis h. Random-tiebreak ranks use the simplified form, midranks
/// the general tie-corrected form.
pub fn kw_stat(db: &GroupedSample, ranks: &RankVector) -> Result<f64> {
    check_aligned(db, ranks)?;
    match ranks.scheme {
        RankScheme::RandomTiebreak => {
            let sizes = db.sizes();
            let sums = rank_sums(&sizes, &ranks.ranks);
            Ok(kw_from_rank_sums(db.n(), &sizes, &sums))
        }
        RankScheme::Midrank => kw_stat_general(db, ranks),
    }
}

/// `(n-1) * sum n_i (rbar_i - rbar)^2 / sum sum (r_ij - rbar)^2`, valid with ties.
pub fn kw_stat_general(db: &GroupedSample, ranks: &RankVector) -> Result<f64> {
    general_form(db, ranks, |x| x * x)
}

/// Absolute-value analogue of [`kw_stat_general`].
pub fn kwabs_stat_general(db: &GroupedSample, ranks: &RankVector) -> Result<f64> {
    general_form(db, ranks, f64::abs)
}

fn general_form(db: &GroupedSample, ranks: &RankVector, dist: impl Fn(f64) -> f64) -> Result<f64> {
    check_aligned(db, ranks)?;
    let n = db.n() as f64;
    let centre = (n + 1.0) / 2.0;
    let sizes = db.sizes();
    let sums = rank_sums(&sizes, &ranks.ranks);
    let between: f64 = sizes
        .iter()
        .zip(&sums)
        .filter(|(&len, _)| len > 0)
        .map(|(&len, &r)| len as f64 * dist(r / len as f64 - centre))
        .sum();
    let total: f64 = ranks.ranks.iter().map(|&r| dist(r - centre)).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "all observations tied; rank dispersion is zero".into(),
        ));
    }
    Ok((n - 1.0) * between / total)
}

/// Absolute-value Kruskal-Wallis statistic.
pub fn kwabs_stat(db: &GroupedSample, ranks: &RankVector) -> Result<f64> {
    check_aligned(db, ranks)?;
    match ranks.scheme {
        RankScheme::RandomTiebreak => {
            let sizes = db.sizes();
            let sums = rank_sums(&sizes, &ranks.ranks);
            Ok(kwabs_from_rank_sums(db.n(), &sizes, &sums))
        }
        RankScheme::Midrank => kwabs_stat_general(db, ranks),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MannWhitney {
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
}

pub fn mw_stat(db: &GroupedSample, ranks: &RankVector) -> Result<MannWhitney> {
    check_aligned(db, ranks)?;
    let sizes = db.sizes();
    if sizes.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "Mann-Whitney needs exactly 2 groups, got {}",
            sizes.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Degenerate(
            "Mann-Whitney U is undefined with an empty group".into(),
        ));
    }
    let sums = rank_sums(&sizes, &ranks.ranks);
    let u_i = |i: usize| sums[i] - (sizes[i] * (sizes[i] + 1)) as f64 / 2.0;
    let (u1, u2) = (u_i(0), u_i(1));
    Ok(MannWhitney {
        u: u1.min(u2),
        u1,
        u2,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn signed_rank_sum(diffs: &[f64]) -> f64 {
    if diffs.is_empty() {
        return 0.0;
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    // Finite differences are guaranteed by PairedSample.
    let ranks = rank_midrank(&mags).expect("finite, nonempty");
    diffs
        .iter()
        .zip(&ranks.ranks)
        .map(|(&d, &r)| sign(d) * r)
        .sum()
}

/// Standard signed-rank statistic: zero differences are dropped before ranking.
pub fn wilcoxon_stat(db: &PairedSample) -> f64 {
    let nonzero: Vec<f64> = db
        .differences()
        .into_iter()
        .filter(|&d| d != 0.0)
        .collect();
    signed_rank_sum(&nonzero)
}

/// Pratt variant: zero differences keep their rank but contribute sign 0.
pub fn wilcoxon_pratt_stat(db: &PairedSample) -> f64 {
    signed_rank_sum(&db.differences())
}

/// One-sample t statistic `mean / (s / sqrt(n))`.
pub fn t_stat(db: &BoundedSample) -> Result<f64> {
    let (mean, var) = db.mean_variance();
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "zero sample variance; t statistic undefined".into(),
        ));
    }
    Ok(mean / (var.sqrt() / (db.n() as f64).sqrt()))
}
