//! Brute-force local sensitivity over single-row replacements.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rankstats::{
    kw_from_rank_sums, kwabs_from_rank_sums, mean_variance, rank_midrank, wilcoxon_pratt_stat,
    BoundedSample, GroupedSample, PairedSample,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    Kw,
    KwAbs,
    MannWhitney,
    WilcoxonPratt,
    Mean,
    Variance,
}

#[derive(Clone, Debug)]
pub enum OracleDatabase {
    Grouped(GroupedSample),
    Paired(PairedSample),
    Bounded(BoundedSample),
}

impl OracleDatabase {
    fn n(&self) -> usize {
        match self {
            OracleDatabase::Grouped(db) => db.n(),
            OracleDatabase::Paired(db) => db.n(),
            OracleDatabase::Bounded(db) => db.n(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SensitivityOracle {
    pub max_n: usize,
}

impl Default for SensitivityOracle {
    fn default() -> Self {
        Self { max_n: 8 }
    }
}

impl SensitivityOracle {
    /// Largest `|f(x) - f(x')|` over neighbours `x'` that replace one row of `x`.
    ///
    /// Grouped databases move one observation to any grid value and any group.
    /// Paired databases replace one pair, which only matters through its
    /// difference, so the grid holds candidate differences. Bounded databases
    /// replace one value with a grid value in [-1, 1].
    ///
    /// KW and KWabs are maximised over every tie-break ordering shared by `x`
    /// and `x'`. Mann-Whitney and Wilcoxon use midranks, as the private
    /// statistics do. Neighbours that empty a Mann-Whitney group are skipped.
    pub fn local_sensitivity(
        &self,
        kind: StatisticKind,
        db: &OracleDatabase,
        grid: &[f64],
    ) -> Result<f64> {
        if db.n() > self.max_n {
            return Err(Error::InvalidParameter(format!(
                "oracle refuses n = {} above cap {}",
                db.n(),
                self.max_n
            )));
        }
        if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "oracle grid must be non-empty and finite".into(),
            ));
        }
        match (kind, db) {
            (StatisticKind::Kw, OracleDatabase::Grouped(db)) => {
                Ok(grouped_tiebreak(db, grid, kw_from_rank_sums))
            }
            (StatisticKind::KwAbs, OracleDatabase::Grouped(db)) => {
                Ok(grouped_tiebreak(db, grid, kwabs_from_rank_sums))
            }
            (StatisticKind::MannWhitney, OracleDatabase::Grouped(db)) => mann_whitney(db, grid),
            (StatisticKind::WilcoxonPratt, OracleDatabase::Paired(db)) => Ok(wilcoxon(db, grid)),
            (StatisticKind::Mean, OracleDatabase::Bounded(db)) => {
                bounded(db, grid, |v| mean_variance(v).0)
            }
            (StatisticKind::Variance, OracleDatabase::Bounded(db)) => {
                bounded(db, grid, |v| mean_variance(v).1)
            }
            (kind, _) => Err(Error::InvalidInput(format!(
                "statistic {kind:?} does not apply to this database shape"
            ))),
        }
    }
}

/// Distinct values plus one point below all, one above all and every midpoint.
pub fn rank_grid(values: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let (Some(&lo), Some(&hi)) = (distinct.first(), distinct.last()) else {
        return vec![0.0];
    };
    let mut grid = vec![lo - 1.0];
    for w in distinct.windows(2) {
        grid.push(w[0]);
        grid.push((w[0] + w[1]) / 2.0);
    }
    grid.push(hi);
    grid.push(hi + 1.0);
    grid
}

/// Candidate paired differences: every magnitude position, both signs, and zero.
pub fn difference_grid(diffs: &[f64]) -> Vec<f64> {
    let mut symmetric = vec![0.0];
    for &d in diffs {
        symmetric.push(d);
        symmetric.push(-d);
    }
    rank_grid(&symmetric)
}

/// `{k / steps : k = -steps..=steps}`.
pub fn unit_grid(steps: u32) -> Vec<f64> {
    let s = i64::from(steps.max(1));
    (-s..=s).map(|k| k as f64 / s as f64).collect()
}

fn flatten(db: &GroupedSample) -> (Vec<f64>, Vec<usize>) {
    let mut labels = Vec::with_capacity(db.n());
    for (gi, group) in db.groups().iter().enumerate() {
        labels.extend(std::iter::repeat_n(gi, group.len()));
    }
    (db.values(), labels)
}

fn neighbours(n: usize, grid: &[f64], g: usize) -> Vec<(usize, f64, usize)> {
    let mut out = Vec::with_capacity(n * grid.len() * g);
    for row in 0..n {
        for &w in grid {
            for label in 0..g {
                out.push((row, w, label));
            }
        }
    }
    out
}

/// Sizes and rank sums from per-row ranks and labels.
fn sums_by_label(ranks: &[f64], labels: &[usize], g: usize) -> (Vec<usize>, Vec<f64>) {
    let mut sizes = vec![0; g];
    let mut sums = vec![0.0; g];
    for (&r, &l) in ranks.iter().zip(labels) {
        sizes[l] += 1;
        sums[l] += r;
    }
    (sizes, sums)
}

/// Ranks by `(value, key)`; keys only matter inside tie classes.
fn ranks_with_keys(values: &[f64], keys: &[usize]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(keys[a].cmp(&keys[b])));
    let mut ranks = vec![0.0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = (pos + 1) as f64;
    }
    ranks
}

fn tied_rows(values: &[f64], out: &mut [bool]) {
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            if values[i] == values[j] {
                out[i] = true;
                out[j] = true;
            }
        }
    }
}

/// Heap's algorithm; calls `f` once per permutation of `items`.
fn for_each_permutation(items: &mut [usize], f: &mut impl FnMut(&[usize])) {
    let k = items.len();
    let mut c = vec![0; k];
    f(items);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            f(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn grouped_tiebreak(
    db: &GroupedSample,
    grid: &[f64],
    stat: fn(usize, &[usize], &[f64]) -> f64,
) -> f64 {
    let (values, labels) = flatten(db);
    let n = values.len();
    let g = db.g();
    neighbours(n, grid, g)
        .into_par_iter()
        .map(|(row, w, label)| {
            let mut values2 = values.clone();
            let mut labels2 = labels.clone();
            values2[row] = w;
            labels2[row] = label;

            // Each row carries one key into both databases, so a tie-break
            // outcome is a joint ordering of the rows that tie anywhere.
            let mut tied = vec![false; n];
            tied_rows(&values, &mut tied);
            tied_rows(&values2, &mut tied);
            let mut tied_idx: Vec<usize> = (0..n).filter(|&i| tied[i]).collect();
            let mut keys = vec![0; n];
            let mut worst = 0.0f64;
            let slots = tied_idx.clone();
            for_each_permutation(&mut tied_idx, &mut |perm| {
                for (slot, &row) in slots.iter().zip(perm) {
                    keys[row] = *slot;
                }
                let (s1, r1) = sums_by_label(&ranks_with_keys(&values, &keys), &labels, g);
                let (s2, r2) = sums_by_label(&ranks_with_keys(&values2, &keys), &labels2, g);
                worst = worst.max((stat(n, &s1, &r1) - stat(n, &s2, &r2)).abs());
            });
            worst
        })
        .reduce(|| 0.0, f64::max)
}

fn midrank_u(values: &[f64], labels: &[usize]) -> Option<f64> {
    let ranks = rank_midrank(values).ok()?;
    let (sizes, sums) = sums_by_label(&ranks.ranks, labels, 2);
    if sizes.contains(&0) {
        return None;
    }
    let u = |i: usize| sums[i] - (sizes[i] * (sizes[i] + 1)) as f64 / 2.0;
    Some(u(0).min(u(1)))
}

fn mann_whitney(db: &GroupedSample, grid: &[f64]) -> Result<f64> {
    if db.g() != 2 {
        return Err(Error::InvalidInput(format!(
            "Mann-Whitney needs exactly 2 groups, got {}",
            db.g()
        )));
    }
    let (values, labels) = flatten(db);
    let base = midrank_u(&values, &labels).ok_or_else(|| {
        Error::Degenerate("Mann-Whitney U is undefined with an empty group".into())
    })?;
    Ok(neighbours(values.len(), grid, 2)
        .into_par_iter()
        .filter_map(|(row, w, label)| {
            let mut values2 = values.clone();
            let mut labels2 = labels.clone();
            values2[row] = w;
            labels2[row] = label;
            midrank_u(&values2, &labels2).map(|u| (u - base).abs())
        })
        .reduce(|| 0.0, f64::max))
}

fn wilcoxon(db: &PairedSample, grid: &[f64]) -> f64 {
    let diffs = db.differences();
    let of = |d: &[f64]| {
        let rows = d.iter().map(|&x| (0.0, x)).collect();
        wilcoxon_pratt_stat(&PairedSample::new(rows).expect("finite differences"))
    };
    let base = of(&diffs);
    (0..diffs.len())
        .into_par_iter()
        .flat_map_iter(|row| grid.iter().map(move |&w| (row, w)))
        .map(|(row, w)| {
            let mut d = diffs.clone();
            d[row] = w;
            (of(&d) - base).abs()
        })
        .reduce(|| 0.0, f64::max)
}

fn bounded(db: &BoundedSample, grid: &[f64], stat: impl Fn(&[f64]) -> f64 + Sync) -> Result<f64> {
    if grid.iter().any(|w| w.abs() > 1.0) {
        return Err(Error::InvalidParameter(
            "t-test oracle grid must lie in [-1, 1]".into(),
        ));
    }
    let values = db.values();
    let base = stat(values);
    Ok((0..values.len())
        .into_par_iter()
        .flat_map_iter(|row| grid.iter().map(move |&w| (row, w)))
        .map(|(row, w)| {
            let mut v = values.to_vec();
            v[row] = w;
            (stat(&v) - base).abs()
        })
        .reduce(|| 0.0, f64::max))
}
