//! Power, Type-I and budget-split simulations.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{
    normal, p_value, reference_for, release, KwMode, MwMode, Release, ReferenceDistribution,
    TestConfig, TestData, TestKind,
};
use crate::privacy::PrivacyBudget;
use crate::random::{NoiseSource, RandomStream};
use crate::rankstats::{BoundedSample, GroupedSample, PairedSample};

const TRIAL_STREAM: u64 = 0x7472_6961_6c73;
const REFERENCE_STREAM: u64 = 0x7265_6673;

/// Standard deviation of t-test data after mapping into [-1, 1]. It matches
/// the null generator of the t reference distribution.
pub const T_DATA_SIGMA: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataShape {
    Normal,
    /// Location-shifted uniforms with unit standard deviation.
    Uniform,
    /// Paired data where this fraction of rows has a zero difference.
    ZeroInflated(f64),
}

#[derive(Clone, Debug)]
pub struct SimulationSpec {
    pub kind: TestKind,
    pub n: usize,
    pub g: usize,
    /// Share of `n` in each group; `None` means near-equal groups.
    pub proportions: Option<Vec<f64>>,
    /// Spread of group means, or the paired mean difference, in units of sigma.
    pub effect: f64,
    pub shape: DataShape,
    pub budget: PrivacyBudget,
    pub alpha: f64,
    pub trials: usize,
    pub z: usize,
    pub seed: u64,
    pub known_equal_groups: bool,
    pub kw_mode: KwMode,
    pub mw_mode: MwMode,
}

impl SimulationSpec {
    pub fn new(kind: TestKind, n: usize, budget: PrivacyBudget) -> Self {
        Self {
            kind,
            n,
            g: match kind {
                TestKind::Kw | TestKind::Kwabs => 3,
                _ => 2,
            },
            proportions: None,
            effect: 0.0,
            shape: DataShape::Normal,
            budget,
            alpha: 0.05,
            trials: 1000,
            z: 20_000,
            seed: 0,
            known_equal_groups: false,
            kw_mode: KwMode::default(),
            mw_mode: MwMode::default(),
        }
    }

    fn grouped(&self) -> bool {
        matches!(self.kind, TestKind::Kw | TestKind::Kwabs | TestKind::Mw)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.effect >= 0.0 && self.effect.is_finite()) {
            return bad(format!("effect must be finite and >= 0, got {}", self.effect));
        }
        if self.z < 1 {
            return bad("z must be at least 1".into());
        }
        if self.n < 2 {
            return bad(format!("need n >= 2, got {}", self.n));
        }
        if self.grouped() {
            if self.kind == TestKind::Mw && self.g != 2 {
                return bad(format!("Mann-Whitney needs g = 2, got {}", self.g));
            }
            if self.g < 2 || self.n < self.g {
                return bad(format!("infeasible design: n = {}, g = {}", self.n, self.g));
            }
            if matches!(self.shape, DataShape::ZeroInflated(_)) {
                return bad("zero inflation applies to paired data only".into());
            }
            self.group_sizes()?;
        }
        if let DataShape::ZeroInflated(f) = self.shape {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("zero fraction must lie in [0, 1], got {f}"));
            }
        }
        Ok(())
    }

    pub fn group_sizes(&self) -> Result<Vec<usize>> {
        let Some(p) = &self.proportions else {
            return Ok(crate::inference::near_equal_sizes(self.n, self.g));
        };
        if p.len() != self.g {
            return Err(Error::InvalidParameter(format!(
                "{} proportions for {} groups",
                p.len(),
                self.g
            )));
        }
        if p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "group proportions must be non-negative and sum to 1".into(),
            ));
        }
        let mut cum = 0.0;
        let mut prev = 0;
        let sizes = p
            .iter()
            .map(|&x| {
                cum += x;
                let edge = ((cum * self.n as f64).round() as usize).min(self.n);
                let size = edge - prev;
                prev = edge;
                size
            })
            .collect();
        Ok(sizes)
    }

    fn config(&self) -> TestConfig {
        let mut c = TestConfig::new(self.kind, self.budget, self.z);
        c.known_equal_groups = self.known_equal_groups;
        c.kw_mode = self.kw_mode;
        c.mw_mode = self.mw_mode;
        c
    }

    fn draw<S: NoiseSource + ?Sized>(&self, mean: f64, rng: &mut S) -> f64 {
        match self.shape {
            DataShape::Uniform => mean + 12f64.sqrt() * (rng.uniform_open() - 0.5),
            _ => mean + normal(rng),
        }
    }

    /// One database from the alternative described by the spec.
    ///
    /// Group `i` has mean `i * effect / (g - 1)`. Paired rows have
    /// `u ~ N(0, 1)` and `v ~ N(effect, 1)`. The t-test uses the paired
    /// differences divided by sqrt(2), rescaled to standard deviation 0.3 and
    /// clamped to [-1, 1].
    pub fn generate<S: NoiseSource + ?Sized>(&self, rng: &mut S) -> Result<TestData> {
        if self.grouped() {
            let sizes = self.group_sizes()?;
            let step = self.effect / (self.g - 1) as f64;
            let groups = sizes
                .iter()
                .enumerate()
                .map(|(i, &len)| (0..len).map(|_| self.draw(i as f64 * step, rng)).collect())
                .collect();
            return Ok(TestData::Grouped(GroupedSample::new(groups)?));
        }
        let zero_fraction = match self.shape {
            DataShape::ZeroInflated(f) => f,
            _ => 0.0,
        };
        let rows: Vec<(f64, f64)> = (0..self.n)
            .map(|_| {
                let u = self.draw(0.0, rng);
                let v = self.draw(self.effect, rng);
                if zero_fraction > 0.0 && rng.uniform_open() < zero_fraction {
                    (u, u)
                } else {
                    (u, v)
                }
            })
            .collect();
        if self.kind == TestKind::Wilcoxon {
            return Ok(TestData::Paired(PairedSample::new(rows)?));
        }
        let values = rows
            .iter()
            .map(|(u, v)| ((v - u) / 2f64.sqrt() * T_DATA_SIGMA).clamp(-1.0, 1.0))
            .collect();
        Ok(TestData::Bounded(BoundedSample::new(values)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub power: f64,
    pub rejections: usize,
    pub trials: usize,
    pub se: f64,
}

impl PowerEstimate {
    pub fn from_counts(rejections: usize, trials: usize) -> Self {
        let power = rejections as f64 / trials as f64;
        Self {
            power,
            rejections,
            trials,
            se: (power * (1.0 - power) / trials as f64).sqrt(),
        }
    }

    /// `3 * sqrt(se_a^2 + se_b^2)`.
    pub fn combined_tolerance(&self, other: &PowerEstimate) -> f64 {
        3.0 * (self.se.powi(2) + other.se.powi(2)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    kind: TestKind,
    n: usize,
    g: Option<usize>,
    epsilon: u64,
    delta: u64,
    split: Option<u64>,
    z: usize,
    m_star: Option<usize>,
    known_equal: bool,
    kw_mode: KwMode,
    mw_mode: MwMode,
    seed: u64,
}

/// Reference distributions keyed by the public quantities they depend on.
#[derive(Default)]
pub struct ReferenceCache {
    map: Mutex<HashMap<CacheKey, Arc<ReferenceDistribution>>>,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(
        &self,
        config: &TestConfig,
        released: &Release,
        seed: u64,
    ) -> Result<Arc<ReferenceDistribution>> {
        let key = CacheKey {
            kind: config.kind,
            n: released.n,
            g: released.g.filter(|_| config.kind != TestKind::Mw),
            epsilon: config.budget.epsilon().to_bits(),
            delta: config.budget.delta().to_bits(),
            split: config.budget.split().map(f64::to_bits),
            z: config.reps,
            m_star: released.group_size.map(|r| r.m_star),
            known_equal: config.known_equal_groups,
            kw_mode: config.kw_mode,
            mw_mode: config.mw_mode,
            seed,
        };
        if let Some(hit) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(reference_for(
            config,
            released,
            &RandomStream::new(seed, REFERENCE_STREAM),
        )?);
        self.map
            .lock()
            .expect("cache lock")
            .insert(key, built.clone());
        Ok(built)
    }
}

/// Null or alternative p-values in trial order.
///
/// All statistics are released first; each distinct reference is then built
/// once and shared.
pub fn simulate_p_values(spec: &SimulationSpec, cache: &ReferenceCache) -> Result<Vec<f64>> {
    spec.validate()?;
    let config = spec.config();
    let trials = RandomStream::new(spec.seed, TRIAL_STREAM);
    let releases: Vec<Release> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trials.substream(i);
            let data = spec.generate(&mut rng)?;
            release(&data, &config, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut references: HashMap<Option<usize>, Arc<ReferenceDistribution>> = HashMap::new();
    for r in &releases {
        let m_star = r.group_size.map(|g| g.m_star);
        if !references.contains_key(&m_star) {
            references.insert(m_star, cache.get(&config, r, spec.seed)?);
        }
    }
    Ok(releases
        .par_iter()
        .map(|r| p_value(r.statistic, &references[&r.group_size.map(|g| g.m_star)]))
        .collect())
}

pub fn simulate_power(spec: &SimulationSpec) -> Result<PowerEstimate> {
    simulate_power_with(spec, &ReferenceCache::new())
}

pub fn simulate_power_with(spec: &SimulationSpec, cache: &ReferenceCache) -> Result<PowerEstimate> {
    let p = simulate_p_values(spec, cache)?;
    let rejections = p.iter().filter(|&&p| p <= spec.alpha).count();
    Ok(PowerEstimate::from_counts(rejections, p.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeOneResult {
    /// Null p-values in trial order.
    pub p_values: Vec<f64>,
    /// `(theoretical uniform quantile, empirical quantile)`, ascending.
    pub qq: Vec<(f64, f64)>,
}

impl TypeOneResult {
    /// Fraction of p-values at or below `x`.
    pub fn empirical_cdf(&self, x: f64) -> f64 {
        self.p_values.iter().filter(|&&p| p <= x).count() as f64 / self.p_values.len() as f64
    }
}

pub fn simulate_type1(spec: &SimulationSpec) -> Result<TypeOneResult> {
    simulate_type1_with(spec, &ReferenceCache::new())
}

pub fn simulate_type1_with(spec: &SimulationSpec, cache: &ReferenceCache) -> Result<TypeOneResult> {
    if spec.effect != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Type-I simulation needs effect 0, got {}",
            spec.effect
        )));
    }
    let p_values = simulate_p_values(spec, cache)?;
    Ok(TypeOneResult {
        qq: qq_pairs(&p_values),
        p_values,
    })
}

/// Plotting positions `k / (T + 1)` against the sorted p-values.
pub fn qq_pairs(p_values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(k, p)| ((k + 1) as f64 / (t + 1.0), p))
        .collect()
}

/// Power at each budget fraction, with identical data across fractions.
pub fn sweep_budget_split(
    spec: &SimulationSpec,
    fractions: &[f64],
) -> Result<Vec<(f64, PowerEstimate)>> {
    if !matches!(spec.kind, TestKind::Mw | TestKind::Ttest) {
        return Err(Error::InvalidParameter(format!(
            "budget split applies to mw and ttest, not {}",
            spec.kind
        )));
    }
    fractions
        .iter()
        .map(|&f| {
            let mut s = spec.clone();
            s.budget = spec.budget.with_split(f)?;
            Ok((f, simulate_power(&s)?))
        })
        .collect()
}

/// First `n` in ascending `candidates` whose power reaches `target`.
pub fn smallest_n_with_power(
    spec: &SimulationSpec,
    candidates: &[usize],
    target: f64,
) -> Result<Option<(usize, PowerEstimate)>> {
    for &n in candidates {
        let mut s = spec.clone();
        s.n = n;
        let est = simulate_power(&s)?;
        if est.power >= target {
            return Ok(Some((n, est)));
        }
    }
    Ok(None)
}

/// Writes `header..., power, se` rows.
pub fn write_power_csv<W: Write>(
    out: W,
    header: &[&str],
    rows: &[(Vec<String>, PowerEstimate)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<&str> = header.to_vec();
    head.extend(["power", "se"]);
    w.write_record(&head).map_err(csv_error)?;
    for (params, est) in rows {
        let mut rec = params.clone();
        rec.push(est.power.to_string());
        rec.push(est.se.to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `theoretical,empirical` rows.
pub fn write_qq_csv<W: Write>(out: W, qq: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theoretical", "empirical"]).map_err(csv_error)?;
    for (t, e) in qq {
        w.write_record([t.to_string(), e.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
