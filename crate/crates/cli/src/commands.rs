use std::fmt;

use dprank::harness::{
    simulate_power, simulate_type1, write_power_csv, write_qq_csv, DataShape, SimulationSpec,
};
use dprank::inference::{
    critical_value, ref_kw, ref_kwabs, ref_mw, ref_t, ref_wilcoxon, run_test,
    ReferenceDistribution, TestConfig, TestKind, TestOutcome,
};
use dprank::ingest::{ingest, ColumnMap, InputFormat, InputSpec};
use dprank::privacy::{PrivacyBudget, MW_DEFAULT_DELTA};
use dprank::{Error, RandomStream};
use serde::Serialize;

use crate::args::{BudgetArgs, CritvalArgs, FormatName, SimArgs, TestArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Lib(Error::InvalidParameter(_)) => 2,
            CliError::Lib(Error::Degenerate(_) | Error::InvalidInput(_)) => 3,
            CliError::Lib(Error::Parse { .. } | Error::OutOfRange { .. } | Error::Io(_)) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult = Result<(), CliError>;

/// `default_delta` applies to mw only; other tests default to 0.
fn budget(args: &BudgetArgs, default_delta: Option<f64>) -> Result<PrivacyBudget, CliError> {
    let kind = TestKind::from(args.test);
    let delta = match (kind, args.delta) {
        (_, Some(d)) => d,
        (TestKind::Mw, None) if args.known_equal_groups => 0.0,
        (TestKind::Mw, None) => default_delta.ok_or_else(|| {
            CliError::Usage(
                "the mw test requires --delta unless --known-equal-groups is given".into(),
            )
        })?,
        (_, None) => 0.0,
    };
    let mut b = PrivacyBudget::new(args.epsilon, delta)?;
    if let Some(f) = args.split {
        b = b.with_split(f)?;
    }
    Ok(b)
}

fn default_groups(args: &BudgetArgs) -> usize {
    match TestKind::from(args.test) {
        TestKind::Mw => 2,
        _ => args.groups.unwrap_or(3),
    }
}

#[derive(Serialize)]
struct TestJson<'a> {
    #[serde(flatten)]
    outcome: &'a TestOutcome,
    alpha: f64,
    reject: bool,
}

pub fn test(args: TestArgs, out: &mut Vec<u8>) -> CliResult {
    let kind = TestKind::from(args.budget.test);
    let budget = budget(&args.budget, None)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let format = args.format.unwrap_or(match kind {
        TestKind::Kw | TestKind::Kwabs | TestKind::Mw => FormatName::Grouped,
        TestKind::Wilcoxon => FormatName::Paired,
        TestKind::Ttest => FormatName::Single,
    });
    let mut spec = InputSpec::new(&args.input, InputFormat::from(format));
    spec.groups = args.budget.groups;
    spec.columns = ColumnMap {
        group: args.group_column,
        value: args.value_column,
        u: args.u_column,
        v: args.v_column,
    };
    let data = ingest(&spec)?;

    let mut config = TestConfig::new(kind, budget, args.reps);
    config.groups = args.budget.groups;
    config.known_equal_groups = args.budget.known_equal_groups;
    config.kw_mode = args.budget.kw_reference.into();
    config.mw_mode = args.budget.mw_reference.into();
    let outcome = run_test(&data, &config, &RandomStream::new(args.budget.seed, 0))?;
    let json = TestJson {
        outcome: &outcome,
        alpha: args.alpha,
        reject: outcome.p_value <= args.alpha,
    };
    serde_json::to_writer(&mut *out, &json).map_err(|e| Error::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(())
}

fn reference(
    args: &BudgetArgs,
    budget: &PrivacyBudget,
    n: usize,
    m_star: Option<usize>,
    z: usize,
) -> Result<ReferenceDistribution, CliError> {
    // One stream per n, so adding sizes to the list leaves other rows unchanged.
    let rng = RandomStream::new(args.seed, 0).substream(n as u64);
    let eps = budget.epsilon();
    let g = default_groups(args);
    Ok(match TestKind::from(args.test) {
        TestKind::Kw => ref_kw(g, n, eps, z, &rng, args.kw_reference.into())?,
        TestKind::Kwabs => ref_kwabs(g, n, eps, z, &rng)?,
        TestKind::Mw => ref_mw(
            n,
            m_star.unwrap_or(n / 2),
            budget,
            z,
            &rng,
            args.mw_reference.into(),
            args.known_equal_groups,
        )?,
        TestKind::Wilcoxon => ref_wilcoxon(n, eps, z, &rng)?,
        TestKind::Ttest => ref_t(n, budget, z, &rng)?,
    })
}

pub fn critval(args: CritvalArgs, out: &mut Vec<u8>) -> CliResult {
    let budget = budget(&args.budget, Some(MW_DEFAULT_DELTA))?;
    let mut rows = String::from("n,alpha,critical_value\n");
    for &n in &args.n {
        let r = reference(&args.budget, &budget, n, args.m_star, args.reps)?;
        for &alpha in &args.alphas {
            let c = critical_value(&r, alpha)?;
            rows.push_str(&format!("{n},{alpha},{c}\n"));
        }
    }
    out.extend_from_slice(rows.as_bytes());
    Ok(())
}

fn sim_spec(args: &SimArgs, n: usize) -> Result<SimulationSpec, CliError> {
    let budget = budget(&args.budget, Some(MW_DEFAULT_DELTA))?;
    let kind = TestKind::from(args.budget.test);
    let mut s = SimulationSpec::new(kind, n, budget);
    s.g = default_groups(&args.budget);
    s.proportions = args.proportions.clone();
    s.effect = args.effect;
    s.shape = match (args.zero_fraction, args.uniform) {
        (Some(_), true) => {
            return Err(CliError::Usage(
                "--zero-fraction and --uniform are mutually exclusive".into(),
            ))
        }
        (Some(f), false) => DataShape::ZeroInflated(f),
        (None, true) => DataShape::Uniform,
        (None, false) => DataShape::Normal,
    };
    s.alpha = args.alpha;
    s.trials = args.trials;
    s.z = args.reps;
    s.seed = args.budget.seed;
    s.known_equal_groups = args.budget.known_equal_groups;
    s.kw_mode = args.budget.kw_reference.into();
    s.mw_mode = args.budget.mw_reference.into();
    Ok(s)
}

pub fn power(args: SimArgs, out: &mut Vec<u8>) -> CliResult {
    let mut rows = Vec::new();
    for &n in &args.n {
        let est = simulate_power(&sim_spec(&args, n)?)?;
        rows.push((vec![n.to_string(), args.budget.epsilon.to_string()], est));
    }
    write_power_csv(&mut *out, &["n", "epsilon"], &rows)?;
    Ok(())
}

pub fn qq(args: SimArgs, out: &mut Vec<u8>) -> CliResult {
    let [n] = args.n[..] else {
        return Err(CliError::Usage("qq takes exactly one --n".into()));
    };
    let result = simulate_type1(&sim_spec(&args, n)?)?;
    write_qq_csv(&mut *out, &result.qq)?;
    Ok(())
}
