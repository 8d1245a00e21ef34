//! Experiment plans, parallel seed runs and CSV/JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::RawConfig;
use super::synthetic::{gen_synthetic, solve_optimum, Optimum, Profile, SyntheticSpec};
use crate::erm::{component_smoothness, strong_convexity, Dataset, LipschitzMap, LossModel, Problem};
use crate::error::{Error, Result};
use crate::linalg::{DiagonalMatrix, Vector};
use crate::optimizer::{
    default_step_sizes, dp_skgd, importance_probabilities, schedule_convex, schedule_strongly_convex,
    sigma_s_sq, utility_bound, BoundQuery, BoundRow, Regime, RunOptions, RunResult, Schedule,
};
use crate::privacy::{audit_budget, calibrate_noise, NoiseScales, PrivacyBudget};
use crate::sampling::{contiguous_blocks, RandomState, SamplingDistribution, SubsetKey};

pub const CSV_HEADER: &str = "method,seed,epoch,f_value,subopt,coord_evals,audited_eps";

/// How subsets are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionSpec {
    Full,
    SingletonUniform,
    /// `p_j ∝ M_j`.
    SingletonImportance,
    BlockUniform { size: usize },
    /// `q_i ∝ max_{j∈A_i} M_j`.
    BlockImportance { size: usize },
    Nice { tau: usize },
}

impl DistributionSpec {
    pub fn build(&self, m: &DiagonalMatrix) -> Result<SamplingDistribution> {
        let d = m.dim();
        match *self {
            DistributionSpec::Full => SamplingDistribution::full(d),
            DistributionSpec::SingletonUniform => SamplingDistribution::singleton_uniform(d),
            DistributionSpec::SingletonImportance => {
                SamplingDistribution::singleton(m.as_slice().iter().map(|v| v / m.trace()).collect())
            }
            DistributionSpec::BlockUniform { size } => {
                let blocks = contiguous_blocks(d, size);
                let b = blocks.len();
                SamplingDistribution::block(blocks, vec![1.0 / b as f64; b], d)
            }
            DistributionSpec::BlockImportance { size } => {
                let uniform = Self::BlockUniform { size }.build(m)?;
                let blocks = uniform.blocks().expect("block distribution");
                let q = importance_probabilities(m, &blocks)?;
                SamplingDistribution::block(blocks.iter().map(|b| b.as_slice().to_vec()).collect(), q, d)
            }
            DistributionSpec::Nice { tau } => SamplingDistribution::nice(d, tau),
        }
    }

    /// The comparison-table row that describes this strategy.
    pub fn bound_row(&self) -> BoundRow {
        match self {
            DistributionSpec::Full => BoundRow::SkgdFull,
            DistributionSpec::SingletonUniform => BoundRow::DpCd,
            DistributionSpec::SingletonImportance => BoundRow::SkgdCoordinateImportance,
            DistributionSpec::BlockUniform { .. } => BoundRow::SkgdBlockUniform,
            DistributionSpec::BlockImportance { .. } => BoundRow::SkgdBlockImportance,
            DistributionSpec::Nice { .. } => BoundRow::Skgd,
        }
    }

    /// Parse a method or distribution name; `size` and `tau` fill in block and nice parameters.
    pub fn parse(name: &str, block_size: Option<usize>, tau: Option<usize>) -> Result<Self> {
        let need = |v: Option<usize>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("`{name}` needs `{key}`")))
        };
        Ok(match name {
            "dp-sgd" | "full" => DistributionSpec::Full,
            "dp-cd-uniform" | "singleton-uniform" => DistributionSpec::SingletonUniform,
            "dp-skgd-importance" | "singleton-importance" => DistributionSpec::SingletonImportance,
            "dp-skgd-block" | "block-importance" => DistributionSpec::BlockImportance { size: need(block_size, "block_size")? },
            "block-uniform" => DistributionSpec::BlockUniform { size: need(block_size, "block_size")? },
            "nice" => DistributionSpec::Nice { tau: need(tau, "tau")? },
            other => return Err(Error::Config(format!("unknown method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub dist: DistributionSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic { spec: SyntheticSpec, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleMode {
    AutoConvex,
    AutoStronglyConvex,
    Manual(Schedule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub loss: LossModel,
    pub methods: Vec<MethodSpec>,
    pub budget: PrivacyBudget,
    pub schedule: ScheduleMode,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub rescale_columns: bool,
    /// Starting point; zero when absent.
    pub w0: Option<Vec<f64>>,
    /// Strong-convexity modulus override, needed for logistic problems.
    pub mu: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_raw(RawConfig::read(path)?)
    }

    pub fn from_raw(mut c: RawConfig) -> Result<Self> {
        let loss: LossModel = c.required::<String>("loss")?.parse()?;
        let data = match c.string("data")? {
            Some(path) => DataSource::File(PathBuf::from(path)),
            None => DataSource::Synthetic { spec: synthetic_spec(&mut c, loss)?, seed: c.scalar("data_seed")?.unwrap_or(0) },
        };
        let block_size = c.scalar("block_size")?;
        let tau = c.scalar("tau")?;
        let names: Vec<String> = match (c.array::<String>("methods")?, c.string("distribution")?) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `methods` or `distribution`".into())),
            (Some(m), None) => m,
            (None, Some(d)) => vec![d],
            (None, None) => return Err(Error::Config("missing key `methods`".into())),
        };
        if names.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        let mut methods = Vec::new();
        for name in names {
            if methods.iter().any(|m: &MethodSpec| m.label == name) {
                return Err(Error::Config(format!("method `{name}` listed twice")));
            }
            methods.push(MethodSpec { dist: DistributionSpec::parse(&name, block_size, tau)?, label: name });
        }
        let budget = PrivacyBudget::new(c.required("epsilon")?, c.required("delta")?)
            .map_err(|e| Error::Config(e.to_string()))?;
        let (t, k) = (c.scalar::<u64>("t")?, c.scalar::<u64>("k")?);
        let schedule = match c.string("schedule")?.as_deref().unwrap_or("auto-convex") {
            "auto-convex" => ScheduleMode::AutoConvex,
            "auto-strongly-convex" => ScheduleMode::AutoStronglyConvex,
            "manual" => match (t, k) {
                (Some(t), Some(k)) => ScheduleMode::Manual(Schedule::new(t, k).map_err(|e| Error::Config(e.to_string()))?),
                _ => return Err(Error::Config("manual schedule needs `t` and `k`".into())),
            },
            other => return Err(Error::Config(format!("unknown schedule `{other}`"))),
        };
        if !matches!(schedule, ScheduleMode::Manual(_)) && (t.is_some() || k.is_some()) {
            return Err(Error::Config("`t` and `k` only apply to `schedule = manual`".into()));
        }
        let seeds: Vec<u64> = c.array("seeds")?.ok_or_else(|| Error::Config("missing key `seeds`".into()))?;
        let cfg = ExperimentConfig {
            data,
            loss,
            methods,
            budget,
            schedule,
            seeds,
            out: c.string("out")?.map(PathBuf::from),
            rescale_columns: c.flag("rescale_columns")?,
            w0: c.array("w0")?,
            mu: c.scalar("mu")?,
        };
        c.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::Config(format!("mu must be positive, got {mu}")));
            }
        }
        Ok(())
    }
}

/// Read the synthetic-data keys shared by experiment and `gen` configs.
pub fn synthetic_spec(c: &mut RawConfig, model: LossModel) -> Result<SyntheticSpec> {
    let profile = match c.string("profile")?.as_deref().unwrap_or("uniform") {
        "uniform" => Profile::Uniform { m0: c.scalar("m0")?.unwrap_or(1.0) },
        "geometric" => Profile::Geometric { min: c.required("m_min")?, max: c.required("m_max")? },
        "spike" => Profile::Spike {
            big: c.required("m_big")?,
            index: c.scalar("spike_index")?.unwrap_or(0),
            base: c.scalar("m_base")?.unwrap_or(1.0),
        },
        other => return Err(Error::Config(format!("unknown profile `{other}`"))),
    };
    Ok(SyntheticSpec {
        n: c.required("n")?,
        d: c.required("d")?,
        model,
        profile,
        planted: c.array("w_planted")?,
        label_noise: c.scalar("label_noise")?.unwrap_or(0.0),
    })
}

/// A problem with its optimum and regularity constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub problem: Problem,
    pub optimum: Optimum,
    pub smoothness: DiagonalMatrix,
    pub mu: Option<f64>,
}

impl Prepared {
    pub fn from_problem(problem: Problem) -> Result<Self> {
        let optimum = solve_optimum(&problem, None)?;
        Ok(Prepared {
            smoothness: component_smoothness(problem.model, &problem.data),
            mu: strong_convexity(problem.model, &problem.data),
            problem,
            optimum,
        })
    }

    pub fn load(source: &DataSource, loss: LossModel, rescale: bool) -> Result<Self> {
        match source {
            DataSource::File(path) => {
                let mut data = Dataset::read_csv(path)?;
                if rescale {
                    data = data.rescale_columns();
                }
                Self::from_problem(Problem::new(loss, data)?)
            }
            DataSource::Synthetic { spec, seed } => {
                let s = gen_synthetic(spec, &mut RandomState::seed_from(*seed))?;
                if rescale {
                    return Self::from_problem(Problem::new(loss, s.problem.data.rescale_columns())?);
                }
                Ok(Prepared { problem: s.problem, optimum: s.optimum, smoothness: s.smoothness, mu: s.mu })
            }
        }
    }

    pub fn suboptimality(&self, f: f64) -> f64 {
        f - self.optimum.value
    }
}

/// Everything about one method that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct MethodPlan {
    pub label: String,
    pub dist: SamplingDistribution,
    pub lipschitz: LipschitzMap,
    pub noise: NoiseScales,
    pub schedule: Schedule,
    pub gamma: DiagonalMatrix,
    pub w0: Vector,
    pub sigma_s_sq: f64,
    pub audited_eps: f64,
    pub row: BoundRow,
    pub regime: Regime,
    pub utility_bound: f64,
}

fn weighted_dist_sq(a: &[f64], b: &[f64], weights: impl Fn(usize) -> f64) -> f64 {
    a.iter().zip(b).enumerate().map(|(j, (x, y))| weights(j) * (x - y).powi(2)).sum()
}

/// Calibrate noise, pick the schedule and evaluate the method's bound row.
pub fn plan_method(
    prep: &Prepared,
    method: &MethodSpec,
    budget: PrivacyBudget,
    mode: ScheduleMode,
    w0: Option<&[f64]>,
    mu_override: Option<f64>,
) -> Result<MethodPlan> {
    let data = &prep.problem.data;
    let (n, d) = (data.n(), data.d());
    let m = &prep.smoothness;
    let dist = method.dist.build(m)?;
    let p = dist.inclusion_probabilities();
    let lipschitz = LipschitzMap::compute(prep.problem.model, data, &dist)?;
    let s2 = sigma_s_sq(&dist, &lipschitz, m)?;
    let gamma = default_step_sizes(&p, m)?;
    let w0 = match w0 {
        Some(w) => Vector::new(w.to_vec())?,
        None => Vector::zeros(d),
    };
    crate::linalg::check_dim(d, w0.dim())?;
    let w_star = &prep.optimum.w;
    let r_mp = weighted_dist_sq(w0.as_slice(), w_star, |j| m[j] / p[j]).sqrt();
    let mu = mu_override.or(prep.mu);

    let (schedule, regime) = match mode {
        ScheduleMode::AutoConvex => {
            (schedule_convex(n, budget, r_mp.max(f64::MIN_POSITIVE), s2.sqrt())?, Regime::Convex)
        }
        ScheduleMode::AutoStronglyConvex => {
            let mu = mu.ok_or(Error::MissingConstant("mu"))?;
            let gap = (prep.problem.value(&w0)? - prep.optimum.value).max(f64::MIN_POSITIVE);
            (schedule_strongly_convex(mu, m, &p, gap, n, budget, s2)?, Regime::StronglyConvex)
        }
        ScheduleMode::Manual(s) => (s, Regime::Convex),
    };

    let used = lipschitz.restricted(&dist)?;
    let noise = calibrate_noise(&used, schedule, n, budget)?;
    let audited_eps = audit_budget(&used, schedule, &noise, n, budget.delta)?;

    let row = method.dist.bound_row();
    let mut q = BoundQuery::new(row, regime, n, budget);
    q.lipschitz = Some(lipschitz.per_coordinate(&dist)?);
    q.lipschitz_full = Some(lipschitz.get(SubsetKey::Full)?);
    q.smoothness = Some(m.clone());
    q.probabilities = Some(p.clone());
    q.blocks = dist.blocks().map(|bs| bs.iter().map(|b| b.as_slice().to_vec()).collect());
    q.mu = mu;
    q.sigma_s_sq = Some(s2);
    q.dim = Some(d);
    q.radius = Some(match row.radius_norm() {
        "MP^-1" => r_mp,
        "M" => weighted_dist_sq(w0.as_slice(), w_star, |j| m[j]).sqrt(),
        _ => weighted_dist_sq(w0.as_slice(), w_star, |_| 1.0).sqrt(),
    });
    let bound = utility_bound(&q)?;

    Ok(MethodPlan {
        label: method.label.clone(),
        dist,
        lipschitz: used,
        noise,
        schedule,
        gamma,
        w0,
        sigma_s_sq: s2,
        audited_eps,
        row,
        regime,
        utility_bound: bound,
    })
}

/// Run one plan for one seed.
pub fn run_seed(prep: &Prepared, plan: &MethodPlan, seed: u64) -> Result<RunResult> {
    let mut rng = RandomState::seed_from(seed);
    let mut res = dp_skgd(
        &prep.problem,
        &plan.dist,
        plan.schedule,
        &plan.noise,
        &plan.gamma,
        &plan.w0,
        &mut rng,
        RunOptions::default(),
    )?;
    res.audited_epsilon = Some(plan.audited_eps);
    Ok(res)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    /// `Err` carries the divergence message.
    pub result: std::result::Result<RunResult, String>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MethodSummary {
    pub distribution: String,
    pub t: u64,
    pub k: u64,
    pub sigma_s_sq: f64,
    pub audited_eps: f64,
    pub completed: usize,
    pub diverged: usize,
    pub median_subopt: Option<f64>,
    pub q25_subopt: Option<f64>,
    pub q75_subopt: Option<f64>,
    pub iqr_subopt: Option<f64>,
    pub bound_row: String,
    pub regime: String,
    pub utility_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub plan_label: String,
    pub outcomes: Vec<SeedOutcome>,
    pub summary: MethodSummary,
}

impl MethodReport {
    pub fn final_subopts(&self, prep: &Prepared) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok())
            .map(|r| prep.suboptimality(*r.objective.last().expect("nonempty trajectory")))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub loss: String,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seeds: usize,
    pub f_star: f64,
    pub optimum_note: String,
    pub methods: BTreeMap<String, MethodSummary>,
    /// `ratios[a][b]` is median(a) / median(b).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratios: Option<BTreeMap<String, BTreeMap<String, Option<f64>>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub prepared: Prepared,
    pub reports: Vec<MethodReport>,
    pub summary: Summary,
    pub csv: String,
}

impl ExperimentOutput {
    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    /// True when every seed of every method diverged.
    pub fn all_diverged(&self) -> bool {
        self.reports.iter().all(|r| r.summary.completed == 0)
    }

    /// Write the CSV to `path` and the summary next to it with a `.json` extension.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, &self.csv)?;
        let json_path = path.with_extension("json");
        std::fs::write(&json_path, self.json())?;
        Ok(json_path)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

fn summarize(prep: &Prepared, plan: &MethodPlan, outcomes: &[SeedOutcome]) -> MethodSummary {
    let mut subs: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok())
        .map(|r| prep.suboptimality(*r.objective.last().expect("nonempty trajectory")))
        .collect();
    subs.sort_by(f64::total_cmp);
    let (q25, q75) = (quantile(&subs, 0.25), quantile(&subs, 0.75));
    MethodSummary {
        distribution: plan.dist.variant_name().to_string(),
        t: plan.schedule.t,
        k: plan.schedule.k,
        sigma_s_sq: plan.sigma_s_sq,
        audited_eps: plan.audited_eps,
        completed: subs.len(),
        diverged: outcomes.len() - subs.len(),
        median_subopt: quantile(&subs, 0.5),
        q25_subopt: q25,
        q75_subopt: q75,
        iqr_subopt: q25.zip(q75).map(|(a, b)| b - a),
        bound_row: plan.row.name().to_string(),
        regime: match plan.regime {
            Regime::Convex => "convex".into(),
            Regime::StronglyConvex => "strongly-convex".into(),
        },
        utility_bound: plan.utility_bound,
    }
}

fn csv_rows(out: &mut String, prep: &Prepared, label: &str, o: &SeedOutcome, audited: f64) {
    match &o.result {
        Ok(r) => {
            for (t, (&f, &evals)) in r.objective.iter().zip(&r.epoch_coord_evals).enumerate() {
                let _ = writeln!(out, "{label},{},{t},{f},{},{evals},{audited}", o.seed, prep.suboptimality(f));
            }
            let f = *r.objective.last().expect("nonempty trajectory");
            let _ = writeln!(out, "{label},{},final,{f},{},{},{audited}", o.seed, prep.suboptimality(f), r.coord_evals);
        }
        Err(_) => {
            let _ = writeln!(out, "{label},{},diverged,,,,{audited}", o.seed);
        }
    }
}

/// Run every configured method over every seed. Seeds run in parallel and
/// are merged in the configured order, so output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let prep = Prepared::load(&config.data, config.loss, config.rescale_columns)?;
    run_prepared(&prep, config)
}

/// As [`run_experiment`] on an already loaded problem.
pub fn run_prepared(prep: &Prepared, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut reports = Vec::new();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for method in &config.methods {
        let plan = plan_method(prep, method, config.budget, config.schedule, config.w0.as_deref(), config.mu)?;
        let outcomes: Vec<SeedOutcome> = config
            .seeds
            .par_iter()
            .map(|&seed| SeedOutcome { seed, result: run_seed(prep, &plan, seed).map_err(|e| e.to_string()) })
            .collect();
        for o in &outcomes {
            csv_rows(&mut csv, prep, &plan.label, o, plan.audited_eps);
        }
        let summary = summarize(prep, &plan, &outcomes);
        reports.push(MethodReport { plan_label: plan.label.clone(), outcomes, summary });
    }
    let data = &prep.problem.data;
    let summary = Summary {
        loss: prep.problem.model.name().to_string(),
        n: data.n(),
        d: data.d(),
        epsilon: config.budget.epsilon,
        delta: config.budget.delta,
        seeds: config.seeds.len(),
        f_star: prep.optimum.value,
        optimum_note: prep.optimum.note(),
        methods: reports.iter().map(|r| (r.plan_label.clone(), r.summary.clone())).collect(),
        ratios: None,
    };
    Ok(ExperimentOutput { prepared: prep.clone(), reports, summary, csv })
}

/// [`run_experiment`] plus the table of pairwise median ratios.
pub fn compare_methods(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.methods.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    let mut out = run_experiment(config)?;
    let mut ratios = BTreeMap::new();
    for a in &out.reports {
        let mut row = BTreeMap::new();
        for b in &out.reports {
            let r = a.summary.median_subopt.zip(b.summary.median_subopt).map(|(x, y)| x / y);
            row.insert(b.plan_label.clone(), r.filter(|v| v.is_finite()));
        }
        ratios.insert(a.plan_label.clone(), row);
    }
    out.summary.ratios = Some(ratios);
    Ok(out)
}

/// Human-readable median table with ratios against the first method.
pub fn comparison_table(out: &ExperimentOutput) -> String {
    let mut s = String::from("method,median_subopt,iqr_subopt,completed,diverged,utility_bound,ratio_to_first\n");
    let first = out.reports.first().and_then(|r| r.summary.median_subopt);
    for r in &out.reports {
        let m = &r.summary;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "nan".into());
        let ratio = m.median_subopt.zip(first).map(|(a, b)| a / b);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.plan_label,
            fmt(m.median_subopt),
            fmt(m.iqr_subopt),
            m.completed,
            m.diverged,
            m.utility_bound,
            fmt(ratio)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_raw(RawConfig::parse(text).unwrap()).unwrap()
    }

    const BASE: &str = "loss = logistic\nn = 300\nd = 4\nprofile = geometric\nm_min = 1\nm_max = 20\n\
        label_noise = 0.05\nepsilon = 1\ndelta = 1e-5\n";

    #[test]
    fn csv_shape_matches_seed_and_epoch_counts() {
        let c = config(&format!("{BASE}distribution = dp-skgd-importance\nschedule = manual\nt = 3\nk = 50\nseeds = [1, 2, 3, 4]\n"));
        let out = run_experiment(&c).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len() - 1, 4 * (3 + 1) + 4);
        assert_eq!(lines.iter().filter(|l| l.contains(",final,")).count(), 4);
        for l in &lines[1..] {
            let eps: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
            assert!(eps <= 1.0);
        }
        let s = &out.summary.methods["dp-skgd-importance"];
        assert_eq!((s.completed, s.diverged, s.t, s.k), (4, 0, 3, 50));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let c = config(&format!("{BASE}methods = [dp-sgd, dp-cd-uniform, dp-skgd-block]\nblock_size = 2\nseeds = [5, 1, 9]\n"));
        let (a, b) = (compare_methods(&c).unwrap(), compare_methods(&c).unwrap());
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.json(), b.json());
    }

    #[test]
    fn config_errors() {
        let bad = |extra: &str| ExperimentConfig::from_raw(RawConfig::parse(&format!("{BASE}{extra}")).unwrap()).is_err();
        assert!(bad("methods = []\nseeds = [1]\n"));
        assert!(bad("methods = [dp-sgd]\nseeds = []\n"));
        assert!(bad("methods = [dp-sgd]\nseeds = [1, 1]\n"));
        assert!(bad("methods = [dp-sgd]\nseeds = [1]\nbogus = 3\n"));
        assert!(bad("methods = [dp-skgd-block]\nseeds = [1]\n"));
        assert!(bad("methods = [dp-sgd]\nseeds = [1]\nschedule = manual\nt = 1\n"));
        assert!(bad("methods = [newton]\nseeds = [1]\n"));
    }

    #[test]
    fn quadratic_losses_cannot_be_calibrated() {
        let c = config("loss = quadratic\nn = 20\nd = 2\nepsilon = 1\ndelta = 1e-5\nmethods = [dp-sgd]\nseeds = [1]\n");
        assert!(matches!(run_experiment(&c), Err(Error::UnboundedLipschitz)));
    }

    #[test]
    fn strongly_convex_mode_uses_mu_override() {
        let c = config(&format!("{BASE}methods = [dp-cd-uniform]\nschedule = auto-strongly-convex\nmu = 0.05\nseeds = [1]\n"));
        let out = run_experiment(&c).unwrap();
        let s = &out.summary.methods["dp-cd-uniform"];
        assert_eq!(s.regime, "strongly-convex");
        let c = config(&format!("{BASE}methods = [dp-cd-uniform]\nschedule = auto-strongly-convex\nseeds = [1]\n"));
        assert!(matches!(run_experiment(&c), Err(Error::MissingConstant("mu"))));
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), Some(2.5));
    }

    #[test]
    fn importance_probabilities_follow_smoothness() {
        let m = DiagonalMatrix::positive(vec![1.0, 3.0]).unwrap();
        let p = DistributionSpec::SingletonImportance.build(&m).unwrap().inclusion_probabilities();
        assert_eq!(p.as_slice(), &[0.25, 0.75]);
        let b = DistributionSpec::BlockImportance { size: 1 }.build(&m).unwrap().inclusion_probabilities();
        assert_eq!(b.as_slice(), &[0.25, 0.75]);
    }
}
