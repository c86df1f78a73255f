//! Seed ensembles, the refinancing-rate sweep and the stylized-fact battery.
//!
//! Every cell of a sweep uses the seed list `base_seed + k`, so the three
//! mechanisms are compared on paired trajectories that coincide up to the
//! first bank insolvency. Averages run from the first crisis to the step at
//! which the paired purchase & assumption run was left with a single bank,
//! capped at the horizon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, StatsError};
use crate::metrics::okun_phillips_slopes;
use crate::num::Real;
use crate::params::{Mechanism, Parameters, RunConfig, Setting};
use crate::scheduler::{RunOutput, Simulation, Termination};
use crate::stats::{mean_stderr, paired_t_test, zipf_exponent, OlsFit, PairedTest};

/// Caps the number of worker threads used by sweeps and ensembles.
pub const THREADS_ENV: &str = "CRISIS_ABM_THREADS";

/// Grid of runs: every `r0` in `grid` under every mechanism, for `n_seeds`
/// seeds starting at `base_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec<S: Real> {
    pub params: Parameters<S>,
    /// Setting the variable parameters were taken from. Explicit overrides
    /// in `params` win.
    pub setting: Setting,
    pub grid: Vec<S>,
    pub mechanisms: Vec<Mechanism>,
    pub n_seeds: usize,
    pub t_max: u64,
    pub base_seed: u64,
}

impl<S: Real> SweepSpec<S> {
    pub const DEFAULT_SEEDS: usize = 50;
    pub const DEFAULT_T_MAX: u64 = 1000;

    pub fn new(setting: Setting, grid: Vec<S>, mechanisms: Vec<Mechanism>) -> Self {
        Self {
            params: Parameters::with_setting(setting),
            setting,
            grid,
            mechanisms,
            n_seeds: Self::DEFAULT_SEEDS,
            t_max: Self::DEFAULT_T_MAX,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if self.grid.is_empty() {
            return Err(ConfigError::invalid("r0", "the grid is empty"));
        }
        for &r in &self.grid {
            if !r.is_finite() || r < S::zero() {
                return Err(ConfigError::invalid("r0", format!("must be a finite value >= 0, got {r}")));
            }
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::invalid("r0", "the grid must be strictly increasing"));
        }
        if self.mechanisms.is_empty() {
            return Err(ConfigError::invalid("mechanism", "no mechanism selected"));
        }
        let mut seen = self.mechanisms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.mechanisms.len() {
            return Err(ConfigError::invalid("mechanism", "a mechanism is listed twice"));
        }
        if self.n_seeds == 0 {
            return Err(ConfigError::invalid("seeds", "must be >= 1"));
        }
        if self.t_max == 0 {
            return Err(ConfigError::invalid("t_max", "must be >= 1"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(move |k| self.base_seed.wrapping_add(k))
    }

    pub fn run_config(&self, r0: S, mechanism: Mechanism, seed: u64) -> RunConfig<S> {
        RunConfig::new(self.params.clone(), r0, mechanism, self.t_max, seed)
    }

    /// Mechanisms in table order.
    fn ordered_mechanisms(&self) -> Vec<Mechanism> {
        Mechanism::ALL.iter().copied().filter(|m| self.mechanisms.contains(m)).collect()
    }
}

/// Inclusive step range used for averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: u64,
    pub end: u64,
}

impl Window {
    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn steps(&self) -> u64 {
        self.end - self.start + 1
    }
}

/// From the first crisis of `run` to `min(t_f, t_max)`, where `t_f` comes
/// from the paired purchase & assumption run. `None` when the run saw no
/// crisis inside that range.
pub fn averaging_window<S: Real>(run: &RunOutput<S>, t_f: Option<u64>, t_max: u64) -> Option<Window> {
    let start = run.first_crisis()?;
    let end = t_f.unwrap_or(t_max).min(t_max).min(run.last_step());
    (start <= end).then_some(Window { start, end })
}

/// Window averages of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub u: f64,
    pub y: f64,
    pub cv: f64,
    pub i_n: f64,
    /// Mean negative equity over the insolvencies inside the window.
    pub m: f64,
}

/// Selects one column of [`Observables`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    U,
    Y,
    CV,
    IN,
    M,
}

impl Observable {
    pub const ALL: [Observable; 5] = [Observable::U, Observable::Y, Observable::CV, Observable::IN, Observable::M];

    pub fn get(self, o: &Observables) -> f64 {
        match self {
            Observable::U => o.u,
            Observable::Y => o.y,
            Observable::CV => o.cv,
            Observable::IN => o.i_n,
            Observable::M => o.m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::U => "U",
            Observable::Y => "Y",
            Observable::CV => "CV",
            Observable::IN => "i_n",
            Observable::M => "M",
        }
    }
}

pub fn window_means<S: Real>(run: &RunOutput<S>, window: Window) -> Observables {
    let rows: Vec<_> = run.rows.iter().filter(|r| window.contains(r.t)).collect();
    let n = rows.len().max(1) as f64;
    let avg = |f: &dyn Fn(&crate::metrics::MetricsRow<S>) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    let m_values: Vec<f64> = rows.iter().flat_map(|r| r.insolvencies.iter().map(|m| m.as_f64())).collect();
    let m = if m_values.is_empty() { 0.0 } else { m_values.iter().sum::<f64>() / m_values.len() as f64 };
    Observables {
        u: avg(&|r| r.unemployment.as_f64()),
        y: avg(&|r| r.output.as_f64()),
        cv: avg(&|r| r.credit_volume.as_f64()),
        i_n: avg(&|r| r.nominal_rate.as_f64()),
        m,
    }
}

/// Identifies one run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub r0: f64,
    pub mechanism: Mechanism,
    pub seed: u64,
}

/// What a sweep keeps of each run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub key: RunKey,
    pub first_crisis: Option<u64>,
    pub last_step: u64,
    pub termination: Termination,
    /// `t_f` of the paired purchase & assumption run.
    pub paired_t_f: Option<u64>,
    pub n_insolvencies: usize,
    pub window: Option<Window>,
    /// `None` when the window is empty; such runs are left out of means.
    pub observables: Option<Observables>,
}

/// Mean with an across-seed standard error; the error is absent below two
/// seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: Option<f64>,
}

impl Estimate {
    fn of(values: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(values);
        Self { mean, stderr }
    }
}

/// One `(r0, mechanism)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub r0: f64,
    pub mechanism: Mechanism,
    pub n_runs: usize,
    /// Runs whose window was empty.
    pub n_flagged: usize,
    pub u: Estimate,
    pub y: Estimate,
    pub cv: Estimate,
    pub i_n: Estimate,
    pub m: Estimate,
    /// Mean minus the average of the means over all mechanisms at this `r0`.
    pub delta: Observables,
}

impl CellSummary {
    pub fn estimate(&self, o: Observable) -> Estimate {
        match o {
            Observable::U => self.u,
            Observable::Y => self.y,
            Observable::CV => self.cv,
            Observable::IN => self.i_n,
            Observable::M => self.m,
        }
    }

    fn from_runs(r0: f64, mechanism: Mechanism, runs: &[&RunSummary]) -> Self {
        let obs: Vec<Observables> = runs.iter().filter_map(|r| r.observables).collect();
        let col = |o: Observable| Estimate::of(&obs.iter().map(|x| o.get(x)).collect::<Vec<_>>());
        Self {
            r0,
            mechanism,
            n_runs: runs.len(),
            n_flagged: runs.len() - obs.len(),
            u: col(Observable::U),
            y: col(Observable::Y),
            cv: col(Observable::CV),
            i_n: col(Observable::IN),
            m: col(Observable::M),
            delta: Observables { u: 0.0, y: 0.0, cv: 0.0, i_n: 0.0, m: 0.0 },
        }
    }
}

/// Results of a sweep, sorted by `(r0, mechanism)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<CellSummary>,
    /// Every run, sorted by `(r0, mechanism, seed)`.
    pub runs: Vec<RunSummary>,
}

impl SweepTable {
    pub fn cell(&self, r0: f64, mechanism: Mechanism) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.r0 == r0 && c.mechanism == mechanism)
    }

    /// Per-seed values of `o`, in seed order, `None` for empty windows.
    pub fn per_seed(&self, r0: f64, mechanism: Mechanism, o: Observable) -> Vec<(u64, Option<f64>)> {
        self.runs
            .iter()
            .filter(|r| r.key.r0 == r0 && r.key.mechanism == mechanism)
            .map(|r| (r.key.seed, r.observables.map(|x| o.get(&x))))
            .collect()
    }

    /// Paired test of `a - b` over the seeds where both windows are non-empty.
    pub fn paired(&self, r0: f64, a: Mechanism, b: Mechanism, o: Observable) -> Result<PairedTest, StatsError> {
        let xa = self.per_seed(r0, a, o);
        let xb = self.per_seed(r0, b, o);
        let (va, vb): (Vec<f64>, Vec<f64>) = xa
            .iter()
            .filter_map(|(s, x)| {
                let y = xb.iter().find(|(t, _)| t == s).and_then(|(_, y)| *y)?;
                Some(((*x)?, y))
            })
            .unzip();
        paired_t_test(&va, &vb)
    }
}

/// Thread pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> rayon::ThreadPool {
    let n = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

fn summarize<S: Real>(key: RunKey, run: &RunOutput<S>, paired_t_f: Option<u64>, t_max: u64) -> RunSummary {
    let window = averaging_window(run, paired_t_f, t_max);
    RunSummary {
        key,
        first_crisis: run.first_crisis(),
        last_step: run.last_step(),
        termination: run.termination,
        paired_t_f,
        n_insolvencies: run.rows.iter().map(|r| r.insolvencies.len()).sum(),
        window,
        observables: window.map(|w| window_means(run, w)),
    }
}

/// Runs every requested mechanism for one `(r0, seed)`, the purchase &
/// assumption run first because it fixes the window end for the others.
fn paired_runs<S: Real>(
    spec: &SweepSpec<S>,
    r0: S,
    seed: u64,
    mechanisms: &[Mechanism],
    sink: &(dyn Fn(&RunKey, &RunOutput<S>) + Sync),
) -> Vec<RunSummary> {
    let pa = crate::scheduler::run(&spec.run_config(r0, Mechanism::PurchaseAndAssumption, seed))
        .expect("spec validated");
    let t_f = pa.t_f;
    let mut out = Vec::with_capacity(mechanisms.len());
    for &m in mechanisms {
        let key = RunKey { r0: r0.as_f64(), mechanism: m, seed };
        if m == Mechanism::PurchaseAndAssumption {
            sink(&key, &pa);
            out.push(summarize(key, &pa, t_f, spec.t_max));
        } else {
            let run = crate::scheduler::run(&spec.run_config(r0, m, seed)).expect("spec validated");
            sink(&key, &run);
            out.push(summarize(key, &run, t_f, spec.t_max));
        }
    }
    out
}

/// One cell: `n_seeds` runs of `mechanism` at `r0`.
pub fn ensemble<S: Real>(spec: &SweepSpec<S>, r0: S, mechanism: Mechanism) -> Result<CellSummary, ConfigError> {
    let mut one = spec.clone();
    one.grid = vec![r0];
    one.mechanisms = vec![mechanism];
    let table = sweep(&one)?;
    Ok(table.cells.into_iter().next().expect("one cell"))
}

pub fn sweep<S: Real>(spec: &SweepSpec<S>) -> Result<SweepTable, ConfigError> {
    sweep_with(spec, |_, _| {})
}

/// Like [`sweep`], handing every finished run to `sink` (for archiving).
/// `sink` may be called from several threads at once.
pub fn sweep_with<S: Real>(
    spec: &SweepSpec<S>,
    sink: impl Fn(&RunKey, &RunOutput<S>) + Sync,
) -> Result<SweepTable, ConfigError> {
    spec.validate()?;
    let mechanisms = spec.ordered_mechanisms();
    let units: Vec<(S, u64)> = spec.grid.iter().flat_map(|&r| spec.seeds().map(move |s| (r, s))).collect();
    let pool = thread_pool();
    // collect keeps input order, so the reduction below is independent of
    // scheduling
    let results: Vec<Vec<RunSummary>> =
        pool.install(|| units.par_iter().map(|&(r0, seed)| paired_runs(spec, r0, seed, &mechanisms, &sink)).collect());

    let mut runs: Vec<RunSummary> = results.into_iter().flatten().collect();
    runs.sort_by(|a, b| {
        a.key
            .r0
            .total_cmp(&b.key.r0)
            .then(a.key.mechanism.cmp(&b.key.mechanism))
            .then(a.key.seed.cmp(&b.key.seed))
    });

    let mut cells = Vec::new();
    for &r0 in &spec.grid {
        let r0 = r0.as_f64();
        let mut group: Vec<CellSummary> = mechanisms
            .iter()
            .map(|&m| {
                let members: Vec<&RunSummary> =
                    runs.iter().filter(|r| r.key.r0 == r0 && r.key.mechanism == m).collect();
                CellSummary::from_runs(r0, m, &members)
            })
            .collect();
        let k = group.len() as f64;
        let centre = |o: Observable| group.iter().map(|c| c.estimate(o).mean).sum::<f64>() / k;
        let (cu, cy, ccv, ci, cm) =
            (centre(Observable::U), centre(Observable::Y), centre(Observable::CV), centre(Observable::IN), centre(Observable::M));
        for c in &mut group {
            c.delta = Observables { u: c.u.mean - cu, y: c.y.mean - cy, cv: c.cv.mean - ccv, i_n: c.i_n.mean - ci, m: c.m.mean - cm };
        }
        cells.extend(group);
    }
    Ok(SweepTable { cells, runs })
}

/// Thresholds of the stylized-fact battery.
pub mod thresholds {
    /// Accepted range of the rank-size tail exponent.
    pub const ZIPF_RANGE: (f64, f64) = (0.5, 1.5);
    pub const SIGNIFICANCE: f64 = 0.05;
    /// Share of seeds on which each fact must hold.
    pub const SEED_SHARE: f64 = 0.6;
}

/// Stylized facts of one run, measured before its first bank insolvency.
#[derive(Debug, Clone, PartialEq)]
pub struct StylizedFacts {
    pub seed: u64,
    pub first_crisis: Option<u64>,
    /// Rows in the regression window.
    pub window_len: usize,
    pub zipf: Result<f64, StatsError>,
    pub okun: Result<OlsFit, StatsError>,
    pub phillips: Result<OlsFit, StatsError>,
    /// Firm sizes in the last pre-crisis state.
    pub sizes: Vec<f64>,
    /// `(U, Y, pi)` per step of the regression window.
    pub series: Vec<(f64, f64, f64)>,
}

impl StylizedFacts {
    pub fn zipf_holds(&self) -> bool {
        let (lo, hi) = thresholds::ZIPF_RANGE;
        matches!(self.zipf, Ok(a) if (lo..=hi).contains(&a))
    }

    pub fn okun_holds(&self) -> bool {
        matches!(self.okun, Ok(f) if f.slope < 0.0 && f.p_value < thresholds::SIGNIFICANCE)
    }

    pub fn phillips_holds(&self) -> bool {
        matches!(self.phillips, Ok(f) if f.slope < 0.0 && f.p_value < thresholds::SIGNIFICANCE)
    }
}

/// Steps `config` until the first bank insolvency (or the horizon). Okun and
/// Phillips slopes use the rows after `burn_in` and before the crisis; firm
/// sizes are taken from the last pre-crisis state.
pub fn stylized_facts<S: Real>(config: &RunConfig<S>, burn_in: u64) -> Result<StylizedFacts, ConfigError> {
    let mut sim = Simulation::new(config.clone())?;
    let mut sizes: Vec<S> = sim.state.firms.iter().map(|f| f.size()).collect();
    let mut first_crisis = None;
    while let Some(row) = sim.advance() {
        if !row.insolvencies.is_empty() {
            first_crisis = Some(row.t);
            break;
        }
        sizes = sim.state.firms.iter().map(|f| f.size()).collect();
    }
    let pre: Vec<_> = sim
        .rows()
        .iter()
        .filter(|r| r.t > burn_in && first_crisis.is_none_or(|t| r.t < t))
        .cloned()
        .collect();
    let slopes = okun_phillips_slopes(&pre);
    Ok(StylizedFacts {
        seed: config.seed,
        first_crisis,
        window_len: pre.len(),
        zipf: zipf_exponent(&sizes),
        okun: slopes.clone().map(|s| s.0),
        phillips: slopes.map(|s| s.1),
        sizes: sizes.iter().map(|s| s.as_f64()).collect(),
        series: pre.iter().map(|r| (r.unemployment.as_f64(), r.output.as_f64(), r.inflation.as_f64())).collect(),
    })
}

/// Counts of seeds on which each stylized fact holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub facts: Vec<StylizedFacts>,
    pub zipf: usize,
    pub okun: usize,
    pub phillips: usize,
}

impl ValidationReport {
    pub fn required(&self) -> usize {
        (thresholds::SEED_SHARE * self.facts.len() as f64).ceil() as usize
    }

    pub fn passed(&self) -> bool {
        let need = self.required();
        self.zipf >= need && self.okun >= need && self.phillips >= need
    }
}

/// Runs the stylized-fact battery over `seeds` in parallel.
pub fn validate<S: Real>(
    params: &Parameters<S>,
    r0: S,
    seeds: impl IntoIterator<Item = u64>,
    t_max: u64,
    burn_in: u64,
) -> Result<ValidationReport, ConfigError> {
    let configs: Vec<RunConfig<S>> = seeds
        .into_iter()
        .map(|s| RunConfig::new(params.clone(), r0, Mechanism::PurchaseAndAssumption, t_max, s))
        .collect();
    if let Some(c) = configs.first() {
        c.validate()?;
    }
    let facts: Vec<StylizedFacts> = thread_pool().install(|| {
        configs.par_iter().map(|c| stylized_facts(c, burn_in).expect("validated")).collect()
    });
    Ok(ValidationReport {
        zipf: facts.iter().filter(|f| f.zipf_holds()).count(),
        okun: facts.iter().filter(|f| f.okun_holds()).count(),
        phillips: facts.iter().filter(|f| f.phillips_holds()).count(),
        facts,
    })
}
