use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode, PolicyKind};
use super::HarnessError;
use crate::benchmark::{regret_accounting, BenchmarkMode, RegretSeries};
use crate::model::{LibraryConfig, RequestEvent};
use crate::oracles::OracleSpec;
use crate::policies::{
    Action, CachePolicy, ExpertsCache, NullPrediction, OftplCache, OftplUneqCache, OftrlBipCache, OftrlCache,
    OftrlUneqCache,
};
use crate::projections::BipartitePolytopeSpec;
use crate::traces::{assign_sizes, TraceSpec};

const STREAM_TRACE: u64 = 1;
const STREAM_SIZES: u64 = 2;
const STREAM_ORACLE: u64 = 3;
const STREAM_POLICY_BASE: u64 = 16;

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// What a policy runs against: the request sequence and the action space.
#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    pub requests: &'a [RequestEvent],
    pub library: &'a LibraryConfig,
    pub topology: Option<&'a BipartitePolytopeSpec>,
}

impl Environment<'_> {
    /// Size of the prediction item space.
    pub fn n_items(&self) -> usize {
        match self.topology {
            Some(spec) => spec.n_files() * spec.n_users(),
            None => self.library.n_files(),
        }
    }

    fn truth(&self, request: &RequestEvent) -> usize {
        match (self.topology, request.user) {
            (Some(spec), Some(user)) => request.file * spec.n_users() + user,
            _ => request.file,
        }
    }

    fn feasible(&self, action: &Action) -> bool {
        match (action, self.topology) {
            (Action::Single(set), None) => set.is_feasible(self.library.sizes(), self.library.capacity()),
            (Action::Bipartite(a), Some(spec)) => a.is_feasible(spec),
            _ => false,
        }
    }
}

/// Plays one policy through the environment: each slot the oracle sees the
/// upcoming request and produces the prediction, the policy commits, the
/// action is checked for feasibility and scored, and only then is the
/// request revealed. Returns the per-slot hit indicators.
pub fn simulate<P: CachePolicy + ?Sized>(
    policy: &mut P,
    env: Environment<'_>,
    oracle: &OracleSpec,
    oracle_rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<Vec<f64>, HarnessError> {
    let n_items = env.n_items();
    let mut hits = Vec::with_capacity(env.requests.len());
    for (t, request) in env.requests.iter().enumerate() {
        let slot = t as u64;
        let prediction = oracle.predict(slot, env.truth(request), n_items, oracle_rng);
        let failed = |policy: &P, source| HarnessError::Policy {
            policy: policy.name().to_string(),
            seed,
            slot,
            source,
        };
        let action = policy.decide(&prediction).map_err(|e| failed(policy, e))?;
        if !env.feasible(&action) {
            return Err(HarnessError::Infeasible {
                policy: policy.name().to_string(),
                seed,
                slot,
            });
        }
        hits.push(action.utility(request, env.topology));
        policy.observe(request).map_err(|e| failed(policy, e))?;
    }
    Ok(hits)
}

/// Instantiates a policy for a mode. Baselines wrap the optimistic policy of
/// that mode with the null prediction.
pub fn build_policy(
    kind: PolicyKind,
    mode: Mode,
    library: &LibraryConfig,
    topology: Option<&BipartitePolytopeSpec>,
    fresh_perturbation: bool,
    rng: ChaCha8Rng,
) -> Result<Box<dyn CachePolicy>, HarnessError> {
    let n = library.n_files();
    let c = library.capacity() as usize;
    let need_topology = || {
        topology
            .cloned()
            .ok_or_else(|| HarnessError::Config(format!("policy {kind} needs a topology")))
    };
    let policy: Box<dyn CachePolicy> = match (kind, mode) {
        (PolicyKind::Oftrl, Mode::EqualSize) => Box::new(OftrlCache::new(n, c, rng).map_err(config)?),
        (PolicyKind::Oftpl, Mode::EqualSize) => {
            Box::new(OftplCache::new(n, c, fresh_perturbation, rng).map_err(config)?)
        }
        (PolicyKind::Experts, Mode::EqualSize) => Box::new(ExpertsCache::new(n, c, rng).map_err(config)?),
        (PolicyKind::OftplUneq, Mode::EqualSize | Mode::Unequal) => {
            Box::new(OftplUneqCache::new(library.clone(), fresh_perturbation, rng).map_err(config)?)
        }
        (PolicyKind::OftrlUneq, Mode::EqualSize | Mode::Unequal) => {
            Box::new(OftrlUneqCache::new(library.clone(), rng).map_err(config)?)
        }
        (PolicyKind::OftrlBip, Mode::Bipartite) => Box::new(OftrlBipCache::new(need_topology()?, rng)),
        (PolicyKind::Ftrl, Mode::EqualSize) => {
            Box::new(NullPrediction::new(OftrlCache::new(n, c, rng).map_err(config)?, "ftrl"))
        }
        (PolicyKind::Ftrl, Mode::Unequal) => Box::new(NullPrediction::new(
            OftrlUneqCache::new(library.clone(), rng).map_err(config)?,
            "ftrl",
        )),
        (PolicyKind::Ftrl, Mode::Bipartite) => {
            Box::new(NullPrediction::new(OftrlBipCache::new(need_topology()?, rng), "ftrl"))
        }
        (PolicyKind::Ftpl, Mode::EqualSize) => Box::new(NullPrediction::new(
            OftplCache::new(n, c, fresh_perturbation, rng).map_err(config)?,
            "ftpl",
        )),
        (PolicyKind::Ftpl, Mode::Unequal) => Box::new(NullPrediction::new(
            OftplUneqCache::new(library.clone(), fresh_perturbation, rng).map_err(config)?,
            "ftpl",
        )),
        _ => {
            return Err(HarnessError::Config(format!(
                "policy {kind} is not available in {mode:?} mode"
            )))
        }
    };
    Ok(policy)
}

fn config(e: crate::policies::PolicyError) -> HarnessError {
    HarnessError::Config(e.to_string())
}

/// Everything shared by the runs of one seed.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub seed: u64,
    pub requests: Vec<RequestEvent>,
    pub library: LibraryConfig,
    pub topology: Option<BipartitePolytopeSpec>,
    pub benchmark_value: f64,
    /// Per-slot hits of the static hindsight optimum.
    pub benchmark_hits: Vec<f64>,
}

impl SeedData {
    pub fn prepare(config: &ExperimentConfig, seed: u64) -> Result<Self, HarnessError> {
        let topology = config.topology.as_ref().map(|t| t.spec(config.n_files)).transpose()?;
        let mut trace = TraceSpec::new(config.trace.clone(), config.n_files, config.horizon);
        if let Some(spec) = &topology {
            trace = trace.with_users(spec.n_users());
        }
        let requests = trace.generate(&mut stream(seed, STREAM_TRACE))?;
        if requests.is_empty() {
            return Err(HarnessError::Config("trace contains no requests".into()));
        }

        let (library, mode) = match &topology {
            Some(spec) => (
                LibraryConfig::equal_sizes(config.n_files, spec.total_capacity())
                    .map_err(|e| HarnessError::Config(e.to_string()))?,
                BenchmarkMode::Bipartite(spec.clone()),
            ),
            None if config.sizes.is_unit() => (
                LibraryConfig::equal_sizes(config.n_files, config.capacity)
                    .map_err(|e| HarnessError::Config(e.to_string()))?,
                BenchmarkMode::EqualSize {
                    n_files: config.n_files,
                    capacity: config.capacity,
                },
            ),
            None => {
                let sizes = assign_sizes(
                    config.n_files,
                    config.sizes.lo,
                    config.sizes.hi,
                    &mut stream(seed, STREAM_SIZES),
                )?;
                let library = LibraryConfig::with_sizes(config.capacity as f64, sizes.clone())
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                (
                    library,
                    BenchmarkMode::Knapsack {
                        sizes,
                        capacity: config.capacity as f64,
                    },
                )
            }
        };
        let (benchmark_value, benchmark_hits) = mode.static_contributions(&requests)?;
        Ok(Self {
            seed,
            requests,
            library,
            topology,
            benchmark_value,
            benchmark_hits,
        })
    }

    pub fn environment(&self) -> Environment<'_> {
        Environment {
            requests: &self.requests,
            library: &self.library,
            topology: self.topology.as_ref(),
        }
    }
}

/// Result of one (policy, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub policy: PolicyKind,
    pub seed: u64,
    pub series: RegretSeries,
}

/// Runs every (policy, seed) pair in parallel. Results are ordered by the
/// policy's position in the config, then by the seed's position.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunOutput>, HarnessError> {
    config.validate()?;
    let mode = config.mode();
    let seeds: Vec<SeedData> = config
        .seeds
        .par_iter()
        .map(|&s| SeedData::prepare(config, s))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(PolicyKind, &SeedData)> = config
        .policies
        .iter()
        .flat_map(|&p| seeds.iter().map(move |d| (p, d)))
        .collect();
    jobs.into_par_iter()
        .map(|(kind, data)| {
            let policy_rng = stream(data.seed, STREAM_POLICY_BASE + kind as u64);
            let mut policy = build_policy(
                kind,
                mode,
                &data.library,
                data.topology.as_ref(),
                config.fresh_perturbation,
                policy_rng,
            )?;
            let mut oracle_rng = stream(data.seed, STREAM_ORACLE);
            let hits = simulate(
                &mut policy,
                data.environment(),
                &config.oracle,
                &mut oracle_rng,
                data.seed,
            )?;
            let series = regret_accounting(&hits, &data.benchmark_hits, config.alpha_for(kind));
            Ok(RunOutput {
                policy: kind,
                seed: data.seed,
                series,
            })
        })
        .collect()
}

/// Writes `slot,policy,seed,hit,cum_hits,cum_opt,regret,alpha` rows: one per
/// slot (slots numbered from 1) plus a closing `avg` row per run holding the
/// horizon-normalized hit rate, benchmark value and regret.
pub fn write_csv(outputs: &[RunOutput], path: &Path) -> Result<(), HarnessError> {
    let io = |e: csv::Error| HarnessError::Output {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "slot", "policy", "seed", "hit", "cum_hits", "cum_opt", "regret", "alpha",
    ])
    .map_err(io)?;
    for out in outputs {
        let s = &out.series;
        let (policy, seed, alpha) = (out.policy.name(), out.seed.to_string(), s.alpha.to_string());
        for t in 0..s.horizon() {
            w.write_record([
                &(t + 1).to_string(),
                policy,
                &seed,
                &s.hits[t].to_string(),
                &s.cum_hits[t].to_string(),
                &s.cum_opt[t].to_string(),
                &s.regret[t].to_string(),
                &alpha,
            ])
            .map_err(io)?;
        }
        let horizon = s.horizon() as f64;
        let (hits, opt) = (
            s.cum_hits[s.horizon() - 1] / horizon,
            s.cum_opt[s.horizon() - 1] / horizon,
        );
        w.write_record([
            "avg",
            policy,
            &seed,
            &hits.to_string(),
            &hits.to_string(),
            &opt.to_string(),
            &(s.alpha * opt - hits).to_string(),
            &alpha,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Output {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Runs the experiment and writes its CSV.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunOutput>, HarnessError> {
    let outputs = run_experiment(config)?;
    write_csv(&outputs, &config.out)?;
    Ok(outputs)
}
