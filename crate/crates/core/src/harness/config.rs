use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::HarnessError;
use crate::benchmark::{ALPHA_BIPARTITE, ALPHA_EQUAL, ALPHA_KNAPSACK};
use crate::oracles::OracleSpec;
use crate::projections::BipartitePolytopeSpec;
use crate::traces::TraceKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Oftrl,
    Oftpl,
    OftplUneq,
    OftrlUneq,
    OftrlBip,
    Experts,
    /// OFTRL fed the null prediction (OFTRL-Uneq / OFTRL-Bip in those modes).
    Ftrl,
    /// OFTPL fed the null prediction (OFTPL-Uneq in unequal-size mode).
    Ftpl,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::Oftrl,
        PolicyKind::Oftpl,
        PolicyKind::OftplUneq,
        PolicyKind::OftrlUneq,
        PolicyKind::OftrlBip,
        PolicyKind::Experts,
        PolicyKind::Ftrl,
        PolicyKind::Ftpl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Oftrl => "oftrl",
            PolicyKind::Oftpl => "oftpl",
            PolicyKind::OftplUneq => "oftpl-uneq",
            PolicyKind::OftrlUneq => "oftrl-uneq",
            PolicyKind::OftrlBip => "oftrl-bip",
            PolicyKind::Experts => "experts",
            PolicyKind::Ftrl => "ftrl",
            PolicyKind::Ftpl => "ftpl",
        }
    }

    /// Whether the policy can run in the given mode.
    pub fn supports(self, mode: Mode) -> bool {
        use PolicyKind::*;
        match mode {
            Mode::EqualSize => !matches!(self, OftrlBip),
            Mode::Unequal => matches!(self, OftplUneq | OftrlUneq | Ftrl | Ftpl),
            Mode::Bipartite => matches!(self, OftrlBip | Ftrl),
        }
    }

    /// Approximation factor the policy's guarantee is stated against.
    pub fn auto_alpha(self, mode: Mode) -> f64 {
        match (self, mode) {
            (PolicyKind::OftrlBip, _) | (_, Mode::Bipartite) => ALPHA_BIPARTITE,
            (PolicyKind::OftplUneq | PolicyKind::OftrlUneq, _) | (_, Mode::Unequal) => ALPHA_KNAPSACK,
            _ => ALPHA_EQUAL,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let alias = s.strip_suffix("-baseline").unwrap_or(s);
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == alias && (alias == s || matches!(p, PolicyKind::Ftrl | PolicyKind::Ftpl)))
            .ok_or_else(|| HarnessError::Config(format!("unknown policy `{s}`")))
    }
}

/// Which action space and benchmark a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    EqualSize,
    Unequal,
    Bipartite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Auto,
    Fixed(f64),
}

impl FromStr for AlphaSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "auto" {
            return Ok(AlphaSpec::Auto);
        }
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("invalid alpha `{s}`")))?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(HarnessError::Config(format!("alpha must lie in (0, 1], got {v}")));
        }
        Ok(AlphaSpec::Fixed(v))
    }
}

/// Integer size range `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeRange {
    pub lo: u32,
    pub hi: u32,
}

impl SizeRange {
    pub const UNIT: SizeRange = SizeRange { lo: 1, hi: 1 };

    pub fn is_unit(self) -> bool {
        self == Self::UNIT
    }
}

impl FromStr for SizeRange {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::Config(format!("invalid size range `{s}`, expected lo:hi"));
        let (lo, hi) = s.trim().split_once(':').ok_or_else(bad)?;
        let (lo, hi): (u32, u32) = (
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
        );
        if lo < 1 || lo > hi {
            return Err(HarnessError::Config(format!("size range {lo}:{hi} needs 1 ≤ lo ≤ hi")));
        }
        Ok(SizeRange { lo, hi })
    }
}

/// Parses `zipf:<α>`, `zipf-flip:<α>`, `uniform`, `csv:<path>` or a path to
/// a `.csv` file.
pub fn parse_trace(s: &str) -> Result<TraceKind, HarnessError> {
    let s = s.trim();
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| HarnessError::Config(format!("invalid trace parameter `{v}`")))
    };
    if s == "uniform" || s == "uniform-lb" {
        return Ok(TraceKind::UniformLb);
    }
    if let Some(a) = s.strip_prefix("zipf-flip:") {
        return Ok(TraceKind::ZipfFlip(num(a)?));
    }
    if let Some(a) = s.strip_prefix("zipf:") {
        return Ok(TraceKind::Zipf(num(a)?));
    }
    if let Some(p) = s.strip_prefix("csv:") {
        return Ok(TraceKind::Csv(PathBuf::from(p)));
    }
    if s.ends_with(".csv") {
        return Ok(TraceKind::Csv(PathBuf::from(s)));
    }
    Err(HarnessError::Config(format!("unknown trace `{s}`")))
}

/// Parses `a,b,c`, `a..b` (exclusive) or `a..=b`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Config(format!("invalid seed list `{s}`"));
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (a.trim().parse().map_err(|_| bad())?..=b.trim().parse().map_err(|_| bad())?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (a.trim().parse().map_err(|_| bad())?..b.trim().parse().map_err(|_| bad())?).collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Bipartite topology before the library size is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub capacities: Vec<usize>,
    pub n_users: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Reads rows `cache_id,capacity` followed by rows `edge,user_id,cache_id`.
    /// Blank lines and `#` comments are ignored; cache ids must be dense.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut caps: BTreeMap<usize, usize> = BTreeMap::new();
        let mut edges = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| HarnessError::Config(format!("topology line {}: {m}", k + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| err(&format!("`{v}` is not a nonnegative integer")))
            };
            match fields.as_slice() {
                ["cache_id", "capacity"] | ["edge", "user_id", "cache_id"] => {}
                ["edge", user, cache] => edges.push((int(user)?, int(cache)?)),
                [cache, cap] => {
                    if !edges.is_empty() {
                        return Err(err("cache rows must precede edge rows"));
                    }
                    if caps.insert(int(cache)?, int(cap)?).is_some() {
                        return Err(err("duplicate cache id"));
                    }
                }
                _ => return Err(err("expected `cache_id,capacity` or `edge,user_id,cache_id`")),
            }
        }
        if caps.is_empty() || caps.keys().copied().ne(0..caps.len()) {
            return Err(HarnessError::Config("topology cache ids must be 0..J-1".into()));
        }
        let n_users = edges.iter().map(|&(i, _)| i + 1).max().unwrap_or(0);
        Ok(Self {
            capacities: caps.into_values().collect(),
            n_users,
            edges,
        })
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read topology {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn spec(&self, n_files: usize) -> Result<BipartitePolytopeSpec, HarnessError> {
        BipartitePolytopeSpec::new(
            n_files,
            self.capacities.clone(),
            self.n_users,
            self.edges.iter().copied(),
        )
        .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trace: TraceKind,
    pub n_files: usize,
    pub oracle: OracleSpec,
    pub policies: Vec<PolicyKind>,
    /// Cache capacity; unused in bipartite mode, where capacities come from
    /// the topology.
    pub capacity: usize,
    pub sizes: SizeRange,
    pub topology: Option<Topology>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub alpha: AlphaSpec,
    pub out: PathBuf,
    pub fresh_perturbation: bool,
}

impl ExperimentConfig {
    pub fn mode(&self) -> Mode {
        if self.topology.is_some() {
            Mode::Bipartite
        } else if self.sizes.is_unit() {
            Mode::EqualSize
        } else {
            Mode::Unequal
        }
    }

    pub fn alpha_for(&self, policy: PolicyKind) -> f64 {
        match self.alpha {
            AlphaSpec::Auto => policy.auto_alpha(self.mode()),
            AlphaSpec::Fixed(a) => a,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |m: String| Err(HarnessError::Config(m));
        if self.policies.is_empty() {
            return cfg("at least one policy is required".into());
        }
        if self.horizon == 0 {
            return cfg("horizon must be at least 1".into());
        }
        if self.n_files == 0 {
            return cfg("library must contain at least one file".into());
        }
        if self.seeds.is_empty() {
            return cfg("at least one seed is required".into());
        }
        let mode = self.mode();
        if mode != Mode::Bipartite {
            if self.capacity == 0 {
                return cfg("capacity must be positive".into());
            }
            if self.sizes.hi as usize > self.capacity {
                return cfg(format!(
                    "largest size {} exceeds capacity {}",
                    self.sizes.hi, self.capacity
                ));
            }
        }
        if mode == Mode::Bipartite && !self.sizes.is_unit() {
            return cfg("bipartite mode supports unit sizes only".into());
        }
        if let Some(t) = &self.topology {
            t.spec(self.n_files)?;
        }
        for &p in &self.policies {
            if !p.supports(mode) {
                return cfg(format!("policy {p} is not available in {mode:?} mode"));
            }
        }
        Ok(())
    }

    /// Builds a config from `key = value` settings. Keys match the CLI flag
    /// names; `policy` takes a comma-separated list.
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self, HarnessError> {
        let get = |k: &str| settings.get(k).map(String::as_str);
        let need = |k: &str| get(k).ok_or_else(|| HarnessError::Config(format!("missing setting `{k}`")));
        let int = |k: &str, v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| HarnessError::Config(format!("invalid {k} `{v}`")))
        };
        let known = [
            "trace",
            "files",
            "oracle",
            "policy",
            "capacity",
            "sizes",
            "horizon",
            "seeds",
            "alpha",
            "out",
            "fresh-perturbation",
            "topology",
        ];
        if let Some(k) = settings.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(HarnessError::Config(format!("unknown setting `{k}`")));
        }
        let config = Self {
            trace: parse_trace(need("trace")?)?,
            n_files: int("files", need("files")?)?,
            oracle: get("oracle")
                .unwrap_or("perfect")
                .parse()
                .map_err(|e: crate::oracles::OracleError| HarnessError::Config(e.to_string()))?,
            policies: need("policy")?
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()?,
            capacity: get("capacity").map(|v| int("capacity", v)).transpose()?.unwrap_or(0),
            sizes: get("sizes").map(str::parse).transpose()?.unwrap_or(SizeRange::UNIT),
            topology: get("topology")
                .map(|p| Topology::read(Path::new(p.trim())))
                .transpose()?,
            horizon: int("horizon", need("horizon")?)?,
            seeds: parse_seeds(get("seeds").unwrap_or("0"))?,
            alpha: get("alpha").unwrap_or("auto").parse()?,
            out: PathBuf::from(need("out")?.trim()),
            fresh_perturbation: match get("fresh-perturbation").map(str::trim) {
                None | Some("false") | Some("0") => false,
                Some("true") | Some("1") => true,
                Some(v) => return Err(HarnessError::Config(format!("invalid fresh-perturbation `{v}`"))),
            },
        };
        config.validate()?;
        Ok(config)
    }
}

/// Parses `key = value` lines; `#` starts a comment. Later keys override
/// earlier ones.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("config line {}: expected key = value", k + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
