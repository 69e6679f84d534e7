//! Seeded Monte-Carlo studies over simulated populations.
//!
//! Every runner takes an [`ExperimentConfig`], resolves the defaults for its
//! experiment, spreads trials over the rayon pool and returns a typed result.
//! Trial `t` draws all of its randomness from `derive_seed(stream, t)`, so
//! results depend only on the config and never on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, bloom_fpr};
use crate::apps::{DetectionPlan, KnownEpcs, detect_missing, estimate_cardinality};
use crate::bits::Bits;
use crate::corpus::{random_epcs96, sgtin_corpus};
use crate::error::{Error, Result};
use crate::gen2::Population;
use crate::sim::{TimingModel, derive_seed};
use crate::stats::{self, chi_square_uniform};
use crate::tash::{
    DIGEST_BITS, Reader, TashChainSpec, TashOp, compute_digest, digest_slice, oracle_operator,
    provisioned_population, tash_table, tash_table_readout,
};

/// Identifies the build in reports; overridable at compile time.
pub const BUILD_ID: &str = match option_env!("TASH_BUILD_ID") {
    Some(id) => id,
    None => concat!("tash-core ", env!("CARGO_PKG_VERSION")),
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Randomness,
    Balance,
    GatherTime,
    OperatorOr,
    Estimate,
    Missing,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Randomness,
        ExperimentKind::Balance,
        ExperimentKind::GatherTime,
        ExperimentKind::OperatorOr,
        ExperimentKind::Estimate,
        ExperimentKind::Missing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Randomness => "randomness",
            ExperimentKind::Balance => "balance",
            ExperimentKind::GatherTime => "gather-time",
            ExperimentKind::OperatorOr => "operator-or",
            ExperimentKind::Estimate => "estimate",
            ExperimentKind::Missing => "missing",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operator" => Ok(ExperimentKind::OperatorOr),
            _ => ExperimentKind::ALL
                .into_iter()
                .find(|k| k.name() == s)
                .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}"))),
        }
    }
}

/// Where the randomness study takes its digests from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKind {
    /// MD5 digests of a structured SGTIN-like EPC corpus.
    #[default]
    Sgtin,
    /// Digests drawn uniformly at random.
    Uniform,
    /// Every tag holds the same digest.
    Constant,
}

/// One experiment run. Empty lists and `None` mean "use the experiment's
/// default"; [`ExperimentConfig::resolved`] fills them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub l: Vec<u32>,
    #[serde(default)]
    pub seeds: Vec<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub truncate: Option<bool>,
    /// Digest bits the seeds may range over.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub corpus: Option<CorpusKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_file: Option<PathBuf>,
    #[serde(default)]
    pub corpus_size: Option<usize>,
    #[serde(default)]
    pub groups: Option<usize>,
    #[serde(default)]
    pub significance: Option<f64>,
}

fn default_master_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            n: Vec::new(),
            l: Vec::new(),
            seeds: Vec::new(),
            trials: None,
            master_seed: default_master_seed(),
            timing: None,
            output: None,
            truncate: None,
            window: None,
            m: Vec::new(),
            k: Vec::new(),
            gamma: None,
            alpha: None,
            beta: None,
            corpus: None,
            corpus_file: None,
            corpus_size: None,
            groups: None,
            significance: None,
        }
    }

    /// TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// A copy with every default made explicit.
    pub fn resolved(&self) -> Self {
        use ExperimentKind::*;
        let mut c = self.clone();
        let kind = c.experiment;
        let fill = |v: &mut Vec<usize>, d: &[usize]| {
            if v.is_empty() {
                *v = d.to_vec();
            }
        };
        fill(&mut c.n, &[300]);
        if c.l.is_empty() {
            c.l = match kind {
                Randomness => Vec::new(),
                Balance => vec![4],
                GatherTime => (0..=6).collect(),
                OperatorOr => vec![2],
                Estimate => {
                    let alpha = c.alpha.unwrap_or(0.9);
                    let beta = c.beta.unwrap_or(0.08);
                    analysis::plan_estimation(alpha, beta).map(|p| vec![p.l_opt]).unwrap_or_default()
                }
                Missing => match c.gamma {
                    Some(g) => analysis::detection_sizing(c.m.first().copied().unwrap_or(10), g)
                        .map(|s| vec![s.l])
                        .unwrap_or_default(),
                    None => vec![5, 6, 7],
                },
            };
        }
        match kind {
            GatherTime => fill(&mut c.seeds, &[3]),
            OperatorOr => fill(&mut c.seeds, &[3, 40]),
            _ => {}
        }
        if kind == Missing {
            fill(&mut c.m, &[10]);
            if c.k.is_empty() {
                c.k = match c.gamma {
                    Some(g) => analysis::detection_sizing(c.m[0], g).map(|s| vec![s.k]).unwrap_or(vec![2]),
                    None => vec![2],
                };
            }
        }
        c.trials.get_or_insert(match kind {
            Randomness | Balance | GatherTime | OperatorOr => 100,
            Estimate => 1000,
            Missing => 500,
        });
        c.window.get_or_insert(match kind {
            Randomness => 32,
            _ => DIGEST_BITS,
        });
        if kind == Estimate {
            c.alpha.get_or_insert(0.9);
            c.beta.get_or_insert(0.08);
        }
        if kind == Randomness {
            c.corpus.get_or_insert(CorpusKind::Sgtin);
            c.corpus_size.get_or_insert(10_000);
            c.groups.get_or_insert(100);
            c.significance.get_or_insert(0.05);
        }
        c.truncate.get_or_insert(true);
        c
    }

    /// Rejects configs no runner could execute.
    pub fn validate(&self) -> Result<()> {
        if self.trials == Some(0) {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        for path in [&self.timing, &self.corpus_file].into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::Config(format!("{} does not exist", path.display())));
            }
        }
        if let Some(w) = self.window {
            if w == 0 || w > DIGEST_BITS {
                return Err(Error::Config(format!("window {w} outside 1..={DIGEST_BITS}")));
            }
        }
        if let Some(s) = self.significance {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Config(format!("significance {s} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn timing_model(&self) -> Result<TimingModel> {
        match &self.timing {
            None => Ok(TimingModel::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                TimingModel::parse(&text)
            }
        }
    }

    fn trials(&self) -> usize {
        self.trials.unwrap_or(1)
    }

    fn window(&self) -> usize {
        self.window.unwrap_or(DIGEST_BITS)
    }
}

/// Runs `f` for every trial in parallel; the result order follows the trial index.
fn par_trials<T, F>(trials: usize, stream: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, t as u64));
            f(t, &mut rng)
        })
        .collect()
}

fn random_population(n: usize, rng: &mut ChaCha8Rng) -> Result<Population> {
    provisioned_population(random_epcs96(n, rng))
}

fn random_seed_position(dimension: u32, window: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let span = window
        .checked_sub(dimension as usize)
        .ok_or_else(|| Error::InvalidParams(format!("l = {dimension} exceeds the {window}-bit window")))?;
    Ok(rng.gen_range(0..=span))
}

fn ms(us: f64) -> f64 {
    us / 1000.0
}

/// A tidy table plus headline numbers, rendered to CSV and JSON.
pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
    fn summary(&self) -> BTreeMap<String, f64>;
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

/// Serializable record of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub build_id: String,
    pub timing_fingerprint: String,
    pub config: ExperimentConfig,
    pub summary: BTreeMap<String, f64>,
    #[serde(skip)]
    header: Vec<&'static str>,
    #[serde(skip)]
    rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(config: &ExperimentConfig, timing: &TimingModel, result: &dyn Tabular) -> Self {
        Report {
            experiment: config.experiment,
            build_id: BUILD_ID.to_string(),
            timing_fingerprint: timing.fingerprint(),
            config: config.clone(),
            summary: result.summary(),
            header: result.header(),
            rows: result.rows(),
        }
    }

    /// The CSV body, preceded by `#` lines naming the build and timing model.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!(
            "# experiment: {}\n# build: {}\n# timing: {}\n# master_seed: {}\n",
            self.experiment, self.build_id, self.timing_fingerprint, self.config.master_seed
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Document(e.to_string());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Document(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Pass rates of the uniformity test at one `(r, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomnessSetting {
    pub r: usize,
    pub l: u32,
    pub pass_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomnessResult {
    pub settings: Vec<RandomnessSetting>,
    /// Ones-fraction of each bit-fraction repetition.
    pub bit_fractions: Vec<f64>,
}

impl RandomnessResult {
    /// Fraction of settings whose pass rate exceeds `threshold`.
    pub fn share_above(&self, threshold: f64) -> f64 {
        let hits = self.settings.iter().filter(|s| s.pass_rate > threshold).count();
        hits as f64 / self.settings.len().max(1) as f64
    }

    pub fn mean_pass_rate(&self) -> f64 {
        stats::mean(&self.settings.iter().map(|s| s.pass_rate).collect::<Vec<_>>())
    }
}

impl Tabular for RandomnessResult {
    fn header(&self) -> Vec<&'static str> {
        vec!["r", "l", "pass_rate"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.settings
            .iter()
            .map(|s| vec![s.r.to_string(), s.l.to_string(), f6(s.pass_rate)])
            .collect()
    }
    fn summary(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("settings".into(), self.settings.len() as f64),
            ("share_pass_rate_above_0.95".into(), self.share_above(0.95)),
            ("mean_pass_rate".into(), self.mean_pass_rate()),
            ("bit_fraction_p05".into(), stats::quantile(&self.bit_fractions, 0.05)),
            ("bit_fraction_p50".into(), stats::quantile(&self.bit_fractions, 0.5)),
            ("bit_fraction_p95".into(), stats::quantile(&self.bit_fractions, 0.95)),
        ])
    }
}

fn randomness_digests(config: &ExperimentConfig) -> Result<Vec<Bits>> {
    let size = config.corpus_size.unwrap_or(10_000);
    if let Some(path) = &config.corpus_file {
        let known = KnownEpcs::load(path)?;
        return Ok((0..known.len()).map(|i| known.digest(i).clone()).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, 0));
    Ok(match config.corpus.unwrap_or_default() {
        CorpusKind::Sgtin => sgtin_corpus(size, config.master_seed).iter().map(compute_digest).collect(),
        CorpusKind::Uniform => (0..size)
            .map(|_| (0..DIGEST_BITS).map(|_| rng.gen_bool(0.5)).collect())
            .collect(),
        CorpusKind::Constant => vec![compute_digest(&Bits::zeros(96)); size],
    })
}

/// Chi-square uniformity of every slice `(r, l)` inside the window, tested
/// separately on each of `groups` disjoint random groups of the corpus.
pub fn run_randomness(config: &ExperimentConfig) -> Result<RandomnessResult> {
    let c = config.resolved();
    c.validate()?;
    let digests = randomness_digests(&c)?;
    let groups = c.groups.unwrap_or(100).max(1);
    let per_group = digests.len() / groups;
    if per_group < 2 {
        return Err(Error::InvalidParams(format!(
            "a corpus of {} cannot be split into {groups} groups of at least two",
            digests.len()
        )));
    }
    let window = c.window().min(64);
    let alpha = c.significance.unwrap_or(0.05);
    let mut order: Vec<usize> = (0..digests.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(c.master_seed, 1)));
    let members: Vec<&[usize]> = order.chunks_exact(per_group).take(groups).collect();

    let settings: Vec<(usize, u32)> = (0..window)
        .flat_map(|r| (1..=(window - r) as u32).map(move |l| (r, l)))
        .collect();
    let settings = settings
        .into_par_iter()
        .map(|(r, l)| {
            let mut passed = 0usize;
            let mut values = Vec::with_capacity(per_group);
            for group in &members {
                values.clear();
                for &i in *group {
                    values.push(digest_slice(&digests[i], r, l)?);
                }
                if chi_square_uniform(&values, 1u64 << l)?.passes(alpha) {
                    passed += 1;
                }
            }
            Ok(RandomnessSetting {
                r,
                l,
                pass_rate: passed as f64 / groups as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let bit_fractions = par_trials(c.trials(), derive_seed(c.master_seed, 2), |_, rng| {
        let r = rng.gen_range(0..window);
        let l = rng.gen_range(1..=(window - r) as u32);
        let group = members[rng.gen_range(0..members.len())];
        let values = group
            .iter()
            .map(|&i| digest_slice(&digests[i], r, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(stats::ones_fraction(&values, l))
    })?;
    Ok(RandomnessResult {
        settings,
        bit_fractions,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceResult {
    pub n: usize,
    pub l: u32,
    pub seeds: Vec<usize>,
    /// `tables[s][e]`: count of entry `e` under seed `s`.
    pub tables: Vec<Vec<u64>>,
}

impl BalanceResult {
    pub fn entry_means(&self) -> Vec<f64> {
        self.entry_columns().iter().map(|c| stats::mean(c)).collect()
    }

    pub fn entry_std_devs(&self) -> Vec<f64> {
        self.entry_columns().iter().map(|c| stats::std_dev(c)).collect()
    }

    pub fn grand_mean(&self) -> f64 {
        stats::mean(&self.entry_means())
    }

    /// Binomial prediction `sqrt(n p (1 - p))` with `p = 2^-l`.
    pub fn binomial_std_dev(&self) -> f64 {
        let p = 1.0 / (1u64 << self.l) as f64;
        (self.n as f64 * p * (1.0 - p)).sqrt()
    }

    fn entry_columns(&self) -> Vec<Vec<f64>> {
        let size = 1usize << self.l;
        (0..size)
            .map(|e| self.tables.iter().map(|t| t[e] as f64).collect())
            .collect()
    }
}

impl Tabular for BalanceResult {
    fn header(&self) -> Vec<&'static str> {
        vec!["entry", "mean", "std_dev", "binomial_std_dev"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let b = self.binomial_std_dev();
        self.entry_means()
            .into_iter()
            .zip(self.entry_std_devs())
            .enumerate()
            .map(|(e, (m, s))| vec![e.to_string(), f6(m), f6(s), f6(b)])
            .collect()
    }
    fn summary(&self) -> BTreeMap<String, f64> {
        let means = self.entry_means();
        let expected = self.n as f64 / (1u64 << self.l) as f64;
        BTreeMap::from([
            ("grand_mean".into(), self.grand_mean()),
            ("expected_mean".into(), expected),
            (
                "max_mean_deviation".into(),
                means.iter().map(|m| (m - expected).abs()).fold(0.0, f64::max),
            ),
            ("mean_std_dev".into(), stats::mean(&self.entry_std_devs())),
            ("binomial_std_dev".into(), self.binomial_std_dev()),
        ])
    }
}

/// `trials` tables of one population, each under a distinct random seed.
pub fn run_balance(config: &ExperimentConfig) -> Result<BalanceResult> {
    let c = config.resolved();
    c.validate()?;
    let timing = c.timing_model()?;
    let n = c.n[0];
    let l = c.l[0];
    let span = c.window().checked_sub(l as usize).map(|s| s + 1).unwrap_or(0);
    let trials = c.trials();
    if trials > span {
        return Err(Error::InvalidParams(format!(
            "{trials} distinct seeds do not fit {span} positions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(c.master_seed, 0));
    let pop = random_population(n, &mut rng)?;
    let mut seeds: Vec<usize> = sample(&mut rng, span, trials).into_vec();
    seeds.sort_unstable();
    let reader = Reader::new(timing, c.truncate.unwrap_or(true), 0);
    let tables = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut pop = pop.clone();
            let reader = reader.with_seed(derive_seed(c.master_seed, 1000 + i as u64));
            tash_table(&mut pop, l, &TashChainSpec::single(r), &reader)?.0.counts()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BalanceResult { n, l, seeds, tables })
}

/// Mean air time of a full table build at one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GatherPoint {
    pub n: usize,
    pub l: u32,
    pub air_full_ms: f64,
    pub air_truncated_ms: f64,
    /// Full-reply air time relative to the l = 0 full-reply baseline.
    pub ratio_to_baseline: f64,
    pub truncation_drop: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GatherResult {
    pub points: Vec<GatherPoint>,
}

impl Tabular for GatherResult {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "l", "air_full_ms", "air_truncated_ms", "ratio_to_baseline", "truncation_drop"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    p.n.to_string(),
                    p.l.to_string(),
                    f6(p.air_full_ms),
                    f6(p.air_truncated_ms),
                    f6(p.ratio_to_baseline),
                    f6(p.truncation_drop),
                ]
            })
            .collect()
    }
    fn summary(&self) -> BTreeMap<String, f64> {
        let min_drop = self.points.iter().map(|p| p.truncation_drop).fold(f64::INFINITY, f64::min);
        let mut s = BTreeMap::from([("min_truncation_drop".into(), min_drop)]);
        for p in &self.points {
            s.insert(format!("n{}.l{}.ratio_to_baseline", p.n, p.l), p.ratio_to_baseline);
        }
        s
    }
}

/// Air time of full tables at every configured `l`, with and without
/// truncation, averaged over `trials` fresh populations.
pub fn run_gather_time(config: &ExperimentConfig) -> Result<GatherResult> {
    let c = config.resolved();
    c.validate()?;
    let timing = c.timing_model()?;
    let chain = TashChainSpec::single(c.seeds[0]);
    let mut points = Vec::new();
    for (ni, &n) in c.n.iter().enumerate() {
        let per_trial = par_trials(c.trials(), derive_seed(c.master_seed, ni as u64), |t, rng| {
            let pop = random_population(n, rng)?;
            let mut row = Vec::with_capacity(c.l.len() + 1);
            for (li, &l) in std::iter::once(&0).chain(&c.l).enumerate() {
                let mut cost = [0.0; 2];
                for (slot, truncate) in [false, true].into_iter().enumerate() {
                    let seed = derive_seed(c.master_seed, ((t as u64) << 16) | ((li as u64) << 1) | slot as u64);
                    let reader = Reader::new(timing.clone(), truncate, seed);
                    cost[slot] = tash_table(&mut pop.clone(), l, &chain, &reader)?.1.air_time;
                }
                row.push(cost);
            }
            Ok(row)
        })?;
        let avg = |i: usize, slot: usize| stats::mean(&per_trial.iter().map(|r| r[i][slot]).collect::<Vec<_>>());
        let baseline = avg(0, 0);
        for (i, &l) in c.l.iter().enumerate() {
            let (full, truncated) = (avg(i + 1, 0), avg(i + 1, 1));
            points.push(GatherPoint {
                n,
                l,
                air_full_ms: ms(full),
                air_truncated_ms: ms(truncated),
                ratio_to_baseline: full / baseline,
                truncation_drop: 1.0 - truncated / full,
            });
        }
    }
    Ok(GatherResult { points })
}

/// Air times of the three ways to obtain a two-seed OR table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorPoint {
    pub n: usize,
    pub l: u32,
    /// Two separate tables merged by EPC at the application layer.
    pub case1_ms: f64,
    /// One on-tag OR chain with full replies.
    pub case2_ms: f64,
    /// One on-tag OR chain with one-bit truncated replies.
    pub case3_ms: f64,
    /// Trials in which the merged and on-tag tables agreed with the oracle.
    pub equivalent_trials: usize,
    pub trials: usize,
}

impl OperatorPoint {
    pub fn one_stop_drop(&self) -> f64 {
        1.0 - self.case2_ms / self.case1_ms
    }

    pub fn truncated_drop(&self) -> f64 {
        1.0 - self.case3_ms / self.case1_ms
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorResult {
    pub points: Vec<OperatorPoint>,
}

impl Tabular for OperatorResult {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "n",
            "l",
            "case1_ms",
            "case2_ms",
            "case3_ms",
            "one_stop_drop",
            "truncated_drop",
            "equivalent_trials",
            "trials",
        ]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    p.n.to_string(),
                    p.l.to_string(),
                    f6(p.case1_ms),
                    f6(p.case2_ms),
                    f6(p.case3_ms),
                    f6(p.one_stop_drop()),
                    f6(p.truncated_drop()),
                    p.equivalent_trials.to_string(),
                    p.trials.to_string(),
                ]
            })
            .collect()
    }
    fn summary(&self) -> BTreeMap<String, f64> {
        let mut s = BTreeMap::new();
        for p in &self.points {
            s.insert(format!("n{}.l{}.one_stop_drop", p.n, p.l), p.one_stop_drop());
            s.insert(format!("n{}.l{}.truncated_drop", p.n, p.l), p.truncated_drop());
            s.insert(
                format!("n{}.l{}.equivalent_share", p.n, p.l),
                p.equivalent_trials as f64 / p.trials as f64,
            );
        }
        s
    }
}

/// Case 1 builds one untruncated table per seed and unions the EPCs read in
/// matching entries; Cases 2 and 3 run the OR chain on the tags.
pub fn run_operator_or(config: &ExperimentConfig) -> Result<OperatorResult> {
    let c = config.resolved();
    c.validate()?;
    let timing = c.timing_model()?;
    if c.seeds.len() < 2 {
        return Err(Error::InvalidParams("the OR study needs at least two seeds".into()));
    }
    let chain = TashChainSpec::uniform(TashOp::Or, &c.seeds)?;
    let mut points = Vec::new();
    for (ni, &n) in c.n.iter().enumerate() {
        for (li, &l) in c.l.iter().enumerate() {
            let stream = derive_seed(c.master_seed, ((ni as u64) << 8) | li as u64);
            let per_trial = par_trials(c.trials(), stream, |_, rng| {
                let pop = random_population(n, rng)?;
                let full = Reader::new(timing.clone(), false, rng.gen());
                let mut merged = vec![std::collections::BTreeSet::new(); 1 << l];
                let mut case1 = 0.0;
                for (i, &r) in c.seeds.iter().enumerate() {
                    let reader = full.with_seed(derive_seed(full.rng_seed, i as u64));
                    let (_, readout, log) =
                        tash_table_readout(&mut pop.clone(), l, &TashChainSpec::single(r), &reader)?;
                    case1 += log.air_time;
                    for (set, ids) in merged.iter_mut().zip(readout) {
                        set.extend(ids);
                    }
                }
                let (t2, log2) = tash_table(&mut pop.clone(), l, &chain, &full)?;
                let truncated = Reader::new(timing.clone(), true, full.rng_seed);
                let (t3, log3) = tash_table(&mut pop.clone(), l, &chain, &truncated)?;
                let oracle = oracle_operator(&pop, l, &chain)?.counts()?;
                let merged: Vec<u64> = merged.iter().map(|s| s.len() as u64).collect();
                let agree = merged == oracle && t2.counts()? == oracle && t3.counts()? == oracle;
                Ok((case1, log2.air_time, log3.air_time, agree))
            })?;
            let avg = |f: fn(&(f64, f64, f64, bool)) -> f64| {
                stats::mean(&per_trial.iter().map(f).collect::<Vec<_>>())
            };
            points.push(OperatorPoint {
                n,
                l,
                case1_ms: ms(avg(|t| t.0)),
                case2_ms: ms(avg(|t| t.1)),
                case3_ms: ms(avg(|t| t.2)),
                equivalent_trials: per_trial.iter().filter(|t| t.3).count(),
                trials: per_trial.len(),
            });
        }
    }
    Ok(OperatorResult { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateTrial {
    pub n: usize,
    pub l: u32,
    pub estimate: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub beta: f64,
    pub trials: Vec<EstimateTrial>,
}

impl EstimateResult {
    fn errors(&self, n: usize) -> Vec<f64> {
        self.trials.iter().filter(|t| t.n == n).map(|t| t.relative_error).collect()
    }

    /// Share of trials at `n` with relative error strictly below `bound`.
    pub fn share_below(&self, n: usize, bound: f64) -> f64 {
        let e = self.errors(n);
        e.iter().filter(|&&x| x < bound).count() as f64 / e.len().max(1) as f64
    }

    /// Share of trials at `n` with `|n̂ - n| <= beta n`.
    pub fn coverage(&self, n: usize) -> f64 {
        let e = self.errors(n);
        e.iter().filter(|&&x| x <= self.beta + 1e-12).count() as f64 / e.len().max(1) as f64
    }

    pub fn median_error(&self, n: usize) -> f64 {
        stats::quantile(&self.errors(n), 0.5)
    }

    fn ns(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.trials.iter().map(|t| t.n).collect();
        ns.dedup();
        ns
    }
}

impl Tabular for EstimateResult {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "l", "trial", "estimate", "relative_error"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut trial = BTreeMap::<usize, usize>::new();
        self.trials
            .iter()
            .map(|t| {
                let i = trial.entry(t.n).or_default();
                *i += 1;
                vec![t.n.to_string(), t.l.to_string(), (*i - 1).to_string(), f6(t.estimate), f6(t.relative_error)]
            })
            .collect()
    }
    fn summary(&self) -> BTreeMap<String, f64> {
        let mut s = BTreeMap::new();
        for n in self.ns() {
            s.insert(format!("n{n}.share_error_below_0.1"), self.share_below(n, 0.1));
            s.insert(format!("n{n}.median_error"), self.median_error(n));
            s.insert(format!("n{n}.coverage_beta"), self.coverage(n));
        }
        s
    }
}

/// Entry-zero estimates `m 2^l` over fresh populations and random seeds.
pub fn run_estimate(config: &ExperimentConfig) -> Result<EstimateResult> {
    let c = config.resolved();
    c.validate()?;
    let timing = c.timing_model()?;
    let beta = c.beta.unwrap_or(0.08);
    let l = match c.l.first() {
        Some(&l) => l,
        None => analysis::plan_estimation(c.alpha.unwrap_or(0.9), beta)?.l_opt,
    };
    let window = c.window();
    let mut trials = Vec::new();
    for (ni, &n) in c.n.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidParams("estimation needs a non-empty population".into()));
        }
        trials.extend(par_trials(c.trials(), derive_seed(c.master_seed, ni as u64), |_, rng| {
            let mut pop = random_population(n, rng)?;
            let seed = random_seed_position(l, window, rng)?;
            let reader = Reader::new(timing.clone(), c.truncate.unwrap_or(true), rng.gen());
            let (estimate, _) = estimate_cardinality(&mut pop, l, seed, &reader)?;
            Ok(EstimateTrial {
                n,
                l,
                estimate,
                relative_error: (estimate - n as f64).abs() / n as f64,
            })
        })?);
    }
    Ok(EstimateResult { beta, trials })
}

/// Aggregate of all detection trials at one `(m, l, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MissingPoint {
    pub n: usize,
    pub m: usize,
    pub l: u32,
    pub k: usize,
    pub trials: usize,
    pub min_recall: f64,
    pub mean_fpr: f64,
    pub analytic_fpr: f64,
    pub mean_fp_per_missing: f64,
    pub mean_air_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MissingResult {
    pub points: Vec<MissingPoint>,
}

impl MissingResult {
    pub fn point(&self, m: usize, l: u32, k: usize) -> Option<&MissingPoint> {
        self.points.iter().find(|p| p.m == m && p.l == l && p.k == k)
    }
}

impl Tabular for MissingResult {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "n",
            "m",
            "l",
            "k",
            "trials",
            "min_recall",
            "mean_fpr",
            "analytic_fpr",
            "mean_fp_per_missing",
            "mean_air_ms",
        ]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    p.n.to_string(),
                    p.m.to_string(),
                    p.l.to_string(),
                    p.k.to_string(),
                    p.trials.to_string(),
                    f6(p.min_recall),
                    f6(p.mean_fpr),
                    f6(p.analytic_fpr),
                    f6(p.mean_fp_per_missing),
                    f6(p.mean_air_ms),
                ]
            })
            .collect()
    }
    fn summary(&self) -> BTreeMap<String, f64> {
        let mut s = BTreeMap::new();
        for p in &self.points {
            let key = format!("n{}.m{}.l{}.k{}", p.n, p.m, p.l, p.k);
            s.insert(format!("{key}.mean_fpr"), p.mean_fpr);
            s.insert(format!("{key}.min_recall"), p.min_recall);
        }
        s
    }
}

/// Removes `m` random tags from a fresh population of `n` and runs one
/// detection round, for every combination of the configured `n`, `m`, `l`
/// and `k`.
pub fn run_missing(config: &ExperimentConfig) -> Result<MissingResult> {
    let c = config.resolved();
    c.validate()?;
    let timing = c.timing_model()?;
    if c.l.is_empty() {
        return Err(Error::Infeasible("no table dimension satisfies the requested rate".into()));
    }
    let window = c.window();
    let mut points = Vec::new();
    let mut index = 0u64;
    for &n in &c.n {
        for &m in &c.m {
            if m > n {
                return Err(Error::InvalidParams(format!("{m} missing tags out of {n}")));
            }
            for &l in &c.l {
                for &k in &c.k {
                    index += 1;
                    let scores = par_trials(c.trials(), derive_seed(c.master_seed, index), |_, rng| {
                        let known = KnownEpcs::new(random_epcs96(n, rng))?;
                        let mut pop = known.population()?;
                        let mut gone = sample(rng, n, m).into_vec();
                        gone.sort_unstable();
                        for &i in &gone {
                            pop.set_present(i, false)?;
                        }
                        let plan = DetectionPlan::with_dimension(m, l, k, window, rng)?;
                        let reader = Reader::new(timing.clone(), c.truncate.unwrap_or(true), rng.gen());
                        let report = detect_missing(&known, &mut pop, &plan, &reader)?;
                        Ok((report.score(&known, &gone), report.log.air_time))
                    })?;
                    let col = |f: &dyn Fn(&(crate::apps::DetectionScore, f64)) -> f64| {
                        scores.iter().map(f).collect::<Vec<_>>()
                    };
                    points.push(MissingPoint {
                        n,
                        m,
                        l,
                        k,
                        trials: scores.len(),
                        min_recall: col(&|s| s.0.recall).into_iter().fold(1.0, f64::min),
                        mean_fpr: stats::mean(&col(&|s| s.0.fpr)),
                        analytic_fpr: bloom_fpr(m, 1usize << l, k),
                        mean_fp_per_missing: stats::mean(&col(&|s| s.0.fp_per_missing)),
                        mean_air_ms: ms(stats::mean(&col(&|s| s.1))),
                    });
                }
            }
        }
    }
    Ok(MissingResult { points })
}

/// Runs the configured experiment and wraps the result in a [`Report`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let c = config.resolved();
    c.validate()?;
    let timing = c.timing_model()?;
    let result: Box<dyn Tabular> = match c.experiment {
        ExperimentKind::Randomness => Box::new(run_randomness(&c)?),
        ExperimentKind::Balance => Box::new(run_balance(&c)?),
        ExperimentKind::GatherTime => Box::new(run_gather_time(&c)?),
        ExperimentKind::OperatorOr => Box::new(run_operator_or(&c)?),
        ExperimentKind::Estimate => Box::new(run_estimate(&c)?),
        ExperimentKind::Missing => Box::new(run_missing(&c)?),
    };
    Ok(Report::new(&c, &timing, result.as_ref()))
}
