//! Cardinality estimation and missing-tag detection on top of tash tables.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, DetectionSizing};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::gen2::Population;
use crate::sim::InventoryLog;
use crate::tash::{
    DIGEST_BITS, Reader, TashChainSpec, TashOp, TashTable, compute_digest, digest_slice,
    seed_independence_check, tash_table, tash_table_selective,
};

/// `n̂ = m * 2^l` from the count `m` of entry 0, inventoried alone.
pub fn estimate_cardinality(
    population: &mut Population,
    dimension: u32,
    seed: usize,
    reader: &Reader,
) -> Result<(f64, InventoryLog)> {
    let chain = TashChainSpec::single(seed);
    let (table, log) = tash_table_selective(population, dimension, &chain, &[0], reader)?;
    let m = table.entry(0).unwrap_or(0);
    Ok((m as f64 * (1u64 << dimension) as f64, log))
}

/// Zero-slot estimate `-d ln(n0 / d)` over a presence bitmap.
pub fn zero_estimator(bitmap: &Bits) -> Result<f64> {
    analysis::zero_estimate(bitmap.len(), bitmap.count_zeros())
}

/// `k` seeds whose `l`-bit slices are pairwise disjoint, placed uniformly at
/// random inside a `digest_len`-bit digest. `None` if they cannot fit.
pub fn random_disjoint_seeds<R: Rng + ?Sized>(
    k: usize,
    dimension: u32,
    digest_len: usize,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let l = dimension as usize;
    let free = digest_len.checked_sub(k.checked_mul(l)?)?;
    let mut gaps: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=free)).collect();
    gaps.sort_unstable();
    Some(gaps.iter().enumerate().map(|(i, g)| g + i * l).collect())
}

/// `k` seeds spread evenly over `[0, digest_len - l]`.
pub fn spaced_seeds(k: usize, dimension: u32, digest_len: usize) -> Vec<usize> {
    let span = digest_len.saturating_sub(dimension as usize);
    if k <= 1 {
        return vec![0; k];
    }
    (0..k)
        .map(|i| ((i * span) as f64 / (k - 1) as f64).round() as usize)
        .collect()
}

/// Table size and seeds for one missing-tag detection round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPlan {
    pub m: usize,
    pub gamma: Option<f64>,
    pub l: u32,
    pub table_size: usize,
    pub k: usize,
    pub seeds: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DetectionPlan {
    /// A plan with a fixed dimension and seed count.
    pub fn with_dimension<R: Rng + ?Sized>(
        m: usize,
        dimension: u32,
        k: usize,
        digest_len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("at least one seed is needed".into()));
        }
        if dimension as usize > digest_len || dimension > crate::tash::MAX_TABLE_DIMENSION {
            return Err(Error::Infeasible(format!(
                "dimension {dimension} does not fit a {digest_len}-bit digest"
            )));
        }
        let mut warnings = Vec::new();
        let seeds = match random_disjoint_seeds(k, dimension, digest_len, rng) {
            Some(s) => s,
            None => {
                warnings.push(format!(
                    "{k} disjoint {dimension}-bit slices do not fit in {digest_len} bits; seeds overlap"
                ));
                spaced_seeds(k, dimension, digest_len)
            }
        };
        Ok(DetectionPlan {
            m,
            gamma: None,
            l: dimension,
            table_size: 1 << dimension,
            k,
            seeds,
            warnings,
        })
    }

    pub fn chain(&self) -> TashChainSpec {
        TashChainSpec::uniform(TashOp::Or, &self.seeds).expect("plans hold at least one seed")
    }

    /// The analytic Bloom false-positive rate for this plan.
    pub fn expected_fpr(&self) -> f64 {
        analysis::bloom_fpr(self.m, self.table_size, self.k)
    }
}

/// Sizes the table for `m` expected missing tags at target rate `gamma`.
pub fn plan_detection<R: Rng + ?Sized>(
    m: usize,
    gamma: f64,
    digest_len: usize,
    rng: &mut R,
) -> Result<DetectionPlan> {
    let DetectionSizing { l, k, .. } = analysis::detection_sizing(m, gamma)?;
    let mut plan = DetectionPlan::with_dimension(m, l, k, digest_len, rng)?;
    plan.gamma = Some(gamma);
    Ok(plan)
}

/// Known EPCs and their digests, computed once on load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnownEpcs {
    epcs: Vec<Bits>,
    digests: Vec<Bits>,
    index: HashMap<Bits, usize>,
}

impl KnownEpcs {
    pub fn new<I: IntoIterator<Item = Bits>>(epcs: I) -> Result<Self> {
        let mut db = KnownEpcs::default();
        for epc in epcs {
            if db.index.insert(epc.clone(), db.epcs.len()).is_some() {
                return Err(Error::Document(format!("duplicate EPC {}", epc.to_hex())));
            }
            db.digests.push(compute_digest(&epc));
            db.epcs.push(epc);
        }
        Ok(db)
    }

    /// One hex EPC per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let epcs = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| Bits::from_hex(l, None))
            .collect::<Result<Vec<_>>>()?;
        Self::new(epcs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        self.epcs.iter().map(|e| e.to_hex() + "\n").collect()
    }

    pub fn len(&self) -> usize {
        self.epcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epcs.is_empty()
    }

    pub fn epcs(&self) -> &[Bits] {
        &self.epcs
    }

    pub fn digest(&self, i: usize) -> &Bits {
        &self.digests[i]
    }

    pub fn position(&self, epc: &Bits) -> Option<usize> {
        self.index.get(epc).copied()
    }

    /// A population of provisioned tags, all present.
    pub fn population(&self) -> Result<Population> {
        crate::tash::provisioned_population(self.epcs.iter().cloned())
    }

    fn slices(&self, i: usize, dimension: u32, seeds: &[usize]) -> Result<Vec<u64>> {
        seeds
            .iter()
            .map(|&r| digest_slice(&self.digests[i], r, dimension))
            .collect()
    }
}

/// The k-seed OR table of every known EPC, computed locally.
pub fn build_intact_table(known: &KnownEpcs, dimension: u32, seeds: &[usize]) -> Result<TashTable> {
    let chain = TashChainSpec::uniform(TashOp::Or, seeds)?;
    chain.validate(dimension, DIGEST_BITS)?;
    let mut counts = vec![0u64; 1 << dimension];
    let mut hit: Vec<u64> = Vec::with_capacity(seeds.len());
    for i in 0..known.len() {
        hit.clear();
        hit.extend(known.slices(i, dimension, seeds)?);
        hit.sort_unstable();
        hit.dedup();
        for &v in &hit {
            counts[v as usize] += 1;
        }
    }
    let mut table = TashTable::from_counts(dimension, chain.clone(), counts)?;
    let overlaps = chain.overlapping_seeds(dimension);
    if !overlaps.is_empty() {
        table.warn(format!("overlapping seed slices: {overlaps:?}"));
    }
    Ok(table)
}

/// Entrywise intact minus instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub l: u32,
    pub entries: Vec<i64>,
}

impl ResidualTable {
    pub fn new(intact: &TashTable, instance: &TashTable) -> Result<Self> {
        if intact.dimension() != instance.dimension() {
            return Err(Error::InvalidParams("tables differ in dimension".into()));
        }
        let a = intact.counts()?;
        let b = instance.counts()?;
        let entries: Vec<i64> = a.iter().zip(&b).map(|(&x, &y)| x as i64 - y as i64).collect();
        if let Some((entry, &value)) = entries.iter().enumerate().find(|(_, v)| **v < 0) {
            return Err(Error::Integrity { entry, value });
        }
        Ok(ResidualTable {
            l: intact.dimension(),
            entries,
        })
    }

    pub fn nonzero(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0).count()
    }
}

/// Outcome of one detection round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Indices into the known-EPC list reported missing, ascending.
    pub missing: Vec<usize>,
    pub residual: ResidualTable,
    pub log: InventoryLog,
}

/// Reported set scored against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub truly_missing: usize,
    pub reported: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    /// Known tags that were in fact present.
    pub present_queried: usize,
    pub recall: f64,
    /// False positives per present known tag.
    pub fpr: f64,
    /// False positives per truly missing tag.
    pub fp_per_missing: f64,
}

impl DetectionReport {
    pub fn score(&self, known: &KnownEpcs, truly_missing: &[usize]) -> DetectionScore {
        let truth: std::collections::HashSet<usize> = truly_missing.iter().copied().collect();
        let tp = self.missing.iter().filter(|i| truth.contains(i)).count();
        let fp = self.missing.len() - tp;
        let present = known.len() - truth.len();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        DetectionScore {
            truly_missing: truth.len(),
            reported: self.missing.len(),
            true_positives: tp,
            false_positives: fp,
            present_queried: present,
            recall: if truth.is_empty() { 1.0 } else { ratio(tp, truth.len()) },
            fpr: ratio(fp, present),
            fp_per_missing: ratio(fp, truth.len()),
        }
    }
}

/// Builds the intact table locally and the instance table over the air with
/// one OR chain per entry, then reports every known tag whose `k` residual
/// entries are all non-zero.
pub fn detect_missing(
    known: &KnownEpcs,
    population: &mut Population,
    plan: &DetectionPlan,
    reader: &Reader,
) -> Result<DetectionReport> {
    let intact = build_intact_table(known, plan.l, &plan.seeds)?;
    let (instance, log) = tash_table(population, plan.l, &plan.chain(), reader)?;
    let residual = ResidualTable::new(&intact, &instance)?;
    let mut missing = Vec::new();
    for i in 0..known.len() {
        let slices = known.slices(i, plan.l, &plan.seeds)?;
        if slices.iter().all(|&v| residual.entries[v as usize] > 0) {
            missing.push(i);
        }
    }
    Ok(DetectionReport {
        missing,
        residual,
        log,
    })
}

/// Whether every pair of `seeds` is slice-disjoint at `dimension`.
pub fn seeds_disjoint(seeds: &[usize], dimension: u32) -> bool {
    seeds.iter().enumerate().all(|(a, &r1)| {
        seeds[a + 1..]
            .iter()
            .all(|&r2| seed_independence_check(r1, r2, dimension))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tash::{oracle_operator, provisioned_population};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn epcs(n: usize) -> Vec<Bits> {
        (0..n)
            .map(|i| Bits::from_hex(&format!("3008{:020X}", i + 1), None).unwrap())
            .collect()
    }

    #[test]
    fn dimension_zero_counts_everything() {
        let mut pop = provisioned_population(epcs(37)).unwrap();
        let (n, _) = estimate_cardinality(&mut pop, 0, 11, &Reader::default()).unwrap();
        assert_eq!(n, 37.0);
    }

    #[test]
    fn estimate_is_entry_zero_scaled() {
        let mut pop = provisioned_population(epcs(200)).unwrap();
        let oracle = oracle_operator(&pop, 3, &TashChainSpec::single(17)).unwrap();
        let (n, log) = estimate_cardinality(&mut pop, 3, 17, &Reader::default()).unwrap();
        assert_eq!(n, oracle.entry(0).unwrap() as f64 * 8.0);
        assert_eq!(log.responders_read, oracle.entry(0).unwrap());
    }

    #[test]
    fn zero_estimator_on_toy_bitmap() {
        let b = Bits::from_binary("01101110").unwrap();
        assert!((zero_estimator(&b).unwrap() - 7.846634024093809).abs() < 1e-9);
        assert_eq!(zero_estimator(&Bits::zeros(16)).unwrap(), 0.0);
        assert!(matches!(zero_estimator(&Bits::ones(4)), Err(Error::Saturated(4))));
    }

    #[test]
    fn disjoint_seed_placement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = random_disjoint_seeds(9, 7, 128, &mut rng).unwrap();
            assert!(seeds_disjoint(&s, 7));
            assert!(s.iter().all(|&r| r + 7 <= 128));
        }
        assert_eq!(random_disjoint_seeds(5, 7, 32, &mut rng), None);
        assert_eq!(random_disjoint_seeds(4, 8, 32, &mut rng), Some(vec![0, 8, 16, 24]));
    }

    #[test]
    fn plan_detection_sizes_and_warns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = plan_detection(10, 0.01, 128, &mut rng).unwrap();
        assert_eq!((p.l, p.table_size, p.k, p.seeds.len()), (7, 128, 9, 9));
        assert!(p.warnings.is_empty() && seeds_disjoint(&p.seeds, 7));
        let p = plan_detection(10, 0.01, 32, &mut rng).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.seeds, spaced_seeds(9, 7, 32));
        assert_eq!(p.seeds.first(), Some(&0));
        assert_eq!(p.seeds.last(), Some(&25));
    }

    #[test]
    fn intact_table_matches_or_oracle() {
        let known = KnownEpcs::new(epcs(50)).unwrap();
        let pop = known.population().unwrap();
        for seeds in [vec![3], vec![0, 40], vec![10, 60, 90], vec![5, 7]] {
            let intact = build_intact_table(&known, 4, &seeds).unwrap();
            let chain = TashChainSpec::uniform(TashOp::Or, &seeds).unwrap();
            let oracle = oracle_operator(&pop, 4, &chain).unwrap();
            assert_eq!(intact.counts().unwrap(), oracle.counts().unwrap());
            assert_eq!(intact.warnings().is_empty(), seeds != [5, 7]);
        }
    }

    #[test]
    fn detection_finds_every_missing_tag() {
        let known = KnownEpcs::new(epcs(120)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let plan = DetectionPlan::with_dimension(5, 6, 2, 128, &mut rng).unwrap();

        let mut pop = known.population().unwrap();
        let none = detect_missing(&known, &mut pop, &plan, &Reader::default()).unwrap();
        assert!(none.missing.is_empty());
        assert_eq!(none.residual.nonzero(), 0);

        let gone = [4usize, 17, 33, 80, 119];
        for &i in &gone {
            pop.set_present(i, false).unwrap();
        }
        let report = detect_missing(&known, &mut pop, &plan, &Reader::default()).unwrap();
        let score = report.score(&known, &gone);
        assert_eq!(score.recall, 1.0);
        assert!(report.residual.entries.iter().all(|&v| v >= 0));
        assert_eq!(score.present_queried, 115);
    }

    #[test]
    fn extra_tags_break_integrity() {
        let known = KnownEpcs::new(epcs(10)).unwrap();
        let mut pop = provisioned_population(epcs(12)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = DetectionPlan::with_dimension(1, 1, 1, 128, &mut rng).unwrap();
        let err = detect_missing(&known, &mut pop, &plan, &Reader::default()).err();
        assert!(matches!(err, Some(Error::Integrity { .. })));
    }

    #[test]
    fn known_epc_file_round_trip() {
        let db = KnownEpcs::new(epcs(3)).unwrap();
        let text = format!("# header\n{}\n", db.render());
        let back = KnownEpcs::parse(&text).unwrap();
        assert_eq!(back, db);
        assert_eq!(back.position(&epcs(3)[2]), Some(2));
        assert!(KnownEpcs::parse("300800000000000000000001\n300800000000000000000001\n").is_err());
    }
}
