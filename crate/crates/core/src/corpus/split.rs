use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Example};

/// Disjoint dev/test partition of a corpus, keyed by example id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub dev_fraction: f64,
    pub seed: u64,
    pub dev_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
}

impl Split {
    pub fn dev<'a>(&self, corpus: &'a [Example]) -> Vec<&'a Example> {
        corpus.iter().filter(|e| self.dev_ids.contains(&e.id)).collect()
    }

    pub fn test<'a>(&self, corpus: &'a [Example]) -> Vec<&'a Example> {
        corpus.iter().filter(|e| self.test_ids.contains(&e.id)).collect()
    }
}

/// Seeded dev/test split that never separates members of a pair group.
///
/// Units (pair groups, or single examples) are ordered by key, shuffled with
/// the seed, and packed into dev until the target size `round(fraction * n)`
/// is met as closely as whole units allow.
pub fn make_split(corpus: &[Example], dev_fraction: f64, seed: u64) -> Result<Split, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(dev_fraction));
    }

    let mut units: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for ex in corpus {
        let key = match &ex.pair_group {
            Some(group) => format!("g\u{1f}{}\u{1f}{group}", ex.dataset_id),
            None => format!("i\u{1f}{}", ex.id),
        };
        units.entry(key).or_default().push(ex.id.as_str());
    }
    let mut units: Vec<Vec<&str>> = units.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    units.shuffle(&mut rng);

    let n = corpus.len();
    let target = ((dev_fraction * n as f64).round() as usize).clamp(1, n);

    let mut in_dev = vec![false; units.len()];
    let mut dev_count = 0usize;
    for (i, unit) in units.iter().enumerate() {
        if dev_count == target {
            break;
        }
        if dev_count + unit.len() <= target {
            in_dev[i] = true;
            dev_count += unit.len();
        }
    }
    if dev_count < target {
        // No exact fit left; take the first remaining unit if it gets closer.
        if let Some(i) = (0..units.len()).find(|&i| !in_dev[i]) {
            let over = dev_count + units[i].len() - target;
            if over < target - dev_count {
                in_dev[i] = true;
            }
        }
    }

    let mut dev_ids = BTreeSet::new();
    let mut test_ids = BTreeSet::new();
    for (unit, dev) in units.iter().zip(in_dev) {
        let side = if dev { &mut dev_ids } else { &mut test_ids };
        side.extend(unit.iter().map(|s| s.to_string()));
    }
    Ok(Split {
        dev_fraction,
        seed,
        dev_ids,
        test_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetId, Polarity, Task};

    fn unpaired(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| {
                let mut e = Example::new(format!("x{i}"), DatasetId::Gap, Task::Coref);
                e.gold = Some("a".into());
                e.candidate_entities = Some(vec!["a".into(), "b".into()]);
                e
            })
            .collect()
    }

    fn paired(pairs: usize) -> Vec<Example> {
        let mut out = Vec::new();
        for p in 0..pairs {
            for (suffix, pol) in [("s", Polarity::Stereo), ("a", Polarity::AntiStereo)] {
                let mut e = Example::new(format!("p{p}{suffix}"), DatasetId::Winobias, Task::Coref);
                e.polarity = pol;
                e.pair_group = Some(format!("p{p}"));
                out.push(e);
            }
        }
        out
    }

    #[test]
    fn ten_unpaired_at_twenty_percent() {
        let corpus = unpaired(10);
        let split = make_split(&corpus, 0.2, 7).unwrap();
        assert_eq!(split.dev_ids.len(), 2);
        assert_eq!(split.test_ids.len(), 8);
        assert_eq!(split, make_split(&corpus, 0.2, 7).unwrap());
    }

    #[test]
    fn pairs_stay_whole() {
        let corpus = paired(2);
        let split = make_split(&corpus, 0.5, 3).unwrap();
        assert_eq!(split.dev_ids.len(), 2);
        for p in 0..2 {
            let s = format!("p{p}s");
            let a = format!("p{p}a");
            assert_eq!(split.dev_ids.contains(&s), split.dev_ids.contains(&a));
        }
    }

    #[test]
    fn hundred_examples_rerun_equality() {
        let corpus = unpaired(100);
        let a = make_split(&corpus, 0.2, 11).unwrap();
        let b = make_split(&corpus, 0.2, 11).unwrap();
        assert_eq!(a.dev_ids, b.dev_ids);
        assert_eq!(a.test_ids, b.test_ids);
        assert_eq!(a.dev_ids.len(), 20);
        let c = make_split(&corpus, 0.2, 12).unwrap();
        assert_ne!(a.dev_ids, c.dev_ids);
    }

    #[test]
    fn empty_corpus_and_bad_fraction() {
        assert!(matches!(make_split(&[], 0.2, 1), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(
            make_split(&unpaired(3), 1.0, 1),
            Err(CorpusError::InvalidFraction(_))
        ));
    }
}
