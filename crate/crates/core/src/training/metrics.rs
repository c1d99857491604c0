use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Top-1 accuracy: fraction of positions where `preds` equals `labels`.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Config("accuracy of an empty prediction set".into()));
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(preds: &[usize], labels: &[usize], classes: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} predictions for {} labels",
                preds.len(),
                labels.len()
            )));
        }
        let mut counts = vec![0; classes * classes];
        for (&p, &l) in preds.iter().zip(labels) {
            if p >= classes || l >= classes {
                return Err(Error::Config(format!(
                    "class index {} outside 0..{classes}",
                    p.max(l)
                )));
            }
            counts[l * classes + p] += 1;
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.classes).map(|r| r.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// CSV with a header of class names and one row per true class.
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut s = String::from("true\\predicted");
        for c in 0..self.classes {
            let _ = write!(s, ",{}", class_names.get(c).map_or(c.to_string(), Clone::clone));
        }
        s.push('\n');
        for r in 0..self.classes {
            s.push_str(&class_names.get(r).map_or(r.to_string(), Clone::clone));
            for c in 0..self.classes {
                let _ = write!(s, ",{}", self.get(r, c));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basic_cases() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 2, 3], &[0, 1, 2, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn csv_layout() {
        let m = ConfusionMatrix::new(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(m.to_csv(&names), "true\\predicted,a,b\na,1,1\nb,0,1\n");
    }

    proptest! {
        #[test]
        fn consistent_with_confusion(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200)) {
            let (p, l): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let m = ConfusionMatrix::new(&p, &l, 5).unwrap();
            prop_assert_eq!(accuracy(&p, &l).unwrap(), m.accuracy());
            let mut per_class = vec![0u64; 5];
            l.iter().for_each(|&c| per_class[c] += 1);
            prop_assert_eq!(m.row_sums(), per_class);
        }

        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..50), seed in any::<u64>()) {
            let (p, l): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (p2, l2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            let a = accuracy(&p, &l).unwrap();
            prop_assert_eq!(a, accuracy(&p2, &l2).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
