//! Synthetic binary traffic with planted informative features.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, FeatureSchema, LabelHierarchy};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Per-class record counts of the CIC-IoV2024 binary release, in fine class order
/// (BENIGN, DOS, GAS, RPM, SPEED, STEERING_WHEEL).
pub const CIC_IOV2024_CLASS_COUNTS: [u64; 6] = [1_048_575, 74_663, 9_991, 54_900, 24_951, 19_977];

pub fn cic_iov2024_mix() -> Vec<f64> {
    let total: u64 = CIC_IOV2024_CLASS_COUNTS.iter().sum();
    CIC_IOV2024_CLASS_COUNTS
        .iter()
        .map(|&c| c as f64 / total as f64)
        .collect()
}

/// Feature `feature` is 1 with probability `bias` for records of `class` and
/// with probability `1 - bias` otherwise. `bias = 1` makes it an exact
/// indicator of the class; `bias < 0.5` makes it anti-correlated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeature {
    pub feature: usize,
    pub class: usize,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_records: usize,
    pub n_features: usize,
    pub informative: Vec<PlantedFeature>,
    /// Fine class proportions; must sum to 1.
    pub class_mix: Vec<f64>,
}

/// Generate a binary dataset. Class counts follow the mix exactly
/// (largest-remainder rounding) and are shuffled; non-planted features are
/// i.i.d. Bernoulli(0.5).
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    let hierarchy = LabelHierarchy::iov();
    let n_classes = hierarchy.n_fine();
    if spec.n_records == 0 || spec.n_features == 0 {
        return Err(Error::InvalidConfig("synthetic data needs records and features".into()));
    }
    if spec.class_mix.len() != n_classes
        || spec.class_mix.iter().any(|&p| !(0.0..=1.0).contains(&p))
        || (spec.class_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidConfig(format!(
            "class mix must be {n_classes} probabilities summing to 1"
        )));
    }
    let mut planted: Vec<Option<PlantedFeature>> = vec![None; spec.n_features];
    for p in &spec.informative {
        if p.feature >= spec.n_features || p.class >= n_classes || !(0.0..=1.0).contains(&p.bias) {
            return Err(Error::InvalidConfig(format!("invalid planted feature {p:?}")));
        }
        if planted[p.feature].replace(*p).is_some() {
            return Err(Error::InvalidConfig(format!("feature {} planted twice", p.feature)));
        }
    }

    let mut labels = allocate(spec.n_records, &spec.class_mix);
    let mut rng = seed::rng(seed, "synth", &[]);
    labels.shuffle(&mut rng);

    let mut values = Vec::with_capacity(spec.n_records * spec.n_features);
    for &label in &labels {
        for p in &planted {
            let prob = match p {
                Some(p) if p.class == label => p.bias,
                Some(p) => 1.0 - p.bias,
                None => 0.5,
            };
            values.push(if rng.gen::<f64>() < prob { 1.0 } else { 0.0 });
        }
    }
    let names = (0..spec.n_features).map(|j| format!("F{j}")).collect();
    let schema = FeatureSchema::new(names, "label", FeatureKind::Binary)?;
    let features = Matrix::new(spec.n_records, spec.n_features, values)?;
    Dataset::new(schema, hierarchy, features, labels)
}

/// Largest-remainder apportionment of `n` records over `mix`, ties to the lower class.
fn allocate(n: usize, mix: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = mix.iter().map(|&p| p * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..mix.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[c] += 1;
        left -= 1;
    }
    counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat(c).take(k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Level;

    fn spec(n: usize, informative: Vec<PlantedFeature>) -> SynthSpec {
        SynthSpec {
            n_records: n,
            n_features: 8,
            informative,
            class_mix: cic_iov2024_mix(),
        }
    }

    #[test]
    fn class_counts_follow_mix() {
        let ds = synth_generate(&spec(1000, vec![]), 3).unwrap();
        let counts = ds.class_counts();
        for (c, &p) in cic_iov2024_mix().iter().enumerate() {
            let share = counts[c] as f64 / 1000.0;
            assert!((share - p).abs() <= 0.02, "class {c}: {share} vs {p}");
        }
        assert_eq!(counts.iter().sum::<usize>(), 1000);
    }

    #[test]
    fn bias_one_is_an_indicator() {
        let planted = vec![PlantedFeature {
            feature: 2,
            class: 3,
            bias: 1.0,
        }];
        let ds = synth_generate(&spec(2000, planted), 5).unwrap();
        for i in 0..ds.n_records() {
            assert_eq!(ds.record(i)[2] == 1.0, ds.labels()[i] == 3);
        }
    }

    #[test]
    fn deterministic() {
        let a = synth_generate(&spec(300, vec![]), 1).unwrap();
        assert_eq!(a, synth_generate(&spec(300, vec![]), 1).unwrap());
        assert_ne!(a, synth_generate(&spec(300, vec![]), 2).unwrap());
        assert_eq!(a.labels_at(Level::Root).len(), 300);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(10, vec![]);
        s.class_mix = vec![0.5, 0.5];
        assert!(synth_generate(&s, 0).is_err());
        let s = spec(
            10,
            vec![PlantedFeature {
                feature: 99,
                class: 0,
                bias: 1.0,
            }],
        );
        assert!(synth_generate(&s, 0).is_err());
    }
}
