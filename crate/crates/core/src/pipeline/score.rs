//! Matching clusters to ground-truth labels.

use nalgebra::DVector;

use super::{Dataset, FittedModel};
use crate::error::{Error, Result};

/// Hard cluster assignment (1-based; ties go to the lowest index).
pub fn assign(model: &FittedModel, x: &DVector<f64>) -> Result<usize> {
    Ok(model.classify(x)?.imax() + 1)
}

fn argmax_count(counts: &[usize]) -> usize {
    // first maximum wins
    counts
        .iter()
        .enumerate()
        .fold((0, 0), |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) })
        .0
}

/// Correspondence between clusters and labels learned on training data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterLabeling {
    /// `labels[c]` is the label predicted for cluster `c + 1`; several
    /// clusters may share a label.
    PerCluster { labels: Vec<usize> },
    /// `clusters[l]` is the cluster that represents label `l + 1`; one
    /// cluster may represent several labels.
    PerLabel { clusters: Vec<usize> },
}

impl ClusterLabeling {
    /// With `multi_label_clusters` false each cluster takes its most common
    /// training label (clusters with no training points take the overall
    /// most common label). With it true each label is represented by the
    /// cluster its training points fall in most often.
    pub fn fit(model: &FittedModel, train: &Dataset, multi_label_clusters: bool) -> Result<Self> {
        let labels = train
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("classification scoring needs labels".into()))?;
        let k = model.num_components();
        let num_labels = train.num_labels();
        let mut counts = vec![vec![0usize; num_labels]; k];
        for (x, &l) in train.points.iter().zip(labels) {
            counts[assign(model, x)? - 1][l - 1] += 1;
        }
        if multi_label_clusters {
            let clusters = (0..num_labels)
                .map(|l| argmax_count(&counts.iter().map(|row| row[l]).collect::<Vec<_>>()) + 1)
                .collect();
            Ok(ClusterLabeling::PerLabel { clusters })
        } else {
            let totals: Vec<usize> = (0..num_labels).map(|l| counts.iter().map(|row| row[l]).sum()).collect();
            let fallback = argmax_count(&totals) + 1;
            let labels = counts
                .iter()
                .map(|row| if row.iter().all(|&c| c == 0) { fallback } else { argmax_count(row) + 1 })
                .collect();
            Ok(ClusterLabeling::PerCluster { labels })
        }
    }

    fn is_correct(&self, cluster: usize, label: usize) -> bool {
        match self {
            ClusterLabeling::PerCluster { labels } => labels[cluster - 1] == label,
            ClusterLabeling::PerLabel { clusters } => clusters.get(label - 1) == Some(&cluster),
        }
    }

    /// Fraction of `test` points whose assigned cluster matches their label.
    pub fn accuracy(&self, model: &FittedModel, test: &Dataset) -> Result<f64> {
        let labels = test
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("classification scoring needs labels".into()))?;
        let mut correct = 0usize;
        for (x, &l) in test.points.iter().zip(labels) {
            correct += self.is_correct(assign(model, x)?, l) as usize;
        }
        Ok(correct as f64 / test.len() as f64)
    }
}

/// Learns the cluster/label correspondence on `train` and returns the
/// classification accuracy on `test`.
pub fn score_classification(model: &FittedModel, train: &Dataset, test: &Dataset, multi_label_clusters: bool) -> Result<f64> {
    ClusterLabeling::fit(model, train, multi_label_clusters)?.accuracy(model, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synth::{default_synthetic_spec, gen_synthetic};
    use crate::pipeline::Method;

    fn truth_model() -> FittedModel {
        FittedModel::from_hmog(Method::HmogFa, default_synthetic_spec(2, 1, 2).unwrap()).unwrap()
    }

    #[test]
    fn separated_clusters_are_recovered() {
        let spec = default_synthetic_spec(2, 1, 2).unwrap();
        let train = gen_synthetic(&spec, 400, 1).unwrap();
        let test = gen_synthetic(&spec, 400, 2).unwrap();
        let model = truth_model();
        for multi in [false, true] {
            let acc = score_classification(&model, &train, &test, multi).unwrap();
            assert!(acc > 0.95, "{acc}");
        }
    }

    #[test]
    fn label_permutation_does_not_change_the_score() {
        let spec = default_synthetic_spec(2, 1, 2).unwrap();
        let train = gen_synthetic(&spec, 300, 3).unwrap();
        let test = gen_synthetic(&spec, 300, 4).unwrap();
        let swap = |d: &Dataset| {
            let mut d = d.clone();
            d.labels = d.labels.map(|l| l.into_iter().map(|v| 3 - v).collect());
            d
        };
        let model = truth_model();
        for multi in [false, true] {
            let a = score_classification(&model, &train, &test, multi).unwrap();
            let b = score_classification(&model, &swap(&train), &swap(&test), multi).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_cluster_scores_majority_frequency() {
        let spec = default_synthetic_spec(2, 1, 1).unwrap();
        let model = FittedModel::from_hmog(Method::HmogFa, spec.clone()).unwrap();
        let points = gen_synthetic(&spec, 10, 1).unwrap().points;
        let labels = vec![1, 2, 2, 3, 2, 1, 2, 3, 2, 1];
        let data = Dataset::new(points).unwrap().with_labels(labels).unwrap();
        let acc = score_classification(&model, &data, &data, false).unwrap();
        assert!((acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_labels_are_an_error() {
        let spec = default_synthetic_spec(2, 1, 2).unwrap();
        let mut data = gen_synthetic(&spec, 10, 1).unwrap();
        data.labels = None;
        assert!(score_classification(&truth_model(), &data, &data, false).is_err());
    }
}
