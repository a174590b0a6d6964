//! Plugging a hand-written classifier into the consensus rules.
//!
//! Anything implementing `Expert` can vote: it returns a probability
//! distribution over classes and an embedding used for neighbour search.

use deem::dataset::{generate_synthetic, partition_by_date, SyntheticConfig};
use deem::experts::{train_expert, Expert, ExpertFamily, ExpertSpec, ProbabilityDistribution, TrainedExpert};
use deem::pseudolabel::assign_pseudo_labels;
use deem::Result;

/// Predicts from the sign pattern of the first two features.
struct Quadrant;

impl Expert for Quadrant {
    fn num_classes(&self) -> usize {
        7
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbabilityDistribution> {
        let class = usize::from(features[0] > 0.0) + 2 * usize::from(features[1] > 0.0);
        let mut probs = vec![0.05; 7];
        probs[class] = 0.7;
        ProbabilityDistribution::new(probs)
    }

    fn embed(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(features[..2].to_vec())
    }
}

/// Lets a trained expert and the hand-written one share a slice.
enum Voter {
    Trained(TrainedExpert),
    Custom(Quadrant),
}

impl Expert for Voter {
    fn num_classes(&self) -> usize {
        match self {
            Voter::Trained(e) => e.num_classes(),
            Voter::Custom(e) => e.num_classes(),
        }
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbabilityDistribution> {
        match self {
            Voter::Trained(e) => e.predict_proba(features),
            Voter::Custom(e) => e.predict_proba(features),
        }
    }

    fn embed(&self, features: &[f64]) -> Result<Vec<f64>> {
        match self {
            Voter::Trained(e) => e.embed(features),
            Voter::Custom(e) => e.embed(features),
        }
    }
}

fn main() -> Result<()> {
    let data = generate_synthetic(&SyntheticConfig::default())?;
    let group = partition_by_date(&data.dataset)?.remove(0);
    let experts = vec![
        Voter::Trained(train_expert(&ExpertSpec::new(ExpertFamily::NearestCentroid, 0), &group.train, 7)?),
        Voter::Trained(train_expert(&ExpertSpec::new(ExpertFamily::Knn, 1).with_param("k", 5.0), &group.train, 7)?),
        Voter::Custom(Quadrant),
    ];
    let round = assign_pseudo_labels(&experts, &group.test, &group.train, 10)?;
    println!(
        "with a deliberately weak third voter: case 1 {}, case 2 {}, abstained {}",
        round.batch.case1.len(),
        round.batch.case2.len(),
        round.batch.abstained.len()
    );
    Ok(())
}
