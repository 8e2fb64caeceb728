use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GraphError;

/// Disjoint train/validation/test node sets covering every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Shuffles node ids with a generator seeded from `seed`, then hands
/// `1 - train_frac` of them to test and `1 - val_frac_of_train` of the
/// remainder to validation. Each set is returned sorted.
pub fn split_nodes(
    node_count: usize,
    train_frac: f64,
    val_frac_of_train: f64,
    seed: u64,
) -> Result<NodeSplits, GraphError> {
    let err = |reason: String| GraphError::Split {
        nodes: node_count,
        reason,
    };
    for (name, f) in [("train_frac", train_frac), ("val_frac_of_train", val_frac_of_train)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(err(format!("{name}={f} outside (0, 1)")));
        }
    }
    let test_count = (node_count as f64 * (1.0 - train_frac)).round() as usize;
    let remainder = node_count.saturating_sub(test_count);
    let val_count = (remainder as f64 * (1.0 - val_frac_of_train)).round() as usize;
    let train_count = remainder.saturating_sub(val_count);
    if test_count == 0 || val_count == 0 || train_count == 0 {
        return Err(err(format!(
            "sizes train={train_count} validation={val_count} test={test_count} leave a split empty"
        )));
    }

    let mut order: Vec<usize> = (0..node_count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..test_count].to_vec();
    let mut validation = order[test_count..test_count + val_count].to_vec();
    let mut train = order[test_count + val_count..].to_vec();
    test.sort_unstable();
    validation.sort_unstable();
    train.sort_unstable();
    Ok(NodeSplits {
        train,
        validation,
        test,
        seed,
    })
}
