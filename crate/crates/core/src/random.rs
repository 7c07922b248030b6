//! Seeded random frameworks for property checks.

use rand::Rng;

use crate::qbaf::{Argument, ArgumentId, Polarity, Qbaf, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeShape {
    /// Longest root-to-leaf path length.
    pub max_depth: usize,
    /// Upper bound on the children of any argument.
    pub max_children: usize,
    /// Upper bound on the total number of arguments.
    pub max_nodes: usize,
}

impl Default for TreeShape {
    fn default() -> Self {
        Self {
            max_depth: 4,
            max_children: 3,
            max_nodes: usize::MAX,
        }
    }
}

/// Draws a random valid tree. The root always has at least one child.
///
/// Base scores are uniform in `[0, 1)`, polarities are fair coin flips, and
/// ids are `n0`, `n1`, ... in breadth-first order.
pub fn random_qbaf<R: Rng + ?Sized>(rng: &mut R, shape: TreeShape) -> Qbaf {
    let mut arguments = vec![Argument {
        id: ArgumentId::new("n0"),
        text: "claim".to_owned(),
        base_score: rng.random::<f64>(),
    }];
    let mut relations = Vec::new();
    let mut frontier = vec![(0usize, 0usize)];
    while let Some((parent, depth)) = frontier.first().copied() {
        frontier.remove(0);
        if depth >= shape.max_depth {
            continue;
        }
        let lower = usize::from(parent == 0 && shape.max_children > 0);
        let count = rng.random_range(lower..=shape.max_children);
        for _ in 0..count {
            if arguments.len() >= shape.max_nodes {
                break;
            }
            let idx = arguments.len();
            let id = ArgumentId::new(format!("n{idx}"));
            let polarity = if rng.random::<bool>() {
                Polarity::Support
            } else {
                Polarity::Attack
            };
            arguments.push(Argument {
                id: id.clone(),
                text: format!("argument {idx}"),
                base_score: rng.random::<f64>(),
            });
            relations.push(Relation::new(id, arguments[parent].id.clone(), polarity));
            frontier.push((idx, depth + 1));
        }
    }
    Qbaf::from_parts(ArgumentId::new("n0"), arguments, relations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_trees_are_valid_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let q = random_qbaf(
                &mut rng,
                TreeShape {
                    max_depth: 4,
                    max_children: 3,
                    max_nodes: 15,
                },
            );
            assert_eq!(q.validate(), Ok(()));
            assert!(q.len() >= 2 && q.len() <= 15);
            assert!(q.depths().values().all(|d| *d <= 4));
        }
    }

    #[test]
    fn same_seed_same_tree() {
        let a = random_qbaf(&mut ChaCha8Rng::seed_from_u64(9), TreeShape::default());
        let b = random_qbaf(&mut ChaCha8Rng::seed_from_u64(9), TreeShape::default());
        assert_eq!(a, b);
    }
}
