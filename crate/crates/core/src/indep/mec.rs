use serde::{Deserialize, Serialize};

use crate::dag::{bits, Dag};
use crate::error::{Error, Result};

/// Identity of a Markov equivalence class: skeleton plus v-structures.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MecDescriptor {
    /// Unordered edges `(a, b)` with `a < b`, sorted.
    pub skeleton: Vec<(usize, usize)>,
    /// `(parent1, collider, parent2)` with `parent1 < parent2`, sorted.
    pub v_structures: Vec<(usize, usize, usize)>,
}

pub fn mec_descriptor(g: &Dag) -> MecDescriptor {
    let d = g.num_vars();
    let mut skeleton = Vec::new();
    for a in 0..d {
        for b in (a + 1)..d {
            if g.adjacent(a, b) {
                skeleton.push((a, b));
            }
        }
    }
    let mut v_structures = Vec::new();
    for c in 0..d {
        let parents: Vec<usize> = bits(g.parents_mask(c)).collect();
        for (i, &a) in parents.iter().enumerate() {
            for &b in &parents[i + 1..] {
                if !g.adjacent(a, b) {
                    v_structures.push((a, c, b));
                }
            }
        }
    }
    v_structures.sort_unstable();
    MecDescriptor {
        skeleton,
        v_structures,
    }
}

/// Same skeleton and same v-structures.
pub fn markov_equivalent(g1: &Dag, g2: &Dag) -> Result<bool> {
    if !g1.same_variables(g2) {
        return Err(Error::Input("graphs are over different variable sets".into()));
    }
    Ok(mec_descriptor(g1) == mec_descriptor(g2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_and_fork_share_a_class() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let fork = Dag::from_edges(3, &[(1, 0), (1, 2)]).unwrap();
        let collider = Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(mec_descriptor(&chain), mec_descriptor(&fork));
        assert_eq!(mec_descriptor(&chain).skeleton, vec![(0, 1), (1, 2)]);
        assert!(mec_descriptor(&chain).v_structures.is_empty());
        assert_eq!(mec_descriptor(&collider).v_structures, vec![(0, 1, 2)]);
        assert!(markov_equivalent(&chain, &fork).unwrap());
        assert!(!markov_equivalent(&chain, &collider).unwrap());
        assert!(markov_equivalent(&chain, &chain).unwrap());
        let empty = mec_descriptor(&Dag::empty(4));
        assert!(empty.skeleton.is_empty() && empty.v_structures.is_empty());
    }
}
