use crate::dag::{bit, bits, Dag};
use crate::error::{Error, Result};

/// d-separation of `x` and `y` given `cond`.
///
/// Decided by connectivity in the moralized ancestral graph of
/// `{x, y} ∪ cond` with the conditioning set removed.
pub fn d_separated(g: &Dag, x: usize, y: usize, cond: &[usize]) -> Result<bool> {
    let d = g.num_vars();
    if x >= d || y >= d || cond.iter().any(|&c| c >= d) {
        return Err(Error::Input(format!("variable index out of range for {d} variables")));
    }
    if x == y {
        return Err(Error::Input("d-separation query needs two distinct variables".into()));
    }
    let z = cond.iter().fold(0u64, |m, &c| m | bit(c));
    if z & (bit(x) | bit(y)) != 0 {
        return Err(Error::Input("queried variables may not appear in the conditioning set".into()));
    }
    Ok(d_separated_mask(g, x, y, z))
}

pub(crate) fn d_separated_mask(g: &Dag, x: usize, y: usize, z: u64) -> bool {
    let seeds = bit(x) | bit(y) | z;
    let mut ancestral = seeds;
    for v in bits(seeds) {
        ancestral |= g.ancestors_mask(v);
    }
    let mut visited = bit(x);
    let mut frontier = bit(x);
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let mut nbrs = g.children_mask(v) | g.parents_mask(v);
        // co-parents married through a common child inside the ancestral set
        for c in bits(g.children_mask(v) & ancestral) {
            nbrs |= g.parents_mask(c);
        }
        nbrs &= ancestral & !z & !visited & !bit(v);
        if nbrs & bit(y) != 0 {
            return false;
        }
        visited |= nbrs;
        frontier |= nbrs;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_and_collider() {
        // A -> C -> B
        let chain = Dag::from_edges(3, &[(0, 2), (2, 1)]).unwrap();
        assert!(d_separated(&chain, 0, 1, &[2]).unwrap());
        assert!(!d_separated(&chain, 0, 1, &[]).unwrap());
        // A -> C <- B
        let collider = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        assert!(d_separated(&collider, 0, 1, &[]).unwrap());
        assert!(!d_separated(&collider, 0, 1, &[2]).unwrap());
    }

    #[test]
    fn conditioning_on_collider_descendant_opens_path() {
        // A -> C <- B, C -> D
        let g = Dag::from_edges(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        assert!(!d_separated(&g, 0, 1, &[3]).unwrap());
    }

    #[test]
    fn invalid_queries() {
        let g = Dag::empty(3);
        assert!(d_separated(&g, 0, 0, &[]).is_err());
        assert!(d_separated(&g, 0, 1, &[1]).is_err());
        assert!(d_separated(&g, 0, 5, &[]).is_err());
    }
}
