//! Finitely generated abelian groups in invariant-factor form, and the
//! closed-form critical groups of layered multipartite graphs.
//!
//! A group is stored as `Z^free_rank (+) Z/d1 (+) ... (+) Z/dr` with
//! `1 < d1 | d2 | ... | dr`. [`canonicalize_cyclic`] turns an arbitrary list
//! of cyclic orders into that shape by repeated pairwise gcd/lcm exchanges,
//! which preserve the isomorphism class (Z/a + Z/b = Z/gcd + Z/lcm).

use crate::graph::{Graph, LayeredSpec};
use crate::snf;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Pow, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("group has free rank {0}, so its order is infinite")]
    InfiniteOrder(usize),
    #[error("closed form is only available for 2 to 6 parts, got {0}")]
    UnsupportedPartCount(usize),
    #[error("part {index} has size {size}; closed form needs every part size >= 2")]
    PartTooSmall { index: usize, size: u64 },
    #[error("expected a spec with {want} parts, got {got}")]
    WrongPartCount { want: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbelianGroup {
    free_rank: usize,
    torsion: Vec<BigInt>,
}

impl AbelianGroup {
    pub fn trivial() -> Self {
        Self {
            free_rank: 0,
            torsion: Vec::new(),
        }
    }

    /// Builds the group `Z^free_rank (+) sum of Z/o` over the given orders,
    /// normalizing the torsion part to an invariant-factor chain.
    pub fn new(free_rank: usize, orders: impl IntoIterator<Item = BigInt>) -> Self {
        Self {
            free_rank,
            torsion: invariant_chain(orders.into_iter().collect()),
        }
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    /// Invariant factors, each > 1, each dividing the next.
    pub fn torsion(&self) -> &[BigInt] {
        &self.torsion
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    /// Number of elements. Errors when the free rank is positive.
    pub fn order(&self) -> Result<BigInt, GroupError> {
        if self.free_rank > 0 {
            return Err(GroupError::InfiniteOrder(self.free_rank));
        }
        Ok(self.torsion.iter().product())
    }

    /// Direct sum, renormalized.
    pub fn plus(&self, other: &AbelianGroup) -> AbelianGroup {
        AbelianGroup::new(
            self.free_rank + other.free_rank,
            self.torsion
                .iter()
                .chain(other.torsion.iter())
                .cloned()
                .collect::<Vec<_>>(),
        )
    }

    /// Torsion subgroup (the critical group, when `self` is a Laplacian
    /// cokernel).
    pub fn torsion_part(&self) -> AbelianGroup {
        AbelianGroup {
            free_rank: 0,
            torsion: self.torsion.clone(),
        }
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for d in &self.torsion {
            parts.push(format!("Z/{d}"));
        }
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

impl Serialize for AbelianGroup {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        // Factors as decimal strings: JSON numbers cannot hold arbitrary
        // precision.
        let mut s = serializer.serialize_struct("AbelianGroup", 2)?;
        s.serialize_field("free_rank", &self.free_rank)?;
        let factors: Vec<String> = self.torsion.iter().map(BigInt::to_string).collect();
        s.serialize_field("invariant_factors", &factors)?;
        s.end()
    }
}

/// Canonical decomposition of a finite direct sum of cyclic groups.
/// Orders must be >= 1; ones contribute nothing.
pub fn canonicalize_cyclic(orders: &[BigInt]) -> AbelianGroup {
    AbelianGroup::new(0, orders.to_vec())
}

/// Critical group of a connected graph: the torsion of the Laplacian
/// cokernel. The cokernel of a connected graph's Laplacian is Z plus this
/// finite group, whose order is the number of spanning trees.
pub fn critical_group(g: &Graph) -> AbelianGroup {
    snf::cokernel(&g.laplacian()).torsion_part()
}

/// See [`AbelianGroup::order`].
pub fn group_order(g: &AbelianGroup) -> Result<BigInt, GroupError> {
    g.order()
}

fn invariant_chain(orders: Vec<BigInt>) -> Vec<BigInt> {
    let mut v: Vec<BigInt> = orders
        .into_iter()
        .map(|o| o.abs())
        .filter(|o| !o.is_one() && !o.is_zero())
        .collect();
    loop {
        v.sort();
        let mut changed = false;
        for i in 0..v.len().saturating_sub(1) {
            if !(&v[i + 1] % &v[i]).is_zero() {
                let g = v[i].gcd(&v[i + 1]);
                let l = v[i].lcm(&v[i + 1]);
                v[i] = g;
                v[i + 1] = l;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    v.retain(|x| !x.is_one());
    v
}

fn big(n: u64) -> BigInt {
    BigInt::from(n)
}

/// gcd of a list of positive values.
fn gcd_all(xs: &[BigInt]) -> BigInt {
    xs.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x))
}

fn require_parts(spec: &LayeredSpec, want: usize) -> Result<(), GroupError> {
    if spec.k() != want {
        return Err(GroupError::WrongPartCount {
            want,
            got: spec.k(),
        });
    }
    Ok(())
}

fn require_min_two(spec: &LayeredSpec) -> Result<(), GroupError> {
    for (index, &size) in spec.parts().iter().enumerate() {
        if size < 2 {
            return Err(GroupError::PartTooSmall { index, size });
        }
    }
    Ok(())
}

/// The two gcd invariants entering the 5-layer closed form.
///
/// The first is the gcd of the entries of the residual 3x3 block left after
/// the staged reduction; the second is the gcd of its 2x2 minors.
pub fn sigma_pair_k5(spec: &LayeredSpec) -> Result<(BigInt, BigInt), GroupError> {
    require_parts(spec, 5)?;
    let p = spec.parts();
    let (n2, n3, n4) = (big(p[1]), big(p[2]), big(p[3]));
    let mid = &n2 + &n4;
    let s1 = gcd_all(&[n2.clone(), n4.clone(), mid.clone(), &n2 * &n3]);
    let s2 = gcd_all(&[
        &n2 * &n2,
        &n2 * &n4,
        &n2 * &n3 * &n4,
        &n2 * &mid,
        &n4 * &mid,
        &n2 * &n3 * &mid,
    ]);
    Ok((s1, s2))
}

/// The analogous pair for six layers.
pub fn sigma_pair_k6(spec: &LayeredSpec) -> Result<(BigInt, BigInt), GroupError> {
    require_parts(spec, 6)?;
    let p = spec.parts();
    let (n2, n3, n4, n5) = (big(p[1]), big(p[2]), big(p[3]), big(p[4]));
    let a = &n2 + &n4;
    let b = &n3 + &n5;
    let s1 = gcd_all(&[&n2 * &n3, &n2 * &n5, &n3 * &a, &n5 * &a, &n2 * &b, &n4 * &b]);
    let s2 = gcd_all(&[
        &n2 * &n3 * &n3 * &a,
        &n2 * &n3 * &n5 * &a,
        &n2 * &n3 * &a * &b,
        &n2 * &n2 * &n5 * &b,
        &n5 * &a * &a * &b,
    ]);
    Ok((s1, s2))
}

/// Spanning-tree count of the layered graph:
/// `prod_i N_i^(n_i - 1) * prod of interior part sizes`,
/// where `N_i` is the common degree in part i.
pub fn spanning_trees_formula(spec: &LayeredSpec) -> BigInt {
    let mut out = BigInt::one();
    for i in 0..spec.k() {
        let n = spec.parts()[i];
        out *= big(spec.degree_constant(i)).pow(u32::try_from(n - 1).expect("part size fits u32"));
    }
    for i in 1..spec.k() - 1 {
        out *= big(spec.parts()[i]);
    }
    out
}

/// Critical group of the layered graph, by the closed-form decompositions.
/// Supports 2 to 6 parts, every part of size >= 2.
///
/// Three layers reduce to the two-layer case: parts 1 and 3 have identical
/// neighborhoods, so the graph is complete bipartite on (n1+n3, n2).
pub fn closed_form(spec: &LayeredSpec) -> Result<AbelianGroup, GroupError> {
    let k = spec.k();
    if !(2..=6).contains(&k) {
        return Err(GroupError::UnsupportedPartCount(k));
    }
    require_min_two(spec)?;
    if k == 3 {
        let p = spec.parts();
        let merged = LayeredSpec::new(vec![p[0] + p[2], p[1]]).expect("merged spec is valid");
        return closed_form(&merged);
    }

    // Every part contributes its repeated degree N_i with multiplicity
    // n_i - 2; the remaining factors come from the 2k x 2k core.
    let mut orders: Vec<BigInt> = Vec::new();
    for i in 0..k {
        let reps = spec.parts()[i] - 2;
        for _ in 0..reps {
            orders.push(big(spec.degree_constant(i)));
        }
    }

    let p = spec.parts();
    match k {
        2 => {
            orders.push(big(p[0]) * big(p[1]));
        }
        4 => {
            let (n1, n2, n3, n4) = (big(p[0]), big(p[1]), big(p[2]), big(p[3]));
            orders.push(&n2 * &n3);
            orders.push(&n2 * (&n1 + &n3));
            orders.push(&n3 * (&n2 + &n4));
        }
        5 => {
            let (n1, n2, n3, n4, n5) = (big(p[0]), big(p[1]), big(p[2]), big(p[3]), big(p[4]));
            let (s1, s2) = sigma_pair_k5(spec)?;
            let numerator = &n2 * &n3 * &n4 * (&n2 + &n4);
            debug_assert!((&s2 % &s1).is_zero() && (&numerator % &s2).is_zero());
            orders.push(&n2 * (&n1 + &n3));
            orders.push(&n4 * (&n3 + &n5));
            orders.push(s1.clone());
            orders.push(&s2 / &s1);
            orders.push(&numerator / &s2);
        }
        6 => {
            let (n1, n2, n3, n4, n5, n6) = (
                big(p[0]),
                big(p[1]),
                big(p[2]),
                big(p[3]),
                big(p[4]),
                big(p[5]),
            );
            let (s1, s2) = sigma_pair_k6(spec)?;
            let numerator = &n2 * &n3 * &n4 * &n5 * (&n2 + &n4) * (&n3 + &n5);
            debug_assert!((&s2 % &s1).is_zero() && (&numerator % &s2).is_zero());
            orders.push(&n2 * (&n1 + &n3));
            orders.push(&n5 * (&n4 + &n6));
            orders.push(s1.clone());
            orders.push(&s2 / &s1);
            orders.push(&numerator / &s2);
        }
        _ => unreachable!("k constrained above"),
    }
    Ok(AbelianGroup::new(0, orders))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bigs(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn spec(parts: &[u64]) -> LayeredSpec {
        LayeredSpec::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn canonicalize_merges_coprime_orders() {
        // Z/4 + Z/6 = Z/2 + Z/12
        let g = canonicalize_cyclic(&bigs(&[4, 6]));
        assert_eq!(g.torsion(), bigs(&[2, 12]).as_slice());
        // Z/2 + Z/3 = Z/6
        let g = canonicalize_cyclic(&bigs(&[2, 3]));
        assert_eq!(g.torsion(), bigs(&[6]).as_slice());
        // ones vanish
        let g = canonicalize_cyclic(&bigs(&[1, 1, 5]));
        assert_eq!(g.torsion(), bigs(&[5]).as_slice());
        // already canonical stays put
        let g = canonicalize_cyclic(&bigs(&[2, 4, 8]));
        assert_eq!(g.torsion(), bigs(&[2, 4, 8]).as_slice());
    }

    #[test]
    fn canonicalize_is_idempotent_and_order_preserving() {
        let inputs = vec![
            bigs(&[6, 10, 15]),
            bigs(&[2, 2, 2, 9]),
            bigs(&[12, 18, 30, 7]),
        ];
        for orders in inputs {
            let g = canonicalize_cyclic(&orders);
            let again = canonicalize_cyclic(g.torsion());
            assert_eq!(g, again);
            let want: BigInt = orders.iter().product();
            assert_eq!(g.order().unwrap(), want);
            for w in g.torsion().windows(2) {
                assert!((&w[1] % &w[0]).is_zero(), "chain broken: {:?}", g.torsion());
            }
        }
    }

    #[test]
    fn order_of_free_group_is_an_error() {
        let g = AbelianGroup::new(1, bigs(&[4]));
        assert_eq!(g.order(), Err(GroupError::InfiniteOrder(1)));
        assert_eq!(AbelianGroup::trivial().order().unwrap(), BigInt::one());
    }

    #[test]
    fn display_forms() {
        assert_eq!(AbelianGroup::trivial().to_string(), "0");
        assert_eq!(
            AbelianGroup::new(1, bigs(&[2, 6])).to_string(),
            "Z ⊕ Z/2 ⊕ Z/6"
        );
        assert_eq!(AbelianGroup::new(2, vec![]).to_string(), "Z^2");
    }

    #[test]
    fn json_shape() {
        let g = AbelianGroup::new(0, bigs(&[2, 6]));
        let js = serde_json::to_string(&g).unwrap();
        assert_eq!(js, r#"{"free_rank":0,"invariant_factors":["2","6"]}"#);
    }

    #[test]
    fn two_layer_closed_forms() {
        // complete bipartite 2,2 is the 4-cycle: Z/4
        let g = closed_form(&spec(&[2, 2])).unwrap();
        assert_eq!(g.torsion(), bigs(&[4]).as_slice());
        // 2,3: Z/2 + Z/6
        let g = closed_form(&spec(&[2, 3])).unwrap();
        assert_eq!(g.torsion(), bigs(&[2, 6]).as_slice());
    }

    #[test]
    fn three_layers_reroute_to_bipartite() {
        let g = closed_form(&spec(&[2, 3, 2])).unwrap();
        let h = closed_form(&spec(&[4, 3])).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn four_layer_example() {
        let g = closed_form(&spec(&[2, 2, 2, 2])).unwrap();
        assert_eq!(g.torsion(), bigs(&[4, 8, 8]).as_slice());
        assert_eq!(g.order().unwrap(), BigInt::from(256));
    }

    #[test]
    fn five_layer_example_and_sigmas() {
        assert_eq!(
            sigma_pair_k5(&spec(&[2, 2, 2, 2, 2])).unwrap(),
            (BigInt::from(2), BigInt::from(4))
        );
        assert_eq!(
            sigma_pair_k5(&spec(&[2, 3, 5, 7, 2])).unwrap().0,
            BigInt::one()
        );
        assert_eq!(
            sigma_pair_k5(&spec(&[2, 4, 4, 4, 2])).unwrap().0,
            BigInt::from(4)
        );
        let g = closed_form(&spec(&[2, 2, 2, 2, 2])).unwrap();
        assert_eq!(g.order().unwrap(), BigInt::from(2048));
        assert_eq!(g, AbelianGroup::new(0, bigs(&[8, 8, 2, 2, 8])),);
    }

    #[test]
    fn six_layer_example() {
        let (s1, s2) = sigma_pair_k6(&spec(&[2, 2, 2, 2, 2, 2])).unwrap();
        assert_eq!((s1, s2), (BigInt::from(4), BigInt::from(32)));
        let g = closed_form(&spec(&[2, 2, 2, 2, 2, 2])).unwrap();
        assert_eq!(g.order().unwrap(), BigInt::from(16384));
    }

    #[test]
    fn closed_form_rejections() {
        assert_eq!(
            closed_form(&spec(&[3, 1, 3])),
            Err(GroupError::PartTooSmall { index: 1, size: 1 })
        );
        let seven = spec(&[2, 2, 2, 2, 2, 2, 2]);
        assert_eq!(
            closed_form(&seven),
            Err(GroupError::UnsupportedPartCount(7))
        );
    }

    #[test]
    fn critical_group_of_small_graphs() {
        use crate::graph::{layered_kpartite, standard_family, StandardFamily};
        let g = critical_group(&layered_kpartite(&spec(&[2, 2])));
        assert_eq!(g, AbelianGroup::new(0, bigs(&[4])));
        let g = critical_group(&standard_family(&StandardFamily::Complete(4)).unwrap());
        // complete graph on 4 vertices: 16 spanning trees
        assert_eq!(g.order().unwrap(), BigInt::from(16));
        assert_eq!(g.free_rank(), 0);
    }

    #[test]
    fn tree_formula_values() {
        assert_eq!(spanning_trees_formula(&spec(&[3, 3])), BigInt::from(81));
        assert_eq!(spanning_trees_formula(&spec(&[2, 2])), BigInt::from(4));
        // interior sizes multiply in once
        assert_eq!(
            spanning_trees_formula(&spec(&[2, 2, 2, 2, 2])),
            BigInt::from(2048)
        );
    }

    #[test]
    fn sigma_divisibility_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51611);
        for _ in 0..200 {
            let s5 = spec(&[
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
            ]);
            let (s1, s2) = sigma_pair_k5(&s5).unwrap();
            let p = s5.parts();
            let numerator = big(p[1]) * big(p[2]) * big(p[3]) * (big(p[1]) + big(p[3]));
            assert!((&s2 % &s1).is_zero());
            assert!((&numerator % &s2).is_zero());

            let s6 = spec(&[
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
                rng.gen_range(2..=12),
            ]);
            let (t1, t2) = sigma_pair_k6(&s6).unwrap();
            let p = s6.parts();
            let numerator = big(p[1])
                * big(p[2])
                * big(p[3])
                * big(p[4])
                * (big(p[1]) + big(p[3]))
                * (big(p[2]) + big(p[4]));
            assert!((&t2 % &t1).is_zero());
            assert!((&numerator % &t2).is_zero());
        }
    }
}
