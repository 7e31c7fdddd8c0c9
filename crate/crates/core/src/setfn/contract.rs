use super::{walker, FunctionKind, GroundSet, SetFunction, SharedFn, Subset, SubsetWalker};
use crate::error::{Error, Result};

/// The residual function `g(T) = f(T ∪ S) - f(S)` on the ground set `N \ S`.
///
/// Element `t` of the contracted ground set is the `t`-th smallest element of
/// `N \ S` in the original labelling; [`Contracted::original`] maps back.
#[derive(Debug, Clone)]
pub struct Contracted {
    base: SharedFn,
    fixed: Subset,
    free: Vec<usize>,
    base_value: f64,
    ground: GroundSet,
}

/// Contracts `f` on `set`. Monotone submodular inputs stay monotone submodular.
pub fn contract(f: SharedFn, set: &Subset) -> Result<Contracted> {
    if set.ground_size() != f.n() {
        return Err(Error::input("contraction set is over a different ground set"));
    }
    let free: Vec<usize> = (0..f.n()).filter(|&e| !set.contains(e)).collect();
    if free.is_empty() {
        return Err(Error::input("contracting on the whole ground set leaves nothing"));
    }
    let ground = GroundSet::new(free.len())?;
    let base_value = f.value(set);
    Ok(Contracted { base: f, fixed: set.clone(), free, base_value, ground })
}

impl Contracted {
    pub fn original(&self, element: usize) -> usize {
        self.free[element]
    }

    pub fn free_elements(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &Subset {
        &self.fixed
    }

    /// The contracted set lifted back to the original ground set, including the fixed part.
    pub fn lift(&self, set: &Subset) -> Subset {
        let mut full = self.fixed.clone();
        for t in set.iter() {
            full.insert(self.free[t]);
        }
        full
    }
}

impl SetFunction for Contracted {
    fn ground(&self) -> &GroundSet {
        &self.ground
    }

    fn kind(&self) -> FunctionKind {
        FunctionKind::Contracted
    }

    fn value(&self, set: &Subset) -> f64 {
        self.base.value(&self.lift(set)) - self.base_value
    }

    fn incremental(&self, start: &Subset) -> Option<Box<dyn SubsetWalker + '_>> {
        let inner = walker(self.base.as_ref(), &self.lift(start));
        Some(Box::new(ContractedWalker { owner: self, inner }))
    }
}

struct ContractedWalker<'a> {
    owner: &'a Contracted,
    inner: Box<dyn SubsetWalker + 'a>,
}

impl SubsetWalker for ContractedWalker<'_> {
    fn toggle(&mut self, element: usize) {
        self.inner.toggle(self.owner.free[element]);
    }

    fn value(&self) -> f64 {
        self.inner.value() - self.owner.base_value
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::setfn::{is_monotone_bruteforce, is_submodular_bruteforce, Coverage};

    fn two_set_cover() -> SharedFn {
        Arc::new(Coverage::new(2, None, vec![vec![0], vec![0, 1]]).unwrap())
    }

    #[test]
    fn contract_on_first_set() {
        let f = two_set_cover();
        let g = contract(f, &Subset::from_indices(2, &[0]).unwrap()).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.original(0), 1);
        assert_eq!(g.value(&Subset::full(1)), 1.0);
        assert_eq!(g.value(&Subset::empty(1)), 0.0);
    }

    #[test]
    fn empty_contraction_is_a_relabelling() {
        let f = two_set_cover();
        let g = contract(f.clone(), &Subset::empty(2)).unwrap();
        for mask in 0..4 {
            let s = Subset::from_mask(2, mask);
            assert_eq!(g.value(&s), f.value(&s));
        }
    }

    #[test]
    fn whole_ground_set_is_rejected() {
        assert!(contract(two_set_cover(), &Subset::full(2)).is_err());
    }

    #[test]
    fn preserves_monotone_submodular() {
        let f: SharedFn = Arc::new(
            Coverage::new(6, Some(vec![1.0, 2.0, 0.5, 0.5, 3.0, 1.0]), vec![vec![0, 1], vec![1, 2, 3], vec![3, 4], vec![5], vec![0, 5]])
                .unwrap(),
        );
        for mask in 0u64..31 {
            let g = contract(f.clone(), &Subset::from_mask(5, mask)).unwrap();
            assert_eq!(g.value(&Subset::empty(g.n())), 0.0);
            assert!(is_monotone_bruteforce(&g).unwrap());
            assert!(is_submodular_bruteforce(&g).unwrap());
        }
    }
}
