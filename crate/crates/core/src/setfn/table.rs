use super::{FunctionKind, GroundSet, SetFunction, Subset};
use crate::error::{Error, Result};

/// Largest ground set an explicit value table may cover.
pub const MAX_TABLE_ELEMENTS: usize = 24;

/// A set function stored as its full table of `2^n` values, indexed by bitmask.
#[derive(Debug, Clone)]
pub struct TableFunction {
    ground: GroundSet,
    values: Vec<f64>,
}

impl TableFunction {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > MAX_TABLE_ELEMENTS {
            return Err(Error::capacity(format!(
                "value tables support at most {MAX_TABLE_ELEMENTS} elements, got {n}"
            )));
        }
        let ground = GroundSet::new(n)?;
        if values.len() != 1 << n {
            return Err(Error::input(format!(
                "a table over {n} elements needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("table value at mask {i} is not finite")));
        }
        Ok(TableFunction { ground, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(u64) -> f64) -> Result<Self> {
        if n > MAX_TABLE_ELEMENTS {
            return Err(Error::capacity(format!(
                "value tables support at most {MAX_TABLE_ELEMENTS} elements, got {n}"
            )));
        }
        TableFunction::new(n, (0..1u64 << n).map(f).collect())
    }

    /// Tabulates any oracle on a small ground set.
    pub fn snapshot(f: &dyn SetFunction) -> Result<Self> {
        TableFunction::new(f.n(), super::tabulate(f)?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl SetFunction for TableFunction {
    fn ground(&self) -> &GroundSet {
        &self.ground
    }

    fn kind(&self) -> FunctionKind {
        FunctionKind::SyntheticTable
    }

    fn value(&self, set: &Subset) -> f64 {
        self.values[set.mask() as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TableFunction::new(2, vec![0.0; 3]).is_err());
        assert!(TableFunction::new(1, vec![0.0, f64::INFINITY]).is_err());
        assert!(matches!(TableFunction::from_fn(25, |_| 0.0), Err(Error::Capacity(_))));
        let f = TableFunction::from_fn(3, |m| m as f64).unwrap();
        assert_eq!(f.value(&Subset::from_indices(3, &[0, 2]).unwrap()), 5.0);
    }
}
