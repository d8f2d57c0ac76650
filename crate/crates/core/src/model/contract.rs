use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Instance;
use crate::error::{Error, Result};
use crate::numeric::ExtReal;

/// One grid allocation per point of the instance, in point order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Contract {
    assignment: Vec<usize>,
}

/// JSON form: point label → allocation index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDoc {
    pub assignment: BTreeMap<String, usize>,
}

impl Contract {
    pub fn new(assignment: Vec<usize>) -> Contract {
        Contract { assignment }
    }

    pub fn constant(instance: &Instance, alloc: usize) -> Contract {
        Contract {
            assignment: vec![alloc; instance.n_points()],
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn get(&self, point: usize) -> usize {
        self.assignment[point]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Sorted distinct allocations used.
    pub fn range(&self) -> Vec<usize> {
        let mut r = self.assignment.clone();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// Errors unless the contract has one valid allocation per point.
    pub fn check_shape(&self, instance: &Instance) -> Result<()> {
        if self.assignment.len() != instance.n_points() {
            return Err(Error::Shape(format!(
                "contract has {} entries, instance has {} points",
                self.assignment.len(),
                instance.n_points()
            )));
        }
        if let Some(bad) = self.assignment.iter().find(|&&a| a >= instance.n_allocs()) {
            return Err(Error::Shape(format!("allocation index {bad} out of range")));
        }
        Ok(())
    }

    pub fn to_doc(&self, instance: &Instance) -> ContractDoc {
        ContractDoc {
            assignment: instance
                .points()
                .iter()
                .zip(&self.assignment)
                .map(|(p, &a)| (p.label.clone(), a))
                .collect(),
        }
    }

    pub fn from_doc(instance: &Instance, doc: &ContractDoc) -> Result<Contract> {
        if doc.assignment.len() != instance.n_points() {
            return Err(Error::Shape(format!(
                "contract names {} points, instance has {}",
                doc.assignment.len(),
                instance.n_points()
            )));
        }
        let assignment = instance
            .points()
            .iter()
            .map(|p| {
                doc.assignment
                    .get(&p.label)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("contract has no entry for point `{}`", p.label)))
            })
            .collect::<Result<Vec<_>>>()?;
        let c = Contract { assignment };
        c.check_shape(instance)?;
        Ok(c)
    }

    pub fn from_json(instance: &Instance, source: &str) -> Result<Contract> {
        let doc: ContractDoc = serde_json::from_str(source).map_err(|e| Error::Schema(e.to_string()))?;
        Contract::from_doc(instance, &doc)
    }
}

/// Principal's objective for `contract`.
///
/// Full: `Σ μᵢ C(z(xᵢ))`. Partial: the same sum restricted to the
/// participation set. Budget: `Σ θⱼ C(pⱼ, qⱼ)`. The sum is correctly rounded,
/// hence independent of point order.
pub fn contract_cost(instance: &Instance, contract: &Contract) -> Result<ExtReal> {
    contract.check_shape(instance)?;
    Ok(cost_unchecked(instance, contract.assignment()))
}

pub(crate) fn cost_unchecked(instance: &Instance, assignment: &[usize]) -> ExtReal {
    ExtReal::weighted_sum(
        instance
            .points()
            .iter()
            .zip(assignment)
            .filter(|(p, &a)| instance.participates(p.type_index, a))
            .map(|(p, &a)| (p.weight, instance.cost(a))),
    )
}
