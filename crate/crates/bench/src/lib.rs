//! Shared setup for the solver benchmarks.

use screenline::families::{random_instance, RandomShape};
use screenline::{Instance, VariantKind};

/// Instance sizes `(points, allocations)` benchmarked for every solver.
pub const SIZES: [(usize, usize); 3] = [(3, 8), (4, 12), (5, 12)];

/// The benchmark instance for a size and variant; fixed seed so runs compare.
pub fn instance(points: usize, allocs: usize, variant: VariantKind) -> Instance {
    random_instance(42, RandomShape::new(points, allocs, variant)).expect("benchmark instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_have_the_requested_shape() {
        for (n, m) in SIZES {
            let inst = instance(n, m, VariantKind::Full);
            assert_eq!((inst.n_points(), inst.n_allocs()), (n, m));
        }
    }
}
