//! Built-in model families, fixture instances, and seeded random generation.
//!
//! Three parametric families build priced instances with closed-form oracles:
//!
//! * **quasilinear**: `U(x, (p, q)) = b_x·q − p`, `C(p, q) = c(q) − p`;
//! * **nonlinear-G**: `U = b_x·q − p − γ·max(p − p0, 0)²`, so `∂U/∂p ≤ −1`;
//! * **time path**: `q` is a path sampled on `steps` time points and
//!   `C = Σ_k Δt·(c(t_k, q_k) + w·|Δq_k/Δt|²) − p` with forward differences.
//!
//! In all three `c(q) = coef·‖q‖^exponent` with `exponent > 1` (superlinear).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{menu_to_contract, Menu};
use crate::model::{
    AllocationGrid, BudgetPoint, Contract, CostOracle, Expr, Instance, InstanceDoc, Payload, TypeSpace, UtilityOracle,
    Variant, VariantKind, DEFAULT_TOL,
};

/// `c(q) = coef·‖q‖₂^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperlinearCost {
    pub coef: f64,
    pub exponent: f64,
}

impl SuperlinearCost {
    pub fn eval(&self, q: &[f64]) -> f64 {
        self.coef * norm(q).powf(self.exponent)
    }

    /// `min { c(q) : ‖q − q0‖ = r }` for `‖q0‖ = q0_norm`.
    pub fn ray_lower_bound(&self, r: f64, q0_norm: f64) -> f64 {
        self.coef * (r - q0_norm).max(0.0).powf(self.exponent)
    }

    fn validate(&self) -> Result<()> {
        if !(self.coef > 0.0 && self.coef.is_finite()) {
            return Err(Error::validation("family.cost.coef", "must be positive"));
        }
        if !(self.exponent > 1.0 && self.exponent.is_finite()) {
            return Err(Error::validation("family.cost.exponent", "must exceed 1 (superlinear cost)"));
        }
        Ok(())
    }

    fn expr(&self, start: usize, dim: usize) -> Expr {
        Expr::mul(vec![Expr::constant(self.coef), Expr::attr_norm_pow(start, dim, self.exponent)])
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Quasilinear preferences `b(x, q) = b_x·q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasilinearParams {
    pub d: usize,
    pub types: TypeSpace,
    /// `b_x`, one row per type.
    pub gradients: Vec<Vec<f64>>,
    /// Common Lipschitz constant of `b(x, ·)`; at least `max_x ‖b_x‖`.
    pub lip_b: f64,
    pub cost: SuperlinearCost,
    pub p0: f64,
    pub q0: Vec<f64>,
}

/// Nonlinear preferences `G(x, q, p) = b_x·q − p − γ·max(p − p0, 0)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearGParams {
    pub d: usize,
    pub types: TypeSpace,
    pub gradients: Vec<Vec<f64>>,
    pub gamma: f64,
    /// Price-sensitivity floor; the family's closed form fixes it at 1.
    pub lambda: f64,
    /// Lipschitz constant of `G(x, ·, p0)`; at least `max_x ‖b_x‖`.
    pub lip_g: f64,
    pub cost: SuperlinearCost,
    pub p0: f64,
    pub q0: Vec<f64>,
}

/// Time-dependent allocations `q: [0, T) → ℝ^d`, discretized on `steps`
/// left-endpoint nodes `t_k = k·T/steps`. The outside option is the zero path
/// at price `p0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePathParams {
    pub horizon: f64,
    pub steps: usize,
    pub d: usize,
    pub types: TypeSpace,
    /// `v(t, x, q) = (1 + modulation·cos(2πt/T))·b_x·q`.
    pub gradients: Vec<Vec<f64>>,
    pub modulation: f64,
    /// `c(t, q) = (1 + cost_growth·t/T)·coef·‖q‖^exponent`.
    pub cost: SuperlinearCost,
    pub cost_growth: f64,
    /// Weight `w` of the squared-derivative penalty.
    pub penalty: f64,
    pub p0: f64,
}

impl TimePathParams {
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    fn utility_weight(&self, k: usize) -> f64 {
        self.dt() * (1.0 + self.modulation * (2.0 * std::f64::consts::PI * self.time(k) / self.horizon).cos())
    }

    fn cost_weight(&self, k: usize) -> f64 {
        self.dt() * (1.0 + self.cost_growth * self.time(k) / self.horizon) * self.cost.coef
    }

    /// Uniform Lipschitz constant of `v(t, x, ·)`.
    pub fn lip_v(&self) -> f64 {
        (1.0 + self.modulation.abs()) * self.gradients.iter().map(|b| norm(b)).fold(0.0, f64::max)
    }

    /// `Σ_k Δt·(c(t_k, q_k) + w·|Δq_k/Δt|²)` for a flattened path.
    pub fn path_cost(&self, path: &[f64]) -> f64 {
        let (d, dt) = (self.d, self.dt());
        let mut total = 0.0;
        for k in 0..self.steps {
            let qk = &path[k * d..(k + 1) * d];
            let grow = 1.0 + self.cost_growth * self.time(k) / self.horizon;
            let mut term = grow * self.cost.eval(qk);
            if k + 1 < self.steps {
                let next = &path[(k + 1) * d..(k + 2) * d];
                let deriv: f64 = qk.iter().zip(next).map(|(a, b)| ((b - a) / dt).powi(2)).sum();
                term += self.penalty * deriv;
            }
            total += dt * term;
        }
        total
    }

    /// `Σ_k Δt·(|q_k| + |Δq_k/Δt|²)`, the quantity the path certificate bounds.
    pub fn path_energy(&self, path: &[f64]) -> f64 {
        let (d, dt) = (self.d, self.dt());
        let mut total = 0.0;
        for k in 0..self.steps {
            let qk = &path[k * d..(k + 1) * d];
            let mut term = norm(qk);
            if k + 1 < self.steps {
                let next = &path[(k + 1) * d..(k + 2) * d];
                term += qk.iter().zip(next).map(|(a, b)| ((b - a) / dt).powi(2)).sum::<f64>();
            }
            total += dt * term;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Quasilinear(QuasilinearParams),
    NonlinearG(NonlinearGParams),
    TimePath(TimePathParams),
}

impl FamilyParams {
    pub fn tag(&self) -> &'static str {
        match self {
            FamilyParams::Quasilinear(_) => "quasilinear",
            FamilyParams::NonlinearG(_) => "nonlinear_g",
            FamilyParams::TimePath(_) => "time_path",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisRange {
    fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.count)
            .map(|i| self.min + span * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricedPoint {
    pub price: f64,
    pub attrs: Vec<f64>,
}

/// How to lay out the allocation grid of a family instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Explicit(Vec<PricedPoint>),
    /// Cartesian product of a price axis and one axis per attribute.
    Tensor { price: AxisRange, attrs: Vec<AxisRange> },
    /// Time-path family only: `count` random smooth paths.
    SampledPaths {
        count: usize,
        seed: u64,
        price_max: f64,
        amplitude: f64,
    },
}

fn check_types_and_gradients(types: &TypeSpace, gradients: &[Vec<f64>], d: usize) -> Result<()> {
    if gradients.len() != types.ids.len() {
        return Err(Error::validation("family.gradients", "one gradient row per type required"));
    }
    if d == 0 || gradients.iter().any(|g| g.len() != d) {
        return Err(Error::validation("family.gradients", format!("gradient rows must have dimension {d}")));
    }
    Ok(())
}

fn max_gradient_norm(gradients: &[Vec<f64>]) -> f64 {
    gradients.iter().map(|g| norm(g)).fold(0.0, f64::max)
}

fn static_grid(spec: &GridSpec, d: usize) -> Result<Vec<Payload>> {
    let points: Vec<Payload> = match spec {
        GridSpec::Explicit(points) => points
            .iter()
            .map(|p| Payload::priced(p.price, p.attrs.clone()))
            .collect(),
        GridSpec::Tensor { price, attrs } => {
            if attrs.len() != d {
                return Err(Error::Grid(format!("{} attribute axes for dimension {d}", attrs.len())));
            }
            for axis in std::iter::once(price).chain(attrs) {
                if axis.count == 0 || !axis.min.is_finite() || !axis.max.is_finite() {
                    return Err(Error::Grid("axis with no points or non-finite bounds".into()));
                }
            }
            let mut coords: Vec<Vec<f64>> = vec![vec![]];
            for axis in attrs {
                coords = coords
                    .into_iter()
                    .flat_map(|c| {
                        axis.values().into_iter().map(move |v| {
                            let mut c = c.clone();
                            c.push(v);
                            c
                        })
                    })
                    .collect();
            }
            let mut out = Vec::with_capacity(price.count * coords.len());
            for p in price.values() {
                for c in &coords {
                    out.push(Payload::priced(p, c.clone()));
                }
            }
            out
        }
        GridSpec::SampledPaths { .. } => {
            return Err(Error::Grid("sampled paths apply to the time-path family only".into()))
        }
    };
    if points.is_empty() {
        return Err(Error::Grid("grid specification produced no allocations".into()));
    }
    if points.iter().any(|p| p.attrs().map_or(true, |a| a.len() != d)) {
        return Err(Error::Grid(format!("every grid point needs {d} attributes")));
    }
    Ok(points)
}

fn locate_outside(points: &[Payload], p0: f64, q0: &[f64]) -> Result<usize> {
    points
        .iter()
        .position(|p| p.price() == Some(p0) && p.attrs() == Some(q0))
        .ok_or_else(|| Error::Grid(format!("outside option ({p0}, {q0:?}) is not a grid point")))
}

fn full_doc(types: TypeSpace, allocations: Vec<Payload>, outside: usize, utility: UtilityOracle, cost: Expr, family: FamilyParams) -> InstanceDoc {
    InstanceDoc {
        types,
        grid: AllocationGrid {
            allocations,
            outside_index: outside,
        },
        utility,
        cost: CostOracle::Expr(cost),
        variant: Variant::Full,
        distance: None,
        family: Some(family),
        tol: DEFAULT_TOL,
    }
}

/// Builds a full-participation instance for one of the families.
pub fn build_family(params: &FamilyParams, grid: &GridSpec) -> Result<Instance> {
    match params {
        FamilyParams::Quasilinear(p) => {
            check_types_and_gradients(&p.types, &p.gradients, p.d)?;
            p.cost.validate()?;
            if p.q0.len() != p.d {
                return Err(Error::validation("family.q0", "dimension mismatch"));
            }
            if p.lip_b < max_gradient_norm(&p.gradients) {
                return Err(Error::validation("family.lip_b", "smaller than the largest gradient norm"));
            }
            let points = static_grid(grid, p.d)?;
            let outside = locate_outside(&points, p.p0, &p.q0)?;
            let utility = Expr::add(vec![Expr::dot_params_attrs(0, p.d), Expr::neg(Expr::Price)]);
            let cost = Expr::add(vec![p.cost.expr(0, p.d), Expr::neg(Expr::Price)]);
            Instance::new(full_doc(
                p.types.clone(),
                points,
                outside,
                UtilityOracle::Expr {
                    expr: utility,
                    params: p.gradients.clone(),
                },
                cost,
                params.clone(),
            ))
        }
        FamilyParams::NonlinearG(p) => {
            check_types_and_gradients(&p.types, &p.gradients, p.d)?;
            p.cost.validate()?;
            if p.q0.len() != p.d {
                return Err(Error::validation("family.q0", "dimension mismatch"));
            }
            if p.lambda != 1.0 {
                return Err(Error::validation("family.lambda", "the nonlinear-G closed form has lambda = 1"));
            }
            if !(p.gamma >= 0.0 && p.gamma.is_finite()) {
                return Err(Error::validation("family.gamma", "must be nonnegative"));
            }
            if p.lip_g < max_gradient_norm(&p.gradients) {
                return Err(Error::validation("family.lip_g", "smaller than the largest gradient norm"));
            }
            let points = static_grid(grid, p.d)?;
            let outside = locate_outside(&points, p.p0, &p.q0)?;
            let surcharge = Expr::mul(vec![
                Expr::constant(p.gamma),
                Expr::pow(
                    Expr::Max(vec![
                        Expr::add(vec![Expr::Price, Expr::constant(-p.p0)]),
                        Expr::constant(0.0),
                    ]),
                    2.0,
                ),
            ]);
            let utility = Expr::add(vec![
                Expr::dot_params_attrs(0, p.d),
                Expr::neg(Expr::Price),
                Expr::neg(surcharge),
            ]);
            let cost = Expr::add(vec![p.cost.expr(0, p.d), Expr::neg(Expr::Price)]);
            Instance::new(full_doc(
                p.types.clone(),
                points,
                outside,
                UtilityOracle::Expr {
                    expr: utility,
                    params: p.gradients.clone(),
                },
                cost,
                params.clone(),
            ))
        }
        FamilyParams::TimePath(p) => {
            check_types_and_gradients(&p.types, &p.gradients, p.d)?;
            p.cost.validate()?;
            if p.steps < 2 {
                return Err(Error::validation("family.steps", "at least 2 time steps required"));
            }
            if !(p.horizon > 0.0 && p.penalty > 0.0 && p.cost_growth >= 0.0 && p.modulation.abs() < 1.0) {
                return Err(Error::validation(
                    "family",
                    "time-path family needs horizon > 0, penalty > 0, cost_growth >= 0 and |modulation| < 1",
                ));
            }
            let GridSpec::SampledPaths {
                count,
                seed,
                price_max,
                amplitude,
            } = grid
            else {
                return Err(Error::Grid("time-path family requires a sampled-paths grid".into()));
            };
            let dim = p.steps * p.d;
            let mut points = vec![Payload::priced(p.p0, vec![0.0; dim])];
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..*count {
                // q_j(t) = a_j + s_j·(t/T) + c_j·cos(πt/T): the same continuous path for every `steps`.
                let coeffs: Vec<[f64; 3]> = (0..p.d)
                    .map(|_| {
                        [
                            rng.random_range(-*amplitude..=*amplitude),
                            rng.random_range(-*amplitude..=*amplitude),
                            0.5 * rng.random_range(-*amplitude..=*amplitude),
                        ]
                    })
                    .collect();
                let price = p.p0 + rng.random_range(0.0..=*price_max);
                let mut path = Vec::with_capacity(dim);
                for k in 0..p.steps {
                    let s = p.time(k) / p.horizon;
                    for c in &coeffs {
                        path.push(c[0] + c[1] * s + c[2] * (std::f64::consts::PI * s).cos());
                    }
                }
                points.push(Payload::priced(price, path));
            }
            let mut utility_terms = vec![Expr::neg(Expr::Price)];
            let mut cost_terms = vec![Expr::neg(Expr::Price)];
            let dt = p.dt();
            for k in 0..p.steps {
                let wu = p.utility_weight(k);
                for j in 0..p.d {
                    utility_terms.push(Expr::mul(vec![Expr::constant(wu), Expr::Param(j), Expr::Attr(k * p.d + j)]));
                }
                cost_terms.push(Expr::mul(vec![
                    Expr::constant(p.cost_weight(k)),
                    Expr::attr_norm_pow(k * p.d, p.d, p.cost.exponent),
                ]));
                if k + 1 < p.steps {
                    for j in 0..p.d {
                        let diff = Expr::add(vec![Expr::Attr((k + 1) * p.d + j), Expr::neg(Expr::Attr(k * p.d + j))]);
                        cost_terms.push(Expr::mul(vec![Expr::constant(p.penalty / dt), Expr::pow(diff, 2.0)]));
                    }
                }
            }
            Instance::new(full_doc(
                p.types.clone(),
                points,
                0,
                UtilityOracle::Expr {
                    expr: Expr::add(utility_terms),
                    params: p.gradients.clone(),
                },
                Expr::add(cost_terms),
                params.clone(),
            ))
        }
    }
}

fn two_types() -> TypeSpace {
    TypeSpace {
        ids: vec!["x1".into(), "x2".into()],
        weights: vec![0.5, 0.5],
    }
}

/// Quasilinear parameters of the TOY-A fixture.
pub fn toy_a_params() -> QuasilinearParams {
    QuasilinearParams {
        d: 1,
        types: two_types(),
        gradients: vec![vec![1.0], vec![3.0]],
        lip_b: 3.0,
        cost: SuperlinearCost {
            coef: 1.0,
            exponent: 2.0,
        },
        p0: 0.0,
        q0: vec![0.0],
    }
}

/// TOY-A grid `(p, q)`: `(0,0), (0.1,0.5), (1,0.5), (2,1), (9,2)`.
pub fn toy_a_grid() -> GridSpec {
    GridSpec::Explicit(
        [(0.0, 0.0), (0.1, 0.5), (1.0, 0.5), (2.0, 1.0), (9.0, 2.0)]
            .into_iter()
            .map(|(price, q)| PricedPoint { price, attrs: vec![q] })
            .collect(),
    )
}

/// TOY-A: two equally likely types with `b = 1, 3`, `U = b·q − p`,
/// `C = q² − p`, five allocations, outside option at index 0.
pub fn toy_a() -> Instance {
    build_family(&FamilyParams::Quasilinear(toy_a_params()), &toy_a_grid()).expect("TOY-A fixture is valid")
}

/// TOY-B: TOY-A's grid plus `(0.5, 0.5)` at index 5, budget variant with
/// points `(x1, 0.5), (x1, 2), (x2, 0.5), (x2, 2)` each of weight 1/4.
pub fn toy_b() -> Instance {
    let GridSpec::Explicit(mut pts) = toy_a_grid() else {
        unreachable!()
    };
    pts.push(PricedPoint {
        price: 0.5,
        attrs: vec![0.5],
    });
    let base = build_family(&FamilyParams::Quasilinear(toy_a_params()), &GridSpec::Explicit(pts))
        .expect("TOY-B grid is valid");
    let points = [("x1", 0.5), ("x1", 2.0), ("x2", 0.5), ("x2", 2.0)]
        .into_iter()
        .map(|(t, y)| BudgetPoint {
            type_id: t.into(),
            budget: y,
            weight: 0.25,
        })
        .collect();
    base.with_variant(Variant::Budget { points, floor: None })
        .expect("TOY-B fixture is valid")
}

/// TOY-C: TOY-A with partial participation and `u0 ≡ 0`.
pub fn toy_c() -> Instance {
    toy_a()
        .with_variant(Variant::Partial {
            reservation: vec![0.0, 0.0],
        })
        .expect("TOY-C fixture is valid")
}

/// Named fixture lookup (`toy-a`, `toy-b`, `toy-c`).
pub fn fixture(name: &str) -> Option<Instance> {
    match name.to_ascii_lowercase().replace('_', "-").as_str() {
        "toy-a" => Some(toy_a()),
        "toy-b" => Some(toy_b()),
        "toy-c" => Some(toy_c()),
        _ => None,
    }
}

/// Size and variant of a random instance. For the budget variant `types`
/// counts budget points; they are spread round-robin over `⌈types/2⌉` agent types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomShape {
    pub types: usize,
    pub allocs: usize,
    pub variant: VariantKind,
}

impl RandomShape {
    pub fn new(types: usize, allocs: usize, variant: VariantKind) -> Self {
        RandomShape { types, allocs, variant }
    }
}

/// Splits one into `n` positive dyadic weights (multiples of 2⁻¹⁰) that sum
/// to exactly one, so partial sums of weights are exact.
fn dyadic_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    const UNITS: usize = 1024;
    let mut cuts: Vec<usize> = sample(rng, UNITS - 1, n - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut out = Vec::with_capacity(n);
    for c in cuts.into_iter().chain(std::iter::once(UNITS)) {
        out.push((c - prev) as f64 / UNITS as f64);
        prev = c;
    }
    out
}

fn type_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Seeded random priced instance with two attributes.
///
/// Utilities are `b_x·q − s_x·p`, costs `κ‖q‖² − p + f`, the outside option
/// is `(0, (0, 0))` at a random index. Full and budget instances have
/// `f = 0`; partial instances draw `f ≥ 0` and reservation utilities and are
/// redrawn until a nonnegative-profit witness exists.
pub fn random_instance(seed: u64, shape: RandomShape) -> Result<Instance> {
    if shape.types < 1 || shape.allocs < 2 {
        return Err(Error::InvalidArgument("random instances need n >= 1 and m >= 2".into()));
    }
    if shape.types > 512 {
        return Err(Error::InvalidArgument("at most 512 types".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let inst = draw_random(&mut rng, shape)?;
        if shape.variant != VariantKind::Partial || crate::coercivity::admissible_set(&inst).is_ok() {
            return Ok(inst);
        }
    }
}

fn draw_random(rng: &mut ChaCha8Rng, shape: RandomShape) -> Result<Instance> {
    let n_types = match shape.variant {
        VariantKind::Budget => shape.types.div_ceil(2),
        _ => shape.types,
    };
    let m = shape.allocs;
    let outside = rng.random_range(0..m);
    let allocations: Vec<Payload> = (0..m)
        .map(|j| {
            if j == outside {
                Payload::priced(0.0, vec![0.0, 0.0])
            } else {
                Payload::priced(
                    rng.random_range(0.0..3.0),
                    vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
                )
            }
        })
        .collect();
    let params: Vec<Vec<f64>> = (0..n_types)
        .map(|_| {
            vec![
                rng.random_range(0.2..2.5),
                rng.random_range(0.2..2.5),
                rng.random_range(0.6..1.4),
            ]
        })
        .collect();
    let utility = Expr::add(vec![
        Expr::dot_params_attrs(0, 2),
        Expr::neg(Expr::mul(vec![Expr::Param(2), Expr::Price])),
    ]);
    let kappa = rng.random_range(0.3..1.0);
    let fixed = if shape.variant == VariantKind::Partial {
        rng.random_range(0.0..0.3)
    } else {
        0.0
    };
    let cost = Expr::add(vec![
        Expr::mul(vec![Expr::constant(kappa), Expr::attr_norm_pow(0, 2, 2.0)]),
        Expr::neg(Expr::Price),
        Expr::constant(fixed),
    ]);

    let ids = type_ids(n_types);
    let (weights, variant) = match shape.variant {
        VariantKind::Full => (dyadic_weights(rng, n_types), Variant::Full),
        VariantKind::Partial => (
            dyadic_weights(rng, n_types),
            Variant::Partial {
                reservation: (0..n_types).map(|_| rng.random_range(-0.3..0.3)).collect(),
            },
        ),
        VariantKind::Budget => {
            let theta = dyadic_weights(rng, shape.types);
            let mut marginal = vec![0.0; n_types];
            let mut points = Vec::with_capacity(shape.types);
            for (j, &w) in theta.iter().enumerate() {
                let t = j % n_types;
                marginal[t] += w;
                points.push(BudgetPoint {
                    type_id: ids[t].clone(),
                    budget: rng.random_range(0.0..3.0),
                    weight: w,
                });
            }
            (marginal, Variant::Budget { points, floor: None })
        }
    };

    Instance::new(InstanceDoc {
        types: TypeSpace { ids, weights },
        grid: AllocationGrid {
            allocations,
            outside_index: outside,
        },
        utility: UtilityOracle::Expr { expr: utility, params },
        cost: CostOracle::Expr(cost),
        variant,
        distance: None,
        family: None,
        tol: DEFAULT_TOL,
    })
}

/// Family kinds with a random generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomFamilyKind {
    Quasilinear,
    NonlinearG,
}

/// Seeded random family instance: 1–4 types, dimension 1–2, 6–20 sampled
/// grid points around the outside option.
pub fn random_family(seed: u64, kind: RandomFamilyKind) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4usize);
    let d = rng.random_range(1..=2usize);
    let m = rng.random_range(6..=20usize);
    let types = TypeSpace {
        ids: type_ids(n),
        weights: dyadic_weights(&mut rng, n),
    };
    let gradients: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let lip = max_gradient_norm(&gradients) * rng.random_range(1.0..1.5);
    let cost = SuperlinearCost {
        coef: rng.random_range(0.3..2.0),
        exponent: rng.random_range(1.3..3.0),
    };
    let p0 = rng.random_range(-1.0..1.0);
    let q0: Vec<f64> = if rng.random_bool(0.5) {
        vec![0.0; d]
    } else {
        (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()
    };
    let mut pts = vec![PricedPoint {
        price: p0,
        attrs: q0.clone(),
    }];
    for _ in 0..m {
        pts.push(PricedPoint {
            price: p0 + rng.random_range(-2.0..6.0),
            attrs: q0.iter().map(|q| q + rng.random_range(-4.0..4.0)).collect(),
        });
    }
    let params = match kind {
        RandomFamilyKind::Quasilinear => FamilyParams::Quasilinear(QuasilinearParams {
            d,
            types,
            gradients,
            lip_b: lip,
            cost,
            p0,
            q0,
        }),
        RandomFamilyKind::NonlinearG => FamilyParams::NonlinearG(NonlinearGParams {
            d,
            types,
            gradients,
            gamma: rng.random_range(0.0..2.0),
            lambda: 1.0,
            lip_g: lip,
            cost,
            p0,
            q0,
        }),
    };
    build_family(&params, &GridSpec::Explicit(pts))
}

/// Feasible contract induced by a random menu of the grid. Outside the
/// partial variant the menu always contains the outside option, so the
/// induced contract is IR (and affordable for every budget point); induced
/// contracts are IC by construction.
pub fn random_feasible_contract(instance: &Instance, seed: u64) -> Result<Contract> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = instance.n_allocs();
    let size = rng.random_range(1..=m);
    let mut items = sample(&mut rng, m, size).into_vec();
    if instance.kind() != VariantKind::Partial {
        items.push(instance.outside());
    }
    menu_to_contract(instance, &Menu::new(items)?)
}

/// Full-variant instance whose types carry the summed budget-point weights
/// of a budget instance.
pub fn collapse_budget_points(instance: &Instance) -> Result<Instance> {
    let Variant::Budget { points, .. } = instance.variant() else {
        return Err(Error::Variant { expected: "budget" });
    };
    let mut weights = vec![0.0; instance.n_types()];
    for (bp, p) in points.iter().zip(instance.points()) {
        weights[p.type_index] += bp.weight;
    }
    let mut doc = instance.to_doc();
    doc.types.weights = weights;
    doc.variant = Variant::Full;
    Instance::new(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ExtReal;

    #[test]
    fn toy_a_oracle_values() {
        let inst = toy_a();
        let costs: Vec<f64> = inst.costs().iter().map(|c| c.finite().unwrap()).collect();
        let expect_c = [0.0, 0.15, -0.75, -1.0, -5.0];
        let expect_u1 = [0.0, 0.4, -0.5, -1.0, -7.0];
        let expect_u2 = [0.0, 1.4, 0.5, 1.0, -3.0];
        for j in 0..5 {
            assert!((costs[j] - expect_c[j]).abs() < 1e-15, "cost {j}");
            assert!((inst.utility(0, j) - expect_u1[j]).abs() < 1e-15);
            assert!((inst.utility(1, j) - expect_u2[j]).abs() < 1e-15);
        }
        assert_eq!(inst.outside(), 0);
    }

    #[test]
    fn toy_b_extra_allocation() {
        let inst = toy_b();
        assert_eq!(inst.n_allocs(), 6);
        assert_eq!(inst.n_points(), 4);
        assert_eq!(inst.cost(5), ExtReal::Finite(-0.25));
        assert_eq!(inst.utility(1, 5), 1.0);
        assert_eq!(inst.utility(0, 5), 0.0);
        assert_eq!(inst.budget_floor(), Some(0.0));
    }

    #[test]
    fn nonlinear_g_is_below_quasilinear_for_nonnegative_prices() {
        let p = toy_a_params();
        let params = FamilyParams::NonlinearG(NonlinearGParams {
            d: 1,
            types: p.types.clone(),
            gradients: p.gradients.clone(),
            gamma: 1.0,
            lambda: 1.0,
            lip_g: 3.0,
            cost: p.cost.clone(),
            p0: 0.0,
            q0: vec![0.0],
        });
        let g = build_family(&params, &toy_a_grid()).unwrap();
        let a = toy_a();
        for t in 0..2 {
            for j in 0..5 {
                let price = a.price(j).unwrap();
                let q = a.payload(j).attrs().unwrap()[0];
                let b = p.gradients[t][0];
                let direct = b * q - price - price.max(0.0).powi(2);
                assert!((g.utility(t, j) - direct).abs() < 1e-12);
                assert!(g.utility(t, j) <= a.utility(t, j));
            }
        }
    }

    #[test]
    fn outside_option_must_be_on_grid() {
        let mut p = toy_a_params();
        p.q0 = vec![0.25];
        let err = build_family(&FamilyParams::Quasilinear(p), &toy_a_grid()).unwrap_err();
        assert!(matches!(err, Error::Grid(_)));
    }

    #[test]
    fn tensor_grid_contains_outside() {
        let grid = GridSpec::Tensor {
            price: AxisRange {
                min: 0.0,
                max: 4.0,
                count: 5,
            },
            attrs: vec![AxisRange {
                min: -1.0,
                max: 1.0,
                count: 5,
            }],
        };
        let inst = build_family(&FamilyParams::Quasilinear(toy_a_params()), &grid).unwrap();
        assert_eq!(inst.n_allocs(), 25);
        assert_eq!(inst.price(inst.outside()), Some(0.0));
    }

    fn time_params(steps: usize) -> TimePathParams {
        TimePathParams {
            horizon: 1.0,
            steps,
            d: 1,
            types: two_types(),
            gradients: vec![vec![1.0], vec![2.0]],
            modulation: 0.3,
            cost: SuperlinearCost {
                coef: 1.0,
                exponent: 2.0,
            },
            cost_growth: 0.5,
            penalty: 0.1,
            p0: 0.0,
        }
    }

    #[test]
    fn time_path_instance_has_finite_costs_and_matches_direct_formula() {
        let params = time_params(4);
        let grid = GridSpec::SampledPaths {
            count: 50,
            seed: 3,
            price_max: 2.0,
            amplitude: 1.0,
        };
        let inst = build_family(&FamilyParams::TimePath(params.clone()), &grid).unwrap();
        assert_eq!(inst.n_allocs(), 51);
        for j in 0..inst.n_allocs() {
            let c = inst.cost(j).finite().expect("finite cost");
            let path = inst.payload(j).attrs().unwrap();
            let direct = params.path_cost(path) - inst.price(j).unwrap();
            assert!((c - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "alloc {j}: {c} vs {direct}");
        }
    }

    #[test]
    fn random_instance_is_deterministic_and_seed_sensitive() {
        let shape = RandomShape::new(2, 5, VariantKind::Full);
        let a = random_instance(7, shape).unwrap();
        let b = random_instance(7, shape).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = random_instance(8, shape).unwrap();
        assert_ne!(
            (0..2).map(|t| a.utility(t, 1)).collect::<Vec<_>>(),
            (0..2).map(|t| c.utility(t, 1)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn random_budget_respects_outside_affordability() {
        let inst = random_instance(1, RandomShape::new(3, 6, VariantKind::Budget)).unwrap();
        let p0 = inst.price(inst.outside()).unwrap();
        let min_budget = inst.points().iter().map(|p| p.budget.unwrap()).fold(f64::INFINITY, f64::min);
        assert!(p0 <= min_budget);
        assert_eq!(inst.n_points(), 3);
        assert!(matches!(
            random_instance(1, RandomShape::new(0, 6, VariantKind::Full)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn dyadic_weights_sum_exactly_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..20 {
            let w = dyadic_weights(&mut rng, n);
            assert_eq!(w.len(), n);
            assert_eq!(w.iter().sum::<f64>(), 1.0);
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn quasilinear_gradients_respect_lipschitz_constant() {
        for seed in 0..50 {
            let inst = random_family(seed, RandomFamilyKind::Quasilinear).unwrap();
            let Some(FamilyParams::Quasilinear(p)) = inst.family() else {
                panic!()
            };
            for b in &p.gradients {
                for i in 0..inst.n_allocs() {
                    for j in 0..inst.n_allocs() {
                        let qi = inst.payload(i).attrs().unwrap();
                        let qj = inst.payload(j).attrs().unwrap();
                        let diff: Vec<f64> = qi.iter().zip(qj).map(|(a, c)| a - c).collect();
                        let dist = norm(&diff);
                        if dist > 0.0 {
                            let db: f64 = b.iter().zip(&diff).map(|(g, x)| g * x).sum();
                            assert!(db.abs() / dist <= p.lip_b * (1.0 + 1e-12));
                        }
                    }
                }
            }
        }
    }
}
