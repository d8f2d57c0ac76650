use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::expr::EvalCtx;
use super::{AllocationGrid, CostOracle, Payload, TypeSpace, UtilityOracle, Variant, VariantKind};
use crate::error::{Error, Result};
use crate::families::FamilyParams;
use crate::json;
use crate::numeric::ExtReal;

pub const DEFAULT_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-12;

fn default_tol() -> f64 {
    DEFAULT_TOL
}

/// The on-disk instance document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub types: TypeSpace,
    pub grid: AllocationGrid,
    pub utility: UtilityOracle,
    pub cost: CostOracle,
    pub variant: Variant,
    /// Symmetric allocation distance table, used for abstract payloads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyParams>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

/// A point of the principal's program: a type (full/partial) or a
/// `(type, budget)` pair (budget variant).
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub type_index: usize,
    pub budget: Option<f64>,
    pub weight: f64,
    pub label: String,
}

/// A validated, immutable instance.
///
/// Oracles are evaluated once at construction into dense tables, so every
/// later query is a lookup and repeated evaluation is bit-identical.
#[derive(Debug, Clone)]
pub struct Instance {
    doc: InstanceDoc,
    utility: Vec<Vec<f64>>,
    cost: Vec<ExtReal>,
    points: Vec<Point>,
    budget_floor: Option<f64>,
}

/// Parses and validates an instance document.
pub fn load_instance(source: &str) -> Result<Instance> {
    let doc: InstanceDoc =
        serde_json::from_str(source).map_err(|e| Error::Schema(e.to_string()))?;
    Instance::new(doc)
}

impl Instance {
    pub fn new(doc: InstanceDoc) -> Result<Instance> {
        validate_types(&doc.types)?;
        let n = doc.types.ids.len();
        let m = validate_grid(&doc.grid)?;
        if !(doc.tol.is_finite() && doc.tol >= 0.0) {
            return Err(Error::validation("tol", format!("must be a nonnegative finite real, got {}", doc.tol)));
        }

        let utility = evaluate_utility(&doc, n, m)?;
        let cost = evaluate_cost(&doc, m)?;
        if !cost[doc.grid.outside_index].is_finite() {
            return Err(Error::validation("cost", "cost of the outside option must be finite"));
        }

        let (points, budget_floor) = build_points(&doc)?;

        if let Some(table) = &doc.distance {
            validate_distance(table, m)?;
        }

        Ok(Instance {
            doc,
            utility,
            cost,
            points,
            budget_floor,
        })
    }

    pub fn from_json(source: &str) -> Result<Instance> {
        load_instance(source)
    }

    pub fn doc(&self) -> &InstanceDoc {
        &self.doc
    }

    pub fn to_doc(&self) -> InstanceDoc {
        self.doc.clone()
    }

    /// Canonical JSON (sorted keys, 17 significant digits).
    pub fn to_json(&self) -> String {
        json::to_canonical_string(&self.doc)
    }

    pub fn n_types(&self) -> usize {
        self.doc.types.ids.len()
    }

    pub fn n_allocs(&self) -> usize {
        self.cost.len()
    }

    pub fn type_ids(&self) -> &[String] {
        &self.doc.types.ids
    }

    pub fn type_weights(&self) -> &[f64] {
        &self.doc.types.weights
    }

    pub fn type_index(&self, id: &str) -> Option<usize> {
        self.doc.types.ids.iter().position(|t| t == id)
    }

    pub fn outside(&self) -> usize {
        self.doc.grid.outside_index
    }

    pub fn payload(&self, alloc: usize) -> &Payload {
        &self.doc.grid.allocations[alloc]
    }

    pub fn price(&self, alloc: usize) -> Option<f64> {
        self.doc.grid.allocations[alloc].price()
    }

    pub fn is_priced(&self) -> bool {
        matches!(self.doc.grid.allocations[0], Payload::Priced { .. })
    }

    /// `U(type, alloc)`.
    #[inline]
    pub fn utility(&self, type_index: usize, alloc: usize) -> f64 {
        self.utility[type_index][alloc]
    }

    /// `C(alloc)`.
    #[inline]
    pub fn cost(&self, alloc: usize) -> ExtReal {
        self.cost[alloc]
    }

    pub fn costs(&self) -> &[ExtReal] {
        &self.cost
    }

    pub fn variant(&self) -> &Variant {
        &self.doc.variant
    }

    pub fn kind(&self) -> VariantKind {
        self.doc.variant.kind()
    }

    pub fn tol(&self) -> f64 {
        self.doc.tol
    }

    pub fn family(&self) -> Option<&FamilyParams> {
        self.doc.family.as_ref()
    }

    pub fn distance_table(&self) -> Option<&Vec<Vec<f64>>> {
        self.doc.distance.as_ref()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Lower end `y̲` of the budget range (budget variant only).
    pub fn budget_floor(&self) -> Option<f64> {
        self.budget_floor
    }

    /// Reservation utility `u0(type)` (partial variant only).
    pub fn reservation(&self, type_index: usize) -> Option<f64> {
        match &self.doc.variant {
            Variant::Partial { reservation } => Some(reservation[type_index]),
            _ => None,
        }
    }

    /// Whether a point receiving `alloc` is affordable for it (always true
    /// outside the budget variant). Exact comparison.
    #[inline]
    pub fn affordable(&self, point: usize, alloc: usize) -> bool {
        match self.points[point].budget {
            Some(y) => self.price(alloc).is_some_and(|p| p <= y),
            None => true,
        }
    }

    /// Participation indicator `U(x, z) ≥ u0(x) − tol`; always true outside
    /// the partial variant.
    #[inline]
    pub fn participates(&self, type_index: usize, alloc: usize) -> bool {
        match &self.doc.variant {
            Variant::Partial { reservation } => {
                self.utility(type_index, alloc) >= reservation[type_index] - self.doc.tol
            }
            _ => true,
        }
    }

    /// Same instance with a different comparison tolerance.
    pub fn with_tol(&self, tol: f64) -> Result<Instance> {
        let mut doc = self.to_doc();
        doc.tol = tol;
        Instance::new(doc)
    }

    /// Same instance with a different variant block.
    pub fn with_variant(&self, variant: Variant) -> Result<Instance> {
        let mut doc = self.to_doc();
        doc.variant = variant;
        Instance::new(doc)
    }

    /// Restricts the grid to `keep` (must contain the outside option); the
    /// returned instance re-indexes allocations in the order given.
    pub fn subgrid(&self, keep: &[usize]) -> Result<Instance> {
        let mut seen = HashSet::new();
        for &k in keep {
            if k >= self.n_allocs() || !seen.insert(k) {
                return Err(Error::InvalidArgument(format!("bad or duplicate allocation index {k}")));
            }
        }
        let outside = keep
            .iter()
            .position(|&k| k == self.outside())
            .ok_or_else(|| Error::InvalidArgument("subgrid must contain the outside option".into()))?;
        let mut doc = self.to_doc();
        doc.grid = AllocationGrid {
            allocations: keep.iter().map(|&k| self.payload(k).clone()).collect(),
            outside_index: outside,
        };
        if let UtilityOracle::Table(rows) = &mut doc.utility {
            for row in rows.iter_mut() {
                *row = keep.iter().map(|&k| row[k]).collect();
            }
        }
        if let CostOracle::Table(row) = &mut doc.cost {
            *row = keep.iter().map(|&k| row[k]).collect();
        }
        if let Some(table) = &mut doc.distance {
            *table = keep
                .iter()
                .map(|&a| keep.iter().map(|&b| table[a][b]).collect())
                .collect();
        }
        Instance::new(doc)
    }
}

fn validate_types(types: &TypeSpace) -> Result<()> {
    if types.ids.is_empty() {
        return Err(Error::validation("types.ids", "type space is empty"));
    }
    if types.ids.len() != types.weights.len() {
        return Err(Error::validation(
            "types.weights",
            format!("{} weights for {} types", types.weights.len(), types.ids.len()),
        ));
    }
    let mut seen = HashSet::new();
    for id in &types.ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::validation("types.ids", format!("duplicate type id `{id}`")));
        }
    }
    check_weights("types.weights", &types.weights)
}

fn check_weights(field: &str, weights: &[f64]) -> Result<()> {
    for (i, &w) in weights.iter().enumerate() {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::validation(field, format!("weight {i} is {w}; weights must be strictly positive")));
        }
    }
    let sum = crate::numeric::exact_sum(weights);
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::validation(field, format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

fn validate_grid(grid: &AllocationGrid) -> Result<usize> {
    let m = grid.allocations.len();
    if m == 0 {
        return Err(Error::validation("grid.allocations", "grid is empty"));
    }
    if grid.outside_index >= m {
        return Err(Error::validation(
            "grid.outside_index",
            format!("index {} out of range for {m} allocations", grid.outside_index),
        ));
    }
    match &grid.allocations[0] {
        Payload::Abstract(_) => {
            if grid.allocations.iter().any(|a| !matches!(a, Payload::Abstract(_))) {
                return Err(Error::validation("grid.allocations", "mixed abstract and priced payloads"));
            }
        }
        Payload::Priced { attrs, .. } => {
            let d = attrs.len();
            for (i, a) in grid.allocations.iter().enumerate() {
                match a {
                    Payload::Priced { price, attrs } => {
                        if attrs.len() != d {
                            return Err(Error::validation(
                                "grid.allocations",
                                format!("allocation {i} has attribute dimension {}, expected {d}", attrs.len()),
                            ));
                        }
                        if !price.is_finite() || attrs.iter().any(|v| !v.is_finite()) {
                            return Err(Error::validation(
                                "grid.allocations",
                                format!("allocation {i} has a non-finite coordinate"),
                            ));
                        }
                    }
                    Payload::Abstract(_) => {
                        return Err(Error::validation("grid.allocations", "mixed abstract and priced payloads"))
                    }
                }
            }
        }
    }
    Ok(m)
}

fn check_expr_refs(field: &str, expr: &super::Expr, doc: &InstanceDoc, n_params: usize) -> Result<()> {
    let usage = expr.usage();
    let priced = matches!(doc.grid.allocations[0], Payload::Priced { .. });
    if (usage.uses_price || usage.max_attr.is_some()) && !priced {
        return Err(Error::validation(field, "expression reads price/attributes of abstract payloads"));
    }
    if let Some(a) = usage.max_attr {
        let d = doc.grid.allocations[0].attrs().map_or(0, |v| v.len());
        if a >= d {
            return Err(Error::validation(field, format!("attribute index {a} out of range (dimension {d})")));
        }
    }
    if let Some(p) = usage.max_param {
        if p >= n_params {
            return Err(Error::validation(field, format!("parameter index {p} out of range ({n_params} parameters)")));
        }
    }
    Ok(())
}

fn payload_ctx<'a>(payload: &'a Payload, params: &'a [f64]) -> EvalCtx<'a> {
    match payload {
        Payload::Priced { price, attrs } => EvalCtx {
            price: *price,
            attrs,
            params,
        },
        Payload::Abstract(_) => EvalCtx {
            price: f64::NAN,
            attrs: &[],
            params,
        },
    }
}

fn evaluate_utility(doc: &InstanceDoc, n: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    let table = match &doc.utility {
        UtilityOracle::Table(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != m) {
                return Err(Error::validation("utility.table", format!("expected a {n}×{m} table")));
            }
            rows.clone()
        }
        UtilityOracle::Expr { expr, params } => {
            if params.len() != n {
                return Err(Error::validation(
                    "utility.expr.params",
                    format!("{} parameter rows for {n} types", params.len()),
                ));
            }
            let k = params[0].len();
            if params.iter().any(|p| p.len() != k) {
                return Err(Error::validation("utility.expr.params", "parameter rows differ in length"));
            }
            check_expr_refs("utility.expr", expr, doc, k)?;
            params
                .iter()
                .map(|p| {
                    doc.grid
                        .allocations
                        .iter()
                        .map(|a| expr.eval(&payload_ctx(a, p)))
                        .collect()
                })
                .collect()
        }
    };
    for (t, row) in table.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                "utility",
                format!("utility of type `{}` at allocation {j} is not finite", doc.types.ids[t]),
            ));
        }
    }
    Ok(table)
}

fn evaluate_cost(doc: &InstanceDoc, m: usize) -> Result<Vec<ExtReal>> {
    let raw: Vec<ExtReal> = match &doc.cost {
        CostOracle::Table(row) => {
            if row.len() != m {
                return Err(Error::validation("cost.table", format!("expected {m} entries, found {}", row.len())));
            }
            row.clone()
        }
        CostOracle::Expr(expr) => {
            check_expr_refs("cost.expr", expr, doc, 0)?;
            doc.grid
                .allocations
                .iter()
                .map(|a| ExtReal::from(expr.eval(&payload_ctx(a, &[]))))
                .collect()
        }
    };
    for (j, c) in raw.iter().enumerate() {
        if let ExtReal::Finite(v) = c {
            if !v.is_finite() {
                return Err(Error::validation("cost", format!("cost at allocation {j} is {v}")));
            }
        }
    }
    Ok(raw)
}

fn build_points(doc: &InstanceDoc) -> Result<(Vec<Point>, Option<f64>)> {
    let n = doc.types.ids.len();
    match &doc.variant {
        Variant::Full => Ok((type_points(doc), None)),
        Variant::Partial { reservation } => {
            if reservation.len() != n {
                return Err(Error::validation(
                    "variant.reservation",
                    format!("{} reservation utilities for {n} types", reservation.len()),
                ));
            }
            if reservation.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("variant.reservation", "reservation utilities must be finite"));
            }
            Ok((type_points(doc), None))
        }
        Variant::Budget { points, floor } => {
            let p0 = doc.grid.allocations[doc.grid.outside_index]
                .price()
                .ok_or_else(|| Error::validation("grid.allocations", "budget variant requires priced allocations"))?;
            if points.is_empty() {
                return Err(Error::validation("variant.points", "no budget points"));
            }
            let weights: Vec<f64> = points.iter().map(|p| p.weight).collect();
            check_weights("variant.points.weight", &weights)?;
            let mut out = Vec::with_capacity(points.len());
            let mut labels = HashSet::new();
            for (i, bp) in points.iter().enumerate() {
                let t = doc
                    .types
                    .ids
                    .iter()
                    .position(|id| *id == bp.type_id)
                    .ok_or_else(|| {
                        Error::validation("variant.points.type", format!("point {i} references unknown type `{}`", bp.type_id))
                    })?;
                if !bp.budget.is_finite() {
                    return Err(Error::validation("variant.points.budget", format!("point {i} has a non-finite budget")));
                }
                let label = format!("{}@{}", bp.type_id, bp.budget);
                if !labels.insert(label.clone()) {
                    return Err(Error::validation("variant.points", format!("duplicate budget point `{label}`")));
                }
                out.push(Point {
                    type_index: t,
                    budget: Some(bp.budget),
                    weight: bp.weight,
                    label,
                });
            }
            let min_budget = points.iter().map(|p| p.budget).fold(f64::INFINITY, f64::min);
            if p0 > min_budget {
                return Err(Error::validation(
                    "variant.points.budget",
                    format!(
                        "outside option price {p0} exceeds the lowest budget {min_budget}; \
                         the outside option must be affordable at every budget"
                    ),
                ));
            }
            let floor = floor.unwrap_or(p0);
            if !floor.is_finite() || floor < p0 || floor > min_budget {
                return Err(Error::validation(
                    "variant.floor",
                    format!("budget floor {floor} must lie in [{p0}, {min_budget}]"),
                ));
            }
            Ok((out, Some(floor)))
        }
    }
}

fn type_points(doc: &InstanceDoc) -> Vec<Point> {
    doc.types
        .ids
        .iter()
        .zip(&doc.types.weights)
        .enumerate()
        .map(|(i, (id, &w))| Point {
            type_index: i,
            budget: None,
            weight: w,
            label: id.clone(),
        })
        .collect()
}

fn validate_distance(table: &[Vec<f64>], m: usize) -> Result<()> {
    if table.len() != m || table.iter().any(|r| r.len() != m) {
        return Err(Error::validation("distance", format!("expected a {m}×{m} table")));
    }
    for (i, row) in table.iter().enumerate() {
        if row[i] != 0.0 {
            return Err(Error::validation("distance", format!("nonzero diagonal at {i}")));
        }
        for (j, &d) in row.iter().enumerate() {
            if !(d.is_finite() && d >= 0.0) || d != table[j][i] {
                return Err(Error::validation(
                    "distance",
                    format!("entry ({i}, {j}) must be finite, nonnegative and symmetric"),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{toy_a, toy_b};

    #[test]
    fn toy_a_round_trips_through_json() {
        let inst = toy_a();
        let text = inst.to_json();
        let back = load_instance(&text).unwrap();
        assert_eq!(back.n_types(), 2);
        assert_eq!(back.n_allocs(), 5);
        assert_eq!(back.kind(), VariantKind::Full);
        for t in 0..2 {
            for a in 0..5 {
                assert_eq!(inst.utility(t, a).to_bits(), back.utility(t, a).to_bits());
            }
        }
        assert_eq!(inst.costs(), back.costs());
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_weights_not_summing_to_one() {
        let mut doc = toy_a().to_doc();
        doc.types.weights = vec![0.7, 0.7];
        let err = Instance::new(doc).unwrap_err();
        match err {
            Error::Validation { field, message } => {
                assert_eq!(field, "types.weights");
                assert!(message.contains("weights sum to 1.4"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_outside_option_priced_above_min_budget() {
        let mut doc = toy_b().to_doc();
        if let Payload::Priced { price, .. } = &mut doc.grid.allocations[0] {
            *price = 1.0;
        }
        let err = Instance::new(doc).unwrap_err();
        match err {
            Error::Validation { field, message } => {
                assert_eq!(field, "variant.points.budget");
                assert!(message.contains("lowest budget 0.5"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(matches!(load_instance("{"), Err(Error::Schema(_))));
        assert!(matches!(load_instance(r#"{"types": 3}"#), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_dangling_outside_index() {
        let mut doc = toy_a().to_doc();
        doc.grid.outside_index = 9;
        let err = Instance::new(doc).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "grid.outside_index"));
    }

    #[test]
    fn rejects_unknown_budget_type_and_infinite_outside_cost() {
        let mut doc = toy_b().to_doc();
        if let Variant::Budget { points, .. } = &mut doc.variant {
            points[0].type_id = "nobody".into();
        }
        assert!(matches!(Instance::new(doc), Err(Error::Validation { .. })));

        let mut doc = toy_a().to_doc();
        doc.cost = CostOracle::Table(vec![ExtReal::Infinite, ExtReal::ZERO, ExtReal::ZERO, ExtReal::ZERO, ExtReal::ZERO]);
        assert!(matches!(Instance::new(doc), Err(Error::Validation { ref field, .. }) if field == "cost"));
    }

    #[test]
    fn subgrid_reindexes() {
        let inst = toy_a();
        let sub = inst.subgrid(&[3, 0]).unwrap();
        assert_eq!(sub.n_allocs(), 2);
        assert_eq!(sub.outside(), 1);
        assert_eq!(sub.utility(1, 0), inst.utility(1, 3));
        assert!(inst.subgrid(&[1, 2]).is_err());
    }
}
