//! Admissible (coercivity) sets on the grid and analytic boundedness
//! certificates for the built-in families.
//!
//! * `K` (full participation): `C(z) ≤ C(z0)` and some type weakly prefers
//!   `z` to `z0`;
//! * `F0` (partial participation): `C(z) ≤ 0` and some type weakly prefers
//!   `z` to its reservation utility;
//! * `Γ` (budgets): `C(z) ≤ C(z0)` and some budget point affords `z` and
//!   weakly prefers it to `z0`.
//!
//! On a finite grid these sets are literal predicate evaluations. Utility
//! comparisons use the instance tolerance; cost comparisons are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{norm, FamilyParams, SuperlinearCost, TimePathParams};
use crate::model::{Instance, VariantKind};
use crate::numeric::ExtReal;

/// Which admissible set a mask holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskKind {
    K,
    F0,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleMask {
    pub kind: MaskKind,
    /// Sorted allocation indices.
    pub members: Vec<usize>,
    /// Partial variant: a member with the lowest cost (ties by index), which
    /// certifies that the principal can make nonnegative profit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<usize>,
}

impl AdmissibleMask {
    pub fn contains(&self, alloc: usize) -> bool {
        self.members.binary_search(&alloc).is_ok()
    }
}

fn member(instance: &Instance, z: usize) -> bool {
    let tol = instance.tol();
    let z0 = instance.outside();
    match instance.kind() {
        VariantKind::Full => {
            instance.cost(z).le(instance.cost(z0))
                && (0..instance.n_types()).any(|x| instance.utility(x, z) >= instance.utility(x, z0) - tol)
        }
        VariantKind::Partial => {
            instance.cost(z).le(ExtReal::ZERO)
                && (0..instance.n_types())
                    .any(|x| instance.utility(x, z) >= instance.reservation(x).unwrap_or(0.0) - tol)
        }
        VariantKind::Budget => {
            instance.cost(z).le(instance.cost(z0))
                && instance.points().iter().enumerate().any(|(j, p)| {
                    instance.affordable(j, z) && instance.utility(p.type_index, z) >= instance.utility(p.type_index, z0) - tol
                })
        }
    }
}

/// Evaluates the variant's admissible set over the grid.
///
/// Errors with [`Error::AssumptionViolated`] for a partial-participation
/// instance where no allocation is both profitable and acceptable to some
/// type.
pub fn admissible_set(instance: &Instance) -> Result<AdmissibleMask> {
    let members: Vec<usize> = (0..instance.n_allocs()).filter(|&z| member(instance, z)).collect();
    let kind = match instance.kind() {
        VariantKind::Full => MaskKind::K,
        VariantKind::Partial => MaskKind::F0,
        VariantKind::Budget => MaskKind::Gamma,
    };
    let witness = if kind == MaskKind::F0 {
        let w = members
            .iter()
            .copied()
            .min_by(|&a, &b| instance.cost(a).total_cmp(&instance.cost(b)).then(a.cmp(&b)))
            .ok_or_else(|| {
                Error::AssumptionViolated(
                    "no allocation has nonpositive cost and is acceptable to some type at its reservation utility"
                        .into(),
                )
            })?;
        Some(w)
    } else {
        None
    };
    Ok(AdmissibleMask { kind, members, witness })
}

/// Half-open slack added to certified boxes before containment checks.
pub const CONTAINMENT_SLACK: f64 = 1e-8;

/// Bisection stops once the bracket is this narrow.
pub const RADIUS_TOL: f64 = 1e-10;

/// An axis box `‖q − center‖ ≤ q_radius`, `p ∈ [p_min, p_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertBox {
    pub name: String,
    pub q_radius: f64,
    pub p_min: f64,
    pub p_max: f64,
}

/// Bounds on the time-path energy `Σ_k Δt·(|q_k| + |Δq_k/Δt|²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBound {
    /// Bound on `Σ_k Δt·|q_k|`.
    pub mass: f64,
    /// Bound on `Σ_k Δt·|Δq_k/Δt|²`.
    pub derivative: f64,
    /// `mass + derivative`.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub family: String,
    /// Center `q0` of the attribute ball (empty for time paths, whose center
    /// is the zero path).
    pub q_center: Vec<f64>,
    /// Bound on `‖q − q0‖` (union over boxes); absent for time paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_radius: Option<f64>,
    /// Price bounds `[p_min, p_max]` (union over boxes).
    pub p_interval: [f64; 2],
    /// The boxes whose union contains the admissible set.
    pub boxes: Vec<CertBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBound>,
    /// Which inequality produced each bound.
    pub trace: Vec<String>,
}

impl BoundCertificate {
    /// Whether allocation `alloc` of `instance` lies in the certified region,
    /// inflated by [`CONTAINMENT_SLACK`].
    pub fn contains(&self, instance: &Instance, alloc: usize) -> bool {
        let (Some(p), Some(q)) = (instance.price(alloc), instance.payload(alloc).attrs()) else {
            return false;
        };
        let s = CONTAINMENT_SLACK;
        if let (Some(path), Some(FamilyParams::TimePath(params))) = (&self.path, instance.family()) {
            return params.path_energy(q) <= path.energy + s && p >= self.p_interval[0] - s && p <= self.p_interval[1] + s;
        }
        let dist = distance(q, &self.q_center);
        self.boxes
            .iter()
            .any(|b| dist <= b.q_radius + s && p >= b.p_min - s && p <= b.p_max + s)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Largest `ρ ≥ 0` with `c_ray(ρ) ≤ offset + slope·ρ`, where `c_ray(ρ)` is
/// the least value of `c` on the sphere of radius `ρ` around `q0`.
///
/// The feasible set is an interval `[0, R]` (a convex function below a line,
/// containing the ball where the lower bound vanishes). The result is the
/// upper end of a bisection bracket of width at most [`RADIUS_TOL`], so it
/// never underestimates `R`.
pub fn ray_radius(cost: &SuperlinearCost, q0_norm: f64, offset: f64, slope: f64) -> f64 {
    let ok = |r: f64| cost.ray_lower_bound(r, q0_norm) <= offset + slope * r;
    let mut lo = q0_norm;
    let mut hi = q0_norm.max(1.0);
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > RADIUS_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Analytic bounding region for the admissible set of a family instance.
///
/// * quasilinear: `c(q) − c(q0) ≤ p − p0 ≤ b_x·(q − q0) ≤ Lip_b‖q − q0‖`
///   bounds `q`, and then `p ∈ [p0 − c(q0), p0 + Lip_b·R]`;
/// * nonlinear-G: split at `p = p0`. Below, `c(q) ≤ c(q0)`; above,
///   `λ(p − p0) ≤ Lip_G‖q − q0‖` and `c(q) ≤ c(q0) + (Lip_G/λ)‖q − q0‖`;
/// * time path: Jensen's inequality turns `Σ Δt·c(t_k, q_k) ≤ Lip_v·Σ Δt|q_k|`
///   into a bound on `Σ Δt|q_k|` independent of the number of steps, and the
///   derivative penalty is bounded by the remaining slack.
///
/// The instance must have been built from `family`.
pub fn bound_certificate(instance: &Instance, family: &FamilyParams) -> Result<BoundCertificate> {
    match instance.family() {
        Some(own) if own == family => {}
        Some(own) => {
            return Err(Error::FamilyMismatch(format!(
                "instance was built from a different {} family",
                own.tag()
            )))
        }
        None => return Err(Error::FamilyMismatch("instance carries no family parameters".into())),
    }
    Ok(match family {
        FamilyParams::Quasilinear(p) => {
            let c0 = p.cost.eval(&p.q0);
            let a = norm(&p.q0);
            let r = ray_radius(&p.cost, a, c0, p.lip_b);
            let b = CertBox {
                name: "K".into(),
                q_radius: r,
                p_min: p.p0 - c0,
                p_max: p.p0 + p.lip_b * r,
            };
            BoundCertificate {
                family: family.tag().into(),
                q_center: p.q0.clone(),
                q_radius: Some(r),
                p_interval: [b.p_min, b.p_max],
                boxes: vec![b],
                path: None,
                trace: vec![
                    format!(
                        "q_radius {r:e}: largest r with c_ray(r) <= c(q0) + Lip_b*r, c(q0) = {c0:e}, Lip_b = {:e}",
                        p.lip_b
                    ),
                    format!("p_min {:e}: p - p0 >= c(q) - c(q0) >= -c(q0)", p.p0 - c0),
                    format!("p_max {:e}: p - p0 <= b_x.(q - q0) <= Lip_b*q_radius", p.p0 + p.lip_b * r),
                ],
            }
        }
        FamilyParams::NonlinearG(p) => {
            let c0 = p.cost.eval(&p.q0);
            let a = norm(&p.q0);
            let ratio = p.lip_g / p.lambda;
            let r1 = ray_radius(&p.cost, a, c0, 0.0);
            let r2 = ray_radius(&p.cost, a, c0, ratio);
            let k1 = CertBox {
                name: "K1".into(),
                q_radius: r1,
                p_min: p.p0 - c0,
                p_max: p.p0,
            };
            let k2 = CertBox {
                name: "K2".into(),
                q_radius: r2,
                p_min: p.p0,
                p_max: p.p0 + ratio * r2,
            };
            BoundCertificate {
                family: family.tag().into(),
                q_center: p.q0.clone(),
                q_radius: Some(r1.max(r2)),
                p_interval: [k1.p_min, k2.p_max],
                trace: vec![
                    format!("K1 (p <= p0) q_radius {r1:e}: c(q) <= c(q0) + p - p0 <= c(q0)"),
                    format!("K1 p_min {:e}: p - p0 >= c(q) - c(q0) >= -c(q0)", k1.p_min),
                    format!(
                        "K2 (p >= p0) q_radius {r2:e}: c(q) <= c(q0) + (Lip_G/lambda)*|q - q0|, Lip_G/lambda = {ratio:e}"
                    ),
                    format!("K2 p_max {:e}: lambda*(p - p0) <= Lip_G*|q - q0|", k2.p_max),
                ],
                boxes: vec![k1, k2],
                path: None,
            }
        }
        FamilyParams::TimePath(p) => time_path_certificate(p),
    })
}

fn time_path_certificate(p: &TimePathParams) -> BoundCertificate {
    let lip = p.lip_v();
    let (coef, e, horizon) = (p.cost.coef, p.cost.exponent, p.horizon);
    // coef·T^{1−e}·A^e ≤ Lip_v·A  ⇔  A ≤ T·(Lip_v/coef)^{1/(e−1)}.
    let mass = horizon * (lip / coef).powf(1.0 / (e - 1.0));
    let derivative = lip * mass / p.penalty;
    let energy = mass + derivative;
    let p_max = p.p0 + lip * mass;
    BoundCertificate {
        family: "time_path".into(),
        q_center: Vec::new(),
        q_radius: None,
        p_interval: [p.p0, p_max],
        boxes: Vec::new(),
        path: Some(PathBound {
            mass,
            derivative,
            energy,
        }),
        trace: vec![
            format!("Lip_v {lip:e}: (1 + |modulation|)*max_x |b_x|"),
            format!(
                "mass {mass:e}: coef*T^(1-e)*A^e <= sum dt*c(t_k,q_k) <= p - p0 <= Lip_v*A with A = sum dt*|q_k| (Jensen)"
            ),
            format!("derivative {derivative:e}: penalty*sum dt*|dq_k/dt|^2 <= Lip_v*mass"),
            format!("p in [{:e}, {p_max:e}]: 0 <= p - p0 <= Lip_v*mass", p.p0),
        ],
    }
}
