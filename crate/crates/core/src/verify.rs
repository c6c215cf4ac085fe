//! Machine checks of superadditivity and concavity of effective resistance.
//!
//! Every check returns a [`VerificationReport`]: labelled quantities and
//! inequalities between them with signed margins. For `>=` the margin is
//! `lhs - rhs`, for `<=` it is `rhs - lhs`, and for `==` it is
//! `-|lhs - rhs| / scale` with a check-specific scale (relative for
//! resistances, absolute for entropies). An inequality holds when its margin
//! is at least `-tolerance`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::electric::{dissipated_power_with, effective_resistance, thomson_flow, ResistiveNetwork};
use crate::error::{Error, Result};
use crate::gaussian::{
    condition_on_value, condition_on_zero, entropy_scalar, independent_gaussian, linear_functional_variance,
    ConstraintSet, Entropy, GaussianVector,
};
use crate::gff::{build_free_field, fundamental_constraints};
use crate::graph::{EdgeId, Multigraph, VertexId};

/// Default tolerance on verification margins.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Variances at or below this are treated as collapsed when taking entropies.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Pass threshold on the Monte Carlo z-score.
pub const MC_Z_BOUND: f64 = 4.0;

/// Sample counts below this make the Monte Carlo check uninformative.
pub const MC_LOW_POWER_COUNT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Ohm,
    Ampere,
    Volt,
    Watt,
    Variance,
    Nats,
    Bits,
    Count,
    Dimensionless,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Ohm => "ohm",
            Unit::Ampere => "A",
            Unit::Volt => "V",
            Unit::Watt => "W",
            Unit::Variance => "var",
            Unit::Nats => "nats",
            Unit::Bits => "bits",
            Unit::Count => "count",
            Unit::Dimensionless => "1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantityValue {
    Number(f64),
    /// Entropy of a collapsed (zero-variance) scalar.
    Degenerate,
}

impl QuantityValue {
    pub fn number(self) -> Option<f64> {
        match self {
            QuantityValue::Number(x) => Some(x),
            QuantityValue::Degenerate => None,
        }
    }
}

impl From<Entropy> for QuantityValue {
    fn from(h: Entropy) -> Self {
        match h {
            Entropy::Finite(x) => QuantityValue::Number(x),
            Entropy::Degenerate => QuantityValue::Degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub label: String,
    pub value: QuantityValue,
    pub unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub lhs: String,
    pub rel: Relation,
    pub rhs: String,
    pub margin: f64,
    pub holds: bool,
    scale: f64,
}

fn signed_margin(lhs: QuantityValue, rel: Relation, rhs: QuantityValue, scale: f64) -> f64 {
    use QuantityValue::{Degenerate, Number};
    match (lhs, rhs) {
        (Number(l), Number(r)) => match rel {
            Relation::Ge => (l - r) / scale,
            Relation::Le => (r - l) / scale,
            Relation::Eq => -(l - r).abs() / scale,
        },
        (Degenerate, Degenerate) => 0.0,
        (Degenerate, Number(_)) => match rel {
            Relation::Le => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        },
        (Number(_), Degenerate) => match rel {
            Relation::Ge => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub name: String,
    pub quantities: Vec<Quantity>,
    pub inequalities: Vec<Inequality>,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        VerificationReport {
            name: name.into(),
            quantities: Vec::new(),
            inequalities: Vec::new(),
            tolerance,
            notes: Vec::new(),
        }
    }

    /// Records a quantity, replacing any earlier one with the same label.
    pub fn record(&mut self, label: impl Into<String>, value: QuantityValue, unit: Unit) -> &mut Self {
        let label = label.into();
        let q = Quantity { label: label.clone(), value, unit };
        match self.quantities.iter_mut().find(|q| q.label == label) {
            Some(slot) => *slot = q,
            None => self.quantities.push(q),
        }
        self
    }

    pub fn quantity(&mut self, label: impl Into<String>, value: f64, unit: Unit) -> &mut Self {
        self.record(label, QuantityValue::Number(value), unit)
    }

    pub fn entropy(&mut self, label: impl Into<String>, h: Entropy) -> &mut Self {
        self.record(label, h.into(), Unit::Nats)
    }

    pub fn value(&self, label: &str) -> Option<QuantityValue> {
        self.quantities.iter().find(|q| q.label == label).map(|q| q.value)
    }

    pub fn number(&self, label: &str) -> Option<f64> {
        self.value(label).and_then(QuantityValue::number)
    }

    /// Adds `lhs rel rhs` over two recorded labels with unit scale.
    pub fn compare(&mut self, lhs: &str, rel: Relation, rhs: &str) -> &mut Self {
        self.relate(lhs, rel, rhs, 1.0)
    }

    /// Adds `lhs == rhs` with the margin divided by `scale`.
    pub fn equal(&mut self, lhs: &str, rhs: &str, scale: f64) -> &mut Self {
        self.relate(lhs, Relation::Eq, rhs, scale)
    }

    fn relate(&mut self, lhs: &str, rel: Relation, rhs: &str, scale: f64) -> &mut Self {
        let l = self.value(lhs).unwrap_or_else(|| panic!("unknown quantity `{lhs}`"));
        let r = self.value(rhs).unwrap_or_else(|| panic!("unknown quantity `{rhs}`"));
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        let margin = signed_margin(l, rel, r, scale);
        self.inequalities.push(Inequality {
            lhs: lhs.to_string(),
            rel,
            rhs: rhs.to_string(),
            margin,
            holds: margin >= -self.tolerance,
            scale,
        });
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.inequalities.iter().all(|i| i.holds)
    }

    pub fn find(&self, lhs: &str, rhs: &str) -> Option<&Inequality> {
        self.inequalities.iter().find(|i| i.lhs == lhs && i.rhs == rhs)
    }

    /// Smallest margin over all inequalities (`+inf` when there are none).
    pub fn worst_margin(&self) -> f64 {
        self.inequalities.iter().map(|i| i.margin).fold(f64::INFINITY, f64::min)
    }

    /// Entropy quantities rescaled from nats to bits, margins recomputed.
    pub fn in_bits(&self) -> VerificationReport {
        let mut out = self.clone();
        for q in &mut out.quantities {
            if q.unit == Unit::Nats {
                q.unit = Unit::Bits;
                if let QuantityValue::Number(x) = q.value {
                    q.value = QuantityValue::Number(x / std::f64::consts::LN_2);
                }
            }
        }
        for i in 0..out.inequalities.len() {
            let ineq = &out.inequalities[i];
            let l = out.value(&ineq.lhs).expect("recorded");
            let r = out.value(&ineq.rhs).expect("recorded");
            let margin = signed_margin(l, ineq.rel, r, ineq.scale);
            let ineq = &mut out.inequalities[i];
            ineq.margin = margin;
            ineq.holds = margin >= -out.tolerance;
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut quantities = Map::new();
        let mut units = Map::new();
        for q in &self.quantities {
            let v = match q.value {
                QuantityValue::Number(x) => json_number(x),
                QuantityValue::Degenerate => Value::String("degenerate".into()),
            };
            quantities.insert(q.label.clone(), v);
            units.insert(q.label.clone(), Value::String(q.unit.symbol().into()));
        }
        let inequalities: Vec<Value> = self
            .inequalities
            .iter()
            .map(|i| {
                json!({
                    "lhs": i.lhs,
                    "rel": i.rel.symbol(),
                    "rhs": i.rhs,
                    "margin": json_number(i.margin),
                    "holds": i.holds,
                })
            })
            .collect();
        json!({
            "name": self.name,
            "quantities": quantities,
            "units": units,
            "inequalities": inequalities,
            "tolerance": json_number(self.tolerance),
            "notes": self.notes,
            "pass": self.passed(),
        })
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("== {} ==\n", self.name));
        out.push_str(&format!("tolerance: {}\n", format_number(self.tolerance)));
        let width = self.quantities.iter().map(|q| q.label.len()).max().unwrap_or(0);
        if !self.quantities.is_empty() {
            out.push_str("quantities:\n");
        }
        for q in &self.quantities {
            let v = match q.value {
                QuantityValue::Number(x) if q.unit == Unit::Count && x.fract() == 0.0 => format!("{x:.0}"),
                QuantityValue::Number(x) => format_number(x),
                QuantityValue::Degenerate => "degenerate".to_string(),
            };
            let line = match q.unit {
                Unit::Dimensionless | Unit::Count => format!("  {:<width$}  {}", q.label, v),
                unit => format!("  {:<width$}  {} {}", q.label, v, unit.symbol()),
            };
            out.push_str(line.trim_end());
            out.push('\n');
        }
        if !self.inequalities.is_empty() {
            out.push_str("inequalities:\n");
        }
        let rel_width = self
            .inequalities
            .iter()
            .map(|i| i.lhs.len() + i.rhs.len() + 4)
            .max()
            .unwrap_or(0);
        for i in &self.inequalities {
            let statement = format!("{} {} {}", i.lhs, i.rel.symbol(), i.rhs);
            out.push_str(&format!(
                "  {:<rel_width$}  margin {}  {}\n",
                statement,
                format_number(i.margin),
                if i.holds { "ok" } else { "FAILED" }
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out.push_str(&format!("result: {}\n", if self.passed() { "PASS" } else { "FAIL" }));
        out
    }
}

fn json_number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

/// Ten significant digits, plain decimal for magnitudes in `[1e-5, 1e10)`,
/// scientific otherwise.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.9e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn network(topology: &Multigraph, r: &[f64]) -> Result<ResistiveNetwork> {
    ResistiveNetwork::new(topology.clone(), r.to_vec())
}

fn edge_sum(r: &[f64], r_bar: &[f64]) -> Result<Vec<f64>> {
    if r.len() != r_bar.len() {
        return Err(Error::DimensionMismatch { expected: r.len(), found: r_bar.len() });
    }
    Ok(r.iter().zip(r_bar).map(|(x, y)| x + y).collect())
}

/// `Reff(R + Rbar) >= Reff(R) + Reff(Rbar)` by three grounded solves.
pub fn check_superadditivity(
    topology: &Multigraph,
    r: &[f64],
    r_bar: &[f64],
    a: VertexId,
    b: VertexId,
    tol: f64,
) -> Result<VerificationReport> {
    let r_hat = edge_sum(r, r_bar)?;
    let reff = effective_resistance(&network(topology, r)?, a, b)?;
    let reff_bar = effective_resistance(&network(topology, r_bar)?, a, b)?;
    let reff_hat = effective_resistance(&network(topology, &r_hat)?, a, b)?;
    let mut rep = VerificationReport::new("superadditivity", tol);
    rep.quantity("R_eff", reff, Unit::Ohm)
        .quantity("Rbar_eff", reff_bar, Unit::Ohm)
        .quantity("Rhat_eff", reff_hat, Unit::Ohm)
        .quantity("R_eff + Rbar_eff", reff + reff_bar, Unit::Ohm)
        .compare("Rhat_eff", Relation::Ge, "R_eff + Rbar_eff");
    Ok(rep)
}

/// Second differences of `lambda -> Reff((1 - lambda) R0 + lambda R1)` on a
/// uniform grid, plus the midpoint inequality.
pub fn check_concavity_segment(
    topology: &Multigraph,
    r0: &[f64],
    r1: &[f64],
    grid_points: usize,
    a: VertexId,
    b: VertexId,
    tol: f64,
) -> Result<VerificationReport> {
    if grid_points < 3 {
        return Err(Error::InvalidArgument(format!("grid needs at least 3 points, got {grid_points}")));
    }
    if r0.len() != r1.len() {
        return Err(Error::DimensionMismatch { expected: r0.len(), found: r1.len() });
    }
    let along = |lambda: f64| -> Result<f64> {
        let r: Vec<f64> = r0.iter().zip(r1).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect();
        effective_resistance(&network(topology, &r)?, a, b)
    };
    let steps = (grid_points - 1) as f64;
    let values = (0..grid_points)
        .map(|i| along(i as f64 / steps))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = VerificationReport::new("concavity", tol);
    rep.quantity("zero", 0.0, Unit::Ohm);
    for (i, v) in values.iter().enumerate() {
        rep.quantity(format!("f[{i}]"), *v, Unit::Ohm);
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 1..grid_points - 1 {
        let d2 = values[i - 1] - 2.0 * values[i] + values[i + 1];
        worst = worst.max(d2);
        let label = format!("d2[{i}]");
        rep.quantity(label.clone(), d2, Unit::Ohm).compare(&label, Relation::Le, "zero");
    }
    rep.quantity("max d2", worst, Unit::Ohm);
    let mid = along(0.5)?;
    rep.quantity("f(mid)", mid, Unit::Ohm)
        .quantity("(f(0) + f(1))/2", 0.5 * (values[0] + values[grid_points - 1]), Unit::Ohm)
        .compare("f(mid)", Relation::Ge, "(f(0) + f(1))/2");
    Ok(rep)
}

/// The power chain
/// `Rhat_eff = sum Ihat^2 R + sum Ihat^2 Rbar >= sum I^2 R + sum Ibar^2 Rbar = R_eff + Rbar_eff`.
pub fn melvin_chain(
    topology: &Multigraph,
    r: &[f64],
    r_bar: &[f64],
    a: VertexId,
    b: VertexId,
    tol: f64,
) -> Result<VerificationReport> {
    let r_hat = edge_sum(r, r_bar)?;
    let (n, n_bar, n_hat) = (network(topology, r)?, network(topology, r_bar)?, network(topology, &r_hat)?);
    let i = thomson_flow(&n, a, b)?;
    let i_bar = thomson_flow(&n_bar, a, b)?;
    let i_hat = thomson_flow(&n_hat, a, b)?;
    let reff = effective_resistance(&n, a, b)?;
    let reff_bar = effective_resistance(&n_bar, a, b)?;
    let reff_hat = effective_resistance(&n_hat, a, b)?;

    let hat_on_r = dissipated_power_with(r, &i_hat)?;
    let hat_on_bar = dissipated_power_with(r_bar, &i_hat)?;
    let own_r = dissipated_power_with(r, &i)?;
    let own_bar = dissipated_power_with(r_bar, &i_bar)?;

    let mut rep = VerificationReport::new("melvin_chain", tol);
    rep.quantity("Rhat_eff", reff_hat, Unit::Ohm)
        .quantity("sum Ihat^2 R + sum Ihat^2 Rbar", hat_on_r + hat_on_bar, Unit::Watt)
        .quantity("sum I^2 R + sum Ibar^2 Rbar", own_r + own_bar, Unit::Watt)
        .quantity("R_eff + Rbar_eff", reff + reff_bar, Unit::Ohm)
        .quantity("sum Ihat^2 R", hat_on_r, Unit::Watt)
        .quantity("sum I^2 R", own_r, Unit::Watt)
        .quantity("sum Ihat^2 Rbar", hat_on_bar, Unit::Watt)
        .quantity("sum Ibar^2 Rbar", own_bar, Unit::Watt)
        .equal("Rhat_eff", "sum Ihat^2 R + sum Ihat^2 Rbar", reff_hat)
        .compare("sum Ihat^2 R + sum Ihat^2 Rbar", Relation::Ge, "sum I^2 R + sum Ibar^2 Rbar")
        .equal("sum I^2 R + sum Ibar^2 Rbar", "R_eff + Rbar_eff", reff + reff_bar)
        .compare("sum Ihat^2 R", Relation::Ge, "sum I^2 R")
        .compare("sum Ihat^2 Rbar", Relation::Ge, "sum Ibar^2 Rbar");
    Ok(rep)
}

fn finite_entropy(variance: f64, label: &str) -> Result<Entropy> {
    match entropy_scalar(variance, DEGENERATE_VARIANCE)? {
        Entropy::Degenerate => Err(Error::DegenerateEntropy(label.to_string())),
        h => Ok(h),
    }
}

/// The differential-entropy chain, with every step computed rather than
/// assumed:
///
/// ```text
/// h(Uhat_ab) = h(sum eps (X + Xbar) | Ahat)
///            >= h(sum eps (X + Xbar) | A, Abar)
///            = h(U_ab + Ubar_ab)
/// ```
///
/// The middle two terms come from the joint `2|E|` Gaussian `(X, Xbar)`:
/// `Ahat` rows are `(c | c)`, `A` rows `(c | 0)` and `Abar` rows `(0 | c)`
/// for every fundamental circuit sign vector `c`.
pub fn entropy_chain(
    topology: &Multigraph,
    r: &[f64],
    r_bar: &[f64],
    a: VertexId,
    b: VertexId,
    tol: f64,
) -> Result<VerificationReport> {
    let r_hat = edge_sum(r, r_bar)?;
    let (n, n_bar, n_hat) = (network(topology, r)?, network(topology, r_bar)?, network(topology, &r_hat)?);
    let field = build_free_field(&n, 0)?;
    let field_bar = build_free_field(&n_bar, 0)?;
    let field_hat = build_free_field(&n_hat, 0)?;

    let var_hat = field_hat.potential_difference_variance(a, b)?;
    let var_sum = field.potential_difference_variance(a, b)? + field_bar.potential_difference_variance(a, b)?;

    let e = topology.edge_count();
    let walk = field.potential_difference_functional(a, b)?;
    let joint_walk = DVector::from_iterator(2 * e, walk.iter().chain(walk.iter()).copied());
    let joint = independent_gaussian(r)?.stack_independent(&independent_gaussian(r_bar)?);

    let basis = fundamental_constraints(&n)?;
    let k = basis.len();
    let mut hat_rows = DMatrix::zeros(k, 2 * e);
    let mut split_rows = DMatrix::zeros(2 * k, 2 * e);
    for i in 0..k {
        let row = basis.rows().row(i);
        hat_rows.view_mut((i, 0), (1, e)).copy_from(&row);
        hat_rows.view_mut((i, e), (1, e)).copy_from(&row);
        split_rows.view_mut((i, 0), (1, e)).copy_from(&row);
        split_rows.view_mut((k + i, e), (1, e)).copy_from(&row);
    }
    let given_hat = condition_on_zero(&joint, &ConstraintSet::new(hat_rows))?;
    let given_split = condition_on_zero(&joint, &ConstraintSet::new(split_rows))?;
    let var_given_hat = linear_functional_variance(&given_hat, &joint_walk)?;
    let var_given_split = linear_functional_variance(&given_split, &joint_walk)?;

    const H_HAT: &str = "h(Uhat_ab)";
    const H_GIVEN_HAT: &str = "h(sum eps Xhat | Ahat)";
    const H_GIVEN_SPLIT: &str = "h(sum eps Xhat | A, Abar)";
    const H_SUM: &str = "h(U_ab + Ubar_ab)";
    const V_GIVEN_HAT: &str = "Var(sum eps Xhat | Ahat)";
    const V_GIVEN_SPLIT: &str = "Var(sum eps Xhat | A, Abar)";

    let mut rep = VerificationReport::new("entropy_chain", tol);
    rep.entropy(H_HAT, finite_entropy(var_hat, H_HAT)?)
        .entropy(H_GIVEN_HAT, finite_entropy(var_given_hat, H_GIVEN_HAT)?)
        .entropy(H_GIVEN_SPLIT, finite_entropy(var_given_split, H_GIVEN_SPLIT)?)
        .entropy(H_SUM, finite_entropy(var_sum, H_SUM)?)
        .quantity("Var(Uhat_ab)", var_hat, Unit::Variance)
        .quantity(V_GIVEN_HAT, var_given_hat, Unit::Variance)
        .quantity(V_GIVEN_SPLIT, var_given_split, Unit::Variance)
        .quantity("Var(U_ab) + Var(Ubar_ab)", var_sum, Unit::Variance)
        .equal(H_HAT, H_GIVEN_HAT, 1.0)
        .compare(H_GIVEN_HAT, Relation::Ge, H_GIVEN_SPLIT)
        .equal(H_GIVEN_SPLIT, H_SUM, 1.0)
        .compare(V_GIVEN_HAT, Relation::Ge, V_GIVEN_SPLIT);
    Ok(rep)
}

/// Jointly Gaussian `(Vhat, W, Wbar)` with `W`, `Wbar` independent and
/// mean zero, `Vhat = v_from_w . W + v_from_w_bar . Wbar`, and the rows of
/// `conditioning` selecting which functionals of `What = W + Wbar` (resp.
/// of `W` and `Wbar` separately) are conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixInstance {
    pub w_covariance: DMatrix<f64>,
    pub w_bar_covariance: DMatrix<f64>,
    pub v_from_w: DVector<f64>,
    pub v_from_w_bar: DVector<f64>,
    pub conditioning: DMatrix<f64>,
}

impl AppendixInstance {
    /// Conditions on the whole of `What` versus the whole of `(W, Wbar)`.
    pub fn full(
        w_covariance: DMatrix<f64>,
        w_bar_covariance: DMatrix<f64>,
        v_from_w: DVector<f64>,
        v_from_w_bar: DVector<f64>,
    ) -> Self {
        let n = w_covariance.nrows();
        AppendixInstance {
            w_covariance,
            w_bar_covariance,
            v_from_w,
            v_from_w_bar,
            conditioning: DMatrix::identity(n, n),
        }
    }

    /// Random instance of dimension `1..=max_dim`: covariances `A A^T` with
    /// `A` of random rank (so possibly singular), coefficients uniform in
    /// `[-1, 1]`, and `1..=max(1, n - 1)` random conditioning rows.
    pub fn random(max_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=max_dim.max(1));
        let psd = |rng: &mut ChaCha20Rng| {
            let rank = rng.random_range(1..=n);
            let a = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
            &a * a.transpose()
        };
        let w_covariance = psd(&mut rng);
        let w_bar_covariance = psd(&mut rng);
        let v_from_w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let v_from_w_bar = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let k = rng.random_range(1..=(n.saturating_sub(1)).max(1));
        let conditioning = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
        AppendixInstance { w_covariance, w_bar_covariance, v_from_w, v_from_w_bar, conditioning }
    }

    fn dim(&self) -> usize {
        self.w_covariance.nrows()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let shapes = [
            self.w_covariance.ncols(),
            self.w_bar_covariance.nrows(),
            self.w_bar_covariance.ncols(),
            self.v_from_w.len(),
            self.v_from_w_bar.len(),
            self.conditioning.ncols(),
        ];
        if let Some(&found) = shapes.iter().find(|&&s| s != n) {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
        Ok(())
    }
}

/// `h(Vhat | What = 0) >= h(Vhat | W = 0, Wbar = 0)`, plus the fact that
/// both conditional variances are unchanged when the conditioning value moves
/// to another point of the support.
pub fn appendix_check(instance: &AppendixInstance, tol: f64, seed: u64) -> Result<VerificationReport> {
    instance.validate()?;
    let n = instance.dim();
    let k = instance.conditioning.nrows();
    let w = GaussianVector::new(DVector::zeros(n), instance.w_covariance.clone())?;
    let w_bar = GaussianVector::new(DVector::zeros(n), instance.w_bar_covariance.clone())?;
    let joint = w.stack_independent(&w_bar);
    let v_hat = DVector::from_iterator(2 * n, instance.v_from_w.iter().chain(instance.v_from_w_bar.iter()).copied());

    let kmat = &instance.conditioning;
    let mut hat_rows = DMatrix::zeros(k, 2 * n);
    hat_rows.view_mut((0, 0), (k, n)).copy_from(kmat);
    hat_rows.view_mut((0, n), (k, n)).copy_from(kmat);
    let mut split_rows = DMatrix::zeros(2 * k, 2 * n);
    split_rows.view_mut((0, 0), (k, n)).copy_from(kmat);
    split_rows.view_mut((k, n), (k, n)).copy_from(kmat);
    let hat = ConstraintSet::new(hat_rows);
    let split = ConstraintSet::new(split_rows);

    let point = joint.sampler(seed).draw();
    let hat_value = hat.rows() * &point;
    let split_value = split.rows() * &point;

    let var = |set: &ConstraintSet, value: &DVector<f64>| -> Result<f64> {
        linear_functional_variance(&condition_on_value(&joint, set, value)?, &v_hat)
    };
    let var_hat0 = var(&hat, &DVector::zeros(k))?;
    let var_split0 = var(&split, &DVector::zeros(2 * k))?;
    let var_hat1 = var(&hat, &hat_value)?;
    let var_split1 = var(&split, &split_value)?;

    let prior = linear_functional_variance(&joint, &v_hat)?;
    let degenerate_below = DEGENERATE_VARIANCE * prior.max(1.0);
    let h_hat = entropy_scalar(var_hat0, degenerate_below)?;
    let h_split = entropy_scalar(var_split0, degenerate_below)?;

    let mut rep = VerificationReport::new("appendix_lemma", tol);
    rep.quantity("dim", n as f64, Unit::Count)
        .quantity("Var(Vhat)", prior, Unit::Variance)
        .quantity("Var(Vhat | What=0)", var_hat0, Unit::Variance)
        .quantity("Var(Vhat | W=0, Wbar=0)", var_split0, Unit::Variance)
        .quantity("Var(Vhat | What=w1)", var_hat1, Unit::Variance)
        .quantity("Var(Vhat | W=w1, Wbar=wbar1)", var_split1, Unit::Variance)
        .entropy("h(Vhat | What=0)", h_hat)
        .entropy("h(Vhat | W=0, Wbar=0)", h_split)
        .compare("h(Vhat | What=0)", Relation::Ge, "h(Vhat | W=0, Wbar=0)")
        .compare("Var(Vhat | What=0)", Relation::Ge, "Var(Vhat | W=0, Wbar=0)")
        .equal("Var(Vhat | What=w1)", "Var(Vhat | What=0)", var_hat0.max(1.0))
        .equal("Var(Vhat | W=w1, Wbar=wbar1)", "Var(Vhat | W=0, Wbar=0)", var_split0.max(1.0));
    Ok(rep)
}

/// `Reff(t R) == t Reff(R)`, relative to `t Reff(R)`.
pub fn check_scaling(
    topology: &Multigraph,
    r: &[f64],
    t: f64,
    a: VertexId,
    b: VertexId,
    tol: f64,
) -> Result<VerificationReport> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!("scale factor must be positive, got {t}")));
    }
    let base = effective_resistance(&network(topology, r)?, a, b)?;
    let scaled_r: Vec<f64> = r.iter().map(|x| t * x).collect();
    let scaled = effective_resistance(&network(topology, &scaled_r)?, a, b)?;
    let mut rep = VerificationReport::new("scaling", tol);
    rep.quantity("t", t, Unit::Dimensionless)
        .quantity("R_eff(R)", base, Unit::Ohm)
        .quantity("R_eff(tR)", scaled, Unit::Ohm)
        .quantity("t*R_eff(R)", t * base, Unit::Ohm)
        .equal("R_eff(tR)", "t*R_eff(R)", t * base);
    Ok(rep)
}

/// Raising one edge resistance by `delta` never lowers `Reff`.
#[allow(clippy::too_many_arguments)]
pub fn check_monotonicity(
    topology: &Multigraph,
    r: &[f64],
    edge: EdgeId,
    delta: f64,
    a: VertexId,
    b: VertexId,
    tol: f64,
) -> Result<VerificationReport> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    topology.edge(edge)?;
    let base = effective_resistance(&network(topology, r)?, a, b)?;
    let mut bumped_r = r.to_vec();
    bumped_r[edge] += delta;
    let bumped = effective_resistance(&network(topology, &bumped_r)?, a, b)?;
    let mut rep = VerificationReport::new("monotonicity", tol);
    rep.quantity("edge", edge as f64, Unit::Count)
        .quantity("delta", delta, Unit::Ohm)
        .quantity("R_eff(R)", base, Unit::Ohm)
        .quantity("R_eff(R + delta)", bumped, Unit::Ohm)
        .quantity("increase", bumped - base, Unit::Ohm)
        .compare("R_eff(R + delta)", Relation::Ge, "R_eff(R)");
    Ok(rep)
}

/// Empirical variance of `U_{a->b}` over `count` seeded draws of the free
/// field against `Reff`; passes when
/// `z = |empirical - Reff| / (Reff sqrt(2 / count)) <= 4`.
pub fn monte_carlo_variance_check(
    topology: &Multigraph,
    r: &[f64],
    a: VertexId,
    b: VertexId,
    count: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let n = network(topology, r)?;
    let reff = effective_resistance(&n, a, b)?;
    let field = build_free_field(&n, 0)?;
    let functional = field.potential_difference_functional(a, b)?;
    let mut sampler = field.edge_field().sampler(seed);
    let mut sum_sq = 0.0;
    for _ in 0..count {
        let u = functional.dot(&sampler.draw());
        sum_sq += u * u;
    }
    let empirical = sum_sq / count as f64;
    let z = (empirical - reff).abs() / (reff * (2.0 / count as f64).sqrt());
    let mut rep = VerificationReport::new("monte_carlo_variance", 0.0);
    rep.quantity("samples", count as f64, Unit::Count)
        .quantity("empirical Var(U_ab)", empirical, Unit::Variance)
        .quantity("R_eff", reff, Unit::Ohm)
        .quantity("z", z, Unit::Dimensionless)
        .quantity("z bound", MC_Z_BOUND, Unit::Dimensionless)
        .compare("z", Relation::Le, "z bound");
    if count < MC_LOW_POWER_COUNT {
        rep.note("low_power: too few samples for the z-score to be meaningful");
    }
    Ok(rep)
}

/// splitmix64 finalizer, used to derive independent per-instance seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A randomized desk-scale instance: connected multigraph on 2..=8 vertices
/// with at most 16 edges, two independent log-uniform `[0.1, 10]` resistance
/// assignments, and a distinct vertex pair.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub topology: Multigraph,
    pub r: Vec<f64>,
    pub r_bar: Vec<f64>,
    pub a: VertexId,
    pub b: VertexId,
}

pub const MAX_RANDOM_VERTICES: usize = 8;
pub const MAX_RANDOM_EDGES: usize = 16;

pub fn log_uniform_resistance(rng: &mut impl Rng) -> f64 {
    10f64.powf(rng.random_range(-1.0..=1.0))
}

impl RandomInstance {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=MAX_RANDOM_VERTICES);
        let m = rng.random_range((n - 1)..=MAX_RANDOM_EDGES);
        let mut pairs = Vec::with_capacity(m);
        for v in 1..n {
            let u = rng.random_range(0..v);
            pairs.push(if rng.random_bool(0.5) { (u, v) } else { (v, u) });
        }
        while pairs.len() < m {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v {
                pairs.push((u, v));
            }
        }
        pairs.shuffle(&mut rng);
        let topology = Multigraph::from_indices(n, &pairs).expect("spanning tree keeps the graph connected");
        let r = (0..m).map(|_| log_uniform_resistance(&mut rng)).collect();
        let r_bar = (0..m).map(|_| log_uniform_resistance(&mut rng)).collect();
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        RandomInstance { topology, r, r_bar, a, b }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: usize,
    pub tolerance: f64,
    pub grid_points: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0x00C0_FFEE, instances: 200, tolerance: DEFAULT_TOLERANCE, grid_points: 21 }
    }
}

#[derive(Debug, Clone)]
pub struct InstanceOutcome {
    pub index: usize,
    pub seed: u64,
    pub reports: Vec<VerificationReport>,
}

/// Names of the checks run on each suite instance, in report order.
pub const SUITE_CHECKS: [&str; 7] = [
    "superadditivity",
    "melvin_chain",
    "entropy_chain",
    "scaling",
    "monotonicity",
    "concavity",
    "appendix_lemma",
];

pub fn run_instance(index: usize, seed: u64, cfg: &SuiteConfig) -> Result<InstanceOutcome> {
    let inst = RandomInstance::generate(seed);
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(seed, 1));
    let (g, r, rb, a, b, tol) = (&inst.topology, &inst.r, &inst.r_bar, inst.a, inst.b, cfg.tolerance);
    let t = [0.5, 2.0, 10.0][rng.random_range(0..3)];
    let edge = rng.random_range(0..g.edge_count());
    let delta = log_uniform_resistance(&mut rng);
    let reports = vec![
        check_superadditivity(g, r, rb, a, b, tol)?,
        melvin_chain(g, r, rb, a, b, tol)?,
        entropy_chain(g, r, rb, a, b, tol)?,
        check_scaling(g, r, t, a, b, tol)?,
        check_monotonicity(g, r, edge, delta, a, b, tol)?,
        check_concavity_segment(g, r, rb, cfg.grid_points, a, b, tol)?,
        appendix_check(&AppendixInstance::random(6, mix_seed(seed, 2)), tol, mix_seed(seed, 3))?,
    ];
    Ok(InstanceOutcome { index, seed, reports })
}

/// Runs the randomized battery, instances fanned out over the rayon pool.
/// Instance `i` uses seed `mix_seed(cfg.seed, i)`.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<InstanceOutcome>> {
    (0..cfg.instances)
        .into_par_iter()
        .map(|i| run_instance(i, mix_seed(cfg.seed, i as u64), cfg))
        .collect()
}

/// Collapses suite outcomes into one report: per check, the failure count and
/// the worst margin seen, required to be at least `-tolerance`.
pub fn summarize_suite(cfg: &SuiteConfig, outcomes: &[InstanceOutcome]) -> VerificationReport {
    let mut rep = VerificationReport::new("suite", cfg.tolerance);
    rep.quantity("seed", cfg.seed as f64, Unit::Count)
        .quantity("instances", outcomes.len() as f64, Unit::Count)
        .quantity("zero", 0.0, Unit::Dimensionless);
    for (slot, name) in SUITE_CHECKS.iter().enumerate() {
        let failures = outcomes.iter().filter(|o| !o.reports[slot].passed()).count();
        let worst = outcomes
            .iter()
            .map(|o| o.reports[slot].worst_margin())
            .fold(f64::INFINITY, f64::min);
        let label = format!("worst margin [{name}]");
        rep.quantity(format!("failures [{name}]"), failures as f64, Unit::Count)
            .quantity(label.clone(), worst, Unit::Dimensionless)
            .compare(&label, Relation::Ge, "zero");
    }
    rep
}
