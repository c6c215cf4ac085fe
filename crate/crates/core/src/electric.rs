//! Resistive networks under a unit current source: Laplacian, node voltages,
//! effective resistance, Thomson flows and Kirchhoff-law residuals.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{fundamental_circuits, spanning_tree, walk_between, EdgeId, Multigraph, VertexId};

/// Smallest accepted edge resistance; keeps every conductance finite.
pub const MIN_RESISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ResistiveNetwork {
    graph: Multigraph,
    resistances: Vec<f64>,
}

impl ResistiveNetwork {
    pub fn new(graph: Multigraph, resistances: Vec<f64>) -> Result<Self> {
        if resistances.len() != graph.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.edge_count(),
                found: resistances.len(),
            });
        }
        for (edge, &value) in resistances.iter().enumerate() {
            if !value.is_finite() || value < MIN_RESISTANCE {
                return Err(Error::InvalidResistance { edge, value });
            }
        }
        Ok(ResistiveNetwork { graph, resistances })
    }

    /// Same topology, new resistances.
    pub fn with_resistances(&self, resistances: Vec<f64>) -> Result<Self> {
        Self::new(self.graph.clone(), resistances)
    }

    pub fn graph(&self) -> &Multigraph {
        &self.graph
    }

    pub fn resistances(&self) -> &[f64] {
        &self.resistances
    }

    pub fn resistance(&self, e: EdgeId) -> f64 {
        self.resistances[e]
    }

    fn check_pair(&self, a: VertexId, b: VertexId) -> Result<()> {
        self.graph.check_vertex(a)?;
        self.graph.check_vertex(b)?;
        if a == b {
            return Err(Error::SameVertex(a));
        }
        Ok(())
    }

    fn check_flow(&self, f: &FlowVector) -> Result<()> {
        if f.currents.len() != self.graph.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: self.graph.edge_count(),
                found: f.currents.len(),
            });
        }
        Ok(())
    }
}

/// Signed current per edge, positive in the canonical `tail -> head` direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVector {
    pub currents: DVector<f64>,
}

impl FlowVector {
    pub fn new(currents: DVector<f64>) -> Result<Self> {
        if let Some(bad) = currents.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("current on edge {bad} is not finite")));
        }
        Ok(FlowVector { currents })
    }

    pub fn zeros(edge_count: usize) -> Self {
        FlowVector { currents: DVector::zeros(edge_count) }
    }

    pub fn from_slice(currents: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(currents))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageVector {
    pub potentials: DVector<f64>,
    pub ground: VertexId,
}

/// Weighted Laplacian: off-diagonal `(i, j)` is minus the total conductance
/// between `i` and `j`, diagonal entries make every row sum to zero.
pub fn laplacian(n: &ResistiveNetwork) -> DMatrix<f64> {
    let size = n.graph.vertex_count();
    let mut l = DMatrix::zeros(size, size);
    for (e, edge) in n.graph.edges().iter().enumerate() {
        let c = 1.0 / n.resistances[e];
        l[(edge.tail, edge.tail)] += c;
        l[(edge.head, edge.head)] += c;
        l[(edge.tail, edge.head)] -= c;
        l[(edge.head, edge.tail)] -= c;
    }
    l
}

/// Potentials with `b` grounded when a unit current enters at `a` and leaves
/// at `b`. Solved by Cholesky on the Laplacian with row and column `b` removed.
pub fn node_voltages(n: &ResistiveNetwork, a: VertexId, b: VertexId) -> Result<VoltageVector> {
    n.check_pair(a, b)?;
    let l = laplacian(n);
    let size = l.nrows();
    let keep: Vec<usize> = (0..size).filter(|&v| v != b).collect();
    let reduced = l.select_rows(&keep).select_columns(&keep);
    let mut rhs = DVector::zeros(size - 1);
    let slot = keep.iter().position(|&v| v == a).expect("a is kept");
    rhs[slot] = 1.0;
    let solved = Cholesky::new(reduced)
        .ok_or(Error::SingularSystem)?
        .solve(&rhs);
    let mut potentials = DVector::zeros(size);
    for (i, &v) in keep.iter().enumerate() {
        potentials[v] = solved[i];
    }
    Ok(VoltageVector { potentials, ground: b })
}

pub fn effective_resistance(n: &ResistiveNetwork, a: VertexId, b: VertexId) -> Result<f64> {
    Ok(node_voltages(n, a, b)?.potentials[a])
}

/// The physical unit flow: Ohm's law applied to [`node_voltages`].
pub fn thomson_flow(n: &ResistiveNetwork, a: VertexId, b: VertexId) -> Result<FlowVector> {
    let v = node_voltages(n, a, b)?;
    let currents = DVector::from_iterator(
        n.graph.edge_count(),
        n.graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| (v.potentials[edge.tail] - v.potentials[edge.head]) / n.resistances[e]),
    );
    Ok(FlowVector { currents })
}

/// Minimum-power unit flow found without node voltages.
///
/// Feasible flows are `f0 + C^T t` where `f0` routes the unit current along
/// the tree path `a -> b` and the rows of `C` are fundamental-circuit sign
/// vectors. Minimizing `sum_e R_e f_e^2` over `t` gives the normal equations
/// `(C D C^T) t = -C D f0` with `D = diag(R)`.
pub fn min_energy_flow_oracle(n: &ResistiveNetwork, a: VertexId, b: VertexId) -> Result<FlowVector> {
    n.check_pair(a, b)?;
    let g = &n.graph;
    let particular = walk_between(g, a, b)?.sign_vector(g)?;
    let circuits = fundamental_circuits(g, &spanning_tree(g))?;
    if circuits.is_empty() {
        return Ok(FlowVector { currents: particular });
    }
    let mut c = DMatrix::zeros(circuits.len(), g.edge_count());
    for (i, circuit) in circuits.iter().enumerate() {
        c.set_row(i, &circuit.sign_vector(g)?.transpose());
    }
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&n.resistances));
    let cd = &c * &d;
    let normal = &cd * c.transpose();
    let rhs = -(&cd * &particular);
    let t = Cholesky::new(normal).ok_or(Error::SingularSystem)?.solve(&rhs);
    Ok(FlowVector { currents: particular + c.transpose() * t })
}

/// `sum_e I_e^2 R_e`.
pub fn dissipated_power(n: &ResistiveNetwork, f: &FlowVector) -> Result<f64> {
    dissipated_power_with(&n.resistances, f)
}

/// Power of `f` against an arbitrary resistance assignment of matching length.
pub fn dissipated_power_with(resistances: &[f64], f: &FlowVector) -> Result<f64> {
    if f.currents.len() != resistances.len() {
        return Err(Error::DimensionMismatch {
            expected: resistances.len(),
            found: f.currents.len(),
        });
    }
    Ok(f.currents.iter().zip(resistances).map(|(i, r)| i * i * r).sum())
}

/// Largest deviation from current conservation with source `+1` at `a` and
/// `-1` at `b`.
pub fn kcl_residual(n: &ResistiveNetwork, f: &FlowVector, a: VertexId, b: VertexId) -> Result<f64> {
    n.check_flow(f)?;
    n.check_pair(a, b)?;
    let outflow = n.graph.incidence_matrix() * &f.currents;
    Ok(outflow
        .iter()
        .enumerate()
        .map(|(v, out)| {
            let source = if v == a {
                1.0
            } else if v == b {
                -1.0
            } else {
                0.0
            };
            (out - source).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest absolute signed voltage-drop sum around a fundamental circuit.
pub fn kvl_residual(n: &ResistiveNetwork, f: &FlowVector) -> Result<f64> {
    n.check_flow(f)?;
    let g = &n.graph;
    let tree: BTreeSet<EdgeId> = spanning_tree(g);
    let mut worst = 0.0f64;
    for c in fundamental_circuits(g, &tree)? {
        let drop: f64 = c
            .edges()
            .iter()
            .zip(c.signs())
            .map(|(&e, &s)| f64::from(s) * f.currents[e] * n.resistances[e])
            .sum();
        worst = worst.max(drop.abs());
    }
    Ok(worst)
}
