//! The Gaussian free field of a resistive network.
//!
//! Edge variables are independent `N(0, R_e)`, then conditioned so that the
//! signed sum around every fundamental circuit vanishes. The vertex field
//! `eta` is recovered by summing signed edge variables along tree paths from a
//! reference vertex.

use nalgebra::{DMatrix, DVector};

use crate::electric::ResistiveNetwork;
use crate::error::{Error, Result};
use crate::gaussian::{condition_on_zero, independent_gaussian, linear_functional_variance, ConstraintSet, GaussianVector};
use crate::graph::{
    enumerate_circuits_with_limit, fundamental_circuits, simple_walks, spanning_tree, walk_between, Circuit, VertexId,
};
use crate::linalg::psd_rank;

/// Default cap on simple walks enumerated by [`FreeField::path_independence_check`].
pub const DEFAULT_WALK_LIMIT: usize = 20_000;

const CIRCUIT_VARIANCE_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FreeField {
    network: ResistiveNetwork,
    edge_field: GaussianVector,
    reference_vertex: VertexId,
    constraint_basis: ConstraintSet,
}

fn circuit_constraints(n: &ResistiveNetwork, circuits: &[Circuit]) -> Result<ConstraintSet> {
    let g = n.graph();
    let rows = circuits
        .iter()
        .map(|c| c.sign_vector(g))
        .collect::<Result<Vec<_>>>()?;
    ConstraintSet::from_rows(g.edge_count(), &rows)
}

/// Sign vectors of the fundamental circuits of the BFS spanning tree.
pub fn fundamental_constraints(n: &ResistiveNetwork) -> Result<ConstraintSet> {
    let g = n.graph();
    circuit_constraints(n, &fundamental_circuits(g, &spanning_tree(g))?)
}

/// Sign vectors of every circuit of the graph.
pub fn all_circuit_constraints(n: &ResistiveNetwork, limit: usize) -> Result<ConstraintSet> {
    circuit_constraints(n, &enumerate_circuits_with_limit(n.graph(), limit)?)
}

pub fn build_free_field(n: &ResistiveNetwork, v_star: VertexId) -> Result<FreeField> {
    FreeField::with_constraints(n, v_star, fundamental_constraints(n)?)
}

impl FreeField {
    /// Conditions the independent edge Gaussian on `constraints`, which
    /// must span the cycle space.
    pub fn with_constraints(
        n: &ResistiveNetwork,
        v_star: VertexId,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        n.graph().check_vertex(v_star)?;
        let base = independent_gaussian(n.resistances())?;
        let edge_field = condition_on_zero(&base, &constraints)?;
        let field = FreeField {
            network: n.clone(),
            edge_field,
            reference_vertex: v_star,
            constraint_basis: constraints,
        };
        field.check_invariants()?;
        Ok(field)
    }

    fn check_invariants(&self) -> Result<()> {
        let basis = fundamental_constraints(&self.network)?;
        for i in 0..basis.len() {
            let row = basis.rows().row(i).transpose();
            let v = linear_functional_variance(&self.edge_field, &row)?;
            if v > CIRCUIT_VARIANCE_TOL {
                return Err(Error::InvariantViolation(format!(
                    "fundamental circuit {i} keeps variance {v:e}"
                )));
            }
        }
        let expected = self.network.graph().vertex_count() - 1;
        let rank = self.rank();
        if rank != expected {
            return Err(Error::InvariantViolation(format!(
                "edge field has rank {rank}, expected {expected}"
            )));
        }
        Ok(())
    }

    pub fn network(&self) -> &ResistiveNetwork {
        &self.network
    }

    pub fn edge_field(&self) -> &GaussianVector {
        &self.edge_field
    }

    pub fn reference_vertex(&self) -> VertexId {
        self.reference_vertex
    }

    pub fn constraint_basis(&self) -> &ConstraintSet {
        &self.constraint_basis
    }

    pub fn rank(&self) -> usize {
        psd_rank(self.edge_field.covariance(), RANK_TOL)
    }

    /// Sign vector of the tree walk `a -> b`; applied to the edge field it
    /// gives `eta_b - eta_a`.
    pub fn potential_difference_functional(&self, a: VertexId, b: VertexId) -> Result<DVector<f64>> {
        let g = self.network.graph();
        walk_between(g, a, b)?.sign_vector(g)
    }

    pub fn potential_difference_variance(&self, a: VertexId, b: VertexId) -> Result<f64> {
        linear_functional_variance(&self.edge_field, &self.potential_difference_functional(a, b)?)
    }

    /// Row `v` of the `|V| x |E|` map taking edge variables to `eta`.
    fn eta_map(&self) -> Result<DMatrix<f64>> {
        let g = self.network.graph();
        let mut t = DMatrix::zeros(g.vertex_count(), g.edge_count());
        for v in 0..g.vertex_count() {
            if v != self.reference_vertex {
                let row = self.potential_difference_functional(self.reference_vertex, v)?;
                t.set_row(v, &row.transpose());
            }
        }
        Ok(t)
    }

    /// Law of `(eta_v)` with `eta` pinned to zero at the reference vertex.
    pub fn eta_field(&self) -> Result<GaussianVector> {
        self.edge_field.linear_map(&self.eta_map()?)
    }

    pub fn path_independence_check(&self, a: VertexId, b: VertexId) -> Result<f64> {
        self.path_independence_check_with_limit(a, b, DEFAULT_WALK_LIMIT)
    }

    /// Largest variance of the difference between two simple `a -> b` walk
    /// functionals. Zero for a tree.
    pub fn path_independence_check_with_limit(&self, a: VertexId, b: VertexId, limit: usize) -> Result<f64> {
        let g = self.network.graph();
        let walks = simple_walks(g, a, b, limit)?;
        let cov = self.edge_field.covariance();
        let vectors = walks
            .iter()
            .map(|w| w.sign_vector(g))
            .collect::<Result<Vec<_>>>()?;
        let images: Vec<DVector<f64>> = vectors.iter().map(|s| cov * s).collect();
        let mut worst = 0.0f64;
        for i in 0..vectors.len() {
            for j in (i + 1)..vectors.len() {
                let d = &vectors[i] - &vectors[j];
                let v = d.dot(&(&images[i] - &images[j]));
                worst = worst.max(v);
            }
        }
        Ok(worst)
    }
}
