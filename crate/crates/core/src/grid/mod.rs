//! Cell grids, coefficient data and matrix assembly.

mod assemble;
mod disc;
mod functions;

use serde::{Deserialize, Serialize};

pub use assemble::{
    assemble_bloch, assemble_family, assemble_family_cells, assemble_form, assemble_perturbation, assemble_scaled,
    form_to_operator, operator_norm_estimate, HERMITIAN_TOL, KERNEL_SYMMETRIZE_TOL,
};
pub use disc::{
    build_grid, inner_product, Boundary, CellGeometry, Discretization, GridFunction, Scheme, MAX_TOTAL_NODES,
};
pub use functions::{CoefficientEntry, CoefficientTable, FourierKernel, FourierTerm, KernelTerm, PeriodicFunction};

use crate::error::{Error, Result};

/// `Op₀ = Σ (-1)^α ∂^α A_αβ ∂^β` of order `m ∈ {1, 2}` with real, symmetric,
/// periodic coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicOperatorSpec {
    coefficients: CoefficientTable,
    c0: f64,
}

impl PeriodicOperatorSpec {
    pub fn new(coefficients: CoefficientTable, c0: f64) -> Result<Self> {
        let m = coefficients.order();
        if m != 1 && m != 2 {
            return Err(Error::InvalidInput(format!("operator order must be 1 or 2, got {m}")));
        }
        if !(c0 > 0.0) {
            return Err(Error::InvalidInput(format!("ellipticity constant must be positive, got {c0}")));
        }
        Ok(Self { coefficients, c0 })
    }

    /// `(-d²/dx²)^m`.
    pub fn free(m: usize) -> Self {
        let table = CoefficientTable::zeros(m).with(m, m, PeriodicFunction::constant(1.0));
        Self::new(table, 1.0).expect("valid free operator")
    }

    /// `-d²/dx² + v`.
    pub fn schrodinger(v: PeriodicFunction) -> Self {
        let table = CoefficientTable::zeros(1)
            .with(1, 1, PeriodicFunction::constant(1.0))
            .with(0, 0, v);
        Self::new(table, 1.0).expect("valid Schrödinger operator")
    }

    /// `-(a u')'`; `c0` must lie below `min a`.
    pub fn divergence(a: PeriodicFunction, c0: f64) -> Result<Self> {
        Self::new(CoefficientTable::zeros(1).with(1, 1, a), c0)
    }

    pub fn order(&self) -> usize {
        self.coefficients.order()
    }

    pub fn coefficients(&self) -> &CoefficientTable {
        &self.coefficients
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }
}

/// A bounded symmetric cell operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationOp {
    Multiplication {
        v: PeriodicFunction,
    },
    IntegralKernel {
        kernel: FourierKernel,
    },
    DifferentialTerm {
        #[serde(with = "table_serde")]
        coefficients: CoefficientTable,
    },
}

impl PerturbationOp {
    pub fn zero() -> Self {
        PerturbationOp::Multiplication {
            v: PeriodicFunction::zero(),
        }
    }

    pub fn multiplication(v: PeriodicFunction) -> Self {
        PerturbationOp::Multiplication { v }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PerturbationOp::Multiplication { v } => v.is_zero(),
            PerturbationOp::IntegralKernel { kernel } => kernel.is_zero(),
            PerturbationOp::DifferentialTerm { coefficients } => coefficients.is_zero(),
        }
    }

    /// Constant multiplier, if the operator is one.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            PerturbationOp::Multiplication { v } if v.terms().iter().all(|t| t.k == 0) => Some(v.mean()),
            _ => None,
        }
    }
}

impl Default for PerturbationOp {
    fn default() -> Self {
        Self::zero()
    }
}

mod table_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{CoefficientEntry, CoefficientTable};

    pub fn serialize<S: Serializer>(t: &CoefficientTable, s: S) -> Result<S::Ok, S::Error> {
        t.to_entries().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CoefficientTable, D::Error> {
        let entries = Vec::<CoefficientEntry>::deserialize(d)?;
        let order = entries.iter().map(|e| e.alpha.max(e.beta)).max().unwrap_or(0);
        CoefficientTable::from_entries(order, &entries).map_err(|e| serde::de::Error::custom(e.join("; ")))
    }
}

/// `L(t) = t L1 + t² L2 + t³ (L3a + t L3b)` for `|t| <= t_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFamily {
    #[serde(default)]
    pub l1: PerturbationOp,
    #[serde(default)]
    pub l2: PerturbationOp,
    #[serde(default)]
    pub l3a: PerturbationOp,
    #[serde(default)]
    pub l3b: PerturbationOp,
    pub t_max: f64,
}

impl PerturbationFamily {
    pub fn new(l1: PerturbationOp, l2: PerturbationOp, l3a: PerturbationOp, l3b: PerturbationOp, t_max: f64) -> Self {
        Self { l1, l2, l3a, l3b, t_max }
    }

    /// `L(t) = t L1`.
    pub fn linear(l1: PerturbationOp, t_max: f64) -> Self {
        Self::new(l1, PerturbationOp::zero(), PerturbationOp::zero(), PerturbationOp::zero(), t_max)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Components with the power of `t` multiplying them.
    pub fn components(&self) -> [(&PerturbationOp, u32); 4] {
        [(&self.l1, 1), (&self.l2, 2), (&self.l3a, 3), (&self.l3b, 4)]
    }
}
