//! Exact references, error norms and the checks behind the refinement tables.

pub mod checks;
pub mod exact;
pub mod expansion;
pub mod norms;
pub mod report;

pub use checks::{
    commutativity_defect, mass_rank, orthonormality_defect, structural_check, Polynomial,
    StructuralReport,
};
pub use exact::{ExactSolution, ManufacturedPoisson, Mode};
pub use expansion::{expansion_residual, DiscretePair, ExactPair, ExpansionTerms};
pub use norms::{
    energy_terms, l2_error, l2_norm, triple_norm, triple_norm_1, triple_norm_error, v_norm,
    EnergyTerms,
};
pub use report::{
    convergence_order, eigen_error_report, lower_bound_check, sci, ConvergenceTable, EigenErrorRow,
    LowerBoundReport, Violation,
};
