//! Catalog of maps and manifolds, plus the perturbation and composition
//! constructors.

pub mod gdsm;
pub mod manifold;
pub mod normal_forms;
pub mod perturb;

pub use gdsm::{make_gdsm, psi_central_to_linear, psi_linear_to_central, GdsmSpec, GdsmVariant};
pub use manifold::{
    chart_atlas, euclidean_box, graph_curve, Chart, ChartPoint, ChartedManifold, ChartedMap,
    ManifoldKind,
};
pub use normal_forms::{normal_form, NormalForm};
pub use perturb::{compose, perturb, LinearPerturbation};
