//! P1 finite elements on structured meshes of the interval and the square.

mod assembly;
mod function;
mod load;
mod mesh;
mod projection;

pub use assembly::{assemble, assemble_full, FemSystem};
pub use function::FemFunction;
pub use load::{assemble_noise_load, LoadRule, ModeLoads};
pub use mesh::{build_mesh, Mesh};
pub use projection::{l2_error, l2_error_sq_with, l2_error_with, ritz_project, ritz_project_rhs, ritz_project_with};
