//! Dense linear-algebra kernels and spectral projections.

mod cholesky;
mod matrix;
mod spectral;

pub use cholesky::Cholesky;
pub use matrix::{add_vec, axpy, dist, dot, inf_norm, norm, sq_dist, sub_vec, Matrix, SymMatrix};
pub use spectral::{
    pd_inv_sqrt, project_psd, project_spectral_box, project_spectral_norm_ball, psd_sqrt,
    singular_values, svd, sym_eig, Spectrum, Svd, NOT_PSD_TOL, PSD_TOL,
};
