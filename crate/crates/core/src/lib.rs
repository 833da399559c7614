//! Generation, verification and traffic accounting of fused flux-divergence
//! kernels for the hyperbolised artificial-compressibility equations on
//! tensor-product hexahedral elements.

pub mod equations;
pub mod fr;
pub mod codegen;
pub mod memory;
pub mod sim;
