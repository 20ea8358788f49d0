//! Multivariate polynomials, polynomial dictionaries and box quadrature.

mod dictionary;
pub mod legendre;
mod monomial;
mod polynomial;
mod quadrature;

pub use dictionary::{
    affine_substitute, BasisDescriptor, BasisDictionary, BasisKind, BasisPoly, DomainBox,
    Product, Projection,
};
pub use monomial::{count_up_to, monomials_of_degree, monomials_up_to, Monomial};
pub use polynomial::{divergence_of_field, Polynomial};
pub use quadrature::{half_slabs, quadrature_moments, quadrature_order};
