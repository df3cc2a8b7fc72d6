//! Level-set approximants, surface measure, densities and perimeter.

mod boundary;
mod density;
mod extract;
mod levels;
mod locate;
mod mesh;
mod perimeter;

pub use boundary::boundary_mesh;
pub use density::{classify_density, density_ratio, DensityClass, DensityKind, DELTA_CLS};
pub use extract::{extract_level_set, Approximant};
pub use levels::{band_levels, select_levels};
pub use locate::{FacetLocator, MidpointLocator};
pub use mesh::{surface_measure, Facet, SurfaceMesh};
pub use perimeter::{coarea_check, gradient_mass, perimeter, richardson, CoareaResult, PerimeterResult};

pub use crate::measures::symdiff_measure;
