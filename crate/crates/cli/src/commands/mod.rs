pub mod average;
pub mod compare;
pub mod estimate;
pub mod fit_mcmc;
pub mod fit_vb;
pub mod simulate;

use std::path::Path;

/// Path as stored in output metadata.
pub(crate) fn display(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}
