//! Named construction of the built-in diffeomorphisms, so configuration files
//! can refer to a geometry by name and a flat parameter map.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::diffeo::{Banana, Diffeomorphism, Identity, River, SinhShift, Spiral};
use crate::error::{Error, Result};

pub const GEOMETRIES: &[&str] = &["identity", "river", "spiral", "banana", "sinh"];

/// Builds a diffeomorphism from its registry name and parameters.
///
/// Omitted parameters take the values used in the reference experiments
/// (river β=5, η=0.25; spiral β=0.25; banana a=1/9, z=0). `identity` requires
/// `dim`. Unrecognised parameter names are rejected.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<Arc<dyn Diffeomorphism>> {
    let allowed: &[&str] = match name {
        "identity" => &["dim"],
        "river" => &["beta", "eta"],
        "spiral" => &["beta"],
        "banana" => &["a", "z"],
        "sinh" => &[],
        other => return Err(Error::UnknownGeometry(other.to_string())),
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidInput(format!(
            "unknown parameter `{bad}` for geometry `{name}` (expected one of {allowed:?})"
        )));
    }
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);

    Ok(match name {
        "identity" => {
            let dim = params.get("dim").copied().ok_or(Error::MissingParameter {
                geometry: name.to_string(),
                param: "dim",
            })?;
            if dim < 1.0 || dim.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "identity dim must be a positive integer (got {dim})"
                )));
            }
            Arc::new(Identity::new(dim as usize))
        }
        "river" => Arc::new(River::new(get("beta", 5.0), get("eta", 0.25))?),
        "spiral" => Arc::new(Spiral::new(get("beta", 0.25))?),
        "banana" => Arc::new(Banana::new(get("a", 1.0 / 9.0), get("z", 0.0))?),
        "sinh" => Arc::new(SinhShift),
        _ => unreachable!(),
    })
}
