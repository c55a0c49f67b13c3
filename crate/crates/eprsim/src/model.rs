//! Identifiers for the emission models the simulator understands.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The emission model behind an experiment or an analytic reference curve.
///
/// * `LockedMode` - pairs of orthogonal fields locked to the analyzer-frame
///   axes, mode index redrawn per pair.
/// * `Furry` - independent single-mode signals sharing one uniformly random
///   orientation, the arms a quarter turn apart.
/// * `Barut` - anti-aligned classical spin pairs with an axis uniform on the
///   sphere.
/// * `QmOracle` - no event stream; the full-visibility reference curve
///   -cos(2 theta) used for comparisons.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    #[default]
    LockedMode,
    Furry,
    Barut,
    QmOracle,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::LockedMode, Model::Furry, Model::Barut, Model::QmOracle];

    /// Stable kebab-case identifier used in configs, CSV columns and flags.
    pub fn id(self) -> &'static str {
        match self {
            Model::LockedMode => "locked-mode",
            Model::Furry => "furry",
            Model::Barut => "barut",
            Model::QmOracle => "qm-oracle",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Model::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown model id {s:?}; expected one of locked-mode, furry, barut, qm-oracle"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for m in Model::ALL {
            assert_eq!(m.id().parse::<Model>().unwrap(), m);
        }
    }

    #[test]
    fn unknown_id_is_config_error() {
        let err = "bohm".parse::<Model>().unwrap_err();
        assert_eq!(err.kind(), "config");
    }

    #[test]
    fn serde_uses_the_same_ids() {
        for m in Model::ALL {
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("{:?}", m.id()));
            assert_eq!(serde_json::from_str::<Model>(&json).unwrap(), m);
        }
    }
}
