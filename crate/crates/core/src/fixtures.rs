//! Bundled fixtures. Files are embedded at build time; setting
//! `NOETHER_FIXTURES` to a directory reads them from disk instead.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::algebra::OperatorAlgebra;
use crate::mutation::Overrides;
use crate::reachability::MRDescriptor;
use crate::spec::{parse_algebra, parse_config, parse_mr, parse_sut, MutatorConfig, ParseError};
use crate::sut::SutProgram;

pub const ENV_VAR: &str = "NOETHER_FIXTURES";

macro_rules! embed {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../fixtures/", $path)))),*]
    };
}

static EMBEDDED: &[(&str, &str)] = embed![
    "boltzmann.alg",
    "pwr.alg",
    "equivariant.alg",
    "sort.alg",
    "ffn.alg",
    "relational.alg",
    "overrides.cfg",
    "reproduce.cfg",
    "mr/rho_nonadd.mr",
    "mr/rho_mtc_bor.mr",
    "mr/rho_rot.mr",
    "mr/rho_adj.mr",
    "mr/rho_train_rev.mr",
    "mr/rho_join_comm.mr",
    "mr/only_o1.mr",
    "mr/only_o2.mr",
    "mr/only_o3.mr",
    "mr/only_o4.mr",
    "mr/only_o5.mr",
    "mr/set_l/l_rotation.mr",
    "mr/set_l/l_width.mr",
    "mr/set_l/l_noise.mr",
    "mr/set_l/l_label_flip.mr",
    "mr/set_l/l_adversarial.mr",
    "mr/set_b/b_idempotence.mr",
    "mr/set_b/b_noise.mr",
    "mr/set_b/b_label_flip.mr",
    "mr/set_b/b_interpolation.mr",
    "mr/set_b/b_confidence.mr",
    "suts/midpoint.sut",
    "suts/clamp.sut",
    "suts/signum.sut",
    "suts/gcd.sut",
    "suts/lcm.sut",
    "suts/hypot.sut",
    "suts/exact_log2.sut",
    "suts/is_sequence.sut",
    "suts/complex_add_re.sut",
    "suts/power.sut",
];

pub const ALGEBRAS: [&str; 6] = ["boltzmann", "pwr", "equivariant", "sort", "ffn", "relational"];

/// The ten zoo SUTs in presentation order.
pub const SUTS: [&str; 10] = [
    "midpoint",
    "clamp",
    "signum",
    "gcd",
    "lcm",
    "hypot",
    "exact_log2",
    "is_sequence",
    "complex_add_re",
    "power",
];

/// SUTs declared homogeneous of degree one or scale-invariant.
pub const HOMOGENEOUS_SUTS: [&str; 6] = ["midpoint", "clamp", "signum", "gcd", "lcm", "hypot"];

pub const SET_L: [&str; 5] = ["l_rotation", "l_width", "l_noise", "l_label_flip", "l_adversarial"];
pub const SET_B: [&str; 5] = ["b_idempotence", "b_noise", "b_label_flip", "b_interpolation", "b_confidence"];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture `{0}` not found")]
    Missing(String),
    #[error("reading `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Embedded,
    Dir(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Fixtures {
    pub source: Source,
}

impl Fixtures {
    /// Relative paths of every bundled fixture.
    pub fn embedded_paths() -> impl Iterator<Item = &'static str> {
        EMBEDDED.iter().map(|(p, _)| *p)
    }

    pub fn embedded() -> Self {
        Fixtures { source: Source::Embedded }
    }

    /// Disk directory from the environment when set, embedded otherwise.
    pub fn from_env() -> Self {
        match std::env::var_os(ENV_VAR) {
            Some(d) if !d.is_empty() => Fixtures { source: Source::Dir(d.into()) },
            _ => Self::embedded(),
        }
    }

    pub fn read(&self, rel: &str) -> Result<String, FixtureError> {
        match &self.source {
            Source::Embedded => EMBEDDED
                .iter()
                .find(|(p, _)| *p == rel)
                .map(|(_, t)| t.to_string())
                .ok_or_else(|| FixtureError::Missing(rel.to_string())),
            Source::Dir(d) => {
                let path = d.join(rel);
                std::fs::read_to_string(&path).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::NotFound {
                        FixtureError::Missing(rel.to_string())
                    } else {
                        FixtureError::Io { path: path.display().to_string(), source: e }
                    }
                })
            }
        }
    }

    pub fn algebra(&self, name: &str) -> Result<OperatorAlgebra, FixtureError> {
        let rel = format!("{name}.alg");
        Ok(parse_algebra(&self.read(&rel)?, &rel)?)
    }

    /// Descriptor by bare name; the set directories are searched too.
    pub fn mr(&self, name: &str) -> Result<MRDescriptor, FixtureError> {
        for dir in ["mr", "mr/set_l", "mr/set_b"] {
            let rel = format!("{dir}/{name}.mr");
            match self.read(&rel) {
                Ok(t) => return Ok(parse_mr(&t, &rel)?),
                Err(FixtureError::Missing(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(FixtureError::Missing(format!("mr/{name}.mr")))
    }

    pub fn mrs(&self, names: &[&str]) -> Result<Vec<MRDescriptor>, FixtureError> {
        names.iter().map(|n| self.mr(n)).collect()
    }

    pub fn sut(&self, name: &str) -> Result<SutProgram, FixtureError> {
        let rel = format!("suts/{name}.sut");
        Ok(parse_sut(&self.read(&rel)?, &rel)?)
    }

    pub fn zoo(&self) -> Result<BTreeMap<String, SutProgram>, FixtureError> {
        SUTS.iter().map(|n| Ok((n.to_string(), self.sut(n)?))).collect()
    }

    pub fn config(&self, name: &str) -> Result<MutatorConfig, FixtureError> {
        let rel = format!("{name}.cfg");
        Ok(parse_config(&self.read(&rel)?, &rel)?)
    }

    /// Bundled case-dependent cell overrides.
    pub fn overrides(&self) -> Result<Overrides, FixtureError> {
        Ok(self.config("overrides")?.overrides)
    }
}
