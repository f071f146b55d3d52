pub mod besov;
pub mod generate;
pub mod harness;
pub mod identities;
pub mod ins;
pub mod lagrangian;
pub mod stokes;

use crate::config::Config;
use crate::error::Result;
use crate::output::Artifacts;
use crate::Kind;

/// A validated experiment, ready to run.
pub enum Plan {
    Identities(identities::Params),
    Stokes(stokes::Params),
    StokesOracle(stokes::OracleParams),
    Besov(besov::Params),
    Harness(harness::Params),
    Ins(ins::Params),
    Lagrangian(lagrangian::Params),
    TwinSolve(ins::TwinParams),
    Generate(generate::Params),
}

impl Plan {
    pub fn read(kind: Kind, cfg: &Config) -> Result<Self> {
        Ok(match kind {
            Kind::Identities => Plan::Identities(identities::Params::read(cfg)?),
            Kind::Stokes => Plan::Stokes(stokes::Params::read(cfg)?),
            Kind::StokesOracle => Plan::StokesOracle(stokes::OracleParams::read(cfg)?),
            Kind::Besov => Plan::Besov(besov::Params::read(cfg)?),
            Kind::Harness => Plan::Harness(harness::Params::read(cfg)?),
            Kind::Ins => Plan::Ins(ins::Params::read(cfg)?),
            Kind::Lagrangian => Plan::Lagrangian(lagrangian::Params::read(cfg)?),
            Kind::TwinSolve => Plan::TwinSolve(ins::TwinParams::read(cfg)?),
            Kind::Generate => Plan::Generate(generate::Params::read(cfg)?),
        })
    }

    pub fn run(&self) -> Result<Artifacts> {
        match self {
            Plan::Identities(p) => p.run(),
            Plan::Stokes(p) => p.run(),
            Plan::StokesOracle(p) => p.run(),
            Plan::Besov(p) => p.run(),
            Plan::Harness(p) => p.run(),
            Plan::Ins(p) => p.run(),
            Plan::Lagrangian(p) => p.run(),
            Plan::TwinSolve(p) => p.run(),
            Plan::Generate(p) => p.run(),
        }
    }
}
