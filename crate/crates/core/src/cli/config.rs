use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PolyhamError, Result};
use crate::fields::random::random_periods;
use crate::fields::PeriodicDomain;
use crate::hamiltonian::{CatalogHamiltonian, GrowthConstants, Sampling};
use crate::phase::PhaseLayout;
use crate::solver::IterativeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyWirtinger,
    VerifyQform,
    Solve,
    CheckThm4,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::VerifyWirtinger => "verify-wirtinger",
            Command::VerifyQform => "verify-qform",
            Command::Solve => "solve",
            Command::CheckThm4 => "check-thm4",
            Command::Sweep => "sweep",
        }
    }
}

/// Either fixed `periods`, or `p` with a `period_range` sampled per field.
/// A single `resolution` entry applies to every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_range: Option<[f64; 2]>,
    pub resolution: Vec<usize>,
}

impl DomainSpec {
    pub fn p(&self) -> Result<usize> {
        let p = match (&self.periods, self.p) {
            (Some(t), Some(p)) if t.len() != p => {
                return Err(PolyhamError::InvalidDomain(format!("p = {p} but {} periods given", t.len())))
            }
            (Some(t), _) => t.len(),
            (None, Some(p)) => p,
            (None, None) => return Err(PolyhamError::InvalidDomain("need `periods` or `p`".into())),
        };
        if self.periods.is_some() == self.period_range.is_some() {
            return Err(PolyhamError::InvalidDomain(
                "give exactly one of `periods` and `period_range`".into(),
            ));
        }
        Ok(p)
    }

    fn resolution(&self, p: usize) -> Result<Vec<usize>> {
        match self.resolution.len() {
            1 => Ok(vec![self.resolution[0]; p]),
            l if l == p => Ok(self.resolution.clone()),
            l => Err(PolyhamError::InvalidDomain(format!("{l} resolutions for p = {p}"))),
        }
    }

    pub fn is_random(&self) -> bool {
        self.period_range.is_some()
    }

    /// The domain for fixed periods.
    pub fn fixed(&self) -> Result<PeriodicDomain> {
        let p = self.p()?;
        match &self.periods {
            Some(t) => PeriodicDomain::new(t.clone(), self.resolution(p)?),
            None => Err(PolyhamError::InvalidDomain(
                "this command needs fixed `periods`, not `period_range`".into(),
            )),
        }
    }

    /// Fixed domain, or one with periods drawn from `period_range`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PeriodicDomain> {
        match self.period_range {
            None => self.fixed(),
            Some([lo, hi]) => {
                let p = self.p()?;
                if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                    return Err(PolyhamError::InvalidDomain(format!("bad period_range [{lo}, {hi}]")));
                }
                PeriodicDomain::new(random_periods(p, lo, hi, rng), self.resolution(p)?)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.p()?;
        let res = self.resolution(p)?;
        let periods = match (&self.periods, self.period_range) {
            (Some(t), _) => t.clone(),
            (None, Some([lo, hi])) => {
                if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                    return Err(PolyhamError::InvalidDomain(format!("bad period_range [{lo}, {hi}]")));
                }
                vec![lo; p]
            }
            (None, None) => unreachable!("checked by p()"),
        };
        PeriodicDomain::new(periods, res).map(|_| ())
    }
}

/// `alpha` and `delta` always; `beta` and `gamma` either both given or both
/// left out, in which case they are certified from the catalog family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    pub alpha: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl ConstantsSpec {
    /// Constants at `alpha`; `Err` carries a hypothesis-rejection reason.
    pub fn resolve(
        &self,
        family: &CatalogHamiltonian,
        domain: &PeriodicDomain,
        alpha: f64,
    ) -> Result<std::result::Result<GrowthConstants, String>> {
        match (self.beta, self.gamma) {
            (Some(beta), Some(gamma)) => Ok(Ok(GrowthConstants {
                alpha,
                beta,
                gamma,
                delta: self.delta,
            })),
            (None, None) => match family.certified_constants(domain, alpha, self.delta) {
                Ok(c) => Ok(Ok(c)),
                Err(e @ PolyhamError::AlphaWindow { .. }) => Ok(Err(e.to_string())),
                Err(PolyhamError::InvalidParameter(msg)) => Ok(Err(format!("cannot certify growth constants: {msg}"))),
                Err(e) => Err(e),
            },
            _ => Err(PolyhamError::InvalidParameter(
                "constants: give both beta and gamma or neither".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Spectral for the quadratic families, iterative otherwise.
    #[default]
    Auto,
    Spectral,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub method: SolverMethod,
    #[serde(default)]
    pub iterative: IterativeParams,
}

fn default_out() -> PathBuf {
    PathBuf::from("polyham-out")
}

fn default_count() -> usize {
    1000
}

fn default_bandwidth() -> usize {
    4
}

/// One JSON document describing a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub domain: DomainSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<CatalogHamiltonian>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Fields per verification sweep.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Largest wavenumber per axis in random fields.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: usize,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sampling: Sampling,
    /// MTHF solution to check instead of solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn layout(&self) -> Result<PhaseLayout> {
        PhaseLayout::new(self.n, self.domain.p()?)
    }

    pub fn hamiltonian(&self) -> Result<&CatalogHamiltonian> {
        self.hamiltonian
            .as_ref()
            .ok_or_else(|| PolyhamError::InvalidParameter(format!("{} needs `hamiltonian`", self.command.as_str())))
    }

    pub fn constants(&self) -> Result<&ConstantsSpec> {
        self.constants
            .as_ref()
            .ok_or_else(|| PolyhamError::InvalidParameter(format!("{} needs `constants`", self.command.as_str())))
    }

    /// Check everything that can be checked before computing.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let layout = self.layout()?;
        if self.count == 0 {
            return Err(PolyhamError::InvalidParameter("count must be >= 1".into()));
        }
        if !(self.sampling.radius > 0.0 && self.sampling.radius.is_finite()) || self.sampling.count == 0 {
            return Err(PolyhamError::InvalidParameter("sampling needs radius > 0 and count >= 1".into()));
        }
        match self.command {
            Command::VerifyWirtinger | Command::VerifyQform => {}
            Command::Solve | Command::CheckThm4 | Command::Sweep => {
                let domain = self.domain.fixed()?;
                self.hamiltonian()?.build(&domain, layout)?;
                if self.command != Command::Solve {
                    let c = self.constants()?;
                    if c.beta.is_some() != c.gamma.is_some() {
                        return Err(PolyhamError::InvalidParameter(
                            "constants: give both beta and gamma or neither".into(),
                        ));
                    }
                }
                if self.command == Command::Sweep {
                    match &self.alpha_grid {
                        Some(g) if !g.is_empty() && g.iter().all(|a| a.is_finite()) => {}
                        _ => {
                            return Err(PolyhamError::InvalidParameter(
                                "sweep needs a nonempty finite `alpha_grid`".into(),
                            ))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "command": "check-thm4",
        "domain": {"periods": [6.283185307179586], "resolution": [32]},
        "n": 1,
        "hamiltonian": {"name": "forced-quadratic", "params": {
            "alpha_prime": 0.3, "c0": 0.0,
            "forcing": [{"k": [1], "cos": [1.0, 0.0]}]}},
        "constants": {"alpha": 0.4, "delta": 0.1},
        "seed": 3,
        "solver": {"method": "spectral"}
    }"#;

    #[test]
    fn round_trip() {
        let cfg = RunConfig::from_json(FULL).unwrap();
        let again = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.out, PathBuf::from("polyham-out"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = FULL.replace("\"seed\": 3", "\"seed\": 3, \"sede\": 4");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad = FULL.replace("\"delta\": 0.1", "\"delta\": 0.1, \"eta\": 1");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn domain_rules() {
        let mut cfg = RunConfig::from_json(FULL).unwrap();
        cfg.domain.period_range = Some([0.5, 10.0]);
        assert!(cfg.validate().is_err());
        cfg.command = Command::VerifyWirtinger;
        cfg.domain.periods = None;
        cfg.domain.p = Some(2);
        assert!(cfg.validate().is_ok());
        assert!(cfg.domain.fixed().is_err());
        cfg.domain.resolution = vec![8, 8, 8];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_hamiltonian_for_solve() {
        let mut cfg = RunConfig::from_json(FULL).unwrap();
        cfg.command = Command::Solve;
        cfg.hamiltonian = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn half_given_constants_rejected() {
        let bad = FULL.replace("\"delta\": 0.1", "\"delta\": 0.1, \"beta\": 1.0");
        assert!(RunConfig::from_json(&bad).is_err());
    }
}
