//! TOML run configuration and the per-run manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bti::Environment;
use crate::error::{Error, Result};
use crate::experiment::{
    route_set, standard_route_set, BurnVector, Phase, Schedule, ValueSource,
};

/// A schedule phase as written in a config file. `loop` blocks expand to
/// their body repeated `count` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConfigPhase {
    Calibrate,
    Condition {
        source: ValueSource,
        hours: f64,
    },
    Measure {
        #[serde(default = "one")]
        repeats: usize,
    },
    Loop {
        count: usize,
        body: Vec<ConfigPhase>,
    },
}

fn one() -> usize {
    1
}

fn expand(phases: &[ConfigPhase], out: &mut Vec<Phase>) {
    for p in phases {
        match p {
            ConfigPhase::Calibrate => out.push(Phase::Calibrate),
            ConfigPhase::Condition { source, hours } => out.push(Phase::Condition {
                source: *source,
                duration_hours: *hours,
            }),
            ConfigPhase::Measure { repeats } => out.push(Phase::Measure { repeats: *repeats }),
            ConfigPhase::Loop { count, body } => {
                for _ in 0..*count {
                    expand(body, out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// RNG seed; overridable from the command line or PENTIMENTO_SEED.
    pub seed: Option<u64>,
    /// "lab" or "cloud".
    pub regime: String,
    /// Named schedule (experiment1/2/3); mutually exclusive with `phases`.
    pub schedule: Option<String>,
    /// Conditioning granularity for named schedules, default 1 hour.
    pub hours_per_step: Option<f64>,
    /// Route lengths; defaults to the standard 4x16 inventory.
    pub lengths_ps: Option<Vec<f64>>,
    /// With `lengths_ps`: instantiate each length this many times.
    pub routes_per_length: Option<usize>,
    /// Seed for drawing the burn vector; defaults to the run seed.
    pub burn_seed: Option<u64>,
    /// Explicit burn bits, one per route; overrides `burn_seed`.
    pub burn_bits: Option<Vec<bool>>,
    /// Explicit phase list; mutually exclusive with `schedule`.
    pub phases: Option<Vec<ConfigPhase>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Data(format!("config parse error: {e}")))
    }

    pub fn environment(&self) -> Result<Environment> {
        match self.regime.as_str() {
            "lab" => Ok(Environment::lab()),
            "cloud" => Ok(Environment::cloud()),
            other => Err(Error::Data(format!(
                "regime must be \"lab\" or \"cloud\", got {other:?}"
            ))),
        }
    }

    pub fn routes(&self) -> Result<Vec<crate::bti::RouteSpec>> {
        match &self.lengths_ps {
            None => Ok(standard_route_set()),
            Some(lengths) => {
                let per = self.routes_per_length.unwrap_or(1);
                if per == 0 {
                    return Err(Error::Data("routes_per_length must be positive".into()));
                }
                let expanded: Vec<f64> = lengths
                    .iter()
                    .flat_map(|l| std::iter::repeat(*l).take(per))
                    .collect();
                route_set(&expanded).map_err(|e| Error::Data(e.to_string()))
            }
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let step = self.hours_per_step.unwrap_or(1.0);
        if !(step > 0.0) {
            return Err(Error::Data(format!(
                "hours_per_step must be positive, got {step}"
            )));
        }
        match (&self.schedule, &self.phases) {
            (Some(name), None) => Schedule::named(name, step),
            (None, Some(phases)) => {
                let mut out = Vec::new();
                expand(phases, &mut out);
                Ok(Schedule::new(out))
            }
            (Some(_), Some(_)) => Err(Error::Data(
                "config sets both `schedule` and `phases`; pick one".into(),
            )),
            (None, None) => Err(Error::Data(
                "config needs either `schedule` or `phases`".into(),
            )),
        }
    }

    pub fn burn_vector(&self, run_seed: u64, route_count: usize) -> Result<BurnVector> {
        if let Some(bits) = &self.burn_bits {
            if bits.len() != route_count {
                return Err(Error::Data(format!(
                    "burn_bits has {} entries for {} routes",
                    bits.len(),
                    route_count
                )));
            }
            return Ok(BurnVector(bits.clone()));
        }
        Ok(BurnVector::from_seed(
            self.burn_seed.unwrap_or(run_seed),
            route_count,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub seed: u64,
    pub start_hours: f64,
    pub end_hours: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8], seed: u64, end_hours: f64, outputs: Vec<String>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        RunManifest {
            config_sha256: hex,
            seed,
            start_hours: 0.0,
            end_hours,
            outputs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_schedule_config() {
        let cfg = RunConfig::parse(
            "seed = 7\nregime = \"lab\"\nschedule = \"experiment1\"\nhours_per_step = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        let schedule = cfg.schedule().unwrap();
        assert_eq!(schedule.total_condition_hours(), 400.0);
        assert_eq!(cfg.routes().unwrap().len(), 64);
        assert_eq!(cfg.environment().unwrap(), Environment::lab());
    }

    #[test]
    fn explicit_phases_with_loop() {
        let cfg = RunConfig::parse(
            r#"
regime = "cloud"
lengths_ps = [1000.0, 5000.0]
routes_per_length = 2

[[phases]]
kind = "calibrate"

[[phases]]
kind = "measure"

[[phases]]
kind = "loop"
count = 3
body = [
  { kind = "condition", source = "burn", hours = 1.0 },
  { kind = "measure", repeats = 2 },
]
"#,
        )
        .unwrap();
        let schedule = cfg.schedule().unwrap();
        assert_eq!(schedule.phases.len(), 2 + 3 * 2);
        assert_eq!(schedule.total_condition_hours(), 3.0);
        assert_eq!(cfg.routes().unwrap().len(), 4);
        assert!(matches!(
            schedule.phases[3],
            Phase::Measure { repeats: 2 }
        ));
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(RunConfig::parse("regime = 3\n").is_err());
        assert!(RunConfig::parse("regime = \"lab\"\nunknown_field = 1\n").is_err());
        let no_schedule = RunConfig::parse("regime = \"lab\"\n").unwrap();
        assert!(no_schedule.schedule().is_err());
        let both = RunConfig::parse(
            "regime = \"lab\"\nschedule = \"experiment1\"\n\n[[phases]]\nkind = \"measure\"\n",
        )
        .unwrap();
        assert!(both.schedule().is_err());
        let bad_regime = RunConfig::parse("regime = \"moon\"\nschedule = \"experiment1\"\n").unwrap();
        assert!(bad_regime.environment().is_err());
        assert!(Schedule::named("experiment9", 1.0).is_err());
    }

    #[test]
    fn burn_vector_sources() {
        let cfg = RunConfig::parse(
            "regime = \"lab\"\nschedule = \"experiment1\"\nburn_bits = [true, false]\n",
        )
        .unwrap();
        let bv = cfg.burn_vector(1, 2).unwrap();
        assert_eq!(bv.0, vec![true, false]);
        assert!(cfg.burn_vector(1, 3).is_err());

        let seeded = RunConfig::parse(
            "regime = \"lab\"\nschedule = \"experiment1\"\nburn_seed = 5\n",
        )
        .unwrap();
        assert_eq!(
            seeded.burn_vector(1, 64).unwrap(),
            BurnVector::from_seed(5, 64)
        );
    }

    #[test]
    fn manifest_is_stable() {
        let m1 = RunManifest::new(b"abc", 7, 400.0, vec!["out.csv".into()]);
        let m2 = RunManifest::new(b"abc", 7, 400.0, vec!["out.csv".into()]);
        assert_eq!(m1.to_json(), m2.to_json());
        let m3 = RunManifest::new(b"abd", 7, 400.0, vec!["out.csv".into()]);
        assert_ne!(m1.config_sha256, m3.config_sha256);
        // Known SHA-256 of "abc".
        assert_eq!(
            m1.config_sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
