//! Line-oriented run configuration: `section.key = value`, `#` comments,
//! comma-separated arrays.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use slangevin_core::potential::PowerLaw;
use slangevin_core::{Family, PotentialModel, Scheme, SdeConfig};

use crate::CliError;

/// Known keys with their defaults (`None`: optional without default).
const SCHEMA: &[(&str, Option<&str>)] = &[
    ("potential.family", None),
    ("potential.A", None),
    ("potential.alpha", None),
    ("potential.B", None),
    ("potential.beta", None),
    ("potential.c0", None),
    ("potential.c1", None),
    ("potential.N", None),
    ("potential.d", None),
    ("potential.confine", None),
    ("potential.pair", None),
    ("sde.gamma", Some("1")),
    ("sde.T", Some("1")),
    ("sde.dt", Some("0.001")),
    ("sde.n_steps", Some("1000")),
    ("sde.scheme", Some("SplitOU")),
    ("sde.seed", Some("0")),
    ("sde.max_dt_shrink", Some("10")),
    ("sde.energy_jump_cap", Some("1000")),
    ("sde.sample_every", Some("1")),
    ("sde.replicas", Some("1")),
    ("sde.q0", None),
    ("sde.p0", None),
    ("lyapunov.b", None),
    ("lyapunov.kappa_slack", Some("0.001")),
    ("lyapunov.r1_initial", Some("1")),
    ("lyapunov.samples", Some("100000")),
    ("lyapunov.drift_samples", Some("100000")),
    ("lyapunov.seed", Some("24301")),
    ("control.x0", None),
    ("control.x1", None),
    ("control.t_final", Some("1")),
    ("control.waypoints", None),
    ("control.grid_points", Some("1000")),
    ("diagnostics.trajectory", None),
    ("diagnostics.bins", Some("100")),
    ("diagnostics.burn_in", Some("0.5")),
    ("diagnostics.max_lag", Some("500")),
    ("diagnostics.u_cap_factor", Some("60")),
    ("diagnostics.overlap_t0", Some("1")),
    ("diagnostics.overlap_starts", Some("4")),
    ("diagnostics.overlap_replicas", Some("500")),
    ("diagnostics.overlap_bins", Some("10")),
    ("diagnostics.overlap_floor", Some("0.01")),
    ("diagnostics.overlap_level", Some("20")),
    ("output.dir", None),
    ("output.format", Some("csv")),
];

/// Potential keys each family accepts (besides `family`).
fn family_keys(family: &str) -> Option<&'static [&'static str]> {
    Some(match family {
        "PolyConfine" => &["A", "alpha", "N", "d"],
        "SingularPair1D" => &["A", "alpha", "B", "beta"],
        "InteractingSystem" => &["A", "alpha", "B", "beta", "c1", "N", "d"],
        "LennardJones" => &["A", "alpha", "c0", "c1", "N", "d"],
        "UserComposite" => &["confine", "pair", "N", "d"],
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self { values: BTreeMap::new() };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `section.key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| config_err(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !SCHEMA.iter().any(|(k, _)| *k == key) {
            return Err(config_err(format!("unknown configuration key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<String> {
        self.values
            .get(key)
            .cloned()
            .or_else(|| SCHEMA.iter().find(|(k, _)| *k == key).and_then(|(_, d)| d.map(str::to_string)))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key).ok_or_else(|| config_err(format!("missing required key `{key}`")))?;
        raw.parse().map_err(|_| config_err(format!("cannot parse `{key} = {raw}`")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        if self.raw(key).is_none() {
            return Ok(None);
        }
        self.get(key).map(Some)
    }

    pub fn array(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(raw) = self.raw(key) else { return Ok(None) };
        raw.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| config_err(format!("cannot parse `{key}` entry `{}`", s.trim()))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Every key with its effective value, defaults included.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, _) in SCHEMA {
            let Some(v) = self.raw(key) else { continue };
            let sec = key.split('.').next().unwrap_or("");
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = sec;
            }
            let _ = writeln!(out, "{key} = {v}");
        }
        out
    }

    pub fn model(&self) -> Result<PotentialModel<f64>, CliError> {
        let family: String = self.get("potential.family")?;
        let allowed = family_keys(&family).ok_or_else(|| {
            config_err(format!(
                "unknown potential.family `{family}` (PolyConfine, SingularPair1D, InteractingSystem, LennardJones, UserComposite)"
            ))
        })?;
        for key in self.values.keys() {
            if let Some(k) = key.strip_prefix("potential.") {
                if k != "family" && !allowed.contains(&k) {
                    return Err(config_err(format!("key `{key}` does not apply to family {family}")));
                }
            }
        }
        let n: usize = self.get_opt("potential.N")?.unwrap_or(1);
        let d: usize = self.get_opt("potential.d")?.unwrap_or(1);
        let f = |k: &str| self.get::<f64>(&format!("potential.{k}"));
        let model = match family.as_str() {
            "PolyConfine" => PotentialModel::poly_confine(f("A")?, f("alpha")?, n, d),
            "SingularPair1D" => PotentialModel::singular_1d(f("A")?, f("alpha")?, f("B")?, f("beta")?),
            "InteractingSystem" => PotentialModel::new(
                Family::InteractingSystem {
                    a: f("A")?,
                    alpha: f("alpha")?,
                    b: f("B")?,
                    beta: f("beta")?,
                    c1: self.get_opt("potential.c1")?.unwrap_or(0.0),
                    attract_power: 6.0,
                },
                n,
                d,
            ),
            "LennardJones" => PotentialModel::lennard_jones(n, d, f("A")?, f("alpha")?, f("c0")?, f("c1")?),
            _ => {
                let laws = |key: &str| -> Result<Vec<PowerLaw<f64>>, CliError> {
                    let v = self.array(key)?.unwrap_or_default();
                    if v.len() % 2 != 0 {
                        return Err(config_err(format!("`{key}` needs coefficient,exponent pairs")));
                    }
                    Ok(v.chunks(2).map(|c| PowerLaw::new(c[0], c[1])).collect())
                };
                PotentialModel::new(
                    Family::UserComposite { confine: laws("potential.confine")?, pair: laws("potential.pair")? },
                    n,
                    d,
                )
            }
        };
        model.map_err(|e| config_err(format!("potential: {e}")))
    }

    pub fn sde(&self) -> Result<SdeConfig<f64>, CliError> {
        let scheme: String = self.get("sde.scheme")?;
        let scheme = Scheme::from_str(&scheme).map_err(|_| config_err(format!("unknown sde.scheme `{scheme}`")))?;
        let mut sde = SdeConfig::new(self.get("sde.gamma")?, self.get("sde.T")?, self.get("sde.dt")?)
            .with_steps(self.get("sde.n_steps")?)
            .with_scheme(scheme)
            .with_seed(self.get("sde.seed")?)
            .with_sample_every(self.get("sde.sample_every")?);
        sde.max_dt_shrink = self.get("sde.max_dt_shrink")?;
        sde.energy_jump_cap = self.get("sde.energy_jump_cap")?;
        sde.validate_thermal().map_err(|e| config_err(format!("sde: {e}")))?;
        if sde.n_steps == 0 {
            return Err(config_err("sde.n_steps must be at least 1"));
        }
        Ok(sde)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_arrays() {
        let c = RunConfig::parse("# top\npotential.family = PolyConfine # trailing\npotential.A=1\nsde.q0 = 1, 2.5\n").unwrap();
        assert_eq!(c.raw("potential.family").unwrap(), "PolyConfine");
        assert_eq!(c.array("sde.q0").unwrap().unwrap(), vec![1.0, 2.5]);
        assert_eq!(c.get::<f64>("sde.gamma").unwrap(), 1.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::parse("sde.gamm = 1").unwrap_err();
        assert!(e.to_string().contains("sde.gamm"));
    }

    #[test]
    fn family_rejects_foreign_keys() {
        let c = RunConfig::parse("potential.family = PolyConfine\npotential.A = 1\npotential.alpha = 4\npotential.beta = 2").unwrap();
        assert!(c.model().unwrap_err().to_string().contains("potential.beta"));
    }

    #[test]
    fn resolved_round_trip() {
        let c = RunConfig::parse("potential.family = SingularPair1D\nsde.T = 0.5").unwrap();
        let again = RunConfig::parse(&c.resolved()).unwrap();
        assert_eq!(again.resolved(), c.resolved());
        assert_eq!(again.raw("sde.n_steps").unwrap(), "1000");
    }
}
