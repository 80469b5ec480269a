//! Flag/config-file merging and protocol construction.

use std::fmt;
use std::fs;
use std::path::Path;

use clap::Args;
use ffcontrol::protocols::{InitialState, ProtocolSpec, TargetKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// Exit status classes: bad input is 2, anything that broke during a run is 3.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<ffcontrol::Error> for Failure {
    fn from(e: ffcontrol::Error) -> Self {
        match e {
            ffcontrol::Error::Io(_) => Failure::Config(e.to_string()),
            e if e.is_config() => Failure::Config(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn config_err(key: &str, msg: impl fmt::Display) -> Failure {
    Failure::Config(format!("`{key}`: {msg}"))
}

/// Reads a TOML file into the option struct of a subcommand.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Fills every `None` field of `$flags` from `$file`; flags win.
#[macro_export]
macro_rules! overlay {
    ($flags:expr, $file:expr; $($f:ident),+ $(,)?) => {
        $( if $flags.$f.is_none() { $flags.$f = $file.$f.take(); } )+
    };
}

/// Protocol keys shared by `trajectory` and `oracle`.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolArgs {
    /// swap2, swap3, fredkin or motzkin.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub num_sites: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub local_dim: Option<usize>,
    /// Range exponent of pair measurements (omit for nearest neighbours).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// default or alternative.
    #[arg(long)]
    pub feedback_site: Option<String>,
    /// kernel or sequential_cswap.
    #[arg(long)]
    pub fredkin_mode: Option<String>,
    /// default, neel, all_zero, digits:<d…>, dicke:<up>, anomalous_fredkin,
    /// fredkin_stationary or motzkin_ground_pbc.
    #[arg(long)]
    pub initial: Option<String>,
}

impl ProtocolArgs {
    pub fn overlay(&mut self, mut file: ProtocolArgs) {
        overlay!(self, file; family, num_sites, local_dim, delta, kappa, eta, feedback_site, fredkin_mode, initial);
    }

    pub fn to_spec(&self) -> CliResult<ProtocolSpec> {
        let mut m = Map::new();
        m.insert("family".into(), json!(self.family.as_deref().ok_or_else(|| config_err("family", "required"))?));
        m.insert("L".into(), json!(self.num_sites.ok_or_else(|| config_err("L", "required"))?));
        if let Some(n) = self.local_dim {
            m.insert("N".into(), json!(n));
        }
        if let Some(d) = self.delta {
            m.insert("delta".into(), json!(d));
        }
        if let Some(k) = self.kappa {
            m.insert("kappa".into(), json!(k));
        }
        if let Some(e) = self.eta {
            m.insert("eta".into(), json!(e));
        }
        if let Some(r) = &self.feedback_site {
            m.insert("feedback_site_rule".into(), json!(r));
        }
        if let Some(f) = &self.fredkin_mode {
            m.insert("fredkin_measurement_mode".into(), json!(f));
        }
        let spec: ProtocolSpec =
            serde_json::from_value(Value::Object(m)).map_err(|e| Failure::Config(format!("protocol: {e}")))?;
        let spec = ProtocolSpec {
            initial_state: match &self.initial {
                Some(s) => parse_initial(s)?,
                None => InitialState::Default,
            },
            ..spec
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn parse_target(s: &str) -> CliResult<TargetKind> {
    let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
    match (head, arg) {
        ("dicke", Some(a)) => {
            Ok(TargetKind::Dicke { up: a.parse().map_err(|e| config_err("target", format!("dicke:{a}: {e}")))? })
        }
        ("anomalous_fredkin", None) => Ok(TargetKind::AnomalousFredkin),
        ("fredkin_stationary", None) => Ok(TargetKind::FredkinStationary),
        ("motzkin_ground_pbc", None) => Ok(TargetKind::MotzkinGroundPbc),
        _ => Err(config_err("target", format!("unknown target `{s}`"))),
    }
}

pub fn parse_initial(s: &str) -> CliResult<InitialState> {
    match s {
        "default" => Ok(InitialState::Default),
        "neel" => Ok(InitialState::Neel),
        "all_zero" => Ok(InitialState::AllZero),
        _ => {
            if let Some(d) = s.strip_prefix("digits:") {
                let digits = d
                    .chars()
                    .map(|c| c.to_digit(10).map(|x| x as usize))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| config_err("initial", format!("`{d}` is not a digit string")))?;
                Ok(InitialState::Digits(digits))
            } else {
                parse_target(s).map(InitialState::Target).map_err(|_| config_err("initial", format!("unknown initial state `{s}`")))
            }
        }
    }
}

/// Cartesian product of sweep axes, in row-major order of the arguments.
pub fn product<A: Clone, B: Clone, C: Clone, D: Clone>(a: &[A], b: &[B], c: &[C], d: &[D]) -> Vec<(A, B, C, D)> {
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len() * d.len());
    for x in a {
        for y in b {
            for z in c {
                for w in d {
                    out.push((x.clone(), y.clone(), z.clone(), w.clone()));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let mut flags = ProtocolArgs { family: Some("swap3".into()), ..Default::default() };
        let file: ProtocolArgs = toml::from_str("family = \"swap2\"\nL = 6\nkappa = 0.5\n").unwrap();
        flags.overlay(file);
        let spec = flags.to_spec().unwrap();
        assert_eq!(spec.num_sites, 6);
        assert_eq!(spec.kappa, 0.5);
        assert_eq!(spec.family.to_string(), "swap3");
    }

    #[test]
    fn unknown_keys_and_missing_values_are_config_errors() {
        assert!(toml::from_str::<ProtocolArgs>("famly = \"swap2\"").is_err());
        let e = ProtocolArgs { family: Some("swap2".into()), ..Default::default() }.to_spec().unwrap_err();
        assert_eq!(e.code(), 2);
        assert!(e.to_string().contains("`L`"));
        let e = ProtocolArgs { family: Some("swap2".into()), num_sites: Some(1), ..Default::default() }.to_spec().unwrap_err();
        assert_eq!(e.code(), 2);
    }

    #[test]
    fn initial_states() {
        assert_eq!(parse_initial("digits:0101").unwrap(), InitialState::Digits(vec![0, 1, 0, 1]));
        assert_eq!(parse_initial("dicke:3").unwrap(), InitialState::Target(TargetKind::Dicke { up: 3 }));
        assert!(parse_initial("digits:0a").is_err());
        assert!(parse_initial("ferro").is_err());
    }

    #[test]
    fn sweep_order_is_row_major() {
        let p = product(&[1, 2], &['a', 'b'], &[0.0], &[()]);
        let heads: Vec<(i32, char)> = p.iter().map(|x| (x.0, x.1)).collect();
        assert_eq!(heads, vec![(1, 'a'), (1, 'b'), (2, 'a'), (2, 'b')]);
    }
}
