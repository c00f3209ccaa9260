//! Flag records. Each one round-trips through JSON so that a `--config` file
//! can override any flag by its long name.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use smoothset::generate::IncrementRule;
use smoothset::transform::MapSpec;
use smoothset::Fixture;

/// Inclusive level range `a..b`, or a comma list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Scales(pub Vec<u32>);

impl FromStr for Scales {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let levels: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
            let a: u32 = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
            let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in {s:?}"))?;
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            (a..=b).collect()
        } else {
            s.split(',')
                .map(|t| t.trim().parse().map_err(|_| format!("bad level {t:?}")))
                .collect::<Result<_, _>>()?
        };
        if levels.is_empty() {
            return Err("no scales".into());
        }
        Ok(Scales(levels))
    }
}

impl TryFrom<String> for Scales {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Scales> for String {
    fn from(s: Scales) -> String {
        s.to_string()
    }
}

impl fmt::Display for Scales {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.0;
        let contiguous = v.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous && v.len() > 1 {
            write!(f, "{}..{}", v[0], v[v.len() - 1])
        } else {
            let parts: Vec<String> = v.iter().map(u32::to_string).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

fn parse_json<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

/// A JSON object, or a bare name for variants without required fields.
fn parse_tagged<T: DeserializeOwned>(s: &str, tag: &str) -> Result<T, String> {
    if s.trim_start().starts_with('{') {
        parse_json(s)
    } else {
        parse_json(&format!("{{\"{tag}\": {:?}}}", s.trim()))
    }
}

fn parse_fixture(s: &str) -> Result<Fixture, String> {
    match s.trim() {
        "halfspace" => Ok(Fixture::Halfspace { c: 0.5 }),
        "checkerboard" => Ok(Fixture::Checkerboard { m: 1 }),
        "constant" => Ok(Fixture::Constant { d: 0.5 }),
        _ => parse_tagged(s, "name"),
    }
}

fn parse_map(s: &str) -> Result<MapSpec, String> {
    parse_tagged(s, "kind")
}

fn parse_rule(s: &str) -> Result<IncrementRule, String> {
    parse_json(s)
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("band {s:?} is not lo,hi"))?;
    let lo = a.trim().parse().map_err(|_| format!("bad band start {a:?}"))?;
    let hi = b.trim().parse().map_err(|_| format!("bad band end {b:?}"))?;
    Ok((lo, hi))
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenArgs {
    /// Dimension, 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Resolution level.
    #[arg(long = "K", default_value_t = 12)]
    #[serde(rename = "K")]
    pub levels: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Increment rule as JSON, e.g. '{"kind":"geometric","scale":0.3,"ratio":0.7}'.
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<IncrementRule>,
    /// Write a fixture instead: empty, full, halfspace, checkerboard, constant, or JSON.
    #[arg(long, value_parser = parse_fixture)]
    pub fixture: Option<Fixture>,
    /// MGR1 output; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Levels `a..b` (inclusive) or a list; defaults to `1..K`.
    #[arg(long)]
    pub scales: Option<Scales>,
    /// dyadic, lattice or rotated.
    #[arg(long, default_value = "lattice")]
    pub mode: String,
    /// Lattice exponent; defaults to `min(K, j + 4)`.
    #[arg(long)]
    pub stride: Option<u32>,
    /// Lattice angle in radians for the rotated mode.
    #[arg(long, default_value_t = 0.0)]
    pub angle: f64,
    /// Quadrature samples per cube for the rotated mode.
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,
    /// CSV output; witnesses go to `<out>.witness.json`. Standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaffoldArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4)]
    pub maxgen: u32,
    /// `c_k = cbase + cslope·k`; `cbase` defaults to `2n`.
    #[arg(long)]
    pub cbase: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub cslope: f64,
    /// Start level; the smallest admissible one if absent.
    #[arg(long)]
    pub k0: Option<u32>,
    /// Pairs behind the modulus envelope: dyadic or lattice.
    #[arg(long, default_value = "dyadic")]
    pub mode: String,
    /// Lattice exponent for the lattice mode.
    #[arg(long)]
    pub stride: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsetArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    /// First level that must stay within `tau`.
    #[arg(long, default_value_t = 0)]
    pub settle: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// dilation, lemma3a, lemma3b, rotation or image.
    #[arg(long)]
    pub check: String,
    /// Defaults to `3..7`, capped below `K`.
    #[arg(long)]
    pub scales: Option<Scales>,
    #[arg(long)]
    pub stride: Option<u32>,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
    /// Enlargement factor for lemma3b.
    #[arg(long, default_value_t = 1.25)]
    pub t: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
    pub angle: f64,
    /// Map for the image check: identity, swap, or JSON such as
    /// '{"kind":"shear","amplitude":0.1,"frequency":1}'.
    #[arg(long, value_parser = parse_map)]
    pub map: Option<MapSpec>,
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxdimArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Count the cubes meeting a scaffold JSON instead of a grid.
    #[arg(long, conflicts_with = "input")]
    pub scaffold: Option<PathBuf>,
    #[arg(long, default_value = "0.25,0.75", value_parser = parse_band)]
    #[serde(with = "band")]
    pub band: (f64, f64),
    /// band or support.
    #[arg(long, default_value = "band")]
    pub mode: String,
    /// Defaults to `2..K-2`.
    #[arg(long)]
    pub scales: Option<Scales>,
    /// CSV output; the fit summary goes to `<out>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

mod band {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{},{}", b.0, b.1))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let s = String::deserialize(d)?;
        super::parse_band(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long = "K", default_value_t = 12)]
    #[serde(rename = "K")]
    pub levels: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4)]
    pub maxgen: u32,
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,
    /// Directory for every output and `manifest.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_round_trip() {
        assert_eq!("2..9".parse::<Scales>().unwrap().0, (2..=9).collect::<Vec<_>>());
        assert_eq!("3..=5".parse::<Scales>().unwrap().0, vec![3, 4, 5]);
        assert_eq!("4, 2,7".parse::<Scales>().unwrap().0, vec![4, 2, 7]);
        assert!("5..2".parse::<Scales>().is_err());
        assert!("a..2".parse::<Scales>().is_err());
        for s in ["2..9", "4,2,7", "3"] {
            assert_eq!(s.parse::<Scales>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn named_inputs() {
        assert_eq!(parse_fixture("empty").unwrap(), Fixture::Empty);
        assert_eq!(parse_fixture("halfspace").unwrap(), Fixture::Halfspace { c: 0.5 });
        assert_eq!(parse_fixture(r#"{"name":"constant","d":0.3}"#).unwrap(), Fixture::Constant { d: 0.3 });
        assert!(parse_fixture("bogus").is_err());
        assert_eq!(parse_map("swap").unwrap(), MapSpec::Swap);
        assert_eq!(parse_band("0.2, 0.6").unwrap(), (0.2, 0.6));
    }
}
