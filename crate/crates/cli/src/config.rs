use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer};

use crate::failure::Failure;

/// Settings that can come from flags or from a JSON config file; flags win.
pub trait Layered: Sized + DeserializeOwned {
    fn overlay(self, file: Self) -> Self;
}

macro_rules! layered {
    ($ty:ty { $($field:ident),+ $(,)? }) => {
        impl $crate::config::Layered for $ty {
            fn overlay(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),+ }
            }
        }
    };
}
pub(crate) use layered;

pub fn resolve<T: Layered>(flags: T, config: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = config else { return Ok(flags) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let file: T = serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("bad config {}: {e}", path.display())))?;
    Ok(flags.overlay(file))
}

/// Shot count, or `analytic` for exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotsArg(pub pyramidnet_core::qsim::Shots);

impl FromStr for ShotsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        use pyramidnet_core::qsim::Shots;
        if s.eq_ignore_ascii_case("analytic") {
            return Ok(Self(Shots::Analytic));
        }
        let n: f64 = s.parse().map_err(|_| format!("expected a shot count or `analytic`, got `{s}`"))?;
        if !(n >= 1.0 && n.fract() == 0.0 && n <= u64::MAX as f64) {
            return Err(format!("shot count must be a positive integer, got `{s}`"));
        }
        Ok(Self(Shots::Count(n as u64)))
    }
}

impl fmt::Display for ShotsArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            pyramidnet_core::qsim::Shots::Analytic => f.write_str("analytic"),
            pyramidnet_core::qsim::Shots::Count(n) => write!(f, "{n}"),
        }
    }
}

impl<'de> Deserialize<'de> for ShotsArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => n.to_string().parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyramidnet_core::qsim::Shots;

    #[test]
    fn shots_parse() {
        assert_eq!("analytic".parse::<ShotsArg>().unwrap().0, Shots::Analytic);
        assert_eq!("1e5".parse::<ShotsArg>().unwrap().0, Shots::Count(100_000));
        assert!("0".parse::<ShotsArg>().is_err());
        assert!("2.5".parse::<ShotsArg>().is_err());
        let s: ShotsArg = serde_json::from_str("400").unwrap();
        assert_eq!(s.0, Shots::Count(400));
    }
}
