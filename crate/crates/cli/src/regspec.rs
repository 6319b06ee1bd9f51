//! The `--reg` mini-grammar: `name[:key=value[,key=value]]`.

use std::fmt;

use anyhow::{anyhow, bail, Result};
use ndarray::Array2;
use rdrot::regularizer::{Forbidden, WeightedL1};
use rdrot::{GroupPartition, RegularizerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct RegSpec {
    pub name: String,
    pub params: Vec<(String, f64)>,
}

/// Data a regularizer may need besides its scalar parameters.
#[derive(Debug, Default)]
pub struct RegData {
    pub groups: Option<GroupPartition>,
    pub weights: Option<Array2<f64>>,
    pub forbidden: Option<Vec<(usize, usize)>>,
    /// Multiply the quadratic weight by `m + n`.
    pub scale_by_mn: bool,
}

const KNOWN: [(&str, &[&str]); 6] = [
    ("none", &[]),
    ("quad", &["alpha"]),
    ("gl", &["lambda"]),
    ("wl1", &["w"]),
    ("forbid", &[]),
    ("hypent", &["beta"]),
];

impl RegSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (text.trim(), None),
        };
        let keys = KNOWN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| anyhow!("--reg: unknown regularizer {name:?} (expected none, quad, gl, wl1, forbid or hypent)"))?;
        let mut params = Vec::new();
        for item in rest.into_iter().flat_map(|r| r.split(',')) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("--reg: expected key=value, got {item:?}"))?;
            let key = key.trim();
            if !keys.contains(&key) {
                bail!("--reg: unknown key {key:?} for {name} (accepted: {})", describe(keys));
            }
            if params.iter().any(|(k, _): &(String, f64)| k == key) {
                bail!("--reg: key {key:?} given twice");
            }
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| anyhow!("--reg: {key} must be a number, got {:?}", value.trim()))?;
            params.push((key.to_string(), value));
        }
        Ok(RegSpec {
            name: name.to_string(),
            params,
        })
    }

    fn get(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    fn require(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| anyhow!("--reg: {} needs {key}=<value>", self.name))
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        if !(v > 0.0 && v.is_finite()) {
            bail!("--reg: {key} must be positive, got {v}");
        }
        Ok(v)
    }

    /// Builds the regularizer for an `m x n` problem.
    pub fn build(&self, m: usize, n: usize, data: RegData) -> Result<RegularizerKind> {
        let reg = match self.name.as_str() {
            "none" => RegularizerKind::Zero,
            "quad" => {
                let alpha = self.positive("alpha")?;
                let alpha = if data.scale_by_mn { alpha * (m + n) as f64 } else { alpha };
                RegularizerKind::quadratic(alpha)?
            }
            "gl" => {
                let lambda = self.positive("lambda")?;
                let groups = data.groups.ok_or_else(|| anyhow!("--reg: gl needs --groups"))?;
                RegularizerKind::group_lasso(lambda, groups)?
            }
            "wl1" => {
                let weights = match (self.get("w"), data.weights) {
                    (Some(_), Some(_)) => bail!("--reg: give either wl1:w=<value> or --weights, not both"),
                    (Some(w), None) => Array2::from_elem((m, n), w),
                    (None, Some(w)) => w,
                    (None, None) => bail!("--reg: wl1 needs w=<value> or --weights"),
                };
                if weights.dim() != (m, n) {
                    bail!("--weights: expected {m}x{n}, got {:?}", weights.dim());
                }
                RegularizerKind::WeightedL1(WeightedL1::new(weights)?)
            }
            "forbid" => {
                let cells = data.forbidden.ok_or_else(|| anyhow!("--reg: forbid needs --forbidden"))?;
                RegularizerKind::Forbidden(Forbidden::new(m, n, &cells)?)
            }
            "hypent" => RegularizerKind::hypentropic(self.positive("beta")?)?,
            other => unreachable!("unchecked regularizer name {other}"),
        };
        Ok(reg)
    }
}

impl fmt::Display for RegSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (k, (key, value)) in self.params.iter().enumerate() {
            write!(f, "{}{key}={value}", if k == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

fn describe(keys: &[&str]) -> String {
    if keys.is_empty() {
        "none".into()
    } else {
        keys.join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names_and_keys() {
        assert_eq!(RegSpec::parse("none").unwrap().params, vec![]);
        let spec = RegSpec::parse("quad:alpha=0.01").unwrap();
        assert_eq!(spec.params, vec![("alpha".to_string(), 0.01)]);
        assert_eq!(spec.to_string(), "quad:alpha=0.01");
    }

    #[test]
    fn rejects_unknown_names_and_keys() {
        assert!(RegSpec::parse("l2").is_err());
        let err = RegSpec::parse("quad:beta=1").unwrap_err().to_string();
        assert!(err.contains("unknown key") && err.contains("alpha"), "{err}");
        assert!(RegSpec::parse("quad:alpha").is_err());
        assert!(RegSpec::parse("quad:alpha=x").is_err());
        assert!(RegSpec::parse("quad:alpha=1,alpha=2").is_err());
    }

    #[test]
    fn validates_values_when_building() {
        let err = RegSpec::parse("quad:alpha=-1")
            .unwrap()
            .build(2, 2, RegData::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("--reg") && err.contains("alpha"), "{err}");
        assert!(RegSpec::parse("quad").unwrap().build(2, 2, RegData::default()).is_err());
    }

    #[test]
    fn scale_by_mn_multiplies_alpha() {
        let data = RegData {
            scale_by_mn: true,
            ..RegData::default()
        };
        let reg = RegSpec::parse("quad:alpha=0.5").unwrap().build(2, 3, data).unwrap();
        assert_eq!(reg, RegularizerKind::quadratic(2.5).unwrap());
    }

    #[test]
    fn data_backed_regularizers_need_their_data() {
        for spec in ["gl:lambda=1", "wl1", "forbid"] {
            assert!(RegSpec::parse(spec).unwrap().build(2, 2, RegData::default()).is_err(), "{spec}");
        }
        let reg = RegSpec::parse("wl1:w=0.5").unwrap().build(2, 2, RegData::default()).unwrap();
        assert!(matches!(reg, RegularizerKind::WeightedL1(_)));
        let data = RegData {
            forbidden: Some(vec![(0, 1)]),
            ..RegData::default()
        };
        let reg = RegSpec::parse("forbid").unwrap().build(2, 2, data).unwrap();
        assert!(matches!(reg, RegularizerKind::Forbidden(_)));
    }
}
