//! Flag value types.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use relconc::{Operator, StepRule};

/// `hard`, `soft`, `rt[:c]` (default `c = 0`) or `lq[:q]` (default `q = 2/3`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorSpec {
    Hard,
    Soft,
    Reciprocal(f64),
    Lq(f64),
}

impl OperatorSpec {
    pub fn build(&self, s: usize) -> anyhow::Result<Operator> {
        Ok(match *self {
            Self::Hard => Operator::hard(s),
            Self::Soft => Operator::soft(s),
            Self::Reciprocal(c) => Operator::reciprocal(s, c)?,
            Self::Lq(q) => Operator::lq(s, q)?,
        })
    }
}

impl FromStr for OperatorSpec {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> anyhow::Result<Self> {
        let (kind, param) = match text.split_once(':') {
            Some((k, p)) => (k, Some(p)),
            None => (text, None),
        };
        let value = |default: f64| -> anyhow::Result<f64> {
            param.map_or(Ok(default), |p| {
                parse_number(p).with_context(|| format!("bad operator parameter in `{text}`"))
            })
        };
        match (kind, param) {
            ("hard", None) => Ok(Self::Hard),
            ("soft", None) => Ok(Self::Soft),
            ("rt", _) => Ok(Self::Reciprocal(value(0.0)?)),
            ("lq", _) => Ok(Self::Lq(value(2.0 / 3.0)?)),
            _ => bail!("unknown operator `{text}` (expected hard, soft, rt[:c] or lq[:q])"),
        }
    }
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hard => write!(f, "hard"),
            Self::Soft => write!(f, "soft"),
            Self::Reciprocal(c) => write!(f, "rt:{c}"),
            Self::Lq(q) => write!(f, "lq:{q}"),
        }
    }
}

/// Decimal number or a fraction `a/b`.
pub fn parse_number(text: &str) -> anyhow::Result<f64> {
    if let Some((a, b)) = text.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        return Ok(a / b);
    }
    Ok(text.trim().parse()?)
}

/// Inclusive grid `a:b:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> anyhow::Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            bail!("grid `{text}` must have the form a:b:step");
        };
        let (a, b, step) = (parse_number(a)?, parse_number(b)?, parse_number(step)?);
        if !(step > 0.0) || b < a {
            bail!("grid `{text}` needs step > 0 and a <= b");
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        Ok(Grid((0..count).map(|i| a + i as f64 * step).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StepKind {
    Fixed,
    Adaptive,
}

impl StepKind {
    pub fn rule(self) -> StepRule<f64> {
        match self {
            Self::Fixed => StepRule::Fixed,
            Self::Adaptive => StepRule::adaptive(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DesignArg {
    Iid,
    Correlated,
    Block,
}

/// Reads a `key = value` file (blank lines and `#` comments ignored) into
/// `--key value` arguments.
pub fn config_args(text: &str) -> anyhow::Result<Vec<String>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", no + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        out.push(format!("--{key}"));
        if !value.eq_ignore_ascii_case("true") {
            out.push(value.to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators() {
        assert_eq!("hard".parse::<OperatorSpec>().unwrap(), OperatorSpec::Hard);
        assert_eq!(
            "rt".parse::<OperatorSpec>().unwrap(),
            OperatorSpec::Reciprocal(0.0)
        );
        assert_eq!(
            "rt:0.5".parse::<OperatorSpec>().unwrap(),
            OperatorSpec::Reciprocal(0.5)
        );
        assert_eq!(
            "lq:2/3".parse::<OperatorSpec>().unwrap(),
            OperatorSpec::Lq(2.0 / 3.0)
        );
        assert!("hard:1".parse::<OperatorSpec>().is_err());
        assert!("mcp".parse::<OperatorSpec>().is_err());
        assert!(OperatorSpec::Lq(1.5).build(3).is_err());
    }

    #[test]
    fn grids() {
        let g: Grid = "0.05:0.95:0.05".parse().unwrap();
        assert_eq!(g.0.len(), 19);
        assert!((g.0[18] - 0.95).abs() < 1e-12);
        assert_eq!("1:1:0.1".parse::<Grid>().unwrap().0, vec![1.0]);
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn config_files() {
        let args =
            config_args("# comment\nkappa = 2\nrho_grid=0.1:0.2:0.1\nlasso = true\n").unwrap();
        assert_eq!(
            args,
            ["--kappa", "2", "--rho-grid", "0.1:0.2:0.1", "--lasso"]
        );
        assert!(config_args("oops").is_err());
    }
}
