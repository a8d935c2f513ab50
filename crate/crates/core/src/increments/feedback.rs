//! Feedback functions `f: N0 -> (0, inf)`.
//!
//! `f` is the selection weight of a bin holding `m` balls, and the rate of
//! the exponential wait from level `m` to `m + 1` under the continuous-time
//! embedding. Text form (used by config files and the CLI):
//!
//! ```text
//! power:P                      f(m) = (m + 1)^P
//! const:C                      f(m) = C
//! table:V0,V1,...[;tail=RULE]  f(m) = Vm, RULE in {repeat, power}
//! ```
//!
//! The power family is shifted by one so that `f(0) = 1 > 0`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default number of levels memoized by a [`FeedbackCache`].
pub const DEFAULT_MEMO_CAP: usize = 1 << 24;

/// How a tabulated feedback function continues past its last entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRule {
    RepeatLast,
    /// Continue as `c * (m + 1)^q`, with `c` and `q` fitted through the last
    /// two entries. A single-entry table extrapolates with `q = 0`.
    PowerExtrapolate,
}

type CustomFn = dyn Fn(u64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum FeedbackFunction {
    Power {
        exponent: f64,
    },
    Constant {
        value: f64,
    },
    Tabulated {
        values: Arc<[f64]>,
        tail: TailRule,
    },
    /// Arbitrary closure. Positivity is checked on every evaluation through
    /// [`FeedbackFunction::rate`]; custom functions have no text form.
    Custom {
        name: String,
        eval: Arc<CustomFn>,
    },
}

impl FeedbackFunction {
    pub fn power(exponent: f64) -> Result<Self> {
        if !exponent.is_finite() {
            return Err(Error::argument(format!("power exponent {exponent} is not finite")));
        }
        Ok(FeedbackFunction::Power { exponent })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::argument(format!(
                "constant feedback {value} must be positive and finite"
            )));
        }
        Ok(FeedbackFunction::Constant { value })
    }

    pub fn tabulated(values: Vec<f64>, tail: TailRule) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::argument("tabulated feedback needs at least one value"));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::argument(format!(
                "tabulated feedback value {bad} must be positive and finite"
            )));
        }
        Ok(FeedbackFunction::Tabulated {
            values: values.into(),
            tail,
        })
    }

    pub fn custom<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        FeedbackFunction::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// Raw evaluation at level `m`. May return a non-positive or non-finite
    /// value when the family overflows; use [`rate`](Self::rate) for the
    /// checked form.
    pub fn eval(&self, m: u64) -> f64 {
        match self {
            FeedbackFunction::Power { exponent } => ((m as f64) + 1.0).powf(*exponent),
            FeedbackFunction::Constant { value } => *value,
            FeedbackFunction::Tabulated { values, tail } => {
                let n = values.len();
                match usize::try_from(m) {
                    Ok(i) if i < n => values[i],
                    _ => match tail {
                        TailRule::RepeatLast => values[n - 1],
                        TailRule::PowerExtrapolate => {
                            let q = extrapolation_exponent(values);
                            values[n - 1] * ((m as f64 + 1.0) / n as f64).powf(q)
                        }
                    },
                }
            }
            FeedbackFunction::Custom { eval, .. } => eval(m),
        }
    }

    /// `f(m)`, rejecting values that are not representable positive reals.
    pub fn rate(&self, m: u64) -> Result<f64> {
        let v = self.eval(m);
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::numeric(format!("feedback {self} at level {m} evaluates to {v}")))
        }
    }

    /// `ln f(m)`, computed without forming `f(m)` where the family allows,
    /// so that weights beyond `f64::MAX` can still be compared.
    pub fn ln_eval(&self, m: u64) -> f64 {
        match self {
            FeedbackFunction::Power { exponent } => exponent * ((m as f64) + 1.0).ln(),
            FeedbackFunction::Tabulated {
                values,
                tail: TailRule::PowerExtrapolate,
            } if m as u128 >= values.len() as u128 => {
                let n = values.len();
                let q = extrapolation_exponent(values);
                values[n - 1].ln() + q * ((m as f64 + 1.0) / n as f64).ln()
            }
            _ => self.eval(m).ln(),
        }
    }

    /// Exponent `q` with `f(m) ~ c m^q` as `m -> inf`, when the family fixes one.
    pub fn tail_exponent(&self) -> Option<f64> {
        match self {
            FeedbackFunction::Power { exponent } => Some(*exponent),
            FeedbackFunction::Constant { .. } => Some(0.0),
            FeedbackFunction::Tabulated {
                tail: TailRule::RepeatLast,
                ..
            } => Some(0.0),
            FeedbackFunction::Tabulated {
                values,
                tail: TailRule::PowerExtrapolate,
            } => Some(extrapolation_exponent(values)),
            FeedbackFunction::Custom { .. } => None,
        }
    }
}

fn extrapolation_exponent(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    (values[n - 1] / values[n - 2]).ln() / (n as f64 / (n - 1) as f64).ln()
}

impl fmt::Debug for FeedbackFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeedbackFunction({self})")
    }
}

impl fmt::Display for FeedbackFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedbackFunction::Power { exponent } => write!(f, "power:{exponent}"),
            FeedbackFunction::Constant { value } => write!(f, "const:{value}"),
            FeedbackFunction::Tabulated { values, tail } => {
                f.write_str("table:")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                match tail {
                    TailRule::RepeatLast => f.write_str(";tail=repeat"),
                    TailRule::PowerExtrapolate => f.write_str(";tail=power"),
                }
            }
            FeedbackFunction::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

impl PartialEq for FeedbackFunction {
    fn eq(&self, other: &Self) -> bool {
        use FeedbackFunction::*;
        match (self, other) {
            (Power { exponent: a }, Power { exponent: b }) => a == b,
            (Constant { value: a }, Constant { value: b }) => a == b,
            (Tabulated { values: a, tail: ta }, Tabulated { values: b, tail: tb }) => a == b && ta == tb,
            (Custom { name: a, eval: fa }, Custom { name: b, eval: fb }) => a == b && Arc::ptr_eq(fa, fb),
            _ => false,
        }
    }
}

fn parse_real(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?} as a number")))
}

impl FromStr for FeedbackFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').ok_or_else(|| {
            Error::Parse(format!(
                "feedback {s:?}: expected KIND:PARAMS (power:P, const:C, table:V,...)"
            ))
        })?;
        match kind {
            "power" => FeedbackFunction::power(parse_real(rest, "power exponent")?),
            "const" | "constant" => FeedbackFunction::constant(parse_real(rest, "constant")?),
            "table" => {
                let (list, tail) = match rest.split_once(';') {
                    None => (rest, TailRule::RepeatLast),
                    Some((list, opt)) => {
                        let rule = match opt.trim() {
                            "tail=repeat" => TailRule::RepeatLast,
                            "tail=power" => TailRule::PowerExtrapolate,
                            other => {
                                return Err(Error::Parse(format!(
                                    "table tail rule {other:?}: expected tail=repeat or tail=power"
                                )))
                            }
                        };
                        (list, rule)
                    }
                };
                let values = list
                    .split(',')
                    .map(|v| parse_real(v, "table entry"))
                    .collect::<Result<Vec<_>>>()?;
                FeedbackFunction::tabulated(values, tail)
            }
            "custom" => Err(Error::Parse("custom feedback functions have no text form".into())),
            other => Err(Error::Parse(format!("unknown feedback kind {other:?}"))),
        }
    }
}

impl Serialize for FeedbackFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeedbackFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Memo table over levels for one feedback function.
///
/// Levels below the cap are computed once and kept; the table grows on
/// demand. Levels at or above the cap are recomputed on every call.
#[derive(Clone, Debug)]
pub struct FeedbackCache {
    f: FeedbackFunction,
    values: Vec<f64>,
    cap: usize,
}

impl FeedbackCache {
    pub fn new(f: FeedbackFunction) -> Self {
        Self::with_cap(f, DEFAULT_MEMO_CAP)
    }

    pub fn with_cap(f: FeedbackFunction, cap: usize) -> Self {
        FeedbackCache {
            f,
            values: Vec::new(),
            cap,
        }
    }

    pub fn function(&self) -> &FeedbackFunction {
        &self.f
    }

    pub fn memoized_len(&self) -> usize {
        self.values.len()
    }

    /// Checked `f(m)`.
    #[inline]
    pub fn rate(&mut self, m: u64) -> Result<f64> {
        if let Some(&v) = self.values.get(m as usize).filter(|_| m < self.values.len() as u64) {
            return Ok(v);
        }
        if m >= self.cap as u64 {
            return self.f.rate(m);
        }
        let target = ((m as usize + 1).max(2 * self.values.len()).max(64)).min(self.cap);
        self.values.reserve(target - self.values.len());
        for level in self.values.len()..target {
            match self.f.rate(level as u64) {
                Ok(v) => self.values.push(v),
                // Keep what is valid; the failing level is reported if it is the one asked for.
                Err(e) if level as u64 <= m => return Err(e),
                Err(_) => break,
            }
        }
        Ok(self.values[m as usize])
    }
}
