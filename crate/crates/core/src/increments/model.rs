//! Per-level waiting-time laws.
//!
//! Level `j >= 1` is the wait `X_j` taken to move from value `j - 1` to `j`.
//! Text form, one family name followed by `key=value` parameters:
//!
//! ```text
//! exponential feedback=FEEDBACK      X_j ~ Exp(f(j - 1))
//! uniform base=B jitter=W            X_j = B + W U, U ~ U[0, 1)
//! gamma shape=K feedback=FEEDBACK    X_j ~ Gamma(K, rate f(j - 1))
//! empirical samples=S1,S2,...        X_j drawn uniformly from the list
//! ```
//!
//! `uniform base=0 jitter=0` is accepted: every wait is zero and any race
//! using it explodes at time 0. The engine's event cap catches this.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{Continuous, ContinuousCDF};

use super::feedback::{FeedbackCache, FeedbackFunction};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum WaitingTimeModel {
    Exponential { feedback: FeedbackFunction },
    DeterministicPlusUniform { base: f64, jitter: f64 },
    Gamma { shape: f64, feedback: FeedbackFunction },
    Empirical { samples: Arc<[f64]> },
}

/// Level-`j` exponential with rate `f(j - 1)`; the continuous-time embedding
/// of the balls-in-bins process.
pub fn make_exponential_model(feedback: FeedbackFunction) -> WaitingTimeModel {
    WaitingTimeModel::Exponential { feedback }
}

impl WaitingTimeModel {
    pub fn deterministic_plus_uniform(base: f64, jitter: f64) -> Result<Self> {
        if !(base.is_finite() && base >= 0.0 && jitter.is_finite() && jitter >= 0.0) {
            return Err(Error::argument(format!(
                "uniform waits need finite base >= 0 and jitter >= 0, got base={base} jitter={jitter}"
            )));
        }
        Ok(WaitingTimeModel::DeterministicPlusUniform { base, jitter })
    }

    pub fn gamma(shape: f64, feedback: FeedbackFunction) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::argument(format!(
                "gamma shape {shape} must be positive and finite"
            )));
        }
        Ok(WaitingTimeModel::Gamma { shape, feedback })
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::argument("empirical waits need at least one sample"));
        }
        if let Some(bad) = samples.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::argument(format!("empirical wait {bad} must be finite and >= 0")));
        }
        Ok(WaitingTimeModel::Empirical {
            samples: samples.into(),
        })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            WaitingTimeModel::Exponential { .. } => "exponential",
            WaitingTimeModel::DeterministicPlusUniform { .. } => "uniform",
            WaitingTimeModel::Gamma { .. } => "gamma",
            WaitingTimeModel::Empirical { .. } => "empirical",
        }
    }

    pub fn feedback(&self) -> Option<&FeedbackFunction> {
        match self {
            WaitingTimeModel::Exponential { feedback } | WaitingTimeModel::Gamma { feedback, .. } => Some(feedback),
            _ => None,
        }
    }

    /// Resolve the law of `X_level`.
    pub fn law(&self, level: u64) -> Result<LevelLaw<'_>> {
        check_level(level)?;
        Ok(match self {
            WaitingTimeModel::Exponential { feedback } => LevelLaw::Exponential {
                rate: feedback.rate(level - 1)?,
            },
            WaitingTimeModel::DeterministicPlusUniform { base, jitter } => LevelLaw::Uniform {
                base: *base,
                jitter: *jitter,
            },
            WaitingTimeModel::Gamma { shape, feedback } => LevelLaw::Gamma {
                shape: *shape,
                rate: feedback.rate(level - 1)?,
            },
            WaitingTimeModel::Empirical { samples } => LevelLaw::Empirical(samples),
        })
    }

    /// One draw of `X_level`. Deterministic given the state of `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, level: u64, rng: &mut R) -> Result<f64> {
        Ok(self.law(level)?.sample(rng))
    }

    /// A sampler that memoizes feedback evaluations across levels.
    pub fn sampler(&self) -> LevelSampler<'_> {
        LevelSampler {
            model: self,
            cache: self.feedback().map(|f| FeedbackCache::new(f.clone())),
        }
    }

    pub fn mean(&self, level: u64) -> Result<f64> {
        Ok(self.law(level)?.mean())
    }

    pub fn variance(&self, level: u64) -> Result<f64> {
        Ok(self.law(level)?.variance())
    }

    /// Registered CDF of `X_level` at `x`.
    pub fn cdf(&self, level: u64, x: f64) -> Result<f64> {
        Ok(self.law(level)?.cdf(x))
    }
}

/// `sample_increment(model, level, rng)`: one draw of `X_level`.
pub fn sample_increment<R: Rng + ?Sized>(model: &WaitingTimeModel, level: u64, rng: &mut R) -> Result<f64> {
    model.sample(level, rng)
}

fn check_level(level: u64) -> Result<()> {
    if level == 0 {
        Err(Error::argument("levels start at 1 (X_j is the wait from j - 1 to j)"))
    } else {
        Ok(())
    }
}

/// The law of one level's waiting time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelLaw<'a> {
    Exponential { rate: f64 },
    Uniform { base: f64, jitter: f64 },
    Gamma { shape: f64, rate: f64 },
    Empirical(&'a [f64]),
}

impl LevelLaw<'_> {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LevelLaw::Exponential { rate } => {
                let u: f64 = rng.sample(Open01);
                -u.ln() / rate
            }
            LevelLaw::Uniform { base, jitter } => base + jitter * rng.random::<f64>(),
            LevelLaw::Gamma { shape, rate } => {
                // Parameters were validated on construction.
                rand_distr::Gamma::new(shape, 1.0 / rate)
                    .expect("validated gamma parameters")
                    .sample(rng)
            }
            LevelLaw::Empirical(samples) => samples[rng.random_range(0..samples.len())],
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LevelLaw::Exponential { rate } => 1.0 / rate,
            LevelLaw::Uniform { base, jitter } => base + 0.5 * jitter,
            LevelLaw::Gamma { shape, rate } => shape / rate,
            LevelLaw::Empirical(s) => s.iter().sum::<f64>() / s.len() as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            LevelLaw::Exponential { rate } => 1.0 / (rate * rate),
            LevelLaw::Uniform { jitter, .. } => jitter * jitter / 12.0,
            LevelLaw::Gamma { shape, rate } => shape / (rate * rate),
            LevelLaw::Empirical(s) => {
                let m = self.mean();
                s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / s.len() as f64
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            LevelLaw::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            LevelLaw::Uniform { base, jitter } => {
                if jitter == 0.0 {
                    if x >= base {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    ((x - base) / jitter).clamp(0.0, 1.0)
                }
            }
            LevelLaw::Gamma { shape, rate } => statrs_gamma(shape, rate).cdf(x.max(0.0)),
            LevelLaw::Empirical(s) => s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64,
        }
    }

    /// Survival function `P(X > x)`, computed without `1 - cdf` cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            LevelLaw::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            LevelLaw::Gamma { shape, rate } => statrs_gamma(shape, rate).sf(x.max(0.0)),
            _ => 1.0 - self.cdf(x),
        }
    }

    /// Density, for laws that have one.
    pub fn density(&self, x: f64) -> Option<f64> {
        match *self {
            LevelLaw::Exponential { rate } => Some(if x < 0.0 { 0.0 } else { rate * (-rate * x).exp() }),
            LevelLaw::Uniform { base, jitter } if jitter > 0.0 => Some(if x >= base && x <= base + jitter {
                1.0 / jitter
            } else {
                0.0
            }),
            LevelLaw::Gamma { shape, rate } => Some(if x <= 0.0 {
                0.0
            } else {
                statrs_gamma(shape, rate).pdf(x)
            }),
            _ => None,
        }
    }

    /// Closed support `[lo, hi]` of a law with a density.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            LevelLaw::Uniform { base, jitter } => (base, base + jitter),
            LevelLaw::Empirical(s) => (
                s.iter().copied().fold(f64::INFINITY, f64::min),
                s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            _ => (0.0, f64::INFINITY),
        }
    }
}

fn statrs_gamma(shape: f64, rate: f64) -> statrs::distribution::Gamma {
    statrs::distribution::Gamma::new(shape, rate).expect("validated gamma parameters")
}

/// Draws waits level by level, evaluating the feedback function at most once
/// per level (up to the memo cap).
#[derive(Clone, Debug)]
pub struct LevelSampler<'m> {
    model: &'m WaitingTimeModel,
    cache: Option<FeedbackCache>,
}

impl LevelSampler<'_> {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&mut self, level: u64, rng: &mut R) -> Result<f64> {
        check_level(level)?;
        let law = match (self.model, self.cache.as_mut()) {
            (WaitingTimeModel::Exponential { .. }, Some(c)) => LevelLaw::Exponential {
                rate: c.rate(level - 1)?,
            },
            (WaitingTimeModel::Gamma { shape, .. }, Some(c)) => LevelLaw::Gamma {
                shape: *shape,
                rate: c.rate(level - 1)?,
            },
            _ => self.model.law(level)?,
        };
        Ok(law.sample(rng))
    }
}

/// `X_j^s = X_j^(1) - X_j^(2)` for independent copies at a fixed level.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizedIncrement {
    level: u64,
    model: WaitingTimeModel,
}

pub fn symmetrized_sampler(model: &WaitingTimeModel, level: u64) -> Result<SymmetrizedIncrement> {
    // Resolve once so invalid levels and rates fail here, not on first draw.
    model.law(level)?;
    Ok(SymmetrizedIncrement {
        level,
        model: model.clone(),
    })
}

impl SymmetrizedIncrement {
    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn model(&self) -> &WaitingTimeModel {
        &self.model
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let law = self.model.law(self.level).expect("level validated on construction");
        law.sample(rng) - law.sample(rng)
    }
}

impl fmt::Display for WaitingTimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaitingTimeModel::Exponential { feedback } => write!(f, "exponential feedback={feedback}"),
            WaitingTimeModel::DeterministicPlusUniform { base, jitter } => {
                write!(f, "uniform base={base} jitter={jitter}")
            }
            WaitingTimeModel::Gamma { shape, feedback } => write!(f, "gamma shape={shape} feedback={feedback}"),
            WaitingTimeModel::Empirical { samples } => {
                f.write_str("empirical samples=")?;
                for (i, s) in samples.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for WaitingTimeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let family = words
            .next()
            .ok_or_else(|| Error::Parse("empty model description".into()))?;
        let mut params: Vec<(&str, &str)> = Vec::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("model parameter {w:?}: expected key=value")))?;
            if params.iter().any(|(seen, _)| *seen == k) {
                return Err(Error::Parse(format!("model parameter {k:?} given twice")));
            }
            params.push((k, v));
        }
        let mut take = |key: &str| -> Option<&str> {
            let i = params.iter().position(|(k, _)| *k == key)?;
            Some(params.remove(i).1)
        };
        let real = |v: Option<&str>, key: &str, default: Option<f64>| -> Result<f64> {
            match v {
                Some(v) => v
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("model parameter {key}={v:?} is not a number"))),
                None => default.ok_or_else(|| Error::Parse(format!("model family {family:?} needs {key}="))),
            }
        };
        let model = match family {
            "exponential" | "exp" => {
                let fb = take("feedback").unwrap_or("const:1").parse()?;
                make_exponential_model(fb)
            }
            "uniform" | "deterministic-plus-uniform" => {
                let base = real(take("base"), "base", None)?;
                let jitter = real(take("jitter"), "jitter", Some(0.0))?;
                WaitingTimeModel::deterministic_plus_uniform(base, jitter)?
            }
            "gamma" => {
                let shape = real(take("shape"), "shape", None)?;
                let fb = take("feedback").unwrap_or("const:1").parse()?;
                WaitingTimeModel::gamma(shape, fb)?
            }
            "empirical" => {
                let list = take("samples").ok_or_else(|| Error::Parse("empirical needs samples=".into()))?;
                let samples = list
                    .split(',')
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| Error::Parse(format!("empirical sample {v:?} is not a number")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                WaitingTimeModel::empirical(samples)?
            }
            other => return Err(Error::Parse(format!("unknown waiting-time family {other:?}"))),
        };
        if let Some((k, _)) = params.first() {
            return Err(Error::Parse(format!("family {family:?} has no parameter {k:?}")));
        }
        Ok(model)
    }
}

impl Serialize for WaitingTimeModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WaitingTimeModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn level_zero_is_rejected() {
        let m = make_exponential_model(FeedbackFunction::constant(1.0).unwrap());
        assert!(matches!(m.sample(0, &mut rng(1)), Err(Error::Argument(_))));
        assert!(symmetrized_sampler(&m, 0).is_err());
    }

    #[test]
    fn replaying_a_seed_replays_the_draw() {
        let m = make_exponential_model(FeedbackFunction::constant(1.0).unwrap());
        let a = m.sample(5, &mut rng(42)).unwrap();
        let b = m.sample(5, &mut rng(42)).unwrap();
        assert!(a >= 0.0 && a.is_finite());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn zero_jitter_is_exact() {
        let m = WaitingTimeModel::deterministic_plus_uniform(1.0, 0.0).unwrap();
        assert_eq!(m.sample(3, &mut rng(0)).unwrap(), 1.0);
        let s = symmetrized_sampler(&m, 3).unwrap();
        let mut r = rng(9);
        assert!((0..100).all(|_| s.sample(&mut r) == 0.0));
    }

    #[test]
    fn exponential_rates_follow_feedback() {
        let rate = |m: &WaitingTimeModel, j| match m.law(j).unwrap() {
            LevelLaw::Exponential { rate } => rate,
            _ => unreachable!(),
        };
        let one = make_exponential_model(FeedbackFunction::constant(1.0).unwrap());
        assert!((1..50).all(|j| rate(&one, j) == 1.0));
        let lin = make_exponential_model(FeedbackFunction::power(1.0).unwrap());
        assert!((1..50).all(|j| rate(&lin, j) == j as f64));
        let tab = make_exponential_model("table:2,3;tail=repeat".parse().unwrap());
        assert_eq!([rate(&tab, 1), rate(&tab, 2), rate(&tab, 3)], [2.0, 3.0, 3.0]);
    }

    #[test]
    fn rate_overflow_surfaces() {
        let m = make_exponential_model(FeedbackFunction::power(500.0).unwrap());
        assert!(matches!(m.sample(20, &mut rng(1)), Err(Error::NumericRange(_))));
        assert!(matches!(
            m.sampler().sample(20, &mut rng(1)),
            Err(Error::NumericRange(_))
        ));
    }

    #[test]
    fn cached_sampler_matches_direct_draws() {
        let m = WaitingTimeModel::gamma(1.5, FeedbackFunction::power(0.5).unwrap()).unwrap();
        let (mut a, mut b) = (rng(3), rng(3));
        let mut sampler = m.sampler();
        for j in 1..200 {
            assert_eq!(
                sampler.sample(j, &mut a).unwrap().to_bits(),
                m.sample(j, &mut b).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(WaitingTimeModel::deterministic_plus_uniform(-1.0, 0.0).is_err());
        assert!(WaitingTimeModel::deterministic_plus_uniform(1.0, f64::INFINITY).is_err());
        assert!(WaitingTimeModel::gamma(0.0, FeedbackFunction::constant(1.0).unwrap()).is_err());
        assert!(WaitingTimeModel::empirical(vec![]).is_err());
        assert!(WaitingTimeModel::empirical(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn text_form_round_trips() {
        for s in [
            "exponential feedback=power:0.5",
            "uniform base=1 jitter=0.25",
            "gamma shape=2 feedback=table:1,2;tail=power",
            "empirical samples=0.5,1,2",
        ] {
            let m: WaitingTimeModel = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!(
            "exp".parse::<WaitingTimeModel>().unwrap(),
            make_exponential_model(FeedbackFunction::constant(1.0).unwrap())
        );
        assert!("uniform jitter=1".parse::<WaitingTimeModel>().is_err());
        assert!("uniform base=1 colour=red".parse::<WaitingTimeModel>().is_err());
        assert!("weibull shape=2".parse::<WaitingTimeModel>().is_err());
        assert!("uniform base=1 base=2".parse::<WaitingTimeModel>().is_err());
    }
}
