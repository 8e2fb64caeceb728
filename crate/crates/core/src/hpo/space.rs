use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HpoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(i) => Some(i),
            ParamValue::Float(f) if f.fract() == 0.0 => Some(f as i64),
            _ => None,
        }
    }

    /// Equality that treats `Int(3)` and `Float(3.0)` as the same value.
    pub fn matches(&self, other: &ParamValue) -> bool {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => self == other,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Categorical { choices: Vec<ParamValue> },
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    IntUniform { low: i64, high: i64 },
}

/// The dimension is only sampled when `parent` took the value `equals`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub equals: ParamValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl Dimension {
    pub fn categorical(name: &str, choices: Vec<ParamValue>) -> Self {
        Self::new(name, Domain::Categorical { choices })
    }

    pub fn uniform(name: &str, low: f64, high: f64) -> Self {
        Self::new(name, Domain::Uniform { low, high })
    }

    pub fn log_uniform(name: &str, low: f64, high: f64) -> Self {
        Self::new(name, Domain::LogUniform { low, high })
    }

    pub fn int_uniform(name: &str, low: i64, high: i64) -> Self {
        Self::new(name, Domain::IntUniform { low, high })
    }

    fn new(name: &str, domain: Domain) -> Self {
        Self {
            name: name.to_string(),
            domain,
            condition: None,
        }
    }

    pub fn when(mut self, parent: &str, equals: impl Into<ParamValue>) -> Self {
        self.condition = Some(Condition {
            parent: parent.to_string(),
            equals: equals.into(),
        });
        self
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match &self.domain {
            Domain::Categorical { choices } => choices.iter().any(|c| c.matches(value)),
            Domain::Uniform { low, high } => value.as_f64().is_some_and(|x| x >= *low && x <= *high),
            Domain::LogUniform { low, high } => {
                value.as_f64().is_some_and(|x| x >= *low && x <= *high)
            }
            Domain::IntUniform { low, high } => {
                matches!(value, ParamValue::Int(_)) && value.as_i64().is_some_and(|x| x >= *low && x <= *high)
            }
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match &self.domain {
            Domain::Categorical { choices } => choices[rng.random_range(0..choices.len())].clone(),
            Domain::Uniform { low, high } => ParamValue::Float(rng.random_range(*low..=*high)),
            Domain::LogUniform { low, high } => {
                let x = rng.random_range(low.ln()..=high.ln()).exp();
                ParamValue::Float(x.clamp(*low, *high))
            }
            Domain::IntUniform { low, high } => ParamValue::Int(rng.random_range(*low..=*high)),
        }
    }

    pub fn is_active(&self, params: &Params) -> bool {
        match &self.condition {
            None => true,
            Some(c) => params.get(&c.parent).is_some_and(|v| v.matches(&c.equals)),
        }
    }
}

/// A validated search space. Dimensions are kept in an order where every
/// parent precedes its conditional children.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dimension>", into = "Vec<Dimension>")]
pub struct SearchSpace {
    dimensions: Vec<Dimension>,
}

impl TryFrom<Vec<Dimension>> for SearchSpace {
    type Error = HpoError;

    fn try_from(dimensions: Vec<Dimension>) -> Result<Self, Self::Error> {
        SearchSpace::new(dimensions)
    }
}

impl From<SearchSpace> for Vec<Dimension> {
    fn from(space: SearchSpace) -> Self {
        space.dimensions
    }
}

impl SearchSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self, HpoError> {
        let invalid = |msg: String| Err(HpoError::InvalidSpace(msg));
        let mut by_name: HashMap<&str, &Dimension> = HashMap::new();
        for d in &dimensions {
            if by_name.insert(d.name.as_str(), d).is_some() {
                return invalid(format!("duplicate dimension `{}`", d.name));
            }
            match &d.domain {
                Domain::Categorical { choices } if choices.is_empty() => {
                    return invalid(format!("`{}` has no choices", d.name))
                }
                Domain::Uniform { low, high } if !(low < high && low.is_finite() && high.is_finite()) => {
                    return invalid(format!("`{}` needs low < high", d.name))
                }
                Domain::LogUniform { low, high } if !(*low > 0.0 && low < high && high.is_finite()) => {
                    return invalid(format!("`{}` needs 0 < low < high", d.name))
                }
                Domain::IntUniform { low, high } if low > high => {
                    return invalid(format!("`{}` needs low <= high", d.name))
                }
                _ => {}
            }
        }
        for d in &dimensions {
            if let Some(c) = &d.condition {
                let Some(parent) = by_name.get(c.parent.as_str()) else {
                    return invalid(format!("`{}` depends on unknown `{}`", d.name, c.parent));
                };
                match &parent.domain {
                    Domain::Categorical { .. } if parent.contains(&c.equals) => {}
                    Domain::Categorical { .. } => {
                        return invalid(format!(
                            "`{}` waits for `{}` = {}, which is not a choice",
                            d.name, c.parent, c.equals
                        ))
                    }
                    _ => {
                        return invalid(format!(
                            "`{}` conditions on non-categorical `{}`",
                            d.name, c.parent
                        ))
                    }
                }
            }
        }

        // parents first; a dimension whose ancestry never reaches a root is on a cycle
        let mut ordered: Vec<Dimension> = Vec::with_capacity(dimensions.len());
        let mut remaining = dimensions;
        while !remaining.is_empty() {
            let before = remaining.len();
            let (ready, blocked): (Vec<_>, Vec<_>) = remaining.into_iter().partition(|d| {
                d.condition
                    .as_ref()
                    .is_none_or(|c| ordered.iter().any(|o| o.name == c.parent))
            });
            ordered.extend(ready);
            remaining = blocked;
            if remaining.len() == before {
                return invalid(format!(
                    "conditional dimensions form a cycle: {}",
                    remaining.iter().map(|d| d.name.as_str()).collect::<Vec<_>>().join(", ")
                ));
            }
        }
        Ok(Self {
            dimensions: ordered,
        })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    /// Copy with `extra` appended when no dimension of that name exists yet.
    pub fn with_dimension(&self, extra: Dimension) -> Result<Self, HpoError> {
        if self.get(&extra.name).is_some() {
            return Ok(self.clone());
        }
        let mut dims = self.dimensions.clone();
        dims.push(extra);
        Self::new(dims)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Params {
        let mut params = Params::new();
        for d in &self.dimensions {
            if d.is_active(&params) {
                let value = d.sample_uniform(rng);
                params.insert(d.name.clone(), value);
            }
        }
        params
    }

    /// Checks domains, conditionality and that no unknown keys are present.
    pub fn validate(&self, params: &Params) -> Result<(), String> {
        for key in params.keys() {
            if self.get(key).is_none() {
                return Err(format!("unknown parameter `{key}`"));
            }
        }
        for d in &self.dimensions {
            match (d.is_active(params), params.get(&d.name)) {
                (true, None) => return Err(format!("missing parameter `{}`", d.name)),
                (false, Some(_)) => return Err(format!("`{}` set while inactive", d.name)),
                (true, Some(v)) if !d.contains(v) => {
                    return Err(format!("`{}` = {v} outside its domain", d.name))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
