//! JSON instance and result files. Every number is an exact rational
//! string except the optional runtime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Choice, ComplexDemand, DemandEntry, DemandSet, Instance};
use crate::num::{format_rational, parse_rational, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub re: String,
    pub im: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: u32,
    pub demands: Vec<DemandRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_max_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `tan` of the largest argument beyond the imaginary axis, 0 when every real part is nonnegative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tan_theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub capacity: String,
    pub users: Vec<UserRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn to_instance(&self) -> Result<Instance> {
        let capacity = parse_rational(&self.capacity)?;
        let users = self
            .users
            .iter()
            .map(|u| {
                let entries = u
                    .demands
                    .iter()
                    .map(|d| {
                        Ok(DemandEntry::new(
                            ComplexDemand::new(parse_rational(&d.re)?, parse_rational(&d.im)?),
                            parse_rational(&d.value)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DemandSet::new(u.id, entries)
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(capacity, users)
    }

    /// Canonical file for an instance; automatically inserted zero demands
    /// are left out.
    pub fn from_instance(instance: &Instance, metadata: Option<Metadata>) -> Self {
        InstanceFile {
            capacity: format_rational(instance.capacity()),
            users: instance
                .users()
                .iter()
                .map(|u| UserRecord {
                    id: u.user_id(),
                    demands: u
                        .declared_entries()
                        .iter()
                        .map(|e| DemandRecord {
                            re: format_rational(&e.demand.re),
                            im: format_rational(&e.demand.im),
                            value: format_rational(&e.value),
                        })
                        .collect(),
                })
                .collect(),
            metadata,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRecord {
    pub re: String,
    pub im: String,
}

impl PointRecord {
    pub fn of(d: &ComplexDemand) -> Self {
        PointRecord {
            re: format_rational(&d.re),
            im: format_rational(&d.im),
        }
    }

    pub fn parse(&self) -> Result<ComplexDemand> {
        Ok(ComplexDemand::new(parse_rational(&self.re)?, parse_rational(&self.im)?))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guesses: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultFile {
    pub algorithm: String,
    pub parameters: Parameters,
    /// Per user: index of the served declared demand, or null for none.
    pub choices: Vec<Option<usize>>,
    pub welfare: String,
    pub total: PointRecord,
    /// `|total|^2 / C^2`.
    pub violation_factor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payments: Option<Vec<String>>,
    pub runtime_ms: Option<u64>,
    pub counts: Counts,
}

impl ResultFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    /// Records an entry allocation; zero demands are written as null.
    pub fn describe(instance: &Instance, allocation: &Allocation) -> Result<(Vec<Option<usize>>, PointRecord, String)> {
        let mut choices = Vec::with_capacity(instance.n());
        for (k, c) in allocation.choices().iter().enumerate() {
            match c {
                Choice::Entry(i) if instance.users()[k].entries()[*i].demand.is_zero() => choices.push(None),
                Choice::Entry(i) => choices.push(Some(*i)),
                Choice::Point(_) => return Err(Error::InvalidInput("result files record entry choices only".into())),
            }
        }
        let v = crate::model::violation_squared(allocation.total(), instance.capacity());
        Ok((choices, PointRecord::of(allocation.total()), format_rational(&v)))
    }

    /// Allocation described by `choices`.
    pub fn allocation(&self, instance: &Instance) -> Result<Allocation> {
        if self.choices.len() != instance.n() {
            return Err(Error::InvalidInput("choice count does not match the instance".into()));
        }
        let entries: Vec<usize> = self
            .choices
            .iter()
            .zip(instance.users())
            .map(|(c, u)| c.unwrap_or_else(|| u.zero_index()))
            .collect();
        Allocation::from_entries(instance, &entries)
    }

    pub fn welfare_value(&self) -> Result<Rational> {
        parse_rational(&self.welfare)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
  "capacity": "5",
  "users": [
    { "id": 1, "demands": [ { "re": "3", "im": "4", "value": "10" } ] },
    { "id": 2, "demands": [ { "re": "-1/2", "im": "3", "value": "7/3" } ] }
  ]
}"#;

    #[test]
    fn round_trip() {
        let f = InstanceFile::parse(SAMPLE).unwrap();
        let inst = f.to_instance().unwrap();
        let g = InstanceFile::from_instance(&inst, None);
        assert_eq!(f, g);
        let again = InstanceFile::parse(&g.to_json()).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn bad_json_is_a_parse_error() {
        assert!(matches!(InstanceFile::parse("{"), Err(Error::Parse(_))));
        let f = InstanceFile::parse(&SAMPLE.replace("\"3\", \"im\"", "\"x\", \"im\"")).unwrap();
        assert!(matches!(f.to_instance(), Err(Error::Parse(_))));
    }
}
