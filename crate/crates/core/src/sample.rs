use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One group of a one-way layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    /// Dose in study units, when known.
    pub dose: Option<f64>,
    pub responses: Vec<f64>,
}

impl Group {
    pub fn new(label: impl Into<String>, responses: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            dose: None,
            responses,
        }
    }

    pub fn with_dose(mut self, dose: f64) -> Self {
        self.dose = Some(dose);
        self
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.responses.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample variance with denominator `n - 1`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.responses.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (self.len() as f64 - 1.0)
    }
}

/// Control group (index 0) plus `k >= 1` treatment groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSample {
    groups: Vec<Group>,
}

impl GroupedSample {
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::InvalidDesign(format!(
                "need a control and at least one treatment group, got {} group(s)",
                groups.len()
            )));
        }
        for g in &groups {
            if g.len() < 2 {
                return Err(Error::InvalidDesign(format!(
                    "group `{}` has {} observation(s); at least 2 are required",
                    g.label,
                    g.len()
                )));
            }
            if let Some(y) = g.responses.iter().find(|y| !y.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "group `{}` contains the non-finite response {y}",
                    g.label
                )));
            }
        }
        Ok(Self { groups })
    }

    /// Groups labelled `"0"`, `"1"`, ... in the given order; the first is the control.
    pub fn from_vecs(data: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            data.into_iter()
                .enumerate()
                .map(|(i, y)| Group::new(i.to_string(), y))
                .collect(),
        )
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn control(&self) -> &Group {
        &self.groups[0]
    }

    /// Number of treatment groups.
    pub fn k(&self) -> usize {
        self.groups.len() - 1
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Group::len).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(Group::len).sum()
    }

    pub fn means(&self) -> Vec<f64> {
        self.groups.iter().map(Group::mean).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.groups.iter().map(Group::variance).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.label.as_str()).collect()
    }

    /// Responses in group order with their group index.
    pub fn observations(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, grp)| grp.responses.iter().map(move |&y| (g, y)))
    }

    /// Applies `f` to every response.
    pub fn map_responses(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.groups
                .iter()
                .map(|g| Group {
                    label: g.label.clone(),
                    dose: g.dose,
                    responses: g.responses.iter().map(|&y| f(y)).collect(),
                })
                .collect(),
        )
    }

    /// Keeps the control and the listed treatment groups (1-based indices).
    pub fn subset(&self, treatments: &[usize]) -> Result<Self> {
        let mut groups = vec![self.groups[0].clone()];
        for &i in treatments {
            let g = self.groups.get(i).filter(|_| i > 0).ok_or_else(|| {
                Error::InvalidArgument(format!("no treatment group with index {i}"))
            })?;
            groups.push(g.clone());
        }
        Self::new(groups)
    }
}
