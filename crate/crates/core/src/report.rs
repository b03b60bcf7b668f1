//! Checked inequalities attached to constructions and CLI reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "==")]
    Equal,
}

/// `lhs relation rhs` up to `tolerance`; `ok` is recomputable from the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub ok: bool,
}

impl Certificate {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, relation: Relation, tolerance: f64) -> Self {
        let mut c = Self {
            name: name.into(),
            lhs,
            rhs,
            relation,
            tolerance,
            ok: false,
        };
        c.ok = c.recompute();
        c
    }

    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(name, lhs, rhs, Relation::LessEq, tolerance)
    }

    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::new(name, lhs, rhs, Relation::Less, 0.0)
    }

    pub fn eq(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(name, lhs, rhs, Relation::Equal, tolerance)
    }

    pub fn recompute(&self) -> bool {
        match self.relation {
            Relation::LessEq => self.lhs <= self.rhs + self.tolerance,
            Relation::Less => self.lhs < self.rhs + self.tolerance,
            Relation::Equal => (self.lhs - self.rhs).abs() <= self.tolerance,
        }
    }
}
