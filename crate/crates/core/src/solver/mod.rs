//! Bounded-integer feasibility problems over record multiplicities.
//!
//! One variable per potential record holds its multiplicity in a candidate
//! dataset. Released aggregates become sum-equality constraints over the
//! variables of the cells they cover; attacks add their own constraints and
//! fixings on top of a shared base problem.

mod lp;
mod presolve;
mod search;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aggregates::{query_cells, QueryRelease};
use crate::error::{Error, Result};
use crate::model::{AttributeSchema, Dataset};

pub use search::{enumerate_solutions, solve, solve_with_stats, Enumeration, SolveOutcome, SolveStats};

/// Search budgets. Hitting either yields [`SolveOutcome::Unknown`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverLimits {
    pub max_nodes: u64,
    #[serde(with = "secs")]
    pub max_time: Duration,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            max_nodes: 10_000_000,
            max_time: Duration::from_secs(30),
        }
    }
}

impl SolverLimits {
    pub fn nodes(max_nodes: u64) -> Self {
        SolverLimits {
            max_nodes,
            ..Default::default()
        }
    }
}

/// `Σ_{v ∈ vars} x_v = target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumConstraint {
    pub vars: Vec<u32>,
    pub target: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityProblem {
    schema: Arc<AttributeSchema>,
    dataset_size: u32,
    lower: Vec<u32>,
    upper: Vec<u32>,
    constraints: Vec<SumConstraint>,
    warnings: Vec<String>,
}

/// A value per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub values: Vec<u32>,
}

impl Assignment {
    pub fn get(&self, var: usize) -> u32 {
        self.values[var]
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| u64::from(v)).sum()
    }
}

impl FeasibilityProblem {
    /// Problem with no constraints: every variable in `[0, s]`.
    pub fn unconstrained(schema: Arc<AttributeSchema>, dataset_size: usize) -> Result<Self> {
        let s = u32::try_from(dataset_size)
            .map_err(|_| Error::Capacity(format!("dataset size {dataset_size} too large")))?;
        let n = schema.cell_count();
        Ok(FeasibilityProblem {
            schema,
            dataset_size: s,
            lower: vec![0; n],
            upper: vec![s; n],
            constraints: Vec::new(),
            warnings: Vec::new(),
        })
    }

    /// Raw problem from explicit bounds and constraints; used for generic
    /// instances that do not come from a release.
    pub fn from_parts(schema: Arc<AttributeSchema>, upper: Vec<u32>, constraints: Vec<SumConstraint>) -> Result<Self> {
        if upper.len() != schema.cell_count() {
            return Err(Error::Parameter(format!(
                "{} bounds for {} variables",
                upper.len(),
                schema.cell_count()
            )));
        }
        let s = upper.iter().copied().max().unwrap_or(0);
        let mut p = FeasibilityProblem {
            schema,
            dataset_size: s,
            lower: vec![0; upper.len()],
            upper,
            constraints: Vec::new(),
            warnings: Vec::new(),
        };
        for c in constraints {
            p.push_constraint(c.vars, c.target)?;
        }
        Ok(p)
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn dataset_size(&self) -> usize {
        self.dataset_size as usize
    }

    pub fn variable_count(&self) -> usize {
        self.upper.len()
    }

    pub fn constraints(&self) -> &[SumConstraint] {
        &self.constraints
    }

    pub fn lower(&self) -> &[u32] {
        &self.lower
    }

    pub fn upper(&self) -> &[u32] {
        &self.upper
    }

    pub fn bounds(&self, var: usize) -> (u32, u32) {
        (self.lower[var], self.upper[var])
    }

    /// Variables whose value is forced (`lower == upper`).
    pub fn fixed(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.lower
            .iter()
            .zip(&self.upper)
            .enumerate()
            .filter(|(_, (l, u))| l == u)
            .map(|(i, (l, _))| (i, *l))
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn push_constraint(&mut self, mut vars: Vec<u32>, target: i64) -> Result<()> {
        if let Some(&bad) = vars.iter().find(|&&v| v as usize >= self.upper.len()) {
            return Err(Error::Parameter(format!("variable {bad} does not exist")));
        }
        vars.sort_unstable();
        vars.dedup();
        self.constraints.push(SumConstraint { vars, target });
        Ok(())
    }

    /// Copy of the problem with one more sum constraint.
    pub fn add_sum_constraint(&self, vars: Vec<u32>, target: i64) -> Result<Self> {
        let mut p = self.clone();
        p.push_constraint(vars, target)?;
        Ok(p)
    }

    /// Copy of the problem with `var` forced to `value`.
    pub fn fix_variable(&self, var: usize, value: u32) -> Result<Self> {
        self.restrict_variable(var, value, value)
    }

    /// Copy of the problem with the domain of `var` intersected with `[lo, hi]`.
    pub fn restrict_variable(&self, var: usize, lo: u32, hi: u32) -> Result<Self> {
        if var >= self.upper.len() {
            return Err(Error::Parameter(format!("variable {var} does not exist")));
        }
        let (l, u) = (self.lower[var], self.upper[var]);
        let (nl, nu) = (l.max(lo), u.min(hi));
        if nl > nu {
            return Err(Error::Parameter(format!(
                "[{lo}, {hi}] does not intersect the domain [{l}, {u}] of variable {var}"
            )));
        }
        let mut p = self.clone();
        p.lower[var] = nl;
        p.upper[var] = nu;
        Ok(p)
    }

    /// Whether `a` satisfies every constraint and domain.
    pub fn is_satisfied_by(&self, a: &Assignment) -> bool {
        a.values.len() == self.upper.len()
            && a.values
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
            && self
                .constraints
                .iter()
                .all(|c| c.vars.iter().map(|&v| i64::from(a.values[v as usize])).sum::<i64>() == c.target)
    }
}

/// One variable per potential record, one constraint per released answer,
/// and the dataset-size constraint `Σ x_r = s`.
///
/// Negative (noisy) answers are clamped to 0 and recorded as warnings.
pub fn build_problem(rel: &QueryRelease) -> Result<FeasibilityProblem> {
    let mut p = FeasibilityProblem::unconstrained(rel.schema.clone(), rel.dataset_size)?;
    for (i, (q, &a)) in rel.queries.iter().zip(&rel.answers).enumerate() {
        let target = if a < 0 {
            let msg = format!(
                "answer {a} of query {} clamped to 0",
                q.label.clone().unwrap_or_else(|| format!("#{i}"))
            );
            log::warn!("{msg}");
            p.warnings.push(msg);
            0
        } else {
            a
        };
        let cells = query_cells(&rel.schema, q).into_iter().map(|c| c as u32).collect();
        p.push_constraint(cells, target)?;
    }
    let all = (0..p.variable_count() as u32).collect();
    p.push_constraint(all, i64::from(p.dataset_size))?;
    Ok(p)
}

/// Caps every variable by the smallest answer among the queries covering
/// its record (and by `s`). Variables capped at 0 become fixed.
pub fn tighten_domains(p: &FeasibilityProblem, rel: &QueryRelease) -> FeasibilityProblem {
    let mut out = p.clone();
    for (q, &a) in rel.queries.iter().zip(&rel.answers) {
        let cap = a.clamp(0, i64::from(out.dataset_size)) as u32;
        for cell in query_cells(&rel.schema, q) {
            if out.upper[cell] > cap {
                out.upper[cell] = cap;
            }
        }
    }
    for u in &mut out.upper {
        *u = (*u).min(out.dataset_size);
    }
    out
}

/// Dataset holding `σ(x_r)` copies of each potential record `r`.
pub fn assignment_to_dataset(schema: Arc<AttributeSchema>, a: &Assignment) -> Dataset {
    Dataset::from_multiplicities(schema, &a.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregates::{release, AggregateQuery, ValueSet};
    use crate::model::Record;

    fn schema22() -> Arc<AttributeSchema> {
        Arc::new(AttributeSchema::from_sizes(&[("a", 2), ("s", 2)]).unwrap())
    }

    #[test]
    fn structure_of_a_total_count_problem() {
        let schema = schema22();
        let d = Dataset::new(
            schema.clone(),
            vec![Record(vec![0, 0]), Record(vec![1, 1]), Record(vec![1, 0])],
        )
        .unwrap();
        let rel = release(&[AggregateQuery::total(&schema)], &d);
        let p = build_problem(&rel).unwrap();
        assert_eq!(p.variable_count(), 4);
        assert_eq!(p.constraints().len(), 2);
        assert_eq!(p.constraints()[0].vars, p.constraints()[1].vars);

        let empty = release(&[], &d);
        let p = build_problem(&empty).unwrap();
        assert_eq!(p.constraints().len(), 1);
        assert_eq!(p.constraints()[0].target, 3);
    }

    #[test]
    fn negative_answers_are_clamped_with_warning() {
        let schema = schema22();
        let d = Dataset::new(schema.clone(), vec![Record(vec![0, 0])]).unwrap();
        let mut rel = release(&[AggregateQuery::total(&schema)], &d);
        rel.answers[0] = -2;
        let p = build_problem(&rel).unwrap();
        assert_eq!(p.constraints()[0].target, 0);
        assert_eq!(p.warnings().len(), 1);
    }

    #[test]
    fn tightening() {
        let schema = Arc::new(AttributeSchema::from_sizes(&[("a", 3), ("s", 2)]).unwrap());
        let q = |a: u32| AggregateQuery::with_conditions(&schema, &[(0, ValueSet::single(a))]);
        let q0s = AggregateQuery::new(vec![ValueSet::single(0), ValueSet::single(1)]);
        let rel = QueryRelease {
            schema: schema.clone(),
            queries: vec![q(0), q0s, q(1)],
            answers: vec![7, 3, 0],
            dataset_size: 10,
            noise: None,
        };
        let p = tighten_domains(&build_problem(&rel).unwrap(), &rel);
        assert_eq!(p.upper()[schema.cell_of(&[0, 1])], 3);
        assert_eq!(p.upper()[schema.cell_of(&[0, 0])], 7);
        assert_eq!(p.upper()[schema.cell_of(&[2, 0])], 10);
        assert_eq!(p.bounds(schema.cell_of(&[1, 1])), (0, 0));
        assert!(p.fixed().any(|(v, val)| v == schema.cell_of(&[1, 0]) && val == 0));
    }

    #[test]
    fn constraint_and_fixing_are_copies() {
        let schema = schema22();
        let p = FeasibilityProblem::unconstrained(schema, 2).unwrap();
        let q = p.add_sum_constraint(vec![0, 1], 1).unwrap();
        assert_eq!(q.constraints().len(), p.constraints().len() + 1);
        let r = q.fix_variable(0, 0).unwrap();
        assert_eq!(r.bounds(0), (0, 0));
        assert_eq!(q.bounds(0), (0, 2));
        assert!(q.fix_variable(0, 3).is_err());
        assert!(q.add_sum_constraint(vec![9], 1).is_err());
    }

    #[test]
    fn assignment_datasets() {
        let schema = schema22();
        let zero = Assignment { values: vec![0; 4] };
        assert!(assignment_to_dataset(schema.clone(), &zero).is_empty());
        let three = Assignment {
            values: vec![0, 0, 3, 0],
        };
        let d = assignment_to_dataset(schema.clone(), &three);
        assert_eq!(
            d.records(),
            &[Record(vec![1, 0]), Record(vec![1, 0]), Record(vec![1, 0])]
        );
        let orig = Dataset::new(
            schema.clone(),
            vec![Record(vec![1, 1]), Record(vec![0, 0]), Record(vec![1, 1])],
        )
        .unwrap();
        let back = assignment_to_dataset(
            schema,
            &Assignment {
                values: orig.multiplicities(),
            },
        );
        assert!(back.same_multiset(&orig));
    }
}
