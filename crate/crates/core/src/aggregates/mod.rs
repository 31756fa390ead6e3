//! Counting aggregate statistics.
//!
//! A query fixes a value subset per attribute and counts the records that
//! fall inside every subset. Subsets are held as dense codes; a subset equal
//! to the whole domain places no condition on its attribute.

mod builders;
mod index;
mod release;

use crate::model::{AttributeSchema, Code, Dataset, PartialRecord, Record};

pub use builders::{
    load_query_spec, make_marginal_queries, parse_query_spec, query_spec_to_json, sample_queries, save_query_spec,
    QueryFile, RawQuery, RawSet,
};
pub use index::{query_cells, CompiledQueries, QueryMembershipIndex};
pub use release::{add_laplace_noise, laplace_sample, release, NoiseMeta, QueryRelease};

/// Value subset of one attribute.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValueSet {
    /// The full domain: no condition.
    All,
    /// Contiguous dense codes `lo..=hi`.
    Range { lo: Code, hi: Code },
    /// Sorted, duplicate-free dense codes.
    Values(Vec<Code>),
}

impl ValueSet {
    /// Normalizes a list of dense codes against a domain of `size` values.
    /// Returns `None` for an empty list or out-of-domain codes.
    pub fn from_codes(mut codes: Vec<Code>, size: usize) -> Option<ValueSet> {
        codes.sort_unstable();
        codes.dedup();
        let (&first, &last) = (codes.first()?, codes.last()?);
        if last as usize >= size {
            return None;
        }
        if codes.len() == size {
            return Some(ValueSet::All);
        }
        if (last - first) as usize + 1 == codes.len() {
            return Some(if first == last {
                ValueSet::Values(codes)
            } else {
                ValueSet::Range { lo: first, hi: last }
            });
        }
        Some(ValueSet::Values(codes))
    }

    pub fn single(code: Code) -> ValueSet {
        ValueSet::Values(vec![code])
    }

    #[inline]
    pub fn contains(&self, v: Code) -> bool {
        match self {
            ValueSet::All => true,
            ValueSet::Range { lo, hi } => *lo <= v && v <= *hi,
            ValueSet::Values(vs) => {
                if vs.len() <= 8 {
                    vs.contains(&v)
                } else {
                    vs.binary_search(&v).is_ok()
                }
            }
        }
    }

    pub fn is_all(&self) -> bool {
        matches!(self, ValueSet::All)
    }

    pub fn len(&self, domain_size: usize) -> usize {
        match self {
            ValueSet::All => domain_size,
            ValueSet::Range { lo, hi } => (hi - lo) as usize + 1,
            ValueSet::Values(vs) => vs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ValueSet::Values(vs) if vs.is_empty())
    }

    pub fn codes(&self, domain_size: usize) -> Vec<Code> {
        match self {
            ValueSet::All => (0..domain_size as Code).collect(),
            ValueSet::Range { lo, hi } => (*lo..=*hi).collect(),
            ValueSet::Values(vs) => vs.clone(),
        }
    }

    /// True when `self` is a subset of `other`.
    pub fn is_subset_of(&self, other: &ValueSet, domain_size: usize) -> bool {
        other.is_all() || self.codes(domain_size).iter().all(|&v| other.contains(v))
    }
}

/// `SELECT count(*) WHERE a_1 IN V_1 AND ... AND a_n IN V_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AggregateQuery {
    pub subsets: Vec<ValueSet>,
    pub label: Option<String>,
}

impl AggregateQuery {
    pub fn new(subsets: Vec<ValueSet>) -> Self {
        AggregateQuery { subsets, label: None }
    }

    /// The query counting every record.
    pub fn total(schema: &AttributeSchema) -> Self {
        AggregateQuery::new(vec![ValueSet::All; schema.len()])
    }

    /// Conditions the given attributes; all others are unconditioned.
    pub fn with_conditions(schema: &AttributeSchema, conditions: &[(usize, ValueSet)]) -> Self {
        let mut q = Self::total(schema);
        for (i, set) in conditions {
            q.subsets[*i] = set.clone();
        }
        q
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn is_total(&self) -> bool {
        self.subsets.iter().all(ValueSet::is_all)
    }

    pub fn conditions_sensitive(&self) -> bool {
        !self.subsets.last().map_or(true, ValueSet::is_all)
    }

    pub fn sensitive_set(&self) -> &ValueSet {
        self.subsets.last().expect("queries are non-empty")
    }

    /// Whether the record lies in every subset.
    #[inline]
    pub fn covers(&self, r: &Record) -> bool {
        self.covers_values(r.values())
    }

    #[inline]
    pub fn covers_values(&self, values: &[Code]) -> bool {
        self.subsets.iter().zip(values).all(|(s, &v)| s.contains(v))
    }

    /// Whether the non-sensitive conditions admit `partial`.
    pub fn covers_partial(&self, partial: &PartialRecord) -> bool {
        self.subsets.iter().zip(partial.values()).all(|(s, &v)| s.contains(v))
    }

    /// Number of potential records the query covers.
    pub fn cell_count(&self, schema: &AttributeSchema) -> usize {
        self.subsets
            .iter()
            .zip(schema.attributes())
            .map(|(s, a)| s.len(a.size()))
            .product()
    }

    pub fn validate(&self, schema: &AttributeSchema) -> bool {
        self.subsets.len() == schema.len()
            && self.subsets.iter().zip(schema.attributes()).all(|(s, a)| match s {
                ValueSet::All => true,
                ValueSet::Range { lo, hi } => lo <= hi && (*hi as usize) < a.size(),
                ValueSet::Values(vs) => !vs.is_empty() && vs.iter().all(|&v| (v as usize) < a.size()),
            })
    }
}

/// Whether `r` satisfies every condition of `q`.
pub fn covers(q: &AggregateQuery, r: &Record) -> bool {
    q.covers(r)
}

/// `q(D) = |U_q|`.
pub fn evaluate(q: &AggregateQuery, d: &Dataset) -> u64 {
    d.records().iter().filter(|r| q.covers(r)).count() as u64
}

/// Answers of every query on `d`; identical to calling [`evaluate`] per query.
pub fn evaluate_all(queries: &[AggregateQuery], d: &Dataset) -> Vec<u64> {
    if queries.is_empty() {
        return Vec::new();
    }
    let schema = d.schema();
    let covered: usize = queries.iter().map(|q| q.cell_count(schema)).sum();
    // Compiling pays off once the per-record scan would touch more entries
    // than the compiled cell lists.
    if covered <= d.len().saturating_mul(queries.len()).saturating_mul(4) {
        let compiled = CompiledQueries::new(schema, queries);
        let mut out = vec![0u64; queries.len()];
        for r in d.records() {
            compiled.add_cell(schema.cell_of(r.values()), &mut out);
        }
        out
    } else {
        queries.iter().map(|q| evaluate(q, d)).collect()
    }
}
