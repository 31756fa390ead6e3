use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AttributeSchema;
use crate::seed;

use super::{AggregateQuery, ValueSet};

/// File encoding of one attribute condition, in raw codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawSet {
    Values(Vec<i64>),
    /// Every domain code `c` with `lo <= c <= hi`.
    Range {
        range: [i64; 2],
    },
}

/// File encoding of a query; attributes absent from `where` are unconditioned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(rename = "where", default)]
    pub conditions: BTreeMap<String, RawSet>,
}

/// Query spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_hash: Option<String>,
    pub queries: Vec<RawQuery>,
}

impl RawQuery {
    pub fn encode(schema: &AttributeSchema, q: &AggregateQuery) -> RawQuery {
        let mut conditions = BTreeMap::new();
        for (i, set) in q.subsets.iter().enumerate() {
            let attr = schema.attribute(i);
            let sorted = attr.domain.windows(2).all(|w| w[0] < w[1]);
            let raw = match set {
                ValueSet::All => continue,
                ValueSet::Range { lo, hi } if sorted => RawSet::Range {
                    range: [attr.decode(*lo), attr.decode(*hi)],
                },
                other => RawSet::Values(other.codes(attr.size()).into_iter().map(|c| attr.decode(c)).collect()),
            };
            conditions.insert(attr.name.clone(), raw);
        }
        RawQuery {
            label: q.label.clone(),
            conditions,
        }
    }

    pub fn decode(&self, schema: &AttributeSchema, position: usize) -> Result<AggregateQuery> {
        let name = self.label.clone().unwrap_or_else(|| format!("#{position}"));
        let err = |message: String| Error::QuerySpec {
            query: name.clone(),
            message,
        };
        let mut q = AggregateQuery::total(schema);
        q.label = self.label.clone();
        for (attr_name, raw) in &self.conditions {
            let i = schema
                .index_of(attr_name)
                .ok_or_else(|| err(format!("unknown attribute `{attr_name}`")))?;
            let attr = schema.attribute(i);
            let codes: Vec<u32> = match raw {
                RawSet::Values(vs) => vs
                    .iter()
                    .map(|&v| {
                        attr.encode(v)
                            .ok_or_else(|| err(format!("value {v} outside the domain of `{attr_name}`")))
                    })
                    .collect::<Result<_>>()?,
                RawSet::Range { range: [lo, hi] } => {
                    if lo > hi {
                        return Err(err(format!("empty range [{lo}, {hi}] for `{attr_name}`")));
                    }
                    if attr.encode(*lo).is_none() || attr.encode(*hi).is_none() {
                        return Err(err(format!("range [{lo}, {hi}] leaves the domain of `{attr_name}`")));
                    }
                    attr.domain
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| (*lo..=*hi).contains(*v))
                        .map(|(c, _)| c as u32)
                        .collect()
                }
            };
            q.subsets[i] = ValueSet::from_codes(codes, attr.size())
                .ok_or_else(|| err(format!("empty condition for `{attr_name}`")))?;
        }
        Ok(q)
    }
}

pub fn parse_query_spec(text: &str, schema: &AttributeSchema) -> Result<Vec<AggregateQuery>> {
    let file: QueryFile = serde_json::from_str(text)?;
    check_hash(file.schema_hash.as_deref(), schema)?;
    file.queries
        .iter()
        .enumerate()
        .map(|(i, raw)| raw.decode(schema, i))
        .collect()
}

pub(crate) fn check_hash(hash: Option<&str>, schema: &AttributeSchema) -> Result<()> {
    match hash {
        Some(h) if h != schema.hash() => Err(Error::SchemaMismatch(format!(
            "file was written for schema {h}, loaded schema is {}",
            schema.hash()
        ))),
        _ => Ok(()),
    }
}

pub fn load_query_spec(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Vec<AggregateQuery>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_query_spec(&text, schema)
}

pub fn query_spec_to_json(schema: &AttributeSchema, queries: &[AggregateQuery]) -> String {
    let file = QueryFile {
        meta: None,
        schema_hash: Some(schema.hash()),
        queries: queries.iter().map(|q| RawQuery::encode(schema, q)).collect(),
    };
    serde_json::to_string_pretty(&file).expect("query file serializes")
}

pub fn save_query_spec(path: impl AsRef<Path>, schema: &AttributeSchema, queries: &[AggregateQuery]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, query_spec_to_json(schema, queries) + "\n").map_err(|e| Error::io(path, e))
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All k-way marginals over `attributes`.
///
/// `bucket_widths` maps an attribute index to an interval width over its
/// dense codes; bucketed attributes contribute one interval per cell,
/// others one singleton per value.
pub fn make_marginal_queries(
    schema: &AttributeSchema,
    attributes: &[usize],
    k: usize,
    bucket_widths: &[(usize, usize)],
) -> Result<Vec<AggregateQuery>> {
    if k == 0 || k > attributes.len() {
        return Err(Error::Parameter(format!(
            "cannot build {k}-way marginals over {} attributes",
            attributes.len()
        )));
    }
    if let Some(&a) = attributes.iter().find(|&&a| a >= schema.len()) {
        return Err(Error::Parameter(format!("attribute index {a} out of range")));
    }
    let cells_of = |a: usize| -> Result<Vec<ValueSet>> {
        let size = schema.attribute(a).size();
        let width = bucket_widths.iter().find(|(i, _)| *i == a).map_or(1, |&(_, w)| w);
        if width == 0 {
            return Err(Error::Parameter(format!(
                "bucket width for `{}` must be at least 1",
                schema.attribute(a).name
            )));
        }
        Ok((0..size)
            .step_by(width)
            .map(|lo| {
                let hi = (lo + width).min(size) - 1;
                ValueSet::from_codes((lo as u32..=hi as u32).collect(), size).expect("in domain")
            })
            .collect())
    };
    let mut out = Vec::new();
    for combo in combinations(attributes, k) {
        let per_attr = combo.iter().map(|&a| cells_of(a)).collect::<Result<Vec<_>>>()?;
        let mut partial: Vec<Vec<(usize, ValueSet)>> = vec![Vec::new()];
        for (slot, cells) in combo.iter().zip(per_attr) {
            partial = partial
                .into_iter()
                .flat_map(|prefix| {
                    cells.iter().map(move |c| {
                        let mut p = prefix.clone();
                        p.push((*slot, c.clone()));
                        p
                    })
                })
                .collect();
        }
        out.extend(
            partial
                .iter()
                .map(|conds| AggregateQuery::with_conditions(schema, conds)),
        );
    }
    Ok(out)
}

/// `m` queries drawn uniformly without replacement, in draw order.
pub fn sample_queries(queries: &[AggregateQuery], m: usize, seed: u64) -> Result<Vec<AggregateQuery>> {
    if m > queries.len() {
        return Err(Error::Parameter(format!(
            "cannot sample {m} queries from {}",
            queries.len()
        )));
    }
    let mut rng = seed::rng(seed);
    Ok(index::sample(&mut rng, queries.len(), m)
        .into_iter()
        .map(|i| queries[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::aggregates::evaluate;
    use crate::model::{Attribute, Dataset, Record};

    fn census() -> AttributeSchema {
        AttributeSchema::new(
            vec![
                Attribute::with_size("sex", 2),
                Attribute::with_size("age", 10),
                Attribute::with_size("race", 3),
                Attribute::with_size("hisp", 2),
            ],
            3,
        )
        .unwrap()
    }

    #[test]
    fn marginals() {
        let schema = AttributeSchema::from_sizes(&[("a", 2), ("b", 2), ("s", 2)]).unwrap();
        let one = make_marginal_queries(&schema, &[0], 1, &[]).unwrap();
        assert_eq!(one.len(), 2);
        let two = make_marginal_queries(&schema, &[0, 1], 2, &[]).unwrap();
        assert_eq!(two.len(), 4);
        assert!(make_marginal_queries(&schema, &[0], 2, &[]).is_err());

        let ages = make_marginal_queries(&census(), &[1], 1, &[(1, 5)]).unwrap();
        assert_eq!(ages.len(), 2);
        assert_eq!(ages[0].subsets[1], ValueSet::Range { lo: 0, hi: 4 });
        assert_eq!(ages[1].subsets[1], ValueSet::Range { lo: 5, hi: 9 });
    }

    #[test]
    fn marginal_partition_sums_to_size() {
        let schema = Arc::new(census());
        let d = crate::model::generate_synthetic(schema.clone(), 77, 3, &Default::default()).unwrap();
        for k in 1..=2 {
            let qs = make_marginal_queries(&schema, &[0, 1, 2], k, &[(1, 5)]).unwrap();
            // Each k-subset of attributes partitions the domain product.
            let combos = combinations(&[0, 1, 2], k).len() as u64;
            let total: u64 = qs.iter().map(|q| evaluate(q, &d)).sum();
            assert_eq!(total, 77 * combos);
        }
    }

    #[test]
    fn spec_parsing() {
        let schema = census();
        let total = parse_query_spec(r#"{"queries":[{"label":"P1"}]}"#, &schema).unwrap();
        assert_eq!(total, vec![AggregateQuery::total(&schema).labeled("P1")]);

        let bad = parse_query_spec(r#"{"queries":[{"label":"P6","where":{"race":[7]}}]}"#, &schema);
        match bad {
            Err(Error::QuerySpec { query, .. }) => assert_eq!(query, "P6"),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = parse_query_spec(r#"{"queries":[{"where":{"zip":[1]}}]}"#, &schema);
        assert!(matches!(unknown, Err(Error::QuerySpec { .. })));
    }

    #[test]
    fn sex_by_age_for_one_race() {
        let schema = Arc::new(census());
        let spec = r#"{"queries":[{"label":"P12A","where":{"sex":[1],"age":{"range":[0,4]},"race":[0]}}]}"#;
        let q = &parse_query_spec(spec, &schema).unwrap()[0];
        let d = Dataset::new(
            schema.clone(),
            vec![
                Record(vec![1, 2, 0, 0]),
                Record(vec![1, 3, 0, 1]),
                Record(vec![1, 3, 1, 1]),
                Record(vec![0, 3, 0, 0]),
                Record(vec![1, 7, 0, 0]),
            ],
        )
        .unwrap();
        let hits: Vec<bool> = d.records().iter().map(|r| q.covers(r)).collect();
        assert_eq!(hits, vec![true, true, false, false, false]);
        assert_eq!(evaluate(q, &d), 2);
    }

    #[test]
    fn spec_round_trip() {
        let schema = census();
        let qs = make_marginal_queries(&schema, &[0, 1, 2, 3], 2, &[(1, 3)]).unwrap();
        let text = query_spec_to_json(&schema, &qs);
        assert_eq!(parse_query_spec(&text, &schema).unwrap(), qs);
    }

    #[test]
    fn sampling() {
        let schema = census();
        let qs = make_marginal_queries(&schema, &[0, 1, 2], 1, &[]).unwrap();
        assert!(sample_queries(&qs, 0, 1).unwrap().is_empty());
        let all = sample_queries(&qs, qs.len(), 1).unwrap();
        let mut a: Vec<String> = all.iter().map(|q| format!("{q:?}")).collect();
        let mut b: Vec<String> = qs.iter().map(|q| format!("{q:?}")).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(sample_queries(&qs, 5, 9).unwrap(), sample_queries(&qs, 5, 9).unwrap());
        assert!(sample_queries(&qs, qs.len() + 1, 1).is_err());
    }
}
