//! Finite-domain tabular data: schemas, records, datasets and the helpers the
//! privacy games need (synthetic generation, sensitive randomization and
//! target selection).
//!
//! Attribute values are stored as dense codes `0..|V_i|`; the schema keeps
//! the mapping back to the integer codes used in files. The sensitive
//! attribute is always the last attribute internally. Schemas declaring it
//! elsewhere are permuted on construction and written back in their original
//! column order.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

/// Dense value code of an attribute.
pub type Code = u32;

/// Default bound on the number of potential records `∏|V_i|`.
pub const DEFAULT_CELL_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    /// Integer codes as they appear in data files, in domain order.
    pub domain: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sensitive: bool,
}

impl Attribute {
    pub fn new(name: impl Into<String>, domain: Vec<i64>) -> Self {
        Attribute {
            name: name.into(),
            domain,
            labels: None,
            sensitive: false,
        }
    }

    /// Attribute with domain `0..size`.
    pub fn with_size(name: impl Into<String>, size: usize) -> Self {
        Self::new(name, (0..size as i64).collect())
    }

    pub fn size(&self) -> usize {
        self.domain.len()
    }

    pub fn encode(&self, raw: i64) -> Option<Code> {
        self.domain.iter().position(|&v| v == raw).map(|p| p as Code)
    }

    pub fn decode(&self, code: Code) -> i64 {
        self.domain[code as usize]
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    attributes: Vec<Attribute>,
}

/// Ordered attributes with the sensitive attribute last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
    /// `external[k]` is the internal index of the k-th attribute as declared.
    external: Vec<usize>,
    strides: Vec<usize>,
    cells: usize,
}

impl AttributeSchema {
    /// Builds a schema, moving `sensitive` to the last position.
    pub fn new(attributes: Vec<Attribute>, sensitive: usize) -> Result<Self> {
        Self::with_cap(attributes, sensitive, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(mut attributes: Vec<Attribute>, sensitive: usize, cap: usize) -> Result<Self> {
        let n = attributes.len();
        if n < 2 {
            return Err(Error::Schema(
                "at least one non-sensitive attribute and one sensitive attribute are required".into(),
            ));
        }
        if sensitive >= n {
            return Err(Error::Schema(format!(
                "sensitive index {sensitive} out of range for {n} attributes"
            )));
        }
        let mut seen_names = std::collections::HashSet::new();
        for a in &attributes {
            if a.domain.is_empty() {
                return Err(Error::Schema(format!("attribute `{}` has an empty domain", a.name)));
            }
            let mut sorted = a.domain.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != a.domain.len() {
                return Err(Error::Schema(format!("attribute `{}` has duplicate codes", a.name)));
            }
            if let Some(labels) = &a.labels {
                if labels.len() != a.domain.len() {
                    return Err(Error::Schema(format!(
                        "attribute `{}` has {} labels for {} codes",
                        a.name,
                        labels.len(),
                        a.domain.len()
                    )));
                }
            }
            if !seen_names.insert(a.name.clone()) {
                return Err(Error::Schema(format!("duplicate attribute name `{}`", a.name)));
            }
        }
        for (i, a) in attributes.iter_mut().enumerate() {
            a.sensitive = i == sensitive;
        }

        let mut external: Vec<usize> = (0..n).collect();
        if sensitive != n - 1 {
            let moved = attributes.remove(sensitive);
            attributes.push(moved);
            for (k, slot) in external.iter_mut().enumerate() {
                *slot = match k.cmp(&sensitive) {
                    std::cmp::Ordering::Less => k,
                    std::cmp::Ordering::Equal => n - 1,
                    std::cmp::Ordering::Greater => k - 1,
                };
            }
        }

        let mut cells: usize = 1;
        for a in &attributes {
            cells = cells
                .checked_mul(a.size())
                .filter(|&c| c <= cap)
                .ok_or_else(|| Error::Capacity(format!("domain product exceeds the cap of {cap} potential records")))?;
        }
        // Row-major: the last (sensitive) attribute varies fastest.
        let mut strides = vec![1usize; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * attributes[i + 1].size();
        }
        Ok(AttributeSchema {
            attributes,
            external,
            strides,
            cells,
        })
    }

    /// Schema whose attributes have domains `0..sizes[i]`; the last one is sensitive.
    pub fn from_sizes(names_and_sizes: &[(&str, usize)]) -> Result<Self> {
        let attrs = names_and_sizes
            .iter()
            .map(|(name, size)| Attribute::with_size(*name, *size))
            .collect::<Vec<_>>();
        let last = attrs.len().saturating_sub(1);
        Self::new(attrs, last)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text)?;
        let flagged: Vec<usize> = file
            .attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.sensitive)
            .map(|(i, _)| i)
            .collect();
        if flagged.len() != 1 {
            return Err(Error::Schema(format!(
                "exactly one attribute must be flagged sensitive, found {}",
                flagged.len()
            )));
        }
        Self::new(file.attributes, flagged[0])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = SchemaFile {
            attributes: self.external_attributes().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Short content hash, used to tie releases and query files to a schema.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json_string().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, i: usize) -> &Attribute {
        &self.attributes[i]
    }

    /// Attributes in their declared (file) order.
    pub fn external_attributes(&self) -> impl Iterator<Item = &Attribute> {
        self.external.iter().map(|&i| &self.attributes[i])
    }

    pub fn external_order(&self) -> &[usize] {
        &self.external
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn sensitive_index(&self) -> usize {
        self.attributes.len() - 1
    }

    pub fn sensitive_size(&self) -> usize {
        self.attributes[self.sensitive_index()].size()
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.attributes.iter().map(Attribute::size).collect()
    }

    /// Number of potential records `∏|V_i|`.
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn cell_of(&self, values: &[Code]) -> usize {
        values.iter().zip(&self.strides).map(|(&v, &s)| v as usize * s).sum()
    }

    /// Cell of the record `(partial, v)`.
    pub fn completion_cell(&self, partial: &PartialRecord, v: Code) -> usize {
        self.cell_of(&partial.0) + v as usize
    }

    pub fn record_of_cell(&self, mut cell: usize) -> Record {
        let mut values = vec![0; self.len()];
        for (i, &s) in self.strides.iter().enumerate() {
            values[i] = (cell / s) as Code;
            cell %= s;
        }
        Record(values)
    }

    pub fn validate(&self, values: &[Code]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::SchemaMismatch(format!(
                "record has {} values, schema has {} attributes",
                values.len(),
                self.len()
            )));
        }
        for (a, &v) in self.attributes.iter().zip(values) {
            if v as usize >= a.size() {
                return Err(Error::Parameter(format!("code {v} outside the domain of `{}`", a.name)));
            }
        }
        Ok(())
    }
}

/// A full record: one dense code per attribute, sensitive last.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Record(pub Vec<Code>);

impl Record {
    pub fn values(&self) -> &[Code] {
        &self.0
    }

    pub fn sensitive(&self) -> Code {
        *self.0.last().expect("records are non-empty")
    }

    pub fn project(&self) -> PartialRecord {
        project(self)
    }
}

/// Values of the non-sensitive attributes only.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartialRecord(pub Vec<Code>);

impl PartialRecord {
    pub fn values(&self) -> &[Code] {
        &self.0
    }

    pub fn complete(&self, sensitive: Code) -> Record {
        let mut v = self.0.clone();
        v.push(sensitive);
        Record(v)
    }

    /// Number of non-sensitive coordinates where `self` and `other` differ.
    pub fn hamming(&self, other: &[Code]) -> usize {
        self.0.iter().zip(other).filter(|(a, b)| a != b).count()
    }
}

/// Drops the sensitive coordinate.
pub fn project(r: &Record) -> PartialRecord {
    PartialRecord(r.0[..r.0.len() - 1].to_vec())
}

/// A multiset of records under a shared schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    schema: Arc<AttributeSchema>,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(schema: Arc<AttributeSchema>, records: Vec<Record>) -> Result<Self> {
        for r in &records {
            schema.validate(&r.0)?;
        }
        Ok(Dataset { schema, records })
    }

    pub(crate) fn new_unchecked(schema: Arc<AttributeSchema>, records: Vec<Record>) -> Self {
        Dataset { schema, records }
    }

    pub fn empty(schema: Arc<AttributeSchema>) -> Self {
        Dataset {
            schema,
            records: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Multiplicity of every potential record, indexed by cell.
    pub fn multiplicities(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.schema.cell_count()];
        for r in &self.records {
            counts[self.schema.cell_of(&r.0)] += 1;
        }
        counts
    }

    /// Dataset holding `counts[c]` copies of the record of cell `c`.
    pub fn from_multiplicities(schema: Arc<AttributeSchema>, counts: &[u32]) -> Self {
        let mut records = Vec::with_capacity(counts.iter().map(|&c| c as usize).sum());
        for (cell, &c) in counts.iter().enumerate() {
            if c > 0 {
                let r = schema.record_of_cell(cell);
                records.extend(std::iter::repeat(r).take(c as usize));
            }
        }
        Dataset { schema, records }
    }

    /// Records sorted lexicographically; equal datasets as multisets compare equal.
    pub fn sorted_records(&self) -> Vec<Record> {
        let mut r = self.records.clone();
        r.sort_unstable();
        r
    }

    pub fn same_multiset(&self, other: &Dataset) -> bool {
        self.schema == other.schema && self.sorted_records() == other.sorted_records()
    }

    /// Order-sensitive content hash.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.schema.hash().as_bytes());
        for r in &self.records {
            for v in &r.0 {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn project_all(&self) -> Vec<PartialRecord> {
        self.records.iter().map(project).collect()
    }

    /// Splits the records uniformly at random into `(first, rest)` with
    /// `round(fraction · s)` records in `first`.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Parameter(format!("split fraction {fraction} outside [0, 1]")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seed::rng(seed));
        let k = (fraction * self.len() as f64).round() as usize;
        let pick = |ix: &[usize]| ix.iter().map(|&i| self.records[i].clone()).collect();
        Ok((
            Dataset::new_unchecked(self.schema.clone(), pick(&idx[..k])),
            Dataset::new_unchecked(self.schema.clone(), pick(&idx[k..])),
        ))
    }

    /// The record list with the record at `index` removed.
    pub fn without(&self, index: usize) -> Dataset {
        let mut records = self.records.clone();
        records.remove(index);
        Dataset::new_unchecked(self.schema.clone(), records)
    }

    pub fn read_csv<R: Read>(reader: R, schema: Arc<AttributeSchema>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let expected: Vec<&str> = schema.external_attributes().map(|a| a.name.as_str()).collect();
        if header != expected {
            return Err(Error::SchemaMismatch(format!(
                "header {:?} does not match schema attributes {:?}",
                header, expected
            )));
        }
        let order = schema.external_order().to_vec();
        let mut records = Vec::new();
        for (row, result) in rdr.records().enumerate() {
            let line = row + 2;
            let row = result.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if row.len() != order.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", order.len(), row.len()),
                });
            }
            let mut values = vec![0; order.len()];
            for (k, field) in row.iter().enumerate() {
                let attr = schema.attribute(order[k]);
                let raw: i64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{field}` is not an integer code for `{}`", attr.name),
                })?;
                values[order[k]] = attr.encode(raw).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("value {raw} outside the domain of `{}`", attr.name),
                })?;
            }
            records.push(Record(values));
        }
        Ok(Dataset { schema, records })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let order = self.schema.external_order();
        w.write_record(self.schema.external_attributes().map(|a| a.name.as_str()))?;
        for r in &self.records {
            w.write_record(
                order
                    .iter()
                    .map(|&i| self.schema.attribute(i).decode(r.0[i]).to_string()),
            )?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Reads a dataset whose header lists the schema's attributes in declared order.
pub fn load_dataset_csv(path: impl AsRef<Path>, schema: Arc<AttributeSchema>) -> Result<Dataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::read_csv(std::io::BufReader::new(f), schema)
}

/// Per-attribute categorical weights keyed by attribute name; missing
/// attributes are uniform.
pub type Skew = HashMap<String, Vec<f64>>;

/// Draws `s` i.i.d. records, each attribute independently from its weights.
pub fn generate_synthetic(schema: Arc<AttributeSchema>, s: usize, seed: u64, skew: &Skew) -> Result<Dataset> {
    for name in skew.keys() {
        if schema.index_of(name).is_none() {
            return Err(Error::Parameter(format!("skew names unknown attribute `{name}`")));
        }
    }
    let mut samplers = Vec::with_capacity(schema.len());
    for a in schema.attributes() {
        let weights = match skew.get(&a.name) {
            Some(w) => {
                if w.len() != a.size() {
                    return Err(Error::Parameter(format!(
                        "`{}` has {} weights for {} values",
                        a.name,
                        w.len(),
                        a.size()
                    )));
                }
                if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
                    return Err(Error::Parameter(format!("negative weight {bad} for `{}`", a.name)));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-6 {
                    return Err(Error::Parameter(format!(
                        "weights for `{}` sum to {total}, expected 1",
                        a.name
                    )));
                }
                w.clone()
            }
            None => vec![1.0; a.size()],
        };
        samplers.push(WeightedIndex::new(&weights).map_err(|e| Error::Parameter(e.to_string()))?);
    }
    let mut rng = seed::rng(seed);
    let records = (0..s)
        .map(|_| Record(samplers.iter().map(|d| d.sample(&mut rng) as Code).collect()))
        .collect();
    Ok(Dataset::new_unchecked(schema, records))
}

/// Replaces every sensitive value with an independent uniform draw.
pub fn randomize_sensitive(d: &Dataset, seed: u64) -> Dataset {
    let k = d.schema.sensitive_size() as Code;
    let mut rng = seed::rng(seed);
    let records = d
        .records
        .iter()
        .map(|r| {
            let mut v = r.0.clone();
            *v.last_mut().expect("non-empty") = rng.gen_range(0..k);
            Record(v)
        })
        .collect();
    Dataset::new_unchecked(d.schema.clone(), records)
}

/// A target of the attribute inference game: non-sensitive values known to
/// the attacker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetUser {
    pub id: String,
    pub partial: PartialRecord,
}

impl TargetUser {
    pub fn new(schema: &AttributeSchema, partial: PartialRecord) -> Self {
        TargetUser {
            id: partial_id(schema, &partial),
            partial,
        }
    }
}

/// Identifier built from the raw codes of the non-sensitive values.
pub fn partial_id(schema: &AttributeSchema, partial: &PartialRecord) -> String {
    partial
        .0
        .iter()
        .enumerate()
        .map(|(i, &c)| schema.attribute(i).decode(c).to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Users whose non-sensitive values occur exactly once, sorted by those values.
pub fn find_unique_targets(d: &Dataset) -> Vec<TargetUser> {
    let mut counts: BTreeMap<PartialRecord, usize> = BTreeMap::new();
    for r in &d.records {
        *counts.entry(project(r)).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|(p, _)| TargetUser::new(&d.schema, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema2() -> Arc<AttributeSchema> {
        Arc::new(AttributeSchema::from_sizes(&[("a", 2), ("s", 2)]).unwrap())
    }

    #[test]
    fn rejects_bad_schemas() {
        assert!(AttributeSchema::from_sizes(&[("only", 2)]).is_err());
        assert!(AttributeSchema::new(vec![Attribute::new("a", vec![]), Attribute::with_size("s", 2)], 1).is_err());
        assert!(AttributeSchema::new(vec![Attribute::new("a", vec![1, 1]), Attribute::with_size("s", 2)], 1).is_err());
        assert!(AttributeSchema::new(vec![Attribute::with_size("a", 2), Attribute::with_size("s", 2)], 2).is_err());
        let big = vec![Attribute::with_size("a", 2000), Attribute::with_size("s", 1000)];
        assert!(matches!(AttributeSchema::new(big, 1), Err(Error::Capacity(_))));
    }

    #[test]
    fn sensitive_moves_last_and_csv_keeps_declared_order() {
        let attrs = vec![
            Attribute::with_size("hisp", 2),
            Attribute::with_size("sex", 2),
            Attribute::new("age", vec![10, 20, 30]),
        ];
        let schema = Arc::new(AttributeSchema::new(attrs, 0).unwrap());
        assert_eq!(schema.attribute(schema.sensitive_index()).name, "hisp");
        let csv = "hisp,sex,age\n1,0,20\n0,1,30\n";
        let d = Dataset::read_csv(csv.as_bytes(), schema.clone()).unwrap();
        assert_eq!(d.records()[0], Record(vec![0, 1, 1]));
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }

    #[test]
    fn csv_row_count_and_errors() {
        let schema = schema2();
        let d = Dataset::read_csv("a,s\n0,1\n1,1\n0,0\n".as_bytes(), schema.clone()).unwrap();
        assert_eq!(d.len(), 3);
        let empty = Dataset::read_csv("a,s\n".as_bytes(), schema.clone()).unwrap();
        assert_eq!(empty.len(), 0);
        match Dataset::read_csv("a,s\n0,1\n99,0\n".as_bytes(), schema.clone()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Dataset::read_csv("a\n0\n".as_bytes(), schema.clone()),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(
            Dataset::read_csv("a,s,x\n0,1,1\n".as_bytes(), schema),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn cell_round_trip() {
        let schema = AttributeSchema::from_sizes(&[("a", 3), ("b", 4), ("s", 2)]).unwrap();
        for cell in 0..schema.cell_count() {
            assert_eq!(schema.cell_of(schema.record_of_cell(cell).values()), cell);
        }
    }

    #[test]
    fn projection() {
        let r = Record(vec![1, 2, 3]);
        let p = project(&r);
        assert_eq!(p, PartialRecord(vec![1, 2]));
        assert_eq!(p.complete(r.sensitive()), r);
    }

    #[test]
    fn synthetic_is_seeded_and_respects_degenerate_weights() {
        let schema = Arc::new(AttributeSchema::from_sizes(&[("a", 3), ("s", 2)]).unwrap());
        let none = Skew::new();
        let d1 = generate_synthetic(schema.clone(), 1000, 5, &none).unwrap();
        let d2 = generate_synthetic(schema.clone(), 1000, 5, &none).unwrap();
        assert_eq!(d1, d2);
        let mut skew = Skew::new();
        skew.insert("a".into(), vec![0.0, 1.0, 0.0]);
        let d = generate_synthetic(schema.clone(), 200, 1, &skew).unwrap();
        assert!(d.records().iter().all(|r| r.0[0] == 1));
        skew.insert("a".into(), vec![-0.5, 1.0, 0.5]);
        assert!(generate_synthetic(schema, 10, 1, &skew).is_err());
    }

    #[test]
    fn unique_targets() {
        let schema = schema2();
        let d = Dataset::new(
            schema.clone(),
            vec![Record(vec![0, 0]), Record(vec![0, 1]), Record(vec![1, 1])],
        )
        .unwrap();
        let t = find_unique_targets(&d);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].partial, PartialRecord(vec![1]));

        let all_same = Dataset::new(schema.clone(), vec![Record(vec![1, 0]), Record(vec![1, 1])]).unwrap();
        assert!(find_unique_targets(&all_same).is_empty());

        let distinct = Dataset::new(schema, vec![Record(vec![1, 0]), Record(vec![0, 0])]).unwrap();
        let t = find_unique_targets(&distinct);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].partial, PartialRecord(vec![0]));
    }

    #[test]
    fn randomize_singleton_domain_is_constant() {
        let schema = Arc::new(AttributeSchema::from_sizes(&[("a", 4), ("s", 1)]).unwrap());
        let d = generate_synthetic(schema, 50, 3, &Skew::new()).unwrap();
        let r = randomize_sensitive(&d, 9);
        assert_eq!(r, d);
    }
}
