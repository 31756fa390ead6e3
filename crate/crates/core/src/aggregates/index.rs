use crate::model::{AttributeSchema, Dataset};

use super::AggregateQuery;

/// Cells (potential records) covered by `q`, ascending.
pub fn query_cells(schema: &AttributeSchema, q: &AggregateQuery) -> Vec<usize> {
    let sizes = schema.domain_sizes();
    let per_attr: Vec<Vec<u32>> = q.subsets.iter().zip(&sizes).map(|(s, &n)| s.codes(n)).collect();
    let mut cells = vec![0usize];
    for (i, codes) in per_attr.iter().enumerate() {
        let stride: usize = sizes[i + 1..].iter().product();
        let mut next = Vec::with_capacity(cells.len() * codes.len());
        for &base in &cells {
            for &c in codes {
                next.push(base + c as usize * stride);
            }
        }
        cells = next;
    }
    cells
}

/// Inverted cell → queries index for answering many datasets over one
/// schema and query list.
#[derive(Clone, Debug)]
pub struct CompiledQueries {
    offsets: Vec<u32>,
    entries: Vec<u32>,
    query_count: usize,
}

impl CompiledQueries {
    pub fn new(schema: &AttributeSchema, queries: &[AggregateQuery]) -> Self {
        let cells = schema.cell_count();
        let mut counts = vec![0u32; cells + 1];
        let lists: Vec<Vec<usize>> = queries.iter().map(|q| query_cells(schema, q)).collect();
        for list in &lists {
            for &c in list {
                counts[c + 1] += 1;
            }
        }
        for i in 0..cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut entries = vec![0u32; counts[cells] as usize];
        // Queries are visited in order, so each cell's list stays ascending.
        for (qi, list) in lists.iter().enumerate() {
            for &c in list {
                entries[fill[c] as usize] = qi as u32;
                fill[c] += 1;
            }
        }
        CompiledQueries {
            offsets: counts,
            entries,
            query_count: queries.len(),
        }
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }

    /// Queries covering `cell`.
    #[inline]
    pub fn queries_of(&self, cell: usize) -> &[u32] {
        &self.entries[self.offsets[cell] as usize..self.offsets[cell + 1] as usize]
    }

    /// Adds one record in `cell` to the running answers.
    #[inline]
    pub fn add_cell<T: Copy + std::ops::AddAssign + From<u8>>(&self, cell: usize, answers: &mut [T]) {
        for &q in self.queries_of(cell) {
            answers[q as usize] += T::from(1u8);
        }
    }

    pub fn evaluate(&self, d: &Dataset) -> Vec<u64> {
        let mut out = vec![0u64; self.query_count];
        for r in d.records() {
            self.add_cell(d.schema().cell_of(r.values()), &mut out);
        }
        out
    }
}

/// One bitset over the records of a dataset per query, marking the userset.
#[derive(Clone, Debug)]
pub struct QueryMembershipIndex {
    bits: Vec<Vec<u64>>,
    records: usize,
}

impl QueryMembershipIndex {
    pub fn build(queries: &[AggregateQuery], d: &Dataset) -> Self {
        let words = d.len().div_ceil(64);
        let bits = queries
            .iter()
            .map(|q| {
                let mut b = vec![0u64; words];
                for (i, r) in d.records().iter().enumerate() {
                    if q.covers(r) {
                        b[i / 64] |= 1 << (i % 64);
                    }
                }
                b
            })
            .collect();
        QueryMembershipIndex { bits, records: d.len() }
    }

    pub fn contains(&self, query: usize, record: usize) -> bool {
        record < self.records && self.bits[query][record / 64] >> (record % 64) & 1 == 1
    }

    pub fn count(&self, query: usize) -> u64 {
        self.bits[query].iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn counts(&self) -> Vec<u64> {
        (0..self.bits.len()).map(|q| self.count(q)).collect()
    }

    /// Record indices in the userset of `query`.
    pub fn members(&self, query: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.records).filter(move |&i| self.contains(query, i))
    }
}
