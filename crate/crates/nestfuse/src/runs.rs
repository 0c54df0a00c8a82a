//! Retrieval runs, queries, relevance judgments, and the per-query document
//! universe.
//!
//! Input formats are the TREC conventions: a run file carries six
//! whitespace-separated columns (`qid Q0 docid rank score tag`), qrels carry
//! four (`qid 0 docid rel`). Query text and precomputed query-document term
//! matches arrive as tab-separated files. All files are UTF-8.
//!
//! Fusion operates on a *document universe*: for each query, the union of the
//! document ids retrieved by the participating systems. Each system's list is
//! padded so that it ranks every universe document; absent documents are
//! appended after the native entries in ascending lexicographic id order,
//! which keeps the construction deterministic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Errors raised while parsing or validating input files.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}: cannot read file: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    FieldCount {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: invalid {field} {value:?}")]
    InvalidField {
        path: String,
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("{path}: file contains no records")]
    Empty { path: String },
    #[error("{path}: duplicate entry for query {query_id}, document {doc_id}")]
    DuplicateDocument {
        path: String,
        query_id: String,
        doc_id: String,
    },
    #[error("{path}: duplicate query {query_id}")]
    DuplicateQuery { path: String, query_id: String },
    #[error("{path}: query {query_id} has empty text")]
    EmptyQueryText { path: String, query_id: String },
    #[error(
        "{path}: term match for ({query_id}, {doc_id}) has count {count} \
         but query length is {query_length}"
    )]
    MatchExceedsQueryLength {
        path: String,
        query_id: String,
        doc_id: String,
        count: u32,
        query_length: u32,
    },
    #[error("{path}: term match references unknown query {query_id}")]
    UnknownQuery { path: String, query_id: String },
}

/// One ranked entry of a retrieval run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    /// Dense rank, 1-based. Input ranks are re-densified on parse.
    pub rank: u32,
    pub raw_score: f64,
}

/// One system's ranking, grouped per query.
///
/// Within a query, ranks are exactly `1..=k` with no gaps and each document
/// appears at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct RunList {
    pub system_id: String,
    queries: BTreeMap<String, Vec<RunEntry>>,
}

impl RunList {
    /// Parse run-format content. `path` is used only for error messages.
    ///
    /// Entries are grouped by query, ordered by their input rank, and then
    /// re-densified to `1..=k`: real run files carry rank gaps, while the
    /// downstream rank-to-score transform needs contiguous ranks. The system
    /// id is taken from the tag column of the first record.
    pub fn parse_str(content: &str, path: &str) -> Result<Self, ParseError> {
        let mut system_id: Option<String> = None;
        let mut raw: BTreeMap<String, Vec<(u32, String, f64)>> = BTreeMap::new();
        let mut seen: HashSet<(String, String)> = HashSet::new();

        for (idx, line) in content.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(ParseError::FieldCount {
                    path: path.to_string(),
                    line: line_no,
                    expected: 6,
                    found: fields.len(),
                });
            }
            let qid = fields[0];
            let doc_id = fields[2];
            let rank: u32 = fields[3].parse().map_err(|_| ParseError::InvalidField {
                path: path.to_string(),
                line: line_no,
                field: "rank",
                value: fields[3].to_string(),
            })?;
            let score: f64 = fields[4].parse().map_err(|_| ParseError::InvalidField {
                path: path.to_string(),
                line: line_no,
                field: "score",
                value: fields[4].to_string(),
            })?;
            if !seen.insert((qid.to_string(), doc_id.to_string())) {
                return Err(ParseError::DuplicateDocument {
                    path: path.to_string(),
                    query_id: qid.to_string(),
                    doc_id: doc_id.to_string(),
                });
            }
            if system_id.is_none() {
                system_id = Some(fields[5].to_string());
            }
            raw.entry(qid.to_string())
                .or_default()
                .push((rank, doc_id.to_string(), score));
        }

        let system_id = system_id.ok_or_else(|| ParseError::Empty {
            path: path.to_string(),
        })?;

        let mut queries = BTreeMap::new();
        for (qid, mut entries) in raw {
            entries.sort_by_key(|(rank, _, _)| *rank);
            let entries = entries
                .into_iter()
                .enumerate()
                .map(|(i, (_, doc_id, raw_score))| RunEntry {
                    doc_id,
                    rank: i as u32 + 1,
                    raw_score,
                })
                .collect();
            queries.insert(qid, entries);
        }

        Ok(Self { system_id, queries })
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    /// Entries for one query, ordered by rank. `None` if the run does not
    /// cover the query.
    pub fn entries(&self, query_id: &str) -> Option<&[RunEntry]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn covers(&self, query_id: &str) -> bool {
        self.queries.contains_key(query_id)
    }

    /// Serialize back to run format. Parsing the output yields an identical
    /// structure.
    pub fn to_run_format(&self) -> String {
        let mut out = String::new();
        for (qid, entries) in &self.queries {
            for e in entries {
                writeln!(
                    out,
                    "{} Q0 {} {} {} {}",
                    qid, e.doc_id, e.rank, e.raw_score, self.system_id
                )
                .expect("writing to String cannot fail");
            }
        }
        out
    }
}

/// Read and parse a TREC-format run file.
pub fn parse_run_file(path: impl AsRef<Path>) -> Result<RunList, ParseError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunList::parse_str(&content, &path.display().to_string())
}

/// Query text with its whitespace-token length.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub text: String,
    /// Token count after lowercasing and whitespace tokenization.
    pub length: u32,
}

/// Map from query id to query text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuerySet {
    queries: BTreeMap<String, Query>,
}

impl QuerySet {
    pub fn parse_str(content: &str, path: &str) -> Result<Self, ParseError> {
        let mut queries = BTreeMap::new();
        for (idx, line) in content.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (qid, text) = line
                .split_once('\t')
                .ok_or_else(|| ParseError::FieldCount {
                    path: path.to_string(),
                    line: line_no,
                    expected: 2,
                    found: 1,
                })?;
            let length = text.to_lowercase().split_whitespace().count() as u32;
            if length == 0 {
                return Err(ParseError::EmptyQueryText {
                    path: path.to_string(),
                    query_id: qid.to_string(),
                });
            }
            if queries
                .insert(
                    qid.to_string(),
                    Query {
                        text: text.to_string(),
                        length,
                    },
                )
                .is_some()
            {
                return Err(ParseError::DuplicateQuery {
                    path: path.to_string(),
                    query_id: qid.to_string(),
                });
            }
        }
        Ok(Self { queries })
    }

    pub fn get(&self, query_id: &str) -> Option<&Query> {
        self.queries.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Parse a tab-separated queries file (`qid<TAB>text`).
pub fn parse_queries(path: impl AsRef<Path>) -> Result<QuerySet, ParseError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    QuerySet::parse_str(&content, &path.display().to_string())
}

/// Relevance judgments: `(query, document) -> grade`. Binary relevance is
/// `grade > 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    by_query: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn parse_str(content: &str, path: &str) -> Result<Self, ParseError> {
        let mut by_query: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (idx, line) in content.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(ParseError::FieldCount {
                    path: path.to_string(),
                    line: line_no,
                    expected: 4,
                    found: fields.len(),
                });
            }
            let grade: u32 = fields[3].parse().map_err(|_| ParseError::InvalidField {
                path: path.to_string(),
                line: line_no,
                field: "relevance grade",
                value: fields[3].to_string(),
            })?;
            let per_query = by_query.entry(fields[0].to_string()).or_default();
            if per_query.insert(fields[2].to_string(), grade).is_some() {
                return Err(ParseError::DuplicateDocument {
                    path: path.to_string(),
                    query_id: fields[0].to_string(),
                    doc_id: fields[2].to_string(),
                });
            }
        }
        Ok(Self { by_query })
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.by_query.get(query_id)?.get(doc_id).copied()
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id).is_some_and(|g| g > 0)
    }

    /// Number of relevant (grade > 0) documents judged for the query.
    pub fn relevant_count(&self, query_id: &str) -> usize {
        self.by_query
            .get(query_id)
            .map_or(0, |docs| docs.values().filter(|&&g| g > 0).count())
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.by_query.contains_key(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }
}

/// Parse a TREC-format qrels file.
pub fn parse_qrels(path: impl AsRef<Path>) -> Result<Qrels, ParseError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Qrels::parse_str(&content, &path.display().to_string())
}

/// Precomputed query-document term matches: the number of distinct query
/// tokens occurring in the document.
///
/// How the matches were computed (stemming, fields, ...) is up to the
/// producer of the file; this crate only validates that no count exceeds the
/// corresponding query's length. Missing entries default to a count of zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermMatchTable {
    counts: BTreeMap<String, BTreeMap<String, u32>>,
}

impl TermMatchTable {
    pub fn parse_str(content: &str, path: &str, queries: &QuerySet) -> Result<Self, ParseError> {
        let mut counts: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (idx, line) in content.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(ParseError::FieldCount {
                    path: path.to_string(),
                    line: line_no,
                    expected: 3,
                    found: fields.len(),
                });
            }
            let count: u32 = fields[2].parse().map_err(|_| ParseError::InvalidField {
                path: path.to_string(),
                line: line_no,
                field: "match count",
                value: fields[2].to_string(),
            })?;
            let query = queries
                .get(fields[0])
                .ok_or_else(|| ParseError::UnknownQuery {
                    path: path.to_string(),
                    query_id: fields[0].to_string(),
                })?;
            if count > query.length {
                return Err(ParseError::MatchExceedsQueryLength {
                    path: path.to_string(),
                    query_id: fields[0].to_string(),
                    doc_id: fields[1].to_string(),
                    count,
                    query_length: query.length,
                });
            }
            let per_query = counts.entry(fields[0].to_string()).or_default();
            if per_query.insert(fields[1].to_string(), count).is_some() {
                return Err(ParseError::DuplicateDocument {
                    path: path.to_string(),
                    query_id: fields[0].to_string(),
                    doc_id: fields[1].to_string(),
                });
            }
        }
        Ok(Self { counts })
    }

    /// Match count for `(query, document)`; zero when absent.
    pub fn count(&self, query_id: &str, doc_id: &str) -> u32 {
        self.counts
            .get(query_id)
            .and_then(|docs| docs.get(doc_id))
            .copied()
            .unwrap_or(0)
    }
}

/// Parse a tab-separated term-match sidecar (`qid<TAB>docid<TAB>count`),
/// validated against the query lengths.
pub fn parse_term_matches(
    path: impl AsRef<Path>,
    queries: &QuerySet,
) -> Result<TermMatchTable, ParseError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    TermMatchTable::parse_str(&content, &path.display().to_string(), queries)
}

/// Raised when a query cannot be fused.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum UniverseError {
    /// Fewer than two runs retrieved anything for the query. Fusion is
    /// undefined for a single list, so callers should skip the query and
    /// record the skip rather than fail.
    #[error("query {query_id}: covered by {covered} of {total} runs, at least 2 required")]
    InsufficientCoverage {
        query_id: String,
        covered: usize,
        total: usize,
    },
}

/// The per-query union of documents over all participating runs, with each
/// run padded to rank every universe document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentUniverse {
    pub query_id: String,
    /// Universe document ids, sorted ascending. Rank vectors are aligned to
    /// this order.
    pub docs: Vec<String>,
    /// System ids of the runs that cover the query, in input order.
    pub systems: Vec<String>,
    ranks: Vec<Vec<u32>>,
    native: Vec<Vec<bool>>,
}

impl DocumentUniverse {
    /// Universe size.
    pub fn m(&self) -> usize {
        self.docs.len()
    }

    /// Padded rank vector of one system; a permutation of `1..=m` aligned to
    /// [`DocumentUniverse::docs`].
    pub fn ranks(&self, system: usize) -> &[u32] {
        &self.ranks[system]
    }

    /// Which universe documents the system retrieved natively (pre-padding).
    pub fn native(&self, system: usize) -> &[bool] {
        &self.native[system]
    }

    /// Number of runs natively containing the document at `doc_index`.
    pub fn native_count(&self, doc_index: usize) -> usize {
        self.native.iter().filter(|flags| flags[doc_index]).count()
    }
}

/// Assemble the document universe for one query.
///
/// The universe is the union of the document ids retrieved by every run that
/// covers the query. Each covering run is padded deterministically: its
/// native entries keep their dense ranks `1..=k`, and absent documents are
/// appended in ascending lexicographic id order with ranks `k+1..=m`.
pub fn build_universe(runs: &[RunList], query_id: &str) -> Result<DocumentUniverse, UniverseError> {
    let covering: Vec<&RunList> = runs.iter().filter(|r| r.covers(query_id)).collect();
    if covering.len() < 2 {
        return Err(UniverseError::InsufficientCoverage {
            query_id: query_id.to_string(),
            covered: covering.len(),
            total: runs.len(),
        });
    }

    let mut universe: BTreeSet<&str> = BTreeSet::new();
    for run in &covering {
        for entry in run.entries(query_id).expect("run covers query") {
            universe.insert(&entry.doc_id);
        }
    }
    let docs: Vec<String> = universe.iter().map(|d| d.to_string()).collect();
    let index: BTreeMap<&str, usize> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_str(), i))
        .collect();
    let m = docs.len();

    let mut ranks = Vec::with_capacity(covering.len());
    let mut native = Vec::with_capacity(covering.len());
    for run in &covering {
        let entries = run.entries(query_id).expect("run covers query");
        let mut rank_vec = vec![0u32; m];
        let mut native_vec = vec![false; m];
        for entry in entries {
            let j = index[entry.doc_id.as_str()];
            rank_vec[j] = entry.rank;
            native_vec[j] = true;
        }
        // docs is sorted, so scanning in index order appends the absent
        // documents in ascending lexicographic order.
        let mut next = entries.len() as u32;
        for j in 0..m {
            if !native_vec[j] {
                next += 1;
                rank_vec[j] = next;
            }
        }
        ranks.push(rank_vec);
        native.push(native_vec);
    }

    Ok(DocumentUniverse {
        query_id: query_id.to_string(),
        docs,
        systems: covering.iter().map(|r| r.system_id.clone()).collect(),
        ranks,
        native,
    })
}
