//! Core data model: triples, knowledge bases, prompt templates, and queries.
//!
//! Entity identity is exact string equality after trimming leading and
//! trailing whitespace. Case and diacritics are never normalized.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SUBJECT_PLACEHOLDER: &str = "[X]";
pub const ANSWER_PLACEHOLDER: &str = "[Y]";
pub const DEFAULT_MASK_SENTINEL: &str = "<extra_id_0>";

/// A (subject, relation, object) fact. The object is the gold answer and is
/// the only field ever masked.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: &str, relation: &str, object: &str) -> Result<Self> {
        let subject = subject.trim();
        let relation = relation.trim();
        let object = object.trim();
        if subject.is_empty() || relation.is_empty() || object.is_empty() {
            return Err(Error::InvalidInput(
                "triple fields must be non-empty after trimming".to_string(),
            ));
        }
        Ok(Triple {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
        })
    }
}

/// An ordered, duplicate-free collection of triples.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples<I: IntoIterator<Item = Triple>>(triples: I) -> Self {
        let mut kb = KnowledgeBase::new();
        for t in triples {
            kb.insert(t);
        }
        kb
    }

    /// Inserts a triple, keeping the first occurrence on duplicates.
    /// Returns true if the triple was new.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if self.seen.contains(&triple) {
            return false;
        }
        self.seen.insert(triple.clone());
        self.triples.push(triple);
        true
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.seen.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    /// The induced entity set: union of all subjects and objects.
    pub fn entities(&self) -> BTreeSet<&str> {
        self.triples
            .iter()
            .flat_map(|t| [t.subject.as_str(), t.object.as_str()])
            .collect()
    }

    /// The induced relation set.
    pub fn relations(&self) -> BTreeSet<&str> {
        self.triples.iter().map(|t| t.relation.as_str()).collect()
    }

    /// Parses one triple per line, three tab-separated fields, UTF-8, no
    /// header. Exact duplicates are removed, keeping the first occurrence.
    pub fn parse_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut kb = KnowledgeBase::new();
        for (idx, line) in reader.split(b'\n').enumerate() {
            let line_no = idx + 1;
            let raw = line?;
            let text = std::str::from_utf8(&raw).map_err(|_| Error::InvalidUtf8 { line: line_no })?;
            let text = text.strip_suffix('\r').unwrap_or(text);
            if text.is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Malformed {
                    line: line_no,
                    msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let triple = Triple::new(fields[0], fields[1], fields[2]).map_err(|e| Error::Malformed {
                line: line_no,
                msg: e.to_string(),
            })?;
            kb.insert(triple);
        }
        Ok(kb)
    }

    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        for t in &self.triples {
            writeln!(writer, "{}\t{}\t{}", t.subject, t.relation, t.object)?;
        }
        Ok(())
    }

    /// Returns self minus any triple that appears in `reference`.
    pub fn remove_overlap(&self, reference: &KnowledgeBase) -> KnowledgeBase {
        KnowledgeBase::from_triples(
            self.triples
                .iter()
                .filter(|t| !reference.contains(t))
                .cloned(),
        )
    }

    /// Triples that appear in both collections.
    pub fn intersection_count(&self, other: &KnowledgeBase) -> usize {
        self.triples.iter().filter(|t| other.contains(t)).count()
    }
}

/// A cloze pattern for one relation, containing "[X]" and "[Y]" exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub relation: String,
    pub pattern: String,
}

impl PromptTemplate {
    pub fn new(relation: &str, pattern: &str) -> Result<Self> {
        let relation = relation.trim();
        if relation.is_empty() {
            return Err(Error::Template("empty relation identifier".to_string()));
        }
        for placeholder in [SUBJECT_PLACEHOLDER, ANSWER_PLACEHOLDER] {
            if pattern.matches(placeholder).count() != 1 {
                return Err(Error::Template(format!(
                    "pattern for {relation} must contain {placeholder} exactly once: {pattern:?}"
                )));
            }
        }
        Ok(PromptTemplate {
            relation: relation.to_string(),
            pattern: pattern.to_string(),
        })
    }
}

/// Per-relation prompt templates.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.relation.clone(), template);
    }

    pub fn get(&self, relation: &str) -> Option<&PromptTemplate> {
        self.templates.get(relation)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Parses a key/value template file: relation⟨TAB⟩pattern, one per line.
    pub fn parse_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut set = TemplateSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let text = line?;
            let text = text.trim_end_matches('\r');
            if text.is_empty() {
                continue;
            }
            let (relation, pattern) = text.split_once('\t').ok_or_else(|| Error::Malformed {
                line: line_no,
                msg: "expected relation⟨TAB⟩pattern".to_string(),
            })?;
            set.insert(PromptTemplate::new(relation, pattern).map_err(|e| Error::Malformed {
                line: line_no,
                msg: e.to_string(),
            })?);
        }
        Ok(set)
    }

    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        for t in self.templates.values() {
            writeln!(writer, "{}\t{}", t.relation, t.pattern)?;
        }
        Ok(())
    }

    /// A generic "[X] <relation> [Y] ." template per relation, used for
    /// synthetic worlds where no hand-written templates exist.
    pub fn synthetic_for<'a, I: IntoIterator<Item = &'a str>>(relations: I) -> Self {
        let mut set = TemplateSet::new();
        for r in relations {
            let pattern = format!("[X] {r} [Y] .");
            set.insert(PromptTemplate::new(r, &pattern).expect("valid synthetic pattern"));
        }
        set
    }
}

/// A rendered masked query with its gold answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub subject: String,
    pub relation: String,
    pub gold: String,
    pub prompt: String,
}

/// Renders a triple into a masked prompt using the relation's template.
pub fn render_query(
    triple: &Triple,
    template: &PromptTemplate,
    mask_sentinel: &str,
    query_id: &str,
) -> Result<Query> {
    if template.relation != triple.relation {
        return Err(Error::Template(format!(
            "template relation {} does not match triple relation {}",
            template.relation, triple.relation
        )));
    }
    let prompt = template
        .pattern
        .replacen(SUBJECT_PLACEHOLDER, &triple.subject, 1)
        .replacen(ANSWER_PLACEHOLDER, mask_sentinel, 1);
    Ok(Query {
        query_id: query_id.to_string(),
        subject: triple.subject.clone(),
        relation: triple.relation.clone(),
        gold: triple.object.clone(),
        prompt,
    })
}

/// Assigns a stable query id: relation + "/" + zero-padded ordinal within
/// the relation, in input order.
pub fn query_id(relation: &str, ordinal: usize) -> String {
    format!("{relation}/{ordinal:05}")
}

/// Renders every triple with a template into a query. Triples whose relation
/// lacks a template are excluded; one warning per such relation is returned.
pub fn build_queries(
    kb: &KnowledgeBase,
    templates: &TemplateSet,
    mask_sentinel: &str,
) -> Result<(Vec<Query>, Vec<String>)> {
    let mut queries = Vec::with_capacity(kb.len());
    let mut ordinals: BTreeMap<&str, usize> = BTreeMap::new();
    let mut skipped: BTreeMap<&str, usize> = BTreeMap::new();
    for triple in kb.iter() {
        match templates.get(&triple.relation) {
            Some(template) => {
                let ordinal = ordinals.entry(triple.relation.as_str()).or_insert(0);
                let id = query_id(&triple.relation, *ordinal);
                *ordinal += 1;
                queries.push(render_query(triple, template, mask_sentinel, &id)?);
            }
            None => {
                *skipped.entry(triple.relation.as_str()).or_insert(0) += 1;
            }
        }
    }
    let warnings = skipped
        .into_iter()
        .map(|(r, n)| format!("relation {r}: no template, {n} triple(s) excluded"))
        .collect();
    Ok((queries, warnings))
}
