//! Triple and type-assignment ingestion into an interned knowledge graph.
//!
//! Labels are interned in first-appearance order over train, then valid,
//! then test, reading subject, predicate and object left to right. The
//! resulting IDs are dense and stable across runs, which makes every
//! downstream tie-break reproducible.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KgError {
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    MalformedLine { line: usize, found: usize },
    #[error("line {line}: expected 2 tab-separated fields, found {found}")]
    MalformedTypeLine { line: usize, found: usize },
    #[error("line {line}: input is not valid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("read failed: {0}")]
    Read(String),
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error("unknown entity id {0}")]
    UnknownEntity(u32),
}

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_newtype!(
    /// Dense entity handle, `0..n_entities`.
    EntityId
);
id_newtype!(
    /// Dense predicate handle, `0..n_predicates`.
    PredicateId
);
id_newtype!(
    /// Dense class handle, `0..n_classes`.
    ClassId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A triple as read from disk, before interning.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl LabeledTriple {
    pub fn new(s: impl Into<String>, p: impl Into<String>, o: impl Into<String>) -> Self {
        Self {
            subject: s.into(),
            predicate: p.into(),
            object: o.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub predicate: PredicateId,
    pub object: EntityId,
    pub split: Split,
}

/// Bijective label <-> dense id table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = u32::try_from(self.labels.len()).expect("more than u32::MAX labels");
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Reads lines as raw bytes so that invalid UTF-8 is reported with its line
/// number instead of as a generic IO error.
fn for_each_line<R, F>(mut reader: R, mut f: F) -> Result<(), KgError>
where
    R: BufRead,
    F: FnMut(usize, &str) -> Result<(), KgError>,
{
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let read = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| KgError::Read(e.to_string()))?;
        if read == 0 {
            return Ok(());
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|_| KgError::InvalidUtf8 { line: line_no })?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        f(line_no, line)?;
    }
}

/// Parses `subject<TAB>predicate<TAB>object` lines in file order.
pub fn parse_triples<R: BufRead>(reader: R) -> Result<Vec<LabeledTriple>, KgError> {
    let mut out = Vec::new();
    for_each_line(reader, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(KgError::MalformedLine {
                line: line_no,
                found: fields.len(),
            });
        }
        out.push(LabeledTriple::new(fields[0].trim(), fields[1].trim(), fields[2].trim()));
        Ok(())
    })?;
    Ok(out)
}

/// Parses `entity<TAB>class` lines in file order; duplicates are kept here
/// and collapsed by [`build_graph`].
pub fn parse_types<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, KgError> {
    let mut out = Vec::new();
    for_each_line(reader, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(KgError::MalformedTypeLine {
                line: line_no,
                found: fields.len(),
            });
        }
        out.push((fields[0].trim().to_owned(), fields[1].trim().to_owned()));
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    DuplicateTrainTriple,
    DuplicateValidTriple,
    DuplicateTestTriple,
    UnknownTypedEntity,
}

impl WarningKind {
    fn duplicate_in(split: Split) -> Self {
        match split {
            Split::Train => WarningKind::DuplicateTrainTriple,
            Split::Valid => WarningKind::DuplicateValidTriple,
            Split::Test => WarningKind::DuplicateTestTriple,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarning {
    pub kind: WarningKind,
    pub count: usize,
}

/// Summary of an ingestion run, serialized as the load-report JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub entities: usize,
    pub predicates: usize,
    pub classes: usize,
    pub triples_per_split: BTreeMap<Split, usize>,
    pub warnings: Vec<LoadWarning>,
}

impl LoadReport {
    pub fn warning_count(&self, kind: WarningKind) -> usize {
        self.warnings.iter().filter(|w| w.kind == kind).map(|w| w.count).sum()
    }
}

/// Immutable interned knowledge graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    entities: Interner,
    predicates: Interner,
    classes: Interner,
    triples: Vec<Triple>,
    split_ranges: [(usize, usize); 3],
    /// Deduplicated `(entity, class)` pairs in ingestion order.
    typings: Vec<(EntityId, ClassId)>,
    class_of: Vec<Vec<ClassId>>,
}

/// Interns and validates the three splits plus type assignments.
pub fn build_graph(
    train: &[LabeledTriple],
    valid: &[LabeledTriple],
    test: &[LabeledTriple],
    types: &[(String, String)],
) -> (KnowledgeGraph, LoadReport) {
    let mut entities = Interner::default();
    let mut predicates = Interner::default();
    let mut classes = Interner::default();
    let mut triples = Vec::with_capacity(train.len() + valid.len() + test.len());
    let mut split_ranges = [(0, 0); 3];
    let mut warnings: BTreeMap<WarningKind, usize> = BTreeMap::new();
    let mut triples_per_split = BTreeMap::new();

    for (slot, (split, rows)) in [(Split::Train, train), (Split::Valid, valid), (Split::Test, test)]
        .into_iter()
        .enumerate()
    {
        let start = triples.len();
        let mut seen: HashSet<(u32, u32, u32)> = HashSet::with_capacity(rows.len());
        for row in rows {
            let s = entities.intern(&row.subject);
            let p = predicates.intern(&row.predicate);
            let o = entities.intern(&row.object);
            if !seen.insert((s, p, o)) {
                *warnings.entry(WarningKind::duplicate_in(split)).or_default() += 1;
                continue;
            }
            triples.push(Triple {
                subject: EntityId(s),
                predicate: PredicateId(p),
                object: EntityId(o),
                split,
            });
        }
        split_ranges[slot] = (start, triples.len());
        triples_per_split.insert(split, triples.len() - start);
    }

    let mut class_of = vec![Vec::new(); entities.len()];
    let mut typings = Vec::new();
    let mut seen_typings = HashSet::new();
    for (entity, class) in types {
        let Some(e) = entities.get(entity) else {
            *warnings.entry(WarningKind::UnknownTypedEntity).or_default() += 1;
            continue;
        };
        let c = classes.intern(class);
        if seen_typings.insert((e, c)) {
            typings.push((EntityId(e), ClassId(c)));
            class_of[e as usize].push(ClassId(c));
        }
    }
    for cs in &mut class_of {
        cs.sort_unstable();
    }

    let for_report: Vec<LoadWarning> = warnings
        .into_iter()
        .map(|(kind, count)| LoadWarning { kind, count })
        .collect();
    for w in &for_report {
        log::warn!("ingestion: {} x {:?}", w.count, w.kind);
    }

    let graph = KnowledgeGraph {
        entities,
        predicates,
        classes,
        triples,
        split_ranges,
        typings,
        class_of,
    };
    let report = LoadReport {
        entities: graph.num_entities(),
        predicates: graph.num_predicates(),
        classes: graph.num_classes(),
        triples_per_split,
        warnings: for_report,
    };
    (graph, report)
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_predicates(&self) -> usize {
        self.predicates.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn entities(&self) -> &Interner {
        &self.entities
    }

    pub fn predicates(&self) -> &Interner {
        &self.predicates
    }

    pub fn classes(&self) -> &Interner {
        &self.classes
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label).map(EntityId)
    }

    pub fn predicate_id(&self, label: &str) -> Option<PredicateId> {
        self.predicates.get(label).map(PredicateId)
    }

    pub fn class_id(&self, label: &str) -> Option<ClassId> {
        self.classes.get(label).map(ClassId)
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        self.entities.label(id.0).expect("entity id out of range")
    }

    pub fn predicate_label(&self, id: PredicateId) -> &str {
        self.predicates.label(id.0).expect("predicate id out of range")
    }

    pub fn class_label(&self, id: ClassId) -> &str {
        self.classes.label(id.0).expect("class id out of range")
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        let (start, end) = self.split_ranges[split as usize];
        &self.triples[start..end]
    }

    /// The evidence used for graph-side similarity.
    pub fn train_triples(&self) -> &[Triple] {
        self.split(Split::Train)
    }

    pub fn classes_of(&self, e: EntityId) -> &[ClassId] {
        self.class_of.get(e.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn typings(&self) -> &[(EntityId, ClassId)] {
        &self.typings
    }

    /// Number of entities carrying at least one class.
    pub fn num_typed_entities(&self) -> usize {
        self.class_of.iter().filter(|c| !c.is_empty()).count()
    }

    /// Members of class `c` in ascending id order.
    pub fn entities_of_class(&self, c: ClassId) -> Result<Vec<EntityId>, KgError> {
        if c.index() >= self.num_classes() {
            return Err(KgError::UnknownClass(c.0));
        }
        Ok(self
            .class_of
            .iter()
            .enumerate()
            .filter(|(_, cs)| cs.binary_search(&c).is_ok())
            .map(|(i, _)| EntityId(i as u32))
            .collect())
    }

    /// Members of every class, indexed by class id.
    pub fn class_members(&self) -> Vec<Vec<EntityId>> {
        let mut members = vec![Vec::new(); self.num_classes()];
        for (i, cs) in self.class_of.iter().enumerate() {
            for c in cs {
                members[c.index()].push(EntityId(i as u32));
            }
        }
        members
    }

    pub fn labeled(&self, t: &Triple) -> LabeledTriple {
        LabeledTriple::new(
            self.entity_label(t.subject),
            self.predicate_label(t.predicate),
            self.entity_label(t.object),
        )
    }

    pub fn labeled_split(&self, split: Split) -> Vec<LabeledTriple> {
        self.split(split).iter().map(|t| self.labeled(t)).collect()
    }

    pub fn labeled_types(&self) -> Vec<(String, String)> {
        self.typings
            .iter()
            .map(|&(e, c)| (self.entity_label(e).to_owned(), self.class_label(c).to_owned()))
            .collect()
    }

    /// Writes one split back out in the triples-file format.
    pub fn write_split<W: Write>(&self, split: Split, mut w: W) -> std::io::Result<()> {
        for t in self.split(split) {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.entity_label(t.subject),
                self.predicate_label(t.predicate),
                self.entity_label(t.object)
            )?;
        }
        Ok(())
    }

    pub fn write_types<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for &(e, c) in &self.typings {
            writeln!(w, "{}\t{}", self.entity_label(e), self.class_label(c))?;
        }
        Ok(())
    }
}
