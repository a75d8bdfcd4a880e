//! OpenEA-format parsing and the in-memory knowledge-graph pair.
//!
//! Layout consumed: `rel_triples_1`, `rel_triples_2` (tab-separated
//! `head⇥relation⇥tail` URIs, one triple per line) and
//! `721_5fold/<fold>/{train_links,valid_links,test_links}` (tab-separated
//! URI pairs). Ids are assigned densely in first-appearance order; the two
//! graphs keep separate entity id spaces while relations share one space.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type EntityId = usize;
pub type RelationId = usize;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected} tab-separated fields")]
    Malformed {
        path: PathBuf,
        line: usize,
        expected: usize,
    },
    #[error("{path}: no triples or links found")]
    Empty { path: PathBuf },
    #[error("{path}:{line}: unknown URI `{uri}`")]
    UnknownUri {
        path: PathBuf,
        line: usize,
        uri: String,
    },
    #[error("duplicate entity URI `{0}`")]
    DuplicateUri(String),
    #[error("entity id {id} out of range ({count} entities)")]
    EntityIdOutOfRange { id: usize, count: usize },
    #[error("relation id {id} out of range ({count} relations)")]
    RelationIdOutOfRange { id: usize, count: usize },
    #[error("train/valid/test splits overlap: {0}")]
    OverlappingSplits(String),
}

/// One `(head, relation, tail)` statement with dense ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// URI-to-dense-id table preserving first-appearance order.
#[derive(Debug, Default, Clone)]
pub struct UriTable {
    uris: Vec<String>,
    ids: HashMap<String, usize>,
}

impl UriTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id for `uri`, assigning the next dense id on first sight.
    pub fn intern(&mut self, uri: &str) -> usize {
        if let Some(&id) = self.ids.get(uri) {
            return id;
        }
        let id = self.uris.len();
        self.uris.push(uri.to_string());
        self.ids.insert(uri.to_string(), id);
        id
    }

    pub fn id(&self, uri: &str) -> Option<usize> {
        self.ids.get(uri).copied()
    }

    pub fn uri(&self, id: usize) -> &str {
        &self.uris[id]
    }

    pub fn len(&self) -> usize {
        self.uris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uris.is_empty()
    }

    pub fn uris(&self) -> &[String] {
        &self.uris
    }
}

/// One knowledge graph with the index structures the encoder consumes.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    pub name: String,
    pub entity_uris: Vec<String>,
    pub triples: Vec<Triple>,
    /// Undirected adjacency per entity, sorted and deduplicated, always
    /// containing the entity itself (self-loop).
    pub neighbor_index: Vec<Vec<EntityId>>,
    /// Relations where the entity appears as head, duplicates kept.
    pub out_relations: Vec<Vec<RelationId>>,
    /// Relations where the entity appears as tail, duplicates kept.
    pub in_relations: Vec<Vec<RelationId>>,
}

impl KnowledgeGraph {
    /// Validates ids and builds the neighbor/relation indices.
    /// `relation_count` is the joint relation-space size of the KG pair.
    pub fn new(
        name: impl Into<String>,
        entity_uris: Vec<String>,
        triples: Vec<Triple>,
        relation_count: usize,
    ) -> Result<Self, KgError> {
        let n = entity_uris.len();
        let mut seen = HashSet::with_capacity(n);
        for uri in &entity_uris {
            if !seen.insert(uri.as_str()) {
                return Err(KgError::DuplicateUri(uri.clone()));
            }
        }

        let mut neighbor_sets: Vec<HashSet<EntityId>> = (0..n).map(|e| HashSet::from([e])).collect();
        let mut out_relations = vec![Vec::new(); n];
        let mut in_relations = vec![Vec::new(); n];
        for t in &triples {
            for id in [t.head, t.tail] {
                if id >= n {
                    return Err(KgError::EntityIdOutOfRange { id, count: n });
                }
            }
            if t.relation >= relation_count {
                return Err(KgError::RelationIdOutOfRange {
                    id: t.relation,
                    count: relation_count,
                });
            }
            neighbor_sets[t.head].insert(t.tail);
            neighbor_sets[t.tail].insert(t.head);
            out_relations[t.head].push(t.relation);
            in_relations[t.tail].push(t.relation);
        }
        let neighbor_index = neighbor_sets
            .into_iter()
            .map(|s| {
                let mut v: Vec<_> = s.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect();

        Ok(Self {
            name: name.into(),
            entity_uris,
            triples,
            neighbor_index,
            out_relations,
            in_relations,
        })
    }

    pub fn entity_count(&self) -> usize {
        self.entity_uris.len()
    }

    /// Triples rendered back to OpenEA tab-separated lines.
    pub fn to_triple_lines(&self, relations: &UriTable) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&self.entity_uris[t.head]);
            out.push('\t');
            out.push_str(relations.uri(t.relation));
            out.push('\t');
            out.push_str(&self.entity_uris[t.tail]);
            out.push('\n');
        }
        out
    }
}

/// A labeled correspondence: `source` entity in the source KG is the same
/// real-world object as `target` in the target KG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntityMapping {
    pub source: EntityId,
    pub target: EntityId,
}

/// A KG pair plus mapping splits and the unlabeled entity sets.
///
/// Validation and test entities count as unlabeled: the trainer never sees
/// their links, so they participate in pseudo-mapping generation.
#[derive(Debug, Clone)]
pub struct AlignmentDataset {
    pub source_kg: KnowledgeGraph,
    pub target_kg: KnowledgeGraph,
    /// Shared relation URI table across both graphs.
    pub relation_uris: Vec<String>,
    pub train: Vec<EntityMapping>,
    pub valid: Vec<EntityMapping>,
    pub test: Vec<EntityMapping>,
    /// Source entities absent from `train`, ascending.
    pub unlabeled_source: Vec<EntityId>,
    /// Target entities absent from `train`, ascending.
    pub unlabeled_target: Vec<EntityId>,
}

impl AlignmentDataset {
    pub fn new(
        source_kg: KnowledgeGraph,
        target_kg: KnowledgeGraph,
        relation_uris: Vec<String>,
        train: Vec<EntityMapping>,
        valid: Vec<EntityMapping>,
        test: Vec<EntityMapping>,
    ) -> Result<Self, KgError> {
        for split in [&train, &valid, &test] {
            for m in split.iter() {
                if m.source >= source_kg.entity_count() {
                    return Err(KgError::EntityIdOutOfRange {
                        id: m.source,
                        count: source_kg.entity_count(),
                    });
                }
                if m.target >= target_kg.entity_count() {
                    return Err(KgError::EntityIdOutOfRange {
                        id: m.target,
                        count: target_kg.entity_count(),
                    });
                }
            }
        }
        check_disjoint(&train, &valid, &test)?;

        let train_sources: HashSet<_> = train.iter().map(|m| m.source).collect();
        let train_targets: HashSet<_> = train.iter().map(|m| m.target).collect();
        let unlabeled_source = (0..source_kg.entity_count())
            .filter(|e| !train_sources.contains(e))
            .collect();
        let unlabeled_target = (0..target_kg.entity_count())
            .filter(|e| !train_targets.contains(e))
            .collect();

        Ok(Self {
            source_kg,
            target_kg,
            relation_uris,
            train,
            valid,
            test,
            unlabeled_source,
            unlabeled_target,
        })
    }

    pub fn relation_count(&self) -> usize {
        self.relation_uris.len()
    }

    /// Mappings of one split.
    pub fn split(&self, split: crate::eval::Split) -> &[EntityMapping] {
        match split {
            crate::eval::Split::Train => &self.train,
            crate::eval::Split::Valid => &self.valid,
            crate::eval::Split::Test => &self.test,
        }
    }
}

fn check_disjoint(
    train: &[EntityMapping],
    valid: &[EntityMapping],
    test: &[EntityMapping],
) -> Result<(), KgError> {
    let splits = [("train", train), ("valid", valid), ("test", test)];
    for (i, (name_a, a)) in splits.iter().enumerate() {
        for (name_b, b) in splits.iter().skip(i + 1) {
            let a_src: HashSet<_> = a.iter().map(|m| m.source).collect();
            let a_tgt: HashSet<_> = a.iter().map(|m| m.target).collect();
            for m in *b {
                if a_src.contains(&m.source) {
                    return Err(KgError::OverlappingSplits(format!(
                        "source entity {} in both {name_a} and {name_b}",
                        m.source
                    )));
                }
                if a_tgt.contains(&m.target) {
                    return Err(KgError::OverlappingSplits(format!(
                        "target entity {} in both {name_a} and {name_b}",
                        m.target
                    )));
                }
            }
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, KgError> {
    fs::read_to_string(path).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a tab-separated triple file, interning URIs into the given tables.
/// Ids are dense in first-appearance order; one triple per non-empty line.
pub fn parse_triples(
    path: &Path,
    entities: &mut UriTable,
    relations: &mut UriTable,
) -> Result<Vec<Triple>, KgError> {
    let text = read(path)?;
    let mut triples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(h), Some(r), Some(t), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(KgError::Malformed {
                path: path.to_path_buf(),
                line: lineno + 1,
                expected: 3,
            });
        };
        if h.is_empty() || r.is_empty() || t.is_empty() {
            return Err(KgError::Malformed {
                path: path.to_path_buf(),
                line: lineno + 1,
                expected: 3,
            });
        }
        triples.push(Triple {
            head: entities.intern(h),
            relation: relations.intern(r),
            tail: entities.intern(t),
        });
    }
    if triples.is_empty() {
        return Err(KgError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(triples)
}

/// Parses a tab-separated URI-pair file against already-built tables.
/// Order is preserved and duplicates are retained.
pub fn parse_links(
    path: &Path,
    source_entities: &UriTable,
    target_entities: &UriTable,
) -> Result<Vec<EntityMapping>, KgError> {
    let text = read(path)?;
    let mut links = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(s), Some(t), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(KgError::Malformed {
                path: path.to_path_buf(),
                line: lineno + 1,
                expected: 2,
            });
        };
        let unknown = |uri: &str| KgError::UnknownUri {
            path: path.to_path_buf(),
            line: lineno + 1,
            uri: uri.to_string(),
        };
        links.push(EntityMapping {
            source: source_entities.id(s).ok_or_else(|| unknown(s))?,
            target: target_entities.id(t).ok_or_else(|| unknown(t))?,
        });
    }
    if links.is_empty() {
        return Err(KgError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(links)
}

/// Loads a full OpenEA-layout dataset directory for one fold.
pub fn build_dataset(dir: &Path, fold: usize) -> Result<AlignmentDataset, KgError> {
    let mut source_entities = UriTable::new();
    let mut target_entities = UriTable::new();
    let mut relations = UriTable::new();

    let source_triples = parse_triples(&dir.join("rel_triples_1"), &mut source_entities, &mut relations)?;
    let target_triples = parse_triples(&dir.join("rel_triples_2"), &mut target_entities, &mut relations)?;

    let fold_dir = dir.join("721_5fold").join(fold.to_string());
    let train = parse_links(&fold_dir.join("train_links"), &source_entities, &target_entities)?;
    let valid = parse_links(&fold_dir.join("valid_links"), &source_entities, &target_entities)?;
    let test = parse_links(&fold_dir.join("test_links"), &source_entities, &target_entities)?;

    let source_kg = KnowledgeGraph::new(
        "source",
        source_entities.uris().to_vec(),
        source_triples,
        relations.len(),
    )?;
    let target_kg = KnowledgeGraph::new(
        "target",
        target_entities.uris().to_vec(),
        target_triples,
        relations.len(),
    )?;

    AlignmentDataset::new(
        source_kg,
        target_kg,
        relations.uris().to_vec(),
        train,
        valid,
        test,
    )
}
