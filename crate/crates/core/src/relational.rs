//! Schemas, facts and (pointed, embedded) databases.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::scalar::{vec_from_json, vec_to_json, Scalar};

/// Opaque value identifier. Equality is string equality.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(Arc<str>);

impl Value {
    pub fn new(s: &str) -> Self {
        Value(Arc::from(s))
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::new(s)
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value(Arc::from(s))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    relations: BTreeMap<String, usize>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    /// The schema of directed graphs: a single binary relation `E`.
    pub fn graph() -> Self {
        Self::new().with("E", 2)
    }

    pub fn with(mut self, name: &str, arity: usize) -> Self {
        self.relations.insert(name.to_string(), arity);
        self
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, usize)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// True when every relation of `self` exists in `other` with the same arity.
    pub fn is_subschema_of(&self, other: &Schema) -> bool {
        self.relations
            .iter()
            .all(|(r, a)| other.arity(r) == Some(*a))
    }

    pub fn union(&self, other: &Schema) -> Result<Schema> {
        let mut out = self.clone();
        for (r, a) in other.relations() {
            match out.arity(r) {
                Some(b) if b != a => {
                    return Err(Error::Schema(format!("`{r}` has arities {b} and {a}")))
                }
                _ => {
                    out.relations.insert(r.to_string(), a);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub relation: String,
    pub args: Vec<Value>,
}

impl Fact {
    pub fn new(relation: &str, args: &[&str]) -> Self {
        Fact {
            relation: relation.to_string(),
            args: args.iter().map(|a| Value::new(a)).collect(),
        }
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// A finite set of facts over a schema.
///
/// Besides the values occurring in facts, a database may carry isolated
/// values. These are needed for patterns such as a single vertex or two
/// unconnected vertices, and they take part in matching like any other value.
#[derive(Clone, PartialEq, Eq)]
pub struct Database {
    schema: Schema,
    facts: BTreeSet<Fact>,
    values: BTreeSet<Value>,
}

impl fmt::Debug for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let iso: Vec<_> = self.isolated_values().collect();
        write!(f, "{:?}", self.facts)?;
        if !iso.is_empty() {
            write!(f, " + {iso:?}")?;
        }
        Ok(())
    }
}

impl Database {
    pub fn new(schema: Schema) -> Self {
        Database {
            schema,
            facts: BTreeSet::new(),
            values: BTreeSet::new(),
        }
    }

    /// Graph-schema database from an edge list.
    pub fn from_edges(edges: &[(&str, &str)]) -> Self {
        let mut db = Database::new(Schema::graph());
        for (a, b) in edges {
            db.insert(Fact::new("E", &[a, b])).expect("graph schema");
        }
        db
    }

    pub fn from_facts(schema: Schema, facts: impl IntoIterator<Item = Fact>) -> Result<Self> {
        let mut db = Database::new(schema);
        for f in facts {
            db.insert(f)?;
        }
        Ok(db)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn check(&self, fact: &Fact) -> Result<()> {
        let arity = self
            .schema
            .arity(&fact.relation)
            .ok_or_else(|| Error::UnknownRelation(fact.relation.clone()))?;
        if arity != fact.args.len() {
            return Err(Error::Arity {
                relation: fact.relation.clone(),
                expected: arity,
                got: fact.args.len(),
            });
        }
        Ok(())
    }

    /// Inserts a fact; returns false when it was already present.
    pub fn insert(&mut self, fact: Fact) -> Result<bool> {
        self.check(&fact)?;
        self.values.extend(fact.args.iter().cloned());
        Ok(self.facts.insert(fact))
    }

    pub fn add_value(&mut self, v: Value) {
        self.values.insert(v);
    }

    pub fn with_value(mut self, v: &str) -> Self {
        self.add_value(Value::new(v));
        self
    }

    pub fn facts(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    /// All values of the database, sorted.
    pub fn adom(&self) -> &BTreeSet<Value> {
        &self.values
    }

    pub fn num_values(&self) -> usize {
        self.values.len()
    }

    pub fn has_value(&self, v: &Value) -> bool {
        self.values.contains(v)
    }

    /// Values that occur in no fact.
    pub fn isolated_values(&self) -> impl Iterator<Item = &Value> {
        let used: BTreeSet<&Value> = self.facts.iter().flat_map(|f| f.args.iter()).collect();
        self.values.iter().filter(move |v| !used.contains(v))
    }

    /// Number of facts mentioning `v` (a fact counts once even if `v` repeats).
    pub fn value_degree(&self, v: &Value) -> usize {
        self.facts.iter().filter(|f| f.args.contains(v)).count()
    }

    /// Maximum number of facts that any value occurs in.
    pub fn degree(&self) -> usize {
        let mut tally: BTreeMap<&Value, usize> = BTreeMap::new();
        for f in &self.facts {
            let distinct: BTreeSet<&Value> = f.args.iter().collect();
            for v in distinct {
                *tally.entry(v).or_default() += 1;
            }
        }
        tally.values().copied().max().unwrap_or(0)
    }

    /// Gaifman graph: values adjacent iff they co-occur in a fact. No self loops.
    pub fn gaifman(&self) -> BTreeMap<Value, BTreeSet<Value>> {
        let mut adj: BTreeMap<Value, BTreeSet<Value>> = self
            .values
            .iter()
            .map(|v| (v.clone(), BTreeSet::new()))
            .collect();
        for f in &self.facts {
            for a in &f.args {
                for b in &f.args {
                    if a != b {
                        adj.get_mut(a).expect("value").insert(b.clone());
                    }
                }
            }
        }
        adj
    }

    /// BFS distances from `from` in the Gaifman graph.
    pub fn distances(&self, from: &Value) -> BTreeMap<Value, usize> {
        let adj = self.gaifman();
        let mut dist = BTreeMap::new();
        if !adj.contains_key(from) {
            return dist;
        }
        dist.insert(from.clone(), 0);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for w in &adj[&u] {
                if !dist.contains_key(w) {
                    dist.insert(w.clone(), d + 1);
                    queue.push_back(w.clone());
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        match self.values.iter().next() {
            None => true,
            Some(v) => self.distances(v).len() == self.values.len(),
        }
    }

    /// Connected components of the Gaifman graph, each as a sub-database.
    pub fn components(&self) -> Vec<Database> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in &self.values {
            if seen.contains(v) {
                continue;
            }
            let comp: BTreeSet<Value> = self.distances(v).into_keys().collect();
            seen.extend(comp.iter().cloned());
            out.push(self.restrict(&comp));
        }
        out
    }

    /// Sub-database induced by a value set.
    pub fn restrict(&self, keep: &BTreeSet<Value>) -> Database {
        let mut db = Database::new(self.schema.clone());
        for v in keep.iter().filter(|v| self.values.contains(*v)) {
            db.values.insert(v.clone());
        }
        for f in &self.facts {
            if f.args.iter().all(|a| keep.contains(a)) {
                db.facts.insert(f.clone());
            }
        }
        db
    }

    /// Applies a value renaming (need not be injective).
    pub fn rename(&self, map: &BTreeMap<Value, Value>) -> Database {
        let get = |v: &Value| map.get(v).cloned().unwrap_or_else(|| v.clone());
        let mut db = Database::new(self.schema.clone());
        for v in &self.values {
            db.values.insert(get(v));
        }
        for f in &self.facts {
            db.facts.insert(Fact {
                relation: f.relation.clone(),
                args: f.args.iter().map(get).collect(),
            });
        }
        db
    }

    /// Disjoint union; the caller guarantees disjoint value names.
    pub fn union(&self, other: &Database) -> Result<Database> {
        let mut db = Database::new(self.schema.union(&other.schema)?);
        db.values = self.values.union(&other.values).cloned().collect();
        db.facts = self.facts.union(&other.facts).cloned().collect();
        Ok(db)
    }

    /// Same facts and values, reinterpreted over a larger schema.
    pub fn with_schema(&self, schema: &Schema) -> Result<Database> {
        if !self.schema.is_subschema_of(schema) {
            return Err(Error::Schema("target schema lacks relations".into()));
        }
        Ok(Database {
            schema: schema.clone(),
            facts: self.facts.clone(),
            values: self.values.clone(),
        })
    }

    pub fn to_doc(&self) -> DatabaseDoc {
        let iso: Vec<String> = self.isolated_values().map(|v| v.to_string()).collect();
        DatabaseDoc {
            schema: self.schema.relations.clone(),
            facts: self
                .facts
                .iter()
                .map(|f| {
                    std::iter::once(f.relation.clone())
                        .chain(f.args.iter().map(|a| a.to_string()))
                        .collect()
                })
                .collect(),
            values: if iso.is_empty() { None } else { Some(iso) },
            ..DatabaseDoc::default()
        }
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self.to_doc()).expect("serializable")
    }

    pub fn from_json(v: &Json) -> Result<Database> {
        let doc: DatabaseDoc = serde_json::from_value(v.clone())?;
        doc.database()
    }
}

/// File format shared by databases, pointed databases, embedded databases and
/// datasets. Optional keys are omitted when absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatabaseDoc {
    pub schema: BTreeMap<String, usize>,
    pub facts: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<BTreeMap<String, Json>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<String, u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Json>,
}

impl DatabaseDoc {
    pub fn database(&self) -> Result<Database> {
        let schema = Schema {
            relations: self.schema.clone(),
        };
        let mut db = Database::new(schema);
        for row in &self.facts {
            let (rel, args) = row
                .split_first()
                .ok_or_else(|| Error::Parse("empty fact row".into()))?;
            db.insert(Fact {
                relation: rel.clone(),
                args: args.iter().map(|a| Value::new(a)).collect(),
            })?;
        }
        for v in self.values.iter().flatten() {
            db.add_value(Value::new(v));
        }
        Ok(db)
    }

    pub fn pointed(&self) -> Result<PointedDatabase> {
        let root = self
            .root
            .as_ref()
            .ok_or_else(|| Error::Parse("missing `root`".into()))?;
        PointedDatabase::new(self.database()?, Value::new(root))
    }

    pub fn embedded<S: Scalar>(&self) -> Result<EmbeddedDatabase<S>> {
        let db = self.database()?;
        let emb = self
            .embedding
            .as_ref()
            .ok_or_else(|| Error::Parse("missing `embedding`".into()))?;
        let mut map = BTreeMap::new();
        for (k, v) in emb {
            map.insert(Value::new(k), vec_from_json(v)?);
        }
        let dim = map.values().next().map_or(0, Vec::len);
        EmbeddedDatabase::new(Arc::new(db), dim, map)
    }

    pub fn labels(&self) -> BTreeMap<Value, bool> {
        self.labels
            .iter()
            .flatten()
            .map(|(k, v)| (Value::new(k), *v != 0))
            .collect()
    }
}

/// A database with a distinguished root value.
#[derive(Clone, PartialEq, Eq)]
pub struct PointedDatabase {
    pub db: Database,
    pub root: Value,
}

impl fmt::Debug for PointedDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} @ {}", self.db, self.root)
    }
}

impl PointedDatabase {
    /// The root is added as a value if the database does not mention it.
    pub fn new(mut db: Database, root: Value) -> Result<Self> {
        db.add_value(root.clone());
        Ok(PointedDatabase { db, root })
    }

    /// Strict constructor: the root must already be a value of `db`.
    pub fn checked(db: Database, root: Value) -> Result<Self> {
        if !db.has_value(&root) {
            return Err(Error::MissingRoot(root.to_string()));
        }
        Ok(PointedDatabase { db, root })
    }

    /// Single value with no facts.
    pub fn single(schema: Schema, root: &str) -> Self {
        PointedDatabase::new(Database::new(schema), Value::new(root)).expect("root added")
    }

    /// Root eccentricity in the Gaifman graph; `None` when some value is unreachable.
    pub fn diameter(&self) -> Option<usize> {
        let dist = self.db.distances(&self.root);
        if dist.len() < self.db.num_values() {
            None
        } else {
            dist.values().copied().max()
        }
    }

    pub fn to_json(&self) -> Json {
        let mut doc = self.db.to_doc();
        doc.root = Some(self.root.to_string());
        serde_json::to_value(doc).expect("serializable")
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let doc: DatabaseDoc = serde_json::from_value(v.clone())?;
        doc.pointed()
    }
}

/// A database together with a vector for every value.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedDatabase<S> {
    pub db: Arc<Database>,
    pub dim: usize,
    pub embedding: BTreeMap<Value, Vec<S>>,
}

impl<S: Scalar> EmbeddedDatabase<S> {
    pub fn new(db: Arc<Database>, dim: usize, embedding: BTreeMap<Value, Vec<S>>) -> Result<Self> {
        for v in db.adom() {
            let x = embedding
                .get(v)
                .ok_or_else(|| Error::Schema(format!("embedding misses value `{v}`")))?;
            if x.len() != dim {
                return Err(Error::Dim {
                    expected: dim,
                    got: x.len(),
                });
            }
        }
        Ok(EmbeddedDatabase { db, dim, embedding })
    }

    /// Every value mapped to the empty vector.
    pub fn empty(db: Arc<Database>) -> Self {
        let embedding = db.adom().iter().map(|v| (v.clone(), Vec::new())).collect();
        EmbeddedDatabase {
            db,
            dim: 0,
            embedding,
        }
    }

    pub fn get(&self, v: &Value) -> Option<&[S]> {
        self.embedding.get(v).map(Vec::as_slice)
    }

    pub fn to_json(&self) -> Json {
        let mut doc = self.db.to_doc();
        doc.embedding = Some(
            self.embedding
                .iter()
                .map(|(k, v)| (k.to_string(), vec_to_json(v)))
                .collect(),
        );
        serde_json::to_value(doc).expect("serializable")
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let doc: DatabaseDoc = serde_json::from_value(v.clone())?;
        doc.embedded()
    }
}
