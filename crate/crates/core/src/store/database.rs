use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::store::schema::{ConstId, FunctorId, GroundAtom, Schema, Value};

const MISSING: Value = Value::MAX;
const MAX_DENSE_CELLS: u64 = 1 << 32;

/// Read access to a total assignment of ground atoms. Implemented by
/// [`Database`] and by [`Evidence`] overlays on top of one.
pub trait AtomSource: Sync {
    fn schema(&self) -> &Schema;

    fn attr_value(&self, f: FunctorId, args: &[ConstId]) -> Value;

    fn rel_holds(&self, f: FunctorId, args: &[ConstId]) -> bool;

    /// Calls `cb` once per true tuple of relationship `f` that agrees with
    /// every bound position of `pattern`.
    fn scan_rel(&self, f: FunctorId, pattern: &[Option<ConstId>], cb: &mut dyn FnMut(&[ConstId]));

    /// Approximate number of true tuples, used for join ordering.
    fn rel_size_hint(&self, f: FunctorId) -> usize;

    fn value(&self, f: FunctorId, args: &[ConstId]) -> Value {
        let info = self.schema().functor(f);
        if info.is_relationship() {
            if self.rel_holds(f, args) {
                info.true_value()
            } else {
                info.false_value()
            }
        } else {
            self.attr_value(f, args)
        }
    }

    fn atom_value(&self, atom: &GroundAtom) -> Value {
        self.value(atom.functor, &atom.args)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AttrTable {
    dims: Vec<usize>,
    values: Vec<Value>,
}

impl AttrTable {
    fn offset(&self, args: &[ConstId]) -> usize {
        let mut off = 0usize;
        for (&a, &d) in args.iter().zip(&self.dims) {
            off = off * d + a as usize;
        }
        off
    }
}

/// True tuples of one relationship, sorted lexicographically, with one
/// secondary permutation per non-leading argument position.
#[derive(Debug, Clone)]
pub(crate) struct RelTable {
    arity: usize,
    len: usize,
    flat: Vec<ConstId>,
    by_pos: Vec<Vec<u32>>,
}

impl RelTable {
    /// `flat` must be sorted lexicographically by tuple and free of duplicates.
    fn from_sorted(arity: usize, len: usize, flat: Vec<ConstId>) -> Self {
        let mut by_pos = vec![Vec::new()];
        for p in 1..arity {
            let mut perm: Vec<u32> = (0..len as u32).collect();
            perm.sort_by_key(|&i| (flat[i as usize * arity + p], i));
            by_pos.push(perm);
        }
        RelTable {
            arity,
            len,
            flat,
            by_pos,
        }
    }

    fn empty(arity: usize) -> Self {
        Self::from_sorted(arity, 0, Vec::new())
    }

    fn tuple(&self, i: usize) -> &[ConstId] {
        &self.flat[i * self.arity..(i + 1) * self.arity]
    }

    fn contains(&self, args: &[ConstId]) -> bool {
        if self.arity == 0 {
            return self.len > 0;
        }
        let (mut lo, mut hi) = (0usize, self.len);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.tuple(mid).cmp(args) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    fn scan(&self, pattern: &[Option<ConstId>], cb: &mut dyn FnMut(&[ConstId])) {
        if self.arity == 0 {
            if self.len > 0 {
                cb(&[]);
            }
            return;
        }
        let matches = |t: &[ConstId]| {
            pattern
                .iter()
                .zip(t)
                .all(|(p, &c)| p.is_none_or(|v| v == c))
        };
        if pattern.iter().all(Option::is_some) {
            let t: Vec<ConstId> = pattern.iter().map(|p| p.unwrap()).collect();
            if self.contains(&t) {
                cb(&t);
            }
            return;
        }
        if let Some(first) = pattern[0] {
            let lo = partition(self.len, |i| self.flat[i * self.arity] < first);
            let hi = partition(self.len, |i| self.flat[i * self.arity] <= first);
            for i in lo..hi {
                let t = self.tuple(i);
                if matches(t) {
                    cb(t);
                }
            }
            return;
        }
        if let Some(p) = pattern.iter().position(Option::is_some) {
            let v = pattern[p].unwrap();
            let perm = &self.by_pos[p];
            let key = |k: usize| self.flat[perm[k] as usize * self.arity + p];
            let lo = partition(self.len, |k| key(k) < v);
            let hi = partition(self.len, |k| key(k) <= v);
            for &i in &perm[lo..hi] {
                let t = self.tuple(i as usize);
                if matches(t) {
                    cb(t);
                }
            }
            return;
        }
        for i in 0..self.len {
            cb(self.tuple(i));
        }
    }
}

fn partition(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, len);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone)]
pub(crate) enum Table {
    Attribute(AttrTable),
    Relationship(RelTable),
}

/// An immutable, closed-world relational database. Attribute functors are
/// stored densely over their grounding space; relationships store their
/// true tuples only.
#[derive(Debug, Clone)]
pub struct Database {
    schema: Arc<Schema>,
    tables: Vec<Table>,
}

impl Database {
    /// Every attribute set to its first range value, every relationship false.
    pub fn with_defaults(schema: Arc<Schema>) -> Result<Self> {
        let tables = (0..schema.functors().len())
            .map(|f| {
                let info = schema.functor(f);
                if info.is_relationship() {
                    Ok(Table::Relationship(RelTable::empty(info.arg_pops.len())))
                } else {
                    let (dims, cells) = attr_dims(&schema, f)?;
                    Ok(Table::Attribute(AttrTable {
                        dims,
                        values: vec![0; cells],
                    }))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Database { schema, tables })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Number of ground atoms after closed-world completion.
    pub fn atom_count(&self) -> u64 {
        (0..self.tables.len())
            .map(|f| self.schema.grounding_space(f))
            .sum()
    }

    /// Number of true tuples stored for a relationship.
    pub fn true_count(&self, f: FunctorId) -> usize {
        match &self.tables[f] {
            Table::Relationship(r) => r.len,
            Table::Attribute(_) => 0,
        }
    }

    /// True tuples of relationship `f` in lexicographic order.
    pub fn true_tuples(&self, f: FunctorId) -> Vec<Vec<ConstId>> {
        match &self.tables[f] {
            Table::Relationship(r) => (0..r.len).map(|i| r.tuple(i).to_vec()).collect(),
            Table::Attribute(_) => Vec::new(),
        }
    }

    pub(crate) fn replace_attribute(&mut self, f: FunctorId, values: Vec<Value>) {
        match &mut self.tables[f] {
            Table::Attribute(a) => {
                assert_eq!(a.values.len(), values.len());
                a.values = values;
            }
            Table::Relationship(_) => panic!("replace_attribute on relationship"),
        }
    }

    /// `tuples` must be sorted and deduplicated.
    pub(crate) fn replace_relationship(&mut self, f: FunctorId, len: usize, flat: Vec<ConstId>) {
        let arity = self.schema.functor(f).arg_pops.len();
        debug_assert_eq!(flat.len(), len * arity);
        self.tables[f] = Table::Relationship(RelTable::from_sorted(arity, len, flat));
    }
}

fn attr_dims(schema: &Schema, f: FunctorId) -> Result<(Vec<usize>, usize)> {
    let info = schema.functor(f);
    let dims: Vec<usize> = info
        .arg_pops
        .iter()
        .map(|&p| schema.population(p).len())
        .collect();
    let cells = schema.grounding_space(f);
    if cells > MAX_DENSE_CELLS {
        return Err(Error::TooLarge(format!(
            "attribute `{}` has {cells} groundings",
            info.name()
        )));
    }
    Ok((dims, cells as usize))
}

impl AtomSource for Database {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn attr_value(&self, f: FunctorId, args: &[ConstId]) -> Value {
        match &self.tables[f] {
            Table::Attribute(a) => a.values[a.offset(args)],
            Table::Relationship(_) => panic!("attr_value on relationship"),
        }
    }

    fn rel_holds(&self, f: FunctorId, args: &[ConstId]) -> bool {
        match &self.tables[f] {
            Table::Relationship(r) => r.contains(args),
            Table::Attribute(_) => panic!("rel_holds on attribute"),
        }
    }

    fn scan_rel(&self, f: FunctorId, pattern: &[Option<ConstId>], cb: &mut dyn FnMut(&[ConstId])) {
        match &self.tables[f] {
            Table::Relationship(r) => r.scan(pattern, cb),
            Table::Attribute(_) => panic!("scan_rel on attribute"),
        }
    }

    fn rel_size_hint(&self, f: FunctorId) -> usize {
        self.true_count(f)
    }
}

/// Accumulates atoms and validates them into a [`Database`].
pub struct DatabaseBuilder {
    schema: Arc<Schema>,
    attrs: Vec<Option<AttrTable>>,
    rel_flat: Vec<Vec<ConstId>>,
    rel_truth: Vec<Vec<bool>>,
}

impl DatabaseBuilder {
    pub fn new(schema: Arc<Schema>) -> Result<Self> {
        let n = schema.functors().len();
        let mut attrs = Vec::with_capacity(n);
        for f in 0..n {
            if schema.functor(f).is_relationship() {
                attrs.push(None);
            } else {
                let (dims, cells) = attr_dims(&schema, f)?;
                attrs.push(Some(AttrTable {
                    dims,
                    values: vec![MISSING; cells],
                }));
            }
        }
        Ok(DatabaseBuilder {
            schema,
            attrs,
            rel_flat: vec![Vec::new(); n],
            rel_truth: vec![Vec::new(); n],
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Sets an atom by names, e.g. `set("gender", &["anna"], "W")`.
    pub fn set(&mut self, functor: &str, args: &[&str], value: &str) -> Result<()> {
        let f = self.schema.functor_id(functor)?;
        let info = self.schema.functor(f);
        if args.len() != info.arg_pops.len() {
            return Err(Error::Type(format!(
                "`{functor}` takes {} arguments, got {}",
                info.arg_pops.len(),
                args.len()
            )));
        }
        let ids = args
            .iter()
            .zip(&info.arg_pops)
            .map(|(a, &p)| self.schema.population(p).id(a))
            .collect::<Result<Vec<_>>>()?;
        let v = info.decl.value_index(value)?;
        self.set_ids(f, &ids, v)
    }

    pub fn set_ids(&mut self, f: FunctorId, args: &[ConstId], value: Value) -> Result<()> {
        let info = self.schema.functor(f);
        if value as usize >= info.range_len() {
            return Err(Error::Internal(format!("value index {value} out of range")));
        }
        if info.is_relationship() {
            self.rel_flat[f].extend_from_slice(args);
            self.rel_truth[f].push(value == info.true_value());
            return Ok(());
        }
        let table = self.attrs[f].as_mut().expect("attribute table");
        let off = table.offset(args);
        let old = table.values[off];
        if old != MISSING && old != value {
            let atom = self
                .schema
                .display_atom(&GroundAtom::new(f, args.to_vec()));
            return Err(Error::ConflictingAtom {
                atom,
                first: info.decl.range[old as usize].clone(),
                second: info.decl.range[value as usize].clone(),
            });
        }
        table.values[off] = value;
        Ok(())
    }

    pub fn finish(self) -> Result<Database> {
        let schema = self.schema;
        let mut tables = Vec::with_capacity(self.attrs.len());
        for (f, attr) in self.attrs.into_iter().enumerate() {
            match attr {
                Some(table) => {
                    if let Some(off) = table.values.iter().position(|&v| v == MISSING) {
                        let args = unravel(off, &table.dims);
                        return Err(Error::MissingAttribute {
                            atom: schema.display_atom(&GroundAtom::new(f, args)),
                        });
                    }
                    tables.push(Table::Attribute(table));
                }
                None => {
                    let arity = schema.functor(f).arg_pops.len();
                    tables.push(Table::Relationship(build_rel(
                        &schema,
                        f,
                        arity,
                        &self.rel_flat[f],
                        &self.rel_truth[f],
                    )?));
                }
            }
        }
        Ok(Database { schema, tables })
    }
}

fn build_rel(
    schema: &Schema,
    f: FunctorId,
    arity: usize,
    flat: &[ConstId],
    truth: &[bool],
) -> Result<RelTable> {
    let n = truth.len();
    let tuple = |i: usize| &flat[i * arity..(i + 1) * arity];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| tuple(a).cmp(tuple(b)));
    let mut out = Vec::new();
    let mut len = 0usize;
    let mut i = 0usize;
    while i < n {
        let t = tuple(order[i]);
        let val = truth[order[i]];
        let mut j = i + 1;
        while j < n && tuple(order[j]) == t {
            if truth[order[j]] != val {
                let atom = schema.display_atom(&GroundAtom::new(f, t.to_vec()));
                return Err(Error::ConflictingAtom {
                    atom,
                    first: if val { "T" } else { "F" }.to_string(),
                    second: if val { "F" } else { "T" }.to_string(),
                });
            }
            j += 1;
        }
        if val {
            out.extend_from_slice(t);
            len += 1;
        }
        i = j;
    }
    Ok(RelTable::from_sorted(arity, len, out))
}

pub(crate) fn unravel(mut off: usize, dims: &[usize]) -> Vec<ConstId> {
    let mut args = vec![0; dims.len()];
    for (slot, &d) in args.iter_mut().zip(dims).rev() {
        *slot = (off % d) as ConstId;
        off /= d;
    }
    args
}

/// Iterates every tuple of the product of `dims` in lexicographic order.
pub(crate) fn for_each_tuple(dims: &[usize], mut cb: impl FnMut(&[ConstId])) {
    if dims.contains(&0) {
        return;
    }
    let mut t = vec![0 as ConstId; dims.len()];
    loop {
        cb(&t);
        let mut k = dims.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            t[k] += 1;
            if (t[k] as usize) < dims[k] {
                break;
            }
            t[k] = 0;
        }
    }
}

/// A database with some atoms overridden. Used to clamp a query target to a
/// candidate value, and as mutable sampler state.
#[derive(Debug, Clone)]
pub struct Evidence<'a> {
    base: &'a Database,
    overrides: HashMap<GroundAtom, Value>,
    touched: Vec<bool>,
    added: Vec<Vec<Vec<ConstId>>>,
}

impl<'a> Evidence<'a> {
    pub fn new(base: &'a Database) -> Self {
        let n = base.schema().functors().len();
        Evidence {
            base,
            overrides: HashMap::new(),
            touched: vec![false; n],
            added: vec![Vec::new(); n],
        }
    }

    pub fn base(&self) -> &'a Database {
        self.base
    }

    pub fn set(&mut self, atom: &GroundAtom, value: Value) {
        let f = atom.functor;
        self.touched[f] = true;
        let info = self.base.schema().functor(f);
        if info.is_relationship() {
            let want = value == info.true_value();
            let in_base = self.base.rel_holds(f, &atom.args);
            let pos = self.added[f].iter().position(|t| *t == atom.args);
            match (want && !in_base, pos) {
                (true, None) => self.added[f].push(atom.args.clone()),
                (false, Some(i)) => {
                    self.added[f].swap_remove(i);
                }
                _ => {}
            }
        }
        self.overrides.insert(atom.clone(), value);
    }

    /// Returns a copy of this evidence with one more atom overridden.
    pub fn with(&self, atom: &GroundAtom, value: Value) -> Evidence<'a> {
        let mut e = self.clone();
        e.set(atom, value);
        e
    }

    fn lookup(&self, f: FunctorId, args: &[ConstId]) -> Option<Value> {
        if !self.touched[f] {
            return None;
        }
        self.overrides
            .get(&GroundAtom::new(f, args.to_vec()))
            .copied()
    }
}

impl AtomSource for Evidence<'_> {
    fn schema(&self) -> &Schema {
        self.base.schema()
    }

    fn attr_value(&self, f: FunctorId, args: &[ConstId]) -> Value {
        self.lookup(f, args)
            .unwrap_or_else(|| self.base.attr_value(f, args))
    }

    fn rel_holds(&self, f: FunctorId, args: &[ConstId]) -> bool {
        match self.lookup(f, args) {
            Some(v) => v == self.base.schema().functor(f).true_value(),
            None => self.base.rel_holds(f, args),
        }
    }

    fn scan_rel(&self, f: FunctorId, pattern: &[Option<ConstId>], cb: &mut dyn FnMut(&[ConstId])) {
        if !self.touched[f] {
            return self.base.scan_rel(f, pattern, cb);
        }
        let t_val = self.base.schema().functor(f).true_value();
        self.base.scan_rel(f, pattern, &mut |t| {
            if self.lookup(f, t).is_none_or(|v| v == t_val) {
                cb(t)
            }
        });
        for t in &self.added[f] {
            if pattern
                .iter()
                .zip(t)
                .all(|(p, &c)| p.is_none_or(|v| v == c))
            {
                cb(t);
            }
        }
    }

    fn rel_size_hint(&self, f: FunctorId) -> usize {
        self.base.rel_size_hint(f) + self.added[f].len()
    }
}

/// Any atom source with a single atom pinned to a value.
pub struct Pinned<'a, S: ?Sized> {
    base: &'a S,
    atom: &'a GroundAtom,
    value: Value,
}

impl<'a, S: AtomSource + ?Sized> Pinned<'a, S> {
    pub fn new(base: &'a S, atom: &'a GroundAtom, value: Value) -> Self {
        Pinned { base, atom, value }
    }

    fn is_atom(&self, f: FunctorId, args: &[ConstId]) -> bool {
        f == self.atom.functor && args == self.atom.args.as_slice()
    }
}

impl<S: AtomSource + ?Sized> AtomSource for Pinned<'_, S> {
    fn schema(&self) -> &Schema {
        self.base.schema()
    }

    fn attr_value(&self, f: FunctorId, args: &[ConstId]) -> Value {
        if self.is_atom(f, args) {
            self.value
        } else {
            self.base.attr_value(f, args)
        }
    }

    fn rel_holds(&self, f: FunctorId, args: &[ConstId]) -> bool {
        if self.is_atom(f, args) {
            self.value == self.schema().functor(f).true_value()
        } else {
            self.base.rel_holds(f, args)
        }
    }

    fn scan_rel(&self, f: FunctorId, pattern: &[Option<ConstId>], cb: &mut dyn FnMut(&[ConstId])) {
        if f != self.atom.functor {
            return self.base.scan_rel(f, pattern, cb);
        }
        let pinned_true = self.value == self.schema().functor(f).true_value();
        let mut seen = false;
        self.base.scan_rel(f, pattern, &mut |t| {
            if t == self.atom.args.as_slice() {
                seen = true;
                if pinned_true {
                    cb(t);
                }
            } else {
                cb(t);
            }
        });
        let matches = pattern
            .iter()
            .zip(&self.atom.args)
            .all(|(p, &c)| p.is_none_or(|v| v == c));
        if pinned_true && matches && !seen {
            cb(&self.atom.args);
        }
    }

    fn rel_size_hint(&self, f: FunctorId) -> usize {
        self.base.rel_size_hint(f) + usize::from(f == self.atom.functor)
    }
}
