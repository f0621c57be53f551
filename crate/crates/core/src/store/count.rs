//! Grounding counts over a conjunction of functor slots.
//!
//! Relationship literals are handled by inclusion-exclusion: a count where
//! some relationships are required false is an alternating sum of counts in
//! which subsets of them are required true. Counts with only positive
//! relationship literals are computed by a join that is driven by the
//! relationship indexes and factored into connected components of the
//! variable graph, so independent variables are never enumerated jointly.

use crate::store::database::AtomSource;
use crate::store::schema::{ConstId, FunctorId, PopId, Value};

const UNBOUND: ConstId = ConstId::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Arg {
    Var(usize),
    Const(ConstId),
}

#[derive(Debug, Clone)]
pub(crate) struct Slot {
    pub functor: FunctorId,
    pub args: Vec<Arg>,
}

/// A list of functor slots over a shared set of typed variables.
#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    pub var_pops: Vec<PopId>,
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Filter {
    /// Grouped: the slot's value becomes a table dimension.
    Free,
    /// The slot must take this value.
    Is(Value),
}

/// Dense grounding counts over the values of the free slots, row-major in
/// slot order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CountTable {
    pub free: Vec<usize>,
    pub dims: Vec<usize>,
    pub counts: Vec<u64>,
}

impl CountTable {
    pub fn index(&self, values: &[Value]) -> usize {
        values
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&v, &d)| acc * d + v as usize)
    }

    pub fn get(&self, values: &[Value]) -> u64 {
        self.counts[self.index(values)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub(crate) fn count_table<S: AtomSource + ?Sized>(
    src: &S,
    pat: &Pattern,
    filters: &[Filter],
    bound: &[Option<ConstId>],
) -> CountTable {
    let schema = src.schema();
    let free: Vec<usize> = (0..pat.slots.len())
        .filter(|&i| filters[i] == Filter::Free)
        .collect();
    let dims: Vec<usize> = free
        .iter()
        .map(|&i| schema.functor(pat.slots[i].functor).range_len())
        .collect();
    let size: usize = dims.iter().product();

    let is_rel = |i: usize| schema.functor(pat.slots[i].functor).is_relationship();
    let true_of = |i: usize| schema.functor(pat.slots[i].functor).true_value();

    let mut always_true = Vec::new();
    let mut varying = Vec::new();
    for i in 0..pat.slots.len() {
        if !is_rel(i) {
            continue;
        }
        match filters[i] {
            Filter::Is(v) if v == true_of(i) => always_true.push(i),
            _ => varying.push(i),
        }
    }

    // Attribute slots: fixed ones filter, free ones contribute to the key.
    let mut mult = vec![0usize; pat.slots.len()];
    {
        let mut m = 1usize;
        for (k, &i) in free.iter().enumerate().rev() {
            mult[i] = m;
            m *= dims[k];
        }
    }
    let mut attr_lits = Vec::new();
    for i in 0..pat.slots.len() {
        if is_rel(i) {
            continue;
        }
        attr_lits.push(match filters[i] {
            Filter::Is(v) => Lit::AttrIs(i, v),
            Filter::Free => Lit::AttrKey(i, mult[i]),
        });
    }

    let k = varying.len();
    let mut positive = Vec::with_capacity(1 << k);
    for mask in 0..(1usize << k) {
        let mut lits = attr_lits.clone();
        lits.extend(always_true.iter().map(|&i| Lit::Rel(i)));
        lits.extend(
            (0..k)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| Lit::Rel(varying[b])),
        );
        positive.push(join_count(src, pat, &lits, bound, size));
    }

    // Free relationship slots span their true/false values in the key; the
    // attribute-only offsets in `positive` do not include them.
    let free_rel_bits: Vec<usize> = (0..k)
        .filter(|&b| filters[varying[b]] == Filter::Free)
        .collect();
    let mut counts = vec![0u64; size];
    for assign in 0..(1usize << free_rel_bits.len()) {
        let mut required = 0usize;
        let mut rel_offset = 0usize;
        for (j, &b) in free_rel_bits.iter().enumerate() {
            let slot = varying[b];
            let truth = assign >> j & 1 == 1;
            if truth {
                required |= 1 << b;
            }
            let v = if truth {
                true_of(slot)
            } else {
                schema.functor(pat.slots[slot].functor).false_value()
            };
            rel_offset += v as usize * mult[slot];
        }
        let mut acc = vec![0i128; size];
        for s in 0..(1usize << k) {
            if s & required != required {
                continue;
            }
            let sign = if (s ^ required).count_ones() % 2 == 0 { 1 } else { -1 };
            for (a, &c) in acc.iter_mut().zip(&positive[s]) {
                *a += sign * c as i128;
            }
        }
        for (off, &a) in acc.iter().enumerate() {
            if a != 0 {
                debug_assert!(a > 0, "inclusion-exclusion produced a negative count");
                counts[off + rel_offset] += a as u64;
            }
        }
    }
    CountTable { free, dims, counts }
}

#[derive(Debug, Clone, Copy)]
enum Lit {
    /// Relationship slot must hold.
    Rel(usize),
    AttrIs(usize, Value),
    /// Attribute value adds `value * mult` to the key.
    AttrKey(usize, usize),
}

impl Lit {
    fn slot(&self) -> usize {
        match *self {
            Lit::Rel(s) | Lit::AttrIs(s, _) | Lit::AttrKey(s, _) => s,
        }
    }
}

fn resolve(args: &[Arg], b: &[ConstId], buf: &mut Vec<ConstId>) {
    buf.clear();
    buf.extend(args.iter().map(|a| match *a {
        Arg::Const(c) => c,
        Arg::Var(v) => b[v],
    }));
}

/// Evaluates a fully bound literal, returning the key contribution or `None`
/// when it fails.
fn eval_lit<S: AtomSource + ?Sized>(
    src: &S,
    pat: &Pattern,
    lit: Lit,
    b: &[ConstId],
    buf: &mut Vec<ConstId>,
) -> Option<usize> {
    let slot = &pat.slots[lit.slot()];
    resolve(&slot.args, b, buf);
    match lit {
        Lit::Rel(_) => src.rel_holds(slot.functor, buf).then_some(0),
        Lit::AttrIs(_, v) => (src.attr_value(slot.functor, buf) == v).then_some(0),
        Lit::AttrKey(_, m) => Some(src.attr_value(slot.functor, buf) as usize * m),
    }
}

/// Counts groundings satisfying every literal, bucketed by key.
fn join_count<S: AtomSource + ?Sized>(
    src: &S,
    pat: &Pattern,
    lits: &[Lit],
    bound: &[Option<ConstId>],
    size: usize,
) -> Vec<u64> {
    let mut out = vec![0u64; size];
    let nvars = pat.var_pops.len();
    let mut b: Vec<ConstId> = (0..nvars).map(|v| bound[v].unwrap_or(UNBOUND)).collect();
    let is_bound = |b: &[ConstId], lit: &Lit| {
        pat.slots[lit.slot()]
            .args
            .iter()
            .all(|a| matches!(a, Arg::Const(_)) || matches!(a, Arg::Var(v) if b[*v] != UNBOUND))
    };

    let mut buf = Vec::new();
    let mut base = 0usize;
    let mut pending = Vec::new();
    for lit in lits {
        if is_bound(&b, lit) {
            match eval_lit(src, pat, *lit, &b, &mut buf) {
                Some(k) => base += k,
                None => return out,
            }
        } else {
            pending.push(*lit);
        }
    }

    // Union-find over unbound variables.
    let mut parent: Vec<usize> = (0..nvars).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    let mut in_lit = vec![false; nvars];
    for lit in &pending {
        let vars: Vec<usize> = pat.slots[lit.slot()]
            .args
            .iter()
            .filter_map(|a| match *a {
                Arg::Var(v) if b[v] == UNBOUND => Some(v),
                _ => None,
            })
            .collect();
        for &v in &vars {
            in_lit[v] = true;
        }
        for w in vars.windows(2) {
            let (x, y) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[x] = y;
        }
    }

    let mut factor: u64 = 1;
    for v in 0..nvars {
        if b[v] == UNBOUND && !in_lit[v] {
            factor *= src.schema().population(pat.var_pops[v]).len() as u64;
        }
    }
    if factor == 0 {
        return out;
    }

    let mut roots: Vec<usize> = (0..nvars)
        .filter(|&v| b[v] == UNBOUND && in_lit[v])
        .map(|v| find(&mut parent, v))
        .collect();
    roots.sort_unstable();
    roots.dedup();

    // Partial results: (key offset, count) pairs, combined across components
    // by cartesian product.
    let mut partial: Vec<(usize, u64)> = vec![(base, factor)];
    for root in roots {
        let comp_vars: Vec<usize> = (0..nvars)
            .filter(|&v| b[v] == UNBOUND && in_lit[v] && find(&mut parent, v) == root)
            .collect();
        let comp_lits: Vec<Lit> = pending
            .iter()
            .copied()
            .filter(|lit| {
                pat.slots[lit.slot()].args.iter().any(|a| {
                    matches!(a, Arg::Var(v) if comp_vars.contains(v))
                })
            })
            .collect();
        let hist = component_histogram(src, pat, &comp_lits, &comp_vars, &mut b);
        if hist.is_empty() {
            return out;
        }
        let mut next = Vec::with_capacity(partial.len() * hist.len());
        for &(o1, c1) in &partial {
            for &(o2, c2) in &hist {
                next.push((o1 + o2, c1 * c2));
            }
        }
        partial = next;
    }
    for (off, c) in partial {
        out[off] += c;
    }
    out
}

enum StepKind {
    Scan {
        slot: usize,
        /// (argument position, variable) pairs bound by this scan.
        binds: Vec<(usize, usize)>,
        /// Positions that must equal an earlier position of the same tuple.
        same: Vec<(usize, usize)>,
    },
    Var(usize),
}

struct Step {
    kind: StepKind,
    checks: Vec<Lit>,
}

struct Plan<'p, S: ?Sized> {
    src: &'p S,
    pat: &'p Pattern,
    steps: Vec<Step>,
}

fn component_histogram<S: AtomSource + ?Sized>(
    src: &S,
    pat: &Pattern,
    lits: &[Lit],
    vars: &[usize],
    b: &mut [ConstId],
) -> Vec<(usize, u64)> {
    let mut is_bound: Vec<bool> = b.iter().map(|&c| c != UNBOUND).collect();
    let mut done = vec![false; lits.len()];
    let mut steps = Vec::new();
    let slot_bound = |is_bound: &[bool], slot: usize| {
        pat.slots[slot].args.iter().all(|a| match *a {
            Arg::Const(_) => true,
            Arg::Var(v) => is_bound[v],
        })
    };
    while vars.iter().any(|&v| !is_bound[v]) {
        // Prefer scanning the relationship with the most bound positions.
        let mut best: Option<(usize, usize, usize)> = None;
        for (li, lit) in lits.iter().enumerate() {
            if done[li] || !matches!(lit, Lit::Rel(_)) || slot_bound(&is_bound, lit.slot()) {
                continue;
            }
            let slot = &pat.slots[lit.slot()];
            let nb = slot
                .args
                .iter()
                .filter(|a| match **a {
                    Arg::Const(_) => true,
                    Arg::Var(v) => is_bound[v],
                })
                .count();
            let size = src.rel_size_hint(slot.functor);
            let better = match best {
                None => true,
                Some((_, bnb, bsize)) => nb > bnb || (nb == bnb && size < bsize),
            };
            if better {
                best = Some((li, nb, size));
            }
        }
        let kind = if let Some((li, _, _)) = best {
            done[li] = true;
            let slot_ix = lits[li].slot();
            let mut binds = Vec::new();
            let mut same = Vec::new();
            let mut first_pos: Vec<(usize, usize)> = Vec::new();
            for (pos, a) in pat.slots[slot_ix].args.iter().enumerate() {
                if let Arg::Var(v) = *a {
                    if is_bound[v] {
                        continue;
                    }
                    if let Some(&(p0, _)) = first_pos.iter().find(|(_, w)| *w == v) {
                        same.push((pos, p0));
                    } else {
                        first_pos.push((pos, v));
                        binds.push((pos, v));
                    }
                }
            }
            for &(_, v) in &binds {
                is_bound[v] = true;
            }
            StepKind::Scan {
                slot: slot_ix,
                binds,
                same,
            }
        } else {
            let v = *vars
                .iter()
                .filter(|&&v| !is_bound[v])
                .min_by_key(|&&v| (src.schema().population(pat.var_pops[v]).len(), v))
                .unwrap();
            is_bound[v] = true;
            StepKind::Var(v)
        };
        let mut checks = Vec::new();
        for (li, lit) in lits.iter().enumerate() {
            if !done[li] && slot_bound(&is_bound, lit.slot()) {
                done[li] = true;
                checks.push(*lit);
            }
        }
        steps.push(Step { kind, checks });
    }
    // Any scan literal is satisfied by construction; remaining key literals
    // must have been scheduled as checks.
    debug_assert!(done.iter().all(|&d| d));

    let plan = Plan { src, pat, steps };
    let mut hist: std::collections::HashMap<usize, u64> = std::collections::HashMap::new();
    let mut buf = Vec::new();
    plan.run(0, b, 0, &mut hist, &mut buf);
    for &v in vars {
        b[v] = UNBOUND;
    }
    let mut out: Vec<(usize, u64)> = hist.into_iter().filter(|&(_, c)| c > 0).collect();
    out.sort_unstable();
    out
}

impl<S: AtomSource + ?Sized> Plan<'_, S> {
    fn run(
        &self,
        step: usize,
        b: &mut [ConstId],
        key: usize,
        hist: &mut std::collections::HashMap<usize, u64>,
        buf: &mut Vec<ConstId>,
    ) {
        if step == self.steps.len() {
            *hist.entry(key).or_insert(0) += 1;
            return;
        }
        let st = &self.steps[step];
        match &st.kind {
            StepKind::Var(v) => {
                let n = self.src.schema().population(self.pat.var_pops[*v]).len();
                for c in 0..n as ConstId {
                    b[*v] = c;
                    if let Some(k) = self.checks(st, b, buf) {
                        self.run(step + 1, b, key + k, hist, buf);
                    }
                }
            }
            StepKind::Scan { slot, binds, same } => {
                let s = &self.pat.slots[*slot];
                let pattern: Vec<Option<ConstId>> = s
                    .args
                    .iter()
                    .map(|a| match *a {
                        Arg::Const(c) => Some(c),
                        Arg::Var(v) if b[v] != UNBOUND => Some(b[v]),
                        Arg::Var(_) => None,
                    })
                    .collect();
                // Scratch buffer for checks inside the callback.
                let mut inner = Vec::new();
                self.src.scan_rel(s.functor, &pattern, &mut |t| {
                    if same.iter().any(|&(p, q)| t[p] != t[q]) {
                        return;
                    }
                    for &(pos, v) in binds {
                        b[v] = t[pos];
                    }
                    if let Some(k) = self.checks(st, b, &mut inner) {
                        self.run(step + 1, b, key + k, hist, &mut inner);
                    }
                });
                for &(_, v) in binds {
                    b[v] = UNBOUND;
                }
            }
        }
        if let StepKind::Var(v) = st.kind {
            b[v] = UNBOUND;
        }
    }

    fn checks(&self, st: &Step, b: &[ConstId], buf: &mut Vec<ConstId>) -> Option<usize> {
        let mut k = 0;
        for lit in &st.checks {
            k += eval_lit(self.src, self.pat, *lit, b, buf)?;
        }
        Some(k)
    }
}

/// Enumerates groundings of the unbound variables in lexicographic order of
/// their constants, calling `cb` with the full binding vector for each one
/// under which every slot takes its filter value.
pub(crate) fn enumerate<S: AtomSource + ?Sized>(
    src: &S,
    pat: &Pattern,
    values: &[Value],
    bound: &[Option<ConstId>],
    cb: &mut dyn FnMut(&[ConstId]),
) {
    let nvars = pat.var_pops.len();
    let free: Vec<usize> = (0..nvars).filter(|&v| bound[v].is_none()).collect();
    // A slot is checked right after the last of its free variables is bound.
    let mut check_at: Vec<Vec<usize>> = vec![Vec::new(); free.len() + 1];
    for (si, slot) in pat.slots.iter().enumerate() {
        let last = slot
            .args
            .iter()
            .filter_map(|a| match *a {
                Arg::Var(v) => free.iter().position(|&w| w == v).map(|p| p + 1),
                Arg::Const(_) => None,
            })
            .max()
            .unwrap_or(0);
        check_at[last].push(si);
    }
    let mut b: Vec<ConstId> = (0..nvars).map(|v| bound[v].unwrap_or(UNBOUND)).collect();
    let mut buf = Vec::new();
    let ok = |b: &[ConstId], depth: usize, buf: &mut Vec<ConstId>| {
        check_at[depth].iter().all(|&si| {
            let slot = &pat.slots[si];
            resolve(&slot.args, b, buf);
            src.value(slot.functor, buf) == values[si]
        })
    };
    if !ok(&b, 0, &mut buf) {
        return;
    }
    fn rec<S: AtomSource + ?Sized>(
        src: &S,
        pat: &Pattern,
        free: &[usize],
        depth: usize,
        b: &mut Vec<ConstId>,
        buf: &mut Vec<ConstId>,
        ok: &dyn Fn(&[ConstId], usize, &mut Vec<ConstId>) -> bool,
        cb: &mut dyn FnMut(&[ConstId]),
    ) {
        if depth == free.len() {
            cb(b);
            return;
        }
        let v = free[depth];
        let n = src.schema().population(pat.var_pops[v]).len();
        for c in 0..n as ConstId {
            b[v] = c;
            if ok(b, depth + 1, buf) {
                rec(src, pat, free, depth + 1, b, buf, ok, cb);
            }
        }
        b[v] = UNBOUND;
    }
    rec(src, pat, &free, 0, &mut b, &mut buf, &ok, cb);
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::store::database::{Database, DatabaseBuilder};
    use crate::store::schema::{FunctorDecl, Population, Schema};

    /// persons a..e; g(p) in {W, M}; F(p, p).
    fn db() -> Database {
        let s = Arc::new(
            Schema::new(
                vec![Population::new("p", ["a", "b", "c", "d", "e"]).unwrap()],
                vec![
                    FunctorDecl::attribute("g", &["p"], &["W", "M"]),
                    FunctorDecl::relationship("F", &["p", "p"]),
                ],
            )
            .unwrap(),
        );
        let mut b = DatabaseBuilder::new(s).unwrap();
        for (c, v) in [("a", "W"), ("b", "M"), ("c", "W"), ("d", "M"), ("e", "M")] {
            b.set("g", &[c], v).unwrap();
        }
        for (x, y) in [("a", "b"), ("a", "c"), ("b", "a"), ("c", "c"), ("d", "a"), ("e", "a")] {
            b.set("F", &[x, y], "T").unwrap();
        }
        b.finish().unwrap()
    }

    /// g(A), g(B), F(A, B)
    fn family() -> Pattern {
        Pattern {
            var_pops: vec![0, 0],
            slots: vec![
                Slot { functor: 0, args: vec![Arg::Var(0)] },
                Slot { functor: 0, args: vec![Arg::Var(1)] },
                Slot { functor: 1, args: vec![Arg::Var(0), Arg::Var(1)] },
            ],
        }
    }

    fn brute(d: &Database, pat: &Pattern, filters: &[Filter], bound: &[Option<ConstId>]) -> CountTable {
        let mut t = CountTable {
            free: vec![],
            dims: vec![],
            counts: vec![],
        };
        t.free = (0..pat.slots.len()).filter(|&i| filters[i] == Filter::Free).collect();
        t.dims = t.free.iter().map(|&i| d.schema().functor(pat.slots[i].functor).range_len()).collect();
        t.counts = vec![0; t.dims.iter().product()];
        let dims: Vec<usize> = pat.var_pops.iter().map(|&p| d.schema().population(p).len()).collect();
        crate::store::database::for_each_tuple(&dims, |g| {
            if bound.iter().zip(g).any(|(b, &c)| b.is_some_and(|b| b != c)) {
                return;
            }
            let mut key = Vec::new();
            for (i, s) in pat.slots.iter().enumerate() {
                let args: Vec<ConstId> = s.args.iter().map(|a| match *a {
                    Arg::Var(v) => g[v],
                    Arg::Const(c) => c,
                }).collect();
                let v = d.value(s.functor, &args);
                match filters[i] {
                    Filter::Is(w) if w != v => return,
                    Filter::Is(_) => {}
                    Filter::Free => key.push(v),
                }
            }
            let ix = t.index(&key);
            t.counts[ix] += 1;
        });
        t
    }

    #[test]
    fn free_family_table_matches_brute_force() {
        let d = db();
        let pat = family();
        let filters = [Filter::Free; 3];
        let none = [None, None];
        assert_eq!(count_table(&d, &pat, &filters, &none), brute(&d, &pat, &filters, &none));
        assert_eq!(count_table(&d, &pat, &filters, &none).total(), 25);
    }

    #[test]
    fn negative_literal_by_inclusion_exclusion() {
        let d = db();
        let pat = family();
        let filters = [Filter::Is(0), Filter::Free, Filter::Is(1)];
        for bound in [[None, None], [Some(0), None], [None, Some(0)]] {
            assert_eq!(count_table(&d, &pat, &filters, &bound), brute(&d, &pat, &filters, &bound));
        }
    }

    #[test]
    fn constants_and_self_links() {
        let d = db();
        let pat = Pattern {
            var_pops: vec![0],
            slots: vec![Slot { functor: 1, args: vec![Arg::Var(0), Arg::Var(0)] }],
        };
        let t = count_table(&d, &pat, &[Filter::Is(0)], &[None]);
        assert_eq!(t.total(), 1);
        let pat = Pattern {
            var_pops: vec![0],
            slots: vec![Slot { functor: 1, args: vec![Arg::Var(0), Arg::Const(0)] }],
        };
        assert_eq!(count_table(&d, &pat, &[Filter::Is(0)], &[None]).total(), 3);
        assert_eq!(count_table(&d, &pat, &[Filter::Is(1)], &[None]).total(), 2);
    }

    #[test]
    fn zero_free_variables_counts_one() {
        let d = db();
        let pat = family();
        let t = count_table(&d, &pat, &[Filter::Is(0), Filter::Is(1), Filter::Is(0)], &[Some(0), Some(1)]);
        assert_eq!(t.total(), 1);
    }

    #[test]
    fn enumeration_agrees_with_counts() {
        let d = db();
        let pat = family();
        for values in [[0u16, 1, 0], [1, 0, 1], [0, 0, 0]] {
            let filters: Vec<Filter> = values.iter().map(|&v| Filter::Is(v)).collect();
            let mut seen = Vec::new();
            enumerate(&d, &pat, &values, &[None, None], &mut |g| seen.push(g.to_vec()));
            let mut sorted = seen.clone();
            sorted.sort();
            assert_eq!(seen, sorted, "lexicographic order");
            assert_eq!(seen.len() as u64, count_table(&d, &pat, &filters, &[None, None]).total());
        }
    }
}
