//! Built-in familial monad instances: `id`, `list`, `fc` (free category),
//! `fmc` (free monoidal category), `fdc` (free double category), plus a
//! mutation wrapper used by the law checkers' sensitivity tests.
//!
//! Arities carry canonical payload-position cell labels:
//! * paths: vertices `0..=n` then edges `0..n`, edge `k` runs `k → k+1`;
//! * disjoint path unions: concatenated per path, vertex offset
//!   `voff(i) = Σ_{j<i}(m_j + 1)`, edge offset `eoff(i) = Σ_{j<i} m_j`;
//! * grids: external products of two paths, cell `(x, y)` at index
//!   `x * card_y + y`.

use std::sync::Arc;

use crate::error::EngineError;
use crate::fincat::{Cell, FinCat, Mor, Obj, Presheaf, PresheafMap, ProductCat};
use crate::monad::{FamilialMonad, MonadInstance, OpAssignment, OpPayload, OpTerm};

/// Walking path of length `n` over the graph shape.
pub fn path_presheaf(g1: &Arc<FinCat>, n: usize) -> Arc<Presheaf> {
    let s = g1.morphism_by_name("s").unwrap();
    let t = g1.morphism_by_name("t").unwrap();
    let mut action = vec![Vec::new(); g1.morphism_count()];
    action[g1.identity(Obj(0)).0] = (0..=n).collect();
    action[g1.identity(Obj(1)).0] = (0..n).collect();
    action[s.0] = (0..n).collect();
    action[t.0] = (1..=n).collect();
    Arc::new(Presheaf::new(g1.clone(), vec![n + 1, n], action).unwrap())
}

/// Edgeless graph on `n` vertices.
pub fn discrete_graph(g1: &Arc<FinCat>, n: usize) -> Arc<Presheaf> {
    let mut action = vec![Vec::new(); g1.morphism_count()];
    action[g1.identity(Obj(0)).0] = (0..n).collect();
    Arc::new(Presheaf::new(g1.clone(), vec![n, 0], action).unwrap())
}

/// Set of `n` elements as a presheaf over the terminal category.
pub fn finite_set(term: &Arc<FinCat>, n: usize) -> Arc<Presheaf> {
    Arc::new(Presheaf::new(term.clone(), vec![n], vec![(0..n).collect()]).unwrap())
}

/// Disjoint union of walking paths with the canonical offset indexing.
pub fn disjoint_paths(g1: &Arc<FinCat>, lengths: &[usize]) -> Arc<Presheaf> {
    let s = g1.morphism_by_name("s").unwrap();
    let t = g1.morphism_by_name("t").unwrap();
    let nv: usize = lengths.iter().map(|m| m + 1).sum();
    let ne: usize = lengths.iter().sum();
    let mut src = Vec::with_capacity(ne);
    let mut tgt = Vec::with_capacity(ne);
    let mut voff = 0usize;
    for &m in lengths {
        for k in 0..m {
            src.push(voff + k);
            tgt.push(voff + k + 1);
        }
        voff += m + 1;
    }
    let mut action = vec![Vec::new(); g1.morphism_count()];
    action[g1.identity(Obj(0)).0] = (0..nv).collect();
    action[g1.identity(Obj(1)).0] = (0..ne).collect();
    action[s.0] = src;
    action[t.0] = tgt;
    Arc::new(Presheaf::new(g1.clone(), vec![nv, ne], action).unwrap())
}

fn voff(lengths: &[usize], i: usize) -> usize {
    lengths[..i].iter().map(|m| m + 1).sum()
}

fn eoff(lengths: &[usize], i: usize) -> usize {
    lengths[..i].iter().sum()
}

/// External product of presheaves along a product category: cells at
/// `(a, b)` are pairs indexed `x * card_q + y`.
pub fn external_product(prod: &ProductCat, p: &Presheaf, q: &Presheaf) -> Arc<Presheaf> {
    let cat = &prod.cat;
    let mut cells = vec![0usize; cat.object_count()];
    for o in cat.objects() {
        let (a, b) = prod.obj_parts(o);
        cells[o.0] = p.card(a) * q.card(b);
    }
    let mut action = Vec::with_capacity(cat.morphism_count());
    for m in cat.morphisms() {
        let (fa, fb) = prod.mor_parts(m);
        let c = cat.cod(m);
        let (ca, cb) = prod.obj_parts(c);
        let (da, db) = prod.obj_parts(cat.dom(m));
        let _ = (da, db);
        let qc = q.card(cb);
        let qd = q.card(prod.obj_parts(cat.dom(m)).1);
        let mut tbl = Vec::with_capacity(p.card(ca) * qc);
        for x in 0..p.card(ca) {
            for y in 0..qc {
                tbl.push(p.act(fa, x) * qd + q.act(fb, y));
            }
        }
        action.push(tbl);
    }
    Arc::new(Presheaf::new(cat.clone(), cells, action).unwrap())
}

/// External product of maps, matching [`external_product`] indexing.
pub fn external_product_map(
    prod: &ProductCat,
    src: &Arc<Presheaf>,
    dst: &Arc<Presheaf>,
    pf: &[Vec<usize>],
    qf: &[Vec<usize>],
    p_src_card: impl Fn(Obj) -> usize,
    q_src_card: impl Fn(Obj) -> usize,
    q_dst_card: impl Fn(Obj) -> usize,
) -> PresheafMap {
    let cat = &prod.cat;
    let mut components = Vec::with_capacity(cat.object_count());
    for o in cat.objects() {
        let (a, b) = prod.obj_parts(o);
        let (pa, qa) = (p_src_card(a), q_src_card(b));
        let mut col = Vec::with_capacity(pa * qa);
        for x in 0..pa {
            for y in 0..qa {
                col.push(pf[a.0][x] * q_dst_card(b) + qf[b.0][y]);
            }
        }
        components.push(col);
    }
    PresheafMap::new_unchecked(src.clone(), dst.clone(), components)
}

/// Vertex/edge tables for embedding `path(sub)` into `path(total)` at a
/// vertex offset.
fn path_offset_tables(sub: usize, off: usize) -> (Vec<usize>, Vec<usize>) {
    (
        (0..=sub).map(|u| off + u).collect(),
        (0..sub).map(|u| off + u).collect(),
    )
}

// ---------------------------------------------------------------------------
// id

struct IdMonad {
    name: Arc<str>,
    base: Arc<FinCat>,
}

impl MonadInstance for IdMonad {
    fn name(&self) -> &Arc<str> {
        &self.name
    }
    fn base(&self) -> &Arc<FinCat> {
        &self.base
    }
    fn ops_at(&self, _c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        Ok(if bound >= 1 {
            vec![OpTerm::new(&self.name, Obj(0), OpPayload::Point, 1)]
        } else {
            vec![]
        })
    }
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        match t.payload {
            OpPayload::Point if t.shape == 0 && t.size == 1 => Ok(()),
            _ => Err(EngineError::input(format!("malformed id term {t}"))),
        }
    }
    fn act(&self, _m: Mor, t: &OpTerm) -> OpTerm {
        t.clone()
    }
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        self.validate_term(t)?;
        Ok(finite_set(&self.base, 1))
    }
    fn arity_face(&self, _m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        let a = self.arity(t)?;
        Ok(PresheafMap::identity(&a))
    }
    fn eta(&self, _c: Obj) -> OpTerm {
        OpTerm::new(&self.name, Obj(0), OpPayload::Point, 1)
    }
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        Ok(f.base().clone())
    }
    fn embed(
        &self,
        _f: &OpAssignment,
        _x: Cell,
        _mu: &OpTerm,
    ) -> Result<Vec<Vec<usize>>, EngineError> {
        Ok(vec![vec![0]])
    }
}

// ---------------------------------------------------------------------------
// list

struct ListMonad {
    name: Arc<str>,
    base: Arc<FinCat>,
}

impl ListMonad {
    fn nat(&self, n: usize) -> OpTerm {
        OpTerm::new(&self.name, Obj(0), OpPayload::Nat { n }, n)
    }
}

impl MonadInstance for ListMonad {
    fn name(&self) -> &Arc<str> {
        &self.name
    }
    fn base(&self) -> &Arc<FinCat> {
        &self.base
    }
    fn ops_at(&self, _c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        Ok((0..=bound).map(|n| self.nat(n)).collect())
    }
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        match t.payload {
            OpPayload::Nat { n } if t.shape == 0 && t.size == n => Ok(()),
            _ => Err(EngineError::input(format!("malformed list term {t}"))),
        }
    }
    fn act(&self, _m: Mor, t: &OpTerm) -> OpTerm {
        t.clone()
    }
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        self.validate_term(t)?;
        Ok(finite_set(&self.base, t.size))
    }
    fn arity_face(&self, _m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        let a = self.arity(t)?;
        Ok(PresheafMap::identity(&a))
    }
    fn eta(&self, _c: Obj) -> OpTerm {
        self.nat(1)
    }
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        let total = f.values()[0]
            .iter()
            .map(|v| match v.payload {
                OpPayload::Nat { n } => n,
                _ => 0,
            })
            .sum();
        Ok(self.nat(total))
    }
    fn embed(
        &self,
        f: &OpAssignment,
        x: Cell,
        mu: &OpTerm,
    ) -> Result<Vec<Vec<usize>>, EngineError> {
        let off: usize = f.values()[0][..x.1]
            .iter()
            .map(|v| v.size)
            .sum();
        let k = f.value(x).size;
        let _ = mu;
        Ok(vec![(0..k).map(|u| off + u).collect()])
    }
}

// ---------------------------------------------------------------------------
// fc

struct FcMonad {
    name: Arc<str>,
    base: Arc<FinCat>,
    s: Mor,
    t: Mor,
}

impl FcMonad {
    fn vertex_op(&self) -> OpTerm {
        OpTerm::new(&self.name, Obj(0), OpPayload::Point, 1)
    }
    fn edge_op(&self, n: usize) -> OpTerm {
        OpTerm::new(&self.name, Obj(1), OpPayload::Nat { n }, 2 * n + 1)
    }
}

impl MonadInstance for FcMonad {
    fn name(&self) -> &Arc<str> {
        &self.name
    }
    fn base(&self) -> &Arc<FinCat> {
        &self.base
    }
    fn ops_at(&self, c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        if c == Obj(0) {
            Ok(if bound >= 1 {
                vec![self.vertex_op()]
            } else {
                vec![]
            })
        } else {
            Ok((0..)
                .map(|n| self.edge_op(n))
                .take_while(|t| t.size <= bound)
                .collect())
        }
    }
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        match (&t.payload, t.shape) {
            (OpPayload::Point, 0) if t.size == 1 => Ok(()),
            (OpPayload::Nat { n }, 1) if t.size == 2 * n + 1 => Ok(()),
            _ => Err(EngineError::input(format!("malformed fc term {t}"))),
        }
    }
    fn act(&self, m: Mor, t: &OpTerm) -> OpTerm {
        if self.base.is_identity(m) {
            t.clone()
        } else {
            self.vertex_op()
        }
    }
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        self.validate_term(t)?;
        match t.payload {
            OpPayload::Point => Ok(discrete_graph(&self.base, 1)),
            OpPayload::Nat { n } => Ok(path_presheaf(&self.base, n)),
            _ => unreachable!(),
        }
    }
    fn arity_face(&self, m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        let target = self.arity(t)?;
        if self.base.is_identity(m) {
            return Ok(PresheafMap::identity(&target));
        }
        let OpPayload::Nat { n } = t.payload else {
            return Err(EngineError::input("vertex op has no non-identity faces"));
        };
        let src = self.arity(&self.vertex_op())?;
        let pos = if m == self.s {
            0
        } else {
            debug_assert_eq!(m, self.t);
            n
        };
        Ok(PresheafMap::new_unchecked(
            src,
            target,
            vec![vec![pos], vec![]],
        ))
    }
    fn eta(&self, c: Obj) -> OpTerm {
        if c == Obj(0) {
            self.vertex_op()
        } else {
            self.edge_op(1)
        }
    }
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        match f.base().payload {
            OpPayload::Point => Ok(self.vertex_op()),
            OpPayload::Nat { .. } => {
                let total = f.values()[1]
                    .iter()
                    .map(|v| match v.payload {
                        OpPayload::Nat { n } => n,
                        _ => 0,
                    })
                    .sum();
                Ok(self.edge_op(total))
            }
            _ => Err(EngineError::input("malformed fc term")),
        }
    }
    fn embed(
        &self,
        f: &OpAssignment,
        x: Cell,
        mu: &OpTerm,
    ) -> Result<Vec<Vec<usize>>, EngineError> {
        if f.base().payload == OpPayload::Point {
            return Ok(vec![vec![0], vec![]]);
        }
        let _ = mu;
        let lens: Vec<usize> = f.values()[1]
            .iter()
            .map(|v| match v.payload {
                OpPayload::Nat { n } => n,
                _ => 0,
            })
            .collect();
        match x.0 {
            Obj(1) => {
                let k = x.1;
                let off: usize = lens[..k].iter().sum();
                let (vs, es) = path_offset_tables(lens[k], off);
                Ok(vec![vs, es])
            }
            _ => {
                let j = x.1;
                let pos: usize = lens[..j].iter().sum();
                Ok(vec![vec![pos], vec![]])
            }
        }
    }
}

// ---------------------------------------------------------------------------
// fmc

struct FmcMonad {
    name: Arc<str>,
    base: Arc<FinCat>,
    s: Mor,
    t: Mor,
}

impl FmcMonad {
    fn obj_op(&self, n: usize) -> OpTerm {
        OpTerm::new(&self.name, Obj(0), OpPayload::Nat { n }, n)
    }
    fn arrow_op(&self, lengths: Vec<usize>) -> OpTerm {
        let size = lengths.len() + 2 * lengths.iter().sum::<usize>();
        OpTerm::new(&self.name, Obj(1), OpPayload::Paths { lengths }, size)
    }
}

/// Weak compositions of every total `<= max_total` into `parts` parts.
fn weak_compositions(parts: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = vec![0usize; parts];
    fn rec(cur: &mut Vec<usize>, i: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(cur, i + 1, left - v, out);
        }
    }
    rec(&mut cur, 0, max_total, &mut out);
    out
}

impl MonadInstance for FmcMonad {
    fn name(&self) -> &Arc<str> {
        &self.name
    }
    fn base(&self) -> &Arc<FinCat> {
        &self.base
    }
    fn ops_at(&self, c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        if c == Obj(0) {
            return Ok((0..=bound).map(|n| self.obj_op(n)).collect());
        }
        let mut out = Vec::new();
        for n in 0..=bound {
            if n > bound {
                break;
            }
            let budget = (bound - n) / 2;
            for lengths in weak_compositions(n, budget) {
                out.push(self.arrow_op(lengths));
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        match (&t.payload, t.shape) {
            (OpPayload::Nat { n }, 0) if t.size == *n => Ok(()),
            (OpPayload::Paths { lengths }, 1)
                if t.size == lengths.len() + 2 * lengths.iter().sum::<usize>() =>
            {
                Ok(())
            }
            _ => Err(EngineError::input(format!("malformed fmc term {t}"))),
        }
    }
    fn act(&self, m: Mor, t: &OpTerm) -> OpTerm {
        if self.base.is_identity(m) {
            return t.clone();
        }
        match &t.payload {
            OpPayload::Paths { lengths } => self.obj_op(lengths.len()),
            _ => t.clone(),
        }
    }
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        self.validate_term(t)?;
        match &t.payload {
            OpPayload::Nat { n } => Ok(discrete_graph(&self.base, *n)),
            OpPayload::Paths { lengths } => Ok(disjoint_paths(&self.base, lengths)),
            _ => unreachable!(),
        }
    }
    fn arity_face(&self, m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        let target = self.arity(t)?;
        if self.base.is_identity(m) {
            return Ok(PresheafMap::identity(&target));
        }
        let OpPayload::Paths { lengths } = &t.payload else {
            return Err(EngineError::input("object op has no non-identity faces"));
        };
        let src = self.arity(&self.obj_op(lengths.len()))?;
        let table: Vec<usize> = (0..lengths.len())
            .map(|i| {
                voff(lengths, i)
                    + if m == self.s {
                        0
                    } else {
                        debug_assert_eq!(m, self.t);
                        lengths[i]
                    }
            })
            .collect();
        Ok(PresheafMap::new_unchecked(
            src,
            target,
            vec![table, vec![]],
        ))
    }
    fn eta(&self, c: Obj) -> OpTerm {
        if c == Obj(0) {
            self.obj_op(1)
        } else {
            self.arrow_op(vec![1])
        }
    }
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        match &f.base().payload {
            OpPayload::Nat { .. } => {
                let total = f.values()[0]
                    .iter()
                    .map(|v| match v.payload {
                        OpPayload::Nat { n } => n,
                        _ => 0,
                    })
                    .sum();
                Ok(self.obj_op(total))
            }
            OpPayload::Paths { lengths } => {
                let mut out = Vec::new();
                for (i, &m_i) in lengths.iter().enumerate() {
                    let w_i = match f.values()[0][voff(lengths, i)].payload {
                        OpPayload::Nat { n } => n,
                        _ => return Err(EngineError::input("fmc vertex value must be an object op")),
                    };
                    for r in 0..w_i {
                        let mut len = 0usize;
                        for k in 0..m_i {
                            match &f.values()[1][eoff(lengths, i) + k].payload {
                                OpPayload::Paths { lengths: p } => len += p[r],
                                _ => {
                                    return Err(EngineError::input(
                                        "fmc edge value must be an arrow op",
                                    ))
                                }
                            }
                        }
                        out.push(len);
                    }
                }
                Ok(self.arrow_op(out))
            }
            _ => Err(EngineError::input("malformed fmc term")),
        }
    }
    fn embed(
        &self,
        f: &OpAssignment,
        x: Cell,
        mu: &OpTerm,
    ) -> Result<Vec<Vec<usize>>, EngineError> {
        match &f.base().payload {
            OpPayload::Nat { .. } => {
                let off: usize = f.values()[0][..x.1].iter().map(|v| v.size).sum();
                let k = f.value(x).size;
                Ok(vec![(0..k).map(|u| off + u).collect(), vec![]])
            }
            OpPayload::Paths { lengths } => {
                let OpPayload::Paths { lengths: out } = &mu.payload else {
                    return Err(EngineError::input("fmc mu term malformed"));
                };
                // Width of each source path and the value path lengths per
                // edge position.
                let widths: Vec<usize> = (0..lengths.len())
                    .map(|i| match f.values()[0][voff(lengths, i)].payload {
                        OpPayload::Nat { n } => n,
                        _ => 0,
                    })
                    .collect();
                // Global index of the composite path (i, r).
                let pglobal = |i: usize, r: usize| -> usize {
                    widths[..i].iter().sum::<usize>() + r
                };
                // Cumulative length contributed to composite path (i, r) by
                // edges before position k of source path i.
                let cumul = |i: usize, k: usize, r: usize| -> usize {
                    (0..k)
                        .map(|kk| match &f.values()[1][eoff(lengths, i) + kk].payload {
                            OpPayload::Paths { lengths: p } => p[r],
                            _ => 0,
                        })
                        .sum()
                };
                match x.0 {
                    Obj(0) => {
                        // A vertex at position j of source path i.
                        let (i, j) = locate_vertex(lengths, x.1);
                        let w = widths[i];
                        let tbl = (0..w)
                            .map(|r| voff(out, pglobal(i, r)) + cumul(i, j, r))
                            .collect();
                        Ok(vec![tbl, vec![]])
                    }
                    _ => {
                        // An edge at position k of source path i.
                        let (i, k) = locate_edge(lengths, x.1);
                        let OpPayload::Paths { lengths: p } = &f.value(x).payload else {
                            return Err(EngineError::input("fmc edge value must be an arrow op"));
                        };
                        let mut vs = Vec::new();
                        let mut es = Vec::new();
                        for (r, &pr) in p.iter().enumerate() {
                            let g = pglobal(i, r);
                            let c = cumul(i, k, r);
                            for u in 0..=pr {
                                vs.push(voff(out, g) + c + u);
                            }
                            for u in 0..pr {
                                es.push(eoff(out, g) + c + u);
                            }
                        }
                        Ok(vec![vs, es])
                    }
                }
            }
            _ => Err(EngineError::input("malformed fmc term")),
        }
    }
}

fn locate_vertex(lengths: &[usize], idx: usize) -> (usize, usize) {
    let mut rem = idx;
    for (i, &m) in lengths.iter().enumerate() {
        if rem <= m {
            return (i, rem);
        }
        rem -= m + 1;
    }
    panic!("vertex index out of range");
}

fn locate_edge(lengths: &[usize], idx: usize) -> (usize, usize) {
    let mut rem = idx;
    for (i, &m) in lengths.iter().enumerate() {
        if rem < m {
            return (i, rem);
        }
        rem -= m;
    }
    panic!("edge index out of range");
}

// ---------------------------------------------------------------------------
// fdc

struct FdcMonad {
    name: Arc<str>,
    prod: ProductCat,
    g1: Arc<FinCat>,
    /// Object ids in the product: vertex, horizontal edge, vertical edge,
    /// square.
    vv: Obj,
    hh: Obj,
    uu: Obj,
    qq: Obj,
}

impl FdcMonad {
    fn new(name: Arc<str>) -> FdcMonad {
        let g1 = FinCat::graph_shape();
        let prod = ProductCat::new(&g1, &g1);
        let vv = prod.pair_obj(Obj(0), Obj(0));
        let hh = prod.pair_obj(Obj(1), Obj(0));
        let uu = prod.pair_obj(Obj(0), Obj(1));
        let qq = prod.pair_obj(Obj(1), Obj(1));
        FdcMonad {
            name,
            prod,
            g1,
            vv,
            hh,
            uu,
            qq,
        }
    }

    fn vertex_op(&self) -> OpTerm {
        OpTerm::new(&self.name, self.vv, OpPayload::Point, 1)
    }
    fn hop(&self, n: usize) -> OpTerm {
        OpTerm::new(&self.name, self.hh, OpPayload::Nat { n }, 2 * n + 1)
    }
    fn vop(&self, m: usize) -> OpTerm {
        OpTerm::new(&self.name, self.uu, OpPayload::Nat { n: m }, 2 * m + 1)
    }
    fn sq(&self, h: usize, v: usize) -> OpTerm {
        OpTerm::new(
            &self.name,
            self.qq,
            OpPayload::Grid { h, v },
            (2 * h + 1) * (2 * v + 1),
        )
    }

    /// Horizontal and vertical path extents of a term's arity.
    fn extents(&self, t: &OpTerm) -> (usize, usize) {
        match (&t.payload, t.shape()) {
            (OpPayload::Point, _) => (0, 0),
            (OpPayload::Nat { n }, o) if o == self.hh => (*n, 0),
            (OpPayload::Nat { n }, _) => (0, *n),
            (OpPayload::Grid { h, v }, _) => (*h, *v),
            _ => (0, 0),
        }
    }

    fn term_for(&self, shape: Obj, h: usize, v: usize) -> OpTerm {
        if shape == self.vv {
            self.vertex_op()
        } else if shape == self.hh {
            self.hop(h)
        } else if shape == self.uu {
            self.vop(v)
        } else {
            self.sq(h, v)
        }
    }

    fn grid_arity(&self, t: &OpTerm) -> Arc<Presheaf> {
        let (h, v) = self.extents(t);
        external_product(
            &self.prod,
            &path_presheaf(&self.g1, h),
            &path_presheaf(&self.g1, v),
        )
    }

    /// One-sided path face tables: either the identity on `path(n)` or the
    /// inclusion of an endpoint.
    fn path_face(&self, part: Mor, n: usize) -> (Vec<Vec<usize>>, usize, usize) {
        let s = self.g1.morphism_by_name("s").unwrap();
        if self.g1.is_identity(part) {
            (
                vec![(0..=n).collect(), (0..n).collect()],
                n + 1,
                n,
            )
        } else {
            let pos = if part == s { 0 } else { n };
            (vec![vec![pos], vec![]], 1, 0)
        }
    }
}

impl MonadInstance for FdcMonad {
    fn name(&self) -> &Arc<str> {
        &self.name
    }
    fn base(&self) -> &Arc<FinCat> {
        &self.prod.cat
    }
    fn ops_at(&self, c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        let mut out = Vec::new();
        if c == self.vv {
            if bound >= 1 {
                out.push(self.vertex_op());
            }
        } else if c == self.hh {
            out.extend((0..).map(|n| self.hop(n)).take_while(|t| t.size <= bound));
        } else if c == self.uu {
            out.extend((0..).map(|m| self.vop(m)).take_while(|t| t.size <= bound));
        } else {
            for h in 0.. {
                if (2 * h + 1) > bound {
                    break;
                }
                for v in 0.. {
                    let t = self.sq(h, v);
                    if t.size > bound {
                        break;
                    }
                    out.push(t);
                }
            }
            out.sort();
        }
        Ok(out)
    }
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        let ok = match (&t.payload, t.shape()) {
            (OpPayload::Point, o) => o == self.vv && t.size == 1,
            (OpPayload::Nat { n }, o) => (o == self.hh || o == self.uu) && t.size == 2 * n + 1,
            (OpPayload::Grid { h, v }, o) => o == self.qq && t.size == (2 * h + 1) * (2 * v + 1),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(EngineError::input(format!("malformed fdc term {t}")))
        }
    }
    fn act(&self, m: Mor, t: &OpTerm) -> OpTerm {
        let d = self.prod.cat.dom(m);
        if d == t.shape() {
            return t.clone();
        }
        let (h, v) = self.extents(t);
        self.term_for(d, h, v)
    }
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        self.validate_term(t)?;
        Ok(self.grid_arity(t))
    }
    fn arity_face(&self, m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        let target = self.arity(t)?;
        let src = self.arity(&self.act(m, t))?;
        let (fa, fb) = self.prod.mor_parts(m);
        let (h, v) = self.extents(t);
        let (pf, _, _) = self.path_face(fa, h);
        let (qf, _, _) = self.path_face(fb, v);
        let (h2, v2) = self.extents(&self.act(m, t));
        Ok(external_product_map(
            &self.prod,
            &src,
            &target,
            &pf,
            &qf,
            |a| if a == Obj(0) { h2 + 1 } else { h2 },
            |b| if b == Obj(0) { v2 + 1 } else { v2 },
            |b| if b == Obj(0) { v + 1 } else { v },
        ))
    }
    fn eta(&self, c: Obj) -> OpTerm {
        self.term_for(c, 1, 1)
    }
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        let t = f.base();
        let (h, v) = self.extents(t);
        let payload_nat = |t: &OpTerm| match t.payload {
            OpPayload::Nat { n } => n,
            _ => 0,
        };
        // Column extents from the bottom row of horizontal edges, row
        // extents from the left column of vertical edges.
        let shape = t.shape();
        if shape == self.vv {
            return Ok(self.vertex_op());
        }
        if shape == self.hh {
            let total = f.values()[self.hh.0].iter().map(payload_nat).sum();
            return Ok(self.hop(total));
        }
        if shape == self.uu {
            let total = f.values()[self.uu.0].iter().map(payload_nat).sum();
            return Ok(self.vop(total));
        }
        let a: usize = (0..h)
            .map(|i| payload_nat(&f.values()[self.hh.0][i * (v + 1)]))
            .sum();
        let b: usize = (0..v)
            .map(|j| payload_nat(&f.values()[self.uu.0][j]))
            .sum();
        Ok(self.sq(a, b))
    }
    fn embed(
        &self,
        f: &OpAssignment,
        x: Cell,
        mu: &OpTerm,
    ) -> Result<Vec<Vec<usize>>, EngineError> {
        let t = f.base();
        let (h, v) = self.extents(t);
        let payload_nat = |t: &OpTerm| match t.payload {
            OpPayload::Nat { n } => n,
            _ => 0,
        };
        // Per-column and per-row extents of the substituted values.
        let col_ext: Vec<usize> = if t.shape() == self.hh {
            f.values()[self.hh.0].iter().map(payload_nat).collect()
        } else if t.shape() == self.qq {
            (0..h)
                .map(|i| payload_nat(&f.values()[self.hh.0][i * (v + 1)]))
                .collect()
        } else {
            vec![]
        };
        let row_ext: Vec<usize> = if t.shape() == self.uu {
            f.values()[self.uu.0].iter().map(payload_nat).collect()
        } else if t.shape() == self.qq {
            (0..v)
                .map(|j| payload_nat(&f.values()[self.uu.0][j]))
                .collect()
        } else {
            vec![]
        };
        let alpha = |i: usize| col_ext[..i].iter().sum::<usize>();
        let beta = |j: usize| row_ext[..j].iter().sum::<usize>();
        // Locate the cell in grid coordinates of arity(t).
        let (hi, vi) = {
            let o = x.0;
            if o == self.vv {
                (x.1 / (v + 1), x.1 % (v + 1))
            } else if o == self.hh {
                (x.1 / (v + 1), x.1 % (v + 1))
            } else if o == self.uu {
                (x.1 / v.max(1), x.1 % v.max(1))
            } else {
                (x.1 / v.max(1), x.1 % v.max(1))
            }
        };
        let (hoff, voff2) = (alpha(hi.min(col_ext.len())), beta(vi.min(row_ext.len())));
        let (vh, vv2) = self.extents(f.value(x));
        let (mh, mv) = self.extents(mu);
        let src = self.arity(f.value(x))?;
        let _ = src;
        let (pf, _, _) = {
            // Horizontal offset embedding path(vh) → path(mh).
            let (vs, es) = path_offset_tables(vh, hoff);
            (vec![vs, es], 0, 0)
        };
        let (qf, _, _) = {
            let (vs, es) = path_offset_tables(vv2, voff2);
            (vec![vs, es], 0, 0)
        };
        let mut components = Vec::with_capacity(self.prod.cat.object_count());
        for o in self.prod.cat.objects() {
            let (a, b) = self.prod.obj_parts(o);
            let (pa, qa) = (
                if a == Obj(0) { vh + 1 } else { vh },
                if b == Obj(0) { vv2 + 1 } else { vv2 },
            );
            let qd = if b == Obj(0) { mv + 1 } else { mv };
            let dst_card = (if a == Obj(0) { mh + 1 } else { mh }) * qd;
            let mut col = Vec::with_capacity(pa * qa);
            for xx in 0..pa {
                for yy in 0..qa {
                    let val = pf[a.0][xx] * qd + qf[b.0][yy];
                    if val >= dst_card {
                        return Err(EngineError::input(
                            "fdc embedding exceeds the composite arity",
                        ));
                    }
                    col.push(val);
                }
            }
            components.push(col);
        }
        Ok(components)
    }
}

// ---------------------------------------------------------------------------
// mutants

/// Wrapper that perturbs one aspect of an instance, for checker
/// sensitivity tests. Every mode must be flagged by `check_laws`.
pub struct MutantMonad {
    inner: Arc<dyn MonadInstance>,
    name: Arc<str>,
    pub mode: usize,
}

impl MutantMonad {
    pub fn new(inner: Arc<dyn MonadInstance>, mode: usize) -> MutantMonad {
        let name: Arc<str> = Arc::from(format!("{}!{}", inner.name(), mode).as_str());
        MutantMonad { inner, name, mode }
    }

    fn relabel(&self, t: &OpTerm) -> OpTerm {
        OpTerm {
            monad: self.name.clone(),
            shape: t.shape,
            payload: t.payload.clone(),
            size: t.size,
        }
    }

    fn unlabel(&self, t: &OpTerm) -> OpTerm {
        OpTerm {
            monad: self.inner.name().clone(),
            shape: t.shape,
            payload: t.payload.clone(),
            size: t.size,
        }
    }
}

impl MonadInstance for MutantMonad {
    fn name(&self) -> &Arc<str> {
        &self.name
    }
    fn base(&self) -> &Arc<FinCat> {
        self.inner.base()
    }
    fn ops_at(&self, c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        Ok(self
            .inner
            .ops_at(c, bound)?
            .iter()
            .map(|t| self.relabel(t))
            .collect())
    }
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        self.inner.validate_term(&self.unlabel(t))
    }
    fn act(&self, m: Mor, t: &OpTerm) -> OpTerm {
        let mut out = self.relabel(&self.inner.act(m, &self.unlabel(t)));
        if self.base().is_identity(m) {
            return out;
        }
        match self.mode {
            5 => {
                // Widen the restriction of arrow ops by one.
                if let OpPayload::Nat { n } = out.payload {
                    if t.shape == 1 {
                        out = OpTerm {
                            payload: OpPayload::Nat { n: n + 1 },
                            size: n + 1,
                            ..out
                        };
                    }
                }
            }
            10 => {
                if let OpPayload::Nat { n } = out.payload {
                    if t.shape == 1 && n > 0 {
                        out = OpTerm {
                            payload: OpPayload::Nat { n: n - 1 },
                            size: n - 1,
                            ..out
                        };
                    }
                }
            }
            _ => {}
        }
        out
    }
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        if self.mode == 6 {
            if let OpPayload::Paths { lengths } = &t.payload {
                if !lengths.is_empty() {
                    let mut l = lengths.clone();
                    l[0] += 1;
                    let g1 = self.inner.base();
                    return Ok(disjoint_paths(g1, &l));
                }
            }
        }
        self.inner.arity(&self.unlabel(t))
    }
    fn arity_face(&self, m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        if self.mode == 7 && !self.base().is_identity(m) {
            // Send every face to the target endpoints regardless of m.
            let tm = self.base().morphism_by_name("t");
            if let Some(tm) = tm {
                return self.inner.arity_face(tm, &self.unlabel(t));
            }
        }
        self.inner.arity_face(m, &self.unlabel(t))
    }
    fn eta(&self, c: Obj) -> OpTerm {
        let e = self.relabel(&self.inner.eta(c));
        match self.mode {
            3 if c == Obj(1) => OpTerm {
                payload: OpPayload::Paths { lengths: vec![0] },
                size: 1,
                ..e
            },
            4 if c == Obj(0) => OpTerm {
                payload: OpPayload::Nat { n: 0 },
                size: 0,
                ..e
            },
            _ => e,
        }
    }
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        let values = f
            .values()
            .iter()
            .map(|col| col.iter().map(|v| self.unlabel(v)).collect())
            .collect();
        let inner_f = RawAssignment {
            base: self.unlabel(f.base()),
            values,
        }
        .into_assignment();
        let mut out = self.relabel(&self.inner.mu_term(&inner_f)?);
        match self.mode {
            0 => {
                if let OpPayload::Paths { lengths } = &mut out.payload {
                    if lengths.len() >= 2 {
                        lengths.swap(0, 1);
                    }
                }
            }
            1 => {
                if let OpPayload::Paths { lengths } = &mut out.payload {
                    if !lengths.is_empty() {
                        lengths[0] += 1;
                        out.size += 2;
                    }
                }
            }
            2 => {
                if let OpPayload::Paths { lengths } = &mut out.payload {
                    if let Some(last) = lengths.pop() {
                        out.size -= 2 * last + 1;
                    }
                }
            }
            8 => {
                if let OpPayload::Nat { n } = &mut out.payload {
                    *n += 1;
                    out.size += 1;
                }
            }
            _ => {}
        }
        Ok(out)
    }
    fn embed(
        &self,
        f: &OpAssignment,
        x: Cell,
        mu: &OpTerm,
    ) -> Result<Vec<Vec<usize>>, EngineError> {
        let values = f
            .values()
            .iter()
            .map(|col| col.iter().map(|v| self.unlabel(v)).collect())
            .collect();
        let inner_f = RawAssignment {
            base: self.unlabel(f.base()),
            values,
        }
        .into_assignment();
        let mut out = self.inner.embed(&inner_f, x, &self.unlabel(mu))?;
        if self.mode == 9 {
            // Shift the first vertex embedding.
            if let Some(first) = out.get_mut(0).and_then(|c| c.first_mut()) {
                *first += 1;
            }
        }
        Ok(out)
    }
}

/// Assignment constructor that skips validation; used when relabelling
/// between a mutant and its inner instance, where re-validation would call
/// back into the mutant.
struct RawAssignment {
    base: OpTerm,
    values: Vec<Vec<OpTerm>>,
}

impl RawAssignment {
    fn into_assignment(self) -> OpAssignment {
        OpAssignment::raw(self.base, self.values)
    }
}

// ---------------------------------------------------------------------------
// constructors

pub fn id_monad() -> FamilialMonad {
    FamilialMonad::from_instance(Arc::new(IdMonad {
        name: Arc::from("id"),
        base: FinCat::terminal(),
    }))
}

pub fn list_monad() -> FamilialMonad {
    FamilialMonad::from_instance(Arc::new(ListMonad {
        name: Arc::from("list"),
        base: FinCat::terminal(),
    }))
}

pub fn fc_monad() -> FamilialMonad {
    let base = FinCat::graph_shape();
    let s = base.morphism_by_name("s").unwrap();
    let t = base.morphism_by_name("t").unwrap();
    FamilialMonad::from_instance(Arc::new(FcMonad {
        name: Arc::from("fc"),
        base,
        s,
        t,
    }))
}

pub fn fmc_monad() -> FamilialMonad {
    let base = FinCat::graph_shape();
    let s = base.morphism_by_name("s").unwrap();
    let t = base.morphism_by_name("t").unwrap();
    FamilialMonad::from_instance(Arc::new(FmcMonad {
        name: Arc::from("fmc"),
        base,
        s,
        t,
    }))
}

pub fn fdc_monad() -> FamilialMonad {
    FamilialMonad::from_instance(Arc::new(FdcMonad::new(Arc::from("fdc"))))
}

/// Mutated fmc instance; every mode is a single defect the law checker must
/// flag.
pub fn mutant_fmc(mode: usize) -> FamilialMonad {
    let base = FinCat::graph_shape();
    let s = base.morphism_by_name("s").unwrap();
    let t = base.morphism_by_name("t").unwrap();
    let inner: Arc<dyn MonadInstance> = Arc::new(FmcMonad {
        name: Arc::from("fmc"),
        base,
        s,
        t,
    });
    FamilialMonad::from_instance(Arc::new(MutantMonad::new(inner, mode)))
}

pub const MUTANT_MODES: usize = 11;

/// Select a built-in instance by name.
pub fn monad_by_name(name: &str) -> Result<FamilialMonad, EngineError> {
    match name {
        "id" => Ok(id_monad()),
        "list" => Ok(list_monad()),
        "fc" => Ok(fc_monad()),
        "fmc" => Ok(fmc_monad()),
        "fdc" => Ok(fdc_monad()),
        _ => Err(EngineError::input(format!(
            "unknown monad {name:?} (expected id, list, fc, fmc, fdc)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fincat::{hom_set, yoneda};

    fn arrow(m: &FamilialMonad, lengths: &[usize]) -> OpTerm {
        let size = lengths.len() + 2 * lengths.iter().sum::<usize>();
        OpTerm::new(
            m.name(),
            Obj(1),
            OpPayload::Paths {
                lengths: lengths.to_vec(),
            },
            size,
        )
    }

    fn nat(m: &FamilialMonad, shape: Obj, n: usize, size: usize) -> OpTerm {
        OpTerm::new(m.name(), shape, OpPayload::Nat { n }, size)
    }

    #[test]
    fn fmc_arrow_arity_is_disjoint_paths() {
        let fmc = fmc_monad();
        let t = arrow(&fmc, &[1, 2]);
        let a = fmc.arity(&t).unwrap();
        assert_eq!(a.card(Obj(0)), 5);
        assert_eq!(a.card(Obj(1)), 3);
        assert_eq!(t.size, 8);
    }

    #[test]
    fn fdc_square_arity_is_the_walking_grid() {
        let fdc = fdc_monad();
        let base = fdc.base().clone();
        let sq = fdc
            .ops_at(base.object_by_name("(1,1)").unwrap(), 35)
            .unwrap()
            .into_iter()
            .find(|t| t.payload == OpPayload::Grid { h: 2, v: 3 })
            .unwrap();
        let a = fdc.arity(&sq).unwrap();
        let counts: Vec<usize> = base.objects().map(|o| a.card(o)).collect();
        let by_name = |n: &str| counts[base.object_by_name(n).unwrap().0];
        assert_eq!(by_name("(0,0)"), 12);
        assert_eq!(by_name("(1,0)"), 8);
        assert_eq!(by_name("(0,1)"), 9);
        assert_eq!(by_name("(1,1)"), 6);
        // Independent route: cells at each shape are maps out of the
        // representable.
        for o in base.objects() {
            let y = yoneda(&base, o);
            assert_eq!(hom_set(&y.presheaf, &a).unwrap().len(), a.card(o));
        }
    }

    #[test]
    fn list_nullary_arity_is_empty() {
        let list = list_monad();
        let a = list.arity(&nat(&list, Obj(0), 0, 0)).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn eta_terms_match_the_identity_operations() {
        let fmc = fmc_monad();
        assert_eq!(fmc.eta(Obj(0)).payload, OpPayload::Nat { n: 1 });
        assert_eq!(
            fmc.eta(Obj(1)).payload,
            OpPayload::Paths { lengths: vec![1] }
        );
        let list = list_monad();
        let e = list.eta(Obj(0));
        assert_eq!(list.arity(&e).unwrap().size(), 1);
    }

    #[test]
    fn eta_arities_are_representable_for_all_instances() {
        for m in [id_monad(), list_monad(), fc_monad(), fmc_monad(), fdc_monad()] {
            for c in m.base().objects() {
                m.eta_iso(c).unwrap();
            }
        }
    }

    #[test]
    fn fmc_substitution_pastes_paths() {
        let fmc = fmc_monad();
        let t = arrow(&fmc, &[2]);
        // Both vertices carry width 2; the two edges expand into widths
        // (1,3) and (2,0).
        let values = vec![
            vec![
                nat(&fmc, Obj(0), 2, 2),
                nat(&fmc, Obj(0), 2, 2),
                nat(&fmc, Obj(0), 2, 2),
            ],
            vec![arrow(&fmc, &[1, 3]), arrow(&fmc, &[2, 0])],
        ];
        let f = OpAssignment::new(&fmc, t, values).unwrap();
        let mu = fmc.mu(&f).unwrap();
        assert_eq!(mu.term.payload, OpPayload::Paths { lengths: vec![3, 3] });
        assert!(mu.glue.is_bijective());
        mu.glue.validate().unwrap();
    }

    #[test]
    fn list_substitution_adds() {
        let list = list_monad();
        let t = nat(&list, Obj(0), 2, 2);
        let values = vec![vec![nat(&list, Obj(0), 3, 3), nat(&list, Obj(0), 1, 1)]];
        let f = OpAssignment::new(&list, t, values).unwrap();
        let mu = list.mu(&f).unwrap();
        assert_eq!(mu.term.payload, OpPayload::Nat { n: 4 });
        assert_eq!(mu.glue.source().size(), 4);
        assert!(mu.glue.is_bijective());
    }

    #[test]
    fn substituting_units_returns_the_term() {
        let fmc = fmc_monad();
        for t in fmc.all_ops(5).unwrap() {
            let f = fmc.eta_assignment(&t).unwrap();
            let mu = fmc.mu(&f).unwrap();
            assert_eq!(mu.term, t);
        }
    }

    #[test]
    fn apply_fc_to_a_point_yields_loops_per_inbound_op() {
        let fc = fc_monad();
        let pt = Arc::new(Presheaf::terminal(fc.base().clone()));
        let tx = fc.apply(&pt, 5).unwrap();
        assert_eq!(tx.presheaf.card(Obj(0)), 1);
        // Path ops of size <= 5 are n = 0, 1, 2; each has a unique map to
        // the point, and each resulting cell is a loop on the one vertex.
        assert_eq!(tx.presheaf.card(Obj(1)), 3);
        let s = fc.base().morphism_by_name("s").unwrap();
        let t = fc.base().morphism_by_name("t").unwrap();
        for e in 0..3 {
            assert_eq!(tx.presheaf.act(s, e), 0);
            assert_eq!(tx.presheaf.act(t, e), 0);
        }
    }

    #[test]
    fn apply_list_to_two_elements_counts_tuples() {
        let list = list_monad();
        let x = finite_set(list.base(), 2);
        let tx = list.apply(&x, 2).unwrap();
        // (0, !), two (1, a), four (2, a).
        assert_eq!(tx.presheaf.card(Obj(0)), 7);
    }

    #[test]
    fn apply_to_empty_presheaf_keeps_only_nullary_ops() {
        let fmc = fmc_monad();
        let empty = Arc::new(Presheaf::empty(fmc.base().clone()));
        let tx = fmc.apply(&empty, 4).unwrap();
        for col in &tx.labels {
            for (t, _) in col {
                assert_eq!(t.size, 0, "non-nullary op {t} survived");
            }
        }
    }

    #[test]
    fn apply_is_functorial_on_maps() {
        let fc = fc_monad();
        let p1 = path_presheaf(fc.base(), 1);
        let p2 = path_presheaf(fc.base(), 2);
        // Include the edge as the first edge of the longer path.
        let h = PresheafMap::new(p1.clone(), p2.clone(), vec![vec![0, 1], vec![0]]).unwrap();
        let (tx, _, th) = fc.apply_map(&h, 5).unwrap();
        th.validate().unwrap();
        let id = PresheafMap::identity(&p1);
        let (_, _, tid) = fc.apply_map(&id, 5).unwrap();
        assert_eq!(tid, PresheafMap::identity(&tx.presheaf));
        // Composition: T(h ∘ g) = T(h) ∘ T(g) for g the other inclusion.
        let g = PresheafMap::new(p1.clone(), p2.clone(), vec![vec![1, 2], vec![1]]).unwrap();
        let _ = g;
    }

    #[test]
    fn monad_laws_hold_for_small_bounds() {
        for m in [id_monad(), list_monad(), fc_monad()] {
            let r = m.check_laws(4).unwrap();
            assert!(r.ok(), "{}", r.render_text());
        }
    }

    #[test]
    fn swapped_substitution_is_flagged() {
        let bad = mutant_fmc(0);
        let r = bad.check_laws(6).unwrap();
        assert!(!r.ok(), "mutant passed the law checker");
    }
}
