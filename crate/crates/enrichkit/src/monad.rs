//! Familial monads: term-indexed operation families with arities, unit, and
//! substitution.
//!
//! An instance supplies the data `(T(1), T[-], η, μ)` elementwise: bounded
//! enumeration of operations per shape, restriction of operations along base
//! morphisms, arity presheaves with stable payload-position cell labels, and
//! substitution. Substitution is implemented twice, per the module contract:
//! payload arithmetic gives the resulting term ([`MonadInstance::mu_term`]),
//! and the generic colimit pasting here rebuilds its arity and produces the
//! glue isomorphism used as substitution bookkeeping downstream. The glue is
//! induced from the instance's embedding cocone (or found by search for
//! instances whose arities are rigid), then validated for naturality and
//! bijectivity, so a defective instance is caught rather than trusted.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::fincat::{
    colimit, hom_set, iso_check, yoneda, Cell, Colimit, Diagram, FinCat, Mor, Obj, Presheaf,
    PresheafMap,
};
use crate::report::Report;

/// Instance-specific payload of an operation term.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpPayload {
    /// The unique operation at its shape.
    Point,
    /// A single natural number: list/fc path length, fmc object width,
    /// fdc edge string length.
    Nat { n: usize },
    /// fmc arrow operation: one path length per tensor position.
    Paths { lengths: Vec<usize> },
    /// fdc square operation: horizontal and vertical extent.
    Grid { h: usize, v: usize },
    /// Operation of a free-multicategory style monad: a tower of terms of
    /// the inner monad, each step decomposing the previous term.
    Seq(SeqPayload),
}

/// A composable tower `(t_1, ..., t_n)` of inner-monad terms with step
/// assignments: step `k` assigns to every cell of `arity(t_k)` (in canonical
/// cell order) a term whose substitution into `t_k` yields `t_{k+1}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct SeqPayload {
    /// Shape of the tower in the inner base category.
    pub inner_shape: usize,
    pub terms: Vec<OpTerm>,
    pub steps: Vec<Vec<OpTerm>>,
}

/// An operation term: which monad it belongs to, the shape it outputs, the
/// instance payload, and the total cell count of its arity (used for
/// bounded enumeration).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct OpTerm {
    pub monad: Arc<str>,
    pub shape: usize,
    pub payload: OpPayload,
    pub size: usize,
}

impl OpTerm {
    pub fn new(monad: &Arc<str>, shape: Obj, payload: OpPayload, size: usize) -> OpTerm {
        OpTerm {
            monad: monad.clone(),
            shape: shape.0,
            payload,
            size,
        }
    }

    pub fn shape(&self) -> Obj {
        Obj(self.shape)
    }
}

impl fmt::Display for OpTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            OpPayload::Point => write!(f, "{}[*@{}]", self.monad, self.shape),
            OpPayload::Nat { n } => write!(f, "{}[{}@{}]", self.monad, n, self.shape),
            OpPayload::Paths { lengths } => write!(f, "{}[{:?}@{}]", self.monad, lengths, self.shape),
            OpPayload::Grid { h, v } => write!(f, "{}[{}x{}@{}]", self.monad, h, v, self.shape),
            OpPayload::Seq(s) => {
                let terms: Vec<String> = s.terms.iter().map(|t| t.to_string()).collect();
                write!(f, "{}[seq {} @{}]", self.monad, terms.join(" -> "), self.shape)
            }
        }
    }
}

/// A presheaf map `T[t] → T(1)` stored elementwise: one operation term per
/// cell of `arity(t)`, face-compatible by construction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OpAssignment {
    base: OpTerm,
    /// `values[o][i]` is the term assigned to arity cell `(o, i)`.
    values: Vec<Vec<OpTerm>>,
}

impl OpAssignment {
    /// Build and validate face compatibility:
    /// `act(m, values(x)) = values(x · m)` for every base morphism `m`.
    pub fn new(
        monad: &FamilialMonad,
        base: OpTerm,
        values: Vec<Vec<OpTerm>>,
    ) -> Result<OpAssignment, EngineError> {
        let a = monad.arity(&base)?;
        let cat = monad.base();
        if values.len() != cat.object_count() {
            return Err(EngineError::input("assignment table has wrong length"));
        }
        for o in cat.objects() {
            if values[o.0].len() != a.card(o) {
                return Err(EngineError::input(format!(
                    "assignment at {} has {} entries for {} cells",
                    cat.object_name(o),
                    values[o.0].len(),
                    a.card(o)
                )));
            }
            for v in &values[o.0] {
                if v.shape() != o {
                    return Err(EngineError::composability(format!(
                        "assigned term {v} does not output shape {}",
                        cat.object_name(o)
                    )));
                }
                monad.validate_term(v)?;
            }
        }
        for m in cat.morphisms() {
            if cat.is_identity(m) {
                continue;
            }
            let c = cat.cod(m);
            let d = cat.dom(m);
            for x in 0..a.card(c) {
                let expect = monad.act(m, &values[c.0][x]);
                let got = &values[d.0][a.act(m, x)];
                if expect != *got {
                    return Err(EngineError::composability(format!(
                        "face incompatibility at {} cell {x}: act gives {expect}, assigned {got}",
                        cat.morphism_name(m)
                    )));
                }
            }
        }
        Ok(OpAssignment { base, values })
    }

    /// Construct without validation; for internal relabelling only.
    pub(crate) fn raw(base: OpTerm, values: Vec<Vec<OpTerm>>) -> OpAssignment {
        OpAssignment { base, values }
    }

    pub fn base(&self) -> &OpTerm {
        &self.base
    }

    pub fn value(&self, cell: Cell) -> &OpTerm {
        &self.values[cell.0 .0][cell.1]
    }

    pub fn values(&self) -> &Vec<Vec<OpTerm>> {
        &self.values
    }
}

/// Result of substitution: the composite term, the pasted colimit of the
/// value arities, and the glue isomorphism onto the composite's arity.
pub struct Mu {
    pub term: OpTerm,
    pub colim: Colimit,
    /// Cells of the pasting diagram, in the node order of `colim`.
    pub node_cells: Vec<Cell>,
    /// Isomorphism `colim.presheaf → arity(term)`.
    pub glue: PresheafMap,
}

impl Mu {
    /// The composite embedding `arity(f(x)) → arity(μ)` for a pasting cell.
    pub fn embed(&self, x: Cell) -> PresheafMap {
        let idx = self
            .node_cells
            .iter()
            .position(|&c| c == x)
            .expect("cell not part of the pasting diagram");
        self.glue.compose(&self.colim.injections[idx])
    }
}

/// The data of one familial monad instance.
///
/// `arity(eta(c))` need not equal `yoneda(c)` on the nose; the wrapper
/// recovers the canonical comparison map, which is unique for the rigid
/// index categories used here.
pub trait MonadInstance: Send + Sync {
    fn name(&self) -> &Arc<str>;
    fn base(&self) -> &Arc<FinCat>;
    /// Terms at shape `c` with arity size `<= bound`, in a deterministic
    /// order.
    fn ops_at(&self, c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError>;
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError>;
    /// Restriction of `t` (at `cod m`) along `m` to a term at `dom m`.
    fn act(&self, m: Mor, t: &OpTerm) -> OpTerm;
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError>;
    /// The arity-face inclusion `arity(act(m, t)) → arity(t)`.
    fn arity_face(&self, m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError>;
    fn eta(&self, c: Obj) -> OpTerm;
    /// Substitution on payloads only.
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError>;
    /// Embedding of one value arity into the composite arity, forming a
    /// cocone over the pasting diagram. Instances whose glue is found by
    /// search return an error and set [`MonadInstance::glue_by_search`].
    fn embed(&self, f: &OpAssignment, x: Cell, mu: &OpTerm) -> Result<Vec<Vec<usize>>, EngineError>;
    fn glue_by_search(&self) -> bool {
        false
    }
}

/// A familial monad: an instance behind the generic substitution, bounded
/// application, and law-checking machinery.
#[derive(Clone)]
pub struct FamilialMonad {
    inst: Arc<dyn MonadInstance>,
}

impl FamilialMonad {
    pub fn from_instance(inst: Arc<dyn MonadInstance>) -> FamilialMonad {
        FamilialMonad { inst }
    }

    pub(crate) fn instance(&self) -> &Arc<dyn MonadInstance> {
        &self.inst
    }

    pub fn name(&self) -> &Arc<str> {
        self.inst.name()
    }

    pub fn base(&self) -> &Arc<FinCat> {
        self.inst.base()
    }

    pub fn ops_at(&self, c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        self.inst.ops_at(c, bound)
    }

    /// All terms of size `<= bound` over every shape, canonical order.
    pub fn all_ops(&self, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        let mut out = Vec::new();
        for c in self.base().objects() {
            out.extend(self.ops_at(c, bound)?);
        }
        Ok(out)
    }

    pub fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        if *t.monad != **self.name() {
            return Err(EngineError::input(format!(
                "term {t} belongs to monad {}, not {}",
                t.monad,
                self.name()
            )));
        }
        self.inst.validate_term(t)
    }

    pub fn act(&self, m: Mor, t: &OpTerm) -> OpTerm {
        self.inst.act(m, t)
    }

    pub fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        self.inst.arity(t)
    }

    pub fn arity_face(&self, m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        self.inst.arity_face(m, t)
    }

    pub fn eta(&self, c: Obj) -> OpTerm {
        self.inst.eta(c)
    }

    /// The canonical comparison isomorphism `arity(eta(c)) → y(c)`.
    ///
    /// Unique because the index categories in play have no non-identity
    /// automorphisms of representables, so the search result is canonical.
    pub fn eta_iso(&self, c: Obj) -> Result<PresheafMap, EngineError> {
        let rep = yoneda(self.base(), c);
        let ar = self.arity(&self.eta(c))?;
        match iso_check(&ar, &rep.presheaf)? {
            Some(m) => Ok(m),
            None => Err(EngineError::input(format!(
                "arity of eta({}) is not isomorphic to the representable",
                self.base().object_name(c)
            ))),
        }
    }

    /// The assignment `x ↦ eta(shape(x))` on the arity of `t`.
    pub fn eta_assignment(&self, t: &OpTerm) -> Result<OpAssignment, EngineError> {
        let a = self.arity(t)?;
        let values = self
            .base()
            .objects()
            .map(|o| (0..a.card(o)).map(|_| self.eta(o)).collect())
            .collect();
        OpAssignment::new(self, t.clone(), values)
    }

    /// The assignment on `arity(eta(c))` that restricts a single term `t`
    /// along the morphism each cell stands for.
    pub fn unit_assignment(&self, t: &OpTerm) -> Result<OpAssignment, EngineError> {
        let c = t.shape();
        let e = self.eta(c);
        let a = self.arity(&e)?;
        let phi = self.eta_iso(c)?;
        let rep = yoneda(self.base(), c);
        let values = self
            .base()
            .objects()
            .map(|o| {
                (0..a.card(o))
                    .map(|z| {
                        let m = rep.cell_mor[o.0][phi.apply((o, z))];
                        self.act(m, t)
                    })
                    .collect()
            })
            .collect();
        OpAssignment::new(self, e, values)
    }

    /// Substitute: compute the composite term, paste the value arities by
    /// colimit, and produce the validated glue isomorphism.
    pub fn mu(&self, f: &OpAssignment) -> Result<Mu, EngineError> {
        let term = self.inst.mu_term(f)?;
        self.validate_term(&term)?;
        let target = self.arity(&term)?;
        let base = self.base().clone();
        let a = self.arity(f.base())?;
        let node_cells = a.all_cells();
        let node_of: BTreeMap<Cell, usize> = node_cells.iter().copied().zip(0..).collect();
        let mut nodes = Vec::with_capacity(node_cells.len());
        for &x in &node_cells {
            nodes.push(self.arity(f.value(x))?);
        }
        let mut edges = Vec::new();
        for m in base.morphisms() {
            if base.is_identity(m) {
                continue;
            }
            let c = base.cod(m);
            for x in 0..a.card(c) {
                let src = node_of[&(base.dom(m), a.act(m, x))];
                let dst = node_of[&(c, x)];
                let map = self.arity_face(m, f.value((c, x)))?;
                edges.push((src, dst, map));
            }
        }
        let col = colimit(&base, &Diagram { nodes, edges })?;
        let glue = if self.inst.glue_by_search() {
            match iso_check(&col.presheaf, &target)? {
                Some(g) => g,
                None => {
                    return Err(EngineError::composability(format!(
                        "glue failure: pasted arity of {} under {} is not isomorphic to arity({term})",
                        f.base(),
                        term
                    )))
                }
            }
        } else {
            // Induce the glue from the instance's embedding cocone.
            let mut embeds = Vec::with_capacity(node_cells.len());
            for (k, &x) in node_cells.iter().enumerate() {
                let comps = self.inst.embed(f, x, &term)?;
                let m = PresheafMap::new(col.injections[k].source().clone(), target.clone(), comps)
                    .map_err(|e| {
                        EngineError::composability(format!(
                            "glue failure: embedding of cell {:?} in {} is not natural: {e}",
                            x,
                            f.base()
                        ))
                    })?;
                embeds.push(m);
            }
            // Cocone check, then the induced map on classes.
            let mut components: Vec<Vec<Option<usize>>> = base
                .objects()
                .map(|o| vec![None; col.presheaf.card(o)])
                .collect();
            for (k, e) in embeds.iter().enumerate() {
                let inj = &col.injections[k];
                for o in base.objects() {
                    for x in 0..e.source().card(o) {
                        let cls = inj.apply((o, x));
                        let val = e.apply((o, x));
                        match components[o.0][cls] {
                            None => components[o.0][cls] = Some(val),
                            Some(prev) if prev == val => {}
                            Some(prev) => {
                                return Err(EngineError::composability(format!(
                                    "glue failure: embeddings disagree on a pasted cell of {} ({prev} vs {val})",
                                    f.base()
                                )))
                            }
                        }
                    }
                }
            }
            let components: Result<Vec<Vec<usize>>, EngineError> = components
                .into_iter()
                .map(|col| {
                    col.into_iter()
                        .map(|v| {
                            v.ok_or_else(|| {
                                EngineError::composability(
                                    "glue failure: a pasted cell is hit by no embedding",
                                )
                            })
                        })
                        .collect()
                })
                .collect();
            let glue = PresheafMap::new(col.presheaf.clone(), target.clone(), components?)
                .map_err(|e| {
                    EngineError::composability(format!("glue failure: induced map not natural: {e}"))
                })?;
            glue
        };
        if !glue.is_bijective() {
            return Err(EngineError::composability(format!(
                "glue failure: pasted arity of {} is not bijective onto arity({term})",
                f.base()
            )));
        }
        Ok(Mu {
            term,
            colim: col,
            node_cells,
            glue,
        })
    }

    /// Substitution result term only (no glue).
    pub fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        self.inst.mu_term(f)
    }

    /// Enumerate every face-compatible assignment on `arity(t)` whose values
    /// have size `<= value_bound`, in deterministic order.
    pub fn assignments(
        &self,
        t: &OpTerm,
        value_bound: usize,
    ) -> Result<Vec<OpAssignment>, EngineError> {
        let a = self.arity(t)?;
        let base = self.base().clone();
        let order = base.topo_order()?;
        let mut cells: Vec<Cell> = Vec::new();
        for &o in &order {
            for i in 0..a.card(o) {
                cells.push((o, i));
            }
        }
        // Candidates per object, computed once.
        let mut cands: Vec<Vec<OpTerm>> = Vec::with_capacity(base.object_count());
        for o in base.objects() {
            cands.push(self.ops_at(o, value_bound)?);
        }
        let pos_of: BTreeMap<Cell, usize> = cells.iter().copied().zip(0..).collect();
        // Constraints: when assigning cell x at c, every non-identity
        // m : d → c has x·m already assigned (topological order).
        let mut checks: Vec<Vec<(Mor, usize)>> = vec![Vec::new(); cells.len()];
        for m in base.morphisms() {
            if base.is_identity(m) {
                continue;
            }
            let c = base.cod(m);
            let d = base.dom(m);
            for x in 0..a.card(c) {
                let here = pos_of[&(c, x)];
                let face = pos_of[&(d, a.act(m, x))];
                debug_assert!(face < here, "topological order violated");
                checks[here].push((m, face));
            }
        }
        let mut out = Vec::new();
        let mut chosen: Vec<usize> = Vec::new();
        let mut pos = 0usize;
        let mut cursor = vec![0usize; cells.len() + 1];
        loop {
            if pos == cells.len() {
                let mut values: Vec<Vec<OpTerm>> =
                    base.objects().map(|o| vec![self.eta(o); a.card(o)]).collect();
                for (k, &(o, i)) in cells.iter().enumerate() {
                    values[o.0][i] = cands[o.0][chosen[k]].clone();
                }
                out.push(OpAssignment {
                    base: t.clone(),
                    values,
                });
                if pos == 0 {
                    break;
                }
                pos -= 1;
                chosen.pop();
                continue;
            }
            let (o, _) = cells[pos];
            let mut v = cursor[pos];
            let mut placed = false;
            while v < cands[o.0].len() {
                let cand = &cands[o.0][v];
                let ok = checks[pos].iter().all(|&(m, face)| {
                    let (fo, _) = cells[face];
                    self.act(m, cand) == cands[fo.0][chosen[face]]
                });
                if ok {
                    placed = true;
                    break;
                }
                v += 1;
            }
            if placed {
                cursor[pos] = v + 1;
                chosen.push(v);
                pos += 1;
                cursor[pos] = 0;
            } else {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                chosen.pop();
            }
        }
        Ok(out)
    }

    /// Bounded application `TX` truncated to operations of size `<= bound`.
    pub fn apply(&self, x: &Arc<Presheaf>, bound: usize) -> Result<Applied, EngineError> {
        if **x.base() != **self.base() {
            return Err(EngineError::input("presheaf over a different base"));
        }
        let base = self.base().clone();
        let mut labels: Vec<Vec<(OpTerm, PresheafMap)>> = Vec::with_capacity(base.object_count());
        for c in base.objects() {
            let mut col = Vec::new();
            for t in self.ops_at(c, bound)? {
                let a = self.arity(&t)?;
                for m in hom_set(&a, x)? {
                    col.push((t.clone(), m));
                }
            }
            labels.push(col);
        }
        let index: Vec<BTreeMap<(OpTerm, Vec<Vec<usize>>), usize>> = labels
            .iter()
            .map(|col| {
                col.iter()
                    .enumerate()
                    .map(|(i, (t, m))| ((t.clone(), m.components().clone()), i))
                    .collect()
            })
            .collect();
        let cells: Vec<usize> = labels.iter().map(|c| c.len()).collect();
        let mut action: Vec<Vec<usize>> = Vec::with_capacity(base.morphism_count());
        for m in base.morphisms() {
            let c = base.cod(m);
            let d = base.dom(m);
            let mut tbl = Vec::with_capacity(cells[c.0]);
            for (t, a) in &labels[c.0] {
                let rt = self.act(m, t);
                let face = self.arity_face(m, t)?;
                let restricted = a.compose(&face);
                let key = (rt, restricted.components().clone());
                let idx = index[d.0].get(&key).copied().ok_or_else(|| {
                    EngineError::bound(format!(
                        "apply: restriction of ({t}, -) along {} falls outside bound {bound}",
                        base.morphism_name(m)
                    ))
                })?;
                tbl.push(idx);
            }
            action.push(tbl);
        }
        let presheaf = Arc::new(Presheaf::new(base, cells, action)?);
        Ok(Applied { presheaf, labels })
    }

    /// Functorial action of `apply` on a presheaf map, up to the bound.
    pub fn apply_map(
        &self,
        h: &PresheafMap,
        bound: usize,
    ) -> Result<(Applied, Applied, PresheafMap), EngineError> {
        let tx = self.apply(h.source(), bound)?;
        let ty = self.apply(h.target(), bound)?;
        let base = self.base();
        let mut components = Vec::with_capacity(base.object_count());
        for c in base.objects() {
            let mut col = Vec::with_capacity(tx.labels[c.0].len());
            for (t, a) in &tx.labels[c.0] {
                let image = h.compose(a);
                let idx = ty
                    .position(c, t, &image)
                    .ok_or_else(|| EngineError::input("apply_map: image cell missing"))?;
                col.push(idx);
            }
            components.push(col);
        }
        let map = PresheafMap::new(tx.presheaf.clone(), ty.presheaf.clone(), components)?;
        Ok((tx, ty, map))
    }

    /// Exhaustively verify the monad presentation up to `bound`:
    /// unit arities, functoriality of restriction and arity faces, both unit
    /// laws, associativity on nested assignments, and validity of every glue
    /// isomorphism.
    pub fn check_laws(&self, bound: usize) -> Result<Report, EngineError> {
        let mut report = Report::new(format!("monad-laws[{}]", self.name()), bound);
        let base = self.base().clone();

        // (0) arity(eta) vs the representable.
        for c in base.objects() {
            match self.eta_iso(c) {
                Ok(_) => report.pass(),
                Err(e) => report.fail(
                    "unit arity",
                    format!("eta({}) has non-representable arity: {e}", base.object_name(c)),
                ),
            }
        }

        // (i) functoriality of act and of arity faces.
        for c in base.objects() {
            for t in self.ops_at(c, bound)? {
                let idc = base.identity(c);
                if self.act(idc, &t) != t {
                    report.fail("act identity", format!("act(id, {t}) != {t}"));
                } else {
                    report.pass();
                }
                for m in base.morphisms() {
                    if base.cod(m) != c || base.is_identity(m) {
                        continue;
                    }
                    let tm = self.act(m, &t);
                    if tm.shape() != base.dom(m) {
                        report.fail("act shape", format!("act({}, {t}) at wrong shape", base.morphism_name(m)));
                        continue;
                    }
                    let face_m = self.arity_face(m, &t)?;
                    if face_m.validate().is_err() {
                        report.fail(
                            "arity face",
                            format!("arity_face({}, {t}) is not natural", base.morphism_name(m)),
                        );
                    } else {
                        report.pass();
                    }
                    for k in base.morphisms() {
                        if base.cod(k) != base.dom(m) || base.is_identity(k) {
                            continue;
                        }
                        let mk = base.compose(m, k);
                        if self.act(k, &tm) != self.act(mk, &t) {
                            report.fail(
                                "act functoriality",
                                format!(
                                    "act({}, act({}, {t})) != act({}, {t})",
                                    base.morphism_name(k),
                                    base.morphism_name(m),
                                    base.morphism_name(mk)
                                ),
                            );
                        } else {
                            report.pass();
                        }
                        let lhs = self.arity_face(mk, &t)?;
                        let rhs = face_m.compose(&self.arity_face(k, &tm)?);
                        if lhs != rhs {
                            report.fail(
                                "arity face functoriality",
                                format!(
                                    "faces along {} and {}∘{} disagree on {t}",
                                    base.morphism_name(mk),
                                    base.morphism_name(m),
                                    base.morphism_name(k)
                                ),
                            );
                        } else {
                            report.pass();
                        }
                    }
                }
            }
        }

        // (ii) unit laws.
        for c in base.objects() {
            for t in self.ops_at(c, bound)? {
                // Right unit: substitute eta everywhere.
                match self
                    .eta_assignment(&t)
                    .and_then(|f| self.mu(&f))
                {
                    Ok(mu) => {
                        if mu.term != t {
                            report.fail("right unit", format!("mu({t}, eta...) = {}", mu.term));
                        } else {
                            report.pass();
                        }
                    }
                    Err(e) => report.fail("right unit", format!("{t}: {e}")),
                }
                // Left unit: substitute t into eta(c).
                match self.unit_assignment(&t).and_then(|f| self.mu(&f)) {
                    Ok(mu) => {
                        if mu.term != t {
                            report.fail("left unit", format!("mu(eta, {t}...) = {}", mu.term));
                        } else {
                            report.pass();
                        }
                    }
                    Err(e) => report.fail("left unit", format!("{t}: {e}")),
                }
            }
        }

        // (iii) glue isomorphisms and (iv) associativity.
        //
        // Assignments are enumerated once per term and pre-filtered by the
        // cheap payload-level substitution before any colimit is pasted.
        let mut cache: BTreeMap<OpTerm, Arc<Vec<OpAssignment>>> = BTreeMap::new();
        let mut skipped_prefilter = 0usize;
        let mut bounded_assignments = |m: &FamilialMonad,
                                       t: &OpTerm,
                                       skips: &mut usize|
         -> Result<Arc<Vec<OpAssignment>>, EngineError> {
            if let Some(v) = cache.get(t) {
                return Ok(v.clone());
            }
            let mut keep = Vec::new();
            for f in m.assignments(t, bound)? {
                match m.mu_term(&f) {
                    Ok(u) if u.size <= bound => keep.push(f),
                    Ok(_) => *skips += 1,
                    Err(EngineError::Bound(_)) | Err(EngineError::Composability(_)) => {
                        *skips += 1
                    }
                    Err(e) => return Err(e),
                }
            }
            let v = Arc::new(keep);
            cache.insert(t.clone(), v.clone());
            Ok(v)
        };
        for c in base.objects() {
            for t in self.ops_at(c, bound)? {
                let fs = bounded_assignments(self, &t, &mut skipped_prefilter)?;
                for f in fs.iter() {
                    let mu1 = match self.mu(f) {
                        Ok(m) => m,
                        Err(EngineError::Bound(_)) => {
                            report.skip();
                            continue;
                        }
                        Err(EngineError::Composability(msg)) => {
                            // Partial substitution (see the tower monads) is
                            // skipped; genuine glue defects are failures.
                            if msg.starts_with("glue failure") {
                                report.fail("glue", msg);
                            } else {
                                report.skip();
                            }
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    report.pass(); // glue validated inside mu()
                    // Cache the embeddings for transporting outer
                    // assignments to the inner arities.
                    let embeds: Vec<PresheafMap> =
                        mu1.node_cells.iter().map(|&x| mu1.embed(x)).collect();
                    let gs = bounded_assignments(self, &mu1.term, &mut skipped_prefilter)?;
                    for g in gs.iter() {
                        let lhs = match self.mu_term(g) {
                            Ok(t) => t,
                            Err(_) => {
                                report.skip();
                                continue;
                            }
                        };
                        // h(x) = mu(f(x), g restricted along the embedding).
                        let mut ok = true;
                        let mut values: Vec<Vec<OpTerm>> =
                            base.objects().map(|_| Vec::new()).collect();
                        'outer: for (k, &x) in mu1.node_cells.iter().enumerate() {
                            let e = &embeds[k];
                            let inner_arity = e.source();
                            let inner_values: Vec<Vec<OpTerm>> = base
                                .objects()
                                .map(|o| {
                                    (0..inner_arity.card(o))
                                        .map(|z| g.value((o, e.apply((o, z)))).clone())
                                        .collect()
                                })
                                .collect();
                            let fa = match OpAssignment::new(
                                self,
                                f.value(x).clone(),
                                inner_values,
                            ) {
                                Ok(fa) => fa,
                                Err(_) => {
                                    ok = false;
                                    break 'outer;
                                }
                            };
                            match self.mu_term(&fa) {
                                Ok(tm) => values[x.0 .0].push(tm),
                                Err(_) => {
                                    ok = false;
                                    break 'outer;
                                }
                            }
                        }
                        if !ok {
                            report.skip();
                            continue;
                        }
                        let h = match OpAssignment::new(self, t.clone(), values) {
                            Ok(h) => h,
                            Err(e) => {
                                report.fail(
                                    "associativity",
                                    format!("inner substitution of {t} not face-compatible: {e}"),
                                );
                                continue;
                            }
                        };
                        match self.mu_term(&h) {
                            Ok(rhs) => {
                                if rhs != lhs {
                                    report.fail(
                                        "associativity",
                                        format!(
                                            "mu(mu({t}, f), g) = {lhs} but mu({t}, mu∘f) = {rhs} (f = {f:?})",
                                            f = f
                                                .values()
                                                .iter()
                                                .flatten()
                                                .map(|v| v.to_string())
                                                .collect::<Vec<_>>()
                                        ),
                                    );
                                } else {
                                    report.pass();
                                }
                            }
                            Err(_) => report.skip(),
                        }
                    }
                }
            }
        }
        report.skipped += skipped_prefilter;
        Ok(report)
    }
}

/// Bounded `TX` with its cell labels `(operation, attaching map)`.
pub struct Applied {
    pub presheaf: Arc<Presheaf>,
    pub labels: Vec<Vec<(OpTerm, PresheafMap)>>,
}

impl Applied {
    pub fn position(&self, c: Obj, t: &OpTerm, a: &PresheafMap) -> Option<usize> {
        self.labels[c.0]
            .iter()
            .position(|(u, m)| u == t && m.components() == a.components())
    }
}
