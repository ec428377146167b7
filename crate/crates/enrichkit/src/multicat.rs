//! Generalized multicategories for a familial monad: per-operation arrow
//! sets with domains attached along arities, identities, and one-step
//! composition, plus the detectors (trivial, discrete, representable) and
//! maps between multicategories.
//!
//! Arrows are stored per operation term; the presheaf-over-extended-shapes
//! view lives in the tower module and is reconstructed from this storage,
//! not duplicated. Composition is either resolved by boundaries (for
//! structures whose arrows are determined by domain and codomain, such as
//! algebra witnesses) or supplied as a table saturated by the loader.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::algebra::{transpose_cell, FiniteAlgebra};
use crate::error::EngineError;
use crate::fincat::{hom_set, Cell, Mor, Obj, Presheaf, PresheafMap};
use crate::monad::{FamilialMonad, Mu, OpAssignment, OpTerm};
use crate::report::Report;
use crate::shapes::{restrict_monad, Restriction};

/// Address of an arrow: its operation term and index in that term's list.
pub type ArrowRef = (OpTerm, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Arrow {
    /// Attaching map `arity(t) → V0`.
    pub dom: PresheafMap,
    /// Codomain cell of `V0` at the operation's shape.
    pub cod: usize,
    /// Restriction along each non-identity base morphism into the shape.
    pub faces: BTreeMap<Mor, usize>,
}

/// How composites are determined.
#[derive(Clone)]
pub enum ComposeRule {
    /// The unique arrow with the pasted domain and the outer codomain.
    /// Valid when arrows are determined by (dom, cod); a missing composite
    /// is a closure failure.
    ByBoundary,
    /// Explicit saturated table keyed by outer arrow and inner family (in
    /// canonical arity cell order). A missing required entry is a coverage
    /// error.
    Table(BTreeMap<(ArrowRef, Vec<ArrowRef>), ArrowRef>),
}

#[derive(Clone)]
pub struct TMulticat {
    monad: FamilialMonad,
    bound: usize,
    v0: Arc<Presheaf>,
    arrows: BTreeMap<OpTerm, Vec<Arrow>>,
    /// Identity arrow index (into the unit operation's list) per cell.
    identities: Vec<Vec<usize>>,
    compose: ComposeRule,
}

/// Cache of bounded, substitution-filtered assignments per operation term.
#[derive(Default)]
pub struct AssignCache {
    per_term: BTreeMap<(OpTerm, usize), Arc<Vec<OpAssignment>>>,
}

impl AssignCache {
    pub fn new() -> AssignCache {
        AssignCache::default()
    }

    fn get(
        &mut self,
        monad: &FamilialMonad,
        t: &OpTerm,
        bound: usize,
    ) -> Result<Arc<Vec<OpAssignment>>, EngineError> {
        if let Some(v) = self.per_term.get(&(t.clone(), bound)) {
            return Ok(v.clone());
        }
        let mut keep = Vec::new();
        for f in monad.assignments(t, bound)? {
            match monad.mu_term(&f) {
                Ok(u) if u.size <= bound => keep.push(f),
                _ => {}
            }
        }
        let v = Arc::new(keep);
        self.per_term.insert((t.clone(), bound), v.clone());
        Ok(v)
    }
}

/// Composition context carrying a substitution cache across many calls.
#[derive(Default)]
pub struct ComposeCtx {
    mu_cache: BTreeMap<(OpTerm, Vec<Vec<OpTerm>>), Arc<Mu>>,
}

impl ComposeCtx {
    pub fn new() -> ComposeCtx {
        ComposeCtx::default()
    }

    fn mu(&mut self, monad: &FamilialMonad, f: &OpAssignment) -> Result<Arc<Mu>, EngineError> {
        let key = (f.base().clone(), f.values().clone());
        if let Some(m) = self.mu_cache.get(&key) {
            return Ok(m.clone());
        }
        let m = Arc::new(monad.mu(f)?);
        self.mu_cache.insert(key, m.clone());
        Ok(m)
    }
}

impl TMulticat {
    pub fn new(
        monad: FamilialMonad,
        bound: usize,
        v0: Arc<Presheaf>,
        arrows: BTreeMap<OpTerm, Vec<Arrow>>,
        identities: Vec<Vec<usize>>,
        compose: ComposeRule,
    ) -> TMulticat {
        TMulticat {
            monad,
            bound,
            v0,
            arrows,
            identities,
            compose,
        }
    }

    pub fn monad(&self) -> &FamilialMonad {
        &self.monad
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn v0(&self) -> &Arc<Presheaf> {
        &self.v0
    }

    pub fn ops(&self) -> impl Iterator<Item = &OpTerm> {
        self.arrows.keys()
    }

    pub fn arrows_at(&self, t: &OpTerm) -> &[Arrow] {
        self.arrows.get(t).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn arrow(&self, r: &ArrowRef) -> &Arrow {
        &self.arrows[&r.0][r.1]
    }

    pub fn identity(&self, c: Obj, cell: usize) -> ArrowRef {
        (self.monad.eta(c), self.identities[c.0][cell])
    }

    /// Replace one arrow's codomain; for sensitivity tests.
    pub fn with_cod(&self, t: &OpTerm, idx: usize, new_cod: usize) -> TMulticat {
        let mut out = self.clone();
        out.arrows.get_mut(t).unwrap()[idx].cod = new_cod;
        out
    }

    /// Drop one arrow entirely; for sensitivity tests. The arrow must not
    /// be the face of any other arrow.
    pub fn without_arrow(&self, t: &OpTerm, idx: usize) -> TMulticat {
        let mut out = self.clone();
        out.arrows.get_mut(t).unwrap().remove(idx);
        for (u, arrows) in out.arrows.iter_mut() {
            for a in arrows {
                for (m, f) in a.faces.iter_mut() {
                    if self.monad.act(*m, u) == *t {
                        assert_ne!(*f, idx, "removed arrow is a face of ({u}, -)");
                        if *f > idx {
                            *f -= 1;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn find_arrow(&self, t: &OpTerm, dom: &[Vec<usize>], cod: Option<usize>) -> Option<usize> {
        self.arrows_at(t).iter().position(|a| {
            a.dom.components().as_slice() == dom && cod.map_or(true, |c| a.cod == c)
        })
    }

    /// Compose an outer arrow with a face-compatible family of inner
    /// arrows, one per arity cell of the outer operation.
    pub fn compose(
        &self,
        outer: &ArrowRef,
        inner: &[ArrowRef],
        ctx: &mut ComposeCtx,
    ) -> Result<ArrowRef, EngineError> {
        let alpha = self.arrow(outer);
        let t = &outer.0;
        let arity = self.monad.arity(t)?;
        let cells = arity.all_cells();
        if inner.len() != cells.len() {
            return Err(EngineError::composability(
                "inner family length differs from the arity",
            ));
        }
        // Assemble the substitution from the inner operations and check the
        // matching and face-compatibility conditions.
        let mut values: Vec<Vec<OpTerm>> = self
            .monad
            .base()
            .objects()
            .map(|_| Vec::new())
            .collect();
        for (k, &(o, i)) in cells.iter().enumerate() {
            let (u, idx) = &inner[k];
            if u.shape() != o {
                return Err(EngineError::composability(format!(
                    "inner arrow at cell ({o:?}, {i}) has op {u} at the wrong shape"
                )));
            }
            let beta = self.arrow(&(u.clone(), *idx));
            if beta.cod != alpha.dom.apply((o, i)) {
                return Err(EngineError::composability(format!(
                    "codomain of inner arrow at cell ({o:?}, {i}) does not match the outer domain"
                )));
            }
            values[o.0].push(u.clone());
        }
        let f = OpAssignment::new(&self.monad, t.clone(), values)?;
        // Face compatibility of the family itself.
        let index_of: BTreeMap<Cell, usize> = cells.iter().copied().zip(0..).collect();
        for m in self.monad.base().morphisms() {
            if self.monad.base().is_identity(m) {
                continue;
            }
            let c = self.monad.base().cod(m);
            for x in 0..arity.card(c) {
                let here = &inner[index_of[&(c, x)]];
                let there = &inner[index_of[&(self.monad.base().dom(m), arity.act(m, x))]];
                let beta = self.arrow(here);
                let expected = (self.monad.act(m, &here.0), beta.faces[&m]);
                if *there != expected {
                    return Err(EngineError::composability(format!(
                        "inner family not closed under the face along {}",
                        self.monad.base().morphism_name(m)
                    )));
                }
            }
        }
        let mu = ctx.mu(&self.monad, &f)?;
        // Pasted domain: push every inner domain along its embedding.
        let target_arity = self.monad.arity(&mu.term)?;
        let mut components: Vec<Vec<Option<usize>>> = self
            .monad
            .base()
            .objects()
            .map(|o| vec![None; target_arity.card(o)])
            .collect();
        for &x in mu.node_cells.iter() {
            let e = mu.embed(x);
            let beta = self.arrow(&inner[index_of[&x]]);
            for o in self.monad.base().objects() {
                for z in 0..e.source().card(o) {
                    let w = e.apply((o, z));
                    let v = beta.dom.apply((o, z));
                    match components[o.0][w] {
                        None => components[o.0][w] = Some(v),
                        Some(prev) if prev == v => {}
                        Some(_) => {
                            return Err(EngineError::composability(
                                "inner domains disagree on a shared face",
                            ))
                        }
                    }
                }
            }
        }
        let components: Vec<Vec<usize>> = components
            .into_iter()
            .map(|col| col.into_iter().map(|v| v.expect("glue is surjective")).collect())
            .collect();
        let pasted = PresheafMap::new(target_arity, self.v0.clone(), components)
            .map_err(|e| EngineError::composability(format!("pasted domain not natural: {e}")))?;
        match &self.compose {
            ComposeRule::ByBoundary => {
                match self.find_arrow(&mu.term, pasted.components(), Some(alpha.cod)) {
                    Some(i) => Ok((mu.term.clone(), i)),
                    None => Err(EngineError::composability(format!(
                        "no composite arrow at {} with the pasted domain and codomain {}",
                        mu.term, alpha.cod
                    ))),
                }
            }
            ComposeRule::Table(tbl) => {
                let key = (outer.clone(), inner.to_vec());
                match tbl.get(&key) {
                    Some(r) => {
                        let res = self.arrow(r);
                        if res.dom.components() != pasted.components() || res.cod != alpha.cod {
                            return Err(EngineError::composability(format!(
                                "table composite at {} has wrong boundary",
                                r.0
                            )));
                        }
                        Ok(r.clone())
                    }
                    None => Err(EngineError::coverage(format!(
                        "composite of ({}, {}) with an inner family is not in the table",
                        outer.0, outer.1
                    ))),
                }
            }
        }
    }

    /// All face-compatible inner families for an outer arrow, with values
    /// of size `<= bound` and bounded composite.
    ///
    /// Enumeration runs per bounded substitution: with the operation at
    /// every cell fixed, only arrows at that operation with a matching
    /// codomain remain, which keeps the search proportional to the number
    /// of valid configurations.
    pub fn inner_families(
        &self,
        outer: &ArrowRef,
        bound: usize,
    ) -> Result<Vec<Vec<ArrowRef>>, EngineError> {
        let mut cache = AssignCache::new();
        self.inner_families_cached(outer, bound, &mut cache)
    }

    pub fn inner_families_cached(
        &self,
        outer: &ArrowRef,
        bound: usize,
        cache: &mut AssignCache,
    ) -> Result<Vec<Vec<ArrowRef>>, EngineError> {
        let alpha = self.arrow(outer);
        let arity = self.monad.arity(&outer.0)?;
        let base = self.monad.base().clone();
        let order = base.topo_order()?;
        let mut cells: Vec<Cell> = Vec::new();
        for &o in &order {
            for i in 0..arity.card(o) {
                cells.push((o, i));
            }
        }
        let canonical = arity.all_cells();
        let pos_of: BTreeMap<Cell, usize> = cells.iter().copied().zip(0..).collect();
        let mut checks: Vec<Vec<(Mor, usize)>> = vec![Vec::new(); cells.len()];
        for m in base.morphisms() {
            if base.is_identity(m) {
                continue;
            }
            let c = base.cod(m);
            for x in 0..arity.card(c) {
                let here = pos_of[&(c, x)];
                let face = pos_of[&(base.dom(m), arity.act(m, x))];
                checks[here].push((m, face));
            }
        }
        let assignments = cache.get(&self.monad, &outer.0, bound)?;
        let mut out = Vec::new();
        for f in assignments.iter() {
            // Candidates per cell: arrows at the assigned operation with a
            // matching codomain.
            let cands: Vec<Vec<ArrowRef>> = cells
                .iter()
                .map(|&(o, i)| {
                    let u = f.value((o, i));
                    self.arrows_at(u)
                        .iter()
                        .enumerate()
                        .filter(|(_, arr)| arr.cod == alpha.dom.apply((o, i)))
                        .map(|(idx, _)| (u.clone(), idx))
                        .collect()
                })
                .collect();
            if cands.iter().any(|c| c.is_empty()) {
                continue;
            }
            if cells.is_empty() {
                out.push(Vec::new());
                continue;
            }
            let mut chosen: Vec<usize> = Vec::new();
            let mut pos = 0usize;
            let mut cursor = vec![0usize; cells.len() + 1];
            loop {
                if pos == cells.len() {
                    let mut family = vec![None; cells.len()];
                    for (k, &cell) in cells.iter().enumerate() {
                        let slot = canonical.iter().position(|&c| c == cell).unwrap();
                        family[slot] = Some(cands[k][chosen[k]].clone());
                    }
                    out.push(family.into_iter().map(|v| v.unwrap()).collect());
                    pos -= 1;
                    chosen.pop();
                    continue;
                }
                let mut v = cursor[pos];
                let mut placed = false;
                while v < cands[pos].len() {
                    let cand = &cands[pos][v];
                    let ok = checks[pos].iter().all(|&(m, face)| {
                        let beta = self.arrow(cand);
                        let expected = (self.monad.act(m, &cand.0), beta.faces[&m]);
                        cands[face][chosen[face]] == expected
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
        }
        Ok(out)
    }

    /// The substitution carried by an inner family.
    pub fn family_assignment(
        &self,
        t: &OpTerm,
        family: &[ArrowRef],
    ) -> Result<OpAssignment, EngineError> {
        let arity = self.monad.arity(t)?;
        let mut values: Vec<Vec<OpTerm>> = self
            .monad
            .base()
            .objects()
            .map(|_| Vec::new())
            .collect();
        for (k, &(o, _)) in arity.all_cells().iter().enumerate() {
            values[o.0].push(family[k].0.clone());
        }
        OpAssignment::new(&self.monad, t.clone(), values)
    }

    /// The identity family on the domain of an arrow.
    pub fn identity_family(&self, outer: &ArrowRef) -> Result<Vec<ArrowRef>, EngineError> {
        let alpha = self.arrow(outer);
        let arity = self.monad.arity(&outer.0)?;
        Ok(arity
            .all_cells()
            .iter()
            .map(|&(o, i)| self.identity(o, alpha.dom.apply((o, i))))
            .collect())
    }

    /// The family of faces of `h` indexed by the unit arity of its shape,
    /// used to postcompose `h` with a unit-shaped arrow.
    pub fn face_family(&self, h: &ArrowRef) -> Result<Vec<ArrowRef>, EngineError> {
        let c = h.0.shape();
        let e = self.monad.eta(c);
        let ar = self.monad.arity(&e)?;
        let phi = self.monad.eta_iso(c)?;
        let rep = crate::fincat::yoneda(self.monad.base(), c);
        let mut fam = Vec::new();
        for &(o, z) in ar.all_cells().iter() {
            let m = rep.cell_mor[o.0][phi.apply((o, z))];
            if self.monad.base().is_identity(m) {
                fam.push(h.clone());
            } else {
                let beta = self.arrow(h);
                fam.push((self.monad.act(m, &h.0), beta.faces[&m]));
            }
        }
        Ok(fam)
    }

    /// Postcompose `h` with a unit-shaped arrow `e` out of its codomain.
    pub fn eta_postcompose(
        &self,
        e: &ArrowRef,
        h: &ArrowRef,
        ctx: &mut ComposeCtx,
    ) -> Result<ArrowRef, EngineError> {
        self.compose(e, &self.face_family(h)?, ctx)
    }
}

/// Exhaustively verify the multicategory axioms up to the bound: structural
/// face coherence, well-formed identities, both unit laws, and
/// associativity over composable configurations.
pub fn check_multicat(v: &TMulticat, bound: usize) -> Result<Report, EngineError> {
    let bound = bound.min(v.bound());
    let mut report = Report::new(
        format!("multicat[{} on {} cells]", v.monad().name(), v.v0().size()),
        bound,
    );
    let base = v.monad().base().clone();
    let mut ctx = ComposeCtx::new();
    let mut acache = AssignCache::new();

    // Structural: domains and faces.
    for c in base.objects() {
        for t in v.monad().ops_at(c, bound)? {
            let arity = v.monad().arity(&t)?;
            for (i, alpha) in v.arrows_at(&t).iter().enumerate() {
                if **alpha.dom.source() != *arity || alpha.dom.validate().is_err() {
                    report.fail("arrow domain", format!("arrow {i} at {t} has a bad domain"));
                    continue;
                }
                if alpha.cod >= v.v0().card(c) {
                    report.fail("arrow codomain", format!("arrow {i} at {t} has no codomain"));
                    continue;
                }
                let mut structural_ok = true;
                for m in base.morphisms() {
                    if base.is_identity(m) || base.cod(m) != c {
                        continue;
                    }
                    let tm = v.monad().act(m, &t);
                    let Some(&fi) = alpha.faces.get(&m) else {
                        report.fail(
                            "arrow faces",
                            format!("arrow {i} at {t} lacks a face along {}", base.morphism_name(m)),
                        );
                        structural_ok = false;
                        continue;
                    };
                    if fi >= v.arrows_at(&tm).len() {
                        report.fail("arrow faces", format!("face of arrow {i} at {t} out of range"));
                        structural_ok = false;
                        continue;
                    }
                    let beta = &v.arrows_at(&tm)[fi];
                    let expected_dom = alpha.dom.compose(&v.monad().arity_face(m, &t)?);
                    if beta.dom.components() != expected_dom.components()
                        || beta.cod != v.v0().act(m, alpha.cod)
                    {
                        report.fail(
                            "face compatibility",
                            format!(
                                "faces of dom/cod of arrow {i} at {t} differ from dom/cod of its face along {}",
                                base.morphism_name(m)
                            ),
                        );
                        structural_ok = false;
                    }
                }
                if structural_ok {
                    report.pass();
                }
            }
        }
    }

    // Identities.
    for c in base.objects() {
        let e = v.monad().eta(c);
        for a in 0..v.v0().card(c) {
            let id = v.identity(c, a);
            if id.1 >= v.arrows_at(&e).len() {
                return Err(EngineError::coverage(format!(
                    "missing identity arrow for cell {a} at {}",
                    base.object_name(c)
                )));
            }
            let arr = v.arrow(&id);
            let tr = transpose_cell(v.monad(), v.v0(), c, a)?;
            if arr.dom.components() != tr.components() || arr.cod != a {
                report.fail(
                    "identity boundary",
                    format!("identity of cell {a} at {} has wrong dom/cod", base.object_name(c)),
                );
            } else {
                report.pass();
            }
        }
    }

    // Unit laws and associativity.
    for c in base.objects() {
        for t in v.monad().ops_at(c, bound)? {
            for i in 0..v.arrows_at(&t).len() {
                let alpha = (t.clone(), i);
                // Right unit: identities plugged into alpha.
                match v.compose(&alpha, &v.identity_family(&alpha)?, &mut ctx) {
                    Ok(r) if r == alpha => report.pass(),
                    Ok(r) => report.fail(
                        "right unit",
                        format!("({t}, {i}) composed with identities gives ({}, {})", r.0, r.1),
                    ),
                    Err(EngineError::Coverage(msg)) => return Err(EngineError::Coverage(msg)),
                    Err(e) => report.fail("right unit", format!("({t}, {i}): {e}")),
                }
                // Left unit: the identity on the codomain composed with the
                // face family of alpha.
                let idc = v.identity(c, v.arrow(&alpha).cod);
                match v.eta_postcompose(&idc, &alpha, &mut ctx) {
                    Ok(r) if r == alpha => report.pass(),
                    Ok(r) => report.fail(
                        "left unit",
                        format!("id ∘ ({t}, {i}) gives ({}, {})", r.0, r.1),
                    ),
                    Err(EngineError::Coverage(msg)) => return Err(EngineError::Coverage(msg)),
                    Err(e) => report.fail("left unit", format!("({t}, {i}): {e}")),
                }
                // Associativity over all bounded double configurations.
                for beta in v.inner_families_cached(&alpha, bound, &mut acache)? {
                    let rho = match v.compose(&alpha, &beta, &mut ctx) {
                        Ok(r) => r,
                        Err(EngineError::Coverage(msg)) => {
                            return Err(EngineError::Coverage(msg))
                        }
                        Err(e) => {
                            report.fail(
                                "composition closure",
                                format!("({t}, {i}) with a valid family: {e}"),
                            );
                            continue;
                        }
                    };
                    report.pass();
                    let f = v.family_assignment(&t, &beta)?;
                    let mu1 = ctx.mu(v.monad(), &f)?;
                    for gamma in v.inner_families_cached(&rho, bound, &mut acache)? {
                        let lhs = match v.compose(&rho, &gamma, &mut ctx) {
                            Ok(r) => r,
                            Err(EngineError::Coverage(msg)) => {
                                return Err(EngineError::Coverage(msg))
                            }
                            Err(e) => {
                                report.fail(
                                    "composition closure",
                                    format!("composite of ({t}, {i}): {e}"),
                                );
                                continue;
                            }
                        };
                        // delta_x = beta_x composed with gamma over the
                        // embedded cells.
                        let t_arity = v.monad().arity(&t)?;
                        let t_cells = t_arity.all_cells();
                        let mu_cells = v.monad().arity(&mu1.term)?.all_cells();
                        let mut delta = Vec::with_capacity(t_cells.len());
                        let mut ok = true;
                        for (k, _) in t_cells.iter().enumerate() {
                            let x = mu1.node_cells[k];
                            debug_assert_eq!(x, t_cells[k]);
                            let e = mu1.embed(x);
                            let sub: Vec<ArrowRef> = e
                                .source()
                                .all_cells()
                                .iter()
                                .map(|&(o, z)| {
                                    let w = e.apply((o, z));
                                    let pos = mu_cells
                                        .iter()
                                        .position(|&cc| cc == (o, w))
                                        .expect("embedded cell exists");
                                    gamma[pos].clone()
                                })
                                .collect();
                            match v.compose(&beta[k], &sub, &mut ctx) {
                                Ok(d) => delta.push(d),
                                Err(_) => {
                                    ok = false;
                                    break;
                                }
                            }
                        }
                        if !ok {
                            report.fail(
                                "associativity",
                                format!("inner composites of ({t}, {i}) undefined"),
                            );
                            continue;
                        }
                        match v.compose(&alpha, &delta, &mut ctx) {
                            Ok(rhs) if rhs == lhs => report.pass(),
                            Ok(rhs) => report.fail(
                                "associativity",
                                format!(
                                    "(({t}, {i}) ∘ β) ∘ γ = ({}, {}) but ({t}, {i}) ∘ (β ∘ γ) = ({}, {})",
                                    lhs.0, lhs.1, rhs.0, rhs.1
                                ),
                            ),
                            Err(e) => report.fail(
                                "associativity",
                                format!("({t}, {i}) ∘ (β ∘ γ) undefined: {e}"),
                            ),
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// The multicategory of composition witnesses of an algebra: one arrow per
/// attaching map, with codomain its evaluation.
pub fn m_of_algebra(a: &FiniteAlgebra, bound: usize) -> Result<TMulticat, EngineError> {
    let bound = bound.min(a.bound());
    let gate = a.check(bound)?;
    if !gate.ok() {
        return Err(EngineError::input(format!(
            "algebra fails its laws; refusing to build witnesses:\n{}",
            gate.render_text()
        )));
    }
    let monad = a.monad().clone();
    let v0 = a.carrier().clone();
    let mut arrows: BTreeMap<OpTerm, Vec<Arrow>> = BTreeMap::new();
    for c in monad.base().objects() {
        for t in monad.ops_at(c, bound)? {
            let arity = monad.arity(&t)?;
            let maps = hom_set(&arity, &v0)?;
            let list: Vec<Arrow> = maps
                .iter()
                .map(|m| {
                    Ok(Arrow {
                        dom: m.clone(),
                        cod: a.eval(&t, m)?,
                        faces: BTreeMap::new(),
                    })
                })
                .collect::<Result<_, EngineError>>()?;
            arrows.insert(t, list);
        }
    }
    // Faces: restriction of the attaching map.
    let keys: Vec<OpTerm> = arrows.keys().cloned().collect();
    let mut faces_by_key: BTreeMap<OpTerm, Vec<BTreeMap<Mor, usize>>> = BTreeMap::new();
    for t in &keys {
        let c = t.shape();
        let mut per_arrow = vec![BTreeMap::new(); arrows[t].len()];
        for m in monad.base().morphisms() {
            if monad.base().is_identity(m) || monad.base().cod(m) != c {
                continue;
            }
            let tm = monad.act(m, t);
            let face = monad.arity_face(m, t)?;
            for (i, alpha) in arrows[t].iter().enumerate() {
                let restricted = alpha.dom.compose(&face);
                let j = arrows[&tm]
                    .iter()
                    .position(|b| b.dom.components() == restricted.components())
                    .expect("restricted attachment is an attachment");
                per_arrow[i].insert(m, j);
            }
        }
        faces_by_key.insert(t.clone(), per_arrow);
    }
    for (t, per_arrow) in faces_by_key {
        let list = arrows.get_mut(&t).unwrap();
        for (i, f) in per_arrow.into_iter().enumerate() {
            list[i].faces = f;
        }
    }
    // Identities: the arrow attached along the unit transpose.
    let mut identities = Vec::new();
    for c in monad.base().objects() {
        let e = monad.eta(c);
        let mut col = Vec::new();
        for x in 0..v0.card(c) {
            let tr = transpose_cell(&monad, &v0, c, x)?;
            let i = arrows[&e]
                .iter()
                .position(|arr| arr.dom.components() == tr.components())
                .expect("unit attachment exists");
            col.push(i);
        }
        identities.push(col);
    }
    Ok(TMulticat {
        monad,
        bound,
        v0,
        arrows,
        identities,
        compose: ComposeRule::ByBoundary,
    })
}

/// The terminal multicategory: one cell per shape, one arrow per operation.
pub fn terminal_multicat(monad: &FamilialMonad, bound: usize) -> Result<TMulticat, EngineError> {
    let v0 = Arc::new(Presheaf::terminal(monad.base().clone()));
    let mut arrows = BTreeMap::new();
    let mut identities = Vec::new();
    for c in monad.base().objects() {
        identities.push(vec![0; 1]);
        for t in monad.ops_at(c, bound)? {
            let arity = monad.arity(&t)?;
            let dom = hom_set(&arity, &v0)?.pop().expect("terminal target");
            let mut faces = BTreeMap::new();
            for m in monad.base().morphisms() {
                if !monad.base().is_identity(m) && monad.base().cod(m) == c {
                    faces.insert(m, 0);
                }
            }
            arrows.insert(
                t,
                vec![Arrow {
                    dom,
                    cod: 0,
                    faces,
                }],
            );
        }
    }
    Ok(TMulticat {
        monad: monad.clone(),
        bound,
        v0,
        arrows,
        identities,
        compose: ComposeRule::ByBoundary,
    })
}

/// Restrict a multicategory to the kept shapes of a graded monad.
pub fn restrict_multicat(v: &TMulticat, r: &Restriction) -> Result<TMulticat, EngineError> {
    let restricted = restrict_monad(v.monad(), r);
    let v0 = r.u_upper(v.v0());
    let mut arrows: BTreeMap<OpTerm, Vec<Arrow>> = BTreeMap::new();
    for d in r.sub().objects() {
        for t in restricted.ops_at(d, v.bound())? {
            let ambient_t = OpTerm {
                monad: v.monad().name().clone(),
                shape: r.to_ambient(d).0,
                payload: t.payload.clone(),
                size: t.size,
            };
            let arity = restricted.arity(&t)?;
            let list: Vec<Arrow> = v
                .arrows_at(&ambient_t)
                .iter()
                .map(|alpha| {
                    let components: Vec<Vec<usize>> = r
                        .sub()
                        .objects()
                        .map(|dd| alpha.dom.components()[r.to_ambient(dd).0].clone())
                        .collect();
                    let dom = PresheafMap::new_unchecked(arity.clone(), v0.clone(), components);
                    let faces = alpha
                        .faces
                        .iter()
                        .filter_map(|(m, &i)| r.mor_from_ambient(*m).map(|dm| (dm, i)))
                        .collect();
                    Arrow {
                        dom,
                        cod: alpha.cod,
                        faces,
                    }
                })
                .collect();
            arrows.insert(t, list);
        }
    }
    let identities = r
        .sub()
        .objects()
        .map(|d| {
            let od = r.to_ambient(d);
            (0..v.v0().card(od))
                .map(|x| v.identity(od, x).1)
                .collect()
        })
        .collect();
    let compose = match &v.compose {
        ComposeRule::ByBoundary => ComposeRule::ByBoundary,
        ComposeRule::Table(tbl) => {
            let translate = |(t, i): &ArrowRef| -> Option<ArrowRef> {
                let d = r.from_ambient(t.shape())?;
                Some((
                    OpTerm {
                        monad: format!("{}@{}", v.monad().name(), r.sub().name()).into(),
                        shape: d.0,
                        payload: t.payload.clone(),
                        size: t.size,
                    },
                    *i,
                ))
            };
            let mut out = BTreeMap::new();
            for ((outer, fam), res) in tbl {
                let (Some(o), Some(rr)) = (translate(outer), translate(res)) else {
                    continue;
                };
                let fam: Option<Vec<ArrowRef>> = fam.iter().map(|a| translate(a)).collect();
                if let Some(fam) = fam {
                    out.insert((o, fam), rr);
                }
            }
            ComposeRule::Table(out)
        }
    };
    Ok(TMulticat {
        monad: restricted,
        bound: v.bound(),
        v0,
        arrows,
        identities,
        compose,
    })
}

// ---------------------------------------------------------------------------
// detectors

/// One cell and one arrow per kept shape and operation.
pub fn is_trivial(v: &TMulticat, r: &Restriction, bound: usize) -> Result<bool, EngineError> {
    for d in v.monad().base().objects() {
        if !r.is_kept(d) {
            continue;
        }
        if v.v0().card(d) != 1 {
            return Ok(false);
        }
        for t in v.monad().ops_at(d, bound.min(v.bound()))? {
            if v.arrows_at(&t).len() != 1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// When every kept operation has exactly one arrow per domain, the
/// codomains assemble into an algebra on the kept cells; returns it after
/// validating its laws.
pub fn is_discrete(
    v: &TMulticat,
    r: &Restriction,
    bound: usize,
) -> Result<Option<FiniteAlgebra>, EngineError> {
    let bound = bound.min(v.bound());
    let restricted = restrict_monad(v.monad(), r);
    let carrier = r.u_upper(v.v0());
    let mut table = Vec::new();
    for d in r.sub().objects() {
        for t in restricted.ops_at(d, bound)? {
            let ambient_t = OpTerm {
                monad: v.monad().name().clone(),
                shape: r.to_ambient(d).0,
                payload: t.payload.clone(),
                size: t.size,
            };
            let arity = restricted.arity(&t)?;
            for m in hom_set(&arity, &carrier)? {
                // Arrows with this domain, read through the kept cells.
                let matching: Vec<&Arrow> = v
                    .arrows_at(&ambient_t)
                    .iter()
                    .filter(|alpha| {
                        r.sub().objects().all(|dd| {
                            alpha.dom.components()[r.to_ambient(dd).0] == m.components()[dd.0]
                        })
                    })
                    .collect();
                if matching.len() != 1 {
                    return Ok(None);
                }
                table.push((t.clone(), m.components().clone(), matching[0].cod));
            }
        }
    }
    let mut eval = BTreeMap::new();
    for (t, comps, v0) in table {
        eval.insert((t, comps), v0);
    }
    let algebra = FiniteAlgebra::from_table(restricted, carrier, bound, eval);
    if algebra.check(bound)?.ok() {
        Ok(Some(algebra))
    } else {
        Ok(None)
    }
}

/// Arrows with domain `a` through which every arrow with domain `a`
/// factors uniquely via a unit-shaped arrow.
pub fn universal_arrows(
    v: &TMulticat,
    t: &OpTerm,
    dom: &PresheafMap,
    ctx: &mut ComposeCtx,
) -> Result<Vec<usize>, EngineError> {
    let c = t.shape();
    let e = v.monad().eta(c);
    let with_dom: Vec<usize> = v
        .arrows_at(t)
        .iter()
        .enumerate()
        .filter(|(_, a)| a.dom.components() == dom.components())
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for &h in &with_dom {
        let href = (t.clone(), h);
        let h_cod = v.arrow(&href).cod;
        // Unit arrows out of cod(h).
        let tr = transpose_cell(v.monad(), v.v0(), c, h_cod)?;
        let unit_candidates: Vec<usize> = v
            .arrows_at(&e)
            .iter()
            .enumerate()
            .filter(|(_, a)| a.dom.components() == tr.components())
            .map(|(i, _)| i)
            .collect();
        let mut universal = true;
        for &g in &with_dom {
            let gref = (t.clone(), g);
            let mut factorings = 0;
            for &u in &unit_candidates {
                let uref = (e.clone(), u);
                if let Ok(res) = v.eta_postcompose(&uref, &href, ctx) {
                    if res == gref {
                        factorings += 1;
                    }
                }
            }
            if factorings != 1 {
                universal = false;
                break;
            }
        }
        if universal {
            out.push(h);
        }
    }
    Ok(out)
}

/// A uniform choice of universal arrows, keyed by operation and domain.
pub type Choice = BTreeMap<(OpTerm, Vec<Vec<usize>>), usize>;

/// Representability over a restriction: every kept in-bound domain has at
/// least one universal arrow, and universal arrows are closed under
/// composition with kept shapes.
pub fn is_representable(
    v: &TMulticat,
    r: &Restriction,
    bound: usize,
) -> Result<Report, EngineError> {
    let bound = bound.min(v.bound());
    let mut report = Report::new(
        format!("representable[{} over {}]", v.monad().name(), r.sub().name()),
        bound,
    );
    let mut ctx = ComposeCtx::new();
    let mut acache = AssignCache::new();
    let mut universal: BTreeMap<(OpTerm, Vec<Vec<usize>>), Vec<usize>> = BTreeMap::new();
    for d in v.monad().base().objects() {
        if !r.is_kept(d) {
            continue;
        }
        for t in v.monad().ops_at(d, bound)? {
            let arity = v.monad().arity(&t)?;
            for m in hom_set(&arity, v.v0())? {
                let us = universal_arrows(v, &t, &m, &mut ctx)?;
                if us.is_empty() {
                    report.fail(
                        "universal existence",
                        format!("no universal arrow at {t} with domain {:?}", m.components()),
                    );
                } else {
                    report.pass();
                }
                universal.insert((t.clone(), m.components().clone()), us);
            }
        }
    }
    if !report.ok() {
        return Ok(report);
    }
    // Closure under composition within the kept shapes.
    for ((t, _), hs) in universal.clone() {
        for h in hs {
            let href = (t.clone(), h);
            for beta in v.inner_families_cached(&href, bound, &mut acache)? {
                // Only configurations of kept-shape universal arrows count.
                let all_universal = beta.iter().all(|(u, i)| {
                    r.is_kept(u.shape())
                        && universal
                            .get(&(u.clone(), v.arrow(&(u.clone(), *i)).dom.components().clone()))
                            .map_or(false, |us| us.contains(i))
                });
                if !all_universal {
                    continue;
                }
                match v.compose(&href, &beta, &mut ctx) {
                    Ok(res) => {
                        if !r.is_kept(res.0.shape()) {
                            continue;
                        }
                        let key = (res.0.clone(), v.arrow(&res).dom.components().clone());
                        let closed = universal.get(&key).map_or(false, |us| us.contains(&res.1));
                        if closed {
                            report.pass();
                        } else {
                            report.fail(
                                "universal closure",
                                format!("composite ({}, {}) of universal arrows is not universal", res.0, res.1),
                            );
                        }
                    }
                    Err(e) => report.fail("universal closure", format!("composite undefined: {e}")),
                }
            }
        }
    }
    Ok(report)
}

/// Uniform representability: the supplied choice is universal and closed
/// under identities and composition. On success the induced algebra on the
/// kept cells is returned, validated.
pub fn is_uniformly_representable(
    v: &TMulticat,
    r: &Restriction,
    choice: &Choice,
    bound: usize,
) -> Result<(Report, Option<FiniteAlgebra>), EngineError> {
    let bound = bound.min(v.bound());
    let mut report = Report::new(
        format!(
            "uniformly-representable[{} over {}]",
            v.monad().name(),
            r.sub().name()
        ),
        bound,
    );
    let mut ctx = ComposeCtx::new();
    let mut acache = AssignCache::new();
    for d in v.monad().base().objects() {
        if !r.is_kept(d) {
            continue;
        }
        for t in v.monad().ops_at(d, bound)? {
            let arity = v.monad().arity(&t)?;
            for m in hom_set(&arity, v.v0())? {
                let key = (t.clone(), m.components().clone());
                let Some(&h) = choice.get(&key) else {
                    report.fail(
                        "choice coverage",
                        format!("no chosen arrow at {t} with domain {:?}", m.components()),
                    );
                    continue;
                };
                let us = universal_arrows(v, &t, &m, &mut ctx)?;
                if us.contains(&h) {
                    report.pass();
                } else {
                    report.fail(
                        "choice universality",
                        format!("chosen arrow ({t}, {h}) is not universal"),
                    );
                }
            }
        }
    }
    if !report.ok() {
        return Ok((report, None));
    }
    // Closed under identities.
    for d in v.monad().base().objects() {
        if !r.is_kept(d) {
            continue;
        }
        let e = v.monad().eta(d);
        for a in 0..v.v0().card(d) {
            let tr = transpose_cell(v.monad(), v.v0(), d, a)?;
            let chosen = choice.get(&(e.clone(), tr.components().clone()));
            if chosen == Some(&v.identity(d, a).1) {
                report.pass();
            } else {
                report.fail(
                    "choice identities",
                    format!("chosen unit arrow at cell {a} of {} is not the identity", d.0),
                );
            }
        }
    }
    // Closed under composition.
    for ((t, domc), &h) in choice {
        if !r.is_kept(t.shape()) {
            continue;
        }
        if t.size > bound {
            continue;
        }
        let href = (t.clone(), h);
        for beta in v.inner_families_cached(&href, bound, &mut acache)? {
            let all_chosen = beta.iter().all(|(u, i)| {
                r.is_kept(u.shape())
                    && choice.get(&(u.clone(), v.arrow(&(u.clone(), *i)).dom.components().clone()))
                        == Some(i)
            });
            if !all_chosen {
                continue;
            }
            match v.compose(&href, &beta, &mut ctx) {
                Ok(res) => {
                    if !r.is_kept(res.0.shape()) {
                        continue;
                    }
                    let key = (res.0.clone(), v.arrow(&res).dom.components().clone());
                    if choice.get(&key) == Some(&res.1) {
                        report.pass();
                    } else {
                        report.fail(
                            "choice closure",
                            format!(
                                "composite of chosen arrows out of {:?} is not the chosen arrow",
                                domc
                            ),
                        );
                    }
                }
                Err(e) => report.fail("choice closure", format!("composite undefined: {e}")),
            }
        }
    }
    if !report.ok() {
        return Ok((report, None));
    }
    // Induced algebra on the kept cells.
    let restricted = restrict_monad(v.monad(), r);
    let carrier = r.u_upper(v.v0());
    let mut eval = BTreeMap::new();
    for d in r.sub().objects() {
        for t in restricted.ops_at(d, bound)? {
            let ambient_t = OpTerm {
                monad: v.monad().name().clone(),
                shape: r.to_ambient(d).0,
                payload: t.payload.clone(),
                size: t.size,
            };
            let arity = restricted.arity(&t)?;
            for m in hom_set(&arity, &carrier)? {
                // Extend kept components to the ambient arity.
                let mut ambient: Vec<Vec<usize>> =
                    vec![Vec::new(); v.monad().base().object_count()];
                for dd in r.sub().objects() {
                    ambient[r.to_ambient(dd).0] = m.components()[dd.0].clone();
                }
                let Some(&h) = choice.get(&(ambient_t.clone(), ambient.clone())) else {
                    return Err(EngineError::coverage(format!(
                        "choice missing for {ambient_t} while inducing the algebra"
                    )));
                };
                eval.insert(
                    (t.clone(), m.components().clone()),
                    v.arrow(&(ambient_t.clone(), h)).cod,
                );
            }
        }
    }
    let algebra = FiniteAlgebra::from_table(restricted, carrier, bound, eval);
    let sub = algebra.check(bound)?;
    if sub.ok() {
        report.note(format!(
            "induced algebra on the kept cells passes its laws ({} instances)",
            sub.checked
        ));
        Ok((report, Some(algebra)))
    } else {
        report.absorb("induced algebra", sub);
        Ok((report, None))
    }
}

/// The all-arrows choice of a discrete-like multicategory: valid when each
/// domain has exactly one arrow.
pub fn unique_arrow_choice(v: &TMulticat, bound: usize) -> Result<Choice, EngineError> {
    let mut out = BTreeMap::new();
    for c in v.monad().base().objects() {
        for t in v.monad().ops_at(c, bound.min(v.bound()))? {
            for (i, a) in v.arrows_at(&t).iter().enumerate() {
                let key = (t.clone(), a.dom.components().clone());
                if out.insert(key, i).is_some() {
                    return Err(EngineError::input(format!(
                        "multiple arrows share a domain at {t}; no unique choice"
                    )));
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// multifunctors and transformations

/// A map of multicategories over the same monad: a cell map plus per-term
/// arrow maps.
#[derive(Clone)]
pub struct Multifunctor {
    pub source: TMulticat,
    pub target: TMulticat,
    pub obj: PresheafMap,
    /// Per operation term, the image index of each source arrow.
    pub arrows: BTreeMap<OpTerm, Vec<usize>>,
}

impl Multifunctor {
    pub fn identity(v: &TMulticat) -> Multifunctor {
        let arrows = v
            .ops()
            .map(|t| (t.clone(), (0..v.arrows_at(t).len()).collect()))
            .collect();
        Multifunctor {
            source: v.clone(),
            target: v.clone(),
            obj: PresheafMap::identity(v.v0()),
            arrows,
        }
    }

    pub fn image(&self, r: &ArrowRef) -> Option<ArrowRef> {
        self.arrows
            .get(&r.0)
            .and_then(|v| v.get(r.1))
            .map(|&i| (r.0.clone(), i))
    }
}

/// Composite `g ∘ f` of multifunctors; the caller guarantees that the
/// target of `f` is the source of `g`.
pub fn compose_multifunctors(g: &Multifunctor, f: &Multifunctor) -> Multifunctor {
    let obj = g.obj.compose(&f.obj);
    let arrows = f
        .arrows
        .iter()
        .map(|(t, col)| {
            (
                t.clone(),
                col.iter().map(|&i| g.arrows[t][i]).collect(),
            )
        })
        .collect();
    Multifunctor {
        source: f.source.clone(),
        target: g.target.clone(),
        obj,
        arrows,
    }
}

/// Verify a multifunctor commutes with domains, codomains, faces,
/// identities, and composition, up to the bound.
pub fn check_multifunctor(f: &Multifunctor, bound: usize) -> Result<Report, EngineError> {
    let bound = bound.min(f.source.bound()).min(f.target.bound());
    let mut report = Report::new("multifunctor", bound);
    if f.source.monad().name() != f.target.monad().name() {
        return Err(EngineError::input(
            "multifunctor between different monads",
        ));
    }
    let base = f.source.monad().base().clone();
    let mut ctx = ComposeCtx::new();
    let mut acache = AssignCache::new();
    for c in base.objects() {
        for t in f.source.monad().ops_at(c, bound)? {
            for i in 0..f.source.arrows_at(&t).len() {
                let alpha = (t.clone(), i);
                let Some(img) = f.image(&alpha) else {
                    return Err(EngineError::coverage(format!(
                        "no image for arrow ({t}, {i})"
                    )));
                };
                if img.1 >= f.target.arrows_at(&t).len() {
                    return Err(EngineError::coverage(format!(
                        "image of ({t}, {i}) out of range"
                    )));
                }
                let a = f.source.arrow(&alpha);
                let b = f.target.arrow(&img);
                let pushed = f.obj.compose(&a.dom);
                if b.dom.components() != pushed.components() {
                    report.fail("domains", format!("image of ({t}, {i}) has wrong domain"));
                } else if b.cod != f.obj.apply((c, a.cod)) {
                    report.fail("codomains", format!("image of ({t}, {i}) has wrong codomain"));
                } else {
                    report.pass();
                }
                for (m, &fi) in &a.faces {
                    let tm = f.source.monad().act(m.to_owned(), &t);
                    let lhs = f.image(&(tm.clone(), fi));
                    let rhs = b.faces.get(m).map(|&j| (tm.clone(), j));
                    if lhs == rhs && lhs.is_some() {
                        report.pass();
                    } else {
                        report.fail(
                            "faces",
                            format!(
                                "image of the face of ({t}, {i}) along {} differs",
                                base.morphism_name(*m)
                            ),
                        );
                    }
                }
            }
        }
        // Identities.
        for x in 0..f.source.v0().card(c) {
            let id = f.source.identity(c, x);
            let expected = f.target.identity(c, f.obj.apply((c, x)));
            if f.image(&id) == Some(expected) {
                report.pass();
            } else {
                report.fail(
                    "identities",
                    format!("image of the identity at cell {x} of {} differs", c.0),
                );
            }
        }
    }
    // Composition preservation.
    for c in base.objects() {
        for t in f.source.monad().ops_at(c, bound)? {
            for i in 0..f.source.arrows_at(&t).len() {
                let alpha = (t.clone(), i);
                for beta in f.source.inner_families_cached(&alpha, bound, &mut acache)? {
                    let Ok(src) = f.source.compose(&alpha, &beta, &mut ctx) else {
                        continue;
                    };
                    let img_alpha = f.image(&alpha).unwrap();
                    let img_beta: Vec<ArrowRef> =
                        beta.iter().map(|r| f.image(r).unwrap()).collect();
                    match f.target.compose(&img_alpha, &img_beta, &mut ctx) {
                        Ok(tgt) => {
                            if f.image(&src) == Some(tgt) {
                                report.pass();
                            } else {
                                report.fail(
                                    "composition",
                                    format!("image of a composite of ({t}, {i}) differs"),
                                );
                            }
                        }
                        Err(e) => report.fail(
                            "composition",
                            format!("image family of ({t}, {i}) does not compose: {e}"),
                        ),
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Enumerate every multifunctor between two multicategories, by brute
/// force over cell maps and arrow images.
pub fn enumerate_multifunctors(
    source: &TMulticat,
    target: &TMulticat,
    bound: usize,
) -> Result<Vec<Multifunctor>, EngineError> {
    let mut out = Vec::new();
    for obj in hom_set(source.v0(), target.v0())? {
        // Candidate images per arrow, filtered by boundary compatibility.
        let mut slots: Vec<(OpTerm, usize, Vec<usize>)> = Vec::new();
        let mut feasible = true;
        for c in source.monad().base().objects() {
            for t in source.monad().ops_at(c, bound)? {
                for (i, a) in source.arrows_at(&t).iter().enumerate() {
                    let pushed = obj.compose(&a.dom);
                    let cod = obj.apply((c, a.cod));
                    let cands: Vec<usize> = target
                        .arrows_at(&t)
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| {
                            b.dom.components() == pushed.components() && b.cod == cod
                        })
                        .map(|(j, _)| j)
                        .collect();
                    if cands.is_empty() {
                        feasible = false;
                    }
                    slots.push((t.clone(), i, cands));
                }
                if !feasible {
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        // Backtrack over slot choices.
        let mut chosen = vec![0usize; slots.len()];
        let mut pos = 0usize;
        let mut cursor = vec![0usize; slots.len() + 1];
        loop {
            if pos == slots.len() {
                let mut arrows: BTreeMap<OpTerm, Vec<usize>> = BTreeMap::new();
                for (k, (t, _, cands)) in slots.iter().enumerate() {
                    arrows
                        .entry(t.clone())
                        .or_default()
                        .push(cands[chosen[k]]);
                }
                let cand = Multifunctor {
                    source: source.clone(),
                    target: target.clone(),
                    obj: obj.clone(),
                    arrows,
                };
                if check_multifunctor(&cand, bound)?.ok() {
                    out.push(cand);
                }
                if pos == 0 {
                    break;
                }
                pos -= 1;
                continue;
            }
            let v = cursor[pos];
            if v < slots[pos].2.len() {
                cursor[pos] = v + 1;
                chosen[pos] = v;
                pos += 1;
                cursor[pos] = 0;
            } else {
                if pos == 0 {
                    break;
                }
                pos -= 1;
            }
        }
        if slots.is_empty() {
            let cand = Multifunctor {
                source: source.clone(),
                target: target.clone(),
                obj: obj.clone(),
                arrows: BTreeMap::new(),
            };
            if check_multifunctor(&cand, bound)?.ok() {
                out.push(cand);
            }
        }
    }
    Ok(out)
}

/// A transformation between parallel multifunctors: one target arrow per
/// source arrow, from the first functor's domain to the second's codomain.
pub struct Transformation {
    pub from: Multifunctor,
    pub to: Multifunctor,
    /// Per operation term, the assigned target arrow per source arrow.
    pub assign: BTreeMap<OpTerm, Vec<usize>>,
}

impl Transformation {
    pub fn component(&self, r: &ArrowRef) -> Option<ArrowRef> {
        self.assign
            .get(&r.0)
            .and_then(|v| v.get(r.1))
            .map(|&i| (r.0.clone(), i))
    }
}

/// Check the boundary conditions, face naturality, and the two closure
/// laws of a transformation.
pub fn check_transformation(tr: &Transformation, bound: usize) -> Result<Report, EngineError> {
    let src = &tr.from.source;
    let tgt = &tr.from.target;
    let bound = bound.min(src.bound()).min(tgt.bound());
    let mut report = Report::new("transformation", bound);
    let base = src.monad().base().clone();
    let mut ctx = ComposeCtx::new();
    let mut acache = AssignCache::new();
    for c in base.objects() {
        for t in src.monad().ops_at(c, bound)? {
            for i in 0..src.arrows_at(&t).len() {
                let alpha = (t.clone(), i);
                let Some(comp) = tr.component(&alpha) else {
                    return Err(EngineError::coverage(format!(
                        "no component for arrow ({t}, {i})"
                    )));
                };
                let a = src.arrow(&alpha);
                let b = tgt.arrow(&comp);
                let want_dom = tr.from.obj.compose(&a.dom);
                let want_cod = tr.to.obj.apply((c, a.cod));
                if b.dom.components() != want_dom.components() || b.cod != want_cod {
                    report.fail(
                        "component boundary",
                        format!("component of ({t}, {i}) has wrong dom/cod"),
                    );
                } else {
                    report.pass();
                }
                for (m, &fi) in &a.faces {
                    let tm = src.monad().act(m.to_owned(), &t);
                    let lhs = tr.component(&(tm.clone(), fi));
                    let rhs = b.faces.get(m).map(|&j| (tm.clone(), j));
                    if lhs == rhs && lhs.is_some() {
                        report.pass();
                    } else {
                        report.fail(
                            "component faces",
                            format!("component of the face of ({t}, {i}) differs"),
                        );
                    }
                }
            }
        }
    }
    // Closure under pre- and postcomposition.
    for c in base.objects() {
        for t in src.monad().ops_at(c, bound)? {
            for i in 0..src.arrows_at(&t).len() {
                let alpha = (t.clone(), i);
                for beta in src.inner_families_cached(&alpha, bound, &mut acache)? {
                    let Ok(srccomp) = src.compose(&alpha, &beta, &mut ctx) else {
                        continue;
                    };
                    let Some(tau_comp) = tr.component(&srccomp) else {
                        continue;
                    };
                    // tau(alpha ∘ beta) = tau(alpha) ∘ F(beta)
                    let f_beta: Vec<ArrowRef> = beta
                        .iter()
                        .map(|x| tr.from.image(x).unwrap())
                        .collect();
                    match tgt.compose(&tr.component(&alpha).unwrap(), &f_beta, &mut ctx) {
                        Ok(lhs) => {
                            if lhs == tau_comp {
                                report.pass();
                            } else {
                                report.fail(
                                    "precomposition closure",
                                    format!("τ(({t}, {i}) ∘ β) ≠ τ({t}, {i}) ∘ F(β)"),
                                );
                            }
                        }
                        Err(e) => report.fail(
                            "precomposition closure",
                            format!("τ({t}, {i}) ∘ F(β) undefined: {e}"),
                        ),
                    }
                    // tau(alpha ∘ beta) = G(alpha) ∘ tau(beta)
                    let g_alpha = tr.to.image(&alpha).unwrap();
                    let tau_beta: Vec<ArrowRef> = beta
                        .iter()
                        .map(|x| tr.component(x).unwrap())
                        .collect();
                    match tgt.compose(&g_alpha, &tau_beta, &mut ctx) {
                        Ok(rhs) => {
                            if rhs == tau_comp {
                                report.pass();
                            } else {
                                report.fail(
                                    "postcomposition closure",
                                    format!("τ(({t}, {i}) ∘ β) ≠ G({t}, {i}) ∘ τ(β)"),
                                );
                            }
                        }
                        Err(e) => report.fail(
                            "postcomposition closure",
                            format!("G({t}, {i}) ∘ τ(β) undefined: {e}"),
                        ),
                    }
                }
            }
        }
    }
    Ok(report)
}

/// A multifunctor between representable multicategories is strong over a
/// further restriction when it preserves universal arrows there.
pub fn is_strong(
    f: &Multifunctor,
    e: &Restriction,
    bound: usize,
) -> Result<Report, EngineError> {
    let bound = bound.min(f.source.bound()).min(f.target.bound());
    let mut report = Report::new(format!("strong over {}", e.sub().name()), bound);
    // Representability certificates for both sides.
    let src_cert = is_representable(&f.source, e, bound)?;
    let tgt_cert = is_representable(&f.target, e, bound)?;
    if !src_cert.ok() || !tgt_cert.ok() {
        return Err(EngineError::input(
            "strength requires representability certificates for source and target",
        ));
    }
    report.note("source and target are representable over the restriction".to_string());
    let mut ctx = ComposeCtx::new();
    for d in f.source.monad().base().objects() {
        if !e.is_kept(d) {
            continue;
        }
        for t in f.source.monad().ops_at(d, bound)? {
            let arity = f.source.monad().arity(&t)?;
            for m in hom_set(&arity, f.source.v0())? {
                for h in universal_arrows(&f.source, &t, &m, &mut ctx)? {
                    let img = f.image(&(t.clone(), h)).unwrap();
                    let img_dom = f.target.arrow(&img).dom.clone();
                    let tgt_universal = universal_arrows(&f.target, &t, &img_dom, &mut ctx)?;
                    if tgt_universal.contains(&img.1) {
                        report.pass();
                    } else {
                        report.fail(
                            "universal preservation",
                            format!("image of universal arrow ({t}, {h}) is not universal"),
                        );
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Strictness: the image of each distinguished arrow is the distinguished
/// arrow on the image domain.
pub fn is_strict(
    f: &Multifunctor,
    e: &Restriction,
    src_choice: &Choice,
    tgt_choice: &Choice,
    bound: usize,
) -> Result<Report, EngineError> {
    let bound = bound.min(f.source.bound()).min(f.target.bound());
    let mut report = Report::new(format!("strict over {}", e.sub().name()), bound);
    let (src_cert, _) = is_uniformly_representable(&f.source, e, src_choice, bound)?;
    let (tgt_cert, _) = is_uniformly_representable(&f.target, e, tgt_choice, bound)?;
    if !src_cert.ok() || !tgt_cert.ok() {
        return Err(EngineError::input(
            "strictness requires uniform representability certificates",
        ));
    }
    for d in f.source.monad().base().objects() {
        if !e.is_kept(d) {
            continue;
        }
        for t in f.source.monad().ops_at(d, bound)? {
            let arity = f.source.monad().arity(&t)?;
            for m in hom_set(&arity, f.source.v0())? {
                let Some(&h) = src_choice.get(&(t.clone(), m.components().clone())) else {
                    continue;
                };
                let img = f.image(&(t.clone(), h)).unwrap();
                let pushed = f.obj.compose(&m);
                let want = tgt_choice.get(&(t.clone(), pushed.components().clone()));
                if want == Some(&img.1) {
                    report.pass();
                } else {
                    report.fail(
                        "distinguished preservation",
                        format!("image of the chosen arrow ({t}, {h}) is not chosen"),
                    );
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{category_algebra, monoid_algebra, CategoryTable, MonoidTable};
    use crate::fincat::FinCat;
    use crate::fixtures::{boolean_poset_multicat, materialize_compose_table, tower_vdc, z2_algebra};
    use crate::instances::list_monad;
    use crate::monad::OpPayload;

    fn full_g1() -> Restriction {
        Restriction::full(FinCat::graph_shape())
    }

    fn full_pt() -> Restriction {
        Restriction::full(list_monad().base().clone())
    }

    #[test]
    fn witnesses_of_z2_count_and_compose() {
        let a = z2_algebra(4).unwrap();
        let v = m_of_algebra(&a, 4).unwrap();
        for t in v.ops() {
            let OpPayload::Nat { n } = t.payload else { panic!() };
            assert_eq!(v.arrows_at(t).len(), 1 << n);
        }
        let r = check_multicat(&v, 4).unwrap();
        assert!(r.ok(), "{}", r.render_text());
    }

    #[test]
    fn witnesses_are_discrete_and_recover_the_algebra() {
        let a = z2_algebra(4).unwrap();
        let v = m_of_algebra(&a, 4).unwrap();
        let got = is_discrete(&v, &full_pt(), 4).unwrap().expect("discrete");
        // Same evaluations up to the restricted relabelling.
        assert_eq!(got.entry_count(), a.entry_count());
        for (((ta, ca), va), ((tb, cb), vb)) in got.entries().zip(a.entries()) {
            assert_eq!(ta.payload, tb.payload);
            assert_eq!(ca, cb);
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn witnesses_are_uniformly_representable_with_all_arrows() {
        let a = z2_algebra(4).unwrap();
        let v = m_of_algebra(&a, 4).unwrap();
        let choice = unique_arrow_choice(&v, 4).unwrap();
        let (rep, induced) = is_uniformly_representable(&v, &full_pt(), &choice, 4).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
        assert!(induced.is_some());
    }

    #[test]
    fn discreteness_fails_with_parallel_arrows() {
        let v = boolean_poset_multicat(4).unwrap();
        // Domains with meet 0 have arrows to both edges.
        assert!(is_discrete(&v, &full_g1(), 4).unwrap().is_none());
    }

    #[test]
    fn boolean_poset_is_a_lawful_multicategory() {
        let v = boolean_poset_multicat(5).unwrap();
        let r = check_multicat(&v, 5).unwrap();
        assert!(r.ok(), "{}", r.render_text());
    }

    #[test]
    fn boolean_poset_is_vertex_trivial() {
        let v = boolean_poset_multicat(4).unwrap();
        let r0 = Restriction::by_names(FinCat::graph_shape(), &["0"]).unwrap();
        assert!(is_trivial(&v, &r0, 4).unwrap());
        assert!(!is_trivial(&v, &full_g1(), 4).unwrap());
        // Witness multicategories with two cells are never trivial.
        let m = m_of_algebra(&z2_algebra(4).unwrap(), 4).unwrap();
        assert!(!is_trivial(&m, &full_pt(), 4).unwrap());
        // The terminal multicategory is trivial for every restriction.
        let term = terminal_multicat(&list_monad(), 4).unwrap();
        assert!(is_trivial(&term, &full_pt(), 4).unwrap());
        assert!(is_trivial(&term, &Restriction::empty(list_monad().base().clone()), 4).unwrap());
    }

    #[test]
    fn universal_arrows_point_at_the_meet() {
        let v = boolean_poset_multicat(5).unwrap();
        let mut ctx = ComposeCtx::new();
        let fc = v.monad().clone();
        let two = fc
            .ops_at(Obj(1), 5)
            .unwrap()
            .into_iter()
            .find(|t| t.payload == OpPayload::Nat { n: 2 })
            .unwrap();
        let arity = fc.arity(&two).unwrap();
        // Domain (0, 1): arrows to 0 and to 1; only the one to the meet 0
        // is universal.
        let dom = PresheafMap::new(
            arity.clone(),
            v.v0().clone(),
            vec![vec![0, 0, 0], vec![0, 1]],
        )
        .unwrap();
        let us = universal_arrows(&v, &two, &dom, &mut ctx).unwrap();
        assert_eq!(us.len(), 1);
        assert_eq!(v.arrows_at(&two)[us[0]].cod, 0);
        let with_dom = v
            .arrows_at(&two)
            .iter()
            .filter(|a| a.dom.components() == dom.components())
            .count();
        assert_eq!(with_dom, 2);
        // A domain with no arrows yields no universal arrows: remove both.
        let empty_dom = PresheafMap::new(
            arity,
            v.v0().clone(),
            vec![vec![0, 0, 0], vec![1, 1]],
        )
        .unwrap();
        // (1,1) has meet 1: only one arrow (to 1).
        let us2 = universal_arrows(&v, &two, &empty_dom, &mut ctx).unwrap();
        assert_eq!(us2.len(), 1);
        assert_eq!(v.arrows_at(&two)[us2[0]].cod, 1);
    }

    #[test]
    fn boolean_poset_is_representable_over_edges() {
        let v = boolean_poset_multicat(4).unwrap();
        let rep = is_representable(&v, &full_g1(), 4).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
    }

    #[test]
    fn tower_composes_into_a_three_to_one_square() {
        let (alg, v) = tower_vdc(7).unwrap();
        let table = alg;
        let fc = v.monad().clone();
        // Arrow names in the linear category on 0 → 1 → 2 → 3.
        let arrow_idx = |i: usize, j: usize| {
            CategoryTable::linear(4)
                .arrows
                .iter()
                .position(|&a| a == (i, j))
                .unwrap()
        };
        let _ = table;
        let two = fc
            .ops_at(Obj(1), 7)
            .unwrap()
            .into_iter()
            .find(|t| t.payload == OpPayload::Nat { n: 2 })
            .unwrap();
        let one = fc.eta(Obj(1));
        let three = fc
            .ops_at(Obj(1), 7)
            .unwrap()
            .into_iter()
            .find(|t| t.payload == OpPayload::Nat { n: 3 })
            .unwrap();
        // s1: (a, b) ⇒ p, s2: (c) ⇒ c, s3: (p, c) ⇒ w.
        let (a, b, c) = (arrow_idx(0, 1), arrow_idx(1, 2), arrow_idx(2, 3));
        let (p, w) = (arrow_idx(0, 2), arrow_idx(0, 3));
        let s1 = (
            two.clone(),
            v.find_arrow(
                &two,
                &[vec![0, 1, 2], vec![a, b]],
                Some(p),
            )
            .unwrap(),
        );
        let s2 = (
            one.clone(),
            v.find_arrow(&one, &[vec![2, 3], vec![c]], Some(c)).unwrap(),
        );
        let s3 = (
            two.clone(),
            v.find_arrow(&two, &[vec![0, 2, 3], vec![p, c]], Some(w))
                .unwrap(),
        );
        // Inner family over the length-2 path arity: vertices 0, 2, 3 then
        // edges (s1, s2).
        let fam = vec![
            v.identity(Obj(0), 0),
            v.identity(Obj(0), 2),
            v.identity(Obj(0), 3),
            s1,
            s2,
        ];
        let mut ctx = ComposeCtx::new();
        let res = v.compose(&s3, &fam, &mut ctx).unwrap();
        assert_eq!(res.0, three);
        let composite = v.arrow(&res);
        assert_eq!(composite.cod, w);
        assert_eq!(composite.dom.components()[1], vec![a, b, c]);
    }

    #[test]
    fn table_fixture_passes_and_perturbation_fails() {
        let (_, v) = tower_vdc(5).unwrap();
        let table = materialize_compose_table(&v, 5).unwrap();
        let rep = check_multicat(&table, 5).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
        // Perturb one codomain; the checker must flag it with a witness.
        let one = v.monad().eta(Obj(1));
        let bad = table.with_cod(&one, 0, (table.arrow(&(one.clone(), 0)).cod + 1) % v.v0().card(Obj(1)));
        let rep = check_multicat(&bad, 5).unwrap();
        assert!(!rep.ok());
        assert!(!rep.failures.is_empty());
    }

    #[test]
    fn multifunctors_between_witnesses_match_monoid_maps() {
        let a = z2_algebra(4).unwrap();
        let v = m_of_algebra(&a, 4).unwrap();
        let fs = enumerate_multifunctors(&v, &v, 4).unwrap();
        // Monoid endomorphisms of Z/2: identity and the constant unit map.
        assert_eq!(fs.len(), 2);
    }

    #[test]
    fn identity_multifunctor_is_strong_and_strict() {
        let a = z2_algebra(4).unwrap();
        let v = m_of_algebra(&a, 4).unwrap();
        let f = Multifunctor::identity(&v);
        assert!(check_multifunctor(&f, 4).unwrap().ok());
        let r = full_pt();
        assert!(is_strong(&f, &r, 4).unwrap().ok());
        let choice = unique_arrow_choice(&v, 4).unwrap();
        assert!(is_strict(&f, &r, &choice, &choice, 4).unwrap().ok());
    }

    #[test]
    fn identity_transformation_passes() {
        let a = z2_algebra(4).unwrap();
        let v = m_of_algebra(&a, 4).unwrap();
        let f = Multifunctor::identity(&v);
        let tr = Transformation {
            from: f.clone(),
            to: f.clone(),
            assign: f.arrows.clone(),
        };
        let rep = check_transformation(&tr, 4).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
    }

    #[test]
    fn collapsing_functor_fails_strictness_but_is_a_multifunctor() {
        // Collapse Z/2 onto the trivial monoid inside itself: x ↦ 0.
        let a = z2_algebra(4).unwrap();
        let v = m_of_algebra(&a, 4).unwrap();
        let fs = enumerate_multifunctors(&v, &v, 4).unwrap();
        let collapse = fs
            .into_iter()
            .find(|f| f.obj.components()[0] == vec![0, 0])
            .expect("constant unit map is a multifunctor");
        assert!(check_multifunctor(&collapse, 4).unwrap().ok());
        // It is still strict here (witness structures are too rigid), so
        // check a genuinely failing strictness instance instead: the
        // boolean poset with a skewed choice.
        let b = boolean_poset_multicat(4).unwrap();
        let idb = Multifunctor::identity(&b);
        let mut good = Choice::new();
        let mut ctx = ComposeCtx::new();
        for t in b.ops() {
            let arity = b.monad().arity(t).unwrap();
            for m in hom_set(&arity, b.v0()).unwrap() {
                let us = universal_arrows(&b, t, &m, &mut ctx).unwrap();
                if let Some(&h) = us.first() {
                    good.insert((t.clone(), m.components().clone()), h);
                }
            }
        }
        let full = full_g1();
        let (rep, induced) = is_uniformly_representable(&b, &full, &good, 4).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
        assert!(induced.is_some());
        // Skew: distinguish a non-universal arrow somewhere.
        let mut skew = good.clone();
        let ((t0, d0), _) = skew
            .iter()
            .find(|((t, d), &h)| {
                b.arrows_at(t)
                    .iter()
                    .enumerate()
                    .any(|(j, a)| j != h && a.dom.components() == d.as_slice() && t.shape() == Obj(1))
            })
            .map(|(k, v)| (k.clone(), *v))
            .unwrap();
        let alt = b
            .arrows_at(&t0)
            .iter()
            .enumerate()
            .find(|(j, a)| a.dom.components() == d0.as_slice() && Some(*j) != good.get(&(t0.clone(), d0.clone())).copied())
            .map(|(j, _)| j)
            .unwrap();
        skew.insert((t0, d0), alt);
        let (rep2, _) = is_uniformly_representable(&b, &full, &skew, 4).unwrap();
        assert!(!rep2.ok());
        assert!(is_strict(&idb, &full, &good, &skew, 4).is_err());
    }

    #[test]
    fn restricted_multicat_stays_lawful() {
        let v = boolean_poset_multicat(4).unwrap();
        let r0 = Restriction::by_names(FinCat::graph_shape(), &["0"]).unwrap();
        let restricted = restrict_multicat(&v, &r0).unwrap();
        let rep = check_multicat(&restricted, 4).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
    }

    #[test]
    fn deleting_a_composition_witness_breaks_representability() {
        let fc = crate::instances::fc_monad();
        let alg = category_algebra(&fc, &CategoryTable::linear(3), 5).unwrap();
        let v = m_of_algebra(&alg, 5).unwrap();
        let full = full_g1();
        let choice = unique_arrow_choice(&v, 5).unwrap();
        let (rep, induced) = is_uniformly_representable(&v, &full, &choice, 5).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
        assert!(induced.is_some());
        // Delete the composition square for the path (0→1, 1→2).
        let two = fc
            .ops_at(Obj(1), 5)
            .unwrap()
            .into_iter()
            .find(|t| t.payload == OpPayload::Nat { n: 2 })
            .unwrap();
        let lin = CategoryTable::linear(3);
        let a01 = lin.arrows.iter().position(|&x| x == (0, 1)).unwrap();
        let a12 = lin.arrows.iter().position(|&x| x == (1, 2)).unwrap();
        let idx = v
            .find_arrow(&two, &[vec![0, 1, 2], vec![a01, a12]], None)
            .unwrap();
        let broken = v.without_arrow(&two, idx);
        let rep2 = is_representable(&broken, &full, 5).unwrap();
        assert!(!rep2.ok());
        assert!(rep2
            .failures
            .iter()
            .any(|f| f.law.contains("universal existence")));
        let mutated = monoid_algebra(&list_monad(), &MonoidTable::cyclic(2), 4).unwrap();
        let _ = mutated;
    }
}
