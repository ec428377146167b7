//! Restrictions of cell shapes and the three functors along them.
//!
//! A [`Restriction`] keeps a full, downward-closed collection of objects of
//! an ambient index category. Along it live extension by empty cell sets
//! ([`Restriction::u_lower`]), plain restriction ([`Restriction::u_upper`]),
//! and the indiscrete right adjoint ([`Restriction::u_star`]) computed
//! pointwise from hom sets. A monad graded over a restriction transports to
//! a monad on the kept shapes via [`restrict_monad`].

use std::sync::Arc;

use crate::error::EngineError;
use crate::fincat::{hom_set, yoneda, Cell, FinCat, Mor, Obj, Presheaf, PresheafMap};
use crate::monad::{FamilialMonad, MonadInstance, OpAssignment, OpTerm};
use crate::report::Report;

/// A full, downward-closed subcategory of an ambient finite category,
/// specified by its kept objects.
#[derive(Clone)]
pub struct Restriction {
    ambient: Arc<FinCat>,
    kept: Vec<bool>,
    sub: Arc<FinCat>,
    obj_to_ambient: Vec<Obj>,
    obj_from_ambient: Vec<Option<Obj>>,
    mor_to_ambient: Vec<Mor>,
    mor_from_ambient: Vec<Option<Mor>>,
}

impl Restriction {
    /// Build from a kept-object set, validating downward closure: for any
    /// `i : c' → c` with `c` kept, `c'` must be kept. Fullness is forced.
    pub fn new(ambient: Arc<FinCat>, kept_objs: &[Obj]) -> Result<Restriction, EngineError> {
        let mut kept = vec![false; ambient.object_count()];
        for o in kept_objs {
            if o.0 >= ambient.object_count() {
                return Err(EngineError::input("kept object out of range"));
            }
            kept[o.0] = true;
        }
        for m in ambient.morphisms() {
            if kept[ambient.cod(m).0] && !kept[ambient.dom(m).0] {
                return Err(EngineError::input(format!(
                    "restriction not downward closed: {} leaves the kept objects",
                    ambient.morphism_name(m)
                )));
            }
        }
        let mut obj_to_ambient = Vec::new();
        let mut obj_from_ambient = vec![None; ambient.object_count()];
        for o in ambient.objects() {
            if kept[o.0] {
                obj_from_ambient[o.0] = Some(Obj(obj_to_ambient.len()));
                obj_to_ambient.push(o);
            }
        }
        let mut mor_to_ambient = Vec::new();
        let mut mor_from_ambient = vec![None; ambient.morphism_count()];
        let mut morphisms = Vec::new();
        for m in ambient.morphisms() {
            if kept[ambient.dom(m).0] && kept[ambient.cod(m).0] {
                mor_from_ambient[m.0] = Some(Mor(mor_to_ambient.len()));
                mor_to_ambient.push(m);
                morphisms.push((
                    ambient.morphism_name(m).to_string(),
                    obj_from_ambient[ambient.dom(m).0].unwrap().0,
                    obj_from_ambient[ambient.cod(m).0].unwrap().0,
                ));
            }
        }
        let identity: Vec<usize> = obj_to_ambient
            .iter()
            .map(|&o| mor_from_ambient[ambient.identity(o).0].unwrap().0)
            .collect();
        let mut compose_pairs = Vec::new();
        for (fi, &f) in mor_to_ambient.iter().enumerate() {
            for (gi, &g) in mor_to_ambient.iter().enumerate() {
                if ambient.cod(g) == ambient.dom(f) {
                    let h = ambient.compose(f, g);
                    compose_pairs.push(((fi, gi), mor_from_ambient[h.0].unwrap().0));
                }
            }
        }
        let objects: Vec<String> = obj_to_ambient
            .iter()
            .map(|&o| ambient.object_name(o).to_string())
            .collect();
        let name = format!("{}|{}", ambient.name(), objects.join(","));
        let sub = Arc::new(FinCat::new(&name, objects, morphisms, identity, compose_pairs)?);
        Ok(Restriction {
            ambient,
            kept,
            sub,
            obj_to_ambient,
            obj_from_ambient,
            mor_to_ambient,
            mor_from_ambient,
        })
    }

    pub fn by_names(ambient: Arc<FinCat>, names: &[&str]) -> Result<Restriction, EngineError> {
        let objs: Result<Vec<Obj>, EngineError> = names
            .iter()
            .map(|n| {
                ambient
                    .object_by_name(n)
                    .ok_or_else(|| EngineError::input(format!("unknown object {n:?}")))
            })
            .collect();
        Restriction::new(ambient, &objs?)
    }

    pub fn full(ambient: Arc<FinCat>) -> Restriction {
        let objs: Vec<Obj> = ambient.objects().collect();
        Restriction::new(ambient, &objs).expect("full restriction is downward closed")
    }

    pub fn empty(ambient: Arc<FinCat>) -> Restriction {
        Restriction::new(ambient, &[]).expect("empty restriction is downward closed")
    }

    pub fn ambient(&self) -> &Arc<FinCat> {
        &self.ambient
    }

    /// The kept subcategory as a finite category in its own right.
    pub fn sub(&self) -> &Arc<FinCat> {
        &self.sub
    }

    pub fn is_kept(&self, o: Obj) -> bool {
        self.kept[o.0]
    }

    pub fn is_full(&self) -> bool {
        self.kept.iter().all(|&k| k)
    }

    pub fn to_ambient(&self, o: Obj) -> Obj {
        self.obj_to_ambient[o.0]
    }

    pub fn from_ambient(&self, o: Obj) -> Option<Obj> {
        self.obj_from_ambient[o.0]
    }

    pub fn mor_to_ambient(&self, m: Mor) -> Mor {
        self.mor_to_ambient[m.0]
    }

    pub fn mor_from_ambient(&self, m: Mor) -> Option<Mor> {
        self.mor_from_ambient[m.0]
    }

    /// `u^*`: restrict an ambient presheaf to its kept cells.
    pub fn u_upper(&self, x: &Presheaf) -> Arc<Presheaf> {
        let cells = self
            .obj_to_ambient
            .iter()
            .map(|&o| x.card(o))
            .collect();
        let action = self
            .mor_to_ambient
            .iter()
            .map(|&m| (0..x.card(self.ambient.cod(m))).map(|c| x.act(m, c)).collect())
            .collect();
        Arc::new(Presheaf::new(self.sub.clone(), cells, action).expect("restriction stays lawful"))
    }

    pub fn u_upper_map(&self, f: &PresheafMap) -> PresheafMap {
        let src = self.u_upper(f.source());
        let dst = self.u_upper(f.target());
        let components = self
            .obj_to_ambient
            .iter()
            .map(|&o| f.components()[o.0].clone())
            .collect();
        PresheafMap::new_unchecked(src, dst, components)
    }

    /// `u_!`: extend a kept-shape presheaf by empty cell sets.
    pub fn u_lower(&self, p: &Presheaf) -> Arc<Presheaf> {
        let mut cells = vec![0usize; self.ambient.object_count()];
        for (d, &o) in self.obj_to_ambient.iter().enumerate() {
            cells[o.0] = p.card(Obj(d));
        }
        let mut action: Vec<Vec<usize>> = vec![Vec::new(); self.ambient.morphism_count()];
        for (dm, &m) in self.mor_to_ambient.iter().enumerate() {
            action[m.0] = (0..p.card(p.base().cod(Mor(dm))))
                .map(|c| p.act(Mor(dm), c))
                .collect();
        }
        Arc::new(Presheaf::new(self.ambient.clone(), cells, action).expect("extension by empty"))
    }

    pub fn u_lower_map(&self, f: &PresheafMap) -> PresheafMap {
        let src = self.u_lower(f.source());
        let dst = self.u_lower(f.target());
        let mut components: Vec<Vec<usize>> = vec![Vec::new(); self.ambient.object_count()];
        for (d, &o) in self.obj_to_ambient.iter().enumerate() {
            components[o.0] = f.components()[d].clone();
        }
        PresheafMap::new_unchecked(src, dst, components)
    }

    /// `u_*`: the indiscrete extension, computed pointwise as the set of
    /// natural maps from the restricted representable.
    pub fn u_star(&self, p: &Arc<Presheaf>) -> Result<UStar, EngineError> {
        if **p.base() != *self.sub {
            return Err(EngineError::input("u_star input not over the kept shapes"));
        }
        let ambient = &self.ambient;
        let mut reps = Vec::with_capacity(ambient.object_count());
        let mut maps: Vec<Vec<PresheafMap>> = Vec::with_capacity(ambient.object_count());
        for c in ambient.objects() {
            let rep = yoneda(ambient, c);
            let restricted = self.u_upper(&rep.presheaf);
            maps.push(hom_set(&restricted, p)?);
            reps.push(rep);
        }
        let cells: Vec<usize> = maps.iter().map(|v| v.len()).collect();
        let mut action = Vec::with_capacity(ambient.morphism_count());
        for m in ambient.morphisms() {
            let c = ambient.cod(m);
            let d = ambient.dom(m);
            // Postcomposition y(d) → y(c) with m, restricted to kept cells.
            let post: Vec<Vec<usize>> = self
                .obj_to_ambient
                .iter()
                .map(|&o| {
                    reps[d.0].cell_mor[o.0]
                        .iter()
                        .map(|&g| reps[c.0].cell_of(ambient.compose(m, g)))
                        .collect()
                })
                .collect();
            let mut tbl = Vec::with_capacity(cells[c.0]);
            for phi in &maps[c.0] {
                let composed: Vec<Vec<usize>> = post
                    .iter()
                    .enumerate()
                    .map(|(o, col)| col.iter().map(|&z| phi.components()[o][z]).collect())
                    .collect();
                let idx = maps[d.0]
                    .iter()
                    .position(|psi| *psi.components() == composed)
                    .expect("precomposition stays natural");
                tbl.push(idx);
            }
            action.push(tbl);
        }
        let presheaf = Arc::new(Presheaf::new(ambient.clone(), cells, action)?);
        // Materialize the canonical bijection with P at kept shapes.
        let mut kept_cells = vec![None; ambient.object_count()];
        for (d, &o) in self.obj_to_ambient.iter().enumerate() {
            let idcell = {
                let rep = &reps[o.0];
                let idm = ambient.identity(o);
                rep.cell_mor[o.0]
                    .iter()
                    .position(|&m| m == idm)
                    .expect("identity is in its own hom set")
            };
            let bij: Vec<usize> = maps[o.0]
                .iter()
                .map(|phi| phi.components()[d][idcell])
                .collect();
            kept_cells[o.0] = Some(bij);
        }
        Ok(UStar {
            presheaf,
            maps,
            kept_cells,
        })
    }
}

/// Result of the indiscrete extension with its defining hom data.
pub struct UStar {
    pub presheaf: Arc<Presheaf>,
    /// For each ambient object, the natural maps indexing its cells.
    pub maps: Vec<Vec<PresheafMap>>,
    /// At kept ambient objects, the canonical bijection onto the original
    /// cells, so downstream code can treat the two interchangeably.
    pub kept_cells: Vec<Option<Vec<usize>>>,
}

impl UStar {
    /// Cell of `u_*P` at a kept ambient object naming an original cell.
    pub fn cell_from_kept(&self, o: Obj, original: usize) -> usize {
        self.kept_cells[o.0]
            .as_ref()
            .expect("object not kept")
            .iter()
            .position(|&v| v == original)
            .expect("bijection at kept shapes")
    }
}

/// Verify that every operation outputting a kept shape has an arity with no
/// cells outside the kept shapes, up to the bound.
pub fn graded_check(
    monad: &FamilialMonad,
    r: &Restriction,
    bound: usize,
) -> Result<Report, EngineError> {
    if **monad.base() != **r.ambient() {
        return Err(EngineError::input("restriction over a different base"));
    }
    let mut report = Report::new(format!("graded[{} over {}]", monad.name(), r.sub().name()), bound);
    for d in monad.base().objects() {
        if !r.is_kept(d) {
            continue;
        }
        for t in monad.ops_at(d, bound)? {
            let a = monad.arity(&t)?;
            let outside: Vec<String> = monad
                .base()
                .objects()
                .filter(|&o| !r.is_kept(o) && a.card(o) > 0)
                .map(|o| format!("{} ({} cells)", monad.base().object_name(o), a.card(o)))
                .collect();
            if outside.is_empty() {
                report.pass();
            } else {
                report.fail(
                    "gradedness",
                    format!("arity of {t} has cells at {}", outside.join(", ")),
                );
            }
        }
    }
    Ok(report)
}

/// The restricted monad on the kept shapes of a graded monad.
struct RestrictedMonad {
    name: Arc<str>,
    inner: FamilialMonad,
    r: Restriction,
}

impl RestrictedMonad {
    fn to_inner(&self, t: &OpTerm) -> OpTerm {
        OpTerm {
            monad: self.inner.name().clone(),
            shape: self.r.to_ambient(Obj(t.shape)).0,
            payload: t.payload.clone(),
            size: t.size,
        }
    }

    fn from_inner(&self, t: &OpTerm) -> OpTerm {
        OpTerm {
            monad: self.name.clone(),
            shape: self
                .r
                .from_ambient(Obj(t.shape))
                .expect("graded op at a kept shape")
                .0,
            payload: t.payload.clone(),
            size: t.size,
        }
    }

    fn to_inner_assignment(&self, f: &OpAssignment) -> Result<OpAssignment, EngineError> {
        let base = self.to_inner(f.base());
        let mut values: Vec<Vec<OpTerm>> =
            vec![Vec::new(); self.inner.base().object_count()];
        for (d, col) in f.values().iter().enumerate() {
            let o = self.r.to_ambient(Obj(d));
            values[o.0] = col.iter().map(|v| self.to_inner(v)).collect();
        }
        OpAssignment::new(&self.inner, base, values)
    }
}

impl MonadInstance for RestrictedMonad {
    fn name(&self) -> &Arc<str> {
        &self.name
    }
    fn base(&self) -> &Arc<FinCat> {
        self.r.sub()
    }
    fn ops_at(&self, c: Obj, bound: usize) -> Result<Vec<OpTerm>, EngineError> {
        Ok(self
            .inner
            .ops_at(self.r.to_ambient(c), bound)?
            .iter()
            .map(|t| self.from_inner(t))
            .collect())
    }
    fn validate_term(&self, t: &OpTerm) -> Result<(), EngineError> {
        if Obj(t.shape).0 >= self.r.sub().object_count() {
            return Err(EngineError::input("restricted term at unknown shape"));
        }
        self.inner.validate_term(&self.to_inner(t))
    }
    fn act(&self, m: Mor, t: &OpTerm) -> OpTerm {
        self.from_inner(&self.inner.act(self.r.mor_to_ambient(m), &self.to_inner(t)))
    }
    fn arity(&self, t: &OpTerm) -> Result<Arc<Presheaf>, EngineError> {
        let inner_t = self.to_inner(t);
        let a = self.inner.arity(&inner_t)?;
        for o in self.inner.base().objects() {
            if !self.r.is_kept(o) && a.card(o) > 0 {
                return Err(EngineError::input(format!(
                    "monad not graded: arity of {inner_t} has cells at {}",
                    self.inner.base().object_name(o)
                )));
            }
        }
        Ok(self.r.u_upper(&a))
    }
    fn arity_face(&self, m: Mor, t: &OpTerm) -> Result<PresheafMap, EngineError> {
        let inner = self
            .inner
            .arity_face(self.r.mor_to_ambient(m), &self.to_inner(t))?;
        Ok(self.r.u_upper_map(&inner))
    }
    fn eta(&self, c: Obj) -> OpTerm {
        self.from_inner(&self.inner.eta(self.r.to_ambient(c)))
    }
    fn mu_term(&self, f: &OpAssignment) -> Result<OpTerm, EngineError> {
        let inner_f = self.to_inner_assignment(f)?;
        Ok(self.from_inner(&self.inner.mu_term(&inner_f)?))
    }
    fn embed(
        &self,
        f: &OpAssignment,
        x: Cell,
        mu: &OpTerm,
    ) -> Result<Vec<Vec<usize>>, EngineError> {
        let inner_f = self.to_inner_assignment(f)?;
        let ambient_cell = (self.r.to_ambient(x.0), x.1);
        let full = self
            .inner
            .instance()
            .embed(&inner_f, ambient_cell, &self.to_inner(mu))?;
        Ok(self
            .r
            .sub()
            .objects()
            .map(|d| full[self.r.to_ambient(d).0].clone())
            .collect())
    }
}

/// Transport a graded monad to its kept shapes. The gradedness precondition
/// is validated lazily at every arity computation; run [`graded_check`]
/// first for an up-front report.
pub fn restrict_monad(monad: &FamilialMonad, r: &Restriction) -> FamilialMonad {
    let name: Arc<str> = Arc::from(format!("{}@{}", monad.name(), r.sub().name()).as_str());
    FamilialMonad::from_instance(Arc::new(RestrictedMonad {
        name,
        inner: monad.clone(),
        r: r.clone(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fincat::{find_fincat_iso, iso_check, transport_presheaf};
    use crate::instances::{
        discrete_graph, fc_monad, fdc_monad, finite_set, fmc_monad, list_monad, path_presheaf,
    };

    fn g0_in_g1() -> Restriction {
        Restriction::by_names(FinCat::graph_shape(), &["0"]).unwrap()
    }

    #[test]
    fn non_downward_closed_restriction_is_rejected() {
        assert!(Restriction::by_names(FinCat::graph_shape(), &["1"]).is_err());
    }

    #[test]
    fn u_lower_makes_an_edgeless_graph() {
        let r = g0_in_g1();
        let three = finite_set(r.sub(), 3);
        let g = r.u_lower(&three);
        assert_eq!(g.card(Obj(0)), 3);
        assert_eq!(g.card(Obj(1)), 0);
        assert!(r.u_lower(&Presheaf::empty(r.sub().clone())).is_empty());
        // Round trip.
        assert_eq!(*r.u_upper(&g), *three);
    }

    #[test]
    fn u_upper_takes_vertices() {
        let r = g0_in_g1();
        let p = path_presheaf(r.ambient(), 3);
        let v = r.u_upper(&p);
        assert_eq!(v.card(Obj(0)), 4);
        // Restricting a kept representable gives the representable.
        let y0 = yoneda(r.ambient(), Obj(0));
        let restricted = r.u_upper(&y0.presheaf);
        assert_eq!(restricted.card(Obj(0)), 1);
    }

    #[test]
    fn u_star_of_a_set_is_the_indiscrete_graph() {
        let r = g0_in_g1();
        let two = finite_set(r.sub(), 2);
        let u = r.u_star(&two).unwrap();
        assert_eq!(u.presheaf.card(Obj(0)), 2);
        assert_eq!(u.presheaf.card(Obj(1)), 4);
        // Kept-shape bijection.
        assert_eq!(u.kept_cells[0].as_ref().unwrap().len(), 2);
    }

    #[test]
    fn u_star_preserves_the_terminal_presheaf() {
        let r = g0_in_g1();
        let term_d = Arc::new(Presheaf::terminal(r.sub().clone()));
        let u = r.u_star(&term_d).unwrap();
        let term_c = Presheaf::terminal(r.ambient().clone());
        assert_eq!(*u.presheaf, term_c);
    }

    #[test]
    fn u_star_along_one_double_factor_counts_squares() {
        // Keep the vertices and one edge direction of double graphs; the
        // indiscrete extension of a 2-vertex 1-edge graph has one new edge
        // per vertex pair and one square per edge pair.
        let fdc = fdc_monad();
        let amb = fdc.base().clone();
        let r = Restriction::by_names(amb.clone(), &["(0,0)", "(1,0)"]).unwrap();
        let s = r.sub().morphism_by_name("(s,id0)").unwrap();
        let t = r.sub().morphism_by_name("(t,id0)").unwrap();
        let mut action = vec![Vec::new(); r.sub().morphism_count()];
        action[r.sub().identity(Obj(0)).0] = vec![0, 1];
        action[r.sub().identity(Obj(1)).0] = vec![0];
        action[s.0] = vec![0];
        action[t.0] = vec![1];
        let a = Arc::new(Presheaf::new(r.sub().clone(), vec![2, 1], action).unwrap());
        let u = r.u_star(&a).unwrap();
        let card = |n: &str| u.presheaf.card(amb.object_by_name(n).unwrap());
        assert_eq!(card("(0,0)"), 2);
        assert_eq!(card("(1,0)"), 1);
        assert_eq!(card("(0,1)"), 4);
        assert_eq!(card("(1,1)"), 1);
    }

    #[test]
    fn adjunction_triangles_have_matching_hom_cardinalities() {
        let r = g0_in_g1();
        let p = finite_set(r.sub(), 2);
        let x = path_presheaf(r.ambient(), 2);
        // hom(u_! P, X) = hom(P, u^* X)
        let lhs = hom_set(&r.u_lower(&p), &x).unwrap();
        let rhs = hom_set(&p, &r.u_upper(&x)).unwrap();
        assert_eq!(lhs.len(), rhs.len());
        // Explicit transposition: restriction of each morphism is in the
        // right-hand set.
        for f in &lhs {
            let transposed = r.u_upper_map(f);
            // Source is u^* u_! P = P.
            assert!(rhs.iter().any(|g| g.components() == transposed.components()));
        }
        // hom(u^* X, P) = hom(X, u_* P)
        let u = r.u_star(&p).unwrap();
        let lhs2 = hom_set(&r.u_upper(&x), &p).unwrap();
        let rhs2 = hom_set(&x, &u.presheaf).unwrap();
        assert_eq!(lhs2.len(), rhs2.len());
    }

    #[test]
    fn fmc_is_graded_over_vertices() {
        let fmc = fmc_monad();
        let r = g0_in_g1();
        let rep = graded_check(&fmc, &r, 6).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
    }

    #[test]
    fn fc_is_not_graded_over_vertices_but_vacuously_over_nothing() {
        let fc = fc_monad();
        let r = Restriction::empty(FinCat::graph_shape());
        let rep = graded_check(&fc, &r, 6).unwrap();
        assert!(rep.ok());
        // fc over {0} is graded too (the vertex op has a point arity).
        let r0 = g0_in_g1();
        assert!(graded_check(&fc, &r0, 6).unwrap().ok());
    }

    #[test]
    fn fdc_is_graded_over_the_edge_union() {
        let fdc = fdc_monad();
        let r = Restriction::by_names(fdc.base().clone(), &["(0,0)", "(1,0)", "(0,1)"]).unwrap();
        let rep = graded_check(&fdc, &r, 9).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
    }

    #[test]
    fn restricted_fmc_is_the_free_monoid_monad() {
        let fmc = fmc_monad();
        let r = g0_in_g1();
        let restricted = restrict_monad(&fmc, &r);
        let list = list_monad();
        let iso = find_fincat_iso(r.sub(), list.base()).expect("both are the point category");
        for bound in [0, 3, 6] {
            let a = restricted.ops_at(Obj(0), bound).unwrap();
            let b = list.ops_at(Obj(0), bound).unwrap();
            assert_eq!(a.len(), b.len());
            for (ta, tb) in a.iter().zip(&b) {
                let ar = transport_presheaf(&restricted.arity(ta).unwrap(), &iso, list.base());
                let br = list.arity(tb).unwrap();
                assert!(iso_check(&ar, &br).unwrap().is_some());
            }
        }
        let rep = restricted.check_laws(6).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
    }

    #[test]
    fn restricted_fdc_is_the_free_category_monad() {
        let fdc = fdc_monad();
        let r = Restriction::by_names(fdc.base().clone(), &["(0,0)", "(1,0)"]).unwrap();
        let restricted = restrict_monad(&fdc, &r);
        let fc = fc_monad();
        let iso = find_fincat_iso(r.sub(), fc.base()).expect("kept shapes form a graph category");
        for c in r.sub().objects() {
            let a = restricted.ops_at(c, 6).unwrap();
            let b = fc.ops_at(iso.obj_map[c.0], 6).unwrap();
            assert_eq!(a.len(), b.len(), "op counts at {c:?}");
            for (ta, tb) in a.iter().zip(&b) {
                let ar = transport_presheaf(&restricted.arity(ta).unwrap(), &iso, fc.base());
                let br = fc.arity(tb).unwrap();
                assert!(iso_check(&ar, &br).unwrap().is_some());
            }
        }
    }

    #[test]
    fn restriction_commutes_with_application() {
        // T_D u^* X = u^* T X for graded T, as a canonical bijection of
        // labelled cells.
        let fmc = fmc_monad();
        let r = g0_in_g1();
        let restricted = restrict_monad(&fmc, &r);
        let x = discrete_graph(r.ambient(), 2);
        let bound = 4;
        let tx = fmc.apply(&x, bound).unwrap();
        let txd = restricted.apply(&r.u_upper(&x), bound).unwrap();
        assert_eq!(txd.presheaf.card(Obj(0)), tx.presheaf.card(Obj(0)));
        for (t, a) in &txd.labels[0] {
            // Extend the kept-shape attachment over the ambient base.
            let inner_t = OpTerm {
                monad: fmc.name().clone(),
                shape: r.to_ambient(t.shape()).0,
                payload: t.payload.clone(),
                size: t.size,
            };
            let ambient_a = PresheafMap::new(
                fmc.arity(&inner_t).unwrap(),
                x.clone(),
                vec![a.components()[0].clone(), Vec::new()],
            )
            .unwrap();
            assert!(tx.position(Obj(0), &inner_t, &ambient_a).is_some());
        }
    }
}
