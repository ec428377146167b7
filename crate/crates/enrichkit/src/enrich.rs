//! Enriched algebras: an algebra on the kept shapes together with Hom
//! assignments into a multicategory over the ambient monad.
//!
//! The data of an enrichment is exactly a multifunctor from the witness
//! multicategory of the indiscrete extension of the base algebra into the
//! target. Candidates are stored slotwise so that partial files report
//! exactly their missing slots, and the checker assembles the multifunctor
//! and validates it; strength and strictness delegate to the representable
//! machinery on the assembled functor.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::algebra::{algebra_indiscrete, FiniteAlgebra};
use crate::error::EngineError;
use crate::fincat::{Obj, PresheafMap};
use crate::monad::{FamilialMonad, OpTerm};
use crate::multicat::{
    check_multifunctor, check_transformation, compose_multifunctors, is_strict, is_strong,
    m_of_algebra, unique_arrow_choice, ArrowRef, Choice, Multifunctor, TMulticat, Transformation,
};
use crate::report::Report;
use crate::shapes::{Restriction, UStar};

/// The fixed part of an enrichment problem: the base algebra on the kept
/// shapes, its indiscrete extension, and the witness multicategory the
/// Hom data maps out of.
pub struct EnrichmentSite {
    pub restriction: Restriction,
    pub monad: FamilialMonad,
    pub base: FiniteAlgebra,
    pub bound: usize,
    pub indiscrete: FiniteAlgebra,
    pub ustar: UStar,
    pub witnesses: TMulticat,
}

impl EnrichmentSite {
    pub fn new(
        base: FiniteAlgebra,
        restriction: Restriction,
        monad: FamilialMonad,
        bound: usize,
    ) -> Result<EnrichmentSite, EngineError> {
        let gate = base.check(bound)?;
        if !gate.ok() {
            return Err(EngineError::input(format!(
                "base algebra fails its laws:\n{}",
                gate.render_text()
            )));
        }
        let indiscrete = algebra_indiscrete(&base, &restriction, &monad)?;
        let ustar = restriction.u_star(base.carrier())?;
        let witnesses = m_of_algebra(&indiscrete, bound)?;
        Ok(EnrichmentSite {
            restriction,
            monad,
            base,
            bound,
            indiscrete,
            ustar,
            witnesses,
        })
    }
}

/// One named slot of enrichment data.
#[derive(Clone, Debug)]
pub enum Slot {
    /// Book-keeping cell at a kept shape.
    KeptObject { shape: Obj, cell: usize },
    /// Hom-object cell at a non-kept shape (one per possible cell position
    /// in the base).
    HomObject { shape: Obj, cell: usize },
    /// Composition arrow for one witness arrow.
    HomArrow { op: OpTerm, index: usize },
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Slot::KeptObject { shape, cell } => {
                write!(f, "kept object cell ({}, {cell})", shape.0)
            }
            Slot::HomObject { shape, cell } => {
                write!(f, "hom object for position ({}, {cell})", shape.0)
            }
            Slot::HomArrow { op, index } => {
                write!(f, "composition arrow for witness ({op}, {index})")
            }
        }
    }
}

/// Deterministic slot listing for a site: kept book-keeping cells, one
/// Hom-object per cell position at each non-kept shape, and one composition
/// arrow per in-bound witness arrow.
pub fn required_slots(site: &EnrichmentSite) -> Vec<Slot> {
    let mut out = Vec::new();
    let carrier = site.witnesses.v0();
    for c in site.monad.base().objects() {
        for cell in 0..carrier.card(c) {
            if site.restriction.is_kept(c) {
                out.push(Slot::KeptObject { shape: c, cell });
            } else {
                out.push(Slot::HomObject { shape: c, cell });
            }
        }
    }
    for t in site.witnesses.ops() {
        for index in 0..site.witnesses.arrows_at(t).len() {
            out.push(Slot::HomArrow {
                op: t.clone(),
                index,
            });
        }
    }
    out
}

/// Candidate enrichment data over a site: an image cell per Hom-object
/// slot and an image arrow per composition slot. Both maps may be partial;
/// the checker reports exactly the missing slots.
pub struct EnrichmentCandidate {
    pub site: Arc<EnrichmentSite>,
    pub target: TMulticat,
    /// Image cell in the target per cell of the indiscrete carrier.
    pub hom_objects: BTreeMap<(usize, usize), usize>,
    pub hom_arrows: BTreeMap<(OpTerm, usize), ArrowRef>,
}

impl EnrichmentCandidate {
    /// Assemble the candidate into a multifunctor from the witnesses into
    /// the target. Missing fillable slots abort with a coverage error; a
    /// slot for which the target has no boundary-compatible value at all is
    /// a law failure and is reported in the returned report instead.
    pub fn assemble(&self) -> Result<Result<Multifunctor, Report>, EngineError> {
        let site = &self.site;
        let mut report = Report::new("enrichment assembly", site.bound);
        let carrier = site.witnesses.v0();
        let mut missing = Vec::new();
        let mut components: Vec<Vec<usize>> = Vec::new();
        for c in site.monad.base().objects() {
            let mut col = Vec::new();
            for cell in 0..carrier.card(c) {
                match self.hom_objects.get(&(c.0, cell)) {
                    Some(&v) if v < self.target.v0().card(c) => col.push(v),
                    Some(&v) => {
                        report.fail(
                            "hom object range",
                            format!("cell ({}, {cell}) maps to missing target cell {v}", c.0),
                        );
                        col.push(0);
                    }
                    None => missing.push(format!("hom object ({}, {cell})", c.0)),
                }
            }
            components.push(col);
        }
        if !missing.is_empty() {
            return Err(EngineError::coverage(format!(
                "unpopulated slots: {}",
                missing.join(", ")
            )));
        }
        if !report.ok() {
            return Ok(Err(report));
        }
        let obj = match PresheafMap::new(carrier.clone(), self.target.v0().clone(), components) {
            Ok(m) => m,
            Err(e) => {
                report.fail(
                    "hom object naturality",
                    format!("hom objects do not form a presheaf map: {e}"),
                );
                return Ok(Err(report));
            }
        };
        let mut arrows: BTreeMap<OpTerm, Vec<usize>> = BTreeMap::new();
        for t in site.witnesses.ops() {
            let mut col = Vec::new();
            for index in 0..site.witnesses.arrows_at(t).len() {
                match self.hom_arrows.get(&(t.clone(), index)) {
                    Some((u, j)) => {
                        if u != t || *j >= self.target.arrows_at(t).len() {
                            report.fail(
                                "hom arrow range",
                                format!("slot ({t}, {index}) filled with a missing arrow"),
                            );
                            col.push(0);
                        } else {
                            col.push(*j);
                        }
                    }
                    None => {
                        // Distinguish an unfillable slot (failure) from an
                        // unfilled one (coverage).
                        let w = site.witnesses.arrow(&(t.clone(), index));
                        let want_dom = obj.compose(&w.dom);
                        let want_cod = obj.apply((t.shape(), w.cod));
                        let fillable = self
                            .target
                            .find_arrow(t, want_dom.components(), Some(want_cod))
                            .is_some();
                        if fillable {
                            missing.push(format!("hom arrow ({t}, {index})"));
                        } else {
                            report.fail(
                                "hom arrow existence",
                                format!(
                                    "no target arrow can fill slot ({t}, {index}): needs domain {:?} and codomain {want_cod}",
                                    want_dom.components()
                                ),
                            );
                        }
                        col.push(0);
                    }
                }
            }
            arrows.insert(t.clone(), col);
        }
        if !missing.is_empty() {
            return Err(EngineError::coverage(format!(
                "unpopulated slots: {}",
                missing.join(", ")
            )));
        }
        if !report.ok() {
            return Ok(Err(report));
        }
        Ok(Ok(Multifunctor {
            source: site.witnesses.clone(),
            target: self.target.clone(),
            obj,
            arrows,
        }))
    }

    /// Populate every arrow slot with the unique boundary-compatible target
    /// arrow where one exists; slots without one stay empty and fail the
    /// check. Convenient for thin targets.
    pub fn fill_arrows_by_boundary(&mut self) -> Result<(), EngineError> {
        let site = self.site.clone();
        let carrier = site.witnesses.v0();
        let mut components: Vec<Vec<usize>> = Vec::new();
        for c in site.monad.base().objects() {
            let mut col = Vec::new();
            for cell in 0..carrier.card(c) {
                let v = self.hom_objects.get(&(c.0, cell)).copied().ok_or_else(|| {
                    EngineError::coverage("hom objects must be populated first")
                })?;
                col.push(v);
            }
            components.push(col);
        }
        let obj = PresheafMap::new(carrier.clone(), self.target.v0().clone(), components)?;
        for t in site.witnesses.ops() {
            for index in 0..site.witnesses.arrows_at(t).len() {
                let w = site.witnesses.arrow(&(t.clone(), index));
                let want_dom = obj.compose(&w.dom);
                let want_cod = obj.apply((t.shape(), w.cod));
                if let Some(j) = self
                    .target
                    .find_arrow(t, want_dom.components(), Some(want_cod))
                {
                    self.hom_arrows
                        .insert((t.clone(), index), (t.clone(), j));
                }
            }
        }
        Ok(())
    }
}

/// Verify an enrichment candidate: assemble it and check the multifunctor
/// laws (identity preservation, composition preservation, face naturality)
/// exhaustively up to the bound.
pub fn check_enrichment(e: &EnrichmentCandidate, bound: usize) -> Result<Report, EngineError> {
    let bound = bound.min(e.site.bound);
    match e.assemble()? {
        Err(report) => Ok(report),
        Ok(f) => {
            let mut report = Report::new("enrichment", bound);
            report.absorb("multifunctor", check_multifunctor(&f, bound)?);
            Ok(report)
        }
    }
}

pub enum StrengthMode {
    Strong,
    Strict,
}

/// Strength of an enrichment over a further restriction: the assembled
/// multifunctor must preserve (distinguished) universal arrows there. The
/// witness side always carries its unique-arrow choice; the target choice
/// is required for the strict mode.
pub fn check_enrichment_strength(
    e: &EnrichmentCandidate,
    further: &Restriction,
    mode: StrengthMode,
    target_choice: Option<&Choice>,
    bound: usize,
) -> Result<Report, EngineError> {
    let bound = bound.min(e.site.bound);
    let f = match e.assemble()? {
        Ok(f) => f,
        Err(report) => return Ok(report),
    };
    match mode {
        StrengthMode::Strong => is_strong(&f, further, bound),
        StrengthMode::Strict => {
            let src_choice = unique_arrow_choice(&e.site.witnesses, bound)?;
            let tgt = target_choice.ok_or_else(|| {
                EngineError::input("strict mode needs the target's distinguished choice")
            })?;
            is_strict(&f, further, &src_choice, tgt, bound)
        }
    }
}

/// A map of enriched algebras: an algebra map of the bases together with a
/// transformation filling the triangle over the common target.
pub struct EnrichedMap {
    pub from: Arc<EnrichmentCandidate>,
    pub to: Arc<EnrichmentCandidate>,
    /// Base algebra map on the kept carriers.
    pub algebra_map: PresheafMap,
    /// Per witness arrow of the source site, a target arrow from
    /// `H(dom)` to `H'(Φ cod)`.
    pub tau: BTreeMap<(OpTerm, usize), ArrowRef>,
}

/// The multifunctor between witness multicategories induced by an algebra
/// map of the bases.
pub fn induced_witness_functor(
    from: &EnrichmentSite,
    to: &EnrichmentSite,
    algebra_map: &PresheafMap,
) -> Result<Multifunctor, EngineError> {
    // Object part: postcomposition on the indiscrete extensions, computed
    // through the defining hom data.
    let ambient = from.monad.base().clone();
    let mut components = Vec::with_capacity(ambient.object_count());
    for c in ambient.objects() {
        let mut col = Vec::with_capacity(from.ustar.maps[c.0].len());
        for phi in &from.ustar.maps[c.0] {
            let pushed = algebra_map.compose(phi);
            let idx = to.ustar.maps[c.0]
                .iter()
                .position(|psi| psi.components() == pushed.components())
                .ok_or_else(|| {
                    EngineError::input("algebra map does not transport an indiscrete cell")
                })?;
            col.push(idx);
        }
        components.push(col);
    }
    let obj = PresheafMap::new(
        from.witnesses.v0().clone(),
        to.witnesses.v0().clone(),
        components,
    )?;
    // Arrow part: witnesses are determined by their domains.
    let mut arrows: BTreeMap<OpTerm, Vec<usize>> = BTreeMap::new();
    for t in from.witnesses.ops() {
        let mut col = Vec::new();
        for alpha in from.witnesses.arrows_at(t) {
            let pushed = obj.compose(&alpha.dom);
            let j = to
                .witnesses
                .find_arrow(t, pushed.components(), None)
                .ok_or_else(|| EngineError::input("pushed witness domain missing"))?;
            col.push(j);
        }
        arrows.insert(t.clone(), col);
    }
    Ok(Multifunctor {
        source: from.witnesses.clone(),
        target: to.witnesses.clone(),
        obj,
        arrows,
    })
}

/// Validate a map of enriched algebras: the base map satisfies the algebra
/// laws, and the transformation data is closed under pre- and
/// postcomposition in the triangle over the target.
pub fn check_enriched_map(m: &EnrichedMap, bound: usize) -> Result<Report, EngineError> {
    let bound = bound.min(m.from.site.bound).min(m.to.site.bound);
    let mut report = Report::new("enriched map", bound);
    let from_site = &m.from.site;
    let to_site = &m.to.site;
    // Algebra map on the bases.
    let a = &from_site.base;
    let b = &to_site.base;
    if m.algebra_map.source().as_ref() != a.carrier().as_ref()
        || m.algebra_map.target().as_ref() != b.carrier().as_ref()
    {
        return Err(EngineError::input("algebra map endpoints mismatch"));
    }
    for d in a.monad().base().objects() {
        for t in a.monad().ops_at(d, bound)? {
            let arity = a.monad().arity(&t)?;
            for att in crate::fincat::hom_set(&arity, a.carrier())? {
                let lhs = m.algebra_map.apply((d, a.eval(&t, &att)?));
                let pushed = m.algebra_map.compose(&att);
                let rhs = b.eval(&t, &pushed)?;
                if lhs == rhs {
                    report.pass();
                } else {
                    report.fail(
                        "algebra map",
                        format!("map does not commute with eval({t}, -): {lhs} vs {rhs}"),
                    );
                }
            }
        }
    }
    if !report.ok() {
        return Ok(report);
    }
    // Transformation in the triangle.
    let h = match m.from.assemble()? {
        Ok(f) => f,
        Err(r) => {
            report.absorb("source enrichment", r);
            return Ok(report);
        }
    };
    let h2 = match m.to.assemble()? {
        Ok(f) => f,
        Err(r) => {
            report.absorb("target enrichment", r);
            return Ok(report);
        }
    };
    let phi = induced_witness_functor(from_site, to_site, &m.algebra_map)?;
    let composite = compose_multifunctors(&h2, &phi);
    let mut assign: BTreeMap<OpTerm, Vec<usize>> = BTreeMap::new();
    for t in from_site.witnesses.ops() {
        let mut col = Vec::new();
        for index in 0..from_site.witnesses.arrows_at(t).len() {
            match m.tau.get(&(t.clone(), index)) {
                Some((u, j)) if u == t => col.push(*j),
                _ => {
                    return Err(EngineError::coverage(format!(
                        "transformation slot ({t}, {index}) unpopulated"
                    )))
                }
            }
        }
        assign.insert(t.clone(), col);
    }
    let tr = Transformation {
        from: h,
        to: composite,
        assign,
    };
    report.absorb("transformation", check_transformation(&tr, bound)?);
    Ok(report)
}

/// Brute-force enumeration of enriched maps between two candidates over
/// the same target, counting base maps and transformation fillings that
/// pass validation.
pub fn enumerate_enriched_maps(
    from: &Arc<EnrichmentCandidate>,
    to: &Arc<EnrichmentCandidate>,
    bound: usize,
) -> Result<Vec<EnrichedMap>, EngineError> {
    let mut out = Vec::new();
    let a = &from.site.base;
    let b = &to.site.base;
    for algebra_map in crate::fincat::hom_set(a.carrier(), b.carrier())? {
        // Transformation slots, filled by boundary where unique.
        let h = match from.assemble()? {
            Ok(f) => f,
            Err(_) => continue,
        };
        let h2 = match to.assemble()? {
            Ok(f) => f,
            Err(_) => continue,
        };
        let Ok(phi) = induced_witness_functor(&from.site, &to.site, &algebra_map) else {
            continue;
        };
        let composite = compose_multifunctors(&h2, &phi);
        let mut tau = BTreeMap::new();
        let mut total = true;
        for t in from.site.witnesses.ops() {
            for index in 0..from.site.witnesses.arrows_at(t).len() {
                let alpha = from.site.witnesses.arrow(&(t.clone(), index));
                let want_dom = h.obj.compose(&alpha.dom);
                let want_cod = composite.obj.apply((t.shape(), alpha.cod));
                match from
                    .target
                    .find_arrow(t, want_dom.components(), Some(want_cod))
                {
                    Some(j) => {
                        tau.insert((t.clone(), index), (t.clone(), j));
                    }
                    None => {
                        total = false;
                    }
                }
            }
        }
        if !total {
            continue;
        }
        let cand = EnrichedMap {
            from: from.clone(),
            to: to.clone(),
            algebra_map,
            tau,
        };
        if check_enriched_map(&cand, bound)?.ok() {
            out.push(cand);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{monoid_algebra, MonoidTable};
    use crate::fincat::FinCat;
    use crate::fixtures::{boolean_poset_multicat, poset_double_category, set_algebra, z2_algebra};
    use crate::instances::{fc_monad, fmc_monad, list_monad};
    use crate::multicat::{enumerate_multifunctors, terminal_multicat};
    use crate::shapes::restrict_monad;

    fn g0() -> Restriction {
        Restriction::by_names(FinCat::graph_shape(), &["0"]).unwrap()
    }

    /// Site for categories enriched over the vertex restriction of the
    /// free category monad, with an n-element object set.
    fn category_site(n: usize, bound: usize) -> Arc<EnrichmentSite> {
        let fc = fc_monad();
        let r = g0();
        let base = set_algebra(&restrict_monad(&fc, &r), n, bound).unwrap();
        Arc::new(EnrichmentSite::new(base, r, fc, bound).unwrap())
    }

    /// The sixteen Hom assignments of a 2-element set into the Boolean
    /// poset, indexed by the relation they describe.
    fn boolean_candidates(bound: usize) -> Vec<(Vec<Vec<bool>>, EnrichmentCandidate)> {
        let site = category_site(2, bound);
        let target = boolean_poset_multicat(bound).unwrap();
        let carrier = site.witnesses.v0().clone();
        let g1 = site.monad.base().clone();
        let s = g1.morphism_by_name("s").unwrap();
        let t = g1.morphism_by_name("t").unwrap();
        let mut out = Vec::new();
        for code in 0..16usize {
            let rel: Vec<Vec<bool>> = (0..2)
                .map(|a| (0..2).map(|b| (code >> (2 * a + b)) & 1 == 1).collect())
                .collect();
            let mut hom_objects = BTreeMap::new();
            for v in 0..carrier.card(Obj(0)) {
                hom_objects.insert((0, v), 0);
            }
            for e in 0..carrier.card(Obj(1)) {
                let a = carrier.act(s, e);
                let b = carrier.act(t, e);
                hom_objects.insert((1, e), if rel[a][b] { 1 } else { 0 });
            }
            let mut cand = EnrichmentCandidate {
                site: site.clone(),
                target: target.clone(),
                hom_objects,
                hom_arrows: BTreeMap::new(),
            };
            cand.fill_arrows_by_boundary().unwrap();
            out.push((rel, cand));
        }
        out
    }

    fn is_preorder(rel: &[Vec<bool>]) -> bool {
        let n = rel.len();
        (0..n).all(|a| rel[a][a])
            && (0..n).all(|a| {
                (0..n).all(|b| {
                    (0..n).all(|c| !(rel[a][b] && rel[b][c]) || rel[a][c])
                })
            })
    }

    #[test]
    fn boolean_enrichments_are_exactly_the_preorders() {
        let mut passes = 0;
        let mut fails = 0;
        for (rel, cand) in boolean_candidates(5) {
            let rep = check_enrichment(&cand, 5).unwrap();
            assert_eq!(
                rep.ok(),
                is_preorder(&rel),
                "relation {rel:?} disagrees with the oracle:\n{}",
                rep.render_text()
            );
            if rep.ok() {
                passes += 1;
            } else {
                fails += 1;
                assert!(!rep.failures.is_empty());
            }
        }
        assert_eq!(passes, 4);
        assert_eq!(fails, 12);
    }

    #[test]
    fn terminal_target_admits_exactly_one_candidate() {
        let site = category_site(1, 4);
        let target = terminal_multicat(&site.monad, 4).unwrap();
        let carrier = site.witnesses.v0().clone();
        let mut hom_objects = BTreeMap::new();
        for c in site.monad.base().objects() {
            for cell in 0..carrier.card(c) {
                hom_objects.insert((c.0, cell), 0);
            }
        }
        let mut cand = EnrichmentCandidate {
            site,
            target,
            hom_objects,
            hom_arrows: BTreeMap::new(),
        };
        cand.fill_arrows_by_boundary().unwrap();
        let rep = check_enrichment(&cand, 4).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
    }

    #[test]
    fn slot_listing_matches_the_unwound_description() {
        let site = category_site(2, 4);
        let slots = required_slots(&site);
        let kept = slots
            .iter()
            .filter(|s| matches!(s, Slot::KeptObject { .. }))
            .count();
        let homs = slots
            .iter()
            .filter(|s| matches!(s, Slot::HomObject { .. }))
            .count();
        // 2 book-keeping cells, one Hom object per ordered pair.
        assert_eq!(kept, 2);
        assert_eq!(homs, 4);
        let arrows = slots
            .iter()
            .filter(|s| matches!(s, Slot::HomArrow { .. }))
            .count();
        assert!(arrows > 0);
    }

    #[test]
    fn unpopulated_fillable_slots_are_coverage_errors() {
        let (_, cand) = boolean_candidates(4)
            .into_iter()
            .find(|(rel, _)| is_preorder(rel))
            .unwrap();
        let mut partial = EnrichmentCandidate {
            site: cand.site.clone(),
            target: cand.target.clone(),
            hom_objects: cand.hom_objects.clone(),
            hom_arrows: BTreeMap::new(),
        };
        // Leave every arrow slot empty: they are fillable, so coverage.
        match check_enrichment(&partial, 4) {
            Err(EngineError::Coverage(msg)) => assert!(msg.contains("unpopulated")),
            other => panic!("expected coverage error, got {other:?}"),
        }
        partial.fill_arrows_by_boundary().unwrap();
        assert!(check_enrichment(&partial, 4).unwrap().ok());
    }

    #[test]
    fn meet_semilattice_enrichment_is_strict_and_mutations_fail() {
        // A monoid enriched in the double category of its own order, with
        // the meet arrows as vertex slots.
        let bound = 4;
        let fmc = fmc_monad();
        let r = g0();
        let table = MonoidTable::meet2();
        let base = monoid_algebra(&restrict_monad(&fmc, &r), &table, bound).unwrap();
        let site = Arc::new(EnrichmentSite::new(base, r.clone(), fmc.clone(), bound).unwrap());
        let target = poset_double_category(&table, bound).unwrap();
        let carrier = site.witnesses.v0().clone();
        let g1 = fmc.base().clone();
        let s = g1.morphism_by_name("s").unwrap();
        let t = g1.morphism_by_name("t").unwrap();
        let mut hom_objects = BTreeMap::new();
        for v in 0..carrier.card(Obj(0)) {
            let orig = site.ustar.kept_cells[0].as_ref().unwrap()[v];
            hom_objects.insert((0, v), orig);
        }
        for e in 0..carrier.card(Obj(1)) {
            let a = hom_objects[&(0, carrier.act(s, e))];
            let b = hom_objects[&(0, carrier.act(t, e))];
            hom_objects.insert((1, e), a * table.order + b);
        }
        let mut cand = EnrichmentCandidate {
            site: site.clone(),
            target: target.clone(),
            hom_objects,
            hom_arrows: BTreeMap::new(),
        };
        cand.fill_arrows_by_boundary().unwrap();
        let rep = check_enrichment(&cand, bound).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
        // Distinguished choice in the target: the meet arrows.
        let mut choice = Choice::new();
        for u in target.monad().ops_at(Obj(0), bound).unwrap() {
            for (i, a) in target.arrows_at(&u).iter().enumerate() {
                if a.cod == table.product(&a.dom.components()[0]) {
                    choice.insert((u.clone(), a.dom.components().clone()), i);
                }
            }
        }
        let strict = check_enrichment_strength(
            &cand,
            &r,
            StrengthMode::Strict,
            Some(&choice),
            bound,
        )
        .unwrap();
        assert!(strict.ok(), "{}", strict.render_text());
        let strong =
            check_enrichment_strength(&cand, &r, StrengthMode::Strong, None, bound).unwrap();
        assert!(strong.ok(), "{}", strong.render_text());
        // Replace one vertex slot by a non-universal arrow (codomain above
        // the meet): strength fails.
        let vop2 = fmc
            .ops_at(Obj(0), bound)
            .unwrap()
            .into_iter()
            .find(|u| u.size == 2)
            .unwrap();
        let witness_idx = site
            .witnesses
            .arrows_at(&vop2)
            .iter()
            .position(|w| {
                // Pick the tuple (bottom, bottom): meet is bottom, but an
                // arrow to the top exists as well.
                let orig: Vec<usize> = w.dom.components()[0]
                    .iter()
                    .map(|&c| site.ustar.kept_cells[0].as_ref().unwrap()[c])
                    .collect();
                orig == vec![1, 1]
            })
            .unwrap();
        let skewed_arrow = target
            .find_arrow(&vop2, &[vec![1, 1], vec![]], Some(0))
            .expect("arrow above the meet exists");
        let mut skewed = EnrichmentCandidate {
            site: site.clone(),
            target: target.clone(),
            hom_objects: cand.hom_objects.clone(),
            hom_arrows: cand.hom_arrows.clone(),
        };
        skewed
            .hom_arrows
            .insert((vop2.clone(), witness_idx), (vop2.clone(), skewed_arrow));
        let strong2 =
            check_enrichment_strength(&skewed, &r, StrengthMode::Strong, None, bound).unwrap();
        assert!(!strong2.ok());
        // Vacuous strength over the empty restriction.
        let empty = Restriction::empty(g1.clone());
        let vac = check_enrichment_strength(&cand, &empty, StrengthMode::Strong, None, bound)
            .unwrap();
        assert!(vac.ok());
    }

    #[test]
    fn enriched_maps_count_monotone_functions() {
        let bound = 4;
        let cands = boolean_candidates(bound);
        let discrete = cands
            .iter()
            .find(|(rel, _)| *rel == vec![vec![true, false], vec![false, true]])
            .unwrap();
        let total = cands
            .iter()
            .find(|(rel, _)| *rel == vec![vec![true, true], vec![false, true]])
            .unwrap();
        let from = Arc::new(EnrichmentCandidate {
            site: discrete.1.site.clone(),
            target: discrete.1.target.clone(),
            hom_objects: discrete.1.hom_objects.clone(),
            hom_arrows: discrete.1.hom_arrows.clone(),
        });
        let to = Arc::new(EnrichmentCandidate {
            site: total.1.site.clone(),
            target: total.1.target.clone(),
            hom_objects: total.1.hom_objects.clone(),
            hom_arrows: total.1.hom_arrows.clone(),
        });
        let maps = enumerate_enriched_maps(&from, &to, bound).unwrap();
        // Monotone maps from the discrete order to the total order: all
        // four functions.
        let monotone = {
            let rel_from = [[true, false], [false, true]];
            let rel_to = [[true, true], [false, true]];
            let mut count = 0;
            for f0 in 0..2usize {
                for f1 in 0..2usize {
                    let f = [f0, f1];
                    let ok = (0..2).all(|a| {
                        (0..2).all(|b| !rel_from[a][b] || rel_to[f[a]][f[b]])
                    });
                    if ok {
                        count += 1;
                    }
                }
            }
            count
        };
        assert_eq!(maps.len(), monotone);
        assert_eq!(maps.len(), 4);
        // Identity map on a single candidate passes.
        let idm = enumerate_enriched_maps(&from, &from, bound).unwrap();
        assert!(!idm.is_empty());
        // Violating the closure law fails with a witness.
        let mut broken = EnrichedMap {
            from: from.clone(),
            to: to.clone(),
            algebra_map: maps[0].algebra_map.clone(),
            tau: maps[0].tau.clone(),
        };
        // Redirect one component to an arrow with the wrong boundary.
        let (k, old) = broken
            .tau
            .iter()
            .find(|(k, _)| to.target.arrows_at(&k.0).len() >= 2)
            .map(|(k, v)| (k.clone(), v.clone()))
            .unwrap();
        let op = k.0.clone();
        let alt = (0..to.target.arrows_at(&op).len())
            .find(|&j| j != old.1)
            .unwrap();
        broken.tau.insert(k, (op, alt));
        let rep = check_enriched_map(&broken, bound).unwrap();
        assert!(!rep.ok());
    }

    #[test]
    fn full_restriction_recovers_algebra_maps() {
        let bound = 4;
        let list = list_monad();
        let full = Restriction::full(list.base().clone());
        let z2 = monoid_algebra(&restrict_monad(&list, &full), &MonoidTable::cyclic(2), bound)
            .unwrap();
        let site = Arc::new(EnrichmentSite::new(z2, full, list.clone(), bound).unwrap());
        let target = crate::multicat::m_of_algebra(&z2_algebra(bound).unwrap(), bound).unwrap();
        // Candidates: one per function on the carrier, arrows filled by
        // boundary; valid ones must match the multifunctor count.
        let mut valid = 0;
        for f0 in 0..2usize {
            for f1 in 0..2usize {
                let mut hom_objects = BTreeMap::new();
                hom_objects.insert((0, 0), f0);
                hom_objects.insert((0, 1), f1);
                let mut cand = EnrichmentCandidate {
                    site: site.clone(),
                    target: target.clone(),
                    hom_objects,
                    hom_arrows: BTreeMap::new(),
                };
                cand.fill_arrows_by_boundary().unwrap();
                match check_enrichment(&cand, bound) {
                    Ok(rep) if rep.ok() => valid += 1,
                    _ => {}
                }
            }
        }
        let fs = enumerate_multifunctors(&site.witnesses, &target, bound).unwrap();
        assert_eq!(valid, fs.len());
        assert_eq!(valid, 2);
    }

    #[test]
    fn enrichment_check_is_monotone_in_bound() {
        for (rel, cand) in boolean_candidates(5) {
            if !is_preorder(&rel) {
                continue;
            }
            assert!(check_enrichment(&cand, 5).unwrap().ok());
            assert!(check_enrichment(&cand, 4).unwrap().ok());
            assert!(check_enrichment(&cand, 3).unwrap().ok());
        }
    }
}
