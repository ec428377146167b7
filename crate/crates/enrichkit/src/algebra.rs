//! Finite algebras for familial monads, presented by bounded evaluators.
//!
//! The full structure map of an algebra is infinite, but it is determined by
//! its values on operations up to a bound together with the unit and
//! multiplication laws. A [`FiniteAlgebra`] therefore stores one result cell
//! per (operation, attaching map) pair with the bound recorded;
//! [`FiniteAlgebra::check`] verifies the two law families by exhaustion.
//! Loaders may supply only generator evaluations and saturate the rest
//! ([`saturate`]), failing when the derivation is ambiguous.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::EngineError;
use crate::fincat::{hom_set, Obj, Presheaf, PresheafMap};
use crate::monad::{FamilialMonad, Mu, OpAssignment, OpTerm};
use crate::report::Report;
use crate::shapes::{restrict_monad, Restriction, UStar};

type EvalKey = (OpTerm, Vec<Vec<usize>>);

#[derive(Clone)]
pub struct FiniteAlgebra {
    monad: FamilialMonad,
    carrier: Arc<Presheaf>,
    bound: usize,
    eval: BTreeMap<EvalKey, usize>,
}

impl FiniteAlgebra {
    /// Build the evaluator table from a total evaluation function.
    pub fn from_eval_fn(
        monad: &FamilialMonad,
        carrier: &Arc<Presheaf>,
        bound: usize,
        mut f: impl FnMut(&OpTerm, &PresheafMap) -> Result<usize, EngineError>,
    ) -> Result<FiniteAlgebra, EngineError> {
        if **carrier.base() != **monad.base() {
            return Err(EngineError::input("carrier over a different base"));
        }
        let mut eval = BTreeMap::new();
        for c in monad.base().objects() {
            for t in monad.ops_at(c, bound)? {
                let a = monad.arity(&t)?;
                for m in hom_set(&a, carrier)? {
                    let v = f(&t, &m)?;
                    if v >= carrier.card(c) {
                        return Err(EngineError::input(format!(
                            "evaluation of {t} out of range"
                        )));
                    }
                    eval.insert((t.clone(), m.components().clone()), v);
                }
            }
        }
        Ok(FiniteAlgebra {
            monad: monad.clone(),
            carrier: carrier.clone(),
            bound,
            eval,
        })
    }

    pub(crate) fn from_table(
        monad: FamilialMonad,
        carrier: Arc<Presheaf>,
        bound: usize,
        eval: BTreeMap<EvalKey, usize>,
    ) -> FiniteAlgebra {
        FiniteAlgebra {
            monad,
            carrier,
            bound,
            eval,
        }
    }

    pub fn monad(&self) -> &FamilialMonad {
        &self.monad
    }

    pub fn carrier(&self) -> &Arc<Presheaf> {
        &self.carrier
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn entries(&self) -> impl Iterator<Item = (&EvalKey, &usize)> {
        self.eval.iter()
    }

    pub fn eval(&self, t: &OpTerm, a: &PresheafMap) -> Result<usize, EngineError> {
        self.eval
            .get(&(t.clone(), a.components().clone()))
            .copied()
            .ok_or_else(|| {
                EngineError::coverage(format!("eval undefined on ({t}, {:?})", a.components()))
            })
    }

    /// The attaching map `arity(eta(c)) → A` classifying a cell.
    pub fn transpose(&self, c: Obj, x: usize) -> Result<PresheafMap, EngineError> {
        transpose_cell(&self.monad, &self.carrier, c, x)
    }

    /// Return a copy with a single evaluation entry replaced; for mutation
    /// sensitivity tests.
    pub fn with_entry(&self, idx: usize, new_value: usize) -> FiniteAlgebra {
        let mut out = self.clone();
        if let Some((k, _)) = self.eval.iter().nth(idx) {
            out.eval.insert(k.clone(), new_value);
        }
        out
    }

    pub fn entry_count(&self) -> usize {
        self.eval.len()
    }

    /// Exhaustively check the unit and multiplication laws up to `bound`.
    pub fn check(&self, bound: usize) -> Result<Report, EngineError> {
        let bound = bound.min(self.bound);
        let mut report = Report::new(
            format!("algebra[{} on {} cells]", self.monad.name(), self.carrier.size()),
            bound,
        );
        let base = self.monad.base().clone();
        // Coverage first: every in-bound pair must be evaluable.
        for c in base.objects() {
            for t in self.monad.ops_at(c, bound)? {
                let a = self.monad.arity(&t)?;
                for m in hom_set(&a, &self.carrier)? {
                    self.eval(&t, &m)?;
                }
            }
        }
        // Unit law, for units within the bound.
        for c in base.objects() {
            if self.monad.eta(c).size > bound {
                report.skip();
                continue;
            }
            for x in 0..self.carrier.card(c) {
                let tr = self.transpose(c, x)?;
                match self.eval(&self.monad.eta(c), &tr) {
                    Ok(v) if v == x => report.pass(),
                    Ok(v) => report.fail(
                        "unit",
                        format!(
                            "eval(eta({}), transpose({x})) = {v}",
                            base.object_name(c)
                        ),
                    ),
                    Err(e) => return Err(e),
                }
            }
        }
        // Multiplication law over all bounded substitution instances.
        let mut hom_cache: BTreeMap<OpTerm, Arc<Vec<PresheafMap>>> = BTreeMap::new();
        for (f, mu) in substitution_instances(&self.monad, bound)? {
            let t = f.base().clone();
            let maps = match hom_cache.get(&mu.term) {
                Some(v) => v.clone(),
                None => {
                    let a = self.monad.arity(&mu.term)?;
                    let v = Arc::new(hom_set(&a, &self.carrier)?);
                    hom_cache.insert(mu.term.clone(), v.clone());
                    v
                }
            };
            let embeds: Vec<PresheafMap> = mu.node_cells.iter().map(|&x| mu.embed(x)).collect();
            let t_arity = self.monad.arity(&t)?;
            for a in maps.iter() {
                let lhs = self.eval(&mu.term, a)?;
                // Inner evaluation per arity cell of t.
                let mut components: Vec<Vec<usize>> =
                    base.objects().map(|_| Vec::new()).collect();
                for (k, &x) in mu.node_cells.iter().enumerate() {
                    let restricted = a.compose(&embeds[k]);
                    components[x.0 .0].push(self.eval(f.value(x), &restricted)?);
                }
                let b = match PresheafMap::new(t_arity.clone(), self.carrier.clone(), components) {
                    Ok(b) => b,
                    Err(e) => {
                        report.fail(
                            "multiplication",
                            format!("inner evaluations of ({t}, f) not natural: {e}"),
                        );
                        continue;
                    }
                };
                let rhs = self.eval(&t, &b)?;
                if lhs == rhs {
                    report.pass();
                } else {
                    report.fail(
                        "multiplication",
                        format!(
                            "eval({}, pasted) = {lhs} but eval({t}, inner evals) = {rhs}",
                            mu.term
                        ),
                    );
                }
            }
        }
        Ok(report)
    }
}

/// The attaching map `arity(eta(c)) → X` classifying a cell of `X`.
pub fn transpose_cell(
    monad: &FamilialMonad,
    target: &Arc<Presheaf>,
    c: Obj,
    x: usize,
) -> Result<PresheafMap, EngineError> {
    let rep = crate::fincat::yoneda(monad.base(), c);
    let from_y = PresheafMap::from_yoneda(&rep, target, x);
    Ok(from_y.compose(&monad.eta_iso(c)?))
}

/// Every bounded substitution instance `(f, mu(f))` with both the values and
/// the composite within the bound.
pub fn substitution_instances(
    monad: &FamilialMonad,
    bound: usize,
) -> Result<Vec<(OpAssignment, Mu)>, EngineError> {
    let mut out = Vec::new();
    for c in monad.base().objects() {
        for t in monad.ops_at(c, bound)? {
            for f in monad.assignments(&t, bound)? {
                match monad.mu_term(&f) {
                    Ok(u) if u.size <= bound => {}
                    _ => continue,
                }
                let mu = monad.mu(&f)?;
                out.push((f, mu));
            }
        }
    }
    Ok(out)
}

/// Saturate a partial evaluator: unit evaluations are forced, and the
/// multiplication law propagates generator evaluations to every derivable
/// operation. Fails when two derivations disagree.
pub fn saturate(
    monad: &FamilialMonad,
    carrier: &Arc<Presheaf>,
    bound: usize,
    given: Vec<(OpTerm, Vec<Vec<usize>>, usize)>,
) -> Result<FiniteAlgebra, EngineError> {
    let mut eval: BTreeMap<EvalKey, usize> = BTreeMap::new();
    let insert = |eval: &mut BTreeMap<EvalKey, usize>,
                      key: EvalKey,
                      value: usize|
     -> Result<bool, EngineError> {
        match eval.get(&key) {
            Some(&v) if v == value => Ok(false),
            Some(&v) => Err(EngineError::input(format!(
                "ambiguous saturation: ({}, {:?}) gets both {v} and {value}",
                key.0, key.1
            ))),
            None => {
                eval.insert(key, value);
                Ok(true)
            }
        }
    };
    for (t, comps, v) in given {
        monad.validate_term(&t)?;
        insert(&mut eval, (t, comps), v)?;
    }
    // Unit evaluations are forced by the unit law.
    for c in monad.base().objects() {
        let e = monad.eta(c);
        if e.size > bound {
            continue;
        }
        for x in 0..carrier.card(c) {
            let tr = transpose_cell(monad, carrier, c, x)?;
            insert(&mut eval, (e.clone(), tr.components().clone()), x)?;
        }
    }
    let instances = substitution_instances(monad, bound)?;
    let mut homs: BTreeMap<OpTerm, Vec<PresheafMap>> = BTreeMap::new();
    for c in monad.base().objects() {
        for t in monad.ops_at(c, bound)? {
            let a = monad.arity(&t)?;
            homs.insert(t.clone(), hom_set(&a, carrier)?);
        }
    }
    let base = monad.base().clone();
    // Every derivable law instance is applied exactly once; insertion
    // detects disagreement with supplied or previously derived values.
    let mut done: Vec<Vec<bool>> = instances
        .iter()
        .map(|(_, mu)| vec![false; homs.get(&mu.term).map_or(0, |m| m.len())])
        .collect();
    loop {
        let mut progressed = false;
        for (idx, (f, mu)) in instances.iter().enumerate() {
            let t = f.base();
            let Some(maps) = homs.get(&mu.term) else {
                continue;
            };
            let embeds: Vec<PresheafMap> = mu.node_cells.iter().map(|&x| mu.embed(x)).collect();
            for (ai, a) in maps.iter().enumerate() {
                if done[idx][ai] {
                    continue;
                }
                let key = (mu.term.clone(), a.components().clone());
                // Derivable when all inner evaluations and the outer one are
                // known.
                let mut components: Vec<Vec<usize>> =
                    base.objects().map(|_| Vec::new()).collect();
                let mut known = true;
                for (k, &x) in mu.node_cells.iter().enumerate() {
                    let restricted = a.compose(&embeds[k]);
                    match eval.get(&(f.value(x).clone(), restricted.components().clone())) {
                        Some(&v) => components[x.0 .0].push(v),
                        None => {
                            known = false;
                            break;
                        }
                    }
                }
                if !known {
                    continue;
                }
                let t_arity = monad.arity(t)?;
                let Ok(b) = PresheafMap::new(t_arity, carrier.clone(), components) else {
                    continue;
                };
                let Some(&outer) = eval.get(&(t.clone(), b.components().clone())) else {
                    continue;
                };
                done[idx][ai] = true;
                if insert(&mut eval, key, outer)? {
                    progressed = true;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    Ok(FiniteAlgebra {
        monad: monad.clone(),
        carrier: carrier.clone(),
        bound,
        eval,
    })
}

/// Restrict an algebra for a graded monad to the kept shapes.
pub fn algebra_restrict(
    a: &FiniteAlgebra,
    r: &Restriction,
) -> Result<FiniteAlgebra, EngineError> {
    let restricted = restrict_monad(a.monad(), r);
    let carrier = r.u_upper(a.carrier());
    FiniteAlgebra::from_eval_fn(&restricted, &carrier, a.bound(), |t, m| {
        // Extend the kept-shape attachment by empty components.
        let inner_t = OpTerm {
            monad: a.monad().name().clone(),
            shape: r.to_ambient(t.shape()).0,
            payload: t.payload.clone(),
            size: t.size,
        };
        let mut components: Vec<Vec<usize>> =
            vec![Vec::new(); a.monad().base().object_count()];
        for d in r.sub().objects() {
            components[r.to_ambient(d).0] = m.components()[d.0].clone();
        }
        let inner_a = PresheafMap::new(
            a.monad().arity(&inner_t)?,
            a.carrier().clone(),
            components,
        )?;
        a.eval(&inner_t, &inner_a)
    })
}

/// An algebra on the kept shapes extends to the whole base with the
/// indiscrete carrier: above the kept shapes there is exactly one cell with
/// any composable boundary, so the evaluator is forced.
pub fn algebra_indiscrete(
    y: &FiniteAlgebra,
    r: &Restriction,
    ambient_monad: &FamilialMonad,
) -> Result<FiniteAlgebra, EngineError> {
    if **y.monad().base() != **r.sub() {
        return Err(EngineError::input("algebra not over the kept shapes"));
    }
    let ustar = r.u_star(y.carrier())?;
    let carrier = ustar.presheaf.clone();
    let bound = y.bound();
    let ambient = ambient_monad.base().clone();
    FiniteAlgebra::from_eval_fn(ambient_monad, &carrier, bound, |t, a| {
        let c = t.shape();
        if r.is_kept(c) {
            // Graded operation: evaluate in Y through the kept-cell
            // bijections.
            let ty = OpTerm {
                monad: y.monad().name().clone(),
                shape: r.from_ambient(c).unwrap().0,
                payload: t.payload.clone(),
                size: t.size,
            };
            let ay = restricted_attachment(y, r, &ustar, ambient_monad, t, a, None)?;
            let v = y.eval(&ty, &ay)?;
            Ok(ustar.cell_from_kept(c, v))
        } else {
            // The boundary composites determine a unique cell.
            let rep = crate::fincat::yoneda(&ambient, c);
            let mut components: Vec<Vec<usize>> =
                vec![Vec::new(); r.sub().object_count()];
            for d in r.sub().objects() {
                let od = r.to_ambient(d);
                for &i in &rep.cell_mor[od.0] {
                    let ti = ambient_monad.act(i, t);
                    let tyi = OpTerm {
                        monad: y.monad().name().clone(),
                        shape: d.0,
                        payload: ti.payload.clone(),
                        size: ti.size,
                    };
                    let ai = restricted_attachment(y, r, &ustar, ambient_monad, &ti, a, Some((i, t)))?;
                    components[d.0].push(y.eval(&tyi, &ai)?);
                }
            }
            ustar.maps[c.0]
                .iter()
                .position(|phi| *phi.components() == components)
                .ok_or_else(|| {
                    EngineError::input(format!(
                        "no indiscrete cell with the composed boundary of {t}"
                    ))
                })
        }
    })
}

/// Transpose an attachment `arity(t) → u_*Y` (optionally first restricted
/// along an arity face) to an attachment `arity_D(t) → Y`.
fn restricted_attachment(
    y: &FiniteAlgebra,
    r: &Restriction,
    ustar: &UStar,
    ambient_monad: &FamilialMonad,
    t: &OpTerm,
    a: &PresheafMap,
    via_face: Option<(crate::fincat::Mor, &OpTerm)>,
) -> Result<PresheafMap, EngineError> {
    let attach = match via_face {
        None => a.clone(),
        Some((i, outer)) => a.compose(&ambient_monad.arity_face(i, outer)?),
    };
    let arity = attach.source().clone();
    for o in ambient_monad.base().objects() {
        if !r.is_kept(o) && arity.card(o) > 0 {
            return Err(EngineError::input(format!(
                "operation {t} is not graded over the kept shapes"
            )));
        }
    }
    let ty = OpTerm {
        monad: y.monad().name().clone(),
        shape: r.from_ambient(t.shape()).unwrap().0,
        payload: t.payload.clone(),
        size: t.size,
    };
    let components: Vec<Vec<usize>> = r
        .sub()
        .objects()
        .map(|d| {
            let od = r.to_ambient(d);
            let bij = ustar.kept_cells[od.0].as_ref().unwrap();
            attach.components()[od.0]
                .iter()
                .map(|&cell| bij[cell])
                .collect()
        })
        .collect();
    PresheafMap::new(y.monad().arity(&ty)?, y.carrier().clone(), components)
}

// ---------------------------------------------------------------------------
// fixture builders

/// A finite monoid with a chosen unit element, as an evaluation table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonoidTable {
    pub order: usize,
    pub unit: usize,
    /// `mul[a][b]` is the product `a · b`.
    pub mul: Vec<Vec<usize>>,
}

impl MonoidTable {
    pub fn validate(&self) -> Result<(), EngineError> {
        let n = self.order;
        if self.mul.len() != n || self.mul.iter().any(|r| r.len() != n) {
            return Err(EngineError::input("monoid table has wrong shape"));
        }
        for a in 0..n {
            if self.mul[self.unit][a] != a || self.mul[a][self.unit] != a {
                return Err(EngineError::input("monoid unit law fails"));
            }
            for b in 0..n {
                if self.mul[a][b] >= n {
                    return Err(EngineError::input("monoid product out of range"));
                }
                for c in 0..n {
                    if self.mul[self.mul[a][b]][c] != self.mul[a][self.mul[b][c]] {
                        return Err(EngineError::input("monoid associativity fails"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn product(&self, xs: &[usize]) -> usize {
        xs.iter().fold(self.unit, |acc, &x| self.mul[acc][x])
    }

    pub fn cyclic(n: usize) -> MonoidTable {
        MonoidTable {
            order: n,
            unit: 0,
            mul: (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect(),
        }
    }

    /// The two-element meet semilattice `{1, 0}` with unit 1 (element 0).
    pub fn meet2() -> MonoidTable {
        MonoidTable {
            order: 2,
            unit: 0,
            mul: vec![vec![0, 1], vec![1, 1]],
        }
    }

    /// Every monoid structure on `{0..n}` with unit 0, by brute force.
    pub fn enumerate(n: usize) -> Vec<MonoidTable> {
        assert!(n >= 1 && n <= 3, "intended for tiny carriers");
        let free: Vec<(usize, usize)> = (1..n)
            .flat_map(|a| (1..n).map(move |b| (a, b)))
            .collect();
        let mut out = Vec::new();
        let total = n.pow(free.len() as u32);
        for code in 0..total {
            let mut mul = vec![vec![0; n]; n];
            for a in 0..n {
                mul[0][a] = a;
                mul[a][0] = a;
            }
            let mut c = code;
            for &(a, b) in &free {
                mul[a][b] = c % n;
                c /= n;
            }
            let t = MonoidTable {
                order: n,
                unit: 0,
                mul,
            };
            if t.validate().is_ok() {
                out.push(t);
            }
        }
        out
    }
}

/// A finite monoid as an algebra for the free monoid monad.
pub fn monoid_algebra(
    monad: &FamilialMonad,
    table: &MonoidTable,
    bound: usize,
) -> Result<FiniteAlgebra, EngineError> {
    table.validate()?;
    let carrier = crate::instances::finite_set(monad.base(), table.order);
    FiniteAlgebra::from_eval_fn(monad, &carrier, bound, |_t, a| {
        Ok(table.product(&a.components()[0]))
    })
}

/// A finite category presented by arrow lists and a composition table.
#[derive(Clone, Debug)]
pub struct CategoryTable {
    pub objects: usize,
    /// `(src, dst)` per arrow.
    pub arrows: Vec<(usize, usize)>,
    pub identity: Vec<usize>,
    /// `compose[g][f]` is `g ∘ f` when `dst(f) = src(g)`.
    pub compose: Vec<Vec<Option<usize>>>,
}

impl CategoryTable {
    /// The free category on a linear graph `0 → 1 → ... → n-1`:
    /// arrows are the intervals `i ≤ j`.
    pub fn linear(n: usize) -> CategoryTable {
        let mut arrows = Vec::new();
        for i in 0..n {
            for j in i..n {
                arrows.push((i, j));
            }
        }
        let idx = |i: usize, j: usize| arrows.iter().position(|&a| a == (i, j)).unwrap();
        let identity = (0..n).map(|i| idx(i, i)).collect();
        let mut compose = vec![vec![None; arrows.len()]; arrows.len()];
        for (fi, &(a, b)) in arrows.iter().enumerate() {
            for (gi, &(c, d)) in arrows.iter().enumerate() {
                if b == c {
                    compose[gi][fi] = Some(idx(a, d));
                }
            }
        }
        CategoryTable {
            objects: n,
            arrows,
            identity,
            compose,
        }
    }

    fn compose_path(&self, path: &[usize]) -> Option<usize> {
        match path.split_first() {
            None => None,
            Some((&first, rest)) => {
                let mut acc = first;
                for &f in rest {
                    acc = self.compose[f][acc]?;
                }
                Some(acc)
            }
        }
    }
}

/// A finite category as an algebra for the free category monad.
pub fn category_algebra(
    monad: &FamilialMonad,
    table: &CategoryTable,
    bound: usize,
) -> Result<FiniteAlgebra, EngineError> {
    let g1 = monad.base();
    let s = g1.morphism_by_name("s").unwrap();
    let t = g1.morphism_by_name("t").unwrap();
    let mut action = vec![Vec::new(); g1.morphism_count()];
    action[g1.identity(Obj(0)).0] = (0..table.objects).collect();
    action[g1.identity(Obj(1)).0] = (0..table.arrows.len()).collect();
    action[s.0] = table.arrows.iter().map(|&(a, _)| a).collect();
    action[t.0] = table.arrows.iter().map(|&(_, b)| b).collect();
    let carrier = Arc::new(Presheaf::new(
        g1.clone(),
        vec![table.objects, table.arrows.len()],
        action,
    )?);
    FiniteAlgebra::from_eval_fn(monad, &carrier, bound, |op, a| {
        if op.shape() == Obj(0) {
            return Ok(a.components()[0][0]);
        }
        // Arrow cells of the path arity in order compose left to right.
        let path = &a.components()[1];
        match table.compose_path(path) {
            Some(v) => Ok(v),
            None if path.is_empty() => {
                // Empty path at a vertex: the identity arrow.
                Ok(table.identity[a.components()[0][0]])
            }
            None => Err(EngineError::input("path not composable in the table")),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fincat::FinCat;
    use crate::instances::{fmc_monad, list_monad, fc_monad};
    use crate::monad::OpPayload;
    use crate::shapes::graded_check;

    fn g0() -> Restriction {
        Restriction::by_names(FinCat::graph_shape(), &["0"]).unwrap()
    }

    #[test]
    fn linear_category_is_an_algebra() {
        let fc = fc_monad();
        let a = category_algebra(&fc, &CategoryTable::linear(3), 6).unwrap();
        let r = a.check(6).unwrap();
        assert!(r.ok(), "{}", r.render_text());
    }

    #[test]
    fn cyclic_group_is_a_list_algebra() {
        let list = list_monad();
        let a = monoid_algebra(&list, &MonoidTable::cyclic(2), 6).unwrap();
        let r = a.check(6).unwrap();
        assert!(r.ok(), "{}", r.render_text());
    }

    #[test]
    fn mutated_monoid_is_flagged() {
        let list = list_monad();
        let a = monoid_algebra(&list, &MonoidTable::cyclic(2), 5).unwrap();
        let mut caught = 0;
        for idx in 0..a.entry_count().min(12) {
            let key_value = a.entries().nth(idx).map(|(k, v)| (k.clone(), *v)).unwrap();
            let mutated = a.with_entry(idx, 1 - key_value.1);
            let r = mutated.check(5).unwrap();
            if !r.ok() {
                caught += 1;
                assert!(!r.failures.is_empty());
            }
        }
        assert!(caught >= 10, "only {caught} mutants caught");
    }

    #[test]
    fn saturation_from_generators_matches_direct_table() {
        let list = list_monad();
        let table = MonoidTable::cyclic(3);
        let direct = monoid_algebra(&list, &table, 5).unwrap();
        // Supply only the nullary and binary evaluations.
        let given: Vec<_> = direct
            .entries()
            .filter(|((t, _), _)| matches!(t.payload, OpPayload::Nat { n } if n == 0 || n == 2))
            .map(|((t, c), v)| (t.clone(), c.clone(), *v))
            .collect();
        let saturated = saturate(&list, direct.carrier(), 5, given).unwrap();
        assert_eq!(saturated.entry_count(), direct.entry_count());
        let r = saturated.check(5).unwrap();
        assert!(r.ok(), "{}", r.render_text());
    }

    #[test]
    fn ambiguous_generators_are_rejected() {
        let list = list_monad();
        let table = MonoidTable::cyclic(2);
        let direct = monoid_algebra(&list, &table, 4).unwrap();
        // Generators plus one poisoned derivable entry: the ternary product
        // 1·1·1 is forced to 1 by the binary table, so claiming 0 must be
        // rejected during saturation.
        let mut given: Vec<_> = direct
            .entries()
            .filter(|((t, _), _)| matches!(t.payload, OpPayload::Nat { n } if n == 0 || n == 2))
            .map(|((t, c), v)| (t.clone(), c.clone(), *v))
            .collect();
        let ternary = direct
            .entries()
            .find(|((t, c), _)| {
                matches!(t.payload, OpPayload::Nat { n } if n == 3) && c[0] == vec![1, 1, 1]
            })
            .map(|((t, c), v)| (t.clone(), c.clone(), *v))
            .unwrap();
        assert_eq!(ternary.2, 1);
        given.push((ternary.0, ternary.1, 0));
        assert!(saturate(&list, direct.carrier(), 4, given).is_err());
    }

    #[test]
    fn indiscrete_monoidal_category_on_z2_is_lawful() {
        let fmc = fmc_monad();
        let list = list_monad();
        let r = g0();
        // The kept-shape monad on one object is the free monoid monad, so a
        // monoid is an algebra for it after relabelling.
        let restricted = restrict_monad(&fmc, &r);
        let z2 = monoid_algebra(&restricted, &MonoidTable::cyclic(2), 6).unwrap();
        let _ = list;
        assert!(z2.check(6).unwrap().ok());
        assert!(graded_check(&fmc, &r, 6).unwrap().ok());
        let m = algebra_indiscrete(&z2, &r, &fmc).unwrap();
        assert_eq!(m.carrier().card(Obj(0)), 2);
        assert_eq!(m.carrier().card(Obj(1)), 4);
        let rep = m.check(6).unwrap();
        assert!(rep.ok(), "{}", rep.render_text());
        // Restriction recovers the object monoid on the nose.
        let back = algebra_restrict(&m, &r).unwrap();
        assert_eq!(back.carrier().card(Obj(0)), 2);
        for ((t, c), v) in z2.entries() {
            let key = (
                OpTerm {
                    monad: back.monad().name().clone(),
                    ..t.clone()
                },
                c.clone(),
            );
            let found = back
                .entries()
                .find(|((u, d), _)| u.payload == key.0.payload && *d == key.1)
                .map(|(_, v)| *v);
            assert_eq!(found, Some(*v));
        }
    }

    #[test]
    fn terminal_algebra_extends_to_terminal_algebra() {
        let fmc = fmc_monad();
        let r = g0();
        let restricted = restrict_monad(&fmc, &r);
        let one = monoid_algebra(&restricted, &MonoidTable::cyclic(1), 5).unwrap();
        let m = algebra_indiscrete(&one, &r, &fmc).unwrap();
        assert_eq!(*m.carrier().as_ref(), Presheaf::terminal(fmc.base().clone()));
        assert!(m.check(5).unwrap().ok());
    }

    #[test]
    fn indiscrete_passes_for_small_monoid_fixtures() {
        let fmc = fmc_monad();
        let r = g0();
        let restricted = restrict_monad(&fmc, &r);
        for table in [
            MonoidTable::cyclic(3),
            MonoidTable::meet2(),
            MonoidTable::cyclic(4),
        ] {
            let y = monoid_algebra(&restricted, &table, 4).unwrap();
            let m = algebra_indiscrete(&y, &r, &fmc).unwrap();
            let rep = m.check(4).unwrap();
            assert!(rep.ok(), "order {}: {}", table.order, rep.render_text());
        }
    }
}
