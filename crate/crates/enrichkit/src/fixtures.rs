//! Shared in-code fixtures: small structures used across tests, examples,
//! and the shipped fixture corpus.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::algebra::{category_algebra, monoid_algebra, CategoryTable, FiniteAlgebra, MonoidTable};
use crate::error::EngineError;
use crate::fincat::{Obj, Presheaf, PresheafMap};
use crate::instances::{fc_monad, list_monad};
use crate::monad::{FamilialMonad, OpPayload, OpTerm};
use crate::multicat::{m_of_algebra, Arrow, ComposeCtx, ComposeRule, TMulticat};

/// The Boolean monoidal poset `({0, 1}, ∧, 1)` as a vertically trivial
/// multicategory over the free category monad: one vertex, the two truth
/// values as edges, and an arrow from a tuple to `b` exactly when the meet
/// of the tuple is at most `b`.
pub fn boolean_poset_multicat(bound: usize) -> Result<TMulticat, EngineError> {
    let fc = fc_monad();
    let g1 = fc.base().clone();
    let s = g1.morphism_by_name("s").unwrap();
    let t = g1.morphism_by_name("t").unwrap();
    // One vertex, edges 0 and 1, both loops.
    let mut action = vec![Vec::new(); g1.morphism_count()];
    action[g1.identity(Obj(0)).0] = vec![0];
    action[g1.identity(Obj(1)).0] = vec![0, 1];
    action[s.0] = vec![0, 0];
    action[t.0] = vec![0, 0];
    let v0 = Arc::new(Presheaf::new(g1.clone(), vec![1, 2], action)?);
    let vertex_op = fc.eta(Obj(0));
    let mut arrows: BTreeMap<OpTerm, Vec<Arrow>> = BTreeMap::new();
    // The unique unit-shaped arrow on the single vertex.
    let vertex_dom = PresheafMap::new(
        fc.arity(&vertex_op)?,
        v0.clone(),
        vec![vec![0], Vec::new()],
    )?;
    arrows.insert(
        vertex_op.clone(),
        vec![Arrow {
            dom: vertex_dom,
            cod: 0,
            faces: BTreeMap::new(),
        }],
    );
    for u in fc.ops_at(Obj(1), bound)? {
        let OpPayload::Nat { n } = u.payload else {
            continue;
        };
        let arity = fc.arity(&u)?;
        let mut list = Vec::new();
        // Domains are tuples of truth values on the path edges.
        for code in 0..(1usize << n) {
            let tuple: Vec<usize> = (0..n).map(|k| (code >> k) & 1).collect();
            let meet = tuple.iter().copied().min().unwrap_or(1);
            for b in 0..2 {
                if meet > b {
                    continue;
                }
                let dom = PresheafMap::new(
                    arity.clone(),
                    v0.clone(),
                    vec![vec![0; n + 1], tuple.clone()],
                )?;
                let mut faces = BTreeMap::new();
                faces.insert(s, 0);
                faces.insert(t, 0);
                list.push(Arrow {
                    dom,
                    cod: b,
                    faces,
                });
            }
        }
        arrows.insert(u, list);
    }
    let eta1 = fc.eta(Obj(1));
    let identities = vec![
        vec![0],
        (0..2)
            .map(|b| {
                arrows[&eta1]
                    .iter()
                    .position(|a| a.dom.components()[1] == vec![b] && a.cod == b)
                    .unwrap()
            })
            .collect(),
    ];
    Ok(TMulticat::new(
        fc,
        bound,
        v0,
        arrows,
        identities,
        ComposeRule::ByBoundary,
    ))
}

/// Replace boundary resolution by an explicit saturated table, for
/// fixtures exercising supplied composites.
pub fn materialize_compose_table(v: &TMulticat, bound: usize) -> Result<TMulticat, EngineError> {
    let mut ctx = ComposeCtx::new();
    let mut table = BTreeMap::new();
    for c in v.monad().base().objects() {
        for t in v.monad().ops_at(c, bound)? {
            for i in 0..v.arrows_at(&t).len() {
                let alpha = (t.clone(), i);
                for fam in v.inner_families(&alpha, bound)? {
                    if let Ok(res) = v.compose(&alpha, &fam, &mut ctx) {
                        table.insert((alpha.clone(), fam), res);
                    }
                }
            }
        }
    }
    Ok(TMulticat::new(
        v.monad().clone(),
        bound,
        v.v0().clone(),
        v.ops()
            .map(|t| (t.clone(), v.arrows_at(t).to_vec()))
            .collect(),
        (0..v.monad().base().object_count())
            .map(|o| {
                (0..v.v0().card(Obj(o)))
                    .map(|x| v.identity(Obj(o), x).1)
                    .collect()
            })
            .collect(),
        ComposeRule::Table(table),
    ))
}

/// The walking-composable-pair category 0 → 1 → 2 as a vertically discrete
/// double category (composition witnesses of the linear category).
pub fn tower_vdc(bound: usize) -> Result<(FiniteAlgebra, TMulticat), EngineError> {
    let fc = fc_monad();
    let alg = category_algebra(&fc, &CategoryTable::linear(4), bound)?;
    let v = m_of_algebra(&alg, bound)?;
    Ok((alg, v))
}

/// The cyclic group of order two as a list algebra.
pub fn z2_algebra(bound: usize) -> Result<FiniteAlgebra, EngineError> {
    monoid_algebra(&list_monad(), &MonoidTable::cyclic(2), bound)
}

/// A bare set as an algebra for a monad whose only operations are units
/// (such as the vertex restriction of the free category monad).
pub fn set_algebra(
    monad: &FamilialMonad,
    n: usize,
    bound: usize,
) -> Result<FiniteAlgebra, EngineError> {
    let carrier = crate::instances::finite_set(monad.base(), n);
    FiniteAlgebra::from_eval_fn(monad, &carrier, bound, |_t, a| Ok(a.components()[0][0]))
}

/// Graph with one edge per ordered vertex pair, edge `a*n + b` from `a`
/// to `b`.
pub fn indiscrete_graph(g1: &Arc<crate::fincat::FinCat>, n: usize) -> Arc<Presheaf> {
    let s = g1.morphism_by_name("s").unwrap();
    let t = g1.morphism_by_name("t").unwrap();
    let mut action = vec![Vec::new(); g1.morphism_count()];
    action[g1.identity(Obj(0)).0] = (0..n).collect();
    action[g1.identity(Obj(1)).0] = (0..n * n).collect();
    action[s.0] = (0..n * n).map(|e| e / n).collect();
    action[t.0] = (0..n * n).map(|e| e % n).collect();
    Arc::new(Presheaf::new(g1.clone(), vec![n, n * n], action).unwrap())
}

/// The double category of a finite meet-semilattice, encoded over the free
/// monoidal category monad: objects are the elements, vertical arrows are
/// the order, horizontal edges are indiscrete, and all squares are thin.
/// Uniformly representable over the vertex shape with the meet arrows as
/// the distinguished choice.
pub fn poset_double_category(
    table: &MonoidTable,
    bound: usize,
) -> Result<TMulticat, EngineError> {
    table.validate()?;
    let fmc = crate::instances::fmc_monad();
    let g1 = fmc.base().clone();
    let n = table.order;
    let leq = |a: usize, b: usize| table.mul[a][b] == a;
    let v0 = indiscrete_graph(&g1, n);
    let s = g1.morphism_by_name("s").unwrap();
    let t = g1.morphism_by_name("t").unwrap();
    let mut arrows: BTreeMap<OpTerm, Vec<Arrow>> = BTreeMap::new();
    // Vertex operations: one arrow per tuple and bound above the meet.
    for u in fmc.ops_at(Obj(0), bound)? {
        let arity = fmc.arity(&u)?;
        let mut list = Vec::new();
        for dom in crate::fincat::hom_set(&arity, &v0)? {
            let meet = table.product(&dom.components()[0]);
            for b in 0..n {
                if leq(meet, b) {
                    list.push(Arrow {
                        dom: dom.clone(),
                        cod: b,
                        faces: BTreeMap::new(),
                    });
                }
            }
        }
        arrows.insert(u, list);
    }
    // Arrow operations: squares exist when both boundaries are ordered.
    for u in fmc.ops_at(Obj(1), bound)? {
        let OpPayload::Paths { lengths } = &u.payload else {
            continue;
        };
        let arity = fmc.arity(&u)?;
        let src_face = fmc.arity_face(s, &u)?;
        let tgt_face = fmc.arity_face(t, &u)?;
        let mut list = Vec::new();
        for dom in crate::fincat::hom_set(&arity, &v0)? {
            let src_tuple: Vec<usize> = (0..lengths.len())
                .map(|i| dom.apply((Obj(0), src_face.components()[0][i])))
                .collect();
            let tgt_tuple: Vec<usize> = (0..lengths.len())
                .map(|i| dom.apply((Obj(0), tgt_face.components()[0][i])))
                .collect();
            let src_meet = table.product(&src_tuple);
            let tgt_meet = table.product(&tgt_tuple);
            for edge in 0..n * n {
                let (c, d) = (edge / n, edge % n);
                if leq(src_meet, c) && leq(tgt_meet, d) {
                    let mut faces = BTreeMap::new();
                    // Face arrows: the vertex arrows on the boundary.
                    let vop = fmc.act(s, &u);
                    let sidx = arrows[&vop]
                        .iter()
                        .position(|a| a.dom.components()[0] == src_tuple && a.cod == c)
                        .expect("source face arrow exists");
                    let tidx = arrows[&vop]
                        .iter()
                        .position(|a| a.dom.components()[0] == tgt_tuple && a.cod == d)
                        .expect("target face arrow exists");
                    faces.insert(s, sidx);
                    faces.insert(t, tidx);
                    list.push(Arrow {
                        dom: dom.clone(),
                        cod: edge,
                        faces,
                    });
                }
            }
        }
        arrows.insert(u, list);
    }
    let eta0 = fmc.eta(Obj(0));
    let eta1 = fmc.eta(Obj(1));
    let identities = vec![
        (0..n)
            .map(|a| {
                arrows[&eta0]
                    .iter()
                    .position(|x| x.dom.components()[0] == vec![a] && x.cod == a)
                    .unwrap()
            })
            .collect(),
        (0..n * n)
            .map(|e| {
                arrows[&eta1]
                    .iter()
                    .position(|x| x.dom.components()[1] == vec![e] && x.cod == e)
                    .unwrap()
            })
            .collect(),
    ];
    Ok(TMulticat::new(
        fmc,
        bound,
        v0,
        arrows,
        identities,
        ComposeRule::ByBoundary,
    ))
}
