//! Finite index categories and a finite-presheaf engine.
//!
//! A [`FinCat`] is a finite category given by explicit object/morphism lists
//! and a composition table. A [`Presheaf`] over it is a finite contravariant
//! set-valued functor with skeletal cell sets (`0..n`). On top of those this
//! module provides the four engine primitives everything else is built from:
//! representables ([`yoneda`]), exhaustive natural-map enumeration
//! ([`hom_set`]), set-wise colimits by union-find quotient ([`colimit`]), and
//! isomorphism search ([`iso_check`]).
//!
//! All values are immutable after construction; searches are pure and capped
//! by a node budget (`ENRICHKIT_NODE_CAP`, default 10^7).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::EngineError;

/// Object handle inside a [`FinCat`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Obj(pub usize);

/// Morphism handle inside a [`FinCat`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Mor(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
struct MorData {
    name: String,
    dom: Obj,
    cod: Obj,
}

/// A finite category: objects, morphisms, identities, and a total
/// composition table on composable pairs.
#[derive(Clone, Debug)]
pub struct FinCat {
    name: String,
    objects: Vec<String>,
    morphisms: Vec<MorData>,
    identity: Vec<Mor>,
    /// `compose[f][g] = f ∘ g` (first `g`, then `f`), defined when
    /// `cod(g) = dom(f)`.
    compose: Vec<Vec<Option<Mor>>>,
    /// `hom[a][b]` lists morphisms `a → b` in ascending id order.
    hom: Vec<Vec<Vec<Mor>>>,
}

impl PartialEq for FinCat {
    fn eq(&self, other: &Self) -> bool {
        self.objects == other.objects
            && self.morphisms == other.morphisms
            && self.identity == other.identity
            && self.compose == other.compose
    }
}
impl Eq for FinCat {}

/// Builder input for a morphism: (name, dom, cod).
pub type MorSpec = (String, usize, usize);

impl FinCat {
    /// Assemble a finite category and verify the category laws by exhaustion.
    pub fn new(
        name: &str,
        objects: Vec<String>,
        morphisms: Vec<MorSpec>,
        identity: Vec<usize>,
        compose_pairs: Vec<((usize, usize), usize)>,
    ) -> Result<FinCat, EngineError> {
        let n_obj = objects.len();
        let mors: Vec<MorData> = morphisms
            .into_iter()
            .map(|(name, dom, cod)| MorData {
                name,
                dom: Obj(dom),
                cod: Obj(cod),
            })
            .collect();
        for m in &mors {
            if m.dom.0 >= n_obj || m.cod.0 >= n_obj {
                return Err(EngineError::input(format!(
                    "morphism {} has out-of-range endpoint",
                    m.name
                )));
            }
        }
        if identity.len() != n_obj {
            return Err(EngineError::input("identity table length != object count"));
        }
        let identity: Vec<Mor> = identity.into_iter().map(Mor).collect();
        let mut compose = vec![vec![None; mors.len()]; mors.len()];
        for ((f, g), h) in compose_pairs {
            if f >= mors.len() || g >= mors.len() || h >= mors.len() {
                return Err(EngineError::input("compose table has out-of-range id"));
            }
            compose[f][g] = Some(Mor(h));
        }
        // Fill in identity composites so builders only list the rest.
        for (o, id) in identity.iter().enumerate() {
            let id = *id;
            if mors[id.0].dom != Obj(o) || mors[id.0].cod != Obj(o) {
                return Err(EngineError::input(format!(
                    "identity of object {} is not an endomorphism",
                    objects[o]
                )));
            }
            for (fi, f) in mors.iter().enumerate() {
                if f.dom == Obj(o) {
                    compose[fi][id.0] = Some(Mor(fi));
                }
                if f.cod == Obj(o) {
                    compose[id.0][fi] = Some(Mor(fi));
                }
            }
        }
        let mut hom = vec![vec![Vec::new(); n_obj]; n_obj];
        for (i, m) in mors.iter().enumerate() {
            hom[m.dom.0][m.cod.0].push(Mor(i));
        }
        let cat = FinCat {
            name: name.to_string(),
            objects,
            morphisms: mors,
            identity,
            compose,
            hom,
        };
        cat.validate()?;
        Ok(cat)
    }

    /// Exhaustively check identity, totality on composable pairs,
    /// endpoint coherence, and associativity.
    pub fn validate(&self) -> Result<(), EngineError> {
        for (fi, f) in self.morphisms.iter().enumerate() {
            for (gi, g) in self.morphisms.iter().enumerate() {
                let composable = g.cod == f.dom;
                match self.compose[fi][gi] {
                    Some(h) => {
                        if !composable {
                            return Err(EngineError::input(format!(
                                "compose defined on non-composable pair ({}, {})",
                                f.name, g.name
                            )));
                        }
                        let h = &self.morphisms[h.0];
                        if h.dom != g.dom || h.cod != f.cod {
                            return Err(EngineError::input(format!(
                                "composite of ({}, {}) has wrong endpoints",
                                f.name, g.name
                            )));
                        }
                    }
                    None => {
                        if composable {
                            return Err(EngineError::input(format!(
                                "compose missing on composable pair ({}, {})",
                                f.name, g.name
                            )));
                        }
                    }
                }
            }
        }
        for o in 0..self.objects.len() {
            let id = self.identity[o];
            for f in 0..self.morphisms.len() {
                if self.morphisms[f].dom == Obj(o) && self.compose[f][id.0] != Some(Mor(f)) {
                    return Err(EngineError::input("right identity law fails"));
                }
                if self.morphisms[f].cod == Obj(o) && self.compose[id.0][f] != Some(Mor(f)) {
                    return Err(EngineError::input("left identity law fails"));
                }
            }
        }
        for f in 0..self.morphisms.len() {
            for g in 0..self.morphisms.len() {
                let Some(fg) = self.compose[f][g] else {
                    continue;
                };
                for h in 0..self.morphisms.len() {
                    let Some(gh) = self.compose[g][h] else {
                        continue;
                    };
                    if self.compose[fg.0][h] != self.compose[f][gh.0] {
                        return Err(EngineError::input(format!(
                            "associativity fails on ({}, {}, {})",
                            self.morphisms[f].name, self.morphisms[g].name, self.morphisms[h].name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn objects(&self) -> impl Iterator<Item = Obj> {
        (0..self.objects.len()).map(Obj)
    }

    pub fn object_name(&self, o: Obj) -> &str {
        &self.objects[o.0]
    }

    pub fn object_by_name(&self, name: &str) -> Option<Obj> {
        self.objects.iter().position(|n| n == name).map(Obj)
    }

    pub fn morphism_count(&self) -> usize {
        self.morphisms.len()
    }

    pub fn morphisms(&self) -> impl Iterator<Item = Mor> {
        (0..self.morphisms.len()).map(Mor)
    }

    pub fn morphism_name(&self, m: Mor) -> &str {
        &self.morphisms[m.0].name
    }

    pub fn morphism_by_name(&self, name: &str) -> Option<Mor> {
        self.morphisms.iter().position(|m| m.name == name).map(Mor)
    }

    pub fn dom(&self, m: Mor) -> Obj {
        self.morphisms[m.0].dom
    }

    pub fn cod(&self, m: Mor) -> Obj {
        self.morphisms[m.0].cod
    }

    pub fn identity(&self, o: Obj) -> Mor {
        self.identity[o.0]
    }

    pub fn is_identity(&self, m: Mor) -> bool {
        self.identity[self.dom(m).0] == m
    }

    /// `f ∘ g` (apply `g` first). Panics on non-composable pairs; callers
    /// guarantee composability by consulting dom/cod.
    pub fn compose(&self, f: Mor, g: Mor) -> Mor {
        self.compose[f.0][g.0].expect("compose called on non-composable pair")
    }

    /// Morphisms `a → b` in ascending id order.
    pub fn hom(&self, a: Obj, b: Obj) -> &[Mor] {
        &self.hom[a.0][b.0]
    }

    /// Morphisms into `b` from anywhere, grouped by source object.
    pub fn hom_into(&self, b: Obj) -> impl Iterator<Item = Mor> + '_ {
        (0..self.objects.len()).flat_map(move |a| self.hom[a][b.0].iter().copied())
    }

    /// Objects sorted so that whenever there is a non-identity morphism
    /// `a → b`, `a` comes before `b`. Errors when the category is not
    /// direct (has non-identity endomorphisms or cycles).
    pub fn topo_order(&self) -> Result<Vec<Obj>, EngineError> {
        let n = self.objects.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for m in 0..self.morphisms.len() {
            let m = Mor(m);
            if self.is_identity(m) {
                continue;
            }
            if self.dom(m) == self.cod(m) {
                return Err(EngineError::input(format!(
                    "category {} has a non-identity endomorphism",
                    self.name
                )));
            }
            out[self.dom(m).0].push(self.cod(m).0);
            indeg[self.cod(m).0] += 1;
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&o| indeg[o] == 0).collect();
        ready.sort_unstable();
        while let Some(o) = ready.pop() {
            order.push(Obj(o));
            for &b in &out[o] {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.push(b);
                }
            }
            ready.sort_unstable();
            ready.reverse();
            ready.dedup();
            ready.reverse();
        }
        if order.len() != n {
            return Err(EngineError::input(format!(
                "category {} has a morphism cycle",
                self.name
            )));
        }
        Ok(order)
    }

    /// The terminal category: one object, one morphism.
    pub fn terminal() -> Arc<FinCat> {
        Arc::new(
            FinCat::new(
                "1",
                vec!["*".into()],
                vec![("id".into(), 0, 0)],
                vec![0],
                vec![],
            )
            .unwrap(),
        )
    }

    /// The parallel-pair category `0 ⇉ 1` indexing graphs. Morphism `s`
    /// extracts the source of an edge and `t` its target.
    pub fn graph_shape() -> Arc<FinCat> {
        Arc::new(
            FinCat::new(
                "G1",
                vec!["0".into(), "1".into()],
                vec![
                    ("id0".into(), 0, 0),
                    ("id1".into(), 1, 1),
                    ("s".into(), 0, 1),
                    ("t".into(), 0, 1),
                ],
                vec![0, 1],
                vec![],
            )
            .unwrap(),
        )
    }
}

impl fmt::Display for FinCat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} objects, {} morphisms)",
            self.name,
            self.objects.len(),
            self.morphisms.len()
        )
    }
}

/// A product category together with pairing tables for its parts.
pub struct ProductCat {
    pub cat: Arc<FinCat>,
    obj_index: Vec<Vec<Obj>>,
    mor_index: Vec<Vec<Mor>>,
    obj_parts: Vec<(Obj, Obj)>,
    mor_parts: Vec<(Mor, Mor)>,
}

impl ProductCat {
    pub fn new(a: &FinCat, b: &FinCat) -> ProductCat {
        let mut objects = Vec::new();
        let mut obj_index = vec![vec![Obj(0); b.object_count()]; a.object_count()];
        let mut obj_parts = Vec::new();
        for oa in a.objects() {
            for ob in b.objects() {
                obj_index[oa.0][ob.0] = Obj(objects.len());
                obj_parts.push((oa, ob));
                objects.push(format!("({},{})", a.object_name(oa), b.object_name(ob)));
            }
        }
        let mut morphisms = Vec::new();
        let mut mor_index = vec![vec![Mor(0); b.morphism_count()]; a.morphism_count()];
        let mut mor_parts = Vec::new();
        for fa in a.morphisms() {
            for fb in b.morphisms() {
                mor_index[fa.0][fb.0] = Mor(morphisms.len());
                mor_parts.push((fa, fb));
                morphisms.push((
                    format!("({},{})", a.morphism_name(fa), b.morphism_name(fb)),
                    obj_index[a.dom(fa).0][b.dom(fb).0].0,
                    obj_index[a.cod(fa).0][b.cod(fb).0].0,
                ));
            }
        }
        let identity: Vec<usize> = obj_parts
            .iter()
            .map(|(oa, ob)| mor_index[a.identity(*oa).0][b.identity(*ob).0].0)
            .collect();
        let mut compose_pairs = Vec::new();
        for (fi, (fa, fb)) in mor_parts.iter().enumerate() {
            for (gi, (ga, gb)) in mor_parts.iter().enumerate() {
                if a.cod(*ga) == a.dom(*fa) && b.cod(*gb) == b.dom(*fb) {
                    let ha = a.compose(*fa, *ga);
                    let hb = b.compose(*fb, *gb);
                    compose_pairs.push(((fi, gi), mor_index[ha.0][hb.0].0));
                }
            }
        }
        let name = format!("{}x{}", a.name(), b.name());
        let cat = FinCat::new(&name, objects, morphisms, identity, compose_pairs).unwrap();
        ProductCat {
            cat: Arc::new(cat),
            obj_index,
            mor_index,
            obj_parts,
            mor_parts,
        }
    }

    pub fn pair_obj(&self, a: Obj, b: Obj) -> Obj {
        self.obj_index[a.0][b.0]
    }

    pub fn pair_mor(&self, f: Mor, g: Mor) -> Mor {
        self.mor_index[f.0][g.0]
    }

    pub fn obj_parts(&self, o: Obj) -> (Obj, Obj) {
        self.obj_parts[o.0]
    }

    pub fn mor_parts(&self, m: Mor) -> (Mor, Mor) {
        self.mor_parts[m.0]
    }
}

/// An isomorphism of finite categories, as object and morphism relabelling
/// tables.
pub struct FinCatIso {
    pub obj_map: Vec<Obj>,
    pub mor_map: Vec<Mor>,
}

/// Brute-force search for an isomorphism `a ≅ b`; intended for the tiny
/// index categories in play.
pub fn find_fincat_iso(a: &FinCat, b: &FinCat) -> Option<FinCatIso> {
    if a.object_count() != b.object_count() || a.morphism_count() != b.morphism_count() {
        return None;
    }
    let n = a.object_count();
    let mut perm: Vec<usize> = (0..n).collect();
    // Heap's algorithm over object permutations; morphism map forced per
    // hom set when hom sets are small.
    fn try_obj_map(a: &FinCat, b: &FinCat, perm: &[usize]) -> Option<Vec<Mor>> {
        // Greedy: match morphisms hom-set by hom-set, trying each bijection.
        let mut mor_map = vec![Mor(usize::MAX); a.morphism_count()];
        let mut used = vec![false; b.morphism_count()];
        fn place(
            a: &FinCat,
            b: &FinCat,
            perm: &[usize],
            mors: &[Mor],
            k: usize,
            mor_map: &mut Vec<Mor>,
            used: &mut Vec<bool>,
        ) -> bool {
            if k == mors.len() {
                // Verify functoriality on the completed assignment.
                for f in a.morphisms() {
                    for g in a.morphisms() {
                        if a.cod(g) != a.dom(f) {
                            continue;
                        }
                        let h = a.compose(f, g);
                        if b.compose(mor_map[f.0], mor_map[g.0]) != mor_map[h.0] {
                            return false;
                        }
                    }
                }
                for o in a.objects() {
                    if mor_map[a.identity(o).0] != b.identity(Obj(perm[o.0])) {
                        return false;
                    }
                }
                return true;
            }
            let m = mors[k];
            let (d, c) = (Obj(perm[a.dom(m).0]), Obj(perm[a.cod(m).0]));
            for &cand in b.hom(d, c) {
                if used[cand.0] {
                    continue;
                }
                mor_map[m.0] = cand;
                used[cand.0] = true;
                if place(a, b, perm, mors, k + 1, mor_map, used) {
                    return true;
                }
                used[cand.0] = false;
            }
            false
        }
        let mors: Vec<Mor> = a.morphisms().collect();
        if place(a, b, perm, &mors, 0, &mut mor_map, &mut used) {
            Some(mor_map)
        } else {
            None
        }
    }
    fn permutations(perm: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == perm.len() {
            out.push(perm.clone());
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permutations(perm, k + 1, out);
            perm.swap(k, i);
        }
    }
    let mut perms = Vec::new();
    permutations(&mut perm, 0, &mut perms);
    for p in perms {
        if let Some(mor_map) = try_obj_map(a, b, &p) {
            return Some(FinCatIso {
                obj_map: p.into_iter().map(Obj).collect(),
                mor_map,
            });
        }
    }
    None
}

/// Transport a presheaf along a category isomorphism onto `target`.
pub fn transport_presheaf(
    p: &Presheaf,
    iso: &FinCatIso,
    target: &Arc<FinCat>,
) -> Arc<Presheaf> {
    let mut cells = vec![0usize; target.object_count()];
    for o in p.base().objects() {
        cells[iso.obj_map[o.0].0] = p.card(o);
    }
    let mut action: Vec<Vec<usize>> = vec![Vec::new(); target.morphism_count()];
    for m in p.base().morphisms() {
        action[iso.mor_map[m.0].0] = (0..p.card(p.base().cod(m))).map(|x| p.act(m, x)).collect();
    }
    Arc::new(Presheaf::new(target.clone(), cells, action).expect("transport preserves laws"))
}

/// Addressable cell of a presheaf: object plus index into its cell set.
pub type Cell = (Obj, usize);

/// A finite presheaf: skeletal cell sets indexed per object, and a
/// contravariant action per morphism.
#[derive(Clone, Debug)]
pub struct Presheaf {
    base: Arc<FinCat>,
    cells: Vec<usize>,
    /// `action[m]` has length `cells[cod(m)]`, values in `0..cells[dom(m)]`.
    action: Vec<Vec<usize>>,
}

impl PartialEq for Presheaf {
    fn eq(&self, other: &Self) -> bool {
        *self.base == *other.base && self.cells == other.cells && self.action == other.action
    }
}
impl Eq for Presheaf {}

impl Presheaf {
    pub fn new(
        base: Arc<FinCat>,
        cells: Vec<usize>,
        action: Vec<Vec<usize>>,
    ) -> Result<Presheaf, EngineError> {
        let p = Presheaf {
            base,
            cells,
            action,
        };
        p.validate()?;
        Ok(p)
    }

    /// Functoriality by exhaustion: identities act as identities and the
    /// action reverses composition.
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.cells.len() != self.base.object_count()
            || self.action.len() != self.base.morphism_count()
        {
            return Err(EngineError::input("presheaf table sizes do not match base"));
        }
        for m in self.base.morphisms() {
            let tbl = &self.action[m.0];
            if tbl.len() != self.cells[self.base.cod(m).0] {
                return Err(EngineError::input(format!(
                    "action table for {} has wrong length",
                    self.base.morphism_name(m)
                )));
            }
            let lim = self.cells[self.base.dom(m).0];
            if tbl.iter().any(|&v| v >= lim) {
                return Err(EngineError::input(format!(
                    "action of {} maps outside the target cell set",
                    self.base.morphism_name(m)
                )));
            }
        }
        for o in self.base.objects() {
            let id = self.base.identity(o);
            if self.action[id.0].iter().enumerate().any(|(i, &v)| i != v) {
                return Err(EngineError::input(format!(
                    "identity of {} does not act as identity",
                    self.base.object_name(o)
                )));
            }
        }
        for f in self.base.morphisms() {
            for g in self.base.morphisms() {
                if self.base.cod(g) != self.base.dom(f) {
                    continue;
                }
                let fg = self.base.compose(f, g);
                for x in 0..self.cells[self.base.cod(f).0] {
                    if self.action[fg.0][x] != self.action[g.0][self.action[f.0][x]] {
                        return Err(EngineError::input(format!(
                            "contravariance fails on ({}, {})",
                            self.base.morphism_name(f),
                            self.base.morphism_name(g)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &Arc<FinCat> {
        &self.base
    }

    pub fn card(&self, o: Obj) -> usize {
        self.cells[o.0]
    }

    /// Total number of cells over all objects.
    pub fn size(&self) -> usize {
        self.cells.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    pub fn act(&self, m: Mor, cell: usize) -> usize {
        self.action[m.0][cell]
    }

    pub fn cells_at(&self, o: Obj) -> impl Iterator<Item = usize> {
        0..self.cells[o.0]
    }

    /// All cells in canonical (object, index) order.
    pub fn all_cells(&self) -> Vec<Cell> {
        let mut v = Vec::with_capacity(self.size());
        for o in self.base.objects() {
            for i in 0..self.cells[o.0] {
                v.push((o, i));
            }
        }
        v
    }

    pub fn empty(base: Arc<FinCat>) -> Presheaf {
        let cells = vec![0; base.object_count()];
        let action = base.morphisms().map(|_| Vec::new()).collect();
        Presheaf {
            base,
            cells,
            action,
        }
    }

    pub fn terminal(base: Arc<FinCat>) -> Presheaf {
        let cells = vec![1; base.object_count()];
        let action = base.morphisms().map(|_| vec![0]).collect();
        Presheaf {
            base,
            cells,
            action,
        }
    }

    /// Disjoint union of cell sets with no cross-action, valid because the
    /// parts are presheaves over the same base.
    pub fn coproduct(parts: &[&Presheaf]) -> Result<Presheaf, EngineError> {
        let base = parts
            .first()
            .map(|p| p.base.clone())
            .ok_or_else(|| EngineError::input("coproduct of zero presheaves needs a base"))?;
        let mut cells = vec![0usize; base.object_count()];
        let mut action: Vec<Vec<usize>> = base.morphisms().map(|_| Vec::new()).collect();
        for p in parts {
            if *p.base != *base {
                return Err(EngineError::input("coproduct parts over different bases"));
            }
            let offsets: Vec<usize> = cells.clone();
            for m in base.morphisms() {
                let off = offsets[base.dom(m).0];
                for x in 0..p.cells[base.cod(m).0] {
                    action[m.0].push(p.action[m.0][x] + off);
                }
            }
            for o in base.objects() {
                cells[o.0] += p.cells[o.0];
            }
        }
        Ok(Presheaf {
            base,
            cells,
            action,
        })
    }
}

/// A representable presheaf together with the morphism labelling its cells.
pub struct Representable {
    pub presheaf: Arc<Presheaf>,
    /// `cell_mor[o][i]` is the morphism `o → c` that cell `i` stands for.
    pub cell_mor: Vec<Vec<Mor>>,
}

impl Representable {
    /// Look up the cell index of a morphism into the representing object.
    pub fn cell_of(&self, m: Mor) -> usize {
        let o = self.presheaf.base().dom(m);
        self.cell_mor[o.0]
            .iter()
            .position(|&x| x == m)
            .expect("morphism not into the representing object")
    }
}

/// The representable presheaf `y(c)`: cells at `o` are morphisms `o → c`
/// (in ascending morphism order), acting by precomposition.
pub fn yoneda(base: &Arc<FinCat>, c: Obj) -> Representable {
    let mut cell_mor: Vec<Vec<Mor>> = Vec::with_capacity(base.object_count());
    for o in base.objects() {
        cell_mor.push(base.hom(o, c).to_vec());
    }
    let cells: Vec<usize> = cell_mor.iter().map(|v| v.len()).collect();
    let mut action: Vec<Vec<usize>> = Vec::with_capacity(base.morphism_count());
    for m in base.morphisms() {
        let codm = base.cod(m);
        let domm = base.dom(m);
        let mut tbl = Vec::with_capacity(cells[codm.0]);
        for &g in &cell_mor[codm.0] {
            let gm = base.compose(g, m);
            let idx = cell_mor[domm.0]
                .iter()
                .position(|&x| x == gm)
                .expect("precomposition stays in hom set");
            tbl.push(idx);
        }
        action.push(tbl);
    }
    let presheaf = Presheaf {
        base: base.clone(),
        cells,
        action,
    };
    debug_assert!(presheaf.validate().is_ok());
    Representable {
        presheaf: Arc::new(presheaf),
        cell_mor,
    }
}

/// A natural transformation between presheaves over the same base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresheafMap {
    source: Arc<Presheaf>,
    target: Arc<Presheaf>,
    /// Per object, `components[o][i]` is the image of source cell `(o, i)`.
    components: Vec<Vec<usize>>,
}

impl PresheafMap {
    pub fn new(
        source: Arc<Presheaf>,
        target: Arc<Presheaf>,
        components: Vec<Vec<usize>>,
    ) -> Result<PresheafMap, EngineError> {
        let m = PresheafMap {
            source,
            target,
            components,
        };
        m.validate()?;
        Ok(m)
    }

    /// Build without the naturality check; used internally where naturality
    /// holds by construction. Debug builds still verify.
    pub(crate) fn new_unchecked(
        source: Arc<Presheaf>,
        target: Arc<Presheaf>,
        components: Vec<Vec<usize>>,
    ) -> PresheafMap {
        let m = PresheafMap {
            source,
            target,
            components,
        };
        debug_assert!(m.validate().is_ok(), "internal map not natural");
        m
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if *self.source.base() != *self.target.base() {
            return Err(EngineError::input("presheaf map between different bases"));
        }
        let base = self.source.base();
        if self.components.len() != base.object_count() {
            return Err(EngineError::input("component table has wrong length"));
        }
        for o in base.objects() {
            if self.components[o.0].len() != self.source.card(o) {
                return Err(EngineError::input(format!(
                    "component at {} has wrong length",
                    base.object_name(o)
                )));
            }
            let lim = self.target.card(o);
            if self.components[o.0].iter().any(|&v| v >= lim) {
                return Err(EngineError::input(format!(
                    "component at {} maps outside the target",
                    base.object_name(o)
                )));
            }
        }
        for m in base.morphisms() {
            let c = base.cod(m);
            let d = base.dom(m);
            for x in 0..self.source.card(c) {
                let lhs = self.target.act(m, self.components[c.0][x]);
                let rhs = self.components[d.0][self.source.act(m, x)];
                if lhs != rhs {
                    return Err(EngineError::input(format!(
                        "naturality fails at {} on cell {}",
                        base.morphism_name(m),
                        x
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn source(&self) -> &Arc<Presheaf> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Presheaf> {
        &self.target
    }

    pub fn apply(&self, cell: Cell) -> usize {
        self.components[cell.0 .0][cell.1]
    }

    pub fn components(&self) -> &Vec<Vec<usize>> {
        &self.components
    }

    pub fn identity(p: &Arc<Presheaf>) -> PresheafMap {
        let components = p
            .base()
            .objects()
            .map(|o| (0..p.card(o)).collect())
            .collect();
        PresheafMap {
            source: p.clone(),
            target: p.clone(),
            components,
        }
    }

    /// `self ∘ first` (apply `first`, then `self`).
    pub fn compose(&self, first: &PresheafMap) -> PresheafMap {
        assert_eq!(
            *first.target, *self.source,
            "composition endpoint mismatch"
        );
        let components = first
            .components
            .iter()
            .enumerate()
            .map(|(o, col)| col.iter().map(|&x| self.components[o][x]).collect())
            .collect();
        PresheafMap {
            source: first.source.clone(),
            target: self.target.clone(),
            components,
        }
    }

    pub fn is_bijective(&self) -> bool {
        for o in self.source.base().objects() {
            if self.source.card(o) != self.target.card(o) {
                return false;
            }
            let mut seen = vec![false; self.target.card(o)];
            for &v in &self.components[o.0] {
                if seen[v] {
                    return false;
                }
                seen[v] = true;
            }
        }
        true
    }

    /// Inverse of a bijective map.
    pub fn inverse(&self) -> PresheafMap {
        assert!(self.is_bijective(), "inverse of a non-bijective map");
        let mut components: Vec<Vec<usize>> = self
            .source
            .base()
            .objects()
            .map(|o| vec![0; self.source.card(o)])
            .collect();
        for o in self.source.base().objects() {
            for (x, &v) in self.components[o.0].iter().enumerate() {
                components[o.0][v] = x;
            }
        }
        PresheafMap {
            source: self.target.clone(),
            target: self.source.clone(),
            components,
        }
    }

    /// The map `y(c) → P` picking the cell `x ∈ P_c`; the component at `o`
    /// sends the cell for `m : o → c` to `P(m)(x)`.
    pub fn from_yoneda(rep: &Representable, target: &Arc<Presheaf>, x: usize) -> PresheafMap {
        let base = target.base();
        let components = base
            .objects()
            .map(|o| {
                rep.cell_mor[o.0]
                    .iter()
                    .map(|&m| target.act(m, x))
                    .collect()
            })
            .collect();
        PresheafMap::new_unchecked(rep.presheaf.clone(), target.clone(), components)
    }
}

fn node_cap() -> u64 {
    std::env::var("ENRICHKIT_NODE_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(10_000_000)
}

/// Every natural map `P → Q`, in lexicographic order of the assignment
/// vector (cells in canonical order, candidate images ascending).
///
/// Backtracks cell by cell, pruning with every naturality constraint whose
/// cells are already assigned. Fails loudly when the node budget is hit.
pub fn hom_set(p: &Arc<Presheaf>, q: &Arc<Presheaf>) -> Result<Vec<PresheafMap>, EngineError> {
    if *p.base() != *q.base() {
        return Err(EngineError::input("hom_set between different bases"));
    }
    let base = p.base().clone();
    let cells = p.all_cells();
    // Constraints attached to the later-assigned cell of each action pair:
    // for m : d → c and source cell (c, x), Q(m)(f(x)) = f(P(m)(x)).
    let index_of: BTreeMap<Cell, usize> = cells.iter().copied().zip(0..).collect();
    let mut constraints: Vec<Vec<(Mor, usize, bool)>> = vec![Vec::new(); cells.len()];
    for m in base.morphisms() {
        if base.is_identity(m) {
            continue;
        }
        let c = base.cod(m);
        let d = base.dom(m);
        for x in 0..p.card(c) {
            let src = index_of[&(c, x)];
            let dst = index_of[&(d, p.act(m, x))];
            // (morphism, other cell position, whether `other` is the source side)
            if src >= dst {
                constraints[src].push((m, dst, false));
            } else {
                constraints[dst].push((m, src, true));
            }
        }
    }
    let cap = node_cap();
    let mut nodes: u64 = 0;
    let mut assign: Vec<usize> = Vec::with_capacity(cells.len());
    let mut out = Vec::new();
    // Iterative backtracking over the assignment vector.
    let mut pos = 0usize;
    let mut cursor: Vec<usize> = vec![0; cells.len() + 1];
    loop {
        if pos == cells.len() {
            let mut components: Vec<Vec<usize>> =
                base.objects().map(|o| vec![0; p.card(o)]).collect();
            for (k, &(o, i)) in cells.iter().enumerate() {
                components[o.0][i] = assign[k];
            }
            out.push(PresheafMap {
                source: p.clone(),
                target: q.clone(),
                components,
            });
            if pos == 0 {
                break;
            }
            pos -= 1;
            assign.pop();
            continue;
        }
        let (o, _) = cells[pos];
        let limit = q.card(o);
        let mut v = cursor[pos];
        let mut placed = false;
        while v < limit {
            nodes += 1;
            if nodes > cap {
                return Err(EngineError::bound(format!(
                    "hom_set search exceeded node cap {cap}"
                )));
            }
            let ok = constraints[pos].iter().all(|&(m, other, other_is_src)| {
                if other_is_src {
                    // self is P(m)(x) for source cell at `other`
                    q.act(m, assign[other]) == v
                } else {
                    q.act(m, v) == assign[other]
                }
            });
            if ok {
                placed = true;
                break;
            }
            v += 1;
        }
        if placed {
            cursor[pos] = v + 1;
            assign.push(v);
            pos += 1;
            cursor[pos] = 0;
        } else {
            if pos == 0 {
                break;
            }
            pos -= 1;
            assign.pop();
        }
    }
    Ok(out)
}

/// A finite diagram of presheaves over a common base: nodes plus directed
/// edges carrying maps. Identity and composite edges are irrelevant for the
/// colimit and may be omitted.
pub struct Diagram {
    pub nodes: Vec<Arc<Presheaf>>,
    /// `(src, dst, map)` with `map : nodes[src] → nodes[dst]`.
    pub edges: Vec<(usize, usize, PresheafMap)>,
}

pub struct Colimit {
    pub presheaf: Arc<Presheaf>,
    pub injections: Vec<PresheafMap>,
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
            r
        } else {
            x
        }
    }
    /// Union keeping the smaller index as representative.
    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Object-wise colimit by union-find quotient of the disjoint union.
///
/// Classes are numbered by their least member in (node, cell) order, which
/// makes the output canonical across runs.
pub fn colimit(base: &Arc<FinCat>, diagram: &Diagram) -> Result<Colimit, EngineError> {
    for p in &diagram.nodes {
        if **p.base() != **base {
            return Err(EngineError::input("diagram node over a different base"));
        }
    }
    for (s, d, m) in &diagram.edges {
        if *s >= diagram.nodes.len() || *d >= diagram.nodes.len() {
            return Err(EngineError::input("diagram edge endpoint out of range"));
        }
        if **m.source() != *diagram.nodes[*s] || **m.target() != *diagram.nodes[*d] {
            return Err(EngineError::input("diagram edge map endpoints disagree"));
        }
    }
    let n_obj = base.object_count();
    // Global index per object: offsets[node][o] + cell.
    let mut offsets: Vec<Vec<usize>> = Vec::with_capacity(diagram.nodes.len());
    let mut totals = vec![0usize; n_obj];
    for p in &diagram.nodes {
        offsets.push(totals.clone());
        for o in base.objects() {
            totals[o.0] += p.card(o);
        }
    }
    let mut class_of: Vec<Vec<usize>> = Vec::with_capacity(n_obj);
    let mut counts = vec![0usize; n_obj];
    for o in base.objects() {
        let mut dsu = Dsu::new(totals[o.0]);
        for (s, d, m) in &diagram.edges {
            for x in 0..diagram.nodes[*s].card(o) {
                let gx = offsets[*s][o.0] + x;
                let gy = offsets[*d][o.0] + m.components()[o.0][x];
                dsu.union(gx, gy);
            }
        }
        // Number classes by least member.
        let mut number: Vec<Option<usize>> = vec![None; totals[o.0]];
        let mut next = 0usize;
        let mut out = vec![0usize; totals[o.0]];
        for g in 0..totals[o.0] {
            let r = dsu.find(g);
            let id = match number[r] {
                Some(id) => id,
                None => {
                    let id = next;
                    number[r] = Some(id);
                    next += 1;
                    id
                }
            };
            out[g] = id;
        }
        class_of.push(out);
        counts[o.0] = next;
    }
    // Action: pick any member of a class and push it along the node action.
    let mut member: Vec<Vec<(usize, usize)>> = base
        .objects()
        .map(|o| vec![(usize::MAX, usize::MAX); counts[o.0]])
        .collect();
    for (ni, p) in diagram.nodes.iter().enumerate() {
        for o in base.objects() {
            for x in 0..p.card(o) {
                let cls = class_of[o.0][offsets[ni][o.0] + x];
                if member[o.0][cls].0 == usize::MAX {
                    member[o.0][cls] = (ni, x);
                }
            }
        }
    }
    let mut action: Vec<Vec<usize>> = Vec::with_capacity(base.morphism_count());
    for m in base.morphisms() {
        let c = base.cod(m);
        let d = base.dom(m);
        let mut tbl = Vec::with_capacity(counts[c.0]);
        for cls in 0..counts[c.0] {
            let (ni, x) = member[c.0][cls];
            let y = diagram.nodes[ni].act(m, x);
            tbl.push(class_of[d.0][offsets[ni][d.0] + y]);
        }
        action.push(tbl);
    }
    let q = Arc::new(Presheaf::new(base.clone(), counts, action)?);
    let injections = diagram
        .nodes
        .iter()
        .enumerate()
        .map(|(ni, p)| {
            let components = base
                .objects()
                .map(|o| {
                    (0..p.card(o))
                        .map(|x| class_of[o.0][offsets[ni][o.0] + x])
                        .collect()
                })
                .collect();
            PresheafMap::new_unchecked(p.clone(), q.clone(), components)
        })
        .collect();
    Ok(Colimit {
        presheaf: q,
        injections,
    })
}

/// The map out of a colimit induced by a cocone: one leg per node, required
/// to agree on identified cells.
pub fn induced_map(
    col: &Colimit,
    legs: &[PresheafMap],
    target: &Arc<Presheaf>,
) -> Result<PresheafMap, EngineError> {
    let base = col.presheaf.base().clone();
    let mut components: Vec<Vec<Option<usize>>> = base
        .objects()
        .map(|o| vec![None; col.presheaf.card(o)])
        .collect();
    for (k, leg) in legs.iter().enumerate() {
        let inj = &col.injections[k];
        for o in base.objects() {
            for x in 0..leg.source().card(o) {
                let cls = inj.apply((o, x));
                let v = leg.apply((o, x));
                match components[o.0][cls] {
                    None => components[o.0][cls] = Some(v),
                    Some(prev) if prev == v => {}
                    Some(_) => {
                        return Err(EngineError::input(
                            "cocone legs disagree on an identified cell",
                        ))
                    }
                }
            }
        }
    }
    let components: Result<Vec<Vec<usize>>, EngineError> = components
        .into_iter()
        .map(|col| {
            col.into_iter()
                .map(|v| v.ok_or_else(|| EngineError::input("colimit cell missed by every leg")))
                .collect()
        })
        .collect();
    PresheafMap::new(col.presheaf.clone(), target.clone(), components?)
}

/// Stable cell fingerprints by iterated neighborhood refinement; isomorphic
/// presheaves get equal multisets per object, so mismatched colors prune the
/// search.
fn refine_colors(p: &Presheaf) -> Vec<Vec<u64>> {
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};
    let base = p.base();
    let mut colors: Vec<Vec<u64>> = base
        .objects()
        .map(|o| vec![o.0 as u64; p.card(o)])
        .collect();
    let rounds = base.object_count().max(2);
    for _ in 0..rounds {
        let mut next: Vec<Vec<u64>> = base.objects().map(|o| vec![0; p.card(o)]).collect();
        // Downward signature: colors of all faces.
        for o in base.objects() {
            for x in 0..p.card(o) {
                let mut h = DefaultHasher::new();
                colors[o.0][x].hash(&mut h);
                for m in base.morphisms() {
                    if base.cod(m) != o || base.is_identity(m) {
                        continue;
                    }
                    let d = base.dom(m);
                    (m.0 as u64, colors[d.0][p.act(m, x)]).hash(&mut h);
                }
                next[o.0][x] = h.finish();
            }
        }
        // Upward signature: multiset of (morphism, cofacing cell color).
        let mut up: Vec<Vec<Vec<(u64, u64)>>> = base
            .objects()
            .map(|o| vec![Vec::new(); p.card(o)])
            .collect();
        for m in base.morphisms() {
            if base.is_identity(m) {
                continue;
            }
            let c = base.cod(m);
            let d = base.dom(m);
            for x in 0..p.card(c) {
                up[d.0][p.act(m, x)].push((m.0 as u64, colors[c.0][x]));
            }
        }
        for o in base.objects() {
            for x in 0..p.card(o) {
                let mut h = DefaultHasher::new();
                next[o.0][x].hash(&mut h);
                up[o.0][x].sort_unstable();
                up[o.0][x].hash(&mut h);
                colors[o.0][x] = h.finish();
            }
        }
    }
    colors
}

/// Search for an isomorphism `P ≅ Q`; `Ok(None)` when none exists.
///
/// Backtracking over per-object bijections with naturality checking and
/// color-refinement pruning.
pub fn iso_check(
    p: &Arc<Presheaf>,
    q: &Arc<Presheaf>,
) -> Result<Option<PresheafMap>, EngineError> {
    if *p.base() != *q.base() {
        return Err(EngineError::input("iso_check between different bases"));
    }
    let base = p.base().clone();
    for o in base.objects() {
        if p.card(o) != q.card(o) {
            return Ok(None);
        }
    }
    let pc = refine_colors(p);
    let qc = refine_colors(q);
    for o in base.objects() {
        let mut a = pc[o.0].clone();
        let mut b = qc[o.0].clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Ok(None);
        }
    }
    let cells = p.all_cells();
    let index_of: BTreeMap<Cell, usize> = cells.iter().copied().zip(0..).collect();
    let mut constraints: Vec<Vec<(Mor, usize, bool)>> = vec![Vec::new(); cells.len()];
    for m in base.morphisms() {
        if base.is_identity(m) {
            continue;
        }
        let c = base.cod(m);
        let d = base.dom(m);
        for x in 0..p.card(c) {
            let src = index_of[&(c, x)];
            let dst = index_of[&(d, p.act(m, x))];
            if src >= dst {
                constraints[src].push((m, dst, false));
            } else {
                constraints[dst].push((m, src, true));
            }
        }
    }
    let cap = node_cap();
    let mut nodes: u64 = 0;
    let mut assign: Vec<usize> = Vec::with_capacity(cells.len());
    let mut used: Vec<Vec<bool>> = base.objects().map(|o| vec![false; q.card(o)]).collect();
    let mut pos = 0usize;
    let mut cursor: Vec<usize> = vec![0; cells.len() + 1];
    loop {
        if pos == cells.len() {
            let mut components: Vec<Vec<usize>> =
                base.objects().map(|o| vec![0; p.card(o)]).collect();
            for (k, &(o, i)) in cells.iter().enumerate() {
                components[o.0][i] = assign[k];
            }
            return Ok(Some(PresheafMap {
                source: p.clone(),
                target: q.clone(),
                components,
            }));
        }
        let (o, i) = cells[pos];
        let limit = q.card(o);
        let mut v = cursor[pos];
        let mut placed = false;
        while v < limit {
            nodes += 1;
            if nodes > cap {
                return Err(EngineError::bound(format!(
                    "iso_check search exceeded node cap {cap}"
                )));
            }
            let ok = !used[o.0][v]
                && pc[o.0][i] == qc[o.0][v]
                && constraints[pos].iter().all(|&(m, other, other_is_src)| {
                    if other_is_src {
                        q.act(m, assign[other]) == v
                    } else {
                        q.act(m, v) == assign[other]
                    }
                });
            if ok {
                placed = true;
                break;
            }
            v += 1;
        }
        if placed {
            cursor[pos] = v + 1;
            used[o.0][v] = true;
            assign.push(v);
            pos += 1;
            cursor[pos] = 0;
        } else {
            if pos == 0 {
                return Ok(None);
            }
            pos -= 1;
            let v = assign.pop().unwrap();
            let (po, _) = cells[pos];
            used[po.0][v] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Walking path of length `n` over the graph shape: vertices `0..=n`,
    /// edge `k` from vertex `k` to `k+1`.
    pub(crate) fn path(n: usize) -> Arc<Presheaf> {
        let base = FinCat::graph_shape();
        let s = base.morphism_by_name("s").unwrap();
        let t = base.morphism_by_name("t").unwrap();
        let mut action = vec![Vec::new(); base.morphism_count()];
        action[base.identity(Obj(0)).0] = (0..=n).collect();
        action[base.identity(Obj(1)).0] = (0..n).collect();
        action[s.0] = (0..n).collect();
        action[t.0] = (1..=n).collect();
        Arc::new(Presheaf::new(base, vec![n + 1, n], action).unwrap())
    }

    fn cycle(n: usize) -> Arc<Presheaf> {
        let base = FinCat::graph_shape();
        let s = base.morphism_by_name("s").unwrap();
        let t = base.morphism_by_name("t").unwrap();
        let mut action = vec![Vec::new(); base.morphism_count()];
        action[base.identity(Obj(0)).0] = (0..n).collect();
        action[base.identity(Obj(1)).0] = (0..n).collect();
        action[s.0] = (0..n).collect();
        action[t.0] = (0..n).map(|k| (k + 1) % n).collect();
        Arc::new(Presheaf::new(base, vec![n, n], action).unwrap())
    }

    /// Graph with every possible edge between `n` vertices, one per ordered
    /// pair.
    fn indiscrete_graph(n: usize) -> Arc<Presheaf> {
        let base = FinCat::graph_shape();
        let s = base.morphism_by_name("s").unwrap();
        let t = base.morphism_by_name("t").unwrap();
        let mut action = vec![Vec::new(); base.morphism_count()];
        action[base.identity(Obj(0)).0] = (0..n).collect();
        action[base.identity(Obj(1)).0] = (0..n * n).collect();
        action[s.0] = (0..n * n).map(|e| e / n).collect();
        action[t.0] = (0..n * n).map(|e| e % n).collect();
        Arc::new(Presheaf::new(base, vec![n, n * n], action).unwrap())
    }

    #[test]
    fn graph_shape_validates() {
        let g1 = FinCat::graph_shape();
        assert_eq!(g1.object_count(), 2);
        assert_eq!(g1.hom(Obj(0), Obj(1)).len(), 2);
        assert_eq!(g1.hom(Obj(1), Obj(0)).len(), 0);
    }

    #[test]
    fn yoneda_on_vertex_is_a_point() {
        let g1 = FinCat::graph_shape();
        let y0 = yoneda(&g1, Obj(0));
        assert_eq!(y0.presheaf.card(Obj(0)), 1);
        assert_eq!(y0.presheaf.card(Obj(1)), 0);
    }

    #[test]
    fn yoneda_on_edge_is_the_walking_edge() {
        let g1 = FinCat::graph_shape();
        let y1 = yoneda(&g1, Obj(1));
        assert_eq!(y1.presheaf.card(Obj(0)), 2);
        assert_eq!(y1.presheaf.card(Obj(1)), 1);
        // Source cell is the one labelled by `s`.
        let s = g1.morphism_by_name("s").unwrap();
        assert_eq!(y1.presheaf.act(s, 0), y1.cell_of(s));
        assert_eq!(*y1.presheaf, *path(1));
    }

    #[test]
    fn yoneda_on_square_is_the_walking_square() {
        let g1 = FinCat::graph_shape();
        let prod = ProductCat::new(&g1, &g1);
        let c = prod.pair_obj(Obj(1), Obj(1));
        let y = yoneda(&prod.cat, c);
        let counts: Vec<usize> = prod.cat.objects().map(|o| y.presheaf.card(o)).collect();
        // 4 vertices, 2 + 2 edges, 1 square.
        let vertex = prod.pair_obj(Obj(0), Obj(0));
        let h = prod.pair_obj(Obj(1), Obj(0));
        let v = prod.pair_obj(Obj(0), Obj(1));
        assert_eq!(counts[vertex.0], 4);
        assert_eq!(counts[h.0], 2);
        assert_eq!(counts[v.0], 2);
        assert_eq!(counts[c.0], 1);
    }

    #[test]
    fn hom_set_from_yoneda_matches_cells() {
        let g1 = FinCat::graph_shape();
        let x = indiscrete_graph(2);
        for c in g1.objects() {
            let y = yoneda(&g1, c);
            let maps = hom_set(&y.presheaf, &x).unwrap();
            assert_eq!(maps.len(), x.card(c));
            // The Yoneda transposes enumerate exactly these maps.
            for cell in 0..x.card(c) {
                let m = PresheafMap::from_yoneda(&y, &x, cell);
                assert!(maps.contains(&m));
            }
        }
    }

    #[test]
    fn hom_set_edge_into_indiscrete_has_four_maps() {
        let maps = hom_set(&path(1), &indiscrete_graph(2)).unwrap();
        assert_eq!(maps.len(), 4);
    }

    #[test]
    fn hom_set_into_terminal_is_singleton() {
        let g1 = FinCat::graph_shape();
        let term = Arc::new(Presheaf::terminal(g1));
        let maps = hom_set(&path(3), &term).unwrap();
        assert_eq!(maps.len(), 1);
    }

    #[test]
    fn pushout_of_edges_is_path_of_length_two() {
        let g1 = FinCat::graph_shape();
        let pt = yoneda(&g1, Obj(0)).presheaf;
        let e = path(1);
        // Glue target of edge A to source of edge B.
        let to_target = PresheafMap::new(pt.clone(), e.clone(), vec![vec![1], vec![]]).unwrap();
        let to_source = PresheafMap::new(pt.clone(), e.clone(), vec![vec![0], vec![]]).unwrap();
        let d = Diagram {
            nodes: vec![pt, e.clone(), e],
            edges: vec![(0, 1, to_target), (0, 2, to_source)],
        };
        let col = colimit(&g1, &d).unwrap();
        assert!(iso_check(&col.presheaf, &path(2)).unwrap().is_some());
    }

    #[test]
    fn colimit_of_empty_diagram_is_empty() {
        let g1 = FinCat::graph_shape();
        let col = colimit(
            &g1,
            &Diagram {
                nodes: vec![],
                edges: vec![],
            },
        )
        .unwrap();
        assert!(col.presheaf.is_empty());
    }

    #[test]
    fn coproduct_of_three_points_is_discrete() {
        let g1 = FinCat::graph_shape();
        let pt = yoneda(&g1, Obj(0)).presheaf;
        let d = Diagram {
            nodes: vec![pt.clone(), pt.clone(), pt],
            edges: vec![],
        };
        let col = colimit(&g1, &d).unwrap();
        assert_eq!(col.presheaf.card(Obj(0)), 3);
        assert_eq!(col.presheaf.card(Obj(1)), 0);
    }

    #[test]
    fn colimit_numbering_is_canonical() {
        let g1 = FinCat::graph_shape();
        let pt = yoneda(&g1, Obj(0)).presheaf;
        let e = path(1);
        let to_target = PresheafMap::new(pt.clone(), e.clone(), vec![vec![1], vec![]]).unwrap();
        let to_source = PresheafMap::new(pt.clone(), e.clone(), vec![vec![0], vec![]]).unwrap();
        let d = Diagram {
            nodes: vec![pt, e.clone(), e],
            edges: vec![(0, 1, to_target), (0, 2, to_source)],
        };
        let a = colimit(&g1, &d).unwrap();
        let b = colimit(&g1, &d).unwrap();
        assert_eq!(*a.presheaf, *b.presheaf);
        assert_eq!(a.injections[1].components(), b.injections[1].components());
    }

    #[test]
    fn iso_check_finds_relabelling() {
        // Path of length 3 with vertices listed backwards.
        let g1 = FinCat::graph_shape();
        let s = g1.morphism_by_name("s").unwrap();
        let t = g1.morphism_by_name("t").unwrap();
        let mut action = vec![Vec::new(); g1.morphism_count()];
        action[g1.identity(Obj(0)).0] = (0..4).collect();
        action[g1.identity(Obj(1)).0] = (0..3).collect();
        action[s.0] = vec![3, 2, 1];
        action[t.0] = vec![2, 1, 0];
        let rev = Arc::new(Presheaf::new(g1, vec![4, 3], action).unwrap());
        let found = iso_check(&rev, &path(3)).unwrap();
        let iso = found.expect("paths of equal length are isomorphic");
        assert!(iso.is_bijective());
        iso.validate().unwrap();
    }

    #[test]
    fn path_is_not_a_cycle() {
        assert!(iso_check(&path(2), &cycle(2)).unwrap().is_none());
    }

    #[test]
    fn square_is_not_its_boundary_coproduct() {
        let g1 = FinCat::graph_shape();
        let prod = ProductCat::new(&g1, &g1);
        let sq = yoneda(&prod.cat, prod.pair_obj(Obj(1), Obj(1))).presheaf;
        let h = yoneda(&prod.cat, prod.pair_obj(Obj(1), Obj(0))).presheaf;
        let v = yoneda(&prod.cat, prod.pair_obj(Obj(0), Obj(1))).presheaf;
        let boundary =
            Arc::new(Presheaf::coproduct(&[&h, &h, &v, &v]).unwrap());
        assert!(iso_check(&sq, &boundary).unwrap().is_none());
    }

    #[test]
    fn iso_check_is_reflexive_and_symmetric() {
        let p = indiscrete_graph(2);
        let q = path(2);
        assert!(iso_check(&p, &p).unwrap().is_some());
        assert!(iso_check(&q, &q).unwrap().is_some());
        assert_eq!(
            iso_check(&p, &q).unwrap().is_some(),
            iso_check(&q, &p).unwrap().is_some()
        );
    }

    #[test]
    fn colimit_satisfies_universal_property_on_small_diagrams() {
        // Pushout diagram; cocones found by hom_set must factor uniquely.
        let g1 = FinCat::graph_shape();
        let pt = yoneda(&g1, Obj(0)).presheaf;
        let e = path(1);
        let to_target = PresheafMap::new(pt.clone(), e.clone(), vec![vec![1], vec![]]).unwrap();
        let to_source = PresheafMap::new(pt.clone(), e.clone(), vec![vec![0], vec![]]).unwrap();
        let d = Diagram {
            nodes: vec![pt.clone(), e.clone(), e.clone()],
            edges: vec![(0, 1, to_target), (0, 2, to_source)],
        };
        let col = colimit(&g1, &d).unwrap();
        let x = indiscrete_graph(2);
        let cands: Vec<Vec<PresheafMap>> = d
            .nodes
            .iter()
            .map(|n| hom_set(n, &x).unwrap())
            .collect();
        let all_from_colim = hom_set(&col.presheaf, &x).unwrap();
        let mut cocones = 0;
        for m0 in &cands[0] {
            for m1 in &cands[1] {
                for m2 in &cands[2] {
                    let legs = [m0, m1, m2];
                    let is_cocone = d.edges.iter().all(|(s, dst, f)| {
                        legs[*dst].compose(f) == *legs[*s]
                    });
                    if !is_cocone {
                        continue;
                    }
                    cocones += 1;
                    let factorings = all_from_colim
                        .iter()
                        .filter(|h| {
                            (0..3).all(|i| h.compose(&col.injections[i]) == *legs[i])
                        })
                        .count();
                    assert_eq!(factorings, 1, "cocone must factor uniquely");
                }
            }
        }
        assert!(cocones > 0);
    }
}
