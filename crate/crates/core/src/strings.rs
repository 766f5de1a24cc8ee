//! Fields of strings, horizontal parallel transport, flatness and half
//! flatness, the flat-field solver, and the truncated open-string action.
//!
//! A field assigns a complex coefficient to every ordered pair of parallel
//! edges of a vertical graph; blockwise it is a matrix per vertex pair. The
//! transport of a field through a connection contracts the two-row grid
//! whose upper cells are connection values and whose lower cells are the
//! bar-conjugate values, i.e. `kappa * conj(W)` with the square-root weight
//! of the bar renormalization baked in.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::connection::{renormalize, Cell, Connection, Renormalization, DEFAULT_CHECK_TOL};
use crate::error::{Error, Result};
use crate::graphs::{BipartiteGraph, GraphId, Layer, VertexId};
use crate::linalg;
use crate::scalar::{cabs, czero, rmax, Cx, Real};

/// Maximum open-string level.
pub const LEVEL_CAP: usize = 6;

/// Coefficients on ordered pairs of parallel edges of a vertical graph.
#[derive(Clone, Debug, PartialEq)]
pub struct StringField<T: Real> {
    n_edges: usize,
    coeffs: BTreeMap<(usize, usize), Cx<T>>,
}

impl<T: Real> StringField<T> {
    /// Builds a field, rejecting coefficients on non-parallel pairs.
    pub fn new(
        graph: &BipartiteGraph,
        coeffs: impl IntoIterator<Item = ((usize, usize), Cx<T>)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((e1, e2), v) in coeffs {
            if e1 >= graph.n_edges() || e2 >= graph.n_edges() {
                return Err(Error::ShapeMismatch(format!(
                    "field coefficient on unknown edges ({e1},{e2})"
                )));
            }
            if graph.edges()[e1] != graph.edges()[e2] {
                return Err(Error::ShapeMismatch(format!(
                    "field coefficient on non-parallel edges ({e1},{e2})"
                )));
            }
            if v != czero::<T>() {
                map.insert((e1, e2), v);
            }
        }
        Ok(StringField { n_edges: graph.n_edges(), coeffs: map })
    }

    /// The identity field: coefficient one on every diagonal pair.
    pub fn identity(graph: &BipartiteGraph) -> Self {
        let coeffs = (0..graph.n_edges()).map(|e| ((e, e), Cx::new(T::one(), T::zero())));
        StringField { n_edges: graph.n_edges(), coeffs: coeffs.collect() }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn get(&self, e1: usize, e2: usize) -> Cx<T> {
        self.coeffs.get(&(e1, e2)).copied().unwrap_or_else(czero::<T>)
    }

    pub fn coeffs(&self) -> &BTreeMap<(usize, usize), Cx<T>> {
        &self.coeffs
    }

    /// Dense matrix with entry `(e1, e2)` the coefficient replacing `e2` by
    /// `e1` under the action.
    pub fn to_matrix(&self) -> DMatrix<Cx<T>> {
        let mut m = DMatrix::from_element(self.n_edges, self.n_edges, czero::<T>());
        for (&(e1, e2), &v) in &self.coeffs {
            m[(e1, e2)] = v;
        }
        m
    }

    pub fn from_matrix(graph: &BipartiteGraph, m: &DMatrix<Cx<T>>) -> Result<Self> {
        let mut coeffs = Vec::new();
        for e1 in 0..graph.n_edges() {
            for e2 in 0..graph.n_edges() {
                if m[(e1, e2)] != czero::<T>() {
                    coeffs.push(((e1, e2), m[(e1, e2)]));
                }
            }
        }
        StringField::new(graph, coeffs)
    }

    pub fn scale(&self, factor: Cx<T>) -> Self {
        StringField {
            n_edges: self.n_edges,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, &v)| v * factor != czero::<T>())
                .map(|(&k, &v)| (k, v * factor))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut coeffs = self.coeffs.clone();
        for (&k, &v) in &other.coeffs {
            let entry = coeffs.entry(k).or_insert_with(czero::<T>);
            *entry += v;
        }
        coeffs.retain(|_, v| *v != czero::<T>());
        StringField { n_edges: self.n_edges, coeffs }
    }

    /// Frobenius inner product on the coefficients, conjugate-linear in
    /// `self`.
    pub fn dot(&self, other: &Self) -> Cx<T> {
        let mut acc = czero::<T>();
        for (&k, &v) in &self.coeffs {
            acc += v.conj() * other.get(k.0, k.1);
        }
        acc
    }

    pub fn norm(&self) -> T {
        self.dot(self).re.sqrt()
    }

    pub fn max_coeff_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for (&k, &v) in &self.coeffs {
            worst = rmax(worst, cabs(v - other.get(k.0, k.1)));
        }
        for (&k, &v) in &other.coeffs {
            worst = rmax(worst, cabs(v - self.get(k.0, k.1)));
        }
        worst
    }

    /// Blockwise adjoint: `f*(e1, e2) = conj(f(e2, e1))`.
    pub fn adjoint(&self) -> Self {
        StringField {
            n_edges: self.n_edges,
            coeffs: self.coeffs.iter().map(|(&(a, b), &v)| ((b, a), v.conj())).collect(),
        }
    }
}

/// Blockwise matrix product of two fields on the same graph.
pub fn field_product<T: Real>(f: &StringField<T>, g: &StringField<T>) -> Result<StringField<T>> {
    if f.n_edges != g.n_edges {
        return Err(Error::ShapeMismatch("field product needs a common graph".into()));
    }
    let mut coeffs: BTreeMap<(usize, usize), Cx<T>> = BTreeMap::new();
    for (&(e1, e), &a) in &f.coeffs {
        for (&(e2, e3), &b) in &g.coeffs {
            if e2 != e {
                continue;
            }
            let entry = coeffs.entry((e1, e3)).or_insert_with(czero::<T>);
            *entry += a * b;
        }
    }
    coeffs.retain(|_, v| *v != czero::<T>());
    Ok(StringField { n_edges: f.n_edges, coeffs })
}

/// An ordered list of horizontally composable connections.
///
/// The left vertical graph of each letter must equal the right vertical
/// graph of the previous one; the word is closed when the last right
/// vertical graph equals the first left one.
#[derive(Clone, Debug)]
pub struct ConnectionWord<T: Real> {
    letters: Vec<Connection<T>>,
}

impl<T: Real> ConnectionWord<T> {
    pub fn new(letters: Vec<Connection<T>>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::ShapeMismatch("empty word".into()));
        }
        let tol = T::lit(DEFAULT_CHECK_TOL);
        for k in 0..letters.len() - 1 {
            let right = letters[k].config().graph(GraphId::G3);
            let left = letters[k + 1].config().graph(GraphId::G1);
            if !right.same_shape(left) {
                return Err(Error::GraphMismatch(format!(
                    "letter {} right vertical graph differs from letter {} left vertical graph",
                    k,
                    k + 1
                )));
            }
            let mut gap = T::zero();
            for (a, b) in letters[k]
                .pf()
                .mu_layer(Layer::V3)
                .iter()
                .zip(letters[k + 1].pf().mu_layer(Layer::V0))
            {
                gap = rmax(gap, (*a - *b).abs());
            }
            for (a, b) in letters[k]
                .pf()
                .mu_layer(Layer::V2)
                .iter()
                .zip(letters[k + 1].pf().mu_layer(Layer::V1))
            {
                gap = rmax(gap, (*a - *b).abs());
            }
            if gap >= tol {
                return Err(Error::MuMismatch(gap.to_f64_lossy()));
            }
        }
        Ok(ConnectionWord { letters })
    }

    pub fn letters(&self) -> &[Connection<T>] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn left_graph(&self) -> &BipartiteGraph {
        self.letters[0].config().graph(GraphId::G1)
    }

    pub fn right_graph(&self) -> &BipartiteGraph {
        self.letters.last().unwrap().config().graph(GraphId::G3)
    }

    pub fn is_closed(&self) -> bool {
        self.right_graph().same_shape(self.left_graph())
    }

    pub fn require_closed(&self) -> Result<()> {
        if self.is_closed() {
            Ok(())
        } else {
            Err(Error::OpenWord)
        }
    }
}

/// The canonical closed word `[a, prime(a)]`.
pub fn canonical_word<T: Real>(a: &Connection<T>) -> Result<ConnectionWord<T>> {
    let word = ConnectionWord::new(vec![a.clone(), renormalize(a, Renormalization::Prime)])?;
    word.require_closed()?;
    Ok(word)
}

/// Result of transporting a field through a connection.
pub struct TransportResult<T: Real> {
    /// Contraction values keyed by `(xi, xi', sigma1, sigma2)` edge ids.
    pub values: BTreeMap<(usize, usize, usize, usize), Cx<T>>,
    /// Off-diagonal mass plus the worst variation of the diagonal.
    pub defect: T,
    /// Extracted field on the right vertical graph, present iff the defect
    /// is below the tolerance.
    pub field: Option<StringField<T>>,
}

/// Per-letter grid cell matrices: `upper[t][b]` has entry `(l, r)` equal to
/// `W(t, l, b, r)`; `lower[t][b]` carries `kappa(t, b) * conj(W(t, l, b, r))`.
struct LetterGrids<T: Real> {
    n_top: usize,
    n_bottom: usize,
    upper: Vec<Vec<DMatrix<Cx<T>>>>,
    lower: Vec<Vec<DMatrix<Cx<T>>>>,
}

fn letter_grids<T: Real>(w: &Connection<T>) -> LetterGrids<T> {
    let cfg = w.config();
    let n_top = cfg.graph(GraphId::G0).n_edges();
    let n_bottom = cfg.graph(GraphId::G2).n_edges();
    let n_left = cfg.graph(GraphId::G1).n_edges();
    let n_right = cfg.graph(GraphId::G3).n_edges();
    let mut upper = Vec::with_capacity(n_top);
    let mut lower = Vec::with_capacity(n_top);
    for t in 0..n_top {
        let mut urow = Vec::with_capacity(n_bottom);
        let mut lrow = Vec::with_capacity(n_bottom);
        for b in 0..n_bottom {
            let mut u = DMatrix::from_element(n_left, n_right, czero::<T>());
            let mut l = DMatrix::from_element(n_left, n_right, czero::<T>());
            let kappa = w.kappa(t, b);
            for le in 0..n_left {
                for re in 0..n_right {
                    let v = w.value(&Cell::new(t, le, b, re));
                    u[(le, re)] = v;
                    l[(le, re)] = v.conj() * Cx::new(kappa, T::zero());
                }
            }
            urow.push(u);
            lrow.push(l);
        }
        upper.push(urow);
        lower.push(lrow);
    }
    LetterGrids { n_top, n_bottom, upper, lower }
}

/// Transports `f` through `w`:
///
/// `T(xi, xi', s1, s2) = sum f(r1, r2) W(xi, r1, eta, s1) kappa(xi', eta)
///  conj(W(xi', r2, eta, s2))`
///
/// summed over `r1, r2, eta`. The transport succeeds when the result is
/// `delta_{xi, xi'}` times a field on the right vertical graph.
pub fn transport_field<T: Real>(
    f: &StringField<T>,
    w: &Connection<T>,
    tol: T,
) -> Result<TransportResult<T>> {
    let cfg = w.config();
    let g1 = cfg.graph(GraphId::G1);
    if f.n_edges() != g1.n_edges() {
        return Err(Error::ShapeMismatch(
            "field does not live on the connection's left vertical graph".into(),
        ));
    }
    let grids = letter_grids(w);
    let fm = f.to_matrix();
    let g0 = cfg.graph(GraphId::G0);
    let g3 = cfg.graph(GraphId::G3);
    let n_right = g3.n_edges();

    let mut values = BTreeMap::new();
    let mut off = T::zero();
    for xi in 0..grids.n_top {
        for xi2 in 0..grids.n_top {
            let mut acc = DMatrix::from_element(n_right, n_right, czero::<T>());
            for b in 0..grids.n_bottom {
                acc += grids.upper[xi][b].transpose() * &fm * &grids.lower[xi2][b];
            }
            for s1 in 0..n_right {
                for s2 in 0..n_right {
                    let v = acc[(s1, s2)];
                    if v != czero::<T>() {
                        values.insert((xi, xi2, s1, s2), v);
                    }
                    if xi != xi2 {
                        off = rmax(off, cabs(v));
                    }
                }
            }
        }
    }

    // Diagonal consistency: for every parallel pair on the right graph the
    // diagonal entries must agree across all top edges arriving at the
    // pair's source vertex.
    let mut variation = T::zero();
    let mut coeffs = Vec::new();
    for (s1, s2) in g3.parallel_pairs() {
        let sources: Vec<usize> =
            (0..g0.n_edges()).filter(|&a| g0.dst(a) == g3.src(s1)).collect();
        if sources.is_empty() {
            continue;
        }
        let vals: Vec<Cx<T>> = sources
            .iter()
            .map(|&a| values.get(&(a, a, s1, s2)).copied().unwrap_or_else(czero::<T>))
            .collect();
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                variation = rmax(variation, cabs(vals[i] - vals[j]));
            }
        }
        let mut mean = czero::<T>();
        for v in &vals {
            mean += *v;
        }
        mean /= Cx::new(T::from_usize(vals.len()).unwrap(), T::zero());
        if mean != czero::<T>() {
            coeffs.push(((s1, s2), mean));
        }
    }

    let defect = off + variation;
    let field = if defect < tol { Some(StringField::new(g3, coeffs)?) } else { None };
    Ok(TransportResult { values, defect, field })
}

/// Half flatness: there is a field on the right vertical graph matching the
/// transport of `f`.
pub fn check_half_flatness<T: Real>(
    f: &StringField<T>,
    w: &Connection<T>,
    tol: T,
) -> Result<(bool, Option<StringField<T>>)> {
    let t = transport_field(f, w, tol)?;
    Ok((t.field.is_some(), t.field))
}

fn combos(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &d in dims {
        let mut next = Vec::with_capacity(out.len() * d);
        for prefix in &out {
            for i in 0..d {
                let mut c = prefix.clone();
                c.push(i);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

/// Whether the top boundary edges of a word chain into a path, and the
/// index of the path's final vertex.
fn top_path_end<T: Real>(word: &ConnectionWord<T>, tops: &[usize]) -> Option<usize> {
    let mut end = None;
    for (k, letter) in word.letters().iter().enumerate() {
        let g0 = letter.config().graph(GraphId::G0);
        let t = tops[k];
        if let Some(prev) = end {
            if g0.src(t) != prev {
                return None;
            }
        }
        end = Some(g0.dst(t));
    }
    end
}

/// Flatness defect of `f` against a closed word: the two-row grid
/// contraction must equal `delta(top) delta(bottom) f` on all boundaries.
pub fn check_flatness<T: Real>(
    f: &StringField<T>,
    word: &ConnectionWord<T>,
    tol: T,
) -> Result<(bool, T)> {
    word.require_closed()?;
    let defect = flatness_map_defect(f, word, Some(f))?;
    Ok((defect < tol, defect))
}

/// Max absolute difference between the grid contraction of `f` and
/// `delta delta rhs_field` over all boundary tuples. Passing `None` for the
/// right-hand field compares the contraction against zero.
fn flatness_map_defect<T: Real>(
    f: &StringField<T>,
    word: &ConnectionWord<T>,
    rhs_field: Option<&StringField<T>>,
) -> Result<T> {
    let letters = word.letters();
    if f.n_edges() != word.left_graph().n_edges() {
        return Err(Error::ShapeMismatch("field does not live on the word's left graph".into()));
    }
    let grids: Vec<LetterGrids<T>> = letters.iter().map(letter_grids).collect();
    let fm = f.to_matrix();
    let n_right = word.right_graph().n_edges();
    let top_dims: Vec<usize> = grids.iter().map(|g| g.n_top).collect();
    let bottom_dims: Vec<usize> = grids.iter().map(|g| g.n_bottom).collect();
    let top_combos = combos(&top_dims);
    let bottom_combos = combos(&bottom_dims);

    let chain = |rows: &[Vec<Vec<DMatrix<Cx<T>>>>], t: &[usize], b: &[usize]| -> DMatrix<Cx<T>> {
        let mut m = rows[0][t[0]][b[0]].clone();
        for k in 1..rows.len() {
            m *= &rows[k][t[k]][b[k]];
        }
        m
    };
    let uppers: Vec<Vec<Vec<DMatrix<Cx<T>>>>> = grids.iter().map(|g| g.upper.clone()).collect();
    let lowers: Vec<Vec<Vec<DMatrix<Cx<T>>>>> = grids.iter().map(|g| g.lower.clone()).collect();

    let last_g3 = word.right_graph();
    let mut worst = T::zero();
    for t in &top_combos {
        // Precompute the upper chains for this top boundary.
        let ups: Vec<DMatrix<Cx<T>>> =
            bottom_combos.iter().map(|b| chain(&uppers, t, b)).collect();
        let t_end = top_path_end(word, t);
        for t2 in &top_combos {
            let mut acc = DMatrix::from_element(n_right, n_right, czero::<T>());
            for (bi, b) in bottom_combos.iter().enumerate() {
                acc += ups[bi].transpose() * &fm * chain(&lowers, t2, b);
            }
            let diagonal = t == t2;
            for p1 in 0..n_right {
                for p2 in 0..n_right {
                    let mut rhs = czero::<T>();
                    if let (true, Some(end), Some(rf)) = (diagonal, t_end, rhs_field) {
                        if last_g3.src(p1) == end {
                            rhs = rf.get(p1, p2);
                        }
                    }
                    worst = rmax(worst, cabs(acc[(p1, p2)] - rhs));
                }
            }
        }
    }
    Ok(worst)
}

/// Orthonormal basis (Frobenius inner product) of the space of fields with
/// zero flatness defect, computed as the numerical nullspace of the linear
/// map `f -> grid(f) - delta delta f`.
pub fn solve_flat_fields<T: Real>(
    word: &ConnectionWord<T>,
    tol: T,
) -> Result<Vec<StringField<T>>> {
    word.require_closed()?;
    let left = word.left_graph().clone();
    let slots = left.parallel_pairs();
    if slots.is_empty() {
        return Ok(Vec::new());
    }
    if slots.len() > linalg::SYSTEM_CAP {
        return Err(Error::SystemTooLarge { size: slots.len(), cap: linalg::SYSTEM_CAP });
    }

    let letters = word.letters();
    let grids: Vec<LetterGrids<T>> = letters.iter().map(letter_grids).collect();
    let n_right = word.right_graph().n_edges();
    let top_dims: Vec<usize> = grids.iter().map(|g| g.n_top).collect();
    let bottom_dims: Vec<usize> = grids.iter().map(|g| g.n_bottom).collect();
    let top_combos = combos(&top_dims);
    let bottom_combos = combos(&bottom_dims);
    let uppers: Vec<Vec<Vec<DMatrix<Cx<T>>>>> = grids.iter().map(|g| g.upper.clone()).collect();
    let lowers: Vec<Vec<Vec<DMatrix<Cx<T>>>>> = grids.iter().map(|g| g.lower.clone()).collect();
    let chain = |rows: &[Vec<Vec<DMatrix<Cx<T>>>>], t: &[usize], b: &[usize]| -> DMatrix<Cx<T>> {
        let mut m = rows[0][t[0]][b[0]].clone();
        for k in 1..rows.len() {
            m *= &rows[k][t[k]][b[k]];
        }
        m
    };

    let n_rows = top_combos.len() * top_combos.len() * n_right * n_right;
    let mut a = DMatrix::from_element(n_rows, slots.len(), czero::<T>());
    let last_g3 = word.right_graph();

    for (col, &(r1, r2)) in slots.iter().enumerate() {
        let mut fm = DMatrix::from_element(left.n_edges(), left.n_edges(), czero::<T>());
        fm[(r1, r2)] = Cx::new(T::one(), T::zero());
        let mut row = 0usize;
        for t in &top_combos {
            let ups: Vec<DMatrix<Cx<T>>> =
                bottom_combos.iter().map(|b| chain(&uppers, t, b)).collect();
            let t_end = top_path_end(word, t);
            for t2 in &top_combos {
                let mut acc = DMatrix::from_element(n_right, n_right, czero::<T>());
                for (bi, b) in bottom_combos.iter().enumerate() {
                    acc += ups[bi].transpose() * &fm * chain(&lowers, t2, b);
                }
                let diagonal = t == t2;
                for p1 in 0..n_right {
                    for p2 in 0..n_right {
                        let mut v = acc[(p1, p2)];
                        if diagonal && (p1, p2) == (r1, r2) {
                            if let Some(end) = t_end {
                                if last_g3.src(p1) == end {
                                    v -= Cx::new(T::one(), T::zero());
                                }
                            }
                        }
                        a[(row, col)] = v;
                        row += 1;
                    }
                }
            }
        }
    }

    let basis = linalg::nullspace(&a, tol);
    basis
        .into_iter()
        .map(|vec| {
            let coeffs: Vec<((usize, usize), Cx<T>)> =
                slots.iter().copied().zip(vec.iter().copied()).collect();
            StringField::new(&left, coeffs)
        })
        .collect()
}

/// A basis open string: alternating horizontal paths on the top and bottom
/// graphs joined by a terminal vertical edge. The terminal edge lies in the
/// left vertical graph at even levels and in the right one at odd levels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct OpenString {
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
    pub terminal: usize,
}

impl OpenString {
    pub fn level(&self) -> usize {
        self.top.len()
    }
}

fn horizontal_paths(g: &BipartiteGraph, start: usize, level: usize) -> Vec<(Vec<usize>, usize)> {
    // Alternates forward and reversed steps; returns (edge ids, end vertex).
    let mut paths = vec![(Vec::new(), start)];
    for step in 0..level {
        let mut next = Vec::new();
        for (path, at) in &paths {
            for e in 0..g.n_edges() {
                let ok = if step % 2 == 0 { g.src(e) == *at } else { g.dst(e) == *at };
                if ok {
                    let mut p = path.clone();
                    p.push(e);
                    let end = if step % 2 == 0 { g.dst(e) } else { g.src(e) };
                    next.push((p, end));
                }
            }
        }
        paths = next;
    }
    paths
}

/// Enumerates the basis open strings of the given level, in lexicographic
/// order of `(top path, bottom path, terminal edge)`.
pub fn open_string_space<T: Real>(
    w: &Connection<T>,
    star0: VertexId,
    star1: VertexId,
    level: usize,
) -> Result<Vec<OpenString>> {
    if star0.layer != Layer::V0 || star1.layer != Layer::V1 {
        return Err(Error::ShapeMismatch("base points must lie on V0 and V1".into()));
    }
    if level > LEVEL_CAP {
        return Err(Error::LevelCap { level, cap: LEVEL_CAP });
    }
    let cfg = w.config();
    let tops = horizontal_paths(cfg.graph(GraphId::G0), star0.index, level);
    let bottoms = horizontal_paths(cfg.graph(GraphId::G2), star1.index, level);
    let terminal_graph = if level % 2 == 0 { GraphId::G1 } else { GraphId::G3 };
    let tg = cfg.graph(terminal_graph);
    let mut out = Vec::new();
    for (top, tend) in &tops {
        for (bottom, bend) in &bottoms {
            for e in 0..tg.n_edges() {
                if tg.src(e) == *tend && tg.dst(e) == *bend {
                    out.push(OpenString { top: top.clone(), bottom: bottom.clone(), terminal: e });
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Applies a field to an open string by replacing the terminal edge:
/// the result is the combination `sum_i f(i, terminal) (s with terminal i)`.
pub fn act_flat_field<T: Real>(
    f: &StringField<T>,
    s: &OpenString,
    w: &Connection<T>,
) -> Result<Vec<(OpenString, Cx<T>)>> {
    let gid = if s.level() % 2 == 0 { GraphId::G1 } else { GraphId::G3 };
    let g = w.config().graph(gid);
    if f.n_edges() != g.n_edges() {
        return Err(Error::ShapeMismatch("field does not live on the terminal graph".into()));
    }
    let mut out = Vec::new();
    for i in g.parallel(s.terminal) {
        let c = f.get(i, s.terminal);
        if c != czero::<T>() {
            let mut s2 = s.clone();
            s2.terminal = i;
            out.push((s2, c));
        }
    }
    Ok(out)
}

/// Action matrix of a field on the level basis: entry `(s', s)` is the
/// coefficient of `s'` in the image of `s`.
fn action_matrix<T: Real>(field: &StringField<T>, basis: &[OpenString]) -> DMatrix<Cx<T>> {
    let index: BTreeMap<&OpenString, usize> =
        basis.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut m = DMatrix::from_element(basis.len(), basis.len(), czero::<T>());
    for (col, s) in basis.iter().enumerate() {
        for (i, coeff) in field
            .coeffs()
            .iter()
            .filter(|(&(_, e2), _)| e2 == s.terminal)
            .map(|(&(e1, _), &v)| (e1, v))
        {
            let mut s2 = s.clone();
            s2.terminal = i;
            if let Some(&row) = index.get(&s2) {
                m[(row, col)] += coeff;
            }
        }
    }
    m
}

/// Embedding of the level-`l` strings into level `l + 1`: each string is
/// rewritten in the longer basis with the single-cell coefficients, read
/// from the connection at even levels and from its prime renormalization at
/// odd ones.
fn embedding_matrix<T: Real>(
    w: &Connection<T>,
    prime: &Connection<T>,
    from: &[OpenString],
    to: &[OpenString],
    level: usize,
) -> DMatrix<Cx<T>> {
    let cfg = w.config();
    let index: BTreeMap<&OpenString, usize> = to.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let g0 = cfg.graph(GraphId::G0);
    let g2 = cfg.graph(GraphId::G2);
    let mut m = DMatrix::from_element(to.len(), from.len(), czero::<T>());
    for (col, s) in from.iter().enumerate() {
        if level % 2 == 0 {
            // Terminal edge in G1; extend by a forward G0 edge on top, a
            // forward G2 edge below, and a new G3 terminal.
            let tend = if level == 0 {
                cfg.graph(GraphId::G1).src(s.terminal)
            } else {
                g0.src(*s.top.last().unwrap())
            };
            let bend = cfg.graph(GraphId::G1).dst(s.terminal);
            for a in 0..g0.n_edges() {
                if g0.src(a) != tend {
                    continue;
                }
                for c in 0..g2.n_edges() {
                    if g2.src(c) != bend {
                        continue;
                    }
                    let g3 = cfg.graph(GraphId::G3);
                    for e in 0..g3.n_edges() {
                        if g3.src(e) != g0.dst(a) || g3.dst(e) != g2.dst(c) {
                            continue;
                        }
                        let coeff = w.value(&Cell::new(a, s.terminal, c, e));
                        if coeff == czero::<T>() {
                            continue;
                        }
                        let mut s2 = s.clone();
                        s2.top.push(a);
                        s2.bottom.push(c);
                        s2.terminal = e;
                        if let Some(&row) = index.get(&s2) {
                            m[(row, col)] += coeff;
                        }
                    }
                }
            }
        } else {
            // Terminal edge in G3; extend by reversed G0 and G2 edges and a
            // new G1 terminal, with coefficients from the prime connection.
            let tend = cfg.graph(GraphId::G3).src(s.terminal);
            let bend = cfg.graph(GraphId::G3).dst(s.terminal);
            for a in 0..g0.n_edges() {
                if g0.dst(a) != tend {
                    continue;
                }
                for c in 0..g2.n_edges() {
                    if g2.dst(c) != bend {
                        continue;
                    }
                    let g1 = cfg.graph(GraphId::G1);
                    for e in 0..g1.n_edges() {
                        if g1.src(e) != g0.src(a) || g1.dst(e) != g2.src(c) {
                            continue;
                        }
                        let coeff = prime.value(&Cell::new(a, s.terminal, c, e));
                        if coeff == czero::<T>() {
                            continue;
                        }
                        let mut s2 = s.clone();
                        s2.top.push(a);
                        s2.bottom.push(c);
                        s2.terminal = e;
                        if let Some(&row) = index.get(&s2) {
                            m[(row, col)] += coeff;
                        }
                    }
                }
            }
        }
    }
    m
}

/// Least-squares solution of the cell-level intertwining relation
/// `sum_i f(i,k) W(a, xi_i, c, s) = sum_e W(a, xi_k, c, e) g(s, e)`
/// for the companion field `g` on the right vertical graph.
fn odd_level_field<T: Real>(
    f: &StringField<T>,
    w: &Connection<T>,
    tol: T,
) -> Result<StringField<T>> {
    let cfg = w.config();
    let g0 = cfg.graph(GraphId::G0);
    let g1 = cfg.graph(GraphId::G1);
    let g2 = cfg.graph(GraphId::G2);
    let g3 = cfg.graph(GraphId::G3);
    let slots = g3.parallel_pairs();
    let n_rows = g0.n_edges() * g2.n_edges() * g3.n_edges() * g1.n_edges();
    let mut a = DMatrix::from_element(n_rows, slots.len(), czero::<T>());
    let mut b = DVector::from_element(n_rows, czero::<T>());
    let mut row = 0usize;
    for e0 in 0..g0.n_edges() {
        for e2 in 0..g2.n_edges() {
            for s in 0..g3.n_edges() {
                for k in 0..g1.n_edges() {
                    let mut lhs = czero::<T>();
                    for i in g1.parallel(k) {
                        lhs += f.get(i, k) * w.value(&Cell::new(e0, i, e2, s));
                    }
                    b[row] = lhs;
                    for (col, &(s1, s2)) in slots.iter().enumerate() {
                        if s1 != s {
                            continue;
                        }
                        a[(row, col)] += w.value(&Cell::new(e0, k, e2, s2));
                    }
                    row += 1;
                }
            }
        }
    }
    let x = linalg::least_squares(&a, &b, tol);
    let coeffs: Vec<((usize, usize), Cx<T>)> =
        slots.iter().copied().zip(x.iter().copied()).collect();
    StringField::new(g3, coeffs)
}

/// Intertwining defect of the field action against the level embedding:
/// `max |iota A_level - A_{level+1} iota|` over all base-point pairs.
///
/// At even levels the field acts directly; at odd levels the action uses
/// the companion field obtained by least squares from the cell-level
/// transport relation, which is exact precisely for transportable fields.
pub fn check_action_well_defined<T: Real>(
    f: &StringField<T>,
    w: &Connection<T>,
    level: usize,
    tol: T,
) -> Result<T> {
    if level + 1 > LEVEL_CAP {
        return Err(Error::LevelCap { level: level + 1, cap: LEVEL_CAP });
    }
    let cfg = w.config();
    let prime = renormalize(w, Renormalization::Prime);
    let companion = odd_level_field(f, w, tol)?;
    let mut worst = T::zero();
    for v0 in 0..cfg.layer_len(Layer::V0) {
        for v1 in 0..cfg.layer_len(Layer::V1) {
            let star0 = VertexId::new(Layer::V0, v0);
            let star1 = VertexId::new(Layer::V1, v1);
            let from = open_string_space(w, star0, star1, level)?;
            let to = open_string_space(w, star0, star1, level + 1)?;
            if from.is_empty() || to.is_empty() {
                continue;
            }
            let iota = embedding_matrix(w, &prime, &from, &to, level);
            let a_from = if level % 2 == 0 {
                action_matrix(f, &from)
            } else {
                action_matrix(&companion, &from)
            };
            let a_to = if (level + 1) % 2 == 0 {
                action_matrix(f, &to)
            } else {
                action_matrix(&companion, &to)
            };
            let commutator = &iota * a_from - a_to * iota;
            for z in commutator.iter() {
                worst = rmax(worst, cabs(*z));
            }
        }
    }
    Ok(worst)
}
