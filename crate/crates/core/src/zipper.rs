//! The 2-tensor side of the flatness/zipper equivalence: conversions
//! between fields and 2-tensors, the half zipper and zipper checks, the
//! half-zipper solver, and the four-way verifier.
//!
//! Direction convention, fixed repo-wide: a 2-tensor `F` stores entries
//! `F(left, right)`. Applied on the left leg of a tensor block
//! `M[rho, sigma]` it acts as the matrix product `F M` (the boundary edge
//! enters `F`'s left port); applied on the right leg it acts as `M F` (the
//! tensor's outgoing edge enters the left port, the boundary edge leaves on
//! the right). The half zipper condition for a single tensor block reads
//! `F M(xi, eta) = M(xi, eta) Ftilde` for every pair of horizontal legs;
//! see `two_by_two_convention_example` in the tests for a worked 2x2 case.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::connection::Cell;
use crate::error::{Error, Result};
use crate::graphs::{BipartiteGraph, GraphId, PFData, VertexId};
use crate::scalar::{cabs, czero, rmax, Cx, Real};
use crate::strings::{
    check_flatness, transport_field, ConnectionWord, StringField, TransportResult,
};
use crate::tensor4::{connection_to_tensor, FourTensor};

/// Coefficients on ordered pairs of parallel edges of a vertical graph,
/// read as a matrix `F(left, right)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoTensor<T: Real> {
    n_edges: usize,
    values: BTreeMap<(usize, usize), Cx<T>>,
}

impl<T: Real> TwoTensor<T> {
    pub fn new(
        graph: &BipartiteGraph,
        values: impl IntoIterator<Item = ((usize, usize), Cx<T>)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((e1, e2), v) in values {
            if e1 >= graph.n_edges() || e2 >= graph.n_edges() {
                return Err(Error::ShapeMismatch(format!(
                    "2-tensor entry on unknown edges ({e1},{e2})"
                )));
            }
            if graph.edges()[e1] != graph.edges()[e2] {
                return Err(Error::ShapeMismatch(format!(
                    "2-tensor entry on non-parallel edges ({e1},{e2})"
                )));
            }
            if v != czero::<T>() {
                map.insert((e1, e2), v);
            }
        }
        Ok(TwoTensor { n_edges: graph.n_edges(), values: map })
    }

    pub fn identity(graph: &BipartiteGraph) -> Self {
        TwoTensor {
            n_edges: graph.n_edges(),
            values: (0..graph.n_edges())
                .map(|e| ((e, e), Cx::new(T::one(), T::zero())))
                .collect(),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn get(&self, left: usize, right: usize) -> Cx<T> {
        self.values.get(&(left, right)).copied().unwrap_or_else(czero::<T>)
    }

    pub fn values(&self) -> &BTreeMap<(usize, usize), Cx<T>> {
        &self.values
    }

    pub fn to_matrix(&self) -> DMatrix<Cx<T>> {
        let mut m = DMatrix::from_element(self.n_edges, self.n_edges, czero::<T>());
        for (&(l, r), &v) in &self.values {
            m[(l, r)] = v;
        }
        m
    }

    pub fn max_diff(&self, other: &TwoTensor<T>) -> T {
        let mut worst = T::zero();
        for (&k, &v) in &self.values {
            worst = rmax(worst, cabs(v - other.get(k.0, k.1)));
        }
        for (&k, &v) in &other.values {
            worst = rmax(worst, cabs(v - self.get(k.0, k.1)));
        }
        worst
    }
}

fn vertical_ratio<T: Real>(graph: &BipartiteGraph, pf: &PFData<T>, edge: usize) -> T {
    pf.mu(VertexId::new(graph.range_layer(), graph.dst(edge)))
        / pf.mu(VertexId::new(graph.source_layer(), graph.src(edge)))
}

/// `F(rho2, rho1) = (mu(r(rho1)) / mu(s(rho1))) f(rho1, rho2)`.
pub fn field_to_two_tensor<T: Real>(
    f: &StringField<T>,
    graph: &BipartiteGraph,
    pf: &PFData<T>,
) -> Result<TwoTensor<T>> {
    if f.n_edges() != graph.n_edges() {
        return Err(Error::ShapeMismatch("field does not live on the given graph".into()));
    }
    let values: Vec<((usize, usize), Cx<T>)> = f
        .coeffs()
        .iter()
        .map(|(&(r1, r2), &v)| {
            ((r2, r1), v * Cx::new(vertical_ratio(graph, pf, r1), T::zero()))
        })
        .collect();
    TwoTensor::new(graph, values)
}

/// Exact inverse of [`field_to_two_tensor`].
pub fn two_tensor_to_field<T: Real>(
    t: &TwoTensor<T>,
    graph: &BipartiteGraph,
    pf: &PFData<T>,
) -> Result<StringField<T>> {
    if t.n_edges() != graph.n_edges() {
        return Err(Error::ShapeMismatch("2-tensor does not live on the given graph".into()));
    }
    let coeffs: Vec<((usize, usize), Cx<T>)> = t
        .values
        .iter()
        .map(|(&(r2, r1), &v)| {
            ((r1, r2), v / Cx::new(vertical_ratio(graph, pf, r1), T::zero()))
        })
        .collect();
    StringField::new(graph, coeffs)
}

/// Tensor block matrices `M(xi, eta)[rho, sigma] = a(xi, rho, eta, sigma)`.
fn tensor_blocks<T: Real>(a: &FourTensor<T>) -> Vec<Vec<DMatrix<Cx<T>>>> {
    let cfg = a.config();
    let n0 = cfg.graph(GraphId::G0).n_edges();
    let n1 = cfg.graph(GraphId::G1).n_edges();
    let n2 = cfg.graph(GraphId::G2).n_edges();
    let n3 = cfg.graph(GraphId::G3).n_edges();
    let mut blocks = Vec::with_capacity(n0);
    for xi in 0..n0 {
        let mut row = Vec::with_capacity(n2);
        for eta in 0..n2 {
            let mut m = DMatrix::from_element(n1, n3, czero::<T>());
            for rho in 0..n1 {
                for sigma in 0..n3 {
                    m[(rho, sigma)] = a.value(&Cell::new(xi, rho, eta, sigma));
                }
            }
            row.push(m);
        }
        blocks.push(row);
    }
    blocks
}

/// Half zipper condition: `F M(xi, eta) = M(xi, eta) Ftilde` for all
/// horizontal legs. Returns the verdict and the max defect.
pub fn check_half_zipper<T: Real>(
    f: &TwoTensor<T>,
    f_tilde: &TwoTensor<T>,
    a: &FourTensor<T>,
    tol: T,
) -> Result<(bool, T)> {
    let cfg = a.config();
    if f.n_edges() != cfg.graph(GraphId::G1).n_edges()
        || f_tilde.n_edges() != cfg.graph(GraphId::G3).n_edges()
    {
        return Err(Error::ShapeMismatch(
            "2-tensors must live on the tensor's vertical graphs".into(),
        ));
    }
    let fm = f.to_matrix();
    let gm = f_tilde.to_matrix();
    let mut worst = T::zero();
    for row in tensor_blocks(a) {
        for m in row {
            let diff = &fm * &m - &m * &gm;
            for z in diff.iter() {
                worst = rmax(worst, cabs(*z));
            }
        }
    }
    Ok((worst < tol, worst))
}

/// Computes the unique half-zipper candidate by contracting the transported
/// left side against the conjugated tensor with the reciprocal square-root
/// weight; bi-unitarity collapses the contraction onto the right leg.
/// Returns the candidate and its half-zipper defect.
pub fn solve_half_zipper_candidate<T: Real>(
    f: &TwoTensor<T>,
    a: &FourTensor<T>,
    tol: T,
) -> Result<(TwoTensor<T>, T)> {
    let cfg = a.config();
    let g0 = cfg.graph(GraphId::G0);
    let g2 = cfg.graph(GraphId::G2);
    let g3 = cfg.graph(GraphId::G3);
    if f.n_edges() != cfg.graph(GraphId::G1).n_edges() {
        return Err(Error::ShapeMismatch(
            "2-tensor must live on the tensor's left vertical graph".into(),
        ));
    }
    let fm = f.to_matrix();
    let blocks = tensor_blocks(a);
    let n3 = g3.n_edges();
    let mut acc = DMatrix::from_element(n3, n3, czero::<T>());
    for xi in 0..g0.n_edges() {
        for eta in 0..g2.n_edges() {
            let m = &blocks[xi][eta];
            let w = T::one() / crate::connection::kappa(cfg, a.pf(), xi, eta);
            acc += (m.adjoint() * &fm * m) * Cx::new(w, T::zero());
        }
    }
    let mut values = Vec::new();
    for s in 0..n3 {
        let n_sources = (0..g0.n_edges()).filter(|&x| g0.dst(x) == g3.src(s)).count();
        if n_sources == 0 {
            continue;
        }
        let scale = T::one() / T::from_usize(n_sources).unwrap();
        for s2 in 0..n3 {
            if g3.edges()[s] == g3.edges()[s2] {
                values.push(((s, s2), acc[(s, s2)] * Cx::new(scale, T::zero())));
            }
        }
    }
    let candidate = TwoTensor::new(g3, values)?;
    let (_, defect) = check_half_zipper(f, &candidate, a, tol)?;
    Ok((candidate, defect))
}

/// Returns the transported 2-tensor when the half zipper condition holds
/// with the computed candidate, and nothing otherwise.
pub fn solve_half_zipper<T: Real>(
    f: &TwoTensor<T>,
    a: &FourTensor<T>,
    tol: T,
) -> Result<Option<TwoTensor<T>>> {
    let (candidate, defect) = solve_half_zipper_candidate(f, a, tol)?;
    Ok(if defect < tol { Some(candidate) } else { None })
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

/// Checks that the word of tensors is horizontally composable and closed.
fn require_closed_tensor_word<T: Real>(tensors: &[FourTensor<T>]) -> Result<()> {
    if tensors.is_empty() {
        return Err(Error::ShapeMismatch("empty tensor word".into()));
    }
    for k in 0..tensors.len() - 1 {
        let right = tensors[k].config().graph(GraphId::G3);
        let left = tensors[k + 1].config().graph(GraphId::G1);
        if !right.same_shape(left) {
            return Err(Error::GraphMismatch(format!(
                "tensor {} right leg set differs from tensor {} left leg set",
                k,
                k + 1
            )));
        }
    }
    let last = tensors.last().unwrap().config().graph(GraphId::G3);
    let first = tensors[0].config().graph(GraphId::G1);
    if !last.same_shape(first) {
        return Err(Error::OpenWord);
    }
    Ok(())
}

/// Zipper condition: `F` commutes with every boundary block of the closed
/// word, `F A(tops, bottoms) = A(tops, bottoms) F`.
pub fn check_zipper<T: Real>(
    f: &TwoTensor<T>,
    tensors: &[FourTensor<T>],
    tol: T,
) -> Result<(bool, T)> {
    require_closed_tensor_word(tensors)?;
    if f.n_edges() != tensors[0].config().graph(GraphId::G1).n_edges() {
        return Err(Error::ShapeMismatch(
            "2-tensor must live on the word's left vertical graph".into(),
        ));
    }
    let fm = f.to_matrix();
    let blocks: Vec<Vec<Vec<DMatrix<Cx<T>>>>> = tensors.iter().map(tensor_blocks).collect();
    let top_dims: Vec<usize> =
        tensors.iter().map(|t| t.config().graph(GraphId::G0).n_edges()).collect();
    let bottom_dims: Vec<usize> =
        tensors.iter().map(|t| t.config().graph(GraphId::G2).n_edges()).collect();
    let mut worst = T::zero();
    for t in combos(&top_dims) {
        for b in combos(&bottom_dims) {
            let mut a = blocks[0][t[0]][b[0]].clone();
            for k in 1..tensors.len() {
                a *= &blocks[k][t[k]][b[k]];
            }
            let diff = &fm * &a - &a * &fm;
            for z in diff.iter() {
                worst = rmax(worst, cabs(*z));
            }
        }
    }
    Ok((worst < tol, worst))
}

/// Joint evaluation of the four equivalent conditions for a field on a
/// closed word.
#[derive(Clone, Debug)]
pub struct TheoremReport<T: Real> {
    pub half_zipper: bool,
    pub zipper: bool,
    pub half_flat: bool,
    pub flat: bool,
    /// Defects in the order (half zipper, zipper, half flatness, flatness).
    pub defects: [T; 4],
    /// True iff the four verdicts coincide; a false value signals an
    /// implementation bug, not a property of the input.
    pub agree: bool,
    pub witness_field: Option<StringField<T>>,
    pub witness_tensor: Option<TwoTensor<T>>,
}

impl<T: Real> TheoremReport<T> {
    pub fn all_pass(&self) -> bool {
        self.half_zipper && self.zipper && self.half_flat && self.flat
    }

    pub fn verdicts(&self) -> [bool; 4] {
        [self.half_zipper, self.zipper, self.half_flat, self.flat]
    }

    pub fn worst_defect(&self) -> T {
        let mut w = T::zero();
        for d in self.defects {
            w = rmax(w, d);
        }
        w
    }
}

/// Evaluates all four conditions for `f` on a closed word:
/// the half zipper on the word's first tensor, the zipper on the full word,
/// half flatness through the first connection, and flatness of the word.
pub fn verify_theorem<T: Real>(
    f: &StringField<T>,
    word: &ConnectionWord<T>,
    tol: T,
) -> Result<TheoremReport<T>> {
    word.require_closed()?;
    let first = &word.letters()[0];
    let f_tensor = field_to_two_tensor(f, word.left_graph(), first.pf())?;
    let tensors: Vec<FourTensor<T>> = word.letters().iter().map(connection_to_tensor).collect();

    let (candidate, d1) = solve_half_zipper_candidate(&f_tensor, &tensors[0], tol)?;
    let half_zipper = d1 < tol;
    let (zipper, d2) = check_zipper(&f_tensor, &tensors, tol)?;
    let transport: TransportResult<T> = transport_field(f, first, tol)?;
    let half_flat = transport.field.is_some();
    let d3 = transport.defect;
    let (flat, d4) = check_flatness(f, word, tol)?;

    let verdicts = [half_zipper, zipper, half_flat, flat];
    let agree = verdicts.iter().all(|&v| v == verdicts[0]);
    Ok(TheoremReport {
        half_zipper,
        zipper,
        half_flat,
        flat,
        defects: [d1, d2, d3, d4],
        agree,
        witness_field: transport.field,
        witness_tensor: if half_zipper { Some(candidate) } else { None },
    })
}
