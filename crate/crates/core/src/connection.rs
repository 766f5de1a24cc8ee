//! Connections: complex values on cells, the unitarity and bi-unitarity
//! checks, renormalizations, gauge equivalence, product and direct sum,
//! intertwiner spaces, and fixture generators.
//!
//! A cell is a quadruple of edges, one per graph, whose corner vertices
//! match:
//!
//! ```text
//!   x0 --xi0--> x3
//!   |            |
//!  xi1          xi3
//!   |            |
//!   v            v
//!   x1 --xi2--> x2
//! ```
//!
//! Cells violating the corner conditions are never stored; evaluating a
//! connection on such a quadruple gives exactly zero.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graphs::{
    CheckStatus, FourGraphConfig, GraphId, Layer, PFData, ValidationReport, VertexId,
};
use crate::linalg::{self, identity_defect};
use crate::scalar::{cabs, cone, czero, rmax, Cx, Real};

/// Default tolerance for the blockwise checks.
pub const DEFAULT_CHECK_TOL: f64 = 1e-9;
/// Default tolerance for exact round-trip identities.
pub const ROUNDTRIP_TOL: f64 = 1e-12;

/// A quadruple of edge ids, one per graph, forming a cell when the corner
/// conditions hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub g0: usize,
    pub g1: usize,
    pub g2: usize,
    pub g3: usize,
}

impl Cell {
    pub fn new(g0: usize, g1: usize, g2: usize, g3: usize) -> Self {
        Cell { g0, g1, g2, g3 }
    }
}

/// A complex-valued map on the cells of a configuration.
#[derive(Clone, Debug)]
pub struct Connection<T: Real> {
    config: FourGraphConfig,
    pf: PFData<T>,
    values: BTreeMap<Cell, Cx<T>>,
}

impl<T: Real> Connection<T> {
    /// Builds a connection, rejecting any value placed on a quadruple that
    /// is not a cell. Zero values are dropped.
    pub fn new(
        config: FourGraphConfig,
        pf: PFData<T>,
        values: impl IntoIterator<Item = (Cell, Cx<T>)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (cell, v) in values {
            if !cell_valid(&config, &cell) {
                if v != czero::<T>() {
                    return Err(Error::Structural(format!(
                        "nonzero value on a non-matching cell {cell:?}"
                    )));
                }
                continue;
            }
            if v != czero::<T>() {
                map.insert(cell, v);
            }
        }
        Ok(Connection { config, pf, values: map })
    }

    pub fn config(&self) -> &FourGraphConfig {
        &self.config
    }

    pub fn pf(&self) -> &PFData<T> {
        &self.pf
    }

    /// Value on a quadruple; exactly zero off the stored matching cells.
    pub fn value(&self, cell: &Cell) -> Cx<T> {
        self.values.get(cell).copied().unwrap_or_else(czero::<T>)
    }

    pub fn values(&self) -> &BTreeMap<Cell, Cx<T>> {
        &self.values
    }

    /// All structurally valid cells of the configuration, in lexicographic
    /// order of `(g0, g1, g2, g3)` edge ids.
    pub fn valid_cells(&self) -> Vec<Cell> {
        valid_cells(&self.config)
    }

    /// The square-root weight `sqrt(mu(s(xi0)) mu(r(xi2)) / (mu(r(xi0)) mu(s(xi2))))`
    /// attached to a cell by the bar and prime renormalizations.
    pub fn kappa(&self, g0_edge: usize, g2_edge: usize) -> T {
        kappa(&self.config, &self.pf, g0_edge, g2_edge)
    }

    /// Max absolute difference of values against `other` over the union of
    /// stored cells. The two connections must live on equal configurations.
    pub fn max_value_diff(&self, other: &Connection<T>) -> T {
        let mut worst = T::zero();
        for (cell, v) in &self.values {
            worst = rmax(worst, cabs(*v - other.value(cell)));
        }
        for (cell, v) in &other.values {
            worst = rmax(worst, cabs(*v - self.value(cell)));
        }
        worst
    }
}

pub(crate) fn kappa<T: Real>(
    config: &FourGraphConfig,
    pf: &PFData<T>,
    g0_edge: usize,
    g2_edge: usize,
) -> T {
    let g0 = config.graph(GraphId::G0);
    let g2 = config.graph(GraphId::G2);
    let num = pf.mu(VertexId::new(Layer::V0, g0.src(g0_edge)))
        * pf.mu(VertexId::new(Layer::V2, g2.dst(g2_edge)));
    let den = pf.mu(VertexId::new(Layer::V3, g0.dst(g0_edge)))
        * pf.mu(VertexId::new(Layer::V1, g2.src(g2_edge)));
    (num / den).sqrt()
}

pub fn cell_valid(config: &FourGraphConfig, cell: &Cell) -> bool {
    let g0 = config.graph(GraphId::G0);
    let g1 = config.graph(GraphId::G1);
    let g2 = config.graph(GraphId::G2);
    let g3 = config.graph(GraphId::G3);
    cell.g0 < g0.n_edges()
        && cell.g1 < g1.n_edges()
        && cell.g2 < g2.n_edges()
        && cell.g3 < g3.n_edges()
        && g0.src(cell.g0) == g1.src(cell.g1)
        && g0.dst(cell.g0) == g3.src(cell.g3)
        && g1.dst(cell.g1) == g2.src(cell.g2)
        && g2.dst(cell.g2) == g3.dst(cell.g3)
}

pub fn valid_cells(config: &FourGraphConfig) -> Vec<Cell> {
    let g0 = config.graph(GraphId::G0);
    let g1 = config.graph(GraphId::G1);
    let g2 = config.graph(GraphId::G2);
    let g3 = config.graph(GraphId::G3);
    let mut cells = Vec::new();
    for a in 0..g0.n_edges() {
        for b in 0..g1.n_edges() {
            if g1.src(b) != g0.src(a) {
                continue;
            }
            for c in 0..g2.n_edges() {
                if g2.src(c) != g1.dst(b) {
                    continue;
                }
                for d in 0..g3.n_edges() {
                    if g3.src(d) == g0.dst(a) && g3.dst(d) == g2.dst(c) {
                        cells.push(Cell::new(a, b, c, d));
                    }
                }
            }
        }
    }
    cells
}

/// Blockwise unitarity: for each `(x0, x2)`, the matrix with rows indexed by
/// paths `(xi1, xi2)` and columns by paths `(xi0, xi3)` must be unitary.
///
/// Blocks where the two path counts differ are reported as failures in their
/// own right since no such matrix can be unitary.
pub fn check_unitarity<T: Real>(w: &Connection<T>, tol: T) -> ValidationReport {
    let config = w.config();
    let g0 = config.graph(GraphId::G0);
    let g1 = config.graph(GraphId::G1);
    let g2 = config.graph(GraphId::G2);
    let g3 = config.graph(GraphId::G3);
    let mut report = ValidationReport::default();
    let mut worst = T::zero();
    let mut worst_block = (0usize, 0usize);
    let mut mismatches = Vec::new();
    for x0 in 0..config.layer_len(Layer::V0) {
        for x2 in 0..config.layer_len(Layer::V2) {
            let mut rows = Vec::new();
            for b in 0..g1.n_edges() {
                if g1.src(b) != x0 {
                    continue;
                }
                for c in 0..g2.n_edges() {
                    if g2.src(c) == g1.dst(b) && g2.dst(c) == x2 {
                        rows.push((b, c));
                    }
                }
            }
            let mut cols = Vec::new();
            for a in 0..g0.n_edges() {
                if g0.src(a) != x0 {
                    continue;
                }
                for d in 0..g3.n_edges() {
                    if g3.src(d) == g0.dst(a) && g3.dst(d) == x2 {
                        cols.push((a, d));
                    }
                }
            }
            if rows.is_empty() && cols.is_empty() {
                continue;
            }
            if rows.len() != cols.len() {
                mismatches.push(format!("({x0},{x2}): {} rows vs {} cols", rows.len(), cols.len()));
            }
            let mut m = DMatrix::from_element(rows.len(), cols.len(), czero::<T>());
            for (i, &(b, c)) in rows.iter().enumerate() {
                for (j, &(a, d)) in cols.iter().enumerate() {
                    m[(i, j)] = w.value(&Cell::new(a, b, c, d));
                }
            }
            let d1 = identity_defect(&(m.adjoint() * &m));
            let d2 = identity_defect(&(&m * m.adjoint()));
            let d = rmax(d1, d2);
            if d > worst {
                worst = d;
                worst_block = (x0, x2);
            }
        }
    }
    let status = if worst < tol { CheckStatus::Pass } else { CheckStatus::Fail };
    report.push(
        "unitarity",
        status,
        Some(worst.to_f64_lossy()),
        format!("worst block (x0,x2)=({},{})", worst_block.0, worst_block.1),
    );
    if !mismatches.is_empty() {
        report.push(
            "unitarity.square_blocks",
            CheckStatus::Fail,
            None,
            format!("row/column count mismatch at {}", mismatches.join("; ")),
        );
    }
    report
}

/// The three renormalizations of a connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Renormalization {
    /// Reflect across the main diagonal; conjugate values with the
    /// square-root weight.
    Prime,
    /// Reflect top-bottom; conjugate values with the square-root weight.
    Bar,
    /// Rotate by 180 degrees; values unchanged.
    BarPrime,
}

/// The reflected configuration and permuted weights for a renormalization
/// mode. Edge ids are preserved by reflection.
pub(crate) fn reflected_config_pf<T: Real>(
    cfg: &FourGraphConfig,
    pf_in: &PFData<T>,
    mode: Renormalization,
) -> (FourGraphConfig, PFData<T>) {
    let names = |l: Layer| cfg.layer_names(l).to_vec();
    let edges = |g: GraphId| cfg.graph(g).edges().to_vec();
    let rev = |g: GraphId| cfg.graph(g).reversed().edges().to_vec();
    let mu = |l: Layer| pf_in.mu_layer(l).to_vec();

    let (layer_names, graph_edges, mu_perm): ([Vec<String>; 4], [Vec<(usize, usize)>; 4], [Vec<T>; 4]) =
        match mode {
            Renormalization::Prime => (
                [names(Layer::V3), names(Layer::V2), names(Layer::V1), names(Layer::V0)],
                [rev(GraphId::G0), edges(GraphId::G3), rev(GraphId::G2), edges(GraphId::G1)],
                [mu(Layer::V3), mu(Layer::V2), mu(Layer::V1), mu(Layer::V0)],
            ),
            Renormalization::Bar => (
                [names(Layer::V1), names(Layer::V0), names(Layer::V3), names(Layer::V2)],
                [edges(GraphId::G2), rev(GraphId::G1), edges(GraphId::G0), rev(GraphId::G3)],
                [mu(Layer::V1), mu(Layer::V0), mu(Layer::V3), mu(Layer::V2)],
            ),
            Renormalization::BarPrime => (
                [names(Layer::V2), names(Layer::V3), names(Layer::V0), names(Layer::V1)],
                [rev(GraphId::G2), rev(GraphId::G3), rev(GraphId::G0), rev(GraphId::G1)],
                [mu(Layer::V2), mu(Layer::V3), mu(Layer::V0), mu(Layer::V1)],
            ),
        };

    let config = FourGraphConfig::new(layer_names, graph_edges)
        .expect("reflected configuration is structurally valid");
    let pf = PFData::new(mu_perm, pf_in.beta0, pf_in.beta1, pf_in.tol);
    (config, pf)
}

/// Returns the renormalized connection on the appropriately reflected
/// configuration. Edge ids are preserved by reflection, so cells can be
/// relabelled back when comparing round trips.
pub fn renormalize<T: Real>(w: &Connection<T>, mode: Renormalization) -> Connection<T> {
    let (config, pf) = reflected_config_pf(w.config(), w.pf(), mode);

    let values: Vec<(Cell, Cx<T>)> = w
        .values()
        .iter()
        .map(|(cell, &v)| {
            let (new_cell, new_value) = match mode {
                Renormalization::Prime => (
                    Cell::new(cell.g0, cell.g3, cell.g2, cell.g1),
                    v.conj() * Cx::new(w.kappa(cell.g0, cell.g2), T::zero()),
                ),
                Renormalization::Bar => (
                    Cell::new(cell.g2, cell.g1, cell.g0, cell.g3),
                    v.conj() * Cx::new(w.kappa(cell.g0, cell.g2), T::zero()),
                ),
                Renormalization::BarPrime => {
                    (Cell::new(cell.g2, cell.g3, cell.g0, cell.g1), v)
                }
            };
            (new_cell, new_value)
        })
        .collect();

    Connection::new(config, pf, values).expect("renormalized cells remain matching")
}

/// Bi-unitarity: unitarity of the connection and of its prime
/// renormalization.
pub fn check_biunitarity<T: Real>(w: &Connection<T>, tol: T) -> ValidationReport {
    let mut report = ValidationReport::default();
    report.merge("w", check_unitarity(w, tol));
    report.merge("w_prime", check_unitarity(&renormalize(w, Renormalization::Prime), tol));
    report
}

/// A pair of block matrices acting on the vertical edge sets.
///
/// Entries are allowed only between parallel edges; for unitary gauge
/// equivalence each block must be unitary.
#[derive(Clone, Debug)]
pub struct GaugePair<T: Real> {
    pub u: DMatrix<Cx<T>>,
    pub v: DMatrix<Cx<T>>,
}

impl<T: Real> GaugePair<T> {
    pub fn identity(config: &FourGraphConfig) -> Self {
        let n1 = config.graph(GraphId::G1).n_edges();
        let n3 = config.graph(GraphId::G3).n_edges();
        GaugePair { u: DMatrix::identity(n1, n1), v: DMatrix::identity(n3, n3) }
    }

    /// Checks block support and unitarity of both matrices.
    pub fn validate(&self, config: &FourGraphConfig, tol: T) -> Result<()> {
        for (m, gid) in [(&self.u, GraphId::G1), (&self.v, GraphId::G3)] {
            let g = config.graph(gid);
            let n = g.n_edges();
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "gauge block on {gid} must be {n}x{n}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for e in 0..n {
                for e2 in 0..n {
                    let parallel = g.edges()[e] == g.edges()[e2];
                    if !parallel && m[(e, e2)] != czero::<T>() {
                        return Err(Error::ShapeMismatch(format!(
                            "gauge entry between non-parallel edges {e},{e2} of {gid}"
                        )));
                    }
                }
            }
            let defect = identity_defect(&(m.adjoint() * m));
            if defect >= tol {
                return Err(Error::NonUnitaryGauge(defect.to_f64_lossy()));
            }
        }
        Ok(())
    }

    /// Blockwise product of two gauge pairs.
    pub fn compose(&self, other: &GaugePair<T>) -> GaugePair<T> {
        GaugePair { u: &self.u * &other.u, v: &other.v * &self.v }
    }
}

/// Applies a gauge pair:
/// `W1(xi0,xi1,xi2,xi3) = sum U[xi1,xi1'] W(xi0,xi1',xi2,xi3') V[xi3',xi3]`.
pub fn gauge_transform<T: Real>(w: &Connection<T>, g: &GaugePair<T>) -> Result<Connection<T>> {
    g.validate(w.config(), T::lit(DEFAULT_CHECK_TOL))?;
    let g1 = w.config().graph(GraphId::G1);
    let g3 = w.config().graph(GraphId::G3);
    let mut out: BTreeMap<Cell, Cx<T>> = BTreeMap::new();
    for (cell, &v) in w.values() {
        for b in g1.parallel(cell.g1) {
            let ub = g.u[(b, cell.g1)];
            if ub == czero::<T>() {
                continue;
            }
            for d in g3.parallel(cell.g3) {
                let vd = g.v[(cell.g3, d)];
                if vd == czero::<T>() {
                    continue;
                }
                let entry = out.entry(Cell::new(cell.g0, b, cell.g2, d)).or_insert_with(czero::<T>);
                *entry += ub * v * vd;
            }
        }
    }
    Connection::new(w.config().clone(), w.pf().clone(), out)
}

/// Vertical composite graph: ordered pairs of composable edges from two
/// stacked graphs. The pair index is the edge id of the composite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositeGraph {
    pub pairs: Vec<(usize, usize)>,
}

impl CompositeGraph {
    fn build(top: &crate::graphs::BipartiteGraph, bottom: &crate::graphs::BipartiteGraph) -> Self {
        let mut pairs = Vec::new();
        for t in 0..top.n_edges() {
            for b in 0..bottom.n_edges() {
                if top.dst(t) == bottom.src(b) {
                    pairs.push((t, b));
                }
            }
        }
        CompositeGraph { pairs }
    }

    pub fn index_of(&self, pair: (usize, usize)) -> Option<usize> {
        self.pairs.iter().position(|&p| p == pair)
    }
}

/// The product connection of two vertically stacked connections.
pub struct ProductResult<T: Real> {
    pub connection: Connection<T>,
    pub left: CompositeGraph,
    pub right: CompositeGraph,
}

/// Stacks `w2` below `w1`: `w1`'s bottom graph must equal `w2`'s top graph
/// edge-for-edge, and the weights must agree on the shared layers. The
/// vertical graphs of the result are composite; its value is the sum over
/// the shared middle edge of the product of the factors.
pub fn product<T: Real>(w1: &Connection<T>, w2: &Connection<T>) -> Result<ProductResult<T>> {
    let tol = T::lit(DEFAULT_CHECK_TOL);
    let c1 = w1.config();
    let c2 = w2.config();
    if !c1.graph(GraphId::G2).same_shape(c2.graph(GraphId::G0))
        || c1.layer_len(Layer::V1) != c2.layer_len(Layer::V0)
        || c1.layer_len(Layer::V2) != c2.layer_len(Layer::V3)
    {
        return Err(Error::GraphMismatch(
            "bottom graph of the first factor must equal the top graph of the second".into(),
        ));
    }
    let mut mu_gap = T::zero();
    for (a, b) in w1.pf().mu_layer(Layer::V1).iter().zip(w2.pf().mu_layer(Layer::V0)) {
        mu_gap = rmax(mu_gap, (*a - *b).abs());
    }
    for (a, b) in w1.pf().mu_layer(Layer::V2).iter().zip(w2.pf().mu_layer(Layer::V3)) {
        mu_gap = rmax(mu_gap, (*a - *b).abs());
    }
    mu_gap = rmax(mu_gap, (w1.pf().beta0 - w2.pf().beta0).abs());
    if mu_gap >= tol {
        return Err(Error::MuMismatch(mu_gap.to_f64_lossy()));
    }

    let left = CompositeGraph::build(c1.graph(GraphId::G1), c2.graph(GraphId::G1));
    let right = CompositeGraph::build(c1.graph(GraphId::G3), c2.graph(GraphId::G3));
    let mut left_index = HashMap::new();
    for (i, &p) in left.pairs.iter().enumerate() {
        left_index.insert(p, i);
    }
    let mut right_index = HashMap::new();
    for (i, &p) in right.pairs.iter().enumerate() {
        right_index.insert(p, i);
    }

    let left_edges: Vec<(usize, usize)> = left
        .pairs
        .iter()
        .map(|&(t, b)| (c1.graph(GraphId::G1).src(t), c2.graph(GraphId::G1).dst(b)))
        .collect();
    let right_edges: Vec<(usize, usize)> = right
        .pairs
        .iter()
        .map(|&(t, b)| (c1.graph(GraphId::G3).src(t), c2.graph(GraphId::G3).dst(b)))
        .collect();

    let config = FourGraphConfig::new(
        [
            c1.layer_names(Layer::V0).to_vec(),
            c2.layer_names(Layer::V1).to_vec(),
            c2.layer_names(Layer::V2).to_vec(),
            c1.layer_names(Layer::V3).to_vec(),
        ],
        [
            c1.graph(GraphId::G0).edges().to_vec(),
            left_edges,
            c2.graph(GraphId::G2).edges().to_vec(),
            right_edges,
        ],
    )?;
    let pf = PFData::new(
        [
            w1.pf().mu_layer(Layer::V0).to_vec(),
            w2.pf().mu_layer(Layer::V1).to_vec(),
            w2.pf().mu_layer(Layer::V2).to_vec(),
            w1.pf().mu_layer(Layer::V3).to_vec(),
        ],
        w1.pf().beta0,
        w1.pf().beta1 * w2.pf().beta1,
        w1.pf().tol,
    );

    let mut out: BTreeMap<Cell, Cx<T>> = BTreeMap::new();
    for (cell1, &v1) in w1.values() {
        for (cell2, &v2) in w2.values() {
            if cell2.g0 != cell1.g2 {
                continue;
            }
            let b = left_index[&(cell1.g1, cell2.g1)];
            let d = right_index[&(cell1.g3, cell2.g3)];
            let entry = out.entry(Cell::new(cell1.g0, b, cell2.g2, d)).or_insert_with(czero::<T>);
            *entry += v1 * v2;
        }
    }

    Ok(ProductResult { connection: Connection::new(config, pf, out)?, left, right })
}

/// The direct sum of two connections sharing the horizontal graphs: the
/// vertical edge sets become disjoint unions, values live on the pure
/// blocks, and mixed cells are zero.
pub fn direct_sum<T: Real>(w1: &Connection<T>, w2: &Connection<T>) -> Result<Connection<T>> {
    let tol = T::lit(DEFAULT_CHECK_TOL);
    let c1 = w1.config();
    let c2 = w2.config();
    if !c1.graph(GraphId::G0).same_shape(c2.graph(GraphId::G0))
        || !c1.graph(GraphId::G2).same_shape(c2.graph(GraphId::G2))
    {
        return Err(Error::GraphMismatch("direct sum requires equal G0 and G2".into()));
    }
    for layer in Layer::ALL {
        if c1.layer_len(layer) != c2.layer_len(layer) {
            return Err(Error::GraphMismatch(format!("layer {layer} sizes differ")));
        }
    }
    let mut mu_gap = w1.pf().mu_distance(w2.pf());
    mu_gap = rmax(mu_gap, (w1.pf().beta0 - w2.pf().beta0).abs());
    if mu_gap >= tol {
        return Err(Error::MuMismatch(mu_gap.to_f64_lossy()));
    }

    let m1 = c1.graph(GraphId::G1).n_edges();
    let m3 = c1.graph(GraphId::G3).n_edges();
    let mut g1_edges = c1.graph(GraphId::G1).edges().to_vec();
    g1_edges.extend_from_slice(c2.graph(GraphId::G1).edges());
    let mut g3_edges = c1.graph(GraphId::G3).edges().to_vec();
    g3_edges.extend_from_slice(c2.graph(GraphId::G3).edges());

    let config = FourGraphConfig::new(
        [
            c1.layer_names(Layer::V0).to_vec(),
            c1.layer_names(Layer::V1).to_vec(),
            c1.layer_names(Layer::V2).to_vec(),
            c1.layer_names(Layer::V3).to_vec(),
        ],
        [
            c1.graph(GraphId::G0).edges().to_vec(),
            g1_edges,
            c1.graph(GraphId::G2).edges().to_vec(),
            g3_edges,
        ],
    )?;
    let pf = PFData::new(
        [
            w1.pf().mu_layer(Layer::V0).to_vec(),
            w1.pf().mu_layer(Layer::V1).to_vec(),
            w1.pf().mu_layer(Layer::V2).to_vec(),
            w1.pf().mu_layer(Layer::V3).to_vec(),
        ],
        w1.pf().beta0,
        w1.pf().beta1 + w2.pf().beta1,
        w1.pf().tol,
    );

    let mut out: BTreeMap<Cell, Cx<T>> = BTreeMap::new();
    for (cell, &v) in w1.values() {
        out.insert(*cell, v);
    }
    for (cell, &v) in w2.values() {
        out.insert(Cell::new(cell.g0, cell.g1 + m1, cell.g2, cell.g3 + m3), v);
    }
    Connection::new(config, pf, out)
}

/// Basis of the space of pairs `(u, v)` with block support such that
/// `u . W2 = W1 . v`, i.e.
/// `sum u[xi1,xi1'] W2(xi0,xi1',xi2,xi3) = sum W1(xi0,xi1,xi2,xi3') v[xi3',xi3]`.
///
/// Computed as the numerical nullspace of the assembled dense system;
/// singular values below `tol` times the largest are treated as zero.
pub fn intertwiner_space<T: Real>(
    w1: &Connection<T>,
    w2: &Connection<T>,
    tol: T,
) -> Result<Vec<GaugePair<T>>> {
    if w1.config() != w2.config() {
        return Err(Error::GraphMismatch(
            "intertwiner space requires identical configurations".into(),
        ));
    }
    let config = w1.config();
    let g1 = config.graph(GraphId::G1);
    let g3 = config.graph(GraphId::G3);

    // Unknowns: block-supported entries of u then of v.
    let mut u_slots = Vec::new();
    for e in 0..g1.n_edges() {
        for e2 in 0..g1.n_edges() {
            if g1.edges()[e] == g1.edges()[e2] {
                u_slots.push((e, e2));
            }
        }
    }
    let mut v_slots = Vec::new();
    for e in 0..g3.n_edges() {
        for e2 in 0..g3.n_edges() {
            if g3.edges()[e] == g3.edges()[e2] {
                v_slots.push((e, e2));
            }
        }
    }
    let n_unknowns = u_slots.len() + v_slots.len();
    if n_unknowns > linalg::SYSTEM_CAP {
        return Err(Error::SystemTooLarge { size: n_unknowns, cap: linalg::SYSTEM_CAP });
    }
    let mut u_pos = HashMap::new();
    for (i, &s) in u_slots.iter().enumerate() {
        u_pos.insert(s, i);
    }
    let mut v_pos = HashMap::new();
    for (i, &s) in v_slots.iter().enumerate() {
        v_pos.insert(s, i);
    }

    let cells = valid_cells(config);
    let mut a = DMatrix::from_element(cells.len(), n_unknowns, czero::<T>());
    for (row, cell) in cells.iter().enumerate() {
        for b2 in g1.parallel(cell.g1) {
            let col = u_pos[&(cell.g1, b2)];
            a[(row, col)] += w2.value(&Cell::new(cell.g0, b2, cell.g2, cell.g3));
        }
        for d2 in g3.parallel(cell.g3) {
            let col = u_slots.len() + v_pos[&(d2, cell.g3)];
            a[(row, col)] -= w1.value(&Cell::new(cell.g0, cell.g1, cell.g2, d2));
        }
    }

    let basis = linalg::nullspace(&a, tol);
    let n1 = g1.n_edges();
    let n3 = g3.n_edges();
    Ok(basis
        .into_iter()
        .map(|vec| {
            let mut u = DMatrix::from_element(n1, n1, czero::<T>());
            let mut v = DMatrix::from_element(n3, n3, czero::<T>());
            for (i, &(e, e2)) in u_slots.iter().enumerate() {
                u[(e, e2)] = vec[i];
            }
            for (i, &(e, e2)) in v_slots.iter().enumerate() {
                v[(e, e2)] = vec[u_slots.len() + i];
            }
            GaugePair { u, v }
        })
        .collect())
}

/// A connection is irreducible when its self-intertwiner space is spanned by
/// the identity pair alone.
pub fn is_irreducible<T: Real>(w: &Connection<T>, tol: T) -> Result<bool> {
    Ok(intertwiner_space(w, w, tol)?.len() == 1)
}

/// The discrete Fourier matrix `h[j,k] = exp(2 pi i j k / n) / sqrt(n)`, the
/// classical family of complex Hadamard matrices.
pub fn fourier_matrix<T: Real>(n: usize) -> DMatrix<Cx<T>> {
    let nt = T::from_usize(n).expect("n fits the scalar");
    let inv_sqrt = T::one() / nt.sqrt();
    DMatrix::from_fn(n, n, |j, k| {
        let angle = T::two_pi() * T::from_usize(j * k).unwrap() / nt;
        Cx::new(angle.cos() * inv_sqrt, angle.sin() * inv_sqrt)
    })
}

/// Connection on the spin-model configuration with `W(cell) = h[xi1, xi3]`.
///
/// With the spin weights this passes the bi-unitarity check exactly when `h`
/// is unitary with all entries of modulus `1/sqrt(n)`.
pub fn hadamard_connection<T: Real>(h: &DMatrix<Cx<T>>) -> Result<Connection<T>> {
    let n = h.nrows();
    if n < 2 || h.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "hadamard connection needs a square matrix of size >= 2, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let config = crate::graphs::builtin_example(&crate::graphs::ExampleId::Spin(n))?;
    let pf = crate::graphs::compute_pf(&config, crate::graphs::default_pf_tol::<T>())?;
    let mut values = Vec::new();
    for i in 0..n {
        for j in 0..n {
            values.push((Cell::new(j, i, i, j), h[(i, j)]));
        }
    }
    Connection::new(config, pf, values)
}

/// The one-cell connection with value one on the single-edge configuration.
/// Acts as the unit for the product up to relabelling.
pub fn trivial_connection<T: Real>() -> Connection<T> {
    let names = |s: &str| vec![s.to_string()];
    let config = FourGraphConfig::new(
        [names("p"), names("q"), names("r"), names("s")],
        [vec![(0, 0)], vec![(0, 0)], vec![(0, 0)], vec![(0, 0)]],
    )
    .expect("trivial configuration");
    let mu = [vec![T::one()], vec![T::one()], vec![T::one()], vec![T::one()]];
    let pf = PFData::new(mu, T::one(), T::one(), crate::graphs::default_pf_tol::<T>());
    Connection::new(config, pf, [(Cell::new(0, 0, 0, 0), cone::<T>())]).expect("trivial connection")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{builtin_example, compute_pf, ExampleId};
    use crate::rng::{random_gauge, rng_from_seed};
    use approx::assert_relative_eq;

    fn fourier_conn(n: usize) -> Connection<f64> {
        hadamard_connection(&fourier_matrix::<f64>(n)).unwrap()
    }

    /// Connection on the parallel-edge configuration with constant weights:
    /// `W(cell with xi1 = i, xi3 = j) = h[i, j]`.
    fn parallel_edge_conn(h: &DMatrix<Cx<f64>>) -> Connection<f64> {
        let n = h.nrows();
        let config = builtin_example(&ExampleId::Hadamard(n)).unwrap();
        let pf = compute_pf(&config, 1e-10).unwrap();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                values.push((Cell::new(0, i, 0, j), h[(i, j)]));
            }
        }
        Connection::new(config, pf, values).unwrap()
    }

    #[test]
    fn fourier_unitarity_matches_direct_matrix_oracle() {
        let n = 3;
        let w = fourier_conn(n);
        // The single (x0, x2) block with rows (xi1, xi2) and columns
        // (xi0, xi3) is exactly the Fourier matrix; multiply it out by hand.
        let h = fourier_matrix::<f64>(n);
        let mut prod = vec![vec![Cx::new(0.0, 0.0); n]; n];
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    prod[j][k] += h[(i, j)].conj() * h[(i, k)];
                }
            }
        }
        for j in 0..n {
            for k in 0..n {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!(cabs(prod[j][k] - Cx::new(expect, 0.0)) < 1e-12);
            }
        }
        let report = check_unitarity(&w, 1e-10);
        assert!(report.passed());
        assert!(report.worst_defect() < 1e-12);
    }

    #[test]
    fn doubled_value_breaks_unitarity() {
        let w = fourier_conn(3);
        let mut values: Vec<(Cell, Cx<f64>)> =
            w.values().iter().map(|(c, v)| (*c, *v)).collect();
        values[0].1 *= 2.0;
        let w2 = Connection::new(w.config().clone(), w.pf().clone(), values).unwrap();
        assert!(!check_unitarity(&w2, 1e-9).passed());
    }

    #[test]
    fn all_ones_on_parallel_config_fails() {
        let h = DMatrix::from_element(2, 2, Cx::new(1.0, 0.0));
        let w = parallel_edge_conn(&h);
        assert!(!check_unitarity(&w, 1e-9).passed());
    }

    #[test]
    fn biunitarity_of_fourier_fixtures() {
        for n in 2..=5 {
            let w = fourier_conn(n);
            let report = check_biunitarity(&w, 1e-10);
            assert!(report.passed(), "fourier({n}):\n{report}");
            assert!(report.worst_defect() < 1e-10);
        }
    }

    #[test]
    fn identity_matrix_fails_prime_check() {
        let w = hadamard_connection(&DMatrix::<Cx<f64>>::identity(2, 2)).unwrap();
        assert!(check_unitarity(&w, 1e-9).passed());
        let prime = renormalize(&w, Renormalization::Prime);
        let report = check_unitarity(&prime, 1e-9);
        assert!(!report.passed());
        assert!(report.worst_defect() >= 0.1);
    }

    #[test]
    fn constant_weights_make_prime_an_entrywise_conjugate() {
        let h = fourier_matrix::<f64>(3);
        let w = parallel_edge_conn(&h);
        let prime = renormalize(&w, Renormalization::Prime);
        for (cell, &v) in w.values() {
            let image = prime.value(&Cell::new(cell.g0, cell.g3, cell.g2, cell.g1));
            assert!(cabs(image - v.conj()) < 1e-15);
        }
    }

    #[test]
    fn prime_factor_on_a_single_cell() {
        // mu(s(xi0)) = 1, mu(r(xi0)) = 4, mu(s(xi2)) = 2, mu(r(xi2)) = 3.
        let names = |s: &str| vec![s.to_string()];
        let config = FourGraphConfig::new(
            [names("a"), names("b"), names("c"), names("d")],
            [vec![(0, 0)], vec![(0, 0)], vec![(0, 0)], vec![(0, 0)]],
        )
        .unwrap();
        let pf = PFData::new(
            [vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            1.0,
            1.0,
            1e-10,
        );
        let w =
            Connection::new(config, pf, [(Cell::new(0, 0, 0, 0), Cx::new(1.0, 0.0))]).unwrap();
        let prime = renormalize(&w, Renormalization::Prime);
        let got = prime.value(&Cell::new(0, 0, 0, 0));
        assert_relative_eq!(got.re, (3.0f64 / 8.0).sqrt(), epsilon = 1e-15);
        assert_eq!(got.im, 0.0);
    }

    #[test]
    fn renormalization_involutions() {
        let w = fourier_conn(3);

        // prime twice and bar twice return the connection.
        for mode in [Renormalization::Prime, Renormalization::Bar] {
            let back = renormalize(&renormalize(&w, mode), mode);
            assert_eq!(back.config(), w.config());
            assert!(back.max_value_diff(&w) < 1e-12);
        }

        // bar then prime equals bar-prime, which is the 180-degree
        // relabelling with values untouched.
        let bp = renormalize(&w, Renormalization::BarPrime);
        let bar_then_prime = renormalize(&renormalize(&w, Renormalization::Bar), Renormalization::Prime);
        assert_eq!(bp.config(), bar_then_prime.config());
        assert!(bp.max_value_diff(&bar_then_prime) < 1e-12);
        for (cell, &v) in w.values() {
            let rotated = Cell::new(cell.g2, cell.g3, cell.g0, cell.g1);
            assert!(cabs(bp.value(&rotated) - v) < 1e-15);
        }
    }

    #[test]
    fn gauge_identity_is_a_no_op() {
        let w = fourier_conn(3);
        let g = GaugePair::identity(w.config());
        let w2 = gauge_transform(&w, &g).unwrap();
        assert!(w2.max_value_diff(&w) < 1e-15);
    }

    #[test]
    fn gauge_preserves_biunitarity_and_composes() {
        let w = fourier_conn(3);
        let mut rng = rng_from_seed(11);
        let g1 = random_gauge(&mut rng, w.config());
        let g2 = random_gauge(&mut rng, w.config());
        let w1 = gauge_transform(&w, &g1).unwrap();
        assert!(check_biunitarity(&w1, 1e-9).passed());
        let w12 = gauge_transform(&w1, &g2).unwrap();
        let composed = gauge_transform(&w, &g2.compose(&g1)).unwrap();
        assert!(w12.max_value_diff(&composed) < 1e-12);
    }

    #[test]
    fn gauge_invariance_of_biunitarity_verdict() {
        let mut rng = rng_from_seed(5);
        let good = fourier_conn(2);
        let bad = hadamard_connection(&DMatrix::<Cx<f64>>::identity(2, 2)).unwrap();
        for _ in 0..50 {
            let g = random_gauge(&mut rng, good.config());
            let tg = gauge_transform(&good, &g).unwrap();
            assert!(check_biunitarity(&tg, 1e-9).passed());
            let g2 = random_gauge(&mut rng, bad.config());
            let tb = gauge_transform(&bad, &g2).unwrap();
            assert!(!check_biunitarity(&tb, 1e-9).passed());
        }
    }

    #[test]
    fn product_with_trivial_connection_relabels() {
        let h = fourier_matrix::<f64>(2);
        let w = parallel_edge_conn(&h);
        let t = trivial_connection::<f64>();
        let prod = product(&w, &t).unwrap();
        assert_eq!(prod.left.pairs.len(), 2);
        for (cell, &v) in w.values() {
            let got = prod.connection.value(&Cell::new(cell.g0, cell.g1, 0, cell.g3));
            assert!(cabs(got - v) < 1e-15);
        }
    }

    #[test]
    fn product_matches_brute_force_contraction() {
        let w1 = fourier_conn(2);
        let w2 = renormalize(&w1, Renormalization::Prime);
        let prod = product(&w1, &w2).unwrap();
        // Dense oracle: sum over the shared middle edge for every composite
        // cell, straight from the definition.
        let n_mid = w1.config().graph(GraphId::G2).n_edges();
        for (bi, &(b, b5)) in prod.left.pairs.iter().enumerate() {
            for (di, &(d, d7)) in prod.right.pairs.iter().enumerate() {
                for a in 0..w1.config().graph(GraphId::G0).n_edges() {
                    for c in 0..w2.config().graph(GraphId::G2).n_edges() {
                        let mut acc = Cx::new(0.0, 0.0);
                        for e in 0..n_mid {
                            acc += w1.value(&Cell::new(a, b, e, d))
                                * w2.value(&Cell::new(e, b5, c, d7));
                        }
                        let got = prod.connection.value(&Cell::new(a, bi, c, di));
                        assert!(cabs(got - acc) < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn product_of_biunitary_is_biunitary() {
        let w1 = fourier_conn(3);
        let w2 = renormalize(&w1, Renormalization::Prime);
        let prod = product(&w1, &w2).unwrap();
        let report = check_biunitarity(&prod.connection, 1e-9);
        assert!(report.passed(), "{report}");
        // Vertical eigenvalue of the product config is the product of the
        // factors' vertical eigenvalues.
        let (worst, eq) =
            crate::graphs::worst_balance_residual(prod.connection.config(), prod.connection.pf());
        assert!(worst < 1e-9, "residual {worst} in {eq}");
        assert_relative_eq!(
            prod.connection.pf().beta1,
            w1.pf().beta1 * w2.pf().beta1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn direct_sum_blocks_and_zeros() {
        let w = fourier_conn(2);
        let sum = direct_sum(&w, &w).unwrap();
        let m1 = w.config().graph(GraphId::G1).n_edges();
        let m3 = w.config().graph(GraphId::G3).n_edges();
        for (cell, &v) in w.values() {
            assert_eq!(sum.value(cell), v);
            assert_eq!(
                sum.value(&Cell::new(cell.g0, cell.g1 + m1, cell.g2, cell.g3 + m3)),
                v
            );
            // Mixed cells carry zero.
            assert_eq!(
                sum.value(&Cell::new(cell.g0, cell.g1 + m1, cell.g2, cell.g3)),
                Cx::new(0.0, 0.0)
            );
            assert_eq!(
                sum.value(&Cell::new(cell.g0, cell.g1, cell.g2, cell.g3 + m3)),
                Cx::new(0.0, 0.0)
            );
        }
        let report = check_biunitarity(&sum, 1e-9);
        assert!(report.passed(), "{report}");
        let (worst, _) = crate::graphs::worst_balance_residual(sum.config(), sum.pf());
        assert!(worst < 1e-9);
    }

    #[test]
    fn self_intertwiners_contain_identity_and_detect_irreducibility() {
        let w = fourier_conn(2);
        let basis = intertwiner_space(&w, &w, 1e-9).unwrap();
        assert_eq!(basis.len(), 1);
        assert!(is_irreducible(&w, 1e-9).unwrap());
        // The one basis element is proportional to the identity pair.
        let g = &basis[0];
        let ratio = g.u[(0, 0)];
        assert!(cabs(g.u[(1, 1)] - ratio) < 1e-10);
        assert!(cabs(g.v[(0, 0)] - ratio) < 1e-10);

        let sum = direct_sum(&w, &w).unwrap();
        let basis = intertwiner_space(&sum, &sum, 1e-9).unwrap();
        assert_eq!(basis.len(), 4);
        assert!(!is_irreducible(&sum, 1e-9).unwrap());
    }

    #[test]
    fn intertwiner_basis_closed_under_product_and_adjoint() {
        let w = fourier_conn(2);
        let sum = direct_sum(&w, &w).unwrap();
        let basis = intertwiner_space(&sum, &sum, 1e-9).unwrap();
        let residual = |u: &DMatrix<Cx<f64>>, v: &DMatrix<Cx<f64>>| -> f64 {
            let mut worst: f64 = 0.0;
            for cell in sum.valid_cells() {
                let g1 = sum.config().graph(GraphId::G1);
                let g3 = sum.config().graph(GraphId::G3);
                let mut lhs = Cx::new(0.0, 0.0);
                for b2 in g1.parallel(cell.g1) {
                    lhs += u[(cell.g1, b2)] * sum.value(&Cell::new(cell.g0, b2, cell.g2, cell.g3));
                }
                let mut rhs = Cx::new(0.0, 0.0);
                for d2 in g3.parallel(cell.g3) {
                    rhs += sum.value(&Cell::new(cell.g0, cell.g1, cell.g2, d2)) * v[(d2, cell.g3)];
                }
                worst = worst.max(cabs(lhs - rhs));
            }
            worst
        };
        for a in &basis {
            for b in &basis {
                let u = &a.u * &b.u;
                let v = &a.v * &b.v;
                assert!(residual(&u, &v) < 1e-8);
            }
            assert!(residual(&a.u.adjoint(), &a.v.adjoint()) < 1e-8);
        }
    }

    #[test]
    fn irreducibility_is_gauge_invariant() {
        let mut rng = rng_from_seed(23);
        let w = fourier_conn(2);
        let sum = direct_sum(&w, &w).unwrap();
        for _ in 0..5 {
            let g = random_gauge(&mut rng, w.config());
            assert!(is_irreducible(&gauge_transform(&w, &g).unwrap(), 1e-9).unwrap());
            let gs = random_gauge(&mut rng, sum.config());
            assert!(!is_irreducible(&gauge_transform(&sum, &gs).unwrap(), 1e-9).unwrap());
        }
    }

    #[test]
    fn fourier_two_values() {
        let h = fourier_matrix::<f64>(2);
        let r = 0.5f64.sqrt();
        for j in 0..2 {
            for k in 0..2 {
                let expect = if j == 1 && k == 1 { -r } else { r };
                assert!(cabs(h[(j, k)] - Cx::new(expect, 0.0)) < 1e-15);
            }
        }
    }

    proptest::proptest! {
        // Zero-extension: any quadruple that is not a matching cell
        // evaluates to exactly zero, and matching quadruples reproduce the
        // generating matrix entry.
        #[test]
        fn prop_zero_extension(a in 0usize..3, b in 0usize..3, c in 0usize..3, d in 0usize..3) {
            let h = fourier_matrix::<f64>(3);
            let w = hadamard_connection(&h).unwrap();
            let cell = Cell::new(a, b, c, d);
            let v = w.value(&cell);
            if b == c && a == d {
                proptest::prop_assert!(cabs(v - h[(b, a)]) < 1e-15);
            } else {
                proptest::prop_assert_eq!(v, Cx::new(0.0, 0.0));
            }
        }

        // Diagonal phase gauges preserve the bi-unitarity verdict and only
        // rotate the stored values.
        #[test]
        fn prop_phase_gauge(phases in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 4)) {
            let w = fourier_conn(2);
            let u = DMatrix::from_fn(2, 2, |i, j| {
                if i == j { Cx::new(phases[i].cos(), phases[i].sin()) } else { Cx::new(0.0, 0.0) }
            });
            let v = DMatrix::from_fn(2, 2, |i, j| {
                if i == j { Cx::new(phases[i + 2].cos(), phases[i + 2].sin()) } else { Cx::new(0.0, 0.0) }
            });
            let wg = gauge_transform(&w, &GaugePair { u, v }).unwrap();
            proptest::prop_assert!(check_biunitarity(&wg, 1e-9).passed());
            for (cell, &val) in w.values() {
                proptest::prop_assert!((cabs(wg.value(cell)) - cabs(val)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unitarity_reports_non_square_blocks() {
        // Spin-like configuration but with a single G3 edge: the (x0, x2)
        // block has two row paths and one column path.
        let cfg = FourGraphConfig::new(
            [
                vec!["p".into()],
                vec!["m0".into(), "m1".into()],
                vec!["r".into()],
                vec!["w0".into(), "w1".into()],
            ],
            [
                vec![(0, 0), (0, 1)],
                vec![(0, 0), (0, 1)],
                vec![(0, 0), (1, 0)],
                vec![(0, 0)],
            ],
        )
        .unwrap();
        let pf = PFData::new(
            [vec![1.0], vec![1.0, 1.0], vec![1.0], vec![1.0, 1.0]],
            1.0,
            1.0,
            1e-10,
        );
        let w = Connection::new(cfg, pf, [(Cell::new(0, 0, 0, 0), Cx::new(1.0, 0.0))]).unwrap();
        let report = check_unitarity(&w, 1e-9);
        assert!(!report.passed());
        assert!(report
            .entries
            .iter()
            .any(|e| e.name == "unitarity.square_blocks" && e.status == CheckStatus::Fail));
    }

    #[test]
    fn product_rejects_mismatched_factors() {
        let w2 = fourier_conn(2);
        let w3 = fourier_conn(3);
        assert!(matches!(product(&w2, &w3), Err(Error::GraphMismatch(_))));
        assert!(matches!(direct_sum(&w2, &w3), Err(Error::GraphMismatch(_))));
    }

    #[test]
    fn hadamard_connection_rejects_bad_shapes() {
        let err = hadamard_connection(&DMatrix::<Cx<f64>>::identity(1, 1)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
        let rect = DMatrix::<Cx<f64>>::from_element(2, 3, Cx::new(1.0, 0.0));
        assert!(hadamard_connection(&rect).is_err());
    }

    #[test]
    fn zero_extension_off_matching_cells() {
        let w = fourier_conn(2);
        // (g0, g1, g2, g3) = (0, 0, 1, 0) breaks r(xi1) = s(xi2).
        assert_eq!(w.value(&Cell::new(0, 0, 1, 0)), Cx::new(0.0, 0.0));
        // Nonzero value on the same quadruple is rejected at construction.
        let err = Connection::new(
            w.config().clone(),
            w.pf().clone(),
            [(Cell::new(0, 0, 1, 0), Cx::new(1.0, 0.0))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }
}
