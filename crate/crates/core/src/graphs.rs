//! Four-graph configurations and their Perron-Frobenius weights.
//!
//! A configuration consists of four finite bipartite oriented multigraphs
//! sharing four vertex layers:
//!
//! ```text
//!   V0 --G0--> V3
//!   |           |
//!   G1          G3
//!   |           |
//!   v           v
//!   V1 --G2--> V2
//! ```
//!
//! `G0` and `G2` are required to be connected. A positive weight `mu` per
//! vertex and two eigenvalues `beta0` (horizontal) and `beta1` (vertical)
//! satisfy the eight balance equations, two per graph:
//! `sum_x delta(x, y) mu(x) = beta mu(y)` and the transposed family.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{rmax, Real};

/// Vertex layer of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    V0,
    V1,
    V2,
    V3,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::V0, Layer::V1, Layer::V2, Layer::V3];

    pub fn index(self) -> usize {
        match self {
            Layer::V0 => 0,
            Layer::V1 => 1,
            Layer::V2 => 2,
            Layer::V3 => 3,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.index())
    }
}

/// One of the four graphs of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GraphId {
    G0,
    G1,
    G2,
    G3,
}

impl GraphId {
    pub const ALL: [GraphId; 4] = [GraphId::G0, GraphId::G1, GraphId::G2, GraphId::G3];

    pub fn index(self) -> usize {
        match self {
            GraphId::G0 => 0,
            GraphId::G1 => 1,
            GraphId::G2 => 2,
            GraphId::G3 => 3,
        }
    }

    /// Declared (source, range) layers of this graph.
    pub fn layers(self) -> (Layer, Layer) {
        match self {
            GraphId::G0 => (Layer::V0, Layer::V3),
            GraphId::G1 => (Layer::V0, Layer::V1),
            GraphId::G2 => (Layer::V1, Layer::V2),
            GraphId::G3 => (Layer::V3, Layer::V2),
        }
    }
}

impl fmt::Display for GraphId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.index())
    }
}

/// Vertex of a configuration: a layer plus an index within the layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId {
    pub layer: Layer,
    pub index: usize,
}

impl VertexId {
    pub fn new(layer: Layer, index: usize) -> Self {
        VertexId { layer, index }
    }
}

/// Reference to an edge of one of the four graphs, possibly reversed.
///
/// A reversed reference swaps source and range; it models a tilde edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeRef {
    pub graph: GraphId,
    pub id: usize,
    pub reversed: bool,
}

impl EdgeRef {
    pub fn new(graph: GraphId, id: usize) -> Self {
        EdgeRef { graph, id, reversed: false }
    }

    pub fn reversed(graph: GraphId, id: usize) -> Self {
        EdgeRef { graph, id, reversed: true }
    }
}

/// A finite bipartite oriented multigraph between two layers.
///
/// Edges are stored as `(src, dst)` index pairs; the edge id is the position
/// in the list, contiguous from 0. Loops cannot occur because the two layers
/// are distinct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    source: Layer,
    range: Layer,
    edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(source: Layer, range: Layer, edges: Vec<(usize, usize)>) -> Self {
        BipartiteGraph { source, range, edges }
    }

    pub fn source_layer(&self) -> Layer {
        self.source
    }

    pub fn range_layer(&self) -> Layer {
        self.range
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn src(&self, edge: usize) -> usize {
        self.edges[edge].0
    }

    pub fn dst(&self, edge: usize) -> usize {
        self.edges[edge].1
    }

    /// Edge ids parallel to `edge`: same source and same range.
    pub fn parallel(&self, edge: usize) -> impl Iterator<Item = usize> + '_ {
        let (s, d) = self.edges[edge];
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, &(s2, d2))| s2 == s && d2 == d)
            .map(|(i, _)| i)
    }

    /// All unordered parallel classes as ordered pairs `(e1, e2)` of edges
    /// with identical endpoints, including `e1 == e2`.
    pub fn parallel_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for e1 in 0..self.edges.len() {
            for e2 in 0..self.edges.len() {
                if self.edges[e1] == self.edges[e2] {
                    out.push((e1, e2));
                }
            }
        }
        out
    }

    /// Reversed copy: source and range layers swapped, every edge flipped,
    /// edge ids preserved.
    pub fn reversed(&self) -> BipartiteGraph {
        BipartiteGraph {
            source: self.range,
            range: self.source,
            edges: self.edges.iter().map(|&(s, d)| (d, s)).collect(),
        }
    }

    /// Structural equality ignoring the layer tags: same edge list by id.
    pub fn same_shape(&self, other: &BipartiteGraph) -> bool {
        self.edges == other.edges
    }

    /// Multiplicity matrix as a dense `sources x ranges` matrix.
    pub fn multiplicity<T: Real>(&self, n_src: usize, n_dst: usize) -> DMatrix<T> {
        let mut m = DMatrix::zeros(n_src, n_dst);
        for &(s, d) in &self.edges {
            m[(s, d)] += T::one();
        }
        m
    }

    fn connected(&self, n_src: usize, n_dst: usize) -> bool {
        if n_src + n_dst == 0 {
            return false;
        }
        // BFS over the union of both layers.
        let total = n_src + n_dst;
        let mut adj = vec![Vec::new(); total];
        for &(s, d) in &self.edges {
            adj[s].push(n_src + d);
            adj[n_src + d].push(s);
        }
        let mut seen = vec![false; total];
        let mut queue = VecDeque::new();
        seen[0] = true;
        queue.push_back(0usize);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == total
    }
}

/// The four bipartite graphs of a configuration together with the vertex
/// layers and their display names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourGraphConfig {
    layer_names: [Vec<String>; 4],
    graphs: [BipartiteGraph; 4],
}

impl FourGraphConfig {
    /// Builds a configuration from layer names and edge lists, checking that
    /// every edge endpoint resolves within its declared layer.
    pub fn new(
        layer_names: [Vec<String>; 4],
        edges: [Vec<(usize, usize)>; 4],
    ) -> Result<Self> {
        let [e0, e1, e2, e3] = edges;
        let graphs = [
            BipartiteGraph::new(Layer::V0, Layer::V3, e0),
            BipartiteGraph::new(Layer::V0, Layer::V1, e1),
            BipartiteGraph::new(Layer::V1, Layer::V2, e2),
            BipartiteGraph::new(Layer::V3, Layer::V2, e3),
        ];
        let cfg = FourGraphConfig { layer_names, graphs };
        for gid in GraphId::ALL {
            let g = cfg.graph(gid);
            let (sl, rl) = gid.layers();
            for (e, &(s, d)) in g.edges().iter().enumerate() {
                if s >= cfg.layer_len(sl) {
                    return Err(Error::Structural(format!(
                        "{gid} edge {e}: source index {s} out of range for {sl}"
                    )));
                }
                if d >= cfg.layer_len(rl) {
                    return Err(Error::Structural(format!(
                        "{gid} edge {e}: range index {d} out of range for {rl}"
                    )));
                }
            }
        }
        Ok(cfg)
    }

    pub fn layer_len(&self, layer: Layer) -> usize {
        self.layer_names[layer.index()].len()
    }

    pub fn layer_names(&self, layer: Layer) -> &[String] {
        &self.layer_names[layer.index()]
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.layer_names[v.layer.index()][v.index]
    }

    pub fn graph(&self, id: GraphId) -> &BipartiteGraph {
        &self.graphs[id.index()]
    }

    /// Source vertex of an edge reference, honouring reversal.
    pub fn source(&self, e: EdgeRef) -> VertexId {
        let g = self.graph(e.graph);
        if e.reversed {
            VertexId::new(g.range_layer(), g.dst(e.id))
        } else {
            VertexId::new(g.source_layer(), g.src(e.id))
        }
    }

    /// Range vertex of an edge reference, honouring reversal.
    pub fn range(&self, e: EdgeRef) -> VertexId {
        let g = self.graph(e.graph);
        if e.reversed {
            VertexId::new(g.source_layer(), g.src(e.id))
        } else {
            VertexId::new(g.range_layer(), g.dst(e.id))
        }
    }
}

/// Outcome of one validation check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

/// One line of a validation report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: CheckStatus,
    /// Worst defect observed by the check, when numeric.
    pub defect: Option<f64>,
    pub detail: String,
}

/// List of named checks; the report passes iff no entry failed.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct ValidationReport {
    pub entries: Vec<CheckEntry>,
}

impl ValidationReport {
    pub fn push(&mut self, name: &str, status: CheckStatus, defect: Option<f64>, detail: String) {
        self.entries.push(CheckEntry { name: name.to_string(), status, defect, detail });
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != CheckStatus::Fail)
    }

    pub fn warned(&self) -> bool {
        self.entries.iter().any(|e| e.status == CheckStatus::Warn)
    }

    pub fn worst_defect(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|e| e.defect)
            .fold(0.0, f64::max)
    }

    pub fn merge(&mut self, prefix: &str, other: ValidationReport) {
        for mut e in other.entries {
            e.name = format!("{prefix}.{}", e.name);
            self.entries.push(e);
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let status = match e.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Warn => "warn",
                CheckStatus::Fail => "FAIL",
            };
            match e.defect {
                Some(d) => writeln!(f, "{status} {} (defect {d:.3e}) {}", e.name, e.detail)?,
                None => writeln!(f, "{status} {} {}", e.name, e.detail)?,
            }
        }
        Ok(())
    }
}

/// Structural and standing-assumption checks for a configuration.
///
/// The edge-count assumption (`> 1` edge per graph) is reported at warning
/// level so that single-edge fixtures still load.
pub fn validate_config(cfg: &FourGraphConfig) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();

    for layer in Layer::ALL {
        if cfg.layer_len(layer) == 0 {
            report.push(
                &format!("layer.{layer}.nonempty"),
                CheckStatus::Fail,
                None,
                "empty vertex layer".into(),
            );
        } else {
            report.push(&format!("layer.{layer}.nonempty"), CheckStatus::Pass, None, String::new());
        }
    }

    for gid in GraphId::ALL {
        let g = cfg.graph(gid);
        let (sl, rl) = gid.layers();
        // Constructor already validated endpoints; re-check so hand-built
        // values cannot sneak past.
        let ok = g
            .edges()
            .iter()
            .all(|&(s, d)| s < cfg.layer_len(sl) && d < cfg.layer_len(rl));
        if !ok {
            return Err(Error::Structural(format!("{gid}: unresolvable edge endpoints")));
        }
        report.push(&format!("{gid}.layers"), CheckStatus::Pass, None, String::new());

        if g.n_edges() > 1 {
            report.push(&format!("{gid}.edge_count"), CheckStatus::Pass, None, String::new());
        } else {
            report.push(
                &format!("{gid}.edge_count"),
                CheckStatus::Warn,
                None,
                format!("{} edge(s); the standing assumption wants more than one", g.n_edges()),
            );
        }
    }

    for gid in [GraphId::G0, GraphId::G2] {
        let g = cfg.graph(gid);
        let (sl, rl) = gid.layers();
        if g.connected(cfg.layer_len(sl), cfg.layer_len(rl)) {
            report.push(&format!("{gid}.connected"), CheckStatus::Pass, None, String::new());
        } else {
            report.push(
                &format!("{gid}.connected"),
                CheckStatus::Fail,
                None,
                "graph is not connected".into(),
            );
        }
    }

    Ok(report)
}

/// Positive vertex weights plus the two Perron-Frobenius eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct PFData<T> {
    mu: [Vec<T>; 4],
    pub beta0: T,
    pub beta1: T,
    pub tol: T,
}

impl<T: Real> PFData<T> {
    pub fn new(mu: [Vec<T>; 4], beta0: T, beta1: T, tol: T) -> Self {
        PFData { mu, beta0, beta1, tol }
    }

    pub fn mu(&self, v: VertexId) -> T {
        self.mu[v.layer.index()][v.index]
    }

    pub fn mu_layer(&self, layer: Layer) -> &[T] {
        &self.mu[layer.index()]
    }

    /// Maximum absolute difference of the weights against `other`.
    pub fn mu_distance(&self, other: &PFData<T>) -> T {
        let mut d = T::zero();
        for i in 0..4 {
            for (a, b) in self.mu[i].iter().zip(other.mu[i].iter()) {
                d = rmax(d, (*a - *b).abs());
            }
        }
        d
    }
}

const POWER_ITERATION_CAP: usize = 100_000;
pub const DEFAULT_PF_TOL: f64 = 1e-10;

/// Default residual tolerance for the balance equations, widened for
/// scalars coarser than `f64`.
pub fn default_pf_tol<T: Real>() -> T {
    rmax(T::lit(DEFAULT_PF_TOL), T::default_epsilon() * T::lit(1e3))
}

/// Dominant eigenpair of a symmetric nonnegative primitive matrix by power
/// iteration, sup-normalized.
fn power_iteration<T: Real>(m: &DMatrix<T>) -> Result<(T, Vec<T>)> {
    let n = m.nrows();
    let mut v = vec![T::one(); n];
    let eps = T::default_epsilon() * T::lit(16.0);
    for _ in 0..POWER_ITERATION_CAP {
        let mut w = vec![T::zero(); n];
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..n {
                acc += m[(i, j)] * v[j];
            }
            w[i] = acc;
        }
        let sup = w.iter().fold(T::zero(), |a, &b| rmax(a, b.abs()));
        if sup == T::zero() {
            return Err(Error::InconsistentWeights {
                equation: "power iteration on a zero block".into(),
                residual: f64::INFINITY,
            });
        }
        let mut delta = T::zero();
        for i in 0..n {
            let next = w[i] / sup;
            delta = rmax(delta, (next - v[i]).abs());
            v[i] = next;
        }
        if delta < eps {
            return Ok((sup, v));
        }
    }
    Err(Error::NonConvergence(POWER_ITERATION_CAP))
}

/// Computes the joint weight vector and the eigenvalue pair for a
/// configuration.
///
/// The weights on `V0 ∪ V3` and `V1 ∪ V2` are obtained separately from the
/// horizontal graphs; the relative scale between the two blocks is fixed by
/// the `G1` balance equations, and all eight equations are then validated
/// against `tol`. The result is normalized so that the first `V0` vertex has
/// weight exactly one.
pub fn compute_pf<T: Real>(cfg: &FourGraphConfig, tol: T) -> Result<PFData<T>> {
    let report = validate_config(cfg)?;
    if !report.passed() {
        return Err(Error::Structural(format!("configuration invalid:\n{report}")));
    }

    let n0 = cfg.layer_len(Layer::V0);
    let n1 = cfg.layer_len(Layer::V1);
    let n2 = cfg.layer_len(Layer::V2);
    let n3 = cfg.layer_len(Layer::V3);

    // G0 block: eigenvector on V0 from Delta0 Delta0^T, then V3 by one
    // application of Delta0^T.
    let d0 = cfg.graph(GraphId::G0).multiplicity::<T>(n0, n3);
    let (lam0, mu0) = power_iteration(&(&d0 * d0.transpose()))?;
    let beta0 = lam0.sqrt();
    let mut mu3 = vec![T::zero(); n3];
    for y in 0..n3 {
        let mut acc = T::zero();
        for x in 0..n0 {
            acc += d0[(x, y)] * mu0[x];
        }
        mu3[y] = acc / beta0;
    }

    let d2 = cfg.graph(GraphId::G2).multiplicity::<T>(n1, n2);
    let (lam2, mu1raw) = power_iteration(&(&d2 * d2.transpose()))?;
    let beta0b = lam2.sqrt();
    let mut mu2raw = vec![T::zero(); n2];
    for y in 0..n2 {
        let mut acc = T::zero();
        for x in 0..n1 {
            acc += d2[(x, y)] * mu1raw[x];
        }
        mu2raw[y] = acc / beta0b;
    }

    // Relative scale between the two blocks from the G1 balance equations at
    // the first vertex of each side: p = beta1 * c, q = beta1 / c.
    let d1 = cfg.graph(GraphId::G1).multiplicity::<T>(n0, n1);
    let mut p = T::zero();
    for x in 0..n0 {
        p += d1[(x, 0)] * mu0[x];
    }
    p /= mu1raw[0];
    let mut q = T::zero();
    for y in 0..n1 {
        q += d1[(0, y)] * mu1raw[y];
    }
    q /= mu0[0];
    if !(p > T::zero() && q > T::zero()) {
        return Err(Error::InconsistentWeights {
            equation: "G1 balance at the scale-fixing vertices".into(),
            residual: f64::INFINITY,
        });
    }
    let beta1 = (p * q).sqrt();
    let scale = (p / q).sqrt();

    let mut mu = [
        mu0,
        mu1raw.iter().map(|&x| x * scale).collect::<Vec<_>>(),
        mu2raw.iter().map(|&x| x * scale).collect::<Vec<_>>(),
        mu3,
    ];

    // Global normalization: weight one at the first V0 vertex.
    let norm = mu[0][0];
    for layer in &mut mu {
        for x in layer.iter_mut() {
            *x /= norm;
        }
    }
    mu[0][0] = T::one();

    let pf = PFData::new(mu, beta0, beta1, tol);

    let (worst, equation) = worst_balance_residual(cfg, &pf);
    if worst >= tol {
        return Err(Error::InconsistentWeights {
            equation,
            residual: worst.to_f64_lossy(),
        });
    }
    let beta_gap = (beta0 - beta0b).abs();
    if beta_gap >= tol {
        return Err(Error::InconsistentWeights {
            equation: "beta0 from G0 vs beta0 from G2".into(),
            residual: beta_gap.to_f64_lossy(),
        });
    }

    Ok(pf)
}

/// Worst absolute residual over the eight balance equations, with the name
/// of the offending family.
pub fn worst_balance_residual<T: Real>(cfg: &FourGraphConfig, pf: &PFData<T>) -> (T, String) {
    let mut worst = T::zero();
    let mut name = String::from("none");
    let mut check = |gid: GraphId, beta: T, pf: &PFData<T>| {
        let g = cfg.graph(gid);
        let (sl, rl) = gid.layers();
        let ns = cfg.layer_len(sl);
        let nr = cfg.layer_len(rl);
        let d = g.multiplicity::<T>(ns, nr);
        for y in 0..nr {
            let mut acc = T::zero();
            for x in 0..ns {
                acc += d[(x, y)] * pf.mu(VertexId::new(sl, x));
            }
            let r = (acc - beta * pf.mu(VertexId::new(rl, y))).abs();
            if r > worst {
                worst = r;
                name = format!("{gid} forward at {rl}[{y}]");
            }
        }
        for x in 0..ns {
            let mut acc = T::zero();
            for y in 0..nr {
                acc += d[(x, y)] * pf.mu(VertexId::new(rl, y));
            }
            let r = (acc - beta * pf.mu(VertexId::new(sl, x))).abs();
            if r > worst {
                worst = r;
                name = format!("{gid} backward at {sl}[{x}]");
            }
        }
    };
    check(GraphId::G0, pf.beta0, pf);
    check(GraphId::G2, pf.beta0, pf);
    check(GraphId::G1, pf.beta1, pf);
    check(GraphId::G3, pf.beta1, pf);
    (worst, name)
}

/// Identifier of a built-in example configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExampleId {
    Example1,
    Example2,
    /// Single vertex per layer, `n` parallel edges on the vertical graphs.
    Hadamard(usize),
    /// Spin-model configuration: `n` vertices on `V1` and `V3`, single edges.
    Spin(usize),
}

impl std::str::FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("example1") {
            return Ok(ExampleId::Example1);
        }
        if s.eq_ignore_ascii_case("example2") {
            return Ok(ExampleId::Example2);
        }
        for (prefix, make) in [
            ("hadamard", ExampleId::Hadamard as fn(usize) -> ExampleId),
            ("spin", ExampleId::Spin as fn(usize) -> ExampleId),
        ] {
            if let Some(rest) = s.strip_prefix(prefix) {
                let digits = rest.trim_matches(|c| c == '(' || c == ')');
                if let Ok(n) = digits.parse::<usize>() {
                    return Ok(make(n));
                }
            }
        }
        Err(Error::UnknownExample(s.to_string()))
    }
}

fn names(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

/// Returns a built-in configuration.
///
/// `Example1` and `Example2` preserve the vertex labels 1-10 and 1-17 of the
/// reference figures in the layer names. `Hadamard(n)` has one vertex per
/// layer with `n` parallel vertical edges; `Spin(n)` has `n` vertices on the
/// middle layers with single edges everywhere, the shape on which complex
/// Hadamard matrices give bi-unitary connections.
pub fn builtin_example(id: &ExampleId) -> Result<FourGraphConfig> {
    match id {
        ExampleId::Example1 => FourGraphConfig::new(
            [
                names(&["1", "2", "3"]),
                names(&["6", "7"]),
                names(&["8", "9", "10"]),
                names(&["4", "5"]),
            ],
            [
                vec![(0, 0), (1, 0), (1, 1), (2, 1)],
                vec![(0, 0), (1, 0), (1, 1), (2, 1)],
                vec![(0, 0), (0, 1), (1, 1), (1, 2)],
                vec![(0, 0), (0, 1), (1, 1), (1, 2)],
            ],
        ),
        ExampleId::Example2 => FourGraphConfig::new(
            [
                names(&["1", "2", "3", "4", "5", "6"]),
                names(&["12", "13", "14"]),
                names(&["15", "16", "17"]),
                names(&["7", "8", "9", "10", "11"]),
            ],
            [
                // A11 path 1-7-2-8-3-9-4-10-5-11-6
                vec![
                    (0, 0),
                    (1, 0),
                    (1, 1),
                    (2, 1),
                    (2, 2),
                    (3, 2),
                    (3, 3),
                    (4, 3),
                    (4, 4),
                    (5, 4),
                ],
                vec![
                    (0, 0),
                    (3, 0),
                    (3, 1),
                    (1, 1),
                    (4, 1),
                    (2, 1),
                    (2, 2),
                    (5, 2),
                ],
                // E6: 12-15, 13-15, 13-16, 13-17, 14-17
                vec![(0, 0), (1, 0), (1, 1), (1, 2), (2, 2)],
                vec![
                    (0, 0),
                    (3, 0),
                    (3, 1),
                    (2, 0),
                    (2, 2),
                    (1, 1),
                    (1, 2),
                    (4, 2),
                ],
            ],
        ),
        ExampleId::Hadamard(n) => {
            if *n < 2 {
                return Err(Error::Structural("hadamard(n) requires n >= 2".into()));
            }
            FourGraphConfig::new(
                [names(&["p"]), names(&["q"]), names(&["r"]), names(&["s"])],
                [
                    vec![(0, 0)],
                    (0..*n).map(|_| (0, 0)).collect(),
                    vec![(0, 0)],
                    (0..*n).map(|_| (0, 0)).collect(),
                ],
            )
        }
        ExampleId::Spin(n) => {
            if *n < 2 {
                return Err(Error::Structural("spin(n) requires n >= 2".into()));
            }
            let mids: Vec<String> = (0..*n).map(|i| format!("m{i}")).collect();
            let mids2: Vec<String> = (0..*n).map(|i| format!("w{i}")).collect();
            FourGraphConfig::new(
                [
                    names(&["p"]),
                    mids,
                    names(&["r"]),
                    mids2,
                ],
                [
                    (0..*n).map(|j| (0, j)).collect(),
                    (0..*n).map(|i| (0, i)).collect(),
                    (0..*n).map(|i| (i, 0)).collect(),
                    (0..*n).map(|j| (j, 0)).collect(),
                ],
            )
        }
    }
}
