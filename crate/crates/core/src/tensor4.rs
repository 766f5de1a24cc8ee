//! The 4-tensor normalization of a connection and its bi-unitarity
//! identities.
//!
//! A 4-tensor differs from the connection on the same cells by the fourth
//! root of the cell weight: `a = (mu(s(xi)) mu(r(eta)) / (mu(r(xi))
//! mu(s(eta))))^{1/4} W`, legs named `xi` (top), `rho` (left), `eta`
//! (bottom), `sigma` (right). The conversions are pure rescalings because a
//! tensor shares the cell index type with the connection it came from.

use std::collections::BTreeMap;

use crate::connection::{
    cell_valid, reflected_config_pf, valid_cells, Cell, Connection, Renormalization,
};
use crate::error::{Error, Result};
use crate::graphs::{CheckStatus, FourGraphConfig, GraphId, PFData, ValidationReport};
use crate::scalar::{cabs, czero, rmax, Cx, Real};

/// A complex 4-tensor on the cells of a configuration.
#[derive(Clone, Debug)]
pub struct FourTensor<T: Real> {
    config: FourGraphConfig,
    pf: PFData<T>,
    values: BTreeMap<Cell, Cx<T>>,
}

impl<T: Real> FourTensor<T> {
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
                        "nonzero tensor value on a non-matching cell {cell:?}"
                    )));
                }
                continue;
            }
            if v != czero::<T>() {
                map.insert(cell, v);
            }
        }
        Ok(FourTensor { config, pf, values: map })
    }

    pub fn config(&self) -> &FourGraphConfig {
        &self.config
    }

    pub fn pf(&self) -> &PFData<T> {
        &self.pf
    }

    pub fn value(&self, cell: &Cell) -> Cx<T> {
        self.values.get(cell).copied().unwrap_or_else(czero::<T>)
    }

    pub fn values(&self) -> &BTreeMap<Cell, Cx<T>> {
        &self.values
    }

    pub fn max_value_diff(&self, other: &FourTensor<T>) -> T {
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

/// `a(cell) = sqrt(kappa(cell)) W(cell)`, the fourth root of the cell
/// weight.
pub fn connection_to_tensor<T: Real>(w: &Connection<T>) -> FourTensor<T> {
    let values: Vec<(Cell, Cx<T>)> = w
        .values()
        .iter()
        .map(|(cell, &v)| {
            let factor = w.kappa(cell.g0, cell.g2).sqrt();
            (*cell, v * Cx::new(factor, T::zero()))
        })
        .collect();
    FourTensor::new(w.config().clone(), w.pf().clone(), values)
        .expect("rescaling preserves matching cells")
}

/// Exact inverse of [`connection_to_tensor`].
pub fn tensor_to_connection<T: Real>(a: &FourTensor<T>) -> Connection<T> {
    let kappa = |cell: &Cell| {
        crate::connection::kappa(&a.config, &a.pf, cell.g0, cell.g2)
    };
    let values: Vec<(Cell, Cx<T>)> = a
        .values
        .iter()
        .map(|(cell, &v)| (*cell, v / Cx::new(kappa(cell).sqrt(), T::zero())))
        .collect();
    Connection::new(a.config.clone(), a.pf.clone(), values)
        .expect("rescaling preserves matching cells")
}

/// The conjugate tensor on the top-bottom reflected configuration:
/// `abar(eta, rho~, xi, sigma~) = conj(a(xi, rho, eta, sigma))`, with no
/// weight factor.
pub fn tensor_conjugate<T: Real>(a: &FourTensor<T>) -> FourTensor<T> {
    let (config, pf) = reflected_config_pf(&a.config, &a.pf, Renormalization::Bar);
    let values: Vec<(Cell, Cx<T>)> = a
        .values
        .iter()
        .map(|(cell, &v)| (Cell::new(cell.g2, cell.g1, cell.g0, cell.g3), v.conj()))
        .collect();
    FourTensor::new(config, pf, values).expect("reflected cells remain matching")
}

/// The two weighted bi-unitarity identities for a 4-tensor.
///
/// Identity (1): summing the left and bottom legs against the conjugate
/// tensor with weight `sqrt(mu(r(xi)) mu(s(eta)) / (mu(s(xi)) mu(r(eta))))`
/// must give `delta_{xi,xi'} delta_{sigma,sigma'}` on composable pairs.
/// Identity (2) sums the right and bottom legs with the reciprocal weight.
pub fn check_tensor_biunitarity<T: Real>(a: &FourTensor<T>, tol: T) -> ValidationReport {
    let cfg = &a.config;
    let g0 = cfg.graph(GraphId::G0);
    let g1 = cfg.graph(GraphId::G1);
    let g2 = cfg.graph(GraphId::G2);
    let g3 = cfg.graph(GraphId::G3);
    let kappa = |xi: usize, eta: usize| crate::connection::kappa(cfg, &a.pf, xi, eta);
    let mut report = ValidationReport::default();

    // Identity (1): free (xi, xi', sigma, sigma'), summed (rho, eta).
    let mut worst1 = T::zero();
    for xi in 0..g0.n_edges() {
        for xi2 in 0..g0.n_edges() {
            for s in 0..g3.n_edges() {
                for s2 in 0..g3.n_edges() {
                    let mut acc = czero::<T>();
                    for rho in 0..g1.n_edges() {
                        for eta in 0..g2.n_edges() {
                            let v1 = a.value(&Cell::new(xi, rho, eta, s));
                            if v1 == czero::<T>() {
                                continue;
                            }
                            let v2 = a.value(&Cell::new(xi2, rho, eta, s2));
                            if v2 == czero::<T>() {
                                continue;
                            }
                            let w = T::one() / kappa(xi, eta);
                            acc += v1 * v2.conj() * Cx::new(w, T::zero());
                        }
                    }
                    let expect = if xi == xi2 && s == s2 && g0.dst(xi) == g3.src(s) {
                        Cx::new(T::one(), T::zero())
                    } else {
                        czero::<T>()
                    };
                    worst1 = rmax(worst1, cabs(acc - expect));
                }
            }
        }
    }
    report.push(
        "tensor_unitarity_1",
        if worst1 < tol { CheckStatus::Pass } else { CheckStatus::Fail },
        Some(worst1.to_f64_lossy()),
        String::new(),
    );

    // Identity (2): free (xi, xi', rho, rho'), summed (eta, sigma).
    let mut worst2 = T::zero();
    for xi in 0..g0.n_edges() {
        for xi2 in 0..g0.n_edges() {
            for r in 0..g1.n_edges() {
                for r2 in 0..g1.n_edges() {
                    let mut acc = czero::<T>();
                    for eta in 0..g2.n_edges() {
                        for s in 0..g3.n_edges() {
                            let v1 = a.value(&Cell::new(xi, r, eta, s));
                            if v1 == czero::<T>() {
                                continue;
                            }
                            let v2 = a.value(&Cell::new(xi2, r2, eta, s));
                            if v2 == czero::<T>() {
                                continue;
                            }
                            acc += v1 * v2.conj() * Cx::new(kappa(xi, eta), T::zero());
                        }
                    }
                    let expect = if xi == xi2 && r == r2 && g0.src(xi) == g1.src(r) {
                        Cx::new(T::one(), T::zero())
                    } else {
                        czero::<T>()
                    };
                    worst2 = rmax(worst2, cabs(acc - expect));
                }
            }
        }
    }
    report.push(
        "tensor_unitarity_2",
        if worst2 < tol { CheckStatus::Pass } else { CheckStatus::Fail },
        Some(worst2.to_f64_lossy()),
        String::new(),
    );
    report
}

/// All structurally valid cells of the tensor's configuration.
pub fn tensor_cells<T: Real>(a: &FourTensor<T>) -> Vec<Cell> {
    valid_cells(&a.config)
}
