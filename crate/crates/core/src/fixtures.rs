//! JSON fixture formats shared repo-wide.
//!
//! Configurations, connections, 4-tensors, fields, and flat bases all read
//! and write plain JSON with decimal floats and complex numbers as
//! `{"re": .., "im": ..}` objects. Connection values omit zero cells; the
//! loader rejects a nonzero value on a non-matching cell.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connection::{Cell, Connection};
use crate::error::{Error, Result};
use crate::graphs::{
    compute_pf, default_pf_tol, worst_balance_residual, FourGraphConfig, GraphId, Layer, PFData,
};
use crate::scalar::{Cx, Real};
use crate::strings::StringField;
use crate::tensor4::FourTensor;

pub const CONFIG_SCHEMA: &str = "biconnect.config/v1";
pub const CONNECTION_SCHEMA: &str = "biconnect.connection/v1";
pub const FIELD_SCHEMA: &str = "biconnect.field/v1";
pub const FLAT_BASIS_SCHEMA: &str = "biconnect.flatbasis/v1";

/// Residual tolerance accepted for weights stored in fixtures.
pub const FIXTURE_MU_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeJson {
    pub id: usize,
    pub src: String,
    pub dst: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigJson {
    pub schema: String,
    /// Vertex names per layer, `"V0"` through `"V3"`.
    pub layers: BTreeMap<String, Vec<String>>,
    /// Edge lists per graph, `"G0"` through `"G3"`; endpoints by name.
    pub graphs: BTreeMap<String, Vec<EdgeJson>>,
    /// Optional weights per layer, positional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellValueJson {
    /// Edge ids in graph order `[G0, G1, G2, G3]`.
    pub cell: [usize; 4],
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigRef {
    Inline(ConfigJson),
    Path(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectionJson {
    pub schema: String,
    pub config: ConfigRef,
    /// `"connection"` (default) or `"tensor"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
    pub values: Vec<CellValueJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldCoeffJson {
    pub rho1: usize,
    pub rho2: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldJson {
    pub schema: String,
    /// `"G1"` or `"G3"`.
    pub graph: String,
    pub coeffs: Vec<FieldCoeffJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatBasisJson {
    pub schema: String,
    pub dimension: usize,
    pub defects: Vec<f64>,
    pub fields: Vec<FieldJson>,
}

fn layer_key(layer: Layer) -> String {
    layer.to_string()
}

pub fn config_to_json<T: Real>(cfg: &FourGraphConfig, pf: Option<&PFData<T>>) -> ConfigJson {
    let mut layers = BTreeMap::new();
    for layer in Layer::ALL {
        layers.insert(layer_key(layer), cfg.layer_names(layer).to_vec());
    }
    let mut graphs = BTreeMap::new();
    for gid in GraphId::ALL {
        let g = cfg.graph(gid);
        let (sl, rl) = gid.layers();
        let edges = g
            .edges()
            .iter()
            .enumerate()
            .map(|(id, &(s, d))| EdgeJson {
                id,
                src: cfg.layer_names(sl)[s].clone(),
                dst: cfg.layer_names(rl)[d].clone(),
            })
            .collect();
        graphs.insert(gid.to_string(), edges);
    }
    let (mu, beta0, beta1) = match pf {
        Some(pf) => {
            let mut mu = BTreeMap::new();
            for layer in Layer::ALL {
                mu.insert(
                    layer_key(layer),
                    pf.mu_layer(layer).iter().map(|x| x.to_f64_lossy()).collect(),
                );
            }
            (Some(mu), Some(pf.beta0.to_f64_lossy()), Some(pf.beta1.to_f64_lossy()))
        }
        None => (None, None, None),
    };
    ConfigJson {
        schema: CONFIG_SCHEMA.to_string(),
        layers,
        graphs,
        mu,
        beta0,
        beta1,
    }
}

pub fn config_from_json<T: Real>(
    json: &ConfigJson,
) -> Result<(FourGraphConfig, Option<PFData<T>>)> {
    if json.schema != CONFIG_SCHEMA {
        return Err(Error::Fixture(format!(
            "expected schema {CONFIG_SCHEMA:?}, found {:?}",
            json.schema
        )));
    }
    let mut layer_names: [Vec<String>; 4] = Default::default();
    for layer in Layer::ALL {
        let names = json
            .layers
            .get(&layer_key(layer))
            .ok_or_else(|| Error::Fixture(format!("missing layer {layer}")))?;
        layer_names[layer.index()] = names.clone();
    }
    let mut edge_lists: [Vec<(usize, usize)>; 4] = Default::default();
    for gid in GraphId::ALL {
        let (sl, rl) = gid.layers();
        let edges = json
            .graphs
            .get(&gid.to_string())
            .ok_or_else(|| Error::Fixture(format!("missing graph {gid}")))?;
        let mut sorted = edges.clone();
        sorted.sort_by_key(|e| e.id);
        for (pos, e) in sorted.iter().enumerate() {
            if e.id != pos {
                return Err(Error::Fixture(format!(
                    "{gid}: edge ids must be contiguous from 0, found {}",
                    e.id
                )));
            }
        }
        let resolve = |layer: Layer, name: &str| -> Result<usize> {
            layer_names[layer.index()]
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::Fixture(format!("{gid}: vertex {name:?} not found in {layer}"))
                })
        };
        let mut list = Vec::with_capacity(sorted.len());
        for e in &sorted {
            list.push((resolve(sl, &e.src)?, resolve(rl, &e.dst)?));
        }
        edge_lists[gid.index()] = list;
    }
    let cfg = FourGraphConfig::new(layer_names, edge_lists)?;

    let pf = match (&json.mu, json.beta0, json.beta1) {
        (Some(mu), Some(b0), Some(b1)) => {
            let mut arrays: [Vec<T>; 4] = Default::default();
            for layer in Layer::ALL {
                let values = mu
                    .get(&layer_key(layer))
                    .ok_or_else(|| Error::Fixture(format!("mu missing layer {layer}")))?;
                if values.len() != cfg.layer_len(layer) {
                    return Err(Error::Fixture(format!(
                        "mu for {layer} has {} entries, layer has {}",
                        values.len(),
                        cfg.layer_len(layer)
                    )));
                }
                if values.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::Fixture(format!("non-positive weight in {layer}")));
                }
                arrays[layer.index()] = values.iter().map(|&x| T::lit(x)).collect();
            }
            let pf = PFData::new(arrays, T::lit(b0), T::lit(b1), default_pf_tol::<T>());
            let (worst, equation) = worst_balance_residual(&cfg, &pf);
            if worst.to_f64_lossy() >= FIXTURE_MU_TOL {
                return Err(Error::Fixture(format!(
                    "stored weights violate the balance equations: residual {:.3e} in {equation}",
                    worst.to_f64_lossy()
                )));
            }
            Some(pf)
        }
        (None, None, None) => None,
        _ => {
            return Err(Error::Fixture(
                "mu, beta0 and beta1 must be given together or not at all".into(),
            ))
        }
    };
    Ok((cfg, pf))
}

fn values_to_json<T: Real>(values: &BTreeMap<Cell, Cx<T>>) -> Vec<CellValueJson> {
    values
        .iter()
        .map(|(cell, v)| CellValueJson {
            cell: [cell.g0, cell.g1, cell.g2, cell.g3],
            re: v.re.to_f64_lossy(),
            im: v.im.to_f64_lossy(),
        })
        .collect()
}

pub fn connection_to_json<T: Real>(w: &Connection<T>) -> ConnectionJson {
    ConnectionJson {
        schema: CONNECTION_SCHEMA.to_string(),
        config: ConfigRef::Inline(config_to_json(w.config(), Some(w.pf()))),
        normalization: None,
        values: values_to_json(w.values()),
    }
}

pub fn tensor_to_json<T: Real>(a: &FourTensor<T>) -> ConnectionJson {
    ConnectionJson {
        schema: CONNECTION_SCHEMA.to_string(),
        config: ConfigRef::Inline(config_to_json(a.config(), Some(a.pf()))),
        normalization: Some("tensor".to_string()),
        values: values_to_json(a.values()),
    }
}

fn resolve_config<T: Real>(
    r: &ConfigRef,
    base: Option<&Path>,
) -> Result<(FourGraphConfig, Option<PFData<T>>)> {
    match r {
        ConfigRef::Inline(json) => config_from_json(json),
        ConfigRef::Path(p) => {
            let path = match base {
                Some(dir) => dir.join(p),
                None => Path::new(p).to_path_buf(),
            };
            let text = std::fs::read_to_string(&path)?;
            let json: ConfigJson = serde_json::from_str(&text)?;
            config_from_json(&json)
        }
    }
}

fn load_parts<T: Real>(
    json: &ConnectionJson,
    base: Option<&Path>,
) -> Result<(FourGraphConfig, PFData<T>, Vec<(Cell, Cx<T>)>)> {
    if json.schema != CONNECTION_SCHEMA {
        return Err(Error::Fixture(format!(
            "expected schema {CONNECTION_SCHEMA:?}, found {:?}",
            json.schema
        )));
    }
    let (cfg, pf) = resolve_config::<T>(&json.config, base)?;
    let pf = match pf {
        Some(pf) => pf,
        None => compute_pf(&cfg, default_pf_tol::<T>())?,
    };
    let values: Vec<(Cell, Cx<T>)> = json
        .values
        .iter()
        .map(|v| {
            (
                Cell::new(v.cell[0], v.cell[1], v.cell[2], v.cell[3]),
                Cx::new(T::lit(v.re), T::lit(v.im)),
            )
        })
        .collect();
    Ok((cfg, pf, values))
}

pub fn connection_from_json<T: Real>(
    json: &ConnectionJson,
    base: Option<&Path>,
) -> Result<Connection<T>> {
    if json.normalization.as_deref() == Some("tensor") {
        return Err(Error::Fixture(
            "fixture is normalized as a tensor; load it with tensor_from_json".into(),
        ));
    }
    let (cfg, pf, values) = load_parts(json, base)?;
    Connection::new(cfg, pf, values)
}

pub fn tensor_from_json<T: Real>(
    json: &ConnectionJson,
    base: Option<&Path>,
) -> Result<FourTensor<T>> {
    match json.normalization.as_deref() {
        Some("tensor") => {}
        other => {
            return Err(Error::Fixture(format!(
                "fixture normalization {other:?} is not \"tensor\""
            )))
        }
    }
    let (cfg, pf, values) = load_parts(json, base)?;
    FourTensor::new(cfg, pf, values)
}

pub fn field_to_json<T: Real>(f: &StringField<T>, graph: GraphId) -> FieldJson {
    FieldJson {
        schema: FIELD_SCHEMA.to_string(),
        graph: graph.to_string(),
        coeffs: f
            .coeffs()
            .iter()
            .map(|(&(r1, r2), v)| FieldCoeffJson {
                rho1: r1,
                rho2: r2,
                re: v.re.to_f64_lossy(),
                im: v.im.to_f64_lossy(),
            })
            .collect(),
    }
}

/// Loads a field against the vertical graph named in the fixture.
pub fn field_from_json<T: Real>(
    json: &FieldJson,
    cfg: &FourGraphConfig,
) -> Result<(StringField<T>, GraphId)> {
    if json.schema != FIELD_SCHEMA {
        return Err(Error::Fixture(format!(
            "expected schema {FIELD_SCHEMA:?}, found {:?}",
            json.schema
        )));
    }
    let gid = match json.graph.as_str() {
        "G1" => GraphId::G1,
        "G3" => GraphId::G3,
        other => {
            return Err(Error::Fixture(format!(
                "field graph must be G1 or G3, found {other:?}"
            )))
        }
    };
    let field = StringField::new(
        cfg.graph(gid),
        json.coeffs
            .iter()
            .map(|c| ((c.rho1, c.rho2), Cx::new(T::lit(c.re), T::lit(c.im)))),
    )?;
    Ok((field, gid))
}

pub fn flat_basis_to_json<T: Real>(fields: &[StringField<T>], defects: &[T]) -> FlatBasisJson {
    FlatBasisJson {
        schema: FLAT_BASIS_SCHEMA.to_string(),
        dimension: fields.len(),
        defects: defects.iter().map(|d| d.to_f64_lossy()).collect(),
        fields: fields.iter().map(|f| field_to_json(f, GraphId::G1)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{fourier_matrix, hadamard_connection};
    use crate::graphs::{builtin_example, ExampleId};

    #[test]
    fn config_round_trip_preserves_labels_and_weights() {
        let cfg = builtin_example(&ExampleId::Example2).unwrap();
        let pf = compute_pf::<f64>(&cfg, 1e-10).unwrap();
        let json = config_to_json(&cfg, Some(&pf));
        let text = serde_json::to_string_pretty(&json).unwrap();
        let parsed: ConfigJson = serde_json::from_str(&text).unwrap();
        let (cfg2, pf2) = config_from_json::<f64>(&parsed).unwrap();
        assert_eq!(cfg, cfg2);
        let pf2 = pf2.expect("weights stored");
        assert!(pf.mu_distance(&pf2) < 1e-12);
        assert_eq!(cfg2.layer_names(Layer::V0)[0], "1");
    }

    #[test]
    fn connection_round_trip() {
        let w = hadamard_connection(&fourier_matrix::<f64>(3)).unwrap();
        let json = connection_to_json(&w);
        let text = serde_json::to_string(&json).unwrap();
        let parsed: ConnectionJson = serde_json::from_str(&text).unwrap();
        let w2 = connection_from_json::<f64>(&parsed, None).unwrap();
        assert_eq!(w.config(), w2.config());
        assert!(w.max_value_diff(&w2) < 1e-12);
    }

    #[test]
    fn loader_rejects_nonzero_value_on_non_matching_cell() {
        let w = hadamard_connection(&fourier_matrix::<f64>(2)).unwrap();
        let mut json = connection_to_json(&w);
        json.values.push(CellValueJson { cell: [0, 0, 1, 0], re: 0.5, im: 0.0 });
        let err = connection_from_json::<f64>(&json, None).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn loader_rejects_inconsistent_stored_weights() {
        let cfg = builtin_example(&ExampleId::Spin(2)).unwrap();
        let pf = compute_pf::<f64>(&cfg, 1e-10).unwrap();
        let mut json = config_to_json(&cfg, Some(&pf));
        json.mu.as_mut().unwrap().get_mut("V1").unwrap()[0] = 3.0;
        let err = config_from_json::<f64>(&json).unwrap_err();
        assert!(matches!(err, Error::Fixture(_)));
    }

    #[test]
    fn tensor_fixture_round_trip_via_flag() {
        use crate::tensor4::connection_to_tensor;
        let w = hadamard_connection(&fourier_matrix::<f64>(2)).unwrap();
        let a = connection_to_tensor(&w);
        let json = tensor_to_json(&a);
        assert_eq!(json.normalization.as_deref(), Some("tensor"));
        let text = serde_json::to_string(&json).unwrap();
        let parsed: ConnectionJson = serde_json::from_str(&text).unwrap();
        // A tensor fixture refuses to load as a connection and vice versa.
        assert!(connection_from_json::<f64>(&parsed, None).is_err());
        let a2 = tensor_from_json::<f64>(&parsed, None).unwrap();
        assert!(a.max_value_diff(&a2) < 1e-12);
    }

    #[test]
    fn field_round_trip() {
        let w = hadamard_connection(&fourier_matrix::<f64>(3)).unwrap();
        let g1 = w.config().graph(GraphId::G1);
        let f = StringField::<f64>::identity(g1);
        let json = field_to_json(&f, GraphId::G1);
        let (back, gid) = field_from_json::<f64>(&json, w.config()).unwrap();
        assert_eq!(gid, GraphId::G1);
        assert!(back.max_coeff_diff(&f) < 1e-15);
    }
}
