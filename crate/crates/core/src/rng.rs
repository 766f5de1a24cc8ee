//! Seedable random generation of test objects.
//!
//! Everything here draws from a ChaCha8 stream cipher seeded with a `u64`,
//! so any fixture or counterexample can be reproduced from its recorded
//! seed.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::connection::GaugePair;
use crate::graphs::{BipartiteGraph, FourGraphConfig, GraphId};
use crate::scalar::{czero, Cx, Real};
use crate::strings::StringField;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex<T: Real>(rng: &mut ChaCha8Rng) -> Cx<T> {
    let re: f64 = rng.random_range(-1.0..1.0);
    let im: f64 = rng.random_range(-1.0..1.0);
    Cx::new(T::lit(re), T::lit(im))
}

/// Random field of strings on `graph`: independent uniform complex
/// coefficients on every ordered parallel pair.
pub fn random_field<T: Real>(rng: &mut ChaCha8Rng, graph: &BipartiteGraph) -> StringField<T> {
    let coeffs: Vec<((usize, usize), Cx<T>)> = graph
        .parallel_pairs()
        .into_iter()
        .map(|pair| (pair, random_complex(rng)))
        .collect();
    StringField::new(graph, coeffs).expect("parallel support by construction")
}

/// Random unitary matrix from the QR factorization of a uniform complex
/// matrix.
fn random_unitary<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Cx<T>> {
    let m = DMatrix::from_fn(n, n, |_, _| random_complex::<T>(rng));
    m.qr().q()
}

/// Random gauge pair: an independent random unitary on every block of
/// parallel edges of the two vertical graphs.
pub fn random_gauge<T: Real>(rng: &mut ChaCha8Rng, config: &FourGraphConfig) -> GaugePair<T> {
    let mut blocks = |gid: GraphId| {
        let g = config.graph(gid);
        let n = g.n_edges();
        let mut m = DMatrix::from_element(n, n, czero::<T>());
        let mut seen = vec![false; n];
        for e in 0..n {
            if seen[e] {
                continue;
            }
            let class: Vec<usize> = g.parallel(e).collect();
            for &x in &class {
                seen[x] = true;
            }
            let u = random_unitary::<T>(rng, class.len());
            for (i, &ei) in class.iter().enumerate() {
                for (j, &ej) in class.iter().enumerate() {
                    m[(ei, ej)] = u[(i, j)];
                }
            }
        }
        m
    };
    GaugePair { u: blocks(GraphId::G1), v: blocks(GraphId::G3) }
}
