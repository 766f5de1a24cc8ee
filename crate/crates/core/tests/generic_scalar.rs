//! The numeric core is generic over the real scalar; exercise the f32
//! instantiation end to end at f32-appropriate tolerances.

use biconnect::connection::{check_biunitarity, fourier_matrix, hadamard_connection, Connection};
use biconnect::graphs::{builtin_example, compute_pf, ExampleId};
use biconnect::strings::{canonical_word, solve_flat_fields, StringField};
use biconnect::zipper::verify_theorem;

#[test]
fn f32_pf_and_biunitarity() {
    let cfg = builtin_example(&ExampleId::Example2).unwrap();
    let pf = compute_pf::<f32>(&cfg, 1e-4).unwrap();
    assert!((pf.beta0 - 2.0 * (std::f32::consts::PI / 12.0).cos()).abs() < 1e-5);
    assert!((pf.beta1 - (3.0f32 + 3.0f32.sqrt()).sqrt()).abs() < 1e-5);

    let w: Connection<f32> = hadamard_connection(&fourier_matrix::<f32>(3)).unwrap();
    let report = check_biunitarity(&w, 1e-4);
    assert!(report.passed(), "{report}");
}

#[test]
fn f32_theorem_agreement() {
    let w: Connection<f32> = hadamard_connection(&fourier_matrix::<f32>(2)).unwrap();
    let word = canonical_word(&w).unwrap();
    let basis = solve_flat_fields(&word, 1e-4).unwrap();
    assert_eq!(basis.len(), 1);
    let id = StringField::<f32>::identity(word.left_graph());
    let report = verify_theorem(&id, &word, 1e-3).unwrap();
    assert!(report.agree);
    assert!(report.all_pass());
}
