//! Command-line surface for the biconnect library: fixture generation,
//! validation, the bi-unitarity checks, renormalizations, products and
//! direct sums, irreducibility, the flat-field solver, the four-condition
//! verifier, and the finite-level action check.
//!
//! Every command writes a machine-readable JSON report (to stdout or
//! `--out`) plus a one-line human summary on stderr. Reports are
//! byte-identical for identical inputs and seeds. Exit codes: 0 pass,
//! 1 clean fail, 2 internal inconsistency (condition verdicts disagree),
//! 3 input error.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use biconnect::connection::{
    check_biunitarity, direct_sum, fourier_matrix, hadamard_connection, intertwiner_space,
    product, renormalize, Renormalization,
};
use biconnect::fixtures::{
    self, config_from_json, config_to_json, connection_from_json, connection_to_json,
    field_from_json, field_to_json, flat_basis_to_json, ConfigJson, ConnectionJson, FieldJson,
};
use biconnect::graphs::{
    builtin_example, compute_pf, default_pf_tol, validate_config, worst_balance_residual,
    ExampleId, GraphId, Layer,
};
use biconnect::rng::{random_field, rng_from_seed};
use biconnect::strings::{
    canonical_word, check_action_well_defined, check_flatness, solve_flat_fields, StringField,
};
use biconnect::zipper::verify_theorem;
use biconnect::{Connection64, Error};

const REPORT_SCHEMA: &str = "biconnect.report/v1";
const FIXTURES_ENV: &str = "BICONNECT_FIXTURES";

#[derive(Parser)]
#[command(
    name = "biconnect",
    about = "Bi-unitary connections on four-graph configurations",
    version
)]
struct Cli {
    /// Numerical tolerance for the checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for any randomized input; recorded in the report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Evaluate independent samples in parallel; results are unchanged.
    #[arg(long, global = true)]
    parallel: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a built-in fixture: example1, example2, hadamard(n), spin(n)
    /// as configurations, or fourier(n) as a ready connection.
    Example {
        #[arg(long)]
        id: String,
    },
    /// Structural checks and standing assumptions for a configuration.
    Validate { input: Option<String> },
    /// Perron-Frobenius weights and eigenvalues of a configuration.
    Pf { input: Option<String> },
    /// Blockwise unitarity of a connection and of its prime renormalization.
    CheckBiunitary { input: Option<String> },
    /// Rewrite a connection fixture through a renormalization.
    Renorm {
        #[arg(long, value_parser = ["prime", "bar", "bar-prime"])]
        mode: String,
        input: Option<String>,
    },
    /// Product connection of two stacked fixtures.
    Product { first: String, second: String },
    /// Direct sum connection of two fixtures on the same horizontal graphs.
    Dsum { first: String, second: String },
    /// Self-intertwiner dimension and the irreducibility verdict.
    Irreducible { input: Option<String> },
    /// Orthonormal basis of the flat fields of the word [a, prime(a)].
    FlatFields { input: Option<String> },
    /// Check all four equivalent conditions for fields on [a, prime(a)].
    TheoremVerify {
        input: Option<String>,
        /// Field fixture to verify; when absent, seeded random fields.
        #[arg(long)]
        field: Option<String>,
        /// Number of seeded random fields when no fixture is given.
        #[arg(long, default_value_t = 1)]
        random: usize,
    },
    /// Intertwining defect of a field action on open strings per level.
    ActionCheck {
        input: Option<String>,
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 3)]
        max_level: usize,
    },
}

#[derive(Serialize)]
struct Report<P: Serialize> {
    schema: &'static str,
    command: String,
    seed: u64,
    tol: f64,
    #[serde(flatten)]
    payload: P,
}

struct Outcome {
    exit: u8,
    report: serde_json::Value,
    summary: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.report)
                .expect("report serialization is infallible");
            let text = format!("{text}\n");
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(3);
                }
            } else {
                print!("{text}");
            }
            eprintln!("{}", outcome.summary);
            ExitCode::from(outcome.exit)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

/// Resolves an input argument to file contents; `-` or nothing reads stdin,
/// relative paths fall back to the directory named by BICONNECT_FIXTURES.
fn read_input(arg: Option<&str>) -> Result<(String, String), Error> {
    match arg {
        None | Some("-") => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            Ok((buf, "<stdin>".to_string()))
        }
        Some(path) => {
            let p = Path::new(path);
            let resolved = if p.exists() {
                p.to_path_buf()
            } else if p.is_relative() {
                match std::env::var(FIXTURES_ENV) {
                    Ok(dir) => Path::new(&dir).join(p),
                    Err(_) => p.to_path_buf(),
                }
            } else {
                p.to_path_buf()
            };
            let text = std::fs::read_to_string(&resolved)?;
            Ok((text, resolved.display().to_string()))
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, source: &str) -> Result<T, Error> {
    serde_json::from_str(text).map_err(|e| Error::Fixture(format!("{source}: {e}")))
}

fn load_config(arg: Option<&str>) -> Result<biconnect::FourGraphConfig, Error> {
    let (text, source) = read_input(arg)?;
    let json: ConfigJson = parse_json(&text, &source)?;
    let (cfg, _) = config_from_json::<f64>(&json)?;
    Ok(cfg)
}

fn load_connection(arg: Option<&str>) -> Result<Connection64, Error> {
    let (text, source) = read_input(arg)?;
    let json: ConnectionJson = parse_json(&text, &source)?;
    let base = match arg {
        Some(p) if Path::new(p).exists() => Path::new(p).parent().map(Path::to_path_buf),
        _ => None,
    };
    connection_from_json::<f64>(&json, base.as_deref())
}

fn report_value<P: Serialize>(cli: &Cli, command: &str, payload: P) -> serde_json::Value {
    serde_json::to_value(Report {
        schema: REPORT_SCHEMA,
        command: command.to_string(),
        seed: cli.seed,
        tol: cli.tol,
        payload,
    })
    .expect("report serialization is infallible")
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    match &cli.command {
        Command::Example { id } => run_example(cli, id),
        Command::Validate { input } => run_validate(cli, input.as_deref()),
        Command::Pf { input } => run_pf(cli, input.as_deref()),
        Command::CheckBiunitary { input } => run_check_biunitary(cli, input.as_deref()),
        Command::Renorm { mode, input } => run_renorm(cli, mode, input.as_deref()),
        Command::Product { first, second } => run_pairwise(cli, first, second, true),
        Command::Dsum { first, second } => run_pairwise(cli, first, second, false),
        Command::Irreducible { input } => run_irreducible(cli, input.as_deref()),
        Command::FlatFields { input } => run_flat_fields(cli, input.as_deref()),
        Command::TheoremVerify { input, field, random } => {
            run_theorem_verify(cli, input.as_deref(), field.as_deref(), *random)
        }
        Command::ActionCheck { input, field, max_level } => {
            run_action_check(cli, input.as_deref(), field, *max_level)
        }
    }
}

fn run_example(_cli: &Cli, id: &str) -> Result<Outcome, Error> {
    // fourier(n) emits a full connection fixture; the other ids emit
    // configurations with their computed weights.
    if let Some(rest) = id.strip_prefix("fourier") {
        let n: usize = rest
            .trim_matches(|c| c == '(' || c == ')')
            .parse()
            .map_err(|_| Error::UnknownExample(id.to_string()))?;
        let w = hadamard_connection(&fourier_matrix::<f64>(n))?;
        let json = connection_to_json(&w);
        return Ok(Outcome {
            exit: 0,
            report: serde_json::to_value(&json)?,
            summary: format!("fourier({n}) connection fixture"),
        });
    }
    let example: ExampleId = id.parse()?;
    let cfg = builtin_example(&example)?;
    let pf = compute_pf::<f64>(&cfg, default_pf_tol::<f64>())?;
    let json = config_to_json(&cfg, Some(&pf));
    Ok(Outcome {
        exit: 0,
        report: serde_json::to_value(&json)?,
        summary: format!("configuration fixture for {id}"),
    })
}

fn run_validate(cli: &Cli, input: Option<&str>) -> Result<Outcome, Error> {
    let cfg = load_config(input)?;
    let report = validate_config(&cfg)?;
    #[derive(Serialize)]
    struct Payload {
        pass: bool,
        warned: bool,
        checks: biconnect::ValidationReport,
    }
    let pass = report.passed();
    let warned = report.warned();
    let summary = format!(
        "validate: {}{}",
        if pass { "pass" } else { "fail" },
        if warned { " (with warnings)" } else { "" }
    );
    Ok(Outcome {
        exit: u8::from(!pass),
        report: report_value(cli, "validate", Payload { pass, warned, checks: report }),
        summary,
    })
}

fn run_pf(cli: &Cli, input: Option<&str>) -> Result<Outcome, Error> {
    let cfg = load_config(input)?;
    validate_config(&cfg)?;
    #[derive(Serialize)]
    struct Payload {
        pass: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        beta0: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        beta1: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        mu: Option<std::collections::BTreeMap<String, Vec<f64>>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        worst_residual: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    }
    match compute_pf::<f64>(&cfg, cli.tol.max(default_pf_tol::<f64>())) {
        Ok(pf) => {
            let mut mu = std::collections::BTreeMap::new();
            for layer in Layer::ALL {
                mu.insert(layer.to_string(), pf.mu_layer(layer).to_vec());
            }
            let (worst, _) = worst_balance_residual(&cfg, &pf);
            let summary = format!("pf: beta0 = {:.9}, beta1 = {:.9}", pf.beta0, pf.beta1);
            Ok(Outcome {
                exit: 0,
                report: report_value(
                    cli,
                    "pf",
                    Payload {
                        pass: true,
                        beta0: Some(pf.beta0),
                        beta1: Some(pf.beta1),
                        mu: Some(mu),
                        worst_residual: Some(worst),
                        error: None,
                    },
                ),
                summary,
            })
        }
        Err(e @ (Error::InconsistentWeights { .. } | Error::NonConvergence(_))) => Ok(Outcome {
            exit: 1,
            report: report_value(
                cli,
                "pf",
                Payload {
                    pass: false,
                    beta0: None,
                    beta1: None,
                    mu: None,
                    worst_residual: None,
                    error: Some(e.to_string()),
                },
            ),
            summary: format!("pf: fail ({e})"),
        }),
        Err(e) => Err(e),
    }
}

fn run_check_biunitary(cli: &Cli, input: Option<&str>) -> Result<Outcome, Error> {
    let w = load_connection(input)?;
    let report = check_biunitarity(&w, cli.tol);
    #[derive(Serialize)]
    struct Payload {
        pass: bool,
        worst_defect: f64,
        checks: biconnect::ValidationReport,
    }
    let pass = report.passed();
    let worst = report.worst_defect();
    Ok(Outcome {
        exit: u8::from(!pass),
        report: report_value(
            cli,
            "check-biunitary",
            Payload { pass, worst_defect: worst, checks: report },
        ),
        summary: format!(
            "check-biunitary: {} (worst defect {worst:.3e})",
            if pass { "pass" } else { "fail" }
        ),
    })
}

fn run_renorm(_cli: &Cli, mode: &str, input: Option<&str>) -> Result<Outcome, Error> {
    let w = load_connection(input)?;
    let mode = match mode {
        "prime" => Renormalization::Prime,
        "bar" => Renormalization::Bar,
        _ => Renormalization::BarPrime,
    };
    let out = renormalize(&w, mode);
    let json = connection_to_json(&out);
    Ok(Outcome {
        exit: 0,
        report: serde_json::to_value(&json)?,
        summary: format!("renorm: emitted the {mode:?} renormalization"),
    })
}

fn run_pairwise(
    _cli: &Cli,
    first: &str,
    second: &str,
    is_product: bool,
) -> Result<Outcome, Error> {
    let a = load_connection(Some(first))?;
    let b = load_connection(Some(second))?;
    let (w, name) = if is_product {
        (product(&a, &b)?.connection, "product")
    } else {
        (direct_sum(&a, &b)?, "dsum")
    };
    let json = connection_to_json(&w);
    Ok(Outcome {
        exit: 0,
        report: serde_json::to_value(&json)?,
        summary: format!("{name}: emitted the combined connection"),
    })
}

fn run_irreducible(cli: &Cli, input: Option<&str>) -> Result<Outcome, Error> {
    let w = load_connection(input)?;
    let basis = intertwiner_space(&w, &w, cli.tol)?;
    #[derive(Serialize)]
    struct Payload {
        irreducible: bool,
        self_intertwiner_dimension: usize,
    }
    let dim = basis.len();
    let irreducible = dim == 1;
    Ok(Outcome {
        exit: u8::from(!irreducible),
        report: report_value(
            cli,
            "irreducible",
            Payload { irreducible, self_intertwiner_dimension: dim },
        ),
        summary: format!(
            "irreducible: {} (self-intertwiner dimension {dim})",
            if irreducible { "yes" } else { "no" }
        ),
    })
}

fn run_flat_fields(cli: &Cli, input: Option<&str>) -> Result<Outcome, Error> {
    let w = load_connection(input)?;
    let word = canonical_word(&w)?;
    let basis = solve_flat_fields(&word, cli.tol)?;
    let defects: Vec<f64> = basis
        .iter()
        .map(|f| check_flatness(f, &word, cli.tol).map(|(_, d)| d))
        .collect::<Result<_, _>>()?;
    #[derive(Serialize)]
    struct Payload {
        dimension: usize,
        basis: fixtures::FlatBasisJson,
    }
    let dim = basis.len();
    Ok(Outcome {
        exit: 0,
        report: report_value(
            cli,
            "flat-fields",
            Payload { dimension: dim, basis: flat_basis_to_json(&basis, &defects) },
        ),
        summary: format!("flat-fields: dimension {dim} on the word [a, prime(a)]"),
    })
}

#[derive(Serialize)]
struct SampleVerdict {
    source: String,
    half_zipper: bool,
    zipper: bool,
    half_flat: bool,
    flat: bool,
    agree: bool,
    all_pass: bool,
    defects: [f64; 4],
}

fn run_theorem_verify(
    cli: &Cli,
    input: Option<&str>,
    field: Option<&str>,
    random: usize,
) -> Result<Outcome, Error> {
    let w = load_connection(input)?;
    let word = canonical_word(&w)?;

    let mut samples: Vec<(String, StringField<f64>)> = Vec::new();
    match field {
        Some(path) => {
            let (text, source) = read_input(Some(path))?;
            let json: FieldJson = parse_json(&text, &source)?;
            let (f, gid) = field_from_json::<f64>(&json, w.config())?;
            if gid != GraphId::G1 {
                return Err(Error::Fixture("theorem-verify expects a field on G1".into()));
            }
            samples.push((source, f));
        }
        None => {
            let mut rng = rng_from_seed(cli.seed);
            for k in 0..random.max(1) {
                samples.push((
                    format!("random[{k}]"),
                    random_field::<f64>(&mut rng, word.left_graph()),
                ));
            }
        }
    }

    let evaluate = |(source, f): &(String, StringField<f64>)| -> Result<SampleVerdict, Error> {
        let report = verify_theorem(f, &word, cli.tol)?;
        Ok(SampleVerdict {
            source: source.clone(),
            half_zipper: report.half_zipper,
            zipper: report.zipper,
            half_flat: report.half_flat,
            flat: report.flat,
            agree: report.agree,
            all_pass: report.all_pass(),
            defects: report.defects,
        })
    };
    let verdicts: Vec<SampleVerdict> = if cli.parallel {
        use rayon::prelude::*;
        samples.par_iter().map(evaluate).collect::<Result<_, _>>()?
    } else {
        samples.iter().map(evaluate).collect::<Result<_, _>>()?
    };

    let any_disagree = verdicts.iter().any(|v| !v.agree);
    let all_pass = verdicts.iter().all(|v| v.all_pass);
    let exit = if any_disagree { 2 } else { u8::from(!all_pass) };
    #[derive(Serialize)]
    struct Payload {
        samples: Vec<SampleVerdict>,
        any_disagreement: bool,
        all_pass: bool,
    }
    let summary = if any_disagree {
        "theorem-verify: DISAGREEMENT between the four conditions (internal inconsistency)"
            .to_string()
    } else if all_pass {
        format!("theorem-verify: {} sample(s), all four conditions hold", verdicts.len())
    } else {
        format!(
            "theorem-verify: {} sample(s), conditions agree; at least one sample fails all four",
            verdicts.len()
        )
    };
    Ok(Outcome {
        exit,
        report: report_value(
            cli,
            "theorem-verify",
            Payload { samples: verdicts, any_disagreement: any_disagree, all_pass },
        ),
        summary,
    })
}

fn run_action_check(
    cli: &Cli,
    input: Option<&str>,
    field: &str,
    max_level: usize,
) -> Result<Outcome, Error> {
    let w = load_connection(input)?;
    let (text, source) = read_input(Some(field))?;
    let json: FieldJson = parse_json(&text, &source)?;
    let (f, gid) = field_from_json::<f64>(&json, w.config())?;
    if gid != GraphId::G1 {
        return Err(Error::Fixture("action-check expects a field on G1".into()));
    }
    let mut defects = Vec::new();
    for level in 0..=max_level {
        defects.push(check_action_well_defined(&f, &w, level, cli.tol)?);
    }
    let worst = defects.iter().cloned().fold(0.0f64, f64::max);
    let pass = worst < cli.tol;
    #[derive(Serialize)]
    struct Payload {
        pass: bool,
        worst_defect: f64,
        defects_by_level: Vec<f64>,
        field: FieldJson,
    }
    Ok(Outcome {
        exit: u8::from(!pass),
        report: report_value(
            cli,
            "action-check",
            Payload {
                pass,
                worst_defect: worst,
                defects_by_level: defects,
                field: field_to_json(&f, GraphId::G1),
            },
        ),
        summary: format!(
            "action-check: {} (worst intertwining defect {worst:.3e} through level {max_level})",
            if pass { "pass" } else { "fail" }
        ),
    })
}
