use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use li2::clarkson::{detect_redundancies, detect_redundancies_with_point, ClarksonError, Redundancy, RedundancyReport};
use li2::fourier_motzkin::{oracle_implicit_equality, oracle_redundant, oracle_solve};
use li2::generate::{generate, GenSpec};
use li2::hochbaum_naor::{hn_solve, HnResult, Mode};
use li2::io::{parse_ine, parse_li2, write_li2};
use li2::{Li2System, RowId, Scalar, Var};

const OK: u8 = 0;
const INFEASIBLE: u8 = 1;
const USAGE: u8 = 2;
const INTERNAL: u8 = 3;

const ORACLE_MAX_D: usize = 6;
const ORACLE_MAX_N: usize = 40;

#[derive(Parser)]
#[command(name = "li2", version, about = "Exact solver for linear systems with two variables per inequality")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Decide feasibility and print a solution
    Check { file: PathBuf },
    /// Find a point satisfying every row strictly
    Interior { file: PathBuf },
    /// Find a relative interior point
    Relint { file: PathBuf },
    /// Dimension of the solution set
    Dim { file: PathBuf },
    /// Classify every row as nonredundant, redundant or implicit equality
    Redundancy {
        file: PathBuf,
        /// known interior point, e.g. "1/2,0,3"
        #[arg(long)]
        point: Option<String>,
    },
    /// Write a random instance
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        pin: usize,
        #[arg(long, default_value_t = 0)]
        planted: usize,
        #[arg(long, default_value_t = 0.7)]
        coupling: f64,
        #[arg(long, default_value_t = 5)]
        range: i64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Brute-force reference computations for small inputs
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    Redundancy {
        file: PathBuf,
        /// run even above the size limits
        #[arg(long)]
        force: bool,
    },
}

struct Failure(u8, String);

fn load(path: &Path) -> Result<Li2System, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "ine") { parse_ine(&text) } else { parse_li2(&text) };
    parsed.map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))
}

fn point_json(sys: &Li2System, p: &[Scalar]) -> Value {
    Value::Object((0..p.len()).map(|v| (sys.var_name(v), json!(p[v].to_string()))).collect())
}

fn point_text(sys: &Li2System, p: &[Scalar]) -> String {
    (0..p.len()).map(|v| format!("{} = {}\n", sys.var_name(v), p[v])).collect()
}

fn one_based(rows: impl IntoIterator<Item = RowId>) -> Vec<usize> {
    rows.into_iter().map(|r| r + 1).collect()
}

fn join(rows: &[usize]) -> String {
    rows.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

struct Out {
    format: Format,
}

impl Out {
    fn emit(&self, text: String, value: Value) {
        match self.format {
            Format::Text => print!("{text}"),
            Format::Json => println!("{value}"),
        }
    }

    fn infeasible(&self) -> Result<u8, Failure> {
        self.emit("infeasible\n".into(), json!({ "status": "infeasible" }));
        Ok(INFEASIBLE)
    }
}

fn solve(out: &Out, sys: &Li2System, mode: Mode) -> Result<u8, Failure> {
    match hn_solve(sys, mode) {
        HnResult::Infeasible => out.infeasible(),
        HnResult::NotFullDim => {
            out.emit("not full-dimensional\n".into(), json!({ "status": "not_full_dimensional" }));
            Ok(OK)
        }
        HnResult::Feasible(p) => {
            out.emit(format!("feasible\n{}", point_text(sys, &p)), json!({ "status": "feasible", "point": point_json(sys, &p) }));
            Ok(OK)
        }
        HnResult::FullDim(p) => {
            out.emit(
                format!("full-dimensional\n{}", point_text(sys, &p)),
                json!({ "status": "full_dimensional", "point": point_json(sys, &p) }),
            );
            Ok(OK)
        }
        HnResult::RelInt { point, pinned } => {
            let dim = sys.dim() - pinned.len();
            let names: Vec<String> = pinned.keys().map(|&v| sys.var_name(v)).collect();
            out.emit(
                format!("relative interior, dimension {dim}\n{}pinned: {}\n", point_text(sys, &point), names.join(" ")),
                json!({ "status": "relative_interior", "dimension": dim, "point": point_json(sys, &point), "pinned": names }),
            );
            Ok(OK)
        }
    }
}

fn report(out: &Out, r: &RedundancyReport) {
    let nonred = one_based(r.nonredundant.iter().copied());
    let red = one_based(r.redundant.iter().copied());
    let basis = one_based(r.equality_basis.iter().copied());
    let tight = one_based(r.tight_rows.iter().copied());
    let dups: BTreeMap<String, usize> = r.duplicates.iter().map(|(k, v)| ((k + 1).to_string(), v + 1)).collect();
    let dup_text: Vec<String> = r.duplicates.iter().map(|(k, v)| format!("{}->{}", k + 1, v + 1)).collect();
    let mut status = serde_json::Map::new();
    for row in r.nonredundant.iter().chain(&r.redundant).chain(&r.tight_rows).chain(r.duplicates.keys()) {
        let s = r.row_status(*row).expect("reported row");
        status.insert((row + 1).to_string(), serde_json::to_value(s).unwrap());
    }
    out.emit(
        format!(
            "dimension {}\nnonredundant {}\nredundant {}\nduplicates {}\nequality_basis {}\ntight {}\n",
            r.dimension,
            join(&nonred),
            join(&red),
            dup_text.join(" "),
            join(&basis),
            join(&tight)
        ),
        json!({
            "status": "ok",
            "dimension": r.dimension,
            "nonredundant": nonred,
            "redundant": red,
            "duplicates": dups,
            "equality_basis": basis,
            "tight_rows": tight,
            "row_status": status,
        }),
    );
}

fn clarkson_failure(e: ClarksonError) -> Failure {
    match e {
        ClarksonError::PreconditionViolated(m) => Failure(USAGE, m),
        e => Failure(INTERNAL, e.to_string()),
    }
}

fn parse_point(s: &str, d: usize) -> Result<Vec<Scalar>, Failure> {
    let p: Vec<Scalar> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|e| Failure(USAGE, format!("--point: {e}"))))
        .collect::<Result<_, _>>()?;
    if p.len() != d {
        return Err(Failure(USAGE, format!("--point has {} coordinates, expected {d}", p.len())));
    }
    Ok(p)
}

fn oracle_redundancy(out: &Out, sys: &Li2System, force: bool) -> Result<u8, Failure> {
    if !force && (sys.dim() > ORACLE_MAX_D || sys.len() > ORACLE_MAX_N) {
        return Err(Failure(
            USAGE,
            format!("oracle limited to d <= {ORACLE_MAX_D} and n <= {ORACLE_MAX_N}; pass --force to run anyway"),
        ));
    }
    if !oracle_solve(sys).is_feasible() {
        return out.infeasible();
    }
    let mut text = String::new();
    let mut rows = serde_json::Map::new();
    let mut ids = sys.row_ids();
    ids.sort_unstable();
    for id in ids {
        let class = if oracle_implicit_equality(sys, id).unwrap() {
            "implicit_equality"
        } else if oracle_redundant(sys, id).unwrap() {
            "redundant"
        } else {
            "nonredundant"
        };
        text.push_str(&format!("{} {class}\n", id + 1));
        rows.insert((id + 1).to_string(), json!(class));
    }
    out.emit(text, json!({ "status": "ok", "row_status": rows }));
    Ok(OK)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let out = Out { format: cli.format };
    match cli.command {
        Command::Check { file } => solve(&out, &load(&file)?, Mode::Feasible),
        Command::Interior { file } => solve(&out, &load(&file)?, Mode::Interior),
        Command::Relint { file } => solve(&out, &load(&file)?, Mode::Relint),
        Command::Dim { file } => {
            let sys = load(&file)?;
            match li2::hochbaum_naor::dimension(&sys) {
                Some(k) => {
                    out.emit(format!("{k}\n"), json!({ "status": "ok", "dimension": k }));
                    Ok(OK)
                }
                None => out.infeasible(),
            }
        }
        Command::Redundancy { file, point } => {
            let sys = load(&file)?;
            let r = match point {
                Some(p) => detect_redundancies_with_point(&sys, &parse_point(&p, sys.dim())?).map_err(clarkson_failure)?,
                None => match detect_redundancies(&sys).map_err(clarkson_failure)? {
                    Redundancy::Infeasible => return out.infeasible(),
                    Redundancy::Report(r) => r,
                },
            };
            report(&out, &r);
            Ok(OK)
        }
        Command::Generate { seed, n, d, pin, planted, coupling, range, output } => {
            let spec = GenSpec {
                coupling_prob: coupling,
                planted_redundant: planted,
                coefficient_range: range,
                pin_vars: pin,
                ..GenSpec::new(seed, n, d)
            };
            let (sys, meta) = generate(&spec).map_err(|e| Failure(USAGE, e.to_string()))?;
            let mut text = format!("# generated with seed {seed}\n");
            text.push_str(&format!(
                "# anchor {}\n",
                meta.anchor.iter().map(Scalar::to_string).collect::<Vec<_>>().join(",")
            ));
            text.push_str(&write_li2(&sys));
            std::fs::write(&output, text).map_err(|e| Failure(USAGE, format!("{}: {e}", output.display())))?;
            let pinned: Vec<Var> = meta.pinned.iter().map(|v| v + 1).collect();
            out.emit(
                format!("wrote {} rows to {}\n", sys.len(), output.display()),
                json!({
                    "status": "ok",
                    "rows": sys.len(),
                    "anchor": point_json(&sys, &meta.anchor),
                    "planted": one_based(meta.planted.iter().copied()),
                    "pinned": pinned,
                }),
            );
            Ok(OK)
        }
        Command::Oracle { command: OracleCommand::Redundancy { file, force } } => {
            oracle_redundancy(&out, &load(&file)?, force)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    let json = cli.format == Format::Json;
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(Failure(code, msg))) => {
            if json {
                println!("{}", json!({ "status": "error", "message": msg }));
            }
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
        Err(_) => ExitCode::from(INTERNAL),
    }
}
