use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use branchsys::alignment::{
    align_bases, check_b2b, extract_branching_system, random_representation, verify_equivalence,
    ConcreteRepresentation, Mixing, Tolerances,
};
use branchsys::branching::{synthesize, validate, DiscreteBranchingSystem};
use branchsys::export::{complex_coordinate, real_coordinate};
use branchsys::families;
use branchsys::graph::{parse_graph, DirectedGraph, VertexId};
use branchsys::operators::{induce, to_matrix, verify_ck, DEFAULT_MATRIX_LIMIT};
use branchsys::structure::analyze;
use branchsys::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "branchsys", version, about = "Graph structure, branching systems and Cuntz-Krieger families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override a tolerance, e.g. `--tol residual=1e-9`.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
    /// Prefix length for builtin graph families.
    #[arg(long, global = true, value_name = "N")]
    truncate: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Directory receiving the command's artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Components, levels, classification, roles and structural checks.
    Analyze {
        /// Graph file, or `builtin:<example|line|star|path>` with `--truncate`.
        graph: String,
    },
    /// Unit-weight branching system forced by the sink dimensions.
    Synthesize {
        #[arg(long)]
        graph: String,
        /// Dimension of a sink, `VERTEX=N`; repeatable.
        #[arg(long = "sink-dim", value_name = "VERTEX=N")]
        sink_dims: Vec<String>,
        /// Universe indices outside every domain set.
        #[arg(long, default_value_t = 0)]
        slack: usize,
    },
    /// Generator matrices of the induced family and its relation report.
    Induce {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        system: PathBuf,
    },
    /// Validates a branching system or checks the relations of a representation.
    Verify {
        #[arg(long)]
        graph: String,
        #[arg(long, conflicts_with = "representation", required_unless_present = "representation")]
        system: Option<PathBuf>,
        #[arg(long)]
        representation: Option<PathBuf>,
    },
    /// Basis alignment, extracted branching system, unitary and residuals.
    Align {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        representation: PathBuf,
        /// Accept basis matches up to a unit scalar in the B2B report.
        #[arg(long)]
        phase_slack: bool,
    },
    /// Seeded random representation of an acyclic graph.
    Represent {
        #[arg(long)]
        graph: String,
        #[arg(long = "sink-dim", value_name = "VERTEX=N")]
        sink_dims: Vec<String>,
        #[arg(long, default_value_t = 0)]
        complement_dim: usize,
        /// Skip the random rotations.
        #[arg(long)]
        axis_aligned: bool,
    },
}

/// What a command produced: the document printed on stdout, extra files
/// for `--out`, and whether every check passed.
struct Outcome {
    document: Value,
    artifacts: Vec<(String, String)>,
    passed: bool,
}

struct LoadedGraph {
    graph: DirectedGraph,
    boundary: BTreeSet<VertexId>,
}

fn load_graph(source: &str, truncate: Option<usize>) -> anyhow::Result<LoadedGraph> {
    if let Some(family) = source.strip_prefix("builtin:") {
        let n = truncate.context("builtin graph families need --truncate N")?;
        let t = families::by_name(family, n)?;
        return Ok(LoadedGraph {
            graph: t.graph,
            boundary: t.boundary,
        });
    }
    if truncate.is_some() {
        bail!("--truncate applies to builtin graph families only");
    }
    let text = read(Path::new(source))?;
    let graph = parse_graph(&text).with_context(|| format!("parsing {source}"))?;
    Ok(LoadedGraph {
        graph,
        boundary: BTreeSet::new(),
    })
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_pairs<T: std::str::FromStr>(pairs: &[String], what: &str) -> anyhow::Result<Vec<(String, T)>> {
    pairs
        .iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| anyhow!("{what} `{p}` is not of the form NAME=VALUE"))?;
            let v = v
                .parse()
                .map_err(|_| anyhow!("{what} `{p}` has an unparsable value"))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

fn tolerances(common: &Common) -> anyhow::Result<Tolerances> {
    let mut tol = Tolerances::default();
    for (name, value) in parse_pairs::<f64>(&common.tolerances, "tolerance")? {
        tol.set(&name, value)?;
    }
    Ok(tol)
}

fn sink_dims(pairs: &[String]) -> anyhow::Result<BTreeMap<String, usize>> {
    Ok(parse_pairs(pairs, "sink dimension")?.into_iter().collect())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let common = &cli.common;
    let tol = tolerances(common)?;
    match &cli.command {
        Command::Analyze { graph } => {
            let loaded = load_graph(graph, common.truncate)?;
            let analysis = analyze(&loaded.graph);
            let document = analysis.to_json(&loaded.graph, &loaded.boundary);
            Ok(Outcome {
                artifacts: vec![("analysis.json".into(), pretty(&document))],
                passed: analysis.passed(),
                document,
            })
        }
        Command::Synthesize {
            graph,
            sink_dims: dims,
            slack,
        } => {
            let g = load_graph(graph, common.truncate)?.graph;
            let system = synthesize(&g, &sink_dims(dims)?, *slack)?;
            let passed = validate(&system, &g)?.passed();
            let document = serde_json::to_value(&system)?;
            Ok(Outcome {
                artifacts: vec![("system.json".into(), pretty(&document))],
                passed,
                document,
            })
        }
        Command::Induce { graph, system } => {
            let g = load_graph(graph, common.truncate)?.graph;
            let bs = DiscreteBranchingSystem::from_json(&read(system)?)?;
            let family = induce(&bs, &g)?;
            let report = verify_ck(&family, &g);
            let mut artifacts = Vec::new();
            let mut edges = serde_json::Map::new();
            let mut vertices = serde_json::Map::new();
            for e in g.edge_ids() {
                let id = g.edge_name(e);
                let text = real_coordinate(&to_matrix(&family, id, DEFAULT_MATRIX_LIMIT)?);
                artifacts.push((format!("S_{id}.coo"), text.clone()));
                edges.insert(id.to_string(), Value::String(text));
            }
            for v in g.vertices() {
                let id = g.vertex_name(v);
                let text = real_coordinate(&to_matrix(&family, id, DEFAULT_MATRIX_LIMIT)?);
                artifacts.push((format!("P_{id}.coo"), text.clone()));
                vertices.insert(id.to_string(), Value::String(text));
            }
            let report_json = serde_json::to_value(&report)?;
            artifacts.push(("report.json".into(), pretty(&report_json)));
            Ok(Outcome {
                document: json!({"report": report_json, "matrices": {"S": edges, "P": vertices}}),
                artifacts,
                passed: report.passed(),
            })
        }
        Command::Verify {
            graph,
            system,
            representation,
        } => {
            let g = load_graph(graph, common.truncate)?.graph;
            let (document, passed) = if let Some(path) = system {
                let bs = DiscreteBranchingSystem::from_json(&read(path)?)?;
                let conditions = validate(&bs, &g)?;
                let relations = if conditions.passed() {
                    Some(verify_ck(&induce(&bs, &g)?, &g))
                } else {
                    None
                };
                let passed = relations.as_ref().is_some_and(|r| r.passed());
                (json!({"conditions": conditions, "relations": relations, "passed": passed}), passed)
            } else {
                let path = representation.as_ref().expect("clap requires one input");
                let rep = ConcreteRepresentation::from_json(&read(path)?)?;
                let relations = rep.check(&g, tol.ck)?;
                let passed = relations.passed();
                (json!({"relations": relations, "passed": passed}), passed)
            };
            Ok(Outcome {
                artifacts: vec![("verify.json".into(), pretty(&document))],
                passed,
                document,
            })
        }
        Command::Align {
            graph,
            representation,
            phase_slack,
        } => {
            let g = load_graph(graph, common.truncate)?.graph;
            let rep = ConcreteRepresentation::from_json(&read(representation)?)?;
            let tol = Tolerances {
                phase_slack: *phase_slack,
                ..tol
            };
            align(&rep, &g, &tol)
        }
        Command::Represent {
            graph,
            sink_dims: dims,
            complement_dim,
            axis_aligned,
        } => {
            let g = load_graph(graph, common.truncate)?.graph;
            let mixing = if *axis_aligned {
                Mixing::AxisAligned
            } else {
                Mixing::Haar
            };
            let rep = random_representation(&g, &sink_dims(dims)?, *complement_dim, common.seed, mixing)?;
            let document: Value = serde_json::from_str(&rep.to_json())?;
            Ok(Outcome {
                artifacts: vec![("representation.json".into(), rep.to_json() + "\n")],
                passed: rep.check(&g, tol.ck)?.passed(),
                document,
            })
        }
    }
}

fn align(rep: &ConcreteRepresentation, g: &DirectedGraph, tol: &Tolerances) -> anyhow::Result<Outcome> {
    let relations = rep.check(g, tol.ck)?;
    if !relations.passed() {
        let failed: Vec<&str> = relations.failures().map(|c| c.item.as_str()).collect();
        let document = json!({"relations": relations, "failedRelations": failed, "passed": false});
        return Ok(Outcome {
            artifacts: vec![("align.json".into(), pretty(&document))],
            document,
            passed: false,
        });
    }
    let analysis = analyze(g);
    let assignment = match align_bases(rep, g, &analysis, &tol.rank) {
        Ok(a) => a,
        Err(Error::NotApplicable(reason)) => {
            let document = json!({"relations": relations, "notApplicable": reason, "passed": false});
            return Ok(Outcome {
                artifacts: vec![("align.json".into(), pretty(&document))],
                document,
                passed: false,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let b2b = check_b2b(rep, &assignment, g, tol);
    let certificate = extract_branching_system(rep, &assignment, g, tol)?;
    let certificate = verify_equivalence(rep, &certificate, g)?;
    let residuals = certificate.residuals.clone().expect("verified certificate");
    let passed = b2b.passed() && residuals.max() <= tol.residual;
    let unitary = complex_coordinate(&certificate.unitary);
    let system = serde_json::to_value(&certificate.system)?;
    let document = json!({
        "relations": relations,
        "basis": assignment.to_json(g),
        "b2b": b2b,
        "system": system,
        "unitary": unitary,
        "residuals": residuals,
        "maxResidual": residuals.max(),
        "passed": passed,
    });
    Ok(Outcome {
        artifacts: vec![
            ("basis.json".into(), pretty(&document["basis"])),
            ("system.json".into(), pretty(&system)),
            ("unitary.coo".into(), unitary),
            ("residuals.json".into(), pretty(&document["residuals"])),
            ("align.json".into(), pretty(&document)),
        ],
        document,
        passed,
    })
}

/// Indented `key: value` rendering of a JSON document.
fn render_text(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                if is_leaf(x) {
                    out.push_str(&format!("{pad}{k}: {}\n", leaf(x)));
                } else {
                    out.push_str(&format!("{pad}{k}:\n"));
                    render_text(x, indent + 1, out);
                }
            }
        }
        Value::Array(items) => {
            for x in items {
                if is_leaf(x) {
                    out.push_str(&format!("{pad}- {}\n", leaf(x)));
                } else {
                    out.push_str(&format!("{pad}-\n"));
                    render_text(x, indent + 1, out);
                }
            }
        }
        Value::String(s) => {
            for line in s.lines() {
                out.push_str(&format!("{pad}{line}\n"));
            }
        }
        other => out.push_str(&format!("{pad}{other}\n")),
    }
}

fn is_leaf(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|x| !x.is_object() && !x.is_array()),
        Value::Object(map) => map.is_empty(),
        Value::String(s) => !s.contains('\n'),
        _ => true,
    }
}

fn leaf(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(leaf).collect::<Vec<_>>().join(", "),
        Value::Object(_) => "{}".into(),
        other => other.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = &cli.common.out {
        let written = fs::create_dir_all(dir).and_then(|_| {
            outcome
                .artifacts
                .iter()
                .try_for_each(|(name, body)| fs::write(dir.join(name), body))
        });
        if let Err(e) = written {
            eprintln!("error: writing artifacts to {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    match cli.common.format {
        Format::Json => print!("{}", pretty(&outcome.document)),
        Format::Text => {
            let mut out = String::new();
            render_text(&outcome.document, 0, &mut out);
            print!("{out}");
        }
    }
    ExitCode::from(if outcome.passed { 0 } else { 1 })
}
