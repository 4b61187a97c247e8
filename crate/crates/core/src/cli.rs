//! The `bigramsey` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::classes::ClassSpec;
use crate::dot;
use crate::error::{Error, Result};
use crate::flim::{build_chain, cached_chain, LimitChain};
use crate::gadgets::{build_gadget, verify_gadget, Flavor, Gadget, GadgetJson};
use crate::oracle::{cross_check, realize, sweep_feasible, RealizationProblem, DEFAULT_BUDGET};
use crate::structures::{induced_substructure, parse_structure, RelStruct, StructureJson};
use crate::tmax::{level_count, level_nodes};
use crate::types::{enumerate_types, skeletons, type_of, Skeleton};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CLASS: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// Largest `T_max` level the `tmax-level` command lists node by node.
const MAX_LISTED_LEVEL: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    /// Sweep whenever the problem is small enough.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Parser)]
#[command(name = "bigramsey", version, about = "Big Ramsey degrees via types of copies in the coding tree T_max")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,

    /// File holding a cached limit chain, reused when it matches the class.
    #[arg(long, global = true)]
    pub chain_cache: Option<PathBuf>,

    /// Cap on oracle search expansions.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, clap::Args)]
pub struct Input {
    /// Class: og, og_<k>, oog, ot, opo, a JSON object, or a path to one.
    #[arg(long)]
    pub class: String,
    /// Structure JSON, inline (starting with '{') or a path.
    #[arg(long)]
    pub structure: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Types of copies of a structure and their number.
    Types {
        #[command(flatten)]
        input: Input,
    },
    /// Every skeleton with the given number of leaves.
    Skeletons {
        #[arg(long)]
        size: usize,
    },
    /// Build the single-splitting gadget of a structure.
    Gadget {
        #[command(flatten)]
        input: Input,
        /// Also verify the gadget.
        #[arg(long)]
        verify: bool,
        /// Depth for raw-sweep confirmation during verification (0 skips).
        #[arg(long, default_value_t = 0)]
        depth: usize,
    },
    /// Verify a gadget given as JSON with "host", or built from a structure.
    VerifyGadget {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0)]
        depth: usize,
    },
    /// Build a witness copy of a structure with a prescribed type.
    Realize {
        #[command(flatten)]
        input: Input,
        /// Skeleton encoding such as "(0: l0 (1: l1 l2))".
        #[arg(long)]
        skeleton: String,
        /// Length of the witness branches.
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Compare the type enumeration with the oracles.
    Oracle {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// When to run the raw sweep as a second oracle.
        #[arg(long, value_enum, default_value = "auto")]
        sweep: SweepMode,
    },
    /// Levels of the limit chain.
    Flim {
        #[arg(long)]
        class: String,
        #[arg(long)]
        depth: usize,
    },
    /// The nodes of one level of T_max.
    TmaxLevel {
        #[arg(long)]
        depth: usize,
    },
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, err) {
        Ok((code, text)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotInClass { .. } => EXIT_CLASS,
        Error::BudgetExceeded(_) => EXIT_BUDGET,
        _ => EXIT_INVALID,
    }
}

fn read_json(arg: &str, what: &str) -> Result<Value> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::invalid(format!("cannot read {what} file {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{what} is not valid JSON: {e}")))
}

pub fn parse_class(arg: &str) -> Result<ClassSpec> {
    match arg {
        "og" => return Ok(ClassSpec::og()),
        "oog" => return Ok(ClassSpec::oog()),
        "ot" => return Ok(ClassSpec::ot()),
        "opo" => return Ok(ClassSpec::opo()),
        _ => {}
    }
    if let Some(k) = arg.strip_prefix("og_") {
        let k: usize = k.parse().map_err(|_| Error::invalid(format!("bad clique bound in {arg}")))?;
        return ClassSpec::og_k(k);
    }
    ClassSpec::from_json(&read_json(arg, "class")?)
}

fn load(input: &Input, err: &mut dyn Write) -> Result<(ClassSpec, Value, RelStruct)> {
    let class = parse_class(&input.class)?;
    let value = read_json(&input.structure, "structure")?;
    let parsed = parse_structure(&value, class.signature())?;
    if !parsed.symmetrized.is_empty() {
        let _ = writeln!(err, "note: added {} reverse pairs to symmetric relations", parsed.symmetrized.len());
    }
    class.require(&parsed.structure)?;
    Ok((class, value, parsed.structure))
}

fn chain_for(cli: &Cli, class: &ClassSpec, depth: usize) -> Result<LimitChain> {
    match &cli.chain_cache {
        Some(path) => cached_chain(class, depth, path),
        None => Ok(build_chain(class, depth)),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("output serializes");
    s.push('\n');
    s
}

fn names(list: &[Skeleton]) -> Vec<String> {
    list.iter().map(ToString::to_string).collect()
}

fn lines(list: &[String]) -> String {
    list.iter().map(|s| format!("{s}\n")).collect()
}

fn execute(cli: &Cli, err: &mut dyn Write) -> Result<(i32, String)> {
    match &cli.command {
        Command::Types { input } => {
            let (class, _, h) = load(input, err)?;
            let types = enumerate_types(&h, &class)?;
            let text = match cli.format {
                Format::Json => to_json(&json!({"count": types.len(), "types": names(&types)})),
                Format::Text => format!("count {}\n{}", types.len(), lines(&names(&types))),
                Format::Dot => dot::skeletons_dot(&types),
            };
            Ok((EXIT_OK, text))
        }
        Command::Skeletons { size } => {
            let all = skeletons(*size)?;
            let text = match cli.format {
                Format::Json => to_json(&json!({"count": all.len(), "types": names(&all)})),
                Format::Text => format!("count {}\n{}", all.len(), lines(&names(&all))),
                Format::Dot => dot::skeletons_dot(&all),
            };
            Ok((EXIT_OK, text))
        }
        Command::Gadget { input, verify, depth } => {
            let (class, _, h) = load(input, err)?;
            let g = build_gadget(&h, &class)?;
            gadget_output(cli, &class, &g, *verify, *depth)
        }
        Command::VerifyGadget { input, depth } => {
            let class = parse_class(&input.class)?;
            let value = read_json(&input.structure, "structure")?;
            let g = match value.get("host") {
                Some(_) => gadget_from_json(&value, &class)?,
                None => {
                    let (class, _, h) = load(input, err)?;
                    build_gadget(&h, &class)?
                }
            };
            gadget_output(cli, &class, &g, true, *depth)
        }
        Command::Realize { input, skeleton, depth } => {
            let (class, _, h) = load(input, err)?;
            let skel: Skeleton = skeleton.parse()?;
            let chain = chain_for(cli, &class, depth.saturating_sub(1))?;
            let problem = RealizationProblem {
                skeleton: skel.clone(),
                target: h.clone(),
                chain: &chain,
                max_depth: *depth,
            };
            let result = realize(&problem)?;
            let (code, payload, text) = match &result {
                Ok(copy) => {
                    let round = type_of(copy)?;
                    (
                        EXIT_OK,
                        json!({"skeleton": skel.to_string(), "realized": true, "copy": copy, "typeOf": round.to_string()}),
                        format!(
                            "{skel}\n{}\n",
                            copy.nodes().iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
                        ),
                    )
                }
                Err(failure) => (
                    EXIT_ASSERTION,
                    json!({"skeleton": skel.to_string(), "realized": false, "failure": failure}),
                    format!("{skel}\nfailed: {}\n", serde_json::to_string(failure).expect("serializes")),
                ),
            };
            let text = match cli.format {
                Format::Json => to_json(&payload),
                Format::Text => text,
                Format::Dot => match &result {
                    Ok(_) => dot::skeletons_dot(std::slice::from_ref(&skel)),
                    Err(_) => return Ok((EXIT_ASSERTION, dot::skeletons_dot(&[]))),
                },
            };
            Ok((code, text))
        }
        Command::Oracle { input, depth, sweep } => {
            let (class, _, h) = load(input, err)?;
            let chain = chain_for(cli, &class, depth.saturating_sub(1))?;
            let run_sweep = match sweep {
                SweepMode::Auto => sweep_feasible(h.size(), *depth),
                SweepMode::Always => true,
                SweepMode::Never => false,
            };
            let report = cross_check(&h, &chain, *depth, cli.budget, run_sweep)?;
            let code = if report.agrees() { EXIT_OK } else { EXIT_ASSERTION };
            let text = match cli.format {
                Format::Json => to_json(&report),
                Format::Text => format!(
                    "enumerated {}\nrealized {}\nmissing {:?}\nextra {:?}\nagrees {}\n",
                    report.enumerated.len(),
                    report.realized.len(),
                    report.missing,
                    report.extra,
                    report.agrees()
                ),
                Format::Dot => dot::skeletons_dot(
                    &report.realized.iter().map(|s| s.parse()).collect::<Result<Vec<Skeleton>>>()?,
                ),
            };
            Ok((code, text))
        }
        Command::Flim { class, depth } => {
            let class = parse_class(class)?;
            let chain = chain_for(cli, &class, *depth)?;
            let text = match cli.format {
                Format::Json => to_json(&json!({
                    "class": class.to_json(),
                    "generator": crate::flim::GENERATOR_VERSION,
                    "depth": depth,
                    "levels": chain.levels().iter().map(StructureJson::from).collect::<Vec<_>>(),
                })),
                Format::Text => chain.levels().iter().enumerate().map(|(n, l)| format!("{n} {l}\n")).collect(),
                Format::Dot => dot::levels_dot(chain.levels(), class.signature()),
            };
            Ok((EXIT_OK, text))
        }
        Command::TmaxLevel { depth } => {
            if *depth > MAX_LISTED_LEVEL {
                return Err(Error::BudgetExceeded(format!(
                    "level {depth} has {} nodes; listing stops at level {MAX_LISTED_LEVEL}",
                    level_count(*depth).map_or("too many".to_string(), |c| c.to_string())
                )));
            }
            let nodes: Vec<String> = level_nodes(*depth).iter().map(ToString::to_string).collect();
            let text = match cli.format {
                Format::Json => to_json(&json!({"level": depth, "count": nodes.len(), "nodes": nodes})),
                Format::Text => lines(&nodes),
                Format::Dot => tree_dot(*depth),
            };
            Ok((EXIT_OK, text))
        }
    }
}

fn gadget_from_json(value: &Value, class: &ClassSpec) -> Result<Gadget> {
    let parsed = parse_structure(value, class.signature())?;
    let host: Vec<usize> = serde_json::from_value(value["host"].clone())?;
    let flavor = match value.get("flavor").and_then(Value::as_str) {
        Some("ot") => Flavor::Ot,
        Some("opo") => Flavor::Opo,
        Some("free") | None => Flavor::Free,
        Some(other) => return Err(Error::invalid(format!("unknown gadget flavor {other}"))),
    };
    let base = induced_substructure(&parsed.structure, &host)?;
    Ok(Gadget {
        base,
        extended: parsed.structure,
        host,
        flavor,
        trivial: value.get("trivial").and_then(Value::as_bool).unwrap_or(false),
    })
}

fn gadget_output(cli: &Cli, class: &ClassSpec, g: &Gadget, verify: bool, depth: usize) -> Result<(i32, String)> {
    let report = if verify {
        let chain = if depth > 0 && sweep_feasible(g.extended.size(), depth) {
            Some(chain_for(cli, class, depth - 1)?)
        } else {
            None
        };
        Some(verify_gadget(g, class, chain.as_ref(), depth)?)
    } else {
        None
    };
    let code = match &report {
        Some(r) if !r.passed => EXIT_ASSERTION,
        _ => EXIT_OK,
    };
    let text = match cli.format {
        Format::Json => match &report {
            Some(r) => to_json(&json!({"gadget": GadgetJson::from(g), "verification": r})),
            None => to_json(&GadgetJson::from(g)),
        },
        Format::Text => {
            let mut t = format!("{} gadget: {}\nhost {:?}\n", g.flavor.name(), g.extended, g.host);
            if let Some(r) = &report {
                t.push_str(&format!("types {}\npassed {}\n", r.types.join(" | "), r.passed));
            }
            t
        }
        Format::Dot => dot::structure_dot("gadget", &g.extended, class.signature(), &g.host),
    };
    Ok((code, text))
}

fn tree_dot(depth: usize) -> String {
    let mut out = String::from("digraph tmax {\n");
    for n in 0..=depth {
        for t in level_nodes(n) {
            let id = |e: &[usize]| format!("\"<{}>\"", e.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
            out.push_str(&format!("  {};\n", id(t.entries())));
            if n > 0 {
                out.push_str(&format!("  {} -> {};\n", id(&t.entries()[..n - 1]), id(t.entries())));
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("bigramsey").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn class_shorthands() {
        assert_eq!(parse_class("og_3").unwrap(), ClassSpec::og_k(3).unwrap());
        assert_eq!(parse_class(r#"{"kind":"ot"}"#).unwrap(), ClassSpec::ot());
        assert!(parse_class("og_x").is_err());
        assert!(parse_class("/nonexistent/class.json").is_err());
    }

    #[test]
    fn triangle_types() {
        let (code, out, _) = call(&["types", "--class", "og", "--structure", r#"{"size":3,"relations":{"R0":[[0,1],[1,2],[0,2]]}}"#]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["count"], 3);
    }

    #[test]
    fn exit_codes() {
        let tri = r#"{"size":3,"relations":{"R0":[[0,1],[1,2],[0,2]]}}"#;
        assert_eq!(call(&["types", "--class", "og_3", "--structure", tri]).0, EXIT_CLASS);
        assert_eq!(call(&["types", "--class", "og", "--structure", "{"]).0, EXIT_INVALID);
        assert_eq!(call(&["frobnicate"]).0, EXIT_INVALID);
        assert_eq!(call(&["tmax-level", "--depth", "12"]).0, EXIT_BUDGET);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn tmax_level_four() {
        let (code, out, _) = call(&["tmax-level", "--depth", "4"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["count"], 24);
        assert_eq!(v["nodes"][23], "<0,1,2,3>");
    }

    fn schema(name: &str) -> Value {
        let text = match name {
            "types" => include_str!("../schemas/types.schema.json"),
            "gadget" => include_str!("../schemas/gadget.schema.json"),
            "gadget-verification" => include_str!("../schemas/gadget-verification.schema.json"),
            "realize" => include_str!("../schemas/realize.schema.json"),
            "oracle" => include_str!("../schemas/oracle.schema.json"),
            "flim" => include_str!("../schemas/flim.schema.json"),
            "tmax-level" => include_str!("../schemas/tmax-level.schema.json"),
            other => panic!("no schema {other}"),
        };
        serde_json::from_str(text).unwrap()
    }

    fn assert_valid(schema_name: &str, output: &str) {
        let validator = jsonschema::validator_for(&schema(schema_name)).unwrap();
        let instance: Value = serde_json::from_str(output).unwrap();
        let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{schema_name}: {errors:?}\n{output}");
    }

    const TRIANGLE: &str = r#"{"size":3,"relations":{"R0":[[0,1],[1,2],[0,2]]}}"#;
    const CHAIN3: &str = r#"{"size":3,"relations":{"R0":[[0,1],[1,2],[0,2]]}}"#;

    fn json_cases() -> Vec<(&'static str, Vec<&'static str>)> {
        vec![
            ("types", vec!["types", "--class", "og", "--structure", TRIANGLE]),
            ("types", vec!["skeletons", "--size", "4"]),
            ("gadget", vec!["gadget", "--class", "opo", "--structure", CHAIN3]),
            ("gadget-verification", vec!["gadget", "--class", "og", "--structure", r#"{"size":1}"#, "--verify", "--depth", "4"]),
            ("gadget-verification", vec!["verify-gadget", "--class", "ot", "--structure", r#"{"size":1}"#]),
            ("realize", vec!["realize", "--class", "og", "--structure", TRIANGLE, "--skeleton", "(0: (1: l0 l1) l2)"]),
            ("realize", vec!["realize", "--class", "og", "--structure", r#"{"size":3,"relations":{"R0":[[0,1],[1,2]]}}"#, "--skeleton", "(0: l0 (1: l1 l2))"]),
            ("oracle", vec!["oracle", "--class", "og", "--structure", TRIANGLE, "--depth", "5"]),
            ("oracle", vec!["oracle", "--class", "og", "--structure", TRIANGLE, "--depth", "2"]),
            ("flim", vec!["flim", "--class", "opo", "--depth", "4"]),
            ("tmax-level", vec!["tmax-level", "--depth", "3"]),
        ]
    }

    #[test]
    fn json_outputs_match_schemas() {
        for (name, args) in json_cases() {
            let (code, out, err) = call(&args);
            assert!(code == EXIT_OK || code == EXIT_ASSERTION, "{args:?}: {code} {err}");
            assert_valid(name, &out);
        }
        let types = jsonschema::validator_for(&schema("types")).unwrap();
        assert!(!types.is_valid(&serde_json::json!({"count": 1, "types": ["(0 l0 l1)"]})));
        assert!(!types.is_valid(&serde_json::json!({"count": "1", "types": []})));
        let oracle = jsonschema::validator_for(&schema("oracle")).unwrap();
        assert!(!oracle.is_valid(&serde_json::json!({"enumerated": []})));
    }

    #[test]
    fn outputs_are_deterministic() {
        for (_, args) in json_cases() {
            assert_eq!(call(&args), call(&args), "{args:?}");
        }
    }

    #[test]
    fn command_examples() {
        let (code, out, _) = call(&["types", "--class", "ot", "--structure", r#"{"size":1}"#]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out, "{\"count\":1,\"types\":[\"l0\"]}\n");

        let (_, out, _) = call(&["gadget", "--class", "og", "--structure", r#"{"size":2,"relations":{"R0":[[0,1]]}}"#]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["size"], 5);
        assert_eq!(v["relations"]["R0"], serde_json::json!([[0, 2], [1, 3], [2, 0], [2, 4], [3, 1], [4, 2]]));

        let (code, out, _) = call(&["verify-gadget", "--class", "ot", "--structure", r#"{"size":1}"#]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["verification"]["types"], serde_json::json!(["(0: l0 l1 l2)"]));

        let path = r#"{"size":3,"relations":{"R0":[[0,1],[1,2]]}}"#;
        let (code, out, _) = call(&["oracle", "--class", "og", "--structure", path, "--depth", "6"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["realized"], serde_json::json!(["(0: l0 l1 l2)"]));
        assert_eq!(v["enumerated"], v["realized"]);

        let (code, _, _) = call(&["oracle", "--class", "og", "--structure", TRIANGLE, "--depth", "2"]);
        assert_eq!(code, EXIT_ASSERTION);

        let (code, out, _) = call(&["realize", "--class", "og", "--structure", TRIANGLE, "--skeleton", "(0: (1: l0 l1) l2)"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["typeOf"], "(0: (1: l0 l1) l2)");
    }

    #[test]
    fn gadget_json_round_trips_through_verify() {
        let (_, out, _) = call(&["gadget", "--class", "opo", "--structure", r#"{"size":2}"#]);
        let (code, verified, _) = call(&["verify-gadget", "--class", "opo", "--structure", out.trim()]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&verified).unwrap();
        assert_eq!(v["verification"]["passed"], true);
        assert_eq!(v["gadget"]["size"], 7);
        // an edge posing as a gadget fails the single-splitting check
        let fake = r#"{"size":3,"relations":{"R0":[[0,1]]},"host":[2],"flavor":"free"}"#;
        assert_eq!(call(&["verify-gadget", "--class", "og", "--structure", fake]).0, EXIT_ASSERTION);
    }

    #[test]
    fn golden_chains() {
        let goldens = [
            ("og", include_str!("../tests/fixtures/flim-og-3.json"), include_str!("../tests/fixtures/flim-og-8.json")),
            ("og_3", include_str!("../tests/fixtures/flim-og_3-3.json"), include_str!("../tests/fixtures/flim-og_3-8.json")),
            ("oog", include_str!("../tests/fixtures/flim-oog-3.json"), include_str!("../tests/fixtures/flim-oog-8.json")),
            ("ot", include_str!("../tests/fixtures/flim-ot-3.json"), include_str!("../tests/fixtures/flim-ot-8.json")),
            ("opo", include_str!("../tests/fixtures/flim-opo-3.json"), include_str!("../tests/fixtures/flim-opo-8.json")),
        ];
        for (class, three, eight) in goldens {
            assert_eq!(call(&["flim", "--class", class, "--depth", "3"]).1, three, "{class}");
            assert_eq!(call(&["flim", "--class", class, "--depth", "8"]).1, eight, "{class}");
        }
    }

    #[test]
    fn chain_cache_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("chain.json");
        let cache = cache.to_str().unwrap();
        let first = call(&["--chain-cache", cache, "flim", "--class", "ot", "--depth", "5"]);
        assert!(std::path::Path::new(cache).exists());
        let again = call(&["--chain-cache", cache, "flim", "--class", "ot", "--depth", "3"]);
        assert_eq!(again.1, call(&["flim", "--class", "ot", "--depth", "3"]).1);
        assert_eq!(first.1, call(&["flim", "--class", "ot", "--depth", "5"]).1);
        // a cache for another class is rebuilt, not misused
        let other = call(&["--chain-cache", cache, "flim", "--class", "og", "--depth", "3"]);
        assert_eq!(other.1, call(&["flim", "--class", "og", "--depth", "3"]).1);
    }

    /// A recursive-descent reader for the Graphviz language (without ports
    /// and HTML labels), enough to reject malformed output.
    mod dot_grammar {
        #[derive(Debug, PartialEq, Clone)]
        enum Tok {
            Id(String),
            Sym(char),
            Edge(&'static str),
        }

        fn lex(src: &str) -> Result<Vec<Tok>, String> {
            let chars: Vec<char> = src.chars().collect();
            let mut i = 0;
            let mut out = Vec::new();
            while i < chars.len() {
                let c = chars[i];
                if c.is_whitespace() {
                    i += 1;
                } else if "{}[];=,:".contains(c) {
                    out.push(Tok::Sym(c));
                    i += 1;
                } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                    out.push(Tok::Edge("->"));
                    i += 2;
                } else if c == '-' && chars.get(i + 1) == Some(&'-') {
                    out.push(Tok::Edge("--"));
                    i += 2;
                } else if c == '"' {
                    let mut s = String::new();
                    i += 1;
                    loop {
                        match chars.get(i) {
                            None => return Err("unterminated string".into()),
                            Some('\\') => {
                                s.push(*chars.get(i + 1).ok_or("dangling escape")?);
                                i += 2;
                            }
                            Some('"') => {
                                i += 1;
                                break;
                            }
                            Some(&ch) => {
                                s.push(ch);
                                i += 1;
                            }
                        }
                    }
                    out.push(Tok::Id(s));
                } else if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                        i += 1;
                    }
                    if i == start {
                        return Err(format!("stray {c:?}"));
                    }
                    let word: String = chars[start..i].iter().collect();
                    let numeral = word.chars().all(|ch| ch.is_ascii_digit() || ch == '.');
                    if !numeral && word.starts_with(|ch: char| ch.is_ascii_digit()) {
                        return Err(format!("bad identifier {word}"));
                    }
                    out.push(Tok::Id(word));
                } else {
                    return Err(format!("unexpected character {c:?}"));
                }
            }
            Ok(out)
        }

        struct P {
            toks: Vec<Tok>,
            at: usize,
            edge: &'static str,
        }

        impl P {
            fn peek(&self) -> Option<&Tok> {
                self.toks.get(self.at)
            }
            fn eat(&mut self, t: &Tok) -> bool {
                if self.peek() == Some(t) {
                    self.at += 1;
                    true
                } else {
                    false
                }
            }
            fn expect(&mut self, t: Tok) -> Result<(), String> {
                if self.eat(&t) {
                    Ok(())
                } else {
                    Err(format!("expected {t:?} at token {}, found {:?}", self.at, self.peek()))
                }
            }
            fn id(&mut self) -> Result<String, String> {
                match self.peek().cloned() {
                    Some(Tok::Id(s)) => {
                        self.at += 1;
                        Ok(s)
                    }
                    other => Err(format!("expected identifier, found {other:?}")),
                }
            }
            fn keyword(&self, k: &str) -> bool {
                matches!(self.peek(), Some(Tok::Id(s)) if s.eq_ignore_ascii_case(k))
            }
            fn attr_list(&mut self) -> Result<(), String> {
                while self.eat(&Tok::Sym('[')) {
                    while !self.eat(&Tok::Sym(']')) {
                        self.id()?;
                        self.expect(Tok::Sym('='))?;
                        self.id()?;
                        let _ = self.eat(&Tok::Sym(',')) || self.eat(&Tok::Sym(';'));
                    }
                }
                Ok(())
            }
            fn subgraph(&mut self) -> Result<(), String> {
                if self.keyword("subgraph") {
                    self.at += 1;
                    if matches!(self.peek(), Some(Tok::Id(_))) {
                        self.at += 1;
                    }
                }
                self.expect(Tok::Sym('{'))?;
                self.stmt_list()?;
                self.expect(Tok::Sym('}'))
            }
            fn operand(&mut self) -> Result<(), String> {
                if self.keyword("subgraph") || self.peek() == Some(&Tok::Sym('{')) {
                    self.subgraph()
                } else {
                    self.id().map(drop)
                }
            }
            fn stmt(&mut self) -> Result<(), String> {
                if self.keyword("graph") || self.keyword("node") || self.keyword("edge") {
                    self.at += 1;
                    if self.peek() != Some(&Tok::Sym('[')) {
                        return Err("attribute statement needs a list".into());
                    }
                    return self.attr_list();
                }
                let simple_id = matches!(self.peek(), Some(Tok::Id(_))) && !self.keyword("subgraph");
                self.operand()?;
                if simple_id && self.eat(&Tok::Sym('=')) {
                    return self.id().map(drop);
                }
                let mut edges = 0;
                while let Some(Tok::Edge(op)) = self.peek().cloned() {
                    if op != self.edge {
                        return Err(format!("edge operator {op} in a graph using {}", self.edge));
                    }
                    self.at += 1;
                    self.operand()?;
                    edges += 1;
                }
                if edges == 0 && !simple_id {
                    // a bare subgraph is a statement of its own
                    return Ok(());
                }
                self.attr_list()
            }
            fn stmt_list(&mut self) -> Result<(), String> {
                while !matches!(self.peek(), Some(Tok::Sym('}')) | None) {
                    self.stmt()?;
                    let _ = self.eat(&Tok::Sym(';'));
                }
                Ok(())
            }
        }

        pub fn parse(src: &str) -> Result<(), String> {
            let toks = lex(src)?;
            let mut p = P { toks, at: 0, edge: "--" };
            if p.keyword("strict") {
                p.at += 1;
            }
            if p.keyword("digraph") {
                p.edge = "->";
            } else if !p.keyword("graph") {
                return Err("expected graph or digraph".into());
            }
            p.at += 1;
            if matches!(p.peek(), Some(Tok::Id(_))) {
                p.at += 1;
            }
            p.expect(Tok::Sym('{'))?;
            p.stmt_list()?;
            p.expect(Tok::Sym('}'))?;
            if p.at != p.toks.len() {
                return Err("trailing tokens".into());
            }
            Ok(())
        }

        #[test]
        fn grammar_rejects_broken_input() {
            assert!(parse("digraph g { a -> b; }").is_ok());
            assert!(parse("digraph g { a -> b [label=\"x\", dir=none]; subgraph cluster_0 { c; } }").is_ok());
            for bad in ["digraph g { a -> ; }", "graph g { a -> b }", "digraph { a [label=] }", "digraph g { a", "digraph g { \"x }", "digraph g { 1a; }"] {
                assert!(parse(bad).is_err(), "{bad}");
            }
        }
    }

    #[test]
    fn dot_outputs_parse() {
        let cases: Vec<Vec<&str>> = vec![
            vec!["types", "--class", "og", "--structure", TRIANGLE],
            vec!["skeletons", "--size", "4"],
            vec!["gadget", "--class", "ot", "--structure", r#"{"size":2,"relations":{"R0":[[1,0]]}}"#],
            vec!["gadget", "--class", "og", "--structure", TRIANGLE],
            vec!["realize", "--class", "og", "--structure", TRIANGLE, "--skeleton", "(0: l0 (1: l1 l2))"],
            vec!["oracle", "--class", "og", "--structure", TRIANGLE, "--depth", "4"],
            vec!["flim", "--class", "ot", "--depth", "4"],
            vec!["tmax-level", "--depth", "3"],
        ];
        for mut args in cases {
            args.extend(["--format", "dot"]);
            let (code, out, err) = call(&args);
            assert!(code == EXIT_OK || code == EXIT_ASSERTION, "{args:?}: {err}");
            dot_grammar::parse(&out).unwrap_or_else(|e| panic!("{args:?}: {e}\n{out}"));
        }
    }

    #[test]
    fn text_outputs() {
        let (_, out, _) = call(&["types", "--class", "og", "--structure", TRIANGLE, "--format", "text"]);
        assert!(out.starts_with("count 3\n"));
        let (_, out, _) = call(&["tmax-level", "--depth", "2", "--format", "text"]);
        assert_eq!(out, "<0,0>\n<0,1>\n");
    }
}
