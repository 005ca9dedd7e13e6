use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use tsl::averages::{
    build_averaging_tree, bundle_norm_bounds, check_averaging_tree, check_restriction, restrict_average, AveragingTree,
    BasisSupply, BuildParams, TreeRules,
};
use tsl::norm::{norm_report, NormConfig};
use tsl::rational::parse_q;
use tsl::report::{merge_reports, reports_from_json};
use tsl::schreier::{enumerate_partitions, rank_slice, FiniteSet};
use tsl::spreading::{classify, p_space_params};
use tsl::suites::{run_suite, SuiteConfig};
use tsl::{BlockVector, SpaceSpec};

#[derive(Parser, Debug)]
#[command(name = "tsl", version, about = "Norms and averages in mixed Tsirelson spaces")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Space spec: a JSON file or inline JSON
    #[arg(long, global = true)]
    spec: Option<String>,

    /// Vector: a JSON file or inline JSON ({"coeffs": {"3": "1"}})
    #[arg(long = "vec", global = true)]
    vector: Option<String>,

    /// Comma-separated set of naturals
    #[arg(long, global = true, value_delimiter = ',')]
    set: Option<Vec<u64>>,

    #[arg(long = "M", global = true)]
    m_level: Option<u32>,

    #[arg(long, global = true)]
    eps: Option<String>,

    #[arg(long, global = true, default_value_t = 100)]
    samples: usize,

    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Support-size cap for exact search
    #[arg(long, global = true, env = "TSL_CAP_OVERRIDE")]
    cap: Option<usize>,

    /// Bits of precision for irrational weights
    #[arg(long, global = true, default_value_t = 64)]
    prec: u32,

    /// Write the JSON result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Norm of a vector
    Norm,
    /// Norm together with an optimal norming functional
    Functional,
    /// Schreier rank of a set
    Rank,
    /// Partitions of a set into blocks
    Partitions {
        #[arg(long)]
        modified: bool,
    },
    /// Build an averaging tree over the unit vector basis
    AverageBuild {
        #[arg(long, default_value_t = 1)]
        start: u64,
        #[arg(long)]
        pow2: bool,
        #[arg(long)]
        error_scale: Option<String>,
        #[arg(long, default_value_t = 1 << 16)]
        max_leaves: usize,
    },
    /// Restrict an averaging tree to the nodes --set on level --level
    AverageRestrict {
        #[arg(long)]
        tree: String,
        #[arg(long)]
        level: usize,
    },
    /// Run a verification suite ("all" runs every suite)
    Verify { suite: String },
    /// p-space parameters and the Class 1 / Class 2 heuristic
    Classify {
        #[arg(long, default_value_t = 1024)]
        horizon: u32,
    },
    /// Merge report files
    ReportMerge { files: Vec<PathBuf> },
}

struct Failure {
    code: u8,
    message: String,
}

fn input_err(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

impl From<tsl::Error> for Failure {
    fn from(e: tsl::Error) -> Self {
        input_err(e.to_string())
    }
}

fn load_json(arg: &str, what: &str) -> Result<Value, Failure> {
    let (text, origin) = if arg.trim_start().starts_with('{') || arg.trim_start().starts_with('[') {
        (arg.to_string(), "inline".to_string())
    } else {
        let t = fs::read_to_string(arg).map_err(|e| input_err(format!("{what}: cannot read {arg}: {e}")))?;
        (t, arg.to_string())
    };
    serde_json::from_str(&text).map_err(|e| input_err(format!("{what} ({origin}): {e}")))
}

fn parse_as<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, Failure> {
    let v = load_json(arg, what)?;
    serde_json::from_value(v).map_err(|e| input_err(format!("{what}: {e}")))
}

fn need<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, Failure> {
    v.as_ref().ok_or_else(|| input_err(format!("missing --{flag}")))
}

fn spec_of(c: &Common) -> Result<SpaceSpec, Failure> {
    let spec: SpaceSpec = parse_as(need(&c.spec, "spec")?, "spec")?;
    spec.validate()?;
    Ok(spec)
}

fn norm_cfg(c: &Common) -> NormConfig {
    NormConfig {
        cap: c.cap,
        prec: c.prec,
        max_height: None,
    }
}

/// Result JSON plus whether a verification failed.
fn run(cli: &Cli) -> Result<(Value, bool), Failure> {
    let c = &cli.common;
    match &cli.command {
        Command::Norm | Command::Functional => {
            let spec = spec_of(c)?;
            let x: BlockVector = parse_as(need(&c.vector, "vec")?, "vec")?;
            let rep = norm_report(&x, &spec, &norm_cfg(c))?;
            let mut out = json!({ "norm": rep.norm });
            if matches!(cli.command, Command::Functional) {
                out["functional"] = serde_json::to_value(&rep.functional).expect("tree serializes");
            }
            if !rep.warnings.is_empty() {
                out["warnings"] = json!(rep.warnings);
            }
            Ok((out, true))
        }
        Command::Rank => {
            let set = FiniteSet::from_unsorted(need(&c.set, "set")?.clone());
            Ok((json!({ "rank": rank_slice(set.elems()) }), true))
        }
        Command::Partitions { modified } => {
            let set = FiniteSet::from_unsorted(need(&c.set, "set")?.clone());
            let modified = *modified || c.spec.is_some() && spec_of(c)?.modified;
            let cap = c.cap.unwrap_or_else(|| tsl::schreier::default_cap(modified));
            let items = enumerate_partitions(&set, modified, cap)?;
            Ok((json!({ "count": items.len(), "partitions": items }), true))
        }
        Command::AverageBuild {
            start,
            pow2,
            error_scale,
            max_leaves,
        } => {
            let m = *need(&c.m_level, "M")?;
            let eps = parse_q(need(&c.eps, "eps")?)?;
            let mut p = BuildParams::new(m, eps);
            p.power_of_two = *pow2;
            p.error_scale = error_scale.as_deref().map(parse_q).transpose()?;
            p.max_leaves = *max_leaves;
            let tree = build_averaging_tree(&mut BasisSupply::from(*start), &p)?;
            let violations = check_averaging_tree(
                &tree,
                &TreeRules {
                    power_of_two: p.power_of_two,
                    error_scale: p.error_scale.clone(),
                },
            );
            let ok = violations.is_empty();
            Ok((json!({ "tree": tree, "violations": violations }), ok))
        }
        Command::AverageRestrict { tree, level } => {
            let v = load_json(tree, "tree")?;
            // accept either a bare tree or the output of average-build
            let v = v.get("tree").cloned().unwrap_or(v);
            let t: AveragingTree = serde_json::from_value(v).map_err(|e| input_err(format!("tree: {e}")))?;
            let idx: Vec<usize> = need(&c.set, "set")?.iter().map(|&i| i as usize).collect();
            let r = restrict_average(&t, *level, &idx)?;
            let violations = check_restriction(&t, *level, &idx, &r);
            let mut out = json!({
                "L": r.root_children,
                "tree": r.tree,
                "violations": violations,
            });
            let mut ok = violations.is_empty();
            if c.spec.is_some() {
                let spec = spec_of(c)?;
                let b = bundle_norm_bounds(&r, &t, &spec, &norm_cfg(c))?;
                ok &= b.iter().all(|e| e.lo() <= &tsl::Q::from_integer(1.into()));
                out["bundle_norm_bounds"] = json!(b);
            }
            Ok((out, ok))
        }
        Command::Verify { suite } => {
            let cfg = SuiteConfig {
                samples: c.samples,
                seed: c.seed,
                m_level: c.m_level,
                norm: norm_cfg(c),
            };
            let merged = merge_reports(run_suite(suite, &cfg)?);
            let pass = merged.pass;
            Ok((serde_json::to_value(&merged).expect("report serializes"), pass))
        }
        Command::Classify { horizon } => {
            let spec = spec_of(c)?;
            let params = p_space_params(&spec.thetas, *horizon, c.prec)?;
            let cl = classify(&params);
            Ok((
                json!({
                    "generator": params.generator,
                    "horizon": params.horizon,
                    "p_space": params.p_space,
                    "p": params.p,
                    "q": params.q,
                    "class": cl.class,
                    "classification": cl,
                    "warnings": params.warnings,
                }),
                true,
            ))
        }
        Command::ReportMerge { files } => {
            let mut all = Vec::new();
            for f in files {
                let v = load_json(&f.to_string_lossy(), "report")?;
                all.extend(reports_from_json(v).map_err(|e| input_err(format!("{}: {e}", f.display())))?);
            }
            let merged = merge_reports(all);
            let pass = merged.pass;
            Ok((serde_json::to_value(&merged).expect("report serializes"), pass))
        }
    }
}

fn emit(v: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(v).expect("json serializes");
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| input_err(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|(v, ok)| {
        emit(&v, cli.common.out.as_deref())?;
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
