use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use subround::concentration::{run_read_k_tail, run_tail_experiment, ReadKFamily, ReadKFamilySpec, ReadKSource, TailExperiment, Tails};
use subround::multiobj::{default_steps, solve, InstanceSpec, MultiObjInstance};
use subround::negdep::{check, JointTable, Notion};
use subround::rounding::{empirical_marginals, exact_outcome_distribution, sample_batch, PairingPolicy, RoundingScheme};
use subround::setfn::{Coverage, CoverageSpec, FractionalVector};
use subround::verify::{run_criterion, CRITERIA};
use subround::Error;

use crate::manifest::{digest, InputDigest, RunManifest};
use crate::{Command, Failure};

/// A point file: a bare array or `{"x": [...]}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum PointFile {
    Bare(Vec<f64>),
    Wrapped { x: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailInstance {
    coverage: CoverageSpec,
    x: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyWithPoint {
    family: ReadKFamilySpec,
    x: Vec<f64>,
}

#[derive(Serialize)]
struct Marginals<'a> {
    trials: u64,
    x: &'a [f64],
    empirical: Vec<f64>,
}

struct Inputs {
    digests: Vec<InputDigest>,
}

impl Inputs {
    fn new() -> Self {
        Inputs { digests: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
        self.digests.push(digest(path, &bytes));
        String::from_utf8(bytes).map_err(|_| Failure::Io(format!("{} is not UTF-8", path.display())))
    }

    fn json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T, Failure> {
        let text = self.read(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Lib(Error::Input(format!("{}: malformed JSON: {e}", path.display()))))
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("results serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// Writes the result and, for file output, its manifest.
fn emit(
    out: &Option<PathBuf>,
    text: &str,
    name: &str,
    argv: &[OsString],
    seed: Option<u64>,
    inputs: Inputs,
    start: Instant,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            write_file(path, text)?;
            let m = RunManifest::new(name, argv, seed, inputs.digests, start.elapsed().as_secs_f64());
            let text = serde_json::to_string_pretty(&m).expect("manifests serialize") + "\n";
            write_file(&RunManifest::path_for(path), &text)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

fn point(v: Vec<f64>) -> Result<FractionalVector, Failure> {
    Ok(FractionalVector::new(v)?)
}

fn scheme(name: &str, x: &FractionalVector, k1: Option<usize>) -> Result<RoundingScheme, Failure> {
    let k1 = k1.or(Some(x.sum().round() as usize));
    Ok(RoundingScheme::from_name(name, x.len(), k1)?)
}

pub(crate) fn run(cmd: &Command, argv: &[OsString]) -> Result<(), Failure> {
    let start = Instant::now();
    let mut inputs = Inputs::new();
    match cmd {
        Command::CheckDependence { input, notion, output } => {
            let notion: Notion = notion.parse()?;
            let text = inputs.read(input)?;
            let table = JointTable::from_json(&text)
                .map_err(|e| Failure::Lib(Error::Input(format!("{}: {}", input.display(), strip(e)))))?;
            let report = check(&table, notion)?;
            emit(&output.out, &to_json(&report), "check-dependence", argv, None, inputs, start)
        }
        Command::Round { input, scheme: name, k1, trials, seed, summary, output } => {
            let x = match inputs.json::<PointFile>(input)? {
                PointFile::Bare(v) | PointFile::Wrapped { x: v } => point(v)?,
            };
            let scheme = scheme(name, &x, *k1)?;
            if *trials == 0 {
                return Err(Error::Input("round needs at least one trial".into()).into());
            }
            let outcomes = sample_batch(&x, &scheme, *trials, *seed)?;
            let mut csv = String::from("trial");
            for i in 0..x.len() {
                write!(csv, ",x{i}").unwrap();
            }
            csv.push('\n');
            for (t, o) in outcomes.iter().enumerate() {
                write!(csv, "{t}").unwrap();
                for &b in o {
                    csv.push_str(if b { ",1" } else { ",0" });
                }
                csv.push('\n');
            }
            let marg = to_json(&Marginals { trials: *trials, x: x.as_slice(), empirical: empirical_marginals(&outcomes) });
            match summary {
                Some(p) => write_file(p, &marg)?,
                None => eprint!("{marg}"),
            }
            emit(&output.out, &csv, "round", argv, Some(*seed), inputs, start)
        }
        Command::Dist { input, output } => {
            let x = match inputs.json::<PointFile>(input)? {
                PointFile::Bare(v) | PointFile::Wrapped { x: v } => point(v)?,
            };
            let d = exact_outcome_distribution(&x, &PairingPolicy::sweep(x.len()))?;
            emit(&output.out, &to_json(&d), "dist", argv, None, inputs, start)
        }
        Command::Tail { input, scheme: name, deltas, trials, seed, output } => {
            let inst: TailInstance = inputs.json(input)?;
            let f = Coverage::from_spec(inst.coverage)?;
            let x = point(inst.x)?;
            let scheme = scheme(name, &x, None)?;
            let report = run_tail_experiment(&TailExperiment {
                f: Arc::new(f),
                x,
                scheme,
                deltas: deltas.clone(),
                trials: *trials,
                seed: *seed,
            })?;
            eprintln!("mu0 = {} (stderr {}), empirical mean = {}", report.mu0, report.mu0_stderr, report.empirical_mean);
            let mut csv = String::from("delta,empirical,stderr,bound,ok\n");
            for r in &report.rows {
                writeln!(csv, "{},{},{},{},{}", fmt_float(r.delta), fmt_float(r.empirical), fmt_float(r.stderr), fmt_float(r.bound), r.ok)
                    .unwrap();
            }
            emit(&output.out, &csv, "tail", argv, Some(*seed), inputs, start)
        }
        Command::Readk { input, scheme: name, eps, tails, trials, seed, output } => {
            // either {"family": ..., "x": ...} or a bare family read at x = 1/2
            let raw: serde_json::Value = inputs.json(input)?;
            let parsed = if raw.get("family").is_some() {
                serde_json::from_value::<FamilyWithPoint>(raw).map(|f| (f.family, Some(f.x)))
            } else {
                serde_json::from_value::<ReadKFamilySpec>(raw).map(|f| (f, None))
            };
            let (spec, x) = parsed.map_err(|e| Failure::Lib(Error::Input(format!("{}: {e}", input.display()))))?;
            let family = ReadKFamily::from_spec(&spec)?;
            let x = point(x.unwrap_or_else(|| vec![0.5; family.m()]))?;
            let source = match name.as_str() {
                "independent" => ReadKSource::Independent(x),
                "srinivasan" => ReadKSource::Srinivasan { policy: PairingPolicy::sweep(x.len()), x },
                "srinivasan-random" => ReadKSource::Srinivasan { x, policy: PairingPolicy::RandomPair },
                other => {
                    return Err(Error::Input(format!(
                        "unknown scheme {other:?} for readk (expected independent, srinivasan or srinivasan-random)"
                    ))
                    .into())
                }
            };
            let tails = match tails.as_str() {
                "upper" => Tails::Upper,
                "lower" => Tails::Lower,
                "both" => Tails::Both,
                other => return Err(Error::Input(format!("unknown tails {other:?} (expected upper, lower or both)")).into()),
            };
            let report = run_read_k_tail(&family, &source, eps, tails, *trials, *seed)?;
            eprintln!("p0 = {}, n = {}, k = {}, empirical mean = {}", report.p0, report.n, report.k, report.empirical_mean);
            let mut csv = String::from("tail,eps,threshold,empirical,stderr,bound,ok\n");
            for r in &report.rows {
                let tail = match r.tail {
                    subround::concentration::Tail::Upper => "upper",
                    subround::concentration::Tail::Lower => "lower",
                };
                writeln!(
                    csv,
                    "{tail},{},{},{},{},{},{}",
                    fmt_float(r.eps),
                    fmt_float(r.threshold),
                    fmt_float(r.empirical),
                    fmt_float(r.stderr),
                    fmt_float(r.bound),
                    r.ok
                )
                .unwrap();
            }
            emit(&output.out, &csv, "readk", argv, Some(*seed), inputs, start)
        }
        Command::SolveFairCoverage { input, seed, steps, eps, output } => {
            let mut spec: InstanceSpec = inputs.json(input)?;
            if let Some(e) = eps {
                spec.eps = *e;
            }
            let inst = MultiObjInstance::from_spec(&spec)?;
            let steps = steps.unwrap_or_else(|| default_steps(inst.eps()));
            let outcome = solve(&inst, steps, *seed)?;
            emit(&output.out, &to_json(&outcome), "solve-fair-coverage", argv, Some(*seed), inputs, start)
        }
        Command::Verify { seed, only, output } => {
            if let Some(bad) = only.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
                return Err(Error::Input(format!("no criterion {bad}; ids run 1..=13")).into());
            }
            let ids: Vec<u8> = CRITERIA.iter().map(|c| c.0).filter(|id| only.is_empty() || only.contains(id)).collect();
            let mut table = String::new();
            let mut passed = 0;
            for id in &ids {
                let report = run_criterion(*id, *seed)?;
                passed += report.passed as usize;
                if output.out.is_some() {
                    eprintln!("{}", report.line());
                }
                writeln!(table, "{}", report.line()).unwrap();
            }
            writeln!(table, "{passed}/{} criteria passed", ids.len()).unwrap();
            emit(&output.out, &table, "verify", argv, Some(*seed), inputs, start)?;
            if passed == ids.len() {
                Ok(())
            } else {
                Err(Failure::Criteria)
            }
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Input(m) | Error::Capacity(m) | Error::Internal(m) => m,
    }
}
