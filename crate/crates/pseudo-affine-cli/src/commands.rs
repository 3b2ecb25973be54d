use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pseudo_affine::analysis::{conjugacy_verdict, ExternalPair};
use pseudo_affine::examples::gen_case_a_s1;
use pseudo_affine::{
    as_proportions, build_branches, build_system, chi_trace, gen_case_a, gen_case_b, livsic_check, periodic_sum_check,
    realize, verify_derivative_identity, Coding, Potential, ProportionPair64, Regularity,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{
    ChiArgs, Cli, Command, ConstructArgs, Example, LivsicArgs, ProportionArgs, RenderArgs, TransferArgs,
};
use crate::error::{CliError, Result};
use crate::render;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a command prints on stdout.
pub enum Output {
    Json(Value),
    Text(String),
}

pub fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Construct(a) => construct(a, &cli.command).map(Output::Json),
        Command::Render(a) => render_cmd(a),
        Command::Livsic(a) => livsic(a, &cli.command).map(Output::Json),
        Command::Chi(a) => chi(a, &cli.command).map(Output::Json),
        Command::Transfer(a) => transfer(a, &cli.command).map(Output::Json),
    }
}

fn report(config: &impl Serialize, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("version".into(), json!(VERSION));
    map.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    if let Value::Object(fields) = body {
        map.extend(fields);
    }
    Value::Object(map)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid JSON: {e}", path.display())))
}

fn load_pair(arg: &str, lambda: f64) -> Result<ProportionPair64> {
    if arg == "zero" {
        Ok(ProportionPair64::constant(lambda)?)
    } else {
        Ok(ProportionPair64::from_json(&read_json(Path::new(arg))?)?)
    }
}

pub fn proportions(args: &ProportionArgs) -> Result<ProportionPair64> {
    let s: Regularity = args.s.parse()?;
    let seq = match args.example {
        None => return load_pair(&args.theta, args.lambda),
        Some(Example::A) => match (s, args.gamma) {
            (Regularity::Finite(1.0), Some(gamma)) => gen_case_a_s1(args.lambda, gamma, 64)?,
            _ => gen_case_a(args.lambda, s, 64)?,
        },
        Some(Example::B) => gen_case_b(args.lambda, s, args.eps0, 64)?,
    };
    Ok(as_proportions(seq))
}

fn out_dir(dir: &Option<PathBuf>) -> Result<Option<&Path>> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
            Ok(Some(d.as_path()))
        }
        None => Ok(None),
    }
}

fn create(path: PathBuf) -> Result<(BufWriter<File>, PathBuf)> {
    let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((BufWriter::new(f), path))
}

fn write_json(path: PathBuf, doc: &Value) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(doc).expect("json serializes") + "\n";
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn lib_io(path: &Path, e: pseudo_affine::Error) -> CliError {
    match e {
        pseudo_affine::Error::Capability(msg) => {
            CliError::io(path, std::io::Error::other(msg))
        }
        other => other.into(),
    }
}

fn construct(a: &ConstructArgs, config: &Command) -> Result<Value> {
    let p = proportions(&a.proportions)?;
    let table = realize(&p, a.depth, a.tol)?;
    let mut files = Vec::new();
    if let Some(dir) = out_dir(&a.out)? {
        let (w, path) = create(dir.join("gaps.csv"))?;
        table.write_csv(w).map_err(|e| lib_io(&path, e))?;
        files.push(path);
        let mut doc = table.to_json();
        if let Ok(pj) = p.to_json() {
            doc["proportions"] = pj;
        }
        files.push(write_json(dir.join("gaps.json"), &doc)?);
    }
    Ok(report(
        config,
        json!({
            "kind": p.kind_name(),
            "lambda": p.lambda(),
            "depth": table.depth(),
            "scale": table.scale(),
            "total": table.total(),
            "tail_bound": table.tail_bound(),
            "sum_error": table.sum_error(),
            "covered": table.covered(),
            "gaps": table.rows().len(),
            "files": files,
        }),
    ))
}

fn render_cmd(a: &RenderArgs) -> Result<Output> {
    if a.depth == 0 {
        return Err(CliError::Usage("render needs --depth >= 1".into()));
    }
    let p = proportions(&a.proportions)?;
    let table = realize(&p, a.depth - 1, a.tol)?;
    let branches = if a.panels { Some(build_branches(&p, a.depth - 1, a.tol)?) } else { None };
    let svg = render::svg(&table, a.depth, a.highlight_spine, branches.as_ref())?;
    match &a.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::write(path, &svg).map_err(|e| CliError::io(path, e))?;
            Ok(Output::Text(format!("{}\n", path.display())))
        }
        None => Ok(Output::Text(svg)),
    }
}

fn livsic(a: &LivsicArgs, config: &Command) -> Result<Value> {
    let r = match a.perturb {
        Some(delta) => {
            let slope = a.proportions.lambda + delta;
            if !(a.proportions.lambda > 0.0 && slope > 0.0 && a.proportions.lambda + slope < 1.0) {
                return Err(CliError::Usage(format!(
                    "perturbed slopes {} and {slope} do not give disjoint contractions",
                    a.proportions.lambda
                )));
            }
            livsic_check(&ExternalPair::affine(a.proportions.lambda, slope), a.maxlen, a.rel_tol)?
        }
        None => {
            let p = proportions(&a.proportions)?;
            let branches = build_branches(&p, a.depth, a.tol)?;
            livsic_check(&branches, a.maxlen, a.rel_tol)?
        }
    };
    let doc = report(config, r.to_json());
    if let Some(dir) = out_dir(&a.out)? {
        write_json(dir.join("livsic.json"), &doc)?;
    }
    Ok(doc)
}

fn chi(a: &ChiArgs, config: &Command) -> Result<Value> {
    let from_file = |arg: &str| -> Result<Option<f64>> {
        if arg == "zero" {
            Ok(None)
        } else {
            Ok(read_json(Path::new(arg))?.get("lambda").and_then(Value::as_f64))
        }
    };
    let lambda = from_file(&a.theta)?.or(from_file(&a.eta)?).unwrap_or(a.lambda);
    let theta = load_pair(&a.theta, lambda)?;
    let eta = load_pair(&a.eta, lambda)?;
    let codings = a.codings.iter().map(|c| c.parse::<Coding>()).collect::<pseudo_affine::Result<Vec<_>>>()?;
    let traces = codings.iter().map(|c| chi_trace(&theta, &eta, c, a.n)).collect::<pseudo_affine::Result<Vec<_>>>()?;
    let verdict = conjugacy_verdict(&traces, a.osc_tol)?;
    let mut files = Vec::new();
    let dir = out_dir(&a.out)?;
    if let Some(dir) = dir {
        for (k, t) in traces.iter().enumerate() {
            let (w, path) = create(dir.join(format!("chi_{k}.csv")))?;
            t.write_csv(w).map_err(|e| lib_io(&path, e))?;
            files.push(path);
        }
    }
    let summary: Vec<Value> =
        traces.iter().map(|t| json!({"coding": t.coding.to_string(), "last": t.last()})).collect();
    let doc = report(
        config,
        json!({
            "verdict": verdict.to_json(),
            "traces": summary,
            "files": files,
        }),
    );
    if let Some(dir) = dir {
        write_json(dir.join("chi.json"), &doc)?;
    }
    Ok(doc)
}

fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse potential value {v:?}"))))
        .collect()
}

pub fn parse_potential(arg: &str) -> Result<Potential<f64>> {
    let (kind, rest) =
        arg.split_once(':').ok_or_else(|| CliError::Usage(format!("potential {arg:?} needs kind:values")))?;
    match kind {
        "const" => match parse_values(rest)?.as_slice() {
            [c] if c.is_finite() => Ok(Potential::Constant(*c)),
            _ => Err(CliError::Usage("const: takes one finite value".into())),
        },
        "digits" => {
            let v = parse_values(rest)?;
            let depth = match v.len() {
                3 => 1,
                9 => 2,
                n => return Err(CliError::Usage(format!("digits: takes 3 or 9 values, got {n}"))),
            };
            Ok(Potential::digits(depth, v)?)
        }
        "cobound" => match parse_values(rest)?.as_slice() {
            [a, b, c] if [a, b, c].iter().all(|x| x.is_finite()) => Ok(Potential::coboundary([*a, *b, *c])),
            _ => Err(CliError::Usage("cobound: takes three finite values".into())),
        },
        other => Err(CliError::Usage(format!("unknown potential kind {other:?}"))),
    }
}

fn transfer(a: &TransferArgs, config: &Command) -> Result<Value> {
    let phi = parse_potential(&a.phi)?;
    let sys = build_system(&phi, a.depth)?;
    let mut body = json!({
        "depth": sys.depth(),
        "pressure": sys.pressure(),
        "eigen_residual": sys.eigen_residual(),
        "transfer_law_residual": sys.transfer_law_residual(),
        "iterations": sys.iterations(),
        "sup_norm": phi.sup_norm(a.depth),
        "small_potential": phi.is_small(a.depth),
    });
    if a.verify {
        let samples = sys.samples(a.samples, a.seed);
        let check = verify_derivative_identity(&sys, &phi, &samples)?;
        body["max_rel_dev"] = json!(check.max_rel_dev);
        body["worst_sample"] = json!(check.worst_sample);
    }
    if let Some(period_max) = a.period_max {
        let r = periodic_sum_check(&phi, period_max)?;
        body["periodic"] = json!({
            "period_max": period_max,
            "max_abs_sum": r.max_abs_sum,
            "worst_orbit": r.worst_orbit.iter().map(|d| char::from(b'0' + d)).collect::<String>(),
            "point": format!("{}/{}", r.numerator, r.denominator),
        });
    }
    if let Some(dir) = out_dir(&a.out)? {
        write_json(dir.join("transfer.json"), &sys.to_json())?;
        let grid: Vec<f64> = (0..=256).map(|k| k as f64 / 256.0).collect();
        let (w, path) = create(dir.join("h.csv"))?;
        sys.write_csv(w, &grid).map_err(|e| lib_io(&path, e))?;
    }
    Ok(report(config, body))
}
