use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use snowcircle::builders::{self, BuildResult};
use snowcircle::rohde::{self, SvgOptions};
use snowcircle::verify::{self, Mapped};
use snowcircle::{
    metric, ChoiceSource, CirclePoint, Curve, DiameterFunction, DoublingVerdict, GeneralArc, NamedRule, Param,
};

#[derive(Parser)]
#[command(name = "snowcircle", version, about = "Snowflake-type metric circles and their bi-Lipschitz models")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a diameter function to a model file.
    Gen(GenArgs),
    /// Bracket the metric between two points of a model.
    Dist {
        model: PathBuf,
        x: String,
        y: String,
        #[arg(long, default_value_t = 12)]
        depth: u32,
    },
    /// Bracket the diameter of the arc from `start` to `end`.
    ArcDiam {
        model: PathBuf,
        start: String,
        end: String,
        #[arg(long, default_value_t = 12)]
        depth: u32,
    },
    /// Dyadic model of a curve with snowflake parameter 1.
    BuildA(BuildArgs),
    /// 2^m-adic model of a curve with snowflake parameter `sigma`.
    BuildB {
        #[command(flatten)]
        build: BuildArgs,
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        m: Option<u32>,
    },
    /// 4-adic model for a snowflake with parameter `p`.
    Build4adic {
        #[command(flatten)]
        build: BuildArgs,
        #[arg(long)]
        p: String,
        #[arg(long)]
        m: Option<u32>,
    },
    /// Image of a parameter under the correspondence of a build.
    MapPoint {
        curve: String,
        point: String,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Use the 2^m-adic build with this parameter instead of the dyadic one.
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long)]
        m: Option<u32>,
    },
    /// Snowflake polygons from a 4-adic choice rule, as SVG or JSON.
    Rohde {
        #[arg(long)]
        p: String,
        #[arg(long, default_value = "all_snow")]
        choices: String,
        #[arg(long, default_value_t = 0.5)]
        p_snow: f64,
        #[arg(long, default_value_t = 4)]
        levels: u32,
        /// Draw the envelope triangles of the last level.
        #[arg(long)]
        triangles: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sampled distortion of the identity between two curves or models.
    VerifyBilip {
        a: String,
        b: String,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 8.0)]
        bound: f64,
        /// Draw all pairs from dyadic endpoints of this generation.
        #[arg(long)]
        grid_level: Option<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assouad estimate, dimension bound, doubling verdict and turning constant.
    Analyze {
        curve: String,
        #[arg(long, default_value_t = 0.25)]
        radius: f64,
        #[arg(long, default_value_t = 5)]
        scales: u32,
        #[arg(long, default_value_t = 2)]
        centers: usize,
        #[arg(long, default_value_t = 8)]
        horizon: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Doubling verdict of a model.
    Doubling {
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        horizon: u32,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    sigma: String,
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// all_snow, all_half, alternating or random_bernoulli.
    #[arg(long, default_value = "all_snow")]
    rule: String,
    #[arg(long, default_value_t = 0.5)]
    p_snow: f64,
    /// First generation of an alternating rule: half or snow.
    #[arg(long, default_value = "half")]
    first: String,
    /// Explicit choice bits per generation, comma separated ("1,01,0110").
    /// Deeper generations follow `--rule` when it is given explicitly.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    horizon: Option<u32>,
    /// Generations checked by validation.
    #[arg(long, default_value_t = 8)]
    depth: u32,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    /// Curve file, model file, or `circle`.
    curve: String,
    #[arg(long, default_value_t = 6)]
    depth: u32,
    /// Pairs sampled for the distortion report; 0 skips it.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Writes `text` through a temporary file in the target directory.
fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| anyhow!(e.error)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Sends `value` to `output`, or to stdout without one, and prints `summary`.
fn emit(output: Option<&Path>, value: &Value, summary: &str) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(p) => {
            write_atomic(p, &text)?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<DiameterFunction> {
    let v = read_json(path)?;
    if v.get("kind").and_then(Value::as_str) == Some("model_circle") {
        return Ok(serde_json::from_value(v["model"].clone())?);
    }
    Ok(serde_json::from_value(v)?)
}

fn load_curve(arg: &str) -> anyhow::Result<Curve> {
    if arg == "circle" {
        return Ok(Curve::RoundCircle);
    }
    let v = read_json(Path::new(arg))?;
    if v.get("kind").is_some() {
        Ok(Curve::from_json_value(&v)?)
    } else {
        Ok(Curve::model(serde_json::from_value(v)?))
    }
}

fn point(text: &str) -> anyhow::Result<CirclePoint> {
    CirclePoint::parse(text).with_context(|| format!("point {text:?}"))
}

fn rule(name: &str, p_snow: f64, first: &str) -> anyhow::Result<NamedRule> {
    let mut params = Map::new();
    params.insert("p_snow".into(), json!(p_snow));
    params.insert("first".into(), json!(first));
    Ok(NamedRule::from_name(name, &params)?)
}

fn gen(a: &GenArgs, seed: u64, rule_given: bool) -> anyhow::Result<()> {
    let param = Param::parse(&a.sigma)?;
    let named = rule(&a.rule, a.p_snow, &a.first)?;
    let choices = match &a.levels {
        Some(text) => {
            let levels = text
                .split(',')
                .map(|l| l.trim().chars().map(|c| c == '1').collect())
                .collect();
            let fallback = rule_given.then_some((named, seed));
            ChoiceSource::Explicit { levels, fallback }
        }
        None => ChoiceSource::Rule { rule: named, seed },
    };
    let df = DiameterFunction::new(a.m, param, choices)?.with_halving_horizon(a.horizon);
    let report = df.validate(a.depth);
    if !report.valid {
        bail!(snowcircle::Error::Invalid(report.reasons.join("; ")));
    }
    let summary = format!(
        "gen m={} parameter={} rule={} valid=true checked_depth={}",
        a.m, a.sigma, a.rule, report.checked_depth
    );
    emit(a.output.as_deref(), &df.to_json_value(), &summary)
}

fn build_summary(r: &BuildResult, dist: Option<&verify::DistortionReport>) -> String {
    let c = &r.constants;
    let mut s = format!(
        "build {:?} depth={} m={} K={} L={} final_bound={}",
        r.kind,
        r.tree.depth(),
        c.m,
        c.k,
        c.l,
        c.final_bound
    );
    if let Some(d) = dist {
        s.push_str(&format!(" L_est={:.6} violations={}", d.l_est, d.violations));
    }
    s
}

fn finish_build(r: BuildResult, curve: &Curve, b: &BuildArgs, seed: u64) -> anyhow::Result<()> {
    let dist = if b.pairs > 0 { Some(builders::distortion(&r, curve, b.pairs, seed)?) } else { None };
    let mut v = r.to_json_value();
    if let (Some(d), Value::Object(obj)) = (&dist, &mut v) {
        obj.insert("distortion".into(), serde_json::to_value(d)?);
    }
    emit(b.output.as_deref(), &v, &build_summary(&r, dist.as_ref()))
}

fn run(cli: Cli, rule_given: bool) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen(a) => gen(&a, seed, rule_given),
        Command::Dist { model, x, y, depth } => {
            let df = load_model(&model)?;
            let d = metric::distance(&df, &point(&x)?, &point(&y)?, depth)?;
            let summary = format!("dist {x} {y} lower={} upper={}", d.lower, d.upper);
            emit(None, &serde_json::to_value(d)?, &summary)
        }
        Command::ArcDiam { model, start, end, depth } => {
            let df = load_model(&model)?;
            let arc = GeneralArc::new(point(&start)?, point(&end)?)?;
            let d = metric::arc_diameter(&df, &arc, depth)?;
            let b = metric::bracket_arcs(&df, &arc)?;
            let v = json!({ "diameter": d, "bracket_arcs": b });
            emit(None, &v, &format!("arc-diam {arc} lower={} upper={}", d.lower, d.upper))
        }
        Command::BuildA(b) => {
            let curve = load_curve(&b.curve)?;
            let r = builders::build_theorem_a(&curve, b.depth)?;
            finish_build(r, &curve, &b, seed)
        }
        Command::BuildB { build, sigma, m } => {
            let curve = load_curve(&build.curve)?;
            let r = builders::build_theorem_b(&curve, &Param::parse(&sigma)?, m, build.depth, seed)?;
            finish_build(r, &curve, &build, seed)
        }
        Command::Build4adic { build, p, m } => {
            let curve = load_curve(&build.curve)?;
            let r = builders::build_4adic(&curve, &Param::parse(&p)?, m, build.depth, seed)?;
            finish_build(r, &curve, &build, seed)
        }
        Command::MapPoint { curve, point: s, depth, tol, sigma, m } => {
            let curve = load_curve(&curve)?;
            let r = match sigma {
                Some(sg) => builders::build_theorem_b(&curve, &Param::parse(&sg)?, m, depth, seed)?,
                None => builders::build_theorem_a(&curve, depth)?,
            };
            let image = builders::map_point(&r, &point(&s)?, tol)?;
            let v = json!({ "point": s, "image": image, "image_value": image.value() });
            emit(None, &v, &format!("map-point {s} -> {image}"))
        }
        Command::Rohde { p, choices, p_snow, levels, triangles, output } => {
            let param = Param::parse(&p)?;
            let pv = param.value();
            let df = DiameterFunction::rule(2, param, rule(&choices, p_snow, "half")?, seed)?;
            let polys = rohde::generate(pv, &df, levels)?;
            let mut excess: f64 = 0.0;
            let mut separation = f64::INFINITY;
            for w in polys.windows(2) {
                let r = rohde::triangles(&w[0], &w[1], pv)?;
                excess = excess.max(r.nesting_excess);
                separation = separation.min(r.min_separation_ratio);
            }
            let last = polys.last().ok_or_else(|| anyhow!("no levels generated"))?;
            let summary = format!(
                "rohde p={p} levels={levels} edges={} nesting_excess={excess:.3e} min_separation={separation:.6} c(p)={:.6}",
                last.edges.len(),
                rohde::separation_constant(pv)
            );
            let svg = output.as_deref().is_some_and(|o| o.extension().is_some_and(|e| e == "svg"));
            if svg {
                let opts = SvgOptions { triangles, p: pv, ..SvgOptions::default() };
                let path = output.as_deref().unwrap_or(Path::new("snowflake.svg"));
                write_atomic(path, &rohde::export_svg(std::slice::from_ref(last), &opts))?;
                println!("{summary}");
                Ok(())
            } else {
                let v = json!({ "p": p, "model": df.to_json_value(), "polygons": polys.iter().map(|q| q.to_json_value()).collect::<Vec<_>>() });
                emit(output.as_deref(), &v, &summary)
            }
        }
        Command::VerifyBilip { a, b, pairs, bound, grid_level, output } => {
            let (ca, cb) = (load_curve(&a)?, load_curve(&b)?);
            let identity = |s: &CirclePoint| -> snowcircle::Result<Mapped> { Ok((*s, 0.0)) };
            let r = verify::bilip_report(&ca, &cb, &identity, pairs, bound, seed, grid_level)?;
            let summary = format!(
                "verify-bilip pairs={} L_est={:.6} L_upper={:.6} violations={}",
                r.pairs, r.l_est, r.l_upper, r.violations
            );
            emit(output.as_deref(), &serde_json::to_value(&r)?, &summary)
        }
        Command::Analyze { curve, radius, scales, centers, horizon, output } => {
            let c = load_curve(&curve)?;
            let est = verify::assouad_estimate(&c, radius, scales, centers, seed)?;
            let bt = c.bt_constant_estimate(400, seed)?;
            let mut v = json!({ "curve": c.kind(), "assouad_estimate": est, "bt_constant_estimate": bt });
            if let Curve::ModelCircle(df) = &c {
                v["assouad_upper"] = serde_json::to_value(df.assouad_upper())?;
                v["doubling"] = serde_json::to_value(df.doubling_test(horizon))?;
            }
            let summary = format!("analyze {} assouad_estimate={:.4} bt={:.4}", c.kind(), est.alpha, bt);
            emit(output.as_deref(), &v, &summary)
        }
        Command::Doubling { model, horizon } => {
            let df = load_model(&model)?;
            let verdict = df.doubling_test(horizon);
            let summary = match &verdict {
                DoublingVerdict::Doubling { n0, n } => format!("doubling n0={n0} N={n}"),
                DoublingVerdict::NotDoubling { run, .. } => format!("not_doubling run={run}"),
                DoublingVerdict::Inconclusive { scanned_depth, .. } => format!("inconclusive scanned_depth={scanned_depth}"),
            };
            emit(None, &serde_json::to_value(&verdict)?, &summary)
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<snowcircle::Error>() {
        return core.kind();
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    if e.downcast_ref::<serde_json::Error>().is_some() {
        return "json";
    }
    "error"
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => return fail("usage", e.render().to_string().trim().to_string(), 2),
    };
    let rule_given = std::env::args().any(|a| a == "--rule" || a.starts_with("--rule="));
    match run(cli, rule_given) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(error_kind(&e), format!("{e:#}"), 1),
    }
}
