//! Command-line front end. `run` is the whole program minus process I/O, so
//! tests can drive it in-process.

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::bounds::{
    bound_b, choose_height, kernel_vanishing_check, lens_bound, pi_series, verify_upowers, FilteredModuleModel,
    KernelOptions, LandweberFiltration, ModelSpec,
};
use crate::cyclic::{
    cohomology_of_bmu_with_depth, leray_hirsch_min_trunc, leray_hirsch_with_depth, relation_vanishes,
    split_injectivity, CyclicGroupDatum, ModulePresentation, DEFAULT_EN_DEPTH,
};
use crate::error::Error;
use crate::euler::{ab_injectivity_check, euler_of_weights, leading_form, LineBundleWeights};
use crate::fgl::{FormalGroupLaw, LSeriesMethod};
use crate::morse::{assemble, check_morse_equality, degree_profile, kernel_window_check, FixedComponentDatum, MorseData, MorseRing};
use crate::ringcore::RingSpec;

pub const SCHEMA: &str = "fgl-forge/1";

#[derive(Parser, Debug)]
#[command(name = "fgl-forge", version, about = "Exact truncated formal-group-law calculus with certificates")]
pub struct Cli {
    #[arg(long, value_enum, default_value = "text", global = true)]
    pub format: Format,
    /// Worker threads for independent grid points.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "lower")]
pub enum Kind {
    /// BP* truncated at v_n.
    Bp,
    /// BP*/I_h (needs --h).
    Bpq,
    /// E(n)*.
    E,
    /// K_{p^r}(n)*.
    K,
}

#[derive(Args, Debug, Clone)]
pub struct RingArgs {
    #[arg(long, default_value_t = 2)]
    pub p: u64,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    #[arg(long, value_enum, ignore_case = true, default_value = "k")]
    pub kind: Kind,
    #[arg(long)]
    pub h: Option<usize>,
}

impl RingArgs {
    fn spec(&self) -> Result<RingSpec, Error> {
        Ok(match self.kind {
            Kind::Bp => RingSpec::bp(self.p, self.n)?,
            Kind::Bpq => {
                let h = self.h.ok_or_else(|| Error::Invalid("--kind bpq needs --h".into()))?;
                RingSpec::bp_mod_ideal(self.p, h, self.n)?
            }
            Kind::E => RingSpec::en(self.p, self.n)?,
            Kind::K => RingSpec::kpr(self.p, self.r, self.n)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Auto,
    Chain,
    Log,
    Factored,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// The p-typical law over a coefficient ring, and its l-series.
    Fgl {
        #[command(flatten)]
        ring: RingArgs,
        #[arg(long = "T", default_value_t = 8)]
        t: usize,
        /// l-series to print (comma separated, may repeat).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        l: Vec<i64>,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
        /// Check unit, commutativity, associativity and the p-series identity.
        #[arg(long)]
        check: bool,
    },
    /// Euler class of a sum of weighted line bundles and its leading form.
    Euler {
        #[command(flatten)]
        ring: RingArgs,
        /// Circle weights; without this flag a JSON list of weight lists is
        /// read from INPUT or standard input.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weights: Option<Vec<i64>>,
        #[arg(long = "T")]
        t: Option<usize>,
        /// Filtration degrees of the synthetic module for the injectivity check.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        filtration: Vec<u32>,
        input: Option<PathBuf>,
    },
    /// Presentation of E*(Bμ_l), and the Leray-Hirsch module when --Tw is given.
    Cyclic {
        #[command(flatten)]
        ring: RingArgs,
        #[arg(long)]
        l: u64,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long = "Tw")]
        tw: Option<usize>,
        /// u-truncation for the Leray-Hirsch module (default: minimal).
        #[arg(long = "Tu")]
        tu: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_EN_DEPTH)]
        depth: u32,
    },
    /// Effective bounds.
    Bounds {
        #[command(subcommand)]
        command: BoundsCommand,
    },
    /// Assemble fixed-point data and check the kernel and cardinality bounds.
    Morse {
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        r: u32,
        /// Values of m: comma separated, `a..b` is inclusive.
        #[arg(long, default_value = "0..12")]
        m: String,
        /// Negative control: drop this generator from the assembly.
        #[arg(long)]
        drop: Option<usize>,
        input: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum BoundsCommand {
    /// π_h[j](u) over BP*/I_h.
    Pi {
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long)]
        h: usize,
        #[arg(long, default_value_t = 0)]
        j: u32,
        #[arg(long = "T")]
        t: usize,
    },
    /// Factorization of [p^a](u) over BP*/I_h.
    Upowers {
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long)]
        h: usize,
        #[arg(long)]
        a: u32,
        #[arg(long = "T")]
        t: usize,
    },
    /// The constant B for circle weights and slice heights.
    #[command(name = "B")]
    B {
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weights: Vec<i64>,
        #[arg(long, value_delimiter = ',')]
        heights: Vec<usize>,
    },
    /// The lens-space constants C and r.
    Lens {
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        s: u32,
        #[arg(long, value_delimiter = ',')]
        heights: Vec<usize>,
    },
    /// Least height n with |v_n| > m + 1.
    Height {
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long)]
        m: u64,
    },
    /// Kernel of Euler multiplication on synthetic filtered modules (JSON jobs).
    Kernel {
        /// Replace Π on the bottom slice by u^S Π (negative control).
        #[arg(long)]
        corrupt: Option<usize>,
        input: Option<PathBuf>,
    },
}

/// One report: JSON body, text rendering, and whether every certificate
/// in it passed.
struct Report {
    json: Value,
    text: String,
    passed: bool,
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parse arguments and run. Exit code 0 iff every certificate passed, 1 on a
/// failed certificate, 2 on invalid input.
pub fn run<I, T>(args: I, stdin: &mut dyn Read) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let s = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: s, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: s }
            };
        }
    };
    let jobs = cli.jobs.unwrap_or(1).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => return Outcome { code: 2, stdout: String::new(), stderr: format!("error: {e}\n") },
    };
    // stdin is read up front; the worker pool cannot borrow it.
    let mut piped = None;
    if needs_stdin(&cli.command) {
        let mut s = String::new();
        if let Err(e) = stdin.read_to_string(&mut s) {
            return Outcome { code: 2, stdout: String::new(), stderr: format!("error: <stdin>: {e}\n") };
        }
        piped = Some(s);
    }
    let (name, result) = pool.install(|| dispatch(&cli.command, piped.as_deref()));
    match result {
        Ok(report) => {
            let stdout = match cli.format {
                Format::Json => {
                    let mut body = json!({ "schema": SCHEMA, "command": name });
                    if let (Value::Object(dst), Value::Object(src)) = (&mut body, report.json) {
                        dst.extend(src);
                    }
                    body["passed"] = json!(report.passed);
                    serde_json::to_string_pretty(&body).expect("serializable") + "\n"
                }
                Format::Text => {
                    let mut t = report.text;
                    if !t.ends_with('\n') {
                        t.push('\n');
                    }
                    t + if report.passed { "PASS\n" } else { "FAIL\n" }
                }
            };
            Outcome { code: if report.passed { 0 } else { 1 }, stdout, stderr: String::new() }
        }
        Err(msg) => Outcome { code: 2, stdout: String::new(), stderr: format!("error: {msg}\n") },
    }
}

fn needs_stdin(cmd: &Command) -> bool {
    match cmd {
        Command::Euler { weights, input, .. } => weights.is_none() && input.is_none(),
        Command::Morse { input, .. } => input.is_none(),
        Command::Bounds { command: BoundsCommand::Kernel { input, .. } } => input.is_none(),
        _ => false,
    }
}

fn dispatch(cmd: &Command, stdin: Option<&str>) -> (String, Result<Report, String>) {
    match cmd {
        Command::Fgl { ring, t, l, method, check } => ("fgl".into(), run_fgl(ring, *t, l, *method, *check)),
        Command::Euler { ring, weights, t, filtration, input } => {
            ("euler".into(), run_euler(ring, weights.as_deref(), *t, filtration, input.as_ref(), stdin))
        }
        Command::Cyclic { ring, l, t, tw, tu, depth } => ("cyclic".into(), run_cyclic(ring, *l, *t, *tw, *tu, *depth)),
        Command::Bounds { command } => {
            let (sub, r) = run_bounds(command, stdin);
            (format!("bounds {sub}"), r)
        }
        Command::Morse { p, n, r, m, drop, input } => {
            ("morse".into(), run_morse(MorseRing { p: *p, r: *r, n: *n }, m, *drop, input.as_ref(), stdin))
        }
    }
}

fn read_input(path: Option<&PathBuf>, stdin: Option<&str>) -> Result<(String, String), String> {
    match path {
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok((p.display().to_string(), s))
        }
        None => Ok(("<stdin>".to_string(), stdin.unwrap_or_default().to_string())),
    }
}

/// Deserialize with the failing field path and position in the message.
fn parse_json<T: DeserializeOwned>(source: &str, text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            format!("{source}: {inner}")
        } else {
            format!("{source}: field `{path}`: {inner}")
        }
    })
}

fn method_of(m: Method) -> Option<LSeriesMethod> {
    match m {
        Method::Auto => None,
        Method::Chain => Some(LSeriesMethod::AdditionChain),
        Method::Log => Some(LSeriesMethod::Logarithm),
        Method::Factored => Some(LSeriesMethod::Factored),
    }
}

fn run_fgl(ring: &RingArgs, t: usize, ls: &[i64], method: Method, check: bool) -> Result<Report, String> {
    let spec = ring.spec().map_err(|e| e.to_string())?;
    let law = FormalGroupLaw::new(spec, t).map_err(|e| e.to_string())?;
    let results: Vec<Result<(i64, String), String>> = ls
        .par_iter()
        .map(|&l| {
            let s = match method_of(method) {
                None => law.l_series(l),
                Some(m) => law.l_series_with(l, m),
            };
            s.map(|s| (l, s.to_string())).map_err(|e| e.to_string())
        })
        .collect();
    let series: Vec<(i64, String)> = results.into_iter().collect::<Result<_, _>>()?;
    let small = t <= 48;
    let mut json = json!({
        "ring": spec.descriptor(),
        "T": t,
        "provenance": law.provenance(),
        "l_series": series.iter().map(|(l, s)| json!({ "l": l, "series": s })).collect::<Vec<_>>(),
    });
    if let Some(c) = law.convention() {
        json["convention"] = json!(c);
    }
    let mut text = format!("ring  {}\nT     {t}\n", spec.descriptor());
    if small {
        json["law"] = law.to_json()["law"].clone();
        text += &law.coefficient_table();
        text.push('\n');
    } else {
        text += "(bivariate law not printed above T = 48)\n";
    }
    for (l, s) in &series {
        text += &format!("[{l}](u) = {s}\n");
    }
    let mut passed = true;
    if check {
        if !small {
            return Err("--check needs T <= 48".into());
        }
        let ax = law.check_axioms();
        let ps = law.check_p_series().map_err(|e| e.to_string())?;
        json["axioms"] = json!(ax);
        json["p_series_identity"] = json!(ps.holds);
        text += &format!(
            "unit {}  commutative {}  associative {}  p-series {}\n",
            ax.unit, ax.commutative, ax.associative, ps.holds
        );
        passed = ax.all() && ps.holds;
    }
    Ok(Report { json, text, passed })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightDoc {
    Lists(Vec<Vec<i64>>),
    Doc { weights: Vec<Vec<i64>> },
}

fn run_euler(
    ring: &RingArgs,
    weights: Option<&[i64]>,
    t: Option<usize>,
    filtration: &[u32],
    input: Option<&PathBuf>,
    stdin: Option<&str>,
) -> Result<Report, String> {
    let spec = ring.spec().map_err(|e| e.to_string())?;
    let lists = match weights {
        Some(w) => vec![w.to_vec()],
        None => {
            let (src, text) = read_input(input, stdin)?;
            match parse_json::<WeightDoc>(&src, &text)? {
                WeightDoc::Lists(l) | WeightDoc::Doc { weights: l } => l,
            }
        }
    };
    let reports: Vec<Result<(Value, String, bool), String>> =
        lists.par_iter().map(|w| euler_job(spec, ring.n, w, t, filtration)).collect();
    let mut json_items = Vec::new();
    let mut text = String::new();
    let mut passed = true;
    for r in reports {
        let (j, s, ok) = r?;
        json_items.push(j);
        text += &s;
        passed &= ok;
    }
    Ok(Report { json: json!({ "ring": spec.descriptor(), "results": json_items }), text, passed })
}

fn euler_job(
    spec: RingSpec,
    n: usize,
    w: &[i64],
    t: Option<usize>,
    filtration: &[u32],
) -> Result<(Value, String, bool), String> {
    let wts = LineBundleWeights::new(spec.p, w).map_err(|e| e.to_string())?;
    let k = wts.leading_exponent(n);
    let t = t.unwrap_or(2 * k + 2);
    let law = FormalGroupLaw::new(spec, t).map_err(|e| e.to_string())?;
    let e = euler_of_weights(&law, &wts).map_err(|e| e.to_string())?;
    let mut j = json!({ "weights": w, "T": t, "k_expected": k, "series": e.series.to_string() });
    let mut text = format!("weights {w:?}  T {t}\ne(u) = {}\n", e.series);
    let mut ok = true;
    match leading_form(&e) {
        Ok(lf) => {
            j["leading_form"] = lf.to_json();
            text += &format!("k = {}  x = {}  unit {}\n", lf.k, lf.x, lf.x.is_unit());
        }
        Err(Error::UnitCertificate(msg)) => {
            j["leading_form"] = json!({ "error": msg });
            text += &format!("leading form FAILED: {msg}\n");
            ok = false;
        }
        Err(e) => return Err(e.to_string()),
    }
    if ok && spec.kind == crate::ringcore::RingKind::KprRing {
        let cert = ab_injectivity_check(&e, k, filtration, t).map_err(|e| e.to_string())?;
        text += &format!("injective on u-degrees < {}: {}\n", cert.window, cert.injective);
        ok &= cert.injective;
        j["injectivity"] = serde_json::to_value(&cert).expect("serializable");
    }
    j["passed"] = json!(ok);
    Ok((j, text, ok))
}

fn presentation_checks(law: &FormalGroupLaw, pres: &ModulePresentation) -> Result<(Value, bool), String> {
    let expected = pres.datum.rank(pres.spec.n);
    let rank_ok = pres.rank == expected;
    let degrees = pres.degrees_consistent();
    let nil = pres.nilpotency_index_mod_m0().map_err(|e| e.to_string())?;
    let mut v = json!({
        "rank_expected": expected,
        "rank_ok": rank_ok,
        "degrees_consistent": degrees,
        "nilpotency_index_mod_m0": nil,
    });
    let mut ok = rank_ok && degrees;
    if pres.trunc_w == 1 {
        let vanish = relation_vanishes(law, pres).map_err(|e| e.to_string())?;
        v["relation_vanishes"] = json!(vanish);
        ok &= vanish;
    }
    Ok((v, ok))
}

fn run_cyclic(
    ring: &RingArgs,
    l: u64,
    t: Option<usize>,
    tw: Option<usize>,
    tu: Option<usize>,
    depth: u32,
) -> Result<Report, String> {
    let spec = ring.spec().map_err(|e| e.to_string())?;
    let datum = CyclicGroupDatum::new(l, spec.p).map_err(|e| e.to_string())?;
    let n = datum.rank(spec.n);
    // Without --T, start just above the rank and take the reported minimum.
    let mut trunc = t.unwrap_or(n + 1);
    let (law, bmu) = loop {
        let law = FormalGroupLaw::new(spec, trunc.max(2)).map_err(|e| e.to_string())?;
        match cohomology_of_bmu_with_depth(&law, &datum, trunc.max(2), depth) {
            Ok(b) => break (law, b),
            Err(Error::TruncationTooSmall { needed, .. }) if t.is_none() && needed > trunc => trunc = needed,
            Err(e) => return Err(e.to_string()),
        }
    };
    let (checks, mut passed) = presentation_checks(&law, &bmu)?;
    let mut json = json!({ "bmu": bmu.to_json(), "bmu_checks": checks });
    let mut text = format!(
        "E*(Bmu_{l}) over {}: rank {} (expected {}), T = {}, exact {}\n{}",
        bmu.base(),
        bmu.rank,
        n,
        bmu.trunc_u,
        bmu.exact,
        bmu.table()
    );
    if let Some(tw) = tw {
        let tu = tu.unwrap_or_else(|| leray_hirsch_min_trunc(&spec, &datum, tw, depth));
        let law_lh = FormalGroupLaw::new(spec, tu.max(2)).map_err(|e| e.to_string())?;
        let lh = leray_hirsch_with_depth(&law_lh, &datum, tu, tw, depth).map_err(|e| e.to_string())?;
        let (lh_checks, ok) = presentation_checks(&law_lh, &lh)?;
        let coherent = lh.coherent_with(&bmu);
        let split = split_injectivity(&law_lh, &lh).map_err(|e| e.to_string())?;
        passed &= ok && coherent && split.tautological && split.full_rank;
        json["leray_hirsch"] = lh.to_json();
        json["leray_hirsch_checks"] = lh_checks;
        json["coherent_w_to_0"] = json!(coherent);
        json["split_injectivity"] = json!(split);
        text += &format!(
            "\nLeray-Hirsch over {}: T_u = {tu}\n{}w -> 0 coherent {coherent}  split {}\n",
            lh.base(),
            lh.table(),
            split.tautological && split.full_rank
        );
    }
    Ok(Report { json, text, passed })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelJob {
    model: ModelSpec,
    weights: Vec<i64>,
    a: usize,
    q: u32,
    #[serde(default)]
    empirical_window: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum KernelDoc {
    Many { jobs: Vec<KernelJob> },
    One(KernelJob),
}

fn run_bounds(cmd: &BoundsCommand, stdin: Option<&str>) -> (&'static str, Result<Report, String>) {
    match cmd {
        BoundsCommand::Pi { p, h, j, t } => ("pi", {
            pi_series(*p, *h, *j, *t).map_err(|e| e.to_string()).map(|s| Report {
                json: json!({ "p": p, "h": h, "j": j, "T": t, "ring": s.spec().descriptor(), "series": s.to_string() }),
                text: format!("pi_{h}[{j}](u) = {s}  mod u^{t}\n"),
                passed: true,
            })
        }),
        BoundsCommand::Upowers { p, h, a, t } => ("upowers", {
            verify_upowers(*p, *h, *a, *t).map_err(|e| e.to_string()).map(|c| Report {
                text: format!(
                    "[{p}^{a}](u) over BP*/I_{h} mod u^{t}: factorization {}\n",
                    if c.holds { "holds" } else { "FAILS" }
                ),
                passed: c.holds,
                json: c.to_json(),
            })
        }),
        BoundsCommand::B { p, weights, heights } => ("B", {
            let exps: Result<Vec<u32>, String> = weights
                .iter()
                .map(|&w| {
                    LineBundleWeights::new(*p, &[w]).map(|x| x.decomposition()[0].1).map_err(|e| e.to_string())
                })
                .collect();
            exps.and_then(|exps| {
                let filt = LandweberFiltration::new(heights);
                let b = bound_b(*p, &exps, &filt).map_err(|e| e.to_string())?;
                Ok(Report {
                    json: json!({ "p": p, "weights": weights, "weight_exponents": exps, "heights": heights, "B": b.to_string() }),
                    text: format!("B = {b}\n"),
                    passed: true,
                })
            })
        }),
        BoundsCommand::Lens { p, q, s, heights } => ("lens", {
            let filt = LandweberFiltration::new(heights);
            lens_bound(*p, *q, *s, &filt).map_err(|e| e.to_string()).map(|lb| Report {
                json: json!({
                    "p": p, "q": q, "s": s, "heights": heights,
                    "C": lb.c.to_string(), "r": lb.r_min.to_string(),
                    "height_warnings": filt.height_warnings(*p, *q),
                }),
                text: format!("C = {}\nr = {}\n", lb.c, lb.r_min),
                passed: true,
            })
        }),
        BoundsCommand::Height { p, m } => ("height", {
            let n = choose_height(*m, *p);
            Ok(Report { json: json!({ "p": p, "m": m, "n": n }), text: format!("n = {n}\n"), passed: true })
        }),
        BoundsCommand::Kernel { corrupt, input } => ("kernel", run_kernel(*corrupt, input.as_ref(), stdin)),
    }
}

fn run_kernel(corrupt: Option<usize>, input: Option<&PathBuf>, stdin: Option<&str>) -> Result<Report, String> {
    let (src, text) = read_input(input, stdin)?;
    let jobs = match parse_json::<KernelDoc>(&src, &text)? {
        KernelDoc::Many { jobs } => jobs,
        KernelDoc::One(j) => vec![j],
    };
    let results: Vec<Result<Value, String>> = jobs
        .par_iter()
        .map(|j| {
            let mut model = FilteredModuleModel::from_spec(&j.model).map_err(|e| e.to_string())?;
            if let Some(s) = corrupt {
                model = model.corrupted(s);
            }
            let opts = KernelOptions { degree_depth: None, empirical_window: j.empirical_window };
            let c = kernel_vanishing_check(&model, &j.weights, j.a, j.q, opts).map_err(|e| e.to_string())?;
            Ok(c.to_json())
        })
        .collect();
    let mut items = Vec::new();
    let mut out = String::new();
    let mut passed = true;
    for (i, r) in results.into_iter().enumerate() {
        let v = r?;
        let ok = v["passed"].as_bool().unwrap_or(false);
        passed &= ok;
        out += &format!(
            "job {i}: heights {}  B {}  window {}  kernel dim {}  {}\n",
            v["heights"], v["b"], v["window"], v["kernel_dimension"], if ok { "ok" } else { "FAILED" }
        );
        items.push(v);
    }
    Ok(Report { json: json!({ "results": items }), text: out, passed })
}

fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let bad = || format!("bad m-grid entry {part:?}");
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.parse().map_err(|_| bad())?;
            let b: usize = b.parse().map_err(|_| bad())?;
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn run_morse(
    ring: MorseRing,
    grid: &str,
    drop: Option<usize>,
    input: Option<&PathBuf>,
    stdin: Option<&str>,
) -> Result<Report, String> {
    let grid = parse_grid(grid)?;
    let (src, text) = read_input(input, stdin)?;
    // Parse as a data file first, so field errors point into it.
    let value: Value = parse_json(&src, &text)?;
    let (name, data) = match value {
        Value::Array(_) => ("(unnamed)".to_string(), parse_json::<Vec<FixedComponentDatum>>(&src, &text)?),
        _ => {
            let d: MorseData = parse_json(&src, &text)?;
            if d.schema != "fgl-forge/morse-data/1" {
                return Err(format!("{src}: field `schema`: unsupported schema {:?}", d.schema));
            }
            (d.name, d.components)
        }
    };
    let mut assembled = assemble(&data, ring).map_err(|e| e.to_string())?;
    if let Some(i) = drop {
        assembled = assembled.corrupted_drop(i);
    }
    let eq = check_morse_equality(&data, &assembled);
    let k = assembled.max_k();
    let windows: Vec<Result<Value, String>> = grid
        .par_iter()
        .map(|&m| {
            if m < k {
                return Ok(json!({ "m": m, "window_empty": true, "k": k }));
            }
            kernel_window_check(&data, m, &assembled).map(|c| c.to_json()).map_err(|e| e.to_string())
        })
        .collect();
    let mut passed = eq.passed();
    let mut text = format!(
        "{name} over K_{}^{}({}): rank {} from {} components, {} splitting steps\n",
        ring.p,
        ring.r,
        ring.n,
        assembled.rank(),
        data.len(),
        assembled.splitting_steps()
    );
    for s in &assembled.trace {
        text += &format!(
            "  step {}  {:<10} mu {:<6} lambda {:<3} rank {}  k {:<3} x {}\n",
            s.step, s.component, s.moment_value, s.morse_index, s.rank, s.k, s.x
        );
    }
    let profile: Vec<String> = degree_profile(&assembled).iter().map(|(d, c)| format!("{d}:{c}")).collect();
    text += &format!("degrees (degree:count) {}\n", profile.join(" "));
    text += &format!(
        "|K(F)| = {}  |K(M)| = {}  equality {}{}\n",
        eq.fixed_cardinality,
        eq.assembled_cardinality,
        eq.equality,
        if eq.degenerate { "  (empty fixed locus)" } else { "" }
    );
    text += &format!("{:>3}  {:>6}  {:>6}  {:>6}\n", "m", "kernel", "euler", "leray");
    let mut items = Vec::new();
    for w in windows {
        let v = w?;
        if v.get("window_empty").is_some() {
            text += &format!("{:>3}  window empty (m < k = {k})\n", v["m"].as_u64().unwrap_or(0));
        } else {
            let ok = v["passed"].as_bool().unwrap_or(false);
            passed &= ok;
            text += &format!(
                "{:>3}  {:>6}  {:>6}  {:>6}\n",
                v["m"].as_u64().unwrap_or(0),
                v["kernel_bound_holds"].as_bool().unwrap_or(false),
                v["euler_bound_holds"].as_bool().unwrap_or(false),
                v["leray_bound_holds"].as_bool().unwrap_or(false)
            );
        }
        items.push(v);
    }
    let json = json!({
        "name": name,
        "ring": ring,
        "convention": "|Q| = p^(r*rank), v_n -> 1",
        "assembly": assembled.to_json(),
        "morse_equality": eq.to_json(),
        "windows": items,
    });
    Ok(Report { json, text, passed })
}
