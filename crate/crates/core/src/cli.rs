//! Command-line front end.
//!
//! Every subcommand produces a [`Report`]: the parsed settings, a result
//! document and a list of named checks. Exit status is 0 when every check
//! passes, 2 when some check fails (the report is still written) and 1 on
//! usage or domain errors.
//!
//! Reports go to `--output`, else to `$BE_WORKBENCH_OUT/<command>.json`,
//! else to stdout. `--csv` writes the command's series with the fixed
//! columns `t,value,bound,margin`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::curvature::{c_log_concave_constant, convolution_probe, CurvatureReport};
use crate::error::{Error, Result};
use crate::functionals::{lsi_constant_estimate, lsi_verify, poincare_check, poincare_constant, relative_entropy};
use crate::gamma::integrated_be_check;
use crate::multidim::{
    esym_c_max, esym_psd_certify, integrated_be_check_d, interior_function_d, logsob_gap_term, logsob_probe,
    one_step_commutation_residual_d, positive_function_d, product_pmf,
};
use crate::numeric::csum;
use crate::pmf::TruncatedPmf;
use crate::random::{positive_function, stream_rng};
use crate::semigroup::{evolve_function, evolve_pmf, GridFunction};
use crate::tail::{
    charlier1, charlier_constant, chernoff_scan, concentration_report, geometric_grid, hypercontractivity_trace,
    thinning_decay_trace,
};

/// Environment variable naming the default report directory.
pub const OUT_DIR_ENV: &str = "BE_WORKBENCH_OUT";

const DIST_GRAMMAR: &str = "poisson:<lambda> | bernoullisum:<p1>,<p2>,... | negbin:<n>,<p> | \
                            weights:<w0>,<w1>,... | delta:<k>";
const FN_GRAMMAR: &str = "exp:<a>[,<b>] (e^{a x + b}) | id | const:<c> | charlier1 | randomwalk:<seed>";
const GRID_GRAMMAR: &str = "<t1>,<t2>,... | geom:<t0>,<t1>,<ratio> | lin:<a>,<b>,<n>";

#[derive(Debug, Clone, Parser, Serialize)]
#[command(
    name = "be-workbench",
    version,
    about = "Discrete Bakry–Émery workbench on Z₊",
    args_override_self = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Tail budget for truncating infinite-support pmfs.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub eps_tail: f64,
    /// Integrator tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// CSV series path.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    /// `key = value` file whose entries override command-line flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Curvature profile, c-log-concavity and ULC.
    Curvature { dist: String },
    /// Evolve a pmf (and optionally a function) under the semigroup.
    Evolve {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        init: String,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        f: Option<String>,
    },
    /// Randomized or exact verification of an inequality.
    Verify {
        #[command(subcommand)]
        which: Verify,
    },
    /// Curvature, Poincaré and log-Sobolev constants side by side.
    Constants {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
    /// Exact tails against the Bennett-type bound, with a Chernoff scan.
    Concentration {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value = "id")]
        g: String,
        #[arg(long, default_value = "auto")]
        c: String,
        #[arg(long, default_value = "lin:1,10,10")]
        t: String,
        #[arg(long)]
        sigma: Option<String>,
    },
    /// Relative entropy along Poisson thinning.
    Decay {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        init: String,
        #[arg(long, default_value = "geom:0.01,8,2")]
        t: String,
    },
    /// The hypercontractive norm along the thinning co-evolution.
    Hyper {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = "charlier1")]
        g: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value = "0,0.1,0.2,0.3")]
        t: String,
        /// Window length; defaults from the tilted mean for `charlier1`.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Product measures on Z₊^d.
    Multidim {
        #[command(subcommand)]
        which: Multidim,
    },
    /// Report-only probe of the convolution conjecture.
    ProbeConvolution {
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verify {
    Lsi {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        f: String,
        #[arg(long, default_value = "auto")]
        c: String,
    },
    Poincare {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value = "auto")]
        c: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    Be {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value = "auto")]
        c: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multidim {
    /// Positive semidefiniteness of the mixed curvature matrix.
    Certify {
        /// Factor args_list, comma separated: `poisson:2,poisson:4`.
        #[arg(long)]
        dists: String,
        #[arg(long, default_value = "auto")]
        c: String,
    },
    /// Randomized integrated BE, Poincaré and log-Sobolev gap checks.
    Verify {
        #[arg(long)]
        dists: String,
        #[arg(long, default_value = "auto")]
        c: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Report-only search over coupled 2-d measures.
    Probe {
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        functions: usize,
        #[arg(long, default_value_t = 8)]
        size: usize,
    },
}

/// One named check in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub passed: bool,
    pub detail: Value,
}

fn check(name: &str, passed: bool, detail: Value) -> Check {
    Check {
        check: name.to_string(),
        passed,
        detail,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub settings: Value,
    pub result: Value,
    pub checks: Vec<Check>,
    /// Exploratory reports carry no checks and never fail.
    pub exploratory: bool,
    pub passed: bool,
}

/// A row of the CSV series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CsvRow {
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub rows: Vec<CsvRow>,
}

impl Outcome {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Numeric(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record(["t", "value", "bound", "margin"])
                .map_err(|e| Error::Numeric(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

pub fn parse_dist(arg: &str, eps_tail: f64) -> Result<TruncatedPmf> {
    let usage = || Error::Usage(format!("bad distribution `{arg}`; expected {DIST_GRAMMAR}"));
    let (name, args) = arg.split_once(':').unwrap_or((arg, ""));
    let nums = || -> Result<Vec<f64>> {
        args.split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| usage()))
            .collect()
    };
    match name.trim() {
        "poisson" => match nums()?[..] {
            [l] => TruncatedPmf::poisson(l, eps_tail),
            _ => Err(usage()),
        },
        "bernoullisum" => TruncatedPmf::bernoulli_sum(&nums()?),
        "negbin" => match nums()?[..] {
            [n, p] => TruncatedPmf::negative_binomial(n, p, eps_tail),
            _ => Err(usage()),
        },
        "weights" => TruncatedPmf::from_weights(&nums()?),
        "delta" => args
            .trim()
            .parse::<usize>()
            .map(TruncatedPmf::point_mass)
            .map_err(|_| usage()),
        _ => Err(usage()),
    }
}

/// Splits `poisson:2,bernoullisum:0.2,0.4` into its factors: a comma
/// starts a new distribution only when followed by a name.
pub fn split_dists(args_list: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in args_list.split(',') {
        let starts_name = tok.trim_start().chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        match out.last_mut() {
            Some(last) if !starts_name => {
                last.push(',');
                last.push_str(tok);
            }
            _ => out.push(tok.trim().to_string()),
        }
    }
    out
}

/// A function on `{0..len-1}`; `lambda` parametrizes `charlier1`.
pub fn parse_function(arg: &str, len: usize, lambda: f64) -> Result<GridFunction> {
    let usage = || Error::Usage(format!("bad function `{arg}`; expected {FN_GRAMMAR}"));
    let (name, args) = arg.split_once(':').unwrap_or((arg, ""));
    let nums = || -> Result<Vec<f64>> {
        args.split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| usage()))
            .collect()
    };
    match name.trim() {
        "exp" => {
            let (a, b) = match nums()?[..] {
                [a] => (a, 0.0),
                [a, b] => (a, b),
                _ => return Err(usage()),
            };
            GridFunction::from_fn(len, |x| (a * x as f64 + b).exp())
        }
        "id" => GridFunction::from_fn(len, |x| x as f64),
        "const" => match nums()?[..] {
            [c] => Ok(GridFunction::constant(len, c)),
            _ => Err(usage()),
        },
        "charlier1" => Ok(charlier1(lambda, len)),
        "randomwalk" => {
            let seed = args.trim().parse::<u64>().map_err(|_| usage())?;
            Ok(positive_function(&mut stream_rng(seed, 0), len))
        }
        _ => Err(usage()),
    }
}

pub fn parse_grid(arg: &str) -> Result<Vec<f64>> {
    let usage = || Error::Usage(format!("bad grid `{arg}`; expected {GRID_GRAMMAR}"));
    let (name, args) = match arg.split_once(':') {
        Some((n, a)) => (n.trim(), a),
        None => ("", arg),
    };
    let nums: Vec<f64> = args
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| usage()))
        .collect::<Result<_>>()?;
    match (name, &nums[..]) {
        ("", _) => Ok(nums),
        ("geom", &[t0, t1, ratio]) => geometric_grid(t0, t1, ratio),
        ("lin", &[a, b, n]) if n >= 1.0 && n.fract() == 0.0 => {
            let n = n as usize;
            if n == 1 {
                return Ok(vec![a]);
            }
            Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
        }
        _ => Err(usage()),
    }
}

fn parse_c(arg: &str, auto: impl FnOnce() -> Result<f64>) -> Result<f64> {
    if arg.trim() == "auto" {
        return auto();
    }
    arg.trim()
        .parse::<f64>()
        .map_err(|_| Error::Usage(format!("bad c `{arg}`; expected a number or `auto`")))
}

fn report(command: &str, settings: Value, result: Value, checks: Vec<Check>) -> Report {
    Report {
        command: command.to_string(),
        settings,
        passed: checks.iter().all(|c| c.passed),
        exploratory: false,
        result,
        checks,
    }
}

fn exploratory(command: &str, settings: Value, result: Value) -> Report {
    Report {
        command: command.to_string(),
        settings,
        result,
        checks: Vec::new(),
        exploratory: true,
        passed: true,
    }
}

/// Runs the parsed command without touching the filesystem.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let common = &cli.common;
    if !(common.eps_tail > 0.0 && common.eps_tail <= 1e-3) {
        return Err(Error::Usage("--eps-tail must lie in (0, 1e-3]".into()));
    }
    if !(common.tol > 0.0) {
        return Err(Error::Usage("--tol must be positive".into()));
    }
    let settings = json!({ "common": to_value(common), "command": to_value(&cli.command) });
    let dist = |s: &str| parse_dist(s, common.eps_tail);
    let seed = common.seed;
    let mut rows = Vec::new();
    let report = match &cli.command {
        Command::Curvature { dist: arg } => {
            let v = dist(arg)?;
            let r = CurvatureReport::compute(&v)?;
            rows = r
                .profile
                .iter()
                .enumerate()
                .map(|(x, &e)| CsvRow {
                    t: x as f64,
                    value: e,
                    bound: r.c_inf,
                    margin: e - r.c_inf,
                })
                .collect();
            let mut checks = vec![check(
                "curvature_mean_bound",
                r.mean_bound_ok,
                json!({ "c_inf": r.c_inf, "inverse_mean": 1.0 / r.mean }),
            )];
            if let Some(u) = r.ulc_c {
                checks.push(check(
                    "ulc_curvature_bound",
                    r.c_inf >= u - 1e-12,
                    json!({ "c_inf": r.c_inf, "ulc_c": u }),
                ));
            }
            report("curvature", settings, to_value(&r), checks)
        }
        Command::Evolve { dist: arg, init, t, f } => {
            let v = dist(arg)?;
            v.require_full_support()?;
            let p0 = dist(init)?.with_window(v.max_index())?;
            let pt = evolve_pmf(&v, &p0, *t, common.tol)?;
            let d0 = relative_entropy(&p0, &v)?;
            let dt = relative_entropy(&pt, &v)?;
            let stationary = evolve_pmf(&v, &v, *t, common.tol)?;
            let drift = stationary
                .values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let mut checks = vec![
                check(
                    "relative_entropy_nonincreasing",
                    dt <= d0 + 1e-12,
                    json!({ "initial": d0, "final": dt }),
                ),
                check("stationarity", drift <= 1e-10, json!({ "sup_drift": drift })),
            ];
            let mut result = json!({
                "values": pt.values(),
                "relative_entropy_initial": d0,
                "relative_entropy_final": dt,
            });
            if let Some(fs) = f {
                let f0 = parse_function(fs, v.len(), v.mean())?;
                let ft = evolve_function(&v, &f0, *t, common.tol)?;
                let lhs = csum(pt.values().iter().zip(f0.values()).map(|(p, f)| p * f));
                let rhs = csum(p0.values().iter().zip(ft.values()).map(|(p, f)| p * f));
                let scale = csum(pt.values().iter().zip(f0.values()).map(|(p, f)| (p * f).abs()));
                checks.push(check(
                    "pmf_function_duality",
                    (lhs - rhs).abs() <= 1e-9 * scale.max(1e-300),
                    json!({ "pmf_side": lhs, "function_side": rhs }),
                ));
                result["function_values"] = to_value(&ft.values());
            }
            report("evolve", settings, result, checks)
        }
        Command::Verify { which } => match which {
            Verify::Lsi { dist: arg, f, c } => {
                let v = dist(arg)?;
                v.require_full_support()?;
                let c = parse_c(c, || c_log_concave_constant(&v))?;
                let f = parse_function(f, v.len(), v.mean())?;
                let r = lsi_verify(&v, &f, c)?;
                let checks = vec![
                    check(
                        "lsi",
                        r.lsi_holds,
                        json!({ "gap": r.gaps.lsi, "scale": r.scale, "hypothesis_ok": r.hypothesis_ok }),
                    ),
                    check(
                        "lsi_decomposition",
                        r.decomposition_ok,
                        json!({ "residual": r.gaps.decomposition }),
                    ),
                    check(
                        "lsi_ordering",
                        r.ordering_ok,
                        json!({ "bl_minus_new": r.gaps.bl_minus_new }),
                    ),
                ];
                report("verify lsi", settings, to_value(&r), checks)
            }
            Verify::Poincare { dist: arg, c, trials } => {
                let v = dist(arg)?;
                v.require_full_support()?;
                let c = parse_c(c, || c_log_concave_constant(&v))?;
                let r = poincare_check(&v, c, *trials, seed)?;
                let pc = poincare_constant(&v)?;
                let checks = vec![
                    check("poincare_randomized", r.passed, json!({ "violations": r.violations })),
                    check(
                        "poincare_constant_bound",
                        pc <= 1.0 / c + 1e-8,
                        json!({ "poincare_constant": pc, "inverse_c": 1.0 / c }),
                    ),
                ];
                let result = json!({ "randomized": to_value(&r), "poincare_constant": pc });
                report("verify poincare", settings, result, checks)
            }
            Verify::Be { dist: arg, c, trials } => {
                let v = dist(arg)?;
                v.require_full_support()?;
                let c = parse_c(c, || c_log_concave_constant(&v))?;
                let r = integrated_be_check(&v, c, *trials, seed)?;
                let checks = vec![check(
                    "integrated_be",
                    r.passed,
                    json!({ "violations": r.violations, "extremal_ratio": r.extremal_ratio }),
                )];
                report("verify be", settings, to_value(&r), checks)
            }
        },
        Command::Constants { dist: arg, restarts } => {
            let v = dist(arg)?;
            v.require_full_support()?;
            let c = c_log_concave_constant(&v)?;
            let pc = poincare_constant(&v)?;
            let lsi = lsi_constant_estimate(&v, *restarts, seed)?;
            let result = json!({
                "c_inf": c,
                "inverse_c": 1.0 / c,
                "poincare_constant": pc,
                "lsi_constant_lower_estimate": lsi,
            });
            let checks = vec![
                check(
                    "poincare_constant_bound",
                    pc <= 1.0 / c + 1e-8,
                    json!({ "slack": 1.0 / c - pc }),
                ),
                check(
                    "lsi_constant_bound",
                    lsi <= (1.0 / c) * (1.0 + 1e-9),
                    json!({ "slack": 1.0 / c - lsi }),
                ),
            ];
            report("constants", settings, result, checks)
        }
        Command::Concentration {
            dist: arg,
            g,
            c,
            t,
            sigma,
        } => {
            let v = dist(arg)?;
            v.require_full_support()?;
            let c = parse_c(c, || c_log_concave_constant(&v))?;
            let g = parse_function(g, v.len(), v.mean())?;
            let grid = parse_grid(t)?;
            let r = concentration_report(&v, &g, c, &grid)?;
            rows = (0..grid.len())
                .map(|i| CsvRow {
                    t: grid[i],
                    value: r.exact_tail[i],
                    bound: r.bound_h[i],
                    margin: r.bound_h[i] - r.exact_tail[i],
                })
                .collect();
            let mut checks = vec![check("concentration_bound", r.holds, json!({ "c_used": r.c_used }))];
            let mut result = json!({ "concentration": to_value(&r) });
            if let Some(s) = sigma {
                let scan = chernoff_scan(&v, &g, c, &parse_grid(s)?)?;
                checks.push(check(
                    "chernoff_scan",
                    scan.iter().all(|r| r.ok),
                    json!({ "rows": scan.len() }),
                ));
                result["chernoff_scan"] = to_value(&scan);
            }
            report("concentration", settings, result, checks)
        }
        Command::Decay { lambda, init, t } => {
            let p0 = dist(init)?;
            let grid = parse_grid(t)?;
            let r = thinning_decay_trace(&p0, *lambda, &grid, common.tol)?;
            rows = r
                .rows
                .iter()
                .map(|d| CsvRow {
                    t: d.t,
                    value: d.value,
                    bound: d.bound,
                    margin: d.margin,
                })
                .collect();
            let checks = vec![check("entropy_decay", r.holds, json!({ "rows": r.rows.len() }))];
            report("decay", settings, to_value(&r), checks)
        }
        Command::Hyper {
            lambda,
            g,
            p,
            t,
            window,
        } => {
            let is_charlier = g.trim() == "charlier1";
            let len = match window {
                Some(n) => *n,
                None if is_charlier => {
                    let m = lambda * (p / lambda).exp();
                    (m + 8.0 * m.sqrt() + 10.0).ceil() as usize
                }
                None => 40,
            };
            let g0 = parse_function(g, len, *lambda)?;
            let grid = parse_grid(t)?;
            let r = hypercontractivity_trace(*lambda, &g0, *p, &grid, common.tol)?;
            let u0 = r.rows.first().map_or(0.0, |row| row.u);
            rows = r
                .rows
                .iter()
                .map(|h| CsvRow {
                    t: h.t,
                    value: h.u,
                    bound: u0,
                    margin: h.u - u0,
                })
                .collect();
            let mut checks = vec![check("hyper_monotone", r.monotone, json!({ "rows": r.rows.len() }))];
            if is_charlier {
                let cst = charlier_constant(*lambda, *p);
                let worst = r.rows.iter().map(|h| (h.u + cst).abs()).fold(0.0, f64::max);
                checks.push(check(
                    "charlier_flat",
                    worst <= 1e-8,
                    json!({ "constant": cst, "worst_deviation": worst, "window": len }),
                ));
            }
            report("hyper", settings, to_value(&r), checks)
        }
        Command::Multidim { which } => match which {
            Multidim::Certify { dists, c } => {
                let factors = split_dists(dists).iter().map(|s| dist(s)).collect::<Result<Vec<_>>>()?;
                let v = product_pmf(&factors)?;
                let c = parse_c(c, || esym_c_max(&v))?;
                let r = esym_psd_certify(&v, c)?;
                let checks = vec![check(
                    "esym_psd",
                    r.certified,
                    json!({ "min_eigenvalue": r.min_eigenvalue, "worst_site": r.worst_site }),
                )];
                report("multidim certify", settings, to_value(&r), checks)
            }
            Multidim::Verify { dists, c, trials } => {
                let factors = split_dists(dists).iter().map(|s| dist(s)).collect::<Result<Vec<_>>>()?;
                let v = product_pmf(&factors)?;
                let c = parse_c(c, || esym_c_max(&v))?;
                let be = integrated_be_check_d(&v, c, *trials, seed)?;
                let shape = v.shape().clone();
                let gaps = (0..*trials)
                    .map(|i| {
                        let mut rng = stream_rng(seed ^ 0x9e37_79b9_7f4a_7c15, i as u64);
                        logsob_gap_term(&v, &interior_function_d(&mut rng, &shape), c)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let gap_worst = gaps
                    .iter()
                    .map(|g| if g.scale > 0.0 { g.value / g.scale } else { 0.0 })
                    .fold(f64::INFINITY, f64::min);
                let f = positive_function_d(&mut stream_rng(seed, u64::MAX), &shape);
                let comm = one_step_commutation_residual_d(&v, &f)?;
                let checks = vec![
                    check("esym_psd", be.psd_certified, json!({ "c": c })),
                    check(
                        "integrated_be_d",
                        be.violations == 0,
                        json!({ "violations": be.violations, "extremal_ratio": be.extremal_ratio }),
                    ),
                    check(
                        "poincare_d",
                        be.poincare_violations == 0,
                        json!({ "worst_ratio": be.worst_poincare_ratio }),
                    ),
                    check(
                        "logsob_gap_product",
                        gaps.iter().all(|g| g.nonnegative()),
                        json!({ "worst_relative": if gaps.is_empty() { 0.0 } else { gap_worst } }),
                    ),
                    check(
                        "commutation_d",
                        comm.worst_relative() <= 1e-12,
                        json!({ "worst_relative": comm.worst_relative() }),
                    ),
                ];
                report("multidim verify", settings, to_value(&be), checks)
            }
            Multidim::Probe {
                samples,
                functions,
                size,
            } => {
                let r = logsob_probe(*samples, *functions, *size, seed)?;
                exploratory("multidim probe", settings, to_value(&r))
            }
        },
        Command::ProbeConvolution { samples } => {
            let r = convolution_probe(*samples, seed)?;
            exploratory("probe-convolution", settings, to_value(&r))
        }
    };
    Ok(Outcome { report, rows })
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// `key = value` lines (blank lines and `#` comments skipped) as flags.
pub fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("{}:{}: expected `key = value`", path.display(), n + 1)))?;
        out.push(OsString::from(format!("--{}", k.trim().replace('_', "-"))));
        out.push(OsString::from(v.trim()));
    }
    Ok(out)
}

/// Parses arguments, appending any `--config` entries so that they win.
pub fn parse<I, T>(args: I) -> std::result::Result<Cli, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Some(path) = config_path(&args) {
        args.extend(config_args(&path).map_err(ParseFailure::Config)?);
    }
    Cli::try_parse_from(args).map_err(ParseFailure::Clap)
}

#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Config(Error),
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

/// Full front end: parse, execute, write. Returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let json = outcome.to_json();
    let target = cli.common.output.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(|dir| PathBuf::from(dir).join(format!("{}.json", outcome.report.command.replace(' ', "-"))))
    });
    let written = match &target {
        Some(path) => write_file(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    };
    let written = written.and_then(|_| match &cli.common.csv {
        Some(path) => write_file(path, &outcome.to_csv()?),
        None => Ok(()),
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 1;
    }
    for c in outcome.report.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {}", c.check);
    }
    if outcome.report.passed {
        0
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(args: &[&str]) -> Result<Outcome> {
        let mut full = vec!["be-workbench"];
        full.extend_from_slice(args);
        execute(&parse(full).expect("parses"))
    }

    #[test]
    fn grammar() {
        assert_eq!(
            split_dists("poisson:2,bernoullisum:0.2,0.4,negbin:3,0.4"),
            ["poisson:2", "bernoullisum:0.2,0.4", "negbin:3,0.4"]
        );
        assert_eq!(parse_grid("lin:1,3,3").unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("0.5,2").unwrap(), [0.5, 2.0]);
        assert!(matches!(parse_dist("gamma:2", 1e-12), Err(Error::Usage(m)) if m.contains("poisson:<lambda>")));
        assert!(matches!(parse_function("sin", 4, 1.0), Err(Error::Usage(_))));
        assert_eq!(parse_dist("weights:1,1", 1e-12).unwrap().values(), [0.5, 0.5]);
    }

    #[test]
    fn curvature_of_poisson() {
        let o = outcome(&["curvature", "poisson:2"]).unwrap();
        let c = o.report.result["c_inf"].as_f64().unwrap();
        assert!((c - 0.5).abs() < 1e-12);
        assert!(o.report.passed);
        assert_eq!(o.rows.len(), o.report.result["profile"].as_array().unwrap().len());
    }

    #[test]
    fn lsi_sharp_case_and_support_error() {
        let o = outcome(&["verify", "lsi", "--dist", "poisson:2", "--f", "exp:0.3", "--c", "auto"]).unwrap();
        assert!(o.report.passed);
        let gap = o.report.result["gaps"]["lsi"].as_f64().unwrap();
        assert!(gap.abs() < 1e-8);
        let e = outcome(&["verify", "lsi", "--dist", "weights:1,0,1", "--f", "id"]).unwrap_err();
        assert!(matches!(e, Error::NotFullSupport { .. }));
    }

    #[test]
    fn failed_certification_is_an_assertion_failure() {
        let o = outcome(&["multidim", "certify", "--dists", "poisson:2,poisson:4", "--c", "0.6"]).unwrap();
        assert!(!o.report.passed);
        let o = outcome(&["multidim", "certify", "--dists", "poisson:2,poisson:4"]).unwrap();
        assert!(o.report.passed);
    }

    #[test]
    fn config_file_overrides_flags() {
        let dir = std::env::temp_dir().join(format!("bew-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        fs::write(&path, "# overrides\nseed = 11\n").unwrap();
        let cli = parse([
            "be-workbench",
            "--seed",
            "3",
            "--config",
            path.to_str().unwrap(),
            "probe-convolution",
            "--samples",
            "2",
        ])
        .unwrap();
        assert_eq!(cli.common.seed, 11);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_has_fixed_columns() {
        let o = outcome(&["decay", "--lambda", "2", "--init", "poisson:1", "--t", "0.5,1"]).unwrap();
        let text = o.to_csv().unwrap();
        assert!(text.starts_with("t,value,bound,margin\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
