//! `cylwalk`: experiment runner over the core library. Subcommands map to
//! single operations plus an aggregate `suite`; every run echoes its config
//! into the JSON report and writes CSV artifacts to the output directory.
//!
//! Exit codes: 0 pass, 2 test failure, 3 inconclusive, 64 unknown
//! subcommand, 65 invalid config, 70 budget exceeded.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use cylwalk::disconnect::{self, DkMode};
use cylwalk::domination::{self, DominationParams, ScaleStatus};
use cylwalk::interlace::{self, CloudSampler};
use cylwalk::lattice::{make_box, Geometry, Point, Region};
use cylwalk::report::{write_json, Csv};
use cylwalk::rng::RngStream;
use cylwalk::suite::{self, SuiteStatus};
use cylwalk::CoreError;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_CONFIG: u8 = 65;
const EXIT_BUDGET: u8 = 70;

#[derive(Parser)]
#[command(name = "cylwalk", about = "random walk on the discrete cylinder vs random interlacements", disable_help_subcommand = true)]
struct Cli {
    /// Flat key=value config file; command-line flags win over file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts (default: env CYLWALK_OUTPUT_DIR, else ".").
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Green-function symmetry, cross-method hitting identities, sandwich bounds.
    PotentialCheck(Common),
    /// Exact identity linking the two-level start's hitting law to the slab equilibrium measure.
    Identity(Common),
    /// Exact torus re-entry law, its sup-TV against uniform, and the maximal-coupling mismatch test.
    Homogenize {
        #[command(flatten)]
        common: Common,
        /// Coupled excursions per replicate (0 disables the coupling run).
        #[arg(long)]
        excursions: Option<u32>,
    },
    /// Departure-sign chain against its exact stay probability.
    TypeChain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        departures: Option<u32>,
    },
    /// Exact occupancy transfer recursion against the rate-function bound.
    LdCheck {
        #[command(flatten)]
        common: Common,
        /// Pair state index, 0..4 over (1,1),(1,-1),(-1,1),(-1,-1).
        #[arg(long)]
        gamma: Option<usize>,
        /// Chain length of the exact recursion.
        #[arg(long)]
        steps: Option<u32>,
    },
    /// Sample the Poissonized excursion measure and its trace on A.
    Poissonize(Common),
    /// Truncate at C~ with sprinkling; also the exact detour-probability ratio.
    Sprinkle {
        #[command(flatten)]
        common: Common,
        /// Override the mesoscopic scale M.
        #[arg(long)]
        m: Option<i64>,
    },
    /// End-to-end monotone-statistic domination experiment.
    Dominate(Common),
    /// Sample one interlacement cloud in a box and report its trace.
    Interlace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radius: Option<i64>,
    },
    /// Void-probability law of the vacant set against exp(-u cap).
    Vacant {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radius: Option<i64>,
        #[arg(long)]
        kprime_radius: Option<i64>,
    },
    /// Planar *-connectivity decay of the interlacement trace.
    StarDecay {
        #[command(flatten)]
        common: Common,
        /// Comma-separated radii L.
        #[arg(long)]
        ls: Option<String>,
    },
    /// Disconnection time of the cylinder by the walk's trace.
    Disconnect(Common),
    /// Local-time functional: Laplace transform against the closed form.
    Zeta {
        #[command(flatten)]
        common: Common,
        /// Discretization length.
        #[arg(long = "n-steps")]
        n_steps: Option<u64>,
    },
    /// KS distance of scaled excursion-count times to the local-time limit.
    DkScaling {
        #[command(flatten)]
        common: Common,
        /// Second cylinder size for the decrease comparison.
        #[arg(long = "N2")]
        n2: Option<u32>,
    },
    /// Quantiles of the scaled disconnection time across N.
    Tightness {
        #[command(flatten)]
        common: Common,
        /// Comma-separated list of N values.
        #[arg(long)]
        n_list: Option<String>,
    },
    /// Full acceptance suite.
    Suite(Common),
}

// --- config resolution -----------------------------------------------------

struct Cfg {
    file: HashMap<String, String>,
}

#[derive(Debug)]
struct CfgError(String);

impl Cfg {
    fn load(path: Option<&Path>) -> Result<Cfg, CfgError> {
        let mut file = HashMap::new();
        if let Some(path) = path {
            let body = std::fs::read_to_string(path)
                .map_err(|e| CfgError(format!("config {}: {e}", path.display())))?;
            for (lineno, line) in body.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CfgError(format!("config line {}: missing '='", lineno + 1)))?;
                file.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Cfg { file })
    }

    /// Flag wins over file value wins over default; missing without default
    /// is a config error.
    fn get<T: FromStr + Copy>(
        &self,
        flag: Option<T>,
        key: &str,
        default: Option<T>,
    ) -> Result<T, CfgError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(raw) = self.file.get(key) {
            return raw.parse().map_err(|_| CfgError(format!("config key {key}: bad value '{raw}'")));
        }
        default.ok_or_else(|| CfgError(format!("missing required key: {key}")))
    }

    fn get_string(&self, flag: Option<String>, key: &str, default: &str) -> String {
        flag.or_else(|| self.file.get(key).cloned()).unwrap_or_else(|| default.to_string())
    }
}

// --- run plumbing ----------------------------------------------------------

struct Out {
    dir: PathBuf,
}

impl Out {
    fn write_report<T: Serialize>(&self, name: &str, report: &T) -> Result<(), CoreError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CoreError::InvalidParams(format!("output dir: {e}")))?;
        write_json(&self.dir.join(name), report)
    }

    fn write_csv(&self, name: &str, content: &str) -> Result<(), CoreError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CoreError::InvalidParams(format!("output dir: {e}")))?;
        std::fs::write(self.dir.join(name), content)
            .map_err(|e| CoreError::InvalidParams(format!("write {name}: {e}")))
    }
}

fn exit_for(e: &CoreError) -> u8 {
    match e {
        CoreError::StepCapExceeded { .. } => EXIT_BUDGET,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::from(EXIT_PASS);
                }
                ErrorKind::InvalidSubcommand | ErrorKind::UnknownArgument => EXIT_USAGE,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match Cfg::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(CfgError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let dir = cli
        .output_dir
        .or_else(|| std::env::var_os("CYLWALK_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let out = Out { dir };
    match dispatch(cli.cmd, &cfg, &out) {
        Ok(code) => ExitCode::from(code),
        Err(Either::Cfg(CfgError(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Either::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

enum Either {
    Cfg(CfgError),
    Core(CoreError),
}

impl From<CfgError> for Either {
    fn from(e: CfgError) -> Either {
        Either::Cfg(e)
    }
}

impl From<CoreError> for Either {
    fn from(e: CoreError) -> Either {
        Either::Core(e)
    }
}

fn dom_params(c: &Common, cfg: &Cfg) -> Result<DominationParams, Either> {
    let d = cfg.get(c.d, "d", Some(2))?;
    let n = cfg.get(c.n, "N", None)?;
    let alpha = cfg.get(c.alpha, "alpha", None)?;
    let v = cfg.get(c.v, "v", None)?;
    let epsilon = cfg.get(c.epsilon, "epsilon", Some(0.5))?;
    Ok(DominationParams::new(d, n, alpha, v, epsilon)?)
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, Either> {
    raw.split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<Vec<T>, _>>()
        .map_err(|_| Either::Cfg(CfgError(format!("bad {what} list: '{raw}'"))))
}

fn dispatch(cmd: Cmd, cfg: &Cfg, out: &Out) -> Result<u8, Either> {
    match cmd {
        Cmd::PotentialCheck(c) => {
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let rep = suite::run_criterion(2, seed)?;
            println!("{}", rep.line());
            out.write_report(
                "potential_check.json",
                &json!({"config": {"seed": seed}, "report": rep}),
            )?;
            Ok(status_code(rep.status))
        }
        Cmd::Identity(c) => {
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let n = cfg.get(c.n, "N", None)?;
            let d = cfg.get(c.d, "d", Some(2))?;
            let params = DominationParams::new(d, n, 0.8, 6.0, 0.5)?;
            let g = params.geometry();
            let slab = cylwalk::lattice::slab_region(&g, -params.r_n + 1, params.r_n - 1);
            use rand::seq::IteratorRandom;
            let mut rng = RngStream::new(seed, 0).rng();
            let pts: Vec<Point> = slab.sorted_points().into_iter().choose_multiple(&mut rng, 3);
            let k_set = Region::from_points(g, pts);
            let rep = domination::key_identity(&k_set, &params)?;
            let pass = rep.max_residual <= 1e-9 && rep.sum_residual <= 1e-9;
            println!(
                "identity: max residual {:.3e}, sum residual {:.3e} [{}]",
                rep.max_residual,
                rep.sum_residual,
                if pass { "PASS" } else { "FAIL" }
            );
            out.write_report(
                "identity.json",
                &json!({
                    "config": {"d": d, "N": n, "seed": seed},
                    "max_residual": {"value": rep.max_residual, "provenance": "exact"},
                    "sum_residual": {"value": rep.sum_residual, "provenance": "exact"},
                    "capacity": {"value": rep.capacity, "provenance": "exact"},
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::Homogenize { common: c, excursions } => {
            let d = cfg.get(c.d, "d", Some(2))?;
            let n = cfg.get(c.n, "N", None)?;
            let law = domination::return_law(d, n)?;
            let mut csv = Csv::new(&["flat_offset", "probability", "provenance"]);
            for (i, p) in law.law.iter().enumerate() {
                csv.push(vec![i.to_string(), Csv::cell_f64(*p), "exact".into()]);
            }
            out.write_csv("homogenize_law.csv", &csv.to_string())?;
            let exc = cfg.get(excursions, "excursions", Some(0u32))?;
            let mut coupled = json!(null);
            let mut pass = true;
            if exc >= 2 {
                let seed = cfg.get(c.seed, "seed", Some(1))?;
                let reps = cfg.get(c.reps, "reps", Some(200))?;
                let budget = cfg.get(c.budget, "budget", Some(400_000_000))?;
                let cr =
                    domination::couple_excursions(d, n, exc, reps, budget, RngStream::new(seed, 0))?;
                pass = cr.zscore.abs() <= 3.0;
                coupled = json!({
                    "attempts": cr.attempts,
                    "mismatches": cr.mismatches,
                    "zscore": cr.zscore,
                    "truncated_reps": cr.truncated_reps,
                });
            }
            println!("homogenize: sup TV {:.3e} [{}]", law.tv, if pass { "PASS" } else { "FAIL" });
            out.write_report(
                "homogenize.json",
                &json!({
                    "config": {"d": d, "N": n},
                    "tv": {"value": law.tv, "provenance": "exact"},
                    "coupling": coupled,
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::TypeChain { common: c, departures } => {
            let n = cfg.get(c.n, "N", None)?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let reps = cfg.get(c.reps, "reps", Some(400))?;
            let deps = cfg.get(departures, "departures", Some(6u32))?;
            let rep = domination::type_chain(n, deps, reps, RngStream::new(seed, 0))?;
            let pass = rep.chi_p > 0.01;
            println!(
                "type-chain: p_N {:.6}, stay {} / switch {}, chi p {:.3} [{}]",
                rep.p_n,
                rep.stay,
                rep.switch,
                rep.chi_p,
                if pass { "PASS" } else { "FAIL" }
            );
            out.write_report(
                "type_chain.json",
                &json!({
                    "config": {"N": n, "seed": seed, "reps": reps, "departures": deps},
                    "p_n": {"value": rep.p_n, "provenance": "exact"},
                    "chi_p": {"value": rep.chi_p, "provenance": format!("mc({})", reps)},
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::LdCheck { common: c, gamma, steps } => {
            let n = cfg.get(c.n, "N", None)?;
            let gamma = cfg.get(gamma, "gamma", Some(0))?;
            let v = cfg.get(c.v, "v", Some(0.5))?;
            let steps = cfg.get(steps, "steps", Some(12u32))?;
            let (p, q) = domination::p_q_n(n);
            let rep = domination::ld_check(gamma, v, steps, p, q)?;
            let pass = if rep.bound > 0.0 { rep.lhs < rep.bound || rep.tight } else { rep.lhs == 0.0 };
            println!(
                "ld-check: lhs {:.6e} vs bound {:.6e} (psi {:.6}) [{}]",
                rep.lhs,
                rep.bound,
                rep.psi,
                if pass { "PASS" } else { "FAIL" }
            );
            out.write_report(
                "ld_check.json",
                &json!({
                    "config": {"N": n, "gamma": gamma, "v": v, "steps": steps},
                    "lhs": {"value": rep.lhs, "provenance": "exact"},
                    "bound": {"value": rep.bound, "provenance": "exact"},
                    "psi": {"value": rep.psi, "provenance": "exact"},
                    "tight": rep.tight,
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::Poissonize(c) => {
            let params = dom_params(&c, cfg)?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let budget = cfg.get(c.budget, "budget", Some(200_000_000))?;
            let mut rng = RngStream::new(seed, 0).rng();
            let (mu, trace) = domination::poissonize(&params, &mut rng, budget)?;
            println!(
                "poissonize: J {} atoms {} trace {} (lambda' {:.4})",
                mu.j,
                mu.atoms.len(),
                trace.len(),
                mu.lambda_nominal
            );
            out.write_report(
                "poissonize.json",
                &json!({
                    "config": {"d": params.d, "N": params.n, "alpha": params.alpha,
                               "v": params.v, "epsilon": params.epsilon, "seed": seed},
                    "j": mu.j,
                    "atoms": mu.atoms.len(),
                    "trace_on_a": trace.len(),
                    "lambda_prime": {"value": mu.lambda_nominal, "provenance": "exact"},
                }),
            )?;
            Ok(EXIT_PASS)
        }
        Cmd::Sprinkle { common: c, m } => {
            let params = dom_params(&c, cfg)?;
            let m = match cfg.get(m, "m", Some(-1i64))? {
                -1 => None,
                other => Some(other),
            };
            let rep = domination::sprinkling_ratio(&params, m)?;
            let degenerate = rep.status == ScaleStatus::Degenerate;
            println!(
                "sprinkle: M {} C-radius {} max ratio {:.4e} constant {:.4e} [{}]",
                rep.m,
                rep.c_radius,
                rep.max_ratio,
                rep.measured_constant,
                if degenerate { "INCONCLUSIVE" } else { "PASS" }
            );
            out.write_report(
                "sprinkle.json",
                &json!({
                    "config": {"d": params.d, "N": params.n, "alpha": params.alpha,
                               "v": params.v, "epsilon": params.epsilon, "M": rep.m},
                    "status": format!("{:?}", rep.status),
                    "max_ratio": {"value": rep.max_ratio, "provenance": "exact"},
                    "measured_constant": {"value": rep.measured_constant, "provenance": "exact"},
                }),
            )?;
            Ok(if degenerate { EXIT_INCONCLUSIVE } else { EXIT_PASS })
        }
        Cmd::Dominate(c) => {
            let params = dom_params(&c, cfg)?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let reps = cfg.get(c.reps, "reps", Some(200))?;
            let budget = cfg.get(c.budget, "budget", Some(1_000_000_000))?;
            let rep = domination::domination_experiment(
                &params,
                reps,
                None,
                budget,
                RngStream::new(seed, 0),
            )?;
            let pass = rep.frac_ok >= 0.99 && rep.count_z <= 3.0;
            println!(
                "dominate: coverage ok {:.1}% count means {:.3}/{:.3} z {:.2}{} [{}]",
                100.0 * rep.frac_ok,
                rep.count_walk_mean,
                rep.count_int_mean,
                rep.count_z,
                if rep.degenerate_k { " (K=0)" } else { "" },
                if pass { "PASS" } else { "FAIL" }
            );
            let mut csv = Csv::new(&["x", "y", "z", "walk_cov", "int_cov", "provenance"]);
            for (p, (w, i)) in rep.points.iter().zip(rep.walk_cov.iter().zip(rep.int_cov.iter())) {
                csv.push(vec![
                    p.coords()[0].to_string(),
                    p.coords()[1].to_string(),
                    p.coords()[2].to_string(),
                    Csv::cell_f64(*w),
                    Csv::cell_f64(*i),
                    format!("mc(binomial@{reps})"),
                ]);
            }
            out.write_csv("dominate_coverage.csv", &csv.to_string())?;
            out.write_report(
                "dominate.json",
                &json!({
                    "config": {"d": params.d, "N": params.n, "alpha": params.alpha,
                               "v": params.v, "epsilon": params.epsilon,
                               "seed": seed, "reps": reps},
                    "degenerate_k": rep.degenerate_k,
                    "frac_ok": {"value": rep.frac_ok, "provenance": format!("mc({reps})")},
                    "count_z": {"value": rep.count_z, "provenance": format!("mc({reps})")},
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::Interlace { common: c, radius } => {
            let radius = cfg.get(radius, "radius", Some(2i64))?;
            let u = cfg.get(c.u, "u", Some(1.0))?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let g = Geometry::lattice(3)?;
            let k = make_box(&Point::origin(&g), radius, &g)?;
            let sampler = CloudSampler::new(&k, None, None)?;
            let mut rng = RngStream::new(seed, 0).rng();
            let cloud = sampler.sample_cloud(u, &mut rng);
            let trace = interlace::trace(&cloud, &k);
            println!(
                "interlace: cap {:.4} trajectories {} trace {}/{}",
                sampler.cap(),
                cloud.trajectories.len(),
                trace.len(),
                k.len()
            );
            out.write_report(
                "interlace.json",
                &json!({
                    "config": {"radius": radius, "u": u, "seed": seed},
                    "capacity": {"value": sampler.cap(), "provenance":
                        format!("windowed({})", sampler.leakage())},
                    "trajectories": cloud.trajectories.len(),
                    "trace": trace.len(),
                }),
            )?;
            Ok(EXIT_PASS)
        }
        Cmd::Vacant { common: c, radius, kprime_radius } => {
            let radius = cfg.get(radius, "radius", Some(1i64))?;
            let kp_radius = cfg.get(kprime_radius, "kprime_radius", Some(0i64))?;
            let u = cfg.get(c.u, "u", Some(1.0))?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let reps = cfg.get(c.reps, "reps", Some(20_000))?;
            let g = Geometry::lattice(3)?;
            let k = make_box(&Point::origin(&g), radius, &g)?;
            let kp = make_box(&Point::origin(&g), kp_radius, &g)?;
            let rep = interlace::vacant_check(&kp, &k, u, reps, None, RngStream::new(seed, 0))?;
            let pass = rep.zscore.abs() <= 3.0;
            println!(
                "vacant: frequency {:.5} target {:.5} z {:.2} [{}]",
                rep.frequency,
                rep.target,
                rep.zscore,
                if pass { "PASS" } else { "FAIL" }
            );
            out.write_report(
                "vacant.json",
                &json!({
                    "config": {"radius": radius, "kprime_radius": kp_radius,
                               "u": u, "seed": seed, "reps": reps},
                    "frequency": {"value": rep.frequency, "provenance": format!("mc({})", rep.stderr)},
                    "target": {"value": rep.target, "provenance": format!("windowed({})", rep.leakage)},
                    "zscore": {"value": rep.zscore, "provenance": format!("mc({})", rep.stderr)},
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::StarDecay { common: c, ls } => {
            let u = cfg.get(c.u, "u", Some(0.5))?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let reps = cfg.get(c.reps, "reps", Some(500))?;
            let ls_raw = cfg.get_string(ls, "ls", "2,4,8");
            let ls: Vec<i64> = parse_list(&ls_raw, "L")?;
            let table = interlace::planar_star_decay(u, &ls, reps, RngStream::new(seed, 0))?;
            let mut csv = Csv::new(&["l", "p_hat", "stderr", "provenance"]);
            for row in &table.rows {
                csv.push(vec![
                    row.l.to_string(),
                    Csv::cell_f64(row.p_hat),
                    Csv::cell_f64(row.stderr),
                    format!("mc({})", row.stderr),
                ]);
            }
            out.write_csv("star_decay.csv", &csv.to_string())?;
            println!(
                "star-decay: u {} exponent {:?} over L {:?}",
                u,
                table.exponent,
                ls
            );
            out.write_report(
                "star_decay.json",
                &json!({
                    "config": {"u": u, "seed": seed, "reps": reps, "ls": ls},
                    "exponent": table.exponent,
                }),
            )?;
            Ok(EXIT_PASS)
        }
        Cmd::Disconnect(c) => {
            let d = cfg.get(c.d, "d", Some(2))?;
            let n = cfg.get(c.n, "N", None)?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let budget = cfg.get(c.budget, "budget", Some(1_000_000_000))?;
            let g = Geometry::cylinder(d, n)?;
            let mut rng = RngStream::new(seed, 0).rng();
            let rep = disconnect::disconnection_time(&g, &mut rng, None, budget, true)?;
            let scale = (n as f64).powi(2 * d as i32);
            println!(
                "disconnect: T_N {} (T_N/N^2d {:.3}) trace {} witness {}",
                rep.t_n,
                rep.t_n as f64 / scale,
                rep.trace_size,
                rep.witness.is_some()
            );
            out.write_report(
                "disconnect.json",
                &json!({
                    "config": {"d": d, "N": n, "seed": seed},
                    "t_n": rep.t_n,
                    "scaled": {"value": rep.t_n as f64 / scale, "provenance": "mc(single run)"},
                    "trace_size": rep.trace_size,
                    "height_range": rep.height_range,
                    "witness_len": rep.witness.as_ref().map(|w| w.len()),
                }),
            )?;
            Ok(EXIT_PASS)
        }
        Cmd::Zeta { common: c, n_steps } => {
            let u = cfg.get(c.u, "u", Some(1.0))?;
            let theta = cfg.get(c.theta, "theta", Some(1.0))?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let reps = cfg.get(c.reps, "reps", Some(100_000))?;
            let n = cfg.get(n_steps, "n", Some(10_000u64))?;
            let rep = disconnect::zeta_laplace_check(theta, u, reps, n, RngStream::new(seed, 0))?;
            let pass = rep.zscore_adjusted.abs() <= 3.0;
            println!(
                "zeta: mc {:.6} closed {:.6} z_adj {:.2} [{}]",
                rep.mc,
                rep.closed,
                rep.zscore_adjusted,
                if pass { "PASS" } else { "FAIL" }
            );
            out.write_report(
                "zeta.json",
                &json!({
                    "config": {"u": u, "theta": theta, "seed": seed, "reps": reps, "n": n},
                    "mc": {"value": rep.mc, "provenance": format!("mc({})", rep.stderr)},
                    "closed": {"value": rep.closed, "provenance": "exact"},
                    "allowance": {"value": rep.allowance, "provenance": "windowed(discretization)"},
                    "z_adjusted": {"value": rep.zscore_adjusted, "provenance": format!("mc({})", rep.stderr)},
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::DkScaling { common: c, n2 } => {
            let d = cfg.get(c.d, "d", Some(2))?;
            let n = cfg.get(c.n, "N", None)?;
            let alpha = cfg.get(c.alpha, "alpha", Some(3.0))?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let reps = cfg.get(c.reps, "reps", Some(200))?;
            let rep = disconnect::dk_scaling(
                d,
                n,
                alpha,
                None,
                reps,
                20_000,
                DkMode::InfOverLevels,
                RngStream::new(seed, 0),
            )?;
            let mut pass = rep.status == disconnect::DkStatus::Ok;
            let mut second = json!(null);
            if let Some(n2) = cfg.get(n2, "N2", Some(0u32)).ok().filter(|&x| x > 0) {
                let rep2 = disconnect::dk_scaling(
                    d,
                    n2,
                    alpha,
                    None,
                    reps,
                    20_000,
                    DkMode::InfOverLevels,
                    RngStream::new(seed, 1),
                )?;
                pass &= rep2.ks < rep.ks;
                second = json!({"N": n2, "ks": rep2.ks, "k": rep2.k_excursions});
            }
            println!(
                "dk-scaling: N {} K {} ks {:.3} [{}]",
                n,
                rep.k_excursions,
                rep.ks,
                if pass { "PASS" } else { "FAIL" }
            );
            out.write_report(
                "dk_scaling.json",
                &json!({
                    "config": {"d": d, "N": n, "alpha": alpha, "seed": seed, "reps": reps},
                    "k": rep.k_excursions,
                    "ks": {"value": rep.ks, "provenance": format!("mc({reps})")},
                    "second": second,
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::Tightness { common: c, n_list } => {
            let d = cfg.get(c.d, "d", Some(2))?;
            let seed = cfg.get(c.seed, "seed", Some(1))?;
            let reps = cfg.get(c.reps, "reps", Some(50))?;
            let budget = cfg.get(c.budget, "budget", Some(1_000_000_000))?;
            let raw = cfg.get_string(n_list, "n_list", "4,6");
            let ns: Vec<u32> = parse_list(&raw, "N")?;
            let rep = disconnect::tightness_report(d, &ns, reps, budget, RngStream::new(seed, 0))?;
            let medians: Vec<f64> = rep.rows.iter().map(|r| r.scaled_quantiles[2]).collect();
            let pass = rep.median_ratio <= 4.0;
            let mut csv = Csv::new(&["n", "q05", "q25", "q50", "q75", "q95", "provenance"]);
            for r in &rep.rows {
                let mut row = vec![r.n.to_string()];
                row.extend(r.scaled_quantiles.iter().map(|x| Csv::cell_f64(*x)));
                row.push(format!("mc(quantiles@{})", r.reps));
                csv.push(row);
            }
            out.write_csv("tightness.csv", &csv.to_string())?;
            println!(
                "tightness: medians {:?} ratio {:.2} [{}]",
                medians,
                rep.median_ratio,
                if pass { "PASS" } else { "FAIL" }
            );
            out.write_report(
                "tightness.json",
                &json!({
                    "config": {"d": d, "N": ns, "seed": seed, "reps": reps},
                    "median_ratio": {"value": rep.median_ratio, "provenance": format!("mc({reps})")},
                }),
            )?;
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Cmd::Suite(c) => {
            let seed = cfg.get(c.seed, "seed", Some(42))?;
            let reports = suite::run_all(seed);
            for rep in &reports {
                println!("{}", rep.line());
                for (name, content) in &rep.artifacts {
                    out.write_csv(name, content)?;
                }
            }
            out.write_report("suite.json", &json!({"config": {"seed": seed}, "criteria": reports}))?;
            let worst = reports
                .iter()
                .map(|r| status_code(r.status))
                .max()
                .unwrap_or(EXIT_PASS);
            Ok(worst)
        }
    }
}

fn status_code(s: SuiteStatus) -> u8 {
    match s {
        SuiteStatus::Pass => EXIT_PASS,
        SuiteStatus::Fail => EXIT_FAIL,
        SuiteStatus::Inconclusive => EXIT_INCONCLUSIVE,
    }
}
