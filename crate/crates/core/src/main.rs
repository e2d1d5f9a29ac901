//! Command-line front end: certificates, figures and experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use stable_cantor::affine::RealAffine;
use stable_cantor::cantor::Field;
use stable_cantor::constructions::dim::{dim_bound, min_n_for};
use stable_cantor::constructions::flagship::{certify_main, scale_config, MainCertificate};
use stable_cantor::constructions::svg::{scatter_svg, w1_figure};
use stable_cantor::constructions::{build_k1, verify_lemma_6_4, verify_prop_6_2, ConstructionError, ExampleParams};
use stable_cantor::covering::stability_radius;
use stable_cantor::lab::{empirical_intersection, flagship_orbit, perturb_and_retest, StressSystems, FRONTIER_CAP};
use stable_cantor::matrix::RMat;
use stable_cantor::scalar::Scalar;

#[derive(Debug, Parser)]
#[command(name = "stable-cantor", version, about = "Covering certificates for stable intersections of Cantor sets")]
struct Cli {
    /// Exact rational arithmetic (default).
    #[arg(long, global = true, conflicts_with = "float")]
    exact: bool,

    /// Re-check every certificate in floating point as well.
    #[arg(long, global = true)]
    float: bool,

    /// TOML file with the construction parameters.
    #[arg(long, global = true)]
    params: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Write the full report as JSON.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct Overrides {
    #[arg(long = "N")]
    n: Option<i64>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    tau: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// The three planar certificates of W_1.
    CertifyW1 {
        #[command(flatten)]
        o: Overrides,
    },
    /// The expanding cover of the fiber product W_d.
    CertifyWd {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[command(flatten)]
        o: Overrides,
    },
    /// The perturbed real examples on W_d × U.
    CertifyMain {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// The holomorphic variant over C^d.
    CertifyComplex {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 2_000)]
        samples: usize,
    },
    /// Points of K_1 x K_1 (CSV) or a scatter plot (SVG); `--w1 j` draws W_1 instead.
    Render {
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        w1: Option<usize>,
    },
    /// Dimension bound, or the least N reaching a target with `--eps`.
    Dim {
        #[arg(long = "N", default_value_t = 7)]
        n: i64,
        #[arg(long, default_value = "0")]
        tau: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        eps: Option<String>,
    },
    /// A certified orbit of (2, 0, Id) under the perturbed examples.
    Orbit {
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Seeded perturbation trials against the one-step certificate.
    Stress {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Noise size; defaults to half the stability radius.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn load_params(cli: &Cli, o: &Overrides) -> Res<ExampleParams> {
    let mut p = match &cli.params {
        Some(path) => ExampleParams::from_toml(&std::fs::read_to_string(path)?)?,
        None => ExampleParams::default(),
    };
    if let Some(n) = o.n {
        p.n = n;
    }
    if let Some(x) = &o.delta {
        p.delta = Scalar::parse(x)?;
    }
    if let Some(x) = &o.gamma {
        p.gamma = Scalar::parse(x)?;
    }
    if let Some(x) = &o.tau {
        p.tau = Scalar::parse(x)?;
    }
    p.validate()?;
    Ok(p)
}

fn flagship_params(cli: &Cli, d: usize) -> Res<ExampleParams> {
    Ok(match &cli.params {
        Some(path) => ExampleParams { d, ..ExampleParams::from_toml(&std::fs::read_to_string(path)?)? },
        None => ExampleParams::flagship(d),
    })
}

fn write_report<T: Serialize>(cli: &Cli, value: &T) -> Res<()> {
    if let Some(path) = &cli.report {
        std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    }
    Ok(())
}

fn summarize_main(c: &MainCertificate, samples: usize) -> bool {
    println!("field {:?}, d = {}, realified dimension {}", c.field, c.d, c.dim);
    println!("SL cover: {} elements, margin c = {:e}", c.sl.size(), c.sl.c);
    println!("planar chains: {}, longest word {}", c.chains.chains.len(), c.chains.chains.iter().map(|x| x.len()).max().unwrap_or(0));
    println!("one-step certificate: delta = {:e}, strong delta = {:e}", c.chains.one_step.delta.mid(), c.chains.one_step.strong_delta.mid());
    println!("lifted steps: w slack {:e}, U slack {:e}", c.w_slack, c.u_slack);
    println!("words from V x B_r: slack {:e}, U slack {:e}", c.word_slack, c.u_word_slack);
    if let Some(m) = &c.product_margin {
        println!("fiber-product margin {:e}", m.mid());
    }
    println!("expanding deviation {:e} < eps3 {:e}", c.expanding_deviation, c.eps3.mid());
    if let Some(dup) = &c.duplication {
        println!("literal duplication rank {} of {}", dup.rank, dup.algebra_dim);
    }
    let (bad, n) = c.brute_force(samples, 1);
    println!("brute force: {bad} counterexamples in {n} samples");
    let ok = c.passes() && bad == 0;
    println!("{}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn run(cli: &Cli) -> Res<bool> {
    match &cli.command {
        Command::CertifyW1 { o } => {
            let p = load_params(cli, o)?;
            let t = std::time::Instant::now();
            let r = verify_prop_6_2(&p)?;
            for (j, c) in r.certificates.iter().enumerate() {
                let margins: Vec<String> = c.margins.iter().map(|m| m.margin.to_string()).collect();
                println!("j = {}: margins [{}]", j + 1, margins.join(", "));
                if cli.float {
                    println!("  float re-check: {:e}", c.recheck_float()?.mid());
                }
            }
            println!("min margin {} ({:?})", r.min_margin, t.elapsed());
            write_report(cli, &r)?;
            Ok(r.min_margin.is_positive())
        }
        Command::CertifyWd { d, o } => {
            let p = load_params(cli, o)?;
            let r = verify_lemma_6_4(&p, *d)?;
            println!("{} families of {}, {} expanding operators", r.families.len(), r.families[0].members.len(), r.expanding_total);
            println!("delta {}, eps1 {:e}, eps2 {:e}", r.certificate.delta, r.eps1.mid(), r.eps2.mid());
            write_report(cli, &r)?;
            Ok(r.eps1.is_positive() && r.eps2.is_positive())
        }
        Command::CertifyMain { d, samples } => {
            let c = certify_main(&flagship_params(cli, *d)?, *d, Field::Real)?;
            let ok = summarize_main(&c, *samples);
            write_report(cli, &c)?;
            Ok(ok)
        }
        Command::CertifyComplex { d, samples } => {
            let c = certify_main(&flagship_params(cli, *d)?, *d, Field::Complex)?;
            let ok = summarize_main(&c, *samples);
            write_report(cli, &c)?;
            Ok(ok)
        }
        Command::Render { depth, out, w1 } => {
            let p = load_params(cli, &Overrides::default())?;
            let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("");
            if let Some(j) = w1 {
                std::fs::write(out, w1_figure(&p, *j)?)?;
                return Ok(true);
            }
            let k = build_k1(p.n, &Scalar::ratio(1, 100))?.product_system(2)?;
            let pts = k.render(*depth, 1 << 22)?;
            let body = match ext {
                "svg" => scatter_svg(&pts, 600.0),
                _ => pts.iter().map(|v| v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(",") + "\n").collect(),
            };
            std::fs::write(out, body)?;
            println!("{} points written to {}", pts.len(), out.display());
            Ok(true)
        }
        Command::Dim { n, tau, d, eps } => {
            let tau = Scalar::parse(tau)?;
            println!("d ln 6 / ln(N + tau) = {:.12}", dim_bound(*n, &tau, *d));
            if let Some(e) = eps {
                let s = min_n_for(&Scalar::parse(e)?, *d, &tau)?;
                println!("least N with bound < {e}: {} (bound {:.12})", s.n, s.bound);
            }
            Ok(true)
        }
        Command::Orbit { steps, d } => {
            let c = certify_main(&flagship_params(cli, *d)?, *d, Field::Real)?;
            let o = flagship_orbit(&c, &scale_config(2.0, c.dim, c.d), *steps)?;
            println!("{} steps, min margin {:e}, scale range [{:.6}, {:.6}]", o.steps.len(), o.min_margin, o.scale_range.0, o.scale_range.1);
            println!("longest runs: expanding {}, contracting {}", o.max_expanding_run, o.max_contracting_run);
            write_report(cli, &o)?;
            Ok(true)
        }
        Command::Stress { seed, eps, trials, depth } => {
            let c = certify_main(&flagship_params(cli, 2)?, 2, Field::Real)?;
            let cert = &c.chains.one_step;
            let radius = stability_radius(cert).coefficient.lower();
            let eps = eps.unwrap_or(radius / 2.0);
            let b = RealAffine::new(RMat::scalar(c.dim, Scalar::int(2)), vec![Scalar::zero(); c.dim])?;
            let sys = StressSystems { k: &c.systems.kd, kp: &c.systems.kd_prime, b: &b, depth: *depth, cap: 64 };
            let r = perturb_and_retest(*seed, eps, *trials, cert, Some(&sys))?;
            println!("radius {radius:e}, eps {eps:e}: {} passed, {} failed", r.passed, r.failed);
            if let Some((s, i)) = r.first_failure {
                println!("first failure: seed {s}, trial {i}");
            }
            let base = empirical_intersection(&c.systems.kd, &c.systems.kd_prime, &b, *depth, FRONTIER_CAP)?;
            println!("unperturbed linking: {:?}", base.verdict);
            write_report(cli, &r)?;
            Ok(r.failed == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        // a second initialization can only fail if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => match e.downcast_ref::<ConstructionError>() {
            Some(ConstructionError::Certificate { .. }) => {
                println!("FAIL: {e}");
                ExitCode::from(1)
            }
            _ => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
