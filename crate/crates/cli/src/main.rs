//! `pnlv`: command-line front end.  Exit codes: 0 success, 2 a `verify`
//! check failed, 1 any other error (including usage errors).

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{camel, parse_config_text, usage, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "pnlv", version, about = "Pole fields, series and Backlund maps for the Painleve I, II and IV equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Config file: `key=value` lines with `[section]` headers, or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Equation: i, ii or iv.
    #[arg(long, global = true)]
    eq: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Branch of gamma = sqrt(-beta/2): plus or minus.
    #[arg(long, global = true)]
    gamma_branch: Option<String>,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    max_steps: Option<String>,
    #[arg(long, global = true)]
    random_seed: Option<String>,
    /// Any other key, as KEY=VALUE.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate along a path; writes a trajectory CSV.
    Integrate {
        #[command(flatten)]
        common: Common,
        /// pole:p=..,eps=..,h=.. | jet:z=..,w=..,w1=.. | special:wh:.. | special:airy:.. | chain:..
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        /// segment:z0,z1 | ray:origin,theta,rMax | polyline:z,.. | circle:center,radius[,turns[,start]]
        #[arg(long, allow_hyphen_values = true)]
        path: Option<String>,
        /// Pole events JSON output.
        #[arg(long)]
        events: Option<String>,
    },
    /// Sweep a region for poles and zeros; writes a catalogue JSON.
    Polefield {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        /// annulus:rMin,rMax[,thetaMin,thetaMax]
        #[arg(long, allow_hyphen_values = true)]
        region: Option<String>,
        #[arg(long)]
        spacing: Option<String>,
        #[arg(long)]
        detect_level: Option<String>,
        /// Ray count for seeds without a linear representation.
        #[arg(long)]
        rays: Option<String>,
        /// SVG pole map output.
        #[arg(long)]
        svg: Option<String>,
    },
    /// Group catalogued poles into strings and check the string law.
    Strings {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: Option<String>,
    },
    /// Apply a Backlund map or symmetry to a trajectory CSV.
    Backlund {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: Option<String>,
        /// forward | inverse | bplus | bminus | half | rotate | conjugate
        #[arg(long)]
        transform: Option<String>,
        #[arg(long)]
        steps: Option<String>,
        /// Parameter history JSON output.
        #[arg(long)]
        history: Option<String>,
    },
    /// Laurent or asymptotic expansion as JSON.
    Series {
        #[command(flatten)]
        common: Common,
        /// laurent | laurent-big-w | asymptotic | asymptotic-big-w | log-derivative
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        /// I | IIa | IIb | IVa | IVb | IVc+ | IVc-
        #[arg(long, allow_hyphen_values = true)]
        family: Option<String>,
        #[arg(long)]
        branch: Option<String>,
        /// even | odd (log-derivative expansions)
        #[arg(long)]
        pair: Option<String>,
        #[arg(long)]
        order: Option<String>,
    },
    /// Re-scaling windows and cluster-value histograms.
    Rescale {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        center: Option<String>,
        /// square:half,n | ring:rIn,rOut,nR,nTheta
        #[arg(long)]
        grid: Option<String>,
        /// Ray angle for the cluster histogram.
        #[arg(long, allow_hyphen_values = true)]
        ray: Option<String>,
        #[arg(long)]
        r_range: Option<String>,
        #[arg(long)]
        delta_floor: Option<String>,
    },
    /// Special solutions: Weber-Hermite, Airy, rational, Hastings-McLeod.
    Special {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        which: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        /// Evaluation points, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long)]
        tolerance: Option<String>,
    },
    /// Run acceptance checks and print a pass/fail table.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite name(s), comma separated.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        all: bool,
    },
}

type Pairs = Vec<(&'static str, Option<String>)>;

impl Command {
    fn parts(self) -> (&'static str, Common, Pairs) {
        match self {
            Command::Integrate { common, seed, path, events } => {
                ("integrate", common, vec![("seed", seed), ("path", path), ("events", events)])
            }
            Command::Polefield { common, seed, region, spacing, detect_level, rays, svg } => (
                "polefield",
                common,
                vec![
                    ("seed", seed),
                    ("region", region),
                    ("spacing", spacing),
                    ("detectLevel", detect_level),
                    ("rays", rays),
                    ("svg", svg),
                ],
            ),
            Command::Strings { common, input } => ("strings", common, vec![("in", input)]),
            Command::Backlund { common, input, transform, steps, history } => (
                "backlund",
                common,
                vec![("in", input), ("transform", transform), ("steps", steps), ("history", history)],
            ),
            Command::Series { common, kind, seed, family, branch, pair, order } => (
                "series",
                common,
                vec![
                    ("kind", kind),
                    ("seed", seed),
                    ("family", family),
                    ("branch", branch),
                    ("pair", pair),
                    ("order", order),
                ],
            ),
            Command::Rescale { common, seed, center, grid, ray, r_range, delta_floor } => (
                "rescale",
                common,
                vec![
                    ("seed", seed),
                    ("center", center),
                    ("grid", grid),
                    ("ray", ray),
                    ("rRange", r_range),
                    ("deltaFloor", delta_floor),
                ],
            ),
            Command::Special { common, which, seed, at, tolerance } => (
                "special",
                common,
                vec![("which", which), ("seed", seed), ("at", at), ("tolerance", tolerance)],
            ),
            Command::Verify { common, suite, all } => {
                ("verify", common, vec![("suite", suite), ("all", all.then(|| "true".to_string()))])
            }
        }
    }
}

/// Defaults, then config file, then flags.
fn resolve(command: Command) -> Result<RunConfig, CliError> {
    let (name, common, own) = command.parts();
    let mut map: BTreeMap<String, String> = match &common.config {
        Some(path) => parse_config_text(&std::fs::read_to_string(path)?, name)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("eq", common.eq),
        ("alpha", common.alpha),
        ("beta", common.beta),
        ("gammaBranch", common.gamma_branch),
        ("out", common.out),
        ("tol", common.tol),
        ("maxSteps", common.max_steps),
        ("randomSeed", common.random_seed),
    ];
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv}")))?;
        map.insert(camel(k), v.to_string());
    }
    for (k, v) in flags.into_iter().chain(own) {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    RunConfig::from_map(name, map)
}

fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    match cfg.subcommand.as_str() {
        "integrate" => commands::integrate_cmd(cfg),
        "polefield" => commands::polefield_cmd(cfg),
        "strings" => commands::strings_cmd(cfg),
        "backlund" => commands::backlund_cmd(cfg),
        "series" => commands::series_cmd(cfg),
        "rescale" => commands::rescale_cmd(cfg),
        "special" => commands::special_cmd(cfg),
        "verify" => commands::verify_cmd(cfg),
        other => Err(usage(format!("unknown subcommand {other}"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match resolve(cli.command).and_then(|cfg| run(&cfg)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("pnlv: {e}");
            ExitCode::from(1)
        }
    }
}
