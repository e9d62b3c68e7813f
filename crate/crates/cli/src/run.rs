use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use qsuff::algebra::{StarSubalgebra, SubalgebraJson};
use qsuff::classical::{
    conditional_variation, embed_diagonal, factorization_residual, likelihood_ratio_statistic,
    statistic_subalgebra, FiniteExperiment, Statistic,
};
use qsuff::expfam::{exp_transfer_check, fisher_compare, ExponentialFamily, ParametricFamily};
use qsuff::factorization::factorize;
use qsuff::gaussian::{randomization_map, verify_sufficiency_pair, RMat, RVec, SymplecticSpace};
use qsuff::random::{random_real_vector, rng};
use qsuff::schema::{ChannelJson, ClassicalJson, ExpFamilyJson, ExperimentJson, GaussianJson};
use qsuff::sufficiency::{
    build_experiment, channel_sufficient, minimal_sufficient_subalgebra, subalgebra_sufficient,
    StatisticalExperiment, SufficiencyConfig,
};
use qsuff::{Error, QuantumChannel};

use crate::render;
use crate::selftest;
use crate::Format;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_INCONSISTENT: u8 = 2;

const GAUSSIAN_SAMPLES: usize = 100;

pub enum Command {
    Check { experiment: PathBuf, channel: Option<String>, subalgebra: Option<String> },
    Fisher { family: PathBuf, channel: String },
    Factorize { experiment: PathBuf, subalgebra: String },
    Gaussian { scenario: PathBuf },
    Classical { experiment: PathBuf, statistic: Option<String> },
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Fisher { .. } => "fisher",
            Command::Factorize { .. } => "factorize",
            Command::Gaussian { .. } => "gaussian",
            Command::Classical { .. } => "classical",
            Command::Selftest => "selftest",
        }
    }

    fn input(&self) -> Option<&Path> {
        match self {
            Command::Check { experiment, .. }
            | Command::Factorize { experiment, .. }
            | Command::Classical { experiment, .. } => Some(experiment),
            Command::Fisher { family, .. } => Some(family),
            Command::Gaussian { scenario } => Some(scenario),
            Command::Selftest => None,
        }
    }
}

pub struct RunConfig {
    pub command: Command,
    pub tolerance: f64,
    pub alphas: Option<Vec<f64>>,
    pub t_list: Option<Vec<f64>>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

enum Failure {
    Invalid(String),
    Inconsistent(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconsistency(_) | Error::Decomposition(_) => Failure::Inconsistent(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

/// Analysis body plus whether all internal criteria agreed.
type Outcome = Result<(Value, bool), Failure>;

pub fn run(config: &RunConfig) -> u8 {
    let cfg = match sufficiency_config(config) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("qsuff: {msg}");
            return EXIT_INVALID;
        }
    };
    let header = json!({
        "command": config.command.name(),
        "input": config.command.input().map(|p| p.display().to_string()),
        "tolerance": cfg.tol,
        "seed": cfg.seed,
        "t_sample": cfg.t_sample,
        "alphas": cfg.alphas,
    });
    let (body, code) = match dispatch(&config.command, &cfg) {
        Ok((body, true)) => (json!({"status": "completed", "result": body}), EXIT_OK),
        Ok((body, false)) => (
            json!({"status": "inconsistent", "reason": "criteria disagree", "result": body}),
            EXIT_INCONSISTENT,
        ),
        Err(Failure::Inconsistent(msg)) => {
            (json!({"status": "inconsistent", "reason": msg}), EXIT_INCONSISTENT)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("qsuff: invalid input: {msg}");
            return EXIT_INVALID;
        }
    };
    let mut report = json!({"header": header});
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let text = match config.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Table => render::table(&report),
    };
    let written = match &config.output {
        Some(path) => fs::write(path, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("qsuff: cannot write report: {e}");
        return EXIT_INVALID;
    }
    code
}

fn sufficiency_config(config: &RunConfig) -> Result<SufficiencyConfig, String> {
    let mut cfg = SufficiencyConfig { tol: config.tolerance, seed: config.seed, ..Default::default() };
    if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
        return Err(format!("tolerance must be positive, got {}", cfg.tol));
    }
    if let Some(a) = &config.alphas {
        if a.is_empty() || a.iter().any(|&x| !(x > -1.0 && x < 1.0) || x == 0.0) {
            return Err("α values must lie in (−1, 1) and differ from 0".into());
        }
        cfg.alphas = a.clone();
    }
    if let Some(t) = &config.t_list {
        if t.is_empty() || t.iter().any(|x| !x.is_finite()) {
            return Err("cocycle times must be finite".into());
        }
        cfg.t_sample = t.clone();
    }
    Ok(cfg)
}

fn dispatch(cmd: &Command, cfg: &SufficiencyConfig) -> Outcome {
    match cmd {
        Command::Check { experiment, channel, subalgebra } => {
            check(experiment, channel.as_deref(), subalgebra.as_deref(), cfg)
        }
        Command::Fisher { family, channel } => fisher(family, channel, cfg),
        Command::Factorize { experiment, subalgebra } => factorization(experiment, subalgebra),
        Command::Gaussian { scenario } => gaussian(scenario, cfg),
        Command::Classical { experiment, statistic } => {
            classical(experiment, statistic.as_deref(), cfg)
        }
        Command::Selftest => Ok(selftest::run(cfg)),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn parse<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Invalid(format!("{what}: {e}")))
}

/// Arguments starting with `{` or `[` are JSON; anything else is a path.
fn inline_or_file(arg: &str) -> Result<String, Failure> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        read_file(Path::new(arg))
    }
}

fn load_channel(arg: &str) -> Result<QuantumChannel, Failure> {
    let j: ChannelJson = parse(&inline_or_file(arg)?, "channel")?;
    Ok(j.to_channel()?)
}

fn load_subalgebra(arg: &str) -> Result<StarSubalgebra, Failure> {
    let j: SubalgebraJson = parse(&inline_or_file(arg)?, "subalgebra")?;
    Ok(StarSubalgebra::from_json(&j)?)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

fn check(path: &Path, channel: Option<&str>, subalgebra: Option<&str>, cfg: &SufficiencyConfig) -> Outcome {
    let j: ExperimentJson = parse(&read_file(path)?, "experiment")?;
    let exp = StatisticalExperiment::from_json(&j)?;
    let ch = match channel {
        Some(c) => Some(load_channel(c)?),
        None if subalgebra.is_none() => j.channel.as_ref().map(|c| c.to_channel()).transpose()?,
        None => None,
    };
    let alg = match subalgebra {
        Some(s) => Some(load_subalgebra(s)?),
        None if ch.is_none() => j.subalgebra.as_ref().map(StarSubalgebra::from_json).transpose()?,
        None => None,
    };
    if let Some(ch) = ch {
        let v = channel_sufficient(&exp, &ch, cfg)?;
        let mut body = to_value(&v.report());
        body["target"] = json!("channel");
        return Ok((body, v.concordant));
    }
    if let Some(alg) = alg {
        let v = subalgebra_sufficient(&exp, &alg, cfg)?;
        let mut body = to_value(&v.report());
        body["target"] = json!("subalgebra");
        return Ok((body, v.concordant));
    }
    let m = minimal_sufficient_subalgebra(&exp, cfg)?;
    Ok((
        json!({
            "target": "minimal_sufficient_subalgebra",
            "blocks": m.algebra.blocks(),
            "support_rank": m.support.ncols(),
            "t_sample": m.t_sample,
            "minimality_checks": m.minimality_checks,
            "algebra": to_value(&m.algebra.to_json()),
        }),
        true,
    ))
}

fn matrix_rows(m: &RMat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn fisher(path: &Path, channel: &str, cfg: &SufficiencyConfig) -> Outcome {
    let j: ExpFamilyJson = parse(&read_file(path)?, "family")?;
    let fam = ExponentialFamily::from_json(&j)?;
    let ch = load_channel(channel)?;
    let cmp = fisher_compare(&fam, &ch, cfg.tol)?;
    let (transfer, transfer_residual) = exp_transfer_check(&fam, &ch, cfg.tol)?;
    let states = fam
        .grid()
        .iter()
        .map(|t| Ok((t.clone(), fam.state(t)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let exp = build_experiment(states, None)?;
    let verdict = channel_sufficient(&exp, &ch, cfg)?;
    let points: Vec<Value> = cmp
        .points
        .iter()
        .map(|p| {
            json!({
                "theta": p.theta,
                "g": matrix_rows(&p.g),
                "h": matrix_rows(&p.h),
                "min_eig_gap": p.gap,
                "deviation": p.deviation,
            })
        })
        .collect();
    let agree = cmp.sufficient == transfer && transfer == verdict.sufficient && verdict.concordant;
    Ok((
        json!({
            "fisher_equal": cmp.sufficient,
            "points": points,
            "exp_transfer": {"passed": transfer, "residual": transfer_residual},
            "channel_verdict": to_value(&verdict.report()),
            "sufficient": verdict.sufficient,
        }),
        agree,
    ))
}

fn factorization(path: &Path, subalgebra: &str) -> Outcome {
    let j: ExperimentJson = parse(&read_file(path)?, "experiment")?;
    let exp = StatisticalExperiment::from_json(&j)?;
    let alg = load_subalgebra(subalgebra)?;
    let f = factorize(&exp, &alg)?;
    Ok((to_value(&f.report(exp.thetas())), true))
}

fn gaussian(path: &Path, cfg: &SufficiencyConfig) -> Outcome {
    let j: GaussianJson = parse(&read_file(path)?, "scenario")?;
    let space = SymplecticSpace::from_json(&j)?;
    let k = space.dim();
    let means = j
        .m_list
        .iter()
        .map(|m| {
            if m.len() == k {
                Ok(RVec::from_vec(m.clone()))
            } else {
                Err(Failure::Invalid(format!("mean of length {} in dimension {k}", m.len())))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut g = rng(cfg.seed);
    let pair = verify_sufficiency_pair(&space, j.n, &means, GAUSSIAN_SAMPLES, &mut g)?;
    let halved = randomization_map(&space, j.n)?.with_noise_scaled(0.5);
    let probes: Vec<RVec> = (0..4).map(|_| random_real_vector(&mut g, k * j.n)).collect();
    let halved_cp = halved.check_cp(&probes, &mut g)?;
    let sufficient = pair.max_deviation < cfg.tol
        && pair.cp_sample_mean.completely_positive
        && pair.cp_randomization.completely_positive;
    Ok((
        json!({
            "pair": to_value(&pair),
            "noise_halved_randomization": to_value(&halved_cp),
            "sufficient": sufficient,
        }),
        true,
    ))
}

fn parse_statistic(arg: &str) -> Result<Vec<usize>, Failure> {
    let t = arg.trim();
    if t.starts_with('[') {
        return parse(t, "statistic");
    }
    if t.chars().all(|c| c.is_ascii_digit() || c == ',' || c.is_whitespace()) && !t.is_empty() {
        return t
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| Failure::Invalid(format!("statistic: {e}"))))
            .collect();
    }
    parse(&read_file(Path::new(arg))?, "statistic")
}

fn classical(path: &Path, statistic: Option<&str>, cfg: &SufficiencyConfig) -> Outcome {
    let j: ClassicalJson = parse(&read_file(path)?, "experiment")?;
    let exp = FiniteExperiment::from_json(&j)?;
    let lr = match exp.family() {
        [p, q] => Some(likelihood_ratio_statistic(p, q)?),
        _ => None,
    };
    let t = match (statistic, &j.statistic, &lr) {
        (Some(s), _, _) => Statistic::new(parse_statistic(s)?),
        (None, Some(s), _) => Statistic::new(s.clone()),
        (None, None, Some(lr)) => lr.clone(),
        _ => return Err(Failure::Invalid("no statistic given".into())),
    };
    let variation = conditional_variation(&exp, &t)?;
    let fact = factorization_residual(&exp, &t)?;
    let quantum = subalgebra_sufficient(&embed_diagonal(&exp)?, &statistic_subalgebra(&t)?, cfg)?;
    let by_conditional = variation <= 1e-12;
    let by_factorization = fact <= 1e-10;
    let agree = by_conditional == by_factorization && by_factorization == quantum.sufficient;
    Ok((
        json!({
            "statistic": t.map(),
            "sufficient": by_conditional,
            "conditional_distribution": {"passed": by_conditional, "residual": variation},
            "factorization": {"passed": by_factorization, "residual": fact},
            "embedded": {
                "sufficient": quantum.sufficient,
                "concordant": quantum.concordant,
                "criteria": to_value(&quantum.criteria),
            },
            "likelihood_ratio": lr.as_ref().map(|s| s.map().to_vec()),
        }),
        agree && quantum.concordant,
    ))
}
