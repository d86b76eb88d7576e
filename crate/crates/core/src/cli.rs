//! Command-line front end: reproducible configs, solution files and
//! scenario outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::{
    estimate_all, load_table, parse_ranges, EstimationOptions, EstimationReport,
};
use crate::fimo::{build_unchecked, MacroParams, MacroState};
use crate::game::{check_assumption1, check_assumption2, AssumptionReport, GameModel};
use crate::scenario::{
    compare_scenarios, render_svg, run_all_nine, write_comparison_csv, DeficitVariant,
    ScenarioBase, ScenarioResult,
};
use crate::synthesis::{synthesize, GuaranteedSolution, SynthesisOptions};
use crate::uncertainty::Realization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RealizationKind {
    Zero,
    Sin,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: MacroParams,
    pub x0: [f64; 2],
    pub d0_debt: f64,
    pub xi0_star: f64,
    pub start_year: i32,
    pub horizon: usize,
    pub election_anchor: i32,
    pub realization: RealizationKind,
    pub seed: u64,
    pub synthesis: SynthesisOptions,
    pub estimation: EstimationOptions,
    pub charts: bool,
    /// Not part of the config hash.
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = ScenarioBase::default();
        RunConfig {
            params: MacroParams::default(),
            x0: [base.x0.z, base.x0.pi_tilde],
            d0_debt: base.d0_debt,
            xi0_star: base.xi0_star,
            start_year: base.start_year,
            horizon: base.horizon,
            election_anchor: base.election_anchor,
            realization: RealizationKind::Sin,
            seed: 0,
            synthesis: SynthesisOptions::default(),
            estimation: EstimationOptions::default(),
            charts: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.synthesis.validate()?;
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("x0 must be finite".into()));
        }
        self.base().validate()
    }

    pub fn realization(&self) -> Realization {
        match self.realization {
            RealizationKind::Zero => Realization::Zero,
            RealizationKind::Sin => Realization::Sin,
            RealizationKind::Random => Realization::RandomAdmissible { seed: self.seed },
        }
    }

    pub fn base(&self) -> ScenarioBase {
        ScenarioBase {
            start_year: self.start_year,
            horizon: self.horizon,
            xi0_star: self.xi0_star,
            d0_debt: self.d0_debt,
            election_anchor: self.election_anchor,
            x0: MacroState::new(self.x0[0], self.x0[1]),
            realization: self.realization(),
        }
    }

    /// SHA-256 of the canonical JSON with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn provenance(&self) -> String {
        format!(
            "nashcost config={} seed={} realization={}",
            self.hash(),
            self.seed,
            self.realization().label()
        )
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nashcost",
    version,
    about = "Guaranteed-cost Nash feedback for the fiscal-monetary game"
)]
pub struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub realization: Option<RealizationKind>,
    /// Print the default configuration and exit.
    #[arg(long)]
    pub print_default_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the guaranteed-cost gains and write solution.json.
    Synthesize {
        /// Only run the design-assumption checks.
        #[arg(long)]
        check_only: bool,
    },
    /// Simulate the nine catch-up scenarios.
    Scenarios {
        /// Solution file from `synthesize`; solved in-process when omitted.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Estimate the dynamic coefficients from a CSV of annual series.
    Estimate {
        csv: PathBuf,
        /// Excluded year ranges, e.g. 2008-2009,2020-2021.
        #[arg(long)]
        exclude: Option<String>,
        #[arg(long)]
        intercept: bool,
    },
    /// Check the design assumptions for the configured model.
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub provenance: String,
    pub config_hash: String,
    pub seed: u64,
    pub solution: GuaranteedSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub provenance: String,
    pub config_hash: String,
    pub seed: u64,
    pub source: PathBuf,
    pub report: EstimationReport,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Assumption(_) => 3,
        Error::StaleSolution(_) => 4,
        Error::Config(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(h) = cli.horizon {
        cfg.horizon = h;
    }
    if let Some(r) = cli.realization {
        cfg.realization = r;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line, writing the console summary to `out`.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    if cli.print_default_config {
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&RunConfig::default())?
        )?;
        return Ok(());
    }
    let cfg = effective_config(cli)?;
    match &cli.command {
        None => Err(Error::Config("no subcommand given; see --help".into())),
        Some(Command::Check) | Some(Command::Synthesize { check_only: true }) => {
            cmd_check(&cfg, out).map(|_| ())
        }
        Some(Command::Synthesize { check_only: false }) => cmd_synthesize(&cfg, out).map(|_| ()),
        Some(Command::Scenarios { solution }) => {
            cmd_scenarios(&cfg, solution.as_deref(), out).map(|_| ())
        }
        Some(Command::Estimate {
            csv,
            exclude,
            intercept,
        }) => {
            let mut cfg = cfg.clone();
            if let Some(ex) = exclude {
                cfg.estimation.exclude = parse_ranges(ex)?;
            }
            cfg.estimation.intercept |= intercept;
            cmd_estimate(&cfg, csv, out).map(|_| ())
        }
    }
}

fn assumption_reports(m: &GameModel) -> (AssumptionReport, AssumptionReport) {
    (check_assumption1(m), check_assumption2(m))
}

/// Model for the config, with both assumption reports folded into the error.
pub fn checked_model(cfg: &RunConfig) -> Result<GameModel> {
    let m = build_unchecked(&cfg.params)?;
    let (a1, a2) = assumption_reports(&m);
    let mut failures = a1.failures;
    failures.extend(a2.failures);
    AssumptionReport { failures }.into_result()?;
    Ok(m)
}

pub fn cmd_check<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<GameModel> {
    let m = build_unchecked(&cfg.params)?;
    let (a1, a2) = assumption_reports(&m);
    for (name, r) in [
        ("uncertainty constraints", &a1),
        ("stabilizability and detectability", &a2),
    ] {
        if r.passed() {
            writeln!(out, "{name}: ok")?;
        } else {
            writeln!(out, "{name}: FAILED\n{r}")?;
        }
    }
    checked_model(cfg)
}

pub fn cmd_synthesize<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<SolutionFile> {
    let m = checked_model(cfg)?;
    let sol = synthesize(&m, &cfg.x0, &cfg.synthesis)?;
    let report = sol.verify(&m, cfg.synthesis.certificate_margin)?;
    if !report.valid() {
        return Err(Error::Certificate(format!("{report:?}")));
    }
    writeln!(out, "V1(x0) = {:.6}", sol.costs[0])?;
    writeln!(out, "V2(x0) = {:.6}", sol.costs[1])?;
    writeln!(out, "K1 = {:?}", sol.k1.as_slice())?;
    writeln!(out, "K2 = {:?}", sol.k2.as_slice())?;
    writeln!(
        out,
        "closed-loop spectral radius = {:.6}",
        sol.closed_loop_spectral_radius
    )?;
    writeln!(
        out,
        "certificate margins = [{:.3e}, {:.3e}]",
        report.margins[0], report.margins[1]
    )?;
    writeln!(out, "gain-equation residual = {:.3e}", report.gain_residual)?;
    let file = SolutionFile {
        provenance: cfg.provenance(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        solution: sol,
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("solution.json");
    fs::write(&path, serde_json::to_string_pretty(&file)?)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(file)
}

pub fn cmd_scenarios<W: Write>(
    cfg: &RunConfig,
    solution: Option<&Path>,
    out: &mut W,
) -> Result<Vec<ScenarioResult>> {
    let m = checked_model(cfg)?;
    let sol = match solution {
        Some(p) => {
            let file: SolutionFile = serde_json::from_str(&fs::read_to_string(p)?)?;
            file.solution.check_model(&m).map_err(|e| {
                Error::StaleSolution(format!(
                    "{e}; re-run `nashcost synthesize` with this config before `scenarios`"
                ))
            })?;
            file.solution
        }
        None => synthesize(&m, &cfg.x0, &cfg.synthesis)?,
    };
    let results = run_all_nine(&cfg.base(), &sol, &cfg.params)?;
    let provenance = cfg.provenance();
    fs::create_dir_all(&cfg.out_dir)?;
    for r in &results {
        let f = fs::File::create(cfg.out_dir.join(format!("{}.csv", r.label)))?;
        r.write_csv(std::io::BufWriter::new(f), Some(&provenance))?;
    }
    let rows = compare_scenarios(&results)?;
    let f = fs::File::create(cfg.out_dir.join("compare.csv"))?;
    write_comparison_csv(std::io::BufWriter::new(f), &rows, Some(&provenance))?;
    if cfg.charts {
        for variant in DeficitVariant::ALL {
            let family: Vec<&ScenarioResult> = results
                .iter()
                .filter(|r| r.spec.deficit.variant == variant)
                .collect();
            let name = format!("{variant:?}").to_lowercase();
            let svg = render_svg(
                &family,
                &format!("debt ratio, {name} fiscal path"),
                Some(&provenance),
            );
            fs::write(cfg.out_dir.join(format!("d_{name}.svg")), svg)?;
        }
    }
    writeln!(
        out,
        "{:<6}{:>9}{:>9}{:>9}  {:<12}d crosses 50%",
        "", "d0", "d_max", "d_T", "trend"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:<6}{:>9.4}{:>9.4}{:>9.4}  {:<12}{}",
            r.label,
            r.d_initial,
            r.d_max,
            r.d_final,
            format!("{:?}", r.trend).to_lowercase(),
            r.crosses_half.map_or("-".into(), |y| y.to_string())
        )?;
    }
    writeln!(
        out,
        "wrote 9 scenario CSVs and compare.csv to {}",
        cfg.out_dir.display()
    )?;
    Ok(results)
}

pub fn cmd_estimate<W: Write>(cfg: &RunConfig, csv: &Path, out: &mut W) -> Result<FitFile> {
    let table = load_table(csv)?;
    let report = estimate_all(&table, &cfg.estimation)?;
    writeln!(out, "{report}")?;
    let file = FitFile {
        provenance: cfg.provenance(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        source: csv.to_path_buf(),
        report,
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("fit.json");
    fs::write(&path, serde_json::to_string_pretty(&file)?)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(file)
}
