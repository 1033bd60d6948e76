mod commands;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use report::Session;

/// Contingency-table analysis and simulation. Axes, categories, strata and
/// cells are numbered from 1.
#[derive(Parser)]
#[command(name = "ctab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One association measure on a pair of axes.
    Measure(MeasureArgs),
    /// Difference between a two-way LD and its stratified average.
    Simpson(SimpsonArgs),
    /// Homogeneity of partial correlations in a 2x2xK table.
    Homogeneity(HomogeneityArgs),
    /// Three-way interaction measures of a 2x2x2 table.
    Threeway(TableArg),
    /// Cells fixed by the two-way margins of a table.
    FixedCells(FixedCellsArgs),
    /// Maximum-entropy table with the margins of a table.
    Maxent(MaxentArgs),
    /// Simulate a table with given one-way margins and pairwise associations.
    Simulate(SimulateArgs),
    /// Range of an association objective over tables with given margins.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct TableArg {
    /// Table JSON: {"dims": [...], "cells": [...], "kind": "counts"}.
    #[arg(long)]
    table: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureName {
    Ld,
    Phi,
    Pearson,
    Gamma,
    #[value(alias = "somers")]
    SomersD,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_enum)]
    measure: MeasureName,
    /// Two axes, e.g. `1,2`.
    #[arg(long)]
    axes: String,
    /// Category of each axis for `ld` and `phi`, e.g. `1,1`.
    #[arg(long)]
    categories: Option<String>,
    /// JSON array of score vectors, one per axis, for `pearson`.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct SimpsonArgs {
    #[arg(long)]
    table: PathBuf,
    /// Axis and category of both variables, e.g. `1:1,2:1`.
    #[arg(long)]
    pair: String,
    /// The stratifying axis.
    #[arg(long)]
    strata: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum HomogeneityMethod {
    /// One correlation shared by all strata.
    EqualRho,
    /// Zero conditional LD in the listed strata.
    ZeroPartial,
    /// The listed strata share a correlation; the rest by maximum likelihood.
    EqualRhoMl,
}

#[derive(Args)]
struct HomogeneityArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_enum, default_value = "equal-rho")]
    method: HomogeneityMethod,
    /// Strata for `zero-partial` and `equal-rho-ml`, e.g. `2,3,4`.
    #[arg(long)]
    strata: Option<String>,
}

#[derive(Args)]
struct FixedCellsArgs {
    #[arg(long)]
    table: PathBuf,
    /// Rational arithmetic (default for integer tables).
    #[arg(long, conflicts_with = "no_exact")]
    exact: bool,
    /// Floating-point arithmetic.
    #[arg(long)]
    no_exact: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MarginLevel {
    OneWay,
    TwoWay,
}

#[derive(Args)]
struct MaxentArgs {
    #[arg(long)]
    table: PathBuf,
    /// Highest order of margins taken from the table.
    #[arg(long, value_enum, default_value = "two-way")]
    margins: MarginLevel,
    /// Axis pairs made independent, e.g. `1:3,2:3`.
    #[arg(long)]
    independent: Option<String>,
    /// Fixes a cell probability, e.g. `1,1,1=0.05`. Repeatable.
    #[arg(long)]
    constrain: Vec<String>,
    /// Observed counts to test against the fit.
    #[arg(long)]
    gof: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AssocName {
    Pearson,
    Gamma,
    #[value(alias = "somers-d")]
    Somers,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Mean,
    Ind,
    Min,
    Max,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimMethod {
    /// Sequential construction for `pearson`, mixture for `gamma` and `somers`.
    Default,
    /// Numerical search for a table meeting the targets.
    Search,
    /// `somers` only: tune correlations until the d targets are met.
    Bridge,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    measure: AssocName,
    /// JSON with `one_way` and optionally `targets`.
    #[arg(long)]
    marginals: PathBuf,
    /// JSON with `targets`; overrides those in `--marginals`.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mean")]
    policy: Policy,
    #[arg(long, value_enum, default_value = "default")]
    method: SimMethod,
    /// Sample size; 0 skips sampling.
    #[arg(long, default_value_t = 0)]
    n: u64,
    #[arg(long)]
    seed: u64,
    /// Writes the sampled counts as table JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveKind {
    Sum,
    Common,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    measure: AssocName,
    #[arg(long)]
    marginals: PathBuf,
    #[arg(long, value_enum, default_value = "sum")]
    objective: ObjectiveKind,
    /// Axis pairs in the objective, e.g. `1:2,1:3` (default all).
    #[arg(long)]
    pairs: Option<String>,
    /// Sign or weight per pair, e.g. `1,-1,1` (default all 1).
    #[arg(long, allow_hyphen_values = true)]
    weights: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long)]
    scores: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Measure(_) => "measure",
            Command::Simpson(_) => "simpson",
            Command::Homogeneity(_) => "homogeneity",
            Command::Threeway(_) => "threeway",
            Command::FixedCells(_) => "fixed-cells",
            Command::Maxent(_) => "maxent",
            Command::Simulate(_) => "simulate",
            Command::Bounds(_) => "bounds",
        }
    }
}

/// The first paragraph of a message, folded onto one line.
fn one_line(text: &str) -> String {
    text.lines()
        .take_while(|l| !l.trim().is_empty())
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e.to_string()));
            return ExitCode::from(1);
        }
    };
    let name = cli.command.name();
    let mut session = Session::default();
    match commands::run(&cli.command, &mut session) {
        Ok(results) => {
            print_report(&session.finish(name, results, None));
            ExitCode::SUCCESS
        }
        Err(err) => match err.chain().find_map(|e| e.downcast_ref::<ctab_core::Error>()) {
            Some(core) if core.is_infeasibility() => {
                let error = commands::infeasibility_json(core);
                print_report(&session.finish(name, json!(null), Some(error)));
                eprintln!("{}", commands::infeasibility_message(core));
                ExitCode::from(2)
            }
            _ => {
                eprintln!("error: {}", one_line(&format!("{err:#}")));
                ExitCode::from(1)
            }
        },
    }
}

fn print_report(report: &report::Report) {
    println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
}
