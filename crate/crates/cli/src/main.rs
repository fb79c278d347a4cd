//! Command-line front end: single-instance verification, bulk
//! cross-validation sweeps, permutation/complete-mapping search, and table
//! inspection.
//!
//! Exit codes: 0 = all checks agree / success, 1 = at least one
//! disagreement between a predicted verdict and the brute-force oracle,
//! 2 = invalid input.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use permpoly_core::families::FamilyParams;
use permpoly_core::field::{FieldCtx, FieldSpec};
use permpoly_core::poly::{poly_is_permutation, Poly};
use permpoly_core::rules::{RuleId, ALL_RULES};
use permpoly_core::sweep::{
    check_one, crossval_with, search, CheckMode, CheckReport, DSpec, GridSpec, SweepOptions,
    SweepSummary,
};

#[derive(Parser)]
#[command(name = "permpoly", version, about = "Permutation-polynomial family checks over F_{q^2}")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one parameter tuple (or a raw polynomial) against a rule and/or
    /// the brute-force oracle.
    Verify(VerifyArgs),
    /// Enumerate a grid and cross-validate rule predictions against brute force.
    Crossval(CrossvalArgs),
    /// Stream the grid tuples whose confirmed verdict is a permutation
    /// (or complete mapping with --cpp).
    Search(SearchArgs),
    /// Print structural sets: the subfield, unity roots, the image set S, or
    /// the primitive element.
    Tables(TablesArgs),
}

#[derive(Args)]
struct FieldArg {
    /// Field size q as `p` or `p^m`; the arithmetic lives in F_{q^2}.
    #[arg(long)]
    field: String,
}

impl FieldArg {
    fn build(&self) -> Result<FieldCtx, CliError> {
        let spec: FieldSpec = self.field.parse().map_err(input_err)?;
        spec.build().map_err(input_err)
    }
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    a: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    b: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    c: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    u: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    v: String,
    #[arg(long, default_value_t = 1)]
    r: u64,
    #[arg(long, default_value_t = 1)]
    d: u64,
    /// φ as `exp:coeff` pairs, e.g. `0:2, 1:1` or `2:[0,1]`.
    #[arg(long, default_value = "0:1", allow_hyphen_values = true)]
    phi: String,
}

impl ParamArgs {
    fn build<'a>(&self, ctx: &'a FieldCtx) -> Result<FamilyParams<'a>, CliError> {
        let parse = |t: &str| ctx.parse_elem(t).map_err(input_err);
        FamilyParams::new(
            ctx,
            parse(&self.a)?,
            parse(&self.b)?,
            parse(&self.c)?,
            parse(&self.u)?,
            parse(&self.v)?,
            self.r,
            self.d,
            Poly::parse(ctx, &self.phi).map_err(input_err)?,
        )
        .map_err(input_err)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write per-check reports as JSON lines to this path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write per-check reports as CSV (fixed column order) to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    field: FieldArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Rule to evaluate (thm1..thm9, cor1..cor15).
    #[arg(long)]
    rule: Option<String>,
    /// What to run: the brute-force oracle, the rule, or both.
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    /// Raw-polynomial mode: check this polynomial directly (ignores the
    /// family parameters and the rule).
    #[arg(long, allow_hyphen_values = true)]
    poly: Option<String>,
    /// Also require f + x to permute (complete mapping).
    #[arg(long)]
    cpp: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq, Eq)]
enum ModeArg {
    Brute,
    Rule,
    Both,
}

impl From<ModeArg> for CheckMode {
    fn from(m: ModeArg) -> CheckMode {
        match m {
            ModeArg::Brute => CheckMode::Brute,
            ModeArg::Rule => CheckMode::Rule,
            ModeArg::Both => CheckMode::Both,
        }
    }
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    field: FieldArg,
    /// Rules to cross-validate; repeatable, or `all`.
    #[arg(long, required = true)]
    rule: Vec<String>,
    /// Grid as inline JSON (`{...}`) or a path to a JSON file.
    #[arg(long, conflicts_with = "exhaustive")]
    grid: Option<String>,
    /// Sweep every a, b, c, u, v and every r up to (q²−1)/d with φ = 1.
    #[arg(long)]
    exhaustive: bool,
    /// Divisor d used with --exhaustive.
    #[arg(long, default_value_t = 1)]
    d: u64,
    /// Sample this many tuples (seeded) instead of the full grid.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    field: FieldArg,
    /// Rule that proposes candidates.
    #[arg(long)]
    rule: String,
    /// Grid as inline JSON (`{...}`) or a path to a JSON file.
    #[arg(long)]
    grid: Option<String>,
    /// Emit only tuples where both f and f + x permute.
    #[arg(long)]
    cpp: bool,
    /// Stop after this many results.
    #[arg(long)]
    limit: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TablesArgs {
    #[command(flatten)]
    field: FieldArg,
    #[command(subcommand)]
    what: TablesWhat,
}

#[derive(Subcommand)]
enum TablesWhat {
    /// The subfield F_q, in canonical order.
    Subfield,
    /// The n-th roots of unity U_n, in canonical order.
    Unity { n: u64 },
    /// The image set S = {a·x^q + b·x + c}, in canonical order.
    S {
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        a: String,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        b: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        c: String,
    },
    /// The canonical primitive element ξ and the field summary.
    Primitive,
}

#[derive(Debug)]
struct CliError(String);

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError(e.to_string())
}

fn exit_for(disagreements: u64) -> ExitCode {
    if disagreements == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn parse_rules(names: &[String]) -> Result<Vec<RuleId>, CliError> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(ALL_RULES);
        } else {
            out.push(name.parse::<RuleId>().map_err(input_err)?);
        }
    }
    Ok(out)
}

fn load_grid(arg: &Option<String>, exhaustive: bool, d: u64) -> Result<GridSpec, CliError> {
    if exhaustive {
        return Ok(GridSpec::exhaustive(DSpec::One(d)));
    }
    match arg {
        None => Err(CliError("missing --grid (or --exhaustive)".into())),
        Some(text) if text.trim_start().starts_with('{') => {
            GridSpec::from_json(text).map_err(input_err)
        }
        Some(path) => {
            let body = fs::read_to_string(path)
                .map_err(|e| CliError(format!("cannot read grid file `{path}`: {e}")))?;
            GridSpec::from_json(&body).map_err(input_err)
        }
    }
}

/// Streaming report writers for --json / --csv.
struct ReportSinks {
    json: Option<BufWriter<fs::File>>,
    csv: Option<BufWriter<fs::File>>,
}

impl ReportSinks {
    fn open(output: &OutputArgs) -> Result<Self, CliError> {
        let open = |path: &PathBuf| {
            fs::File::create(path)
                .map(BufWriter::new)
                .map_err(|e| CliError(format!("cannot create `{}`: {e}", path.display())))
        };
        let mut csv = output.csv.as_ref().map(open).transpose()?;
        if let Some(w) = csv.as_mut() {
            writeln!(w, "{}", CheckReport::CSV_HEADER).map_err(input_err)?;
        }
        Ok(ReportSinks { json: output.json.as_ref().map(open).transpose()?, csv })
    }

    fn write(&mut self, report: &CheckReport) {
        if let Some(w) = self.json.as_mut() {
            let line = serde_json::to_string(report).expect("reports serialize");
            writeln!(w, "{line}").expect("report sink");
        }
        if let Some(w) = self.csv.as_mut() {
            writeln!(w, "{}", report.csv_row()).expect("report sink");
        }
    }

    fn finish(mut self) {
        if let Some(w) = self.json.as_mut() {
            w.flush().expect("report sink");
        }
        if let Some(w) = self.csv.as_mut() {
            w.flush().expect("report sink");
        }
    }

    fn wants_reports(&self) -> bool {
        self.json.is_some() || self.csv.is_some()
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, CliError> {
    let ctx = args.field.build()?;

    // raw-polynomial mode: brute force on the polynomial itself
    if let Some(text) = &args.poly {
        let poly = Poly::parse(&ctx, text).map_err(input_err)?;
        let is_pp = poly_is_permutation(&ctx, &poly);
        let complete = args
            .cpp
            .then(|| permpoly_core::poly::is_complete_permutation(&ctx, &poly));
        let mut body = serde_json::json!({
            "field": ctx.spec().to_string(),
            "poly": poly.format(&ctx),
            "is_permutation": is_pp,
        });
        if let Some(cpp) = complete {
            body["is_complete_permutation"] = serde_json::json!(cpp);
        }
        println!("{body}");
        return Ok(ExitCode::SUCCESS);
    }

    let params = args.params.build(&ctx)?;
    let rule = args
        .rule
        .as_deref()
        .map(|name| name.parse::<RuleId>())
        .transpose()
        .map_err(input_err)?;
    if rule.is_none() && args.mode == ModeArg::Rule {
        return Err(CliError("--mode rule requires --rule".into()));
    }
    let report = check_one(&params, rule, args.mode.into(), args.cpp);
    let mut sinks = ReportSinks::open(&args.output)?;
    sinks.write(&report);
    sinks.finish();
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(exit_for(if report.agree { 0 } else { 1 }))
}

fn cmd_crossval(args: &CrossvalArgs) -> Result<ExitCode, CliError> {
    let ctx = args.field.build()?;
    let rules = parse_rules(&args.rule)?;
    if rules.is_empty() {
        return Err(CliError("no rules given".into()));
    }
    let grid = load_grid(&args.grid, args.exhaustive, args.d)?;
    let space = grid.resolve(&ctx).map_err(input_err)?;
    let opts = SweepOptions {
        budget: args.budget,
        seed: args.seed,
        ..Default::default()
    };
    let mut sinks = ReportSinks::open(&args.output)?;
    let summary: SweepSummary = if sinks.wants_reports() {
        crossval_with(&space, &rules, &opts, |report| sinks.write(report))
    } else {
        permpoly_core::sweep::crossval(&space, &rules, &opts)
    };
    sinks.finish();
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(exit_for(summary.disagreements))
}

fn cmd_search(args: &SearchArgs) -> Result<ExitCode, CliError> {
    let ctx = args.field.build()?;
    let rule: RuleId = args.rule.parse().map_err(input_err)?;
    let grid = load_grid(&args.grid, false, 1)?;
    let space = grid.resolve(&ctx).map_err(input_err)?;
    let opts = SweepOptions {
        budget: args.budget,
        seed: args.seed,
        cpp: args.cpp,
        ..Default::default()
    };
    let (found, summary) = search(&space, rule, &opts, args.limit);
    let mut sinks = ReportSinks::open(&args.output)?;
    for report in &found {
        sinks.write(report);
        println!("{}", serde_json::to_string(report).expect("report serializes"));
    }
    sinks.finish();
    eprintln!(
        "search: {} found / {} enumerated ({} in-region)",
        found.len(),
        summary.tuples_enumerated,
        summary.hypotheses_satisfied
    );
    Ok(exit_for(summary.disagreements))
}

fn cmd_tables(args: &TablesArgs) -> Result<ExitCode, CliError> {
    let ctx = args.field.build()?;
    let print_set = |elems: &[permpoly_core::field::FieldElem]| {
        let texts: Vec<String> = elems.iter().map(|&e| ctx.format_elem(e)).collect();
        println!("{}", texts.join(", "));
    };
    match &args.what {
        TablesWhat::Subfield => print_set(&ctx.subfield()),
        TablesWhat::Unity { n } => {
            let mut roots = ctx.roots_of_unity(*n).map_err(input_err)?;
            ctx.sort_canonical(&mut roots);
            print_set(&roots);
        }
        TablesWhat::S { a, b, c } => {
            let params = FamilyParams::new(
                &ctx,
                ctx.parse_elem(a).map_err(input_err)?,
                ctx.parse_elem(b).map_err(input_err)?,
                ctx.parse_elem(c).map_err(input_err)?,
                permpoly_core::field::FieldElem::ZERO,
                permpoly_core::field::FieldElem::ZERO,
                1,
                1,
                Poly::one(),
            )
            .map_err(input_err)?;
            print_set(&params.compute_s());
        }
        TablesWhat::Primitive => {
            let summary = ctx.summary();
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Crossval(args) => cmd_crossval(args),
        Command::Search(args) => cmd_search(args),
        Command::Tables(args) => cmd_tables(args),
    };
    match result {
        Ok(code) => code,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_mapping() {
        assert_eq!(exit_for(0), ExitCode::SUCCESS);
        assert_eq!(exit_for(3), ExitCode::from(1));
    }

    #[test]
    fn rule_list_parsing() {
        assert_eq!(parse_rules(&["thm1".into()]).unwrap(), vec![RuleId::Thm1]);
        assert_eq!(parse_rules(&["all".into()]).unwrap().len(), 24);
        assert!(parse_rules(&["nope".into()]).is_err());
    }
}
