//! The `gds` command line.

pub mod error;
pub mod io;

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gds_core::boxdist::{box_exact, box_heuristic, box_mm_exact, BoxHeuristicOptions};
use gds_core::constructions::{levy_sequence, levy_table, product_gds, quotient_by_rows, random_gds, LevyKind};
use gds_core::metrics::{ky_fan, observable_diameter, od_breakpoints, partial_diameter, prohorov, prohorov_of_pushforwards};
use gds_core::model::gds_to_mm;
use gds_core::observable::{dconc_bounds, dconc_exact, dconc_heuristic, HeuristicOptions};
use gds_core::order::{check_domination, check_isomorphism};
use gds_core::scalar::{decimal_string, sorted_distinct};
use gds_core::verify::verify_theorem_suite_with;
use gds_core::{Budget, CellSet, Coupling, GeometricDataSet, NumericMode, Rational, Scalar};

pub use error::CliError;
use io::{emit_dataset, Inputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Debug, Parser)]
#[command(name = "gds", version, about = "Distances between finite geometric data sets")]
pub struct Cli {
    /// Arithmetic: exact rationals or f64.
    #[arg(long, global = true, env = "GDS_MODE", default_value = "exact")]
    pub mode: Mode,
    /// Largest grid `n * m` enumerated by exact cell-set solvers.
    #[arg(long, global = true, env = "GDS_BUDGET_CELLS", default_value_t = 16)]
    pub budget_cells: usize,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

/// A dataset and a second one, given positionally or with `--other`.
#[derive(Debug, Args)]
pub struct Pair {
    /// Path, `-` for stdin, `singleton:v1,v2` or `discrete:N`.
    pub data: String,
    pub second: Option<String>,
    #[arg(long)]
    pub other: Option<String>,
}

impl Pair {
    fn second(&self) -> Result<&str, CliError> {
        match (&self.second, &self.other) {
            (Some(s), None) | (None, Some(s)) => Ok(s),
            (Some(_), Some(_)) => Err(CliError::Usage("give the second dataset once".into())),
            (None, None) => Err(CliError::Usage("a second dataset is required".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Observable diameter over a grid of kappas.
    Od {
        data: String,
        /// Explicit kappas; replaces the grid.
        #[arg(long)]
        kappa: Vec<String>,
        /// Uniform grid k/N, k = 0..=N.
        #[arg(long, default_value_t = 10)]
        grid: usize,
        /// Use every kappa at which the value can jump.
        #[arg(long)]
        breakpoints: bool,
    },
    /// Partial diameter of each feature's pushforward.
    Pd {
        data: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        feature: Option<String>,
    },
    /// Observable distance.
    Dconc {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, conflicts_with_all = ["heuristic", "bounds"])]
        exact: bool,
        #[arg(long, conflicts_with = "bounds")]
        heuristic: bool,
        /// Certified lower bound and heuristic upper bound.
        #[arg(long)]
        bounds: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the witness coupling as CSV.
        #[arg(long)]
        coupling: Option<PathBuf>,
    },
    /// Box distance.
    Box {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        heuristic: bool,
        /// Compare the induced mm-spaces instead.
        #[arg(long, conflicts_with = "heuristic")]
        mm: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the witness coupling and cell set as CSV.
        #[arg(long)]
        coupling: Option<PathBuf>,
    },
    /// Prohorov distance between two measures on the first dataset's points,
    /// or between the pushforwards of two features.
    Prohorov {
        data: String,
        #[arg(long, required_unless_present = "features")]
        other: Option<String>,
        /// Two feature labels, `f,g`.
        #[arg(long, conflicts_with = "other")]
        features: Option<String>,
    },
    /// Ky Fan distance between features, for one pair or all pairs.
    Kyfan {
        data: String,
        #[arg(long)]
        features: Option<String>,
    },
    /// Quotient by the listed features; prints the quotient dataset.
    Quotient {
        data: String,
        #[arg(long)]
        features: String,
        /// Write the quotient map as CSV.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Product dataset.
    Product { first: String, second: String },
    /// Generate datasets or tables.
    #[command(subcommand)]
    Gen(Gen),
    /// Order relations.
    #[command(subcommand)]
    Check(Check),
    /// Run the randomised theorem suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevyFamily {
    Discrete,
    Powers,
}

#[derive(Debug, Subcommand)]
pub enum Gen {
    Singleton {
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    Discrete {
        #[arg(long)]
        n: usize,
    },
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        scale: i64,
    },
    /// Observable diameter table of a sequence.
    Levy {
        #[arg(long, value_enum, default_value = "discrete")]
        kind: LevyFamily,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        /// Base dataset for `powers`.
        #[arg(long, required_if_eq("kind", "powers"))]
        base: Option<String>,
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum Check {
    /// Whether the first dataset dominates the second.
    Domination {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value = "0")]
        tol: String,
    },
    Isomorphism {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value = "0")]
        tol: String,
    },
}

/// Runs a parsed command; the returned code is the process exit status.
pub fn run(cli: &Cli, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.mode {
        Mode::Exact => run_in::<Rational>(cli, stdin, out),
        Mode::Float => run_in::<f64>(cli, stdin, out),
    }
}

/// Decimal with 12 significant digits, then the exact string in exact mode.
fn cells<S: Scalar>(v: &S) -> String {
    let exact = if S::MODE == NumericMode::Exact { v.exact_string() } else { String::new() };
    format!("{},{}", decimal_string(v), exact)
}

fn scalar_rows<S: Scalar>(rows: &[(&str, S)]) -> String {
    let mut s = String::from("quantity,value,exact\n");
    for (name, v) in rows {
        writeln!(s, "{name},{}", cells(v)).unwrap();
    }
    s
}

fn feature_index<S: Scalar>(x: &GeometricDataSet<S>, label: &str) -> Result<usize, CliError> {
    x.features()
        .index_of(label)
        .ok_or_else(|| CliError::Usage(format!("no feature labelled `{label}`")))
}

fn feature_pair<S: Scalar>(x: &GeometricDataSet<S>, spec: &str) -> Result<(usize, usize), CliError> {
    let (f, g) = spec
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("expected two labels `f,g`, found `{spec}`")))?;
    Ok((feature_index(x, f.trim())?, feature_index(x, g.trim())?))
}

fn coupling_csv<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    pi: &Coupling<S>,
    set: Option<&CellSet>,
) -> String {
    let mut s = String::from("x,y,mass,mass_exact");
    s.push_str(if set.is_some() { ",in_set\n" } else { "\n" });
    for a in 0..pi.rows() {
        for b in 0..pi.cols() {
            write!(s, "{},{},{}", x.points()[a], y.points()[b], cells(pi.get(a, b))).unwrap();
            match set {
                Some(set) => writeln!(s, ",{}", set.contains(a, b)).unwrap(),
                None => s.push('\n'),
            }
        }
    }
    s
}

fn run_in<S: Scalar>(cli: &Cli, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut inputs = Inputs::new(stdin);
    let budget = Budget::default().with_max_cells(cli.budget_cells);
    let parse = |v: &str| S::parse_str(v).map_err(|e| CliError::Usage(e.to_string()));
    let text = match &cli.command {
        Command::Od {
            data,
            kappa,
            grid,
            breakpoints,
        } => {
            let x = inputs.load::<S>(data)?;
            let kappas = if !kappa.is_empty() {
                kappa.iter().map(|k| parse(k)).collect::<Result<Vec<S>, _>>()?
            } else if *breakpoints {
                od_breakpoints(x.features().rows(), x.measure().weights())
            } else {
                let n = (*grid).max(1) as i64;
                sorted_distinct((0..=n).map(|k| S::from_ratio(k, n)).collect())
            };
            let mut s = String::from("kappa,od,od_exact\n");
            for k in &kappas {
                writeln!(s, "{},{}", k.exact_string(), cells(&observable_diameter(&x, k)?)).unwrap();
            }
            s
        }
        Command::Pd { data, alpha, feature } => {
            let x = inputs.load::<S>(data)?;
            let alpha = parse(alpha)?;
            let rows: Vec<usize> = match feature {
                Some(f) => vec![feature_index(&x, f)?],
                None => (0..x.features().len()).collect(),
            };
            let mut s = String::from("feature,alpha,pd,pd_exact\n");
            for i in rows {
                let v = partial_diameter(x.features().row(i), x.measure().weights(), &alpha)?;
                writeln!(s, "{},{},{}", x.features().label(i), alpha.exact_string(), cells(&v)).unwrap();
            }
            s
        }
        Command::Dconc {
            pair,
            exact: _,
            heuristic,
            bounds,
            seed,
            coupling,
        } => {
            let x = inputs.load::<S>(&pair.data)?;
            let y = inputs.load::<S>(pair.second()?)?;
            if *bounds {
                let b = dconc_bounds(&x, &y, *seed)?;
                scalar_rows(&[("dconc_lower", b.lower), ("dconc_upper", b.upper)])
            } else if *heuristic {
                let run = dconc_heuristic(&x, &y, &HeuristicOptions::with_seed(*seed))?;
                if let Some(path) = coupling {
                    std::fs::write(path, coupling_csv(&x, &y, &run.coupling, None))?;
                }
                scalar_rows(&[("dconc_heuristic", run.value)])
            } else {
                let sol = dconc_exact(&x, &y, &budget)?;
                if let Some(path) = coupling {
                    std::fs::write(path, coupling_csv(&x, &y, &sol.coupling, None))?;
                }
                scalar_rows(&[("dconc", sol.value)])
            }
        }
        Command::Box {
            pair,
            heuristic,
            mm,
            seed,
            coupling,
        } => {
            let x = inputs.load::<S>(&pair.data)?;
            let y = inputs.load::<S>(pair.second()?)?;
            let (name, value, pi, set) = if *mm {
                let sol = box_mm_exact(&gds_to_mm(&x)?, &gds_to_mm(&y)?, &budget)?;
                ("box_mm", sol.value, sol.coupling, sol.set)
            } else if *heuristic {
                let run = box_heuristic(&x, &y, &BoxHeuristicOptions::with_seed(*seed))?;
                ("box_heuristic", run.value, run.coupling, run.set)
            } else {
                let sol = box_exact(&x, &y, &budget)?;
                ("box", sol.value, sol.coupling, sol.set)
            };
            if let Some(path) = coupling {
                std::fs::write(path, coupling_csv(&x, &y, &pi, Some(&set)))?;
            }
            scalar_rows(&[(name, value)])
        }
        Command::Prohorov { data, other, features } => {
            let x = inputs.load::<S>(data)?;
            let value = match (other, features) {
                (_, Some(spec)) => {
                    let (f, g) = feature_pair(&x, spec)?;
                    prohorov_of_pushforwards(x.measure().weights(), x.features().row(f), x.features().row(g))?
                }
                (Some(other), None) => {
                    let y = inputs.load::<S>(other)?;
                    if y.points() != x.points() {
                        return Err(CliError::Schema("both datasets must list the same points".into()));
                    }
                    prohorov(x.measure().weights(), y.measure().weights(), x.metric())?
                }
                (None, None) => return Err(CliError::Usage("give --other or --features".into())),
            };
            scalar_rows(&[("prohorov", value)])
        }
        Command::Kyfan { data, features } => {
            let x = inputs.load::<S>(data)?;
            let k = x.features().len();
            let pairs: Vec<(usize, usize)> = match features {
                Some(spec) => vec![feature_pair(&x, spec)?],
                None => (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect(),
            };
            let mut s = String::from("f,g,kyfan,kyfan_exact\n");
            for (i, j) in pairs {
                let v = ky_fan(x.measure().weights(), x.features().row(i), x.features().row(j))?;
                writeln!(s, "{},{},{}", x.features().label(i), x.features().label(j), cells(&v)).unwrap();
            }
            s
        }
        Command::Quotient { data, features, map } => {
            let x = inputs.load::<S>(data)?;
            let rows = features
                .split(',')
                .map(|l| feature_index(&x, l.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let quotient = quotient_by_rows(&x, &rows)?;
            if let Some(path) = map {
                let mut s = String::from("point,class\n");
                for (p, c) in x.points().iter().zip(&quotient.map) {
                    writeln!(s, "{p},{}", quotient.data.points()[*c]).unwrap();
                }
                std::fs::write(path, s)?;
            }
            emit_dataset(&quotient.data)
        }
        Command::Product { first, second } => {
            let x = inputs.load::<S>(first)?;
            let y = inputs.load::<S>(second)?;
            emit_dataset(&product_gds(&x, &y)?)
        }
        Command::Gen(gen) => match gen {
            Gen::Singleton { values } => {
                let values = values.iter().map(|v| parse(v)).collect::<Result<Vec<S>, _>>()?;
                emit_dataset(&gds_core::constructions::singleton_gds(&values)?)
            }
            Gen::Discrete { n } => emit_dataset(&gds_core::constructions::n_point_discrete::<S>(*n)?),
            Gen::Random { n, k, seed, scale } => emit_dataset(&random_gds::<S>(*n, *k, *seed, *scale)?),
            Gen::Levy {
                kind,
                n_max,
                base,
                grid,
            } => {
                let kind = match kind {
                    LevyFamily::Discrete => LevyKind::Discrete,
                    LevyFamily::Powers => {
                        let base = base.as_deref().ok_or_else(|| CliError::Usage("--base is required".into()))?;
                        LevyKind::ProductPowers(inputs.load::<S>(base)?)
                    }
                };
                let n = (*grid).max(1) as i64;
                let kappas: Vec<S> = (0..=n).map(|k| S::from_ratio(k, n)).collect();
                let seq = levy_sequence(&kind, *n_max)?;
                let table = levy_table(&seq, &kappas)?;
                let mut s = String::from("n,points,kappa,od,od_exact\n");
                for (i, row) in table.iter().enumerate() {
                    for (k, v) in kappas.iter().zip(row) {
                        writeln!(s, "{},{},{},{}", i + 1, seq[i].len(), k.exact_string(), cells(v)).unwrap();
                    }
                }
                s
            }
        },
        Command::Check(check) => {
            let (relation, pair, tol) = match check {
                Check::Domination { pair, tol } => ("domination", pair, tol),
                Check::Isomorphism { pair, tol } => ("isomorphism", pair, tol),
            };
            let x = inputs.load::<S>(&pair.data)?;
            let y = inputs.load::<S>(pair.second()?)?;
            let tol = parse(tol)?;
            let witness = if relation == "domination" {
                check_domination(&x, &y, &tol, &budget)?
            } else {
                check_isomorphism(&x, &y, &tol, &budget)?
            };
            let map = witness
                .as_ref()
                .map(|m| m.iter().map(|&t| y.points()[t].clone()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            format!("relation,holds,witness\n{relation},{},{map}\n", witness.is_some())
        }
        Command::Verify { seed, trials } => {
            let report = verify_theorem_suite_with(*seed, *trials, &budget);
            out.write_all(report.to_string().as_bytes())?;
            return Ok(if report.passed() { 0 } else { 1 });
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(0)
}
