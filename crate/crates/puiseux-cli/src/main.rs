//! `puiseux`: exact local intersection multiplicities of plane curves,
//! Puiseux expansions, and sparse multiplicity bound campaigns.
//!
//! Every subcommand is deterministic for a fixed seed. Results go to
//! stdout; wall-clock timing goes to stderr only, so redirected output and
//! JSON reports are byte-stable. Exit codes: 0 on success, 1 on domain
//! errors (bad polynomials, infinite multiplicities, refused points), 2 on
//! usage errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use puiseux_core::error::Error;
use puiseux_core::identities::{build_r, build_rbar, hajos_max_multiplicity};
use puiseux_core::imult::{halphen_multiplicity, jet_oracle_multiplicity, HalphenForm, Point};
use puiseux_core::newton::{expand_branches, newton_polygon, positive_valuation_count, BranchFamily};
use puiseux_core::poly::BiPoly;
use puiseux_core::series::{wronskian, PuiseuxSeries};

use puiseux_cli::campaign::{
    fgplus1_search, theorem_campaign, verify_theorem_instance, ExperimentConfig,
};
use puiseux_cli::parse::{parse_point, parse_poly, render, PolySpec};
use puiseux_cli::report;

#[derive(Parser)]
#[command(
    name = "puiseux",
    version,
    about = "Exact intersection multiplicities of plane curves and sparse bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Intersection multiplicity of two curves at a point
    Imult {
        /// First curve, e.g. "x - y"
        #[arg(long = "F")]
        f: String,
        /// Second curve, e.g. "x^6 - y^3"
        #[arg(long = "G")]
        g: String,
        /// Common point as two rationals, e.g. "0,0" or "1/2,-3"
        #[arg(long, default_value = "0,0")]
        point: String,
        /// Which of the three branch-valuation forms to evaluate
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), default_value_t = 1)]
        form: u8,
        /// Also run the jet oracle and write a full JSON report here
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Newton polygon of a curve: hull points, edges, root counts
    Polygon {
        /// The curve F(x, y)
        #[arg(long = "F")]
        f: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Puiseux branch expansions of the y-roots of a curve
    Expand {
        /// The curve F(x, y)
        #[arg(long = "F")]
        f: String,
        /// Expansion order: branches carry all exponents below this
        #[arg(long, default_value_t = 8)]
        order: i64,
        /// Expand every root, not only the positive-valuation family
        #[arg(long)]
        all: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Wronskian of univariate polynomials (each in x)
    Wronskian {
        /// A polynomial in x; repeat the flag once per polynomial
        #[arg(long = "poly", required = true)]
        polys: Vec<String>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Largest multiplicity among the nonzero roots of a polynomial in x
    Hajos {
        #[arg(long = "f")]
        f: String,
    },
    /// The universal polynomial expressing S^(k) * F_y(x,S)^(2k-1) in the
    /// partial derivatives of F along a simple root S
    Rk {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=12))]
        k: u32,
    },
    /// The cleared cofactor-derivative polynomial and its denominator
    Rbar {
        #[arg(long, value_parser = clap::value_parser!(u32).range(0..=12))]
        k: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(0..=12))]
        l: u32,
    },
    /// Check the sparse multiplicity bounds on one instance or a campaign
    VerifyBound {
        /// Dense curve F (single-instance mode)
        #[arg(long = "F")]
        f: Option<String>,
        /// Sparse curve G (single-instance mode)
        #[arg(long = "G")]
        g: Option<String>,
        /// Common point with nonzero coordinates (single-instance mode)
        #[arg(long)]
        point: Option<String>,
        /// Number of seeded random instances (campaign mode)
        #[arg(long, default_value_t = 0)]
        count: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_degree: u64,
        #[arg(long, default_value_t = 4)]
        max_monomials: u64,
        #[arg(long, default_value_t = 6)]
        exponent_cap: u64,
        #[arg(long, default_value_t = 4)]
        coeff_range: i64,
        #[arg(long, default_value_t = 200)]
        order_cap: i64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Search for high-multiplicity nonzero roots of f*g + 1
    SearchFgplus1 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: u32,
        /// Monomial budget t for each of f and g
        #[arg(long = "t", default_value_t = 3)]
        max_monomials: u64,
        #[arg(long, default_value_t = 8)]
        exponent_cap: u64,
        #[arg(long, default_value_t = 4)]
        coeff_range: i64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

enum Failure {
    Domain(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Domain(e)
    }
}

fn parse_curve(text: &str) -> Result<PolySpec, Failure> {
    parse_poly(text).map_err(|e| Failure::Domain(Error::Domain(e.to_string())))
}

fn point_from(text: &str) -> Result<Point, Failure> {
    parse_point(text).map_err(|e| Failure::Domain(Error::Domain(e.to_string())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let outcome = run(cli.command);
    eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Imult {
            f,
            g,
            point,
            form,
            json,
        } => cmd_imult(&f, &g, &point, form, json.as_deref()),
        Command::Polygon { f, json } => cmd_polygon(&f, json.as_deref()),
        Command::Expand {
            f,
            order,
            all,
            json,
        } => cmd_expand(&f, order, all, json.as_deref()),
        Command::Wronskian { polys, json } => cmd_wronskian(&polys, json.as_deref()),
        Command::Hajos { f } => cmd_hajos(&f),
        Command::Rk { k } => {
            println!("{}", build_r(k));
            Ok(())
        }
        Command::Rbar { k, l } => {
            if k + l == 0 {
                return Err(Failure::Usage("--k and --l cannot both be 0".into()));
            }
            let cleared = build_rbar(k, l);
            println!("({})/{}", cleared.numerator, cleared.denominator);
            Ok(())
        }
        Command::VerifyBound {
            f,
            g,
            point,
            count,
            seed,
            max_degree,
            max_monomials,
            exponent_cap,
            coeff_range,
            order_cap,
            json,
        } => {
            let cfg = ExperimentConfig {
                seed,
                instances: count,
                max_degree,
                max_monomials,
                exponent_cap,
                coeff_range,
                order_cap,
            };
            cmd_verify_bound(f.as_deref(), g.as_deref(), point.as_deref(), cfg, json.as_deref())
        }
        Command::SearchFgplus1 {
            seed,
            count,
            max_monomials,
            exponent_cap,
            coeff_range,
            json,
        } => {
            let cfg = ExperimentConfig {
                seed,
                instances: count,
                max_degree: 1,
                max_monomials,
                exponent_cap,
                coeff_range,
                order_cap: 200,
            };
            cmd_search_fg(cfg, json.as_deref())
        }
    }
}

fn cmd_imult(
    f_text: &str,
    g_text: &str,
    point_text: &str,
    form_ix: u8,
    json: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let f = parse_curve(f_text)?;
    let g = parse_curve(g_text)?;
    let p = point_from(point_text)?;
    let form = HalphenForm::from_index(form_ix)
        .ok_or_else(|| Failure::Usage("--form must be 1, 2 or 3".into()))?;
    let result = halphen_multiplicity(&f.poly, &g.poly, &p, form)?;
    println!("{}", result.value);
    if let Some(path) = json {
        let jet = jet_oracle_multiplicity(&f.poly, &g.poly, &p)?;
        let doc = json!({
            "schema": report::SCHEMA,
            "kind": "imult",
            "f": render(&f.poly),
            "g": render(&g.poly),
            "point": report::point_value(&p),
            "result": report::result_value(&result),
            "jet": report::result_value(&jet),
            "agree": result.value == jet.value,
        });
        report::write_json(&doc, path)?;
    }
    Ok(())
}

fn cmd_polygon(f_text: &str, json: Option<&std::path::Path>) -> Result<(), Failure> {
    let f = parse_curve(f_text)?;
    let polygon = newton_polygon(&f.poly)?;
    let r = positive_valuation_count(&f.poly)?;
    for (k, v) in &polygon.points {
        println!("point ({k}, {v})");
    }
    for e in &polygon.edges {
        println!(
            "edge from ({}, {}) to ({}, {}): slope {}, horizontal length {}",
            e.from.0, e.from.1, e.to.0, e.to.1, e.slope, e.horizontal_length
        );
    }
    println!("x-divisibility m = {}", polygon.x_divisibility);
    println!("zero-root multiplicity = {}", polygon.zero_series_multiplicity);
    println!("positive-valuation roots r = {r}");
    if let Some(path) = json {
        let edges: Vec<Value> = polygon
            .edges
            .iter()
            .map(|e| {
                json!({
                    "from": [e.from.0, e.from.1],
                    "to": [e.to.0, e.to.1],
                    "slope": report::rat_text(&e.slope),
                    "horizontal_length": e.horizontal_length,
                })
            })
            .collect();
        let doc = json!({
            "schema": report::SCHEMA,
            "kind": "polygon",
            "f": render(&f.poly),
            "points": polygon.points.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
            "edges": edges,
            "x_divisibility": polygon.x_divisibility,
            "zero_root_multiplicity": polygon.zero_series_multiplicity,
            "positive_valuation_roots": r,
        });
        report::write_json(&doc, path)?;
    }
    Ok(())
}

fn cmd_expand(
    f_text: &str,
    order: i64,
    all: bool,
    json: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let f = parse_curve(f_text)?;
    let family = if all {
        BranchFamily::All
    } else {
        BranchFamily::PositiveValuation
    };
    let branches = expand_branches(&f.poly, order, family)?;
    for b in &branches {
        println!(
            "branch (multiplicity {}, conjugates {}): {}",
            b.multiplicity, b.conjugates, b.series
        );
    }
    if branches.is_empty() {
        println!("no branches in the requested family");
    }
    if let Some(path) = json {
        let list: Vec<Value> = branches
            .iter()
            .map(|b| {
                json!({
                    "series": b.series.to_string(),
                    "valuation": b.series.val().value.to_string(),
                    "multiplicity": b.multiplicity,
                    "conjugates": b.conjugates,
                })
            })
            .collect();
        let doc = json!({
            "schema": report::SCHEMA,
            "kind": "expand",
            "f": render(&f.poly),
            "order": order,
            "family": if all { "all" } else { "positive-valuation" },
            "branches": list,
        });
        report::write_json(&doc, path)?;
    }
    Ok(())
}

fn cmd_wronskian(texts: &[String], json: Option<&std::path::Path>) -> Result<(), Failure> {
    let mut series: Vec<PuiseuxSeries> = Vec::with_capacity(texts.len());
    let mut sources: Vec<String> = Vec::with_capacity(texts.len());
    for t in texts {
        let spec = parse_curve(t)?;
        let uni = spec.to_unipoly().map_err(Failure::Domain)?;
        sources.push(render(&BiPoly::from_unipoly_x(&uni)));
        series.push(PuiseuxSeries::from_unipoly(&uni));
    }
    let w = wronskian(&series);
    println!("{w}");
    if let Some(path) = json {
        let doc = json!({
            "schema": report::SCHEMA,
            "kind": "wronskian",
            "polys": sources,
            "wronskian": w.to_string(),
            "valuation": w.val().value.to_string(),
        });
        report::write_json(&doc, path)?;
    }
    Ok(())
}

fn cmd_hajos(f_text: &str) -> Result<(), Failure> {
    let f = parse_curve(f_text)?;
    let uni = f.to_unipoly().map_err(Failure::Domain)?;
    let m = hajos_max_multiplicity(&uni)?;
    println!("{m}");
    Ok(())
}

fn cmd_verify_bound(
    f: Option<&str>,
    g: Option<&str>,
    point: Option<&str>,
    cfg: ExperimentConfig,
    json: Option<&std::path::Path>,
) -> Result<(), Failure> {
    match (f, g, point, cfg.instances) {
        (Some(f_text), Some(g_text), Some(point_text), 0) => {
            let f = parse_curve(f_text)?;
            let g = parse_curve(g_text)?;
            let p = point_from(point_text)?;
            let inst = verify_theorem_instance(&f.poly, &g.poly, &p)?;
            println!(
                "instance: F = {}, G = {}, p = ({}, {})",
                inst.f, inst.g, inst.point[0], inst.point[1]
            );
            println!("multiplicity (branch valuations) = {}", inst.multiplicity);
            println!("multiplicity (jets) = {}", inst.jet_multiplicity);
            for v in &inst.verdicts {
                println!(
                    "verdict: {}: {} vs {}: {}",
                    v.formula,
                    v.lhs,
                    v.rhs,
                    if v.ok { "ok" } else { "VIOLATED" }
                );
            }
            if let Some(path) = json {
                let doc = json!({
                    "schema": report::SCHEMA,
                    "kind": "verify-bound-instance",
                    "instance": serde_json::to_value(&inst)
                        .map_err(|e| Error::Domain(format!("report serialization failed: {e}")))?,
                });
                report::write_json(&doc, path)?;
            }
            if inst.ok {
                Ok(())
            } else {
                Err(Failure::Domain(Error::Domain(
                    "a bound verdict was violated; this contradicts the library's \
                     own theorems and should be reported as a bug"
                        .into(),
                )))
            }
        }
        (None, None, None, count) if count > 0 => {
            let campaign = theorem_campaign(&cfg)?;
            println!(
                "campaign: {}/{} instances ok (seed {}, {} attempts, {} rejected infinite, {} rejected shape)",
                campaign.instances.iter().filter(|i| i.ok).count(),
                campaign.instances.len(),
                cfg.seed,
                campaign.work.attempts,
                campaign.work.rejected_infinite,
                campaign.work.rejected_shape,
            );
            for inst in campaign.instances.iter().filter(|i| !i.ok) {
                println!(
                    "violation: F = {}, G = {}, p = ({}, {})",
                    inst.f, inst.g, inst.point[0], inst.point[1]
                );
            }
            if let Some(path) = json {
                report::write_json(&campaign, path)?;
            }
            if campaign.ok {
                Ok(())
            } else {
                Err(Failure::Domain(Error::Domain(
                    "campaign found violated verdicts; this contradicts the library's \
                     own theorems and should be reported as a bug"
                        .into(),
                )))
            }
        }
        _ => Err(Failure::Usage(
            "use either --F/--G/--point for one instance, or --count N for a campaign"
                .into(),
        )),
    }
}

fn cmd_search_fg(cfg: ExperimentConfig, json: Option<&std::path::Path>) -> Result<(), Failure> {
    if cfg.instances == 0 {
        return Err(Failure::Usage("--count must be at least 1".into()));
    }
    let search = fgplus1_search(&cfg)?;
    println!(
        "observed max multiplicity {} (cap {}) over {} pairings (seed {})",
        search.observed_max, search.cap, search.config.instances, search.config.seed
    );
    for e in &search.extremal {
        println!(
            "extremal: f = {}, g = {}, h = {}, multiplicity {}",
            e.f, e.g, e.h, e.multiplicity
        );
    }
    if let Some(path) = json {
        report::write_json(&search, path)?;
    }
    if search.ok {
        Ok(())
    } else {
        Err(Failure::Domain(Error::Domain(
            "a pairing exceeded the sparsity cap; this contradicts the library's \
             own lemmas and should be reported as a bug"
                .into(),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use puiseux_core::imult::Multiplicity;

    #[test]
    fn multiplicity_display_is_plain() {
        assert_eq!(Multiplicity::Finite(3).to_string(), "3");
        assert_eq!(Multiplicity::Infinite.to_string(), "INFINITE");
    }

    #[test]
    fn cli_declares_all_subcommands() {
        use clap::CommandFactory;
        let cmd = Cli::command();
        let names: Vec<String> = cmd
            .get_subcommands()
            .map(|c| c.get_name().to_string())
            .collect();
        for expected in [
            "imult",
            "polygon",
            "expand",
            "wronskian",
            "hajos",
            "rk",
            "rbar",
            "verify-bound",
            "search-fgplus1",
        ] {
            assert!(names.iter().any(|n| n == expected), "missing {expected}");
        }
    }
}
