use std::collections::BTreeMap;

use arw_core::experiments::{
    self, abelian_suite, coupon_bound, density_probe, divisible_sandpile_check, exit_sum_check, fill_lower_bound_probe,
    fill_tail, fill_times, harmonic_table, hyperuniformity_probe, initial_sweep, lower_bound_exponent, mixing_profile, MAX_EXACT_STATE_VERTICES,
    fill_tail_bound, torus_mixing_budget, wired_tree_fill, TailEstimate,
};
use arw_core::process::{
    exact_sample, run_arw, strong_stationarity_check, DrivingSpec, FillTarget, InitialState, TraceSeeds,
};
use arw_core::seeds::{self, Lane};
use arw_core::{par_map, Configuration, SleepRates};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Command, Options};
use crate::output::Output;
use crate::specs::{parse_chain, parse_driving, parse_grid, parse_lambda, parse_list, parse_scalar_rate, ChainInfo};

pub enum Status {
    Pass,
    /// A check subcommand found its acceptance threshold violated.
    Fail,
}

pub struct Ctx<'a> {
    pub opts: &'a Options,
    pub seed: u64,
    pub out: &'a mut Output,
}

type Outcome = Result<(Status, Value), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Ctx<'_> {
    fn chain(&self) -> Result<ChainInfo, String> {
        parse_chain(self.opts.chain.as_deref().ok_or("--chain is required")?)
    }

    fn rates(&self, n: usize) -> Result<SleepRates, String> {
        parse_lambda(self.opts.lambda.as_deref().unwrap_or("1"), n)
    }

    fn driving(&self, default: &str) -> Result<DrivingSpec, String> {
        parse_driving(self.opts.driving.as_deref().unwrap_or(default))
    }

    fn initial(&self, n: usize) -> Result<InitialState, String> {
        match self.opts.initial.as_deref().unwrap_or("empty") {
            "empty" => Ok(InitialState::Fixed(Configuration::empty(n))),
            "stationary" => Ok(InitialState::Stationary),
            s => {
                let c: Configuration = s.parse().map_err(err)?;
                if c.len() != n {
                    return Err(format!("initial state has {} sites, chain has {n}", c.len()));
                }
                Ok(InitialState::Fixed(c))
            }
        }
    }
}

pub fn run(command: Command, ctx: &mut Ctx<'_>) -> Outcome {
    match command {
        Command::Sample => sample(ctx),
        Command::RunArw => run_arw_cmd(ctx),
        Command::RunIdla => run_idla_cmd(ctx),
        Command::FillTail => tail(ctx, false),
        Command::FillLower => tail(ctx, true),
        Command::TreeFill => tree_fill(ctx),
        Command::Mix => mix(ctx),
        Command::Harmonic => harmonic(ctx),
        Command::Sandpile => sandpile(ctx),
        Command::Density => density(ctx),
        Command::Hyperuniform => hyperuniform(ctx),
        Command::CheckAbelian => check_abelian(ctx),
        Command::SstCheck => sst_check(ctx),
        Command::Budget => budget(ctx),
    }
}

#[derive(Serialize)]
struct FrequencyRow {
    state: String,
    count: u64,
    frequency: f64,
}

fn sample(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    let chain = &info.chain;
    let rates = ctx.rates(chain.num_vertices())?;
    let samples = ctx.opts.samples.unwrap_or(1000);
    let seed = ctx.seed;
    let states = par_map(samples, |i| exact_sample(chain, &rates, seeds::derive(seed, i, Lane::Stationary)));
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut particles = 0u64;
    for s in states {
        let s = s.map_err(err)?;
        particles += s.total_particles();
        *counts.entry(s.to_string()).or_default() += 1;
    }
    let rows: Vec<FrequencyRow> = counts
        .into_iter()
        .map(|(state, count)| FrequencyRow { state, count, frequency: count as f64 / samples as f64 })
        .collect();
    ctx.out.csv("", &rows)?;
    let params = json!({"chain": chain.label(), "lambda": rates.describe(), "samples": samples, "seed": seed});
    ctx.out.json("meta", &json!({"parameters": params, "distinct_states": rows.len(), "mean_particles": particles as f64 / samples as f64}))?;
    println!("{} samples, {} distinct states", samples, rows.len());
    Ok((Status::Pass, params))
}

#[derive(Serialize)]
struct TraceRow {
    t: u64,
    u: u32,
    fired: u64,
    idla_fired: u64,
    absorbed: u64,
    full: bool,
    state: String,
}

fn run_arw_cmd(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    let chain = &info.chain;
    let n = chain.num_vertices();
    let rates = ctx.rates(n)?;
    let driving = ctx.driving("central")?;
    let t_max = ctx.opts.t_max.unwrap_or(100);
    let seeds = TraceSeeds::derive(ctx.seed, 0);
    let sigma0 = ctx.initial(n)?.resolve(chain, &rates, seeds::derive(ctx.seed, 0, Lane::Initial)).map_err(err)?;
    let trace = run_arw(chain, &rates, &driving, sigma0.clone(), t_max, seeds, true).map_err(err)?;
    let rows: Vec<TraceRow> = trace
        .records
        .iter()
        .zip(&trace.snapshots[1..])
        .map(|(r, s)| TraceRow { t: r.t, u: r.u, fired: r.fired, idla_fired: r.idla_fired, absorbed: r.absorbed, full: r.full, state: s.clone() })
        .collect();
    ctx.out.csv("", &rows)?;
    let params = json!({
        "chain": chain.label(), "lambda": rates.describe(), "driving": driving.to_string(), "t_max": t_max,
        "initial": sigma0.to_string(), "seed": ctx.seed, "seeds": seeds,
    });
    let header = json!({"header": params, "version": env!("CARGO_PKG_VERSION")});
    ctx.out.jsonl("trace", &header, &trace.records)?;
    ctx.out.json("meta", &json!({"parameters": params, "t_full": trace.t_full, "final": trace.final_config.to_string()}))?;
    match trace.t_full {
        Some(t) => println!("T_full = {t}; final state {}", trace.final_config),
        None => println!("not full within {t_max} steps; final state {}", trace.final_config),
    }
    Ok((Status::Pass, params))
}

#[derive(Serialize)]
struct IdlaRow {
    trial: u64,
    t_full: Option<u64>,
}

fn run_idla_cmd(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    let chain = &info.chain;
    let driving = ctx.driving("central")?;
    let trials = ctx.opts.trials.unwrap_or(100);
    let n = chain.num_vertices() as f64;
    let t_max = ctx.opts.t_max.unwrap_or((100.0 * n * n.ln().max(1.0)).ceil() as u64);
    let target = match ctx.opts.target.as_deref().unwrap_or("all") {
        "all" => FillTarget::All,
        "marked" => FillTarget::Marked,
        other => return Err(format!("unknown fill target {other:?} (all, marked)")),
    };
    let times = fill_times(chain, &driving, target, t_max, trials, ctx.seed).map_err(err)?;
    let rows: Vec<IdlaRow> = times.iter().enumerate().map(|(i, &t)| IdlaRow { trial: i as u64, t_full: t }).collect();
    ctx.out.csv("", &rows)?;
    let filled: Vec<f64> = times.iter().flatten().map(|&t| t as f64).collect();
    let params = json!({"chain": chain.label(), "driving": driving.to_string(), "trials": trials, "t_max": t_max,
        "target": ctx.opts.target.as_deref().unwrap_or("all"), "seed": ctx.seed});
    let median = if filled.len() == times.len() && !filled.is_empty() { Some(arw_core::stats::quantile(&filled, 0.5)) } else { None };
    ctx.out.json("meta", &json!({"parameters": params, "filled": filled.len(), "median_t_full": median}))?;
    println!("{}/{} runs filled within {t_max} steps", filled.len(), trials);
    Ok((Status::Pass, params))
}

#[derive(Serialize)]
struct TailRow {
    chain: String,
    driving: String,
    num_vertices: usize,
    exponent: f64,
    coefficient: f64,
    threshold: f64,
    trials: u64,
    exceedances: u64,
    estimate: f64,
    ci_low: f64,
    ci_high: f64,
    min_t_full: Option<u64>,
    bound: Option<f64>,
    seed: u64,
}

fn tail_row(e: &TailEstimate, bound: Option<f64>) -> TailRow {
    TailRow {
        chain: e.chain.clone(),
        driving: e.driving.clone(),
        num_vertices: e.num_vertices,
        exponent: e.exponent,
        coefficient: e.coefficient,
        threshold: e.threshold,
        trials: e.trials,
        exceedances: e.exceedances,
        estimate: e.estimate,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        min_t_full: e.min_t_full,
        bound,
        seed: e.seed,
    }
}

fn tail(ctx: &mut Ctx<'_>, lower: bool) -> Outcome {
    let info = ctx.chain()?;
    let chain = &info.chain;
    let driving = ctx.driving("central")?;
    let trials = ctx.opts.trials.unwrap_or(100);
    let coefficient = ctx.opts.coefficient.unwrap_or(1.0);
    let d = info.dim;
    let (estimate, bound) = if lower {
        let beta = ctx.opts.beta.unwrap_or(lower_bound_exponent(d));
        (fill_lower_bound_probe(chain, &driving, beta, coefficient, trials, ctx.seed).map_err(err)?, None)
    } else {
        let alpha = ctx.opts.alpha.unwrap_or(if d == 1 { 0.75 } else { 1.0 - 1.0 / (3.0 * d as f64) });
        let e = fill_tail(chain, &driving, alpha, coefficient, trials, ctx.seed).map_err(err)?;
        let radial = matches!(info.kind.as_str(), "ball" | "interval");
        (e, radial.then(|| fill_tail_bound(d, info.size, alpha)))
    };
    ctx.out.csv("", &[tail_row(&estimate, bound)])?;
    let params = json!({"chain": chain.label(), "driving": driving.to_string(), "exponent": estimate.exponent,
        "coefficient": coefficient, "trials": trials, "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params, "estimate": estimate, "bound": bound}))?;
    println!(
        "P(T_full > {:.1}) ~ {:.4} (99% CI [{:.4}, {:.4}], {}/{} trials)",
        estimate.threshold, estimate.estimate, estimate.ci_low, estimate.ci_high, estimate.exceedances, trials
    );
    Ok((Status::Pass, params))
}

#[derive(Serialize)]
struct TreeRow {
    depth: u32,
    num_vertices: usize,
    trials: u64,
    p05: f64,
    median: f64,
    p95: f64,
    min_t: u64,
}

fn tree_fill(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    let driving = ctx.driving("central")?;
    let trials = ctx.opts.trials.unwrap_or(200);
    let r = wired_tree_fill(&info.chain, &driving, trials, ctx.seed).map_err(err)?;
    ctx.out.csv("", &[TreeRow { depth: r.depth, num_vertices: r.num_vertices, trials, p05: r.p05, median: r.median, p95: r.p95, min_t: r.min_t }])?;
    let ratios: Vec<Value> = r.ratios.iter().map(|&x| json!(x)).collect();
    let params = json!({"chain": info.chain.label(), "driving": driving.to_string(), "trials": trials, "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params, "sorted_ratios": ratios}))?;
    println!("T'_full/(#V ln #V): 5% {:.4}, median {:.4}, 95% {:.4}", r.p05, r.median, r.p95);
    Ok((Status::Pass, params))
}

fn mix(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    let chain = &info.chain;
    let n = chain.num_vertices();
    if n > MAX_EXACT_STATE_VERTICES && ctx.opts.allow_projection != Some(true) {
        return Err(format!(
            "{} has {n} vertices; full-state laws need at most {MAX_EXACT_STATE_VERTICES}. \
             Pass --allow-projection to compare sleeping-particle counts instead",
            chain.label()
        ));
    }
    let rates = ctx.rates(n)?;
    let driving = ctx.driving("central")?;
    let samples = ctx.opts.samples.unwrap_or(10_000);
    let grid = parse_grid(ctx.opts.t_grid.as_deref().unwrap_or("0..20"))?;
    let initial = match ctx.opts.initial.as_deref() {
        None => initial_sweep(n, 4, seeds::derive(ctx.seed, 0, Lane::Initial)),
        Some(_) => match ctx.initial(n)? {
            InitialState::Fixed(c) => vec![c],
            InitialState::Stationary => return Err("mix needs fixed initial states".into()),
        },
    };
    let profile = mixing_profile(chain, &rates, &driving, &initial, &grid, samples, ctx.seed).map_err(err)?;
    ctx.out.csv("", &profile.rows)?;
    let worst = profile.rows.iter().map(|r| r.tv - r.tail).fold(f64::NEG_INFINITY, f64::max);
    let params = json!({"chain": chain.label(), "lambda": rates.describe(), "driving": driving.to_string(),
        "samples": samples, "t_grid": grid, "initial_states": initial.len(), "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params, "projected": profile.projected, "max_tv_minus_tail": worst}))?;
    if profile.projected {
        println!("note: chain too large for full-state laws; distances use the sleeping-particle count");
    }
    println!("max over rows of TV - P(T_full > t): {worst:.4}");
    Ok((Status::Pass, params))
}

#[derive(Serialize)]
struct HarmonicRow {
    vertex: usize,
    coords: String,
    green_diagonal: f64,
    hitting_sum: f64,
    green_column_sum: f64,
    exit_time: f64,
}

fn harmonic(ctx: &mut Ctx<'_>) -> Outcome {
    if let Some(radii) = ctx.opts.radii.as_deref() {
        let d = ctx.opts.dim.unwrap_or(2);
        let radii: Vec<f64> = parse_list(radii)?;
        let rows = exit_sum_check(d, &radii).map_err(err)?;
        ctx.out.csv("", &rows)?;
        let params = json!({"dim": d, "radii": radii, "seed": ctx.seed});
        ctx.out.json("meta", &json!({"parameters": params}))?;
        for r in &rows {
            println!("r = {}: min hitting ratio {:.4}, max G(z,z)/ln r {:.4}", r.r, r.min_hitting_ratio, r.max_green_ratio);
        }
        return Ok((Status::Pass, params));
    }
    let info = ctx.chain()?;
    let chain = &info.chain;
    let table = harmonic_table(chain).map_err(err)?;
    let rows: Vec<HarmonicRow> = chain
        .vertices()
        .map(|v| {
            let z = v.index();
            HarmonicRow {
                vertex: z,
                coords: chain.coords(v).map(|c| c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).unwrap_or_default(),
                green_diagonal: table.green[(z, z)],
                hitting_sum: table.hitting_sum(z),
                green_column_sum: table.column_sum(z),
                exit_time: table.exit_times[z],
            }
        })
        .collect();
    ctx.out.csv("", &rows)?;
    let exit_gap = rows.iter().map(|r| (r.green_column_sum - r.exit_time).abs()).fold(0.0, f64::max);
    let params = json!({"chain": chain.label(), "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params, "residual": table.residual, "asymmetry": table.asymmetry(), "max_column_sum_minus_exit_time": exit_gap}))?;
    println!("residual {:.2e}, asymmetry {:.2e}, |sum_y G(y,z) - E_z tau| <= {:.2e}", table.residual, table.asymmetry(), exit_gap);
    Ok((Status::Pass, params))
}

#[derive(Serialize)]
struct SandpileRow {
    d: usize,
    r: f64,
    num_vertices: usize,
    alpha: f64,
    budget: f64,
    initial_mass: f64,
    sweeps: u64,
    converged: bool,
    mass_in_box: f64,
    mass_lost: f64,
    fills_ball: bool,
    max_kappa: f64,
    kappa_center: f64,
    inequality_holds: bool,
}

fn sandpile(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    if info.kind != "ball" {
        return Err("sandpile needs a ball chain".into());
    }
    let d = info.dim;
    let alpha = ctx.opts.alpha.unwrap_or(1.0 - 1.0 / (3.0 * d as f64));
    let rep = divisible_sandpile_check(d, info.size, alpha, ctx.opts.mass).map_err(err)?;
    let row = SandpileRow {
        d,
        r: rep.r,
        num_vertices: rep.num_vertices,
        alpha,
        budget: rep.budget,
        initial_mass: rep.relaxation.initial_mass,
        sweeps: rep.relaxation.sweeps,
        converged: rep.relaxation.converged,
        mass_in_box: rep.relaxation.mass_in_box,
        mass_lost: rep.relaxation.mass_lost,
        fills_ball: rep.fills_ball,
        max_kappa: rep.max_kappa,
        kappa_center: rep.kappa_center,
        inequality_holds: rep.inequality_holds,
    };
    ctx.out.csv("", &[row])?;
    let params = json!({"chain": info.chain.label(), "alpha": alpha, "mass": ctx.opts.mass, "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params, "argmax_kappa": rep.argmax_kappa, "min_odometer": rep.relaxation.min_odometer}))?;
    if !rep.relaxation.converged {
        println!("warning: relaxation did not converge (last change {:.2e})", rep.relaxation.last_change);
    }
    println!("max kappa {:.2} vs budget {:.2}: {}", rep.max_kappa, rep.budget, if rep.inequality_holds { "holds" } else { "fails at this radius" });
    Ok((Status::Pass, params))
}

fn density(ctx: &mut Ctx<'_>) -> Outcome {
    let d = ctx.opts.dim.unwrap_or(1);
    let radii: Vec<f64> = parse_list(ctx.opts.radii.as_deref().ok_or("--radii is required")?)?;
    let rate = parse_scalar_rate(ctx.opts.lambda.as_deref().unwrap_or("1"))?;
    let trials = ctx.opts.trials.unwrap_or(100);
    let rows = density_probe(d, &radii, rate, trials, ctx.seed).map_err(err)?;
    ctx.out.csv("", &rows)?;
    let params = json!({"dim": d, "radii": radii, "lambda": rate.to_string(), "trials": trials, "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params}))?;
    for r in &rows {
        println!("r = {}: density {:.4} +- {:.4}", r.r, r.mean, r.stderr);
    }
    Ok((Status::Pass, params))
}

fn hyperuniform(ctx: &mut Ctx<'_>) -> Outcome {
    let lengths: Vec<u32> = parse_list(ctx.opts.lengths.as_deref().unwrap_or("16,32,64"))?;
    let rate = parse_scalar_rate(ctx.opts.lambda.as_deref().unwrap_or("1"))?;
    let trials = ctx.opts.trials.unwrap_or(200);
    let rep = hyperuniformity_probe(&lengths, rate, trials, ctx.seed).map_err(err)?;
    ctx.out.csv("", &rep.rows)?;
    let params = json!({"lengths": lengths, "lambda": rate.to_string(), "trials": trials, "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params, "slope": rep.slope, "slope_stderr": rep.slope_stderr}))?;
    println!("log-log slope of variance against L: {:.3} +- {:.3}", rep.slope, rep.slope_stderr);
    Ok((Status::Pass, params))
}

#[derive(Serialize)]
struct AbelianRow {
    trials: u64,
    matches: u64,
    max_vertices: usize,
}

fn check_abelian(ctx: &mut Ctx<'_>) -> Outcome {
    let trials = ctx.opts.trials.unwrap_or(1000);
    let max_vertices = ctx.opts.max_vertices.unwrap_or(8);
    if max_vertices == 0 {
        return Err("--max-vertices must be positive".into());
    }
    let s = abelian_suite(trials, max_vertices, ctx.seed).map_err(err)?;
    ctx.out.csv("", &[AbelianRow { trials, matches: s.matches, max_vertices }])?;
    let params = json!({"trials": trials, "max_vertices": max_vertices, "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params, "failures": s.failures}))?;
    println!("{}/{} exact matches", s.matches, trials);
    Ok((if s.matches == trials { Status::Pass } else { Status::Fail }, params))
}

#[derive(Serialize)]
struct SstRow {
    t: u64,
    samples: u64,
    conditioned: u64,
    tv: f64,
    radius: f64,
    inconclusive: bool,
    pass: bool,
}

fn sst_check(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    let chain = &info.chain;
    let n = chain.num_vertices();
    if n > 64 {
        return Err("sst-check needs at most 64 vertices".into());
    }
    let rates = ctx.rates(n)?;
    let driving = ctx.driving("central")?;
    let t = ctx.opts.t.ok_or("--t is required")?;
    let samples = ctx.opts.samples.unwrap_or(10_000);
    let initial = ctx.initial(n)?;
    let rep = strong_stationarity_check(chain, &rates, &driving, &initial, t, samples, ctx.seed).map_err(err)?;
    let pass = rep.inconclusive || rep.tv <= 3.0 * rep.radius;
    ctx.out.csv("", &[SstRow { t, samples, conditioned: rep.conditioned, tv: rep.tv, radius: rep.radius, inconclusive: rep.inconclusive, pass }])?;
    let params = json!({"chain": chain.label(), "lambda": rates.describe(), "driving": driving.to_string(), "t": t,
        "samples": samples, "initial": ctx.opts.initial.as_deref().unwrap_or("empty"), "seed": ctx.seed});
    ctx.out.json("meta", &json!({
        "parameters": params,
        "conditional": experiments::law_table(&rep.conditional, n),
        "reference": experiments::law_table(&rep.reference, n),
    }))?;
    if rep.inconclusive {
        println!("inconclusive: only {} of {} traces had T_full <= {t}", rep.conditioned, samples);
    } else {
        println!("TV {:.4} (radius {:.4}) on {} conditioned traces: {}", rep.tv, rep.radius, rep.conditioned, if pass { "pass" } else { "FAIL" });
    }
    Ok((if pass { Status::Pass } else { Status::Fail }, params))
}

#[derive(Serialize)]
struct BudgetRow {
    d: usize,
    n: u64,
    big_n: u64,
    budget: u64,
    num_vertices: usize,
    eps: f64,
    coupon_bound: u64,
}

fn budget(ctx: &mut Ctx<'_>) -> Outcome {
    let info = ctx.chain()?;
    if info.kind != "torus" {
        return Err("budget needs a torus chain".into());
    }
    let n = info.size as u64;
    let eps = ctx.opts.eps.unwrap_or(0.01);
    let nv = info.chain.num_vertices();
    let row = BudgetRow {
        d: info.dim,
        n,
        big_n: n.pow(info.dim as u32),
        budget: torus_mixing_budget(info.dim, n),
        num_vertices: nv,
        eps,
        coupon_bound: coupon_bound(nv as u64, eps).map_err(err)?,
    };
    println!("budget {} (N = {}), coupon bound {} at eps = {eps}", row.budget, row.big_n, row.coupon_bound);
    ctx.out.csv("", &[row])?;
    let params = json!({"chain": info.chain.label(), "eps": eps, "seed": ctx.seed});
    ctx.out.json("meta", &json!({"parameters": params}))?;
    Ok((Status::Pass, params))
}

