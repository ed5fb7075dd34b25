use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use log::info;
use serde_json::{json, Value};

use crnkit::continuous::{integrate_with, OdeError, OdeOptions};
use crnkit::counter::{compile_ca, default_n_d, initial_state, parse_ca, CaError};
use crnkit::decide::{crc_output_verdict, halting_verdict, speed_fault_witness, stable_verdict, Crc, Crd, DecideError, SpeedFault, VerdictKind};
use crnkit::dsd::{compile_dsd, cosimulate_check, default_fuel, CosimReport, DsdError};
use crnkit::predicate::{eval_predicate, parse_predicate, CompiledPredicate, Expr, PredicateError};
use crnkit::reach::{post, post_kfast};
use crnkit::stochastic::{simulate_batch, StochasticConfig, StopReason};
use crnkit::{parse_crn, render, Crn, CrnFile, Roles, State};

use crate::manifest::{sha256_hex, Recorder};
use crate::{emit, runtime, semantic, usage, Check, CheckArgs, Cli, Command, CompileArgs, DecideArgs, DecideMode, Format, ReachArgs, SimMode, SimulateArgs, Source, VERSION};

pub fn run(cli: &Cli, rec: &mut Recorder) -> Result<u8> {
    match &cli.command {
        Command::Parse { file } => parse(rec, file),
        Command::Simulate(a) => simulate(cli, rec, a),
        Command::Decide(a) => decide(rec, a),
        Command::Reach(a) => reach(rec, a),
        Command::Compile(a) => compile(rec, a),
        Command::Check(a) => check(cli, rec, a),
        Command::Replay(_) => unreachable!("handled by invoke"),
    }
}

fn read(rec: &mut Recorder, path: &Path) -> Result<String> {
    rec.read_input(path).map_err(|e| usage(format!("{e:#}")))
}

fn load(rec: &mut Recorder, path: &Path) -> Result<CrnFile> {
    let text = read(rec, path)?;
    parse_crn(&text).map_err(|e| usage(format!("{}:{}:{}: {}", path.display(), e.line, e.column, e.message)))
}

/// The state given on the command line, else the file's `#init`.
fn state_arg(file: &CrnFile, arg: Option<&str>, what: &str) -> Result<State> {
    match arg {
        Some(s) => file
            .crn
            .parse_state(s)
            .map_err(|e| usage(format!("{what} `{s}`: {}", e.message))),
        None => file
            .init
            .clone()
            .ok_or_else(|| semantic(format!("no {what}: the file has no #init and none was given"))),
    }
}

fn decide_error(e: DecideError) -> anyhow::Error {
    match e {
        DecideError::ZeroInput => usage("input must be nonzero"),
        e => semantic(e.to_string()),
    }
}

/// Prints `value` and saves it as `name`.
fn report(rec: &mut Recorder, name: &str, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    rec.write(name, text.as_bytes())?;
    emit(&text);
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "out".to_string(), |s| s.to_string_lossy().into_owned())
}

fn parse(rec: &mut Recorder, file: &Path) -> Result<u8> {
    let f = load(rec, file)?;
    let text = render(&f);
    rec.write("parsed.crn", text.as_bytes())?;
    emit(&text);
    let crn = &f.crn;
    let summary = json!({
        "species": crn.species_names(),
        "reactions": (0..crn.reactions().len()).map(|j| crn.format_reaction(j)).collect::<Vec<_>>(),
        "roles": f.roles,
        "init": f.init.as_ref().map(|c| crn.format_state(c)),
        "volume": f.volume,
    });
    rec.write("parse.json", (serde_json::to_string_pretty(&summary)? + "\n").as_bytes())?;
    Ok(0)
}

fn simulate(cli: &Cli, rec: &mut Recorder, a: &SimulateArgs) -> Result<u8> {
    let f = load(rec, &a.file)?;
    let init = state_arg(&f, a.init.as_deref(), "initial state")?;
    let volume = a.volume.or(f.volume).unwrap_or(1.0);
    if !(volume.is_finite() && volume > 0.0) {
        return Err(usage("volume must be positive"));
    }
    let crn = &f.crn;
    match a.mode {
        SimMode::Ssa => {
            if a.runs == 0 {
                return Err(usage("--runs must be positive"));
            }
            let cfg = StochasticConfig {
                volume,
                seed: cli.seed,
                max_time: a.t.unwrap_or(f64::INFINITY),
                max_steps: a.max_steps,
                ..Default::default()
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            info!("simulating {} runs", a.runs);
            let trajectories = simulate_batch(crn, &init, &cfg, a.runs);
            let width = a.runs.saturating_sub(1).to_string().len().max(4);
            for (i, tr) in trajectories.iter().enumerate() {
                let (ext, body) = match cli.format {
                    Format::Csv => ("csv", tr.to_csv(crn)),
                    Format::Json => ("json", serde_json::to_string(&tr.to_json(crn))? + "\n"),
                };
                rec.write(&format!("run_{i:0width$}.{ext}"), body.as_bytes())?;
            }
            let mut stops: BTreeMap<String, usize> = BTreeMap::new();
            for tr in &trajectories {
                *stops.entry(format!("{:?}", tr.stop)).or_default() += 1;
            }
            let n = trajectories.len() as f64;
            let mean_counts: BTreeMap<String, f64> = crn
                .species_names()
                .into_iter()
                .enumerate()
                .map(|(x, s)| (s, trajectories.iter().map(|t| t.final_state.get(x) as f64).sum::<f64>() / n))
                .collect();
            let summary = json!({
                "mode": "ssa",
                "runs": a.runs,
                "seed": cli.seed,
                "volume": volume,
                "init": crn.format_state(&init),
                "stop_reasons": stops,
                "mean_final_time": trajectories.iter().map(|t| t.final_time).sum::<f64>() / n,
                "mean_final_counts": mean_counts,
            });
            report(rec, "summary.json", &summary)?;
            let stalled = trajectories.iter().filter(|t| t.stop == StopReason::MaxSteps).count();
            if stalled > 0 {
                return Err(runtime(format!("{stalled} runs hit the step limit of {}", a.max_steps)));
            }
            Ok(0)
        }
        SimMode::Ode => {
            let x0: Vec<f64> = init.counts().iter().map(|&n| n as f64 / volume).collect();
            let t_end = a.t.unwrap_or(100.0);
            let opts = OdeOptions {
                tol: a.tol,
                max_steps: a.max_steps as usize,
                ..Default::default()
            };
            let tr = integrate_with(crn, &x0, t_end, &opts).map_err(|e| match e {
                OdeError::StepUnderflow { .. } | OdeError::StepLimit { .. } => runtime(e.to_string()),
                e => usage(e.to_string()),
            })?;
            let (name, body) = match cli.format {
                Format::Csv => ("ode.csv", tr.to_csv(crn)),
                Format::Json => ("ode.json", serde_json::to_string(&tr.to_json(crn))? + "\n"),
            };
            rec.write(name, body.as_bytes())?;
            let finals: BTreeMap<String, f64> = crn.species_names().into_iter().zip(tr.final_state().iter().copied()).collect();
            let summary = json!({
                "mode": "ode",
                "t_end": t_end,
                "final_time": tr.final_time(),
                "fixpoint": tr.fixpoint,
                "final_state": finals,
                "accepted_steps": tr.accepted_steps,
                "rejected_steps": tr.rejected_steps,
                "clipped_steps": tr.clipped_steps,
            });
            report(rec, "summary.json", &summary)?;
            Ok(0)
        }
    }
}

fn verdict_code(kind: VerdictKind) -> u8 {
    match kind {
        VerdictKind::Accept => 0,
        VerdictKind::Reject => 1,
        VerdictKind::Undecided | VerdictKind::Inconclusive => 5,
    }
}

fn decide(rec: &mut Recorder, a: &DecideArgs) -> Result<u8> {
    if let Some(p) = &a.predicate {
        return decide_predicate(rec, a, p);
    }
    let path = a.file.as_ref().ok_or_else(|| usage("give a CRD file or --predicate"))?;
    let f = load(rec, path)?;
    let input = state_arg(&f, a.input.as_deref(), "input")?;
    let crn = &f.crn;
    if a.mode == DecideMode::Crc {
        let crc = Crc::from_file(&f).map_err(decide_error)?;
        let v = crc_output_verdict(&crc, &input, a.bound).map_err(decide_error)?;
        let outputs: Option<BTreeMap<String, u64>> = v.output.as_ref().map(|o| {
            crc.output_species()
                .iter()
                .zip(o)
                .map(|(&x, &n)| (crn.species()[x].to_string(), n))
                .collect()
        });
        let kind = match (&v.output, v.truncated) {
            (Some(_), _) => "Stable",
            (None, true) => "Inconclusive",
            (None, false) => "NotStabilizing",
        };
        report(
            rec,
            "verdict.json",
            &json!({
                "mode": "crc",
                "input": crn.format_state(&input),
                "kind": kind,
                "output": outputs,
                "witness": v.witness.as_ref().map(|w| crn.format_state(w)),
                "states_explored": v.states_explored,
                "truncated": v.truncated,
            }),
        )?;
        return Ok(if v.output.is_some() { 0 } else { 5 });
    }
    let crd = Crd::from_file(&f).map_err(decide_error)?;
    let v = match a.mode {
        DecideMode::Halting => halting_verdict(&crd, &input, a.bound),
        _ => stable_verdict(&crd, &input, a.bound),
    }
    .map_err(decide_error)?;
    let mut out = json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "input": crn.format_state(&input),
        "bound": a.bound,
    });
    out["verdict"] = v.to_json(crn);
    report(rec, "verdict.json", &out)?;
    Ok(verdict_code(v.kind))
}

fn decide_predicate(rec: &mut Recorder, a: &DecideArgs, text: &str) -> Result<u8> {
    let expr = parse_predicate(text).map_err(|e| usage(e.to_string()))?;
    let pred = CompiledPredicate::new(expr).map_err(|e| semantic(e.to_string()))?;
    let k = pred.arity().ok_or_else(|| semantic("predicate has no atoms"))?;
    let spec = a.input.as_deref().ok_or_else(|| usage("--input is required with --predicate"))?;
    let terms = crnkit::format::parse_terms(spec).map_err(|e| usage(format!("input `{spec}`: {}", e.message)))?;
    let mut x = vec![0u64; k];
    for (name, n) in terms {
        let i = name
            .strip_prefix('X')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|i| (1..=k).contains(i))
            .ok_or_else(|| usage(format!("`{name}` is not one of X1..X{k}")))?;
        x[i - 1] += n;
    }
    let (kind, detail) = match eval_predicate(&pred, &x, a.bound) {
        Ok(true) => (VerdictKind::Accept, None),
        Ok(false) => (VerdictKind::Reject, None),
        Err(PredicateError::NotDecided { atom, kind }) => (kind, Some(format!("atom {atom} is {kind:?}"))),
        Err(PredicateError::Decide(e)) => return Err(decide_error(e)),
        Err(e) => return Err(semantic(e.to_string())),
    };
    report(
        rec,
        "verdict.json",
        &json!({
            "mode": "predicate",
            "predicate": text,
            "input": x,
            "verdict": { "kind": kind, "detail": detail },
        }),
    )?;
    Ok(verdict_code(kind))
}

fn reach(rec: &mut Recorder, a: &ReachArgs) -> Result<u8> {
    let f = load(rec, &a.file)?;
    let init = state_arg(&f, a.init.as_deref(), "initial state")?;
    let crn = &f.crn;
    let r = match a.kfast {
        Some(k) => post_kfast(crn, &init, k, a.bound).map_err(|e| semantic(e.to_string()))?,
        None => post(crn, &init, a.bound),
    };
    rec.write("reach.json", (serde_json::to_string(&r.to_json(crn))? + "\n").as_bytes())?;
    if a.dot {
        rec.write("reach.dot", r.to_dot(crn).as_bytes())?;
    }
    let terminal = r.states.iter().filter(|c| crn.is_terminal(c)).count();
    report(
        rec,
        "reach_summary.json",
        &json!({
            "init": crn.format_state(&init),
            "kfast": a.kfast,
            "states": r.len(),
            "edges": r.edges.len(),
            "terminal_states": terminal,
            "truncated": r.truncated,
            "bound": a.bound,
        }),
    )?;
    Ok(if r.truncated { 5 } else { 0 })
}

fn header(lines: &[String]) -> String {
    lines.iter().map(|l| format!("% {l}\n")).collect()
}

fn compile(rec: &mut Recorder, a: &CompileArgs) -> Result<u8> {
    match a.from {
        Source::Ca => compile_from_ca(rec, a),
        Source::Predicate => compile_from_predicate(rec, a),
        Source::Dsd => compile_from_dsd(rec, a),
    }
}

fn compile_from_ca(rec: &mut Recorder, a: &CompileArgs) -> Result<u8> {
    let path = Path::new(&a.source);
    let text = read(rec, path)?;
    let ca = parse_ca(&text).map_err(|e| match e {
        CaError::Syntax { .. } | CaError::MissingDirective(_) => usage(format!("{}: {e}", path.display())),
        e => semantic(e.to_string()),
    })?;
    let compiled = compile_ca(&ca, a.l).map_err(|e| semantic(e.to_string()))?;
    let mut f = CrnFile::new(compiled.crn.clone());
    f.roles = Roles {
        input: vec![ca.input.clone()],
        output: ca.counters().into_iter().filter(|c| *c != ca.input).collect(),
        ..Default::default()
    };
    if let Some(nu) = a.nu {
        f.init = Some(initial_state(&compiled, nu, a.n_d.unwrap_or_else(|| default_n_d(nu))));
    }
    let body = header(&[
        format!("crnkit {VERSION}: compiled from counter automaton {}", path.display()),
        format!("source sha256 {}", sha256_hex(text.as_bytes())),
        format!("clock length l = {}", a.l),
    ]) + &render(&f);
    let name = a.out.clone().unwrap_or_else(|| format!("{}.crn", stem(path)));
    rec.write(&name, body.as_bytes())?;
    let clock: Vec<usize> = (0..compiled.crn.reactions().len())
        .filter(|&j| {
            compiled.crn.reaction(j).reactants().species().all(|x| x == compiled.d || compiled.clock.contains(&x))
        })
        .collect();
    report(
        rec,
        "compile.json",
        &json!({
            "from": "ca",
            "output": name,
            "species": compiled.crn.num_species(),
            "reactions": compiled.crn.reactions().len(),
            "clock_reactions": clock.len(),
            "l": a.l,
        }),
    )?;
    Ok(0)
}

fn compile_from_predicate(rec: &mut Recorder, a: &CompileArgs) -> Result<u8> {
    let expr = parse_predicate(&a.source).map_err(|e| usage(e.to_string()))?;
    let atom = match expr {
        Expr::Atom(atom) => atom,
        _ => {
            return Err(semantic(
                "only a single le(...) or mod(...) atom compiles to one CRD; decide compound predicates with `decide --predicate`",
            ))
        }
    };
    let crd = atom.compile().map_err(|e| semantic(e.to_string()))?;
    let body = header(&[
        format!("crnkit {VERSION}: compiled from predicate {}", a.source),
        format!("inputs X1..X{}; halting decider", atom.arity()),
    ]) + &render(&crd.to_file());
    let name = a.out.clone().unwrap_or_else(|| "predicate.crn".to_string());
    rec.write(&name, body.as_bytes())?;
    report(
        rec,
        "compile.json",
        &json!({
            "from": "predicate",
            "output": name,
            "atom": atom,
            "species": crd.crn().num_species(),
            "reactions": crd.crn().reactions().len(),
        }),
    )?;
    Ok(0)
}

fn compile_from_dsd(rec: &mut Recorder, a: &CompileArgs) -> Result<u8> {
    let path = Path::new(&a.source);
    let f = load(rec, path)?;
    let fuel = match (a.fuel, &f.init) {
        (Some(n), _) => n,
        (None, Some(init)) => default_fuel(init),
        (None, None) => return Err(semantic("give --fuel or an #init line to size the fuel")),
    };
    let prog = compile_dsd(&f.crn, fuel).map_err(dsd_error)?;
    let mut imp = CrnFile::new(prog.implementation.clone());
    if let Some(init) = &f.init {
        imp.init = Some(prog.initial_state(init).map_err(dsd_error)?);
    }
    let src_hash = sha256_hex(render(&f).as_bytes());
    let body = header(&[
        format!("crnkit {VERSION}: strand displacement implementation of {}", path.display()),
        format!("abstract network sha256 {src_hash}"),
        format!("fuel per species {fuel}"),
    ]) + &render(&imp);
    let name = a.out.clone().unwrap_or_else(|| format!("{}.dsd.crn", stem(path)));
    let json_name = Path::new(&name).with_extension("json").display().to_string();
    rec.write(&name, body.as_bytes())?;
    rec.write(&json_name, (serde_json::to_string_pretty(&prog.to_json())? + "\n").as_bytes())?;
    report(
        rec,
        "compile.json",
        &json!({
            "from": "dsd",
            "output": name,
            "program": json_name,
            "fuel": fuel,
            "species": prog.implementation.num_species(),
            "reactions": prog.implementation.reactions().len(),
        }),
    )?;
    Ok(0)
}

fn dsd_error(e: DsdError) -> anyhow::Error {
    semantic(e.to_string())
}

fn check(cli: &Cli, rec: &mut Recorder, a: &CheckArgs) -> Result<u8> {
    let f = load(rec, &a.file)?;
    let crn = &f.crn;
    match a.what {
        Check::Conservation => {
            let v = crn.conservation_vector();
            let weights: Option<BTreeMap<String, u64>> = v.map(|v| crn.species_names().into_iter().zip(v).collect());
            report(
                rec,
                "conservation.json",
                &json!({ "conservative": weights.is_some(), "vector": weights }),
            )?;
            Ok(0)
        }
        Check::Speedfault => {
            let crd = Crd::from_file(&f).map_err(decide_error)?;
            let input = state_arg(&f, a.input.as_deref(), "input")?;
            let r = speed_fault_witness(&crd, &input, a.k, a.bound).map_err(decide_error)?;
            let (result, witness, code) = match &r {
                SpeedFault::Free => ("none found", None, 0),
                SpeedFault::Witness(w) => ("witness", Some(crn.format_state(w)), 1),
                SpeedFault::Inconclusive => ("inconclusive", None, 5),
            };
            report(
                rec,
                "speedfault.json",
                &json!({
                    "input": crn.format_state(&input),
                    "k": a.k,
                    "bound": a.bound,
                    "result": result,
                    "witness": witness,
                }),
            )?;
            Ok(code)
        }
        Check::Cosim => {
            let init = state_arg(&f, a.input.as_deref(), "initial state")?;
            let fuel = a.fuel.unwrap_or_else(|| default_fuel(&init));
            let prog = compile_dsd(crn, fuel).map_err(dsd_error)?;
            let cfg = StochasticConfig {
                volume: a.volume.or(f.volume).unwrap_or(1.0),
                seed: cli.seed,
                ..Default::default()
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let rep = cosimulate_check(&prog, &init, &cfg, a.runs, a.bound).map_err(dsd_error)?;
            let text = rep.to_text(crn);
            rec.write("cosim.txt", text.as_bytes())?;
            rec.write("cosim.json", (serde_json::to_string_pretty(&cosim_json(&rep, crn, fuel))? + "\n").as_bytes())?;
            emit(&text);
            Ok(if rep.passed() { 0 } else { 1 })
        }
    }
}

fn cosim_json(rep: &CosimReport, crn: &Crn, fuel: u64) -> Value {
    let hist: BTreeMap<String, usize> = rep.final_histogram.iter().map(|(c, n)| (crn.format_state(c), *n)).collect();
    json!({
        "passed": rep.passed(),
        "fuel": fuel,
        "n_runs": rep.n_runs,
        "abstract_states": rep.abstract_states,
        "abstract_terminals": rep.abstract_terminals.iter().map(|c| crn.format_state(c)).collect::<Vec<_>>(),
        "final_histogram": hist,
        "runs": rep.runs.iter().map(|r| json!({
            "final_projection": crn.format_state(&r.final_projection),
            "quiescent": r.quiescent,
            "fuel_exhausted": r.fuel_exhausted,
            "unreachable_projections": r.unreachable_projections,
            "unreachable_resolved": r.unreachable_resolved,
            "audit_balanced": r.audit_balanced,
        })).collect::<Vec<_>>(),
    })
}
