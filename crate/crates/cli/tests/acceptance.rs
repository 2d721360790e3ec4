//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use sarv_core::engine::{replay, saturate, Bound, Limits, SaturationResult, Status};
use sarv_core::lattice::{build_lattice, Edge};
use sarv_core::{parse_program, parse_term, render, Program, Term};
use support::gen::{self, ProgramShape, STRUCTURAL};

// Tolerances.
const SMALL_RUN: Duration = Duration::from_secs(1);
const MAX_RESCUE_ROUNDS: usize = 20;
const KARB_BUDGET: Duration = Duration::from_secs(60);
const MIN_ACCURACY: f64 = 0.90;
const RANDOM_PROGRAMS: u64 = 1000;
const COUNTING_PROGRAMS: u64 = 200;
const PER_PROGRAM: Duration = Duration::from_secs(10);

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn t(s: &str) -> Term {
    parse_term(s).unwrap()
}

fn corpus(rel: &str) -> PathBuf {
    support::corpus_dir().join(rel)
}

fn sarv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarv")).args(args).output().expect("spawn sarv")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn rescue_args(facts: &[&str]) -> Vec<String> {
    let mut args = vec!["check".to_string(), "--rules".to_string()];
    args.extend(support::RESCUE.iter().map(|f| corpus(f).display().to_string()));
    args.push("--facts".into());
    args.extend(facts.iter().map(|f| corpus(f).display().to_string()));
    args
}

fn sarv_owned(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    sarv(&refs)
}

fn rescue(facts: &[&str]) -> (Program, SaturationResult, Duration) {
    let p = support::rescue();
    let extra = support::facts(facts);
    let start = Instant::now();
    let r = saturate(&p, &extra, &Limits::default());
    (p, r, start.elapsed())
}

fn shams() -> (Program, SaturationResult) {
    let p = support::program(&["shams/program.sarv"]);
    let r = saturate(&p, &support::facts(&["shams/input.facts"]), &Limits::default());
    (p, r)
}

fn with_head(r: &SaturationResult, head: &str) -> Vec<String> {
    r.facts()
        .filter(|f| matches!(&f.term, Term::App(h, _) if h.as_atom() == Some(head)))
        .map(|f| f.text().to_string())
        .collect()
}

fn rescue_warning() -> Check {
    let (p, r, took) = rescue(&["rescue/requests-3.facts"]);
    ensure!(r.status == Status::Fixpoint, "status {}", r.status);
    ensure!(took < SMALL_RUN, "took {took:?}");
    ensure!(r.rounds_used < MAX_RESCUE_ROUNDS, "{} rounds", r.rounds_used);
    for goal in ["(3)P(HelicopterMission)", "Warning(P((Very)BudgetConsuming))"] {
        ensure!(r.contains(&t(goal)), "missing {goal}");
    }
    ensure!(with_head(&r, "Failure").is_empty(), "failure derived");
    for (round, rule, text) in support::trace("rescue/requests-3.trace") {
        let f = r.memory.get(&t(&text)).ok_or(format!("trace fact {text} missing"))?;
        let j = f.earliest().ok_or(format!("{text} has no justification"))?;
        ensure!(f.first_round == round && j.rule_id == rule, "{text}: round {} rule {}", f.first_round, j.rule_id);
    }
    replay(&p, &r).map_err(|e| format!("{e:?}"))?;
    let out = sarv_owned(&rescue_args(&["rescue/requests-3.facts"]));
    ensure!(code(&out) == 1, "exit {}", code(&out));
    Ok(format!("{} rounds, {:.1} ms, exit 1", r.rounds_used, took.as_secs_f64() * 1e3))
}

fn resolution() -> Check {
    let (_, r, _) = rescue(&["rescue/requests-3.facts", "rescue/doublecheck.facts"]);
    ensure!(r.contains(&t("Resolved(Warning(P((Very)BudgetConsuming)))")), "no Resolved fact");
    let out = sarv_owned(&rescue_args(&["rescue/requests-3.facts", "rescue/doublecheck.facts"]));
    ensure!(code(&out) == 0, "exit {}", code(&out));
    ensure!(stdout(&out).starts_with("overall: Resolved"), "{}", stdout(&out));
    Ok("Resolved, exit 0".into())
}

fn counting_guard() -> Check {
    let (_, r, _) = rescue(&["rescue/requests-2.facts"]);
    ensure!(r.status == Status::Fixpoint, "status {}", r.status);
    ensure!(r.contains(&t("(2)P(HelicopterMission)")), "two requests not counted");
    // the only `Very` facts are the asserted prohibition and its unit count
    let very: Vec<&str> = r.facts().map(|f| f.text()).filter(|s| s.contains("Very")).collect();
    ensure!(
        very == ["( 1 ) Forbidden ( ( Very ) BudgetConsuming )", "Forbidden ( ( Very ) BudgetConsuming )"],
        "{very:?}"
    );
    ensure!(with_head(&r, "Warning").is_empty(), "warning derived");
    Ok("no (Very) permission, no Warning".into())
}

fn shams_lattice(dir: &Path) -> Check {
    let (_, r) = shams();
    ensure!(r.status == Status::Fixpoint, "status {}", r.status);
    let lattice = build_lattice(&r);
    let input =
        lattice.node_for(&t("How(Excitement(Ability(See(Unseen)))) Is-In Beginning")).ok_or("input node missing")?;
    let goal = lattice.node_for(&goal_term()).ok_or("goal node missing")?;
    let edge = Edge { from: input.id.clone(), to: goal.id.clone(), rule: "input_rules.6".into(), ord: 0 };
    ensure!(lattice.contains_edge(&edge), "no edge via the question rule");
    ensure!(lattice.reaches(&input.id, &goal.id), "goal unreachable");

    let mut without = shams().0;
    without.initial_facts.retain(|f| f.render() != "How Is-A Question");
    let lifted = saturate(&without, &support::facts(&["shams/input.facts"]), &Limits::default());
    ensure!(!lifted.contains(&goal_term()), "derived without the Is-A fact");

    let program = corpus("shams/program.sarv").display().to_string();
    let input_file = corpus("shams/input.facts").display().to_string();
    let run = sarv(&["run", "--rules", &program, "--facts", &input_file]);
    ensure!(code(&run) == 0, "run exit {}", code(&run));
    let mut exports = Vec::new();
    for i in 0..2 {
        let dot = dir.join(format!("shams-{i}.dot"));
        let json = dir.join(format!("shams-{i}.json"));
        let out = sarv(&[
            "check",
            "--rules",
            &program,
            "--facts",
            &input_file,
            "--dot",
            dot.to_str().unwrap(),
            "--lattice",
            json.to_str().unwrap(),
        ]);
        ensure!(code(&out) == 0, "check exit {}", code(&out));
        exports.push((std::fs::read(dot).unwrap(), std::fs::read(json).unwrap()));
    }
    ensure!(exports[0] == exports[1], "exports differ between runs");
    ensure!(exports[0].1 == (lattice.to_json() + "\n").into_bytes(), "CLI lattice differs from library");
    Ok(format!("{} nodes, {} edges, exports identical", lattice.nodes.len(), lattice.edges.len()))
}

fn goal_term() -> Term {
    t("Engagement(Excitement(Ability(See(Unseen))))")
}

fn soundness() -> Check {
    let mut runs = vec![
        rescue(&["rescue/requests-3.facts"]),
        rescue(&["rescue/requests-3.facts", "rescue/doublecheck.facts"]),
        rescue(&["rescue/requests-2.facts"]),
    ];
    let (sp, sr) = shams();
    runs.push((sp, sr, Duration::ZERO));
    let mut total = 0;
    for (p, r, _) in &runs {
        let checked = replay(p, r).map_err(|e| format!("{e:?}"))?;
        ensure!(checked == r.memory.justification_count(), "{checked} of {}", r.memory.justification_count());
        total += checked;
    }
    Ok(format!("{total} justifications replayed"))
}

fn termination(dir: &Path) -> Check {
    let bomb = dir.join("bomb.sarv");
    std::fs::write(&bomb, "A => P(A)\nA0\n").unwrap();
    let start = Instant::now();
    let out = sarv(&["run", "--rules", bomb.to_str().unwrap()]);
    let took = start.elapsed();
    ensure!(code(&out) == 3, "exit {}", code(&out));
    ensure!(stdout(&out).starts_with(&format!("# {}", Status::BoundHit(Bound::Depth))), "{}", stdout(&out));
    ensure!(took < SMALL_RUN, "took {took:?}");

    let shape = ProgramShape { max_rules: 10, max_facts: 5, ops: &STRUCTURAL, max_depth: 3 };
    let lim = Limits::default();
    let mut bounded = 0;
    let mut slowest = Duration::ZERO;
    for seed in 0..RANDOM_PROGRAMS {
        let p = parse_program(&gen::program(&mut gen::rng(seed), &shape).text())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let start = Instant::now();
        let r = saturate(&p, &[], &lim);
        let took = start.elapsed();
        slowest = slowest.max(took);
        ensure!(took < PER_PROGRAM, "seed {seed} took {took:?}");
        ensure!(r.rounds_used <= lim.max_rounds && r.memory.len() <= lim.max_facts, "seed {seed} exceeded limits");
        bounded += usize::from(r.status != Status::Fixpoint);
    }
    Ok(format!(
        "bomb {:.0} ms; {RANDOM_PROGRAMS} programs, {bounded} bounded, slowest {:.0} ms",
        took.as_secs_f64() * 1e3,
        slowest.as_secs_f64() * 1e3
    ))
}

fn counting_oracle() -> Check {
    let mut compared = 0;
    for seed in 0..COUNTING_PROGRAMS {
        let text = gen::propositional(&mut gen::rng(seed), 6, 4);
        let p = parse_program(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        let lim = Limits::default();
        let r = saturate(&p, &[], &lim);
        ensure!(r.status == Status::Fixpoint, "seed {seed}: {}", r.status);
        for f in r.facts().filter(|f| matches!(f.term, Term::Atom(_))) {
            let expected = support::oracle::trees(&p, &f.term, &mut Vec::new(), u128::from(lim.max_multiplicity));
            let emitted = r
                .facts()
                .filter_map(|g| match &g.term {
                    Term::Ann(n, body) if **body == f.term => n.as_num().and_then(|n| n.to_i64()),
                    _ => None,
                })
                .max();
            ensure!(emitted == Some(expected as i64), "seed {seed} {}: {emitted:?} vs {expected}", f.text());
            compared += 1;
        }
    }
    Ok(format!("{COUNTING_PROGRAMS} programs, {compared} counts equal"))
}

/// Reflexive-transitive closure of the asserted `Is-A` pairs.
fn isa(pairs: &[(&str, &str)], a: &str, b: &str) -> bool {
    let mut seen = BTreeSet::from([a]);
    let mut stack = vec![a];
    while let Some(x) = stack.pop() {
        if x == b {
            return true;
        }
        for &(s, u) in pairs {
            if s == x && seen.insert(u) {
                stack.push(u);
            }
        }
    }
    false
}

fn subsumption() -> Check {
    let parts: BTreeMap<&str, Vec<&str>> =
        [("Car", vec!["Wheel", "Door"]), ("Vehicle", vec!["Wheel", "Panel"]), ("Bike", vec!["Wheel", "Bell"])].into();
    let pairs = [("Door", "Panel")];
    let mut text = String::new();
    for (whole, ps) in &parts {
        for p in ps {
            text += &format!("{p} Is-Part-Of {whole}\n");
        }
    }
    for (a, b) in pairs {
        text += &format!("{a} Is-A {b}\n");
    }
    let p = parse_program(&text).map_err(|e| e.to_string())?;
    let r = saturate(&p, &[], &Limits::default());
    replay(&p, &r).map_err(|e| format!("{e:?}"))?;
    let direct = |s1: &str, s2: &str| parts[s1].iter().all(|x| parts[s2].iter().any(|y| isa(&pairs, x, y)));
    for (s1, s2, expected) in [("Car", "Vehicle", true), ("Bike", "Vehicle", false), ("Car", "Car", true)] {
        ensure!(direct(s1, s2) == expected, "oracle disagrees on {s1} {s2}");
        ensure!(r.memory.isa().is_a(&t(s1), &t(s2)) == expected, "engine disagrees on {s1} {s2}");
    }
    Ok("holds / fails / reflexive".into())
}

fn karb(dir: &Path) -> Check {
    let rules = corpus("karb/quality.sarv").display().to_string();
    let planted = corpus("karb/planted.json").display().to_string();
    let path = |name: &str| dir.join(name).display().to_string();
    let start = Instant::now();
    for (seed, n, name) in [("7", "500", "train.csv"), ("8", "200", "test.csv")] {
        let out = sarv(&[
            "karb",
            "synth",
            "--rules",
            &rules,
            "--planted",
            &planted,
            "--seed",
            seed,
            "--n",
            n,
            "--out",
            &path(name),
        ]);
        ensure!(code(&out) == 0, "synth exit {}", code(&out));
    }
    let mut fitted = Vec::new();
    let mut summary = serde_json::Value::Null;
    for q in ["q1.json", "q2.json"] {
        let out = sarv(&[
            "karb",
            "fit",
            "--dataset",
            &path("train.csv"),
            "--rules",
            &rules,
            "--seed",
            "7",
            "--iters",
            "500",
            "--restarts",
            "2",
            "--qualifier",
            &path(q),
        ]);
        ensure!(code(&out) == 0, "fit exit {}: {}", code(&out), String::from_utf8_lossy(&out.stderr));
        summary = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        fitted.push(std::fs::read(path(q)).unwrap());
    }
    ensure!(fitted[0] == fitted[1], "qualifiers differ between runs");
    let restarts = summary["restarts"].as_array().ok_or("no restarts")?;
    ensure!(restarts.len() == 2, "{} restarts", restarts.len());
    for r in restarts {
        let (initial, last) =
            (r["initial_fitness"].as_f64().ok_or("no initial")?, r["final_fitness"].as_f64().ok_or("no final")?);
        ensure!(last <= initial, "restart got worse: {r}");
    }
    let out =
        sarv(&["karb", "eval", "--dataset", &path("test.csv"), "--rules", &rules, "--qualifier", &path("q1.json")]);
    ensure!(code(&out) == 0, "eval exit {}", code(&out));
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let (acc, base) =
        (m["accuracy"].as_f64().ok_or("no accuracy")?, m["baseline_accuracy"].as_f64().ok_or("no baseline")?);
    let took = start.elapsed();
    ensure!(acc >= MIN_ACCURACY, "accuracy {acc:.3}");
    ensure!(acc > base, "accuracy {acc:.3} not above baseline {base:.3}");
    ensure!(took < KARB_BUDGET, "took {took:?}");
    Ok(format!("accuracy {acc:.3} vs baseline {base:.3}, {:.1} s", took.as_secs_f64()))
}

fn round_trip() -> Check {
    let corpora: [&[&str]; 3] = [&support::RESCUE, &["rescue/listing.sarv"], &["shams/program.sarv"]];
    for files in corpora {
        let p = support::program(files);
        let again = parse_program(&render(&p)).map_err(|e| format!("{files:?}: {e}"))?;
        ensure!(again == p, "{files:?} changed on round trip");
    }
    let shape = ProgramShape { max_rules: 6, max_facts: 4, ops: &STRUCTURAL, max_depth: 4 };
    for seed in 0..RANDOM_PROGRAMS {
        let text = gen::program(&mut gen::rng(seed), &shape).text();
        let p = parse_program(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        let again = parse_program(&render(&p)).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(again == p && render(&again) == render(&p), "seed {seed} changed on round trip");
    }
    Ok(format!("3 corpora, {RANDOM_PROGRAMS} generated programs"))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let dir = dir.path();
    let criteria: [(&str, &dyn Fn() -> Check); 10] = [
        ("rescue warning", &rescue_warning),
        ("resolution path", &resolution),
        ("counting guard", &counting_guard),
        ("shams lattice", &|| shams_lattice(dir)),
        ("soundness replay", &soundness),
        ("termination", &|| termination(dir)),
        ("counting oracle", &counting_oracle),
        ("subsumption", &subsumption),
        ("karb recovery", &|| karb(dir)),
        ("round trip", &round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
