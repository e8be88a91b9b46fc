use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use planbench_core::blocksworld::{benchmark_specs, blocksworld_domain, gen_instance, BlocksworldInstanceSpec};
use planbench_core::curriculum::{export_finetune_dataset, make_instance, CurriculumConfig, TaskKind, TestInstance};
use planbench_core::evaluator::{report, EvalRecord};
use planbench_core::pddl::{emit_domain, emit_problem, parse_domain, parse_plan, parse_problem, validate, Domain, GoalKind, Plan, Problem};
use planbench_core::planner::{solve_optimal, solve_satisficing, Budget};
use planbench_core::repair::{repair, RepairConfig};
use planbench_harness::{ConditionPolicy, EventLog, Study, StudyConfig};
use planbench_llm::{run_suite, Cache, LLMConfig, Llm};

use crate::{Command, Policy};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_problem(domain: &Path, problem: &Path) -> Result<(Domain, Problem)> {
    let d = parse_domain(&read(domain)?).with_context(|| domain.display().to_string())?;
    let p = parse_problem(&read(problem)?, &d).with_context(|| problem.display().to_string())?;
    Ok((d, p))
}

fn print_plan(plan: &Plan) {
    for t in plan.tokens() {
        println!("{t}");
    }
}

fn specs(blocks: Option<usize>, goal: Option<GoalKind>, count: usize, seed: u64) -> Vec<BlocksworldInstanceSpec> {
    let mut specs = benchmark_specs(count, seed);
    for s in &mut specs {
        if let Some(n) = blocks {
            s.num_blocks = n;
        }
        if let Some(g) = goal {
            s.goal_kind = g;
        }
    }
    specs
}

/// One line of a `gen` manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub seed: u64,
    pub num_blocks: usize,
    pub goal_kind: GoalKind,
    pub domain: PathBuf,
    pub problem: PathBuf,
    pub optimal_cost: Option<usize>,
}

fn gen(
    blocks: Option<usize>,
    count: usize,
    seed: u64,
    goal: Option<GoalKind>,
    out: &Path,
    solve: bool,
    histogram: Option<&Path>,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let domain = blocksworld_domain();
    fs::write(out.join("domain.pddl"), emit_domain(&domain))?;
    let mut entries = Vec::new();
    let mut cells = std::collections::BTreeMap::<(usize, usize), usize>::new();
    for spec in specs(blocks, goal, count, seed) {
        let mut p = gen_instance(&spec)?;
        let kind = if spec.goal_kind == GoalKind::Full { "full" } else { "partial" };
        let id = format!("bw-{}-{kind}-{}", spec.num_blocks, spec.seed);
        p.name = id.clone();
        let file = format!("{id}.pddl");
        fs::write(out.join(&file), emit_problem(&p))?;
        let optimal_cost = if solve { Some(solve_optimal(&domain, &p)?.0.len()) } else { None };
        if let Some(c) = optimal_cost {
            *cells.entry((spec.num_blocks, c)).or_default() += 1;
        }
        entries.push(ManifestEntry {
            id,
            seed: spec.seed,
            num_blocks: spec.num_blocks,
            goal_kind: spec.goal_kind,
            domain: "domain.pddl".into(),
            problem: file.into(),
            optimal_cost,
        });
    }
    write_jsonl(&out.join("manifest.jsonl"), &entries)?;
    if let Some(h) = histogram {
        let mut csv = String::from("num_blocks,optimal_len,count\n");
        for ((n, c), k) in cells {
            csv.push_str(&format!("{n},{c},{k}\n"));
        }
        fs::write(h, csv)?;
    }
    eprintln!("wrote {} problems to {}", entries.len(), out.display());
    Ok(())
}

fn write_report(dir: &Path, records: &[EvalRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (table, md, csv) = report(records);
    fs::write(dir.join("report.md"), &md)?;
    fs::write(dir.join("histogram.csv"), csv)?;
    fs::write(dir.join("table.json"), serde_json::to_string_pretty(&table)?)?;
    write_jsonl(&dir.join("records.jsonl"), records)?;
    print!("{md}");
    Ok(())
}

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Solve {
            domain,
            problem,
            optimal,
        } => {
            let (d, p) = load_problem(&domain, &problem)?;
            let start = Instant::now();
            if optimal {
                let (plan, stats) = solve_optimal(&d, &p)?;
                print_plan(&plan);
                eprintln!(
                    "cost={} expanded={} generated={} time={:.3}s",
                    plan.len(),
                    stats.expanded,
                    stats.generated,
                    start.elapsed().as_secs_f64()
                );
            } else {
                let plan = solve_satisficing(&d, &p, Budget::default())?;
                print_plan(&plan);
                eprintln!("cost={} time={:.3}s", plan.len(), start.elapsed().as_secs_f64());
            }
        }
        Command::Validate { domain, problem, plan } => {
            let (d, p) = load_problem(&domain, &problem)?;
            let plan = parse_plan(&read(&plan)?, &d, &p.objects)?;
            let r = validate(&p, &plan);
            println!("{}", serde_json::to_string_pretty(&r)?);
            if !r.valid {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Gen {
            blocks,
            count,
            seed,
            goal,
            out,
            no_solve,
            histogram,
        } => gen(blocks, count, seed, goal.map(Into::into), &out, !no_solve, histogram.as_deref())?,
        Command::Curriculum {
            task,
            count,
            seed,
            shots,
            disguise,
            blocks,
            goal,
            out,
        } => {
            let tasks: Vec<TaskKind> = if task == "all" {
                TaskKind::ALL.to_vec()
            } else {
                vec![task.parse().map_err(anyhow::Error::msg)?]
            };
            let config = CurriculumConfig {
                shots,
                disguise,
                ..Default::default()
            };
            let mut instances: Vec<TestInstance> = Vec::new();
            for t in tasks {
                for spec in specs(blocks, goal.map(Into::into), count, seed) {
                    instances.push(make_instance(t, &spec, &config).with_context(|| format!("{t} seed {}", spec.seed))?);
                }
            }
            write_jsonl(&out, &instances)?;
            eprintln!("wrote {} instances to {}", instances.len(), out.display());
        }
        Command::Eval {
            instances,
            model_config,
            cache,
            report: out,
        } => {
            let instances: Vec<TestInstance> = read_jsonl(&instances)?;
            let config = LLMConfig::load(&model_config)?;
            let cache = cache.map(Cache::open).transpose()?;
            let llm = Llm::http(config, cache)?;
            let result = run_suite(&instances, &llm);
            write_report(&out, &result.records)?;
        }
        Command::Score {
            instances,
            records,
            report: out,
        } => {
            let instances: Vec<TestInstance> = read_jsonl(&instances)?;
            let by_id: std::collections::HashMap<&str, &TestInstance> =
                instances.iter().map(|t| (t.id.as_str(), t)).collect();
            let stored: Vec<EvalRecord> = read_jsonl(&records)?;
            let mut rescored = Vec::with_capacity(stored.len());
            for r in stored {
                let Some(inst) = by_id.get(r.instance_id.as_str()) else {
                    bail!("record for unknown instance {}", r.instance_id)
                };
                rescored.push(match r.completion {
                    Some(text) => EvalRecord::scored(inst, text, r.latency),
                    None => EvalRecord::errored(inst, r.diagnostics, r.latency),
                });
            }
            write_report(&out, &rescored)?;
        }
        Command::Repair {
            domain,
            problem,
            seed_plan,
            seed,
            max_steps,
        } => {
            let (d, p) = load_problem(&domain, &problem)?;
            let seed_plan = parse_plan(&read(&seed_plan)?, &d, &p.objects)?;
            let mut config = RepairConfig {
                rng_seed: seed,
                ..Default::default()
            };
            if let Some(m) = max_steps {
                config.max_steps = m;
            }
            let r = repair(&d, &p, &seed_plan, &config)?;
            print_plan(&r.plan);
            println!(
                "edit_distance={} iterations={} fallback={} time={:.3}s",
                r.edit_distance, r.iterations, r.fell_back_to_planner, r.wall_time
            );
        }
        Command::Export { manifest, out } => {
            let base = manifest.parent().unwrap_or(Path::new("."));
            let entries: Vec<ManifestEntry> = read_jsonl(&manifest)?;
            let Some(first) = entries.first() else { bail!("empty manifest") };
            let domain = parse_domain(&read(&base.join(&first.domain))?)?;
            let mut problems = Vec::new();
            let mut plans = Vec::new();
            for e in &entries {
                let p = parse_problem(&read(&base.join(&e.problem))?, &domain)?;
                plans.push(solve_optimal(&domain, &p)?.0);
                problems.push(p);
            }
            let n = export_finetune_dataset(&domain, &problems, &plans, BufWriter::new(File::create(&out)?))?;
            eprintln!("wrote {n} records to {}", out.display());
        }
        Command::Serve {
            pool,
            suggestions,
            port,
            host,
            log,
            seed,
            policy,
            reuse,
            static_dir,
        } => {
            let pool: Vec<TestInstance> = read_jsonl(&pool)?;
            let suggestions: Vec<EvalRecord> = match suggestions {
                Some(p) => read_jsonl(&p)?,
                None => Vec::new(),
            };
            let config = StudyConfig {
                seed,
                policy: match policy {
                    Policy::Alternating => ConditionPolicy::Alternating,
                    Policy::Assisted => ConditionPolicy::AllAssisted,
                    Policy::Unassisted => ConditionPolicy::AllUnassisted,
                },
                reuse,
            };
            let log_path = log.join("events.jsonl");
            let study = Arc::new(Study::new(config, pool, suggestions, EventLog::file(&log_path)?)?);
            let app = match &static_dir {
                Some(dir) => planbench_harness::router_with_static(study, dir),
                None => planbench_harness::router(study),
            };
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on http://{} (log {})", listener.local_addr()?, log_path.display());
                axum::serve(listener, app).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Replay { pool, log } => {
            let pool: Vec<TestInstance> = read_jsonl(&pool)?;
            let events = planbench_harness::read_events(&log)?;
            let r = planbench_harness::replay(&pool, &events)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            if !r.mismatches.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
