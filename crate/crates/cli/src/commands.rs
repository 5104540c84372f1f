//! Subcommand implementations. Data goes to files or standard output,
//! diagnostics to standard error.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use ced_core::dataset::{read_records, write_records, DatasetRecord, Manifest};
use ced_core::fsm::to_dot;
use ced_core::labeler::{LabelSession, Priority};
use ced_core::metrics::{MetricsReport, PredictionRecord, Reference};
use ced_core::rules::{builtin_rules, RuleSet};
use ced_core::simulator::{
    default_transition_model, generate_dataset, GenerationConfig, Preset, TransitionModel,
};
use ced_core::{parse_ae_token, AeTrace, ComplexEvent};
use ced_llm::client::{LlmRunConfig, RetryPolicy};
use ced_llm::{few_shot_examples, replay, run_eval, EvalOptions, HttpChatClient, DEFAULT_CLASSES};

use crate::args::{
    CompileArgs, EvalArgs, GenArgs, LabelArgs, LlmArgs, PriorityArg, RuleSource, RulesArgs,
    StreamArgs,
};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

fn load_rules(src: &RuleSource) -> Result<RuleSet> {
    match &src.rules {
        None => Ok(builtin_rules()),
        Some(path) => RuleSet::from_source(&read_text(path)?)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display()))),
    }
}

fn parse_classes(ids: &[String]) -> Result<Vec<ComplexEvent>> {
    let mut out: Vec<ComplexEvent> = Vec::new();
    for id in ids {
        let ce: ComplexEvent = id.parse().map_err(CliError::invalid)?;
        if ce.is_default() {
            return Err(CliError::invalid("class list may not contain e0"));
        }
        if !out.contains(&ce) {
            out.push(ce);
        }
    }
    if out.is_empty() {
        return Err(CliError::invalid("class list is empty"));
    }
    Ok(out)
}

fn load_priority(arg: &PriorityArg) -> Result<Priority> {
    match &arg.priority {
        None => Ok(Priority::default()),
        Some(ids) => Priority::new(parse_classes(ids)?).map_err(CliError::invalid),
    }
}

fn note(verbose: u8, msg: impl FnOnce() -> String) {
    if verbose > 0 {
        eprintln!("{}", msg());
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(CliError::io(dir))
        }
        _ => Ok(()),
    }
}

pub fn gen(args: &GenArgs, verbose: u8) -> Result<()> {
    let rules = load_rules(&args.rules)?;
    let mut priority = load_priority(&args.priority)?;
    let (mut cfg, mut model, mut split) = if let Some(path) = &args.from_manifest {
        let manifest: Manifest = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        if manifest.rule_set_digest != rules.digest() {
            return Err(CliError::invalid(format!(
                "{}: rule-set digest differs from the loaded rules",
                path.display()
            )));
        }
        let (Some(cfg), Some(model)) = (manifest.config, manifest.transition_model) else {
            return Err(CliError::invalid(format!(
                "{}: manifest has no generation config",
                path.display()
            )));
        };
        if args.priority.priority.is_none() {
            priority = Priority::new(manifest.priority).map_err(CliError::invalid)?;
        }
        (cfg, model, manifest.split)
    } else if let Some(path) = &args.config {
        if args.preset.is_some() {
            return Err(CliError::invalid(
                "--config and --preset are mutually exclusive",
            ));
        }
        let cfg: GenerationConfig = toml::from_str(&read_text(path)?)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        (cfg, default_transition_model(), "custom".to_string())
    } else if let Some(name) = &args.preset {
        let preset: Preset = name.parse().map_err(CliError::invalid)?;
        (
            preset.config(0),
            default_transition_model(),
            preset.name().to_string(),
        )
    } else {
        let cfg = GenerationConfig {
            id_prefix: "custom".into(),
            ..GenerationConfig::default()
        };
        (cfg, default_transition_model(), "custom".to_string())
    };
    if let Some(path) = &args.model {
        model = TransitionModel::from_text(&read_text(path)?)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    }
    if let Some(v) = args.num {
        cfg.num_traces = v;
    }
    if let Some(v) = args.len {
        cfg.trace_len = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.stretch {
        cfg.dwell_stretch = v;
    }
    if let Some(v) = args.background {
        cfg.background_fraction = v;
    }
    if let Some(v) = &args.id_prefix {
        cfg.id_prefix = v.clone();
    }
    if let Some(v) = &args.split {
        split = v.clone();
    }
    if let Some(path) = &args.dump_model {
        create_parent(path)?;
        fs::write(path, model.to_text()).map_err(CliError::io(path))?;
    }

    let start = Instant::now();
    let records = generate_dataset(&rules, &model, &cfg, &priority).map_err(CliError::invalid)?;
    note(verbose, || {
        format!(
            "generated {} records in {:.2?}",
            records.len(),
            start.elapsed()
        )
    });
    let manifest =
        Manifest::new(split, records.len(), &rules, &priority).with_generation(&model, &cfg);
    create_parent(&args.output)?;
    write_records(&args.output, &records, &manifest)?;
    note(verbose, || {
        format!("wrote {} in {:.2?}", args.output.display(), start.elapsed())
    });
    Ok(())
}

/// Parses `[id:] tokens` lines; blank lines and `#` comments are skipped.
fn parse_trace_file(text: &str) -> Result<Vec<(String, AeTrace)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (id, body) = match line.split_once(':') {
            Some((id, body)) => (id.trim().to_string(), body),
            None => (format!("line-{:06}", n + 1), line),
        };
        if id.is_empty() {
            return Err(CliError::invalid(format!("line {}: empty id", n + 1)));
        }
        let trace =
            AeTrace::parse(body).map_err(|e| CliError::invalid(format!("line {}: {e}", n + 1)))?;
        out.push((id, trace));
    }
    Ok(out)
}

pub fn label(args: &LabelArgs, verbose: u8) -> Result<()> {
    let rules = load_rules(&args.rules)?;
    let priority = load_priority(&args.priority)?;
    let traces = parse_trace_file(&read_text(&args.input)?)?;
    let records: Vec<DatasetRecord> = traces
        .into_iter()
        .map(|(id, trace)| DatasetRecord::label(id, 0, trace.into_inner(), &rules, &priority))
        .collect();
    note(verbose, || format!("labeled {} traces", records.len()));
    match &args.output {
        Some(path) => {
            let split = args
                .input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "labeled".into());
            create_parent(path)?;
            write_records(
                path,
                &records,
                &Manifest::new(split, records.len(), &rules, &priority),
            )?;
        }
        None => {
            for r in &records {
                r.validate()?;
            }
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for r in &records {
                writeln!(out, "{}", r.to_json_line())
                    .map_err(CliError::io(Path::new("<stdout>")))?;
            }
        }
    }
    Ok(())
}

pub fn stream(args: &StreamArgs, verbose: u8) -> Result<()> {
    let rules = load_rules(&args.rules)?;
    let mut session = LabelSession::new(&rules);
    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let stdin_path = Path::new("<stdin>");
    let stdout_path = Path::new("<stdout>");
    for (n, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(CliError::io(stdin_path))?;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let ae =
            parse_ae_token(token).map_err(|e| CliError::invalid(format!("line {}: {e}", n + 1)))?;
        let emitted = session.step(ae);
        let text = if emitted.is_empty() {
            "0".to_string()
        } else {
            emitted
                .iter()
                .map(|c| c.id().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(out, "{text}")
            .and_then(|_| out.flush())
            .map_err(CliError::io(stdout_path))?;
    }
    note(verbose, || {
        format!("processed {} windows", session.window())
    });
    Ok(())
}

pub fn eval(args: &EvalArgs, verbose: u8) -> Result<()> {
    let refs = read_records(&args.reference)?.records;
    let set = ced_core::dataset::read_predictions(&args.pred, &refs)?;
    if !set.unpredicted.is_empty() {
        eprintln!(
            "warning: {} reference records have no prediction and are not scored",
            set.unpredicted.len()
        );
    }
    let mismatched = set.length_mismatches().len();
    if mismatched > 0 {
        note(verbose, || {
            format!("{mismatched} predictions differ in length from their reference")
        });
    }
    let mut records: Vec<PredictionRecord> = set.records;
    if args.single {
        let by_id: std::collections::HashMap<&str, &DatasetRecord> =
            refs.iter().map(|r| (r.id.as_str(), r)).collect();
        for p in &mut records {
            p.reference = Reference::Single(by_id[p.id.as_str()].ce_single.clone());
        }
    }
    let classes = match &args.classes {
        Some(ids) => parse_classes(ids)?,
        None => ComplexEvent::positive().collect(),
    };
    let report = MetricsReport::compute(&records, &classes).map_err(CliError::invalid)?;
    let text = if args.json {
        report.to_json()
    } else {
        report.to_text()
    };
    print!("{text}");
    Ok(())
}

pub fn compile(args: &CompileArgs, verbose: u8) -> Result<()> {
    let rules = RuleSet::from_source(&read_text(&args.file)?)
        .map_err(|e| CliError::invalid(format!("{}: {e}", args.file.display())))?;
    if let Some(dir) = &args.dot {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        for (ce, rule) in rules.iter() {
            let path = dir.join(format!("{ce}.dot"));
            fs::write(&path, to_dot(&rule.machine)).map_err(CliError::io(&path))?;
            note(verbose, || format!("wrote {}", path.display()));
        }
    }
    print_rules(&rules, false);
    Ok(())
}

fn print_rules(rules: &RuleSet, with_source: bool) {
    for (ce, rule) in rules.iter() {
        let m = &rule.machine;
        let transitions: usize = (0..m.states().len()).map(|s| m.transitions(s).len()).sum();
        println!(
            "{ce}\tstates={}\ttransitions={transitions}\tclocks={}\tcounters={}\t{}",
            m.states().len(),
            m.clocks().len(),
            m.counters().len(),
            rule.title
        );
        if with_source {
            for line in rule.source.lines() {
                println!("    {line}");
            }
        }
    }
    println!("digest={}", rules.digest());
}

pub fn rules(args: &RulesArgs) -> Result<()> {
    print_rules(&load_rules(&args.rules)?, args.source);
    Ok(())
}

pub fn llm(args: &LlmArgs, verbose: u8) -> Result<()> {
    let mut refs = read_records(&args.reference)?.records;
    if let Some(n) = args.limit {
        refs.truncate(n);
    }
    if refs.is_empty() {
        return Err(CliError::invalid("reference dataset has no records"));
    }
    let classes = if args.all_classes {
        ComplexEvent::positive().collect()
    } else {
        match &args.classes {
            Some(ids) => parse_classes(ids)?,
            None => DEFAULT_CLASSES.to_vec(),
        }
    };
    let few_shot = few_shot_examples(
        &builtin_rules(),
        &default_transition_model(),
        &classes,
        args.k,
        refs[0].len(),
    );
    if few_shot.len() != args.k {
        return Err(CliError::invalid(format!(
            "could only build {} of {} few-shot examples",
            few_shot.len(),
            args.k
        )));
    }
    let opts = EvalOptions {
        model: args.model.clone(),
        classes,
        few_shot,
        concurrency: args.concurrency,
    };
    let report = if args.offline {
        replay(&args.archive, &refs, &opts)?
    } else {
        if args.concurrency == 0 {
            return Err(CliError::invalid("--concurrency must be at least 1"));
        }
        let mut cfg = LlmRunConfig::from_env(args.model.clone());
        if let Some(url) = &args.endpoint {
            cfg.endpoint = url.clone();
        }
        cfg.timeout = Duration::from_secs(args.timeout);
        cfg.retry = RetryPolicy {
            max_retries: args.retries,
            ..RetryPolicy::default()
        };
        cfg.concurrency = args.concurrency;
        if cfg.api_key.is_none() {
            eprintln!(
                "warning: {} is not set; sending requests without credentials",
                ced_llm::client::API_KEY_ENV
            );
        }
        create_parent(&args.archive)?;
        let client = HttpChatClient::new(&cfg);
        let start = Instant::now();
        let report = run_eval(&client, &refs, &opts, &args.archive)?;
        note(verbose, || {
            format!("{} requests in {:.2?}", refs.len(), start.elapsed())
        });
        report
    };
    if report.transport_failures > 0 {
        eprintln!(
            "warning: {} records excluded after transport errors",
            report.transport_failures
        );
    }
    if let Some(path) = &args.report {
        create_parent(path)?;
        fs::write(path, report.to_json()).map_err(CliError::io(path))?;
    }
    print!(
        "{}",
        if args.json {
            report.to_json()
        } else {
            report.to_text()
        }
    );
    Ok(())
}
