//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cedgen",
    version,
    about = "Generate, label and evaluate complex-event datasets over 5-second activity windows",
    after_help = "Exit status: 0 on success, 1 on invalid input or usage, 2 on I/O or transport failure.\n\
                  Environment: CEDGEN_LLM_API_KEY (API key), CEDGEN_LLM_ENDPOINT (chat-completion URL)."
)]
pub struct Cli {
    /// Print progress and timing to standard error (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample traces from the activity chains and label them with the rules
    Gen(GenArgs),
    /// Label traces read from a text file, one trace per line
    Label(LabelArgs),
    /// Label a live stream: one activity per input line, one label line per window
    Stream(StreamArgs),
    /// Score predictions against a reference dataset
    Eval(EvalArgs),
    /// Compile a rule file and optionally export each machine as Graphviz DOT
    Compile(CompileArgs),
    /// Run or replay the LLM labeling baseline
    Llm(LlmArgs),
    /// List the loaded rules with their machine sizes and the rule-set digest
    Rules(RulesArgs),
}

#[derive(Debug, Args)]
pub struct RuleSource {
    /// Rule file in the pattern DSL [default: built-in rules]
    #[arg(long, value_name = "FILE")]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PriorityArg {
    /// Single-label projection order, highest first, e.g. 6,1,2,... [default: 1,2,...,10]
    #[arg(long, value_name = "IDS", value_delimiter = ',')]
    pub priority: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Dataset preset: train, val, test, ood15 or ood30
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,

    /// Generation config in TOML; explicit flags override its fields
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Regenerate the dataset described by an existing manifest
    #[arg(long, value_name = "FILE", conflicts_with_all = ["preset", "config", "model"])]
    pub from_manifest: Option<PathBuf>,

    /// Number of traces
    #[arg(long, value_name = "N")]
    pub num: Option<usize>,

    /// Windows per trace
    #[arg(long, value_name = "T")]
    pub len: Option<usize>,

    /// Run seed; every record derives its own seed from it
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Dwell stretch factor for out-of-distribution lengths
    #[arg(long, value_name = "K")]
    pub stretch: Option<u32>,

    /// Share of records drawn from the neutral background chain, in [0, 1]
    #[arg(long, value_name = "FRACTION")]
    pub background: Option<f64>,

    /// Record id prefix [default: preset name, else "custom"]
    #[arg(long, value_name = "PREFIX")]
    pub id_prefix: Option<String>,

    /// Split name written to the manifest [default: preset name, else "custom"]
    #[arg(long, value_name = "NAME")]
    pub split: Option<String>,

    /// Base transition model in the text format written by --dump-model
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,

    /// Write the effective base transition model to FILE and continue
    #[arg(long, value_name = "FILE")]
    pub dump_model: Option<PathBuf>,

    #[command(flatten)]
    pub rules: RuleSource,

    #[command(flatten)]
    pub priority: PriorityArg,

    /// Output dataset (.ced.jsonl); the manifest is written next to it
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Trace file: one trace per line as `[id:] token token ...`; `#` starts a comment
    #[arg(value_name = "INPUT")]
    pub input: PathBuf,

    /// Output dataset (.ced.jsonl) with manifest [default: records to standard output]
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub rules: RuleSource,

    #[command(flatten)]
    pub priority: PriorityArg,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[command(flatten)]
    pub rules: RuleSource,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions: one `{"id": ..., "predicted": [...]}` object per line
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,

    /// Reference dataset (.ced.jsonl)
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: PathBuf,

    /// Classes to report, comma separated [default: e1..e10]
    #[arg(long, value_name = "IDS", value_delimiter = ',')]
    pub classes: Option<Vec<String>>,

    /// Compare against the single-label projection instead of label sets
    #[arg(long)]
    pub single: bool,

    /// Print the report as JSON instead of key=value lines
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Rule file in the pattern DSL
    #[arg(value_name = "FILE")]
    pub file: PathBuf,

    /// Write one eN.dot file per rule into DIR (created if missing)
    #[arg(long, value_name = "DIR")]
    pub dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    /// Reference dataset (.ced.jsonl) whose traces are sent as queries
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: PathBuf,

    /// Transcript archive (JSONL); appended to online, read with --offline
    #[arg(long, value_name = "FILE")]
    pub archive: PathBuf,

    /// Model name sent to the endpoint and recorded in transcripts
    #[arg(long, value_name = "NAME", default_value = "gpt-4o")]
    pub model: String,

    /// Number of few-shot examples (0 for zero-shot)
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub k: usize,

    /// Score an existing archive without contacting the endpoint
    #[arg(long)]
    pub offline: bool,

    /// Chat-completion URL [default: $CEDGEN_LLM_ENDPOINT, else the OpenAI URL]
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,

    /// Classes described in the prompt and scored, comma separated [default: 1,2,3]
    #[arg(
        long,
        value_name = "IDS",
        value_delimiter = ',',
        conflicts_with = "all_classes"
    )]
    pub classes: Option<Vec<String>>,

    /// Describe and score all ten classes
    #[arg(long)]
    pub all_classes: bool,

    /// Maximum requests in flight
    #[arg(long, value_name = "N", default_value_t = 4)]
    pub concurrency: usize,

    /// Per-request timeout in seconds
    #[arg(long, value_name = "SECS", default_value_t = 120)]
    pub timeout: u64,

    /// Retries per request after a retryable failure
    #[arg(long, value_name = "N", default_value_t = 4)]
    pub retries: u32,

    /// Only use the first N reference records
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,

    /// Also write the JSON report to FILE
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,

    /// Print the report as JSON instead of key=value lines
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RulesArgs {
    #[command(flatten)]
    pub rules: RuleSource,

    /// Also print each rule's DSL source
    #[arg(long)]
    pub source: bool,
}
