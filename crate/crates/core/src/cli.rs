//! The `guideqa` command line.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::classify::{self, IntentModel, ModelFileError, TrainError, DEFAULT_ALPHA};
use crate::dialogue::{
    self, DialogueError, FeedbackStore, JsonlLog, ResponseKind, DEFAULT_THRESHOLD, FEEDBACK_PROMPT,
};
use crate::eval::{self, EvalError};
use crate::gen::{self, GenError};
use crate::kb::{self, EntityKind, KbError};
use crate::service::{self, ServiceConfig, ServiceError, ServiceState};

#[derive(Debug, Parser)]
#[command(
    name = "guideqa",
    version,
    about = "Answer questions from a tool's User Guide"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a knowledge file
    Ingest { kb: PathBuf },
    /// Project templates onto the knowledge base and write a corpus
    Generate {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hand-labeled examples appended after the generated ones
        #[arg(long)]
        extra: Option<PathBuf>,
    },
    /// Train an intent model on a corpus
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Replay a corpus or a labeled question file through the pipeline
    Eval(EvalArgs),
    /// Run the HTTP service
    Serve(ServeArgs),
    /// Ask questions interactively
    Chat {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, env = "GUIDEQA_DATA_DIR", default_value = "guideqa-data")]
        data_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long, required_unless_present = "labeled", conflicts_with = "labeled")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Also write the JSON report here
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "GUIDEQA_KB")]
    pub kb: PathBuf,
    #[arg(long, env = "GUIDEQA_TEMPLATES")]
    pub templates: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, env = "GUIDEQA_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, env = "GUIDEQA_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, env = "GUIDEQA_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, env = "GUIDEQA_ADMIN_TOKEN", hide_env_values = true)]
    pub admin_token: Option<String>,
    /// Allowed browser origin; repeat for several
    #[arg(
        long = "cors-origin",
        env = "GUIDEQA_CORS_ORIGINS",
        value_delimiter = ','
    )]
    pub cors_origins: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    fn validation(message: impl ToString) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        CliError {
            kind: ErrorKind::Runtime,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Runtime => 2,
        }
    }

    /// Single line: `error: <kind>: <message>`.
    pub fn line(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Validation => "validation",
            ErrorKind::Runtime => "runtime",
        };
        format!("error: {kind}: {}", self.message.replace('\n', " "))
    }
}

impl From<KbError> for CliError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::Io { .. } => CliError::runtime(e),
            _ => CliError::validation(e),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Io { .. } => CliError::runtime(e),
            _ => CliError::validation(e),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::validation(e)
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::Io { .. } => CliError::runtime(e),
            ModelFileError::Format(_) => CliError::validation(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } => CliError::runtime(e),
            _ => CliError::validation(e),
        }
    }
}

impl From<DialogueError> for CliError {
    fn from(e: DialogueError) -> Self {
        match e {
            DialogueError::Gen(g) => g.into(),
            DialogueError::Train(t) => t.into(),
            other => CliError::validation(other),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Kb(k) => k.into(),
            ServiceError::Gen(g) => g.into(),
            ServiceError::Dialogue(d) => d.into(),
            other => CliError::runtime(other),
        }
    }
}

fn check_threshold(t: f64) -> Result<(), CliError> {
    if t.is_nan() || t < 0.0 {
        return Err(CliError::validation(format!(
            "threshold must be >= 0, got {t}"
        )));
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { kb } => ingest(&kb),
        Command::Generate {
            kb,
            templates,
            out,
            extra,
        } => generate(&kb, &templates, &out, extra.as_deref()),
        Command::Train { corpus, out, alpha } => train(&corpus, &out, alpha),
        Command::Eval(args) => evaluate(args),
        Command::Serve(args) => serve(args),
        Command::Chat {
            kb,
            model,
            threshold,
            data_dir,
        } => chat(&kb, &model, threshold, &data_dir),
    }
}

fn ingest(path: &Path) -> Result<(), CliError> {
    let kb = kb::load_guide(path)?;
    let count = |k| kb.entities_of(k).len();
    println!(
        "ok: {} version {}: {} entities ({} terms, {} parameters, {} components, {} relationships), {} sections, {} surfaces",
        path.display(),
        kb.version(),
        kb.entities().len(),
        count(EntityKind::Term),
        count(EntityKind::Parameter),
        count(EntityKind::Component),
        count(EntityKind::Relationship),
        kb.sections().len(),
        kb.surface_index().len(),
    );
    Ok(())
}

fn generate(kb: &Path, templates: &Path, out: &Path, extra: Option<&Path>) -> Result<(), CliError> {
    let kb = kb::load_guide(kb)?;
    let templates = gen::parse_templates(templates)?;
    let mut set = gen::generate_dataset(&templates, &kb)?;
    if let Some(extra) = extra {
        let extras = gen::read_corpus(extra)?;
        dialogue::validate_extras(&kb, &extras)?;
        set = gen::TrainingSet::from_examples(set.examples.into_iter().chain(extras));
    }
    gen::write_corpus(out, &set.examples)?;
    let clean = set.clean_count();
    println!(
        "generated {} examples from {} templates -> {}",
        set.len(),
        templates.len(),
        out.display()
    );
    for (intent, n) in &set.per_intent_counts {
        println!("  {:<22}{n:>6}", intent.as_str());
    }
    println!(
        "lint: {clean}/{} clean ({:.2}%), {} issues",
        set.len(),
        100.0 * clean as f64 / set.len() as f64,
        set.lint_report.len()
    );
    for (question, issue) in &set.lint_report {
        println!("  {issue}: {question}");
    }
    Ok(())
}

fn train(corpus: &Path, out: &Path, alpha: f64) -> Result<(), CliError> {
    let examples = gen::read_corpus(corpus)?;
    let model = classify::train(&examples, alpha)?;
    model.save(out)?;
    let own = examples
        .iter()
        .filter(|e| model.predict(&e.question).top().0 == e.intent)
        .count();
    println!(
        "trained on {} examples, {} tokens -> {}",
        examples.len(),
        model.vocabulary().len(),
        out.display()
    );
    println!(
        "self-replay: {own}/{} classified to their own intent ({:.2}%)",
        examples.len(),
        100.0 * own as f64 / examples.len() as f64
    );
    Ok(())
}

fn evaluate(args: EvalArgs) -> Result<(), CliError> {
    check_threshold(args.threshold)?;
    let kb = kb::load_guide(&args.kb)?;
    let report = match (&args.corpus, &args.labeled) {
        (Some(corpus), _) => {
            let examples = gen::read_corpus(corpus)?;
            let fp = classify::corpus_fingerprint(&examples);
            let model = IntentModel::load(&args.model, Some(&fp))?;
            eval::replay_training(&model, &kb, &examples, args.threshold)
        }
        (None, Some(labeled)) => {
            let model = IntentModel::load(&args.model, None)?;
            eval::replay_labeled(&model, &kb, labeled, args.threshold)?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    print!("{}", report.to_table());
    println!("accuracy: {:.4}", report.accuracy());
    let json = report.to_json();
    println!("{json}");
    if let Some(path) = args.json_out {
        std::fs::write(&path, json)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    check_threshold(args.threshold)?;
    let config = ServiceConfig {
        addr: args.addr,
        data_dir: args.data_dir,
        kb_path: Some(args.kb.clone()),
        templates_path: Some(args.templates.clone()),
        threshold: args.threshold,
        admin_token: args.admin_token,
        cors_origins: args.cors_origins,
        alpha: args.alpha,
    };
    let state = Arc::new(ServiceState::new(config)?);
    match &args.model {
        Some(path) => {
            let kb = kb::load_guide(&args.kb)?;
            let model = IntentModel::load(path, None)?;
            state.install(Arc::new(kb), Arc::new(model));
        }
        None => {
            let summary = state.rebuild()?;
            log::info!("trained at boot on {} examples", summary.examples);
        }
    }
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::runtime)?;
    runtime
        .block_on(service::serve(state))
        .map_err(CliError::runtime)
}

fn chat(kb: &Path, model: &Path, threshold: f64, data_dir: &Path) -> Result<(), CliError> {
    check_threshold(threshold)?;
    let kb = kb::load_guide(kb)?;
    let model = IntentModel::load(model, None)?;
    std::fs::create_dir_all(data_dir).map_err(CliError::runtime)?;
    let store =
        FeedbackStore::open(data_dir.join(service::FEEDBACK_FILE)).map_err(CliError::runtime)?;
    let missed_log =
        JsonlLog::open(data_dir.join(service::MISSED_FILE)).map_err(CliError::runtime)?;

    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut stdout = std::io::stdout();
    println!("Hi! Ask me anything about the tool. Type \"quit\" to leave.");
    loop {
        print!("> ");
        stdout.flush().map_err(CliError::runtime)?;
        let Some(line) = lines.next() else { break };
        let question = line.map_err(CliError::runtime)?;
        let question = question.trim();
        if question.is_empty() {
            continue;
        }
        if question == "quit" || question == "exit" {
            break;
        }
        let exchange = dialogue::respond(&model, &kb, question, threshold)?;
        println!("{}", exchange.response.answer_text);
        if exchange.response.kind == ResponseKind::Idk {
            for s in &exchange.response.suggestions {
                println!("  - {s}");
            }
        }
        store
            .issue(exchange.feedback.clone())
            .map_err(CliError::runtime)?;
        if let Some(missed) = &exchange.missed {
            missed_log.append(missed).map_err(CliError::runtime)?;
        }
        println!("{FEEDBACK_PROMPT} [y/n/skip]");
        stdout.flush().map_err(CliError::runtime)?;
        let Some(vote) = lines.next() else { break };
        let vote = vote.map_err(CliError::runtime)?;
        let helpful = match vote.trim().to_ascii_lowercase().as_str() {
            "y" | "yes" => Some(true),
            "n" | "no" => Some(false),
            _ => None,
        };
        if let Some(helpful) = helpful {
            store
                .record_feedback(&exchange.response.feedback_id, helpful)
                .map_err(CliError::runtime)?;
            println!("Thanks for the feedback!");
        }
    }
    Ok(())
}
