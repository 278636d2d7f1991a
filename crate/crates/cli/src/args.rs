use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rigmotion_core::promptkit::PromptMode;
use rigmotion_core::EdgeMode;

#[derive(Debug, Parser)]
#[command(name = "rigmotion", version, about = "Text-driven skeletal animation toolkit")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "RIGMOTION_CONFIG")]
    pub config: Option<PathBuf>,

    /// Directory of prompt templates overriding the built-in ones.
    #[arg(long, global = true, env = "RIGMOTION_TEMPLATES")]
    pub templates: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Io {
    /// Input file; stdin when absent or "-".
    #[arg(value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// Input file (same as the positional argument).
    #[arg(long = "in", value_name = "FILE", conflicts_with = "input")]
    pub in_file: Option<PathBuf>,

    /// Output file; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Precision {
    /// Round numbers to N significant figures.
    #[arg(long, value_name = "N", conflicts_with = "decimals")]
    pub sig_figs: Option<u32>,

    /// Round numbers to N decimal places.
    #[arg(long, value_name = "N")]
    pub decimals: Option<u32>,

    /// Truncate instead of rounding half away from zero.
    #[arg(long)]
    pub truncate: bool,
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    /// Chat-completions endpoint URL.
    #[arg(long, env = "RIGMOTION_ENDPOINT")]
    pub endpoint: Option<String>,

    #[arg(long, env = "RIGMOTION_MODEL")]
    pub model: Option<String>,

    #[arg(long, env = "RIGMOTION_TEMPERATURE")]
    pub temperature: Option<f64>,

    /// Repair turns after the first reply.
    #[arg(long, env = "RIGMOTION_MAX_RETRIES")]
    pub max_retries: Option<u32>,

    /// Request timeout in seconds.
    #[arg(long, env = "RIGMOTION_TIMEOUT")]
    pub timeout: Option<f64>,

    /// Answer from numbered reply files in DIR instead of calling a model.
    #[arg(long, value_name = "DIR")]
    pub mock_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long, default_value = "few_shot")]
    pub mode: PromptMode,

    /// Object JSON of the skeleton to animate.
    #[arg(long, value_name = "FILE")]
    pub object: PathBuf,

    /// Demonstration as NAME=FILE; repeatable.
    #[arg(long = "demo", value_name = "NAME=FILE")]
    pub demos: Vec<String>,

    /// What the animation should show.
    #[arg(long)]
    pub request: String,

    /// Output file; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an animation string against a skeleton.
    Validate {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_name = "FILE")]
        skeleton: PathBuf,
    },
    /// Rewrite an animation string canonically.
    Fmt {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        precision: Precision,
    },
    /// Drop keys that interpolation reproduces within a tolerance, then quantize.
    Compress {
        #[command(flatten)]
        io: Io,
        /// Maximum deviation: radians for rotations, units for translations.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        #[command(flatten)]
        precision: Precision,
    },
    /// World-space joint poses as CSV.
    Sample {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_name = "FILE")]
        skeleton: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value = "clamp")]
        edge: EdgeMode,
    },
    /// Prompt assembly.
    Prompt {
        #[command(subcommand)]
        command: PromptCommand,
    },
    /// Ask a language model for an animation and print the validated clip JSON.
    Generate {
        #[command(flatten)]
        prompt: PromptArgs,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Controller programs.
    Control {
        #[command(subcommand)]
        command: ControlCommand,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "RIGMOTION_PORT")]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "RIGMOTION_STORE", value_name = "DIR")]
        store: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Talk to a running service.
    Remote {
        #[arg(long, env = "RIGMOTION_URL", default_value = "http://127.0.0.1:7878")]
        url: String,
        #[command(subcommand)]
        command: RemoteCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum PromptCommand {
    /// Print the metaprompt for a request.
    Build(PromptArgs),
}

#[derive(Debug, Subcommand)]
pub enum ControlCommand {
    /// Simulate a controller program and print the trace JSON.
    Simulate {
        #[command(flatten)]
        io: Io,
        /// JSON array of {"time": seconds, "key": name}.
        #[arg(long, value_name = "FILE")]
        inputs: Option<PathBuf>,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ask a language model for a controller program using the given clips.
    Generate {
        #[arg(long)]
        request: String,
        /// Available clip names; repeatable.
        #[arg(long = "clip", required = true)]
        clips: Vec<String>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum RemoteCommand {
    /// Upload object JSON; prints the skeleton id.
    Skeleton {
        #[command(flatten)]
        io: Io,
    },
    /// Open a session; prints the session id.
    Session {
        #[arg(long)]
        skeleton: String,
        #[arg(long)]
        id: Option<String>,
    },
    /// Generate a clip in a session.
    Generate {
        #[arg(long)]
        session: String,
        #[arg(long)]
        request: String,
        #[arg(long, default_value = "few_shot")]
        mode: PromptMode,
        /// Demonstration as NAME=FILE; repeatable. Without any, the
        /// session's latest clip is used.
        #[arg(long = "demo", value_name = "NAME=FILE")]
        demos: Vec<String>,
    },
    /// Print a stored clip.
    Clip { id: String },
    /// Print world poses of a stored clip.
    Frames {
        id: String,
        #[arg(long)]
        skeleton: String,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value = "clamp")]
        edge: EdgeMode,
    },
    /// Upload a controller program and simulate it.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_name = "FILE")]
        inputs: Option<PathBuf>,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}
