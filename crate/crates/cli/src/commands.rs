use std::fs;
use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rigmotion_api::DEFAULT_PORT;
use rigmotion_core::animstring::{compress, estimate_tokens, parse_animstring, quantize_clip, to_clip};
use rigmotion_core::clip::serialize_clip_json;
use rigmotion_core::control::{self, parse_controller, ControlGenError, KeyInput};
use rigmotion_core::kinematics::{frames_to_csv, KinematicsError};
use rigmotion_core::llm_bridge::{generate_animation, BridgeError, HttpTransport, ReplayTransport, Transport, TransportError};
use rigmotion_core::promptkit::{build_metaprompt, Demonstration, MetapromptSpec, TemplateSet};
use rigmotion_core::{parse_object_json, sample_series, serialize_animstring, validate_against, Clip, QuantizeSpec, Skeleton};
use rigmotion_service::{AppState, Store};

use crate::args::{Cli, Command, ControlCommand, Io, LlmArgs, PromptArgs, PromptCommand};
use crate::config::{FileConfig, DEFAULT_STORE};
use crate::CliError;

pub struct Context {
    pub file: FileConfig,
    pub templates: Option<PathBuf>,
}

impl Context {
    pub fn templates(&self) -> Result<TemplateSet, CliError> {
        match self.templates.as_ref().or(self.file.templates.as_ref()) {
            Some(dir) => TemplateSet::load_dir(dir).map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(TemplateSet::builtin()),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context { file: FileConfig::load(cli.config.as_deref())?, templates: cli.templates };
    match cli.command {
        Command::Validate { io, skeleton } => validate(&io, &skeleton),
        Command::Fmt { io, precision } => {
            let q = ctx.file.quantize(&precision, QuantizeSpec::ARCHIVAL);
            let (text, label) = read_input(&io)?;
            let doc = parse_animstring(&text).map_err(|e| CliError::Invalid(format!("{label}: {e}")))?;
            write_output(io.out.as_deref(), &doc.render(&q))
        }
        Command::Compress { io, tolerance, precision } => {
            if !(tolerance.is_finite() && tolerance >= 0.0) {
                return Err(CliError::Usage(format!("tolerance must be ≥ 0, got {tolerance}")));
            }
            let q = ctx.file.quantize(&precision, QuantizeSpec::LLM_EXCHANGE);
            let (text, label) = read_input(&io)?;
            let clip = read_clip(&text, &label)?;
            let reduced = compress(&clip, tolerance);
            let quantized = quantize_clip(&reduced, &q).map_err(|e| CliError::Invalid(format!("{label}: {e}")))?;
            let before = serialize_animstring(&clip, &q);
            let after = serialize_animstring(&quantized, &q);
            eprintln!("keys: {} -> {}", clip.key_count(), quantized.key_count());
            if quantized.key_count() < reduced.key_count() {
                eprintln!(
                    "note: {} key(s) merged because their time stamps coincide after quantizing",
                    reduced.key_count() - quantized.key_count()
                );
            }
            eprintln!("tokens: {} -> {}", estimate_tokens(&before), estimate_tokens(&after));
            write_output(io.out.as_deref(), &after)
        }
        Command::Sample { io, skeleton, fps, edge } => {
            let (text, label) = read_input(&io)?;
            let clip = read_clip(&text, &label)?;
            let skeleton = read_skeleton(&skeleton)?;
            let frames = sample_series(&clip, &skeleton, fps, edge).map_err(kinematics_error)?;
            write_output(io.out.as_deref(), &frames_to_csv(&frames))
        }
        Command::Prompt { command: PromptCommand::Build(p) } => {
            let (spec, _) = metaprompt_spec(&p)?;
            let prompt = build_metaprompt(&spec, &ctx.templates()?).map_err(|e| CliError::Invalid(e.to_string()))?;
            write_output(p.out.as_deref(), &prompt)
        }
        Command::Generate { prompt, llm } => generate(&ctx, &prompt, &llm),
        Command::Control { command } => match command {
            ControlCommand::Simulate { io, inputs, horizon, seed } => {
                let (text, label) = read_input(&io)?;
                let program = parse_controller(&text).map_err(|e| CliError::Invalid(format!("{label}: {e}")))?;
                let inputs = read_inputs(inputs.as_deref())?;
                if !(horizon.is_finite() && horizon >= 0.0) {
                    return Err(CliError::Usage(format!("horizon must be ≥ 0, got {horizon}")));
                }
                write_output(io.out.as_deref(), &control::simulate(&program, &inputs, horizon, seed).to_json())
            }
            ControlCommand::Generate { request, clips, out, llm } => {
                let (cfg, transport) = transport(&ctx, &llm)?;
                let result = control::generate_controller(&request, &clips, &cfg, transport.as_ref(), &ctx.templates()?)
                    .map_err(|e| match e {
                        ControlGenError::EmptyClipList => CliError::Usage(e.to_string()),
                        ControlGenError::Transport(TransportError::Config(m)) => CliError::Usage(m),
                        other => CliError::Generation(other.to_string()),
                    })?;
                report_attempts(result.attempts, &result.repair_notes);
                write_output(out.as_deref(), &result.program.to_dsl())
            }
        },
        Command::Serve { port, host, store, llm } => serve(&ctx, port, &host, store, &llm),
        Command::Remote { url, command } => crate::remote::run(&url, command),
    }
}

pub fn read_input(io: &Io) -> Result<(String, String), CliError> {
    match io.input.as_ref().or(io.in_file.as_ref()) {
        Some(p) if p.as_os_str() != "-" => {
            Ok((fs::read_to_string(p).map_err(|e| CliError::io(p, e))?, p.display().to_string()))
        }
        _ => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
            Ok((text, "<stdin>".into()))
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn read_clip(text: &str, label: &str) -> Result<Clip, CliError> {
    let doc = parse_animstring(text).map_err(|e| CliError::Invalid(format!("{label}: {e}")))?;
    to_clip(&doc).map_err(|e| CliError::Invalid(format!("{label}: {e}")))
}

fn read_skeleton(path: &Path) -> Result<Skeleton, CliError> {
    parse_object_json(&read_file(path)?).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn read_demos(specs: &[String]) -> Result<Vec<Demonstration>, CliError> {
    specs
        .iter()
        .map(|s| {
            let (name, path) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--demo expects NAME=FILE, got {s:?}")))?;
            Ok(Demonstration::new(name, read_file(Path::new(path))?))
        })
        .collect()
}

pub fn read_inputs(path: Option<&Path>) -> Result<Vec<KeyInput>, CliError> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| CliError::Invalid(format!("{}: expected [{{\"time\": t, \"key\": name}}]: {e}", p.display()))),
    }
}

fn kinematics_error(e: KinematicsError) -> CliError {
    match e {
        KinematicsError::InvalidClip(errors) => CliError::Invalid(format!("clip does not fit the skeleton: {}", errors.join("; "))),
        other => CliError::Usage(other.to_string()),
    }
}

fn validate(io: &Io, skeleton: &Path) -> Result<(), CliError> {
    let skeleton = read_skeleton(skeleton)?;
    let (text, label) = read_input(io)?;
    let clip = read_clip(&text, &label)?;
    let report = validate_against(&clip, &skeleton);
    write_output(io.out.as_deref(), &report.render())?;
    match report.error_count() {
        0 => Ok(()),
        n => Err(CliError::Invalid(format!("{label}: {n} error(s)"))),
    }
}

fn metaprompt_spec(p: &PromptArgs) -> Result<(MetapromptSpec, Skeleton), CliError> {
    let skeleton = read_skeleton(&p.object)?;
    let spec = MetapromptSpec::for_skeleton(p.mode, &skeleton, read_demos(&p.demos)?, p.request.clone());
    Ok((spec, skeleton))
}

fn transport(ctx: &Context, llm: &LlmArgs) -> Result<(rigmotion_core::llm_bridge::LlmConfig, Arc<dyn Transport>), CliError> {
    let cfg = ctx.file.llm_config(llm)?;
    let transport: Arc<dyn Transport> = match &llm.mock_dir {
        Some(dir) => Arc::new(ReplayTransport::from_dir(dir).map_err(|e| CliError::io(dir, e))?),
        None => Arc::new(HttpTransport::new(&cfg)),
    };
    Ok((cfg, transport))
}

fn report_attempts(attempts: u32, notes: &[String]) {
    eprintln!("attempts: {attempts}");
    for n in notes {
        eprintln!("repaired {n}");
    }
}

fn generate(ctx: &Context, p: &PromptArgs, llm: &LlmArgs) -> Result<(), CliError> {
    let (spec, skeleton) = metaprompt_spec(p)?;
    let (cfg, transport) = transport(ctx, llm)?;
    let result = generate_animation(&spec, &skeleton, &cfg, transport.as_ref(), &ctx.templates()?).map_err(|e| match e {
        BridgeError::Prompt(e) => CliError::Invalid(e.to_string()),
        BridgeError::Transport(TransportError::Config(m)) => CliError::Usage(m),
        BridgeError::NoValidAnimation { ref repair_notes, .. } => {
            for n in repair_notes {
                eprintln!("repaired {n}");
            }
            CliError::Generation(e.to_string())
        }
        other => CliError::Generation(other.to_string()),
    })?;
    report_attempts(result.attempts, &result.repair_notes);
    write_output(p.out.as_deref(), &(serialize_clip_json(&result.clip) + "\n"))
}

fn serve(ctx: &Context, port: Option<u16>, host: &str, store: Option<PathBuf>, llm: &LlmArgs) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let port = port.or(ctx.file.port).unwrap_or(DEFAULT_PORT);
    let store_dir = store.or_else(|| ctx.file.store.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE));
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address {host}:{port}: {e}")))?;
    let (cfg, transport) = transport(ctx, llm)?;
    let store = Store::open(&store_dir).map_err(|e| CliError::io(&store_dir, e))?;
    let state = Arc::new(AppState::new(store, transport, cfg, ctx.templates()?));

    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::Io(format!("bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        write_output(None, &format!("listening on http://{local}\n"))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        rigmotion_service::serve(listener, state, shutdown).await.map_err(|e| CliError::Io(e.to_string()))
    })
}
