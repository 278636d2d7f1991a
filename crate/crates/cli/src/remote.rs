use rigmotion_api::{FramesQuery, GenerateRequest, SimulateRequest};
use rigmotion_client::{Client, ClientError};

use crate::args::RemoteCommand;
use crate::commands::{read_demos, read_input, read_inputs, write_output};
use crate::CliError;

fn client_error(e: ClientError) -> CliError {
    match e.status() {
        Some(s) if s.as_u16() == 502 => CliError::Generation(e.to_string()),
        Some(s) if s.is_client_error() => CliError::Invalid(e.to_string()),
        _ => CliError::Io(e.to_string()),
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

pub fn run(url: &str, command: RemoteCommand) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let client = Client::new(url);
    runtime.block_on(async move {
        let out = match command {
            RemoteCommand::Skeleton { io } => {
                let (text, _) = read_input(&io)?;
                client.post_skeleton(&text).await.map_err(client_error)?.skeleton_id + "\n"
            }
            RemoteCommand::Session { skeleton, id } => {
                client.create_session(&skeleton, id.as_deref()).await.map_err(client_error)?.session_id + "\n"
            }
            RemoteCommand::Generate { session, request, mode, demos } => {
                let demonstrations = if demos.is_empty() { None } else { Some(read_demos(&demos)?) };
                let req = GenerateRequest { request, mode, demonstrations };
                pretty(&client.generate(&session, &req).await.map_err(client_error)?)
            }
            RemoteCommand::Clip { id } => client.get_clip_raw(&id).await.map_err(client_error)? + "\n",
            RemoteCommand::Frames { id, skeleton, fps, edge } => {
                let q = FramesQuery { skeleton, fps: Some(fps), edge: Some(edge) };
                pretty(&client.frames(&id, &q).await.map_err(client_error)?)
            }
            RemoteCommand::Simulate { io, inputs, horizon, seed } => {
                let (text, _) = read_input(&io)?;
                let id = client.post_controller(&text).await.map_err(client_error)?.controller_id;
                let req = SimulateRequest { inputs: read_inputs(inputs.as_deref())?, horizon, seed };
                client.simulate_raw(&id, &req).await.map_err(client_error)?
            }
        };
        write_output(None, &out)
    })
}
