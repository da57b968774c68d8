use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ipoi_cli::{cmd_chat, cmd_replay_corpus, cmd_seed, cmd_walk, ChatOptions, CliError, Client, WalkOptions, WalkScript};

#[derive(Parser)]
#[command(name = "ipoi", version, about = "Guest client and service launcher")]
struct Cli {
    /// Base URL of the service.
    #[arg(long, global = true, env = "IPOI_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    /// Bearer token for authoring requests.
    #[arg(long, global = true, env = "IPOI_TOKEN")]
    token: Option<String>,
    /// Seed for chat sessions (responses and suggestions replay identically).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Profile id to act as.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service in the foreground.
    Serve {
        /// TOML config file; IPOI_* environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<SocketAddr>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Create restaurants, dishes, fences and profiles from a seed file.
    Seed { path: PathBuf },
    /// Replay a GPS walk script and print the notifications it triggers.
    Walk {
        path: PathBuf,
        /// Mute notifications for the duration of the walk.
        #[arg(long)]
        mute: bool,
    },
    /// Chat with a dish interactively.
    Chat { dish_id: String },
    /// Import a labeled corpus and print the KPI report over it.
    ReplayCorpus { path: PathBuf },
}

fn serve(config: Option<PathBuf>, listen: Option<SocketAddr>, data_dir: Option<PathBuf>) -> Result<(), String> {
    let mut config = ipoi_gateway::Config::load(config.as_deref()).map_err(|e| e.to_string())?;
    if let Some(l) = listen {
        config.listen = l;
    }
    if let Some(d) = data_dir {
        config.data_dir = d;
    }
    ipoi_gateway::run_blocking(config, |addr| {
        println!("listening on http://{addr}");
        let _ = io::stdout().flush();
    })
    .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let client = Client::new(&cli.server, cli.token.clone())?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Serve { .. } => unreachable!("handled before"),
        Command::Seed { path } => cmd_seed(&client, &path, &mut out).map(drop),
        Command::Walk { path, mute } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let script: WalkScript =
                serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            let opts = WalkOptions {
                profile: cli.profile.as_deref(),
                mute,
                seed: cli.seed,
            };
            cmd_walk(&client, &script, opts, &mut out).map(drop)
        }
        Command::Chat { dish_id } => {
            let opts = ChatOptions {
                profile: cli.profile.as_deref(),
                seed: cli.seed,
            };
            cmd_chat(&client, &dish_id, opts, &mut io::stdin().lock(), &mut out).map(drop)
        }
        Command::ReplayCorpus { path } => cmd_replay_corpus(&client, &path, &mut out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Serve {
        config,
        listen,
        data_dir,
    } = cli.command
    {
        tracing_subscriber::fmt()
            .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
            .with_writer(io::stderr)
            .init();
        return match serve(config, listen, data_dir) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
