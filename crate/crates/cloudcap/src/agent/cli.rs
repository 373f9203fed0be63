//! Command-line front end of the agent.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use super::capture::{capture, CaptureSource, CaptureSpec, ProtoFilter};
use super::client::{upload, watch, UploadOptions, WatchOptions, DEFAULT_RETRIES};
use super::{AgentError, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "agent", version, about = "Capture, upload and follow pcap analyses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter an existing pcap or record one with the configured sniffer.
    Capture(CaptureArgs),
    /// Upload a pcap and print its capture id.
    Upload(UploadArgs),
    /// Wait for an analysis to finish and save its report.
    Watch(WatchArgs),
    /// capture, upload and watch in one go.
    Run(RunArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = true)]
pub struct SourceArgs {
    /// Existing pcap file to filter.
    #[arg(long, group = "source", conflicts_with_all = ["iface", "duration"])]
    pub input: Option<PathBuf>,
    /// Interface for the sniffer.
    #[arg(long, group = "source", requires = "duration")]
    pub iface: Option<String>,
    /// Sniffer run time in seconds.
    #[arg(long, requires = "iface")]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CaptureArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Comma-separated subset of tcp,udp,icmp,dns,tls; all packets when absent.
    #[arg(long, default_value = "")]
    pub proto: ProtoFilter,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServerArg {
    /// Base URL of the analysis service.
    #[arg(long, env = "CLOUDCAP_SERVER")]
    pub server: String,
}

#[derive(Debug, Args)]
pub struct RetryArgs {
    #[arg(long, default_value_t = DEFAULT_RETRIES)]
    pub retries: u32,
    /// Seconds before the first retry; doubles after each one.
    #[arg(long, default_value_t = 1.0)]
    pub backoff: f64,
}

#[derive(Debug, Args)]
pub struct UploadArgs {
    #[command(flatten)]
    pub server: ServerArg,
    #[arg(long)]
    pub file: PathBuf,
    #[command(flatten)]
    pub retry: RetryArgs,
}

#[derive(Debug, Args)]
pub struct PollArgs {
    /// Seconds between status checks.
    #[arg(long, default_value_t = 1.0)]
    pub interval: f64,
    /// Give up after this many seconds.
    #[arg(long, default_value_t = 120.0)]
    pub timeout: f64,
}

#[derive(Debug, Args)]
pub struct WatchArgs {
    #[command(flatten)]
    pub server: ServerArg,
    #[arg(long)]
    pub id: String,
    #[command(flatten)]
    pub poll: PollArgs,
    /// Where to save the report; defaults to <id>.report.json.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub capture: CaptureArgs,
    #[command(flatten)]
    pub server: ServerArg,
    #[command(flatten)]
    pub retry: RetryArgs,
    #[command(flatten)]
    pub poll: PollArgs,
}

fn seconds(name: &str, value: f64) -> Result<Duration, AgentError> {
    if value.is_finite() && value > 0.0 {
        Ok(Duration::from_secs_f64(value))
    } else {
        Err(AgentError::Usage(format!("--{name} must be a positive number of seconds, got {value}")))
    }
}

fn non_negative(name: &str, value: f64) -> Result<Duration, AgentError> {
    if value.is_finite() && value >= 0.0 {
        Ok(Duration::from_secs_f64(value))
    } else {
        Err(AgentError::Usage(format!("--{name} must be zero or more seconds, got {value}")))
    }
}

impl CaptureArgs {
    pub fn spec(&self) -> Result<CaptureSpec, AgentError> {
        let source = match (&self.source.input, &self.source.iface, self.source.duration) {
            (Some(input), None, None) => CaptureSource::File(input.clone()),
            (None, Some(iface), Some(d)) => CaptureSource::Sniffer {
                iface: iface.clone(),
                duration: seconds("duration", d)?,
            },
            _ => return Err(AgentError::Usage("give either --input FILE or --iface IF --duration S".into())),
        };
        Ok(CaptureSpec {
            source,
            filter: self.proto.clone(),
            output: self.out.clone(),
        })
    }
}

impl RetryArgs {
    fn options(&self) -> Result<UploadOptions, AgentError> {
        Ok(UploadOptions {
            retries: self.retries,
            backoff: non_negative("backoff", self.backoff)?,
        })
    }
}

impl PollArgs {
    fn options(&self, report_path: PathBuf) -> Result<WatchOptions, AgentError> {
        Ok(WatchOptions {
            interval: seconds("interval", self.interval)?,
            timeout: seconds("timeout", self.timeout)?,
            report_path,
        })
    }
}

/// `capture.pcap` -> `capture.report.json` in the same directory.
pub fn report_path_for(pcap: &Path) -> PathBuf {
    let stem = pcap.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "capture".into());
    pcap.with_file_name(format!("{stem}.report.json"))
}

fn do_capture(args: &CaptureArgs) -> Result<PathBuf, AgentError> {
    let outcome = capture(&args.spec()?)?;
    eprintln!(
        "captured {} of {} packets into {}",
        outcome.packets_out,
        outcome.packets_in,
        outcome.path.display()
    );
    Ok(outcome.path)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, AgentError> {
    match cli.command {
        Command::Capture(args) => {
            let path = do_capture(&args)?;
            println!("{}", path.display());
        }
        Command::Upload(args) => {
            let id = upload(&args.server.server, &args.file, &args.retry.options()?)?;
            println!("{id}");
        }
        Command::Watch(args) => {
            let report = args.report.clone().unwrap_or_else(|| PathBuf::from(format!("{}.report.json", args.id)));
            let outcome = watch(&args.server.server, &args.id, &args.poll.options(report)?)?;
            println!("{}", outcome.summary_line());
        }
        Command::Run(args) => {
            let upload_opts = args.retry.options()?;
            let watch_opts = args.poll.options(report_path_for(&args.capture.out))?;
            let path = do_capture(&args.capture)?;
            let id = upload(&args.server.server, &path, &upload_opts)?;
            println!("{id}");
            let outcome = watch(&args.server.server, &id, &watch_opts)?;
            println!("{}", outcome.summary_line());
            eprintln!("report saved to {}", outcome.report_path.display());
        }
    }
    Ok(EXIT_OK)
}
