use std::io::Write;
use std::net::IpAddr;
use std::path::PathBuf;

use batchlab_server::Config;
use clap::Args;

use crate::{Context, Outcome};

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// 0 picks a free port; the bound address is printed on stdout.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub bind: Option<IpAddr>,
    /// Append-only session logs, replayed at start.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Built UI assets.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// File, then `BATCHLAB_PORT` / `BATCHLAB_LOG_DIR`, then flags.
pub fn server_config(ctx: &Context, args: &ServeArgs) -> anyhow::Result<Config> {
    let mut config = ctx.config.server.clone().with_env(|k| std::env::var(k).ok())?;
    if let Some(p) = args.port {
        config.port = p;
    }
    if let Some(b) = args.bind {
        config.bind = b;
    }
    if let Some(d) = &args.log_dir {
        config.log_dir = Some(d.clone());
    }
    if let Some(d) = &args.static_dir {
        config.static_dir = Some(d.clone());
    }
    config.treatment_specs()?;
    Ok(config)
}

pub fn run(ctx: &Context, args: &ServeArgs) -> anyhow::Result<Outcome> {
    let config = server_config(ctx, args)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.addr()).await?;
        let mut stdout = std::io::stdout();
        writeln!(stdout, "listening on http://{}", listener.local_addr()?)?;
        stdout.flush()?;
        batchlab_server::serve_on(listener, &config).await?;
        anyhow::Ok(())
    })?;
    Ok(Outcome::Pass)
}
