use std::io::Write;
use std::time::Duration;

use crowdcell_orchestrator::http;
use crowdcell_orchestrator::{Clock, Orchestrator, OrchestratorConfig};

use super::from_table;
use crate::error::{from_orchestrator, CliError};
use crate::{Context, ServeArgs};

pub fn config(ctx: &Context, args: &ServeArgs) -> Result<OrchestratorConfig, CliError> {
    let mut cfg: OrchestratorConfig = from_table("serve", ctx.section("serve")?)?;
    cfg.apply_env(|k| std::env::var(k).ok()).map_err(from_orchestrator)?;
    if let Some(b) = &args.bind {
        cfg.bind = b.clone();
    }
    if let Some(p) = args.port {
        cfg.port = p;
    }
    if let Some(d) = &args.data_dir {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(d) = &args.image_dir {
        cfg.image_dir = Some(d.clone());
    }
    cfg.validate().map_err(from_orchestrator)?;
    Ok(cfg)
}

pub fn run(ctx: &Context, args: &ServeArgs) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    if args.sweep_secs == 0 {
        return Err(CliError::Usage("--sweep-secs must be positive".into()));
    }
    let cfg = config(ctx, args)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io("runtime", e))?;
    rt.block_on(async {
        let orch = Orchestrator::start(cfg, Clock::System).map_err(from_orchestrator)?;
        let addr = format!("{}:{}", orch.config().bind, orch.config().port);
        let listener = http::bind(&orch).await.map_err(|e| CliError::io(&addr, e))?;
        let local = listener.local_addr().map_err(|e| CliError::io(&addr, e))?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        http::serve(orch, listener, Duration::from_secs(args.sweep_secs), shutdown)
            .await
            .map_err(|e| CliError::io(&addr, e))
    })
}
