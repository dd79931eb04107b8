use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use par4sim::config::ServiceConfig;
use par4sim::formats;
use par4sim::service::{http, Service};
use par4sim_core::adaptive::{evaluate, evaluate_stored_order};
use par4sim_core::lm::Interpolation;
use par4sim_core::ltr::train_lambdamart;

#[derive(Parser)]
#[command(name = "par4sim", about = "Adaptive paraphrase ranking service and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the REST API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Train a ranker on a LETOR file.
    Train {
        #[arg(long)]
        letor: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training parameters come from this service config when given.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Mean NDCG@k of a model, and of the stored order, on a LETOR file.
    Eval {
        #[arg(long)]
        letor: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Count n-grams of a tokenized corpus into an LM file.
    BuildLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, num_args = 3, default_values_t = [0.6, 0.3, 0.1])]
        weights: Vec<f64>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Serve { config, addr } => {
            let cfg = ServiceConfig::load(&config)?;
            let service = Arc::new(Service::open(cfg)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("bind {addr}"))?;
                eprintln!("listening on {addr}");
                axum::serve(listener, http::router(service))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
        Command::Train { letor, out, config } => {
            let params = match config {
                Some(p) => ServiceConfig::load(&p)?.train,
                None => Default::default(),
            };
            let groups = formats::read_letor(formats::open(&letor)?)?;
            let model = train_lambdamart(&groups, &params)?;
            formats::write_model(&model, formats::create(&out)?)?;
            println!("trained {} trees on {} groups", model.trees.len(), groups.len());
        }
        Command::Eval { letor, model, k } => {
            let groups = formats::read_letor(formats::open(&letor)?)?;
            let model = formats::read_model(formats::open(&model)?)?;
            let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
            let m = evaluate(&model, &groups, k);
            let s = evaluate_stored_order(&groups, k);
            println!("model NDCG@{k} {} over {} groups ({} all-zero)", pct(m.mean_ndcg), m.evaluated, m.excluded_all_zero);
            println!("stored order NDCG@{k} {}", pct(s.mean_ndcg));
        }
        Command::BuildLm { corpus, out, weights } => {
            let w = Interpolation::new(weights[0], weights[1], weights[2])?;
            let lm = formats::read_corpus(formats::open(&corpus)?, w)?;
            formats::write_lm(&lm, formats::create(&out)?)?;
        }
    }
    Ok(())
}
