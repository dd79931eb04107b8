use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use par4sim::formats;
use par4sim::sim::{ols_slope_test, run_campaign, run_personalization, write_personal_csv, SimConfig};

#[derive(Parser)]
#[command(name = "par4sim-sim", about = "Simulated crowd campaigns against the adaptive service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write curve.csv, matrix.csv, personal.csv and logs.
    Run {
        /// JSON simulation config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Skip per-worker personalization.
        #[arg(long)]
        no_personal: bool,
    },
    /// Print the default config as JSON.
    DefaultConfig,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::DefaultConfig => println!("{}", serde_json::to_string_pretty(&SimConfig::default())?),
        Command::Run { config, seed, out, no_personal } => {
            let cfg = match config {
                Some(p) => SimConfig::load(&p)?,
                None => SimConfig::default(),
            };
            let start = Instant::now();
            let campaign = run_campaign(&cfg, seed, &out)?;
            println!("iteration  adaptive  baseline  lm_order  train_groups");
            for r in &campaign.records {
                let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
                println!(
                    "{:>9}  {:>8}  {:>8}  {:>8}  {:>12}",
                    r.iteration,
                    pct(r.mean_ndcg_at_10),
                    pct(r.mean_ndcg_at_10_baseline),
                    pct(r.mean_ndcg_at_10_lm_order),
                    r.training_groups
                );
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = campaign
                .records
                .iter()
                .filter_map(|r| Some((r.iteration as f64, r.mean_ndcg_at_10?)))
                .unzip();
            if let Some(test) = ols_slope_test(&xs, &ys) {
                println!("slope {:.5} per iteration, p = {:.4}", test.slope, test.p_value);
            }
            println!(
                "served {} lists, {} contract violations, {} separation violations, {:.1}s",
                campaign.served_lists,
                campaign.contract_violations.len(),
                campaign.separation_violations.len(),
                start.elapsed().as_secs_f64()
            );
            if !no_personal {
                let results = run_personalization(&campaign, cfg.personalization_top_k, &cfg.train)?;
                write_personal_csv(&results, formats::create(&out.join("personal.csv"))?)?;
                let wins = results.iter().filter(|r| r.personal_wins()).count();
                for r in &results {
                    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
                    println!(
                        "{}  selections {:>4}  personal {:>6}  global {:>6}",
                        r.worker_id,
                        r.selections,
                        pct(r.mean_personal),
                        pct(r.mean_global)
                    );
                }
                println!("personal beats global for {wins}/{} workers", results.len());
            }
        }
    }
    Ok(())
}
