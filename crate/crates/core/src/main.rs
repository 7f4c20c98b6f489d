use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latent_occ::pipeline::*;

/// One-class scoring and reference-distance clustering of Gaussian latent embeddings.
#[derive(Parser)]
#[command(name = "latent-occ", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic posterior dataset.
    Fixture(FixtureCmd),
    /// Fit the normal-class Gaussian.
    FitNormal(FitNormalCmd),
    /// Score every record against a fitted model.
    Score(ScoreCmd),
    /// ROC and threshold metrics of a scores file.
    EvalOcc(EvalOccCmd),
    /// Stratified k-fold evaluation of the one-class scorer.
    Crossval(CrossvalCmd),
    /// Cross-entropy matrix of references against targets.
    CrsdMatrix(CrsdMatrixCmd),
    /// Cluster records.
    Cluster(ClusterCmd),
    /// Homogeneity, completeness and V-measure of cluster labels.
    EvalCluster(EvalClusterCmd),
    /// Monte-Carlo audit of the latent ELBO terms.
    ElboAudit(ElboAuditCmd),
    /// Latent traversal grids around the fitted mean.
    Traverse(TraverseCmd),
    /// Check the distance identities on random Gaussians.
    VerifyIdentities(VerifyIdentitiesCmd),
    /// AUROC table over a directory of embedding exports.
    Sweep(SweepCmd),
}

fn main() -> ExitCode {
    // Usage errors are validation failures; clap's own code 2 is reserved for I/O here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Fixture(c) => c.run(),
        Command::FitNormal(c) => c.run(),
        Command::Score(c) => c.run(),
        Command::EvalOcc(c) => c.run(),
        Command::Crossval(c) => c.run(),
        Command::CrsdMatrix(c) => c.run(),
        Command::Cluster(c) => c.run(),
        Command::EvalCluster(c) => c.run(),
        Command::ElboAudit(c) => c.run(),
        Command::Traverse(c) => c.run(),
        Command::VerifyIdentities(c) => c.run(),
        Command::Sweep(c) => c.run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
