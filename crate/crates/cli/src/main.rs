use boussinesq_io::cli::Cli;
use boussinesq_io::runner;
use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = runner::execute(&cli);
    let m = &outcome.manifest;
    if let Some(e) = &m.energy {
        println!(
            "energy verdict: {} (worst relative slack {:e} at step {})",
            e.verdict, e.worst_relative_slack, e.worst_step
        );
    }
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    for f in &m.outputs {
        println!("wrote {}", cli.out_dir.join(f).display());
    }
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    std::process::exit(outcome.exit_code);
}
