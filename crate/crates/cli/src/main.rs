use clap::Parser;

fn main() {
    let cli = gds_cli::Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = match gds_cli::run(&cli, &mut std::io::stdin().lock(), &mut std::io::stdout().lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gds: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
