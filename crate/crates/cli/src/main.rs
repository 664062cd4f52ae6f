fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = gripsdf_cli::run_from(std::env::args_os()) {
        eprintln!("gripsdf: {e}");
        std::process::exit(e.exit_code());
    }
}
