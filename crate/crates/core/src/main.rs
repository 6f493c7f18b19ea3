fn main() {
    std::process::exit(churn_core::cli::run_cli(std::env::args_os()));
}
