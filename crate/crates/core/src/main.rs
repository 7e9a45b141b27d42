fn main() {
    std::process::exit(hose_core::cli::run_cli(std::env::args_os()));
}
