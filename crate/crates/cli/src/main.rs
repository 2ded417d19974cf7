fn main() {
    std::process::exit(gbbm_cli::run_cli(std::env::args_os()));
}
