fn main() {
    std::process::exit(flashmod::cli::run_cli(std::env::args_os()));
}
