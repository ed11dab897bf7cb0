fn main() {
    std::process::exit(ldme::cli::run_cli(std::env::args_os()));
}
