fn main() {
    std::process::exit(condtail_cli::run_cli(std::env::args_os()));
}
