fn main() {
    std::process::exit(rpca_cli::run_command(std::env::args_os()));
}
