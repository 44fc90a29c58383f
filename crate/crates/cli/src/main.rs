fn main() {
    std::process::exit(tunalab_cli::run_cli(std::env::args_os()));
}
