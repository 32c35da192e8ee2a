fn main() {
    std::process::exit(polymax_cli::run(std::env::args_os()));
}
