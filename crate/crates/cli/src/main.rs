fn main() {
    std::process::exit(cade_cli::run(std::env::args_os()));
}
