fn main() {
    std::process::exit(screenline_cli::run(std::env::args_os()));
}
