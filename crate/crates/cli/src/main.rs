fn main() {
    std::process::exit(stbn_cli::run(std::env::args_os()));
}
