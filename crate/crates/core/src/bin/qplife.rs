fn main() {
    std::process::exit(qplife::cli::run(std::env::args_os()));
}
