fn main() {
    std::process::exit(dynma::cli::run(std::env::args_os()));
}
