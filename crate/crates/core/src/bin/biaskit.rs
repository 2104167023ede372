fn main() {
    std::process::exit(biaskit::cli::run(std::env::args_os()));
}
