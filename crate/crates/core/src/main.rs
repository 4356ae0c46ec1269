fn main() {
    std::process::exit(amsim::cli::run(std::env::args_os()));
}
