fn main() {
    std::process::exit(nevsim::cli::run(std::env::args_os()));
}
