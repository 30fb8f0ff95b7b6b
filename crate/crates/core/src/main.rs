fn main() {
    std::process::exit(subscan::cli::run(std::env::args_os()));
}
