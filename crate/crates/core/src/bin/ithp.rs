fn main() {
    std::process::exit(ithp::cli::run(std::env::args()));
}
