fn main() {
    std::process::exit(coxscreen::cli::run(std::env::args()));
}
