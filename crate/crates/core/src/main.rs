fn main() {
    std::process::exit(sdpi::cli::run());
}
