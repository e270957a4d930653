fn main() {
    std::process::exit(finmeas::cli::run());
}
