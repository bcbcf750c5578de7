fn main() {
    std::process::exit(lshj_core::cli::run());
}
