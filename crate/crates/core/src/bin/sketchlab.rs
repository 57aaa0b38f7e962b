fn main() {
    std::process::exit(sketchlab::cli::run());
}
