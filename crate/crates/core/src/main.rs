fn main() {
    std::process::exit(curvreal::cli::run(std::env::args_os()));
}
