fn main() {
    std::process::exit(bigglm::cli::run(std::env::args_os()));
}
