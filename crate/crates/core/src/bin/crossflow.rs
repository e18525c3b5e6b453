fn main() {
    std::process::exit(crossflow::cli::run(std::env::args_os()));
}
