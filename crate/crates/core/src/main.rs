fn main() {
    std::process::exit(dressing_core::cli::run(std::env::args_os()));
}
