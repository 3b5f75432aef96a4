fn main() {
    std::process::exit(proxfly::cli::run(std::env::args_os()));
}
