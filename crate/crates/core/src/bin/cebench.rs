fn main() {
    std::process::exit(cebench::cli::run(std::env::args_os()));
}
