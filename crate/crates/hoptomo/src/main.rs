fn main() {
    std::process::exit(hoptomo::cli::run(std::env::args_os()));
}
