fn main() {
    std::process::exit(ncpos::cli::run(std::env::args_os()));
}
