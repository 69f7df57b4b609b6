fn main() {
    std::process::exit(gems::cli::run(std::env::args_os()));
}
