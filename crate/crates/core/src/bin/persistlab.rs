fn main() {
    std::process::exit(persistlab::cli::run(std::env::args_os().skip(1)));
}
