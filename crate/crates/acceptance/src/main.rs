//! The persistlab command line, rebuilt here so the acceptance suite can
//! drive it as a subprocess.

fn main() {
    std::process::exit(persistlab::cli::run(std::env::args_os().skip(1)));
}
