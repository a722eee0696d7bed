fn main() {
    std::process::exit(lidarcam::cli::run(std::env::args_os()));
}
