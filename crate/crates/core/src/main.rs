fn main() {
    std::process::exit(jumpfeed::cli::run(std::env::args_os()));
}
