fn main() {
    std::process::exit(stripsim::cli::run(std::env::args_os()));
}
