fn main() {
    std::process::exit(mttm::cli::run(std::env::args_os()));
}
