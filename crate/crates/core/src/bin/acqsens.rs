fn main() {
    std::process::exit(acqsens::cli::run(std::env::args_os()));
}
