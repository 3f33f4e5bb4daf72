fn main() {
    std::process::exit(ringlens::cli::run(std::env::args_os()));
}
