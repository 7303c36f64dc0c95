fn main() {
    std::process::exit(exitlens::cli::run(std::env::args_os()));
}
