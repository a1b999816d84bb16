fn main() {
    std::process::exit(divdecode::cli::run(std::env::args_os()));
}
