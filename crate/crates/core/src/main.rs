fn main() {
    std::process::exit(proxysel::cli::run(std::env::args_os()));
}
