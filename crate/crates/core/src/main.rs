fn main() {
    std::process::exit(deepjscc_mimo::harness::cli::run(std::env::args_os()));
}
