fn main() {
    std::process::exit(stablearn::harness::cli::cli_main(std::env::args_os()));
}
