fn main() {
    std::process::exit(cngauge::cli::cli_main(std::env::args_os()));
}
