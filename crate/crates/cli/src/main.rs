fn main() {
    std::process::exit(ensroute_cli::run(std::env::args_os()));
}
